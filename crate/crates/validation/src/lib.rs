//! Runner for acceptance criteria: one PASS/FAIL line per criterion.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

pub type CheckResult = Result<Outcome, Box<dyn std::error::Error>>;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

/// Runs criteria in order, printing a line for each as it finishes.
pub struct Runner {
    filters: Vec<String>,
    passed: usize,
    failed: Vec<String>,
}

impl Runner {
    /// Positional arguments act as substring filters on criterion names.
    pub fn from_args() -> Self {
        let filters = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
        Runner {
            filters,
            passed: 0,
            failed: Vec::new(),
        }
    }

    pub fn check(&mut self, name: &str, f: impl FnOnce() -> CheckResult) {
        if !self.filters.is_empty() && !self.filters.iter().any(|p| name.contains(p.as_str())) {
            return;
        }
        let start = Instant::now();
        let outcome = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(Ok(o)) => o,
            Ok(Err(e)) => Outcome::new(false, format!("error: {e}")),
            Err(panic) => {
                let msg = panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Outcome::new(false, format!("panicked: {msg}"))
            }
        };
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!(
            "{tag} {name} ({:.1}s): {}",
            start.elapsed().as_secs_f64(),
            outcome.detail
        );
        if outcome.pass {
            self.passed += 1;
        } else {
            self.failed.push(name.to_string());
        }
    }

    pub fn finish(self) -> ExitCode {
        println!("\nacceptance: {} passed, {} failed", self.passed, self.failed.len());
        if self.failed.is_empty() {
            ExitCode::SUCCESS
        } else {
            println!("failed: {}", self.failed.join(", "));
            ExitCode::FAILURE
        }
    }
}
