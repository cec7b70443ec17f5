//! All-or-nothing writing of a run's output files.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::run::OutputFile;

/// Writes every file to a hidden temporary name in `dir`, then renames them
/// into place. On any failure the temporaries and already renamed files are
/// removed, so a failed run leaves no partial output behind.
pub fn write_outputs(dir: &Path, files: &[OutputFile]) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let pid = std::process::id();
    let staged: Vec<(PathBuf, PathBuf)> = files
        .iter()
        .map(|f| (dir.join(format!(".{}.{pid}.partial", f.name)), dir.join(&f.name)))
        .collect();

    let cleanup = |upto_renamed: usize| {
        for (i, (tmp, dst)) in staged.iter().enumerate() {
            let _ = fs::remove_file(tmp);
            if i < upto_renamed {
                let _ = fs::remove_file(dst);
            }
        }
    };

    for (f, (tmp, _)) in files.iter().zip(&staged) {
        if let Err(e) = fs::write(tmp, f.contents.as_bytes()) {
            cleanup(0);
            return Err(e);
        }
    }
    for (i, (tmp, dst)) in staged.iter().enumerate() {
        if let Err(e) = fs::rename(tmp, dst) {
            cleanup(i);
            return Err(e);
        }
    }
    Ok(staged.into_iter().map(|(_, dst)| dst).collect())
}
