//! Large deviations of Heston variance functionals: exact CIR simulation,
//! limiting CGFs and their Legendre transforms, finite-horizon MGFs,
//! asymptotic-arbitrage regime classification and a deterministic parallel
//! Monte Carlo harness.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cir;
pub mod error;
pub mod interval;
pub mod kummer;
pub mod mc;
pub mod mgf;
pub mod model;
pub mod path;
pub mod rate;
pub mod regimes;

pub use cir::{cir_step, CirTransition};
pub use error::{Error, Result};
pub use interval::{DomainInterval, ExtendedReal};
pub use kummer::kummer_1f1;
pub use mc::{
    decay_slope, ergodic_check, estimate_prob, ldp_check, martingale_check, stopping_time_experiment, DecayEstimate,
    Direction, LdpReport, McSettings, Speed, TailQuery,
};
pub use mgf::{convergence_gap, log_mgf_alpha_beta, log_mgf_full, MgfQuery, PsiDenominator};
pub use model::{girsanov_kernels, FunctionalCoeffs, ModelParams};
pub use path::{functional_value, radon_nikodym_gamma1, simulate_variance_path, PathRecord};
pub use rate::{
    cgf_derivative, cgf_limit, derivative_image, domain_of, legendre_transform, rate_minimum, LimitCgf, RateEval,
    RateMinimum,
};
pub use regimes::{
    classify_gamma1, classify_gamma2, classify_linear_arbitrage, classify_sublinear_arbitrage, sublinear_thresholds,
    ArbitrageConstants, RegimeKind, RegimeReport, Verdict,
};
