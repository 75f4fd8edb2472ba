//! Explicit constants of the concentration argument, evaluated on a truncated
//! chain and checked against exact tails and measured functionals.

mod concentration;
mod path;
mod semigroup;

pub use concentration::{
    admissible_lambda, compute_c3_general, compute_c3_sum_function, epsilon_star,
    general_hypotheses, lambda0_log, lambda0_product, talagrand_verdict, AdmissibleLambda,
    C3Report, ConcentrationCertificate, GeneralHypotheses, SumFunctionC3, TailRow, TalagrandReport,
    DEFAULT_MARGIN, MIN_LAMBDA,
};
pub use path::{measured_lyapunov_d1, path_method_c0, PathMethodReport};
pub use semigroup::{
    default_function_suite, log_log_slope, max_t0, semigroup_poincare_report, t1, theta, FitRow,
    OutsideSupportCheck, SemigroupOptions, SemigroupReport, SuiteFunction, D1_EXPONENT_CAP,
    D2_EXPONENT_CAP, SUITE_SIZE,
};
