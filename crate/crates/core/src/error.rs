use thiserror::Error;

/// Errors raised while building, validating, or certifying higher-order objects.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("system index {0} appears more than once")]
    IndexCollision(usize),
    #[error("system index {0} is not part of the operator")]
    IndexNotFound(usize),
    #[error("signature mismatch: {0}")]
    SignatureMismatch(String),
    #[error("operator is not Hermitian (asymmetry {0:.3e})")]
    NotHermitian(f64),
    #[error("operator is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e}){}", effect_label(.effect))]
    NotPositive {
        min_eigenvalue: f64,
        effect: Option<usize>,
    },
    #[error("comb causality condition violated at level {level} (residual {residual:.3e})")]
    CausalityViolation { level: usize, residual: f64 },
    #[error("tooth {0} is not a channel (residual {1:.3e})")]
    NotAChannel(usize, f64),
    #[error("operator is not a density operator: {0}")]
    NotAState(String),
    #[error("POVM elements do not sum to the identity (residual {0:.3e})")]
    NotAPovm(f64),
    #[error("tester normalization violated at level {level} (residual {residual:.3e})")]
    NormalizationViolation { level: usize, residual: f64 },
    #[error("tester probe is not normalized (trace {0})")]
    ProbeNotNormalized(f64),
    #[error("invalid probability data: {0}")]
    BadProbability(String),
    #[error("{what} needs {needed} outcomes, above the configured cap {cap}")]
    CapExceeded {
        what: &'static str,
        needed: usize,
        cap: usize,
    },
    #[error("robustness {0:.3e} is too small to reconstruct noise testers")]
    DegenerateRobustness(f64),
    #[error("dual certificate has zero total trace")]
    ZeroDual,
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("malformed input: {0}")]
    Format(String),
}

fn effect_label(effect: &Option<usize>) -> String {
    match effect {
        Some(x) => format!(" for effect {x}"),
        None => String::new(),
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
