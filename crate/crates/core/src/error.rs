use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PefError {
    #[error("ErosionTooLarge: erosion radius {epsilon} must be below the minimal inradius {inradius}")]
    ErosionTooLarge { epsilon: f64, inradius: f64 },

    #[error("NonZeroMeanInput: field mean {mean:e} exceeds tolerance {tolerance:e}")]
    NonZeroMeanInput { mean: f64, tolerance: f64 },

    #[error("DensityInfeasible: mean density {rho_bar} must be below 2")]
    DensityInfeasible { rho_bar: f64 },

    #[error("InvalidPinIndex: net {net} references module {index}, design has {modules}")]
    InvalidPinIndex { net: usize, index: usize, modules: usize },

    #[error("InfeasibleBox: module {module} ({width}x{height}) does not fit the {domain_width}x{domain_height} outline")]
    InfeasibleBox {
        module: usize,
        width: f64,
        height: f64,
        domain_width: f64,
        domain_height: f64,
    },

    #[error("NonFiniteObjective at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },

    #[error("InsufficientData: need {needed} samples, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("PremiseNotMet: F(c*) = {f_star} exceeds F(c_opt) = {f_opt}")]
    PremiseNotMet { f_star: f64, f_opt: f64 },

    #[error("NegativeDensity: minimum density {min} after step (max {max})")]
    NegativeDensity { min: f64, max: f64 },

    #[error("ShapeMismatch: {what}: expected {expected}, got {actual}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, PefError>;
