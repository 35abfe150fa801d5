use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not skew-symmetric (symmetric part {residual:e})")]
    NotSkew { residual: f64 },
    #[error("matrix is not a rotation (orthonormality residual {residual:e})")]
    NotRotation { residual: f64 },
    #[error("vector is not unit length (norm {norm})")]
    NotUnit { norm: f64 },
    #[error("invalid plant parameters: {0}")]
    InvalidParams(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("mass matrix is singular (condition estimate {condition:e})")]
    SingularMassMatrix { condition: f64 },
    #[error("state became non-finite")]
    NonFinite,
    #[error("simulation aborted at step {step}: {source}")]
    Aborted {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("ideal thrust magnitude {norm:e} N is below the degeneracy threshold")]
    DegenerateThrust { norm: f64 },
    #[error("heading reference is parallel to the commanded thrust axis")]
    HeadingParallel,
    #[error("c3 = {c3} is not below the admissible bound {bound}")]
    C3TooLarge { c3: f64, bound: f64 },
}
