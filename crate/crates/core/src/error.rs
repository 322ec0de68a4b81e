use thiserror::Error;

/// Errors raised by the asymptotic analyses and their exact oracles.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("size guard exceeded: {what} = {size} > {limit}")]
    Guard { what: &'static str, size: f64, limit: f64 },

    #[error("N = {n} is not admissible for degrees (l, r) = ({l}, {r}): r must divide N*l")]
    Inadmissible { n: usize, l: usize, r: usize },

    #[error("matrix is singular (pivot {pivot:.3e} below threshold)")]
    Singular { pivot: f64 },

    #[error("AT-instability: det(I - D2g(U'-U)) = {det:.6e} is not positive; central approximation invalid")]
    AtInstability { det: f64 },

    #[error("instability: det(I - C(V'-V)) = {det:.6e} is not positive; central approximation invalid")]
    BetheInstability { det: f64 },

    #[error("boundary maximizer: min probability {min:.3e} < 1e-10 (interior maximizer required)")]
    BoundaryMaximizer { min: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("RS correction undefined (instability): log argument {argument:.6e} is not positive")]
    RsUndefined { argument: f64 },

    #[error("critical or RSB regime (beta = {beta}) is out of scope: second-order analysis is insufficient for beta >= 1")]
    OutOfScope { beta: f64 },
}

impl Error {
    /// True for failures of the numerics (instabilities, non-convergence) as opposed
    /// to rejected inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. }
                | Error::AtInstability { .. }
                | Error::BetheInstability { .. }
                | Error::BoundaryMaximizer { .. }
                | Error::NonConvergence { .. }
                | Error::RsUndefined { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
