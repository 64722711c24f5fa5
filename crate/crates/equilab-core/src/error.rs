use thiserror::Error;

/// Errors surfaced by the numerical operations.
#[derive(Debug, Error)]
pub enum CoreError {
    /// Adaptive oscillatory quadrature did not converge within the panel cap.
    #[error("unsupported frequency: oscillatory quadrature did not converge (panels {panels}, est. error {estimate:.3e})")]
    UnsupportedFrequency { panels: usize, estimate: f64 },

    /// All magnitudes in a decay series sit below the noise floor; no slope can be fitted.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// The Lemma 6.1 denominator gamma+beta+(gamma-beta)e^{-2t} is too close to zero.
    #[error("singular denominator at t = {t}: |gamma+beta+(gamma-beta)e^(-2t)| = {value:.3e}")]
    SingularDenominator { t: f64, value: f64 },

    /// The 2x2 system fixing c1, c2 from initial data is numerically singular.
    #[error("ill-conditioned initial data: condition number {cond:.3e}")]
    IllConditionedInitialData { cond: f64 },

    /// The forcing term G grows along the probe grid instead of staying bounded.
    #[error("unbounded G: sup over probe grid increases monotonically toward t = {t_end}")]
    UnboundedG { t_end: f64 },

    /// Greedy Dirichlet reduction failed to terminate (generator-set error).
    #[error("reduction did not terminate within {0} steps")]
    NonTermination(usize),

    /// A precondition on the inputs was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
