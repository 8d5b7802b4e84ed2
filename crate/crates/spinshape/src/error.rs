//! Error type shared by all modules of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid frame vectors: {0}")]
    InvalidFrame(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch between operands: {0}")]
    GridMismatch(String),

    #[error("level n={n} is not a bound state for gamma={gamma}, beta={beta}")]
    NotABoundState { gamma: f64, beta: f64, n: usize },

    #[error("parameter flow leaves the admissible region at step {step}: gamma_k={gamma_k}")]
    FlowOutOfRange { step: usize, gamma_k: f64 },

    #[error("superpotential family has no finite asymptote; zero-mode seeding undefined")]
    UnboundedSuperpotential,

    #[error(
        "no normalizable zero mode at gamma_n={gamma_n}, beta_n={beta_n}: needs gamma_n > |beta_n|/2"
    )]
    ZeroModeInadmissible { gamma_n: f64, beta_n: f64 },

    #[error("hypergeometric series argument |xi|={modulus} outside the convergence disc")]
    SeriesDomain { modulus: f64 },

    #[error("hypergeometric parameter c={c} is at or near a nonpositive integer pole")]
    SeriesPole { c: num_complex::Complex64 },

    #[error("series did not converge within {max_terms} terms")]
    SeriesNoConvergence { max_terms: usize },

    #[error("matrix superpotential is not real in this frame (frame has a y-component)")]
    ComplexFrame,

    #[error("zero-mode pair is nearly linearly dependent: gram determinant {det:.3e}")]
    LinearDependence { det: f64 },

    #[error("banded factorization broke down after {retries} shift retries")]
    FactorizationBreakdown { retries: usize },

    #[error("eigensolver: {0}")]
    Eigensolver(String),

    #[error("excited-state chain collapsed to a degenerate pair: gram determinant {det:.3e}")]
    DegeneracyCollapse { det: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
