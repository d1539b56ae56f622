//! Numerical laboratory for metrics on the Riemann sphere driven by data on a
//! base domain in C^m: spectral quadrature grids, Hilbert/Fubini-Study maps at
//! level k, a Hermitian-Yang-Mills relaxation solver for matrix-valued fields,
//! Perron-type envelopes probed along holomorphic graphs, and the differential
//! diagnostics (mixed Hessians, characteristic forms, Poisson brackets) tying
//! them together.
//!
//! Conventions used throughout:
//! * the sphere carries the potential `psi = log(1 + |x|^2)` and the area form
//!   normalized to total mass 1;
//! * Wirtinger derivatives are `d/dz = (d/dRe - i d/dIm)/2`, so the Euclidean
//!   Laplacian is `4 d^2/dz dzbar`;
//! * grids are uniform in logarithmic coordinates (`log z` on annuli, `log x`
//!   on the sphere), and chart-frame derivatives are recovered through the
//!   exact conformal factors.

pub mod analysis;
pub mod envelope;
pub mod experiments;
pub mod geometry;
pub mod hym;
pub mod linalg;
pub mod quantization;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("quadrature capacity supports degree {max_degree}, need degree {needed_degree}")]
    Capacity {
        needed_degree: usize,
        max_degree: usize,
    },
    #[error("metric form not positive at node {node}: density {value:.6e}")]
    NonKahler { node: usize, value: f64 },
    #[error("matrix too ill-conditioned: estimated condition number {cond:.3e}")]
    IllConditioned { cond: f64 },
    #[error(
        "relaxation stopped after {sweeps} sweeps with residual {residual:.3e} \
         (energy monotone: {energy_monotone})"
    )]
    NonConvergence {
        sweeps: usize,
        residual: f64,
        energy_monotone: bool,
        residual_history: Vec<f64>,
    },
    #[error("mollification needs a margin of {needed} cells, only {available} available")]
    DomainShrink { needed: usize, available: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("incompatible inputs: {0}")]
    Mismatch(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Labels an error with the pipeline stage that produced it.
    pub fn at_stage(self, stage: impl Into<String>) -> Error {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error with any stage labels peeled off.
    pub fn root(&self) -> &Error {
        let mut e = self;
        while let Error::Stage { source, .. } = e {
            e = source;
        }
        e
    }
}
