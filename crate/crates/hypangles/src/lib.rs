//! Pair correlation statistics of hyperbolic lattice angles.
//!
//! The library enumerates elements of a Fuchsian lattice inside norm
//! balls, computes the empirical pair correlation of the associated ray
//! angles on the orbit of i in the upper half-plane, evaluates the
//! explicit limiting density these statistics converge to, and provides
//! an independent Monte Carlo check of the underlying volume
//! asymptotics.

pub mod correlation;
pub mod density;
pub mod hyperbolic;
pub mod lattice;
pub mod quad;
pub mod volume;

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix determinant {det} is not 1 within tolerance")]
    NotUnimodular { det: f64 },
    #[error("point ({x}, {y}) is not in the upper half-plane")]
    InvalidPoint { x: f64, y: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("generator list is empty")]
    EmptyGenerators,
    #[error("enumeration radius q^2 = {0} is below the identity norm 2")]
    BadMargin(f64),
    #[error("xi grid must be strictly increasing and positive")]
    BadGrid,
    #[error("angular interval [{lo}, {hi}) is empty or longer than 2 pi")]
    EmptyInterval { lo: f64, hi: f64 },
    #[error("truncation norm {t_max} too small for xi = {xi}; need at least {needed}")]
    TruncationTooSmall { t_max: f64, xi: f64, needed: f64 },
    #[error("rotation fixes i and defines no sector")]
    RotationNotAllowed,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
