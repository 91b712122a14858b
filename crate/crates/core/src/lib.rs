//! Exact and numeric machinery for the Horn problem on 3×3 orbits.
//!
//! The crate is organized around three pipelines that share one exact
//! polynomial substrate:
//!
//! * [`sampler`] — Haar Monte Carlo over SO(3)/U(3)/USp(3) orbits and
//!   histogram construction,
//! * [`quat`] — the exact quaternionic (β̲ = 4) piecewise-polynomial density
//!   obtained by symbolic Dirichlet reduction,
//! * [`sym`] — the real-symmetric (β̲ = 1) density ρ(p,q) via the resultant
//!   surface R(u,z), its critical structure and singular asymptotics,
//! * [`zonal`] — an exact Jack/zonal symmetric-function engine whose
//!   structure constants are compared with the continuous densities.
//!
//! Supporting modules: [`multipoly`] (exact multivariate algebra, resultants),
//! [`unipoly`] (numeric root isolation), [`quadrature`] (adaptive
//! Gauss–Kronrod and tanh-sinh rules), [`geom`] (exact rational polygon
//! clipping and integration), [`domain`] (Horn polygon and the curvilinear
//! (p,q) domain).

pub mod domain;
pub mod error;
pub mod geom;
pub mod multipoly;
pub mod quadrature;
pub mod quat;
pub mod rat;
pub mod sampler;
pub mod spectrum;
pub mod sym;
pub mod unipoly;

pub use domain::{HornPolygon, PQDomain, SingularLocus};
pub use error::HornError;
pub use multipoly::{CRat, MultiPoly, QPoly};
pub use rat::Rat;
pub use spectrum::{EnsembleKind, Spectrum};
pub use sym::{Region, RhoValue, SingularModel, SymPipeline};

/// Crate version string, re-exported for manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
