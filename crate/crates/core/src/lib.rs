//! SIP-DG discretisation of the Poisson problem and the Dirichlet Laplacian
//! eigenproblem on the Koch snowflake.

pub mod assembly;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod linsolve;
pub mod mesh;
pub mod moments;
pub mod polybasis;
pub mod scalar;
pub mod studies;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Vec2f64 = geometry::Vec2<f64>;
pub type Vec2f32 = geometry::Vec2<f32>;
pub type Similarity64 = geometry::Similarity<f64>;
pub type Similarity32 = geometry::Similarity<f32>;
pub type Poly64 = polybasis::Poly2<f64>;
pub type Poly32 = polybasis::Poly2<f32>;
