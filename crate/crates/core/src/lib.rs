//! Reconstruction of convex polytopes from convex polyhedral metrics on the
//! sphere by curvature continuation over generalized convex polytopes.

pub mod cli;
pub mod dual;
pub mod embed;
pub mod error;
pub mod jacobian;
pub mod polytope;
pub mod samples;
pub mod solver;
pub mod surface;
pub mod triangulation;
pub mod trig;

pub use error::{Error, Result};
pub use surface::{build_metric, parse_development, Development, PolyhedralMetric};
