//! Numerical solver for the prescribed k-th Weingarten curvature Dirichlet
//! problem `sigma_k[u] = psi(x, u, theta)` for spacelike radial graphs over
//! geodesic disks of the hyperbolic plane in Lorentz-Minkowski space, with a
//! harness that checks the associated identities and a-priori estimates.

pub mod cli;
pub mod error;
pub mod estimates;
pub mod geom;
pub mod hchart;
pub mod solver;
pub mod symk;

pub use error::{Error, Result};
