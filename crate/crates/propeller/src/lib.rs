//! Numerical laboratory for equivariant harmonic maps into the round sphere.
//!
//! The pipeline, end to end:
//!
//! 1. `geometry` builds a closed genus-2p surface: two unit spheres joined by
//!    2p+1 cylindrical tubes, carrying an exact cyclic (order 2p+1) vertex
//!    permutation and an exact up/down mirror permutation.
//! 2. `initmap` equips the surface with an initial sphere-valued map that
//!    collapses the spheres to the poles and wraps each tube over a rotated
//!    meridian, and measures its Dirichlet energy with cotangent weights.
//! 3. `flow` runs projected explicit-Euler heat flow for the tension field,
//!    monitoring energy monotonicity, equivariance, bubbling, and containment.
//! 4. `region` models the forbidden equatorial band region ("propeller") and
//!    its obstruction checks (antipodes, great circles, sweep-out separation).
//! 5. `analysis` verifies the converged map: harmonic residual, degree,
//!    containment margins, equator points, Courant-Lebesgue diameter bounds.
//! 6. `config`/`run` wire everything into the `propeller` command-line tool.

pub mod analysis;
pub mod config;
pub mod flow;
pub mod geometry;
pub mod initmap;
pub mod io;
pub mod region;
pub mod run;
