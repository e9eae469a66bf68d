//! Numerical laboratory for the second Painlevé equation
//!
//! w″ = α + z·w + 2w³
//!
//! The crate integrates solutions along arbitrary paths in the complex
//! plane, continues them through their movable poles by local Laurent
//! re-expansion, applies the Bäcklund transformation family (α ± 1,
//! reflection, rotation, and the special α = 0 ↔ α = 1/2 map), builds
//! pole atlases over annular sectors (strings, counting functions,
//! contour residue counts), evaluates the first integral
//! W = w⁴ + zw² + 2αw − w′² and its scaled cluster values, and extracts
//! re-scaled windows w_h(𝔷) = h^{−1/2} w(h + h^{−1/2}𝔷) together with
//! their trigonometric limit fits.
//!
//! All computations are deterministic: identical inputs produce
//! bit-identical results. Data-parallel drivers (ray scans, window
//! grids, sample sweeps) use rayon when the `parallel` feature is
//! enabled (default) and fall back to sequential execution otherwise;
//! results are merged in a fixed order either way.

pub mod atlas;
pub mod error;
pub mod field;
pub mod first_integral;
pub mod integrator;
pub mod laurent;
pub mod parallel;
pub mod rescale;
pub mod series;
pub mod solution;
pub mod transforms;

pub use error::{Error, Result};
pub use solution::{OdeState, Origin, Recipe, ResolvedSeed, SolutionSpec};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
