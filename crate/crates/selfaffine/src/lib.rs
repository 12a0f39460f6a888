//! Geometry of self-affine sets under an expanding integer or real matrix.
//!
//! Given an expanding matrix `A` (all eigenvalue moduli > 1) and a digit set
//! `D` containing 0, the maps `f_d(x) = A^{-1}(x + d)` generate a compact
//! attractor `K` with `A·K = ∪_d (K + d)`. Because `A` may stretch different
//! directions at different rates, Euclidean balls are the wrong measuring
//! sticks for `K`; this crate builds the pseudo norm `w` adapted to `A`
//! (exactly homogeneous: `w(Ax) = |det A|^{1/n} · w(x)`, symmetric, comparable
//! to a power of the Euclidean norm) and uses it for everything downstream:
//!
//! * [`linalg`] — expanding-matrix spectra, the renormed vector norm that makes
//!   `A` uniformly expanding in a single step, exact/float matrix powers.
//! * [`norm`] — the pseudo norm itself (step kernel, mollified kernel, or the
//!   exact-similarity shortcut), its quasi-triangle and comparability
//!   constants, and certified diameter brackets.
//! * [`digits`] — expansion sets `D_M = D + AD + … + A^{M-1}D`, exact
//!   open-set-condition decisions via a difference automaton, collision
//!   amplification, and near-collision generators.
//! * [`attractor`] — truncated attractor clouds with certified error radii,
//!   chaos-game sampling of the natural measure, cylinder decompositions,
//!   and set-distance under `w`.
//! * [`density`] — upper-density sweeps, the measure bracket built from the
//!   density identity (the pseudo measure of `K` is the reciprocal of the
//!   upper convex density of its natural measure), dimension estimates, and
//!   the convolution cross-check.
//! * [`render`] — raster output (PGM/PPM, RGBA) of clouds and histograms.
//! * [`cache`] — deterministic binary caches for norm grids and expansion sets.
//!
//! All estimators are desk-scale: budgets are explicit, every bracket reports
//! which side is certified and which is empirical, and all sampling is driven
//! by counter-based substreams so results are byte-identical at any thread
//! count.

pub mod attractor;
pub mod cache;
pub mod density;
pub mod digits;
pub mod error;
pub mod linalg;
pub mod norm;
pub(crate) mod par;
pub mod render;
pub mod rng;
pub mod window;

pub use attractor::{
    attractor_radius, build_cylinders, chaos_game, enumerate_cloud, point_on_attractor,
    sigma_mass_of_window, AttractorCloud, CylinderSet,
};
pub use density::{
    collision_density_bound, convolution_check, density_sweep, dim_estimate, measure_bracket,
    ConvolutionReport, DensitySweep, DimReport, MeasureReport, SweepParams,
};
pub use digits::{
    collision_amplify, count_distinct, decide_osc, expansion_enumerate, near_collision_digits,
    CollisionAmplification, ExpansionSet, OscReport, OscVerdict, OscWitness, PointData,
};
pub use error::{Error, Result};
pub use linalg::{
    build_renorm, default_theta, matrix_power_apply, parse_rational, spectral_data,
    ArithmeticMode, ExpandingMatrix, ExpandingSystem, RenormedNorm,
};
pub use norm::{build_pseudo_norm, DiamBracket, NormVariant, PseudoNorm};
pub use window::{CellClass, ConvexWindow};
