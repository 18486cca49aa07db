//! Every numerical default used by the library and the CLI.
//!
//! Bump [`DEFAULTS_VERSION`] whenever a value below changes; run manifests
//! record it so that archived outputs can be traced to the defaults in force.

pub const DEFAULTS_VERSION: &str = "1";

// Grid.
pub const GRID_POINTS: usize = 4096;
pub const GRID_HALF_WIDTH: f64 = 48.0 * std::f64::consts::PI;
pub const MIN_GRID_POINTS: usize = 16;

/// Fraction of total mass allowed in the outer tenth of the box before a warning.
pub const BOUNDARY_MASS_WARN: f64 = 1e-10;
/// Fraction of total mass in the outer tenth of the box that ends a run as resolution loss.
pub const BOUNDARY_MASS_FAIL: f64 = 1e-6;
/// Width of the boundary layer, as a fraction of the half-width.
pub const BOUNDARY_LAYER: f64 = 0.1;
/// Energy fraction in the top third of the spectrum that ends a run as resolution loss.
pub const SPECTRAL_TAIL_FAIL: f64 = 1e-8;

// Symbol.
pub const NU_QUADRATURE_NODES: usize = 64;
pub const NU_QUADRATURE_MIN_NODES: usize = 8;

// Solver.
pub const SOLVER_DT0: f64 = 1e-2;
pub const SOLVER_RTOL: f64 = 1e-9;
pub const SOLVER_ATOL: f64 = 1e-12;
pub const SOLVER_DT_MIN: f64 = 1e-10;
pub const SOLVER_DT_MAX: f64 = 1.0;
pub const SOLVER_MAX_STEPS: usize = 2_000_000;
/// Blow-up threshold on the H^1 norm, in units of epsilon.
pub const BLOWUP_H1_FACTOR: f64 = 1e3;
pub const PAD_FACTOR: usize = 2;

// Reduced ODE.
pub const ODE_XI_SAMPLES: usize = 2048;
pub const ODE_T_SAMPLES: usize = 512;
pub const ODE_XI_RANGE: f64 = 16.0;
/// Ceiling on |beta| in units of epsilon before a run is declared blown up.
pub const ODE_CEILING_FACTOR: f64 = 1e6;
pub const ODE_TOL: f64 = 1e-10;
pub const ODE_OUTPUT_POINTS: usize = 64;
/// Smallest admissible `M^{−1/δ}` accepted by the random problem generator.
pub const BOUND_TRIAL_MIN_EPSILON: f64 = 1e-3;

// Analysis.
/// Tail contribution to a supremum, relative to the maximum, above which the grid is flagged.
pub const SUP_TAIL_RELATIVE: f64 = 1e-12;
pub const COMPARISON_WINDOW: (f64, f64) = (10.0, 1e3);
pub const CLASSIFY_TOL: f64 = 1e-12;

// Smoothing operator inverse (GMRES).
pub const GMRES_RESTART: usize = 60;
pub const GMRES_TOL: f64 = 1e-12;
pub const GMRES_MAX_ITERS: usize = 2000;
