//! Integrating-factor RK4 for `i∂ₜu + ½∂ₓ²u = N(u, ∂ₓu)`, `u(0) = εφ`.
//!
//! The integrated variable is the spectrum `y = F[v]` of `v = U(−t)u`, which obeys
//! `∂ₜv = −iU(−t)N(U(t)v, ∂ₓU(t)v)`. Dispersion is absorbed exactly, so `N = 0` is
//! integrated without error for any step. Cubic products are formed on a grid padded to
//! `2n` points, which removes aliasing from the retained modes.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::defaults;
use crate::error::{Error, Result};
use crate::nonlinearity::{CompiledNonlinearity, CubicNonlinearity, EXCLUDED_MONOMIALS};
use crate::spectral::{
    boundary_mass_fraction, fmt_f64, g_factor, linf_norm, sobolev_norm, spectral_tail_fraction_of, FieldState,
    Grid, GridSpec, SpectralProfile,
};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Initial profile `φ`; the run starts from `εφ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatumSpec {
    /// `A·exp(−(x − c)²/2w²)·e^{ivx}`.
    Gaussian {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        center: f64,
        #[serde(default = "one")]
        width: f64,
        #[serde(default)]
        velocity: f64,
    },
    /// `A·sech((x − c)/w)·e^{ivx}`.
    Sech {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        center: f64,
        #[serde(default = "one")]
        width: f64,
        #[serde(default)]
        velocity: f64,
    },
    /// Columns `x,re,im`, linearly interpolated onto the grid.
    CustomCsv { path: PathBuf },
}

fn one() -> f64 {
    1.0
}

impl Default for DatumSpec {
    fn default() -> Self {
        DatumSpec::Gaussian { amplitude: 1.0, center: 0.0, width: 1.0, velocity: 0.0 }
    }
}

impl DatumSpec {
    pub fn gaussian(amplitude: f64) -> Self {
        DatumSpec::Gaussian { amplitude, center: 0.0, width: 1.0, velocity: 0.0 }
    }

    /// Makes a relative CSV path relative to `base` instead of the working directory.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let DatumSpec::CustomCsv { path } = self {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }

    /// Samples `φ` on the grid at `t = 0`.
    pub fn sample(&self, grid: &Grid) -> Result<FieldState> {
        let shape = |amplitude: f64, center: f64, width: f64, velocity: f64, f: fn(f64) -> f64| -> Result<FieldState> {
            for (name, v) in [("amplitude", amplitude), ("center", center), ("velocity", velocity)] {
                if !v.is_finite() {
                    return Err(Error::config(format!("datum.{name}"), "must be finite"));
                }
            }
            if !(width > 0.0 && width.is_finite()) {
                return Err(Error::config("datum.width", format!("must be positive, got {width}")));
            }
            Ok(FieldState::from_fn(grid.clone(), 0.0, |x| {
                Complex64::from_polar(amplitude * f((x - center) / width), velocity * x)
            }))
        };
        match *self {
            DatumSpec::Gaussian { amplitude, center, width, velocity } => {
                shape(amplitude, center, width, velocity, |s| (-0.5 * s * s).exp())
            }
            DatumSpec::Sech { amplitude, center, width, velocity } => {
                shape(amplitude, center, width, velocity, |s| 1.0 / s.cosh())
            }
            DatumSpec::CustomCsv { ref path } => FieldState::read_csv(grid.clone(), 0.0, path),
        }
    }
}

/// One simulation: grid, datum, nonlinearity, tolerances and what to record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub grid: GridSpec,
    pub epsilon: f64,
    #[serde(default)]
    pub datum: DatumSpec,
    #[serde(default)]
    pub nonlinearity: CubicNonlinearity,
    pub t_end: f64,
    #[serde(default = "default_dt0")]
    pub dt0: f64,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default = "default_dt_min")]
    pub dt_min: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    /// Threshold on `‖u‖_{H¹}`; `1e3·ε` when absent.
    #[serde(default)]
    pub blowup_threshold: Option<f64>,
    /// Diagnostics every `stride` time units; 0 records only the endpoints.
    #[serde(default)]
    pub stride: f64,
    /// Additional log-spaced record times in `[1, t_end]`.
    #[serde(default)]
    pub log_samples: usize,
    /// Times at which the full field is kept.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Keep the field at every k-th record; 0 disables.
    #[serde(default)]
    pub snapshot_stride: usize,
    /// Frequencies at which `α(t, ξ)` is recorded.
    #[serde(default)]
    pub probe_xi: Vec<f64>,
    /// Accept nonlinearities with `u³`, `uū²` or `ū³` terms.
    #[serde(default)]
    pub allow_weak_violation: bool,
}

fn default_dt0() -> f64 {
    defaults::SOLVER_DT0
}
fn default_rtol() -> f64 {
    defaults::SOLVER_RTOL
}
fn default_atol() -> f64 {
    defaults::SOLVER_ATOL
}
fn default_dt_min() -> f64 {
    defaults::SOLVER_DT_MIN
}
fn default_dt_max() -> f64 {
    defaults::SOLVER_DT_MAX
}
fn default_max_steps() -> usize {
    defaults::SOLVER_MAX_STEPS
}

impl SolverConfig {
    pub fn new(epsilon: f64, nonlinearity: CubicNonlinearity, t_end: f64) -> Self {
        Self {
            grid: GridSpec::default(),
            epsilon,
            datum: DatumSpec::default(),
            nonlinearity,
            t_end,
            dt0: default_dt0(),
            rtol: default_rtol(),
            atol: default_atol(),
            dt_min: default_dt_min(),
            dt_max: default_dt_max(),
            max_steps: default_max_steps(),
            blowup_threshold: None,
            stride: 0.0,
            log_samples: 0,
            snapshot_times: Vec::new(),
            snapshot_stride: 0,
            probe_xi: Vec::new(),
            allow_weak_violation: false,
        }
    }

    pub fn threshold(&self) -> f64 {
        self.blowup_threshold.unwrap_or(defaults::BLOWUP_H1_FACTOR * self.epsilon)
    }

    /// The same config with every default made explicit.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.blowup_threshold = Some(self.threshold());
        c
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be positive and finite, got {v}")))
            }
        };
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config("epsilon", format!("must be finite and ≥ 0, got {}", self.epsilon)));
        }
        positive("t_end", self.t_end)?;
        positive("dt0", self.dt0)?;
        positive("rtol", self.rtol)?;
        positive("dt_min", self.dt_min)?;
        if !(self.dt_max >= self.dt_min) {
            return Err(Error::config("dt_max", "must be at least dt_min"));
        }
        if !(self.atol >= 0.0) {
            return Err(Error::config("atol", format!("must be ≥ 0, got {}", self.atol)));
        }
        if !(self.stride >= 0.0 && self.stride.is_finite()) {
            return Err(Error::config("stride", format!("must be finite and ≥ 0, got {}", self.stride)));
        }
        if let Some(b) = self.blowup_threshold {
            if !(b >= 0.0) {
                return Err(Error::config("blowup_threshold", format!("must be ≥ 0, got {b}")));
            }
        }
        if let Some(t) = self.snapshot_times.iter().find(|t| !(**t >= 0.0 && **t <= self.t_end)) {
            return Err(Error::config("snapshot_times", format!("{t} lies outside [0, t_end]")));
        }
        if self.probe_xi.iter().any(|x| !x.is_finite()) {
            return Err(Error::config("probe_xi", "must be finite"));
        }
        if !self.allow_weak_violation && !self.nonlinearity.satisfies_weak_condition() {
            let m = EXCLUDED_MONOMIALS
                .iter()
                .copied()
                .find(|m| self.nonlinearity.coefficient(*m) != ZERO)
                .expect("weak condition fails only through an excluded monomial");
            return Err(Error::WeakCondition(m));
        }
        Grid::from_spec(&self.grid).map_err(|e| match e {
            Error::Config { field, reason } => Error::config(format!("grid.{field}"), reason),
            other => other,
        })?;
        Ok(())
    }

    /// `εφ` on the configured grid, checked for finite `H³` and `H^{2,1}` norms.
    pub fn initial_state(&self) -> Result<FieldState> {
        let grid = Grid::from_spec(&self.grid)?;
        let phi = self.datum.sample(&grid)?;
        let h3 = sobolev_norm(&phi, 3, 0)?;
        let h21 = sobolev_norm(&phi, 2, 1)?;
        if !(h3.is_finite() && h21.is_finite()) {
            return Err(Error::config("datum", "H³ or H^{2,1} norm is not finite on the grid"));
        }
        let frac = boundary_mass_fraction(&phi);
        if frac > defaults::BOUNDARY_MASS_FAIL {
            return Err(Error::config("datum", format!("boundary mass fraction {frac:.3e}; enlarge the box")));
        }
        Ok(phi.scaled(Complex64::new(self.epsilon, 0.0)))
    }

    /// Sorted, de-duplicated record times including `0` and `t_end`.
    pub fn record_times(&self) -> Vec<f64> {
        let mut ts = vec![0.0, self.t_end];
        if self.stride > 0.0 {
            let k = (self.t_end / self.stride).floor() as usize;
            ts.extend((1..=k).map(|i| i as f64 * self.stride).filter(|t| *t < self.t_end));
        }
        if self.log_samples > 0 && self.t_end > 1.0 {
            let m = self.log_samples;
            let l = self.t_end.ln();
            ts.extend((0..m).map(|i| if m == 1 { 1.0 } else { (l * i as f64 / (m - 1) as f64).exp() }));
        }
        ts.extend(self.snapshot_times.iter().copied());
        ts.retain(|t| *t <= self.t_end);
        ts.sort_by(f64::total_cmp);
        ts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
        if let Some(last) = ts.last_mut() {
            *last = self.t_end;
        }
        ts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunFlag {
    Completed,
    Blowup,
    ResolutionLoss,
}

/// Diagnostics at one record time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    pub t: f64,
    /// Last accepted step.
    pub dt: f64,
    pub l2: f64,
    pub linf: f64,
    pub h1: f64,
    pub h3: f64,
    /// `‖Ju‖_{H²}`.
    pub j_h2: f64,
    /// `sup_ξ ⟨ξ⟩²|α(t, ξ)|`.
    pub sup_alpha: f64,
    pub boundary_mass: f64,
    pub spectral_tail: f64,
    /// `α(t, ξ)` at the configured probe frequencies.
    pub probes: Vec<Complex64>,
}

/// Machine-readable outcome of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub t_observed: f64,
    pub flag: RunFlag,
    pub reason: Option<String>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub boundary_warning: bool,
    pub final_l2: f64,
    pub final_linf: f64,
    pub final_h1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub probe_xi: Vec<f64>,
    pub records: Vec<DiagnosticRecord>,
    pub snapshots: Vec<FieldState>,
    pub final_state: FieldState,
    pub summary: RunSummary,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&FieldState> {
        self.snapshots.iter().find(|s| (s.t - t).abs() <= 1e-9 * (1.0 + t.abs()))
    }

    /// `(t, α(t, ξ_i))` for probe `i`.
    pub fn probe_series(&self, i: usize) -> Vec<(f64, Complex64)> {
        self.records.iter().map(|r| (r.t, r.probes[i])).collect()
    }

    pub fn write_diagnostics_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> =
            ["t", "dt", "l2", "linf", "h1", "h3", "j_h2", "sup_alpha", "boundary_mass", "spectral_tail"]
                .iter()
                .map(|s| s.to_string())
                .collect();
        for i in 0..self.probe_xi.len() {
            header.push(format!("alpha{i}_re"));
            header.push(format!("alpha{i}_im"));
        }
        w.write_record(&header)?;
        for r in &self.records {
            let mut row: Vec<String> = [
                r.t,
                r.dt,
                r.l2,
                r.linf,
                r.h1,
                r.h3,
                r.j_h2,
                r.sup_alpha,
                r.boundary_mass,
                r.spectral_tail,
            ]
            .iter()
            .map(|v| fmt_f64(*v))
            .collect();
            for p in &r.probes {
                row.push(fmt_f64(p.re));
                row.push(fmt_f64(p.im));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.summary)? + "\n")?;
        Ok(())
    }
}

/// Right-hand side `−iU(−t)N(U(t)v, ∂ₓU(t)v)` on spectra, with its work buffers.
struct Rhs {
    grid: Grid,
    xi: Vec<f64>,
    nl: CompiledNonlinearity,
    phase: Vec<Complex64>,
    uh: Vec<Complex64>,
    uxh: Vec<Complex64>,
    pu: Vec<Complex64>,
    pux: Vec<Complex64>,
}

impl Rhs {
    fn new(grid: &Grid, n: &CubicNonlinearity) -> Self {
        let len = grid.n();
        let m = grid.padded_len();
        Self {
            grid: grid.clone(),
            xi: grid.wavenumbers(),
            nl: n.compile(),
            phase: vec![ZERO; len],
            uh: vec![ZERO; len],
            uxh: vec![ZERO; len],
            pu: vec![ZERO; m],
            pux: vec![ZERO; m],
        }
    }

    fn eval(&mut self, t: f64, y: &[Complex64], out: &mut [Complex64]) {
        if self.nl.is_zero() {
            out.fill(ZERO);
            return;
        }
        let n = self.grid.n() as f64;
        for k in 0..y.len() {
            let xi = self.xi[k];
            let ph = Complex64::from_polar(1.0, -0.5 * t * xi * xi);
            self.phase[k] = ph;
            self.uh[k] = ph * y[k] / n;
            self.uxh[k] = I * xi * self.uh[k];
        }
        self.grid.pad_spectrum(&self.uh, &mut self.pu);
        self.grid.pad_spectrum(&self.uxh, &mut self.pux);
        self.grid.inverse_padded(&mut self.pu);
        self.grid.inverse_padded(&mut self.pux);
        let nl = &self.nl;
        self.pu.par_chunks_mut(4096).zip(self.pux.par_chunks(4096)).for_each(|(a, b)| {
            for (z, w) in a.iter_mut().zip(b) {
                *z = nl.eval(*z, *w);
            }
        });
        self.grid.forward_padded(&mut self.pu);
        self.grid.truncate_spectrum(&self.pu, &mut self.uh);
        let s = 1.0 / defaults::PAD_FACTOR as f64;
        for k in 0..y.len() {
            out[k] = -I * self.phase[k].conj() * self.uh[k] * s;
        }
    }
}

/// Classic RK4 stages with the embedded third-order companion.
struct Stepper {
    rhs: Rhs,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl Stepper {
    fn new(grid: &Grid, n: &CubicNonlinearity) -> Self {
        let len = grid.n();
        Self { rhs: Rhs::new(grid, n), k2: vec![ZERO; len], k3: vec![ZERO; len], k4: vec![ZERO; len], tmp: vec![ZERO; len] }
    }

    /// Writes the RK4 update into `y_new`; `k4` stays available for the error estimate.
    fn rk4(&mut self, t: f64, y: &[Complex64], k1: &[Complex64], dt: f64, y_new: &mut [Complex64]) {
        let h2 = 0.5 * dt;
        axpy(&mut self.tmp, y, h2, k1);
        self.rhs.eval(t + h2, &self.tmp, &mut self.k2);
        axpy(&mut self.tmp, y, h2, &self.k2);
        self.rhs.eval(t + h2, &self.tmp, &mut self.k3);
        axpy(&mut self.tmp, y, dt, &self.k3);
        self.rhs.eval(t + dt, &self.tmp, &mut self.k4);
        let h6 = dt / 6.0;
        for k in 0..y.len() {
            y_new[k] = y[k] + h6 * (k1[k] + 2.0 * (self.k2[k] + self.k3[k]) + self.k4[k]);
        }
    }
}

fn axpy(out: &mut [Complex64], y: &[Complex64], a: f64, k: &[Complex64]) {
    for ((o, y), k) in out.iter_mut().zip(y).zip(k) {
        *o = y + a * k;
    }
}

/// `F[U(−t)u]`.
fn to_interaction(u: &FieldState) -> Vec<Complex64> {
    let mut y = u.values.clone();
    u.grid.forward(&mut y);
    let t = u.t;
    for (k, v) in y.iter_mut().enumerate() {
        let xi = u.grid.mode(k) as f64 * u.grid.dxi();
        *v *= Complex64::from_polar(1.0, 0.5 * t * xi * xi);
    }
    y
}

/// `u(t) = U(t)F⁻¹[y]`.
fn field_at(grid: &Grid, t: f64, y: &[Complex64]) -> FieldState {
    let mut buf: Vec<Complex64> = y
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let xi = grid.mode(k) as f64 * grid.dxi();
            v * Complex64::from_polar(1.0, -0.5 * t * xi * xi)
        })
        .collect();
    grid.inverse(&mut buf);
    FieldState { grid: grid.clone(), t, values: buf }
}

/// `‖u‖_{H^s}` from the interaction spectrum (the free phase has modulus one).
fn hs_from_spectrum(grid: &Grid, y: &[Complex64], s: i32) -> f64 {
    let sum: f64 = y
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let xi = grid.mode(k) as f64 * grid.dxi();
            (1.0 + xi * xi).powi(s) * v.norm_sqr()
        })
        .sum();
    (sum * grid.dx() / grid.n() as f64).sqrt()
}

fn l2_of_spectrum(grid: &Grid, y: &[Complex64]) -> f64 {
    hs_from_spectrum(grid, y, 0)
}

/// `α(t, ·)` in natural order from the interaction spectrum.
fn alpha_from_spectrum(grid: &Grid, t: f64, y: &[Complex64]) -> SpectralProfile {
    let values = (0..grid.n())
        .map(|i| {
            let k = grid.natural_to_fft(i);
            y[k] * g_factor(grid, k)
        })
        .collect();
    SpectralProfile { grid: grid.clone(), t, values }
}

/// `‖Ju‖_{H²}` with `Ju = U(t) x U(−t)u`; `v = U(−t)u` stays localized, so the box
/// coordinate is reliable here.
fn j_h2_from_spectrum(grid: &Grid, y: &[Complex64]) -> f64 {
    let mut v = y.to_vec();
    grid.inverse(&mut v);
    for (j, s) in v.iter_mut().enumerate() {
        *s *= grid.x(j);
    }
    grid.forward(&mut v);
    hs_from_spectrum(grid, &v, 2)
}

fn record(grid: &Grid, t: f64, dt: f64, y: &[Complex64], u: &FieldState, probe_xi: &[f64]) -> DiagnosticRecord {
    let w = grid.dx() / (2.0 * PI).sqrt();
    let sup_alpha = y
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let xi = grid.mode(k) as f64 * grid.dxi();
            (1.0 + xi * xi) * v.norm() * w
        })
        .fold(0.0, f64::max);
    let probes = if probe_xi.is_empty() {
        Vec::new()
    } else {
        let a = alpha_from_spectrum(grid, t, y);
        probe_xi.iter().map(|xi| a.interpolate(*xi)).collect()
    };
    DiagnosticRecord {
        t,
        dt,
        l2: l2_of_spectrum(grid, y),
        linf: linf_norm(u),
        h1: hs_from_spectrum(grid, y, 1),
        h3: hs_from_spectrum(grid, y, 3),
        j_h2: j_h2_from_spectrum(grid, y),
        sup_alpha,
        boundary_mass: boundary_mass_fraction(u),
        spectral_tail: spectral_tail_fraction_of(grid, y),
        probes,
    }
}

/// One RK4 step of length `dt` from `u` (at time `u.t`).
pub fn step(u: &FieldState, n: &CubicNonlinearity, dt: f64) -> Result<FieldState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::domain(format!("dt must be positive, got {dt}")));
    }
    integrate_fixed(u, n, u.t + dt, 1)
}

/// `steps` equal RK4 steps from `u.t` to `t_end`, without error control.
pub fn integrate_fixed(u: &FieldState, n: &CubicNonlinearity, t_end: f64, steps: usize) -> Result<FieldState> {
    if !(t_end > u.t) || steps == 0 {
        return Err(Error::domain(format!("need t_end > {} and at least one step", u.t)));
    }
    let grid = &u.grid;
    let mut st = Stepper::new(grid, n);
    let mut y = to_interaction(u);
    let mut y_new = vec![ZERO; y.len()];
    let mut k1 = vec![ZERO; y.len()];
    let dt = (t_end - u.t) / steps as f64;
    for i in 0..steps {
        let t = u.t + i as f64 * dt;
        st.rhs.eval(t, &y, &mut k1);
        st.rk4(t, &y, &k1, dt, &mut y_new);
        if y_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t: t + dt });
        }
        std::mem::swap(&mut y, &mut y_new);
    }
    Ok(field_at(grid, t_end, &y))
}

/// Runs `config` from `εφ`.
pub fn run(config: &SolverConfig) -> Result<Trajectory> {
    config.validate()?;
    let u0 = config.initial_state()?;
    integrate(config, &u0)
}

/// Runs `config` from an explicit initial state (its time is the start time).
pub fn run_from(config: &SolverConfig, u0: &FieldState) -> Result<Trajectory> {
    config.validate()?;
    if Grid::from_spec(&config.grid)? != u0.grid {
        return Err(Error::config("grid", "does not match the initial state"));
    }
    integrate(config, u0)
}

/// Largest time reached with accepted steps before any sentinel fires.
pub fn local_existence_window(config: &SolverConfig) -> Result<f64> {
    let mut c = config.clone();
    c.stride = 0.0;
    c.log_samples = 0;
    c.snapshot_times.clear();
    c.snapshot_stride = 0;
    c.probe_xi.clear();
    Ok(run(&c)?.summary.t_observed)
}

fn integrate(config: &SolverConfig, u0: &FieldState) -> Result<Trajectory> {
    let grid = u0.grid.clone();
    let t0 = u0.t;
    let threshold = config.threshold();
    let mut times: Vec<f64> = config.record_times().into_iter().filter(|t| *t >= t0).collect();
    if times.first() != Some(&t0) {
        times.insert(0, t0);
    }
    let is_snapshot = |t: f64, idx: usize| {
        config.snapshot_times.iter().any(|s| (s - t).abs() <= 1e-12 * (1.0 + t.abs()))
            || (config.snapshot_stride > 0 && idx % config.snapshot_stride == 0)
    };

    let mut st = Stepper::new(&grid, &config.nonlinearity);
    let mut y = to_interaction(u0);
    let mut y_new = vec![ZERO; y.len()];
    let mut k1 = vec![ZERO; y.len()];
    let mut k5 = vec![ZERO; y.len()];
    st.rhs.eval(t0, &y, &mut k1);

    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    let mut t = t0;
    let mut dt = config.dt0.min(config.dt_max);
    let mut last_h = 0.0;
    let mut err_prev = 1.0f64;
    let (mut accepted, mut rejected) = (0usize, 0usize);
    let mut boundary_warning = false;
    let mut outcome: Option<(RunFlag, String)> = None;
    let mut next = 0usize;
    let mut u = u0.clone();

    let check = |y: &[Complex64], u: &FieldState, warned: &mut bool| -> Option<(RunFlag, String)> {
        let tail = spectral_tail_fraction_of(&grid, y);
        if tail > defaults::SPECTRAL_TAIL_FAIL {
            return Some((RunFlag::ResolutionLoss, format!("spectral tail fraction {tail:.3e}")));
        }
        let h1 = hs_from_spectrum(&grid, y, 1);
        if h1 > threshold {
            return Some((RunFlag::Blowup, format!("H1 norm {h1:.6e} exceeds {threshold:.6e}")));
        }
        let bm = boundary_mass_fraction(u);
        if bm > defaults::BOUNDARY_MASS_FAIL {
            return Some((RunFlag::ResolutionLoss, format!("boundary mass fraction {bm:.3e}")));
        }
        if bm > defaults::BOUNDARY_MASS_WARN && !*warned {
            log::warn!("boundary mass fraction {bm:.3e} at t = {}", u.t);
            *warned = true;
        }
        None
    };

    outcome = outcome.or_else(|| check(&y, &u, &mut boundary_warning));
    if outcome.is_none() {
        if times.get(next) == Some(&t0) {
            records.push(record(&grid, t, 0.0, &y, &u, &config.probe_xi));
            if is_snapshot(t, 0) {
                snapshots.push(u.clone());
            }
            next += 1;
        }
        while next < times.len() {
            if accepted + rejected >= config.max_steps {
                outcome = Some(collapse_flag(&grid, &y, format!("step budget of {} exhausted", config.max_steps)));
                break;
            }
            let target = times[next];
            let landing = t + dt >= target;
            let h = if landing { target - t } else { dt };
            st.rk4(t, &y, &k1, h, &mut y_new);
            st.rhs.eval(t + h, &y_new, &mut k5);
            if y_new.iter().any(|v| !v.is_finite()) || k5.iter().any(|v| !v.is_finite()) {
                outcome = Some((RunFlag::Blowup, format!("non-finite state at t = {}", t + h)));
                break;
            }
            let mut e2 = 0.0;
            for k in 0..y.len() {
                e2 += (st.k4[k] - k5[k]).norm_sqr();
            }
            let e = h / 6.0 * (e2 * grid.dx() / grid.n() as f64).sqrt();
            let scale = config.atol + config.rtol * l2_of_spectrum(&grid, &y).max(l2_of_spectrum(&grid, &y_new));
            let err = if scale > 0.0 { e / scale } else if e == 0.0 { 0.0 } else { f64::INFINITY };
            if err <= 1.0 {
                t = if landing { target } else { t + h };
                std::mem::swap(&mut y, &mut y_new);
                std::mem::swap(&mut k1, &mut k5);
                accepted += 1;
                last_h = h;
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.7 / 4.0) * err_prev.powf(0.4 / 4.0)).clamp(0.2, 5.0)
                };
                let proposal = (h * fac).min(config.dt_max);
                if !(landing && h < dt) {
                    dt = proposal;
                }
                err_prev = err.max(1e-4);
                u = field_at(&grid, t, &y);
                if let Some(o) = check(&y, &u, &mut boundary_warning) {
                    outcome = Some(o);
                    break;
                }
                if landing {
                    let idx = records.len();
                    records.push(record(&grid, t, h, &y, &u, &config.probe_xi));
                    if is_snapshot(t, idx) {
                        snapshots.push(u.clone());
                    }
                    next += 1;
                }
            } else {
                rejected += 1;
                dt = h * (0.9 * err.powf(-0.25)).clamp(0.2, 1.0);
                if dt < config.dt_min {
                    outcome = Some(collapse_flag(&grid, &y, format!("step size collapsed below {:.3e}", config.dt_min)));
                    break;
                }
            }
        }
    }

    if outcome.is_some() && records.last().is_none_or(|r| r.t < t) {
        records.push(record(&grid, t, last_h, &y, &u, &config.probe_xi));
    }
    let (flag, reason) = match outcome {
        Some((f, r)) => {
            log::info!("run stopped at t = {t}: {r}");
            (f, Some(r))
        }
        None => (RunFlag::Completed, None),
    };
    let summary = RunSummary {
        t_observed: t,
        flag,
        reason,
        steps_accepted: accepted,
        steps_rejected: rejected,
        boundary_warning,
        final_l2: l2_of_spectrum(&grid, &y),
        final_linf: linf_norm(&u),
        final_h1: hs_from_spectrum(&grid, &y, 1),
    };
    Ok(Trajectory { probe_xi: config.probe_xi.clone(), records, snapshots, final_state: u, summary })
}

/// A step-size collapse is resolution loss when the spectral tail is already large.
fn collapse_flag(grid: &Grid, y: &[Complex64], why: String) -> (RunFlag, String) {
    let tail = spectral_tail_fraction_of(grid, y);
    if tail > defaults::SPECTRAL_TAIL_FAIL {
        (RunFlag::ResolutionLoss, format!("{why}; spectral tail fraction {tail:.3e}"))
    } else {
        (RunFlag::Blowup, why)
    }
}

/// Human-readable one-line summary.
pub fn describe(summary: &RunSummary) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:?} at t = {:.6}", summary.flag, summary.t_observed);
    if let Some(r) = &summary.reason {
        let _ = write!(s, " ({r})");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{extract_alpha, free_propagate, l2_norm};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn small(epsilon: f64, n: CubicNonlinearity, t_end: f64) -> SolverConfig {
        let mut cfg = SolverConfig::new(epsilon, n, t_end);
        cfg.grid = GridSpec { n: 512, half_width: 32.0 * PI };
        cfg
    }

    fn rel_diff(a: &FieldState, b: &FieldState) -> f64 {
        let d = a.with_values(a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect());
        l2_norm(&d) / l2_norm(b)
    }

    fn cubic() -> CubicNonlinearity {
        CubicNonlinearity::monomial(2, 1, 0, 0, c(1.0, 0.0))
    }

    #[test]
    fn free_step_is_exact() {
        let cfg = small(0.3, CubicNonlinearity::zero(), 1.0);
        let u0 = cfg.initial_state().unwrap();
        let u1 = step(&u0, &CubicNonlinearity::zero(), 0.7).unwrap();
        assert!(rel_diff(&u1, &free_propagate(&u0, 0.7)) <= 1e-12);
        assert_eq!(u1.t, 0.7);
    }

    #[test]
    fn free_run_is_exact_and_alpha_is_constant() {
        let mut cfg = small(0.3, CubicNonlinearity::zero(), 5.0);
        cfg.stride = 1.0;
        cfg.probe_xi = vec![0.0, 0.8];
        let tr = run(&cfg).unwrap();
        assert_eq!(tr.summary.flag, RunFlag::Completed);
        let u0 = cfg.initial_state().unwrap();
        assert!(rel_diff(&tr.final_state, &free_propagate(&u0, 5.0)) <= 5e-12);
        let a0 = tr.records[0].probes.clone();
        for r in &tr.records {
            for (p, q) in r.probes.iter().zip(&a0) {
                assert!((p - q).norm() <= 1e-9);
            }
        }
        let t = tr.times();
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(t.len(), 6);
    }

    #[test]
    fn zero_datum_stays_zero() {
        let tr = run(&small(0.0, cubic(), 3.0)).unwrap();
        assert_eq!(tr.summary.flag, RunFlag::Completed);
        assert!(tr.final_state.values.iter().all(|v| *v == ZERO));
    }

    #[test]
    fn cubic_nls_conserves_mass() {
        let mut cfg = small(0.5, cubic(), 10.0);
        cfg.grid.n = 1024;
        cfg.rtol = 1e-11;
        let tr = run(&cfg).unwrap();
        assert_eq!(tr.summary.flag, RunFlag::Completed, "{:?}", tr.summary);
        let m0 = tr.records[0].l2;
        let drift = (tr.summary.final_l2 - m0).abs() / m0;
        assert!(drift <= 1e-8, "drift {drift:e}");
    }

    #[test]
    fn fixed_step_order_is_four() {
        let n = cubic().add(&CubicNonlinearity::monomial(0, 0, 2, 1, c(0.0, 1.0)));
        let mut cfg = small(0.6, n.clone(), 1.0);
        cfg.grid = GridSpec { n: 256, half_width: 16.0 * PI };
        let u0 = cfg.initial_state().unwrap();
        let runs: Vec<FieldState> = [16, 32, 64].iter().map(|s| integrate_fixed(&u0, &n, 1.0, *s).unwrap()).collect();
        let e1 = rel_diff(&runs[0], &runs[1]);
        let e2 = rel_diff(&runs[1], &runs[2]);
        let order = (e1 / e2).log2();
        assert!((3.7..=4.3).contains(&order), "order {order}");
    }

    #[test]
    fn scaling_datum_and_epsilon_is_invisible() {
        let mut a = small(0.4, cubic(), 2.0);
        a.stride = 0.5;
        let mut b = a.clone();
        b.epsilon = 0.2;
        b.datum = DatumSpec::gaussian(2.0);
        let (ta, tb) = (run(&a).unwrap(), run(&b).unwrap());
        assert_eq!(ta.final_state.values, tb.final_state.values);
    }

    #[test]
    fn weak_condition_is_enforced_unless_overridden() {
        let mut cfg = small(0.1, CubicNonlinearity::monomial(3, 0, 0, 0, c(1.0, 0.0)), 1.0);
        assert!(matches!(run(&cfg), Err(Error::WeakCondition(_))));
        cfg.allow_weak_violation = true;
        assert_eq!(run(&cfg).unwrap().summary.flag, RunFlag::Completed);
    }

    #[test]
    fn unresolved_datum_is_resolution_loss() {
        let mut cfg = small(0.1, cubic(), 1.0);
        cfg.datum = DatumSpec::Gaussian { amplitude: 1.0, center: 0.0, width: 0.15, velocity: 0.0 };
        let tr = run(&cfg).unwrap();
        assert_eq!(tr.summary.flag, RunFlag::ResolutionLoss);
        assert_eq!(tr.summary.t_observed, 0.0);
    }

    #[test]
    fn focusing_growth_is_caught() {
        // i|u|²u on the right gives ∂ₜ|u| = |u|³ pointwise: blow-up near t = 1/(2ε²).
        let mut cfg = small(2.0, CubicNonlinearity::monomial(2, 1, 0, 0, c(0.0, 1.0)), 1.0);
        cfg.allow_weak_violation = false;
        let tr = run(&cfg).unwrap();
        assert_ne!(tr.summary.flag, RunFlag::Completed);
        assert!(tr.summary.t_observed < 0.2, "{:?}", tr.summary);
        assert!(local_existence_window(&cfg).unwrap() < 0.2);
    }

    #[test]
    fn snapshots_and_alpha_probes_agree_with_operators() {
        let mut cfg = small(0.3, cubic(), 2.0);
        cfg.snapshot_times = vec![1.0];
        cfg.probe_xi = vec![0.5];
        let tr = run(&cfg).unwrap();
        let s = tr.snapshot_at(1.0).unwrap();
        let a = extract_alpha(s);
        let r = tr.records.iter().find(|r| r.t == 1.0).unwrap();
        assert!((a.interpolate(0.5) - r.probes[0]).norm() <= 1e-12);
    }

    #[test]
    fn record_times_are_sorted_and_bounded() {
        let mut cfg = SolverConfig::new(0.1, cubic(), 100.0);
        cfg.stride = 25.0;
        cfg.log_samples = 3;
        cfg.snapshot_times = vec![10.0, 25.0];
        assert_eq!(cfg.record_times(), vec![0.0, 1.0, 10.0, 25.0, 50.0, 75.0, 100.0]);
    }

    #[test]
    fn config_round_trips_through_json() {
        let text = r#"{"epsilon": 0.1, "t_end": 5, "nonlinearity": {"lambda": [1, 0, 0, 0, 0, 0]},
                       "datum": {"kind": "sech", "width": 2}}"#;
        let cfg: SolverConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.datum, DatumSpec::Sech { amplitude: 1.0, center: 0.0, width: 2.0, velocity: 0.0 });
        let back: SolverConfig = serde_json::from_str(&serde_json::to_string(&cfg.resolved()).unwrap()).unwrap();
        assert_eq!(back.blowup_threshold, Some(100.0 * 1.0));
        assert!(serde_json::from_str::<SolverConfig>(r#"{"epsilon": 0.1, "t_end": 1, "bogus": 1}"#).is_err());
    }
}
