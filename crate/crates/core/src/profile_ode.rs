//! Reduced profile dynamics `i∂ₜβ = (κ(ξ)/t)|β|²β + ρ(t, ξ)`, pointwise in ξ.
//!
//! The unperturbed problem (`ρ = 0`, `β(1) = εθ₀`) has a closed form; the
//! perturbed one is integrated with Dormand–Prince 5(4) in `τ = log t`,
//! where the drift becomes `−i(κ|β|²β + tρ)`.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::defaults;
use crate::error::{Error, Result};
use crate::maximize::refine_max;
use crate::nonlinearity::CubicNonlinearity;
use crate::spectral::fmt_f64;

const I: Complex64 = Complex64::new(0.0, 1.0);

pub use crate::nonlinearity::reduced_profile_rhs;

pub type Symbol = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;
/// `(τ, ξ) ↦ t·ρ(t, ξ)` with `t = e^τ`; stated in log-time so that very long horizons stay finite.
pub type Forcing = Arc<dyn Fn(f64, f64) -> Complex64 + Send + Sync>;

/// Density of the samples used to check hypotheses stated as suprema.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    #[serde(default = "default_xi_samples")]
    pub xi_samples: usize,
    #[serde(default = "default_t_samples")]
    pub t_samples: usize,
    /// ξ is sampled uniformly on `[−xi_range, xi_range]`.
    #[serde(default = "default_xi_range")]
    pub xi_range: f64,
}

fn default_xi_samples() -> usize {
    defaults::ODE_XI_SAMPLES
}
fn default_t_samples() -> usize {
    defaults::ODE_T_SAMPLES
}
fn default_xi_range() -> f64 {
    defaults::ODE_XI_RANGE
}

impl Default for Sampling {
    fn default() -> Self {
        Self { xi_samples: default_xi_samples(), t_samples: default_t_samples(), xi_range: default_xi_range() }
    }
}

impl Sampling {
    pub fn xi_nodes(&self) -> Vec<f64> {
        let m = self.xi_samples.max(2);
        (0..m)
            .map(|i| -self.xi_range + 2.0 * self.xi_range * i as f64 / (m - 1) as f64)
            .collect()
    }

    /// Uniform nodes in `τ = log t ∈ [0, log_t_max]`.
    pub fn log_t_nodes(&self, log_t_max: f64) -> Vec<f64> {
        let m = self.t_samples.max(2);
        (0..m).map(|i| log_t_max * i as f64 / (m - 1) as f64).collect()
    }
}

/// Data of the perturbed problem.
#[derive(Clone)]
pub struct OdeProblem {
    pub kappa: Symbol,
    pub theta0: Symbol,
    pub theta1: Symbol,
    pub t_rho: Forcing,
    pub epsilon: f64,
    pub delta: f64,
    pub mu: f64,
    pub c1: f64,
    pub c3: f64,
    pub c4: f64,
    /// `log T > 0` (may be `+∞` when `ρ ≡ 0`).
    pub log_t_max: f64,
}

impl std::fmt::Debug for OdeProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OdeProblem")
            .field("epsilon", &self.epsilon)
            .field("delta", &self.delta)
            .field("mu", &self.mu)
            .field("c1", &self.c1)
            .field("c3", &self.c3)
            .field("c4", &self.c4)
            .field("log_t_max", &self.log_t_max)
            .finish_non_exhaustive()
    }
}

fn zero_symbol() -> Symbol {
    Arc::new(|_| Complex64::new(0.0, 0.0))
}

fn zero_forcing() -> Forcing {
    Arc::new(|_, _| Complex64::new(0.0, 0.0))
}

/// `sup |f|` over the sampling nodes, refined near the best node.
pub fn sampled_sup_abs(f: &(dyn Fn(f64) -> Complex64 + Sync), sampling: &Sampling) -> f64 {
    refine_max(|x| f(x).norm(), &sampling.xi_nodes()).value
}

impl OdeProblem {
    /// `ρ ≡ 0`, `θ₁ ≡ 0`, `T = +∞`; `C₁` is taken from `sampling`.
    pub fn unperturbed(kappa: Symbol, theta0: Symbol, epsilon: f64, sampling: &Sampling) -> Self {
        let c1 = sampled_sup_abs(kappa.as_ref(), sampling);
        Self {
            kappa,
            theta0,
            theta1: zero_symbol(),
            t_rho: zero_forcing(),
            epsilon,
            delta: 1.0,
            mu: 1.0,
            c1,
            c3: 0.0,
            c4: 0.0,
            log_t_max: f64::INFINITY,
        }
    }

    /// The reduced problem of a nonlinearity and datum: `κ = ⟨ξ⟩⁻⁴ν`, `θ₀ = ⟨ξ⟩²φ̂`.
    pub fn from_nonlinearity(n: &CubicNonlinearity, phi_hat: Symbol, epsilon: f64, sampling: &Sampling) -> Self {
        let n = *n;
        let kappa: Symbol = Arc::new(move |xi| n.kappa(xi));
        let theta0: Symbol = Arc::new(move |xi| phi_hat(xi) * (1.0 + xi * xi));
        Self::unperturbed(kappa, theta0, epsilon, sampling)
    }

    /// Checks the stated bounds on the sampling nodes.
    pub fn validate(&self, sampling: &Sampling) -> Result<()> {
        for (name, v) in [("epsilon", self.epsilon), ("delta", self.delta), ("mu", self.mu)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(name, format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [("c1", self.c1), ("c3", self.c3), ("c4", self.c4)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(name, format!("must be non-negative, got {v}")));
            }
        }
        if !(self.log_t_max > 0.0) {
            return Err(Error::config("log_t_max", format!("must be positive, got {}", self.log_t_max)));
        }
        let slack = 1.0 + 1e-12;
        let scale = self.epsilon.powf(1.0 + self.delta);
        let xs = sampling.xi_nodes();
        let k = xs.iter().map(|&x| (self.kappa)(x).norm()).fold(0.0, f64::max);
        if k > self.c1 * slack {
            return Err(Error::domain(format!("sup|κ| = {k:.6e} exceeds C₁ = {:.6e}", self.c1)));
        }
        let th = xs.iter().map(|&x| (self.theta1)(x).norm()).fold(0.0, f64::max);
        if th > self.c3 * scale * slack {
            return Err(Error::domain(format!(
                "sup|θ₁| = {th:.6e} exceeds C₃ε^(1+δ) = {:.6e}",
                self.c3 * scale
            )));
        }
        if self.log_t_max.is_finite() {
            let taus = sampling.log_t_nodes(self.log_t_max);
            let r = taus
                .iter()
                .flat_map(|&tau| xs.iter().map(move |&x| (tau, x)))
                .map(|(tau, x)| {
                    let v = (self.t_rho)(tau, x).norm();
                    // Log form, since e^{μτ} alone overflows for long horizons. Subnormal
                    // samples have too few digits to be rescaled.
                    if v >= f64::MIN_POSITIVE { (self.mu * tau + v.ln()).exp() } else { 0.0 }
                })
                .fold(0.0, f64::max);
            // rounding of μτ costs about μτ ulps
            let rho_slack = slack + 4.0 * f64::EPSILON * self.mu * self.log_t_max;
            if !(r <= self.c4 * scale * rho_slack) {
                return Err(Error::domain(format!(
                    "sup t^(1+μ)|ρ| = {r:.6e} exceeds C₄ε^(1+δ) = {:.6e}",
                    self.c4 * scale
                )));
            }
        }
        self.sup_growth(sampling).map(|_| ())
    }

    /// `sup_ξ |θ₀|² Im κ` and its location; fails if clearly negative.
    pub fn sup_growth(&self, sampling: &Sampling) -> Result<(f64, f64)> {
        let f = |x: f64| (self.theta0)(x).norm_sqr() * (self.kappa)(x).im;
        let m = refine_max(f, &sampling.xi_nodes());
        let scale = sampled_sup_abs(self.theta0.as_ref(), sampling).powi(2) * self.c1.max(1e-300);
        if m.value < -defaults::CLASSIFY_TOL * scale {
            return Err(Error::domain(format!(
                "sup |θ₀|² Im κ = {:.6e} < 0 at ξ = {:.6}",
                m.value, m.x
            )));
        }
        Ok((m.value.max(0.0), m.x))
    }

    /// `τ₁ = 1/(2 sup |θ₀|² Im κ)`, `+∞` when the supremum vanishes.
    pub fn tau1(&self, sampling: &Sampling) -> Result<f64> {
        let (s, _) = self.sup_growth(sampling)?;
        Ok(tau_from_sup(s))
    }
}

/// Extended-real reciprocal rule `1/(2s)`, `+∞` for `s ≤ 0`.
pub fn tau_from_sup(s: f64) -> f64 {
    if s > 0.0 {
        0.5 / s
    } else {
        f64::INFINITY
    }
}

/// Closed form of the unperturbed ODE at time `t ≥ 1`.
pub fn solve_unperturbed(kappa: Complex64, theta0: Complex64, epsilon: f64, t: f64) -> Result<Complex64> {
    if !(t >= 1.0) {
        return Err(Error::domain(format!("closed form needs t ≥ 1, got {t}")));
    }
    solve_unperturbed_log(kappa, theta0, epsilon, t.ln())
}

/// [`solve_unperturbed`] at `t = e^{log_t}`.
pub fn solve_unperturbed_log(kappa: Complex64, theta0: Complex64, epsilon: f64, log_t: f64) -> Result<Complex64> {
    if !(log_t >= 0.0) {
        return Err(Error::domain(format!("closed form needs log t ≥ 0, got {log_t}")));
    }
    let a = epsilon * epsilon * theta0.norm_sqr();
    let g = 2.0 * a * kappa.im * log_t;
    let denom = 1.0 - g;
    if denom <= 0.0 {
        return Err(Error::PastBlowUp { t: log_t.exp(), denominator: denom });
    }
    let modulus2 = a / denom;
    let psi = phase_integral(kappa.im, a, log_t);
    let phase = theta0.arg() - kappa.re * psi;
    Ok(Complex64::from_polar(modulus2.sqrt(), phase))
}

/// `Ψ(t) = ∫₁ᵗ|β₀(s)|²ds/s` for `|β₀(1)|² = a`, before blow-up.
pub fn phase_integral(kappa_im: f64, a: f64, log_t: f64) -> f64 {
    if kappa_im == 0.0 {
        a * log_t
    } else {
        -(-2.0 * a * kappa_im * log_t).ln_1p() / (2.0 * kappa_im)
    }
}

/// `e^{1/(2ε²|θ₀|² Im κ)}`, or `+∞` when the modulus does not grow.
pub fn blowup_time(kappa: Complex64, theta0: Complex64, epsilon: f64) -> f64 {
    let g = 2.0 * epsilon * epsilon * theta0.norm_sqr() * kappa.im;
    if g > 0.0 {
        (1.0 / g).exp()
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrateOptions {
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Output times as `log t`; uniform in `[0, log t_end]` when absent.
    #[serde(default)]
    pub output_log_times: Option<Vec<f64>>,
    #[serde(default = "default_output_points")]
    pub output_points: usize,
    /// `|β|` ceiling in units of ε.
    #[serde(default = "default_ceiling")]
    pub ceiling_factor: f64,
}

fn default_tol() -> f64 {
    defaults::ODE_TOL
}
fn default_output_points() -> usize {
    defaults::ODE_OUTPUT_POINTS
}
fn default_ceiling() -> f64 {
    defaults::ODE_CEILING_FACTOR
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            output_log_times: None,
            output_points: default_output_points(),
            ceiling_factor: default_ceiling(),
        }
    }
}

/// `β(t, ·)` on a ξ-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileState {
    pub t: f64,
    pub xi: Vec<f64>,
    pub beta: Vec<Complex64>,
}

/// Output of [`integrate_perturbed`]: `beta[j][i]` is `β(e^{log_times[i]}, xi[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTrajectory {
    pub xi: Vec<f64>,
    pub log_times: Vec<f64>,
    pub beta: Vec<Vec<Complex64>>,
    /// Largest `|β|` over all accepted steps, per node.
    pub sup_abs: Vec<f64>,
    pub steps: Vec<usize>,
}

impl ProfileTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.log_times.iter().map(|l| l.exp()).collect()
    }

    pub fn state(&self, i: usize) -> ProfileState {
        ProfileState {
            t: self.log_times[i].exp(),
            xi: self.xi.clone(),
            beta: self.beta.iter().map(|b| b[i]).collect(),
        }
    }

    pub fn sup_over_all(&self) -> f64 {
        self.sup_abs.iter().copied().fold(0.0, f64::max)
    }

    /// CSV with header `t,xi,re,im,abs`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "xi", "re", "im", "abs"])?;
        for (i, lt) in self.log_times.iter().enumerate() {
            for (j, xi) in self.xi.iter().enumerate() {
                let b = self.beta[j][i];
                w.write_record([fmt_f64(lt.exp()), fmt_f64(*xi), fmt_f64(b.re), fmt_f64(b.im), fmt_f64(b.norm())])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Integrates the perturbed problem on each ξ node up to `t_end`.
pub fn integrate_perturbed(problem: &OdeProblem, xi: &[f64], t_end: f64, tol: f64) -> Result<ProfileTrajectory> {
    if !(t_end >= 1.0) {
        return Err(Error::domain(format!("t_end must be ≥ 1, got {t_end}")));
    }
    integrate_perturbed_log(problem, xi, t_end.ln(), &IntegrateOptions { tol, ..IntegrateOptions::default() })
}

/// [`integrate_perturbed`] with the end time given as `log t_end`.
pub fn integrate_perturbed_log(
    problem: &OdeProblem,
    xi: &[f64],
    log_t_end: f64,
    opts: &IntegrateOptions,
) -> Result<ProfileTrajectory> {
    if !(log_t_end >= 0.0 && log_t_end.is_finite()) {
        return Err(Error::domain(format!("log t_end must be finite and ≥ 0, got {log_t_end}")));
    }
    if log_t_end > problem.log_t_max {
        return Err(Error::domain(format!(
            "log t_end = {log_t_end} exceeds log T = {}",
            problem.log_t_max
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::config("tol", format!("must be positive, got {}", opts.tol)));
    }
    let log_times = match &opts.output_log_times {
        Some(ts) => {
            let bad = ts.windows(2).any(|w| w[1] <= w[0])
                || ts.first().is_some_and(|t| *t < 0.0)
                || ts.last().is_some_and(|t| *t > log_t_end);
            if bad {
                return Err(Error::config("output_log_times", "must be increasing within [0, log t_end]"));
            }
            ts.clone()
        }
        None => {
            let m = opts.output_points.max(2);
            (0..m).map(|i| if i + 1 == m { log_t_end } else { log_t_end * i as f64 / (m - 1) as f64 }).collect()
        }
    };
    let ceiling = opts.ceiling_factor * problem.epsilon;
    let results: Vec<Result<NodeRun>> = xi
        .par_iter()
        .map(|&x| integrate_node(problem, x, &log_times, opts.tol, ceiling))
        .collect();
    let mut beta = Vec::with_capacity(xi.len());
    let mut sup_abs = Vec::with_capacity(xi.len());
    let mut steps = Vec::with_capacity(xi.len());
    for r in results {
        let r = r?;
        beta.push(r.samples);
        sup_abs.push(r.sup_abs);
        steps.push(r.steps);
    }
    Ok(ProfileTrajectory { xi: xi.to_vec(), log_times, beta, sup_abs, steps })
}

struct NodeRun {
    samples: Vec<Complex64>,
    sup_abs: f64,
    steps: usize,
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn integrate_node(problem: &OdeProblem, xi: f64, log_times: &[f64], tol: f64, ceiling: f64) -> Result<NodeRun> {
    let kappa = (problem.kappa)(xi);
    let t_rho = &problem.t_rho;
    let f = |tau: f64, b: Complex64| -> Complex64 { -I * (kappa * b.norm_sqr() * b + t_rho(tau, xi)) };
    let mut y = problem.epsilon * (problem.theta0)(xi) + (problem.theta1)(xi);
    let mut tau = 0.0;
    let mut h = 1e-2;
    let mut k1 = f(tau, y);
    let mut sup_abs = y.norm();
    let mut samples = Vec::with_capacity(log_times.len());
    let mut steps = 0usize;
    for &tau_out in log_times {
        while tau < tau_out {
            let last = tau + h >= tau_out;
            let hs = if last { tau_out - tau } else { h };
            let mut k = [Complex64::new(0.0, 0.0); 7];
            k[0] = k1;
            for s in 1..7 {
                let mut yi = y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    yi += hs * A[s][j] * kj;
                }
                k[s] = f(tau + C[s] * hs, yi);
            }
            let mut y_new = y;
            for (j, kj) in k.iter().enumerate().take(6) {
                y_new += hs * A[6][j] * kj;
            }
            if !y_new.is_finite() {
                return Err(Error::NonFinite { t: (tau + hs).exp() });
            }
            let err_vec: Complex64 = k.iter().zip(E).map(|(kj, e)| hs * e * kj).sum();
            let scale = tol * y.norm().max(y_new.norm());
            let err = if scale > 0.0 { err_vec.norm() / scale } else { 0.0 };
            if err <= 1.0 {
                tau = if last { tau_out } else { tau + hs };
                y = y_new;
                k1 = k[6];
                steps += 1;
                sup_abs = sup_abs.max(y.norm());
                if y.norm() > ceiling {
                    return Err(Error::BlowUp { t: tau.exp(), magnitude: y.norm() });
                }
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || fac < 1.0 {
                    h = hs * fac;
                }
            } else {
                h = hs * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                if h < 1e-14 * (1.0 + tau.abs()) {
                    return Err(Error::BlowUp { t: tau.exp(), magnitude: y.norm() });
                }
            }
        }
        samples.push(y);
    }
    Ok(NodeRun { samples, sup_abs, steps })
}

/// Constants of the perturbed a priori bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbedBound {
    #[serde(with = "crate::extended")]
    pub tau1: f64,
    pub sigma: f64,
    pub c2: f64,
    pub m: f64,
    /// `log T★ = min(log T, σ/ε²)`.
    pub log_t_star: f64,
    /// `C₂ε + Mε^{1+δ}`.
    pub bound: f64,
    /// Whether `ε ≤ M^{−1/δ}`; the bound is only asserted when this holds.
    pub hypothesis_holds: bool,
}

impl PerturbedBound {
    pub fn t_star(&self) -> f64 {
        self.log_t_star.exp()
    }
}

pub fn perturbed_bound(problem: &OdeProblem, sigma: f64, sampling: &Sampling) -> Result<PerturbedBound> {
    let tau1 = problem.tau1(sampling)?;
    if !(sigma > 0.0 && sigma < tau1) {
        return Err(Error::domain(format!("σ must lie in (0, τ₁) = (0, {tau1}), got {sigma}")));
    }
    let sup_theta0 = sampled_sup_abs(problem.theta0.as_ref(), sampling);
    let ratio = if tau1.is_finite() { sigma / tau1 } else { 0.0 };
    let c2 = sup_theta0 / (1.0 - ratio).sqrt();
    let m = (2.0 * problem.c3 + problem.c4 / problem.mu) * (problem.c1 * (1.0 + 3.0 * c2 + 3.0 * c2 * c2) * sigma).exp();
    let eps = problem.epsilon;
    let log_t_star = problem.log_t_max.min(sigma / (eps * eps));
    let hypothesis_holds = eps <= m.powf(-1.0 / problem.delta);
    if !hypothesis_holds {
        log::info!("ε = {eps} exceeds M^(-1/δ) = {:.6e}; bound not asserted", m.powf(-1.0 / problem.delta));
    }
    Ok(PerturbedBound {
        tau1,
        sigma,
        c2,
        m,
        log_t_star,
        bound: c2 * eps + m * eps.powf(1.0 + problem.delta),
        hypothesis_holds,
    })
}

/// Settings for randomized admissible problems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundTrialConfig {
    #[serde(default = "default_trial_nodes")]
    pub xi_nodes: usize,
    #[serde(default = "default_trial_range")]
    pub xi_range: f64,
    #[serde(default = "default_quarter")]
    pub delta: f64,
    #[serde(default = "default_quarter")]
    pub mu: f64,
    /// `σ` as a fraction of `τ₁`.
    #[serde(default = "default_sigma_fraction")]
    pub sigma_fraction: f64,
    #[serde(default = "default_trial_tol")]
    pub tol: f64,
    #[serde(default = "default_trial_sampling")]
    pub sampling: Sampling,
}

fn default_trial_nodes() -> usize {
    33
}
fn default_trial_range() -> f64 {
    4.0
}
fn default_quarter() -> f64 {
    0.25
}
fn default_sigma_fraction() -> f64 {
    0.5
}
fn default_trial_tol() -> f64 {
    1e-8
}
fn default_trial_sampling() -> Sampling {
    Sampling { xi_samples: 1024, t_samples: 128, xi_range: 8.0 }
}

impl Default for BoundTrialConfig {
    fn default() -> Self {
        Self {
            xi_nodes: default_trial_nodes(),
            xi_range: default_trial_range(),
            delta: default_quarter(),
            mu: default_quarter(),
            sigma_fraction: default_sigma_fraction(),
            tol: default_trial_tol(),
            sampling: default_trial_sampling(),
        }
    }
}

/// One randomized check of the perturbed bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundTrialReport {
    pub trial: usize,
    pub epsilon: f64,
    pub c1: f64,
    pub c3: f64,
    pub c4: f64,
    pub bound: PerturbedBound,
    pub observed_sup: f64,
    pub holds: bool,
    pub steps: usize,
}

/// A random admissible problem: `κ = ⟨ξ⟩⁻⁴ν` from random gauge-invariant coefficients,
/// a modulated Gaussian `θ₀`, and `θ₁`, `ρ` that saturate their bounds with smooth
/// unimodular phases. `ε` is drawn in `[½, 1]·M^{−1/δ}` (capped at ½); draws with
/// `M^{−1/δ}` below [`defaults::BOUND_TRIAL_MIN_EPSILON`] are rejected.
pub fn random_admissible_problem(rng: &mut impl Rng, cfg: &BoundTrialConfig) -> Result<(OdeProblem, f64)> {
    let sampling = cfg.sampling;
    for _ in 0..10_000 {
        let lambda: [Complex64; 6] =
            std::array::from_fn(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let n = CubicNonlinearity::from_lambdas(lambda);
        let (amp, center, width, tilt) =
            (rng.gen_range(1.0..3.0), rng.gen_range(-1.5..1.5), rng.gen_range(0.5..1.5), rng.gen_range(-2.0..2.0));
        let kappa: Symbol = Arc::new(move |xi| n.kappa(xi));
        let theta0: Symbol = Arc::new(move |xi: f64| {
            Complex64::from_polar(amp * (-(xi - center).powi(2) / (2.0 * width * width)).exp(), tilt * xi)
        });
        let mut p = OdeProblem::unperturbed(kappa, theta0, 1.0, &sampling);
        let (s, _) = match p.sup_growth(&sampling) {
            Ok(v) => v,
            Err(_) => continue,
        };
        if s < 1e-3 {
            continue;
        }
        p.delta = cfg.delta;
        p.mu = cfg.mu;
        p.c3 = rng.gen_range(0.005..0.03);
        p.c4 = rng.gen_range(0.005..0.03);
        let sigma = cfg.sigma_fraction * tau_from_sup(s);
        let b = perturbed_bound(&p, sigma, &sampling)?;
        let eps_max = b.m.powf(-1.0 / cfg.delta);
        // Tiny admissible ε would push the horizon e^{σ/ε²} out of reach.
        if !(eps_max >= defaults::BOUND_TRIAL_MIN_EPSILON) {
            continue;
        }
        let eps = (rng.gen_range(0.5..1.0) * eps_max).min(0.5);
        p.epsilon = eps;
        p.log_t_max = sigma / (eps * eps);
        let amp1 = p.c3 * eps.powf(1.0 + p.delta);
        let (w1, s1) = (rng.gen_range(-3.0..3.0), rng.gen_range(0.0..std::f64::consts::TAU));
        p.theta1 = Arc::new(move |xi| Complex64::from_polar(amp1, w1 * xi + s1));
        let amp2 = p.c4 * eps.powf(1.0 + p.delta);
        let mu = p.mu;
        let (w2, s2, a2) =
            (rng.gen_range(-3.0..3.0), rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(-2.0..2.0));
        // t·ρ = C₄ε^{1+δ} t^{−μ} e^{i(a log t + wξ + s)}
        p.t_rho = Arc::new(move |tau: f64, xi| Complex64::from_polar(amp2 * (-mu * tau).exp(), a2 * tau + w2 * xi + s2));
        return Ok((p, sigma));
    }
    Err(Error::domain("no admissible problem found in 10000 draws"))
}

/// Runs one randomized trial on `cfg.xi_nodes` nodes plus the growth maximizer.
pub fn bound_trial(trial: usize, rng: &mut impl Rng, cfg: &BoundTrialConfig) -> Result<BoundTrialReport> {
    let (p, sigma) = random_admissible_problem(rng, cfg)?;
    p.validate(&cfg.sampling)?;
    let b = perturbed_bound(&p, sigma, &cfg.sampling)?;
    let (_, xi_star) = p.sup_growth(&cfg.sampling)?;
    let m = cfg.xi_nodes.max(2);
    let mut xi: Vec<f64> =
        (0..m).map(|i| -cfg.xi_range + 2.0 * cfg.xi_range * i as f64 / (m - 1) as f64).collect();
    xi.push(xi_star);
    let opts = IntegrateOptions {
        tol: cfg.tol,
        output_log_times: Some(vec![b.log_t_star]),
        output_points: 2,
        ceiling_factor: defaults::ODE_CEILING_FACTOR,
    };
    let traj = integrate_perturbed_log(&p, &xi, b.log_t_star, &opts)?;
    let observed = traj.sup_over_all();
    Ok(BoundTrialReport {
        trial,
        epsilon: p.epsilon,
        c1: p.c1,
        c3: p.c3,
        c4: p.c4,
        bound: b,
        observed_sup: observed,
        holds: b.hypothesis_holds && observed <= b.bound,
        steps: traj.steps.iter().sum(),
    })
}

/// One JSON object per line.
pub fn write_trial_reports(path: &Path, reports: &[BoundTrialReport]) -> Result<()> {
    let mut text = String::new();
    for r in reports {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn constant(v: Complex64) -> Symbol {
        Arc::new(move |_| v)
    }

    fn small_sampling() -> Sampling {
        Sampling { xi_samples: 401, t_samples: 32, xi_range: 8.0 }
    }

    #[test]
    fn tau1_of_constant_problem() {
        let p = OdeProblem::unperturbed(constant(I), constant(c(1.0, 0.0)), 0.3, &small_sampling());
        assert_eq!(p.tau1(&small_sampling()).unwrap(), 0.5);
        assert_eq!(p.c1, 1.0);
    }

    #[test]
    fn tau1_is_infinite_without_growth_and_rejects_negative_sup() {
        let gauss: Symbol = Arc::new(|xi: f64| c((-xi * xi / 2.0).exp(), 0.0));
        let p = OdeProblem::unperturbed(constant(-I), gauss, 0.3, &small_sampling());
        assert_eq!(p.tau1(&small_sampling()).unwrap(), f64::INFINITY);
        let q = OdeProblem::unperturbed(constant(-I), constant(c(1.0, 0.0)), 0.3, &small_sampling());
        assert!(q.tau1(&small_sampling()).is_err());
    }

    #[test]
    fn tau1_of_cubic_symbol_matches_refined_dense_grid() {
        let n = CubicNonlinearity::monomial(0, 0, 2, 1, c(1.0, 0.0));
        let phi: Symbol = Arc::new(|xi: f64| c((-xi * xi / 2.0).exp() / (1.0 + xi * xi), 0.0));
        let p = OdeProblem::from_nonlinearity(&n, phi, 0.1, &Sampling::default());
        let tau1 = p.tau1(&Sampling::default()).unwrap();
        // θ₀ = e^{−ξ²/2}, κ = iξ³⟨ξ⟩⁻⁴: oracle on a fine grid plus golden-section refinement.
        let f = |x: f64| (-x * x).exp() * x.powi(3) / (1.0 + x * x).powi(2);
        let xs: Vec<f64> = (0..=200_000).map(|i| i as f64 * 1e-5 * 5.0).collect();
        let i = (0..xs.len()).max_by(|&a, &b| f(xs[a]).total_cmp(&f(xs[b]))).unwrap();
        let (_, best) = crate::maximize::golden_section(f, xs[i - 1], xs[i + 1], 1e-14);
        assert_relative_eq!(tau1, 0.5 / best, max_relative = 1e-12);
    }

    #[test]
    fn closed_form_initial_value_and_modulus() {
        let th = c(0.6, -0.8);
        assert_relative_eq!((solve_unperturbed(c(0.2, 0.7), th, 0.3, 1.0).unwrap() - 0.3 * th).norm(), 0.0, epsilon = 1e-16);
        for t in [2.0, 50.0, 200.0] {
            let b = solve_unperturbed(I, c(1.0, 0.0), 0.3, t).unwrap();
            assert_relative_eq!(b.norm_sqr(), 0.09 / (1.0 - 0.18 * f64::ln(t)), max_relative = 1e-14);
        }
        assert_relative_eq!(blowup_time(I, c(1.0, 0.0), 0.3), (1.0 / 0.18f64).exp(), max_relative = 1e-15);
        let tb = blowup_time(I, c(1.0, 0.0), 0.3);
        assert!(matches!(solve_unperturbed(I, c(1.0, 0.0), 0.3, tb * 1.01), Err(Error::PastBlowUp { .. })));
        assert_eq!(blowup_time(c(1.0, 0.0), c(1.0, 0.0), 0.3), f64::INFINITY);
    }

    #[test]
    fn exact_blowup_law() {
        for eps in [0.3, 0.2, 0.15, 0.1] {
            let tb = blowup_time(I, c(1.0, 0.0), eps);
            assert_relative_eq!(eps * eps * tb.ln(), 0.5, max_relative = 1e-12);
        }
    }

    // Independent reference: classical RK4 in t with a fixed tiny step.
    fn rk4_reference(kappa: Complex64, b0: Complex64, t_end: f64) -> Complex64 {
        let f = |t: f64, b: Complex64| -I * kappa / t * b.norm_sqr() * b;
        let n = 200_000;
        let h = (t_end - 1.0) / n as f64;
        let (mut t, mut y) = (1.0, b0);
        for _ in 0..n {
            let k1 = f(t, y);
            let k2 = f(t + h / 2.0, y + h / 2.0 * k1);
            let k3 = f(t + h / 2.0, y + h / 2.0 * k2);
            let k4 = f(t + h, y + h * k3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += h;
        }
        y
    }

    #[test]
    fn closed_form_matches_independent_integrator() {
        let kappa = c(0.4, 0.8);
        let th = c(1.0, 0.5);
        let eps = 0.6;
        let tb = blowup_time(kappa, th, eps);
        let t = (0.9 * tb).min(50.0);
        let exact = solve_unperturbed(kappa, th, eps, t).unwrap();
        let reference = rk4_reference(kappa, eps * th, t);
        assert!((exact - reference).norm() / exact.norm() < 1e-8);
    }

    #[test]
    fn integrator_reproduces_closed_form() {
        let p = OdeProblem::unperturbed(constant(I), constant(c(1.0, 0.0)), 0.3, &small_sampling());
        let tb = blowup_time(I, c(1.0, 0.0), 0.3);
        let traj = integrate_perturbed(&p, &[0.0], 0.9 * tb, 1e-12).unwrap();
        for (i, t) in traj.times().iter().enumerate() {
            let e = solve_unperturbed(I, c(1.0, 0.0), 0.3, *t).unwrap();
            assert!((traj.beta[0][i] - e).norm() / e.norm() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn real_kappa_conserves_modulus() {
        let p = OdeProblem::unperturbed(constant(c(-0.7, 0.0)), constant(c(0.3, 0.4)), 0.5, &small_sampling());
        let traj = integrate_perturbed(&p, &[0.0, 1.0], 1e6, 1e-10).unwrap();
        for row in &traj.beta {
            for b in row {
                assert_relative_eq!(b.norm(), 0.25, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn ceiling_signals_blowup() {
        let p = OdeProblem::unperturbed(constant(I), constant(c(1.0, 0.0)), 0.3, &small_sampling());
        let tb = blowup_time(I, c(1.0, 0.0), 0.3);
        assert!(matches!(integrate_perturbed(&p, &[0.0], tb * 2.0, 1e-8), Err(Error::BlowUp { .. })));
    }

    #[test]
    fn trial_reports_are_json_lines() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let cfg = BoundTrialConfig::default();
        let reports: Vec<_> = (0..3).map(|i| bound_trial(i, &mut rng, &cfg).unwrap()).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trials.jsonl");
        write_trial_reports(&path, &reports).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let back: Vec<BoundTrialReport> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(back, reports);
    }

    #[test]
    fn bound_constants() {
        let p = OdeProblem::unperturbed(constant(I), constant(c(1.0, 0.0)), 0.01, &small_sampling());
        let b = perturbed_bound(&p, 0.25, &small_sampling()).unwrap();
        assert_relative_eq!(b.c2, 2f64.sqrt(), max_relative = 1e-14);
        let tiny = perturbed_bound(&p, 1e-12, &small_sampling()).unwrap();
        assert_relative_eq!(tiny.c2, 1.0, max_relative = 1e-11);
        assert!(perturbed_bound(&p, 0.5, &small_sampling()).is_err());
        assert_eq!(b.log_t_star, 0.25 / 1e-4);
    }

    #[test]
    fn validation_catches_oversized_perturbations() {
        let mut p = OdeProblem::unperturbed(constant(I), constant(c(1.0, 0.0)), 0.1, &small_sampling());
        p.c3 = 0.01;
        p.theta1 = constant(c(1.0, 0.0));
        assert!(p.validate(&small_sampling()).is_err());
        p.theta1 = constant(c(0.0, 0.0));
        p.log_t_max = 100f64.ln();
        p.c4 = 0.01;
        p.t_rho = Arc::new(|_, _| c(1.0, 0.0));
        assert!(p.validate(&small_sampling()).is_err());
        p.t_rho = Arc::new(|tau: f64, _| c(1e-4 * (-tau).exp(), 0.0));
        p.validate(&small_sampling()).unwrap();
    }

    #[test]
    fn random_trials_satisfy_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = BoundTrialConfig::default();
        for trial in 0..5 {
            let r = bound_trial(trial, &mut rng, &cfg).unwrap();
            assert!(r.bound.hypothesis_holds);
            assert!(r.holds, "{r:?}");
        }
    }

    #[test]
    fn perturbed_run_self_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = BoundTrialConfig::default();
        let (p, _) = random_admissible_problem(&mut rng, &cfg).unwrap();
        let t_end = p.log_t_max.min(1e8f64.ln()).exp();
        let xi = [-1.0, 0.0, 0.7];
        let tol = 1e-8;
        let a = integrate_perturbed(&p, &xi, t_end, tol).unwrap();
        let b = integrate_perturbed(&p, &xi, t_end, tol / 2.0).unwrap();
        for j in 0..xi.len() {
            let (x, y) = (a.beta[j].last().unwrap(), b.beta[j].last().unwrap());
            assert!((x - y).norm() <= 10.0 * tol * y.norm().max(p.epsilon));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn modulus_monotone_with_sign_of_im_kappa(kr in -2.0f64..2.0, ki in -2.0f64..2.0, eps in 0.05f64..0.5, t in 1.0f64..1e3) {
            let k = c(kr, ki);
            let th = c(0.8, 0.3);
            prop_assume!(t < blowup_time(k, th, eps) * 0.99);
            let b1 = solve_unperturbed(k, th, eps, t).unwrap().norm();
            let b2 = solve_unperturbed(k, th, eps, t * 1.001).map(|b| b.norm());
            if let Ok(b2) = b2 {
                if ki > 0.0 { prop_assert!(b2 >= b1); }
                if ki < 0.0 { prop_assert!(b2 <= b1); }
            }
        }

        #[test]
        fn gauge_covariance(kr in -2.0f64..2.0, ki in -2.0f64..0.5, phase in 0.0f64..6.28, t in 1.0f64..1e4) {
            let k = c(kr, ki);
            let th = c(0.5, -0.2);
            let eps = 0.2;
            prop_assume!(t < blowup_time(k, th, eps) * 0.99);
            let rot = Complex64::from_polar(1.0, phase);
            let a = solve_unperturbed(k, th, eps, t).unwrap();
            let b = solve_unperturbed(k, th * rot, eps, t).unwrap();
            prop_assert!((b - a * rot).norm() <= 1e-13);
        }

        #[test]
        fn unperturbed_estimate_holds(ki in 0.01f64..2.0, eps in 0.05f64..0.5, frac in 0.05f64..0.95) {
            let k = c(0.3, ki);
            let th = c(1.0, 0.0);
            let tau1 = 0.5 / ki;
            let sigma = frac * tau1;
            let c2 = 1.0 / (1.0 - sigma / tau1).sqrt();
            let b = solve_unperturbed_log(k, th, eps, sigma / (eps * eps)).unwrap();
            prop_assert!(b.norm() <= c2 * eps * (1.0 + 1e-12));
        }
    }
}
