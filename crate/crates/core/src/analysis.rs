//! Lifespan predictor `τ̃₀`, regime classification, the modified-scattering profile,
//! comparison of simulations with the reduced ODE, the functional `E(T)` and numerical
//! checks of the product identities behind the `F = ∂ₓF₁ + F₂/(it)` split.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::defaults;
use crate::error::{Error, Result};
use crate::maximize::refine_max_from;
use crate::nonlinearity::CubicNonlinearity;
use crate::profile_ode::{phase_integral, solve_unperturbed};
use crate::solver::Trajectory;
use crate::spectral::{derivative, fmt_f64, g_at, gauge_transform_g, l2_norm, FieldState, Grid, SpectralProfile};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `Im ν ≤ 0`, touching zero: `‖u‖_{L∞} ≲ ε/√(1+t)`.
    #[serde(rename = "global_decay_i")]
    GlobalDecayI,
    /// `Im ν ≡ 0`: decay with a logarithmic phase correction.
    #[serde(rename = "log_phase_ii")]
    LogPhaseII,
    /// `sup Im ν < 0`: decay faster than `t^{−1/2}`.
    #[serde(rename = "extra_decay_iii")]
    ExtraDecayIII,
    /// `Im ν > 0` somewhere: lifespan governed by `τ̃₀`.
    PossibleBlowup,
}

/// Outcome of [`predict_tau0`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifespanReport {
    #[serde(with = "crate::extended")]
    pub tau0: f64,
    pub xi_star: f64,
    pub sup_value: f64,
    pub regime: Regime,
    /// Largest `||φ̂|² Im ν|` in the outer tenth of the frequency range, relative to the maximum.
    pub tail_ratio: f64,
    pub tail_flag: bool,
}

fn poly(c: [f64; 4], x: f64) -> f64 {
    ((c[3] * x + c[2]) * x + c[1]) * x + c[0]
}

/// Classifies by exact analysis of the cubic `Im ν(ξ)`; `φ` plays no role.
pub fn classify_regime(n: &CubicNonlinearity) -> Regime {
    let c = n.im_nu_coefficients();
    let tol = defaults::CLASSIFY_TOL * n.l1_norm().max(1.0);
    let zero = |v: f64| v.abs() <= tol;
    if c.iter().all(|v| zero(*v)) {
        return Regime::LogPhaseII;
    }
    if !zero(c[3]) || (zero(c[2]) && !zero(c[1])) {
        // Odd degree: unbounded above.
        return Regime::PossibleBlowup;
    }
    let sup = if zero(c[2]) {
        c[0]
    } else if c[2] > 0.0 {
        return Regime::PossibleBlowup;
    } else {
        c[0] - c[1] * c[1] / (4.0 * c[2])
    };
    if sup > tol {
        Regime::PossibleBlowup
    } else if sup < -tol {
        Regime::ExtraDecayIII
    } else {
        Regime::GlobalDecayI
    }
}

/// `1/τ̃₀ = 2 sup_ξ |φ̂(ξ)|² Im ν(ξ)` for a datum sampled on its grid.
///
/// The supremum is taken over the frequency nodes and refined off-grid, with `φ̂`
/// evaluated there by direct summation.
pub fn predict_tau0(phi: &FieldState, n: &CubicNonlinearity) -> Result<LifespanReport> {
    let a = gauge_transform_g(phi);
    let xs = a.frequencies();
    let mod2: Vec<f64> = a.values.iter().map(|v| v.norm_sqr()).collect();
    predict_tau0_sampled(&xs, &mod2, |x| g_at(phi, x).norm_sqr(), n)
}

/// [`predict_tau0`] for `|φ̂|²` given on increasing nodes `xs` and as a function.
pub fn predict_tau0_sampled(
    xs: &[f64],
    phi_hat_sq: &[f64],
    phi_hat_sq_at: impl Fn(f64) -> f64,
    n: &CubicNonlinearity,
) -> Result<LifespanReport> {
    if xs.len() < 3 || xs.len() != phi_hat_sq.len() {
        return Err(Error::domain("need at least three frequency nodes with matching samples"));
    }
    let c = n.im_nu_coefficients();
    let values: Vec<f64> = xs.iter().zip(phi_hat_sq).map(|(x, p)| p * poly(c, *x)).collect();
    let m = refine_max_from(|x| phi_hat_sq_at(x) * poly(c, x), xs, &values);

    let peak = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let edge = 0.9 * xs[0].abs().max(xs[xs.len() - 1].abs());
    let tail = xs.iter().zip(&values).filter(|(x, _)| x.abs() >= edge).fold(0.0f64, |acc, (_, v)| acc.max(v.abs()));
    let tail_ratio = if peak > 0.0 { tail / peak } else { 0.0 };
    let tail_flag = tail_ratio > defaults::SUP_TAIL_RELATIVE;
    if tail_flag {
        log::warn!("grid tail carries {tail_ratio:.3e} of the supremum; widen the frequency range");
    }

    let scale = phi_hat_sq.iter().fold(0.0f64, |acc, v| acc.max(*v)) * c.iter().map(|v| v.abs()).sum::<f64>();
    let sup_value = if m.value > defaults::CLASSIFY_TOL * scale { m.value } else { 0.0 };
    let tau0 = if sup_value > 0.0 { 0.5 / sup_value } else { f64::INFINITY };
    Ok(LifespanReport { tau0, xi_star: m.x, sup_value, regime: classify_regime(n), tail_ratio, tail_flag })
}

/// The ansatz `t^{−1/2} α(x/t) exp(ix²/2t − i|α(x/t)|² Re ν(x/t) log(t/t_ref))` on `grid`,
/// with `t_ref = max(α.t, 1)`. Values of `α` between nodes are cubic interpolants; zero outside.
pub fn asymptotic_profile(alpha_ref: &SpectralProfile, n: &CubicNonlinearity, t: f64, grid: &Grid) -> Result<FieldState> {
    if !(t >= 1.0) {
        return Err(Error::domain(format!("asymptotic profile needs t ≥ 1, got {t}")));
    }
    let t_ref = alpha_ref.t.max(1.0);
    let log_t = (t / t_ref).ln();
    let s = t.sqrt().recip();
    Ok(FieldState::from_fn(grid.clone(), t, |x| {
        let xi = x / t;
        let a = alpha_ref.interpolate(xi);
        let phase = x * x / (2.0 * t) - a.norm_sqr() * n.nu(xi).re * log_t;
        s * a * Complex64::from_polar(1.0, phase)
    }))
}

/// `max|a − b| / max|b|`.
pub fn relative_linf_mismatch(a: &FieldState, b: &FieldState) -> f64 {
    let d = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    let s = b.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if s > 0.0 {
        d / s
    } else {
        d
    }
}

/// One comparison time of [`profile_ode_consistency`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub t: f64,
    pub beta_pde: Complex64,
    pub beta_ode: Complex64,
    /// Unwrapped `arg β(t) − arg β(t_ref)` from the simulation.
    pub phase_drift_pde: f64,
    /// `−Re κ Ψ(t/t_ref)` from the closed form.
    pub phase_drift_ode: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub xi: f64,
    pub kappa: Complex64,
    /// Seed time of the closed form.
    pub t_ref: f64,
    pub t_last: f64,
    /// Whether the requested window started before the minimum comparison time.
    pub deferred: bool,
    /// `max | |β_pde| − |β_ode| | / |β_ode|`.
    pub modulus_error: f64,
    /// `max | |β_pde|² − |β_ode|² | / |β_ode|²`.
    pub modulus_sq_error: f64,
    /// `max |drift_pde − drift_ode| / max |drift_ode|`.
    pub phase_error: f64,
    pub rows: Vec<ConsistencyRow>,
}

/// Compares `β = ⟨ξ⟩²α(t, ξ)` from a simulation with the unperturbed closed form
/// (`κ = ⟨ξ⟩⁻⁴ν(ξ)`), seeded by the simulation at the first record in `window`.
///
/// `xi` must be one of the trajectory's probe frequencies. Windows starting before
/// `t = 10` are moved there, since the oscillatory terms dominate at short times.
pub fn profile_ode_consistency(
    traj: &Trajectory,
    n: &CubicNonlinearity,
    xi: f64,
    window: (f64, f64),
) -> Result<ConsistencyReport> {
    let p = traj
        .probe_xi
        .iter()
        .position(|x| (x - xi).abs() <= 1e-12 * (1.0 + xi.abs()))
        .ok_or_else(|| Error::domain(format!("ξ = {xi} is not a probe frequency of the trajectory")))?;
    let t_min = defaults::COMPARISON_WINDOW.0;
    let deferred = window.0 < t_min;
    if deferred {
        log::info!("comparison window start {} moved to t = {t_min}", window.0);
    }
    let start = window.0.max(t_min);
    let w = 1.0 + xi * xi;
    let kappa = n.nu(xi) / (w * w);
    let series: Vec<(f64, Complex64)> = traj
        .probe_series(p)
        .into_iter()
        .filter(|(t, _)| *t >= start && *t <= window.1)
        .map(|(t, a)| (t, w * a))
        .collect();
    if series.len() < 2 {
        return Err(Error::domain(format!("fewer than two records in [{start}, {}]", window.1)));
    }
    let (t_ref, b_ref) = series[0];
    let a_ref = b_ref.norm_sqr();
    let mut rows = Vec::with_capacity(series.len());
    let mut drift = 0.0;
    let mut prev = b_ref;
    for &(t, b) in &series {
        if t > t_ref {
            drift += if prev == Complex64::new(0.0, 0.0) || b == Complex64::new(0.0, 0.0) { 0.0 } else { (b / prev).arg() };
        }
        prev = b;
        let beta_ode = solve_unperturbed(kappa, b_ref, 1.0, t / t_ref)?;
        rows.push(ConsistencyRow {
            t,
            beta_pde: b,
            beta_ode,
            phase_drift_pde: drift,
            phase_drift_ode: -kappa.re * phase_integral(kappa.im, a_ref, (t / t_ref).ln()),
        });
    }
    let rel = |x: f64, y: f64| if y > 0.0 { (x - y).abs() / y } else { x.abs() };
    let modulus_error = rows.iter().map(|r| rel(r.beta_pde.norm(), r.beta_ode.norm())).fold(0.0, f64::max);
    let modulus_sq_error =
        rows.iter().map(|r| rel(r.beta_pde.norm_sqr(), r.beta_ode.norm_sqr())).fold(0.0, f64::max);
    let drift_scale = rows.iter().map(|r| r.phase_drift_ode.abs()).fold(0.0, f64::max);
    let drift_gap = rows.iter().map(|r| (r.phase_drift_pde - r.phase_drift_ode).abs()).fold(0.0, f64::max);
    let phase_error = if drift_scale > 0.0 { drift_gap / drift_scale } else { drift_gap };
    Ok(ConsistencyReport {
        xi,
        kappa,
        t_ref,
        t_last: rows.last().map_or(t_ref, |r| r.t),
        deferred,
        modulus_error,
        modulus_sq_error,
        phase_error,
        rows,
    })
}

/// `E` sampled at the record times of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticSeries {
    pub gamma: f64,
    pub times: Vec<f64>,
    /// `(1+t)^{−γ}(‖u‖_{H³} + ‖Ju‖_{H²}) + sup_ξ⟨ξ⟩²|α(t, ξ)|`.
    pub values: Vec<f64>,
    /// `E(T)`: running supremum of `values`.
    pub running_sup: Vec<f64>,
    pub final_value: f64,
}

impl DiagnosticSeries {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "value", "e_of_t"])?;
        for ((t, v), e) in self.times.iter().zip(&self.values).zip(&self.running_sup) {
            w.write_record([fmt_f64(*t), fmt_f64(*v), fmt_f64(*e)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The functional `E(T)` over the recorded times, for `γ ∈ (0, 1/12)`.
pub fn compute_e(traj: &Trajectory, gamma: f64) -> Result<DiagnosticSeries> {
    if !(gamma > 0.0 && gamma < 1.0 / 12.0) {
        return Err(Error::config("gamma", format!("must lie in (0, 1/12), got {gamma}")));
    }
    let times: Vec<f64> = traj.records.iter().map(|r| r.t).collect();
    let values: Vec<f64> =
        traj.records.iter().map(|r| (1.0 + r.t).powf(-gamma) * (r.h3 + r.j_h2) + r.sup_alpha).collect();
    let mut running_sup = Vec::with_capacity(values.len());
    let mut e = 0.0f64;
    for v in &values {
        e = e.max(*v);
        running_sup.push(e);
    }
    Ok(DiagnosticSeries { gamma, times, values, running_sup, final_value: e })
}

/// Relative residuals of the product identities and of the `F` split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub t: f64,
    /// `φ∂ₓψ = (∂ₓφ)ψ + (φJψ − (Jφ)ψ)/(it)` with `φ = ψ = u`.
    pub key1_self: f64,
    /// The same with `φ = u`, `ψ = uₓ`.
    pub key1_pair: f64,
    /// `φ∂ₓψ̄ = −(∂ₓφ)ψ̄ + ((Jφ)ψ̄ − φ conj(Jψ))/(it)` with `φ = ψ = u`.
    pub key2_self: f64,
    pub key2_pair: f64,
    /// `‖F − ∂ₓF₁ − F₂/(it)‖ / ‖F‖`.
    pub f_split: f64,
}

impl IdentityReport {
    pub fn max_identity_residual(&self) -> f64 {
        self.key1_self.max(self.key1_pair).max(self.key2_self).max(self.key2_pair)
    }
}

fn residual(grid: &Grid, lhs: &[Complex64], rhs: &[Complex64]) -> f64 {
    let norm = |v: &[Complex64]| (grid.dx() * v.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt();
    let d: Vec<Complex64> = lhs.iter().zip(rhs).map(|(a, b)| a - b).collect();
    let s = norm(lhs).max(norm(rhs));
    if s > 0.0 {
        norm(&d) / s
    } else {
        0.0
    }
}

/// `F₁` and `F₂` of the split `F = ∂ₓF₁ + F₂/(it)`, pointwise.
#[allow(clippy::too_many_arguments)]
fn f1_f2(
    a: &[Complex64; 3],
    b: &[Complex64; 3],
    c: &[Complex64; 5],
    u: Complex64,
    ux: Complex64,
    ju: Complex64,
    jux: Complex64,
) -> (Complex64, Complex64) {
    let (ub, uxb, jub, juxb) = (u.conj(), ux.conj(), ju.conj(), jux.conj());
    let f1 = a[0] / 3.0 * u * u * u
        + a[1] / 3.0 * u * u * ux
        + a[2] / 3.0 * ux * ux * u
        + b[0] / 3.0 * (u * u * u).conj()
        + b[1] / 3.0 * (u * u * ux).conj()
        + b[2] / 3.0 * (u * ux * ux).conj()
        + (c[1] - c[0]) * u * ub * ub
        + c[2] * u * ub * uxb
        + c[3] * ub * ub * ux
        + c[4] * ux * uxb * ub;
    let w = u * jux - ux * ju;
    let f2 = -a[1] / 3.0 * u * w - 2.0 * a[2] / 3.0 * ux * w
        + b[1] / 3.0 * (u * w).conj()
        + 2.0 * b[2] / 3.0 * (ux * w).conj()
        + (c[1] - 2.0 * c[0]) * ub * (u * jub - ub * ju)
        - c[2] * ub * (uxb * ju - u * juxb)
        - c[3] * ub * (ub * jux - ux * jub)
        - c[4] * ub * (uxb * jux - ux * juxb);
    (f1, f2)
}

/// Checks the product identities and the `F` split on `u` at time `u.t > 0`, given `Ju`.
/// `Juₓ` is formed as `∂ₓ(Ju) − u`.
pub fn verify_identities(u: &FieldState, ju: &FieldState, n: &CubicNonlinearity) -> Result<IdentityReport> {
    let t = u.t;
    if !(t > 0.0) {
        return Err(Error::domain(format!("identities need t > 0, got {t}")));
    }
    if ju.grid != u.grid {
        return Err(Error::domain("u and Ju live on different grids"));
    }
    let grid = &u.grid;
    let ux = derivative(u);
    let uxx = derivative(&ux);
    let jux: Vec<Complex64> = derivative(ju).values.iter().zip(&u.values).map(|(d, v)| d - v).collect();
    let it = I * t;
    let m = grid.n();
    let (uv, uxv, uxxv, juv) = (&u.values, &ux.values, &uxx.values, &ju.values);

    let key1 = |phi: &[Complex64], dphi: &[Complex64], jphi: &[Complex64], psi: &[Complex64], dpsi: &[Complex64], jpsi: &[Complex64]| {
        let lhs: Vec<Complex64> = (0..m).map(|j| phi[j] * dpsi[j]).collect();
        let rhs: Vec<Complex64> =
            (0..m).map(|j| dphi[j] * psi[j] + (phi[j] * jpsi[j] - jphi[j] * psi[j]) / it).collect();
        residual(grid, &lhs, &rhs)
    };
    let key2 = |phi: &[Complex64], dphi: &[Complex64], jphi: &[Complex64], psi: &[Complex64], dpsi: &[Complex64], jpsi: &[Complex64]| {
        let lhs: Vec<Complex64> = (0..m).map(|j| phi[j] * dpsi[j].conj()).collect();
        let rhs: Vec<Complex64> = (0..m)
            .map(|j| -dphi[j] * psi[j].conj() + (jphi[j] * psi[j].conj() - phi[j] * jpsi[j].conj()) / it)
            .collect();
        residual(grid, &lhs, &rhs)
    };

    let split = n.fg_split()?;
    let f = split.f_part().compile();
    let mut f_vals = vec![Complex64::new(0.0, 0.0); m];
    f.eval_fields(uv, uxv, &mut f_vals);
    let mut f1 = Vec::with_capacity(m);
    let mut f2 = Vec::with_capacity(m);
    for j in 0..m {
        let (p, q) = f1_f2(&split.a, &split.b, &split.c, uv[j], uxv[j], juv[j], jux[j]);
        f1.push(p);
        f2.push(q);
    }
    let df1 = derivative(&u.with_values(f1));
    let rhs: Vec<Complex64> = df1.values.iter().zip(&f2).map(|(d, q)| d + q / it).collect();
    let f_norm = l2_norm(&u.with_values(f_vals.clone()));
    let f_split = if f_norm > 0.0 {
        l2_norm(&u.with_values(f_vals.iter().zip(&rhs).map(|(a, b)| a - b).collect())) / f_norm
    } else {
        l2_norm(&u.with_values(rhs))
    };

    Ok(IdentityReport {
        t,
        key1_self: key1(uv, uxv, juv, uv, uxv, juv),
        key1_pair: key1(uv, uxv, juv, uxv, uxxv, &jux),
        key2_self: key2(uv, uxv, juv, uv, uxv, juv),
        key2_pair: key2(uv, uxv, juv, uxv, uxxv, &jux),
        f_split,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::profile_ode::{OdeProblem, Sampling, Symbol};
    use crate::solver::{run, SolverConfig};
    use crate::spectral::{apply_j, extract_alpha, free_propagate, GridSpec};
    use std::sync::Arc;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn gaussian(grid: &Grid) -> FieldState {
        FieldState::from_fn(grid.clone(), 0.0, |x| c((-x * x / 2.0).exp(), 0.0))
    }

    fn default_grid() -> Grid {
        Grid::from_spec(&GridSpec::default()).unwrap()
    }

    #[test]
    fn lifespan_of_cubic_symbol_matches_calculus() {
        let n = CubicNonlinearity::monomial(0, 0, 2, 1, c(1.0, 0.0));
        let r = predict_tau0(&gaussian(&default_grid()), &n).unwrap();
        let sup = 1.5f64.powf(1.5) * (-1.5f64).exp();
        assert!((r.sup_value - sup).abs() <= 1e-10, "{}", r.sup_value);
        assert!((r.xi_star - 1.5f64.sqrt()).abs() <= 1e-5);
        assert!((r.tau0 - 0.5 / sup).abs() <= 1e-8);
        assert_eq!(r.regime, Regime::PossibleBlowup);
        assert!(!r.tail_flag);
        assert_eq!(r.tau0 * 2.0 * r.sup_value, 1.0);
    }

    #[test]
    fn nonpositive_symbol_gives_infinite_lifespan() {
        for n in [
            CubicNonlinearity::monomial(2, 1, 0, 0, c(0.0, -1.0)),
            CubicNonlinearity::monomial(0, 0, 2, 1, c(0.0, 1.0)),
            CubicNonlinearity::zero(),
        ] {
            let r = predict_tau0(&gaussian(&default_grid()), &n).unwrap();
            assert_eq!(r.tau0, f64::INFINITY);
            assert_eq!(r.sup_value, 0.0);
            let json = serde_json::to_string(&r).unwrap();
            assert!(json.contains("\"+inf\""));
            assert_eq!(serde_json::from_str::<LifespanReport>(&json).unwrap(), r);
        }
    }

    #[test]
    fn scaling_the_datum_rescales_the_lifespan() {
        let n = CubicNonlinearity::monomial(0, 0, 2, 1, c(1.0, 0.0)).add(&CubicNonlinearity::monomial(2, 1, 0, 0, c(0.3, 0.2)));
        let g = default_grid();
        let phi = FieldState::from_fn(g.clone(), 0.0, |x| c((-x * x / 2.0).exp(), 0.0) * Complex64::from_polar(1.0, 0.4 * x));
        let a = predict_tau0(&phi, &n).unwrap();
        let b = predict_tau0(&phi.scaled(c(2.0, 0.0)), &n).unwrap();
        assert!((b.tau0 * 4.0 - a.tau0).abs() <= 1e-9 * a.tau0);
        assert!((b.xi_star - a.xi_star).abs() <= 1e-6);
    }

    #[test]
    fn gauge_invariant_lifespan_uses_symbol_at_one_and_i_xi() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let lambda: [Complex64; 6] = std::array::from_fn(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let n = CubicNonlinearity::from_lambdas(lambda);
        let g = default_grid();
        let phi = gaussian(&g);
        let r = predict_tau0(&phi, &n).unwrap();
        let xs = g.frequencies();
        let p: Vec<f64> = xs.iter().map(|x| (-x * x).exp()).collect();
        let direct = predict_tau0_sampled(&xs, &p, |x| (-x * x).exp(), &CubicNonlinearity::zero()).unwrap();
        assert_eq!(direct.tau0, f64::INFINITY);
        let f = |x: f64| (-x * x).exp() * n.evaluate(c(1.0, 0.0), c(0.0, x)).im;
        let alt = crate::maximize::refine_max(f, &xs);
        let want = if alt.value > 0.0 { 0.5 / alt.value } else { f64::INFINITY };
        assert!((r.tau0 - want).abs() <= 1e-7 * want.min(1e12), "{} vs {}", r.tau0, want);
    }

    #[test]
    fn predictor_agrees_with_ode_tau1() {
        let n = CubicNonlinearity::monomial(0, 0, 2, 1, c(1.0, 0.0)).add(&CubicNonlinearity::monomial(1, 1, 1, 0, c(0.0, 0.5)));
        let r = predict_tau0(&gaussian(&default_grid()), &n).unwrap();
        let phi_hat: Symbol = Arc::new(|x: f64| c((-x * x / 2.0).exp(), 0.0));
        let s = Sampling::default();
        let p = OdeProblem::from_nonlinearity(&n, phi_hat, 0.1, &s);
        let tau1 = p.tau1(&s).unwrap();
        assert!((r.tau0 - tau1).abs() <= 1e-8 * tau1);
    }

    #[test]
    fn regimes_follow_the_sign_of_im_nu() {
        let m = |p, q, r, s, z| CubicNonlinearity::monomial(p, q, r, s, z);
        assert_eq!(classify_regime(&m(0, 0, 2, 1, c(0.0, 1.0))), Regime::LogPhaseII);
        assert_eq!(classify_regime(&m(2, 1, 0, 0, c(0.0, -1.0))), Regime::ExtraDecayIII);
        assert_eq!(classify_regime(&m(0, 0, 2, 1, c(1.0, 0.0))), Regime::PossibleBlowup);
        assert_eq!(classify_regime(&m(2, 1, 0, 0, c(1.0, 0.0))), Regime::LogPhaseII);
        // λ₄|uₓ|²u has ν = λ₄ξ²: −i gives Im ν = −ξ², touching zero at ξ = 0.
        assert_eq!(classify_regime(&m(1, 0, 1, 1, c(0.0, -1.0))), Regime::GlobalDecayI);
        // −i(|u|²u + |uₓ|²u): Im ν = −1 − ξ².
        assert_eq!(classify_regime(&m(2, 1, 0, 0, c(0.0, -1.0)).add(&m(1, 0, 1, 1, c(0.0, -1.0)))), Regime::ExtraDecayIII);
        assert_eq!(serde_json::to_string(&Regime::ExtraDecayIII).unwrap(), "\"extra_decay_iii\"");
        assert_eq!(classify_regime(&m(1, 0, 1, 1, c(0.0, 1.0))), Regime::PossibleBlowup);
    }

    #[test]
    fn regime_matches_dense_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let mut lambda = [c(0.0, 0.0); 6];
            for l in lambda.iter_mut() {
                if rng.gen_bool(0.5) {
                    *l = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                }
            }
            let n = CubicNonlinearity::from_lambdas(lambda);
            // Beyond the Cauchy root bound the sign is that of the leading term.
            let ci = n.im_nu_coefficients();
            let lead = ci.iter().rev().copied().find(|v| v.abs() > 1e-12).unwrap_or(1.0);
            let r = 2.0 * (1.0 + ci.iter().map(|v| (v / lead).abs()).fold(0.0, f64::max));
            let xs: Vec<f64> = (0..=40000).map(|i| -r + i as f64 * r / 20000.0).collect();
            let max = xs.iter().map(|x| n.nu(*x).im).fold(f64::MIN, f64::max);
            let r = classify_regime(&n);
            assert_eq!(r == Regime::PossibleBlowup, max > 1e-9, "{lambda:?}");
        }
    }

    #[test]
    fn asymptotic_profile_has_exact_modulus() {
        let g = Grid::new(1024, 64.0 * PI).unwrap();
        let mut a = extract_alpha(&gaussian(&g));
        a.t = 1.0;
        let n = CubicNonlinearity::monomial(0, 0, 2, 1, c(0.0, 1.0));
        let t = 4.0;
        let u = asymptotic_profile(&a, &n, t, &g).unwrap();
        for (j, v) in u.values.iter().enumerate() {
            let want = a.interpolate(g.x(j) / t).norm();
            assert!((v.norm() * t.sqrt() - want).abs() <= 1e-15);
        }
        assert!(asymptotic_profile(&a, &n, 0.5, &g).is_err());
    }

    #[test]
    fn asymptotic_profile_approximates_free_flow() {
        let g = Grid::new(4096, 400.0 * PI).unwrap();
        let phi = gaussian(&g);
        let a = extract_alpha(&phi);
        for t in [50.0, 200.0] {
            let u = free_propagate(&phi, t);
            let v = asymptotic_profile(&a, &CubicNonlinearity::zero(), t, &g).unwrap();
            // Remainder of the stationary-phase expansion is O(t^{−1}) relative.
            assert!(relative_linf_mismatch(&v, &u) <= 3.0 / t);
        }
    }

    fn probe_config(n: CubicNonlinearity, eps: f64, t_end: f64) -> SolverConfig {
        let mut cfg = SolverConfig::new(eps, n, t_end);
        cfg.grid = GridSpec { n: 2048, half_width: 128.0 * PI };
        cfg.log_samples = 21;
        cfg.probe_xi = vec![1.0];
        cfg
    }

    #[test]
    fn free_flow_is_consistent_with_the_ode() {
        let tr = run(&probe_config(CubicNonlinearity::zero(), 0.1, 30.0)).unwrap();
        let r = profile_ode_consistency(&tr, &CubicNonlinearity::zero(), 1.0, (1.0, 30.0)).unwrap();
        assert!(r.deferred);
        assert!(r.t_ref >= 10.0);
        assert!(r.modulus_error <= 1e-9 && r.phase_error <= 1e-9, "{r:?}");
        assert!(profile_ode_consistency(&tr, &CubicNonlinearity::zero(), 0.5, (10.0, 30.0)).is_err());
    }

    #[test]
    fn e_functional_rejects_bad_gamma_and_vanishes_on_zero() {
        let tr = run(&probe_config(CubicNonlinearity::zero(), 0.0, 5.0)).unwrap();
        assert!(compute_e(&tr, 0.0).is_err());
        assert!(compute_e(&tr, 1.0 / 12.0).is_err());
        let e = compute_e(&tr, 1.0 / 24.0).unwrap();
        assert_eq!(e.final_value, 0.0);
    }

    #[test]
    fn e_functional_is_stable_under_free_flow() {
        let tr = run(&probe_config(CubicNonlinearity::zero(), 0.1, 30.0)).unwrap();
        let e = compute_e(&tr, 1.0 / 24.0).unwrap();
        assert!(e.final_value <= 2.0 * e.values[0]);
        assert!(e.running_sup.windows(2).all(|w| w[1] >= w[0]));
    }

    fn identity_field() -> FieldState {
        let g = Grid::new(1024, 32.0 * PI).unwrap();
        let phi = FieldState::from_fn(g, 0.0, |x| c(0.8, 0.3) * (-x * x / 2.0).exp() * Complex64::from_polar(1.0, 0.5 * x));
        free_propagate(&phi, 1.0)
    }

    #[test]
    fn product_identities_and_f_split_hold() {
        let u = identity_field();
        let ju = apply_j(&u);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let mut n = CubicNonlinearity::zero();
            for m in crate::nonlinearity::F_MONOMIALS.iter().chain(&crate::nonlinearity::G_MONOMIALS) {
                n.set(*m, c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            }
            let r = verify_identities(&u, &ju, &n).unwrap();
            assert_eq!(r.key1_self, 0.0);
            assert!(r.max_identity_residual() <= 1e-10, "{r:?}");
            assert!(r.f_split <= 1e-8, "{r:?}");
        }
    }

    #[test]
    fn pure_g_nonlinearity_has_no_f_residual() {
        let u = identity_field();
        let r = verify_identities(&u, &apply_j(&u), &CubicNonlinearity::from_lambdas([c(1.0, 0.0); 6])).unwrap();
        assert_eq!(r.f_split, 0.0);
    }
}
