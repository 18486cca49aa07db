use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use rayon::prelude::*;

use super::field::{FieldState, SpectralProfile};
use super::grid::Grid;
use crate::defaults;
use crate::error::{Error, Result};
use crate::nonlinearity::CubicNonlinearity;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Applies the Fourier multiplier `m(ξ)` (FFT order) to the samples.
pub fn apply_multiplier(grid: &Grid, values: &[Complex64], m: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
    let mut buf = values.to_vec();
    grid.forward(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        *v *= m(grid.mode(k) as f64 * grid.dxi());
    }
    grid.inverse(&mut buf);
    buf
}

/// `U(τ)u = e^{iτ∂ₓ²/2}u`, the multiplier `e^{−iτξ²/2}`. The result is stamped with time `t + τ`.
pub fn free_propagate(u: &FieldState, tau: f64) -> FieldState {
    if tau == 0.0 {
        return u.clone();
    }
    let values = apply_multiplier(&u.grid, &u.values, |xi| Complex64::from_polar(1.0, -0.5 * tau * xi * xi));
    FieldState { grid: u.grid.clone(), t: u.t + tau, values }
}

/// Spectral `∂ₓu`.
pub fn derivative(u: &FieldState) -> FieldState {
    u.with_values(apply_multiplier(&u.grid, &u.values, |xi| I * xi))
}

/// Spectral `∂ₓᵏu`.
pub fn derivative_n(u: &FieldState, k: u32) -> FieldState {
    u.with_values(apply_multiplier(&u.grid, &u.values, |xi| (I * xi).powu(k)))
}

/// Phase `e^{−iπ/4}·(dx/√2π)·(−1)^k` turning FFT coefficient `k` into a sample of `Gφ`.
pub(crate) fn g_factor(grid: &Grid, k: usize) -> Complex64 {
    let sign = if grid.mode(k).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    Complex64::from_polar(sign * grid.dx() / (2.0 * PI).sqrt(), -FRAC_PI_4)
}

/// `(Gφ)(ξ) = e^{−iπ/4}φ̂(ξ)` with `φ̂(ξ) = (2π)^{−1/2}∫e^{−ixξ}φ(x)dx`, sampled on the frequency nodes.
pub fn gauge_transform_g(u: &FieldState) -> SpectralProfile {
    let g = &u.grid;
    let mut buf = u.values.clone();
    g.forward(&mut buf);
    let values = (0..g.n())
        .map(|i| {
            let k = g.natural_to_fft(i);
            buf[k] * g_factor(g, k)
        })
        .collect();
    SpectralProfile { grid: g.clone(), t: u.t, values }
}

/// Inverse of [`gauge_transform_g`].
pub fn inverse_gauge_transform_g(alpha: &SpectralProfile) -> FieldState {
    let g = &alpha.grid;
    let mut buf = vec![Complex64::new(0.0, 0.0); g.n()];
    for (i, a) in alpha.values.iter().enumerate() {
        let k = g.natural_to_fft(i);
        buf[k] = a / g_factor(g, k);
    }
    g.inverse(&mut buf);
    FieldState { grid: g.clone(), t: alpha.t, values: buf }
}

/// `α(t, ξ) = G[U(t)⁻¹u(t)](ξ)`.
pub fn extract_alpha(u: &FieldState) -> SpectralProfile {
    let v = free_propagate(u, -u.t);
    let mut a = gauge_transform_g(&v);
    a.t = u.t;
    a
}

/// Inverse of [`extract_alpha`]: the field `U(t)G⁻¹α` at `t = α.t`.
pub fn field_from_alpha(alpha: &SpectralProfile) -> FieldState {
    let v = inverse_gauge_transform_g(alpha);
    let mut u = free_propagate(&v, alpha.t);
    u.t = alpha.t;
    u
}

/// `Gφ` at an arbitrary frequency by direct summation (O(n)).
pub fn g_at(u: &FieldState, xi: f64) -> Complex64 {
    let g = &u.grid;
    let step = Complex64::from_polar(1.0, -xi * g.dx());
    let mut phase = Complex64::from_polar(1.0, -xi * g.x(0));
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, v) in u.values.iter().enumerate() {
        acc += v * phase;
        phase *= step;
        // Re-anchor to keep accumulated rounding in the phase negligible.
        if j % 256 == 255 {
            phase = Complex64::from_polar(1.0, -xi * g.x(j + 1));
        }
    }
    acc * Complex64::from_polar(g.dx() / (2.0 * PI).sqrt(), -FRAC_PI_4)
}

/// Multiplication by `M(t)^{±1} = e^{±ix²/2t}`.
pub fn multiply_m(u: &FieldState, t: f64, inverse: bool) -> FieldState {
    let sign = if inverse { -1.0 } else { 1.0 };
    u.map(|x, v| v * Complex64::from_polar(1.0, sign * x * x / (2.0 * t)))
}

/// `U(t)φ` assembled from the factors `M(t) D(t) G M(t)`, with `G` evaluated off-grid by
/// direct summation and `D(t)f(x) = t^{−1/2}f(x/t)`. Quadratic cost; intended for checks.
pub fn propagate_factorized(u: &FieldState, t: f64) -> Result<FieldState> {
    if t <= 0.0 {
        return Err(Error::domain(format!("factorized propagator needs t > 0, got {t}")));
    }
    let mphi = multiply_m(u, t, false);
    let xs = u.grid.xs();
    let values = xs
        .par_iter()
        .map(|&x| {
            let gv = g_at(&mphi, x / t);
            Complex64::from_polar(1.0, x * x / (2.0 * t)) * gv / t.sqrt()
        })
        .collect();
    Ok(FieldState { grid: u.grid.clone(), t: u.t + t, values })
}

/// How [`apply_j`] evaluated `J = x + it∂ₓ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JRoute {
    /// `t = 0`: pointwise `x·u`.
    Position,
    /// `M(t)(it∂ₓ)M(t)⁻¹`.
    Chirp,
    /// `x·u + it·uₓ` with the box coordinate.
    Direct,
}

/// Largest `|x_j|` where `|u_j|` exceeds `rel` times its maximum.
pub fn support_radius(u: &FieldState, rel: f64) -> f64 {
    let peak = linf_norm(u);
    if peak == 0.0 {
        return 0.0;
    }
    u.values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm() > rel * peak)
        .map(|(j, _)| u.grid.x(j).abs())
        .fold(0.0, f64::max)
}

/// Picks the chirp factorization when `e^{−ix²/2t}` is resolved on the support of `u`.
pub fn j_route(u: &FieldState) -> JRoute {
    if u.t == 0.0 {
        JRoute::Position
    } else if support_radius(u, 1e-8) / u.t.abs() < 0.5 * u.grid.xi_max() {
        JRoute::Chirp
    } else {
        JRoute::Direct
    }
}

/// `Ju = (x + it∂ₓ)u`.
pub fn apply_j(u: &FieldState) -> FieldState {
    warn_boundary(u, "J");
    apply_j_with(u, j_route(u))
}

pub fn apply_j_with(u: &FieldState, route: JRoute) -> FieldState {
    let t = u.t;
    match route {
        JRoute::Position => u.map(|x, v| v * x),
        JRoute::Chirp => {
            let w = multiply_m(u, t, true);
            let dw = derivative(&w);
            multiply_m(&dw, t, false).scaled(I * t)
        }
        JRoute::Direct => {
            let ux = derivative(u);
            let values = u
                .values
                .iter()
                .zip(&ux.values)
                .enumerate()
                .map(|(j, (v, d))| v * u.grid.x(j) + I * t * d)
                .collect();
            u.with_values(values)
        }
    }
}

/// `Ju = U(t)·x·U(t)⁻¹u`; exact on the periodic box as long as the profile stays away from the seam.
pub fn apply_j_conjugated(u: &FieldState) -> FieldState {
    let v = free_propagate(u, -u.t);
    let xv = v.map(|x, w| w * x);
    let mut out = free_propagate(&xv, u.t);
    out.t = u.t;
    out
}

/// `Zu = J∂ₓu − 2itN(u, uₓ)`, valid when `u` solves the equation at time `t`.
pub fn apply_z_on_solution(u: &FieldState, n: &CubicNonlinearity) -> FieldState {
    let ux = derivative(u);
    let jux = apply_j(&ux);
    let compiled = n.compile();
    let values = jux
        .values
        .iter()
        .zip(u.values.iter().zip(&ux.values))
        .map(|(j, (z, w))| j - 2.0 * I * u.t * compiled.eval(*z, *w))
        .collect();
    u.with_values(values)
}

/// Discrete `L²` norm `(dx Σ|u_j|²)^{1/2}`.
pub fn l2_norm(u: &FieldState) -> f64 {
    (u.grid.dx() * u.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
}

pub fn linf_norm(u: &FieldState) -> f64 {
    u.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Discrete `L²` norm of a profile, `(dξ Σ|α_k|²)^{1/2}`.
pub fn profile_l2_norm(a: &SpectralProfile) -> f64 {
    (a.grid.dxi() * a.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
}

/// `‖⟨ξ⟩^s (⟨x⟩^σ u)^‖` in the discrete Parseval normalization.
pub fn sobolev_norm(u: &FieldState, s: u32, sigma: u32) -> Result<f64> {
    if s > 3 {
        return Err(Error::domain(format!("Sobolev order s must be in 0..=3, got {s}")));
    }
    if sigma > 1 {
        return Err(Error::domain(format!("weight order σ must be 0 or 1, got {sigma}")));
    }
    let g = &u.grid;
    let mut buf: Vec<Complex64> = if sigma == 0 {
        u.values.clone()
    } else {
        u.values
            .iter()
            .enumerate()
            .map(|(j, v)| v * (1.0 + g.x(j).powi(2)).sqrt())
            .collect()
    };
    g.forward(&mut buf);
    let sum: f64 = buf
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let xi = g.mode(k) as f64 * g.dxi();
            (1.0 + xi * xi).powi(s as i32) * v.norm_sqr()
        })
        .sum();
    Ok((sum * g.dx() / g.n() as f64).sqrt())
}

/// Fraction of the discrete mass carried by the outer boundary layer of the box.
pub fn boundary_mass_fraction(u: &FieldState) -> f64 {
    let g = &u.grid;
    let edge = g.half_width() * (1.0 - defaults::BOUNDARY_LAYER);
    let (mut inner, mut outer) = (0.0, 0.0);
    for (j, v) in u.values.iter().enumerate() {
        if g.x(j).abs() >= edge {
            outer += v.norm_sqr();
        } else {
            inner += v.norm_sqr();
        }
    }
    let total = inner + outer;
    if total == 0.0 {
        0.0
    } else {
        outer / total
    }
}

/// Fraction of the spectral energy in modes with `|k| ≥ n/3`.
pub fn spectral_tail_fraction(u: &FieldState) -> f64 {
    let mut buf = u.values.clone();
    u.grid.forward(&mut buf);
    spectral_tail_fraction_of(&u.grid, &buf)
}

/// [`spectral_tail_fraction`] for coefficients already in FFT order.
pub fn spectral_tail_fraction_of(grid: &Grid, coeffs: &[Complex64]) -> f64 {
    let cut = (grid.n() / 3) as i64;
    let (mut total, mut tail) = (0.0, 0.0);
    for (k, v) in coeffs.iter().enumerate() {
        let e = v.norm_sqr();
        total += e;
        if grid.mode(k).abs() >= cut {
            tail += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

/// `sup_ξ ⟨ξ⟩²|α(ξ)|` over the frequency nodes.
pub fn sup_weighted_alpha(a: &SpectralProfile) -> f64 {
    a.frequencies()
        .iter()
        .zip(&a.values)
        .map(|(xi, v)| (1.0 + xi * xi) * v.norm())
        .fold(0.0, f64::max)
}

fn warn_boundary(u: &FieldState, what: &str) {
    let frac = boundary_mass_fraction(u);
    if frac > defaults::BOUNDARY_MASS_WARN {
        log::warn!(
            "{what}: boundary mass fraction {frac:.3e} exceeds {:.0e}; x-weighting is unreliable near the seam",
            defaults::BOUNDARY_MASS_WARN
        );
    }
}
