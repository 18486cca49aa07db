use num_complex::Complex64;

use super::field::FieldState;
use super::operators::apply_multiplier;
use crate::defaults;
use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `Hv`, the multiplier `−i·sgn(ξ)`. The mean maps to zero; the Nyquist mode is treated as negative.
pub fn hilbert_transform(v: &FieldState) -> FieldState {
    v.with_values(apply_multiplier(&v.grid, &v.values, |xi| {
        if xi > 0.0 {
            -I
        } else if xi < 0.0 {
            I
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
}

fn cumulative_integral(v: &FieldState, phi: &[f64]) -> Result<Vec<f64>> {
    if phi.len() != v.grid.n() {
        return Err(Error::domain(format!(
            "Φ has {} samples but the grid has {}",
            phi.len(),
            v.grid.n()
        )));
    }
    if let Some(j) = phi.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::domain(format!("Φ must be finite and non-negative; Φ[{j}] = {}", phi[j])));
    }
    let dx = v.grid.dx();
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(phi.len());
    out.push(0.0);
    for w in phi.windows(2) {
        acc += 0.5 * dx * (w[0] + w[1]);
        out.push(acc);
    }
    Ok(out)
}

/// `S_Φv = cosh(∫_{−L}^x Φ)·v − i·sinh(∫_{−L}^x Φ)·Hv`.
pub fn smoothing_s(v: &FieldState, phi: &[f64]) -> Result<FieldState> {
    let cum = cumulative_integral(v, phi)?;
    Ok(apply_s(v, &cum))
}

fn apply_s(v: &FieldState, cum: &[f64]) -> FieldState {
    let hv = hilbert_transform(v);
    let values = v
        .values
        .iter()
        .zip(&hv.values)
        .zip(cum)
        .map(|((a, h), c)| a * c.cosh() - I * h * c.sinh())
        .collect();
    v.with_values(values)
}

/// `Q = P₊e^{I} + P₋e^{−I}`, which inverts `S_Φ` up to commutators `[P±, e^{±I}]`.
fn approximate_inverse(v: &FieldState, e_plus: &[f64]) -> Vec<Complex64> {
    let up = v.with_values(v.values.iter().zip(e_plus).map(|(a, e)| a * e).collect());
    let down = v.with_values(v.values.iter().zip(e_plus).map(|(a, e)| a / e).collect());
    let (h_up, h_down) = (hilbert_transform(&up), hilbert_transform(&down));
    (0..v.values.len())
        .map(|j| 0.5 * (up.values[j] + I * h_up.values[j]) + 0.5 * (down.values[j] - I * h_down.values[j]))
        .collect()
}

/// Solves `S_Φw = v` by restarted GMRES, right-preconditioned with the swapped-exponential inverse.
pub fn smoothing_s_inverse(v: &FieldState, phi: &[f64]) -> Result<(FieldState, GmresReport)> {
    let cum = cumulative_integral(v, phi)?;
    let e_plus: Vec<f64> = cum.iter().map(|c| c.exp()).collect();
    let precond = |y: &[Complex64]| approximate_inverse(&v.with_values(y.to_vec()), &e_plus);
    let op = |y: &[Complex64]| apply_s(&v.with_values(precond(y)), &cum).values;
    let (y, report) = gmres(
        op,
        &v.values,
        v.values.clone(),
        defaults::GMRES_RESTART,
        defaults::GMRES_TOL,
        defaults::GMRES_MAX_ITERS,
    );
    if !report.converged {
        return Err(Error::domain(format!(
            "S_Φ inverse did not converge: relative residual {:.3e} after {} iterations",
            report.relative_residual, report.iterations
        )));
    }
    Ok((v.with_values(precond(&y)), report))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Restarted GMRES(m) for `A x = b` with modified Gram–Schmidt and Givens rotations.
pub fn gmres(
    a: impl Fn(&[Complex64]) -> Vec<Complex64>,
    b: &[Complex64],
    x0: Vec<Complex64>,
    restart: usize,
    tol: f64,
    max_iters: usize,
) -> (Vec<Complex64>, GmresReport) {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = x0;
    if bnorm == 0.0 {
        return (
            vec![Complex64::new(0.0, 0.0); n],
            GmresReport { iterations: 0, relative_residual: 0.0, converged: true },
        );
    }
    let mut iters = 0;
    loop {
        let ax = a(&x);
        let r: Vec<Complex64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let beta = norm(&r);
        let rel = beta / bnorm;
        if rel <= tol || iters >= max_iters {
            return (x, GmresReport { iterations: iters, relative_residual: rel, converged: rel <= tol });
        }
        let m = restart.min(max_iters - iters).max(1);
        let mut basis: Vec<Vec<Complex64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![Complex64::new(0.0, 0.0); m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![Complex64::new(0.0, 0.0); m];
        let mut g = vec![Complex64::new(0.0, 0.0); m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k_used = 0;
        for k in 0..m {
            let mut w = a(&basis[k]);
            for (i, q) in basis.iter().enumerate() {
                let hik = dot(q, &w);
                h[i][k] = hik;
                w.iter_mut().zip(q).for_each(|(wv, qv)| *wv -= hik * qv);
            }
            let wn = norm(&w);
            h[k + 1][k] = Complex64::new(wn, 0.0);
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i].conj() * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let (p, q) = (h[k][k], h[k + 1][k]);
            let r = (p.norm_sqr() + q.norm_sqr()).sqrt();
            if p.norm() == 0.0 {
                cs[k] = 0.0;
                sn[k] = Complex64::new(1.0, 0.0);
            } else {
                cs[k] = p.norm() / r;
                sn[k] = p / p.norm() * q.conj() / r;
            }
            h[k][k] = cs[k] * p + sn[k] * q;
            h[k + 1][k] = Complex64::new(0.0, 0.0);
            g[k + 1] = -sn[k].conj() * g[k];
            g[k] *= cs[k];
            iters += 1;
            k_used = k + 1;
            if g[k + 1].norm() / bnorm <= tol || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        let mut y = vec![Complex64::new(0.0, 0.0); k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (yi, q) in y.iter().zip(&basis) {
            x.iter_mut().zip(q).for_each(|(xv, qv)| *xv += yi * qv);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{l2_norm, Grid};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_err(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    fn random_field(g: &Grid, rng: &mut ChaCha8Rng) -> FieldState {
        let coeffs: Vec<(f64, f64, f64, f64)> =
            (0..4).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-3.0..3.0), rng.gen_range(0.5..2.0))).collect();
        FieldState::from_fn(g.clone(), 0.0, |x| {
            coeffs
                .iter()
                .map(|(a, b, s, w)| c(*a, *b) * (-(x - s).powi(2) / (2.0 * w * w)).exp() * Complex64::from_polar(1.0, s * x))
                .sum()
        })
    }

    fn random_phi(g: &Grid, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let (a, s, w) = (rng.gen_range(0.0..0.6), rng.gen_range(-4.0..4.0), rng.gen_range(0.5..1.5));
        g.xs().iter().map(|x| a * (-(x - s).powi(2) / (2.0 * w * w)).exp()).collect()
    }

    #[test]
    fn hilbert_of_cosine_is_sine() {
        let g = Grid::new(256, std::f64::consts::PI * 4.0).unwrap();
        for k in [1.0, 3.0, 10.0] {
            let u = FieldState::from_fn(g.clone(), 0.0, |x| c((k * x).cos(), 0.0));
            let h = hilbert_transform(&u);
            let want: Vec<_> = g.xs().iter().map(|x| c((k * x).sin(), 0.0)).collect();
            assert!(max_err(&h.values, &want) < 1e-12);
        }
        let one = FieldState::from_fn(g.clone(), 0.0, |_| c(1.0, 0.0));
        assert!(max_err(&hilbert_transform(&one).values, &vec![c(0.0, 0.0); 256]) < 1e-15);
    }

    #[test]
    fn hilbert_squared_is_minus_identity_on_mean_zero() {
        let g = Grid::new(256, 12.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_field(&g, &mut rng);
        // Remove the mean and Nyquist modes.
        let u = u.with_values(apply_multiplier(&g, &u.values, |xi| {
            if xi == 0.0 || xi.abs() >= g.xi_max() { c(0.0, 0.0) } else { c(1.0, 0.0) }
        }));
        let hh = hilbert_transform(&hilbert_transform(&u));
        let neg: Vec<_> = u.values.iter().map(|v| -v).collect();
        assert!(max_err(&hh.values, &neg) < 1e-12);
    }

    #[test]
    fn zero_phi_is_identity_and_negative_phi_rejected() {
        let g = Grid::new(128, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_field(&g, &mut rng);
        let s = smoothing_s(&u, &vec![0.0; 128]).unwrap();
        assert_eq!(s.values, u.values);
        let mut phi = vec![0.0; 128];
        phi[7] = -1e-3;
        assert!(smoothing_s(&u, &phi).is_err());
        assert!(smoothing_s(&u, &[0.0; 3]).is_err());
    }

    #[test]
    fn gmres_solves_a_small_system() {
        let a = |x: &[Complex64]| vec![x[0] * 4.0 + x[1], x[0] + x[1] * c(3.0, 1.0)];
        let b = vec![c(1.0, 0.0), c(0.0, 2.0)];
        let (x, rep) = gmres(a, &b, vec![c(0.0, 0.0); 2], 5, 1e-14, 50);
        assert!(rep.converged);
        let r = a(&x);
        assert!(max_err(&r, &b) < 1e-13);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn s_round_trip_and_norm_bound(seed in 0u64..10_000) {
            let g = Grid::new(256, 16.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_field(&g, &mut rng);
            let phi = random_phi(&g, &mut rng);
            let l1: f64 = phi.iter().sum::<f64>() * g.dx();
            let s = smoothing_s(&u, &phi).unwrap();
            prop_assert!(l2_norm(&s) <= 3.0 * l1.exp() * l2_norm(&u));
            let (back, _) = smoothing_s_inverse(&s, &phi).unwrap();
            prop_assert!(max_err(&back.values, &u.values) <= 1e-10);
        }
    }
}
