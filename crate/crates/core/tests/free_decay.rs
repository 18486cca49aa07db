//! Free evolutions obey `‖v‖∞ ≤ t^{−1/2}‖GU(−t)v‖∞ + C t^{−3/4}(‖v‖₂ + ‖Jv‖₂)`
//! with one constant over `t ∈ [1, 10³]`.

use dnls_core::spectral::{apply_j, free_propagate, gauge_transform_g, l2_norm, linf_norm};
use dnls_core::{Complex64, FieldState, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn sup_norm_excess_is_uniformly_bounded() {
    let g = Grid::new(32768, 1500.0 * std::f64::consts::PI).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let bumps: Vec<(Complex64, f64, f64, f64)> = (0..3)
            .map(|_| {
                let a = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                (a, rng.gen_range(-3.0..3.0), rng.gen_range(1.0..2.0), rng.gen_range(-1.0..1.0))
            })
            .collect();
        let phi = FieldState::from_fn(g.clone(), 0.0, |x| {
            bumps
                .iter()
                .map(|(a, s, w, v)| a * (-(x - s).powi(2) / (2.0 * w * w)).exp() * Complex64::from_polar(1.0, v * x))
                .sum()
        });
        // GU(−t)v = Gφ for a free evolution.
        let profile = gauge_transform_g(&phi).values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for t in [1.0, 10.0, 100.0, 1000.0] {
            let v = free_propagate(&phi, t);
            let excess = (linf_norm(&v) - profile / t.sqrt()).max(0.0);
            let ratio = excess / (t.powf(-0.75) * (l2_norm(&v) + l2_norm(&apply_j(&v))));
            assert!(ratio.is_finite());
            worst = worst.max(ratio);
        }
    }
    assert!(worst <= 1.0, "excess ratio {worst:e}");
}
