use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::defaults;
use crate::error::{Error, Result};

/// Size and extent of a periodic box `[−L, L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
}

fn default_n() -> usize {
    defaults::GRID_POINTS
}

fn default_half_width() -> f64 {
    defaults::GRID_HALF_WIDTH
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { n: default_n(), half_width: default_half_width() }
    }
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    forward_padded: Arc<dyn Fft<f64>>,
    inverse_padded: Arc<dyn Fft<f64>>,
}

/// Uniform periodic grid `x_j = −L + j·dx` with FFT plans for `n` and `2n` points.
///
/// Spectral arrays are kept in FFT order: index `k < n/2` holds `ξ = πk/L`,
/// index `k ≥ n/2` holds `ξ = π(k − n)/L`.
#[derive(Clone)]
pub struct Grid {
    n: usize,
    half_width: f64,
    plans: Arc<Plans>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("n", &self.n).field("half_width", &self.half_width).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.half_width == other.half_width
    }
}

impl Grid {
    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        if n < defaults::MIN_GRID_POINTS || !n.is_power_of_two() {
            return Err(Error::config(
                "grid.n",
                format!("must be a power of two ≥ {}, got {n}", defaults::MIN_GRID_POINTS),
            ));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::config("grid.half_width", format!("must be positive, got {half_width}")));
        }
        let mut planner = FftPlanner::new();
        let plans = Plans {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            forward_padded: planner.plan_fft_forward(defaults::PAD_FACTOR * n),
            inverse_padded: planner.plan_fft_inverse(defaults::PAD_FACTOR * n),
        };
        Ok(Self { n, half_width, plans: Arc::new(plans) })
    }

    pub fn from_spec(spec: &GridSpec) -> Result<Self> {
        Self::new(spec.n, spec.half_width)
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec { n: self.n, half_width: self.half_width }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn dxi(&self) -> f64 {
        PI / self.half_width
    }

    /// Largest resolved frequency `πn/(2L)`.
    pub fn xi_max(&self) -> f64 {
        self.dxi() * (self.n / 2) as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Signed mode number of FFT index `k`.
    pub fn mode(&self, k: usize) -> i64 {
        if k < self.n / 2 {
            k as i64
        } else {
            k as i64 - self.n as i64
        }
    }

    /// Frequencies in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.mode(k) as f64 * self.dxi()).collect()
    }

    /// Frequencies `ξ_k`, `k = −n/2 .. n/2 − 1`, in increasing order.
    pub fn frequencies(&self) -> Vec<f64> {
        let h = self.n as i64 / 2;
        (-h..h).map(|k| k as f64 * self.dxi()).collect()
    }

    /// FFT order index of natural-order position `i` (`ξ = frequencies()[i]`).
    pub fn natural_to_fft(&self, i: usize) -> usize {
        (i + self.n / 2) % self.n
    }

    /// Unnormalized forward DFT, in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.n);
        self.plans.forward.process(data);
    }

    /// Inverse DFT including the `1/n` factor, in place.
    pub fn inverse(&self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.n);
        self.plans.inverse.process(data);
        let s = 1.0 / self.n as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn padded_len(&self) -> usize {
        defaults::PAD_FACTOR * self.n
    }

    /// Unnormalized forward DFT on the padded grid.
    pub fn forward_padded(&self, data: &mut [Complex64]) {
        self.plans.forward_padded.process(data);
    }

    /// Unnormalized inverse DFT on the padded grid.
    pub fn inverse_padded(&self, data: &mut [Complex64]) {
        self.plans.inverse_padded.process(data);
    }

    /// Copies FFT-order coefficients into a zero-padded spectrum of length `2n`.
    /// The Nyquist mode is split evenly between `±n/2`.
    pub fn pad_spectrum(&self, src: &[Complex64], dst: &mut [Complex64]) {
        let n = self.n;
        let h = n / 2;
        let m = dst.len();
        dst.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        dst[..h].copy_from_slice(&src[..h]);
        dst[m - h + 1..].copy_from_slice(&src[h + 1..]);
        dst[h] = src[h] * 0.5;
        dst[m - h] = src[h] * 0.5;
    }

    /// Inverse of [`Grid::pad_spectrum`] for band-limited data; modes beyond `n/2` are dropped.
    pub fn truncate_spectrum(&self, src: &[Complex64], dst: &mut [Complex64]) {
        let n = self.n;
        let h = n / 2;
        let m = src.len();
        dst[..h].copy_from_slice(&src[..h]);
        dst[h + 1..].copy_from_slice(&src[m - h + 1..]);
        dst[h] = src[h] + src[m - h];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid::new(8, 1.0).is_err());
        assert!(Grid::new(100, 1.0).is_err());
        assert!(Grid::new(64, 0.0).is_err());
        assert!(Grid::new(64, f64::NAN).is_err());
    }

    #[test]
    fn coordinates() {
        let g = Grid::new(16, PI).unwrap();
        assert_eq!(g.x(0), -PI);
        assert_relative_eq!(g.dx(), PI / 8.0);
        assert_eq!(g.wavenumbers()[1], 1.0);
        assert_eq!(g.wavenumbers()[15], -1.0);
        assert_eq!(g.frequencies()[0], -8.0);
        assert_eq!(g.natural_to_fft(0), 8);
        assert_eq!(g.natural_to_fft(8), 0);
        assert_eq!(g.xi_max(), 8.0);
    }

    #[test]
    fn round_trip_is_identity() {
        let g = Grid::new(256, 10.0).unwrap();
        let orig: Vec<Complex64> =
            (0..256).map(|j| Complex64::new((j as f64 * 0.37).sin(), (j as f64).cos() * 0.1)).collect();
        let mut v = orig.clone();
        g.forward(&mut v);
        g.inverse(&mut v);
        let err: f64 = v.iter().zip(&orig).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-13);
    }

    #[test]
    fn pad_then_truncate_is_identity() {
        let g = Grid::new(32, 1.0).unwrap();
        let src: Vec<Complex64> = (0..32).map(|k| Complex64::new(k as f64, -(k as f64) * 0.5)).collect();
        let mut padded = vec![Complex64::new(0.0, 0.0); 64];
        g.pad_spectrum(&src, &mut padded);
        let mut back = vec![Complex64::new(0.0, 0.0); 32];
        g.truncate_spectrum(&padded, &mut back);
        assert_eq!(back, src);
    }
}
