use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::grid::Grid;
use crate::error::{Error, Result};

/// Samples `u(t, x_j)` on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub grid: Grid,
    pub t: f64,
    pub values: Vec<Complex64>,
}

/// Samples `α(t, ξ_k)`, `k = −n/2 .. n/2 − 1`, in increasing frequency order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralProfile {
    pub grid: Grid,
    pub t: f64,
    pub values: Vec<Complex64>,
}

impl FieldState {
    pub fn new(grid: Grid, t: f64, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::domain(format!(
                "field has {} samples but the grid has {}",
                values.len(),
                grid.n()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("field sample {j} is not finite")));
        }
        Ok(Self { grid, t, values })
    }

    pub fn zeros(grid: Grid, t: f64) -> Self {
        let n = grid.n();
        Self { grid, t, values: vec![Complex64::new(0.0, 0.0); n] }
    }

    pub fn from_fn(grid: Grid, t: f64, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.xs().into_iter().map(f).collect();
        Self { grid, t, values }
    }

    /// Same grid and time, new samples.
    pub fn with_values(&self, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), self.grid.n());
        Self { grid: self.grid.clone(), t: self.t, values }
    }

    pub fn map(&self, f: impl Fn(f64, Complex64) -> Complex64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(j, v)| f(self.grid.x(j), *v))
            .collect();
        self.with_values(values)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        self.with_values(self.values.iter().map(|v| v * c).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// CSV with header `x,re,im`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "re", "im"])?;
        for (j, v) in self.values.iter().enumerate() {
            w.write_record([fmt_f64(self.grid.x(j)), fmt_f64(v.re), fmt_f64(v.im)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `x,re,im` rows and resamples them onto `grid` by linear interpolation (zero outside).
    pub fn read_csv(grid: Grid, t: f64, path: &Path) -> Result<Self> {
        let (xs, vs) = read_xy_csv(path)?;
        let values = grid.xs().into_iter().map(|x| interpolate_linear(&xs, &vs, x)).collect();
        Self::new(grid, t, values)
    }

    /// Raw little-endian `(re, im)` f64 pairs, row-major.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_pairs(&mut f, &self.values)?;
        f.flush()?;
        Ok(())
    }

    pub fn read_binary(grid: Grid, t: f64, path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let values = read_pairs(&bytes)?;
        Self::new(grid, t, values)
    }
}

impl SpectralProfile {
    pub fn new(grid: Grid, t: f64, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::domain(format!(
                "profile has {} samples but the grid has {}",
                values.len(),
                grid.n()
            )));
        }
        Ok(Self { grid, t, values })
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.grid.frequencies()
    }

    /// Value at the node nearest to `xi`.
    pub fn nearest(&self, xi: f64) -> (f64, Complex64) {
        let i = self.nearest_index(xi);
        (self.frequencies()[i], self.values[i])
    }

    pub fn nearest_index(&self, xi: f64) -> usize {
        let h = (self.grid.n() / 2) as f64;
        let k = (xi / self.grid.dxi()).round().clamp(-h, h - 1.0);
        (k + h) as usize
    }

    /// Catmull–Rom cubic interpolation in ξ; zero outside the frequency range.
    pub fn interpolate(&self, xi: f64) -> Complex64 {
        let n = self.grid.n();
        let h = (n / 2) as f64;
        let s = xi / self.grid.dxi() + h;
        if !(0.0..=(n - 1) as f64).contains(&s) {
            return Complex64::new(0.0, 0.0);
        }
        let i = (s.floor() as usize).min(n - 2);
        let f = s - i as f64;
        let at = |k: isize| -> Complex64 {
            if k < 0 || k as usize >= n {
                Complex64::new(0.0, 0.0)
            } else {
                self.values[k as usize]
            }
        };
        let i = i as isize;
        let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
        let f2 = f * f;
        let f3 = f2 * f;
        (p1 * 2.0 + (p2 - p0) * f + (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * f2 + (p1 * 3.0 - p0 - p2 * 3.0 + p3) * f3)
            * 0.5
    }

    /// CSV with header `xi,re,im`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["xi", "re", "im"])?;
        for (xi, v) in self.frequencies().into_iter().zip(&self.values) {
            w.write_record([fmt_f64(xi), fmt_f64(v.re), fmt_f64(v.im)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_pairs(&mut f, &self.values)?;
        f.flush()?;
        Ok(())
    }

    pub fn read_binary(grid: Grid, t: f64, path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::new(grid, t, read_pairs(&bytes)?)
    }
}

/// Fixed 17-significant-digit float formatting for reproducible text output.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_pairs(w: &mut impl Write, values: &[Complex64]) -> Result<()> {
    for v in values {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

fn read_pairs(bytes: &[u8]) -> Result<Vec<Complex64>> {
    if bytes.len() % 16 != 0 {
        return Err(Error::domain(format!(
            "binary field length {} is not a multiple of 16 bytes",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect())
}

fn read_xy_csv(path: &Path) -> Result<(Vec<f64>, Vec<Complex64>)> {
    let mut r = csv::Reader::from_path(path)?;
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let get = |k: usize, name: &str| -> Result<f64> {
            rec.get(k)
                .ok_or_else(|| Error::config(format!("{}:{}", path.display(), i + 2), format!("missing column {name}")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::config(format!("{}:{}", path.display(), i + 2), format!("column {name}: {e}")))
        };
        let x = get(0, "x")?;
        let re = get(1, "re")?;
        let im = if rec.len() > 2 { get(2, "im")? } else { 0.0 };
        if let Some(last) = xs.last() {
            if x <= *last {
                return Err(Error::config(
                    format!("{}:{}", path.display(), i + 2),
                    "x column must be strictly increasing",
                ));
            }
        }
        xs.push(x);
        vs.push(Complex64::new(re, im));
    }
    if xs.is_empty() {
        return Err(Error::config(path.display().to_string(), "no data rows"));
    }
    Ok((xs, vs))
}

fn interpolate_linear(xs: &[f64], vs: &[Complex64], x: f64) -> Complex64 {
    if x < xs[0] || x > xs[xs.len() - 1] {
        return Complex64::new(0.0, 0.0);
    }
    let i = xs.partition_point(|v| *v <= x);
    if i == 0 {
        return vs[0];
    }
    if i >= xs.len() {
        return vs[xs.len() - 1];
    }
    let f = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    vs[i - 1] * (1.0 - f) + vs[i] * f
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(64, 8.0).unwrap()
    }

    #[test]
    fn rejects_wrong_length_and_nan() {
        assert!(FieldState::new(grid(), 0.0, vec![Complex64::new(0.0, 0.0); 3]).is_err());
        let mut v = vec![Complex64::new(0.0, 0.0); 64];
        v[5] = Complex64::new(f64::NAN, 0.0);
        assert!(FieldState::new(grid(), 0.0, v).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let f = FieldState::from_fn(grid(), 0.5, |x| Complex64::new((-x * x).exp(), x.sin()));
        let p = dir.path().join("u.bin");
        f.write_binary(&p).unwrap();
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 64 * 16);
        let g = FieldState::read_binary(grid(), 0.5, &p).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn csv_round_trip_is_exact_on_the_same_grid() {
        let dir = tempfile::tempdir().unwrap();
        let f = FieldState::from_fn(grid(), 0.0, |x| Complex64::new((-x * x / 3.0).exp(), 0.1 * x));
        let p = dir.path().join("u.csv");
        f.write_csv(&p).unwrap();
        let g = FieldState::read_csv(grid(), 0.0, &p).unwrap();
        assert_eq!(f.values, g.values);
    }

    #[test]
    fn cubic_interpolation_reproduces_nodes_and_smooth_data() {
        let g = Grid::new(256, 20.0).unwrap();
        let vals = g.frequencies().iter().map(|&k| Complex64::new((-k * k).exp(), 0.0)).collect();
        let a = SpectralProfile::new(g.clone(), 0.0, vals).unwrap();
        for i in [100, 128, 140] {
            assert_eq!(a.interpolate(a.frequencies()[i]), a.values[i]);
        }
        let xi = 0.3 * g.dxi() + 0.5;
        assert!((a.interpolate(xi).re - (-xi * xi).exp()).abs() < 1e-3);
        assert_eq!(a.interpolate(1e3), Complex64::new(0.0, 0.0));
    }
}
