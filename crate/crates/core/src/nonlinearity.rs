//! Cubic homogeneous polynomials in `(u, ū, u_x, ū_x)`.
//!
//! A nonlinearity is stored as an exact coefficient vector over the twenty
//! cubic monomials `z^p z̄^q ζ^r ζ̄^s` (with `z = u`, `ζ = u_x`), ordered
//! lexicographically by `(p, q, r, s)`. Everything here is coefficient
//! algebra; nothing is fitted or sampled.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::defaults;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Exponents `(p, q, r, s)` of `z^p z̄^q ζ^r ζ̄^s` with `p + q + r + s = 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MonomialIndex {
    pub p: u8,
    pub q: u8,
    pub r: u8,
    pub s: u8,
}

/// The twenty cubic monomials in canonical order.
pub const ALL_MONOMIALS: [MonomialIndex; 20] = build_basis();

const fn build_basis() -> [MonomialIndex; 20] {
    let mut out = [MonomialIndex { p: 0, q: 0, r: 0, s: 0 }; 20];
    let mut i = 0;
    let mut p = 0;
    while p <= 3 {
        let mut q = 0;
        while q <= 3 - p {
            let mut r = 0;
            while r <= 3 - p - q {
                out[i] = MonomialIndex { p, q, r, s: 3 - p - q - r };
                i += 1;
                r += 1;
            }
            q += 1;
        }
        p += 1;
    }
    out
}

impl MonomialIndex {
    pub fn new(p: u8, q: u8, r: u8, s: u8) -> Result<Self> {
        if p as u32 + q as u32 + r as u32 + s as u32 != 3 {
            return Err(Error::domain(format!(
                "monomial ({p},{q},{r},{s}) is not cubic: exponents must sum to 3"
            )));
        }
        Ok(Self { p, q, r, s })
    }

    const fn raw(p: u8, q: u8, r: u8, s: u8) -> Self {
        Self { p, q, r, s }
    }

    /// Position in [`ALL_MONOMIALS`].
    pub fn position(self) -> usize {
        ALL_MONOMIALS
            .iter()
            .position(|m| *m == self)
            .expect("cubic monomial is always in the basis")
    }

    /// `p − q + r − s`: the rotation index under `(z, ζ) ↦ (e^{iθ}z, e^{iθ}ζ)`.
    pub fn phase_index(self) -> i32 {
        self.p as i32 - self.q as i32 + self.r as i32 - self.s as i32
    }

    pub fn eval(self, z: Complex64, zeta: Complex64) -> Complex64 {
        powi(z, self.p) * powi(z.conj(), self.q) * powi(zeta, self.r) * powi(zeta.conj(), self.s)
    }
}

impl fmt::Display for MonomialIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (name, e) in [("u", self.p), ("ū", self.q), ("u_x", self.r), ("ū_x", self.s)] {
            match e {
                0 => {}
                1 => parts.push(name.to_string()),
                _ => parts.push(format!("{name}^{e}")),
            }
        }
        write!(f, "{} (p,q,r,s)=({},{},{},{})", parts.join("·"), self.p, self.q, self.r, self.s)
    }
}

fn powi(z: Complex64, e: u8) -> Complex64 {
    match e {
        0 => Complex64::new(1.0, 0.0),
        1 => z,
        2 => z * z,
        3 => z * z * z,
        _ => z.powu(e as u32),
    }
}

/// Monomials excluded by the weak condition: `u³`, `u ū²`, `ū³`.
pub const EXCLUDED_MONOMIALS: [MonomialIndex; 3] = [
    MonomialIndex::raw(3, 0, 0, 0),
    MonomialIndex::raw(1, 2, 0, 0),
    MonomialIndex::raw(0, 3, 0, 0),
];

/// Monomials carried by the non-gauge-invariant part `F`, in the order a₁..a₃, b₁..b₃, c₁..c₅.
pub const F_MONOMIALS: [MonomialIndex; 11] = [
    MonomialIndex::raw(2, 0, 1, 0), // a1 u² u_x
    MonomialIndex::raw(1, 0, 2, 0), // a2 u u_x²
    MonomialIndex::raw(0, 0, 3, 0), // a3 u_x³
    MonomialIndex::raw(0, 2, 0, 1), // b1 conj(u² u_x)
    MonomialIndex::raw(0, 1, 0, 2), // b2 conj(u u_x²)
    MonomialIndex::raw(0, 0, 0, 3), // b3 conj(u_x³)
    MonomialIndex::raw(0, 2, 1, 0), // c1 ū² u_x
    MonomialIndex::raw(1, 1, 0, 1), // c2 |u|² ū_x
    MonomialIndex::raw(1, 0, 0, 2), // c3 u ū_x²
    MonomialIndex::raw(0, 1, 1, 1), // c4 |u_x|² ū
    MonomialIndex::raw(0, 0, 1, 2), // c5 |u_x|² ū_x
];

/// Monomials of the gauge-invariant part `G`, in the order λ₁..λ₆.
pub const G_MONOMIALS: [MonomialIndex; 6] = [
    MonomialIndex::raw(2, 1, 0, 0), // |u|² u
    MonomialIndex::raw(1, 1, 1, 0), // |u|² u_x
    MonomialIndex::raw(2, 0, 0, 1), // u² ū_x
    MonomialIndex::raw(1, 0, 1, 1), // |u_x|² u
    MonomialIndex::raw(0, 1, 2, 0), // ū u_x²
    MonomialIndex::raw(0, 0, 2, 1), // |u_x|² u_x
];

/// A cubic homogeneous polynomial `N(z, ζ)` with complex coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicNonlinearity {
    coeffs: [Complex64; 20],
}

impl Default for CubicNonlinearity {
    fn default() -> Self {
        Self::zero()
    }
}

impl CubicNonlinearity {
    pub fn zero() -> Self {
        Self { coeffs: [ZERO; 20] }
    }

    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (MonomialIndex, Complex64)>,
    {
        let mut n = Self::zero();
        for (m, c) in terms {
            n.coeffs[m.position()] += c;
        }
        n
    }

    /// Single monomial `c · z^p z̄^q ζ^r ζ̄^s`; panics if the exponents are not cubic.
    pub fn monomial(p: u8, q: u8, r: u8, s: u8, c: Complex64) -> Self {
        let m = MonomialIndex::new(p, q, r, s).expect("cubic exponents");
        Self::from_terms([(m, c)])
    }

    /// `λ|u|²u + ...` in the six-coefficient gauge-invariant basis.
    pub fn from_lambdas(lambda: [Complex64; 6]) -> Self {
        Self::from_terms(G_MONOMIALS.into_iter().zip(lambda))
    }

    pub fn coefficient(&self, m: MonomialIndex) -> Complex64 {
        self.coeffs[m.position()]
    }

    pub fn set(&mut self, m: MonomialIndex, c: Complex64) {
        self.coeffs[m.position()] = c;
    }

    /// Nonzero terms in canonical order.
    pub fn terms(&self) -> impl Iterator<Item = (MonomialIndex, Complex64)> + '_ {
        ALL_MONOMIALS
            .iter()
            .zip(self.coeffs.iter())
            .filter(|(_, c)| **c != ZERO)
            .map(|(m, c)| (*m, *c))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == ZERO)
    }

    /// `‖coeffs‖₁`.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = *self;
        out.coeffs.iter_mut().for_each(|x| *x *= c);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = *self;
        out.coeffs
            .iter_mut()
            .zip(other.coeffs.iter())
            .for_each(|(a, b)| *a += b);
        out
    }

    /// Restriction to monomials with `p − q + r − s = 1`.
    pub fn gauge_invariant_part(&self) -> Self {
        Self::from_terms(self.terms().filter(|(m, _)| m.phase_index() == 1))
    }

    pub fn evaluate(&self, z: Complex64, zeta: Complex64) -> Complex64 {
        self.terms().map(|(m, c)| c * m.eval(z, zeta)).sum()
    }

    /// Formal Wirtinger partials `(∂N/∂ζ, ∂N/∂ζ̄)`.
    pub fn partials(&self) -> (QuadraticPolynomial, QuadraticPolynomial) {
        let mut dz = QuadraticPolynomial::default();
        let mut dzb = QuadraticPolynomial::default();
        for (m, c) in self.terms() {
            if m.r > 0 {
                dz.add_term([m.p, m.q, m.r - 1, m.s], c * m.r as f64);
            }
            if m.s > 0 {
                dzb.add_term([m.p, m.q, m.r, m.s - 1], c * m.s as f64);
            }
        }
        (dz, dzb)
    }

    pub fn is_gauge_invariant(&self) -> bool {
        self.terms().all(|(m, _)| m.phase_index() == 1)
    }

    pub fn satisfies_weak_condition(&self) -> bool {
        self.first_excluded().is_none()
    }

    fn first_excluded(&self) -> Option<MonomialIndex> {
        EXCLUDED_MONOMIALS
            .into_iter()
            .find(|m| self.coefficient(*m) != ZERO)
    }

    /// Splits `N = F + G`; fails on the first excluded monomial present.
    pub fn fg_split(&self) -> Result<FgDecomposition> {
        if let Some(m) = self.first_excluded() {
            return Err(Error::WeakCondition(m));
        }
        let f: Vec<Complex64> = F_MONOMIALS.iter().map(|m| self.coefficient(*m)).collect();
        Ok(FgDecomposition {
            a: [f[0], f[1], f[2]],
            b: [f[3], f[4], f[5]],
            c: [f[6], f[7], f[8], f[9], f[10]],
            lambda: G_MONOMIALS.map(|m| self.coefficient(m)),
        })
    }

    /// Coefficients `[ν₀, ν₁, ν₂, ν₃]` of `ν(ξ) = Σ ν_k ξ^k`.
    pub fn nu_coefficients(&self) -> [Complex64; 4] {
        let mut out = [ZERO; 4];
        for (m, c) in self.terms().filter(|(m, _)| m.phase_index() == 1) {
            // (iξ)^r (−iξ)^s = i^r (−i)^s ξ^(r+s)
            let unit = I.powu(m.r as u32) * (-I).powu(m.s as u32);
            out[(m.r + m.s) as usize] += c * unit;
        }
        out
    }

    /// Real coefficients of `Im ν(ξ)` as a polynomial in ξ.
    pub fn im_nu_coefficients(&self) -> [f64; 4] {
        self.nu_coefficients().map(|c| c.im)
    }

    /// Exact value of the contour integral `(1/2πi)∮ N(z, iξz) dz/z²`.
    pub fn nu(&self, xi: f64) -> Complex64 {
        let c = self.nu_coefficients();
        ((c[3] * xi + c[2]) * xi + c[1]) * xi + c[0]
    }

    /// Trapezoid rule for the same contour integral on `z = e^{iθ}`.
    pub fn nu_quadrature(&self, xi: f64, n_nodes: usize) -> Result<Complex64> {
        if n_nodes < defaults::NU_QUADRATURE_MIN_NODES {
            return Err(Error::domain(format!(
                "nu quadrature needs at least {} nodes, got {n_nodes}",
                defaults::NU_QUADRATURE_MIN_NODES
            )));
        }
        let sum: Complex64 = (0..n_nodes)
            .map(|j| {
                let theta = 2.0 * PI * j as f64 / n_nodes as f64;
                let z = Complex64::from_polar(1.0, theta);
                self.evaluate(z, I * xi * z) * z.conj()
            })
            .sum();
        Ok(sum / n_nodes as f64)
    }

    /// `κ(ξ) = ⟨ξ⟩⁻⁴ ν(ξ)`.
    pub fn kappa(&self, xi: f64) -> Complex64 {
        let w = 1.0 + xi * xi;
        self.nu(xi) / (w * w)
    }

    /// Precomputed form for pointwise evaluation on fields.
    pub fn compile(&self) -> CompiledNonlinearity {
        CompiledNonlinearity {
            terms: self.terms().map(|(m, c)| ([m.p, m.q, m.r, m.s], c)).collect(),
        }
    }
}

/// Reduced-dynamics symbol `κ(ξ) = ⟨ξ⟩⁻⁴ν(ξ)` of the profile equation.
pub fn reduced_profile_rhs(n: &CubicNonlinearity, xi: f64) -> Complex64 {
    n.kappa(xi)
}

/// Pointwise evaluator for `N(u, u_x)` on sampled fields.
#[derive(Debug, Clone)]
pub struct CompiledNonlinearity {
    terms: Vec<([u8; 4], Complex64)>,
}

impl CompiledNonlinearity {
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    #[inline]
    pub fn eval(&self, z: Complex64, zeta: Complex64) -> Complex64 {
        let zp = [Complex64::new(1.0, 0.0), z, z * z, z * z * z];
        let zb = z.conj();
        let zq = [Complex64::new(1.0, 0.0), zb, zb * zb, zb * zb * zb];
        let wr = [Complex64::new(1.0, 0.0), zeta, zeta * zeta, zeta * zeta * zeta];
        let wb = zeta.conj();
        let ws = [Complex64::new(1.0, 0.0), wb, wb * wb, wb * wb * wb];
        self.terms
            .iter()
            .map(|([p, q, r, s], c)| {
                c * zp[*p as usize] * zq[*q as usize] * wr[*r as usize] * ws[*s as usize]
            })
            .sum()
    }

    pub fn eval_fields(&self, u: &[Complex64], ux: &[Complex64], out: &mut [Complex64]) {
        for ((o, z), w) in out.iter_mut().zip(u).zip(ux) {
            *o = self.eval(*z, *w);
        }
    }
}

/// Quadratic homogeneous polynomial in `(z, z̄, ζ, ζ̄)`, keyed by exponents.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuadraticPolynomial {
    terms: std::collections::BTreeMap<[u8; 4], Complex64>,
}

impl QuadraticPolynomial {
    fn add_term(&mut self, e: [u8; 4], c: Complex64) {
        *self.terms.entry(e).or_insert(ZERO) += c;
    }

    pub fn coefficient(&self, p: u8, q: u8, r: u8, s: u8) -> Complex64 {
        self.terms.get(&[p, q, r, s]).copied().unwrap_or(ZERO)
    }

    pub fn terms(&self) -> impl Iterator<Item = ([u8; 4], Complex64)> + '_ {
        self.terms.iter().filter(|(_, c)| **c != ZERO).map(|(e, c)| (*e, *c))
    }

    pub fn evaluate(&self, z: Complex64, zeta: Complex64) -> Complex64 {
        self.terms()
            .map(|([p, q, r, s], c)| {
                c * powi(z, p) * powi(z.conj(), q) * powi(zeta, r) * powi(zeta.conj(), s)
            })
            .sum()
    }
}

/// Coefficients of `N = F + G` in the non-gauge-invariant (`a`, `b`, `c`)
/// and gauge-invariant (`λ`) bases.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FgDecomposition {
    pub a: [Complex64; 3],
    pub b: [Complex64; 3],
    pub c: [Complex64; 5],
    pub lambda: [Complex64; 6],
}

impl FgDecomposition {
    pub fn f_part(&self) -> CubicNonlinearity {
        let coeffs = self.a.iter().chain(self.b.iter()).chain(self.c.iter()).copied();
        CubicNonlinearity::from_terms(F_MONOMIALS.into_iter().zip(coeffs))
    }

    pub fn g_part(&self) -> CubicNonlinearity {
        CubicNonlinearity::from_lambdas(self.lambda)
    }

    pub fn reassemble(&self) -> CubicNonlinearity {
        self.f_part().add(&self.g_part())
    }
}

// ---------------------------------------------------------------------------
// JSON documents

/// A complex number in JSON: `1.5`, `[re, im]` or `{"re": .., "im": ..}`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
    Object { re: f64, im: f64 },
}

impl From<ComplexValue> for Complex64 {
    fn from(v: ComplexValue) -> Self {
        match v {
            ComplexValue::Real(x) => Complex64::new(x, 0.0),
            ComplexValue::Pair([re, im]) | ComplexValue::Object { re, im } => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialTerm {
    pub p: u8,
    pub q: u8,
    pub r: u8,
    pub s: u8,
    #[serde(default)]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// Nonlinearity document: explicit monomials, the `λ/a/b/c` shorthand, or both (summed).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monomials: Option<Vec<MonomialTerm>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<ComplexValue>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<ComplexValue>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<ComplexValue>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<ComplexValue>>,
}

impl NonlinearitySpec {
    pub fn resolve(&self) -> Result<CubicNonlinearity> {
        let mut n = CubicNonlinearity::zero();
        if let Some(terms) = &self.monomials {
            for (i, t) in terms.iter().enumerate() {
                let m = MonomialIndex::new(t.p, t.q, t.r, t.s)
                    .map_err(|e| Error::config(format!("monomials[{i}]"), e.to_string()))?;
                n.coeffs[m.position()] += Complex64::new(t.re, t.im);
            }
        }
        let groups: [(&str, &Option<Vec<ComplexValue>>, &[MonomialIndex]); 4] = [
            ("lambda", &self.lambda, &G_MONOMIALS),
            ("a", &self.a, &F_MONOMIALS[0..3]),
            ("b", &self.b, &F_MONOMIALS[3..6]),
            ("c", &self.c, &F_MONOMIALS[6..11]),
        ];
        for (name, values, basis) in groups {
            let Some(values) = values else { continue };
            if values.len() > basis.len() {
                return Err(Error::config(
                    name,
                    format!("expected at most {} coefficients, got {}", basis.len(), values.len()),
                ));
            }
            for (m, v) in basis.iter().zip(values) {
                n.coeffs[m.position()] += Complex64::from(*v);
            }
        }
        Ok(n)
    }

    pub fn from_nonlinearity(n: &CubicNonlinearity) -> Self {
        Self {
            monomials: Some(
                n.terms()
                    .map(|(m, c)| MonomialTerm { p: m.p, q: m.q, r: m.r, s: m.s, re: c.re, im: c.im })
                    .collect(),
            ),
            ..Self::default()
        }
    }
}

impl Serialize for CubicNonlinearity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        NonlinearitySpec::from_nonlinearity(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for CubicNonlinearity {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = NonlinearitySpec::deserialize(d)?;
        spec.resolve().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn arb_coeffs() -> impl Strategy<Value = CubicNonlinearity> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 20).prop_map(|v| {
            CubicNonlinearity::from_terms(ALL_MONOMIALS.into_iter().zip(v.into_iter().map(|(a, b)| c(a, b))))
        })
    }

    // Expansion of N(z, ζ) written out term by term over the real and
    // imaginary parts, independent of MonomialIndex::eval.
    fn expand(n: &CubicNonlinearity, z: Complex64, zeta: Complex64) -> Complex64 {
        let mut acc = c(0.0, 0.0);
        for (m, coef) in n.terms() {
            let mut prod = c(1.0, 0.0);
            for _ in 0..m.p {
                prod = c(prod.re * z.re - prod.im * z.im, prod.re * z.im + prod.im * z.re);
            }
            for _ in 0..m.q {
                prod = c(prod.re * z.re + prod.im * z.im, -prod.re * z.im + prod.im * z.re);
            }
            for _ in 0..m.r {
                prod = c(prod.re * zeta.re - prod.im * zeta.im, prod.re * zeta.im + prod.im * zeta.re);
            }
            for _ in 0..m.s {
                prod = c(prod.re * zeta.re + prod.im * zeta.im, -prod.re * zeta.im + prod.im * zeta.re);
            }
            acc += coef * prod;
        }
        acc
    }

    #[test]
    fn basis_has_twenty_distinct_cubic_monomials() {
        let mut v = ALL_MONOMIALS.to_vec();
        v.dedup();
        assert_eq!(v.len(), 20);
        assert!(ALL_MONOMIALS.windows(2).all(|w| w[0] < w[1]));
        assert!(ALL_MONOMIALS.iter().all(|m| m.p + m.q + m.r + m.s == 3));
        // F, G and the excluded set partition the basis.
        let mut all: Vec<_> = F_MONOMIALS
            .iter()
            .chain(G_MONOMIALS.iter())
            .chain(EXCLUDED_MONOMIALS.iter())
            .copied()
            .collect();
        all.sort();
        assert_eq!(all, ALL_MONOMIALS.to_vec());
    }

    #[test]
    fn non_cubic_index_rejected() {
        assert!(MonomialIndex::new(1, 1, 1, 1).is_err());
    }

    #[test]
    fn evaluate_unit_and_product_monomials() {
        let n = CubicNonlinearity::monomial(0, 0, 2, 1, c(1.0, 0.0));
        assert_eq!(n.evaluate(c(0.0, 0.0), c(1.0, 0.0)), c(1.0, 0.0));
        let n = CubicNonlinearity::monomial(2, 0, 1, 0, c(1.0, 0.0));
        assert_eq!(n.evaluate(c(2.0, 0.0), c(3.0, 0.0)), c(12.0, 0.0));
    }

    #[test]
    fn partial_of_zeta_zetabar_squared() {
        let n = CubicNonlinearity::monomial(0, 0, 1, 2, c(1.0, 0.0));
        let (q1, q2) = n.partials();
        assert_eq!(q1.coefficient(0, 0, 0, 2), c(1.0, 0.0));
        assert_eq!(q1.terms().count(), 1);
        assert_eq!(q2.coefficient(0, 0, 1, 1), c(2.0, 0.0));
    }

    #[test]
    fn partials_of_weak_condition_input_carry_no_pure_z_terms() {
        let n = CubicNonlinearity::from_terms(
            ALL_MONOMIALS
                .into_iter()
                .filter(|m| !EXCLUDED_MONOMIALS.contains(m))
                .enumerate()
                .map(|(i, m)| (m, c(1.0 + i as f64, -0.5))),
        );
        let (q1, q2) = n.partials();
        for q in [&q1, &q2] {
            assert!(q.terms().count() > 0);
            assert!(q.terms().all(|([p, q, r, s], _)| p + q + r + s == 2 && p + q < 3));
        }
    }

    #[test]
    fn gauge_invariance_examples() {
        assert!(CubicNonlinearity::monomial(2, 1, 0, 0, c(1.0, 0.0)).is_gauge_invariant());
        assert!(!CubicNonlinearity::monomial(0, 0, 3, 0, c(1.0, 0.0)).is_gauge_invariant());
        assert!(CubicNonlinearity::zero().is_gauge_invariant());
    }

    #[test]
    fn weak_condition_examples() {
        assert!(!CubicNonlinearity::monomial(3, 0, 0, 0, c(1.0, 0.0)).satisfies_weak_condition());
        assert!(CubicNonlinearity::monomial(2, 1, 0, 0, c(1.0, 0.0)).satisfies_weak_condition());
        assert!(CubicNonlinearity::monomial(0, 1, 2, 0, c(1.0, 0.0)).satisfies_weak_condition());
    }

    #[test]
    fn fg_split_examples() {
        let d = CubicNonlinearity::monomial(0, 0, 2, 1, c(1.0, 0.0)).fg_split().unwrap();
        assert_eq!(d.lambda[5], c(1.0, 0.0));
        assert_eq!(d.reassemble().l1_norm(), 1.0);
        let d = CubicNonlinearity::monomial(0, 2, 1, 0, c(1.0, 0.0)).fg_split().unwrap();
        assert_eq!(d.c[0], c(1.0, 0.0));
        assert_eq!(d.f_part().l1_norm(), 1.0);
        assert!(d.g_part().is_zero());
        match CubicNonlinearity::monomial(3, 0, 0, 0, c(1.0, 0.0)).fg_split() {
            Err(Error::WeakCondition(m)) => assert_eq!(m, MonomialIndex::new(3, 0, 0, 0).unwrap()),
            other => panic!("expected weak-condition error, got {other:?}"),
        }
    }

    #[test]
    fn nu_of_special_nonlinearity_is_i_lambda_xi_cubed() {
        let (lam, a, b, cc) = (c(0.7, -0.2), c(1.3, 0.4), c(-0.6, 2.0), c(0.1, 0.9));
        let n = CubicNonlinearity::from_terms([
            (MonomialIndex::new(0, 0, 2, 1).unwrap(), lam),
            (MonomialIndex::new(0, 0, 3, 0).unwrap(), a),
            (MonomialIndex::new(0, 0, 0, 3).unwrap(), b),
            (MonomialIndex::new(0, 0, 1, 2).unwrap(), cc),
        ]);
        for xi in [-3.0, -0.5, 0.0, 1.0, 2.5] {
            assert_eq!(n.nu(xi), I * lam * xi * xi * xi);
        }
    }

    #[test]
    fn nu_matches_lambda_formula() {
        let l = [c(0.3, 1.0), c(-1.0, 0.5), c(0.2, 0.2), c(1.5, -0.7), c(0.0, 1.1), c(-0.4, 0.3)];
        let n = CubicNonlinearity::from_lambdas(l);
        for xi in [-2.0, 0.0, 0.75, 3.0] {
            let expect = l[0] + I * (l[1] - l[2]) * xi + (l[3] - l[4]) * xi * xi + I * l[5] * xi * xi * xi;
            assert_relative_eq!((n.nu(xi) - expect).norm(), 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn nu_quadrature_edge_cases() {
        assert_eq!(CubicNonlinearity::zero().nu_quadrature(1.0, 64).unwrap(), c(0.0, 0.0));
        let cube = CubicNonlinearity::monomial(3, 0, 0, 0, c(1.0, 0.0));
        assert!(cube.nu_quadrature(2.0, 64).unwrap().norm() < 1e-15);
        assert_eq!(cube.nu(2.0), c(0.0, 0.0));
        assert!(cube.nu_quadrature(2.0, 7).is_err());
    }

    #[test]
    fn kappa_examples() {
        let n = CubicNonlinearity::from_lambdas([c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(reduced_profile_rhs(&n, 0.0), c(1.0, 0.0));
        let n = CubicNonlinearity::monomial(0, 0, 2, 1, c(1.0, 0.0));
        for xi in [0.5f64, 1.0, 2.0] {
            let expect = I * xi.powi(3) / (1.0 + xi * xi).powi(2);
            assert_relative_eq!((n.kappa(xi) - expect).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn json_shorthand_and_monomials() {
        let n: CubicNonlinearity = serde_json::from_str(r#"{"lambda":[0,0,0,0,0,1]}"#).unwrap();
        assert_eq!(n, CubicNonlinearity::monomial(0, 0, 2, 1, c(1.0, 0.0)));
        let n: CubicNonlinearity =
            serde_json::from_str(r#"{"monomials":[{"p":0,"q":0,"r":2,"s":1,"re":1.0,"im":0.0}]}"#).unwrap();
        assert_eq!(n, CubicNonlinearity::monomial(0, 0, 2, 1, c(1.0, 0.0)));
        let n: CubicNonlinearity = serde_json::from_str(r#"{"c":[[0,1]], "a":[{"re":2,"im":0}]}"#).unwrap();
        assert_eq!(n.fg_split().unwrap().c[0], I);
        assert_eq!(n.fg_split().unwrap().a[0], c(2.0, 0.0));
        let empty: CubicNonlinearity = serde_json::from_str("{}").unwrap();
        assert!(empty.is_zero());
    }

    #[test]
    fn json_errors_name_the_field() {
        let err = serde_json::from_str::<CubicNonlinearity>(r#"{"lambda":[1,2,3,4,5,6,7]}"#).unwrap_err();
        assert!(err.to_string().contains("lambda"), "{err}");
        let err = serde_json::from_str::<CubicNonlinearity>(r#"{"monomials":[{"p":1,"q":1,"r":1,"s":1}]}"#)
            .unwrap_err();
        assert!(err.to_string().contains("monomials[0]"), "{err}");
        let err = serde_json::from_str::<CubicNonlinearity>(r#"{"lambdas":[1]}"#).unwrap_err();
        assert!(err.to_string().contains("lambdas"), "{err}");
    }

    proptest! {
        #[test]
        fn evaluate_matches_expansion(n in arb_coeffs(), zr in -2.0f64..2.0, zi in -2.0f64..2.0,
                                      wr in -2.0f64..2.0, wi in -2.0f64..2.0) {
            let (z, w) = (c(zr, zi), c(wr, wi));
            let a = n.evaluate(z, w);
            let b = expand(&n, z, w);
            prop_assert!((a - b).norm() <= 1e-14 * b.norm().max(1.0) * 10.0);
            let compiled = n.compile().eval(z, w);
            prop_assert!((compiled - b).norm() <= 1e-13 * b.norm().max(1.0));
        }

        #[test]
        fn evaluation_is_cubic_homogeneous(n in arb_coeffs(), s in -3.0f64..3.0,
                                           zr in -1.0f64..1.0, wi in -1.0f64..1.0) {
            let (z, w) = (c(zr, 0.3), c(0.2, wi));
            let lhs = n.evaluate(z * s, w * s);
            let rhs = n.evaluate(z, w) * s.powi(3);
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
        }

        #[test]
        fn partials_match_central_differences(n in arb_coeffs(), zr in -1.0f64..1.0, zi in -1.0f64..1.0,
                                              wr in -1.0f64..1.0, wi in -1.0f64..1.0) {
            let (z, w) = (c(zr, zi), c(wr, wi));
            let (q1, q2) = n.partials();
            let h = 1e-5;
            let d_re = (n.evaluate(z, w + h) - n.evaluate(z, w - h)) / (2.0 * h);
            let d_im = (n.evaluate(z, w + I * h) - n.evaluate(z, w - I * h)) / (2.0 * h);
            let wirt = 0.5 * (d_re - I * d_im);
            let wirt_bar = 0.5 * (d_re + I * d_im);
            prop_assert!((wirt - q1.evaluate(z, w)).norm() < 1e-7);
            prop_assert!((wirt_bar - q2.evaluate(z, w)).norm() < 1e-7);
        }

        #[test]
        fn quadrature_matches_closed_form(n in arb_coeffs(), xi in -8.0f64..8.0) {
            let q = n.nu_quadrature(xi, 64).unwrap();
            let e = n.nu(xi);
            prop_assert!((q - e).norm() <= 1e-12 * (1.0 + xi.abs().powi(3)) * n.l1_norm());
        }

        #[test]
        fn gauge_invariant_nu_is_n_at_one_i_xi(v in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 6),
                                                xi in -5.0f64..5.0) {
            let l: Vec<Complex64> = v.into_iter().map(|(a, b)| c(a, b)).collect();
            let n = CubicNonlinearity::from_lambdas([l[0], l[1], l[2], l[3], l[4], l[5]]);
            prop_assert!(n.is_gauge_invariant());
            let direct = n.evaluate(c(1.0, 0.0), I * xi);
            prop_assert!((n.nu(xi) - direct).norm() <= 1e-13 * direct.norm().max(1.0));
        }

        #[test]
        fn fg_split_round_trips(n in arb_coeffs()) {
            let mut weak = n;
            for m in EXCLUDED_MONOMIALS { weak.set(m, c(0.0, 0.0)); }
            let d = weak.fg_split().unwrap();
            prop_assert_eq!(d.reassemble(), weak);
            prop_assert!(d.f_part().nu(1.7) == c(0.0, 0.0));
            prop_assert!(F_MONOMIALS.iter().all(|m| [3, -3, -1].contains(&m.phase_index())));
        }

        #[test]
        fn im_nu_is_at_most_cubic(n in arb_coeffs(), xi in 1.0f64..1e4) {
            let bound = n.l1_norm();
            prop_assert!(n.nu(xi).im.abs() / xi.powi(3) <= bound * (1.0 + 1e-12));
        }
    }
}
