//! One-dimensional maximization: grid scan followed by local refinement.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Location and value of a maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
    /// Index of the best grid node before refinement.
    pub node: usize,
}

/// Golden-section search for a maximum of `f` on `[a, b]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, xtol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= xtol {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Vertex of the parabola through three equally spaced samples, as an offset in units of `h`.
pub fn parabolic_offset(fm: f64, f0: f64, fp: f64) -> Option<f64> {
    let denom = fm - 2.0 * f0 + fp;
    if denom < 0.0 {
        Some(0.5 * (fm - fp) / denom)
    } else {
        None
    }
}

/// Scans `f` on the sorted nodes `xs`, then refines around the best node by
/// golden-section search, keeping the parabolic vertex if it does better.
pub fn refine_max(f: impl Fn(f64) -> f64, xs: &[f64]) -> Maximum {
    let values: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    refine_max_from(f, xs, &values)
}

/// [`refine_max`] with the node values already computed.
pub fn refine_max_from(f: impl Fn(f64) -> f64, xs: &[f64], values: &[f64]) -> Maximum {
    let node = values
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > values[best] { i } else { best });
    let mut best = Maximum { x: xs[node], value: values[node], node };
    if node == 0 || node + 1 >= xs.len() {
        return best;
    }
    let (a, b) = (xs[node - 1], xs[node + 1]);
    let (xg, fg) = golden_section(&f, a, b, 1e-13 * (1.0 + xs[node].abs()));
    if fg > best.value {
        best.x = xg;
        best.value = fg;
    }
    let h = xs[node + 1] - xs[node];
    if let Some(off) = parabolic_offset(values[node - 1], values[node], values[node + 1]) {
        let xp = xs[node] + off * h;
        let fp = f(xp);
        if fp > best.value {
            best.x = xp;
            best.value = fp;
        }
    }
    best
}
