//! Quadrature on uniform samples and Gauss-Legendre rules for smooth integrands.

use crate::scalar::Real;

/// Integral of each interval `[t_i, t_{i+1}]` from uniform samples, fourth order
/// whenever four or more samples are available.
pub fn interval_integrals<S: Real>(f: &[S], h: S) -> Vec<S> {
    let n = f.len().saturating_sub(1);
    match n {
        0 => Vec::new(),
        1 => vec![S::lit(0.5) * h * (f[0] + f[1])],
        2 => {
            let c = h / S::lit(12.0);
            vec![
                c * (S::lit(5.0) * f[0] + S::lit(8.0) * f[1] - f[2]),
                c * (S::lit(5.0) * f[2] + S::lit(8.0) * f[1] - f[0]),
            ]
        }
        _ => {
            // Integrate the cubic through four neighbouring samples.
            let c = h / S::lit(24.0);
            let (nine, nineteen, five, thirteen) =
                (S::lit(9.0), S::lit(19.0), S::lit(5.0), S::lit(13.0));
            let mut out = Vec::with_capacity(n);
            out.push(c * (nine * f[0] + nineteen * f[1] - five * f[2] + f[3]));
            for i in 1..n - 1 {
                out.push(c * (thirteen * (f[i] + f[i + 1]) - f[i - 1] - f[i + 2]));
            }
            out.push(c * (nine * f[n] + nineteen * f[n - 1] - five * f[n - 2] + f[n - 3]));
            out
        }
    }
}

/// `out[j]` is the integral from sample `j` to the last sample.
pub fn cumulative_tail<S: Real>(f: &[S], h: S) -> Vec<S> {
    let pieces = interval_integrals(f, h);
    let mut out = vec![S::zero(); f.len()];
    for j in (0..pieces.len()).rev() {
        out[j] = out[j + 1] + pieces[j];
    }
    out
}

/// `out[j]` is the integral from the first sample to sample `j`.
pub fn cumulative_head<S: Real>(f: &[S], h: S) -> Vec<S> {
    let pieces = interval_integrals(f, h);
    let mut out = vec![S::zero(); f.len()];
    for j in 0..pieces.len() {
        out[j + 1] = out[j] + pieces[j];
    }
    out
}

/// Composite Simpson rule, closing with the 3/8 rule when the interval count is odd.
pub fn simpson<S: Real>(f: &[S], h: S) -> S {
    let n = f.len().saturating_sub(1);
    match n {
        0 => S::zero(),
        1 => S::lit(0.5) * h * (f[0] + f[1]),
        _ => {
            let even = if n.is_multiple_of(2) { n } else { n - 3 };
            let mut acc = S::zero();
            let mut i = 0;
            while i < even {
                acc += f[i] + S::lit(4.0) * f[i + 1] + f[i + 2];
                i += 2;
            }
            let mut total = acc * h / S::lit(3.0);
            if even < n {
                let k = even;
                total += S::lit(3.0) * h / S::lit(8.0)
                    * (f[k] + S::lit(3.0) * (f[k + 1] + f[k + 2]) + f[k + 3]);
            }
            total
        }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre<S> {
    nodes: Vec<S>,
    weights: Vec<S>,
}

impl<S: Real> GaussLegendre<S> {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let n = order;
        let mut nodes = vec![0.0f64; n];
        let mut weights = vec![0.0f64; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre {
            nodes: nodes.into_iter().map(S::lit).collect(),
            weights: weights.into_iter().map(S::lit).collect(),
        }
    }

    /// Integral of `f` over `[a, b]` split into `panels` equal pieces.
    pub fn integrate<F: FnMut(S) -> S>(&self, mut f: F, a: S, b: S, panels: usize) -> S {
        if a == b {
            return S::zero();
        }
        let width = (b - a) / S::from_count(panels);
        let half = S::lit(0.5) * width;
        let mut total = S::zero();
        for p in 0..panels {
            let mid = a + width * (S::from_count(p) + S::lit(0.5));
            let mut acc = S::zero();
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                acc += *w * f(mid + half * *x);
            }
            total += acc * half;
        }
        total
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(n: usize, a: f64, b: f64, f: impl Fn(f64) -> f64) -> (Vec<f64>, f64) {
        let h = (b - a) / n as f64;
        ((0..=n).map(|i| f(a + h * i as f64)).collect(), h)
    }

    #[test]
    fn cubic_rule_is_exact_for_cubics() {
        let f = |t: f64| 1.0 - 2.0 * t + 3.0 * t * t - 0.5 * t * t * t;
        let anti = |t: f64| t - t * t + t * t * t - 0.125 * t.powi(4);
        for n in [3usize, 4, 7, 10] {
            let (v, h) = samples(n, 0.0, 2.0, f);
            let tail = cumulative_tail(&v, h);
            for (j, tj) in (0..=n).map(|j| (j, h * j as f64)) {
                assert!((tail[j] - (anti(2.0) - anti(tj))).abs() < 1e-12, "n={n} j={j}");
            }
            let head = cumulative_head(&v, h);
            assert!((head[n] - anti(2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn small_sample_counts() {
        let (v, h) = samples(2, 0.0, 1.0, |t| t * t);
        assert!((cumulative_head(&v, h)[2] - 1.0 / 3.0).abs() < 1e-15);
        let (v, h) = samples(1, 0.0, 1.0, |t| t);
        assert!((cumulative_head(&v, h)[1] - 0.5).abs() < 1e-15);
        assert!(cumulative_tail::<f64>(&[1.0], 0.1) == vec![0.0]);
    }

    #[test]
    fn simpson_even_and_odd() {
        for n in [2usize, 3, 5, 8, 101] {
            let (v, h) = samples(n, 0.0, 1.0, |t| t * t * t);
            assert!((simpson(&v, h) - 0.25).abs() < 1e-14, "n={n}");
        }
        let (v, h) = samples(200, 0.0, 1.0, f64::exp);
        assert!((simpson(&v, h) - (1f64.exp() - 1.0)).abs() < 1e-11);
    }

    #[test]
    fn gauss_legendre_accuracy() {
        let gl = GaussLegendre::<f64>::new(16);
        let v = gl.integrate(|t| t.exp(), 0.0, 1.0, 1);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-15);
        let v = gl.integrate(|t| 1.0 / (1.0 + t), 0.0, 3.0, 4);
        assert!((v - 4f64.ln()).abs() < 1e-14);
        let odd = GaussLegendre::<f64>::new(5);
        assert!((odd.integrate(|t| t.powi(9), -1.0, 2.0, 1) - (1024.0 - 1.0) / 10.0).abs() < 1e-11);
    }
}
