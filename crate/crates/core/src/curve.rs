//! Deterministic coefficient curves.

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::scalar::Real;

/// A function of time given by a constant or by linear interpolation between knots.
///
/// Outside the knot range the end values are held flat.
#[derive(Debug, Clone, PartialEq)]
pub enum Curve<S> {
    Constant(S),
    Linear {
        knots: Vec<S>,
        values: Vec<S>,
        /// Running integral from the first knot.
        cumulative: Vec<S>,
    },
}

impl<S: Real> Curve<S> {
    pub fn constant(v: S) -> Self {
        Curve::Constant(v)
    }

    pub fn linear(knots: Vec<S>, values: Vec<S>) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::validation(
                "curve",
                format!("{} knots but {} values", knots.len(), values.len()),
            ));
        }
        if knots.len() < 2 {
            return Err(Error::validation("curve", "need at least two knots"));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::validation("curve", "knots must be strictly increasing"));
        }
        if knots.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::validation("curve", "knots and values must be finite"));
        }
        let mut cumulative = Vec::with_capacity(knots.len());
        cumulative.push(S::zero());
        for i in 1..knots.len() {
            let h = knots[i] - knots[i - 1];
            let prev = cumulative[i - 1];
            cumulative.push(prev + S::lit(0.5) * h * (values[i] + values[i - 1]));
        }
        Ok(Curve::Linear {
            knots,
            values,
            cumulative,
        })
    }

    /// Samples at every node of `grid`.
    pub fn on_grid(grid: &TimeGrid<S>, values: Vec<S>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::validation(
                "curve",
                format!("expected {} node values, got {}", grid.len(), values.len()),
            ));
        }
        Self::linear(grid.nodes(), values)
    }

    /// `intercept + slope * t` on `[start, end]`.
    pub fn affine(intercept: S, slope: S, start: S, end: S) -> Result<Self> {
        Self::linear(
            vec![start, end],
            vec![intercept + slope * start, intercept + slope * end],
        )
    }

    #[inline]
    fn segment(knots: &[S], t: S) -> usize {
        let i = knots.partition_point(|k| *k <= t);
        i.clamp(1, knots.len() - 1) - 1
    }

    #[inline]
    pub fn eval(&self, t: S) -> S {
        match self {
            Curve::Constant(v) => *v,
            Curve::Linear { knots, values, .. } => {
                let n = knots.len();
                if t <= knots[0] {
                    return values[0];
                }
                if t >= knots[n - 1] {
                    return values[n - 1];
                }
                let i = Self::segment(knots, t);
                let w = (t - knots[i]) / (knots[i + 1] - knots[i]);
                values[i] + w * (values[i + 1] - values[i])
            }
        }
    }

    /// Antiderivative anchored at the first knot (or zero for constants).
    fn antiderivative(&self, t: S) -> S {
        match self {
            Curve::Constant(v) => *v * t,
            Curve::Linear {
                knots,
                values,
                cumulative,
            } => {
                let n = knots.len();
                if t <= knots[0] {
                    return (t - knots[0]) * values[0];
                }
                if t >= knots[n - 1] {
                    return cumulative[n - 1] + (t - knots[n - 1]) * values[n - 1];
                }
                let i = Self::segment(knots, t);
                let dt = t - knots[i];
                let slope = (values[i + 1] - values[i]) / (knots[i + 1] - knots[i]);
                cumulative[i] + dt * (values[i] + S::lit(0.5) * slope * dt)
            }
        }
    }

    /// Exact integral of the interpolant over `[a, b]`.
    pub fn integral(&self, a: S, b: S) -> S {
        match self {
            Curve::Constant(v) => *v * (b - a),
            _ => self.antiderivative(b) - self.antiderivative(a),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Curve::Constant(_))
    }

    /// Smallest value attained (at a knot, since the interpolant is piecewise linear).
    pub fn min_value(&self) -> S {
        match self {
            Curve::Constant(v) => *v,
            Curve::Linear { values, .. } => values.iter().copied().fold(S::infinity(), S::min),
        }
    }

    pub fn max_value(&self) -> S {
        match self {
            Curve::Constant(v) => *v,
            Curve::Linear { values, .. } => {
                values.iter().copied().fold(S::neg_infinity(), S::max)
            }
        }
    }

    pub fn knots(&self) -> &[S] {
        match self {
            Curve::Constant(_) => &[],
            Curve::Linear { knots, .. } => knots,
        }
    }

    /// Converts to another scalar type.
    pub fn cast<T: Real>(&self) -> Curve<T> {
        let c = |v: &S| T::lit(v.as_f64());
        match self {
            Curve::Constant(v) => Curve::Constant(c(v)),
            Curve::Linear { knots, values, .. } => {
                Curve::linear(knots.iter().map(c).collect(), values.iter().map(c).collect())
                    .expect("cast preserves knot ordering")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_eval_and_integral() {
        let c = Curve::<f64>::linear(vec![0.0, 1.0, 3.0], vec![1.0, 3.0, 2.0]).unwrap();
        assert_eq!(c.eval(0.5), 2.0);
        assert_eq!(c.eval(2.0), 2.5);
        assert_eq!(c.eval(-1.0), 1.0);
        assert_eq!(c.eval(5.0), 2.0);
        // trapezoids: 2 + 5
        assert!((c.integral(0.0, 3.0) - 7.0).abs() < 1e-14);
        assert!((c.integral(0.5, 2.0) - (1.25 + 2.75)).abs() < 1e-14);
        assert!((c.integral(2.0, 0.5) + 4.0).abs() < 1e-14);
    }

    #[test]
    fn affine_integral_is_exact() {
        let c = Curve::<f64>::affine(0.1, 0.1, 0.0, 1.0).unwrap();
        let exact = 0.1 * 0.5 + 0.05 * (0.7 * 0.7 - 0.04);
        assert!((c.integral(0.2, 0.7) - exact).abs() < 1e-15);
    }

    #[test]
    fn rejects_unsorted_knots() {
        assert!(Curve::linear(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(Curve::linear(vec![0.0], vec![1.0]).is_err());
    }
}
