//! Feedback strategies `(c, u_I)` as functions of time and wealth.

use std::sync::Arc;

use crate::error::Result;
use crate::scalar::Real;

/// A strategy that is affine in wealth at a fixed time:
/// `c = c_slope x + c_intercept`, `u = u_slope x + u_intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSlice<S> {
    pub c_slope: S,
    pub c_intercept: S,
    pub u_slope: Vec<S>,
    pub u_intercept: Vec<S>,
}

impl<S: Real> AffineSlice<S> {
    #[inline]
    pub fn consumption(&self, x: S) -> S {
        self.c_slope * x + self.c_intercept
    }

    #[inline]
    pub fn investment(&self, x: S, out: &mut [S]) {
        for ((o, a), b) in out.iter_mut().zip(&self.u_slope).zip(&self.u_intercept) {
            *o = *a * x + *b;
        }
    }
}

/// Consumption rate and dollar amounts held in each risky asset.
pub trait Policy<S: Real>: Send + Sync {
    /// Number of risky assets.
    fn dim(&self) -> usize;

    fn consumption(&self, t: S, x: S) -> Result<S>;

    fn investment(&self, t: S, x: S, out: &mut [S]) -> Result<()>;

    /// Affine representation at `t`, used by the simulator to skip per-path evaluation.
    fn affine_at(&self, _t: S) -> Option<AffineSlice<S>> {
        None
    }

    /// `(theta, theta_x)` of the underlying equilibrium characterization, when known.
    fn theta(&self, _t: S, _x: S) -> Result<Option<(S, S)>> {
        Ok(None)
    }

    fn label(&self) -> String {
        "policy".to_string()
    }
}

macro_rules! forward_policy {
    ($ty:ty) => {
        fn dim(&self) -> usize {
            (**self).dim()
        }
        fn consumption(&self, t: S, x: S) -> Result<S> {
            (**self).consumption(t, x)
        }
        fn investment(&self, t: S, x: S, out: &mut [S]) -> Result<()> {
            (**self).investment(t, x, out)
        }
        fn affine_at(&self, t: S) -> Option<AffineSlice<S>> {
            (**self).affine_at(t)
        }
        fn theta(&self, t: S, x: S) -> Result<Option<(S, S)>> {
            (**self).theta(t, x)
        }
        fn label(&self) -> String {
            (**self).label()
        }
    };
}

impl<S: Real, P: Policy<S> + ?Sized> Policy<S> for &P {
    forward_policy!(&P);
}

impl<S: Real, P: Policy<S> + ?Sized> Policy<S> for Box<P> {
    forward_policy!(Box<P>);
}

impl<S: Real, P: Policy<S> + ?Sized> Policy<S> for Arc<P> {
    forward_policy!(Arc<P>);
}

/// Wealth-independent strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantPolicy<S> {
    pub consumption: S,
    pub investment: Vec<S>,
}

impl<S: Real> ConstantPolicy<S> {
    /// Consume nothing and hold only the riskless asset.
    pub fn idle(dim: usize) -> Self {
        ConstantPolicy {
            consumption: S::zero(),
            investment: vec![S::zero(); dim],
        }
    }
}

impl<S: Real> Policy<S> for ConstantPolicy<S> {
    fn dim(&self) -> usize {
        self.investment.len()
    }
    fn consumption(&self, _t: S, _x: S) -> Result<S> {
        Ok(self.consumption)
    }
    fn investment(&self, _t: S, _x: S, out: &mut [S]) -> Result<()> {
        out.copy_from_slice(&self.investment);
        Ok(())
    }
    fn affine_at(&self, _t: S) -> Option<AffineSlice<S>> {
        Some(AffineSlice {
            c_slope: S::zero(),
            c_intercept: self.consumption,
            u_slope: vec![S::zero(); self.investment.len()],
            u_intercept: self.investment.clone(),
        })
    }
    fn label(&self) -> String {
        "constant".to_string()
    }
}

/// Base policy with consumption multiplied by a fixed factor.
#[derive(Debug, Clone)]
pub struct ScaledConsumption<P, S> {
    pub base: P,
    pub factor: S,
}

impl<S: Real, P: Policy<S>> Policy<S> for ScaledConsumption<P, S> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn consumption(&self, t: S, x: S) -> Result<S> {
        Ok(self.factor * self.base.consumption(t, x)?)
    }
    fn investment(&self, t: S, x: S, out: &mut [S]) -> Result<()> {
        self.base.investment(t, x, out)
    }
    fn affine_at(&self, t: S) -> Option<AffineSlice<S>> {
        self.base.affine_at(t).map(|mut s| {
            s.c_slope *= self.factor;
            s.c_intercept *= self.factor;
            s
        })
    }
    fn label(&self) -> String {
        format!("{} with consumption x{}", self.base.label(), self.factor)
    }
}

/// Base policy plus a constant offset `(v_c, v_u)` on `[start, end)`.
#[derive(Debug, Clone)]
pub struct Perturbed<P, S> {
    pub base: P,
    pub start: S,
    pub end: S,
    pub v_c: S,
    pub v_u: Vec<S>,
}

impl<P, S: Real> Perturbed<P, S> {
    #[inline]
    fn active(&self, t: S) -> bool {
        t >= self.start && t < self.end
    }
}

impl<S: Real, P: Policy<S>> Policy<S> for Perturbed<P, S> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn consumption(&self, t: S, x: S) -> Result<S> {
        let c = self.base.consumption(t, x)?;
        Ok(if self.active(t) { c + self.v_c } else { c })
    }
    fn investment(&self, t: S, x: S, out: &mut [S]) -> Result<()> {
        self.base.investment(t, x, out)?;
        if self.active(t) {
            for (o, v) in out.iter_mut().zip(&self.v_u) {
                *o += *v;
            }
        }
        Ok(())
    }
    fn affine_at(&self, t: S) -> Option<AffineSlice<S>> {
        self.base.affine_at(t).map(|mut s| {
            if self.active(t) {
                s.c_intercept += self.v_c;
                for (o, v) in s.u_intercept.iter_mut().zip(&self.v_u) {
                    *o += *v;
                }
            }
            s
        })
    }
    fn label(&self) -> String {
        format!("{} (perturbed)", self.base.label())
    }
}

/// Policy defined by a closure returning `(c, u)`.
pub struct FnPolicy<F> {
    dim: usize,
    f: F,
}

impl<F> FnPolicy<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnPolicy { dim, f }
    }
}

impl<S: Real, F> Policy<S> for FnPolicy<F>
where
    F: Fn(S, S, &mut [S]) -> Result<S> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn consumption(&self, t: S, x: S) -> Result<S> {
        let mut u = vec![S::zero(); self.dim];
        (self.f)(t, x, &mut u)
    }
    fn investment(&self, t: S, x: S, out: &mut [S]) -> Result<()> {
        (self.f)(t, x, out).map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrappers_compose() {
        let base = ConstantPolicy {
            consumption: 0.5,
            investment: vec![1.0],
        };
        let doubled = ScaledConsumption { base: base.clone(), factor: 2.0 };
        assert_eq!(doubled.consumption(0.0, 1.0).unwrap(), 1.0);
        let p = Perturbed {
            base,
            start: 0.1,
            end: 0.2,
            v_c: 0.25,
            v_u: vec![-0.5],
        };
        assert_eq!(p.consumption(0.15, 1.0).unwrap(), 0.75);
        assert_eq!(p.consumption(0.2, 1.0).unwrap(), 0.5);
        let mut u = [0.0];
        p.investment(0.1, 1.0, &mut u).unwrap();
        assert_eq!(u[0], 0.5);
        let s = p.affine_at(0.1).unwrap();
        assert_eq!(s.consumption(3.0), 0.75);
    }

    #[test]
    fn closure_policy() {
        let p = FnPolicy::new(1, |_t: f64, x: f64, u: &mut [f64]| {
            u[0] = x;
            Ok(0.1 * x)
        });
        let mut u = [0.0];
        p.investment(0.0, 2.0, &mut u).unwrap();
        assert_eq!(u[0], 2.0);
        assert_eq!(p.consumption(0.0, 2.0).unwrap(), 0.2);
        assert!(p.affine_at(0.0).is_none());
    }
}
