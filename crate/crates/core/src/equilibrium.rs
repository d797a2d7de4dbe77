//! The equilibrium strategy, backed by closed-form coefficients or a PDE solution.

use crate::closedform::{self, Coefficients};
use crate::error::{Error, Result};
use crate::model::{DiscountFunction, MarketModel, Utility};
use crate::pde::ThetaSurface;
use crate::policy::{AffineSlice, Policy};
use crate::scalar::Real;

/// Threshold below which `|theta_x|` is treated as zero.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone)]
pub enum Backing<S> {
    ClosedForm(Coefficients<S>),
    Theta(ThetaSurface<S>),
}

/// `c = I(lambda(T - t) theta)`, `u = -(sigma sigma^T)^{-1} r theta / theta_x`.
#[derive(Debug, Clone)]
pub struct EquilibriumPolicy<S> {
    market: MarketModel<S>,
    discount: DiscountFunction<S>,
    utility: Utility<S>,
    backing: Backing<S>,
}

impl<S: Real> EquilibriumPolicy<S> {
    /// Solves the explicit coefficient equations for the utility family.
    pub fn closed_form(m: &MarketModel<S>, d: &DiscountFunction<S>, u: &Utility<S>) -> Result<Self> {
        let coefficients = closedform::solve(m, d, u)?;
        Ok(EquilibriumPolicy {
            market: m.clone(),
            discount: d.clone(),
            utility: *u,
            backing: Backing::ClosedForm(coefficients),
        })
    }

    /// Wraps a numerical solution of the theta equation.
    pub fn from_theta(
        surface: ThetaSurface<S>,
        m: &MarketModel<S>,
        d: &DiscountFunction<S>,
        u: &Utility<S>,
    ) -> Result<Self> {
        closedform::check_horizons(m, d)?;
        Ok(EquilibriumPolicy {
            market: m.clone(),
            discount: d.clone(),
            utility: *u,
            backing: Backing::Theta(surface),
        })
    }

    pub fn market(&self) -> &MarketModel<S> {
        &self.market
    }

    pub fn discount(&self) -> &DiscountFunction<S> {
        &self.discount
    }

    pub fn utility(&self) -> &Utility<S> {
        &self.utility
    }

    pub fn backing(&self) -> &Backing<S> {
        &self.backing
    }

    fn check(&self, t: S, x: S) -> Result<()> {
        if !t.is_finite() || !self.market.grid().contains(t) {
            return Err(Error::domain(
                "equilibrium policy",
                format!("t = {t} outside [0, {}]", self.market.horizon()),
            ));
        }
        if !x.is_finite() || (self.utility.wealth_floor().is_some() && x <= S::zero()) {
            return Err(Error::domain(
                "equilibrium policy",
                format!("wealth {x} outside the domain of {} utility", self.utility.family().name()),
            ));
        }
        Ok(())
    }

    fn slice(&self, t: S) -> Option<AffineSlice<S>> {
        let Backing::ClosedForm(c) = &self.backing else {
            return None;
        };
        let snap = self.market.snapshot(t);
        let lambda = self.discount.value(self.market.horizon() - t);
        let dim = self.market.dim();
        let zeros = vec![S::zero(); dim];
        Some(match c {
            Coefficients::Power(p) => {
                let inv = (p.gamma - S::one()).recip();
                AffineSlice {
                    c_slope: (p.a * lambda * p.pi.eval(t)).powf(inv),
                    c_intercept: S::zero(),
                    u_slope: snap.direction.iter().map(|v| *v / (S::one() - p.gamma)).collect(),
                    u_intercept: zeros,
                }
            }
            Coefficients::Log(l) => AffineSlice {
                c_slope: (l.a * lambda * l.varphi.eval(t)).recip(),
                c_intercept: S::zero(),
                u_slope: snap.direction,
                u_intercept: zeros,
            },
            Coefficients::Exponential(e) => {
                let phi = e.phi.eval(t);
                AffineSlice {
                    c_slope: phi,
                    c_intercept: -(e.a * lambda).ln() / e.gamma + e.psi.eval(t),
                    u_slope: zeros,
                    u_intercept: snap.direction.iter().map(|v| *v / (e.gamma * phi)).collect(),
                }
            }
        })
    }

    fn theta_pair(&self, t: S, x: S) -> Result<(S, S)> {
        match &self.backing {
            Backing::Theta(s) => s.theta_at(t, x),
            Backing::ClosedForm(Coefficients::Power(p)) => {
                let th = p.a * p.pi.eval(t) * x.powf(p.gamma - S::one());
                Ok((th, (p.gamma - S::one()) * th / x))
            }
            Backing::ClosedForm(Coefficients::Log(l)) => {
                let th = l.a * l.varphi.eval(t) / x;
                Ok((th, -th / x))
            }
            Backing::ClosedForm(Coefficients::Exponential(e)) => {
                let phi = e.phi.eval(t);
                let th = e.a * (-e.gamma * (phi * x + e.psi.eval(t))).exp();
                Ok((th, -e.gamma * phi * th))
            }
        }
    }

    /// `(c, u)` at `(t, x)`.
    pub fn evaluate(&self, t: S, x: S) -> Result<(S, Vec<S>)> {
        let mut u = vec![S::zero(); self.market.dim()];
        let c = self.consumption(t, x)?;
        self.investment(t, x, &mut u)?;
        Ok((c, u))
    }
}

impl<S: Real> Policy<S> for EquilibriumPolicy<S> {
    fn dim(&self) -> usize {
        self.market.dim()
    }

    fn consumption(&self, t: S, x: S) -> Result<S> {
        self.check(t, x)?;
        if let Some(s) = self.slice(t) {
            return Ok(s.consumption(x));
        }
        let (th, _) = self.theta_pair(t, x)?;
        let lambda = self.discount.value(self.market.horizon() - t);
        self.utility.inverse_marginal(lambda * th)
    }

    fn investment(&self, t: S, x: S, out: &mut [S]) -> Result<()> {
        self.check(t, x)?;
        if let Some(s) = self.slice(t) {
            s.investment(x, out);
            return Ok(());
        }
        let (th, th_x) = self.theta_pair(t, x)?;
        if th_x.abs() < S::lit(DEGENERACY_THRESHOLD) {
            return Err(Error::Degeneracy {
                t: t.as_f64(),
                x: x.as_f64(),
            });
        }
        let dir = self.market.snapshot(t).direction;
        for (o, v) in out.iter_mut().zip(dir) {
            *o = -v * th / th_x;
        }
        Ok(())
    }

    fn affine_at(&self, t: S) -> Option<AffineSlice<S>> {
        self.slice(t)
    }

    fn theta(&self, t: S, x: S) -> Result<Option<(S, S)>> {
        self.check(t, x)?;
        self.theta_pair(t, x).map(Some)
    }

    fn label(&self) -> String {
        let src = match self.backing {
            Backing::ClosedForm(_) => "closed form",
            Backing::Theta(_) => "pde",
        };
        format!("equilibrium ({}, {src})", self.utility.family().name())
    }
}
