use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::linalg;
use crate::scalar::Real;

/// Tolerances applied when validating a market.
#[derive(Debug, Clone, Copy)]
pub struct MarketOptions<S> {
    /// Lower bound on the smallest eigenvalue of `sigma sigma^T`.
    pub ellipticity: S,
    /// Accept `mu_i = r0` (a riskless benchmark). By default every premium must be positive.
    pub allow_zero_premium: bool,
}

impl<S: Real> Default for MarketOptions<S> {
    fn default() -> Self {
        MarketOptions {
            ellipticity: S::lit(1e-10),
            allow_zero_premium: false,
        }
    }
}

/// Black-Scholes market with deterministic time-varying coefficients.
#[derive(Debug, Clone)]
pub struct MarketModel<S> {
    grid: TimeGrid<S>,
    r0: Curve<S>,
    mu: Vec<Curve<S>>,
    /// Row-major `d x d`.
    sigma: Vec<Curve<S>>,
    dim: usize,
}

/// Market coefficients evaluated at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSnapshot<S> {
    pub t: S,
    pub r0: S,
    /// `mu - r0 * 1`.
    pub excess: Vec<S>,
    /// Row-major volatility matrix.
    pub sigma: Vec<S>,
    /// `(sigma sigma^T)^{-1} (mu - r0 1)`.
    pub direction: Vec<S>,
    /// `r^T (sigma sigma^T)^{-1} r`.
    pub premium: S,
}

impl<S: Real> MarketModel<S> {
    pub fn new(grid: TimeGrid<S>, r0: Curve<S>, mu: Vec<Curve<S>>, sigma: Vec<Curve<S>>) -> Result<Self> {
        Self::with_options(grid, r0, mu, sigma, MarketOptions::default())
    }

    pub fn with_options(
        grid: TimeGrid<S>,
        r0: Curve<S>,
        mu: Vec<Curve<S>>,
        sigma: Vec<Curve<S>>,
        options: MarketOptions<S>,
    ) -> Result<Self> {
        let dim = mu.len();
        if dim == 0 {
            return Err(Error::validation("market.mu", "need at least one risky asset"));
        }
        if sigma.len() != dim * dim {
            return Err(Error::validation(
                "market.sigma",
                format!("expected a {dim}x{dim} matrix, got {} entries", sigma.len()),
            ));
        }
        if grid.start() != S::zero() {
            return Err(Error::validation("grid", "model grid must start at 0"));
        }
        let model = MarketModel {
            grid,
            r0,
            mu,
            sigma,
            dim,
        };
        model.validate(options)?;
        Ok(model)
    }

    /// Constant coefficients.
    pub fn constant(grid: TimeGrid<S>, r0: S, mu: &[S], sigma: &[S]) -> Result<Self> {
        Self::new(
            grid,
            Curve::constant(r0),
            mu.iter().map(|m| Curve::constant(*m)).collect(),
            sigma.iter().map(|s| Curve::constant(*s)).collect(),
        )
    }

    fn check_times(&self) -> Vec<S> {
        let mut ts = self.grid.nodes();
        let (lo, hi) = (self.grid.start(), self.grid.end());
        for c in std::iter::once(&self.r0).chain(&self.mu).chain(&self.sigma) {
            ts.extend(c.knots().iter().copied().filter(|k| *k >= lo && *k <= hi));
        }
        ts
    }

    fn validate(&self, options: MarketOptions<S>) -> Result<()> {
        let d = self.dim;
        for t in self.check_times() {
            let r0 = self.r0.eval(t);
            if !r0.is_finite() || r0 < S::zero() {
                return Err(Error::validation(
                    "market.r0",
                    format!("riskless rate must be finite and nonnegative, got {r0} at t = {t}"),
                ));
            }
            for (i, m) in self.mu.iter().enumerate() {
                let mu = m.eval(t);
                let ok = if options.allow_zero_premium { mu >= r0 } else { mu > r0 };
                if !mu.is_finite() || !ok {
                    return Err(Error::validation(
                        format!("market.mu[{i}]"),
                        format!("mean return {mu} must exceed the riskless rate {r0} at t = {t}"),
                    ));
                }
            }
            let s = self.sigma_at(t);
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation("market.sigma", format!("non-finite entry at t = {t}")));
            }
            let mut shifted = linalg::gram(&s, d);
            for i in 0..d {
                shifted[i * d + i] -= options.ellipticity;
            }
            if linalg::cholesky(&shifted, d).is_none() {
                let ev = linalg::symmetric_eigenvalues(&linalg::gram(&s, d), d);
                return Err(Error::Ellipticity {
                    t: t.as_f64(),
                    min_eigenvalue: ev[0].as_f64(),
                    bound: options.ellipticity.as_f64(),
                });
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &TimeGrid<S> {
        &self.grid
    }

    pub fn horizon(&self) -> S {
        self.grid.end()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r0_curve(&self) -> &Curve<S> {
        &self.r0
    }

    #[inline]
    pub fn r0(&self, t: S) -> S {
        self.r0.eval(t)
    }

    pub fn sigma_at(&self, t: S) -> Vec<S> {
        self.sigma.iter().map(|c| c.eval(t)).collect()
    }

    fn check_time(&self, what: &'static str, t: S) -> Result<()> {
        if !t.is_finite() || !self.grid.contains(t) {
            return Err(Error::domain(
                what,
                format!("t = {t} outside [0, {}]", self.horizon()),
            ));
        }
        Ok(())
    }

    /// `mu(t) - r0(t) 1`.
    pub fn excess_return(&self, t: S) -> Result<Vec<S>> {
        self.check_time("excess_return", t)?;
        let r0 = self.r0(t);
        Ok(self.mu.iter().map(|m| m.eval(t) - r0).collect())
    }

    /// `r^T (sigma sigma^T)^{-1} r`.
    pub fn risk_premium_quadratic(&self, t: S) -> Result<S> {
        self.check_time("risk_premium_quadratic", t)?;
        Ok(self.snapshot(t).premium)
    }

    /// `(sigma sigma^T)^{-1} r`, the direction of every equilibrium portfolio.
    pub fn merton_direction(&self, t: S) -> Result<Vec<S>> {
        self.check_time("merton_direction", t)?;
        Ok(self.snapshot(t).direction)
    }

    /// `exp(int_s^tau r0)`, for `0 <= s <= tau <= T`.
    pub fn growth_factor(&self, s: S, tau: S) -> Result<S> {
        self.check_time("growth_factor", s)?;
        self.check_time("growth_factor", tau)?;
        if tau < s {
            return Err(Error::domain(
                "growth_factor",
                format!("need s <= tau, got s = {s}, tau = {tau}"),
            ));
        }
        Ok(self.r0.integral(s, tau).exp())
    }

    /// `int_a^b r0`, exact for the interpolated curve.
    pub fn integrate_r0(&self, a: S, b: S) -> S {
        self.r0.integral(a, b)
    }

    /// All coefficients at `t`, without a domain check.
    pub fn snapshot(&self, t: S) -> MarketSnapshot<S> {
        let d = self.dim;
        let r0 = self.r0(t);
        let excess: Vec<S> = self.mu.iter().map(|m| m.eval(t) - r0).collect();
        let sigma = self.sigma_at(t);
        let l = linalg::cholesky(&linalg::gram(&sigma, d), d)
            .expect("ellipticity was checked at construction");
        let direction = linalg::cholesky_solve(&l, d, &excess);
        let premium = linalg::dot(&excess, &direction);
        MarketSnapshot {
            t,
            r0,
            excess,
            sigma,
            direction,
            premium,
        }
    }

    /// Same market in another scalar type.
    pub fn cast<T: Real>(&self) -> MarketModel<T> {
        MarketModel {
            grid: TimeGrid::new(T::lit(self.horizon().as_f64()), self.grid.steps())
                .expect("grid already validated"),
            r0: self.r0.cast(),
            mu: self.mu.iter().map(Curve::cast).collect(),
            sigma: self.sigma.iter().map(Curve::cast).collect(),
            dim: self.dim,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_asset() -> MarketModel<f64> {
        MarketModel::constant(TimeGrid::new(1.0, 200).unwrap(), 0.03, &[0.08], &[0.2]).unwrap()
    }

    #[test]
    fn premium_of_single_asset() {
        let m = one_asset();
        assert!((m.risk_premium_quadratic(0.3).unwrap() - 0.0625).abs() < 1e-15);
        assert!((m.merton_direction(0.0).unwrap()[0] - 1.25).abs() < 1e-14);
        assert!((m.excess_return(1.0).unwrap()[0] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn growth_factor_constant_rate() {
        let m = one_asset();
        assert!((m.growth_factor(0.0, 1.0).unwrap() - 0.03f64.exp()).abs() < 1e-15);
        assert!(m.growth_factor(0.5, 0.2).is_err());
        assert!(m.growth_factor(0.0, 1.5).is_err());
    }

    #[test]
    fn two_asset_premium() {
        let m = MarketModel::<f64>::constant(
            TimeGrid::new(1.0, 10).unwrap(),
            0.02,
            &[0.06, 0.1],
            &[0.2, 0.0, 0.1, 0.3],
        )
        .unwrap();
        // r = (0.04, 0.08); sigma sigma^T = [[0.04, 0.02], [0.02, 0.1]]
        let dir = m.merton_direction(0.5).unwrap();
        let det = 0.04 * 0.1 - 0.02 * 0.02;
        let want = [(0.1 * 0.04 - 0.02 * 0.08) / det, (-0.02 * 0.04 + 0.04 * 0.08) / det];
        assert!((dir[0] - want[0]).abs() < 1e-12 && (dir[1] - want[1]).abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid_markets() {
        let g = TimeGrid::new(1.0, 10).unwrap();
        assert!(matches!(
            MarketModel::constant(g, 0.03, &[0.02], &[0.2]),
            Err(Error::Validation { .. })
        ));
        assert!(matches!(
            MarketModel::constant(g, 0.03, &[0.08], &[0.0]),
            Err(Error::Ellipticity { .. })
        ));
        assert!(MarketModel::constant(g, -0.01, &[0.08], &[0.2]).is_err());
        assert!(MarketModel::constant(g, 0.03, &[0.08], &[0.2, 0.1]).is_err());
        let relaxed = MarketModel::with_options(
            g,
            Curve::constant(0.05),
            vec![Curve::constant(0.05)],
            vec![Curve::constant(0.2)],
            MarketOptions {
                allow_zero_premium: true,
                ..Default::default()
            },
        );
        assert!(relaxed.is_ok());
    }

    #[test]
    fn time_varying_rate_is_integrated_exactly() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let r0 = Curve::affine(0.02, 0.04, 0.0, 1.0).unwrap();
        let m = MarketModel::new(g, r0, vec![Curve::constant(0.1)], vec![Curve::constant(0.2)]).unwrap();
        assert!((m.growth_factor(0.0, 1.0).unwrap() - 0.04f64.exp()).abs() < 1e-15);
    }
}
