//! Explicit equilibrium coefficients for power, logarithmic and exponential utility.

use crate::error::{Error, Result};
use crate::grid::GridSeries;
use crate::model::{DiscountFunction, MarketModel, Utility};
use crate::quadrature::cumulative_tail;
use crate::scalar::Real;

/// Power utility: `theta = a Pi(t) x^(gamma - 1)`.
#[derive(Debug, Clone)]
pub struct PowerCoefficients<S> {
    pub a: S,
    pub gamma: S,
    /// `gamma r0 + gamma k / (2 (1 - gamma))`.
    pub k: GridSeries<S>,
    /// `(1 - gamma) (a lambda(T - t))^(1 / (gamma - 1))`.
    pub q: GridSeries<S>,
    /// `Pi^(1 / (1 - gamma))`, solution of the linearized equation.
    pub y: GridSeries<S>,
    pub pi: GridSeries<S>,
}

/// Log utility: `theta = a varphi(t) / x`.
#[derive(Debug, Clone)]
pub struct LogCoefficients<S> {
    pub a: S,
    pub varphi: GridSeries<S>,
}

/// Exponential utility: `theta = a exp(-gamma (phi(t) x + psi(t)))`.
#[derive(Debug, Clone)]
pub struct ExponentialCoefficients<S> {
    pub a: S,
    pub gamma: S,
    pub phi: GridSeries<S>,
    pub psi: GridSeries<S>,
}

#[derive(Debug, Clone)]
pub enum Coefficients<S> {
    Power(PowerCoefficients<S>),
    Log(LogCoefficients<S>),
    Exponential(ExponentialCoefficients<S>),
}

pub(crate) fn check_horizons<S: Real>(m: &MarketModel<S>, d: &DiscountFunction<S>) -> Result<()> {
    let (tm, td) = (m.horizon(), d.horizon());
    if (tm - td).abs() > S::lit(1e-9) * tm {
        return Err(Error::validation(
            "discount.horizon",
            format!("discount horizon {td} differs from market horizon {tm}"),
        ));
    }
    Ok(())
}

fn series<S: Real>(m: &MarketModel<S>, values: Vec<S>) -> GridSeries<S> {
    GridSeries::new(*m.grid(), values).expect("one value per node")
}

fn ensure_finite<S: Real>(m: &MarketModel<S>, what: &str, v: &[S]) -> Result<()> {
    if let Some(j) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::Solvability {
            t: m.grid().node(j).as_f64(),
            reason: format!("{what} is not finite"),
        });
    }
    Ok(())
}

/// Coefficients of the equilibrium under power utility.
pub fn solve_power<S: Real>(
    m: &MarketModel<S>,
    d: &DiscountFunction<S>,
    a: S,
    gamma: S,
) -> Result<PowerCoefficients<S>> {
    Utility::power(a, gamma)?;
    check_horizons(m, d)?;
    let g = m.grid();
    let (n, h, horizon) = (g.steps(), g.dt(), m.horizon());
    let one = S::one();
    let half = S::lit(0.5);
    let inv = (gamma - one).recip();

    let mut k = Vec::with_capacity(n + 1);
    let mut q = Vec::with_capacity(n + 1);
    let mut premium_part = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let t = g.node(j);
        let snap = m.snapshot(t);
        k.push(gamma * snap.r0 + half * gamma / (one - gamma) * snap.premium);
        premium_part.push(half * gamma / (one - gamma) * snap.premium * inv);
        q.push((one - gamma) * (a * d.value(horizon - t)).powf(inv));
    }
    // G_j = int_{t_j}^T K / (gamma - 1); the r0 part is integrated exactly.
    let premium_tail = cumulative_tail(&premium_part, h);
    let big_g: Vec<S> = (0..=n)
        .map(|j| gamma * inv * m.integrate_r0(g.node(j), horizon) + premium_tail[j])
        .collect();
    let f: Vec<S> = (0..=n)
        .map(|j| -q[j] * inv * big_g[j].exp())
        .collect();
    let big_h = cumulative_tail(&f, h);
    let y: Vec<S> = (0..=n).map(|j| (one + big_h[j]) * (-big_g[j]).exp()).collect();
    ensure_finite(m, "Pi", &y)?;
    if let Some(j) = y.iter().position(|v| !(*v > S::zero())) {
        return Err(Error::Solvability {
            t: g.node(j).as_f64(),
            reason: format!("Pi^(1/(1-gamma)) = {} is not positive", y[j]),
        });
    }
    let pi = y.iter().map(|v| v.powf(one - gamma)).collect();
    Ok(PowerCoefficients {
        a,
        gamma,
        k: series(m, k),
        q: series(m, q),
        y: series(m, y),
        pi: series(m, pi),
    })
}

impl<S: Real> PowerCoefficients<S> {
    /// Sup-norm residual of `Pi' + (K + Q Pi^(1/(gamma-1))) Pi = 0` on the grid.
    pub fn ode_residual(&self) -> S {
        let inv = (self.gamma - S::one()).recip();
        let (k, q) = (self.k.values(), self.q.values());
        self.pi
            .derivative_residual(|j, p| -(k[j] + q[j] * p.powf(inv)) * p)
    }
}

/// Coefficients of the equilibrium under logarithmic utility.
pub fn solve_log<S: Real>(m: &MarketModel<S>, d: &DiscountFunction<S>, a: S) -> Result<LogCoefficients<S>> {
    Utility::log(a)?;
    check_horizons(m, d)?;
    let g = m.grid();
    let horizon = m.horizon();
    let inv_lambda: Vec<S> = g.nodes().into_iter().map(|t| d.value(horizon - t).recip()).collect();
    let tail = cumulative_tail(&inv_lambda, g.dt());
    let varphi: Vec<S> = tail.iter().map(|v| S::one() + *v / a).collect();
    ensure_finite(m, "varphi", &varphi)?;
    Ok(LogCoefficients {
        a,
        varphi: series(m, varphi),
    })
}

impl<S: Real> LogCoefficients<S> {
    /// Sup-norm residual of `varphi' = -1 / (a lambda(T - t))`.
    pub fn ode_residual(&self, d: &DiscountFunction<S>) -> S {
        let g = *self.varphi.grid();
        let a = self.a;
        self.varphi
            .derivative_residual(|j, _| -(a * d.value(g.end() - g.node(j))).recip())
    }
}

/// Coefficients of the equilibrium under exponential utility.
pub fn solve_exponential<S: Real>(
    m: &MarketModel<S>,
    d: &DiscountFunction<S>,
    a: S,
    gamma: S,
) -> Result<ExponentialCoefficients<S>> {
    Utility::exponential(a, gamma)?;
    check_horizons(m, d)?;
    let g = m.grid();
    let (n, h, horizon) = (g.steps(), g.dt(), m.horizon());
    let one = S::one();

    let growth: Vec<S> = (0..=n)
        .map(|j| m.integrate_r0(g.node(j), horizon).exp())
        .collect();
    let w = cumulative_tail(&growth, h);
    let phi: Vec<S> = (0..=n).map(|j| growth[j] / (one + w[j])).collect();
    let big_f = cumulative_tail(&phi, h);
    let integrand: Vec<S> = (0..=n)
        .map(|j| {
            let t = g.node(j);
            let snap = m.snapshot(t);
            let src = (phi[j] * (a * d.value(horizon - t)).ln() + S::lit(0.5) * snap.premium - snap.r0)
                / gamma;
            big_f[j].exp() * src
        })
        .collect();
    let tail = cumulative_tail(&integrand, h);
    let psi: Vec<S> = (0..=n).map(|j| (-big_f[j]).exp() * tail[j]).collect();
    ensure_finite(m, "phi", &phi)?;
    ensure_finite(m, "psi", &psi)?;
    Ok(ExponentialCoefficients {
        a,
        gamma,
        phi: series(m, phi),
        psi: series(m, psi),
    })
}

impl<S: Real> ExponentialCoefficients<S> {
    /// Sup-norm residuals of the `phi` and `psi` equations.
    pub fn ode_residual(&self, m: &MarketModel<S>, d: &DiscountFunction<S>) -> (S, S) {
        let g = *self.phi.grid();
        let phi = self.phi.values();
        let r_phi = self
            .phi
            .derivative_residual(|j, p| p * p - m.r0(g.node(j)) * p);
        let r_psi = self.psi.derivative_residual(|j, s| {
            let t = g.node(j);
            let snap = m.snapshot(t);
            let lnl = (self.a * d.value(g.end() - t)).ln();
            -phi[j] * lnl / self.gamma + phi[j] * s - S::lit(0.5) * snap.premium / self.gamma
                + snap.r0 / self.gamma
        });
        (r_phi, r_psi)
    }
}

/// Dispatches on the utility family.
pub fn solve<S: Real>(m: &MarketModel<S>, d: &DiscountFunction<S>, u: &Utility<S>) -> Result<Coefficients<S>> {
    Ok(match *u {
        Utility::Power { a, gamma } => Coefficients::Power(solve_power(m, d, a, gamma)?),
        Utility::Log { a } => Coefficients::Log(solve_log(m, d, a)?),
        Utility::Exponential { a, gamma } => {
            Coefficients::Exponential(solve_exponential(m, d, a, gamma)?)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;

    fn market(n: usize) -> MarketModel<f64> {
        MarketModel::constant(TimeGrid::new(1.0, n).unwrap(), 0.03, &[0.08], &[0.2]).unwrap()
    }

    #[test]
    fn log_varphi_exponential_discount() {
        let m = market(200);
        let d = DiscountFunction::exponential(0.1, 1.0).unwrap();
        let c = solve_log(&m, &d, 1.0).unwrap();
        // varphi(0) = 1 + (e^{0.1} - 1) / 0.1
        let want = 1.0 + (0.1f64.exp() - 1.0) / 0.1;
        assert!((c.varphi.eval(0.0) - want).abs() < 1e-12);
        assert_eq!(c.varphi.eval(1.0), 1.0);
        assert!(c.ode_residual(&d) < 1e-6);
    }

    #[test]
    fn power_terminal_condition_and_residual() {
        let m = market(1000);
        let d = DiscountFunction::hyperbolic(1.0, 1.0, 1.0).unwrap();
        let c = solve_power(&m, &d, 1.0, 0.5).unwrap();
        assert_eq!(c.pi.eval(1.0), 1.0);
        assert!(c.ode_residual() < 1e-6, "{}", c.ode_residual());
    }

    #[test]
    fn power_matches_classical_formula_for_exponential_discount() {
        // With lambda = e^{-delta tau} the linear equation has constant coefficients.
        let m = market(400);
        let (delta, gamma) = (0.05, 0.5);
        let d = DiscountFunction::exponential(delta, 1.0).unwrap();
        let c = solve_power(&m, &d, 1.0, gamma).unwrap();
        let k = gamma * 0.03 + 0.5 * gamma / (1.0 - gamma) * 0.0625;
        let kc: f64 = k / (gamma - 1.0);
        let rho = delta / (1.0 - gamma) + kc;
        for t in [0.0, 0.3, 0.9] {
            let tau: f64 = 1.0 - t;
            // y = e^{-kc tau} (1 + int_0^tau e^{rho s} ds)
            let direct = (-kc * tau).exp() * (1.0 + ((rho * tau).exp() - 1.0) / rho);
            assert!((c.y.eval(t) - direct).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn exponential_phi_closed_form_constant_rate() {
        let m = market(200);
        let d = DiscountFunction::exponential(0.05, 1.0).unwrap();
        let c = solve_exponential(&m, &d, 1.0, 2.0).unwrap();
        // constant r0: phi = r0 e^{r0 tau} / (r0 + e^{r0 tau} - 1), tau = T - t
        for t in [0.0, 0.5] {
            let tau: f64 = 1.0 - t;
            let exact = 0.03 * (0.03 * tau).exp() / (0.03 + (0.03 * tau).exp() - 1.0);
            assert!((c.phi.eval(t) - exact).abs() < 1e-12, "t={t}");
        }
        let (rp, rs) = c.ode_residual(&m, &d);
        assert!(rp < 1e-6 && rs < 1e-6, "{rp} {rs}");
        assert_eq!(c.psi.eval(1.0), 0.0);
    }

    #[test]
    fn horizon_mismatch_is_rejected() {
        let m = market(10);
        let d = DiscountFunction::exponential(0.05, 2.0).unwrap();
        assert!(solve_log(&m, &d, 1.0).is_err());
    }
}
