//! Benchmark strategies to cross-check the equilibrium against.
//!
//! Classical Merton under a constant rate `delta0`; open-loop and feedback solutions
//! under a time-varying rate with `lambda(tau) = exp(-int_0^tau delta)`; the naive
//! log-utility plan. All integrals are Gauss-Legendre on the model grid, independent of
//! the coefficient solvers in [`closedform`](crate::closedform).

use std::fmt;
use std::str::FromStr;

use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::grid::{GridSeries, TimeGrid};
use crate::model::{DiscountFunction, MarketModel, Utility, UtilityFamily};
use crate::policy::{AffineSlice, Policy};
use crate::quadrature::{simpson, GaussLegendre};
use crate::scalar::Real;

const ORDER: usize = 8;
const NAIVE_PANELS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ComparisonFamily {
    ClassicalMertonLog,
    ClassicalMertonPower,
    ClassicalMertonExp,
    KarpOpenLoopLog,
    KarpOpenLoopPower,
    KarpOpenLoopExp,
    SolanoFeedbackLog,
    SolanoFeedbackPower,
    NaiveLog,
}

impl ComparisonFamily {
    pub const ALL: [ComparisonFamily; 9] = [
        ComparisonFamily::ClassicalMertonLog,
        ComparisonFamily::ClassicalMertonPower,
        ComparisonFamily::ClassicalMertonExp,
        ComparisonFamily::KarpOpenLoopLog,
        ComparisonFamily::KarpOpenLoopPower,
        ComparisonFamily::KarpOpenLoopExp,
        ComparisonFamily::SolanoFeedbackLog,
        ComparisonFamily::SolanoFeedbackPower,
        ComparisonFamily::NaiveLog,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ComparisonFamily::ClassicalMertonLog => "classical-merton-log",
            ComparisonFamily::ClassicalMertonPower => "classical-merton-power",
            ComparisonFamily::ClassicalMertonExp => "classical-merton-exp",
            ComparisonFamily::KarpOpenLoopLog => "karp-openloop-log",
            ComparisonFamily::KarpOpenLoopPower => "karp-openloop-power",
            ComparisonFamily::KarpOpenLoopExp => "karp-openloop-exp",
            ComparisonFamily::SolanoFeedbackLog => "solano-feedback-log",
            ComparisonFamily::SolanoFeedbackPower => "solano-feedback-power",
            ComparisonFamily::NaiveLog => "naive-log",
        }
    }

    /// The utility family the strategy is defined for.
    pub fn utility_family(self) -> UtilityFamily {
        use ComparisonFamily::*;
        match self {
            ClassicalMertonLog | KarpOpenLoopLog | SolanoFeedbackLog | NaiveLog => UtilityFamily::Log,
            ClassicalMertonPower | KarpOpenLoopPower | SolanoFeedbackPower => UtilityFamily::Power,
            ClassicalMertonExp | KarpOpenLoopExp => UtilityFamily::Exponential,
        }
    }
}

impl fmt::Display for ComparisonFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ComparisonFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ComparisonFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::validation("compare.families", format!("unknown family `{s}`")))
    }
}

/// Settings of the damped fixed-point iteration for the feedback power coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions<S> {
    /// Weight of the new sweep in each update.
    pub damping: S,
    /// Stop once the sup-norm change is at most this.
    pub tolerance: S,
    pub max_iterations: usize,
}

impl<S: Real> Default for FixedPointOptions<S> {
    fn default() -> Self {
        FixedPointOptions {
            damping: S::lit(0.5),
            tolerance: S::lit(1e-8),
            max_iterations: 200,
        }
    }
}

/// Sup-norm change after each iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointReport<S> {
    pub iterations: usize,
    pub history: Vec<S>,
}

/// A strategy affine in wealth with grid-node coefficients:
/// `c = c_slope x + c_intercept`, `u = (sigma sigma^T)^{-1} r (u_scale x + u_shift)`.
#[derive(Debug, Clone)]
pub struct ComparisonPolicy<S> {
    family: ComparisonFamily,
    market: MarketModel<S>,
    c_slope: Vec<S>,
    c_intercept: Vec<S>,
    u_scale: S,
    u_shift: Vec<S>,
    positive_wealth: bool,
    notes: Vec<String>,
    fixed_point: Option<FixedPointReport<S>>,
}

impl<S: Real> ComparisonPolicy<S> {
    pub fn family(&self) -> ComparisonFamily {
        self.family
    }

    /// How the formulas were read where the printed version is ambiguous.
    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub fn fixed_point(&self) -> Option<&FixedPointReport<S>> {
        self.fixed_point.as_ref()
    }

    pub fn grid(&self) -> &TimeGrid<S> {
        self.market.grid()
    }

    /// Consumption slope in wealth on the grid.
    pub fn consumption_slope(&self) -> GridSeries<S> {
        GridSeries::new(*self.grid(), self.c_slope.clone()).expect("grid-sized")
    }

    pub fn consumption_intercept(&self) -> GridSeries<S> {
        GridSeries::new(*self.grid(), self.c_intercept.clone()).expect("grid-sized")
    }

    pub fn evaluate(&self, t: S, x: S) -> Result<(S, Vec<S>)> {
        let c = self.consumption(t, x)?;
        let mut u = vec![S::zero(); self.market.dim()];
        self.investment(t, x, &mut u)?;
        Ok((c, u))
    }

    fn check(&self, t: S, x: S) -> Result<()> {
        if !t.is_finite() || !self.grid().contains(t) {
            return Err(Error::domain(
                self.family.name(),
                format!("t = {t} outside [0, {}]", self.market.horizon()),
            ));
        }
        if !x.is_finite() || (self.positive_wealth && x <= S::zero()) {
            return Err(Error::domain(self.family.name(), format!("wealth {x} not admissible")));
        }
        Ok(())
    }

    fn interp(&self, values: &[S], t: S) -> S {
        let (k, w) = self.grid().locate(t);
        values[k] + w * (values[k + 1] - values[k])
    }

    fn slice(&self, t: S) -> AffineSlice<S> {
        let dir = self.market.snapshot(t).direction;
        let shift = self.interp(&self.u_shift, t);
        AffineSlice {
            c_slope: self.interp(&self.c_slope, t),
            c_intercept: self.interp(&self.c_intercept, t),
            u_slope: dir.iter().map(|v| *v * self.u_scale).collect(),
            u_intercept: dir.iter().map(|v| *v * shift).collect(),
        }
    }
}

impl<S: Real> Policy<S> for ComparisonPolicy<S> {
    fn dim(&self) -> usize {
        self.market.dim()
    }

    fn consumption(&self, t: S, x: S) -> Result<S> {
        self.check(t, x)?;
        Ok(self.slice(t).consumption(x))
    }

    fn investment(&self, t: S, x: S, out: &mut [S]) -> Result<()> {
        self.check(t, x)?;
        self.slice(t).investment(x, out);
        Ok(())
    }

    fn affine_at(&self, t: S) -> Option<AffineSlice<S>> {
        Some(self.slice(t))
    }

    fn label(&self) -> String {
        self.family.name().to_string()
    }
}

/// `int_tau^T f` for any `tau`, from node values plus one partial panel.
struct Tail<'g, S, F> {
    grid: &'g TimeGrid<S>,
    gl: &'g GaussLegendre<S>,
    f: F,
    nodes: Vec<S>,
}

impl<'g, S: Real, F: Fn(S) -> S> Tail<'g, S, F> {
    fn new(grid: &'g TimeGrid<S>, gl: &'g GaussLegendre<S>, f: F) -> Self {
        let n = grid.steps();
        let mut nodes = vec![S::zero(); n + 1];
        for k in (0..n).rev() {
            nodes[k] = nodes[k + 1] + gl.integrate(&f, grid.node(k), grid.node(k + 1), 1);
        }
        Tail { grid, gl, f, nodes }
    }

    fn at(&self, tau: S) -> S {
        let (k, _) = self.grid.locate(tau);
        let end = self.grid.node(k + 1);
        if tau >= end {
            return self.nodes[k + 1];
        }
        self.nodes[k + 1] + self.gl.integrate(&self.f, tau, end, 1)
    }
}

/// `int_a^b delta`, split at the knots so each piece is integrated exactly.
fn rate_integral<S: Real>(delta: &Curve<S>, gl: &GaussLegendre<S>, a: S, b: S) -> S {
    if b < a {
        return -rate_integral(delta, gl, b, a);
    }
    let f = |s: S| delta.eval(s);
    let mut total = S::zero();
    let mut lo = a;
    for &k in delta.knots() {
        if k > lo && k < b {
            total += gl.integrate(f, lo, k, 1);
            lo = k;
        }
    }
    total + gl.integrate(f, lo, b, 1)
}

fn check_rate<S: Real>(delta: &Curve<S>) -> Result<()> {
    let (lo, hi) = (delta.min_value(), delta.max_value());
    if !lo.is_finite() || !hi.is_finite() || lo < S::zero() {
        return Err(Error::validation("delta", "discount rate must be finite and nonnegative"));
    }
    Ok(())
}

fn check_delta0<S: Real>(delta0: S) -> Result<()> {
    if !delta0.is_finite() || delta0 < S::zero() {
        return Err(Error::validation("delta0", format!("must be nonnegative, got {delta0}")));
    }
    Ok(())
}

/// `K = gamma r0 + gamma/(2(1-gamma)) r^T Sigma r`.
fn k_coefficient<S: Real>(m: &MarketModel<S>, gamma: S, s: S) -> S {
    let snap = m.snapshot(s);
    gamma * snap.r0 + S::lit(0.5) * gamma / (S::one() - gamma) * snap.premium
}

/// `c / x = 1 / (a lambda(T-t) + int_t^T kernel(t, l) dl)`.
fn log_slopes<S: Real>(
    m: &MarketModel<S>,
    a: S,
    log_lambda: impl Fn(S) -> S,
    kernel: impl Fn(S, S) -> S,
) -> Vec<S> {
    let gl = GaussLegendre::new(ORDER);
    let grid = m.grid();
    let n = grid.steps();
    let big_t = m.horizon();
    (0..=n)
        .map(|k| {
            let t = grid.node(k);
            let tail = gl.integrate(|l| kernel(t, l), t, big_t, n - k);
            (a * log_lambda(big_t - t).exp() + tail).recip()
        })
        .collect()
}

/// `c / x = (a lambda(T-t))^{1/(gamma-1)} e^{G(t)} / (1 + int_t^T (a lambda(T-tau))^{1/(gamma-1)} e^{G(tau)} dtau)`
/// with `G(t) = int_t^T K / (gamma - 1)`.
fn power_slopes<S: Real>(m: &MarketModel<S>, a: S, gamma: S, log_lambda: impl Fn(S) -> S) -> Result<Vec<S>> {
    let gl = GaussLegendre::new(ORDER);
    let grid = m.grid();
    let big_t = m.horizon();
    let inv = (gamma - S::one()).recip();
    let g = Tail::new(grid, &gl, |s| k_coefficient(m, gamma, s) * inv);
    let weight = |tau: S| inv * (a.ln() + log_lambda(big_t - tau));
    let h = Tail::new(grid, &gl, |tau| (weight(tau) + g.at(tau)).exp());
    let out: Vec<S> = (0..=grid.steps())
        .map(|k| (weight(grid.node(k)) + g.nodes[k]).exp() / (S::one() + h.nodes[k]))
        .collect();
    if out.iter().any(|v| !v.is_finite() || *v <= S::zero()) {
        return Err(Error::Solvability {
            t: 0.0,
            reason: "power consumption coefficient is not positive and finite".into(),
        });
    }
    Ok(out)
}

/// `phi` and the consumption intercept `-ln(a lambda(T-t))/gamma + psi` of the exponential case.
/// Uses `e^{int_l^T phi} = 1 + W(l)` with `W(l) = int_l^T e^{int_s^T r0} ds`.
fn exponential_coefficients<S: Real>(
    m: &MarketModel<S>,
    a: S,
    gamma: S,
    log_lambda: impl Fn(S) -> S,
) -> (Vec<S>, Vec<S>) {
    let gl = GaussLegendre::new(ORDER);
    let grid = m.grid();
    let big_t = m.horizon();
    let r = Tail::new(grid, &gl, |s| m.r0(s));
    let w = Tail::new(grid, &gl, |s| r.at(s).exp());
    let half = S::lit(0.5);
    let p = Tail::new(grid, &gl, |l| {
        let snap = m.snapshot(l);
        let one_w = S::one() + w.at(l);
        let phi = r.at(l).exp() / one_w;
        one_w * (phi * (a.ln() + log_lambda(big_t - l)) + half * snap.premium - snap.r0)
    });
    let n = grid.steps();
    let mut phi = Vec::with_capacity(n + 1);
    let mut intercept = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let one_w = S::one() + w.nodes[k];
        phi.push(r.nodes[k].exp() / one_w);
        let psi = p.nodes[k] / (gamma * one_w);
        intercept.push(-(a.ln() + log_lambda(big_t - grid.node(k))) / gamma + psi);
    }
    (phi, intercept)
}

fn assemble<S: Real>(
    family: ComparisonFamily,
    m: &MarketModel<S>,
    u: &Utility<S>,
    c_slope: Vec<S>,
    c_intercept: Option<Vec<S>>,
    notes: Vec<&str>,
) -> ComparisonPolicy<S> {
    let n = c_slope.len();
    let (u_scale, u_shift) = match u {
        Utility::Log { .. } => (S::one(), vec![S::zero(); n]),
        Utility::Power { gamma, .. } => ((S::one() - *gamma).recip(), vec![S::zero(); n]),
        Utility::Exponential { gamma, .. } => {
            (S::zero(), c_slope.iter().map(|phi| (*gamma * *phi).recip()).collect())
        }
    };
    ComparisonPolicy {
        family,
        market: m.clone(),
        c_intercept: c_intercept.unwrap_or_else(|| vec![S::zero(); n]),
        c_slope,
        u_scale,
        u_shift,
        positive_wealth: u.wealth_floor().is_some(),
        notes: notes.into_iter().map(String::from).collect(),
        fixed_point: None,
    }
}

/// The classical Merton strategy under `lambda(tau) = e^{-delta0 tau}`.
pub fn classical_merton<S: Real>(m: &MarketModel<S>, u: &Utility<S>, delta0: S) -> Result<ComparisonPolicy<S>> {
    check_delta0(delta0)?;
    let log_lambda = |tau: S| -tau * delta0;
    Ok(match *u {
        Utility::Log { a } => {
            let slope = log_slopes(m, a, log_lambda, |t, l| (-(l - t) * delta0).exp());
            assemble(
                ComparisonFamily::ClassicalMertonLog,
                m,
                u,
                slope,
                None,
                vec!["lower limit of the consumption integral read as t"],
            )
        }
        Utility::Power { a, gamma } => {
            let slope = power_slopes(m, a, gamma, log_lambda)?;
            assemble(ComparisonFamily::ClassicalMertonPower, m, u, slope, None, vec![])
        }
        Utility::Exponential { a, gamma } => {
            let (phi, intercept) = exponential_coefficients(m, a, gamma, log_lambda);
            assemble(ComparisonFamily::ClassicalMertonExp, m, u, phi, Some(intercept), vec![])
        }
    })
}

/// The open-loop equilibrium when the discount rate varies with time.
pub fn karp_openloop<S: Real>(m: &MarketModel<S>, u: &Utility<S>, delta: &Curve<S>) -> Result<ComparisonPolicy<S>> {
    check_rate(delta)?;
    let gl = GaussLegendre::new(2);
    let big_t = m.horizon();
    let log_lambda = |tau: S| -rate_integral(delta, &gl, S::zero(), tau);
    Ok(match *u {
        Utility::Log { a } => {
            let kernel = |t: S, l: S| (-rate_integral(delta, &gl, big_t - l, big_t - t)).exp();
            assemble(
                ComparisonFamily::KarpOpenLoopLog,
                m,
                u,
                log_slopes(m, a, log_lambda, kernel),
                None,
                vec!["inner rate integral taken over [T - l, T - t]"],
            )
        }
        Utility::Power { a, gamma } => assemble(
            ComparisonFamily::KarpOpenLoopPower,
            m,
            u,
            power_slopes(m, a, gamma, log_lambda)?,
            None,
            vec!["undefined lower limit s of the K integral read as t"],
        ),
        Utility::Exponential { a, gamma } => {
            let (phi, intercept) = exponential_coefficients(m, a, gamma, log_lambda);
            assemble(
                ComparisonFamily::KarpOpenLoopExp,
                m,
                u,
                phi,
                Some(intercept),
                vec![
                    "psi integrand discounted at T - l, the integration variable",
                    "investment uses the wealth-independent rule (sigma sigma^T)^-1 r / (gamma phi)",
                ],
            )
        }
    })
}

/// The feedback equilibrium for log utility.
pub fn solano_feedback_log<S: Real>(m: &MarketModel<S>, a: S, delta: &Curve<S>) -> Result<ComparisonPolicy<S>> {
    check_rate(delta)?;
    let u = Utility::log(a)?;
    let gl = GaussLegendre::new(2);
    let log_lambda = |tau: S| -rate_integral(delta, &gl, S::zero(), tau);
    let kernel = |t: S, l: S| log_lambda(l - t).exp();
    Ok(assemble(
        ComparisonFamily::SolanoFeedbackLog,
        m,
        &u,
        log_slopes(m, a, log_lambda, kernel),
        None,
        vec!["discount inside the consumption integral taken as lambda(l - t)"],
    ))
}

/// The feedback equilibrium for power utility, `c = alpha^{1/(gamma-1)} x`, with default
/// fixed-point settings.
pub fn solano_feedback_power<S: Real>(
    m: &MarketModel<S>,
    a: S,
    gamma: S,
    delta: &Curve<S>,
) -> Result<ComparisonPolicy<S>> {
    solano_feedback_power_with(m, a, gamma, delta, FixedPointOptions::default())
}

/// Solves
/// `alpha' = (delta(T-t) - K) alpha - (1-gamma) alpha^{gamma/(gamma-1)} + I[alpha](t)`, `alpha(T) = a`,
/// where `I[alpha](t) = int_t^T lambda(s-t) (delta(s-t) - delta(T-t)) alpha(s)^{gamma/(gamma-1)} e^{gamma int_t^s Delta} ds`
/// and `Delta = r0 + r^T Sigma r / (1-gamma) - alpha^{1/(gamma-1)}`.
///
/// Each iteration freezes `I` at the current iterate, integrates backward with RK4 and
/// blends the result in with weight `damping`.
pub fn solano_feedback_power_with<S: Real>(
    m: &MarketModel<S>,
    a: S,
    gamma: S,
    delta: &Curve<S>,
    opts: FixedPointOptions<S>,
) -> Result<ComparisonPolicy<S>> {
    check_rate(delta)?;
    let u = Utility::power(a, gamma)?;
    if !(opts.damping > S::zero() && opts.damping <= S::one()) {
        return Err(Error::validation("damping", "must lie in (0, 1]"));
    }
    if !(opts.tolerance > S::zero()) || opts.max_iterations == 0 {
        return Err(Error::validation("fixed point", "need a positive tolerance and iteration cap"));
    }
    let gl = GaussLegendre::new(2);
    let grid = m.grid();
    let n = grid.steps();
    let h = grid.dt();
    let big_t = m.horizon();
    let one = S::one();
    let half = S::lit(0.5);
    let pow_c = (gamma - one).recip();
    let pow_u = gamma * pow_c;

    let nodes = grid.nodes();
    let mids: Vec<S> = (0..n).map(|k| half * (nodes[k] + nodes[k + 1])).collect();
    let k_node: Vec<S> = nodes.iter().map(|t| k_coefficient(m, gamma, *t)).collect();
    let k_mid: Vec<S> = mids.iter().map(|t| k_coefficient(m, gamma, *t)).collect();
    let d_node: Vec<S> = nodes.iter().map(|t| delta.eval(big_t - *t)).collect();
    let d_mid: Vec<S> = mids.iter().map(|t| delta.eval(big_t - *t)).collect();
    // Offsets j h from the evaluation time.
    let lam_off: Vec<S> = (0..=n)
        .map(|j| (-rate_integral(delta, &gl, S::zero(), S::from_count(j) * h)).exp())
        .collect();
    let delta_off: Vec<S> = (0..=n).map(|j| delta.eval(S::from_count(j) * h)).collect();
    let drift: Vec<S> = nodes
        .iter()
        .map(|t| {
            let snap = m.snapshot(*t);
            snap.r0 + snap.premium / (one - gamma)
        })
        .collect();

    let integral_term = |alpha: &[S]| -> Vec<S> {
        let growth: Vec<S> = (0..=n).map(|j| drift[j] - alpha[j].powf(pow_c)).collect();
        let mut cum = vec![S::zero(); n + 1];
        for j in 1..=n {
            cum[j] = cum[j - 1] + half * h * (growth[j - 1] + growth[j]);
        }
        let mut f = Vec::with_capacity(n + 1);
        (0..=n)
            .map(|k| {
                f.clear();
                f.extend((k..=n).map(|j| {
                    lam_off[j - k]
                        * (delta_off[j - k] - d_node[k])
                        * alpha[j].powf(pow_u)
                        * (gamma * (cum[j] - cum[k])).exp()
                }));
                simpson(&f, h)
            })
            .collect()
    };

    let rhs = |k: S, d: S, i: S, al: S| (d - k) * al - (one - gamma) * al.powf(pow_u) + i;
    let sweep = |ints: &[S]| -> Result<Vec<S>> {
        let mut out = vec![a; n + 1];
        for k in (0..n).rev() {
            let y = out[k + 1];
            let i_mid = half * (ints[k] + ints[k + 1]);
            let s1 = rhs(k_node[k + 1], d_node[k + 1], ints[k + 1], y);
            let s2 = rhs(k_mid[k], d_mid[k], i_mid, y - half * h * s1);
            let s3 = rhs(k_mid[k], d_mid[k], i_mid, y - half * h * s2);
            let s4 = rhs(k_node[k], d_node[k], ints[k], y - h * s3);
            let next = y - h / S::lit(6.0) * (s1 + S::lit(2.0) * (s2 + s3) + s4);
            if !next.is_finite() || next <= S::zero() {
                return Err(Error::Solvability {
                    t: nodes[k].as_f64(),
                    reason: format!("feedback coefficient alpha = {next} is not positive"),
                });
            }
            out[k] = next;
        }
        Ok(out)
    };

    let mut alpha = vec![a; n + 1];
    let mut history = Vec::new();
    loop {
        let fresh = sweep(&integral_term(&alpha))?;
        let mut change = S::zero();
        for (old, new) in alpha.iter_mut().zip(&fresh) {
            let next = *old + opts.damping * (*new - *old);
            change = change.max((next - *old).abs());
            *old = next;
        }
        history.push(change);
        if change <= opts.tolerance {
            break;
        }
        if history.len() >= opts.max_iterations {
            log::debug!("feedback power fixed point history: {history:?}");
            return Err(Error::Convergence {
                solver: "feedback power fixed point",
                t: 0.0,
                residual: change.as_f64(),
                iterations: history.len(),
            });
        }
    }

    let slope = alpha.iter().map(|al| al.powf(pow_c)).collect();
    let mut p = assemble(
        ComparisonFamily::SolanoFeedbackPower,
        m,
        &u,
        slope,
        None,
        vec!["alpha enters with exponent gamma/(gamma-1) and Delta with alpha^(1/(gamma-1)), matching c = alpha^(1/(gamma-1)) x"],
    );
    p.fixed_point = Some(FixedPointReport {
        iterations: history.len(),
        history,
    });
    Ok(p)
}

/// Consumption-to-wealth fraction at time `s` planned by the naive agent of time `t0`:
/// `1 / (a + int_s^T exp{lambda(r-s) + ln(lambda(r-t0)/lambda(s-t0))} dr)`.
pub fn naive_log_fraction<S: Real>(d: &DiscountFunction<S>, a: S, t0: S, s: S) -> Result<S> {
    let big_t = d.horizon();
    if !(a > S::zero()) || !a.is_finite() {
        return Err(Error::validation("utility.a", "must be positive"));
    }
    if !(t0 >= S::zero() && t0 <= big_t) {
        return Err(Error::domain("naive plan", format!("agent time {t0} outside [0, {big_t}]")));
    }
    if !(s >= t0 && s <= big_t) {
        return Err(Error::domain("naive plan", format!("time {s} outside [{t0}, {big_t}]")));
    }
    let gl = GaussLegendre::new(ORDER);
    let base = d.value(s - t0);
    let tail = gl.integrate(
        |r| (d.value(r - s) + (d.value(r - t0) / base).ln()).exp(),
        s,
        big_t,
        NAIVE_PANELS,
    );
    Ok((a + tail).recip())
}

/// The naive agent's planned fraction on `steps` equal intervals of `[t0, T]`.
pub fn naive_log_consumption<S: Real>(
    d: &DiscountFunction<S>,
    a: S,
    t0: S,
    steps: usize,
) -> Result<GridSeries<S>> {
    let grid = TimeGrid::span(t0, d.horizon(), steps)?;
    let values = grid
        .nodes()
        .into_iter()
        .map(|s| naive_log_fraction(d, a, t0, s))
        .collect::<Result<Vec<S>>>()?;
    GridSeries::new(grid, values)
}

/// `max_s |c^{0}(s) - c^{eps}(s)|` over the nodes of `[eps, T]`, where `eps` is node
/// `k` of a `steps`-interval grid on `[0, T]`.
pub fn naive_restriction_gap<S: Real>(d: &DiscountFunction<S>, a: S, k: usize, steps: usize) -> Result<S> {
    if k >= steps {
        return Err(Error::validation("k", "agent time must be before the horizon"));
    }
    let from_zero = naive_log_consumption(d, a, S::zero(), steps)?;
    let eps = from_zero.grid().node(k);
    let from_eps = naive_log_consumption(d, a, eps, steps - k)?;
    Ok(from_eps
        .values()
        .iter()
        .zip(&from_zero.values()[k..])
        .fold(S::zero(), |g, (x, y)| g.max((*x - *y).abs())))
}

/// The naive agent's realized strategy: at every `t` it follows the plan of the `t`-agent.
pub fn naive_log_policy<S: Real>(m: &MarketModel<S>, d: &DiscountFunction<S>, a: S) -> Result<ComparisonPolicy<S>> {
    crate::closedform::check_horizons(m, d)?;
    let u = Utility::log(a)?;
    let slope = m
        .grid()
        .nodes()
        .into_iter()
        .map(|t| naive_log_fraction(d, a, t, t))
        .collect::<Result<Vec<S>>>()?;
    Ok(assemble(
        ComparisonFamily::NaiveLog,
        m,
        &u,
        slope,
        None,
        vec!["plan evaluated as printed, with the bequest weight a in place of the leading 1"],
    ))
}

/// One row of a consumption comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceRow<S> {
    pub t: S,
    pub family_a: String,
    pub family_b: String,
    pub consumption_gap: S,
}

/// `|c_a(t, x) - c_b(t, x)|` at the nodes of `grid`.
pub fn consumption_divergence<S: Real, A: Policy<S> + ?Sized, B: Policy<S> + ?Sized>(
    a: &A,
    b: &B,
    grid: &TimeGrid<S>,
    x: S,
) -> Result<Vec<DivergenceRow<S>>> {
    grid.nodes()
        .into_iter()
        .map(|t| {
            Ok(DivergenceRow {
                t,
                family_a: a.label(),
                family_b: b.label(),
                consumption_gap: (a.consumption(t, x)? - b.consumption(t, x)?).abs(),
            })
        })
        .collect()
}

/// Builds `family` for the configured model. Classical families use `delta0`, the
/// Karp and feedback families `delta`, and the naive plan the discount function `d`.
pub fn build_family<S: Real>(
    family: ComparisonFamily,
    m: &MarketModel<S>,
    d: &DiscountFunction<S>,
    u: &Utility<S>,
    delta0: S,
    delta: &Curve<S>,
) -> Result<ComparisonPolicy<S>> {
    if family.utility_family() != u.family() {
        return Err(Error::validation(
            "compare.families",
            format!("{family} needs {} utility", family.utility_family().name()),
        ));
    }
    use ComparisonFamily::*;
    match (family, *u) {
        (ClassicalMertonLog | ClassicalMertonPower | ClassicalMertonExp, _) => classical_merton(m, u, delta0),
        (KarpOpenLoopLog | KarpOpenLoopPower | KarpOpenLoopExp, _) => karp_openloop(m, u, delta),
        (SolanoFeedbackLog, _) => solano_feedback_log(m, u.weight(), delta),
        (SolanoFeedbackPower, Utility::Power { a, gamma }) => solano_feedback_power(m, a, gamma, delta),
        (NaiveLog, _) => naive_log_policy(m, d, u.weight()),
        _ => unreachable!("utility family checked above"),
    }
}

/// Largest gap in a divergence report.
pub fn max_gap<S: Real>(rows: &[DivergenceRow<S>]) -> S {
    rows.iter().fold(S::zero(), |g, r| g.max(r.consumption_gap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::EquilibriumPolicy;

    fn market(n: usize) -> MarketModel<f64> {
        MarketModel::constant(TimeGrid::new(1.0, n).unwrap(), 0.03, &[0.08], &[0.25]).unwrap()
    }

    fn utilities() -> [Utility<f64>; 3] {
        [
            Utility::log(1.5).unwrap(),
            Utility::power(2.0, 0.4).unwrap(),
            Utility::exponential(1.2, 2.0).unwrap(),
        ]
    }

    fn sup_gap<P: Policy<f64>, Q: Policy<f64>>(p: &P, q: &Q, grid: &TimeGrid<f64>, x: f64) -> (f64, f64) {
        let (mut gc, mut gu) = (0.0f64, 0.0f64);
        let (mut up, mut uq) = (vec![0.0; p.dim()], vec![0.0; q.dim()]);
        for t in grid.nodes() {
            gc = gc.max((p.consumption(t, x).unwrap() - q.consumption(t, x).unwrap()).abs());
            p.investment(t, x, &mut up).unwrap();
            q.investment(t, x, &mut uq).unwrap();
            gu = up.iter().zip(&uq).fold(gu, |g, (a, b)| g.max((a - b).abs()));
        }
        (gc, gu)
    }

    #[test]
    fn family_names_round_trip() {
        for f in ComparisonFamily::ALL {
            assert_eq!(f.name().parse::<ComparisonFamily>().unwrap(), f);
        }
        assert!("merton".parse::<ComparisonFamily>().is_err());
    }

    #[test]
    fn classical_log_unit_discount() {
        let m = market(100);
        let p = classical_merton(&m, &Utility::log(1.0).unwrap(), 0.0).unwrap();
        for t in [0.0, 0.3, 1.0] {
            assert!((p.consumption(t, 2.0).unwrap() - 2.0 / (2.0 - t)).abs() < 1e-12);
        }
    }

    #[test]
    fn feedback_log_unit_discount() {
        let m = market(100);
        let p = solano_feedback_log(&m, 1.0, &Curve::constant(0.0)).unwrap();
        assert!((p.consumption(0.0, 1.0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn open_loop_matches_equilibrium_under_varying_rate() {
        let m = market(400);
        let delta = Curve::affine(0.1, 0.1, 0.0, 1.0).unwrap();
        let d = DiscountFunction::karp(delta.clone(), 1.0).unwrap();
        for u in utilities() {
            let p = karp_openloop(&m, &u, &delta).unwrap();
            let q = EquilibriumPolicy::closed_form(&m, &d, &u).unwrap();
            let (gc, gu) = sup_gap(&p, &q, m.grid(), 1.3);
            assert!(gc < 1e-8 && gu < 1e-8, "{:?}: {gc} {gu}", u.family());
        }
    }

    #[test]
    fn constant_rate_collapse() {
        let m = market(200);
        for u in utilities() {
            let c = classical_merton(&m, &u, 0.07).unwrap();
            let k = karp_openloop(&m, &u, &Curve::constant(0.07)).unwrap();
            let (gc, gu) = sup_gap(&c, &k, m.grid(), 0.8);
            assert!(gc < 1e-12 && gu < 1e-12, "{gc} {gu}");
        }
        let c = classical_merton(&m, &Utility::log(1.5).unwrap(), 0.07).unwrap();
        let s = solano_feedback_log(&m, 1.5, &Curve::constant(0.07)).unwrap();
        assert!(sup_gap(&c, &s, m.grid(), 1.0).0 < 1e-12);
        let c = classical_merton(&m, &Utility::power(2.0, 0.4).unwrap(), 0.07).unwrap();
        let s = solano_feedback_power(&m, 2.0, 0.4, &Curve::constant(0.07)).unwrap();
        assert!(sup_gap(&c, &s, m.grid(), 1.0).0 < 1e-6);
    }

    #[test]
    fn feedback_power_fixed_point() {
        let m = market(200);
        let delta = Curve::affine(0.1, 0.1, 0.0, 1.0).unwrap();
        let s = solano_feedback_power(&m, 2.0, 0.4, &delta).unwrap();
        let report = s.fixed_point().unwrap();
        assert!(report.iterations <= 200 && *report.history.last().unwrap() <= 1e-8);
        // alpha(T) = a
        let c_end = s.consumption(1.0, 1.0).unwrap();
        assert!((c_end - 2.0f64.powf(1.0 / (0.4 - 1.0))).abs() < 1e-12);
        let k = karp_openloop(&m, &Utility::power(2.0, 0.4).unwrap(), &delta).unwrap();
        let (gc, gu) = sup_gap(&s, &k, m.grid(), 1.0);
        assert!(gc > 1e-6 && gu < 1e-12, "{gc} {gu}");
    }

    #[test]
    fn fixed_point_reports_non_convergence() {
        let m = market(50);
        let delta = Curve::affine(0.1, 0.1, 0.0, 1.0).unwrap();
        let opts = FixedPointOptions {
            max_iterations: 2,
            ..FixedPointOptions::default()
        };
        let err = solano_feedback_power_with(&m, 2.0, 0.4, &delta, opts).unwrap_err();
        assert!(matches!(err, Error::Convergence { iterations: 2, .. }));
    }

    #[test]
    fn log_consumption_differs_between_open_loop_and_feedback() {
        let m = market(200);
        let delta = Curve::affine(0.1, 0.1, 0.0, 1.0).unwrap();
        let k = karp_openloop(&m, &Utility::log(1.0).unwrap(), &delta).unwrap();
        let s = solano_feedback_log(&m, 1.0, &delta).unwrap();
        let rows = consumption_divergence(&k, &s, m.grid(), 1.0).unwrap();
        assert!(max_gap(&rows) > 1e-6);
        assert_eq!(rows[0].family_a, "karp-openloop-log");
    }

    #[test]
    fn naive_plan_consistency() {
        let exp = DiscountFunction::exponential(0.3, 1.0).unwrap();
        assert!(naive_restriction_gap(&exp, 1.0, 20, 200).unwrap() < 1e-9);
        let hyp = DiscountFunction::hyperbolic(2.0, 1.0, 1.0).unwrap();
        assert!(naive_restriction_gap(&hyp, 1.0, 20, 200).unwrap() > 1e-6);
        for d in [exp, hyp] {
            let c = naive_log_consumption(&d, 1.0, 0.25, 50).unwrap();
            assert!(c.values().iter().all(|v: &f64| v.is_finite() && *v > 0.0));
        }
        assert!(naive_log_fraction(&DiscountFunction::exponential(0.3, 1.0).unwrap(), 1.0, 0.5, 0.2).is_err());
    }

    #[test]
    fn naive_policy_runs() {
        let m = market(50);
        let d = DiscountFunction::hyperbolic(1.0, 1.0, 1.0).unwrap();
        let p = naive_log_policy(&m, &d, 1.0).unwrap();
        assert!(p.consumption(0.5, 1.0).unwrap() > 0.0);
        assert!(p.consumption(0.5, -1.0).is_err());
    }
}
