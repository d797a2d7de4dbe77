//! Equilibrium verification: first-order adjoint residuals, the spike-variation test and
//! the second-order adjoint.
//!
//! The first-order adjoint on the diagonal is
//! `p(t; t) = E[lambda(T - t) h_x(X_T) exp(int_t^T r0)]`, which equals
//! `lambda(T - t) theta(t, x)` at an equilibrium.

use crate::closedform::check_horizons;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{DiscountFunction, MarketModel, Utility};
use crate::policy::Policy;
use crate::scalar::Real;
use crate::simulate::{default_steps, running_weights, summarize, Engine, SimulationSpec};

/// Fraction of flagged paths above which an estimate is inconclusive.
pub const MAX_FLAGGED_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdjointMethod {
    /// `lambda(T - t) theta(t, x)`, exact up to the accuracy of `theta`.
    Theta,
    /// Nested Monte Carlo over sub-simulations started at `(t, x)`.
    NestedMonteCarlo,
}

/// `p(t; t)` and, when available, `q(t; t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointEstimate<S> {
    pub t: S,
    pub x: S,
    pub p: S,
    pub stderr: S,
    /// From the ansatz `q = lambda(T - t) theta_x sigma^T u`; `None` without `theta`.
    pub q: Option<Vec<S>>,
    pub method: AdjointMethod,
    pub flagged_fraction: S,
    pub inconclusive: bool,
}

fn check_state<S: Real>(m: &MarketModel<S>, t: S, x: S) -> Result<()> {
    if !t.is_finite() || t < S::zero() || t > m.horizon() {
        return Err(Error::domain("adjoint", format!("t = {t} outside [0, {}]", m.horizon())));
    }
    if !x.is_finite() {
        return Err(Error::domain("adjoint", "wealth must be finite"));
    }
    Ok(())
}

/// `q = lambda(T - t) theta_x sigma^T u(t, x)`, when the policy exposes `theta`.
fn ansatz_q<S: Real, P: Policy<S> + ?Sized>(
    policy: &P,
    m: &MarketModel<S>,
    d: &DiscountFunction<S>,
    t: S,
    x: S,
) -> Result<Option<(S, Vec<S>)>> {
    let Some((theta, theta_x)) = policy.theta(t, x)? else {
        return Ok(None);
    };
    let dim = m.dim();
    let mut u = vec![S::zero(); dim];
    policy.investment(t, x, &mut u)?;
    let lambda = d.value(m.horizon() - t);
    let su = linalg::mat_t_vec(&m.sigma_at(t), dim, &u);
    Ok(Some((lambda * theta, su.iter().map(|v| lambda * theta_x * *v).collect())))
}

/// `p(t; t) = lambda(T - t) theta(t, x)`.
pub fn theta_adjoint<S: Real, P: Policy<S> + ?Sized>(
    policy: &P,
    m: &MarketModel<S>,
    d: &DiscountFunction<S>,
    t: S,
    x: S,
) -> Result<AdjointEstimate<S>> {
    check_horizons(m, d)?;
    check_state(m, t, x)?;
    let (p, q) = ansatz_q(policy, m, d, t, x)?.ok_or_else(|| {
        Error::validation("policy", "no theta representation; use the Monte Carlo estimator")
    })?;
    Ok(AdjointEstimate {
        t,
        x,
        p,
        stderr: S::zero(),
        q: Some(q),
        method: AdjointMethod::Theta,
        flagged_fraction: S::zero(),
        inconclusive: false,
    })
}

/// Nested Monte Carlo estimate of `p(t; t)` from `n_outer` batches of `n_inner` paths.
///
/// Each path is simulated at the model step and at half of it with the same Brownian
/// increments, and contributes `2 f(X_fine) - f(X_coarse)`, removing the first-order
/// discretization bias. The standard error is taken across batch means.
#[allow(clippy::too_many_arguments)]
pub fn estimate_p_diagonal<S: Real, P: Policy<S> + ?Sized>(
    policy: &P,
    m: &MarketModel<S>,
    d: &DiscountFunction<S>,
    u: &Utility<S>,
    t: S,
    x: S,
    n_outer: usize,
    n_inner: usize,
    seed: u64,
) -> Result<AdjointEstimate<S>> {
    check_horizons(m, d)?;
    check_state(m, t, x)?;
    if n_outer == 0 || n_inner == 0 {
        return Err(Error::validation("paths", "need at least one outer and one inner path"));
    }
    let q = ansatz_q(policy, m, d, t, x)?.map(|(_, q)| q);
    let horizon = m.horizon();
    if horizon - t <= m.grid().dt() * S::lit(1e-9) {
        return Ok(AdjointEstimate {
            t,
            x,
            p: u.h_x(x)?,
            stderr: S::zero(),
            q,
            method: AdjointMethod::NestedMonteCarlo,
            flagged_fraction: S::zero(),
            inconclusive: false,
        });
    }
    let n = default_steps(m, t);
    let spec = SimulationSpec::new(t, x, n_outer * n_inner, seed).with_floor(u.wealth_floor());
    let coarse = Engine::new(policy, m, &spec.clone().with_steps(n))?;
    let fine = Engine::new(policy, m, &spec.with_steps(2 * n))?;
    let scale = d.value(horizon - t) * m.integrate_r0(t, horizon).exp();
    let two = S::lit(2.0);
    let values = fine.map_paths(n_outer * n_inner, |i| {
        let (xf, xc) = fine.run_coupled(&coarse, i).ok()?;
        let (vf, vc) = (u.h_x(xf).ok()?, u.h_x(xc).ok()?);
        Some(scale * (two * vf - vc))
    });
    let batches: Vec<Option<S>> = values
        .chunks(n_inner)
        .map(|b| {
            let (mean, _, used, _) = summarize(b);
            (used > 0).then_some(mean)
        })
        .collect();
    let (_, path_se, used, flagged) = summarize(&values);
    if used == 0 {
        return Err(Error::NoAdmissiblePaths { flagged });
    }
    let (p, batch_se, _, _) = summarize(&batches);
    let stderr = if n_outer >= 2 { batch_se } else { path_se };
    let flagged_fraction = S::from_count(flagged) / S::from_count(values.len());
    Ok(AdjointEstimate {
        t,
        x,
        p,
        stderr,
        q,
        method: AdjointMethod::NestedMonteCarlo,
        flagged_fraction,
        inconclusive: flagged_fraction > S::lit(MAX_FLAGGED_FRACTION),
    })
}

/// First-order residuals at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport<S> {
    pub t: S,
    pub x: S,
    /// `|phi_c(c) - p|`.
    pub r_c: S,
    /// `|p r + sigma q|`; `None` without `q`.
    pub r_i: Option<S>,
    pub stderr_c: S,
    pub stderr_i: Option<S>,
    pub method: AdjointMethod,
}

impl<S: Real> ResidualReport<S> {
    /// Within `max(floor, 3 stderr)`.
    pub fn within(&self, floor: S) -> bool {
        let three = S::lit(3.0);
        let ok_c = self.r_c <= floor.max(three * self.stderr_c);
        let ok_i = match (self.r_i, self.stderr_i) {
            (Some(r), Some(se)) => r <= floor.max(three * se),
            _ => true,
        };
        ok_c && ok_i
    }
}

/// Residuals of the consumption and investment first-order conditions.
pub fn residual_conditions<S: Real, P: Policy<S> + ?Sized>(
    policy: &P,
    adjoint: &AdjointEstimate<S>,
    m: &MarketModel<S>,
    u: &Utility<S>,
) -> Result<ResidualReport<S>> {
    let (t, x) = (adjoint.t, adjoint.x);
    let c = policy.consumption(t, x)?;
    let r_c = (u.phi_c(c)? - adjoint.p).abs();
    let snap = m.snapshot(t);
    let (r_i, stderr_i) = match &adjoint.q {
        Some(q) => {
            let sq = linalg::mat_vec(&snap.sigma, m.dim(), q);
            let v: Vec<S> = snap
                .excess
                .iter()
                .zip(&sq)
                .map(|(r, s)| adjoint.p * *r + *s)
                .collect();
            (Some(linalg::norm(&v)), Some(adjoint.stderr * linalg::norm(&snap.excess)))
        }
        None => (None, None),
    };
    Ok(ResidualReport {
        t,
        x,
        r_c,
        r_i,
        stderr_c: adjoint.stderr,
        stderr_i,
        method: adjoint.method,
    })
}

/// Perturbation `(v_c, v_u)` added on `[t, t + eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeDirection<S> {
    pub v_c: S,
    pub v_u: Vec<S>,
}

impl<S: Real> SpikeDirection<S> {
    /// `+-bound` along each coordinate of `(c, u_1, ..., u_d)`: `2 (d + 1)` directions.
    pub fn coordinate_set(dim: usize, bound: S) -> Vec<Self> {
        let mut out = Vec::with_capacity(2 * (dim + 1));
        for i in 0..=dim {
            for sign in [S::one(), -S::one()] {
                let mut v_u = vec![S::zero(); dim];
                let v_c = if i == 0 {
                    sign * bound
                } else {
                    v_u[i - 1] = sign * bound;
                    S::zero()
                };
                out.push(SpikeDirection { v_c, v_u });
            }
        }
        out
    }
}

/// `Delta(eps) = (J(u^eps) - J(u)) / eps` for one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeResult<S> {
    pub t: S,
    pub x: S,
    pub direction: SpikeDirection<S>,
    pub epsilons: Vec<S>,
    pub deltas: Vec<S>,
    pub stderrs: Vec<S>,
    /// Linear extrapolation of `Delta` to `eps = 0`.
    pub extrapolated: S,
    pub extrapolated_stderr: S,
    pub paths_used: usize,
    pub flagged: usize,
}

impl<S: Real> SpikeResult<S> {
    /// No significant improvement from the perturbation.
    pub fn passes(&self) -> bool {
        self.extrapolated <= S::lit(3.0) * self.extrapolated_stderr
    }

    pub fn inconclusive(&self) -> bool {
        S::from_count(self.flagged) > S::lit(MAX_FLAGGED_FRACTION) * S::from_count(self.flagged + self.paths_used)
    }
}

/// Smallest step count `>= base` at which every window is a whole number of steps.
fn aligned_steps<S: Real>(base: usize, span: S, epsilons: &[S]) -> Result<usize> {
    for n in base..=base.max(1) * 1000 {
        let ok = epsilons.iter().all(|e| {
            let k = *e / span * S::from_count(n);
            (k - k.round()).abs() <= S::lit(1e-7) * S::from_count(n) && k.round() >= S::one()
        });
        if ok {
            return Ok(n);
        }
    }
    Err(Error::validation(
        "epsilons",
        "spike windows cannot be aligned with a simulation grid",
    ))
}

/// Least-squares weights `w` with `sum w_i Delta(eps_i)` the intercept of a line in `eps`.
fn extrapolation_weights<S: Real>(eps: &[S]) -> Vec<S> {
    let n = S::from_count(eps.len());
    if eps.len() == 1 {
        return vec![S::one()];
    }
    let s1: S = eps.iter().copied().sum();
    let s2: S = eps.iter().map(|e| *e * *e).sum();
    let den = n * s2 - s1 * s1;
    eps.iter().map(|e| (s2 - *e * s1) / den).collect()
}

/// Spike-variation test at `(t, x)`.
///
/// The perturbation is open-loop: after the window the perturbed strategy reuses the
/// control values of the base path. With common random numbers the wealth gap then obeys
/// the same linear recursion as the base wealth, so every direction and window is
/// evaluated from one stored base path.
#[allow(clippy::too_many_arguments)]
pub fn spike_test<S: Real, P: Policy<S> + ?Sized>(
    policy: &P,
    m: &MarketModel<S>,
    d: &DiscountFunction<S>,
    u: &Utility<S>,
    t: S,
    x: S,
    directions: &[SpikeDirection<S>],
    epsilons: &[S],
    paths: usize,
    seed: u64,
) -> Result<Vec<SpikeResult<S>>> {
    check_horizons(m, d)?;
    check_state(m, t, x)?;
    let span = m.horizon() - t;
    if epsilons.is_empty() {
        return Err(Error::validation("epsilons", "need at least one window length"));
    }
    if epsilons.iter().any(|e| !(*e > S::zero()) || *e > span) {
        return Err(Error::validation(
            "epsilons",
            format!("window lengths must lie in (0, {span}]"),
        ));
    }
    if epsilons.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::validation("epsilons", "window lengths must be strictly decreasing"));
    }
    let dim = m.dim();
    if directions.iter().any(|v| v.v_u.len() != dim) {
        return Err(Error::validation("directions", format!("investment offsets need {dim} entries")));
    }
    let steps = aligned_steps(default_steps(m, t), span, epsilons)?;
    let spec = SimulationSpec::new(t, x, paths, seed)
        .with_steps(steps)
        .with_floor(u.wealth_floor());
    let engine = Engine::new(policy, m, &spec)?;
    let h = engine.grid.dt();
    let weights = running_weights(&engine.grid, d);
    let terminal = d.value(span);
    // Growth from node k to T.
    let mut suffix = vec![S::one(); steps + 1];
    for k in (0..steps).rev() {
        suffix[k] = suffix[k + 1] * engine.steps[k].growth;
    }
    let windows: Vec<usize> = epsilons
        .iter()
        .map(|e| (*e / span * S::from_count(steps)).round().to_usize().unwrap_or(1))
        .collect();
    let longest = windows[0];
    let n_dir = directions.len();
    let n_eps = epsilons.len();
    let ext_w = extrapolation_weights(epsilons);
    let floor = u.wealth_floor();

    // Per path: n_dir * n_eps values of Delta(eps), or None when flagged.
    let per_path = engine.map_paths(paths, |i| -> Option<Vec<S>> {
        let mut cs = Vec::with_capacity(longest);
        let mut dws = Vec::with_capacity(longest * dim);
        let xt = engine
            .run_path(i, |k, _, c, _, dw| {
                if k < longest {
                    cs.push(c);
                    dws.extend_from_slice(dw);
                }
                Ok(())
            })
            .ok()?;
        let base_h = u.h(xt).ok()?;
        let mut out = vec![S::zero(); n_dir * n_eps];
        for (a, v) in directions.iter().enumerate() {
            let mut gap = S::zero();
            let mut running = S::zero();
            let mut e = n_eps;
            for k in 0..longest {
                let step = &engine.steps[k];
                let c = cs[k];
                let mut drift = -v.v_c;
                let mut noise = S::zero();
                for ii in 0..dim {
                    drift += v.v_u[ii] * step.excess[ii];
                    let mut row = S::zero();
                    for jj in 0..dim {
                        row += step.sigma[ii * dim + jj] * dws[k * dim + jj];
                    }
                    noise += v.v_u[ii] * row;
                }
                gap = step.growth * (gap + drift * h + noise);
                if v.v_c != S::zero() {
                    running += weights[k] * (u.phi(c + v.v_c).ok()? - u.phi(c).ok()?);
                }
                // Record every window ending after step k.
                while e > 0 && windows[e - 1] == k + 1 {
                    e -= 1;
                    let shifted = xt + gap * suffix[k + 1];
                    if let Some(f) = floor {
                        if shifted < f {
                            return None;
                        }
                    }
                    let dj = running + terminal * (u.h(shifted).ok()? - base_h);
                    out[a * n_eps + e] = dj / epsilons[e];
                }
            }
        }
        Some(out)
    });

    let mut results = Vec::with_capacity(n_dir);
    for (a, v) in directions.iter().enumerate() {
        let mut deltas = Vec::with_capacity(n_eps);
        let mut stderrs = Vec::with_capacity(n_eps);
        let mut used = 0;
        let mut flagged = 0;
        for e in 0..n_eps {
            let col: Vec<Option<S>> = per_path.iter().map(|p| p.as_ref().map(|r| r[a * n_eps + e])).collect();
            let (mean, se, nu, nf) = summarize(&col);
            deltas.push(mean);
            stderrs.push(se);
            used = nu;
            flagged = nf;
        }
        if used == 0 {
            return Err(Error::NoAdmissiblePaths { flagged });
        }
        let combined: Vec<Option<S>> = per_path
            .iter()
            .map(|p| {
                p.as_ref()
                    .map(|r| (0..n_eps).map(|e| ext_w[e] * r[a * n_eps + e]).sum())
            })
            .collect();
        let (extrapolated, extrapolated_stderr, _, _) = summarize(&combined);
        results.push(SpikeResult {
            t,
            x,
            direction: v.clone(),
            epsilons: epsilons.to_vec(),
            deltas,
            stderrs,
            extrapolated,
            extrapolated_stderr,
            paths_used: used,
            flagged,
        });
    }
    Ok(results)
}

/// Second-order adjoint `P(s; t)` and the matrix `A` of the spike expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderAdjoint<S> {
    pub t: S,
    pub s: S,
    pub x: S,
    /// `E^s[lambda(T - t) h_xx(X_T) exp(2 int_s^T r0)]`.
    pub p2: S,
    pub stderr: S,
    /// The companion process `Q(s; t)` is not estimated.
    pub q2: Option<Vec<S>>,
    /// Row-major `(d + 1) x (d + 1)`: `diag(lambda(s - t) phi_cc(c), sigma sigma^T P)`.
    pub a: Vec<S>,
    /// Largest eigenvalue of `A`.
    pub max_eigenvalue: S,
    /// Largest eigenvalue of `sigma sigma^T`, to scale the error of the investment block.
    pub gram_scale: S,
}

impl<S: Real> SecondOrderAdjoint<S> {
    /// `P <= 3 stderr`.
    pub fn p2_nonpositive(&self) -> bool {
        self.p2 <= S::lit(3.0) * self.stderr
    }

    /// `A` negative semidefinite up to the sampling error of `P`.
    pub fn negative_semidefinite(&self) -> bool {
        self.max_eigenvalue <= S::lit(3.0) * self.stderr * self.gram_scale
    }

    /// `<A v, v>` for `v = (v_c, v_u)`.
    pub fn quadratic_form(&self, v: &SpikeDirection<S>) -> S {
        let mut full = Vec::with_capacity(v.v_u.len() + 1);
        full.push(v.v_c);
        full.extend_from_slice(&v.v_u);
        let n = full.len();
        linalg::dot(&linalg::mat_vec(&self.a, n, &full), &full)
    }
}

/// Estimates `P(s; t)` by simulation from `(s, x)` and assembles `A`.
#[allow(clippy::too_many_arguments)]
pub fn second_order_form<S: Real, P: Policy<S> + ?Sized>(
    policy: &P,
    m: &MarketModel<S>,
    d: &DiscountFunction<S>,
    u: &Utility<S>,
    t: S,
    s: S,
    x: S,
    paths: usize,
    seed: u64,
) -> Result<SecondOrderAdjoint<S>> {
    check_horizons(m, d)?;
    check_state(m, s, x)?;
    if t > s || t < S::zero() {
        return Err(Error::domain("second-order adjoint", format!("need 0 <= t <= s, got t = {t}, s = {s}")));
    }
    let horizon = m.horizon();
    let lam = d.value(horizon - t);
    let (p2, stderr) = if horizon - s <= m.grid().dt() * S::lit(1e-9) {
        (lam * u.h_xx(x)?, S::zero())
    } else {
        let spec = SimulationSpec::new(s, x, paths, seed).with_floor(u.wealth_floor());
        let engine = Engine::new(policy, m, &spec)?;
        let scale = lam * (S::lit(2.0) * m.integrate_r0(s, horizon)).exp();
        let values = engine.map_paths(paths, |i| {
            let xt = engine.run_path(i, |_, _, _, _, _| Ok(())).ok()?;
            u.h_xx(xt).ok().map(|v| scale * v)
        });
        let (mean, se, used, flagged) = summarize(&values);
        if used == 0 {
            return Err(Error::NoAdmissiblePaths { flagged });
        }
        (mean, se)
    };
    let dim = m.dim();
    let n = dim + 1;
    let c = policy.consumption(s, x)?;
    let gram = linalg::gram(&m.sigma_at(s), dim);
    let mut a = vec![S::zero(); n * n];
    a[0] = d.value(s - t) * u.phi_cc(c)?;
    for i in 0..dim {
        for j in 0..dim {
            a[(i + 1) * n + j + 1] = gram[i * dim + j] * p2;
        }
    }
    let max_eigenvalue = *linalg::symmetric_eigenvalues(&a, n).last().expect("nonempty");
    let gram_scale = *linalg::symmetric_eigenvalues(&gram, dim).last().expect("nonempty");
    Ok(SecondOrderAdjoint {
        t,
        s,
        x,
        p2,
        stderr,
        q2: None,
        a,
        max_eigenvalue,
        gram_scale,
    })
}

/// Settings for a full verification run.
#[derive(Debug, Clone)]
pub struct VerifyOptions<S> {
    pub x0: S,
    /// Defaults to `0, T/4, T/2, 3T/4, T - dt`, snapped to the model grid.
    pub checkpoints: Option<Vec<S>>,
    /// Paths whose median wealth at each checkpoint is used as the state.
    pub reference_paths: usize,
    pub n_outer: usize,
    pub n_inner: usize,
    pub spike_paths: usize,
    /// Window lengths as fractions of `T - t`, decreasing.
    pub epsilon_fractions: Vec<S>,
    /// Magnitude of each coordinate perturbation.
    pub spike_bound: S,
    pub second_order_paths: usize,
    pub seed: u64,
}

impl<S: Real> VerifyOptions<S> {
    pub fn new(x0: S, seed: u64) -> Self {
        VerifyOptions {
            x0,
            checkpoints: None,
            reference_paths: 1000,
            n_outer: 100,
            n_inner: 100,
            spike_paths: 20_000,
            epsilon_fractions: vec![S::lit(0.1), S::lit(0.05), S::lit(0.025)],
            spike_bound: S::lit(0.1),
            second_order_paths: 10_000,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckpointReport<S> {
    pub t: S,
    pub x: S,
    pub theta_residual: Option<ResidualReport<S>>,
    pub mc_adjoint: AdjointEstimate<S>,
    pub mc_residual: ResidualReport<S>,
    pub spikes: Vec<SpikeResult<S>>,
    pub second_order: SecondOrderAdjoint<S>,
}

#[derive(Debug, Clone)]
pub struct EquilibriumReport<S> {
    pub checkpoints: Vec<CheckpointReport<S>>,
    pub verdict: Verdict,
    pub reasons: Vec<String>,
}

impl<S: Real> EquilibriumReport<S> {
    /// Plain-text summary ending in the verdict line.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checkpoints {
            out.push_str(&format!(
                "t = {}, x = {}: R_c(theta) = {}, R_c(mc) = {} (se {}), max spike = {}, P = {} (se {})\n",
                c.t,
                c.x,
                c.theta_residual.as_ref().map_or("n/a".to_string(), |r| format!("{:e}", r.r_c.as_f64())),
                c.mc_residual.r_c,
                c.mc_residual.stderr_c,
                c.spikes.iter().map(|s| s.extrapolated).fold(S::neg_infinity(), S::max),
                c.second_order.p2,
                c.second_order.stderr,
            ));
        }
        for r in &self.reasons {
            out.push_str(r);
            out.push('\n');
        }
        out.push_str(&format!("verdict: {}\n", self.verdict.name()));
        out
    }
}

/// Runs every check at each checkpoint along a reference equilibrium path.
pub fn verify_equilibrium<S: Real, P: Policy<S> + ?Sized>(
    policy: &P,
    m: &MarketModel<S>,
    d: &DiscountFunction<S>,
    u: &Utility<S>,
    opts: &VerifyOptions<S>,
) -> Result<EquilibriumReport<S>> {
    check_horizons(m, d)?;
    let grid = m.grid();
    let n = grid.steps();
    let nodes: Vec<usize> = match &opts.checkpoints {
        Some(ts) => ts
            .iter()
            .map(|t| {
                grid.index_of(*t)
                    .filter(|k| *k < n)
                    .ok_or_else(|| Error::validation("checkpoints", format!("{t} is not a grid node before T")))
            })
            .collect::<Result<_>>()?,
        None => {
            let mut v = vec![0, n / 4, n / 2, 3 * n / 4, n - 1];
            v.dedup();
            v
        }
    };
    let reference = crate::simulate::simulate_paths(
        policy,
        m,
        &SimulationSpec::new(S::zero(), opts.x0, opts.reference_paths, opts.seed)
            .with_floor(u.wealth_floor()),
    )?;
    let mut reports = Vec::with_capacity(nodes.len());
    let mut reasons = Vec::new();
    let mut fail = false;
    let mut inconclusive = false;
    let directions = SpikeDirection::coordinate_set(m.dim(), opts.spike_bound);
    for (ci, &k) in nodes.iter().enumerate() {
        let t = grid.node(k);
        let mut states: Vec<S> = reference
            .paths
            .iter()
            .filter(|p| p.flag.is_none())
            .map(|p| p.wealth[k])
            .collect();
        if states.is_empty() {
            return Err(Error::NoAdmissiblePaths { flagged: reference.paths.len() });
        }
        states.sort_by(|a, b| a.partial_cmp(b).expect("finite wealth"));
        let x = states[states.len() / 2];
        let seed = opts.seed.wrapping_add(1 + ci as u64 * 4);

        let theta_residual = match theta_adjoint(policy, m, d, t, x) {
            Ok(a) => Some(residual_conditions(policy, &a, m, u)?),
            Err(Error::Validation { .. }) => None,
            Err(e) => return Err(e),
        };
        let mc_adjoint = estimate_p_diagonal(policy, m, d, u, t, x, opts.n_outer, opts.n_inner, seed)?;
        let mc_residual = residual_conditions(policy, &mc_adjoint, m, u)?;
        let span = m.horizon() - t;
        let eps: Vec<S> = opts.epsilon_fractions.iter().map(|f| *f * span).collect();
        let spikes = spike_test(policy, m, d, u, t, x, &directions, &eps, opts.spike_paths, seed + 1)?;
        let second_order = second_order_form(policy, m, d, u, t, t, x, opts.second_order_paths, seed + 2)?;

        if let Some(r) = &theta_residual {
            if !r.within(S::lit(1e-6)) {
                fail = true;
                reasons.push(format!("t = {t}: theta-based residual R_c = {} exceeds 1e-6", r.r_c));
            }
        }
        if mc_adjoint.inconclusive {
            inconclusive = true;
            reasons.push(format!("t = {t}: {} of adjoint paths flagged", mc_adjoint.flagged_fraction));
        } else if !mc_residual.within(S::lit(1e-6)) {
            fail = true;
            reasons.push(format!(
                "t = {t}: Monte Carlo residual R_c = {} exceeds 3 standard errors ({})",
                mc_residual.r_c, mc_residual.stderr_c
            ));
        }
        for (j, s) in spikes.iter().enumerate() {
            if s.inconclusive() {
                inconclusive = true;
                reasons.push(format!("t = {t}: spike direction {j} has too many flagged paths"));
            } else if !s.passes() {
                fail = true;
                reasons.push(format!(
                    "t = {t}: spike direction {j} improves the objective, Delta = {} (se {})",
                    s.extrapolated, s.extrapolated_stderr
                ));
            }
        }
        reports.push(CheckpointReport {
            t,
            x,
            theta_residual,
            mc_adjoint,
            mc_residual,
            spikes,
            second_order,
        });
    }
    let verdict = if fail {
        Verdict::Fail
    } else if inconclusive {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    Ok(EquilibriumReport {
        checkpoints: reports,
        verdict,
        reasons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use crate::EquilibriumPolicy;

    fn setup(u: Utility<f64>) -> (MarketModel<f64>, DiscountFunction<f64>, EquilibriumPolicy) {
        let m = MarketModel::constant(TimeGrid::new(1.0, 200).unwrap(), 0.03, &[0.08], &[0.25]).unwrap();
        let d = DiscountFunction::hyperbolic(1.0, 1.0, 1.0).unwrap();
        let p = EquilibriumPolicy::closed_form(&m, &d, &u).unwrap();
        (m, d, p)
    }

    #[test]
    fn extrapolation_weights_fit_lines() {
        let eps = [0.1, 0.05, 0.025];
        let w = extrapolation_weights(&eps);
        let line = |e: f64| 2.0 - 3.0 * e;
        let est: f64 = eps.iter().zip(&w).map(|(e, w)| w * line(*e)).sum();
        assert!((est - 2.0).abs() < 1e-12);
    }

    #[test]
    fn aligned_grid() {
        assert_eq!(aligned_steps(200, 1.0, &[0.1, 0.05, 0.025]).unwrap(), 200);
        assert_eq!(aligned_steps(150, 1.0, &[0.1, 0.05, 0.025]).unwrap(), 160);
    }

    #[test]
    fn theta_residuals_vanish() {
        for u in [
            Utility::power(1.0, 0.5).unwrap(),
            Utility::log(1.0).unwrap(),
            Utility::exponential(1.0, 2.0).unwrap(),
        ] {
            let (m, d, p) = setup(u);
            for t in [0.0, 0.5, 0.995] {
                let a = theta_adjoint(&p, &m, &d, t, 1.3).unwrap();
                let r = residual_conditions(&p, &a, &m, &u).unwrap();
                assert!(r.r_c < 1e-10 && r.r_i.unwrap() < 1e-10, "{u:?} {r:?}");
            }
        }
    }

    #[test]
    fn zero_direction_gives_zero_spike() {
        let u = Utility::power(1.0, 0.5).unwrap();
        let (m, d, p) = setup(u);
        let dirs = SpikeDirection::coordinate_set(1, 0.0);
        let res = spike_test(&p, &m, &d, &u, 0.0, 1.0, &dirs, &[0.1, 0.05], 200, 3).unwrap();
        for r in res {
            assert!(r.deltas.iter().all(|v| *v == 0.0));
            assert_eq!(r.extrapolated_stderr, 0.0);
        }
    }

    #[test]
    fn terminal_adjoint_is_marginal_bequest() {
        let u = Utility::log(2.0).unwrap();
        let (m, d, p) = setup(u);
        let a = estimate_p_diagonal(&p, &m, &d, &u, 1.0, 4.0, 2, 2, 1).unwrap();
        assert_eq!(a.p, 0.5);
        assert_eq!(a.stderr, 0.0);
    }

    #[test]
    fn rejects_increasing_windows() {
        let u = Utility::log(1.0).unwrap();
        let (m, d, p) = setup(u);
        let dirs = SpikeDirection::coordinate_set(1, 0.1);
        assert!(spike_test(&p, &m, &d, &u, 0.0, 1.0, &dirs, &[0.05, 0.1], 10, 1).is_err());
    }
}
