//! Monte Carlo simulation of controlled wealth.
//!
//! Wealth follows
//! `X_{k+1} = G_k (X_k + (u_k . r_k - c_k) h + u_k^T sigma_k dW_k)` with
//! `G_k = exp(int_{t_k}^{t_{k+1}} r0)`: Euler-Maruyama on the discounted wealth, so the
//! riskless growth is reproduced exactly.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::{DiscountFunction, MarketModel, Utility};
use crate::policy::{AffineSlice, Policy};
use crate::rng::NormalStream;
use crate::scalar::Real;

/// What to simulate.
#[derive(Debug, Clone)]
pub struct SimulationSpec<S> {
    pub t0: S,
    pub x0: S,
    pub paths: usize,
    pub seed: u64,
    /// Number of steps from `t0` to `T`; defaults to the model step size.
    pub steps: Option<usize>,
    /// Paths whose wealth drops below this are flagged.
    pub wealth_floor: Option<S>,
    /// Worker threads; `None` uses the global pool. Results do not depend on it.
    pub threads: Option<usize>,
}

impl<S: Real> SimulationSpec<S> {
    pub fn new(t0: S, x0: S, paths: usize, seed: u64) -> Self {
        SimulationSpec {
            t0,
            x0,
            paths,
            seed,
            steps: None,
            wealth_floor: None,
            threads: None,
        }
    }

    pub fn with_floor(mut self, floor: Option<S>) -> Self {
        self.wealth_floor = floor;
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = Some(steps);
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }
}

/// Why a path was excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFlag {
    pub step: usize,
    pub reason: String,
}

/// One simulated trajectory. Control and increment arrays are row-major `steps x dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthPath<S> {
    pub index: usize,
    pub wealth: Vec<S>,
    pub consumption: Vec<S>,
    pub investment: Vec<S>,
    pub increments: Vec<S>,
    pub flag: Option<PathFlag>,
}

#[derive(Debug, Clone)]
pub struct PathSet<S> {
    pub grid: TimeGrid<S>,
    pub dim: usize,
    pub paths: Vec<WealthPath<S>>,
}

impl<S: Real> PathSet<S> {
    pub fn flagged(&self) -> usize {
        self.paths.iter().filter(|p| p.flag.is_some()).count()
    }
}

/// Sample mean of a per-path quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveEstimate<S> {
    pub t: S,
    pub x: S,
    pub mean: S,
    pub stderr: S,
    pub paths_used: usize,
    pub flagged: usize,
}

impl<S: Real> ObjectiveEstimate<S> {
    pub fn flagged_fraction(&self) -> S {
        S::from_count(self.flagged) / S::from_count(self.flagged + self.paths_used)
    }
}

/// Coefficients on one step of the simulation grid.
pub(crate) struct StepData<S> {
    pub t: S,
    pub growth: S,
    pub excess: Vec<S>,
    pub sigma: Vec<S>,
}

/// Shared machinery: the simulation grid, per-step coefficients and the policy.
pub(crate) struct Engine<'a, S, P: ?Sized> {
    pub policy: &'a P,
    pub grid: TimeGrid<S>,
    pub dim: usize,
    pub steps: Vec<StepData<S>>,
    slices: Vec<Option<AffineSlice<S>>>,
    pub seed: u64,
    pub x0: S,
    pub floor: Option<S>,
    threads: Option<usize>,
}

/// Default step count from `t0` to `T`: the model step size, at least one step.
pub(crate) fn default_steps<S: Real>(m: &MarketModel<S>, t0: S) -> usize {
    let n = ((m.horizon() - t0) / m.grid().dt()).round();
    n.to_usize().unwrap_or(1).max(1)
}

impl<'a, S: Real, P: Policy<S> + ?Sized> Engine<'a, S, P> {
    pub fn new(policy: &'a P, m: &MarketModel<S>, spec: &SimulationSpec<S>) -> Result<Self> {
        if policy.dim() != m.dim() {
            return Err(Error::validation(
                "policy",
                format!("policy has {} assets, market has {}", policy.dim(), m.dim()),
            ));
        }
        if !spec.t0.is_finite() || spec.t0 < S::zero() || spec.t0 >= m.horizon() {
            return Err(Error::domain(
                "simulation",
                format!("start time {} must lie in [0, {})", spec.t0, m.horizon()),
            ));
        }
        if !spec.x0.is_finite() {
            return Err(Error::validation("x0", "initial wealth must be finite"));
        }
        if spec.paths == 0 {
            return Err(Error::validation("paths", "need at least one path"));
        }
        if spec.threads == Some(0) {
            return Err(Error::validation("threads", "need at least one thread"));
        }
        let n = spec.steps.unwrap_or_else(|| default_steps(m, spec.t0));
        let grid = TimeGrid::span(spec.t0, m.horizon(), n)?;
        let steps: Vec<StepData<S>> = (0..n)
            .map(|k| {
                let t = grid.node(k);
                let snap = m.snapshot(t);
                StepData {
                    t,
                    growth: m.integrate_r0(t, grid.node(k + 1)).exp(),
                    excess: snap.excess,
                    sigma: snap.sigma,
                }
            })
            .collect();
        let slices = steps.iter().map(|s| policy.affine_at(s.t)).collect();
        Ok(Engine {
            policy,
            grid,
            dim: m.dim(),
            steps,
            slices,
            seed: spec.seed,
            x0: spec.x0,
            floor: spec.wealth_floor,
            threads: spec.threads,
        })
    }

    /// Controls at step `k` and wealth `x`, written to `u`; returns consumption.
    #[inline]
    fn controls(&self, k: usize, x: S, u: &mut [S]) -> std::result::Result<S, String> {
        match &self.slices[k] {
            Some(s) => {
                s.investment(x, u);
                Ok(s.consumption(x))
            }
            None => {
                let t = self.steps[k].t;
                let c = self.policy.consumption(t, x).map_err(|e| e.to_string())?;
                self.policy.investment(t, x, u).map_err(|e| e.to_string())?;
                Ok(c)
            }
        }
    }

    /// Wealth after step `k`.
    #[inline]
    fn advance(&self, k: usize, x: S, c: S, u: &[S], dw: &[S]) -> std::result::Result<S, PathFlag> {
        let d = self.dim;
        let step = &self.steps[k];
        let h = self.grid.dt();
        let mut drift = -c;
        let mut noise = S::zero();
        for i in 0..d {
            drift += u[i] * step.excess[i];
            let mut row = S::zero();
            for j in 0..d {
                row += step.sigma[i * d + j] * dw[j];
            }
            noise += u[i] * row;
        }
        let next = step.growth * (x + drift * h + noise);
        if !next.is_finite() {
            return Err(PathFlag {
                step: k + 1,
                reason: "wealth is not finite".into(),
            });
        }
        if let Some(floor) = self.floor {
            if next < floor {
                return Err(PathFlag {
                    step: k + 1,
                    reason: format!("wealth {next} below floor {floor}"),
                });
            }
        }
        Ok(next)
    }

    /// Simulates path `index`, calling `visit(k, x_k, c_k, u_k, dW_k)` before every step.
    /// Returns terminal wealth.
    #[inline]
    pub fn run_path<F>(&self, index: usize, mut visit: F) -> std::result::Result<S, PathFlag>
    where
        F: FnMut(usize, S, S, &[S], &[S]) -> std::result::Result<(), String>,
    {
        let d = self.dim;
        let sqrt_h = self.grid.dt().sqrt();
        let mut normals = NormalStream::new(self.seed, index as u64, 0, d);
        let mut z = vec![0.0f64; d];
        let mut dw = vec![S::zero(); d];
        let mut u = vec![S::zero(); d];
        let mut x = self.x0;
        for k in 0..self.steps.len() {
            let flag = |reason: String| PathFlag { step: k, reason };
            let c = self.controls(k, x, &mut u).map_err(flag)?;
            normals.fill(&mut z);
            for (w, zi) in dw.iter_mut().zip(&z) {
                *w = sqrt_h * S::lit(*zi);
            }
            visit(k, x, c, &u, &dw).map_err(flag)?;
            x = self.advance(k, x, c, &u, &dw)?;
        }
        Ok(x)
    }

    /// Terminal wealth of path `index` on this grid and on `coarse`, which has half as
    /// many steps and is driven by the fine increments summed in pairs.
    pub fn run_coupled(
        &self,
        coarse: &Engine<'_, S, P>,
        index: usize,
    ) -> std::result::Result<(S, S), PathFlag> {
        debug_assert_eq!(coarse.steps.len() * 2, self.steps.len());
        let d = self.dim;
        let sqrt_h = self.grid.dt().sqrt();
        let mut normals = NormalStream::new(self.seed, index as u64, 0, d);
        let mut z = vec![0.0f64; d];
        let mut dw = vec![S::zero(); d];
        let mut dw_coarse = vec![S::zero(); d];
        let mut u = vec![S::zero(); d];
        let mut uc = vec![S::zero(); d];
        let (mut x, mut xc) = (self.x0, coarse.x0);
        let mut cc = S::zero();
        for k in 0..self.steps.len() {
            let flag = |reason: String| PathFlag { step: k, reason };
            if k % 2 == 0 {
                cc = coarse.controls(k / 2, xc, &mut uc).map_err(flag)?;
                dw_coarse.iter_mut().for_each(|v| *v = S::zero());
            }
            let c = self.controls(k, x, &mut u).map_err(flag)?;
            normals.fill(&mut z);
            for ((w, wc), zi) in dw.iter_mut().zip(dw_coarse.iter_mut()).zip(&z) {
                *w = sqrt_h * S::lit(*zi);
                *wc += *w;
            }
            x = self.advance(k, x, c, &u, &dw)?;
            if k % 2 == 1 {
                xc = coarse.advance(k / 2, xc, cc, &uc, &dw_coarse)?;
            }
        }
        Ok((x, xc))
    }

    /// Maps every path index in order, in parallel.
    pub fn map_paths<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        let job = || (0..n).into_par_iter().with_min_len(64).map(&f).collect();
        match self.threads {
            Some(t) => rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map(|pool| pool.install(job))
                .unwrap_or_else(|_| job()),
            None => job(),
        }
    }
}

/// Simulates and stores full trajectories.
pub fn simulate_paths<S: Real, P: Policy<S> + ?Sized>(
    p: &P,
    m: &MarketModel<S>,
    spec: &SimulationSpec<S>,
) -> Result<PathSet<S>> {
    let engine = Engine::new(p, m, spec)?;
    let n = engine.grid.steps();
    let d = engine.dim;
    let paths = engine.map_paths(spec.paths, |i| {
        let mut wealth = Vec::with_capacity(n + 1);
        let mut consumption = Vec::with_capacity(n);
        let mut investment = Vec::with_capacity(n * d);
        let mut increments = Vec::with_capacity(n * d);
        let out = engine.run_path(i, |_, x, c, u, dw| {
            wealth.push(x);
            consumption.push(c);
            investment.extend_from_slice(u);
            increments.extend_from_slice(dw);
            Ok(())
        });
        let flag = match out {
            Ok(x) => {
                wealth.push(x);
                None
            }
            Err(f) => Some(f),
        };
        WealthPath {
            index: i,
            wealth,
            consumption,
            investment,
            increments,
            flag,
        }
    });
    Ok(PathSet {
        grid: engine.grid,
        dim: d,
        paths,
    })
}

/// Mean and standard error of per-path values, skipping `None`.
pub(crate) fn summarize<S: Real>(values: &[Option<S>]) -> (S, S, usize, usize) {
    let used: Vec<S> = values.iter().flatten().copied().collect();
    let n = used.len();
    let flagged = values.len() - n;
    if n == 0 {
        return (S::nan(), S::nan(), 0, flagged);
    }
    let mean = used.iter().copied().sum::<S>() / S::from_count(n);
    if n == 1 {
        return (mean, S::zero(), 1, flagged);
    }
    let var = used.iter().map(|v| (*v - mean) * (*v - mean)).sum::<S>() / S::from_count(n - 1);
    (mean, (var / S::from_count(n)).sqrt(), n, flagged)
}

/// Trapezoid weights of `lambda(s - t0)` over each step.
pub(crate) fn running_weights<S: Real>(grid: &TimeGrid<S>, d: &DiscountFunction<S>) -> Vec<S> {
    let h = grid.dt();
    let t0 = grid.start();
    (0..grid.steps())
        .map(|k| {
            S::lit(0.5) * h * (d.value(grid.node(k) - t0) + d.value(grid.node(k + 1) - t0))
        })
        .collect()
}

fn path_objective<S: Real, P: Policy<S> + ?Sized>(
    engine: &Engine<'_, S, P>,
    weights: &[S],
    terminal_weight: S,
    u: &Utility<S>,
    i: usize,
) -> Option<S> {
    let mut running = S::zero();
    let xt = engine
        .run_path(i, |k, _, c, _, _| {
            running += weights[k] * u.phi(c).map_err(|e| e.to_string())?;
            Ok(())
        })
        .ok()?;
    let bequest = u.h(xt).ok()?;
    Some(running + terminal_weight * bequest)
}

fn objective_engine<'a, S: Real, P: Policy<S> + ?Sized>(
    p: &'a P,
    m: &MarketModel<S>,
    d: &DiscountFunction<S>,
    u: &Utility<S>,
    spec: &SimulationSpec<S>,
) -> Result<(Engine<'a, S, P>, Vec<S>, S)> {
    crate::closedform::check_horizons(m, d)?;
    let mut spec = spec.clone();
    if spec.wealth_floor.is_none() {
        spec.wealth_floor = u.wealth_floor();
    }
    let engine = Engine::new(p, m, &spec)?;
    let weights = running_weights(&engine.grid, d);
    let terminal = d.value(m.horizon() - spec.t0);
    Ok((engine, weights, terminal))
}

/// Monte Carlo estimate of `J(t0, x0, p)`.
pub fn estimate_objective<S: Real, P: Policy<S> + ?Sized>(
    p: &P,
    m: &MarketModel<S>,
    d: &DiscountFunction<S>,
    u: &Utility<S>,
    spec: &SimulationSpec<S>,
) -> Result<ObjectiveEstimate<S>> {
    let (engine, weights, terminal) = objective_engine(p, m, d, u, spec)?;
    let values = engine.map_paths(spec.paths, |i| path_objective(&engine, &weights, terminal, u, i));
    finish(spec, &values)
}

/// `J(p1) - J(p2)` with both policies driven by the same increments.
pub fn estimate_difference<S: Real, P1: Policy<S> + ?Sized, P2: Policy<S> + ?Sized>(
    p1: &P1,
    p2: &P2,
    m: &MarketModel<S>,
    d: &DiscountFunction<S>,
    u: &Utility<S>,
    spec: &SimulationSpec<S>,
) -> Result<ObjectiveEstimate<S>> {
    let (e1, weights, terminal) = objective_engine(p1, m, d, u, spec)?;
    let (e2, _, _) = objective_engine(p2, m, d, u, spec)?;
    let values = e1.map_paths(spec.paths, |i| {
        let a = path_objective(&e1, &weights, terminal, u, i)?;
        let b = path_objective(&e2, &weights, terminal, u, i)?;
        Some(a - b)
    });
    finish(spec, &values)
}

fn finish<S: Real>(spec: &SimulationSpec<S>, values: &[Option<S>]) -> Result<ObjectiveEstimate<S>> {
    let (mean, stderr, used, flagged) = summarize(values);
    if used == 0 {
        return Err(Error::NoAdmissiblePaths { flagged });
    }
    Ok(ObjectiveEstimate {
        t: spec.t0,
        x: spec.x0,
        mean,
        stderr,
        paths_used: used,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MarketOptions;
    use crate::curve::Curve;
    use crate::policy::ConstantPolicy;
    use crate::EquilibriumPolicy;

    fn riskless(r0: f64) -> MarketModel<f64> {
        MarketModel::with_options(
            TimeGrid::new(1.0, 200).unwrap(),
            Curve::constant(r0),
            vec![Curve::constant(r0)],
            vec![Curve::constant(0.2)],
            MarketOptions {
                allow_zero_premium: true,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn idle_policy_grows_at_riskless_rate() {
        let m = riskless(0.05);
        let set = simulate_paths(&ConstantPolicy::idle(1), &m, &SimulationSpec::new(0.0, 1.0, 3, 1)).unwrap();
        for p in &set.paths {
            assert!((p.wealth[200] - 0.05f64.exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn idle_policy_is_inadmissible_for_log() {
        let m = riskless(0.05);
        let d = DiscountFunction::exponential(0.1, 1.0).unwrap();
        let u = Utility::log(1.0).unwrap();
        let r = estimate_objective(&ConstantPolicy::idle(1), &m, &d, &u, &SimulationSpec::new(0.0, 1.0, 10, 1));
        assert_eq!(r, Err(Error::NoAdmissiblePaths { flagged: 10 }));
    }

    #[test]
    fn same_policy_difference_is_exactly_zero() {
        let m = MarketModel::constant(TimeGrid::new(1.0, 50).unwrap(), 0.03, &[0.08], &[0.2]).unwrap();
        let d = DiscountFunction::hyperbolic(1.0, 1.0, 1.0).unwrap();
        let u = Utility::log(1.0).unwrap();
        let p = EquilibriumPolicy::closed_form(&m, &d, &u).unwrap();
        let e = estimate_difference(&p, &p, &m, &d, &u, &SimulationSpec::new(0.0, 1.0, 200, 9)).unwrap();
        assert_eq!(e.mean, 0.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let m = MarketModel::constant(TimeGrid::new(1.0, 40).unwrap(), 0.03, &[0.08], &[0.2]).unwrap();
        let d = DiscountFunction::hyperbolic(1.0, 1.0, 1.0).unwrap();
        let u = Utility::power(1.0, 0.5).unwrap();
        let p = EquilibriumPolicy::closed_form(&m, &d, &u).unwrap();
        let spec = SimulationSpec::new(0.0, 1.0, 500, 4);
        let a = estimate_objective(&p, &m, &d, &u, &spec.clone().with_threads(1)).unwrap();
        let b = estimate_objective(&p, &m, &d, &u, &spec.with_threads(3)).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }
}
