//! JSON run configuration.
//!
//! ```json
//! {
//!   "grid": { "T": 1.0, "n": 200 },
//!   "market": { "r0": 0.03, "mu": [0.08], "sigma": [[0.25]] },
//!   "discount": { "type": "hyperbolic", "k": 1.0, "beta": 1.0 },
//!   "utility": { "type": "power", "a": 1.0, "gamma": 0.5 },
//!   "seed": 7
//! }
//! ```
//!
//! Curves (`r0`, entries of `mu` and `sigma`, Karp rates, the compare `delta`) are a
//! number, `{"knots": [...], "values": [...]}`, or `{"intercept": a, "slope": b}` for
//! `a + b t` on `[0, T]`. Unknown fields are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compare::ComparisonFamily;
use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::{DiscountFunction, MarketModel, MarketOptions, Utility};
use crate::pde::PdeOptions;
use crate::verify::VerifyOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CurveSpec {
    Constant(f64),
    Nodes { knots: Vec<f64>, values: Vec<f64> },
    Affine { intercept: f64, slope: f64 },
}

impl CurveSpec {
    pub fn build(&self, horizon: f64) -> Result<Curve<f64>> {
        match self {
            CurveSpec::Constant(v) => {
                if !v.is_finite() {
                    return Err(Error::validation("curve", "value must be finite"));
                }
                Ok(Curve::constant(*v))
            }
            CurveSpec::Nodes { knots, values } => Curve::linear(knots.clone(), values.clone()),
            CurveSpec::Affine { intercept, slope } => Curve::affine(*intercept, *slope, 0.0, horizon),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub r0: CurveSpec,
    pub mu: Vec<CurveSpec>,
    /// Rows of the volatility matrix.
    pub sigma: Vec<Vec<CurveSpec>>,
    #[serde(default)]
    pub allow_zero_premium: bool,
    #[serde(default)]
    pub ellipticity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiscountConfig {
    Exponential { rate: f64 },
    Karp { rate: CurveSpec },
    Hyperbolic { k: f64, beta: f64 },
    Mixture { weights: Vec<f64>, rates: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum UtilityConfig {
    Power {
        #[serde(default = "one")]
        a: f64,
        gamma: f64,
    },
    Log {
        #[serde(default = "one")]
        a: f64,
    },
    Exponential {
        #[serde(default = "one")]
        a: f64,
        gamma: f64,
    },
}

/// The strategy that `simulate` and `verify` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyConfig {
    /// The equilibrium from `solve`.
    #[default]
    Equilibrium,
    /// The equilibrium with consumption multiplied by `factor`.
    ScaledConsumption { factor: f64 },
    Constant { consumption: f64, investment: Vec<f64> },
    /// No consumption, no risky holdings.
    Idle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// Explicit coefficients.
    #[default]
    ClosedForm,
    Pde,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    #[serde(default)]
    pub method: SolveMethod,
    /// Wealth levels of the exported policy slices.
    #[serde(default = "default_x_grid")]
    pub x_grid: Vec<f64>,
    /// Spatial domain of the PDE; defaults to a range around `simulate.x0`.
    #[serde(default)]
    pub pde: Option<PdeConfig>,
}

fn default_x_grid() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            method: SolveMethod::default(),
            x_grid: default_x_grid(),
            pde: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default = "one")]
    pub x0: f64,
    #[serde(default = "default_paths")]
    pub paths: usize,
    /// Paths written to `paths.csv`; the estimate uses all of them.
    #[serde(default = "default_stored")]
    pub stored_paths: usize,
    #[serde(default)]
    pub steps: Option<usize>,
}

fn default_paths() -> usize {
    10_000
}

fn default_stored() -> usize {
    100
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            x0: 1.0,
            paths: default_paths(),
            stored_paths: default_stored(),
            steps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Checkpoint times on the model grid; defaults to five spread over `[0, T)`.
    #[serde(default)]
    pub checkpoints: Option<Vec<f64>>,
    /// Window lengths as fractions of `T - t`, decreasing.
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_nested")]
    pub n_outer: usize,
    #[serde(default = "default_nested")]
    pub n_inner: usize,
    /// Size of each coordinate spike direction.
    #[serde(default = "default_bound")]
    pub direction_bound: f64,
    #[serde(default = "default_spike_paths")]
    pub spike_paths: usize,
    #[serde(default = "default_reference")]
    pub reference_paths: usize,
    #[serde(default = "default_second_order")]
    pub second_order_paths: usize,
}

fn default_epsilons() -> Vec<f64> {
    vec![0.1, 0.05, 0.025]
}
fn default_nested() -> usize {
    100
}
fn default_bound() -> f64 {
    0.1
}
fn default_spike_paths() -> usize {
    20_000
}
fn default_reference() -> usize {
    1000
}
fn default_second_order() -> usize {
    10_000
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            checkpoints: None,
            epsilons: default_epsilons(),
            n_outer: default_nested(),
            n_inner: default_nested(),
            direction_bound: default_bound(),
            spike_paths: default_spike_paths(),
            reference_paths: default_reference(),
            second_order_paths: default_second_order(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub families: Vec<String>,
    /// Time-varying rate for the Karp and feedback families.
    pub delta: CurveSpec,
    /// Rate of the classical families; defaults to `delta(0)`.
    #[serde(default)]
    pub delta0: Option<f64>,
    /// Wealth at which consumption gaps are reported.
    #[serde(default = "one")]
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

/// The whole configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub market: MarketConfig,
    pub discount: DiscountConfig,
    pub utility: UtilityConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub compare: Option<CompareConfig>,
    #[serde(default)]
    pub output: Option<OutputConfig>,
}

/// Model objects built from a validated configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub market: MarketModel<f64>,
    pub discount: DiscountFunction<f64>,
    pub utility: Utility<f64>,
    pub compare: Option<ResolvedCompare>,
}

#[derive(Debug, Clone)]
pub struct ResolvedCompare {
    pub families: Vec<ComparisonFamily>,
    pub delta: Curve<f64>,
    pub delta0: f64,
    pub x: f64,
}

fn check(cond: bool, name: &str, reason: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::validation(name, reason))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::validation("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Pretty JSON of the configuration, with every default filled in.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Validates every section and builds the model.
    pub fn resolve(&self) -> Result<Resolved> {
        let horizon = self.grid.horizon;
        let grid = TimeGrid::new(horizon, self.grid.n)?;
        let d = self.market.mu.len();
        check(d > 0, "market.mu", "need at least one risky asset")?;
        check(
            self.market.sigma.len() == d && self.market.sigma.iter().all(|row| row.len() == d),
            "market.sigma",
            format!("must be a {d} x {d} matrix"),
        )?;
        let r0 = self.market.r0.build(horizon)?;
        let mu = self.market.mu.iter().map(|c| c.build(horizon)).collect::<Result<Vec<_>>>()?;
        let sigma = self
            .market
            .sigma
            .iter()
            .flatten()
            .map(|c| c.build(horizon))
            .collect::<Result<Vec<_>>>()?;
        let mut opts = MarketOptions::default();
        opts.allow_zero_premium = self.market.allow_zero_premium;
        if let Some(e) = self.market.ellipticity {
            opts.ellipticity = e;
        }
        let market = MarketModel::with_options(grid, r0, mu, sigma, opts)?;

        let discount = match &self.discount {
            DiscountConfig::Exponential { rate } => DiscountFunction::exponential(*rate, horizon)?,
            DiscountConfig::Karp { rate } => DiscountFunction::karp(rate.build(horizon)?, horizon)?,
            DiscountConfig::Hyperbolic { k, beta } => DiscountFunction::hyperbolic(*k, *beta, horizon)?,
            DiscountConfig::Mixture { weights, rates } => {
                DiscountFunction::mixture(weights.clone(), rates.clone(), horizon)?
            }
        };
        let utility = match self.utility {
            UtilityConfig::Power { a, gamma } => Utility::power(a, gamma)?,
            UtilityConfig::Log { a } => Utility::log(a)?,
            UtilityConfig::Exponential { a, gamma } => Utility::exponential(a, gamma)?,
        };

        match &self.policy {
            PolicyConfig::ScaledConsumption { factor } => {
                check(factor.is_finite() && *factor >= 0.0, "policy.factor", "must be nonnegative")?
            }
            PolicyConfig::Constant { consumption, investment } => {
                check(consumption.is_finite(), "policy.consumption", "must be finite")?;
                check(
                    investment.len() == d && investment.iter().all(|v| v.is_finite()),
                    "policy.investment",
                    format!("need {d} finite entries"),
                )?;
            }
            PolicyConfig::Equilibrium | PolicyConfig::Idle => {}
        }

        check(!self.solve.x_grid.is_empty(), "solve.x_grid", "must not be empty")?;
        check(
            self.solve.x_grid.iter().all(|x| x.is_finite()),
            "solve.x_grid",
            "entries must be finite",
        )?;
        if utility.wealth_floor().is_some() {
            check(
                self.solve.x_grid.iter().all(|x| *x > 0.0),
                "solve.x_grid",
                "wealth must be positive for this utility",
            )?;
        }
        if let Some(p) = &self.solve.pde {
            check(
                p.x_min.is_finite() && p.x_max > p.x_min,
                "solve.pde",
                "need x_min < x_max",
            )?;
            check(p.intervals >= 4, "solve.pde.intervals", "need at least 4")?;
        }

        let s = &self.simulate;
        check(s.x0.is_finite(), "simulate.x0", "must be finite")?;
        if utility.wealth_floor().is_some() {
            check(s.x0 > 0.0, "simulate.x0", "must be positive for this utility")?;
        }
        check(s.paths > 0, "simulate.paths", "need at least one path")?;
        check(s.steps != Some(0), "simulate.steps", "need at least one step")?;

        let v = &self.verify;
        check(!v.epsilons.is_empty(), "verify.epsilons", "need at least one window")?;
        check(
            v.epsilons.iter().all(|e| *e > 0.0 && *e <= 1.0),
            "verify.epsilons",
            "fractions must lie in (0, 1]",
        )?;
        check(
            v.epsilons.windows(2).all(|w| w[1] < w[0]),
            "verify.epsilons",
            "must be strictly decreasing",
        )?;
        check(v.n_outer > 0 && v.n_inner > 0, "verify", "n_outer and n_inner must be positive")?;
        check(
            v.spike_paths > 0 && v.reference_paths > 0 && v.second_order_paths > 0,
            "verify",
            "path counts must be positive",
        )?;
        check(
            v.direction_bound.is_finite() && v.direction_bound >= 0.0,
            "verify.direction_bound",
            "must be nonnegative",
        )?;
        if let Some(cps) = &v.checkpoints {
            check(!cps.is_empty(), "verify.checkpoints", "must not be empty")?;
            for t in cps {
                check(
                    market.grid().index_of(*t).is_some_and(|k| k < self.grid.n),
                    "verify.checkpoints",
                    format!("{t} is not a grid node before T"),
                )?;
            }
        }

        let compare = match &self.compare {
            None => None,
            Some(c) => {
                check(!c.families.is_empty(), "compare.families", "must not be empty")?;
                let families = c
                    .families
                    .iter()
                    .map(|f| f.parse::<ComparisonFamily>())
                    .collect::<Result<Vec<_>>>()?;
                if let Some(f) = families.iter().find(|f| f.utility_family() != utility.family()) {
                    return Err(Error::validation(
                        "compare.families",
                        format!("{f} needs {} utility", f.utility_family().name()),
                    ));
                }
                let delta = c.delta.build(horizon)?;
                check(delta.min_value() >= 0.0, "compare.delta", "rate must be nonnegative")?;
                let delta0 = c.delta0.unwrap_or_else(|| delta.eval(0.0));
                check(delta0.is_finite() && delta0 >= 0.0, "compare.delta0", "must be nonnegative")?;
                check(c.x.is_finite(), "compare.x", "must be finite")?;
                if utility.wealth_floor().is_some() || families.contains(&ComparisonFamily::NaiveLog) {
                    check(c.x > 0.0, "compare.x", "must be positive")?;
                }
                Some(ResolvedCompare {
                    families,
                    delta,
                    delta0,
                    x: c.x,
                })
            }
        };

        Ok(Resolved {
            market,
            discount,
            utility,
            compare,
        })
    }

    pub fn verify_options(&self) -> VerifyOptions<f64> {
        let v = &self.verify;
        let mut o = VerifyOptions::new(self.simulate.x0, self.seed);
        o.checkpoints = v.checkpoints.clone();
        o.epsilon_fractions = v.epsilons.clone();
        o.n_outer = v.n_outer;
        o.n_inner = v.n_inner;
        o.spike_bound = v.direction_bound;
        o.spike_paths = v.spike_paths;
        o.reference_paths = v.reference_paths;
        o.second_order_paths = v.second_order_paths;
        o
    }

    pub fn pde_options(&self, utility: &Utility<f64>) -> PdeOptions<f64> {
        match &self.solve.pde {
            Some(p) => {
                let mut o = PdeOptions::around(utility, self.simulate.x0, p.intervals);
                o.x_min = p.x_min;
                o.x_max = p.x_max;
                o
            }
            None => PdeOptions::around(utility, self.simulate.x0, 200),
        }
    }
}
