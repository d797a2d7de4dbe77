use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use merton_equilibrium::closedform::Coefficients;
use merton_equilibrium::compare::{self, ComparisonPolicy};
use merton_equilibrium::config::{PolicyConfig, Resolved, RunConfig, SolveMethod};
use merton_equilibrium::equilibrium::Backing;
use merton_equilibrium::pde::solve_theta;
use merton_equilibrium::policy::{ConstantPolicy, Policy, ScaledConsumption};
use merton_equilibrium::simulate::{estimate_objective, simulate_paths, SimulationSpec};
use merton_equilibrium::verify::{verify_equilibrium, Verdict};
use merton_equilibrium::{export, EquilibriumPolicy, Error};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "merton-eq", version, about = "Equilibrium consumption-investment under non-exponential discounting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `output.dir` (default `out`).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Overrides `simulate.paths` and `verify.spike_paths`.
    #[arg(long, global = true)]
    paths: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve for the equilibrium and export coefficients and policy slices.
    Solve,
    /// Simulate wealth under the configured policy and estimate the objective.
    Simulate,
    /// Check the equilibrium conditions and spike variations along a reference path.
    Verify,
    /// Evaluate benchmark strategies and their consumption gaps.
    Compare,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Simulate => "simulate",
            Command::Verify => "verify",
            Command::Compare => "compare",
        }
    }
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_FAIL: u8 = 3;
const EXIT_INCONCLUSIVE: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    if e.is_validation() || matches!(e, Error::Io(_)) {
        EXIT_VALIDATION
    } else {
        EXIT_SOLVER
    }
}

/// Files written so far plus extra manifest entries.
struct Run {
    dir: PathBuf,
    files: Vec<String>,
    extra: BTreeMap<String, Value>,
}

impl Run {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), Error> {
        std::fs::write(self.path(name), body)?;
        Ok(())
    }

    fn manifest(&self, command: Command, config: &RunConfig) -> Result<(), Error> {
        let mut files = self.files.clone();
        files.sort();
        files.dedup();
        let mut hashes = BTreeMap::new();
        for f in &files {
            let bytes = std::fs::read(self.dir.join(f))?;
            hashes.insert(f.clone(), hex::encode(Sha256::digest(&bytes)));
        }
        let config_value: Value = serde_json::from_str(&config.to_json()).expect("valid json");
        let manifest = json!({
            "command": command.name(),
            "seed": config.seed,
            "config": config_value,
            "files": hashes,
            "results": self.extra,
        });
        let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        std::fs::write(self.dir.join("manifest.json"), body)?;
        Ok(())
    }
}

fn equilibrium(config: &RunConfig, r: &Resolved) -> Result<EquilibriumPolicy, Error> {
    match config.solve.method {
        SolveMethod::ClosedForm => EquilibriumPolicy::closed_form(&r.market, &r.discount, &r.utility),
        SolveMethod::Pde => {
            let opts = config.pde_options(&r.utility);
            let surface = solve_theta(&r.market, &r.discount, &r.utility, &opts)?;
            EquilibriumPolicy::from_theta(surface, &r.market, &r.discount, &r.utility)
        }
    }
}

fn chosen_policy(config: &RunConfig, r: &Resolved) -> Result<Box<dyn Policy<f64>>, Error> {
    Ok(match &config.policy {
        PolicyConfig::Equilibrium => Box::new(equilibrium(config, r)?),
        PolicyConfig::ScaledConsumption { factor } => Box::new(ScaledConsumption {
            base: equilibrium(config, r)?,
            factor: *factor,
        }),
        PolicyConfig::Constant {
            consumption,
            investment,
        } => Box::new(ConstantPolicy {
            consumption: *consumption,
            investment: investment.clone(),
        }),
        PolicyConfig::Idle => Box::new(ConstantPolicy::idle(r.market.dim())),
    })
}

fn solve(config: &RunConfig, r: &Resolved, run: &mut Run) -> Result<u8, Error> {
    let policy = equilibrium(config, r)?;
    match policy.backing() {
        Backing::ClosedForm(Coefficients::Power(c)) => export::write_curve(&run.path("pi.csv"), &c.pi)?,
        Backing::ClosedForm(Coefficients::Log(c)) => export::write_curve(&run.path("varphi.csv"), &c.varphi)?,
        Backing::ClosedForm(Coefficients::Exponential(c)) => {
            export::write_curve(&run.path("phi.csv"), &c.phi)?;
            export::write_curve(&run.path("psi.csv"), &c.psi)?;
        }
        Backing::Theta(s) => {
            export::write_surface(&run.path("surface.csv"), s)?;
            let report = s.diagnostics().report();
            run.text("pde_report.txt", &report)?;
            run.extra.insert(
                "max_pde_residual".into(),
                json!(s.diagnostics().max_pde_residual()),
            );
        }
    }
    export::write_policy(&run.path("policy.csv"), &policy, r.market.grid(), &config.solve.x_grid)?;
    Ok(0)
}

fn simulate(config: &RunConfig, r: &Resolved, run: &mut Run) -> Result<u8, Error> {
    let policy = chosen_policy(config, r)?;
    let s = &config.simulate;
    let mut spec = SimulationSpec::new(0.0, s.x0, s.paths, config.seed).with_floor(r.utility.wealth_floor());
    if let Some(n) = s.steps {
        spec = spec.with_steps(n);
    }
    let mut stored = spec.clone();
    stored.paths = s.stored_paths.min(s.paths).max(1);
    let set = simulate_paths(&*policy, &r.market, &stored)?;
    export::write_paths(&run.path("paths.csv"), &set)?;
    match estimate_objective(&*policy, &r.market, &r.discount, &r.utility, &spec) {
        Ok(est) => {
            export::write_estimate(&run.path("estimate.csv"), &est)?;
            run.extra.insert("flagged_fraction".into(), json!(est.flagged_fraction()));
            Ok(0)
        }
        Err(Error::NoAdmissiblePaths { flagged }) => {
            run.extra.insert("flagged_fraction".into(), json!(1.0));
            eprintln!("error: all {flagged} paths were flagged, no objective estimate");
            Ok(EXIT_INCONCLUSIVE)
        }
        Err(e) => Err(e),
    }
}

fn verify(config: &RunConfig, r: &Resolved, run: &mut Run) -> Result<u8, Error> {
    let policy = chosen_policy(config, r)?;
    let opts = config.verify_options();
    let report = verify_equilibrium(&*policy, &r.market, &r.discount, &r.utility, &opts)?;
    let mc: Vec<_> = report.checkpoints.iter().map(|c| c.mc_residual.clone()).collect();
    export::write_residuals(&run.path("residuals.csv"), &mc)?;
    let theta: Vec<_> = report.checkpoints.iter().filter_map(|c| c.theta_residual.clone()).collect();
    if !theta.is_empty() {
        export::write_residuals(&run.path("residuals_theta.csv"), &theta)?;
    }
    let spikes: Vec<_> = report
        .checkpoints
        .iter()
        .flat_map(|c| c.spikes.iter().enumerate())
        .collect();
    export::write_spikes(&run.path("spikes.csv"), &spikes)?;
    let summary = report.summary();
    run.text("summary.txt", &summary)?;
    run.extra.insert("verdict".into(), json!(report.verdict.name()));
    let flagged = report
        .checkpoints
        .iter()
        .map(|c| c.mc_adjoint.flagged_fraction)
        .fold(0.0, f64::max);
    run.extra.insert("max_flagged_fraction".into(), json!(flagged));
    println!("verdict: {}", report.verdict.name());
    Ok(match report.verdict {
        Verdict::Pass => 0,
        Verdict::Fail => EXIT_FAIL,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    })
}

fn compare(config: &RunConfig, r: &Resolved, run: &mut Run) -> Result<u8, Error> {
    let c = r.compare.as_ref().ok_or_else(|| Error::validation("compare", "section missing"))?;
    let mut built: Vec<ComparisonPolicy<f64>> = Vec::new();
    let mut failures = BTreeMap::new();
    for &family in &c.families {
        match compare::build_family(family, &r.market, &r.discount, &r.utility, c.delta0, &c.delta) {
            Ok(p) => {
                export::write_policy(
                    &run.path(&format!("policy_{family}.csv")),
                    &p,
                    r.market.grid(),
                    &config.solve.x_grid,
                )?;
                if let Some(fp) = p.fixed_point() {
                    run.extra.insert(format!("{family}_iterations"), json!(fp.iterations));
                }
                built.push(p);
            }
            Err(e) if e.is_validation() => return Err(e),
            Err(e) => {
                eprintln!("warning: {family}: {e}");
                failures.insert(family.name().to_string(), e.to_string());
            }
        }
    }
    let mut rows = Vec::new();
    let mut max_u_gap = 0.0f64;
    let grid = r.market.grid();
    let d = r.market.dim();
    for (i, a) in built.iter().enumerate() {
        for b in &built[i + 1..] {
            rows.extend(compare::consumption_divergence(a, b, grid, c.x)?);
            let (mut ua, mut ub) = (vec![0.0; d], vec![0.0; d]);
            for t in grid.nodes() {
                a.investment(t, c.x, &mut ua)?;
                b.investment(t, c.x, &mut ub)?;
                for (p, q) in ua.iter().zip(&ub) {
                    max_u_gap = max_u_gap.max((p - q).abs());
                }
            }
        }
    }
    export::write_divergence(&run.path("divergence.csv"), &rows)?;
    run.extra.insert("max_consumption_gap".into(), json!(compare::max_gap(&rows)));
    run.extra.insert("max_investment_gap".into(), json!(max_u_gap));
    if !failures.is_empty() {
        run.extra.insert("failures".into(), json!(failures));
        return Ok(EXIT_SOLVER);
    }
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Error> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::validation("--config", "a configuration file is required"))?;
    let mut config = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(n) = cli.paths {
        config.simulate.paths = n;
        config.verify.spike_paths = n;
    }
    let dir = cli
        .out_dir
        .or_else(|| config.output.as_ref().map(|o| o.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    config.output = Some(merton_equilibrium::config::OutputConfig { dir: dir.clone() });
    let resolved = config.resolve()?;
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut out = Run {
        dir,
        files: Vec::new(),
        extra: BTreeMap::new(),
    };
    let result = match cli.command {
        Command::Solve => solve(&config, &resolved, &mut out),
        Command::Simulate => simulate(&config, &resolved, &mut out),
        Command::Verify => verify(&config, &resolved, &mut out),
        Command::Compare => compare(&config, &resolved, &mut out),
    };
    let code = result?;
    out.manifest(cli.command, &config)?;
    Ok(code)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
