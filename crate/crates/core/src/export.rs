//! CSV writers. Every file has a header row; numbers use the shortest round-trip form.

use std::io::Write;
use std::path::Path;

use crate::compare::DivergenceRow;
use crate::error::Result;
use crate::grid::{GridSeries, TimeGrid};
use crate::pde::ThetaSurface;
use crate::policy::Policy;
use crate::scalar::Real;
use crate::simulate::{ObjectiveEstimate, PathSet};
use crate::verify::{ResidualReport, SpikeResult};

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}

fn num<S: Real>(v: S) -> String {
    v.to_string()
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush()?;
    Ok(())
}

/// `t,value`.
pub fn write_curve<S: Real>(path: &Path, series: &GridSeries<S>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "value"])?;
    for (t, v) in series.grid().nodes().into_iter().zip(series.values()) {
        w.write_record([num(t), num(*v)])?;
    }
    finish(w)
}

/// `t,x,c_hat,u1,...,ud` on the nodes of `grid` times `xs`.
pub fn write_policy<S: Real, P: Policy<S> + ?Sized>(
    path: &Path,
    policy: &P,
    grid: &TimeGrid<S>,
    xs: &[S],
) -> Result<()> {
    let d = policy.dim();
    let mut w = writer(path)?;
    let mut header = vec!["t".to_string(), "x".to_string(), "c_hat".to_string()];
    header.extend((1..=d).map(|i| format!("u{i}")));
    w.write_record(&header)?;
    let mut u = vec![S::zero(); d];
    for t in grid.nodes() {
        for &x in xs {
            let c = policy.consumption(t, x)?;
            policy.investment(t, x, &mut u)?;
            let mut row = vec![num(t), num(x), num(c)];
            row.extend(u.iter().map(|v| num(*v)));
            w.write_record(&row)?;
        }
    }
    finish(w)
}

/// `t,x,theta,theta_x`.
pub fn write_surface<S: Real>(path: &Path, surface: &ThetaSurface<S>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "x", "theta", "theta_x"])?;
    let xs = surface.wealth();
    for (k, t) in surface.grid().nodes().into_iter().enumerate() {
        let (th, thx) = (surface.theta_row(k), surface.theta_x_row(k));
        for j in 0..xs.len() {
            w.write_record([num(t), num(xs[j]), num(th[j]), num(thx[j])])?;
        }
    }
    finish(w)
}

/// `path_id,t,X,c,u1,...,ud`. The terminal row has empty controls; a flagged path stops
/// at its last admissible state.
pub fn write_paths<S: Real>(path: &Path, set: &PathSet<S>) -> Result<()> {
    let d = set.dim;
    let mut w = writer(path)?;
    let mut header = vec!["path_id".to_string(), "t".into(), "X".into(), "c".into()];
    header.extend((1..=d).map(|i| format!("u{i}")));
    w.write_record(&header)?;
    for p in &set.paths {
        for (k, x) in p.wealth.iter().enumerate() {
            let mut row = vec![p.index.to_string(), num(set.grid.node(k)), num(*x)];
            if k < p.consumption.len() {
                row.push(num(p.consumption[k]));
                row.extend(p.investment[k * d..(k + 1) * d].iter().map(|v| num(*v)));
            } else {
                row.extend(std::iter::repeat_n(String::new(), d + 1));
            }
            w.write_record(&row)?;
        }
    }
    finish(w)
}

/// `mean,stderr,n_paths,flagged`.
pub fn write_estimate<S: Real>(path: &Path, est: &ObjectiveEstimate<S>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["mean", "stderr", "n_paths", "flagged"])?;
    w.write_record([
        num(est.mean),
        num(est.stderr),
        est.paths_used.to_string(),
        est.flagged.to_string(),
    ])?;
    finish(w)
}

/// `t,x,R_c,R_I,stderr_c,stderr_I`; the investment columns are empty without `q`.
pub fn write_residuals<S: Real>(path: &Path, reports: &[ResidualReport<S>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "x", "R_c", "R_I", "stderr_c", "stderr_I"])?;
    let opt = |v: Option<S>| v.map(num).unwrap_or_default();
    for r in reports {
        w.write_record([
            num(r.t),
            num(r.x),
            num(r.r_c),
            opt(r.r_i),
            num(r.stderr_c),
            opt(r.stderr_i),
        ])?;
    }
    finish(w)
}

/// `t,v_index,epsilon,delta,stderr`, one row per window and an `epsilon = 0` row holding
/// the extrapolated limit.
pub fn write_spikes<S: Real>(path: &Path, results: &[(usize, &SpikeResult<S>)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "v_index", "epsilon", "delta", "stderr"])?;
    for (j, s) in results {
        for ((e, d), se) in s.epsilons.iter().zip(&s.deltas).zip(&s.stderrs) {
            w.write_record([num(s.t), j.to_string(), num(*e), num(*d), num(*se)])?;
        }
        w.write_record([
            num(s.t),
            j.to_string(),
            num(S::zero()),
            num(s.extrapolated),
            num(s.extrapolated_stderr),
        ])?;
    }
    finish(w)
}

/// `t,family_a,family_b,consumption_gap`.
pub fn write_divergence<S: Real>(path: &Path, rows: &[DivergenceRow<S>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "family_a", "family_b", "consumption_gap"])?;
    for r in rows {
        w.write_record([num(r.t), r.family_a.clone(), r.family_b.clone(), num(r.consumption_gap)])?;
    }
    finish(w)
}
