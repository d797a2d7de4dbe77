//! Finite-difference solver for the nonlinear equation satisfied by `theta`.
//!
//! Backward in time with BDF2 (first step backward Euler), each implicit step solved by
//! damped Newton on a tridiagonal Jacobian. Power and log utility are discretized in
//! `xi = ln x`, exponential utility in `x`.

use crate::closedform::{self, Coefficients};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::{DiscountFunction, MarketModel, Utility, UtilityFamily};
use crate::scalar::Real;

/// Spatial coordinate of the finite-difference grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpatialCoordinate {
    /// Uniform in `ln x`.
    Log,
    /// Uniform in `x`.
    Linear,
}

/// How the two boundary values are closed at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    /// `ln theta` extrapolated linearly from the two nearest interior nodes.
    LogLinear,
    /// Values taken from the explicit separable solution.
    Dirichlet,
}

#[derive(Debug, Clone)]
pub struct PdeOptions<S> {
    pub x_min: S,
    pub x_max: S,
    /// Number of spatial intervals.
    pub intervals: usize,
    /// Defaults to `Log` for positive-wealth utilities and `Linear` otherwise.
    pub coordinate: Option<SpatialCoordinate>,
    pub boundary: BoundaryCondition,
    /// Relative residual at which Newton stops.
    pub newton_tol: S,
    pub max_newton: usize,
}

impl<S: Real> PdeOptions<S> {
    /// Domain centred on initial wealth `x0`.
    pub fn around(u: &Utility<S>, x0: S, intervals: usize) -> Self {
        let (x_min, x_max) = match u {
            Utility::Exponential { gamma, .. } => {
                let w = S::lit(5.0) / *gamma;
                (x0 - w, x0 + w)
            }
            _ => (x0 * S::lit(0.05), x0 * S::lit(20.0)),
        };
        PdeOptions {
            x_min,
            x_max,
            intervals,
            coordinate: None,
            boundary: BoundaryCondition::LogLinear,
            newton_tol: S::lit(1e-10),
            max_newton: 50,
        }
    }
}

/// Convergence record of one implicit step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport<S> {
    pub t: S,
    pub newton_iterations: usize,
    /// `max_j |F_j| / |theta_j|` of the nonlinear system.
    pub relative_residual: S,
    /// `max_j |F_j| / (beta dt)`, the residual of the discrete equation itself.
    pub pde_residual: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeDiagnostics<S> {
    pub steps: Vec<StepReport<S>>,
    /// Largest cell Peclet number seen.
    pub max_peclet: S,
    /// Largest `D dt / h^2`.
    pub max_diffusion_number: S,
    pub warnings: Vec<String>,
}

impl<S: Real> PdeDiagnostics<S> {
    pub fn max_pde_residual(&self) -> S {
        self.steps.iter().map(|s| s.pde_residual).fold(S::zero(), S::max)
    }

    /// Plain-text summary.
    pub fn report(&self) -> String {
        let iters: usize = self.steps.iter().map(|s| s.newton_iterations).sum();
        let worst_iters = self.steps.iter().map(|s| s.newton_iterations).max().unwrap_or(0);
        let mut out = format!(
            "steps: {}\nnewton iterations: {iters} total, {worst_iters} max per step\nmax relative residual: {:e}\nmax pde residual: {:e}\nmax cell peclet: {}\nmax diffusion number: {}\n",
            self.steps.len(),
            self.steps.iter().map(|s| s.relative_residual).fold(S::zero(), S::max).as_f64(),
            self.max_pde_residual().as_f64(),
            self.max_peclet.as_f64(),
            self.max_diffusion_number.as_f64(),
        );
        for w in &self.warnings {
            out.push_str("warning: ");
            out.push_str(w);
            out.push('\n');
        }
        out
    }
}

/// `theta` and `theta_x` on a time-by-space grid.
#[derive(Debug, Clone)]
pub struct ThetaSurface<S> {
    grid: TimeGrid<S>,
    coordinate: SpatialCoordinate,
    z: Vec<S>,
    x: Vec<S>,
    /// Row `k` holds time node `k`.
    theta: Vec<S>,
    theta_x: Vec<S>,
    diagnostics: PdeDiagnostics<S>,
}

impl<S: Real> ThetaSurface<S> {
    pub fn grid(&self) -> &TimeGrid<S> {
        &self.grid
    }

    pub fn coordinate(&self) -> SpatialCoordinate {
        self.coordinate
    }

    /// Wealth nodes.
    pub fn wealth(&self) -> &[S] {
        &self.x
    }

    pub fn width(&self) -> usize {
        self.x.len()
    }

    /// `theta` at time node `k`.
    pub fn theta_row(&self, k: usize) -> &[S] {
        let w = self.width();
        &self.theta[k * w..(k + 1) * w]
    }

    pub fn theta_x_row(&self, k: usize) -> &[S] {
        let w = self.width();
        &self.theta_x[k * w..(k + 1) * w]
    }

    pub fn diagnostics(&self) -> &PdeDiagnostics<S> {
        &self.diagnostics
    }

    fn coord(&self, x: S) -> S {
        match self.coordinate {
            SpatialCoordinate::Log => x.ln(),
            SpatialCoordinate::Linear => x,
        }
    }

    /// `(theta, theta_x)` at an arbitrary point inside the grid.
    ///
    /// Interpolates `ln |theta|` and `ln |theta_x|` linearly in the spatial coordinate and
    /// the values linearly in time; both are exact for separable solutions in space.
    pub fn theta_at(&self, t: S, x: S) -> Result<(S, S)> {
        let out = || Error::Extrapolation {
            t: t.as_f64(),
            x: x.as_f64(),
        };
        if !t.is_finite() || !x.is_finite() || !self.grid.contains(t) {
            return Err(out());
        }
        if self.coordinate == SpatialCoordinate::Log && x <= S::zero() {
            return Err(out());
        }
        let z = self.coord(x);
        let m = self.z.len() - 1;
        let hz = self.z[1] - self.z[0];
        let tol = hz * S::lit(1e-9);
        if z < self.z[0] - tol || z > self.z[m] + tol {
            return Err(out());
        }
        let pos = ((z - self.z[0]) / hz).max(S::zero());
        let j = pos.floor().to_usize().unwrap_or(m - 1).min(m - 1);
        let wz = (pos - S::from_count(j)).min(S::one());
        let (k, wt) = self.grid.locate(t);
        let w = self.width();
        let at = |data: &[S], row: usize| {
            let (a, b) = (data[row * w + j], data[row * w + j + 1]);
            log_lerp(a, b, wz)
        };
        let th0 = at(&self.theta, k);
        let tx0 = at(&self.theta_x, k);
        if wt == S::zero() || k == self.grid.steps() {
            return Ok((th0, tx0));
        }
        let th1 = at(&self.theta, k + 1);
        let tx1 = at(&self.theta_x, k + 1);
        Ok((th0 + wt * (th1 - th0), tx0 + wt * (tx1 - tx0)))
    }
}

fn log_lerp<S: Real>(a: S, b: S, w: S) -> S {
    if w == S::zero() {
        return a;
    }
    if a * b > S::zero() {
        a.signum() * (a.abs().ln() + w * (b.abs().ln() - a.abs().ln())).exp()
    } else {
        a + w * (b - a)
    }
}

struct Workspace<S> {
    utility: Utility<S>,
    coordinate: SpatialCoordinate,
    x: Vec<S>,
    /// First-derivative weights (left, right); the centre weight is zero.
    alpha: S,
    /// Second-derivative weights (side, centre) after the coordinate correction.
    b_side: (S, S),
    b_centre: S,
}

/// Operator values at one time level.
struct Level<S> {
    r0: S,
    k: S,
    lambda: S,
}

impl<S: Real> Workspace<S> {
    /// Evaluates `N_j` and, when `jac` is given, the row `(d/d theta_{j-1}, d/d theta_j, d/d theta_{j+1})`.
    #[inline]
    fn node(&self, lv: &Level<S>, j: usize, tl: S, tc: S, tr: S) -> Result<(S, [S; 3], S, S)> {
        let g = self.alpha * (tr - tl);
        let s = self.b_side.0 * tl + self.b_centre * tc + self.b_side.1 * tr;
        let xj = self.x[j];
        let slope = match self.coordinate {
            SpatialCoordinate::Log => g / xj,
            SpatialCoordinate::Linear => g,
        };
        if !(slope.abs() >= S::lit(crate::equilibrium::DEGENERACY_THRESHOLD)) {
            return Err(Error::Degeneracy {
                t: S::zero().as_f64(),
                x: xj.as_f64(),
            });
        }
        let y = lv.lambda * tc;
        if !(y > S::zero()) {
            return Err(Error::Solvability {
                t: f64::NAN,
                reason: format!("theta lost positivity at x = {xj}"),
            });
        }
        let c = self.utility.inverse_marginal_raw(y);
        let dc = self.utility.inverse_marginal_deriv(y) * lv.lambda;
        let (b, db) = match self.coordinate {
            SpatialCoordinate::Log => (lv.r0 - c / xj, -dc / xj),
            SpatialCoordinate::Linear => (lv.r0 * xj - c, -dc),
        };
        let half = S::lit(0.5);
        let g2 = g * g;
        let diff = half * lv.k * tc * tc / g2;
        let n = diff * s + b * g + (lv.r0 - lv.k) * tc;
        // d/d theta_m of diff * s: D beta_m - 2 D s alpha_m / g, plus the theta_j term.
        let dl = diff * self.b_side.0 + (S::lit(2.0) * diff * s / g - b) * self.alpha;
        let dr = diff * self.b_side.1 - (S::lit(2.0) * diff * s / g - b) * self.alpha;
        let dcen = lv.k * tc * s / g2 + diff * self.b_centre + db * g + (lv.r0 - lv.k);
        Ok((n, [dl, dcen, dr], diff, b))
    }
}

/// Solves the `theta` equation backward from `theta(T, x) = h_x(x)`.
pub fn solve_theta<S: Real>(
    m: &MarketModel<S>,
    d: &DiscountFunction<S>,
    u: &Utility<S>,
    opts: &PdeOptions<S>,
) -> Result<ThetaSurface<S>> {
    closedform::check_horizons(m, d)?;
    let family = u.family();
    let coordinate = opts.coordinate.unwrap_or(match family {
        UtilityFamily::Exponential => SpatialCoordinate::Linear,
        _ => SpatialCoordinate::Log,
    });
    if opts.intervals < 4 {
        return Err(Error::validation("pde.intervals", "need at least 4 spatial intervals"));
    }
    if !(opts.x_max > opts.x_min) || !opts.x_min.is_finite() || !opts.x_max.is_finite() {
        return Err(Error::validation("pde.x_range", "need finite x_min < x_max"));
    }
    if (family != UtilityFamily::Exponential || coordinate == SpatialCoordinate::Log)
        && !(opts.x_min > S::zero())
    {
        return Err(Error::validation(
            "pde.x_min",
            format!("wealth domain must be positive for this utility, got {}", opts.x_min),
        ));
    }
    if !(opts.newton_tol > S::zero()) || opts.max_newton == 0 {
        return Err(Error::validation("pde.newton", "tolerance and iteration cap must be positive"));
    }

    let mm = opts.intervals;
    let (z0, z1) = match coordinate {
        SpatialCoordinate::Log => (opts.x_min.ln(), opts.x_max.ln()),
        SpatialCoordinate::Linear => (opts.x_min, opts.x_max),
    };
    let hz = (z1 - z0) / S::from_count(mm);
    let z: Vec<S> = (0..=mm)
        .map(|j| if j == mm { z1 } else { z0 + hz * S::from_count(j) })
        .collect();
    let x: Vec<S> = match coordinate {
        SpatialCoordinate::Log => z.iter().map(|v| v.exp()).collect(),
        SpatialCoordinate::Linear => z.clone(),
    };
    let two = S::lit(2.0);
    let alpha = (two * hz).recip();
    let beta = (hz * hz).recip();
    let (b_side, b_centre) = match coordinate {
        // theta_xixi - theta_xi
        SpatialCoordinate::Log => ((beta + alpha, beta - alpha), -two * beta),
        SpatialCoordinate::Linear => ((beta, beta), -two * beta),
    };
    let ws = Workspace {
        utility: *u,
        coordinate,
        x: x.clone(),
        alpha,
        b_side,
        b_centre,
    };

    let dirichlet = match opts.boundary {
        BoundaryCondition::Dirichlet => Some(closedform::solve(m, d, u)?),
        BoundaryCondition::LogLinear => None,
    };

    let grid = *m.grid();
    let n = grid.steps();
    let dt = grid.dt();
    let horizon = m.horizon();
    let width = mm + 1;
    let mut theta = vec![S::zero(); (n + 1) * width];
    for j in 0..width {
        theta[n * width + j] = u.h_x(x[j])?;
    }

    let mut steps = Vec::with_capacity(n);
    let mut max_peclet = S::zero();
    let mut max_diffusion = S::zero();
    let inner = mm - 1;
    let mut f = vec![S::zero(); inner];
    let mut lower = vec![S::zero(); inner];
    let mut diag = vec![S::zero(); inner];
    let mut upper = vec![S::zero(); inner];
    let mut delta = vec![S::zero(); inner];
    let mut trial = vec![S::zero(); width];

    for k in (0..n).rev() {
        let t = grid.node(k);
        let snap = m.snapshot(t);
        let lv = Level {
            r0: snap.r0,
            k: snap.premium,
            lambda: d.value(horizon - t),
        };
        let bdf2 = k + 2 <= n;
        let (coef, rhs): (S, Vec<S>) = if bdf2 {
            let a = &theta[(k + 1) * width..(k + 2) * width];
            let b = &theta[(k + 2) * width..(k + 3) * width];
            (
                two / S::lit(3.0) * dt,
                a.iter()
                    .zip(b)
                    .map(|(p, q)| (S::lit(4.0) * *p - *q) / S::lit(3.0))
                    .collect(),
            )
        } else {
            (dt, theta[(k + 1) * width..(k + 2) * width].to_vec())
        };
        let boundary = |cur: &mut [S]| match &dirichlet {
            Some(c) => {
                cur[0] = separable_theta(c, t, x[0]);
                cur[mm] = separable_theta(c, t, x[mm]);
            }
            None => {
                cur[0] = cur[1] * cur[1] / cur[2];
                cur[mm] = cur[mm - 1] * cur[mm - 1] / cur[mm - 2];
            }
        };
        let mut cur: Vec<S> = theta[(k + 1) * width..(k + 2) * width].to_vec();
        boundary(&mut cur);

        let attach_t = |e: Error| match e {
            Error::Degeneracy { x, .. } => Error::Degeneracy { t: t.as_f64(), x },
            Error::Solvability { reason, .. } => Error::Solvability {
                t: t.as_f64(),
                reason,
            },
            other => other,
        };
        let eval = |cur: &[S], f: &mut [S], jac: Option<(&mut [S], &mut [S], &mut [S])>| -> Result<S> {
            let mut worst = S::zero();
            let mut rows = jac;
            for j in 1..mm {
                let (nj, dn, _, _) = ws.node(&lv, j, cur[j - 1], cur[j], cur[j + 1]).map_err(attach_t)?;
                let fj = cur[j] - coef * nj - rhs[j];
                f[j - 1] = fj;
                worst = worst.max((fj / cur[j]).abs());
                if let Some((lo, di, up)) = rows.as_mut() {
                    let i = j - 1;
                    let mut row = [-coef * dn[0], S::one() - coef * dn[1], -coef * dn[2]];
                    if dirichlet.is_none() {
                        if j == 1 {
                            // theta_0 = theta_1^2 / theta_2
                            row[1] += row[0] * two * cur[1] / cur[2];
                            row[2] -= row[0] * cur[1] * cur[1] / (cur[2] * cur[2]);
                            row[0] = S::zero();
                        }
                        if j == mm - 1 {
                            let (a, b) = (cur[mm - 1], cur[mm - 2]);
                            row[1] += row[2] * two * a / b;
                            row[0] -= row[2] * a * a / (b * b);
                            row[2] = S::zero();
                        }
                    } else {
                        if j == 1 {
                            row[0] = S::zero();
                        }
                        if j == mm - 1 {
                            row[2] = S::zero();
                        }
                    }
                    lo[i] = row[0];
                    di[i] = row[1];
                    up[i] = row[2];
                }
            }
            Ok(worst)
        };

        let mut res = eval(&cur, &mut f, Some((&mut lower, &mut diag, &mut upper)))?;
        let mut iterations = 0;
        while res > opts.newton_tol {
            if iterations == opts.max_newton {
                return Err(Error::Convergence {
                    solver: "newton",
                    t: t.as_f64(),
                    residual: res.as_f64(),
                    iterations,
                });
            }
            iterations += 1;
            for (dv, fv) in delta.iter_mut().zip(&f) {
                *dv = -*fv;
            }
            thomas(&lower, &diag, &upper, &mut delta);
            let mut step = S::one();
            let mut accepted = false;
            for _ in 0..30 {
                trial.copy_from_slice(&cur);
                for j in 1..mm {
                    trial[j] = cur[j] + step * delta[j - 1];
                }
                if trial[1..mm].iter().all(|v| *v > S::zero()) {
                    boundary(&mut trial);
                    if let Ok(r) = eval(&trial, &mut f, None) {
                        if r < res || r <= opts.newton_tol {
                            accepted = true;
                            break;
                        }
                    }
                }
                step *= S::lit(0.5);
            }
            if !accepted {
                return Err(Error::Convergence {
                    solver: "newton line search",
                    t: t.as_f64(),
                    residual: res.as_f64(),
                    iterations,
                });
            }
            cur.copy_from_slice(&trial);
            res = eval(&cur, &mut f, Some((&mut lower, &mut diag, &mut upper)))?;
        }

        let mut pde_res = S::zero();
        for (j, fv) in f.iter().enumerate() {
            pde_res = pde_res.max(fv.abs() / coef);
            let jj = j + 1;
            let (_, _, diff, b) = ws.node(&lv, jj, cur[jj - 1], cur[jj], cur[jj + 1]).map_err(attach_t)?;
            let adv = match coordinate {
                SpatialCoordinate::Log => b - diff,
                SpatialCoordinate::Linear => b,
            };
            if diff > S::zero() {
                max_peclet = max_peclet.max(adv.abs() * hz / (two * diff));
            }
            max_diffusion = max_diffusion.max(diff * dt / (hz * hz));
        }
        if let Some(j) = cur.iter().position(|v| !(*v > S::zero())) {
            return Err(Error::Solvability {
                t: t.as_f64(),
                reason: format!("theta lost positivity at x = {}", x[j]),
            });
        }
        theta[k * width..(k + 1) * width].copy_from_slice(&cur);
        steps.push(StepReport {
            t,
            newton_iterations: iterations,
            relative_residual: res,
            pde_residual: pde_res,
        });
    }
    steps.reverse();

    let mut warnings = Vec::new();
    if max_peclet > S::one() {
        let msg = format!(
            "cell Peclet number reaches {}; central differencing may oscillate, refine the spatial grid",
            max_peclet
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }

    // theta_x from second-order differences in the computational coordinate.
    let mut theta_x = vec![S::zero(); theta.len()];
    for k in 0..=n {
        let row = &theta[k * width..(k + 1) * width];
        for j in 0..width {
            let dz = if j == 0 {
                (-S::lit(3.0) * row[0] + S::lit(4.0) * row[1] - row[2]) * alpha
            } else if j == mm {
                (S::lit(3.0) * row[mm] - S::lit(4.0) * row[mm - 1] + row[mm - 2]) * alpha
            } else {
                (row[j + 1] - row[j - 1]) * alpha
            };
            theta_x[k * width + j] = match coordinate {
                SpatialCoordinate::Log => dz / x[j],
                SpatialCoordinate::Linear => dz,
            };
        }
    }
    if let Some(i) = theta_x
        .iter()
        .position(|v| !(v.abs() >= S::lit(crate::equilibrium::DEGENERACY_THRESHOLD)))
    {
        return Err(Error::Degeneracy {
            t: grid.node(i / width).as_f64(),
            x: x[i % width].as_f64(),
        });
    }

    Ok(ThetaSurface {
        grid,
        coordinate,
        z,
        x,
        theta,
        theta_x,
        diagnostics: PdeDiagnostics {
            steps,
            max_peclet,
            max_diffusion_number: max_diffusion,
            warnings,
        },
    })
}

/// `theta(t, x)` from explicit coefficients.
pub(crate) fn separable_theta<S: Real>(c: &Coefficients<S>, t: S, x: S) -> S {
    match c {
        Coefficients::Power(p) => p.a * p.pi.eval(t) * x.powf(p.gamma - S::one()),
        Coefficients::Log(l) => l.a * l.varphi.eval(t) / x,
        Coefficients::Exponential(e) => e.a * (-e.gamma * (e.phi.eval(t) * x + e.psi.eval(t))).exp(),
    }
}

/// Solves a tridiagonal system in place (`rhs` becomes the solution).
fn thomas<S: Real>(lower: &[S], diag: &[S], upper: &[S], rhs: &mut [S]) {
    let n = diag.len();
    let mut c = vec![S::zero(); n];
    let mut beta = diag[0];
    rhs[0] /= beta;
    for i in 1..n {
        c[i] = upper[i - 1] / beta;
        beta = diag[i] - lower[i] * c[i];
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] -= c[i + 1] * next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::closedform;

    fn max_rel_error(u: Utility<f64>, steps: usize, intervals: usize) -> f64 {
        let m = MarketModel::constant(TimeGrid::new(1.0, steps).unwrap(), 0.03, &[0.08], &[0.25]).unwrap();
        let d = DiscountFunction::hyperbolic(1.0, 1.0, 1.0).unwrap();
        let opts = PdeOptions::around(&u, 1.0, intervals);
        let surface = solve_theta(&m, &d, &u, &opts).unwrap();
        assert!(surface.diagnostics().max_pde_residual() < 1e-6);
        let exact = closedform::solve(&m, &d, &u).unwrap();
        let mut worst = 0.0f64;
        for k in 0..=steps {
            let t = m.grid().node(k);
            for (j, x) in surface.wealth().iter().enumerate() {
                let want = separable_theta(&exact, t, *x);
                worst = worst.max((surface.theta_row(k)[j] - want).abs() / want);
            }
        }
        worst
    }

    #[test]
    fn matches_explicit_solutions_and_converges() {
        for u in [
            Utility::power(1.0, 0.5).unwrap(),
            Utility::log(1.0).unwrap(),
            Utility::exponential(1.0, 2.0).unwrap(),
        ] {
            let coarse = max_rel_error(u, 100, 200);
            let fine = max_rel_error(u, 200, 400);
            assert!(fine < 1e-3, "{u:?}: {fine}");
            assert!(coarse / fine >= 2.0, "{u:?}: {coarse} -> {fine}");
        }
    }

    #[test]
    fn query_outside_grid_is_rejected() {
        let u = Utility::log(1.0).unwrap();
        let m = MarketModel::constant(TimeGrid::new(1.0, 20).unwrap(), 0.03, &[0.08], &[0.25]).unwrap();
        let d = DiscountFunction::exponential(0.1, 1.0).unwrap();
        let s = solve_theta(&m, &d, &u, &PdeOptions::around(&u, 1.0, 40)).unwrap();
        assert!(matches!(s.theta_at(0.5, 100.0), Err(Error::Extrapolation { .. })));
        assert!(s.theta_at(0.5, 1.0).is_ok());
    }

    #[test]
    fn thomas_solves_tridiagonal() {
        let lower = [0.0f64, 1.0, 1.0];
        let diag = [4.0f64, 4.0, 4.0];
        let upper = [1.0f64, 1.0, 0.0];
        let x = [1.0f64, -2.0, 3.0];
        let mut rhs: [f64; 3] = [4.0 * 1.0 - 2.0, 1.0 - 8.0 + 3.0, -2.0 + 12.0];
        thomas(&lower, &diag, &upper, &mut rhs);
        for i in 0..3 {
            assert!((rhs[i] - x[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn log_lerp_exact_for_exponentials() {
        let (a, b) = (2f64.exp(), 3f64.exp());
        assert!((log_lerp(a, b, 0.25) - 2.25f64.exp()).abs() < 1e-12);
        assert!((log_lerp(-a, -b, 0.5) + 2.5f64.exp()).abs() < 1e-12);
    }
}
