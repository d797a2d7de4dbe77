use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniform partition of `[start, end]` into `steps` intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<S> {
    start: S,
    end: S,
    steps: usize,
}

impl<S: Real> TimeGrid<S> {
    /// Grid on `[0, horizon]`.
    pub fn new(horizon: S, steps: usize) -> Result<Self> {
        Self::span(S::zero(), horizon, steps)
    }

    /// Grid on `[start, end]`.
    pub fn span(start: S, end: S, steps: usize) -> Result<Self> {
        if !start.is_finite() || !end.is_finite() {
            return Err(Error::validation("grid", "endpoints must be finite"));
        }
        if end <= start {
            return Err(Error::validation(
                "grid.T",
                format!("horizon must be positive, got [{start}, {end}]"),
            ));
        }
        if steps == 0 {
            return Err(Error::validation("grid.n", "need at least one step"));
        }
        Ok(TimeGrid { start, end, steps })
    }

    pub fn start(&self) -> S {
        self.start
    }

    pub fn end(&self) -> S {
        self.end
    }

    /// Length of the interval.
    pub fn horizon(&self) -> S {
        self.end - self.start
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> S {
        self.horizon() / S::from_count(self.steps)
    }

    /// The `k`-th node. The last node is exactly `end`.
    #[inline]
    pub fn node(&self, k: usize) -> S {
        if k == self.steps {
            self.end
        } else {
            self.start + self.horizon() * S::from_count(k) / S::from_count(self.steps)
        }
    }

    pub fn nodes(&self) -> Vec<S> {
        (0..=self.steps).map(|k| self.node(k)).collect()
    }

    /// Index of the node equal to `t` up to a relative tolerance of the step.
    pub fn index_of(&self, t: S) -> Option<usize> {
        let pos = (t - self.start) / self.dt();
        let k = pos.round();
        if k < S::zero() || k > S::from_count(self.steps) {
            return None;
        }
        if (pos - k).abs() <= S::lit(1e-6) {
            k.to_usize()
        } else {
            None
        }
    }

    /// Interval index `k` and fraction `w` with `t = node(k) + w * dt`, `w` in `[0, 1]`.
    #[inline]
    pub fn locate(&self, t: S) -> (usize, S) {
        let pos = (t - self.start) / self.dt();
        if pos <= S::zero() {
            return (0, S::zero());
        }
        let last = self.steps - 1;
        let k = pos.floor().to_usize().unwrap_or(last).min(last);
        let w = (pos - S::from_count(k)).min(S::one());
        (k, w)
    }

    pub fn contains(&self, t: S) -> bool {
        let tol = self.dt() * S::lit(1e-9);
        t >= self.start - tol && t <= self.end + tol
    }
}


/// Values attached to every node of a [`TimeGrid`], interpolated linearly in between.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSeries<S> {
    grid: TimeGrid<S>,
    values: Vec<S>,
}

impl<S: Real> GridSeries<S> {
    pub fn new(grid: TimeGrid<S>, values: Vec<S>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::validation(
                "series",
                format!("expected {} values, got {}", grid.len(), values.len()),
            ));
        }
        Ok(GridSeries { grid, values })
    }

    pub fn grid(&self) -> &TimeGrid<S> {
        &self.grid
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    #[inline]
    pub fn eval(&self, t: S) -> S {
        let (k, w) = self.grid.locate(t);
        if w == S::zero() {
            return self.values[k];
        }
        self.values[k] + w * (self.values[k + 1] - self.values[k])
    }

    /// Sup norm of `v' - rhs(j, v_j)` over the nodes, with `v'` from fourth-order differences.
    pub fn derivative_residual<F: Fn(usize, S) -> S>(&self, rhs: F) -> S {
        let v = &self.values;
        let n = v.len() - 1;
        let h = self.grid.dt();
        let c = |x: f64| S::lit(x);
        let mut worst = S::zero();
        for j in 0..=n {
            let d = if n < 4 {
                let two = c(2.0);
                if n < 2 {
                    (v[1] - v[0]) / h
                } else if j == 0 {
                    (c(-3.0) * v[0] + c(4.0) * v[1] - v[2]) / (two * h)
                } else if j == n {
                    (c(3.0) * v[n] - c(4.0) * v[n - 1] + v[n - 2]) / (two * h)
                } else {
                    (v[j + 1] - v[j - 1]) / (two * h)
                }
            } else {
                let h12 = c(12.0) * h;
                match j {
                    0 => (c(-25.0) * v[0] + c(48.0) * v[1] - c(36.0) * v[2] + c(16.0) * v[3] - c(3.0) * v[4]) / h12,
                    1 => (c(-3.0) * v[0] - c(10.0) * v[1] + c(18.0) * v[2] - c(6.0) * v[3] + v[4]) / h12,
                    _ if j == n => (c(25.0) * v[n] - c(48.0) * v[n - 1] + c(36.0) * v[n - 2] - c(16.0) * v[n - 3] + c(3.0) * v[n - 4]) / h12,
                    _ if j == n - 1 => (c(3.0) * v[n] + c(10.0) * v[n - 1] - c(18.0) * v[n - 2] + c(6.0) * v[n - 3] - v[n - 4]) / h12,
                    _ => (v[j - 2] - c(8.0) * v[j - 1] + c(8.0) * v[j + 1] - v[j + 2]) / h12,
                }
            };
            worst = worst.max((d - rhs(j, v[j])).abs());
        }
        worst
    }
}
