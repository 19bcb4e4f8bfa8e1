//! Uniform time grids and sampled functions.
//!
//! Every `∫ · dt` in the crate goes through the trapezoid rule implemented
//! here, so forward and reverse cumulative integrals stay mutually
//! consistent to the last bit.

use crate::{Error, Result};

/// Uniform grid `t_i = i · T / n`, `i = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub const DEFAULT_STEPS: usize = 2000;

    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Config(format!("horizon must be positive, got {horizon}")));
        }
        if n_steps == 0 {
            return Err(Error::Config("grid needs at least one step".into()));
        }
        Ok(Self { horizon, n_steps })
    }

    /// Grid on `[0, 1]`.
    pub fn unit(n_steps: usize) -> Result<Self> {
        Self::new(1.0, n_steps)
    }

    /// Same number of steps rescaled to `[0, 1]`.
    pub fn normalized(&self) -> Self {
        Self { horizon: 1.0, n_steps: self.n_steps }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of nodes, `n_steps + 1`.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.horizon
        } else {
            i as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.node(i))
    }

    /// Largest node index with `t_i <= t` (clamped to the grid).
    pub fn floor_index(&self, t: f64) -> usize {
        if t <= 0.0 {
            return 0;
        }
        let x = t / self.dt();
        // absorb rounding just below an integer, e.g. 0.95 * 2000
        let i = (x + 1e-9).floor() as usize;
        i.min(self.n_steps)
    }
}

/// Function sampled on every node of a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: TimeGrid,
    values: Vec<f64>,
}

/// Composite Simpson sum of equally spaced samples, with the same odd-count
/// closure as [`GridFunction::simpson_cumulative_integral`].
pub fn simpson(y: &[f64], h: f64) -> f64 {
    let m = y.len().saturating_sub(1);
    let simpson_to = |end: usize| -> f64 {
        (0..end).step_by(2).map(|i| h / 3.0 * (y[i] + 4.0 * y[i + 1] + y[i + 2])).sum()
    };
    match m {
        0 => 0.0,
        1 => 0.5 * h * (y[0] + y[1]),
        _ if m.is_multiple_of(2) => simpson_to(m),
        _ => simpson_to(m - 3) + 3.0 * h / 8.0 * (y[m - 3] + 3.0 * y[m - 2] + 3.0 * y[m - 1] + y[m]),
    }
}

impl GridFunction {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid with {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: TimeGrid, f: impl FnMut(f64) -> f64) -> Self {
        let values = grid.nodes().map(f).collect();
        Self { grid, values }
    }

    pub fn constant(grid: TimeGrid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// The same samples reinterpreted on another grid with the same node count.
    pub fn on_grid(&self, grid: TimeGrid) -> Result<Self> {
        Self::new(grid, self.values.clone())
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.values.len(), other.values.len());
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: self.grid, values }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Trapezoid integral over `[t_from, t_to]`.
    pub fn integrate(&self, from: usize, to: usize) -> Result<f64> {
        let len = self.values.len();
        for index in [from, to] {
            if index >= len {
                return Err(Error::IndexOutOfRange { index, len });
            }
        }
        if from > to {
            return Err(Error::Config(format!("integration bounds reversed: {from} > {to}")));
        }
        let half = 0.5 * self.grid.dt();
        let mut acc = 0.0;
        for i in from + 1..=to {
            acc += half * (self.values[i - 1] + self.values[i]);
        }
        Ok(acc)
    }

    /// Trapezoid integral over the whole grid.
    pub fn integral(&self) -> f64 {
        let n = self.values.len() - 1;
        self.integrate(0, n).expect("full range is always valid")
    }

    /// Trapezoid integral over `[0, t]` for any `t` in the grid range; the
    /// final partial cell uses the linear interpolant.
    pub fn integrate_to(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.grid.horizon());
        let k = self.grid.floor_index(t);
        let mut acc = self.integrate(0, k).expect("floor index is in range");
        let rest = t - self.grid.node(k);
        if k < self.grid.n_steps() && rest > 1e-12 * self.grid.dt() {
            let end = self.interpolate(t);
            acc += 0.5 * rest * (self.values[k] + end);
        }
        acc
    }

    /// `F(t_i) = ∫_0^{t_i} f`, with `F(0) = 0`.
    pub fn cumulative_integral(&self) -> Self {
        let half = 0.5 * self.grid.dt();
        let mut values = Vec::with_capacity(self.values.len());
        let mut acc = 0.0;
        values.push(0.0);
        for i in 1..self.values.len() {
            acc += half * (self.values[i - 1] + self.values[i]);
            values.push(acc);
        }
        Self { grid: self.grid, values }
    }

    /// `G(t_i) = ∫_{t_i}^T f`, computed as total minus forward cumulative.
    pub fn reverse_cumulative_integral(&self) -> Self {
        let forward = self.cumulative_integral();
        let total = forward.last();
        forward.map(|v| total - v)
    }

    /// Composite Simpson cumulative integral; odd node counts close with
    /// the 3/8 rule on the last three cells, a single cell with the trapezoid.
    pub fn simpson_cumulative_integral(&self) -> Self {
        let y = &self.values;
        let h = self.grid.dt();
        let mut even = vec![0.0; y.len()];
        for m in (2..y.len()).step_by(2) {
            even[m] = even[m - 2] + h / 3.0 * (y[m - 2] + 4.0 * y[m - 1] + y[m]);
        }
        let mut values = vec![0.0; y.len()];
        for m in 1..y.len() {
            values[m] = if m % 2 == 0 {
                even[m]
            } else if m == 1 {
                0.5 * h * (y[0] + y[1])
            } else {
                even[m - 3] + 3.0 * h / 8.0 * (y[m - 3] + 3.0 * y[m - 2] + 3.0 * y[m - 1] + y[m])
            };
        }
        Self { grid: self.grid, values }
    }

    /// Simpson integral over the whole grid.
    pub fn simpson_integral(&self) -> f64 {
        self.simpson_cumulative_integral().last()
    }

    /// `∫_{t_i}^T f` by Simpson, as total minus forward cumulative.
    pub fn simpson_reverse_cumulative_integral(&self) -> Self {
        let forward = self.simpson_cumulative_integral();
        let total = forward.last();
        forward.map(|v| total - v)
    }

    /// Left-point Itô sums `Σ_{j<i} self_j (x_{j+1} - x_j)`.
    pub fn left_point_integral(&self, integrator: &Self) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        let mut acc = 0.0;
        values.push(0.0);
        for i in 1..self.values.len() {
            acc += self.values[i - 1] * (integrator.values[i] - integrator.values[i - 1]);
            values.push(acc);
        }
        Self { grid: self.grid, values }
    }

    /// Linear interpolation, clamped at the ends.
    pub fn interpolate(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.values[0];
        }
        if t >= self.grid.horizon() {
            return self.last();
        }
        let x = t / self.grid.dt();
        let i = (x.floor() as usize).min(self.grid.n_steps() - 1);
        let w = x - i as f64;
        (1.0 - w) * self.values[i] + w * self.values[i + 1]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}
