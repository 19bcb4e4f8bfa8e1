//! Euler–Maruyama simulation of `dX = S(θ, X) dt + ε dW` and of the
//! limit-side Gaussian objects.
//!
//! Normals come from ChaCha8 keyed by `(base, replication)`: the stream id is
//! the replication and the standard normals for steps `2k` and `2k + 1` are
//! the Box–Muller pair built from the two 64-bit words at word position `4k`.
//! Every step draw is therefore addressable without generating the others.

use std::io::{Read, Write};
use std::path::Path;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::deterministic::FlowSolution;
use crate::grid::{GridFunction, TimeGrid};
use crate::model::ModelSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed {
    pub base: u64,
    pub replication: u64,
}

impl Seed {
    pub fn new(base: u64, replication: u64) -> Self {
        Self { base, replication }
    }

    pub fn replication(self, replication: u64) -> Self {
        Self { replication, ..self }
    }
}

/// Standard normal stream for one seed.
pub struct NormalStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

impl NormalStream {
    pub fn new(seed: Seed) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.base);
        rng.set_stream(seed.replication);
        Self { rng, spare: None }
    }

    /// Positioned so that the next draw is the normal for `step`.
    pub fn at_step(seed: Seed, step: u64) -> Self {
        let mut s = Self::new(seed);
        s.rng.set_word_pos(4 * u128::from(step / 2));
        if step % 2 == 1 {
            s.sample();
        }
        s
    }

    fn pair(&mut self) -> (f64, f64) {
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * TWO_POW_M53;
        let u2 = (self.rng.next_u64() >> 11) as f64 * TWO_POW_M53;
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        (r * c, r * s)
    }

    pub fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let (a, b) = self.pair();
        self.spare = Some(b);
        a
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for z in out {
            *z = self.sample();
        }
    }
}

/// `n` standard normals for steps `0..n`.
pub fn normals(seed: Seed, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    NormalStream::new(seed).fill(&mut out);
    out
}

/// Wiener increments `ΔW_i = √dt ξ_i` on the grid.
pub fn wiener_increments(grid: TimeGrid, seed: Seed) -> Vec<f64> {
    let sd = grid.dt().sqrt();
    let mut z = normals(seed, grid.n_steps());
    for v in &mut z {
        *v *= sd;
    }
    z
}

/// Wiener path `W(t_i)` on the grid, `W(0) = 0`.
pub fn wiener_path(grid: TimeGrid, seed: Seed) -> GridFunction {
    let mut values = Vec::with_capacity(grid.len());
    let mut w = 0.0;
    values.push(w);
    for dw in wiener_increments(grid, seed) {
        w += dw;
        values.push(w);
    }
    GridFunction::new(grid, values).expect("length matches grid")
}

/// One observed or simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub x: GridFunction,
    pub epsilon: f64,
    pub seed: Option<Seed>,
}

impl Trajectory {
    pub fn new(x: GridFunction, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::Config(format!("ε must be non-negative, got {epsilon}")));
        }
        Ok(Self { x, epsilon, seed: None })
    }

    pub fn grid(&self) -> TimeGrid {
        self.x.grid()
    }

    pub fn horizon(&self) -> f64 {
        self.grid().horizon()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "X"])?;
        for (t, x) in self.grid().nodes().zip(self.x.values()) {
            w.write_record([t.to_string(), x.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Parse a `t,X` CSV on a uniform grid starting at `t = 0`.
    pub fn read_csv<R: Read>(reader: R, epsilon: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "X" {
            return Err(Error::Parse(format!("expected header 't,X', found '{}'", headers.iter().collect::<Vec<_>>().join(","))));
        }
        let mut ts = Vec::new();
        let mut xs = Vec::new();
        for (line, record) in r.records().enumerate() {
            let record = record?;
            let field = |k: usize| -> Result<f64> {
                let raw = record.get(k).unwrap_or("");
                raw.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse(format!("row {}: invalid number '{raw}'", line + 1)))
            };
            ts.push(field(0)?);
            xs.push(field(1)?);
        }
        if ts.len() < 2 {
            return Err(Error::Parse("trajectory needs at least two rows".into()));
        }
        if ts[0] != 0.0 {
            return Err(Error::Parse(format!("first time must be 0, found {}", ts[0])));
        }
        let n = ts.len() - 1;
        let grid = TimeGrid::new(ts[n], n).map_err(|e| Error::Parse(e.to_string()))?;
        let tol = 1e-9 * grid.horizon();
        if let Some((i, t)) = ts.iter().enumerate().find(|(i, t)| (grid.node(*i) - **t).abs() > tol) {
            return Err(Error::Parse(format!("row {}: time {t} is off the uniform grid", i + 1)));
        }
        Self::new(GridFunction::new(grid, xs)?, epsilon)
    }

    pub fn load(path: impl AsRef<Path>, epsilon: f64) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, epsilon)
    }
}

/// Euler–Maruyama `X_{i+1} = X_i + b(X_i) dt + ε ΔW_i` for an arbitrary drift.
pub fn simulate_alternative(
    drift: impl Fn(f64) -> f64,
    x0: f64,
    epsilon: f64,
    grid: TimeGrid,
    seed: Seed,
) -> Result<Trajectory> {
    simulate_alternative_refined(drift, x0, epsilon, grid, seed, 1)
}

/// Euler–Maruyama on a grid `substeps` times finer than `grid`, recorded at
/// the nodes of `grid`. `substeps = 1` is [`simulate_alternative`].
pub fn simulate_alternative_refined(
    drift: impl Fn(f64) -> f64,
    x0: f64,
    epsilon: f64,
    grid: TimeGrid,
    seed: Seed,
    substeps: usize,
) -> Result<Trajectory> {
    if substeps == 0 {
        return Err(Error::Config("substeps must be positive".into()));
    }
    let fine = TimeGrid::new(grid.horizon(), grid.n_steps() * substeps)?;
    let dt = fine.dt();
    let dw = if epsilon == 0.0 { vec![0.0; fine.n_steps()] } else { wiener_increments(fine, seed) };
    let mut values = Vec::with_capacity(grid.len());
    let mut x = x0;
    values.push(x);
    for (i, inc) in dw.into_iter().enumerate() {
        x += drift(x) * dt + epsilon * inc;
        if (i + 1) % substeps == 0 {
            values.push(x);
        }
    }
    let mut traj = Trajectory::new(GridFunction::new(grid, values)?, epsilon)?;
    traj.seed = Some(seed);
    Ok(traj)
}

/// Path under the hypothesis with parameter `theta`.
pub fn simulate(model: &ModelSpec, theta: f64, epsilon: f64, grid: TimeGrid, seed: Seed) -> Result<Trajectory> {
    simulate_refined(model, theta, epsilon, grid, seed, 1)
}

/// [`simulate`] with `substeps` Euler steps per observation interval.
pub fn simulate_refined(
    model: &ModelSpec,
    theta: f64,
    epsilon: f64,
    grid: TimeGrid,
    seed: Seed,
    substeps: usize,
) -> Result<Trajectory> {
    model.check_theta(theta)?;
    simulate_alternative_refined(|x| model.s(theta, x), model.x0, epsilon, grid, seed, substeps)
}

/// Wiener path and the first-order term `x⁽¹⁾` of the small-noise expansion.
#[derive(Debug, Clone)]
pub struct LimitPaths {
    /// `W(t)` on `[0, T]`.
    pub w_time: GridFunction,
    /// `W(ν) = T^{-1/2} W(νT)` on `[0, 1]`.
    pub w: GridFunction,
    /// `x⁽¹⁾_t = S(θ, x_t) ∫₀ᵗ S(θ, x_s)⁻¹ dW_s`.
    pub x1: GridFunction,
}

/// Build `x⁽¹⁾` from the flow and the Wiener increments of `seed`.
pub fn simulate_limit_x1(flow: &FlowSolution, seed: Seed) -> LimitPaths {
    let grid = flow.grid();
    let w_time = wiener_path(grid, seed);
    let inv = flow.drift.map(|s| 1.0 / s);
    let stoch = inv.left_point_integral(&w_time);
    let x1 = flow.drift.zip_map(&stoch, |s, i| s * i);
    let scale = 1.0 / grid.horizon().sqrt();
    let w = w_time.scale(scale).on_grid(grid.normalized()).expect("same node count");
    LimitPaths { w_time, w, x1 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deterministic::solve_flow;
    use approx::assert_abs_diff_eq;

    fn grid() -> TimeGrid {
        TimeGrid::unit(2000).unwrap()
    }

    #[test]
    fn same_seed_same_path() {
        let m = ModelSpec::linear();
        let a = simulate(&m, 1.0, 0.01, grid(), Seed::new(42, 0)).unwrap();
        let b = simulate(&m, 1.0, 0.01, grid(), Seed::new(42, 0)).unwrap();
        assert_eq!(a.x.values(), b.x.values());
        let c = simulate(&m, 1.0, 0.01, grid(), Seed::new(42, 1)).unwrap();
        assert_ne!(a.x.values(), c.x.values());
    }

    #[test]
    fn draws_are_addressable_by_step() {
        let seed = Seed::new(9, 3);
        let all = normals(seed, 11);
        for step in [0u64, 1, 4, 7, 10] {
            let z = NormalStream::at_step(seed, step).sample();
            assert_eq!(z, all[step as usize]);
        }
    }

    #[test]
    fn normals_have_unit_variance() {
        let z = normals(Seed::new(1, 0), 200_000);
        let n = z.len() as f64;
        let mean = z.iter().sum::<f64>() / n;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 3.0 / n.sqrt());
        assert!((var - 1.0).abs() < 3.0 * (2.0 / n).sqrt());
    }

    #[test]
    fn refined_paths_keep_the_grid_and_shrink_the_bias() {
        let m = ModelSpec::linear();
        let a = simulate(&m, 1.0, 0.01, grid(), Seed::new(2, 3)).unwrap();
        let b = simulate_refined(&m, 1.0, 0.01, grid(), Seed::new(2, 3), 1).unwrap();
        assert_eq!(a.x.values(), b.x.values());
        let flow = solve_flow(&m, 1.0, grid()).unwrap();
        let fine = simulate_refined(&m, 1.0, 0.0, grid(), Seed::new(0, 0), 20).unwrap();
        assert_eq!(fine.grid(), grid());
        assert!(fine.x.sup_distance(&flow.x) <= 1e-4);
        assert!(simulate_refined(&m, 1.0, 0.0, grid(), Seed::new(0, 0), 0).is_err());
    }

    #[test]
    fn noise_free_path_tracks_flow() {
        let m = ModelSpec::linear();
        let traj = simulate(&m, 1.0, 0.0, grid(), Seed::new(0, 0)).unwrap();
        let flow = solve_flow(&m, 1.0, grid()).unwrap();
        assert!(traj.x.sup_distance(&flow.x) <= 1e-3);
        assert_eq!(traj.x.value(0), 1.0);
    }

    #[test]
    fn hypothesis_drift_reproduces_simulate() {
        let m = ModelSpec::linear();
        let seed = Seed::new(5, 2);
        let a = simulate(&m, 1.1, 0.02, grid(), seed).unwrap();
        let b = simulate_alternative(|x| 1.1 * x, 1.0, 0.02, grid(), seed).unwrap();
        assert_eq!(a.x.values(), b.x.values());
    }

    #[test]
    fn alternative_without_noise_solves_ode() {
        let g = grid();
        let traj = simulate_alternative(|_| 2.0, 1.0, 0.0, g, Seed::new(0, 0)).unwrap();
        assert_abs_diff_eq!(traj.x.last(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let traj = simulate(&ModelSpec::linear(), 1.0, 0.01, TimeGrid::new(2.0, 50).unwrap(), Seed::new(3, 0)).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"t,X\n"));
        let back = Trajectory::read_csv(buf.as_slice(), 0.01).unwrap();
        assert_eq!(back.x.values(), traj.x.values());
        assert_eq!(back.grid(), traj.grid());
    }

    #[test]
    fn corrupt_csv_is_rejected() {
        assert!(matches!(Trajectory::read_csv("t,X\n0,1\n0.5,abc\n".as_bytes(), 0.1), Err(Error::Parse(_))));
        assert!(matches!(Trajectory::read_csv("time,X\n0,1\n1,2\n".as_bytes(), 0.1), Err(Error::Parse(_))));
        assert!(matches!(Trajectory::read_csv("t,X\n0,1\n0.3,1\n1,2\n".as_bytes(), 0.1), Err(Error::Parse(_))));
        assert!(Trajectory::read_csv("t,X\n0,1\n".as_bytes(), 0.1).is_err());
    }

    #[test]
    fn limit_x1_starts_at_zero() {
        let flow = solve_flow(&ModelSpec::linear(), 1.0, grid()).unwrap();
        let lp = simulate_limit_x1(&flow, Seed::new(1, 1));
        assert_eq!(lp.x1.value(0), 0.0);
        assert_eq!(lp.w.value(0), 0.0);
        assert_eq!(lp.w.grid().horizon(), 1.0);
    }
}
