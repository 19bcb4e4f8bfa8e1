//! Minimum distance estimator `θ* = argmin_θ ∫₀ᵀ (X_t − x_t(θ))² dt`.

use std::cell::RefCell;
use std::collections::HashMap;

use serde::Serialize;

use crate::deterministic::{solve_flow, FlowSolution};
use crate::model::ModelSpec;
use crate::sde::Trajectory;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdeOptions {
    /// Equispaced interior scan points before refinement.
    pub n_scan: usize,
    /// Golden-section stops at width `tol · (b − a)`.
    pub tol: f64,
    /// Boundary flag fires within `margin · (b − a)` of an end point.
    pub margin: f64,
}

impl Default for MdeOptions {
    fn default() -> Self {
        Self { n_scan: 64, tol: 1e-10, margin: 1e-6 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MdeResult {
    pub theta_star: f64,
    /// `‖X − x(θ*)‖` in `L²[0, T]`.
    pub distance: f64,
    pub mdeq_residual: f64,
    pub n_evals: usize,
    pub converged: bool,
    /// Minimizer pinned to an end of the parameter interval.
    pub boundary: bool,
}

/// Evaluates `D(θ)` with one flow solve per distinct θ.
struct Objective<'a> {
    traj: &'a Trajectory,
    model: &'a ModelSpec,
    cache: RefCell<HashMap<u64, (f64, FlowSolution)>>,
}

impl<'a> Objective<'a> {
    fn new(traj: &'a Trajectory, model: &'a ModelSpec) -> Self {
        Self { traj, model, cache: RefCell::new(HashMap::new()) }
    }

    fn eval(&self, theta: f64) -> Result<f64> {
        if let Some((d, _)) = self.cache.borrow().get(&theta.to_bits()) {
            return Ok(*d);
        }
        let flow = solve_flow(self.model, theta, self.traj.grid())?;
        let d = self.traj.x.zip_map(&flow.x, |a, b| (a - b).powi(2)).integral();
        self.cache.borrow_mut().insert(theta.to_bits(), (d, flow));
        Ok(d)
    }

    fn flow(&self, theta: f64) -> Result<FlowSolution> {
        self.eval(theta)?;
        Ok(self.cache.borrow()[&theta.to_bits()].1.clone())
    }

    fn n_evals(&self) -> usize {
        self.cache.borrow().len()
    }
}

fn check_grid(traj: &Trajectory, model: &ModelSpec) -> Result<()> {
    let t = traj.horizon();
    if (t - model.horizon).abs() > 1e-9 * model.horizon {
        return Err(Error::GridMismatch(format!("trajectory horizon {t} differs from model horizon {}", model.horizon)));
    }
    Ok(())
}

/// `D(θ) = ∫₀ᵀ (X_t − x_t(θ))² dt`.
pub fn distance_squared(traj: &Trajectory, model: &ModelSpec, theta: f64) -> Result<f64> {
    Objective::new(traj, model).eval(theta)
}

/// `∫₀ᵀ (X_t − x_t(θ)) ẋ_t(θ) dt`; equals `−D′(θ)/2`.
pub fn mdeq_residual(traj: &Trajectory, model: &ModelSpec, theta: f64) -> Result<f64> {
    let flow = solve_flow(model, theta, traj.grid())?;
    Ok(residual_with(traj, &flow))
}

fn residual_with(traj: &Trajectory, flow: &FlowSolution) -> f64 {
    let diff = traj.x.zip_map(&flow.x, |a, b| a - b);
    diff.zip_map(&flow.xdot, |d, v| d * v).integral()
}

pub fn estimate(traj: &Trajectory, model: &ModelSpec) -> Result<MdeResult> {
    estimate_with(traj, model, MdeOptions::default()).map(|(r, _)| r)
}

/// Coarse scan then golden-section refinement; also returns the flow at θ*.
pub fn estimate_with(traj: &Trajectory, model: &ModelSpec, opts: MdeOptions) -> Result<(MdeResult, FlowSolution)> {
    check_grid(traj, model)?;
    if opts.n_scan < 3 {
        return Err(Error::Config(format!("need at least 3 scan points, got {}", opts.n_scan)));
    }
    let (a, b) = model.theta_bounds;
    let width = b - a;
    let obj = Objective::new(traj, model);
    let lo_lim = a + opts.margin * width;
    let hi_lim = b - opts.margin * width;

    let step = width / (opts.n_scan + 1) as f64;
    let scan: Vec<f64> = (1..=opts.n_scan).map(|i| a + step * i as f64).collect();
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &th) in scan.iter().enumerate() {
        let d = obj.eval(th)?;
        // first minimum wins on ties
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    let mut lo = if best == 0 { lo_lim } else { scan[best - 1] };
    let mut hi = if best + 1 == scan.len() { hi_lim } else { scan[best + 1] };

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = obj.eval(c)?;
    let mut fd = obj.eval(d)?;
    let target = opts.tol * width;
    let mut iterations = 0;
    while hi - lo > target && iterations < 200 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = obj.eval(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = obj.eval(d)?;
        }
        iterations += 1;
    }
    let converged = hi - lo <= target;
    let mut theta_star = 0.5 * (lo + hi);
    let mut d_star = obj.eval(theta_star)?;
    if best_d < d_star {
        theta_star = scan[best];
        d_star = best_d;
    }
    let boundary = theta_star - lo_lim <= opts.margin * width || hi_lim - theta_star <= opts.margin * width;
    let flow = obj.flow(theta_star)?;
    let result = MdeResult {
        theta_star,
        distance: d_star.sqrt(),
        mdeq_residual: residual_with(traj, &flow),
        n_evals: obj.n_evals(),
        converged,
        boundary,
    };
    Ok((result, flow))
}
