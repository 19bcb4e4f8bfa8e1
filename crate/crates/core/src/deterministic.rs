//! Noise-free flow `dx/dt = S(θ, x)`, its θ-sensitivity and the scalar
//! constants `J(θ)`, `J̃(θ)`, `C(θ)`, `σ²(θ)`.

use crate::grid::{GridFunction, TimeGrid};
use crate::model::ModelSpec;
use crate::{Error, Result};

/// Deterministic flow at one θ, sampled on a grid over `[0, T]`.
#[derive(Debug, Clone)]
pub struct FlowSolution {
    pub theta: f64,
    /// `x_t(θ)`.
    pub x: GridFunction,
    /// `ẋ_t(θ) = ∂x_t/∂θ`.
    pub xdot: GridFunction,
    /// `S(θ, x_t(θ))`.
    pub drift: GridFunction,
    /// `J(θ) = ∫₀ᵀ ẋ_t² dt`.
    pub j: f64,
    /// `J̃(θ) = ∫₀¹ ẋ_{vT}² dv = J / T`.
    pub j_tilde: f64,
    /// `C(θ) = ∫₀¹ S⁻²(∫_v¹ S ẋ_{zT} dz)² dv`.
    pub c_theta: f64,
    /// `∫_tᵀ S(θ, x_s) ẋ_s ds`.
    pub tail: GridFunction,
}

impl FlowSolution {
    pub fn grid(&self) -> TimeGrid {
        self.x.grid()
    }

    /// `σ²(θ) = J⁻² ∫₀ᵀ S⁻² (∫_vᵀ S ẋ)² dv`.
    pub fn sigma_squared(&self) -> Result<f64> {
        if !(self.j > 0.0) {
            return Err(Error::Degenerate(format!("J(θ={}) = {}", self.theta, self.j)));
        }
        let integrand = self.tail.zip_map(&self.drift, |i, s| (i / s).powi(2));
        Ok(integrand.simpson_integral() / (self.j * self.j))
    }
}

fn rk4_step(f: &impl Fn(f64) -> f64, x: f64, dt: f64) -> f64 {
    let k1 = f(x);
    let k2 = f(x + 0.5 * dt * k1);
    let k3 = f(x + 0.5 * dt * k2);
    let k4 = f(x + dt * k3);
    x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Classical RK4 for the autonomous ODE `dx/dt = S(θ, x)`, `n_steps + 1` nodes.
pub fn rk4_path(model: &ModelSpec, theta: f64, horizon: f64, n_steps: usize) -> Vec<f64> {
    let dt = horizon / n_steps as f64;
    let f = |x: f64| model.s(theta, x);
    let mut out = Vec::with_capacity(n_steps + 1);
    let mut x = model.x0;
    out.push(x);
    for _ in 0..n_steps {
        x = rk4_step(&f, x, dt);
        out.push(x);
    }
    out
}

/// Solve the flow at `theta` and assemble the sensitivity and its integrals.
pub fn solve_flow(model: &ModelSpec, theta: f64, grid: TimeGrid) -> Result<FlowSolution> {
    model.check_theta(theta)?;
    let path = rk4_path(model, theta, grid.horizon(), grid.n_steps());
    let mut drift = Vec::with_capacity(path.len());
    let mut ratio = Vec::with_capacity(path.len());
    for &x in &path {
        let s = model.s(theta, x);
        if !(s > 0.0) {
            return Err(Error::Regularity { theta, x, value: s });
        }
        drift.push(s);
        ratio.push(model.s_theta(theta, x) / s);
    }
    let x = GridFunction::new(grid, path)?;
    let drift = GridFunction::new(grid, drift)?;
    let log_sens = GridFunction::new(grid, ratio)?.simpson_cumulative_integral();
    let xdot = drift.zip_map(&log_sens, |s, c| s * c);
    let j = xdot.map(|v| v * v).simpson_integral();
    let horizon = grid.horizon();
    let tail = drift.zip_map(&xdot, |s, d| s * d).simpson_reverse_cumulative_integral();
    let c_theta = tail.zip_map(&drift, |i, s| (i / s).powi(2)).simpson_integral() / horizon.powi(3);
    Ok(FlowSolution { theta, x, xdot, drift, j, j_tilde: j / horizon, c_theta, tail })
}

/// `σ²(θ)`, the asymptotic variance of `ε⁻¹(θ*_ε − θ)`.
pub fn sigma_squared(model: &ModelSpec, theta: f64, grid: TimeGrid) -> Result<f64> {
    solve_flow(model, theta, grid)?.sigma_squared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::unit(n).unwrap()
    }

    /// Joint RK4 for `(x, ẋ)` with `dẋ/dt = S′ ẋ + Ṡ`.
    fn sensitivity_ode(model: &ModelSpec, theta: f64, g: TimeGrid) -> Vec<f64> {
        let dt = g.dt();
        let f = |x: f64, y: f64| (model.s(theta, x), model.s_x(theta, x) * y + model.s_theta(theta, x));
        let (mut x, mut y) = (model.x0, 0.0);
        let mut out = vec![0.0];
        for _ in 0..g.n_steps() {
            let k1 = f(x, y);
            let k2 = f(x + 0.5 * dt * k1.0, y + 0.5 * dt * k1.1);
            let k3 = f(x + 0.5 * dt * k2.0, y + 0.5 * dt * k2.1);
            let k4 = f(x + dt * k3.0, y + dt * k3.1);
            x += dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            y += dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            out.push(y);
        }
        out
    }

    #[test]
    fn linear_flow_matches_exponential() {
        let f = solve_flow(&ModelSpec::linear(), 1.0, grid(2000)).unwrap();
        assert_abs_diff_eq!(f.x.last(), std::f64::consts::E, epsilon = 1e-8);
        assert_abs_diff_eq!(f.xdot.last(), std::f64::consts::E, epsilon = 1e-6);
        assert_eq!(f.xdot.value(0), 0.0);
        assert_eq!(f.x.value(0), 1.0);
    }

    #[test]
    fn constant_flow_is_affine() {
        let g = grid(2000);
        let f = solve_flow(&ModelSpec::constant(), 1.0, g).unwrap();
        for (i, t) in g.nodes().enumerate() {
            assert_abs_diff_eq!(f.x.value(i), 1.0 + t, epsilon = 1e-12);
            assert_abs_diff_eq!(f.xdot.value(i), t, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(f.j, 1.0 / 3.0, epsilon = 1e-6);
    }

    #[test]
    fn sigma_squared_constant_model() {
        let s2 = sigma_squared(&ModelSpec::constant(), 1.0, grid(2000)).unwrap();
        assert_abs_diff_eq!(s2, 1.2, epsilon = 1e-4);
        let lin = sigma_squared(&ModelSpec::linear(), 1.0, grid(2000)).unwrap();
        assert!(lin > 0.0);
    }

    #[test]
    fn sigma_squared_relates_to_c_theta() {
        for (m, th, t) in [(ModelSpec::linear(), 1.0, 1.0), (ModelSpec::linear(), 0.8, 2.0), (ModelSpec::constant(), 1.4, 1.5)] {
            let g = TimeGrid::new(t, 2000).unwrap();
            let f = solve_flow(&m, th, g).unwrap();
            let s2 = f.sigma_squared().unwrap();
            assert_abs_diff_eq!(s2, f.c_theta * t.powi(3) / (f.j * f.j), epsilon = 1e-12 * s2);
        }
    }

    #[test]
    fn rk4_converges_at_fourth_order() {
        let m = ModelSpec::linear();
        let exact = (1.9f64).exp();
        let errs: Vec<f64> = [10, 20, 40]
            .iter()
            .map(|&n| (solve_flow(&m, 1.9, grid(n)).unwrap().x.last() - exact).abs())
            .collect();
        assert!(errs[0] / errs[1] > 14.0 && errs[1] / errs[2] > 14.0, "{errs:?}");
    }

    #[test]
    fn closed_form_sensitivity_matches_ode_oracle() {
        let g = grid(2000);
        for m in [ModelSpec::linear(), ModelSpec::constant()] {
            let f = solve_flow(&m, 1.3, g).unwrap();
            let oracle = sensitivity_ode(&m, 1.3, g);
            for (a, b) in f.xdot.values().iter().zip(&oracle) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn non_positive_drift_is_reported() {
        use crate::model::Drift;
        let drift = Drift::new(|th, x| th - x, |_, _| -1.0, |_, _| 1.0, |_, _| 0.0, |_, _| 0.0);
        let m = ModelSpec::new("bad", (0.5, 2.0), 1.0, 1.0, drift).unwrap();
        assert!(matches!(solve_flow(&m, 0.6, grid(100)), Err(Error::Regularity { .. })));
        assert!(solve_flow(&ModelSpec::linear(), 3.0, grid(100)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn sensitivity_matches_finite_difference(th in 0.6..1.9f64, linear in any::<bool>()) {
            let m = if linear { ModelSpec::linear() } else { ModelSpec::constant() };
            let g = grid(2000);
            let d = 1e-5;
            let f = solve_flow(&m, th, g).unwrap();
            let up = solve_flow(&m, th + d, g).unwrap();
            let dn = solve_flow(&m, th - d, g).unwrap();
            for i in 0..g.len() {
                let fd = (up.x.value(i) - dn.x.value(i)) / (2.0 * d);
                prop_assert!((fd - f.xdot.value(i)).abs() <= 1e-5);
            }
        }
    }
}
