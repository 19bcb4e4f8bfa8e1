//! The test on observed data: normalized residuals `u_ε`, the process `U_ε`,
//! empirical coefficient functions, the ordinary-integral forms `K_ε`, `L_ε`
//! of `∫ h dU_ε` and `∫ g dU_ε`, the transformed process `W̃_ε` and the
//! statistic `Δ_ε`.
//!
//! Everything is evaluated along the observed path `X` except `x(θ*)` and
//! `ẋ(θ*)`. Internally the transform runs in normalized time `ν = t/T`;
//! [`w_tilde_scaled`] redoes it on the original time axis with the explicit
//! `T`-power constants as a cross-check.

use serde::Serialize;

use crate::calibration::QuantileTable;
use crate::deterministic::FlowSolution;
use crate::grid::GridFunction;
use crate::limit_transform::coefficients::Vars;
use crate::limit_transform::{CoefficientSet, TransformProfile, DEFAULT_R_CUT};
use crate::mde::{estimate_with, MdeOptions, MdeResult};
use crate::model::ModelSpec;
use crate::sde::Trajectory;
use crate::{Error, Result};

/// Share of `[0, r_cut]` on which `φ₂,ε ≤ 0` before the transform is flagged.
pub const DEGENERATE_FRACTION: f64 = 0.2;

fn check_match(traj: &Trajectory, flow: &FlowSolution) -> Result<()> {
    if traj.grid() != flow.grid() {
        return Err(Error::GridMismatch("trajectory and flow grids differ".into()));
    }
    Ok(())
}

/// Drift and its partials along the observed path at `θ`.
struct PathDrift {
    s: GridFunction,
    s_x: GridFunction,
    s_theta: GridFunction,
    s_theta_x: GridFunction,
}

impl PathDrift {
    fn new(traj: &Trajectory, model: &ModelSpec, theta: f64) -> Result<Self> {
        let x = &traj.x;
        if let Some(&bad) = x.values().iter().find(|&&v| !(model.s(theta, v) > 0.0)) {
            return Err(Error::Regularity { theta, x: bad, value: model.s(theta, bad) });
        }
        Ok(Self {
            s: x.map(|v| model.s(theta, v)),
            s_x: x.map(|v| model.s_x(theta, v)),
            s_theta: x.map(|v| model.s_theta(theta, v)),
            s_theta_x: x.map(|v| model.s_theta_x(theta, v)),
        })
    }
}

/// `u_ε(t) = (X_t − x_t(θ*)) / (ε S(θ*, X_t))`; identically zero when `ε = 0`.
pub fn compute_u_eps(traj: &Trajectory, model: &ModelSpec, flow: &FlowSolution) -> Result<GridFunction> {
    check_match(traj, flow)?;
    let pd = PathDrift::new(traj, model, flow.theta)?;
    Ok(u_from(traj, flow, &pd))
}

fn u_from(traj: &Trajectory, flow: &FlowSolution, pd: &PathDrift) -> GridFunction {
    if traj.epsilon == 0.0 {
        return GridFunction::zeros(traj.grid());
    }
    let eps = traj.epsilon;
    let diff = traj.x.zip_map(&flow.x, |a, b| a - b);
    diff.zip_map(&pd.s, |d, s| d / (eps * s))
}

/// `T^{-1/2} [f S u − ∫₀ᵗ (ḟ + f S′) S u ds]`, the ordinary-integral form of
/// `∫₀ᵗ f dU_ε` (with `f ≡ 1` this is `U_ε` itself). `f_dot` is the time
/// derivative of `f` along the path, `∂ₓf · S`.
fn ito_rewrite(f: &GridFunction, f_dot: &GridFunction, s: &GridFunction, s_x: &GridFunction, u: &GridFunction) -> GridFunction {
    let n = u.values().len();
    let scale = 1.0 / u.grid().horizon().sqrt();
    let mut integrand = Vec::with_capacity(n);
    let mut point = Vec::with_capacity(n);
    for i in 0..n {
        let su = s.value(i) * u.value(i);
        point.push(f.value(i) * su);
        integrand.push((f_dot.value(i) + f.value(i) * s_x.value(i)) * su);
    }
    let cum = GridFunction::new(u.grid(), integrand).expect("length matches").cumulative_integral();
    let values = point.iter().zip(cum.values()).map(|(p, c)| scale * (p - c)).collect();
    GridFunction::new(u.grid(), values).expect("length matches")
}

/// `U_ε(t/T) = T^{-1/2} S(θ*, X_t) u_ε(t) − T^{-1/2} ∫₀ᵗ S′ S u_ε ds`, on the time grid.
#[allow(non_snake_case)]
pub fn compute_U_eps(traj: &Trajectory, model: &ModelSpec, theta_star: f64, u_eps: &GridFunction) -> Result<GridFunction> {
    let pd = PathDrift::new(traj, model, theta_star)?;
    let one = GridFunction::constant(traj.grid(), 1.0);
    Ok(ito_rewrite(&one, &GridFunction::zeros(traj.grid()), &pd.s, &pd.s_x, u_eps))
}

/// `K_ε = T^{-1/2} h_ε S u_ε − T^{-1/2} ∫₀ˢ (h′_ε S + h_ε S′ S) u_ε dq`.
#[allow(non_snake_case)]
pub fn compute_K_eps(traj: &Trajectory, model: &ModelSpec, flow: &FlowSolution, u_eps: &GridFunction) -> Result<GridFunction> {
    Ok(EmpiricalProfile::new(traj, model, flow, u_eps.clone())?.k_eps)
}

/// `L_ε = T^{-1/2} g_ε S u_ε − T^{-1/2} ∫₀ˢ (g′_ε S + g_ε S′ S) u_ε dq`.
#[allow(non_snake_case)]
pub fn compute_L_eps(traj: &Trajectory, model: &ModelSpec, flow: &FlowSolution, u_eps: &GridFunction) -> Result<GridFunction> {
    Ok(EmpiricalProfile::new(traj, model, flow, u_eps.clone())?.l_eps)
}

/// All empirical functions for one trajectory at one θ*.
#[derive(Debug, Clone)]
pub struct EmpiricalProfile {
    pub theta_star: f64,
    /// `u_ε` on the time grid.
    pub u_eps: GridFunction,
    /// `U_ε(ν)` on the normalized grid.
    pub big_u_eps: GridFunction,
    /// `h_ε = T^{-1/2} J_ε⁻¹ Ṡ(θ*, X) C_ε^{1/2}`.
    pub h_eps: GridFunction,
    /// `g_ε = S(θ*, X)⁻¹ I_ε C_ε^{-1/2}`.
    pub g_eps: GridFunction,
    /// Time derivative of `h_ε` along the path: `T^{-1/2} J_ε⁻¹ Ṡ′ S C_ε^{1/2}`.
    pub h_eps_prime: GridFunction,
    /// Time derivative of `g_ε` along the path: `(−S⁻¹ S′ I_ε − ẋ) C_ε^{-1/2}`.
    pub g_eps_prime: GridFunction,
    /// `I_ε(s) = ∫_sᵀ S(θ*, X) ẋ(θ*)`.
    pub i_eps: GridFunction,
    pub j_eps: f64,
    /// `C_ε = T⁻³ ∫₀ᵀ (I_ε / S)²`.
    pub c_eps: f64,
    pub k_eps: GridFunction,
    pub l_eps: GridFunction,
    /// `h`, `g`, `I₁..I₆`, `φ₁, φ₂, ψ₁, ψ₂` built from the rescaled
    /// `T^{5/2} h_ε(νT)` and `g_ε(νT) / T` on the normalized grid.
    pub profile: TransformProfile,
    /// `1 / φ₂,ε` where positive, else 0.
    pub phi2_plus: GridFunction,
}

impl EmpiricalProfile {
    pub fn new(traj: &Trajectory, model: &ModelSpec, flow: &FlowSolution, u_eps: GridFunction) -> Result<Self> {
        check_match(traj, flow)?;
        let theta = flow.theta;
        let pd = PathDrift::new(traj, model, theta)?;
        let grid = traj.grid();
        let horizon = grid.horizon();
        let unit = grid.normalized();
        let rt = horizon.sqrt();

        let j_eps = flow.j;
        if !(j_eps > 0.0) {
            return Err(Error::Degenerate(format!("J(θ*={theta}) = {j_eps}")));
        }
        let i_eps = pd.s.zip_map(&flow.xdot, |s, d| s * d).simpson_reverse_cumulative_integral();
        let g_hat = i_eps.zip_map(&pd.s, |i, s| i / s);
        let c_eps = g_hat.map(|v| v * v).simpson_integral() / horizon.powi(3);
        if !(c_eps > 0.0) {
            return Err(Error::Degenerate(format!("C_ε(θ*={theta}) = {c_eps}")));
        }
        let sc = c_eps.sqrt();
        let h_scale = sc / (rt * j_eps);
        let h_eps = pd.s_theta.scale(h_scale);
        let h_eps_prime = pd.s_theta_x.zip_map(&pd.s, |a, s| h_scale * a * s);
        let g_eps = g_hat.scale(1.0 / sc);
        let mut gp = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let (s, sx, ie, xd) = (pd.s.value(i), pd.s_x.value(i), i_eps.value(i), flow.xdot.value(i));
            gp.push((-sx * ie / s - xd) / sc);
        }
        let g_eps_prime = GridFunction::new(grid, gp)?;

        let zero = GridFunction::zeros(grid);
        let one = GridFunction::constant(grid, 1.0);
        let big_u = ito_rewrite(&one, &zero, &pd.s, &pd.s_x, &u_eps);
        let k_eps = ito_rewrite(&h_eps, &h_eps_prime, &pd.s, &pd.s_x, &u_eps);
        let l_eps = ito_rewrite(&g_eps, &g_eps_prime, &pd.s, &pd.s_x, &u_eps);

        let h_n = h_eps.scale(horizon.powf(2.5)).on_grid(unit)?;
        let g_n = g_eps.scale(1.0 / horizon).on_grid(unit)?;
        let profile = TransformProfile::from_hg_with(h_n, g_n, &CoefficientSet::standard())?;
        let phi2_plus = profile.phi2.map(|v| if v > 0.0 { 1.0 / v } else { 0.0 });

        Ok(Self {
            theta_star: theta,
            u_eps,
            big_u_eps: big_u.on_grid(unit)?,
            h_eps,
            g_eps,
            h_eps_prime,
            g_eps_prime,
            i_eps,
            j_eps,
            c_eps,
            k_eps,
            l_eps,
            profile,
            phi2_plus,
        })
    }

    /// `T^{5/2} K_ε` and `L_ε / T` on the normalized grid.
    pub fn normalized_k_l(&self) -> (GridFunction, GridFunction) {
        let t = self.k_eps.grid().horizon();
        let unit = self.profile.grid();
        (
            self.k_eps.scale(t.powf(2.5)).on_grid(unit).expect("same node count"),
            self.l_eps.scale(1.0 / t).on_grid(unit).expect("same node count"),
        )
    }

    /// Fraction of nodes on `[0, r_cut]` where `φ₂,ε ≤ 0`, and the minimum there.
    pub fn phi2_diagnostics(&self, r_cut: f64) -> (f64, f64) {
        let kc = self.profile.grid().floor_index(r_cut);
        let bad = (0..=kc).filter(|&k| !(self.profile.phi2.value(k) > 0.0)).count();
        (bad as f64 / (kc + 1) as f64, self.profile.phi2_min(r_cut).0)
    }
}

/// `W̃_ε(ν) = U_ε(ν) + ∫₀^ν φ⁺₂ (φ₁ T^{5/2} K_ε + ψ₂ L_ε / T) dr` on the
/// normalized grid, integrand frozen beyond `r_cut`.
pub fn compute_w_tilde(ep: &EmpiricalProfile, r_cut: f64) -> Result<GridFunction> {
    check_r_cut(r_cut)?;
    let p = &ep.profile;
    let grid = p.grid();
    let kc = grid.floor_index(r_cut);
    let (k_n, l_n) = ep.normalized_k_l();
    let f: Vec<f64> = (0..grid.len())
        .map(|k| {
            let j = k.min(kc);
            ep.phi2_plus.value(j) * (p.phi1.value(j) * k_n.value(j) + p.psi2.value(j) * l_n.value(j))
        })
        .collect();
    let corr = GridFunction::new(grid, f)?.cumulative_integral();
    Ok(ep.big_u_eps.zip_map(&corr, |a, b| a + b))
}

/// The same process computed on the original time axis with
/// `I₁ = T⁻³∫g_ε²`, `I₂ = √T∫h_εg_ε`, `I₃ = T^{3/2}∫h_ε`, `I₄ = T⁴∫h_ε²`,
/// `I₅ = T⁻²∫g_ε`, pointwise `h = T^{5/2}h_ε`, `g = g_ε/T`, and
/// `W̃(t) = U_ε(t/T) + T⁻¹∫₀ᵗ φ⁺₂ (λ₁ φ₁ K_ε + λ₂ ψ₂ L_ε) ds` with
/// `λ₁ = T^{5/2}`, `λ₂ = 1/T`. Returned on the time grid.
pub fn w_tilde_scaled(ep: &EmpiricalProfile, r_cut: f64) -> Result<GridFunction> {
    check_r_cut(r_cut)?;
    let grid = ep.h_eps.grid();
    let t = grid.horizon();
    let (c1, c2, c3, c4, c5) = (t.powi(-3), t.sqrt(), t.powf(1.5), t.powi(4), t.powi(-2));
    let (l1, l2) = (t.powf(2.5), 1.0 / t);
    let (h, g) = (&ep.h_eps, &ep.g_eps);
    let i1 = g.map(|v| v * v).simpson_cumulative_integral().scale(c1);
    let i2 = h.zip_map(g, |a, b| a * b).simpson_cumulative_integral().scale(c2);
    let i3 = h.simpson_cumulative_integral().scale(c3);
    let i4 = h.map(|v| v * v).simpson_cumulative_integral().scale(c4);
    let i5 = g.simpson_cumulative_integral().scale(c5);
    let set = CoefficientSet::standard();
    let kc = grid.floor_index(r_cut * t);
    let mut f = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let j = k.min(kc);
        let v = Vars {
            i1: i1.value(j),
            i2: i2.value(j),
            i3: i3.value(j),
            i4: i4.value(j),
            i5: i5.value(j),
            h: l1 * h.value(j),
            g: g.value(j) / t,
        };
        let phi2 = (set.phi2)(&v);
        let plus = if phi2 > 0.0 { 1.0 / phi2 } else { 0.0 };
        f.push(plus * (l1 * (set.phi1)(&v) * ep.k_eps.value(j) + l2 * (set.psi2)(&v) * ep.l_eps.value(j)));
    }
    let corr = GridFunction::new(grid, f)?.cumulative_integral();
    let big_u = ep.big_u_eps.on_grid(grid)?;
    Ok(big_u.zip_map(&corr, |a, b| a + b / t))
}

fn check_r_cut(r_cut: f64) -> Result<()> {
    if r_cut > 0.0 && r_cut < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("r_cut must lie in (0, 1), got {r_cut}")))
    }
}

/// `Δ_ε = ∫₀^{r_cut} W̃_ε(ν)² dν` for `W̃` on the normalized grid.
pub fn delta_eps(w_tilde: &GridFunction, r_cut: f64) -> f64 {
    let scale = w_tilde.grid().horizon();
    w_tilde.map(|v| v * v).integrate_to(r_cut * scale) / scale
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOptions {
    pub alpha: f64,
    pub r_cut: f64,
    pub mde: MdeOptions,
}

impl Default for TestOptions {
    fn default() -> Self {
        Self { alpha: 0.05, r_cut: DEFAULT_R_CUT, mde: MdeOptions::default() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    /// `∫₀ᵀ u_ε² dt`.
    pub delta_star_eps: f64,
    /// `∫₀¹ U_ε(ν)² dν`.
    pub delta_tilde_eps: f64,
    pub phi2_min: f64,
    pub phi2_nonpositive_fraction: f64,
    pub transform_degenerate: bool,
    pub boundary: bool,
    pub mde_distance: f64,
    pub mdeq_residual: f64,
    pub mde_converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub theta_star: f64,
    pub delta_eps: f64,
    pub c_alpha: f64,
    pub alpha: f64,
    pub reject: bool,
    pub diagnostics: Diagnostics,
}

/// Everything [`run_test`] computes, for callers that want the paths too.
#[derive(Debug, Clone)]
pub struct TestRun {
    pub report: TestReport,
    pub mde: MdeResult,
    pub profile: EmpiricalProfile,
    pub w_tilde: GridFunction,
}

/// MDE, empirical profile, `W̃_ε`, `Δ_ε`, decision.
pub fn run_test(traj: &Trajectory, model: &ModelSpec, options: &TestOptions, table: &QuantileTable) -> Result<TestReport> {
    run_test_full(traj, model, options, table).map(|r| r.report)
}

pub fn run_test_full(traj: &Trajectory, model: &ModelSpec, options: &TestOptions, table: &QuantileTable) -> Result<TestRun> {
    table.check_r_cut(options.r_cut)?;
    let c_alpha = table.c_alpha(options.alpha)?;
    let (mde, flow) = estimate_with(traj, model, options.mde)?;
    let u = compute_u_eps(traj, model, &flow)?;
    let ep = EmpiricalProfile::new(traj, model, &flow, u)?;
    let w_tilde = compute_w_tilde(&ep, options.r_cut)?;
    let delta = delta_eps(&w_tilde, options.r_cut);
    let (bad_fraction, phi2_min) = ep.phi2_diagnostics(options.r_cut);
    let diagnostics = Diagnostics {
        delta_star_eps: ep.u_eps.map(|v| v * v).integral(),
        delta_tilde_eps: ep.big_u_eps.map(|v| v * v).integral(),
        phi2_min,
        phi2_nonpositive_fraction: bad_fraction,
        transform_degenerate: bad_fraction > DEGENERATE_FRACTION,
        boundary: mde.boundary,
        mde_distance: mde.distance,
        mdeq_residual: mde.mdeq_residual,
        mde_converged: mde.converged,
    };
    let report = TestReport {
        theta_star: mde.theta_star,
        delta_eps: delta,
        c_alpha,
        alpha: options.alpha,
        reject: delta > c_alpha,
        diagnostics,
    };
    Ok(TestRun { report, mde, profile: ep, w_tilde })
}

/// Limit of `u_ε`: `u(t) = (x⁽¹⁾_t − ζ ẋ_t) / S(θ, x_t)` with
/// `ζ = J⁻¹ ∫₀ᵀ ẋ_t x⁽¹⁾_t dt`.
pub fn limit_u(flow: &FlowSolution, x1: &GridFunction) -> GridFunction {
    let zeta = flow.xdot.zip_map(x1, |a, b| a * b).integral() / flow.j;
    let num = x1.zip_map(&flow.xdot, |a, d| a - zeta * d);
    num.zip_map(&flow.drift, |n, s| n / s)
}

/// Limit of `U_ε` on the normalized grid, built along the flow.
#[allow(non_snake_case)]
pub fn limit_U(model: &ModelSpec, flow: &FlowSolution, u: &GridFunction) -> GridFunction {
    let s_x = flow.x.map(|x| model.s_x(flow.theta, x));
    let one = GridFunction::constant(flow.grid(), 1.0);
    let zero = GridFunction::zeros(flow.grid());
    ito_rewrite(&one, &zero, &flow.drift, &s_x, u).on_grid(flow.grid().normalized()).expect("same node count")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deterministic::solve_flow;
    use crate::grid::TimeGrid;
    use crate::limit_transform::{apply_l, build_profile};
    use crate::sde::{simulate, simulate_limit_x1, simulate_refined, Seed};
    use approx::assert_abs_diff_eq;

    fn setup(theta: f64, eps: f64, t: f64, rep: u64) -> (ModelSpec, Trajectory, FlowSolution) {
        let m = ModelSpec::linear().with_horizon(t).unwrap();
        let grid = TimeGrid::new(t, 2000).unwrap();
        let traj = simulate(&m, theta, eps, grid, Seed::new(123, rep)).unwrap();
        let (_, flow) = estimate_with(&traj, &m, MdeOptions::default()).unwrap();
        (m, traj, flow)
    }

    #[test]
    fn zero_noise_gives_zero_processes() {
        let m = ModelSpec::linear();
        let grid = TimeGrid::unit(2000).unwrap();
        let flow = solve_flow(&m, 1.2, grid).unwrap();
        let traj = Trajectory::new(flow.x.clone(), 0.0).unwrap();
        let u = compute_u_eps(&traj, &m, &flow).unwrap();
        assert!(u.sup_norm() == 0.0);
        let ep = EmpiricalProfile::new(&traj, &m, &flow, u.clone()).unwrap();
        assert!(ep.big_u_eps.sup_norm() == 0.0);
        assert!(ep.k_eps.sup_norm() == 0.0 && ep.l_eps.sup_norm() == 0.0);
        let w = compute_w_tilde(&ep, 0.95).unwrap();
        assert_eq!(delta_eps(&w, 0.95), 0.0);
        assert!(compute_U_eps(&traj, &m, 1.2, &u).unwrap().sup_norm() == 0.0);
    }

    #[test]
    fn processes_start_at_zero() {
        let (m, traj, flow) = setup(1.0, 0.01, 1.0, 0);
        let u = compute_u_eps(&traj, &m, &flow).unwrap();
        assert_eq!(u.value(0), 0.0);
        let ep = EmpiricalProfile::new(&traj, &m, &flow, u).unwrap();
        assert_eq!(ep.k_eps.value(0), 0.0);
        assert_eq!(ep.l_eps.value(0), 0.0);
        assert_eq!(ep.big_u_eps.value(0), 0.0);
    }

    #[test]
    fn delta_of_constant_path() {
        let grid = TimeGrid::unit(2000).unwrap();
        assert_abs_diff_eq!(delta_eps(&GridFunction::constant(grid, 1.0), 0.95), 0.95, epsilon = 1e-12);
        assert_eq!(delta_eps(&GridFunction::zeros(grid), 0.95), 0.0);
    }

    #[test]
    fn scaled_path_matches_normalized_path() {
        for t in [1.0, 2.0] {
            let (m, traj, flow) = setup(1.0, 0.01, t, 3);
            let u = compute_u_eps(&traj, &m, &flow).unwrap();
            let ep = EmpiricalProfile::new(&traj, &m, &flow, u).unwrap();
            let w = compute_w_tilde(&ep, 0.95).unwrap();
            let ws = w_tilde_scaled(&ep, 0.95).unwrap();
            let gap = w.values().iter().zip(ws.values()).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            assert!(gap <= 1e-10, "T = {t}: {gap}");
            let d1 = delta_eps(&w, 0.95);
            let d2 = ws.map(|v| v * v).integrate_to(0.95 * t) / t;
            assert!((d1 - d2).abs() <= 1e-8);
        }
    }

    #[test]
    fn ordinary_form_close_to_left_point_transform() {
        // away from r_cut, where 1/φ₂ is moderate, the two forms differ by O(ε)
        let m = ModelSpec::linear();
        let grid = TimeGrid::unit(2000).unwrap();
        let k_end = grid.floor_index(0.8);
        let gap = |eps: f64| {
            let traj = simulate(&m, 1.0, eps, grid, Seed::new(123, 5)).unwrap();
            let (_, flow) = estimate_with(&traj, &m, MdeOptions::default()).unwrap();
            let u = compute_u_eps(&traj, &m, &flow).unwrap();
            let ep = EmpiricalProfile::new(&traj, &m, &flow, u).unwrap();
            let w = compute_w_tilde(&ep, 0.95).unwrap();
            let l = apply_l(&ep.big_u_eps, &ep.profile, 0.95).unwrap();
            (0..=k_end).map(|k| (w.value(k) - l.value(k)).abs()).fold(0.0, f64::max)
        };
        let (coarse, fine) = (gap(1e-2), gap(1e-3));
        assert!(coarse < 5e-2, "{coarse}");
        assert!(fine < coarse / 3.0, "{fine} vs {coarse}");
    }

    #[test]
    fn empirical_coefficients_approach_limit() {
        let m = ModelSpec::linear();
        let grid = TimeGrid::unit(2000).unwrap();
        let limit = build_profile(&m, &solve_flow(&m, 1.0, grid).unwrap()).unwrap();
        let mut prev = [f64::INFINITY; 4];
        for eps in [1e-2, 1e-3, 1e-4] {
            // fine Euler steps keep the discretization bias below the ε = 1e-4 signal
            let traj = simulate_refined(&m, 1.0, eps, grid, Seed::new(31, 0), 100).unwrap();
            let (_, flow) = estimate_with(&traj, &m, MdeOptions::default()).unwrap();
            let u = compute_u_eps(&traj, &m, &flow).unwrap();
            let ep = EmpiricalProfile::new(&traj, &m, &flow, u).unwrap();
            let p = &ep.profile;
            let d = [
                p.h.sup_distance(&limit.h),
                p.g.sup_distance(&limit.g),
                p.i4.sup_distance(&limit.i4).max(p.i1.sup_distance(&limit.i1)),
                p.phi2.sup_distance(&limit.phi2),
            ];
            for k in 0..4 {
                assert!(d[k] < prev[k], "ε = {eps}: {d:?} vs {prev:?}");
            }
            prev = d;
        }
    }

    #[test]
    fn u_eps_approaches_limit_process() {
        let m = ModelSpec::linear();
        let grid = TimeGrid::unit(2000).unwrap();
        let seed = Seed::new(17, 2);
        let eps = 1e-4;
        let traj = simulate(&m, 1.0, eps, grid, seed).unwrap();
        let true_flow = solve_flow(&m, 1.0, grid).unwrap();
        let lp = simulate_limit_x1(&true_flow, seed);
        let u_lim = limit_u(&true_flow, &lp.x1);
        let (_, flow) = estimate_with(&traj, &m, MdeOptions::default()).unwrap();
        let u = compute_u_eps(&traj, &m, &flow).unwrap();
        assert!(u.sup_distance(&u_lim) <= 5e-2, "{}", u.sup_distance(&u_lim));
        let big_u = compute_U_eps(&traj, &m, flow.theta, &u).unwrap().on_grid(grid.normalized()).unwrap();
        let big_u_lim = limit_U(&m, &true_flow, &u_lim);
        assert!(big_u.sup_distance(&big_u_lim) <= 5e-2);
    }

    #[test]
    fn regularity_error_on_nonpositive_path() {
        let m = ModelSpec::linear();
        let grid = TimeGrid::unit(10).unwrap();
        let flow = solve_flow(&m, 1.0, grid).unwrap();
        let x = flow.x.map(|v| v - 2.0);
        let traj = Trajectory::new(x, 0.1).unwrap();
        assert!(matches!(compute_u_eps(&traj, &m, &flow), Err(Error::Regularity { .. })));
    }
}
