//! WebAssembly bindings for the browser demo. Every export takes plain
//! numbers and returns a JSON string; the `*_json` functions are the same
//! operations with Rust errors, callable natively.

use serde::Serialize;
use smallnoise_gof::empirical::{run_test_full, TestOptions};
use smallnoise_gof::harness::AlternativeSpec;
use smallnoise_gof::limit_transform::{build_profile, check_r0, DEFAULT_R_CUT};
use smallnoise_gof::mde::{estimate_with, MdeOptions};
use smallnoise_gof::model::builtin;
use smallnoise_gof::sde::{simulate, simulate_alternative, Seed};
use smallnoise_gof::{solve_flow, GridFunction, ModelSpec, QuantileTable, TimeGrid};
use wasm_bindgen::prelude::*;

/// Points per curve sent to the page.
const MAX_POINTS: usize = 400;
const MAX_STEPS: usize = 20_000;

#[derive(Serialize)]
struct Curve {
    t: Vec<f64>,
    y: Vec<f64>,
}

impl Curve {
    fn from(f: &GridFunction) -> Self {
        let stride = f.values().len().div_ceil(MAX_POINTS).max(1);
        let grid = f.grid();
        let mut idx: Vec<usize> = (0..grid.len()).step_by(stride).collect();
        if idx.last() != Some(&grid.n_steps()) {
            idx.push(grid.n_steps());
        }
        Self { t: idx.iter().map(|&k| grid.node(k)).collect(), y: idx.iter().map(|&k| f.value(k)).collect() }
    }
}

fn model(name: &str) -> Result<ModelSpec, String> {
    builtin(name).map_err(|e| e.to_string())
}

fn grid(m: &ModelSpec, n_steps: usize) -> Result<TimeGrid, String> {
    if n_steps == 0 || n_steps > MAX_STEPS {
        return Err(format!("grid steps must lie in 1..={MAX_STEPS}"));
    }
    TimeGrid::new(m.horizon, n_steps).map_err(|e| e.to_string())
}

fn to_json(v: &impl Serialize) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct FitOutput {
    theta_star: f64,
    distance: f64,
    boundary: bool,
    observed: Curve,
    fitted: Curve,
}

/// Simulate a path under the hypothesis and fit it by minimum distance.
pub fn simulate_and_fit_json(model_name: &str, theta: f64, epsilon: f64, seed: u64, n_steps: usize) -> Result<String, String> {
    let m = model(model_name)?;
    let g = grid(&m, n_steps)?;
    let traj = simulate(&m, theta, epsilon, g, Seed::new(seed, 0)).map_err(|e| e.to_string())?;
    let (mde, flow) = estimate_with(&traj, &m, MdeOptions::default()).map_err(|e| e.to_string())?;
    to_json(&FitOutput {
        theta_star: mde.theta_star,
        distance: mde.distance,
        boundary: mde.boundary,
        observed: Curve::from(&traj.x),
        fitted: Curve::from(&flow.x),
    })
}

#[derive(Serialize)]
struct TestDemoOutput {
    theta_star: f64,
    delta_eps: f64,
    c_alpha: f64,
    reject: bool,
    phi2_nonpositive_fraction: f64,
    observed: Curve,
    big_u: Curve,
    w_tilde: Curve,
    r_cut: f64,
}

/// Simulate under `S(θ, x) + amplitude · sin x` and run the test at level 5%.
pub fn run_test_demo_json(model_name: &str, theta: f64, epsilon: f64, amplitude: f64, seed: u64) -> Result<String, String> {
    let m = model(model_name)?;
    let g = grid(&m, TimeGrid::DEFAULT_STEPS)?;
    m.check_theta(theta).map_err(|e| e.to_string())?;
    let alt = AlternativeSpec { amplitude, ..AlternativeSpec::default() };
    let traj = if amplitude == 0.0 {
        simulate(&m, theta, epsilon, g, Seed::new(seed, 0))
    } else {
        simulate_alternative(alt.drift(&m, theta), m.x0, epsilon, g, Seed::new(seed, 0))
    }
    .map_err(|e| e.to_string())?;
    let opts = TestOptions::default();
    let run = run_test_full(&traj, &m, &opts, &QuantileTable::default_table()).map_err(|e| e.to_string())?;
    to_json(&TestDemoOutput {
        theta_star: run.report.theta_star,
        delta_eps: run.report.delta_eps,
        c_alpha: run.report.c_alpha,
        reject: run.report.reject,
        phi2_nonpositive_fraction: run.report.diagnostics.phi2_nonpositive_fraction,
        observed: Curve::from(&traj.x),
        big_u: Curve::from(&run.profile.big_u_eps),
        w_tilde: Curve::from(&run.w_tilde),
        r_cut: opts.r_cut,
    })
}

#[derive(Serialize)]
struct ProfileOutput {
    h: Curve,
    g: Curve,
    phi1: Curve,
    phi2: Curve,
    psi1: Curve,
    psi2: Curve,
    g_norm_squared: f64,
    r0_holds: bool,
    phi2_min: f64,
    r_cut: f64,
}

/// `h`, `g` and the transform coefficients for a builtin model at `θ`.
pub fn transform_profile_json(model_name: &str, theta: f64) -> Result<String, String> {
    let m = model(model_name)?;
    let g = grid(&m, TimeGrid::DEFAULT_STEPS)?;
    let flow = solve_flow(&m, theta, g).map_err(|e| e.to_string())?;
    let p = build_profile(&m, &flow).map_err(|e| e.to_string())?;
    let r0 = check_r0(&p);
    to_json(&ProfileOutput {
        h: Curve::from(&p.h),
        g: Curve::from(&p.g),
        phi1: Curve::from(&p.phi1),
        phi2: Curve::from(&p.phi2),
        psi1: Curve::from(&p.psi1),
        psi2: Curve::from(&p.psi2),
        g_norm_squared: p.g_norm_squared(),
        r0_holds: r0.r0_holds,
        phi2_min: p.phi2_min(DEFAULT_R_CUT).0,
        r_cut: DEFAULT_R_CUT,
    })
}

#[wasm_bindgen]
pub fn simulate_and_fit(model: &str, theta: f64, epsilon: f64, seed: u32, n_steps: u32) -> Result<String, JsValue> {
    simulate_and_fit_json(model, theta, epsilon, u64::from(seed), n_steps as usize).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn run_test_demo(model: &str, theta: f64, epsilon: f64, amplitude: f64, seed: u32) -> Result<String, JsValue> {
    run_test_demo_json(model, theta, epsilon, amplitude, u64::from(seed)).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn transform_profile(model: &str, theta: f64) -> Result<String, JsValue> {
    transform_profile_json(model, theta).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn fit_recovers_theta() {
        let v: Value = serde_json::from_str(&simulate_and_fit_json("linear", 1.2, 0.01, 3, 1000).unwrap()).unwrap();
        assert!((v["theta_star"].as_f64().unwrap() - 1.2).abs() < 0.05);
        let n = v["observed"]["t"].as_array().unwrap().len();
        assert!(n <= MAX_POINTS + 2 && n == v["observed"]["y"].as_array().unwrap().len());
        assert_eq!(v["observed"]["t"].as_array().unwrap().last().unwrap().as_f64().unwrap(), 1.0);
    }

    #[test]
    fn alternative_is_rejected_and_hypothesis_path_reports() {
        let alt: Value = serde_json::from_str(&run_test_demo_json("linear", 1.0, 0.005, 0.3, 1).unwrap()).unwrap();
        assert!(alt["reject"].as_bool().unwrap());
        let h0: Value = serde_json::from_str(&run_test_demo_json("linear", 1.0, 0.01, 0.0, 1).unwrap()).unwrap();
        assert!(h0["delta_eps"].as_f64().unwrap() >= 0.0);
        assert_eq!(h0["w_tilde"]["t"].as_array().unwrap().last().unwrap().as_f64().unwrap(), 1.0);
    }

    #[test]
    fn profile_is_normalized() {
        let v: Value = serde_json::from_str(&transform_profile_json("constant", 0.8).unwrap()).unwrap();
        assert!((v["g_norm_squared"].as_f64().unwrap() - 1.0).abs() < 1e-6);
        assert!(v["phi2_min"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn errors_are_messages() {
        assert!(transform_profile_json("quadratic", 1.0).unwrap_err().contains("quadratic"));
        assert!(simulate_and_fit_json("linear", 1.0, 0.01, 0, 0).is_err());
        assert!(run_test_demo_json("linear", 5.0, 0.01, 0.0, 0).is_err());
    }
}
