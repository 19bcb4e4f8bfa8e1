//! Parametric drift families `S(θ, x)` with analytic partial derivatives.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::{deterministic, Error, Result};

/// Scalar function of `(θ, x)`.
pub type DriftFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Closed-form flow `(θ, t) ↦ x_t(θ)`.
pub type FlowFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// `S`, `S′ = ∂S/∂x`, `Ṡ = ∂S/∂θ`, `S̈ = ∂²S/∂θ²`, `Ṡ′ = ∂²S/∂θ∂x`.
#[derive(Clone)]
pub struct Drift {
    pub value: DriftFn,
    pub dx: DriftFn,
    pub dtheta: DriftFn,
    pub dtheta2: DriftFn,
    pub dtheta_dx: DriftFn,
}

impl Drift {
    pub fn new<S, Sx, St, Stt, Stx>(value: S, dx: Sx, dtheta: St, dtheta2: Stt, dtheta_dx: Stx) -> Self
    where
        S: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        Sx: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        St: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        Stt: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        Stx: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            value: Arc::new(value),
            dx: Arc::new(dx),
            dtheta: Arc::new(dtheta),
            dtheta2: Arc::new(dtheta2),
            dtheta_dx: Arc::new(dtheta_dx),
        }
    }
}

#[derive(Clone)]
pub struct ModelSpec {
    pub name: String,
    /// Open parameter interval `(a, b)`.
    pub theta_bounds: (f64, f64),
    pub x0: f64,
    pub horizon: f64,
    pub drift: Drift,
    pub closed_form: Option<FlowFn>,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("theta_bounds", &self.theta_bounds)
            .field("x0", &self.x0)
            .field("horizon", &self.horizon)
            .field("closed_form", &self.closed_form.is_some())
            .finish()
    }
}

pub const BUILTIN_MODELS: [&str; 2] = ["linear", "constant"];

/// Look up a builtin model by name.
pub fn builtin(name: &str) -> Result<ModelSpec> {
    ModelSpec::builtin(name)
}

impl ModelSpec {
    pub fn new(name: impl Into<String>, theta_bounds: (f64, f64), x0: f64, horizon: f64, drift: Drift) -> Result<Self> {
        let (a, b) = theta_bounds;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Config(format!("invalid parameter interval ({a}, {b})")));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Config(format!("horizon must be positive, got {horizon}")));
        }
        if !x0.is_finite() {
            return Err(Error::Config("initial value must be finite".into()));
        }
        Ok(Self { name: name.into(), theta_bounds, x0, horizon, drift, closed_form: None })
    }

    /// `S(θ, x) = θ x`, `x₀ = 1`, `Θ = (0.5, 2)`, `x_t = x₀ e^{θt}`.
    pub fn linear() -> Self {
        let drift = Drift::new(|th, x| th * x, |th, _| th, |_, x| x, |_, _| 0.0, |_, _| 1.0);
        let x0 = 1.0;
        Self {
            name: "linear".into(),
            theta_bounds: (0.5, 2.0),
            x0,
            horizon: 1.0,
            drift,
            closed_form: Some(Arc::new(move |th, t| x0 * (th * t).exp())),
        }
    }

    /// `S(θ, x) = θ`, `x₀ = 1`, `Θ = (0.5, 2)`, `x_t = x₀ + θt`.
    pub fn constant() -> Self {
        let drift = Drift::new(|th, _| th, |_, _| 0.0, |_, _| 1.0, |_, _| 0.0, |_, _| 0.0);
        let x0 = 1.0;
        Self {
            name: "constant".into(),
            theta_bounds: (0.5, 2.0),
            x0,
            horizon: 1.0,
            drift,
            closed_form: Some(Arc::new(move |th, t| x0 + th * t)),
        }
    }

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "linear" => Ok(Self::linear()),
            "constant" => Ok(Self::constant()),
            other => Err(Error::Config(format!(
                "unknown model '{other}', expected one of {}",
                BUILTIN_MODELS.join(", ")
            ))),
        }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Config(format!("horizon must be positive, got {horizon}")));
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn with_bounds(mut self, a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Config(format!("invalid parameter interval ({a}, {b})")));
        }
        self.theta_bounds = (a, b);
        Ok(self)
    }

    pub fn with_closed_form(mut self, flow: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        self.closed_form = Some(Arc::new(flow));
        self
    }

    pub fn s(&self, theta: f64, x: f64) -> f64 {
        (self.drift.value)(theta, x)
    }

    pub fn s_x(&self, theta: f64, x: f64) -> f64 {
        (self.drift.dx)(theta, x)
    }

    pub fn s_theta(&self, theta: f64, x: f64) -> f64 {
        (self.drift.dtheta)(theta, x)
    }

    pub fn s_theta2(&self, theta: f64, x: f64) -> f64 {
        (self.drift.dtheta2)(theta, x)
    }

    pub fn s_theta_x(&self, theta: f64, x: f64) -> f64 {
        (self.drift.dtheta_dx)(theta, x)
    }

    pub fn contains(&self, theta: f64) -> bool {
        let (a, b) = self.theta_bounds;
        theta > a && theta < b
    }

    pub fn check_theta(&self, theta: f64) -> Result<()> {
        if self.contains(theta) {
            Ok(())
        } else {
            let (a, b) = self.theta_bounds;
            Err(Error::Config(format!("θ = {theta} outside the parameter interval ({a}, {b})")))
        }
    }

    /// Closed-form `x_t(θ)` when the model supplies one.
    pub fn flow_at(&self, theta: f64, t: f64) -> Option<f64> {
        self.closed_form.as_ref().map(|f| f(theta, t))
    }
}

/// Outcome of [`check_regularity`].
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub model: String,
    pub n_points: usize,
    pub min_drift: f64,
    pub min_drift_at: (f64, f64),
    pub max_derivative_error: f64,
    pub worst_derivative: String,
    pub x_range: (f64, f64),
}

const FD_STEP: f64 = 1e-5;

fn central(f: impl Fn(f64) -> f64, at: f64) -> f64 {
    (f(at + FD_STEP) - f(at - FD_STEP)) / (2.0 * FD_STEP)
}

/// Largest relative gap `|fd − an| / max(1, |an|)` between each analytic
/// partial and a central difference, together with its name.
pub fn derivative_error(model: &ModelSpec, theta: f64, x: f64) -> (f64, &'static str) {
    let checks = [
        ("dx", model.s_x(theta, x), central(|y| model.s(theta, y), x)),
        ("dtheta", model.s_theta(theta, x), central(|p| model.s(p, x), theta)),
        ("dtheta2", model.s_theta2(theta, x), central(|p| model.s_theta(p, x), theta)),
        ("dtheta_dx", model.s_theta_x(theta, x), central(|y| model.s_theta(theta, y), x)),
    ];
    checks
        .into_iter()
        .map(|(name, an, fd)| ((fd - an).abs() / an.abs().max(1.0), name))
        .fold((0.0, "none"), |acc, c| if c.0 > acc.0 { c } else { acc })
}

/// Scan θ over the closed interval `[a, b]` and x over the deterministic
/// flow tube inflated by `±5ε√T`. Fails on the first non-positive drift.
pub fn check_regularity(model: &ModelSpec, n_samples: usize, epsilon: f64) -> Result<ValidationReport> {
    if n_samples < 10 {
        return Err(Error::Config(format!("need at least 10 samples, got {n_samples}")));
    }
    let (a, b) = model.theta_bounds;
    let tube = 5.0 * epsilon.max(0.0) * model.horizon.sqrt();
    let mut report = ValidationReport {
        model: model.name.clone(),
        n_points: 0,
        min_drift: f64::INFINITY,
        min_drift_at: (f64::NAN, f64::NAN),
        max_derivative_error: 0.0,
        worst_derivative: "none".into(),
        x_range: (f64::INFINITY, f64::NEG_INFINITY),
    };
    let n_time = n_samples.max(10);
    for i in 0..n_samples {
        let theta = a + (b - a) * i as f64 / (n_samples - 1) as f64;
        let path = deterministic::rk4_path(model, theta, model.horizon, n_time * 4);
        for (k, &x) in path.iter().enumerate().step_by(4) {
            let points = if tube > 0.0 { vec![x - tube, x, x + tube] } else { vec![x] };
            for y in points {
                let value = model.s(theta, y);
                report.n_points += 1;
                if !(value > 0.0) {
                    return Err(Error::Regularity { theta, x: y, value });
                }
                if value < report.min_drift {
                    report.min_drift = value;
                    report.min_drift_at = (theta, y);
                }
                report.x_range.0 = report.x_range.0.min(y);
                report.x_range.1 = report.x_range.1.max(y);
            }
            if k % (4 * (n_time / 10).max(1)) == 0 {
                let (err, name) = derivative_error(model, theta, x);
                if err > report.max_derivative_error {
                    report.max_derivative_error = err;
                    report.worst_derivative = name.into();
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn partials(m: &ModelSpec, th: f64, x: f64) -> [f64; 5] {
        [m.s(th, x), m.s_x(th, x), m.s_theta(th, x), m.s_theta2(th, x), m.s_theta_x(th, x)]
    }

    #[test]
    fn builtin_partials() {
        assert_eq!(partials(&ModelSpec::linear(), 1.0, 2.0), [2.0, 1.0, 2.0, 0.0, 1.0]);
        assert_eq!(partials(&ModelSpec::constant(), 0.7, 5.0), [0.7, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn unknown_model_is_a_config_error() {
        assert!(matches!(builtin("cubic"), Err(Error::Config(_))));
        assert_eq!(builtin("linear").unwrap().name, "linear");
    }

    #[test]
    fn linear_drift_positive_on_reachable_set() {
        let m = ModelSpec::linear();
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            let x = m.flow_at(0.5, t).unwrap();
            assert!(m.s(0.5, x) > 0.0);
        }
    }

    #[test]
    fn regularity_report_for_linear() {
        let r = check_regularity(&ModelSpec::linear(), 100, 0.01).unwrap();
        assert!(r.min_drift > 0.0);
        assert!(r.max_derivative_error < 1e-6, "{r:?}");
    }

    #[test]
    fn regularity_min_drift_for_constant_is_lower_bound() {
        let r = check_regularity(&ModelSpec::constant(), 20, 0.01).unwrap();
        assert_eq!(r.min_drift, 0.5);
    }

    #[test]
    fn regularity_detects_sign_change() {
        let drift = Drift::new(|th, x| th - x, |_, _| -1.0, |_, _| 1.0, |_, _| 0.0, |_, _| 0.0);
        let m = ModelSpec::new("mean-reverting", (0.5, 2.0), 1.0, 1.0, drift).unwrap();
        match check_regularity(&m, 10, 0.0) {
            Err(Error::Regularity { value, .. }) => assert!(value <= 0.0),
            other => panic!("expected violation, got {other:?}"),
        }
        assert!(check_regularity(&m, 5, 0.0).is_err());
    }

    #[test]
    fn closed_forms_solve_the_ode() {
        for m in [ModelSpec::linear(), ModelSpec::constant()] {
            for th in [0.6, 1.0, 1.9] {
                for i in 0..=200 {
                    let t = i as f64 / 200.0;
                    let h = 1e-6;
                    let f = |s: f64| m.flow_at(th, s).unwrap();
                    let deriv = (f(t + h) - f(t - h)) / (2.0 * h);
                    assert_abs_diff_eq!(deriv, m.s(th, f(t)), epsilon = 1e-8 * (1.0 + deriv.abs()));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn builtin_partials_match_finite_differences(th in 0.5..2.0f64, x in 0.1..10.0f64) {
            for m in [ModelSpec::linear(), ModelSpec::constant()] {
                let (err, name) = derivative_error(&m, th, x);
                prop_assert!(err <= 1e-6, "{} {} error {}", m.name, name, err);
            }
        }
    }
}
