//! Experiment drivers behind the `sngof` binary.

use std::io::Write;
use std::path::PathBuf;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::{self, QuantileTable};
use crate::deterministic::solve_flow;
use crate::empirical::{run_test, TestOptions, TestReport};
use crate::grid::{GridFunction, TimeGrid};
use crate::limit_transform::{
    self, build_kernel, check_r0, coefficient_identities, model_hg, random_smooth_hg, score_reduction_residual,
    CoefficientSet, TransformProfile, KERNEL_CHECK_STEPS,
};
use crate::mde::MdeOptions;
use crate::model::{check_regularity, ModelSpec};
use crate::sde::{simulate, simulate_alternative, Seed, Trajectory};
use crate::{Error, Result};

/// Drift `S(θ_true, x) + amplitude · sin(frequency · x) + shift`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlternativeSpec {
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "one")]
    pub frequency: f64,
    #[serde(default)]
    pub shift: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for AlternativeSpec {
    fn default() -> Self {
        Self { amplitude: 0.3, frequency: 1.0, shift: 0.0 }
    }
}

impl AlternativeSpec {
    pub fn drift<'a>(&self, model: &'a ModelSpec, theta: f64) -> impl Fn(f64) -> f64 + 'a {
        let Self { amplitude, frequency, shift } = *self;
        move |x| model.s(theta, x) + amplitude * (frequency * x).sin() + shift
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: String,
    pub theta_true: f64,
    /// Overrides the model's parameter interval.
    pub theta_bounds: Option<[f64; 2]>,
    pub epsilon: f64,
    pub horizon: f64,
    pub n_steps: usize,
    pub alpha: f64,
    pub n_reps: usize,
    pub base_seed: u64,
    pub r_cut: f64,
    pub n_scan: usize,
    /// Critical-value table; the bundled one when absent.
    pub quantile_table: Option<PathBuf>,
    pub alternative: Option<AlternativeSpec>,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: "linear".into(),
            theta_true: 1.0,
            theta_bounds: None,
            epsilon: 0.01,
            horizon: 1.0,
            n_steps: TimeGrid::DEFAULT_STEPS,
            alpha: 0.05,
            n_reps: 2000,
            base_seed: 20_240_501,
            r_cut: limit_transform::DEFAULT_R_CUT,
            n_scan: MdeOptions::default().n_scan,
            quantile_table: None,
            alternative: None,
            output: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::Config(format!("epsilon must be non-negative, got {}", self.epsilon)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.r_cut > 0.0 && self.r_cut < 1.0) {
            return Err(Error::Config(format!("r_cut must lie in (0, 1), got {}", self.r_cut)));
        }
        TimeGrid::new(self.horizon, self.n_steps)?;
        self.model_spec()?.check_theta(self.theta_true)
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let mut m = ModelSpec::builtin(&self.model)?.with_horizon(self.horizon)?;
        if let Some([a, b]) = self.theta_bounds {
            m = m.with_bounds(a, b)?;
        }
        Ok(m)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon, self.n_steps)
    }

    pub fn test_options(&self) -> TestOptions {
        TestOptions { alpha: self.alpha, r_cut: self.r_cut, mde: MdeOptions { n_scan: self.n_scan, ..MdeOptions::default() } }
    }

    pub fn table(&self) -> Result<QuantileTable> {
        let t = match &self.quantile_table {
            Some(p) => QuantileTable::load(p)?,
            None => QuantileTable::default_table(),
        };
        t.check_r_cut(self.r_cut)?;
        Ok(t)
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Simulate one path under the hypothesis, or under the alternative when given.
pub fn cmd_simulate(config: &RunConfig, replication: u64) -> Result<Trajectory> {
    config.validate()?;
    let model = config.model_spec()?;
    let seed = Seed::new(config.base_seed, replication);
    match &config.alternative {
        Some(alt) => {
            simulate_alternative(alt.drift(&model, config.theta_true), model.x0, config.epsilon, config.grid()?, seed)
        }
        None => simulate(&model, config.theta_true, config.epsilon, config.grid()?, seed),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TestOutput {
    pub config_hash: String,
    #[serde(flatten)]
    pub report: TestReport,
}

pub fn cmd_test(config: &RunConfig, trajectory: &Trajectory) -> Result<TestOutput> {
    config.validate()?;
    let model = config.model_spec()?;
    let table = config.table()?;
    let report = run_test(trajectory, &model, &config.test_options(), &table)?;
    Ok(TestOutput { config_hash: config.hash(), report })
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyRow {
    pub rep: u64,
    pub seed: u64,
    pub theta_star: f64,
    pub delta_eps: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudySummary {
    pub kind: String,
    pub config_hash: String,
    pub base_seed: u64,
    pub alpha: f64,
    pub n_reps: usize,
    pub n_valid: usize,
    /// Replications where the pipeline failed, e.g. a path leaving the region
    /// where the drift is positive. Excluded from the rate.
    pub n_failed: usize,
    pub n_rejected: usize,
    pub rate: f64,
    pub stderr: f64,
    pub mean_delta: f64,
    pub mean_theta_star: f64,
    pub n_boundary: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Study {
    pub rows: Vec<StudyRow>,
    pub summary: StudySummary,
    pub failures: Vec<(u64, String)>,
}

impl Study {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["rep", "seed", "theta_star", "delta_eps", "reject"])?;
        for r in &self.rows {
            w.write_record([r.rep.to_string(), r.seed.to_string(), r.theta_star.to_string(), r.delta_eps.to_string(), r.reject.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn run_study(config: &RunConfig, kind: &str, alternative: Option<AlternativeSpec>) -> Result<Study> {
    config.validate()?;
    if config.n_reps == 0 {
        return Err(Error::Config("n_reps = 0: nothing to summarize".into()));
    }
    let model = config.model_spec()?;
    let table = config.table()?;
    let grid = config.grid()?;
    let opts = config.test_options();
    let one = |rep: u64| -> (u64, Result<(TestReport, bool)>) {
        let seed = Seed::new(config.base_seed, rep);
        let traj = match alternative {
            Some(alt) => simulate_alternative(alt.drift(&model, config.theta_true), model.x0, config.epsilon, grid, seed),
            None => simulate(&model, config.theta_true, config.epsilon, grid, seed),
        };
        (rep, traj.and_then(|t| run_test(&t, &model, &opts, &table)).map(|r| {
            let b = r.diagnostics.boundary;
            (r, b)
        }))
    };
    let reps = 0..config.n_reps as u64;
    #[cfg(feature = "parallel")]
    let results: Vec<_> = reps.into_par_iter().map(one).collect();
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = reps.map(one).collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut n_boundary = 0;
    for (rep, r) in results {
        match r {
            Ok((report, boundary)) => {
                n_boundary += boundary as usize;
                rows.push(StudyRow {
                    rep,
                    seed: config.base_seed,
                    theta_star: report.theta_star,
                    delta_eps: report.delta_eps,
                    reject: report.reject,
                });
            }
            Err(e) => failures.push((rep, e.to_string())),
        }
    }
    let n_valid = rows.len();
    let n_rejected = rows.iter().filter(|r| r.reject).count();
    let rate = if n_valid > 0 { n_rejected as f64 / n_valid as f64 } else { f64::NAN };
    let mean = |f: fn(&StudyRow) -> f64| rows.iter().map(f).sum::<f64>() / n_valid as f64;
    let summary = StudySummary {
        kind: kind.into(),
        config_hash: config.hash(),
        base_seed: config.base_seed,
        alpha: config.alpha,
        n_reps: config.n_reps,
        n_valid,
        n_failed: failures.len(),
        n_rejected,
        rate,
        stderr: (rate * (1.0 - rate) / n_valid as f64).sqrt(),
        mean_delta: mean(|r| r.delta_eps),
        mean_theta_star: mean(|r| r.theta_star),
        n_boundary,
    };
    Ok(Study { rows, summary, failures })
}

/// Rejection rate under the hypothesis.
pub fn cmd_size(config: &RunConfig) -> Result<Study> {
    run_study(config, "size", None)
}

/// Rejection rate under the configured alternative.
pub fn cmd_power(config: &RunConfig) -> Result<Study> {
    let alt = config
        .alternative
        .ok_or_else(|| Error::Config("power study needs an [alternative] section".into()))?;
    run_study(config, "power", Some(alt))
}

/// Critical values for the configured truncation.
pub fn cmd_calibrate(config: &RunConfig, alphas: &[f64], n_paths: usize, n_steps: usize) -> Result<QuantileTable> {
    calibration::calibrate(alphas, config.r_cut, n_paths, n_steps, calibration::calibration_seed(config.base_seed))
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckLine {
    fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, pass: value <= tolerance }
    }

    fn flag(name: &str, ok: bool) -> Self {
        Self { name: name.into(), value: if ok { 1.0 } else { 0.0 }, tolerance: 1.0, pass: ok }
    }
}

impl std::fmt::Display for CheckLine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{status} {} value={:.3e} tol={:.1e}", self.name, self.value, self.tolerance)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationOutcome {
    pub checks: Vec<CheckLine>,
    /// Informational: does the sufficient positivity condition hold, and is φ₂ positive on `[0, 1)`.
    pub r0: limit_transform::R0Report,
}

impl ValidationOutcome {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

pub fn cmd_validate(config: &RunConfig) -> Result<ValidationOutcome> {
    cmd_validate_with(config, &CoefficientSet::standard())
}

/// Validation suite with an explicit coefficient set, so a corrupted set can
/// be shown to fail.
pub fn cmd_validate_with(config: &RunConfig, set: &CoefficientSet) -> Result<ValidationOutcome> {
    config.validate()?;
    let model = config.model_spec()?;
    let grid = config.grid()?;
    let theta = config.theta_true;
    let mut checks = Vec::new();

    let reg = check_regularity(&model, 100, config.epsilon)?;
    checks.push(CheckLine::flag("regularity.min_drift_positive", reg.min_drift > 0.0));
    checks.push(CheckLine::at_most("regularity.derivative_fd_error", reg.max_derivative_error, 1e-6));

    let flow = solve_flow(&model, theta, grid)?;
    let d = 1e-5;
    let up = solve_flow(&model, theta + d, grid)?;
    let dn = solve_flow(&model, theta - d, grid)?;
    let fd = (0..grid.len())
        .map(|i| ((up.x.value(i) - dn.x.value(i)) / (2.0 * d) - flow.xdot.value(i)).abs())
        .fold(0.0, f64::max);
    checks.push(CheckLine::at_most("flow.sensitivity_vs_fd", fd, 1e-5));
    let s2 = flow.sigma_squared()?;
    let rel = (s2 - flow.c_theta * config.horizon.powi(3) / (flow.j * flow.j)).abs() / s2;
    checks.push(CheckLine::at_most("flow.sigma2_vs_c_theta", rel, 1e-10));
    let coarse = |n: usize| -> Result<f64> { Ok(solve_flow(&model, theta, TimeGrid::new(config.horizon, n)?)?.x.last()) };
    let (x1, x2, x3) = (coarse(8)?, coarse(16)?, coarse(32)?);
    let ratio = (x1 - x2).abs() / (x2 - x3).abs().max(f64::MIN_POSITIVE);
    checks.push(CheckLine::flag("flow.rk4_fourth_order", ratio > 14.0 || (x1 - x2).abs() < 1e-13));

    let (h, g) = model_hg(&model, &flow)?;
    let profile = TransformProfile::from_hg_with(h.clone(), g, set)?;
    checks.push(CheckLine::at_most("profile.normalization", (profile.g_norm_squared() - 1.0).abs(), 1e-6));
    let ids = coefficient_identities(&profile);
    checks.push(CheckLine::at_most("identity.phi1_eq_psi1_minus_psi2", ids.phi1, 1e-10));
    checks.push(CheckLine::at_most("identity.phi2_eq_k2_plus_big_phi1", ids.phi2, 1e-10));

    let mut worst = 0.0f64;
    let unit = grid.normalized();
    for trial in 0..20u64 {
        let coeffs: Vec<f64> = crate::sde::normals(Seed::new(config.base_seed, 1_000_000 + trial), 6).iter().map(|z| 0.2 * z).collect();
        let (rh, rg) = random_smooth_hg(unit, &coeffs);
        worst = worst.max(coefficient_identities(&TransformProfile::from_hg_with(rh, rg, set)?).max());
    }
    checks.push(CheckLine::at_most("identity.random_profiles", worst, 1e-10));
    let red = reduction_with(&h, set)?;
    checks.push(CheckLine::at_most("reduction.score_case", red, 1e-12));
    checks.push(CheckLine::at_most("reduction.score_case_reference", score_reduction_residual(&h)?, 1e-12));

    let kernel_profile = if grid.n_steps() >= KERNEL_CHECK_STEPS {
        profile.clone()
    } else {
        let fine = solve_flow(&model, theta, TimeGrid::new(config.horizon, KERNEL_CHECK_STEPS)?)?;
        let (fh, fg) = model_hg(&model, &fine)?;
        TransformProfile::from_hg_with(fh, fg, set)?
    };
    let kernel = build_kernel(&kernel_profile, config.r_cut)?;
    let kc = kernel.checks(50);
    checks.push(CheckLine::at_most("kernel.fredholm_residual", kc.fredholm_residual, 1e-4));
    checks.push(CheckLine::at_most("kernel.diagonal_identity", kc.diagonal_identity, 1e-4));
    checks.push(CheckLine::at_most("kernel.diagonal_identity_derivative", kc.derivative, 1e-3));

    let ones = GridFunction::constant(unit, 1.0);
    let unit_profile = TransformProfile::from_hg_with(ones.clone(), ones, set)?;
    let uk = build_kernel(&unit_profile, 0.9)?;
    let closed = (0..=uk.last)
        .map(|k| {
            let t = unit.node(k);
            let e = t / (1.0 - t);
            (uk.a.value(k) - e)
                .abs()
                .max((uk.b.value(k) - e).abs())
                .max((unit_profile.phi2.value(k) - (1.0 - t)).abs())
                .max((unit_profile.psi2.value(k) - 1.0).abs())
                .max(unit_profile.phi1.value(k).abs())
        })
        .fold(0.0, f64::max);
    checks.push(CheckLine::at_most("unit_profile.closed_forms", closed, 1e-9));
    checks.push(CheckLine::at_most("unit_profile.diagonal_identity", uk.diagonal_identity_check(), 1e-6));

    let (phi2_min, _) = profile.phi2_min(config.r_cut);
    checks.push(CheckLine::flag("transform.phi2_positive_on_r_cut", phi2_min > 0.0));
    let r0 = check_r0(&profile);
    Ok(ValidationOutcome { checks, r0 })
}

fn reduction_with(h: &GridFunction, set: &CoefficientSet) -> Result<f64> {
    let p = TransformProfile::from_hg_with(h.clone(), h.clone(), set)?;
    let mut worst = 0.0f64;
    for k in 0..p.grid().len() {
        let (i1, i3, hv) = (p.i1.value(k), p.i3.value(k), p.h.value(k));
        let m = 1.0 + i3 * hv - i1;
        worst = worst
            .max(p.phi1.value(k).abs())
            .max((p.phi2.value(k) - (1.0 - i1) * m).abs())
            .max((p.psi2.value(k) - hv * m).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit_transform::coefficients;

    #[test]
    fn default_config_round_trips_through_toml() {
        let c = RunConfig { alternative: Some(AlternativeSpec::default()), ..RunConfig::default() };
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::from_toml("alpha = 1.5").is_err());
        assert!(RunConfig::from_toml("r_cut = 1.0").is_err());
        assert!(RunConfig::from_toml("model = \"cubic\"").is_err());
        assert!(RunConfig::from_toml("bogus = 1").is_err());
        let c = RunConfig::from_toml("epsilon = 0.02\n[alternative]\namplitude = 0.1").unwrap();
        assert_eq!(c.alternative.unwrap().frequency, 1.0);
        assert_ne!(c.hash(), RunConfig::default().hash());
    }

    #[test]
    fn empty_study_is_an_error() {
        let c = RunConfig { n_reps: 0, ..RunConfig::default() };
        assert!(cmd_size(&c).is_err());
        assert!(cmd_power(&RunConfig::default()).is_err());
    }

    #[test]
    fn validate_linear_model_passes() {
        let out = cmd_validate(&RunConfig::default()).unwrap();
        for c in &out.checks {
            assert!(c.pass, "{c}");
        }
    }

    #[test]
    fn validate_catches_corrupted_phi2() {
        let set = CoefficientSet { phi2: |v| coefficients::phi2(v) - 2.0 * v.i2 * v.i4, ..CoefficientSet::standard() };
        let out = cmd_validate_with(&RunConfig::default(), &set).unwrap();
        assert!(!out.all_pass());
        let failed: Vec<_> = out.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        assert!(failed.contains(&"identity.phi2_eq_k2_plus_big_phi1"), "{failed:?}");
    }

    #[test]
    fn alternative_drift_adds_perturbation() {
        let m = ModelSpec::linear();
        let alt = AlternativeSpec::default();
        let f = alt.drift(&m, 1.0);
        assert_eq!(f(2.0), 2.0 + 0.3 * 2f64.sin());
        let null = AlternativeSpec { amplitude: 0.0, frequency: 1.0, shift: 0.0 };
        assert_eq!(null.drift(&m, 1.0)(2.0), 2.0);
    }

    #[test]
    fn zero_noise_trajectory_gives_zero_statistic() {
        let c = RunConfig { epsilon: 0.0, ..RunConfig::default() };
        let traj = cmd_simulate(&c, 0).unwrap();
        let out = cmd_test(&c, &traj).unwrap();
        assert_eq!(out.report.delta_eps, 0.0);
        assert!(!out.report.reject);
    }

    #[test]
    fn small_size_study_runs() {
        let c = RunConfig { n_reps: 20, ..RunConfig::default() };
        let s = cmd_size(&c).unwrap();
        assert_eq!(s.summary.n_valid + s.summary.n_failed, 20);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"rep,seed,theta_star,delta_eps,reject\n"));
        let again = cmd_size(&c).unwrap();
        assert_eq!(again.summary.rate, s.summary.rate);
    }
}
