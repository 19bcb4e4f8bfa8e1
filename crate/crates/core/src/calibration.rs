//! Monte Carlo critical values of `∫₀^{r_cut} w_ν² dν` for a standard
//! Wiener process `w`.

use std::io::{Read, Write};
use std::path::Path;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::Serialize;

use crate::sde::{NormalStream, Seed};
use crate::{Error, Result};

/// Smallest number of paths accepted by [`calibrate`].
pub const MIN_PATHS: usize = 10_000;

pub const DEFAULT_ALPHAS: [f64; 3] = [0.01, 0.05, 0.10];

const DEFAULT_TABLE: &str = include_str!("../data/quantiles.csv");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileTable {
    pub r_cut: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    /// `(α, c_α)` sorted by α.
    pub rows: Vec<(f64, f64)>,
}

/// `∫₀^{r_cut} w²` by the trapezoid rule on `n_steps` steps over `[0, 1]`,
/// for the path keyed by `seed`.
pub fn path_statistic(seed: Seed, n_steps: usize, r_cut: f64) -> f64 {
    let dt = 1.0 / n_steps as f64;
    let sd = dt.sqrt();
    let x = r_cut * n_steps as f64;
    let k = ((x + 1e-9).floor() as usize).min(n_steps);
    let rest = r_cut - k as f64 * dt;
    let mut stream = NormalStream::new(seed);
    let mut w = 0.0;
    let mut prev_sq = 0.0;
    let mut acc = 0.0;
    for _ in 0..k {
        w += sd * stream.sample();
        let sq = w * w;
        acc += prev_sq + sq;
        prev_sq = sq;
    }
    acc *= 0.5 * dt;
    if k < n_steps && rest > 1e-12 * dt {
        let next = w + sd * stream.sample();
        let end_sq = prev_sq + rest / dt * (next * next - prev_sq);
        acc += 0.5 * rest * (prev_sq + end_sq);
    }
    acc
}

/// Statistics for replications `0..n_paths` of `base_seed`.
pub fn sample_statistics(r_cut: f64, n_paths: usize, n_steps: usize, base_seed: u64) -> Vec<f64> {
    let f = |i: usize| path_statistic(Seed::new(base_seed, i as u64), n_steps, r_cut);
    #[cfg(feature = "parallel")]
    {
        (0..n_paths).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n_paths).map(f).collect()
    }
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Upper quantiles `c_α` with `P(∫₀^{r_cut} w² > c_α) = α`.
/// Base seed for critical values derived from a run's base seed, so that
/// calibration paths never coincide with the noise of a size or power study.
pub fn calibration_seed(base_seed: u64) -> u64 {
    base_seed ^ 0x9E37_79B9_7F4A_7C15
}

pub fn calibrate(alphas: &[f64], r_cut: f64, n_paths: usize, n_steps: usize, seed: u64) -> Result<QuantileTable> {
    if n_paths < MIN_PATHS {
        return Err(Error::Config(format!("calibration needs at least {MIN_PATHS} paths, got {n_paths}")));
    }
    if !(r_cut > 0.0 && r_cut <= 1.0) {
        return Err(Error::Config(format!("r_cut must lie in (0, 1], got {r_cut}")));
    }
    if n_steps == 0 {
        return Err(Error::Config("calibration grid needs at least one step".into()));
    }
    let mut sample = sample_statistics(r_cut, n_paths, n_steps, seed);
    sample.sort_by(f64::total_cmp);
    QuantileTable::from_sorted_sample(alphas, &sample, r_cut, n_steps, seed)
}

impl QuantileTable {
    pub fn from_sorted_sample(alphas: &[f64], sorted: &[f64], r_cut: f64, n_steps: usize, seed: u64) -> Result<Self> {
        let mut alphas = alphas.to_vec();
        if alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::Config(format!("levels must lie in (0, 1), got {alphas:?}")));
        }
        alphas.sort_by(f64::total_cmp);
        alphas.dedup();
        let rows = alphas.iter().map(|&a| (a, quantile_sorted(sorted, 1.0 - a))).collect();
        let table = Self { r_cut, n_paths: sorted.len(), n_steps, seed, rows };
        table.validate()?;
        Ok(table)
    }

    /// Table shipped with the crate for `r_cut = 0.95`.
    pub fn default_table() -> Self {
        Self::read_csv(DEFAULT_TABLE.as_bytes()).expect("bundled quantile table is well formed")
    }

    fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::Table("no rows".into()));
        }
        for w in self.rows.windows(2) {
            if !(w[0].0 < w[1].0) {
                return Err(Error::Table("rows are not sorted by alpha".into()));
            }
            if !(w[0].1 > w[1].1) {
                return Err(Error::Table(format!("c_alpha not decreasing between alpha {} and {}", w[0].0, w[1].0)));
            }
        }
        Ok(())
    }

    pub fn c_alpha(&self, alpha: f64) -> Result<f64> {
        self.rows
            .iter()
            .find(|(a, _)| (a - alpha).abs() <= 1e-12)
            .map(|r| r.1)
            .ok_or_else(|| {
                let have: Vec<String> = self.rows.iter().map(|r| r.0.to_string()).collect();
                Error::Table(format!("no critical value for alpha = {alpha}; table has {}", have.join(", ")))
            })
    }

    pub fn check_r_cut(&self, r_cut: f64) -> Result<()> {
        if (self.r_cut - r_cut).abs() > 1e-12 {
            return Err(Error::Table(format!("table was calibrated with r_cut = {} but the test uses {r_cut}", self.r_cut)));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["alpha", "c_alpha", "r_cut", "n_paths", "n_steps", "seed"])?;
        for (a, c) in &self.rows {
            w.write_record([
                a.to_string(),
                c.to_string(),
                self.r_cut.to_string(),
                self.n_paths.to_string(),
                self.n_steps.to_string(),
                self.seed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let expected = ["alpha", "c_alpha", "r_cut", "n_paths", "n_steps", "seed"];
        if headers.iter().ne(expected.iter().copied()) {
            return Err(Error::Table(format!("expected header '{}'", expected.join(","))));
        }
        let mut meta: Option<(f64, usize, usize, u64)> = None;
        let mut rows = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::Table(format!("row {}: invalid {what}", line + 1));
            let num = |k: usize| rec.get(k).and_then(|s| s.trim().parse::<f64>().ok()).filter(|v| v.is_finite());
            let int = |k: usize| rec.get(k).and_then(|s| s.trim().parse::<u64>().ok());
            let alpha = num(0).ok_or_else(|| bad("alpha"))?;
            let c = num(1).ok_or_else(|| bad("c_alpha"))?;
            let this = (
                num(2).ok_or_else(|| bad("r_cut"))?,
                int(3).ok_or_else(|| bad("n_paths"))? as usize,
                int(4).ok_or_else(|| bad("n_steps"))? as usize,
                int(5).ok_or_else(|| bad("seed"))?,
            );
            match meta {
                None => meta = Some(this),
                Some(m) if m != this => return Err(Error::Table(format!("row {}: inconsistent metadata", line + 1))),
                _ => {}
            }
            rows.push((alpha, c));
        }
        let (r_cut, n_paths, n_steps, seed) = meta.ok_or_else(|| Error::Table("no rows".into()))?;
        let table = Self { r_cut, n_paths, n_steps, seed, rows };
        table.validate()?;
        Ok(table)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    /// Load and refuse a table calibrated for a different truncation.
    pub fn load_for(path: impl AsRef<Path>, r_cut: f64) -> Result<Self> {
        let t = Self::load(path)?;
        t.check_r_cut(r_cut)?;
        Ok(t)
    }
}

/// Mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}
