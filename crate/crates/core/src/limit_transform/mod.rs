//! Limit-side objects: the functions `h`, `g`, their cumulative integrals,
//! the coefficient profiles `φ₁, φ₂, ψ₁, ψ₂`, the Fredholm kernel `q(t, s)`
//! and the linear transformation `L` that maps the limit process `U` to a
//! Wiener process.

pub mod coefficients;
mod kernel;
mod transform;

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::deterministic::FlowSolution;
use crate::grid::{GridFunction, TimeGrid};
use crate::model::ModelSpec;
use crate::{Error, Result};
use coefficients::Vars;

pub use coefficients::CoefficientSet;

pub use kernel::{build_kernel, FredholmKernel};
pub use transform::{apply_l, build_limit_u, check_r0, R0Report, DEFAULT_R_CUT};

/// Grid size for the kernel checks. Near `t_max` the diagonal `q(s, s)²`
/// reaches `10⁵`, and Simpson needs this many steps to keep the diagonal
/// residual for the builtin models below `1e-5`.
pub const KERNEL_CHECK_STEPS: usize = 4000;

/// Normalization tolerance on `∫₀¹ g² = 1` used by [`build_profile`].
pub const NORMALIZATION_TOL: f64 = 1e-4;

/// Everything the transformation needs, sampled on a grid over `[0, 1]`.
#[derive(Debug, Clone)]
pub struct TransformProfile {
    pub h: GridFunction,
    pub g: GridFunction,
    /// `∫₀ʳ g²` (composite Simpson, as are `I₂..I₆`).
    pub i1: GridFunction,
    /// `∫₀ʳ h g`.
    pub i2: GridFunction,
    /// `∫₀ʳ h`.
    pub i3: GridFunction,
    /// `∫₀ʳ h²`.
    pub i4: GridFunction,
    /// `∫₀ʳ g`.
    pub i5: GridFunction,
    /// `∫_r¹ g²`.
    pub i6: GridFunction,
    pub phi1: GridFunction,
    pub phi2: GridFunction,
    pub psi1: GridFunction,
    pub psi2: GridFunction,
}

impl TransformProfile {
    /// Profile from arbitrary `h`, `g` on the same unit grid.
    pub fn from_hg(h: GridFunction, g: GridFunction) -> Result<Self> {
        Self::from_hg_with(h, g, &CoefficientSet::standard())
    }

    pub fn from_hg_with(h: GridFunction, g: GridFunction, set: &CoefficientSet) -> Result<Self> {
        if h.grid() != g.grid() {
            return Err(Error::GridMismatch("h and g live on different grids".into()));
        }
        if (h.grid().horizon() - 1.0).abs() > 1e-12 {
            return Err(Error::GridMismatch(format!("profile grid must cover [0, 1], got [0, {}]", h.grid().horizon())));
        }
        let g2 = g.map(|v| v * v);
        let i1 = g2.simpson_cumulative_integral();
        let i2 = h.zip_map(&g, |a, b| a * b).simpson_cumulative_integral();
        let i3 = h.simpson_cumulative_integral();
        let i4 = h.map(|v| v * v).simpson_cumulative_integral();
        let i5 = g.simpson_cumulative_integral();
        let i6 = g2.simpson_reverse_cumulative_integral();
        let n = h.values().len();
        let mut cols = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
        for k in 0..n {
            let v = Vars {
                i1: i1.value(k),
                i2: i2.value(k),
                i3: i3.value(k),
                i4: i4.value(k),
                i5: i5.value(k),
                h: h.value(k),
                g: g.value(k),
            };
            cols[0].push((set.phi1)(&v));
            cols[1].push((set.phi2)(&v));
            cols[2].push((set.psi1)(&v));
            cols[3].push((set.psi2)(&v));
        }
        let grid = h.grid();
        let [phi1, phi2, psi1, psi2] = cols.map(|c| GridFunction::new(grid, c).expect("length matches grid"));
        Ok(Self { h, g, i1, i2, i3, i4, i5, i6, phi1, phi2, psi1, psi2 })
    }

    pub fn grid(&self) -> TimeGrid {
        self.h.grid()
    }

    pub fn vars(&self, k: usize) -> Vars {
        Vars {
            i1: self.i1.value(k),
            i2: self.i2.value(k),
            i3: self.i3.value(k),
            i4: self.i4.value(k),
            i5: self.i5.value(k),
            h: self.h.value(k),
            g: self.g.value(k),
        }
    }

    /// `∫₀¹ g²`.
    pub fn g_norm_squared(&self) -> f64 {
        self.i1.last()
    }

    /// Smallest `φ₂` over nodes with `r ≤ r_max`, and where it occurs.
    pub fn phi2_min(&self, r_max: f64) -> (f64, f64) {
        let k = self.grid().floor_index(r_max);
        (0..=k)
            .map(|i| (self.phi2.value(i), self.grid().node(i)))
            .fold((f64::INFINITY, 0.0), |m, c| if c.0 < m.0 { c } else { m })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["r", "h", "g", "I1", "I2", "I3", "I4", "I5", "I6", "phi1", "phi2", "psi1", "psi2"])?;
        let cols = [
            &self.h, &self.g, &self.i1, &self.i2, &self.i3, &self.i4, &self.i5, &self.i6, &self.phi1, &self.phi2,
            &self.psi1, &self.psi2,
        ];
        for (k, r) in self.grid().nodes().enumerate() {
            let mut row = vec![r.to_string()];
            row.extend(cols.iter().map(|c| c.value(k).to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// `h(r) = T J̃⁻¹ Ṡ(θ, x_{rT}) C^{1/2}` and
/// `g(r) = S(θ, x_{rT})⁻¹ ∫_r¹ S ẋ_{zT} dz · C^{-1/2}` on the flow's grid
/// rescaled to `[0, 1]`.
pub fn model_hg(model: &ModelSpec, flow: &FlowSolution) -> Result<(GridFunction, GridFunction)> {
    let grid = flow.grid();
    let horizon = grid.horizon();
    if !(flow.c_theta > 0.0 && flow.j_tilde > 0.0) {
        return Err(Error::Degenerate(format!("C(θ) = {}, J̃(θ) = {}", flow.c_theta, flow.j_tilde)));
    }
    let unit = grid.normalized();
    let sqrt_c = flow.c_theta.sqrt();
    let h_scale = horizon / flow.j_tilde * sqrt_c;
    let h: Vec<f64> = flow.x.values().iter().map(|&x| h_scale * model.s_theta(flow.theta, x)).collect();
    let g = flow.tail.zip_map(&flow.drift, |i, s| i / (horizon * s) / sqrt_c);
    Ok((GridFunction::new(unit, h)?, g.on_grid(unit)?))
}

/// Build the profile for `model` at the flow's θ, checking `∫₀¹ g² = 1`.
pub fn build_profile(model: &ModelSpec, flow: &FlowSolution) -> Result<TransformProfile> {
    let (h, g) = model_hg(model, flow)?;
    let profile = TransformProfile::from_hg(h, g)?;
    let integral = profile.g_norm_squared();
    if (integral - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::Normalization { integral });
    }
    Ok(profile)
}

/// Pointwise identity residuals over the grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IdentityResiduals {
    /// `max |φ₁ − (ψ₁ − ψ₂)|`.
    pub phi1: f64,
    /// `max |φ₂ − (K² + Φ₁)|`.
    pub phi2: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        self.phi1.max(self.phi2)
    }
}

/// Check the stored `φ₁`, `φ₂` against `ψ₁ − ψ₂` and `K² + Φ₁`.
pub fn coefficient_identities(profile: &TransformProfile) -> IdentityResiduals {
    let mut out = IdentityResiduals { phi1: 0.0, phi2: 0.0 };
    for k in 0..profile.grid().len() {
        let v = profile.vars(k);
        let kk = coefficients::auxiliary(&v).k;
        let r1 = (profile.phi1.value(k) - (profile.psi1.value(k) - profile.psi2.value(k))).abs();
        let r2 = (profile.phi2.value(k) - (kk * kk + coefficients::big_phi1(&v))).abs();
        out.phi1 = out.phi1.max(r1);
        out.phi2 = out.phi2.max(r2);
    }
    out
}

/// With `g := h`, max over the grid of `|φ₁|`, `|φ₂ − (1 − I₁)(1 + I₃h − I₁)|`
/// and `|ψ₂ − h(1 + I₃h − I₁)|`.
pub fn score_reduction_residual(h: &GridFunction) -> Result<f64> {
    let p = TransformProfile::from_hg(h.clone(), h.clone())?;
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

/// Random smooth `(h, g)` with `∫₀¹ g² = 1` from a few trigonometric modes.
pub fn random_smooth_hg(grid: TimeGrid, coeffs: &[f64]) -> (GridFunction, GridFunction) {
    let mode = |c: &[f64], r: f64| -> f64 {
        c.iter().enumerate().map(|(k, a)| a * ((k as f64 + 0.5) * std::f64::consts::PI * r).cos()).sum()
    };
    let half = coeffs.len() / 2;
    let (ch, cg) = coeffs.split_at(half.max(1));
    let h = GridFunction::from_fn(grid, |r| 0.5 + mode(ch, r));
    let g_raw = GridFunction::from_fn(grid, |r| 1.0 + mode(cg, r));
    let norm = g_raw.map(|v| v * v).simpson_integral().sqrt();
    (h, g_raw.scale(1.0 / norm))
}
