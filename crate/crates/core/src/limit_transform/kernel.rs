use serde::Serialize;

use super::TransformProfile;
use crate::grid::{simpson, GridFunction};
use crate::{Error, Result};

/// Resolvent of the degenerate kernel
/// `K(u, v) = g(v)h(u) + h(v)g(u) − h(v)h(u)`:
/// `q(t, s) = 1 + B(t) h(s) + A(t) (g(s) − h(s))`.
#[derive(Debug, Clone)]
pub struct FredholmKernel {
    pub profile: TransformProfile,
    pub a: GridFunction,
    pub b: GridFunction,
    /// Last node index where `A`, `B` are defined (the denominator vanishes at `t = 1`).
    pub last: usize,
}

/// `A = (I₃(1 − I₂) + I₄I₅) / den`, `B = (I₅(1 + I₄ − I₂) + I₃(I₁ − I₂)) / den`
/// with `den = (1 − I₂)² + I₄I₆`, on `[0, t_max]`.
pub fn build_kernel(profile: &TransformProfile, t_max: f64) -> Result<FredholmKernel> {
    if !(0.0..1.0).contains(&t_max) {
        return Err(Error::Config(format!("kernel range must end before 1, got {t_max}")));
    }
    let grid = profile.grid();
    let last = grid.floor_index(t_max);
    let mut a = vec![f64::NAN; grid.len()];
    let mut b = vec![f64::NAN; grid.len()];
    for k in 0..=last {
        let (i1, i2, i3, i4, i5, i6) = (
            profile.i1.value(k),
            profile.i2.value(k),
            profile.i3.value(k),
            profile.i4.value(k),
            profile.i5.value(k),
            profile.i6.value(k),
        );
        let den = (1.0 - i2).powi(2) + i4 * i6;
        if !(den.abs() > 1e-12) {
            return Err(Error::KernelSingularity { t: grid.node(k), denominator: den });
        }
        a[k] = (i3 * (1.0 - i2) + i4 * i5) / den;
        b[k] = (i5 * (1.0 + i4 - i2) + i3 * (i1 - i2)) / den;
    }
    Ok(FredholmKernel {
        profile: profile.clone(),
        a: GridFunction::new(grid, a)?,
        b: GridFunction::new(grid, b)?,
        last,
    })
}

impl FredholmKernel {
    fn at(&self, k: usize) -> (f64, f64) {
        (self.a.value(k), self.b.value(k))
    }

    /// `q(t_k, s_j)` at grid nodes.
    pub fn q_nodes(&self, k: usize, j: usize) -> f64 {
        let (a, b) = self.at(k);
        let h = self.profile.h.value(j);
        let g = self.profile.g.value(j);
        1.0 + b * h + a * (g - h)
    }

    /// `q(t, s)` with `A`, `B` interpolated linearly in `t`.
    pub fn q(&self, t: f64, s: f64) -> f64 {
        let a = self.a.interpolate(t);
        let b = self.b.interpolate(t);
        let h = self.profile.h.interpolate(s);
        let g = self.profile.g.interpolate(s);
        1.0 + b * h + a * (g - h)
    }

    /// `∫₀ᵗ q(t, s) ds = t + B I₃ + A (I₅ − I₃)` at node `k`.
    pub fn integral_q(&self, k: usize) -> f64 {
        let (a, b) = self.at(k);
        let p = &self.profile;
        p.grid().node(k) + b * p.i3.value(k) + a * (p.i5.value(k) - p.i3.value(k))
    }

    /// `q(t, t)` on nodes `0..=last` (zero beyond).
    pub fn diagonal(&self) -> GridFunction {
        let grid = self.profile.grid();
        let values = (0..grid.len()).map(|k| if k <= self.last { self.q_nodes(k, k) } else { 0.0 }).collect();
        GridFunction::new(grid, values).expect("length matches grid")
    }

    /// `sup |q(t, s) − ∫₀ᵗ q(t, v) K(s, v) dv − 1|` over sampled node pairs
    /// `s ≤ t ≤ t_max`, with the `v`-integral done by direct Simpson quadrature.
    pub fn fredholm_residual(&self, stride: usize) -> f64 {
        let p = &self.profile;
        let dt = p.grid().dt();
        let stride = stride.max(1);
        let mut worst = 0.0f64;
        for k in (0..=self.last).step_by(stride) {
            let qt: Vec<f64> = (0..=k).map(|v| self.q_nodes(k, v)).collect();
            for j in (0..=k).step_by(stride) {
                let (hs, gs) = (p.h.value(j), p.g.value(j));
                let kernel = |v: usize| {
                    let (hv, gv) = (p.h.value(v), p.g.value(v));
                    gv * hs + hv * gs - hv * hs
                };
                let integrand: Vec<f64> = (0..=k).map(|v| qt[v] * kernel(v)).collect();
                let integral = simpson(&integrand, dt);
                worst = worst.max((qt[j] - integral - 1.0).abs());
            }
        }
        worst
    }

    /// Both sides of `∫₀ᵗ q(t, s) ds = ∫₀ᵗ q(s, s)² ds` on nodes `0..=last`.
    pub fn diagonal_identity_sides(&self) -> (Vec<f64>, Vec<f64>) {
        let lhs = (0..=self.last).map(|k| self.integral_q(k)).collect();
        let rhs = self.diagonal().map(|v| v * v).simpson_cumulative_integral();
        (lhs, rhs.values()[..=self.last].to_vec())
    }

    /// `sup_{t ≤ t_max} |∫₀ᵗ q(t, s) ds − ∫₀ᵗ q(s, s)² ds|`.
    pub fn diagonal_identity_check(&self) -> f64 {
        let (lhs, rhs) = self.diagonal_identity_sides();
        lhs.iter().zip(&rhs).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Largest relative gap between a central difference of `∫₀ᵗ q(t, s) ds`
    /// and `q(t, t)²` over interior nodes.
    pub fn derivative_check(&self) -> f64 {
        let dt = self.profile.grid().dt();
        let mut worst = 0.0f64;
        for k in 1..self.last {
            let fd = (self.integral_q(k + 1) - self.integral_q(k - 1)) / (2.0 * dt);
            let q = self.q_nodes(k, k);
            worst = worst.max((fd - q * q).abs() / (q * q).max(1.0));
        }
        worst
    }
}

/// Summary of the kernel checks.
#[derive(Debug, Clone, Serialize)]
pub struct KernelChecks {
    pub fredholm_residual: f64,
    pub diagonal_identity: f64,
    pub derivative: f64,
}

impl FredholmKernel {
    pub fn checks(&self, stride: usize) -> KernelChecks {
        KernelChecks {
            fredholm_residual: self.fredholm_residual(stride),
            diagonal_identity: self.diagonal_identity_check(),
            derivative: self.derivative_check(),
        }
    }
}
