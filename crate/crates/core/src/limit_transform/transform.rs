use serde::Serialize;

use super::TransformProfile;
use crate::grid::GridFunction;
use crate::{Error, Result};

/// Default end of the interval on which the transform integrand is evaluated.
pub const DEFAULT_R_CUT: f64 = 0.95;

/// `U(ν) = W(ν) − (∫₀¹ g dW) ∫₀^ν h dr`.
pub fn build_limit_u(w: &GridFunction, profile: &TransformProfile) -> Result<GridFunction> {
    if w.grid() != profile.grid() {
        return Err(Error::GridMismatch("W and the profile live on different grids".into()));
    }
    let zeta = profile.g.left_point_integral(w).last();
    Ok(w.zip_map(&profile.i3, |wv, i3| wv - zeta * i3))
}

/// `L[U](ν) = U(ν) + ∫₀^ν (φ₁(r) ∫₀ʳ h dU + ψ₂(r) ∫₀ʳ g dU) / φ₂(r) dr`,
/// with the integrand frozen at its `r_cut` value beyond `r_cut`.
pub fn apply_l(u: &GridFunction, profile: &TransformProfile, r_cut: f64) -> Result<GridFunction> {
    if u.grid() != profile.grid() {
        return Err(Error::GridMismatch("U and the profile live on different grids".into()));
    }
    if !(r_cut > 0.0 && r_cut < 1.0) {
        return Err(Error::Config(format!("r_cut must lie in (0, 1), got {r_cut}")));
    }
    let grid = profile.grid();
    let kc = grid.floor_index(r_cut);
    if let Some(k) = (0..=kc).find(|&k| !(profile.phi2.value(k) > 0.0)) {
        return Err(Error::Positivity { r: grid.node(k), value: profile.phi2.value(k) });
    }
    let hu = profile.h.left_point_integral(u);
    let gu = profile.g.left_point_integral(u);
    let mut f = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let j = k.min(kc);
        let v = (profile.phi1.value(j) * hu.value(j) + profile.psi2.value(j) * gu.value(j)) / profile.phi2.value(j);
        f.push(v);
    }
    let correction = GridFunction::new(grid, f)?.cumulative_integral();
    Ok(u.zip_map(&correction, |a, b| a + b))
}

/// Sufficient condition `g > h > 0`, `∫₀ᵗ h g < 1` versus actual positivity of `φ₂`.
#[derive(Debug, Clone, Serialize)]
pub struct R0Report {
    /// Sufficient condition holds at every node with `r > 0`.
    pub r0_holds: bool,
    /// First node where the sufficient condition fails.
    pub r0_violation_at: Option<f64>,
    /// `φ₂ > 0` at every node of `[0, 1 − dt]`.
    pub phi2_positive: bool,
    pub phi2_min: f64,
    pub phi2_min_at: f64,
    /// Fraction of nodes on `[0, 1 − dt]` with `φ₂ ≤ 0`.
    pub nonpositive_fraction: f64,
}

pub fn check_r0(profile: &TransformProfile) -> R0Report {
    let grid = profile.grid();
    let n = grid.n_steps();
    let r0_violation_at = (1..=n)
        .find(|&k| {
            let (h, g) = (profile.h.value(k), profile.g.value(k));
            !(g > h && h > 0.0 && profile.i2.value(k) < 1.0)
        })
        .map(|k| grid.node(k));
    let (phi2_min, phi2_min_at) = profile.phi2_min(grid.node(n - 1));
    let bad = (0..n).filter(|&k| !(profile.phi2.value(k) > 0.0)).count();
    R0Report {
        r0_holds: r0_violation_at.is_none(),
        r0_violation_at,
        phi2_positive: bad == 0,
        phi2_min,
        phi2_min_at,
        nonpositive_fraction: bad as f64 / n as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deterministic::solve_flow;
    use crate::grid::TimeGrid;
    use crate::limit_transform::{build_profile, random_smooth_hg};
    use crate::model::ModelSpec;
    use crate::sde::{wiener_path, Seed};
    use approx::assert_abs_diff_eq;

    fn grid() -> TimeGrid {
        TimeGrid::unit(2000).unwrap()
    }

    fn linear_profile() -> TransformProfile {
        let m = ModelSpec::linear();
        build_profile(&m, &solve_flow(&m, 1.0, grid()).unwrap()).unwrap()
    }

    #[test]
    fn zero_inputs_give_zero() {
        let p = linear_profile();
        let zero = GridFunction::zeros(grid());
        assert!(build_limit_u(&zero, &p).unwrap().sup_norm() == 0.0);
        assert!(apply_l(&zero, &p, 0.95).unwrap().sup_norm() == 0.0);
    }

    #[test]
    fn vanishing_h_leaves_w_unchanged() {
        let (_, g) = random_smooth_hg(grid(), &[0.1, 0.2]);
        let p = TransformProfile::from_hg(GridFunction::zeros(grid()), g).unwrap();
        let w = wiener_path(grid(), Seed::new(4, 0));
        assert_eq!(build_limit_u(&w, &p).unwrap().values(), w.values());
    }

    #[test]
    fn score_case_matches_direct_formula() {
        // with g = h, the transform reduces to U + ∫₀^ν h(r) N(r)⁻¹ ∫₀ʳ h dU dr, N = ∫_r¹ h²
        let (h, _) = random_smooth_hg(grid(), &[0.2, -0.3]);
        let norm = h.map(|v| v * v).simpson_integral().sqrt();
        let h = h.scale(1.0 / norm);
        let p = TransformProfile::from_hg(h.clone(), h.clone()).unwrap();
        let w = wiener_path(grid(), Seed::new(6, 1));
        let u = build_limit_u(&w, &p).unwrap();
        let l = apply_l(&u, &p, 0.95).unwrap();

        let n_tail = h.map(|v| v * v).simpson_reverse_cumulative_integral();
        let hu = h.left_point_integral(&u);
        let kc = grid().floor_index(0.95);
        let f: Vec<f64> = (0..grid().len())
            .map(|k| {
                let j = k.min(kc);
                h.value(j) * hu.value(j) / n_tail.value(j)
            })
            .collect();
        let direct = GridFunction::new(grid(), f).unwrap().cumulative_integral();
        for k in 0..grid().len() {
            assert_abs_diff_eq!(l.value(k), u.value(k) + direct.value(k), epsilon = 1e-9);
        }
    }

    #[test]
    fn transform_is_linear() {
        let p = linear_profile();
        let u1 = build_limit_u(&wiener_path(grid(), Seed::new(1, 0)), &p).unwrap();
        let u2 = build_limit_u(&wiener_path(grid(), Seed::new(1, 1)), &p).unwrap();
        let (a, b) = (1.7, -0.4);
        let lhs = apply_l(&u1.zip_map(&u2, |x, y| a * x + b * y), &p, 0.95).unwrap();
        let l1 = apply_l(&u1, &p, 0.95).unwrap();
        let l2 = apply_l(&u2, &p, 0.95).unwrap();
        let rhs = l1.zip_map(&l2, |x, y| a * x + b * y);
        assert!(lhs.sup_distance(&rhs) <= 1e-12 * (1.0 + lhs.sup_norm()));
    }

    #[test]
    fn positivity_failure_is_an_error() {
        let p = linear_profile();
        let mut bad = p.clone();
        bad.phi2 = p.phi2.map(|v| v - 0.5);
        let u = GridFunction::zeros(grid());
        assert!(matches!(apply_l(&u, &bad, 0.95), Err(Error::Positivity { .. })));
        assert!(apply_l(&u, &p, 1.0).is_err());
    }

    #[test]
    fn r0_unit_profile() {
        let one = GridFunction::constant(grid(), 1.0);
        let r = check_r0(&TransformProfile::from_hg(one.clone(), one).unwrap());
        assert!(!r.r0_holds);
        assert!(r.phi2_positive);
    }

    #[test]
    fn r0_holds_for_ramp_profile() {
        let g = GridFunction::from_fn(grid(), |r| 3f64.sqrt() * r);
        let h = GridFunction::from_fn(grid(), |r| r / 2.0);
        let p = TransformProfile::from_hg(h, g).unwrap();
        assert_abs_diff_eq!(p.g_norm_squared(), 1.0, epsilon = 1e-6);
        let r = check_r0(&p);
        assert!(r.r0_holds, "{r:?}");
        assert!(r.phi2_positive, "{r:?}");
    }

    #[test]
    fn r0_report_for_linear_model() {
        let r = check_r0(&linear_profile());
        assert!(r.phi2_min.is_finite());
        let (min_cut, _) = linear_profile().phi2_min(0.95);
        assert!(min_cut > 0.0);
    }
}
