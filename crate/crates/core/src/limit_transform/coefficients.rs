//! The coefficient polynomials of the transformation in the cumulative
//! integrals `I₁..I₅` and the pointwise values `h`, `g`, together with the
//! auxiliary functions `C, D, K, N` they are built from.

/// Pointwise arguments of the coefficient polynomials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vars {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
    pub i5: f64,
    pub h: f64,
    pub g: f64,
}

#[rustfmt::skip]
/// φ₁.
pub fn phi1(v: &Vars) -> f64 {
    let Vars { i1, i2, i3, i4, i5, h, g } = *v;
        g
        - h
        - 3.0 * i2 * g
        + i5 * h * g
        + i3 * g * g
        + 2.0 * i2 * h
        - 2.0 * i2 * i3 * g * g
        + i1 * i2 * i2 * h
        + i4 * i5 * g * g
        - i2 * i2 * i2 * g
        - i2 * i4 * g
        + 3.0 * i2 * i2 * g
        + i2 * i5 * h * h
        - 2.0 * i2 * i5 * h * g
        - 2.0 * i1 * i2 * h
        + i2 * i2 * i5 * h * g
        + i1 * i1 * i3 * h * h
        - i4 * h
        + 2.0 * i1 * i4 * h
        - i1 * i4 * g
        + i1 * i2 * i4 * g
        + i1 * i4 * i5 * h * g
        - i1 * i1 * i4 * h
        + i1 * h
        + 2.0 * i2 * i3 * h * g
        - i2 * i4 * i5 * g * g
        - i5 * h * h
        + 2.0 * i1 * i3 * h * g
        - 2.0 * i1 * i2 * i3 * h * g
        - 2.0 * i1 * i3 * h * h
        - i2 * i2 * h
        + i3 * h * h
        - 2.0 * i3 * h * g
        - i4 * i5 * h * g
        - i1 * i2 * i5 * h * h
        + i2 * i2 * i3 * g * g
        + i1 * i5 * h * h
        + i4 * g
}

#[rustfmt::skip]
/// φ₂, strictly positive on `[0, 1)` under the positivity condition.
pub fn phi2(v: &Vars) -> f64 {
    let Vars { i1, i2, i3, i4, i5, h, g } = *v;
        1.0
        + i5 * h
        - 3.0 * i2 * i5 * h
        + i1 * i3 * h
        + i3 * g
        - 3.0 * i2 * i3 * g
        + i4 * i5 * g
        - i3 * h
        - i1 * i4 * i4 * i5 * g
        + 3.0 * i2 * i2 * i3 * g
        - 2.0 * i2 * i4 * i5 * g
        + 2.0 * i2 * i3 * h
        - i2 * i2 * i2 * i5 * h
        + i1 * i2 * i2 * i3 * h
        - i2 * i2 * i2 * i3 * g
        + 3.0 * i2 * i2 * i5 * h
        + i4 * i5 * h
        - i2 * i4 * i5 * h
        + 2.0 * i1 * i3 * i4 * h
        + i3 * i4 * g
        - i2 * i3 * i4 * g
        + i4 * i4
        + 2.0 * i2 * i2 * i4
        + i2 * i2 * i2 * i2
        + i1 * i2 * i4 * i5 * h
        - i1 * i1 * i3 * i4 * h
        - i1 * i3 * i4 * g
        + i1 * i2 * i3 * i4 * g
        - i2 * i2 * i3 * h
        - 2.0 * i1 * i2 * i2 * i4
        - 2.0 * i1 * i4 * i4
        + i1 * i1 * i4 * i4
        + 2.0 * i4
        - 2.0 * i1 * i4
        - 4.0 * i2 * i4
        + 4.0 * i1 * i2 * i4
        - 4.0 * i2
        + i4 * i4 * i5 * g
        + i2 * i2 * i4 * i5 * g
        - 2.0 * i1 * i2 * i3 * h
        - i3 * i4 * h
        + 6.0 * i2 * i2
        - 4.0 * i2 * i2 * i2
        - i1 * i4 * i5 * h
}

#[rustfmt::skip]
/// ψ₂.
pub fn psi2(v: &Vars) -> f64 {
    let Vars { i1, i2, i3, i4, i5, h, g } = *v;
        h
        + i3 * h * g
        - 2.0 * i2 * i4 * g
        + i5 * h * h
        - 3.0 * i2 * h
        - 2.0 * i2 * i3 * h * g
        - i1 * i2 * i3 * h * h
        + i4 * g
        + 3.0 * i2 * i2 * h
        + i2 * i2 * i4 * g
        + i2 * i2 * i5 * h * h
        - i2 * i2 * i2 * h
        - i3 * i4 * h * g
        + i4 * i4 * g
        + i4 * h
        - i2 * i4 * h
        - 2.0 * i2 * i5 * h * h
        - i1 * i4 * h
        + i1 * i2 * i4 * h
        + i1 * i3 * h * h
        + i3 * i4 * g * g
        + i2 * i3 * h * h
        - i3 * h * h
        + i1 * i3 * i4 * h * g
        - i2 * i3 * i4 * g * g
        - 2.0 * i2 * i4 * i5 * h * g
        + 2.0 * i4 * i5 * h * g
        + i2 * i2 * i3 * h * g
        - i1 * i4 * i4 * g
        + i4 * i4 * i5 * g * g
}

#[rustfmt::skip]
/// ψ₁ = D′K − DK′.
pub fn psi1(v: &Vars) -> f64 {
    let Vars { i1, i2, i3, i4, i5, h, g } = *v;
        g
        + 2.0 * i4 * g
        - 3.0 * i2 * g
        + i5 * h * g
        + i1 * h
        - i2 * h
        + i1 * i4 * i5 * h * g
        + i4 * i4 * g
        + 3.0 * i2 * i2 * g
        - i2 * i5 * h * h
        - 2.0 * i2 * i5 * h * g
        - 2.0 * i1 * i2 * h
        + 2.0 * i2 * i2 * h
        + i2 * i2 * i3 * g * g
        - i1 * i2 * i3 * h * h
        - i2 * i2 * i2 * g
        + i2 * i2 * i5 * h * g
        + i1 * i2 * i2 * h
        - i2 * i2 * i2 * h
        - 2.0 * i2 * i4 * i5 * h * g
        + i1 * i1 * i3 * h * h
        - i1 * i2 * i5 * h * h
        - i3 * h * g
        - i2 * i4 * h
        + i3 * i4 * g * g
        - i3 * i4 * h * g
        - i1 * i4 * g
        - i1 * i4 * i4 * g
        + i1 * i2 * i4 * g
        - 2.0 * i2 * i3 * g * g
        + i1 * i2 * i4 * h
        + i1 * i5 * h * h
        + i4 * i5 * g * g
        + i2 * i2 * i3 * h * g
        - i1 * i3 * h * h
        + i4 * i4 * i5 * g * g
        - i2 * i4 * i5 * g * g
        + 2.0 * i1 * i3 * h * g
        - 2.0 * i1 * i2 * i3 * h * g
        + i2 * i2 * i4 * g
        - i1 * i1 * i4 * h
        + i2 * i3 * h * h
        - i2 * i3 * i4 * g * g
        - 3.0 * i2 * i4 * g
        + i2 * i2 * i5 * h * h
        + i1 * i4 * h
        + i1 * i3 * i4 * h * g
        + i4 * i5 * h * g
        + i3 * g * g
}

/// A complete set of coefficient functions. [`CoefficientSet::standard`] is
/// the only set used for testing; others exist so that the identity checks
/// can be shown to catch a corrupted term.
#[derive(Clone, Copy)]
pub struct CoefficientSet {
    pub phi1: fn(&Vars) -> f64,
    pub phi2: fn(&Vars) -> f64,
    pub psi1: fn(&Vars) -> f64,
    pub psi2: fn(&Vars) -> f64,
}

impl CoefficientSet {
    pub fn standard() -> Self {
        Self { phi1, phi2, psi1, psi2 }
    }
}

impl Default for CoefficientSet {
    fn default() -> Self {
        Self::standard()
    }
}

impl std::fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("CoefficientSet")
    }
}

/// `C = 1 − I₂`, `D`, `K`, `N` and their derivatives in `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Auxiliary {
    pub c: f64,
    pub d: f64,
    pub k: f64,
    pub n: f64,
    pub dc: f64,
    pub dd: f64,
    pub dk: f64,
    pub dn: f64,
}

pub fn auxiliary(v: &Vars) -> Auxiliary {
    let Vars { i1, i2, i3, i4, i5, h, g } = *v;
    let c = 1.0 - i2;
    let d = i5 * (1.0 + i4 - i2) + i3 * (i1 - i2);
    let k = c * c + i4 * (1.0 - i1);
    let n = i3 * c + i4 * i5;
    let dc = -h * g;
    let dd = g * (1.0 + i4 - i2) + i5 * (h * h - h * g) + h * (i1 - i2) + i3 * (g * g - h * g);
    let dk = -2.0 * h * g * c + h * h * (1.0 - i1) - i4 * g * g;
    let dn = h * c - i3 * h * g + h * h * i5 + i4 * g;
    Auxiliary { c, d, k, n, dc, dd, dk, dn }
}

/// `Φ₁ = (D h + N (g − h)) K`.
pub fn big_phi1(v: &Vars) -> f64 {
    let a = auxiliary(v);
    (a.d * v.h + a.n * (v.g - v.h)) * a.k
}

/// `ψ₂` from its defining form `N′K − NK′`.
pub fn psi2_from_auxiliary(v: &Vars) -> f64 {
    let a = auxiliary(v);
    a.dn * a.k - a.n * a.dk
}

/// `ψ₁` from its defining form `D′K − DK′`.
pub fn psi1_from_auxiliary(v: &Vars) -> f64 {
    let a = auxiliary(v);
    a.dd * a.k - a.d * a.dk
}

/// Residuals of `φ₁ = ψ₁ − ψ₂` and `φ₂ = K² + Φ₁` at one point.
pub fn identity_residuals(set: &CoefficientSet, v: &Vars) -> (f64, f64) {
    let k = auxiliary(v).k;
    let r1 = (set.phi1)(v) - ((set.psi1)(v) - (set.psi2)(v));
    let r2 = (set.phi2)(v) - (k * k + big_phi1(v));
    (r1.abs(), r2.abs())
}
