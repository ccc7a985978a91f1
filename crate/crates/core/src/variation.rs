//! First and second variation of the fully affine arc length of plane
//! curves.
//!
//! A deformation `C_t = U·C_{ξ²} + W·C_ξ` changes the arc length
//! `l = ∮ g dp` at rate
//!
//! ```text
//! l′(t) = −(ε/2) ∮ U · (φ_{ξ³} + φ φ_{ξ²} + (2φ² + 3φ_ξ + ε)/9 · φ_ξ) g dp,
//! ```
//!
//! so extremal curves satisfy `φ_{ξ³} + φφ_{ξ²} + λφ_ξ = 0` with
//! `λ = (2φ² + 3φ_ξ + ε)/9`. On an extremal curve the second variation
//! reduces, after integration by parts, to
//!
//! ```text
//! l″ = −(1/2) ∮ ((9/2)U_{ξ⁴}² + P₃U_{ξ³}² + P₂U_{ξ²}² + P₁U_ξ² + P₀U²) g dp,
//! ```
//!
//! and pointwise nonnegativity of `P₀…P₃` certifies that compactly
//! supported variations cannot increase the arc length (stable maximality).
//! This module computes the residual of the extremal equation, the
//! stability coefficients in both raw (`f₀…f₆`) and reduced (`P₀…P₃`)
//! form, the first and second variations by quadrature, and classifies the
//! extremal curvature families with nonconstant `φ` into stable and
//! unstable parameter ranges.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use crate::curves::AnalyticCurve;
use crate::error::{Error, Result};
use crate::invariants::{plane_ga_jets, reparam_jet};
use crate::jets::Jet;

/// Scalar deformation field: `(p, order) ↦` jet of the field at `p`.
pub type ScalarField = Arc<dyn Fn(f64, usize) -> Jet + Send + Sync>;

/// Exclusion radius around curvature poles of the extremal families.
pub const POLE_EXCLUSION: f64 = 1e-3;

/// Left-hand side of the extremal-curve equation
/// `φ_{ξ³} + φφ_{ξ²} + ((2φ² + 3φ_ξ + ε)/9)φ_ξ` for a curvature jet in
/// arc length; zero identifies extremal curves of the arc length
/// functional. Requires a jet of order at least 3.
pub fn extremal_residual(phi: &Jet, eps: f64) -> Result<f64> {
    let (t1, t2, t3) = extremal_terms(phi, eps)?;
    Ok(t1 + t2 + t3)
}

/// Extremal-equation residual divided by the magnitude of its largest
/// term (floored at 1); stays near machine precision on extremal curves
/// even where `φ` is large.
pub fn extremal_residual_relative(phi: &Jet, eps: f64) -> Result<f64> {
    let (t1, t2, t3) = extremal_terms(phi, eps)?;
    let scale = t1.abs().max(t2.abs()).max(t3.abs()).max(1.0);
    Ok((t1 + t2 + t3).abs() / scale)
}

fn extremal_terms(phi: &Jet, eps: f64) -> Result<(f64, f64, f64)> {
    if phi.order() < 3 {
        return Err(Error::OrderTooHigh {
            requested: 3,
            max: phi.order(),
        });
    }
    let (p0, p1, p2, p3) = (phi.val(), phi.deriv(1), phi.deriv(2), phi.deriv(3));
    let lambda = (2.0 * p0 * p0 + 3.0 * p1 + eps) / 9.0;
    Ok((p3, p0 * p2, lambda * p1))
}

/// Coefficients of the second variation on an extremal curve.
///
/// `f` holds the raw integrand coefficients of
/// `l″ = −(1/2)∮U((9/2)U_{ξ⁸} + f₆U_{ξ⁶} + … + f₁U_ξ + f₀U) g dp`;
/// `p` holds the reduced coefficients of the symmetric form
/// `l″ = −(1/2)∮((9/2)U_{ξ⁴}² + P₃U_{ξ³}² + P₂U_{ξ²}² + P₁U_ξ² + P₀U²) g dp`.
#[derive(Clone, Copy, Debug)]
pub struct StabilityCoeffs {
    /// Raw coefficients `[f₀, f₁, f₂, f₃, f₄, f₅, f₆]`.
    pub f: [f64; 7],
    /// Reduced coefficients `[P₀, P₁, P₂, P₃]`.
    pub p: [f64; 4],
    /// Curvature type `ε = ±1`.
    pub eps: f64,
}

impl StabilityCoeffs {
    /// Smallest reduced coefficient; nonnegative iff the pointwise
    /// stability criterion holds.
    pub fn min_p(&self) -> f64 {
        self.p.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }
}

/// Pointwise stability verdict from the reduced coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// All `Pᵢ ≥ 0`: no variation (compactly supported on the region where
    /// this holds) can increase the arc length.
    StableMaximal,
    /// Some `Pᵢ < 0` on an open curve: slowly varying test fields aligned
    /// with the negative coefficient increase the arc length.
    Unstable,
    /// Some `Pᵢ < 0` on a closed curve: the pointwise criterion is
    /// inconclusive because periodicity constrains the admissible fields.
    Indeterminate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, w: &mut fmt::Formatter<'_>) -> fmt::Result {
        w.write_str(match self {
            Verdict::StableMaximal => "stable-maximal",
            Verdict::Unstable => "unstable",
            Verdict::Indeterminate => "indeterminate",
        })
    }
}

/// Pointwise verdict for stability coefficients evaluated at one point (or
/// constant along a curve); `closed` selects how a negative coefficient is
/// interpreted.
pub fn pointwise_verdict(coeffs: &StabilityCoeffs, closed: bool) -> Verdict {
    let scale = 1.0 + coeffs.p.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let tol = 1e-11 * scale;
    if coeffs.p.iter().all(|&v| v >= -tol) {
        Verdict::StableMaximal
    } else if closed {
        Verdict::Indeterminate
    } else {
        Verdict::Unstable
    }
}

/// Stability coefficients from the curvature, its first two arc-length
/// derivatives, and the curvature type.
pub fn stability_coeffs(phi: f64, phi_xi: f64, phi_xi2: f64, eps: f64) -> StabilityCoeffs {
    let (h, h1, h2, e) = (phi, phi_xi, phi_xi2, eps);
    let h_2 = h * h;
    let h_3 = h_2 * h;
    let h_4 = h_2 * h_2;
    let h1_2 = h1 * h1;
    let h1_3 = h1_2 * h1;
    let h2_2 = h2 * h2;

    let f6 = -3.0 * (h_2 + 9.0 * h1 - e);
    let f5 = -9.0 * (2.0 * h * h1 + 9.0 * h2);
    let f4 = 5.0 * e * h1 - e * h_2 + 57.0 * h1_2 + h_4 / 2.0 + 96.0 * h * h2
        + 37.0 * h_2 * h1
        + 0.5;
    let f3 = -5.0 * e * h2 - 43.0 * h2 * h_2 + 285.0 * h1 * h2 - 46.0 / 3.0 * h_3 * h1
        + 59.0 * h * h1_2
        - 41.0 / 3.0 * e * h * h1;
    let f2 = 8.0 / 9.0 * h1 + 2.0 / 27.0 * e * h_4 - 76.0 / 3.0 * e * h1_2
        - 2.0 / 81.0 * h_3 * h_3
        + 5.0 / 54.0 * h_2
        + 187.5 * h2_2
        - 136.0 / 3.0 * h1_3
        + 28.0 / 3.0 * h2 * h_3
        - 72.5 * h1_2 * h_2
        + 26.0 / 9.0 * h_4 * h1
        + 47.0 / 9.0 * e * h_2 * h1
        + 2.0 / 3.0 * e * h * h2
        - 176.0 * h * h1 * h2
        + 2.0 / 81.0 * e;
    let f1 = 4.0 / 9.0 * h2 - 8.0 / 27.0 * h_4 * h * h1 - 190.0 * h * h2_2
        - 200.0 * h2 * h1_2
        - 122.0 / 3.0 * h1_3 * h
        + 136.0 / 9.0 * h1_2 * h_3
        - 8.0 / 9.0 * h2 * h_4
        + 116.0 / 9.0 * e * h * h1_2
        - 2.0 / 27.0 * h * h1
        - 8.0 / 27.0 * e * h_3 * h1
        - 24.0 * e * h1 * h2
        + 4.0 / 9.0 * e * h_2 * h2
        - 16.0 * h_2 * h1 * h2;
    let f0 = 2.0 / 27.0 * h1_2 + 6.0 * h1_2 * h1_2 + 196.0 / 27.0 * e * h1_3 - 2.0 * e * h2_2
        + 8.0 / 9.0 * h_4 * h1_2
        - 100.0 * h1 * h2_2
        + 152.0 / 3.0 * h2_2 * h_2
        + 16.0 / 27.0 * e * h1_2 * h_2
        + 152.0 / 9.0 * h_2 * h1_3
        + 112.0 / 9.0 * e * h * h2 * h1
        + 88.0 / 3.0 * h * h1_2 * h2
        + 176.0 / 9.0 * h2 * h1 * h_3;

    let p0 = 2.0 / 3.0 * h2_2 * (76.0 * h_2 - 3.0 * e - 150.0 * h1)
        + 8.0 / 9.0 * h * h2 * h1 * (22.0 * h_2 + 33.0 * h1 + 14.0 * e)
        + 6.0 * h1_2 * h1_2
        + 4.0 / 27.0 * (114.0 * h_2 + 49.0 * e) * h1_3
        + 2.0 / 27.0 * (12.0 * h_4 + 8.0 * e * h_2 + 1.0) * h1_2;
    let p1 = -58.5 * h2_2 - (2.0 * h_2 + 7.0 * e - 219.0 * h1) * h * h2 / 3.0
        + 88.0 / 3.0 * h1_3
        + 5.0 / 6.0 * (39.0 * h_2 + 8.0 * e) * h1_2
        + (2.0 * h_4 - 25.0 * e * h_2 - 4.0) * h1 / 9.0
        + (h_2 - 4.0 * e) * (2.0 * h_2 + e) * (2.0 * h_2 + e) / 162.0;
    let p2 = 33.0 * h * h2 + 48.0 * h1_2 + (19.0 * h_2 - 4.0 * e) * h1 + h_4 / 2.0 - e * h_2
        + 0.5;
    let p3 = 3.0 * (h_2 + 9.0 * h1 - e);

    StabilityCoeffs {
        f: [f0, f1, f2, f3, f4, f5, f6],
        p: [p0, p1, p2, p3],
        eps,
    }
}

/// Raw coefficients `f₀…f₆` as jets in arc length, from a curvature jet.
fn f_list_jets(phi: &Jet, eps: f64) -> [Jet; 7] {
    let e = eps;
    let h = *phi;
    let h1 = phi.d(1);
    let h2 = phi.d(2);
    let h_2 = h.mul(&h);
    let h_3 = h_2.mul(&h);
    let h_4 = h_2.mul(&h_2);
    let h_5 = h_4.mul(&h);
    let h_6 = h_3.mul(&h_3);
    let h1_2 = h1.mul(&h1);
    let h1_3 = h1_2.mul(&h1);
    let h2_2 = h2.mul(&h2);

    let f6 = h_2.add(&h1.scale(9.0)).add_const(-e).scale(-3.0);
    let f5 = h.mul(&h1).scale(2.0).add(&h2.scale(9.0)).scale(-9.0);
    let f4 = h1
        .scale(5.0 * e)
        .add(&h_2.scale(-e))
        .add(&h1_2.scale(57.0))
        .add(&h_4.scale(0.5))
        .add(&h.mul(&h2).scale(96.0))
        .add(&h_2.mul(&h1).scale(37.0))
        .add_const(0.5);
    let f3 = h2
        .scale(-5.0 * e)
        .add(&h2.mul(&h_2).scale(-43.0))
        .add(&h1.mul(&h2).scale(285.0))
        .add(&h_3.mul(&h1).scale(-46.0 / 3.0))
        .add(&h.mul(&h1_2).scale(59.0))
        .add(&h.mul(&h1).scale(-41.0 / 3.0 * e));
    let f2 = h1
        .scale(8.0 / 9.0)
        .add(&h_4.scale(2.0 / 27.0 * e))
        .add(&h1_2.scale(-76.0 / 3.0 * e))
        .add(&h_6.scale(-2.0 / 81.0))
        .add(&h_2.scale(5.0 / 54.0))
        .add(&h2_2.scale(187.5))
        .add(&h1_3.scale(-136.0 / 3.0))
        .add(&h2.mul(&h_3).scale(28.0 / 3.0))
        .add(&h1_2.mul(&h_2).scale(-72.5))
        .add(&h_4.mul(&h1).scale(26.0 / 9.0))
        .add(&h_2.mul(&h1).scale(47.0 / 9.0 * e))
        .add(&h.mul(&h2).scale(2.0 / 3.0 * e))
        .add(&h.mul(&h1).mul(&h2).scale(-176.0))
        .add_const(2.0 / 81.0 * e);
    let f1 = h2
        .scale(4.0 / 9.0)
        .add(&h_5.mul(&h1).scale(-8.0 / 27.0))
        .add(&h.mul(&h2_2).scale(-190.0))
        .add(&h2.mul(&h1_2).scale(-200.0))
        .add(&h1_3.mul(&h).scale(-122.0 / 3.0))
        .add(&h1_2.mul(&h_3).scale(136.0 / 9.0))
        .add(&h2.mul(&h_4).scale(-8.0 / 9.0))
        .add(&h.mul(&h1_2).scale(116.0 / 9.0 * e))
        .add(&h.mul(&h1).scale(-2.0 / 27.0))
        .add(&h_3.mul(&h1).scale(-8.0 / 27.0 * e))
        .add(&h1.mul(&h2).scale(-24.0 * e))
        .add(&h_2.mul(&h2).scale(4.0 / 9.0 * e))
        .add(&h_2.mul(&h1).mul(&h2).scale(-16.0));
    let f0 = h1_2
        .scale(2.0 / 27.0)
        .add(&h1_2.mul(&h1_2).scale(6.0))
        .add(&h1_3.scale(196.0 / 27.0 * e))
        .add(&h2_2.scale(-2.0 * e))
        .add(&h_4.mul(&h1_2).scale(8.0 / 9.0))
        .add(&h1.mul(&h2_2).scale(-100.0))
        .add(&h2_2.mul(&h_2).scale(152.0 / 3.0))
        .add(&h1_2.mul(&h_2).scale(16.0 / 27.0 * e))
        .add(&h_2.mul(&h1_3).scale(152.0 / 9.0))
        .add(&h.mul(&h2).mul(&h1).scale(112.0 / 9.0 * e))
        .add(&h.mul(&h1_2).mul(&h2).scale(88.0 / 3.0))
        .add(&h2.mul(&h1).mul(&h_3).scale(176.0 / 9.0));
    [f0, f1, f2, f3, f4, f5, f6]
}

/// Reduced coefficients `P₀…P₃` obtained from the raw list `f₀…f₆` by
/// integration by parts:
///
/// ```text
/// P₀ = ½(f₆⁽⁶⁾ − f₅⁽⁵⁾ + f₄⁽⁴⁾ − f₃⁽³⁾ + f₂⁽²⁾ − f₁⁽¹⁾) + f₀
/// P₁ = −3f₆⁽⁴⁾ + (5/2)f₅⁽³⁾ − 2f₄⁽²⁾ + (3/2)f₃⁽¹⁾ − f₂
/// P₂ = (9/2)f₆⁽²⁾ − (5/2)f₅⁽¹⁾ + f₄
/// P₃ = −f₆
/// ```
///
/// The curvature jet must satisfy the extremal equation (its order-3 and
/// higher coefficients are determined by the lower ones); order at least 7
/// is required. Serves as an independent check of the closed forms in
/// [`stability_coeffs`].
pub fn stability_coeffs_from_f_jets(phi: &Jet, eps: f64) -> Result<[f64; 4]> {
    if phi.order() < 7 {
        return Err(Error::OrderTooHigh {
            requested: 7,
            max: phi.order(),
        });
    }
    let [f0, f1, f2, f3, f4, f5, f6] = f_list_jets(phi, eps);
    let p0 = 0.5
        * (f6.deriv(6) - f5.deriv(5) + f4.deriv(4) - f3.deriv(3) + f2.deriv(2) - f1.deriv(1))
        + f0.val();
    let p1 = -3.0 * f6.deriv(4) + 2.5 * f5.deriv(3) - 2.0 * f4.deriv(2) + 1.5 * f3.deriv(1)
        - f2.val();
    let p2 = 4.5 * f6.deriv(2) - 2.5 * f5.deriv(1) + f4.val();
    let p3 = -f6.val();
    Ok([p0, p1, p2, p3])
}

/// Curvature jet of an extremal curve from `(φ, φ_ξ, φ_{ξ²})` at a point:
/// the extremal equation pins `φ_{ξ³} = −φφ_{ξ²} − λφ_ξ`, and repeated
/// differentiation of that relation fills in every higher coefficient.
pub fn extremal_curvature_jet(
    phi: f64,
    phi_xi: f64,
    phi_xi2: f64,
    eps: f64,
    order: usize,
) -> Result<Jet> {
    let mut d = vec![0.0; order + 1];
    d[0] = phi;
    if order >= 1 {
        d[1] = phi_xi;
    }
    if order >= 2 {
        d[2] = phi_xi2;
    }
    let mut jet = Jet::from_derivs(&d)?;
    // Each pass makes one more coefficient consistent with the equation.
    for _ in 0..order.saturating_sub(2) {
        let h1 = jet.d(1);
        let h2 = jet.d(2);
        let lambda = jet
            .mul(&jet)
            .scale(2.0)
            .add(&h1.scale(3.0))
            .add_const(eps)
            .scale(1.0 / 9.0);
        let rhs = jet.mul(&h2).add(&lambda.mul(&h1)).neg();
        for (k, slot) in d.iter_mut().enumerate().take(order + 1).skip(3) {
            *slot = rhs.deriv(k - 3);
        }
        jet = Jet::from_derivs(&d)?;
    }
    Ok(jet)
}

/// The extremal curvature families with nonconstant `φ` (up to affine
/// equivalence and arc-length translation), in the normalization
/// `u = √2·ξ/3`, `K = 3√2/2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtremalFamily {
    /// `φ = −K·tan(u)`, `ε = −1`.
    Tan,
    /// `φ = K·cot(u)`, `ε = −1`.
    Cot,
    /// `φ = √2/2 + 9/(2ξ)`, `ε = −1`.
    ShiftedReciprocalPlus,
    /// `φ = −√2/2 + 9/(2ξ)`, `ε = −1`.
    ShiftedReciprocalMinus,
    /// `φ = K·coth(u)`, `ε = 1`.
    Coth,
    /// `φ = K·tanh(u)`, `ε = 1`.
    Tanh,
}

/// `√2/3`, the arc-length scaling inside the trigonometric families.
const U_RATE: f64 = SQRT_2 / 3.0;
/// `3√2/2`, the curvature amplitude of the trigonometric families.
const K_AMP: f64 = 3.0 * SQRT_2 / 2.0;

impl ExtremalFamily {
    /// Every family, in a fixed order.
    pub const ALL: [ExtremalFamily; 6] = [
        ExtremalFamily::Tan,
        ExtremalFamily::Cot,
        ExtremalFamily::ShiftedReciprocalPlus,
        ExtremalFamily::ShiftedReciprocalMinus,
        ExtremalFamily::Coth,
        ExtremalFamily::Tanh,
    ];

    /// Curvature type of the family.
    pub fn eps(self) -> f64 {
        match self {
            ExtremalFamily::Tan
            | ExtremalFamily::Cot
            | ExtremalFamily::ShiftedReciprocalPlus
            | ExtremalFamily::ShiftedReciprocalMinus => -1.0,
            ExtremalFamily::Coth | ExtremalFamily::Tanh => 1.0,
        }
    }

    /// Short display name.
    pub fn label(self) -> &'static str {
        match self {
            ExtremalFamily::Tan => "tan",
            ExtremalFamily::Cot => "cot",
            ExtremalFamily::ShiftedReciprocalPlus => "reciprocal+",
            ExtremalFamily::ShiftedReciprocalMinus => "reciprocal-",
            ExtremalFamily::Coth => "coth",
            ExtremalFamily::Tanh => "tanh",
        }
    }

    /// Distance from `xi` to the nearest curvature pole of the family
    /// (infinite for the tanh family, which is pole-free).
    pub fn pole_distance(self, xi: f64) -> f64 {
        match self {
            ExtremalFamily::Tan => {
                let r = (xi * U_RATE - PI / 2.0).rem_euclid(PI);
                r.min(PI - r) / U_RATE
            }
            ExtremalFamily::Cot => {
                let r = (xi * U_RATE).rem_euclid(PI);
                r.min(PI - r) / U_RATE
            }
            ExtremalFamily::ShiftedReciprocalPlus
            | ExtremalFamily::ShiftedReciprocalMinus
            | ExtremalFamily::Coth => xi.abs(),
            ExtremalFamily::Tanh => f64::INFINITY,
        }
    }

    /// Curvature poles inside `[lo, hi]`.
    fn poles_in(self, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match self {
            ExtremalFamily::Tan | ExtremalFamily::Cot => {
                let step = PI / U_RATE;
                let offset = if matches!(self, ExtremalFamily::Tan) {
                    0.5 * step
                } else {
                    0.0
                };
                let k0 = ((lo - offset) / step).floor() as i64 - 1;
                let k1 = ((hi - offset) / step).ceil() as i64 + 1;
                for k in k0..=k1 {
                    let p = offset + step * k as f64;
                    if p >= lo && p <= hi {
                        out.push(p);
                    }
                }
            }
            ExtremalFamily::ShiftedReciprocalPlus
            | ExtremalFamily::ShiftedReciprocalMinus
            | ExtremalFamily::Coth => {
                if lo <= 0.0 && hi >= 0.0 {
                    out.push(0.0);
                }
            }
            ExtremalFamily::Tanh => {}
        }
        out
    }

    /// Curvature jet `[φ, φ_ξ, …]` of the family at arc length `xi`.
    pub fn phi_jet(self, xi: f64, order: usize) -> Result<Jet> {
        if self.pole_distance(xi) < POLE_EXCLUSION {
            return Err(Error::Degenerate {
                p: xi,
                what: "curvature pole of the extremal family",
            });
        }
        let u = Jet::variable(xi, order).scale(U_RATE);
        match self {
            ExtremalFamily::Tan => Ok(u.tan()?.scale(-K_AMP)),
            ExtremalFamily::Cot => Ok(u.cos().div(&u.sin())?.scale(K_AMP)),
            ExtremalFamily::ShiftedReciprocalPlus => Ok(Jet::variable(xi, order)
                .recip()?
                .scale(4.5)
                .add_const(SQRT_2 / 2.0)),
            ExtremalFamily::ShiftedReciprocalMinus => Ok(Jet::variable(xi, order)
                .recip()?
                .scale(4.5)
                .add_const(-SQRT_2 / 2.0)),
            ExtremalFamily::Coth => Ok(u.cosh().div(&u.sinh())?.scale(K_AMP)),
            ExtremalFamily::Tanh => Ok(u.tanh()?.scale(K_AMP)),
        }
    }

    /// Stability coefficients of the family at arc length `xi`.
    pub fn coeffs(self, xi: f64) -> Result<StabilityCoeffs> {
        let j = self.phi_jet(xi, 2)?;
        Ok(stability_coeffs(j.val(), j.deriv(1), j.deriv(2), self.eps()))
    }
}

impl fmt::Display for ExtremalFamily {
    fn fmt(&self, w: &mut fmt::Formatter<'_>) -> fmt::Result {
        w.write_str(self.label())
    }
}

/// Closed-form stability transition points of the extremal families:
/// `[ξ₁, ξ₂]` are the `P₀` and `P₁` roots of the `+√2/2` shifted-reciprocal
/// family, `[ξ₃, ξ₄]` their mirror images for the `−√2/2` family,
/// `ξ₅` the `P₁` root of the coth family, `[ξ₆, ξ₇]` the `P₀` roots and
/// `[ξ₈, ξ₉]` the `P₁` roots of the tanh family (positive representatives;
/// both families are even in `ξ`).
pub fn stability_thresholds() -> [f64; 9] {
    // Cardano forms for the real roots of the shifted-reciprocal cubics.
    let u1 = (9250.0 * SQRT_2 + 24.0 * 155171f64.sqrt()).cbrt();
    let xi1 = SQRT_2 / 4.0 - u1 / 4.0 - 217.0 / (2.0 * u1);
    let u2 = (4450.0 * SQRT_2 + 100.0 * 2398f64.sqrt()).cbrt();
    let xi2 = SQRT_2 / 4.0 - u2 / 4.0 - 125.0 / (2.0 * u2);
    // The minus family is the pullback of the plus family under ξ → −ξ.
    let xi3 = -xi1;
    let xi4 = -xi2;
    // Trigonometric forms for the roots of the cubics in cosh²(u).
    let a = (185.0 * 163f64.sqrt() / 26569.0).acos();
    let xi5 = K_AMP * ((30.0 * 163f64.sqrt() * (a / 3.0).cos() - 5.0).sqrt() / 5.0).acosh();
    let d = 12145f64.sqrt();
    let xi6 = K_AMP * ((175.0 + d) / 56.0).sqrt().acosh();
    let xi7 = K_AMP * ((175.0 - d) / 56.0).sqrt().acosh();
    let xi8 = K_AMP
        * (1.2 * (163f64.sqrt() * ((PI - a) / 3.0).cos() + 1.0))
            .sqrt()
            .acosh();
    let xi9 = K_AMP
        * (1.2 * (163f64.sqrt() * ((PI + a) / 3.0).cos() + 1.0))
            .sqrt()
            .acosh();
    [xi1, xi2, xi3, xi4, xi5, xi6, xi7, xi8, xi9]
}

/// One classified arc-length range of an extremal family.
#[derive(Clone, Copy, Debug)]
pub struct StabilityInterval {
    pub lo: f64,
    pub hi: f64,
    pub verdict: Verdict,
}

/// Stability classification of an extremal family over a scan range.
#[derive(Clone, Debug)]
pub struct StabilityReport {
    pub family: ExtremalFamily,
    /// Scanned arc-length range.
    pub scan: (f64, f64),
    /// Sign-change roots of each reduced coefficient `Pᵢ` inside the scan.
    pub roots: [Vec<f64>; 4],
    /// Ranges where each `Pᵢ ≥ 0`.
    pub nonneg: [Vec<(f64, f64)>; 4],
    /// Verdict on every range between consecutive roots (poles excluded).
    pub intervals: Vec<StabilityInterval>,
    /// Merged ranges with verdict [`Verdict::StableMaximal`].
    pub stable: Vec<(f64, f64)>,
}

/// Classify an extremal family over `scan`: locate every sign change of
/// the reduced coefficients by sampling and bisection, then assign each
/// subrange the pointwise verdict of its midpoint. Pole neighborhoods of
/// radius [`POLE_EXCLUSION`] are excluded from the scan.
pub fn classify_family(
    family: ExtremalFamily,
    scan: (f64, f64),
    samples: usize,
) -> Result<StabilityReport> {
    if !(scan.1 > scan.0) || !scan.0.is_finite() || !scan.1.is_finite() {
        return Err(Error::InvalidParams {
            what: format!("scan range ({}, {}) is empty or not finite", scan.0, scan.1),
        });
    }

    // Pole-free closed segments of the scan range.
    let mut segments: Vec<(f64, f64)> = vec![scan];
    // Slightly wider cut than the evaluation guard, so segment endpoints
    // never round to inside the excluded ball.
    let cut = POLE_EXCLUSION * (1.0 + 1e-9);
    for pole in family.poles_in(scan.0 - cut, scan.1 + cut) {
        let (cut_lo, cut_hi) = (pole - cut, pole + cut);
        let mut next = Vec::with_capacity(segments.len() + 1);
        for (a, b) in segments {
            if cut_hi <= a || cut_lo >= b {
                next.push((a, b));
                continue;
            }
            if cut_lo > a {
                next.push((a, cut_lo));
            }
            if cut_hi < b {
                next.push((cut_hi, b));
            }
        }
        segments = next;
    }

    let n = samples.max(200);
    let p_at = |xi: f64| -> Result<[f64; 4]> { Ok(family.coeffs(xi)?.p) };

    let mut roots: [Vec<f64>; 4] = Default::default();
    let mut nonneg: [Vec<(f64, f64)>; 4] = Default::default();
    let mut intervals = Vec::new();

    for &(a, b) in &segments {
        let dx = (b - a) / (n - 1) as f64;
        let xs: Vec<f64> = (0..n).map(|i| a + dx * i as f64).collect();
        let vals: Vec<[f64; 4]> = xs.iter().map(|&x| p_at(x)).collect::<Result<_>>()?;

        let mut seg_roots: [Vec<f64>; 4] = Default::default();
        for i in 0..4 {
            for j in 0..n - 1 {
                let (v0, v1) = (vals[j][i], vals[j + 1][i]);
                if v0 == 0.0 {
                    seg_roots[i].push(xs[j]);
                    continue;
                }
                if v0 * v1 < 0.0 {
                    let (mut lo, mut hi) = (xs[j], xs[j + 1]);
                    let mut f_lo = v0;
                    while hi - lo > 1e-13 * (1.0 + lo.abs().max(hi.abs())) {
                        let mid = 0.5 * (lo + hi);
                        let fm = p_at(mid)?[i];
                        if fm == 0.0 {
                            lo = mid;
                            hi = mid;
                        } else if f_lo * fm < 0.0 {
                            hi = mid;
                        } else {
                            lo = mid;
                            f_lo = fm;
                        }
                    }
                    seg_roots[i].push(0.5 * (lo + hi));
                }
            }
            seg_roots[i].sort_by(f64::total_cmp);

            // Ranges of nonnegative sign between consecutive roots.
            let mut cuts = vec![a];
            cuts.extend(seg_roots[i].iter().copied());
            cuts.push(b);
            let mut current: Option<(f64, f64)> = None;
            for w in cuts.windows(2) {
                let mid = 0.5 * (w[0] + w[1]);
                if p_at(mid)?[i] >= 0.0 {
                    current = match current {
                        Some((lo, _)) => Some((lo, w[1])),
                        None => Some((w[0], w[1])),
                    };
                } else if let Some(range) = current.take() {
                    nonneg[i].push(range);
                }
            }
            if let Some(range) = current {
                nonneg[i].push(range);
            }
        }

        // Verdicts between consecutive roots of any coefficient.
        let mut cuts = vec![a];
        for r in &seg_roots {
            cuts.extend(r.iter().copied());
        }
        cuts.push(b);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
        for w in cuts.windows(2) {
            if w[1] - w[0] < 1e-12 {
                continue;
            }
            let coeffs = family.coeffs(0.5 * (w[0] + w[1]))?;
            intervals.push(StabilityInterval {
                lo: w[0],
                hi: w[1],
                verdict: pointwise_verdict(&coeffs, false),
            });
        }

        for i in 0..4 {
            roots[i].extend(seg_roots[i].iter().copied());
        }
    }

    for r in &mut roots {
        r.sort_by(f64::total_cmp);
    }

    // Merge adjacent stable ranges that share an endpoint.
    let mut stable: Vec<(f64, f64)> = Vec::new();
    for iv in &intervals {
        if iv.verdict != Verdict::StableMaximal {
            continue;
        }
        match stable.last_mut() {
            Some(last) if (last.1 - iv.lo).abs() < 1e-9 => last.1 = iv.hi,
            _ => stable.push((iv.lo, iv.hi)),
        }
    }

    Ok(StabilityReport {
        family,
        scan,
        roots,
        nonneg,
        intervals,
        stable,
    })
}

/// Quadrature nodes and weights over the curve's parameter range:
/// a uniform periodic rule for closed curves, the trapezoid rule for open
/// ones; at least 512 nodes either way.
fn quad_nodes(curve: &AnalyticCurve, nodes: usize) -> (Vec<f64>, Vec<f64>) {
    let n = nodes.max(512);
    let (lo, hi) = curve.domain();
    if curve.is_closed() {
        let dp = (hi - lo) / n as f64;
        let pts = (0..n).map(|i| lo + dp * i as f64).collect();
        (pts, vec![dp; n])
    } else {
        let dp = (hi - lo) / (n - 1) as f64;
        let pts = (0..n).map(|i| lo + dp * i as f64).collect();
        let mut wts = vec![dp; n];
        wts[0] = 0.5 * dp;
        wts[n - 1] = 0.5 * dp;
        (pts, wts)
    }
}

/// Check that a normal deformation field is admissible on an open curve:
/// the field and its first three parameter derivatives must vanish at both
/// ends (otherwise the integrations by parts behind the variation formulas
/// pick up boundary terms).
fn check_open_normal_field(curve: &AnalyticCurve, u: &ScalarField) -> Result<()> {
    let (lo, hi) = curve.domain();
    let scale = field_scale(curve, u);
    for endpoint in [lo, hi] {
        let j = u(endpoint, 3);
        for k in 0..=3 {
            if j.deriv(k).abs() > 1e-8 * scale {
                return Err(Error::BoundaryViolation {
                    what: "normal deformation field must vanish to third order at the ends of an open curve",
                });
            }
        }
    }
    Ok(())
}

/// Check that a tangential field vanishes at the ends of an open curve.
fn check_open_tangential_field(curve: &AnalyticCurve, w: &ScalarField) -> Result<()> {
    let (lo, hi) = curve.domain();
    let scale = field_scale(curve, w);
    for endpoint in [lo, hi] {
        if w(endpoint, 0).val().abs() > 1e-8 * scale {
            return Err(Error::BoundaryViolation {
                what: "tangential deformation field must vanish at the ends of an open curve",
            });
        }
    }
    Ok(())
}

/// Coarse magnitude of a field over the parameter range, floored at 1.
fn field_scale(curve: &AnalyticCurve, field: &ScalarField) -> f64 {
    let (lo, hi) = curve.domain();
    let mut m = 0.0f64;
    for i in 0..=16 {
        let p = lo + (hi - lo) * i as f64 / 16.0;
        m = m.max(field(p, 0).val().abs());
    }
    m.max(1.0)
}

/// First variation of the fully affine arc length of a plane curve under
/// the deformation `C_t = U·C_{ξ²} + W·C_ξ`:
///
/// ```text
/// l′ = −(ε/2) ∮ U · (φ_{ξ³} + φφ_{ξ²} + λφ_ξ) g dp.
/// ```
///
/// The tangential component `W` contributes only through its endpoint
/// values, which must vanish on an open curve (on a closed curve it drops
/// out entirely), and `U` must vanish to third order at the ends of an
/// open curve.
pub fn first_variation(
    curve: &AnalyticCurve,
    u: &ScalarField,
    w: &ScalarField,
    nodes: usize,
) -> Result<f64> {
    if curve.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: curve.dim(),
        });
    }
    if !curve.is_closed() {
        check_open_normal_field(curve, u)?;
        check_open_tangential_field(curve, w)?;
    }
    let (pts, wts) = quad_nodes(curve, nodes);
    let mut acc = 0.0;
    let mut eps = 0.0;
    for (&p, &wt) in pts.iter().zip(&wts) {
        let x = curve.jet(p, 9)?;
        let ga = plane_ga_jets(&x, p)?;
        if eps == 0.0 {
            eps = ga.eps;
        } else if ga.eps != eps {
            return Err(Error::Degenerate {
                p,
                what: "curvature type changes inside the integration range",
            });
        }
        let phi_xi = ga.phi_xi_jet()?;
        let e = extremal_residual(&phi_xi, ga.eps)?;
        acc += wt * u(p, 0).val() * e * ga.g.val();
    }
    Ok(-0.5 * eps * acc)
}

/// Relative extremality tolerance accepted by [`second_variation`].
const EXTREMAL_TOL: f64 = 1e-6;

/// Second variation of the fully affine arc length of an extremal plane
/// curve under the normal deformation `C_t = U·C_{ξ²}`:
///
/// ```text
/// l″ = −(1/2) ∮ ((9/2)U_{ξ⁴}² + P₃U_{ξ³}² + P₂U_{ξ²}² + P₁U_ξ² + P₀U²) g dp.
/// ```
///
/// The curve must satisfy the extremal equation (checked at every node);
/// on an open curve `U` must vanish to third order at the ends.
pub fn second_variation(curve: &AnalyticCurve, u: &ScalarField, nodes: usize) -> Result<f64> {
    if curve.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: curve.dim(),
        });
    }
    if !curve.is_closed() {
        check_open_normal_field(curve, u)?;
    }
    let (pts, wts) = quad_nodes(curve, nodes);
    let mut acc = 0.0;
    for (&p, &wt) in pts.iter().zip(&wts) {
        let x = curve.jet(p, 9)?;
        let ga = plane_ga_jets(&x, p)?;
        let phi_xi = ga.phi_xi_jet()?;
        if extremal_residual_relative(&phi_xi, ga.eps)? > EXTREMAL_TOL {
            return Err(Error::Degenerate {
                p,
                what: "second variation requires an extremal curve",
            });
        }
        let coeffs = stability_coeffs(phi_xi.val(), phi_xi.deriv(1), phi_xi.deriv(2), ga.eps);
        let uxi = reparam_jet(&u(p, 4), &ga.g)?;
        if uxi.order() < 4 {
            return Err(Error::OrderTooHigh {
                requested: 4,
                max: uxi.order(),
            });
        }
        let integrand = 4.5 * uxi.deriv(4) * uxi.deriv(4)
            + coeffs.p[3] * uxi.deriv(3) * uxi.deriv(3)
            + coeffs.p[2] * uxi.deriv(2) * uxi.deriv(2)
            + coeffs.p[1] * uxi.deriv(1) * uxi.deriv(1)
            + coeffs.p[0] * uxi.val() * uxi.val();
        acc += wt * integrand * ga.g.val();
    }
    Ok(-0.5 * acc)
}
