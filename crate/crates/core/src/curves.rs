//! Analytic curve catalog, affine maps, reparametrizations, and uniformly
//! sampled closed curves with spectral differentiation.
//!
//! An [`AnalyticCurve`] produces exact derivative jets of any order up to
//! [`MAX_ORDER`] at any parameter value; the catalog covers the closed-form
//! families used throughout (conics, power curves, spirals, ovals, helices,
//! trigonometric polynomials). Orientation of plane catalog curves is
//! normalized so that `⟦C_p, C_{p²}⟧ > 0` wherever the curve is convex.

use crate::error::{Error, Result};
use crate::jets::{bracket, Jet, VecJet, MAX_ORDER};
use crate::spectral;
use std::f64::consts::TAU;
use std::sync::Arc;

/// Curve evaluator: parameter and order to a derivative jet of the point.
pub type CurveEval = Arc<dyn Fn(f64, usize) -> Result<VecJet> + Send + Sync>;

/// Scalar reparametrization evaluator: new parameter and order to the jet
/// of the old parameter as a function of the new one.
pub type ReparamEval = Arc<dyn Fn(f64, usize) -> Jet + Send + Sync>;

/// A smooth parametric curve in `R^n` with exact jets.
#[derive(Clone)]
pub struct AnalyticCurve {
    name: String,
    dim: usize,
    lo: f64,
    hi: f64,
    closed: bool,
    eval: CurveEval,
}

impl AnalyticCurve {
    /// Wrap a raw evaluator. `domain = (lo, hi)`; for closed curves the
    /// parameter is periodic with period `hi − lo`.
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        domain: (f64, f64),
        closed: bool,
        eval: CurveEval,
    ) -> Self {
        assert!(domain.1 > domain.0 && dim >= 1);
        AnalyticCurve {
            name: name.into(),
            dim,
            lo: domain.0,
            hi: domain.1,
            closed,
            eval,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Parameter period for closed curves.
    pub fn period(&self) -> Option<f64> {
        self.closed.then_some(self.hi - self.lo)
    }

    /// Derivative jet of the curve point at `p` up to `order`.
    pub fn jet(&self, p: f64, order: usize) -> Result<VecJet> {
        if order > MAX_ORDER {
            return Err(Error::OrderTooHigh {
                requested: order,
                max: MAX_ORDER,
            });
        }
        let p = if self.closed {
            self.lo + (p - self.lo).rem_euclid(self.hi - self.lo)
        } else {
            let tol = 1e-9 * (self.hi - self.lo).abs();
            if p < self.lo - tol || p > self.hi + tol {
                return Err(Error::OutOfDomain {
                    p,
                    lo: self.lo,
                    hi: self.hi,
                });
            }
            p.clamp(self.lo, self.hi)
        };
        (self.eval)(p, order)
    }

    /// Curve point at `p`.
    pub fn point(&self, p: f64) -> Result<Vec<f64>> {
        Ok(self.jet(p, 0)?.val())
    }

    /// Image of the curve under an affine map.
    pub fn transformed(&self, map: &AffineMap) -> Result<AnalyticCurve> {
        if map.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: map.dim(),
            });
        }
        let inner = self.eval.clone();
        let map = map.clone();
        let eval: CurveEval = Arc::new(move |p, order| map.apply_jet(&inner(p, order)?));
        Ok(AnalyticCurve {
            name: format!("{}*", self.name),
            dim: self.dim,
            lo: self.lo,
            hi: self.hi,
            closed: self.closed,
            eval,
        })
    }

    /// Same point set traversed in the opposite direction.
    pub fn reversed(&self) -> AnalyticCurve {
        let inner = self.eval.clone();
        let (lo, hi) = (self.lo, self.hi);
        let eval: CurveEval = Arc::new(move |q, order| {
            let j = inner(lo + hi - q, order)?;
            let comps = j
                .comps()
                .iter()
                .map(|c| {
                    let mut d = vec![0.0; order + 1];
                    for (k, dk) in d.iter_mut().enumerate() {
                        *dk = if k % 2 == 0 { c.deriv(k) } else { -c.deriv(k) };
                    }
                    Jet::from_derivs(&d)
                })
                .collect::<Result<Vec<_>>>()?;
            VecJet::new(comps)
        });
        AnalyticCurve {
            name: format!("{}~", self.name),
            dim: self.dim,
            lo,
            hi,
            closed: self.closed,
            eval,
        }
    }

    /// Plane curve reoriented, if needed, so `⟦C_p, C_{p²}⟧ > 0` at the
    /// probe parameter (domain midpoint by default).
    pub fn oriented_positively(&self) -> Result<AnalyticCurve> {
        if self.dim != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: self.dim,
            });
        }
        let p = 0.5 * (self.lo + self.hi);
        let j = self.jet(p, 2)?;
        let b = bracket(&[&j.deriv_vec(1), &j.deriv_vec(2)])?;
        if b == 0.0 {
            return Err(Error::Degenerate {
                p,
                what: "orientation probe bracket vanishes",
            });
        }
        Ok(if b > 0.0 { self.clone() } else { self.reversed() })
    }

    /// Curve composed with a reparametrization `p = h(q)`, `q` in
    /// `new_domain`. `h` must map the new domain into the old one.
    pub fn reparametrized(&self, h: ReparamEval, new_domain: (f64, f64)) -> AnalyticCurve {
        let inner = self.eval.clone();
        let closed = self.closed;
        let (lo, hi) = (self.lo, self.hi);
        let eval: CurveEval = Arc::new(move |q, order| {
            let hq = h(q, order);
            let mut p = hq.val();
            if closed {
                p = lo + (p - lo).rem_euclid(hi - lo);
            }
            let outer = inner(p, order)?;
            Ok(outer.compose(&hq))
        });
        AnalyticCurve {
            name: format!("{}@", self.name),
            dim: self.dim,
            lo: new_domain.0,
            hi: new_domain.1,
            closed: self.closed,
            eval,
        }
    }
}

/// Invertible affine transformation `x ↦ A·x + b`.
#[derive(Debug, Clone)]
pub struct AffineMap {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl AffineMap {
    /// Build from a square matrix (rows) and translation; the matrix must be
    /// nonsingular.
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        let n = a.len();
        if n == 0 || a.iter().any(|r| r.len() != n) || b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n.max(1),
                got: b.len(),
            });
        }
        let m = AffineMap { a, b };
        let d = m.det()?;
        if d.abs() < 1e-14 {
            return Err(Error::SingularMap { det: d });
        }
        Ok(m)
    }

    /// Purely linear map.
    pub fn linear(a: Vec<Vec<f64>>) -> Result<Self> {
        let n = a.len();
        AffineMap::new(a, vec![0.0; n])
    }

    pub fn identity(n: usize) -> Self {
        let a = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        AffineMap { a, b: vec![0.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.a
    }

    pub fn translation(&self) -> &[f64] {
        &self.b
    }

    /// Determinant of the linear part.
    pub fn det(&self) -> Result<f64> {
        let n = self.dim();
        let cols: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| self.a[i][j]).collect()).collect();
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        bracket(&refs)
    }

    pub fn apply_point(&self, x: &[f64]) -> Vec<f64> {
        self.a
            .iter()
            .zip(&self.b)
            .map(|(row, bi)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + bi)
            .collect()
    }

    /// Affine image of a curve jet: linear part on all derivative levels,
    /// translation on the value only.
    pub fn apply_jet(&self, x: &VecJet) -> Result<VecJet> {
        let lin = x.linear_map(&self.a)?;
        let comps = lin
            .comps()
            .iter()
            .zip(&self.b)
            .map(|(c, bi)| c.add_const(*bi))
            .collect();
        VecJet::new(comps)
    }

    /// Composition `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &AffineMap) -> Result<AffineMap> {
        let n = self.dim();
        if other.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: other.dim(),
            });
        }
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = (0..n).map(|k| self.a[i][k] * other.a[k][j]).sum();
            }
        }
        let b = self.apply_point(&other.b);
        AffineMap::new(a, b)
    }
}

pub(crate) fn plane_curve(
    name: String,
    domain: (f64, f64),
    closed: bool,
    f: impl Fn(&Jet) -> Result<[Jet; 2]> + Send + Sync + 'static,
) -> AnalyticCurve {
    let eval: CurveEval = Arc::new(move |p, order| {
        let t = Jet::variable(p, order);
        let [x, y] = f(&t)?;
        VecJet::new(vec![x, y])
    });
    AnalyticCurve::new(name, 2, domain, closed, eval)
}

/// Ellipse `(a cos p, b sin p)`, positively oriented, period 2π.
pub fn ellipse(a: f64, b: f64) -> Result<AnalyticCurve> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidParams {
            what: format!("ellipse needs positive semi-axes, got ({a}, {b})"),
        });
    }
    Ok(plane_curve(
        format!("ellipse({a},{b})"),
        (0.0, TAU),
        true,
        move |t| Ok([t.cos().scale(a), t.sin().scale(b)]),
    ))
}

/// Circle of radius `r`.
pub fn circle(r: f64) -> Result<AnalyticCurve> {
    if !(r > 0.0) {
        return Err(Error::InvalidParams {
            what: format!("circle needs positive radius, got {r}"),
        });
    }
    Ok(plane_curve(format!("circle({r})"), (0.0, TAU), true, move |t| {
        Ok([t.cos().scale(r), t.sin().scale(r)])
    }))
}

/// One branch of the hyperbola `(x/a)² − (y/b)² = 1`, oriented so
/// `⟦C_p, C_{p²}⟧ = ab > 0`.
pub fn hyperbola_branch(a: f64, b: f64) -> Result<AnalyticCurve> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidParams {
            what: format!("hyperbola needs positive semi-axes, got ({a}, {b})"),
        });
    }
    Ok(plane_curve(
        format!("hyperbola({a},{b})"),
        (-2.0, 2.0),
        false,
        move |t| Ok([t.cosh().scale(a), t.sinh().scale(-b)]),
    ))
}

/// Parabola `(p, p²)`; flat for the fully affine metric (every point is an
/// inflection of the invariant density).
pub fn parabola() -> AnalyticCurve {
    plane_curve("parabola".into(), (-1.0, 1.0), false, |t| Ok([*t, t.mul(t)]))
}

/// Power curve `(s, s^alpha)` traversed with `s = 3 − p` decreasing over
/// `p ∈ [0.5, 2.5]`.
///
/// The traversal direction is the one that makes the fully affine curvature
/// equal `+(α+1)/√(|α−2|·|2α−1|)`; the opposite direction negates it.
pub fn power_curve(alpha: f64) -> Result<AnalyticCurve> {
    if alpha == 0.0 || alpha == 1.0 {
        return Err(Error::InvalidParams {
            what: format!("power curve degenerates to a line for alpha = {alpha}"),
        });
    }
    Ok(plane_curve(
        format!("power({alpha})"),
        (0.5, 2.5),
        false,
        move |t| {
            let s = t.neg().add_const(3.0);
            Ok([s, s.powf(alpha)?])
        },
    ))
}

/// The curve `(2s, s ln s)` traversed with `s = 3 − p` decreasing over
/// `p ∈ [0.5, 2.5]`; this direction gives fully affine curvature `+2`.
pub fn x_log_x() -> AnalyticCurve {
    plane_curve("xlogx".into(), (0.5, 2.5), false, |t| {
        let s = t.neg().add_const(3.0);
        Ok([s.scale(2.0), s.mul(&s.ln()?)])
    })
}

/// Logarithmic spiral `e^{αs}(sin s, −cos s)` with `α = 3 tan β`,
/// `β ∈ (0, π/2)`, traversed with `s = 2π − p` decreasing over `p ∈ [0, 2π]`;
/// this direction gives fully affine curvature `+2 sin β`.
pub fn log_spiral(beta: f64) -> Result<AnalyticCurve> {
    if !(beta > 0.0 && beta < std::f64::consts::FRAC_PI_2) {
        return Err(Error::InvalidParams {
            what: format!("log spiral needs beta in (0, pi/2), got {beta}"),
        });
    }
    let alpha = 3.0 * beta.tan();
    Ok(plane_curve(
        format!("logspiral({beta})"),
        (0.0, TAU),
        false,
        move |t| {
            let s = t.neg().add_const(TAU);
            let e = s.scale(alpha).exp();
            Ok([e.mul(&s.sin()), e.mul(&s.cos()).neg()])
        },
    ))
}

/// Convex closed oval `r(p) = 1 + eps·cos(m p)` in polar form; rejects
/// parameters that break convexity.
pub fn bumpy_oval(eps: f64, m: u32) -> Result<AnalyticCurve> {
    if !(eps > 0.0 && eps < 1.0) || m == 0 {
        return Err(Error::InvalidParams {
            what: format!("bumpy oval needs 0 < eps < 1 and m >= 1, got ({eps}, {m})"),
        });
    }
    // Curvature numerator r² + 2r'² − r r'' ≥ (1−e)² − (1+e)e m².
    let mf = m as f64;
    if (1.0 - eps).powi(2) <= (1.0 + eps) * eps * mf * mf {
        return Err(Error::InvalidParams {
            what: format!("bumpy oval ({eps}, {m}) is not certifiably convex"),
        });
    }
    Ok(plane_curve(
        format!("bumpy({eps},{m})"),
        (0.0, TAU),
        true,
        move |t| {
            let r = t.scale(mf).cos().scale(eps).add_const(1.0);
            Ok([r.mul(&t.cos()), r.mul(&t.sin())])
        },
    ))
}

/// The quartic oval `x⁴ + y⁴ = 1`, parametrized by angle.
pub fn quartic_oval() -> AnalyticCurve {
    plane_curve("quartic".into(), (0.0, TAU), true, |t| {
        let s = t.sin();
        let c = t.cos();
        let q = s.powi(4)?.add(&c.powi(4)?);
        let w = q.powf(-0.25)?;
        Ok([c.mul(&w), s.mul(&w)])
    })
}

/// Circular helix `(a cos p, a sin p, c p)`.
pub fn helix(a: f64, c: f64) -> Result<AnalyticCurve> {
    if !(a > 0.0) || c == 0.0 {
        return Err(Error::InvalidParams {
            what: format!("helix needs a > 0 and c != 0, got ({a}, {c})"),
        });
    }
    let eval: CurveEval = Arc::new(move |p, order| {
        let t = Jet::variable(p, order);
        VecJet::new(vec![t.cos().scale(a), t.sin().scale(a), t.scale(c)])
    });
    Ok(AnalyticCurve::new(
        format!("helix({a},{c})"),
        3,
        (0.0, 2.0 * TAU),
        false,
        eval,
    ))
}

/// Trigonometric polynomial curve: component `i` is
/// `drift[i]·p + Σ_m (cos_c[i][m]·cos((m+1)p) + sin_c[i][m]·sin((m+1)p))`.
/// Closed requires zero drift.
pub fn trig_poly_curve(
    drift: Vec<f64>,
    cos_c: Vec<Vec<f64>>,
    sin_c: Vec<Vec<f64>>,
    domain: (f64, f64),
    closed: bool,
) -> Result<AnalyticCurve> {
    let dim = drift.len();
    if dim == 0 || cos_c.len() != dim || sin_c.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim.max(1),
            got: cos_c.len(),
        });
    }
    if closed && drift.iter().any(|&d| d != 0.0) {
        return Err(Error::InvalidParams {
            what: "closed trigonometric curve cannot carry a drift term".into(),
        });
    }
    let eval: CurveEval = Arc::new(move |p, order| {
        let t = Jet::variable(p, order);
        let comps = (0..dim)
            .map(|i| {
                let mut acc = t.scale(drift[i]);
                for (m, &cc) in cos_c[i].iter().enumerate() {
                    acc = acc.add(&t.scale((m + 1) as f64).cos().scale(cc));
                }
                for (m, &sc) in sin_c[i].iter().enumerate() {
                    acc = acc.add(&t.scale((m + 1) as f64).sin().scale(sc));
                }
                acc
            })
            .collect();
        VecJet::new(comps)
    });
    Ok(AnalyticCurve::new(
        format!("trigpoly(R^{dim})"),
        dim,
        domain,
        closed,
        eval,
    ))
}

/// Uniformly sampled closed curve: per-component periodic fields over one
/// parameter period, differentiated spectrally.
#[derive(Debug, Clone)]
pub struct SampledClosedCurve {
    comps: Vec<Vec<f64>>,
    period: f64,
}

/// Minimum node count accepted for sampled curves.
pub const MIN_SAMPLES: usize = 16;

impl SampledClosedCurve {
    pub fn from_components(comps: Vec<Vec<f64>>, period: f64) -> Result<Self> {
        if comps.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        let n = comps[0].len();
        if n < MIN_SAMPLES {
            return Err(Error::TooFewSamples {
                min: MIN_SAMPLES,
                got: n,
            });
        }
        if comps.iter().any(|c| c.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: comps.iter().map(|c| c.len()).min().unwrap(),
            });
        }
        if !(period > 0.0) {
            return Err(Error::InvalidParams {
                what: format!("sampled curve needs positive period, got {period}"),
            });
        }
        Ok(SampledClosedCurve { comps, period })
    }

    /// Sample a closed analytic curve at `n` uniform parameter nodes.
    pub fn from_analytic(curve: &AnalyticCurve, n: usize) -> Result<Self> {
        if !curve.is_closed() {
            return Err(Error::NotClosed);
        }
        if n < MIN_SAMPLES {
            return Err(Error::TooFewSamples {
                min: MIN_SAMPLES,
                got: n,
            });
        }
        let (lo, hi) = curve.domain();
        let period = hi - lo;
        let mut comps = vec![vec![0.0; n]; curve.dim()];
        for j in 0..n {
            let p = lo + j as f64 * period / n as f64;
            let x = curve.point(p)?;
            for (i, v) in x.iter().enumerate() {
                comps[i][j] = *v;
            }
        }
        SampledClosedCurve::from_components(comps, period)
    }

    pub fn n(&self) -> usize {
        self.comps[0].len()
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.comps[i]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.comps
    }

    /// Parameter value of node `j`.
    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.period / self.n() as f64
    }

    /// Per-node derivative jets of the curve point, from spectral
    /// differentiation of the component fields.
    pub fn spectral_jets(&self, order: usize, mode_cap: Option<usize>) -> Result<Vec<VecJet>> {
        if order > MAX_ORDER {
            return Err(Error::OrderTooHigh {
                requested: order,
                max: MAX_ORDER,
            });
        }
        let n = self.n();
        let fields: Vec<Vec<Vec<f64>>> = self
            .comps
            .iter()
            .map(|c| spectral::deriv_fields_multi(c, self.period, order, mode_cap))
            .collect();
        let mut out = Vec::with_capacity(n);
        for j in 0..n {
            let comps = fields
                .iter()
                .map(|per_comp| {
                    let d: Vec<f64> = (0..=order).map(|k| per_comp[k][j]).collect();
                    Jet::from_derivs(&d)
                })
                .collect::<Result<Vec<_>>>()?;
            out.push(VecJet::new(comps)?);
        }
        Ok(out)
    }
}
