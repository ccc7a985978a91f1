//! Group-invariant arc-length elements and curvatures for the affine
//! hierarchy of transformation groups acting on curves in `R^n`.
//!
//! Supported groups: special Euclidean `SE`, similarity `Sim`, special
//! linear `SL`, general linear `GL`, equi-affine `SA`, and fully affine
//! `GA`. Each group has an invariant density (arc-length element) and a
//! generating set of differential invariants. The fully affine plane case
//! carries the full structure: metric sign ε, density g, curvature φ, and
//! the derived coefficient λ of the third-order frame equation.

use crate::curves::{AnalyticCurve, ReparamEval};
use crate::error::{Error, Result};
use crate::jets::{bracket, bracket_derivs, bracket_jets, ga_coefficients, Jet, VecJet, MAX_ORDER};

/// Transformation group tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupTag {
    /// Rotations and translations.
    SE,
    /// Rotations, translations and scalings.
    Sim,
    /// Unimodular linear maps (no translations).
    SL,
    /// Invertible linear maps (no translations).
    GL,
    /// Equi-affine: unimodular linear maps and translations.
    SA,
    /// Fully affine: invertible linear maps and translations.
    GA,
}

impl GroupTag {
    pub fn all() -> [GroupTag; 6] {
        [
            GroupTag::SE,
            GroupTag::Sim,
            GroupTag::SL,
            GroupTag::GL,
            GroupTag::SA,
            GroupTag::GA,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            GroupTag::SE => "SE",
            GroupTag::Sim => "Sim",
            GroupTag::SL => "SL",
            GroupTag::GL => "GL",
            GroupTag::SA => "SA",
            GroupTag::GA => "GA",
        }
    }
}

impl std::fmt::Display for GroupTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for GroupTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "se" => Ok(GroupTag::SE),
            "sim" => Ok(GroupTag::Sim),
            "sl" => Ok(GroupTag::SL),
            "gl" => Ok(GroupTag::GL),
            "sa" => Ok(GroupTag::SA),
            "ga" => Ok(GroupTag::GA),
            _ => Err(Error::InvalidParams {
                what: format!("unknown group '{s}' (expected SE, Sim, SL, GL, SA or GA)"),
            }),
        }
    }
}

/// Dot product of two vector jets.
pub fn dot_jets(a: &VecJet, b: &VecJet) -> Jet {
    let order = a.order().min(b.order());
    let mut acc = Jet::constant(0.0, order);
    for i in 0..a.dim() {
        acc = acc.add(&a.comp(i).mul(b.comp(i)));
    }
    acc
}

/// Generalized cross product of `n−1` jet vectors in `R^n`, oriented so
/// `det[u₁, …, u_{n−1}, v] > 0`.
pub fn cross_jets(cols: &[&VecJet]) -> Result<VecJet> {
    let n = cols.len() + 1;
    if cols.iter().any(|c| c.dim() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: cols.first().map_or(0, |c| c.dim()),
        });
    }
    let order = cols.iter().map(|c| c.order()).min().unwrap();
    let mut comps = Vec::with_capacity(n);
    for i in 0..n {
        // Minor: all rows except i.
        let minors: Vec<VecJet> = cols
            .iter()
            .map(|c| {
                let sub: Vec<Jet> = (0..n)
                    .filter(|&r| r != i)
                    .map(|r| c.comp(r).truncate(order))
                    .collect();
                VecJet::new(sub)
            })
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&VecJet> = minors.iter().collect();
        let m = bracket_jets(&refs)?;
        let sign = if (i + 1 + n) % 2 == 0 { 1.0 } else { -1.0 };
        comps.push(m.scale(sign));
    }
    VecJet::new(comps)
}

/// Derivative jets of a scalar with respect to a new variable, given the
/// jet of the rate `d(new)/d(old)`; both inputs are jets in the old
/// variable. The output order is limited by the available input orders.
pub fn reparam_jet(f: &Jet, rate: &Jet) -> Result<Jet> {
    let mut vals = vec![f.val()];
    let mut cur = *f;
    while cur.order() >= 1 && vals.len() <= MAX_ORDER {
        cur = cur.d(1).div(rate)?;
        vals.push(cur.val());
    }
    Jet::from_derivs(&vals)
}

/// Successive derivative jets of a point with respect to the parameter `s`
/// defined by `ds/dp = rate`: returns `x_{s}, x_{s²}, …, x_{s^count}` as
/// jets in `p`.
fn param_jets(x: &VecJet, rate: &Jet, count: usize) -> Result<Vec<VecJet>> {
    let mut out = Vec::with_capacity(count);
    let mut cur = x.d(1).div_jet(rate)?;
    out.push(cur.clone());
    for _ in 1..count {
        cur = cur.d(1).div_jet(rate)?;
        out.push(cur.clone());
    }
    Ok(out)
}

fn vec_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cramer solve of `basis · c = rhs` (columns given).
fn solve_cramer(basis: &[Vec<f64>], rhs: &[f64], p: f64) -> Result<Vec<f64>> {
    let n = rhs.len();
    let cols: Vec<&[f64]> = basis.iter().map(|c| c.as_slice()).collect();
    let den = bracket(&cols)?;
    let scale: f64 = basis.iter().map(|c| vec_norm(c)).product::<f64>().max(1e-30);
    if den.abs() < 1e-12 * scale {
        return Err(Error::DegenerateFrame { p });
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut cols_i: Vec<&[f64]> = cols.clone();
        cols_i[i] = rhs;
        out.push(bracket(&cols_i)? / den);
    }
    Ok(out)
}

/// Fully affine metric data of a curve point in `R^n`.
#[derive(Debug, Clone, Copy)]
pub struct GaMetric {
    pub n: usize,
    /// Metric quantity F; the squared density is `εF`.
    pub f: f64,
    /// Metric sign `ε = sgn F`.
    pub eps: f64,
    /// Arc-length density `g = √(εF) = dξ/dp`.
    pub g: f64,
}

/// Column orders (decreasing) of the three bracket combinations entering F.
fn ga_bracket_orders(n: usize) -> (Vec<usize>, Vec<usize>, Vec<usize>, Vec<usize>) {
    let dn: Vec<usize> = (1..=n).rev().collect();
    let mut t1 = vec![n + 2];
    t1.extend((1..n).rev());
    let mut t2 = vec![n + 1];
    t2.extend((1..n).rev());
    let mut t3 = vec![n + 1, n];
    t3.extend((1..n.saturating_sub(1)).rev());
    (dn, t1, t2, t3)
}

/// Fully affine arc-length element of a curve in `R^n` from a jet of order
/// at least `n + 2`.
pub fn ga_metric(x: &VecJet, p: f64) -> Result<GaMetric> {
    let n = x.dim();
    if n < 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: n });
    }
    if x.order() < n + 2 {
        return Err(Error::OrderTooHigh {
            requested: n + 2,
            max: x.order(),
        });
    }
    let c = ga_coefficients(n as u32)?;
    let (dn, t1, t2, t3) = ga_bracket_orders(n);
    let d = bracket_derivs(x, &dn)?;
    let scale_d: f64 = dn.iter().map(|&k| vec_norm(&x.deriv_vec(k))).product();
    if d.abs() < 1e-12 * scale_d.max(1e-30) {
        return Err(if n == 2 {
            Error::FlatPoint { p }
        } else {
            Error::DegenerateFrame { p }
        });
    }
    let b1 = bracket_derivs(x, &t1)? / d;
    let b2 = bracket_derivs(x, &t2)? / d;
    let b3 = bracket_derivs(x, &t3)? / d;
    let (al, be, ga) = (c.alpha as f64, c.beta as f64, c.gamma as f64);
    let f = al * b1 - be * b2 * b2 + ga * b3;
    let scale_f = (al * b1).abs() + (be * b2 * b2).abs() + (ga * b3).abs();
    if f.abs() < 1e-9 * scale_f.max(1.0) {
        return Err(Error::InflectionPoint { p });
    }
    let eps = f.signum();
    Ok(GaMetric {
        n,
        f,
        eps,
        g: (eps * f).sqrt(),
    })
}

/// Scalar fully affine invariants of a plane curve point.
#[derive(Debug, Clone, Copy)]
pub struct PlaneInvariants {
    /// Arc-length density `dξ/dp`.
    pub g: f64,
    /// Fully affine curvature.
    pub phi: f64,
    /// Coefficient λ of the third-order frame equation
    /// `C_{ξ³} = −λ C_ξ − φ C_{ξ²}`.
    pub lambda: f64,
    /// Metric sign.
    pub eps: f64,
    /// Metric quantity F.
    pub f: f64,
}

/// Jet-level fully affine data of a plane curve point: everything is a jet
/// in the curve parameter `p`.
#[derive(Debug, Clone)]
pub struct PlaneGaJets {
    pub eps: f64,
    pub f: Jet,
    /// Density jet `g(p)`.
    pub g: Jet,
    /// `C_ξ`, `C_{ξ²}`, `C_{ξ³}` as jets in `p`.
    pub c_xi: VecJet,
    pub c_xi2: VecJet,
    pub c_xi3: VecJet,
    /// Curvature jet `φ(p)`.
    pub phi: Jet,
    /// Frame coefficient jet `λ(p)`.
    pub lambda: Jet,
}

impl PlaneGaJets {
    /// Derivatives of φ with respect to arc length: `[φ, φ_ξ, φ_{ξ²}, …]`,
    /// as far as the available jet orders permit.
    pub fn phi_xi_jet(&self) -> Result<Jet> {
        reparam_jet(&self.phi, &self.g)
    }

    pub fn invariants(&self) -> PlaneInvariants {
        PlaneInvariants {
            g: self.g.val(),
            phi: self.phi.val(),
            lambda: self.lambda.val(),
            eps: self.eps,
            f: self.f.val(),
        }
    }
}

/// Fully affine jets of a plane curve point from a parameter jet of order
/// at least 6; order `K` yields a φ jet of order `K − 6`.
pub fn plane_ga_jets(x: &VecJet, p: f64) -> Result<PlaneGaJets> {
    if x.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: x.dim(),
        });
    }
    if x.order() < 6 {
        return Err(Error::OrderTooHigh {
            requested: 6,
            max: x.order(),
        });
    }
    let d1 = x.d(1);
    let d2 = x.d(2);
    let d3 = x.d(3);
    let d4 = x.d(4);
    let dj = bracket_jets(&[&d1, &d2])?;
    let scale_d = vec_norm(&x.deriv_vec(1)) * vec_norm(&x.deriv_vec(2));
    if dj.val().abs() < 1e-12 * scale_d.max(1e-30) {
        return Err(Error::FlatPoint { p });
    }
    let e3 = bracket_jets(&[&d1, &d3])?;
    let e4 = bracket_jets(&[&d1, &d4])?;
    let g23 = bracket_jets(&[&d2, &d3])?;
    // F = (3·D·E₄ − 5·E₃² + 12·D·G₂₃)/D².
    let num = dj
        .mul(&e4)
        .scale(3.0)
        .sub(&e3.mul(&e3).scale(5.0))
        .add(&dj.mul(&g23).scale(12.0));
    let f = num.div(&dj.mul(&dj))?;
    let scale_f = (3.0 * dj.val() * e4.val()).abs()
        + (5.0 * e3.val() * e3.val()).abs()
        + (12.0 * dj.val() * g23.val()).abs();
    if f.val().abs() * dj.val() * dj.val() < 1e-9 * scale_f.max(1.0) {
        return Err(Error::InflectionPoint { p });
    }
    let eps = f.val().signum();
    let g = f.scale(eps).sqrt()?;
    let c_xi = x.d(1).div_jet(&g)?;
    let c_xi2 = c_xi.d(1).div_jet(&g)?;
    let c_xi3 = c_xi2.d(1).div_jet(&g)?;
    let bxi = bracket_jets(&[&c_xi, &c_xi2])?;
    if bxi.val().abs() < 1e-13 {
        return Err(Error::Degenerate {
            p,
            what: "arc-length frame bracket vanishes",
        });
    }
    let phi = bracket_jets(&[&c_xi, &c_xi3])?.div(&bxi)?.neg();
    let lambda = bracket_jets(&[&c_xi3, &c_xi2])?.div(&bxi)?.neg();
    Ok(PlaneGaJets {
        eps,
        f,
        g,
        c_xi,
        c_xi2,
        c_xi3,
        phi,
        lambda,
    })
}

/// Scalar fully affine invariants of a plane curve at parameter `p`.
pub fn plane_ga_invariants(curve: &AnalyticCurve, p: f64) -> Result<PlaneInvariants> {
    let x = curve.jet(p, 6)?;
    Ok(plane_ga_jets(&x, p)?.invariants())
}

/// Residual of the defining relation `λ = (2φ² + 3φ_ξ + ε)/9`; requires a
/// jet of order at least 7.
pub fn lambda_consistency_residual(x: &VecJet, p: f64) -> Result<f64> {
    let jets = plane_ga_jets(x, p)?;
    let phi_xi = jets.phi_xi_jet()?;
    if phi_xi.order() < 1 {
        return Err(Error::OrderTooHigh {
            requested: 7,
            max: x.order(),
        });
    }
    let phi = phi_xi.val();
    let expect = (2.0 * phi * phi + 3.0 * phi_xi.deriv(1) + jets.eps) / 9.0;
    Ok((jets.lambda.val() - expect).abs())
}

/// Higher-dimensional fully affine invariants: coefficients of the frame
/// equation `x_{ξ^{n+1}} = φ₁ x_{ξ^n} + λ x_{ξ^{n−1}} + φ₃ x_{ξ^{n−2}} + …
/// + φ_n x_ξ` in arclength parametrization.
#[derive(Debug, Clone)]
pub struct HigherGaInvariants {
    pub n: usize,
    pub eps: f64,
    /// Density `dξ/dp`.
    pub g: f64,
    /// `[φ₁, λ, φ₃, …, φ_n]`.
    pub coeffs: Vec<f64>,
    /// Relative residual of the frame decomposition.
    pub frenet_residual: f64,
    /// λ recomputed from `ω((α−β)φ₁² + α φ₁' − ε)/(3n(n+1))` when the jet
    /// order permits the derivative φ₁'.
    pub lambda_formula: Option<f64>,
}

impl HigherGaInvariants {
    pub fn phi1(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn lambda(&self) -> f64 {
        self.coeffs[1]
    }
}

/// Fully affine invariants of a curve in `R^n` (n ≥ 2) from a jet of order
/// at least `2n + 2`; order `2n + 3` additionally yields `lambda_formula`.
pub fn higher_ga_invariants(x: &VecJet, p: f64) -> Result<HigherGaInvariants> {
    let n = x.dim();
    let k = x.order();
    if k < 2 * n + 2 {
        return Err(Error::OrderTooHigh {
            requested: 2 * n + 2,
            max: k,
        });
    }
    let c = ga_coefficients(n as u32)?;
    // Jet-valued F and g; the scalar path also validates degeneracies.
    let metric = ga_metric(x, p)?;
    let (dn, t1, t2, t3) = ga_bracket_orders(n);
    let bj = |orders: &[usize]| -> Result<Jet> {
        let cols: Vec<VecJet> = orders.iter().map(|&o| x.d(o)).collect();
        let refs: Vec<&VecJet> = cols.iter().collect();
        bracket_jets(&refs)
    };
    let dj = bj(&dn)?;
    let b1 = bj(&t1)?.div(&dj)?;
    let b2 = bj(&t2)?.div(&dj)?;
    let b3 = bj(&t3)?.div(&dj)?;
    let f = b1
        .scale(c.alpha as f64)
        .sub(&b2.mul(&b2).scale(c.beta as f64))
        .add(&b3.scale(c.gamma as f64));
    let g = f.scale(metric.eps).sqrt()?;
    // ξ-derivative vectors as p-jets.
    let xi = param_jets(x, &g, n + 1)?;
    let basis: Vec<Vec<f64>> = (0..n).map(|i| xi[n - 1 - i].val()).collect();
    let rhs = xi[n].val();
    let coeffs = solve_cramer(&basis, &rhs, p)?;
    let mut resid = vec![0.0; n];
    for (ci, col) in coeffs.iter().zip(&basis) {
        for (r, v) in resid.iter_mut().zip(col) {
            *r += ci * v;
        }
    }
    for (r, v) in resid.iter_mut().zip(&rhs) {
        *r -= v;
    }
    let frenet_residual = vec_norm(&resid) / vec_norm(&rhs).max(1e-30);
    // φ₁ as a jet (order k − 2n − 2) for the λ formula.
    let lambda_formula = if k >= 2 * n + 3 {
        let mut num_cols: Vec<&VecJet> = vec![&xi[n]];
        for i in 1..n {
            num_cols.push(&xi[n - 1 - i]);
        }
        let mut den_cols: Vec<&VecJet> = Vec::with_capacity(n);
        for i in 0..n {
            den_cols.push(&xi[n - 1 - i]);
        }
        let phi1_jet = bracket_jets(&num_cols)?.div(&bracket_jets(&den_cols)?)?;
        let phi1 = phi1_jet.val();
        let phi1_prime = phi1_jet.d(1).div(&g)?.val();
        let nn = n as f64;
        Some(
            c.omega as f64 * ((c.alpha - c.beta) as f64 * phi1 * phi1
                + c.alpha as f64 * phi1_prime
                - metric.eps)
                / (3.0 * nn * (nn + 1.0)),
        )
    } else {
        None
    };
    Ok(HigherGaInvariants {
        n,
        eps: metric.eps,
        g: metric.g,
        coeffs,
        frenet_residual,
        lambda_formula,
    })
}

/// Residual `|F_ξ − ε|` of the normalization property: recomputing the
/// metric in arc-length parametrization yields exactly ε. Requires a jet of
/// order at least `2n + 3`.
pub fn arclength_normalization_residual(x: &VecJet, p: f64) -> Result<f64> {
    let n = x.dim();
    let k = x.order();
    if k < 2 * n + 3 {
        return Err(Error::OrderTooHigh {
            requested: 2 * n + 3,
            max: k,
        });
    }
    let metric = ga_metric(x, p)?;
    let (dn, t1, t2, t3) = ga_bracket_orders(n);
    let bj = |orders: &[usize]| -> Result<Jet> {
        let cols: Vec<VecJet> = orders.iter().map(|&o| x.d(o)).collect();
        let refs: Vec<&VecJet> = cols.iter().collect();
        bracket_jets(&refs)
    };
    let dj = bj(&dn)?;
    let f = bj(&t1)?
        .div(&dj)?
        .scale(ga_coefficients(n as u32)?.alpha as f64)
        .sub(
            &bj(&t2)?
                .div(&dj)?
                .powi(2)?
                .scale(ga_coefficients(n as u32)?.beta as f64),
        )
        .add(&bj(&t3)?.div(&dj)?.scale(ga_coefficients(n as u32)?.gamma as f64));
    let g = f.scale(metric.eps).sqrt()?;
    let xi = param_jets(x, &g, n + 2)?;
    // Assemble the ξ-jet of the curve and re-evaluate the metric.
    let comps = (0..n)
        .map(|i| {
            let mut d = Vec::with_capacity(n + 3);
            d.push(x.comp(i).val());
            for xj in &xi {
                d.push(xj.comp(i).val());
            }
            Jet::from_derivs(&d)
        })
        .collect::<Result<Vec<_>>>()?;
    let x_of_xi = VecJet::new(comps)?;
    let m2 = ga_metric(&x_of_xi, p)?;
    Ok((m2.f - metric.eps).abs())
}

/// Invariants of one of the subgroup geometries at a point.
#[derive(Debug, Clone)]
pub struct SubgroupInvariants {
    pub group: GroupTag,
    /// Arc-length density `ds/dp`.
    pub density: f64,
    /// Orientation/metric sign where the group has one (SL, GL, SA, GA);
    /// `1` otherwise.
    pub eps: f64,
    /// Group-specific curvature list (length `n − 1`).
    pub curvatures: Vec<f64>,
}

/// Minimal jet order needed by [`subgroup_curvatures`] for a curve in `R^n`.
pub fn required_jet_order(group: GroupTag, n: usize) -> usize {
    match group {
        GroupTag::SE => (n + 1).max(3),
        GroupTag::Sim => (n + 1).max(3),
        GroupTag::SL => (2 * n - 2).max(3),
        GroupTag::GL => 2 * n - 1,
        GroupTag::SA => 2 * n,
        GroupTag::GA => {
            if n == 2 {
                6
            } else {
                2 * n + 2
            }
        }
    }
}

/// Group-invariant curvatures of a curve point in `R^n`.
pub fn subgroup_curvatures(group: GroupTag, x: &VecJet, p: f64) -> Result<SubgroupInvariants> {
    let n = x.dim();
    if n < 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: n });
    }
    let need = required_jet_order(group, n);
    if x.order() < need {
        return Err(Error::OrderTooHigh {
            requested: need,
            max: x.order(),
        });
    }
    match group {
        GroupTag::SE => se_curvatures(x, p),
        GroupTag::Sim => sim_curvatures(x, p),
        GroupTag::SL => sl_curvatures(x, p),
        GroupTag::GL => gl_curvatures(x, p),
        GroupTag::SA => sa_curvatures(x, p),
        GroupTag::GA => {
            if n == 2 {
                let jets = plane_ga_jets(x, p)?;
                Ok(SubgroupInvariants {
                    group,
                    density: jets.g.val(),
                    eps: jets.eps,
                    curvatures: vec![jets.phi.val()],
                })
            } else {
                let h = higher_ga_invariants(x, p)?;
                Ok(SubgroupInvariants {
                    group,
                    density: h.g,
                    eps: h.eps,
                    curvatures: h.coeffs,
                })
            }
        }
    }
}

fn normalize_jet_vec(v: &VecJet, p: f64) -> Result<VecJet> {
    let norm2 = dot_jets(v, v);
    if norm2.val() < 1e-24 {
        return Err(Error::DegenerateFrame { p });
    }
    v.div_jet(&norm2.sqrt()?)
}

fn se_curvatures(x: &VecJet, p: f64) -> Result<SubgroupInvariants> {
    let n = x.dim();
    let speed2 = dot_jets(&x.d(1), &x.d(1));
    if speed2.val() < 1e-24 {
        return Err(Error::Degenerate {
            p,
            what: "zero speed",
        });
    }
    let v = speed2.sqrt()?;
    let u = param_jets(x, &v, n - 1)?;
    // Orthonormal frame: Gram–Schmidt on x_s, …, x_{s^{n−1}}, last vector by
    // the oriented cross product.
    let mut frame: Vec<VecJet> = Vec::with_capacity(n);
    for ui in &u {
        let mut w = ui.clone();
        for f in &frame {
            let proj = dot_jets(&w, f);
            w = w.add(&f.mul_jet(&proj).scale(-1.0));
        }
        frame.push(normalize_jet_vec(&w, p)?);
    }
    let refs: Vec<&VecJet> = frame.iter().collect();
    frame.push(normalize_jet_vec(&cross_jets(&refs)?, p)?);
    let mut curvatures = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let vi_prime = frame[i].d(1).div_jet(&v)?;
        curvatures.push(dot_jets(&vi_prime, &frame[i + 1]).val());
    }
    Ok(SubgroupInvariants {
        group: GroupTag::SE,
        density: v.val(),
        eps: 1.0,
        curvatures,
    })
}

fn sim_curvatures(x: &VecJet, p: f64) -> Result<SubgroupInvariants> {
    let n = x.dim();
    let d1 = x.d(1);
    let d2 = x.d(2);
    let sp2 = dot_jets(&d1, &d1);
    if sp2.val() < 1e-24 {
        return Err(Error::Degenerate {
            p,
            what: "zero speed",
        });
    }
    let proj = dot_jets(&d1, &d2).div(&sp2)?;
    let perp = d2.add(&d1.mul_jet(&proj).scale(-1.0));
    let perp2 = dot_jets(&perp, &perp);
    if perp2.val() < 1e-24 {
        return Err(Error::Degenerate {
            p,
            what: "similarity density vanishes on a straight segment",
        });
    }
    let v = perp2.sqrt()?.div(&sp2.sqrt()?)?;
    let u = param_jets(x, &v, n)?;
    // V₁ = x_s; V₂…V_n by unnormalized Gram–Schmidt on higher derivatives.
    let mut frame: Vec<VecJet> = vec![u[0].clone()];
    for ui in u.iter().take(n).skip(1) {
        let mut w = ui.clone();
        for f in &frame {
            let denom = dot_jets(f, f);
            let proj = dot_jets(&w, f).div(&denom)?;
            w = w.add(&f.mul_jet(&proj).scale(-1.0));
        }
        if dot_jets(&w, &w).val() < 1e-24 {
            return Err(Error::DegenerateFrame { p });
        }
        frame.push(w);
    }
    let mut curvatures = Vec::with_capacity(n - 1);
    let v1_prime = frame[0].d(1).div_jet(&v)?;
    curvatures.push(
        dot_jets(&v1_prime, &frame[0])
            .div(&dot_jets(&frame[0], &frame[0]))?
            .val()
            * -1.0,
    );
    for i in 1..n - 1 {
        let vi_prime = frame[i].d(1).div_jet(&v)?;
        curvatures.push(
            dot_jets(&vi_prime, &frame[i + 1])
                .div(&dot_jets(&frame[i + 1], &frame[i + 1]))?
                .val(),
        );
    }
    Ok(SubgroupInvariants {
        group: GroupTag::Sim,
        density: v.val(),
        eps: 1.0,
        curvatures,
    })
}

/// Basis-plus-target decomposition shared by the linear and affine groups:
/// solves `x_{s^top} = Σ cᵢ·basisᵢ`.
fn decompose(
    basis: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    p: f64,
) -> Result<Vec<f64>> {
    solve_cramer(&basis, &rhs, p)
}

fn sl_curvatures(x: &VecJet, p: f64) -> Result<SubgroupInvariants> {
    let n = x.dim();
    let mut cols: Vec<VecJet> = vec![x.clone()];
    for k in 1..n {
        cols.push(x.d(k));
    }
    let refs: Vec<&VecJet> = cols.iter().collect();
    let b = bracket_jets(&refs)?;
    let scale: f64 = (0..n).map(|k| vec_norm(&x.deriv_vec(k))).product();
    if b.val().abs() < 1e-12 * scale.max(1e-30) {
        return Err(Error::DegenerateFrame { p });
    }
    let eps = b.val().signum();
    let v = b.scale(eps).powf(2.0 / (n as f64 * (n as f64 - 1.0)))?;
    let u = param_jets(x, &v, n)?;
    let mut basis: Vec<Vec<f64>> = vec![x.val()];
    for ui in u.iter().take(n - 1) {
        basis.push(ui.val());
    }
    let coeffs = decompose(basis, u[n - 1].val(), p)?;
    Ok(SubgroupInvariants {
        group: GroupTag::SL,
        density: v.val(),
        eps,
        // μ₀, μ₁, …, μ_{n−2}; the top coefficient vanishes identically.
        curvatures: coeffs[..n - 1].to_vec(),
    })
}

fn gl_curvatures(x: &VecJet, p: f64) -> Result<SubgroupInvariants> {
    let n = x.dim();
    let mut num_cols: Vec<VecJet> = Vec::with_capacity(n);
    for k in 1..=n {
        num_cols.push(x.d(k));
    }
    let num_refs: Vec<&VecJet> = num_cols.iter().collect();
    let num = bracket_jets(&num_refs)?;
    let mut den_cols: Vec<VecJet> = vec![x.clone()];
    for k in 1..n {
        den_cols.push(x.d(k));
    }
    let den_refs: Vec<&VecJet> = den_cols.iter().collect();
    let den = bracket_jets(&den_refs)?;
    let scale: f64 = (0..n).map(|k| vec_norm(&x.deriv_vec(k))).product();
    if den.val().abs() < 1e-12 * scale.max(1e-30) {
        return Err(Error::DegenerateFrame { p });
    }
    let r = num.div(&den)?;
    if r.val().abs() < 1e-12 {
        return Err(Error::Degenerate {
            p,
            what: "linear arc-length density vanishes",
        });
    }
    let eps = r.val().signum();
    let v = r.scale(eps).powf(1.0 / n as f64)?;
    let u = param_jets(x, &v, n)?;
    let mut basis: Vec<Vec<f64>> = vec![x.val()];
    for ui in u.iter().take(n - 1) {
        basis.push(ui.val());
    }
    let coeffs = decompose(basis, u[n - 1].val(), p)?;
    Ok(SubgroupInvariants {
        group: GroupTag::GL,
        density: v.val(),
        eps,
        // μ₁, …, μ_{n−1}; the position coefficient equals (−1)^{n−1}ε.
        curvatures: coeffs[1..].to_vec(),
    })
}

/// Residual of the structural constraint tying the frame decomposition to
/// the group normalization: the coefficient that must vanish (SL, SA) or
/// equal `(−1)^{n−1}ε` (GL).
pub fn frame_relation_residual(group: GroupTag, x: &VecJet, p: f64) -> Result<f64> {
    let n = x.dim();
    match group {
        GroupTag::SL => {
            let mut cols: Vec<VecJet> = vec![x.clone()];
            for k in 1..n {
                cols.push(x.d(k));
            }
            let refs: Vec<&VecJet> = cols.iter().collect();
            let b = bracket_jets(&refs)?;
            let eps = b.val().signum();
            let vj = b.scale(eps).powf(2.0 / (n as f64 * (n as f64 - 1.0)))?;
            let u = param_jets(x, &vj, n)?;
            let mut basis: Vec<Vec<f64>> = vec![x.val()];
            for ui in u.iter().take(n - 1) {
                basis.push(ui.val());
            }
            let coeffs = decompose(basis, u[n - 1].val(), p)?;
            Ok(coeffs[n - 1].abs())
        }
        GroupTag::GL => {
            let mut num_cols: Vec<VecJet> = Vec::with_capacity(n);
            for k in 1..=n {
                num_cols.push(x.d(k));
            }
            let num_refs: Vec<&VecJet> = num_cols.iter().collect();
            let num = bracket_jets(&num_refs)?;
            let mut den_cols: Vec<VecJet> = vec![x.clone()];
            for k in 1..n {
                den_cols.push(x.d(k));
            }
            let den_refs: Vec<&VecJet> = den_cols.iter().collect();
            let den = bracket_jets(&den_refs)?;
            let r = num.div(&den)?;
            let eps = r.val().signum();
            let v = r.scale(eps).powf(1.0 / n as f64)?;
            let u = param_jets(x, &v, n)?;
            let mut basis: Vec<Vec<f64>> = vec![x.val()];
            for ui in u.iter().take(n - 1) {
                basis.push(ui.val());
            }
            let coeffs = decompose(basis, u[n - 1].val(), p)?;
            let expect = if n % 2 == 1 { eps } else { -eps };
            Ok((coeffs[0] - expect).abs())
        }
        GroupTag::SA => {
            let mut cols: Vec<VecJet> = Vec::with_capacity(n);
            for k in 1..=n {
                cols.push(x.d(k));
            }
            let refs: Vec<&VecJet> = cols.iter().collect();
            let b = bracket_jets(&refs)?;
            let eps = b.val().signum();
            let v = b
                .scale(eps)
                .powf(2.0 / (n as f64 * (n as f64 + 1.0)))?;
            let u = param_jets(x, &v, n + 1)?;
            let basis: Vec<Vec<f64>> = (0..n).map(|i| u[i].val()).collect();
            let coeffs = decompose(basis, u[n].val(), p)?;
            Ok(coeffs[n - 1].abs())
        }
        _ => Err(Error::InvalidParams {
            what: format!("no frame relation residual defined for group {group}"),
        }),
    }
}

fn sa_curvatures(x: &VecJet, p: f64) -> Result<SubgroupInvariants> {
    let n = x.dim();
    let mut cols: Vec<VecJet> = Vec::with_capacity(n);
    for k in 1..=n {
        cols.push(x.d(k));
    }
    let refs: Vec<&VecJet> = cols.iter().collect();
    let b = bracket_jets(&refs)?;
    let scale: f64 = (1..=n).map(|k| vec_norm(&x.deriv_vec(k))).product();
    if b.val().abs() < 1e-12 * scale.max(1e-30) {
        return Err(Error::FlatPoint { p });
    }
    let eps = b.val().signum();
    let v = b
        .scale(eps)
        .powf(2.0 / (n as f64 * (n as f64 + 1.0)))?;
    let u = param_jets(x, &v, n + 1)?;
    let basis: Vec<Vec<f64>> = (0..n).map(|i| u[i].val()).collect();
    let coeffs = decompose(basis, u[n].val(), p)?;
    let curvatures = if n == 2 {
        // Plane convention: μ = ε·⟦x_{σ²}, x_{σ³}⟧ (unit circle has μ = 1).
        vec![-coeffs[0]]
    } else {
        coeffs[..n - 1].to_vec()
    };
    Ok(SubgroupInvariants {
        group: GroupTag::SA,
        density: v.val(),
        eps,
        curvatures,
    })
}

/// Arc-length density `ds/dp` for any group in the hierarchy.
pub fn arclength_element(group: GroupTag, x: &VecJet, p: f64) -> Result<f64> {
    let n = x.dim();
    match group {
        GroupTag::SE => {
            let s = dot_jets(&x.d(1), &x.d(1)).val().sqrt();
            Ok(s)
        }
        GroupTag::Sim => {
            let d1 = x.d(1);
            let d2 = x.d(2);
            let sp2 = dot_jets(&d1, &d1).val();
            if sp2 < 1e-24 {
                return Err(Error::Degenerate {
                    p,
                    what: "zero speed",
                });
            }
            let pr = dot_jets(&d1, &d2).val() / sp2;
            let mut perp2 = 0.0;
            for i in 0..n {
                let w = x.comp(i).deriv(2) - pr * x.comp(i).deriv(1);
                perp2 += w * w;
            }
            Ok(perp2.sqrt() / sp2.sqrt())
        }
        GroupTag::SL => {
            let mut orders = vec![0usize];
            orders.extend(1..n);
            let b = bracket_derivs_with_position(x, &orders)?;
            Ok(b.abs().powf(2.0 / (n as f64 * (n as f64 - 1.0))))
        }
        GroupTag::GL => {
            let num = bracket_derivs(x, &(1..=n).collect::<Vec<_>>())?;
            let mut orders = vec![0usize];
            orders.extend(1..n);
            let den = bracket_derivs_with_position(x, &orders)?;
            if den.abs() < 1e-30 {
                return Err(Error::DegenerateFrame { p });
            }
            Ok((num / den).abs().powf(1.0 / n as f64))
        }
        GroupTag::SA => {
            let b = bracket_derivs(x, &(1..=n).collect::<Vec<_>>())?;
            Ok(b.abs().powf(2.0 / (n as f64 * (n as f64 + 1.0))))
        }
        GroupTag::GA => Ok(ga_metric(x, p)?.g),
    }
}

/// Bracket of derivative columns where order 0 denotes the position vector.
fn bracket_derivs_with_position(x: &VecJet, orders: &[usize]) -> Result<f64> {
    let cols: Vec<Vec<f64>> = orders.iter().map(|&k| x.deriv_vec(k)).collect();
    let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
    bracket(&refs)
}

/// Jet order needed for [`arclength_element`].
pub fn density_required_order(group: GroupTag, n: usize) -> usize {
    match group {
        GroupTag::SE => 1,
        GroupTag::Sim => 2,
        GroupTag::SL => n - 1,
        GroupTag::GL | GroupTag::SA => n,
        GroupTag::GA => n + 2,
    }
}

/// Invariant length of the parameter segment `[p0, p1]` by composite
/// quadrature with at least 512 nodes (trapezoid over a full closed period,
/// composite Simpson otherwise).
pub fn invariant_length(
    group: GroupTag,
    curve: &AnalyticCurve,
    p0: f64,
    p1: f64,
    min_nodes: usize,
) -> Result<f64> {
    if !(p1 > p0) {
        return Err(Error::InvalidParams {
            what: format!("empty parameter segment [{p0}, {p1}]"),
        });
    }
    let n = min_nodes.max(512);
    let order = density_required_order(group, curve.dim());
    let span = p1 - p0;
    let full_period = curve
        .period()
        .map(|t| (span - t).abs() < 1e-12 * t)
        .unwrap_or(false);
    if full_period {
        let mut acc = 0.0;
        for j in 0..n {
            let p = p0 + span * j as f64 / n as f64;
            acc += arclength_element(group, &curve.jet(p, order)?, p)?;
        }
        Ok(acc * span / n as f64)
    } else {
        // Composite Simpson on an even subdivision.
        let m = if n % 2 == 0 { n } else { n + 1 };
        let h = span / m as f64;
        let mut acc = 0.0;
        for j in 0..=m {
            let p = p0 + h * j as f64;
            let w = if j == 0 || j == m {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * arclength_element(group, &curve.jet(p, order)?, p)?;
        }
        Ok(acc * h / 3.0)
    }
}

/// Residual of the reparametrization identity `g̃(q) = g(h(q))·h'(q)` for
/// the fully affine density, relative to the density magnitude.
pub fn repar_identity_residual(
    curve: &AnalyticCurve,
    h: &ReparamEval,
    new_domain: (f64, f64),
    q: f64,
) -> Result<f64> {
    let n = curve.dim();
    let order = n + 2;
    let repar = curve.reparametrized(h.clone(), new_domain);
    let g_new = ga_metric(&repar.jet(q, order)?, q)?.g;
    let hj = h(q, 1);
    let p = hj.val();
    let hp = hj.deriv(1);
    if hp <= 0.0 {
        return Err(Error::NonMonotoneMap { p: q });
    }
    let g_old = ga_metric(&curve.jet(p, order)?, p)?.g;
    Ok(((g_new - g_old * hp) / g_new.abs().max(1e-30)).abs())
}

/// Euclidean curvature of a plane curve point as a jet in Euclidean arc
/// length `s`.
pub fn plane_euclidean_curvature_jet(x: &VecJet) -> Result<Jet> {
    if x.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: x.dim(),
        });
    }
    let d1 = x.d(1);
    let d2 = x.d(2);
    let num = bracket_jets(&[&d1, &d2])?;
    let speed = dot_jets(&d1, &d1).sqrt()?;
    let kappa_p = num.div(&speed.powi(3)?)?;
    reparam_jet(&kappa_p, &speed)
}

/// Equi-affine data of a plane curve point: the density `ḡ = dσ/dp` as a
/// jet in `p` and the equi-affine curvature `μ = ⟦x_{σ²}, x_{σ³}⟧` as a jet
/// in σ. Requires positive orientation (`⟦x_p, x_{p²}⟧ > 0`).
#[derive(Debug, Clone)]
pub struct EquiAffineData {
    /// `dσ/dp` as a jet in `p`.
    pub gbar: Jet,
    /// μ as a jet in σ.
    pub mu: Jet,
}

pub fn plane_equiaffine_data(x: &VecJet, p: f64) -> Result<EquiAffineData> {
    if x.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: x.dim(),
        });
    }
    let d1 = x.d(1);
    let d2 = x.d(2);
    let b = bracket_jets(&[&d1, &d2])?;
    let scale = vec_norm(&x.deriv_vec(1)) * vec_norm(&x.deriv_vec(2));
    if b.val().abs() < 1e-12 * scale.max(1e-30) {
        return Err(Error::FlatPoint { p });
    }
    if b.val() < 0.0 {
        return Err(Error::Degenerate {
            p,
            what: "negatively oriented point for the equi-affine frame",
        });
    }
    let gbar = b.powf(1.0 / 3.0)?;
    let xs = param_jets(x, &gbar, 3)?;
    let mu_p = bracket_jets(&[&xs[1], &xs[2]])?;
    let mu = reparam_jet(&mu_p, &gbar)?;
    Ok(EquiAffineData { gbar, mu })
}

/// Equi-affine curvature μ (as a jet in σ) from the Euclidean curvature
/// jet (in s): `μ = κ^{4/3} − (5/9)κ^{−8/3}κ_s² + (1/3)κ^{−5/3}κ_ss`,
/// converted through `dσ/ds = κ^{1/3}`. Requires κ > 0.
pub fn euclid_to_equiaffine(kappa: &Jet) -> Result<Jet> {
    if kappa.val() <= 0.0 {
        return Err(Error::NotConvex { node: 0 });
    }
    let k1 = kappa.d(1);
    let k2 = kappa.d(2);
    let mu_s = kappa
        .powf(4.0 / 3.0)?
        .sub(&kappa.powf(-8.0 / 3.0)?.mul(&k1.mul(&k1)).scale(5.0 / 9.0))
        .add(&kappa.powf(-5.0 / 3.0)?.mul(&k2).scale(1.0 / 3.0));
    let rate = kappa.powf(1.0 / 3.0)?;
    reparam_jet(&mu_s, &rate)
}

/// Fully affine invariants derived from the equi-affine curvature jet
/// μ(σ): metric sign, the density `dξ/dσ`, and the curvature φ as a jet
/// in ξ.
#[derive(Debug, Clone)]
pub struct EquiToFull {
    pub eps: f64,
    /// `dξ/dσ = 3√(εμ)` as a jet in σ.
    pub dxi_dsigma: Jet,
    /// φ as a jet in ξ.
    pub phi: Jet,
}

pub fn equiaffine_to_fullyaffine(mu: &Jet) -> Result<EquiToFull> {
    if mu.val().abs() < 1e-12 {
        return Err(Error::InflectionPoint { p: f64::NAN });
    }
    let eps = mu.val().signum();
    let emu = mu.scale(eps);
    let dxi_dsigma = emu.sqrt()?.scale(3.0);
    // φ = (ε/2)(εμ)^{−3/2} μ_σ.
    let phi_sigma = emu.powf(-1.5)?.mul(&mu.d(1)).scale(0.5 * eps);
    let phi = reparam_jet(&phi_sigma, &dxi_dsigma)?;
    Ok(EquiToFull {
        eps,
        dxi_dsigma,
        phi,
    })
}

/// Plane fully affine invariants computed through the chain of geometries
/// (Euclidean curvature, then equi-affine curvature, then fully affine
/// invariants), for cross-validation against the direct formulas.
pub fn plane_invariants_via_chain(curve: &AnalyticCurve, p: f64) -> Result<PlaneInvariants> {
    let x = curve.jet(p, 10)?;
    let kappa = plane_euclidean_curvature_jet(&x)?;
    if kappa.val() <= 0.0 {
        return Err(Error::NotConvex { node: 0 });
    }
    let mu = euclid_to_equiaffine(&kappa)?;
    let full = equiaffine_to_fullyaffine(&mu)?;
    let speed = dot_jets(&x.d(1), &x.d(1)).sqrt()?.val();
    let dsigma_ds = kappa.val().powf(1.0 / 3.0);
    let g = full.dxi_dsigma.val() * dsigma_ds * speed;
    let phi = full.phi.val();
    let phi_xi = full.phi.deriv(1);
    let lambda = (2.0 * phi * phi + 3.0 * phi_xi + full.eps) / 9.0;
    Ok(PlaneInvariants {
        g,
        phi,
        lambda,
        eps: full.eps,
        f: full.eps * g * g,
    })
}

/// Reconstruct a plane curve from its fully affine curvature: integrates
/// `C_{ξ³} = −λ C_ξ − φ C_{ξ²}` with `λ = (2φ² + 3φ_ξ + ε)/9` by classical
/// RK4 from the initial 2-jet, returning samples `(ξ, C(ξ))`.
pub fn reconstruct_plane_curve(
    phi: &dyn Fn(f64) -> (f64, f64),
    eps: f64,
    init: (&[f64; 2], &[f64; 2], &[f64; 2]),
    xi_end: f64,
    steps: usize,
) -> Result<Vec<(f64, [f64; 2])>> {
    if steps == 0 || xi_end == 0.0 {
        return Err(Error::InvalidParams {
            what: "reconstruction needs a nonempty ξ span and steps > 0".into(),
        });
    }
    let b0 = init.1[0] * init.2[1] - init.1[1] * init.2[0];
    if b0.abs() < 1e-14 {
        return Err(Error::Degenerate {
            p: 0.0,
            what: "initial frame bracket vanishes",
        });
    }
    let mut y = [
        init.0[0], init.0[1], init.1[0], init.1[1], init.2[0], init.2[1],
    ];
    let rhs = |xi: f64, y: &[f64; 6]| -> [f64; 6] {
        let (ph, ph_xi) = phi(xi);
        let lam = (2.0 * ph * ph + 3.0 * ph_xi + eps) / 9.0;
        [
            y[2],
            y[3],
            y[4],
            y[5],
            -lam * y[2] - ph * y[4],
            -lam * y[3] - ph * y[5],
        ]
    };
    let h = xi_end / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    out.push((0.0, [y[0], y[1]]));
    let mut xi = 0.0;
    for _ in 0..steps {
        let k1 = rhs(xi, &y);
        let mut y2 = y;
        for i in 0..6 {
            y2[i] = y[i] + 0.5 * h * k1[i];
        }
        let k2 = rhs(xi + 0.5 * h, &y2);
        let mut y3 = y;
        for i in 0..6 {
            y3[i] = y[i] + 0.5 * h * k2[i];
        }
        let k3 = rhs(xi + 0.5 * h, &y3);
        let mut y4 = y;
        for i in 0..6 {
            y4[i] = y[i] + h * k3[i];
        }
        let k4 = rhs(xi + h, &y4);
        for i in 0..6 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        xi += h;
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteField { t: xi });
        }
        out.push((xi, [y[0], y[1]]));
    }
    Ok(out)
}
