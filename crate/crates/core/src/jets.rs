//! Truncated jet arithmetic, bracket determinants, and the integer
//! coefficient machinery of the fully affine arc-length element.
//!
//! A [`Jet`] stores raw derivative values `(f, f', …, f^(K))` of a scalar
//! function at one point; operations propagate derivatives exactly (Leibniz,
//! quotient recurrences, Taylor composition). [`VecJet`] stacks one jet per
//! coordinate of a curve point. [`bracket`] is the determinant of `n` column
//! vectors in `R^n`.

use crate::error::{Error, Result};

/// Maximum supported derivative order.
pub const MAX_ORDER: usize = 10;

/// Hard floor for jet-division denominators.
pub const DIV_FLOOR: f64 = 1e-300;

/// Binomial coefficients C(n, k) for n, k ≤ MAX_ORDER.
const BINOM: [[u64; MAX_ORDER + 1]; MAX_ORDER + 1] = build_binom();

const fn build_binom() -> [[u64; MAX_ORDER + 1]; MAX_ORDER + 1] {
    let mut b = [[0u64; MAX_ORDER + 1]; MAX_ORDER + 1];
    let mut n = 0;
    while n <= MAX_ORDER {
        b[n][0] = 1;
        let mut k = 1;
        while k <= n {
            b[n][k] = b[n - 1][k - 1] + if k <= n - 1 { b[n - 1][k] } else { 0 };
            k += 1;
        }
        n += 1;
    }
    b
}

#[inline]
fn binom(n: usize, k: usize) -> f64 {
    BINOM[n][k] as f64
}

/// Factorials 0! … MAX_ORDER!.
const FACT: [f64; MAX_ORDER + 1] = {
    let mut f = [1.0; MAX_ORDER + 1];
    let mut k = 1;
    while k <= MAX_ORDER {
        f[k] = f[k - 1] * k as f64;
        k += 1;
    }
    f
};

/// Truncated jet of a scalar function at a point: raw derivatives
/// `c[k] = d^k f / dp^k`, `k = 0..=order`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    order: usize,
    c: [f64; MAX_ORDER + 1],
}

impl Jet {
    /// Constant function jet.
    pub fn constant(v: f64, order: usize) -> Self {
        assert!(order <= MAX_ORDER);
        let mut c = [0.0; MAX_ORDER + 1];
        c[0] = v;
        Jet { order, c }
    }

    /// Identity-coordinate jet: value `v`, first derivative 1.
    pub fn variable(v: f64, order: usize) -> Self {
        assert!(order <= MAX_ORDER);
        let mut c = [0.0; MAX_ORDER + 1];
        c[0] = v;
        if order >= 1 {
            c[1] = 1.0;
        }
        Jet { order, c }
    }

    /// Jet from explicit raw derivatives `(f, f', …)`.
    pub fn from_derivs(d: &[f64]) -> Result<Self> {
        if d.is_empty() || d.len() > MAX_ORDER + 1 {
            return Err(Error::OrderTooHigh {
                requested: d.len().saturating_sub(1),
                max: MAX_ORDER,
            });
        }
        let mut c = [0.0; MAX_ORDER + 1];
        c[..d.len()].copy_from_slice(d);
        Ok(Jet {
            order: d.len() - 1,
            c,
        })
    }

    /// Truncation order.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Function value.
    pub fn val(&self) -> f64 {
        self.c[0]
    }

    /// `k`-th raw derivative value; `k ≤ order` required.
    pub fn deriv(&self, k: usize) -> f64 {
        assert!(k <= self.order, "derivative order {k} > jet order {}", self.order);
        self.c[k]
    }

    /// Raw derivatives as a slice of length `order + 1`.
    pub fn coeffs(&self) -> &[f64] {
        &self.c[..=self.order]
    }

    /// Jet of the `k`-th derivative function (coefficients shifted left).
    pub fn d(&self, k: usize) -> Jet {
        assert!(k <= self.order, "cannot differentiate jet of order {} {k} times", self.order);
        let order = self.order - k;
        let mut c = [0.0; MAX_ORDER + 1];
        for i in 0..=order {
            c[i] = self.c[i + k];
        }
        Jet { order, c }
    }

    /// Copy truncated to `order` (must not exceed the current order).
    pub fn truncate(&self, order: usize) -> Jet {
        assert!(order <= self.order);
        let mut c = [0.0; MAX_ORDER + 1];
        c[..=order].copy_from_slice(&self.c[..=order]);
        Jet { order, c }
    }

    /// True when every stored derivative is finite.
    pub fn is_finite(&self) -> bool {
        self.coeffs().iter().all(|v| v.is_finite())
    }

    pub fn add(&self, o: &Jet) -> Jet {
        let order = self.order.min(o.order);
        let mut c = [0.0; MAX_ORDER + 1];
        for k in 0..=order {
            c[k] = self.c[k] + o.c[k];
        }
        Jet { order, c }
    }

    pub fn sub(&self, o: &Jet) -> Jet {
        let order = self.order.min(o.order);
        let mut c = [0.0; MAX_ORDER + 1];
        for k in 0..=order {
            c[k] = self.c[k] - o.c[k];
        }
        Jet { order, c }
    }

    pub fn neg(&self) -> Jet {
        self.scale(-1.0)
    }

    pub fn scale(&self, s: f64) -> Jet {
        let mut c = [0.0; MAX_ORDER + 1];
        for k in 0..=self.order {
            c[k] = s * self.c[k];
        }
        Jet {
            order: self.order,
            c,
        }
    }

    /// Shift the value by a constant (derivatives unchanged).
    pub fn add_const(&self, s: f64) -> Jet {
        let mut out = *self;
        out.c[0] += s;
        out
    }

    /// Leibniz product.
    pub fn mul(&self, o: &Jet) -> Jet {
        let order = self.order.min(o.order);
        let mut c = [0.0; MAX_ORDER + 1];
        for k in 0..=order {
            let mut acc = 0.0;
            for i in 0..=k {
                acc += binom(k, i) * self.c[i] * o.c[k - i];
            }
            c[k] = acc;
        }
        Jet { order, c }
    }

    /// Quotient by the Leibniz recurrence; the denominator value must be
    /// above [`DIV_FLOOR`] in magnitude.
    pub fn div(&self, o: &Jet) -> Result<Jet> {
        if o.c[0].abs() < DIV_FLOOR {
            return Err(Error::DivisionByZeroJet { mag: o.c[0].abs() });
        }
        let order = self.order.min(o.order);
        let mut c = [0.0; MAX_ORDER + 1];
        for k in 0..=order {
            let mut acc = self.c[k];
            for i in 0..k {
                acc -= binom(k, i) * c[i] * o.c[k - i];
            }
            c[k] = acc / o.c[0];
        }
        Ok(Jet { order, c })
    }

    /// Reciprocal jet.
    pub fn recip(&self) -> Result<Jet> {
        Jet::constant(1.0, self.order).div(self)
    }

    /// Real power `f^a`; requires a strictly positive value.
    pub fn powf(&self, a: f64) -> Result<Jet> {
        if self.c[0] <= DIV_FLOOR {
            return Err(Error::DivisionByZeroJet {
                mag: self.c[0].abs(),
            });
        }
        let order = self.order;
        let mut h = [0.0; MAX_ORDER + 1];
        h[0] = self.c[0].powf(a);
        // From f·h' = a·f'·h, differentiated k−1 times.
        for k in 1..=order {
            let mut acc = 0.0;
            for i in 0..k {
                acc += a * binom(k - 1, i) * self.c[i + 1] * h[k - 1 - i];
            }
            for i in 1..k {
                acc -= binom(k - 1, i) * self.c[i] * h[k - i];
            }
            h[k] = acc / self.c[0];
        }
        Ok(Jet { order, c: h })
    }

    /// Integer power by squaring (value may be any sign; negative exponents
    /// require a nonzero value).
    pub fn powi(&self, mut e: i32) -> Result<Jet> {
        let mut base = if e < 0 {
            e = -e;
            self.recip()?
        } else {
            *self
        };
        let mut acc = Jet::constant(1.0, self.order);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        Ok(acc)
    }

    /// Square root; requires a strictly positive value.
    pub fn sqrt(&self) -> Result<Jet> {
        self.powf(0.5)
    }

    /// Exponential.
    pub fn exp(&self) -> Jet {
        let order = self.order;
        let mut h = [0.0; MAX_ORDER + 1];
        h[0] = self.c[0].exp();
        // h' = f'·h.
        for k in 1..=order {
            let mut acc = 0.0;
            for i in 0..k {
                acc += binom(k - 1, i) * self.c[i + 1] * h[k - 1 - i];
            }
            h[k] = acc;
        }
        Jet { order, c: h }
    }

    /// Natural logarithm; requires a strictly positive value.
    pub fn ln(&self) -> Result<Jet> {
        if self.c[0] <= DIV_FLOOR {
            return Err(Error::DivisionByZeroJet {
                mag: self.c[0].abs(),
            });
        }
        let order = self.order;
        let mut c = [0.0; MAX_ORDER + 1];
        c[0] = self.c[0].ln();
        if order >= 1 {
            // (ln f)' = f'/f, then shift the quotient jet back up.
            let q = self.d(1).div(&self.truncate(order - 1))?;
            for k in 1..=order {
                c[k] = q.c[k - 1];
            }
        }
        Ok(Jet { order, c })
    }

    fn sin_cos(&self) -> (Jet, Jet) {
        let order = self.order;
        let mut s = [0.0; MAX_ORDER + 1];
        let mut co = [0.0; MAX_ORDER + 1];
        s[0] = self.c[0].sin();
        co[0] = self.c[0].cos();
        // s' = cos(f)·f', c' = −sin(f)·f'.
        for k in 1..=order {
            let mut sa = 0.0;
            let mut ca = 0.0;
            for i in 0..k {
                sa += binom(k - 1, i) * co[i] * self.c[k - i];
                ca -= binom(k - 1, i) * s[i] * self.c[k - i];
            }
            s[k] = sa;
            co[k] = ca;
        }
        (Jet { order, c: s }, Jet { order, c: co })
    }

    pub fn sin(&self) -> Jet {
        self.sin_cos().0
    }

    pub fn cos(&self) -> Jet {
        self.sin_cos().1
    }

    pub fn tan(&self) -> Result<Jet> {
        let (s, c) = self.sin_cos();
        s.div(&c)
    }

    fn sinh_cosh(&self) -> (Jet, Jet) {
        let order = self.order;
        let mut s = [0.0; MAX_ORDER + 1];
        let mut co = [0.0; MAX_ORDER + 1];
        s[0] = self.c[0].sinh();
        co[0] = self.c[0].cosh();
        for k in 1..=order {
            let mut sa = 0.0;
            let mut ca = 0.0;
            for i in 0..k {
                sa += binom(k - 1, i) * co[i] * self.c[k - i];
                ca += binom(k - 1, i) * s[i] * self.c[k - i];
            }
            s[k] = sa;
            co[k] = ca;
        }
        (Jet { order, c: s }, Jet { order, c: co })
    }

    pub fn sinh(&self) -> Jet {
        self.sinh_cosh().0
    }

    pub fn cosh(&self) -> Jet {
        self.sinh_cosh().1
    }

    pub fn tanh(&self) -> Result<Jet> {
        let (s, c) = self.sinh_cosh();
        s.div(&c)
    }

    /// Composition `self ∘ inner`: `self` holds derivatives with respect to
    /// an intermediate variable `u` at `u0 = inner.val()`, `inner` holds
    /// derivatives of `u(p)`. Faà di Bruno via truncated Taylor series.
    pub fn compose(&self, inner: &Jet) -> Jet {
        let order = self.order.min(inner.order);
        // Taylor coefficients of the outer series in (u − u0) and of the
        // inner series with the constant term dropped.
        let mut f = [0.0; MAX_ORDER + 1];
        let mut g = [0.0; MAX_ORDER + 1];
        for k in 0..=order {
            f[k] = self.c[k] / FACT[k];
            g[k] = inner.c[k] / FACT[k];
        }
        g[0] = 0.0;
        // Horner evaluation of Σ f_k·g(t)^k as truncated series.
        let mut h = [0.0; MAX_ORDER + 1];
        h[0] = f[order];
        for k in (0..order).rev() {
            // h = h·g + f_k
            let mut nh = [0.0; MAX_ORDER + 1];
            for i in 0..=order {
                if h[i] == 0.0 {
                    continue;
                }
                for j in 0..=(order - i) {
                    nh[i + j] += h[i] * g[j];
                }
            }
            nh[0] += f[k];
            h = nh;
        }
        let mut c = [0.0; MAX_ORDER + 1];
        for k in 0..=order {
            c[k] = h[k] * FACT[k];
        }
        Jet { order, c }
    }
}

/// Jet of a curve point in `R^n`: one scalar jet per coordinate, all of the
/// same order.
#[derive(Debug, Clone, PartialEq)]
pub struct VecJet {
    comps: Vec<Jet>,
}

impl VecJet {
    pub fn new(comps: Vec<Jet>) -> Result<Self> {
        if comps.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        let order = comps[0].order();
        if comps.iter().any(|j| j.order() != order) {
            return Err(Error::DimensionMismatch {
                expected: order,
                got: comps.iter().map(|j| j.order()).min().unwrap(),
            });
        }
        Ok(VecJet { comps })
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn order(&self) -> usize {
        self.comps[0].order()
    }

    pub fn comp(&self, i: usize) -> &Jet {
        &self.comps[i]
    }

    pub fn comps(&self) -> &[Jet] {
        &self.comps
    }

    /// Point value.
    pub fn val(&self) -> Vec<f64> {
        self.comps.iter().map(|j| j.val()).collect()
    }

    /// `k`-th derivative vector.
    pub fn deriv_vec(&self, k: usize) -> Vec<f64> {
        self.comps.iter().map(|j| j.deriv(k)).collect()
    }

    /// Componentwise derivative jet.
    pub fn d(&self, k: usize) -> VecJet {
        VecJet {
            comps: self.comps.iter().map(|j| j.d(k)).collect(),
        }
    }

    pub fn truncate(&self, order: usize) -> VecJet {
        VecJet {
            comps: self.comps.iter().map(|j| j.truncate(order)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(Jet::is_finite)
    }

    pub fn add(&self, o: &VecJet) -> VecJet {
        VecJet {
            comps: self
                .comps
                .iter()
                .zip(&o.comps)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> VecJet {
        VecJet {
            comps: self.comps.iter().map(|j| j.scale(s)).collect(),
        }
    }

    /// Scalar-jet multiple.
    pub fn mul_jet(&self, s: &Jet) -> VecJet {
        VecJet {
            comps: self.comps.iter().map(|j| j.mul(s)).collect(),
        }
    }

    /// Componentwise quotient by a scalar jet.
    pub fn div_jet(&self, s: &Jet) -> Result<VecJet> {
        let comps = self
            .comps
            .iter()
            .map(|j| j.div(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(VecJet { comps })
    }

    /// Linear image `A·x` applied to every derivative level.
    pub fn linear_map(&self, a: &[Vec<f64>]) -> Result<VecJet> {
        let n = self.dim();
        if a.len() != n || a.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.len(),
            });
        }
        let order = self.order();
        let mut comps = Vec::with_capacity(n);
        for row in a {
            let mut acc = Jet::constant(0.0, order);
            for (j, w) in row.iter().enumerate() {
                acc = acc.add(&self.comps[j].scale(*w));
            }
            comps.push(acc);
        }
        Ok(VecJet { comps })
    }

    /// Composition with a scalar inner jet, componentwise.
    pub fn compose(&self, inner: &Jet) -> VecJet {
        VecJet {
            comps: self.comps.iter().map(|j| j.compose(inner)).collect(),
        }
    }
}

/// Determinant of `n` column vectors in `R^n` (LU with partial pivoting).
pub fn bracket(cols: &[&[f64]]) -> Result<f64> {
    let n = cols.len();
    if n == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    }
    for c in cols {
        if c.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: c.len(),
            });
        }
    }
    match n {
        1 => return Ok(cols[0][0]),
        2 => return Ok(cols[0][0] * cols[1][1] - cols[0][1] * cols[1][0]),
        3 => {
            let (a, b, c) = (cols[0], cols[1], cols[2]);
            return Ok(a[0] * (b[1] * c[2] - b[2] * c[1]) - b[0] * (a[1] * c[2] - a[2] * c[1])
                + c[0] * (a[1] * b[2] - a[2] * b[1]));
        }
        _ => {}
    }
    // m[i][j] = i-th component of column j.
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
    let mut det = 1.0;
    for k in 0..n {
        let (piv, mag) = (k..n)
            .map(|i| (i, m[i][k].abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if mag == 0.0 {
            return Ok(0.0);
        }
        if piv != k {
            m.swap(piv, k);
            det = -det;
        }
        det *= m[k][k];
        for i in (k + 1)..n {
            let f = m[i][k] / m[k][k];
            for j in k..n {
                m[i][j] -= f * m[k][j];
            }
        }
    }
    Ok(det)
}

/// Determinant whose columns are derivative vectors of `x`:
/// `⟦x_{p^orders[0]}, …, x_{p^orders[n−1]}⟧`.
pub fn bracket_derivs(x: &VecJet, orders: &[usize]) -> Result<f64> {
    let cols: Vec<Vec<f64>> = orders.iter().map(|&k| x.deriv_vec(k)).collect();
    let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
    bracket(&refs)
}

/// Jet-valued determinant of jet columns (cofactor expansion; intended for
/// n ≤ 4 where downstream chains need bracket derivatives).
pub fn bracket_jets(cols: &[&VecJet]) -> Result<Jet> {
    let n = cols.len();
    if n == 0 || cols.iter().any(|c| c.dim() != n) {
        return Err(Error::DimensionMismatch {
            expected: n.max(1),
            got: cols.first().map_or(0, |c| c.dim()),
        });
    }
    let order = cols.iter().map(|c| c.order()).min().unwrap();
    let m: Vec<Vec<Jet>> = (0..n)
        .map(|i| cols.iter().map(|c| c.comp(i).truncate(order)).collect())
        .collect();
    Ok(det_jets(&m, order))
}

fn det_jets(m: &[Vec<Jet>], order: usize) -> Jet {
    let n = m.len();
    if n == 1 {
        return m[0][0];
    }
    if n == 2 {
        return m[0][0].mul(&m[1][1]).sub(&m[0][1].mul(&m[1][0]));
    }
    let mut acc = Jet::constant(0.0, order);
    for j in 0..n {
        // Minor deleting row 0, column j.
        let minor: Vec<Vec<Jet>> = (1..n)
            .map(|i| {
                (0..n)
                    .filter(|&jj| jj != j)
                    .map(|jj| m[i][jj])
                    .collect()
            })
            .collect();
        let term = m[0][j].mul(&det_jets(&minor, order));
        acc = if j % 2 == 0 {
            acc.add(&term)
        } else {
            acc.sub(&term)
        };
    }
    acc
}

/// Integer coefficients `(A_k, B_k)` of the bracket-iteration counting
/// argument: `A_k = k(k−1)(k−2)(k−3)/8`, `B_k = k(k−1)(k−2)/6`.
pub fn iteration_coeffs(k: u32) -> Result<(i64, i64)> {
    if k < 4 {
        return Err(Error::InvalidParams {
            what: format!("iteration coefficients need k >= 4, got {k}"),
        });
    }
    let k = k as i64;
    Ok((
        k * (k - 1) * (k - 2) * (k - 3) / 8,
        k * (k - 1) * (k - 2) / 6,
    ))
}

/// The coprime integer triple of the fully affine arc-length element in
/// `R^n`, together with the common divisor ω that reduces it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GACoeffs {
    pub n: u32,
    pub alpha: i64,
    pub beta: i64,
    pub gamma: i64,
    pub omega: i64,
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Coefficient triple `(α, β, γ)` for dimension `n ≥ 2`:
/// `α = n(n+1)(n−1)/ω`, `β = (n−1)(n+2)(2n+1)/(2ω)`, `γ = n(n+1)(n+2)/ω`
/// with ω the gcd of the three (β taken with its factor 1/2 absorbed).
pub fn ga_coefficients(n: u32) -> Result<GACoeffs> {
    if n < 2 {
        return Err(Error::InvalidParams {
            what: format!("fully affine coefficients need n >= 2, got {n}"),
        });
    }
    let m = n as i64;
    let a0 = m * (m + 1) * (m - 1);
    let b2 = (m - 1) * (m + 2) * (2 * m + 1);
    debug_assert_eq!(b2 % 2, 0);
    let b0 = b2 / 2;
    let c0 = m * (m + 1) * (m + 2);
    let omega = gcd(gcd(a0, b0), c0);
    Ok(GACoeffs {
        n,
        alpha: a0 / omega,
        beta: b0 / omega,
        gamma: c0 / omega,
        omega,
    })
}

impl GACoeffs {
    /// Exact residuals of the three linear identities that characterize
    /// `(α, β, γ)`; all zero for a correct triple.
    pub fn identity_residuals(&self) -> (i128, i128, i128) {
        let n = self.n as i128;
        let (al, be, ga) = (self.alpha as i128, self.beta as i128, self.gamma as i128);
        let c2 = |k: i128| k * (k - 1) / 2;
        let a_of = |k: i128| k * (k - 1) * (k - 2) * (k - 3) / 8;
        let b_of = |k: i128| k * (k - 1) * (k - 2) / 6;
        let r1 = al * c2(n + 2) - 2 * be * c2(n + 1) + ga * c2(n);
        let r2 = al * b_of(n + 2) - ga * b_of(n + 1);
        let r3 = al * a_of(n + 2) - be * c2(n + 1) * c2(n + 1)
            + ga * (c2(n + 1) * c2(n) - a_of(n + 1));
        (r1, r2, r3)
    }
}
