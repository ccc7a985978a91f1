//! Invariant curve motions and the affine heat flows.
//!
//! Three interchangeable evolution backends, all explicit classic
//! Runge–Kutta with step-doubling error control and a hard stability
//! ceiling on the step size:
//!
//! * **curvature backend**: evolves the periodic pair `(g, φ)` on a fixed
//!   material grid under a general fully affine motion
//!   `C_t = W C_ξ + U C_{ξ²}`; the heat flow is `U = 1`, `W = 0`,
//! * **curve backend**: moves the sampled points of a convex closed curve
//!   along the Euclidean normal with the heat-flow speed
//!   `1/(9κ − 5κ_s²κ^{−3} + 3κ_ss κ^{−2})`,
//! * **equi-affine backend**: evolves `(ḡ, μ)` under
//!   `C_t = α C_σ + β C_{σ²}`; the choice `β = 1/(9μ)`, `α = β_σ/2`
//!   reproduces the fully affine heat flow in equi-affine variables.
//!
//! Soliton support: classification of curvature profiles against the
//! self-similar families (solutions of `2φ² − 6φ_ξ + 9a + ε = 0` with
//! `φ_{ξ²} = (2/3)φφ_ξ`) and the five closed-form soliton curves with
//! their exact velocities.

use crate::curves::{plane_curve, AnalyticCurve, SampledClosedCurve};
use crate::error::{Error, Result};
use crate::invariants::{plane_equiaffine_data, plane_ga_jets};
use crate::jets::Jet;
use crate::spectral;
use std::f64::consts::{PI, TAU};

/// Acceptance tolerance for the soliton ODE and stationarity residuals.
pub const SOLITON_TOL: f64 = 1e-6;

/// Stability-ceiling constant for second-order (equi-affine heat) steps;
/// the classic Runge–Kutta real-axis limit `dt·|λ| ≤ 2.79` with
/// `λ = coeff·k²` allows ≈ 0.28·Δσ²/coeff at the grid cutoff `k = π/Δσ`.
const C_STAB2: f64 = 0.1;

/// Margin below which the equi-affine curvature counts as vanished.
const MU_FLOOR: f64 = 1e-10;

/// Spectral truncation policy for the flow right-hand sides.
///
/// Products of fields alias energy onto wavenumbers the grid cannot
/// carry; the cap zeroes every mode above it in each differentiation
/// level and in the accepted state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeCap {
    /// Keep `max(8, N/8)` modes: comfortable de-aliasing headroom.
    Auto,
    /// No truncation (for spectral-accuracy studies on clean data).
    Off,
    /// Keep exactly this many modes.
    Fixed(usize),
}

impl ModeCap {
    /// Concrete cap for a grid of `n` nodes (`None` = no truncation).
    pub fn resolve(&self, n: usize) -> Option<usize> {
        match *self {
            ModeCap::Auto => Some((n / 8).max(8)),
            ModeCap::Off => None,
            ModeCap::Fixed(c) => Some(c),
        }
    }
}

/// Tuning knobs shared by every stepper in this module.
#[derive(Debug, Clone)]
pub struct FlowOptions {
    /// Relative tolerance of the step-doubling error control.
    pub rtol: f64,
    /// Stability-ceiling constant: `dt ≤ c_stab·Δ⁴/coeff` for the
    /// fourth-order flows (the classic Runge–Kutta real-axis limit
    /// corresponds to ≈ 0.0286 at the grid cutoff).
    pub c_stab: f64,
    /// Spectral truncation policy.
    pub mode_cap: ModeCap,
    /// Bypass adaptivity and take exactly this step (still clamped to the
    /// remaining horizon) — for convergence-order studies.
    pub fixed_dt: Option<f64>,
    /// Hard floor under which a step attempt aborts with `StepUnderflow`.
    pub dt_min: f64,
    /// Energy bound above which a run aborts with `BlowUp`.
    pub e_blowup: f64,
    /// Record every `monitor_stride`-th step (the final step is always
    /// recorded).
    pub monitor_stride: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            rtol: 1e-7,
            c_stab: 0.025,
            mode_cap: ModeCap::Auto,
            fixed_dt: None,
            dt_min: 1e-12,
            e_blowup: 1e6,
            monitor_stride: 1,
        }
    }
}

/// Fully affine state of a closed curve: metric density and curvature on a
/// fixed uniform material grid `p_j = j·period/N`.
///
/// In the closed heat-flow regime (`ε = +1`) the states additionally
/// satisfy `∮φ dξ = 0` to 1e−6; this is checked when a flow run starts,
/// and monitored (not re-imposed) along the run.
#[derive(Debug, Clone)]
pub struct CurvatureState {
    /// Metric density `g = dξ/dp > 0` at the nodes.
    pub g: Vec<f64>,
    /// Fully affine curvature `φ` at the nodes.
    pub phi: Vec<f64>,
    /// Sign `ε = ±1` of the fully affine metric.
    pub eps: f64,
    /// Current time.
    pub t: f64,
    /// Material period of the grid.
    pub period: f64,
}

impl CurvatureState {
    /// Validated construction from explicit fields.
    pub fn new(g: Vec<f64>, phi: Vec<f64>, eps: f64, t: f64, period: f64) -> Result<Self> {
        if g.len() != phi.len() {
            return Err(Error::DimensionMismatch {
                expected: g.len(),
                got: phi.len(),
            });
        }
        if g.len() < 16 {
            return Err(Error::TooFewSamples { min: 16, got: g.len() });
        }
        if eps != 1.0 && eps != -1.0 {
            return Err(Error::InvalidParams {
                what: format!("eps must be ±1, got {eps}"),
            });
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidParams {
                what: format!("period must be positive, got {period}"),
            });
        }
        let state = CurvatureState { g, phi, eps, t, period };
        state.validate()?;
        Ok(state)
    }

    /// Sample the invariants of an analytic closed curve on `n` nodes.
    pub fn from_curve(curve: &AnalyticCurve, n: usize) -> Result<Self> {
        let period = curve.period().ok_or(Error::NotClosed)?;
        if n < 16 {
            return Err(Error::TooFewSamples { min: 16, got: n });
        }
        let mut g = Vec::with_capacity(n);
        let mut phi = Vec::with_capacity(n);
        let mut eps = 0.0;
        for j in 0..n {
            let p = period * j as f64 / n as f64;
            let ga = plane_ga_jets(&curve.jet(p, 6)?, p)?;
            let inv = ga.invariants();
            if j == 0 {
                eps = inv.eps;
            } else if inv.eps != eps {
                return Err(Error::Degenerate {
                    p,
                    what: "fully affine metric changes sign",
                });
            }
            g.push(inv.g);
            phi.push(inv.phi);
        }
        CurvatureState::new(g, phi, eps, 0.0, period)
    }

    /// Number of grid nodes.
    pub fn n(&self) -> usize {
        self.g.len()
    }

    /// Fully affine perimeter `L = ∮ dξ = ∮ g dp`.
    pub fn length(&self) -> f64 {
        spectral::integrate_periodic(&self.g, self.period)
    }

    /// Curvature energy `E = ∮ φ² dξ`.
    pub fn energy(&self) -> f64 {
        let f: Vec<f64> = self.phi.iter().zip(&self.g).map(|(&p, &g)| p * p * g).collect();
        spectral::integrate_periodic(&f, self.period)
    }

    /// Total curvature `∮ φ dξ` (vanishes on closed curves).
    pub fn phi_integral(&self) -> f64 {
        let f: Vec<f64> = self.phi.iter().zip(&self.g).map(|(&p, &g)| p * g).collect();
        spectral::integrate_periodic(&f, self.period)
    }

    /// Heat-flow length rate `dL/dt = (ε/3) ∮ φ_ξ² dξ`.
    pub fn dldt_identity(&self) -> f64 {
        let phi_p = spectral::deriv_field(&self.phi, self.period, 1, None);
        let f: Vec<f64> = phi_p.iter().zip(&self.g).map(|(&d, &g)| d * d / g).collect();
        self.eps / 3.0 * spectral::integrate_periodic(&f, self.period)
    }

    fn validate(&self) -> Result<()> {
        for (j, (&g, &phi)) in self.g.iter().zip(&self.phi).enumerate() {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Degenerate {
                    p: self.period * j as f64 / self.n() as f64,
                    what: "metric density must stay positive",
                });
            }
            if !phi.is_finite() {
                return Err(Error::NonFiniteField { t: self.t });
            }
        }
        Ok(())
    }
}

/// Point samples of an evolving closed curve.
#[derive(Debug, Clone)]
pub struct CurveState {
    /// Current sampled positions.
    pub points: SampledClosedCurve,
    /// Current time.
    pub t: f64,
}

/// Equi-affine state: metric density `ḡ = dσ/dp` and curvature `μ` on a
/// fixed uniform material grid.
#[derive(Debug, Clone)]
pub struct MuState {
    /// Equi-affine curvature `μ` at the nodes.
    pub mu: Vec<f64>,
    /// Equi-affine metric density `ḡ > 0` at the nodes.
    pub gbar: Vec<f64>,
    /// Current time.
    pub t: f64,
    /// Material period of the grid.
    pub period: f64,
}

impl MuState {
    /// Validated construction from explicit fields.
    pub fn new(mu: Vec<f64>, gbar: Vec<f64>, t: f64, period: f64) -> Result<Self> {
        if mu.len() != gbar.len() {
            return Err(Error::DimensionMismatch {
                expected: mu.len(),
                got: gbar.len(),
            });
        }
        if mu.len() < 16 {
            return Err(Error::TooFewSamples { min: 16, got: mu.len() });
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidParams {
                what: format!("period must be positive, got {period}"),
            });
        }
        for (j, (&m, &g)) in mu.iter().zip(&gbar).enumerate() {
            if !(g > 0.0 && g.is_finite()) || !m.is_finite() {
                return Err(Error::Degenerate {
                    p: period * j as f64 / mu.len() as f64,
                    what: "equi-affine data must be finite with positive density",
                });
            }
        }
        Ok(MuState { mu, gbar, t, period })
    }

    /// Sample the equi-affine data of an analytic closed convex curve.
    pub fn from_curve(curve: &AnalyticCurve, n: usize) -> Result<Self> {
        let period = curve.period().ok_or(Error::NotClosed)?;
        if n < 16 {
            return Err(Error::TooFewSamples { min: 16, got: n });
        }
        let mut mu = Vec::with_capacity(n);
        let mut gbar = Vec::with_capacity(n);
        for j in 0..n {
            let p = period * j as f64 / n as f64;
            let data = plane_equiaffine_data(&curve.jet(p, 6)?, p)?;
            mu.push(data.mu.val());
            gbar.push(data.gbar.val());
        }
        MuState::new(mu, gbar, 0.0, period)
    }

    /// Number of grid nodes.
    pub fn n(&self) -> usize {
        self.mu.len()
    }

    /// Equi-affine perimeter `∮ dσ = ∮ ḡ dp`.
    pub fn sigma_length(&self) -> f64 {
        spectral::integrate_periodic(&self.gbar, self.period)
    }

    /// Isoperimetric integral `∮ √μ dσ` (needs `μ > 0`).
    pub fn isoper_integral(&self) -> Result<f64> {
        let mut f = Vec::with_capacity(self.n());
        for (j, (&m, &g)) in self.mu.iter().zip(&self.gbar).enumerate() {
            if m <= 0.0 {
                return Err(Error::MuVanishes { node: j });
            }
            f.push(m.sqrt() * g);
        }
        Ok(spectral::integrate_periodic(&f, self.period))
    }
}

/// Time series recorded along a heat-flow run.
#[derive(Debug, Clone, Default)]
pub struct FlowMonitors {
    /// Timestamps (strictly increasing).
    pub t: Vec<f64>,
    /// Fully affine perimeter `L = ∮ dξ`.
    pub length: Vec<f64>,
    /// Curvature energy `E = ∮ φ² dξ`.
    pub energy: Vec<f64>,
    /// Total curvature `∮ φ dξ`.
    pub phi_integral: Vec<f64>,
    /// Length rate `(ε/3) ∮ φ_ξ² dξ`.
    pub dldt: Vec<f64>,
    /// Step size that produced each row (0 for the initial row).
    pub dt: Vec<f64>,
}

impl FlowMonitors {
    /// Number of recorded rows.
    pub fn len(&self) -> usize {
        self.t.len()
    }

    /// True when nothing has been recorded.
    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    fn push(&mut self, state: &CurvatureState, dt: f64) {
        if let Some(&last) = self.t.last() {
            assert!(state.t > last, "monitor timestamps must increase");
        }
        self.t.push(state.t);
        self.length.push(state.length());
        self.energy.push(state.energy());
        self.phi_integral.push(state.phi_integral());
        self.dldt.push(state.dldt_identity());
        self.dt.push(dt);
    }
}

/// Time series recorded along an equi-affine flow run.
#[derive(Debug, Clone, Default)]
pub struct EaMonitors {
    /// Timestamps (strictly increasing).
    pub t: Vec<f64>,
    /// Isoperimetric integral `∮ √μ dσ`.
    pub isoper: Vec<f64>,
    /// Its exact rate `(1/12) ∮ μ^{−3/2} μ_σ² dσ` under the heat flow.
    pub disoper_dt: Vec<f64>,
    /// Equi-affine perimeter `∮ dσ`.
    pub sigma_length: Vec<f64>,
    /// Step size that produced each row (0 for the initial row).
    pub dt: Vec<f64>,
}

impl EaMonitors {
    /// Number of recorded rows.
    pub fn len(&self) -> usize {
        self.t.len()
    }

    /// True when nothing has been recorded.
    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    fn push(&mut self, state: &MuState, dt: f64, cap: Option<usize>) -> Result<()> {
        if let Some(&last) = self.t.last() {
            assert!(state.t > last, "monitor timestamps must increase");
        }
        let isoper = state.isoper_integral()?;
        let mu_s = sigma_stack(&state.mu, &state.gbar, state.period, 1, cap);
        let mut f = Vec::with_capacity(state.n());
        for (j, &m) in state.mu.iter().enumerate() {
            if m <= 0.0 {
                return Err(Error::MuVanishes { node: j });
            }
            f.push(m.powf(-1.5) * mu_s[1][j] * mu_s[1][j] * state.gbar[j]);
        }
        self.t.push(state.t);
        self.isoper.push(isoper);
        self.disoper_dt
            .push(spectral::integrate_periodic(&f, state.period) / 12.0);
        self.sigma_length.push(state.sigma_length());
        self.dt.push(dt);
        Ok(())
    }
}

/// ξ-derivatives of a periodic field: `out[k] = D_ξ^k f` with
/// `D_ξ = (1/g) ∂_p`, each level spectrally differentiated and capped.
fn xi_derivative_stack(
    f: &[f64],
    g: &[f64],
    period: f64,
    k_max: usize,
    cap: Option<usize>,
) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(f.to_vec());
    for _ in 0..k_max {
        let dp = spectral::deriv_field(out.last().unwrap(), period, 1, cap);
        out.push(dp.iter().zip(g).map(|(&d, &gj)| d / gj).collect());
    }
    out
}

/// Same stack against the equi-affine density (σ-derivatives).
fn sigma_stack(
    f: &[f64],
    gbar: &[f64],
    period: f64,
    k_max: usize,
    cap: Option<usize>,
) -> Vec<Vec<f64>> {
    xi_derivative_stack(f, gbar, period, k_max, cap)
}

#[derive(Clone, Copy)]
enum Coeff {
    U(usize),
    W(usize),
}

/// One monomial `c · ε^{eps} · φ^{ph[0]} φ_ξ^{ph[1]} ⋯ φ_{ξ⁴}^{ph[4]} · U_{ξ^k}`
/// (or `W_{ξ^k}`) of a rate formula.
#[derive(Clone, Copy)]
struct RateTerm {
    c: f64,
    eps: bool,
    ph: [u8; 5],
    src: Coeff,
}

/// Terms of `g_t/g` for the motion `C_t = W C_ξ + U C_{ξ²}`.
const GT_TERMS: [RateTerm; 15] = [
    RateTerm { c: 3.0 / 2.0, eps: true, ph: [0, 0, 0, 0, 0], src: Coeff::U(4) },
    RateTerm { c: -1.0, eps: true, ph: [1, 0, 0, 0, 0], src: Coeff::U(3) },
    RateTerm { c: 7.0 / 6.0, eps: false, ph: [0, 0, 0, 0, 0], src: Coeff::U(2) },
    RateTerm { c: -1.0 / 6.0, eps: true, ph: [2, 0, 0, 0, 0], src: Coeff::U(2) },
    RateTerm { c: -4.0, eps: true, ph: [0, 1, 0, 0, 0], src: Coeff::U(2) },
    RateTerm { c: 1.0 / 9.0, eps: true, ph: [3, 0, 0, 0, 0], src: Coeff::U(1) },
    RateTerm { c: 1.0 / 2.0, eps: true, ph: [1, 1, 0, 0, 0], src: Coeff::U(1) },
    RateTerm { c: -17.0 / 18.0, eps: false, ph: [1, 0, 0, 0, 0], src: Coeff::U(1) },
    RateTerm { c: -7.0 / 2.0, eps: true, ph: [0, 0, 1, 0, 0], src: Coeff::U(1) },
    RateTerm { c: 1.0, eps: false, ph: [0, 0, 0, 0, 0], src: Coeff::W(1) },
    RateTerm { c: 2.0 / 9.0, eps: true, ph: [2, 1, 0, 0, 0], src: Coeff::U(0) },
    RateTerm { c: 1.0 / 3.0, eps: true, ph: [1, 0, 1, 0, 0], src: Coeff::U(0) },
    RateTerm { c: 2.0 / 3.0, eps: true, ph: [0, 2, 0, 0, 0], src: Coeff::U(0) },
    RateTerm { c: -1.0, eps: false, ph: [0, 1, 0, 0, 0], src: Coeff::U(0) },
    RateTerm { c: -1.0, eps: true, ph: [0, 0, 0, 1, 0], src: Coeff::U(0) },
];

/// Terms of `φ_t` for the same motion.
const PHIT_TERMS: [RateTerm; 26] = [
    RateTerm { c: 1.0, eps: false, ph: [0, 1, 0, 0, 0], src: Coeff::W(0) },
    RateTerm { c: 9.0 / 2.0, eps: true, ph: [0, 0, 0, 0, 0], src: Coeff::U(5) },
    RateTerm { c: -9.0 / 2.0, eps: true, ph: [1, 0, 0, 0, 0], src: Coeff::U(4) },
    RateTerm { c: 1.0 / 2.0, eps: true, ph: [2, 0, 0, 0, 0], src: Coeff::U(3) },
    RateTerm { c: -15.0, eps: true, ph: [0, 1, 0, 0, 0], src: Coeff::U(3) },
    RateTerm { c: 5.0 / 2.0, eps: false, ph: [0, 0, 0, 0, 0], src: Coeff::U(3) },
    RateTerm { c: 1.0 / 2.0, eps: true, ph: [3, 0, 0, 0, 0], src: Coeff::U(2) },
    RateTerm { c: -2.0, eps: false, ph: [1, 0, 0, 0, 0], src: Coeff::U(2) },
    RateTerm { c: 9.0 / 2.0, eps: true, ph: [1, 1, 0, 0, 0], src: Coeff::U(2) },
    RateTerm { c: -45.0 / 2.0, eps: true, ph: [0, 0, 1, 0, 0], src: Coeff::U(2) },
    RateTerm { c: -1.0 / 9.0, eps: true, ph: [4, 0, 0, 0, 0], src: Coeff::U(1) },
    RateTerm { c: 7.0 / 18.0, eps: false, ph: [2, 0, 0, 0, 0], src: Coeff::U(1) },
    RateTerm { c: 2.0 / 9.0, eps: true, ph: [0, 0, 0, 0, 0], src: Coeff::U(1) },
    RateTerm { c: 7.0 / 6.0, eps: true, ph: [2, 1, 0, 0, 0], src: Coeff::U(1) },
    RateTerm { c: -13.0 / 6.0, eps: false, ph: [0, 1, 0, 0, 0], src: Coeff::U(1) },
    RateTerm { c: 7.0 / 2.0, eps: true, ph: [0, 2, 0, 0, 0], src: Coeff::U(1) },
    RateTerm { c: 6.0, eps: true, ph: [1, 0, 1, 0, 0], src: Coeff::U(1) },
    RateTerm { c: -27.0 / 2.0, eps: true, ph: [0, 0, 0, 1, 0], src: Coeff::U(1) },
    RateTerm { c: -2.0 / 9.0, eps: true, ph: [3, 1, 0, 0, 0], src: Coeff::U(0) },
    RateTerm { c: 2.0 / 3.0, eps: true, ph: [1, 2, 0, 0, 0], src: Coeff::U(0) },
    RateTerm { c: -1.0 / 9.0, eps: false, ph: [1, 1, 0, 0, 0], src: Coeff::U(0) },
    RateTerm { c: 1.0 / 3.0, eps: true, ph: [2, 0, 1, 0, 0], src: Coeff::U(0) },
    RateTerm { c: 5.0, eps: true, ph: [0, 1, 1, 0, 0], src: Coeff::U(0) },
    RateTerm { c: -4.0 / 3.0, eps: false, ph: [0, 0, 1, 0, 0], src: Coeff::U(0) },
    RateTerm { c: 2.0, eps: true, ph: [1, 0, 0, 1, 0], src: Coeff::U(0) },
    RateTerm { c: -3.0, eps: true, ph: [0, 0, 0, 0, 1], src: Coeff::U(0) },
];

/// Pointwise evaluation of a rate table on jet values.
fn eval_rate_terms(terms: &[RateTerm], ph: &[f64; 5], u: &[f64; 6], w: &[f64; 2], eps: f64) -> f64 {
    let mut acc = 0.0;
    for term in terms {
        let s = match term.src {
            Coeff::U(k) => u[k],
            Coeff::W(k) => w[k],
        };
        if s == 0.0 {
            continue;
        }
        let mut v = term.c * s;
        if term.eps {
            v *= eps;
        }
        for (k, &pw) in term.ph.iter().enumerate() {
            for _ in 0..pw {
                v *= ph[k];
            }
        }
        acc += v;
    }
    acc
}

/// Jet-valued evaluation of a rate table (same term list as the pointwise
/// path, so the two cannot drift apart).
fn eval_rate_terms_jet(
    terms: &[RateTerm],
    phi: &Jet,
    u: &Jet,
    w: &Jet,
    eps: f64,
    order: usize,
) -> Jet {
    let ph: Vec<Jet> = (0..=4).map(|k| phi.d(k).truncate(order)).collect();
    let us: Vec<Jet> = (0..=5).map(|k| u.d(k).truncate(order)).collect();
    let ws: Vec<Jet> = (0..=1).map(|k| w.d(k).truncate(order)).collect();
    let mut acc = Jet::constant(0.0, order);
    for term in terms {
        let src = match term.src {
            Coeff::U(k) => &us[k],
            Coeff::W(k) => &ws[k],
        };
        let mut v = src.scale(if term.eps { term.c * eps } else { term.c });
        for (k, &pw) in term.ph.iter().enumerate() {
            for _ in 0..pw {
                v = v.mul(&ph[k]);
            }
        }
        acc = acc.add(&v);
    }
    acc
}

/// Rates of the invariant pair under the motion `C_t = W C_ξ + U C_{ξ²}`:
/// returns the fields `(g_t/g, φ_t)` at the nodes.
pub fn invariant_rates(
    state: &CurvatureState,
    w: &[f64],
    u: &[f64],
    cap: ModeCap,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = state.n();
    if w.len() != n || u.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if w.len() != n { w.len() } else { u.len() },
        });
    }
    state.validate()?;
    let mc = cap.resolve(n);
    let ph = xi_derivative_stack(&state.phi, &state.g, state.period, 4, mc);
    let us = xi_derivative_stack(u, &state.g, state.period, 5, mc);
    let ws = xi_derivative_stack(w, &state.g, state.period, 1, mc);
    let mut gtog = Vec::with_capacity(n);
    let mut phit = Vec::with_capacity(n);
    for j in 0..n {
        let phv = [ph[0][j], ph[1][j], ph[2][j], ph[3][j], ph[4][j]];
        let uv = [us[0][j], us[1][j], us[2][j], us[3][j], us[4][j], us[5][j]];
        let wv = [ws[0][j], ws[1][j]];
        gtog.push(eval_rate_terms(&GT_TERMS, &phv, &uv, &wv, state.eps));
        phit.push(eval_rate_terms(&PHIT_TERMS, &phv, &uv, &wv, state.eps));
    }
    Ok((gtog, phit))
}

/// Jet version of [`invariant_rates`] for closed-form profiles: `phi`, `w`,
/// `u` are jets in ξ of orders ≥ 4, ≥ 1, ≥ 5; returns `(g_t/g, φ_t)` as
/// jets in ξ.
pub fn invariant_rates_jet(phi: &Jet, w: &Jet, u: &Jet, eps: f64) -> Result<(Jet, Jet)> {
    if phi.order() < 4 || u.order() < 5 || w.order() < 1 {
        return Err(Error::InvalidParams {
            what: format!(
                "rate jets need orders φ ≥ 4, U ≥ 5, W ≥ 1, got ({}, {}, {})",
                phi.order(),
                u.order(),
                w.order()
            ),
        });
    }
    let order = (phi.order() - 4).min(u.order() - 5).min(w.order() - 1);
    let gtog = eval_rate_terms_jet(&GT_TERMS, phi, u, w, eps, order);
    let phit = eval_rate_terms_jet(&PHIT_TERMS, phi, u, w, eps, order);
    Ok((gtog, phit))
}

/// Rate of the `k`-th ξ-derivative of the curvature, `∂_t(φ_{ξ^k})`, by the
/// commutation recursion
/// `(φ_{ξ^k})_t = D_ξ (φ_{ξ^{k−1}})_t − (g_t/g)·φ_{ξ^k}`.
pub fn curvature_derivative_rate(
    state: &CurvatureState,
    w: &[f64],
    u: &[f64],
    k: usize,
    cap: ModeCap,
) -> Result<Vec<f64>> {
    if k > 3 {
        return Err(Error::InvalidParams {
            what: format!("derivative rate supported for k ≤ 3, got {k}"),
        });
    }
    let (gtog, mut rate) = invariant_rates(state, w, u, cap)?;
    let mc = cap.resolve(state.n());
    let ph = xi_derivative_stack(&state.phi, &state.g, state.period, k, mc);
    for level in 1..=k {
        let dp = spectral::deriv_field(&rate, state.period, 1, mc);
        rate = (0..state.n())
            .map(|j| dp[j] / state.g[j] - gtog[j] * ph[level][j])
            .collect();
    }
    Ok(rate)
}

/// ξ-derivative fields of the curvature: `out[j] = φ_{ξ^j}` for `j = 0..=k`.
pub fn curvature_xi_derivatives(
    state: &CurvatureState,
    k: usize,
    cap: ModeCap,
) -> Vec<Vec<f64>> {
    let mc = cap.resolve(state.n());
    xi_derivative_stack(&state.phi, &state.g, state.period, k, mc)
}

type Rhs<'a> = dyn Fn(&[f64]) -> Result<Vec<f64>> + 'a;

/// Classic fourth-order step with the first stage supplied by the caller.
fn rk4_step(y: &[f64], k1: &[f64], dt: f64, rhs: &Rhs) -> Result<Vec<f64>> {
    let n = y.len();
    let mut stage = vec![0.0; n];
    for j in 0..n {
        stage[j] = y[j] + 0.5 * dt * k1[j];
    }
    let k2 = rhs(&stage)?;
    for j in 0..n {
        stage[j] = y[j] + 0.5 * dt * k2[j];
    }
    let k3 = rhs(&stage)?;
    for j in 0..n {
        stage[j] = y[j] + dt * k3[j];
    }
    let k4 = rhs(&stage)?;
    Ok((0..n)
        .map(|j| y[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
        .collect())
}

/// One dt and two dt/2 steps; returns the fine solution and the scaled
/// step-doubling error estimate.
fn try_double_step(y: &[f64], k1: &[f64], dt: f64, rhs: &Rhs) -> Result<(Vec<f64>, f64)> {
    let full = rk4_step(y, k1, dt, rhs)?;
    let mid = rk4_step(y, k1, 0.5 * dt, rhs)?;
    let k1m = rhs(&mid)?;
    let half = rk4_step(&mid, &k1m, 0.5 * dt, rhs)?;
    let mut err = 0.0f64;
    for j in 0..y.len() {
        err = err.max((full[j] - half[j]).abs() / (1.0 + half[j].abs()));
    }
    Ok((half, err / 15.0))
}

/// Error-controlled advance from `y` by at most `dt_cap`; returns the new
/// state vector and the step actually taken.
fn adaptive_advance(
    y: &[f64],
    t: f64,
    dt_cap: f64,
    opts: &FlowOptions,
    rhs: &Rhs,
) -> Result<(Vec<f64>, f64)> {
    // A right-hand-side failure at the accepted state is a real error, not
    // a step-size problem.
    let k1 = rhs(y)?;
    if let Some(h) = opts.fixed_dt {
        let dt = h.min(dt_cap);
        if dt < opts.dt_min {
            return Err(Error::StepUnderflow { dt });
        }
        let out = rk4_step(y, &k1, dt, rhs)?;
        if !out.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteField { t });
        }
        return Ok((out, dt));
    }
    let mut dt = dt_cap;
    let mut pending: Option<Error> = None;
    loop {
        if dt < opts.dt_min {
            return Err(pending.unwrap_or(Error::StepUnderflow { dt }));
        }
        match try_double_step(y, &k1, dt, rhs) {
            // Stage failures (convexity, vanishing denominators…) at trial
            // states are treated as rejections; the cause is reported if
            // shrinking the step never cures it.
            Err(e) => {
                pending = Some(e);
                dt *= 0.5;
            }
            Ok((half, err)) => {
                if err.is_finite() && err <= opts.rtol && half.iter().all(|v| v.is_finite()) {
                    return Ok((half, dt));
                }
                pending = None;
                if err.is_finite() && err > 0.0 {
                    dt *= (0.9 * (opts.rtol / err).powf(0.2)).clamp(0.1, 0.9);
                } else {
                    dt *= 0.5;
                }
            }
        }
    }
}

/// Stability ceiling for a fourth-order flow: `dt ≤ c_stab·Δ⁴/coeff` with
/// `Δ = π/k_max` the shortest resolved wavelength (halved).
fn fourth_order_ceiling(
    density: &[f64],
    period: f64,
    cap: Option<usize>,
    c_stab: f64,
    coeff: f64,
) -> f64 {
    let n = density.len();
    let modes = cap.unwrap_or(n / 2).max(1) as f64;
    let k_p = modes * TAU / period;
    let d_min = density.iter().cloned().fold(f64::INFINITY, f64::min);
    let delta = PI * d_min / k_p;
    c_stab * delta.powi(4) / coeff
}

fn pack2(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().chain(b.iter()).copied().collect()
}

/// One adaptive step of the fully affine heat flow (`U = 1`, `W = 0`) on
/// the curvature backend; returns the advanced state and the step taken.
pub fn heat_step_curvature(
    state: &CurvatureState,
    dt_max: f64,
    opts: &FlowOptions,
) -> Result<(CurvatureState, f64)> {
    if !(dt_max > 0.0) {
        return Err(Error::InvalidParams {
            what: format!("dt_max must be positive, got {dt_max}"),
        });
    }
    state.validate()?;
    let n = state.n();
    let mc = opts.mode_cap.resolve(n);
    // Principal fourth-order term of φ_t is −3εφ_{ξ⁴}.
    let ceiling = fourth_order_ceiling(&state.g, state.period, mc, opts.c_stab, 3.0);
    let (period, eps) = (state.period, state.eps);
    let u = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let w = [0.0, 0.0];
    let rhs = move |y: &[f64]| -> Result<Vec<f64>> {
        let (g, phi) = y.split_at(n);
        if let Some(j) = g.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Degenerate {
                p: period * j as f64 / n as f64,
                what: "metric density lost positivity",
            });
        }
        let ph = xi_derivative_stack(phi, g, period, 4, mc);
        let mut out = vec![0.0; 2 * n];
        for j in 0..n {
            let phv = [ph[0][j], ph[1][j], ph[2][j], ph[3][j], ph[4][j]];
            out[j] = g[j] * eval_rate_terms(&GT_TERMS, &phv, &u, &w, eps);
            out[n + j] = eval_rate_terms(&PHIT_TERMS, &phv, &u, &w, eps);
        }
        Ok(out)
    };
    let y0 = pack2(&state.g, &state.phi);
    let (y1, dt) = adaptive_advance(&y0, state.t, dt_max.min(ceiling), opts, &rhs)?;
    let (g1, phi1) = y1.split_at(n);
    let (g1, phi1) = match mc {
        Some(c) => (spectral::low_pass(g1, c), spectral::low_pass(phi1, c)),
        None => (g1.to_vec(), phi1.to_vec()),
    };
    Ok((CurvatureState::new(g1, phi1, eps, state.t + dt, period)?, dt))
}

/// Drive [`heat_step_curvature`] to `t_end`, recording monitors.
///
/// Closed regime: requires `ε = +1` and `∮φ dξ = 0` (to 1e−6) at entry;
/// aborts with `BlowUp` if the energy exceeds `opts.e_blowup`.
pub fn run_heat_flow_curvature(
    state: &CurvatureState,
    t_end: f64,
    opts: &FlowOptions,
) -> Result<(CurvatureState, FlowMonitors)> {
    if state.eps != 1.0 {
        return Err(Error::InvalidParams {
            what: "closed heat flow needs ε = +1".into(),
        });
    }
    let drift = state.phi_integral().abs();
    if drift > 1e-6 * (1.0 + state.length()) {
        return Err(Error::InvalidParams {
            what: format!("closed-curve constraint violated: ∮φdξ = {drift:.3e}"),
        });
    }
    if t_end <= state.t {
        return Err(Error::InvalidParams {
            what: format!("t_end = {t_end} is not ahead of t = {}", state.t),
        });
    }
    let mut monitors = FlowMonitors::default();
    let mut s = state.clone();
    monitors.push(&s, 0.0);
    let mut since = 0usize;
    while t_end - s.t > 2.0 * opts.dt_min {
        let (next, dt) = heat_step_curvature(&s, t_end - s.t, opts)?;
        s = next;
        since += 1;
        let e = s.energy();
        if !e.is_finite() || e > opts.e_blowup {
            return Err(Error::BlowUp {
                what: "curvature energy",
                value: e,
            });
        }
        if since >= opts.monitor_stride.max(1) || t_end - s.t <= 2.0 * opts.dt_min {
            monitors.push(&s, dt);
            since = 0;
        }
    }
    Ok((s, monitors))
}

/// Euclidean geometry of a sampled closed plane curve: the heat-flow
/// normal velocity plus the fields needed for the stability ceiling.
struct CurveGeometry {
    vx: Vec<f64>,
    vy: Vec<f64>,
    /// Largest stiffness coefficient `κ^{−4/3}/(27μ²)`.
    coeff: f64,
    /// Smallest Euclidean speed `|C_p|`.
    sp_min: f64,
}

fn curve_geometry(x: &[f64], y: &[f64], period: f64, cap: Option<usize>) -> Result<CurveGeometry> {
    let n = x.len();
    let dx = spectral::deriv_fields_multi(x, period, 2, cap);
    let dy = spectral::deriv_fields_multi(y, period, 2, cap);
    let mut sp = vec![0.0; n];
    let mut kappa = vec![0.0; n];
    let mut sp_min = f64::INFINITY;
    for j in 0..n {
        let (xp, yp, xpp, ypp) = (dx[1][j], dy[1][j], dx[2][j], dy[2][j]);
        sp[j] = xp.hypot(yp);
        if sp[j] < 1e-12 {
            return Err(Error::DegenerateFrame {
                p: period * j as f64 / n as f64,
            });
        }
        sp_min = sp_min.min(sp[j]);
        kappa[j] = (xp * ypp - yp * xpp) / sp[j].powi(3);
        if kappa[j] <= 1e-12 {
            return Err(Error::LostConvexity { node: j });
        }
    }
    // Arc-length derivatives of κ via the chain rule D_s = (1/|C_p|)∂_p.
    let k1p = spectral::deriv_field(&kappa, period, 1, cap);
    let ks: Vec<f64> = (0..n).map(|j| k1p[j] / sp[j]).collect();
    let k2p = spectral::deriv_field(&ks, period, 1, cap);
    let kss: Vec<f64> = (0..n).map(|j| k2p[j] / sp[j]).collect();
    let mut vx = vec![0.0; n];
    let mut vy = vec![0.0; n];
    let mut coeff = 0.0f64;
    for j in 0..n {
        let k = kappa[j];
        let denom = 9.0 * k - 5.0 * ks[j] * ks[j] / k.powi(3) + 3.0 * kss[j] / (k * k);
        if denom.abs() < 1e-8 {
            return Err(Error::DenominatorVanishes { node: j });
        }
        // denom = 9μκ^{−1/3}, so the principal fourth-order coefficient of
        // the normal motion is κ^{−4/3}/(27μ²).
        let mu = denom * k.cbrt() / 9.0;
        coeff = coeff.max(k.powf(-4.0 / 3.0) / (27.0 * mu * mu));
        // Inward normal of a positively oriented convex curve.
        vx[j] = -dy[1][j] / (sp[j] * denom);
        vy[j] = dx[1][j] / (sp[j] * denom);
    }
    Ok(CurveGeometry { vx, vy, coeff, sp_min })
}

/// One adaptive step of the fully affine heat flow moving curve points
/// along the Euclidean normal: `C_t = N/(9κ − 5κ_s²κ^{−3} + 3κ_ss κ^{−2})`.
pub fn heat_step_curve(
    state: &CurveState,
    dt_max: f64,
    opts: &FlowOptions,
) -> Result<(CurveState, f64)> {
    if !(dt_max > 0.0) {
        return Err(Error::InvalidParams {
            what: format!("dt_max must be positive, got {dt_max}"),
        });
    }
    if state.points.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: state.points.dim(),
        });
    }
    let n = state.points.n();
    let period = state.points.period();
    let mc = opts.mode_cap.resolve(n);
    let geom = curve_geometry(
        state.points.component(0),
        state.points.component(1),
        period,
        mc,
    )?;
    let modes = mc.unwrap_or(n / 2).max(1) as f64;
    let delta = PI * geom.sp_min / (modes * TAU / period);
    let ceiling = opts.c_stab * delta.powi(4) / geom.coeff;
    let rhs = move |y: &[f64]| -> Result<Vec<f64>> {
        let (x, yy) = y.split_at(n);
        let geom = curve_geometry(x, yy, period, mc)?;
        Ok(pack2(&geom.vx, &geom.vy))
    };
    let y0 = pack2(state.points.component(0), state.points.component(1));
    let (y1, dt) = adaptive_advance(&y0, state.t, dt_max.min(ceiling), opts, &rhs)?;
    let (x1, yy1) = y1.split_at(n);
    let (x1, yy1) = match mc {
        Some(c) => (spectral::low_pass(x1, c), spectral::low_pass(yy1, c)),
        None => (x1.to_vec(), yy1.to_vec()),
    };
    Ok((
        CurveState {
            points: SampledClosedCurve::from_components(vec![x1, yy1], period)?,
            t: state.t + dt,
        },
        dt,
    ))
}

/// Fully affine invariants of sampled curve points (spectral jets).
pub fn curvature_state_from_points(
    points: &SampledClosedCurve,
    t: f64,
    cap: ModeCap,
) -> Result<CurvatureState> {
    if points.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: points.dim(),
        });
    }
    let n = points.n();
    let jets = points.spectral_jets(6, cap.resolve(n))?;
    let mut g = Vec::with_capacity(n);
    let mut phi = Vec::with_capacity(n);
    let mut eps = 0.0;
    for (j, jet) in jets.iter().enumerate() {
        let p = points.node(j);
        let ga = plane_ga_jets(jet, p)?;
        let inv = ga.invariants();
        if j == 0 {
            eps = inv.eps;
        } else if inv.eps != eps {
            return Err(Error::Degenerate {
                p,
                what: "fully affine metric changes sign",
            });
        }
        g.push(inv.g);
        phi.push(inv.phi);
    }
    CurvatureState::new(g, phi, eps, t, points.period())
}

/// Drive [`heat_step_curve`] to `t_end`; monitors are computed from the
/// derived curvature state of the evolving points.
pub fn run_heat_flow_curve(
    state: &CurveState,
    t_end: f64,
    opts: &FlowOptions,
) -> Result<(CurveState, FlowMonitors)> {
    if t_end <= state.t {
        return Err(Error::InvalidParams {
            what: format!("t_end = {t_end} is not ahead of t = {}", state.t),
        });
    }
    let mut monitors = FlowMonitors::default();
    let mut s = state.clone();
    monitors.push(&curvature_state_from_points(&s.points, s.t, opts.mode_cap)?, 0.0);
    let mut since = 0usize;
    while t_end - s.t > 2.0 * opts.dt_min {
        let (next, dt) = heat_step_curve(&s, t_end - s.t, opts)?;
        s = next;
        since += 1;
        if since >= opts.monitor_stride.max(1) || t_end - s.t <= 2.0 * opts.dt_min {
            let view = curvature_state_from_points(&s.points, s.t, opts.mode_cap)?;
            let e = view.energy();
            if !e.is_finite() || e > opts.e_blowup {
                return Err(Error::BlowUp {
                    what: "curvature energy",
                    value: e,
                });
            }
            monitors.push(&view, dt);
            since = 0;
        }
    }
    Ok((s, monitors))
}

/// Rates of the equi-affine pair under `C_t = α C_σ + β C_{σ²}`:
/// `ḡ_t/ḡ = α_σ − (2/3)βμ + (1/3)β_{σ²}` and
/// `μ_t = (1/3)(β_{σ⁴} + 5μβ_{σ²} + 5β_σμ_σ + 4βμ² + βμ_{σ²}) + αμ_σ`.
///
/// Both are material rates: they track the invariants of the node moving
/// with the curve, so the tangential part advects μ at full strength
/// (α enters `ḡ_t` only through α_σ because ḡ is a density).
pub fn equiaffine_rates(
    state: &MuState,
    alpha: &[f64],
    beta: &[f64],
    cap: ModeCap,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = state.n();
    if alpha.len() != n || beta.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if alpha.len() != n { alpha.len() } else { beta.len() },
        });
    }
    let mc = cap.resolve(n);
    let al = sigma_stack(alpha, &state.gbar, state.period, 1, mc);
    let be = sigma_stack(beta, &state.gbar, state.period, 4, mc);
    let ms = sigma_stack(&state.mu, &state.gbar, state.period, 2, mc);
    let mut gbar_rate = Vec::with_capacity(n);
    let mut mu_t = Vec::with_capacity(n);
    for j in 0..n {
        let m = ms[0][j];
        gbar_rate.push(al[1][j] - 2.0 / 3.0 * be[0][j] * m + be[2][j] / 3.0);
        mu_t.push(
            (be[4][j]
                + 5.0 * m * be[2][j]
                + 5.0 * be[1][j] * ms[1][j]
                + 4.0 * be[0][j] * m * m
                + be[0][j] * ms[2][j])
                / 3.0
                + al[0][j] * ms[1][j],
        );
    }
    Ok((gbar_rate, mu_t))
}

/// One adaptive step of the equi-affine heat flow (`α = 0`, `β = 1`):
/// `ḡ_t/ḡ = −(2/3)μ`, `μ_t = (4/3)μ² + (1/3)μ_{σ²}`.
pub fn ea_heat_step(state: &MuState, dt_max: f64, opts: &FlowOptions) -> Result<(MuState, f64)> {
    if !(dt_max > 0.0) {
        return Err(Error::InvalidParams {
            what: format!("dt_max must be positive, got {dt_max}"),
        });
    }
    let n = state.n();
    let period = state.period;
    let mc = opts.mode_cap.resolve(n);
    // Second-order ceiling for the principal term (1/3)μ_{σ²}.
    let modes = mc.unwrap_or(n / 2).max(1) as f64;
    let g_min = state.gbar.iter().cloned().fold(f64::INFINITY, f64::min);
    let delta = PI * g_min / (modes * TAU / period);
    let ceiling = C_STAB2 * delta * delta / (1.0 / 3.0);
    let rhs = move |y: &[f64]| -> Result<Vec<f64>> {
        let (gbar, mu) = y.split_at(n);
        if let Some(j) = gbar.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Degenerate {
                p: period * j as f64 / n as f64,
                what: "equi-affine density lost positivity",
            });
        }
        let ms = sigma_stack(mu, gbar, period, 2, mc);
        let mut out = vec![0.0; 2 * n];
        for j in 0..n {
            out[j] = -2.0 / 3.0 * gbar[j] * mu[j];
            out[n + j] = 4.0 / 3.0 * mu[j] * mu[j] + ms[2][j] / 3.0;
        }
        Ok(out)
    };
    let y0 = pack2(&state.gbar, &state.mu);
    let (y1, dt) = adaptive_advance(&y0, state.t, dt_max.min(ceiling), opts, &rhs)?;
    let (g1, m1) = y1.split_at(n);
    let (g1, m1) = match mc {
        Some(c) => (spectral::low_pass(g1, c), spectral::low_pass(m1, c)),
        None => (g1.to_vec(), m1.to_vec()),
    };
    Ok((MuState::new(m1, g1, state.t + dt, period)?, dt))
}

/// Fully affine heat-flow rate of μ in equi-affine variables (the
/// closed-form fourth-order equation); input is `[μ, μ_σ, …, μ_{σ⁴}]`.
pub fn ea4_rate_closed(d: &[f64; 5]) -> f64 {
    let (m, m1, m2, m3, m4) = (d[0], d[1], d[2], d[3], d[4]);
    -m4 / (27.0 * m * m)
        + 8.0 * m1 * m3 / (27.0 * m.powi(3))
        + 2.0 * m2 * m2 / (9.0 * m.powi(3))
        - 4.0 * (9.0 * m1 * m1 + m.powi(3)) * m2 / (27.0 * m.powi(4))
        + 8.0 * m1.powi(4) / (9.0 * m.powi(5))
        + 7.0 * m1 * m1 / (54.0 * m * m)
        + 4.0 * m / 27.0
}

/// Closed-form density rate of the same flow:
/// `ḡ_t/ḡ = (−4μ³ − 5μμ_{σ²} + 10μ_σ²)/(54μ³)`.
pub fn ea4_gbar_rate_closed(d: &[f64; 3]) -> f64 {
    let (m, m1, m2) = (d[0], d[1], d[2]);
    (-4.0 * m.powi(3) - 5.0 * m * m2 + 10.0 * m1 * m1) / (54.0 * m.powi(3))
}

/// The same rates derived generically from the motion coefficients
/// `β = 1/(9μ)`, `α = β_σ/2`; `mu` is a jet in σ of order ≥ 4.
/// Returns `(ḡ_t/ḡ, μ_t)` at the jet's base point.
pub fn ea4_rate_generic(mu: &Jet) -> Result<(f64, f64)> {
    if mu.order() < 4 {
        return Err(Error::InvalidParams {
            what: format!("μ jet needs order ≥ 4, got {}", mu.order()),
        });
    }
    let beta = mu.scale(9.0).recip()?;
    let b = |k: usize| beta.deriv(k);
    let m = |k: usize| mu.deriv(k);
    // α = β_σ/2, so α_σ = β_{σ²}/2.
    let gbar_rate = b(2) / 2.0 - 2.0 / 3.0 * b(0) * m(0) + b(2) / 3.0;
    let mu_t = (b(4)
        + 5.0 * m(0) * b(2)
        + 5.0 * b(1) * m(1)
        + 4.0 * b(0) * m(0) * m(0)
        + b(0) * m(2))
        / 3.0
        + b(1) / 2.0 * m(1);
    Ok((gbar_rate, mu_t))
}

/// One adaptive step of the fully affine heat flow expressed on the
/// equi-affine backend (`β = 1/(9μ)`, `α = β_σ/2`), valid in the closed
/// regime `μ > 0`.
pub fn fullyaffine_via_equiaffine_step(
    state: &MuState,
    dt_max: f64,
    opts: &FlowOptions,
) -> Result<(MuState, f64)> {
    if !(dt_max > 0.0) {
        return Err(Error::InvalidParams {
            what: format!("dt_max must be positive, got {dt_max}"),
        });
    }
    let n = state.n();
    let period = state.period;
    let mc = opts.mode_cap.resolve(n);
    let mu_min = state.mu.iter().cloned().fold(f64::INFINITY, f64::min);
    if mu_min <= MU_FLOOR {
        let node = state.mu.iter().position(|&m| m <= MU_FLOOR).unwrap_or(0);
        return Err(Error::MuVanishes { node });
    }
    // Principal term −μ_{σ⁴}/(27μ²).
    let coeff = 1.0 / (27.0 * mu_min * mu_min);
    let modes = mc.unwrap_or(n / 2).max(1) as f64;
    let g_min = state.gbar.iter().cloned().fold(f64::INFINITY, f64::min);
    let delta = PI * g_min / (modes * TAU / period);
    let ceiling = opts.c_stab * delta.powi(4) / coeff;
    let rhs = move |y: &[f64]| -> Result<Vec<f64>> {
        let (gbar, mu) = y.split_at(n);
        if let Some(j) = gbar.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Degenerate {
                p: period * j as f64 / n as f64,
                what: "equi-affine density lost positivity",
            });
        }
        if let Some(j) = mu.iter().position(|&m| m <= MU_FLOOR) {
            return Err(Error::MuVanishes { node: j });
        }
        let ms = sigma_stack(mu, gbar, period, 4, mc);
        let mut out = vec![0.0; 2 * n];
        for j in 0..n {
            let d5 = [ms[0][j], ms[1][j], ms[2][j], ms[3][j], ms[4][j]];
            let d3 = [ms[0][j], ms[1][j], ms[2][j]];
            out[j] = gbar[j] * ea4_gbar_rate_closed(&d3);
            out[n + j] = ea4_rate_closed(&d5);
        }
        Ok(out)
    };
    let y0 = pack2(&state.gbar, &state.mu);
    let (y1, dt) = adaptive_advance(&y0, state.t, dt_max.min(ceiling), opts, &rhs)?;
    let (g1, m1) = y1.split_at(n);
    let (g1, m1) = match mc {
        Some(c) => (spectral::low_pass(g1, c), spectral::low_pass(m1, c)),
        None => (g1.to_vec(), m1.to_vec()),
    };
    Ok((MuState::new(m1, g1, state.t + dt, period)?, dt))
}

fn run_mu_driver(
    state: &MuState,
    t_end: f64,
    opts: &FlowOptions,
    step: impl Fn(&MuState, f64, &FlowOptions) -> Result<(MuState, f64)>,
) -> Result<(MuState, EaMonitors)> {
    if t_end <= state.t {
        return Err(Error::InvalidParams {
            what: format!("t_end = {t_end} is not ahead of t = {}", state.t),
        });
    }
    let mc = opts.mode_cap.resolve(state.n());
    let mut monitors = EaMonitors::default();
    let mut s = state.clone();
    monitors.push(&s, 0.0, mc)?;
    let mut since = 0usize;
    while t_end - s.t > 2.0 * opts.dt_min {
        let (next, dt) = step(&s, t_end - s.t, opts)?;
        s = next;
        since += 1;
        let worst = s.mu.iter().cloned().fold(0.0f64, |a, m| a.max(m.abs()));
        if !worst.is_finite() || worst > opts.e_blowup {
            return Err(Error::BlowUp {
                what: "equi-affine curvature",
                value: worst,
            });
        }
        if since >= opts.monitor_stride.max(1) || t_end - s.t <= 2.0 * opts.dt_min {
            monitors.push(&s, dt, mc)?;
            since = 0;
        }
    }
    Ok((s, monitors))
}

/// Drive [`ea_heat_step`] to `t_end`, recording the isoperimetric monitors.
pub fn run_ea_heat_flow(
    state: &MuState,
    t_end: f64,
    opts: &FlowOptions,
) -> Result<(MuState, EaMonitors)> {
    run_mu_driver(state, t_end, opts, ea_heat_step)
}

/// Drive [`fullyaffine_via_equiaffine_step`] to `t_end`.
pub fn run_fullyaffine_mu_flow(
    state: &MuState,
    t_end: f64,
    opts: &FlowOptions,
) -> Result<(MuState, EaMonitors)> {
    run_mu_driver(state, t_end, opts, fullyaffine_via_equiaffine_step)
}

/// Fully affine view of an equi-affine state: `φ = (ε/2)(εμ)^{−3/2}μ_σ`
/// and `g = dξ/dp = 3√(εμ)·ḡ`.
pub fn curvature_view_of_mu(state: &MuState, cap: ModeCap) -> Result<CurvatureState> {
    let n = state.n();
    let mc = cap.resolve(n);
    let eps = if state.mu[0] > 0.0 { 1.0 } else { -1.0 };
    for (j, &m) in state.mu.iter().enumerate() {
        if m.abs() < 1e-12 || (m > 0.0) != (eps > 0.0) {
            return Err(Error::InflectionPoint {
                p: state.period * j as f64 / n as f64,
            });
        }
    }
    let ms = sigma_stack(&state.mu, &state.gbar, state.period, 1, mc);
    let mut g = Vec::with_capacity(n);
    let mut phi = Vec::with_capacity(n);
    for j in 0..n {
        let em = eps * state.mu[j];
        g.push(3.0 * em.sqrt() * state.gbar[j]);
        phi.push(0.5 * eps * em.powf(-1.5) * ms[1][j]);
    }
    CurvatureState::new(g, phi, eps, state.t, state.period)
}

/// Curvature profile against normalized fully affine arc length: resamples
/// `φ(ξ)` onto `m` uniform points `ξ = xi_offset + q·L/m` (taken mod `L`) by
/// cubic Hermite interpolation. Returns `(L, profile)`. The offset lets two
/// states with different ξ-origins be compared after phase alignment.
pub fn phi_profile(
    state: &CurvatureState,
    m: usize,
    xi_offset: f64,
) -> Result<(f64, Vec<f64>)> {
    if m < 2 {
        return Err(Error::TooFewSamples { min: 2, got: m });
    }
    let n = state.n();
    let xi = spectral::antiderivative(&state.g, state.period);
    let total = state.length();
    let phi_p = spectral::deriv_field(&state.phi, state.period, 1, None);
    let phi_xi: Vec<f64> = (0..n).map(|j| phi_p[j] / state.g[j]).collect();
    let at = |j: usize| -> (f64, f64, f64) {
        // (ξ_j, φ_j, φ_ξ j) with periodic wrap on the last interval.
        if j < n {
            (xi[j], state.phi[j], phi_xi[j])
        } else {
            (total, state.phi[0], phi_xi[0])
        }
    };
    let mut out = Vec::with_capacity(m);
    for q in 0..m {
        let target = (xi_offset + total * q as f64 / m as f64).rem_euclid(total);
        // ξ is strictly increasing since g > 0.
        let mut lo = 0usize;
        let mut hi = n;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if at(mid).0 <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (x0, f0, d0) = at(lo);
        let (x1, f1, d1) = at(lo + 1);
        let h = x1 - x0;
        let s = ((target - x0) / h).clamp(0.0, 1.0);
        let (s2, s3) = (s * s, s * s * s);
        out.push(
            (2.0 * s3 - 3.0 * s2 + 1.0) * f0
                + (s3 - 2.0 * s2 + s) * h * d0
                + (-2.0 * s3 + 3.0 * s2) * f1
                + (s3 - s2) * h * d1,
        );
    }
    Ok((total, out))
}

/// The self-similar curvature families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolitonKind {
    /// `φ ≡ const` with `φ² = −(9a+ε)/2`.
    Constant,
    /// `φ = −3/(ξ−ξ₀)` (the `9a+ε = 0` family).
    Reciprocal,
    /// `φ = A tan(A(ξ−ξ₀)/3)`; the cotangent branch is the same family
    /// shifted by half a period, so classification reports `Tan`.
    Tan,
    /// `φ = −A cot(A(ξ−ξ₀)/3)`.
    Cot,
    /// `φ = −A tanh(A(ξ−ξ₀)/3)` (`|φ| < A`).
    Tanh,
    /// `φ = −A coth(A(ξ−ξ₀)/3)` (`|φ| > A`).
    Coth,
}

/// A classified soliton profile: `C_t = C_{ξ²} = a(C−P) + f(ξ)C_ξ`.
#[derive(Debug, Clone, Copy)]
pub struct SolitonFamily {
    /// Functional family of the curvature profile.
    pub kind: SolitonKind,
    /// Motion constant `a` (negative: shrinking; positive: expanding).
    pub a: f64,
    /// Amplitude `A = √(|9a+ε|/2)` (the constant family stores `|φ|`).
    pub amplitude: f64,
}

/// Outcome of soliton classification.
#[derive(Debug, Clone)]
pub enum SolitonCheck {
    /// The profile solves the soliton equation within [`SOLITON_TOL`].
    Soliton(SolitonFamily),
    /// Best-fit residuals of a rejected profile.
    NotASoliton {
        /// `max |2φ² − 6φ_ξ + 9a + ε|` at the best-fit `a`.
        ode_residual: f64,
        /// `max |φ_{ξ²} − (2/3)φφ_ξ|`.
        stationarity_residual: f64,
    },
}

/// Classify curvature jets (order ≥ 2, sampled away from poles) against
/// the soliton ODE `2φ² − 6φ_ξ + 9a + ε = 0`.
pub fn soliton_classify(phi: &[Jet], eps: f64) -> Result<SolitonCheck> {
    if phi.is_empty() {
        return Err(Error::TooFewSamples { min: 1, got: 0 });
    }
    if eps != 1.0 && eps != -1.0 {
        return Err(Error::InvalidParams {
            what: format!("eps must be ±1, got {eps}"),
        });
    }
    if let Some(bad) = phi.iter().find(|j| j.order() < 2) {
        return Err(Error::InvalidParams {
            what: format!("classification needs φ jets of order ≥ 2, got {}", bad.order()),
        });
    }
    let m = phi.len() as f64;
    let a = -phi
        .iter()
        .map(|j| 2.0 * j.val() * j.val() - 6.0 * j.deriv(1) + eps)
        .sum::<f64>()
        / (9.0 * m);
    let mut ode_res = 0.0f64;
    let mut stat_res = 0.0f64;
    for j in phi {
        let (v, v1, v2) = (j.val(), j.deriv(1), j.deriv(2));
        ode_res = ode_res.max((2.0 * v * v - 6.0 * v1 + 9.0 * a + eps).abs());
        stat_res = stat_res.max((v2 - 2.0 / 3.0 * v * v1).abs());
    }
    if ode_res > SOLITON_TOL || stat_res > SOLITON_TOL {
        return Ok(SolitonCheck::NotASoliton {
            ode_residual: ode_res,
            stationarity_residual: stat_res,
        });
    }
    let mean = phi.iter().map(|j| j.val()).sum::<f64>() / m;
    let spread = phi.iter().map(|j| (j.val() - mean).abs()).fold(0.0f64, f64::max);
    let s = 9.0 * a + eps;
    let family = if spread <= SOLITON_TOL * (1.0 + mean.abs()) {
        SolitonFamily {
            kind: SolitonKind::Constant,
            a,
            amplitude: mean.abs(),
        }
    } else if s.abs() <= 9.0 * SOLITON_TOL {
        SolitonFamily {
            kind: SolitonKind::Reciprocal,
            a,
            amplitude: 0.0,
        }
    } else if s > 0.0 {
        SolitonFamily {
            kind: SolitonKind::Tan,
            a,
            amplitude: (s / 2.0).sqrt(),
        }
    } else {
        let amplitude = (-s / 2.0).sqrt();
        let max_abs = phi.iter().map(|j| j.val().abs()).fold(0.0f64, f64::max);
        SolitonFamily {
            kind: if max_abs < amplitude { SolitonKind::Tanh } else { SolitonKind::Coth },
            a,
            amplitude,
        }
    };
    Ok(SolitonCheck::Soliton(family))
}

/// The five closed-form soliton curves, exactly as displayed, with their
/// exact velocities.
#[derive(Debug, Clone)]
pub enum ExplicitSoliton {
    /// `C(θ,t) = e^{−t/9}(a₀cosθ, b₀sinθ) + center`; shrinking, `φ ≡ 0`,
    /// `ε = +1`.
    ShrinkingEllipse {
        /// Semi-axis along x.
        a0: f64,
        /// Semi-axis along y.
        b0: f64,
        /// Fixed point of the homothety.
        center: [f64; 2],
    },
    /// `C(θ,t) = e^{t/9}(a₀coshθ, b₀sinhθ) + center`; expanding, `φ ≡ 0`,
    /// `ε = −1`.
    ExpandingHyperbola {
        /// Transverse semi-axis.
        a0: f64,
        /// Conjugate semi-axis.
        b0: f64,
        /// Fixed point of the homothety.
        center: [f64; 2],
    },
    /// `C(θ,t) = eᵗ(2θ, 2tθ + θ logθ) + center` on `θ > 0`; constant
    /// curvature of magnitude 2, `ε = +1`.
    LogarithmicGraph {
        /// Translation of the display.
        center: [f64; 2],
    },
    /// `C(θ,t) = (θe^{t/q}, θ^α e^{α²t/q}) + center` on `θ > 0` with
    /// `q = |2α² − 5α + 2|` and `α ∉ {0, 1/2, 1, 2}`.
    PowerCurve {
        /// Exponent of the power curve `y = x^α`.
        alpha: f64,
        /// Translation of the display.
        center: [f64; 2],
    },
    /// `C(θ,t) = e^{αθ+ρt}(sin(θ+ωt), −cos(θ+ωt))` with `α = 3tanβ`,
    /// `ρ = (α²−1)/(α²+9)`, `ω = 2α/(α²+9)`, `β ∈ (0, π/2)`; constant
    /// curvature of magnitude `2sinβ`, `ε = +1`.
    LogarithmicSpiral {
        /// Pitch parameter of the spiral.
        beta: f64,
    },
}

impl ExplicitSoliton {
    /// Shrinking-ellipse soliton.
    pub fn shrinking_ellipse(a0: f64, b0: f64, center: [f64; 2]) -> Result<Self> {
        if !(a0 > 0.0 && b0 > 0.0) {
            return Err(Error::InvalidParams {
                what: format!("ellipse soliton needs positive semi-axes, got ({a0}, {b0})"),
            });
        }
        Ok(ExplicitSoliton::ShrinkingEllipse { a0, b0, center })
    }

    /// Expanding-hyperbola soliton.
    pub fn expanding_hyperbola(a0: f64, b0: f64, center: [f64; 2]) -> Result<Self> {
        if !(a0 > 0.0 && b0 > 0.0) {
            return Err(Error::InvalidParams {
                what: format!("hyperbola soliton needs positive semi-axes, got ({a0}, {b0})"),
            });
        }
        Ok(ExplicitSoliton::ExpandingHyperbola { a0, b0, center })
    }

    /// Logarithmic-graph soliton.
    pub fn logarithmic_graph(center: [f64; 2]) -> Self {
        ExplicitSoliton::LogarithmicGraph { center }
    }

    /// Power-curve soliton; `alpha` must avoid `{0, 1/2, 1, 2}`.
    pub fn power_curve(alpha: f64, center: [f64; 2]) -> Result<Self> {
        for bad in [0.0, 0.5, 1.0, 2.0] {
            if (alpha - bad).abs() < 1e-9 {
                return Err(Error::InvalidParams {
                    what: format!("power soliton needs α ∉ {{0, 1/2, 1, 2}}, got {alpha}"),
                });
            }
        }
        if !alpha.is_finite() {
            return Err(Error::InvalidParams {
                what: format!("power soliton exponent must be finite, got {alpha}"),
            });
        }
        Ok(ExplicitSoliton::PowerCurve { alpha, center })
    }

    /// Logarithmic-spiral soliton; `beta ∈ (0, π/2)` strictly.
    pub fn logarithmic_spiral(beta: f64) -> Result<Self> {
        if !(beta > 1e-9 && beta < PI / 2.0 - 1e-9) {
            return Err(Error::InvalidParams {
                what: format!("spiral soliton needs β ∈ (0, π/2), got {beta}"),
            });
        }
        Ok(ExplicitSoliton::LogarithmicSpiral { beta })
    }

    /// Scale factor `q = |2α² − 5α + 2|` of the power soliton.
    fn power_q(alpha: f64) -> f64 {
        (2.0 * alpha * alpha - 5.0 * alpha + 2.0).abs()
    }

    /// Short human-readable label.
    pub fn label(&self) -> &'static str {
        match self {
            ExplicitSoliton::ShrinkingEllipse { .. } => "shrinking ellipse",
            ExplicitSoliton::ExpandingHyperbola { .. } => "expanding hyperbola",
            ExplicitSoliton::LogarithmicGraph { .. } => "logarithmic graph",
            ExplicitSoliton::PowerCurve { .. } => "power curve",
            ExplicitSoliton::LogarithmicSpiral { .. } => "logarithmic spiral",
        }
    }

    /// Motion constant `a` of the soliton equation
    /// `C_{ξ²} = a(C−P) + f(ξ)C_ξ`; equals `−(2φ² + ε)/9` for these
    /// constant-curvature profiles.
    pub fn motion_constant(&self) -> f64 {
        let phi = self.curvature();
        -(2.0 * phi * phi + self.eps()) / 9.0
    }

    /// Magnitude of the constant fully affine curvature of the profile.
    pub fn curvature(&self) -> f64 {
        match *self {
            ExplicitSoliton::ShrinkingEllipse { .. } => 0.0,
            ExplicitSoliton::ExpandingHyperbola { .. } => 0.0,
            ExplicitSoliton::LogarithmicGraph { .. } => 2.0,
            ExplicitSoliton::PowerCurve { alpha, .. } => {
                (alpha + 1.0).abs()
                    / ((alpha - 2.0).abs() * (2.0 * alpha - 1.0).abs()).sqrt()
            }
            ExplicitSoliton::LogarithmicSpiral { beta } => 2.0 * beta.sin(),
        }
    }

    /// Sign of the fully affine metric along the curve.
    pub fn eps(&self) -> f64 {
        match *self {
            ExplicitSoliton::ShrinkingEllipse { .. } => 1.0,
            ExplicitSoliton::ExpandingHyperbola { .. } => -1.0,
            ExplicitSoliton::LogarithmicGraph { .. } => 1.0,
            ExplicitSoliton::PowerCurve { alpha, .. } => {
                -((2.0 * alpha - 1.0) * (alpha - 2.0)).signum()
            }
            ExplicitSoliton::LogarithmicSpiral { .. } => 1.0,
        }
    }

    /// The soliton curve at time `t`.
    pub fn curve_at(&self, t: f64) -> Result<AnalyticCurve> {
        match *self {
            ExplicitSoliton::ShrinkingEllipse { a0, b0, center } => {
                let s = (-t / 9.0).exp();
                Ok(plane_curve(
                    format!("shrinking-ellipse({a0},{b0})@{t}"),
                    (0.0, TAU),
                    true,
                    move |th| {
                        Ok([
                            th.cos().scale(s * a0).add_const(center[0]),
                            th.sin().scale(s * b0).add_const(center[1]),
                        ])
                    },
                ))
            }
            ExplicitSoliton::ExpandingHyperbola { a0, b0, center } => {
                let s = (t / 9.0).exp();
                Ok(plane_curve(
                    format!("expanding-hyperbola({a0},{b0})@{t}"),
                    (-1.5, 1.5),
                    false,
                    move |th| {
                        Ok([
                            th.cosh().scale(s * a0).add_const(center[0]),
                            th.sinh().scale(s * b0).add_const(center[1]),
                        ])
                    },
                ))
            }
            ExplicitSoliton::LogarithmicGraph { center } => {
                let s = t.exp();
                Ok(plane_curve(
                    format!("logarithmic-graph@{t}"),
                    (0.5, 2.5),
                    false,
                    move |th| {
                        let x = th.scale(2.0 * s).add_const(center[0]);
                        let y = th
                            .scale(2.0 * t)
                            .add(&th.mul(&th.ln()?))
                            .scale(s)
                            .add_const(center[1]);
                        Ok([x, y])
                    },
                ))
            }
            ExplicitSoliton::PowerCurve { alpha, center } => {
                let q = Self::power_q(alpha);
                let sx = (t / q).exp();
                let sy = (alpha * alpha * t / q).exp();
                Ok(plane_curve(
                    format!("power-soliton({alpha})@{t}"),
                    (0.5, 2.5),
                    false,
                    move |th| {
                        Ok([
                            th.scale(sx).add_const(center[0]),
                            th.powf(alpha)?.scale(sy).add_const(center[1]),
                        ])
                    },
                ))
            }
            ExplicitSoliton::LogarithmicSpiral { beta } => {
                let alpha = 3.0 * beta.tan();
                let rho = (alpha * alpha - 1.0) / (alpha * alpha + 9.0);
                let omega = 2.0 * alpha / (alpha * alpha + 9.0);
                Ok(plane_curve(
                    format!("spiral-soliton({beta})@{t}"),
                    (0.0, TAU),
                    false,
                    move |th| {
                        let amp = th.scale(alpha).add_const(rho * t).exp();
                        let phase = th.add_const(omega * t);
                        Ok([amp.mul(&phase.sin()), amp.mul(&phase.cos()).neg()])
                    },
                ))
            }
        }
    }

    /// Exact velocity `∂_t C(θ, t)` of the display at parameter `p`.
    pub fn velocity(&self, p: f64, t: f64) -> Vec<f64> {
        match *self {
            ExplicitSoliton::ShrinkingEllipse { a0, b0, .. } => {
                let s = (-t / 9.0).exp() / 9.0;
                vec![-s * a0 * p.cos(), -s * b0 * p.sin()]
            }
            ExplicitSoliton::ExpandingHyperbola { a0, b0, .. } => {
                let s = (t / 9.0).exp() / 9.0;
                vec![s * a0 * p.cosh(), s * b0 * p.sinh()]
            }
            ExplicitSoliton::LogarithmicGraph { .. } => {
                let s = t.exp();
                vec![2.0 * p * s, s * (2.0 * t * p + p * p.ln() + 2.0 * p)]
            }
            ExplicitSoliton::PowerCurve { alpha, .. } => {
                let q = Self::power_q(alpha);
                vec![
                    (t / q).exp() * p / q,
                    alpha * alpha * (alpha * alpha * t / q).exp() * p.powf(alpha) / q,
                ]
            }
            ExplicitSoliton::LogarithmicSpiral { beta } => {
                let alpha = 3.0 * beta.tan();
                let rho = (alpha * alpha - 1.0) / (alpha * alpha + 9.0);
                let omega = 2.0 * alpha / (alpha * alpha + 9.0);
                let amp = (alpha * p + rho * t).exp();
                let phase = p + omega * t;
                vec![
                    rho * amp * phase.sin() + omega * amp * phase.cos(),
                    -rho * amp * phase.cos() + omega * amp * phase.sin(),
                ]
            }
        }
    }
}

/// Verify that an explicit soliton satisfies the heat evolution
/// `C_t = C_{ξ²}`: maximum over probe points of the velocity mismatch,
/// relative to the curve scale.
pub fn verify_soliton_flow(soliton: &ExplicitSoliton, t: f64, probes: usize) -> Result<f64> {
    if probes < 2 {
        return Err(Error::TooFewSamples { min: 2, got: probes });
    }
    let curve = soliton.curve_at(t)?;
    let (lo, hi) = curve.domain();
    let closed = curve.is_closed();
    let mut worst = 0.0f64;
    let mut scale = 1.0f64;
    for i in 0..probes {
        let frac = if closed {
            i as f64 / probes as f64
        } else {
            i as f64 / (probes - 1) as f64
        };
        let p = lo + (hi - lo) * frac;
        let jet = curve.jet(p, 6)?;
        let ga = plane_ga_jets(&jet, p)?;
        let accel = ga.c_xi2.val();
        let vel = soliton.velocity(p, t);
        for (a, v) in accel.iter().zip(&vel) {
            worst = worst.max((a - v).abs());
        }
        for c in jet.val() {
            scale = scale.max(c.abs());
        }
    }
    Ok(worst / scale)
}
