//! Single-bacterium ligand binding and the two-stage expression cascade.
//!
//! Concentrations are in nM and time is in minutes throughout this module.

use crate::error::{ensure, Error, Result};

/// Rate constants of one bacterium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticParams {
    /// Input gain, nM⁻¹·min⁻¹.
    pub gamma: f64,
    /// Dissociation rate of bound ligand, min⁻¹.
    pub kappa: f64,
    /// Basal transcription term, min⁻¹.
    pub a0: f64,
    /// Second-stage production gain, min⁻¹.
    pub a1: f64,
    /// Occupancy-driven transcription gain, min⁻¹.
    pub b0: f64,
    /// First-stage decay rate, min⁻¹. May be `f64::INFINITY`.
    pub b1: f64,
    /// Second-stage decay rate, min⁻¹. May be `f64::INFINITY`.
    pub b2: f64,
    /// Signal output per activated receptor, nM·cm³/s.
    pub alpha: f64,
    /// Ligand receptors per bacterium.
    pub receptors: u32,
}

/// Output per activated receptor used when none is configured.
///
/// Places the transmitter saturation concentration at the receiver,
/// `alpha·n·N / (4πD r0)`, at 800 nM for n = 100, N = 50,
/// D = 1e-5 cm²/s and r0 = 50 µm; the transmitter then sits at half
/// occupancy when the receiver sees 400 nM.
pub const DEFAULT_ALPHA: f64 = 800.0 * 4.0 * core::f64::consts::PI * 1e-5 * 50e-4 / 5000.0;

impl Default for KineticParams {
    fn default() -> Self {
        Self {
            gamma: 4e-4,
            kappa: 0.1,
            a0: 1.0,
            a1: 1.0,
            b0: 1.0,
            b1: 1.0 / 60.0,
            b2: 0.1,
            alpha: DEFAULT_ALPHA,
            receptors: 50,
        }
    }
}

impl KineticParams {
    pub fn validate(&self) -> Result<()> {
        ensure(self.gamma > 0.0 && self.gamma.is_finite(), "gamma", self.gamma, "> 0")?;
        ensure(self.kappa > 0.0 && self.kappa.is_finite(), "kappa", self.kappa, "> 0")?;
        ensure(self.b1 > 0.0, "b1", self.b1, "> 0")?;
        ensure(self.b2 > 0.0, "b2", self.b2, "> 0")?;
        ensure(self.a0 >= 0.0, "a0", self.a0, ">= 0")?;
        ensure(self.a1 >= 0.0, "a1", self.a1, ">= 0")?;
        ensure(self.b0 >= 0.0, "b0", self.b0, ">= 0")?;
        ensure(self.alpha >= 0.0 && self.alpha.is_finite(), "alpha", self.alpha, ">= 0")?;
        ensure(self.receptors >= 1, "receptors", self.receptors as f64, ">= 1")
    }

    /// `a1·b0 / (N·b1·b2)`: the per-receptor output implied by the
    /// cascade's steady-state gain.
    pub fn cascade_alpha(&self) -> f64 {
        self.a1 * self.b0 / (self.receptors as f64 * self.b1 * self.b2)
    }

    /// Replaces `alpha` with [`cascade_alpha`](Self::cascade_alpha).
    pub fn with_cascade_alpha(mut self) -> Self {
        self.alpha = self.cascade_alpha();
        self
    }

    /// Binding relaxation rate `Aγ + κ` at concentration `a`, min⁻¹.
    pub fn binding_rate(&self, a: f64) -> f64 {
        a * self.gamma + self.kappa
    }
}

/// Steady-state receptor occupancy `Aγ / (Aγ + κ)`.
pub fn steady_binding_probability(a: f64, k: &KineticParams) -> Result<f64> {
    ensure(a >= 0.0, "concentration", a, ">= 0")?;
    if a.is_infinite() {
        return Ok(1.0);
    }
    let ag = a * k.gamma;
    Ok(ag / (ag + k.kappa))
}

/// Concentration giving occupancy `p`; the inverse of
/// [`steady_binding_probability`]. Infinite at `p = 1`.
pub fn concentration_for_probability(p: f64, k: &KineticParams) -> Result<f64> {
    ensure((0.0..=1.0).contains(&p), "probability", p, "0 <= p <= 1")?;
    if p == 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(k.kappa * p / (k.gamma * (1.0 - p)))
}

/// Occupancy at time `t` (min) after a constant concentration is applied to
/// a receptor population starting at `p_init`.
pub fn binding_transient(a: f64, k: &KineticParams, p_init: f64, t: f64) -> Result<f64> {
    ensure((0.0..=1.0).contains(&p_init), "p_init", p_init, "0 <= p <= 1")?;
    ensure(t >= 0.0, "t", t, ">= 0")?;
    let p_star = steady_binding_probability(a, k)?;
    if t.is_infinite() {
        return Ok(p_star);
    }
    Ok(p_star + (p_init - p_star) * libm::exp(-k.binding_rate(a) * t))
}

/// Steady GFP level `a1(b0·p + a0) / (b1·b2)` in arbitrary units.
pub fn gfp_steady(p_star: f64, k: &KineticParams) -> Result<f64> {
    ensure((0.0..=1.0).contains(&p_star), "p_star", p_star, "0 <= p <= 1")?;
    Ok(k.a1 * (k.b0 * p_star + k.a0) / (k.b1 * k.b2))
}

/// Cascade levels `(S1, S2)` at time `t` (min) from zero initial conditions
/// under constant occupancy `p`.
///
/// Uses the distinct-poles solution written with `expm1`, which stays exact
/// as `b2 → b1`, and the confluent `t·e^{-bt}` form when they coincide.
pub fn expression_transient(p: f64, k: &KineticParams, t: f64) -> Result<(f64, f64)> {
    check_expression_args(p, k, t)?;
    let drive = k.b0 * p + k.a0;
    let s1 = drive / k.b1 * -libm::expm1(-k.b1 * t);
    let s2 = k.a1 * drive / k.b1 * (-libm::expm1(-k.b2 * t) / k.b2 - pole_difference(k.b1, k.b2, t));
    Ok((s1, s2))
}

/// The textbook distinct-poles solution without the confluent fallback.
///
/// Fails with [`Error::DegenerateRates`] when `b1 == b2`.
pub fn expression_transient_distinct(p: f64, k: &KineticParams, t: f64) -> Result<(f64, f64)> {
    check_expression_args(p, k, t)?;
    if k.b1 == k.b2 {
        return Err(Error::DegenerateRates { rate: k.b1 });
    }
    let drive = k.b0 * p + k.a0;
    let (e1, e2) = (libm::exp(-k.b1 * t), libm::exp(-k.b2 * t));
    let s1 = drive / k.b1 * (1.0 - e1);
    let s2 = k.a1 * drive / k.b1 * ((1.0 - e2) / k.b2 - (e1 - e2) / (k.b2 - k.b1));
    Ok((s1, s2))
}

fn check_expression_args(p: f64, k: &KineticParams, t: f64) -> Result<()> {
    ensure((0.0..=1.0).contains(&p), "p", p, "0 <= p <= 1")?;
    ensure(t >= 0.0 && t.is_finite(), "t", t, "finite, >= 0")?;
    ensure(k.b1 > 0.0 && k.b1.is_finite(), "b1", k.b1, "finite, > 0")?;
    ensure(k.b2 > 0.0 && k.b2.is_finite(), "b2", k.b2, "finite, > 0")
}

/// `(e^{-b1 t} - e^{-b2 t}) / (b2 - b1)`, limit `t·e^{-b1 t}` at `b1 = b2`.
fn pole_difference(b1: f64, b2: f64, t: f64) -> f64 {
    let d = b2 - b1;
    if d == 0.0 {
        return t * libm::exp(-b1 * t);
    }
    libm::exp(-b1 * t) * -libm::expm1(-d * t) / d
}
