//! Free-space 3-D diffusion from a point source.
//!
//! Distances are in cm, time in seconds, diffusion coefficients in cm²/s and
//! concentrations in nM. Use [`um_to_cm`] at the interface.

use core::f64::consts::PI;

use crate::error::{ensure, Error, Result};
use crate::special::erfc;
use crate::transmitter::{noiseless_entrapment, NodeParams};

/// Relative distance variance above which the first-order channel noise
/// model is flagged.
pub const DISTANCE_WARN_LEVEL: f64 = 0.25;

#[inline]
pub fn um_to_cm(um: f64) -> f64 {
    um * 1e-4
}

#[inline]
pub fn cm_to_um(cm: f64) -> f64 {
    cm * 1e4
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Diffusion coefficient, cm²/s.
    pub diffusion: f64,
    /// Nominal transmitter–receiver distance, cm.
    pub r0: f64,
    /// Variance of the distance error, cm².
    pub sigma_r_sq: f64,
    /// Emission pulse length, s. Infinite for a constant source.
    pub pulse_duration: f64,
}

impl Default for ChannelParams {
    /// Water-like diffusion, 50 µm separation, no distance error.
    fn default() -> Self {
        Self {
            diffusion: 1e-5,
            r0: um_to_cm(50.0),
            sigma_r_sq: 0.0,
            pulse_duration: f64::INFINITY,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        ensure(self.diffusion > 0.0 && self.diffusion.is_finite(), "diffusion", self.diffusion, "> 0")?;
        ensure(self.r0 > 0.0 && self.r0.is_finite(), "r0", self.r0, "> 0")?;
        ensure(self.sigma_r_sq >= 0.0, "sigma_r_sq", self.sigma_r_sq, ">= 0")?;
        ensure(self.pulse_duration > 0.0, "pulse_duration", self.pulse_duration, "> 0")
    }

    /// `σr² / r0²`.
    pub fn relative_distance_noise(&self) -> f64 {
        self.sigma_r_sq / (self.r0 * self.r0)
    }

    pub fn in_first_order_regime(&self) -> bool {
        self.relative_distance_noise() <= DISTANCE_WARN_LEVEL
    }

    /// `4πD·r`, the steady-state dilution at distance `r`.
    fn dilution(&self, r: f64) -> f64 {
        4.0 * PI * self.diffusion * r
    }
}

/// Statistics of the steady concentration seen by the receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverConcentrationStats {
    /// Mean concentration `A0`, nM.
    pub mean: f64,
    /// Relative variance of the transmitter-noise factor `εt`.
    pub sigma_t_sq: f64,
    /// `σr² / r0²`.
    pub sigma_r_rel_sq: f64,
}

/// Green's function of the 3-D diffusion equation.
pub fn green_impulse(r: f64, t: f64, ch: &ChannelParams) -> Result<f64> {
    ensure(t > 0.0, "t", t, "> 0")?;
    ensure(r >= 0.0, "r", r, ">= 0")?;
    let four_dt = 4.0 * ch.diffusion * t;
    Ok(libm::exp(-r * r / four_dt) / libm::pow(PI * four_dt, 1.5))
}

/// Concentration at distance `r` and time `t` for a source emitting at rate
/// `beta` over `[0, pulse_duration)`.
pub fn step_response(r: f64, t: f64, beta: f64, ch: &ChannelParams) -> Result<f64> {
    ensure(r > 0.0, "r", r, "> 0")?;
    ensure(t >= 0.0, "t", t, ">= 0")?;
    let steady = beta / ch.dilution(r);
    let on = erfc(r / libm::sqrt(4.0 * ch.diffusion * t));
    if t < ch.pulse_duration {
        return Ok(steady * on);
    }
    let off = erfc(r / libm::sqrt(4.0 * ch.diffusion * (t - ch.pulse_duration)));
    Ok(steady * (on - off))
}

/// `beta / (4πD r)`.
pub fn steady_concentration(beta: f64, r: f64, ch: &ChannelParams) -> Result<f64> {
    ensure(r > 0.0, "r", r, "> 0")?;
    ensure(beta >= 0.0, "beta", beta, ">= 0")?;
    Ok(beta / ch.dilution(r))
}

/// Receiver concentration with every transmitter receptor bound,
/// `α·n·N / (4πD r0)`.
pub fn saturation_concentration(node: &NodeParams, ch: &ChannelParams) -> f64 {
    node.kinetics.alpha * node.total_receptors() / ch.dilution(ch.r0)
}

pub fn receiver_concentration_stats(
    a_s: f64,
    node: &NodeParams,
    ch: &ChannelParams,
) -> Result<ReceiverConcentrationStats> {
    let p_s = noiseless_entrapment(a_s, node)?;
    Ok(ReceiverConcentrationStats {
        mean: saturation_concentration(node, ch) * p_s,
        sigma_t_sq: transmitter_noise_variance(p_s, node),
        sigma_r_rel_sq: ch.relative_distance_noise(),
    })
}

/// `(1 - p_s)² / n · (σγ²/γ² + σκ²/κ²)`.
pub fn transmitter_noise_variance(p_s: f64, node: &NodeParams) -> f64 {
    let q = 1.0 - p_s;
    q * q / node.bacteria as f64 * node.relative_noise()
}

/// Stimulus concentration at the transmitter that makes the mean receiver
/// concentration equal `a0`.
pub fn required_stimulus(a0: f64, node: &NodeParams, ch: &ChannelParams) -> Result<f64> {
    ensure(a0 >= 0.0, "a0", a0, ">= 0")?;
    let a_sat = saturation_concentration(node, ch);
    if a0 >= a_sat {
        return Err(Error::Saturated {
            requested: a0,
            limit: a_sat,
        });
    }
    let k = &node.kinetics;
    Ok(k.kappa * a0 / (k.gamma * (a_sat - a0)))
}
