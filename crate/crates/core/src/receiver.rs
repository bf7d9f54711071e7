//! Receiver node: occupancy under parameter, distance and transmitter noise,
//! and the moments of the activated-receptor count `Y`.

use crate::channel::{saturation_concentration, transmitter_noise_variance, ChannelParams};
use crate::error::{ensure, Error, Result};
use crate::kinetics::{concentration_for_probability, steady_binding_probability};
use crate::transmitter::NodeParams;

/// Occupancy at the receiver and its first-order sensitivity to each noise
/// source. Every coefficient has magnitude `p0(1 - p0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entrapment {
    pub p0: f64,
    /// Coefficient on `εγ/γ`.
    pub gamma: f64,
    /// Coefficient on `εκ/κ`.
    pub kappa: f64,
    /// Coefficient on `εr/r0`.
    pub distance: f64,
    /// Coefficient on `εt`.
    pub transmitter: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverMoments {
    pub p0: f64,
    pub mean: f64,
    pub variance: f64,
    /// Relative noise used for `variance`, including `σt²` when the
    /// transmitter term was requested.
    pub sigma0_sq: f64,
}

/// `Var(Y)` split by conditioning on the distance error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceDecomposition {
    /// `E(Var(Y | εr))`: the per-bacterium rate-constant noise.
    pub within: f64,
    /// `Var(E(Y | εr))`: the distance noise.
    pub between: f64,
}

impl VarianceDecomposition {
    pub fn total(&self) -> f64 {
        self.within + self.between
    }
}

/// `σγ²/γ² + σκ²/κ² + σr²/r0²`.
pub fn sigma0_sq(node: &NodeParams, ch: &ChannelParams) -> f64 {
    node.relative_noise() + ch.relative_distance_noise()
}

pub fn receiver_entrapment(a0: f64, node: &NodeParams) -> Result<Entrapment> {
    let p0 = steady_binding_probability(a0, &node.kinetics)?;
    let c = p0 * (1.0 - p0);
    Ok(Entrapment {
        p0,
        gamma: c,
        kappa: -c,
        distance: -c,
        transmitter: c,
    })
}

fn check_probability(p0: f64) -> Result<()> {
    ensure((0.0..=1.0).contains(&p0), "p0", p0, "0 <= p0 <= 1")
}

/// `n·N²·p0²(1-p0)²`, the variance per unit relative noise.
fn variance_scale(p0: f64, node: &NodeParams) -> f64 {
    let big_n = node.kinetics.receptors as f64;
    let pq = p0 * (1.0 - p0);
    node.bacteria as f64 * big_n * big_n * pq * pq
}

pub fn variance_decomposition(
    p0: f64,
    node: &NodeParams,
    ch: &ChannelParams,
) -> Result<VarianceDecomposition> {
    check_probability(p0)?;
    let scale = variance_scale(p0, node);
    Ok(VarianceDecomposition {
        within: scale * node.relative_noise(),
        between: scale * ch.relative_distance_noise(),
    })
}

/// `σt²` for the transmitter state that produces occupancy `p0` at the
/// receiver.
pub fn transmitter_noise_at(p0: f64, node: &NodeParams, ch: &ChannelParams) -> Result<f64> {
    check_probability(p0)?;
    let a0 = concentration_for_probability(p0, &node.kinetics)?;
    let a_sat = saturation_concentration(node, ch);
    if a0 >= a_sat {
        return Err(Error::Saturated {
            requested: a0,
            limit: a_sat,
        });
    }
    Ok(transmitter_noise_variance(a0 / a_sat, node))
}

pub fn receiver_moments(
    p0: f64,
    node: &NodeParams,
    ch: &ChannelParams,
    include_transmitter_noise: bool,
) -> Result<ReceiverMoments> {
    let parts = variance_decomposition(p0, node, ch)?;
    let mut sigma = sigma0_sq(node, ch);
    let mut variance = parts.total();
    if include_transmitter_noise {
        let st = transmitter_noise_at(p0, node, ch)?;
        sigma += st;
        variance += variance_scale(p0, node) * st;
    }
    Ok(ReceiverMoments {
        p0,
        mean: node.total_receptors() * p0,
        variance,
        sigma0_sq: sigma,
    })
}

/// `E(Y)/sqrt(Var(Y)) = sqrt(n) / ((1 - p0)·σ0)`.
///
/// Infinite when `p0 = 1` or `σ0 = 0`.
pub fn snr_ratio(p0: f64, node: &NodeParams, sigma0_sq: f64) -> Result<f64> {
    check_probability(p0)?;
    ensure(sigma0_sq >= 0.0, "sigma0_sq", sigma0_sq, ">= 0")?;
    if p0 == 1.0 || sigma0_sq == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(libm::sqrt(node.bacteria as f64) / ((1.0 - p0) * libm::sqrt(sigma0_sq)))
}
