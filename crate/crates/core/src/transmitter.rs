//! Transmitter node: noisy receptor occupancy across `n` bacteria and the
//! moments of the total activated-receptor count `X`.

use crate::error::{ensure, Result};
use crate::kinetics::{steady_binding_probability, KineticParams};

/// Relative parameter noise above which the first-order expansions are
/// flagged as unreliable.
pub const FIRST_ORDER_WARN_LEVEL: f64 = 0.5;

/// A chamber of `n` identical-on-average bacteria.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeParams {
    pub bacteria: u32,
    /// Variance of the additive noise on γ, (nM⁻¹·min⁻¹)².
    pub sigma_gamma_sq: f64,
    /// Variance of the additive noise on κ, min⁻².
    pub sigma_kappa_sq: f64,
    pub kinetics: KineticParams,
}

impl NodeParams {
    /// Node whose γ and κ noise each contribute `relative_share` to the
    /// relative noise `σγ²/γ² + σκ²/κ²`.
    pub fn with_relative_noise(bacteria: u32, kinetics: KineticParams, relative_share: f64) -> Self {
        Self {
            bacteria,
            sigma_gamma_sq: relative_share * kinetics.gamma * kinetics.gamma,
            sigma_kappa_sq: relative_share * kinetics.kappa * kinetics.kappa,
            kinetics,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kinetics.validate()?;
        ensure(self.bacteria >= 1, "bacteria", self.bacteria as f64, ">= 1")?;
        ensure(self.sigma_gamma_sq >= 0.0, "sigma_gamma_sq", self.sigma_gamma_sq, ">= 0")?;
        ensure(self.sigma_kappa_sq >= 0.0, "sigma_kappa_sq", self.sigma_kappa_sq, ">= 0")
    }

    /// `σγ²/γ² + σκ²/κ²`.
    pub fn relative_noise(&self) -> f64 {
        let k = &self.kinetics;
        self.sigma_gamma_sq / (k.gamma * k.gamma) + self.sigma_kappa_sq / (k.kappa * k.kappa)
    }

    /// True while the relative noise is small enough for the first-order
    /// noise expansions.
    pub fn in_first_order_regime(&self) -> bool {
        self.relative_noise() <= FIRST_ORDER_WARN_LEVEL
    }

    /// `n·N`, the receptor count of the whole node.
    pub fn total_receptors(&self) -> f64 {
        self.bacteria as f64 * self.kinetics.receptors as f64
    }
}

/// Moments of the activated-receptor count `X`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputMoments {
    pub mean: f64,
    /// `n·N²·p²(1-p)²·(σγ²/γ² + σκ²/κ²)`; the Bernoulli term is dropped.
    pub variance: f64,
    /// Full first-order variance with the Bernoulli term and `N² - N`.
    pub exact_variance: f64,
}

/// Noise-free occupancy `A_s γ / (A_s γ + κ)` at the transmitter.
pub fn noiseless_entrapment(a_s: f64, node: &NodeParams) -> Result<f64> {
    steady_binding_probability(a_s, &node.kinetics)
}

pub fn transmitter_moments(a_s: f64, node: &NodeParams) -> Result<OutputMoments> {
    let p = noiseless_entrapment(a_s, node)?;
    Ok(moments_at_probability(p, node))
}

pub(crate) fn moments_at_probability(p: f64, node: &NodeParams) -> OutputMoments {
    let n = node.bacteria as f64;
    let big_n = node.kinetics.receptors as f64;
    let rel = node.relative_noise();
    let pq = p * (1.0 - p);
    OutputMoments {
        mean: n * big_n * p,
        variance: n * big_n * big_n * pq * pq * rel,
        exact_variance: n * big_n * pq + n * (big_n * big_n - big_n) * pq * pq * rel,
    }
}

/// Mean and variance of the emitted signal rate `αX`.
pub fn output_rate_stats(a_s: f64, node: &NodeParams) -> Result<(f64, f64)> {
    let m = transmitter_moments(a_s, node)?;
    let alpha = node.kinetics.alpha;
    Ok((alpha * m.mean, alpha * alpha * m.variance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn node(n: u32, rel_total: f64) -> NodeParams {
        NodeParams::with_relative_noise(n, KineticParams::default(), rel_total / 2.0)
    }

    #[test]
    fn entrapment_examples() {
        let nd = node(100, 0.1);
        assert_eq!(noiseless_entrapment(0.0, &nd).unwrap(), 0.0);
        assert!((noiseless_entrapment(250.0, &nd).unwrap() - 0.5).abs() < 1e-15);
        assert!((noiseless_entrapment(100.0, &nd).unwrap() - 0.285_714).abs() < 1e-6);
        assert!(noiseless_entrapment(-1.0, &nd).is_err());
    }

    #[test]
    fn moments_examples() {
        let nd = node(100, 0.1);
        let m = transmitter_moments(250.0, &nd).unwrap();
        assert!((m.mean - 2500.0).abs() < 1e-9);
        assert!((m.variance - 1562.5).abs() < 1e-9);
        let zero = transmitter_moments(0.0, &nd).unwrap();
        assert_eq!((zero.mean, zero.variance), (0.0, 0.0));
        let full = transmitter_moments(f64::INFINITY, &nd).unwrap();
        assert_eq!(full.variance, 0.0);
    }

    #[test]
    fn rate_scaling() {
        let mut nd = node(100, 0.1);
        nd.kinetics.alpha = 0.0;
        assert_eq!(output_rate_stats(250.0, &nd).unwrap(), (0.0, 0.0));
        nd.kinetics.alpha = 1.0;
        let m = transmitter_moments(250.0, &nd).unwrap();
        assert_eq!(output_rate_stats(250.0, &nd).unwrap(), (m.mean, m.variance));
        nd.kinetics.alpha = 2.0;
        let (mean, var) = output_rate_stats(250.0, &nd).unwrap();
        assert!((mean - 5000.0).abs() < 1e-9 && (var - 6250.0).abs() < 1e-9);
    }

    #[test]
    fn regime_flag() {
        assert!(node(100, 0.1).in_first_order_regime());
        assert!(!node(100, 0.8).in_first_order_regime());
    }

    proptest! {
        #[test]
        fn dropped_terms_match_expansion(
            p in 0.0f64..1.0,
            n in 1u32..500,
            receptors in 1u32..500,
            rel in 0.0f64..1.0,
        ) {
            let mut nd = node(n, rel);
            nd.kinetics.receptors = receptors;
            let m = moments_at_probability(p, &nd);
            let (nf, bn, pq) = (n as f64, receptors as f64, p * (1.0 - p));
            let expected = nf * bn * pq * (1.0 - pq * nd.relative_noise());
            let diff = m.exact_variance - m.variance;
            prop_assert!((diff - expected).abs() <= 1e-9 * (m.exact_variance.abs() + m.variance.abs() + 1.0));
            prop_assert!(m.variance >= 0.0);
            prop_assert!(m.exact_variance >= m.variance - nf * bn * 0.25);
            if pq > 0.0 && pq * nd.relative_noise() < 1.0 {
                prop_assert!(m.exact_variance >= m.variance);
            }
        }

        #[test]
        fn mean_monotone(a in 0.0f64..1e5, d in 1e-2f64..1e3) {
            let nd = node(100, 0.1);
            prop_assert!(transmitter_moments(a, &nd).unwrap().mean < transmitter_moments(a + d, &nd).unwrap().mean);
        }
    }
}
