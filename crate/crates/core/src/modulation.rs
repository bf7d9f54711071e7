//! M-ary signaling on uniformly spaced occupancy levels with hard-decision
//! (nearest level) detection.

use alloc::vec::Vec;
use core::f64::consts::SQRT_2;

use crate::capacity::{
    blahut_arimoto, build_discrete_channel, check_grid, conditional_std, mutual_information,
    p_max_from_amax, uniform_levels,
};
use crate::error::{ensure, Error, Result};
use crate::special::{erfc, Tolerance};
use crate::transmitter::NodeParams;

#[derive(Debug, Clone, PartialEq)]
pub struct MarySpec {
    pub m: usize,
    pub p_max: f64,
    pub levels: Vec<f64>,
    pub weights: Vec<f64>,
}

/// How the endpoint symbols are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Detection {
    /// Every symbol errs when the noise leaves `±h` around it.
    #[default]
    TwoSided,
    /// The two endpoint symbols can only be mistaken on their inner side.
    OneSidedEndpoints,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaryResult {
    pub per_symbol_error: Vec<f64>,
    pub total_error: f64,
    /// Mutual information of the m-input channel under the symbol weights.
    pub rate_bits: f64,
    /// Uncoded symbol rate `log2 m`.
    pub log2m: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaryPoint {
    pub a_max: f64,
    pub spec: MarySpec,
    pub result: MaryResult,
}

impl MarySpec {
    /// Equiprobable symbols.
    pub fn uniform(m: usize, p_max: f64) -> Result<Self> {
        ensure(m >= 2, "m", m as f64, ">= 2")?;
        ensure(p_max > 0.0 && p_max <= 1.0, "p_max", p_max, "0 < p_max <= 1")?;
        Ok(Self {
            m,
            p_max,
            levels: uniform_levels(m, p_max),
            weights: alloc::vec![1.0 / m as f64; m],
        })
    }

    pub fn with_weights(m: usize, p_max: f64, weights: Vec<f64>) -> Result<Self> {
        let mut spec = Self::uniform(m, p_max)?;
        if weights.len() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                found: weights.len(),
            });
        }
        ensure(weights.iter().all(|&w| w >= 0.0), "weight", -1.0, ">= 0")?;
        let sum: f64 = weights.iter().sum();
        ensure((sum - 1.0).abs() <= 1e-9, "weight sum", sum, "1 +- 1e-9")?;
        spec.weights = weights;
        Ok(spec)
    }

    /// Weights from Blahut-Arimoto run on the m-level channel itself.
    pub fn with_ba_weights(
        m: usize,
        p_max: f64,
        node: &NodeParams,
        sigma0_sq: f64,
        k_out: usize,
        tol: Tolerance,
    ) -> Result<Self> {
        let ch = build_discrete_channel(p_max, m, k_out, node, sigma0_sq)?;
        let ba = blahut_arimoto(&ch.matrix, tol)?;
        Self::with_weights(m, p_max, ba.input_distribution)
    }

    /// Half the distance between adjacent levels.
    pub fn half_spacing(&self) -> f64 {
        self.p_max / (2.0 * (self.m - 1) as f64)
    }
}

pub fn symbol_error_probs(
    spec: &MarySpec,
    node: &NodeParams,
    sigma0_sq: f64,
    detection: Detection,
) -> Result<Vec<f64>> {
    ensure(sigma0_sq >= 0.0, "sigma0_sq", sigma0_sq, ">= 0")?;
    let h = spec.half_spacing();
    Ok(spec
        .levels
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let s = conditional_std(p, node, sigma0_sq);
            if s == 0.0 {
                return 0.0;
            }
            let two_sided = erfc(h / (s * SQRT_2));
            let endpoint = i == 0 || i == spec.m - 1;
            match detection {
                Detection::OneSidedEndpoints if endpoint => 0.5 * two_sided,
                _ => two_sided,
            }
        })
        .collect())
}

/// `Σ w_i p_e,i`.
pub fn total_error(spec: &MarySpec, errs: &[f64]) -> Result<f64> {
    if errs.len() != spec.weights.len() {
        return Err(Error::LengthMismatch {
            expected: spec.weights.len(),
            found: errs.len(),
        });
    }
    Ok(spec.weights.iter().zip(errs).map(|(w, e)| w * e).sum())
}

pub fn mary_rate(
    spec: &MarySpec,
    node: &NodeParams,
    sigma0_sq: f64,
    k_out: usize,
    detection: Detection,
) -> Result<MaryResult> {
    let per_symbol_error = symbol_error_probs(spec, node, sigma0_sq, detection)?;
    let total = total_error(spec, &per_symbol_error)?;
    let ch = build_discrete_channel(spec.p_max, spec.m, k_out, node, sigma0_sq)?;
    let rate_bits = mutual_information(&ch.matrix, &spec.weights)?;
    Ok(MaryResult {
        per_symbol_error,
        total_error: total,
        rate_bits,
        log2m: libm::log2(spec.m as f64),
    })
}

/// Error and rate for `m` symbols at each `A_max` of an increasing grid,
/// with weights from Blahut-Arimoto at every point.
pub fn error_vs_amax(
    m: usize,
    grid: &[f64],
    node: &NodeParams,
    sigma0_sq: f64,
    k_out: usize,
    tol: Tolerance,
    detection: Detection,
) -> Result<Vec<MaryPoint>> {
    check_grid(grid)?;
    grid.iter()
        .map(|&a| mary_point(m, a, node, sigma0_sq, k_out, tol, detection))
        .collect()
}

pub fn mary_point(
    m: usize,
    a_max: f64,
    node: &NodeParams,
    sigma0_sq: f64,
    k_out: usize,
    tol: Tolerance,
    detection: Detection,
) -> Result<MaryPoint> {
    let p_max = p_max_from_amax(a_max, &node.kinetics)?;
    let spec = MarySpec::with_ba_weights(m, p_max, node, sigma0_sq, k_out, tol)?;
    let result = mary_rate(&spec, node, sigma0_sq, k_out, detection)?;
    Ok(MaryPoint { a_max, spec, result })
}
