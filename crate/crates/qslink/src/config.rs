//! Experiment configuration.
//!
//! A TOML file of named sections holding `key = value` pairs. Every section
//! and key is optional and falls back to the documented default; unknown
//! sections or keys are rejected.

use std::path::Path;

use qslink_core::capacity::{DEFAULT_INPUT_LEVELS, DEFAULT_OUTPUT_BINS};
use qslink_core::channel::{um_to_cm, ChannelParams, DISTANCE_WARN_LEVEL};
use qslink_core::kinetics::DEFAULT_ALPHA;
use qslink_core::modulation::Detection;
use qslink_core::timing::{DEFAULT_FALL_THRESHOLD, DEFAULT_RISE_THRESHOLD};
use qslink_core::transmitter::FIRST_ORDER_WARN_LEVEL;
use qslink_core::{KineticParams, NodeParams, Tolerance};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::montecarlo::SimConfig;

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub kinetics: KineticsSection,
    pub node: NodeSection,
    pub channel: ChannelSection,
    pub capacity: CapacitySection,
    pub timing: TimingSection,
    pub modulation: ModulationSection,
    pub montecarlo: MonteCarloSection,
    pub validate: ValidateSection,
    pub transient: TransientSection,
    pub response: ResponseSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KineticsSection {
    pub gamma: f64,
    pub kappa: f64,
    pub a0: f64,
    pub a1: f64,
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    /// Output per activated receptor, nM·cm³/s.
    pub alpha: f64,
    /// Use `a1·b0/(N·b1·b2)` instead of `alpha`.
    pub cascade_alpha: bool,
    pub receptors: u32,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NodeSection {
    pub bacteria: u32,
    /// Total relative noise `σγ²/γ² + σκ²/κ² + σr²/r0²`, split evenly over
    /// the three sources unless overridden below.
    pub sigma0_sq: f64,
    /// Absolute variance of γ, (nM⁻¹·min⁻¹)².
    pub sigma_gamma_sq: Option<f64>,
    /// Absolute variance of κ, min⁻².
    pub sigma_kappa_sq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    /// cm²/s.
    pub diffusion: f64,
    pub r0_um: f64,
    /// Absolute distance variance, µm².
    pub sigma_r_sq_um2: Option<f64>,
    /// Emission pulse length for the `channel` dump, s.
    pub pulse_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapacitySection {
    #[serde(rename = "a_max_nM")]
    pub a_max_nm: Vec<f64>,
    pub bacteria: Vec<u32>,
    pub input_levels: usize,
    pub output_bins: usize,
    /// Stop once the capacity bound gap is at most this many bits.
    pub gap_bits: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimingSection {
    pub r_um: Vec<f64>,
    pub bacteria: Vec<u32>,
    #[serde(rename = "a_max_nM")]
    pub a_max_nm: f64,
    /// Concentration at which the binding time constant is evaluated, nM.
    #[serde(rename = "decode_concentration_nM")]
    pub decode_concentration_nm: f64,
    pub rise_threshold: f64,
    pub fall_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModulationSection {
    pub m: Vec<usize>,
    #[serde(rename = "a_max_nM")]
    pub a_max_nm: Vec<f64>,
    pub output_bins: usize,
    pub gap_bits: f64,
    pub max_iter: usize,
    /// `"two-sided"` or `"one-sided-endpoints"`.
    pub detection: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloSection {
    pub trials: usize,
    pub truncate: bool,
    pub transmitter_noise: bool,
    pub distance_noise: bool,
    pub receiver_noise: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSection {
    pub p0: Vec<f64>,
    pub m: Vec<usize>,
    /// Largest receiver concentration for the symbol-error checks, nM.
    #[serde(rename = "a_max_nM")]
    pub a_max_nm: f64,
    /// Trials per symbol.
    pub symbol_trials: usize,
    /// Below this many trials the statistical checks are not judged.
    pub min_trials: usize,
    pub mean_se: f64,
    pub variance_rel: f64,
    pub filtering_rel: f64,
    pub symbol_se: f64,
    pub clamp_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransientSection {
    #[serde(rename = "concentration_nM")]
    pub concentration_nm: f64,
    pub p_init: f64,
    pub t_end_min: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResponseSection {
    pub r_um: Vec<f64>,
    /// Transmitter stimulus setting the emission rate, nM.
    #[serde(rename = "stimulus_nM")]
    pub stimulus_nm: f64,
    pub t_end_s: f64,
    pub steps: usize,
}

impl Default for KineticsSection {
    fn default() -> Self {
        let k = KineticParams::default();
        Self {
            gamma: k.gamma,
            kappa: k.kappa,
            a0: k.a0,
            a1: k.a1,
            b0: k.b0,
            b1: k.b1,
            b2: k.b2,
            alpha: DEFAULT_ALPHA,
            cascade_alpha: false,
            receptors: k.receptors,
        }
    }
}

impl Default for NodeSection {
    fn default() -> Self {
        Self {
            bacteria: 100,
            sigma0_sq: 0.1,
            sigma_gamma_sq: None,
            sigma_kappa_sq: None,
        }
    }
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            diffusion: 1e-5,
            r0_um: 50.0,
            sigma_r_sq_um2: None,
            pulse_s: None,
        }
    }
}

impl Default for CapacitySection {
    fn default() -> Self {
        Self {
            a_max_nm: vec![50.0, 100.0, 200.0, 400.0, 800.0],
            bacteria: vec![100],
            input_levels: DEFAULT_INPUT_LEVELS,
            output_bins: DEFAULT_OUTPUT_BINS,
            gap_bits: 1e-4,
            max_iter: 1_000_000,
        }
    }
}

impl Default for TimingSection {
    fn default() -> Self {
        Self {
            r_um: vec![10.0, 50.0, 100.0],
            bacteria: vec![50, 100, 200],
            a_max_nm: 400.0,
            decode_concentration_nm: 100.0,
            rise_threshold: DEFAULT_RISE_THRESHOLD,
            fall_threshold: DEFAULT_FALL_THRESHOLD,
        }
    }
}

impl Default for ModulationSection {
    fn default() -> Self {
        Self {
            m: vec![2, 4, 8, 16, 32],
            a_max_nm: vec![25.0, 50.0, 100.0, 200.0, 400.0, 800.0, 1600.0, 3200.0, 6400.0, 12800.0],
            output_bins: DEFAULT_OUTPUT_BINS,
            gap_bits: 1e-6,
            max_iter: 1_000_000,
            detection: "two-sided".into(),
        }
    }
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        let s = SimConfig::default();
        Self {
            trials: s.trials,
            truncate: s.truncate_probabilities,
            transmitter_noise: s.transmitter_noise,
            distance_noise: s.distance_noise,
            receiver_noise: s.receiver_noise,
        }
    }
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            p0: vec![0.1, 0.3, 0.5, 0.615],
            m: vec![8, 32],
            a_max_nm: 700.0,
            symbol_trials: 20_000,
            min_trials: 1000,
            mean_se: 3.0,
            variance_rel: 0.10,
            filtering_rel: 0.02,
            symbol_se: 3.0,
            clamp_rate: 1e-4,
        }
    }
}

impl Default for TransientSection {
    fn default() -> Self {
        Self {
            concentration_nm: 250.0,
            p_init: 0.0,
            t_end_min: 600.0,
            steps: 600,
        }
    }
}

impl Default for ResponseSection {
    fn default() -> Self {
        Self {
            r_um: vec![10.0, 50.0, 100.0],
            stimulus_nm: 250.0,
            t_end_s: 1200.0,
            steps: 1200,
        }
    }
}

/// Warnings about parameters outside the first-order regime.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RegimeWarnings(pub Vec<String>);

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn kinetics(&self) -> KineticParams {
        let s = &self.kinetics;
        let k = KineticParams {
            gamma: s.gamma,
            kappa: s.kappa,
            a0: s.a0,
            a1: s.a1,
            b0: s.b0,
            b1: s.b1,
            b2: s.b2,
            alpha: s.alpha,
            receptors: s.receptors,
        };
        if s.cascade_alpha {
            k.with_cascade_alpha()
        } else {
            k
        }
    }

    /// Node with `n` bacteria and the configured noise.
    pub fn node_with(&self, bacteria: u32) -> NodeParams {
        let k = self.kinetics();
        let share = self.node.sigma0_sq / 3.0;
        NodeParams {
            bacteria,
            sigma_gamma_sq: self.node.sigma_gamma_sq.unwrap_or(share * k.gamma * k.gamma),
            sigma_kappa_sq: self.node.sigma_kappa_sq.unwrap_or(share * k.kappa * k.kappa),
            kinetics: k,
        }
    }

    pub fn node(&self) -> NodeParams {
        self.node_with(self.node.bacteria)
    }

    /// Channel at the configured nominal distance.
    pub fn channel(&self) -> ChannelParams {
        self.channel_at(self.channel.r0_um)
    }

    /// Channel with nominal distance `r_um`. The distance variance keeps the
    /// configured relative size when it was not given in absolute units.
    pub fn channel_at(&self, r_um: f64) -> ChannelParams {
        let c = &self.channel;
        let r0 = um_to_cm(r_um);
        let sigma_r_sq = match c.sigma_r_sq_um2 {
            Some(v) => v * 1e-8,
            None => self.node.sigma0_sq / 3.0 * r0 * r0,
        };
        ChannelParams {
            diffusion: c.diffusion,
            r0,
            sigma_r_sq,
            pulse_duration: c.pulse_s.unwrap_or(f64::INFINITY),
        }
    }

    /// `σ0²` implied by the node and channel settings.
    pub fn sigma0_sq(&self) -> f64 {
        qslink_core::receiver::sigma0_sq(&self.node(), &self.channel())
    }

    pub fn sim(&self, seed: u64) -> SimConfig {
        let m = &self.montecarlo;
        SimConfig {
            trials: m.trials,
            seed,
            truncate_probabilities: m.truncate,
            transmitter_noise: m.transmitter_noise,
            distance_noise: m.distance_noise,
            receiver_noise: m.receiver_noise,
        }
    }

    pub fn capacity_tolerance(&self) -> Tolerance {
        Tolerance {
            abs: self.capacity.gap_bits,
            rel: 1e-12,
            max_iter: self.capacity.max_iter,
        }
    }

    pub fn modulation_tolerance(&self) -> Tolerance {
        Tolerance {
            abs: self.modulation.gap_bits,
            rel: 1e-12,
            max_iter: self.modulation.max_iter,
        }
    }

    pub fn detection(&self) -> Result<Detection> {
        match self.modulation.detection.as_str() {
            "two-sided" => Ok(Detection::TwoSided),
            "one-sided-endpoints" => Ok(Detection::OneSidedEndpoints),
            other => Err(Error::config(format!(
                "modulation.detection: unknown value `{other}` (expected `two-sided` or `one-sided-endpoints`)"
            ))),
        }
    }

    pub fn regime_warnings(&self) -> RegimeWarnings {
        let mut out = Vec::new();
        let node = self.node();
        if !node.in_first_order_regime() {
            out.push(format!(
                "relative rate-constant noise {} exceeds {FIRST_ORDER_WARN_LEVEL}; first-order noise model unreliable",
                node.relative_noise()
            ));
        }
        let ch = self.channel();
        if !ch.in_first_order_regime() {
            out.push(format!(
                "relative distance noise {} exceeds {DISTANCE_WARN_LEVEL}; first-order noise model unreliable",
                ch.relative_distance_noise()
            ));
        }
        RegimeWarnings(out)
    }

    /// Checks every physical parameter and grid.
    pub fn validate(&self) -> Result<()> {
        let wrap = |section: &str, e: qslink_core::Error| Error::config(format!("{section}: {e}"));
        self.node().validate().map_err(|e| wrap("kinetics/node", e))?;
        self.channel().validate().map_err(|e| wrap("channel", e))?;
        positive("node.sigma0_sq", self.node.sigma0_sq, true)?;
        if let Some(v) = self.node.sigma_gamma_sq {
            positive("node.sigma_gamma_sq", v, true)?;
        }
        if let Some(v) = self.node.sigma_kappa_sq {
            positive("node.sigma_kappa_sq", v, true)?;
        }
        if let Some(v) = self.channel.sigma_r_sq_um2 {
            positive("channel.sigma_r_sq_um2", v, true)?;
        }

        let c = &self.capacity;
        increasing("capacity.a_max_nM", &c.a_max_nm, true)?;
        counts("capacity.bacteria", &c.bacteria)?;
        at_least("capacity.input_levels", c.input_levels, 2)?;
        at_least("capacity.output_bins", c.output_bins, 8)?;
        positive("capacity.gap_bits", c.gap_bits, false)?;
        at_least("capacity.max_iter", c.max_iter, 1)?;

        let t = &self.timing;
        increasing("timing.r_um", &t.r_um, false)?;
        counts("timing.bacteria", &t.bacteria)?;
        positive("timing.a_max_nM", t.a_max_nm, false)?;
        positive("timing.decode_concentration_nM", t.decode_concentration_nm, false)?;
        threshold("timing.rise_threshold", t.rise_threshold)?;
        threshold("timing.fall_threshold", t.fall_threshold)?;

        let m = &self.modulation;
        if m.m.is_empty() || m.m.iter().any(|&v| v < 2) {
            return Err(Error::config("modulation.m: every symbol count must be >= 2"));
        }
        increasing("modulation.a_max_nM", &m.a_max_nm, false)?;
        at_least("modulation.output_bins", m.output_bins, 8)?;
        positive("modulation.gap_bits", m.gap_bits, false)?;
        at_least("modulation.max_iter", m.max_iter, 1)?;
        self.detection()?;

        at_least("montecarlo.trials", self.montecarlo.trials, 1)?;

        let v = &self.validate;
        if v.p0.iter().any(|p| !(0.0..1.0).contains(p)) {
            return Err(Error::config("validate.p0: occupancies must lie in [0, 1)"));
        }
        if v.m.iter().any(|&m| m < 2) {
            return Err(Error::config("validate.m: every symbol count must be >= 2"));
        }
        positive("validate.a_max_nM", v.a_max_nm, false)?;
        at_least("validate.symbol_trials", v.symbol_trials, 1)?;
        for (name, value) in [
            ("validate.mean_se", v.mean_se),
            ("validate.variance_rel", v.variance_rel),
            ("validate.filtering_rel", v.filtering_rel),
            ("validate.symbol_se", v.symbol_se),
            ("validate.clamp_rate", v.clamp_rate),
        ] {
            positive(name, value, false)?;
        }

        let tr = &self.transient;
        positive("transient.concentration_nM", tr.concentration_nm, true)?;
        if !(0.0..=1.0).contains(&tr.p_init) {
            return Err(Error::config("transient.p_init: must lie in [0, 1]"));
        }
        positive("transient.t_end_min", tr.t_end_min, false)?;
        at_least("transient.steps", tr.steps, 1)?;

        let r = &self.response;
        increasing("response.r_um", &r.r_um, false)?;
        positive("response.stimulus_nM", r.stimulus_nm, true)?;
        positive("response.t_end_s", r.t_end_s, false)?;
        at_least("response.steps", r.steps, 1)?;
        Ok(())
    }
}

fn positive(name: &str, v: f64, allow_zero: bool) -> Result<()> {
    let ok = v.is_finite() && if allow_zero { v >= 0.0 } else { v > 0.0 };
    if ok {
        Ok(())
    } else {
        let bound = if allow_zero { ">= 0" } else { "> 0" };
        Err(Error::config(format!("{name} = {v}: must be finite and {bound}")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        Err(Error::config(format!("{name} = {v}: must be >= {min}")))
    }
}

fn threshold(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!("{name} = {v}: must lie in (0, 1)")))
    }
}

fn counts(name: &str, v: &[u32]) -> Result<()> {
    if v.is_empty() || v.contains(&0) {
        return Err(Error::config(format!("{name}: need at least one value, all >= 1")));
    }
    Ok(())
}

fn increasing(name: &str, v: &[f64], allow_zero: bool) -> Result<()> {
    if v.is_empty() {
        return Err(Error::config(format!("{name}: need at least one value")));
    }
    for &x in v {
        positive(name, x, allow_zero)?;
    }
    if v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config(format!("{name}: values must be strictly increasing")));
    }
    Ok(())
}
