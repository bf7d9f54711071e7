//! Exact stochastic simulation of the link.
//!
//! Each trial draws one distance error for the whole link, then per-bacterium
//! rate constants and binomial receptor activations at both nodes, using the
//! unexpanded occupancy formula throughout. Trials are independent and each
//! draws from its own ChaCha8 stream, keyed by `(seed, trial, stage)`, so the
//! output does not depend on how trials are spread over threads.

use std::io::Write;

use qslink_core::channel::{required_stimulus, saturation_concentration, ChannelParams};
use qslink_core::kinetics::concentration_for_probability;
use qslink_core::modulation::MarySpec;
use qslink_core::transmitter::NodeParams;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};

const STAGE_TRANSMITTER: u64 = 0;
const STAGE_DISTANCE: u64 = 1;
const STAGE_RECEIVER: u64 = 2;
const STAGES: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub trials: usize,
    pub seed: u64,
    /// Clamp sampled occupancies into `[0, 1]`; when off an out-of-range
    /// draw is an error.
    pub truncate_probabilities: bool,
    /// Rate-constant noise and binomial activation at the transmitter. When
    /// off the transmitter emits its noise-free mean.
    pub transmitter_noise: bool,
    pub distance_noise: bool,
    /// Rate-constant noise at the receiver. Binomial activation is always on.
    pub receiver_noise: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            trials: 100_000,
            seed: 42,
            truncate_probabilities: true,
            transmitter_noise: true,
            distance_noise: true,
            receiver_noise: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("montecarlo.trials must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSample {
    /// Activated transmitter receptors.
    pub x: f64,
    /// Concentration at the receiver, nM.
    pub a_r: f64,
    /// Activated receiver receptors.
    pub y: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub samples: Vec<LinkSample>,
    /// Occupancy draws that fell outside `[0, 1]` and were clamped.
    pub clamped: u64,
    pub probability_draws: u64,
    /// Distance draws with `r0 + εr <= 0` that were redrawn.
    pub rejected_distances: u64,
}

impl SimOutput {
    pub fn clamp_rate(&self) -> f64 {
        if self.probability_draws == 0 {
            0.0
        } else {
            self.clamped as f64 / self.probability_draws as f64
        }
    }

    pub fn y_values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.y as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// Adjusted Fisher-Pearson skewness; zero when undefined.
    pub skewness: f64,
}

impl Moments {
    pub fn std_error(&self) -> f64 {
        (self.variance / self.count as f64).sqrt()
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub fn empirical_moments(samples: &[f64]) -> Result<Moments> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, found: n });
    }
    let mut s = CompensatedSum::default();
    samples.iter().for_each(|&x| s.add(x));
    let mean = s.value() / n as f64;
    let (mut m2, mut m3) = (CompensatedSum::default(), CompensatedSum::default());
    for &x in samples {
        let d = x - mean;
        m2.add(d * d);
        m3.add(d * d * d);
    }
    let nf = n as f64;
    let (m2, m3) = (m2.value(), m3.value());
    let variance = m2 / (nf - 1.0);
    let skewness = if n > 2 && m2 > 0.0 {
        let g1 = (m3 / nf) / (m2 / nf).powf(1.5);
        g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0)
    } else {
        0.0
    };
    Ok(Moments {
        count: n,
        mean,
        variance,
        skewness,
    })
}

struct TrialOutcome {
    sample: LinkSample,
    clamped: u64,
    draws: u64,
    rejected: u64,
}

struct Sampler {
    base: ChaCha8Rng,
    a_s: f64,
    node: NodeParams,
    ch: ChannelParams,
    cfg: SimConfig,
    gamma_noise: Normal<f64>,
    kappa_noise: Normal<f64>,
    distance_noise: Normal<f64>,
}

impl Sampler {
    fn new(a_s: f64, node: &NodeParams, ch: &ChannelParams, cfg: &SimConfig) -> Result<Self> {
        node.validate()?;
        ch.validate()?;
        cfg.validate()?;
        if a_s.is_nan() || a_s < 0.0 {
            return Err(qslink_core::Error::Domain {
                name: "a_s",
                value: a_s,
                expected: ">= 0",
            }
            .into());
        }
        let normal = |var: f64| Normal::new(0.0, var.sqrt()).expect("variance validated as >= 0");
        Ok(Self {
            base: ChaCha8Rng::seed_from_u64(cfg.seed),
            a_s,
            node: *node,
            ch: *ch,
            cfg: *cfg,
            gamma_noise: normal(node.sigma_gamma_sq),
            kappa_noise: normal(node.sigma_kappa_sq),
            distance_noise: normal(ch.sigma_r_sq),
        })
    }

    fn stream(&self, trial: usize, stage: u64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(trial as u64 * STAGES + stage);
        rng
    }

    /// Total activations over `n` bacteria at concentration `a`.
    fn population(&self, a: f64, noisy: bool, rng: &mut ChaCha8Rng, counts: &mut (u64, u64)) -> Result<u64> {
        let k = &self.node.kinetics;
        let mut total = 0;
        for _ in 0..self.node.bacteria {
            let (g, kap) = if noisy {
                (k.gamma + self.gamma_noise.sample(rng), k.kappa + self.kappa_noise.sample(rng))
            } else {
                (k.gamma, k.kappa)
            };
            let ag = a * g;
            let mut p = if a.is_infinite() && g > 0.0 { 1.0 } else { ag / (ag + kap) };
            counts.1 += 1;
            if !(0.0..=1.0).contains(&p) || p.is_nan() {
                if !self.cfg.truncate_probabilities {
                    return Err(Error::ProbabilityOutOfRange { value: p });
                }
                counts.0 += 1;
                // a NaN only arises from 0/0 at zero concentration
                p = if p.is_nan() { 0.0 } else { p.clamp(0.0, 1.0) };
            }
            total += Binomial::new(k.receptors as u64, p)
                .expect("probability clamped into [0, 1]")
                .sample(rng);
        }
        Ok(total)
    }

    fn trial(&self, t: usize) -> Result<TrialOutcome> {
        let mut counts = (0, 0);
        let total_receptors = self.node.total_receptors();
        let x = if self.cfg.transmitter_noise {
            let mut rng = self.stream(t, STAGE_TRANSMITTER);
            self.population(self.a_s, true, &mut rng, &mut counts)? as f64
        } else {
            let k = &self.node.kinetics;
            let ag = self.a_s * k.gamma;
            total_receptors * if self.a_s.is_infinite() { 1.0 } else { ag / (ag + k.kappa) }
        };
        let mut rejected = 0;
        let r = if self.cfg.distance_noise {
            let mut rng = self.stream(t, STAGE_DISTANCE);
            loop {
                let r = self.ch.r0 + self.distance_noise.sample(&mut rng);
                if r > 0.0 {
                    break r;
                }
                rejected += 1;
            }
        } else {
            self.ch.r0
        };
        let a_r = self.node.kinetics.alpha * x / (4.0 * std::f64::consts::PI * self.ch.diffusion * r);
        let mut rng = self.stream(t, STAGE_RECEIVER);
        let y = self.population(a_r, self.cfg.receiver_noise, &mut rng, &mut counts)?;
        Ok(TrialOutcome {
            sample: LinkSample { x, a_r, y },
            clamped: counts.0,
            draws: counts.1,
            rejected,
        })
    }
}

/// Runs `cfg.trials` independent link trials at transmitter stimulus `a_s`.
/// Samples are returned in trial order.
pub fn simulate_link(a_s: f64, node: &NodeParams, ch: &ChannelParams, cfg: &SimConfig) -> Result<SimOutput> {
    let sampler = Sampler::new(a_s, node, ch, cfg)?;
    let outcomes: Vec<TrialOutcome> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| sampler.trial(t))
        .collect::<Result<_>>()?;
    let mut out = SimOutput {
        samples: Vec::with_capacity(outcomes.len()),
        clamped: 0,
        probability_draws: 0,
        rejected_distances: 0,
    };
    for o in outcomes {
        out.samples.push(o.sample);
        out.clamped += o.clamped;
        out.probability_draws += o.draws;
        out.rejected_distances += o.rejected;
    }
    Ok(out)
}

/// Transmitter stimulus that puts the receiver at mean occupancy `p0`.
pub fn stimulus_for_occupancy(p0: f64, node: &NodeParams, ch: &ChannelParams) -> Result<f64> {
    let a0 = concentration_for_probability(p0, &node.kinetics)?;
    Ok(required_stimulus(a0, node, ch)?)
}

/// First-order moments of `Y` for the simulated model.
///
/// Unlike the closed-form receiver moments this keeps the binomial
/// activation terms and treats the distance and transmitter fluctuations as
/// common to all receiver bacteria, so their contribution scales with `n²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceMoments {
    pub mean: f64,
    pub variance: f64,
    /// Relative variance of the emitted count `X`.
    pub transmitter_rel_var: f64,
}

pub fn reference_moments(p0: f64, node: &NodeParams, ch: &ChannelParams, cfg: &SimConfig) -> Result<ReferenceMoments> {
    let k = &node.kinetics;
    let a0 = concentration_for_probability(p0, k)?;
    let ps = a0 / saturation_concentration(node, ch);
    let (n, big_n) = (node.bacteria as f64, k.receptors as f64);
    let rho_g = node.sigma_gamma_sq / (k.gamma * k.gamma);
    let rho_k = node.sigma_kappa_sq / (k.kappa * k.kappa);
    let rho = rho_g + rho_k;
    let rho_r = if cfg.distance_noise { ch.relative_distance_noise() } else { 0.0 };

    // log-odds shift and spread of a single bacterium's occupancy
    let pair_shift = 0.5 * (rho_k - rho_g);
    let (v_t, x_bias) = if cfg.transmitter_noise && ps > 0.0 {
        let qs = 1.0 - ps;
        let var_x = n * big_n * ps * qs + n * (big_n * big_n - big_n) * ps * ps * qs * qs * rho;
        let ex = n * big_n * ps;
        (var_x / (ex * ex), qs * (pair_shift + 0.5 * (1.0 - 2.0 * ps) * rho))
    } else {
        (0.0, 0.0)
    };
    let rx_rho = if cfg.receiver_noise { rho } else { 0.0 };
    let rx_shift = if cfg.receiver_noise { pair_shift } else { 0.0 };
    let shift = rx_shift + x_bias - 0.5 * v_t + 0.5 * rho_r;
    let spread = rx_rho + v_t + rho_r;
    let q0 = 1.0 - p0;
    let pq = p0 * q0;
    let mean_p = p0 + pq * shift + 0.5 * pq * (1.0 - 2.0 * p0) * spread;
    let within = n * big_n * pq + n * (big_n * big_n - big_n) * pq * pq * rx_rho;
    let shared = n * n * big_n * big_n * pq * pq * (v_t + rho_r);
    Ok(ReferenceMoments {
        mean: n * big_n * mean_p,
        variance: within + shared,
        transmitter_rel_var: v_t,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomialEstimate {
    pub errors: u64,
    pub trials: u64,
    pub rate: f64,
    pub std_error: f64,
}

impl BinomialEstimate {
    fn new(errors: u64, trials: u64) -> Self {
        let rate = errors as f64 / trials as f64;
        Self {
            errors,
            trials,
            rate,
            std_error: (rate * (1.0 - rate) / trials as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolErrorEstimate {
    pub per_symbol: Vec<BinomialEstimate>,
    /// `Σ w_i · rate_i`.
    pub total: f64,
    pub total_std_error: f64,
    pub clamp_rate: f64,
}

impl SymbolErrorEstimate {
    /// Standard error of the weighted total if the per-symbol error
    /// probabilities were `probs`.
    pub fn std_error_under(&self, spec: &MarySpec, probs: &[f64]) -> f64 {
        spec.weights
            .iter()
            .zip(probs)
            .zip(&self.per_symbol)
            .map(|((w, p), e)| w * w * p * (1.0 - p) / e.trials as f64)
            .sum::<f64>()
            .sqrt()
    }
}

/// Sends each symbol `cfg.trials` times and decodes `Y/(nN)` to the nearest
/// level.
pub fn empirical_symbol_error(
    spec: &MarySpec,
    node: &NodeParams,
    ch: &ChannelParams,
    cfg: &SimConfig,
) -> Result<SymbolErrorEstimate> {
    let total_receptors = node.total_receptors();
    let step = spec.p_max / (spec.m - 1) as f64;
    let mut per_symbol = Vec::with_capacity(spec.m);
    let (mut clamped, mut draws) = (0, 0);
    for (i, &p) in spec.levels.iter().enumerate() {
        let a_s = stimulus_for_occupancy(p, node, ch)?;
        let sym_cfg = SimConfig {
            seed: symbol_seed(cfg.seed, i),
            ..*cfg
        };
        let out = simulate_link(a_s, node, ch, &sym_cfg)?;
        clamped += out.clamped;
        draws += out.probability_draws;
        let errors = out
            .samples
            .iter()
            .filter(|s| {
                let y = s.y as f64 / total_receptors;
                let idx = (y / step).round().clamp(0.0, (spec.m - 1) as f64) as usize;
                idx != i
            })
            .count() as u64;
        per_symbol.push(BinomialEstimate::new(errors, cfg.trials as u64));
    }
    let total = spec.weights.iter().zip(&per_symbol).map(|(w, e)| w * e.rate).sum();
    let total_std_error = spec
        .weights
        .iter()
        .zip(&per_symbol)
        .map(|(w, e)| w * w * e.std_error * e.std_error)
        .sum::<f64>()
        .sqrt();
    Ok(SymbolErrorEstimate {
        per_symbol,
        total,
        total_std_error,
        clamp_rate: if draws == 0 { 0.0 } else { clamped as f64 / draws as f64 },
    })
}

/// Independent seed for symbol `i`; `seed_from_u64` scrambles it further.
fn symbol_seed(seed: u64, i: usize) -> u64 {
    seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub const RAW_SCHEMA: &str = "qslink.raw.v1";

/// Writes `(trial, X, A_r, Y)` rows.
pub fn write_raw_samples<W: Write>(mut w: W, out: &SimOutput) -> std::io::Result<()> {
    writeln!(w, "{RAW_SCHEMA},x,a_r_nM,y")?;
    for (t, s) in out.samples.iter().enumerate() {
        writeln!(w, "{t},{},{},{}", s.x, s.a_r, s.y)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use qslink_core::channel::um_to_cm;
    use qslink_core::KineticParams;

    fn setup() -> (NodeParams, ChannelParams) {
        let node = NodeParams::with_relative_noise(100, KineticParams::default(), 0.1 / 3.0);
        let r0 = um_to_cm(50.0);
        (node, ChannelParams { r0, sigma_r_sq: 0.1 / 3.0 * r0 * r0, ..ChannelParams::default() })
    }

    #[test]
    fn moments_examples() {
        let m = empirical_moments(&[3.0; 10]).unwrap();
        assert_eq!((m.mean, m.variance, m.skewness), (3.0, 0.0, 0.0));
        let m = empirical_moments(&[0.0, 2.0]).unwrap();
        assert_eq!((m.mean, m.variance), (1.0, 2.0));
        assert!(matches!(empirical_moments(&[1.0]), Err(Error::InsufficientSamples { .. })));
        // skewness of {0, 0, 3}: g1 = 0.7071, adjusted by sqrt(6)/1
        let m = empirical_moments(&[0.0, 0.0, 3.0]).unwrap();
        assert!((m.skewness - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        for x in [1e16, 1.0, -1e16, 1.0] {
            s.add(x);
        }
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn zero_stimulus_gives_zero_output() {
        let (node, ch) = setup();
        let cfg = SimConfig { trials: 200, ..SimConfig::default() };
        let out = simulate_link(0.0, &node, &ch, &cfg).unwrap();
        assert!(out.samples.iter().all(|s| s.y == 0 && s.x == 0.0));
    }

    #[test]
    fn same_seed_is_identical_and_thread_independent() {
        let (node, ch) = setup();
        let cfg = SimConfig { trials: 500, ..SimConfig::default() };
        let a = simulate_link(250.0, &node, &ch, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| simulate_link(250.0, &node, &ch, &cfg).unwrap());
        assert_eq!(a, b);
        let c = simulate_link(250.0, &node, &ch, &SimConfig { seed: 7, ..cfg }).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn stages_use_separate_streams() {
        let (node, ch) = setup();
        let on = SimConfig { trials: 50, ..SimConfig::default() };
        let off = SimConfig { distance_noise: false, ..on };
        let a = simulate_link(250.0, &node, &ch, &on).unwrap();
        let b = simulate_link(250.0, &node, &ch, &off).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(x.x, y.x);
        }
    }

    #[test]
    fn noiseless_link_is_binomial() {
        let (mut node, mut ch) = setup();
        node.sigma_gamma_sq = 0.0;
        node.sigma_kappa_sq = 0.0;
        ch.sigma_r_sq = 0.0;
        let cfg = SimConfig { trials: 20_000, transmitter_noise: false, ..SimConfig::default() };
        let a_s = stimulus_for_occupancy(0.5, &node, &ch).unwrap();
        let out = simulate_link(a_s, &node, &ch, &cfg).unwrap();
        let m = empirical_moments(&out.y_values()).unwrap();
        let (mean, var) = (2500.0, 1250.0);
        assert!((m.mean - mean).abs() < 3.0 * (var / 20_000.0f64).sqrt());
        assert!((m.variance / var - 1.0).abs() < 0.05);
        assert_eq!(out.clamped, 0);
    }

    #[test]
    fn truncation_off_reports_out_of_range() {
        let (mut node, ch) = setup();
        node.sigma_kappa_sq = 4.0 * node.kinetics.kappa * node.kinetics.kappa;
        let cfg = SimConfig { trials: 50, truncate_probabilities: false, ..SimConfig::default() };
        assert!(matches!(
            simulate_link(250.0, &node, &ch, &cfg),
            Err(Error::ProbabilityOutOfRange { .. })
        ));
        let clamped = simulate_link(250.0, &node, &ch, &SimConfig { truncate_probabilities: true, ..cfg }).unwrap();
        assert!(clamped.clamp_rate() > 0.0);
    }

    #[test]
    fn reference_reduces_to_binomial() {
        let (mut node, mut ch) = setup();
        node.sigma_gamma_sq = 0.0;
        node.sigma_kappa_sq = 0.0;
        ch.sigma_r_sq = 0.0;
        let r = reference_moments(0.3, &node, &ch, &SimConfig { transmitter_noise: false, ..SimConfig::default() }).unwrap();
        assert!((r.mean - 1500.0).abs() < 1e-9);
        assert!((r.variance - 5000.0 * 0.21).abs() < 1e-9);
    }

    #[test]
    fn noiseless_symbols_decode_exactly() {
        let (mut node, mut ch) = setup();
        node.sigma_gamma_sq = 0.0;
        node.sigma_kappa_sq = 0.0;
        ch.sigma_r_sq = 0.0;
        node.kinetics.receptors = 1_000_000;
        let spec = MarySpec::uniform(4, 0.6).unwrap();
        let cfg = SimConfig { trials: 100, transmitter_noise: false, ..SimConfig::default() };
        let est = empirical_symbol_error(&spec, &node, &ch, &cfg).unwrap();
        assert_eq!(est.total, 0.0);
    }

    #[test]
    fn raw_dump_format() {
        let out = SimOutput {
            samples: vec![LinkSample { x: 3.0, a_r: 0.5, y: 2 }],
            clamped: 0,
            probability_draws: 0,
            rejected_distances: 0,
        };
        let mut buf = Vec::new();
        write_raw_samples(&mut buf, &out).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "qslink.raw.v1,x,a_r_nM,y\n0,3,0.5,2\n");
    }
}
