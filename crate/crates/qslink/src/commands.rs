//! Experiment runners behind the subcommands.
//!
//! Each runner turns a validated [`Config`] into one or more [`Table`]s.
//! Sweep points are evaluated in parallel on the caller's rayon pool and
//! the tables sort their rows, so output does not depend on thread count.

use qslink_core::capacity::{self, capacity_at_amax, input_concentrations, CapacityPoint};
use qslink_core::channel::{step_response, steady_concentration, um_to_cm};
use qslink_core::kinetics::{binding_transient, expression_transient, steady_binding_probability};
use qslink_core::modulation::{mary_point, symbol_error_probs, total_error, MarySpec};
use qslink_core::receiver::{receiver_moments, transmitter_noise_at};
use qslink_core::timing::{bits_per_hour, delay_breakdown};
use qslink_core::transmitter::noiseless_entrapment;
use rayon::prelude::*;

use crate::config::Config;
use crate::csv::Table;
use crate::error::Result;
use crate::montecarlo::{
    empirical_moments, empirical_symbol_error, reference_moments, simulate_link, stimulus_for_occupancy, SimConfig,
    SimOutput,
};

pub const CAPACITY_SCHEMA: &str = "qslink.capacity.v1";
pub const DISTRIBUTION_SCHEMA: &str = "qslink.distribution.v1";
pub const TIMING_SCHEMA: &str = "qslink.timing.v1";
pub const MODULATION_SCHEMA: &str = "qslink.modulation.v1";
pub const VALIDATE_SCHEMA: &str = "qslink.validate.v1";
pub const KINETICS_SCHEMA: &str = "qslink.kinetics.v1";
pub const CHANNEL_SCHEMA: &str = "qslink.channel.v1";

/// Tables produced by a command plus a reason to exit nonzero, if any.
#[derive(Debug)]
pub struct Outcome {
    pub table: Table,
    pub extra: Option<Table>,
    pub failure: Option<String>,
}

impl Outcome {
    fn ok(table: Table) -> Self {
        Self {
            table,
            extra: None,
            failure: None,
        }
    }
}

pub fn run_capacity(cfg: &Config) -> Result<Outcome> {
    let c = &cfg.capacity;
    let sigma0_sq = cfg.sigma0_sq();
    let tol = cfg.capacity_tolerance();
    let jobs: Vec<(u32, f64)> = c
        .bacteria
        .iter()
        .flat_map(|&n| c.a_max_nm.iter().map(move |&a| (n, a)))
        .collect();
    let points: Vec<(u32, CapacityPoint)> = jobs
        .par_iter()
        .map(|&(n, a)| {
            let node = cfg.node_with(n);
            capacity_at_amax(a, &node, sigma0_sq, c.input_levels, c.output_bins, tol).map(|p| (n, p))
        })
        .collect::<qslink_core::Result<_>>()?;

    let mut table = Table::new(
        CAPACITY_SCHEMA,
        &["n", "a_max_nM", "p_max", "capacity_bits", "iterations", "gap_bits", "converged"],
    );
    let mut dist = Table::new(DISTRIBUTION_SCHEMA, &["n", "a_max_nM", "level", "p0", "a0_nM", "weight"]);
    let mut stalled = Vec::new();
    let k = cfg.kinetics();
    for (n, p) in &points {
        let r = &p.result;
        if !r.converged {
            stalled.push(format!("n={n} a_max={}", p.a_max));
        }
        table.push(
            vec![*n as f64, p.a_max],
            vec![
                (*n).into(),
                p.a_max.into(),
                p.p_max.into(),
                r.capacity_bits.into(),
                r.iterations.into(),
                r.upper_bound_gap.into(),
                r.converged.into(),
            ],
        );
        let levels = if r.input_distribution.len() == 1 {
            vec![0.0]
        } else {
            capacity::uniform_levels(r.input_distribution.len(), p.p_max)
        };
        let conc = input_concentrations(&levels, &k)?;
        for (i, ((lv, a0), w)) in levels.iter().zip(&conc).zip(&r.input_distribution).enumerate() {
            dist.push(
                vec![*n as f64, p.a_max, i as f64],
                vec![(*n).into(), p.a_max.into(), i.into(), (*lv).into(), (*a0).into(), (*w).into()],
            );
        }
    }
    Ok(Outcome {
        table,
        extra: Some(dist),
        failure: (!stalled.is_empty()).then(|| {
            format!(
                "capacity iteration did not reach gap {} bits within {} iterations at {}",
                c.gap_bits,
                c.max_iter,
                stalled.join(", ")
            )
        }),
    })
}

pub fn run_timing(cfg: &Config) -> Result<Outcome> {
    let t = &cfg.timing;
    let sigma0_sq = cfg.sigma0_sq();
    let tol = cfg.capacity_tolerance();
    let c = &cfg.capacity;
    let caps: Vec<(u32, CapacityPoint)> = t
        .bacteria
        .par_iter()
        .map(|&n| {
            capacity_at_amax(t.a_max_nm, &cfg.node_with(n), sigma0_sq, c.input_levels, c.output_bins, tol)
                .map(|p| (n, p))
        })
        .collect::<qslink_core::Result<_>>()?;

    let mut table = Table::new(
        TIMING_SCHEMA,
        &[
            "r_um",
            "n",
            "capacity_bits",
            "t_rise_s",
            "t_reception_min",
            "t_fall_s",
            "t_total_hr",
            "bits_per_hour",
        ],
    );
    let k = cfg.kinetics();
    let stalled: Vec<String> = caps
        .iter()
        .filter(|(_, p)| !p.result.converged)
        .map(|(n, _)| format!("n={n}"))
        .collect();
    for &r_um in &t.r_um {
        let ch = cfg.channel_at(r_um);
        let d = delay_breakdown(
            um_to_cm(r_um),
            t.decode_concentration_nm,
            &k,
            &ch,
            t.rise_threshold,
            t.fall_threshold,
        )?;
        for (n, p) in &caps {
            let bits = p.result.capacity_bits;
            table.push(
                vec![r_um, *n as f64],
                vec![
                    r_um.into(),
                    (*n).into(),
                    bits.into(),
                    d.t_rise.into(),
                    d.t_reception.into(),
                    d.t_fall.into(),
                    d.total_hours().into(),
                    bits_per_hour(bits, &d).into(),
                ],
            );
        }
    }
    Ok(Outcome {
        failure: (!stalled.is_empty())
            .then(|| format!("capacity iteration did not converge at {}", stalled.join(", "))),
        ..Outcome::ok(table)
    })
}

pub fn run_modulation(cfg: &Config) -> Result<Outcome> {
    let m = &cfg.modulation;
    let sigma0_sq = cfg.sigma0_sq();
    let tol = cfg.modulation_tolerance();
    let detection = cfg.detection()?;
    let node = cfg.node();
    let jobs: Vec<(usize, f64)> = m
        .m
        .iter()
        .flat_map(|&mm| m.a_max_nm.iter().map(move |&a| (mm, a)))
        .collect();
    let points = jobs
        .par_iter()
        .map(|&(mm, a)| mary_point(mm, a, &node, sigma0_sq, m.output_bins, tol, detection))
        .collect::<qslink_core::Result<Vec<_>>>()?;

    let mut table = Table::new(
        MODULATION_SCHEMA,
        &["m", "a_max_nM", "p_max", "rate_bits", "log2m", "total_error", "per_symbol_error"],
    );
    for p in &points {
        let per: Vec<String> = p.result.per_symbol_error.iter().map(|e| format!("{e:?}")).collect();
        table.push(
            vec![p.spec.m as f64, p.a_max],
            vec![
                p.spec.m.into(),
                p.a_max.into(),
                p.spec.p_max.into(),
                p.result.rate_bits.into(),
                p.result.log2m.into(),
                p.result.total_error.into(),
                per.join(";").into(),
            ],
        );
    }
    Ok(Outcome::ok(table))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Underpowered,
    Warn,
    Info,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Underpowered => "underpowered",
            Status::Warn => "warn",
            Status::Info => "info",
        }
    }
}

struct Report {
    table: Table,
    powered: bool,
    failures: usize,
    order: f64,
}

impl Report {
    /// Adds a statistical check; it is marked underpowered instead of judged
    /// when there are too few trials.
    #[allow(clippy::too_many_arguments)]
    fn check(&mut self, check: &str, case: String, analytic: f64, empirical: f64, tolerance: f64, ok: bool, note: &str) {
        let status = if !self.powered {
            Status::Underpowered
        } else if ok {
            Status::Pass
        } else {
            self.failures += 1;
            Status::Fail
        };
        self.row(check, case, analytic, empirical, tolerance, status, note);
    }

    #[allow(clippy::too_many_arguments)]
    fn row(&mut self, check: &str, case: String, analytic: f64, empirical: f64, tolerance: f64, status: Status, note: &str) {
        self.order += 1.0;
        self.table.push(
            vec![self.order],
            vec![
                check.into(),
                case.into(),
                analytic.into(),
                empirical.into(),
                tolerance.into(),
                status.as_str().into(),
                note.into(),
            ],
        );
    }
}

/// Options that only the `validate` command takes.
#[derive(Debug, Clone, Default)]
pub struct ValidateOptions {
    /// Occupancy whose raw samples are returned for dumping.
    pub raw_p0: Option<f64>,
}

/// Compares the analytic model against the Monte-Carlo oracle.
///
/// Rows keep a fixed order with regime warnings first and the symbol-error
/// checks last.
pub fn run_validate(cfg: &Config, seed: u64, opts: &ValidateOptions) -> Result<(Outcome, Option<SimOutput>)> {
    let v = &cfg.validate;
    let node = cfg.node();
    let ch = cfg.channel();
    let sim = cfg.sim(seed);
    sim.validate()?;
    let mut rep = Report {
        table: Table::new(
            VALIDATE_SCHEMA,
            &["check", "case", "analytic", "empirical", "tolerance", "status", "note"],
        ),
        powered: sim.trials >= v.min_trials,
        failures: 0,
        order: 0.0,
    };
    for w in cfg.regime_warnings().0 {
        rep.row("regime", "config".into(), f64::NAN, f64::NAN, f64::NAN, Status::Warn, &w);
    }
    if !rep.powered {
        let note = format!("{} trials is below validate.min_trials = {}", sim.trials, v.min_trials);
        rep.row("power", "config".into(), f64::NAN, f64::NAN, f64::NAN, Status::Warn, &note);
    }

    let sigma0_sq = cfg.sigma0_sq();
    let quiet_tx = SimConfig {
        transmitter_noise: false,
        ..sim
    };
    for &p0 in &v.p0 {
        let case = format!("p0={p0}");
        let a_s = stimulus_for_occupancy(p0, &node, &ch)?;
        let out = simulate_link(a_s, &node, &ch, &sim)?;
        let mom = empirical_moments(&out.y_values())?;
        let closed = receiver_moments(p0, &node, &ch, false)?;
        let refm = reference_moments(p0, &node, &ch, &sim)?;
        let se = mom.std_error();

        let dev = (mom.mean - closed.mean).abs();
        rep.check("mean", case.clone(), closed.mean, mom.mean, v.mean_se * se, dev <= v.mean_se * se, "nNp0; tolerance in Y units");
        let rel = (mom.variance - closed.variance).abs() / closed.variance;
        rep.check("variance", case.clone(), closed.variance, mom.variance, v.variance_rel, rel <= v.variance_rel, "closed form, independent bacteria");
        let rel_ref = (mom.variance - refm.variance).abs() / refm.variance;
        rep.row(
            "variance_shared",
            case.clone(),
            refm.variance,
            mom.variance,
            v.variance_rel,
            Status::Info,
            &format!("first order with shared noise; relative deviation {rel_ref}; mean {}", refm.mean),
        );
        let rate = out.clamp_rate();
        rep.check("clamp_rate", case.clone(), 0.0, rate, v.clamp_rate, rate <= v.clamp_rate, "");

        let st = transmitter_noise_at(p0, &node, &ch)?;
        let ratio = st / sigma0_sq;
        rep.row(
            "filtering_analytic",
            case.clone(),
            ratio,
            f64::NAN,
            0.05,
            if ratio < 0.05 { Status::Pass } else { Status::Fail },
            "sigma_t^2 / sigma0^2",
        );
        if ratio >= 0.05 {
            rep.failures += 1;
        }
        let quiet = simulate_link(a_s, &node, &ch, &quiet_tx)?;
        let qm = empirical_moments(&quiet.y_values())?;
        let diff = (mom.variance - qm.variance).abs() / qm.variance;
        rep.check("filtering_empirical", case, qm.variance, mom.variance, v.filtering_rel, diff < v.filtering_rel, "Var(Y) with transmitter stage off vs on");
    }

    let detection = cfg.detection()?;
    let tol = cfg.modulation_tolerance();
    let k_out = cfg.modulation.output_bins;
    let p_max = steady_binding_probability(v.a_max_nm, &node.kinetics)?;
    let sym_cfg = SimConfig {
        trials: v.symbol_trials,
        ..sim
    };
    for &m in &v.m {
        let case = format!("m={m} a_max={}", v.a_max_nm);
        let spec = MarySpec::with_ba_weights(m, p_max, &node, sigma0_sq, k_out, tol)?;
        let probs = symbol_error_probs(&spec, &node, sigma0_sq, detection)?;
        let analytic = total_error(&spec, &probs)?;
        let est = empirical_symbol_error(&spec, &node, &ch, &sym_cfg)?;
        let se = est.std_error_under(&spec, &probs).max(est.total_std_error);
        let ok = (est.total - analytic).abs() <= v.symbol_se * se;
        let note = format!("{} trials per symbol", v.symbol_trials);
        let powered = rep.powered;
        rep.powered = powered && v.symbol_trials >= v.min_trials;
        rep.check("symbol_error", case, analytic, est.total, v.symbol_se * se, ok, &note);
        rep.powered = powered;
    }

    let raw = match opts.raw_p0 {
        Some(p0) => Some(simulate_link(stimulus_for_occupancy(p0, &node, &ch)?, &node, &ch, &sim)?),
        None => None,
    };
    let failure = (rep.failures > 0).then(|| format!("{} validation checks failed", rep.failures));
    Ok((
        Outcome {
            table: rep.table,
            extra: None,
            failure,
        },
        raw,
    ))
}

pub fn run_kinetics(cfg: &Config) -> Result<Outcome> {
    let tr = &cfg.transient;
    let k = cfg.kinetics();
    let p_star = steady_binding_probability(tr.concentration_nm, &k)?;
    let rows = (0..=tr.steps)
        .into_par_iter()
        .map(|i| {
            let t = tr.t_end_min * i as f64 / tr.steps as f64;
            let p = binding_transient(tr.concentration_nm, &k, tr.p_init, t)?;
            let (s1, s2) = expression_transient(p_star, &k, t)?;
            Ok((t, p, s1, s2))
        })
        .collect::<qslink_core::Result<Vec<_>>>()?;
    let mut table = Table::new(KINETICS_SCHEMA, &["t_min", "p_bound", "p_steady", "s1", "s2"]);
    for (t, p, s1, s2) in rows {
        table.push(vec![t], vec![t.into(), p.into(), p_star.into(), s1.into(), s2.into()]);
    }
    Ok(Outcome::ok(table))
}

pub fn run_channel(cfg: &Config) -> Result<Outcome> {
    let r = &cfg.response;
    let node = cfg.node();
    let ch = cfg.channel();
    let p_s = noiseless_entrapment(r.stimulus_nm, &node)?;
    let beta = node.kinetics.alpha * node.total_receptors() * p_s;
    let jobs: Vec<(f64, usize)> = r.r_um.iter().flat_map(|&d| (0..=r.steps).map(move |i| (d, i))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(d, i)| {
            let t = r.t_end_s * i as f64 / r.steps as f64;
            let rc = um_to_cm(d);
            let a = step_response(rc, t, beta, &ch)?;
            let steady = steady_concentration(beta, rc, &ch)?;
            Ok((d, t, a, a / steady))
        })
        .collect::<qslink_core::Result<Vec<_>>>()?;
    let mut table = Table::new(CHANNEL_SCHEMA, &["r_um", "t_s", "concentration_nM", "ratio"]);
    for (d, t, a, ratio) in rows {
        table.push(vec![d, t], vec![d.into(), t.into(), a.into(), ratio.into()]);
    }
    Ok(Outcome::ok(table))
}
