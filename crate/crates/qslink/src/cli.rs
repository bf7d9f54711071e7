//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{self, Outcome, ValidateOptions};
use crate::config::Config;
use crate::csv::emit;
use crate::error::{Error, Result, EXIT_NUMERIC};
use crate::montecarlo::write_raw_samples;

#[derive(Debug, Parser)]
#[command(name = "qslink", version, about = "Quorum-sensing molecular link experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Sectioned TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output CSV path; stdout when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Also write the rows as JSON lines.
    #[arg(long, global = true, value_name = "PATH")]
    pub jsonl: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads; rayon's default when absent.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Omit the `# generated_unix=` first line.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Capacity versus maximum receiver concentration.
    Capacity {
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        n: Option<Vec<u32>>,
        #[arg(long = "a-max", value_delimiter = ',', value_name = "NM")]
        a_max: Option<Vec<f64>>,
        #[arg(long)]
        gap_bits: Option<f64>,
        /// Write the optimal input distributions here.
        #[arg(long, value_name = "PATH")]
        distribution: Option<PathBuf>,
    },
    /// Delay breakdown and bits per hour over distance and population.
    Timing {
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        r_um: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        n: Option<Vec<u32>>,
        #[arg(long = "a-max", value_name = "NM")]
        a_max: Option<f64>,
        #[arg(long)]
        rise_threshold: Option<f64>,
        #[arg(long)]
        fall_threshold: Option<f64>,
    },
    /// M-ary error probability and rate versus maximum concentration.
    Modulation {
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        m: Option<Vec<usize>>,
        #[arg(long = "a-max", value_delimiter = ',', value_name = "NM")]
        a_max: Option<Vec<f64>>,
        /// `two-sided` or `one-sided-endpoints`.
        #[arg(long)]
        detection: Option<String>,
    },
    /// Analytic model against the Monte-Carlo oracle.
    Validate {
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        symbol_trials: Option<usize>,
        /// Exit 1 when any check fails.
        #[arg(long)]
        strict: bool,
        /// Dump raw samples at `--raw-p0` here.
        #[arg(long, value_name = "PATH")]
        raw: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        raw_p0: f64,
    },
    /// Binding and expression transients.
    Kinetics {
        #[arg(long, value_name = "NM")]
        concentration: Option<f64>,
        #[arg(long)]
        t_end_min: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Channel step response.
    Channel {
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        r_um: Option<Vec<f64>>,
        #[arg(long)]
        t_end_s: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// Parses the arguments, runs the command and returns the exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("qslink: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<i32> {
    let g = cli.global;
    let mut cfg = match &g.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let mut strict = false;
    let mut raw = None;
    let mut dist_path = None;
    match cli.command.clone() {
        Command::Capacity {
            n,
            a_max,
            gap_bits,
            distribution,
        } => {
            set(&mut cfg.capacity.bacteria, n);
            set(&mut cfg.capacity.a_max_nm, a_max);
            set(&mut cfg.capacity.gap_bits, gap_bits);
            dist_path = distribution;
        }
        Command::Timing {
            r_um,
            n,
            a_max,
            rise_threshold,
            fall_threshold,
        } => {
            set(&mut cfg.timing.r_um, r_um);
            set(&mut cfg.timing.bacteria, n);
            set(&mut cfg.timing.a_max_nm, a_max);
            set(&mut cfg.timing.rise_threshold, rise_threshold);
            set(&mut cfg.timing.fall_threshold, fall_threshold);
        }
        Command::Modulation { m, a_max, detection } => {
            set(&mut cfg.modulation.m, m);
            set(&mut cfg.modulation.a_max_nm, a_max);
            set(&mut cfg.modulation.detection, detection);
        }
        Command::Validate {
            trials,
            symbol_trials,
            strict: s,
            raw: r,
            raw_p0,
        } => {
            set(&mut cfg.montecarlo.trials, trials);
            set(&mut cfg.validate.symbol_trials, symbol_trials);
            strict = s;
            raw = r.map(|p| (p, raw_p0));
        }
        Command::Kinetics {
            concentration,
            t_end_min,
            steps,
        } => {
            set(&mut cfg.transient.concentration_nm, concentration);
            set(&mut cfg.transient.t_end_min, t_end_min);
            set(&mut cfg.transient.steps, steps);
        }
        Command::Channel { r_um, t_end_s, steps } => {
            set(&mut cfg.response.r_um, r_um);
            set(&mut cfg.response.t_end_s, t_end_s);
            set(&mut cfg.response.steps, steps);
        }
    }
    cfg.validate()?;
    if let Some((_, p0)) = raw {
        if !(0.0..1.0).contains(&p0) {
            return Err(Error::config(format!("--raw-p0 = {p0}: must lie in [0, 1)")));
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(g.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::config(format!("--threads: {e}")))?;
    let seed = g.seed;
    let (outcome, samples) = pool.install(|| -> Result<(Outcome, _)> {
        Ok(match &cli.command {
            Command::Capacity { .. } => (commands::run_capacity(&cfg)?, None),
            Command::Timing { .. } => (commands::run_timing(&cfg)?, None),
            Command::Modulation { .. } => (commands::run_modulation(&cfg)?, None),
            Command::Validate { .. } => {
                let opts = ValidateOptions {
                    raw_p0: raw.as_ref().map(|r| r.1),
                };
                commands::run_validate(&cfg, seed, &opts)?
            }
            Command::Kinetics { .. } => (commands::run_kinetics(&cfg)?, None),
            Command::Channel { .. } => (commands::run_channel(&cfg)?, None),
        })
    })?;

    let stamp = !g.no_timestamp;
    emit(g.out.as_deref(), &outcome.table.to_csv(stamp))?;
    if let Some(p) = &g.jsonl {
        emit(Some(p), &outcome.table.to_jsonl())?;
    }
    if let (Some(p), Some(extra)) = (&dist_path, &outcome.extra) {
        emit(Some(p), &extra.to_csv(stamp))?;
    }
    if let (Some((p, _)), Some(s)) = (&raw, &samples) {
        let mut buf = Vec::new();
        write_raw_samples(&mut buf, s).expect("writing to memory");
        std::fs::write(p, buf).map_err(|source| Error::Io {
            path: p.clone(),
            source,
        })?;
    }

    match outcome.failure {
        Some(msg) if strict || !matches!(cli.command, Command::Validate { .. }) => {
            eprintln!("qslink: {msg}");
            Ok(EXIT_NUMERIC)
        }
        Some(msg) => {
            eprintln!("qslink: warning: {msg}");
            Ok(0)
        }
        None => Ok(0),
    }
}
