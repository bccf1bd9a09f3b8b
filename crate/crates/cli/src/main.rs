use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hqkd_core::calibration;
use hqkd_core::pipeline::{self, files};
use hqkd_core::{Error, PipelineConfig, Result};

#[derive(Debug, Parser)]
#[command(
    name = "hqkd",
    version,
    about = "Heralded passive BB84: simulation and post-processing"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file; defaults are used when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory (default: config `output_dir`, else `out`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Acquisition time in seconds, overriding the config.
    #[arg(long = "duration-s", global = true, value_name = "X")]
    duration_s: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// All stages end to end.
    Run,
    /// Generate herald.qtag, bob.qtag and alice.csv (or the HBT streams).
    Simulate {
        /// Run the HBT acquisition instead of key distribution.
        #[arg(long)]
        hbt: bool,
    },
    /// Timestamp sifting of herald.qtag against bob.qtag.
    Sift,
    /// Error-rate estimation on a sample of the sifted key.
    Qber,
    /// LDPC reconciliation of the remaining key.
    Reconcile,
    /// Verification and Toeplitz privacy amplification.
    Amplify,
    /// g2 sweep over three tag files.
    G2 {
        #[arg(long, value_name = "PATH")]
        herald: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        i1: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        i2: Option<PathBuf>,
    },
    /// Key-rate report from the stage summaries.
    Report,
    /// Fit pair rate, misalignment and multi-pair probability to the targets.
    Calibrate {
        #[arg(long, default_value_t = 10.0)]
        op_duration_s: f64,
        #[arg(long, default_value_t = 60.0)]
        g2_duration_s: f64,
    },
    /// Print the effective configuration as TOML.
    Config,
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(d) = common.duration_s {
        cfg.duration_s = d;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: &PipelineConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = load_config(&cli.common).map_err(|e| e.in_stage("config"))?;
    let out = out_dir(&cli.common, &cfg);
    match &cli.command {
        Command::Run => {
            let report = pipeline::run_pipeline(&cfg, &out)?;
            print!("{}", report.to_kv());
        }
        Command::Simulate { hbt: false } => pipeline::stage_simulate(&cfg, &out)?,
        Command::Simulate { hbt: true } => {
            pipeline::stage_simulate_hbt(&cfg, &out)?;
        }
        Command::Sift => {
            let outcome = pipeline::stage_sift(&cfg, &out)?;
            print!("{}", hqkd_core::sifting::stats_report(&outcome.stats));
        }
        Command::Qber => {
            let q = pipeline::stage_qber(&cfg, &out)?;
            println!("qber={}\nsample_bits={}", q.qber, q.sample_bits);
        }
        Command::Reconcile => {
            let s = pipeline::stage_reconcile(&cfg, &out)?;
            println!(
                "reconciled_bits={}\nblocks_attempted={}\nblocks_failed={}\nleakage_bits={}",
                s.reconciled_bits, s.blocks_attempted, s.blocks_failed, s.leakage_bits
            );
        }
        Command::Amplify => {
            let a = pipeline::stage_amplify(&cfg, &out)?;
            println!("verified={}\nsecure_bits={}", a.verified, a.secure_bits);
        }
        Command::G2 { herald, i1, i2 } => {
            let pick =
                |p: &Option<PathBuf>, name: &str| p.clone().unwrap_or_else(|| out.join(name));
            let points = pipeline::stage_g2(
                &cfg,
                &pick(herald, files::HBT_HERALD),
                &pick(i1, files::HBT_I1),
                &pick(i2, files::HBT_I2),
                &out,
            )?;
            if let Some(p) = points.iter().find(|p| p.tau_ps == 0) {
                println!("g2_zero={}\nsigma={}", p.g2, p.sigma);
            }
        }
        Command::Report => {
            let report = pipeline::stage_report(&cfg, &out)?;
            print!("{}", report.to_kv());
        }
        Command::Calibrate {
            op_duration_s,
            g2_duration_s,
        } => {
            let c = calibration::calibrate_all(&cfg, *op_duration_s, *g2_duration_s)
                .map_err(|e| e.in_stage("calibrate"))?;
            println!(
                "pair_rate_hz={}\nmisalignment_prob={}\nmulti_pair_prob={}\nsifted_rate_bps={}\nerror_rate={}\ng2_zero={}\ng2_sigma={}",
                c.pair_rate_hz, c.misalignment_prob, c.multi_pair_prob, c.sifted_rate_bps, c.error_rate, c.g2_zero, c.g2_sigma
            );
        }
        Command::Config => print!("{}", cfg.to_toml_string()?),
    }
    Ok(())
}

fn error_line(e: &Error) -> String {
    let (stage, inner) = match e {
        Error::Stage { stage, source } => (*stage, source.as_ref()),
        other => ("cli", other),
    };
    let msg = inner.to_string().replace('\n', " ");
    format!("error: stage={stage} kind={} msg={msg}", e.kind())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::FAILURE
        }
    }
}
