//! End-to-end pipeline: simulate → sift → qber → reconcile → amplify → report,
//! plus the HBT acquisition and g2 analysis.
//!
//! Each stage exists in two forms: an in-memory function and a `stage_*`
//! function that reads the previous stage's artifacts from a directory and
//! writes its own. Seeds are derived from the master seed and a stage label,
//! so both forms produce identical results.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::g2::{self, G2Point, G2Rates};
use crate::postproc::{
    binary_entropy, estimate_qber, read_key, reconcile_blocks, secure_key_length, toeplitz_extract,
    verify_keys, write_key, KeyRateReport, Reconciliation, ToeplitzSeed,
};
use crate::receiver::{
    finalize_clicks, project_arrivals, register_impacts, transmit, BOB_CHANNELS,
};
use crate::seed::{derive_seed, rng_from_seed};
use crate::sifting::{self, SiftOutcome, SiftedKey};
use crate::source::{generate_emissions, herald_stream, idler_emissions};
use crate::timetag::{channels, read_tags, write_tags, TagStream};
use crate::transmitter::{encode, write_alice_csv, AliceRecord};

/// Fixed artifact names inside the output directory.
pub mod files {
    pub const CONFIG: &str = "config.toml";
    pub const HERALD: &str = "herald.qtag";
    pub const BOB: &str = "bob.qtag";
    pub const ALICE: &str = "alice.csv";
    pub const SIFTED: &str = "sifted.csv";
    pub const SIFT_STATS: &str = "sift_stats.txt";
    pub const QBER: &str = "qber.txt";
    pub const REMAINING: &str = "remaining.csv";
    pub const RECONCILED_ALICE: &str = "reconciled_alice.qkey";
    pub const RECONCILED_BOB: &str = "reconciled_bob.qkey";
    pub const RECONCILE: &str = "reconcile.txt";
    pub const KEY: &str = "key.bin";
    pub const KEY_BOB: &str = "key_bob.bin";
    pub const AMPLIFY: &str = "amplify.txt";
    pub const REPORT: &str = "report.txt";
    pub const REPORT_CSV: &str = "report.csv";
    pub const HBT_HERALD: &str = "hbt_herald.qtag";
    pub const HBT_I1: &str = "hbt_i1.qtag";
    pub const HBT_I2: &str = "hbt_i2.qtag";
    pub const G2: &str = "g2.csv";
    pub const G2_RATES: &str = "g2_rates.txt";
    /// Present only when a run aborted; names the failing stage.
    pub const FAILED: &str = "FAILED";
}

/// Emissions are generated in slices of at most one second, each with its
/// own derived seeds, to bound memory on long acquisitions.
const SLICE_PS: u64 = 1_000_000_000_000;

fn slices(duration_ps: u64) -> impl Iterator<Item = (u64, u64, u64)> {
    let n = duration_ps.div_ceil(SLICE_PS);
    (0..n).map(move |k| {
        let start = k * SLICE_PS;
        (k, start, SLICE_PS.min(duration_ps - start))
    })
}

fn slice_seed(master: u64, stage: &str, k: u64) -> u64 {
    derive_seed(master, &format!("{stage}/{k}"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub herald: TagStream,
    pub bob: TagStream,
    pub alice: Vec<AliceRecord>,
}

pub fn simulate(cfg: &PipelineConfig) -> Result<Simulation> {
    cfg.validate()?;
    let duration = cfg.duration_ps();
    let mut heralds = Vec::new();
    let mut clicks = Vec::new();
    let mut alice = Vec::new();
    for (k, start, len) in slices(duration) {
        let mut emissions =
            generate_emissions(&cfg.source, len, slice_seed(cfg.seed, "source", k))?;
        for e in &mut emissions {
            e.time_ps += start;
        }
        heralds.extend(
            herald_stream(
                &emissions,
                &cfg.source,
                duration,
                slice_seed(cfg.seed, "herald", k),
            )
            .into_records(),
        );
        let encoded = encode(
            &idler_emissions(&emissions),
            &cfg.table,
            &cfg.encoder,
            slice_seed(cfg.seed, "encode", k),
        )?;
        drop(emissions);
        alice.extend(encoded.alice);
        let arrivals = transmit(
            &encoded.photons,
            &cfg.channel,
            slice_seed(cfg.seed, "channel", k),
        )?;
        let mut rng = rng_from_seed(slice_seed(cfg.seed, "detect", k));
        let impacts = project_arrivals(&arrivals, &cfg.channel, &mut rng)?;
        clicks.extend(register_impacts(
            impacts,
            &cfg.detector,
            duration,
            &mut rng,
        )?);
    }
    let mut rng = rng_from_seed(derive_seed(cfg.seed, "dark"));
    let bob = finalize_clicks(clicks, &cfg.detector, &BOB_CHANNELS, duration, &mut rng)?;
    Ok(Simulation {
        herald: TagStream::from_unsorted(heralds, duration),
        bob,
        alice,
    })
}

pub fn sift(cfg: &PipelineConfig, herald: &TagStream, bob: &TagStream) -> Result<SiftOutcome> {
    sifting::sift_detailed(herald, bob, &cfg.sift_config())
}

#[derive(Debug, Clone, PartialEq)]
pub struct QberEstimate {
    pub qber: f64,
    pub sample_bits: u64,
    /// Sifted events left after the disclosed sample is removed.
    pub remaining: SiftedKey,
}

pub fn qber(cfg: &PipelineConfig, key: &SiftedKey) -> Result<QberEstimate> {
    let (qber, remaining) = estimate_qber(
        key,
        cfg.postproc.qber_sample_fraction,
        derive_seed(cfg.seed, "qber"),
    )?;
    Ok(QberEstimate {
        qber,
        sample_bits: (key.len() - remaining.len()) as u64,
        remaining,
    })
}

/// Error rate handed to the decoder for an estimated QBER.
pub fn decoder_qber(cfg: &PipelineConfig, qber: f64) -> f64 {
    qber.clamp(cfg.postproc.decoder_min_qber, 0.49)
}

pub fn reconcile(cfg: &PipelineConfig, remaining: &SiftedKey, qber: f64) -> Result<Reconciliation> {
    let code = cfg.postproc.ldpc_code()?;
    reconcile_blocks(
        &code,
        &remaining.alice_bits(),
        &remaining.bob_bits(),
        decoder_qber(cfg, qber),
        cfg.postproc.ldpc_max_iterations,
    )
}

/// Scalar outcome of reconciliation, as persisted between stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReconcileSummary {
    pub reconciled_bits: u64,
    pub blocks_attempted: u64,
    pub blocks_failed: u64,
    pub leakage_bits: u64,
    pub tail_discarded: u64,
}

impl From<&Reconciliation> for ReconcileSummary {
    fn from(r: &Reconciliation) -> Self {
        Self {
            reconciled_bits: r.alice.len() as u64,
            blocks_attempted: r.blocks_attempted as u64,
            blocks_failed: r.blocks_failed as u64,
            leakage_bits: r.leakage_bits,
            tail_discarded: r.tail_discarded as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Amplified {
    pub verified: bool,
    pub multiphoton_fraction: f64,
    pub secure_bits: u64,
    pub secure_bits_f_model: u64,
    pub alice_key: Vec<u8>,
    pub bob_key: Vec<u8>,
}

/// Verifies the reconciled keys and compresses them to the secure length.
/// A failed verification leaves no key.
pub fn amplify(
    cfg: &PipelineConfig,
    alice: &[u8],
    bob: &[u8],
    leakage_bits: u64,
    qber: f64,
) -> Result<Amplified> {
    if alice.len() != bob.len() {
        return Err(Error::LengthMismatch {
            expected: alice.len(),
            actual: bob.len(),
        });
    }
    let verified = verify_keys(alice, bob, derive_seed(cfg.seed, "verify"));
    let n = alice.len() as u64;
    let pp = &cfg.postproc;
    let mpf = g2::multiphoton_fraction_bound(pp.g2_zero, pp.heralded_mean_photon_number);
    let f_leak =
        (pp.ec_efficiency * binary_entropy(qber.clamp(0.0, 0.5))? * n as f64).ceil() as u64;
    let secure_bits_f_model = secure_key_length(n, qber, f_leak, mpf, pp.epsilon_sec);
    let secure_bits = if verified {
        secure_key_length(n, qber, leakage_bits, mpf, pp.epsilon_sec)
    } else {
        0
    };
    let (alice_key, bob_key) = if secure_bits > 0 {
        let seed = ToeplitzSeed::random(
            alice.len(),
            secure_bits as usize,
            derive_seed(cfg.seed, "toeplitz"),
        )?;
        (
            toeplitz_extract(alice, &seed)?,
            toeplitz_extract(bob, &seed)?,
        )
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(Amplified {
        verified,
        multiphoton_fraction: mpf,
        secure_bits,
        secure_bits_f_model,
        alice_key,
        bob_key,
    })
}

pub fn build_report(
    cfg: &PipelineConfig,
    sifted_bits: u64,
    qber: f64,
    qber_sample_bits: u64,
    rec: &ReconcileSummary,
    amp: &Amplified,
) -> KeyRateReport {
    let secs = cfg.duration_s;
    KeyRateReport {
        duration_s: secs,
        sifted_bits,
        sifted_rate_bps: sifted_bits as f64 / secs,
        qber,
        qber_sample_bits,
        reconciled_bits: rec.reconciled_bits,
        blocks_attempted: rec.blocks_attempted,
        blocks_failed: rec.blocks_failed,
        ec_leakage_bits: rec.leakage_bits,
        verified: amp.verified,
        multiphoton_fraction: amp.multiphoton_fraction,
        secure_bits: amp.secure_bits,
        secure_rate_bps: amp.secure_bits as f64 / secs,
        secure_bits_f_model: amp.secure_bits_f_model,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub simulation: Simulation,
    pub sift: SiftOutcome,
    pub qber: QberEstimate,
    pub reconciliation: Reconciliation,
    pub amplified: Amplified,
    pub report: KeyRateReport,
}

/// All key-distribution stages in memory, without touching the filesystem.
pub fn run_in_memory(cfg: &PipelineConfig) -> Result<PipelineRun> {
    let simulation = simulate(cfg).map_err(|e| e.in_stage("simulate"))?;
    let sifted = sift(cfg, &simulation.herald, &simulation.bob).map_err(|e| e.in_stage("sift"))?;
    postprocess(cfg, simulation, sifted)
}

fn postprocess(
    cfg: &PipelineConfig,
    simulation: Simulation,
    sifted: SiftOutcome,
) -> Result<PipelineRun> {
    let q = qber(cfg, &sifted.key).map_err(|e| e.in_stage("qber"))?;
    let rec = reconcile(cfg, &q.remaining, q.qber).map_err(|e| e.in_stage("reconcile"))?;
    let amp = amplify(cfg, &rec.alice, &rec.bob, rec.leakage_bits, q.qber)
        .map_err(|e| e.in_stage("amplify"))?;
    let report = build_report(
        cfg,
        sifted.key.len() as u64,
        q.qber,
        q.sample_bits,
        &(&rec).into(),
        &amp,
    );
    Ok(PipelineRun {
        simulation,
        sift: sifted,
        qber: q,
        reconciliation: rec,
        amplified: amp,
        report,
    })
}

/// Runs every stage and writes all artifacts under `out`. On failure a
/// `FAILED` marker naming the stage is left next to the partial artifacts.
pub fn run_pipeline(cfg: &PipelineConfig, out: &Path) -> Result<KeyRateReport> {
    let result = run_pipeline_inner(cfg, out);
    if let Err(e) = &result {
        let stage = match e {
            Error::Stage { stage, .. } => stage,
            _ => "run",
        };
        let _ = std::fs::write(
            out.join(files::FAILED),
            format!("stage={stage}\nerror={e}\n"),
        );
    }
    result
}

fn run_pipeline_inner(cfg: &PipelineConfig, out: &Path) -> Result<KeyRateReport> {
    prepare_dir(out)?;
    let _ = std::fs::remove_file(out.join(files::FAILED));
    cfg.save(out.join(files::CONFIG))
        .map_err(|e| e.in_stage("config"))?;

    let simulation = simulate(cfg).map_err(|e| e.in_stage("simulate"))?;
    write_simulation(&simulation, out).map_err(|e| e.in_stage("simulate"))?;

    let sifted = sift(cfg, &simulation.herald, &simulation.bob).map_err(|e| e.in_stage("sift"))?;
    write_sift(&sifted, out).map_err(|e| e.in_stage("sift"))?;

    let q = qber(cfg, &sifted.key).map_err(|e| e.in_stage("qber"))?;
    write_qber(&q, out).map_err(|e| e.in_stage("qber"))?;

    let rec = reconcile(cfg, &q.remaining, q.qber).map_err(|e| e.in_stage("reconcile"))?;
    let summary = ReconcileSummary::from(&rec);
    write_reconcile(&rec, &summary, out).map_err(|e| e.in_stage("reconcile"))?;

    let amp = amplify(cfg, &rec.alice, &rec.bob, rec.leakage_bits, q.qber)
        .map_err(|e| e.in_stage("amplify"))?;
    write_amplify(&amp, out).map_err(|e| e.in_stage("amplify"))?;

    let report = build_report(
        cfg,
        sifted.key.len() as u64,
        q.qber,
        q.sample_bits,
        &summary,
        &amp,
    );
    write_report(&report, out).map_err(|e| e.in_stage("report"))?;
    Ok(report)
}

fn prepare_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_kv(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut map = BTreeMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("{}: malformed line `{line}`", path.display())))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn kv_get<T: FromStr>(map: &BTreeMap<String, String>, key: &str, path: &Path) -> Result<T> {
    map.get(key)
        .ok_or_else(|| Error::config(format!("{}: missing `{key}`", path.display())))?
        .parse()
        .map_err(|_| Error::config(format!("{}: bad value for `{key}`", path.display())))
}

fn write_simulation(sim: &Simulation, out: &Path) -> Result<()> {
    write_tags(&sim.herald, out.join(files::HERALD))?;
    write_tags(&sim.bob, out.join(files::BOB))?;
    write_alice_csv(&sim.alice, out.join(files::ALICE))
}

fn write_sift(outcome: &SiftOutcome, out: &Path) -> Result<()> {
    sifting::write_sifted_csv(&outcome.key, out.join(files::SIFTED))?;
    write_text(
        &out.join(files::SIFT_STATS),
        &sifting::stats_report(&outcome.stats),
    )
}

fn write_qber(q: &QberEstimate, out: &Path) -> Result<()> {
    write_text(
        &out.join(files::QBER),
        &format!("qber={}\nsample_bits={}\n", q.qber, q.sample_bits),
    )?;
    sifting::write_sifted_csv(&q.remaining, out.join(files::REMAINING))
}

fn read_qber(out: &Path) -> Result<(f64, u64)> {
    let path = out.join(files::QBER);
    let kv = read_kv(&path)?;
    Ok((
        kv_get(&kv, "qber", &path)?,
        kv_get(&kv, "sample_bits", &path)?,
    ))
}

fn write_reconcile(rec: &Reconciliation, s: &ReconcileSummary, out: &Path) -> Result<()> {
    write_key(&rec.alice, out.join(files::RECONCILED_ALICE))?;
    write_key(&rec.bob, out.join(files::RECONCILED_BOB))?;
    write_text(
        &out.join(files::RECONCILE),
        &format!(
            "reconciled_bits={}\nblocks_attempted={}\nblocks_failed={}\nleakage_bits={}\ntail_discarded={}\n",
            s.reconciled_bits, s.blocks_attempted, s.blocks_failed, s.leakage_bits, s.tail_discarded
        ),
    )
}

fn read_reconcile_summary(out: &Path) -> Result<ReconcileSummary> {
    let path = out.join(files::RECONCILE);
    let kv = read_kv(&path)?;
    Ok(ReconcileSummary {
        reconciled_bits: kv_get(&kv, "reconciled_bits", &path)?,
        blocks_attempted: kv_get(&kv, "blocks_attempted", &path)?,
        blocks_failed: kv_get(&kv, "blocks_failed", &path)?,
        leakage_bits: kv_get(&kv, "leakage_bits", &path)?,
        tail_discarded: kv_get(&kv, "tail_discarded", &path)?,
    })
}

fn write_amplify(amp: &Amplified, out: &Path) -> Result<()> {
    write_key(&amp.alice_key, out.join(files::KEY))?;
    write_key(&amp.bob_key, out.join(files::KEY_BOB))?;
    write_text(
        &out.join(files::AMPLIFY),
        &format!(
            "verified={}\nmultiphoton_fraction={}\nsecure_bits={}\nsecure_bits_f_model={}\n",
            amp.verified, amp.multiphoton_fraction, amp.secure_bits, amp.secure_bits_f_model
        ),
    )
}

fn read_amplify(out: &Path) -> Result<Amplified> {
    let path = out.join(files::AMPLIFY);
    let kv = read_kv(&path)?;
    Ok(Amplified {
        verified: kv_get(&kv, "verified", &path)?,
        multiphoton_fraction: kv_get(&kv, "multiphoton_fraction", &path)?,
        secure_bits: kv_get(&kv, "secure_bits", &path)?,
        secure_bits_f_model: kv_get(&kv, "secure_bits_f_model", &path)?,
        alice_key: read_key(out.join(files::KEY))?,
        bob_key: read_key(out.join(files::KEY_BOB))?,
    })
}

fn write_report(report: &KeyRateReport, out: &Path) -> Result<()> {
    write_text(&out.join(files::REPORT), &report.to_kv())?;
    let mut csv = KeyRateReport::csv_header();
    let _ = writeln!(csv);
    csv.push_str(&report.csv_row());
    let _ = writeln!(csv);
    write_text(&out.join(files::REPORT_CSV), &csv)
}

/// `simulate`: writes herald.qtag, bob.qtag and alice.csv.
pub fn stage_simulate(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let run = || {
        prepare_dir(out)?;
        let sim = simulate(cfg)?;
        write_simulation(&sim, out)
    };
    run().map_err(|e| e.in_stage("simulate"))
}

/// `sift`: herald.qtag + bob.qtag → sifted.csv and sift_stats.txt.
pub fn stage_sift(cfg: &PipelineConfig, out: &Path) -> Result<SiftOutcome> {
    let run = || {
        let herald = read_tags(out.join(files::HERALD))?;
        let bob = read_tags(out.join(files::BOB))?;
        let outcome = sift(cfg, &herald, &bob)?;
        write_sift(&outcome, out)?;
        Ok(outcome)
    };
    run().map_err(|e: Error| e.in_stage("sift"))
}

/// `qber`: sifted.csv → qber.txt and remaining.csv.
pub fn stage_qber(cfg: &PipelineConfig, out: &Path) -> Result<QberEstimate> {
    let run = || {
        let key = sifting::read_sifted_csv(out.join(files::SIFTED))?;
        let q = qber(cfg, &key)?;
        write_qber(&q, out)?;
        Ok(q)
    };
    run().map_err(|e: Error| e.in_stage("qber"))
}

/// `reconcile`: remaining.csv + qber.txt → reconciled keys and reconcile.txt.
pub fn stage_reconcile(cfg: &PipelineConfig, out: &Path) -> Result<ReconcileSummary> {
    let run = || {
        let remaining = sifting::read_sifted_csv(out.join(files::REMAINING))?;
        let (q, _) = read_qber(out)?;
        let rec = reconcile(cfg, &remaining, q)?;
        let summary = ReconcileSummary::from(&rec);
        write_reconcile(&rec, &summary, out)?;
        Ok(summary)
    };
    run().map_err(|e: Error| e.in_stage("reconcile"))
}

/// `amplify`: reconciled keys → key.bin, key_bob.bin and amplify.txt.
pub fn stage_amplify(cfg: &PipelineConfig, out: &Path) -> Result<Amplified> {
    let run = || {
        let alice = read_key(out.join(files::RECONCILED_ALICE))?;
        let bob = read_key(out.join(files::RECONCILED_BOB))?;
        let (q, _) = read_qber(out)?;
        let summary = read_reconcile_summary(out)?;
        let amp = amplify(cfg, &alice, &bob, summary.leakage_bits, q)?;
        write_amplify(&amp, out)?;
        Ok(amp)
    };
    run().map_err(|e: Error| e.in_stage("amplify"))
}

/// `report`: collects the stage summaries into report.txt and report.csv.
pub fn stage_report(cfg: &PipelineConfig, out: &Path) -> Result<KeyRateReport> {
    let run = || {
        let sifted = sifting::read_sifted_csv(out.join(files::SIFTED))?;
        if sifted.is_empty() {
            return Err(Error::NoKeyMaterial("sifted key is empty".into()));
        }
        let (q, sample_bits) = read_qber(out)?;
        let summary = read_reconcile_summary(out)?;
        let amp = read_amplify(out)?;
        let report = build_report(cfg, sifted.len() as u64, q, sample_bits, &summary, &amp);
        write_report(&report, out)?;
        Ok(report)
    };
    run().map_err(|e: Error| e.in_stage("report"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HbtRun {
    pub herald: TagStream,
    pub i1: TagStream,
    pub i2: TagStream,
}

/// HBT acquisition: the idler goes to the splitter instead of the encoder.
pub fn simulate_hbt(cfg: &PipelineConfig) -> Result<HbtRun> {
    cfg.validate()?;
    let duration = cfg.duration_ps();
    let mut heralds = Vec::new();
    let mut clicks = Vec::new();
    for (k, start, len) in slices(duration) {
        let mut emissions =
            generate_emissions(&cfg.source, len, slice_seed(cfg.seed, "hbt-source", k))?;
        for e in &mut emissions {
            e.time_ps += start;
        }
        heralds.extend(
            herald_stream(
                &emissions,
                &cfg.source,
                duration,
                slice_seed(cfg.seed, "hbt-herald", k),
            )
            .into_records(),
        );
        let mut rng = rng_from_seed(slice_seed(cfg.seed, "hbt-detect", k));
        clicks.extend(g2::hbt_clicks(
            &idler_emissions(&emissions),
            &cfg.hbt,
            &cfg.detector,
            duration,
            &mut rng,
        )?);
    }
    let mut rng = rng_from_seed(derive_seed(cfg.seed, "hbt-dark"));
    let idlers = finalize_clicks(
        clicks,
        &cfg.detector,
        &[channels::IDLER_1, channels::IDLER_2],
        duration,
        &mut rng,
    )?;
    Ok(HbtRun {
        herald: TagStream::from_unsorted(heralds, duration),
        i1: idlers.channel(channels::IDLER_1),
        i2: idlers.channel(channels::IDLER_2),
    })
}

/// Sweep over the configured delays and the rates at zero delay.
pub fn g2_analysis(
    cfg: &PipelineConfig,
    s: &TagStream,
    i1: &TagStream,
    i2: &TagStream,
) -> Result<(Vec<G2Point>, G2Rates)> {
    cfg.hbt.validate()?;
    let points = g2::g2_sweep(s, i1, i2, cfg.hbt.window_ps, &cfg.hbt.taus())?;
    let rates = g2::compute_rates(s, i1, i2, cfg.hbt.window_ps, 0)?;
    Ok((points, rates))
}

/// `simulate --hbt`: writes the three HBT streams.
pub fn stage_simulate_hbt(cfg: &PipelineConfig, out: &Path) -> Result<HbtRun> {
    let run = || {
        prepare_dir(out)?;
        let hbt = simulate_hbt(cfg)?;
        write_tags(&hbt.herald, out.join(files::HBT_HERALD))?;
        write_tags(&hbt.i1, out.join(files::HBT_I1))?;
        write_tags(&hbt.i2, out.join(files::HBT_I2))?;
        Ok(hbt)
    };
    run().map_err(|e: Error| e.in_stage("simulate"))
}

/// `g2`: three QTAG files → g2.csv and g2_rates.txt under `out`.
pub fn stage_g2(
    cfg: &PipelineConfig,
    herald: &Path,
    i1: &Path,
    i2: &Path,
    out: &Path,
) -> Result<Vec<G2Point>> {
    let run = || {
        prepare_dir(out)?;
        let (s, a, b) = (read_tags(herald)?, read_tags(i1)?, read_tags(i2)?);
        let (points, rates) = g2_analysis(cfg, &s, &a, &b)?;
        g2::write_g2_csv(&points, out.join(files::G2))?;
        g2::write_rates(&rates, out.join(files::G2_RATES))?;
        Ok(points)
    };
    run().map_err(|e: Error| e.in_stage("g2"))
}
