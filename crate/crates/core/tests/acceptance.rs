//! Acceptance suite. Every criterion prints one `acceptance N [name]: PASS|FAIL`
//! line on stdout (bypassing the harness capture) and then asserts.

use std::collections::HashMap;
use std::io::Write as _;
use std::path::Path as FsPath;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hqkd_core::calibration::{TARGET_QBER, TARGET_SIFTED_RATE_BPS};
use hqkd_core::config::PipelineConfig;
use hqkd_core::g2::{read_g2_csv, G2Point};
use hqkd_core::pipeline::{self, files, PipelineRun};
use hqkd_core::postproc::entropy::{binary_entropy, secure_key_length};
use hqkd_core::postproc::ldpc::{
    flip_bits, ldpc_reconcile, ldpc_syndrome, reconcile_blocks, DecodeOutcome, LdpcCode,
};
use hqkd_core::postproc::toeplitz::{toeplitz_extract, ToeplitzSeed};
use hqkd_core::sifting::{
    accidental_sift_expectation, expected_offset, sift_bruteforce_detailed, sift_detailed,
};
use hqkd_core::timetag::{channels, TagStream, TimeTagRecord};
use hqkd_core::transmitter::{Path, PathDelayTable, PathEntry, PolarizationState};
use hqkd_core::{Error, SiftConfig};

fn report(n: u32, name: &str, pass: bool, details: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "acceptance {n} [{name}]: {verdict} {details}");
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t0 = Instant::now();
    let v = f();
    (v, t0.elapsed())
}

// ---------------------------------------------------------------------------
// 1. Operating point

fn operating_run() -> &'static (PipelineRun, Duration) {
    static RUN: OnceLock<(PipelineRun, Duration)> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = PipelineConfig {
            duration_s: 10.0,
            ..PipelineConfig::default()
        };
        let (run, t) = timed(|| pipeline::run_in_memory(&cfg));
        (run.expect("10 s acquisition"), t)
    })
}

#[test]
fn c1_operating_point() {
    let (run, t) = operating_run();
    let r = &run.report;
    let qber_ok = (r.qber - TARGET_QBER).abs() <= 0.01;
    let rate_ok =
        (r.sifted_rate_bps - TARGET_SIFTED_RATE_BPS).abs() <= 0.2 * TARGET_SIFTED_RATE_BPS;
    let time_ok = *t < Duration::from_secs(60);
    let pass = qber_ok && rate_ok && time_ok;
    report(
        1,
        "operating point: qber and sifted rate",
        pass,
        &format!(
            "qber={:.4} (0.06..0.08) sifted_rate={:.0} bps (11200..16800) runtime={:.1}s (<60)",
            r.qber,
            r.sifted_rate_bps,
            t.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn c1_secure_rate() {
    let (run, _) = operating_run();
    let r = &run.report;
    let pass = r.verified && (r.secure_rate_bps - 5_000.0).abs() <= 0.3 * 5_000.0;
    report(
        1,
        "operating point: secure rate",
        pass,
        &format!(
            "secure_rate={:.0} bps (3500..6500) verified={} blocks_failed={}/{} f_model_rate={:.0} bps",
            r.secure_rate_bps,
            r.verified,
            r.blocks_failed,
            r.blocks_attempted,
            r.secure_bits_f_model as f64 / r.duration_s
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 2. g2

struct HbtOutcome {
    points: Vec<G2Point>,
    rates: HashMap<String, String>,
    elapsed: Duration,
    _dir: tempfile::TempDir,
}

fn read_kv(path: &FsPath) -> HashMap<String, String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn hbt_run() -> &'static HbtOutcome {
    static RUN: OnceLock<HbtOutcome> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path();
        let cfg = PipelineConfig {
            duration_s: 60.0,
            ..PipelineConfig::default()
        };
        let (points, elapsed) = timed(|| {
            pipeline::stage_simulate_hbt(&cfg, out).unwrap();
            pipeline::stage_g2(
                &cfg,
                &out.join(files::HBT_HERALD),
                &out.join(files::HBT_I1),
                &out.join(files::HBT_I2),
                out,
            )
            .unwrap()
        });
        assert_eq!(read_g2_csv(out.join(files::G2)).unwrap(), points);
        HbtOutcome {
            points,
            rates: read_kv(&out.join(files::G2_RATES)),
            elapsed,
            _dir: dir,
        }
    })
}

#[test]
fn c2_g2_zero() {
    let hbt = hbt_run();
    let num = |k: &str| -> f64 { hbt.rates[k].parse().unwrap() };
    let (g, sigma) = (num("g2"), num("sigma"));
    let (ns, n12, n13, n123) = (num("n_s"), num("n_s_i1"), num("n_s_i2"), num("n_s_i1_i2"));
    // Independent Poisson propagation through g = N_s N_123 / (N_12 N_13).
    let g_oracle = ns * n123 / (n12 * n13);
    let sigma_oracle = g_oracle * (1.0 / ns + 1.0 / n12 + 1.0 / n13 + 1.0 / n123).sqrt();
    let range_ok = (0.030..=0.052).contains(&g);
    let sigma_ok = (g - g_oracle).abs() <= 1e-12 * g_oracle
        && (sigma - sigma_oracle).abs() <= 1e-9 * sigma_oracle;
    let time_ok = hbt.elapsed < Duration::from_secs(120);
    let pass = range_ok && sigma_ok && time_ok;
    report(
        2,
        "g2(0) of a 60 s HBT run",
        pass,
        &format!(
            "g2={g:.5} (0.030..0.052) sigma={sigma:.6} oracle_sigma={sigma_oracle:.6} triples={n123} runtime={:.1}s (<120)",
            hbt.elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn c2_sweep_shape() {
    let hbt = hbt_run();
    let at0 = hbt
        .points
        .iter()
        .find(|p| p.tau_ps == 0)
        .expect("tau 0 in sweep");
    let min = hbt
        .points
        .iter()
        .filter(|p| p.sigma.is_finite())
        .min_by(|a, b| a.g2.total_cmp(&b.g2))
        .unwrap();
    let slack = 2.0 * (at0.sigma.powi(2) + min.sigma.powi(2)).sqrt();
    let dip_ok = at0.g2 <= min.g2 + slack;
    let shoulder: Vec<f64> = hbt
        .points
        .iter()
        .filter(|p| p.tau_ps.abs() > 5_000)
        .map(|p| p.g2)
        .collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let side = |neg: bool| -> Vec<f64> {
        hbt.points
            .iter()
            .filter(|p| {
                if neg {
                    p.tau_ps < -5_000
                } else {
                    p.tau_ps > 5_000
                }
            })
            .map(|p| p.g2)
            .collect()
    };
    let shoulder_mean = mean(&shoulder);
    let shoulder_ok = (shoulder_mean - 1.0).abs() <= 0.1;
    let pass = dip_ok && shoulder_ok && !shoulder.is_empty();
    report(
        2,
        "g2 sweep: dip at 0, shoulders near 1",
        pass,
        &format!(
            "g2(0)={:.5} argmin_tau={} ps g2_min={:.5} slack={:.5} shoulder_mean={:.3} (0.9..1.1) neg_side={:.3} pos_side={:.3}",
            at0.g2,
            min.tau_ps,
            min.g2,
            slack,
            shoulder_mean,
            mean(&side(true)),
            mean(&side(false))
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 3. Noiseless limit

#[test]
fn c3_noiseless_limit() {
    let mut cfg = PipelineConfig::default();
    cfg.source.herald_efficiency = 1.0;
    cfg.source.multi_pair_prob = 0.0;
    cfg.channel.transmittance = 1.0;
    cfg.channel.coupling_efficiency = 1.0;
    cfg.channel.misalignment_prob = 0.0;
    cfg.detector.efficiency = 1.0;
    cfg.detector.dark_rate_hz = 0.0;
    cfg.detector.jitter_sigma_ps = 0.0;
    let sim = pipeline::simulate(&cfg).unwrap();
    let key = pipeline::sift(&cfg, &sim.herald, &sim.bob).unwrap().key;

    let mut sent: HashMap<u64, Vec<PolarizationState>> = HashMap::new();
    for r in &sim.alice {
        sent.entry(r.emit_time_ps).or_default().push(r.state);
    }
    let mut state_mismatch = 0;
    for e in &key.events {
        let emit = e.herald_ps - cfg.source.herald_delay_ps;
        match sent.get(&emit).map(Vec::as_slice) {
            Some([s]) if *s == e.state => {}
            _ => state_mismatch += 1,
        }
    }
    let errors = key.errors();
    let pass = errors == 0 && key.len() >= 10_000 && state_mismatch == 0;
    report(
        3,
        "noiseless limit",
        pass,
        &format!(
            "sifted={} (>=10000) errors={errors} state_mismatches={state_mismatch}",
            key.len()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 4. Sifting oracle

const STATES: [PolarizationState; 4] = [
    PolarizationState::H,
    PolarizationState::V,
    PolarizationState::D,
    PolarizationState::A,
];

fn random_sift_config(rng: &mut ChaCha8Rng) -> SiftConfig {
    loop {
        let mut states = STATES;
        for i in (1..4).rev() {
            states.swap(i, rng.random_range(0..=i));
        }
        let mut entry = |k: usize| PathEntry {
            delay_ps: rng.random_range(0..20_000),
            state: states[k],
        };
        let table = PathDelayTable {
            ac: entry(0),
            ad: entry(1),
            bc: entry(2),
            bd: entry(3),
        };
        let cfg = SiftConfig {
            window_ps: rng.random_range(1..3_000),
            delta_ch_ps: rng.random_range(0..5_000),
            herald_delay_ps: rng.random_range(0..5_000),
            table,
        };
        if cfg.validate().is_ok() {
            return cfg;
        }
    }
}

fn random_streams(rng: &mut ChaCha8Rng, cfg: &SiftConfig) -> (TagStream, TagStream) {
    let duration = rng.random_range(10_000..2_000_000u64);
    let n_heralds = rng.random_range(0..400);
    let heralds: Vec<TimeTagRecord> = (0..n_heralds)
        .map(|_| TimeTagRecord::new(rng.random_range(0..=duration), channels::HERALD))
        .collect();
    let herald = TagStream::from_unsorted(heralds, duration);
    let w = cfg.window_ps as i64;
    let mut bob = Vec::new();
    for h in herald.records() {
        if rng.random_bool(0.6) {
            let path = Path::ALL[rng.random_range(0..4)];
            let jitter = rng.random_range(-w..=w);
            let t = h.time_ps as i64 + expected_offset(cfg, path) + jitter;
            if (0..=duration as i64).contains(&t) {
                bob.push(TimeTagRecord::new(t as u64, rng.random_range(1..=4)));
            }
        }
    }
    for _ in 0..rng.random_range(0..200) {
        bob.push(TimeTagRecord::new(
            rng.random_range(0..=duration),
            rng.random_range(1..=4),
        ));
    }
    (herald, TagStream::from_unsorted(bob, duration))
}

#[test]
fn c4_sift_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = 0;
    let mut retained = 0;
    for _ in 0..200 {
        let cfg = random_sift_config(&mut rng);
        let (herald, bob) = random_streams(&mut rng, &cfg);
        assert!(herald.len() + bob.len() <= 1_000);
        let fast = sift_detailed(&herald, &bob, &cfg).unwrap();
        let slow = sift_bruteforce_detailed(&herald, &bob, &cfg).unwrap();
        retained += fast.key.len();
        if fast != slow {
            mismatches += 1;
        }
    }
    let pass = mismatches == 0 && retained > 0;
    report(
        4,
        "sift equals brute force",
        pass,
        &format!("instances=200 mismatches={mismatches} retained_events={retained}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 5. Delay-table guard

#[test]
fn c5_delay_table_guard() {
    let table = PathDelayTable::default();
    let rejected_1800 = table.validate_for_window(1_800).is_err();
    let rejected_1720 = table.validate_for_window(1_720).is_err();
    let accepted_1500 = table.validate_for_window(1_500).is_ok();
    let mut cfg = PipelineConfig::default();
    let config_default_ok = cfg.validate().is_ok();
    cfg.sift.window_ps = 1_800;
    let config_rejected = matches!(cfg.validate(), Err(Error::Config(_)));
    let pass =
        rejected_1800 && rejected_1720 && accepted_1500 && config_default_ok && config_rejected;
    report(
        5,
        "delay-table guard",
        pass,
        &format!(
            "same_basis_gap={} ps reject(1800)={rejected_1800} reject(1720)={rejected_1720} accept(1500)={accepted_1500} config_reject(1800)={config_rejected}",
            table.min_same_basis_gap_ps()
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 6. Reconciliation

#[test]
fn c6_reconciliation() {
    let code = LdpcCode::default_half_rate();
    let n = code.block_length();
    let blocks = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let alice: Vec<u8> = (0..n * blocks)
        .map(|_| rng.random::<bool>() as u8)
        .collect();
    let bob = flip_bits(&alice, 0.07, 66);

    let mut successes = 0;
    let mut wrong = 0;
    for (a, b) in alice.chunks_exact(n).zip(bob.chunks_exact(n)) {
        let syndrome = ldpc_syndrome(&code, a).unwrap();
        if let DecodeOutcome::Corrected { bits, .. } =
            ldpc_reconcile(&code, b, &syndrome, 0.07, 60).unwrap()
        {
            successes += 1;
            if bits != a {
                wrong += 1;
            }
        }
    }
    let rec = reconcile_blocks(&code, &alice, &bob, 0.07, 60).unwrap();
    let retained = rec.blocks_attempted - rec.blocks_failed;
    let leakage_ok = code.syndrome_length() == 2_048
        && rec.leakage_bits == (retained * code.syndrome_length()) as u64;
    let pass = successes >= 90
        && wrong == 0
        && rec.alice == rec.bob
        && retained == successes
        && leakage_ok;
    report(
        6,
        "LDPC reconciliation at 7%",
        pass,
        &format!(
            "success={successes}/100 (>=90) wrong_corrections={wrong} leakage={} bits for {retained} blocks (2048 each)",
            rec.leakage_bits
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 7. Toeplitz

fn naive_toeplitz(x: &[u8], seed: &[u8], n_out: usize) -> Vec<u8> {
    let n_in = x.len();
    (0..n_out)
        .map(|i| (0..n_in).fold(0u8, |acc, j| acc ^ (seed[i + n_in - 1 - j] & x[j])))
        .collect()
}

fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random::<bool>() as u8).collect()
}

#[test]
fn c7_toeplitz() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut oracle_mismatches = 0;
    for _ in 0..1_000 {
        let n_in = rng.random_range(1..=256);
        let n_out = rng.random_range(1..=n_in.min(128));
        let seed_bits = random_bits(&mut rng, n_in + n_out - 1);
        let x = random_bits(&mut rng, n_in);
        let seed = ToeplitzSeed::new(seed_bits.clone(), n_in, n_out).unwrap();
        if toeplitz_extract(&x, &seed).unwrap() != naive_toeplitz(&x, &seed_bits, n_out) {
            oracle_mismatches += 1;
        }
    }
    let mut linearity_failures = 0;
    for _ in 0..1_000 {
        let n_in = rng.random_range(1..=256);
        let n_out = rng.random_range(1..=n_in.min(128));
        let seed = ToeplitzSeed::random(n_in, n_out, rng.random()).unwrap();
        let x = random_bits(&mut rng, n_in);
        let y = random_bits(&mut rng, n_in);
        let xy: Vec<u8> = x.iter().zip(&y).map(|(a, b)| a ^ b).collect();
        let hx = toeplitz_extract(&x, &seed).unwrap();
        let hy = toeplitz_extract(&y, &seed).unwrap();
        let sum: Vec<u8> = hx.iter().zip(&hy).map(|(a, b)| a ^ b).collect();
        if toeplitz_extract(&xy, &seed).unwrap() != sum {
            linearity_failures += 1;
        }
    }
    let pass = oracle_mismatches == 0 && linearity_failures == 0;
    report(
        7,
        "Toeplitz extraction",
        pass,
        &format!("oracle_mismatches={oracle_mismatches}/1000 linearity_failures={linearity_failures}/1000"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 8. Accidental sift rate

#[test]
fn c8_accidental_rate() {
    let mut observed = 0u64;
    let mut expected = 0.0;
    let mut naive = 0.0;
    for seed in 1..=20 {
        let mut cfg = PipelineConfig::default();
        cfg.seed = seed;
        cfg.detector.efficiency = 0.0;
        cfg.detector.dark_rate_hz = 20_000.0;
        let sim = pipeline::simulate(&cfg).unwrap();
        observed += pipeline::sift(&cfg, &sim.herald, &sim.bob)
            .unwrap()
            .key
            .len() as u64;
        let tags =
            4.0 * cfg.detector.dead_time_throughput(cfg.detector.dark_rate_hz) * cfg.duration_s;
        let herald_rate = cfg.source.pair_rate_hz * cfg.source.herald_efficiency;
        expected += accidental_sift_expectation(&cfg.sift_config(), tags, herald_rate);
        naive += tags * herald_rate * 4.0 * cfg.sift.window_ps as f64 * 1e-12;
    }
    let z = (observed as f64 - expected) / expected.sqrt();
    let pass = z.abs() <= 3.0;
    report(
        8,
        "accidental sift rate from dark counts",
        pass,
        &format!(
            "seeds=20 observed={observed} expected={expected:.1} z={z:.2} (|z|<=3) candidate_matches_before_basis_filter={naive:.1}"
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 9. Entropy and key length

#[test]
fn c9_entropy_and_key_length() {
    let n = 1_000_000;
    let zero_above_half = [0.5, 0.6, 0.99, 1.0].iter().all(|&q| {
        secure_key_length(n, q, 0, 0.0, 1e-10) == 0 && secure_key_length(n, q, 0, 0.04, 2.0) == 0
    });
    let grid: Vec<u64> = (0..50)
        .map(|k| secure_key_length(n, 0.5 * k as f64 / 50.0, 1_000, 0.04, 1e-10))
        .collect();
    let monotone = grid
        .windows(2)
        .all(|w| w[1] < w[0] || (w[1] == 0 && w[0] == 0));
    let h = binary_entropy(0.07).unwrap();
    let h_ok = (h - 0.36592).abs() <= 1e-5;
    let pass = zero_above_half && monotone && h_ok;
    report(
        9,
        "entropy and key length",
        pass,
        &format!(
            "zero_at_qber>=0.5={zero_above_half} monotone_on_50_points={monotone} H2(0.07)={h:.6}"
        ),
    );
    assert!(pass);
}
