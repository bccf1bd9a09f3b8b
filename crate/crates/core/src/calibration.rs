//! Operating-point calibration.
//!
//! The source brightness and the receiver misalignment are not known a
//! priori; they are fitted so that a simulated acquisition yields the target
//! sifted rate and error rate. The multi-pair probability is fitted by
//! bisection on the simulated heralded g2(0). The constants below are the
//! frozen output of [`calibrate_all`] for the default configuration
//! (10 s acquisitions for the operating point, 60 s for g2, seed 1).

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::g2;
use crate::pipeline;

pub const CALIBRATED_PAIR_RATE_HZ: f64 = 192_190.0;
pub const CALIBRATED_MULTI_PAIR_PROB: f64 = 0.0203;
pub const CALIBRATED_MISALIGNMENT_PROB: f64 = 0.0639;

pub const TARGET_SIFTED_RATE_BPS: f64 = 14_000.0;
pub const TARGET_QBER: f64 = 0.07;
pub const TARGET_G2_ZERO: f64 = 0.0408;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub pair_rate_hz: f64,
    pub misalignment_prob: f64,
    pub sifted_rate_bps: f64,
    /// Error rate of the complete sifted key against Alice's record.
    pub error_rate: f64,
}

pub fn measure_operating_point(cfg: &PipelineConfig) -> Result<OperatingPoint> {
    let sim = pipeline::simulate(cfg)?;
    let key = pipeline::sift(cfg, &sim.herald, &sim.bob)?.key;
    if key.is_empty() {
        return Err(Error::NoKeyMaterial(
            "calibration run produced no sifted bits".into(),
        ));
    }
    Ok(OperatingPoint {
        pair_rate_hz: cfg.source.pair_rate_hz,
        misalignment_prob: cfg.channel.misalignment_prob,
        sifted_rate_bps: key.len() as f64 / cfg.duration_s,
        error_rate: key.error_rate(),
    })
}

/// Fixed-point iteration: the sifted rate is linear in the pair rate and the
/// error rate moves one-for-one with the misalignment.
pub fn calibrate_operating_point(
    base: &PipelineConfig,
    target_rate_bps: f64,
    target_qber: f64,
    iterations: usize,
) -> Result<OperatingPoint> {
    let mut cfg = base.clone();
    for _ in 0..iterations {
        let m = measure_operating_point(&cfg)?;
        cfg.source.pair_rate_hz *= target_rate_bps / m.sifted_rate_bps;
        cfg.channel.misalignment_prob =
            (cfg.channel.misalignment_prob + target_qber - m.error_rate).clamp(0.0, 0.5);
    }
    measure_operating_point(&cfg)
}

/// Simulated heralded g2(0) and its uncertainty.
pub fn measure_g2_zero(cfg: &PipelineConfig) -> Result<(f64, f64)> {
    let hbt = pipeline::simulate_hbt(cfg)?;
    let rates = g2::compute_rates(&hbt.herald, &hbt.i1, &hbt.i2, cfg.hbt.window_ps, 0)?;
    g2::g2_zero(&rates)
}

/// Bisection on `multi_pair_prob` over `[0, hi]` until the simulated g2(0)
/// is within `tolerance` of `target`. Returns `(multi_pair_prob, g2, sigma)`.
pub fn calibrate_multi_pair_prob(
    base: &PipelineConfig,
    target: f64,
    tolerance: f64,
    hi: f64,
    max_iterations: usize,
) -> Result<(f64, f64, f64)> {
    let mut cfg = base.clone();
    let (mut lo, mut hi) = (0.0, hi);
    let mut best = None;
    for _ in 0..max_iterations {
        let mid = 0.5 * (lo + hi);
        cfg.source.multi_pair_prob = mid;
        let (g, s) = measure_g2_zero(&cfg)?;
        best = Some((mid, g, s));
        if (g - target).abs() <= tolerance {
            break;
        }
        if g < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best.ok_or_else(|| Error::config("calibration needs at least one iteration"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub pair_rate_hz: f64,
    pub misalignment_prob: f64,
    pub multi_pair_prob: f64,
    pub sifted_rate_bps: f64,
    pub error_rate: f64,
    pub g2_zero: f64,
    pub g2_sigma: f64,
}

/// Operating point, then g2, then the operating point again at the fitted
/// multi-pair probability.
pub fn calibrate_all(
    base: &PipelineConfig,
    op_duration_s: f64,
    g2_duration_s: f64,
) -> Result<Calibration> {
    let mut cfg = base.clone();
    cfg.duration_s = op_duration_s;
    let op = calibrate_operating_point(&cfg, TARGET_SIFTED_RATE_BPS, TARGET_QBER, 3)?;
    cfg.source.pair_rate_hz = op.pair_rate_hz;
    cfg.channel.misalignment_prob = op.misalignment_prob;

    let mut hbt_cfg = cfg.clone();
    hbt_cfg.duration_s = g2_duration_s;
    let (p, g, s) = calibrate_multi_pair_prob(&hbt_cfg, TARGET_G2_ZERO, 0.001, 0.1, 12)?;
    cfg.source.multi_pair_prob = p;

    let op = calibrate_operating_point(&cfg, TARGET_SIFTED_RATE_BPS, TARGET_QBER, 2)?;
    Ok(Calibration {
        pair_rate_hz: op.pair_rate_hz,
        misalignment_prob: op.misalignment_prob,
        multi_pair_prob: p,
        sifted_rate_bps: op.sifted_rate_bps,
        error_rate: op.error_rate,
        g2_zero: g,
        g2_sigma: s,
    })
}
