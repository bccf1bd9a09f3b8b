//! Free-space channel and Bob's passive-basis receiver.
//!
//! The channel applies loss and a fixed delay. At Bob, BS4 picks the basis,
//! the PBS projects onto one of two detectors and each detector applies its
//! efficiency, timing jitter, TDC quantization, dark counts and dead time.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{rng_from_seed, StageRng};
use crate::timetag::{channels, Channel, TagStream, TimeTagRecord};
use crate::transmitter::{Basis, PolarizationState, TransmittedPhoton};

/// Per-state coupling multipliers applied on top of the channel loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StateCoupling {
    pub h: f64,
    pub v: f64,
    pub d: f64,
    pub a: f64,
}

impl Default for StateCoupling {
    fn default() -> Self {
        Self {
            h: 1.0,
            v: 1.0,
            d: 1.0,
            a: 1.0,
        }
    }
}

impl StateCoupling {
    pub fn factor(&self, s: PolarizationState) -> f64 {
        match s {
            PolarizationState::H => self.h,
            PolarizationState::V => self.v,
            PolarizationState::D => self.d,
            PolarizationState::A => self.a,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    pub transmittance: f64,
    pub coupling_efficiency: f64,
    /// Fixed propagation delay from BS3 to Bob's detectors.
    pub delta_ch_ps: u64,
    /// Probability that a matched-basis photon lands on the wrong detector.
    pub misalignment_prob: f64,
    /// Probability that BS4 sends the photon to the rectilinear analyser.
    pub rectilinear_prob: f64,
    pub state_coupling: StateCoupling,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            transmittance: 0.98,
            coupling_efficiency: 0.85,
            delta_ch_ps: 2_500,
            misalignment_prob: crate::calibration::CALIBRATED_MISALIGNMENT_PROB,
            rectilinear_prob: 0.5,
            state_coupling: StateCoupling::default(),
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("transmittance", self.transmittance),
            ("coupling_efficiency", self.coupling_efficiency),
            ("misalignment_prob", self.misalignment_prob),
            ("rectilinear_prob", self.rectilinear_prob),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("channel.{name} must lie in [0, 1]")));
            }
        }
        for s in PolarizationState::ALL {
            let f = self.state_coupling.factor(s);
            if !(0.0..=1.0).contains(&(f * self.transmittance * self.coupling_efficiency))
                || f < 0.0
            {
                return Err(Error::config(format!(
                    "channel.state_coupling for {s} yields a survival probability outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    fn survival(&self, s: PolarizationState) -> f64 {
        self.transmittance * self.coupling_efficiency * self.state_coupling.factor(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    pub efficiency: f64,
    pub dark_rate_hz: f64,
    pub jitter_sigma_ps: f64,
    pub tdc_resolution_ps: u64,
    pub dead_time_ps: u64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            efficiency: 0.65,
            dark_rate_hz: 100.0,
            jitter_sigma_ps: 350.0,
            tdc_resolution_ps: 81,
            dead_time_ps: 22_000,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::config("detector.efficiency must lie in [0, 1]"));
        }
        if !(self.dark_rate_hz.is_finite() && self.dark_rate_hz >= 0.0) {
            return Err(Error::config("detector.dark_rate_hz must be >= 0"));
        }
        if !(self.jitter_sigma_ps.is_finite() && self.jitter_sigma_ps >= 0.0) {
            return Err(Error::config("detector.jitter_sigma_ps must be >= 0"));
        }
        Ok(())
    }

    /// Non-paralyzable dead-time throughput for an input rate.
    pub fn dead_time_throughput(&self, rate_hz: f64) -> f64 {
        rate_hz / (1.0 + rate_hz * self.dead_time_ps as f64 * 1e-12)
    }
}

/// Light reaching Bob's basis splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArrivingPhoton {
    pub emit_time_ps: u64,
    pub arrival_time_ps: u64,
    pub state: PolarizationState,
    pub n_photons: u8,
}

pub fn transmit(
    photons: &[TransmittedPhoton],
    ch: &ChannelParams,
    seed: u64,
) -> Result<Vec<ArrivingPhoton>> {
    ch.validate()?;
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(photons.len());
    for p in photons {
        let survive = ch.survival(p.state);
        let n = (0..p.n_photons)
            .filter(|_| rng.random_bool(survive))
            .count() as u8;
        if n > 0 {
            out.push(ArrivingPhoton {
                emit_time_ps: p.emit_time_ps,
                arrival_time_ps: p.exit_time_ps + ch.delta_ch_ps,
                state: p.state,
                n_photons: n,
            });
        }
    }
    Ok(out)
}

/// Bob's detector channel for each state.
pub fn detector_channel(s: PolarizationState) -> Channel {
    match s {
        PolarizationState::H => channels::BOB_H,
        PolarizationState::V => channels::BOB_V,
        PolarizationState::D => channels::BOB_D,
        PolarizationState::A => channels::BOB_A,
    }
}

/// State projected onto by a Bob detector channel, if it is one.
pub fn detector_state(channel: Channel) -> Option<PolarizationState> {
    match channel {
        channels::BOB_H => Some(PolarizationState::H),
        channels::BOB_V => Some(PolarizationState::V),
        channels::BOB_D => Some(PolarizationState::D),
        channels::BOB_A => Some(PolarizationState::A),
        _ => None,
    }
}

pub const BOB_CHANNELS: [Channel; 4] = [
    channels::BOB_H,
    channels::BOB_V,
    channels::BOB_D,
    channels::BOB_A,
];

fn quantize(t: u64, resolution: u64) -> u64 {
    if resolution > 1 {
        t - t % resolution
    } else {
        t
    }
}

/// Efficiency, jitter and TDC quantization for ideal `(time, channel)`
/// impacts, in input order. Clicks jittered past `duration_ps` are dropped.
pub fn register_impacts(
    impacts: impl IntoIterator<Item = (u64, Channel)>,
    det: &DetectorParams,
    duration_ps: u64,
    rng: &mut StageRng,
) -> Result<Vec<TimeTagRecord>> {
    det.validate()?;
    let jitter = if det.jitter_sigma_ps > 0.0 {
        Some(Normal::new(0.0, det.jitter_sigma_ps).map_err(|e| Error::config(e.to_string()))?)
    } else {
        None
    };
    let mut clicks = Vec::new();
    for (t, ch) in impacts {
        if !rng.random_bool(det.efficiency) {
            continue;
        }
        let t = match &jitter {
            Some(n) => (t as f64 + n.sample(rng)).round().max(0.0) as u64,
            None => t,
        };
        if t <= duration_ps {
            clicks.push(TimeTagRecord::new(quantize(t, det.tdc_resolution_ps), ch));
        }
    }
    Ok(clicks)
}

/// Adds dark counts on `dark_channels`, sorts, and applies per-channel dead
/// time: a click is kept only if it is at least `dead_time_ps` (and at least
/// 1 ps) after that channel's previous kept click.
pub fn finalize_clicks(
    mut clicks: Vec<TimeTagRecord>,
    det: &DetectorParams,
    dark_channels: &[Channel],
    duration_ps: u64,
    rng: &mut StageRng,
) -> Result<TagStream> {
    det.validate()?;
    if det.dark_rate_hz > 0.0 {
        let gap = Exp::new(det.dark_rate_hz * 1e-12).map_err(|e| Error::config(e.to_string()))?;
        for &ch in dark_channels {
            let mut t = 0.0;
            loop {
                t += gap.sample(rng);
                if t > duration_ps as f64 {
                    break;
                }
                clicks.push(TimeTagRecord::new(
                    quantize(t as u64, det.tdc_resolution_ps),
                    ch,
                ));
            }
        }
    }
    clicks.retain(|r| r.time_ps <= duration_ps);
    clicks.sort_unstable();
    let min_spacing = det.dead_time_ps.max(1);
    let mut last: [Option<u64>; 256] = [None; 256];
    clicks.retain(|r| {
        let slot = &mut last[r.channel as usize];
        match *slot {
            Some(prev) if r.time_ps - prev < min_spacing => false,
            _ => {
                *slot = Some(r.time_ps);
                true
            }
        }
    });
    Ok(TagStream::new(clicks, duration_ps).expect("sorted and clipped"))
}

/// [`register_impacts`] followed by [`finalize_clicks`].
pub fn detector_response(
    impacts: impl IntoIterator<Item = (u64, Channel)>,
    det: &DetectorParams,
    dark_channels: &[Channel],
    duration_ps: u64,
    rng: &mut StageRng,
) -> Result<TagStream> {
    let clicks = register_impacts(impacts, det, duration_ps, rng)?;
    finalize_clicks(clicks, det, dark_channels, duration_ps, rng)
}

/// Detector that a single photon of state `state` lights up at Bob.
fn project(state: PolarizationState, ch: &ChannelParams, rng: &mut StageRng) -> PolarizationState {
    let basis = if rng.random_bool(ch.rectilinear_prob) {
        Basis::Rectilinear
    } else {
        Basis::Diagonal
    };
    if basis == state.basis() {
        if rng.random_bool(ch.misalignment_prob) {
            state.flipped()
        } else {
            state
        }
    } else {
        PolarizationState::from_basis_bit(basis, rng.random_bool(0.5) as u8)
    }
}

/// Bob's measurement of the arriving light, recorded on channels 1–4.
pub fn detect(
    arrivals: &[ArrivingPhoton],
    det: &DetectorParams,
    ch: &ChannelParams,
    duration_ps: u64,
    seed: u64,
) -> Result<TagStream> {
    let mut rng = rng_from_seed(seed);
    let impacts = project_arrivals(arrivals, ch, &mut rng)?;
    detector_response(impacts, det, &BOB_CHANNELS, duration_ps, &mut rng)
}

/// Basis choice and projection for every photon: the detector each one
/// reaches, before detector effects.
pub fn project_arrivals(
    arrivals: &[ArrivingPhoton],
    ch: &ChannelParams,
    rng: &mut StageRng,
) -> Result<Vec<(u64, Channel)>> {
    ch.validate()?;
    let mut impacts = Vec::with_capacity(arrivals.len());
    for a in arrivals {
        for _ in 0..a.n_photons {
            let fired = project(a.state, ch, rng);
            impacts.push((a.arrival_time_ps, detector_channel(fired)));
        }
    }
    Ok(impacts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transmitter::Path;

    const SECOND_PS: u64 = 1_000_000_000_000;

    fn ideal_det() -> DetectorParams {
        DetectorParams {
            efficiency: 1.0,
            dark_rate_hz: 0.0,
            jitter_sigma_ps: 0.0,
            tdc_resolution_ps: 81,
            dead_time_ps: 0,
        }
    }

    fn arrivals(n: u64, state: PolarizationState) -> Vec<ArrivingPhoton> {
        (0..n)
            .map(|i| ArrivingPhoton {
                emit_time_ps: i * 1_000_000,
                arrival_time_ps: i * 1_000_000 + 12_345,
                state,
                n_photons: 1,
            })
            .collect()
    }

    fn sent(n: u64) -> Vec<TransmittedPhoton> {
        (0..n)
            .map(|i| TransmittedPhoton {
                emit_time_ps: i * 1000,
                exit_time_ps: i * 1000 + 8_800,
                path: Path::Ad,
                state: PolarizationState::A,
                n_photons: 1,
            })
            .collect()
    }

    #[test]
    fn lossless_transmit_shifts_by_channel_delay() {
        let ch = ChannelParams {
            transmittance: 1.0,
            coupling_efficiency: 1.0,
            ..Default::default()
        };
        let out = transmit(&sent(100), &ch, 1).unwrap();
        assert_eq!(out.len(), 100);
        for (a, p) in out.iter().zip(sent(100)) {
            assert_eq!(a.arrival_time_ps, p.exit_time_ps + 2_500);
        }
        let dark = ChannelParams {
            transmittance: 0.0,
            ..Default::default()
        };
        assert!(transmit(&sent(100), &dark, 1).unwrap().is_empty());
    }

    #[test]
    fn default_channel_loss_is_binomial() {
        let n = 100_000u64;
        let out = transmit(&sent(n), &ChannelParams::default(), 8).unwrap();
        let p = 0.98 * 0.85;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((out.len() as f64 - p * n as f64).abs() < 3.0 * sigma);
    }

    #[test]
    fn noiseless_h_photon_in_rectilinear_basis() {
        let ch = ChannelParams {
            misalignment_prob: 0.0,
            rectilinear_prob: 1.0,
            ..Default::default()
        };
        let s = detect(
            &arrivals(1, PolarizationState::H),
            &ideal_det(),
            &ch,
            SECOND_PS,
            3,
        )
        .unwrap();
        assert_eq!(
            s.records(),
            &[TimeTagRecord::new(12_345 - 12_345 % 81, channels::BOB_H)]
        );
    }

    #[test]
    fn diagonal_photon_never_hits_anti_diagonal_without_misalignment() {
        let ch = ChannelParams {
            misalignment_prob: 0.0,
            rectilinear_prob: 0.0,
            ..Default::default()
        };
        let s = detect(
            &arrivals(5000, PolarizationState::D),
            &ideal_det(),
            &ch,
            SECOND_PS,
            5,
        )
        .unwrap();
        assert_eq!(s.len(), 5000);
        assert!(s.records().iter().all(|r| r.channel == channels::BOB_D));
    }

    #[test]
    fn zero_efficiency_leaves_dark_counts() {
        let det = DetectorParams {
            efficiency: 0.0,
            dead_time_ps: 0,
            ..Default::default()
        };
        let s = detect(
            &arrivals(1000, PolarizationState::V),
            &det,
            &ChannelParams::default(),
            SECOND_PS,
            6,
        )
        .unwrap();
        let expect = 4.0 * 100.0;
        assert!(
            (s.len() as f64 - expect).abs() < 3.0 * expect.sqrt(),
            "{} tags",
            s.len()
        );
    }

    #[test]
    fn wrong_basis_clicks_split_evenly() {
        let ch = ChannelParams {
            misalignment_prob: 0.0,
            rectilinear_prob: 0.0,
            ..Default::default()
        };
        let n = 100_000;
        let s = detect(
            &arrivals(n, PolarizationState::H),
            &ideal_det(),
            &ch,
            SECOND_PS,
            10,
        )
        .unwrap();
        let d = s
            .records()
            .iter()
            .filter(|r| r.channel == channels::BOB_D)
            .count() as f64;
        assert_eq!(s.len() as u64, n);
        assert!((d - n as f64 / 2.0).abs() < 3.0 * (n as f64 / 4.0).sqrt());
    }

    #[test]
    fn misalignment_flips_within_basis() {
        let ch = ChannelParams {
            misalignment_prob: 0.1,
            rectilinear_prob: 1.0,
            ..Default::default()
        };
        let n = 50_000;
        let s = detect(
            &arrivals(n, PolarizationState::V),
            &ideal_det(),
            &ch,
            SECOND_PS,
            13,
        )
        .unwrap();
        let wrong = s
            .records()
            .iter()
            .filter(|r| r.channel == channels::BOB_H)
            .count() as f64;
        assert!(s
            .records()
            .iter()
            .all(|r| r.channel == channels::BOB_H || r.channel == channels::BOB_V));
        assert!((wrong - 5000.0).abs() < 3.0 * (n as f64 * 0.09).sqrt());
    }

    #[test]
    fn timestamps_on_grid_and_dead_time_respected() {
        let det = DetectorParams {
            dark_rate_hz: 2e6,
            dead_time_ps: 22_000,
            ..Default::default()
        };
        let dense: Vec<_> = (0..200_000u64)
            .map(|i| ArrivingPhoton {
                emit_time_ps: i * 5_000,
                arrival_time_ps: i * 5_000,
                state: PolarizationState::ALL[(i % 4) as usize],
                n_photons: 1 + (i % 3 == 0) as u8,
            })
            .collect();
        let s = detect(&dense, &det, &ChannelParams::default(), SECOND_PS / 1000, 2).unwrap();
        assert!(s.times().all(|t| t % 81 == 0));
        for ch in BOB_CHANNELS {
            let c = s.channel(ch);
            assert!(c
                .records()
                .windows(2)
                .all(|w| w[1].time_ps - w[0].time_ps >= 22_000));
        }
    }

    #[test]
    fn channel_labels_round_trip() {
        for s in PolarizationState::ALL {
            assert_eq!(detector_state(detector_channel(s)), Some(s));
        }
        assert_eq!(detector_state(channels::HERALD), None);
    }
}
