//! Heralded SPDC pair source.
//!
//! Emission slots form a homogeneous Poisson process. A slot carries two pairs
//! with probability `multi_pair_prob` and one pair otherwise. The signal photon
//! of each slot may produce a herald tag on channel 0 after a fixed arm delay;
//! the idler photons continue to the encoder (or to the HBT splitter).

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;
use crate::timetag::{channels, TagStream, TimeTagRecord};

/// Fixed delay of the heralding arm, crystal to detector.
pub const DEFAULT_HERALD_DELAY_PS: u64 = 3_070;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceParams {
    /// Mean rate of emission slots.
    pub pair_rate_hz: f64,
    pub herald_delay_ps: u64,
    /// Probability that a slot's signal photon yields a herald tag.
    pub herald_efficiency: f64,
    /// Time scale below which two pairs are indistinguishable. Photons of a
    /// multi-pair slot share one timestamp.
    pub multi_pair_window_ps: u64,
    pub multi_pair_prob: f64,
}

impl Default for SourceParams {
    fn default() -> Self {
        Self {
            pair_rate_hz: crate::calibration::CALIBRATED_PAIR_RATE_HZ,
            herald_delay_ps: DEFAULT_HERALD_DELAY_PS,
            // MMF coupling (0.85) times detector efficiency (0.65).
            herald_efficiency: 0.5525,
            multi_pair_window_ps: 1_000,
            multi_pair_prob: crate::calibration::CALIBRATED_MULTI_PAIR_PROB,
        }
    }
}

impl SourceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.pair_rate_hz.is_finite() && self.pair_rate_hz >= 0.0) {
            return Err(Error::config("source.pair_rate_hz must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.herald_efficiency) {
            return Err(Error::config("source.herald_efficiency must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.multi_pair_prob) {
            return Err(Error::config("source.multi_pair_prob must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// One emission slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmissionEvent {
    pub time_ps: u64,
    /// Number of simultaneous pairs, 1 or 2.
    pub n_pairs: u8,
}

/// Idler light leaving the crystal: a time and a photon count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdlerPulse {
    pub time_ps: u64,
    pub n_photons: u8,
}

pub fn generate_emissions(
    params: &SourceParams,
    duration_ps: u64,
    seed: u64,
) -> Result<Vec<EmissionEvent>> {
    params.validate()?;
    if duration_ps == 0 || params.pair_rate_hz == 0.0 {
        return Ok(Vec::new());
    }
    let mut rng = rng_from_seed(seed);
    let rate_per_ps = params.pair_rate_hz * 1e-12;
    let gap = Exp::new(rate_per_ps).map_err(|e| Error::config(e.to_string()))?;
    let expected = (rate_per_ps * duration_ps as f64) as usize;
    let mut out = Vec::with_capacity(expected + expected / 16 + 16);
    let mut t = 0.0f64;
    loop {
        t += gap.sample(&mut rng);
        if t > duration_ps as f64 {
            break;
        }
        let n_pairs = if rng.random_bool(params.multi_pair_prob) {
            2
        } else {
            1
        };
        out.push(EmissionEvent {
            time_ps: t as u64,
            n_pairs,
        });
    }
    Ok(out)
}

/// Herald tags for the given slots. A multi-pair slot still produces at most
/// one tag since the herald detector cannot resolve the two signal photons.
pub fn herald_stream(
    emissions: &[EmissionEvent],
    params: &SourceParams,
    duration_ps: u64,
    seed: u64,
) -> TagStream {
    let mut rng = rng_from_seed(seed);
    let mut records =
        Vec::with_capacity((emissions.len() as f64 * params.herald_efficiency) as usize + 16);
    for e in emissions {
        if rng.random_bool(params.herald_efficiency) {
            let t = e.time_ps + params.herald_delay_ps;
            if t <= duration_ps {
                records.push(TimeTagRecord::new(t, channels::HERALD));
            }
        }
    }
    TagStream::new(records, duration_ps).expect("emissions sorted, tags within duration")
}

pub fn idler_emissions(emissions: &[EmissionEvent]) -> Vec<IdlerPulse> {
    emissions
        .iter()
        .map(|e| IdlerPulse {
            time_ps: e.time_ps,
            n_photons: e.n_pairs,
        })
        .collect()
}
