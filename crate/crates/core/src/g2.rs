//! Heralded second-order correlation from a Hanbury Brown-Twiss measurement.
//!
//! The idler goes to a 50:50 splitter with a detector on each output
//! (channels 5 and 6) while the signal arm provides the herald. From the
//! singles, two-fold and three-fold coincidence rates
//!
//! ```text
//! g2(τ) = R_s · R_s,i1,i2 / (R_s,i1 · R_s,i2)
//! ```
//!
//! with the i2 stream shifted by τ.

use std::io::Write;
use std::path::Path as FsPath;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::receiver::{register_impacts, DetectorParams};
use crate::seed::StageRng;
use crate::source::IdlerPulse;
use crate::timetag::{
    channels, count_coincidences, count_triples_offset, Channel, TagStream, TimeTagRecord,
};

/// Idler-arm parameters of the HBT setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HbtParams {
    /// Fibre coupling into the splitter, applied per photon.
    pub arm_coupling: f64,
    /// Crystal-to-detector delay of both idler arms.
    pub idler_delay_ps: u64,
    pub window_ps: u64,
    pub tau_min_ps: i64,
    pub tau_max_ps: i64,
    pub tau_step_ps: u64,
}

impl Default for HbtParams {
    fn default() -> Self {
        Self {
            arm_coupling: 0.85,
            idler_delay_ps: crate::source::DEFAULT_HERALD_DELAY_PS,
            window_ps: 1_500,
            tau_min_ps: -10_000,
            tau_max_ps: 10_000,
            tau_step_ps: 500,
        }
    }
}

impl HbtParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.arm_coupling) {
            return Err(Error::config("hbt.arm_coupling must lie in [0, 1]"));
        }
        if self.window_ps == 0 {
            return Err(Error::config("hbt.window_ps must be > 0"));
        }
        if self.tau_step_ps == 0 || self.tau_min_ps > self.tau_max_ps {
            return Err(Error::config(
                "hbt tau range must have tau_min_ps <= tau_max_ps and a positive step",
            ));
        }
        Ok(())
    }

    pub fn taus(&self) -> Vec<i64> {
        (self.tau_min_ps..=self.tau_max_ps)
            .step_by(self.tau_step_ps as usize)
            .collect()
    }
}

/// Rates in Hz together with the raw counts they came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Rates {
    pub r_s: f64,
    pub r_s_i1: f64,
    pub r_s_i2: f64,
    pub r_s_i1_i2: f64,
    pub n_s: u64,
    pub n_s_i1: u64,
    pub n_s_i2: u64,
    pub n_s_i1_i2: u64,
    pub window_ps: u64,
    pub duration_ps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Point {
    pub tau_ps: i64,
    pub g2: f64,
    pub sigma: f64,
}

/// Routes every idler photon to one of the two splitter outputs with equal
/// probability. Returns the ideal impacts on channels 5 and 6; two photons of
/// one pulse in the same arm give a single impact.
pub fn hbt_split(pulses: &[IdlerPulse], rng: &mut StageRng) -> Vec<(u64, Channel)> {
    let mut out = Vec::with_capacity(pulses.len());
    for p in pulses {
        let mut arms = [false; 2];
        for _ in 0..p.n_photons {
            arms[rng.random_bool(0.5) as usize] = true;
        }
        if arms[0] {
            out.push((p.time_ps, channels::IDLER_1));
        }
        if arms[1] {
            out.push((p.time_ps, channels::IDLER_2));
        }
    }
    out
}

/// Idler photons of `pulses` through coupling loss, the splitter and the
/// per-arm detector front end. Dark counts and dead time are left to
/// [`crate::receiver::finalize_clicks`].
pub fn hbt_clicks(
    pulses: &[IdlerPulse],
    hbt: &HbtParams,
    det: &DetectorParams,
    duration_ps: u64,
    rng: &mut StageRng,
) -> Result<Vec<TimeTagRecord>> {
    hbt.validate()?;
    let coupled: Vec<IdlerPulse> = pulses
        .iter()
        .filter_map(|p| {
            let n = (0..p.n_photons)
                .filter(|_| rng.random_bool(hbt.arm_coupling))
                .count() as u8;
            (n > 0).then_some(IdlerPulse {
                time_ps: p.time_ps + hbt.idler_delay_ps,
                n_photons: n,
            })
        })
        .collect();
    let impacts = hbt_split(&coupled, rng);
    register_impacts(impacts, det, duration_ps, rng)
}

/// Coincidence rates with i2 shifted by `tau_ps` (an i2 tag at `t` is
/// compared as `t + tau_ps`).
pub fn compute_rates(
    s: &TagStream,
    i1: &TagStream,
    i2: &TagStream,
    window_ps: u64,
    tau_ps: i64,
) -> Result<G2Rates> {
    let duration_ps = s.duration_ps();
    if duration_ps == 0 {
        return Err(Error::Domain(
            "g2 rates need a non-zero acquisition duration".into(),
        ));
    }
    if i1.duration_ps() != duration_ps || i2.duration_ps() != duration_ps {
        return Err(Error::config(
            "herald and idler streams cover different durations",
        ));
    }
    if window_ps == 0 {
        return Err(Error::config("coincidence window must be > 0"));
    }
    let n_s = s.len() as u64;
    let n_s_i1 = count_coincidences(s, i1, window_ps, 0);
    let n_s_i2 = count_coincidences(s, i2, window_ps, -tau_ps);
    let n_s_i1_i2 = count_triples_offset(s, i1, i2, window_ps, 0, -tau_ps);
    let secs = duration_ps as f64 * 1e-12;
    Ok(G2Rates {
        r_s: n_s as f64 / secs,
        r_s_i1: n_s_i1 as f64 / secs,
        r_s_i2: n_s_i2 as f64 / secs,
        r_s_i1_i2: n_s_i1_i2 as f64 / secs,
        n_s,
        n_s_i1,
        n_s_i2,
        n_s_i1_i2,
        window_ps,
        duration_ps,
    })
}

/// `(g2, sigma)` from a set of rates. The uncertainty treats all four counts
/// as independent Poisson variables; with no three-fold events the triple
/// term uses a single count.
pub fn g2_zero(rates: &G2Rates) -> Result<(f64, f64)> {
    if rates.n_s_i1 == 0 || rates.n_s_i2 == 0 {
        return Err(Error::Undefined(
            "g2 undefined: no heralded two-fold coincidences in one arm".into(),
        ));
    }
    let g2 =
        rates.n_s as f64 * rates.n_s_i1_i2 as f64 / (rates.n_s_i1 as f64 * rates.n_s_i2 as f64);
    let rel2 = 1.0 / rates.n_s as f64 + 1.0 / rates.n_s_i1 as f64 + 1.0 / rates.n_s_i2 as f64;
    let sigma = if rates.n_s_i1_i2 == 0 {
        rates.n_s as f64 / (rates.n_s_i1 as f64 * rates.n_s_i2 as f64)
    } else {
        g2 * (rel2 + 1.0 / rates.n_s_i1_i2 as f64).sqrt()
    };
    Ok((g2, sigma))
}

/// One point per delay. Delays where g2 is undefined are reported with
/// `g2 = 0` and infinite sigma.
pub fn g2_sweep(
    s: &TagStream,
    i1: &TagStream,
    i2: &TagStream,
    window_ps: u64,
    taus: &[i64],
) -> Result<Vec<G2Point>> {
    taus.iter()
        .map(|&tau| {
            let rates = compute_rates(s, i1, i2, window_ps, tau)?;
            let (g2, sigma) = match g2_zero(&rates) {
                Ok(v) => v,
                Err(Error::Undefined(_)) => (0.0, f64::INFINITY),
                Err(e) => return Err(e),
            };
            Ok(G2Point {
                tau_ps: tau,
                g2,
                sigma,
            })
        })
        .collect()
}

/// Fraction of heralded events carrying more than one photon,
/// bounded by `g2 · μ` where μ is the heralded mean photon number.
pub fn multiphoton_fraction_bound(g2: f64, heralded_mean_photon_number: f64) -> f64 {
    (g2 * heralded_mean_photon_number).clamp(0.0, 1.0)
}

pub fn write_g2_csv(points: &[G2Point], path: impl AsRef<FsPath>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["tau_ps", "g2", "sigma"])
        .map_err(|e| Error::csv(path, e))?;
    for p in points {
        w.write_record([p.tau_ps.to_string(), p.g2.to_string(), p.sigma.to_string()])
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_g2_csv(path: impl AsRef<FsPath>) -> Result<Vec<G2Point>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let bad = |what: &str| Error::config(format!("{}: bad {what} in g2 table", path.display()));
        out.push(G2Point {
            tau_ps: field(0).parse().map_err(|_| bad("tau_ps"))?,
            g2: field(1).parse().map_err(|_| bad("g2"))?,
            sigma: field(2).parse().map_err(|_| bad("sigma"))?,
        });
    }
    Ok(out)
}

/// Counts and rates at a single delay as `key=value` lines.
pub fn write_rates(rates: &G2Rates, path: impl AsRef<FsPath>) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let g2 = g2_zero(rates).ok();
    let text = format!(
        "n_s={}\nn_s_i1={}\nn_s_i2={}\nn_s_i1_i2={}\nr_s_hz={}\nr_s_i1_hz={}\nr_s_i2_hz={}\nr_s_i1_i2_hz={}\nwindow_ps={}\nduration_ps={}\ng2={}\nsigma={}\n",
        rates.n_s,
        rates.n_s_i1,
        rates.n_s_i2,
        rates.n_s_i1_i2,
        rates.r_s,
        rates.r_s_i1,
        rates.r_s_i2,
        rates.r_s_i1_i2,
        rates.window_ps,
        rates.duration_ps,
        g2.map_or("undefined".to_string(), |v| v.0.to_string()),
        g2.map_or("undefined".to_string(), |v| v.1.to_string()),
    );
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
