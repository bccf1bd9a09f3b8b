//! Timestamp-difference sifting.
//!
//! A Bob tag at `t_B` and a herald at `t_A` belong to path `p` when
//! `t_B - t_A` lies within half a window of
//! `delay(p) + delta_ch - herald_delay`. Each Bob tag must have exactly one
//! such herald across all four paths; the herald's path then names the state
//! Alice sent. Tags with no or several candidates are discarded, a herald is
//! claimed by the first Bob tag that uniquely matches it, and events whose
//! sent basis differs from Bob's detector basis are dropped.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::receiver::detector_state;
use crate::source::DEFAULT_HERALD_DELAY_PS;
use crate::timetag::{Channel, TagStream};
use crate::transmitter::{Basis, Path, PathDelayTable, PolarizationState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiftConfig {
    /// Full-width coincidence window.
    pub window_ps: u64,
    pub delta_ch_ps: u64,
    pub herald_delay_ps: u64,
    pub table: PathDelayTable,
}

impl Default for SiftConfig {
    fn default() -> Self {
        Self {
            window_ps: 1_500,
            delta_ch_ps: 2_500,
            herald_delay_ps: DEFAULT_HERALD_DELAY_PS,
            table: PathDelayTable::default(),
        }
    }
}

impl SiftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_ps == 0 {
            return Err(Error::config("sift.window_ps must be > 0"));
        }
        self.table.validate_for_window(self.window_ps)
    }
}

/// Predicted `t_B - t_A` for a herald/photon pair that took `path`.
pub fn expected_offset(cfg: &SiftConfig, path: Path) -> i64 {
    cfg.table.delay_ps(path) as i64 + cfg.delta_ch_ps as i64 - cfg.herald_delay_ps as i64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SiftedEvent {
    pub herald_ps: u64,
    pub bob_ps: u64,
    pub path: Path,
    /// State Alice sent, identified from the path.
    pub state: PolarizationState,
    /// Bob's detector channel.
    pub detector: Channel,
    pub alice_bit: u8,
    pub bob_bit: u8,
}

/// Position-aligned sifted bits with their originating events.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SiftedKey {
    pub events: Vec<SiftedEvent>,
}

impl SiftedKey {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn alice_bits(&self) -> Vec<u8> {
        self.events.iter().map(|e| e.alice_bit).collect()
    }

    pub fn bob_bits(&self) -> Vec<u8> {
        self.events.iter().map(|e| e.bob_bit).collect()
    }

    pub fn errors(&self) -> usize {
        self.events
            .iter()
            .filter(|e| e.alice_bit != e.bob_bit)
            .count()
    }

    /// Fraction of mismatched positions, zero for an empty key.
    pub fn error_rate(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.errors() as f64 / self.len() as f64
        }
    }
}

/// How Bob's tags were disposed of.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SiftStats {
    pub bob_tags: u64,
    pub unmatched: u64,
    pub ambiguous: u64,
    /// Unique candidate herald was already claimed by an earlier tag.
    pub herald_reused: u64,
    /// Matched to a herald (before the basis filter).
    pub matched: u64,
    pub basis_mismatch: u64,
    pub retained_per_state: BTreeMap<PolarizationState, u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SiftOutcome {
    pub key: SiftedKey,
    pub stats: SiftStats,
}

struct Decider<'a> {
    cfg: &'a SiftConfig,
    claimed: Vec<bool>,
    out: SiftOutcome,
}

impl<'a> Decider<'a> {
    fn new(cfg: &'a SiftConfig, n_heralds: usize) -> Self {
        Self {
            cfg,
            claimed: vec![false; n_heralds],
            out: SiftOutcome::default(),
        }
    }

    /// `candidates` is the total herald count across paths and `hit` the
    /// (herald index, path) of the last one seen.
    fn decide(
        &mut self,
        heralds: &TagStream,
        bob_ps: u64,
        detector: Channel,
        measured: PolarizationState,
        candidates: usize,
        hit: Option<(usize, Path)>,
    ) {
        let st = &mut self.out.stats;
        st.bob_tags += 1;
        let (idx, path) = match (candidates, hit) {
            (0, _) | (_, None) => {
                st.unmatched += 1;
                return;
            }
            (1, Some(h)) => h,
            _ => {
                st.ambiguous += 1;
                return;
            }
        };
        if self.claimed[idx] {
            st.herald_reused += 1;
            return;
        }
        self.claimed[idx] = true;
        st.matched += 1;
        let state = self.cfg.table.state(path);
        if state.basis() != measured.basis() {
            st.basis_mismatch += 1;
            return;
        }
        *st.retained_per_state.entry(state).or_default() += 1;
        self.out.key.events.push(SiftedEvent {
            herald_ps: heralds.records()[idx].time_ps,
            bob_ps,
            path,
            state,
            detector,
            alice_bit: state.bit(),
            bob_bit: measured.bit(),
        });
    }
}

/// Linear-time sifting with one pair of sliding pointers per path.
pub fn sift_detailed(herald: &TagStream, bob: &TagStream, cfg: &SiftConfig) -> Result<SiftOutcome> {
    cfg.validate()?;
    let h: Vec<i64> = herald.times().map(|t| t as i64).collect();
    let w = cfg.window_ps as i64;
    let offsets = Path::ALL.map(|p| expected_offset(cfg, p));
    let mut lo = [0usize; 4];
    let mut hi = [0usize; 4];
    let mut decider = Decider::new(cfg, h.len());
    for rec in bob.records() {
        let Some(measured) = detector_state(rec.channel) else {
            continue;
        };
        let tb = rec.time_ps as i64;
        let mut candidates = 0;
        let mut hit = None;
        for (k, &path) in Path::ALL.iter().enumerate() {
            let target2 = 2 * (tb - offsets[k]);
            while lo[k] < h.len() && 2 * h[lo[k]] < target2 - w {
                lo[k] += 1;
            }
            hi[k] = hi[k].max(lo[k]);
            while hi[k] < h.len() && 2 * h[hi[k]] <= target2 + w {
                hi[k] += 1;
            }
            let n = hi[k] - lo[k];
            if n > 0 {
                candidates += n;
                hit = Some((lo[k], path));
            }
        }
        decider.decide(herald, rec.time_ps, rec.channel, measured, candidates, hit);
    }
    Ok(decider.out)
}

pub fn sift(herald: &TagStream, bob: &TagStream, cfg: &SiftConfig) -> Result<SiftedKey> {
    sift_detailed(herald, bob, cfg).map(|o| o.key)
}

/// Exhaustive reference for [`sift_detailed`]: every herald × path is tested
/// for every Bob tag.
pub fn sift_bruteforce_detailed(
    herald: &TagStream,
    bob: &TagStream,
    cfg: &SiftConfig,
) -> Result<SiftOutcome> {
    cfg.validate()?;
    let w = cfg.window_ps as i64;
    let mut decider = Decider::new(cfg, herald.len());
    for rec in bob.records() {
        let Some(measured) = detector_state(rec.channel) else {
            continue;
        };
        let mut candidates = 0;
        let mut hit = None;
        for (i, hr) in herald.records().iter().enumerate() {
            for path in Path::ALL {
                let d = rec.time_ps as i64 - hr.time_ps as i64 - expected_offset(cfg, path);
                if 2 * d.abs() <= w {
                    candidates += 1;
                    hit = Some((i, path));
                }
            }
        }
        decider.decide(herald, rec.time_ps, rec.channel, measured, candidates, hit);
    }
    Ok(decider.out)
}

pub fn sift_bruteforce(herald: &TagStream, bob: &TagStream, cfg: &SiftConfig) -> Result<SiftedKey> {
    sift_bruteforce_detailed(herald, bob, cfg).map(|o| o.key)
}

/// Expected number of sifted events produced purely by uncorrelated Bob tags
/// spread evenly over the four detectors, for Poisson heralds at
/// `herald_rate_hz`.
///
/// A tag is kept when exactly one herald falls in the union of the four path
/// windows, that herald lies in no other path's window, and the path's state
/// shares the tag's basis. Offsets are counted on the integer picosecond
/// lattice. For disjoint windows of `n` offsets each this reduces to
/// `2 λ e^{-4λ}` per tag with `λ = herald_rate · n`.
pub fn accidental_sift_expectation(
    cfg: &SiftConfig,
    uncorrelated_tags: f64,
    herald_rate_hz: f64,
) -> f64 {
    let half = (cfg.window_ps / 2) as i64;
    let spans = Path::ALL.map(|p| {
        let o = expected_offset(cfg, p);
        (o - half, o + half)
    });
    let lo = spans.iter().map(|s| s.0).min().expect("four paths");
    let hi = spans.iter().map(|s| s.1).max().expect("four paths");
    let mut union = 0u64;
    let mut exclusive = [0u64; 4];
    for d in lo..=hi {
        let covering: Vec<usize> = (0..4)
            .filter(|&k| (spans[k].0..=spans[k].1).contains(&d))
            .collect();
        if !covering.is_empty() {
            union += 1;
        }
        if let [k] = covering[..] {
            exclusive[k] += 1;
        }
    }
    let r = herald_rate_hz * 1e-12;
    let none_elsewhere = (-r * union as f64).exp();
    let per_tag: f64 = [Basis::Rectilinear, Basis::Diagonal]
        .iter()
        .map(|&b| {
            let matching: u64 = (0..4)
                .filter(|&k| cfg.table.state(Path::ALL[k]).basis() == b)
                .map(|k| exclusive[k])
                .sum();
            0.5 * r * matching as f64 * none_elsewhere
        })
        .sum();
    uncorrelated_tags * per_tag
}

/// Matched (pre-basis-filter) event count for each trial channel delay.
pub fn scan_delta_ch(
    herald: &TagStream,
    bob: &TagStream,
    cfg: &SiftConfig,
    deltas_ps: impl IntoIterator<Item = u64>,
) -> Result<Vec<(u64, u64)>> {
    deltas_ps
        .into_iter()
        .map(|d| {
            let trial = SiftConfig {
                delta_ch_ps: d,
                ..cfg.clone()
            };
            sift_detailed(herald, bob, &trial).map(|o| (d, o.stats.matched))
        })
        .collect()
}

/// Channel delay maximizing the matched count, with the scan it came from.
/// When the maximum is reached on a run of consecutive scan points the middle
/// of the first such run is returned.
pub fn calibrate_delta_ch(
    herald: &TagStream,
    bob: &TagStream,
    cfg: &SiftConfig,
    deltas_ps: impl IntoIterator<Item = u64>,
) -> Result<(u64, Vec<(u64, u64)>)> {
    let scan = scan_delta_ch(herald, bob, cfg, deltas_ps)?;
    let max = scan
        .iter()
        .map(|&(_, n)| n)
        .max()
        .ok_or_else(|| Error::config("empty channel-delay scan"))?;
    let start = scan
        .iter()
        .position(|&(_, n)| n == max)
        .expect("max exists");
    let len = scan[start..].iter().take_while(|&&(_, n)| n == max).count();
    Ok((scan[start + (len - 1) / 2].0, scan))
}

/// Histogram of all `t_B - t_A` differences in `[min_ps, max_ps)` per Bob
/// detector, in bins of `bin_ps`. Rows are `(bin start, [H, V, D, A])`.
pub fn delay_histogram(
    herald: &TagStream,
    bob: &TagStream,
    min_ps: i64,
    max_ps: i64,
    bin_ps: u64,
) -> Vec<(i64, [u64; 4])> {
    let bin = bin_ps.max(1) as i64;
    let n_bins = ((max_ps - min_ps).max(0) + bin - 1) / bin;
    let mut rows: Vec<(i64, [u64; 4])> = (0..n_bins).map(|k| (min_ps + k * bin, [0; 4])).collect();
    let h: Vec<i64> = herald.times().map(|t| t as i64).collect();
    let mut start = 0usize;
    for rec in bob.records() {
        let Some(s) = detector_state(rec.channel) else {
            continue;
        };
        let col = crate::receiver::detector_channel(s) as usize - 1;
        let tb = rec.time_ps as i64;
        // heralds with tb - ta < max  <=>  ta > tb - max
        while start < h.len() && h[start] <= tb - max_ps {
            start += 1;
        }
        for &ta in &h[start..] {
            let d = tb - ta;
            if d < min_ps {
                break;
            }
            rows[((d - min_ps) / bin) as usize].1[col] += 1;
        }
    }
    rows
}

pub fn write_delay_histogram_csv(rows: &[(i64, [u64; 4])], path: impl AsRef<FsPath>) -> Result<()> {
    let mut s = String::from("delay_ps,H,V,D,A\n");
    for (d, c) in rows {
        let _ = writeln!(s, "{d},{},{},{},{}", c[0], c[1], c[2], c[3]);
    }
    std::fs::write(path.as_ref(), s).map_err(|e| Error::io(path.as_ref(), e))
}

pub fn write_delta_scan_csv(scan: &[(u64, u64)], path: impl AsRef<FsPath>) -> Result<()> {
    let mut s = String::from("delta_ch_ps,matched\n");
    for (d, n) in scan {
        let _ = writeln!(s, "{d},{n}");
    }
    std::fs::write(path.as_ref(), s).map_err(|e| Error::io(path.as_ref(), e))
}

const SIFTED_HEADER: [&str; 7] = [
    "herald_ps",
    "bob_ps",
    "path",
    "state",
    "detector",
    "alice_bit",
    "bob_bit",
];

pub fn write_sifted_csv(key: &SiftedKey, path: impl AsRef<FsPath>) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(SIFTED_HEADER).map_err(csv_err)?;
    for e in &key.events {
        w.write_record([
            e.herald_ps.to_string(),
            e.bob_ps.to_string(),
            e.path.to_string(),
            e.state.to_string(),
            e.detector.to_string(),
            e.alice_bit.to_string(),
            e.bob_bit.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_sifted_csv(path: impl AsRef<FsPath>) -> Result<SiftedKey> {
    let path = path.as_ref();
    let csv_err = |e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().ne(SIFTED_HEADER) {
        return Err(Error::Domain(format!(
            "{}: unexpected sifted-key header",
            path.display()
        )));
    }
    let mut events = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let bad = |field: &str| {
            Error::Domain(format!("{}: row {}: bad {field}", path.display(), line + 1))
        };
        let num = |i: usize, name: &str| -> Result<u64> {
            row.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad(name))
        };
        let bit = |i: usize, name: &str| -> Result<u8> {
            match row.get(i) {
                Some("0") => Ok(0),
                Some("1") => Ok(1),
                _ => Err(bad(name)),
            }
        };
        events.push(SiftedEvent {
            herald_ps: num(0, "herald_ps")?,
            bob_ps: num(1, "bob_ps")?,
            path: row.get(2).unwrap_or_default().parse()?,
            state: row.get(3).unwrap_or_default().parse()?,
            detector: num(4, "detector")? as Channel,
            alice_bit: bit(5, "alice_bit")?,
            bob_bit: bit(6, "bob_bit")?,
        });
    }
    Ok(SiftedKey { events })
}

/// Per-state retained counts and disposal totals as `key=value` lines.
pub fn stats_report(stats: &SiftStats) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "bob_tags={}", stats.bob_tags);
    let _ = writeln!(s, "unmatched={}", stats.unmatched);
    let _ = writeln!(s, "ambiguous={}", stats.ambiguous);
    let _ = writeln!(s, "herald_reused={}", stats.herald_reused);
    let _ = writeln!(s, "matched={}", stats.matched);
    let _ = writeln!(s, "basis_mismatch={}", stats.basis_mismatch);
    for st in PolarizationState::ALL {
        let _ = writeln!(
            s,
            "retained_{st}={}",
            stats.retained_per_state.get(&st).copied().unwrap_or(0)
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timetag::{channels, TimeTagRecord};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const DUR: u64 = 10_000_000_000;

    fn tags(v: &[(u64, Channel)]) -> TagStream {
        TagStream::from_unsorted(
            v.iter().map(|&(t, c)| TimeTagRecord::new(t, c)).collect(),
            DUR,
        )
    }

    #[test]
    fn expected_offsets() {
        let cfg = SiftConfig::default();
        assert_eq!(expected_offset(&cfg, Path::Ac), 11_270);
        let zero = SiftConfig {
            delta_ch_ps: 0,
            herald_delay_ps: 0,
            ..SiftConfig::default()
        };
        assert_eq!(expected_offset(&zero, Path::Ad), 8_800);
        let cancel = SiftConfig {
            delta_ch_ps: 0,
            herald_delay_ps: 10_520,
            ..SiftConfig::default()
        };
        assert_eq!(expected_offset(&cancel, Path::Bd), 0);
    }

    #[test]
    fn single_v_match() {
        let cfg = SiftConfig::default();
        let h = tags(&[(1_000_000, channels::HERALD)]);
        let b = tags(&[(1_011_270, channels::BOB_V)]);
        let key = sift(&h, &b, &cfg).unwrap();
        assert_eq!(key.len(), 1);
        let e = key.events[0];
        assert_eq!((e.path, e.alice_bit, e.bob_bit), (Path::Ac, 1, 1));
        assert_eq!(key, sift_bruteforce(&h, &b, &cfg).unwrap());
    }

    #[test]
    fn empty_and_unmatched() {
        let cfg = SiftConfig::default();
        let h = tags(&[(1_000_000, 0)]);
        assert!(sift(&h, &TagStream::empty(DUR), &cfg).unwrap().is_empty());
        let far = tags(&[(1_005_000, channels::BOB_H)]);
        let out = sift_detailed(&h, &far, &cfg).unwrap();
        assert!(out.key.is_empty());
        assert_eq!(out.stats.unmatched, 1);
    }

    #[test]
    fn wrong_basis_and_ambiguity_discarded() {
        let cfg = SiftConfig::default();
        // path ac carries V, detected on the diagonal D detector
        let h = tags(&[(1_000_000, 0)]);
        let b = tags(&[(1_011_270, channels::BOB_D)]);
        let out = sift_detailed(&h, &b, &cfg).unwrap();
        assert_eq!(out.stats.basis_mismatch, 1);
        assert!(out.key.is_empty());
        // a second herald sitting in the bc window of the same tag
        let h2 = tags(&[
            (1_000_000, 0),
            (1_011_270 - expected_offset(&cfg, Path::Bc) as u64, 0),
        ]);
        let out = sift_detailed(&h2, &b, &cfg).unwrap();
        assert_eq!(out.stats.ambiguous, 1);
    }

    #[test]
    fn herald_claimed_once() {
        let cfg = SiftConfig::default();
        let h = tags(&[(1_000_000, 0)]);
        let b = tags(&[(1_011_270, channels::BOB_V), (1_011_300, channels::BOB_V)]);
        let out = sift_detailed(&h, &b, &cfg).unwrap();
        assert_eq!(out.key.len(), 1);
        assert_eq!(out.stats.herald_reused, 1);
    }

    #[test]
    fn window_at_gap_rejected() {
        let cfg = SiftConfig {
            window_ps: 1_800,
            ..SiftConfig::default()
        };
        let h = TagStream::empty(DUR);
        assert!(matches!(sift(&h, &h, &cfg), Err(Error::Config(_))));
        assert!(matches!(
            sift_bruteforce(&h, &h, &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn oracle_equivalence_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..40 {
            let cfg = SiftConfig {
                window_ps: rng.random_range(100..1_700),
                ..SiftConfig::default()
            };
            let span = 2_000_000u64;
            let mut h = Vec::new();
            let mut b = Vec::new();
            for _ in 0..rng.random_range(0..300) {
                let t = rng.random_range(0..span);
                h.push((t, 0));
                if rng.random_bool(0.6) {
                    let p = Path::ALL[rng.random_range(0..4)];
                    let tb = t as i64 + expected_offset(&cfg, p) + rng.random_range(-900..900);
                    b.push((tb.max(0) as u64, rng.random_range(1..=4)));
                }
            }
            for _ in 0..rng.random_range(0..100) {
                b.push((rng.random_range(0..span), rng.random_range(1..=4)));
            }
            let (h, b) = (tags(&h), tags(&b));
            assert_eq!(
                sift_detailed(&h, &b, &cfg).unwrap(),
                sift_bruteforce_detailed(&h, &b, &cfg).unwrap()
            );
        }
    }

    #[test]
    fn delta_scan_peaks_at_true_delay() {
        let cfg = SiftConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut h = Vec::new();
        let mut b = Vec::new();
        for i in 0..2000u64 {
            let t = i * 200_000 + rng.random_range(0..1000);
            h.push((t, 0));
            let p = Path::ALL[rng.random_range(0..4)];
            b.push((
                (t as i64 + expected_offset(&cfg, p)) as u64,
                crate::receiver::detector_channel(cfg.table.state(p)),
            ));
        }
        let (h, b) = (tags(&h), tags(&b));
        let (best, scan) = calibrate_delta_ch(&h, &b, &cfg, (0..=5_000).step_by(250)).unwrap();
        assert_eq!(best, 2_500);
        assert_eq!(scan.len(), 21);

        let hist = delay_histogram(&h, &b, 5_000, 13_000, 500);
        let peak_v = hist.iter().max_by_key(|r| r.1[1]).unwrap().0;
        assert!((peak_v..peak_v + 500).contains(&(expected_offset(&cfg, Path::Ac))));
    }

    #[test]
    fn sifted_csv_round_trip() {
        let cfg = SiftConfig::default();
        let h = tags(&[(1_000_000, 0), (2_000_000, 0)]);
        let b = tags(&[
            (1_011_270, channels::BOB_H),
            (2_000_000 + 8_230, channels::BOB_A),
        ]);
        let key = sift(&h, &b, &cfg).unwrap();
        assert_eq!(key.len(), 2);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sifted.csv");
        write_sifted_csv(&key, &p).unwrap();
        assert_eq!(read_sifted_csv(&p).unwrap(), key);
    }

    #[test]
    fn accidental_expectation_geometry() {
        // Spread-out table: four disjoint windows, so 2 λ e^{-4λ} per tag.
        use crate::transmitter::PathEntry;
        let mut cfg = SiftConfig::default();
        cfg.table.ac = PathEntry {
            delay_ps: 20_000,
            ..cfg.table.ac
        };
        cfg.table.bc = PathEntry {
            delay_ps: 30_000,
            ..cfg.table.bc
        };
        let rate = 1e5;
        let lambda = rate * 1501e-12;
        let disjoint = accidental_sift_expectation(&cfg, 1e6, rate);
        assert!((disjoint - 1e6 * 2.0 * lambda * (-4.0 * lambda).exp()).abs() < 1e-9);
        // Default table: the D and V windows overlap by 181 offsets.
        let overlap = accidental_sift_expectation(&SiftConfig::default(), 1e6, rate);
        let r = rate * 1e-12;
        let expect =
            1e6 * 0.5 * r * (2.0 * 1501.0 + 2.0 * 1320.0) * (-r * (4.0 * 1501.0 - 181.0)).exp();
        assert!(
            (overlap - expect).abs() / expect < 1e-12,
            "{overlap} vs {expect}"
        );
    }
}
