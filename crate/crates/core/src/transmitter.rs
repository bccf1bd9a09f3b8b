//! Alice's passive encoder: two cascaded 50:50 splitters pick one of four
//! interferometer paths, each path fixes a polarization state and a delay, and
//! the exit splitter passes half of the light on to the channel.

use std::fmt;
use std::path::Path as FsPath;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;
use crate::source::IdlerPulse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    Rectilinear,
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolarizationState {
    H,
    V,
    D,
    A,
}

impl PolarizationState {
    pub const ALL: [PolarizationState; 4] = [Self::H, Self::V, Self::D, Self::A];

    pub fn basis(self) -> Basis {
        match self {
            Self::H | Self::V => Basis::Rectilinear,
            Self::D | Self::A => Basis::Diagonal,
        }
    }

    /// H and D encode 0; V and A encode 1.
    pub fn bit(self) -> u8 {
        match self {
            Self::H | Self::D => 0,
            Self::V | Self::A => 1,
        }
    }

    /// The other state of the same basis.
    pub fn flipped(self) -> Self {
        match self {
            Self::H => Self::V,
            Self::V => Self::H,
            Self::D => Self::A,
            Self::A => Self::D,
        }
    }

    pub fn from_basis_bit(basis: Basis, bit: u8) -> Self {
        match (basis, bit & 1) {
            (Basis::Rectilinear, 0) => Self::H,
            (Basis::Rectilinear, _) => Self::V,
            (Basis::Diagonal, 0) => Self::D,
            (Basis::Diagonal, _) => Self::A,
        }
    }
}

impl fmt::Display for PolarizationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::H => "H",
            Self::V => "V",
            Self::D => "D",
            Self::A => "A",
        };
        f.write_str(s)
    }
}

impl FromStr for PolarizationState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "H" => Ok(Self::H),
            "V" => Ok(Self::V),
            "D" => Ok(Self::D),
            "A" => Ok(Self::A),
            _ => Err(Error::Domain(format!("unknown polarization state `{s}`"))),
        }
    }
}

/// Interferometer path: first letter from BS1 (a/b), second from BS2 (c/d).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Path {
    Ac,
    Ad,
    Bc,
    Bd,
}

impl Path {
    pub const ALL: [Path; 4] = [Path::Ac, Path::Ad, Path::Bc, Path::Bd];

    pub fn from_arms(via_a: bool, via_c: bool) -> Self {
        match (via_a, via_c) {
            (true, true) => Path::Ac,
            (true, false) => Path::Ad,
            (false, true) => Path::Bc,
            (false, false) => Path::Bd,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Path::Ac => "ac",
            Path::Ad => "ad",
            Path::Bc => "bc",
            Path::Bd => "bd",
        };
        f.write_str(s)
    }
}

impl FromStr for Path {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ac" => Ok(Path::Ac),
            "ad" => Ok(Path::Ad),
            "bc" => Ok(Path::Bc),
            "bd" => Ok(Path::Bd),
            _ => Err(Error::Domain(format!("unknown path `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathEntry {
    pub delay_ps: u64,
    pub state: PolarizationState,
}

/// Alice's private path → (delay, state) map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathDelayTable {
    pub ac: PathEntry,
    pub ad: PathEntry,
    pub bc: PathEntry,
    pub bd: PathEntry,
}

impl Default for PathDelayTable {
    fn default() -> Self {
        use PolarizationState::*;
        Self {
            ac: PathEntry {
                delay_ps: 11_840,
                state: V,
            },
            ad: PathEntry {
                delay_ps: 8_800,
                state: A,
            },
            bc: PathEntry {
                delay_ps: 13_570,
                state: H,
            },
            bd: PathEntry {
                delay_ps: 10_520,
                state: D,
            },
        }
    }
}

impl PathDelayTable {
    pub fn entry(&self, path: Path) -> PathEntry {
        match path {
            Path::Ac => self.ac,
            Path::Ad => self.ad,
            Path::Bc => self.bc,
            Path::Bd => self.bd,
        }
    }

    pub fn delay_ps(&self, path: Path) -> u64 {
        self.entry(path).delay_ps
    }

    pub fn state(&self, path: Path) -> PolarizationState {
        self.entry(path).state
    }

    /// Smallest absolute difference between any two path delays.
    pub fn min_gap_ps(&self) -> u64 {
        let d: Vec<u64> = Path::ALL.iter().map(|&p| self.delay_ps(p)).collect();
        let mut gap = u64::MAX;
        for i in 0..d.len() {
            for j in i + 1..d.len() {
                gap = gap.min(d[i].abs_diff(d[j]));
            }
        }
        gap
    }

    /// Checks distinct delays and that the states are a permutation of H, V, D, A.
    pub fn validate(&self) -> Result<()> {
        if self.min_gap_ps() == 0 {
            return Err(Error::config("path delays must be pairwise distinct"));
        }
        for s in PolarizationState::ALL {
            let n = Path::ALL.iter().filter(|&&p| self.state(p) == s).count();
            if n != 1 {
                return Err(Error::config(format!(
                    "state {s} assigned to {n} paths; states must be a permutation of H, V, D, A"
                )));
            }
        }
        Ok(())
    }

    /// Smallest delay difference between two paths whose states share a
    /// basis. Windows of paths in different bases may overlap; a tag falling
    /// in such an overlap has two candidate paths and is discarded by sifting.
    pub fn min_same_basis_gap_ps(&self) -> u64 {
        let mut gap = u64::MAX;
        for (i, &p) in Path::ALL.iter().enumerate() {
            for &q in &Path::ALL[i + 1..] {
                if self.state(p).basis() == self.state(q).basis() {
                    gap = gap.min(self.delay_ps(p).abs_diff(self.delay_ps(q)));
                }
            }
        }
        gap
    }

    /// Full table invariant for a given full-width coincidence window: the
    /// window must be narrower than the same-basis delay gap.
    pub fn validate_for_window(&self, window_ps: u64) -> Result<()> {
        self.validate()?;
        let gap = self.min_same_basis_gap_ps();
        if gap <= window_ps {
            return Err(Error::config(format!(
                "coincidence window {window_ps} ps must be smaller than the minimum same-basis path delay gap {gap} ps"
            )));
        }
        Ok(())
    }

    pub fn path_for_state(&self, state: PolarizationState) -> Path {
        Path::ALL
            .into_iter()
            .find(|&p| self.state(p) == state)
            .expect("table states form a permutation")
    }
}

/// Splitter ratios of the encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderParams {
    /// Probability that BS1 sends the photon into arm `a`.
    pub bs1_a_prob: f64,
    /// Probability that BS2 sends the photon into arm `c`.
    pub bs2_c_prob: f64,
    /// Per-photon probability of leaving BS3 towards Bob.
    pub bs3_transmission: f64,
}

impl Default for EncoderParams {
    fn default() -> Self {
        Self {
            bs1_a_prob: 0.5,
            bs2_c_prob: 0.5,
            bs3_transmission: 0.5,
        }
    }
}

impl EncoderParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("bs1_a_prob", self.bs1_a_prob),
            ("bs2_c_prob", self.bs2_c_prob),
            ("bs3_transmission", self.bs3_transmission),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("encoder.{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Light leaving BS3 towards Bob.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransmittedPhoton {
    pub emit_time_ps: u64,
    pub exit_time_ps: u64,
    pub path: Path,
    pub state: PolarizationState,
    /// Photons of the slot that passed BS3 (at least 1).
    pub n_photons: u8,
}

/// Alice's knowledge of one emission, kept whether or not it left BS3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AliceRecord {
    pub emit_time_ps: u64,
    pub path: Path,
    pub state: PolarizationState,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Encoded {
    /// Survivors of BS3, sorted by exit time.
    pub photons: Vec<TransmittedPhoton>,
    /// One entry per emission, in emission order.
    pub alice: Vec<AliceRecord>,
}

/// Routes every idler pulse through the encoder. Both photons of a multi-pair
/// slot share the sampled path; each then passes BS3 independently.
pub fn encode(
    idler: &[IdlerPulse],
    table: &PathDelayTable,
    params: &EncoderParams,
    seed: u64,
) -> Result<Encoded> {
    table.validate()?;
    params.validate()?;
    let mut rng = rng_from_seed(seed);
    let mut photons = Vec::with_capacity(idler.len() / 2 + 16);
    let mut alice = Vec::with_capacity(idler.len());
    for pulse in idler {
        let via_a = rng.random_bool(params.bs1_a_prob);
        let via_c = rng.random_bool(params.bs2_c_prob);
        let path = Path::from_arms(via_a, via_c);
        let entry = table.entry(path);
        alice.push(AliceRecord {
            emit_time_ps: pulse.time_ps,
            path,
            state: entry.state,
        });
        let passed = (0..pulse.n_photons)
            .filter(|_| rng.random_bool(params.bs3_transmission))
            .count() as u8;
        if passed > 0 {
            photons.push(TransmittedPhoton {
                emit_time_ps: pulse.time_ps,
                exit_time_ps: pulse.time_ps + entry.delay_ps,
                path,
                state: entry.state,
                n_photons: passed,
            });
        }
    }
    photons.sort_by_key(|p| (p.exit_time_ps, p.state));
    Ok(Encoded { photons, alice })
}

pub fn write_alice_csv(records: &[AliceRecord], path: impl AsRef<FsPath>) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["emit_time_ps", "path", "state"])
        .map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.emit_time_ps.to_string(),
            r.path.to_string(),
            r.state.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_alice_csv(path: impl AsRef<FsPath>) -> Result<Vec<AliceRecord>> {
    let path = path.as_ref();
    let csv_err = |e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut out = Vec::new();
    for row in r.records() {
        let row = row.map_err(csv_err)?;
        let field = |i: usize| row.get(i).unwrap_or_default();
        out.push(AliceRecord {
            emit_time_ps: field(0)
                .parse()
                .map_err(|_| Error::Domain(format!("bad emit time `{}`", field(0))))?,
            path: field(1).parse()?,
            state: field(2).parse()?,
        });
    }
    Ok(out)
}
