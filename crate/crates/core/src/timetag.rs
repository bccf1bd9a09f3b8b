//! Time-tag events, sorted tag streams, windowed coincidence counting and the
//! `QTAG v1` binary persistence format.
//!
//! All timestamps are integer picoseconds. A record `b` is coincident with a
//! record `a` at offset `Δ` when `|t_b - t_a - Δ| <= window / 2`, the window
//! being a full width and the boundary inclusive. Pairing is one-to-one and
//! greedy: records of the first stream are visited in time order and each
//! claims the earliest still-unclaimed partner inside its window.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Detector channel identifier.
pub type Channel = u8;

/// Channel assignments used throughout the simulator.
pub mod channels {
    use super::Channel;

    pub const HERALD: Channel = 0;
    pub const BOB_H: Channel = 1;
    pub const BOB_V: Channel = 2;
    pub const BOB_D: Channel = 3;
    pub const BOB_A: Channel = 4;
    pub const IDLER_1: Channel = 5;
    pub const IDLER_2: Channel = 6;
}

/// One detection event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeTagRecord {
    pub time_ps: u64,
    pub channel: Channel,
}

impl TimeTagRecord {
    pub fn new(time_ps: u64, channel: Channel) -> Self {
        Self { time_ps, channel }
    }
}

/// A time-ordered sequence of records over a fixed acquisition span.
///
/// Records are ordered by `(time_ps, channel)`, so equal timestamps list the
/// lower channel first.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TagStream {
    records: Vec<TimeTagRecord>,
    duration_ps: u64,
}

impl TagStream {
    /// Builds a stream from records that must already be sorted and lie within
    /// `[0, duration_ps]`.
    pub fn new(records: Vec<TimeTagRecord>, duration_ps: u64) -> Result<Self> {
        if let Some(i) = records.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::Domain(format!(
                "records not sorted at index {}",
                i + 1
            )));
        }
        if let Some(r) = records.iter().find(|r| r.time_ps > duration_ps) {
            return Err(Error::Domain(format!(
                "record at {} ps beyond duration {} ps",
                r.time_ps, duration_ps
            )));
        }
        Ok(Self {
            records,
            duration_ps,
        })
    }

    /// Sorts the records and drops any that fall after `duration_ps`.
    pub fn from_unsorted(mut records: Vec<TimeTagRecord>, duration_ps: u64) -> Self {
        records.retain(|r| r.time_ps <= duration_ps);
        records.sort_unstable();
        Self {
            records,
            duration_ps,
        }
    }

    pub fn empty(duration_ps: u64) -> Self {
        Self {
            records: Vec::new(),
            duration_ps,
        }
    }

    pub fn records(&self) -> &[TimeTagRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TimeTagRecord> {
        self.records
    }

    pub fn duration_ps(&self) -> u64 {
        self.duration_ps
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = u64> + '_ {
        self.records.iter().map(|r| r.time_ps)
    }

    /// Sub-stream holding only the given channel.
    pub fn channel(&self, channel: Channel) -> TagStream {
        TagStream {
            records: self
                .records
                .iter()
                .copied()
                .filter(|r| r.channel == channel)
                .collect(),
            duration_ps: self.duration_ps,
        }
    }

    /// Largest channel id present plus one, or zero for an empty stream.
    pub fn channel_span(&self) -> u8 {
        self.records
            .iter()
            .map(|r| r.channel)
            .max()
            .map_or(0, |c| c.saturating_add(1))
    }

    fn signed_times(&self) -> Vec<i64> {
        self.records.iter().map(|r| r.time_ps as i64).collect()
    }
}

/// Merges two sorted streams of equal duration into one sorted stream.
pub fn merge_streams(a: &TagStream, b: &TagStream) -> Result<TagStream> {
    if a.duration_ps != b.duration_ps {
        return Err(Error::config(format!(
            "cannot merge streams of duration {} ps and {} ps",
            a.duration_ps, b.duration_ps
        )));
    }
    let (x, y) = (&a.records, &b.records);
    let mut out = Vec::with_capacity(x.len() + y.len());
    let (mut i, mut j) = (0, 0);
    while i < x.len() && j < y.len() {
        if y[j] < x[i] {
            out.push(y[j]);
            j += 1;
        } else {
            out.push(x[i]);
            i += 1;
        }
    }
    out.extend_from_slice(&x[i..]);
    out.extend_from_slice(&y[j..]);
    Ok(TagStream {
        records: out,
        duration_ps: a.duration_ps,
    })
}

fn count_pairs(a: &[i64], b: &[i64], window_ps: i64, offset_ps: i64) -> u64 {
    // Everything before `j` is either claimed or too early for every later
    // record of `a`, because window centres only move forward.
    let mut j = 0;
    let mut n = 0;
    for &ta in a {
        let centre2 = 2 * (ta + offset_ps);
        while j < b.len() && 2 * b[j] < centre2 - window_ps {
            j += 1;
        }
        if j < b.len() && 2 * b[j] <= centre2 + window_ps {
            n += 1;
            j += 1;
        }
    }
    n
}

fn count_triple_matches(
    s: &[i64],
    i1: &[i64],
    i2: &[i64],
    window_ps: i64,
    offset1_ps: i64,
    offset2_ps: i64,
) -> u64 {
    let (mut j1, mut j2) = (0, 0);
    let mut n = 0;
    for &ts in s {
        let c1 = 2 * (ts + offset1_ps);
        let c2 = 2 * (ts + offset2_ps);
        while j1 < i1.len() && 2 * i1[j1] < c1 - window_ps {
            j1 += 1;
        }
        while j2 < i2.len() && 2 * i2[j2] < c2 - window_ps {
            j2 += 1;
        }
        let hit1 = j1 < i1.len() && 2 * i1[j1] <= c1 + window_ps;
        let hit2 = j2 < i2.len() && 2 * i2[j2] <= c2 + window_ps;
        if hit1 && hit2 {
            n += 1;
            j1 += 1;
            j2 += 1;
        }
    }
    n
}

/// Counts records of `a` that pair with a record of `b` at `offset_ps`.
///
/// Runs in `O(|a| + |b|)`.
pub fn count_coincidences(a: &TagStream, b: &TagStream, window_ps: u64, offset_ps: i64) -> u64 {
    count_pairs(
        &a.signed_times(),
        &b.signed_times(),
        window_ps as i64,
        offset_ps,
    )
}

/// Counts records of `s` that pair with records of both `i1` and `i2` at zero offset.
pub fn count_triples(s: &TagStream, i1: &TagStream, i2: &TagStream, window_ps: u64) -> u64 {
    count_triples_offset(s, i1, i2, window_ps, 0, 0)
}

/// [`count_triples`] with independent offsets for the two partner streams.
pub fn count_triples_offset(
    s: &TagStream,
    i1: &TagStream,
    i2: &TagStream,
    window_ps: u64,
    offset1_ps: i64,
    offset2_ps: i64,
) -> u64 {
    count_triple_matches(
        &s.signed_times(),
        &i1.signed_times(),
        &i2.signed_times(),
        window_ps as i64,
        offset1_ps,
        offset2_ps,
    )
}

/// Singles, pairwise and three-fold coincidence counts for a heralded
/// three-detector measurement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoincidenceCounts {
    pub singles: BTreeMap<Channel, u64>,
    pub pair_counts: BTreeMap<(Channel, Channel), u64>,
    pub triple_count: u64,
    pub window_ps: u64,
}

impl CoincidenceCounts {
    /// Tallies herald `s` against partners `i1` and `i2`.
    ///
    /// `i2_offset_ps` is the offset at which `i2` records are looked for
    /// relative to `s` (and to `i1` for the `(i1, i2)` pair). Channel ids are
    /// taken from the arguments, not the records.
    pub fn heralded(
        s: (Channel, &TagStream),
        i1: (Channel, &TagStream),
        i2: (Channel, &TagStream),
        window_ps: u64,
        i2_offset_ps: i64,
    ) -> Self {
        let (ts, t1, t2) = (s.1.signed_times(), i1.1.signed_times(), i2.1.signed_times());
        let w = window_ps as i64;
        let mut singles = BTreeMap::new();
        singles.insert(s.0, ts.len() as u64);
        singles.insert(i1.0, t1.len() as u64);
        singles.insert(i2.0, t2.len() as u64);
        let mut pair_counts = BTreeMap::new();
        pair_counts.insert((s.0, i1.0), count_pairs(&ts, &t1, w, 0));
        pair_counts.insert((s.0, i2.0), count_pairs(&ts, &t2, w, i2_offset_ps));
        pair_counts.insert((i1.0, i2.0), count_pairs(&t1, &t2, w, i2_offset_ps));
        let triple_count = count_triple_matches(&ts, &t1, &t2, w, 0, i2_offset_ps);
        Self {
            singles,
            pair_counts,
            triple_count,
            window_ps,
        }
    }

    pub fn single(&self, channel: Channel) -> u64 {
        self.singles.get(&channel).copied().unwrap_or(0)
    }

    pub fn pair(&self, a: Channel, b: Channel) -> u64 {
        self.pair_counts
            .get(&(a, b))
            .or_else(|| self.pair_counts.get(&(b, a)))
            .copied()
            .unwrap_or(0)
    }
}

pub const QTAG_MAGIC: [u8; 4] = *b"QTAG";
pub const QTAG_VERSION: u16 = 1;
const QTAG_HEADER_LEN: usize = 16;
const QTAG_RECORD_LEN: usize = 9;

/// Serializes a stream as `QTAG v1`.
///
/// The header's channel-count byte is the number of declared channel ids,
/// i.e. one past the largest channel in the stream.
pub fn encode_tags(stream: &TagStream) -> Vec<u8> {
    let mut buf = Vec::with_capacity(QTAG_HEADER_LEN + QTAG_RECORD_LEN * stream.len());
    buf.extend_from_slice(&QTAG_MAGIC);
    buf.extend_from_slice(&QTAG_VERSION.to_le_bytes());
    buf.push(stream.channel_span());
    buf.push(0);
    buf.extend_from_slice(&stream.duration_ps.to_le_bytes());
    for r in &stream.records {
        buf.extend_from_slice(&r.time_ps.to_le_bytes());
        buf.push(r.channel);
    }
    buf
}

/// Parses a `QTAG v1` byte buffer, validating ordering and channel ids.
pub fn decode_tags(bytes: &[u8]) -> Result<TagStream> {
    if bytes.len() < 4 || bytes[..4] != QTAG_MAGIC {
        return Err(Error::format(0, "bad magic, expected \"QTAG\""));
    }
    if bytes.len() < QTAG_HEADER_LEN {
        return Err(Error::format(bytes.len() as u64, "truncated header"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != QTAG_VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let channel_count = bytes[6];
    if bytes[7] != 0 {
        return Err(Error::format(7, "reserved byte must be zero"));
    }
    let duration_ps = u64::from_le_bytes(bytes[8..16].try_into().expect("8-byte slice"));

    let payload = &bytes[QTAG_HEADER_LEN..];
    let mut records = Vec::with_capacity(payload.len() / QTAG_RECORD_LEN);
    let mut prev: Option<TimeTagRecord> = None;
    for (i, chunk) in payload.chunks(QTAG_RECORD_LEN).enumerate() {
        let offset = (QTAG_HEADER_LEN + i * QTAG_RECORD_LEN) as u64;
        if chunk.len() < QTAG_RECORD_LEN {
            return Err(Error::format(offset, "truncated record"));
        }
        let rec = TimeTagRecord {
            time_ps: u64::from_le_bytes(chunk[..8].try_into().expect("8-byte slice")),
            channel: chunk[8],
        };
        if rec.channel >= channel_count {
            return Err(Error::format(
                offset + 8,
                format!(
                    "channel {} not declared (channel count {channel_count})",
                    rec.channel
                ),
            ));
        }
        if rec.time_ps > duration_ps {
            return Err(Error::format(offset, "record time exceeds duration"));
        }
        if prev.is_some_and(|p| rec < p) {
            return Err(Error::format(offset, "unsorted payload"));
        }
        prev = Some(rec);
        records.push(rec);
    }
    Ok(TagStream {
        records,
        duration_ps,
    })
}

pub fn write_tags(stream: &TagStream, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_tags(stream)).map_err(|e| Error::io(path, e))
}

pub fn read_tags(path: impl AsRef<Path>) -> Result<TagStream> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tags(&bytes)
}
