//! Syndrome-based LDPC reconciliation.
//!
//! Alice publishes the syndrome `H·x` of each block of her key. Bob runs a
//! flooding sum-product decoder seeded with channel log-likelihoods derived
//! from the estimated QBER, searching for the word closest to his bits that
//! has Alice's syndrome.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// Sparse parity-check matrix stored by rows, with the column view cached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LdpcCode {
    n: usize,
    rows: Vec<Vec<u32>>,
    cols: Vec<Vec<u32>>,
}

pub const DEFAULT_BLOCK_LENGTH: usize = 4_096;
pub const DEFAULT_MAX_ITERATIONS: usize = 60;
pub const DEFAULT_CODE_SEED: u64 = 0x5eed_1d9c;

impl LdpcCode {
    /// Builds a code from explicit rows (each a list of variable indices).
    pub fn from_rows(n: usize, rows: Vec<Vec<u32>>) -> Result<Self> {
        let mut cols = vec![Vec::new(); n];
        for (c, row) in rows.iter().enumerate() {
            if row.is_empty() {
                return Err(Error::config(format!("parity-check row {c} is empty")));
            }
            for &v in row {
                let v = v as usize;
                if v >= n {
                    return Err(Error::config(format!(
                        "row {c} references column {v} >= {n}"
                    )));
                }
                if cols[v].last() == Some(&(c as u32)) {
                    return Err(Error::config(format!("row {c} repeats column {v}")));
                }
                cols[v].push(c as u32);
            }
        }
        if let Some(v) = cols.iter().position(Vec::is_empty) {
            return Err(Error::config(format!("parity-check column {v} is empty")));
        }
        Ok(Self { n, rows, cols })
    }

    /// Seeded pseudo-random regular code with `column_weight` ones per column
    /// and `row_weight` per row, built column by column. Each column prefers
    /// the least-filled checks and avoids checks that would close a 4-cycle
    /// whenever another choice exists.
    pub fn regular(n: usize, column_weight: usize, row_weight: usize, seed: u64) -> Result<Self> {
        if n == 0
            || column_weight == 0
            || row_weight == 0
            || !(n * column_weight).is_multiple_of(row_weight)
        {
            return Err(Error::config(format!(
                "cannot build a ({column_weight},{row_weight}) regular code of length {n}"
            )));
        }
        let m = n * column_weight / row_weight;
        if column_weight > m {
            return Err(Error::config("column weight exceeds the number of checks"));
        }
        let mut rng = rng_from_seed(seed);
        let mut rows: Vec<Vec<u32>> = vec![Vec::with_capacity(row_weight); m];
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        // stamp[v] == tag marks variables adjacent to the checks already picked
        let mut stamp = vec![usize::MAX; n];
        let mut check_order: Vec<usize> = (0..m).collect();
        for (tag, &v) in order.iter().enumerate() {
            check_order.shuffle(&mut rng);
            check_order.sort_by_key(|&c| rows[c].len());
            let mut picked: Vec<usize> = Vec::with_capacity(column_weight);
            for strict in [true, false] {
                for &c in &check_order {
                    if picked.len() == column_weight {
                        break;
                    }
                    if rows[c].len() >= row_weight || picked.contains(&c) {
                        continue;
                    }
                    if strict && rows[c].iter().any(|&u| stamp[u as usize] == tag) {
                        continue;
                    }
                    picked.push(c);
                    for &u in &rows[c] {
                        stamp[u as usize] = tag;
                    }
                }
            }
            if picked.len() < column_weight {
                // capacity exhausted by earlier picks; take any check not yet used by v
                for c in 0..m {
                    if picked.len() == column_weight {
                        break;
                    }
                    if !picked.contains(&c) {
                        picked.push(c);
                    }
                }
            }
            for c in picked {
                rows[c].push(v as u32);
            }
        }
        for row in &mut rows {
            row.sort_unstable();
        }
        Self::from_rows(n, rows)
    }

    /// The default rate-1/2 (3,6) code of length 4096.
    pub fn default_half_rate() -> Self {
        Self::regular(DEFAULT_BLOCK_LENGTH, 3, 6, DEFAULT_CODE_SEED).expect("valid parameters")
    }

    pub fn block_length(&self) -> usize {
        self.n
    }

    /// Number of parity checks, i.e. syndrome bits disclosed per block.
    pub fn syndrome_length(&self) -> usize {
        self.rows.len()
    }

    pub fn rate(&self) -> f64 {
        1.0 - self.rows.len() as f64 / self.n as f64
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    pub fn edges(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Number of length-4 cycles (pairs of checks sharing two variables).
    pub fn four_cycles(&self) -> usize {
        let mut count = 0;
        let mut seen = vec![u32::MAX; self.rows.len()];
        let mut mult = vec![0u32; self.rows.len()];
        for (c, row) in self.rows.iter().enumerate() {
            let mut touched = Vec::new();
            for &v in row {
                for &d in &self.cols[v as usize] {
                    let d = d as usize;
                    if d <= c {
                        continue;
                    }
                    if seen[d] != c as u32 {
                        seen[d] = c as u32;
                        mult[d] = 0;
                        touched.push(d);
                    }
                    mult[d] += 1;
                }
            }
            for d in touched {
                let k = mult[d] as usize;
                count += k * (k.saturating_sub(1)) / 2;
            }
        }
        count
    }
}

pub fn ldpc_syndrome(code: &LdpcCode, bits: &[u8]) -> Result<Vec<u8>> {
    if bits.len() != code.n {
        return Err(Error::LengthMismatch {
            expected: code.n,
            actual: bits.len(),
        });
    }
    Ok(code
        .rows
        .iter()
        .map(|row| row.iter().fold(0u8, |acc, &v| acc ^ (bits[v as usize] & 1)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeOutcome {
    /// Syndrome reproduced after `iterations` rounds (0 when the input
    /// already satisfied it).
    Corrected {
        bits: Vec<u8>,
        iterations: usize,
    },
    Failed {
        iterations: usize,
    },
}

impl DecodeOutcome {
    pub fn bits(&self) -> Option<&[u8]> {
        match self {
            DecodeOutcome::Corrected { bits, .. } => Some(bits),
            DecodeOutcome::Failed { .. } => None,
        }
    }
}

const LLR_CLAMP: f64 = 30.0;

/// `φ(x) = -ln tanh(x/2)`, its own inverse on `x > 0`.
fn phi(x: f64) -> f64 {
    let x = x.clamp(1e-12, LLR_CLAMP);
    -(x * 0.5).tanh().ln()
}

/// Sum-product syndrome decoding of `bob_bits` towards `alice_syndrome`.
pub fn ldpc_reconcile(
    code: &LdpcCode,
    bob_bits: &[u8],
    alice_syndrome: &[u8],
    qber: f64,
    max_iterations: usize,
) -> Result<DecodeOutcome> {
    if bob_bits.len() != code.n {
        return Err(Error::LengthMismatch {
            expected: code.n,
            actual: bob_bits.len(),
        });
    }
    if alice_syndrome.len() != code.rows.len() {
        return Err(Error::LengthMismatch {
            expected: code.rows.len(),
            actual: alice_syndrome.len(),
        });
    }
    if !(qber > 0.0 && qber < 0.5) {
        return Err(Error::Domain(format!(
            "decoder QBER {qber} outside (0, 0.5)"
        )));
    }
    let mut hard: Vec<u8> = bob_bits.iter().map(|b| b & 1).collect();
    if ldpc_syndrome(code, &hard)? == alice_syndrome {
        return Ok(DecodeOutcome::Corrected {
            bits: hard,
            iterations: 0,
        });
    }

    let magnitude = ((1.0 - qber) / qber).ln();
    let channel: Vec<f64> = hard
        .iter()
        .map(|&b| if b == 0 { magnitude } else { -magnitude })
        .collect();

    // Edge e belongs to check row_of[e] and variable var_of[e]; edges of a
    // check are contiguous.
    let mut row_start = Vec::with_capacity(code.rows.len() + 1);
    let mut var_of = Vec::with_capacity(code.edges());
    row_start.push(0);
    for row in &code.rows {
        var_of.extend(row.iter().map(|&v| v as usize));
        row_start.push(var_of.len());
    }
    let mut var_edges: Vec<Vec<usize>> = vec![Vec::new(); code.n];
    for (e, &v) in var_of.iter().enumerate() {
        var_edges[v].push(e);
    }

    let mut c2v = vec![0.0f64; var_of.len()];
    let mut v2c = vec![0.0f64; var_of.len()];
    let mut total = channel.clone();

    for iteration in 1..=max_iterations {
        for (v, edges) in var_edges.iter().enumerate() {
            for &e in edges {
                v2c[e] = (total[v] - c2v[e]).clamp(-LLR_CLAMP, LLR_CLAMP);
            }
        }
        for (c, &s) in alice_syndrome.iter().enumerate() {
            let range = row_start[c]..row_start[c + 1];
            let mut sum_phi = 0.0;
            let mut negative = s & 1 == 1;
            for e in range.clone() {
                sum_phi += phi(v2c[e].abs());
                negative ^= v2c[e] < 0.0;
            }
            for e in range {
                let mag = phi(sum_phi - phi(v2c[e].abs()));
                let sign_neg = negative ^ (v2c[e] < 0.0);
                c2v[e] = if sign_neg { -mag } else { mag };
            }
        }
        total.copy_from_slice(&channel);
        for (e, &v) in var_of.iter().enumerate() {
            total[v] += c2v[e];
        }
        for (h, &t) in hard.iter_mut().zip(&total) {
            *h = (t < 0.0) as u8;
        }
        if ldpc_syndrome(code, &hard)? == alice_syndrome {
            return Ok(DecodeOutcome::Corrected {
                bits: hard,
                iterations: iteration,
            });
        }
    }
    Ok(DecodeOutcome::Failed {
        iterations: max_iterations,
    })
}

/// Result of reconciling a whole key block by block.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Reconciliation {
    /// Alice's bits of the blocks that decoded.
    pub alice: Vec<u8>,
    /// Bob's corrected bits of the same blocks.
    pub bob: Vec<u8>,
    pub blocks_attempted: usize,
    pub blocks_failed: usize,
    /// Syndrome bits disclosed for the retained blocks.
    pub leakage_bits: u64,
    /// Trailing bits that did not fill a block.
    pub tail_discarded: usize,
}

/// Splits the keys into code-length blocks and reconciles each one. Failed
/// blocks are dropped from both sides; the tail shorter than a block is
/// discarded.
pub fn reconcile_blocks(
    code: &LdpcCode,
    alice: &[u8],
    bob: &[u8],
    qber: f64,
    max_iterations: usize,
) -> Result<Reconciliation> {
    if alice.len() != bob.len() {
        return Err(Error::LengthMismatch {
            expected: alice.len(),
            actual: bob.len(),
        });
    }
    let n = code.block_length();
    let mut out = Reconciliation {
        tail_discarded: alice.len() % n,
        ..Default::default()
    };
    for (a, b) in alice.chunks_exact(n).zip(bob.chunks_exact(n)) {
        out.blocks_attempted += 1;
        let syndrome = ldpc_syndrome(code, a)?;
        match ldpc_reconcile(code, b, &syndrome, qber, max_iterations)? {
            DecodeOutcome::Corrected { bits, .. } => {
                out.alice.extend_from_slice(a);
                out.bob.extend_from_slice(&bits);
                out.leakage_bits += code.syndrome_length() as u64;
            }
            DecodeOutcome::Failed { .. } => out.blocks_failed += 1,
        }
    }
    Ok(out)
}

/// Flips each bit independently with probability `p`.
pub fn flip_bits(bits: &[u8], p: f64, seed: u64) -> Vec<u8> {
    let mut rng = rng_from_seed(seed);
    bits.iter().map(|&b| b ^ rng.random_bool(p) as u8).collect()
}
