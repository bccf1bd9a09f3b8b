//! Toeplitz-matrix privacy amplification over GF(2).
//!
//! The `n_out × n_in` matrix has `T[i][j] = seed[i - j + n_in - 1]`. Row `i`
//! is a contiguous window of the reversed seed, so each output bit is the
//! parity of a shifted 64-bit-word AND against the packed input.

use rand::Rng;

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToeplitzSeed {
    bits: Vec<u8>,
    n_in: usize,
    n_out: usize,
}

impl ToeplitzSeed {
    pub fn new(bits: Vec<u8>, n_in: usize, n_out: usize) -> Result<Self> {
        if n_out > n_in {
            return Err(Error::Domain(format!(
                "output length {n_out} exceeds input length {n_in}"
            )));
        }
        let want = (n_in + n_out).saturating_sub(1);
        if bits.len() != want {
            return Err(Error::LengthMismatch {
                expected: want,
                actual: bits.len(),
            });
        }
        Ok(Self { bits, n_in, n_out })
    }

    pub fn random(n_in: usize, n_out: usize, seed: u64) -> Result<Self> {
        let mut rng = rng_from_seed(seed);
        let len = (n_in + n_out).saturating_sub(1);
        let bits = (0..len).map(|_| rng.random::<bool>() as u8).collect();
        Self::new(bits, n_in, n_out)
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }
}

fn pack(bits: impl ExactSizeIterator<Item = u8>) -> Vec<u64> {
    let mut words = vec![0u64; bits.len().div_ceil(64) + 1];
    for (i, b) in bits.enumerate() {
        words[i / 64] |= ((b & 1) as u64) << (i % 64);
    }
    words
}

/// 64 bits of `words` starting at bit `pos`.
#[inline]
fn window(words: &[u64], pos: usize) -> u64 {
    let (w, s) = (pos / 64, pos % 64);
    if s == 0 {
        words[w]
    } else {
        (words[w] >> s) | (words.get(w + 1).copied().unwrap_or(0) << (64 - s))
    }
}

pub fn toeplitz_extract(bits: &[u8], seed: &ToeplitzSeed) -> Result<Vec<u8>> {
    if bits.len() != seed.n_in {
        return Err(Error::LengthMismatch {
            expected: seed.n_in,
            actual: bits.len(),
        });
    }
    let n_in = seed.n_in;
    let x = pack(bits.iter().copied());
    let reversed = pack(seed.bits.iter().rev().copied());
    let full_words = n_in / 64;
    let rem = n_in % 64;
    let tail_mask = if rem == 0 { 0 } else { (1u64 << rem) - 1 };
    let mut out = Vec::with_capacity(seed.n_out);
    for i in 0..seed.n_out {
        let base = seed.n_out - 1 - i;
        let mut acc = 0u64;
        for q in 0..full_words {
            acc ^= window(&reversed, base + 64 * q) & x[q];
        }
        if rem != 0 {
            acc ^= window(&reversed, base + 64 * full_words) & x[full_words] & tail_mask;
        }
        out.push((acc.count_ones() & 1) as u8);
    }
    Ok(out)
}
