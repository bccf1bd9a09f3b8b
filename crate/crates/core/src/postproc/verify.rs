//! Key confirmation by universal polynomial hashing.
//!
//! Bits are packed into 32-bit words, the bit length is appended, and the
//! word sequence is evaluated as a polynomial at two independent secret
//! points modulo the Mersenne prime `p = 2^61 - 1`. Two distinct inputs of at
//! most `d` words collide at one point with probability at most `d / p`, so
//! the pair collides with probability at most `(d / p)^2`, below `2^-60` for
//! any key shorter than `2^35` bits.

use rand::Rng;

use crate::seed::rng_from_seed;

const P: u64 = (1 << 61) - 1;

fn mul_mod(a: u64, b: u64) -> u64 {
    let wide = a as u128 * b as u128;
    let lo = (wide as u64) & P;
    let hi = (wide >> 61) as u64;
    let s = lo + hi;
    if s >= P {
        s - P
    } else {
        s
    }
}

fn add_mod(a: u64, b: u64) -> u64 {
    let s = a + b;
    if s >= P {
        s - P
    } else {
        s
    }
}

fn eval(words: &[u64], point: u64) -> u64 {
    words
        .iter()
        .fold(0, |acc, &w| add_mod(mul_mod(acc, point), w))
}

fn words_of(bits: &[u8]) -> Vec<u64> {
    let mut words: Vec<u64> = bits
        .chunks(32)
        .map(|c| {
            c.iter()
                .enumerate()
                .fold(0u64, |acc, (i, &b)| acc | (((b & 1) as u64) << i))
        })
        .collect();
    words.push(bits.len() as u64 % P);
    words
}

/// Two 61-bit hash values of `bits` under the shared `seed`.
pub fn key_digest(bits: &[u8], seed: u64) -> [u64; 2] {
    let mut rng = rng_from_seed(seed);
    let points = [rng.random_range(1..P), rng.random_range(1..P)];
    let words = words_of(bits);
    points.map(|pt| eval(&words, pt))
}

/// True when both parties' digests agree.
pub fn verify_keys(alice: &[u8], bob: &[u8], seed: u64) -> bool {
    key_digest(alice, seed) == key_digest(bob, seed)
}
