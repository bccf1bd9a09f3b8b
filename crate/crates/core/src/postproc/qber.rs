use rand::seq::index;

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;
use crate::sifting::SiftedKey;

/// Publicly compares `⌈fraction · len⌉` uniformly chosen positions and drops
/// them from the key. Returns the observed error rate and the remaining key.
pub fn estimate_qber(key: &SiftedKey, sample_fraction: f64, seed: u64) -> Result<(f64, SiftedKey)> {
    if key.is_empty() {
        return Err(Error::NoKeyMaterial(
            "cannot estimate QBER of an empty sifted key".into(),
        ));
    }
    if !(sample_fraction > 0.0 && sample_fraction <= 1.0) {
        return Err(Error::Domain(format!(
            "sample fraction {sample_fraction} outside (0, 1]"
        )));
    }
    let n = key.len();
    let k = ((sample_fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut rng = rng_from_seed(seed);
    let mut sampled = vec![false; n];
    for i in index::sample(&mut rng, n, k) {
        sampled[i] = true;
    }
    let mut errors = 0usize;
    let mut rest = Vec::with_capacity(n - k);
    for (e, &s) in key.events.iter().zip(&sampled) {
        if s {
            errors += (e.alice_bit != e.bob_bit) as usize;
        } else {
            rest.push(*e);
        }
    }
    Ok((errors as f64 / k as f64, SiftedKey { events: rest }))
}
