use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary Shannon entropy in bits, with `0 · log 0 = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!(
            "binary entropy argument {p} outside [0, 1]"
        )));
    }
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    Ok(term(p) + term(1.0 - p))
}

/// Constants of the secure-length bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyLengthParams {
    /// Security parameter entering the `2 log2(1/ε)` finite-size term.
    pub epsilon_sec: f64,
    /// Reconciliation inefficiency used only for the `f · H2(e)` comparison figure.
    pub ec_efficiency: f64,
}

impl Default for KeyLengthParams {
    fn default() -> Self {
        Self {
            epsilon_sec: 1e-10,
            ec_efficiency: 1.1,
        }
    }
}

/// Extractable secure bits:
/// `⌊n (1 - m) (1 - H2(e)) - leak - 2 log2(1/ε)⌋`, clamped at zero, where `m`
/// is the multi-photon fraction. An error rate of one half or more leaves
/// nothing. `epsilon_sec >= 1` drops the finite-size term.
pub fn secure_key_length(
    n_sifted: u64,
    qber: f64,
    ec_leakage_bits: u64,
    multiphoton_fraction: f64,
    epsilon_sec: f64,
) -> u64 {
    if !(0.0..0.5).contains(&qber) {
        return 0;
    }
    let h = binary_entropy(qber).expect("qber checked");
    let single = (1.0 - multiphoton_fraction.clamp(0.0, 1.0)).max(0.0);
    let finite = if epsilon_sec > 0.0 && epsilon_sec < 1.0 {
        2.0 * (1.0 / epsilon_sec).log2()
    } else {
        0.0
    };
    let l = n_sifted as f64 * single * (1.0 - h) - ec_leakage_bits as f64 - finite;
    if l <= 0.0 {
        0
    } else {
        (l.floor() as u64).min(n_sifted)
    }
}
