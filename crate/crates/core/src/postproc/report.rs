//! Key-rate report, persisted as flat `key=value` lines or a CSV row.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct KeyRateReport {
    pub duration_s: f64,
    pub sifted_bits: u64,
    pub sifted_rate_bps: f64,
    pub qber: f64,
    pub qber_sample_bits: u64,
    /// Bits in successfully decoded blocks.
    pub reconciled_bits: u64,
    pub blocks_attempted: u64,
    pub blocks_failed: u64,
    pub ec_leakage_bits: u64,
    pub verified: bool,
    pub multiphoton_fraction: f64,
    pub secure_bits: u64,
    pub secure_rate_bps: f64,
    /// Secure bits had leakage been `f · H2(e)` per bit instead of the
    /// disclosed syndromes; for comparison only.
    pub secure_bits_f_model: u64,
}

macro_rules! report_fields {
    ($m:ident) => {
        $m!(
            duration_s: f64,
            sifted_bits: u64,
            sifted_rate_bps: f64,
            qber: f64,
            qber_sample_bits: u64,
            reconciled_bits: u64,
            blocks_attempted: u64,
            blocks_failed: u64,
            ec_leakage_bits: u64,
            verified: bool,
            multiphoton_fraction: f64,
            secure_bits: u64,
            secure_rate_bps: f64,
            secure_bits_f_model: u64
        )
    };
}

impl KeyRateReport {
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        macro_rules! emit {
            ($($f:ident: $t:ty),*) => { $( let _ = writeln!(s, "{}={}", stringify!($f), self.$f); )* };
        }
        report_fields!(emit);
        s
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let map: HashMap<&str, &str> = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim(), v.trim()))
            .collect();
        let mut r = KeyRateReport::default();
        macro_rules! parse {
            ($($f:ident: $t:ty),*) => { $(
                let raw = map
                    .get(stringify!($f))
                    .ok_or_else(|| Error::Domain(format!("report missing `{}`", stringify!($f))))?;
                r.$f = raw
                    .parse::<$t>()
                    .map_err(|_| Error::Domain(format!("report field `{}` has bad value `{raw}`", stringify!($f))))?;
            )* };
        }
        report_fields!(parse);
        Ok(r)
    }

    pub fn csv_header() -> String {
        let mut names: Vec<&str> = Vec::new();
        macro_rules! name {
            ($($f:ident: $t:ty),*) => { $( names.push(stringify!($f)); )* };
        }
        report_fields!(name);
        names.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut vals: Vec<String> = Vec::new();
        macro_rules! val {
            ($($f:ident: $t:ty),*) => { $( vals.push(self.$f.to_string()); )* };
        }
        report_fields!(val);
        vals.join(",")
    }
}
