//! Final-key file: 16-byte header (`QKEY`, u16 version, u16 reserved, u64 bit
//! length, all little-endian) followed by the bits packed LSB-first.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const QKEY_MAGIC: [u8; 4] = *b"QKEY";
pub const QKEY_VERSION: u16 = 1;

pub fn encode_key(bits: &[u8]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(16 + bits.len().div_ceil(8));
    buf.extend_from_slice(&QKEY_MAGIC);
    buf.extend_from_slice(&QKEY_VERSION.to_le_bytes());
    buf.extend_from_slice(&0u16.to_le_bytes());
    buf.extend_from_slice(&(bits.len() as u64).to_le_bytes());
    for chunk in bits.chunks(8) {
        buf.push(
            chunk
                .iter()
                .enumerate()
                .fold(0u8, |acc, (i, &b)| acc | ((b & 1) << i)),
        );
    }
    buf
}

pub fn decode_key(bytes: &[u8]) -> Result<Vec<u8>> {
    if bytes.len() < 4 || bytes[..4] != QKEY_MAGIC {
        return Err(Error::format(0, "bad magic, expected \"QKEY\""));
    }
    if bytes.len() < 16 {
        return Err(Error::format(bytes.len() as u64, "truncated header"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != QKEY_VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let payload = &bytes[16..];
    if payload.len() != len.div_ceil(8) {
        return Err(Error::format(
            16 + payload.len().min(len.div_ceil(8)) as u64,
            "payload length does not match header",
        ));
    }
    Ok((0..len).map(|i| (payload[i / 8] >> (i % 8)) & 1).collect())
}

pub fn write_key(bits: &[u8], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_key(bits)).map_err(|e| Error::io(path, e))
}

pub fn read_key(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    decode_key(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
