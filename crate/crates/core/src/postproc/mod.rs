//! Classical post-processing: QBER estimation, LDPC syndrome reconciliation,
//! key verification, Toeplitz privacy amplification and key-length accounting.

pub mod entropy;
pub mod keyfile;
pub mod ldpc;
pub mod qber;
pub mod report;
pub mod toeplitz;
pub mod verify;

pub use entropy::{binary_entropy, secure_key_length, KeyLengthParams};
pub use keyfile::{read_key, write_key};
pub use ldpc::{
    ldpc_reconcile, ldpc_syndrome, reconcile_blocks, DecodeOutcome, LdpcCode, Reconciliation,
};
pub use qber::estimate_qber;
pub use report::KeyRateReport;
pub use toeplitz::{toeplitz_extract, ToeplitzSeed};
pub use verify::{key_digest, verify_keys};
