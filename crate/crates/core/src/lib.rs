//! Photon-level simulation and post-processing for heralded, passively
//! encoded BB84.
//!
//! Time is carried as integer picoseconds throughout. Every random stage takes
//! an explicit seed; [`seed::derive_seed`] maps a master seed and stage name to
//! independent streams.

pub mod calibration;
pub mod config;
pub mod error;
pub mod g2;
pub mod pipeline;
pub mod postproc;
pub mod receiver;
pub mod seed;
pub mod sifting;
pub mod source;
pub mod timetag;
pub mod transmitter;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use g2::{G2Point, G2Rates, HbtParams};
pub use postproc::KeyRateReport;
pub use receiver::{ChannelParams, DetectorParams};
pub use sifting::{SiftConfig, SiftedEvent, SiftedKey};
pub use source::{EmissionEvent, SourceParams};
pub use timetag::{Channel, TagStream, TimeTagRecord};
pub use transmitter::{Basis, EncoderParams, Path, PathDelayTable, PolarizationState};
