//! Core library for secret-key identification/authentication experiments:
//! exact discrete probability, rate-region evaluation and search, the
//! layered-binning codec at small blocklength, and exact analysis of a
//! fixed codebook including the optimal false-acceptance adversary.

pub mod analysis;
pub mod codec;
pub mod identities;
pub mod probability;
pub mod region;
pub mod textio;

pub use probability::{Channel, JointPmf, Pmf};
pub use region::{AuxChannels, RateTuple, RegionCorner, SourceModel};
