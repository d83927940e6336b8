//! Non-binary LDPC codes over GF(2^p) with bit-interleaved Gray QAM over a
//! Rayleigh fading channel.
//!
//! The transmission chain is: random message -> systematic [`tanner::Encoder`]
//! -> bit serialization (LSB-first) -> [`interleaver::InterleaverPattern`]
//! -> [`modem::Constellation`] -> [`modem::Channel`] -> likelihoods ->
//! [`decoder::Decoder`]. The [`sim`] module runs that chain as a
//! deterministic, parallel Monte-Carlo experiment.

pub mod decoder;
pub mod gf;
pub mod graph;
pub mod interleaver;
pub mod modem;
pub mod sim;
pub mod tanner;

pub use gf::{Field, GfError, Symbol};
pub use graph::Girth;
pub use tanner::{CodeFile, Edge, Encoder, TannerError, TannerGraph};
pub use interleaver::{InterleaverError, InterleaverKind, InterleaverPattern, PegOptions};
pub use decoder::{DecodeOutcome, DecodeStatus, Decoder};
pub use modem::{Channel, ChannelSample, Constellation, Fading, LikelihoodBlock, Modulation};
pub use sim::{FerRecord, SimConfig, SimError, Sweep, System, TrialOutcome};
