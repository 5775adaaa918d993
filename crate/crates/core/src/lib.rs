//! Dialogue enhancement for finished broadcast mixes.
//!
//! A stereo mix is split into mixture-consistent dialogue and background
//! stems ([`separation`]), the speech band of the dialogue is boosted, and the
//! background is attenuated while dialogue is active ([`remix`]) with the
//! overall loudness restored ([`loudness`]). Results are delivered as an
//! object package and a channel-based track ([`delivery`]).

pub mod app;
pub mod audio_io;
pub mod delivery;
pub mod loudness;
pub mod pipeline;
pub mod remix;
pub mod separation;
pub mod spectral;
