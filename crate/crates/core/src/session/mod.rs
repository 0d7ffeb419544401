//! Orchestration: configuration, the vision pipeline, offline rendering,
//! the three-stage live mode, and the UI control protocol.

pub mod bench;
mod config;
mod live;
mod offline;
mod pipeline;
pub mod protocol;
mod server;

use std::io;

use thiserror::Error;

use crate::event_engine::OverlayFrame;
use crate::frame_io::GrayFrame;
use crate::synth::{AdsrParams, DelayParams, Sample};

pub use config::{AudioOut, DetectorConfig, MidiOut, SessionConfig};
pub use live::{run_live, LiveOptions, LiveReport};
pub use offline::{frame_to_sample, run_offline, run_offline_with, OfflineReport};
pub use pipeline::{FrameOutput, VisionPipeline};
pub use protocol::{parse_control, ControlMessage, ServerMessage, Status, PROTOCOL_VERSION};
pub use server::{initial_status, Service};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid control: {0}")]
    Validation(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot listen on port {port}: {source}")]
    Bind { port: u16, source: io::Error },
    #[error("{0}")]
    Stage(String),
}

/// Controls handled by the vision stage.
#[derive(Clone, Debug, PartialEq)]
pub enum VisionControl {
    SetMidi(bool),
    SetThreshold(f32),
}

/// Controls handled by the audio stage.
#[derive(Clone, Debug)]
pub enum AudioControl {
    Mute(bool),
    Volume { channel: u8, l: f64, r: f64 },
    Delay(DelayParams),
    Adsr(AdsrParams),
    Sample(Sample),
}

/// One processed frame for the UI.
#[derive(Clone, Debug)]
pub struct FrameUpdate {
    pub frame: GrayFrame,
    pub overlay: OverlayFrame,
    pub fps: f64,
}
