use thiserror::Error;

use crate::event_engine::EventError;
use crate::face_detect::DetectError;
use crate::frame_io::FrameError;
use crate::midi_io::MidiError;
use crate::optic_flow::FlowError;
use crate::session::SessionError;
use crate::synth::SynthError;

/// Top-level error; each variant carries the module that produced it so
/// diagnostics read as `<module>: <cause>`.
#[derive(Debug, Error)]
pub enum Error {
    #[error("frame-io: {0}")]
    Frame(#[from] FrameError),
    #[error("optic-flow: {0}")]
    Flow(#[from] FlowError),
    #[error("face-detect: {0}")]
    Detect(#[from] DetectError),
    #[error("event-engine: {0}")]
    Event(#[from] EventError),
    #[error("midi-io: {0}")]
    Midi(#[from] MidiError),
    #[error("synth: {0}")]
    Synth(#[from] SynthError),
    #[error("session: {0}")]
    Session(#[from] SessionError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
