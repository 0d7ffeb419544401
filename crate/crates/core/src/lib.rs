//! Facial-action sonification engine.
//!
//! Video frames are turned into a dense block-matching flow field, the flow is
//! restricted to seven zones of a detected face, and supra-threshold motion is
//! converted into MIDI note events that drive a small polyphonic sampler.
//!
//! The pipeline stages live in their own modules:
//!
//! - [`frame_io`]: frame sources (Y4M, PGM directories, camera) and grayscale conversion
//! - [`optic_flow`]: exhaustive SAD block matching and neighbourhood smoothing
//! - [`face_detect`]: integral images, attentional-cascade evaluation and scanning
//! - [`zone_map`]: facial zone layout, grid-point classification, salience rules
//! - [`event_engine`]: top-k trigger selection, pitch/velocity/channel mapping, note-off scheduling
//! - [`midi_io`]: wire encoding, raw MIDI ports and Standard MIDI File output
//! - [`synth`]: sampler voices, ADSR, pan, delay with low-passed feedback
//! - [`session`]: configuration, offline and live orchestration, control protocol

pub mod error;
pub mod event_engine;
pub mod face_detect;
pub mod frame_io;
pub mod geometry;
pub mod midi_io;
pub mod optic_flow;
pub mod session;
pub mod synth;
pub mod zone_map;

pub use error::{Error, Result};
pub use event_engine::{EngineState, EventConfig, MidiEvent, NoteKind, OverlayFrame};
pub use face_detect::{Cascade, FaceDetector, FaceRoi, IntegralImage, ScanParams};
pub use frame_io::{FrameSource, GrayFrame, SourceKind, SourceSpec};
pub use geometry::Rect;
pub use optic_flow::{FlowField, FlowParams, FlowVector};
pub use session::{ControlMessage, SessionConfig};
pub use synth::{AdsrParams, DelayParams, Synth, SynthConfig};
pub use zone_map::{Zone, ZoneGroup, ZoneLabel, ZoneLayout};
