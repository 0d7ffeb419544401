//! Text message protocol spoken over the websocket. Every message is a JSON
//! object with a protocol version `v` and a `type` tag.

use std::path::PathBuf;

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::SessionError;
use crate::event_engine::OverlayFrame;
use crate::frame_io::GrayFrame;
use crate::synth::{AdsrParams, DelayParams, StripConfig, STRIPS};
use crate::zone_map::ZoneGroup;

pub const PROTOCOL_VERSION: u32 = 1;

/// Performer controls. Payloads are checked with [`ControlMessage::validate`]
/// before anything is applied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ControlMessage {
    ToggleMidi,
    /// Sets the global mute, or flips it when `muted` is omitted.
    Mute {
        #[serde(default)]
        muted: Option<bool>,
    },
    SetVolume { channel: u8, l: f64, r: f64 },
    SetDelay(DelayParams),
    SetAdsr(AdsrParams),
    LoadSample { group: ZoneGroup, path: PathBuf },
    SetThreshold { value: f32 },
}

impl ControlMessage {
    pub fn name(&self) -> &'static str {
        match self {
            ControlMessage::ToggleMidi => "toggle_midi",
            ControlMessage::Mute { .. } => "mute",
            ControlMessage::SetVolume { .. } => "set_volume",
            ControlMessage::SetDelay(_) => "set_delay",
            ControlMessage::SetAdsr(_) => "set_adsr",
            ControlMessage::LoadSample { .. } => "load_sample",
            ControlMessage::SetThreshold { .. } => "set_threshold",
        }
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        let check = |r: Result<(), String>| r.map_err(SessionError::Validation);
        match self {
            ControlMessage::ToggleMidi | ControlMessage::Mute { .. } | ControlMessage::LoadSample { .. } => Ok(()),
            ControlMessage::SetVolume { channel, l, r } => {
                if !(1..=STRIPS as u8).contains(channel) {
                    return Err(SessionError::Validation(format!("channel {channel} not in 1..={STRIPS}")));
                }
                check(StripConfig { pan: 0.0, vol_l: *l, vol_r: *r }.validate())
            }
            ControlMessage::SetDelay(p) => check(p.validate()),
            ControlMessage::SetAdsr(p) => check(p.validate()),
            ControlMessage::SetThreshold { value } => {
                if value.is_finite() && *value >= 0.0 {
                    Ok(())
                } else {
                    Err(SessionError::Validation(format!("threshold {value} must be finite and >= 0")))
                }
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Incoming {
    v: u32,
    #[serde(flatten)]
    msg: ControlMessage,
}

/// Parses and validates one client message.
pub fn parse_control(text: &str) -> Result<ControlMessage, SessionError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| SessionError::Validation(format!("not JSON: {e}")))?;
    match value.get("v").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(PROTOCOL_VERSION) => {}
        Some(v) => return Err(SessionError::Validation(format!("unsupported protocol version {v}"))),
        None => return Err(SessionError::Validation("missing protocol version `v`".into())),
    }
    let inc: Incoming = serde_json::from_value(value).map_err(|e| SessionError::Validation(e.to_string()))?;
    inc.msg.validate()?;
    Ok(inc.msg)
}

pub fn encode_control(msg: &ControlMessage) -> String {
    serde_json::to_string(&Incoming { v: PROTOCOL_VERSION, msg: msg.clone() }).expect("control serializes")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Status {
    pub midi_enabled: bool,
    pub muted: bool,
    /// Achieved vision frame rate.
    pub fps: f64,
    /// `[l, r]` per channel 1..=7.
    pub volumes: [[f64; 2]; STRIPS],
    pub delay: DelayParams,
    pub adsr: AdsrParams,
    /// Source of the loaded sample per group (brow, eye, cheek, mouth).
    pub samples: [String; 4],
    pub threshold: f32,
}

/// Server-to-client messages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Frame {
        frame_no: u64,
        width: usize,
        height: usize,
        /// Raw 8-bit gray pixels, row-major, base64.
        gray: String,
        overlay: OverlayFrame,
        status: Status,
    },
    Status(Status),
    Ack { control: String },
    Error { message: String },
}

#[derive(Serialize, Deserialize)]
struct Outgoing {
    v: u32,
    #[serde(flatten)]
    msg: ServerMessage,
}

impl ServerMessage {
    pub fn frame(frame: &GrayFrame, overlay: OverlayFrame, status: Status) -> Self {
        ServerMessage::Frame {
            frame_no: frame.frame_no(),
            width: frame.width(),
            height: frame.height(),
            gray: base64::engine::general_purpose::STANDARD.encode(frame.pixels()),
            overlay,
            status,
        }
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string(&Outgoing { v: PROTOCOL_VERSION, msg: self.clone() }).expect("message serializes")
    }

    pub fn from_text(text: &str) -> Result<Self, SessionError> {
        let o: Outgoing = serde_json::from_str(text).map_err(|e| SessionError::Validation(e.to_string()))?;
        Ok(o.msg)
    }
}

/// Decodes the pixel payload of a frame message.
pub fn decode_gray(b64: &str) -> Result<Vec<u8>, SessionError> {
    base64::engine::general_purpose::STANDARD.decode(b64).map_err(|e| SessionError::Validation(e.to_string()))
}
