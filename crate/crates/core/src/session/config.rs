use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SessionError;
use crate::event_engine::EventConfig;
use crate::face_detect::{bundled_cascade, Cascade, CascadeDetector, FaceDetector, ScanParams, StaticDetector};
use crate::frame_io::{SourceKind, SourceSpec, FRAME_HEIGHT, FRAME_WIDTH};
use crate::geometry::Rect;
use crate::optic_flow::FlowParams;
use crate::synth::SynthConfig;
use crate::zone_map::ZoneConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectorConfig {
    /// Cascade scan; `path` is a native JSON or OpenCV XML cascade, the
    /// bundled frontal-face cascade when absent.
    Cascade {
        #[serde(default)]
        path: Option<PathBuf>,
        #[serde(default)]
        scan: ScanParams,
    },
    /// A fixed rectangle, or a per-frame sidecar JSON list.
    Static {
        #[serde(default)]
        rect: Option<Rect>,
        #[serde(default)]
        sidecar: Option<PathBuf>,
    },
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig::Cascade { path: None, scan: ScanParams::default() }
    }
}

impl DetectorConfig {
    pub fn build(&self) -> crate::Result<Box<dyn FaceDetector>> {
        Ok(match self {
            DetectorConfig::Cascade { path, scan } => {
                let cascade = match path {
                    Some(p) => Cascade::load(p)?,
                    None => bundled_cascade()?,
                };
                Box::new(CascadeDetector::new(cascade, *scan)?)
            }
            DetectorConfig::Static { rect: Some(r), sidecar: None } => Box::new(StaticDetector::Fixed(*r)),
            DetectorConfig::Static { rect: None, sidecar: Some(p) } => Box::new(StaticDetector::load_sidecar(p)?),
            DetectorConfig::Static { .. } => {
                return Err(SessionError::Config("static detector needs exactly one of `rect` or `sidecar`".into()).into())
            }
        })
    }
}

/// `smf:<path>` or `port:<name>`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MidiOut {
    Smf(PathBuf),
    Port(String),
}

/// `wav:<path>`, `pipe:<command>` (s16le stereo on stdin) or `null`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AudioOut {
    Wav(PathBuf),
    Pipe(String),
    Null,
}

impl FromStr for MidiOut {
    type Err = SessionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some(("smf", p)) if !p.is_empty() => Ok(MidiOut::Smf(p.into())),
            Some(("port", n)) if !n.is_empty() => Ok(MidiOut::Port(n.into())),
            _ => Err(SessionError::Config(format!("MIDI output `{s}`: expected smf:<path> or port:<name>"))),
        }
    }
}

impl fmt::Display for MidiOut {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MidiOut::Smf(p) => write!(f, "smf:{}", p.display()),
            MidiOut::Port(n) => write!(f, "port:{n}"),
        }
    }
}

impl FromStr for AudioOut {
    type Err = SessionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            _ if s == "null" => Ok(AudioOut::Null),
            Some(("wav", p)) if !p.is_empty() => Ok(AudioOut::Wav(p.into())),
            Some(("pipe", c)) if !c.trim().is_empty() => Ok(AudioOut::Pipe(c.into())),
            _ => Err(SessionError::Config(format!("audio output `{s}`: expected wav:<path>, pipe:<command> or null"))),
        }
    }
}

impl fmt::Display for AudioOut {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AudioOut::Wav(p) => write!(f, "wav:{}", p.display()),
            AudioOut::Pipe(c) => write!(f, "pipe:{c}"),
            AudioOut::Null => f.write_str("null"),
        }
    }
}

macro_rules! string_conversions {
    ($t:ty) => {
        impl TryFrom<String> for $t {
            type Error = SessionError;
            fn try_from(s: String) -> Result<Self, SessionError> {
                s.parse()
            }
        }
        impl From<$t> for String {
            fn from(v: $t) -> String {
                v.to_string()
            }
        }
    };
}
string_conversions!(MidiOut);
string_conversions!(AudioOut);

/// Everything a run needs. Every field has a default, so `{}` is a valid
/// config (camera 0, bundled cascade, no outputs).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub source: SourceSpec,
    pub detector: DetectorConfig,
    pub flow: FlowParams,
    pub zones: ZoneConfig,
    pub events: EventConfig,
    pub synth: SynthConfig,
    pub midi_out: Option<MidiOut>,
    pub audio_out: Option<AudioOut>,
    pub serve_port: Option<u16>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            source: SourceSpec::new(SourceKind::Camera(0)),
            detector: DetectorConfig::default(),
            flow: FlowParams::default(),
            zones: ZoneConfig::default(),
            events: EventConfig::default(),
            synth: SynthConfig::default(),
            midi_out: None,
            audio_out: None,
            serve_port: None,
        }
    }
}

impl SessionConfig {
    pub fn load(path: &Path) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SessionError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> crate::Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| SessionError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn fps(&self) -> f64 {
        self.source.target_fps
    }

    pub fn validate(&self) -> crate::Result<()> {
        self.source.validate()?;
        self.flow.validate()?;
        if (self.flow.frame_width(), self.flow.frame_height()) != (FRAME_WIDTH, FRAME_HEIGHT) {
            return Err(SessionError::Config(format!(
                "flow grid covers {}x{} but frames are {FRAME_WIDTH}x{FRAME_HEIGHT}",
                self.flow.frame_width(),
                self.flow.frame_height()
            ))
            .into());
        }
        self.zones.validate().map_err(SessionError::Config)?;
        self.events.validate()?;
        self.synth.validate()?;
        if let DetectorConfig::Cascade { scan, .. } = &self.detector {
            scan.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_default() {
        let c = SessionConfig::from_json("{}").unwrap();
        assert_eq!(c, SessionConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn round_trips_through_json() {
        let c = SessionConfig {
            source: SourceSpec::new(SourceKind::PgmDir("frames".into())),
            detector: DetectorConfig::Static { rect: Some(Rect::new(1, 2, 3, 4)), sidecar: None },
            midi_out: Some("smf:out.mid".parse().unwrap()),
            audio_out: Some("wav:out.wav".parse().unwrap()),
            serve_port: Some(8765),
            ..Default::default()
        };
        assert_eq!(SessionConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let c = SessionConfig::from_json(
            r#"{"source": {"kind": {"pgm_dir": "x"}}, "events": {"top_k": 4}, "midi_out": "smf:a.mid",
                "detector": {"kind": "static", "rect": {"x": 0, "y": 0, "w": 100, "h": 100}}}"#,
        )
        .unwrap();
        assert_eq!(c.events.top_k, 4);
        assert_eq!(c.events.note_off_frames, 4);
        assert_eq!(c.flow, FlowParams::default());
        assert_eq!(c.midi_out, Some(MidiOut::Smf("a.mid".into())));
    }

    #[test]
    fn grid_must_match_frames() {
        let mut c = SessionConfig::default();
        c.flow.grid_cols = 39;
        assert!(c.validate().is_err());
    }

    #[test]
    fn output_specs() {
        assert_eq!("port:midiC1D0".parse::<MidiOut>().unwrap(), MidiOut::Port("midiC1D0".into()));
        assert!("file:x".parse::<MidiOut>().is_err());
        assert!("smf:".parse::<MidiOut>().is_err());
        assert_eq!("null".parse::<AudioOut>().unwrap(), AudioOut::Null);
        assert_eq!("pipe:aplay -q".parse::<AudioOut>().unwrap(), AudioOut::Pipe("aplay -q".into()));
        assert!(SessionConfig::from_json(r#"{"audio_out": "mp3:x"}"#).is_err());
    }

    #[test]
    fn static_detector_needs_one_source() {
        assert!(DetectorConfig::Static { rect: None, sidecar: None }.build().is_err());
    }
}
