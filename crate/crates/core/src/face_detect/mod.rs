//! Face localisation: integral images, attentional-cascade evaluation, a
//! multi-scale window scanner, and a fixed/sidecar detector for headless
//! and deterministic runs.

mod cascade;
mod fixed;
mod haar_xml;
mod integral;
mod scan;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame_io::GrayFrame;
use crate::geometry::Rect;

pub use cascade::{eval_window, Cascade, ScaledCascade, Stage, WeakClassifier, WeightedRect, WindowSize};
pub use fixed::StaticDetector;
pub use haar_xml::import_haar_xml;
pub use integral::IntegralImage;
pub use scan::{detect, group_windows, CascadeDetector, ScanParams};

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("rectangle {rect:?} exceeds {width}x{height} image")]
    OutOfBounds { rect: Rect, width: usize, height: usize },
    #[error("sidecar exhausted at frame {frame_no} ({len} entries)")]
    SidecarExhausted { frame_no: u64, len: usize },
    #[error("invalid cascade: {0}")]
    InvalidCascade(String),
    #[error("cascade format error: {0}")]
    Format(String),
    #[error("invalid scan parameters: {0}")]
    InvalidParams(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Detected face rectangle for one frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaceRoi {
    pub rect: Rect,
    pub frame_no: u64,
}

impl FaceRoi {
    pub fn new(rect: Rect, frame_no: u64) -> Self {
        Self { rect, frame_no }
    }

    pub fn width(&self) -> u32 {
        self.rect.w
    }
}

/// The frontal-face cascade shipped with the crate (OpenCV XML format).
pub const BUNDLED_CASCADE_XML: &str = include_str!("../../assets/cascades/haarcascade_frontalface_default.xml");

/// Parses [`BUNDLED_CASCADE_XML`].
pub fn bundled_cascade() -> Result<Cascade, DetectError> {
    import_haar_xml(BUNDLED_CASCADE_XML)
}

pub trait FaceDetector: Send {
    fn detect(&mut self, frame: &GrayFrame) -> Result<Option<FaceRoi>, DetectError>;
}
