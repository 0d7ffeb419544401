use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DetectError, FaceDetector, FaceRoi};
use crate::frame_io::GrayFrame;
use crate::geometry::Rect;

/// Pixel-independent detector: a fixed rectangle, or one entry per frame
/// from a sidecar list (`null` entries mean "no face").
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StaticDetector {
    Fixed(Rect),
    Sidecar(Vec<Option<Rect>>),
}

impl StaticDetector {
    /// Sidecar file: JSON array of `{"x","y","w","h"}` objects or `null`.
    pub fn load_sidecar(path: &Path) -> Result<Self, DetectError> {
        let text = std::fs::read_to_string(path)?;
        let list: Vec<Option<Rect>> = serde_json::from_str(&text).map_err(|e| DetectError::Format(e.to_string()))?;
        Ok(StaticDetector::Sidecar(list))
    }

    pub fn rect_for(&self, frame_no: u64) -> Result<Option<Rect>, DetectError> {
        match self {
            StaticDetector::Fixed(r) => Ok(Some(*r)),
            StaticDetector::Sidecar(list) => list
                .get(frame_no as usize)
                .copied()
                .ok_or(DetectError::SidecarExhausted { frame_no, len: list.len() }),
        }
    }
}

impl FaceDetector for StaticDetector {
    fn detect(&mut self, frame: &GrayFrame) -> Result<Option<FaceRoi>, DetectError> {
        let Some(rect) = self.rect_for(frame.frame_no())? else {
            return Ok(None);
        };
        if !rect.fits_in(frame.width(), frame.height()) {
            return Err(DetectError::OutOfBounds { rect, width: frame.width(), height: frame.height() });
        }
        Ok(Some(FaceRoi::new(rect, frame.frame_no())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(no: u64) -> GrayFrame {
        GrayFrame::filled(320, 240, 0, no)
    }

    #[test]
    fn fixed_rect_every_frame() {
        let r = Rect::new(100, 50, 120, 160);
        let mut d = StaticDetector::Fixed(r);
        for no in 0..5 {
            assert_eq!(d.detect(&frame(no)).unwrap(), Some(FaceRoi::new(r, no)));
        }
    }

    #[test]
    fn sidecar_in_order_then_exhausted() {
        let rects = [Rect::new(0, 0, 90, 90), Rect::new(10, 0, 90, 90), Rect::new(20, 0, 90, 90)];
        let mut d = StaticDetector::Sidecar(rects.iter().copied().map(Some).collect());
        for (no, r) in rects.iter().enumerate() {
            assert_eq!(d.detect(&frame(no as u64)).unwrap().unwrap().rect, *r);
        }
        let mut short = StaticDetector::Sidecar(rects[..2].iter().copied().map(Some).collect());
        short.detect(&frame(0)).unwrap();
        short.detect(&frame(1)).unwrap();
        assert!(matches!(short.detect(&frame(2)), Err(DetectError::SidecarExhausted { frame_no: 2, len: 2 })));
    }

    #[test]
    fn sidecar_null_means_no_face() {
        let mut d = StaticDetector::Sidecar(vec![None]);
        assert_eq!(d.detect(&frame(0)).unwrap(), None);
    }

    #[test]
    fn rect_outside_frame_is_rejected() {
        let mut d = StaticDetector::Fixed(Rect::new(300, 0, 40, 40));
        assert!(d.detect(&frame(0)).is_err());
    }
}
