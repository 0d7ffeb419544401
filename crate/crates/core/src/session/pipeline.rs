use crate::event_engine::{step, EngineState, EventConfig, MidiEvent, OverlayFrame};
use crate::face_detect::{FaceDetector, FaceRoi};
use crate::frame_io::GrayFrame;
use crate::optic_flow::{compute_flow, smooth, FlowField};
use crate::zone_map::{compute_zones, ZoneConfig, ZoneLayout};

use super::SessionConfig;

/// Result of pushing one frame through the vision stage.
#[derive(Clone, Debug)]
pub struct FrameOutput {
    pub frame_no: u64,
    pub roi: Option<FaceRoi>,
    pub layout: Option<ZoneLayout>,
    pub field: FlowField,
    pub events: Vec<MidiEvent>,
    pub overlay: OverlayFrame,
}

/// Flow, smoothing, face detection, zoning and event generation for a
/// stream of consecutive frames.
pub struct VisionPipeline {
    flow: crate::optic_flow::FlowParams,
    zones: ZoneConfig,
    events: EventConfig,
    detector: Box<dyn FaceDetector>,
    state: EngineState,
    prev: Option<GrayFrame>,
}

impl VisionPipeline {
    pub fn new(cfg: &SessionConfig) -> crate::Result<Self> {
        Ok(Self::with_detector(cfg, cfg.detector.build()?))
    }

    pub fn with_detector(cfg: &SessionConfig, detector: Box<dyn FaceDetector>) -> Self {
        Self {
            flow: cfg.flow,
            zones: cfg.zones.clone(),
            events: cfg.events.clone(),
            detector,
            state: EngineState::new(),
            prev: None,
        }
    }

    pub fn event_config(&self) -> &EventConfig {
        &self.events
    }

    pub fn midi_enabled(&self) -> bool {
        self.events.midi_enabled
    }

    /// Facial input on/off. Pending note-offs are still delivered while off.
    pub fn set_midi_enabled(&mut self, on: bool) {
        self.events.midi_enabled = on;
    }

    pub fn set_threshold(&mut self, value: f32) {
        self.events.threshold = value;
    }

    /// The first frame has no predecessor and yields a zero field.
    pub fn process(&mut self, frame: GrayFrame) -> crate::Result<FrameOutput> {
        let frame_no = frame.frame_no();
        let field = match &self.prev {
            Some(prev) => smooth(&compute_flow(prev, &frame, &self.flow)?),
            None => {
                self.flow.check_frame(frame.width(), frame.height())?;
                FlowField::zeros(self.flow, frame_no)
            }
        };
        let roi = self.detector.detect(&frame)?;
        let layout = roi.as_ref().map(|r| compute_zones(r, &self.zones));
        let out = step(&field, layout.as_ref(), &mut self.state, &self.events);
        self.prev = Some(frame);
        Ok(FrameOutput { frame_no, roi, layout, field, events: out.events, overlay: out.overlay })
    }

    pub fn last_frame(&self) -> Option<&GrayFrame> {
        self.prev.as_ref()
    }

    /// Outstanding note-offs, for the end of a stream.
    pub fn flush(&mut self) -> Vec<MidiEvent> {
        self.state.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::face_detect::StaticDetector;
    use crate::geometry::Rect;

    #[test]
    fn static_scene_makes_no_events() {
        let cfg = SessionConfig::default();
        let mut p = VisionPipeline::with_detector(&cfg, Box::new(StaticDetector::Fixed(Rect::new(60, 20, 200, 200))));
        for no in 0..10 {
            let out = p.process(GrayFrame::from_fn(320, 240, no, |x, y| ((x * 7 + y * 13) % 251) as u8)).unwrap();
            assert!(out.events.is_empty());
            assert!(out.roi.is_some());
        }
        assert!(p.flush().is_empty());
    }

    #[test]
    fn wrong_frame_size_is_an_error() {
        let cfg = SessionConfig::default();
        let mut p = VisionPipeline::with_detector(&cfg, Box::new(StaticDetector::Fixed(Rect::new(0, 0, 10, 10))));
        assert!(p.process(GrayFrame::filled(100, 100, 0, 0)).is_err());
    }
}
