//! Throughput harness for the vision stage.

use std::time::{Duration, Instant};

use super::{SessionConfig, VisionPipeline};
use crate::frame_io::{parse_pgm, GrayFrame};

/// A 320x240 portrait used to give the detector a real face to chew on.
pub const SAMPLE_FACE_PGM: &[u8] = include_bytes!("../../assets/frames/face_320x240.pgm");

pub fn sample_face() -> GrayFrame {
    parse_pgm(SAMPLE_FACE_PGM).expect("bundled portrait is a valid PGM")
}

/// `n` frames of the portrait drifting a few pixels around, numbered from 0.
pub fn drifting_face_frames(n: usize) -> Vec<GrayFrame> {
    let base = sample_face();
    let (w, h) = (base.width(), base.height());
    (0..n)
        .map(|i| {
            let t = i as f64;
            let ox = (3.0 * (t / 5.0).sin()).round() as isize;
            let oy = (2.0 * (t / 7.0).cos()).round() as isize;
            GrayFrame::from_fn(w, h, i as u64, |x, y| {
                let sx = (x as isize - ox).clamp(0, w as isize - 1) as usize;
                let sy = (y as isize - oy).clamp(0, h as isize - 1) as usize;
                base.get(sx, sy)
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub frames: usize,
    pub total: Duration,
    pub faces: usize,
    pub note_ons: usize,
}

impl BenchReport {
    pub fn ms_per_frame(&self) -> f64 {
        self.total.as_secs_f64() * 1000.0 / self.frames.max(1) as f64
    }
}

/// Times flow, smoothing, detection, zoning and event generation over `frames`.
pub fn bench_vision(cfg: &SessionConfig, frames: Vec<GrayFrame>) -> crate::Result<BenchReport> {
    let mut pipeline = VisionPipeline::new(cfg)?;
    let n = frames.len();
    let mut faces = 0;
    let mut note_ons = 0;
    let start = Instant::now();
    for f in frames {
        let out = pipeline.process(f)?;
        faces += usize::from(out.roi.is_some());
        note_ons += out.events.iter().filter(|e| e.is_on()).count();
    }
    Ok(BenchReport { frames: n, total: start.elapsed(), faces, note_ons })
}
