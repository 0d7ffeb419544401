#![allow(dead_code)]

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sofa_core::frame_io::{write_pgm, GrayFrame};
use sofa_core::Rect;

/// Face rectangle used with the crafted mouth sequence.
pub const MOUTH_ROI: Rect = Rect { x: 40, y: 0, w: 240, h: 240 };

/// Textured patch: grid columns 15..20 and rows 23..25 (pixels x 120..160,
/// y 184..200), inside the mouth zone of [`MOUTH_ROI`].
pub const PATCH: (usize, usize, usize, usize) = (120, 184, 40, 16);
pub const SHIFT_FRAME: u64 = 10;
pub const SEQUENCE_LEN: u64 = 30;
const BACKGROUND: u8 = 128;

/// 30 frames of flat grey with one noise patch that jumps 2 px right at
/// frame 10 and then stays put.
pub fn mouth_shift_frames() -> Vec<GrayFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (px, py, pw, ph) = PATCH;
    let texture: Vec<u8> = (0..pw * ph).map(|_| rng.gen()).collect();
    (0..SEQUENCE_LEN)
        .map(|no| {
            let ox = if no >= SHIFT_FRAME { px + 2 } else { px };
            GrayFrame::from_fn(320, 240, no, |x, y| {
                if (ox..ox + pw).contains(&x) && (py..py + ph).contains(&y) {
                    texture[(y - py) * pw + (x - ox)]
                } else {
                    BACKGROUND
                }
            })
        })
        .collect()
}

pub fn write_frames(dir: &Path, frames: &[GrayFrame]) {
    for f in frames {
        write_pgm(&dir.join(format!("frame_{:04}.pgm", f.frame_no())), f).unwrap();
    }
}

pub fn noise_frame(rng: &mut impl Rng, frame_no: u64) -> GrayFrame {
    GrayFrame::from_fn(320, 240, frame_no, |_, _| rng.gen())
}

/// Smooth-ish random texture: a sum of a few random gradients plus noise.
pub fn textured_frame(rng: &mut impl Rng, w: usize, h: usize, frame_no: u64) -> GrayFrame {
    let (a, b, c): (f64, f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.02..0.2));
    let noise: Vec<u8> = (0..w * h).map(|_| rng.gen_range(0..64)).collect();
    GrayFrame::from_fn(w, h, frame_no, |x, y| {
        let v = 96.0 + 40.0 * (a * x as f64 * c).sin() + 40.0 * (b * y as f64 * c).cos() + f64::from(noise[y * w + x]);
        v.clamp(0.0, 255.0) as u8
    })
}
