use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DetectError, IntegralImage};
use crate::geometry::Rect;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSize {
    pub width: u32,
    pub height: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    pub weight: f64,
}

impl WeightedRect {
    fn area(&self) -> f64 {
        f64::from(self.w) * f64::from(self.h)
    }
}

/// Decision stump over a rectangle feature: contributes `pass` when the
/// normalized feature value is at least `node_threshold`, `fail` otherwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakClassifier {
    pub rects: Vec<WeightedRect>,
    pub node_threshold: f64,
    pub pass: f64,
    pub fail: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub threshold: f64,
    pub weak: Vec<WeakClassifier>,
}

/// Attentional cascade in the native JSON layout.
///
/// `norm_inset` shrinks the rectangle used for mean/variance normalization by
/// that many base-window pixels on each side (imported OpenCV cascades use 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cascade {
    pub base_window: WindowSize,
    #[serde(default)]
    pub norm_inset: u32,
    pub stages: Vec<Stage>,
}

impl Cascade {
    pub fn validate(&self) -> Result<(), DetectError> {
        let invalid = |m: String| Err(DetectError::InvalidCascade(m));
        let WindowSize { width, height } = self.base_window;
        if width == 0 || height == 0 {
            return invalid("base window must be non-empty".into());
        }
        if 2 * self.norm_inset >= width.min(height) {
            return invalid(format!("norm_inset {} too large for base window", self.norm_inset));
        }
        if self.stages.is_empty() {
            return invalid("cascade has no stages".into());
        }
        for (si, stage) in self.stages.iter().enumerate() {
            if stage.weak.is_empty() {
                return invalid(format!("stage {si} has no weak classifiers"));
            }
            for (wi, weak) in stage.weak.iter().enumerate() {
                if weak.rects.is_empty() || weak.rects.len() > 3 {
                    return invalid(format!("stage {si} classifier {wi}: {} rects (need 1..=3)", weak.rects.len()));
                }
                for r in &weak.rects {
                    if r.x + r.w > width || r.y + r.h > height {
                        return invalid(format!("stage {si} classifier {wi}: rect {r:?} outside base window"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn weak_count(&self) -> usize {
        self.stages.iter().map(|s| s.weak.len()).sum()
    }

    pub fn from_json(text: &str) -> Result<Self, DetectError> {
        let c: Cascade = serde_json::from_str(text).map_err(|e| DetectError::Format(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("cascade serializes")
    }

    /// Loads a native JSON cascade, or imports an OpenCV-style XML cascade
    /// when the file extension is `.xml`.
    pub fn load(path: &Path) -> Result<Self, DetectError> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("xml")) {
            super::import_haar_xml(&text)
        } else {
            Self::from_json(&text)
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), DetectError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct ScaledRect {
    x: usize,
    y: usize,
    w: usize,
    h: usize,
    weight: f64,
}

#[derive(Clone, Debug)]
struct ScaledWeak {
    rects: Vec<ScaledRect>,
    node_threshold: f64,
    pass: f64,
    fail: f64,
}

/// A cascade with every feature rectangle resolved for one window size.
#[derive(Clone, Debug)]
pub struct ScaledCascade {
    window: WindowSize,
    norm: (usize, usize, usize, usize),
    stages: Vec<(f64, Vec<ScaledWeak>)>,
}

fn scale_px(v: u32, s: f64) -> usize {
    (f64::from(v) * s).round() as usize
}

impl ScaledCascade {
    pub fn new(cascade: &Cascade, window: WindowSize) -> Self {
        let sx = f64::from(window.width) / f64::from(cascade.base_window.width);
        let sy = f64::from(window.height) / f64::from(cascade.base_window.height);
        let (ww, wh) = (window.width as usize, window.height as usize);
        let inset_x = scale_px(cascade.norm_inset, sx);
        let inset_y = scale_px(cascade.norm_inset, sy);
        let norm = (inset_x, inset_y, ww - 2 * inset_x, wh - 2 * inset_y);

        let stages = cascade
            .stages
            .iter()
            .map(|stage| {
                let weak = stage
                    .weak
                    .iter()
                    .map(|wc| {
                        let mut rects: Vec<ScaledRect> = wc
                            .rects
                            .iter()
                            .map(|r| {
                                let x = scale_px(r.x, sx).min(ww);
                                let y = scale_px(r.y, sy).min(wh);
                                let w = scale_px(r.w, sx).min(ww - x);
                                let h = scale_px(r.h, sy).min(wh - y);
                                ScaledRect { x, y, w, h, weight: r.weight }
                            })
                            .collect();
                        // Rounding can break the zero-sum balance of a feature;
                        // restore it by re-deriving the first rectangle's weight.
                        let base_balance: f64 = wc.rects.iter().map(|r| r.weight * r.area()).sum();
                        let first_area = rects[0].w * rects[0].h;
                        if rects.len() > 1 && base_balance.abs() < 1e-9 && first_area > 0 {
                            let others: f64 = rects[1..].iter().map(|r| r.weight * (r.w * r.h) as f64).sum();
                            rects[0].weight = -others / first_area as f64;
                        }
                        ScaledWeak { rects, node_threshold: wc.node_threshold, pass: wc.pass, fail: wc.fail }
                    })
                    .collect();
                (stage.threshold, weak)
            })
            .collect();
        Self { window, norm, stages }
    }

    pub fn window(&self) -> WindowSize {
        self.window
    }

    /// Runs the cascade on the window whose top-left corner is `(x, y)`.
    /// The caller guarantees the window lies inside the image.
    pub fn eval_at(&self, ii: &IntegralImage, x: usize, y: usize) -> bool {
        let (nx, ny, nw, nh) = self.norm;
        let area = (nw * nh) as f64;
        let sum = ii.rect_sum_unchecked(x + nx, y + ny, nw, nh) as f64;
        let sq = ii.rect_sq_sum_unchecked(x + nx, y + ny, nw, nh) as f64;
        let mean = sum / area;
        let var = sq / area - mean * mean;
        let std = var.max(0.0).sqrt().max(1.0);
        let inv_norm = 1.0 / (area * std);

        for (threshold, weak) in &self.stages {
            let mut total = 0.0;
            for wc in weak {
                let raw: f64 = wc
                    .rects
                    .iter()
                    .map(|r| r.weight * ii.rect_sum_unchecked(x + r.x, y + r.y, r.w, r.h) as f64)
                    .sum();
                total += if raw * inv_norm >= wc.node_threshold { wc.pass } else { wc.fail };
            }
            if total < *threshold {
                return false;
            }
        }
        true
    }
}

/// Evaluates `cascade` on `window`, scaling features from the base window.
pub fn eval_window(ii: &IntegralImage, cascade: &Cascade, window: &Rect) -> Result<bool, DetectError> {
    if !window.fits_in(ii.width(), ii.height()) || window.is_empty() {
        return Err(DetectError::OutOfBounds { rect: *window, width: ii.width(), height: ii.height() });
    }
    let scaled = ScaledCascade::new(cascade, WindowSize { width: window.w, height: window.h });
    Ok(scaled.eval_at(ii, window.x as usize, window.y as usize))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::frame_io::GrayFrame;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn single_rect_cascade(stage_threshold: f64) -> Cascade {
        Cascade {
            base_window: WindowSize { width: 24, height: 24 },
            norm_inset: 0,
            stages: vec![Stage {
                threshold: stage_threshold,
                weak: vec![WeakClassifier {
                    rects: vec![WeightedRect { x: 0, y: 0, w: 24, h: 24, weight: 1.0 }],
                    node_threshold: -1e300,
                    pass: 1.0,
                    fail: 0.0,
                }],
            }],
        }
    }

    fn random_frame(seed: u64) -> GrayFrame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GrayFrame::from_fn(120, 100, 0, |_, _| rng.gen())
    }

    #[test]
    fn always_pass_and_always_fail() {
        let ii = IntegralImage::new(&random_frame(1));
        let pass = single_rect_cascade(0.5);
        let fail = single_rect_cascade(1.5);
        for w in [Rect::new(0, 0, 24, 24), Rect::new(10, 20, 48, 48), Rect::new(50, 40, 30, 30)] {
            assert!(eval_window(&ii, &pass, &w).unwrap());
            assert!(!eval_window(&ii, &fail, &w).unwrap());
        }
    }

    #[test]
    fn window_outside_image_is_error() {
        let ii = IntegralImage::new(&random_frame(1));
        assert!(eval_window(&ii, &single_rect_cascade(0.5), &Rect::new(100, 90, 24, 24)).is_err());
    }

    #[test]
    fn validation_catches_bad_rects() {
        let mut c = single_rect_cascade(0.5);
        c.stages[0].weak[0].rects[0].w = 25;
        assert!(c.validate().is_err());
        let mut c = single_rect_cascade(0.5);
        c.stages.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn json_roundtrip() {
        let c = single_rect_cascade(0.5);
        assert_eq!(Cascade::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn zero_sum_feature_is_invariant_to_brightness_offset() {
        // left half -1, right half +1: balanced, so a constant offset cancels
        let cascade = Cascade {
            base_window: WindowSize { width: 24, height: 24 },
            norm_inset: 0,
            stages: vec![Stage {
                threshold: 0.5,
                weak: vec![WeakClassifier {
                    rects: vec![
                        WeightedRect { x: 0, y: 0, w: 24, h: 24, weight: -1.0 },
                        WeightedRect { x: 12, y: 0, w: 12, h: 24, weight: 2.0 },
                    ],
                    node_threshold: 0.01,
                    pass: 1.0,
                    fail: 0.0,
                }],
            }],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = GrayFrame::from_fn(96, 96, 0, |_, _| rng.gen_range(0..200));
        let shifted = GrayFrame::from_fn(96, 96, 0, |x, y| base.get(x, y) + 55);
        let (a, b) = (IntegralImage::new(&base), IntegralImage::new(&shifted));
        let mut accepted = 0;
        for _ in 0..200 {
            let s = rng.gen_range(1..=3u32) * 24;
            let x = rng.gen_range(0..=96 - s);
            let y = rng.gen_range(0..=96 - s);
            let w = Rect::new(x, y, s, s);
            let da = eval_window(&a, &cascade, &w).unwrap();
            assert_eq!(da, eval_window(&b, &cascade, &w).unwrap());
            accepted += da as usize;
        }
        assert!(accepted > 0 && accepted < 200, "test cascade should split windows, accepted {accepted}");
    }
}
