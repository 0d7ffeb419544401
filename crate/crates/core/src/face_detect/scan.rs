use serde::{Deserialize, Serialize};

use super::cascade::{Cascade, ScaledCascade, WindowSize};
use super::{DetectError, FaceDetector, FaceRoi, IntegralImage};
use crate::frame_io::GrayFrame;
use crate::geometry::Rect;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanParams {
    pub scale_factor: f64,
    pub min_face_width: u32,
    /// Window stride as a fraction of the window width (at least one pixel).
    pub shift_step: f64,
    pub min_neighbors: usize,
    /// Two accepted windows join the same cluster at or above this overlap.
    pub group_iou: f64,
}

impl Default for ScanParams {
    fn default() -> Self {
        Self { scale_factor: 1.25, min_face_width: 80, shift_step: 0.05, min_neighbors: 3, group_iou: 0.3 }
    }
}

impl ScanParams {
    pub fn validate(&self) -> Result<(), DetectError> {
        if self.scale_factor.is_nan() || self.scale_factor <= 1.0 {
            return Err(DetectError::InvalidParams(format!("scale_factor must be > 1, got {}", self.scale_factor)));
        }
        if self.min_face_width == 0 {
            return Err(DetectError::InvalidParams("min_face_width must be > 0".into()));
        }
        if self.shift_step.is_nan() || self.shift_step <= 0.0 {
            return Err(DetectError::InvalidParams("shift_step must be > 0".into()));
        }
        Ok(())
    }

    /// Window sizes scanned on a `width` x `height` image, smallest first.
    pub fn window_sizes(&self, base: WindowSize, width: usize, height: usize) -> Vec<WindowSize> {
        let mut out = Vec::new();
        let mut scale = f64::from(self.min_face_width) / f64::from(base.width);
        loop {
            let w = (f64::from(base.width) * scale).round() as u32;
            let h = (f64::from(base.height) * scale).round() as u32;
            if w as usize > width || h as usize > height {
                break;
            }
            if out.last() != Some(&WindowSize { width: w, height: h }) {
                out.push(WindowSize { width: w, height: h });
            }
            scale *= self.scale_factor;
        }
        out
    }

    fn stride(&self, window: WindowSize) -> usize {
        ((self.shift_step * f64::from(window.width)).round() as usize).max(1)
    }
}

/// Clusters windows whose IoU reaches `iou` (transitively) and returns the
/// member-average rectangle of each cluster holding at least `min_neighbors`
/// windows, in order of each cluster's first member.
pub fn group_windows(windows: &[Rect], iou: f64, min_neighbors: usize) -> Vec<(Rect, usize)> {
    let n = windows.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if windows[i].iou(&windows[j]) >= iou {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut sums: Vec<(u64, u64, u64, u64, usize)> = vec![(0, 0, 0, 0, 0); n];
    for (i, r) in windows.iter().enumerate() {
        let root = find(&mut parent, i);
        let s = &mut sums[root];
        s.0 += u64::from(r.x);
        s.1 += u64::from(r.y);
        s.2 += u64::from(r.w);
        s.3 += u64::from(r.h);
        s.4 += 1;
    }
    sums.into_iter()
        .filter(|s| s.4 > 0 && s.4 >= min_neighbors)
        .map(|(x, y, w, h, k)| {
            let avg = |v: u64| ((v as f64) / k as f64).round() as u32;
            (Rect::new(avg(x), avg(y), avg(w), avg(h)), k)
        })
        .collect()
}

fn scan(ii: &IntegralImage, scaled: &[ScaledCascade], params: &ScanParams) -> Vec<Rect> {
    let mut hits = Vec::new();
    for sc in scaled {
        let win = sc.window();
        let (ww, wh) = (win.width as usize, win.height as usize);
        let step = params.stride(win);
        let mut y = 0;
        while y + wh <= ii.height() {
            let mut x = 0;
            while x + ww <= ii.width() {
                if sc.eval_at(ii, x, y) {
                    hits.push(Rect::new(x as u32, y as u32, win.width, win.height));
                }
                x += step;
            }
            y += step;
        }
    }
    hits
}

fn pick_largest(clusters: Vec<(Rect, usize)>, params: &ScanParams) -> Option<Rect> {
    let mut best: Option<Rect> = None;
    for (r, _) in clusters {
        if best.is_none_or(|b| r.area() > b.area()) {
            best = Some(r);
        }
    }
    best.filter(|r| r.w >= params.min_face_width)
}

/// Multi-scale scan of `frame`; returns the largest face cluster, if any.
pub fn detect(frame: &GrayFrame, cascade: &Cascade, params: &ScanParams) -> Result<Option<FaceRoi>, DetectError> {
    CascadeDetector::new(cascade.clone(), *params)?.detect(frame)
}

/// Cascade detector that caches per-scale resolved features between frames.
pub struct CascadeDetector {
    cascade: Cascade,
    params: ScanParams,
    cached_dims: Option<(usize, usize)>,
    scaled: Vec<ScaledCascade>,
}

impl CascadeDetector {
    pub fn new(cascade: Cascade, params: ScanParams) -> Result<Self, DetectError> {
        cascade.validate()?;
        params.validate()?;
        Ok(Self { cascade, params, cached_dims: None, scaled: Vec::new() })
    }

    pub fn params(&self) -> &ScanParams {
        &self.params
    }

    /// Every accepted window, before grouping.
    pub fn raw_hits(&mut self, frame: &GrayFrame) -> Vec<Rect> {
        let dims = (frame.width(), frame.height());
        if self.cached_dims != Some(dims) {
            self.scaled = self
                .params
                .window_sizes(self.cascade.base_window, dims.0, dims.1)
                .into_iter()
                .map(|w| ScaledCascade::new(&self.cascade, w))
                .collect();
            self.cached_dims = Some(dims);
        }
        let ii = IntegralImage::new(frame);
        scan(&ii, &self.scaled, &self.params)
    }
}

impl FaceDetector for CascadeDetector {
    fn detect(&mut self, frame: &GrayFrame) -> Result<Option<FaceRoi>, DetectError> {
        let hits = self.raw_hits(frame);
        let clusters = group_windows(&hits, self.params.group_iou, self.params.min_neighbors);
        Ok(pick_largest(clusters, &self.params).map(|r| FaceRoi::new(r, frame.frame_no())))
    }
}

#[cfg(test)]
mod tests {
    use super::super::cascade::tests::single_rect_cascade;
    use super::*;

    #[test]
    fn window_sizes_start_at_min_face() {
        let p = ScanParams::default();
        let sizes = p.window_sizes(WindowSize { width: 24, height: 24 }, 320, 240);
        let widths: Vec<u32> = sizes.iter().map(|s| s.width).collect();
        assert_eq!(widths, vec![80, 100, 125, 156, 195]);
    }

    #[test]
    fn always_pass_finds_a_face() {
        let f = GrayFrame::filled(320, 240, 90, 7);
        let roi = detect(&f, &single_rect_cascade(0.5), &ScanParams::default()).unwrap().unwrap();
        assert_eq!(roi.frame_no, 7);
        assert!(roi.rect.fits_in(320, 240));
        assert!(roi.rect.w >= 80);
        assert!(detect(&f, &single_rect_cascade(1.5), &ScanParams::default()).unwrap().is_none());
    }

    #[test]
    fn min_face_wider_than_frame_finds_nothing() {
        let f = GrayFrame::filled(320, 240, 90, 0);
        let p = ScanParams { min_face_width: 321, ..Default::default() };
        assert!(detect(&f, &single_rect_cascade(0.5), &p).unwrap().is_none());
    }

    #[test]
    fn grouping_requires_neighbours() {
        let w = [Rect::new(0, 0, 10, 10), Rect::new(1, 0, 10, 10), Rect::new(0, 1, 10, 10), Rect::new(50, 50, 10, 10)];
        let g = group_windows(&w, 0.3, 3);
        assert_eq!(g, vec![(Rect::new(0, 0, 10, 10), 3)]);
        assert_eq!(group_windows(&w, 0.3, 1).len(), 2);
    }

    #[test]
    fn rejects_bad_params() {
        let c = single_rect_cascade(0.5);
        assert!(CascadeDetector::new(c.clone(), ScanParams { scale_factor: 1.0, ..Default::default() }).is_err());
        assert!(CascadeDetector::new(c, ScanParams { min_face_width: 0, ..Default::default() }).is_err());
    }
}
