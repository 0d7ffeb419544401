//! Seven facial zones derived from the face rectangle, grid-point
//! classification, and the per-zone salient-motion rules.
//!
//! "Left" and "right" refer to image coordinates: `BrowL` sits in the left
//! half of the face rectangle as it appears on screen.

use serde::{Deserialize, Serialize};

use crate::face_detect::FaceRoi;
use crate::geometry::{round_half_up, Rect};
use crate::optic_flow::{FlowParams, FlowVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ZoneLabel {
    BrowL,
    BrowR,
    EyeL,
    EyeR,
    CheekL,
    CheekR,
    Mouth,
}

impl ZoneLabel {
    pub const ALL: [ZoneLabel; 7] = [
        ZoneLabel::BrowL,
        ZoneLabel::BrowR,
        ZoneLabel::EyeL,
        ZoneLabel::EyeR,
        ZoneLabel::CheekL,
        ZoneLabel::CheekR,
        ZoneLabel::Mouth,
    ];

    pub fn group(self) -> ZoneGroup {
        match self {
            ZoneLabel::BrowL | ZoneLabel::BrowR => ZoneGroup::Brow,
            ZoneLabel::EyeL | ZoneLabel::EyeR => ZoneGroup::Eye,
            ZoneLabel::CheekL | ZoneLabel::CheekR => ZoneGroup::Cheek,
            ZoneLabel::Mouth => ZoneGroup::Mouth,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Zone type; analogous left/right zones share a group (and a sample).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneGroup {
    Brow,
    Eye,
    Cheek,
    Mouth,
}

impl ZoneGroup {
    pub const ALL: [ZoneGroup; 4] = [ZoneGroup::Brow, ZoneGroup::Eye, ZoneGroup::Cheek, ZoneGroup::Mouth];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Display colour used for trigger markers and sample labels.
    pub fn color(self) -> &'static str {
        match self {
            ZoneGroup::Brow => "red",
            ZoneGroup::Eye => "yellow",
            ZoneGroup::Cheek => "blue",
            ZoneGroup::Mouth => "green",
        }
    }
}

/// Rectangle in face-relative coordinates, `[x0, x1) x [y0, y1)` of the ROI.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FracRect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl FracRect {
    pub const fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    fn resolve(&self, roi: &Rect) -> Rect {
        let (w, h) = (f64::from(roi.w), f64::from(roi.h));
        let px = |v: f64| round_half_up(v).max(0) as u32;
        Rect::new(
            px(f64::from(roi.x) + self.x0 * w),
            px(f64::from(roi.y) + self.y0 * h),
            px((self.x1 - self.x0) * w),
            px((self.y1 - self.y0) * h),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EyeRule {
    /// Vertical component only, like the brows.
    Vertical,
    /// Full vector magnitude.
    Magnitude,
}

/// Zone geometry as fractions of the face rectangle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ZoneConfig {
    pub brow_l: FracRect,
    pub brow_r: FracRect,
    pub eye_l: FracRect,
    pub eye_r: FracRect,
    pub cheek_l: FracRect,
    pub cheek_r: FracRect,
    pub mouth: FracRect,
}

impl Default for ZoneConfig {
    fn default() -> Self {
        const L: (f64, f64) = (0.08, 0.5);
        const R: (f64, f64) = (0.5, 0.92);
        const BROW: (f64, f64) = (0.18, 0.32);
        const EYE: (f64, f64) = (0.32, 0.48);
        const CHEEK: (f64, f64) = (0.48, 0.80);
        Self {
            brow_l: FracRect::new(L.0, BROW.0, L.1, BROW.1),
            brow_r: FracRect::new(R.0, BROW.0, R.1, BROW.1),
            eye_l: FracRect::new(L.0, EYE.0, L.1, EYE.1),
            eye_r: FracRect::new(R.0, EYE.0, R.1, EYE.1),
            cheek_l: FracRect::new(L.0, CHEEK.0, L.1, CHEEK.1),
            cheek_r: FracRect::new(R.0, CHEEK.0, R.1, CHEEK.1),
            mouth: FracRect::new(0.30, 0.62, 0.70, 0.88),
        }
    }
}

impl ZoneConfig {
    pub fn fractions(&self, label: ZoneLabel) -> &FracRect {
        match label {
            ZoneLabel::BrowL => &self.brow_l,
            ZoneLabel::BrowR => &self.brow_r,
            ZoneLabel::EyeL => &self.eye_l,
            ZoneLabel::EyeR => &self.eye_r,
            ZoneLabel::CheekL => &self.cheek_l,
            ZoneLabel::CheekR => &self.cheek_r,
            ZoneLabel::Mouth => &self.mouth,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for label in ZoneLabel::ALL {
            let f = self.fractions(label);
            let ok = (0.0..=1.0).contains(&f.x0)
                && (0.0..=1.0).contains(&f.x1)
                && (0.0..=1.0).contains(&f.y0)
                && (0.0..=1.0).contains(&f.y1)
                && f.x0 <= f.x1
                && f.y0 <= f.y1;
            if !ok {
                return Err(format!("zone {label:?} fractions {f:?} must satisfy 0 <= lo <= hi <= 1"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Zone {
    pub label: ZoneLabel,
    pub rect: Rect,
}

impl Zone {
    pub fn group(&self) -> ZoneGroup {
        self.label.group()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZoneLayout {
    pub roi: FaceRoi,
    /// Indexed by [`ZoneLabel::index`].
    pub zones: [Zone; 7],
}

/// Classification order: the mouth wins over the cheek band it overlaps.
const PRECEDENCE: [ZoneLabel; 7] = [
    ZoneLabel::Mouth,
    ZoneLabel::BrowL,
    ZoneLabel::BrowR,
    ZoneLabel::EyeL,
    ZoneLabel::EyeR,
    ZoneLabel::CheekL,
    ZoneLabel::CheekR,
];

impl ZoneLayout {
    pub fn zone(&self, label: ZoneLabel) -> &Zone {
        &self.zones[label.index()]
    }

    /// Zone containing pixel `(px, py)`, if any.
    pub fn classify_pixel(&self, px: u32, py: u32) -> Option<ZoneLabel> {
        PRECEDENCE.into_iter().find(|&l| self.zone(l).rect.contains(px, py))
    }

    /// Zone of the flow-grid cell whose centre pixel is tested.
    pub fn classify_point(&self, params: &FlowParams, col: usize, row: usize) -> Option<ZoneLabel> {
        let (px, py) = params.cell_center(col, row);
        self.classify_pixel(px, py)
    }
}

pub fn compute_zones(roi: &FaceRoi, cfg: &ZoneConfig) -> ZoneLayout {
    let zones = ZoneLabel::ALL.map(|label| {
        let rect = if roi.rect.is_empty() { Rect::new(roi.rect.x, roi.rect.y, 0, 0) } else { cfg.fractions(label).resolve(&roi.rect) };
        Zone { label, rect }
    });
    ZoneLayout { roi: *roi, zones }
}

pub fn classify_point(layout: &ZoneLayout, params: &FlowParams, col: usize, row: usize) -> Option<ZoneLabel> {
    layout.classify_point(params, col, row)
}

/// Salient motion value of `v` under the default rules (eyes vertical-only).
pub fn salient_value(group: ZoneGroup, v: FlowVector) -> f32 {
    salient_value_with(group, v, EyeRule::Vertical)
}

pub fn salient_value_with(group: ZoneGroup, v: FlowVector, eye_rule: EyeRule) -> f32 {
    match (group, eye_rule) {
        (ZoneGroup::Brow, _) | (ZoneGroup::Eye, EyeRule::Vertical) => v.dy.abs(),
        _ => v.magnitude(),
    }
}
