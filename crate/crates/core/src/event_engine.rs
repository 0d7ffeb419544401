//! Turns a smoothed, zone-labelled flow field into MIDI note events.
//!
//! Per frame: due note-offs fire first; then, if a large-enough face is
//! present and MIDI is enabled, the `top_k` in-zone cells with the highest
//! supra-threshold salient value each produce a note-on whose channel comes
//! from the zone, pitch from the grid row, and velocity from the value. Every
//! note-on schedules its note-off `note_off_frames` later.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optic_flow::FlowField;
use crate::zone_map::{salient_value_with, EyeRule, ZoneGroup, ZoneLabel, ZoneLayout};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EventError {
    #[error("invalid event config: {0}")]
    InvalidConfig(String),
    #[error("malformed event log line {line}: {reason}")]
    BadLogLine { line: usize, reason: String },
}

/// Minor pentatonic pitch-class offsets from the root.
pub const MINOR_PENTATONIC: [u8; 5] = [0, 3, 5, 7, 10];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EventConfig {
    /// Salient value a cell must exceed to count as motion, px/frame.
    pub threshold: f32,
    pub top_k: usize,
    pub note_off_frames: u64,
    pub min_face_width: u32,
    pub pitch_low: u8,
    pub pitch_high: u8,
    /// Pitch-class offsets (0..12) of the scale, rooted at `pitch_low`.
    pub scale: Vec<u8>,
    pub midi_enabled: bool,
    pub eye_rule: EyeRule,
}

impl Default for EventConfig {
    fn default() -> Self {
        Self {
            threshold: 1.0,
            top_k: 8,
            note_off_frames: 4,
            min_face_width: 80,
            pitch_low: 40,
            pitch_high: 112,
            scale: MINOR_PENTATONIC.to_vec(),
            midi_enabled: true,
            eye_rule: EyeRule::Vertical,
        }
    }
}

impl EventConfig {
    pub fn validate(&self) -> Result<(), EventError> {
        let bad = |m: &str| Err(EventError::InvalidConfig(m.into()));
        if self.top_k < 1 {
            return bad("top_k must be >= 1");
        }
        if self.note_off_frames < 1 {
            return bad("note_off_frames must be >= 1");
        }
        if self.pitch_low >= self.pitch_high || self.pitch_high > 127 {
            return bad("need pitch_low < pitch_high <= 127");
        }
        if self.scale.is_empty() || !self.scale.contains(&0) || self.scale.iter().any(|&s| s >= 12) {
            return bad("scale must contain 0 and only offsets < 12");
        }
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return bad("threshold must be finite and >= 0");
        }
        Ok(())
    }

    /// True when `pitch` lies on the configured scale within range.
    pub fn in_scale(&self, pitch: u8) -> bool {
        pitch >= self.pitch_low
            && pitch <= self.pitch_high
            && self.scale.contains(&((pitch - self.pitch_low) % 12))
    }

    /// Every scale member in `[pitch_low, pitch_high]`, ascending.
    pub fn scale_notes(&self) -> Vec<u8> {
        (self.pitch_low..=self.pitch_high).filter(|&p| self.in_scale(p)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoteKind {
    NoteOn,
    NoteOff,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MidiEvent {
    pub kind: NoteKind,
    /// 1-based MIDI channel.
    pub channel: u8,
    pub pitch: u8,
    /// Zero for note-offs.
    pub velocity: u8,
    pub frame_no: u64,
}

impl MidiEvent {
    pub fn note_on(channel: u8, pitch: u8, velocity: u8, frame_no: u64) -> Self {
        Self { kind: NoteKind::NoteOn, channel, pitch, velocity, frame_no }
    }

    pub fn note_off(channel: u8, pitch: u8, frame_no: u64) -> Self {
        Self { kind: NoteKind::NoteOff, channel, pitch, velocity: 0, frame_no }
    }

    pub fn is_on(&self) -> bool {
        self.kind == NoteKind::NoteOn
    }
}

/// Event-log line: `frame kind channel pitch velocity`.
impl fmt::Display for MidiEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            NoteKind::NoteOn => "on",
            NoteKind::NoteOff => "off",
        };
        write!(f, "{} {} {} {} {}", self.frame_no, kind, self.channel, self.pitch, self.velocity)
    }
}

pub fn format_event_log(events: &[MidiEvent]) -> String {
    events.iter().map(|e| format!("{e}\n")).collect()
}

pub fn parse_event_log(text: &str) -> Result<Vec<MidiEvent>, EventError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = |reason: &str| EventError::BadLogLine { line: i + 1, reason: reason.into() };
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [frame, kind, ch, pitch, vel] = parts[..] else {
            return Err(bad("expected 5 fields"));
        };
        let kind = match kind {
            "on" => NoteKind::NoteOn,
            "off" => NoteKind::NoteOff,
            _ => return Err(bad("kind must be on/off")),
        };
        let num = |s: &str| s.parse::<u64>().map_err(|_| bad("bad number"));
        out.push(MidiEvent {
            kind,
            frame_no: num(frame)?,
            channel: num(ch)? as u8,
            pitch: num(pitch)? as u8,
            velocity: num(vel)? as u8,
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub x: u32,
    pub y: u32,
    pub dx: f32,
    pub dy: f32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trigger {
    pub x: u32,
    pub y: u32,
    pub group: ZoneGroup,
    pub ttl_frames: u64,
}

/// Visual annotations for one frame: every supra-threshold in-zone vector as
/// a segment, and every cell that produced a note-on as a trigger.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OverlayFrame {
    pub frame_no: u64,
    pub segments: Vec<Segment>,
    pub triggers: Vec<Trigger>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PendingOff {
    pub due_frame: u64,
    pub channel: u8,
    pub pitch: u8,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EngineState {
    pending: Vec<PendingOff>,
}

impl EngineState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pending(&self) -> &[PendingOff] {
        &self.pending
    }

    fn is_pending(&self, channel: u8, pitch: u8) -> bool {
        self.pending.iter().any(|p| p.channel == channel && p.pitch == pitch)
    }

    /// Removes and returns the note-offs due at `frame_no` or earlier.
    pub fn take_due(&mut self, frame_no: u64) -> Vec<MidiEvent> {
        let mut due = Vec::new();
        self.pending.retain(|p| {
            if p.due_frame <= frame_no {
                due.push(MidiEvent::note_off(p.channel, p.pitch, p.due_frame));
                false
            } else {
                true
            }
        });
        due
    }

    /// All outstanding note-offs at their due frames, leaving nothing pending.
    pub fn flush(&mut self) -> Vec<MidiEvent> {
        let mut pending = std::mem::take(&mut self.pending);
        pending.sort_by_key(|p| p.due_frame);
        pending.into_iter().map(|p| MidiEvent::note_off(p.channel, p.pitch, p.due_frame)).collect()
    }
}

/// Pitch for a grid row (row 0 at the top of the frame): the linear
/// bottom-to-top mapping onto `[pitch_low, pitch_high]`, floored to the scale.
pub fn pitch_for_grid_row(row: usize, grid_rows: usize, cfg: &EventConfig) -> u8 {
    let last = grid_rows.saturating_sub(1).max(1) as u64;
    let height = last - (row as u64).min(last);
    let span = u64::from(cfg.pitch_high - cfg.pitch_low);
    // integer floor of the chromatic target; scale members are integers
    let chromatic = cfg.pitch_low as u64 + span * height / last;
    let mut pitch = chromatic as u8;
    while !cfg.in_scale(pitch) {
        pitch -= 1;
    }
    pitch
}

pub fn velocity_for(salient: f32, search_radius: usize) -> u8 {
    let full_scale = search_radius as f64 * std::f64::consts::SQRT_2;
    (127.0 * f64::from(salient) / full_scale).round().clamp(1.0, 127.0) as u8
}

pub fn channel_for(label: ZoneLabel) -> u8 {
    match label {
        ZoneLabel::BrowL => 1,
        ZoneLabel::BrowR => 2,
        ZoneLabel::EyeL => 3,
        ZoneLabel::EyeR => 4,
        ZoneLabel::CheekL => 5,
        ZoneLabel::CheekR => 6,
        ZoneLabel::Mouth => 7,
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepOutput {
    pub events: Vec<MidiEvent>,
    pub overlay: OverlayFrame,
}

impl StepOutput {
    pub fn note_ons(&self) -> impl Iterator<Item = &MidiEvent> {
        self.events.iter().filter(|e| e.is_on())
    }
}

struct Candidate {
    index: usize,
    col: usize,
    row: usize,
    label: ZoneLabel,
    value: f32,
}

/// Processes one smoothed flow field.
///
/// A `(channel, pitch)` that is still sounding is not re-triggered, so every
/// note-on is followed by exactly one note-off exactly `note_off_frames` later.
pub fn step(field: &FlowField, layout: Option<&ZoneLayout>, state: &mut EngineState, cfg: &EventConfig) -> StepOutput {
    let frame_no = field.frame_no();
    let params = field.params();
    let mut events = state.take_due(frame_no);
    let mut overlay = OverlayFrame { frame_no, ..Default::default() };

    let Some(layout) = layout else {
        return StepOutput { events, overlay };
    };

    let mut candidates = Vec::new();
    for (index, (col, row, v)) in field.cells().enumerate() {
        let Some(label) = layout.classify_point(params, col, row) else {
            continue;
        };
        let value = salient_value_with(label.group(), v, cfg.eye_rule);
        if value > cfg.threshold {
            let (x, y) = params.cell_center(col, row);
            overlay.segments.push(Segment { x, y, dx: v.dx, dy: v.dy });
            candidates.push(Candidate { index, col, row, label, value });
        }
    }

    let gated = layout.roi.width() < cfg.min_face_width || !cfg.midi_enabled;
    if gated {
        return StepOutput { events, overlay };
    }

    candidates.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.index.cmp(&b.index)));
    let mut fired: HashSet<(u8, u8)> = HashSet::new();
    for c in candidates.iter().take(cfg.top_k) {
        let channel = channel_for(c.label);
        let pitch = pitch_for_grid_row(c.row, params.grid_rows, cfg);
        // sorted by value, so the first hit on a key carries the highest velocity
        if fired.contains(&(channel, pitch)) || state.is_pending(channel, pitch) {
            continue;
        }
        fired.insert((channel, pitch));
        events.push(MidiEvent::note_on(channel, pitch, velocity_for(c.value, params.search_radius), frame_no));
        state.pending.push(PendingOff { due_frame: frame_no + cfg.note_off_frames, channel, pitch });
        let (x, y) = params.cell_center(c.col, c.row);
        overlay.triggers.push(Trigger { x, y, group: c.label.group(), ttl_frames: cfg.note_off_frames });
    }
    StepOutput { events, overlay }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::face_detect::FaceRoi;
    use crate::geometry::Rect;
    use crate::optic_flow::{FlowParams, FlowVector};
    use crate::zone_map::{compute_zones, ZoneConfig};

    fn layout() -> ZoneLayout {
        compute_zones(&FaceRoi::new(Rect::new(40, 0, 240, 240), 0), &ZoneConfig::default())
    }

    #[test]
    fn pitch_endpoints_and_middle() {
        let cfg = EventConfig::default();
        assert_eq!(pitch_for_grid_row(29, 30, &cfg), 40);
        assert_eq!(pitch_for_grid_row(0, 30, &cfg), 112);
        // chromatic 77.24; scale members near it are 74 and 76 and 79
        assert_eq!(pitch_for_grid_row(14, 30, &cfg), 76);
    }

    #[test]
    fn pitch_matches_enumerated_scale() {
        let cfg = EventConfig::default();
        let scale: Vec<u8> = (40..=112u8).filter(|p| [0, 3, 5, 7, 10].contains(&((p - 40) % 12))).collect();
        assert_eq!(cfg.scale_notes(), scale);
        for row in 0..30 {
            let c = 40.0 + 72.0 * (29 - row) as f64 / 29.0;
            let expect = *scale.iter().rfind(|&&p| p as f64 <= c + 1e-9).unwrap();
            assert_eq!(pitch_for_grid_row(row, 30, &cfg), expect, "row {row}");
        }
    }

    #[test]
    fn velocity_examples() {
        assert_eq!(velocity_for(4.0 * std::f32::consts::SQRT_2, 4), 127);
        assert_eq!(velocity_for(1e-6, 4), 1);
        assert_eq!(velocity_for(2.0, 4), 45);
        assert_eq!(velocity_for(100.0, 4), 127);
    }

    #[test]
    fn channel_table_is_bijection() {
        let mut chans: Vec<u8> = ZoneLabel::ALL.iter().map(|&l| channel_for(l)).collect();
        assert_eq!(channel_for(ZoneLabel::BrowL), 1);
        assert_eq!(channel_for(ZoneLabel::Mouth), 7);
        chans.sort();
        assert_eq!(chans, (1..=7).collect::<Vec<u8>>());
    }

    #[test]
    fn zero_field_emits_only_due_offs() {
        let p = FlowParams::default();
        let mut state = EngineState::new();
        state.pending.push(PendingOff { due_frame: 5, channel: 3, pitch: 50 });
        let out = step(&FlowField::zeros(p, 5), Some(&layout()), &mut state, &EventConfig::default());
        assert_eq!(out.events, vec![MidiEvent::note_off(3, 50, 5)]);
        assert!(out.overlay.segments.is_empty());
        assert!(state.pending().is_empty());
    }

    fn busy_field(frame_no: u64) -> FlowField {
        // 10 cheek cells on distinct rows with distinct magnitudes
        let p = FlowParams::default();
        let mut f = FlowField::zeros(p, frame_no);
        let l = layout();
        let mut placed = 0;
        for row in 0..30 {
            for col in 0..40 {
                if placed < 10 && l.classify_point(&p, col, row) == Some(ZoneLabel::CheekL) {
                    f.set(col, row, FlowVector::new(1.5 + placed as f32 * 0.2, 0.0));
                    placed += 1;
                    break;
                }
            }
        }
        assert_eq!(placed, 10);
        f
    }

    #[test]
    fn top_eight_of_ten() {
        let mut state = EngineState::new();
        let cfg = EventConfig::default();
        let field = busy_field(100);
        let out = step(&field, Some(&layout()), &mut state, &cfg);
        assert_eq!(out.overlay.segments.len(), 10);
        let ons: Vec<_> = out.note_ons().collect();
        // rows collapse onto shared pitches only when two rows floor to the same note
        let distinct: HashSet<_> = ons.iter().map(|e| (e.channel, e.pitch)).collect();
        assert_eq!(distinct.len(), ons.len());
        assert!(ons.len() <= 8);
        assert_eq!(out.overlay.triggers.len(), ons.len());
    }

    #[test]
    fn off_follows_on_after_four_frames() {
        let p = FlowParams::default();
        let mut state = EngineState::new();
        let cfg = EventConfig::default();
        let mut f = FlowField::zeros(p, 100);
        f.set(20, 22, FlowVector::new(0.0, 3.0));
        let on = step(&f, Some(&layout()), &mut state, &cfg);
        let ons: Vec<_> = on.note_ons().copied().collect();
        assert_eq!(ons.len(), 1);
        assert_eq!(ons[0].frame_no, 100);
        for frame in 101..104 {
            assert!(step(&FlowField::zeros(p, frame), Some(&layout()), &mut state, &cfg).events.is_empty());
        }
        let off = step(&FlowField::zeros(p, 104), Some(&layout()), &mut state, &cfg);
        assert_eq!(off.events, vec![MidiEvent::note_off(ons[0].channel, ons[0].pitch, 104)]);
    }

    #[test]
    fn gates_suppress_note_ons_but_keep_segments() {
        let field = busy_field(3);
        let small = compute_zones(&FaceRoi::new(Rect::new(40, 0, 79, 240), 0), &ZoneConfig::default());
        let mut state = EngineState::new();
        let out = step(&field, Some(&small), &mut state, &EventConfig::default());
        assert_eq!(out.note_ons().count(), 0);

        let cfg = EventConfig { midi_enabled: false, ..Default::default() };
        let out = step(&field, Some(&layout()), &mut state, &cfg);
        assert_eq!(out.note_ons().count(), 0);
        assert_eq!(out.overlay.segments.len(), 10);
        assert!(out.overlay.triggers.is_empty());

        let out = step(&field, None, &mut state, &EventConfig::default());
        assert!(out.events.is_empty());
    }

    #[test]
    fn sounding_note_is_not_retriggered() {
        let p = FlowParams::default();
        let cfg = EventConfig::default();
        let mut state = EngineState::new();
        let mut f = FlowField::zeros(p, 10);
        f.set(20, 22, FlowVector::new(0.0, 3.0));
        assert_eq!(step(&f, Some(&layout()), &mut state, &cfg).note_ons().count(), 1);
        let mut g = f.clone();
        g = FlowField::from_vectors(p, g.vectors().to_vec(), 11).unwrap();
        assert_eq!(step(&g, Some(&layout()), &mut state, &cfg).note_ons().count(), 0);
        assert_eq!(state.pending().len(), 1);
        assert_eq!(state.pending()[0].due_frame, 14);
    }

    #[test]
    fn flush_releases_everything() {
        let mut state = EngineState::new();
        step(&busy_field(0), Some(&layout()), &mut state, &EventConfig::default());
        let n = state.pending().len();
        let offs = state.flush();
        assert_eq!(offs.len(), n);
        assert!(offs.iter().all(|e| e.kind == NoteKind::NoteOff && e.frame_no == 4));
        assert!(state.pending().is_empty());
    }

    #[test]
    fn event_log_roundtrip() {
        let events = vec![MidiEvent::note_on(7, 52, 45, 10), MidiEvent::note_off(7, 52, 14)];
        let text = format_event_log(&events);
        assert_eq!(text, "10 on 7 52 45\n14 off 7 52 0\n");
        assert_eq!(parse_event_log(&text).unwrap(), events);
        assert!(parse_event_log("1 maybe 1 1 1").is_err());
    }

    #[test]
    fn config_validation() {
        assert!(EventConfig::default().validate().is_ok());
        assert!(EventConfig { top_k: 0, ..Default::default() }.validate().is_err());
        assert!(EventConfig { pitch_low: 112, pitch_high: 40, ..Default::default() }.validate().is_err());
        assert!(EventConfig { scale: vec![3, 5], ..Default::default() }.validate().is_err());
    }
}
