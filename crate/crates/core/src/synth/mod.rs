//! Sampler bank: seven polyphonic strips (one per MIDI channel / facial zone)
//! sharing four group samples, a global ADSR, constant-power topographic pan,
//! per-strip L/R volume, and a switchable feedback delay per sample group.
//!
//! Events are scheduled at absolute sample positions and applied on the exact
//! sample, so the rendered signal does not depend on how it is chunked.

mod adsr;
mod delay;
pub mod output;
mod sample;

use std::io;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event_engine::{MidiEvent, NoteKind};
use crate::zone_map::{ZoneGroup, ZoneLabel};

pub use adsr::{adsr_gain, AdsrParams};
pub use delay::{DelayLine, DelayParams, MAX_DELAY_S, MAX_FEEDBACK};
pub use output::{AudioSink, NullSink, PipeSink, WavSink};
pub use sample::{default_samples, load_sample, load_sample_bytes, Sample};

pub const STRIPS: usize = 7;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("unsupported audio file: {0}")]
    FormatError(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StripConfig {
    /// -1 (hard left) to 1 (hard right).
    pub pan: f64,
    pub vol_l: f64,
    pub vol_r: f64,
}

impl Default for StripConfig {
    fn default() -> Self {
        Self { pan: 0.0, vol_l: 1.0, vol_r: 1.0 }
    }
}

impl StripConfig {
    /// Constant-power pan gains `(cos t, sin t)` with `t = (pan + 1) pi / 4`.
    /// The right gain is computed as `cos(pi/2 - t)` so both sides are
    /// bit-identical at centre.
    pub fn pan_gains(&self) -> (f64, f64) {
        let theta = (self.pan + 1.0) * std::f64::consts::PI / 4.0;
        (theta.cos(), (std::f64::consts::PI / 2.0 - theta).cos())
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(-1.0..=1.0).contains(&self.pan) {
            return Err(format!("pan {} not in [-1, 1]", self.pan));
        }
        for v in [self.vol_l, self.vol_r] {
            if !(0.0..=2.0).contains(&v) {
                return Err(format!("volume {v} not in [0, 2]"));
            }
        }
        Ok(())
    }
}

/// Pan position of a zone's strip: left-half zones at -0.6, right-half at
/// +0.6, mouth centred.
pub fn topographic_pan(label: ZoneLabel) -> f64 {
    match label {
        ZoneLabel::BrowL | ZoneLabel::EyeL | ZoneLabel::CheekL => -0.6,
        ZoneLabel::BrowR | ZoneLabel::EyeR | ZoneLabel::CheekR => 0.6,
        ZoneLabel::Mouth => 0.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub sample_rate: u32,
    pub block_size: usize,
    pub max_voices: usize,
    /// Pitch that plays a sample at its recorded speed.
    pub reference_pitch: u8,
    /// Ignore pitch and always play samples at rate 1.
    pub fixed_rate: bool,
    pub adsr: AdsrParams,
    pub delay: DelayParams,
    /// Indexed by channel - 1 (BrowL, BrowR, EyeL, EyeR, CheekL, CheekR, Mouth).
    pub strips: [StripConfig; STRIPS],
    /// WAV per group (brow, eye, cheek, mouth); `None` uses the bundled sample.
    pub samples: [Option<PathBuf>; 4],
    pub muted: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            sample_rate: 44_100,
            block_size: 256,
            max_voices: 16,
            reference_pitch: 64,
            fixed_rate: false,
            adsr: AdsrParams::default(),
            delay: DelayParams::default(),
            strips: ZoneLabel::ALL.map(|l| StripConfig { pan: topographic_pan(l), ..Default::default() }),
            samples: Default::default(),
            muted: false,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidParams(m));
        if !(8_000..=192_000).contains(&self.sample_rate) {
            return bad(format!("sample rate {}", self.sample_rate));
        }
        if self.block_size == 0 {
            return bad("block size must be > 0".into());
        }
        if self.max_voices == 0 {
            return bad("max_voices must be > 0".into());
        }
        if self.reference_pitch > 127 {
            return bad(format!("reference pitch {}", self.reference_pitch));
        }
        self.adsr.validate().map_err(SynthError::InvalidParams)?;
        self.delay.validate().map_err(SynthError::InvalidParams)?;
        for s in &self.strips {
            s.validate().map_err(SynthError::InvalidParams)?;
        }
        Ok(())
    }

    /// Playback-rate multiplier for `pitch`: `2^((pitch - reference) / 12)`.
    pub fn playback_rate(&self, pitch: u8) -> f64 {
        if self.fixed_rate {
            1.0
        } else {
            ((f64::from(pitch) - f64::from(self.reference_pitch)) / 12.0).exp2()
        }
    }
}

#[derive(Clone, Debug)]
struct Voice {
    pitch: u8,
    frames: Arc<[f32]>,
    position: f64,
    rate: f64,
    velocity_gain: f64,
    /// Samples rendered since note-on.
    age: u64,
    /// Age at note-off.
    released_at: Option<u64>,
}

impl Voice {
    fn sample_at(&self) -> Option<f64> {
        let i = self.position as usize;
        let f = &self.frames;
        if i >= f.len() {
            return None;
        }
        let a = f64::from(f[i]);
        let b = f.get(i + 1).map_or(0.0, |&v| f64::from(v));
        Some(a + (b - a) * (self.position - i as f64))
    }
}

pub struct Synth {
    cfg: SynthConfig,
    samples: Arc<[Sample; 4]>,
    voices: [Vec<Voice>; STRIPS],
    gains: [(f64, f64); STRIPS],
    delays: [DelayLine; 4],
    /// Pending events, ordered by sample position (stable for ties).
    queue: Vec<(u64, MidiEvent)>,
    now: u64,
}

impl Synth {
    /// Builds the engine, loading configured samples (bundled ones otherwise).
    pub fn new(cfg: SynthConfig) -> Result<Self, SynthError> {
        cfg.validate()?;
        let mut samples = default_samples(cfg.sample_rate)?;
        for g in ZoneGroup::ALL {
            if let Some(path) = &cfg.samples[g.index()] {
                samples[g.index()] = load_sample(path, g, cfg.sample_rate)?;
            }
        }
        Ok(Self::with_samples(cfg, samples))
    }

    /// Like [`Synth::new`] but with an explicit sample table (config paths ignored).
    pub fn with_samples(cfg: SynthConfig, samples: [Sample; 4]) -> Self {
        let rate = cfg.sample_rate;
        let mut s = Self {
            samples: Arc::new(samples),
            voices: Default::default(),
            gains: [(0.0, 0.0); STRIPS],
            delays: std::array::from_fn(|_| DelayLine::new(rate)),
            queue: Vec::new(),
            now: 0,
            cfg,
        };
        s.refresh_gains();
        for d in &mut s.delays {
            d.configure(&s.cfg.delay, rate);
        }
        s
    }

    pub fn config(&self) -> &SynthConfig {
        &self.cfg
    }

    /// Samples rendered so far.
    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn active_voices(&self, channel: u8) -> usize {
        self.voices.get(usize::from(channel).wrapping_sub(1)).map_or(0, Vec::len)
    }

    pub fn total_voices(&self) -> usize {
        self.voices.iter().map(Vec::len).sum()
    }

    pub fn pending_events(&self) -> usize {
        self.queue.len()
    }

    pub fn sample(&self, group: ZoneGroup) -> &Sample {
        &self.samples[group.index()]
    }

    fn refresh_gains(&mut self) {
        for (g, s) in self.gains.iter_mut().zip(&self.cfg.strips) {
            let (l, r) = s.pan_gains();
            *g = (l * s.vol_l, r * s.vol_r);
        }
    }

    fn check_channel(channel: u8) -> Result<usize, SynthError> {
        if (1..=STRIPS as u8).contains(&channel) {
            Ok(usize::from(channel - 1))
        } else {
            Err(SynthError::InvalidParams(format!("channel {channel} not in 1..={STRIPS}")))
        }
    }

    /// Queues `e` to take effect at absolute sample `at` (immediately if
    /// `at` is already in the past).
    pub fn schedule(&mut self, at: u64, e: MidiEvent) -> Result<(), SynthError> {
        Self::check_channel(e.channel)?;
        let pos = self.queue.partition_point(|(t, _)| *t <= at);
        self.queue.insert(pos, (at, e));
        Ok(())
    }

    pub fn note_on(&mut self, e: &MidiEvent) -> Result<(), SynthError> {
        let strip = Self::check_channel(e.channel)?;
        let group = ZoneLabel::ALL[strip].group();
        let voices = &mut self.voices[strip];
        if voices.len() >= self.cfg.max_voices {
            // oldest first: voices are kept in note-on order
            voices.remove(0);
        }
        voices.push(Voice {
            pitch: e.pitch,
            frames: Arc::clone(&self.samples[group.index()].frames),
            position: 0.0,
            rate: self.cfg.playback_rate(e.pitch),
            velocity_gain: f64::from(e.velocity) / 127.0,
            age: 0,
            released_at: None,
        });
        Ok(())
    }

    pub fn note_off(&mut self, e: &MidiEvent) -> Result<(), SynthError> {
        let strip = Self::check_channel(e.channel)?;
        for v in self.voices[strip].iter_mut().filter(|v| v.pitch == e.pitch && v.released_at.is_none()) {
            v.released_at = Some(v.age);
        }
        Ok(())
    }

    fn apply(&mut self, e: &MidiEvent) {
        // channels were checked when scheduled
        let _ = match e.kind {
            NoteKind::NoteOn => self.note_on(e),
            NoteKind::NoteOff => self.note_off(e),
        };
    }

    pub fn set_muted(&mut self, muted: bool) {
        self.cfg.muted = muted;
    }

    pub fn is_muted(&self) -> bool {
        self.cfg.muted
    }

    pub fn set_volume(&mut self, channel: u8, vol_l: f64, vol_r: f64) -> Result<(), SynthError> {
        let strip = Self::check_channel(channel)?;
        let next = StripConfig { vol_l, vol_r, ..self.cfg.strips[strip] };
        next.validate().map_err(SynthError::InvalidParams)?;
        self.cfg.strips[strip] = next;
        self.refresh_gains();
        Ok(())
    }

    pub fn set_adsr(&mut self, p: AdsrParams) -> Result<(), SynthError> {
        p.validate().map_err(SynthError::InvalidParams)?;
        self.cfg.adsr = p;
        Ok(())
    }

    /// New delay settings; a group whose delay is switched off loses its tail.
    pub fn set_delay(&mut self, p: DelayParams) -> Result<(), SynthError> {
        p.validate().map_err(SynthError::InvalidParams)?;
        for (g, d) in self.delays.iter_mut().enumerate() {
            if self.cfg.delay.enabled[g] && !p.enabled[g] {
                d.reset();
            }
            d.configure(&p, self.cfg.sample_rate);
        }
        self.cfg.delay = p;
        Ok(())
    }

    /// Swaps in a new sample for its group. Sounding voices finish on the old one.
    pub fn set_sample(&mut self, sample: Sample) {
        let mut table = (*self.samples).clone();
        let g = sample.group.index();
        table[g] = sample;
        self.samples = Arc::new(table);
    }

    pub fn render(&mut self, frames: usize) -> Vec<[f32; 2]> {
        let mut out = vec![[0.0; 2]; frames];
        self.render_into(&mut out);
        out
    }

    pub fn render_into(&mut self, out: &mut [[f32; 2]]) {
        let rate = f64::from(self.cfg.sample_rate);
        let adsr = self.cfg.adsr;
        let mut applied = 0;
        for frame in out.iter_mut() {
            while applied < self.queue.len() && self.queue[applied].0 <= self.now {
                let e = self.queue[applied].1;
                self.apply(&e);
                applied += 1;
            }

            let mut bus = [[0.0f64; 2]; 4];
            for (strip, voices) in self.voices.iter_mut().enumerate() {
                if voices.is_empty() {
                    continue;
                }
                let group = ZoneLabel::ALL[strip].group().index();
                let (gl, gr) = self.gains[strip];
                let mut mono = 0.0;
                voices.retain_mut(|v| {
                    let t_on = v.age as f64 / rate;
                    let t_off = v.released_at.map(|r| (v.age - r) as f64 / rate);
                    if t_off.is_some_and(|t| t >= adsr.release_s) {
                        return false;
                    }
                    let Some(s) = v.sample_at() else {
                        return false;
                    };
                    mono += s * adsr_gain(t_on, t_off, &adsr) * v.velocity_gain;
                    v.position += v.rate;
                    v.age += 1;
                    true
                });
                bus[group][0] += mono * gl;
                bus[group][1] += mono * gr;
            }

            let mut mix = [0.0f64; 2];
            for (g, b) in bus.iter().enumerate() {
                let y = if self.cfg.delay.enabled[g] { self.delays[g].process(*b) } else { *b };
                mix[0] += y[0];
                mix[1] += y[1];
            }
            *frame = if self.cfg.muted { [0.0; 2] } else { [mix[0] as f32, mix[1] as f32] };
            self.now += 1;
        }
        self.queue.drain(..applied);
    }
}
