//! Live mode: vision, audio and service stages on their own threads,
//! connected only by channels. MIDI events travel on an unbounded queue and
//! are never dropped; frames for the UI travel on a short bounded queue and
//! are dropped when the service stage falls behind.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, unbounded, Receiver, RecvTimeoutError, TrySendError};

use super::offline::{open_audio, open_midi};
use super::server::{initial_status, Service};
use super::{AudioControl, FrameUpdate, SessionConfig, SessionError, VisionControl, VisionPipeline};
use crate::event_engine::MidiEvent;
use crate::frame_io::{open_source, Pacer};
use crate::synth::Synth;

/// Depth of the modelled output buffer, in blocks (about 23 ms at 256/44.1k).
pub const OUTPUT_BUFFER_BLOCKS: u32 = 4;

#[derive(Clone, Debug, Default)]
pub struct LiveOptions {
    /// Stop after this many frames (runs until the source ends otherwise).
    pub max_frames: Option<u64>,
    /// Set from outside (e.g. a signal handler) to end the run.
    pub stop: Arc<AtomicBool>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LiveReport {
    pub frames: u64,
    /// Mean achieved vision frame rate.
    pub fps: f64,
    pub note_ons: u64,
    pub audio_blocks: u64,
    /// Audio blocks that were not ready by the time a device with an
    /// [`OUTPUT_BUFFER_BLOCKS`]-deep buffer would have started playing them.
    pub underruns: u64,
    /// Latest completion of any audio block relative to its own playback slot.
    pub worst_block_lag: Duration,
    /// UI frames dropped because the service stage was busy.
    pub dropped_frames: u64,
}

struct VisionReport {
    frames: u64,
    fps: f64,
    note_ons: u64,
    dropped: u64,
}

/// Frame rate over a sliding window of recent frame times.
struct FpsMeter {
    times: VecDeque<Instant>,
}

impl FpsMeter {
    fn new() -> Self {
        Self { times: VecDeque::with_capacity(32) }
    }

    fn tick(&mut self, now: Instant) -> f64 {
        self.times.push_back(now);
        if self.times.len() > 31 {
            self.times.pop_front();
        }
        match (self.times.front(), self.times.back()) {
            (Some(a), Some(b)) if self.times.len() > 1 && b > a => (self.times.len() - 1) as f64 / (*b - *a).as_secs_f64(),
            _ => 0.0,
        }
    }
}

pub fn run_live(cfg: &SessionConfig, opts: LiveOptions) -> crate::Result<LiveReport> {
    cfg.validate()?;
    let source = open_source(&cfg.source)?;
    let mut pipeline = VisionPipeline::new(cfg)?;
    let synth = Synth::new(cfg.synth.clone())?;
    let fps = cfg.fps();
    let midi = cfg.midi_out.as_ref().map(|o| open_midi(o, fps)).transpose()?;
    let audio_out = cfg.audio_out.as_ref().map(|o| open_audio(o, cfg.synth.sample_rate)).transpose()?;

    let (event_tx, event_rx) = unbounded::<MidiEvent>();
    let (frame_tx, frame_rx) = bounded::<FrameUpdate>(2);
    let (vision_ctl_tx, vision_ctl_rx) = unbounded::<VisionControl>();
    let (audio_ctl_tx, audio_ctl_rx) = unbounded::<AudioControl>();

    let service = match cfg.serve_port {
        Some(port) => {
            let status = initial_status(&cfg.synth, cfg.events.midi_enabled, cfg.events.threshold);
            let s = Service::bind(port, status, cfg.synth.sample_rate, vision_ctl_tx.clone(), audio_ctl_tx.clone())?;
            log::info!("serving ui protocol on ws://{}", s.local_addr());
            Some(s)
        }
        None => None,
    };
    let serving = service.is_some();
    let stop = opts.stop.clone();

    let vision = {
        let stop = stop.clone();
        thread::Builder::new().name("vision".into()).spawn(move || -> crate::Result<VisionReport> {
            let live = source.is_live();
            let mut pacer = Pacer::new(fps);
            let mut meter = FpsMeter::new();
            let start = Instant::now();
            let mut report = VisionReport { frames: 0, fps: 0.0, note_ons: 0, dropped: 0 };
            for frame in source {
                if stop.load(Ordering::Relaxed) || opts.max_frames.is_some_and(|m| report.frames >= m) {
                    break;
                }
                if !live {
                    pacer.wait();
                }
                for c in vision_ctl_rx.try_iter() {
                    match c {
                        VisionControl::SetMidi(on) => pipeline.set_midi_enabled(on),
                        VisionControl::SetThreshold(v) => pipeline.set_threshold(v),
                    }
                }
                let frame = frame?;
                let out = pipeline.process(frame)?;
                report.note_ons += out.events.iter().filter(|e| e.is_on()).count() as u64;
                for e in out.events {
                    // the audio stage outlives us unless stopping
                    let _ = event_tx.send(e);
                }
                let now_fps = meter.tick(Instant::now());
                if serving {
                    let frame = pipeline.last_frame().cloned().expect("frame just processed");
                    match frame_tx.try_send(FrameUpdate { frame, overlay: out.overlay, fps: now_fps }) {
                        Ok(()) => {}
                        Err(TrySendError::Full(_)) => report.dropped += 1,
                        Err(TrySendError::Disconnected(_)) => {}
                    }
                }
                report.frames += 1;
            }
            for e in pipeline.flush() {
                let _ = event_tx.send(e);
            }
            let secs = start.elapsed().as_secs_f64();
            report.fps = if secs > 0.0 { report.frames as f64 / secs } else { 0.0 };
            Ok(report)
        })
    }
    .map_err(|e| SessionError::Stage(e.to_string()))?;

    let audio = {
        let stop = stop.clone();
        let rate = cfg.synth.sample_rate;
        let block = cfg.synth.block_size;
        let release = cfg.synth.adsr.release_s;
        thread::Builder::new()
            .name("audio".into())
            .spawn(move || audio_stage(synth, midi, audio_out, event_rx, audio_ctl_rx, stop, rate, block, release))
            .map_err(|e| SessionError::Stage(e.to_string()))?
    };

    let service_thread = match service {
        Some(mut s) => {
            let stop = stop.clone();
            Some(
                thread::Builder::new()
                    .name("service".into())
                    .spawn(move || loop {
                        match frame_rx.recv_timeout(Duration::from_millis(5)) {
                            Ok(update) => s.poll(Some(update)),
                            Err(RecvTimeoutError::Timeout) => s.poll(None),
                            Err(RecvTimeoutError::Disconnected) => break,
                        }
                        if stop.load(Ordering::Relaxed) {
                            break;
                        }
                    })
                    .map_err(|e| SessionError::Stage(e.to_string()))?,
            )
        }
        None => None,
    };
    drop(vision_ctl_tx);
    drop(audio_ctl_tx);

    let joined = |name: &str| SessionError::Stage(format!("{name} stage panicked"));
    let vision_result = vision.join().map_err(|_| joined("vision"))?;
    if vision_result.is_err() {
        stop.store(true, Ordering::Relaxed);
    }
    let audio_result = audio.join().map_err(|_| joined("audio"))?;
    stop.store(true, Ordering::Relaxed);
    if let Some(t) = service_thread {
        t.join().map_err(|_| joined("service"))?;
    }
    let v = vision_result?;
    let (blocks, underruns, worst_block_lag) = audio_result?;
    Ok(LiveReport {
        frames: v.frames,
        fps: v.fps,
        note_ons: v.note_ons,
        audio_blocks: blocks,
        underruns,
        worst_block_lag,
        dropped_frames: v.dropped,
    })
}

#[allow(clippy::too_many_arguments)]
fn audio_stage(
    mut synth: Synth,
    mut midi: Option<Box<dyn crate::midi_io::MidiSink>>,
    mut sink: Option<Box<dyn crate::synth::AudioSink>>,
    events: Receiver<MidiEvent>,
    controls: Receiver<AudioControl>,
    stop: Arc<AtomicBool>,
    rate: u32,
    block: usize,
    release_s: f64,
) -> crate::Result<(u64, u64, Duration)> {
    let period = Duration::from_secs_f64(block as f64 / f64::from(rate));
    let mut buf = vec![[0.0f32; 2]; block];
    let start = Instant::now();
    let mut blocks = 0u64;
    let mut underruns = 0u64;
    let mut worst_lag = Duration::ZERO;
    let mut tail_blocks: Option<u64> = None;
    loop {
        for c in controls.try_iter() {
            match c {
                AudioControl::Mute(m) => synth.set_muted(m),
                AudioControl::Volume { channel, l, r } => synth.set_volume(channel, l, r)?,
                AudioControl::Delay(p) => synth.set_delay(p)?,
                AudioControl::Adsr(p) => synth.set_adsr(p)?,
                AudioControl::Sample(s) => synth.set_sample(s),
            }
        }
        loop {
            match events.try_recv() {
                Ok(e) => {
                    if let Some(m) = midi.as_mut() {
                        m.send(&e)?;
                    }
                    let now = synth.now();
                    synth.schedule(now, e)?;
                }
                Err(crossbeam_channel::TryRecvError::Empty) => break,
                Err(crossbeam_channel::TryRecvError::Disconnected) => {
                    // vision finished: play out the release tails, then stop
                    if tail_blocks.is_none() {
                        tail_blocks = Some((release_s * f64::from(rate) / block as f64).ceil() as u64 + 1);
                    }
                    break;
                }
            }
        }
        if stop.load(Ordering::Relaxed) || tail_blocks == Some(0) {
            break;
        }
        if let Some(t) = tail_blocks.as_mut() {
            *t -= 1;
        }

        synth.render_into(&mut buf);
        // the device starts draining after OUTPUT_BUFFER_BLOCKS periods and
        // consumes block k from then on; arriving later than that is an underrun
        let done = Instant::now();
        worst_lag = worst_lag.max(done.saturating_duration_since(start + period * blocks as u32));
        if done > start + period * (blocks as u32 + OUTPUT_BUFFER_BLOCKS) {
            underruns += 1;
        }
        if let Some(s) = sink.as_mut() {
            s.write(&buf)?;
        }
        blocks += 1;
        // pace to real time: block k is rendered from k periods after start
        let next_slot = start + period * blocks as u32;
        let now = Instant::now();
        if next_slot > now {
            thread::sleep(next_slot - now);
        }
    }
    if let Some(m) = midi.as_mut() {
        m.finish()?;
    }
    if let Some(s) = sink.as_mut() {
        s.finish()?;
    }
    Ok((blocks, underruns, worst_lag))
}
