//! MIDI output: channel-voice wire encoding, raw MIDI device ports, an
//! in-process loopback port, and type-0 Standard MIDI File writing.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crossbeam_channel::{Receiver, Sender};
use thiserror::Error;

use crate::event_engine::{MidiEvent, NoteKind};

#[derive(Debug, Error)]
pub enum MidiError {
    #[error("value out of range: {0}")]
    RangeError(String),
    #[error("MIDI port unavailable: {0}")]
    PortUnavailable(String),
    #[error("events are not sorted by frame ({prev} before {next})")]
    Unsorted { prev: u64, next: u64 },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// Ticks per quarter note.
pub const SMF_DIVISION: u16 = 480;
/// Microseconds per quarter note (120 bpm), so one second is 960 ticks.
pub const SMF_TEMPO_US: u32 = 500_000;
const TICKS_PER_SECOND: f64 = SMF_DIVISION as f64 * 1_000_000.0 / SMF_TEMPO_US as f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct WireMessage(pub [u8; 3]);

impl WireMessage {
    pub fn bytes(&self) -> &[u8; 3] {
        &self.0
    }
}

pub fn encode(e: &MidiEvent) -> Result<WireMessage, MidiError> {
    if !(1..=16).contains(&e.channel) {
        return Err(MidiError::RangeError(format!("channel {} not in 1..=16", e.channel)));
    }
    if e.pitch >= 128 {
        return Err(MidiError::RangeError(format!("pitch {}", e.pitch)));
    }
    let ch = e.channel - 1;
    Ok(match e.kind {
        NoteKind::NoteOn => {
            if e.velocity >= 128 {
                return Err(MidiError::RangeError(format!("velocity {}", e.velocity)));
            }
            WireMessage([0x90 | ch, e.pitch, e.velocity])
        }
        NoteKind::NoteOff => WireMessage([0x80 | ch, e.pitch, 0]),
    })
}

/// Anything that accepts MIDI events in order.
pub trait MidiSink: Send {
    fn send(&mut self, e: &MidiEvent) -> Result<(), MidiError>;

    /// Called once after the last event.
    fn finish(&mut self) -> Result<(), MidiError> {
        Ok(())
    }
}

/// Raw MIDI device (e.g. `/dev/snd/midiC1D0`) or the in-process loopback.
pub enum PortSink {
    Device { path: PathBuf, file: File },
    Loopback(Sender<(Instant, WireMessage)>),
}

/// Receiving end of [`loopback_port`].
pub struct LoopbackReceiver(Receiver<(Instant, WireMessage)>);

impl LoopbackReceiver {
    pub fn try_iter(&self) -> impl Iterator<Item = (Instant, WireMessage)> + '_ {
        self.0.try_iter()
    }

    pub fn recv(&self) -> Option<(Instant, WireMessage)> {
        self.0.recv().ok()
    }
}

pub fn loopback_port() -> (PortSink, LoopbackReceiver) {
    let (tx, rx) = crossbeam_channel::unbounded();
    (PortSink::Loopback(tx), LoopbackReceiver(rx))
}

/// Raw MIDI device nodes present on this machine, sorted.
pub fn list_ports() -> Vec<PathBuf> {
    let mut out = Vec::new();
    for dir in ["/dev/snd", "/dev"] {
        if let Ok(entries) = std::fs::read_dir(dir) {
            for entry in entries.flatten() {
                let name = entry.file_name();
                let name = name.to_string_lossy();
                if name.starts_with("midi") {
                    out.push(entry.path());
                }
            }
        }
    }
    out.sort();
    out
}

/// Opens a port by device path, by bare name under `/dev/snd`, or by index
/// into [`list_ports`].
pub fn open_port(name: &str) -> Result<PortSink, MidiError> {
    let path = if let Ok(index) = name.parse::<usize>() {
        list_ports()
            .get(index)
            .cloned()
            .ok_or_else(|| MidiError::PortUnavailable(format!("no MIDI port with index {index}")))?
    } else if name.contains('/') {
        PathBuf::from(name)
    } else {
        Path::new("/dev/snd").join(name)
    };
    let file = OpenOptions::new()
        .write(true)
        .open(&path)
        .map_err(|e| MidiError::PortUnavailable(format!("{}: {e}", path.display())))?;
    Ok(PortSink::Device { path, file })
}

impl MidiSink for PortSink {
    fn send(&mut self, e: &MidiEvent) -> Result<(), MidiError> {
        let msg = encode(e)?;
        match self {
            PortSink::Device { file, .. } => file.write_all(msg.bytes())?,
            PortSink::Loopback(tx) => tx
                .send((Instant::now(), msg))
                .map_err(|_| MidiError::PortUnavailable("loopback receiver dropped".into()))?,
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<(), MidiError> {
        if let PortSink::Device { file, .. } = self {
            file.flush()?;
        }
        Ok(())
    }
}

/// Frame index to SMF ticks at `fps`.
pub fn frame_to_tick(frame_no: u64, fps: f64) -> u64 {
    (frame_no as f64 / fps * TICKS_PER_SECOND).round() as u64
}

fn write_vlq(out: &mut Vec<u8>, mut v: u32) {
    let mut stack = [0u8; 5];
    let mut n = 0;
    loop {
        stack[n] = (v & 0x7f) as u8;
        n += 1;
        v >>= 7;
        if v == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        out.push(stack[i] | if i > 0 { 0x80 } else { 0 });
    }
}

/// Serializes `events` (sorted by frame) as a format-0 Standard MIDI File.
///
/// The track begins with a tempo meta event and a text meta event recording
/// the frame rate, followed by the channel messages and end-of-track.
pub fn smf_bytes(events: &[MidiEvent], fps: f64) -> Result<Vec<u8>, MidiError> {
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(MidiError::RangeError(format!("fps {fps}")));
    }
    let mut track = Vec::new();
    track.extend_from_slice(&[0x00, 0xff, 0x51, 0x03]);
    track.extend_from_slice(&SMF_TEMPO_US.to_be_bytes()[1..]);
    let text = format!("fps={fps}");
    track.extend_from_slice(&[0x00, 0xff, 0x01]);
    write_vlq(&mut track, text.len() as u32);
    track.extend_from_slice(text.as_bytes());

    let mut last_tick = 0u64;
    let mut last_frame = 0u64;
    for e in events {
        if e.frame_no < last_frame {
            return Err(MidiError::Unsorted { prev: last_frame, next: e.frame_no });
        }
        last_frame = e.frame_no;
        let tick = frame_to_tick(e.frame_no, fps);
        let delta = u32::try_from(tick - last_tick).map_err(|_| MidiError::RangeError("delta too large".into()))?;
        write_vlq(&mut track, delta);
        track.extend_from_slice(encode(e)?.bytes());
        last_tick = tick;
    }
    track.extend_from_slice(&[0x00, 0xff, 0x2f, 0x00]);

    let mut out = Vec::with_capacity(track.len() + 22);
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&SMF_DIVISION.to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(track.len() as u32).to_be_bytes());
    out.extend_from_slice(&track);
    Ok(out)
}

pub fn write_smf(events: &[MidiEvent], fps: f64, path: &Path) -> Result<(), MidiError> {
    let bytes = smf_bytes(events, fps)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Collects events and writes the SMF on [`MidiSink::finish`].
pub struct SmfSink {
    path: PathBuf,
    fps: f64,
    events: Vec<MidiEvent>,
}

impl SmfSink {
    pub fn new(path: impl Into<PathBuf>, fps: f64) -> Self {
        Self { path: path.into(), fps, events: Vec::new() }
    }

    pub fn events(&self) -> &[MidiEvent] {
        &self.events
    }
}

impl MidiSink for SmfSink {
    fn send(&mut self, e: &MidiEvent) -> Result<(), MidiError> {
        encode(e)?;
        self.events.push(*e);
        Ok(())
    }

    fn finish(&mut self) -> Result<(), MidiError> {
        write_smf(&self.events, self.fps, &self.path)
    }
}
