//! Destinations for rendered stereo blocks.

use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, Command, Stdio};

use super::SynthError;

pub trait AudioSink: Send {
    fn write(&mut self, block: &[[f32; 2]]) -> Result<(), SynthError>;

    fn finish(&mut self) -> Result<(), SynthError> {
        Ok(())
    }
}

/// Float sample to 16-bit PCM (clipped, rounded).
pub fn to_i16(v: f32) -> i16 {
    (f64::from(v) * 32767.0).round().clamp(-32768.0, 32767.0) as i16
}

/// 16-bit stereo WAV file.
pub struct WavSink {
    writer: Option<hound::WavWriter<BufWriter<std::fs::File>>>,
}

impl WavSink {
    pub fn create(path: &Path, rate: u32) -> Result<Self, SynthError> {
        let spec = hound::WavSpec { channels: 2, sample_rate: rate, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
        let writer = hound::WavWriter::create(path, spec).map_err(hound_err)?;
        Ok(Self { writer: Some(writer) })
    }
}

fn hound_err(e: hound::Error) -> SynthError {
    match e {
        hound::Error::IoError(io) => SynthError::Io(io),
        other => SynthError::FormatError(other.to_string()),
    }
}

impl AudioSink for WavSink {
    fn write(&mut self, block: &[[f32; 2]]) -> Result<(), SynthError> {
        let w = self.writer.as_mut().ok_or_else(|| SynthError::InvalidParams("wav sink already finished".into()))?;
        for f in block {
            w.write_sample(to_i16(f[0])).map_err(hound_err)?;
            w.write_sample(to_i16(f[1])).map_err(hound_err)?;
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<(), SynthError> {
        if let Some(w) = self.writer.take() {
            w.finalize().map_err(hound_err)?;
        }
        Ok(())
    }
}

/// Interleaved s16le stereo on the stdin of a player command, e.g.
/// `aplay -q -f S16_LE -c 2 -r 44100`.
pub struct PipeSink {
    child: Child,
    stdin: Option<BufWriter<ChildStdin>>,
}

impl PipeSink {
    pub fn spawn(command: &str) -> Result<Self, SynthError> {
        let mut parts = command.split_whitespace();
        let program = parts.next().ok_or_else(|| SynthError::InvalidParams("empty audio command".into()))?;
        let mut child = Command::new(program).args(parts).stdin(Stdio::piped()).stdout(Stdio::null()).spawn()?;
        let stdin = child.stdin.take().map(BufWriter::new);
        Ok(Self { child, stdin })
    }
}

impl AudioSink for PipeSink {
    fn write(&mut self, block: &[[f32; 2]]) -> Result<(), SynthError> {
        let w = self.stdin.as_mut().ok_or_else(|| SynthError::InvalidParams("audio pipe closed".into()))?;
        let mut bytes = Vec::with_capacity(block.len() * 4);
        for f in block {
            bytes.extend_from_slice(&to_i16(f[0]).to_le_bytes());
            bytes.extend_from_slice(&to_i16(f[1]).to_le_bytes());
        }
        w.write_all(&bytes)?;
        w.flush()?;
        Ok(())
    }

    fn finish(&mut self) -> Result<(), SynthError> {
        drop(self.stdin.take());
        self.child.wait()?;
        Ok(())
    }
}

/// Discards audio; counts frames.
#[derive(Default)]
pub struct NullSink {
    pub frames: u64,
}

impl AudioSink for NullSink {
    fn write(&mut self, block: &[[f32; 2]]) -> Result<(), SynthError> {
        self.frames += block.len() as u64;
        Ok(())
    }
}
