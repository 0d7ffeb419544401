use std::io::{Read, Seek};
use std::path::Path;
use std::sync::Arc;

use super::SynthError;
use crate::zone_map::ZoneGroup;

/// Mono PCM sample at the engine rate, peak-normalized to 1.0.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub group: ZoneGroup,
    pub frames: Arc<[f32]>,
    pub source: String,
}

impl Sample {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn peak(&self) -> f32 {
        self.frames.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }
}

pub fn load_sample(path: &Path, group: ZoneGroup, engine_rate: u32) -> Result<Sample, SynthError> {
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => SynthError::Io(io),
        other => SynthError::FormatError(format!("{}: {other}", path.display())),
    })?;
    decode(reader, group, engine_rate, path.display().to_string())
}

pub fn load_sample_bytes(bytes: &[u8], group: ZoneGroup, engine_rate: u32, source: &str) -> Result<Sample, SynthError> {
    let reader = hound::WavReader::new(std::io::Cursor::new(bytes))
        .map_err(|e| SynthError::FormatError(format!("{source}: {e}")))?;
    decode(reader, group, engine_rate, source.to_owned())
}

fn decode<R: Read + Seek>(reader: hound::WavReader<R>, group: ZoneGroup, engine_rate: u32, source: String) -> Result<Sample, SynthError> {
    let spec = reader.spec();
    let bad = |m: String| Err(SynthError::FormatError(format!("{source}: {m}")));
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return bad(format!("need 16-bit PCM, got {:?} {}-bit", spec.sample_format, spec.bits_per_sample));
    }
    if spec.sample_rate != engine_rate {
        return bad(format!("sample rate {} Hz, engine runs at {engine_rate} Hz", spec.sample_rate));
    }
    if !(1..=2).contains(&spec.channels) {
        return bad(format!("{} channels (need mono or stereo)", spec.channels));
    }
    let raw: Vec<i16> = reader
        .into_samples::<i16>()
        .collect::<Result<_, _>>()
        .map_err(|e| SynthError::FormatError(format!("{source}: {e}")))?;
    let channels = usize::from(spec.channels);
    let mut frames: Vec<f32> = raw
        .chunks_exact(channels)
        .map(|c| c.iter().map(|&s| f32::from(s) / 32768.0).sum::<f32>() / channels as f32)
        .collect();
    if frames.is_empty() {
        return bad("no audio frames".into());
    }
    let peak = frames.iter().fold(0.0f32, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        for v in &mut frames {
            *v /= peak;
        }
    }
    Ok(Sample { group, frames: frames.into(), source })
}

const DEFAULT_WAVS: [(&str, &[u8]); 4] = [
    ("builtin:brow.wav", include_bytes!("../../assets/samples/brow.wav")),
    ("builtin:eye.wav", include_bytes!("../../assets/samples/eye.wav")),
    ("builtin:cheek.wav", include_bytes!("../../assets/samples/cheek.wav")),
    ("builtin:mouth.wav", include_bytes!("../../assets/samples/mouth.wav")),
];

/// The bundled percussive set, one per zone group.
pub fn default_samples(engine_rate: u32) -> Result<[Sample; 4], SynthError> {
    let load = |g: ZoneGroup| {
        let (name, bytes) = DEFAULT_WAVS[g.index()];
        load_sample_bytes(bytes, g, engine_rate, name)
    };
    Ok([load(ZoneGroup::Brow)?, load(ZoneGroup::Eye)?, load(ZoneGroup::Cheek)?, load(ZoneGroup::Mouth)?])
}
