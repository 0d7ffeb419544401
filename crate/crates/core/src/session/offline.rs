use crate::event_engine::MidiEvent;
use crate::frame_io::open_source;
use crate::midi_io::{open_port, MidiSink, SmfSink};
use crate::synth::{AudioSink, NullSink, PipeSink, Synth, WavSink};

use super::{AudioOut, MidiOut, SessionConfig, SessionError, VisionPipeline};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OfflineReport {
    pub frames: u64,
    pub events: Vec<MidiEvent>,
    pub audio_frames: u64,
}

/// Audio sample at which an event stamped with `frame_no` sounds.
pub fn frame_to_sample(frame_no: u64, fps: f64, rate: u32) -> u64 {
    (frame_no as f64 / fps * f64::from(rate)).round() as u64
}

pub(crate) fn open_midi(out: &MidiOut, fps: f64) -> crate::Result<Box<dyn MidiSink>> {
    Ok(match out {
        MidiOut::Smf(path) => Box::new(SmfSink::new(path.clone(), fps)),
        MidiOut::Port(name) => Box::new(open_port(name)?),
    })
}

pub(crate) fn open_audio(out: &AudioOut, rate: u32) -> crate::Result<Box<dyn AudioSink>> {
    Ok(match out {
        AudioOut::Wav(path) => Box::new(WavSink::create(path, rate)?),
        AudioOut::Pipe(cmd) => Box::new(PipeSink::spawn(cmd)?),
        AudioOut::Null => Box::new(NullSink::default()),
    })
}

/// Consumes the whole (file) source as fast as possible, then writes the
/// MIDI file and/or the rendered audio. Output depends only on the inputs.
pub fn run_offline(cfg: &SessionConfig) -> crate::Result<OfflineReport> {
    cfg.validate()?;
    let source = open_source(&cfg.source)?;
    if source.is_live() {
        return Err(SessionError::Config("offline runs need a file source".into()).into());
    }
    let mut pipeline = VisionPipeline::new(cfg)?;
    run_offline_with(cfg, source, &mut pipeline)
}

/// [`run_offline`] over any frame iterator and a prepared pipeline.
pub fn run_offline_with<I>(cfg: &SessionConfig, frames: I, pipeline: &mut VisionPipeline) -> crate::Result<OfflineReport>
where
    I: IntoIterator<Item = Result<crate::frame_io::GrayFrame, crate::frame_io::FrameError>>,
{
    let fps = cfg.fps();
    let rate = cfg.synth.sample_rate;
    let block = cfg.synth.block_size;
    let mut midi = cfg.midi_out.as_ref().map(|o| open_midi(o, fps)).transpose()?;
    let mut audio = match &cfg.audio_out {
        Some(out) => Some((Synth::new(cfg.synth.clone())?, open_audio(out, rate)?)),
        None => None,
    };

    let mut report = OfflineReport::default();
    let mut buf = vec![[0.0f32; 2]; block];
    let mut emit = |events: &[MidiEvent], report: &mut OfflineReport| -> crate::Result<()> {
        for e in events {
            if let Some(m) = midi.as_mut() {
                m.send(e)?;
            }
            if let Some((synth, _)) = audio.as_mut() {
                synth.schedule(frame_to_sample(e.frame_no, fps, rate), *e)?;
            }
            report.events.push(*e);
        }
        Ok(())
    };

    for frame in frames {
        let out = pipeline.process(frame?)?;
        emit(&out.events, &mut report)?;
        report.frames += 1;
    }
    emit(&pipeline.flush(), &mut report)?;

    if let Some(m) = midi.as_mut() {
        m.finish()?;
    }
    if let Some((mut synth, mut sink)) = audio.take() {
        let last_frame = report.events.iter().map(|e| e.frame_no).max().unwrap_or(0).max(report.frames);
        let tail = (cfg.synth.adsr.release_s * f64::from(rate)).ceil() as u64;
        let total = frame_to_sample(last_frame, fps, rate) + tail;
        let mut left = total;
        while left > 0 {
            let n = left.min(block as u64) as usize;
            synth.render_into(&mut buf[..n]);
            sink.write(&buf[..n])?;
            left -= n as u64;
        }
        sink.finish()?;
        report.audio_frames = total;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_sample_mapping() {
        assert_eq!(frame_to_sample(0, 15.0, 44100), 0);
        assert_eq!(frame_to_sample(1, 15.0, 44100), 2940);
        assert_eq!(frame_to_sample(10, 15.0, 44100), 29400);
        assert_eq!(frame_to_sample(1, 30.0, 44100), 1470);
        assert_eq!(frame_to_sample(1, 7.0, 44100), 6300);
    }
}
