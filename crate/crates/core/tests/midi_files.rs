mod common;

use midly::{MetaMessage, MidiMessage, Smf, Timing, TrackEventKind};
use proptest::prelude::*;
use sofa_core::midi_io::smf_bytes;
use sofa_core::session::{run_offline, DetectorConfig, MidiOut, SessionConfig};
use sofa_core::{MidiEvent, NoteKind, SourceKind, SourceSpec};

/// Decodes an SMF with an independent parser into (absolute tick, event).
fn decode(bytes: &[u8]) -> (u16, Vec<(u64, u8, MidiMessage)>, Vec<String>) {
    let smf = Smf::parse(bytes).expect("valid SMF");
    assert_eq!(smf.header.format, midly::Format::SingleTrack);
    let Timing::Metrical(division) = smf.header.timing else { panic!("timecode timing") };
    assert_eq!(smf.tracks.len(), 1);
    let mut tick = 0u64;
    let (mut notes, mut text) = (Vec::new(), Vec::new());
    let mut tempo = None;
    for ev in &smf.tracks[0] {
        tick += u64::from(u32::from(ev.delta));
        match ev.kind {
            TrackEventKind::Midi { channel, message } => notes.push((tick, u8::from(channel), message)),
            TrackEventKind::Meta(MetaMessage::Tempo(t)) => tempo = Some(u32::from(t)),
            TrackEventKind::Meta(MetaMessage::Text(t)) => text.push(String::from_utf8_lossy(t).into_owned()),
            _ => {}
        }
    }
    assert_eq!(tempo, Some(500_000));
    (division.as_int(), notes, text)
}

#[test]
fn mouth_sequence_smf_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    std::fs::create_dir(&frames).unwrap();
    common::write_frames(&frames, &common::mouth_shift_frames());
    let mid = dir.path().join("out.mid");
    let cfg = SessionConfig {
        source: SourceSpec::new(SourceKind::PgmDir(frames)),
        detector: DetectorConfig::Static { rect: Some(common::MOUTH_ROI), sidecar: None },
        midi_out: Some(MidiOut::Smf(mid.clone())),
        ..Default::default()
    };
    let report = run_offline(&cfg).unwrap();
    assert_eq!(report.frames, 30);
    let (division, notes, text) = decode(&std::fs::read(&mid).unwrap());
    assert_eq!(division, 480);
    assert_eq!(text, vec!["fps=15".to_string()]);
    assert_eq!(notes.len(), 2);
    // channel 7 is wire channel 6; 64 ticks per frame at 15 fps
    assert_eq!(notes[0].0, 640);
    assert_eq!(notes[0].1, 6);
    assert!(matches!(notes[0].2, MidiMessage::NoteOn { key, vel } if key == 52 && vel == 30));
    assert_eq!(notes[1].0, 896);
    assert!(matches!(notes[1].2, MidiMessage::NoteOff { key, vel } if key == 52 && vel == 0));
}

#[test]
fn static_scene_gives_empty_track() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    std::fs::create_dir(&frames).unwrap();
    let still: Vec<_> = common::mouth_shift_frames().into_iter().take(1).collect();
    let copies: Vec<_> = (0..30).map(|no| still[0].clone().with_frame_no(no)).collect();
    common::write_frames(&frames, &copies);
    let mid = dir.path().join("still.mid");
    let cfg = SessionConfig {
        source: SourceSpec::new(SourceKind::PgmDir(frames)),
        detector: DetectorConfig::Static { rect: Some(common::MOUTH_ROI), sidecar: None },
        midi_out: Some(MidiOut::Smf(mid.clone())),
        ..Default::default()
    };
    let report = run_offline(&cfg).unwrap();
    assert!(report.events.is_empty());
    let (_, notes, _) = decode(&std::fs::read(&mid).unwrap());
    assert!(notes.is_empty());
}

fn arb_events() -> impl Strategy<Value = Vec<MidiEvent>> {
    prop::collection::vec((0u64..50, 1u8..=16, 0u8..128, 1u8..128, any::<bool>()), 0..200).prop_map(|mut raw| {
        raw.sort_by_key(|r| r.0);
        let mut frame = 0;
        raw.into_iter()
            .map(|(step, ch, p, v, on)| {
                frame += step;
                if on {
                    MidiEvent::note_on(ch, p, v, frame)
                } else {
                    MidiEvent::note_off(ch, p, frame)
                }
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn smf_round_trips_through_midly(events in arb_events(), fps in prop::sample::select(vec![10.0, 15.0, 24.0, 30.0])) {
        let bytes = smf_bytes(&events, fps).unwrap();
        let (division, notes, _) = decode(&bytes);
        prop_assert_eq!(division, 480);
        prop_assert_eq!(notes.len(), events.len());
        for (e, (tick, ch, msg)) in events.iter().zip(&notes) {
            let want_tick = (e.frame_no as f64 * 960.0 / fps).round() as u64;
            prop_assert_eq!(*tick, want_tick);
            prop_assert_eq!(*ch, e.channel - 1);
            match (e.kind, msg) {
                (NoteKind::NoteOn, MidiMessage::NoteOn { key, vel }) => {
                    prop_assert_eq!(u8::from(*key), e.pitch);
                    prop_assert_eq!(u8::from(*vel), e.velocity);
                }
                (NoteKind::NoteOff, MidiMessage::NoteOff { key, vel }) => {
                    prop_assert_eq!(u8::from(*key), e.pitch);
                    prop_assert_eq!(u8::from(*vel), 0);
                }
                other => prop_assert!(false, "kind mismatch {:?}", other),
            }
        }
    }
}
