use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sofa_core::{DelayParams, MidiEvent, Synth, SynthConfig};

fn loaded_synth(voices_per_strip: usize, delay: bool) -> Synth {
    let mut s = Synth::new(SynthConfig::default()).unwrap();
    if delay {
        s.set_delay(DelayParams { enabled: [true; 4], ..Default::default() }).unwrap();
    }
    for ch in 1..=7u8 {
        for k in 0..voices_per_strip {
            s.note_on(&MidiEvent::note_on(ch, 40 + k as u8, 100, 0)).unwrap();
        }
    }
    s
}

fn render_block(c: &mut Criterion) {
    let mut group = c.benchmark_group("render 256-sample block");
    for (voices, delay) in [(1, false), (16, false), (16, true)] {
        let mut s = loaded_synth(voices, delay);
        let mut buf = vec![[0.0f32; 2]; 256];
        let id = BenchmarkId::from_parameter(format!("{} voices, delay {}", voices * 7, if delay { "on" } else { "off" }));
        group.bench_function(id, |b| {
            b.iter(|| {
                s.render_into(&mut buf);
                // keep voices sounding instead of measuring an idle synth
                if s.total_voices() < voices * 7 {
                    s = loaded_synth(voices, delay);
                }
            })
        });
    }
    group.finish();
}

criterion_group!(benches, render_block);
criterion_main!(benches);
