use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sofa_core::face_detect::{Cascade, BUNDLED_CASCADE_XML};
use sofa_core::frame_io::{write_pgm, GrayFrame};
use sofa_core::session::SessionConfig;

fn sofa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sofa")).args(args).env("RUST_LOG", "warn").output().expect("spawn sofa")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Same sequence as the core crate's golden fixture: flat grey, one noise
/// patch that moves 2 px right at frame 10.
fn write_mouth_sequence(dir: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (px, py, pw, ph) = (120usize, 184usize, 40usize, 16usize);
    let texture: Vec<u8> = (0..pw * ph).map(|_| rng.gen()).collect();
    for no in 0..30u64 {
        let ox = if no >= 10 { px + 2 } else { px };
        let f = GrayFrame::from_fn(320, 240, no, |x, y| {
            if (ox..ox + pw).contains(&x) && (py..py + ph).contains(&y) {
                texture[(y - py) * pw + (x - ox)]
            } else {
                128
            }
        });
        write_pgm(&dir.join(format!("frame_{no:04}.pgm")), &f).unwrap();
    }
}

const GOLDEN_MID: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/tests/data/mouth_shift_golden.mid");

#[test]
fn config_prints_loadable_defaults() {
    let o = sofa(&["config"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cfg = SessionConfig::from_json(&stdout(&o)).unwrap();
    assert_eq!(cfg.to_json(), SessionConfig::default().to_json());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for key in ["source", "detector", "flow", "zones", "events", "synth"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn cascade_import_writes_native_json() {
    let dir = tempfile::tempdir().unwrap();
    let xml = dir.path().join("frontal.xml");
    std::fs::write(&xml, BUNDLED_CASCADE_XML).unwrap();
    let out = dir.path().join("frontal.json");
    let o = sofa(&["cascade", "import", xml.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("25 stages"), "{}", stdout(&o));
    let c = Cascade::load(&out).unwrap();
    assert_eq!(c.weak_count(), 2913);
}

#[test]
fn offline_run_reproduces_golden_smf_and_renders_audio() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    std::fs::create_dir(&frames).unwrap();
    write_mouth_sequence(&frames);
    let mid = dir.path().join("out.mid");
    let wav = dir.path().join("out.wav");
    let args = |m: &Path, w: &Path| {
        sofa(&[
            "run",
            "--offline",
            "--input",
            frames.to_str().unwrap(),
            "--static-roi",
            "40,0,240,240",
            "--midi-out",
            &format!("smf:{}", m.display()),
            "--render",
            &format!("wav:{}", w.display()),
        ])
    };
    let o = args(&mid, &wav);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("note-ons: 1"), "{}", stdout(&o));
    assert_eq!(std::fs::read(&mid).unwrap(), std::fs::read(GOLDEN_MID).unwrap());

    // a second run is byte-identical, audio included
    let (mid2, wav2) = (dir.path().join("again.mid"), dir.path().join("again.wav"));
    assert!(args(&mid2, &wav2).status.success());
    assert_eq!(std::fs::read(&mid2).unwrap(), std::fs::read(&mid).unwrap());
    let w1 = std::fs::read(&wav).unwrap();
    assert_eq!(std::fs::read(&wav2).unwrap(), w1);
    assert!(w1.len() > 44 && w1[44..].iter().any(|&b| b != 0));
}

#[test]
fn bad_input_fails_with_module_tag() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("frame_0000.pgm"), b"P5\n320 240\n255\nshort").unwrap();
    let o = sofa(&["run", "--offline", "--input", dir.path().to_str().unwrap(), "--static-roi", "0,0,320,240"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("frame-io:"), "{}", stderr(&o));

    let o = sofa(&["run", "--offline", "--input", "/nonexistent/clip.y4m"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("frame-io:"), "{}", stderr(&o));
}

#[test]
fn conflicting_flags_are_rejected() {
    let o = sofa(&["run", "--live", "--offline", "--input", "."]);
    assert!(!o.status.success());
    let dir = tempfile::tempdir().unwrap();
    let o = sofa(&["run", "--input", dir.path().to_str().unwrap(), "--audio-out", "null"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--audio-out"), "{}", stderr(&o));
    let o = sofa(&["run", "--input", dir.path().to_str().unwrap(), "--midi-out", "bogus"]);
    assert!(!o.status.success());
}

#[test]
fn invalid_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"synth": {"delay": {"time_s": 5.0}}}"#).unwrap();
    let o = sofa(&["run", "--config", cfg.to_str().unwrap(), "--input", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("delay"), "{}", stderr(&o));
}

#[test]
fn bench_flow_reports_ms_per_frame() {
    let o = sofa(&["bench", "flow", "--frames", "20"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("vision stage: ") && out.contains(" ms/frame over 20 frames"), "{out}");
}
