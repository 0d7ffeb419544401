use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::Ordering;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use sofa_core::face_detect::{Cascade, ScanParams};
use sofa_core::frame_io::{open_source, SourceKind, SourceSpec};
use sofa_core::midi_io::list_ports;
use sofa_core::session::bench::{bench_vision, drifting_face_frames};
use sofa_core::session::{run_live, run_offline, AudioOut, DetectorConfig, LiveOptions, MidiOut, SessionConfig};
use sofa_core::Rect;

#[derive(Parser)]
#[command(name = "sofa", version, about = "Facial-movement sonification engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline on a camera or a file source.
    Run(RunArgs),
    /// Cascade utilities.
    #[command(subcommand)]
    Cascade(CascadeCommand),
    /// Throughput harnesses.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Print the full default configuration as JSON.
    Config,
    /// List raw MIDI output devices.
    Ports,
}

#[derive(Args)]
struct RunArgs {
    /// JSON session config; every field is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Real-time run with pacing, audio output and the UI endpoint.
    #[arg(long, conflicts_with = "offline")]
    live: bool,
    /// Process the whole file source as fast as possible (default for files).
    #[arg(long)]
    offline: bool,
    /// PGM directory, .y4m file, or camera:<index>.
    #[arg(long)]
    input: Option<String>,
    /// smf:<path> or port:<name>.
    #[arg(long)]
    midi_out: Option<MidiOut>,
    /// Offline audio render, wav:<path>.
    #[arg(long)]
    render: Option<AudioOut>,
    /// Audio output for live runs: pipe:<command>, wav:<path> or null.
    #[arg(long)]
    audio_out: Option<AudioOut>,
    /// Serve the UI protocol on this port.
    #[arg(long)]
    serve: Option<u16>,
    /// Use a fixed face rectangle instead of the detector.
    #[arg(long, value_name = "X,Y,W,H")]
    static_roi: Option<Rect>,
    /// Frame rate of the source and of MIDI timestamps.
    #[arg(long)]
    fps: Option<f64>,
    /// Stop a live run after this many frames.
    #[arg(long)]
    max_frames: Option<u64>,
}

#[derive(Subcommand)]
enum CascadeCommand {
    /// Convert an OpenCV Haar cascade XML into the native JSON format.
    Import {
        xml: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Time the vision stage (flow, smoothing, detection, zones, events).
    Flow {
        #[arg(long, default_value_t = 300)]
        frames: usize,
        /// Frame source; a drifting bundled portrait when omitted.
        #[arg(long)]
        input: Option<String>,
        #[arg(long, default_value_t = 80)]
        min_face: u32,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn parse_input(s: &str) -> anyhow::Result<SourceKind> {
    if let Some(idx) = s.strip_prefix("camera:") {
        return Ok(SourceKind::Camera(idx.parse().with_context(|| format!("camera index `{idx}`"))?));
    }
    let path = PathBuf::from(s);
    if path.is_dir() {
        Ok(SourceKind::PgmDir(path))
    } else if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("y4m")) {
        Ok(SourceKind::Y4m(path))
    } else {
        bail!("input `{s}`: expected a directory of .pgm files, a .y4m file, or camera:<index>")
    }
}

fn load_config(path: Option<&Path>) -> anyhow::Result<SessionConfig> {
    Ok(match path {
        Some(p) => SessionConfig::load(p)?,
        None => SessionConfig::default(),
    })
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(input) = &args.input {
        cfg.source.kind = parse_input(input)?;
    }
    if let Some(fps) = args.fps {
        cfg.source.target_fps = fps;
    }
    if let Some(m) = args.midi_out {
        cfg.midi_out = Some(m);
    }
    if let Some(rect) = args.static_roi {
        cfg.detector = DetectorConfig::Static { rect: Some(rect), sidecar: None };
    }
    if args.serve.is_some() {
        cfg.serve_port = args.serve;
    }
    let is_camera = matches!(cfg.source.kind, SourceKind::Camera(_));
    let live = args.live || (is_camera && !args.offline);
    if live {
        if args.render.is_some() {
            bail!("--render is for offline runs; use --audio-out for live audio");
        }
        if let Some(a) = args.audio_out {
            cfg.audio_out = Some(a);
        }
        let opts = LiveOptions { max_frames: args.max_frames, ..Default::default() };
        let stop = opts.stop.clone();
        ctrlc::set_handler(move || stop.store(true, Ordering::Relaxed)).context("installing interrupt handler")?;
        let r = run_live(&cfg, opts)?;
        println!(
            "frames: {}  fps: {:.2}  note-ons: {}  audio blocks: {}  underruns: {}  worst block lag: {:.1} ms  ui frames dropped: {}",
            r.frames,
            r.fps,
            r.note_ons,
            r.audio_blocks,
            r.underruns,
            r.worst_block_lag.as_secs_f64() * 1000.0,
            r.dropped_frames
        );
    } else {
        if is_camera {
            bail!("offline runs need a file source (--input)");
        }
        if args.audio_out.is_some() {
            bail!("--audio-out is for live runs; use --render wav:<path> offline");
        }
        match args.render {
            Some(AudioOut::Wav(p)) => cfg.audio_out = Some(AudioOut::Wav(p)),
            Some(other) => bail!("--render expects wav:<path>, got {other}"),
            None => {}
        }
        let r = run_offline(&cfg)?;
        let ons = r.events.iter().filter(|e| e.is_on()).count();
        println!("frames: {}  note-ons: {}  note-offs: {}  audio frames: {}", r.frames, ons, r.events.len() - ons, r.audio_frames);
    }
    Ok(())
}

fn bench_flow(frames: usize, input: Option<String>, min_face: u32, config: Option<PathBuf>) -> anyhow::Result<()> {
    let mut cfg = load_config(config.as_deref())?;
    cfg.detector = match cfg.detector {
        DetectorConfig::Cascade { path, scan } => DetectorConfig::Cascade { path, scan: ScanParams { min_face_width: min_face, ..scan } },
        static_detector => static_detector,
    };
    let list = match input {
        Some(s) => {
            let spec = SourceSpec::new(parse_input(&s)?);
            open_source(&spec)?.take(frames).collect::<Result<Vec<_>, _>>()?
        }
        None => drifting_face_frames(frames),
    };
    let r = bench_vision(&cfg, list)?;
    println!(
        "vision stage: {:.2} ms/frame over {} frames ({:.1} fps; face found in {} frames; {} note-ons)",
        r.ms_per_frame(),
        r.frames,
        1000.0 / r.ms_per_frame(),
        r.faces,
        r.note_ons
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Cascade(CascadeCommand::Import { xml, output }) => Cascade::load(&xml)
            .and_then(|c| {
                c.save(&output)?;
                Ok(c)
            })
            .map(|c| println!("imported {} stages, {} weak classifiers -> {}", c.stages.len(), c.weak_count(), output.display()))
            .map_err(|e| sofa_core::Error::from(e).into()),
        Command::Bench(BenchCommand::Flow { frames, input, min_face, config }) => bench_flow(frames, input, min_face, config),
        Command::Config => {
            println!("{}", SessionConfig::default().to_json());
            Ok(())
        }
        Command::Ports => {
            let ports = list_ports();
            if ports.is_empty() {
                println!("no MIDI devices found");
            }
            for (i, p) in ports.iter().enumerate() {
                println!("{i}: {}", p.display());
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
