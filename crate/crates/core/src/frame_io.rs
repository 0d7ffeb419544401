//! Frame acquisition: deterministic file sources (Y4M, numbered PGM
//! directories) and a camera source, all normalized to 8-bit luma at
//! 320x240.

use std::fs::File;
use std::io::{self, BufReader, Read};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdout, Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FRAME_WIDTH: usize = 320;
pub const FRAME_HEIGHT: usize = 240;
pub const DEFAULT_FPS: f64 = 15.0;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("source unavailable: {0}")]
    SourceUnavailable(String),
    #[error("format error in {path}: {reason}")]
    FormatError { path: String, reason: String },
    #[error("pixel buffer of {len} bytes does not match {width}x{height}")]
    BadBuffer { width: usize, height: usize, len: usize },
    #[error("invalid source spec: {0}")]
    InvalidSpec(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

fn format_err(path: &Path, reason: impl Into<String>) -> FrameError {
    FrameError::FormatError { path: path.display().to_string(), reason: reason.into() }
}

/// Row-major 8-bit luma image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    frame_no: u64,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>, frame_no: u64) -> Result<Self, FrameError> {
        if pixels.len() != width * height {
            return Err(FrameError::BadBuffer { width, height, len: pixels.len() });
        }
        Ok(Self { width, height, pixels, frame_no })
    }

    pub fn filled(width: usize, height: usize, value: u8, frame_no: u64) -> Self {
        Self { width, height, pixels: vec![value; width * height], frame_no }
    }

    /// Builds a frame by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(width: usize, height: usize, frame_no: u64, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self { width, height, pixels, frame_no }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frame_no(&self) -> u64 {
        self.frame_no
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[u8] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    pub fn with_frame_no(mut self, frame_no: u64) -> Self {
        self.frame_no = frame_no;
        self
    }

    /// Nearest-neighbour resample to `width` x `height`.
    pub fn resize_nearest(&self, width: usize, height: usize) -> GrayFrame {
        if width == self.width && height == self.height {
            return self.clone();
        }
        GrayFrame::from_fn(width, height, self.frame_no, |x, y| {
            let sx = (x * self.width) / width;
            let sy = (y * self.height) / height;
            self.get(sx.min(self.width - 1), sy.min(self.height - 1))
        })
    }
}

/// BT.601 luma, rounded to nearest.
pub fn to_gray(r: u8, g: u8, b: u8) -> u8 {
    let weighted = 299 * u32::from(r) + 587 * u32::from(g) + 114 * u32::from(b);
    ((weighted + 500) / 1000).min(255) as u8
}

/// Converts packed RGB24 into a luma frame.
pub fn rgb_to_gray_frame(rgb: &[u8], width: usize, height: usize, frame_no: u64) -> Result<GrayFrame, FrameError> {
    if rgb.len() != width * height * 3 {
        return Err(FrameError::BadBuffer { width: width * 3, height, len: rgb.len() });
    }
    let pixels = rgb.chunks_exact(3).map(|p| to_gray(p[0], p[1], p[2])).collect();
    GrayFrame::new(width, height, pixels, frame_no)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Camera(u32),
    Y4m(PathBuf),
    PgmDir(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub kind: SourceKind,
    #[serde(default = "default_fps")]
    pub target_fps: f64,
}

fn default_fps() -> f64 {
    DEFAULT_FPS
}

impl SourceSpec {
    pub fn new(kind: SourceKind) -> Self {
        Self { kind, target_fps: DEFAULT_FPS }
    }

    pub fn validate(&self) -> Result<(), FrameError> {
        if !(self.target_fps > 0.0 && self.target_fps.is_finite()) {
            return Err(FrameError::InvalidSpec(format!("target_fps must be > 0, got {}", self.target_fps)));
        }
        Ok(())
    }
}

/// A sequence of frames, numbered from 0 and normalized to 320x240.
pub enum FrameSource {
    Y4m(Y4mSource),
    PgmDir(PgmDirSource),
    Camera(CameraSource),
}

pub fn open_source(spec: &SourceSpec) -> Result<FrameSource, FrameError> {
    spec.validate()?;
    match &spec.kind {
        SourceKind::Y4m(path) => Ok(FrameSource::Y4m(Y4mSource::open(path)?)),
        SourceKind::PgmDir(path) => Ok(FrameSource::PgmDir(PgmDirSource::open(path)?)),
        SourceKind::Camera(index) => Ok(FrameSource::Camera(CameraSource::open(*index, spec.target_fps)?)),
    }
}

impl FrameSource {
    /// Camera sources are paced by the device; file sources are not.
    pub fn is_live(&self) -> bool {
        matches!(self, FrameSource::Camera(_))
    }
}

impl Iterator for FrameSource {
    type Item = Result<GrayFrame, FrameError>;

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            FrameSource::Y4m(s) => s.next(),
            FrameSource::PgmDir(s) => s.next(),
            FrameSource::Camera(s) => s.next(),
        }
    }
}

fn normalize(frame: GrayFrame) -> GrayFrame {
    frame.resize_nearest(FRAME_WIDTH, FRAME_HEIGHT)
}

pub struct Y4mSource {
    path: PathBuf,
    decoder: y4m::Decoder<BufReader<File>>,
    next_no: u64,
    done: bool,
}

impl Y4mSource {
    pub fn open(path: &Path) -> Result<Self, FrameError> {
        let file = File::open(path)
            .map_err(|e| FrameError::SourceUnavailable(format!("{}: {e}", path.display())))?;
        let decoder = y4m::decode(BufReader::new(file)).map_err(|e| format_err(path, e.to_string()))?;
        if decoder.get_bit_depth() != 8 {
            return Err(format_err(path, format!("unsupported bit depth {}", decoder.get_bit_depth())));
        }
        Ok(Self { path: path.to_owned(), decoder, next_no: 0, done: false })
    }
}

impl Iterator for Y4mSource {
    type Item = Result<GrayFrame, FrameError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let (width, height) = (self.decoder.get_width(), self.decoder.get_height());
        match self.decoder.read_frame() {
            Ok(frame) => {
                let luma = frame.get_y_plane().to_vec();
                let no = self.next_no;
                self.next_no += 1;
                Some(GrayFrame::new(width, height, luma, no).map(normalize))
            }
            Err(y4m::Error::EOF) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(format_err(&self.path, e.to_string())))
            }
        }
    }
}

/// Directory of binary PGM files, read in lexicographic filename order.
pub struct PgmDirSource {
    files: Vec<PathBuf>,
    cursor: usize,
}

impl PgmDirSource {
    pub fn open(dir: &Path) -> Result<Self, FrameError> {
        let entries = std::fs::read_dir(dir)
            .map_err(|e| FrameError::SourceUnavailable(format!("{}: {e}", dir.display())))?;
        let mut files = Vec::new();
        for entry in entries {
            let path = entry?.path();
            let is_pgm = path.extension().is_some_and(|ext| ext.eq_ignore_ascii_case("pgm"));
            if is_pgm && path.is_file() {
                files.push(path);
            }
        }
        if files.is_empty() {
            return Err(FrameError::SourceUnavailable(format!("{}: no .pgm files", dir.display())));
        }
        files.sort();
        Ok(Self { files, cursor: 0 })
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }
}

impl Iterator for PgmDirSource {
    type Item = Result<GrayFrame, FrameError>;

    fn next(&mut self) -> Option<Self::Item> {
        let path = self.files.get(self.cursor)?;
        let no = self.cursor as u64;
        self.cursor += 1;
        Some(read_pgm(path).map(|f| normalize(f.with_frame_no(no))))
    }
}

/// Reads a binary (P5) PGM with maxval 255.
pub fn read_pgm(path: &Path) -> Result<GrayFrame, FrameError> {
    let bytes = std::fs::read(path)?;
    parse_pgm(&bytes).map_err(|reason| format_err(path, reason))
}

pub fn parse_pgm(bytes: &[u8]) -> Result<GrayFrame, String> {
    let mut pos = 0;
    let mut token = |bytes: &[u8]| -> Result<String, String> {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err("truncated header".into()),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            pos += 1;
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token(bytes)?;
    if magic != "P5" {
        return Err(format!("expected P5 magic, found {magic:?}"));
    }
    let mut number = |name: &str| -> Result<usize, String> {
        let t = token(bytes)?;
        t.parse::<usize>().map_err(|_| format!("bad {name} {t:?}"))
    };
    let width = number("width")?;
    let height = number("height")?;
    let maxval = number("maxval")?;
    if maxval != 255 {
        return Err(format!("maxval {maxval} unsupported (need 255)"));
    }
    // exactly one whitespace byte separates the header from the raster
    let data_start = pos + 1;
    let data = bytes.get(data_start..data_start + width * height).ok_or("truncated raster")?;
    GrayFrame::new(width, height, data.to_vec(), 0).map_err(|e| e.to_string())
}

pub fn encode_pgm(frame: &GrayFrame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend_from_slice(frame.pixels());
    out
}

pub fn write_pgm(path: &Path, frame: &GrayFrame) -> Result<(), FrameError> {
    std::fs::write(path, encode_pgm(frame))?;
    Ok(())
}

/// Writes frames as a 4:2:0 Y4M stream with neutral chroma.
pub fn write_y4m(path: &Path, frames: &[GrayFrame], fps: u32) -> Result<(), FrameError> {
    let first = frames.first().ok_or_else(|| FrameError::InvalidSpec("no frames to write".into()))?;
    let (w, h) = (first.width(), first.height());
    let file = io::BufWriter::new(File::create(path)?);
    let mut enc = y4m::encode(w, h, y4m::Ratio::new(fps as usize, 1))
        .with_colorspace(y4m::Colorspace::C420jpeg)
        .write_header(file)
        .map_err(|e| format_err(path, e.to_string()))?;
    let chroma = vec![128u8; w.div_ceil(2) * h.div_ceil(2)];
    for f in frames {
        let frame = y4m::Frame::new([f.pixels(), &chroma, &chroma], None);
        enc.write_frame(&frame).map_err(|e| format_err(path, e.to_string()))?;
    }
    Ok(())
}

/// V4L2 camera read through an `ffmpeg` child process emitting RGB24 at
/// 320x240 (nearest-neighbour scaled).
pub struct CameraSource {
    child: Child,
    stdout: ChildStdout,
    buf: Vec<u8>,
    next_no: u64,
}

impl CameraSource {
    pub fn open(index: u32, fps: f64) -> Result<Self, FrameError> {
        let device = format!("/dev/video{index}");
        if !Path::new(&device).exists() {
            return Err(FrameError::SourceUnavailable(format!("camera {device} not found")));
        }
        let scale = format!("scale={FRAME_WIDTH}:{FRAME_HEIGHT}:flags=neighbor");
        let mut child = Command::new("ffmpeg")
            .args(["-loglevel", "error", "-f", "v4l2", "-framerate"])
            .arg(format!("{fps}"))
            .args(["-i", &device, "-vf", &scale, "-pix_fmt", "rgb24", "-f", "rawvideo", "-"])
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| FrameError::SourceUnavailable(format!("cannot start ffmpeg for {device}: {e}")))?;
        let stdout = child.stdout.take().expect("stdout is piped");
        Ok(Self { child, stdout, buf: vec![0; FRAME_WIDTH * FRAME_HEIGHT * 3], next_no: 0 })
    }
}

impl Iterator for CameraSource {
    type Item = Result<GrayFrame, FrameError>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.stdout.read_exact(&mut self.buf) {
            Ok(()) => {
                let no = self.next_no;
                self.next_no += 1;
                Some(rgb_to_gray_frame(&self.buf, FRAME_WIDTH, FRAME_HEIGHT, no))
            }
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => None,
            Err(e) => Some(Err(e.into())),
        }
    }
}

impl Drop for CameraSource {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Wall-clock throttle used when a file source stands in for a camera.
pub struct Pacer {
    period: Duration,
    next_due: Option<Instant>,
}

impl Pacer {
    pub fn new(fps: f64) -> Self {
        Self { period: Duration::from_secs_f64(1.0 / fps), next_due: None }
    }

    /// Sleeps until the next frame slot. Falls back to the current time when
    /// running behind instead of bursting to catch up.
    pub fn wait(&mut self) {
        let now = Instant::now();
        let due = self.next_due.unwrap_or(now);
        if due > now {
            std::thread::sleep(due - now);
        }
        self.next_due = Some(due.max(now) + self.period);
    }
}
