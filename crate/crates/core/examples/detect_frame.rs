//! Runs the bundled face detector on one PGM and prints raw hits and the pick.

use sofa_core::face_detect::{bundled_cascade, group_windows, CascadeDetector, FaceDetector, ScanParams};
use sofa_core::frame_io::read_pgm;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).ok_or("usage: detect_frame <file.pgm> [min_face]")?;
    let min_face: u32 = std::env::args().nth(2).map_or(Ok(80), |s| s.parse())?;
    let frame = read_pgm(path.as_ref())?;
    let params = ScanParams { min_face_width: min_face, ..Default::default() };
    let mut det = CascadeDetector::new(bundled_cascade()?, params)?;
    let hits = det.raw_hits(&frame);
    println!("{} raw hits", hits.len());
    for (r, n) in group_windows(&hits, params.group_iou, 1) {
        println!("cluster {r:?} x{n}");
    }
    println!("face: {:?}", det.detect(&frame)?);
    Ok(())
}
