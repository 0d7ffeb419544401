use sofa_core::face_detect::{bundled_cascade, detect, CascadeDetector, StaticDetector};
use sofa_core::frame_io::GrayFrame;
use sofa_core::session::bench::{drifting_face_frames, sample_face};
use sofa_core::{FaceDetector, Rect, ScanParams};

/// Hand annotation of the bundled portrait, drawn over a rendered copy.
fn annotated_face() -> Rect {
    let text = include_str!("../assets/frames/face_320x240.json");
    serde_json::from_str(text).unwrap()
}

#[test]
fn bundled_cascade_finds_the_annotated_face() {
    let cascade = bundled_cascade().unwrap();
    let roi = detect(&sample_face(), &cascade, &ScanParams::default()).unwrap().expect("face");
    let iou = roi.rect.iou(&annotated_face());
    assert!(iou >= 0.5, "detected {:?}, IoU {iou:.3}", roi.rect);
    assert!(roi.width() >= 80);
}

#[test]
fn face_is_tracked_while_it_drifts() {
    let mut det = CascadeDetector::new(bundled_cascade().unwrap(), ScanParams::default()).unwrap();
    let found = drifting_face_frames(20).iter().filter(|f| det.detect(f).unwrap().is_some()).count();
    assert_eq!(found, 20);
}

#[test]
fn blank_and_noise_frames_have_no_face() {
    let mut det = CascadeDetector::new(bundled_cascade().unwrap(), ScanParams::default()).unwrap();
    assert!(det.detect(&GrayFrame::filled(320, 240, 128, 0)).unwrap().is_none());
    let mut state = 0x2545_f491u32;
    let noise = GrayFrame::from_fn(320, 240, 1, |_, _| {
        state ^= state << 13;
        state ^= state >> 17;
        state ^= state << 5;
        (state >> 24) as u8
    });
    assert!(det.detect(&noise).unwrap().is_none());
}

#[test]
fn min_face_width_filters_small_faces() {
    let cascade = bundled_cascade().unwrap();
    let params = ScanParams { min_face_width: 200, ..Default::default() };
    assert!(detect(&sample_face(), &cascade, &params).unwrap().is_none());
}

#[test]
fn static_sidecar_follows_frame_numbers() {
    let mut det = StaticDetector::Sidecar(vec![Some(Rect::new(1, 2, 90, 90)), None]);
    assert_eq!(det.detect(&GrayFrame::filled(320, 240, 0, 0)).unwrap().unwrap().rect, Rect::new(1, 2, 90, 90));
    assert!(det.detect(&GrayFrame::filled(320, 240, 0, 1)).unwrap().is_none());
}
