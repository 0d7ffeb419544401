//! Importer for the OpenCV `opencv-cascade-classifier` XML layout (BOOST
//! stages, HAAR features, depth-1 stumps), the format the freely available
//! pretrained frontal-face cascades ship in.

use roxmltree::{Document, Node};

use super::cascade::{Cascade, Stage, WeakClassifier, WeightedRect, WindowSize};
use super::DetectError;

fn fmt_err(msg: impl Into<String>) -> DetectError {
    DetectError::Format(msg.into())
}

fn child<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Result<Node<'a, 'i>, DetectError> {
    node.children()
        .find(|c| c.has_tag_name(name))
        .ok_or_else(|| fmt_err(format!("missing <{name}> in <{}>", node.tag_name().name())))
}

fn text_of<'a>(node: Node<'a, '_>, name: &str) -> Result<&'a str, DetectError> {
    Ok(child(node, name)?.text().unwrap_or("").trim())
}

fn numbers(text: &str) -> Result<Vec<f64>, DetectError> {
    text.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| fmt_err(format!("bad number {t:?}"))))
        .collect()
}

fn items<'a, 'i>(node: Node<'a, 'i>) -> impl Iterator<Item = Node<'a, 'i>> {
    node.children().filter(|c| c.has_tag_name("_"))
}

pub fn import_haar_xml(xml: &str) -> Result<Cascade, DetectError> {
    let doc = Document::parse(xml).map_err(|e| fmt_err(e.to_string()))?;
    let storage = doc.root_element();
    let cascade = storage
        .children()
        .find(|n| n.is_element() && n.attribute("type_id") == Some("opencv-cascade-classifier"))
        .ok_or_else(|| fmt_err("no opencv-cascade-classifier element (old-style cascades are not supported)"))?;

    let stage_type = text_of(cascade, "stageType")?;
    let feature_type = text_of(cascade, "featureType")?;
    if stage_type != "BOOST" || feature_type != "HAAR" {
        return Err(fmt_err(format!("unsupported cascade {stage_type}/{feature_type}")));
    }
    let width: u32 = text_of(cascade, "width")?.parse().map_err(|_| fmt_err("bad width"))?;
    let height: u32 = text_of(cascade, "height")?.parse().map_err(|_| fmt_err("bad height"))?;

    let mut features = Vec::new();
    for feature in items(child(cascade, "features")?) {
        if let Ok(t) = text_of(feature, "tilted") {
            if t != "0" {
                return Err(fmt_err("tilted features are not supported"));
            }
        }
        let mut rects = Vec::new();
        for r in items(child(feature, "rects")?) {
            let v = numbers(r.text().unwrap_or(""))?;
            let [x, y, w, h, weight] = v[..] else {
                return Err(fmt_err(format!("rect needs 5 numbers, got {}", v.len())));
            };
            if x < 0.0 || y < 0.0 || w < 0.0 || h < 0.0 {
                return Err(fmt_err("negative rect coordinate"));
            }
            rects.push(WeightedRect { x: x as u32, y: y as u32, w: w as u32, h: h as u32, weight });
        }
        features.push(rects);
    }

    let mut stages = Vec::new();
    for stage in items(child(cascade, "stages")?) {
        let threshold = numbers(text_of(stage, "stageThreshold")?)?
            .first()
            .copied()
            .ok_or_else(|| fmt_err("empty stageThreshold"))?;
        let mut weak = Vec::new();
        for wc in items(child(stage, "weakClassifiers")?) {
            let nodes = numbers(text_of(wc, "internalNodes")?)?;
            let leaves = numbers(text_of(wc, "leafValues")?)?;
            let ([_, _, feature_idx, node_threshold], [fail, pass]) = (&nodes[..], &leaves[..]) else {
                return Err(fmt_err("only depth-1 stumps are supported"));
            };
            let rects = features
                .get(*feature_idx as usize)
                .ok_or_else(|| fmt_err(format!("feature index {feature_idx} out of range")))?
                .clone();
            // OpenCV takes the left leaf when value < threshold
            weak.push(WeakClassifier { rects, node_threshold: *node_threshold, pass: *pass, fail: *fail });
        }
        stages.push(Stage { threshold, weak });
    }

    let cascade = Cascade { base_window: WindowSize { width, height }, norm_inset: 1, stages };
    cascade.validate()?;
    Ok(cascade)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = r#"<?xml version="1.0"?>
<opencv_storage>
<cascade type_id="opencv-cascade-classifier"><stageType>BOOST</stageType>
  <featureType>HAAR</featureType>
  <height>24</height>
  <width>24</width>
  <stageNum>1</stageNum>
  <stages>
    <_>
      <maxWeakCount>1</maxWeakCount>
      <stageThreshold>-5.0e-01</stageThreshold>
      <weakClassifiers>
        <_>
          <internalNodes>
            0 -1 0 -3.15e-02</internalNodes>
          <leafValues>
            2.0 -2.5</leafValues></_></weakClassifiers></_></stages>
  <features>
    <_>
      <rects>
        <_>
          6 4 12 9 -1.</_>
        <_>
          6 7 12 3 3.</_></rects></_></features></cascade>
</opencv_storage>
"#;

    #[test]
    fn imports_stump_cascade() {
        let c = import_haar_xml(TINY).unwrap();
        assert_eq!(c.base_window, WindowSize { width: 24, height: 24 });
        assert_eq!(c.norm_inset, 1);
        assert_eq!(c.stages.len(), 1);
        let wc = &c.stages[0].weak[0];
        assert_eq!(wc.rects.len(), 2);
        assert_eq!(wc.rects[1], WeightedRect { x: 6, y: 7, w: 12, h: 3, weight: 3.0 });
        assert_eq!((wc.fail, wc.pass), (2.0, -2.5));
        assert_eq!(wc.node_threshold, -3.15e-2);
        assert_eq!(c.stages[0].threshold, -0.5);
    }

    #[test]
    fn rejects_trees_and_garbage() {
        let tree = TINY.replace("0 -1 0 -3.15e-02", "1 -1 0 -3.15e-02 0 -2 0 0.1");
        assert!(import_haar_xml(&tree).is_err());
        assert!(import_haar_xml("<notxml").is_err());
        assert!(import_haar_xml(&TINY.replace("HAAR", "LBP")).is_err());
    }

    #[test]
    fn bundled_frontal_face_cascade() {
        let c = crate::face_detect::bundled_cascade().unwrap();
        assert_eq!((c.base_window.width, c.base_window.height), (24, 24));
        assert_eq!(c.stages.len(), 25);
        assert_eq!(c.weak_count(), 2913);
        assert_eq!(c.norm_inset, 1);
        c.validate().unwrap();
    }
}
