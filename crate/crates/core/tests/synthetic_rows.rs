use std::time::Instant;

use rowcrop::raster::{compute_exgi, threshold_mask};
use rowcrop::rowdetect::{detect_rows, evaluate_detection, split_at_tile_columns, DetectConfig};
use rowcrop::synthfield::{generate, FieldSpec};

#[test]
fn full_field_rows_recovered() {
    let spec = FieldSpec::default();
    let start = Instant::now();
    let (raster, truth) = generate(&spec).unwrap();
    let mask = threshold_mask(&compute_exgi(&raster).unwrap(), 0.08);
    let mut cfg = DetectConfig::for_row_spacing(spec.row_spacing_m, spec.gsd_m);
    let truth_pieces = split_at_tile_columns(&truth.rows, mask.width(), &mask.geo(), &cfg.tile);

    let unmerged = detect_rows(&mask, &cfg).unwrap();
    let eval = evaluate_detection(&unmerged, &truth_pieces, 0.19);
    assert_eq!(eval.recall, Some(1.0), "{eval:?}");

    cfg.merge = true;
    let merged = detect_rows(&mask, &cfg).unwrap();
    let eval = evaluate_detection(&merged, &truth_pieces, 0.19);
    assert_eq!(eval.recall, Some(1.0), "{eval:?}");
    assert_eq!(eval.precision, Some(1.0), "{eval:?}");
    eprintln!("{} lines, {:?}", merged.len(), start.elapsed());
}
