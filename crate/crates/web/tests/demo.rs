use pdiff_web::demo::{build_config, drop_curves, select, Session};
use serde_json::Value;

#[test]
fn defaults_build_a_valid_config() {
    let c = build_config("").unwrap();
    assert_eq!(c.selector.tau, Some(0.4));
    let c = build_config(r#"{"mode": "pdiff_no_tau", "selector.tau": null, "noise.rate": 0.2}"#).unwrap();
    assert_eq!(c.selector.tau, None);
    assert_eq!(c.noise.rate, 0.2);
    assert!(build_config(r#"{"bogus.key": 1}"#).unwrap_err().contains("bogus.key"));
    assert!(build_config("[1, 2]").is_err());
}

#[test]
fn session_steps_to_the_end() {
    let mut s = Session::new(r#"{"train.epochs": 3, "dataset.blobs.samples_per_class": 100}"#).unwrap();
    let before = s.histogram().unwrap();
    assert_eq!(before.clean.len(), 200);
    let total: u64 = before.clean.iter().chain(&before.noise).sum();
    assert_eq!(total, 800);
    let mut last = None;
    while !s.is_finished() {
        last = Some(s.step().unwrap());
    }
    let last = last.unwrap();
    assert!(last.done);
    assert_eq!(last.metrics.epoch, 3);
    assert_eq!(s.epoch(), 3);
    assert!(s.step().is_err());
}

#[test]
fn drop_curves_cover_the_grid() {
    let out = drop_curves(r#"{"dataset.blobs.samples_per_class": 100}"#, 2).unwrap();
    let v: Value = serde_json::from_str(&out).unwrap();
    for key in ["delta", "py"] {
        let points = v[key].as_array().unwrap();
        assert_eq!(points.len(), 19);
        for p in points {
            let r = p["real_noise_rate"].as_f64().unwrap();
            assert!((0.0..=1.0).contains(&r));
        }
    }
    assert!(drop_curves("", 0).is_err());
}

#[test]
fn selection_of_a_typed_window() {
    let s = select("-0.9, -0.5 0.1\n0.8", 0.5, 200).unwrap();
    assert!((s.threshold.unwrap() - 0.09).abs() < 1e-12);
    assert_eq!(s.keep, vec![false, false, true, true]);
    assert_eq!(s.bins_of_values, vec![10, 50, 110, 180]);
    assert_eq!(s.kept_fraction, 0.5);

    let empty = select("", 0.3, 200).unwrap();
    assert_eq!(empty.threshold, None);
    assert_eq!(empty.zeta, None);
    assert!(select("0.1, abc", 0.3, 200).is_err());
    assert!(select("0.1", 1.0, 200).is_err());
    assert!(select("1.5", 0.1, 200).is_err());
}
