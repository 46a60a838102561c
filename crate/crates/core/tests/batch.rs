use std::path::Path;

use ecg_synth::ecg_io::{write_csv, EcgRecord, STANDARD_LEADS};
use ecg_synth::eval::{evaluate_dir, evaluate_image, remove_grid};
use ecg_synth::pipeline::{generate_batch, generate_one, read_manifest, read_sidecar, DistortionConfig};
use ecg_synth::RasterImage;

fn record(scale: f64, f0: f64) -> EcgRecord {
    let fs = 500.0;
    let pairs = STANDARD_LEADS
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let v = (0..5000)
                .map(|i| scale * (2.0 * std::f64::consts::PI * (f0 + k as f64 * 0.3) * i as f64 / fs).sin())
                .collect();
            (*name, v)
        })
        .collect();
    EcgRecord::from_pairs(pairs, fs).unwrap()
}

fn write(dir: &Path, name: &str, rec: &EcgRecord) {
    std::fs::write(dir.join(name), write_csv(rec)).unwrap();
}

fn fast_config() -> DistortionConfig {
    let mut c = DistortionConfig::default();
    c.wrinkles.downscale = 4;
    c.master_seed = 3;
    c
}

#[test]
fn singleton_batch() {
    let input = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    write(input.path(), "one.csv", &record(1.0, 1.0));
    let m = generate_batch(input.path(), out.path(), &fast_config(), 4).unwrap();
    assert_eq!((m.succeeded, m.failed, m.records.len()), (1, 0, 1));
    let e = &m.records[0];
    assert_eq!(e.record_id, "one");
    assert!(e.image.as_ref().unwrap().is_file());
    let meta = read_sidecar(e.sidecar.as_ref().unwrap()).unwrap();
    assert_eq!(meta.record_id, "one");
    assert_eq!(meta.leads.len(), 13);
    assert_eq!(read_manifest(&out.path().join("manifest.json")).unwrap(), m);
}

#[test]
fn zero_signal_records_are_flat_lines() {
    let input = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    for i in 0..3 {
        write(input.path(), &format!("z{i}.csv"), &record(0.0, 1.0));
    }
    let cfg = DistortionConfig::distortionless();
    let m = generate_batch(input.path(), out.path(), &cfg, 2).unwrap();
    assert_eq!(m.succeeded, 3);
    for e in &m.records {
        let img = RasterImage::load(e.image.as_ref().unwrap()).unwrap();
        let meta = read_sidecar(e.sidecar.as_ref().unwrap()).unwrap();
        let mask = remove_grid(&img, &cfg.paper);
        for l in &meta.leads {
            let y = l.baseline_px.round() as u32;
            let (x0, x1) = (l.points[0][0].round() as u32, l.points.last().unwrap()[0].round() as u32);
            assert!((x0..=x1).all(|x| mask.get(x, y)), "{} not flat at its baseline", l.lead);
            assert!(l.points.iter().all(|p| p[1] == l.baseline_px));
        }
    }
}

#[test]
fn failing_record_leaves_others_alone() {
    let good = tempfile::tempdir().unwrap();
    let bad = tempfile::tempdir().unwrap();
    for dir in [good.path(), bad.path()] {
        write(dir, "a.csv", &record(1.0, 1.0));
        write(dir, "c.csv", &record(0.7, 2.0));
    }
    write(good.path(), "b.csv", &record(0.5, 3.0));
    std::fs::write(bad.path().join("b.csv"), "I,II\n1.0,abc\n").unwrap();
    let cfg = fast_config();
    let (o1, o2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let m1 = generate_batch(good.path(), o1.path(), &cfg, 3).unwrap();
    let m2 = generate_batch(bad.path(), o2.path(), &cfg, 3).unwrap();
    assert_eq!((m2.succeeded, m2.failed), (2, 1));
    assert!(m2.records[1].error.as_deref().unwrap().contains("abc"));
    assert_eq!(m1.records[0].image_sha256, m2.records[0].image_sha256);
    assert_eq!(m1.records[2].image_sha256, m2.records[2].image_sha256);
}

#[test]
fn empty_input_dir_is_an_error() {
    let input = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    assert!(generate_batch(input.path(), out.path(), &fast_config(), 1).is_err());
}

#[test]
fn perspective_images_are_unwarped_for_scoring() {
    let mut cfg = DistortionConfig::distortionless();
    cfg.perspective.enabled = true;
    cfg.master_seed = 21;
    let (img, meta) = generate_one(&record(1.0, 1.0), &cfg, 0).unwrap();
    let (scores, failures) = evaluate_image(&img, &meta).unwrap();
    assert!(failures.is_empty(), "{failures:?}");
    let mean = scores.iter().map(|s| s.snr_db).sum::<f64>() / scores.len() as f64;
    assert!(mean > 20.0, "mean {mean}");
}

#[test]
fn eval_dir_reports_every_lead() {
    let input = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    write(input.path(), "a.csv", &record(1.0, 1.0));
    write(input.path(), "b.csv", &record(1.5, 0.5));
    generate_batch(input.path(), out.path(), &DistortionConfig::distortionless(), 2).unwrap();
    let r = evaluate_dir(out.path(), 1.0).unwrap();
    assert_eq!(r.records, 2);
    assert_eq!(r.leads.len() + r.failures.len(), 26);
    assert_eq!(r.histogram.iter().map(|b| b.count).sum::<usize>(), r.leads.len());
    assert!(r.mean_snr_db > 25.0, "{}", r.summary());
    for l in &r.leads {
        assert!((l.rmse_mv - l.mse_mv2.sqrt()).abs() < 1e-15);
    }
}
