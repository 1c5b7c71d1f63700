use std::path::Path;

use cscad::data::FeatureSchema;
use cscad::disc::read_predictions;
use cscad::pipeline::{
    deterministic_artifacts, prepare, Pipeline, PipelineConfig, DISC_HISTORY, PREDICTIONS_CSV, RECON_HISTORY,
    SELECTION_CSV,
};
use cscad::synthetic::correlated_groups;
use cscad::Error;

fn config(dir: &Path) -> PipelineConfig {
    let ds = correlated_groups(300, 0.1, 11);
    let (data, schema) = ds.write(dir, "groups").unwrap();
    let mut c = PipelineConfig::new(data, schema, dir.join("out"));
    c.recon.epochs = 4;
    c.recon.batch_size = 32;
    c.disc.epochs = 5;
    c.disc.batch_size = 32;
    c
}

fn lines(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn train_recon_mines_when_graph_is_missing() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path());
    let out = c.output_dir.clone();
    let mut p = Pipeline::new(c).unwrap();
    p.train_recon().unwrap();
    for f in ["mine.stamp.json", "emi.csv", "adjacency.csv", "edges.csv", "recon.ckpt"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    // header plus one row per epoch
    assert_eq!(lines(&out.join(RECON_HISTORY)), 5);
}

#[test]
fn stages_refuse_missing_or_stale_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path());
    let err = Pipeline::new(c.clone()).unwrap().train_disc().unwrap_err();
    assert!(
        matches!(&err, Error::Stage { stage: "train-disc", source } if matches!(**source, Error::StaleArtifact { .. }))
    );

    Pipeline::new(c.clone()).unwrap().run_all().unwrap();
    let mut changed = c.clone();
    changed.disc.epochs = 6;
    let err = Pipeline::new(changed).unwrap().detect().unwrap_err();
    assert!(err.to_string().contains("different configuration"), "{err}");

    // a hand-edited artifact is caught by its digest
    let ckpt = c.output_dir.join("recon.ckpt");
    let text = std::fs::read_to_string(&ckpt).unwrap();
    std::fs::write(&ckpt, text.replacen('0', "1", 1)).unwrap();
    let err = Pipeline::new(c).unwrap().detect().unwrap_err();
    assert!(err.to_string().contains("recon.ckpt"), "{err}");
}

#[test]
fn known_anomalies_enter_as_ground_truth_negatives() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(dir.path());
    let schema = FeatureSchema::load(&c.schema).unwrap();
    let prepared = prepare(&c.dataset, &schema, c.mode, c.train_fraction, c.seed).unwrap();
    let known = &prepared.train.ids[..2];
    let labels = dir.path().join("labels.txt");
    std::fs::write(&labels, format!("{}\n{}\n", known[0], known[1])).unwrap();
    c.known_anomalies = Some(labels);
    let mut p = Pipeline::new(c.clone()).unwrap();
    p.train_recon().unwrap();
    let sel = p.train_disc().unwrap();
    assert_eq!(sel.ground_truth_count(), 2);
    assert_eq!(sel.negatives.len(), (0.075 * 150.0f64).floor() as usize);
    let audit = std::fs::read_to_string(c.output_dir.join(SELECTION_CSV)).unwrap();
    assert_eq!(audit.matches(",ground_truth").count(), 2);
    for id in known {
        assert!(audit
            .lines()
            .any(|l| l.starts_with(&format!("{id},")) && l.ends_with(",negative,ground_truth")));
    }
    assert_eq!(lines(&c.output_dir.join(DISC_HISTORY)), 6);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path());
    let mut other = c.clone();
    other.output_dir = dir.path().join("again");
    Pipeline::new(c.clone()).unwrap().run_all().unwrap();
    let first = deterministic_artifacts(&c.output_dir).unwrap();
    Pipeline::new(other.clone()).unwrap().run_all().unwrap();
    assert_eq!(deterministic_artifacts(&other.output_dir).unwrap(), first);
    // rerunning in place reproduces the same files and leaves no temporaries
    Pipeline::new(c.clone()).unwrap().run_all().unwrap();
    assert_eq!(deterministic_artifacts(&c.output_dir).unwrap(), first);
    assert!(first.keys().all(|k| !k.ends_with(".partial")));
}

#[test]
fn predictions_cover_every_test_sample() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(dir.path());
    let report = Pipeline::new(c.clone()).unwrap().run_all().unwrap();
    let preds = read_predictions(&std::fs::read_to_string(c.output_dir.join(PREDICTIONS_CSV)).unwrap()).unwrap();
    assert_eq!(preds.len(), 150);
    assert_eq!(report.confusion.total(), 150);
    assert!(preds.iter().all(|p| p.label == (p.probability > 0.5)));
}

#[test]
fn ablations_and_negative_fractions_change_reports() {
    let dir = tempfile::tempdir().unwrap();
    let base = config(dir.path());
    let run = |f: &dyn Fn(&mut PipelineConfig), name: &str| {
        let mut c = base.clone();
        c.output_dir = dir.path().join(name);
        f(&mut c);
        let mut p = Pipeline::new(c.clone()).unwrap();
        p.run_all().unwrap();
        (
            deterministic_artifacts(&c.output_dir).unwrap(),
            std::fs::read_to_string(c.output_dir.join(SELECTION_CSV)).unwrap(),
        )
    };
    let (full, _) = run(&|_| {}, "full");
    let (no_gcn, _) = run(&|c| c.recon.use_gcn = false, "no-gcn");
    assert_ne!(full["predictions.csv"], no_gcn["predictions.csv"]);
    for p in [0.025, 0.05, 0.075] {
        let (_, audit) = run(&|c| c.labeling.negative_fraction = p, &format!("p{p}"));
        assert_eq!(audit.matches(",negative,").count(), (p * 150.0f64).floor() as usize);
    }
}

#[test]
fn missing_schema_fails_before_compute() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(dir.path());
    c.schema = dir.path().join("absent.toml");
    let err = Pipeline::new(c.clone()).err().unwrap();
    assert!(matches!(err, Error::InvalidConfig(_)), "{err}");
    assert!(!c.output_dir.exists());
}
