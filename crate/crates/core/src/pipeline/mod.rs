//! End-to-end orchestration: mine → train-recon → train-disc → detect →
//! evaluate, with every artifact stamped by the configuration hash of the
//! stage that produced it.
//!
//! Configuration is TOML. Relative paths resolve against the directory of
//! the configuration file:
//!
//! ```toml
//! dataset = "thyroid.csv"
//! schema = "schema.toml"
//! output_dir = "out"
//! seed = 0
//! train_fraction = 0.5
//! known_anomalies = "labels.txt"   # optional
//!
//! [mode]
//! kind = "static"                  # or: kind = "timeseries", k = 10
//!
//! [emi]
//! window = 5
//!
//! [graph]
//! mode = "median_threshold"        # threshold (tau), top_k (k)
//! weighted = true
//!
//! [recon]
//! epochs = 100
//!
//! [disc]
//! epochs = 200
//!
//! [labeling]
//! negative_fraction = 0.075
//! ```

mod artifacts;
mod prepare;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{load_csv, FeatureSchema};
use crate::disc::{
    predictions_csv, read_predictions, select_training_samples, DiscConfig, DiscModel, LabelingPolicy,
    TrainingSelection,
};
use crate::emi::{build_emi_matrix, EmiMatrix, EmiParams, Schedule};
use crate::error::{Error, Result};
use crate::graph::{AdjacencyPolicy, CorrelationGraph};
use crate::metrics::{evaluate, EvalReport};
use crate::recon::{history_csv, AnomalyMeasures, ReconConfig, ReconModel, Variant};

pub use artifacts::{sha256_hex, verify, write_atomic, Stamp};
pub use prepare::{prepare, prepare_input, Prepared, Samples};

pub const EMI_CSV: &str = "emi.csv";
pub const EMI_EDGES: &str = "emi-edges.csv";
pub const ADJACENCY_CSV: &str = "adjacency.csv";
pub const GRAPH_EDGES: &str = "edges.csv";
pub const RECON_CHECKPOINT: &str = "recon.ckpt";
pub const RECON_HISTORY: &str = "recon-history.csv";
pub const TRAIN_MEASURES: &str = "train-measures.csv";
pub const SELECTION_CSV: &str = "selection.csv";
pub const DISC_CHECKPOINT: &str = "disc.ckpt";
pub const DISC_HISTORY: &str = "disc-history.csv";
pub const MEASURES_CSV: &str = "measures.csv";
pub const PREDICTIONS_CSV: &str = "predictions.csv";
pub const TRUTH_CSV: &str = "truth.csv";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TXT: &str = "report.txt";
pub const TIMINGS_JSON: &str = "timings.json";

fn default_train_fraction() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: PathBuf,
    pub schema: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub mode: Variant,
    #[serde(default)]
    pub emi: EmiParams,
    #[serde(default)]
    pub graph: AdjacencyPolicy,
    /// `recon.variant` is taken from `mode`.
    #[serde(default)]
    pub recon: ReconConfig,
    #[serde(default)]
    pub disc: DiscConfig,
    #[serde(default)]
    pub labeling: LabelingPolicy,
    /// File of known anomaly sample ids, one per line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_anomalies: Option<PathBuf>,
}

/// Command-line switches layered over a configuration file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub no_gcn: bool,
    pub no_sigma: bool,
    pub negatives: Option<f64>,
    pub known_anomalies: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

impl PipelineConfig {
    /// A configuration with defaults for everything but the paths.
    pub fn new(dataset: impl Into<PathBuf>, schema: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            dataset: dataset.into(),
            schema: schema.into(),
            output_dir: output_dir.into(),
            seed: 0,
            train_fraction: default_train_fraction(),
            mode: Variant::Static,
            emi: EmiParams::default(),
            graph: AdjacencyPolicy::default(),
            recon: ReconConfig::default(),
            disc: DiscConfig::default(),
            labeling: LabelingPolicy::default(),
            known_anomalies: None,
        }
    }

    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self> {
        let mut c: PipelineConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        for p in [&mut c.dataset, &mut c.schema, &mut c.output_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(p) = c.known_anomalies.as_mut().filter(|p| p.is_relative()) {
            *p = base.join(&*p);
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = artifacts::read_text(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if o.no_gcn {
            self.recon.use_gcn = false;
        }
        if o.no_sigma {
            self.disc.use_sigma = false;
        }
        if let Some(p) = o.negatives {
            self.labeling.negative_fraction = p;
        }
        if let Some(p) = &o.known_anomalies {
            self.known_anomalies = Some(p.clone());
        }
        if let Some(p) = &o.output_dir {
            self.output_dir = p.clone();
        }
    }

    /// Reconstruction settings with the variant taken from `mode`.
    pub fn effective_recon(&self) -> ReconConfig {
        ReconConfig {
            variant: self.mode,
            ..self.recon.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (what, p) in [("dataset", &self.dataset), ("schema", &self.schema)] {
            if !p.is_file() {
                return Err(Error::InvalidConfig(format!(
                    "{what} file {} does not exist",
                    p.display()
                )));
            }
        }
        if let Some(p) = &self.known_anomalies {
            if !p.is_file() {
                return Err(Error::InvalidConfig(format!(
                    "known-anomaly file {} does not exist",
                    p.display()
                )));
            }
        }
        if self.recon.variant != Variant::Static && self.recon.variant != self.mode {
            return Err(Error::InvalidConfig(
                "recon.variant disagrees with mode; set mode only".into(),
            ));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train_fraction {} outside (0, 1)",
                self.train_fraction
            )));
        }
        self.effective_recon().validate()?;
        self.disc.validate()?;
        self.labeling.validate()
    }
}

/// Parses one id per line. Blank lines, `#` comments and a leading
/// `sample_id` header are skipped.
pub fn parse_id_list(text: &str) -> Result<Vec<usize>> {
    let mut ids = Vec::new();
    for (row, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        let first = line.split(',').next().unwrap_or("").trim();
        if first.is_empty() || (row == 0 && first == "sample_id") {
            continue;
        }
        ids.push(first.parse().map_err(|_| Error::UnparsableNumber {
            row,
            column: "sample_id".into(),
            value: first.to_string(),
        })?);
    }
    Ok(ids)
}

fn hash_json(value: &serde_json::Value) -> String {
    sha256_hex(serde_json::to_string(value).expect("json serializes").as_bytes())
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Configuration hashes per stage. Each covers its own settings and the
/// hash of the stage before it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageHashes {
    pub mine: String,
    pub recon: String,
    pub disc: String,
    pub detect: String,
}

pub struct Pipeline {
    pub config: PipelineConfig,
    schema: FeatureSchema,
    known_ids: Vec<usize>,
    hashes: StageHashes,
    prepared: Option<Prepared>,
    detect_input: Option<PathBuf>,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        Self::with_input(config, None)
    }

    /// `input`, when given, is the file `detect` scores instead of the
    /// held-out split.
    pub fn with_input(config: PipelineConfig, input: Option<PathBuf>) -> Result<Self> {
        config.validate()?;
        let schema = FeatureSchema::load(&config.schema)?;
        let known_ids = match &config.known_anomalies {
            Some(p) => parse_id_list(&artifacts::read_text(p)?)?,
            None => Vec::new(),
        };
        std::fs::create_dir_all(&config.output_dir).map_err(|e| Error::io(&config.output_dir, e))?;
        let data = hash_json(&serde_json::json!({
            "dataset": file_digest(&config.dataset)?,
            "schema": file_digest(&config.schema)?,
            "seed": config.seed,
            "train_fraction": config.train_fraction,
            "mode": config.mode,
        }));
        let mine = hash_json(&serde_json::json!({"data": data, "emi": config.emi, "graph": config.graph}));
        let recon = hash_json(&serde_json::json!({"mine": mine, "recon": config.effective_recon()}));
        let mut labeling = config.labeling.clone();
        labeling.known_anomaly_ids.extend(&known_ids);
        let disc = hash_json(&serde_json::json!({"recon": recon, "disc": config.disc, "labeling": labeling}));
        let input_digest = input.as_deref().map(file_digest).transpose()?;
        let detect = hash_json(&serde_json::json!({"disc": disc, "input": input_digest}));
        Ok(Pipeline {
            config,
            schema,
            known_ids,
            hashes: StageHashes {
                mine,
                recon,
                disc,
                detect,
            },
            prepared: None,
            detect_input: input,
        })
    }

    pub fn hashes(&self) -> &StageHashes {
        &self.hashes
    }

    pub fn output_dir(&self) -> &Path {
        &self.config.output_dir
    }

    fn path(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    fn prepared(&mut self) -> Result<&Prepared> {
        if self.prepared.is_none() {
            let c = &self.config;
            self.prepared = Some(prepare(&c.dataset, &self.schema, c.mode, c.train_fraction, c.seed)?);
        }
        Ok(self.prepared.as_ref().expect("just prepared"))
    }

    fn timed<T>(&mut self, stage: &'static str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        log::info!("stage {stage}");
        let out = f(self).map_err(|e| e.in_stage(stage))?;
        artifacts::record_timing(&self.config.output_dir, stage, start.elapsed().as_secs_f64())
            .map_err(|e| e.in_stage(stage))?;
        Ok(out)
    }

    /// EMI over the training split's raw columns and the lifted graph.
    pub fn mine(&mut self) -> Result<CorrelationGraph> {
        self.timed("mine", Self::mine_inner)
    }

    fn mine_inner(&mut self) -> Result<CorrelationGraph> {
        let params = self.config.emi;
        let policy = self.config.graph;
        let ts = matches!(self.config.mode, Variant::TimeSeries { .. });
        let p = self.prepared()?;
        let emi = build_emi_matrix(&p.train_matrix, &p.columns, &params, ts, Schedule::Parallel)?;
        let graph = CorrelationGraph::build(&emi, &p.feature_map, p.encoded_names.clone(), &policy)?;
        log::info!("graph: {} nodes, {} edges", graph.dim(), graph.edge_count());
        let dir = self.config.output_dir.clone();
        let mut w = artifacts::StageWriter::begin(&dir, "mine", &self.hashes.mine)?;
        w.write(EMI_CSV, &emi.to_csv())?;
        w.write(EMI_EDGES, &emi.to_edge_list())?;
        w.write(ADJACENCY_CSV, &graph.adjacency_csv())?;
        w.write(GRAPH_EDGES, &graph.edge_list())?;
        w.finish()?;
        Ok(graph)
    }

    pub fn emi(&self) -> Result<EmiMatrix> {
        EmiMatrix::read_csv(self.path(EMI_CSV))
    }

    fn graph(&mut self) -> Result<CorrelationGraph> {
        if artifacts::verify(&self.config.output_dir, "mine", &self.hashes.mine).is_err() {
            log::info!("graph missing or stale; mining first");
            return self.mine_inner();
        }
        CorrelationGraph::read(&self.path(ADJACENCY_CSV))
    }

    /// Trains the reconstruction network on the training split, mining the
    /// graph first when it is missing or stale.
    pub fn train_recon(&mut self) -> Result<ReconModel> {
        self.timed("train-recon", |s| {
            let graph = s.graph()?;
            let seed = s.config.seed;
            let config = s.config.effective_recon();
            let mut model = ReconModel::build(&config, &graph, seed)?;
            let data = s.prepared()?.train.data.clone();
            model.train(&data)?;
            let dir = s.config.output_dir.clone();
            let mut w = artifacts::StageWriter::begin(&dir, "train-recon", &s.hashes.recon)?;
            w.write(RECON_CHECKPOINT, &model.to_checkpoint())?;
            w.write(RECON_HISTORY, &history_csv(&model.history))?;
            w.finish()?;
            Ok(model)
        })
    }

    fn load_recon(&mut self) -> Result<ReconModel> {
        let dir = self.config.output_dir.clone();
        artifacts::verify(&dir, "mine", &self.hashes.mine)?;
        artifacts::verify(&dir, "train-recon", &self.hashes.recon)?;
        let graph = CorrelationGraph::read(&self.path(ADJACENCY_CSV))?;
        ReconModel::from_checkpoint(&artifacts::read_text(&self.path(RECON_CHECKPOINT))?, &graph)
    }

    fn labeling(&self) -> LabelingPolicy {
        let mut policy = self.config.labeling.clone();
        policy.known_anomaly_ids.extend(&self.known_ids);
        policy
    }

    /// Self-labels the training split from its anomaly measures and trains
    /// the discriminator on the selected samples.
    pub fn train_disc(&mut self) -> Result<TrainingSelection> {
        self.timed("train-disc", |s| {
            let recon = s.load_recon()?;
            let train = s.prepared()?.train.clone();
            let names = s.prepared()?.encoded_names.clone();
            let measures = recon.anomaly_measures(&train.data)?;
            let policy = s.labeling();
            let selection = select_training_samples(&train.ids, &measures.d_norms(), &measures.sigma_norms(), &policy)?;
            log::info!(
                "selected {} positives, {} negatives ({} ground truth)",
                selection.positives.len(),
                selection.negatives.len(),
                selection.ground_truth_count()
            );
            let mut model = DiscModel::build(&s.config.disc, recon.m(), recon.config.latent, s.config.seed ^ 0x5eed)?;
            if let Err(e) = model.train(&measures, &train.ids, &selection) {
                if matches!(e, Error::EmptyClass(_)) {
                    log::error!(
                        "labeling policy: {}",
                        serde_json::to_string(&policy).unwrap_or_default()
                    );
                }
                return Err(e);
            }
            let mut history = String::from("epoch,loss\n");
            for (i, l) in model.history.iter().enumerate() {
                history.push_str(&format!("{i},{l}\n"));
            }
            let dir = s.config.output_dir.clone();
            let mut w = artifacts::StageWriter::begin(&dir, "train-disc", &s.hashes.disc)?;
            w.write(TRAIN_MEASURES, &measures.to_csv(&train.ids, &names))?;
            w.write(SELECTION_CSV, &selection.audit_csv())?;
            w.write(DISC_CHECKPOINT, &model.to_checkpoint())?;
            w.write(DISC_HISTORY, &history)?;
            w.finish()?;
            Ok(selection)
        })
    }

    /// Scores the held-out split, or the input file given at construction.
    pub fn detect(&mut self) -> Result<Vec<f64>> {
        self.timed("detect", |s| {
            let recon = s.load_recon()?;
            let dir = s.config.output_dir.clone();
            artifacts::verify(&dir, "train-disc", &s.hashes.disc)?;
            let disc = DiscModel::from_checkpoint(&artifacts::read_text(&s.path(DISC_CHECKPOINT))?)?;
            let samples = match s.detect_input.clone() {
                Some(input) => {
                    let table = load_csv(&input, &s.schema)?;
                    let mode = s.config.mode;
                    prepare_input(&table, &s.prepared()?.encoder, mode)?
                }
                None => s.prepared()?.test.clone(),
            };
            let names = s.prepared()?.encoded_names.clone();
            let measures: AnomalyMeasures = recon.anomaly_measures(&samples.data)?;
            let probabilities = disc.predict(&measures)?;
            let mut w = artifacts::StageWriter::begin(&dir, "detect", &s.hashes.detect)?;
            w.write(MEASURES_CSV, &measures.to_csv(&samples.ids, &names))?;
            w.write(
                PREDICTIONS_CSV,
                &predictions_csv(
                    &samples.ids,
                    &probabilities,
                    &measures.d_norms(),
                    &measures.sigma_norms(),
                ),
            )?;
            if let Some(labels) = &samples.labels {
                let mut truth = String::from("sample_id,anomaly\n");
                for (id, &l) in samples.ids.iter().zip(labels) {
                    truth.push_str(&format!("{id},{}\n", u8::from(l)));
                }
                w.write(TRUTH_CSV, &truth)?;
            }
            w.finish()?;
            Ok(probabilities)
        })
    }

    /// Scores the detect stage's predictions against the ground truth it
    /// recorded.
    pub fn evaluate(&mut self) -> Result<EvalReport> {
        let predictions = self.path(PREDICTIONS_CSV);
        let truth = self.path(TRUTH_CSV);
        let dir = self.config.output_dir.clone();
        self.timed("evaluate", |s| {
            artifacts::verify(&dir, "detect", &s.hashes.detect)?;
            evaluate_files(&predictions, &truth)
        })
        .and_then(|mut report| {
            report.timings = artifacts::read_timings(&dir);
            write_report(&dir, &report).map_err(|e| e.in_stage("evaluate"))?;
            Ok(report)
        })
    }

    pub fn run_all(&mut self) -> Result<EvalReport> {
        self.mine()?;
        self.train_recon()?;
        self.train_disc()?;
        self.detect()?;
        self.evaluate()
    }
}

/// Reads `sample_id,anomaly` rows.
pub fn read_truth(text: &str) -> Result<Vec<(usize, bool)>> {
    let mut out = Vec::new();
    for (row, line) in text.lines().enumerate().skip(1).filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || Error::UnparsableNumber {
            row,
            column: "anomaly".into(),
            value: line.to_string(),
        };
        let (id, label) = line.split_once(',').ok_or_else(bad)?;
        let id = id.trim().parse().map_err(|_| bad())?;
        let label = match label.trim() {
            "1" | "true" => true,
            "0" | "false" => false,
            _ => return Err(bad()),
        };
        out.push((id, label));
    }
    Ok(out)
}

/// Scores a predictions file against an id-aligned truth file.
pub fn evaluate_files(predictions: &Path, truth: &Path) -> Result<EvalReport> {
    let p = read_predictions(&artifacts::read_text(predictions)?)?;
    let t = read_truth(&artifacts::read_text(truth)?)?;
    let p: Vec<(usize, bool)> = p.iter().map(|x| (x.id, x.label)).collect();
    evaluate(&p, &t)
}

pub fn write_report(dir: &Path, report: &EvalReport) -> Result<()> {
    write_atomic(&dir.join(REPORT_JSON), report.to_json().as_bytes())?;
    write_atomic(&dir.join(REPORT_TXT), report.to_text().as_bytes())
}

/// Every file in `dir` except timing records, with report timings
/// stripped, keyed by name. Two runs with equal config and seed produce
/// equal maps.
pub fn deterministic_artifacts(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name == TIMINGS_JSON || !entry.path().is_file() {
            continue;
        }
        let bytes = std::fs::read(entry.path()).map_err(|e| Error::io(entry.path(), e))?;
        let bytes = match name.as_str() {
            REPORT_JSON => {
                let mut v: serde_json::Value =
                    serde_json::from_slice(&bytes).map_err(|e| Error::InvalidConfig(e.to_string()))?;
                if let Some(o) = v.as_object_mut() {
                    o.remove("timings");
                }
                v.to_string().into_bytes()
            }
            REPORT_TXT => String::from_utf8_lossy(&bytes)
                .lines()
                .filter(|l| !l.starts_with("time "))
                .collect::<Vec<_>>()
                .join("\n")
                .into_bytes(),
            _ => bytes,
        };
        out.insert(name, bytes);
    }
    Ok(out)
}
