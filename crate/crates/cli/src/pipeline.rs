//! The pipeline stages behind the command-line verbs.
//!
//! Every stage is deterministic in the resolved [`RunConfig`]: region seeds,
//! frame seeds, the split, initialisation and dropout masks all derive from the
//! master seed, and parallel work is collected in sample order.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ferlink_core::container::{DatasetContainer, FerLabel, Manifest, SampleEntry};
use ferlink_core::dataset::{split_dataset, DatasetSplit};
use ferlink_core::kmeans::kmeans_boundaries;
use ferlink_core::seed::{domain, mix_seed};
use ferlink_core::{classify_fer, region_features, FerClassScheme, SampleSource, SourceRegistry, FEATURE_LEN};
use ferlink_mlp::{Checkpoint, ConfusionMatrix, Mlp, Mode, TrainReport};
use log::{info, warn};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, IoContext, Result};

/// Samples featurised or labeled between manifest saves.
const CHUNK: usize = 64;
const LABEL_STREAM: u64 = 0x006c_6162_656c;
const INIT_STREAM: u64 = 0x696e_6974;
const KMEANS_STREAM: u64 = 0x6b6d_6561_6e73;

pub const MODEL_FILE: &str = "model.ferm";
pub const SPLIT_FILE: &str = "split.json";
pub const LOSS_FILE: &str = "loss.csv";
pub const REPORT_FILE: &str = "train_report.json";
pub const CONFUSION_FILE: &str = "confusion.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const PROVENANCE_FILE: &str = "provenance.json";

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).at(path)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).at(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).at(path)?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(file))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).at(path)
}

/// Same regions, in the same order, as `expected`.
fn entry_matches(entry: &SampleEntry, expected: &SampleEntry) -> bool {
    entry.region_id == expected.region_id && entry.source == expected.source && entry.seed == expected.seed
}

/// Generate `count` regions of every source in `kinds` into a container at
/// `out`. A partial container from an interrupted run with the same
/// configuration is resumed; one from a different configuration is refused.
pub fn generate(cfg: &RunConfig, kinds: &[String], count: usize, out: &Path) -> Result<DatasetContainer> {
    cfg.validate()?;
    if count == 0 {
        return Err(Error::Config("count must be at least 1".into()));
    }
    if kinds.is_empty() {
        return Err(Error::Config("at least one --kind is required".into()));
    }
    let registry = SourceRegistry::with_defaults(cfg.gscm.clone(), cfg.tdl.clone());
    let mut regions = Vec::with_capacity(count * kinds.len());
    let mut seen = Vec::new();
    for kind in kinds {
        let source = registry.get(kind)?;
        if seen.contains(&source.source()) {
            return Err(Error::Config(format!("--kind {kind} given twice")));
        }
        seen.push(source.source());
        let seed = mix_seed(cfg.seed, &[domain::REGION, source.source() as u64]);
        regions.extend(source.generate(&cfg.grid, count, seed)?);
    }

    let hash = cfg.generation_hash();
    let expected: Vec<SampleEntry> = regions
        .iter()
        .enumerate()
        .map(|(i, r)| SampleEntry {
            index: i,
            region_id: r.region_id.clone(),
            source: r.source,
            seed: r.seed,
            blob: DatasetContainer::blob_name(i),
            paths: Some(DatasetContainer::paths_name(i)),
            label: None,
        })
        .collect();

    let mut manifest = Manifest::new(cfg.grid, cfg.seed, hash.clone());
    if out.join("manifest.json").exists() {
        let old = DatasetContainer::open(out)?;
        if old.manifest.config_hash != hash || old.manifest.master_seed != cfg.seed {
            return Err(Error::Data(format!(
                "{} holds a dataset from a different configuration",
                out.display()
            )));
        }
        let keep = old
            .manifest
            .samples
            .iter()
            .zip(&expected)
            .take_while(|(a, b)| entry_matches(a, b) && a.label.is_none())
            .count();
        if keep > 0 {
            info!("resuming: {keep} of {} regions already written", expected.len());
        }
        manifest.samples = expected[..keep].to_vec();
    }
    let mut container = DatasetContainer::create(out, manifest)?;

    let start = container.len();
    for chunk_start in (start..regions.len()).step_by(CHUNK) {
        let end = (chunk_start + CHUNK).min(regions.len());
        let c = &container;
        (chunk_start..end).into_par_iter().try_for_each(|i| -> Result<()> {
            let block = region_features(&regions[i].process)?;
            c.write_blob(i, block.as_slice())?;
            c.write_process(i, &regions[i].process)?;
            Ok(())
        })?;
        container.manifest.samples.extend_from_slice(&expected[chunk_start..end]);
        container.save_manifest()?;
        info!("generated {end}/{} regions", regions.len());
    }
    container.save_manifest()?;
    Ok(container)
}

/// A region that could not be labeled.
#[derive(Debug, Clone, PartialEq)]
pub struct Skipped {
    pub index: usize,
    pub region_id: String,
    pub reason: String,
}

#[derive(Debug)]
pub struct LabelOutcome {
    pub container: DatasetContainer,
    pub skipped: Vec<Skipped>,
}

/// Run the link simulation over every region of `input` and write the labeled
/// container to `out` (which may equal `input`). Regions whose paths cannot be
/// extended over the frame sequence are logged and left unlabeled.
pub fn label(cfg: &RunConfig, input: &Path, out: &Path) -> Result<LabelOutcome> {
    cfg.validate()?;
    let source = DatasetContainer::open(input)?;
    let phy_hash = cfg.phy_hash();
    let resumable = out != input && out.join("manifest.json").exists() && {
        let existing = DatasetContainer::open(out)?;
        existing.manifest.config_hash == source.manifest.config_hash
            && existing.len() == source.len()
            && existing.manifest.samples.iter().zip(&source.manifest.samples).all(|(a, b)| entry_matches(a, b))
    };
    let mut container = if resumable {
        DatasetContainer::open(out)?
    } else {
        source.copy_to(out)?
    };
    let m = &mut container.manifest;
    if m.phy_config_hash.as_deref() != Some(phy_hash.as_str()) || m.class_scheme.as_ref() != Some(&cfg.class_scheme) {
        for s in &mut m.samples {
            s.label = None;
        }
    }
    m.phy_config_hash = Some(phy_hash);
    m.class_scheme = Some(cfg.class_scheme.clone());

    let pending: Vec<usize> = (0..container.len())
        .filter(|&i| container.manifest.samples[i].label.is_none())
        .collect();
    if pending.len() < container.len() {
        info!("resuming: {} of {} regions already labeled", container.len() - pending.len(), container.len());
    }
    let mut skipped = Vec::new();
    let mut done = container.len() - pending.len();
    for chunk in pending.chunks(CHUNK) {
        let c = &container;
        let results: Vec<Result<std::result::Result<FerLabel, String>>> = chunk
            .par_iter()
            .map(|&i| {
                let entry = &c.manifest.samples[i];
                let process = match entry.paths {
                    Some(_) => c.read_process(entry)?,
                    None => return Ok(Err("no path parameters (imported sample)".to_string())),
                };
                let seed = mix_seed(cfg.seed, &[LABEL_STREAM, entry.seed]);
                match ferlink_phy::measure_fer(&process, &cfg.phy, seed, &entry.region_id) {
                    Ok(m) => Ok(Ok(FerLabel {
                        frames_sent: m.frames_sent,
                        frames_failed: m.frames_failed,
                        fer: m.fer,
                        class_label: classify_fer(m.fer, &cfg.class_scheme),
                        cp_exceeded: m.cp_exceeded,
                    })),
                    Err(ferlink_phy::Error::Channel(e @ ferlink_core::Error::NegativeDelay { .. })) => {
                        Ok(Err(e.to_string()))
                    }
                    Err(e) => Err(e.into()),
                }
            })
            .collect();
        for (&i, r) in chunk.iter().zip(results) {
            let entry = &mut container.manifest.samples[i];
            match r? {
                Ok(label) => entry.label = Some(label),
                Err(reason) => {
                    warn!("skipping region {} ({}): {reason}", i, entry.region_id);
                    skipped.push(Skipped { index: i, region_id: entry.region_id.clone(), reason });
                }
            }
        }
        done += chunk.len();
        container.save_manifest()?;
        info!("labeled {done}/{} regions", container.len());
    }
    container.save_manifest()?;
    Ok(LabelOutcome { container, skipped })
}

/// Class counts over labeled samples, index 0 = class 1.
pub fn class_counts(container: &DatasetContainer, classes: usize) -> Vec<usize> {
    let mut counts = vec![0; classes];
    for s in &container.manifest.samples {
        if let Some(l) = &s.label {
            if (1..=classes).contains(&(l.class_label as usize)) {
                counts[l.class_label as usize - 1] += 1;
            }
        }
    }
    counts
}

/// Derive class boundaries by log-domain k-means over the labeled FERs of
/// `input`. With `apply`, the container's class labels and scheme are
/// rewritten in place.
pub fn kmeans_classes(cfg: &RunConfig, input: &Path, classes: usize, apply: bool) -> Result<FerClassScheme> {
    let mut container = DatasetContainer::open(input)?;
    let labels: Vec<&FerLabel> = container.manifest.samples.iter().filter_map(|s| s.label.as_ref()).collect();
    if labels.is_empty() {
        return Err(Error::Data(format!("{} has no labeled samples", input.display())));
    }
    let frames = labels.iter().map(|l| l.frames_sent).max().unwrap_or(1);
    let fers: Vec<f64> = labels.iter().map(|l| l.fer).collect();
    let scheme = kmeans_boundaries(&fers, classes, frames, mix_seed(cfg.seed, &[KMEANS_STREAM]))?;
    if apply {
        for s in &mut container.manifest.samples {
            if let Some(l) = &mut s.label {
                l.class_label = classify_fer(l.fer, &scheme);
            }
        }
        container.manifest.class_scheme = Some(scheme.clone());
        container.save_manifest()?;
    }
    Ok(scheme)
}

/// Feature matrix of `indices`, one row per sample.
pub fn load_features(container: &DatasetContainer, indices: &[usize]) -> Result<Array2<f32>> {
    let blocks: Vec<Vec<f32>> = indices
        .par_iter()
        .map(|&i| Ok(container.read_features(&container.manifest.samples[i])?.into_vec()))
        .collect::<Result<_>>()?;
    let mut x = Array2::zeros((indices.len(), FEATURE_LEN));
    for (mut row, block) in x.rows_mut().into_iter().zip(blocks) {
        row.assign(&ndarray::ArrayView1::from(&block[..]));
    }
    Ok(x)
}

fn labels_of(container: &DatasetContainer, indices: &[usize]) -> Vec<u8> {
    indices
        .iter()
        .map(|&i| container.manifest.samples[i].label.as_ref().map_or(0, |l| l.class_label))
        .collect()
}

/// Train/test membership by container sample index, with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRecord {
    pub config_hash: String,
    pub master_seed: u64,
    pub dataset_config_hash: String,
    pub phy_config_hash: Option<String>,
    pub test_fraction: f64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub config_hash: String,
    pub master_seed: u64,
    pub dataset_config_hash: String,
    pub num_parameters: usize,
    pub train_samples: usize,
    pub report: TrainReport,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub split: SplitRecord,
    pub report: TrainReport,
    pub checkpoint: Checkpoint,
}

/// Split the labeled samples of `input` by source, train a fresh model on the
/// training part and write checkpoint, loss history and split to `out`.
pub fn train(cfg: &RunConfig, input: &Path, out: &Path) -> Result<TrainOutcome> {
    cfg.validate()?;
    let container = DatasetContainer::open(input)?;
    let labeled: Vec<usize> = (0..container.len())
        .filter(|&i| container.manifest.samples[i].label.is_some())
        .collect();
    if labeled.len() < 2 {
        return Err(Error::Data(format!("{} has fewer than two labeled samples", input.display())));
    }
    let sources: Vec<SampleSource> = labeled.iter().map(|&i| container.manifest.samples[i].source).collect();
    let DatasetSplit { train, test } = split_dataset(&sources, cfg.test_fraction, cfg.seed)?;
    let split = SplitRecord {
        config_hash: cfg.hash(),
        master_seed: cfg.seed,
        dataset_config_hash: container.manifest.config_hash.clone(),
        phy_config_hash: container.manifest.phy_config_hash.clone(),
        test_fraction: cfg.test_fraction,
        train: train.iter().map(|&j| labeled[j]).collect(),
        test: test.iter().map(|&j| labeled[j]).collect(),
    };
    // Fail on unreadable held-out blobs now rather than after training.
    load_features(&container, &split.test)?;
    let x = load_features(&container, &split.train)?;
    let y = labels_of(&container, &split.train);

    let mut model = Mlp::<f32>::paper(mix_seed(cfg.seed, &[INIT_STREAM]));
    let tc = cfg.train_config();
    info!(
        "training {} parameters on {} samples ({} held out)",
        model.num_parameters(),
        split.train.len(),
        split.test.len()
    );
    let report = ferlink_mlp::train(&mut model, x.view(), &y, &tc, |_, _| {})?;

    create_dir(out)?;
    let checkpoint = Checkpoint {
        model,
        master_seed: cfg.seed,
        config_hash: split.config_hash.clone(),
    };
    checkpoint.save(&out.join(MODEL_FILE))?;
    let mut w = csv_writer(&out.join(LOSS_FILE))?;
    w.write_record(["epoch", "loss"])?;
    for (e, l) in report.epoch_losses.iter().enumerate() {
        w.write_record([e.to_string(), format!("{l:.9e}")])?;
    }
    w.flush().at(out.join(LOSS_FILE))?;
    write_json(&out.join(SPLIT_FILE), &split)?;
    write_json(
        &out.join(REPORT_FILE),
        &TrainRecord {
            config_hash: split.config_hash.clone(),
            master_seed: cfg.seed,
            dataset_config_hash: split.dataset_config_hash.clone(),
            num_parameters: checkpoint.model.num_parameters(),
            train_samples: split.train.len(),
            report: report.clone(),
        },
    )?;
    Ok(TrainOutcome { split, report, checkpoint })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    Train,
    Test,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub config_hash: String,
    pub master_seed: u64,
    pub dataset_config_hash: String,
    pub subset: Subset,
    pub samples: usize,
    pub accuracy: f64,
    /// `None` for classes absent from the evaluated samples.
    pub per_class_accuracy: Vec<Option<f64>>,
    pub class_counts: Vec<u64>,
    pub confusion: ConfusionMatrix,
}

fn model_paths(model: &Path) -> (PathBuf, PathBuf) {
    if model.is_dir() {
        (model.join(MODEL_FILE), model.join(SPLIT_FILE))
    } else {
        let dir = model.parent().unwrap_or(Path::new("."));
        (model.to_path_buf(), dir.join(SPLIT_FILE))
    }
}

/// Evaluate the model in `model` (a training output directory or checkpoint
/// file) on `subset` of the labeled samples in `input`; writes confusion CSV
/// and metrics JSON to `out`.
pub fn evaluate(model: &Path, input: &Path, subset: Subset, out: &Path) -> Result<Metrics> {
    let (model_file, split_file) = model_paths(model);
    let checkpoint = Checkpoint::load(&model_file)?;
    let container = DatasetContainer::open(input)?;
    let indices: Vec<usize> = match subset {
        Subset::All => (0..container.len())
            .filter(|&i| container.manifest.samples[i].label.is_some())
            .collect(),
        Subset::Train | Subset::Test => {
            let split: SplitRecord = read_json(&split_file)?;
            if split.dataset_config_hash != container.manifest.config_hash {
                return Err(Error::Data(format!(
                    "split in {} belongs to a different dataset",
                    split_file.display()
                )));
            }
            if subset == Subset::Train {
                split.train
            } else {
                split.test
            }
        }
    };
    if let Some(&i) = indices.iter().find(|&&i| i >= container.len() || container.manifest.samples[i].label.is_none()) {
        return Err(Error::Data(format!("sample {i} is missing or unlabeled")));
    }
    if indices.is_empty() {
        return Err(Error::Data("no samples to evaluate".into()));
    }
    let x = load_features(&container, &indices)?;
    let y = labels_of(&container, &indices);
    let eval = ferlink_mlp::evaluate(&checkpoint.model, x.view(), &y)?;
    let metrics = Metrics {
        config_hash: checkpoint.config_hash.clone(),
        master_seed: checkpoint.master_seed,
        dataset_config_hash: container.manifest.config_hash.clone(),
        subset,
        samples: indices.len(),
        accuracy: eval.accuracy,
        per_class_accuracy: eval.per_class_accuracy.clone(),
        class_counts: eval.confusion.counts.iter().map(|r| r.iter().sum()).collect(),
        confusion: eval.confusion,
    };
    create_dir(out)?;
    let path = out.join(CONFUSION_FILE);
    let mut w = csv_writer(&path)?;
    let classes = metrics.confusion.classes();
    let mut header = vec!["true\\predicted".to_string()];
    header.extend((1..=classes).map(|c| c.to_string()));
    w.write_record(&header)?;
    for (i, row) in metrics.confusion.counts.iter().enumerate() {
        let mut rec = vec![(i + 1).to_string()];
        rec.extend(row.iter().map(|c| c.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().at(&path)?;
    write_json(&out.join(METRICS_FILE), &metrics)?;
    Ok(metrics)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub index: usize,
    pub region_id: String,
    pub class: u8,
    pub log_probs: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PredictProvenance {
    config_hash: String,
    master_seed: u64,
    dataset_config_hash: String,
    samples: usize,
}

/// Classify every sample of `input` (generated or imported; wideband imports
/// are cut to the feature band) and write per-sample class and log-probabilities.
pub fn predict(model: &Path, input: &Path, out: &Path) -> Result<Vec<Prediction>> {
    let (model_file, _) = model_paths(model);
    let checkpoint = Checkpoint::load(&model_file)?;
    let container = DatasetContainer::open(input)?;
    if container.is_empty() {
        return Err(Error::Data(format!("{} holds no samples", input.display())));
    }
    let indices: Vec<usize> = (0..container.len()).collect();
    let mut predictions = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(256) {
        let x = load_features(&container, chunk)?;
        let log_probs = checkpoint.model.forward(x.view(), Mode::Eval)?;
        let classes = checkpoint.model.predict(x.view())?;
        for ((&i, row), class) in chunk.iter().zip(log_probs.rows()).zip(classes) {
            predictions.push(Prediction {
                index: i,
                region_id: container.manifest.samples[i].region_id.clone(),
                class,
                log_probs: row.to_vec(),
            });
        }
    }
    create_dir(out)?;
    let path = out.join(PREDICTIONS_FILE);
    let mut w = csv_writer(&path)?;
    let classes = checkpoint.model.num_classes();
    let mut header: Vec<String> = vec!["index".into(), "region_id".into(), "class".into()];
    header.extend((1..=classes).map(|c| format!("log_p{c}")));
    w.write_record(&header)?;
    for p in &predictions {
        let mut rec = vec![p.index.to_string(), p.region_id.clone(), p.class.to_string()];
        rec.extend(p.log_probs.iter().map(|v| format!("{v:.7e}")));
        w.write_record(&rec)?;
    }
    w.flush().at(&path)?;
    write_json(
        &out.join(PROVENANCE_FILE),
        &PredictProvenance {
            config_hash: checkpoint.config_hash.clone(),
            master_seed: checkpoint.master_seed,
            dataset_config_hash: container.manifest.config_hash.clone(),
            samples: predictions.len(),
        },
    )?;
    Ok(predictions)
}

/// Per-source sample counts of a container, for summaries.
pub fn source_counts(container: &DatasetContainer) -> BTreeMap<SampleSource, usize> {
    let mut counts = BTreeMap::new();
    for s in &container.manifest.samples {
        *counts.entry(s.source).or_default() += 1;
    }
    counts
}
