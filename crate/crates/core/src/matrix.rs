//! The task × fold training protocol.
//!
//! For every task and held-out fold a fresh model is trained on the other
//! folds and scored on the held-out one. Under scheme four only the training
//! records are augmented; validation always sees one unshifted image per
//! record.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::dataset::{FoldPlan, Record, Task};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::export::{write_manifest, ManifestEntry};
use crate::layout::{augment_prefixes, render, LayoutSpec, Scheme};
use crate::model::{
    init_model, save_model, train, CnnArch, CnnModel, InputScale, SampleSource, TrainConfig,
};

/// Architecture preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArchPreset {
    Standard,
    Compact,
}

impl ArchPreset {
    pub fn build(self, input: InputScale) -> CnnArch {
        match self {
            ArchPreset::Standard => CnnArch::standard(input.shape()),
            ArchPreset::Compact => CnnArch::compact(input.shape()),
        }
    }
}

impl std::str::FromStr for ArchPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(ArchPreset::Standard),
            "compact" => Ok(ArchPreset::Compact),
            _ => Err(Error::InvalidArgument(format!("unknown architecture `{s}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MatrixConfig {
    /// `One` or `Four`.
    pub scheme: Scheme,
    pub tasks: Vec<Task>,
    /// Held-out folds to run; `None` runs all `k`.
    pub folds: Option<Vec<usize>>,
    pub input: InputScale,
    pub arch: ArchPreset,
    pub train: TrainConfig,
    /// Keep the unshifted image in the scheme-four training set.
    pub include_original: bool,
    /// Distribution across (task, fold) pairs.
    pub exec: Exec,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        MatrixConfig {
            scheme: Scheme::One,
            tasks: Task::ALL.to_vec(),
            folds: None,
            input: InputScale::Full,
            arch: ArchPreset::Standard,
            train: TrainConfig::default(),
            include_original: true,
            exec: Exec::default(),
        }
    }
}

/// One line of a prediction file.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub record_id: String,
    pub task: Task,
    pub fold: usize,
    pub prob_1: f64,
    pub pred: u8,
}

/// Result of training one (task, fold) pair.
#[derive(Debug, Clone)]
pub struct FoldRun {
    pub task: Task,
    pub fold: usize,
    pub model: CnnModel,
    pub loss_trace: Vec<f64>,
    /// Training images as (record index, prefix spaces).
    pub training_items: Vec<(usize, usize)>,
    pub validation_records: Vec<usize>,
    pub predictions: Vec<Prediction>,
}

impl FoldRun {
    pub fn file_stem(&self) -> String {
        format!("{}_fold{}", self.task, self.fold)
    }

    /// Training records that also appear in the validation fold.
    pub fn leaked_records(&self) -> usize {
        let val: HashSet<usize> = self.validation_records.iter().copied().collect();
        self.training_items
            .iter()
            .map(|(r, _)| r)
            .collect::<HashSet<_>>()
            .into_iter()
            .filter(|r| val.contains(r))
            .count()
    }
}

/// Rendered training images for one task, produced on demand or cached.
pub struct RenderedSamples<'a> {
    records: &'a [Record],
    items: Vec<(usize, usize)>,
    spec: LayoutSpec,
    input: InputScale,
    task: Task,
    cache: Option<Vec<Vec<f64>>>,
}

/// Inputs are cached when they fit in this many bytes.
const CACHE_BUDGET: usize = 256 << 20;

impl<'a> RenderedSamples<'a> {
    pub fn new(
        records: &'a [Record],
        items: Vec<(usize, usize)>,
        spec: LayoutSpec,
        input: InputScale,
        task: Task,
        exec: Exec,
    ) -> Self {
        let mut s = RenderedSamples {
            records,
            items,
            spec,
            input,
            task,
            cache: None,
        };
        if s.items.len() * input.shape().len() * 8 <= CACHE_BUDGET {
            let cache = exec.map(&s.items, |&(r, p)| s.render_input(r, p));
            s.cache = Some(cache);
        }
        s
    }

    fn render_input(&self, record: usize, prefix: usize) -> Vec<f64> {
        self.input
            .to_input(&render(&self.records[record], &self.spec, prefix).pixels)
    }
}

impl SampleSource for RenderedSamples<'_> {
    fn len(&self) -> usize {
        self.items.len()
    }

    fn label(&self, index: usize) -> u8 {
        self.records[self.items[index].0]
            .task_label(self.task)
            .expect("labels checked before training")
    }

    fn input(&self, index: usize) -> Vec<f64> {
        match &self.cache {
            Some(c) => c[index].clone(),
            None => {
                let (r, p) = self.items[index];
                self.render_input(r, p)
            }
        }
    }
}

/// Training image list for a set of records under `scheme`.
pub fn training_items(records: &[Record], indices: &[usize], scheme: Scheme, include_original: bool) -> Vec<(usize, usize)> {
    let spec = scheme.layout();
    let mut items = Vec::new();
    for &i in indices {
        if scheme.is_augmented() {
            let prefixes: Vec<usize> = augment_prefixes(records[i].token_count(), spec.cutlength).collect();
            let skip = usize::from(!include_original && prefixes.len() > 1);
            items.extend(prefixes[skip..].iter().map(|&p| (i, p)));
        } else {
            items.push((i, 0));
        }
    }
    items
}

/// Derives an independent stream seed for one (task, fold) pair.
fn pair_seed(seed: u64, task: Task, fold: usize, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed
        ^ (task.index() as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (fold as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9)
        ^ salt.wrapping_mul(0x94D0_49BB_1331_11EB);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Probability of class 1 and the argmax for each record under `scheme`
/// (no augmentation).
pub fn predict_records(
    model: &CnnModel,
    records: &[Record],
    scheme: Scheme,
    input: InputScale,
    exec: Exec,
) -> Vec<(f64, u8)> {
    let spec = scheme.layout();
    exec.map(records, |r| {
        let p = model.forward(&input.to_input(&render(r, &spec, 0).pixels));
        (p[1], u8::from(p[1] > p[0]))
    })
}

fn run_pair(records: &[Record], plan: &FoldPlan, cfg: &MatrixConfig, task: Task, fold: usize) -> Result<FoldRun> {
    let train_idx = plan.training(fold);
    let val_idx = plan.validation(fold);
    let items = training_items(records, &train_idx, cfg.scheme, cfg.include_original);
    let samples = RenderedSamples::new(
        records,
        items,
        cfg.scheme.layout(),
        cfg.input,
        task,
        cfg.train.exec,
    );
    let arch = cfg.arch.build(cfg.input);
    let model = init_model(&arch, pair_seed(cfg.train.seed, task, fold, 1))?;
    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = pair_seed(cfg.train.seed, task, fold, 2);
    let report = train(model, &samples, &train_cfg)?;
    let mut model = report.model;
    model.round_to_f32();

    let val_records: Vec<Record> = val_idx.iter().map(|&i| records[i].clone()).collect();
    let predictions = predict_records(&model, &val_records, cfg.scheme, cfg.input, cfg.train.exec)
        .into_iter()
        .zip(&val_records)
        .map(|((prob_1, pred), r)| Prediction {
            record_id: r.sentenceid.clone(),
            task,
            fold,
            prob_1,
            pred,
        })
        .collect();
    Ok(FoldRun {
        task,
        fold,
        model,
        loss_trace: report.loss_trace,
        training_items: samples.items,
        validation_records: val_idx,
        predictions,
    })
}

/// Trains and scores every (task, fold) pair.
pub fn run_matrix(records: &[Record], plan: &FoldPlan, cfg: &MatrixConfig) -> Result<Vec<FoldRun>> {
    if !matches!(cfg.scheme, Scheme::One | Scheme::Four) {
        return Err(Error::InvalidArgument(format!(
            "the protocol runs designs one and four, not {}",
            cfg.scheme
        )));
    }
    if plan.len() != records.len() {
        return Err(Error::InvalidArgument(format!(
            "fold plan covers {} records, corpus has {}",
            plan.len(),
            records.len()
        )));
    }
    if let Some(i) = records.iter().position(|r| r.task_labels.is_none()) {
        return Err(Error::Row {
            row: i + 1,
            message: "record has no task labels".into(),
        });
    }
    let folds = cfg.folds.clone().unwrap_or_else(|| (0..plan.k).collect());
    if let Some(&f) = folds.iter().find(|&&f| f >= plan.k) {
        return Err(Error::InvalidArgument(format!("fold {f} out of range for k={}", plan.k)));
    }
    let pairs: Vec<(Task, usize)> = cfg
        .tasks
        .iter()
        .flat_map(|&t| folds.iter().map(move |&f| (t, f)))
        .collect();
    cfg.exec
        .try_map(&pairs, |&(task, fold)| run_pair(records, plan, cfg, task, fold))
}

pub fn write_predictions(path: &Path, predictions: &[Prediction]) -> Result<()> {
    let mut s = String::from("record_id,task,fold,prob_1,pred\n");
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for p in predictions {
        w.write_record([
            p.record_id.clone(),
            p.task.to_string(),
            p.fold.to_string(),
            format!("{:.6}", p.prob_1),
            p.pred.to_string(),
        ])?;
    }
    let body = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    s.push_str(&String::from_utf8_lossy(&body));
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = || Error::format(path, format!("line {}: malformed prediction", i + 2));
        let field = |j: usize| rec.get(j).ok_or_else(bad);
        out.push(Prediction {
            record_id: field(0)?.to_string(),
            task: field(1)?.parse()?,
            fold: field(2)?.parse().map_err(|_| bad())?,
            prob_1: field(3)?.parse().map_err(|_| bad())?,
            pred: match field(4)? {
                "0" => 0,
                "1" => 1,
                _ => return Err(bad()),
            },
        });
    }
    Ok(out)
}

/// Paths written for one run under `out_dir`.
#[derive(Debug, Clone)]
pub struct RunFiles {
    pub model: PathBuf,
    pub predictions: PathBuf,
    pub manifest: PathBuf,
}

/// Writes the checkpoint, prediction file and training manifest of a run.
pub fn write_run(out_dir: &Path, records: &[Record], scheme: Scheme, run: &FoldRun) -> Result<RunFiles> {
    let dirs = ["models", "predictions", "manifests"].map(|d| out_dir.join(d));
    for d in &dirs {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let stem = run.file_stem();
    let files = RunFiles {
        model: dirs[0].join(format!("{stem}.scnn")),
        predictions: dirs[1].join(format!("{stem}.csv")),
        manifest: dirs[2].join(format!("{stem}.csv")),
    };
    save_model(&run.model, &files.model)?;
    write_predictions(&files.predictions, &run.predictions)?;
    let task_name = run.task.to_string();
    let entries: Vec<ManifestEntry> = run
        .training_items
        .iter()
        .enumerate()
        .map(|(i, &(r, p))| ManifestEntry {
            index: i,
            record_id: records[r].sentenceid.clone(),
            design: scheme.name().to_string(),
            prefix_spaces: p,
            task: task_name.clone(),
            label: records[r]
                .task_label(run.task)
                .map_or_else(|| "-".into(), |l| l.to_string()),
        })
        .collect();
    write_manifest(&files.manifest, &entries)?;
    Ok(files)
}

/// Key-value description of a run directory.
pub fn describe_run(cfg: &MatrixConfig, k: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "design={}", cfg.scheme);
    let _ = writeln!(s, "k={k}");
    let _ = writeln!(s, "seed={}", cfg.train.seed);
    let tasks: Vec<String> = cfg.tasks.iter().map(Task::to_string).collect();
    let _ = writeln!(s, "tasks={}", tasks.join("|"));
    let _ = writeln!(s, "input={:?}", cfg.input);
    let _ = writeln!(s, "arch={:?}", cfg.arch);
    let _ = writeln!(s, "epochs={}", cfg.train.epochs);
    let _ = writeln!(s, "learning_rate={}", cfg.train.learning_rate);
    let _ = writeln!(s, "batch_size={}", cfg.train.batch_size);
    let _ = writeln!(s, "include_original={}", cfg.include_original);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::make_folds;

    fn corpus(n: usize) -> Vec<Record> {
        (0..n)
            .map(|i| {
                let words = 38 + i % 6;
                let text = vec!["ab"; words].join(" ");
                let mut r = Record::from_text(format!("s{i}"), text);
                r.task_labels = Some([(i % 2) as u8; 6]);
                r
            })
            .collect()
    }

    #[test]
    fn scheme_four_augments_training_only() {
        let recs = corpus(12);
        let plan = make_folds(&recs, 3, 1).unwrap();
        let cfg = MatrixConfig {
            scheme: Scheme::Four,
            tasks: vec![Task::Support],
            folds: Some(vec![1]),
            input: InputScale::Desk,
            arch: ArchPreset::Compact,
            train: TrainConfig::with_epochs(1),
            ..MatrixConfig::default()
        };
        let runs = run_matrix(&recs, &plan, &cfg).unwrap();
        assert_eq!(runs.len(), 1);
        let run = &runs[0];
        assert_eq!(run.predictions.len(), plan.validation(1).len());
        assert_eq!(run.leaked_records(), 0);
        let expected: usize = plan.training(1).iter().map(|&i| 43 - (38 + i % 6).min(42)).sum();
        assert_eq!(run.training_items.len(), expected);
    }

    #[test]
    fn rejects_unlabeled_and_bad_scheme() {
        let mut recs = corpus(4);
        let plan = make_folds(&recs, 2, 1).unwrap();
        let cfg = MatrixConfig {
            scheme: Scheme::Two,
            ..MatrixConfig::default()
        };
        assert!(run_matrix(&recs, &plan, &cfg).is_err());
        recs[2].task_labels = None;
        let cfg = MatrixConfig::default();
        assert!(matches!(run_matrix(&recs, &plan, &cfg), Err(Error::Row { row: 3, .. })));
    }

    #[test]
    fn training_item_expansion() {
        let recs = corpus(3);
        let items = training_items(&recs, &[0, 2], Scheme::Four, false);
        // 38 tokens -> prefixes 1..=4, 40 tokens -> 1..=2
        assert_eq!(items, vec![(0, 1), (0, 2), (0, 3), (0, 4), (2, 1), (2, 2)]);
        assert_eq!(training_items(&recs, &[1], Scheme::One, true), vec![(1, 0)]);
    }

    #[test]
    fn predictions_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let preds = vec![
            Prediction { record_id: "a,b".into(), task: Task::Support, fold: 3, prob_1: 0.25, pred: 0 },
            Prediction { record_id: "c".into(), task: Task::GeneralSupport, fold: 0, prob_1: 0.875, pred: 1 },
        ];
        write_predictions(&path, &preds).unwrap();
        assert_eq!(read_predictions(&path).unwrap(), preds);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("record_id,task,fold,prob_1,pred\n"));
    }

    #[test]
    fn pair_seeds_differ() {
        let a = pair_seed(1, Task::Support, 0, 1);
        assert_ne!(a, pair_seed(1, Task::Support, 1, 1));
        assert_ne!(a, pair_seed(1, Task::GeneralSupport, 0, 1));
        assert_ne!(a, pair_seed(1, Task::Support, 0, 2));
    }
}
