//! Sequential multi-task experiments with checkpointed evaluation.
//!
//! Every run trains the tasks of a split one after another. Each step draws
//! one training sample of the active task uniformly with replacement,
//! encodes it and bundles it into its class. At every checkpoint the active
//! task's AM is snapshotted, the compressed AMs are rebuilt from all tasks
//! trained so far, and every task seen so far is scored on its test subset
//! under each configured method.
//!
//! Run `r` is seeded with `seed + r`. From that stream, in order: item
//! memory, level memory, task keys (one seed, or one LFSR state per task),
//! then child streams for sampling, training-sample tie-breaks, test-sample
//! tie-breaks (one ChaCha stream per test sample), AM snapshots, baseline
//! composition and task-projected composition. Methods therefore never
//! perturb each other's randomness.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{nearest, AmAccumulator};
use crate::dataset::{
    load_mnist, retain_labels, split_tasks, synthetic_blobs, FeatureDataset, MinMax, Normalization,
    SplitSpec, SyntheticParams, TaskSplit,
};
use crate::encoding::{EncodedSample, Encoder, ItemMemory, LevelMemory};
use crate::error::{Error, Result};
use crate::hypervector::{SeededRng, DEFAULT_POLYNOMIAL};
use crate::multitask::{
    compose_baseline, compose_tp, generate_keys, memory_footprint, AmTable, FootprintReport,
    KeySource, KeyStorage, Method, MultiTaskModel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeySourceKind {
    #[default]
    Random,
    Lfsr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DataSource {
    /// Directory with the canonical MNIST IDX files (optionally gzipped).
    Mnist { dir: PathBuf },
    /// Generated blobs; the split comes from the parameters and the data is
    /// drawn from stream `u64::MAX` of the base seed.
    Synthetic(SyntheticParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub levels: usize,
    pub split: SplitSpec,
    pub steps_per_task: usize,
    pub checkpoint_interval: usize,
    pub methods: Vec<Method>,
    pub key_source: KeySourceKind,
    pub runs: usize,
    pub seed: u64,
    pub normalization: Normalization,
    pub data: DataSource,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dim: 5000,
            levels: 10,
            split: SplitSpec::split_mnist(3).expect("built-in split"),
            steps_per_task: 100,
            checkpoint_interval: 10,
            methods: Method::ALL.to_vec(),
            key_source: KeySourceKind::Random,
            runs: 100,
            seed: 0,
            normalization: Normalization::PerFeature,
            data: DataSource::Mnist {
                dir: PathBuf::from("data/mnist"),
            },
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.dim == 0 {
            return fail("dim must be positive".into());
        }
        if self.levels < 2 {
            return fail(format!("levels must be at least 2, got {}", self.levels));
        }
        if self.steps_per_task == 0 {
            return fail("steps_per_task must be positive".into());
        }
        if self.checkpoint_interval == 0 || self.checkpoint_interval > self.steps_per_task {
            return fail(format!(
                "checkpoint_interval must be in 1..={}, got {}",
                self.steps_per_task, self.checkpoint_interval
            ));
        }
        if self.methods.is_empty() {
            return fail("at least one method is required".into());
        }
        if self.runs == 0 {
            return fail("runs must be positive".into());
        }
        Ok(())
    }

    /// Methods in canonical order without duplicates.
    pub fn method_set(&self) -> Vec<Method> {
        let mut m = self.methods.clone();
        m.sort();
        m.dedup();
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub method: Method,
    pub run: usize,
    /// Global training step, counted across tasks from 1.
    pub step: usize,
    pub task: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFinal {
    pub method: Method,
    pub run: usize,
    pub per_task: Vec<f64>,
    pub average: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub curves: Vec<CurvePoint>,
    pub finals: Vec<RunFinal>,
    pub footprints: Vec<FootprintReport>,
    pub warnings: Vec<String>,
}

impl RunResult {
    /// Mean accuracy across runs of `task` under `method` at global `step`.
    pub fn mean_at(&self, method: Method, task: usize, step: usize) -> Option<f64> {
        let xs: Vec<f64> = self
            .curves
            .iter()
            .filter(|p| p.method == method && p.task == task && p.step == step)
            .map(|p| p.accuracy)
            .collect();
        (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Fraction of `test` that `model` labels correctly for `task`.
pub fn evaluate(model: &MultiTaskModel<'_>, task: usize, test: &[EncodedSample]) -> Result<f64> {
    if task >= model.task_count() {
        return Err(Error::UnseenTask(task));
    }
    if test.is_empty() {
        return Err(Error::EmptyTestSet(task));
    }
    let classes = model.class_vectors(task)?;
    let mut correct = 0usize;
    for s in test {
        if nearest(&classes, &s.vector)? == s.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

/// MNIST restricted to `spec`, min-max fitted on the retained training
/// samples and applied to both sets, then split into tasks.
pub fn prepare_split(
    mut train: FeatureDataset,
    mut test: FeatureDataset,
    spec: &SplitSpec,
    normalization: Normalization,
) -> Result<TaskSplit> {
    let (train_total, test_total) = (train.len(), test.len());
    retain_labels(&mut train, spec);
    retain_labels(&mut test, spec);
    let mm = MinMax::fit(&train, normalization)?;
    mm.apply_in_place(&mut train);
    mm.apply_in_place(&mut test);
    let mut split = split_tasks(train, test, spec)?;
    split.dropped_train = train_total - split.tasks.iter().map(|t| t.train.len()).sum::<usize>();
    split.dropped_test = test_total - split.tasks.iter().map(|t| t.test.len()).sum::<usize>();
    Ok(split)
}

/// Loads or generates the configured data and runs every seed.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunResult> {
    config.validate()?;
    let split = match &config.data {
        DataSource::Mnist { dir } => {
            let (train, test) = load_mnist(dir)?;
            prepare_split(train, test, &config.split, config.normalization)?
        }
        DataSource::Synthetic(params) => {
            synthetic_blobs(params, &mut SeededRng::with_stream(config.seed, u64::MAX))?
        }
    };
    run_on_split(config, &split)
}

/// Runs every seed of `config` on a prepared split. Runs execute in
/// parallel; results are ordered by run index.
pub fn run_on_split(config: &ExperimentConfig, split: &TaskSplit) -> Result<RunResult> {
    config.validate()?;
    check_split(split)?;
    let methods = config.method_set();
    let runs: Vec<SingleRun> = (0..config.runs)
        .into_par_iter()
        .map(|r| run_single(config, &methods, split, r))
        .collect::<Result<_>>()?;

    let s = split.task_count();
    let k = split
        .tasks
        .iter()
        .map(|t| t.class_count())
        .max()
        .unwrap_or(0);
    let storage = match config.key_source {
        KeySourceKind::Random => KeyStorage::Stored,
        KeySourceKind::Lfsr => KeyStorage::Regenerated,
    };
    let mut result = RunResult {
        curves: Vec::new(),
        finals: Vec::new(),
        footprints: methods
            .iter()
            .map(|&m| memory_footprint(m, s, k, storage))
            .collect(),
        warnings: Vec::new(),
    };
    for run in runs {
        result.curves.extend(run.curves);
        result.finals.extend(run.finals);
        result.warnings.extend(run.warnings);
    }
    if config.runs == 1 {
        result
            .warnings
            .push("single run: standard deviations are reported as 0".into());
    }
    for w in &result.warnings {
        warn!("{w}");
    }
    Ok(result)
}

fn check_split(split: &TaskSplit) -> Result<()> {
    if split.tasks.is_empty() {
        return Err(Error::NoTasks);
    }
    for (t, task) in split.tasks.iter().enumerate() {
        if task.class_count() < 2 {
            return Err(Error::InvalidClassCount(task.class_count()));
        }
        if task.test.is_empty() {
            return Err(Error::EmptyTestSet(t));
        }
        for class in 0..task.class_count() {
            if !task.train.iter().any(|s| s.class == class) {
                return Err(Error::Config(format!(
                    "task {t} class {class} (label {}) has no training samples",
                    task.labels[class]
                )));
            }
        }
    }
    Ok(())
}

struct SingleRun {
    curves: Vec<CurvePoint>,
    finals: Vec<RunFinal>,
    warnings: Vec<String>,
}

fn run_single(
    config: &ExperimentConfig,
    methods: &[Method],
    split: &TaskSplit,
    run: usize,
) -> Result<SingleRun> {
    let dim = config.dim;
    let s = split.task_count();
    let mut master = SeededRng::new(config.seed.wrapping_add(run as u64));

    let items = ItemMemory::new(split.features, dim, &mut master)?;
    let levels = LevelMemory::new(config.levels, dim, 0.0, 1.0, &mut master)?;
    let encoder = Encoder::new(items, levels)?;

    let source = match config.key_source {
        KeySourceKind::Random => KeySource::Random {
            seed: master.next_u64(),
        },
        KeySourceKind::Lfsr => KeySource::Lfsr {
            polynomial: DEFAULT_POLYNOMIAL.to_vec(),
            states: (0..s)
                .map(|_| loop {
                    let state = master.next_u32();
                    if state != 0 {
                        break u64::from(state);
                    }
                })
                .collect(),
        },
    };
    let keys = generate_keys(s, dim, source)?;

    let mut sampling = master.fork();
    let mut train_ties = master.fork();
    let test_seed = master.next_u64();
    let mut snapshot_rng = master.fork();
    let mut baseline_rng = master.fork();
    let mut tp_rng = master.fork();

    let mut offset = 0u64;
    let mut test_sets = Vec::with_capacity(s);
    for task in &split.tasks {
        let base = offset;
        let encoded = task
            .test
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                let mut rng = SeededRng::with_stream(test_seed, base + i as u64);
                encoder.encode_sample(&x.features, x.class, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        offset += task.test.len() as u64;
        test_sets.push(encoded);
    }

    let mut out = SingleRun {
        curves: Vec::new(),
        finals: Vec::new(),
        warnings: Vec::new(),
    };
    let mut trained = AmTable::new();
    let steps = config.steps_per_task;
    let mut last_scores: Vec<(Method, Vec<f64>)> = Vec::new();

    for (t, task) in split.tasks.iter().enumerate() {
        let mut acc = AmAccumulator::new(task.class_count(), dim)?;
        for step in 1..=steps {
            let x = &task.train[sampling.below(task.train.len())];
            let sample = encoder.encode_sample(&x.features, x.class, &mut train_ties)?;
            acc.train_step(&sample)?;

            let last = step == steps;
            if step % config.checkpoint_interval != 0 && !last {
                continue;
            }
            let am = if last {
                acc.finalize(&mut snapshot_rng).map_err(|e| {
                    Error::Config(format!("run {run}, task {t}: {e} after {steps} steps"))
                })?
            } else {
                acc.snapshot(&mut snapshot_rng)?
            };
            if !last {
                if let Some(class) = acc.samples_per_class().iter().position(|&n| n == 0) {
                    out.warnings.push(format!(
                        "run {run}, task {t}, step {step}: class {class} not drawn yet, \
                         evaluated with a random class vector"
                    ));
                }
            }
            let mut table = trained.clone();
            table.push(am.clone())?;
            let global_step = t * steps + step;

            last_scores.clear();
            for &method in methods {
                let scores = score_all(
                    method,
                    &table,
                    &keys,
                    &mut baseline_rng,
                    &mut tp_rng,
                    &test_sets,
                )?;
                for (u, &accuracy) in scores.iter().enumerate() {
                    out.curves.push(CurvePoint {
                        method,
                        run,
                        step: global_step,
                        task: u,
                        accuracy,
                    });
                }
                last_scores.push((method, scores));
            }
            if last {
                trained.push(am)?;
            }
        }
    }

    for (method, per_task) in last_scores {
        let average = per_task.iter().sum::<f64>() / per_task.len() as f64;
        out.finals.push(RunFinal {
            method,
            run,
            per_task,
            average,
        });
    }
    Ok(out)
}

/// Accuracy of every task in `table` under `method`.
fn score_all(
    method: Method,
    table: &AmTable,
    keys: &crate::multitask::TaskKeySet,
    baseline_rng: &mut SeededRng,
    tp_rng: &mut SeededRng,
    test_sets: &[Vec<EncodedSample>],
) -> Result<Vec<f64>> {
    let seen = table.len();
    let compressed;
    let prefix;
    let model = match method {
        Method::Ideal => MultiTaskModel::Ideal(table),
        Method::Baseline => {
            compressed = compose_baseline(table, baseline_rng)?;
            MultiTaskModel::Baseline(&compressed)
        }
        Method::TaskProjected => {
            prefix = keys.prefix(seen)?;
            compressed = compose_tp(table, &prefix, tp_rng)?;
            MultiTaskModel::TaskProjected {
                compressed: &compressed,
                keys: &prefix,
            }
        }
    };
    (0..seen)
        .into_par_iter()
        .map(|u| evaluate(&model, u, &test_sets[u]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub runs: usize,
    pub mean: f64,
    /// Spread of the per-run averaged accuracy.
    pub std: f64,
    /// Spread of every final per-task accuracy of every run, the figure
    /// usually quoted next to a split's mean.
    pub task_std: f64,
    pub per_task_mean: Vec<f64>,
    pub per_task_std: Vec<f64>,
    pub low_run_warning: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub methods: Vec<MethodSummary>,
}

impl Summary {
    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }
}

/// Mean and sample standard deviation; the deviation of one value is 0.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-method mean ± sample std of the final averaged accuracy, the std
/// pooled over all (run, task) finals, and per-task breakdowns.
pub fn aggregate(result: &RunResult) -> Summary {
    let mut methods: Vec<Method> = result.finals.iter().map(|f| f.method).collect();
    methods.sort();
    methods.dedup();
    let methods = methods
        .into_iter()
        .map(|method| {
            let finals: Vec<&RunFinal> = result
                .finals
                .iter()
                .filter(|f| f.method == method)
                .collect();
            let averages: Vec<f64> = finals.iter().map(|f| f.average).collect();
            let (mean, std) = mean_std(&averages);
            let pooled: Vec<f64> = finals
                .iter()
                .flat_map(|f| f.per_task.iter().copied())
                .collect();
            let task_std = mean_std(&pooled).1;
            let tasks = finals.iter().map(|f| f.per_task.len()).max().unwrap_or(0);
            let (per_task_mean, per_task_std) = (0..tasks)
                .map(|t| {
                    let xs: Vec<f64> = finals
                        .iter()
                        .filter_map(|f| f.per_task.get(t).copied())
                        .collect();
                    mean_std(&xs)
                })
                .unzip();
            MethodSummary {
                method,
                runs: finals.len(),
                mean,
                std,
                task_std,
                per_task_mean,
                per_task_std,
                low_run_warning: finals.len() < 2,
            }
        })
        .collect();
    Summary { methods }
}

pub const CURVES_FILE: &str = "curves.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Curves CSV text: `method,run,checkpoint_step,task,accuracy`.
pub fn curves_csv(result: &RunResult) -> String {
    let mut out = String::from("method,run,checkpoint_step,task,accuracy\n");
    for p in &result.curves {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6}",
            p.method, p.run, p.step, p.task, p.accuracy
        );
    }
    out
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    config: &'a ExperimentConfig,
    methods: &'a [MethodSummary],
    footprints: &'a [FootprintReport],
    warnings: &'a [String],
}

pub fn summary_json(
    config: &ExperimentConfig,
    result: &RunResult,
    summary: &Summary,
) -> Result<String> {
    let file = SummaryFile {
        config,
        methods: &summary.methods,
        footprints: &result.footprints,
        warnings: &result.warnings,
    };
    let mut text = serde_json::to_string_pretty(&file).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Writes the curves CSV and summary JSON into `out_dir`, creating it.
pub fn emit_results(
    config: &ExperimentConfig,
    result: &RunResult,
    out_dir: &Path,
) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let curves = out_dir.join(CURVES_FILE);
    let summary_path = out_dir.join(SUMMARY_FILE);
    fs::write(&curves, curves_csv(result)).map_err(|e| Error::io(&curves, e))?;
    let summary = aggregate(result);
    fs::write(&summary_path, summary_json(config, result, &summary)?)
        .map_err(|e| Error::io(&summary_path, e))?;
    Ok((curves, summary_path))
}
