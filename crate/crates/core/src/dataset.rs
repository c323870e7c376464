//! Datasets: IDX (MNIST) ingestion, min-max normalization, disjoint-label
//! task splits and a synthetic generator.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypervector::SeededRng;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Canonical MNIST file stems; a `.gz` variant is accepted for each.
pub const MNIST_TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const MNIST_TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const MNIST_TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const MNIST_TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f32>,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    features: usize,
    samples: Vec<Sample>,
}

impl FeatureDataset {
    pub fn new(features: usize, samples: Vec<Sample>) -> Result<Self> {
        if let Some(bad) = samples.iter().find(|s| s.features.len() != features) {
            return Err(Error::FeatureCountMismatch {
                expected: features,
                found: bad.features.len(),
            });
        }
        Ok(Self { features, samples })
    }

    pub fn feature_count(&self) -> usize {
        self.features
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> BTreeSet<u8> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "gz") {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

struct IdxReader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> IdxReader<'a> {
    fn u32(&mut self, what: &str) -> Result<u32> {
        let chunk = self.take(4, what)?;
        Ok(u32::from_be_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]))
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(Error::Truncated {
                path: self.path.to_path_buf(),
                what: format!(
                    "{what}: need {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ),
            }),
        }
    }

    fn magic(&mut self, expected: u32) -> Result<()> {
        let found = self.u32("magic")?;
        if found == expected {
            Ok(())
        } else {
            Err(Error::BadMagic {
                path: self.path.to_path_buf(),
                expected,
                found,
            })
        }
    }
}

/// Images as `(rows, cols, pixels)`, one `rows*cols` block per image.
pub fn read_idx_images(path: &Path) -> Result<(usize, usize, Vec<Vec<u8>>)> {
    let bytes = read_all(path)?;
    let mut r = IdxReader {
        path,
        bytes: &bytes,
        pos: 0,
    };
    r.magic(IMAGES_MAGIC)?;
    let n = r.u32("image count")? as usize;
    let rows = r.u32("row count")? as usize;
    let cols = r.u32("column count")? as usize;
    let size = rows * cols;
    let images = (0..n)
        .map(|i| {
            r.take(size, &format!("image {i} of {n}"))
                .map(<[u8]>::to_vec)
        })
        .collect::<Result<_>>()?;
    Ok((rows, cols, images))
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read_all(path)?;
    let mut r = IdxReader {
        path,
        bytes: &bytes,
        pos: 0,
    };
    r.magic(LABELS_MAGIC)?;
    let n = r.u32("label count")? as usize;
    Ok(r.take(n, &format!("{n} labels"))?.to_vec())
}

/// `parse_idx`: image/label IDX pair to a dataset with `rows*cols` features
/// holding raw pixel values 0..=255.
pub fn parse_idx(images: &Path, labels: &Path) -> Result<FeatureDataset> {
    let (rows, cols, pixels) = read_idx_images(images)?;
    let labels = read_idx_labels(labels)?;
    if pixels.len() != labels.len() {
        return Err(Error::CountMismatch {
            images: pixels.len(),
            labels: labels.len(),
        });
    }
    let samples = pixels
        .into_iter()
        .zip(labels)
        .map(|(px, label)| Sample {
            features: px.into_iter().map(f32::from).collect(),
            label,
        })
        .collect();
    FeatureDataset::new(rows * cols, samples)
}

/// Writes `ds` as an IDX pair with `rows × cols` images. Features are
/// rounded and clamped to bytes. Gzips when a path ends in `.gz`.
pub fn write_idx(
    ds: &FeatureDataset,
    rows: usize,
    cols: usize,
    images: &Path,
    labels: &Path,
) -> Result<()> {
    if rows * cols != ds.feature_count() {
        return Err(Error::FeatureCountMismatch {
            expected: ds.feature_count(),
            found: rows * cols,
        });
    }
    let n = ds.len() as u32;
    let mut img = Vec::with_capacity(16 + ds.len() * rows * cols);
    for word in [IMAGES_MAGIC, n, rows as u32, cols as u32] {
        img.extend_from_slice(&word.to_be_bytes());
    }
    for s in ds.samples() {
        img.extend(
            s.features
                .iter()
                .map(|&x| x.round().clamp(0.0, 255.0) as u8),
        );
    }
    let mut lab = Vec::with_capacity(8 + ds.len());
    lab.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&n.to_be_bytes());
    lab.extend(ds.samples().iter().map(|s| s.label));
    write_maybe_gz(images, &img)?;
    write_maybe_gz(labels, &lab)
}

fn write_maybe_gz(path: &Path, bytes: &[u8]) -> Result<()> {
    let data = if path.extension().is_some_and(|e| e == "gz") {
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(bytes).map_err(|e| Error::io(path, e))?;
        enc.finish().map_err(|e| Error::io(path, e))?
    } else {
        bytes.to_vec()
    };
    fs::write(path, data).map_err(|e| Error::io(path, e))
}

fn locate(dir: &Path, stem: &str) -> Result<PathBuf> {
    let plain = dir.join(stem);
    if plain.is_file() {
        return Ok(plain);
    }
    let gz = dir.join(format!("{stem}.gz"));
    if gz.is_file() {
        return Ok(gz);
    }
    Err(Error::io(
        plain,
        std::io::Error::new(
            std::io::ErrorKind::NotFound,
            "MNIST file not found (also tried .gz)",
        ),
    ))
}

/// Train and test sets from a directory holding the canonical MNIST files.
pub fn load_mnist(dir: &Path) -> Result<(FeatureDataset, FeatureDataset)> {
    let train = parse_idx(
        &locate(dir, MNIST_TRAIN_IMAGES)?,
        &locate(dir, MNIST_TRAIN_LABELS)?,
    )?;
    let test = parse_idx(
        &locate(dir, MNIST_TEST_IMAGES)?,
        &locate(dir, MNIST_TEST_LABELS)?,
    )?;
    Ok((train, test))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Separate min/max for every feature.
    #[default]
    PerFeature,
    /// One min/max over all features.
    Global,
}

/// Fitted min-max transform, reusable on data it was not fitted on.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMax {
    mins: Vec<f32>,
    maxs: Vec<f32>,
}

impl MinMax {
    pub fn fit(ds: &FeatureDataset, mode: Normalization) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let m = ds.feature_count();
        let mut mins = vec![f32::INFINITY; m];
        let mut maxs = vec![f32::NEG_INFINITY; m];
        for s in ds.samples() {
            for ((lo, hi), &x) in mins.iter_mut().zip(maxs.iter_mut()).zip(&s.features) {
                *lo = lo.min(x);
                *hi = hi.max(x);
            }
        }
        if mode == Normalization::Global {
            let lo = mins.iter().copied().fold(f32::INFINITY, f32::min);
            let hi = maxs.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            mins.fill(lo);
            maxs.fill(hi);
        }
        Ok(Self { mins, maxs })
    }

    /// `(x - min) / (max - min)`; constant features map to 0. Values outside
    /// the fitted range are left outside `[0, 1]` for the quantizer to clamp.
    pub fn apply_to(&self, features: &mut [f32]) {
        for ((x, &lo), &hi) in features.iter_mut().zip(&self.mins).zip(&self.maxs) {
            *x = if hi > lo {
                ((f64::from(*x) - f64::from(lo)) / (f64::from(hi) - f64::from(lo))) as f32
            } else {
                0.0
            };
        }
    }

    pub fn apply(&self, ds: &FeatureDataset) -> FeatureDataset {
        let mut out = ds.clone();
        self.apply_in_place(&mut out);
        out
    }

    pub fn apply_in_place(&self, ds: &mut FeatureDataset) {
        for s in &mut ds.samples {
            self.apply_to(&mut s.features);
        }
    }
}

/// `minmax_normalize`: per-feature statistics of `ds` applied to `ds`; the
/// fitted transform is returned for use on held-out data.
pub fn minmax_normalize(ds: &FeatureDataset) -> Result<(FeatureDataset, MinMax)> {
    let mm = MinMax::fit(ds, Normalization::PerFeature)?;
    Ok((mm.apply(ds), mm))
}

/// Ordered label sets, one per task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SplitSpec(Vec<Vec<u8>>);

impl SplitSpec {
    pub fn new(tasks: Vec<Vec<u8>>) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::NoTasks);
        }
        let mut seen = BTreeSet::new();
        let mut shared = BTreeSet::new();
        for (i, set) in tasks.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::EmptyLabelSet(i));
            }
            for &l in set {
                if !seen.insert(l) {
                    shared.insert(l);
                }
            }
        }
        if !shared.is_empty() {
            return Err(Error::OverlappingLabels(shared.into_iter().collect()));
        }
        Ok(Self(tasks))
    }

    /// Consecutive label pairs/triples: `uniform(5, 2)` is {0,1},{2,3},...
    pub fn uniform(tasks: usize, per_task: usize) -> Result<Self> {
        let total = tasks * per_task;
        if total > 256 {
            return Err(Error::Config(format!(
                "{total} labels exceed the u8 label space"
            )));
        }
        Self::new(
            (0..tasks)
                .map(|t| (0..per_task).map(|c| (t * per_task + c) as u8).collect())
                .collect(),
        )
    }

    /// Default split for `s` Split-MNIST tasks: two digits per task for
    /// 2, 4 and 5 tasks, three digits per task for 3 tasks.
    pub fn split_mnist(tasks: usize) -> Result<Self> {
        match tasks {
            2 | 4 | 5 => Self::uniform(tasks, 2),
            3 => Self::uniform(3, 3),
            _ => Err(Error::Config(format!(
                "no default Split-MNIST layout for {tasks} tasks"
            ))),
        }
    }

    pub fn tasks(&self) -> &[Vec<u8>] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn labels(&self) -> BTreeSet<u8> {
        self.0.iter().flatten().copied().collect()
    }

    /// `(task, local class)` of a global label.
    pub fn locate(&self, label: u8) -> Option<(usize, usize)> {
        self.0
            .iter()
            .enumerate()
            .find_map(|(t, set)| set.iter().position(|&l| l == label).map(|c| (t, c)))
    }
}

impl FromStr for SplitSpec {
    type Err = Error;

    /// `"0,1|2,3|4,5"`: tasks separated by `|`, labels by `,`.
    fn from_str(s: &str) -> Result<Self> {
        let tasks = s
            .split('|')
            .map(|task| {
                task.split(',')
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                    .map(|t| {
                        t.parse::<u8>()
                            .map_err(|e| Error::Config(format!("bad label `{t}` in split: {e}")))
                    })
                    .collect::<Result<Vec<u8>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(tasks)
    }
}

impl fmt::Display for SplitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|set| set.iter().map(u8::to_string).collect::<Vec<_>>().join(","))
            .collect();
        f.write_str(&parts.join("|"))
    }
}

impl TryFrom<String> for SplitSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SplitSpec> for String {
    fn from(s: SplitSpec) -> String {
        s.to_string()
    }
}

/// A sample with its task-local class index.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSample {
    pub features: Vec<f32>,
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskData {
    /// Global labels in local class order.
    pub labels: Vec<u8>,
    pub train: Vec<LocalSample>,
    pub test: Vec<LocalSample>,
}

impl TaskData {
    pub fn class_count(&self) -> usize {
        self.labels.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSplit {
    pub features: usize,
    pub tasks: Vec<TaskData>,
    pub dropped_train: usize,
    pub dropped_test: usize,
}

impl TaskSplit {
    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }
}

fn partition(ds: FeatureDataset, spec: &SplitSpec) -> (Vec<Vec<LocalSample>>, usize) {
    let mut parts = vec![Vec::new(); spec.len()];
    let mut dropped = 0;
    for s in ds.into_samples() {
        match spec.locate(s.label) {
            Some((task, class)) => parts[task].push(LocalSample {
                features: s.features,
                class,
            }),
            None => dropped += 1,
        }
    }
    (parts, dropped)
}

/// `split_tasks`: per-task train/test subsets with labels remapped to local
/// class indices; samples of labels outside every set are dropped.
pub fn split_tasks(
    train: FeatureDataset,
    test: FeatureDataset,
    spec: &SplitSpec,
) -> Result<TaskSplit> {
    if train.feature_count() != test.feature_count() {
        return Err(Error::FeatureCountMismatch {
            expected: train.feature_count(),
            found: test.feature_count(),
        });
    }
    let features = train.feature_count();
    let (train_parts, dropped_train) = partition(train, spec);
    let (test_parts, dropped_test) = partition(test, spec);
    let tasks = spec
        .tasks()
        .iter()
        .zip(train_parts.into_iter().zip(test_parts))
        .map(|(labels, (train, test))| TaskData {
            labels: labels.clone(),
            train,
            test,
        })
        .collect();
    Ok(TaskSplit {
        features,
        tasks,
        dropped_train,
        dropped_test,
    })
}

/// Restricts a dataset to the labels named by `spec`.
pub fn retain_labels(ds: &mut FeatureDataset, spec: &SplitSpec) {
    let keep = spec.labels();
    ds.samples.retain(|s| keep.contains(&s.label));
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticParams {
    pub tasks: usize,
    pub classes: usize,
    pub features: usize,
    /// Fraction of coordinates resampled per sample, in `[0, 0.5)`.
    pub noise: f64,
    pub train_per_class: usize,
    pub test_per_class: usize,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            tasks: 3,
            classes: 3,
            features: 64,
            noise: 0.1,
            train_per_class: 50,
            test_per_class: 50,
        }
    }
}

/// `synthetic_blobs`: a uniform random prototype in `[0,1]^m` per
/// (task, class); each sample is its prototype with `round(noise·m)`
/// coordinates, chosen without replacement, redrawn uniformly.
pub fn synthetic_blobs(params: &SyntheticParams, rng: &mut SeededRng) -> Result<TaskSplit> {
    let SyntheticParams {
        tasks,
        classes,
        features,
        noise,
        train_per_class,
        test_per_class,
    } = *params;
    if !(0.0..0.5).contains(&noise) {
        return Err(Error::InvalidNoise(noise));
    }
    if tasks == 0 || features == 0 || train_per_class == 0 || test_per_class == 0 {
        return Err(Error::Config(
            "synthetic tasks, features and per-class sample counts must be positive".into(),
        ));
    }
    if classes < 2 {
        return Err(Error::InvalidClassCount(classes));
    }
    let spec = SplitSpec::uniform(tasks, classes)?;
    let flips = (noise * features as f64).round() as usize;

    let draw = |proto: &[f32], rng: &mut SeededRng| {
        let mut x = proto.to_vec();
        let mut idx: Vec<usize> = (0..features).collect();
        // partial Fisher-Yates picks `flips` distinct coordinates
        for i in 0..flips {
            let j = i + rng.below(features - i);
            idx.swap(i, j);
            x[idx[i]] = rng.unit() as f32;
        }
        x
    };

    let mut out = Vec::with_capacity(tasks);
    for labels in spec.tasks() {
        let protos: Vec<Vec<f32>> = (0..classes)
            .map(|_| (0..features).map(|_| rng.unit() as f32).collect())
            .collect();
        let make = |per_class: usize, rng: &mut SeededRng| {
            let mut v = Vec::with_capacity(per_class * classes);
            for _ in 0..per_class {
                for (class, proto) in protos.iter().enumerate() {
                    v.push(LocalSample {
                        features: draw(proto, rng),
                        class,
                    });
                }
            }
            v
        };
        let train = make(train_per_class, rng);
        let test = make(test_per_class, rng);
        out.push(TaskData {
            labels: labels.clone(),
            train,
            test,
        });
    }
    Ok(TaskSplit {
        features,
        tasks: out,
        dropped_train: 0,
        dropped_test: 0,
    })
}
