//! End-to-end checks on real MNIST. Needs the IDX files in `data/mnist` or
//! `HDMTL_MNIST_DIR` (see `scripts/fetch_mnist.sh`).

mod common;

use std::sync::OnceLock;

use hdmtl::classifier::AmAccumulator;
use hdmtl::dataset::{load_mnist, FeatureDataset, SplitSpec, TaskSplit};
use hdmtl::encoding::{Encoder, ItemMemory, LevelMemory};
use hdmtl::harness::{
    aggregate, evaluate, prepare_split, run_on_split, ExperimentConfig, RunResult,
};
use hdmtl::multitask::{AmTable, MultiTaskModel};
use hdmtl::{Method, SeededRng};

fn mnist() -> &'static (FeatureDataset, FeatureDataset) {
    static DATA: OnceLock<(FeatureDataset, FeatureDataset)> = OnceLock::new();
    DATA.get_or_init(|| {
        let dir = common::mnist_dir();
        load_mnist(&dir).unwrap_or_else(|e| {
            panic!(
                "MNIST not available at {} ({e}); run scripts/fetch_mnist.sh or set HDMTL_MNIST_DIR",
                dir.display()
            )
        })
    })
}

fn three_task() -> &'static (ExperimentConfig, TaskSplit) {
    static SPLIT: OnceLock<(ExperimentConfig, TaskSplit)> = OnceLock::new();
    SPLIT.get_or_init(|| {
        let cfg = ExperimentConfig {
            split: SplitSpec::split_mnist(3).unwrap(),
            runs: 5,
            ..ExperimentConfig::default()
        };
        let (train, test) = mnist();
        let split =
            prepare_split(train.clone(), test.clone(), &cfg.split, cfg.normalization).unwrap();
        (cfg, split)
    })
}

fn three_task_result() -> &'static RunResult {
    static RESULT: OnceLock<RunResult> = OnceLock::new();
    RESULT.get_or_init(|| {
        let (cfg, split) = three_task();
        run_on_split(cfg, split).unwrap()
    })
}

#[test]
fn split_drops_only_digit_nine() {
    let (_, split) = three_task();
    let (train, test) = mnist();
    let nines = |ds: &FeatureDataset| ds.samples().iter().filter(|s| s.label == 9).count();
    assert_eq!(split.dropped_train, nines(train));
    assert_eq!(split.dropped_test, nines(test));
    assert_eq!(split.features, 784);
    for task in &split.tasks {
        assert_eq!(task.class_count(), 3);
    }
}

#[test]
fn ideal_converges_on_every_task() {
    let summary = aggregate(three_task_result());
    let ideal = summary.method(Method::Ideal).unwrap();
    for (t, &acc) in ideal.per_task_mean.iter().enumerate() {
        assert!(acc >= 0.90, "task {t}: {acc}");
    }
}

#[test]
fn forgetting_is_exposed_for_baseline_only() {
    let r = three_task_result();
    let steps = three_task().0.steps_per_task;
    let at = |m, step| r.mean_at(m, 0, step).unwrap();
    assert!(at(Method::Baseline, 3 * steps) < at(Method::Baseline, steps));
    assert!(at(Method::Ideal, steps) - at(Method::Ideal, 3 * steps) <= 0.01);
}

#[test]
fn training_samples_are_recognised() {
    let (_, split) = three_task();
    let task = &split.tasks[0];
    let mut rng = SeededRng::new(1);
    let items = ItemMemory::new(split.features, 5000, &mut rng).unwrap();
    let levels = LevelMemory::new(10, 5000, 0.0, 1.0, &mut rng).unwrap();
    let encoder = Encoder::new(items, levels).unwrap();

    let mut acc = AmAccumulator::new(task.class_count(), 5000).unwrap();
    let mut seen = Vec::new();
    for _ in 0..100 {
        let x = &task.train[rng.below(task.train.len())];
        let s = encoder
            .encode_sample(&x.features, x.class, &mut rng)
            .unwrap();
        acc.train_step(&s).unwrap();
        seen.push(s);
    }
    let table = AmTable::from_memories(vec![acc.finalize(&mut rng).unwrap()]).unwrap();
    let accuracy = evaluate(&MultiTaskModel::Ideal(&table), 0, &seen).unwrap();
    assert!(accuracy >= 0.959, "{accuracy}");
}
