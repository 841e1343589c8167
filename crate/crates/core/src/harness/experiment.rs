//! End-to-end evaluation: split, corrupt, augment, train, predict, score.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::augmentation::{augment_actions, AugmentOptions, AugmentedAction, RetrievalIndex};
use crate::engine::{class_posterior, class_posterior_with_decode, ModelParameters};
use crate::error::{Error, Result};
use crate::features::{ActionSequence, Dataset};
use crate::scalar::{dot, Scalar};
use crate::training::{train, TrainConfig};

use super::corruption::{inject_corruption, CorruptionKind, CorruptionSpec, MAX_RATIO};
use super::metrics::{alternative_quality, correct_replacement, AlternativeQuality, ConfusionMatrix, ReplacementStats};

/// Fraction of corrupted actions in the mixed task by default.
pub const MIXED_ACTION_FRACTION: f64 = 0.38;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// Clean training and test data.
    Task1Clean,
    /// Clean training data, corrupted test data.
    Task2,
    /// A fraction of both training and test actions corrupted.
    Task3Mixed,
    /// A centred gap in every test action.
    Gapfilling,
    /// Missing tail in every test action; the tail's originals are ruled out.
    EarlyPrediction,
    /// Randomly placed outlier segments in every test action.
    RandomOutliers,
}

impl Task {
    pub const ALL: [Task; 6] = [
        Task::Task1Clean,
        Task::Task2,
        Task::Task3Mixed,
        Task::Gapfilling,
        Task::EarlyPrediction,
        Task::RandomOutliers,
    ];

    pub fn corrupts_training(self) -> bool {
        self == Task::Task3Mixed
    }

    fn required_kind(self) -> Option<CorruptionKind> {
        match self {
            Task::Gapfilling => Some(CorruptionKind::Gap),
            Task::EarlyPrediction => Some(CorruptionKind::Truncate),
            Task::RandomOutliers => Some(CorruptionKind::RandomSegments),
            _ => None,
        }
    }

    /// Corruption settings implied by the task, with ratio 0.
    pub fn default_corruption(self) -> CorruptionSpec {
        let base = CorruptionSpec::default();
        match self {
            Task::Task1Clean | Task::Task2 | Task::RandomOutliers => base,
            Task::Task3Mixed => CorruptionSpec {
                action_fraction: MIXED_ACTION_FRACTION,
                ..base
            },
            Task::Gapfilling => CorruptionSpec {
                kind: CorruptionKind::Gap,
                known: true,
                ..base
            },
            Task::EarlyPrediction => CorruptionSpec {
                kind: CorruptionKind::Truncate,
                known: true,
                ..base
            },
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Task1Clean => "task1-clean",
            Task::Task2 => "task2",
            Task::Task3Mixed => "task3-mixed",
            Task::Gapfilling => "gapfilling",
            Task::EarlyPrediction => "early-prediction",
            Task::RandomOutliers => "random-outliers",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "task1-clean" | "task1" => Ok(Task::Task1Clean),
            "task2" | "task2-clean-train-corrupt-test" => Ok(Task::Task2),
            "task3-mixed" | "task3" => Ok(Task::Task3Mixed),
            "gapfilling" => Ok(Task::Gapfilling),
            "early-prediction" => Ok(Task::EarlyPrediction),
            "random-outliers" => Ok(Task::RandomOutliers),
            _ => Err(Error::Config(format!("unknown task `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Alternative-augmented model.
    Augmented,
    /// The same model on plain sequences.
    Plain,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Augmented => "augmented",
            Method::Plain => "plain",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "augmented" => Ok(Method::Augmented),
            "plain" => Ok(Method::Plain),
            _ => Err(Error::Config(format!("unknown method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Split {
    /// Stratified k folds.
    KFold(usize),
    LeaveOneOut,
    /// Stratified single split with the given training fraction.
    Fixed(f64),
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::KFold(k) => write!(f, "kfold:{k}"),
            Split::LeaveOneOut => f.write_str("loo"),
            Split::Fixed(x) => write!(f, "fixed:{x}"),
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad split `{s}` (kfold:K, loo or fixed:FRACTION)"));
        match s.split_once(':') {
            None if s == "loo" => Ok(Split::LeaveOneOut),
            Some(("kfold", k)) => k.parse().map(Split::KFold).map_err(|_| bad()),
            Some(("fixed", x)) => x.parse().map(Split::Fixed).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig<T> {
    pub task: Task,
    pub method: Method,
    pub corruption: CorruptionSpec,
    pub train: TrainConfig<T>,
    /// Retrieval options. Mask handling follows `corruption.known`.
    pub augment: AugmentOptions,
    pub split: Split,
    /// Seeds fold assignment.
    pub seed: u64,
    /// Candidate inlier biases as multiples of the median unary magnitude.
    /// Empty keeps `train.epsilon`.
    pub epsilon_grid: Vec<f64>,
}

impl<T: Scalar> ExperimentConfig<T> {
    pub fn new(task: Task, method: Method) -> Self {
        Self {
            task,
            method,
            corruption: task.default_corruption(),
            train: TrainConfig::default(),
            augment: AugmentOptions::default(),
            split: Split::KFold(5),
            seed: 0,
            epsilon_grid: Vec::new(),
        }
    }

    /// Checks everything that can be checked before any compute.
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.corruption.validate()?;
        if self.task == Task::Task1Clean && self.corruption.ratio != 0.0 {
            return Err(Error::Config("task1-clean forbids corruption".into()));
        }
        if let Some(kind) = self.task.required_kind() {
            if self.corruption.kind != kind {
                return Err(Error::Config(format!(
                    "{} requires {kind} corruption, got {}",
                    self.task, self.corruption.kind
                )));
            }
        }
        if self.task == Task::EarlyPrediction && !self.corruption.known {
            return Err(Error::Config("early-prediction needs known masks".into()));
        }
        match self.split {
            Split::KFold(k) if k < 2 => return Err(Error::Config("kfold needs at least 2 folds".into())),
            Split::Fixed(x) if !(x > 0.0 && x < 1.0) => {
                return Err(Error::Config("fixed split fraction must lie in (0, 1)".into()))
            }
            _ => {}
        }
        if self.epsilon_grid.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::Config("epsilon grid values must be finite and non-negative".into()));
        }
        Ok(())
    }

    fn test_options(&self) -> AugmentOptions {
        AugmentOptions {
            exclude_self: false,
            known_mask_mode: self.corruption.known,
            exclude_masked_original: self.task == Task::EarlyPrediction,
            ..self.augment.clone()
        }
    }

    fn train_options(&self) -> AugmentOptions {
        AugmentOptions {
            exclude_self: true,
            known_mask_mode: self.corruption.known,
            exclude_masked_original: false,
            ..self.augment.clone()
        }
    }
}

/// Deterministic outcome of an experiment at one corruption ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentMetrics {
    pub task: Task,
    pub method: Method,
    pub ratio: f64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub alternative_quality: AlternativeQuality,
    pub replacement: ReplacementStats,
    /// Inlier bias used in each fold.
    pub epsilon: Vec<f64>,
    pub folds: usize,
    /// Retrieval queries spent augmenting test actions.
    pub test_queries: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RuntimeStats {
    /// Summed over folds, including any bias search.
    pub train_seconds: f64,
    pub predict_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub metrics: ExperimentMetrics,
    pub runtime: RuntimeStats,
}

/// `(train, test)` index lists, stratified by label.
pub fn make_folds<T: Scalar>(dataset: &Dataset<T>, split: Split, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let n = dataset.actions.len();
    let mut by_class = vec![Vec::new(); dataset.num_classes()];
    for (i, a) in dataset.actions.iter().enumerate() {
        let y = a
            .label
            .ok_or_else(|| Error::invalid(format!("action {} has no label", a.id)))?;
        by_class[y].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for members in &mut by_class {
        members.shuffle(&mut rng);
    }
    let assign = |fold_of: &dyn Fn(usize, usize) -> usize, count: usize| {
        let mut folds = vec![(Vec::new(), Vec::new()); count];
        for members in &by_class {
            for (rank, &i) in members.iter().enumerate() {
                let f = fold_of(rank, members.len());
                for (k, fold) in folds.iter_mut().enumerate() {
                    if k == f {
                        fold.1.push(i);
                    } else {
                        fold.0.push(i);
                    }
                }
            }
        }
        folds
    };
    let mut folds = match split {
        Split::KFold(k) => {
            if k > n {
                return Err(Error::Config(format!("{k} folds for {n} actions")));
            }
            assign(&|rank, _| rank % k, k)
        }
        Split::LeaveOneOut => (0..n).map(|i| ((0..n).filter(|&j| j != i).collect(), vec![i])).collect(),
        Split::Fixed(frac) => assign(
            &|rank, len| usize::from(rank >= ((frac * len as f64).round() as usize).clamp(1, len)),
            2,
        )
        .into_iter()
        .skip(1)
        .collect(),
    };
    for (train, test) in &mut folds {
        train.sort_unstable();
        test.sort_unstable();
    }
    folds.retain(|(train, test)| !train.is_empty() && !test.is_empty());
    if folds.is_empty() {
        return Err(Error::Config("split leaves no fold with both training and test actions".into()));
    }
    Ok(folds)
}

struct FoldModel<T> {
    params: ModelParameters<T>,
    index: Option<RetrievalIndex<T>>,
    train_seconds: f64,
}

#[derive(Default)]
struct FoldOutcome {
    confusion: Option<ConfusionMatrix>,
    quality: AlternativeQuality,
    replacement: ReplacementStats,
    queries: usize,
    predict_seconds: f64,
}

fn pick<T: Clone>(items: &[T], indices: &[usize]) -> Vec<T> {
    indices.iter().map(|&i| items[i].clone()).collect()
}

fn median_abs_unary<T: Scalar>(actions: &[AugmentedAction<T>], params: &ModelParameters<T>) -> f64 {
    let mut values: Vec<f64> = actions
        .iter()
        .flat_map(|a| a.segments.iter())
        .flat_map(|s| (0..params.num_poses()).map(move |p| dot(s.original.as_slice(), params.pose(p)).abs().as_f64()))
        .collect();
    if values.is_empty() {
        return 1.0;
    }
    values.sort_by(f64::total_cmp);
    let m = values[values.len() / 2];
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

fn accuracy_and_likelihood<T: Scalar>(actions: &[AugmentedAction<T>], params: &ModelParameters<T>) -> Result<(usize, f64)> {
    let mut correct = 0;
    let mut ll = 0.0;
    for a in actions {
        let post = class_posterior(a, params)?;
        let y = a.label.expect("validation actions are labeled");
        correct += usize::from(post.predicted == y);
        ll += post.log_posterior[y].as_f64();
    }
    Ok((correct, ll))
}

/// Picks the inlier bias on a stratified hold-out of the training fold:
/// highest validation accuracy, then likelihood, then the smaller bias.
fn select_epsilon<T: Scalar>(
    config: &ExperimentConfig<T>,
    train_set: &[ActionSequence<T>],
    num_classes: usize,
) -> Result<T> {
    let mut by_class = vec![Vec::new(); num_classes];
    for (i, a) in train_set.iter().enumerate() {
        by_class[a.label.expect("checked by make_folds")].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let (mut inner, mut held) = (Vec::new(), Vec::new());
    for mut members in by_class {
        members.shuffle(&mut rng);
        for (rank, i) in members.iter().enumerate() {
            if members.len() >= 2 && rank % 4 == 3 {
                held.push(*i);
            } else {
                inner.push(*i);
            }
        }
    }
    if held.is_empty() {
        return Ok(config.train.epsilon);
    }
    inner.sort_unstable();
    held.sort_unstable();
    let inner = pick(train_set, &inner);
    let held = pick(train_set, &held);
    let index = RetrievalIndex::build(&inner, config.augment.backend)?;
    let aug_inner = augment_actions(&index, &inner, &config.train_options())?;
    let aug_held = augment_actions(
        &index,
        &held,
        &AugmentOptions {
            known_mask_mode: false,
            ..config.test_options()
        },
    )?;
    let base_cfg = TrainConfig {
        epsilon: T::zero(),
        ..config.train.clone()
    };
    let (base, _) = train(&aug_inner, num_classes, &base_cfg)?;
    let scale = median_abs_unary(&aug_inner, &base);

    let mut best: Option<((usize, f64), T)> = None;
    for &g in &config.epsilon_grid {
        let eps = T::of(g * scale);
        let params = if g == 0.0 {
            base.clone()
        } else {
            train(&aug_inner, num_classes, &TrainConfig { epsilon: eps, ..config.train.clone() })?.0
        };
        let score = accuracy_and_likelihood(&aug_held, &params)?;
        let better = match &best {
            None => true,
            Some(((c, l), e)) => score.0 > *c || (score.0 == *c && (score.1 > *l || (score.1 == *l && eps < *e))),
        };
        if better {
            best = Some((score, eps));
        }
    }
    Ok(best.map(|(_, e)| e).unwrap_or(config.train.epsilon))
}

fn fit_fold<T: Scalar>(
    config: &ExperimentConfig<T>,
    train_set: &[ActionSequence<T>],
    num_classes: usize,
) -> Result<FoldModel<T>> {
    let start = Instant::now();
    let (params, index) = match config.method {
        Method::Plain => (train(train_set, num_classes, &config.train)?.0, None),
        Method::Augmented => {
            let epsilon = if config.epsilon_grid.is_empty() {
                config.train.epsilon
            } else {
                select_epsilon(config, train_set, num_classes)?
            };
            let index = RetrievalIndex::build(train_set, config.augment.backend)?;
            let aug = augment_actions(&index, train_set, &config.train_options())?;
            let cfg = TrainConfig {
                epsilon,
                ..config.train.clone()
            };
            (train(&aug, num_classes, &cfg)?.0, Some(index))
        }
    };
    Ok(FoldModel {
        params,
        index,
        train_seconds: start.elapsed().as_secs_f64(),
    })
}

fn evaluate_fold<T: Scalar>(
    config: &ExperimentConfig<T>,
    model: &FoldModel<T>,
    test_set: &[ActionSequence<T>],
    masks: &[Vec<bool>],
    num_classes: usize,
) -> Result<FoldOutcome> {
    let start = Instant::now();
    let mut out = FoldOutcome::default();
    let mut confusion = ConfusionMatrix::new(num_classes);
    match &model.index {
        None => {
            let predicted: Vec<usize> = test_set
                .par_iter()
                .map(|a| class_posterior(a, &model.params).map(|p| p.predicted))
                .collect::<Result<_>>()?;
            for (a, y) in test_set.iter().zip(predicted) {
                confusion.record(a.label.expect("labeled"), y)?;
            }
        }
        Some(index) => {
            let before = index.query_count();
            let aug = augment_actions(index, test_set, &config.test_options())?;
            out.queries = index.query_count() - before;
            let posts: Vec<_> = aug
                .par_iter()
                .map(|a| class_posterior_with_decode(a, &model.params))
                .collect::<Result<_>>()?;
            let mut decodes = Vec::with_capacity(posts.len());
            for (a, p) in aug.iter().zip(posts) {
                confusion.record(a.label.expect("labeled"), p.predicted)?;
                decodes.push(p.decode.expect("decode requested").states);
            }
            out.quality = alternative_quality(&aug)?;
            out.replacement = correct_replacement(&aug, &decodes, masks)?;
        }
    }
    out.confusion = Some(confusion);
    out.predict_seconds = start.elapsed().as_secs_f64();
    Ok(out)
}

fn assemble<T: Scalar>(
    config: &ExperimentConfig<T>,
    ratio: f64,
    num_classes: usize,
    parts: Vec<(FoldOutcome, f64, f64)>,
) -> ExperimentReport {
    let mut confusion = ConfusionMatrix::new(num_classes);
    let mut quality = AlternativeQuality::default();
    let mut replacement = ReplacementStats::default();
    let mut runtime = RuntimeStats::default();
    let mut epsilon = Vec::new();
    let mut queries = 0;
    let folds = parts.len();
    for (o, eps, train_seconds) in parts {
        confusion.merge(o.confusion.as_ref().expect("filled by evaluate_fold"));
        quality.merge(&o.quality);
        replacement.merge(&o.replacement);
        queries += o.queries;
        runtime.train_seconds += train_seconds;
        runtime.predict_seconds += o.predict_seconds;
        epsilon.push(eps);
    }
    ExperimentReport {
        metrics: ExperimentMetrics {
            task: config.task,
            method: config.method,
            ratio,
            accuracy: confusion.accuracy().unwrap_or(0.0),
            confusion,
            alternative_quality: quality,
            replacement,
            epsilon,
            folds,
            test_queries: queries,
        },
        runtime,
    }
}

/// Runs the experiment at `config.corruption.ratio`.
pub fn run_experiment<T: Scalar>(config: &ExperimentConfig<T>, dataset: &Dataset<T>) -> Result<ExperimentReport> {
    let ratio = config.corruption.ratio;
    Ok(run_curve(config, dataset, &[ratio])?.remove(0))
}

/// Runs the experiment at each ratio. When training data is never corrupted,
/// each fold's model is trained once and shared by all ratios.
pub fn run_curve<T: Scalar>(
    config: &ExperimentConfig<T>,
    dataset: &Dataset<T>,
    ratios: &[f64],
) -> Result<Vec<ExperimentReport>> {
    config.validate()?;
    if ratios.is_empty() {
        return Err(Error::Config("no ratios given".into()));
    }
    for &r in ratios {
        let spec = CorruptionSpec {
            ratio: r,
            ..config.corruption.clone()
        };
        spec.validate()?;
        if config.task == Task::Task1Clean && r != 0.0 {
            return Err(Error::Config(format!("task1-clean forbids corruption (ratio {r}, max {MAX_RATIO})")));
        }
    }
    dataset.validate()?;
    let ny = dataset.num_classes();
    let folds = make_folds(dataset, config.split, config.seed)?;
    let corrupted = ratios
        .iter()
        .map(|&r| {
            inject_corruption(
                dataset,
                &CorruptionSpec {
                    ratio: r,
                    ..config.corruption.clone()
                },
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let per_fold: Vec<Vec<(FoldOutcome, f64, f64)>> = if config.task.corrupts_training() {
        folds
            .par_iter()
            .map(|(tr, te)| {
                corrupted
                    .iter()
                    .map(|c| {
                        let model = fit_fold(config, &pick(&c.dataset.actions, tr), ny)?;
                        let out = evaluate_fold(config, &model, &pick(&c.dataset.actions, te), &pick(&c.masks, te), ny)?;
                        Ok((out, model.params.epsilon().as_f64(), model.train_seconds))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?
    } else {
        folds
            .par_iter()
            .map(|(tr, te)| {
                let model = fit_fold(config, &pick(&dataset.actions, tr), ny)?;
                corrupted
                    .iter()
                    .enumerate()
                    .map(|(k, c)| {
                        let out = evaluate_fold(config, &model, &pick(&c.dataset.actions, te), &pick(&c.masks, te), ny)?;
                        // the shared model's cost is booked once
                        let secs = if k == 0 { model.train_seconds } else { 0.0 };
                        Ok((out, model.params.epsilon().as_f64(), secs))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?
    };

    let mut by_ratio: Vec<Vec<(FoldOutcome, f64, f64)>> = ratios.iter().map(|_| Vec::new()).collect();
    for fold in per_fold {
        for (k, part) in fold.into_iter().enumerate() {
            by_ratio[k].push(part);
        }
    }
    Ok(by_ratio
        .into_iter()
        .zip(ratios)
        .map(|(parts, &r)| assemble(config, r, ny, parts))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for t in Task::ALL {
            assert_eq!(t.to_string().parse::<Task>().unwrap(), t);
        }
        for m in [Method::Augmented, Method::Plain] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        for s in [Split::KFold(5), Split::LeaveOneOut, Split::Fixed(0.5)] {
            assert_eq!(s.to_string().parse::<Split>().unwrap(), s);
        }
        assert!("kfold:x".parse::<Split>().is_err());
        assert!("task9".parse::<Task>().is_err());
    }

    #[test]
    fn task_defaults_are_consistent() {
        for t in Task::ALL {
            ExperimentConfig::<f64>::new(t, Method::Augmented).validate().unwrap();
        }
        assert_eq!(Task::Task3Mixed.default_corruption().action_fraction, MIXED_ACTION_FRACTION);
    }
}
