//! Typed views of a [`Config`]. Every reader starts from the defaults and
//! overrides the keys that are present.

use crate::augmentation::{AugmentOptions, Backend};
use crate::error::{Error, Result};
use crate::features::SyntheticSpec;
use crate::scalar::Scalar;
use crate::training::TrainConfig;

use super::config::Config;
use super::corruption::{CorruptionKind, CorruptionSpec};
use super::experiment::{ExperimentConfig, Method, Split, Task};

/// Every key understood by the readers below.
pub const KEYS: &[&str] = &[
    "seed",
    "synth.classes",
    "synth.actions_per_class",
    "synth.segments",
    "synth.dim",
    "synth.true_poses",
    "synth.noise_std",
    "train.sigma",
    "train.epsilon",
    "train.poses",
    "train.max_iterations",
    "train.gradient_tolerance",
    "train.init_scale",
    "train.history",
    "augment.window",
    "augment.backend",
    "augment.known_mask",
    "augment.exclude_masked_original",
    "corrupt.kind",
    "corrupt.ratio",
    "corrupt.known",
    "corrupt.noise_std",
    "corrupt.action_fraction",
    "corrupt.seed",
    "experiment.task",
    "experiment.method",
    "experiment.split",
    "experiment.epsilon_grid",
];

fn seed(cfg: &Config) -> Result<u64> {
    cfg.get_or("seed", 0)
}

pub fn synthetic_spec(cfg: &Config) -> Result<SyntheticSpec> {
    let d = SyntheticSpec::default();
    let spec = SyntheticSpec {
        num_classes: cfg.get_or("synth.classes", d.num_classes)?,
        actions_per_class: cfg.get_or("synth.actions_per_class", d.actions_per_class)?,
        segments: cfg.get_or("synth.segments", d.segments)?,
        dim: cfg.get_or("synth.dim", d.dim)?,
        true_poses: cfg.get_or("synth.true_poses", d.true_poses)?,
        noise_std: cfg.get_or("synth.noise_std", d.noise_std)?,
        seed: seed(cfg)?,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn train_config<T: Scalar>(cfg: &Config) -> Result<TrainConfig<T>> {
    let d = TrainConfig::<T>::default();
    let c = TrainConfig {
        sigma: T::of(cfg.get_or("train.sigma", d.sigma.as_f64())?),
        epsilon: T::of(cfg.get_or("train.epsilon", d.epsilon.as_f64())?),
        num_poses: cfg.get_or("train.poses", d.num_poses)?,
        max_iterations: cfg.get_or("train.max_iterations", d.max_iterations)?,
        gradient_tolerance: T::of(cfg.get_or("train.gradient_tolerance", d.gradient_tolerance.as_f64())?),
        seed: seed(cfg)?,
        init_scale: T::of(cfg.get_or("train.init_scale", d.init_scale.as_f64())?),
        history: cfg.get_or("train.history", d.history)?,
    };
    c.validate()?;
    Ok(c)
}

pub fn augment_options(cfg: &Config) -> Result<AugmentOptions> {
    let d = AugmentOptions::default();
    Ok(AugmentOptions {
        exclude_self: d.exclude_self,
        duplicate_window: cfg.get_or("augment.window", d.duplicate_window)?,
        known_mask_mode: cfg.get_or("augment.known_mask", d.known_mask_mode)?,
        exclude_masked_original: cfg.get_or("augment.exclude_masked_original", d.exclude_masked_original)?,
        backend: cfg.get_or::<Backend>("augment.backend", d.backend)?,
    })
}

/// Corruption for `task`, starting from the task's defaults.
pub fn corruption_spec(cfg: &Config, task: Task) -> Result<CorruptionSpec> {
    let d = task.default_corruption();
    let spec = CorruptionSpec {
        kind: cfg.get_or::<CorruptionKind>("corrupt.kind", d.kind)?,
        ratio: cfg.get_or("corrupt.ratio", d.ratio)?,
        known: cfg.get_or("corrupt.known", d.known)?,
        noise_std: cfg.get_or("corrupt.noise_std", d.noise_std)?,
        seed: cfg.get_or("corrupt.seed", seed(cfg)?)?,
        action_fraction: cfg.get_or("corrupt.action_fraction", d.action_fraction)?,
    };
    spec.validate()?;
    Ok(spec)
}

fn list(cfg: &Config, key: &str) -> Result<Vec<f64>> {
    match cfg.raw(key) {
        None | Some("") => Ok(Vec::new()),
        Some(v) => v
            .split(',')
            .map(|x| {
                x.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad number `{x}` in `{key}`")))
            })
            .collect(),
    }
}

pub fn experiment_config<T: Scalar>(cfg: &Config) -> Result<ExperimentConfig<T>> {
    let task: Task = cfg.get_or("experiment.task", Task::Task1Clean)?;
    let method: Method = cfg.get_or("experiment.method", Method::Augmented)?;
    let mut c = ExperimentConfig::new(task, method);
    c.corruption = corruption_spec(cfg, task)?;
    c.train = train_config(cfg)?;
    c.augment = augment_options(cfg)?;
    c.split = cfg.get_or::<Split>("experiment.split", c.split)?;
    c.seed = seed(cfg)?;
    c.epsilon_grid = list(cfg, "experiment.epsilon_grid")?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_when_empty() {
        let cfg = Config::default();
        assert_eq!(synthetic_spec(&cfg).unwrap(), SyntheticSpec::default());
        assert_eq!(train_config::<f64>(&cfg).unwrap(), TrainConfig::default());
        assert_eq!(augment_options(&cfg).unwrap(), AugmentOptions::default());
        let gap = corruption_spec(&cfg, Task::Gapfilling).unwrap();
        assert_eq!(gap.kind, CorruptionKind::Gap);
        assert!(gap.known);
    }

    #[test]
    fn overrides_apply() {
        let cfg = Config::parse(
            "seed=9\ntrain.poses=4\ntrain.sigma=2.5\naugment.backend=kdtree\n\
             experiment.task=random-outliers\nexperiment.method=plain\nexperiment.split=loo\n\
             experiment.epsilon_grid=0, 0.1,1\ncorrupt.ratio=0.3\n",
        )
        .unwrap();
        cfg.check_keys(KEYS).unwrap();
        let e = experiment_config::<f64>(&cfg).unwrap();
        assert_eq!(e.task, Task::RandomOutliers);
        assert_eq!(e.method, Method::Plain);
        assert_eq!(e.split, Split::LeaveOneOut);
        assert_eq!(e.train.num_poses, 4);
        assert_eq!(e.train.sigma, 2.5);
        assert_eq!(e.train.seed, 9);
        assert_eq!(e.corruption.seed, 9);
        assert_eq!(e.corruption.ratio, 0.3);
        assert_eq!(e.augment.backend, Backend::KdTree);
        assert_eq!(e.epsilon_grid, vec![0.0, 0.1, 1.0]);
    }

    #[test]
    fn bad_values_are_reported() {
        let cfg = Config::parse("train.poses=0").unwrap();
        assert!(train_config::<f64>(&cfg).is_err());
        let cfg = Config::parse("corrupt.kind=smudge").unwrap();
        assert!(corruption_spec(&cfg, Task::Task2).is_err());
        let cfg = Config::parse("trian.poses=3").unwrap();
        assert!(cfg.check_keys(KEYS).is_err());
    }
}
