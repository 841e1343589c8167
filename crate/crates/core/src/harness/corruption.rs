//! Synthetic outlier injection.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::features::{Dataset, FeatureVector};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorruptionKind {
    /// One contiguous run centred in the action.
    Gap,
    /// One contiguous run at the end.
    Truncate,
    /// Distinct segments drawn uniformly.
    RandomSegments,
    /// Like `RandomSegments`, but noise is added to the original instead of
    /// replacing it.
    NoiseOverlay,
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gap => "gap",
            Self::Truncate => "truncate",
            Self::RandomSegments => "random-segments",
            Self::NoiseOverlay => "noise-overlay",
        })
    }
}

impl FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gap" => Ok(Self::Gap),
            "truncate" => Ok(Self::Truncate),
            "random-segments" => Ok(Self::RandomSegments),
            "noise-overlay" => Ok(Self::NoiseOverlay),
            _ => Err(Error::Config(format!("unknown corruption kind `{s}`"))),
        }
    }
}

pub const MAX_RATIO: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    /// Fraction of each corrupted action's segments, in `[0, 0.8]`.
    pub ratio: f64,
    /// Whether the masks are exposed on the corrupted actions.
    pub known: bool,
    /// Standard deviation of the overlay noise.
    pub noise_std: f64,
    pub seed: u64,
    /// Fraction of actions that are corrupted at all.
    pub action_fraction: f64,
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        Self {
            kind: CorruptionKind::RandomSegments,
            ratio: 0.0,
            known: false,
            noise_std: 1.0,
            seed: 0,
            action_fraction: 1.0,
        }
    }
}

impl CorruptionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=MAX_RATIO).contains(&self.ratio) {
            return Err(Error::Config(format!(
                "ratio {} outside [0, {MAX_RATIO}]",
                self.ratio
            )));
        }
        if !(0.0..=1.0).contains(&self.action_fraction) {
            return Err(Error::Config("action fraction must lie in [0, 1]".into()));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config("noise_std must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Number of corrupted segments in a corrupted action of length `t`.
    pub fn run_length(&self, t: usize) -> usize {
        ((self.ratio * t as f64).round() as usize).min(t)
    }
}

/// Corrupted copy of a dataset plus the ground truth, which is kept whether
/// or not it is exposed on the actions.
#[derive(Debug, Clone, PartialEq)]
pub struct Corrupted<T> {
    pub dataset: Dataset<T>,
    pub masks: Vec<Vec<bool>>,
}

impl<T> Corrupted<T> {
    pub fn corrupted_segments(&self) -> usize {
        self.masks.iter().flatten().filter(|&&m| m).count()
    }
}

fn positions(kind: CorruptionKind, len: usize, t: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let mut mask = vec![false; t];
    match kind {
        CorruptionKind::Gap => {
            let start = (t - len) / 2;
            mask[start..start + len].iter_mut().for_each(|m| *m = true);
        }
        CorruptionKind::Truncate => mask[t - len..].iter_mut().for_each(|m| *m = true),
        CorruptionKind::RandomSegments | CorruptionKind::NoiseOverlay => {
            for k in sample(rng, t, len) {
                mask[k] = true;
            }
        }
    }
    mask
}

/// Corrupts `spec.action_fraction` of the actions. Uncorrupted segments are
/// left bitwise unchanged. Replacement noise has mean 0 and the dataset's
/// feature standard deviation.
pub fn inject_corruption<T: Scalar>(dataset: &Dataset<T>, spec: &CorruptionSpec) -> Result<Corrupted<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = dataset.actions.len();
    let n_corrupt = ((spec.action_fraction * n as f64).round() as usize).min(n);
    let mut selected = vec![false; n];
    for i in sample(&mut rng, n, n_corrupt) {
        selected[i] = true;
    }
    let fill = Normal::new(0.0, dataset.feature_std().as_f64())
        .map_err(|e| Error::invalid(e.to_string()))?;
    let overlay = Normal::new(0.0, spec.noise_std).map_err(|e| Error::invalid(e.to_string()))?;

    let mut out = dataset.clone();
    let mut masks = Vec::with_capacity(n);
    for (action, &chosen) in out.actions.iter_mut().zip(&selected) {
        let t = action.len();
        let len = if chosen { spec.run_length(t) } else { 0 };
        let mask = positions(spec.kind, len, t, &mut rng);
        for (seg, _) in action.segments.iter_mut().zip(&mask).filter(|(_, &m)| m) {
            *seg = match spec.kind {
                CorruptionKind::NoiseOverlay => FeatureVector(
                    seg.0
                        .iter()
                        .map(|&v| v + T::of(overlay.sample(&mut rng)))
                        .collect(),
                ),
                _ => FeatureVector((0..seg.dim()).map(|_| T::of(fill.sample(&mut rng))).collect()),
            };
        }
        action.known_outlier_mask = spec.known.then(|| mask.clone());
        masks.push(mask);
    }
    Ok(Corrupted { dataset: out, masks })
}
