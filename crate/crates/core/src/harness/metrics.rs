//! Classification and augmentation quality measures.

use crate::augmentation::AugmentedAction;
use crate::engine::CompositeState;
use crate::error::{Error, Result};
use crate::features::ClassId;

/// Rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        Self {
            counts: vec![vec![0; num_classes]; num_classes],
        }
    }

    pub fn from_pairs(num_classes: usize, pairs: impl IntoIterator<Item = (ClassId, ClassId)>) -> Result<Self> {
        let mut m = Self::new(num_classes);
        for (truth, pred) in pairs {
            m.record(truth, pred)?;
        }
        Ok(m)
    }

    pub fn record(&mut self, truth: ClassId, predicted: ClassId) -> Result<()> {
        let n = self.counts.len();
        if truth >= n || predicted >= n {
            return Err(Error::invalid(format!("class outside 0..{n}")));
        }
        self.counts[truth][predicted] += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &Self) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    /// `None` when nothing was recorded.
    pub fn accuracy(&self) -> Option<f64> {
        let n = self.total();
        (n > 0).then(|| self.correct() as f64 / n as f64)
    }
}

/// Sums behind the alternative-quality statistics, mergeable across folds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AlternativeQuality {
    /// Segments that received at least one alternative.
    pub segments: usize,
    pub accurate_fraction_sum: f64,
    pub with_accurate: usize,
}

impl AlternativeQuality {
    pub fn merge(&mut self, other: &Self) {
        self.segments += other.segments;
        self.accurate_fraction_sum += other.accurate_fraction_sum;
        self.with_accurate += other.with_accurate;
    }

    /// Mean over segments of the fraction of same-class alternatives.
    pub fn mean_accurate_fraction(&self) -> Option<f64> {
        (self.segments > 0).then(|| self.accurate_fraction_sum / self.segments as f64)
    }

    /// Fraction of segments with at least one same-class alternative.
    pub fn at_least_one(&self) -> Option<f64> {
        (self.segments > 0).then(|| self.with_accurate as f64 / self.segments as f64)
    }
}

/// An alternative is accurate when it comes from an action of the segment's
/// own true class. Segments without alternatives are not counted.
pub fn alternative_quality<T>(actions: &[AugmentedAction<T>]) -> Result<AlternativeQuality> {
    let mut q = AlternativeQuality::default();
    for a in actions {
        let label = a
            .label
            .ok_or_else(|| Error::invalid(format!("action {} has no label", a.id)))?;
        for seg in a.segments.iter().filter(|s| !s.alternatives.is_empty()) {
            let mut accurate = 0;
            for alt in &seg.alternatives {
                let src = alt.source_label.ok_or_else(|| {
                    Error::invalid(format!("alternative from {} has no source label", alt.source_action_id))
                })?;
                if src == label {
                    accurate += 1;
                }
            }
            q.segments += 1;
            q.accurate_fraction_sum += accurate as f64 / seg.alternatives.len() as f64;
            q.with_accurate += usize::from(accurate > 0);
        }
    }
    Ok(q)
}

/// Counts of decoded substitutions at true outlier segments.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReplacementStats {
    pub replaced: usize,
    pub correct: usize,
}

impl ReplacementStats {
    pub fn merge(&mut self, other: &Self) {
        self.replaced += other.replaced;
        self.correct += other.correct;
    }

    /// `None` when no outlier was replaced.
    pub fn probability(&self) -> Option<f64> {
        (self.replaced > 0).then(|| self.correct as f64 / self.replaced as f64)
    }
}

/// Over segments that are true outliers and whose decoded state selects an
/// alternative, counts how many selected alternatives come from an action of
/// the true class.
pub fn correct_replacement<T>(
    actions: &[AugmentedAction<T>],
    decodes: &[Vec<CompositeState>],
    masks: &[Vec<bool>],
) -> Result<ReplacementStats> {
    if actions.len() != decodes.len() || actions.len() != masks.len() {
        return Err(Error::invalid("actions, decodes and masks differ in length"));
    }
    let mut stats = ReplacementStats::default();
    for ((a, states), mask) in actions.iter().zip(decodes).zip(masks) {
        if states.len() != a.segments.len() || mask.len() != a.segments.len() {
            return Err(Error::invalid(format!("length mismatch for action {}", a.id)));
        }
        let label = a
            .label
            .ok_or_else(|| Error::invalid(format!("action {} has no label", a.id)))?;
        for (t, st) in states.iter().enumerate() {
            if !mask[t] || st.observation == 0 {
                continue;
            }
            let alt = a.segments[t]
                .alternatives
                .get(st.observation - 1)
                .ok_or_else(|| Error::invalid(format!("state {st:?} outside segment {t}")))?;
            let src = alt
                .source_label
                .ok_or_else(|| Error::invalid("alternative without a source label"))?;
            stats.replaced += 1;
            stats.correct += usize::from(src == label);
        }
    }
    Ok(stats)
}
