use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};
use crate::features::{ActionSequence, ClassId, FeatureVector};
use crate::scalar::{squared_distance, Scalar};

use super::kdtree::KdTree;

/// Exact nearest-neighbour backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    #[default]
    LinearScan,
    KdTree,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backend::LinearScan => "linear",
            Backend::KdTree => "kdtree",
        })
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Backend::LinearScan),
            "kdtree" => Ok(Backend::KdTree),
            _ => Err(Error::Config(format!("unknown backend `{s}` (linear or kdtree)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor<T> {
    /// Insertion index of the training action.
    pub action: usize,
    /// Euclidean distance.
    pub distance: T,
}

/// Position-restricted retrieval over a training set. Read-only after
/// construction apart from the query counter.
#[derive(Debug)]
pub struct RetrievalIndex<T> {
    ids: Vec<String>,
    labels: Vec<Option<ClassId>>,
    segments: Vec<Vec<FeatureVector<T>>>,
    trees: Option<Vec<KdTree>>,
    segments_per_action: usize,
    dim: usize,
    queries: AtomicUsize,
}

impl<T: Scalar> RetrievalIndex<T> {
    pub fn build(training: &[ActionSequence<T>], backend: Backend) -> Result<Self> {
        let Some(first) = training.first() else {
            return Err(Error::invalid("cannot index an empty training set"));
        };
        let t = first.len();
        let d = first.dim();
        for a in training {
            a.validate()?;
            if a.len() != t {
                return Err(Error::invalid(format!(
                    "action {} has {} segments, expected {t}",
                    a.id,
                    a.len()
                )));
            }
            if a.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: a.dim(),
                });
            }
        }
        let mut index = Self {
            ids: training.iter().map(|a| a.id.clone()).collect(),
            labels: training.iter().map(|a| a.label).collect(),
            segments: training.iter().map(|a| a.segments.clone()).collect(),
            trees: None,
            segments_per_action: t,
            dim: d,
            queries: AtomicUsize::new(0),
        };
        if backend == Backend::KdTree {
            let trees = (0..t)
                .map(|j| KdTree::build(&index.column(j)))
                .collect();
            index.trees = Some(trees);
        }
        Ok(index)
    }

    fn column(&self, position: usize) -> Vec<&[T]> {
        self.segments
            .iter()
            .map(|s| s[position].as_slice())
            .collect()
    }

    pub fn backend(&self) -> Backend {
        if self.trees.is_some() {
            Backend::KdTree
        } else {
            Backend::LinearScan
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn segments_per_action(&self) -> usize {
        self.segments_per_action
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn id(&self, action: usize) -> &str {
        &self.ids[action]
    }

    pub fn label(&self, action: usize) -> Option<ClassId> {
        self.labels[action]
    }

    pub fn segment(&self, action: usize, position: usize) -> &FeatureVector<T> {
        &self.segments[action][position]
    }

    pub fn position_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Number of nearest-neighbour queries answered so far.
    pub fn query_count(&self) -> usize {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn reset_query_count(&self) {
        self.queries.store(0, Ordering::Relaxed);
    }

    /// Training action whose `position`-th segment is closest to `query`,
    /// ties going to the earliest inserted action.
    pub fn nearest(&self, query: &[T], position: usize, exclude_id: Option<&str>) -> Result<Neighbor<T>> {
        if position >= self.segments_per_action {
            return Err(Error::invalid(format!(
                "position {position} outside {} segments",
                self.segments_per_action
            )));
        }
        if query.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: query.len(),
            });
        }
        let exclude = exclude_id.and_then(|id| self.position_of(id));
        self.queries.fetch_add(1, Ordering::Relaxed);
        let found = match &self.trees {
            Some(trees) => trees[position].nearest(&self.column(position), query, exclude),
            None => self.scan(query, position, exclude),
        };
        found
            .map(|(action, d2)| Neighbor {
                action,
                distance: d2.sqrt(),
            })
            .ok_or_else(|| Error::invalid("no training action left after exclusion"))
    }

    fn scan(&self, query: &[T], position: usize, exclude: Option<usize>) -> Option<(usize, T)> {
        let mut best: Option<(usize, T)> = None;
        for (i, segs) in self.segments.iter().enumerate() {
            if Some(i) == exclude {
                continue;
            }
            let d = squared_distance(query, segs[position].as_slice());
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best
    }
}

/// Free-function form of [`RetrievalIndex::nearest`] returning the winner's id.
pub fn nearest_training_action<'a, T: Scalar>(
    index: &'a RetrievalIndex<T>,
    query: &FeatureVector<T>,
    position: usize,
    exclude_id: Option<&str>,
) -> Result<&'a str> {
    let n = index.nearest(query.as_slice(), position, exclude_id)?;
    Ok(index.id(n.action))
}
