use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{squared_distance, Scalar};

use super::FeatureVector;

const MAX_LLOYD_ITERATIONS: usize = 300;
const CENTER_SHIFT_TOLERANCE: f64 = 1e-6;

/// Visual-word centres.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook<T> {
    centers: Vec<Vec<T>>,
}

impl<T: Scalar> Codebook<T> {
    pub fn new(centers: Vec<Vec<T>>) -> Result<Self> {
        let Some(first) = centers.first() else {
            return Err(Error::invalid("codebook needs at least one centre"));
        };
        let dim = first.len();
        for c in &centers {
            if c.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: c.len(),
                });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("codebook centre has non-finite entries"));
            }
        }
        let tol = T::of(1e-12);
        for i in 0..centers.len() {
            for j in i + 1..centers.len() {
                if squared_distance(&centers[i], &centers[j]).sqrt() <= tol {
                    return Err(Error::invalid(format!("codebook centres {i} and {j} coincide")));
                }
            }
        }
        Ok(Self { centers })
    }

    pub fn centers(&self) -> &[Vec<T>] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len()
    }

    /// Index of the nearest centre; ties go to the lowest index.
    pub fn nearest(&self, descriptor: &[T]) -> usize {
        nearest_center(&self.centers, descriptor).0
    }
}

fn nearest_center<T: Scalar>(centers: &[Vec<T>], x: &[T]) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (i, c) in centers.iter().enumerate() {
        let d = squared_distance(c, x);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Result of a k-means run.
#[derive(Debug, Clone)]
pub struct KMeansFit<T> {
    pub codebook: Codebook<T>,
    /// Sum of squared distances to the assigned centre, one entry per Lloyd
    /// assignment step.
    pub inertia: Vec<T>,
    pub iterations: usize,
}

/// k-means with k-means++ seeding and Lloyd refinement until no centre moves
/// more than 1e-6 or 300 iterations pass.
pub fn build_codebook<T: Scalar, D: AsRef<[T]>>(
    descriptors: &[D],
    k: usize,
    seed: u64,
) -> Result<KMeansFit<T>> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let Some(first) = descriptors.first() else {
        return Err(Error::invalid("no descriptors"));
    };
    let dim = first.as_ref().len();
    if let Some(bad) = descriptors.iter().find(|d| d.as_ref().len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.as_ref().len(),
        });
    }
    let distinct: HashSet<Vec<u64>> = descriptors
        .iter()
        .map(|d| d.as_ref().iter().map(|v| v.as_f64().to_bits()).collect())
        .collect();
    if distinct.len() < k {
        return Err(Error::invalid(format!(
            "{} distinct descriptors cannot seed {k} clusters",
            distinct.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_plus_plus(descriptors, k, &mut rng);

    let n = descriptors.len();
    let mut assignment = vec![0usize; n];
    let mut inertia = Vec::new();
    let mut iterations = 0;
    let tol = T::of(CENTER_SHIFT_TOLERANCE);
    while iterations < MAX_LLOYD_ITERATIONS {
        iterations += 1;
        let mut total = T::zero();
        for (a, d) in assignment.iter_mut().zip(descriptors) {
            let (i, dist) = nearest_center(&centers, d.as_ref());
            *a = i;
            total += dist;
        }
        inertia.push(total);

        let mut sums = vec![vec![T::zero(); dim]; k];
        let mut counts = vec![0usize; k];
        for (&a, d) in assignment.iter().zip(descriptors) {
            counts[a] += 1;
            for (s, &v) in sums[a].iter_mut().zip(d.as_ref()) {
                *s += v;
            }
        }
        let mut shift = T::zero();
        for ((c, s), &m) in centers.iter_mut().zip(sums).zip(&counts) {
            // empty clusters keep their centre
            if m == 0 {
                continue;
            }
            let m = T::of(m as f64);
            let updated: Vec<T> = s.into_iter().map(|v| v / m).collect();
            shift = shift.max(squared_distance(c, &updated).sqrt());
            *c = updated;
        }
        if shift < tol {
            break;
        }
    }

    Ok(KMeansFit {
        codebook: Codebook::new(centers)?,
        inertia,
        iterations,
    })
}

fn seed_plus_plus<T: Scalar, D: AsRef<[T]>>(
    descriptors: &[D],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<T>> {
    let n = descriptors.len();
    let mut centers = vec![descriptors[rng.random_range(0..n)].as_ref().to_vec()];
    let mut d2: Vec<f64> = descriptors
        .iter()
        .map(|d| squared_distance(d.as_ref(), &centers[0]).as_f64())
        .collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut pick = None;
        for (i, &w) in d2.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            pick = Some(i);
            if target < w {
                break;
            }
            target -= w;
        }
        // `pick` is always set: there are at least k distinct points
        let c = descriptors[pick.expect("a point with positive distance")]
            .as_ref()
            .to_vec();
        for (w, d) in d2.iter_mut().zip(descriptors) {
            *w = w.min(squared_distance(d.as_ref(), &c).as_f64());
        }
        centers.push(c);
    }
    centers
}

/// L1-normalized visual-word histogram of a window. An empty window maps to
/// the uniform histogram.
pub fn bow_histogram<T: Scalar, D: AsRef<[T]>>(
    window: &[D],
    codebook: &Codebook<T>,
) -> Result<FeatureVector<T>> {
    let k = codebook.len();
    if window.is_empty() {
        return Ok(FeatureVector(vec![T::one() / T::of(k as f64); k]));
    }
    let mut counts = vec![0usize; k];
    for d in window {
        let d = d.as_ref();
        if d.len() != codebook.dim() {
            return Err(Error::DimensionMismatch {
                expected: codebook.dim(),
                got: d.len(),
            });
        }
        counts[codebook.nearest(d)] += 1;
    }
    let n = T::of(window.len() as f64);
    Ok(FeatureVector(
        counts.into_iter().map(|c| T::of(c as f64) / n).collect(),
    ))
}
