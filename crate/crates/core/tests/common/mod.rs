//! Test-only oracles and instance generators, independent of the engine's
//! message passing.
#![allow(dead_code)]

use ahcrf::augmentation::{Alternative, AugmentedAction, AugmentedSegment};
use ahcrf::engine::{CompositeState, ModelParameters};
use ahcrf::features::FeatureVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn alternative(v: Vec<f64>, label: Option<usize>) -> Alternative<f64> {
    Alternative {
        vector: FeatureVector(v),
        source_action_id: "src".into(),
        source_position: 0,
        recommender: 0,
        source_label: label,
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub params: ModelParameters<f64>,
    pub action: AugmentedAction<f64>,
}

/// Random augmented instance within the given bounds. Some segments may
/// forbid their original when they have alternatives.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    max_classes: usize,
    max_t: usize,
    max_poses: usize,
    max_alts: usize,
    max_d: usize,
) -> Instance {
    let y = rng.random_range(1..=max_classes);
    let t = rng.random_range(1..=max_t);
    let s = rng.random_range(1..=max_poses);
    let d = rng.random_range(1..=max_d);
    let eps = if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..2.0) };
    let params = ModelParameters::random(y, s, d, eps, 1.5, rng.random()).unwrap();
    let segments = (0..t)
        .map(|_| {
            let n_alt = rng.random_range(0..=max_alts);
            AugmentedSegment {
                original: FeatureVector(random_vec(rng, d, 1.0)),
                alternatives: (0..n_alt)
                    .map(|_| alternative(random_vec(rng, d, 1.0), Some(0)))
                    .collect(),
                original_allowed: n_alt == 0 || rng.random_bool(0.8),
            }
        })
        .collect();
    Instance {
        params,
        action: AugmentedAction {
            id: "x".into(),
            label: None,
            segments,
            known_outlier_mask: None,
        },
    }
}

/// Admissible states of segment `t` in flat order.
pub fn states_of(action: &AugmentedAction<f64>, t: usize, s: usize) -> Vec<CompositeState> {
    let seg = &action.segments[t];
    let first = usize::from(!seg.original_allowed);
    (first..=seg.alternatives.len())
        .flat_map(|o| (0..s).map(move |p| CompositeState { observation: o, pose: p }))
        .collect()
}

fn observation(seg: &AugmentedSegment<f64>, o: usize) -> &[f64] {
    if o == 0 {
        &seg.original.0
    } else {
        &seg.alternatives[o - 1].vector.0
    }
}

/// Direct summation of the potential.
pub fn brute_potential(
    params: &ModelParameters<f64>,
    action: &AugmentedAction<f64>,
    y: usize,
    cfg: &[CompositeState],
    biased: bool,
) -> f64 {
    let mut total = 0.0;
    for (t, st) in cfg.iter().enumerate() {
        let x = observation(&action.segments[t], st.observation);
        let lam = params.pose(st.pose);
        for i in 0..x.len() {
            total += x[i] * lam[i];
        }
        if biased && st.observation == 0 {
            total += params.epsilon();
        }
        total += params.theta2(y, st.pose);
        if t + 1 < cfg.len() {
            total += params.theta3(y, st.pose, cfg[t + 1].pose);
        }
    }
    total
}

/// Every configuration as indices into `states_of`, lexicographic order.
pub fn all_configs(action: &AugmentedAction<f64>, s: usize) -> Vec<Vec<usize>> {
    let sizes: Vec<usize> = (0..action.segments.len())
        .map(|t| states_of(action, t, s).len())
        .collect();
    let mut out = Vec::new();
    let mut cur = vec![0usize; sizes.len()];
    loop {
        out.push(cur.clone());
        let mut k = sizes.len();
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            cur[k] += 1;
            if cur[k] < sizes[k] {
                break;
            }
            cur[k] = 0;
        }
    }
}

pub struct Enumeration {
    /// Per class: log Σ_h exp Ψ.
    pub class_scores: Vec<f64>,
    pub log_partition: f64,
    /// Per class, per segment: marginal over the flat domain.
    pub unary: Vec<Vec<Vec<f64>>>,
    /// Per class, per segment pair: H_t × H_{t+1} row-major.
    pub pairwise: Vec<Vec<Vec<f64>>>,
    /// Per class: argmax configuration (first in lexicographic order on ties).
    pub argmax: Vec<(Vec<CompositeState>, f64)>,
}

pub fn enumerate(params: &ModelParameters<f64>, action: &AugmentedAction<f64>, biased: bool) -> Enumeration {
    let s = params.num_poses();
    let t_len = action.segments.len();
    let doms: Vec<Vec<CompositeState>> = (0..t_len).map(|t| states_of(action, t, s)).collect();
    let configs = all_configs(action, s);
    let mut class_scores = Vec::new();
    let mut unary = Vec::new();
    let mut pairwise = Vec::new();
    let mut argmax = Vec::new();
    for y in 0..params.num_classes() {
        let pots: Vec<f64> = configs
            .iter()
            .map(|c| {
                let cfg: Vec<CompositeState> = c.iter().enumerate().map(|(t, &i)| doms[t][i]).collect();
                brute_potential(params, action, y, &cfg, biased)
            })
            .collect();
        let max = pots.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = pots.iter().map(|p| (p - max).exp()).sum();
        let log_z = max + z.ln();
        let mut un: Vec<Vec<f64>> = doms.iter().map(|d| vec![0.0; d.len()]).collect();
        let mut pw: Vec<Vec<f64>> = (0..t_len.saturating_sub(1))
            .map(|t| vec![0.0; doms[t].len() * doms[t + 1].len()])
            .collect();
        let mut best = 0;
        for (k, c) in configs.iter().enumerate() {
            let w = (pots[k] - log_z).exp();
            for t in 0..t_len {
                un[t][c[t]] += w;
                if t + 1 < t_len {
                    pw[t][c[t] * doms[t + 1].len() + c[t + 1]] += w;
                }
            }
            if pots[k] > pots[best] {
                best = k;
            }
        }
        class_scores.push(log_z);
        unary.push(un);
        pairwise.push(pw);
        argmax.push((
            configs[best].iter().enumerate().map(|(t, &i)| doms[t][i]).collect(),
            pots[best],
        ));
    }
    let max = class_scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_partition = max + class_scores.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    Enumeration {
        class_scores,
        log_partition,
        unary,
        pairwise,
        argmax,
    }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Labeled augmented training set sharing one parameter shape.
pub fn random_training_set(
    rng: &mut ChaCha8Rng,
    classes: usize,
    t: usize,
    poses: usize,
    max_alts: usize,
    d: usize,
    n: usize,
) -> (ModelParameters<f64>, Vec<AugmentedAction<f64>>) {
    let eps = rng.random_range(0.0..1.0);
    let params = ModelParameters::random(classes, poses, d, eps, 1.0, rng.random()).unwrap();
    let actions = (0..n)
        .map(|i| {
            let segments = (0..t)
                .map(|_| {
                    let n_alt = rng.random_range(0..=max_alts);
                    AugmentedSegment {
                        original: FeatureVector(random_vec(rng, d, 1.0)),
                        alternatives: (0..n_alt)
                            .map(|_| alternative(random_vec(rng, d, 1.0), Some(0)))
                            .collect(),
                        original_allowed: n_alt == 0 || rng.random_bool(0.7),
                    }
                })
                .collect();
            AugmentedAction {
                id: format!("a{i}"),
                label: Some(i % classes),
                segments,
                known_outlier_mask: None,
            }
        })
        .collect();
    (params, actions)
}

/// Regularized objective computed by enumeration.
pub fn oracle_objective(params: &ModelParameters<f64>, data: &[AugmentedAction<f64>], sigma: f64) -> f64 {
    let ll: f64 = data
        .iter()
        .map(|a| {
            let e = enumerate(params, a, true);
            e.class_scores[a.label.unwrap()] - e.log_partition
        })
        .sum();
    let norm: f64 = params.weights().iter().map(|w| w * w).sum();
    ll - norm / (2.0 * sigma * sigma)
}

/// Central differences of `f` at the weights of `params`.
pub fn central_differences(
    params: &ModelParameters<f64>,
    h: f64,
    f: impl Fn(&ModelParameters<f64>) -> f64,
) -> Vec<f64> {
    (0..params.weights().len())
        .map(|k| {
            let mut plus = params.clone();
            plus.weights_mut()[k] += h;
            let mut minus = params.clone();
            minus.weights_mut()[k] -= h;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect()
}

/// Largest componentwise relative error, with denominators floored at 1.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}
