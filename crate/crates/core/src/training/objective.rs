use rayon::prelude::*;

use crate::augmentation::AugmentedAction;
use crate::engine::{ChainInput, Lattice, ModelParameters};
use crate::error::{Error, Result};
use crate::features::{ActionSequence, ClassId};
use crate::scalar::{log_sum_exp, Scalar};

/// Inputs that may carry a ground-truth class.
pub trait Labeled {
    fn label(&self) -> Option<ClassId>;
}

impl<T> Labeled for ActionSequence<T> {
    fn label(&self) -> Option<ClassId> {
        self.label
    }
}

impl<T> Labeled for AugmentedAction<T> {
    fn label(&self) -> Option<ClassId> {
        self.label
    }
}

fn require_label<A: Labeled>(a: &A, num_classes: usize) -> Result<usize> {
    match a.label() {
        Some(y) if y < num_classes => Ok(y),
        Some(y) => Err(Error::invalid(format!("label {y} outside {num_classes} classes"))),
        None => Err(Error::invalid("training action without a label")),
    }
}

fn check_sigma<T: Scalar>(sigma: T) -> Result<()> {
    if sigma > T::zero() {
        Ok(())
    } else {
        Err(Error::Config("sigma must be positive".into()))
    }
}

/// `log P(y | x)` and, when `grad` is given, its gradient accumulated into it.
fn action_term<T: Scalar, A: ChainInput<T> + Labeled>(
    action: &A,
    params: &ModelParameters<T>,
    grad: Option<&mut [T]>,
) -> Result<T> {
    let label = require_label(action, params.num_classes())?;
    let lattice = Lattice::new(action, params)?;
    let ny = params.num_classes();
    let Some(grad) = grad else {
        let scores: Vec<T> = (0..ny).map(|y| lattice.log_z(y)).collect();
        return Ok(scores[label] - log_sum_exp(&scores));
    };

    let s = params.num_poses();
    let chains: Vec<_> = (0..ny).map(|y| lattice.chain(y)).collect();
    let scores: Vec<T> = chains.iter().map(|c| c.log_z).collect();
    let log_z = log_sum_exp(&scores);
    let n = lattice.len();

    // Σ_y c_y P_y(h_t = i), collapsed over classes before touching λ
    let mut state_weight: Vec<Vec<T>> = lattice.unary.iter().map(|u| vec![T::zero(); u.len()]).collect();
    for (y, chain) in chains.iter().enumerate() {
        let target = if y == label { T::one() } else { T::zero() };
        let c = target - (scores[y] - log_z).exp();
        if c == T::zero() {
            continue;
        }
        for t in 0..n {
            let m = chain.unary_marginal(t);
            for (i, &pm) in m.iter().enumerate() {
                let w = c * pm;
                state_weight[t][i] += w;
                grad[params.theta2_offset(y, i % s)] += w;
            }
            if t + 1 < n {
                let pair = chain.pose_pair_marginal(t, params, y);
                let base = params.theta3_offset(y, 0, 0);
                for (k, &v) in pair.iter().enumerate() {
                    grad[base + k] += c * v;
                }
            }
        }
    }
    for (t, weights) in state_weight.iter().enumerate() {
        for (i, &w) in weights.iter().enumerate() {
            if w == T::zero() {
                continue;
            }
            let st = lattice.state(t, i);
            let x = action.observation(t, st.observation);
            let off = params.pose_offset(st.pose);
            for (g, &xv) in grad[off..off + x.len()].iter_mut().zip(x) {
                *g += w * xv;
            }
        }
    }
    Ok(scores[label] - log_z)
}

/// Unregularized `Σ_i log P(y_i | x_i)`.
pub fn log_likelihood<T: Scalar, A: ChainInput<T> + Labeled>(
    data: &[A],
    params: &ModelParameters<T>,
) -> Result<T> {
    let terms: Vec<T> = data
        .par_iter()
        .map(|a| action_term(a, params, None))
        .collect::<Result<_>>()?;
    Ok(terms.into_iter().sum())
}

/// Regularized objective `Σ_i log P(y_i | x_i) − ‖θ‖² / (2σ²)`.
pub fn objective<T: Scalar, A: ChainInput<T> + Labeled>(
    data: &[A],
    params: &ModelParameters<T>,
    sigma: T,
) -> Result<T> {
    check_sigma(sigma)?;
    let ll = log_likelihood(data, params)?;
    Ok(ll - params.squared_norm() / (T::of(2.0) * sigma * sigma))
}

/// Gradient of [`objective`] in the flat weight layout of
/// [`ModelParameters::weights`].
pub fn gradient<T: Scalar, A: ChainInput<T> + Labeled>(
    data: &[A],
    params: &ModelParameters<T>,
    sigma: T,
) -> Result<Vec<T>> {
    objective_and_gradient(data, params, sigma).map(|(_, g)| g)
}

pub fn objective_and_gradient<T: Scalar, A: ChainInput<T> + Labeled>(
    data: &[A],
    params: &ModelParameters<T>,
    sigma: T,
) -> Result<(T, Vec<T>)> {
    check_sigma(sigma)?;
    let len = params.weights().len();
    let parts: Vec<(T, Vec<T>)> = data
        .par_iter()
        .map(|a| {
            let mut g = vec![T::zero(); len];
            action_term(a, params, Some(&mut g)).map(|v| (v, g))
        })
        .collect::<Result<_>>()?;
    // fixed-order reduction keeps results independent of thread scheduling
    let mut total = vec![T::zero(); len];
    let mut ll = T::zero();
    for (v, g) in parts {
        ll += v;
        for (t, x) in total.iter_mut().zip(g) {
            *t += x;
        }
    }
    let inv = T::one() / (sigma * sigma);
    for (t, &w) in total.iter_mut().zip(params.weights()) {
        *t -= w * inv;
    }
    let f = ll - params.squared_norm() * inv / T::of(2.0);
    Ok((f, total))
}
