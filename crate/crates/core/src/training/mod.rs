//! Maximum-likelihood fitting of the model parameters.
//!
//! The objective is the L2-regularized conditional log-likelihood
//! `Σ_i log P(y_i | x_i) − ‖θ‖² / (2σ²)`, maximized with limited-memory BFGS
//! under a strong-Wolfe line search.

mod lbfgs;
mod objective;

pub use lbfgs::{minimize, LbfgsOptions, LbfgsOutcome, Termination};
pub use objective::{gradient, log_likelihood, objective, objective_and_gradient, Labeled};

use crate::engine::ModelParameters;
use crate::error::{Error, Result};
use crate::engine::ChainInput;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig<T> {
    /// Regularization scale; larger means weaker regularization.
    pub sigma: T,
    /// Fixed inlier bias added when a segment keeps its original.
    pub epsilon: T,
    pub num_poses: usize,
    pub max_iterations: usize,
    pub gradient_tolerance: T,
    pub seed: u64,
    /// Initial weights are uniform in `[-init_scale, init_scale]`.
    pub init_scale: T,
    /// Number of curvature pairs kept by L-BFGS.
    pub history: usize,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            sigma: T::one(),
            epsilon: T::zero(),
            num_poses: 6,
            max_iterations: 500,
            gradient_tolerance: T::of(1e-5),
            seed: 0,
            init_scale: T::of(0.1),
            history: 10,
        }
    }
}

impl<T: Scalar> TrainConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > T::zero()) {
            return Err(Error::Config("sigma must be positive".into()));
        }
        if !(self.epsilon >= T::zero() && self.epsilon.is_finite()) {
            return Err(Error::Config("epsilon must be finite and non-negative".into()));
        }
        if self.num_poses == 0 {
            return Err(Error::Config("poses must be at least 1".into()));
        }
        if self.history == 0 {
            return Err(Error::Config("history must be at least 1".into()));
        }
        if !(self.init_scale >= T::zero()) || !(self.gradient_tolerance >= T::zero()) {
            return Err(Error::Config("init_scale and gradient_tolerance must be non-negative".into()));
        }
        Ok(())
    }
}

/// One accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow<T> {
    pub iteration: usize,
    pub objective: T,
    pub gradient_norm: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport<T> {
    pub final_objective: T,
    pub iterations: usize,
    /// Row 0 is the initialization; the objective never decreases.
    pub trace: Vec<TraceRow<T>>,
    pub gradient_norm: T,
    pub termination: Termination,
}

impl<T: Scalar> TrainReport<T> {
    pub fn initial_objective(&self) -> T {
        self.trace[0].objective
    }
}

fn check_training_set<T: Scalar, A: ChainInput<T> + Labeled>(
    data: &[A],
    num_classes: usize,
) -> Result<usize> {
    let first = data
        .first()
        .ok_or_else(|| Error::invalid("training set is empty"))?;
    let d = first.dim();
    for a in data {
        match a.label() {
            None => return Err(Error::invalid("training action without a label")),
            Some(y) if y >= num_classes => {
                return Err(Error::invalid(format!("label {y} outside {num_classes} classes")))
            }
            _ => {}
        }
        if a.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: a.dim(),
            });
        }
    }
    Ok(d)
}

/// Fits parameters from a seeded random initialization.
pub fn train<T: Scalar, A: ChainInput<T> + Labeled>(
    data: &[A],
    num_classes: usize,
    config: &TrainConfig<T>,
) -> Result<(ModelParameters<T>, TrainReport<T>)> {
    config.validate()?;
    let d = check_training_set(data, num_classes)?;
    let init = ModelParameters::random(
        num_classes,
        config.num_poses,
        d,
        config.epsilon,
        config.init_scale,
        config.seed,
    )?;
    train_from(data, init, config)
}

/// Fits parameters starting from `init`; `init`'s shape and `ε` are kept.
pub fn train_from<T: Scalar, A: ChainInput<T> + Labeled>(
    data: &[A],
    init: ModelParameters<T>,
    config: &TrainConfig<T>,
) -> Result<(ModelParameters<T>, TrainReport<T>)> {
    config.validate()?;
    check_training_set(data, init.num_classes())?;
    let shape = init.clone();
    let options = LbfgsOptions {
        history: config.history,
        max_iterations: config.max_iterations,
        gradient_tolerance: config.gradient_tolerance,
        ..LbfgsOptions::default()
    };
    // minimize the negated objective
    let eval = |w: &[T]| -> Result<(T, Vec<T>)> {
        let mut p = shape.clone();
        p.weights_mut().copy_from_slice(w);
        let (f, g) = objective_and_gradient(data, &p, config.sigma)?;
        Ok((-f, g.into_iter().map(|v| -v).collect()))
    };
    let outcome = minimize(eval, init.weights().to_vec(), &options)?;
    let mut params = shape;
    params.weights_mut().copy_from_slice(&outcome.x);
    let trace: Vec<TraceRow<T>> = outcome
        .trace
        .iter()
        .map(|r| TraceRow {
            iteration: r.iteration,
            objective: -r.objective,
            gradient_norm: r.gradient_norm,
        })
        .collect();
    let last = *trace.last().expect("trace holds the initial point");
    Ok((
        params,
        TrainReport {
            final_objective: last.objective,
            iterations: outcome.iterations,
            gradient_norm: last.gradient_norm,
            trace,
            termination: outcome.termination,
        },
    ))
}
