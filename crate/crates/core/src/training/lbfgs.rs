use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone)]
pub struct LbfgsOptions<T> {
    pub history: usize,
    pub max_iterations: usize,
    pub gradient_tolerance: T,
    /// Sufficient-decrease constant.
    pub c1: T,
    /// Curvature constant.
    pub c2: T,
    /// Function evaluations allowed per line search.
    pub max_evaluations: usize,
}

impl<T: Scalar> Default for LbfgsOptions<T> {
    fn default() -> Self {
        Self {
            history: 10,
            max_iterations: 500,
            gradient_tolerance: T::of(1e-5),
            c1: T::of(1e-4),
            c2: T::of(0.9),
            max_evaluations: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    /// The last accepted step changed the function by no more than a few
    /// units of floating-point resolution, or no step decreased it at all.
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateRecord<T> {
    pub iteration: usize,
    pub objective: T,
    pub gradient_norm: T,
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    pub trace: Vec<IterateRecord<T>>,
    pub termination: Termination,
}

fn norm<T: Scalar>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

fn finite<T: Scalar>(f: T, g: &[T]) -> bool {
    f.is_finite() && g.iter().all(|v| v.is_finite())
}

fn trace_f64<T: Scalar>(trace: &[IterateRecord<T>]) -> Vec<f64> {
    trace.iter().map(|r| r.objective.as_f64()).collect()
}

struct Point<T> {
    alpha: T,
    f: T,
    g: Vec<T>,
    slope: T,
}

enum Search<T> {
    Found(Point<T>),
    /// Best sufficient-decrease point if the Wolfe conditions never held.
    Fallback(Option<Point<T>>),
}

struct LineSearch<'a, T, F> {
    eval: &'a mut F,
    x: &'a [T],
    dir: &'a [T],
    f0: T,
    slope0: T,
    c1: T,
    c2: T,
    budget: usize,
    best: Option<Point<T>>,
}

impl<T: Scalar, F: FnMut(&[T]) -> Result<(T, Vec<T>)>> LineSearch<'_, T, F> {
    fn at(&mut self, alpha: T) -> Result<Option<Point<T>>> {
        if self.budget == 0 {
            return Ok(None);
        }
        self.budget -= 1;
        let trial: Vec<T> = self.x.iter().zip(self.dir).map(|(&a, &d)| a + alpha * d).collect();
        let (f, g) = (self.eval)(&trial)?;
        let slope = dot(&g, self.dir);
        let p = Point { alpha, f, g, slope };
        if finite(p.f, &p.g) && self.armijo(&p) && self.best.as_ref().is_none_or(|b| p.f < b.f) {
            self.best = Some(Point { g: p.g.clone(), ..p });
        }
        Ok(Some(p))
    }

    fn armijo(&self, p: &Point<T>) -> bool {
        p.f <= self.f0 + self.c1 * p.alpha * self.slope0
    }

    fn curvature(&self, p: &Point<T>) -> bool {
        p.slope.abs() <= -self.c2 * self.slope0
    }

    fn run(mut self, initial: T) -> Result<Search<T>> {
        let mut prev = Point {
            alpha: T::zero(),
            f: self.f0,
            g: Vec::new(),
            slope: self.slope0,
        };
        let mut alpha = initial;
        let mut first = true;
        loop {
            let Some(p) = self.at(alpha)? else {
                return Ok(Search::Fallback(self.best));
            };
            if !finite(p.f, &p.g) {
                // overshoot into an invalid region: shrink
                alpha = (prev.alpha + alpha) / T::of(2.0);
                if alpha <= T::zero() || !(alpha - prev.alpha > T::zero()) {
                    return Ok(Search::Fallback(self.best));
                }
                continue;
            }
            if !self.armijo(&p) || (!first && p.f >= prev.f) {
                return self.zoom(prev, p);
            }
            if self.curvature(&p) {
                return Ok(Search::Found(p));
            }
            if p.slope >= T::zero() {
                return self.zoom(p, prev);
            }
            first = false;
            alpha = p.alpha * T::of(2.0);
            prev = p;
        }
    }

    fn zoom(mut self, mut lo: Point<T>, mut hi: Point<T>) -> Result<Search<T>> {
        loop {
            let (a, b) = (lo.alpha, hi.alpha);
            let width = (b - a).abs();
            if !(width > T::epsilon() * a.abs().max(b.abs())) {
                return Ok(Search::Fallback(self.best));
            }
            let mut alpha = cubic_min(&lo, &hi).unwrap_or((a + b) / T::of(2.0));
            // keep the trial well inside the bracket
            let (l, h) = if a < b { (a, b) } else { (b, a) };
            let margin = T::of(0.1) * width;
            if !(alpha > l + margin && alpha < h - margin) {
                alpha = (a + b) / T::of(2.0);
            }
            let Some(p) = self.at(alpha)? else {
                return Ok(Search::Fallback(self.best));
            };
            if !finite(p.f, &p.g) || !self.armijo(&p) || p.f >= lo.f {
                hi = p;
                continue;
            }
            if self.curvature(&p) {
                return Ok(Search::Found(p));
            }
            if p.slope * (hi.alpha - lo.alpha) >= T::zero() {
                hi = lo;
            }
            lo = p;
        }
    }
}

/// Minimizer of the cubic interpolating values and slopes at both ends.
fn cubic_min<T: Scalar>(a: &Point<T>, b: &Point<T>) -> Option<T> {
    if !b.f.is_finite() {
        return None;
    }
    let d1 = a.slope + b.slope - T::of(3.0) * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.slope * b.slope;
    if !(disc >= T::zero()) {
        return None;
    }
    let sign = if b.alpha > a.alpha { T::one() } else { -T::one() };
    let d2 = sign * disc.sqrt();
    let denom = b.slope - a.slope + T::of(2.0) * d2;
    if denom == T::zero() {
        return None;
    }
    let v = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / denom;
    v.is_finite().then_some(v)
}

/// Minimizes `eval` (returning value and gradient) from `x0` with L-BFGS and
/// a strong-Wolfe line search. Every accepted iterate strictly decreases the
/// function.
pub fn minimize<T, F>(mut eval: F, x0: Vec<T>, options: &LbfgsOptions<T>) -> Result<LbfgsOutcome<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> Result<(T, Vec<T>)>,
{
    if options.history == 0 {
        return Err(Error::Config("history must be at least 1".into()));
    }
    let mut x = x0;
    let (mut f, mut g) = eval(&x)?;
    if !finite(f, &g) {
        return Err(Error::Optimization {
            iteration: 0,
            message: "objective is not finite at the initial point".into(),
            trace: Vec::new(),
        });
    }
    let mut trace = vec![IterateRecord {
        iteration: 0,
        objective: f,
        gradient_norm: norm(&g),
    }];
    let mut memory: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::with_capacity(options.history);
    let mut iteration = 0;

    let termination = loop {
        if norm(&g) < options.gradient_tolerance {
            break Termination::GradientTolerance;
        }
        if iteration >= options.max_iterations {
            break Termination::MaxIterations;
        }
        let mut dir = two_loop(&g, &memory);
        let mut slope = dot(&g, &dir);
        let mut steepest = memory.is_empty();
        if !(slope < T::zero()) {
            memory.clear();
            dir = g.iter().map(|&v| -v).collect();
            slope = dot(&g, &dir);
            steepest = true;
        }
        let accepted = loop {
            let initial = if steepest {
                T::one().min(T::one() / norm(&g))
            } else {
                T::one()
            };
            let search = LineSearch {
                eval: &mut eval,
                x: &x,
                dir: &dir,
                f0: f,
                slope0: slope,
                c1: options.c1,
                c2: options.c2,
                budget: options.max_evaluations,
                best: None,
            }
            .run(initial)?;
            match search {
                Search::Found(p) | Search::Fallback(Some(p)) => break Some(p),
                Search::Fallback(None) if !steepest => {
                    memory.clear();
                    dir = g.iter().map(|&v| -v).collect();
                    slope = dot(&g, &dir);
                    steepest = true;
                }
                Search::Fallback(None) => break None,
            }
        };
        let Some(p) = accepted else {
            if f.is_finite() {
                break Termination::Stalled;
            }
            return Err(Error::Optimization {
                iteration,
                message: "line search could not find a finite decrease".into(),
                trace: trace_f64(&trace),
            });
        };
        let s: Vec<T> = dir.iter().map(|&d| p.alpha * d).collect();
        let yv: Vec<T> = p.g.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > T::epsilon() * dot(&yv, &yv).sqrt() * norm(&s) && sy.is_finite() {
            if memory.len() == options.history {
                memory.pop_front();
            }
            memory.push_back((s.clone(), yv, T::one() / sy));
        }
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += *si;
        }
        let resolution = T::of(10.0) * T::epsilon() * f.abs().max(T::one());
        let stalled = f - p.f <= resolution;
        f = p.f;
        g = p.g;
        iteration += 1;
        trace.push(IterateRecord {
            iteration,
            objective: f,
            gradient_norm: norm(&g),
        });
        if stalled && norm(&g) >= options.gradient_tolerance {
            break Termination::Stalled;
        }
    };
    Ok(LbfgsOutcome {
        x,
        iterations: iteration,
        trace,
        termination,
    })
}

fn two_loop<T: Scalar>(g: &[T], memory: &VecDeque<(Vec<T>, Vec<T>, T)>) -> Vec<T> {
    let mut q: Vec<T> = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = *rho * dot(s, &q);
        for (qi, &yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = *rho * dot(y, &q);
        for (qi, &si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|&v| -v).collect()
}
