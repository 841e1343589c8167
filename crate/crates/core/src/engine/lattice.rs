use crate::error::Result;
use crate::scalar::{dot, Scalar};

use super::chain::{check_input, ChainInput, CompositeState, Configuration, StateDomain};
use super::params::ModelParameters;

/// `log Σ_{i<n} exp f(i)`, evaluating `f` twice per index instead of
/// allocating.
fn lse_by<T: Scalar>(n: usize, f: impl Fn(usize) -> T) -> T {
    let mut max = T::neg_infinity();
    for i in 0..n {
        let v = f(i);
        if v > max {
            max = v;
        }
    }
    if max == T::neg_infinity() {
        return max;
    }
    let mut sum = T::zero();
    for i in 0..n {
        sum += (f(i) - max).exp();
    }
    max + sum.ln()
}

/// Log-sum over the observation component: `out[p] = log Σ_o exp v[o·S + p]`.
fn reduce_observations<T: Scalar>(v: &[T], poses: usize) -> Vec<T> {
    let n_obs = v.len() / poses;
    (0..poses)
        .map(|p| lse_by(n_obs, |o| v[o * poses + p]))
        .collect()
}

/// Class-independent part of an action's chain: admissible states and the
/// observation/pose compatibilities (bias included).
pub(crate) struct Lattice<'a, T> {
    pub(crate) params: &'a ModelParameters<T>,
    pub(crate) domains: Vec<StateDomain>,
    pub(crate) unary: Vec<Vec<T>>,
}

/// Forward-backward quantities for one class.
pub(crate) struct ClassChain<T> {
    pub(crate) nodes: Vec<Vec<T>>,
    pub(crate) alpha: Vec<Vec<T>>,
    /// `alpha` reduced over observations.
    pub(crate) alpha_pose: Vec<Vec<T>>,
    /// Backward message into `t`, a function of the pose only.
    pub(crate) beta: Vec<Vec<T>>,
    /// `nodes[t] + beta[t]` reduced over observations (unused at `t = 0`).
    pub(crate) beta_pose: Vec<Vec<T>>,
    pub(crate) log_z: T,
}

impl<'a, T: Scalar> Lattice<'a, T> {
    pub(crate) fn new<A: ChainInput<T> + ?Sized>(action: &A, params: &'a ModelParameters<T>) -> Result<Self> {
        let s = params.num_poses();
        check_input(action, params.dim(), s)?;
        let domains: Vec<StateDomain> = (0..action.len()).map(|t| action.domain(t, s)).collect();
        let bias = if action.biased() { params.epsilon() } else { T::zero() };
        let unary = domains
            .iter()
            .enumerate()
            .map(|(t, dom)| {
                let mut u = Vec::with_capacity(dom.size());
                for o in dom.first_observation..dom.end_observation {
                    let x = action.observation(t, o);
                    let b = if o == 0 { bias } else { T::zero() };
                    for p in 0..s {
                        u.push(dot(x, params.pose(p)) + b);
                    }
                }
                u
            })
            .collect();
        Ok(Self {
            params,
            domains,
            unary,
        })
    }

    pub(crate) fn len(&self) -> usize {
        self.domains.len()
    }

    fn poses(&self) -> usize {
        self.params.num_poses()
    }

    fn nodes(&self, y: usize) -> Vec<Vec<T>> {
        let s = self.poses();
        self.unary
            .iter()
            .map(|u| {
                u.iter()
                    .enumerate()
                    .map(|(i, &v)| v + self.params.theta2(y, i % s))
                    .collect()
            })
            .collect()
    }

    fn forward(&self, y: usize, nodes: &[Vec<T>]) -> (Vec<Vec<T>>, Vec<Vec<T>>) {
        let s = self.poses();
        let mut alpha = Vec::with_capacity(self.len());
        let mut alpha_pose = Vec::with_capacity(self.len());
        alpha.push(nodes[0].clone());
        for t in 1..self.len() {
            let prev = reduce_observations(&alpha[t - 1], s);
            let msg: Vec<T> = (0..s)
                .map(|q| lse_by(s, |p| prev[p] + self.params.theta3(y, p, q)))
                .collect();
            alpha.push(
                nodes[t]
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| v + msg[i % s])
                    .collect(),
            );
            alpha_pose.push(prev);
        }
        alpha_pose.push(reduce_observations(&alpha[self.len() - 1], s));
        (alpha, alpha_pose)
    }

    pub(crate) fn log_z(&self, y: usize) -> T {
        let nodes = self.nodes(y);
        let (alpha, _) = self.forward(y, &nodes);
        let last = &alpha[self.len() - 1];
        lse_by(last.len(), |i| last[i])
    }

    pub(crate) fn chain(&self, y: usize) -> ClassChain<T> {
        let s = self.poses();
        let n = self.len();
        let nodes = self.nodes(y);
        let (alpha, alpha_pose) = self.forward(y, &nodes);
        let last = &alpha[n - 1];
        let log_z = lse_by(last.len(), |i| last[i]);

        let mut beta = vec![vec![T::zero(); s]; n];
        let mut beta_pose = vec![Vec::new(); n];
        for t in (0..n.saturating_sub(1)).rev() {
            let next = &nodes[t + 1];
            let n_obs = next.len() / s;
            let bp: Vec<T> = (0..s)
                .map(|q| beta[t + 1][q] + lse_by(n_obs, |o| next[o * s + q]))
                .collect();
            beta[t] = (0..s)
                .map(|p| {
                    let row = self.params.theta3_row(y, p);
                    lse_by(s, |q| row[q] + bp[q])
                })
                .collect();
            beta_pose[t + 1] = bp;
        }
        ClassChain {
            nodes,
            alpha,
            alpha_pose,
            beta,
            beta_pose,
            log_z,
        }
    }

    /// Max-product decode. Ties resolve to the smallest flat index at every
    /// step.
    pub(crate) fn viterbi(&self, y: usize) -> Configuration<T> {
        let s = self.poses();
        let n = self.len();
        let nodes = self.nodes(y);
        let mut delta = nodes[0].clone();
        let mut back: Vec<Vec<usize>> = Vec::with_capacity(n);
        back.push(Vec::new());
        for t in 1..n {
            // best observation per pose at t-1
            let n_obs = delta.len() / s;
            let mut best_flat = vec![0usize; s];
            let mut best_val = vec![T::neg_infinity(); s];
            for p in 0..s {
                best_flat[p] = p;
                best_val[p] = delta[p];
                for o in 1..n_obs {
                    let v = delta[o * s + p];
                    if v > best_val[p] {
                        best_val[p] = v;
                        best_flat[p] = o * s + p;
                    }
                }
            }
            let mut msg = vec![T::zero(); s];
            let mut arg = vec![0usize; s];
            for q in 0..s {
                msg[q] = best_val[0] + self.params.theta3(y, 0, q);
                arg[q] = best_flat[0];
                for p in 1..s {
                    let v = best_val[p] + self.params.theta3(y, p, q);
                    if v > msg[q] || (v == msg[q] && best_flat[p] < arg[q]) {
                        msg[q] = v;
                        arg[q] = best_flat[p];
                    }
                }
            }
            delta = nodes[t]
                .iter()
                .enumerate()
                .map(|(i, &v)| v + msg[i % s])
                .collect();
            back.push((0..delta.len()).map(|i| arg[i % s]).collect());
        }
        let mut cur = 0;
        for (i, &v) in delta.iter().enumerate() {
            if v > delta[cur] {
                cur = i;
            }
        }
        let potential = delta[cur];
        let mut flat = vec![0usize; n];
        flat[n - 1] = cur;
        for t in (1..n).rev() {
            flat[t - 1] = back[t][flat[t]];
        }
        Configuration {
            states: flat
                .iter()
                .zip(&self.domains)
                .map(|(&f, d)| d.state(f))
                .collect(),
            potential,
        }
    }

    pub(crate) fn state(&self, t: usize, flat: usize) -> CompositeState {
        self.domains[t].state(flat)
    }
}

impl<T: Scalar> ClassChain<T> {
    /// `P(h_t = s | y, x)` over the flat domain of `t`.
    pub(crate) fn unary_marginal(&self, t: usize) -> Vec<T> {
        let s = self.beta[t].len();
        self.alpha[t]
            .iter()
            .enumerate()
            .map(|(i, &a)| (a + self.beta[t][i % s] - self.log_z).exp())
            .collect()
    }

    /// `P(p_t = p, p_{t+1} = q | y, x)` as an `S×S` row-major table.
    pub(crate) fn pose_pair_marginal(&self, t: usize, params: &ModelParameters<T>, y: usize) -> Vec<T> {
        let s = self.beta[t].len();
        let mut out = Vec::with_capacity(s * s);
        for p in 0..s {
            let row = params.theta3_row(y, p);
            for q in 0..s {
                out.push((self.alpha_pose[t][p] + row[q] + self.beta_pose[t + 1][q] - self.log_z).exp());
            }
        }
        out
    }

    /// `P(h_t = s, h_{t+1} = s' | y, x)` as an `H_t × H_{t+1}` table.
    pub(crate) fn pairwise_marginal(&self, t: usize, params: &ModelParameters<T>, y: usize) -> Vec<T> {
        let s = self.beta[t].len();
        let (cur, next) = (&self.alpha[t], &self.nodes[t + 1]);
        let mut out = Vec::with_capacity(cur.len() * next.len());
        for (i, &a) in cur.iter().enumerate() {
            let row = params.theta3_row(y, i % s);
            for (k, &nv) in next.iter().enumerate() {
                let q = k % s;
                out.push((a + row[q] + nv + self.beta[t + 1][q] - self.log_z).exp());
            }
        }
        out
    }
}
