//! Exact computations on finite-state Markov chains: stationary laws, block
//! laws of lumped processes, entropy-rate brackets and conditional
//! independence checks. Everything here is brute force over the state space;
//! nothing is sampled.

mod ci;
mod exact;

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ci::{chain_rule_identity_check, ci_check_markov, ChainRuleReport, CiVerdict};
pub use exact::{
    exact_block_distribution, exact_hk, exact_ik, exact_label_transition, exact_past_information,
    entropy_rate_sandwich, family_sandwich_gap, strictness_onset, EntropyRateSandwich,
};

/// Row sums must be within this of one.
pub const ROW_TOLERANCE: f64 = 1e-12;
/// Above this many states the stationary law is found by power iteration.
pub const DIRECT_SOLVE_LIMIT: usize = 2000;

/// A finite, time-homogeneous Markov chain. JSON form:
/// `{"n_states": 2, "transition": [0.9, 0.1, 0.1, 0.9]}` (row-major).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawChain")]
pub struct MarkovChainSpec {
    n_states: usize,
    transition: Vec<f64>,
    #[serde(skip)]
    stationary: OnceLock<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawChain {
    n_states: usize,
    transition: Vec<f64>,
}

impl TryFrom<RawChain> for MarkovChainSpec {
    type Error = Error;

    fn try_from(raw: RawChain) -> Result<Self> {
        Self::new(raw.n_states, raw.transition)
    }
}

impl PartialEq for MarkovChainSpec {
    fn eq(&self, other: &Self) -> bool {
        self.n_states == other.n_states && self.transition == other.transition
    }
}

pub(crate) fn check_stochastic_rows(values: &[f64], row_len: usize, what: &str) -> Result<()> {
    for (r, row) in values.chunks(row_len).enumerate() {
        if let Some(p) = row.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidSpec(format!("{what} row {r} has invalid entry {p}")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > ROW_TOLERANCE {
            return Err(Error::InvalidSpec(format!("{what} row {r} sums to {s}")));
        }
    }
    Ok(())
}

impl MarkovChainSpec {
    pub fn new(n_states: usize, transition: Vec<f64>) -> Result<Self> {
        if n_states == 0 {
            return Err(Error::InvalidSpec("chain needs at least one state".into()));
        }
        if transition.len() != n_states * n_states {
            return Err(Error::InvalidSpec(format!(
                "transition has {} entries, expected {}",
                transition.len(),
                n_states * n_states
            )));
        }
        check_stochastic_rows(&transition, n_states, "transition")?;
        Ok(Self { n_states, transition, stationary: OnceLock::new() })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidSpec("transition matrix is not square".into()));
        }
        Self::new(n, rows.concat())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    #[inline]
    pub fn p(&self, from: usize, to: usize) -> f64 {
        self.transition[from * self.n_states + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.transition[from * self.n_states..(from + 1) * self.n_states]
    }

    pub fn transition(&self) -> &[f64] {
        &self.transition
    }

    /// Cached stationary law; computed on first use.
    pub fn stationary(&self) -> Result<&[f64]> {
        if let Some(pi) = self.stationary.get() {
            return Ok(pi);
        }
        let pi = stationary_distribution(self)?;
        Ok(self.stationary.get_or_init(|| pi))
    }

    /// Closed communicating classes of the positive-transition digraph, each
    /// sorted, listed by smallest member.
    pub fn closed_classes(&self) -> Vec<Vec<usize>> {
        closed_classes(self.n_states, |i, j| self.p(i, j) > 0.0)
    }
}

pub(crate) fn closed_classes(n: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let mut g = DiGraph::<(), ()>::with_capacity(n, n * n);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if edge(i, j) {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut component = vec![0usize; n];
    let sccs = tarjan_scc(&g);
    for (c, scc) in sccs.iter().enumerate() {
        for node in scc {
            component[node.index()] = c;
        }
    }
    let mut closed: Vec<Vec<usize>> = sccs
        .iter()
        .enumerate()
        .filter(|(c, scc)| {
            scc.iter().all(|u| (0..n).all(|v| !edge(u.index(), v) || component[v] == *c))
        })
        .map(|(_, scc)| {
            let mut members: Vec<usize> = scc.iter().map(|u| u.index()).collect();
            members.sort_unstable();
            members
        })
        .collect();
    closed.sort();
    closed
}

/// Unique stationary law `pi P = pi`. Transient states are allowed and get
/// zero mass; more than one closed class is an error.
pub fn stationary_distribution(spec: &MarkovChainSpec) -> Result<Vec<f64>> {
    let classes = spec.closed_classes();
    if classes.len() != 1 {
        return Err(Error::Reducible { classes });
    }
    let n = spec.n_states;
    let mut pi = if n > DIRECT_SOLVE_LIMIT { power_iteration(spec) } else { direct_solve(spec)? };
    for p in pi.iter_mut() {
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    Ok(pi)
}

fn direct_solve(spec: &MarkovChainSpec) -> Result<Vec<f64>> {
    let n = spec.n_states;
    // (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(j, i)] = spec.p(i, j);
        }
        a[(i, i)] -= 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::InvalidSpec("singular stationary system".into()))?;
    let mut pi: Vec<f64> = x.iter().copied().collect();
    // one step of refinement through the chain itself tightens the residual
    let stepped = step(spec, &pi);
    if l1(&stepped, &pi) < 1e-9 {
        pi = stepped;
    }
    Ok(pi)
}

fn power_iteration(spec: &MarkovChainSpec) -> Vec<f64> {
    let n = spec.n_states;
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..100_000 {
        // lazy chain (P + I)/2 has the same stationary law and is aperiodic
        let stepped = step(spec, &pi);
        let next: Vec<f64> = pi.iter().zip(&stepped).map(|(a, b)| 0.5 * (a + b)).collect();
        let done = l1(&next, &pi) < 1e-14;
        pi = next;
        if done {
            break;
        }
    }
    pi
}

pub(crate) fn step(spec: &MarkovChainSpec, pi: &[f64]) -> Vec<f64> {
    let n = spec.n_states;
    let mut out = vec![0.0; n];
    for (i, &w) in pi.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (o, &p) in out.iter_mut().zip(spec.row(i)) {
            *o += w * p;
        }
    }
    out
}

pub(crate) fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// `||pi P - pi||_1`.
pub fn stationary_residual(spec: &MarkovChainSpec, pi: &[f64]) -> f64 {
    l1(&step(spec, pi), pi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_chain_is_uniform() {
        let spec = MarkovChainSpec::from_rows(&[vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
        let pi = stationary_distribution(&spec).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-15 && (pi[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn asymmetric_two_state_chain() {
        // balance: pi0 * 0.5 = pi1 * 0.25  =>  pi = (1/3, 2/3)
        let spec = MarkovChainSpec::from_rows(&[vec![0.5, 0.5], vec![0.25, 0.75]]).unwrap();
        let pi = stationary_distribution(&spec).unwrap();
        assert!((pi[0] - 1.0 / 3.0).abs() < 1e-14);
        assert!((pi[1] - 2.0 / 3.0).abs() < 1e-14);
        assert!(stationary_residual(&spec, &pi) <= 1e-10);
    }

    #[test]
    fn identity_is_reducible() {
        let spec = MarkovChainSpec::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        match stationary_distribution(&spec) {
            Err(Error::Reducible { classes }) => assert_eq!(classes, vec![vec![0], vec![1]]),
            other => panic!("expected reducible, got {other:?}"),
        }
    }

    #[test]
    fn transient_states_get_no_mass() {
        // state 0 leaks into the closed class {1, 2}
        let spec =
            MarkovChainSpec::from_rows(&[vec![0.5, 0.5, 0.0], vec![0.0, 0.2, 0.8], vec![0.0, 0.6, 0.4]]).unwrap();
        assert_eq!(spec.closed_classes(), vec![vec![1, 2]]);
        let pi = stationary_distribution(&spec).unwrap();
        assert_eq!(pi[0], 0.0);
        assert!(stationary_residual(&spec, &pi) <= 1e-10);
    }

    #[test]
    fn power_iteration_agrees_with_direct_solve() {
        let spec =
            MarkovChainSpec::from_rows(&[vec![0.1, 0.6, 0.3], vec![0.4, 0.4, 0.2], vec![0.5, 0.0, 0.5]]).unwrap();
        let direct = direct_solve(&spec).unwrap();
        let iterated = power_iteration(&spec);
        assert!(l1(&direct, &iterated) < 1e-12);
    }

    #[test]
    fn invalid_chains_rejected() {
        assert!(MarkovChainSpec::from_rows(&[vec![0.5, 0.6], vec![0.5, 0.5]]).is_err());
        assert!(MarkovChainSpec::from_rows(&[vec![1.5, -0.5], vec![0.5, 0.5]]).is_err());
        assert!(MarkovChainSpec::new(2, vec![1.0, 0.0, 1.0]).is_err());
        assert!(serde_json::from_str::<MarkovChainSpec>(r#"{"n_states":1,"transition":[0.5]}"#).is_err());
    }

    #[test]
    fn json_form() {
        let spec: MarkovChainSpec = serde_json::from_str(r#"{"n_states":2,"transition":[0.9,0.1,0.1,0.9]}"#).unwrap();
        assert_eq!(spec.p(0, 1), 0.1);
        assert_eq!(serde_json::to_string(&spec).unwrap(), r#"{"n_states":2,"transition":[0.9,0.1,0.1,0.9]}"#);
    }
}
