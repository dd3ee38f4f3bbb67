//! Finite MDPs explored by stationary policies.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{check_stochastic_rows, closed_classes, exact_ik, CiVerdict, MarkovChainSpec};
use crate::processes::{
    random_probability_vector, random_stochastic_matrix, rng_stream, sample_path, IdealChainRecipe, RowSampler,
    ACTION_STREAM, STATE_STREAM,
};
use crate::representation::RepresentationFunction;
use crate::series::{ObservationSeries, Observations, SeriesMeta, Symbol};

/// `P(x' | x, a)`, stored flat in `[x][a][x']` order. JSON:
/// `{"n_states": 2, "n_actions": 1, "transition": [..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMdp")]
pub struct MdpSpec {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
}

impl TryFrom<RawMdp> for MdpSpec {
    type Error = Error;
    fn try_from(raw: RawMdp) -> Result<Self> {
        Self::new(raw.n_states, raw.n_actions, raw.transition)
    }
}

impl MdpSpec {
    pub fn new(n_states: usize, n_actions: usize, transition: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidSpec("MDP needs at least one state and one action".into()));
        }
        if transition.len() != n_states * n_actions * n_states {
            return Err(Error::InvalidSpec(format!(
                "transition has {} entries, expected {}",
                transition.len(),
                n_states * n_actions * n_states
            )));
        }
        check_stochastic_rows(&transition, n_states, "MDP transition")?;
        Ok(Self { n_states, n_actions, transition })
    }

    /// One `|X| x |X|` matrix per action.
    pub fn from_action_matrices(per_action: &[Vec<Vec<f64>>]) -> Result<Self> {
        let n_actions = per_action.len();
        let n_states = per_action.first().map_or(0, |m| m.len());
        let mut transition = Vec::with_capacity(n_states * n_actions * n_states);
        for x in 0..n_states {
            for m in per_action {
                let row = m.get(x).filter(|r| r.len() == n_states).ok_or_else(|| {
                    Error::InvalidSpec("action matrices must all be |X| x |X|".into())
                })?;
                transition.extend_from_slice(row);
            }
        }
        Self::new(n_states, n_actions, transition)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn p(&self, from: usize, action: usize, to: usize) -> f64 {
        self.transition[(from * self.n_actions + action) * self.n_states + to]
    }

    pub fn transition(&self) -> &[f64] {
        &self.transition
    }
}

/// `pi(a | x)`, stored flat in `[x][a]` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPolicy")]
pub struct StationaryPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl TryFrom<RawPolicy> for StationaryPolicy {
    type Error = Error;
    fn try_from(raw: RawPolicy) -> Result<Self> {
        Self::new(raw.n_states, raw.n_actions, raw.probs)
    }
}

impl StationaryPolicy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 || probs.len() != n_states * n_actions {
            return Err(Error::InvalidSpec(format!(
                "policy needs {} probabilities, got {}",
                n_states * n_actions,
                probs.len()
            )));
        }
        check_stochastic_rows(&probs, n_actions, "policy")?;
        Ok(Self { n_states, n_actions, probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions, probs: vec![1.0 / n_actions as f64; n_states * n_actions] }
    }

    /// Always takes `actions[x]` in state `x`.
    pub fn deterministic(actions: &[usize], n_actions: usize) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (x, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::OutOfRange(format!("action {a} outside 0..{n_actions}")));
            }
            probs[x * n_actions + a] = 1.0;
        }
        Self::new(actions.len(), n_actions, probs)
    }

    #[inline]
    pub fn prob(&self, state: usize, action: usize) -> f64 {
        self.probs[state * self.n_actions + action]
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `min_{x,a} pi(a | x)`.
    pub fn alpha_floor(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_stochastic(&self) -> bool {
        self.alpha_floor() > 0.0
    }

    /// `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, other: &Self, lambda: f64) -> Result<Self> {
        if self.n_states != other.n_states || self.n_actions != other.n_actions {
            return Err(Error::DomainMismatch("policies over different spaces".into()));
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::OutOfRange(format!("mixture weight {lambda} outside [0, 1]")));
        }
        let probs = self.probs.iter().zip(&other.probs).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
        Ok(Self { n_states: self.n_states, n_actions: self.n_actions, probs })
    }
}

fn check_pair(mdp: &MdpSpec, policy: &StationaryPolicy) -> Result<()> {
    if mdp.n_states != policy.n_states || mdp.n_actions != policy.n_actions {
        return Err(Error::DomainMismatch(format!(
            "policy is {}x{}, MDP is {}x{}",
            policy.n_states, policy.n_actions, mdp.n_states, mdp.n_actions
        )));
    }
    Ok(())
}

/// `M(x' | x) = sum_a pi(a | x) P(x' | x, a)`.
pub fn induced_chain(mdp: &MdpSpec, policy: &StationaryPolicy) -> Result<MarkovChainSpec> {
    check_pair(mdp, policy)?;
    let n = mdp.n_states;
    let mut m = vec![0.0; n * n];
    for x in 0..n {
        for a in 0..mdp.n_actions {
            let w = policy.prob(x, a);
            if w == 0.0 {
                continue;
            }
            for x2 in 0..n {
                m[x * n + x2] += w * mdp.p(x, a, x2);
            }
        }
    }
    for row in m.chunks_mut(n) {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= s);
    }
    MarkovChainSpec::new(n, m)
}

fn admissible_chain(mdp: &MdpSpec, policy: &StationaryPolicy) -> Result<MarkovChainSpec> {
    let chain = induced_chain(mdp, policy)?;
    chain.stationary().map_err(|e| Error::NotAdmissible(Box::new(e)))?;
    Ok(chain)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Connectivity {
    pub connected: bool,
    /// An ordered pair `(from, to)` with `to` unreachable from `from`.
    pub witness: Option<(usize, usize)>,
}

/// Strong connectivity of the digraph with an edge `x -> x'` whenever some
/// action moves `x` to `x'` with positive probability.
pub fn check_weakly_connected(mdp: &MdpSpec) -> Connectivity {
    let n = mdp.n_states;
    let edge = |x: usize, x2: usize| (0..mdp.n_actions).any(|a| mdp.p(x, a, x2) > 0.0);
    for from in 0..n {
        let mut seen = vec![false; n];
        seen[from] = true;
        let mut stack = vec![from];
        while let Some(x) = stack.pop() {
            for x2 in 0..n {
                if !seen[x2] && edge(x, x2) {
                    seen[x2] = true;
                    stack.push(x2);
                }
            }
        }
        if let Some(to) = seen.iter().position(|s| !s) {
            return Connectivity { connected: false, witness: Some((from, to)) };
        }
    }
    Connectivity { connected: true, witness: None }
}

/// Exact check of `P(X_0 | f(X_0), U_0) = P(X_0 | f(X_0))` with
/// `U_0 = (X_-1, A_-1, A_0, X_1, A_1)` under the stationary law of `policy`.
/// Zero-probability conditioning events are skipped.
pub fn ci_check_under_policy(
    mdp: &MdpSpec,
    policy: &StationaryPolicy,
    f: &RepresentationFunction,
    tol: f64,
) -> Result<CiVerdict> {
    let chain = admissible_chain(mdp, policy)?;
    let table = f
        .table()
        .filter(|t| t.len() == mdp.n_states)
        .ok_or_else(|| Error::DomainMismatch("representation must be a lookup table over the MDP states".into()))?;
    let labels: Vec<usize> = table.iter().map(|s| s.index()).collect();
    let mu = chain.stationary()?;
    let (n, na) = (mdp.n_states, mdp.n_actions);
    let mut class_mass = vec![0.0; f.alphabet_size()];
    for (x, &y) in labels.iter().enumerate() {
        class_mass[y] += mu[x];
    }

    let mut max_violation = 0.0f64;
    let mut weights = vec![0.0; n];
    let mut totals = vec![0.0; f.alphabet_size()];
    for xm in 0..n {
        for am in 0..na {
            let w_prev = mu[xm] * policy.prob(xm, am);
            if w_prev == 0.0 {
                continue;
            }
            for a0 in 0..na {
                for x1 in 0..n {
                    for a1 in 0..na {
                        let tail = policy.prob(x1, a1);
                        if tail == 0.0 {
                            continue;
                        }
                        totals.iter_mut().for_each(|t| *t = 0.0);
                        for x0 in 0..n {
                            let w = w_prev * mdp.p(xm, am, x0) * policy.prob(x0, a0) * mdp.p(x0, a0, x1) * tail;
                            weights[x0] = w;
                            totals[labels[x0]] += w;
                        }
                        for x0 in 0..n {
                            let y = labels[x0];
                            if totals[y] <= 0.0 || class_mass[y] <= 0.0 {
                                continue;
                            }
                            let v = (weights[x0] / totals[y] - mu[x0] / class_mass[y]).abs();
                            max_violation = max_violation.max(v);
                        }
                    }
                }
            }
        }
    }
    Ok(CiVerdict { holds: max_violation <= tol, max_violation })
}

/// Exact `I_1` of `f` under the stationary law of `policy`.
pub fn exact_i1_under_policy(mdp: &MdpSpec, policy: &StationaryPolicy, f: &RepresentationFunction) -> Result<f64> {
    let chain = admissible_chain(mdp, policy)?;
    exact_ik(&chain, f, 1)
}

/// Trajectory `(x_i, a_i)`, stationary start on the induced chain. States and
/// actions draw from separate streams, so a single-action MDP reproduces
/// `sample_chain` on its only transition matrix.
pub fn sample_mdp(
    mdp: &MdpSpec,
    policy: &StationaryPolicy,
    n: usize,
    seed: u64,
    burn_in: usize,
) -> Result<ObservationSeries> {
    if n == 0 {
        return Err(Error::OutOfRange("trajectory length must be at least 1".into()));
    }
    let chain = admissible_chain(mdp, policy)?;
    let mu = chain.stationary()?;
    let moves = RowSampler::new(&mdp.transition, mdp.n_states);
    let choices = RowSampler::new(&policy.probs, mdp.n_actions);
    let mut state_rng = rng_stream(seed, STATE_STREAM);
    let mut action_rng = rng_stream(seed, ACTION_STREAM);

    let mut x = sample_path(&RowSampler::new(mu, mu.len()), &[1.0], 1, 0, &mut state_rng)[0];
    let step = |x: usize, state_rng: &mut _, action_rng: &mut _| {
        let a = choices.draw(x, action_rng);
        (a, moves.draw(x * mdp.n_actions + a, state_rng))
    };
    for _ in 0..burn_in {
        x = step(x, &mut state_rng, &mut action_rng).1;
    }
    let mut states = Vec::with_capacity(n);
    let mut actions = Vec::with_capacity(n);
    for i in 0..n {
        states.push(x);
        if i + 1 < n {
            let (a, next) = step(x, &mut state_rng, &mut action_rng);
            actions.push(a);
            x = next;
        } else {
            actions.push(choices.draw(x, &mut action_rng));
        }
    }
    ObservationSeries::new(
        Observations::Discrete(states),
        Some(actions),
        SeriesMeta { seed: Some(seed), generator: "sample_mdp".into() },
    )
}

/// Per-action label transitions `T_a` sharing one emission law `q`:
/// `P(x' | x, a) = T_a(f(x), f(x')) q(x' | f(x'))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdealMdpRecipe {
    pub label_transitions: Vec<Vec<Vec<f64>>>,
    pub preimage_sizes: Vec<usize>,
    pub emission_weights: Vec<Vec<f64>>,
}

impl IdealMdpRecipe {
    fn per_action(&self) -> impl Iterator<Item = IdealChainRecipe> + '_ {
        self.label_transitions.iter().map(|t| IdealChainRecipe {
            label_transition: t.clone(),
            preimage_sizes: self.preimage_sizes.clone(),
            emission_weights: self.emission_weights.clone(),
        })
    }
}

pub fn build_ideal_mdp(recipe: &IdealMdpRecipe) -> Result<(MdpSpec, RepresentationFunction)> {
    if recipe.label_transitions.is_empty() {
        return Err(Error::InvalidSpec("ideal MDP needs at least one action".into()));
    }
    let mut matrices = Vec::new();
    let mut f = None;
    for r in recipe.per_action() {
        let chain = crate::processes::build_ideal_chain(&r)?;
        let n = chain.spec.n_states();
        matrices.push(chain.spec.transition().chunks(n).map(<[f64]>::to_vec).collect::<Vec<_>>());
        f = Some(chain.representation);
    }
    Ok((MdpSpec::from_action_matrices(&matrices)?, f.expect("at least one action")))
}

pub fn random_ideal_mdp_recipe(
    rng: &mut impl Rng,
    n_states: usize,
    alphabet_size: usize,
    n_actions: usize,
) -> Result<IdealMdpRecipe> {
    let base = crate::processes::random_recipe(rng, n_states, alphabet_size)?;
    let mut label_transitions = vec![base.label_transition];
    for _ in 1..n_actions {
        label_transitions.push(random_stochastic_matrix(rng, alphabet_size, 0.05));
    }
    Ok(IdealMdpRecipe { label_transitions, preimage_sizes: base.preimage_sizes, emission_weights: base.emission_weights })
}

/// Stochastic policy with every `pi(a | x) >= floor / (|A| (1 + floor))`.
pub fn random_stochastic_policy(rng: &mut impl Rng, n_states: usize, n_actions: usize, floor: f64) -> StationaryPolicy {
    let probs = (0..n_states).flat_map(|_| random_probability_vector(rng, n_actions, floor)).collect();
    StationaryPolicy::new(n_states, n_actions, probs).expect("normalized rows")
}

/// Stochastic policy whose action law depends on the state only through its
/// label under `f`.
pub fn random_label_policy(
    rng: &mut impl Rng,
    f: &RepresentationFunction,
    n_actions: usize,
    floor: f64,
) -> Result<StationaryPolicy> {
    let table = f.table().ok_or_else(|| Error::DomainMismatch("label policies need a lookup table".into()))?;
    let per_label: Vec<Vec<f64>> =
        (0..f.alphabet_size()).map(|_| random_probability_vector(rng, n_actions, floor)).collect();
    let probs = table.iter().flat_map(|s: &Symbol| per_label[s.index()].iter().copied()).collect();
    StationaryPolicy::new(table.len(), n_actions, probs)
}

/// Closed classes of the chain induced by `policy`.
pub fn induced_closed_classes(mdp: &MdpSpec, policy: &StationaryPolicy) -> Result<Vec<Vec<usize>>> {
    let chain = induced_chain(mdp, policy)?;
    Ok(closed_classes(chain.n_states(), |i, j| chain.p(i, j) > 0.0))
}
