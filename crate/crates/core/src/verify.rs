//! Property suites run by `tsinfo verify`.
//!
//! Every suite is a pure function of its configuration and seed. Random
//! instances are drawn sequentially from keyed streams, evaluated in
//! parallel, and reduced in instance order, so reports are reproducible
//! byte for byte.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blocks::collect_blocks;
use crate::bounds::{
    delta_bound, monotonicity_scan, q_bound, required_n, estimation_bound, continuity_bound,
    BetaSchedule, BoundGrid, BoundParams, REQUIRED_N_CAP,
};
use crate::error::{Error, Result};
use crate::estimators::{binary_entropy, ik_hat, iinf_hat};
use crate::format::{Cell, Table};
use crate::mdp::{
    build_ideal_mdp, check_weakly_connected, ci_check_under_policy, exact_i1_under_policy, induced_chain,
    random_ideal_mdp_recipe, random_label_policy, IdealMdpRecipe, StationaryPolicy,
};
use crate::oracle::{
    chain_rule_identity_check, ci_check_markov, entropy_rate_sandwich, exact_block_distribution, exact_hk, exact_ik,
    exact_label_transition, exact_past_information, stationary_distribution, stationary_residual, MarkovChainSpec,
};
use crate::processes::{
    build_ideal_chain, derive_seeds, enumerate_family, random_chain, random_recipe, rng_stream, sample_chain,
    IdealChain, IdealChainRecipe,
};
use crate::representation::{apply_representation, RepresentationFunction};
use crate::selection::{select_active, select_passive, Mode, DEFAULT_TAU};
use crate::series::{ObservationSeries, Symbol};

/// Suite names in run order.
pub const SUITES: &[&str] = &[
    "ideal-ci",
    "ci-equality",
    "markov-collapse",
    "oracle",
    "estimator",
    "continuity",
    "recovery",
    "policy-invariance",
    "active",
    "bounds",
];

/// Tolerance for "passes the conditional-independence check" when the verdict
/// feeds an equivalence, as opposed to the construction check at 1e-12.
pub const CI_TOL: f64 = 1e-9;

const MAX_LISTED_FAILURES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub ideal_recipes: usize,
    pub ci_equality_chains: usize,
    pub ci_equality_max_states: usize,
    /// Smallest exact `I_1(f)` accepted for a ci-equality instance, bits.
    pub ci_equality_min_information: f64,
    pub collapse_max_k: usize,
    pub oracle_random_chains: usize,
    pub estimator_seeds: usize,
    pub estimator_lengths: Vec<usize>,
    pub estimator_tolerances: Vec<f64>,
    pub estimator_required: usize,
    pub continuity_tuples: usize,
    pub recovery_seeds: usize,
    pub recovery_n: usize,
    pub recovery_required: usize,
    pub recovery_growth_lengths: Vec<usize>,
    pub policy_mdps: usize,
    pub policy_pairs: usize,
    pub policy_floor: f64,
    pub active_seeds: usize,
    pub active_n: usize,
    pub active_required: usize,
    pub bound_mc_reps: usize,
    pub bound_mc_n: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            ideal_recipes: 500,
            ci_equality_chains: 100,
            ci_equality_max_states: 6,
            ci_equality_min_information: 0.01,
            collapse_max_k: 5,
            oracle_random_chains: 1000,
            estimator_seeds: 10,
            estimator_lengths: vec![100_000, 1_000_000],
            estimator_tolerances: vec![0.02, 0.005],
            estimator_required: 9,
            continuity_tuples: 120,
            recovery_seeds: 20,
            recovery_n: 100_000,
            recovery_required: 19,
            recovery_growth_lengths: vec![1_000, 10_000, 100_000],
            policy_mdps: 50,
            policy_pairs: 20,
            policy_floor: 0.05,
            active_seeds: 20,
            active_n: 100_000,
            active_required: 19,
            bound_mc_reps: 2,
            bound_mc_n: 20_000_000,
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidSpec(format!("verify config: {msg}")));
        if self.estimator_lengths.len() != self.estimator_tolerances.len() {
            return bad("estimator_lengths and estimator_tolerances differ in length");
        }
        if self.estimator_required > self.estimator_seeds
            || self.recovery_required > self.recovery_seeds
            || self.active_required > self.active_seeds
        {
            return bad("a required count exceeds its number of seeds");
        }
        if !(3..=8).contains(&self.ci_equality_max_states) {
            return bad("ci_equality_max_states must be in 3..=8");
        }
        if self.collapse_max_k == 0 || self.collapse_max_k > 8 {
            return bad("collapse_max_k must be in 1..=8");
        }
        if !(self.policy_floor > 0.0) {
            return bad("policy_floor must be positive");
        }
        if self.estimator_lengths.iter().chain(&self.recovery_growth_lengths).any(|&n| n < 2)
            || self.recovery_n < 2
            || self.active_n < 2
            || self.bound_mc_n < 2
        {
            return bad("series lengths must be at least 2");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: u64,
    pub failure_count: u64,
    /// The first few failure messages.
    pub failures: Vec<String>,
    /// One-line digest, e.g. `19/20 seeds CI-satisfying`.
    pub detail: String,
    pub table: Table,
}

#[derive(Debug, Default)]
struct Tally {
    checks: u64,
    failure_count: u64,
    failures: Vec<String>,
}

impl Tally {
    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) -> bool {
        self.checks += 1;
        if !ok {
            self.failure_count += 1;
            if self.failures.len() < MAX_LISTED_FAILURES {
                self.failures.push(msg());
            }
        }
        ok
    }

    fn absorb(&mut self, other: Tally) {
        self.checks += other.checks;
        self.failure_count += other.failure_count;
        let room = MAX_LISTED_FAILURES.saturating_sub(self.failures.len());
        self.failures.extend(other.failures.into_iter().take(room));
    }

    fn finish(self, suite: &str, seed: u64, detail: String, table: Table) -> SuiteReport {
        SuiteReport {
            suite: suite.into(),
            seed,
            passed: self.failure_count == 0,
            checks: self.checks,
            failure_count: self.failure_count,
            failures: self.failures,
            detail,
            table,
        }
    }
}

/// Stream ids for instance generation, one per suite.
mod stream {
    pub const IDEAL: u64 = 100;
    pub const CI_EQUALITY: u64 = 101;
    pub const ORACLE: u64 = 102;
    pub const ESTIMATOR: u64 = 103;
    pub const CONTINUITY: u64 = 104;
    pub const RECOVERY: u64 = 105;
    pub const POLICY: u64 = 106;
    pub const ACTIVE: u64 = 107;
    pub const BOUNDS: u64 = 108;
}

pub fn run_suite(name: &str, cfg: &VerifyConfig, seed: u64) -> Result<SuiteReport> {
    cfg.validate()?;
    match name {
        "ideal-ci" => ideal_ci(cfg, seed),
        "ci-equality" => ci_equality(cfg, seed),
        "markov-collapse" => markov_collapse(cfg, seed),
        "oracle" => oracle_properties(cfg, seed),
        "estimator" => estimator(cfg, seed),
        "continuity" => continuity(cfg, seed),
        "recovery" => recovery(cfg, seed),
        "policy-invariance" => policy_invariance(cfg, seed),
        "active" => active(cfg, seed),
        "bounds" => bounds(cfg, seed),
        other => Err(Error::InvalidSpec(format!("unknown suite '{other}'; expected one of {}", SUITES.join(", ")))),
    }
}

fn random_table(rng: &mut impl Rng, n_states: usize, alphabet_size: usize) -> RepresentationFunction {
    let table: Vec<Symbol> = (0..n_states).map(|_| Symbol(rng.random_range(0..alphabet_size) as u32)).collect();
    RepresentationFunction::lookup_table(table, alphabet_size).expect("symbols below alphabet size")
}

fn ideal_ci(cfg: &VerifyConfig, seed: u64) -> Result<SuiteReport> {
    let mut rng = rng_stream(seed, stream::IDEAL);
    let mut cases = Vec::with_capacity(cfg.ideal_recipes);
    for _ in 0..cfg.ideal_recipes {
        let alphabet = rng.random_range(2..=3);
        let n_states = rng.random_range(alphabet..=9);
        let recipe = random_recipe(&mut rng, n_states, alphabet)?;
        let g = random_table(&mut rng, n_states, 2);
        cases.push((recipe, g));
    }
    let results: Vec<(Tally, Vec<Cell>)> = cases
        .par_iter()
        .enumerate()
        .map(|(i, (recipe, g))| -> Result<_> {
            let mut t = Tally::default();
            let chain = build_ideal_chain(recipe)?;
            let verdict = ci_check_markov(&chain.spec, &chain.representation, 1e-12, 1)?;
            t.check(verdict.holds, || format!("recipe {i}: CI violation {:e}", verdict.max_violation));
            let lumped = exact_label_transition(&chain.spec, &chain.representation)?;
            let t_err = recipe
                .label_transition
                .iter()
                .flatten()
                .zip(&lumped)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            t.check(t_err <= 1e-12, || format!("recipe {i}: lumped transition off by {t_err:e}"));
            let gap = entropy_rate_sandwich(&chain.spec, &chain.representation, 1)?.gap();
            t.check(gap <= 1e-9, || format!("recipe {i}: sandwich gap {gap:e} at k=1"));
            let rule = chain_rule_identity_check(&chain.spec, &chain.representation, g)?;
            t.check(rule.holds, || format!("recipe {i}: chain rule {} vs {}", rule.with_g, rule.without_g));
            let gamma = chain.mixing.map_or(f64::NAN, |m| m.gamma());
            let row = vec![
                i.into(),
                recipe.n_states().into(),
                recipe.alphabet_size().into(),
                verdict.max_violation.into(),
                t_err.into(),
                gap.into(),
                gamma.into(),
            ];
            Ok((t, row))
        })
        .collect::<Result<_>>()?;
    let mut table =
        Table::new(&["recipe", "n_states", "alphabet_size", "max_violation", "transition_error", "sandwich_gap", "gamma"]);
    let mut tally = Tally::default();
    let mut worst = 0.0f64;
    for (t, row) in results {
        if let Cell::Float(v) = row[3] {
            worst = worst.max(v);
        }
        tally.absorb(t);
        table.push(row);
    }
    let detail = format!("{} recipes, worst CI violation {worst:e}", cfg.ideal_recipes);
    Ok(tally.finish("ideal-ci", seed, detail, table))
}

/// Random ideal chains over two labels whose true map carries at least
/// `ci_equality_min_information` bits, with the number of rejected draws.
fn ci_equality_instances(cfg: &VerifyConfig, seed: u64) -> Result<(Vec<IdealChain>, usize)> {
    let mut rng = rng_stream(seed, stream::CI_EQUALITY);
    let mut out = Vec::with_capacity(cfg.ci_equality_chains);
    let mut rejected = 0;
    while out.len() < cfg.ci_equality_chains {
        let n_states = rng.random_range(3..=cfg.ci_equality_max_states);
        let chain = build_ideal_chain(&random_recipe(&mut rng, n_states, 2)?)?;
        if exact_ik(&chain.spec, &chain.representation, 1)? >= cfg.ci_equality_min_information {
            out.push(chain);
        } else {
            rejected += 1;
        }
    }
    Ok((out, rejected))
}

fn ci_equality(cfg: &VerifyConfig, seed: u64) -> Result<SuiteReport> {
    let (chains, rejected) = ci_equality_instances(cfg, seed)?;
    let results: Vec<(Tally, Vec<Cell>)> = chains
        .par_iter()
        .enumerate()
        .map(|(i, chain)| -> Result<_> {
            let mut t = Tally::default();
            let n = chain.spec.n_states();
            let i1_f = exact_ik(&chain.spec, &chain.representation, 1)?;
            let (mut ci_maps, mut equal_maps, mut runner_up) = (0usize, 0usize, f64::NEG_INFINITY);
            for (j, g) in enumerate_family(n, 2)?.iter().enumerate() {
                let i1_g = exact_ik(&chain.spec, g, 1)?;
                let ci = ci_check_markov(&chain.spec, g, CI_TOL, 1)?.holds;
                let equal = (i1_f - i1_g).abs() <= 1e-9;
                ci_maps += ci as usize;
                equal_maps += equal as usize;
                if !ci {
                    runner_up = runner_up.max(i1_g);
                }
                t.check(i1_f >= i1_g - 1e-12, || format!("chain {i}: map {j} has I_1 {i1_g} above {i1_f}"));
                t.check(equal == ci, || format!("chain {i}: map {j} equal={equal} but CI={ci}"));
            }
            let row = vec![i.into(), n.into(), i1_f.into(), ci_maps.into(), equal_maps.into(), (i1_f - runner_up).into()];
            Ok((t, row))
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(&["chain", "n_states", "i1_true", "ci_maps", "maximizing_maps", "margin_over_non_ci"]);
    let mut tally = Tally::default();
    let mut margin = f64::INFINITY;
    for (t, row) in results {
        if let Cell::Float(m) = row[5] {
            margin = margin.min(m);
        }
        tally.absorb(t);
        table.push(row);
    }
    let detail = format!(
        "{} chains ({rejected} low-information draws rejected), smallest margin over non-CI maps {}",
        chains.len(),
        crate::format::sig6(margin)
    );
    Ok(tally.finish("ci-equality", seed, detail, table))
}

fn markov_collapse(cfg: &VerifyConfig, seed: u64) -> Result<SuiteReport> {
    let (chains, _) = ci_equality_instances(cfg, seed)?;
    let max_k = cfg.collapse_max_k;
    let results: Vec<(Tally, Vec<Cell>)> = chains
        .par_iter()
        .enumerate()
        .map(|(i, chain)| -> Result<_> {
            let mut t = Tally::default();
            let n = chain.spec.n_states();
            let i1 = exact_ik(&chain.spec, &chain.representation, 1)?;
            let mut drift = 0.0f64;
            for k in 2..=max_k {
                let ik = exact_ik(&chain.spec, &chain.representation, k)?;
                drift = drift.max((ik - i1).abs());
                t.check((ik - i1).abs() <= 1e-9, || format!("chain {i}: I_{k}(f) = {ik} but I_1(f) = {i1}"));
            }
            let mut non_ci = 0usize;
            let mut growth = 0.0f64;
            for (j, g) in enumerate_family(n, 2)?.iter().enumerate() {
                if ci_check_markov(&chain.spec, g, CI_TOL, 1)?.holds {
                    continue;
                }
                non_ci += 1;
                let law = exact_block_distribution(&chain.spec, g, max_k)?;
                let (mut prev_i, mut prev_h) = (f64::NEG_INFINITY, f64::INFINITY);
                for k in 1..=max_k {
                    let prefix = law.prefix(k + 1);
                    let (ik, hk) = (prefix.information_last_vs_prefix(), prefix.conditional_entropy_last());
                    t.check(ik >= prev_i - 1e-12, || format!("chain {i} map {j}: I_{k} = {ik} < I_{} = {prev_i}", k - 1));
                    t.check(hk <= prev_h + 1e-12, || format!("chain {i} map {j}: h_{k} = {hk} > h_{} = {prev_h}", k - 1));
                    if k > 1 {
                        growth = growth.max(ik - prev_i);
                    }
                    prev_i = ik;
                    prev_h = hk;
                }
            }
            Ok((t, vec![i.into(), n.into(), i1.into(), drift.into(), non_ci.into(), growth.into()]))
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(&["chain", "n_states", "i1_true", "max_drift_true", "non_ci_maps", "max_step_growth_non_ci"]);
    let mut tally = Tally::default();
    for (t, row) in results {
        tally.absorb(t);
        table.push(row);
    }
    let detail = format!("{} chains, k = 1..{max_k}", chains.len());
    Ok(tally.finish("markov-collapse", seed, detail, table))
}

/// Irreducible chain with roughly half of the transitions removed; the cycle
/// `x -> x+1` is always kept.
fn random_sparse_chain(rng: &mut impl Rng, n: usize) -> MarkovChainSpec {
    let mut rows = vec![vec![0.0; n]; n];
    for (x, row) in rows.iter_mut().enumerate() {
        for (y, p) in row.iter_mut().enumerate() {
            if y == (x + 1) % n || rng.random_bool(0.5) {
                *p = rng.random::<f64>() + 0.01;
            }
        }
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= s);
    }
    MarkovChainSpec::from_rows(&rows).expect("normalized rows")
}

fn oracle_properties(cfg: &VerifyConfig, seed: u64) -> Result<SuiteReport> {
    let mut rng = rng_stream(seed, stream::ORACLE);
    let mut tally = Tally::default();
    let mut table = Table::new(&["property", "cases", "worst"]);

    let specs: Vec<MarkovChainSpec> = (0..cfg.oracle_random_chains)
        .map(|i| {
            let n = rng.random_range(2..=12);
            if i % 2 == 0 { random_chain(&mut rng, n) } else { random_sparse_chain(&mut rng, n) }
        })
        .collect();
    let residuals: Vec<f64> = specs
        .par_iter()
        .map(|s| stationary_distribution(s).map(|pi| stationary_residual(s, &pi)))
        .collect::<Result<_>>()?;
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    for (i, r) in residuals.iter().enumerate() {
        tally.check(*r <= 1e-10, || format!("chain {i}: stationary residual {r:e}"));
    }
    table.push(vec!["stationary_residual".into(), specs.len().into(), worst.into()]);

    // past and future information agree under stationarity
    let mut worst = 0.0f64;
    let mut cases = 0usize;
    for _ in 0..50 {
        let n = rng.random_range(2..=5);
        let spec = random_chain(&mut rng, n);
        let alphabet = rng.random_range(2..=3);
        let g = random_table(&mut rng, n, alphabet);
        for k in 1..=4 {
            let (fwd, back) = (exact_ik(&spec, &g, k)?, exact_past_information(&spec, &g, k)?);
            worst = worst.max((fwd - back).abs());
            cases += 1;
            tally.check((fwd - back).abs() <= 1e-9, || format!("reversal k={k}: {fwd} vs {back}"));
        }
    }
    table.push(vec!["reversal_symmetry".into(), cases.into(), worst.into()]);

    // exact h_k nonincreasing and I_k nondecreasing on random chains
    let mut worst = 0.0f64;
    let mut cases = 0usize;
    for _ in 0..50 {
        let n = rng.random_range(3..=5);
        let spec = random_chain(&mut rng, n);
        let g = random_table(&mut rng, n, 2);
        let law = exact_block_distribution(&spec, &g, 6)?;
        for k in 2..=6 {
            let (a, b) = (law.prefix(k), law.prefix(k + 1));
            let dh = b.conditional_entropy_last() - a.conditional_entropy_last();
            let di = a.information_last_vs_prefix() - b.information_last_vs_prefix();
            worst = worst.max(dh).max(di);
            cases += 1;
            tally.check(dh <= 1e-12 && di <= 1e-12, || format!("memory monotonicity at k={k}: dh={dh:e}, dI={di:e}"));
        }
        tally.check((exact_hk(&spec, &g, 3)? - law.prefix(4).conditional_entropy_last()).abs() <= 1e-12, || {
            "exact_hk disagrees with the block-law prefix".into()
        });
    }
    table.push(vec!["memory_monotonicity".into(), cases.into(), worst.into()]);

    // sandwich on 4-state chains with a 2-label lumping
    let mut worst = 0.0f64;
    let mut cases = 0usize;
    for _ in 0..30 {
        let spec = random_chain(&mut rng, 4);
        let g = RepresentationFunction::from_indices(&[0, 0, 1, 1], 2)?;
        let mut prev = entropy_rate_sandwich(&spec, &g, 1)?;
        for k in 2..=6 {
            let s = entropy_rate_sandwich(&spec, &g, k)?;
            let bad = (s.gap() - prev.gap()).max(s.upper - prev.upper).max(prev.lower - s.lower);
            worst = worst.max(bad);
            cases += 1;
            tally.check(bad <= 1e-12 && s.lower <= s.upper + 1e-12, || format!("sandwich at k={k}: {prev:?} -> {s:?}"));
            prev = s;
        }
    }
    table.push(vec!["sandwich_monotonicity".into(), cases.into(), worst.into()]);

    let detail = format!("{} random chains for the stationary solver", specs.len());
    Ok(tally.finish("oracle", seed, detail, table))
}

fn symmetric_chain(p: f64) -> MarkovChainSpec {
    MarkovChainSpec::from_rows(&[vec![1.0 - p, p], vec![p, 1.0 - p]]).expect("stochastic")
}

fn estimator(cfg: &VerifyConfig, seed: u64) -> Result<SuiteReport> {
    let mut tally = Tally::default();
    let spec = symmetric_chain(0.1);
    let id = RepresentationFunction::identity(2);
    let exact = exact_ik(&spec, &id, 1)?;
    let closed_form = 1.0 - binary_entropy(0.1)?;
    tally.check((exact - closed_form).abs() <= 1e-12, || format!("exact I_1 {exact} vs 1 - h(0.1) = {closed_form}"));
    tally.check((exact - 0.531004).abs() <= 5e-7, || format!("exact I_1 {exact} vs 0.531004"));

    let mut table = Table::new(&["n", "seed", "estimate", "abs_error", "within_tolerance"]);
    let mut digest = Vec::new();
    for (j, (&n, &tol)) in cfg.estimator_lengths.iter().zip(&cfg.estimator_tolerances).enumerate() {
        let seeds = derive_seeds(seed, stream::ESTIMATOR + 1000 * j as u64, cfg.estimator_seeds);
        let estimates: Vec<f64> = seeds
            .par_iter()
            .map(|&s| ik_hat(&id, &sample_chain(&spec, n, s, 0)?, 1).map(|e| e.value))
            .collect::<Result<_>>()?;
        let mut hits = 0;
        for (&s, &v) in seeds.iter().zip(&estimates) {
            let within = (v - exact).abs() <= tol;
            hits += within as usize;
            table.push(vec![n.into(), Cell::Text(s.to_string()), v.into(), (v - exact).abs().into(), within.into()]);
        }
        tally.check(hits >= cfg.estimator_required, || {
            format!("n = {n}: {hits}/{} seeds within {tol}, need {}", seeds.len(), cfg.estimator_required)
        });
        digest.push(format!("n={n}: {hits}/{} within {tol}", seeds.len()));
    }

    // i.i.d. symbols carry no information; a deterministic cycle carries one bit
    let iid = symmetric_chain(0.5);
    let v = iinf_hat(&id, &sample_chain(&iid, 100_000, seed, 0)?)?.value;
    tally.check(v < 0.01, || format!("i.i.d. uniform symbols: estimate {v}"));
    let cycle = ObservationSeries::discrete((0..100_000).map(|i| i % 2).collect())?;
    let v = iinf_hat(&id, &cycle)?.value;
    tally.check((v - 1.0).abs() < 1e-6, || format!("deterministic cycle: estimate {v}"));

    let detail = format!("exact I_1 = {}; {}", crate::format::sig6(exact), digest.join("; "));
    Ok(tally.finish("estimator", seed, detail, table))
}

fn continuity(cfg: &VerifyConfig, seed: u64) -> Result<SuiteReport> {
    let mut rng = rng_stream(seed, stream::CONTINUITY);
    let lengths = [1_000usize, 10_000, 100_000];
    let mut tuples = Vec::with_capacity(cfg.continuity_tuples);
    for i in 0..cfg.continuity_tuples {
        let n_states = rng.random_range(2..=6);
        let alphabet = rng.random_range(2..=3);
        let (spec, f) = if i % 2 == 0 {
            let labels = alphabet.min(n_states);
            let chain = build_ideal_chain(&random_recipe(&mut rng, n_states, labels)?)?;
            (chain.spec, chain.representation)
        } else {
            (random_chain(&mut rng, n_states), random_table(&mut rng, n_states, alphabet))
        };
        let k = rng.random_range(1..=3);
        tuples.push((spec, f, k, lengths[i % lengths.len()], rng.random::<u64>()));
    }
    let results: Vec<(Tally, Vec<Cell>)> = tuples
        .par_iter()
        .enumerate()
        .map(|(i, (spec, f, k, n, s))| -> Result<_> {
            let mut t = Tally::default();
            let exact_law = exact_block_distribution(spec, f, *k)?;
            let symbols = apply_representation(f, &sample_chain(spec, *n, *s, 0)?)?;
            let empirical = collect_blocks(&symbols, f.alphabet_size(), *k)?.to_law();
            let alpha = exact_law.l1_distance(&empirical)?;
            let dev = (exact_law.information_last_vs_prefix() - empirical.information_last_vs_prefix()).abs();
            let bound = continuity_bound(*k, f.alphabet_size(), alpha)?;
            t.check(dev <= bound.value + 1e-12, || format!("tuple {i}: deviation {dev} above bound {}", bound.value));
            let row = vec![
                i.into(),
                spec.n_states().into(),
                f.alphabet_size().into(),
                (*k).into(),
                (*n).into(),
                alpha.into(),
                dev.into(),
                bound.value.into(),
                bound.saturated.into(),
            ];
            Ok((t, row))
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(&[
        "tuple", "n_states", "alphabet_size", "k", "n", "alpha", "deviation", "bound", "saturated",
    ]);
    let mut tally = Tally::default();
    for (t, row) in results {
        tally.absorb(t);
        table.push(row);
    }

    // block-law convergence on ideal chains, averaged over 10 seeds
    let recipes = [
        IdealChainRecipe::uniform_emissions(vec![vec![0.9, 0.1], vec![0.1, 0.9]], vec![2, 2]),
        IdealChainRecipe::uniform_emissions(vec![vec![0.6, 0.4], vec![0.3, 0.7]], vec![1, 3]),
    ];
    let n = 100_000;
    for (r, recipe) in recipes.iter().enumerate() {
        let chain = build_ideal_chain(recipe)?;
        for k in 1..=2 {
            let exact_law = exact_block_distribution(&chain.spec, &chain.representation, k)?;
            let seeds = derive_seeds(seed, stream::CONTINUITY + 1000 + r as u64, 10);
            let tvs: Vec<f64> = seeds
                .par_iter()
                .map(|&s| -> Result<f64> {
                    let symbols = apply_representation(&chain.representation, &sample_chain(&chain.spec, n, s, 0)?)?;
                    exact_law.l1_distance(&collect_blocks(&symbols, 2, k)?.to_law())
                })
                .collect::<Result<_>>()?;
            let mean = tvs.iter().sum::<f64>() / tvs.len() as f64;
            let limit = 5.0 * (2f64.powi(k as i32 + 1) / n as f64).sqrt();
            tally.check(mean <= limit, || format!("recipe {r}, k={k}: mean block distance {mean} above {limit}"));
        }
    }
    let detail = format!("{} tuples, {} violations", tuples.len(), tally.failure_count);
    Ok(tally.finish("continuity", seed, detail, table))
}

fn recovery_chain() -> Result<IdealChain> {
    build_ideal_chain(&IdealChainRecipe::uniform_emissions(vec![vec![0.9, 0.1], vec![0.1, 0.9]], vec![2, 2]))
}

fn recovery(cfg: &VerifyConfig, seed: u64) -> Result<SuiteReport> {
    let chain = recovery_chain()?;
    let family = enumerate_family(4, 2)?;
    let ci: Vec<bool> = family
        .iter()
        .map(|g| ci_check_markov(&chain.spec, g, CI_TOL, 1).map(|v| v.holds))
        .collect::<Result<_>>()?;
    let mut tally = Tally::default();
    let mut table = Table::new(&["n", "seed", "best_index", "best_score", "equivalence_class_size", "ci_satisfying"]);

    let run = |n: usize, seeds: &[u64], table: &mut Table| -> Result<usize> {
        let reports: Vec<_> = seeds
            .par_iter()
            .map(|&s| select_passive(&family, &sample_chain(&chain.spec, n, s, 0)?, Mode::FixedK(1), DEFAULT_TAU))
            .collect::<Result<_>>()?;
        let mut hits = 0;
        for (s, r) in seeds.iter().zip(&reports) {
            let ok = ci[r.best_index];
            hits += ok as usize;
            table.push(vec![
                n.into(),
                Cell::Text(s.to_string()),
                r.best_index.into(),
                r.best_score().into(),
                r.equivalence_class.len().into(),
                ok.into(),
            ]);
        }
        Ok(hits)
    };

    let seeds = derive_seeds(seed, stream::RECOVERY, cfg.recovery_seeds);
    let hits = run(cfg.recovery_n, &seeds, &mut table)?;
    tally.check(hits >= cfg.recovery_required, || {
        format!("{hits}/{} seeds selected a CI map, need {}", seeds.len(), cfg.recovery_required)
    });

    // the fraction of CI selections should not drop as n grows
    let mut fractions = Vec::new();
    for &n in &cfg.recovery_growth_lengths {
        let hits = run(n, &seeds, &mut table)?;
        fractions.push(hits as f64 / seeds.len() as f64);
    }
    for w in fractions.windows(2) {
        let p = w[0].max(w[1]);
        let slack = 2.0 * (2.0 * p * (1.0 - p) / seeds.len() as f64).sqrt();
        tally.check(w[1] + slack >= w[0], || format!("CI fraction fell from {} to {}", w[0], w[1]));
    }
    let detail = format!(
        "{hits}/{} seeds CI-satisfying at n = {}; fractions over n {:?}: {:?}",
        seeds.len(),
        cfg.recovery_n,
        cfg.recovery_growth_lengths,
        fractions
    );
    Ok(tally.finish("recovery", seed, detail, table))
}

fn policy_invariance(cfg: &VerifyConfig, seed: u64) -> Result<SuiteReport> {
    let mut rng = rng_stream(seed, stream::POLICY);
    struct Case {
        recipe: IdealMdpRecipe,
        policies: Vec<StationaryPolicy>,
        lambda: f64,
    }
    let mut cases = Vec::with_capacity(cfg.policy_mdps);
    for _ in 0..cfg.policy_mdps {
        let n_states = rng.random_range(3..=6);
        let recipe = random_ideal_mdp_recipe(&mut rng, n_states, 2, 2)?;
        let (_, f) = build_ideal_mdp(&recipe)?;
        let policies = (0..2 * cfg.policy_pairs)
            .map(|_| random_label_policy(&mut rng, &f, 2, cfg.policy_floor))
            .collect::<Result<_>>()?;
        cases.push(Case { recipe, policies, lambda: rng.random() });
    }
    let results: Vec<(Tally, Vec<Cell>)> = cases
        .par_iter()
        .enumerate()
        .map(|(i, case)| -> Result<_> {
            let mut t = Tally::default();
            let (mdp, f) = build_ideal_mdp(&case.recipe)?;
            let family = enumerate_family(mdp.n_states(), 2)?;
            let verdicts: Vec<Vec<bool>> = case
                .policies
                .iter()
                .map(|pol| {
                    family.iter().map(|g| ci_check_under_policy(&mdp, pol, g, CI_TOL).map(|v| v.holds)).collect()
                })
                .collect::<Result<_>>()?;
            let mut disagreements = 0usize;
            for (p, pair) in verdicts.chunks(2).enumerate() {
                for (j, (a, b)) in pair[0].iter().zip(&pair[1]).enumerate() {
                    if !t.check(a == b, || format!("MDP {i}, pair {p}, map {j}: verdicts {a} vs {b}")) {
                        disagreements += 1;
                    }
                }
            }
            for (p, pol) in case.policies.iter().enumerate() {
                let v = ci_check_under_policy(&mdp, pol, &f, CI_TOL)?;
                t.check(v.holds, || format!("MDP {i}, policy {p}: true map fails CI ({:e})", v.max_violation));
            }
            // the maximizer of exact I_1 is CI under every tested policy
            let ci_under_all: Vec<bool> = (0..family.len()).map(|j| verdicts.iter().all(|v| v[j])).collect();
            for (p, pol) in case.policies.iter().enumerate().take(4) {
                let scores: Vec<f64> =
                    family.iter().map(|g| exact_i1_under_policy(&mdp, pol, g)).collect::<Result<_>>()?;
                let best = (0..scores.len()).fold(0, |b, j| if scores[j] > scores[b] { j } else { b });
                t.check(ci_under_all[best], || format!("MDP {i}, policy {p}: argmax {best} not CI under all policies"));
            }
            // induced chains are linear in the policy
            let (p1, p2) = (&case.policies[0], &case.policies[1]);
            let mixed = induced_chain(&mdp, &p1.mix(p2, case.lambda)?)?;
            let (c1, c2) = (induced_chain(&mdp, p1)?, induced_chain(&mdp, p2)?);
            let lin = mixed
                .transition()
                .iter()
                .zip(c1.transition().iter().zip(c2.transition()))
                .map(|(m, (a, b))| (m - (case.lambda * a + (1.0 - case.lambda) * b)).abs())
                .fold(0.0, f64::max);
            t.check(lin <= 1e-14, || format!("MDP {i}: policy mixture off by {lin:e}"));
            let ci_count = ci_under_all.iter().filter(|&&c| c).count();
            Ok((t, vec![i.into(), mdp.n_states().into(), ci_count.into(), disagreements.into(), lin.into()]))
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(&["mdp", "n_states", "ci_maps", "disagreements", "mixture_error"]);
    let mut tally = Tally::default();
    let mut disagreements = 0i64;
    for (t, row) in results {
        if let Cell::Int(d) = row[3] {
            disagreements += d;
        }
        tally.absorb(t);
        table.push(row);
    }
    let detail =
        format!("{} MDPs x {} policy pairs, {disagreements} verdict disagreements", cfg.policy_mdps, cfg.policy_pairs);
    Ok(tally.finish("policy-invariance", seed, detail, table))
}

/// Two actions with different label dynamics, preimages of sizes 3 and 2.
pub fn active_recipe() -> IdealMdpRecipe {
    IdealMdpRecipe {
        label_transitions: vec![vec![vec![0.9, 0.1], vec![0.1, 0.9]], vec![vec![0.8, 0.2], vec![0.3, 0.7]]],
        preimage_sizes: vec![3, 2],
        emission_weights: vec![vec![0.5, 0.3, 0.2], vec![0.6, 0.4]],
    }
}

fn active(cfg: &VerifyConfig, seed: u64) -> Result<SuiteReport> {
    let (mdp, f) = build_ideal_mdp(&active_recipe())?;
    let mut tally = Tally::default();
    tally.check(check_weakly_connected(&mdp).connected, || "MDP is not weakly connected".into());
    let family = enumerate_family(mdp.n_states(), 2)?;
    let seeds = derive_seeds(seed, stream::ACTIVE, cfg.active_seeds);
    let mut policy_rng = rng_stream(seed, stream::ACTIVE + 1000);
    let policies: Vec<StationaryPolicy> = seeds
        .iter()
        .map(|_| random_label_policy(&mut policy_rng, &f, mdp.n_actions(), cfg.policy_floor))
        .collect::<Result<_>>()?;
    let results: Vec<(usize, f64, bool, f64)> = seeds
        .par_iter()
        .zip(&policies)
        .map(|(&s, pol)| -> Result<_> {
            let r = select_active(&mdp, &family, cfg.active_n, s, DEFAULT_TAU)?;
            let v = ci_check_under_policy(&mdp, pol, &family[r.best_index], CI_TOL)?;
            Ok((r.best_index, r.best_score(), v.holds, v.max_violation))
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(&["seed", "best_index", "best_score", "ci_under_verification_policy", "max_violation"]);
    let mut hits = 0;
    for (s, (best, score, ok, viol)) in seeds.iter().zip(&results) {
        hits += *ok as usize;
        table.push(vec![Cell::Text(s.to_string()), (*best).into(), (*score).into(), (*ok).into(), (*viol).into()]);
    }
    tally.check(hits >= cfg.active_required, || {
        format!("{hits}/{} seeds CI under the verification policy, need {}", seeds.len(), cfg.active_required)
    });
    let detail = format!("{hits}/{} seeds CI-satisfying under held-out policies at n = {}", seeds.len(), cfg.active_n);
    Ok(tally.finish("active", seed, detail, table))
}

/// Grid for the six-axis monotonicity scan.
pub fn default_bound_grid() -> BoundGrid {
    BoundGrid {
        d: vec![1, 2, 3],
        epsilon: vec![0.05, 0.1, 0.5, 1.0, 5.0],
        n: (2..=9).map(|p| 10u64.pow(2 * p + 1)).filter(|&n| n <= 10u64.pow(19)).collect(),
        gamma: vec![0.5, 0.9, 0.99],
        k: vec![1, 2, 3],
        alphabet_size: vec![2, 3, 4],
    }
}

fn bounds(cfg: &VerifyConfig, seed: u64) -> Result<SuiteReport> {
    let mut tally = Tally::default();
    let mut table = Table::new(&["check", "value", "reference"]);

    let delta = delta_bound(1.0, 0.1, 10_000, 0.9)?;
    let reference = 7.0601e4 + 0.2656;
    tally.check((delta.value - reference).abs() / reference <= 1e-3, || format!("delta {} vs {reference}", delta.value));
    table.push(vec!["delta(1,0.1,1e4,0.9)".into(), delta.value.into(), reference.into()]);

    let iid = q_bound(&BetaSchedule::zero(1), 2, 0.3, 1_000, 1)?;
    let reference = 8.0 * (-1_000.0 * 0.09 / 8.0f64).exp();
    tally.check((iid.value - reference).abs() / reference <= 1e-12, || format!("iid q bound {}", iid.value));
    table.push(vec!["q_iid(d=2,eps=0.3,n=1e3)".into(), iid.value.into(), reference.into()]);

    let z = continuity_bound(1, 2, 0.1)?.value;
    table.push(vec!["continuity(1,2,0.1)".into(), z.into(), 2.006988.into()]);
    tally.check((z - 2.006988).abs() < 2e-6, || format!("continuity value {z}"));

    let grid = default_bound_grid();
    let scan = monotonicity_scan(&grid)?;
    for v in &scan.violations {
        tally.check(false, || v.clone());
    }
    tally.check(scan.comparisons > 0, || "monotonicity scan made no comparisons".into());
    table.push(vec!["scan_comparisons".into(), scan.comparisons.into(), Cell::Text(String::new())]);
    table.push(vec!["scan_skipped_before_crossover".into(), scan.skipped_before_crossover.into(), Cell::Text(String::new())]);

    // required sample size: self-check at a cap large enough for the answer
    let plan = BoundParams { d: 1, epsilon: 0.5, n: 0, gamma: 0.5, k: 1, alphabet_size: 2 };
    let at_default_cap = required_n(&plan, 0.5, REQUIRED_N_CAP);
    tally.check(matches!(&at_default_cap, Err(e) if e.is_guard()), || format!("default cap: {at_default_cap:?}"));
    let big = required_n(&plan, 0.5, u64::MAX / 2)?;
    let at = estimation_bound(&plan.with_n(big.n))?.value;
    let before = estimation_bound(&plan.with_n(big.n - 1))?.value;
    tally.check(at <= 0.5 && (big.n == big.tail_start || before > 0.5), || {
        format!("required n {} gives {at}, n-1 gives {before}", big.n)
    });
    table.push(vec!["required_n(delta=0.5)".into(), (big.n as f64).into(), Cell::Text(String::new())]);
    let looser = required_n(&BoundParams { epsilon: 1.0, ..plan }, 0.5, u64::MAX / 2)?;
    tally.check(looser.n <= big.n, || format!("looser epsilon needs {} > {}", looser.n, big.n));
    let mut prev = 0;
    for gamma in [0.5, 0.9, 0.99, 0.999] {
        let r = required_n(&BoundParams { gamma, ..plan }, 0.5, u64::MAX / 2)?;
        tally.check(r.n >= prev, || format!("required n decreased to {} at gamma {gamma}", r.n));
        prev = r.n;
    }

    // Monte Carlo frequency of sup-deviation events never exceeds the bound
    let spec = symmetric_chain(0.1);
    let family = enumerate_family(2, 2)?;
    let gamma = crate::processes::second_largest_eigenvalue_modulus(&spec);
    let params = BoundParams { d: 2, epsilon: 24.0, n: cfg.bound_mc_n, gamma, k: 1, alphabet_size: 2 };
    let bound = estimation_bound(&params)?;
    let exact: Vec<f64> = family.iter().map(|g| exact_ik(&spec, g, 1)).collect::<Result<_>>()?;
    let mut events = 0usize;
    for s in derive_seeds(seed, stream::BOUNDS, cfg.bound_mc_reps) {
        let series = sample_chain(&spec, cfg.bound_mc_n as usize, s, 0)?;
        let mut sup = 0.0f64;
        for (g, e) in family.iter().zip(&exact) {
            sup = sup.max((ik_hat(g, &series, 1)?.value - e).abs());
        }
        events += (sup > params.epsilon) as usize;
    }
    let reps = cfg.bound_mc_reps.max(1) as f64;
    let freq = events as f64 / reps;
    let se = (freq * (1.0 - freq) / reps).sqrt();
    tally.check(!bound.is_vacuous(), || format!("Monte Carlo configuration has a vacuous bound {}", bound.value));
    tally.check(freq <= bound.value + 3.0 * se, || format!("deviation frequency {freq} above bound {}", bound.value));
    table.push(vec!["mc_bound(eps=24,n)".into(), bound.value.into(), Cell::Text(String::new())]);
    table.push(vec!["mc_event_frequency".into(), freq.into(), Cell::Text(String::new())]);

    let detail = format!(
        "delta = {}; {} monotonicity comparisons, {} violations",
        crate::format::sig6(delta.value),
        scan.comparisons,
        scan.violations.len()
    );
    Ok(tally.finish("bounds", seed, detail, table))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> VerifyConfig {
        VerifyConfig {
            ideal_recipes: 20,
            ci_equality_chains: 5,
            oracle_random_chains: 20,
            estimator_seeds: 3,
            estimator_lengths: vec![10_000],
            estimator_tolerances: vec![0.05],
            estimator_required: 2,
            continuity_tuples: 9,
            recovery_seeds: 3,
            recovery_n: 20_000,
            recovery_required: 2,
            recovery_growth_lengths: vec![1_000, 20_000],
            policy_mdps: 3,
            policy_pairs: 2,
            active_seeds: 3,
            active_n: 20_000,
            active_required: 2,
            bound_mc_reps: 1,
            ..VerifyConfig::default()
        }
    }

    #[test]
    fn small_suites_pass_and_repeat() {
        let cfg = small();
        for &name in SUITES {
            let a = run_suite(name, &cfg, 7).unwrap();
            assert!(a.passed, "{name}: {:?}", a.failures);
            assert!(a.checks > 0);
            let b = run_suite(name, &cfg, 7).unwrap();
            assert_eq!(a.table.to_csv(), b.table.to_csv());
        }
    }

    #[test]
    fn unknown_suite_and_bad_config() {
        assert!(run_suite("nope", &small(), 0).is_err());
        let cfg = VerifyConfig { estimator_required: 11, ..VerifyConfig::default() };
        assert!(cfg.validate().is_err());
        let parsed: VerifyConfig = serde_json::from_str(r#"{"ideal_recipes": 3}"#).unwrap();
        assert_eq!(parsed.ideal_recipes, 3);
        assert_eq!(parsed.ci_equality_chains, 100);
        assert!(serde_json::from_str::<VerifyConfig>(r#"{"typo": 1}"#).is_err());
    }
}
