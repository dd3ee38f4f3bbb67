use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MarkovChainSpec;
use crate::blocks::entropy_of_weights;
use crate::error::{Error, Result};
use crate::representation::RepresentationFunction;

/// Outcome of a conditional-independence check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiVerdict {
    pub holds: bool,
    /// Largest `|P(X_0 = x | f(X_0), context) - P(X_0 = x | f(X_0))|` seen.
    pub max_violation: f64,
}

fn labels_of(spec: &MarkovChainSpec, f: &RepresentationFunction) -> Result<Vec<usize>> {
    let table = f
        .table()
        .ok_or_else(|| Error::DomainMismatch("conditional independence checks need a lookup table".into()))?;
    if table.len() != spec.n_states() {
        return Err(Error::DomainMismatch(format!(
            "lookup table covers {} states, chain has {}",
            table.len(),
            spec.n_states()
        )));
    }
    Ok(table.iter().map(|s| s.index()).collect())
}

/// Checks `P(X_0 | f(X_0), X_{-w..-1}, X_{1..w}) = P(X_0 | f(X_0))` over every
/// context of positive stationary probability. For a Markov chain `window = 1`
/// already covers every finite index set. Zero-probability conditioning events
/// are skipped.
pub fn ci_check_markov(spec: &MarkovChainSpec, f: &RepresentationFunction, tol: f64, window: usize) -> Result<CiVerdict> {
    if window == 0 {
        return Err(Error::OutOfRange("window must be at least 1".into()));
    }
    let labels = labels_of(spec, f)?;
    let n = spec.n_states();
    let contexts = (n as f64).powi(2 * window as i32);
    if contexts * n as f64 > super::exact::ENUMERATION_LIMIT {
        return Err(Error::EnumerationGuard {
            what: "conditioning contexts",
            size: contexts * n as f64,
            limit: super::exact::ENUMERATION_LIMIT,
        });
    }
    let pi = spec.stationary()?;
    let alphabet = f.alphabet_size();
    let mut class_mass = vec![0.0; alphabet];
    for (x, &y) in labels.iter().enumerate() {
        class_mass[y] += pi[x];
    }

    let ctx_len = n.pow(window as u32);
    let decode = |mut code: usize| {
        let mut v = vec![0usize; window];
        for slot in v.iter_mut().rev() {
            *slot = code % n;
            code /= n;
        }
        v
    };
    // weight of each left context ending anywhere, and of each right path after its first state
    let left_weight: Vec<(usize, f64)> = (0..ctx_len)
        .map(|c| {
            let path = decode(c);
            let w = path.windows(2).fold(pi[path[0]], |acc, e| acc * spec.p(e[0], e[1]));
            (path[window - 1], w)
        })
        .collect();
    let right_weight: Vec<(usize, f64)> = (0..ctx_len)
        .map(|c| {
            let path = decode(c);
            let w = path.windows(2).fold(1.0, |acc, e| acc * spec.p(e[0], e[1]));
            (path[0], w)
        })
        .collect();

    let mut max_violation = 0.0f64;
    let mut weights = vec![0.0; n];
    let mut totals = vec![0.0; alphabet];
    for &(last, wl) in left_weight.iter().filter(|(_, w)| *w > 0.0) {
        for &(first, wr) in right_weight.iter().filter(|(_, w)| *w > 0.0) {
            totals.iter_mut().for_each(|t| *t = 0.0);
            for x in 0..n {
                weights[x] = wl * spec.p(last, x) * spec.p(x, first) * wr;
                totals[labels[x]] += weights[x];
            }
            for x in 0..n {
                let y = labels[x];
                if totals[y] <= 0.0 || class_mass[y] <= 0.0 {
                    continue;
                }
                let conditional = weights[x] / totals[y];
                let marginal = pi[x] / class_mass[y];
                max_violation = max_violation.max((conditional - marginal).abs());
            }
        }
    }
    Ok(CiVerdict { holds: max_violation <= tol, max_violation })
}

/// Both sides of the chain-rule identity
/// `h(f(X_0) | f(X_-1), g(X_-1), f(X_1), g(X_1)) = h(f(X_0) | f(X_-1), f(X_1))`,
/// computed from the exact law of `(X_-1, X_0, X_1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainRuleReport {
    pub with_g: f64,
    pub without_g: f64,
    pub holds: bool,
}

pub fn chain_rule_identity_check(
    spec: &MarkovChainSpec,
    f: &RepresentationFunction,
    g: &RepresentationFunction,
) -> Result<ChainRuleReport> {
    let fl = labels_of(spec, f)?;
    let gl = labels_of(spec, g)?;
    let pi = spec.stationary()?;
    let n = spec.n_states();

    // (f0, f-1, g-1, f1, g1) and marginals
    let mut full: BTreeMap<[usize; 5], f64> = BTreeMap::new();
    for a in 0..n {
        for b in 0..n {
            let wab = pi[a] * spec.p(a, b);
            if wab == 0.0 {
                continue;
            }
            for c in 0..n {
                let w = wab * spec.p(b, c);
                if w > 0.0 {
                    *full.entry([fl[b], fl[a], gl[a], fl[c], gl[c]]).or_default() += w;
                }
            }
        }
    }
    let project = |keep: &[usize]| {
        let mut m: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for (key, &w) in &full {
            *m.entry(keep.iter().map(|&i| key[i]).collect()).or_default() += w;
        }
        entropy_of_weights(m.into_values().collect())
    };
    let with_g = (project(&[0, 1, 2, 3, 4]) - project(&[1, 2, 3, 4])).max(0.0);
    let without_g = (project(&[0, 1, 3]) - project(&[1, 3])).max(0.0);
    Ok(ChainRuleReport { with_g, without_g, holds: (with_g - without_g).abs() <= 1e-9 })
}
