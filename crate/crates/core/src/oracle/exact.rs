use serde::{Deserialize, Serialize};

use super::MarkovChainSpec;
use crate::blocks::{block_space, entropy_of_weights, BlockLaw};
use crate::error::{Error, Result};
use crate::representation::RepresentationFunction;

/// Limit on `|X|^(k+1)` for exact enumeration.
pub const ENUMERATION_LIMIT: f64 = 1e8;

fn lumping(spec: &MarkovChainSpec, f: &RepresentationFunction) -> Result<Vec<usize>> {
    let table = f
        .table()
        .ok_or_else(|| Error::DomainMismatch("exact computations need a lookup-table representation".into()))?;
    if table.len() != spec.n_states() {
        return Err(Error::DomainMismatch(format!(
            "lookup table covers {} states, chain has {}",
            table.len(),
            spec.n_states()
        )));
    }
    Ok(table.iter().map(|s| s.index()).collect())
}

fn guard(n_states: usize, alphabet: usize, block_len: usize, extra_states: usize) -> Result<()> {
    let paths = (n_states as f64).powi(block_len as i32);
    if paths > ENUMERATION_LIMIT {
        return Err(Error::EnumerationGuard { what: "state paths |X|^(k+1)", size: paths, limit: ENUMERATION_LIMIT });
    }
    let cells = (alphabet as f64).powi(block_len as i32) * (n_states * extra_states) as f64;
    if cells > ENUMERATION_LIMIT {
        return Err(Error::EnumerationGuard { what: "block-state table", size: cells, limit: ENUMERATION_LIMIT });
    }
    Ok(())
}

/// Forward pass over `(x_0?, y_0..y_j, x_j)`. With `keep_start` the table is
/// additionally indexed by the starting state. Returns the final table with
/// layout `[start][code][state]`.
fn forward_table(
    pi: &[f64],
    transition: impl Fn(usize, usize) -> f64,
    labels: &[usize],
    alphabet: usize,
    k: usize,
    keep_start: bool,
) -> Vec<f64> {
    let n = labels.len();
    let starts = if keep_start { n } else { 1 };
    let mut codes = alphabet;
    let mut table = vec![0.0; starts * codes * n];
    for x in 0..n {
        let s = if keep_start { x } else { 0 };
        table[(s * codes + labels[x]) * n + x] = pi[x];
    }
    for _ in 0..k {
        let next_codes = codes * alphabet;
        let mut next = vec![0.0; starts * next_codes * n];
        for s in 0..starts {
            for code in 0..codes {
                let base = (s * codes + code) * n;
                for x in 0..n {
                    let w = table[base + x];
                    if w == 0.0 {
                        continue;
                    }
                    for x2 in 0..n {
                        let p = transition(x, x2);
                        if p > 0.0 {
                            next[(s * next_codes + code * alphabet + labels[x2]) * n + x2] += w * p;
                        }
                    }
                }
            }
        }
        table = next;
        codes = next_codes;
    }
    table
}

fn block_law_from(
    pi: &[f64],
    transition: impl Fn(usize, usize) -> f64,
    labels: &[usize],
    alphabet: usize,
    k: usize,
) -> Result<BlockLaw> {
    let n = labels.len();
    let table = forward_table(pi, transition, labels, alphabet, k, false);
    let dense: Vec<f64> = table.chunks(n).map(|c| c.iter().sum()).collect();
    BlockLaw::from_dense(alphabet, k + 1, &dense)
}

/// Exact stationary law of `(f(X_0), .., f(X_k))`.
pub fn exact_block_distribution(spec: &MarkovChainSpec, f: &RepresentationFunction, k: usize) -> Result<BlockLaw> {
    let labels = lumping(spec, f)?;
    guard(spec.n_states(), f.alphabet_size(), k + 1, 1)?;
    block_space(f.alphabet_size(), k + 1)?;
    let pi = spec.stationary()?;
    block_law_from(pi, |a, b| spec.p(a, b), &labels, f.alphabet_size(), k)
}

/// Exact `I_k(f) = I(f(X_k); f(X_0), .., f(X_{k-1}))` in bits.
pub fn exact_ik(spec: &MarkovChainSpec, f: &RepresentationFunction, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::OutOfRange("block memory k must be at least 1".into()));
    }
    Ok(exact_block_distribution(spec, f, k)?.information_last_vs_prefix())
}

/// Exact `h_k(f) = h(f(X_k) | f(X_0), .., f(X_{k-1}))`; `k = 0` gives `h_0`.
pub fn exact_hk(spec: &MarkovChainSpec, f: &RepresentationFunction, k: usize) -> Result<f64> {
    Ok(exact_block_distribution(spec, f, k)?.conditional_entropy_last())
}

/// `I(f(X_0); f(X_{-1}), .., f(X_{-k}))` computed on the time-reversed chain.
pub fn exact_past_information(spec: &MarkovChainSpec, f: &RepresentationFunction, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::OutOfRange("block memory k must be at least 1".into()));
    }
    let labels = lumping(spec, f)?;
    guard(spec.n_states(), f.alphabet_size(), k + 1, 1)?;
    let pi = spec.stationary()?;
    // R(x, x') = pi(x') P(x', x) / pi(x); rows of zero-mass states never matter
    let reversed = |x: usize, x2: usize| {
        if pi[x] > 0.0 {
            pi[x2] * spec.p(x2, x) / pi[x]
        } else {
            spec.p(x, x2)
        }
    };
    let law = block_law_from(pi, reversed, &labels, f.alphabet_size(), k)?;
    // reversed block (Z_0, .., Z_k) is (Y_0, Y_{-1}, .., Y_{-k})
    Ok(law.information_first_vs_suffix())
}

/// Transition matrix of the lumped process `P(f(X_1) = b | f(X_0) = a)`,
/// row-major `|Y| x |Y|`. Labels with zero stationary mass get a zero row.
pub fn exact_label_transition(spec: &MarkovChainSpec, f: &RepresentationFunction) -> Result<Vec<f64>> {
    let law = exact_block_distribution(spec, f, 1)?;
    let a = f.alphabet_size();
    let mut out = vec![0.0; a * a];
    for (block, p) in law.iter() {
        out[block[0].index() * a + block[1].index()] += p;
    }
    for row in out.chunks_mut(a) {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|x| *x /= s);
        }
    }
    Ok(out)
}

/// Exact brackets `h(Y_k | Y_0..Y_{k-1}, X_0) <= h_inf(f) <= h(Y_k | Y_0..Y_{k-1})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyRateSandwich {
    pub k: usize,
    pub lower: f64,
    pub upper: f64,
}

impl EntropyRateSandwich {
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }
}

pub fn entropy_rate_sandwich(
    spec: &MarkovChainSpec,
    f: &RepresentationFunction,
    k: usize,
) -> Result<EntropyRateSandwich> {
    if k == 0 {
        return Err(Error::OutOfRange("block memory k must be at least 1".into()));
    }
    let labels = lumping(spec, f)?;
    let n = spec.n_states();
    let alphabet = f.alphabet_size();
    guard(n, alphabet, k + 1, n)?;
    let pi = spec.stationary()?;
    let table = forward_table(pi, |a, b| spec.p(a, b), &labels, alphabet, k, true);

    // table layout [x0][code over Y^(k+1)][x_k]
    let codes = alphabet.pow((k + 1) as u32);
    let with_start: Vec<f64> = table.chunks(n).map(|c| c.iter().sum()).collect();
    let h_full = entropy_of_weights(with_start.clone());
    let h_prefix = entropy_of_weights(
        with_start.chunks(alphabet).map(|c| c.iter().sum()).collect(),
    );
    let lower = (h_full - h_prefix).max(0.0);

    let mut joint = vec![0.0; codes];
    for (i, w) in with_start.iter().enumerate() {
        joint[i % codes] += w;
    }
    let upper = BlockLaw::from_dense(alphabet, k + 1, &joint)?.conditional_entropy_last();
    Ok(EntropyRateSandwich { k, lower: lower.min(upper), upper })
}

/// Smallest `k <= max_k` with `I_k(f) > I_k(g) + 1e-9`, if any.
pub fn strictness_onset(
    spec: &MarkovChainSpec,
    f: &RepresentationFunction,
    g: &RepresentationFunction,
    max_k: usize,
) -> Result<Option<usize>> {
    for k in 1..=max_k {
        if exact_ik(spec, f, k)? > exact_ik(spec, g, k)? + 1e-9 {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

/// `max_g (upper - lower)` of the sandwich at memory `k` over a family: an
/// upper bound on `sup_g |h_inf(g) - h_k(g)|`.
pub fn family_sandwich_gap(spec: &MarkovChainSpec, family: &[RepresentationFunction], k: usize) -> Result<f64> {
    family.iter().try_fold(0.0f64, |acc, g| Ok(acc.max(entropy_rate_sandwich(spec, g, k)?.gap())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Symbol;

    fn chain(rows: &[Vec<f64>]) -> MarkovChainSpec {
        MarkovChainSpec::from_rows(rows).unwrap()
    }

    fn h2(p: f64) -> f64 {
        -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
    }

    #[test]
    fn symmetric_chain_pair_law() {
        let spec = chain(&[vec![0.9, 0.1], vec![0.1, 0.9]]);
        let law = exact_block_distribution(&spec, &RepresentationFunction::identity(2), 1).unwrap();
        let expect = [([0, 0], 0.45), ([0, 1], 0.05), ([1, 0], 0.05), ([1, 1], 0.45)];
        for (b, p) in expect {
            assert!((law.prob(&[Symbol(b[0]), Symbol(b[1])]) - p).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_information_of_symmetric_chain() {
        let spec = chain(&[vec![0.9, 0.1], vec![0.1, 0.9]]);
        let v = exact_ik(&spec, &RepresentationFunction::identity(2), 1).unwrap();
        assert!((v - (1.0 - h2(0.1))).abs() < 1e-14);
        assert!((v - 0.531004).abs() < 5e-7);
        assert_eq!(exact_ik(&spec, &RepresentationFunction::constant(2), 1).unwrap(), 0.0);
    }

    #[test]
    fn constant_map_is_point_mass() {
        let spec = chain(&[vec![0.2, 0.8, 0.0], vec![0.3, 0.3, 0.4], vec![0.5, 0.0, 0.5]]);
        let law = exact_block_distribution(&spec, &RepresentationFunction::constant(3), 3).unwrap();
        assert!((law.prob(&[Symbol(0); 4]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_memory_is_pushforward() {
        let spec = chain(&[vec![0.2, 0.8, 0.0], vec![0.3, 0.3, 0.4], vec![0.5, 0.0, 0.5]]);
        let f = RepresentationFunction::from_indices(&[1, 0, 1], 2).unwrap();
        let law = exact_block_distribution(&spec, &f, 0).unwrap();
        let pi = spec.stationary().unwrap();
        assert!((law.prob(&[Symbol(1)]) - (pi[0] + pi[2])).abs() < 1e-14);
    }

    #[test]
    fn iid_chain_has_no_information() {
        let row = vec![0.2, 0.5, 0.3];
        let spec = chain(&[row.clone(), row.clone(), row]);
        for table in [[0, 1, 2], [0, 0, 1], [1, 0, 1]] {
            let alphabet = *table.iter().max().unwrap() as usize + 1;
            let f = RepresentationFunction::from_indices(&table, alphabet).unwrap();
            for k in 1..4 {
                assert!(exact_ik(&spec, &f, k).unwrap() < 1e-14);
            }
        }
    }

    #[test]
    fn identity_sandwich_closes_at_one() {
        let spec = chain(&[vec![0.2, 0.8, 0.0], vec![0.3, 0.3, 0.4], vec![0.5, 0.0, 0.5]]);
        let s = entropy_rate_sandwich(&spec, &RepresentationFunction::identity(3), 1).unwrap();
        assert!(s.gap().abs() < 1e-12, "{s:?}");
    }

    #[test]
    fn guard_trips_on_large_enumeration() {
        let n = 20;
        let spec = MarkovChainSpec::new(n, vec![1.0 / n as f64; n * n]).unwrap();
        let err = exact_block_distribution(&spec, &RepresentationFunction::identity(n), 7).unwrap_err();
        assert!(err.is_guard());
    }

    #[test]
    fn label_transition_of_lumpable_chain() {
        // states {0,1} -> 0, {2} -> 1; rows of 0 and 1 agree on the lumped level
        let spec = chain(&[vec![0.3, 0.3, 0.4], vec![0.5, 0.1, 0.4], vec![0.6, 0.2, 0.2]]);
        let f = RepresentationFunction::from_indices(&[0, 0, 1], 2).unwrap();
        let t = exact_label_transition(&spec, &f).unwrap();
        let expect = [0.6, 0.4, 0.8, 0.2];
        for (a, b) in t.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
