//! Block distributions over `Y^(k+1)`.
//!
//! A block `(y_0, .., y_k)` is stored under its base-`|Y|` code with `y_0` as
//! the most significant digit, so dropping the last coordinate is a division
//! by `|Y|` and keeps codes sorted.

use crate::error::{Error, Result};
use crate::series::Symbol;

/// Codes up to this many cells are counted in a dense array.
const DENSE_LIMIT: u64 = 1 << 20;

pub(crate) fn block_space(alphabet_size: usize, block_len: usize) -> Result<u64> {
    let mut size: u64 = 1;
    for _ in 0..block_len {
        size = size.checked_mul(alphabet_size as u64).ok_or(Error::EnumerationGuard {
            what: "block alphabet",
            size: (alphabet_size as f64).powi(block_len as i32),
            limit: u64::MAX as f64,
        })?;
    }
    Ok(size)
}

/// Entropy in bits of nonnegative weights summing to one. Weights are summed in
/// sorted order so that the result does not depend on how symbols are labelled.
pub(crate) fn entropy_of_weights(mut weights: Vec<f64>) -> f64 {
    weights.retain(|&p| p > 0.0);
    weights.sort_by(|a, b| a.total_cmp(b));
    let h: f64 = weights.iter().map(|&p| -p * p.log2()).sum();
    h.max(0.0)
}

/// Overlapping-block counts of a symbol sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalBlockDistribution {
    block_len: usize,
    alphabet_size: usize,
    /// `(code, count)` sorted by code, zero counts omitted.
    counts: Vec<(u64, u64)>,
    n_blocks: u64,
}

impl EmpiricalBlockDistribution {
    /// Block length `k + 1`.
    pub fn block_order(&self) -> usize {
        self.block_len
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn n_blocks(&self) -> u64 {
        self.n_blocks
    }

    pub fn support_size(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, block: &[Symbol]) -> u64 {
        if block.len() != self.block_len || block.iter().any(|s| s.index() >= self.alphabet_size) {
            return 0;
        }
        let code = encode(block, self.alphabet_size);
        self.counts
            .binary_search_by_key(&code, |&(c, _)| c)
            .map(|i| self.counts[i].1)
            .unwrap_or(0)
    }

    /// Nonzero cells as `(block, count)` in lexicographic block order.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<Symbol>, u64)> + '_ {
        self.counts.iter().map(move |&(code, c)| (decode(code, self.alphabet_size, self.block_len), c))
    }

    /// Counts of the first `k` coordinates (block length minus one).
    pub fn prefix_marginal(&self) -> Result<Self> {
        if self.block_len < 2 {
            return Err(Error::OutOfRange("cannot marginalize a length-1 block".into()));
        }
        let a = self.alphabet_size as u64;
        let mut counts: Vec<(u64, u64)> = Vec::with_capacity(self.counts.len());
        for &(code, c) in &self.counts {
            let prefix = code / a;
            match counts.last_mut() {
                Some((last, total)) if *last == prefix => *total += c,
                _ => counts.push((prefix, c)),
            }
        }
        Ok(Self { block_len: self.block_len - 1, alphabet_size: self.alphabet_size, counts, n_blocks: self.n_blocks })
    }

    pub fn to_law(&self) -> BlockLaw {
        let n = self.n_blocks as f64;
        BlockLaw {
            block_len: self.block_len,
            alphabet_size: self.alphabet_size,
            probs: self.counts.iter().map(|&(code, c)| (code, c as f64 / n)).collect(),
        }
    }
}

/// Counts every overlapping block `(y_i, .., y_{i+k})`, `i = 0 .. n-k-1`.
pub fn collect_blocks(symbols: &[Symbol], alphabet_size: usize, k: usize) -> Result<EmpiricalBlockDistribution> {
    if symbols.len() <= k {
        return Err(Error::SeriesTooShort { len: symbols.len(), k });
    }
    if alphabet_size == 0 {
        return Err(Error::InvalidSpec("alphabet size must be positive".into()));
    }
    if let Some(s) = symbols.iter().find(|s| s.index() >= alphabet_size) {
        return Err(Error::DomainMismatch(format!("symbol {} outside alphabet of size {alphabet_size}", s.0)));
    }
    let block_len = k + 1;
    let space = block_space(alphabet_size, block_len)?;
    let a = alphabet_size as u64;
    let n_blocks = symbols.len() - k;

    let mut codes = Vec::with_capacity(n_blocks);
    let mut code: u64 = 0;
    for (i, s) in symbols.iter().enumerate() {
        // keep the last k+1 digits: drop the most significant one
        code = (code % (space / a)) * a + s.0 as u64;
        if i >= k {
            codes.push(code);
        }
    }

    let counts = if space <= DENSE_LIMIT && space <= 8 * n_blocks as u64 {
        let mut dense = vec![0u64; space as usize];
        for &c in &codes {
            dense[c as usize] += 1;
        }
        dense.into_iter().enumerate().filter(|&(_, c)| c > 0).map(|(i, c)| (i as u64, c)).collect()
    } else {
        codes.sort_unstable();
        let mut counts: Vec<(u64, u64)> = Vec::new();
        for c in codes {
            match counts.last_mut() {
                Some((last, total)) if *last == c => *total += 1,
                _ => counts.push((c, 1)),
            }
        }
        counts
    };
    Ok(EmpiricalBlockDistribution { block_len, alphabet_size, counts, n_blocks: n_blocks as u64 })
}

pub(crate) fn encode(block: &[Symbol], alphabet_size: usize) -> u64 {
    block.iter().fold(0u64, |acc, s| acc * alphabet_size as u64 + s.0 as u64)
}

pub(crate) fn decode(mut code: u64, alphabet_size: usize, block_len: usize) -> Vec<Symbol> {
    let a = alphabet_size as u64;
    let mut out = vec![Symbol(0); block_len];
    for slot in out.iter_mut().rev() {
        *slot = Symbol((code % a) as u32);
        code /= a;
    }
    out
}

/// A probability law over `Y^(block_len)`, exact or empirical.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLaw {
    block_len: usize,
    alphabet_size: usize,
    /// `(code, probability)` sorted by code, zeros omitted.
    probs: Vec<(u64, f64)>,
}

impl BlockLaw {
    /// Builds a law from a dense probability vector indexed by block code.
    pub fn from_dense(alphabet_size: usize, block_len: usize, dense: &[f64]) -> Result<Self> {
        let space = block_space(alphabet_size, block_len)?;
        if dense.len() as u64 != space {
            return Err(Error::InvalidDistribution(format!(
                "dense law has {} cells, expected {space}",
                dense.len()
            )));
        }
        if dense.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::InvalidDistribution("negative or non-finite probability".into()));
        }
        let total: f64 = dense.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        Ok(Self {
            block_len,
            alphabet_size,
            probs: dense.iter().enumerate().filter(|&(_, &p)| p > 0.0).map(|(i, &p)| (i as u64, p)).collect(),
        })
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn prob(&self, block: &[Symbol]) -> f64 {
        if block.len() != self.block_len || block.iter().any(|s| s.index() >= self.alphabet_size) {
            return 0.0;
        }
        let code = encode(block, self.alphabet_size);
        self.probs.binary_search_by_key(&code, |&(c, _)| c).map(|i| self.probs[i].1).unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Vec<Symbol>, f64)> + '_ {
        self.probs.iter().map(move |&(code, p)| (decode(code, self.alphabet_size, self.block_len), p))
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().map(|&(_, p)| p).sum()
    }

    /// Joint entropy of the whole block, in bits.
    pub fn entropy(&self) -> f64 {
        entropy_of_weights(self.probs.iter().map(|&(_, p)| p).collect())
    }

    /// Law of the first `len` coordinates.
    pub fn prefix(&self, len: usize) -> BlockLaw {
        assert!(len <= self.block_len);
        let div = (self.alphabet_size as u64).pow((self.block_len - len) as u32);
        let mut probs: Vec<(u64, f64)> = Vec::new();
        for &(code, p) in &self.probs {
            let c = code / div;
            match probs.last_mut() {
                Some((last, total)) if *last == c => *total += p,
                _ => probs.push((c, p)),
            }
        }
        BlockLaw { block_len: len, alphabet_size: self.alphabet_size, probs }
    }

    /// Law of the last `len` coordinates.
    pub fn suffix(&self, len: usize) -> BlockLaw {
        assert!(len <= self.block_len);
        let modulus = (self.alphabet_size as u64).pow(len as u32);
        let mut probs: Vec<(u64, f64)> = self.probs.iter().map(|&(code, p)| (code % modulus, p)).collect();
        probs.sort_by_key(|&(c, _)| c);
        let mut merged: Vec<(u64, f64)> = Vec::with_capacity(probs.len());
        for (c, p) in probs {
            match merged.last_mut() {
                Some((last, total)) if *last == c => *total += p,
                _ => merged.push((c, p)),
            }
        }
        BlockLaw { block_len: len, alphabet_size: self.alphabet_size, probs: merged }
    }

    /// `H(last) + H(first k) - H(joint)`: information the last coordinate
    /// shares with the preceding ones. Clamped at zero against rounding.
    pub fn information_last_vs_prefix(&self) -> f64 {
        let k = self.block_len - 1;
        if k == 0 {
            return 0.0;
        }
        (self.suffix(1).entropy() + self.prefix(k).entropy() - self.entropy()).max(0.0)
    }

    /// `H(first) + H(last k) - H(joint)`.
    pub fn information_first_vs_suffix(&self) -> f64 {
        let k = self.block_len - 1;
        if k == 0 {
            return 0.0;
        }
        (self.prefix(1).entropy() + self.suffix(k).entropy() - self.entropy()).max(0.0)
    }

    /// `H(joint) - H(first k)`: conditional entropy of the last coordinate.
    pub fn conditional_entropy_last(&self) -> f64 {
        let k = self.block_len - 1;
        if k == 0 {
            return self.entropy();
        }
        (self.entropy() - self.prefix(k).entropy()).max(0.0)
    }

    /// `sum |p - q|` over the union of supports (range `[0, 2]`).
    pub fn l1_distance(&self, other: &BlockLaw) -> Result<f64> {
        if self.block_len != other.block_len || self.alphabet_size != other.alphabet_size {
            return Err(Error::DomainMismatch("block laws over different spaces".into()));
        }
        let (mut i, mut j) = (0, 0);
        let mut total = 0.0;
        let (a, b) = (&self.probs, &other.probs);
        while i < a.len() || j < b.len() {
            match (a.get(i), b.get(j)) {
                (Some(&(ca, pa)), Some(&(cb, pb))) if ca == cb => {
                    total += (pa - pb).abs();
                    i += 1;
                    j += 1;
                }
                (Some(&(ca, pa)), Some(&(cb, _))) if ca < cb => {
                    total += pa;
                    i += 1;
                }
                (Some(_), Some(&(_, pb))) => {
                    total += pb;
                    j += 1;
                }
                (Some(&(_, pa)), None) => {
                    total += pa;
                    i += 1;
                }
                (None, Some(&(_, pb))) => {
                    total += pb;
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        Ok(total)
    }
}
