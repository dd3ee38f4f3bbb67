//! Plug-in estimators of marginal entropy, conditional block entropy and
//! k-order time-series information. All values are in bits.

use serde::{Deserialize, Serialize};

use crate::blocks::{collect_blocks, entropy_of_weights, EmpiricalBlockDistribution};
use crate::error::{Error, Result};
use crate::representation::{apply_representation, RepresentationFunction};
use crate::series::{ObservationSeries, Symbol};

/// Tolerance on the total mass accepted by [`entropy`].
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Entropy in bits, `-sum p log2 p` with `0 log 0 = 0`.
pub fn entropy(dist: &[f64]) -> Result<f64> {
    if let Some(p) = dist.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
        return Err(Error::InvalidDistribution(format!("entry {p} is not a nonnegative number")));
    }
    let total: f64 = dist.iter().sum();
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::InvalidDistribution(format!("entries sum to {total}")));
    }
    Ok(entropy_of_weights(dist.to_vec()))
}

/// `h(p) = -p log2 p - (1-p) log2 (1-p)`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange(format!("binary entropy argument {p} outside [0, 1]")));
    }
    Ok(binary_entropy_unchecked(p))
}

pub(crate) fn binary_entropy_unchecked(p: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// Inverse of the binary entropy on `[0, 1/2]`, by bisection.
pub fn binary_entropy_inverse(target: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::OutOfRange(format!("binary entropy inverse argument {target} outside [0, 1]")));
    }
    if target == 0.0 {
        return Ok(0.0);
    }
    if target == 1.0 {
        return Ok(0.5);
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if binary_entropy_unchecked(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Result of a plug-in information estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoEstimate {
    /// Bits.
    pub value: f64,
    pub k_used: usize,
    /// Number of overlapping `(k+1)`-blocks the estimate is built on.
    pub n_effective: u64,
    /// Set when `|Y|^(k+1)` exceeds ten times the number of blocks; the
    /// plug-in bias is then not negligible.
    pub sparse_support: bool,
}

/// Marginal entropy of the empirical law of `symbols`.
pub fn h0_symbols(symbols: &[Symbol], alphabet_size: usize) -> Result<f64> {
    let d = collect_blocks(symbols, alphabet_size, 0)?;
    Ok(d.to_law().entropy())
}

pub fn h0_hat(f: &RepresentationFunction, series: &ObservationSeries) -> Result<f64> {
    let symbols = apply_representation(f, series)?;
    h0_symbols(&symbols, f.alphabet_size())
}

fn check_memory(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::OutOfRange("block memory k must be at least 1".into()));
    }
    Ok(())
}

fn estimate_from(dist: &EmpiricalBlockDistribution, k: usize) -> InfoEstimate {
    let space = (dist.alphabet_size() as f64).powi(dist.block_order() as i32);
    InfoEstimate {
        value: dist.to_law().information_last_vs_prefix(),
        k_used: k,
        n_effective: dist.n_blocks(),
        sparse_support: space > 10.0 * dist.n_blocks() as f64,
    }
}

/// Plug-in `I_k` of a symbol sequence from one joint `(k+1)`-block law.
pub fn ik_symbols(symbols: &[Symbol], alphabet_size: usize, k: usize) -> Result<InfoEstimate> {
    check_memory(k)?;
    let dist = collect_blocks(symbols, alphabet_size, k)?;
    Ok(estimate_from(&dist, k))
}

pub fn ik_hat(f: &RepresentationFunction, series: &ObservationSeries, k: usize) -> Result<InfoEstimate> {
    check_memory(k)?;
    if series.len() <= k {
        return Err(Error::SeriesTooShort { len: series.len(), k });
    }
    let symbols = apply_representation(f, series)?;
    ik_symbols(&symbols, f.alphabet_size(), k)
}

pub fn hk_symbols(symbols: &[Symbol], alphabet_size: usize, k: usize) -> Result<f64> {
    check_memory(k)?;
    let dist = collect_blocks(symbols, alphabet_size, k)?;
    Ok(dist.to_law().conditional_entropy_last())
}

/// `H(joint (k+1)-block) - H(first k coordinates)` of the empirical block law.
pub fn hk_hat(f: &RepresentationFunction, series: &ObservationSeries, k: usize) -> Result<f64> {
    check_memory(k)?;
    if series.len() <= k {
        return Err(Error::SeriesTooShort { len: series.len(), k });
    }
    let symbols = apply_representation(f, series)?;
    hk_symbols(&symbols, f.alphabet_size(), k)
}

/// Memory used by [`iinf_hat`] at sample size `n`:
/// `max(1, min(floor(log2 log2 (n+2)), largest k with |Y|^(k+1) <= n/10))`.
pub fn schedule_k(n: u64, alphabet_size: usize) -> usize {
    let n_f = n as f64;
    let doubly_log = (n_f + 2.0).log2().log2().floor().max(0.0) as usize;
    // largest k with |Y|^(k+1) <= n/10; |Y| = 1 never constrains
    let support_cap = if alphabet_size <= 1 {
        usize::MAX
    } else {
        let mut k: Option<usize> = None;
        let mut cells = alphabet_size as f64;
        let mut next = 0usize;
        while cells * 10.0 <= n_f {
            k = Some(next);
            next += 1;
            cells *= alphabet_size as f64;
        }
        k.unwrap_or(0)
    };
    doubly_log.min(support_cap).max(1)
}

pub fn iinf_symbols(symbols: &[Symbol], alphabet_size: usize) -> Result<InfoEstimate> {
    let k = schedule_k(symbols.len() as u64, alphabet_size);
    ik_symbols(symbols, alphabet_size, k)
}

/// `I_k` estimate at the scheduled memory `k = schedule_k(n, |Y|)`.
pub fn iinf_hat(f: &RepresentationFunction, series: &ObservationSeries) -> Result<InfoEstimate> {
    let k = schedule_k(series.len() as u64, f.alphabet_size());
    ik_hat(f, series, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    fn syms(v: &[u32]) -> Vec<Symbol> {
        v.iter().map(|&s| Symbol(s)).collect()
    }

    /// Independent evaluation of `-sum p log2 p` through natural logarithms.
    fn entropy_oracle(p: &[f64]) -> f64 {
        -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>() / std::f64::consts::LN_2
    }

    #[test]
    fn entropy_examples() {
        close(entropy(&[0.5, 0.5]).unwrap(), 1.0, 1e-15);
        close(entropy(&[1.0, 0.0]).unwrap(), 0.0, 0.0);
        close(entropy(&[0.9, 0.1]).unwrap(), entropy_oracle(&[0.9, 0.1]), 1e-14);
        close(entropy(&[0.9, 0.1]).unwrap(), 0.468996, 5e-7);
    }

    #[test]
    fn entropy_errors() {
        assert!(entropy(&[0.5, -0.1, 0.6]).is_err());
        assert!(entropy(&[0.5, 0.4]).is_err());
        assert!(entropy(&[f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn marginal_entropy_examples() {
        let id = RepresentationFunction::identity(2);
        let s = ObservationSeries::discrete(vec![0, 1, 0, 1]).unwrap();
        close(h0_hat(&id, &s).unwrap(), 1.0, 1e-15);
        close(h0_hat(&RepresentationFunction::constant(2), &s).unwrap(), 0.0, 0.0);
        let s = ObservationSeries::discrete(vec![0, 0, 0, 1]).unwrap();
        close(h0_hat(&id, &s).unwrap(), entropy_oracle(&[0.75, 0.25]), 1e-14);
        close(h0_hat(&id, &s).unwrap(), 0.811278, 5e-7);
    }

    #[test]
    fn information_examples() {
        let id = RepresentationFunction::identity(2);
        let alt = ObservationSeries::discrete((0..100).map(|i| i % 2).collect()).unwrap();
        let est = ik_hat(&id, &alt, 1).unwrap();
        // 99 blocks: 50 of (0,1) and 49 of (1,0), so the joint and both marginals share one law
        close(est.value, entropy_oracle(&[50.0 / 99.0, 49.0 / 99.0]), 1e-14);
        close(est.value, 1.0, 1e-4);
        assert_eq!(est.k_used, 1);
        assert_eq!(est.n_effective, 99);
        close(ik_hat(&RepresentationFunction::constant(2), &alt, 1).unwrap().value, 0.0, 0.0);

        // blocks (0,0),(0,1),(1,1) each 1/3: H(last)=H(1/3,2/3), H(first)=H(2/3,1/3), H(joint)=log2 3
        let h = entropy_oracle(&[1.0 / 3.0, 2.0 / 3.0]);
        let expected = 2.0 * h - 3f64.log2();
        let s = ObservationSeries::discrete(vec![0, 0, 1, 1]).unwrap();
        close(ik_hat(&id, &s, 1).unwrap().value, expected, 1e-14);
        close(expected, 0.251629, 5e-7);

        close(hk_hat(&id, &s, 1).unwrap(), 3f64.log2() - h, 1e-14);
        close(hk_hat(&id, &s, 1).unwrap(), 0.666667, 5e-7);
        close(hk_hat(&id, &alt, 1).unwrap(), 0.0, 1e-12);
    }

    #[test]
    fn information_errors() {
        let id = RepresentationFunction::identity(2);
        let s = ObservationSeries::discrete(vec![0, 1]).unwrap();
        assert!(matches!(ik_hat(&id, &s, 2), Err(Error::SeriesTooShort { .. })));
        assert!(matches!(hk_hat(&id, &s, 2), Err(Error::SeriesTooShort { .. })));
        assert!(ik_hat(&id, &s, 0).is_err());
    }

    #[test]
    fn sparse_support_flag() {
        let s: Vec<Symbol> = (0..6u32).map(|i| Symbol(i % 4)).collect();
        assert!(ik_symbols(&s, 4, 2).unwrap().sparse_support);
        let long: Vec<Symbol> = (0..1000u32).map(|i| Symbol(i % 2)).collect();
        assert!(!ik_symbols(&long, 2, 1).unwrap().sparse_support);
    }

    #[test]
    fn schedule_examples() {
        assert_eq!(schedule_k(100, 2), 2);
        assert_eq!(schedule_k(1_000_000, 2), 4);
        assert_eq!(schedule_k(2, 2), 1);
        assert_eq!(schedule_k(2, 7), 1);
        // support guard binds: 10^4/10 = 1000 >= 10^3 but < 10^4, so k <= 2
        assert_eq!(schedule_k(10_000, 10), 2);
    }

    #[test]
    fn schedule_is_nondecreasing() {
        for a in 1..6 {
            let mut prev = 0;
            let mut n = 2u64;
            while n < 1u64 << 40 {
                let k = schedule_k(n, a);
                assert!(k >= prev, "|Y|={a} n={n}");
                prev = k;
                n = n + n / 7 + 1;
            }
        }
    }

    #[test]
    fn scheduled_estimate_on_cycle() {
        let id = RepresentationFunction::identity(2);
        let s = ObservationSeries::discrete((0..100_000).map(|i| i % 2).collect()).unwrap();
        let est = iinf_hat(&id, &s).unwrap();
        assert_eq!(est.k_used, schedule_k(100_000, 2));
        close(est.value, 1.0, 1e-9);
        close(iinf_hat(&RepresentationFunction::constant(2), &s).unwrap().value, 0.0, 0.0);
    }

    #[test]
    fn binary_entropy_inverse_examples() {
        close(binary_entropy_inverse(1.0).unwrap(), 0.5, 0.0);
        close(binary_entropy_inverse(0.0).unwrap(), 0.0, 0.0);
        close(binary_entropy_inverse(binary_entropy(0.1).unwrap()).unwrap(), 0.1, 1e-12);
        close(binary_entropy_inverse(0.468996).unwrap(), 0.1, 1e-6);
        assert!(binary_entropy_inverse(1.5).is_err());
        assert!(binary_entropy(-0.1).is_err());
    }

    proptest! {
        #[test]
        fn inverse_round_trips(t in 0.0f64..=1.0) {
            let p = binary_entropy_inverse(t).unwrap();
            prop_assert!((0.0..=0.5).contains(&p));
            prop_assert!((binary_entropy(p).unwrap() - t).abs() <= 1e-10);
        }

        #[test]
        fn inverse_is_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(binary_entropy_inverse(lo).unwrap() <= binary_entropy_inverse(hi).unwrap());
        }

        #[test]
        fn information_is_bounded(seq in proptest::collection::vec(0u32..3, 2..300), k in 1usize..4) {
            prop_assume!(seq.len() > k);
            let v = ik_symbols(&syms(&seq), 3, k).unwrap().value;
            prop_assert!(v >= 0.0);
            prop_assert!(v <= 3f64.log2() + 1e-12);
        }

        #[test]
        fn reversal_preserves_lag_one_information(seq in proptest::collection::vec(0u32..3, 2..300)) {
            let fwd = ik_symbols(&syms(&seq), 3, 1).unwrap().value;
            let rev: Vec<u32> = seq.iter().rev().copied().collect();
            let bwd = ik_symbols(&syms(&rev), 3, 1).unwrap().value;
            prop_assert!((fwd - bwd).abs() <= 1e-12);
        }

        #[test]
        fn entropy_is_concave(raw_p in proptest::collection::vec(0.0f64..1.0, 2..8),
                              raw_q in proptest::collection::vec(0.0f64..1.0, 2..8),
                              lambda in 0.0f64..=1.0) {
            let n = raw_p.len().min(raw_q.len());
            let norm = |v: &[f64]| {
                let s: f64 = v.iter().sum::<f64>() + 1e-3 * n as f64;
                v.iter().map(|x| (x + 1e-3) / s).collect::<Vec<_>>()
            };
            let p = norm(&raw_p[..n]);
            let q = norm(&raw_q[..n]);
            let mix: Vec<f64> = p.iter().zip(&q).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
            let lhs = entropy(&mix).unwrap();
            let rhs = lambda * entropy(&p).unwrap() + (1.0 - lambda) * entropy(&q).unwrap();
            prop_assert!(lhs >= rhs - 1e-12);
            prop_assert!(lhs <= (n as f64).log2() + 1e-12);
        }
    }
}
