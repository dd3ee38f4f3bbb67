//! Concentration bounds for plug-in information estimates under geometric
//! beta-mixing.
//!
//! Probability bounds keep their natural-exponential form; information
//! quantities (`epsilon`, `log |Y|`, the binary entropy) are in bits. Values are
//! carried in the log domain so that vacuous magnitudes like `1e300` and tiny
//! ones like `1e-300` compare correctly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{binary_entropy_inverse, binary_entropy_unchecked};

/// A bound value. `value` may be `inf` when `ln_value` exceeds the f64 range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub value: f64,
    pub ln_value: f64,
}

impl BoundValue {
    fn from_ln(ln_value: f64) -> Self {
        Self { value: ln_value.exp(), ln_value }
    }

    /// A probability bound of at least 1 says nothing.
    pub fn is_vacuous(&self) -> bool {
        self.ln_value >= 0.0
    }

    /// `min(value, 1)`.
    pub fn as_probability(&self) -> f64 {
        self.value.min(1.0)
    }
}

fn ln_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Nonincreasing mixing coefficients `beta(t)`, `t = 1 ..= t_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaSchedule {
    values: Vec<f64>,
}

impl BetaSchedule {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSpec("beta schedule needs at least one value".into()));
        }
        if values.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(Error::OutOfRange("beta coefficients must lie in [0, 1]".into()));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidSpec("beta schedule must be nonincreasing".into()));
        }
        Ok(Self { values })
    }

    pub fn geometric(gamma: f64, t_max: usize) -> Result<Self> {
        Self::new((1..=t_max).map(|t| gamma.powi(t as i32)).collect())
    }

    pub fn zero(t_max: usize) -> Self {
        Self { values: vec![0.0; t_max.max(1)] }
    }

    /// `beta(t)`; past the table the last value is used, an upper bound since
    /// the schedule is nonincreasing.
    pub fn beta(&self, t: usize) -> f64 {
        if t == 0 {
            return 1.0;
        }
        *self.values.get(t - 1).unwrap_or_else(|| self.values.last().expect("nonempty"))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `n beta(t_n) + 8 t_n^(d+1) exp(-l_n eps^2 / 8)` with `l_n = n / t_n`.
pub fn q_bound(beta: &BetaSchedule, d: u32, epsilon: f64, n: u64, t_n: u64) -> Result<BoundValue> {
    if t_n == 0 || t_n > n {
        return Err(Error::OutOfRange(format!("t_n = {t_n} outside 1..={n}")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::OutOfRange(format!("epsilon {epsilon} must be positive")));
    }
    let (n_f, t_f) = (n as f64, t_n as f64);
    let mixing = n_f.ln() + beta.beta(t_n.min(usize::MAX as u64) as usize).ln();
    let l_n = n_f / t_f;
    let deviation = 8f64.ln() + (d as f64 + 1.0) * t_f.ln() - l_n * epsilon * epsilon / 8.0;
    Ok(BoundValue::from_ln(ln_add(mixing, deviation)))
}

fn ln_delta(d: f64, epsilon: f64, n: f64, gamma: f64) -> f64 {
    let root = n.sqrt();
    let mixing = if gamma == 0.0 { f64::NEG_INFINITY } else { n.ln() + root * gamma.ln() };
    let deviation = 8f64.ln() + 0.5 * (d + 1.0) * n.ln() - root * epsilon * epsilon / 8.0;
    ln_add(mixing, deviation)
}

/// `Delta(d, eps, n, gamma) = n gamma^sqrt(n) + 8 n^((d+1)/2) exp(-sqrt(n) eps^2 / 8)`.
/// `gamma = 0` is accepted as the limit where the mixing term vanishes.
pub fn delta_bound(d: f64, epsilon: f64, n: u64, gamma: f64) -> Result<BoundValue> {
    if n == 0 {
        return Err(Error::OutOfRange("n must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::OutOfRange(format!("gamma {gamma} outside (0, 1)")));
    }
    if !(epsilon > 0.0) || !(d > 0.0) {
        return Err(Error::OutOfRange("d and epsilon must be positive".into()));
    }
    Ok(BoundValue::from_ln(ln_delta(d, epsilon, n as f64, gamma)))
}

/// Inputs of the uniform deviation bound for `I_k` estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    /// VC dimension of each per-label indicator class.
    pub d: u32,
    /// Deviation, bits.
    pub epsilon: f64,
    pub n: u64,
    pub gamma: f64,
    pub k: usize,
    pub alphabet_size: usize,
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::OutOfRange("VC dimension must be positive".into()));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::OutOfRange(format!("epsilon {} must be positive", self.epsilon)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::OutOfRange(format!("gamma {} outside (0, 1)", self.gamma)));
        }
        if self.k == 0 {
            return Err(Error::OutOfRange("block memory k must be at least 1".into()));
        }
        if self.alphabet_size < 2 {
            return Err(Error::OutOfRange("alphabet must have at least two symbols".into()));
        }
        Ok(())
    }

    pub fn with_n(self, n: u64) -> Self {
        Self { n, ..self }
    }

    fn blocks(&self) -> f64 {
        (self.alphabet_size as f64).powi(self.k as i32 + 1)
    }

    /// VC dimension of the block class, `7 k d`.
    pub fn block_vc_dimension(&self) -> f64 {
        7.0 * self.k as f64 * self.d as f64
    }

    /// Deviation passed to `Delta`:
    /// `min(eps / (6 (k+1) |Y|^(k+1) log|Y|), h^-1(eps / (6 |Y|^(k+1))))`.
    /// The entropy target is capped at 1, where `h^-1` saturates at 1/2.
    pub fn inner_epsilon(&self) -> f64 {
        let blocks = self.blocks();
        let log_y = (self.alphabet_size as f64).log2();
        let linear = self.epsilon / (6.0 * (self.k as f64 + 1.0) * blocks * log_y);
        let target = (self.epsilon / (6.0 * blocks)).min(1.0);
        let entropic = binary_entropy_inverse(target).expect("target within [0, 1]");
        linear.min(entropic)
    }
}

/// `2 |Y|^(k+1) Delta(7kd, inner_epsilon, n - k, gamma)`.
pub fn estimation_bound(params: &BoundParams) -> Result<BoundValue> {
    params.validate()?;
    if params.n <= params.k as u64 {
        return Err(Error::OutOfRange(format!("n = {} must exceed k = {}", params.n, params.k)));
    }
    let n_eff = (params.n - params.k as u64) as f64;
    let ln_prefactor = (2.0 * params.blocks()).ln();
    let ln = ln_prefactor + ln_delta(params.block_vc_dimension(), params.inner_epsilon(), n_eff, params.gamma);
    Ok(BoundValue::from_ln(ln))
}

/// Smallest `n` from which both terms of the bound decrease in `n`:
/// `k + max(4 / ln^2 gamma, 64 (7kd + 1)^2 / eps'^4)`.
pub fn estimation_crossover(params: &BoundParams) -> Result<u64> {
    params.validate()?;
    let eps = params.inner_epsilon();
    let mixing = 4.0 / params.gamma.ln().powi(2);
    let deviation = 64.0 * (params.block_vc_dimension() + 1.0).powi(2) / eps.powi(4);
    let tail = mixing.max(deviation).ceil();
    Ok(if tail >= (u64::MAX - params.k as u64) as f64 { u64::MAX } else { tail as u64 + params.k as u64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuityBound {
    /// Bits.
    pub value: f64,
    /// `alpha > 1`: the trivial cap `2 (k+1) log|Y|` was returned instead.
    pub saturated: bool,
}

/// `3 (k+1) alpha log|Y| + 3 h(min(alpha, 1/2))` for `alpha <= 1`, with `alpha`
/// the L1 distance between two `(k+1)`-block laws.
pub fn continuity_bound(k: usize, alphabet_size: usize, alpha: f64) -> Result<ContinuityBound> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::OutOfRange(format!("total variation {alpha} must be nonnegative")));
    }
    if alphabet_size == 0 {
        return Err(Error::OutOfRange("alphabet must be nonempty".into()));
    }
    let blocks = (k as f64 + 1.0) * (alphabet_size as f64).log2();
    if alpha > 1.0 {
        return Ok(ContinuityBound { value: 2.0 * blocks, saturated: true });
    }
    let value = 3.0 * blocks * alpha + 3.0 * binary_entropy_unchecked(alpha.min(0.5));
    Ok(ContinuityBound { value, saturated: false })
}

/// Default search cap for [`required_n`].
pub const REQUIRED_N_CAP: u64 = 1_000_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RequiredN {
    pub n: u64,
    /// Start of the monotone tail; minimality of `n` holds on `[tail_start, n]`.
    pub tail_start: u64,
}

/// Smallest `n` in the monotone tail with `estimation_bound <= target_prob`,
/// by doubling then bisection. `params.n` is ignored.
pub fn required_n(params: &BoundParams, target_prob: f64, max_n: u64) -> Result<RequiredN> {
    if !(target_prob > 0.0 && target_prob < 1.0) {
        return Err(Error::OutOfRange(format!("target probability {target_prob} outside (0, 1)")));
    }
    params.validate()?;
    let ln_target = target_prob.ln();
    let tail_start = estimation_crossover(params)?.max(params.k as u64 + 1);
    let ok = |n: u64| estimation_bound(&params.with_n(n)).map(|b| b.ln_value <= ln_target);
    let unattainable = || {
        Error::Unattainable(format!("no n <= {max_n} brings the bound to {target_prob}"))
    };
    if tail_start > max_n {
        return Err(unattainable());
    }
    if ok(tail_start)? {
        return Ok(RequiredN { n: tail_start, tail_start });
    }
    let mut lo = tail_start;
    let mut hi = tail_start;
    loop {
        if hi >= max_n {
            return Err(unattainable());
        }
        hi = hi.saturating_mul(2).min(max_n);
        if ok(hi)? {
            break;
        }
        lo = hi;
    }
    // invariant: bound(lo) > target >= bound(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(RequiredN { n: hi, tail_start })
}

/// Axes of a parameter grid for monotonicity scans and the `bound` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundGrid {
    pub d: Vec<u32>,
    pub epsilon: Vec<f64>,
    pub n: Vec<u64>,
    pub gamma: Vec<f64>,
    pub k: Vec<usize>,
    pub alphabet_size: Vec<usize>,
}

impl BoundGrid {
    /// Every grid point, ordered with `n` varying fastest.
    pub fn points(&self) -> Vec<BoundParams> {
        let mut out = Vec::new();
        for &d in &self.d {
            for &epsilon in &self.epsilon {
                for &gamma in &self.gamma {
                    for &k in &self.k {
                        for &alphabet_size in &self.alphabet_size {
                            for &n in &self.n {
                                out.push(BoundParams { d, epsilon, n, gamma, k, alphabet_size });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn sorted(&self) -> Self {
        fn s<T: PartialOrd + Copy>(v: &[T]) -> Vec<T> {
            let mut v = v.to_vec();
            v.sort_by(|a, b| a.partial_cmp(b).expect("comparable grid values"));
            v
        }
        Self {
            d: s(&self.d),
            epsilon: s(&self.epsilon),
            n: s(&self.n),
            gamma: s(&self.gamma),
            k: s(&self.k),
            alphabet_size: s(&self.alphabet_size),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityScan {
    pub comparisons: usize,
    /// Comparisons on the `n` and `k` axes skipped because `n` was below the crossover.
    pub skipped_before_crossover: usize,
    pub violations: Vec<String>,
}

/// Checks the expected directions of [`estimation_bound`] between neighbouring
/// grid points: nonincreasing in `n` and `epsilon`, nondecreasing in `d`, `k`,
/// `|Y|` and `gamma`. Moves along `n` or `k` change the effective sample size
/// `n - k`, so they are compared only past both points' crossover.
pub fn monotonicity_scan(grid: &BoundGrid) -> Result<MonotonicityScan> {
    let g = grid.sorted();
    let mut scan = MonotonicityScan::default();
    let eval = |p: &BoundParams| -> Result<Option<f64>> {
        if p.n <= p.k as u64 {
            return Ok(None);
        }
        Ok(Some(estimation_bound(p)?.ln_value))
    };
    let compare = |scan: &mut MonotonicityScan, lo: BoundParams, hi: BoundParams, axis: &str, increasing: bool, needs_tail: bool| -> Result<()> {
        if needs_tail && (lo.n < estimation_crossover(&lo)? || hi.n < estimation_crossover(&hi)?) {
            scan.skipped_before_crossover += 1;
            return Ok(());
        }
        let (Some(a), Some(b)) = (eval(&lo)?, eval(&hi)?) else { return Ok(()) };
        scan.comparisons += 1;
        let slack = 1e-12 * a.abs().max(b.abs()).max(1.0);
        let bad = if increasing { b < a - slack } else { b > a + slack };
        if bad {
            scan.violations.push(format!("{axis}: {lo:?} -> {hi:?}: ln bound {a} -> {b}"));
        }
        Ok(())
    };
    fn next<T: PartialEq + Copy>(v: &[T], cur: T) -> Option<T> {
        v.iter().position(|x| *x == cur).and_then(|i| v.get(i + 1)).copied()
    }
    for p in g.points() {
        if let Some(n) = next(&g.n, p.n) {
            compare(&mut scan, p, p.with_n(n), "n", false, true)?;
        }
        if let Some(e) = next(&g.epsilon, p.epsilon) {
            compare(&mut scan, p, BoundParams { epsilon: e, ..p }, "epsilon", false, false)?;
        }
        if let Some(d) = next(&g.d, p.d) {
            compare(&mut scan, p, BoundParams { d, ..p }, "d", true, false)?;
        }
        if let Some(k) = next(&g.k, p.k) {
            compare(&mut scan, p, BoundParams { k, ..p }, "k", true, true)?;
        }
        if let Some(a) = next(&g.alphabet_size, p.alphabet_size) {
            compare(&mut scan, p, BoundParams { alphabet_size: a, ..p }, "alphabet_size", true, false)?;
        }
        if let Some(gm) = next(&g.gamma, p.gamma) {
            compare(&mut scan, p, BoundParams { gamma: gm, ..p }, "gamma", true, false)?;
        }
    }
    Ok(scan)
}
