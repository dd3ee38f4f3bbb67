//! Process generators and seeded samplers.
//!
//! Randomness comes from ChaCha8 streams keyed by `(seed, stream id)`, so a
//! sampler's output depends only on its seed and never on scheduling.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{check_stochastic_rows as check_rows, closed_classes, MarkovChainSpec};
use crate::representation::RepresentationFunction;
use crate::series::{ObservationSeries, Observations, SeriesMeta, Symbol};

/// Stream ids used by the samplers.
pub const STATE_STREAM: u64 = 0;
pub const ACTION_STREAM: u64 = 1;

/// Deterministic RNG for `(seed, stream)`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `count` seeds drawn from the `(seed, stream)` generator, for experiments
/// that repeat a sampler over many independent runs.
pub fn derive_seeds(seed: u64, stream: u64, count: usize) -> Vec<u64> {
    let mut rng = rng_stream(seed, stream);
    (0..count).map(|_| rng.random()).collect()
}

/// Recipe for a chain whose states are conditionally independent given their
/// labels: `P(x' | x) = T(f(x), f(x')) * q(x' | f(x'))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdealChainRecipe {
    /// `|Y| x |Y|` label transition `T`.
    pub label_transition: Vec<Vec<f64>>,
    /// Number of states carrying each label; states are numbered label by label.
    pub preimage_sizes: Vec<usize>,
    /// `q(. | y)` over the preimage of each label, strictly positive.
    pub emission_weights: Vec<Vec<f64>>,
}

impl IdealChainRecipe {
    pub fn uniform_emissions(label_transition: Vec<Vec<f64>>, preimage_sizes: Vec<usize>) -> Self {
        let emission_weights = preimage_sizes.iter().map(|&s| vec![1.0 / s as f64; s]).collect();
        Self { label_transition, preimage_sizes, emission_weights }
    }

    pub fn alphabet_size(&self) -> usize {
        self.preimage_sizes.len()
    }

    pub fn n_states(&self) -> usize {
        self.preimage_sizes.iter().sum()
    }

    /// Label of every state, in state order.
    pub fn labels(&self) -> Vec<usize> {
        self.preimage_sizes.iter().enumerate().flat_map(|(y, &s)| std::iter::repeat_n(y, s)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.preimage_sizes.len();
        if a == 0 {
            return Err(Error::InvalidSpec("recipe needs at least one label".into()));
        }
        if self.label_transition.len() != a || self.label_transition.iter().any(|r| r.len() != a) {
            return Err(Error::InvalidSpec(format!("label transition must be {a} x {a}")));
        }
        check_rows(&self.label_transition.concat(), a, "label transition")?;
        if self.preimage_sizes.contains(&0) {
            return Err(Error::InvalidSpec("every preimage needs at least one state".into()));
        }
        if self.emission_weights.len() != a {
            return Err(Error::InvalidSpec("one emission vector per label is required".into()));
        }
        for (y, (q, &s)) in self.emission_weights.iter().zip(&self.preimage_sizes).enumerate() {
            if q.len() != s {
                return Err(Error::InvalidSpec(format!("emission vector {y} has {} entries, preimage {s}", q.len())));
            }
            if q.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
                return Err(Error::InvalidSpec(format!("emission vector {y} must be strictly positive")));
            }
            let total: f64 = q.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidSpec(format!("emission vector {y} sums to {total}")));
            }
        }
        let classes = closed_classes(a, |i, j| self.label_transition[i][j] > 0.0);
        if classes.len() != 1 || classes[0].len() != a {
            return Err(Error::Reducible { classes });
        }
        Ok(())
    }
}

/// Certified geometric mixing rate `gamma` in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingProfile {
    gamma: f64,
}

impl MixingProfile {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::OutOfRange(format!("mixing rate {gamma} outside (0, 1)")));
        }
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Rate from the second-largest eigenvalue modulus of `spec`. `None` when
    /// that modulus is 1 (periodic chain): no geometric rate is available.
    pub fn from_slem(spec: &MarkovChainSpec) -> Option<Self> {
        let slem = second_largest_eigenvalue_modulus(spec);
        if slem >= 1.0 - 1e-12 {
            None
        } else {
            Some(Self { gamma: slem.max(f64::EPSILON) })
        }
    }
}

pub fn second_largest_eigenvalue_modulus(spec: &MarkovChainSpec) -> f64 {
    let n = spec.n_states();
    if n == 1 {
        return 0.0;
    }
    let m = DMatrix::from_row_slice(n, n, spec.transition());
    let mut moduli: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    // the leading eigenvalue of a stochastic matrix is 1
    moduli[1].min(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdealChain {
    pub spec: MarkovChainSpec,
    pub representation: RepresentationFunction,
    pub mixing: Option<MixingProfile>,
}

pub fn build_ideal_chain(recipe: &IdealChainRecipe) -> Result<IdealChain> {
    recipe.validate()?;
    let labels = recipe.labels();
    let n = labels.len();
    let local: Vec<usize> =
        recipe.preimage_sizes.iter().flat_map(|&s| 0..s).collect();
    let mut transition = vec![0.0; n * n];
    for x in 0..n {
        for x2 in 0..n {
            transition[x * n + x2] =
                recipe.label_transition[labels[x]][labels[x2]] * recipe.emission_weights[labels[x2]][local[x2]];
        }
    }
    // renormalize rows against rounding in the products
    for row in transition.chunks_mut(n) {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= s);
    }
    let spec = MarkovChainSpec::new(n, transition)?;
    let representation = RepresentationFunction::lookup_table(
        labels.iter().map(|&y| Symbol(y as u32)).collect(),
        recipe.alphabet_size(),
    )?;
    let mixing = MixingProfile::from_slem(&spec);
    Ok(IdealChain { spec, representation, mixing })
}

/// Row sampler over cumulative probabilities.
#[derive(Debug, Clone)]
pub(crate) struct RowSampler {
    width: usize,
    cumulative: Vec<f64>,
}

impl RowSampler {
    pub(crate) fn new(rows: &[f64], width: usize) -> Self {
        let mut cumulative = Vec::with_capacity(rows.len());
        for row in rows.chunks(width) {
            let mut acc = 0.0;
            for &p in row {
                acc += p;
                cumulative.push(acc);
            }
        }
        Self { width, cumulative }
    }

    #[inline]
    pub(crate) fn draw(&self, row: usize, rng: &mut impl Rng) -> usize {
        let cum = &self.cumulative[row * self.width..(row + 1) * self.width];
        let u: f64 = rng.random::<f64>() * cum[self.width - 1];
        let i = cum.partition_point(|&c| c <= u);
        if i < self.width {
            i
        } else {
            // u landed on the rounded total: take the last state with mass
            (0..self.width).rev().find(|&j| j == 0 || cum[j] > cum[j - 1]).unwrap_or(0)
        }
    }
}

pub(crate) fn sample_path(
    rows: &RowSampler,
    start_law: &[f64],
    n: usize,
    burn_in: usize,
    rng: &mut impl Rng,
) -> Vec<usize> {
    let start = RowSampler::new(start_law, start_law.len());
    let mut x = start.draw(0, rng);
    for _ in 0..burn_in {
        x = rows.draw(x, rng);
    }
    let mut out = Vec::with_capacity(n);
    out.push(x);
    for _ in 1..n {
        x = rows.draw(x, rng);
        out.push(x);
    }
    out
}

/// Stationary-start trajectory of length `n` after `burn_in` discarded steps.
pub fn sample_chain(spec: &MarkovChainSpec, n: usize, seed: u64, burn_in: usize) -> Result<ObservationSeries> {
    if n == 0 {
        return Err(Error::OutOfRange("trajectory length must be at least 1".into()));
    }
    let pi = spec.stationary()?;
    let rows = RowSampler::new(spec.transition(), spec.n_states());
    let mut rng = rng_stream(seed, STATE_STREAM);
    let path = sample_path(&rows, pi, n, burn_in, &mut rng);
    ObservationSeries::new(
        Observations::Discrete(path),
        None,
        SeriesMeta { seed: Some(seed), generator: "sample_chain".into() },
    )
}

/// Largest exhaustive family `enumerate_family` will build.
pub const FAMILY_LIMIT: f64 = 1e6;

/// All `|Y|^|X|` lookup tables in lexicographic order (state 0 most significant).
pub fn enumerate_family(n_states: usize, alphabet_size: usize) -> Result<Vec<RepresentationFunction>> {
    if n_states == 0 || alphabet_size == 0 {
        return Err(Error::OutOfRange("family needs at least one state and one symbol".into()));
    }
    let size = (alphabet_size as f64).powi(n_states as i32);
    if size > FAMILY_LIMIT {
        return Err(Error::EnumerationGuard { what: "exhaustive family |Y|^|X|", size, limit: FAMILY_LIMIT });
    }
    let count = alphabet_size.pow(n_states as u32);
    (0..count)
        .map(|mut i| {
            let mut table = vec![Symbol(0); n_states];
            for slot in table.iter_mut().rev() {
                *slot = Symbol((i % alphabet_size) as u32);
                i /= alphabet_size;
            }
            RepresentationFunction::lookup_table(table, alphabet_size)
        })
        .collect()
}

/// Strictly positive probability vector: uniform draws shifted by `floor`, normalized.
pub fn random_probability_vector(rng: &mut impl Rng, len: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.random::<f64>() + floor).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

pub fn random_stochastic_matrix(rng: &mut impl Rng, n: usize, floor: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| random_probability_vector(rng, n, floor)).collect()
}

/// A dense random chain with all transitions positive.
pub fn random_chain(rng: &mut impl Rng, n_states: usize) -> MarkovChainSpec {
    MarkovChainSpec::from_rows(&random_stochastic_matrix(rng, n_states, 0.05))
        .expect("normalized rows are stochastic")
}

/// Random recipe with `alphabet_size` labels over `n_states` states; every
/// label gets at least one state.
pub fn random_recipe(rng: &mut impl Rng, n_states: usize, alphabet_size: usize) -> Result<IdealChainRecipe> {
    if alphabet_size == 0 || n_states < alphabet_size {
        return Err(Error::OutOfRange(format!("cannot spread {n_states} states over {alphabet_size} labels")));
    }
    let mut sizes = vec![1usize; alphabet_size];
    for _ in alphabet_size..n_states {
        sizes[rng.random_range(0..alphabet_size)] += 1;
    }
    let label_transition = random_stochastic_matrix(rng, alphabet_size, 0.05);
    let emission_weights = sizes.iter().map(|&s| random_probability_vector(rng, s, 0.1)).collect();
    Ok(IdealChainRecipe { label_transition, preimage_sizes: sizes, emission_weights })
}
