use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{ObservationSeries, Observations, Symbol};

/// A deterministic map from observations to a finite alphabet `{0, .., alphabet_size-1}`.
///
/// Serialized as JSON with an explicit `kind` tag, e.g.
/// `{"kind":"lookup_table","alphabet_size":2,"table":[0,0,1,1]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "RawRepresentation")]
pub enum RepresentationFunction {
    LookupTable { alphabet_size: usize, table: Vec<Symbol> },
    /// Axis-aligned grid. A coordinate equal to a threshold falls in the upper
    /// cell. `cells` is indexed row-major over the per-dimension cell indices,
    /// first dimension most significant.
    GridQuantizer { alphabet_size: usize, thresholds: Vec<Vec<f64>>, cells: Vec<Symbol> },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawRepresentation {
    LookupTable { alphabet_size: usize, table: Vec<Symbol> },
    GridQuantizer { alphabet_size: usize, thresholds: Vec<Vec<f64>>, cells: Vec<Symbol> },
}

impl TryFrom<RawRepresentation> for RepresentationFunction {
    type Error = Error;

    fn try_from(raw: RawRepresentation) -> Result<Self> {
        match raw {
            RawRepresentation::LookupTable { alphabet_size, table } => Self::lookup_table(table, alphabet_size),
            RawRepresentation::GridQuantizer { alphabet_size, thresholds, cells } => {
                Self::grid_quantizer(thresholds, cells, alphabet_size)
            }
        }
    }
}

fn check_symbols(symbols: &[Symbol], alphabet_size: usize) -> Result<()> {
    if alphabet_size == 0 {
        return Err(Error::InvalidSpec("alphabet size must be positive".into()));
    }
    if let Some(s) = symbols.iter().find(|s| s.index() >= alphabet_size) {
        return Err(Error::InvalidSpec(format!("symbol {} outside alphabet of size {alphabet_size}", s.0)));
    }
    Ok(())
}

impl RepresentationFunction {
    pub fn lookup_table(table: Vec<Symbol>, alphabet_size: usize) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::InvalidSpec("lookup table must cover at least one state".into()));
        }
        check_symbols(&table, alphabet_size)?;
        Ok(Self::LookupTable { alphabet_size, table })
    }

    /// Convenience constructor from plain indices.
    pub fn from_indices(table: &[u32], alphabet_size: usize) -> Result<Self> {
        Self::lookup_table(table.iter().map(|&s| Symbol(s)).collect(), alphabet_size)
    }

    pub fn identity(n_states: usize) -> Self {
        Self::LookupTable { alphabet_size: n_states, table: (0..n_states as u32).map(Symbol).collect() }
    }

    pub fn constant(n_states: usize) -> Self {
        Self::LookupTable { alphabet_size: 1, table: vec![Symbol(0); n_states] }
    }

    pub fn grid_quantizer(thresholds: Vec<Vec<f64>>, cells: Vec<Symbol>, alphabet_size: usize) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::InvalidSpec("grid quantizer needs at least one dimension".into()));
        }
        for (d, t) in thresholds.iter().enumerate() {
            if t.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidSpec(format!("non-finite threshold in dimension {d}")));
            }
            if t.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidSpec(format!("thresholds of dimension {d} not strictly increasing")));
            }
        }
        let n_cells: usize = thresholds.iter().map(|t| t.len() + 1).product();
        if cells.len() != n_cells {
            return Err(Error::InvalidSpec(format!(
                "grid has {n_cells} cells but {} assignments were given",
                cells.len()
            )));
        }
        check_symbols(&cells, alphabet_size)?;
        Ok(Self::GridQuantizer { alphabet_size, thresholds, cells })
    }

    pub fn alphabet_size(&self) -> usize {
        match self {
            Self::LookupTable { alphabet_size, .. } | Self::GridQuantizer { alphabet_size, .. } => *alphabet_size,
        }
    }

    /// `|X|` for lookup tables.
    pub fn domain_size(&self) -> Option<usize> {
        match self {
            Self::LookupTable { table, .. } => Some(table.len()),
            Self::GridQuantizer { .. } => None,
        }
    }

    pub fn table(&self) -> Option<&[Symbol]> {
        match self {
            Self::LookupTable { table, .. } => Some(table),
            Self::GridQuantizer { .. } => None,
        }
    }

    /// Image of a discrete state. Panics for quantizers or out-of-range states;
    /// use [`apply_representation`] for checked evaluation over a series.
    #[inline]
    pub fn label(&self, state: usize) -> usize {
        match self {
            Self::LookupTable { table, .. } => table[state].index(),
            Self::GridQuantizer { .. } => panic!("label() is only defined for lookup tables"),
        }
    }

    fn quantize(thresholds: &[Vec<f64>], cells: &[Symbol], point: &[f64]) -> Symbol {
        let mut cell = 0usize;
        for (t, &x) in thresholds.iter().zip(point) {
            // number of thresholds <= x: ties go to the upper cell
            let c = t.partition_point(|&th| th <= x);
            cell = cell * (t.len() + 1) + c;
        }
        cells[cell]
    }

    /// The same partition with labels renamed by `perm` (symbol `s` becomes `perm[s]`).
    pub fn relabeled(&self, perm: &[u32]) -> Result<Self> {
        let map = |s: &Symbol| perm.get(s.index()).copied().map(Symbol);
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            if p as usize >= perm.len() || std::mem::replace(&mut seen[p as usize], true) {
                return Err(Error::InvalidSpec("relabeling is not a permutation".into()));
            }
        }
        if perm.len() != self.alphabet_size() {
            return Err(Error::InvalidSpec("permutation length differs from alphabet size".into()));
        }
        match self {
            Self::LookupTable { alphabet_size, table } => {
                Ok(Self::LookupTable { alphabet_size: *alphabet_size, table: table.iter().map(|s| map(s).unwrap()).collect() })
            }
            Self::GridQuantizer { alphabet_size, thresholds, cells } => Ok(Self::GridQuantizer {
                alphabet_size: *alphabet_size,
                thresholds: thresholds.clone(),
                cells: cells.iter().map(|s| map(s).unwrap()).collect(),
            }),
        }
    }
}

/// Materializes `f(X_0), .., f(X_n)`.
pub fn apply_representation(f: &RepresentationFunction, series: &ObservationSeries) -> Result<Vec<Symbol>> {
    match (f, series.observations()) {
        (RepresentationFunction::LookupTable { table, .. }, Observations::Discrete(states)) => states
            .iter()
            .map(|&x| {
                table.get(x).copied().ok_or_else(|| {
                    Error::DomainMismatch(format!("state {x} outside lookup table of length {}", table.len()))
                })
            })
            .collect(),
        (RepresentationFunction::GridQuantizer { thresholds, cells, .. }, Observations::Continuous { dim, values }) => {
            if *dim != thresholds.len() {
                return Err(Error::DomainMismatch(format!(
                    "observation dimension {dim} differs from quantizer dimension {}",
                    thresholds.len()
                )));
            }
            Ok(values.chunks_exact(*dim).map(|p| RepresentationFunction::quantize(thresholds, cells, p)).collect())
        }
        (RepresentationFunction::LookupTable { .. }, Observations::Continuous { .. }) => Err(Error::DomainMismatch(
            "lookup table applied to a continuous series".into(),
        )),
        (RepresentationFunction::GridQuantizer { .. }, Observations::Discrete(_)) => Err(Error::DomainMismatch(
            "grid quantizer applied to a discrete series".into(),
        )),
    }
}
