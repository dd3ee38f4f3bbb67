//! Observation series and their newline-delimited file format.
//!
//! One observation per line: a single integer for discrete states or
//! comma-separated decimals for continuous vectors. An optional action index
//! follows after a tab. Lines starting with `#` carry metadata
//! (`# generator=<id> seed=<u64>`) and are otherwise ignored.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An element of a finite alphabet `{0, .., |Y|-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Symbol(pub u32);

impl Symbol {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A single observation, borrowed out of a series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observation<'a> {
    Discrete(usize),
    Continuous(&'a [f64]),
}

/// Column storage for the observations of one series. Storing by column makes
/// "all observations share the variant and dimension" hold by construction.
#[derive(Debug, Clone, PartialEq)]
pub enum Observations {
    Discrete(Vec<usize>),
    /// Row-major `len * dim` values.
    Continuous { dim: usize, values: Vec<f64> },
}

impl Observations {
    pub fn len(&self) -> usize {
        match self {
            Observations::Discrete(v) => v.len(),
            Observations::Continuous { dim, values } => {
                if *dim == 0 {
                    0
                } else {
                    values.len() / dim
                }
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> Option<Observation<'_>> {
        match self {
            Observations::Discrete(v) => v.get(i).map(|&x| Observation::Discrete(x)),
            Observations::Continuous { dim, values } => values
                .get(i * dim..(i + 1) * dim)
                .map(Observation::Continuous),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub seed: Option<u64>,
    pub generator: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    observations: Observations,
    actions: Option<Vec<usize>>,
    pub meta: SeriesMeta,
}

impl ObservationSeries {
    pub fn new(observations: Observations, actions: Option<Vec<usize>>, meta: SeriesMeta) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::InvalidSpec("series must contain at least one observation".into()));
        }
        if let Observations::Continuous { dim, values } = &observations {
            if *dim == 0 || values.len() % dim != 0 {
                return Err(Error::InvalidSpec(format!(
                    "continuous series of {} values is not a multiple of dimension {dim}",
                    values.len()
                )));
            }
        }
        if let Some(a) = &actions {
            if a.len() != observations.len() {
                return Err(Error::InvalidSpec(format!(
                    "actions length {} differs from observations length {}",
                    a.len(),
                    observations.len()
                )));
            }
        }
        Ok(Self { observations, actions, meta })
    }

    pub fn discrete(states: Vec<usize>) -> Result<Self> {
        Self::new(Observations::Discrete(states), None, SeriesMeta::default())
    }

    pub fn continuous(dim: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(Observations::Continuous { dim, values }, None, SeriesMeta::default())
    }

    pub fn with_meta(mut self, meta: SeriesMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn observations(&self) -> &Observations {
        &self.observations
    }

    pub fn actions(&self) -> Option<&[usize]> {
        self.actions.as_deref()
    }

    /// Discrete state column, if this is a discrete series.
    pub fn states(&self) -> Option<&[usize]> {
        match &self.observations {
            Observations::Discrete(v) => Some(v),
            Observations::Continuous { .. } => None,
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = format!("# generator={}", self.meta.generator);
        if let Some(seed) = self.meta.seed {
            let _ = write!(header, " seed={seed}");
        }
        writeln!(w, "{header}")?;
        let mut line = String::new();
        for i in 0..self.len() {
            line.clear();
            match self.observations.get(i).expect("index in range") {
                Observation::Discrete(x) => {
                    let _ = write!(line, "{x}");
                }
                Observation::Continuous(v) => {
                    for (j, x) in v.iter().enumerate() {
                        if j > 0 {
                            line.push(',');
                        }
                        // Debug keeps a decimal point so the line reads back as continuous
                        let _ = write!(line, "{x:?}");
                    }
                }
            }
            if let Some(a) = &self.actions {
                let _ = write!(line, "\t{}", a[i]);
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut meta = SeriesMeta::default();
        let mut discrete: Vec<usize> = Vec::new();
        let mut continuous: Vec<f64> = Vec::new();
        let mut dim: Option<usize> = None;
        let mut actions: Vec<usize> = Vec::new();
        let mut has_actions: Option<bool> = None;
        let mut is_continuous: Option<bool> = None;

        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = lineno + 1;
            let trimmed = line.trim_end_matches(['\r', '\n']);
            if trimmed.trim().is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('#') {
                for token in rest.split_whitespace() {
                    if let Some(g) = token.strip_prefix("generator=") {
                        meta.generator = g.to_string();
                    } else if let Some(s) = token.strip_prefix("seed=") {
                        meta.seed = s.parse().ok();
                    }
                }
                continue;
            }
            let parse_err = |msg: String| Error::Parse { line: lineno, msg };
            let mut cols = trimmed.split('\t');
            let obs = cols.next().unwrap_or("").trim();
            let action = cols.next().map(str::trim);
            if cols.next().is_some() {
                return Err(parse_err("more than two tab-separated columns".into()));
            }
            match (has_actions, action.is_some()) {
                (None, a) => has_actions = Some(a),
                (Some(prev), a) if prev != a => {
                    return Err(parse_err("action column present on some lines only".into()))
                }
                _ => {}
            }
            if let Some(a) = action {
                actions.push(a.parse().map_err(|e| parse_err(format!("bad action {a:?}: {e}")))?);
            }

            let cont = obs.contains(',') || obs.contains('.') || obs.contains('e') || obs.contains('E');
            let cont = match is_continuous {
                None => {
                    is_continuous = Some(cont);
                    cont
                }
                // a continuous series may legitimately contain lines like "1"
                Some(true) => true,
                Some(false) if cont => {
                    return Err(parse_err("continuous value in a discrete series".into()))
                }
                Some(false) => false,
            };
            if cont {
                let before = continuous.len();
                for field in obs.split(',') {
                    let field = field.trim();
                    continuous.push(
                        field
                            .parse()
                            .map_err(|e| parse_err(format!("bad value {field:?}: {e}")))?,
                    );
                }
                let d = continuous.len() - before;
                match dim {
                    None => dim = Some(d),
                    Some(expected) if expected != d => {
                        return Err(parse_err(format!("dimension {d}, expected {expected}")))
                    }
                    _ => {}
                }
            } else {
                discrete.push(obs.parse().map_err(|e| parse_err(format!("bad state {obs:?}: {e}")))?);
            }
        }

        let observations = if is_continuous == Some(true) {
            Observations::Continuous { dim: dim.unwrap_or(0), values: continuous }
        } else {
            Observations::Discrete(discrete)
        };
        let actions = if has_actions == Some(true) { Some(actions) } else { None };
        Self::new(observations, actions, meta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discrete_with_actions_round_trips() {
        let s = ObservationSeries::new(
            Observations::Discrete(vec![0, 2, 1]),
            Some(vec![1, 0, 1]),
            SeriesMeta { seed: Some(7), generator: "test".into() },
        )
        .unwrap();
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "# generator=test seed=7\n0\t1\n2\t0\n1\t1\n");
        let back = ObservationSeries::read_from(&buf[..]).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn continuous_lines_parse() {
        let s = ObservationSeries::read_from("0.5,1\n-2,3e-1\n".as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.observations().get(1), Some(Observation::Continuous(&[-2.0, 0.3])));
    }

    #[test]
    fn rejects_ragged_dimension_and_partial_actions() {
        assert!(ObservationSeries::read_from("0.5,1\n2.0\n".as_bytes()).is_err());
        assert!(ObservationSeries::read_from("0\t1\n1\n".as_bytes()).is_err());
        assert!(ObservationSeries::read_from("# only a comment\n".as_bytes()).is_err());
    }

    #[test]
    fn action_length_must_match() {
        let err = ObservationSeries::new(Observations::Discrete(vec![0, 1]), Some(vec![0]), SeriesMeta::default());
        assert!(err.is_err());
    }
}
