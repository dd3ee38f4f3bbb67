//! Choosing a representation from a candidate family.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{ik_symbols, schedule_k, InfoEstimate};
use crate::format::{Cell, Table};
use crate::mdp::{check_weakly_connected, sample_mdp, MdpSpec, StationaryPolicy};
use crate::representation::{apply_representation, RepresentationFunction};
use crate::series::ObservationSeries;

pub const DEFAULT_TAU: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    FixedK(usize),
    /// `k = schedule_k(n, |Y|)` per candidate.
    Schedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    /// One estimate per candidate, in family order.
    pub scores: Vec<InfoEstimate>,
    /// Smallest index attaining the maximal score.
    pub best_index: usize,
    /// Indices scoring at least `max - tau`, ascending.
    pub equivalence_class: Vec<usize>,
    /// Memory used for the selected candidate.
    pub k_used: usize,
    pub n: u64,
    pub tau: f64,
    pub seed: Option<u64>,
}

#[derive(Serialize)]
struct Summary<'a> {
    best_index: usize,
    best_score: f64,
    equivalence_class: &'a [usize],
    k_used: usize,
    n: u64,
    tau: f64,
    seed: Option<u64>,
}

impl SelectionReport {
    pub fn best_score(&self) -> f64 {
        self.scores[self.best_index].value
    }

    pub fn in_equivalence_class(&self, index: usize) -> bool {
        self.equivalence_class.binary_search(&index).is_ok()
    }

    /// `index,score,k_used,in_equivalence_class`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["index", "score", "k_used", "in_equivalence_class"]);
        for (i, s) in self.scores.iter().enumerate() {
            t.push(vec![Cell::from(i), s.value.into(), s.k_used.into(), self.in_equivalence_class(i).into()]);
        }
        t
    }

    pub fn summary_json(&self) -> String {
        let summary = Summary {
            best_index: self.best_index,
            best_score: self.best_score(),
            equivalence_class: &self.equivalence_class,
            k_used: self.k_used,
            n: self.n,
            tau: self.tau,
            seed: self.seed,
        };
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::OutOfRange(format!("tolerance tau = {tau} must be a finite nonnegative number")));
    }
    Ok(())
}

fn report_from(scores: Vec<InfoEstimate>, n: u64, tau: f64, seed: Option<u64>) -> SelectionReport {
    let mut best_index = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.value > scores[best_index].value {
            best_index = i;
        }
    }
    let max = scores[best_index].value;
    let equivalence_class = (0..scores.len()).filter(|&i| scores[i].value >= max - tau).collect();
    SelectionReport { k_used: scores[best_index].k_used, scores, best_index, equivalence_class, n, tau, seed }
}

/// Scores every candidate by its plug-in `I_k` on `series` and returns the
/// maximizer, ties going to the smallest index.
pub fn select_passive(
    family: &[RepresentationFunction],
    series: &ObservationSeries,
    mode: Mode,
    tau: f64,
) -> Result<SelectionReport> {
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    check_tau(tau)?;
    let n = series.len() as u64;
    let scores = family
        .par_iter()
        .map(|f| {
            let k = match mode {
                Mode::FixedK(k) => k,
                Mode::Schedule => schedule_k(n, f.alphabet_size()),
            };
            if series.len() <= k {
                return Err(Error::SeriesTooShort { len: series.len(), k });
            }
            ik_symbols(&apply_representation(f, series)?, f.alphabet_size(), k)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(report_from(scores, n, tau, series.meta.seed))
}

/// Samples `n` steps under the uniform policy and selects with `k = 1` on the
/// observed states.
pub fn select_active(
    mdp: &MdpSpec,
    family: &[RepresentationFunction],
    n: usize,
    seed: u64,
    tau: f64,
) -> Result<SelectionReport> {
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let conn = check_weakly_connected(mdp);
    if let Some((from, to)) = conn.witness {
        return Err(Error::NotWeaklyConnected { from, to });
    }
    let policy = StationaryPolicy::uniform(mdp.n_states(), mdp.n_actions());
    let trajectory = sample_mdp(mdp, &policy, n, seed, 0)?;
    let mut report = select_passive(family, &trajectory, Mode::FixedK(1), tau)?;
    report.seed = Some(seed);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::MarkovChainSpec;
    use crate::processes::{enumerate_family, sample_chain};

    fn dependent_chain() -> MarkovChainSpec {
        MarkovChainSpec::from_rows(&[vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap()
    }

    #[test]
    fn identity_beats_constant() {
        let series = sample_chain(&dependent_chain(), 20_000, 1, 0).unwrap();
        let family = vec![RepresentationFunction::constant(2), RepresentationFunction::identity(2)];
        let r = select_passive(&family, &series, Mode::FixedK(1), DEFAULT_TAU).unwrap();
        assert_eq!(r.best_index, 1);
        assert_eq!(r.scores[0].value, 0.0);
        assert!((r.best_score() - 0.531004).abs() < 0.03);
        assert_eq!(r.equivalence_class, vec![1]);
        assert_eq!(r.seed, Some(1));
    }

    #[test]
    fn ties_go_to_smallest_index() {
        let series = sample_chain(&dependent_chain(), 1_000, 2, 0).unwrap();
        let ones = RepresentationFunction::from_indices(&[1, 1], 2).unwrap();
        let family = vec![RepresentationFunction::constant(2), ones];
        let r = select_passive(&family, &series, Mode::FixedK(1), DEFAULT_TAU).unwrap();
        assert_eq!(r.best_index, 0);
        assert_eq!(r.equivalence_class, vec![0, 1]);
        assert!(r.scores.iter().all(|s| s.value == 0.0));
    }

    #[test]
    fn scores_match_direct_estimates() {
        let series = sample_chain(&dependent_chain(), 5_000, 3, 0).unwrap();
        let family = enumerate_family(2, 2).unwrap();
        for mode in [Mode::FixedK(1), Mode::FixedK(3), Mode::Schedule] {
            let r = select_passive(&family, &series, mode, 0.0).unwrap();
            for (f, s) in family.iter().zip(&r.scores) {
                let k = s.k_used;
                assert_eq!(*s, crate::estimators::ik_hat(f, &series, k).unwrap());
            }
        }
        let r = select_passive(&family, &series, Mode::Schedule, 0.0).unwrap();
        assert_eq!(r.k_used, schedule_k(5_000, 2));
    }

    #[test]
    fn relabeling_keeps_scores() {
        let rows = vec![vec![0.6, 0.3, 0.1], vec![0.2, 0.5, 0.3], vec![0.3, 0.1, 0.6]];
        let series = sample_chain(&MarkovChainSpec::from_rows(&rows).unwrap(), 5_000, 4, 0).unwrap();
        let family = enumerate_family(3, 3).unwrap();
        let swapped: Vec<_> = family.iter().map(|f| f.relabeled(&[2, 0, 1]).unwrap()).collect();
        let a = select_passive(&family, &series, Mode::FixedK(2), 0.0).unwrap();
        let b = select_passive(&swapped, &series, Mode::FixedK(2), 0.0).unwrap();
        for (x, y) in a.scores.iter().zip(&b.scores) {
            assert!((x.value - y.value).abs() < 1e-12);
        }
    }

    #[test]
    fn errors() {
        let series = ObservationSeries::discrete(vec![0, 1]).unwrap();
        assert!(matches!(select_passive(&[], &series, Mode::FixedK(1), 0.0), Err(Error::EmptyFamily)));
        let family = vec![RepresentationFunction::identity(2)];
        assert!(matches!(select_passive(&family, &series, Mode::FixedK(2), 0.0), Err(Error::SeriesTooShort { .. })));
        assert!(select_passive(&family, &series, Mode::FixedK(1), -1.0).is_err());
        let split = MdpSpec::from_action_matrices(&[vec![vec![1.0, 0.0], vec![0.0, 1.0]]]).unwrap();
        assert!(matches!(select_active(&split, &family, 100, 0, 0.0), Err(Error::NotWeaklyConnected { .. })));
    }

    #[test]
    fn single_action_active_matches_passive() {
        let rows = vec![vec![0.9, 0.1], vec![0.1, 0.9]];
        let mdp = MdpSpec::from_action_matrices(&[rows]).unwrap();
        let family = enumerate_family(2, 2).unwrap();
        let active = select_active(&mdp, &family, 10_000, 8, DEFAULT_TAU).unwrap();
        let series = sample_chain(&dependent_chain(), 10_000, 8, 0).unwrap();
        let passive = select_passive(&family, &series, Mode::FixedK(1), DEFAULT_TAU).unwrap();
        assert_eq!(active, passive);
        assert_eq!(active, select_active(&mdp, &family, 10_000, 8, DEFAULT_TAU).unwrap());
    }

    #[test]
    fn csv_and_summary() {
        let series = sample_chain(&dependent_chain(), 1_000, 5, 0).unwrap();
        let family = vec![RepresentationFunction::constant(2), RepresentationFunction::identity(2)];
        let r = select_passive(&family, &series, Mode::FixedK(1), DEFAULT_TAU).unwrap();
        let csv = r.to_table().to_csv();
        assert!(csv.starts_with("index,score,k_used,in_equivalence_class\n0,0.00000,1,false\n1,"));
        let json: serde_json::Value = serde_json::from_str(&r.summary_json()).unwrap();
        assert_eq!(json["best_index"], 1);
        assert_eq!(json["seed"], 5);
    }
}
