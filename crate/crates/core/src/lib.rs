//! Selection of representation functions for time series by their
//! time-series information `I(f) = h_0(f) - h_inf(f)`.
//!
//! Plug-in estimators work on observed series. Exact oracles work on
//! finite Markov chains and MDPs. Concentration bounds support planning.

pub mod blocks;
pub mod bounds;
pub mod error;
pub mod estimators;
pub mod format;
pub mod mdp;
pub mod oracle;
pub mod processes;
pub mod representation;
pub mod selection;
pub mod series;
pub mod verify;

pub use blocks::{collect_blocks, BlockLaw, EmpiricalBlockDistribution};
pub use bounds::{BoundParams, BoundValue, BetaSchedule};
pub use error::{Error, Result};
pub use estimators::InfoEstimate;
pub use mdp::{MdpSpec, StationaryPolicy};
pub use oracle::{CiVerdict, EntropyRateSandwich, MarkovChainSpec};
pub use processes::{IdealChainRecipe, MixingProfile};
pub use representation::{apply_representation, RepresentationFunction};
pub use series::{Observation, ObservationSeries, Observations, SeriesMeta, Symbol};
pub use selection::{select_active, select_passive, Mode, SelectionReport};
