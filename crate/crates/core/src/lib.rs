//! Spin-pair correlation models: the entangled singlet and the disentangled
//! shared-axis mixture, computed in closed form, by density-operator traces,
//! and by seeded Monte Carlo.

pub mod bell;
pub mod correlations;
pub mod ensemble;
pub mod error;
pub mod net;
pub mod qlinalg;
pub mod states;

pub use bell::{ChshResult, ChshSetting, LhvDistribution, LhvModel};
pub use correlations::{CoincidenceTable, MeasurementSetting, TableNorm};
pub use ensemble::{Estimate, Model, PairEvent, RunConfig, Sampler, Wing};
pub use error::{Error, Result};
pub use qlinalg::{Direction, Side, Sign};
pub use states::{Normalization, PairState};
