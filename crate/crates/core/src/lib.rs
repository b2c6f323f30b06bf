//! Raw-data modelling for flow-guided in-body nanoscale localization.
//!
//! Nanodevices circulate through the bloodstream one lap at a time, each lap
//! passing through one body region and back through the heart, where they
//! try to report to an on-body anchor. A report is the pair `(t, b)`: the
//! time since the previous successful report and whether the event was
//! detected in between.
//!
//! * [`config`]: region maps, model parameters, scenarios.
//! * [`analytic`]: the exact distribution of `(t, b)`.
//! * [`sim`]: a Monte Carlo simulator producing matching datasets.
//! * [`stats`]: metrics comparing datasets with each other or the model.

pub mod analytic;
pub mod config;
pub mod sim;
pub mod stats;

pub use analytic::{enumerate_pmf, LapVector, ModelError, Pmf, PmfAtom};
pub use config::{ModelParams, Region, RegionMap, Scenario};
pub use sim::{simulate_population, Dataset, RawDatum, SimError, SimSeed};
pub use stats::{ComparisonReport, StatsError};
