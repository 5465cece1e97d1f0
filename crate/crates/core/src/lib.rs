//! Covariate adjustment on discrete distributions: exact and plug-in adjustment
//! estimates, approximate conditional independence testing, and level-wise searches
//! for small adjustment sets.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ci;
pub mod data;
pub mod dist;
pub mod error;
pub mod estimators;
pub mod gallery;
pub mod io;
pub mod rng;
pub mod search;

pub use ci::{CiQuery, CiTester, Evidence, Verdict};
pub use data::{Provenance, SampleDataset};
pub use dist::{Event, JointDistribution, VariableSpec};
pub use error::{Error, Result};
pub use estimators::{AdjustmentQuery, EstimateReport, SamplingMode};
pub use gallery::GallerySpec;
pub use search::{Decision, DecisionInputs, SearchReport};
