//! Forward-backward-forward cubic flux, its uniformly parabolic surrogates and
//! the laminate construction of oscillating weak solutions.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod branch;
pub mod config;
pub mod error;
pub mod flux;
pub mod grid;
pub mod laminate;
pub mod modified_flux;
pub mod poly;
pub mod scenario;
pub mod solver;
pub mod subsolution;
pub mod weak_form;

pub use branch::{BranchTable, Side};
pub use config::{InitialDatum, ScenarioConfig};
pub use error::{Error, Result};
pub use flux::{CriticalData, FluxParams, ModelType, RegimeClass};
pub use grid::{Grid, SpaceTimeField};
pub use laminate::{construct, distinct_solutions, LaminateSolution, PiecewiseField};
pub use modified_flux::{FluxKind, ModifiedFlux, OneSide};
pub use scenario::{
    classify_case, plan_epochs, run_scenario, CaseLabel, Depth, EpochPlan, ScenarioOutcome, ScenarioReport,
};
pub use solver::{run_until_condition, solve, DtPolicy, SolverDiagnostics, SolverOptions, Stepping};
pub use subsolution::{build_subsolution, check_strict_subsolution, compute_q, QRegion, SubsolutionFields, Walls};
pub use weak_form::{residual_catalog, weak_residual, Profile, TestFunction, VerificationReport};
