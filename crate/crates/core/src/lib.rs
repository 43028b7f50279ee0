//! Bohr–Sommerfeld spectra of one-degree-of-freedom Hamiltonians computed
//! from phase-space geometry, with a finite-difference Schrödinger oracle to
//! check them against.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod action;
pub mod compare;
pub mod error;
pub mod interp;
pub mod oracle;
pub mod portrait;
mod rk;
pub mod spectrum;
pub mod symbol;

pub use error::{EbkError, Result};
pub use portrait::{
    build_families, component_count, seed_components, trace_component, ComponentFamily,
    LevelComponent, PortraitOptions, TraceOptions,
};
pub use symbol::{
    compact_preimage_box, regularity_report, EnergyWindow, Potential, Rect, RegularityReport,
    SymbolSpec,
};
pub use action::{
    build_action_table, green_area, invert_action, loop_action, maslov_index, ActionSample,
    ActionTable, MaslovIndex,
};
pub use interp::MonotoneCubic;
pub use oracle::{
    ball_multiplicity, count_below, discretize, domain_auto, eigenvalues_in, eigenvector,
    node_count, richardson_eigenvalues, DomainChoice, EigenResult, OracleSpectrum,
    TridiagonalOperator,
};
pub use spectrum::{
    branch_energy, doublet_scan, exact_weyl_count, merged_spectrum, nearest_level,
    quantize_family, Branch, BranchPoint, BsEntry, BsSpectrum, Cluster, WeylCount,
};
pub use compare::{
    convergence_study, match_spectra, verify_weyl, ConvergenceReport, MatchReport, MatchedPair,
    WeylCheck,
};
