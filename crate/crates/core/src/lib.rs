//! Numerical toolkit for Toeplitz operators with matrix-valued symbols on
//! weighted Bergman spaces of the unit ball in ℂ¹ and ℂ².

pub mod basis;
pub mod berezin;
pub mod cache;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod norms;
pub mod quadrature;
pub mod symbols;
pub mod toeplitz;

pub use basis::{enumerate_basis, monomial_norm, multi_indices, uz_matrix, BasisTable, MultiIndex};
pub use berezin::{
    berezin_field, berezin_operator, berezin_symbol, berezin_symbol_auto, bloch_norm, bmo1_seminorm,
    default_z_grid, tail_decay_profile, z_grid, BerezinField, BmoEstimate,
};
pub use diagnostics::{
    boundary_decay, essential_norm_proxy, fourfold_report, singular_value_profile,
    sufficiently_localized_functional, CompactnessReport, FourfoldConfig, Thresholds, Verdict,
};
pub use error::{Error, Result};
pub use geometry::{
    kernel, mobius, normalized_kernel, unimodular_gamma, MobiusMap, Point, SpaceParams,
};
pub use norms::{norm_intersection, opnorm_2to1, opnorm_2to2, NormEstimate, NormKind, SearchConfig};
pub use quadrature::{
    build_rule, build_rule_with_breaks, integrate, integrate_matrix, integrate_real,
    QuadratureRule, RulePolicy,
};
pub use symbols::{adjoint_symbol, corner_truncate, tail_truncate, ScalarFn, Symbol};
pub use toeplitz::{
    adjoint, apply_to_kernel, assemble, assemble_auto, compose, conjugate, truncation_matrices,
    TruncatedOperator,
};

pub use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64;
