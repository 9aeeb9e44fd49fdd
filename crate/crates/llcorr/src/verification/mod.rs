//! Independent oracles: the free-fermion determinant, the continuous Lagrange series, and the
//! contour-deformation identity for the A functional.

mod free_fermion;
mod identity;
mod lagrange;

pub use free_fermion::{
    ff_compare, ff_cutoff, ff_determinant, ff_determinant_on, ff_panels, fit_decay, free_fermion_study, AsymptoticTerm,
    ComparisonRow, DecayFit, FfDeterminant, OracleStudy, MIN_NODES_PER_PERIOD,
};
pub use identity::{contour_identity_check, IdentityCheck, PoleZeroPair, SyntheticNu};
pub use lagrange::{contraction_margin, lagrange_closed, lagrange_direct, lagrange_terms, Entire, LagrangeClosed, ToyLagrangeSpec};
