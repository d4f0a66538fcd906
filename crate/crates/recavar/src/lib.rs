//! Scenario-based tail risk measurement and portfolio selection.
//!
//! The crate is organized around discrete probability spaces: a finite set of
//! joint outcomes for asset returns and a liability, with one probability per
//! outcome. On top of that it provides
//!
//! - [`risk`]: Value at Risk, Average Value at Risk, and the recovery-aware
//!   extension RecAV@R, which grades a position `X` against partial-recovery
//!   thresholds of a liability `Y` through a piecewise-constant level
//!   function. All evaluators are exact on discrete laws (tail sums with atom
//!   splitting), not sample approximations.
//! - [`scenarios`]: scenario containers, seeded Monte Carlo sampling with
//!   normal / Student-t marginals glued by a t-copula, and a plain-text
//!   scenario file format that round-trips bit-exactly.
//! - [`lp`]: a self-contained dense two-phase primal simplex solver for the
//!   linear programs this crate generates.
//! - [`optimize`]: epigraph linear programs for mean-risk portfolio selection
//!   under RecAV@R — at the nominal measure, under mixture ambiguity, and
//!   under box-bounded measure perturbations — plus feasibility ranges and
//!   efficient frontiers.
//! - [`verify`]: independent oracles (brute-force integration, golden-section
//!   and breakpoint minimization, closed forms) used to cross-check the fast
//!   paths. Production code never calls these; tests and the `verify` CLI
//!   command do.
//!
//! Sign convention: risk measures are reported as capital requirements, so a
//! position with AV@R of `0.02` needs 2% of notional in additional capital,
//! and acceptable positions have risk `<= 0`.

pub mod lp;
pub mod optimize;
pub mod risk;
pub mod scenarios;
pub mod verify;

pub use risk::{DiscreteVariable, LevelFunction, Portfolio};
pub use scenarios::ScenarioSet;
