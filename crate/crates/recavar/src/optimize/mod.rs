//! Mean-risk portfolio selection as linear programs.
//!
//! The risk side of the mean-risk problem — the largest tail risk over the
//! levels of a [`LevelFunction`] — is linearized through the epigraph trick:
//! one free variable `v^i` per level, one nonnegative shortfall variable
//! `u^i_s` per level and scenario, and a scalar `T` bounding every level's
//! objective from above.  Minimizing `T` over the weight simplex, subject to
//! a floor on expected return, recovers the exact worst-level risk.
//!
//! Three probability models are supported:
//!
//! * **nominal** — the scenario weights are trusted as given;
//! * **mixture** — worst case over convex combinations of finitely many
//!   probability vectors on the same outcomes;
//! * **box** — worst case over additive perturbations `eps` of the scenario
//!   weights with componentwise bands and `sum eps = 0`; the inner maximum
//!   is dualized into per-level variables so the program stays linear.
//!
//! Small instances are solved on the fully assembled program.  Once the
//! level-scenario product grows past [`FULL_LP_LIMIT`], solves switch to an
//! exact working-set refinement (see [`reduction`]) that keeps only the
//! scenarios able to enter a tail, and certifies its answer against the
//! closed-form evaluators before returning.  The refinement shines when tail
//! levels are small; a level with `alpha` near 1 forces the working set to
//! cover almost every scenario.

mod reduction;

use crate::lp::{self, Bounds, LinearProgram, LpError, LpStatus, Relation};
use crate::risk::{average_value_at_risk, DiscreteVariable, LevelFunction, Portfolio, RiskError};
use crate::scenarios::{kahan_sum, ScenarioSet};
use std::fmt;

pub(crate) use reduction::SweepState;

/// Largest `(levels, outcomes)` product solved on the fully assembled
/// program; beyond it the working-set refinement takes over.
pub const FULL_LP_LIMIT: usize = 512;

/// Slack above the certified maximal mean return at which a target is
/// rejected outright instead of being handed to the solver.
const MU_REJECT_SLACK: f64 = 5e-10;

/// Targets inside the rejection band are pulled this far below the certified
/// maximum so boundary solves do not flap between feasible and infeasible.
const MU_CLAMP_MARGIN: f64 = 1e-11;

#[derive(Debug, thiserror::Error)]
pub enum OptimizeError {
    #[error("invalid uncertainty model: {0}")]
    InvalidModel(String),
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Risk(#[from] RiskError),
    /// An optimum came back but failed a cross-check against the direct
    /// evaluators; the result was discarded rather than reported.
    #[error("optimizer self-check failed: {0}")]
    Inconsistent(String),
}

/// Ambiguity about the scenario probabilities.
///
/// All variants share the outcome space of the [`ScenarioSet`] they are used
/// with; [`UncertaintyModel::validate`] checks the compatibility rules.
#[derive(Debug, Clone, PartialEq)]
pub enum UncertaintyModel {
    /// Trust the scenario weights as given.
    Nominal,
    /// Worst case over convex combinations of the listed probability
    /// vectors, each a distribution over the shared outcomes.
    Mixture(Vec<Vec<f64>>),
    /// Worst case over perturbed weights `p_j + eps_j` with
    /// `lower_j <= eps_j <= upper_j` and `sum_j eps_j = 0`.
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl UncertaintyModel {
    /// Symmetric box of radius `c` around the scenario weights.
    pub fn uniform_box(c: f64, outcomes: usize) -> Result<Self, OptimizeError> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(OptimizeError::InvalidModel(format!(
                "box radius must be a nonnegative real, got {c}"
            )));
        }
        Ok(UncertaintyModel::Box { lower: vec![-c; outcomes], upper: vec![c; outcomes] })
    }

    pub fn validate(&self, scen: &ScenarioSet) -> Result<(), OptimizeError> {
        let m = scen.num_outcomes();
        match self {
            UncertaintyModel::Nominal => Ok(()),
            UncertaintyModel::Mixture(vectors) => {
                if vectors.is_empty() {
                    return Err(OptimizeError::InvalidModel(
                        "mixture needs at least one probability vector".into(),
                    ));
                }
                for (j, p) in vectors.iter().enumerate() {
                    if p.len() != m {
                        return Err(OptimizeError::InvalidModel(format!(
                            "mixture vector {j} has {} entries for {m} outcomes",
                            p.len()
                        )));
                    }
                    if p.iter().any(|w| !w.is_finite() || *w < 0.0) {
                        return Err(OptimizeError::InvalidModel(format!(
                            "mixture vector {j} has a negative or non-finite weight"
                        )));
                    }
                    let total = kahan_sum(p);
                    if (total - 1.0).abs() > 1e-12 {
                        return Err(OptimizeError::InvalidModel(format!(
                            "mixture vector {j} sums to {total}, not 1"
                        )));
                    }
                }
                Ok(())
            }
            UncertaintyModel::Box { lower, upper } => {
                if lower.len() != m || upper.len() != m {
                    return Err(OptimizeError::InvalidModel(format!(
                        "box bands have {} / {} entries for {m} outcomes",
                        lower.len(),
                        upper.len()
                    )));
                }
                for j in 0..m {
                    let (lo, hi) = (lower[j], upper[j]);
                    if !lo.is_finite() || !hi.is_finite() {
                        return Err(OptimizeError::InvalidModel(format!(
                            "box band {j} is not finite"
                        )));
                    }
                    if lo > 0.0 || hi < 0.0 {
                        return Err(OptimizeError::InvalidModel(format!(
                            "box band {j} = [{lo}, {hi}] excludes the unperturbed weights"
                        )));
                    }
                    // Perturbed weights must stay probabilities.
                    if scen.probability(j) + lo < -1e-12 {
                        return Err(OptimizeError::InvalidModel(format!(
                            "box band {j} drives weight {} below zero",
                            scen.probability(j)
                        )));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Solve outcome for a single target return.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// The target return exceeds every achievable worst-case mean.
    Infeasible,
    Unbounded,
    /// The solver gave up; carried by frontier points so a sweep survives
    /// isolated failures.
    Failed,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::Failed => "failed",
        })
    }
}

/// Minimizer of the worst-level risk at one target return.
#[derive(Debug, Clone)]
pub struct OptimalPortfolio {
    pub status: SolveStatus,
    /// Present only when `status` is optimal.
    pub weights: Option<Portfolio>,
    /// Minimal worst-level risk of the filtered position; NaN unless optimal.
    pub risk: f64,
    /// Per-level epigraph minimizers, one per level; empty unless optimal.
    pub v_star: Vec<f64>,
}

impl OptimalPortfolio {
    fn without_weights(status: SolveStatus) -> Self {
        OptimalPortfolio { status, weights: None, risk: f64::NAN, v_star: Vec::new() }
    }
}

/// One point of an efficient frontier: minimal risk at target return `mu`.
#[derive(Debug, Clone)]
pub struct FrontierPoint {
    pub mu: f64,
    pub risk: f64,
    pub weights: Option<Portfolio>,
    pub status: SolveStatus,
}

/// Column layout shared by the nominal and mixture programs: `T`, the
/// per-level epigraph variables `v^i`, the weights `x^k`, then one shortfall
/// block `u^i_s` per level.
#[derive(Debug, Clone, Copy)]
pub(crate) struct EpigraphLayout {
    pub levels: usize,
    pub assets: usize,
    pub outcomes: usize,
}

impl EpigraphLayout {
    pub fn t(&self) -> usize {
        0
    }

    pub fn v(&self, level: usize) -> usize {
        1 + level
    }

    pub fn x(&self, asset: usize) -> usize {
        1 + self.levels + asset
    }

    pub fn u(&self, level: usize, outcome: usize) -> usize {
        1 + self.levels + self.assets + level * self.outcomes + outcome
    }

    pub fn num_cols(&self) -> usize {
        1 + self.levels + self.assets + self.levels * self.outcomes
    }

    fn bounds(&self) -> Vec<Bounds> {
        let mut b = vec![Bounds::FREE; 1 + self.levels];
        b.extend(std::iter::repeat(Bounds::NONNEGATIVE).take(self.assets));
        b.extend(std::iter::repeat(Bounds::NONNEGATIVE).take(self.levels * self.outcomes));
        b
    }
}

/// Column layout of the box program.  After the epigraph block come, per
/// level, the dual split `sigma >= 0 >= tau` and the free dual `z` of the
/// inner risk maximum, then the return-side duals `zeta <= 0 <= eta` and the
/// free `w`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BoxLayout {
    pub levels: usize,
    pub assets: usize,
    pub outcomes: usize,
}

impl BoxLayout {
    fn epi(&self) -> EpigraphLayout {
        EpigraphLayout { levels: self.levels, assets: self.assets, outcomes: self.outcomes }
    }

    pub fn t(&self) -> usize {
        0
    }

    pub fn v(&self, level: usize) -> usize {
        self.epi().v(level)
    }

    pub fn x(&self, asset: usize) -> usize {
        self.epi().x(asset)
    }

    pub fn u(&self, level: usize, outcome: usize) -> usize {
        self.epi().u(level, outcome)
    }

    pub fn sigma(&self, level: usize, outcome: usize) -> usize {
        self.epi().num_cols() + level * self.outcomes + outcome
    }

    pub fn tau(&self, level: usize, outcome: usize) -> usize {
        self.epi().num_cols() + self.levels * self.outcomes + level * self.outcomes + outcome
    }

    pub fn z(&self, level: usize) -> usize {
        self.epi().num_cols() + 2 * self.levels * self.outcomes + level
    }

    pub fn zeta(&self, outcome: usize) -> usize {
        self.z(self.levels - 1) + 1 + outcome
    }

    pub fn eta(&self, outcome: usize) -> usize {
        self.zeta(self.outcomes - 1) + 1 + outcome
    }

    pub fn w(&self) -> usize {
        self.eta(self.outcomes - 1) + 1
    }

    pub fn num_cols(&self) -> usize {
        self.w() + 1
    }

    fn bounds(&self) -> Vec<Bounds> {
        let nonpositive = Bounds { lower: f64::NEG_INFINITY, upper: 0.0 };
        let mut b = self.epi().bounds();
        b.extend(std::iter::repeat(Bounds::NONNEGATIVE).take(self.levels * self.outcomes));
        b.extend(std::iter::repeat(nonpositive).take(self.levels * self.outcomes));
        b.extend(std::iter::repeat(Bounds::FREE).take(self.levels));
        b.extend(std::iter::repeat(nonpositive).take(self.outcomes));
        b.extend(std::iter::repeat(Bounds::NONNEGATIVE).take(self.outcomes));
        b.push(Bounds::FREE);
        b
    }
}

fn check_levels(gamma: &LevelFunction) -> Result<(), OptimizeError> {
    for entry in gamma.entries() {
        if entry.alpha <= 0.0 {
            return Err(OptimizeError::Domain(
                "the epigraph program needs every tail level strictly positive".into(),
            ));
        }
    }
    Ok(())
}

fn check_mu(mu: f64) -> Result<(), OptimizeError> {
    if !mu.is_finite() {
        return Err(OptimizeError::Domain(format!("target return must be finite, got {mu}")));
    }
    Ok(())
}

fn objective_for(cols: usize) -> Vec<f64> {
    let mut c = vec![0.0; cols];
    c[0] = 1.0;
    c
}

/// Mean return of every asset under an explicit probability vector.
fn means_under(scen: &ScenarioSet, probs: &[f64]) -> Vec<f64> {
    let k = scen.num_assets();
    let mut means = vec![0.0; k];
    for j in 0..scen.num_outcomes() {
        let p = probs[j];
        if p == 0.0 {
            continue;
        }
        let row = scen.outcome_returns(j);
        for (mean, r) in means.iter_mut().zip(row) {
            *mean += p * r;
        }
    }
    means
}

/// Shared epigraph rows: per-scenario shortfall floors, the mean-return
/// floor(s), and the weight simplex.
fn push_common_rows(
    lp: &mut LinearProgram,
    layout: &EpigraphLayout,
    scen: &ScenarioSet,
    gamma: &LevelFunction,
) -> Result<(), OptimizeError> {
    for (i, entry) in gamma.entries().iter().enumerate() {
        for s in 0..scen.num_outcomes() {
            let mut row = Vec::with_capacity(2 + layout.assets);
            row.push((layout.u(i, s), 1.0));
            row.push((layout.v(i), -1.0));
            for (k, r) in scen.outcome_returns(s).iter().enumerate() {
                row.push((layout.x(k), *r));
            }
            lp.push_row(row, Relation::Ge, entry.recovery * scen.liability(s))?;
        }
    }
    Ok(())
}

fn push_simplex_row(lp: &mut LinearProgram, layout: &EpigraphLayout) -> Result<(), OptimizeError> {
    let row = (0..layout.assets).map(|k| (layout.x(k), 1.0)).collect();
    lp.push_row(row, Relation::Eq, 1.0)?;
    Ok(())
}

/// Epigraph program for the trusted scenario weights: minimize `T` subject
/// to, per level `i`,
///
/// ```text
/// sum_s (p_s / alpha_i) u^i_s - v^i <= T
/// u^i_s >= v^i - sum_k x^k R^k_s + r_i Z_s,   u^i_s >= 0
/// ```
///
/// plus `sum_k x^k E[R^k] >= mu` and the weight simplex.
pub fn build_nominal_lp(
    scen: &ScenarioSet,
    gamma: &LevelFunction,
    mu: f64,
) -> Result<LinearProgram, OptimizeError> {
    check_levels(gamma)?;
    check_mu(mu)?;
    let layout = EpigraphLayout {
        levels: gamma.num_levels(),
        assets: scen.num_assets(),
        outcomes: scen.num_outcomes(),
    };
    let mut lp = LinearProgram::new(objective_for(layout.num_cols()), layout.bounds())?;
    for (i, entry) in gamma.entries().iter().enumerate() {
        let mut row: Vec<(usize, f64)> = vec![(layout.t(), -1.0), (layout.v(i), -1.0)];
        for s in 0..scen.num_outcomes() {
            let p = scen.probability(s);
            if p > 0.0 {
                row.push((layout.u(i, s), p / entry.alpha));
            }
        }
        lp.push_row(row, Relation::Le, 0.0)?;
    }
    push_common_rows(&mut lp, &layout, scen, gamma)?;
    let means = scen.asset_mean_returns();
    lp.push_row(
        means.iter().enumerate().map(|(k, m)| (layout.x(k), *m)).collect(),
        Relation::Ge,
        mu,
    )?;
    push_simplex_row(&mut lp, &layout)?;
    Ok(lp)
}

/// Epigraph program for the worst convex combination of `vectors`.
///
/// The shortfall blocks are shared across measures — at an optimum each
/// `u^i_s` settles to the measure-independent positive part — so only the
/// risk rows (one per level and measure) and mean-return rows (one per
/// measure) multiply.
pub fn build_mixture_lp(
    scen: &ScenarioSet,
    vectors: &[Vec<f64>],
    gamma: &LevelFunction,
    mu: f64,
) -> Result<LinearProgram, OptimizeError> {
    check_levels(gamma)?;
    check_mu(mu)?;
    UncertaintyModel::Mixture(vectors.to_vec()).validate(scen)?;
    let layout = EpigraphLayout {
        levels: gamma.num_levels(),
        assets: scen.num_assets(),
        outcomes: scen.num_outcomes(),
    };
    let mut lp = LinearProgram::new(objective_for(layout.num_cols()), layout.bounds())?;
    for (i, entry) in gamma.entries().iter().enumerate() {
        for probs in vectors {
            let mut row: Vec<(usize, f64)> = vec![(layout.t(), -1.0), (layout.v(i), -1.0)];
            for s in 0..scen.num_outcomes() {
                if probs[s] > 0.0 {
                    row.push((layout.u(i, s), probs[s] / entry.alpha));
                }
            }
            lp.push_row(row, Relation::Le, 0.0)?;
        }
    }
    push_common_rows(&mut lp, &layout, scen, gamma)?;
    for probs in vectors {
        let means = means_under(scen, probs);
        lp.push_row(
            means.iter().enumerate().map(|(k, m)| (layout.x(k), *m)).collect(),
            Relation::Ge,
            mu,
        )?;
    }
    push_simplex_row(&mut lp, &layout)?;
    Ok(lp)
}

/// Epigraph program for the box model, with both inner problems dualized.
///
/// Risk side, per level `i`: the worst perturbed tail expectation
/// `max_eps sum_j (p_j + eps_j) u^i_j` becomes
///
/// ```text
/// (1/alpha_i) [ sum_j p_j u^i_j + sum_j upper_j sigma^i_j + sum_j lower_j tau^i_j ]
/// with   z^i + sigma^i_j + tau^i_j = u^i_j,   sigma^i_j >= 0 >= tau^i_j,
/// ```
///
/// return side: the worst perturbed mean return becomes the value of
/// `sum_k x^k E[R^k] + sum_j (upper_j zeta_j + lower_j eta_j)` over
/// `w + zeta_j + eta_j = sum_k x^k R^k_j`, `zeta_j <= 0 <= eta_j`.
pub fn build_box_lp(
    scen: &ScenarioSet,
    lower: &[f64],
    upper: &[f64],
    gamma: &LevelFunction,
    mu: f64,
) -> Result<LinearProgram, OptimizeError> {
    check_levels(gamma)?;
    check_mu(mu)?;
    UncertaintyModel::Box { lower: lower.to_vec(), upper: upper.to_vec() }.validate(scen)?;
    let layout = BoxLayout {
        levels: gamma.num_levels(),
        assets: scen.num_assets(),
        outcomes: scen.num_outcomes(),
    };
    let m = scen.num_outcomes();
    let mut lp = LinearProgram::new(objective_for(layout.num_cols()), layout.bounds())?;
    for (i, entry) in gamma.entries().iter().enumerate() {
        for j in 0..m {
            let mut row = Vec::with_capacity(2 + layout.assets);
            row.push((layout.u(i, j), 1.0));
            row.push((layout.v(i), -1.0));
            for (k, r) in scen.outcome_returns(j).iter().enumerate() {
                row.push((layout.x(k), *r));
            }
            lp.push_row(row, Relation::Ge, entry.recovery * scen.liability(j))?;
        }
        for j in 0..m {
            lp.push_row(
                vec![
                    (layout.z(i), 1.0),
                    (layout.sigma(i, j), 1.0),
                    (layout.tau(i, j), 1.0),
                    (layout.u(i, j), -1.0),
                ],
                Relation::Eq,
                0.0,
            )?;
        }
        let mut risk: Vec<(usize, f64)> = vec![(layout.t(), -1.0), (layout.v(i), -1.0)];
        for j in 0..m {
            if scen.probability(j) > 0.0 {
                risk.push((layout.u(i, j), scen.probability(j) / entry.alpha));
            }
            if upper[j] != 0.0 {
                risk.push((layout.sigma(i, j), upper[j] / entry.alpha));
            }
            if lower[j] != 0.0 {
                risk.push((layout.tau(i, j), lower[j] / entry.alpha));
            }
        }
        lp.push_row(risk, Relation::Le, 0.0)?;
    }
    for j in 0..m {
        let mut row = vec![(layout.w(), 1.0), (layout.zeta(j), 1.0), (layout.eta(j), 1.0)];
        for (k, r) in scen.outcome_returns(j).iter().enumerate() {
            row.push((layout.x(k), -*r));
        }
        lp.push_row(row, Relation::Eq, 0.0)?;
    }
    let means = scen.asset_mean_returns();
    let mut ret: Vec<(usize, f64)> =
        means.iter().enumerate().map(|(k, m)| (layout.x(k), *m)).collect();
    for j in 0..m {
        if upper[j] != 0.0 {
            ret.push((layout.zeta(j), upper[j]));
        }
        if lower[j] != 0.0 {
            ret.push((layout.eta(j), lower[j]));
        }
    }
    lp.push_row(ret, Relation::Ge, mu)?;
    let simplex = (0..layout.assets).map(|k| (layout.x(k), 1.0)).collect();
    lp.push_row(simplex, Relation::Eq, 1.0)?;
    Ok(lp)
}

fn check_band(lower: &[f64], upper: &[f64]) -> Result<(), OptimizeError> {
    if lower.len() != upper.len() || lower.is_empty() {
        return Err(OptimizeError::Domain(format!(
            "perturbation bands must have equal positive length, got {} and {}",
            lower.len(),
            upper.len()
        )));
    }
    for j in 0..lower.len() {
        if !lower[j].is_finite() || !upper[j].is_finite() || lower[j] > upper[j] {
            return Err(OptimizeError::Domain(format!(
                "perturbation band {j} = [{}, {}] is empty or not finite",
                lower[j], upper[j]
            )));
        }
    }
    if kahan_sum(lower) > 0.0 || kahan_sum(upper) < 0.0 {
        return Err(OptimizeError::Domain(
            "no zero-sum perturbation fits between the bands".into(),
        ));
    }
    Ok(())
}

/// Exact value of `max { sum_j eps_j u_j : lower <= eps <= upper, sum eps = 0 }`.
///
/// The one-dimensional dual `min_z sum_j [upper_j (u_j - z)_+ - lower_j (z - u_j)_+]`
/// is piecewise linear with breakpoints at the `u_j`, sloping down on the far
/// left and up on the far right, so scanning the breakpoints is exact.
pub fn worst_case_inner_value(
    u: &[f64],
    lower: &[f64],
    upper: &[f64],
) -> Result<f64, OptimizeError> {
    check_band(lower, upper)?;
    if u.len() != lower.len() {
        return Err(OptimizeError::Domain(format!(
            "{} payoffs for {} perturbation bands",
            u.len(),
            lower.len()
        )));
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(OptimizeError::Domain("payoff vector must be finite".into()));
    }
    Ok(breakpoint_scan(u, lower, upper).0)
}

/// Shared breakpoint scan: returns the dual minimum and the index (into the
/// ascending order of `u`) of a minimizing breakpoint.
fn breakpoint_scan(u: &[f64], lower: &[f64], upper: &[f64]) -> (f64, usize) {
    let m = u.len();
    let mut ord: Vec<usize> = (0..m).collect();
    ord.sort_by(|&a, &b| u[a].partial_cmp(&u[b]).unwrap().then(a.cmp(&b)));

    // above[k] = sum over sorted positions >= k of upper_j * (u_j, 1);
    // below accumulates the same for lower_j as the scan walks up.
    let mut above_u = vec![0.0; m + 1];
    let mut above_1 = vec![0.0; m + 1];
    for k in (0..m).rev() {
        let j = ord[k];
        above_u[k] = above_u[k + 1] + upper[j] * u[j];
        above_1[k] = above_1[k + 1] + upper[j];
    }
    let mut below_u = 0.0;
    let mut below_1 = 0.0;
    let mut best = f64::INFINITY;
    let mut best_k = 0;
    for k in 0..m {
        let z = u[ord[k]];
        // Ties contribute zero to either side, so splitting at the sorted
        // index is as good as splitting at the value.
        let g = (above_u[k + 1] - z * above_1[k + 1]) + (below_u - z * below_1);
        if g < best {
            best = g;
            best_k = k;
        }
        let j = ord[k];
        below_u += lower[j] * u[j];
        below_1 += lower[j];
    }
    (best, best_k)
}

/// A maximizing perturbation for [`worst_case_inner_value`].
///
/// Substituting `eps = lower + t` turns the inner problem into a continuous
/// knapsack: spend the zero-sum budget `-sum lower` on the band widths in
/// descending payoff order.  The greedy fill is exactly optimal and needs no
/// breakpoint-tie detection; the reported value still comes from the
/// independent dual scan, so the pair doubles as a primal-dual agreement
/// check for the callers.
pub(crate) fn worst_case_inner_argmax(
    u: &[f64],
    lower: &[f64],
    upper: &[f64],
) -> Result<(f64, Vec<f64>), OptimizeError> {
    check_band(lower, upper)?;
    if u.len() != lower.len() {
        return Err(OptimizeError::Domain(format!(
            "{} payoffs for {} perturbation bands",
            u.len(),
            lower.len()
        )));
    }
    let (value, _) = breakpoint_scan(u, lower, upper);
    let m = u.len();
    let mut ord: Vec<usize> = (0..m).collect();
    ord.sort_by(|&a, &b| u[b].partial_cmp(&u[a]).unwrap().then(a.cmp(&b)));
    let mut eps = lower.to_vec();
    let mut budget = -kahan_sum(lower);
    for &j in &ord {
        if budget <= 0.0 {
            break;
        }
        let take = (upper[j] - lower[j]).min(budget);
        eps[j] += take;
        budget -= take;
    }
    Ok((value, eps))
}

/// Worst-case mean return of the weights under the model, exact per model.
pub(crate) fn worst_case_mean(
    scen: &ScenarioSet,
    model: &UncertaintyModel,
    weights: &[f64],
) -> Result<f64, OptimizeError> {
    let rets = scen.portfolio_returns(weights);
    match model {
        UncertaintyModel::Nominal => {
            Ok(kahan_sum(&rets.iter().zip(scen.probabilities()).map(|(r, p)| r * p).collect::<Vec<_>>()))
        }
        UncertaintyModel::Mixture(vectors) => {
            let mut worst = f64::INFINITY;
            for probs in vectors {
                let mean =
                    kahan_sum(&rets.iter().zip(probs).map(|(r, p)| r * p).collect::<Vec<_>>());
                worst = worst.min(mean);
            }
            Ok(worst)
        }
        UncertaintyModel::Box { lower, upper } => {
            let base = kahan_sum(
                &rets.iter().zip(scen.probabilities()).map(|(r, p)| r * p).collect::<Vec<_>>(),
            );
            let negated: Vec<f64> = rets.iter().map(|r| -r).collect();
            // min_eps sum eps_j y_j = -max_eps sum eps_j (-y_j)
            Ok(base - worst_case_inner_value(&negated, lower, upper)?)
        }
    }
}

/// Interval of achievable worst-case mean returns over the weight simplex.
///
/// The worst-case mean is concave in the weights under every model, so the
/// minimum sits at a simplex vertex; the maximum needs a small linear
/// program (mixture) or a cutting-plane loop on exact inner minima (box).
pub fn feasible_mu_range(
    scen: &ScenarioSet,
    model: &UncertaintyModel,
) -> Result<(f64, f64), OptimizeError> {
    model.validate(scen)?;
    let k = scen.num_assets();
    match model {
        UncertaintyModel::Nominal => {
            let means = scen.asset_mean_returns();
            let lo = means.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            Ok((lo, hi))
        }
        UncertaintyModel::Mixture(vectors) => {
            let per_measure: Vec<Vec<f64>> =
                vectors.iter().map(|p| means_under(scen, p)).collect();
            let mut lo = f64::INFINITY;
            for means in &per_measure {
                for m in means {
                    lo = lo.min(*m);
                }
            }
            // max over the simplex of min_j x . means_j
            let mut bounds = vec![Bounds::FREE];
            bounds.extend(std::iter::repeat(Bounds::NONNEGATIVE).take(k));
            let mut c = vec![0.0; k + 1];
            c[0] = -1.0;
            let mut master = LinearProgram::new(c, bounds)?;
            for means in &per_measure {
                let mut row = vec![(0, 1.0)];
                row.extend(means.iter().enumerate().map(|(i, m)| (1 + i, -*m)));
                master.push_row(row, Relation::Le, 0.0)?;
            }
            master.push_row((0..k).map(|i| (1 + i, 1.0)).collect(), Relation::Eq, 1.0)?;
            let sol = lp::solve(&master)?;
            if sol.status != LpStatus::Optimal {
                return Err(OptimizeError::Inconsistent(
                    "the achievable-return program is always solvable, yet the solver disagreed"
                        .into(),
                ));
            }
            Ok((lo, sol.x[0]))
        }
        UncertaintyModel::Box { lower, upper } => {
            let means = scen.asset_mean_returns();
            let mut lo = f64::INFINITY;
            for asset in 0..k {
                let col: Vec<f64> = (0..scen.num_outcomes())
                    .map(|j| -scen.asset_return(j, asset))
                    .collect();
                let w = means[asset] - worst_case_inner_value(&col, lower, upper)?;
                lo = lo.min(w);
            }
            let hi = box_max_mean(scen, model, &means)?;
            Ok((lo, hi))
        }
    }
}

/// Cutting-plane maximization of the concave worst-case mean over the
/// simplex.  Each cut is the exact linearization at a worst perturbation, so
/// the loop terminates on a vertex of the perturbation polytope.
fn box_max_mean(
    scen: &ScenarioSet,
    model: &UncertaintyModel,
    means: &[f64],
) -> Result<f64, OptimizeError> {
    let (lower, upper) = match model {
        UncertaintyModel::Box { lower, upper } => (lower, upper),
        _ => unreachable!("caller dispatches on the box variant"),
    };
    let k = scen.num_assets();
    let mut cuts: Vec<Vec<f64>> = vec![means.to_vec()];
    let mut best = f64::NEG_INFINITY;
    for _ in 0..200 {
        let mut bounds = vec![Bounds::FREE];
        bounds.extend(std::iter::repeat(Bounds::NONNEGATIVE).take(k));
        let mut c = vec![0.0; k + 1];
        c[0] = -1.0;
        let mut master = LinearProgram::new(c, bounds)?;
        for cut in &cuts {
            let mut row = vec![(0, 1.0)];
            row.extend(cut.iter().enumerate().map(|(i, m)| (1 + i, -*m)));
            master.push_row(row, Relation::Le, 0.0)?;
        }
        master.push_row((0..k).map(|i| (1 + i, 1.0)).collect(), Relation::Eq, 1.0)?;
        let sol = lp::solve(&master)?;
        if sol.status != LpStatus::Optimal {
            return Err(OptimizeError::Inconsistent(
                "the achievable-return program is always solvable, yet the solver disagreed"
                    .into(),
            ));
        }
        let upper_bound = sol.x[0];
        let x_hat = &sol.x[1..=k];
        let value = worst_case_mean(scen, model, x_hat)?;
        best = best.max(value);
        if upper_bound - best <= 1e-12 * upper_bound.abs().max(1.0) {
            return Ok(best);
        }
        let rets = scen.portfolio_returns(x_hat);
        let negated: Vec<f64> = rets.iter().map(|r| -r).collect();
        let (_, eps_neg) = worst_case_inner_argmax(&negated, lower, upper)?;
        // eps_neg maximizes against -y, i.e. minimizes the mean return.
        let cut: Vec<f64> = (0..k)
            .map(|asset| {
                let mut c = 0.0;
                for j in 0..scen.num_outcomes() {
                    c += (scen.probability(j) + eps_neg[j]) * scen.asset_return(j, asset);
                }
                c
            })
            .collect();
        cuts.push(cut);
    }
    Err(OptimizeError::Inconsistent(
        "worst-case mean maximization failed to settle on a perturbation vertex".into(),
    ))
}

/// Worst-level risk of the filtered position at fixed weights, evaluated
/// directly (no linear programming) under the given model.
pub(crate) fn risk_at(
    scen: &ScenarioSet,
    gamma: &LevelFunction,
    model: &UncertaintyModel,
    weights: &[f64],
) -> Result<f64, OptimizeError> {
    let rets = scen.portfolio_returns(weights);
    let mut worst = f64::NEG_INFINITY;
    for entry in gamma.entries() {
        let y: Vec<f64> = (0..scen.num_outcomes())
            .map(|j| rets[j] - entry.recovery * scen.liability(j))
            .collect();
        let level_risk = match model {
            UncertaintyModel::Nominal => {
                let var = DiscreteVariable::new(y, scen.probabilities().to_vec())?;
                average_value_at_risk(&var, entry.alpha)?
            }
            UncertaintyModel::Mixture(vectors) => mixture_level_risk(vectors, entry.alpha, &y).0,
            UncertaintyModel::Box { lower, upper } => {
                box_level_risk(scen, lower, upper, entry.alpha, &y).0
            }
        };
        worst = worst.max(level_risk);
    }
    Ok(worst)
}

/// Worst-case tail risk of the payoffs `y` at one level under the box model,
/// together with the minimizing epigraph point.
///
/// The objective `max_eps Psi` is convex piecewise linear in `v` with kinks
/// only at the payoffs (perturbed weights stay nonnegative), so the scan
/// walks the sorted payoffs and stops at the first strict increase.
pub(crate) fn box_level_risk(
    scen: &ScenarioSet,
    lower: &[f64],
    upper: &[f64],
    alpha: f64,
    y: &[f64],
) -> (f64, f64) {
    let m = y.len();
    let mut ord: Vec<usize> = (0..m).collect();
    ord.sort_by(|&a, &b| y[a].partial_cmp(&y[b]).unwrap().then(a.cmp(&b)));
    let mut best = f64::INFINITY;
    let mut best_v = y[ord[0]];
    let mut prev = f64::INFINITY;
    let mut shortfall = vec![0.0; m];
    for &cand in &ord {
        let v = y[cand];
        for j in 0..m {
            shortfall[j] = (v - y[j]).max(0.0);
        }
        let mut expect = 0.0;
        for j in 0..m {
            expect += scen.probability(j) * shortfall[j];
        }
        let inner = breakpoint_scan(&shortfall, lower, upper).0;
        let value = (expect + inner) / alpha - v;
        if value < best {
            best = value;
            best_v = v;
        }
        if value > prev {
            // Convexity in v: once the breakpoint values rise they stay up.
            break;
        }
        prev = value;
    }
    (best, best_v)
}

/// Worst-case tail risk of the payoffs `y` at one level over every convex
/// combination of the candidate probability vectors, together with the
/// minimizing epigraph point.
///
/// The tail expectation is linear in the mixture weights, so the worst
/// combination and the epigraph minimum swap; the shared objective
/// `max_c Psi_c(v)` is convex piecewise linear with kinks only at the
/// payoffs, and the scan over sorted payoffs is exact.  The worst mixture
/// need not be one of the candidates themselves.
pub(crate) fn mixture_level_risk(vectors: &[Vec<f64>], alpha: f64, y: &[f64]) -> (f64, f64) {
    let m = y.len();
    let mut ord: Vec<usize> = (0..m).collect();
    ord.sort_by(|&a, &b| y[a].partial_cmp(&y[b]).unwrap().then(a.cmp(&b)));
    let mut best = f64::INFINITY;
    let mut best_v = y[ord[0]];
    // Per candidate: cumulative probability of the payoffs already passed
    // and the tail expectation E[(v - Y)^+] advanced kink to kink.
    let mut mass = vec![0.0; vectors.len()];
    let mut expect = vec![0.0; vectors.len()];
    let mut prev_v = y[ord[0]];
    for &s in &ord {
        let v = y[s];
        let mut value = f64::NEG_INFINITY;
        for c in 0..vectors.len() {
            expect[c] += mass[c] * (v - prev_v);
            value = value.max(expect[c] / alpha - v);
        }
        prev_v = v;
        for (c, probs) in vectors.iter().enumerate() {
            mass[c] += probs[s];
        }
        if value < best {
            best = value;
            best_v = v;
        }
    }
    (best, best_v)
}

/// Worst-level risk of the given weights under the model, evaluated
/// directly on the scenario set (no linear programming involved).
pub fn portfolio_risk(
    scen: &ScenarioSet,
    gamma: &LevelFunction,
    model: &UncertaintyModel,
    weights: &[f64],
) -> Result<f64, OptimizeError> {
    check_levels(gamma)?;
    model.validate(scen)?;
    if weights.len() != scen.num_assets() {
        return Err(OptimizeError::InvalidModel(format!(
            "{} weights for {} assets",
            weights.len(),
            scen.num_assets()
        )));
    }
    risk_at(scen, gamma, model, weights)
}

/// Worst-case mean return of the given weights over the model's measures.
pub fn portfolio_worst_case_mean(
    scen: &ScenarioSet,
    model: &UncertaintyModel,
    weights: &[f64],
) -> Result<f64, OptimizeError> {
    model.validate(scen)?;
    if weights.len() != scen.num_assets() {
        return Err(OptimizeError::InvalidModel(format!(
            "{} weights for {} assets",
            weights.len(),
            scen.num_assets()
        )));
    }
    worst_case_mean(scen, model, weights)
}

/// Minimize the worst-level risk at target return `mu` under `model`.
///
/// Instances with `levels * outcomes` at most [`FULL_LP_LIMIT`] are solved
/// on the assembled program; larger ones go through the working-set
/// refinement.  Either way the reported risk is certified against the direct
/// evaluators before it is returned.
pub fn solve_mean_risk(
    scen: &ScenarioSet,
    gamma: &LevelFunction,
    mu: f64,
    model: &UncertaintyModel,
) -> Result<OptimalPortfolio, OptimizeError> {
    check_levels(gamma)?;
    check_mu(mu)?;
    model.validate(scen)?;
    let (_, mu_max) = feasible_mu_range(scen, model)?;
    let mut state = SweepState::new(gamma.num_levels());
    solve_prepared(scen, gamma, mu, model, mu_max, &mut state)
}

/// Solve one target with the feasibility ceiling already known and the
/// working-set state supplied by the caller (the frontier sweep reuses it).
fn solve_prepared(
    scen: &ScenarioSet,
    gamma: &LevelFunction,
    mu: f64,
    model: &UncertaintyModel,
    mu_max: f64,
    state: &mut SweepState,
) -> Result<OptimalPortfolio, OptimizeError> {
    if mu > mu_max + MU_REJECT_SLACK {
        return Ok(OptimalPortfolio::without_weights(SolveStatus::Infeasible));
    }
    let mu_eff = mu.min(mu_max - MU_CLAMP_MARGIN);
    // A zero-width box prices no perturbation: solve it on the nominal
    // program rather than dragging degenerate dual blocks through the
    // solver.  The direct evaluators already coincide exactly on the two
    // models, so every downstream certificate is unaffected.
    let nominal = UncertaintyModel::Nominal;
    let model = match model {
        UncertaintyModel::Box { lower, upper }
            if lower.iter().all(|&l| l == 0.0) && upper.iter().all(|&u| u == 0.0) =>
        {
            &nominal
        }
        other => other,
    };
    let work = gamma.num_levels() * scen.num_outcomes();
    if work <= FULL_LP_LIMIT {
        solve_full(scen, gamma, mu_eff, model)
    } else {
        reduction::solve_reduced(scen, gamma, mu_eff, model, state)
    }
}

fn solve_full(
    scen: &ScenarioSet,
    gamma: &LevelFunction,
    mu: f64,
    model: &UncertaintyModel,
) -> Result<OptimalPortfolio, OptimizeError> {
    let program = match model {
        UncertaintyModel::Nominal => build_nominal_lp(scen, gamma, mu)?,
        UncertaintyModel::Mixture(vectors) => build_mixture_lp(scen, vectors, gamma, mu)?,
        UncertaintyModel::Box { lower, upper } => build_box_lp(scen, lower, upper, gamma, mu)?,
    };
    let sol = lp::solve(&program)?;
    match sol.status {
        LpStatus::Infeasible => Ok(OptimalPortfolio::without_weights(SolveStatus::Infeasible)),
        LpStatus::Unbounded => Ok(OptimalPortfolio::without_weights(SolveStatus::Unbounded)),
        LpStatus::Optimal => {
            let levels = gamma.num_levels();
            let k = scen.num_assets();
            let raw = &sol.x[1 + levels..1 + levels + k];
            let weights = normalized_weights(raw)?;
            let v_star = sol.x[1..=levels].to_vec();
            let risk = sol.x[0];
            let direct = risk_at(scen, gamma, model, weights.weights())?;
            if (direct - risk).abs() > 1e-6 {
                return Err(OptimizeError::Inconsistent(format!(
                    "program optimum {risk} disagrees with the direct evaluation {direct}"
                )));
            }
            Ok(OptimalPortfolio {
                status: SolveStatus::Optimal,
                weights: Some(weights),
                risk,
                v_star,
            })
        }
    }
}

/// Clamp stray negative dust and rescale so the weights sum to one exactly.
pub(crate) fn normalized_weights(raw: &[f64]) -> Result<Portfolio, OptimizeError> {
    let mut w: Vec<f64> = raw.iter().map(|v| v.max(0.0)).collect();
    let total = kahan_sum(&w);
    if !(total > 0.0) {
        return Err(OptimizeError::Inconsistent(
            "solver returned weights with no mass on the simplex".into(),
        ));
    }
    for v in &mut w {
        *v /= total;
    }
    Ok(Portfolio::new(w)?)
}

/// Minimal worst-level risk across a grid of target returns.
///
/// Points are reported in grid order.  A solver failure at one target is
/// recorded on that point and the sweep continues; shared working sets carry
/// over between targets, which is what makes long sweeps at scale cheap.
pub fn efficient_frontier(
    scen: &ScenarioSet,
    gamma: &LevelFunction,
    model: &UncertaintyModel,
    mu_grid: &[f64],
) -> Result<Vec<FrontierPoint>, OptimizeError> {
    check_levels(gamma)?;
    model.validate(scen)?;
    for mu in mu_grid {
        check_mu(*mu)?;
    }
    let (_, mu_max) = feasible_mu_range(scen, model)?;
    let mut state = SweepState::new(gamma.num_levels());
    let mut points = Vec::with_capacity(mu_grid.len());
    for &mu in mu_grid {
        let point = match solve_prepared(scen, gamma, mu, model, mu_max, &mut state) {
            Ok(opt) => FrontierPoint {
                mu,
                risk: opt.risk,
                weights: opt.weights,
                status: opt.status,
            },
            Err(_) => {
                FrontierPoint {
                    mu,
                    risk: f64::NAN,
                    weights: None,
                    status: SolveStatus::Failed,
                }
            }
        };
        points.push(point);
    }
    Ok(points)
}

#[cfg(test)]
mod tests;
