//! Exact working-set refinement for large scenario sets.
//!
//! Only scenarios that can enter a tail influence the optimum, so the master
//! program keeps, per level, a small working set of candidate tail scenarios
//! and drops the rest.  Dropping a scenario's shortfall terms can only relax
//! the program (they are nonnegative), and under the box model the absent
//! dual splits are replaced by aggregate budget columns priced at exactly
//! their best achievable rate, so every master optimum is a lower bound.
//!
//! After each master solve the candidate weights are priced against the
//! direct evaluators in [`super`]: if the exact worst-level risk at the
//! returned weights meets the master bound (and, under the box model, the
//! exact worst-case mean return meets the target), the bound is tight and
//! the answer is certified.  Otherwise the scenarios that the exact tail
//! actually touches are pulled into the working sets — and, on the return
//! side, a cut at the exact worst perturbation is added — and the master is
//! solved again.  Working sets and cuts persist across the targets of a
//! frontier sweep, so later points usually certify on the first try.

use super::{
    box_level_risk, mixture_level_risk, normalized_weights, worst_case_inner_argmax,
    worst_case_mean, OptimalPortfolio, OptimizeError, SolveStatus, UncertaintyModel,
};
use crate::lp::{self, Bounds, LinearProgram, LpStatus, Relation};
use crate::risk::LevelFunction;
use crate::scenarios::ScenarioSet;

/// Gap accepted between the master bound and the direct evaluation.
const CERT_TOL: f64 = 1e-9;
/// Shortfall accepted on the exact worst-case mean return.
const RET_TOL: f64 = 1e-9;
/// Looser fallback thresholds once the working sets cannot grow further.
const STALL_TOL: f64 = 1e-7;
/// Scenarios admitted per level and round.
const BATCH: usize = 64;
/// Scenarios forced in per level when a round makes no progress.
const WIDEN: usize = 32;
/// Floor on the seeded working-set size.
const MIN_SEED: usize = 32;
const MAX_ROUNDS: usize = 400;

/// Refinement state shared across the targets of one sweep.
pub(crate) struct SweepState {
    members: Vec<Vec<usize>>,
    mask: Vec<Vec<bool>>,
    /// Return-side cut coefficients (mean returns at worst perturbations).
    cuts: Vec<Vec<f64>>,
    /// Multiplies the tail mass covered by the seed; doubled whenever a
    /// master comes back unbounded, which signals an undersized set.
    mass_factor: f64,
    seeded: bool,
}

impl SweepState {
    pub fn new(levels: usize) -> Self {
        SweepState {
            members: vec![Vec::new(); levels],
            mask: vec![Vec::new(); levels],
            cuts: Vec::new(),
            mass_factor: 2.5,
            seeded: false,
        }
    }

    fn admit(&mut self, level: usize, scenario: usize) -> bool {
        if self.mask[level][scenario] {
            return false;
        }
        self.mask[level][scenario] = true;
        self.members[level].push(scenario);
        true
    }
}

fn argsort(values: &[f64]) -> Vec<usize> {
    let mut ord: Vec<usize> = (0..values.len()).collect();
    ord.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
    ord
}

/// Payoffs of the filtered position at one level.
fn level_payoffs(scen: &ScenarioSet, rets: &[f64], recovery: f64) -> Vec<f64> {
    (0..scen.num_outcomes()).map(|j| rets[j] - recovery * scen.liability(j)).collect()
}

/// Value at the tail boundary: the smallest payoff whose cumulative
/// probability reaches `alpha`.
fn tail_threshold(y: &[f64], probs: &[f64], alpha: f64) -> f64 {
    let ord = argsort(y);
    let mut cum = 0.0;
    for &j in &ord {
        cum += probs[j];
        if cum >= alpha - 1e-15 {
            return y[j];
        }
    }
    y[*ord.last().expect("scenario sets are nonempty")]
}

/// Grow every working set to cover the current mass target, walking the
/// sorted payoffs of the equal-weight portfolio.
fn seed(
    state: &mut SweepState,
    scen: &ScenarioSet,
    gamma: &LevelFunction,
    model: &UncertaintyModel,
) {
    let m = scen.num_outcomes();
    let k = scen.num_assets();
    for mask in &mut state.mask {
        if mask.is_empty() {
            *mask = vec![false; m];
        }
    }
    let x0 = vec![1.0 / k as f64; k];
    let rets = scen.portfolio_returns(&x0);
    for (i, entry) in gamma.entries().iter().enumerate() {
        let y = level_payoffs(scen, &rets, entry.recovery);
        let ord = argsort(&y);
        let target = (state.mass_factor * entry.alpha).min(1.0);
        let mut taken = 0usize;
        match model {
            UncertaintyModel::Mixture(vectors) => {
                let mut cum = vec![0.0; vectors.len()];
                for &j in &ord {
                    let worst = cum.iter().cloned().fold(f64::INFINITY, f64::min);
                    if worst >= target && taken >= MIN_SEED.min(m) {
                        break;
                    }
                    for (c, probs) in cum.iter_mut().zip(vectors) {
                        *c += probs[j];
                    }
                    state.admit(i, j);
                    taken += 1;
                }
            }
            _ => {
                let mut cum = 0.0;
                for &j in &ord {
                    if cum >= target && taken >= MIN_SEED.min(m) {
                        break;
                    }
                    cum += scen.probability(j);
                    state.admit(i, j);
                    taken += 1;
                }
            }
        }
    }
    if matches!(model, UncertaintyModel::Box { .. }) && state.cuts.is_empty() {
        state.cuts.push(scen.asset_mean_returns());
    }
    state.seeded = true;
}

/// Column offsets of one master program.  Per level the block holds the
/// working-set shortfalls and, under the box model, the dual split and the
/// budget pair `z = zp - zm`.
struct MasterLayout {
    levels: usize,
    assets: usize,
    sizes: Vec<usize>,
    block_starts: Vec<usize>,
    boxed: bool,
}

impl MasterLayout {
    fn new(members: &[Vec<usize>], assets: usize, boxed: bool) -> Self {
        let levels = members.len();
        let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
        let mut block_starts = Vec::with_capacity(levels);
        let mut next = 1 + levels + assets;
        for &w in &sizes {
            block_starts.push(next);
            next += if boxed { 3 * w + 2 } else { w };
        }
        MasterLayout { levels, assets, sizes, block_starts, boxed }
    }

    fn t(&self) -> usize {
        0
    }

    fn v(&self, level: usize) -> usize {
        1 + level
    }

    fn x(&self, asset: usize) -> usize {
        1 + self.levels + asset
    }

    fn u(&self, level: usize, pos: usize) -> usize {
        self.block_starts[level] + pos
    }

    fn sigma(&self, level: usize, pos: usize) -> usize {
        self.block_starts[level] + self.sizes[level] + pos
    }

    fn tau(&self, level: usize, pos: usize) -> usize {
        self.block_starts[level] + 2 * self.sizes[level] + pos
    }

    fn zp(&self, level: usize) -> usize {
        self.block_starts[level] + 3 * self.sizes[level]
    }

    fn zm(&self, level: usize) -> usize {
        self.zp(level) + 1
    }

    fn num_cols(&self) -> usize {
        let last = self.levels - 1;
        self.block_starts[last]
            + if self.boxed { 3 * self.sizes[last] + 2 } else { self.sizes[last] }
    }

    fn bounds(&self) -> Vec<Bounds> {
        let nonpositive = Bounds { lower: f64::NEG_INFINITY, upper: 0.0 };
        let mut b = vec![Bounds::FREE; 1 + self.levels];
        b.extend(std::iter::repeat(Bounds::NONNEGATIVE).take(self.assets));
        for &w in &self.sizes {
            if self.boxed {
                b.extend(std::iter::repeat(Bounds::NONNEGATIVE).take(w));
                b.extend(std::iter::repeat(Bounds::NONNEGATIVE).take(w));
                b.extend(std::iter::repeat(nonpositive).take(w));
                b.push(Bounds::NONNEGATIVE);
                b.push(Bounds::NONNEGATIVE);
            } else {
                b.extend(std::iter::repeat(Bounds::NONNEGATIVE).take(w));
            }
        }
        b
    }
}

fn build_master(
    scen: &ScenarioSet,
    gamma: &LevelFunction,
    mu: f64,
    model: &UncertaintyModel,
    state: &SweepState,
) -> Result<LinearProgram, OptimizeError> {
    let boxed = matches!(model, UncertaintyModel::Box { .. });
    let layout = MasterLayout::new(&state.members, scen.num_assets(), boxed);
    let mut objective = vec![0.0; layout.num_cols()];
    objective[layout.t()] = 1.0;
    let mut master = LinearProgram::new(objective, layout.bounds())?;

    for (i, entry) in gamma.entries().iter().enumerate() {
        for (pos, &s) in state.members[i].iter().enumerate() {
            let mut row = Vec::with_capacity(2 + layout.assets);
            row.push((layout.u(i, pos), 1.0));
            row.push((layout.v(i), -1.0));
            for (k, r) in scen.outcome_returns(s).iter().enumerate() {
                row.push((layout.x(k), *r));
            }
            master.push_row(row, Relation::Ge, entry.recovery * scen.liability(s))?;
        }
    }

    match model {
        UncertaintyModel::Nominal => {
            for (i, entry) in gamma.entries().iter().enumerate() {
                let mut row = vec![(layout.t(), -1.0), (layout.v(i), -1.0)];
                for (pos, &s) in state.members[i].iter().enumerate() {
                    if scen.probability(s) > 0.0 {
                        row.push((layout.u(i, pos), scen.probability(s) / entry.alpha));
                    }
                }
                master.push_row(row, Relation::Le, 0.0)?;
            }
            let means = scen.asset_mean_returns();
            master.push_row(
                means.iter().enumerate().map(|(k, m)| (layout.x(k), *m)).collect(),
                Relation::Ge,
                mu,
            )?;
        }
        UncertaintyModel::Mixture(vectors) => {
            for (i, entry) in gamma.entries().iter().enumerate() {
                for probs in vectors {
                    let mut row = vec![(layout.t(), -1.0), (layout.v(i), -1.0)];
                    for (pos, &s) in state.members[i].iter().enumerate() {
                        if probs[s] > 0.0 {
                            row.push((layout.u(i, pos), probs[s] / entry.alpha));
                        }
                    }
                    master.push_row(row, Relation::Le, 0.0)?;
                }
            }
            for probs in vectors {
                let mut means = vec![0.0; scen.num_assets()];
                for j in 0..scen.num_outcomes() {
                    if probs[j] == 0.0 {
                        continue;
                    }
                    for (mean, r) in means.iter_mut().zip(scen.outcome_returns(j)) {
                        *mean += probs[j] * r;
                    }
                }
                master.push_row(
                    means.iter().enumerate().map(|(k, m)| (layout.x(k), *m)).collect(),
                    Relation::Ge,
                    mu,
                )?;
            }
        }
        UncertaintyModel::Box { lower, upper } => {
            for (i, entry) in gamma.entries().iter().enumerate() {
                for (pos, _) in state.members[i].iter().enumerate() {
                    master.push_row(
                        vec![
                            (layout.zp(i), 1.0),
                            (layout.zm(i), -1.0),
                            (layout.sigma(i, pos), 1.0),
                            (layout.tau(i, pos), 1.0),
                            (layout.u(i, pos), -1.0),
                        ],
                        Relation::Eq,
                        0.0,
                    )?;
                }
                // Aggregate bands of the scenarios outside the set; their
                // best dual split costs exactly these rates on z = zp - zm.
                let mut budget_neg = 0.0;
                let mut budget_pos = 0.0;
                for j in 0..scen.num_outcomes() {
                    if !state.mask[i][j] {
                        budget_neg -= lower[j];
                        budget_pos += upper[j];
                    }
                }
                let mut row = vec![(layout.t(), -1.0), (layout.v(i), -1.0)];
                for (pos, &s) in state.members[i].iter().enumerate() {
                    if scen.probability(s) > 0.0 {
                        row.push((layout.u(i, pos), scen.probability(s) / entry.alpha));
                    }
                    if upper[s] != 0.0 {
                        row.push((layout.sigma(i, pos), upper[s] / entry.alpha));
                    }
                    if lower[s] != 0.0 {
                        row.push((layout.tau(i, pos), lower[s] / entry.alpha));
                    }
                }
                if budget_neg != 0.0 {
                    row.push((layout.zp(i), budget_neg / entry.alpha));
                }
                if budget_pos != 0.0 {
                    row.push((layout.zm(i), budget_pos / entry.alpha));
                }
                master.push_row(row, Relation::Le, 0.0)?;
            }
            for cut in &state.cuts {
                master.push_row(
                    cut.iter().enumerate().map(|(k, c)| (layout.x(k), *c)).collect(),
                    Relation::Ge,
                    mu,
                )?;
            }
        }
    }

    let simplex = (0..layout.assets).map(|k| (layout.x(k), 1.0)).collect();
    master.push_row(simplex, Relation::Eq, 1.0)?;
    Ok(master)
}

/// Per-level certificate data: the exact level risk and the tail boundary
/// used for scenario pricing.
fn level_certificate(
    scen: &ScenarioSet,
    model: &UncertaintyModel,
    alpha: f64,
    y: &[f64],
) -> Result<(f64, f64), OptimizeError> {
    match model {
        UncertaintyModel::Nominal => {
            let var = crate::risk::DiscreteVariable::new(y.to_vec(), scen.probabilities().to_vec())?;
            let risk = crate::risk::average_value_at_risk(&var, alpha)?;
            Ok((risk, tail_threshold(y, scen.probabilities(), alpha)))
        }
        UncertaintyModel::Mixture(vectors) => {
            let (risk, v_star) = mixture_level_risk(vectors, alpha, y);
            let mut boundary = v_star;
            for probs in vectors {
                boundary = boundary.max(tail_threshold(y, probs, alpha));
            }
            Ok((risk, boundary))
        }
        UncertaintyModel::Box { lower, upper } => Ok(box_level_risk(scen, lower, upper, alpha, y)),
    }
}

pub(crate) fn solve_reduced(
    scen: &ScenarioSet,
    gamma: &LevelFunction,
    mu: f64,
    model: &UncertaintyModel,
    state: &mut SweepState,
) -> Result<OptimalPortfolio, OptimizeError> {
    let m = scen.num_outcomes();
    let levels = gamma.num_levels();
    if !state.seeded {
        seed(state, scen, gamma, model);
    }
    for _ in 0..MAX_ROUNDS {
        let master = build_master(scen, gamma, mu, model, state)?;
        let sol = lp::solve(&master)?;
        match sol.status {
            // The master relaxes the full program, so an empty master
            // certifies emptiness of the full one.
            LpStatus::Infeasible => {
                return Ok(OptimalPortfolio::without_weights(SolveStatus::Infeasible))
            }
            LpStatus::Unbounded => {
                if state.members.iter().all(|w| w.len() == m) {
                    return Err(OptimizeError::Inconsistent(
                        "master program unbounded with every scenario admitted".into(),
                    ));
                }
                state.mass_factor *= 2.0;
                state.seeded = false;
                seed(state, scen, gamma, model);
                continue;
            }
            LpStatus::Optimal => {}
        }
        let bound = sol.x[0];
        let v_star = sol.x[1..=levels].to_vec();
        let weights = normalized_weights(&sol.x[1 + levels..1 + levels + scen.num_assets()])?;
        let rets = scen.portfolio_returns(weights.weights());

        let mut exact_risk = f64::NEG_INFINITY;
        let mut boundaries = Vec::with_capacity(levels);
        let mut payoffs = Vec::with_capacity(levels);
        for entry in gamma.entries() {
            let y = level_payoffs(scen, &rets, entry.recovery);
            let (risk, boundary) = level_certificate(scen, model, entry.alpha, &y)?;
            exact_risk = exact_risk.max(risk);
            boundaries.push(boundary);
            payoffs.push(y);
        }

        let mut grew = false;
        let mut return_ok = true;
        if matches!(model, UncertaintyModel::Box { .. }) {
            let worst_ret = worst_case_mean(scen, model, weights.weights())?;
            if worst_ret < mu - RET_TOL {
                return_ok = false;
                grew |= add_return_cut(scen, model, &rets, state)?;
            }
        }

        if exact_risk <= bound + CERT_TOL && return_ok {
            return Ok(OptimalPortfolio {
                status: SolveStatus::Optimal,
                weights: Some(weights),
                risk: bound,
                v_star,
            });
        }

        if exact_risk > bound + CERT_TOL {
            for i in 0..levels {
                let cutoff = boundaries[i].max(v_star[i]);
                grew |= admit_tail(state, i, &payoffs[i], cutoff);
            }
        }

        if !grew {
            // Tail boundaries priced nothing new: force the sets wider, and
            // once nothing is left to admit accept only a near-certificate.
            let mut widened = false;
            for i in 0..levels {
                widened |= widen_level(state, i, &payoffs[i]);
            }
            if !widened {
                if exact_risk <= bound + STALL_TOL
                    && (return_ok
                        || worst_case_mean(scen, model, weights.weights())? >= mu - STALL_TOL)
                {
                    return Ok(OptimalPortfolio {
                        status: SolveStatus::Optimal,
                        weights: Some(weights),
                        risk: bound,
                        v_star,
                    });
                }
                return Err(OptimizeError::Inconsistent(format!(
                    "working sets exhausted with certificate gap {}",
                    exact_risk - bound
                )));
            }
        }
    }
    Err(OptimizeError::Inconsistent(
        "working-set refinement failed to certify within its round budget".into(),
    ))
}

/// Admit the scenarios whose payoff lies inside the priced tail, deepest
/// first, up to the batch cap.  Returns whether anything was admitted.
fn admit_tail(state: &mut SweepState, level: usize, y: &[f64], cutoff: f64) -> bool {
    let slack = 1e-12 * cutoff.abs().max(1.0);
    let mut candidates: Vec<usize> = (0..y.len())
        .filter(|&j| !state.mask[level][j] && y[j] <= cutoff + slack)
        .collect();
    candidates.sort_by(|&a, &b| y[a].partial_cmp(&y[b]).unwrap().then(a.cmp(&b)));
    candidates.truncate(BATCH);
    let mut grew = false;
    for j in candidates {
        grew |= state.admit(level, j);
    }
    grew
}

/// Force in the next-smallest payoffs regardless of the priced boundary.
fn widen_level(state: &mut SweepState, level: usize, y: &[f64]) -> bool {
    let mut candidates: Vec<usize> =
        (0..y.len()).filter(|&j| !state.mask[level][j]).collect();
    candidates.sort_by(|&a, &b| y[a].partial_cmp(&y[b]).unwrap().then(a.cmp(&b)));
    candidates.truncate(WIDEN);
    let mut grew = false;
    for j in candidates {
        grew |= state.admit(level, j);
    }
    grew
}

/// Cut the master at the perturbation that minimizes the mean return of the
/// current weights.  Returns false when the cut is already present.
fn add_return_cut(
    scen: &ScenarioSet,
    model: &UncertaintyModel,
    rets: &[f64],
    state: &mut SweepState,
) -> Result<bool, OptimizeError> {
    let (lower, upper) = match model {
        UncertaintyModel::Box { lower, upper } => (lower, upper),
        _ => return Ok(false),
    };
    let negated: Vec<f64> = rets.iter().map(|r| -r).collect();
    let (_, eps) = worst_case_inner_argmax(&negated, lower, upper)?;
    let cut: Vec<f64> = (0..scen.num_assets())
        .map(|k| {
            let mut c = 0.0;
            for j in 0..scen.num_outcomes() {
                c += (scen.probability(j) + eps[j]) * scen.asset_return(j, k);
            }
            c
        })
        .collect();
    let duplicate = state.cuts.iter().any(|existing| {
        existing
            .iter()
            .zip(&cut)
            .all(|(a, b)| (a - b).abs() <= 1e-14 * a.abs().max(b.abs()).max(1.0))
    });
    if duplicate {
        return Ok(false);
    }
    state.cuts.push(cut);
    Ok(true)
}
