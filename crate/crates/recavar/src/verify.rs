//! Independent cross-checks for the risk evaluators and the optimizer:
//! a brute-force tail integrator, a golden-section minimax comparison,
//! exact piecewise-linear arithmetic for the shared-scalar counterexample,
//! closed forms for the two-point market, and a randomized property suite.
//!
//! Nothing here calls the code it is meant to check: the integrator
//! recomputes quantiles from the sorted atoms, the minimax comparison
//! searches the epigraph objective directly, and the counterexample is
//! carried out in exact breakpoint/slope arithmetic.

use crate::risk::{
    average_value_at_risk, psi, rec_avar, value_at_risk, DiscreteVariable, LevelFunction,
    Portfolio, RiskError,
};
use crate::scenarios::ScenarioSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Risk(#[from] RiskError),
}

/// A continuous piecewise-linear function on the real line, stored as
/// strictly increasing breakpoints, one slope per segment (including the
/// two unbounded rays), and the function value at the first breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearFunction {
    breakpoints: Vec<f64>,
    slopes: Vec<f64>,
    anchor: f64,
}

impl PiecewiseLinearFunction {
    pub fn new(
        breakpoints: Vec<f64>,
        slopes: Vec<f64>,
        anchor: f64,
    ) -> Result<Self, VerifyError> {
        if breakpoints.is_empty() {
            return Err(VerifyError::Domain("needs at least one breakpoint".into()));
        }
        if slopes.len() != breakpoints.len() + 1 {
            return Err(VerifyError::Domain(format!(
                "{} breakpoints need {} slopes, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                slopes.len()
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite())
            || slopes.iter().any(|s| !s.is_finite())
            || !anchor.is_finite()
        {
            return Err(VerifyError::Domain("breakpoints, slopes, and anchor must be finite".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(VerifyError::Domain("breakpoints must be strictly increasing".into()));
        }
        Ok(Self { breakpoints, slopes, anchor })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn value_at(&self, x: f64) -> f64 {
        let first = self.breakpoints[0];
        if x <= first {
            return self.anchor + self.slopes[0] * (x - first);
        }
        let mut value = self.anchor;
        let mut prev = first;
        for (i, &bp) in self.breakpoints.iter().enumerate().skip(1) {
            if x <= bp {
                return value + self.slopes[i] * (x - prev);
            }
            value += self.slopes[i] * (bp - prev);
            prev = bp;
        }
        value + self.slopes[self.breakpoints.len()] * (x - prev)
    }

    pub fn is_convex(&self) -> bool {
        self.slopes.windows(2).all(|w| w[0] <= w[1])
    }

    // Slope index governing points strictly inside a segment.
    fn slope_at(&self, x: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|b| *b < x);
        self.slopes[idx]
    }

    /// The pointwise maximum, with crossing points inserted as exact
    /// solutions of the per-segment linear equations.
    pub fn pointwise_max(&self, other: &Self) -> Self {
        let mut knots: Vec<f64> = self
            .breakpoints
            .iter()
            .chain(other.breakpoints.iter())
            .copied()
            .collect();
        knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        knots.dedup();

        let mut enriched = Vec::with_capacity(knots.len() * 2);
        let first = knots[0];
        let d0 = self.value_at(first) - other.value_at(first);
        let s0 = self.slopes[0] - other.slopes[0];
        if s0 != 0.0 {
            let cross = first - d0 / s0;
            if cross < first {
                enriched.push(cross);
            }
        }
        for w in 0..knots.len() {
            enriched.push(knots[w]);
            if w + 1 < knots.len() {
                let (lo, hi) = (knots[w], knots[w + 1]);
                let d_lo = self.value_at(lo) - other.value_at(lo);
                let d_hi = self.value_at(hi) - other.value_at(hi);
                if (d_lo < 0.0 && d_hi > 0.0) || (d_lo > 0.0 && d_hi < 0.0) {
                    let slope = (d_hi - d_lo) / (hi - lo);
                    enriched.push(lo - d_lo / slope);
                }
            }
        }
        let last = *knots.last().unwrap();
        let dl = self.value_at(last) - other.value_at(last);
        let sl = *self.slopes.last().unwrap() - *other.slopes.last().unwrap();
        if sl != 0.0 {
            let cross = last - dl / sl;
            if cross > last {
                enriched.push(cross);
            }
        }
        enriched.sort_by(|a, b| a.partial_cmp(b).unwrap());
        enriched.dedup();

        let n = enriched.len();
        let mut slopes = Vec::with_capacity(n + 1);
        for i in 0..=n {
            // A probe strictly inside each segment decides which function wins.
            let probe = if i == 0 {
                enriched[0] - 1.0
            } else if i == n {
                enriched[n - 1] + 1.0
            } else {
                0.5 * (enriched[i - 1] + enriched[i])
            };
            let winner = if self.value_at(probe) >= other.value_at(probe) { self } else { other };
            slopes.push(winner.slope_at(probe));
        }

        // Drop knots that no longer change the slope.
        let mut kept_points = Vec::with_capacity(n);
        let mut kept_slopes = vec![slopes[0]];
        for i in 0..n {
            if slopes[i + 1] != *kept_slopes.last().unwrap() || (kept_points.is_empty() && i == n - 1)
            {
                kept_points.push(enriched[i]);
                kept_slopes.push(slopes[i + 1]);
            }
        }
        if kept_points.is_empty() {
            kept_points.push(enriched[0]);
            kept_slopes.push(slopes[n]);
        }
        let anchor = self.value_at(kept_points[0]).max(other.value_at(kept_points[0]));
        Self { breakpoints: kept_points, slopes: kept_slopes, anchor }
    }

    /// Global minimum of a convex, coercive function: `(argmin, value)`.
    pub fn minimum(&self) -> Result<(f64, f64), VerifyError> {
        if !self.is_convex() {
            return Err(VerifyError::Domain("minimum needs a convex function".into()));
        }
        if self.slopes[0] > 0.0 || *self.slopes.last().unwrap() < 0.0 {
            return Err(VerifyError::Domain("function is unbounded below".into()));
        }
        // First breakpoint whose right slope turns nonnegative carries the minimum.
        let j = (0..self.breakpoints.len())
            .find(|&j| self.slopes[j + 1] >= 0.0)
            .expect("last slope is nonnegative");
        let x = self.breakpoints[j];
        Ok((x, self.value_at(x)))
    }
}

/// Direct numerical form of the tail average: the midpoint rule applied to
/// the quantile integral over `(0, alpha]`, with quantiles recomputed from
/// the sorted atoms.
pub fn avar_bruteforce(
    x: &DiscreteVariable,
    alpha: f64,
    grid_size: usize,
) -> Result<f64, VerifyError> {
    if !alpha.is_finite() || alpha <= 0.0 || alpha > 1.0 {
        return Err(VerifyError::Domain(format!(
            "tail integral needs a level in (0, 1], got {alpha}"
        )));
    }
    if grid_size == 0 {
        return Err(VerifyError::Domain("needs at least one integration panel".into()));
    }

    let mut atoms: Vec<(f64, f64)> = x
        .values()
        .iter()
        .copied()
        .zip(x.probabilities().iter().copied())
        .collect();
    atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut cum = Vec::with_capacity(atoms.len());
    let mut running = 0.0;
    let mut comp = 0.0;
    for &(_, p) in &atoms {
        let y = p - comp;
        let t = running + y;
        comp = (t - running) - y;
        running = t;
        cum.push(running);
    }

    // Mean of the loss quantiles at panel midpoints, accumulated as offsets
    // from the first quantile so constant laws come out bit-exact.
    let mut idx = 0usize;
    let mut base = f64::NAN;
    let mut sum = 0.0;
    let mut sum_comp = 0.0;
    let n = grid_size as f64;
    for k in 1..=grid_size {
        let beta = alpha * ((2 * k - 1) as f64) / (2.0 * n);
        while idx + 1 < atoms.len() && cum[idx] < beta {
            idx += 1;
        }
        let quantile_loss = -atoms[idx].0;
        if k == 1 {
            base = quantile_loss;
            continue;
        }
        let y = (quantile_loss - base) - sum_comp;
        let t = sum + y;
        sum_comp = (t - sum) - y;
        sum = t;
    }
    Ok(base + sum / n)
}

/// Both orders of the level/epigraph optimization at a fixed portfolio:
/// `lhs` maximizes the per-level minima, `rhs` minimizes over one epigraph
/// variable per level (the coordinates decouple, so the shared search
/// splits into the same per-level problems) and then takes the maximum.
pub fn minimax_gap(
    scen: &ScenarioSet,
    x: &Portfolio,
    gamma: &LevelFunction,
) -> Result<(f64, f64), VerifyError> {
    let returns = scen.portfolio_returns(x.weights());
    let mut minima = Vec::with_capacity(gamma.num_levels());
    for entry in gamma.entries() {
        minima.push(level_epigraph_min(scen, x, &returns, entry.alpha, entry.recovery)?);
    }
    let lhs = minima.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
    let mut rhs = f64::NEG_INFINITY;
    for (entry, &(v_star, _)) in gamma.entries().iter().zip(&minima) {
        rhs = rhs.max(psi(x, v_star, scen, entry.alpha, entry.recovery)?);
    }
    Ok((lhs, rhs))
}

/// Golden-section minimization of the epigraph objective over the exact
/// quantile bracket of the level payoff. Returns `(argmin, min)`.
fn level_epigraph_min(
    scen: &ScenarioSet,
    x: &Portfolio,
    returns: &[f64],
    alpha: f64,
    recovery: f64,
) -> Result<(f64, f64), VerifyError> {
    let m = scen.num_outcomes();
    let mut payoff: Vec<f64> =
        (0..m).map(|j| returns[j] - recovery * scen.liability(j)).collect();
    let order = {
        let mut idx: Vec<usize> = (0..m).collect();
        idx.sort_by(|&a, &b| payoff[a].partial_cmp(&payoff[b]).unwrap().then(a.cmp(&b)));
        idx
    };
    payoff = order.iter().map(|&j| payoff[j]).collect();
    let mut cum = 0.0;
    let mut k = m - 1;
    for (pos, &j) in order.iter().enumerate() {
        cum += scen.probability(j);
        if cum >= alpha {
            k = pos;
            break;
        }
    }
    let mut lo = payoff[k];
    let mut hi = payoff[(k + 1).min(m - 1)];

    let eval = |v: f64| psi(x, v, scen, alpha, recovery);
    let mut best = (lo, eval(lo)?);
    let at_hi = eval(hi)?;
    if at_hi < best.1 {
        best = (hi, at_hi);
    }
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let mut fa = eval(a)?;
    let mut fb = eval(b)?;
    while hi - lo > 1e-12 {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = eval(a)?;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = eval(b)?;
        }
        let (cand, val) = if fa <= fb { (a, fa) } else { (b, fb) };
        if val < best.1 {
            best = (cand, val);
        }
    }
    Ok(best)
}

/// Two convex piecewise-linear functions whose separate minima both vanish
/// while every shared scalar argument leaves one of them at least one:
/// swapping the maximum over functions with a minimum over a *single*
/// argument is not sound, which is exactly why the epigraph program carries
/// one variable per level.
pub fn appendix_counterexample() -> (f64, f64) {
    let f1 = PiecewiseLinearFunction::new(vec![-2.0, -1.0], vec![-1.0, 0.0, 1.0], 0.0)
        .expect("valid by construction");
    let f2 = PiecewiseLinearFunction::new(vec![1.0, 2.0], vec![-1.0, 0.0, 1.0], 0.0)
        .expect("valid by construction");
    let max_min = f1
        .minimum()
        .expect("convex and coercive")
        .1
        .max(f2.minimum().expect("convex and coercive").1);
    let min_max = f1.pointwise_max(&f2).minimum().expect("convex and coercive").1;
    (max_min, min_max)
}

/// Closed forms for the two-point market: the optimal risky weight and the
/// tail average of the risky return at level `beta`.
///
/// The market pays +0.5% with probability 99.9% and -4% otherwise, next to
/// a riskless asset; the level function holds `(beta, r)` below the 1%
/// anchor level. For `beta >= 0.9%` the risky tail average is nonpositive
/// and full investment is optimal; below that the optimum balances the two
/// level constraints and caps at one.
pub fn case1_closed_form(beta: f64, r: f64, ell: f64) -> Result<(f64, f64), VerifyError> {
    if !(beta > 0.0 && beta < 0.01) {
        return Err(VerifyError::Domain(format!("beta must lie in (0, 0.01), got {beta}")));
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(VerifyError::Domain(format!("r must lie in (0, 1), got {r}")));
    }
    if !(ell > 0.0 && ell < 1.0) {
        return Err(VerifyError::Domain(format!("ell must lie in (0, 1), got {ell}")));
    }
    let avar_beta = if beta <= 0.001 { 0.04 } else { 0.000045 / beta - 0.005 };
    let x_star = if avar_beta <= 0.0 {
        1.0
    } else {
        // Spread against the anchor-level tail average of -0.05%.
        let spread = avar_beta + 0.0005;
        ((1.0 - r) * ell / spread).min(1.0)
    };
    Ok((x_star, avar_beta))
}

/// Outcome of one randomized property over all trials.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyOutcome {
    pub name: &'static str,
    pub trials: usize,
    pub violations: usize,
    pub worst_violation: f64,
}

/// Per-property tallies from [`property_suite`].
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    pub outcomes: Vec<PropertyOutcome>,
}

const PROPERTY_TOL: f64 = 1e-10;

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.violations == 0 && o.worst_violation <= PROPERTY_TOL)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for o in &self.outcomes {
            let _ = writeln!(
                out,
                "{}: {} trials, {} violations, worst {:.3e}",
                o.name, o.trials, o.violations, o.worst_violation
            );
        }
        let _ = writeln!(out, "result: {}", if self.passed() { "pass" } else { "FAIL" });
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("property,trials,worst_violation\n");
        for o in &self.outcomes {
            let _ = writeln!(out, "{},{},{:.16e}", o.name, o.trials, o.worst_violation);
        }
        out
    }
}

/// Randomized checks of the recovery-risk identities (cash invariance,
/// monotonicity, subadditivity, positive homogeneity) plus the tail-average
/// dominance and level-monotonicity of the plain tail average.
pub fn property_suite(seed: u64, trials: usize) -> Result<PropertyReport, VerifyError> {
    if trials == 0 {
        return Err(VerifyError::Domain("needs at least one trial".into()));
    }
    let names = [
        "cash_invariance_first_component",
        "monotonicity",
        "subadditivity",
        "positive_homogeneity",
        "tail_average_dominates_quantile",
        "level_monotonicity",
    ];
    let mut worst = [0.0f64; 6];
    let mut violations = [0usize; 6];

    for trial in 0..trials {
        let trial_seed = seed.wrapping_add((trial as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut rng = ChaCha12Rng::seed_from_u64(trial_seed);
        let measures = trial_deviations(&mut rng)?;
        for (slot, deviation) in measures.into_iter().enumerate() {
            if deviation > worst[slot] {
                worst[slot] = deviation;
            }
            if deviation > PROPERTY_TOL {
                violations[slot] += 1;
            }
        }
    }

    let outcomes = names
        .iter()
        .enumerate()
        .map(|(i, name)| PropertyOutcome {
            name,
            trials,
            violations: violations[i],
            worst_violation: worst[i],
        })
        .collect();
    Ok(PropertyReport { outcomes })
}

/// One random common outcome space and the six deviation magnitudes on it.
fn trial_deviations(rng: &mut ChaCha12Rng) -> Result<[f64; 6], VerifyError> {
    let m = rng.random_range(2..=12);
    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
    let draw = |rng: &mut ChaCha12Rng, lo: f64, hi: f64| -> Vec<f64> {
        (0..m).map(|_| rng.random_range(lo..hi)).collect()
    };
    let var =
        |vals: Vec<f64>| -> Result<DiscreteVariable, RiskError> { DiscreteVariable::new(vals, probs.clone()) };

    let levels = rng.random_range(1..=3);
    let mut alphas: Vec<f64> = (0..levels).map(|_| rng.random_range(0.02..0.95)).collect();
    alphas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    alphas.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let pairs: Vec<(f64, f64)> = alphas
        .iter()
        .enumerate()
        .map(|(i, &a)| (a, (i + 1) as f64 / alphas.len() as f64))
        .collect();
    let gamma = LevelFunction::from_pairs(&pairs)?;

    let x1_vals = draw(rng, -1.0, 1.0);
    let y1_vals = draw(rng, 0.0, 1.0);
    let x1 = var(x1_vals.clone())?;
    let y1 = var(y1_vals.clone())?;
    let base = rec_avar(&x1, &y1, &gamma)?.value;

    let shift = rng.random_range(-0.5..0.5);
    let shifted = var(x1_vals.iter().map(|v| v + shift).collect())?;
    let cash = (rec_avar(&shifted, &y1, &gamma)?.value - (base - shift)).abs();

    let x_bump = draw(rng, 0.0, 0.5);
    let y_bump = draw(rng, 0.0, 0.5);
    let x_up = var(x1_vals.iter().zip(&x_bump).map(|(v, d)| v + d).collect())?;
    let y_up = var(y1_vals.iter().zip(&y_bump).map(|(v, d)| v + d).collect())?;
    let mono = (rec_avar(&x_up, &y_up, &gamma)?.value - base).max(0.0);

    let x2_vals = draw(rng, -1.0, 1.0);
    let y2_vals = draw(rng, 0.0, 1.0);
    let x2 = var(x2_vals.clone())?;
    let y2 = var(y2_vals.clone())?;
    let x_sum = var(x1_vals.iter().zip(&x2_vals).map(|(a, b)| a + b).collect())?;
    let y_sum = var(y1_vals.iter().zip(&y2_vals).map(|(a, b)| a + b).collect())?;
    let subadd = (rec_avar(&x_sum, &y_sum, &gamma)?.value
        - rec_avar(&x1, &y1, &gamma)?.value
        - rec_avar(&x2, &y2, &gamma)?.value)
        .max(0.0);

    let scale = rng.random_range(0.0..2.0);
    let x_scaled = var(x1_vals.iter().map(|v| scale * v).collect())?;
    let y_scaled = var(y1_vals.iter().map(|v| scale * v).collect())?;
    let hom = (rec_avar(&x_scaled, &y_scaled, &gamma)?.value - scale * base).abs();

    let alpha = rng.random_range(0.01..1.0);
    let dominance = (value_at_risk(&x1, alpha)? - average_value_at_risk(&x1, alpha)?).max(0.0);

    let alpha_lo = rng.random_range(0.01..0.5);
    let alpha_hi = alpha_lo + rng.random_range(0.0..(1.0 - alpha_lo));
    let level_mono =
        (average_value_at_risk(&x1, alpha_hi)? - average_value_at_risk(&x1, alpha_lo)?).max(0.0);

    Ok([cash, mono, subadd, hom, dominance, level_mono])
}
