//! Tail risk measures on discrete probability spaces.
//!
//! Everything here is exact on finite laws: Value at Risk is a negated lower
//! quantile read off the sorted atoms, Average Value at Risk is a tail sum
//! that splits the boundary atom, and RecAV@R is a finite maximum of AV@R
//! evaluations driven by a piecewise-constant level function
//!
//! ```text
//! RecAV@R(X, Y) = max_i AV@R_{alpha_i}(X + (1 - r_i) Y)
//! ```
//!
//! where the pairs `(alpha_i, r_i)` grade partial recovery of the liability
//! `Y`: losses that wipe out more than a fraction `1 - r_i` of `Y` must not
//! occur with probability above `alpha_i`. Values are capital requirements:
//! `risk <= 0` means acceptable as-is.

use crate::scenarios::{kahan_sum, ScenarioSet};
use thiserror::Error;

/// Absolute slack used when comparing a risk value against available capital.
pub const SOLVENCY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum RiskError {
    #[error("tail level must lie in [0, 1], got {0}")]
    AlphaOutOfRange(f64),
    #[error("liability outcome {value} is negative with positive probability")]
    NegativeLiability { value: f64 },
    #[error("variables must share outcome probabilities")]
    MismatchedSupport,
    #[error("invalid discrete variable: {0}")]
    InvalidVariable(String),
    #[error("invalid level function: {0}")]
    InvalidLevelFunction(String),
    #[error("invalid portfolio: {0}")]
    InvalidPortfolio(String),
    #[error("{0}")]
    Domain(String),
}

/// A random variable on a finite probability space: one value per outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteVariable {
    values: Vec<f64>,
    probabilities: Vec<f64>,
}

impl DiscreteVariable {
    /// Probabilities must be nonnegative, finite, and sum to 1 within 1e-12.
    pub fn new(values: Vec<f64>, probabilities: Vec<f64>) -> Result<Self, RiskError> {
        if values.is_empty() {
            return Err(RiskError::InvalidVariable("no outcomes".into()));
        }
        if values.len() != probabilities.len() {
            return Err(RiskError::InvalidVariable(format!(
                "{} values but {} probabilities",
                values.len(),
                probabilities.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(RiskError::InvalidVariable(format!("non-finite value {v}")));
        }
        if let Some(p) = probabilities.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(RiskError::InvalidVariable(format!("bad probability {p}")));
        }
        let total = kahan_sum(&probabilities);
        if (total - 1.0).abs() > 1e-12 {
            return Err(RiskError::InvalidVariable(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self { values, probabilities })
    }

    /// A point mass at `value`.
    pub fn constant(value: f64) -> Self {
        Self { values: vec![value], probabilities: vec![1.0] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.probabilities)
            .map(|(v, p)| v * p)
            .sum()
    }

    fn same_support(&self, other: &Self) -> bool {
        self.len() == other.len()
            && self
                .probabilities
                .iter()
                .zip(&other.probabilities)
                .all(|(a, b)| (a - b).abs() <= 1e-12)
    }
}

/// One grading level: losses past recovery fraction `recovery` of the
/// liability are confined to tail probability `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelEntry {
    pub alpha: f64,
    pub recovery: f64,
}

/// Piecewise-constant level function, stored as its jump points.
///
/// Entries are strictly increasing in both coordinates and the last recovery
/// threshold is exactly 1, so the most conservative tail level `alpha_1`
/// guards the deepest shortfalls and `alpha_{n+1}` guards full recovery.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelFunction {
    entries: Vec<LevelEntry>,
}

impl LevelFunction {
    pub fn new(entries: Vec<LevelEntry>) -> Result<Self, RiskError> {
        if entries.is_empty() {
            return Err(RiskError::InvalidLevelFunction("no levels".into()));
        }
        for e in &entries {
            if !e.alpha.is_finite() || !(0.0..=1.0).contains(&e.alpha) {
                return Err(RiskError::InvalidLevelFunction(format!(
                    "alpha {} outside [0, 1]",
                    e.alpha
                )));
            }
            if !e.recovery.is_finite() || e.recovery <= 0.0 || e.recovery > 1.0 + 1e-12 {
                return Err(RiskError::InvalidLevelFunction(format!(
                    "recovery threshold {} outside (0, 1]",
                    e.recovery
                )));
            }
        }
        for w in entries.windows(2) {
            if w[1].alpha <= w[0].alpha {
                return Err(RiskError::InvalidLevelFunction(
                    "tail levels must be strictly increasing".into(),
                ));
            }
            if w[1].recovery <= w[0].recovery {
                return Err(RiskError::InvalidLevelFunction(
                    "recovery thresholds must be strictly increasing".into(),
                ));
            }
        }
        let mut entries = entries;
        let last = entries.last_mut().expect("nonempty");
        if (last.recovery - 1.0).abs() > 1e-12 {
            return Err(RiskError::InvalidLevelFunction(format!(
                "last recovery threshold must be 1, got {}",
                last.recovery
            )));
        }
        last.recovery = 1.0;
        Ok(Self { entries })
    }

    /// Convenience constructor from `(alpha, recovery)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self, RiskError> {
        Self::new(
            pairs
                .iter()
                .map(|&(alpha, recovery)| LevelEntry { alpha, recovery })
                .collect(),
        )
    }

    /// A single-level function: plain AV@R at `alpha`.
    pub fn flat(alpha: f64) -> Result<Self, RiskError> {
        Self::from_pairs(&[(alpha, 1.0)])
    }

    pub fn entries(&self) -> &[LevelEntry] {
        &self.entries
    }

    /// Number of levels (`n + 1` in the jump representation).
    pub fn num_levels(&self) -> usize {
        self.entries.len()
    }

    /// The tail level applied to recovery fraction `lambda`: `alpha_i` on
    /// `[r_{i-1}, r_i)` with `r_0 = 0`, and `alpha_{n+1}` at `lambda = 1`.
    pub fn level_at(&self, lambda: f64) -> Result<f64, RiskError> {
        if !lambda.is_finite() || !(0.0..=1.0).contains(&lambda) {
            return Err(RiskError::Domain(format!(
                "recovery fraction {lambda} outside [0, 1]"
            )));
        }
        for e in &self.entries {
            if lambda < e.recovery {
                return Ok(e.alpha);
            }
        }
        Ok(self.entries.last().expect("nonempty").alpha)
    }
}

/// Long-only portfolio weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    weights: Vec<f64>,
}

impl Portfolio {
    pub fn new(weights: Vec<f64>) -> Result<Self, RiskError> {
        if weights.is_empty() {
            return Err(RiskError::InvalidPortfolio("no assets".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < -1e-10) {
            return Err(RiskError::InvalidPortfolio(format!("negative weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(RiskError::InvalidPortfolio(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { weights })
    }

    /// Equal weights over `k` assets.
    pub fn equal(k: usize) -> Result<Self, RiskError> {
        if k == 0 {
            return Err(RiskError::InvalidPortfolio("no assets".into()));
        }
        Self::new(vec![1.0 / k as f64; k])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Atoms with positive mass, ascending by value.
fn sorted_atoms(x: &DiscreteVariable) -> Vec<(f64, f64)> {
    let mut atoms: Vec<(f64, f64)> = x
        .values
        .iter()
        .zip(&x.probabilities)
        .filter(|&(_, &p)| p > 0.0)
        .map(|(&v, &p)| (v, p))
        .collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    atoms
}

fn check_alpha(alpha: f64) -> Result<(), RiskError> {
    if !alpha.is_finite() || !(0.0..=1.0).contains(&alpha) {
        return Err(RiskError::AlphaOutOfRange(alpha));
    }
    Ok(())
}

/// Value at Risk at tail level `alpha`: the least capital `c` such that
/// `P(X + c < 0) <= alpha`.
///
/// On a discrete law this is the negated largest atom `v` with
/// `P(X < v) <= alpha`; `alpha = 0` gives the negated worst outcome.
pub fn value_at_risk(x: &DiscreteVariable, alpha: f64) -> Result<f64, RiskError> {
    check_alpha(alpha)?;
    let atoms = sorted_atoms(x);
    let mut below = 0.0;
    let mut best = atoms[0].0;
    let mut g = 0;
    while g < atoms.len() {
        let v = atoms[g].0;
        let mut mass = 0.0;
        while g < atoms.len() && atoms[g].0 == v {
            mass += atoms[g].1;
            g += 1;
        }
        if below <= alpha {
            best = v;
        } else {
            break;
        }
        below += mass;
    }
    Ok(-best)
}

/// Average Value at Risk at tail level `alpha`, the mean of `VaR_beta` over
/// `beta` in `(0, alpha)`.
///
/// Computed as an exact tail sum: ascending atoms are consumed until mass
/// `alpha` is reached, the boundary atom contributing only its residual mass.
/// `alpha = 0` returns the negated worst outcome, `alpha = 1` the negated
/// mean.
pub fn average_value_at_risk(x: &DiscreteVariable, alpha: f64) -> Result<f64, RiskError> {
    check_alpha(alpha)?;
    let atoms = sorted_atoms(x);
    if alpha == 0.0 {
        return Ok(-atoms[0].0);
    }
    let mut acc = 0.0;
    let mut taken = 0.0;
    for (v, p) in atoms {
        let want = alpha - taken;
        if want <= 0.0 {
            break;
        }
        let t = p.min(want);
        acc += t * v;
        taken += t;
    }
    Ok(-acc / alpha)
}

/// Result of a RecAV@R evaluation: the risk value and the level attaining it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecAvar {
    pub value: f64,
    /// Index into the level function's entries; ties resolve to the smallest.
    pub level_index: usize,
}

/// Recovery Average Value at Risk of position `X` against liability `Y`:
/// the largest of `AV@R_{alpha_i}(X + (1 - r_i) Y)` over the levels of
/// `gamma`. `X` and `Y` must live on the same outcome space and `Y` must be
/// nonnegative wherever it has mass.
pub fn rec_avar(
    x: &DiscreteVariable,
    y: &DiscreteVariable,
    gamma: &LevelFunction,
) -> Result<RecAvar, RiskError> {
    if !x.same_support(y) {
        return Err(RiskError::MismatchedSupport);
    }
    for (v, p) in y.values.iter().zip(&y.probabilities) {
        if *p > 0.0 && *v < 0.0 {
            return Err(RiskError::NegativeLiability { value: *v });
        }
    }
    let mut best = RecAvar { value: f64::NEG_INFINITY, level_index: 0 };
    for (i, e) in gamma.entries.iter().enumerate() {
        let shifted: Vec<f64> = x
            .values
            .iter()
            .zip(&y.values)
            .map(|(xv, yv)| xv + (1.0 - e.recovery) * yv)
            .collect();
        let var = DiscreteVariable { values: shifted, probabilities: x.probabilities.clone() };
        let risk = average_value_at_risk(&var, e.alpha)?;
        if risk > best.value {
            best = RecAvar { value: risk, level_index: i };
        }
    }
    Ok(best)
}

/// The epigraph objective whose minimum over `v` is the AV@R at level
/// `alpha` of the filtered position `sum_k x_k R_k - r Z`:
///
/// ```text
/// psi(x, v) = E[ max(v - sum_k x_k R_k + r Z, 0) ] / alpha - v
/// ```
pub fn psi(
    x: &Portfolio,
    v: f64,
    scen: &ScenarioSet,
    alpha: f64,
    r: f64,
) -> Result<f64, RiskError> {
    if !(alpha > 0.0 && alpha <= 1.0) || !alpha.is_finite() {
        return Err(RiskError::Domain(format!(
            "tail level must lie in (0, 1] here, got {alpha}"
        )));
    }
    if x.weights.len() != scen.num_assets() {
        return Err(RiskError::InvalidPortfolio(format!(
            "{} weights for {} assets",
            x.weights.len(),
            scen.num_assets()
        )));
    }
    let rets = scen.portfolio_returns(&x.weights);
    let mut expect = 0.0;
    for j in 0..scen.num_outcomes() {
        let short = v - rets[j] + r * scen.liability(j);
        if short > 0.0 {
            expect += scen.probability(j) * short;
        }
    }
    Ok(expect / alpha - v)
}

/// Probability that terminal assets plus capital cover at least the fraction
/// `lambda` of liabilities:
/// `P( budget * sum_k x_k (1 + R_k) + capital >= lambda * budget * Z )`.
pub fn recovery_probability(
    scen: &ScenarioSet,
    x: &Portfolio,
    budget: f64,
    capital: f64,
    lambda: f64,
) -> Result<f64, RiskError> {
    if !(budget > 0.0) || !budget.is_finite() {
        return Err(RiskError::Domain(format!("budget must be positive, got {budget}")));
    }
    if !lambda.is_finite() || !(0.0..=1.0).contains(&lambda) {
        return Err(RiskError::Domain(format!(
            "recovery fraction {lambda} outside [0, 1]"
        )));
    }
    if x.weights.len() != scen.num_assets() {
        return Err(RiskError::InvalidPortfolio(format!(
            "{} weights for {} assets",
            x.weights.len(),
            scen.num_assets()
        )));
    }
    let rets = scen.portfolio_returns(&x.weights);
    let mut prob = 0.0;
    for j in 0..scen.num_outcomes() {
        let assets = budget * (1.0 + rets[j]) + capital;
        if assets >= lambda * budget * scen.liability(j) {
            prob += scen.probability(j);
        }
    }
    Ok(prob)
}

/// Whether initial capital `e0` covers the RecAV@R of the equity change
/// `delta_e1` against liabilities `l1`.
pub fn check_solvency(
    e0: f64,
    delta_e1: &DiscreteVariable,
    l1: &DiscreteVariable,
    gamma: &LevelFunction,
) -> Result<bool, RiskError> {
    Ok(rec_avar(delta_e1, l1, gamma)?.value <= e0 + SOLVENCY_TOL)
}
