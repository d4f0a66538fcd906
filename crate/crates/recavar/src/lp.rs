//! A small dense linear programming solver.
//!
//! Problems are stated over sparse rows with per-variable bounds and solved
//! by two-phase primal simplex on a dense tableau. The intended scale is the
//! portfolio masters built elsewhere in this crate: hundreds to a few
//! thousand rows. Anything the solver returns as `Optimal` has been
//! re-checked against the original rows and bounds, so a buggy pivot sequence
//! surfaces as [`LpError::SolverFailure`], never as a wrong answer.
//!
//! Bounds are handled by substitution before the tableau is built: a finite
//! lower bound shifts the variable, an upper-bounded-only variable is
//! mirrored, a free variable is split into a difference of two nonnegative
//! ones. Only two-sided finite bounds cost an extra row.

use std::fmt;

/// Row sense of a constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

/// One sparse constraint row: `sum coeffs . x  (relation)  rhs`.
/// Duplicate column entries are summed.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// Closed variable range; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub const NONNEGATIVE: Bounds = Bounds { lower: 0.0, upper: f64::INFINITY };
    pub const FREE: Bounds = Bounds { lower: f64::NEG_INFINITY, upper: f64::INFINITY };

    pub fn at_least(lower: f64) -> Bounds {
        Bounds { lower, upper: f64::INFINITY }
    }

    pub fn between(lower: f64, upper: f64) -> Bounds {
        Bounds { lower, upper }
    }
}

/// Minimization problem `min c . x` subject to rows and bounds.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<Bounds>,
}

#[derive(Debug)]
pub enum LpError {
    Invalid(String),
    SolverFailure(String),
}

impl fmt::Display for LpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LpError::Invalid(msg) => write!(f, "invalid linear program: {msg}"),
            LpError::SolverFailure(msg) => write!(f, "solver failure: {msg}"),
        }
    }
}

impl std::error::Error for LpError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solver output. `x` and `objective` are meaningful only when `status` is
/// `Optimal`; otherwise `x` is empty and `objective` is NaN.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
}

const PIVOT_TOL: f64 = 1e-10;
/// Smallest pivot element accepted by the ratio test. Entries between this
/// and `PIVOT_TOL` are treated as elimination residue: eligible for ratio
/// bounds but never divided by.
const PIVOT_ACCEPT: f64 = 1e-5;
/// Per-row feasibility slack in the ratio test's step bound. Each pivot may
/// push a bypassed row this far negative; the post-solve feasibility check
/// runs at a much looser tolerance than the accumulated total.
const RATIO_SLACK: f64 = 1e-12;
/// Scale of the deterministic rhs perturbation applied to the equilibrated
/// standard form. Large enough to separate tied ratios, small enough to sit
/// below `PHASE1_TOL` and the re-check tolerances.
const PERTURB: f64 = 1e-10;
const OPT_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-8;
/// Row residual accepted when re-checking a claimed optimum.
pub const ROW_TOL: f64 = 1e-7;
/// Bound violation accepted when re-checking a claimed optimum.
pub const BOUND_TOL: f64 = 1e-9;

impl LinearProgram {
    pub fn new(objective: Vec<f64>, bounds: Vec<Bounds>) -> Result<Self, LpError> {
        if objective.is_empty() {
            return Err(LpError::Invalid("no variables".into()));
        }
        if objective.len() != bounds.len() {
            return Err(LpError::Invalid(format!(
                "{} objective coefficients but {} bounds",
                objective.len(),
                bounds.len()
            )));
        }
        if objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::Invalid("non-finite objective coefficient".into()));
        }
        for (i, b) in bounds.iter().enumerate() {
            if b.lower.is_nan() || b.upper.is_nan() || b.lower > b.upper {
                return Err(LpError::Invalid(format!(
                    "variable {i} has empty range [{}, {}]",
                    b.lower, b.upper
                )));
            }
            if b.lower == f64::INFINITY || b.upper == f64::NEG_INFINITY {
                return Err(LpError::Invalid(format!("variable {i} bound is infinite")));
            }
        }
        Ok(LinearProgram { objective, constraints: Vec::new(), bounds })
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn push_row(
        &mut self,
        coeffs: Vec<(usize, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> Result<(), LpError> {
        if !rhs.is_finite() {
            return Err(LpError::Invalid("non-finite right-hand side".into()));
        }
        for &(col, coef) in &coeffs {
            if col >= self.num_vars() {
                return Err(LpError::Invalid(format!("column {col} out of range")));
            }
            if !coef.is_finite() {
                return Err(LpError::Invalid(format!("non-finite coefficient in column {col}")));
            }
        }
        self.constraints.push(Constraint { coeffs, relation, rhs });
        Ok(())
    }
}

/// Checks `x` against every row and bound; returns the first violation.
pub fn check_feasible(
    lp: &LinearProgram,
    x: &[f64],
    row_tol: f64,
    bound_tol: f64,
) -> Result<(), String> {
    if x.len() != lp.num_vars() {
        return Err(format!("{} values for {} variables", x.len(), lp.num_vars()));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(format!("variable {i} is not finite"));
    }
    for (i, (v, b)) in x.iter().zip(&lp.bounds).enumerate() {
        if *v < b.lower - bound_tol || *v > b.upper + bound_tol {
            return Err(format!(
                "variable {i} = {v} outside [{}, {}]",
                b.lower, b.upper
            ));
        }
    }
    for (r, row) in lp.constraints.iter().enumerate() {
        let lhs: f64 = row.coeffs.iter().map(|&(c, a)| a * x[c]).sum();
        let violation = match row.relation {
            Relation::Le => lhs - row.rhs,
            Relation::Ge => row.rhs - lhs,
            Relation::Eq => (lhs - row.rhs).abs(),
        };
        if violation > row_tol {
            return Err(format!(
                "row {r} violated by {violation:.3e} (lhs {lhs}, rhs {})",
                row.rhs
            ));
        }
    }
    Ok(())
}

/// How each original variable maps into the nonnegative standard form.
#[derive(Clone, Copy)]
enum ColMap {
    Shift { col: usize, lo: f64 },
    Mirror { col: usize, hi: f64 },
    Split { pos: usize, neg: usize },
}

struct Tableau {
    /// Constraint rows, each `width + 1` long: the rhs sits at `width - 1`
    /// and the trailing slot carries the rhs perturbation's image under the
    /// same row operations, so readout can subtract it exactly.
    rows: Vec<Vec<f64>>,
    active: Vec<bool>,
    basis: Vec<usize>,
    cost: Vec<f64>,
    /// Objective the running cost row was derived from, kept pristine so the
    /// cost row can be recomputed when pivot error accumulates.
    base_cost: Vec<f64>,
    /// Columns allowed to enter the basis.
    allowed: Vec<bool>,
    width: usize,
}

enum Ran {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.rows[r][self.width - 1]
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let piv = self.rows[r][j];
        for v in self.rows[r].iter_mut() {
            *v /= piv;
        }
        self.rows[r][j] = 1.0;
        let pivot_row = std::mem::take(&mut self.rows[r]);
        for (rr, row) in self.rows.iter_mut().enumerate() {
            if rr == r || !self.active[rr] {
                continue;
            }
            let f = row[j];
            if f != 0.0 {
                for (a, b) in row.iter_mut().zip(&pivot_row) {
                    *a -= f * b;
                }
                row[j] = 0.0;
            }
        }
        let f = self.cost[j];
        if f != 0.0 {
            for (a, b) in self.cost.iter_mut().zip(&pivot_row) {
                *a -= f * b;
            }
            self.cost[j] = 0.0;
        }
        self.rows[r] = pivot_row;
        self.basis[r] = j;
    }

    /// Rebuild the running cost row from the pristine objective and the
    /// current rows, discarding error the row-by-row updates accumulated.
    fn refresh_cost(&mut self) {
        let mut cost = self.base_cost.clone();
        for r in 0..self.rows.len() {
            if !self.active[r] {
                continue;
            }
            let cb = self.base_cost[self.basis[r]];
            if cb != 0.0 {
                for (c, v) in cost.iter_mut().zip(&self.rows[r]) {
                    *c -= cb * v;
                }
            }
        }
        for r in 0..self.rows.len() {
            if self.active[r] {
                cost[self.basis[r]] = 0.0;
            }
        }
        self.cost = cost;
    }

    fn run(&mut self, max_iter: usize) -> Result<Ran, LpError> {
        let ncols = self.width - 1;
        let mut bland = false;
        let mut stall = 0usize;
        // Eliminations smear rounding error into the cost row, so optimality
        // and unboundedness claims are only believed against a cost row
        // rebuilt since the last pivot; periodic rebuilds cap the drift in
        // between.
        let mut dirty = false;
        let mut since_refresh = 0usize;
        // A column whose best eligible pivot element is elimination residue
        // rather than a genuine coefficient is vetoed at the current basis:
        // dividing the pivot row by ~1e-6 scales it by ~1e6, and the next
        // elimination smears that error through the whole tableau. Vetoes
        // reset after every accepted pivot.
        let mut vetoed = vec![false; ncols];
        for _ in 0..max_iter {
            since_refresh += 1;
            if since_refresh >= 64 {
                since_refresh = 0;
                dirty = false;
                self.refresh_cost();
            }
            let (r, j, best_ratio) = loop {
                // Pricing: Dantzig normally, Bland once degeneracy stalls.
                let mut enter = None;
                if bland {
                    for j in 0..ncols {
                        if self.allowed[j] && !vetoed[j] && self.cost[j] < -OPT_TOL {
                            enter = Some(j);
                            break;
                        }
                    }
                } else {
                    let mut best = -OPT_TOL;
                    for j in 0..ncols {
                        if self.allowed[j] && !vetoed[j] && self.cost[j] < best {
                            best = self.cost[j];
                            enter = Some(j);
                        }
                    }
                }
                if enter.is_none() && dirty {
                    dirty = false;
                    self.refresh_cost();
                    enter = (0..ncols)
                        .filter(|&j| self.allowed[j] && !vetoed[j] && self.cost[j] < -OPT_TOL)
                        .min_by(|&a, &b| self.cost[a].total_cmp(&self.cost[b]));
                }
                let Some(j) = enter else {
                    return Ok(Ran::Optimal);
                };
                // Ratio test in two passes. Pass one bounds the step with a
                // per-row feasibility slack in the numerator, so a degenerate
                // row whose entry is elimination residue yields a huge
                // allowed ratio and stops binding, while a degenerate row
                // with a genuine coefficient still pins the step at zero.
                // Pass two pivots on the largest element within the bound.
                let mut theta_max = f64::INFINITY;
                for r in 0..self.rows.len() {
                    if !self.active[r] {
                        continue;
                    }
                    let a = self.rows[r][j];
                    if a > PIVOT_TOL {
                        theta_max = theta_max.min((self.rhs(r).max(0.0) + RATIO_SLACK) / a);
                    }
                }
                if theta_max == f64::INFINITY {
                    // An improving ray claimed by a drifted cost entry on an
                    // eliminated column is the common cause; re-price before
                    // believing it.
                    if dirty {
                        dirty = false;
                        self.refresh_cost();
                        if self.cost[j] >= -OPT_TOL {
                            continue;
                        }
                    }
                    return Ok(Ran::Unbounded);
                }
                let mut leave: Option<usize> = None;
                for r in 0..self.rows.len() {
                    if !self.active[r] {
                        continue;
                    }
                    let a = self.rows[r][j];
                    if a > PIVOT_TOL && self.rhs(r).max(0.0) / a <= theta_max {
                        let better = match leave {
                            None => true,
                            Some(cur) => {
                                if bland {
                                    self.basis[r] < self.basis[cur]
                                } else {
                                    a > self.rows[cur][j]
                                }
                            }
                        };
                        if better {
                            leave = Some(r);
                        }
                    }
                }
                let r = leave.expect("a row attains a ratio within the slack bound");
                let best_ratio = self.rhs(r).max(0.0) / self.rows[r][j];
                if self.rows[r][j] < PIVOT_ACCEPT {
                    vetoed[j] = true;
                    continue;
                }
                break (r, j, best_ratio);
            };
            if best_ratio <= 1e-12 {
                stall += 1;
                if stall > 300 {
                    bland = true;
                }
            } else {
                // A positive step strictly lowered the objective, so no basis
                // can recur: safe to hand control back to Dantzig pricing.
                stall = 0;
                bland = false;
            }
            dirty = true;
            if vetoed.iter().any(|&v| v) {
                vetoed.fill(false);
            }
            self.pivot(r, j);
        }
        Err(LpError::SolverFailure("iteration limit reached".into()))
    }
}

/// Nearest power of two, for equilibration factors that never round.
fn pow2_near(x: f64) -> f64 {
    if x <= 0.0 || !x.is_finite() {
        return 1.0;
    }
    let e = x.log2().round();
    // f64 powers of two are exact within this range; clamp the rest.
    (2.0f64).powi(e.clamp(-512.0, 512.0) as i32)
}

/// Max-norm equilibration with power-of-two factors: rows and columns of the
/// constraint matrix are rescaled toward unit magnitude so rows mixing very
/// large and very small coefficients do not force tiny, error-amplifying
/// pivots. Power-of-two factors keep every scaled coefficient, bound, and
/// right-hand side bit-exact, so the scaled program is exactly equivalent.
fn equilibrate(lp: &LinearProgram) -> (LinearProgram, Vec<f64>) {
    let n = lp.num_vars();
    let m = lp.constraints.len();
    let mut col_scale = vec![1.0f64; n];
    let mut row_scale = vec![1.0f64; m];
    for _ in 0..2 {
        for (i, row) in lp.constraints.iter().enumerate() {
            let mut largest = 0.0f64;
            for &(c, a) in &row.coeffs {
                largest = largest.max((a * col_scale[c]).abs());
            }
            if largest > 0.0 {
                row_scale[i] = pow2_near(1.0 / largest);
            }
        }
        let mut col_largest = vec![0.0f64; n];
        for (i, row) in lp.constraints.iter().enumerate() {
            for &(c, a) in &row.coeffs {
                col_largest[c] = col_largest[c].max((a * row_scale[i]).abs());
            }
        }
        for j in 0..n {
            if col_largest[j] > 0.0 {
                col_scale[j] = pow2_near(1.0 / col_largest[j]);
            }
        }
    }

    let objective: Vec<f64> =
        lp.objective.iter().zip(&col_scale).map(|(c, s)| c * s).collect();
    let bounds: Vec<Bounds> = lp
        .bounds
        .iter()
        .zip(&col_scale)
        .map(|(b, s)| Bounds { lower: b.lower / s, upper: b.upper / s })
        .collect();
    let constraints: Vec<Constraint> = lp
        .constraints
        .iter()
        .zip(&row_scale)
        .map(|(row, r)| Constraint {
            coeffs: row
                .coeffs
                .iter()
                .map(|&(c, a)| (c, a * col_scale[c] * r))
                .collect(),
            relation: row.relation,
            rhs: row.rhs * r,
        })
        .collect();
    (LinearProgram { objective, constraints, bounds }, col_scale)
}

/// Solves the program by two-phase primal simplex on an equilibrated copy.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    // Revalidate: the struct fields are public.
    let mut checked = LinearProgram::new(lp.objective.clone(), lp.bounds.clone())?;
    for row in &lp.constraints {
        checked.push_row(row.coeffs.clone(), row.relation, row.rhs)?;
    }

    let (scaled, col_scale) = equilibrate(lp);
    let sol = solve_core(&scaled)?;
    if sol.status != LpStatus::Optimal {
        return Ok(sol);
    }
    let x: Vec<f64> = sol.x.iter().zip(&col_scale).map(|(y, s)| y * s).collect();
    if let Err(msg) = check_feasible(lp, &x, ROW_TOL, BOUND_TOL) {
        return Err(LpError::SolverFailure(format!(
            "claimed optimum fails feasibility re-check: {msg}"
        )));
    }
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution { status: LpStatus::Optimal, x, objective })
}

fn solve_core(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    // Map variables onto nonnegative standard-form columns.
    let n = lp.num_vars();
    let mut maps = Vec::with_capacity(n);
    let mut n_y = 0usize;
    let mut range_rows: Vec<(usize, f64)> = Vec::new();
    for b in &lp.bounds {
        if b.lower.is_finite() {
            maps.push(ColMap::Shift { col: n_y, lo: b.lower });
            if b.upper.is_finite() {
                range_rows.push((n_y, b.upper - b.lower));
            }
            n_y += 1;
        } else if b.upper.is_finite() {
            maps.push(ColMap::Mirror { col: n_y, hi: b.upper });
            n_y += 1;
        } else {
            maps.push(ColMap::Split { pos: n_y, neg: n_y + 1 });
            n_y += 2;
        }
    }

    // Substitute the maps into every row, then normalize rhs >= 0.
    let mut std_rows: Vec<(Vec<f64>, Relation, f64)> = Vec::with_capacity(
        lp.constraints.len() + range_rows.len(),
    );
    for row in &lp.constraints {
        let mut a = vec![0.0; n_y];
        let mut rhs = row.rhs;
        for &(col, coef) in &row.coeffs {
            match maps[col] {
                ColMap::Shift { col: c, lo } => {
                    a[c] += coef;
                    rhs -= coef * lo;
                }
                ColMap::Mirror { col: c, hi } => {
                    a[c] -= coef;
                    rhs -= coef * hi;
                }
                ColMap::Split { pos, neg } => {
                    a[pos] += coef;
                    a[neg] -= coef;
                }
            }
        }
        std_rows.push((a, row.relation, rhs));
    }
    for &(col, ub) in &range_rows {
        let mut a = vec![0.0; n_y];
        a[col] = 1.0;
        std_rows.push((a, Relation::Le, ub));
    }
    for (a, rel, rhs) in std_rows.iter_mut() {
        if *rhs < 0.0 {
            for v in a.iter_mut() {
                *v = -*v;
            }
            *rhs = -*rhs;
            *rel = match rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    // Column layout: y columns, slack/surplus columns, artificial columns, rhs.
    let m = std_rows.len();
    let n_slack = std_rows
        .iter()
        .filter(|(_, rel, _)| *rel != Relation::Eq)
        .count();
    let n_art = std_rows
        .iter()
        .filter(|(_, rel, _)| *rel != Relation::Le)
        .count();
    let width = n_y + n_slack + n_art + 1;
    let art_start = n_y + n_slack;

    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut slack_at = n_y;
    let mut art_at = art_start;
    for (i, (a, rel, rhs)) in std_rows.iter().enumerate() {
        // Deterministic rhs perturbation, distinct per row, breaks the
        // ratio-test ties that scenario sets with near-identical payoffs
        // produce in bulk: the walk stays nondegenerate, so it cannot stall
        // or cycle. The shift rides in a trailing slot that undergoes the
        // same row operations as the rhs and is subtracted back out exactly
        // when the solution is read, so answers are those of the unshifted
        // program.
        let delta = PERTURB * (i + 1) as f64 / m as f64;
        let mut row = vec![0.0; width + 1];
        row[..n_y].copy_from_slice(a);
        row[width - 1] = *rhs + delta;
        row[width] = delta;
        match rel {
            Relation::Le => {
                row[slack_at] = 1.0;
                basis.push(slack_at);
                slack_at += 1;
            }
            Relation::Ge => {
                row[slack_at] = -1.0;
                slack_at += 1;
                row[art_at] = 1.0;
                basis.push(art_at);
                art_at += 1;
            }
            Relation::Eq => {
                row[art_at] = 1.0;
                basis.push(art_at);
                art_at += 1;
            }
        }
        rows.push(row);
    }

    let mut t = Tableau {
        rows,
        active: vec![true; m],
        basis,
        cost: vec![0.0; width],
        base_cost: vec![0.0; width],
        allowed: vec![true; width - 1],
        width,
    };
    let max_iter = 20_000 + 80 * (m + width);

    if n_art > 0 {
        // Phase 1: minimize the artificial total.
        for j in art_start..width - 1 {
            t.base_cost[j] = 1.0;
        }
        t.refresh_cost();
        match t.run(max_iter)? {
            Ran::Optimal => {}
            Ran::Unbounded => {
                return Err(LpError::SolverFailure("phase 1 reported unbounded".into()))
            }
        }
        t.refresh_cost();
        let art_total = -t.cost[width - 1];
        if art_total > PHASE1_TOL {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: Vec::new(),
                objective: f64::NAN,
            });
        }
        // Basic artificials sit at zero; pivot each out on its largest
        // eligible element, or drop the (dependent) row entirely.
        for r in 0..m {
            if t.basis[r] < art_start {
                continue;
            }
            let mut pivot_col = None;
            let mut best = ROW_TOL;
            for j in 0..art_start {
                let a = t.rows[r][j].abs();
                if a > best {
                    best = a;
                    pivot_col = Some(j);
                }
            }
            match pivot_col {
                Some(j) => t.pivot(r, j),
                None => t.active[r] = false,
            }
        }
        for j in art_start..width - 1 {
            t.allowed[j] = false;
        }
    }

    // Phase 2: install the real objective over the current basis.
    let mut c_y = vec![0.0; width];
    for (i, &c) in lp.objective.iter().enumerate() {
        match maps[i] {
            ColMap::Shift { col, .. } => c_y[col] += c,
            ColMap::Mirror { col, .. } => c_y[col] -= c,
            ColMap::Split { pos, neg } => {
                c_y[pos] += c;
                c_y[neg] -= c;
            }
        }
    }
    t.base_cost = c_y;
    t.refresh_cost();
    match t.run(max_iter)? {
        Ran::Unbounded => {
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                x: Vec::new(),
                objective: f64::NAN,
            })
        }
        Ran::Optimal => {}
    }

    // Read the solution back through the variable maps, subtracting the rhs
    // perturbation's accumulated image so the answer is a vertex of the
    // unshifted program; the caller rescales and re-checks against the
    // original program.
    let mut y = vec![0.0; n_y];
    for r in 0..m {
        if t.active[r] && t.basis[r] < n_y {
            y[t.basis[r]] = (t.rhs(r) - t.rows[r][width]).max(0.0);
        }
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|map| match *map {
            ColMap::Shift { col, lo } => lo + y[col],
            ColMap::Mirror { col, hi } => hi - y[col],
            ColMap::Split { pos, neg } => y[pos] - y[neg],
        })
        .collect();
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution { status: LpStatus::Optimal, x, objective })
}
