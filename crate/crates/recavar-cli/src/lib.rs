//! Command implementations behind the `recavar` binary.
//!
//! Every command is deterministic given its flags and seed. Output is
//! comma-separated with a header row and 17-significant-digit floats, so
//! external tooling can re-plot the tables without precision loss.
//!
//! Risk numbers are reported per unit of budget for the filtered position
//! (portfolio return net of the recovery-scaled liability). The balance-sheet
//! capital requirement on net asset value sits exactly one budget below that,
//! so both are emitted: `capital = risk - 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use recavar::optimize::{
    efficient_frontier, portfolio_risk, portfolio_worst_case_mean, solve_mean_risk, SolveStatus,
    UncertaintyModel,
};
use recavar::risk::recovery_probability;
use recavar::scenarios::{
    load_scenarios, sample_scenarios, Dependence, Marginal, SamplerSpec,
};
use recavar::verify::{appendix_counterexample, case1_closed_form, minimax_gap, property_suite};
use recavar::{LevelFunction, Portfolio, ScenarioSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or malformed inputs; maps to exit code 2.
    #[error("{0}")]
    Usage(String),
    /// Numerical or solver failure; maps to exit code 1.
    #[error("{0}")]
    Failure(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

/// Where the scenarios of an `eval`/`optimize`/`frontier` run come from:
/// exactly one of a scenario file or a sampled benchmark market.
#[derive(Debug, Clone)]
pub enum ScenarioSource {
    File(PathBuf),
    Sampled { count: usize, seed: u64, ell: f64 },
}

impl ScenarioSource {
    pub fn load(&self) -> Result<ScenarioSet, CliError> {
        match self {
            ScenarioSource::File(path) => load_scenarios(path)
                .map_err(|e| CliError::Usage(format!("scenario file {}: {e}", path.display()))),
            ScenarioSource::Sampled { count, seed, ell } => {
                sample_scenarios(&case2_market(*ell)?, *count, *seed)
                    .map_err(|e| CliError::Usage(format!("sampling: {e}")))
            }
        }
    }
}

/// The two-asset benchmark market: a thin-tailed asset, a heavy-tailed
/// asset with infinite variance, tail dependence between them, and a
/// constant liability of `ell` per unit of budget.
pub fn case2_market(ell: f64) -> Result<SamplerSpec, CliError> {
    if !(ell > 0.0 && ell < 1.0) {
        return Err(CliError::Usage(format!("ell must lie in (0, 1), got {ell}")));
    }
    Ok(SamplerSpec {
        marginals: vec![
            Marginal::Normal { mean: 0.0, std_dev: 0.015 },
            Marginal::StudentT { mean: 0.005, scale: 0.01, degrees_of_freedom: 2.0 },
        ],
        dependence: Dependence::TCopula {
            correlation: vec![vec![1.0, 0.2], vec![0.2, 1.0]],
            degrees_of_freedom: 2.0,
        },
        liability: Marginal::Constant { value: ell },
    })
}

/// Parses the `alpha:r(,alpha:r)*` level-function literal, e.g.
/// `0.005:0.99,0.01:1`. The last threshold must be 1; parse errors name the
/// offending entry.
pub fn parse_level_function(text: &str) -> Result<LevelFunction, CliError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(CliError::Usage("level function literal is empty".into()));
    }
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for (pos, part) in trimmed.split(',').enumerate() {
        let entry = pos + 1;
        let (alpha_text, r_text) = part.split_once(':').ok_or_else(|| {
            CliError::Usage(format!("level entry {entry} ('{part}'): expected alpha:r"))
        })?;
        let alpha: f64 = alpha_text.trim().parse().map_err(|_| {
            CliError::Usage(format!("level entry {entry}: bad tail level '{alpha_text}'"))
        })?;
        let r: f64 = r_text.trim().parse().map_err(|_| {
            CliError::Usage(format!("level entry {entry}: bad recovery threshold '{r_text}'"))
        })?;
        if let Some(&(prev_alpha, prev_r)) = pairs.last() {
            if alpha <= prev_alpha {
                return Err(CliError::Usage(format!(
                    "level entry {entry}: tail level {alpha} does not increase past {prev_alpha}"
                )));
            }
            if r <= prev_r {
                return Err(CliError::Usage(format!(
                    "level entry {entry}: recovery threshold {r} does not increase past {prev_r}"
                )));
            }
        }
        pairs.push((alpha, r));
    }
    let last = pairs.len();
    if (pairs[last - 1].1 - 1.0).abs() > 1e-12 {
        return Err(CliError::Usage(format!(
            "level entry {last}: last recovery threshold must be 1, got {}",
            pairs[last - 1].1
        )));
    }
    LevelFunction::from_pairs(&pairs)
        .map_err(|e| CliError::Usage(format!("level function: {e}")))
}

/// Parses the `lo:hi:steps` grid literal into `steps` evenly spaced targets.
pub fn parse_mu_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = text.trim().split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!("mu grid '{text}': expected lo:hi:steps")));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| CliError::Usage(format!("mu grid: bad lower bound '{}'", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| CliError::Usage(format!("mu grid: bad upper bound '{}'", parts[1])))?;
    let steps: usize = parts[2]
        .parse()
        .map_err(|_| CliError::Usage(format!("mu grid: bad step count '{}'", parts[2])))?;
    if steps == 0 {
        return Err(CliError::Usage("mu grid: needs at least one step".into()));
    }
    if !lo.is_finite() || !hi.is_finite() || hi < lo {
        return Err(CliError::Usage(format!("mu grid: empty range {lo}..{hi}")));
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect())
}

pub fn parse_weights(text: &str) -> Result<Vec<f64>, CliError> {
    text.trim()
        .split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("weights: bad entry '{part}'")))
        })
        .collect()
}

/// One probability per line; blank lines are skipped.
fn parse_probability_file(path: &Path, expected: usize) -> Result<Vec<f64>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("mixture file {}: {e}", path.display())))?;
    let mut probs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        probs.push(line.parse::<f64>().map_err(|_| {
            CliError::Usage(format!(
                "mixture file {} line {}: bad probability '{line}'",
                path.display(),
                idx + 1
            ))
        })?);
    }
    if probs.len() != expected {
        return Err(CliError::Usage(format!(
            "mixture file {}: {} probabilities for {} outcomes",
            path.display(),
            probs.len(),
            expected
        )));
    }
    Ok(probs)
}

/// Assembles the uncertainty model from the mutually exclusive model flags.
pub fn build_model(
    scen: &ScenarioSet,
    box_c: Option<f64>,
    mixture_paths: &[PathBuf],
) -> Result<UncertaintyModel, CliError> {
    match (box_c, mixture_paths.is_empty()) {
        (Some(_), false) => {
            Err(CliError::Usage("choose either --box-c or --mixture, not both".into()))
        }
        (Some(c), true) => UncertaintyModel::uniform_box(c, scen.num_outcomes())
            .map_err(|e| CliError::Usage(format!("--box-c: {e}"))),
        (None, false) => {
            let vectors = mixture_paths
                .iter()
                .map(|p| parse_probability_file(p, scen.num_outcomes()))
                .collect::<Result<Vec<_>, _>>()?;
            let model = UncertaintyModel::Mixture(vectors);
            model.validate(scen).map_err(|e| CliError::Usage(format!("--mixture: {e}")))?;
            Ok(model)
        }
        (None, true) => Ok(UncertaintyModel::Nominal),
    }
}

fn write_output(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn sig(x: f64) -> String {
    format!("{x:.16e}")
}

/// Risk, capital, and worst-case mean of fixed weights.
pub fn run_eval(
    source: &ScenarioSource,
    levels: &str,
    weights_text: &str,
    box_c: Option<f64>,
    mixture_paths: &[PathBuf],
    out: Option<&Path>,
) -> Result<i32, CliError> {
    let scen = source.load()?;
    let gamma = parse_level_function(levels)?;
    let weights = parse_weights(weights_text)?;
    Portfolio::new(weights.clone()).map_err(|e| CliError::Usage(format!("weights: {e}")))?;
    let model = build_model(&scen, box_c, mixture_paths)?;
    let risk = portfolio_risk(&scen, &gamma, &model, &weights)
        .map_err(|e| CliError::Usage(format!("{e}")))?;
    let mean = portfolio_worst_case_mean(&scen, &model, &weights)
        .map_err(|e| CliError::Usage(format!("{e}")))?;
    let mut table = String::from("risk,capital,worst_case_mean\n");
    let _ = writeln!(table, "{},{},{}", sig(risk), sig(risk - 1.0), sig(mean));
    write_output(out, &table)?;
    Ok(0)
}

/// Solves one mean-risk program and reports status, risk, and weights.
pub fn run_optimize(
    source: &ScenarioSource,
    levels: &str,
    mu: f64,
    box_c: Option<f64>,
    mixture_paths: &[PathBuf],
    out: Option<&Path>,
) -> Result<i32, CliError> {
    let scen = source.load()?;
    let gamma = parse_level_function(levels)?;
    let model = build_model(&scen, box_c, mixture_paths)?;
    let opt = solve_mean_risk(&scen, &gamma, mu, &model)
        .map_err(|e| CliError::Failure(format!("{e}")))?;
    let mut table = header_with_weights("status,risk,capital", scen.num_assets());
    push_solution_row(&mut table, &format!("{}", opt.status), opt.risk, &opt.weights, scen.num_assets());
    write_output(out, &table)?;
    Ok(if opt.status == SolveStatus::Optimal || opt.status == SolveStatus::Infeasible {
        0
    } else {
        1
    })
}

/// Sweeps the target-return grid and writes one row per target.
pub fn run_frontier(
    source: &ScenarioSource,
    levels: &str,
    mu_grid_text: &str,
    box_c: Option<f64>,
    mixture_paths: &[PathBuf],
    out: Option<&Path>,
) -> Result<i32, CliError> {
    let scen = source.load()?;
    let gamma = parse_level_function(levels)?;
    let grid = parse_mu_grid(mu_grid_text)?;
    let model = build_model(&scen, box_c, mixture_paths)?;
    let points = efficient_frontier(&scen, &gamma, &model, &grid)
        .map_err(|e| CliError::Failure(format!("{e}")))?;
    let mut table = header_with_weights("mu,status,risk,capital", scen.num_assets());
    let mut failed = false;
    for point in &points {
        let mut row = format!("{},", sig(point.mu));
        row.push_str(&format!("{}", point.status));
        table.push_str(&row);
        finish_solution_row(&mut table, point.risk, &point.weights, scen.num_assets());
        failed |= point.status == SolveStatus::Failed;
    }
    write_output(out, &table)?;
    Ok(if failed { 1 } else { 0 })
}

fn header_with_weights(prefix: &str, assets: usize) -> String {
    let mut header = String::from(prefix);
    for k in 1..=assets {
        let _ = write!(header, ",weight_{k}");
    }
    header.push('\n');
    header
}

fn push_solution_row(
    table: &mut String,
    status: &str,
    risk: f64,
    weights: &Option<Portfolio>,
    assets: usize,
) {
    table.push_str(status);
    finish_solution_row(table, risk, weights, assets);
}

// Risk and weight cells stay empty unless the point is optimal.
fn finish_solution_row(table: &mut String, risk: f64, weights: &Option<Portfolio>, assets: usize) {
    match weights {
        Some(portfolio) => {
            let _ = write!(table, ",{},{}", sig(risk), sig(risk - 1.0));
            for &w in portfolio.weights() {
                let _ = write!(table, ",{}", sig(w));
            }
        }
        None => {
            for _ in 0..assets + 2 {
                table.push(',');
            }
        }
    }
    table.push('\n');
}

/// The two-point market report: optimal risky weights by closed form and by
/// the program over a tail-level sweep, then recovery probabilities under
/// plain and recovery-aware capitalization.
pub fn run_case1(beta: f64, r: f64, ell: f64, out: Option<&Path>) -> Result<i32, CliError> {
    case1_closed_form(beta, r, ell).map_err(|e| CliError::Usage(format!("{e}")))?;
    let scen = ScenarioSet::exact_two_point(0.005, 0.999, -0.04, ell)
        .map_err(|e| CliError::Usage(format!("{e}")))?;

    let mut betas: Vec<f64> = (1..20).map(|k| k as f64 * 5e-4).collect();
    if betas.iter().all(|b| (b - beta).abs() > 1e-15) {
        betas.push(beta);
        betas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }

    let mut table = String::from("beta,x_closed_form,x_program\n");
    let mut mismatch: Option<(f64, f64, f64)> = None;
    for &b in &betas {
        let (x_closed, _) = case1_closed_form(b, r, ell).map_err(|e| CliError::Usage(format!("{e}")))?;
        let gamma = LevelFunction::from_pairs(&[(b, r), (0.01, 1.0)])
            .map_err(|e| CliError::Usage(format!("{e}")))?;
        let opt = solve_mean_risk(&scen, &gamma, 0.0, &UncertaintyModel::Nominal)
            .map_err(|e| CliError::Failure(format!("{e}")))?;
        let weights = opt
            .weights
            .as_ref()
            .ok_or_else(|| CliError::Failure(format!("program infeasible at beta {b}")))?;
        let x_program = weights.weights()[1];
        let _ = writeln!(table, "{},{},{}", sig(b), sig(x_closed), sig(x_program));
        if (x_closed - x_program).abs() > 1e-6 && mismatch.is_none() {
            mismatch = Some((b, x_closed, x_program));
        }
    }
    if let Some((b, closed, program)) = mismatch {
        let _ = writeln!(
            table,
            "# mismatch at beta={}: closed form {} vs program {} (diff {})",
            sig(b),
            sig(closed),
            sig(program),
            sig((closed - program).abs())
        );
    }

    table.push('\n');
    table.push_str("lambda,recovery_avar,recovery_recavar\n");
    let anchor_gamma = LevelFunction::flat(0.01).map_err(|e| CliError::Failure(format!("{e}")))?;
    let gamma = LevelFunction::from_pairs(&[(beta, r), (0.01, 1.0)])
        .map_err(|e| CliError::Usage(format!("{e}")))?;
    // Full investment is optimal under the plain tail measure: the risky
    // tail average at the anchor level is negative.
    let x_avar = Portfolio::new(vec![0.0, 1.0]).map_err(|e| CliError::Failure(format!("{e}")))?;
    let (x_star, _) = case1_closed_form(beta, r, ell).map_err(|e| CliError::Usage(format!("{e}")))?;
    let x_rec = Portfolio::new(vec![1.0 - x_star, x_star])
        .map_err(|e| CliError::Failure(format!("{e}")))?;
    let capital_avar =
        portfolio_risk(&scen, &anchor_gamma, &UncertaintyModel::Nominal, x_avar.weights())
            .map_err(|e| CliError::Failure(format!("{e}")))?
            - 1.0;
    let capital_rec = portfolio_risk(&scen, &gamma, &UncertaintyModel::Nominal, x_rec.weights())
        .map_err(|e| CliError::Failure(format!("{e}")))?
        - 1.0;
    for step in 1..200 {
        let lambda = step as f64 * 0.005;
        let p_avar = recovery_probability(&scen, &x_avar, 1.0, capital_avar, lambda)
            .map_err(|e| CliError::Failure(format!("{e}")))?;
        let p_rec = recovery_probability(&scen, &x_rec, 1.0, capital_rec, lambda)
            .map_err(|e| CliError::Failure(format!("{e}")))?;
        let _ = writeln!(table, "{},{},{}", sig(lambda), sig(p_avar), sig(p_rec));
    }

    write_output(out, &table)?;
    Ok(if mismatch.is_some() { 1 } else { 0 })
}

/// Samples the benchmark market once, then sweeps the efficient frontier for
/// every box half-width in `c_list`. Rows are written only for optimal
/// points; the exit code certifies monotonicity in the target and the width.
pub fn run_case2(
    m: usize,
    seed: u64,
    ell: f64,
    c_list: &[f64],
    mu_grid: &[f64],
    out: Option<&Path>,
) -> Result<i32, CliError> {
    if m < 100 {
        return Err(CliError::Usage(format!("needs at least 100 scenarios, got {m}")));
    }
    if mu_grid.is_empty() {
        return Err(CliError::Usage("mu grid is empty".into()));
    }
    let cap = 1.0 / m as f64;
    for &c in c_list {
        if !(0.0..=cap).contains(&c) {
            return Err(CliError::Usage(format!(
                "box half-width {c} outside [0, {cap}] for {m} scenarios"
            )));
        }
    }
    let c_list: Vec<f64> = if c_list.is_empty() { vec![0.0] } else { c_list.to_vec() };
    let scen = sample_scenarios(&case2_market(ell)?, m, seed)
        .map_err(|e| CliError::Usage(format!("sampling: {e}")))?;
    let gamma = LevelFunction::from_pairs(&[(0.005, 0.9), (0.01, 1.0)])
        .map_err(|e| CliError::Failure(format!("{e}")))?;

    let mut table = String::from("c,mu,risk,x\n");
    // risks[c_idx][mu_idx] holds optimal risks for the cross-width check.
    let mut risks: Vec<Vec<Option<f64>>> = Vec::with_capacity(c_list.len());
    let mut failed = false;
    for &c in &c_list {
        let model = UncertaintyModel::uniform_box(c, m)
            .map_err(|e| CliError::Usage(format!("box half-width: {e}")))?;
        let points = efficient_frontier(&scen, &gamma, &model, mu_grid)
            .map_err(|e| CliError::Failure(format!("{e}")))?;
        let mut row = Vec::with_capacity(points.len());
        for point in &points {
            match point.status {
                SolveStatus::Optimal => {
                    let weights = point.weights.as_ref().expect("optimal point carries weights");
                    let _ = writeln!(
                        table,
                        "{},{},{},{}",
                        sig(c),
                        sig(point.mu),
                        sig(point.risk),
                        sig(weights.weights()[1])
                    );
                    row.push(Some(point.risk));
                }
                SolveStatus::Infeasible => row.push(None),
                _ => {
                    row.push(None);
                    failed = true;
                }
            }
        }
        risks.push(row);
    }
    write_output(out, &table)?;
    if failed {
        return Ok(1);
    }

    let mut monotone = true;
    for row in &risks {
        let feasible: Vec<f64> = row.iter().flatten().copied().collect();
        monotone &= feasible.windows(2).all(|w| w[1] >= w[0] - 1e-6);
    }
    for wider in 1..risks.len() {
        for narrower in 0..wider {
            // Widths arrive in the caller's order; only compare nested ones.
            if c_list[wider] < c_list[narrower] {
                continue;
            }
            for point in 0..mu_grid.len() {
                if let (Some(narrow), Some(wide)) = (risks[narrower][point], risks[wider][point]) {
                    monotone &= wide >= narrow - 1e-6;
                }
            }
        }
    }
    Ok(if monotone { 0 } else { 1 })
}

/// Runs the randomized property suite, a minimax gap batch, and the
/// shared-scalar counterexample; exits zero only if everything passes.
pub fn run_verify(seed: u64, trials: usize, out: Option<&Path>) -> Result<i32, CliError> {
    if trials == 0 {
        return Err(CliError::Usage("needs at least one trial".into()));
    }
    let report = property_suite(seed, trials).map_err(|e| CliError::Usage(format!("{e}")))?;

    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x5DEE_CE66);
    let mut worst_gap = 0.0f64;
    const GAP_INSTANCES: usize = 25;
    for _ in 0..GAP_INSTANCES {
        let (scen, gamma, x) = random_gap_instance(&mut rng)?;
        let (lhs, rhs) =
            minimax_gap(&scen, &x, &gamma).map_err(|e| CliError::Failure(format!("{e}")))?;
        worst_gap = worst_gap.max((lhs - rhs).abs());
    }
    let gap_ok = worst_gap <= 1e-7;

    let (separate, shared) = appendix_counterexample();
    let counterexample_ok = separate == 0.0 && shared == 1.0;

    let passed = report.passed() && gap_ok && counterexample_ok;
    let mut text = report.to_text();
    let _ = writeln!(
        text,
        "minimax batch: {GAP_INSTANCES} instances, worst gap {worst_gap:.3e} ({})",
        if gap_ok { "pass" } else { "FAIL" }
    );
    let _ = writeln!(
        text,
        "shared-scalar counterexample: separate minima max {separate}, shared minimum {shared} ({})",
        if counterexample_ok { "pass" } else { "FAIL" }
    );
    let _ = writeln!(text, "verify: {}", if passed { "pass" } else { "FAIL" });
    text.push('\n');
    text.push_str(&report.to_csv());
    write_output(out, &text)?;
    Ok(if passed { 0 } else { 1 })
}

fn random_gap_instance(
    rng: &mut ChaCha12Rng,
) -> Result<(ScenarioSet, LevelFunction, Portfolio), CliError> {
    let m = rng.random_range(3..=40);
    let k = rng.random_range(1..=3);
    let rows: Vec<Vec<f64>> =
        (0..m).map(|_| (0..k).map(|_| rng.random_range(-0.5..0.5)).collect()).collect();
    let liabilities: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..0.3)).collect();
    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
    let scen = ScenarioSet::new(rows, liabilities, probs)
        .map_err(|e| CliError::Failure(format!("{e}")))?;

    let levels = rng.random_range(1..=4);
    let mut alphas: Vec<f64> = (0..levels).map(|_| rng.random_range(0.001..0.2)).collect();
    alphas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    alphas.dedup_by(|a, b| (*a - *b).abs() < 1e-4);
    let pairs: Vec<(f64, f64)> = alphas
        .iter()
        .enumerate()
        .map(|(i, &a)| (a, (i + 1) as f64 / alphas.len() as f64))
        .collect();
    let gamma =
        LevelFunction::from_pairs(&pairs).map_err(|e| CliError::Failure(format!("{e}")))?;

    let raw_w: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
    let total_w: f64 = raw_w.iter().sum();
    let x = Portfolio::new(raw_w.iter().map(|w| w / total_w).collect())
        .map_err(|e| CliError::Failure(format!("{e}")))?;
    Ok((scen, gamma, x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_literals_parse_with_positions() {
        let gamma = parse_level_function("0.005:0.99,0.01:1").unwrap();
        assert_eq!(gamma.num_levels(), 2);
        let single = parse_level_function("0.01:1").unwrap();
        assert_eq!(single.num_levels(), 1);

        let err = parse_level_function("0.01:0.5,0.005:1").unwrap_err();
        assert!(err.to_string().contains("entry 2"), "{err}");
        let err = parse_level_function("0.005:0.99,0.01:0.999").unwrap_err();
        assert!(err.to_string().contains("must be 1"), "{err}");
        let err = parse_level_function("0.005").unwrap_err();
        assert!(err.to_string().contains("expected alpha:r"), "{err}");
        assert!(parse_level_function("").is_err());
        assert_eq!(parse_level_function("x:1").unwrap_err().exit_code(), 2);
    }

    #[test]
    fn mu_grids_parse() {
        assert_eq!(parse_mu_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_mu_grid("0.5:0.5:1").unwrap(), vec![0.5]);
        assert!(parse_mu_grid("1:0:3").is_err());
        assert!(parse_mu_grid("0:1:0").is_err());
        assert!(parse_mu_grid("0:1").is_err());
        assert!(parse_mu_grid("a:1:3").is_err());
    }

    #[test]
    fn significant_digits_survive_round_trips() {
        for &x in &[2.0 / 9.0, -0.0005, 1e-12, 0.999] {
            let text = sig(x);
            assert_eq!(text.parse::<f64>().unwrap(), x, "{text}");
        }
    }
}
