//! Monte Carlo scenario generation from parametric market models.
//!
//! Draw order is part of the contract: outcomes are generated one at a time
//! from a counter-based stream cipher seeded with the caller's seed, so the
//! same `(spec, count, seed)` triple always produces the identical scenario
//! set, bit for bit. Per outcome the stream is consumed as follows:
//!
//! - independent marginals: one uniform per non-constant asset marginal,
//! - t-copula: one standard normal per asset (constant or not), then one
//!   chi-squared draw,
//!
//! followed by one uniform for the liability if it is not constant.

use super::quantiles::{normal_quantile, student_t_cdf, student_t_quantile};
use super::{ScenarioError, ScenarioSet};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

/// One-dimensional law for an asset return or the liability.
#[derive(Debug, Clone, PartialEq)]
pub enum Marginal {
    Normal { mean: f64, std_dev: f64 },
    StudentT { mean: f64, scale: f64, degrees_of_freedom: f64 },
    TwoPoint { up: f64, prob_up: f64, down: f64 },
    Constant { value: f64 },
}

impl Marginal {
    fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: String| Err(ScenarioError::InvalidSpec(msg));
        match *self {
            Marginal::Normal { mean, std_dev } => {
                if !mean.is_finite() || !(std_dev > 0.0) || !std_dev.is_finite() {
                    return bad(format!("normal({mean}, {std_dev})"));
                }
            }
            Marginal::StudentT { mean, scale, degrees_of_freedom } => {
                if !mean.is_finite()
                    || !(scale > 0.0)
                    || !scale.is_finite()
                    || !(degrees_of_freedom > 0.0)
                    || !degrees_of_freedom.is_finite()
                {
                    return bad(format!("student_t({mean}, {scale}, {degrees_of_freedom})"));
                }
            }
            Marginal::TwoPoint { up, prob_up, down } => {
                if !up.is_finite() || !down.is_finite() || !(0.0..=1.0).contains(&prob_up) {
                    return bad(format!("two_point({up}, {prob_up}, {down})"));
                }
            }
            Marginal::Constant { value } => {
                if !value.is_finite() {
                    return bad(format!("constant({value})"));
                }
            }
        }
        Ok(())
    }

    fn is_constant(&self) -> bool {
        matches!(self, Marginal::Constant { .. })
    }

    /// Inverse CDF at `u` in (0, 1).
    fn quantile(&self, u: f64) -> Result<f64, ScenarioError> {
        match *self {
            Marginal::Normal { mean, std_dev } => Ok(mean + std_dev * normal_quantile(u)?),
            Marginal::StudentT { mean, scale, degrees_of_freedom } => {
                Ok(mean + scale * student_t_quantile(u, degrees_of_freedom)?)
            }
            Marginal::TwoPoint { up, prob_up, down } => {
                Ok(if u <= 1.0 - prob_up { down } else { up })
            }
            Marginal::Constant { value } => Ok(value),
        }
    }
}

/// Joint structure across asset marginals.
#[derive(Debug, Clone, PartialEq)]
pub enum Dependence {
    Independent,
    /// Elliptical copula of a multivariate Student-t law: correlated normals
    /// divided by a shared chi-squared mixing draw, pushed through the
    /// univariate t CDF.
    TCopula { correlation: Vec<Vec<f64>>, degrees_of_freedom: f64 },
}

/// Full description of a market model to sample from.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerSpec {
    pub marginals: Vec<Marginal>,
    pub dependence: Dependence,
    pub liability: Marginal,
}

impl SamplerSpec {
    fn validate(&self) -> Result<(), ScenarioError> {
        if self.marginals.is_empty() {
            return Err(ScenarioError::InvalidSpec("no asset marginals".into()));
        }
        for m in &self.marginals {
            m.validate()?;
        }
        self.liability.validate()?;
        match &self.dependence {
            Dependence::Independent => {}
            Dependence::TCopula { correlation, degrees_of_freedom } => {
                let k = self.marginals.len();
                if !(*degrees_of_freedom > 0.0) || !degrees_of_freedom.is_finite() {
                    return Err(ScenarioError::InvalidSpec(format!(
                        "copula degrees of freedom {degrees_of_freedom}"
                    )));
                }
                if correlation.len() != k || correlation.iter().any(|r| r.len() != k) {
                    return Err(ScenarioError::InvalidSpec(format!(
                        "correlation matrix must be {k} x {k}"
                    )));
                }
                for i in 0..k {
                    if (correlation[i][i] - 1.0).abs() > 1e-12 {
                        return Err(ScenarioError::InvalidSpec(
                            "correlation diagonal must be 1".into(),
                        ));
                    }
                    for j in 0..k {
                        let v = correlation[i][j];
                        if !v.is_finite() || (v - correlation[j][i]).abs() > 1e-12 {
                            return Err(ScenarioError::InvalidSpec(
                                "correlation matrix must be symmetric and finite".into(),
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Lower-triangular Cholesky factor; zero pivots are tolerated (semidefinite
/// case) and the factorization is verified by reconstruction, which rejects
/// indefinite matrices that slip past the pivot test.
fn cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, ScenarioError> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s < -1e-10 {
                    return Err(ScenarioError::NotPositiveSemidefinite);
                }
                l[i][j] = s.max(0.0).sqrt();
            } else {
                l[i][j] = if l[j][j] > 0.0 { s / l[j][j] } else { 0.0 };
            }
        }
    }
    for i in 0..n {
        for j in 0..=i {
            let mut s = 0.0;
            for k in 0..n {
                s += l[i][k] * l[j][k];
            }
            if (s - a[i][j]).abs() > 1e-8 {
                return Err(ScenarioError::NotPositiveSemidefinite);
            }
        }
    }
    Ok(l)
}

/// Uniform draw strictly inside (0, 1): 53 high bits of a word, centered.
fn unit_open(rng: &mut ChaCha12Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

// Copula outputs are clamped away from {0, 1} so marginal quantiles stay finite.
const U_LO: f64 = 1e-300;
const U_HI: f64 = 1.0 - f64::EPSILON / 2.0;

/// Draws `count` equally weighted outcomes from the market model. Each
/// outcome carries probability exactly `1 / count`.
pub fn sample_scenarios(
    spec: &SamplerSpec,
    count: usize,
    seed: u64,
) -> Result<ScenarioSet, ScenarioError> {
    spec.validate()?;
    if count == 0 {
        return Err(ScenarioError::InvalidSpec("sample count must be positive".into()));
    }
    let k = spec.marginals.len();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let chol = match &spec.dependence {
        Dependence::Independent => None,
        Dependence::TCopula { correlation, degrees_of_freedom } => Some((
            cholesky(correlation)?,
            ChiSquared::new(*degrees_of_freedom).map_err(|e| {
                ScenarioError::InvalidSpec(format!("copula degrees of freedom: {e}"))
            })?,
            *degrees_of_freedom,
        )),
    };

    let mut returns = Vec::with_capacity(count * k);
    let mut liabilities = Vec::with_capacity(count);
    let mut z = vec![0.0; k];
    for _ in 0..count {
        match &chol {
            None => {
                for marg in &spec.marginals {
                    if marg.is_constant() {
                        returns.push(marg.quantile(0.5)?);
                    } else {
                        returns.push(marg.quantile(unit_open(&mut rng))?);
                    }
                }
            }
            Some((l, chi, df)) => {
                for zi in z.iter_mut() {
                    *zi = StandardNormal.sample(&mut rng);
                }
                let mut g = chi.sample(&mut rng);
                while !(g > 0.0) {
                    g = chi.sample(&mut rng);
                }
                let shrink = (g / df).sqrt();
                for (i, marg) in spec.marginals.iter().enumerate() {
                    let mut w = 0.0;
                    for (j, zj) in z.iter().enumerate().take(i + 1) {
                        w += l[i][j] * zj;
                    }
                    let t = w / shrink;
                    let u = student_t_cdf(t, *df).clamp(U_LO, U_HI);
                    returns.push(marg.quantile(u)?);
                }
            }
        }
        if spec.liability.is_constant() {
            liabilities.push(spec.liability.quantile(0.5)?);
        } else {
            liabilities.push(spec.liability.quantile(unit_open(&mut rng))?);
        }
    }
    let p = 1.0 / count as f64;
    ScenarioSet::from_flat(returns, k, liabilities, vec![p; count])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn market(rho: f64, ell: f64) -> SamplerSpec {
        SamplerSpec {
            marginals: vec![
                Marginal::Normal { mean: 0.0, std_dev: 0.015 },
                Marginal::StudentT { mean: 0.005, scale: 0.01, degrees_of_freedom: 2.0 },
            ],
            dependence: Dependence::TCopula {
                correlation: vec![vec![1.0, rho], vec![rho, 1.0]],
                degrees_of_freedom: 2.0,
            },
            liability: Marginal::Constant { value: ell },
        }
    }

    #[test]
    fn same_seed_same_bits() {
        let spec = market(0.2, 0.1);
        let a = sample_scenarios(&spec, 500, 7).unwrap();
        let b = sample_scenarios(&spec, 500, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_scenarios(&spec, 500, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn equal_probabilities_and_constant_liability() {
        let m = 1000;
        let set = sample_scenarios(&market(0.2, 0.1), m, 3).unwrap();
        assert_eq!(set.num_outcomes(), m);
        assert_eq!(set.num_assets(), 2);
        let p = 1.0 / m as f64;
        assert!(set.probabilities().iter().all(|&q| q == p));
        assert!(set.liabilities().iter().all(|&z| z == 0.1));
    }

    #[test]
    fn constant_marginal_consumes_no_randomness() {
        // Prefixing a constant asset must not shift the stream the other
        // asset draws from.
        let with_cash = SamplerSpec {
            marginals: vec![
                Marginal::Constant { value: 0.0 },
                Marginal::Normal { mean: 0.0, std_dev: 0.015 },
            ],
            dependence: Dependence::Independent,
            liability: Marginal::Constant { value: 0.1 },
        };
        let alone = SamplerSpec {
            marginals: vec![Marginal::Normal { mean: 0.0, std_dev: 0.015 }],
            dependence: Dependence::Independent,
            liability: Marginal::Constant { value: 0.1 },
        };
        let a = sample_scenarios(&with_cash, 200, 11).unwrap();
        let b = sample_scenarios(&alone, 200, 11).unwrap();
        for j in 0..200 {
            assert_eq!(a.asset_return(j, 0), 0.0);
            assert_eq!(a.asset_return(j, 1), b.asset_return(j, 0));
        }
    }

    #[test]
    fn sample_moments_near_model_moments() {
        let m = 50_000;
        let set = sample_scenarios(&market(0.2, 0.1), m, 42).unwrap();
        // Normal column: sample mean within 3 standard errors of 0.
        let mean1: f64 = (0..m).map(|j| set.asset_return(j, 0)).sum::<f64>() / m as f64;
        let se = 0.015 / (m as f64).sqrt();
        assert!(mean1.abs() <= 3.0 * se, "mean {mean1} vs 3se {}", 3.0 * se);
        // Heavy-tailed column has infinite variance; check the median instead.
        let mut col2: Vec<f64> = (0..m).map(|j| set.asset_return(j, 1)).collect();
        col2.sort_by(f64::total_cmp);
        let median = 0.5 * (col2[m / 2 - 1] + col2[m / 2]);
        assert!((median - 0.005).abs() <= 3e-4, "median {median}");
    }

    /// Kendall rank correlation by pair counting.
    fn kendall_tau(xs: &[f64], ys: &[f64]) -> f64 {
        let n = xs.len();
        let mut concordant = 0i64;
        let mut discordant = 0i64;
        for i in 0..n {
            for j in (i + 1)..n {
                let s = (xs[i] - xs[j]) * (ys[i] - ys[j]);
                if s > 0.0 {
                    concordant += 1;
                } else if s < 0.0 {
                    discordant += 1;
                }
            }
        }
        (concordant - discordant) as f64 / (0.5 * (n * (n - 1)) as f64)
    }

    #[test]
    fn copula_rank_correlation_tracks_rho() {
        let m = 5000;
        let xs: Vec<f64>;
        let ys: Vec<f64>;
        let set = sample_scenarios(&market(0.2, 0.1), m, 5).unwrap();
        xs = (0..m).map(|j| set.asset_return(j, 0)).collect();
        ys = (0..m).map(|j| set.asset_return(j, 1)).collect();
        // For elliptical copulas tau = (2/pi) asin(rho).
        let target = 2.0 / std::f64::consts::PI * 0.2f64.asin();
        let tau = kendall_tau(&xs, &ys);
        assert!((tau - target).abs() <= 0.025, "tau {tau} vs {target}");

        let ind = sample_scenarios(&market(0.0, 0.1), m, 6).unwrap();
        let xs: Vec<f64> = (0..m).map(|j| ind.asset_return(j, 0)).collect();
        let ys: Vec<f64> = (0..m).map(|j| ind.asset_return(j, 1)).collect();
        let tau0 = kendall_tau(&xs, &ys);
        assert!(tau0.abs() <= 0.02, "tau {tau0} under zero correlation");
    }

    #[test]
    fn two_point_marginal_hits_both_atoms() {
        let spec = SamplerSpec {
            marginals: vec![Marginal::TwoPoint { up: 0.005, prob_up: 0.999, down: -0.04 }],
            dependence: Dependence::Independent,
            liability: Marginal::Constant { value: 0.1 },
        };
        let m = 20_000;
        let set = sample_scenarios(&spec, m, 9).unwrap();
        let mut downs = 0usize;
        for j in 0..m {
            let r = set.asset_return(j, 0);
            assert!(r == 0.005 || r == -0.04, "unexpected value {r}");
            if r == -0.04 {
                downs += 1;
            }
        }
        // Binomial(20000, 0.001): mean 20, sd ~4.5; allow 5 sigma.
        assert!(downs >= 1 && downs <= 43, "{downs} down moves");
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let base = market(0.2, 0.1);
        assert!(sample_scenarios(&base, 0, 1).is_err());

        let mut bad = base.clone();
        bad.marginals[0] = Marginal::Normal { mean: 0.0, std_dev: -1.0 };
        assert!(sample_scenarios(&bad, 10, 1).is_err());

        let mut bad = base.clone();
        bad.marginals[1] =
            Marginal::StudentT { mean: 0.0, scale: 0.01, degrees_of_freedom: 0.0 };
        assert!(sample_scenarios(&bad, 10, 1).is_err());

        let mut bad = base.clone();
        bad.dependence = Dependence::TCopula {
            correlation: vec![vec![1.0, 0.2]],
            degrees_of_freedom: 2.0,
        };
        assert!(sample_scenarios(&bad, 10, 1).is_err());

        let mut bad = base.clone();
        bad.dependence = Dependence::TCopula {
            correlation: vec![vec![1.0, 0.3], vec![0.2, 1.0]],
            degrees_of_freedom: 2.0,
        };
        assert!(sample_scenarios(&bad, 10, 1).is_err());

        let mut bad = base;
        bad.dependence = Dependence::TCopula {
            correlation: vec![vec![1.0, 0.2], vec![0.2, 0.5]],
            degrees_of_freedom: 2.0,
        };
        assert!(sample_scenarios(&bad, 10, 1).is_err());
    }

    #[test]
    fn indefinite_correlation_is_rejected() {
        let spec = SamplerSpec {
            marginals: vec![
                Marginal::Normal { mean: 0.0, std_dev: 1.0 },
                Marginal::Normal { mean: 0.0, std_dev: 1.0 },
                Marginal::Normal { mean: 0.0, std_dev: 1.0 },
            ],
            dependence: Dependence::TCopula {
                correlation: vec![
                    vec![1.0, 0.9, 0.0],
                    vec![0.9, 1.0, 0.9],
                    vec![0.0, 0.9, 1.0],
                ],
                degrees_of_freedom: 2.0,
            },
            liability: Marginal::Constant { value: 0.1 },
        };
        match sample_scenarios(&spec, 10, 1) {
            Err(ScenarioError::NotPositiveSemidefinite) => {}
            other => panic!("expected NotPositiveSemidefinite, got {other:?}"),
        }
    }

    #[test]
    fn cholesky_reconstructs_psd_matrices() {
        let a = vec![
            vec![1.0, 0.5, 0.3],
            vec![0.5, 1.0, 0.1],
            vec![0.3, 0.1, 1.0],
        ];
        let l = cholesky(&a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| l[i][k] * l[j][k]).sum();
                assert!((s - a[i][j]).abs() < 1e-12);
            }
        }
        // Rank-deficient but semidefinite: perfectly correlated pair.
        let sing = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(cholesky(&sing).is_ok());
    }
}
