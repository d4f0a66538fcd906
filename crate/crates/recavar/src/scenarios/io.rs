//! Plain-text persistence for scenario sets.
//!
//! Layout: a header line `R1,...,RK,Z,prob`, then one comma-separated line
//! per outcome. Floats are written with 17 significant digits, which is
//! enough for a save/load round trip to reproduce every value bit for bit.

use super::{ScenarioError, ScenarioSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub fn save_scenarios(set: &ScenarioSet, path: &Path) -> Result<(), ScenarioError> {
    let m = set.num_outcomes();
    let k = set.num_assets();
    let mut out = String::with_capacity((m + 1) * (k + 2) * 26);
    for a in 1..=k {
        let _ = write!(out, "R{a},");
    }
    out.push_str("Z,prob\n");
    for j in 0..m {
        for &r in set.outcome_returns(j) {
            let _ = write!(out, "{r:.16e},");
        }
        let _ = writeln!(out, "{:.16e},{:.16e}", set.liability(j), set.probability(j));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn load_scenarios(path: &Path) -> Result<ScenarioSet, ScenarioError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(ScenarioError::Parse {
        line: 1,
        message: "no header".into(),
    })?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[cols.len() - 2] != "Z" || cols[cols.len() - 1] != "prob" {
        return Err(ScenarioError::Parse {
            line: 1,
            message: format!("malformed header {header:?}, expected R1,...,Z,prob"),
        });
    }
    let k = cols.len() - 2;
    for (a, col) in cols[..k].iter().enumerate() {
        if *col != format!("R{}", a + 1) {
            return Err(ScenarioError::Parse {
                line: 1,
                message: format!("malformed header column {col:?}, expected R{}", a + 1),
            });
        }
    }

    let mut returns = Vec::new();
    let mut liabilities = Vec::new();
    let mut probabilities = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != k + 2 {
            return Err(ScenarioError::Parse {
                line,
                message: format!("expected {} fields, got {}", k + 2, fields.len()),
            });
        }
        let mut parsed = Vec::with_capacity(k + 2);
        for f in &fields {
            let v: f64 = f.trim().parse().map_err(|_| ScenarioError::Parse {
                line,
                message: format!("bad number {f:?}"),
            })?;
            if !v.is_finite() {
                return Err(ScenarioError::Parse {
                    line,
                    message: format!("non-finite value {f:?}"),
                });
            }
            parsed.push(v);
        }
        let prob = parsed[k + 1];
        if prob < 0.0 {
            return Err(ScenarioError::Parse {
                line,
                message: format!("negative probability {prob}"),
            });
        }
        returns.extend_from_slice(&parsed[..k]);
        liabilities.push(parsed[k]);
        probabilities.push(prob);
    }
    if liabilities.is_empty() {
        return Err(ScenarioError::InvalidSet("no data rows".into()));
    }
    ScenarioSet::from_flat(returns, k, liabilities, probabilities)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::path::PathBuf;
    use std::sync::atomic::{AtomicU64, Ordering};

    static COUNTER: AtomicU64 = AtomicU64::new(0);

    fn temp_path(tag: &str) -> PathBuf {
        let n = COUNTER.fetch_add(1, Ordering::Relaxed);
        std::env::temp_dir().join(format!(
            "scenario-io-{}-{tag}-{n}.csv",
            std::process::id()
        ))
    }

    fn write_and_load(content: &str, tag: &str) -> Result<ScenarioSet, ScenarioError> {
        let path = temp_path(tag);
        fs::write(&path, content).unwrap();
        let out = load_scenarios(&path);
        let _ = fs::remove_file(&path);
        out
    }

    #[test]
    fn header_and_layout() {
        let set = ScenarioSet::exact_two_point(0.005, 0.999, -0.04, 0.1).unwrap();
        let path = temp_path("layout");
        save_scenarios(&set, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "R1,R2,Z,prob");
        assert_eq!(lines.clone().count(), 2);
        for line in lines {
            assert_eq!(line.split(',').count(), 4);
            assert!(!line.ends_with(','));
        }
        assert!(text.ends_with('\n'));
        let _ = fs::remove_file(&path);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let set = ScenarioSet::new(
            vec![
                vec![0.1, -0.2, 1.0 / 3.0],
                vec![f64::MIN_POSITIVE, -0.0, 1e300],
                vec![5e-324, 0.005, -1e-300],
            ],
            vec![0.1, 0.0, 2.5],
            vec![0.25, 0.5, 0.25],
        )
        .unwrap();
        let path = temp_path("roundtrip");
        save_scenarios(&set, &path).unwrap();
        let back = load_scenarios(&path).unwrap();
        let _ = fs::remove_file(&path);
        assert_eq!(back.num_outcomes(), 3);
        for j in 0..3 {
            for a in 0..3 {
                assert_eq!(
                    set.asset_return(j, a).to_bits(),
                    back.asset_return(j, a).to_bits(),
                    "return ({j}, {a})"
                );
            }
            assert_eq!(set.liability(j).to_bits(), back.liability(j).to_bits());
            assert_eq!(set.probability(j).to_bits(), back.probability(j).to_bits());
        }
    }

    #[test]
    fn malformed_files_name_their_line() {
        match write_and_load("", "empty") {
            Err(ScenarioError::Parse { line: 1, message }) => {
                assert!(message.contains("no header"), "{message}")
            }
            other => panic!("{other:?}"),
        }
        match write_and_load("R1,Z\n", "short-header") {
            Err(ScenarioError::Parse { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        match write_and_load("R1,R3,Z,prob\n", "wrong-label") {
            Err(ScenarioError::Parse { line: 1, message }) => {
                assert!(message.contains("R2"), "{message}")
            }
            other => panic!("{other:?}"),
        }
        assert!(write_and_load("R1,Z,prob\n", "header-only").is_err());
        match write_and_load("R1,Z,prob\n1.0,0.1,0.5\n2.0,0.1\n", "missing-field") {
            Err(ScenarioError::Parse { line: 3, message }) => {
                assert!(message.contains("3 fields"), "{message}")
            }
            other => panic!("{other:?}"),
        }
        match write_and_load("R1,Z,prob\n1.0,0.1,0.5\nx,0.1,0.5\n", "junk") {
            Err(ScenarioError::Parse { line: 3, message }) => {
                assert!(message.contains("\"x\""), "{message}")
            }
            other => panic!("{other:?}"),
        }
        match write_and_load("R1,Z,prob\n1.0,0.1,-0.5\n", "neg-prob") {
            Err(ScenarioError::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match write_and_load("R1,Z,prob\ninf,0.1,1.0\n", "inf") {
            Err(ScenarioError::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        // Probabilities off by more than the tolerance.
        assert!(write_and_load("R1,Z,prob\n1.0,0.1,0.9\n", "bad-sum").is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        match load_scenarios(Path::new("/nonexistent/scenarios.csv")) {
            Err(ScenarioError::Io(_)) => {}
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn round_trip_arbitrary_finite_values(
            rows in prop::collection::vec(
                prop::collection::vec(
                    any::<f64>().prop_filter("finite", |v| v.is_finite()),
                    3,
                ),
                1..30,
            )
        ) {
            let m = rows.len();
            let returns: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0], r[1]]).collect();
            let liabilities: Vec<f64> = rows.iter().map(|r| r[2]).collect();
            let probabilities = vec![1.0 / m as f64; m];
            let set = ScenarioSet::new(returns, liabilities, probabilities).unwrap();
            let path = temp_path("prop");
            save_scenarios(&set, &path).unwrap();
            let back = load_scenarios(&path).unwrap();
            let _ = fs::remove_file(&path);
            for j in 0..m {
                prop_assert_eq!(set.asset_return(j, 0).to_bits(), back.asset_return(j, 0).to_bits());
                prop_assert_eq!(set.asset_return(j, 1).to_bits(), back.asset_return(j, 1).to_bits());
                prop_assert_eq!(set.liability(j).to_bits(), back.liability(j).to_bits());
                prop_assert_eq!(set.probability(j).to_bits(), back.probability(j).to_bits());
            }
        }
    }
}
