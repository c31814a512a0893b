use std::fmt::Write as _;

use super::experiment::Summary;
use super::HarnessError;

/// Expected ranking, fastest first.
pub const EXPECTED_ORDER: [&str; 3] = ["proposed", "pid2", "pid1"];

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub table: String,
    /// `(faster, slower)` pairs whose headline times contradict the expected ranking.
    pub violations: Vec<(String, String)>,
    /// Pairs with equal headline times.
    pub ties: Vec<(String, String)>,
}

fn key(t: Option<f64>) -> f64 {
    t.unwrap_or(f64::INFINITY)
}

fn fmt_t(t: Option<f64>) -> String {
    t.map_or_else(|| "never".to_string(), |x| format!("{x:.1}"))
}

/// Tabulates summaries of the same target and checks the expected ranking among
/// the controllers present. "Never" ranks after every finite time.
pub fn compare(summaries: &[Summary]) -> Result<Comparison, HarnessError> {
    if summaries.len() < 2 {
        return Err(HarnessError::Compare(format!("need at least 2 summaries, got {}", summaries.len())));
    }
    let target = summaries[0].target_kmh;
    if let Some(s) = summaries.iter().find(|s| s.target_kmh != target) {
        return Err(HarnessError::Compare(format!(
            "mismatched targets: {} km/h ({}) vs {target} km/h",
            s.target_kmh, s.controller
        )));
    }
    let (a, _) = summaries[0].headline();

    let mut table = String::new();
    let _ = writeln!(table, "target {target} km/h, band {a}%");
    let _ = writeln!(table, "{:<10} {:>10} {:>10} {:>16}", "controller", "t_conv_s", "t_conv10_s", "final_error_kmh");
    for s in summaries {
        let _ = writeln!(
            table,
            "{:<10} {:>10} {:>10} {:>16.3}",
            s.controller,
            fmt_t(s.headline().1),
            fmt_t(s.t_conv_10_s),
            s.final_error_kmh
        );
    }

    let ranked: Vec<&Summary> = EXPECTED_ORDER
        .iter()
        .filter_map(|name| summaries.iter().find(|s| s.controller == *name))
        .collect();
    let (mut violations, mut ties) = (Vec::new(), Vec::new());
    for (i, fast) in ranked.iter().enumerate() {
        for slow in &ranked[i + 1..] {
            let (tf, ts) = (key(fast.headline().1), key(slow.headline().1));
            let pair = (fast.controller.clone(), slow.controller.clone());
            if tf == ts {
                ties.push(pair);
            } else if tf > ts {
                violations.push(pair);
            }
        }
    }
    for (f, s) in &ties {
        let _ = writeln!(table, "tie: {f} = {s}");
    }
    for (f, s) in &violations {
        let _ = writeln!(table, "ordering violation: {f} slower than {s}");
    }
    if violations.is_empty() {
        let _ = writeln!(table, "ordering ok");
    }
    Ok(Comparison { table, violations, ties })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(name: &str, target: f64, t: Option<f64>) -> Summary {
        Summary {
            controller: name.into(),
            target_kmh: target,
            duration_s: 60.0,
            t_conv_20_s: t,
            t_conv_10_s: t,
            final_error_kmh: 0.1,
            mean_step_ms: 0.0,
            max_step_ms: 0.0,
        }
    }

    #[test]
    fn reference_values_are_ordered() {
        let c = compare(&[s("pid1", 5.0, Some(22.9)), s("pid2", 5.0, Some(10.7)), s("proposed", 5.0, Some(0.9))]).unwrap();
        assert!(c.violations.is_empty() && c.ties.is_empty());
        assert!(c.table.contains("ordering ok"));
    }

    #[test]
    fn violations_ties_and_never() {
        let c = compare(&[s("pid1", 5.0, Some(3.0)), s("proposed", 5.0, None)]).unwrap();
        assert_eq!(c.violations, vec![("proposed".to_string(), "pid1".to_string())]);
        let c = compare(&[s("pid2", 5.0, Some(4.0)), s("proposed", 5.0, Some(4.0))]).unwrap();
        assert!(c.violations.is_empty());
        assert_eq!(c.ties.len(), 1);
    }

    #[test]
    fn arity_and_target_checks() {
        assert!(compare(&[s("pid1", 5.0, Some(1.0))]).is_err());
        assert!(compare(&[s("pid1", 5.0, Some(1.0)), s("pid2", 10.0, Some(1.0))]).is_err());
    }
}
