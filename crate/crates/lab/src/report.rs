//! Verdicts and the JSON summary built from them.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::Path;
use std::time::Duration;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    /// `|observed − target| ≤ tolerance`
    Within,
    /// `observed ≤ target`
    AtMost,
    /// `observed ≥ target`
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub metric: String,
    pub observed: f64,
    pub target: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
    /// Wall-clock time of the experiment; kept out of the report so that
    /// reports are reproducible, and written to a separate timings file.
    #[serde(skip)]
    pub runtime: Duration,
    /// Present for every verdict that depends on random draws.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Verdict {
    pub fn within(metric: impl Into<String>, observed: f64, target: f64, tolerance: f64) -> Self {
        Self::make(metric, observed, target, tolerance, Comparison::Within)
    }

    pub fn at_most(metric: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self::make(metric, observed, bound, 0.0, Comparison::AtMost)
    }

    pub fn at_least(metric: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self::make(metric, observed, bound, 0.0, Comparison::AtLeast)
    }

    fn make(metric: impl Into<String>, observed: f64, target: f64, tolerance: f64, comparison: Comparison) -> Self {
        let pass = match comparison {
            Comparison::Within => (observed - target).abs() <= tolerance,
            Comparison::AtMost => observed <= target,
            Comparison::AtLeast => observed >= target,
        };
        Verdict {
            metric: metric.into(),
            observed,
            target,
            tolerance,
            comparison,
            pass,
            runtime: Duration::ZERO,
            seed: None,
        }
    }

    pub fn seeded(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.pass { "PASS" } else { "FAIL" };
        let rule = match self.comparison {
            Comparison::Within => format!("target {:.6e} ± {:.3e}", self.target, self.tolerance),
            Comparison::AtMost => format!("bound ≤ {:.6e}", self.target),
            Comparison::AtLeast => format!("bound ≥ {:.6e}", self.target),
        };
        write!(f, "{status} {}: observed {:.6e}, {rule}", self.metric, self.observed)
    }
}

/// Verdicts keyed by experiment id; `BTreeMap` keeps the key order stable.
pub type Report = BTreeMap<String, Vec<Verdict>>;

pub fn all_pass(report: &Report) -> bool {
    report.values().flatten().all(|v| v.pass)
}

pub fn render_report(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("verdicts serialize");
    s.push('\n');
    s
}

/// Writes the summary document to `path`.
pub fn emit_report(report: &Report, path: &Path) -> io::Result<()> {
    std::fs::write(path, render_report(report))
}

/// Runtimes in seconds, keyed like the report.
pub fn render_timings(report: &Report) -> String {
    let timings: BTreeMap<&String, BTreeMap<&str, f64>> = report
        .iter()
        .map(|(id, vs)| (id, vs.iter().map(|v| (v.metric.as_str(), v.runtime.as_secs_f64())).collect()))
        .collect();
    let mut s = serde_json::to_string_pretty(&timings).expect("timings serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_rules() {
        assert!(Verdict::within("m", 1.05, 1.0, 0.1).pass);
        assert!(!Verdict::within("m", 1.2, 1.0, 0.1).pass);
        assert!(!Verdict::within("m", f64::NAN, 1.0, 0.1).pass);
        assert!(Verdict::at_most("m", 0.0, 0.0).pass);
        assert!(!Verdict::at_most("m", 0.2, 0.1).pass);
        assert!(Verdict::at_least("m", 0.3, 0.0).pass);
    }

    #[test]
    fn empty_report_is_valid_json() {
        let text = render_report(&Report::new());
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v, serde_json::json!({}));
    }

    #[test]
    fn runtime_is_not_serialized() {
        let mut r = Report::new();
        let mut v = Verdict::within("x", 1.0, 1.0, 0.0).seeded(7);
        v.runtime = Duration::from_millis(1234);
        r.insert("e".into(), vec![v.clone()]);
        let a = render_report(&r);
        v.runtime = Duration::from_millis(1);
        r.insert("e".into(), vec![v]);
        assert_eq!(a, render_report(&r));
        assert!(a.contains("\"seed\": 7"));
        assert!(render_timings(&r).contains("0.001"));
    }
}
