//! Structured residual reports emitted by every checker.

use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// Not enough usable nodes to decide.
    Inconclusive,
    /// Recorded for information only.
    NotAsserted,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::Inconclusive => "inconclusive",
            Self::NotAsserted => "not asserted",
        }
    }

    pub fn is_failure(&self) -> bool {
        matches!(self, Self::Fail)
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub check: String,
    pub context: Vec<(String, String)>,
    pub nodes_total: usize,
    pub nodes_tested: usize,
    /// Nodes meeting the per-node criterion.
    pub nodes_ok: usize,
    pub max_abs: f64,
    pub mean_abs: f64,
    pub worst_node: Option<usize>,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub metrics: Vec<(String, f64)>,
    pub notes: Vec<String>,
}

impl IdentityReport {
    pub fn new(check: impl Into<String>) -> Self {
        Self {
            check: check.into(),
            context: Vec::new(),
            nodes_total: 0,
            nodes_tested: 0,
            nodes_ok: 0,
            max_abs: 0.0,
            mean_abs: 0.0,
            worst_node: None,
            tolerance: 0.0,
            verdict: Verdict::Inconclusive,
            metrics: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn with_context(mut self, key: &str, value: impl ToString) -> Self {
        self.context.push((key.to_string(), value.to_string()));
        self
    }

    pub fn metric(&mut self, key: &str, value: f64) {
        self.metrics.push((key.to_string(), value));
    }

    pub fn get_metric(&self, key: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    /// Fill the residual statistics from `(node, residual)` samples,
    /// judging each node by `|r| ≤ tol`.
    pub fn absorb(&mut self, total: usize, samples: &[(usize, f64)], tol: f64) {
        self.nodes_total = total;
        self.nodes_tested = samples.len();
        self.tolerance = tol;
        self.max_abs = 0.0;
        self.worst_node = None;
        let mut sum = 0.0;
        let mut ok = 0;
        for &(node, r) in samples {
            let a = if r.is_nan() { f64::INFINITY } else { r.abs() };
            sum += a;
            if a <= tol {
                ok += 1;
            }
            if self.worst_node.is_none() || a > self.max_abs {
                self.max_abs = a;
                self.worst_node = Some(node);
            }
        }
        self.nodes_ok = ok;
        self.mean_abs = if samples.is_empty() { 0.0 } else { sum / samples.len() as f64 };
    }

    /// Share of tested nodes meeting the per-node criterion.
    pub fn fraction_ok(&self) -> f64 {
        if self.nodes_tested == 0 {
            0.0
        } else {
            self.nodes_ok as f64 / self.nodes_tested as f64
        }
    }

    /// Verdict from the maximum residual.
    pub fn judge_max(&mut self) {
        self.verdict = if self.nodes_tested == 0 {
            Verdict::Inconclusive
        } else if self.max_abs <= self.tolerance {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
    }

    /// Verdict from the share of nodes within tolerance.
    pub fn judge_fraction(&mut self, needed: f64) {
        self.metric("required_fraction", needed);
        self.verdict = if self.nodes_tested == 0 {
            Verdict::Inconclusive
        } else if self.fraction_ok() >= needed {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[{}]", self.check);
        for (k, v) in &self.context {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "verdict = {}", self.verdict.name());
        let _ = writeln!(s, "nodes_total = {}", self.nodes_total);
        let _ = writeln!(s, "nodes_tested = {}", self.nodes_tested);
        let _ = writeln!(s, "nodes_ok = {}", self.nodes_ok);
        let _ = writeln!(s, "fraction_ok = {}", fmt_f64(self.fraction_ok()));
        let _ = writeln!(s, "max_abs = {}", fmt_f64(self.max_abs));
        let _ = writeln!(s, "mean_abs = {}", fmt_f64(self.mean_abs));
        match self.worst_node {
            Some(n) => {
                let _ = writeln!(s, "worst_node = {n}");
            }
            None => {
                let _ = writeln!(s, "worst_node = none");
            }
        }
        let _ = writeln!(s, "tolerance = {}", fmt_f64(self.tolerance));
        for (k, v) in &self.metrics {
            let _ = writeln!(s, "{k} = {}", fmt_f64(*v));
        }
        for n in &self.notes {
            let _ = writeln!(s, "note = {n}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statistics_and_verdicts() {
        let mut r = IdentityReport::new("demo").with_context("flow", "static");
        r.absorb(10, &[(0, 1e-3), (4, -5e-3), (7, 2e-4)], 1e-3);
        assert_eq!(r.worst_node, Some(4));
        assert_eq!(r.nodes_ok, 2);
        r.judge_max();
        assert_eq!(r.verdict, Verdict::Fail);
        r.judge_fraction(0.6);
        assert_eq!(r.verdict, Verdict::Pass);
        let t = r.to_text();
        assert!(t.starts_with("[demo]\nflow = static\nverdict = pass\n"));
        assert!(t.contains("max_abs = 5.0000000000000001e-3"));
    }

    #[test]
    fn nan_counts_as_failure() {
        let mut r = IdentityReport::new("nan");
        r.absorb(1, &[(0, f64::NAN)], 1.0);
        r.judge_max();
        assert_eq!(r.verdict, Verdict::Fail);
    }
}
