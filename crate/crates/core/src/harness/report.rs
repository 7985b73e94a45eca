//! Statistical test reports.

use std::fmt::Write as _;
use std::time::Duration;

use crate::fmt17;

/// How an estimate is compared with its reference.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Rule {
    /// `|z| ≤ sigma`.
    TwoSided { sigma: f64 },
    /// `z ≥ −sigma`.
    OneSided { sigma: f64 },
    /// Goodness of fit: `p > threshold`.
    PValue { threshold: f64 },
    /// Exact comparison: `|estimate − reference| ≤ tolerance`.
    Tolerance { tolerance: f64 },
}

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rule::TwoSided { sigma } => write!(f, "two-sided |z| <= {sigma}"),
            Rule::OneSided { sigma } => write!(f, "one-sided z >= -{sigma}"),
            Rule::PValue { threshold } => write!(f, "p-value > {threshold}"),
            Rule::Tolerance { tolerance } => write!(f, "|estimate - reference| <= {tolerance:e}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StatReport {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub reference: f64,
    /// Where the reference value comes from (exact solve, closed form, ...).
    pub reference_source: String,
    /// z-score, or the p-value under [`Rule::PValue`], or the absolute
    /// error under [`Rule::Tolerance`].
    pub z: f64,
    pub rule: Rule,
    pub pass: bool,
    pub samples: u64,
    pub seed: u64,
    pub wall_time: Duration,
    pub notes: Vec<String>,
}

impl StatReport {
    /// Two-sided or one-sided z test of `estimate ± std_error` against `reference`.
    pub fn z_test(
        name: impl Into<String>,
        estimate: f64,
        std_error: f64,
        reference: f64,
        reference_source: impl Into<String>,
        rule: Rule,
    ) -> Self {
        let z = if std_error > 0.0 {
            (estimate - reference) / std_error
        } else if (estimate - reference).abs() <= 1e-12 * reference.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY.copysign(estimate - reference)
        };
        let pass = match rule {
            Rule::TwoSided { sigma } => z.abs() <= sigma,
            Rule::OneSided { sigma } => z >= -sigma,
            _ => panic!("z_test needs a z rule"),
        };
        Self::assemble(name, estimate, std_error, reference, reference_source, z, rule, pass)
    }

    pub fn p_value_test(name: impl Into<String>, statistic: f64, p_value: f64, threshold: f64) -> Self {
        let rule = Rule::PValue { threshold };
        Self::assemble(name, statistic, 0.0, 0.0, "chi-square null law", p_value, rule, p_value > threshold)
    }

    pub fn exact(
        name: impl Into<String>,
        estimate: f64,
        reference: f64,
        reference_source: impl Into<String>,
        tolerance: f64,
    ) -> Self {
        let err = (estimate - reference).abs();
        let rule = Rule::Tolerance { tolerance };
        Self::assemble(name, estimate, 0.0, reference, reference_source, err, rule, err <= tolerance)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        name: impl Into<String>,
        estimate: f64,
        std_error: f64,
        reference: f64,
        reference_source: impl Into<String>,
        z: f64,
        rule: Rule,
        pass: bool,
    ) -> Self {
        StatReport {
            name: name.into(),
            estimate,
            std_error,
            reference,
            reference_source: reference_source.into(),
            z,
            rule,
            pass,
            samples: 0,
            seed: 0,
            wall_time: Duration::ZERO,
            notes: Vec::new(),
        }
    }

    pub fn with_run(mut self, samples: u64, seed: u64) -> Self {
        self.samples = samples;
        self.seed = seed;
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn timed(mut self, wall_time: Duration) -> Self {
        self.wall_time = wall_time;
        self
    }

    /// `key = value` lines; everything except `wall_time` is reproducible.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "name = {}", self.name);
        let _ = writeln!(out, "estimate = {}", fmt17(self.estimate));
        let _ = writeln!(out, "std_error = {}", fmt17(self.std_error));
        let _ = writeln!(out, "reference = {}", fmt17(self.reference));
        let _ = writeln!(out, "reference_source = {}", self.reference_source);
        let stat = match self.rule {
            Rule::PValue { .. } => "p_value",
            Rule::Tolerance { .. } => "abs_error",
            _ => "z",
        };
        let _ = writeln!(out, "{stat} = {}", fmt17(self.z));
        let _ = writeln!(out, "rule = {}", self.rule);
        let _ = writeln!(out, "pass = {}", self.pass);
        let _ = writeln!(out, "samples = {}", self.samples);
        let _ = writeln!(out, "seed = {}", self.seed);
        for n in &self.notes {
            let _ = writeln!(out, "note = {n}");
        }
        let _ = writeln!(out, "wall_time = {:.3}s", self.wall_time.as_secs_f64());
        out
    }

    /// Single summary line.
    pub fn summary(&self) -> String {
        format!(
            "{} {}: estimate={} reference={} stat={}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            fmt17(self.estimate),
            fmt17(self.reference),
            fmt17(self.z)
        )
    }
}

/// Drops `wall_time` lines, for comparing artifacts across runs.
pub fn strip_timing(text: &str) -> String {
    text.lines()
        .filter(|l| !l.trim_start().starts_with("wall_time"))
        .map(|l| format!("{l}\n"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_matches_rule() {
        let r = StatReport::z_test("t", 0.5, 0.1, 0.1, "closed form", Rule::TwoSided { sigma: 4.0 });
        assert!((r.z - 4.0).abs() < 1e-12);
        assert!(r.pass);
        let r = StatReport::z_test("t", 0.0, 0.1, 0.5, "closed form", Rule::TwoSided { sigma: 4.0 });
        assert!(!r.pass);
        let r = StatReport::z_test("t", -0.3, 0.1, 0.0, "constant", Rule::OneSided { sigma: 4.0 });
        assert!(r.pass);
        let r = StatReport::z_test("t", 7.0, 0.1, 0.0, "constant", Rule::OneSided { sigma: 4.0 });
        assert!(r.pass);
        assert!(!StatReport::p_value_test("c", 30.0, 1e-5, 1e-3).pass);
        assert!(StatReport::exact("e", 1.0 + 1e-12, 1.0, "x", 1e-10).pass);
    }

    #[test]
    fn render_strips_to_reproducible_text() {
        let a = StatReport::exact("e", 1.0, 1.0, "x", 1e-10).with_run(5, 9).timed(Duration::from_millis(3));
        let b = a.clone().timed(Duration::from_millis(700));
        assert_ne!(a.render(), b.render());
        assert_eq!(strip_timing(&a.render()), strip_timing(&b.render()));
        assert!(a.render().contains("seed = 9"));
    }
}
