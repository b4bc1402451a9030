//! Rendering of verification results: a versioned machine-readable form
//! and a human-readable text form carrying the same verdict content.

use serde::Serialize;

use crate::syntax::pretty;
use crate::verifier::{Status, VerifyOutcome};

#[derive(Clone, Debug, Serialize)]
pub struct SpanEntry {
    pub line: u32,
    pub col: u32,
}

#[derive(Clone, Debug, Serialize)]
pub struct AssertionEntry {
    pub pred: String,
    pub arity: usize,
    pub kind: String,
    pub status: String,
    pub reason: String,
    pub span: SpanEntry,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConformanceEntry {
    pub pred: String,
    pub property: String,
    pub verdict: String,
    pub basis: String,
}

/// A finished verification run, ready to print. The serialized form is the
/// versioned schema the golden tests pin; the extra display-only fields
/// (program name, generated rules) appear in the text rendering.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub version: u32,
    pub assertions: Vec<AssertionEntry>,
    pub conformance: Vec<ConformanceEntry>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub program: String,
    #[serde(skip)]
    pub generated: Vec<String>,
    #[serde(skip)]
    pub exit: i32,
}

impl Report {
    pub fn from_outcome(program: &str, out: &VerifyOutcome) -> Report {
        let assertions = out
            .verdicts
            .iter()
            .map(|v| AssertionEntry {
                pred: v.pred.name.clone(),
                arity: v.pred.arity,
                kind: v.kind.to_string(),
                status: v.status.to_string(),
                reason: v.reason.clone(),
                span: SpanEntry { line: v.span.line, col: v.span.col },
            })
            .collect();
        let conformance = out
            .conformance
            .entries
            .iter()
            .map(|e| {
                let mut basis: Vec<String> = e
                    .conditions
                    .iter()
                    .map(|c| format!("{} {}: {}", c.tag, c.verdict, c.detail))
                    .collect();
                if let Some(w) = &e.witness {
                    basis.push(format!(
                        "counterexample {} at condition {}",
                        pretty::atom(&w.query),
                        w.label,
                    ));
                }
                basis.extend(e.notes.iter().cloned());
                ConformanceEntry {
                    pred: e.pred.to_string(),
                    property: e.property.clone(),
                    verdict: e.verdict.to_string(),
                    basis: basis.join("; "),
                }
            })
            .collect();
        Report {
            version: 1,
            assertions,
            conformance,
            warnings: out.warnings.clone(),
            program: program.to_string(),
            generated: out.generated.iter().map(pretty::rule).collect(),
            exit: crate::verifier::exit_code(&out.verdicts),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self)
            .expect("report serialization is infallible");
        s.push('\n');
        s
    }

    pub fn render_text(&self, color: bool) -> String {
        let paint = |status: &str| -> String {
            if !color {
                return status.to_string();
            }
            let code = match status {
                "checked" => "32",
                "false" => "31",
                _ => "33",
            };
            format!("\x1b[{code}m{status}\x1b[0m")
        };
        let mut t = String::new();
        t.push_str(&format!("program: {}\n", self.program));
        if !self.assertions.is_empty() {
            t.push_str("\nassertions\n");
            for a in &self.assertions {
                t.push_str(&format!(
                    "  {}/{} {} {} (line {}): {}\n",
                    a.pred,
                    a.arity,
                    a.kind,
                    paint(&a.status),
                    a.span.line,
                    a.reason,
                ));
            }
        }
        if !self.conformance.is_empty() {
            t.push_str("\nconformance\n");
            for c in &self.conformance {
                t.push_str(&format!(
                    "  {} to {}: {} [{}]\n",
                    c.pred, c.property, c.verdict, c.basis,
                ));
            }
        }
        if !self.generated.is_empty() {
            t.push_str("\ngenerated types\n");
            for g in &self.generated {
                t.push_str(&format!("  {g}\n"));
            }
        }
        if !self.warnings.is_empty() {
            t.push_str("\nwarnings\n");
            for w in &self.warnings {
                t.push_str(&format!("  {w}\n"));
            }
        }
        let (mut ok, mut bad, mut open) = (0, 0, 0);
        for a in &self.assertions {
            match a.status.as_str() {
                "checked" => ok += 1,
                "false" => bad += 1,
                _ => open += 1,
            }
        }
        t.push_str(&format!(
            "\nsummary: {ok} checked, {bad} false, {open} check\n",
        ));
        t
    }
}

/// Map a verdict status count to the process exit convention used by the
/// command line: false dominates, open checks come second, success last.
pub fn status_weight(s: Status) -> i32 {
    match s {
        Status::False => 2,
        Status::Check => 1,
        Status::Checked => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;
    use crate::verifier::{hiord_verify, VerifyOptions};

    #[test]
    fn json_schema_is_versioned_and_stable() {
        let program = parse_program(
            "
            :- pred inc(X,Y) : nat(X) => nat(Y).
            inc(X,Y) :- Y is X + 1.
            :- entry main.
            main :- inc(3,_).
            ",
        )
        .unwrap();
        let out = hiord_verify(&program, None, &[], &VerifyOptions::default());
        let report = Report::from_outcome("inc.pl", &out);
        let json = report.to_json();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["version"], 1);
        assert!(v["assertions"].is_array());
        assert!(v["conformance"].is_array());
        assert!(v["warnings"].is_array());
        assert_eq!(v["assertions"][0]["status"], "checked");
        // Identical runs serialize identically.
        let out2 = hiord_verify(&program, None, &[], &VerifyOptions::default());
        assert_eq!(json, Report::from_outcome("inc.pl", &out2).to_json());
    }

    #[test]
    fn text_carries_the_same_verdicts_as_json() {
        let program = parse_program(
            "
            :- pred takes_nat(X) : nat(X).
            takes_nat(X) :- integer(X).
            :- entry main.
            main :- takes_nat(a).
            ",
        )
        .unwrap();
        let out = hiord_verify(&program, None, &[], &VerifyOptions::default());
        let report = Report::from_outcome("t.pl", &out);
        let text = report.render_text(false);
        for a in &report.assertions {
            assert!(text.contains(&a.status), "missing {}", a.status);
        }
        assert!(text.contains("summary:"));
        assert!(!text.contains('\x1b'));
        let colored = report.render_text(true);
        assert!(colored.contains('\x1b'));
    }
}
