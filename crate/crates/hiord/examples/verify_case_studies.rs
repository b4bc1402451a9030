// Run with `cargo run --example verify_case_studies`
//
// Runs the whole verifier over the bundled case studies and prints one
// status line per assertion condition, plus the exit code the CLI would
// return: 0 all proven, 1 some condition false, 2 open checks remain.

use hiord::parser::parse_program;
use hiord::verifier::{exit_code, hiord_verify, VerifyOptions};

fn main() {
    for (file, entry) in [
        ("qsort.pl", Some("qsort(Xs,lex,Ys) : list(t,Xs)")),
        ("qsort.pl", Some("qsort(Xs,lex_t,Ys) : list(t,Xs)")),
        ("http.pl", None),
        ("dutch_v1.pl", None),
        ("dutch_v2.pl", None),
        ("dutch_v3.pl", None),
        ("dutch_final.pl", None),
    ] {
        let path = format!("{}/corpus/{file}", env!("CARGO_MANIFEST_DIR"));
        let src = std::fs::read_to_string(&path).unwrap();
        let program = parse_program(&src).unwrap();

        let mut extra = Vec::new();
        if let Some(e) = entry {
            let probe = parse_program(&format!("{src}\n:- entry {e}.\n")).unwrap();
            extra.push(probe.entries.last().unwrap().clone());
        }

        let out = hiord_verify(&program, None, &extra, &VerifyOptions::default());
        match entry {
            Some(e) => println!("{file} with entry {e}:"),
            None => println!("{file}:"),
        }
        for v in &out.verdicts {
            println!("  {} {} {}: {}", v.pred, v.kind, v.status, v.reason);
        }
        for w in &out.warnings {
            println!("  warning: {w}");
        }
        println!("  exit code {}", exit_code(&out.verdicts));
        println!();
    }
}
