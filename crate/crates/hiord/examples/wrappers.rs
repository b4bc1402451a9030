// Run with `cargo run --example wrappers`
//
// A wrap directive derives a new predicate that delegates to an existing
// one but carries the property's own assertion, so it conforms by
// construction wherever the original only conformed weakly.

use hiord::parser::parse_program;
use hiord::syntax::pretty;
use hiord::verifier::{exit_code, hiord_verify, VerifyOptions};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/corpus/even_foo.pl");
    let src = std::fs::read_to_string(path).unwrap();
    let program = parse_program(&src).unwrap();

    println!("wrapper rule and adopted assertion:");
    for r in program.rules_for(&hiord::syntax::PredKey::new("even_nat", 1)) {
        println!("  {}", pretty::rule(r));
    }
    for a in &program.assertions[&hiord::syntax::PredKey::new("even_nat", 1)] {
        println!("  assertion head {}", pretty::atom(&a.head));
    }

    let out = hiord_verify(&program, None, &[], &VerifyOptions::default());
    println!();
    println!("{}", out.conformance.render_text());
    println!("verdicts with the file's own entry (P = even_nat):");
    for v in &out.verdicts {
        println!("  {} {} {}", v.pred, v.kind, v.status);
    }
    println!("exit code {}", exit_code(&out.verdicts));
}
