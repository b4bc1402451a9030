// Run with `cargo run --example oracle_replay`
//
// A disproof is only trusted when it replays: the oracle runs the same
// query against the original program and against the program
// strengthened with the property's conditions, and reports the first
// query where only the strengthened side errs.

use hiord::assertions::program_conditions;
use hiord::oracle::{check_redundance, OracleBudget, Redundance};
use hiord::parser::parse_program;
use hiord::syntax::{pretty, PredKey};
use hiord::verifier::{hiord_verify, VerifyOptions};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/corpus/dutch_v1.pl");
    let src = std::fs::read_to_string(path).unwrap();
    let program = parse_program(&src).unwrap();

    // The verifier already found and replayed a counterexample for cmp.
    let out = hiord_verify(&program, None, &[], &VerifyOptions::default());
    let entry = out
        .conformance
        .entries
        .iter()
        .find(|e| e.pred.name == "cmp")
        .unwrap();
    println!("table verdict for cmp against dutch_cmp: {}", entry.verdict);
    let witness = entry.witness.as_ref().unwrap();
    println!("witness query: {}", pretty::atom(&witness.query));

    // Replay it by hand.
    let conds = program_conditions(&program);
    let property = &program.properties["dutch_cmp"];
    let verdict = check_redundance(
        &program,
        &conds,
        &PredKey::new("cmp", 3),
        property,
        &witness.query,
        &OracleBudget::default(),
    );
    match verdict {
        Redundance::NotRedundant(w) => {
            println!(
                "replay: strengthened program errs at condition #{} on {}",
                w.label.0,
                pretty::atom(&w.query)
            );
        }
        Redundance::Redundant => println!("replay: no behavioral difference"),
        Redundance::Unknown(why) => println!("replay: inconclusive ({why})"),
    }
}
