// Run with `cargo run --example conformance_table`
//
// Builds the conformance table of a program against its declared
// properties, then shows the two regular types generated from it: the
// strict set (proved conformant) and the loose set (not disproved).

use hiord::domain::lattice::FiniteLattice;
use hiord::parser::parse_program;
use hiord::syntax::pretty;
use hiord::verifier::{hiord_verify, VerifyOptions};

fn main() {
    let src = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/corpus/fig1.pl"
    ))
    .unwrap();
    let lattice_src = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/corpus/fig1.lattice"
    ))
    .unwrap();
    let program = parse_program(&src).unwrap();
    let lattice = FiniteLattice::parse(&lattice_src).unwrap();

    let out = hiord_verify(&program, Some(lattice), &[], &VerifyOptions::default());

    println!("{}", out.conformance.render_text());

    println!("strict and loose membership for p_nat_nat:");
    println!("  strict: {:?}", out.conformance.pi_minus("p_nat_nat"));
    println!("  loose:  {:?}", out.conformance.pi_plus("p_nat_nat"));

    println!("generated type rules:");
    for r in &out.generated {
        println!("  {}", pretty::rule(r));
    }
}
