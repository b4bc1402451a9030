// Run with `cargo run --example run_goals`
//
// Loads the quicksort program and drives goals through the plain
// derivation engine, printing each answer's bindings.

use std::collections::BTreeSet;

use hiord::engine::{goal_of_literals, Budget, Machine};
use hiord::parser::parse_program;
use hiord::syntax::pretty;
use hiord::store::Store;
use hiord::syntax::PredKey;

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/corpus/qsort.pl");
    let src = std::fs::read_to_string(path).unwrap();

    for goal in [
        "qsort([3,1,2],lex,Ys)",
        "qsort([b,a,c],lex,Ys)",
        "partition([2,9,4],5,lex,Smaller,Bigger)",
        "qsort([1],lex,[2])",
    ] {
        println!("?- {goal}.");
        // A goal is just the body of a throwaway clause.
        let text = format!("{src}\nexample_goal :- {goal}.\n");
        let program = parse_program(&text).unwrap();
        let rule = program
            .rules_for(&PredKey::new("example_goal", 0))
            .next()
            .unwrap();
        let proj: BTreeSet<_> = rule.vars();

        let mut machine = Machine::new(&program);
        let result = machine.derive(
            goal_of_literals(&rule.body),
            Store::empty(),
            &proj,
            &Budget::default(),
        );
        if result.answers.is_empty() {
            println!("   no");
        }
        for store in &result.answers {
            let parts: Vec<String> = store
                .bindings()
                .map(|(v, t)| format!("{v} = {}", pretty::term(t)))
                .collect();
            if parts.is_empty() {
                println!("   yes");
            } else {
                println!("   {}", parts.join(", "));
            }
        }
        println!();
    }
}
