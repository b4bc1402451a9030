// Run with `cargo run --example runtime_checks`
//
// Assertion conditions over properties are higher-order, but after
// verification each property has a generated first-order type, so the
// run-time checker rewrites property literals to those types and runs
// goals under the ordinary checked semantics.

use std::collections::BTreeSet;

use hiord::assertions::program_conditions;
use hiord::engine::{goal_of_literals, Budget, Machine};
use hiord::parser::parse_program;
use hiord::store::Store;
use hiord::syntax::{pretty, PredKey};
use hiord::verifier::{hiord_verify, rebuild_ctx, runtime_conditions, VerifyOptions};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/corpus/take.pl");
    let src = std::fs::read_to_string(path).unwrap();
    let program = parse_program(&src).unwrap();

    let out = hiord_verify(&program, None, &[], &VerifyOptions::default());
    let (aug, _ctx) = rebuild_ctx(&program, None, &out);
    let conds = runtime_conditions(&aug, &program_conditions(&program));

    for goal in ["each(pos,[1,2,3])", "each(pos,[1,a])", "take(2,[7,6],Ys)"] {
        let probe = parse_program(&format!("{src}\nrt_goal :- {goal}.\n")).unwrap();
        let rule = probe.rules_for(&PredKey::new("rt_goal", 0)).next().unwrap();
        let proj: BTreeSet<_> = rule.vars();

        let mut machine = Machine::new(&aug);
        let result = machine.derive_checked(
            goal_of_literals(&rule.body),
            Store::empty(),
            &conds,
            &proj,
            &Budget::default(),
        );
        println!("?- {goal}.");
        for v in &result.violations {
            println!(
                "   condition #{} violated at {}",
                v.label.0,
                pretty::atom(&v.culprit)
            );
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
