// Run with `cargo run --example trivial_success`
//
// A condition formula holds trivially on a store when the engine can
// prove it without binding anything the store left open. This drives a
// few formulas against stores built from small goals.

use std::collections::BTreeSet;

use hiord::engine::{goal_of_literals, Budget, Machine};
use hiord::parser::parse_program;
use hiord::store::Store;
use hiord::syntax::PredKey;

fn main() {
    let src = "
        color(r).
        color(w).
        color(b).
        :- regtype rwb/1.
        rwb := r | w | b.
        pair(X,Y) :- X = f(Y).
    ";
    let program = parse_program(src).unwrap();

    // Formula sources parse as the pre of a throwaway assertion.
    for (store_goal, formula) in [
        ("X = r", "rwb(X)"),
        ("X = 9", "rwb(X)"),
        ("X = r, Y = w", "(rwb(X), rwb(Y))"),
        ("X = f(w)", "pair(X,Y)"),
        ("X = Y", "rwb(X)"),
    ] {
        let text = format!(
            "{src}\n:- pred ts_probe(X,Y) : {formula}.\nts_probe(X,Y) :- X = X.\nstore_goal(X,Y) :- {store_goal}.\n"
        );
        let probe = parse_program(&text).unwrap();
        let rule = probe
            .rules_for(&PredKey::new("store_goal", 2))
            .next()
            .unwrap();
        let mut machine = Machine::new(&probe);
        let proj: BTreeSet<_> = rule.vars();
        let stores = machine
            .derive(
                goal_of_literals(&rule.body),
                Store::empty(),
                &proj,
                &Budget::default(),
            )
            .answers;

        let conds = hiord::assertions::program_conditions(&probe);
        let pre = conds
            .calls_for(&PredKey::new("ts_probe", 2))
            .map(|c| match &c.kind {
                hiord::assertions::ConditionKind::Calls { pre } => pre.clone(),
                _ => unreachable!(),
            })
            .unwrap();
        // The formula is written over the assertion head vars X,Y; the
        // probe stores bind exactly those names.
        let mut fresh = Machine::new(&program);
        for store in &stores {
            let holds = fresh.trivially_succeeds(&pre, store);
            println!("{formula:24} on {{{store_goal}}}: {holds}");
        }
    }
}
