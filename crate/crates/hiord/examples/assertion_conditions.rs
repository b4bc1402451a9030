// Run with `cargo run --example assertion_conditions`
//
// Every pred assertion splits into labeled check conditions: one calls
// condition and one success condition per assertion. Properties
// contribute anonymous conditions keyed by a placeholder head.

use hiord::assertions::{program_conditions, ConditionKind};
use hiord::parser::parse_program;
use hiord::syntax::pretty;

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/corpus/fig1.pl");
    let src = std::fs::read_to_string(path).unwrap();
    let program = parse_program(&src).unwrap();

    let conds = program_conditions(&program);
    for c in &conds.conditions {
        let head = pretty::atom(&c.head);
        match &c.kind {
            ConditionKind::Calls { pre } => {
                println!("#{} calls   {head} : {}", c.label.0, render(pre));
            }
            ConditionKind::Success { pre, post } => {
                println!(
                    "#{} success {head} : {} => {}",
                    c.label.0,
                    render(pre),
                    render(post)
                );
            }
        }
    }
}

fn render(f: &hiord::assertions::PropFormula) -> String {
    if f.is_truth() {
        return "true".to_string();
    }
    f.disjuncts
        .iter()
        .map(|conj| {
            conj.iter()
                .map(|l| pretty::atom(&l.to_atom()))
                .collect::<Vec<_>>()
                .join(", ")
        })
        .collect::<Vec<_>>()
        .join("; ")
}
