// Run with `cargo run --example abstract_domain`
//
// The conditions of an assertion are approximated from both sides:
// triv_sub under-approximates the stores a formula surely admits,
// triv_sup over-approximates the stores it can possibly admit. The
// same machinery works over regtypes or over a user-supplied finite
// ordering of the checks.

use std::collections::BTreeSet;

use hiord::assertions::program_conditions;
use hiord::domain::lattice::FiniteLattice;
use hiord::domain::{triv_sub, triv_sup, Ctx};
use hiord::parser::parse_program;
use hiord::syntax::PredKey;

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
    let conds = program_conditions(&program);

    println!("regtype interpretation:");
    show(&Ctx::new(&program), &program, &conds);

    println!();
    println!("finite-lattice interpretation:");
    let lat = FiniteLattice::parse(&lattice_src).unwrap();
    show(&Ctx::with_lattice(&program, lat), &program, &conds);
}

fn show(
    ctx: &Ctx,
    program: &hiord::syntax::Program,
    conds: &hiord::assertions::ConditionSet,
) {
    for pred in ["n2n", "a2n", "i2z", "z2i", "nz2n"] {
        let c = conds.calls_for(&PredKey::new(pred, 2)).unwrap();
        let hiord::assertions::ConditionKind::Calls { pre } = &c.kind else {
            unreachable!()
        };
        // Approximation is relative to which variables the store leaves
        // open; for a calls pre that is the head variables.
        let open: BTreeSet<_> = c.head.vars();
        let sub = triv_sub(ctx, pre, &open).unwrap();
        let sup = triv_sup(ctx, pre, &open).unwrap();
        // The sandwich: sub admits only stores sup admits.
        assert!(sub.leq(&sup, ctx));
        println!(
            "  {pred} pre: sub {} / sup {}",
            sub.render(ctx),
            sup.render(ctx)
        );
    }
    let _ = program;
}
