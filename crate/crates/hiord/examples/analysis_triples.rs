// Run with `cargo run --example analysis_triples`
//
// Goal-dependent analysis tabulates one call/success pair per reachable
// predicate and abstract call pattern, starting from an entry goal.

use hiord::analysis::analyze;
use hiord::domain::{triv_sup, Ctx};
use hiord::parser::parse_program;
use hiord::syntax::PredKey;

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/corpus/qsort.pl");
    let src = std::fs::read_to_string(path).unwrap();
    let program = parse_program(&src).unwrap();
    let ctx = Ctx::new(&program);

    // Entry: qsort(Xs,lex_t,Ys) with Xs a list of t.
    let entry = parse_program(&format!(
        "{src}\n:- entry qsort(Xs,lex_t,Ys) : list(t,Xs).\n"
    ))
    .unwrap();
    let decl = entry.entries.last().unwrap();
    let env = triv_sup(&ctx, &decl.pre, &decl.goal.vars()).unwrap();

    let result = analyze(&program, &ctx, &[(decl.goal.clone(), env)]);
    for t in &result.triples {
        println!("{}:", t.pred);
        println!("  call    {}", t.call.render(&ctx));
        println!("  success {}", t.success.render(&ctx));
    }
    if result.incomplete {
        println!("(analysis hit its budget; results degraded)");
    }

    // The join over all call patterns of one predicate.
    let key = PredKey::new("lex_t", 2);
    println!(
        "joined calls of {key}: {}",
        result.call_env(&key, &ctx).render(&ctx)
    );
}
