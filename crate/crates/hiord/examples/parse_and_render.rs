// Run with `cargo run --example parse_and_render`
//
// Parses a program and walks what the front end produced: normalized
// rules, declared properties and regtypes, and the user's assertions.

use hiord::parser::parse_program;
use hiord::syntax::pretty;

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/corpus/take.pl");
    let src = std::fs::read_to_string(path).unwrap();
    let program = parse_program(&src).unwrap();

    println!("properties:");
    for name in &program.property_order {
        let prop = &program.properties[name];
        println!("  {name}/{}", prop.arity);
    }

    println!("regtypes:");
    for key in &program.regtypes {
        println!("  {key}");
    }

    println!("assertions:");
    for (key, asserts) in &program.assertions {
        for a in asserts {
            println!("  {key} at line {}", a.span.line);
        }
    }

    println!("rules (normalized heads, one variable per argument):");
    for rule in &program.rules {
        println!("  {}", pretty::rule(rule));
    }
}
