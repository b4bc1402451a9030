//! Command-line driver: `check` verifies assertions, `run` executes a goal
//! (optionally under the semantics with assertions), `conformance` prints
//! just the property tables. Exit codes: 0 all checked, 1 something false,
//! 2 checks remain, 3 usage or parse error.

use std::collections::BTreeSet;
use std::io::IsTerminal;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::assertions::program_conditions;
use crate::domain::lattice::FiniteLattice;
use crate::engine::{Budget, Machine};
use crate::parser::parse_program;
use crate::report::Report;
use crate::store::Store;
use crate::syntax::{pretty, EntryDecl, Program};
use crate::verifier::{
    hiord_verify, rebuild_ctx, runtime_conditions, VerifyOptions, VerifyOutcome,
};

#[derive(Parser)]
#[command(
    name = "hiord",
    about = "Verifier for logic programs with higher-order assertions",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Verify the assertions of one or more source files.
    Check(CheckArgs),
    /// Run a goal against a source file.
    Run(RunArgs),
    /// Compute and print the conformance tables only.
    Conformance(ConfArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportKind {
    Text,
    Json,
}

#[derive(Args)]
struct CheckArgs {
    /// Source files; each is verified independently.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Extra abstract entry, `GOAL` or `GOAL : PRE`; repeatable.
    #[arg(long = "entry")]
    entries: Vec<String>,
    /// Finite lattice file interpreting unary checks.
    #[arg(long)]
    lattice: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportKind::Text)]
    report: ReportKind,
    /// Also execute the entry goals under the semantics with assertions
    /// and report the concrete violations hit.
    #[arg(long = "run-checks")]
    run_checks: bool,
    /// Derivation depth budget for the concrete machinery.
    #[arg(long)]
    depth: Option<usize>,
    /// Write the analysis table (call and success patterns) to a file.
    #[arg(long = "dump-analysis")]
    dump_analysis: Option<PathBuf>,
    /// Write the conformance tables to a file.
    #[arg(long = "dump-conformance")]
    dump_conformance: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    file: PathBuf,
    /// Goal to run, e.g. 'qsort([2,1],lex,Ys)'.
    goal: String,
    /// Run under the semantics with assertions; violations are reported
    /// and make the exit code 1.
    #[arg(long = "run-checks")]
    run_checks: bool,
    #[arg(long)]
    depth: Option<usize>,
    /// Print at most this many answers.
    #[arg(long, default_value_t = 10)]
    answers: usize,
}

#[derive(Args)]
struct ConfArgs {
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[arg(long)]
    lattice: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportKind::Text)]
    report: ReportKind,
    #[arg(long = "dump-conformance")]
    dump_conformance: Option<PathBuf>,
}

pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap renders --help/--version through the same path.
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match cli.cmd {
        Cmd::Check(args) => run_check(args),
        Cmd::Run(args) => run_goal(args),
        Cmd::Conformance(args) => run_conformance(args),
    }
}

fn use_color() -> bool {
    std::env::var_os("NO_COLOR").is_none() && std::io::stdout().is_terminal()
}

fn load_program(path: &Path) -> Result<Program, String> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    parse_program(&src).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_lattice(path: &Option<PathBuf>) -> Result<Option<FiniteLattice>, String> {
    match path {
        None => Ok(None),
        Some(p) => {
            let src = std::fs::read_to_string(p)
                .map_err(|e| format!("{}: {e}", p.display()))?;
            FiniteLattice::parse(&src)
                .map(Some)
                .map_err(|e| format!("{}: {e}", p.display()))
        }
    }
}

fn parse_entry_arg(s: &str) -> Result<EntryDecl, String> {
    let src = format!(":- entry {s}.");
    let p = parse_program(&src).map_err(|e| format!("--entry '{s}': {e}"))?;
    p.entries
        .into_iter()
        .next()
        .ok_or_else(|| format!("--entry '{s}': not a goal"))
}

fn options_with_depth(depth: Option<usize>) -> VerifyOptions {
    let mut opts = VerifyOptions::default();
    if let Some(d) = depth {
        opts.budget.max_depth = d;
        opts.oracle.max_depth = d;
    }
    opts
}

fn run_check(args: CheckArgs) -> i32 {
    let lattice = match load_lattice(&args.lattice) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("hiord: {e}");
            return 3;
        }
    };
    let mut entries = Vec::new();
    for s in &args.entries {
        match parse_entry_arg(s) {
            Ok(e) => entries.push(e),
            Err(e) => {
                eprintln!("hiord: {e}");
                return 3;
            }
        }
    }
    let opts = options_with_depth(args.depth);

    // Files verify independently; run them concurrently and print in
    // input order.
    let results: Vec<Result<(String, i32), String>> = std::thread::scope(|s| {
        let handles: Vec<_> = args
            .files
            .iter()
            .map(|path| {
                let lattice = lattice.clone();
                let entries = &entries;
                let opts = &opts;
                let args = &args;
                s.spawn(move || check_one(path, lattice, entries, opts, args))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("verification does not panic"))
            .collect()
    });

    let mut code = 0;
    for r in results {
        match r {
            Ok((text, c)) => {
                print!("{text}");
                code = code.max(c);
            }
            Err(e) => {
                eprintln!("hiord: {e}");
                code = 3;
            }
        }
    }
    code
}

fn check_one(
    path: &Path,
    lattice: Option<FiniteLattice>,
    entries: &[EntryDecl],
    opts: &VerifyOptions,
    args: &CheckArgs,
) -> Result<(String, i32), String> {
    let program = load_program(path)?;
    let out = hiord_verify(&program, lattice.clone(), entries, opts);
    let report = Report::from_outcome(&path.display().to_string(), &out);

    if let Some(f) = &args.dump_analysis {
        std::fs::write(f, analysis_dump(&program, lattice.clone(), &out))
            .map_err(|e| format!("{}: {e}", f.display()))?;
    }
    if let Some(f) = &args.dump_conformance {
        std::fs::write(f, out.conformance.render_text())
            .map_err(|e| format!("{}: {e}", f.display()))?;
    }

    let mut text = match args.report {
        ReportKind::Text => report.render_text(use_color()),
        ReportKind::Json => report.to_json(),
    };
    let mut code = report.exit;
    if args.run_checks {
        let (ran, violated) = run_entry_checks(&program, lattice, &out, args.depth);
        if args.report == ReportKind::Text {
            text.push_str(&ran);
        }
        if violated {
            code = code.max(1);
        }
    }
    Ok((text, code))
}

fn analysis_dump(
    program: &Program,
    lattice: Option<FiniteLattice>,
    out: &VerifyOutcome,
) -> String {
    let (_, ctx) = rebuild_ctx(program, lattice, out);
    let mut t = String::new();
    for triple in &out.analysis.triples {
        t.push_str(&format!(
            "{}: call {} -> success {}\n",
            triple.pred,
            triple.call.render(&ctx),
            triple.success.render(&ctx),
        ));
    }
    if out.analysis.incomplete {
        t.push_str("analysis budget exhausted; table is partial\n");
    }
    t
}

/// Execute every entry goal under the semantics with assertions, against
/// the augmented program so generated types are runnable.
fn run_entry_checks(
    program: &Program,
    lattice: Option<FiniteLattice>,
    out: &VerifyOutcome,
    depth: Option<usize>,
) -> (String, bool) {
    let (aug, _) = rebuild_ctx(program, lattice, out);
    let conds = runtime_conditions(&aug, &program_conditions(program));
    let mut budget = Budget::default();
    if let Some(d) = depth {
        budget.max_depth = d;
    }
    let mut machine = Machine::new(&aug);
    let mut text = String::from("\nrun-time checks\n");
    let mut violated = false;
    for (goal, _) in &out.entries {
        let r = machine.success_context(goal, &Store::empty(), &conds, &budget);
        if r.violations.is_empty() {
            text.push_str(&format!(
                "  {}: {} answer(s), no violations\n",
                pretty::atom(goal),
                r.answers.len(),
            ));
        } else {
            violated = true;
            for v in &r.violations {
                text.push_str(&format!(
                    "  {}: condition {} violated at {}\n",
                    pretty::atom(goal),
                    v.label,
                    pretty::atom(&v.culprit),
                ));
            }
        }
    }
    (text, violated)
}

fn run_goal(args: RunArgs) -> i32 {
    let program = match load_program(&args.file) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("hiord: {e}");
            return 3;
        }
    };
    let parsed = parse_program(&format!("run_cli_goal :- {}.", args.goal));
    let rule = match &parsed {
        Ok(p) => p
            .rules_for(&crate::syntax::PredKey::new("run_cli_goal", 0))
            .next(),
        Err(_) => None,
    };
    let Some(rule) = rule else {
        eprintln!("hiord: goal '{}' does not parse", args.goal);
        return 3;
    };
    let goal = crate::engine::goal_of_literals(&rule.body);
    let proj: BTreeSet<_> = rule.vars();
    let mut budget = Budget::default();
    if let Some(d) = args.depth {
        budget.max_depth = d;
    }

    if args.run_checks {
        let out = hiord_verify(&program, None, &[], &VerifyOptions::default());
        let (aug, _) = rebuild_ctx(&program, None, &out);
        let conds = runtime_conditions(&aug, &program_conditions(&program));
        let mut machine = Machine::new(&aug);
        let r = machine.derive_checked(goal, Store::empty(), &conds, &proj, &budget);
        print_answers(&r.answers, &proj, args.answers, r.complete);
        for v in &r.violations {
            println!("violation: condition {} at {}", v.label, pretty::atom(&v.culprit));
        }
        if !r.violations.is_empty() {
            return 1;
        }
    } else {
        let mut machine = Machine::new(&program);
        let r = machine.derive(goal, Store::empty(), &proj, &budget);
        print_answers(&r.answers, &proj, args.answers, r.complete);
    }
    0
}

fn print_answers(answers: &[Store], proj: &BTreeSet<String>, cap: usize, complete: bool) {
    if answers.is_empty() {
        println!("no");
    }
    for s in answers.iter().take(cap) {
        let mut parts = Vec::new();
        for v in proj {
            if let Some(t) = s.bindings().find(|(n, _)| *n == v).map(|(_, t)| t) {
                parts.push(format!("{v} = {}", pretty::term(t)));
            }
        }
        if parts.is_empty() {
            println!("yes");
        } else {
            println!("{}", parts.join(", "));
        }
    }
    if answers.len() > cap {
        println!("... {} more", answers.len() - cap);
    }
    if !complete {
        println!("(search budget exhausted; answers may be missing)");
    }
}

fn run_conformance(args: ConfArgs) -> i32 {
    let lattice = match load_lattice(&args.lattice) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("hiord: {e}");
            return 3;
        }
    };
    let mut code = 0;
    for path in &args.files {
        let program = match load_program(path) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("hiord: {e}");
                code = 3;
                continue;
            }
        };
        let out =
            hiord_verify(&program, lattice.clone(), &[], &VerifyOptions::default());
        let text = match args.report {
            ReportKind::Text => out.conformance.render_text(),
            ReportKind::Json => {
                Report::from_outcome(&path.display().to_string(), &out).to_json()
            }
        };
        if let Some(f) = &args.dump_conformance {
            if let Err(e) = std::fs::write(f, out.conformance.render_text()) {
                eprintln!("hiord: {}: {e}", f.display());
                code = 3;
                continue;
            }
        }
        print!("{text}");
    }
    code
}
