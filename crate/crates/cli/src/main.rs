//! `kflow`: check secrecy queries, compare against the naive oracle and
//! inspect primitive specs.
//!
//! Exit codes: 0 secure / agreement / all checks pass, 1 attack / diff /
//! violation, 2 usage, parse, validation or resource error.

use std::collections::BTreeSet;
use std::io::IsTerminal;
use std::path::Path;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use kflow::dsl::{builtin_protocol, builtin_protocols, parse, parse_primitives, Model, ProtocolSpec};
use kflow::engine::{compare, Bounds, Comparison, Status, Verdict};
use kflow::gen::{compare_suite, random_suite};
use kflow::primitives::{builtin_specs, check_local_cf, classify, fixed_set, strata, Class, PrimitiveSpec};
use kflow::term::{enumerate_universe, Tag, DEFAULT_UNIVERSE_CAP};
use kflow::{Error, Term};

#[derive(Parser)]
#[command(name = "kflow", version, about = "Bounded knowledge-flow analysis of security protocols")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide a secrecy query; exit 1 when the target is derivable.
    Check(QueryArgs),
    /// Like `check`, but print only the derivation.
    Trace(QueryArgs),
    /// Compare the two-phase engine against naive saturation.
    Oracle(OracleArgs),
    /// Check primitive specs, classify their rules and compute strata.
    Axioms(AxiomArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct Common {
    /// Maximum term depth.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    depth: Option<u32>,
    /// Protocol-rule firing rounds.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    rounds: Option<u32>,
    /// Maximum synthesis height.
    #[arg(long = "synth-depth", value_parser = clap::value_parser!(u32).range(1..))]
    synth_depth: Option<u32>,
    /// Largest term set an engine may build.
    #[arg(long = "universe-cap", value_parser = clap::value_parser!(u64).range(1..))]
    universe_cap: Option<u64>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

impl Common {
    fn bounds(&self, default_depth: usize) -> Bounds {
        let d = Bounds::default();
        Bounds {
            max_term_depth: self.depth.map_or(default_depth, |v| v as usize),
            max_rounds: self.rounds.map_or(d.max_rounds, |v| v as usize),
            max_synthesis_depth: self.synth_depth.map_or(d.max_synthesis_depth, |v| v as usize),
            universe_cap: self.universe_cap.map_or(d.universe_cap, |v| v as usize),
        }
    }
}

#[derive(Args)]
struct QueryArgs {
    /// Protocol file or builtin name (`ns`, `ns-lowe`).
    protocol: String,
    /// Query name or expanded instance id.
    query: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct OracleArgs {
    /// Protocol file or builtin name; omit with `--random`.
    protocol: Option<String>,
    /// Restrict the protocol comparison to one query.
    #[arg(long)]
    query: Option<String>,
    /// Run the randomized suite instead of a protocol.
    #[arg(long, conflicts_with = "protocol")]
    random: bool,
    /// Number of random protocols.
    #[arg(long, default_value_t = 100)]
    cases: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Move a primitive rule to the other class before comparing.
    #[arg(long, hide = true)]
    misclassify: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct AxiomArgs {
    /// Primitive spec file; the builtin library when omitted.
    file: Option<String>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

/// Default depth for oracle runs, where the naive fixpoint must stay small.
const ORACLE_DEPTH: usize = 3;

struct Style {
    on: bool,
}

impl Style {
    fn detect() -> Self {
        let disabled = std::env::var("KFLOW_COLOR").is_ok_and(|v| v == "0");
        Style {
            on: !disabled && std::io::stdout().is_terminal(),
        }
    }

    fn paint(&self, code: &str, text: &str) -> String {
        if self.on {
            format!("\x1b[{code}m{text}\x1b[0m")
        } else {
            text.to_string()
        }
    }

    fn bad(&self, text: &str) -> String {
        self.paint("1;31", text)
    }

    fn good(&self, text: &str) -> String {
        self.paint("1;32", text)
    }
}

struct Outcome {
    code: u8,
    text: String,
    json: Value,
}

fn load_protocol(arg: &str) -> Result<ProtocolSpec, Error> {
    let path = Path::new(arg);
    if path.exists() {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Validation(format!("cannot read {arg}: {e}")))?;
        return parse(&text);
    }
    builtin_protocol(arg).ok_or_else(|| {
        let names: Vec<String> = builtin_protocols().into_keys().collect();
        Error::Validation(format!(
            "`{arg}` is neither a file nor a builtin protocol ({})",
            names.join(", ")
        ))
    })
}

fn bounds_text(b: &Bounds) -> String {
    format!(
        "depth {}, rounds {}, synth {}",
        b.max_term_depth, b.max_rounds, b.max_synthesis_depth
    )
}

/// `(instance id, verdict, whether its proof replays)`.
type Checked = Vec<(String, Verdict, bool)>;

fn run_verdicts(args: &QueryArgs) -> Result<(ProtocolSpec, Model, Checked), Error> {
    let spec = load_protocol(&args.protocol)?;
    let model = spec.compile()?;
    let bounds = args.common.bounds(Bounds::default().max_term_depth);
    let mut out = Vec::new();
    for (id, verdict) in model.check(&args.query, bounds)? {
        let replayed = match &verdict.proof {
            Some(p) => model.replay(p)?,
            None => false,
        };
        out.push((id, verdict, replayed));
    }
    Ok((spec, model, out))
}

fn overall(verdicts: &[(String, Verdict, bool)]) -> Status {
    if verdicts.iter().any(|(_, v, _)| v.status == Status::AttackFound) {
        Status::AttackFound
    } else {
        Status::SecureAtBound
    }
}

fn check(args: &QueryArgs, style: &Style) -> Result<Outcome, Error> {
    let (spec, _, verdicts) = run_verdicts(args)?;
    let status = overall(&verdicts);
    let mut text = String::new();
    for (id, v, replayed) in &verdicts {
        let label = match v.status {
            Status::AttackFound => style.bad("attack found"),
            Status::SecureAtBound => style.good("secure at bound"),
        };
        text.push_str(&format!("{} {id}: {label} ({})\n", spec.name, bounds_text(&v.bounds)));
        text.push_str(&format!("  target {}\n", v.target));
        text.push_str(&format!(
            "  {} terms explored, {} protocol conclusions, {} rounds{}\n",
            v.statistics.terms_explored,
            v.statistics.rules_fired,
            v.statistics.rounds,
            if v.fixpoint_reached { ", fixpoint reached" } else { "" }
        ));
        if let Some(p) = &v.proof {
            for line in p.trace() {
                text.push_str(&format!("  {line}\n"));
            }
            text.push_str(&format!("  replay: {}\n", if *replayed { "ok" } else { "FAILED" }));
        }
    }
    let json = json!({
        "command": "check",
        "protocol": spec.name,
        "query": args.query,
        "status": status.as_str(),
        "verdicts": verdicts.iter().map(|(id, v, replayed)| {
            let mut j = v.to_json();
            j["instance"] = json!(id);
            j["replayed"] = json!(replayed);
            j
        }).collect::<Vec<_>>(),
    });
    let code = match status {
        Status::AttackFound => 1,
        Status::SecureAtBound => 0,
    };
    Ok(Outcome { code, text, json })
}

fn trace(args: &QueryArgs, style: &Style) -> Result<Outcome, Error> {
    let (spec, _, verdicts) = run_verdicts(args)?;
    let status = overall(&verdicts);
    let mut text = String::new();
    let mut instances = Vec::new();
    for (id, v, _) in &verdicts {
        let steps = v.proof.as_ref().map(|p| p.trace()).unwrap_or_default();
        if steps.is_empty() {
            text.push_str(&format!("{id}: {}\n", style.good("no derivation within the bounds")));
        } else {
            text.push_str(&format!("{id}:\n"));
            for line in &steps {
                text.push_str(&format!("  {line}\n"));
            }
        }
        instances.push(json!({"instance": id, "status": v.status.as_str(), "steps": steps}));
    }
    let json = json!({
        "command": "trace",
        "protocol": spec.name,
        "query": args.query,
        "status": status.as_str(),
        "instances": instances,
    });
    let code = u8::from(status == Status::AttackFound);
    Ok(Outcome { code, text, json })
}

fn mismatch_lines(c: &Comparison) -> Vec<String> {
    c.mismatches
        .iter()
        .map(|m| match m {
            kflow::engine::Mismatch::Missed(t) => format!("missed {t}"),
            kflow::engine::Mismatch::Spurious(t) => format!("spurious {t}"),
        })
        .collect()
}

fn oracle_protocol(args: &OracleArgs, name: &str, style: &Style) -> Result<Outcome, Error> {
    let spec = load_protocol(name)?;
    let model = spec.compile()?;
    let bounds = args.common.bounds(ORACLE_DEPTH);
    let rules = match &args.misclassify {
        Some(id) => model.rules.misclassify(id)?,
        None => model.rules.clone(),
    };
    let targets: Vec<(String, Term)> = match &args.query {
        Some(q) => model.targets(q)?,
        None => model.targets.iter().map(|(_, id, t)| (id.clone(), t.clone())).collect(),
    };
    let probes: Vec<Term> = targets.iter().map(|(_, t)| t.clone()).collect();
    let c = compare(&rules, &model.x0, bounds, &probes)?;
    let code = u8::from(!c.agrees());
    let mut text = format!(
        "{} at depth {}: {} naive terms, {} analyzed, {} checked: {}\n",
        spec.name,
        bounds.max_term_depth,
        c.oracle_size,
        c.analyzed_size,
        c.checked,
        if c.agrees() { style.good("agree") } else { style.bad("differ") }
    );
    let mut queries = Vec::new();
    for ((id, _), (_, naive, engine)) in targets.iter().zip(&c.probes) {
        let word = |b: bool| if b { "derivable" } else { "not derivable" };
        text.push_str(&format!("  {id}: oracle {}, engine {}\n", word(*naive), word(*engine)));
        queries.push(json!({"instance": id, "oracle": naive, "engine": engine}));
    }
    for line in mismatch_lines(&c) {
        text.push_str(&format!("  {line}\n"));
    }
    let json = json!({
        "command": "oracle",
        "mode": "protocol",
        "protocol": spec.name,
        "bounds": bounds.to_json(),
        "agree": c.agrees(),
        "queries": queries,
        "comparison": c.to_json(),
    });
    Ok(Outcome { code, text, json })
}

fn oracle_random(args: &OracleArgs, style: &Style) -> Result<Outcome, Error> {
    let mut cases = random_suite(args.seed, args.cases)?;
    let mut skipped = Vec::new();
    if let Some(id) = &args.misclassify {
        for (i, case) in cases.iter_mut().enumerate() {
            match case.rules.misclassify(id) {
                Ok(r) => case.rules = r,
                Err(_) => skipped.push(i),
            }
        }
    }
    let results = compare_suite(&cases);
    let mut text = String::new();
    let mut reports = Vec::new();
    let (mut agree, mut differ, mut errors) = (0, 0, 0);
    for (i, r) in results.iter().enumerate() {
        match r {
            Ok((depth, c)) => {
                if c.agrees() {
                    agree += 1;
                } else {
                    differ += 1;
                    text.push_str(&format!("case {i} (depth {depth}): {}\n", style.bad("differ")));
                    for line in mismatch_lines(c) {
                        text.push_str(&format!("  {line}\n"));
                    }
                }
                let mut j = c.to_json();
                j["case"] = json!(i);
                j["depth"] = json!(depth);
                j["agree"] = json!(c.agrees());
                reports.push(j);
            }
            Err(e) => {
                errors += 1;
                text.push_str(&format!("case {i}: {e}\n"));
                reports.push(json!({"case": i, "error": e.to_string()}));
            }
        }
    }
    text.push_str(&format!(
        "seed {}: {} cases, {agree} agree, {differ} differ, {errors} errors\n",
        args.seed, args.cases
    ));
    let code = if differ > 0 {
        1
    } else if errors > 0 {
        2
    } else {
        0
    };
    let json = json!({
        "command": "oracle",
        "mode": "random",
        "seed": args.seed,
        "agree": differ == 0 && errors == 0,
        "summary": {"cases": args.cases, "agree": agree, "differ": differ, "errors": errors},
        "cases": reports,
    });
    Ok(Outcome { code, text, json })
}

fn oracle(args: &OracleArgs, style: &Style) -> Result<Outcome, Error> {
    match (&args.protocol, args.random) {
        (Some(p), false) => oracle_protocol(args, p, style),
        (None, true) => oracle_random(args, style),
        _ => Err(Error::Validation("give a protocol or --random".into())),
    }
}

/// Sample universe for the collision check: depth-2 terms over two atoms
/// and one identity, plus any declared image tokens.
fn sample_universe(spec: &PrimitiveSpec) -> Result<BTreeSet<Term>, Error> {
    let leaves: BTreeSet<Term> = [Term::atom("a"), Term::atom("b"), Term::identity("a")].into();
    let mut tags: BTreeSet<Tag> = spec.schema.iter().flat_map(tags_of).collect();
    tags.remove(&Tag::Var);
    let mut u = enumerate_universe(&leaves, &tags, 2, DEFAULT_UNIVERSE_CAP)?;
    u.extend(spec.declared_image.iter().cloned());
    Ok(u)
}

fn tags_of(t: &Term) -> Vec<Tag> {
    let mut out = vec![t.tag()];
    for c in t.children() {
        out.extend(tags_of(c));
    }
    out
}

fn axioms(args: &AxiomArgs, style: &Style) -> Result<Outcome, Error> {
    let specs = match &args.file {
        Some(f) => {
            let text = std::fs::read_to_string(f).map_err(|e| Error::Validation(format!("cannot read {f}: {e}")))?;
            parse_primitives(&text)?
        }
        None => builtin_specs(),
    };
    let mut text = String::new();
    let mut reports = Vec::new();
    let mut all_pass = true;
    for spec in &specs {
        let universe = sample_universe(spec)?;
        let report = check_local_cf(spec, &universe)?;
        let fixed = fixed_set(&universe, spec);
        let map = strata(&universe, std::slice::from_ref(spec));
        let pass = report.pass() && fixed.members.is_empty();
        all_pass &= pass;

        let verdict = if pass { style.good("pass") } else { style.bad("fail") };
        text.push_str(&format!("{} (principal {}): {verdict}\n", spec.name, spec.principal));
        for v in &report.violations {
            text.push_str(&format!("  violation ({}): {}\n", v.condition(), v.message()));
        }
        let mut table = Vec::new();
        for c in classify(spec) {
            let (class, controller) = match c.class {
                Class::Composing => ("composing", None),
                Class::Decomposing { controlled_by } => ("decomposing", Some(controlled_by)),
            };
            let suffix = controller.map_or(String::new(), |h| format!(", controlled by position {h}"));
            text.push_str(&format!("  position {} {:<10} {class}{suffix}\n", c.position, c.label));
            table.push(json!({"position": c.position, "label": c.label, "class": class, "controlled_by": controller}));
        }
        let sample = strata_sample(&map.stratum);
        let shown: Vec<String> = sample
            .iter()
            .map(|(t, n)| format!("{t}: {}", n.map_or("none".into(), |n| n.to_string())))
            .collect();
        text.push_str(&format!("  strata sample: {}\n", shown.join("; ")));
        if fixed.members.is_empty() {
            text.push_str("  fixed set: empty\n");
        } else {
            let members: Vec<String> = fixed.members.iter().map(Term::to_string).collect();
            text.push_str(&format!("  fixed set: {}\n", members.join(", ")));
        }
        let mut j = report.to_json();
        j["pass"] = json!(pass);
        j["composing"] = json!(spec.composing);
        j["decomposing"] = json!(spec.decomposing);
        j["classification"] = json!(table);
        j["strata_sample"] = json!(sample
            .iter()
            .map(|(t, n)| json!({"term": t.to_string(), "stratum": n}))
            .collect::<Vec<_>>());
        j["fixed_set"] = json!(fixed.members.iter().map(Term::to_string).collect::<Vec<_>>());
        j["universe_size"] = json!(universe.len());
        reports.push(j);
    }
    let json = json!({"command": "axioms", "pass": all_pass, "specs": reports});
    Ok(Outcome {
        code: u8::from(!all_pass),
        text,
        json,
    })
}

/// The least term of each stratum, then the least unreached term.
fn strata_sample(map: &std::collections::BTreeMap<Term, Option<usize>>) -> Vec<(Term, Option<usize>)> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut terms: Vec<(&Term, &Option<usize>)> = map.iter().collect();
    terms.sort_by_key(|(t, _)| (t.size(), (*t).clone()));
    for (t, n) in terms {
        if seen.insert(*n) {
            out.push((t.clone(), *n));
        }
    }
    out.sort_by_key(|(_, n)| n.unwrap_or(usize::MAX));
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let style = Style::detect();
    let (format, result) = match &cli.command {
        Command::Check(a) => (a.common.format, check(a, &style)),
        Command::Trace(a) => (a.common.format, trace(a, &style)),
        Command::Oracle(a) => (a.common.format, oracle(a, &style)),
        Command::Axioms(a) => (a.format, axioms(a, &style)),
    };
    match result {
        Ok(out) => {
            match format {
                Format::Text => print!("{}", out.text),
                Format::Json => println!("{}", serde_json::to_string_pretty(&out.json).expect("serializable")),
            }
            ExitCode::from(out.code)
        }
        Err(e) => {
            if format == Format::Json {
                println!("{}", json!({"error": e.to_string()}));
            }
            eprintln!("kflow: {e}");
            ExitCode::from(2)
        }
    }
}
