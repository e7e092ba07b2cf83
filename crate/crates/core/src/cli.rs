//! Command-line front end. Exit codes: 0 all checks pass, 1 a check
//! fails, 2 usage or input error.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::casebook::{self, family_label, ClosureOutcome, Verdict};
use crate::determining::{
    describe_combination, determining_system_with, match_reference_with, print_equation, unknown_ansatz, MatchKind,
};
use crate::error::{Error, Result};
use crate::expr::{parse_with, Frac, Subst, Symbols};
use crate::format::{parse_document, parse_document_with, write_declarations, write_generator, write_system, Document};
use crate::jet::{prolong, symmetry_residuals, Generator, OdeSystem};
use crate::lie::{closure_check, combination, commutator, Closure};
use crate::par::Exec;
use crate::reduction::{classify_linear_third_order, is_laguerre_form, scalar_to_system};
use crate::report::{Item, Report};

#[derive(Parser, Debug)]
#[command(name = "contactsym", version, about = "Exact Lie point-symmetry checks for ODE systems")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Print a JSON report instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Bind a free constant, e.g. `--param alpha0=1`.
    #[arg(long = "param", value_name = "NAME=VALUE", global = true)]
    params: Vec<String>,
    /// Evaluate on one thread.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Normalise an expression, or read a file and print it back.
    Parse { input: String },
    /// Check generators against a system.
    CheckSymmetry {
        #[arg(long)]
        system: PathBuf,
        #[arg(long, required = true)]
        generator: Vec<PathBuf>,
    },
    /// Extension coefficients of generators.
    Prolong {
        #[arg(long)]
        system: PathBuf,
        #[arg(long, required = true)]
        generator: Vec<PathBuf>,
        #[arg(long)]
        order: Option<u32>,
    },
    /// Determining equations of a system.
    Determine {
        #[arg(long)]
        system: Option<PathBuf>,
    },
    /// Compare generated determining equations with a reference list.
    MatchPaper {
        #[arg(long)]
        system: Option<PathBuf>,
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Bracket of two generators.
    Commutator {
        #[arg(long)]
        system: Option<PathBuf>,
        #[arg(long, required = true)]
        generator: Vec<PathBuf>,
    },
    /// Structure constants of a generator set, or the bracket leaving its span.
    Closure {
        #[arg(long)]
        system: Option<PathBuf>,
        #[arg(long, required = true)]
        generator: Vec<PathBuf>,
    },
    /// First-order reduction of a scalar equation.
    Reduce {
        #[arg(long)]
        system: PathBuf,
    },
    /// Verify the casebook and report the claimed dimensions.
    Classify {
        #[arg(long, default_value = "builtin")]
        casebook: String,
        #[arg(long)]
        only: Option<String>,
    },
}

/// Outcome of a command: text output, report and whether checks passed.
struct Outcome {
    text: String,
    report: Report,
}

fn read(path: &Path, report: &mut Report) -> Result<String> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
    report.add_input(&path.display().to_string(), text.as_bytes());
    Ok(text)
}

fn in_file<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
}

fn load_system(path: &Path, report: &mut Report) -> Result<(OdeSystem, Symbols)> {
    let text = read(path, report)?;
    let doc = in_file(path, parse_document(&text))?;
    let Some(sys) = doc.system else { return Err(Error::invalid(format!("{}: no system block", path.display()))) };
    Ok((sys, doc.symbols))
}

/// Generator files: each path is a file or a directory of files.
fn generator_docs(paths: &[PathBuf], symbols: &Symbols, report: &mut Report) -> Result<Vec<Document>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let entries = std::fs::read_dir(p).map_err(|e| Error::invalid(format!("{}: {e}", p.display())))?;
            let mut inner: Vec<PathBuf> =
                entries.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_file()).collect();
            inner.sort();
            files.extend(inner);
        } else {
            files.push(p.clone());
        }
    }
    files
        .iter()
        .map(|f| {
            let text = read(f, report)?;
            in_file(f, parse_document_with(&text, symbols))
        })
        .collect()
}

fn load_generators(
    paths: &[PathBuf],
    sys: Option<&OdeSystem>,
    symbols: &Symbols,
    report: &mut Report,
) -> Result<Vec<Generator>> {
    let docs = generator_docs(paths, symbols, report)?;
    let (indep, deps) = match sys {
        Some(s) => (s.indep().to_string(), s.deps().to_vec()),
        None => {
            let mut deps: Vec<String> =
                docs.iter().flat_map(|d| d.generators.iter().flat_map(|g| g.etas.keys().cloned())).collect();
            deps.sort();
            deps.dedup();
            ("x".to_string(), deps)
        }
    };
    let mut out: Vec<Generator> = Vec::new();
    for d in &docs {
        for spec in &d.generators {
            if out.iter().any(|g| g.name == spec.name) {
                return Err(Error::invalid(format!("generator {} defined twice", spec.name)));
            }
            out.push(spec.build(&indep, &deps)?);
        }
    }
    if out.is_empty() {
        return Err(Error::invalid("no generators given"));
    }
    Ok(out)
}

fn bindings(params: &[String], symbols: &Symbols) -> Result<Subst> {
    let mut s = Subst::new();
    for p in params {
        let Some((name, value)) = p.split_once('=') else {
            return Err(Error::invalid(format!("--param {p}: expected NAME=VALUE")));
        };
        let v = parse_with(value, symbols)
            .and_then(|e| e.to_frac())
            .map_err(|e| Error::invalid(format!("--param {p}: {e}")))?;
        s = s.bind(name.trim(), v);
    }
    Ok(s)
}

fn residual_strings(rs: &[Frac]) -> Vec<String> {
    rs.iter().map(|r| r.to_string()).collect()
}

fn check_symmetry(cli: &Cli, system: &Path, generator: &[PathBuf]) -> Result<Outcome> {
    let mut report = Report::new("check-symmetry");
    let (sys, symbols) = load_system(system, &mut report)?;
    let s = bindings(&cli.params, &symbols)?;
    let sys = sys.substitute(&s)?;
    let gens = load_generators(generator, Some(&sys), &symbols, &mut report)?;
    let exec = exec(cli);
    let results = exec.map(&gens, |g| g.substitute(&s).and_then(|g| symmetry_residuals(&g, &sys)));
    let mut text = String::new();
    for (g, r) in gens.iter().zip(results) {
        let r = r?;
        let ok = r.iter().all(Frac::is_zero);
        let verdict = if ok { "SYMMETRY" } else { "NOT A SYMMETRY" };
        let strs = residual_strings(&r);
        writeln!(text, "{}: {verdict} (residuals: {})", g.name, strs.join(", ")).unwrap();
        report.passed &= ok;
        report.items.push(Item::new(&g.name, "generator", strs, if ok { "symmetry" } else { "not-a-symmetry" }));
    }
    Ok(Outcome { text, report })
}

fn prolong_cmd(cli: &Cli, system: &Path, generator: &[PathBuf], order: Option<u32>) -> Result<Outcome> {
    let mut report = Report::new("prolong");
    let (sys, symbols) = load_system(system, &mut report)?;
    let s = bindings(&cli.params, &symbols)?;
    let gens = load_generators(generator, Some(&sys), &symbols, &mut report)?;
    let k = order.unwrap_or(sys.order());
    let mut text = String::new();
    for g in &gens {
        let g = g.substitute(&s)?;
        let p = prolong(&g, k);
        let mut coeffs = Vec::new();
        for (i, d) in g.deps().iter().enumerate() {
            for j in 1..=k {
                let line = format!("eta[{d}]^({j}) = {}", p.coefficient(i, j));
                writeln!(text, "{}: {line}", g.name).unwrap();
                coeffs.push(line);
            }
        }
        report.items.push(Item::new(&g.name, "prolongation", coeffs, "computed"));
    }
    Ok(Outcome { text, report })
}

fn system_or_generic(path: Option<&Path>, params: &[String], report: &mut Report) -> Result<OdeSystem> {
    let (sys, symbols) = match path {
        Some(p) => load_system(p, report)?,
        None => {
            report.add_input("system", b"generic");
            (casebook::generic_system(), Symbols::default())
        }
    };
    sys.substitute(&bindings(params, &symbols)?)
}

fn determine(cli: &Cli, system: Option<&Path>) -> Result<Outcome> {
    let mut report = Report::new("determine");
    let sys = system_or_generic(system, &cli.params, &mut report)?;
    let det = determining_system_with(&sys, &unknown_ansatz(&sys), exec(cli))?;
    let mut text = String::new();
    for eq in &det.equations {
        let label = det.label(eq);
        let e = print_equation(&eq.expr);
        writeln!(text, "{label}: {e} = 0").unwrap();
        report.items.push(Item::new(label, "equation", vec![e], "generated"));
    }
    Ok(Outcome { text, report })
}

fn match_paper(cli: &Cli, system: Option<&Path>, reference: Option<&Path>) -> Result<Outcome> {
    let mut report = Report::new("match-paper");
    let sys = system_or_generic(system, &cli.params, &mut report)?;
    let refs = match reference {
        Some(p) => {
            let text = read(p, &mut report)?;
            in_file(p, casebook::parse_reference(&text))?
        }
        None => {
            report.add_input("reference", b"builtin");
            casebook::reference_equations()
        }
    };
    let det = determining_system_with(&sys, &unknown_ansatz(&sys), exec(cli))?;
    let results = match_reference_with(&det, &refs, exec(cli));
    let mut text = String::new();
    let (mut exact, mut errata, mut unmatched) = (0, 0, 0);
    for r in &results {
        let eq = print_equation(&r.equation);
        let (verdict, detail) = match &r.kind {
            MatchKind::Exact(c) => {
                exact += 1;
                ("exact", describe_combination(&det, c))
            }
            MatchKind::Erratum { combination, term, printed, corrected } => {
                errata += 1;
                let d = format!(
                    "coefficient of {term} {printed} -> {corrected}: {}",
                    describe_combination(&det, combination)
                );
                report.findings.push(format!("{}: suggested erratum, {d}", r.label));
                ("erratum", d)
            }
            MatchKind::Unmatched { nearest } => {
                unmatched += 1;
                report.passed = false;
                let d = match nearest {
                    Some((i, q, diff)) => {
                        let g = &det.equations[*i];
                        format!(
                            "nearest {}: {} = 0, scaled by {q}, differs in {diff} terms",
                            det.label(g),
                            print_equation(&g.expr)
                        )
                    }
                    None => "no generated equation shares a term".to_string(),
                };
                report.findings.push(format!("{}: unmatched, {d}", r.label));
                ("unmatched", d)
            }
        };
        writeln!(text, "{}: {verdict}: {eq} = 0 [{detail}]", r.label).unwrap();
        report.items.push(Item::new(&r.label, "reference-equation", vec![eq], verdict));
    }
    writeln!(
        text,
        "matched {exact} exactly, {errata} after one coefficient change, {unmatched} unmatched of {}",
        results.len()
    )
    .unwrap();
    Ok(Outcome { text, report })
}

fn commutator_cmd(cli: &Cli, system: Option<&Path>, generator: &[PathBuf]) -> Result<Outcome> {
    let mut report = Report::new("commutator");
    let (sys, symbols) = match system {
        Some(p) => {
            let (s, sy) = load_system(p, &mut report)?;
            (Some(s), sy)
        }
        None => (None, Symbols::default()),
    };
    let s = bindings(&cli.params, &symbols)?;
    let gens = load_generators(generator, sys.as_ref(), &symbols, &mut report)?;
    if gens.len() != 2 {
        return Err(Error::invalid(format!("commutator needs exactly two generators, got {}", gens.len())));
    }
    let a = gens[0].substitute(&s)?;
    let b = gens[1].substitute(&s)?;
    let c = commutator(&a, &b)?.with_name(&format!("{}_{}", a.name, b.name));
    let text = format!("# [{},{}]\n{}", a.name, b.name, write_generator(&c));
    let comps = c.components().into_iter().map(|(l, v)| format!("{l}: {v}")).collect();
    report.items.push(Item::new(
        format!("[{},{}]", a.name, b.name),
        "bracket",
        comps,
        if c.is_zero() { "zero" } else { "nonzero" },
    ));
    Ok(Outcome { text, report })
}

fn closure_cmd(cli: &Cli, system: Option<&Path>, generator: &[PathBuf]) -> Result<Outcome> {
    let mut report = Report::new("closure");
    let (sys, symbols) = match system {
        Some(p) => {
            let (s, sy) = load_system(p, &mut report)?;
            (Some(s), sy)
        }
        None => (None, Symbols::default()),
    };
    let s = bindings(&cli.params, &symbols)?;
    let gens = load_generators(generator, sys.as_ref(), &symbols, &mut report)?
        .iter()
        .map(|g| g.substitute(&s))
        .collect::<Result<Vec<_>>>()?;
    let mut text = String::new();
    match closure_check(&gens, exec(cli))? {
        Closure::Closed(b) => {
            writeln!(text, "closed: dimension {}", b.dimension()).unwrap();
            for ((i, j), c) in b.structure.iter().filter(|((i, j), _)| i < j) {
                let line = format!("[{},{}] = {}", gens[*i].name, gens[*j].name, combination(&gens, c));
                writeln!(text, "{line}").unwrap();
                report.items.push(Item::new(
                    format!("[{},{}]", gens[*i].name, gens[*j].name),
                    "bracket",
                    vec![],
                    combination(&gens, c),
                ));
            }
        }
        Closure::Open { pair, bracket } => {
            report.passed = false;
            let name = format!("[{},{}]", gens[pair.0].name, gens[pair.1].name);
            let comps: Vec<String> = bracket.components().into_iter().map(|(l, v)| format!("{l}: {v}")).collect();
            writeln!(text, "not closed: {name} = ({}) is outside the span", comps.join(", ")).unwrap();
            report.findings.push(format!("{name} is outside the span"));
            report.items.push(Item::new(name, "bracket", comps, "outside-span"));
        }
    }
    Ok(Outcome { text, report })
}

fn reduce_cmd(cli: &Cli, system: &Path) -> Result<Outcome> {
    let mut report = Report::new("reduce");
    let text = read(system, &mut report)?;
    let doc = in_file(system, parse_document(&text))?;
    let Some(ode) = doc.ode else { return Err(Error::invalid(format!("{}: no ode block", system.display()))) };
    let s = bindings(&cli.params, &doc.symbols)?;
    let ode = crate::reduction::ScalarOde::new(ode.indep(), ode.dep(), ode.order(), s.apply(ode.rhs())?)?;
    let sys = scalar_to_system(&ode)?;
    let mut out = String::new();
    match is_laguerre_form(&ode) {
        Ok(b) => writeln!(out, "# laguerre form: {}", if b { "yes" } else { "no" }).unwrap(),
        Err(_) => writeln!(out, "# laguerre form: not linear").unwrap(),
    }
    out.push_str(&write_declarations(&doc.symbols));
    out.push_str(&write_system(&sys));
    if let Ok(c) = classify_linear_third_order(&ode) {
        match &c.system {
            Some(s) => {
                writeln!(out, "# with z standing for y' instead:").unwrap();
                for l in write_system(s).lines() {
                    writeln!(out, "# {l}").unwrap();
                }
            }
            None => writeln!(out, "# not of the form y''' = alpha*y' + beta*y''").unwrap(),
        }
    }
    let rhs = sys
        .deps()
        .iter()
        .zip(sys.rhs())
        .map(|(d, f)| format!("{d}{} = {f}", "'".repeat(sys.order() as usize)))
        .collect();
    report.items.push(Item::new("system", "reduction", rhs, "reduced"));
    Ok(Outcome { text: out, report })
}

fn classify_cmd(cli: &Cli, source: &str, only: Option<&str>) -> Result<Outcome> {
    let mut report = Report::new("classify");
    if !cli.params.is_empty() {
        return Err(Error::invalid("classify takes its parameters from the case files"));
    }
    let mut records = if source == "builtin" {
        report.add_input("casebook", b"builtin");
        casebook::builtin_cases()
    } else {
        let dir = Path::new(source);
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| Error::invalid(format!("{source}: {e}")))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        paths.sort();
        for p in &paths {
            if p.extension().is_some_and(|x| x == "case") {
                read(p, &mut report)?;
            }
        }
        casebook::load_dir(dir)?
    };
    if let Some(prefix) = only {
        report.add_input("only", prefix.as_bytes());
        records.retain(|r| r.id.starts_with(prefix));
        if records.is_empty() {
            return Err(Error::invalid(format!("no case matches {prefix}")));
        }
    }
    let cl = casebook::classify(&records, exec(cli))?;
    let mut text = String::new();
    for c in &cl.cases {
        let closure = match &c.closure {
            ClosureOutcome::Closed(b) => format!("closed at dimension {}", b.dimension()),
            ClosureOutcome::Open { pair, .. } => format!("[{},{}] leaves the span", pair.0, pair.1),
            ClosureOutcome::Skipped(why) => format!("closure not checked ({why})"),
        };
        let status = if c.passed() { "pass" } else { "fail" };
        writeln!(
            text,
            "case {}: claimed {}, listed {}, verified lower bound {}, {closure}: {status}",
            c.id,
            c.claimed,
            c.generators.len(),
            c.lower_bound
        )
        .unwrap();
        for f in &c.families {
            writeln!(text, "  family {}", family_label(f)).unwrap();
        }
        for g in &c.generators {
            let residuals = residual_strings(&g.residuals);
            writeln!(text, "  {}: {}", g.name, g.verdict_label()).unwrap();
            if let Verdict::Repaired(r) = &g.verdict {
                writeln!(text, "    verified form: {}", component_list(&r.repaired)).unwrap();
            }
            report.items.push(Item::new(format!("{}/{}", c.id, g.name), "generator", residuals, g.verdict_label()));
        }
        for f in &c.findings {
            writeln!(text, "  finding: {f}").unwrap();
            report.findings.push(format!("{}: {f}", c.id));
        }
        for (f, odes) in &c.x_odes {
            writeln!(text, "  constraints on a1..a6 for {}:", family_label(f)).unwrap();
            let lines: Vec<String> =
                odes.iter().map(|o| format!("{}: {} = 0", o.label(), print_equation(&o.expr))).collect();
            for l in &lines {
                writeln!(text, "    {l}").unwrap();
            }
            report.items.push(Item::new(format!("{}/{}", c.id, family_label(f)), "x-odes", lines, "unsolved"));
        }
        let verdict = match &c.closure {
            ClosureOutcome::Closed(b) if b.dimension() == c.claimed => format!("verified dimension {}", c.claimed),
            _ => format!("lower bound {} of claimed {}", c.lower_bound, c.claimed),
        };
        report.items.push(Item::new(&c.id, "case", vec![], verdict));
    }
    let dims: Vec<String> = cl.dimension_set.iter().map(|d| d.to_string()).collect();
    writeln!(text, "dimension set: {{{}}}", dims.join(", ")).unwrap();
    writeln!(text, "machine verified: {}", cl.machine_verified().join(", ")).unwrap();
    writeln!(text, "lower bound only: {}", cl.lower_bound_only().join(", ")).unwrap();
    report.passed = cl.passed();
    report.dimension_set = Some(cl.dimension_set.clone());
    Ok(Outcome { text, report })
}

fn component_list(g: &Generator) -> String {
    g.components().into_iter().map(|(l, v)| format!("{l}: {v}")).collect::<Vec<_>>().join("  ")
}

fn parse_cmd(input: &str) -> Result<Outcome> {
    let mut report = Report::new("parse");
    let path = Path::new(input);
    let text = if path.is_file() {
        let src = read(path, &mut report)?;
        let doc = in_file(path, parse_document(&src))?;
        let mut out = write_declarations(&doc.symbols);
        if let Some(s) = &doc.system {
            out.push_str(&write_system(s));
        }
        let (indep, deps) = match &doc.system {
            Some(s) => (s.indep().to_string(), s.deps().to_vec()),
            None => ("x".to_string(), vec!["y".to_string(), "z".to_string()]),
        };
        for g in &doc.generators {
            let g = g.build(&indep, &deps)?;
            out.push_str(&write_generator(&g));
            report.items.push(Item::new(&g.name, "generator", vec![component_list(&g)], "parsed"));
        }
        out
    } else {
        report.add_input("expression", input.as_bytes());
        let e = crate::expr::parse(input)?.to_frac()?;
        report.items.push(Item::new(input, "expression", vec![e.to_string()], "parsed"));
        format!("{e}\n")
    };
    Ok(Outcome { text, report })
}

fn exec(cli: &Cli) -> Exec {
    if cli.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    }
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Parse { input } => parse_cmd(input),
        Command::CheckSymmetry { system, generator } => check_symmetry(cli, system, generator),
        Command::Prolong { system, generator, order } => prolong_cmd(cli, system, generator, *order),
        Command::Determine { system } => determine(cli, system.as_deref()),
        Command::MatchPaper { system, reference } => match_paper(cli, system.as_deref(), reference.as_deref()),
        Command::Commutator { system, generator } => commutator_cmd(cli, system.as_deref(), generator),
        Command::Closure { system, generator } => closure_cmd(cli, system.as_deref(), generator),
        Command::Reduce { system } => reduce_cmd(cli, system),
        Command::Classify { casebook, only } => classify_cmd(cli, casebook, only.as_deref()),
    }
}

/// Runs one invocation; `args` includes the program name.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(o) => {
            let body = if cli.json { o.report.json_string() } else { o.text };
            let _ = out.write_all(body.as_bytes());
            if o.report.passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.to_string().replace('\n', " "));
            2
        }
    }
}
