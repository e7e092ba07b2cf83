//! Reader and writer for system, generator and case files.
//!
//! ```text
//! # comment
//! exponent m
//! algebraic alpha1: alpha1^2 = alpha0*alpha1 + alpha0
//! function alpha(x)
//! system { indep: x  dep: y, z  eq: y'' = z'  eq: z'' = alpha(x)*y' }
//! generator X7 { xi: z  eta[y]: 1/2*z^2  eta[z]: 0 }
//! ```
//!
//! Case files add `case ID { claimed: N  complete: true }`, one or more
//! `family { alpha: ..  beta: .. }`, `instance { m: 1 }` and an optional
//! `closure { alpha0: 1 }` block. A scalar equation is an `ode` block with a
//! single dependent.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::sync::OnceLock;

use regex::Regex;

use crate::error::{Error, Result};
use crate::expr::{parse_with, Atom, Frac, Relation, Symbols};
use crate::jet::{split_by_atoms, Generator, OdeSystem};
use crate::reduction::ScalarOde;

#[derive(Clone, Debug)]
pub struct GeneratorSpec {
    pub name: String,
    pub line: usize,
    pub xi: Frac,
    /// Keyed by dependent name; missing dependents have coefficient 0.
    pub etas: BTreeMap<String, Frac>,
}

impl GeneratorSpec {
    pub fn build(&self, indep: &str, deps: &[String]) -> Result<Generator> {
        for d in self.etas.keys() {
            if !deps.contains(d) {
                return Err(Error::Format { line: self.line, msg: format!("{}: unknown dependent {d}", self.name) });
            }
        }
        let etas = deps.iter().map(|d| self.etas.get(d).cloned().unwrap_or_default()).collect();
        Generator::new(&self.name, indep, deps, self.xi.clone(), etas)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaseHeader {
    pub id: String,
    pub claimed: usize,
    pub complete: bool,
    pub same_as: Option<String>,
}

/// Specialisation of `alpha(x)` and `beta(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Family {
    pub alpha: Frac,
    pub beta: Frac,
}

#[derive(Clone, Debug, Default)]
pub struct Document {
    pub symbols: Symbols,
    pub system: Option<OdeSystem>,
    pub ode: Option<ScalarOde>,
    pub generators: Vec<GeneratorSpec>,
    pub case: Option<CaseHeader>,
    pub families: Vec<Family>,
    pub instances: Vec<BTreeMap<String, Frac>>,
    pub closure: Option<BTreeMap<String, Frac>>,
    /// Labelled equations `LABEL: LHS = RHS`, stored as `LHS - RHS`.
    pub equations: Vec<(String, Frac)>,
}

impl Document {
    /// All generators built on the variables of `sys`.
    pub fn generators_on(&self, sys: &OdeSystem) -> Result<Vec<Generator>> {
        self.generators.iter().map(|g| g.build(sys.indep(), sys.deps())).collect()
    }
}

fn key_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"([A-Za-z_][A-Za-z0-9_]*(?:\[[A-Za-z_][A-Za-z0-9_]*\])?)\s*:").unwrap())
}

struct Source<'a> {
    text: &'a str,
}

impl Source<'_> {
    fn line_of(&self, offset: usize) -> usize {
        self.text[..offset.min(self.text.len())].matches('\n').count() + 1
    }

    fn err<T>(&self, offset: usize, msg: impl Into<String>) -> Result<T> {
        Err(Error::Format { line: self.line_of(offset), msg: msg.into() })
    }
}

/// Blanks out comments, keeping offsets intact.
fn strip_comments(text: &str) -> String {
    text.lines()
        .map(|l| match l.find('#') {
            Some(i) => format!("{}{}", &l[..i], " ".repeat(l.len() - i)),
            None => l.to_string(),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn parse_document(text: &str) -> Result<Document> {
    parse_document_with(text, &Symbols::default())
}

/// Parses a file; `base` holds declarations made elsewhere (for instance in
/// the system file a generator file is checked against).
pub fn parse_document_with(text: &str, base: &Symbols) -> Result<Document> {
    let clean = strip_comments(text);
    let src = Source { text: &clean };
    let mut doc = Document { symbols: base.clone(), ..Document::default() };
    let bytes = clean.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
            i += 1;
        }
        let keyword = &clean[start..i];
        if keyword.is_empty() {
            return src.err(start, format!("unexpected '{}'", &clean[start..start + 1]));
        }
        if matches!(keyword, "exponent" | "algebraic" | "function") {
            let end = clean[i..].find('\n').map(|p| p + i).unwrap_or(clean.len());
            declaration(&mut doc, keyword, clean[i..end].trim(), &src, start)?;
            i = end;
            continue;
        }
        let Some(open) = clean[i..].find('{').map(|p| p + i) else {
            return src.err(start, format!("expected '{{' after {keyword}"));
        };
        let name = clean[i..open].trim().to_string();
        let Some(close) = matching_brace(&clean, open) else {
            return src.err(open, "unterminated block");
        };
        let fields = fields(&clean, open + 1, close);
        block(&mut doc, keyword, &name, &fields, &src, start)?;
        i = close + 1;
    }
    Ok(doc)
}

/// Offset of the `}` closing the `{` at `open`.
fn matching_brace(text: &str, open: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (i, b) in text.bytes().enumerate().skip(open) {
        match b {
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

/// `(key, value, offset)` triples of a block body.
fn fields(text: &str, from: usize, to: usize) -> Vec<(String, String, usize)> {
    let body = &text[from..to];
    let keys: Vec<_> = key_regex().captures_iter(body).collect();
    let mut out = Vec::new();
    for (k, c) in keys.iter().enumerate() {
        let whole = c.get(0).unwrap();
        let end = keys.get(k + 1).map(|n| n.get(0).unwrap().start()).unwrap_or(body.len());
        out.push((c[1].to_string(), body[whole.end()..end].trim().to_string(), from + whole.start()));
    }
    out
}

fn expr(src: &Source, doc: &Document, value: &str, offset: usize) -> Result<Frac> {
    let e = parse_with(value, &doc.symbols).and_then(|e| e.to_frac());
    e.map_err(|e| Error::Format { line: src.line_of(offset), msg: format!("{e} in '{value}'") })
}

fn declaration(doc: &mut Document, keyword: &str, rest: &str, src: &Source, at: usize) -> Result<()> {
    let ident = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    match keyword {
        "exponent" => {
            for name in rest.split(',').map(str::trim) {
                if !ident(name) {
                    return src.err(at, format!("bad exponent name '{name}'"));
                }
                doc.symbols.exponents.insert(name.to_string());
            }
        }
        "function" => {
            let (name, args) = match rest.split_once('(') {
                Some((n, a)) if a.ends_with(')') => (n.trim(), &a[..a.len() - 1]),
                _ => return src.err(at, "expected function NAME(ARGS)"),
            };
            let args: Vec<String> = args.split(',').map(|a| a.trim().to_string()).collect();
            if !ident(name) || !args.iter().all(|a| ident(a)) {
                return src.err(at, "expected function NAME(ARGS)");
            }
            doc.symbols.functions.insert(name.to_string(), args);
        }
        _ => {
            let Some((name, eq)) = rest.split_once(':') else {
                return src.err(at, "expected algebraic NAME: NAME^2 = P*NAME + Q");
            };
            let name = name.trim();
            let Some((lhs, rhs)) = eq.split_once('=') else {
                return src.err(at, "missing '=' in algebraic relation");
            };
            if lhs.replace(' ', "") != format!("{name}^2") {
                return src.err(at, format!("relation must define {name}^2"));
            }
            let rhs = expr(src, doc, rhs, at)?;
            let parts = split_by_atoms(&rhs, &[Atom::var(name)])?;
            let mut p = Frac::zero();
            let mut q = Frac::zero();
            for (k, c) in parts {
                match k[0] {
                    0 => q = c,
                    1 => p = c,
                    _ => return src.err(at, "relation must be linear in the constant"),
                }
            }
            if p.has_denominator() || q.has_denominator() {
                return src.err(at, "relation coefficients must be polynomial");
            }
            let relation = Relation { p: p.num().clone(), q: q.num().clone() };
            doc.symbols = std::mem::take(&mut doc.symbols).with_algebraic(name, relation);
        }
    }
    Ok(())
}

fn block(
    doc: &mut Document,
    keyword: &str,
    name: &str,
    fields: &[(String, String, usize)],
    src: &Source,
    at: usize,
) -> Result<()> {
    let named = matches!(keyword, "generator" | "case");
    if named && name.is_empty() {
        return src.err(at, format!("{keyword} block needs a name"));
    }
    if !named && !name.is_empty() {
        return src.err(at, format!("{keyword} block takes no name"));
    }
    match keyword {
        "system" | "ode" => {
            let mut indep = None;
            let mut deps: Vec<String> = Vec::new();
            let mut eqs = Vec::new();
            for (k, v, off) in fields {
                match k.as_str() {
                    "indep" => indep = Some(v.clone()),
                    "dep" => deps = v.split(',').map(|d| d.trim().to_string()).collect(),
                    "eq" => eqs.push((v.clone(), *off)),
                    _ => return src.err(*off, format!("unknown field {k} in {keyword}")),
                }
            }
            let Some(indep) = indep else { return src.err(at, "missing indep") };
            if deps.is_empty() {
                return src.err(at, "missing dep");
            }
            let mut order = None;
            let mut rhs: BTreeMap<String, Frac> = BTreeMap::new();
            for (eq, off) in eqs {
                let Some((lhs, r)) = eq.split_once('=') else { return src.err(off, "equation needs '='") };
                let lhs = lhs.trim();
                let dep = lhs.trim_end_matches('\'');
                let n = (lhs.len() - dep.len()) as u32;
                if !deps.iter().any(|d| d == dep) || n == 0 {
                    return src.err(off, format!("left-hand side {lhs} is not a derivative of a dependent"));
                }
                if *order.get_or_insert(n) != n {
                    return src.err(off, "all equations must have the same order");
                }
                if rhs.insert(dep.to_string(), expr(src, doc, r, off)?).is_some() {
                    return src.err(off, format!("two equations for {dep}"));
                }
            }
            let n = order.ok_or_else(|| Error::Format { line: src.line_of(at), msg: "no equations".into() })?;
            let rhs: Vec<Frac> = deps
                .iter()
                .map(|d| {
                    rhs.remove(d)
                        .ok_or_else(|| Error::Format { line: src.line_of(at), msg: format!("no equation for {d}") })
                })
                .collect::<Result<_>>()?;
            let dep_refs: Vec<&str> = deps.iter().map(|d| d.as_str()).collect();
            if keyword == "ode" {
                if deps.len() != 1 {
                    return src.err(at, "ode block takes a single dependent");
                }
                doc.ode = Some(ScalarOde::new(&indep, &deps[0], n, rhs[0].clone())?);
            } else {
                doc.system = Some(OdeSystem::new(&indep, &dep_refs, n, rhs)?);
            }
        }
        "generator" => {
            let mut g = GeneratorSpec {
                name: name.to_string(),
                line: src.line_of(at),
                xi: Frac::zero(),
                etas: BTreeMap::new(),
            };
            for (k, v, off) in fields {
                let value = expr(src, doc, v, *off)?;
                if k == "xi" {
                    g.xi = value;
                } else if let Some(dep) = k.strip_prefix("eta[").and_then(|r| r.strip_suffix(']')) {
                    g.etas.insert(dep.to_string(), value);
                } else {
                    return src.err(*off, format!("unknown field {k} in generator"));
                }
            }
            if doc.generators.iter().any(|h| h.name == g.name) {
                return src.err(at, format!("generator {name} defined twice"));
            }
            doc.generators.push(g);
        }
        "case" => {
            let mut h = CaseHeader { id: name.to_string(), claimed: 0, complete: false, same_as: None };
            for (k, v, off) in fields {
                match k.as_str() {
                    "claimed" => {
                        h.claimed = v.parse().map_err(|_| Error::Format {
                            line: src.line_of(*off),
                            msg: "claimed must be an integer".into(),
                        })?
                    }
                    "complete" => {
                        h.complete = match v.as_str() {
                            "true" => true,
                            "false" => false,
                            _ => return src.err(*off, "complete must be true or false"),
                        }
                    }
                    "same_as" => h.same_as = Some(v.clone()),
                    _ => return src.err(*off, format!("unknown field {k} in case")),
                }
            }
            doc.case = Some(h);
        }
        "family" => {
            let mut f = Family { alpha: Frac::zero(), beta: Frac::zero() };
            for (k, v, off) in fields {
                match k.as_str() {
                    "alpha" => f.alpha = expr(src, doc, v, *off)?,
                    "beta" => f.beta = expr(src, doc, v, *off)?,
                    _ => return src.err(*off, format!("unknown field {k} in family")),
                }
            }
            doc.families.push(f);
        }
        "equations" => {
            for (k, v, off) in fields {
                let Some((lhs, rhs)) = v.split_once('=') else {
                    return src.err(*off, format!("{k}: equation needs '='"));
                };
                let e = expr(src, doc, lhs, *off)?.sub(&expr(src, doc, rhs, *off)?);
                doc.equations.push((k.clone(), e));
            }
        }
        "instance" | "closure" => {
            let mut vals = BTreeMap::new();
            for (k, v, off) in fields {
                vals.insert(k.clone(), expr(src, doc, v, *off)?);
            }
            if keyword == "instance" {
                doc.instances.push(vals);
            } else {
                doc.closure = Some(vals);
            }
        }
        _ => return src.err(at, format!("unknown block {keyword}")),
    }
    Ok(())
}

/// Declarations needed to read back expressions that use `symbols`.
pub fn write_declarations(symbols: &Symbols) -> String {
    let mut out = String::new();
    for e in &symbols.exponents {
        writeln!(out, "exponent {e}").unwrap();
    }
    for (name, args) in &symbols.functions {
        writeln!(out, "function {name}({})", args.join(", ")).unwrap();
    }
    for (name, r) in &symbols.algebraic {
        let c = Frac::var(name);
        let rhs = Frac::from_poly(r.p.clone()).mul(&c).add(&Frac::from_poly(r.q.clone()));
        writeln!(out, "algebraic {name}: {name}^2 = {rhs}").unwrap();
    }
    out
}

pub fn write_system(sys: &OdeSystem) -> String {
    let mut out = format!("system {{\n  indep: {}\n  dep: {}\n", sys.indep(), sys.deps().join(", "));
    for (d, f) in sys.deps().iter().zip(sys.rhs()) {
        writeln!(out, "  eq: {}{} = {}", d, "'".repeat(sys.order() as usize), f).unwrap();
    }
    out.push_str("}\n");
    out
}

pub fn write_generator(g: &Generator) -> String {
    let mut out = format!("generator {} {{\n  xi: {}\n", g.name, g.xi());
    for (d, e) in g.deps().iter().zip(g.etas()) {
        writeln!(out, "  eta[{d}]: {e}").unwrap();
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::is_symmetry;

    const FREE: &str = "# free system\nsystem {\n  indep: x  dep: y, z\n  eq: y'' = z'   # first\n  eq: z'' = 0\n}\n\
        generator X7 { xi: z  eta[y]: 1/2*z^2  eta[z]: 0 }\ngenerator X2 { eta[y]: 1 }\n";

    #[test]
    fn reads_system_and_generators() {
        let doc = parse_document(FREE).unwrap();
        let sys = doc.system.clone().unwrap();
        assert_eq!(sys.order(), 2);
        let gens = doc.generators_on(&sys).unwrap();
        assert_eq!(gens.len(), 2);
        assert!(gens.iter().all(|g| is_symmetry(g, &sys).unwrap()));
        assert_eq!(doc.generators[1].line, 8);
    }

    #[test]
    fn declarations_feed_the_expression_parser() {
        let text = "exponent m\nfunction alpha(x)\nalgebraic alpha1: alpha1^2 = alpha0*alpha1 + alpha0\n\
            family { alpha: (x+c)^m  beta: alpha1 }\nsystem { indep: x dep: y, z eq: y'' = z' eq: z'' = alpha*y' }";
        let doc = parse_document(text).unwrap();
        assert!(doc.symbols.algebraic.contains_key("alpha1"));
        let b = &doc.families[0].beta;
        assert!(b.mul(b).sub(&Frac::var("alpha0").mul(b)).sub(&Frac::var("alpha0")).is_zero());
        let decl = write_declarations(&doc.symbols);
        let again = parse_document(&decl).unwrap();
        assert_eq!(again.symbols.algebraic, doc.symbols.algebraic);
        assert_eq!(again.symbols.functions, doc.symbols.functions);
    }

    #[test]
    fn round_trips_through_the_writer() {
        let doc = parse_document(FREE).unwrap();
        let sys = doc.system.clone().unwrap();
        let gens = doc.generators_on(&sys).unwrap();
        let mut text = write_system(&sys);
        for g in &gens {
            text.push_str(&write_generator(g));
        }
        let again = parse_document(&text).unwrap();
        assert_eq!(again.system.as_ref(), Some(&sys));
        assert_eq!(again.generators_on(&sys).unwrap(), gens);
    }

    #[test]
    fn errors_name_the_line() {
        let bad = "system { indep: x dep: y, z eq: y'' = z'\n eq: z'' = 1 + }";
        match parse_document(bad) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_document("generator { xi: 1 }").is_err());
        assert!(parse_document("widget W { xi: 1 }").is_err());
        assert!(parse_document("system { indep: x dep: y eq: y'' = y''' }").is_err());
    }

    #[test]
    fn case_headers() {
        let doc =
            parse_document("case II.4.2 { claimed: 6 complete: false same_as: II.4.1 }\ninstance { m: 1 }").unwrap();
        let h = doc.case.unwrap();
        assert_eq!((h.id.as_str(), h.claimed, h.complete), ("II.4.2", 6, false));
        assert_eq!(h.same_as.as_deref(), Some("II.4.1"));
        assert_eq!(doc.instances[0]["m"], Frac::integer(1));
    }

    #[test]
    fn equation_lists() {
        let doc =
            parse_document("function xi(x,y,z)\nequations {\n R1: xi_{,yy} = 0\n R2: xi_{,x} = xi_{,y}\n}").unwrap();
        assert_eq!(doc.equations.len(), 2);
        assert_eq!(doc.equations[1].0, "R2");
        assert!(doc.equations[1]
            .1
            .sub(&parse_document("function xi(x,y,z)\nequations { R: xi_{,x} - xi_{,y} = 0 }").unwrap().equations[0].1)
            .is_zero());
    }
}
