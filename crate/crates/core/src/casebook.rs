//! The reference cases: listed generators and claimed dimensions for each
//! specialisation of `y'' = z'`, `z'' = alpha*y' + beta*z'`, and their
//! verification.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::OnceLock;

use crate::determining::{apply_solved_ansatz, determining_system_with, unknown_ansatz, SpecializedEquation};
use crate::error::{Error, Result};
use crate::expr::{Frac, Subst, Symbols};
use crate::format::{parse_document, parse_document_with, Family};
use crate::jet::{symmetry_residuals, Generator, OdeSystem};
use crate::lie::{closure_check, independent_generators, vectorize_rows, Closure, LieAlgebraBasis};
use crate::linalg::solve;
use crate::par::Exec;

const BUILTIN: [(&str, &str); 10] = [
    ("I.1", include_str!("../casebook/I.1.case")),
    ("I.2", include_str!("../casebook/I.2.case")),
    ("I.3.1", include_str!("../casebook/I.3.1.case")),
    ("I.3.2", include_str!("../casebook/I.3.2.case")),
    ("II.1", include_str!("../casebook/II.1.case")),
    ("II.2.1", include_str!("../casebook/II.2.1.case")),
    ("II.2.2", include_str!("../casebook/II.2.2.case")),
    ("II.3", include_str!("../casebook/II.3.case")),
    ("II.4.1", include_str!("../casebook/II.4.1.case")),
    ("II.4.2", include_str!("../casebook/II.4.2.case")),
];

const REFERENCE: &str = include_str!("../casebook/reference.eqs");

pub type Params = BTreeMap<String, Frac>;

#[derive(Clone, Debug)]
pub struct CaseRecord {
    pub id: String,
    pub claimed: usize,
    pub complete: bool,
    pub same_as: Option<String>,
    pub families: Vec<Family>,
    pub generators: Vec<Generator>,
    pub instances: Vec<Params>,
    /// Parameter values for the closure check; empty means symbolic.
    pub closure: Params,
}

impl CaseRecord {
    pub fn system(&self, family: &Family) -> Result<OdeSystem> {
        family_system(family)
    }
}

/// `y'' = z'`, `z'' = alpha*y' + beta*z'`.
pub fn family_system(f: &Family) -> Result<OdeSystem> {
    let rhs = f.alpha.mul(&Frac::jet("y", 1)).add(&f.beta.mul(&Frac::jet("z", 1)));
    OdeSystem::new("x", &["y", "z"], 2, vec![Frac::jet("z", 1), rhs])
}

pub fn deps() -> Vec<String> {
    vec!["y".to_string(), "z".to_string()]
}

/// Parses one case file. Generators of a `same_as` case are filled in by
/// [`resolve`].
pub fn parse_case(text: &str) -> Result<CaseRecord> {
    let doc = parse_document(text)?;
    let Some(h) = doc.case else { return Err(Error::invalid("missing case block")) };
    if doc.families.is_empty() {
        return Err(Error::invalid(format!("case {}: no family", h.id)));
    }
    let generators = doc.generators.iter().map(|g| g.build("x", &deps())).collect::<Result<Vec<_>>>()?;
    if generators.len() > h.claimed {
        return Err(Error::invalid(format!(
            "case {}: {} generators listed, {} claimed",
            h.id,
            generators.len(),
            h.claimed
        )));
    }
    Ok(CaseRecord {
        id: h.id,
        claimed: h.claimed,
        complete: h.complete,
        same_as: h.same_as,
        families: doc.families,
        generators,
        instances: doc.instances,
        closure: doc.closure.unwrap_or_default(),
    })
}

/// Orders ids as `I.1 < I.2 < I.3.1 < II.1`.
fn id_key(id: &str) -> (usize, Vec<u32>) {
    let mut parts = id.split('.');
    let roman = parts.next().unwrap_or("");
    let r = match roman {
        "I" => 1,
        "II" => 2,
        "III" => 3,
        "IV" => 4,
        _ => 99,
    };
    (r, parts.map(|p| p.parse().unwrap_or(u32::MAX)).collect())
}

/// Sorts records and copies generators into `same_as` cases.
pub fn resolve(mut records: Vec<CaseRecord>) -> Result<Vec<CaseRecord>> {
    records.sort_by(|a, b| id_key(&a.id).cmp(&id_key(&b.id)).then(a.id.cmp(&b.id)));
    for i in 0..records.len() {
        let Some(target) = records[i].same_as.clone() else { continue };
        let Some(src) = records.iter().find(|r| r.id == target) else {
            return Err(Error::invalid(format!("case {}: unknown case {target}", records[i].id)));
        };
        if records[i].generators.is_empty() {
            let g = src.generators.clone();
            records[i].generators = g;
        }
    }
    Ok(records)
}

pub fn builtin_cases() -> Vec<CaseRecord> {
    let records = BUILTIN
        .iter()
        .map(|(id, text)| parse_case(text).unwrap_or_else(|e| panic!("builtin case {id}: {e}")))
        .collect();
    resolve(records).expect("builtin casebook resolves")
}

/// Text of a builtin case file.
pub fn builtin_source(id: &str) -> Option<&'static str> {
    BUILTIN.iter().find(|(i, _)| *i == id).map(|(_, t)| *t)
}

/// Every `*.case` file of a directory.
pub fn load_dir(dir: &Path) -> Result<Vec<CaseRecord>> {
    let mut records = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::invalid(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<_> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for p in paths.into_iter().filter(|p| p.extension().is_some_and(|x| x == "case")) {
        let text = std::fs::read_to_string(&p).map_err(|e| Error::invalid(format!("{}: {e}", p.display())))?;
        records.push(parse_case(&text).map_err(|e| Error::invalid(format!("{}: {e}", p.display())))?);
    }
    resolve(records)
}

/// The reference determining equations `R1..R15`.
pub fn reference_equations() -> Vec<(String, Frac)> {
    parse_reference(REFERENCE).expect("builtin reference equations parse")
}

pub fn parse_reference(text: &str) -> Result<Vec<(String, Frac)>> {
    let doc = parse_document_with(text, &Symbols::default())?;
    if doc.equations.is_empty() {
        return Err(Error::invalid("no equations block"));
    }
    Ok(doc.equations)
}

// ---------------------------------------------------------------------------
// Verification

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RepairKind {
    /// The term's sign flips.
    Sign,
    /// The term's coefficient changes by another factor.
    Coefficient,
}

/// One term of one component rescaled so that the residuals vanish.
#[derive(Clone, Debug)]
pub struct Repair {
    pub component: String,
    /// The whole component rather than one of its terms.
    pub whole: bool,
    pub printed_term: Frac,
    pub factor: Frac,
    pub kind: RepairKind,
    pub repaired: Generator,
}

impl Repair {
    pub fn describe(&self, name: &str) -> String {
        let kind = match self.kind {
            RepairKind::Sign => "sign",
            RepairKind::Coefficient => "coefficient",
        };
        if self.whole {
            return format!(
                "suggested erratum ({kind}): {name} {} scaled by {} as a whole",
                self.component, self.factor
            );
        }
        let fixed = self.printed_term.mul(&self.factor);
        format!("suggested erratum ({kind}): {name} {} term {} -> {}", self.component, self.printed_term, fixed)
    }
}

#[derive(Clone, Debug)]
pub enum Verdict {
    Symmetry,
    Repaired(Box<Repair>),
    Failed,
}

#[derive(Clone, Debug)]
pub struct GeneratorReport {
    pub name: String,
    /// Printed form, one residual pair per family.
    pub residuals: Vec<Frac>,
    pub verdict: Verdict,
}

impl GeneratorReport {
    pub fn verdict_label(&self) -> &'static str {
        match &self.verdict {
            Verdict::Symmetry => "symmetry",
            Verdict::Repaired(r) if r.kind == RepairKind::Sign => "sign-erratum",
            Verdict::Repaired(_) => "coefficient-erratum",
            Verdict::Failed => "not-a-symmetry",
        }
    }
}

#[derive(Clone, Debug)]
pub enum ClosureOutcome {
    Closed(LieAlgebraBasis),
    Open { pair: (String, String), bracket: Generator },
    Skipped(String),
}

#[derive(Clone, Debug)]
pub struct CaseReport {
    pub id: String,
    pub claimed: usize,
    pub complete: bool,
    pub families: Vec<Family>,
    pub generators: Vec<GeneratorReport>,
    /// Count of independent generators that verify, after repairs.
    pub lower_bound: usize,
    pub closure: ClosureOutcome,
    pub findings: Vec<String>,
    /// Constraints on the unknowns of the solved ansatz, per family, for
    /// incomplete listings.
    pub x_odes: Vec<(Family, Vec<SpecializedEquation>)>,
}

impl CaseReport {
    /// No generator fails outright, no coefficient repair, every instance
    /// holds and a complete listing closes.
    pub fn passed(&self) -> bool {
        let gens_ok = self.generators.iter().all(|g| match &g.verdict {
            Verdict::Symmetry => true,
            Verdict::Repaired(r) => r.kind == RepairKind::Sign,
            Verdict::Failed => false,
        });
        let closure_ok =
            matches!(self.closure, ClosureOutcome::Closed(_) | ClosureOutcome::Skipped(_)) || !self.complete;
        gens_ok && closure_ok && !self.findings.iter().any(|f| f.starts_with("instance"))
    }

    pub fn incomplete(&self) -> bool {
        !self.complete
    }

    pub fn errata(&self) -> Vec<(&str, &Repair)> {
        self.generators
            .iter()
            .filter_map(|g| match &g.verdict {
                Verdict::Repaired(r) => Some((g.name.as_str(), &**r)),
                _ => None,
            })
            .collect()
    }

    /// Generators in their verified form.
    pub fn verified(&self, rec: &CaseRecord) -> Vec<Generator> {
        rec.generators
            .iter()
            .zip(&self.generators)
            .filter_map(|(g, r)| match &r.verdict {
                Verdict::Symmetry => Some(g.clone()),
                Verdict::Repaired(rep) => Some(rep.repaired.clone()),
                Verdict::Failed => None,
            })
            .collect()
    }
}

pub fn family_label(f: &Family) -> String {
    format!("alpha = {}, beta = {}", f.alpha, f.beta)
}

fn params_label(p: &Params) -> String {
    let parts: Vec<String> = p.iter().map(|(k, v)| format!("{k} = {v}")).collect();
    parts.join(", ")
}

fn params_subst(p: &Params) -> Subst {
    p.iter().fold(Subst::new(), |s, (k, v)| s.bind(k, v.clone()))
}

fn residuals_on(g: &Generator, systems: &[OdeSystem]) -> Result<Vec<Frac>> {
    let mut out = Vec::new();
    for sys in systems {
        out.extend(symmetry_residuals(g, sys)?);
    }
    Ok(out)
}

/// Single-term repairs: `g + mu*t` with `t` one printed term of one
/// component or a whole component, `mu` free of the base variables. Sign
/// repairs come first.
pub fn repair_search(g: &Generator, systems: &[OdeSystem]) -> Result<Vec<Repair>> {
    let base = residuals_on(g, systems)?;
    let neg: Vec<Frac> = base.iter().map(|r| r.neg()).collect();
    let vars = vec!["x".to_string(), "y".to_string(), "z".to_string()];
    let mut found = Vec::new();
    for (idx, (label, comp)) in g.components().into_iter().enumerate() {
        // Each printed term, then the component as a whole.
        let mut candidates = comp.terms();
        if candidates.len() > 1 {
            candidates.push(comp.clone());
        }
        let n = candidates.len();
        for (k, t) in candidates.into_iter().enumerate() {
            let only = Generator::zero(&g.name, g.indep(), g.deps()).with_component(idx, t.clone());
            let rt = residuals_on(&only, systems)?;
            let rows = vec![rt.iter().collect::<Vec<_>>(), neg.iter().collect()];
            let Ok(vs) = vectorize_rows(&rows, &vars) else { continue };
            let Some(mu) = solve(&[&vs[0]], &vs[1]) else { continue };
            let factor = Frac::one().add(&mu[0]);
            let kind = if factor.add(&Frac::one()).is_zero() { RepairKind::Sign } else { RepairKind::Coefficient };
            let value = comp.add(&t.mul(&mu[0]));
            let repaired = g.with_component(idx, value);
            if residuals_on(&repaired, systems)?.iter().all(Frac::is_zero) {
                found.push(Repair {
                    component: label.clone(),
                    whole: n > 1 && k == n - 1,
                    printed_term: t.clone(),
                    factor,
                    kind,
                    repaired,
                });
            }
        }
    }
    found.sort_by_key(|r| r.kind != RepairKind::Sign);
    Ok(found)
}

/// Denominator factors free of the base variables, such as `beta0`.
fn assumed_nonzero(g: &Generator) -> BTreeSet<String> {
    let vars = ["x", "y", "z"];
    let mut out = BTreeSet::new();
    for (_, c) in g.components() {
        for (f, _) in c.den_factors() {
            let p = Frac::from_poly(f.clone());
            if !vars.iter().any(|v| p.depends_on_var(v)) && p.as_constant().is_none() {
                out.insert(p.to_string());
            }
        }
    }
    out
}

/// Determining equations after the solved ansatz, for symbolic
/// `alpha(x)`, `beta(x)`; computed once.
pub fn specialized_generic() -> Result<&'static [SpecializedEquation]> {
    static CELL: OnceLock<std::result::Result<Vec<SpecializedEquation>, String>> = OnceLock::new();
    let r = CELL.get_or_init(|| {
        let sys = generic_system();
        determining_system_with(&sys, &unknown_ansatz(&sys), Exec::default())
            .and_then(|d| apply_solved_ansatz(&d))
            .map_err(|e| e.to_string())
    });
    r.as_deref().map_err(|e| Error::invalid(e.clone()))
}

/// `y'' = z'`, `z'' = alpha(x)*y' + beta(x)*z'`.
pub fn generic_system() -> OdeSystem {
    let f = Family { alpha: Frac::func("alpha", &["x"]), beta: Frac::func("beta", &["x"]) };
    family_system(&f).expect("generic system is well formed")
}

pub fn verify_case(rec: &CaseRecord, exec: Exec) -> Result<CaseReport> {
    let systems = rec.families.iter().map(family_system).collect::<Result<Vec<_>>>()?;
    let mut findings = Vec::new();
    let generators = exec
        .map(&rec.generators, |g| -> Result<GeneratorReport> {
            let residuals = residuals_on(g, &systems)?;
            let verdict = if residuals.iter().all(Frac::is_zero) {
                Verdict::Symmetry
            } else {
                match repair_search(g, &systems)?.into_iter().next() {
                    Some(r) => Verdict::Repaired(Box::new(r)),
                    None => Verdict::Failed,
                }
            };
            Ok(GeneratorReport { name: g.name.clone(), residuals, verdict })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut report = CaseReport {
        id: rec.id.clone(),
        claimed: rec.claimed,
        complete: rec.complete,
        families: rec.families.clone(),
        generators,
        lower_bound: 0,
        closure: ClosureOutcome::Skipped("listing incomplete".into()),
        findings: Vec::new(),
        x_odes: Vec::new(),
    };
    for (name, r) in report.errata() {
        findings.push(r.describe(name));
    }
    for g in &report.generators {
        if matches!(g.verdict, Verdict::Failed) {
            findings.push(format!("{} is not a symmetry and no single-term repair exists", g.name));
        }
    }
    let verified = report.verified(rec);
    for g in &verified {
        for p in assumed_nonzero(g) {
            findings.push(format!("{} assumes {p} != 0", g.name));
        }
    }
    // Concrete instances of the verified forms.
    for inst in &rec.instances {
        let s = params_subst(inst);
        let inst_systems = systems.iter().map(|sys| sys.substitute(&s)).collect::<Result<Vec<_>>>()?;
        for g in &verified {
            let gi = g.substitute(&s)?;
            if !residuals_on(&gi, &inst_systems)?.iter().all(Frac::is_zero) {
                findings.push(format!("instance {}: {} is not a symmetry", params_label(inst), g.name));
            }
        }
    }
    report.lower_bound = independent_generators(&verified)?.len();
    if report.lower_bound < verified.len() {
        findings.push(format!("listed generators are dependent: rank {} of {}", report.lower_bound, verified.len()));
    }
    if rec.complete {
        report.closure = if verified.len() < rec.generators.len() {
            ClosureOutcome::Skipped("some generators failed".into())
        } else {
            let s = params_subst(&rec.closure);
            let basis = verified.iter().map(|g| g.substitute(&s)).collect::<Result<Vec<_>>>()?;
            match closure_check(&basis, exec)? {
                Closure::Closed(b) => ClosureOutcome::Closed(b),
                Closure::Open { pair, bracket } => {
                    let names = (basis[pair.0].name.clone(), basis[pair.1].name.clone());
                    findings.push(format!("[{},{}] leaves the span", names.0, names.1));
                    ClosureOutcome::Open { pair: names, bracket }
                }
            }
        };
    } else {
        findings.push(format!("incomplete listing: {} of {} claimed generators", rec.generators.len(), rec.claimed));
        let spec = specialized_generic()?;
        for f in &rec.families {
            let odes = crate::determining::reduce_to_x_odes(spec, &f.alpha, &f.beta)?;
            report.x_odes.push((f.clone(), odes));
        }
    }
    report.findings = findings;
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct Classification {
    pub cases: Vec<CaseReport>,
    pub dimension_set: BTreeSet<usize>,
}

impl Classification {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(CaseReport::passed)
    }

    /// Complete listings that close at the claimed dimension.
    pub fn machine_verified(&self) -> Vec<&str> {
        self.cases
            .iter()
            .filter(|c| {
                matches!(&c.closure, ClosureOutcome::Closed(b) if b.dimension() == c.claimed)
                    && c.lower_bound == c.claimed
            })
            .map(|c| c.id.as_str())
            .collect()
    }

    pub fn lower_bound_only(&self) -> Vec<&str> {
        let full = self.machine_verified();
        self.cases.iter().map(|c| c.id.as_str()).filter(|id| !full.contains(id)).collect()
    }
}

/// Verifies each case, cases in parallel, reports in case order.
pub fn classify(records: &[CaseRecord], exec: Exec) -> Result<Classification> {
    let cases = exec.map(records, |r| verify_case(r, exec)).into_iter().collect::<Result<Vec<_>>>()?;
    let dimension_set = cases.iter().map(|c| c.claimed).collect();
    Ok(Classification { cases, dimension_set })
}
