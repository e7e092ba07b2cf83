//! One line per acceptance criterion. Runs without the libtest harness so the
//! lines are always printed.
//!
//! Criteria listed in `KNOWN_FAILURES` are expected to fail on the shipped
//! casebook; the target fails if that set changes in either direction.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use contactsym::casebook::{
    builtin_cases, generic_system, reference_equations, verify_case, CaseRecord, CaseReport, ClosureOutcome,
    RepairKind, Verdict,
};
use contactsym::cli;
use contactsym::determining::{determining_system, match_reference, unknown_ansatz, MatchKind};
use contactsym::expr::{Atom, Frac, Subst};
use contactsym::jet::{prolong, second_extension_explicit, symmetry_residuals, ExplicitForm, Generator};
use contactsym::lie::{commutator, independent_generators};
use contactsym::par::Exec;
use contactsym::reduction::{contact_residual, TripleMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DETERMINE_LIMIT: Duration = Duration::from_secs(10);
const CASE_I1_LIMIT: Duration = Duration::from_secs(60);
const CASE_I2_LIMIT: Duration = Duration::from_secs(120);
const PROPERTY_LIMIT: Duration = Duration::from_secs(60);
const CROSS_VALIDATION_SAMPLES: usize = 25;
const JACOBI_SAMPLES: usize = 50;
const CONTACT_SAMPLES: usize = 10;

/// The printed X12 of the first case needs a coefficient change, which the
/// casebook criteria do not allow.
const KNOWN_FAILURES: [usize; 2] = [2, 6];

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn case(id: &str) -> CaseRecord {
    builtin_cases().into_iter().find(|c| c.id == id).unwrap()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn cli(args: &[&str]) -> (i32, String) {
    let argv = std::iter::once("contactsym").chain(args.iter().copied()).map(String::from);
    let mut out = Vec::new();
    let code = cli::run(argv, &mut out, &mut std::io::sink());
    (code, String::from_utf8(out).unwrap())
}

fn sign_only(r: &CaseReport) -> bool {
    r.generators.iter().all(|g| match &g.verdict {
        Verdict::Symmetry => true,
        Verdict::Repaired(rep) => rep.kind == RepairKind::Sign,
        Verdict::Failed => false,
    })
}

fn closed_dim(r: &CaseReport) -> Option<usize> {
    match &r.closure {
        ClosureOutcome::Closed(b) => Some(b.dimension()),
        _ => None,
    }
}

fn labels(r: &CaseReport) -> String {
    let bad: Vec<String> = r
        .generators
        .iter()
        .filter(|g| !matches!(g.verdict, Verdict::Symmetry))
        .map(|g| format!("{} {}", g.name, g.verdict_label()))
        .collect();
    if bad.is_empty() {
        "all printed forms verify".into()
    } else {
        bad.join(", ")
    }
}

fn determining_reproduction() -> Outcome {
    let (results, t) = timed(|| {
        let sys = generic_system();
        let det = determining_system(&sys, &unknown_ansatz(&sys)).unwrap();
        match_reference(&det, &reference_equations())
    });
    let exact = results.iter().filter(|r| matches!(r.kind, MatchKind::Exact(_))).count();
    let errata: Vec<&str> =
        results.iter().filter(|r| matches!(r.kind, MatchKind::Erratum { .. })).map(|r| r.label.as_str()).collect();
    let unmatched = results.len() - exact - errata.len();
    outcome(
        results.len() == 15 && unmatched == 0 && t < DETERMINE_LIMIT,
        format!("{exact} exact, {} erratum {errata:?}, {unmatched} unmatched, {t:.2?}", errata.len()),
    )
}

fn case_first() -> Outcome {
    let rec = case("I.1");
    let (r, t) = timed(|| verify_case(&rec, Exec::default()).unwrap());
    let brackets = match &r.closure {
        ClosureOutcome::Closed(b) => b.structure.keys().filter(|(i, j)| i < j).count(),
        _ => 0,
    };
    let pass = sign_only(&r) && brackets == 105 && r.lower_bound == 15 && t < CASE_I1_LIMIT;
    outcome(pass, format!("{}; {brackets} brackets in span; lower bound {}; {t:.2?}", labels(&r), r.lower_bound))
}

fn case_second() -> Outcome {
    let rec = case("I.2");
    let (r, t) = timed(|| verify_case(&rec, Exec::default()).unwrap());
    let symbolic = r.generators.len() == 15;
    let pass = symbolic && sign_only(&r) && closed_dim(&r) == Some(15) && t < CASE_I2_LIMIT;
    outcome(pass, format!("{}; closure at alpha0 = 1: {:?}; {t:.2?}", labels(&r), closed_dim(&r)))
}

fn seven_dimensional_cases() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (id, listed, closes) in [("II.1", 7, true), ("II.2.1", 7, true), ("II.2.2", 4, false)] {
        let r = verify_case(&case(id), Exec::default()).unwrap();
        let ok_gens =
            r.generators.len() == listed && r.generators.iter().all(|g| matches!(g.verdict, Verdict::Symmetry));
        let ok = if closes {
            ok_gens && closed_dim(&r) == Some(7)
        } else {
            ok_gens && r.lower_bound == 4 && r.claimed == 7 && !r.x_odes.is_empty()
        };
        pass &= ok;
        parts.push(format!("{id} {}/{} verified, lower bound {}", listed, r.claimed, r.lower_bound));
    }
    outcome(pass, parts.join("; "))
}

fn incomplete_cases() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (id, claimed) in [("I.3.1", 5), ("I.3.2", 6), ("II.3", 5), ("II.4.1", 6), ("II.4.2", 6)] {
        let rec = case(id);
        let r = verify_case(&rec, Exec::default()).unwrap();
        let mut ok = r.claimed == claimed
            && r.generators.iter().all(|g| matches!(g.verdict, Verdict::Symmetry))
            && r.findings.iter().any(|f| f.starts_with("incomplete listing"))
            && !r.findings.iter().any(|f| f.starts_with("instance"));
        // Concrete exponents on top of the instances shipped with the case.
        if let Some(inst) = rec.instances.first().filter(|i| i.contains_key("m")) {
            for m in [1, 2] {
                let s = inst
                    .iter()
                    .fold(Subst::new(), |s, (k, v)| s.bind(k, if k == "m" { Frac::integer(m) } else { v.clone() }));
                for f in &rec.families {
                    let sys = rec.system(f).unwrap().substitute(&s).unwrap();
                    for g in &rec.generators {
                        let res = symmetry_residuals(&g.substitute(&s).unwrap(), &sys).unwrap();
                        ok &= res.iter().all(Frac::is_zero);
                    }
                }
            }
        }
        pass &= ok;
        parts.push(format!("{id} {}/{claimed}", r.generators.len()));
    }
    outcome(pass, format!("incomplete listings flagged: {}", parts.join(", ")))
}

fn classification() -> Outcome {
    let (code, out) = cli(&["--json", "classify", "--casebook", "builtin"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let set = v["dimension_set"].clone();
    let coefficient: Vec<&str> = v["findings"]
        .as_array()
        .unwrap()
        .iter()
        .filter_map(|f| f.as_str())
        .filter(|f| f.contains("suggested erratum (coefficient)"))
        .collect();
    outcome(
        set == serde_json::json!([5, 6, 7, 15]) && code == 0,
        format!("dimension set {set}, exit {code}, non-sign errata {coefficient:?}"),
    )
}

fn random_poly(rng: &mut ChaCha8Rng, vars: &[&str], deg: u32, terms: usize) -> Frac {
    let mut out = Frac::zero();
    for _ in 0..terms {
        let mut t = Frac::integer(rng.gen_range(-3..=3));
        for _ in 0..rng.gen_range(0..=deg) {
            t = t.mul(&Frac::var(vars[rng.gen_range(0..vars.len())]));
        }
        out = out.add(&t);
    }
    out
}

fn random_generator(rng: &mut ChaCha8Rng) -> Generator {
    let v = ["x", "y", "z"];
    let deps = vec!["y".to_string(), "z".to_string()];
    let xi = random_poly(rng, &v, 3, 4);
    let etas = vec![random_poly(rng, &v, 3, 4), random_poly(rng, &v, 3, 4)];
    Generator::new("G", "x", &deps, xi, etas).unwrap()
}

fn cross_validation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut agree = 0;
    let mut printed_disagrees = 0;
    for _ in 0..CROSS_VALIDATION_SAMPLES {
        let g = random_generator(&mut rng);
        let p = prolong(&g, 2);
        let (a, b) = second_extension_explicit(&g, ExplicitForm::Corrected).unwrap();
        if p.coefficient(0, 2).sub(&a).is_zero() && p.coefficient(1, 2).sub(&b).is_zero() {
            agree += 1;
        }
        let (_, r) = second_extension_explicit(&g, ExplicitForm::Reference).unwrap();
        if !p.coefficient(1, 2).sub(&r).is_zero() {
            printed_disagrees += 1;
        }
    }
    outcome(
        agree == CROSS_VALIDATION_SAMPLES,
        format!(
            "{agree}/{CROSS_VALIDATION_SAMPLES} agree with the corrected closed form; printed second coefficient differs on {printed_disagrees}"
        ),
    )
}

fn random_frac(rng: &mut ChaCha8Rng, depth: u32) -> Frac {
    if depth == 0 || rng.gen_bool(0.3) {
        return match rng.gen_range(0..6) {
            0 => Frac::integer(rng.gen_range(-4..=4)),
            1 => Frac::var("x"),
            2 => Frac::var("y"),
            3 => Frac::func("f", &["x", "y"]),
            4 => Frac::exp(&Frac::var("x")),
            _ => Frac::rational(rng.gen_range(-3..=3), rng.gen_range(1..=3)),
        };
    }
    let a = random_frac(rng, depth - 1);
    let b = random_frac(rng, depth - 1);
    match rng.gen_range(0..4) {
        0 => a.add(&b),
        1 => a.mul(&b),
        2 => a.div(&Frac::var("x").add(&Frac::integer(rng.gen_range(1..4)))).unwrap(),
        _ => a.sub(&b),
    }
}

fn complete_bases() -> Vec<Vec<Generator>> {
    builtin_cases()
        .into_iter()
        .filter(|r| r.complete)
        .map(|r| {
            let report = verify_case(&r, Exec::default()).unwrap();
            let s = r.closure.iter().fold(Subst::new(), |s, (k, v)| s.bind(k, v.clone()));
            report.verified(&r).iter().map(|g| g.substitute(&s).unwrap()).collect()
        })
        .collect()
}

fn property_suites() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut failures = Vec::new();
    let same = |a: &Frac, b: &Frac| a.sub(b).is_zero();
    let (x, y) = (Atom::var("x"), Atom::var("y"));
    for _ in 0..100 {
        let a = random_frac(&mut rng, 3);
        let b = random_frac(&mut rng, 3);
        let once = a.to_expr().normalize().unwrap();
        if once != once.normalize().unwrap() {
            failures.push("normalization idempotence");
        }
        if !same(&a.add(&b).diff(&x), &a.diff(&x).add(&b.diff(&x))) {
            failures.push("diff linearity");
        }
        if !same(&a.mul(&b).diff(&y), &a.diff(&y).mul(&b).add(&a.mul(&b.diff(&y)))) {
            failures.push("Leibniz");
        }
        if !same(&a.diff(&x).diff(&y), &a.diff(&y).diff(&x)) {
            failures.push("Clairaut");
        }
    }
    let bases = complete_bases();
    for basis in &bases {
        for a in basis {
            for b in basis {
                if !commutator(a, b).unwrap().add(&commutator(b, a).unwrap()).is_zero() {
                    failures.push("antisymmetry");
                }
            }
        }
        if independent_generators(basis).unwrap().len() != basis.len() {
            failures.push("independence");
        }
    }
    for _ in 0..JACOBI_SAMPLES {
        let basis = &bases[rng.gen_range(0..bases.len())];
        let mut pick = || &basis[rng.gen_range(0..basis.len())];
        let (a, b, c) = (pick(), pick(), pick());
        let j = commutator(a, &commutator(b, c).unwrap())
            .unwrap()
            .add(&commutator(b, &commutator(c, a).unwrap()).unwrap())
            .add(&commutator(c, &commutator(a, b).unwrap()).unwrap());
        if !j.is_zero() {
            failures.push("Jacobi");
        }
    }
    let z = Frac::var("z");
    for _ in 0..CONTACT_SAMPLES {
        let phi = Frac::var("x").add(&random_poly(&mut rng, &["x", "y"], 2, 3));
        let psi = random_poly(&mut rng, &["x", "y"], 3, 4);
        let den = phi.diff_var("x").add(&z.mul(&phi.diff_var("y")));
        let num = psi.diff_var("x").add(&z.mul(&psi.diff_var("y")));
        let omega = num.div(&den).unwrap();
        if !contact_residual(&TripleMap { phi, psi, omega }).is_zero() {
            failures.push("contact condition");
        }
    }
    let t = t.elapsed();
    let failures: BTreeSet<&str> = failures.into_iter().collect();
    outcome(failures.is_empty() && t < PROPERTY_LIMIT, format!("failures {failures:?}; {t:.2?}"))
}

fn negative_controls() -> Outcome {
    let dir = env!("CARGO_MANIFEST_DIR");
    let sys = format!("{dir}/tests/data/free.sys");
    let corrupt = format!("{dir}/tests/data/X13_corrupt.gen");
    let perturbed = format!("{dir}/tests/data/perturbed.eqs");
    let (c1, out1) = cli(&["check-symmetry", "--system", &sys, "--generator", &corrupt]);
    let (c2, out2) = cli(&["match-paper", "--reference", &perturbed]);
    let mut rec = case("I.1");
    let i = rec.generators.iter().position(|g| g.name == "X13").unwrap();
    let z = Frac::var("z");
    rec.generators[i] = rec.generators[i].with_component(2, z.mul(&z).mul(&Frac::integer(3)));
    let r = verify_case(&rec, Exec::default()).unwrap();
    let nonzero = r.generators[i].residuals.iter().any(|x| !x.is_zero());
    let pass =
        c1 == 1 && out1.contains("NOT A SYMMETRY") && c2 == 1 && out2.contains("unmatched") && nonzero && !r.passed();
    outcome(
        pass,
        format!("corrupted generator exit {c1}, perturbed equation exit {c2}, corrupted case passes: {}", r.passed()),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("determining-system reproduction", determining_reproduction),
        ("case I.1", case_first),
        ("case I.2", case_second),
        ("cases II.1, II.2.1, II.2.2", seven_dimensional_cases),
        ("incomplete cases", incomplete_cases),
        ("classification", classification),
        ("prolongation cross-validation", cross_validation),
        ("property suites", property_suites),
        ("negative controls", negative_controls),
    ];
    let mut failed = BTreeSet::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        let o = run();
        let expected = if KNOWN_FAILURES.contains(&n) { " (known)" } else { "" };
        println!(
            "criterion {n} {name}: {}{} - {}",
            if o.pass { "PASS" } else { "FAIL" },
            if o.pass { "" } else { expected },
            o.detail
        );
        if !o.pass {
            failed.insert(n);
        }
    }
    let known: BTreeSet<usize> = KNOWN_FAILURES.into_iter().collect();
    if failed != known {
        println!("failing criteria {failed:?} differ from the known set {known:?}");
        std::process::exit(1);
    }
}
