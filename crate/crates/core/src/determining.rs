//! Determining equations of point symmetries by splitting on derivative
//! monomials, comparison with a reference list, and specialisation by the
//! solved ansatz.

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::expr::{Atom, AtomKind, Frac, Monomial, Subst, Q};
use crate::jet::{split_by_atoms, symmetry_residuals, Generator, OdeSystem};
use crate::linalg::{solve, Vector};
use crate::par::Exec;

/// One determining equation: the coefficient of a jet monomial in one
/// symmetry residual.
#[derive(Clone, Debug, PartialEq)]
pub struct DetEquation {
    /// 0-based index of the residual (equation of the system).
    pub residual: usize,
    /// Exponents of the jets in `DeterminingSystem::jets`.
    pub exps: Vec<u32>,
    pub expr: Frac,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeterminingSystem {
    pub jets: Vec<Atom>,
    pub equations: Vec<DetEquation>,
}

impl DetEquation {
    pub fn degree(&self) -> u32 {
        self.exps.iter().sum()
    }
}

/// `y'^2 z'`; `1` for the empty product.
pub fn monomial_label(jets: &[Atom], exps: &[u32]) -> String {
    let parts: Vec<String> = jets
        .iter()
        .zip(exps)
        .filter(|(_, k)| **k > 0)
        .map(|(a, k)| {
            let j = format!("{}{}", a.name(), "'".repeat(a.jet_order().unwrap_or(0) as usize));
            if *k == 1 {
                j
            } else {
                format!("{j}^{k}")
            }
        })
        .collect();
    if parts.is_empty() {
        "1".into()
    } else {
        parts.join(" ")
    }
}

impl DeterminingSystem {
    pub fn label(&self, eq: &DetEquation) -> String {
        format!("coeff[{}][eq_{}]", monomial_label(&self.jets, &eq.exps), eq.residual + 1)
    }

    pub fn len(&self) -> usize {
        self.equations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equations.is_empty()
    }

    /// Every equation with `alpha`, `beta` or other names bound.
    pub fn substitute(&self, s: &Subst) -> Result<DeterminingSystem> {
        let equations = self
            .equations
            .iter()
            .map(|e| Ok(DetEquation { expr: s.apply(&e.expr)?, ..e.clone() }))
            .collect::<Result<Vec<_>>>()?;
        Ok(DeterminingSystem { jets: self.jets.clone(), equations })
    }

    /// Whether the coefficients of `g` annihilate every equation.
    pub fn satisfied_by(&self, g: &Generator) -> Result<Vec<Frac>> {
        let s = ansatz_binding(g);
        self.equations.iter().map(|e| Ok(s.apply(&e.expr)?)).collect()
    }
}

/// Sign-normalised compact print: the leading printed term is positive.
pub fn print_equation(e: &Frac) -> String {
    let text = e.compact();
    if text.starts_with('-') {
        e.neg().compact()
    } else {
        text
    }
}

/// Unknown names: `xi`, then `eta1, eta2, ...`.
pub fn unknown_names(sys: &OdeSystem) -> Vec<String> {
    let mut out = vec!["xi".to_string()];
    out.extend((1..=sys.deps().len()).map(|i| format!("eta{i}")));
    out
}

/// The generator with unknown coefficient functions of all base variables.
pub fn unknown_ansatz(sys: &OdeSystem) -> Generator {
    let mut args = vec![sys.indep().to_string()];
    args.extend(sys.deps().iter().cloned());
    let funcs: Vec<Frac> = unknown_names(sys).iter().map(|n| Frac::atom(Atom::func(n.clone(), args.clone()))).collect();
    Generator::new("ansatz", sys.indep(), sys.deps(), funcs[0].clone(), funcs[1..].to_vec())
        .expect("ansatz is jet free")
}

fn ansatz_binding(g: &Generator) -> Subst {
    let mut s = Subst::new().bind("xi", g.xi().clone());
    for (i, e) in g.etas().iter().enumerate() {
        s = s.bind(&format!("eta{}", i + 1), e.clone());
    }
    s
}

/// Splits the on-shell residuals of `ansatz` by monomials in the jets of
/// order `1..n-1`, one equation per nonzero coefficient.
pub fn determining_system(sys: &OdeSystem, ansatz: &Generator) -> Result<DeterminingSystem> {
    determining_system_with(sys, ansatz, Exec::default())
}

pub fn determining_system_with(sys: &OdeSystem, ansatz: &Generator, exec: Exec) -> Result<DeterminingSystem> {
    let jets: Vec<Atom> =
        sys.deps().iter().flat_map(|d| (1..sys.order()).map(move |k| Atom::jet(d.clone(), k))).collect();
    let residuals = symmetry_residuals(ansatz, sys)?;
    let split = exec.map(&residuals, |r| split_by_atoms(r, &jets));
    let mut equations = Vec::new();
    for (i, parts) in split.into_iter().enumerate() {
        let parts = parts.map_err(|e| Error::invalid(format!("residual {} cannot be split: {e}", i + 1)))?;
        for (exps, expr) in parts {
            equations.push(DetEquation { residual: i, exps, expr });
        }
    }
    // Graded order on monomials: higher degree first, then y before z.
    equations.sort_by(|a, b| {
        b.degree().cmp(&a.degree()).then_with(|| b.exps.cmp(&a.exps)).then_with(|| a.residual.cmp(&b.residual))
    });
    Ok(DeterminingSystem { jets, equations })
}

// ---------------------------------------------------------------------------
// Comparison with a reference list

/// Largest numerator and denominator allowed in a combination.
pub const MAX_COEFF: i64 = 4;
/// Most generated equations combined into one reference equation.
pub const MAX_TERMS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub enum MatchKind {
    /// `reference = sum c_i * generated_i`.
    Exact(Vec<(usize, Q)>),
    /// Matches after changing one printed coefficient.
    Erratum { combination: Vec<(usize, Q)>, term: String, printed: Q, corrected: Q },
    /// No match; the closest single generated equation and how many terms
    /// differ from the best multiple of it.
    Unmatched { nearest: Option<(usize, Q, usize)> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchResult {
    pub label: String,
    pub equation: Frac,
    pub kind: MatchKind,
}

fn vectorize(e: &Frac) -> Option<Vector<Monomial>> {
    if e.has_denominator() {
        return None;
    }
    Some(e.num().terms().map(|(m, c)| (m.clone(), Frac::constant(c.clone()))).collect())
}

fn small(q: &Q) -> bool {
    let bound = num_bigint::BigInt::from(MAX_COEFF);
    q.numer().abs() <= bound && *q.denom() <= bound
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Rational coefficients expressing `target` through `cols`, all nonzero and
/// within bounds.
fn combination(cols: &[&Vector<Monomial>], target: &Vector<Monomial>) -> Option<Vec<Q>> {
    let c = solve(cols, target)?;
    let qs: Vec<Q> = c.iter().map(|f| f.as_constant()).collect::<Option<_>>()?;
    if qs.iter().all(|q| !q.is_zero() && small(q)) {
        Some(qs)
    } else {
        None
    }
}

fn search(
    gen: &[Vector<Monomial>],
    target: &Vector<Monomial>,
    extra: Option<&Vector<Monomial>>,
) -> Option<(Vec<usize>, Vec<Q>)> {
    // Only equations sharing a term with the target can contribute usefully.
    let cand: Vec<usize> = (0..gen.len()).filter(|&i| gen[i].keys().any(|k| target.contains_key(k))).collect();
    for k in 1..=MAX_TERMS {
        for sub in subsets(cand.len(), k) {
            let idx: Vec<usize> = sub.iter().map(|&i| cand[i]).collect();
            let mut cols: Vec<&Vector<Monomial>> = idx.iter().map(|&i| &gen[i]).collect();
            if let Some(e) = extra {
                cols.push(e);
            }
            if let Some(qs) = combination(&cols, target) {
                return Some((idx, qs));
            }
        }
    }
    None
}

/// Closest generated equation: the multiple of it that agrees with
/// `target` on the most terms.
fn nearest(gen: &[Vector<Monomial>], target: &Vector<Monomial>) -> Option<(usize, Q, usize)> {
    let mut best: Option<(usize, Q, usize)> = None;
    for (i, g) in gen.iter().enumerate() {
        for (k, tv) in target {
            let Some(gv) = g.get(k) else { continue };
            let c = tv.as_constant()? / gv.as_constant()?;
            let scaled: Vector<Monomial> = g.iter().map(|(m, v)| (m.clone(), v.scale(&c))).collect();
            let keys: std::collections::BTreeSet<&Monomial> = scaled.keys().chain(target.keys()).collect();
            let diff = keys.iter().filter(|m| scaled.get(**m) != target.get(**m)).count();
            if best.as_ref().is_none_or(|b| diff < b.2) {
                best = Some((i, c, diff));
            }
        }
    }
    best
}

/// Compares each labelled reference equation with the generated system.
pub fn match_reference(generated: &DeterminingSystem, reference: &[(String, Frac)]) -> Vec<MatchResult> {
    match_reference_with(generated, reference, Exec::default())
}

pub fn match_reference_with(
    generated: &DeterminingSystem,
    reference: &[(String, Frac)],
    exec: Exec,
) -> Vec<MatchResult> {
    let gen: Vec<Vector<Monomial>> =
        generated.equations.iter().map(|e| vectorize(&e.expr).unwrap_or_default()).collect();
    exec.map(reference, |(label, eq)| {
        let kind = match vectorize(eq) {
            None => MatchKind::Unmatched { nearest: None },
            Some(t) => match search(&gen, &t, None) {
                Some((idx, qs)) => MatchKind::Exact(idx.into_iter().zip(qs).collect()),
                None => erratum(&gen, &t).unwrap_or_else(|| MatchKind::Unmatched { nearest: nearest(&gen, &t) }),
            },
        };
        MatchResult { label: label.clone(), equation: eq.clone(), kind }
    })
}

/// Tries changing the coefficient of one term (never to zero).
fn erratum(gen: &[Vector<Monomial>], target: &Vector<Monomial>) -> Option<MatchKind> {
    for (m, printed) in target {
        let printed = printed.as_constant()?;
        // target + mu*m = sum c_i g_i, i.e. sum c_i g_i - mu*m = target.
        let col: Vector<Monomial> = [(m.clone(), Frac::integer(-1))].into_iter().collect();
        let Some((idx, qs)) = search(gen, target, Some(&col)) else { continue };
        let mu = qs.last().unwrap().clone();
        let corrected = &printed + &mu;
        if corrected.is_zero() {
            continue;
        }
        let term = Frac::from_poly(crate::expr::Poly::term(m.clone(), Q::one())).compact();
        let combination = idx.into_iter().zip(qs[..qs.len() - 1].iter().cloned()).collect();
        return Some(MatchKind::Erratum { combination, term, printed, corrected });
    }
    None
}

/// Readable form of `c1*G1 + c2*G2`.
pub fn describe_combination(generated: &DeterminingSystem, combo: &[(usize, Q)]) -> String {
    combo
        .iter()
        .map(|(i, q)| {
            let l = generated.label(&generated.equations[*i]);
            if q.is_one() {
                l
            } else if (-q).is_one() {
                format!("-{l}")
            } else {
                format!("{q}*{l}")
            }
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

// ---------------------------------------------------------------------------
// Solved ansatz

/// `xi = y*a1 + z*a2 + a3`, `eta1 = z^2/2*a2 + z*a4 + a5`,
/// `eta2 = z^2/2*a2_x + z*a4_x + a5_x + a6` with `a1, a2, a3` in `x`,
/// `a4, a5` in `(x, y)` and `a6` in `(y, z)`.
pub fn solved_ansatz() -> Subst {
    let f = |n: &str, args: &[&str]| Frac::func(n, args);
    let (y, z) = (Frac::var("y"), Frac::var("z"));
    let half_z2 = z.mul(&z).scale(&Q::new(1.into(), 2.into()));
    let (a1, a2, a3) = (f("a1", &["x"]), f("a2", &["x"]), f("a3", &["x"]));
    let (a4, a5, a6) = (f("a4", &["x", "y"]), f("a5", &["x", "y"]), f("a6", &["y", "z"]));
    let xi = y.mul(&a1).add(&z.mul(&a2)).add(&a3);
    let eta1 = half_z2.mul(&a2).add(&z.mul(&a4)).add(&a5);
    let eta2 = half_z2.mul(&a2.diff_var("x")).add(&z.mul(&a4.diff_var("x"))).add(&a5.diff_var("x")).add(&a6);
    Subst::new().bind("xi", xi).bind("eta1", eta1).bind("eta2", eta2)
}

/// An equation of a specialised system with the extra split applied.
#[derive(Clone, Debug, PartialEq)]
pub struct SpecializedEquation {
    /// Label of the determining equation it came from.
    pub source: String,
    /// `(variable, power)` of the re-split; empty when not split.
    pub split: Vec<(String, u32)>,
    pub expr: Frac,
}

impl SpecializedEquation {
    pub fn label(&self) -> String {
        let parts: Vec<String> = self
            .split
            .iter()
            .filter(|(_, k)| *k > 0)
            .map(|(v, k)| if *k == 1 { v.clone() } else { format!("{v}^{k}") })
            .collect();
        if self.split.is_empty() {
            self.source.clone()
        } else if parts.is_empty() {
            format!("{}[1]", self.source)
        } else {
            format!("{}[{}]", self.source, parts.join(" "))
        }
    }
}

/// Variables of `vars` that no unknown function in `e` depends on; only
/// those can be split on soundly.
fn splittable(e: &Frac, vars: &[&str]) -> Vec<String> {
    vars.iter()
        .filter(|v| !e.any_atom(&|a| matches!(a.kind(), AtomKind::Func { args, .. } if args.iter().any(|x| x == **v))))
        .map(|v| v.to_string())
        .collect()
}

fn resplit(source: String, e: &Frac, vars: &[&str]) -> Result<Vec<SpecializedEquation>> {
    if e.is_zero() {
        return Ok(Vec::new());
    }
    let names = splittable(e, vars);
    let present: Vec<String> = names.into_iter().filter(|v| e.depends_on_var(v)).collect();
    if present.is_empty() {
        return Ok(vec![SpecializedEquation { source, split: Vec::new(), expr: e.clone() }]);
    }
    let atoms: Vec<Atom> = present.iter().map(|v| Atom::var(v.clone())).collect();
    let parts = match split_by_atoms(e, &atoms) {
        Ok(p) => p,
        Err(_) => return Ok(vec![SpecializedEquation { source, split: Vec::new(), expr: e.clone() }]),
    };
    Ok(parts
        .into_iter()
        .map(|(exps, expr)| SpecializedEquation {
            source: source.clone(),
            split: present.iter().cloned().zip(exps).collect(),
            expr,
        })
        .collect())
}

/// Substitutes the solved ansatz, drops equations that vanish and splits
/// the rest on `y` and `z` wherever no unknown function depends on them.
pub fn apply_solved_ansatz(generated: &DeterminingSystem) -> Result<Vec<SpecializedEquation>> {
    let s = solved_ansatz();
    let mut out = Vec::new();
    for eq in &generated.equations {
        let e = s.apply(&eq.expr)?;
        out.extend(resplit(generated.label(eq), &e, &["y", "z"])?);
    }
    Ok(out)
}

/// Specialises `alpha(x)`, `beta(x)` and splits again on `y` and `z`.
pub fn reduce_to_x_odes(
    specialized: &[SpecializedEquation],
    alpha: &Frac,
    beta: &Frac,
) -> Result<Vec<SpecializedEquation>> {
    let s = Subst::new().bind("alpha", alpha.clone()).bind("beta", beta.clone());
    let mut out: Vec<SpecializedEquation> = Vec::new();
    for eq in specialized {
        let e = s.apply(&eq.expr)?;
        for mut r in resplit(eq.label(), &e, &["y", "z"])? {
            r.source = eq.source.clone();
            let mut split = eq.split.clone();
            split.extend(r.split);
            r.split = split;
            // Drop rational multiples of constraints already listed.
            if !out.iter().any(|o| proportional(&o.expr, &r.expr)) {
                out.push(r);
            }
        }
    }
    Ok(out)
}

fn proportional(a: &Frac, b: &Frac) -> bool {
    let Some((m, c)) = a.num().terms().next() else { return b.is_zero() };
    let d = b.num().coefficient(m);
    if d.is_zero() {
        return false;
    }
    let k = Frac::constant(d / c);
    b.sub(&a.mul(&k)).is_zero()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_with, Symbols};

    fn syms() -> Symbols {
        Symbols::default()
            .with_function("xi", &["x", "y", "z"])
            .with_function("eta1", &["x", "y", "z"])
            .with_function("eta2", &["x", "y", "z"])
            .with_function("alpha", &["x"])
            .with_function("beta", &["x"])
    }

    fn f(s: &str) -> Frac {
        parse_with(s, &syms()).unwrap().to_frac().unwrap()
    }

    fn reduced(alpha: &str, beta: &str) -> OdeSystem {
        let rhs = f(&format!("({alpha})*y' + ({beta})*z'"));
        OdeSystem::new("x", &["y", "z"], 2, vec![f("z'"), rhs]).unwrap()
    }

    fn generic() -> DeterminingSystem {
        let sys = reduced("alpha", "beta");
        determining_system(&sys, &unknown_ansatz(&sys)).unwrap()
    }

    fn find<'a>(d: &'a DeterminingSystem, residual: usize, exps: &[u32]) -> &'a DetEquation {
        d.equations.iter().find(|e| e.residual == residual && e.exps == exps).unwrap()
    }

    #[test]
    fn top_and_bottom_coefficients() {
        let d = generic();
        assert_eq!(find(&d, 0, &[3, 0]).expr, f("-xi_{,yy}"));
        assert_eq!(find(&d, 0, &[0, 0]).expr, f("eta1_{,xx} - eta2_{,x}"));
        assert_eq!(print_equation(&find(&d, 0, &[3, 0]).expr), "xi_{,yy}");
        assert_eq!(d.label(find(&d, 1, &[1, 2])), "coeff[y' z'^2][eq_2]");
    }

    #[test]
    fn one_equation_per_nonzero_monomial() {
        let d = generic();
        assert_eq!(d.len(), 18);
        assert!(d.equations.iter().all(|e| !e.expr.is_zero() && !e.expr.has_jets()));
    }

    #[test]
    fn reference_equations_match() {
        let d = generic();
        let refs = vec![
            ("A".to_string(), f("xi_{,yy}")),
            ("B".to_string(), f("eta2_{,xx} - alpha*eta1_{,x} - beta*eta2_{,x}")),
            ("C".to_string(), f("xi_{,yy} + 1")),
            ("D".to_string(), f("2*eta2_{,zz} - 2*xi_{,xz} - xi_{,y} - 2*beta*xi_{,z}")),
        ];
        let m = match_reference(&d, &refs);
        assert!(matches!(m[0].kind, MatchKind::Exact(ref c) if c.len() == 1));
        assert!(matches!(m[1].kind, MatchKind::Exact(_)));
        assert!(matches!(m[2].kind, MatchKind::Unmatched { nearest: Some(_) }));
        match &m[3].kind {
            MatchKind::Erratum { printed, corrected, term, .. } => {
                assert_eq!((printed.clone(), corrected.clone()), (Q::from_integer(2.into()), Q::one()));
                assert_eq!(term, "eta2_{,zz}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ansatz_solves_its_subsystem() {
        let s = solved_ansatz();
        for e in ["xi_{,yy}", "xi_{,yz}", "xi_{,zz}", "eta1_{,zz} - xi_{,z}", "eta1_{,xx} - eta2_{,x}"] {
            assert!(s.apply(&f(e)).unwrap().is_zero(), "{e}");
        }
    }

    #[test]
    fn dilation_annihilates_specialized_system() {
        let spec = apply_solved_ansatz(&generic()).unwrap();
        let y1 = Subst::new()
            .bind("a1", Frac::zero())
            .bind("a2", Frac::zero())
            .bind("a3", Frac::zero())
            .bind("a4", Frac::zero())
            .bind("a5", f("c*y"))
            .bind("a6", f("c*z"));
        for e in &spec {
            assert!(y1.apply(&e.expr).unwrap().is_zero(), "{}", e.label());
        }
    }

    #[test]
    fn constant_coefficients_give_the_characteristic_polynomial() {
        let spec = apply_solved_ansatz(&generic()).unwrap();
        let a0 = Frac::var("alpha0");
        let odes = reduce_to_x_odes(&spec, &a0, &a0).unwrap();
        let target = Frac::func("a5", &["x", "y"]);
        let want = target
            .diff_var("x")
            .diff_var("x")
            .diff_var("x")
            .sub(&a0.mul(&target.diff_var("x").diff_var("x")))
            .sub(&a0.mul(&target.diff_var("x")));
        assert!(
            odes.iter().any(|o| proportional(&o.expr, &want)),
            "{:#?}",
            odes.iter().map(|o| o.expr.to_string()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn truncated_ansatz_constrains_a3() {
        let spec = apply_solved_ansatz(&generic()).unwrap();
        let only_a3 = Subst::new()
            .bind("a1", Frac::zero())
            .bind("a2", Frac::zero())
            .bind("a4", Frac::zero())
            .bind("a5", Frac::zero())
            .bind("a6", Frac::zero());
        let spec: Vec<SpecializedEquation> = spec
            .iter()
            .map(|e| SpecializedEquation { expr: only_a3.apply(&e.expr).unwrap(), ..e.clone() })
            .filter(|e| !e.expr.is_zero())
            .collect();
        let odes = reduce_to_x_odes(&spec, &Frac::zero(), &Frac::zero()).unwrap();
        let a3 = Frac::func("a3", &["x"]);
        let first = a3.diff_var("x");
        let second = first.diff_var("x");
        // y' and z' coefficients of the first residual: a3 is affine, then
        // constant.
        assert_eq!(odes.len(), 2);
        assert!(proportional(&odes[0].expr, &second));
        assert!(proportional(&odes[1].expr, &first));
    }
}
