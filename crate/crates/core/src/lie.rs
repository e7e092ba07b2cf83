//! Commutators, span membership and closure of finite generator sets.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::expr::{Atom, AtomKind, Frac, Monomial, Poly};
use crate::jet::Generator;
use crate::linalg::{independent_subset, solve, Vector};
use crate::par::Exec;

/// `[a, b]` with components `X_a(b_c) - X_b(a_c)`.
pub fn commutator(a: &Generator, b: &Generator) -> Result<Generator> {
    if !a.same_space(b) {
        return Err(Error::invalid(format!("{} and {} act on different variables", a.name, b.name)));
    }
    let name = format!("[{},{}]", a.name, b.name);
    let n = a.deps().len() + 1;
    let mut out = Generator::zero(&name, a.indep(), a.deps());
    for c in 0..n {
        out = out.with_component(c, a.apply(b.component(c)).sub(&b.apply(a.component(c))));
    }
    Ok(out)
}

/// Key of one linear equation: component index and the part of a term that
/// depends on the base variables.
pub(crate) type Key = (usize, Monomial);

fn depends(a: &Atom, vars: &[String]) -> bool {
    match a.kind() {
        AtomKind::Var | AtomKind::Jet(_) => vars.iter().any(|v| v == a.name()),
        AtomKind::Func { args, .. } => args.iter().any(|x| vars.contains(x)),
        AtomKind::Alg(_) => false,
        AtomKind::Sqrt(arg) => Frac::from_poly((**arg).clone()).any_atom(&|b| depends(b, vars)),
    }
}

fn frac_depends(f: &Frac, vars: &[String]) -> bool {
    f.any_atom(&|a| depends(a, vars))
}

fn poly_depends(p: &Poly, vars: &[String]) -> bool {
    frac_depends(&Frac::from_poly(p.clone()), vars)
}

/// Splits a monomial into the factor depending on `vars` and the rest.
fn split_monomial(m: &Monomial, vars: &[String]) -> (Monomial, Monomial) {
    let mut var = Monomial::one();
    let mut par = Monomial::one();
    for (a, e) in &m.atoms {
        let side = if depends(a, vars) { &mut var } else { &mut par };
        side.atoms.insert(a.clone(), *e);
    }
    if let Some(u) = &m.exp {
        if frac_depends(u, vars) {
            var.exp = Some(u.clone());
        } else {
            par.exp = Some(u.clone());
        }
    }
    for (b, x) in &m.pows {
        let side = if poly_depends(b, vars) || poly_depends(x, vars) { &mut var } else { &mut par };
        side.pows.insert(b.clone(), x.clone());
    }
    (var, par)
}

/// Writes each row of expressions as one vector over the functions of
/// `vars`, with coefficients free of `vars`.
pub(crate) fn vectorize_rows(rows: &[Vec<&Frac>], vars: &[String]) -> Result<Vec<Vector<Key>>> {
    // Clear every denominator that involves the variables.
    let mut den: BTreeMap<Poly, u32> = BTreeMap::new();
    for c in rows.iter().flatten() {
        for (f, k) in c.den_factors() {
            if poly_depends(f, vars) {
                let e = den.entry(f.clone()).or_insert(0);
                *e = (*e).max(k);
            }
        }
    }
    let clear = den.iter().fold(Frac::one(), |acc, (f, k)| acc.mul(&Frac::from_poly(f.pow(*k))));
    rows.iter()
        .map(|row| {
            let mut v: Vector<Key> = BTreeMap::new();
            for (i, c) in row.iter().enumerate() {
                let c = c.mul(&clear);
                let pden: BTreeMap<Poly, u32> = c.den_factors().map(|(f, k)| (f.clone(), k)).collect();
                if pden.keys().any(|f| poly_depends(f, vars)) {
                    return Err(Error::invalid(format!("denominator of {c} could not be cleared")));
                }
                for (m, q) in c.num().terms() {
                    let (var, par) = split_monomial(m, vars);
                    let coeff = Frac::from_parts(Poly::term(par, q.clone()), pden.clone());
                    let slot = v.entry((i, var)).or_default();
                    *slot = slot.add(&coeff);
                }
            }
            v.retain(|_, c| !c.is_zero());
            Ok(v)
        })
        .collect()
}

fn vectorize(gens: &[&Generator]) -> Result<Vec<Vector<Key>>> {
    let Some(first) = gens.first() else { return Ok(Vec::new()) };
    let mut vars = vec![first.indep().to_string()];
    vars.extend(first.deps().iter().cloned());
    let rows: Vec<Vec<&Frac>> = gens.iter().map(|g| g.components().into_iter().map(|(_, c)| c).collect()).collect();
    vectorize_rows(&rows, &vars)
}

/// Coefficients `c` with `g = sum c_i basis_i`, or `None` when `g` is not
/// in the span.
pub fn express_in_basis(g: &Generator, basis: &[Generator]) -> Result<Option<Vec<Frac>>> {
    let mut all: Vec<&Generator> = basis.iter().collect();
    all.push(g);
    if all.iter().any(|b| !b.same_space(g)) {
        return Err(Error::invalid("generators act on different variables"));
    }
    let vs = vectorize(&all)?;
    let (target, cols) = vs.split_last().unwrap();
    let cols: Vec<&Vector<Key>> = cols.iter().collect();
    Ok(solve(&cols, target))
}

/// Positions of a maximal linearly independent subset, scanning left to
/// right.
pub fn independent_generators(gens: &[Generator]) -> Result<Vec<usize>> {
    let all: Vec<&Generator> = gens.iter().collect();
    let vs = vectorize(&all)?;
    let cols: Vec<&Vector<Key>> = vs.iter().collect();
    Ok(independent_subset(&cols))
}

pub fn linearly_independent(gens: &[Generator]) -> Result<bool> {
    Ok(independent_generators(gens)?.len() == gens.len())
}

/// Structure constants of a closed basis: `[X_i, X_j] = sum_k c^k_ij X_k`.
#[derive(Clone, Debug)]
pub struct LieAlgebraBasis {
    pub generators: Vec<Generator>,
    pub structure: BTreeMap<(usize, usize), Vec<Frac>>,
}

impl LieAlgebraBasis {
    pub fn dimension(&self) -> usize {
        self.generators.len()
    }

    /// `[Xi,Xj] = c1*X1 + ...` for `i < j`.
    pub fn table(&self) -> Vec<String> {
        self.structure
            .iter()
            .filter(|((i, j), _)| i < j)
            .map(|((i, j), c)| {
                format!(
                    "[{},{}] = {}",
                    self.generators[*i].name,
                    self.generators[*j].name,
                    combination(&self.generators, c)
                )
            })
            .collect()
    }
}

/// `c1*X1 + c2*X2`, skipping zero coefficients.
pub fn combination(gens: &[Generator], c: &[Frac]) -> String {
    let mut out = String::new();
    for (g, k) in gens.iter().zip(c) {
        if k.is_zero() {
            continue;
        }
        let text = k.to_string();
        let (neg, body) = match text.strip_prefix('-') {
            Some(rest) if k.num().len() == 1 => (true, rest.to_string()),
            _ => (false, text.clone()),
        };
        let factor = if body == "1" {
            g.name.clone()
        } else if k.num().len() > 1 {
            format!("({body})*{}", g.name)
        } else {
            format!("{body}*{}", g.name)
        };
        match (out.is_empty(), neg) {
            (true, true) => out = format!("-{factor}"),
            (true, false) => out = factor,
            (false, true) => out += &format!(" - {factor}"),
            (false, false) => out += &format!(" + {factor}"),
        }
    }
    if out.is_empty() {
        "0".into()
    } else {
        out
    }
}

#[derive(Clone, Debug)]
pub enum Closure {
    Closed(LieAlgebraBasis),
    /// A bracket outside the span, with the pair that produced it.
    Open {
        pair: (usize, usize),
        bracket: Generator,
    },
}

/// All pairwise brackets, each unordered pair computed once.
pub fn closure_check(basis: &[Generator], exec: Exec) -> Result<Closure> {
    let n = basis.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let results = exec.map(&pairs, |&(i, j)| -> Result<(Generator, Option<Vec<Frac>>)> {
        let b = commutator(&basis[i], &basis[j])?;
        let c = express_in_basis(&b, basis)?;
        Ok((b, c))
    });
    let mut structure = BTreeMap::new();
    for (&(i, j), r) in pairs.iter().zip(results) {
        let (bracket, c) = r?;
        let Some(c) = c else {
            return Ok(Closure::Open { pair: (i, j), bracket });
        };
        let neg: Vec<Frac> = c.iter().map(|x| x.neg()).collect();
        structure.insert((i, j), c);
        structure.insert((j, i), neg);
    }
    for i in 0..n {
        structure.insert((i, i), vec![Frac::zero(); n]);
    }
    Ok(Closure::Closed(LieAlgebraBasis { generators: basis.to_vec(), structure }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn f(s: &str) -> Frac {
        parse(s).unwrap().to_frac().unwrap()
    }

    fn g(name: &str, xi: &str, ey: &str, ez: &str) -> Generator {
        let deps = vec!["y".to_string(), "z".to_string()];
        Generator::new(name, "x", &deps, f(xi), vec![f(ey), f(ez)]).unwrap()
    }

    #[test]
    fn brackets() {
        let x2 = g("X2", "0", "1", "0");
        let x3 = g("X3", "0", "0", "1");
        let x5 = g("X5", "0", "z", "0");
        assert!(commutator(&x2, &x3).unwrap().is_zero());
        let b = commutator(&x3, &x5).unwrap();
        assert_eq!(b.etas()[0], Frac::one());
        let x1 = g("X1", "1", "0", "0");
        let y3 = g("Y3", "0", "exp(sqrt(a0)*x)", "sqrt(a0)*exp(sqrt(a0)*x)");
        let b = commutator(&x1, &y3).unwrap();
        assert!(b.sub(&y3.scale(&f("sqrt(a0)"))).is_zero());
    }

    #[test]
    fn span_membership() {
        let x2 = g("X2", "0", "1", "0");
        let x3 = g("X3", "0", "0", "1");
        let c = express_in_basis(&g("t", "0", "1", "0"), &[x2.clone(), x3.clone()]).unwrap().unwrap();
        assert_eq!(c, vec![Frac::one(), Frac::zero()]);
        assert!(express_in_basis(&g("t", "0", "y", "0"), &[x2]).unwrap().is_none());
        let y3 = g("Y3", "0", "exp(sqrt(a0)*x)", "sqrt(a0)*exp(sqrt(a0)*x)");
        let c = express_in_basis(&y3.scale(&f("sqrt(a0)")), &[x3, y3.clone()]).unwrap().unwrap();
        assert_eq!(c[1], f("sqrt(a0)"));
    }

    #[test]
    fn rational_coefficients_in_x_are_not_constants() {
        let x2 = g("X2", "0", "1", "0");
        assert!(express_in_basis(&g("t", "0", "1/(x+1)", "0"), &[x2]).unwrap().is_none());
    }

    #[test]
    fn textbook_counterexample() {
        let d = g("d", "1", "0", "0");
        let q = g("q", "x^2", "0", "0");
        match closure_check(&[d, q], Exec::Sequential).unwrap() {
            Closure::Open { pair, bracket } => {
                assert_eq!(pair, (0, 1));
                assert_eq!(*bracket.xi(), f("2*x"));
            }
            Closure::Closed(_) => panic!("should not close"),
        }
    }

    #[test]
    fn sl2_closes_with_table() {
        let gens = vec![g("A", "1", "0", "0"), g("B", "x", "0", "0"), g("C", "x^2", "0", "0")];
        let Closure::Closed(alg) = closure_check(&gens, Exec::default()).unwrap() else { panic!() };
        assert_eq!(alg.table(), vec!["[A,B] = A", "[A,C] = 2*B", "[B,C] = C"]);
        assert_eq!(combination(&gens, &[f("-1"), f("1/2"), f("a+1")]), "-A + 1/2*B + (a + 1)*C");
    }
}
