//! ODE systems, point generators and their prolongation to jet space.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::expr::{parse_with, Atom, AtomKind, Frac, Monomial, Poly, Subst, Symbols};

/// `y_i^(n) = f_i` for every dependent `y_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct OdeSystem {
    indep: String,
    deps: Vec<String>,
    order: u32,
    rhs: Vec<Frac>,
}

impl OdeSystem {
    pub fn new(indep: &str, deps: &[&str], order: u32, rhs: Vec<Frac>) -> Result<OdeSystem> {
        let deps: Vec<String> = deps.iter().map(|s| s.to_string()).collect();
        if deps.is_empty() {
            return Err(Error::invalid("system needs at least one dependent variable"));
        }
        if order == 0 {
            return Err(Error::invalid("system order must be positive"));
        }
        for (i, d) in deps.iter().enumerate() {
            if *d == indep || deps[..i].contains(d) {
                return Err(Error::invalid(format!("variable name {d} is repeated")));
            }
        }
        if rhs.len() != deps.len() {
            return Err(Error::invalid(format!("{} equations for {} dependents", rhs.len(), deps.len())));
        }
        for f in &rhs {
            if max_jet_order(f, &deps) >= order {
                return Err(Error::invalid(format!("right-hand side {f} reaches order {order}")));
            }
        }
        Ok(OdeSystem { indep: indep.to_string(), deps, order, rhs })
    }

    pub fn indep(&self) -> &str {
        &self.indep
    }

    pub fn deps(&self) -> &[String] {
        &self.deps
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn rhs(&self) -> &[Frac] {
        &self.rhs
    }

    pub fn substitute(&self, s: &Subst) -> Result<OdeSystem> {
        let rhs = self.rhs.iter().map(|f| s.apply(f)).collect::<Result<Vec<_>, _>>()?;
        let deps: Vec<&str> = self.deps.iter().map(|d| d.as_str()).collect();
        OdeSystem::new(&self.indep, &deps, self.order, rhs)
    }

    /// Replaces every `y_i^(n)` by `f_i` until no order-`n` jets remain.
    pub fn on_shell(&self, e: &Frac) -> Result<Frac> {
        let mut s = Subst::new();
        for (d, f) in self.deps.iter().zip(&self.rhs) {
            s = s.bind_jet(d, self.order, f.clone());
        }
        let mut cur = e.clone();
        for _ in 0..=self.deps.len() * self.order as usize {
            if max_jet_order(&cur, &self.deps) < self.order {
                return Ok(cur);
            }
            cur = s.apply(&cur)?;
        }
        Err(Error::invalid("on-shell substitution does not terminate"))
    }
}

/// Highest jet order of any of `deps` occurring in `e` (0 if none).
pub fn max_jet_order(e: &Frac, deps: &[String]) -> u32 {
    let mut k = 0;
    e.visit_atoms(&mut |a| {
        if let AtomKind::Jet(j) = a.kind() {
            if deps.iter().any(|d| d == a.name()) {
                k = k.max(*j);
            }
        }
    });
    k
}

/// Point vector field `xi d/dx + sum eta_i d/dy_i` on the base space of a
/// system.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Generator {
    pub name: String,
    indep: String,
    deps: Vec<String>,
    xi: Frac,
    etas: Vec<Frac>,
}

impl Generator {
    pub fn new(name: &str, indep: &str, deps: &[String], xi: Frac, etas: Vec<Frac>) -> Result<Generator> {
        if etas.len() != deps.len() {
            return Err(Error::invalid(format!(
                "{name}: {} eta coefficients for {} dependents",
                etas.len(),
                deps.len()
            )));
        }
        for c in std::iter::once(&xi).chain(&etas) {
            if c.has_jets() {
                return Err(Error::invalid(format!("{name}: coefficient {c} involves derivatives")));
            }
        }
        Ok(Generator { name: name.to_string(), indep: indep.to_string(), deps: deps.to_vec(), xi, etas })
    }

    pub fn zero(name: &str, indep: &str, deps: &[String]) -> Generator {
        Generator {
            name: name.to_string(),
            indep: indep.to_string(),
            deps: deps.to_vec(),
            xi: Frac::zero(),
            etas: vec![Frac::zero(); deps.len()],
        }
    }

    pub fn indep(&self) -> &str {
        &self.indep
    }

    pub fn deps(&self) -> &[String] {
        &self.deps
    }

    pub fn xi(&self) -> &Frac {
        &self.xi
    }

    pub fn etas(&self) -> &[Frac] {
        &self.etas
    }

    /// `(label, coefficient)` pairs: `xi`, then `eta[y]` per dependent.
    pub fn components(&self) -> Vec<(String, &Frac)> {
        let mut out = vec![("xi".to_string(), &self.xi)];
        for (d, e) in self.deps.iter().zip(&self.etas) {
            out.push((format!("eta[{d}]"), e));
        }
        out
    }

    pub fn same_space(&self, other: &Generator) -> bool {
        self.indep == other.indep && self.deps == other.deps
    }

    pub fn is_zero(&self) -> bool {
        self.xi.is_zero() && self.etas.iter().all(|e| e.is_zero())
    }

    pub fn with_name(mut self, name: &str) -> Generator {
        self.name = name.to_string();
        self
    }

    /// Applies the vector field to a function of the base variables.
    pub fn apply(&self, f: &Frac) -> Frac {
        let mut out = self.xi.mul(&f.diff_var(&self.indep));
        for (d, e) in self.deps.iter().zip(&self.etas) {
            if !e.is_zero() {
                out = out.add(&e.mul(&f.diff_var(d)));
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(&Frac) -> Frac) -> Generator {
        Generator {
            name: self.name.clone(),
            indep: self.indep.clone(),
            deps: self.deps.clone(),
            xi: f(&self.xi),
            etas: self.etas.iter().map(f).collect(),
        }
    }

    pub fn try_map(&self, f: impl Fn(&Frac) -> Result<Frac>) -> Result<Generator> {
        Ok(Generator {
            name: self.name.clone(),
            indep: self.indep.clone(),
            deps: self.deps.clone(),
            xi: f(&self.xi)?,
            etas: self.etas.iter().map(f).collect::<Result<_>>()?,
        })
    }

    pub fn substitute(&self, s: &Subst) -> Result<Generator> {
        self.try_map(|c| Ok(s.apply(c)?))
    }

    pub fn scale(&self, k: &Frac) -> Generator {
        self.map(|c| c.mul(k))
    }

    pub fn add(&self, other: &Generator) -> Generator {
        let mut out = self.clone();
        out.xi = self.xi.add(&other.xi);
        for (a, b) in out.etas.iter_mut().zip(&other.etas) {
            *a = a.add(b);
        }
        out
    }

    pub fn sub(&self, other: &Generator) -> Generator {
        self.add(&other.scale(&Frac::integer(-1)))
    }

    /// Replaces one component (0 = xi, i = eta of dependent i-1).
    pub fn with_component(&self, idx: usize, value: Frac) -> Generator {
        let mut out = self.clone();
        if idx == 0 {
            out.xi = value;
        } else {
            out.etas[idx - 1] = value;
        }
        out
    }

    pub fn component(&self, idx: usize) -> &Frac {
        if idx == 0 {
            &self.xi
        } else {
            &self.etas[idx - 1]
        }
    }
}

/// A generator together with its extension coefficients up to some order.
#[derive(Clone, Debug)]
pub struct ProlongedGenerator {
    pub base: Generator,
    /// `orders[j-1][i]` is the order-`j` coefficient of dependent `i`.
    orders: Vec<Vec<Frac>>,
}

impl ProlongedGenerator {
    pub fn order(&self) -> u32 {
        self.orders.len() as u32
    }

    /// `eta_i^(j)`; order 0 is the base coefficient.
    pub fn coefficient(&self, dep: usize, j: u32) -> &Frac {
        if j == 0 {
            &self.base.etas[dep]
        } else {
            &self.orders[j as usize - 1][dep]
        }
    }

    fn extend_to(&mut self, k: u32) {
        let g = &self.base;
        let dxi = total_derivative(&g.xi, &g.indep, &g.deps, 0);
        while self.order() < k {
            let j = self.order() + 1;
            let next = (0..g.deps.len())
                .map(|i| {
                    let prev = self.coefficient(i, j - 1);
                    let d = total_derivative(prev, &g.indep, &g.deps, j - 1);
                    d.sub(&Frac::jet(&g.deps[i], j).mul(&dxi))
                })
                .collect();
            self.orders.push(next);
        }
    }

    /// `X^(k) f` for `f` over jets of order <= `k`.
    pub fn apply(&self, f: &Frac, k: u32) -> Frac {
        let g = &self.base;
        let mut out = g.xi.mul(&f.diff_var(&g.indep));
        for (i, d) in g.deps.iter().enumerate() {
            for j in 0..=k {
                let df = f.diff(&Atom::jet(d.clone(), j));
                if !df.is_zero() {
                    out = out.add(&self.coefficient(i, j).mul(&df));
                }
            }
        }
        out
    }
}

/// `D_x e = e_x + sum_i sum_{j <= max_order} y_i^(j+1) e_{y_i^(j)}`.
///
/// Jets of higher order than `max_order` present in `e` are differentiated
/// as well; the equations of motion are not substituted.
pub fn total_derivative(e: &Frac, indep: &str, deps: &[String], max_order: u32) -> Frac {
    let top = max_order.max(max_jet_order(e, deps));
    let mut out = e.diff_var(indep);
    for d in deps {
        for j in 0..=top {
            let de = e.diff(&Atom::jet(d.clone(), j));
            if !de.is_zero() {
                out = out.add(&Frac::jet(d, j + 1).mul(&de));
            }
        }
    }
    out
}

/// Extension coefficients of orders `1..=k` by the recursion
/// `eta^(j) = D_x eta^(j-1) - y^(j) D_x xi`.
pub fn prolong(g: &Generator, k: u32) -> ProlongedGenerator {
    let mut p = ProlongedGenerator { base: g.clone(), orders: Vec::new() };
    p.extend_to(k);
    p
}

/// Prolongations shared between callers; safe to use from many threads.
type CacheKey = (Frac, Vec<Frac>, String, Vec<String>);

#[derive(Default)]
pub struct ProlongCache {
    map: Mutex<HashMap<CacheKey, Arc<ProlongedGenerator>>>,
}

impl ProlongCache {
    pub fn new() -> ProlongCache {
        ProlongCache::default()
    }

    pub fn prolong(&self, g: &Generator, k: u32) -> Arc<ProlongedGenerator> {
        let key = (g.xi.clone(), g.etas.clone(), g.indep.clone(), g.deps.clone());
        if let Some(p) = self.map.lock().unwrap().get(&key) {
            if p.order() >= k {
                return p.clone();
            }
        }
        let p = Arc::new(prolong(g, k));
        self.map.lock().unwrap().insert(key, p.clone());
        p
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `eta_i^(n) - X^(n-1) f_i`, on shell, one per equation.
pub fn symmetry_residuals(g: &Generator, sys: &OdeSystem) -> Result<Vec<Frac>> {
    residuals_with(&prolong(g, sys.order), sys)
}

pub fn symmetry_residuals_cached(g: &Generator, sys: &OdeSystem, cache: &ProlongCache) -> Result<Vec<Frac>> {
    residuals_with(&cache.prolong(g, sys.order), sys)
}

fn residuals_with(p: &ProlongedGenerator, sys: &OdeSystem) -> Result<Vec<Frac>> {
    if p.base.indep != sys.indep || p.base.deps != sys.deps {
        return Err(Error::invalid(format!("{} is not defined on the variables of the system", p.base.name)));
    }
    let n = sys.order;
    sys.rhs
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let r = p.coefficient(i, n).sub(&p.apply(f, n - 1));
            sys.on_shell(&r)
        })
        .collect()
}

pub fn is_symmetry(g: &Generator, sys: &OdeSystem) -> Result<bool> {
    Ok(symmetry_residuals(g, sys)?.iter().all(|r| r.is_zero()))
}

/// Which closed form of the second extension coefficients to use for a
/// two-dependent system.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExplicitForm {
    /// The reference formulas term for term.
    Reference,
    /// The reference formulas with the second coefficient rebuilt by the
    /// `y <-> z` symmetry of the first.
    Corrected,
}

const ETA1_SECOND: &str = "eta1_{,xx} + y'*(2*eta1_{,xy} - xi_{,xx}) + 2*z'*eta1_{,xz} \
    + y''*(eta1_{,y} - 2*xi_{,x} - 3*y'*xi_{,y} - 2*z'*xi_{,z}) + z''*(eta1_{,z} - y'*xi_{,z}) \
    + y'^2*(eta1_{,yy} - 2*xi_{,xy} - 2*z'*xi_{,yz}) + 2*y'*z'*(eta1_{,yz} - xi_{,xz}) \
    + z'^2*(eta1_{,zz} - y'*xi_{,zz}) - y'^3*xi_{,yy}";

const ETA2_SECOND_REFERENCE: &str = "eta2_{,xx} + z'*(2*eta1_{,xz} - xi_{,xx}) + 2*y'*eta2_{,xy} \
    + z''*(eta2_{,z} - 2*xi_{,x} - 2*y'*xi_{,y} - 3*z'*xi_{,z}) + y''*(eta2_{,y} - z'*xi_{,y}) \
    + z'^2*(eta2_{,zz} - 2*xi_{,xz} - 2*z'*xi_{,yz}) + 2*y'*z'*(eta2_{,yz} - xi_{,xy}) \
    + y'^2*(eta2_{,zz} - z'*xi_{,yy}) - z'^3*xi_{,zz}";

const ETA2_SECOND_CORRECTED: &str = "eta2_{,xx} + z'*(2*eta2_{,xz} - xi_{,xx}) + 2*y'*eta2_{,xy} \
    + z''*(eta2_{,z} - 2*xi_{,x} - 2*y'*xi_{,y} - 3*z'*xi_{,z}) + y''*(eta2_{,y} - z'*xi_{,y}) \
    + z'^2*(eta2_{,zz} - 2*xi_{,xz} - 2*y'*xi_{,yz}) + 2*y'*z'*(eta2_{,yz} - xi_{,xy}) \
    + y'^2*(eta2_{,yy} - z'*xi_{,yy}) - z'^3*xi_{,zz}";

/// The closed-form templates in the unknowns `xi, eta1, eta2` of `(x,y,z)`.
pub fn second_extension_templates(form: ExplicitForm) -> (Frac, Frac) {
    let syms = Symbols::default()
        .with_function("xi", &["x", "y", "z"])
        .with_function("eta1", &["x", "y", "z"])
        .with_function("eta2", &["x", "y", "z"]);
    let parse = |s: &str| parse_with(s, &syms).and_then(|e| e.to_frac()).expect("template parses");
    let eta2 = match form {
        ExplicitForm::Reference => ETA2_SECOND_REFERENCE,
        ExplicitForm::Corrected => ETA2_SECOND_CORRECTED,
    };
    (parse(ETA1_SECOND), parse(eta2))
}

/// Second extension coefficients of a two-dependent generator from the
/// closed-form expansion.
pub fn second_extension_explicit(g: &Generator, form: ExplicitForm) -> Result<(Frac, Frac)> {
    if g.deps.len() != 2 {
        return Err(Error::invalid(format!(
            "closed-form extension needs two dependents, {} has {}",
            g.name,
            g.deps.len()
        )));
    }
    let names = [g.indep.as_str(), g.deps[0].as_str(), g.deps[1].as_str()];
    let canon = ["x", "y", "z"];
    // Move the generator onto (x, y, z), fill the template, move back.
    let mut to = Subst::new();
    let mut back = Subst::new();
    for (n, c) in names.iter().zip(canon) {
        to.insert(n, Frac::var(c));
        back.insert(c, Frac::var(n));
    }
    for (n, c) in names[1..].iter().zip(&canon[1..]) {
        for j in 1..=2 {
            back = back.bind_jet(c, j, Frac::jet(n, j));
        }
    }
    let fill = Subst::new()
        .bind("xi", to.apply(&g.xi)?)
        .bind("eta1", to.apply(&g.etas[0])?)
        .bind("eta2", to.apply(&g.etas[1])?);
    let (t1, t2) = second_extension_templates(form);
    Ok((back.apply(&fill.apply(&t1)?)?, back.apply(&fill.apply(&t2)?)?))
}

/// Coefficients of `e` as a polynomial in `atoms`, keyed by exponent vector.
///
/// Fails when one of the atoms sits in a denominator, an exponential, a
/// square root or a symbolic power.
pub fn split_by_atoms(e: &Frac, atoms: &[Atom]) -> Result<BTreeMap<Vec<u32>, Frac>> {
    let hidden = |p: &Poly| {
        let f = Frac::from_poly(p.clone());
        f.any_atom(&|a| atoms.contains(a))
    };
    for (f, _) in e.den_factors() {
        if hidden(f) {
            return Err(Error::invalid(format!("not polynomial in the split variables: denominator {f}")));
        }
    }
    let mut parts: BTreeMap<Vec<u32>, Poly> = BTreeMap::new();
    for (m, c) in e.num().terms() {
        let inner = m.exponential_arg().is_some_and(|u| u.any_atom(&|a| atoms.contains(a)))
            || m.sym_pows().any(|(b, x)| hidden(b) || hidden(x))
            || m.atoms().any(|(a, _)| matches!(a.kind(), AtomKind::Sqrt(arg) if hidden(arg)));
        if inner {
            return Err(Error::invalid("not polynomial in the split variables"));
        }
        let exps: Vec<u32> = atoms.iter().map(|a| m.power_of(a)).collect();
        let mut rest = m.clone();
        for (a, k) in atoms.iter().zip(&exps) {
            for _ in 0..*k {
                rest = rest.without_one(a);
            }
        }
        parts.entry(exps).or_default().add_term(rest, c.clone());
    }
    let den: BTreeMap<Poly, u32> = e.den_factors().map(|(f, k)| (f.clone(), k)).collect();
    Ok(parts.into_iter().filter(|(_, p)| !p.is_zero()).map(|(k, p)| (k, Frac::from_parts(p, den.clone()))).collect())
}

/// Product of `atoms[i]^exps[i]` as a monomial.
pub fn jet_monomial(atoms: &[Atom], exps: &[u32]) -> Monomial {
    atoms.iter().zip(exps).fold(Monomial::one(), |m, (a, k)| m.mul(&Monomial::atom(a.clone(), *k)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn f(s: &str) -> Frac {
        parse(s).unwrap().to_frac().unwrap()
    }

    fn yz() -> Vec<String> {
        vec!["y".into(), "z".into()]
    }

    fn gen(xi: &str, ey: &str, ez: &str) -> Generator {
        Generator::new("g", "x", &yz(), f(xi), vec![f(ey), f(ez)]).unwrap()
    }

    fn free_system(rhs_z: &str) -> OdeSystem {
        OdeSystem::new("x", &["y", "z"], 2, vec![f("z'"), f(rhs_z)]).unwrap()
    }

    #[test]
    fn total_derivatives() {
        let deps = vec!["y".to_string()];
        assert_eq!(total_derivative(&f("y"), "x", &deps, 0), f("y'"));
        assert_eq!(total_derivative(&f("z*z'"), "x", &yz(), 1), f("z'^2 + z*z''"));
        assert_eq!(total_derivative(&f("z^2/2"), "x", &yz(), 0), f("z*z'"));
    }

    #[test]
    fn prolongation_examples() {
        let x4 = prolong(&gen("0", "x", "0"), 2);
        assert_eq!(*x4.coefficient(0, 1), Frac::one());
        assert!(x4.coefficient(0, 2).is_zero());
        let x7 = prolong(&gen("z", "z^2/2", "0"), 1);
        assert_eq!(*x7.coefficient(0, 1), f("z*z' - y'*z'"));
        let x1 = prolong(&gen("1", "0", "0"), 3);
        assert!((1..=3).all(|j| x1.coefficient(0, j).is_zero() && x1.coefficient(1, j).is_zero()));
    }

    #[test]
    fn free_particle_symmetries() {
        let sys = free_system("0");
        let x7 = gen("z", "z^2/2", "0");
        let r = symmetry_residuals(&x7, &sys).unwrap();
        assert!(r.iter().all(|r| r.is_zero()), "{r:?}");
        assert!(!is_symmetry(&gen("0", "y", "0"), &sys).unwrap());
    }

    #[test]
    fn exponential_generator_on_constant_coefficient_system() {
        let sys = free_system("alpha0*y'");
        let y3 = gen("0", "exp(sqrt(alpha0)*x)", "sqrt(alpha0)*exp(sqrt(alpha0)*x)");
        assert!(is_symmetry(&y3, &sys).unwrap());
    }

    #[test]
    fn closed_form_top_coefficient_of_first_extension() {
        // With xi linear in y, z the y'^3 coefficient -xi_{,yy} vanishes.
        let g = gen("x*y + z", "y^2", "x*z");
        let (e1, _) = second_extension_explicit(&g, ExplicitForm::Reference).unwrap();
        let yp = Atom::jet("y", 1);
        let parts = split_by_atoms(&e1, &[yp]).unwrap();
        assert!(!parts.contains_key(&vec![3]));
        let (e1, _) = second_extension_explicit(&gen("0", "x", "0"), ExplicitForm::Reference).unwrap();
        assert!(e1.is_zero());
    }

    #[test]
    fn corrected_closed_form_matches_recursion() {
        let g = gen("x*y*z + z^2", "y^2*z - x^3", "x*y^2 + z^3*y");
        let p = prolong(&g, 2);
        let (e1, e2) = second_extension_explicit(&g, ExplicitForm::Corrected).unwrap();
        assert_eq!(&e1, p.coefficient(0, 2));
        assert_eq!(&e2, p.coefficient(1, 2));
        let (_, r2) = second_extension_explicit(&g, ExplicitForm::Reference).unwrap();
        assert_ne!(&r2, p.coefficient(1, 2));
    }

    #[test]
    fn renamed_variables() {
        let deps = vec!["u".to_string(), "v".to_string()];
        let g = Generator::new("g", "t", &deps, f("t*u"), vec![f("v^2"), f("t*u*v")]).unwrap();
        let p = prolong(&g, 2);
        let (e1, e2) = second_extension_explicit(&g, ExplicitForm::Corrected).unwrap();
        assert_eq!(&e1, p.coefficient(0, 2));
        assert_eq!(&e2, p.coefficient(1, 2));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(OdeSystem::new("x", &["y", "z"], 2, vec![f("z''"), f("0")]).is_err());
        assert!(Generator::new("g", "x", &yz(), f("y'"), vec![f("0"), f("0")]).is_err());
        let one = vec!["y".to_string()];
        let g = Generator::new("g", "x", &one, f("1"), vec![f("0")]).unwrap();
        assert!(second_extension_explicit(&g, ExplicitForm::Reference).is_err());
    }

    #[test]
    fn cache_reuses_prolongations() {
        let cache = ProlongCache::new();
        let sys = free_system("0");
        let g = gen("x", "x*z/2", "0");
        let a = symmetry_residuals_cached(&g, &sys, &cache).unwrap();
        let b = symmetry_residuals_cached(&g, &sys, &cache).unwrap();
        assert_eq!(a, b);
        assert_eq!(cache.len(), 1);
    }
}
