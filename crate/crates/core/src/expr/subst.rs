use std::collections::BTreeMap;

use super::atom::{Atom, AtomKind, Relation};
use super::frac::Frac;
use super::poly::Poly;
use super::ExprError;

/// Simultaneous substitution.
///
/// Names bind variables and unknown functions alike. A function binding is
/// an expression in the function's own argument names; partial-derivative
/// atoms of that function receive the corresponding derivative of it.
#[derive(Clone, Debug, Default)]
pub struct Subst {
    names: BTreeMap<String, Frac>,
    jets: BTreeMap<(String, u32), Frac>,
}

impl Subst {
    pub fn new() -> Subst {
        Subst::default()
    }

    pub fn bind(mut self, name: &str, value: Frac) -> Subst {
        self.names.insert(name.to_string(), value);
        self
    }

    pub fn bind_jet(mut self, name: &str, order: u32, value: Frac) -> Subst {
        if order == 0 {
            self.names.insert(name.to_string(), value);
        } else {
            self.jets.insert((name.to_string(), order), value);
        }
        self
    }

    pub fn insert(&mut self, name: &str, value: Frac) {
        self.names.insert(name.to_string(), value);
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty() && self.jets.is_empty()
    }

    pub fn apply(&self, e: &Frac) -> Result<Frac, ExprError> {
        Walk { s: self, memo: BTreeMap::new() }.frac(e)
    }
}

struct Walk<'a> {
    s: &'a Subst,
    memo: BTreeMap<Atom, Frac>,
}

impl Walk<'_> {
    fn frac(&mut self, e: &Frac) -> Result<Frac, ExprError> {
        let mut out = self.poly(e.num())?;
        for (f, k) in e.den_factors() {
            let d = self.poly(f)?.pow(k as i64)?;
            out = out.div(&d)?;
        }
        Ok(out)
    }

    fn poly(&mut self, p: &Poly) -> Result<Frac, ExprError> {
        let mut out = Frac::zero();
        for (m, c) in p.terms() {
            let mut t = Frac::constant(c.clone());
            for (a, e) in m.atoms() {
                t = t.mul(&self.atom(a)?.pow(e as i64)?);
            }
            if let Some(u) = m.exponential_arg() {
                t = t.mul(&Frac::exp(&self.frac(u)?));
            }
            for (b, x) in m.sym_pows() {
                let b = self.poly(b)?;
                let x = self.poly(x)?;
                t = t.mul(&Frac::sym_pow(&b, &x)?);
            }
            out = out.add(&t);
        }
        Ok(out)
    }

    fn atom(&mut self, a: &Atom) -> Result<Frac, ExprError> {
        if let Some(v) = self.memo.get(a) {
            return Ok(v.clone());
        }
        let v = match a.kind() {
            AtomKind::Var => self.s.names.get(a.name()).cloned().unwrap_or_else(|| Frac::atom(a.clone())),
            AtomKind::Jet(k) => {
                self.s.jets.get(&(a.name().to_string(), *k)).cloned().unwrap_or_else(|| Frac::atom(a.clone()))
            }
            AtomKind::Func { args, derivs } => match self.s.names.get(a.name()) {
                Some(f) => {
                    let mut v = f.clone();
                    for (x, d) in args.iter().zip(derivs) {
                        for _ in 0..*d {
                            v = v.diff_var(x);
                        }
                    }
                    v
                }
                None => Frac::atom(a.clone()),
            },
            AtomKind::Alg(r) => {
                let p = self.poly(&r.p)?;
                let q = self.poly(&r.q)?;
                if p.has_denominator() || q.has_denominator() {
                    return Err(ExprError::Invalid(format!("relation of {} became rational", a.name())));
                }
                let relation = Relation { p: p.num().clone(), q: q.num().clone() };
                if relation == **r {
                    Frac::atom(a.clone())
                } else {
                    Frac::atom(Atom::alg(a.name(), relation))
                }
            }
            AtomKind::Sqrt(arg) => Frac::sqrt(&self.poly(arg)?)?,
        };
        self.memo.insert(a.clone(), v.clone());
        Ok(v)
    }
}
