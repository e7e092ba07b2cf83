use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::atom::Atom;
use super::frac::Frac;
use super::Q;

/// Power product of atoms, optionally times one exponential and any number
/// of symbolic powers `base^exponent`.
///
/// Exponentials merge additively (`exp(u)*exp(v) = exp(u+v)`) so a monomial
/// carries at most one; symbolic powers are keyed by base and merge by adding
/// exponents.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    pub(crate) atoms: BTreeMap<Atom, u32>,
    pub(crate) exp: Option<Arc<Frac>>,
    pub(crate) pows: BTreeMap<Poly, Poly>,
}

impl Monomial {
    pub fn one() -> Monomial {
        Monomial::default()
    }

    pub fn atom(a: Atom, e: u32) -> Monomial {
        let mut m = Monomial::one();
        if e > 0 {
            m.atoms.insert(a, e);
        }
        m
    }

    pub(crate) fn exponential(arg: Frac) -> Monomial {
        let mut m = Monomial::one();
        if !arg.is_zero() {
            m.exp = Some(Arc::new(arg));
        }
        m
    }

    pub(crate) fn sym_pow(base: Poly, exponent: Poly) -> Monomial {
        let mut m = Monomial::one();
        if !exponent.is_zero() {
            m.pows.insert(base, exponent);
        }
        m
    }

    pub fn is_one(&self) -> bool {
        self.atoms.is_empty() && self.exp.is_none() && self.pows.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&Atom, u32)> {
        self.atoms.iter().map(|(a, e)| (a, *e))
    }

    pub fn exponential_arg(&self) -> Option<&Frac> {
        self.exp.as_deref()
    }

    pub fn sym_pows(&self) -> impl Iterator<Item = (&Poly, &Poly)> {
        self.pows.iter()
    }

    pub fn power_of(&self, a: &Atom) -> u32 {
        self.atoms.get(a).copied().unwrap_or(0)
    }

    pub fn degree(&self) -> u32 {
        self.atoms.values().sum()
    }

    /// Product without applying algebraic rewrite rules.
    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = self.clone();
        for (a, e) in &other.atoms {
            *out.atoms.entry(a.clone()).or_insert(0) += e;
        }
        out.exp = match (&self.exp, &other.exp) {
            (None, None) => None,
            (Some(u), None) | (None, Some(u)) => Some(u.clone()),
            (Some(u), Some(v)) => {
                let s = u.add(v);
                (!s.is_zero()).then(|| Arc::new(s))
            }
        };
        for (b, s) in &other.pows {
            let merged = match out.pows.get(b) {
                Some(t) => t.add(s),
                None => s.clone(),
            };
            if merged.is_zero() {
                out.pows.remove(b);
            } else {
                out.pows.insert(b.clone(), merged);
            }
        }
        out
    }

    /// Monomial with one fewer factor `a`; caller guarantees `a` is present.
    pub(crate) fn without_one(&self, a: &Atom) -> Monomial {
        let mut out = self.clone();
        let e = out.atoms.get_mut(a).expect("atom present");
        *e -= 1;
        if *e == 0 {
            out.atoms.remove(a);
        }
        out
    }

    /// Quotient where exponentials and symbolic powers divide freely and
    /// atom powers must not go negative.
    pub(crate) fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = self.clone();
        for (a, e) in &other.atoms {
            let have = out.atoms.get(a).copied().unwrap_or(0);
            if have < *e {
                return None;
            }
            if have == *e {
                out.atoms.remove(a);
            } else {
                out.atoms.insert(a.clone(), have - e);
            }
        }
        if let Some(v) = &other.exp {
            let arg = match &out.exp {
                Some(u) => u.sub(v),
                None => v.neg(),
            };
            out.exp = (!arg.is_zero()).then(|| Arc::new(arg));
        }
        for (b, s) in &other.pows {
            let merged = match out.pows.get(b) {
                Some(t) => t.sub(s),
                None => s.neg(),
            };
            if merged.is_zero() {
                out.pows.remove(b);
            } else {
                out.pows.insert(b.clone(), merged);
            }
        }
        Some(out)
    }

    /// Splits into (plain atom part, everything else).
    fn split_plain(&self) -> (BTreeMap<Atom, u32>, Monomial) {
        let mut plain = BTreeMap::new();
        let mut rest = Monomial { atoms: BTreeMap::new(), exp: self.exp.clone(), pows: self.pows.clone() };
        for (a, e) in &self.atoms {
            if a.is_plain() {
                plain.insert(a.clone(), *e);
            } else {
                rest.atoms.insert(a.clone(), *e);
            }
        }
        (plain, rest)
    }
}

/// Sparse multivariate polynomial with exact rational coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Poly {
    terms: BTreeMap<Monomial, Q>,
}

impl Poly {
    pub fn zero() -> Poly {
        Poly::default()
    }

    pub fn one() -> Poly {
        Poly::constant(Q::one())
    }

    pub fn constant(c: Q) -> Poly {
        Poly::term(Monomial::one(), c)
    }

    pub fn from_integer(n: i64) -> Poly {
        Poly::constant(Q::from_integer(BigInt::from(n)))
    }

    pub fn atom(a: Atom) -> Poly {
        Poly::term(Monomial::atom(a, 1), Q::one())
    }

    pub fn term(m: Monomial, c: Q) -> Poly {
        let mut p = Poly::zero();
        p.add_term(m, c);
        p
    }

    /// Single monomial with algebraic rewrites applied.
    pub fn reduced_term(m: Monomial, c: Q) -> Poly {
        let mut p = Poly::zero();
        push_reduced(&mut p, m, c);
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Q)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &Monomial) -> Q {
        self.terms.get(m).cloned().unwrap_or_else(Q::zero)
    }

    /// `Some(c)` when the polynomial is the constant `c` (including zero).
    pub fn as_constant(&self) -> Option<Q> {
        match self.terms.len() {
            0 => Some(Q::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn as_single_atom(&self) -> Option<&Atom> {
        if self.terms.len() != 1 {
            return None;
        }
        let (m, c) = self.terms.iter().next().unwrap();
        if !c.is_one() || m.exp.is_some() || !m.pows.is_empty() || m.atoms.len() != 1 {
            return None;
        }
        let (a, e) = m.atoms.iter().next().unwrap();
        (*e == 1).then_some(a)
    }

    pub fn add_term(&mut self, m: Monomial, c: Q) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(existing) => {
                *existing += c;
                if existing.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let (mut out, small) = if self.len() >= other.len() { (self.clone(), other) } else { (other.clone(), self) };
        for (m, c) in &small.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect() }
    }

    pub fn scale(&self, k: &Q) -> Poly {
        if k.is_zero() {
            return Poly::zero();
        }
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect() }
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                push_reduced(&mut out, m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    pub fn mul_monomial(&self, m: &Monomial, k: &Q) -> Poly {
        let mut out = Poly::zero();
        for (m1, c1) in &self.terms {
            push_reduced(&mut out, m1.mul(m), c1 * k);
        }
        out
    }

    pub fn pow(&self, k: u32) -> Poly {
        let mut out = Poly::one();
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// Splits as `content * primitive` where the primitive part has coprime
    /// integer coefficients and a positive first coefficient.
    pub fn primitive(&self) -> (Q, Poly) {
        if self.is_zero() {
            return (Q::zero(), Poly::zero());
        }
        let mut g = BigInt::zero();
        let mut l = BigInt::one();
        for c in self.terms.values() {
            g = g.gcd(c.numer());
            l = l.lcm(c.denom());
        }
        let mut content = Q::new(g, l);
        if self.terms.values().next().unwrap().is_negative() {
            content = -content;
        }
        let inv = content.recip();
        (content, self.scale(&inv))
    }

    /// True when every atom is plain and there are no exponentials or
    /// symbolic powers.
    pub fn is_plain(&self) -> bool {
        self.terms.keys().all(|m| m.exp.is_none() && m.pows.is_empty() && m.atoms.keys().all(Atom::is_plain))
    }

    /// Largest monomial dividing every term: minimum atom powers, with the
    /// first term's exponential and symbolic powers.
    pub(crate) fn monomial_content(&self) -> Monomial {
        let mut it = self.terms.keys();
        let Some(first) = it.next() else { return Monomial::one() };
        let mut g = first.clone();
        for m in it {
            g.atoms.retain(|a, e| match m.atoms.get(a) {
                Some(f) => {
                    *e = (*e).min(*f);
                    true
                }
                None => false,
            });
        }
        g
    }

    pub(crate) fn div_monomial(&self, m: &Monomial) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(t, c)| (t.div(m).expect("monomial divides every term"), c.clone()))
                .collect(),
        }
    }

    /// Exact quotient by a plain polynomial, if one exists.
    pub fn div_exact(&self, divisor: &Poly) -> Option<Poly> {
        if divisor.is_zero() || !divisor.is_plain() {
            return None;
        }
        if self.is_zero() {
            return Some(Poly::zero());
        }
        let dterms: Vec<(BTreeMap<Atom, u32>, Q)> =
            divisor.terms.iter().map(|(m, c)| (m.atoms.clone(), c.clone())).collect();
        let lead = dterms.iter().max_by(|a, b| grlex(&a.0, &b.0)).cloned().unwrap();

        let mut groups: BTreeMap<Monomial, BTreeMap<BTreeMap<Atom, u32>, Q>> = BTreeMap::new();
        for (m, c) in &self.terms {
            let (plain, sig) = m.split_plain();
            groups.entry(sig).or_default().insert(plain, c.clone());
        }

        let mut quotient = Poly::zero();
        for (sig, mut rem) in groups {
            while !rem.is_empty() {
                let (lt, lc) = rem.iter().max_by(|a, b| grlex(a.0, b.0)).map(|(m, c)| (m.clone(), c.clone())).unwrap();
                let qm = plain_div(&lt, &lead.0)?;
                let qc = &lc / &lead.1;
                for (dm, dc) in &dterms {
                    let pm = plain_mul(&qm, dm);
                    let v = rem.entry(pm.clone()).or_insert_with(Q::zero);
                    *v -= &qc * dc;
                    if v.is_zero() {
                        rem.remove(&pm);
                    }
                }
                let mut full = sig.clone();
                for (a, e) in qm {
                    full.atoms.insert(a, e);
                }
                quotient.add_term(full, qc);
            }
        }
        Some(quotient)
    }
}

/// Adds `c*m` to `acc`, rewriting algebraic atoms of power >= 2 through
/// their defining relation.
pub(crate) fn push_reduced(acc: &mut Poly, m: Monomial, c: Q) {
    if c.is_zero() {
        return;
    }
    let hit = m.atoms.iter().find(|(a, e)| **e >= 2 && !a.is_plain()).map(|(a, _)| a.clone());
    let Some(a) = hit else {
        acc.add_term(m, c);
        return;
    };
    let rel = a.relation().expect("non-plain atom has a relation");
    let rest = m.without_one(&a).without_one(&a);
    let with_a = rest.mul(&Monomial::atom(a, 1));
    for (pm, pc) in rel.p.terms() {
        push_reduced(acc, with_a.mul(pm), &c * pc);
    }
    for (qm, qc) in rel.q.terms() {
        push_reduced(acc, rest.mul(qm), &c * qc);
    }
}

/// Graded lexicographic order on plain power products.
fn grlex(a: &BTreeMap<Atom, u32>, b: &BTreeMap<Atom, u32>) -> Ordering {
    let da: u32 = a.values().sum();
    let db: u32 = b.values().sum();
    if da != db {
        return da.cmp(&db);
    }
    let mut ia = a.iter().peekable();
    let mut ib = b.iter().peekable();
    loop {
        match (ia.peek(), ib.peek()) {
            (None, None) => return Ordering::Equal,
            (Some(_), None) => return Ordering::Greater,
            (None, Some(_)) => return Ordering::Less,
            (Some((xa, ea)), Some((xb, eb))) => match xa.cmp(xb) {
                Ordering::Less => return Ordering::Greater,
                Ordering::Greater => return Ordering::Less,
                Ordering::Equal => {
                    if ea != eb {
                        return ea.cmp(eb);
                    }
                    ia.next();
                    ib.next();
                }
            },
        }
    }
}

fn plain_div(a: &BTreeMap<Atom, u32>, b: &BTreeMap<Atom, u32>) -> Option<BTreeMap<Atom, u32>> {
    let mut out = a.clone();
    for (x, e) in b {
        let have = out.get(x).copied().unwrap_or(0);
        match have.cmp(e) {
            Ordering::Less => return None,
            Ordering::Equal => {
                out.remove(x);
            }
            Ordering::Greater => {
                out.insert(x.clone(), have - e);
            }
        }
    }
    Some(out)
}

fn plain_mul(a: &BTreeMap<Atom, u32>, b: &BTreeMap<Atom, u32>) -> BTreeMap<Atom, u32> {
    let mut out = a.clone();
    for (x, e) in b {
        *out.entry(x.clone()).or_insert(0) += e;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Poly {
        Poly::atom(Atom::var("x"))
    }
    fn y() -> Poly {
        Poly::atom(Atom::var("y"))
    }

    #[test]
    fn exact_division() {
        let a = x().add(&y());
        let b = x().sub(&y());
        let prod = a.mul(&b).mul(&x());
        assert_eq!(prod.div_exact(&a).unwrap(), b.mul(&x()));
        assert!(prod.div_exact(&x().add(&Poly::one())).is_none());
    }

    #[test]
    fn primitive_part_has_positive_first_coefficient() {
        let p = x()
            .scale(&Q::new(BigInt::from(-4), BigInt::from(6)))
            .add(&Poly::constant(Q::new(BigInt::from(-2), BigInt::from(3))));
        let (c, prim) = p.primitive();
        assert_eq!(prim.mul(&Poly::constant(c)), p);
        assert!(prim.terms().next().unwrap().1.is_positive());
    }

    #[test]
    fn sqrt_atom_squares_to_its_argument() {
        let s = Poly::atom(Atom::sqrt(Poly::atom(Atom::var("a0"))));
        assert_eq!(s.mul(&s), Poly::atom(Atom::var("a0")));
    }
}
