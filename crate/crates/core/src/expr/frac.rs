use std::collections::BTreeMap;

use num_bigint::{BigInt, Sign};
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::atom::{Atom, AtomKind};
use super::poly::{Monomial, Poly};
use super::{ExprError, Q};

/// Canonical form of an expression: a polynomial numerator over a product
/// of denominator factors.
///
/// Denominator factors are plain-coefficient polynomials that are primitive
/// with a positive first coefficient; a factor is cancelled whenever it
/// divides the numerator exactly. Algebraic atoms never appear alone in a
/// denominator (`1/c` is rewritten as `(c - p)/q`), and exponentials and
/// symbolic powers move to the numerator with negated arguments.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Frac {
    num: Poly,
    den: BTreeMap<Poly, u32>,
}

impl Frac {
    pub fn zero() -> Frac {
        Frac::default()
    }

    pub fn one() -> Frac {
        Frac::from_poly(Poly::one())
    }

    pub fn constant(c: Q) -> Frac {
        Frac::from_poly(Poly::constant(c))
    }

    pub fn integer(n: i64) -> Frac {
        Frac::constant(Q::from_integer(BigInt::from(n)))
    }

    pub fn rational(n: i64, d: i64) -> Frac {
        Frac::constant(Q::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn from_poly(num: Poly) -> Frac {
        Frac { num, den: BTreeMap::new() }
    }

    pub fn atom(a: Atom) -> Frac {
        Frac::from_poly(Poly::atom(a))
    }

    pub fn var(name: &str) -> Frac {
        Frac::atom(Atom::var(name))
    }

    pub fn jet(name: &str, order: u32) -> Frac {
        Frac::atom(Atom::jet(name, order))
    }

    pub fn func(name: &str, args: &[&str]) -> Frac {
        Frac::atom(Atom::func(name, args.iter().map(|s| s.to_string()).collect()))
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den_factors(&self) -> impl Iterator<Item = (&Poly, u32)> {
        self.den.iter().map(|(f, k)| (f, *k))
    }

    pub fn has_denominator(&self) -> bool {
        !self.den.is_empty()
    }

    pub fn den_poly(&self) -> Poly {
        let mut out = Poly::one();
        for (f, k) in &self.den {
            out = out.mul(&f.pow(*k));
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn as_constant(&self) -> Option<Q> {
        if self.den.is_empty() {
            self.num.as_constant()
        } else {
            None
        }
    }

    pub fn is_one(&self) -> bool {
        self.as_constant().is_some_and(|c| c.is_one())
    }

    pub fn neg(&self) -> Frac {
        Frac { num: self.num.neg(), den: self.den.clone() }
    }

    pub fn scale(&self, k: &Q) -> Frac {
        if k.is_zero() {
            return Frac::zero();
        }
        Frac { num: self.num.scale(k), den: self.den.clone() }
    }

    pub fn add(&self, other: &Frac) -> Frac {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        if self.den.is_empty() && other.den.is_empty() {
            return Frac::from_poly(self.num.add(&other.num));
        }
        if self.den == other.den {
            return Frac { num: self.num.add(&other.num), den: self.den.clone() }.cancel();
        }
        let mut lcm = self.den.clone();
        for (f, k) in &other.den {
            let e = lcm.entry(f.clone()).or_insert(0);
            *e = (*e).max(*k);
        }
        let a = self.num.mul(&cofactor(&lcm, &self.den));
        let b = other.num.mul(&cofactor(&lcm, &other.den));
        Frac { num: a.add(&b), den: lcm }.cancel()
    }

    pub fn sub(&self, other: &Frac) -> Frac {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Frac) -> Frac {
        if self.is_zero() || other.is_zero() {
            return Frac::zero();
        }
        let num = self.num.mul(&other.num);
        if self.den.is_empty() && other.den.is_empty() {
            return Frac::from_poly(num);
        }
        let mut den = self.den.clone();
        for (f, k) in &other.den {
            *den.entry(f.clone()).or_insert(0) += k;
        }
        Frac { num, den }.cancel()
    }

    pub fn inv(&self) -> Result<Frac, ExprError> {
        let inv_num = invert_poly(&self.num)?;
        if self.den.is_empty() {
            return Ok(inv_num);
        }
        Ok(Frac { num: inv_num.num.mul(&self.den_poly()), den: inv_num.den }.cancel())
    }

    pub fn div(&self, other: &Frac) -> Result<Frac, ExprError> {
        Ok(self.mul(&other.inv()?))
    }

    pub fn pow(&self, k: i64) -> Result<Frac, ExprError> {
        if k < 0 {
            return self.inv()?.pow(-k);
        }
        let k = k as u32;
        if k == 0 {
            return Ok(Frac::one());
        }
        let num = self.num.pow(k);
        let den = self.den.iter().map(|(f, e)| (f.clone(), e * k)).collect();
        Ok(Frac { num, den }.cancel())
    }

    pub fn exp(arg: &Frac) -> Frac {
        Frac::from_poly(Poly::term(Monomial::exponential(arg.clone()), Q::one()))
    }

    pub fn sqrt(arg: &Frac) -> Result<Frac, ExprError> {
        if arg.is_zero() {
            return Ok(Frac::zero());
        }
        if let Some(c) = arg.as_constant() {
            return Ok(sqrt_rational(&c));
        }
        if !arg.den.is_empty() {
            // sqrt(n/d) = sqrt(n*d)/d
            let d = arg.den_poly();
            let root = Frac::sqrt(&Frac::from_poly(arg.num.mul(&d)))?;
            return Ok(root.mul(&invert_poly(&d)?));
        }
        let (c, prim) = arg.num.primitive();
        Ok(sqrt_rational(&c).mul(&Frac::atom(Atom::sqrt(prim))))
    }

    /// `base^exponent` for an exponent that is an integer plus a nonzero
    /// polynomial in symbolic constants.
    pub fn sym_pow(base: &Frac, exponent: &Frac) -> Result<Frac, ExprError> {
        if exponent.has_denominator() {
            return Err(ExprError::Invalid("symbolic exponent must be polynomial".into()));
        }
        let e = &exponent.num;
        let k = e.coefficient(&Monomial::one());
        let (kint, sym) =
            if k.is_integer() { (k.to_integer(), e.sub(&Poly::constant(k))) } else { (BigInt::zero(), e.clone()) };
        let kint = kint.to_i64().ok_or_else(|| ExprError::Invalid("exponent too large".into()))?;
        if sym.is_zero() {
            return base.pow(kint);
        }
        if base.is_zero() {
            return Ok(Frac::zero());
        }
        let mut out = Frac::one();
        if !base.num.as_constant().is_some_and(|c| c.is_one()) {
            out = Frac::from_poly(Poly::term(Monomial::sym_pow(base.num.clone(), sym.clone()), Q::one()));
        }
        for (f, k) in &base.den {
            let s = sym.scale(&Q::from_integer(BigInt::from(-(*k as i64))));
            out = out.mul(&Frac::from_poly(Poly::term(Monomial::sym_pow(f.clone(), s), Q::one())));
        }
        Ok(out.mul(&base.pow(kint)?))
    }

    /// Partial derivative with respect to a variable or jet coordinate; all
    /// other atoms are constants except unknown functions of `v`.
    pub fn diff(&self, v: &Atom) -> Frac {
        let dn = poly_diff(&self.num, v);
        if self.den.is_empty() {
            return dn;
        }
        let mut out = dn.mul(&Frac { num: Poly::one(), den: self.den.clone() });
        for (f, k) in &self.den {
            let df = poly_diff(f, v);
            if df.is_zero() {
                continue;
            }
            let mut den = self.den.clone();
            *den.get_mut(f).unwrap() += 1;
            let kq = Q::from_integer(BigInt::from(*k));
            let t = Frac { num: self.num.scale(&kq), den }.cancel().mul(&df);
            out = out.sub(&t);
        }
        out
    }

    pub fn diff_var(&self, name: &str) -> Frac {
        self.diff(&Atom::var(name))
    }

    /// Calls `f` on every atom, including those inside square-root
    /// arguments, exponentials and symbolic powers.
    pub fn visit_atoms(&self, f: &mut dyn FnMut(&Atom)) {
        visit_poly(&self.num, f);
        for p in self.den.keys() {
            visit_poly(p, f);
        }
    }

    pub fn any_atom(&self, pred: &dyn Fn(&Atom) -> bool) -> bool {
        let mut hit = false;
        self.visit_atoms(&mut |a| hit |= pred(a));
        hit
    }

    pub fn depends_on_var(&self, name: &str) -> bool {
        self.any_atom(&|a| match a.kind() {
            AtomKind::Var => a.name() == name,
            AtomKind::Func { args, .. } => args.iter().any(|x| x == name),
            _ => false,
        })
    }

    pub fn has_jets(&self) -> bool {
        self.any_atom(&|a| a.is_jet())
    }

    /// Splits into one fraction per numerator term, each over the full
    /// denominator.
    pub fn terms(&self) -> Vec<Frac> {
        self.num
            .terms()
            .map(|(m, c)| Frac { num: Poly::term(m.clone(), c.clone()), den: self.den.clone() }.cancel())
            .collect()
    }

    pub(crate) fn from_parts(num: Poly, den: BTreeMap<Poly, u32>) -> Frac {
        Frac { num, den }.cancel()
    }

    fn cancel(mut self) -> Frac {
        if self.num.is_zero() {
            return Frac::zero();
        }
        for (f, k) in self.den.iter_mut() {
            if !f.is_plain() {
                continue;
            }
            while *k > 0 {
                match self.num.div_exact(f) {
                    Some(q) => {
                        self.num = q;
                        *k -= 1;
                    }
                    None => break,
                }
            }
        }
        self.den.retain(|_, k| *k > 0);
        self
    }
}

fn cofactor(lcm: &BTreeMap<Poly, u32>, den: &BTreeMap<Poly, u32>) -> Poly {
    let mut out = Poly::one();
    for (f, k) in lcm {
        let have = den.get(f).copied().unwrap_or(0);
        if *k > have {
            out = out.mul(&f.pow(k - have));
        }
    }
    out
}

/// `1/p` in canonical form.
pub(crate) fn invert_poly(p: &Poly) -> Result<Frac, ExprError> {
    if let Some(c) = p.as_constant() {
        if c.is_zero() {
            return Err(ExprError::DivisionByZero);
        }
        return Ok(Frac::constant(c.recip()));
    }
    let g = p.monomial_content();
    let rest = p.div_monomial(&g);
    let mut out = invert_monomial(&g)?;
    let (content, prim) = rest.primitive();
    out = out.scale(&content.recip());
    if prim.as_constant().is_none() {
        let mut den = BTreeMap::new();
        den.insert(prim, 1);
        out = out.mul(&Frac { num: Poly::one(), den });
    }
    Ok(out)
}

fn invert_monomial(g: &Monomial) -> Result<Frac, ExprError> {
    let mut out = Frac::one();
    let mut den = BTreeMap::new();
    for (a, e) in g.atoms() {
        if a.is_plain() {
            den.insert(Poly::atom(a.clone()), e);
        } else {
            let rel = a.relation().expect("non-plain atom has a relation");
            if rel.q.is_zero() {
                return Err(ExprError::DivisionByZero);
            }
            let conj = Frac::from_poly(Poly::atom(a.clone()).sub(&rel.p));
            let f = conj.mul(&invert_poly(&rel.q)?);
            out = out.mul(&f.pow(e as i64)?);
        }
    }
    if !den.is_empty() {
        out = out.mul(&Frac { num: Poly::one(), den });
    }
    if let Some(u) = g.exponential_arg() {
        out = out.mul(&Frac::exp(&u.neg()));
    }
    for (b, s) in g.sym_pows() {
        out = out.mul(&Frac::from_poly(Poly::term(Monomial::sym_pow(b.clone(), s.neg()), Q::one())));
    }
    Ok(out)
}

fn poly_diff(p: &Poly, v: &Atom) -> Frac {
    let mut poly_part = Poly::zero();
    let mut frac_part = Frac::zero();
    let v_is_var = matches!(v.kind(), AtomKind::Var);
    for (m, c) in p.terms() {
        for (a, e) in m.atoms() {
            let ce = c * Q::from_integer(BigInt::from(e));
            match a.kind() {
                AtomKind::Var | AtomKind::Jet(_) => {
                    if a == v {
                        poly_part.add_term(m.without_one(a), ce);
                    }
                }
                AtomKind::Func { .. } => {
                    if v_is_var {
                        if let Some(pa) = a.func_partial(v.name()) {
                            poly_part.add_term(m.without_one(a).mul(&Monomial::atom(pa, 1)), ce);
                        }
                    }
                }
                AtomKind::Alg(_) => {}
                AtomKind::Sqrt(arg) => {
                    // e*(m/s)*arg'/(2s) = e*m*arg'/(2*arg)
                    let darg = poly_diff(arg, v);
                    if darg.is_zero() {
                        continue;
                    }
                    let half = ce / Q::from_integer(BigInt::from(2));
                    let inv = invert_poly(arg).expect("square-root argument is nonzero");
                    frac_part = frac_part.add(&Frac::from_poly(Poly::term(m.clone(), half)).mul(&darg).mul(&inv));
                }
            }
        }
        if let Some(u) = m.exponential_arg() {
            let du = u.diff(v);
            if !du.is_zero() {
                let t = Frac::from_poly(Poly::term(m.clone(), c.clone())).mul(&du);
                if t.den.is_empty() {
                    poly_part = poly_part.add(&t.num);
                } else {
                    frac_part = frac_part.add(&t);
                }
            }
        }
        for (b, s) in m.sym_pows() {
            let db = poly_diff(b, v);
            if db.is_zero() {
                continue;
            }
            let inv = invert_poly(b).expect("power base is nonzero");
            let t = Frac::from_poly(Poly::term(m.clone(), c.clone()).mul(s)).mul(&db).mul(&inv);
            frac_part = frac_part.add(&t);
        }
    }
    Frac::from_poly(poly_part).add(&frac_part)
}

fn visit_poly(p: &Poly, f: &mut dyn FnMut(&Atom)) {
    for (m, _) in p.terms() {
        for (a, _) in m.atoms() {
            f(a);
            match a.kind() {
                AtomKind::Sqrt(arg) => visit_poly(arg, f),
                AtomKind::Alg(rel) => {
                    visit_poly(&rel.p, f);
                    visit_poly(&rel.q, f);
                }
                _ => {}
            }
        }
        if let Some(u) = m.exponential_arg() {
            u.visit_atoms(f);
        }
        for (b, s) in m.sym_pows() {
            visit_poly(b, f);
            visit_poly(s, f);
        }
    }
}

/// `sqrt(q) = k * sqrt(s)` with `s` a square-free integer.
fn sqrt_rational(q: &Q) -> Frac {
    let n = q.numer() * q.denom();
    let (k, s) = square_split(&n);
    let coeff = Q::new(k, q.denom().clone());
    if s.is_one() {
        Frac::constant(coeff)
    } else {
        Frac::atom(Atom::sqrt(Poly::constant(Q::from_integer(s)))).scale(&coeff)
    }
}

fn square_split(n: &BigInt) -> (BigInt, BigInt) {
    let negative = n.sign() == Sign::Minus;
    let mut m = n.abs();
    let mut k = BigInt::one();
    let mut s = BigInt::one();
    let mut d = BigInt::from(2);
    let limit = BigInt::from(1_000_000u32);
    while &d * &d <= m && d < limit {
        let dd = &d * &d;
        while (&m % &dd).is_zero() {
            m /= &dd;
            k *= &d;
        }
        if (&m % &d).is_zero() {
            m /= &d;
            s *= &d;
        }
        d += 1;
    }
    s *= m;
    if negative {
        s = -s;
    }
    (k, s)
}
