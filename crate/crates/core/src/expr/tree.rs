use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive};

use super::atom::{Atom, AtomKind, Relation};
use super::frac::Frac;
use super::poly::{Monomial, Poly};
use super::{ExprError, Q};

/// Unnormalized expression tree, as produced by the parser and consumed by
/// the printer.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(Q),
    Var(String),
    /// Derivative coordinate `name^(order)`; order 0 is the variable itself.
    Jet(String, u32),
    /// Unknown function with partial-derivative orders aligned with `args`.
    Func {
        name: String,
        args: Vec<String>,
        derivs: Vec<u32>,
    },
    Alg {
        name: String,
        relation: Arc<Relation>,
    },
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
    Sqrt(Box<Expr>),
}

impl Expr {
    pub fn int(n: i64) -> Expr {
        Expr::Num(Q::from_integer(BigInt::from(n)))
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn neg(self) -> Expr {
        match self {
            Expr::Num(q) => Expr::Num(-q),
            e => Expr::Product(vec![Expr::int(-1), e]),
        }
    }

    /// Converts to canonical form.
    pub fn to_frac(&self) -> Result<Frac, ExprError> {
        Ok(match self {
            Expr::Num(q) => Frac::constant(q.clone()),
            Expr::Var(n) => Frac::var(n),
            Expr::Jet(n, k) => Frac::jet(n, *k),
            Expr::Func { name, args, derivs } => {
                Frac::atom(Atom::func_derivative(name.clone(), args.clone(), derivs.clone()))
            }
            Expr::Alg { name, relation } => Frac::atom(Atom::alg(name.clone(), (**relation).clone())),
            Expr::Sum(ts) => {
                let mut acc = Frac::zero();
                for t in ts {
                    acc = acc.add(&t.to_frac()?);
                }
                acc
            }
            Expr::Product(fs) => {
                let mut acc = Frac::one();
                for f in fs {
                    acc = acc.mul(&f.to_frac()?);
                }
                acc
            }
            Expr::Pow(b, e) => {
                if let (Expr::Pow(inner, k1), Expr::Num(k2)) = (&**b, &**e) {
                    if let Expr::Num(k1) = &**k1 {
                        if k1.is_integer() && k2.is_integer() {
                            return Expr::Pow(inner.clone(), Box::new(Expr::Num(k1 * k2))).to_frac();
                        }
                    }
                }
                let base = b.to_frac()?;
                let exponent = e.to_frac()?;
                match exponent.as_constant() {
                    Some(k) if k.is_integer() => {
                        let k =
                            k.to_integer().to_i64().ok_or_else(|| ExprError::Invalid("exponent too large".into()))?;
                        base.pow(k)?
                    }
                    Some(_) => return Err(ExprError::Invalid("non-integer exponent".into())),
                    None => Frac::sym_pow(&base, &exponent)?,
                }
            }
            Expr::Exp(a) => Frac::exp(&a.to_frac()?),
            Expr::Sqrt(a) => Frac::sqrt(&a.to_frac()?)?,
        })
    }

    pub fn normalize(&self) -> Result<Expr, ExprError> {
        Ok(self.to_frac()?.to_expr())
    }

    /// Printer that omits unknown-function argument lists (`xi_{,yy}`).
    pub fn compact(&self) -> Compact<'_> {
        Compact(self)
    }
}

impl Frac {
    pub fn to_expr(&self) -> Expr {
        let num = poly_to_expr(self.num());
        if !self.has_denominator() {
            return num;
        }
        let mut factors = match num {
            Expr::Product(fs) => fs,
            Expr::Num(q) if q.is_one() => vec![],
            e => vec![e],
        };
        for (f, k) in self.den_factors() {
            factors.push(Expr::Pow(Box::new(poly_to_expr(f)), Box::new(Expr::int(-(k as i64)))));
        }
        Expr::Product(factors)
    }

    pub fn compact(&self) -> String {
        self.to_expr().compact().to_string()
    }
}

impl fmt::Display for Frac {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_expr())
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", poly_to_expr(self))
    }
}

impl From<&Atom> for Expr {
    fn from(a: &Atom) -> Expr {
        match a.kind() {
            AtomKind::Var => Expr::Var(a.name().to_string()),
            AtomKind::Jet(k) => Expr::Jet(a.name().to_string(), *k),
            AtomKind::Func { args, derivs } => {
                Expr::Func { name: a.name().to_string(), args: args.clone(), derivs: derivs.clone() }
            }
            AtomKind::Alg(r) => Expr::Alg { name: a.name().to_string(), relation: r.clone() },
            AtomKind::Sqrt(arg) => Expr::Sqrt(Box::new(poly_to_expr(arg))),
        }
    }
}

pub(crate) fn poly_to_expr(p: &Poly) -> Expr {
    let mut terms: Vec<(&Monomial, &Q)> = p.terms().collect();
    // Highest degree first; ties keep the canonical atom order.
    terms.sort_by(|a, b| b.0.degree().cmp(&a.0.degree()).then_with(|| a.0.cmp(b.0)));
    let mut out: Vec<Expr> = terms.into_iter().map(|(m, c)| term_to_expr(m, c)).collect();
    match out.len() {
        0 => Expr::int(0),
        1 => out.pop().unwrap(),
        _ => Expr::Sum(out),
    }
}

fn term_to_expr(m: &Monomial, c: &Q) -> Expr {
    let mut factors = Vec::new();
    for (a, e) in m.atoms() {
        let base = Expr::from(a);
        factors.push(if e == 1 { base } else { Expr::Pow(Box::new(base), Box::new(Expr::int(e as i64))) });
    }
    if let Some(u) = m.exponential_arg() {
        factors.push(Expr::Exp(Box::new(u.to_expr())));
    }
    for (b, s) in m.sym_pows() {
        factors.push(Expr::Pow(Box::new(poly_to_expr(b)), Box::new(poly_to_expr(s))));
    }
    if factors.is_empty() {
        return Expr::Num(c.clone());
    }
    if c.is_one() && factors.len() == 1 {
        return factors.pop().unwrap();
    }
    if !c.is_one() {
        factors.insert(0, Expr::Num(c.clone()));
    }
    Expr::Product(factors)
}

// ---------------------------------------------------------------------------
// Printing

const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_POW: u8 = 3;
const PREC_ATOM: u8 = 4;

pub struct Compact<'a>(&'a Expr);

impl fmt::Display for Compact<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        Printer { fn_args: false }.write(self.0, &mut s, 0);
        f.write_str(&s)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        Printer { fn_args: true }.write(self, &mut s, 0);
        f.write_str(&s)
    }
}

struct Printer {
    fn_args: bool,
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Sum(ts) if ts.len() > 1 => PREC_SUM,
        Expr::Sum(ts) if ts.len() == 1 => prec(&ts[0]),
        Expr::Product(fs) if fs.len() == 1 => prec(&fs[0]),
        Expr::Product(_) => PREC_PRODUCT,
        Expr::Num(q) if q.is_negative() || !q.is_integer() => PREC_PRODUCT,
        Expr::Pow(..) => PREC_POW,
        _ => PREC_ATOM,
    }
}

fn is_negative_term(e: &Expr) -> bool {
    match e {
        Expr::Num(q) => q.is_negative(),
        Expr::Product(fs) => matches!(fs.first(), Some(Expr::Num(q)) if q.is_negative()),
        _ => false,
    }
}

fn negate_term(e: &Expr) -> Expr {
    match e {
        Expr::Num(q) => Expr::Num(-q.clone()),
        Expr::Product(fs) => {
            let mut fs = fs.clone();
            if let Some(Expr::Num(q)) = fs.first_mut() {
                *q = -q.clone();
                if q.is_one() && fs.len() > 1 {
                    fs.remove(0);
                }
            }
            if fs.len() == 1 {
                fs.pop().unwrap()
            } else {
                Expr::Product(fs)
            }
        }
        e => e.clone().neg(),
    }
}

fn write_num(q: &Q, out: &mut String) {
    if q.is_integer() {
        out.push_str(&q.numer().to_string());
    } else {
        out.push_str(&format!("{}/{}", q.numer(), q.denom()));
    }
}

impl Printer {
    fn write(&self, e: &Expr, out: &mut String, min_prec: u8) {
        if prec(e) < min_prec {
            out.push('(');
            self.write(e, out, 0);
            out.push(')');
            return;
        }
        match e {
            Expr::Num(q) => write_num(q, out),
            Expr::Var(n) => out.push_str(n),
            Expr::Jet(n, k) => {
                if *k <= 4 {
                    out.push_str(n);
                    for _ in 0..*k {
                        out.push('\'');
                    }
                } else {
                    out.push_str(&format!("D({n}, x, {k})"));
                }
            }
            Expr::Func { name, args, derivs } => {
                out.push_str(name);
                if derivs.iter().any(|d| *d > 0) {
                    let multi = args.iter().any(|a| a.len() > 1);
                    let mut parts = Vec::new();
                    for (a, d) in args.iter().zip(derivs) {
                        for _ in 0..*d {
                            parts.push(a.as_str());
                        }
                    }
                    out.push_str("_{,");
                    out.push_str(&parts.join(if multi { "," } else { "" }));
                    out.push('}');
                }
                if self.fn_args {
                    out.push('(');
                    out.push_str(&args.join(","));
                    out.push(')');
                }
            }
            Expr::Alg { name, .. } => out.push_str(name),
            Expr::Exp(a) => {
                out.push_str("exp(");
                self.write(a, out, 0);
                out.push(')');
            }
            Expr::Sqrt(a) => {
                out.push_str("sqrt(");
                self.write(a, out, 0);
                out.push(')');
            }
            Expr::Sum(ts) => {
                if ts.is_empty() {
                    out.push('0');
                }
                for (i, t) in ts.iter().enumerate() {
                    if i == 0 {
                        self.write(t, out, PREC_PRODUCT);
                    } else if is_negative_term(t) {
                        out.push_str(" - ");
                        self.write(&negate_term(t), out, PREC_PRODUCT);
                    } else {
                        out.push_str(" + ");
                        self.write(t, out, PREC_PRODUCT);
                    }
                }
            }
            Expr::Product(fs) => self.write_product(fs, out),
            Expr::Pow(b, x) => {
                self.write(b, out, PREC_ATOM);
                out.push('^');
                match &**x {
                    Expr::Num(q) if q.is_integer() && !q.is_negative() => write_num(q, out),
                    x if prec(x) == PREC_ATOM => self.write(x, out, PREC_ATOM),
                    x => {
                        out.push('(');
                        self.write(x, out, 0);
                        out.push(')');
                    }
                }
            }
        }
    }

    fn write_product(&self, fs: &[Expr], out: &mut String) {
        if fs.is_empty() {
            out.push('1');
            return;
        }
        if fs.len() == 1 {
            self.write(&fs[0], out, 0);
            return;
        }
        let (mut coeff, rest) = match &fs[0] {
            Expr::Num(q) => (q.clone(), &fs[1..]),
            _ => (Q::one(), fs),
        };
        let mut numer = Vec::new();
        let mut denom = Vec::new();
        for f in rest {
            match f {
                Expr::Pow(b, x) => match &**x {
                    Expr::Num(q) if q.is_integer() && q.is_negative() => {
                        let k = -q.clone();
                        denom.push(if k.is_one() {
                            (**b).clone()
                        } else {
                            Expr::Pow(b.clone(), Box::new(Expr::Num(k)))
                        });
                    }
                    _ => numer.push(f),
                },
                _ => numer.push(f),
            }
        }
        if coeff.is_negative() {
            out.push('-');
            coeff = -coeff;
        }
        let mut wrote = false;
        if !coeff.is_one() || numer.is_empty() {
            write_num(&coeff, out);
            wrote = true;
        }
        for f in numer {
            if wrote {
                out.push('*');
            }
            self.write(f, out, PREC_POW);
            wrote = true;
        }
        match denom.len() {
            0 => {}
            // Chained division keeps each factor separate on re-parsing.
            _ => {
                for d in &denom {
                    out.push('/');
                    self.write(d, out, PREC_POW);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prints_products_and_quotients() {
        let e = Expr::Product(vec![
            Expr::Num(Q::new(BigInt::from(1), BigInt::from(2))),
            Expr::Pow(Box::new(Expr::var("z")), Box::new(Expr::int(2))),
        ]);
        assert_eq!(e.to_string(), "1/2*z^2");
        let q = Expr::Product(vec![
            Expr::var("x"),
            Expr::Pow(Box::new(Expr::Sum(vec![Expr::var("x"), Expr::var("c")])), Box::new(Expr::int(-1))),
        ]);
        assert_eq!(q.to_string(), "x/(x + c)");
    }

    #[test]
    fn prints_sums_with_minus() {
        let e = Expr::Sum(vec![Expr::Jet("y".into(), 2), Expr::Jet("z".into(), 1).neg()]);
        assert_eq!(e.to_string(), "y'' - z'");
    }

    #[test]
    fn prints_partials_with_comma_subscripts() {
        let e = Expr::Func { name: "xi".into(), args: vec!["x".into(), "y".into(), "z".into()], derivs: vec![0, 2, 0] };
        assert_eq!(e.to_string(), "xi_{,yy}(x,y,z)");
        assert_eq!(e.compact().to_string(), "xi_{,yy}");
    }
}
