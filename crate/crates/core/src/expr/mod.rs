//! Exact symbolic expressions.
//!
//! [`Expr`] is the tree the parser produces and the printer consumes;
//! [`Frac`] is the canonical normal form everything else computes with.

pub mod atom;
pub mod frac;
mod parse;
pub mod poly;
mod subst;
mod tree;

pub use atom::{Atom, AtomKind, Relation};
pub use frac::Frac;
pub use parse::{parse_with, Symbols};
pub use poly::{Monomial, Poly};
pub use subst::Subst;
pub use tree::{Compact, Expr};

pub type Q = num_rational::BigRational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unknown token '{token}' at {line}:{col}")]
    UnknownToken { token: String, line: usize, col: usize },
    #[error("exponent at {line}:{col} is neither an integer nor a declared symbolic constant")]
    BadExponent { line: usize, col: usize },
    #[error("division by zero")]
    DivisionByZero,
    #[error("{0}")]
    Invalid(String),
}

/// Parses with no declared exponents, algebraic constants or functions.
pub fn parse(text: &str) -> Result<Expr, ExprError> {
    parse_with(text, &Symbols::default())
}

/// Canonical form of `e`. Only a zero denominator can fail.
pub fn normalize(e: &Expr) -> Result<Expr, ExprError> {
    e.normalize()
}

pub fn diff(e: &Expr, v: &Atom) -> Result<Expr, ExprError> {
    Ok(e.to_frac()?.diff(v).to_expr())
}

pub fn substitute(e: &Expr, bindings: &Subst) -> Result<Expr, ExprError> {
    Ok(bindings.apply(&e.to_frac()?)?.to_expr())
}

pub fn is_zero(e: &Expr) -> Result<bool, ExprError> {
    Ok(e.to_frac()?.is_zero())
}

/// Rational from an integer pair.
pub fn q(n: i64, d: i64) -> Q {
    Q::new(n.into(), d.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(s: &str) -> Frac {
        parse(s).unwrap().to_frac().unwrap()
    }

    fn zero(s: &str) -> bool {
        is_zero(&parse(s).unwrap()).unwrap()
    }

    #[test]
    fn normal_form_identities() {
        assert!(zero("(y+z)^2 - y^2 - 2*y*z - z^2"));
        assert!(zero("sqrt(a0)*sqrt(a0) - a0"));
        assert!(zero("(x+1)^2 - x^2 - 2*x - 1"));
        assert!(zero("exp(x)*exp(-x) - 1"));
        assert!(zero("exp(0) - 1"));
        assert!(!zero("x*y - y*x + 1"));
    }

    #[test]
    fn algebraic_constant_never_squared() {
        let a0 = f("alpha0");
        let rel = Relation { p: a0.num().clone(), q: a0.num().clone() };
        let syms = Symbols::default().with_algebraic("alpha1", rel);
        let e = parse_with("alpha1^2 - alpha0*alpha1 - alpha0", &syms).unwrap();
        assert!(is_zero(&e).unwrap());
        let cube = parse_with("alpha1^3", &syms).unwrap().to_frac().unwrap();
        assert!(cube.num().terms().all(|(m, _)| m.atoms().all(|(a, k)| a.name() != "alpha1" || k < 2)));
    }

    #[test]
    fn radical_form_satisfies_the_quadratic() {
        // (a + sqrt(a^2 + 4a))/2 is a root of c^2 = a*c + a.
        let c = f("(alpha0 + sqrt(alpha0^2 + 4*alpha0))/2");
        let a = f("alpha0");
        let r = c.mul(&c).sub(&a.mul(&c)).sub(&a);
        assert!(r.is_zero());
    }

    #[test]
    fn spec_derivatives() {
        let x = Atom::var("x");
        let z = Atom::var("z");
        assert_eq!(f("x*z^2").diff(&z), f("2*x*z"));
        assert_eq!(f("exp(sqrt(alpha0)*x)").diff(&x), f("sqrt(alpha0)*exp(sqrt(alpha0)*x)"));
        let y = Atom::var("y");
        assert_eq!(f("a4(x,y)").diff(&y), f("a4_{,y}(x,y)"));
    }

    #[test]
    fn printing_round_trips() {
        for s in [
            "1/2*z^2*exp(-sqrt(alpha0)*x)/sqrt(alpha0) - x*y",
            "xi_{,xz}(x,y,z) - 2*eta1_{,yz}(x,y,z) + y'^3",
            "(x + 1)^(-2) - y/(x^2 + c)",
            "D(y, x, 6) + y''''",
        ] {
            let e = f(s);
            let printed = e.to_string();
            assert_eq!(f(&printed), e, "{s} printed as {printed}");
        }
    }

    #[test]
    fn printed_forms_are_readable() {
        assert_eq!(f("z*x/2 - y").to_string(), "1/2*x*z - y");
        assert_eq!(f("-exp(-x)").to_string(), "-exp(-x)");
        assert_eq!(f("x/(x+c)^2").to_string(), "x/(c + x)^2");
        assert_eq!(f("1/((x+1)*y)").to_string(), "1/(x + 1)/y");
        assert_eq!(f("1/(x+1)/y").to_string(), "1/(x + 1)/y");
    }
}
