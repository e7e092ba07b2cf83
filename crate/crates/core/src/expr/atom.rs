use std::sync::Arc;

use super::poly::Poly;

/// An indivisible symbol of the polynomial normal form.
///
/// Atoms order by name first, then by kind, so `y < y' < y''` and the
/// partials of an unknown function sort after the function itself.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    name: String,
    kind: AtomKind,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AtomKind {
    /// Independent variable, dependent variable or free parameter.
    Var,
    /// Derivative coordinate of order >= 1.
    Jet(u32),
    /// Opaque function of plain variables with partial-derivative orders
    /// aligned with `args`.
    Func { args: Vec<String>, derivs: Vec<u32> },
    /// Named algebraic constant `c` with `c^2 = p*c + q`.
    Alg(Arc<Relation>),
    /// Square root of a polynomial; behaves as an algebraic constant with
    /// `s^2 = arg`.
    Sqrt(Arc<Poly>),
}

/// Monic quadratic relation `c^2 = p*c + q`; `p` and `q` only involve
/// constants declared before `c`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Relation {
    pub p: Poly,
    pub q: Poly,
}

impl Atom {
    pub fn var(name: impl Into<String>) -> Atom {
        Atom { name: name.into(), kind: AtomKind::Var }
    }

    /// Jet coordinate; order 0 is the variable itself.
    pub fn jet(name: impl Into<String>, order: u32) -> Atom {
        if order == 0 {
            Atom::var(name)
        } else {
            Atom { name: name.into(), kind: AtomKind::Jet(order) }
        }
    }

    pub fn func(name: impl Into<String>, args: Vec<String>) -> Atom {
        let derivs = vec![0; args.len()];
        Atom { name: name.into(), kind: AtomKind::Func { args, derivs } }
    }

    pub fn func_derivative(name: impl Into<String>, args: Vec<String>, derivs: Vec<u32>) -> Atom {
        assert_eq!(args.len(), derivs.len());
        Atom { name: name.into(), kind: AtomKind::Func { args, derivs } }
    }

    pub fn alg(name: impl Into<String>, relation: Relation) -> Atom {
        Atom { name: name.into(), kind: AtomKind::Alg(Arc::new(relation)) }
    }

    pub(crate) fn sqrt(arg: Poly) -> Atom {
        Atom { name: "sqrt".into(), kind: AtomKind::Sqrt(Arc::new(arg)) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &AtomKind {
        &self.kind
    }

    pub fn jet_order(&self) -> Option<u32> {
        match self.kind {
            AtomKind::Var => Some(0),
            AtomKind::Jet(k) => Some(k),
            _ => None,
        }
    }

    pub fn is_jet(&self) -> bool {
        matches!(self.kind, AtomKind::Jet(_))
    }

    /// Var, Jet and Func atoms carry no rewrite rule.
    pub fn is_plain(&self) -> bool {
        matches!(self.kind, AtomKind::Var | AtomKind::Jet(_) | AtomKind::Func { .. })
    }

    /// The quadratic rewrite rule, when the atom has one.
    pub fn relation(&self) -> Option<Relation> {
        match &self.kind {
            AtomKind::Alg(r) => Some((**r).clone()),
            AtomKind::Sqrt(arg) => Some(Relation { p: Poly::zero(), q: (**arg).clone() }),
            _ => None,
        }
    }

    /// Partial derivative of an unknown-function atom with respect to `var`,
    /// or `None` when the function does not depend on it.
    pub(crate) fn func_partial(&self, var: &str) -> Option<Atom> {
        match &self.kind {
            AtomKind::Func { args, derivs } => {
                let i = args.iter().position(|a| a == var)?;
                let mut derivs = derivs.clone();
                derivs[i] += 1;
                Some(Atom { name: self.name.clone(), kind: AtomKind::Func { args: args.clone(), derivs } })
            }
            _ => None,
        }
    }
}
