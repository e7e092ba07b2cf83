//! Order reduction of a scalar ODE to a first-derivative system, and the
//! predicates that go with it.

use crate::error::{Error, Result};
use crate::expr::{Atom, Frac, Subst};
use crate::jet::{max_jet_order, split_by_atoms, OdeSystem};

/// `y^(n) = f(x, y, ..., y^(n-1))`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarOde {
    indep: String,
    dep: String,
    order: u32,
    rhs: Frac,
}

impl ScalarOde {
    pub fn new(indep: &str, dep: &str, order: u32, rhs: Frac) -> Result<ScalarOde> {
        if order == 0 {
            return Err(Error::invalid("order must be positive"));
        }
        if max_jet_order(&rhs, &[dep.to_string()]) >= order {
            return Err(Error::invalid(format!("right-hand side {rhs} reaches order {order}")));
        }
        Ok(ScalarOde { indep: indep.to_string(), dep: dep.to_string(), order, rhs })
    }

    pub fn indep(&self) -> &str {
        &self.indep
    }

    pub fn dep(&self) -> &str {
        &self.dep
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn rhs(&self) -> &Frac {
        &self.rhs
    }

    fn jets(&self, upto: u32) -> Vec<Atom> {
        (0..upto).map(|k| Atom::jet(self.dep.clone(), k)).collect()
    }

    /// Coefficients of `y, y', ..., y^(n-1)` followed by the free term, when
    /// the right-hand side is linear with coefficients free of `y`.
    fn linear_coefficients(&self) -> Result<(Vec<Frac>, Frac)> {
        let n = self.order as usize;
        let parts = split_by_atoms(&self.rhs, &self.jets(self.order))
            .map_err(|_| Error::invalid(format!("{} is not linear in {} and its derivatives", self.rhs, self.dep)))?;
        let mut coeffs = vec![Frac::zero(); n];
        let mut free = Frac::zero();
        for (exps, c) in parts {
            match exps.iter().sum::<u32>() {
                0 => free = c,
                1 => coeffs[exps.iter().position(|&k| k == 1).unwrap()] = c,
                _ => {
                    return Err(Error::invalid(format!(
                        "{} is not linear in {} and its derivatives",
                        self.rhs, self.dep
                    )))
                }
            }
        }
        Ok((coeffs, free))
    }
}

/// Name for the new dependent: `z` unless taken.
fn fresh_name(ode: &ScalarOde) -> String {
    ["z", "w", "v", "u"].iter().find(|n| **n != ode.dep && **n != ode.indep).unwrap().to_string()
}

/// `y^(n-1) = z^(n-2)`, `z^(n-1) = f` with every `y^(k)` (k >= 1) written as
/// `z^(k-1)`.
pub fn scalar_to_system(ode: &ScalarOde) -> Result<OdeSystem> {
    let n = ode.order;
    if n < 3 {
        return Err(Error::invalid(format!("order reduction needs order at least 3, got {n}")));
    }
    let z = fresh_name(ode);
    let mut s = Subst::new();
    for k in 1..n {
        s = s.bind_jet(&ode.dep, k, Frac::jet(&z, k - 1));
    }
    let f = s.apply(&ode.rhs)?;
    OdeSystem::new(&ode.indep, &[&ode.dep, &z], n - 1, vec![Frac::jet(&z, n - 2), f])
}

/// Linear with vanishing `y^(n-1)` and `y^(n-2)` coefficients.
pub fn is_laguerre_form(ode: &ScalarOde) -> Result<bool> {
    let (coeffs, _) = ode.linear_coefficients()?;
    let n = ode.order as usize;
    Ok(coeffs[n - 1].is_zero() && (n < 2 || coeffs[n - 2].is_zero()))
}

/// `t = phi(x,y,z)`, `u = psi(x,y,z)`, `v = omega(x,y,z)`.
#[derive(Clone, Debug)]
pub struct TripleMap {
    pub phi: Frac,
    pub psi: Frac,
    pub omega: Frac,
}

/// Numerator of `omega*D(phi) - D(psi)` with `D = d_x + z d_y + z' d_z`.
///
/// Zero exactly when the map satisfies the contact condition `v = du/dt`.
pub fn contact_residual(map: &TripleMap) -> Frac {
    let z = Frac::var("z");
    let zp = Frac::jet("z", 1);
    let d = |f: &Frac| f.diff_var("x").add(&z.mul(&f.diff_var("y"))).add(&zp.mul(&f.diff_var("z")));
    let r = map.omega.mul(&d(&map.phi)).sub(&d(&map.psi));
    Frac::from_poly(r.num().clone())
}

/// Split of `y''' = delta + sigma*y + alpha*y' + beta*y''`.
#[derive(Clone, Debug)]
pub struct LinearThirdOrder {
    pub delta: Frac,
    pub sigma: Frac,
    pub alpha: Frac,
    pub beta: Frac,
    /// `delta = sigma = 0`.
    pub eligible: bool,
    /// `{y'' = z', z'' = alpha*y' + beta*z'}` when eligible.
    pub system: Option<OdeSystem>,
}

pub fn classify_linear_third_order(ode: &ScalarOde) -> Result<LinearThirdOrder> {
    if ode.order != 3 {
        return Err(Error::invalid(format!("expected a third-order equation, got order {}", ode.order)));
    }
    let (c, delta) = ode.linear_coefficients()?;
    let (sigma, alpha, beta) = (c[0].clone(), c[1].clone(), c[2].clone());
    let eligible = delta.is_zero() && sigma.is_zero();
    let system = if eligible {
        let z = fresh_name(ode);
        let f = alpha.mul(&Frac::jet(&ode.dep, 1)).add(&beta.mul(&Frac::jet(&z, 1)));
        Some(OdeSystem::new(&ode.indep, &[&ode.dep, &z], 2, vec![Frac::jet(&z, 1), f])?)
    } else {
        None
    };
    Ok(LinearThirdOrder { delta, sigma, alpha, beta, eligible, system })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn f(s: &str) -> Frac {
        parse(s).unwrap().to_frac().unwrap()
    }

    fn ode(n: u32, rhs: &str) -> ScalarOde {
        ScalarOde::new("x", "y", n, f(rhs)).unwrap()
    }

    fn system(rhs: &[&str], n: u32) -> OdeSystem {
        OdeSystem::new("x", &["y", "z"], n, rhs.iter().map(|r| f(r)).collect()).unwrap()
    }

    #[test]
    fn reduces_order() {
        assert_eq!(scalar_to_system(&ode(3, "0")).unwrap(), system(&["z'", "0"], 2));
        assert_eq!(
            scalar_to_system(&ode(3, "delta(x) + sigma(x)*y + alpha(x)*y' + beta(x)*y''")).unwrap(),
            system(&["z'", "delta(x) + sigma(x)*y + alpha(x)*z + beta(x)*z'"], 2)
        );
        assert_eq!(scalar_to_system(&ode(4, "y'''")).unwrap(), system(&["z''", "z''"], 3));
        assert!(scalar_to_system(&ode(2, "y")).is_err());
    }

    #[test]
    fn polynomial_solution_carries_over() {
        // y = x^3 solves y''' = 6; then z = 3x^2 and the reduced equations hold.
        let sys = scalar_to_system(&ode(3, "6")).unwrap();
        let sol = Subst::new()
            .bind("y", f("x^3"))
            .bind("z", f("3*x^2"))
            .bind_jet("y", 2, f("6*x"))
            .bind_jet("z", 1, f("6*x"))
            .bind_jet("z", 2, f("6"));
        assert!(sol.apply(&f("y'' - z'")).unwrap().is_zero());
        assert!(sol.apply(&f("z''").sub(&sys.rhs()[1])).unwrap().is_zero());
    }

    #[test]
    fn laguerre_predicate() {
        assert!(is_laguerre_form(&ode(3, "-k0(x)*y")).unwrap());
        assert!(!is_laguerre_form(&ode(3, "-y'")).unwrap());
        assert!(!is_laguerre_form(&ode(3, "-y''")).unwrap());
        assert!(is_laguerre_form(&ode(3, "y*y'")).is_err());
    }

    #[test]
    fn contact_condition() {
        let id = TripleMap { phi: f("x"), psi: f("y"), omega: f("z") };
        assert!(contact_residual(&id).is_zero());
        let sq = TripleMap { phi: f("x"), psi: f("y^2"), omega: f("z") };
        assert_eq!(contact_residual(&sq), f("z - 2*y*z"));
    }

    #[test]
    fn third_order_classification() {
        let c = classify_linear_third_order(&ode(3, "alpha(x)*y' + beta(x)*y''")).unwrap();
        assert!(c.eligible);
        assert_eq!(c.system.unwrap(), system(&["z'", "alpha(x)*y' + beta(x)*z'"], 2));
        let c = classify_linear_third_order(&ode(3, "y")).unwrap();
        assert!(!c.eligible && c.sigma.is_one());
        let c = classify_linear_third_order(&ode(3, "1")).unwrap();
        assert!(!c.eligible && c.delta.is_one());
        assert!(classify_linear_third_order(&ode(4, "0")).is_err());
        assert!(classify_linear_third_order(&ode(3, "y'^2")).is_err());
    }
}
