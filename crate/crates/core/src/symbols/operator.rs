//! Full symbol `p2 = g^{jk}(x) xi_j xi_k` and subprincipal symbol `q`.

use super::{Jet, Support, Symbol, SymbolClass};
use crate::error::{Error, Result};
use crate::geometry::Cometric;
use crate::linalg::{dot, matvec, quad_form};

#[derive(Debug, Clone)]
pub struct PrincipalSymbol {
    g: Cometric,
}

pub fn principal_symbol(g: &Cometric) -> PrincipalSymbol {
    PrincipalSymbol { g: g.clone() }
}

impl PrincipalSymbol {
    pub fn cometric(&self) -> &Cometric {
        &self.g
    }
}

impl Symbol for PrincipalSymbol {
    fn dim(&self) -> usize {
        self.g.dim()
    }
    fn name(&self) -> String {
        "p2".into()
    }
    fn jet(&self, x: &[f64], xi: &[f64]) -> Jet {
        let jet = self.g.jet(x, 1);
        Jet {
            value: quad_form(&jet.g, xi),
            dx: jet.dg.iter().map(|d| quad_form(d, xi)).collect(),
            dxi: matvec(&jet.g, xi).into_iter().map(|c| 2.0 * c).collect(),
        }
    }
    fn value(&self, x: &[f64], xi: &[f64]) -> f64 {
        quad_form(&self.g.at(x), xi)
    }
    fn support(&self) -> Support {
        Support {
            xi_polynomial: true,
            ..Support::default()
        }
    }
    fn class(&self) -> SymbolClass {
        SymbolClass { k: 2.0, l: 0.0 }
    }
}

/// `q(h; x, xi) = h^{-1} u(x) . xi + u_0(x) + (1/4) sum_{jk} d_j d_k g^{jk}(x)`.
#[derive(Debug, Clone)]
pub struct SubprincipalSymbol {
    g: Cometric,
    h: f64,
}

pub fn subprincipal_symbol(g: &Cometric, h: f64) -> Result<SubprincipalSymbol> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("h must be positive, got {h}")));
    }
    if g.trace_hessian(&vec![0.0; g.dim()]).1.is_none() {
        return Err(Error::UnsupportedFamily(
            "subprincipal symbol needs third derivatives of the cometric".into(),
        ));
    }
    Ok(SubprincipalSymbol { g: g.clone(), h })
}

impl SubprincipalSymbol {
    /// The three terms `(h^{-1} u . xi, u_0, (1/4) trace)` separately.
    pub fn terms(&self, x: &[f64], xi: &[f64]) -> [f64; 3] {
        let (u, _) = self.g.first_order(x);
        let (u0, _) = self.g.zeroth_order(x);
        let (tr, _) = self.g.trace_hessian(x);
        [dot(&u, xi) / self.h, u0, 0.25 * tr]
    }
}

impl Symbol for SubprincipalSymbol {
    fn dim(&self) -> usize {
        self.g.dim()
    }
    fn name(&self) -> String {
        format!("q(h={})", self.h)
    }
    fn jet(&self, x: &[f64], xi: &[f64]) -> Jet {
        let n = self.g.dim();
        let (u, du) = self.g.first_order(x);
        let (u0, du0) = self.g.zeroth_order(x);
        let (tr, dtr) = self.g.trace_hessian(x);
        let dtr = dtr.expect("checked at construction");
        Jet {
            value: dot(&u, xi) / self.h + u0 + 0.25 * tr,
            dx: (0..n)
                .map(|l| dot(&du[l], xi) / self.h + du0[l] + 0.25 * dtr[l])
                .collect(),
            dxi: u.iter().map(|c| c / self.h).collect(),
        }
    }
    fn support(&self) -> Support {
        Support {
            xi_polynomial: true,
            ..Support::default()
        }
    }
    fn class(&self) -> SymbolClass {
        SymbolClass {
            k: 1.0,
            l: -self.g.mu(),
        }
    }
}
