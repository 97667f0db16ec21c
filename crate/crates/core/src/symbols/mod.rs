//! Phase-space symbols with analytic first derivatives.

mod cutoff;
mod operator;
pub mod reference;
mod seminorm;

pub use cutoff::{
    CutoffParams, Ladder, Localizer, LocalizerFactors, MomentumCutoff, Nesting, Observable,
    ObservableZero, Rung,
};
pub use operator::{principal_symbol, subprincipal_symbol, PrincipalSymbol, SubprincipalSymbol};
pub use seminorm::{seminorm_estimate, SeminormEntry, SeminormReport};

use std::sync::Arc;

use crate::linalg::dot;
use crate::smooth::window_jet;

/// Value and first derivatives of a symbol at a phase-space point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub dx: Vec<f64>,
    pub dxi: Vec<f64>,
}

impl Jet {
    pub fn zero(n: usize) -> Self {
        Jet {
            value: 0.0,
            dx: vec![0.0; n],
            dxi: vec![0.0; n],
        }
    }

    pub fn constant(value: f64, n: usize) -> Self {
        Jet {
            value,
            ..Jet::zero(n)
        }
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        Jet {
            value: self.value * other.value,
            dx: self
                .dx
                .iter()
                .zip(&other.dx)
                .map(|(a, b)| a * other.value + self.value * b)
                .collect(),
            dxi: self
                .dxi
                .iter()
                .zip(&other.dxi)
                .map(|(a, b)| a * other.value + self.value * b)
                .collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Jet {
        Jet {
            value: self.value * s,
            dx: self.dx.iter().map(|v| v * s).collect(),
            dxi: self.dxi.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Jet) -> Jet {
        Jet {
            value: self.value + other.value,
            dx: self.dx.iter().zip(&other.dx).map(|(a, b)| a + b).collect(),
            dxi: self.dxi.iter().zip(&other.dxi).map(|(a, b)| a + b).collect(),
        }
    }
}

/// `{a, b} = d_xi a . d_x b - d_x a . d_xi b`, the derivative of `b` along the
/// Hamilton flow of `a`.
pub fn poisson(a: &Jet, b: &Jet) -> f64 {
    dot(&a.dxi, &b.dx) - dot(&a.dx, &b.dxi)
}

pub fn poisson_bracket(a: &dyn Symbol, b: &dyn Symbol, x: &[f64], xi: &[f64]) -> f64 {
    poisson(&a.jet(x, xi), &b.jet(x, xi))
}

/// Bounding region outside of which a symbol vanishes identically.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct Support {
    /// Zero for `max_i |x_i| > x_box`.
    pub x_box: Option<f64>,
    /// Zero for `|xi| > xi_radius`.
    pub xi_radius: Option<f64>,
    /// Polynomial in `xi`: quantized exactly on any grid, so the momentum
    /// margin does not apply.
    pub xi_polynomial: bool,
}

/// Symbol class `S^{k, l}`: `|d_x^a d_xi^b s| <= C <x>^{l - |a|} <xi>^{k - |b|}`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SymbolClass {
    pub k: f64,
    pub l: f64,
}

pub trait Symbol: Send + Sync {
    fn dim(&self) -> usize;
    fn name(&self) -> String;
    fn jet(&self, x: &[f64], xi: &[f64]) -> Jet;

    fn value(&self, x: &[f64], xi: &[f64]) -> f64 {
        self.jet(x, xi).value
    }

    fn support(&self) -> Support {
        Support::default()
    }

    /// Closed set outside which the symbol is exactly zero.
    fn in_support(&self, _x: &[f64], _xi: &[f64]) -> bool {
        true
    }

    fn class(&self) -> SymbolClass;
}

pub type SharedSymbol = Arc<dyn Symbol>;

impl<S: Symbol + ?Sized> Symbol for Arc<S> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn name(&self) -> String {
        (**self).name()
    }
    fn jet(&self, x: &[f64], xi: &[f64]) -> Jet {
        (**self).jet(x, xi)
    }
    fn value(&self, x: &[f64], xi: &[f64]) -> f64 {
        (**self).value(x, xi)
    }
    fn support(&self) -> Support {
        (**self).support()
    }
    fn in_support(&self, x: &[f64], xi: &[f64]) -> bool {
        (**self).in_support(x, xi)
    }
    fn class(&self) -> SymbolClass {
        (**self).class()
    }
}

type JetFn = dyn Fn(&[f64], &[f64]) -> Jet + Send + Sync;

/// Symbol from a closure returning the value and the analytic gradient.
pub struct FnSymbol {
    n: usize,
    name: String,
    f: Box<JetFn>,
    support: Support,
    class: SymbolClass,
}

impl FnSymbol {
    pub fn new(
        n: usize,
        name: impl Into<String>,
        class: SymbolClass,
        f: impl Fn(&[f64], &[f64]) -> Jet + Send + Sync + 'static,
    ) -> Self {
        FnSymbol {
            n,
            name: name.into(),
            f: Box::new(f),
            support: Support::default(),
            class,
        }
    }

    pub fn with_support(mut self, support: Support) -> Self {
        self.support = support;
        self
    }

    pub fn constant(n: usize, c: f64) -> Self {
        FnSymbol::new(n, format!("const({c})"), SymbolClass { k: 0.0, l: 0.0 }, move |_, _| {
            Jet::constant(c, n)
        })
        .with_support(Support {
            xi_polynomial: true,
            ..Support::default()
        })
    }

    /// `x_i`-only symbol `f(x)` given with its gradient.
    pub fn position(
        n: usize,
        name: impl Into<String>,
        f: impl Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync + 'static,
    ) -> Self {
        FnSymbol::new(n, name, SymbolClass { k: 0.0, l: 0.0 }, move |x, _| {
            let (value, dx) = f(x);
            Jet {
                value,
                dx,
                dxi: vec![0.0; n],
            }
        })
        .with_support(Support {
            xi_polynomial: true,
            ..Support::default()
        })
    }
}

impl Symbol for FnSymbol {
    fn dim(&self) -> usize {
        self.n
    }
    fn name(&self) -> String {
        self.name.clone()
    }
    fn jet(&self, x: &[f64], xi: &[f64]) -> Jet {
        (self.f)(x, xi)
    }
    fn support(&self) -> Support {
        self.support
    }
    fn class(&self) -> SymbolClass {
        self.class
    }
}

/// Pointwise product of two symbols.
pub struct Product<A, B>(pub A, pub B);

impl<A: Symbol, B: Symbol> Symbol for Product<A, B> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn name(&self) -> String {
        format!("({})*({})", self.0.name(), self.1.name())
    }
    fn jet(&self, x: &[f64], xi: &[f64]) -> Jet {
        let a = self.0.jet(x, xi);
        if a.value == 0.0 && a.dx.iter().chain(&a.dxi).all(|v| *v == 0.0) {
            return a;
        }
        a.mul(&self.1.jet(x, xi))
    }
    fn support(&self) -> Support {
        let (a, b) = (self.0.support(), self.1.support());
        let min = |p: Option<f64>, q: Option<f64>| match (p, q) {
            (Some(u), Some(v)) => Some(u.min(v)),
            (u, None) => u,
            (None, v) => v,
        };
        let xi_radius = min(a.xi_radius, b.xi_radius);
        Support {
            x_box: min(a.x_box, b.x_box),
            xi_radius,
            xi_polynomial: xi_radius.is_none() && a.xi_polynomial && b.xi_polynomial,
        }
    }
    fn in_support(&self, x: &[f64], xi: &[f64]) -> bool {
        self.0.in_support(x, xi) && self.1.in_support(x, xi)
    }
    fn class(&self) -> SymbolClass {
        let (a, b) = (self.0.class(), self.1.class());
        SymbolClass {
            k: a.k + b.k,
            l: a.l + b.l,
        }
    }
}

/// Symbol multiplied by the box window `prod_i w(x_i)` with `w = 1` on
/// `|x_i| <= inner` and `w = 0` on `|x_i| >= outer`. Used to place symbols
/// that are not compactly supported in `x` on a periodic grid.
pub struct Windowed<S> {
    pub inner: S,
    pub plateau: f64,
    pub edge: f64,
}

impl<S: Symbol> Windowed<S> {
    pub fn new(inner: S, plateau: f64, edge: f64) -> Self {
        assert!(0.0 < plateau && plateau < edge, "window needs 0 < plateau < edge");
        Windowed {
            inner,
            plateau,
            edge,
        }
    }

    fn window(&self, x: &[f64]) -> Jet {
        let n = x.len();
        let parts: Vec<_> = x
            .iter()
            .map(|&t| window_jet(t, self.plateau, self.edge))
            .collect();
        let value = parts.iter().map(|p| p.value).product::<f64>();
        let dx = (0..n)
            .map(|i| {
                parts
                    .iter()
                    .enumerate()
                    .map(|(j, p)| if i == j { p.d1 } else { p.value })
                    .product::<f64>()
            })
            .collect();
        Jet {
            value,
            dx,
            dxi: vec![0.0; n],
        }
    }
}

impl<S: Symbol> Symbol for Windowed<S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn name(&self) -> String {
        format!("window[{}, {}]({})", self.plateau, self.edge, self.inner.name())
    }
    fn jet(&self, x: &[f64], xi: &[f64]) -> Jet {
        let w = self.window(x);
        if w.value == 0.0 {
            return Jet::zero(x.len());
        }
        w.mul(&self.inner.jet(x, xi))
    }
    fn support(&self) -> Support {
        let s = self.inner.support();
        Support {
            x_box: Some(s.x_box.map_or(self.edge, |b| b.min(self.edge))),
            ..s
        }
    }
    fn in_support(&self, x: &[f64], xi: &[f64]) -> bool {
        x.iter().all(|t| t.abs() <= self.edge) && self.inner.in_support(x, xi)
    }
    fn class(&self) -> SymbolClass {
        let c = self.inner.class();
        SymbolClass {
            k: c.k,
            l: f64::NEG_INFINITY,
        }
    }
}

/// Linear combination `sum_i c_i s_i`.
pub struct Combination {
    pub terms: Vec<(f64, SharedSymbol)>,
}

impl Symbol for Combination {
    fn dim(&self) -> usize {
        self.terms[0].1.dim()
    }
    fn name(&self) -> String {
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(c, s)| format!("{c}*{}", s.name()))
            .collect();
        parts.join(" + ")
    }
    fn jet(&self, x: &[f64], xi: &[f64]) -> Jet {
        let mut acc = Jet::zero(x.len());
        for (c, s) in &self.terms {
            acc = acc.add(&s.jet(x, xi).scaled(*c));
        }
        acc
    }
    fn support(&self) -> Support {
        let mut out = Support {
            x_box: Some(0.0),
            xi_radius: Some(0.0),
            xi_polynomial: true,
        };
        for (_, s) in &self.terms {
            let t = s.support();
            out.x_box = match (out.x_box, t.x_box) {
                (Some(a), Some(b)) => Some(a.max(b)),
                _ => None,
            };
            out.xi_radius = match (out.xi_radius, t.xi_radius) {
                (Some(a), Some(b)) => Some(a.max(b)),
                _ => None,
            };
            out.xi_polynomial &= t.xi_polynomial || t.xi_radius.is_some();
        }
        if out.xi_radius.is_some() {
            out.xi_polynomial = false;
        }
        out
    }
    fn in_support(&self, x: &[f64], xi: &[f64]) -> bool {
        self.terms.iter().any(|(_, s)| s.in_support(x, xi))
    }
    fn class(&self) -> SymbolClass {
        self.terms.iter().fold(
            SymbolClass {
                k: f64::NEG_INFINITY,
                l: f64::NEG_INFINITY,
            },
            |acc, (_, s)| {
                let c = s.class();
                SymbolClass {
                    k: acc.k.max(c.k),
                    l: acc.l.max(c.l),
                }
            },
        )
    }
}
