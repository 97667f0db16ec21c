//! Smooth step and bump primitives.
//!
//! Every cutoff in the crate is built from one representative smooth step,
//!
//! ```text
//! F(t)     = exp(-1/t) for t > 0, 0 otherwise
//! chi1(s)  = F(-s) / (F(-s) + F(s + 1))
//! ```
//!
//! which is exactly 1 for `s <= -1`, exactly 0 for `s >= 0`, strictly between
//! on `(-1, 0)` and nonincreasing. Derivatives are returned analytically up to
//! second order.

/// Value and first two derivatives of a scalar function of one variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet1 {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet1 {
    pub const fn constant(value: f64) -> Self {
        Jet1 {
            value,
            d1: 0.0,
            d2: 0.0,
        }
    }

    /// Chain rule: `self(inner(s))` where `self` was evaluated at `inner.value`.
    pub fn compose(self, inner: Jet1) -> Jet1 {
        Jet1 {
            value: self.value,
            d1: self.d1 * inner.d1,
            d2: self.d2 * inner.d1 * inner.d1 + self.d1 * inner.d2,
        }
    }

    pub fn mul(self, other: Jet1) -> Jet1 {
        Jet1 {
            value: self.value * other.value,
            d1: self.d1 * other.value + self.value * other.d1,
            d2: self.d2 * other.value + 2.0 * self.d1 * other.d1 + self.value * other.d2,
        }
    }
}

fn exp_inv(t: f64) -> Jet1 {
    if t <= 0.0 {
        return Jet1::constant(0.0);
    }
    let f = (-1.0 / t).exp();
    let t2 = t * t;
    Jet1 {
        value: f,
        d1: f / t2,
        d2: f * (1.0 / (t2 * t2) - 2.0 / (t2 * t)),
    }
}

/// Smooth monotone step: 1 on `s <= -1`, 0 on `s >= 0`.
pub fn chi1(s: f64) -> f64 {
    chi1_jet(s).value
}

pub fn chi1_jet(s: f64) -> Jet1 {
    if s <= -1.0 {
        return Jet1::constant(1.0);
    }
    if s >= 0.0 {
        return Jet1::constant(0.0);
    }
    // a(s) = F(-s), b(s) = F(s+1)
    let fa = exp_inv(-s);
    let a = Jet1 {
        value: fa.value,
        d1: -fa.d1,
        d2: fa.d2,
    };
    let b = exp_inv(s + 1.0);
    let den = a.value + b.value;
    let den1 = a.d1 + b.d1;
    let den2 = a.d2 + b.d2;
    let value = a.value / den;
    // (a/den)' = (a' den - a den') / den^2
    let num1 = a.d1 * den - a.value * den1;
    let d1 = num1 / (den * den);
    // derivative of num1 = a'' den - a den''
    let num1_d = a.d2 * den - a.value * den2;
    let d2 = num1_d / (den * den) - 2.0 * num1 * den1 / (den * den * den);
    Jet1 { value, d1, d2 }
}

/// Even bump: 1 on `|s| <= 1`, 0 on `|s| >= 2`, built as `chi1(s-2) chi1(-s-2)`.
pub fn chi2(s: f64) -> f64 {
    chi2_jet(s).value
}

pub fn chi2_jet(s: f64) -> Jet1 {
    let right = chi1_jet(s - 2.0);
    let l = chi1_jet(-s - 2.0);
    let left = Jet1 {
        value: l.value,
        d1: -l.d1,
        d2: l.d2,
    };
    right.mul(left)
}

/// Low-momentum cutoff `chi1(threshold - |xi|)`: zero for `|xi| <= threshold`,
/// one for `|xi| >= threshold + 1`. Returns the value and the xi-gradient.
pub fn chi3(xi: &[f64], threshold: f64) -> (f64, Vec<f64>) {
    let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let j = chi1_jet(threshold - r);
    if j.d1 == 0.0 || r == 0.0 {
        return (j.value, vec![0.0; xi.len()]);
    }
    let grad = xi.iter().map(|v| -j.d1 * v / r).collect();
    (j.value, grad)
}

/// Smooth box window: 1 on `|t| <= inner`, 0 on `|t| >= outer`.
pub fn window_jet(t: f64, inner: f64, outer: f64) -> Jet1 {
    let width = outer - inner;
    let s = (t.abs() - outer) / width;
    let sign = if t < 0.0 { -1.0 } else { 1.0 };
    chi1_jet(s).compose(Jet1 {
        value: s,
        d1: sign / width,
        d2: 0.0,
    })
}
