//! Sampled symbol-class seminorms.

use serde::Serialize;

use super::Symbol;
use crate::linalg::japanese;

#[derive(Debug, Clone, Serialize)]
pub struct SeminormEntry {
    /// Derivative orders in `x`.
    pub alpha: Vec<usize>,
    /// Derivative orders in `xi`.
    pub beta: Vec<usize>,
    pub constant: f64,
    pub method: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeminormReport {
    pub symbol: String,
    pub k: f64,
    pub l: f64,
    pub points: usize,
    pub entries: Vec<SeminormEntry>,
}

impl SeminormReport {
    pub fn get(&self, alpha: &[usize], beta: &[usize]) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.alpha == alpha && e.beta == beta)
            .map(|e| e.constant)
    }

    pub fn max(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.constant))
    }
}

/// Phase-space coordinate index: `0..n` is `x`, `n..2n` is `xi`.
fn multi_indices(n: usize, max_order: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    if max_order >= 1 {
        out.extend((0..2 * n).map(|i| vec![i]));
    }
    if max_order >= 2 {
        for i in 0..2 * n {
            for j in i..2 * n {
                out.push(vec![i, j]);
            }
        }
    }
    out
}

fn component(jet: &super::Jet, i: usize, n: usize) -> f64 {
    if i < n {
        jet.dx[i]
    } else {
        jet.dxi[i - n]
    }
}

/// For each `(alpha, beta)` with `|alpha| + |beta| <= max_order` (at most 2),
/// the sup over `points` of `|d_x^alpha d_xi^beta a| <x>^{|alpha| - l} <xi>^{|beta| - k}`.
/// First derivatives are analytic; second derivatives are central differences
/// of the analytic gradient.
pub fn seminorm_estimate(
    a: &dyn Symbol,
    k: f64,
    l: f64,
    max_order: usize,
    points: &[(Vec<f64>, Vec<f64>)],
) -> SeminormReport {
    let n = a.dim();
    let max_order = max_order.min(2);
    let idx = multi_indices(n, max_order);
    let mut constants = vec![0.0f64; idx.len()];
    for (x, xi) in points {
        let jx = japanese(x);
        let jxi = japanese(xi);
        let jet = a.jet(x, xi);
        for (slot, mi) in idx.iter().enumerate() {
            let na = mi.iter().filter(|&&i| i < n).count() as f64;
            let nb = mi.len() as f64 - na;
            let d = match mi.len() {
                0 => jet.value,
                1 => component(&jet, mi[0], n),
                _ => {
                    let (i, j) = (mi[0], mi[1]);
                    let coord = |p: &mut Vec<f64>, q: &mut Vec<f64>, t: f64| {
                        if i < n {
                            p[i] += t;
                        } else {
                            q[i - n] += t;
                        }
                    };
                    let base = if i < n { x[i] } else { xi[i - n] };
                    let step = 1e-4 * (1.0 + base.abs());
                    let (mut xp, mut kp) = (x.clone(), xi.clone());
                    let (mut xm, mut km) = (x.clone(), xi.clone());
                    coord(&mut xp, &mut kp, step);
                    coord(&mut xm, &mut km, -step);
                    let up = component(&a.jet(&xp, &kp), j, n);
                    let dn = component(&a.jet(&xm, &km), j, n);
                    (up - dn) / (2.0 * step)
                }
            };
            let w = jx.powf(na - l) * jxi.powf(nb - k);
            constants[slot] = constants[slot].max(d.abs() * w);
        }
    }
    let entries = idx
        .iter()
        .zip(constants)
        .map(|(mi, c)| {
            let mut alpha = vec![0; n];
            let mut beta = vec![0; n];
            for &i in mi {
                if i < n {
                    alpha[i] += 1;
                } else {
                    beta[i - n] += 1;
                }
            }
            SeminormEntry {
                alpha,
                beta,
                constant: c,
                method: match mi.len() {
                    0 => "value",
                    1 => "analytic",
                    _ => "central difference of analytic gradient",
                },
            }
        })
        .collect();
    SeminormReport {
        symbol: a.name(),
        k,
        l,
        points: points.len(),
        entries,
    }
}
