//! Checks of the escape-function inequalities: pointwise sign conditions,
//! the operator commutator inequality, the energy inequality and the decay
//! cascade along a ladder of observables.

mod cascade;
mod energy;
mod operator;
mod pointwise;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::geometry::PhasePoint;

pub use cascade::{ladder_cascade, CascadeReport, ChainCheck, RungNorms, NORM_FLOOR};
pub use energy::{
    premise_matrix, random_states, remainder_from_negative_part, verify_energy_inequality, EnergyInputs, EnergyReport,
    StateCheck, PREMISE_TOL, SLACK_TOL,
};
pub use operator::{
    assemble_hamiltonian, commutator_matrix, rung_energy_inputs, verify_operator_commutator, CommutatorOptions, CommutatorReport, HLevel,
    RungConstants, SearchEntry,
};
pub use pointwise::{
    plateau_search, search_incoming_radius, verify_incoming_cutoff_sign, verify_incoming_observable,
    search_outgoing_radius, verify_outgoing_cutoff, CutoffSignReport, ObservableReport, OutgoingReport, OutgoingSearch, RadiusSearch, SupportAudit,
    SIGN_TOL,
};

/// Grid point where a reported maximum is attained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Argmax {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

impl From<&Argmax> for PhasePoint {
    fn from(a: &Argmax) -> Self {
        PhasePoint::new(a.x.clone(), a.xi.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub parameter: String,
    pub value: f64,
    pub worst: f64,
    pub pass: bool,
}

/// Worst value of a sampled quantity against a tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub quantity: String,
    pub params: Value,
    pub grid: Value,
    pub worst: f64,
    pub argmax: Option<Argmax>,
    pub tolerance: f64,
    pub pass: bool,
    pub sweep: Vec<SweepEntry>,
    pub notes: Vec<String>,
}

impl MarginReport {
    /// Report for `values` sampled at `points`; ties go to the first index,
    /// so the result does not depend on evaluation order.
    pub fn from_samples(
        quantity: impl Into<String>,
        params: Value,
        grid: Value,
        points: &[(Vec<f64>, Vec<f64>)],
        values: &[f64],
        tolerance: f64,
    ) -> Self {
        let mut worst = f64::NEG_INFINITY;
        let mut arg = None;
        for (i, v) in values.iter().enumerate() {
            if *v > worst || (v.is_nan() && !worst.is_nan()) {
                worst = *v;
                arg = Some(i);
            }
        }
        let argmax = arg.map(|i| Argmax {
            x: points[i].0.clone(),
            xi: points[i].1.clone(),
        });
        MarginReport {
            quantity: quantity.into(),
            params,
            grid,
            worst,
            argmax,
            tolerance,
            pass: worst <= tolerance,
            sweep: Vec::new(),
            notes: Vec::new(),
        }
    }
}

/// Deterministic phase-space sample grid: log-spaced radii times evenly
/// spaced directions for `x`, and shell radii times directions for `xi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleGrid {
    pub dim: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub radial: usize,
    pub xi_min: f64,
    pub xi_max: f64,
    pub shell: usize,
    pub x_dirs: usize,
    pub xi_dirs: usize,
}

impl SampleGrid {
    /// About `target` points covering `r_min <= |x| <= r_max` and the shell
    /// `xi_min <= |xi| <= xi_max`.
    pub fn covering(dim: usize, r: (f64, f64), xi: (f64, f64), target: usize) -> Self {
        let (radial, shell, x_dirs, xi_dirs) = match dim {
            1 => {
                let m = ((target as f64 / 4.0).sqrt() * 2.0).ceil() as usize;
                (m.max(2), (m / 4).max(2), 2, 2)
            }
            2 => {
                let m = (target as f64).powf(0.25).ceil() as usize;
                (m + m / 4, (m / 2).max(2), m, m + m / 2)
            }
            _ => {
                let m = (target as f64).powf(0.25).ceil() as usize;
                (m, (m / 2).max(2), m + m / 4, m + m / 2)
            }
        };
        let per_radius = shell * x_dirs * xi_dirs;
        let radial = radial.max(target.div_ceil(per_radius));
        SampleGrid {
            dim,
            r_min: r.0,
            r_max: r.1,
            radial,
            xi_min: xi.0,
            xi_max: xi.1,
            shell,
            x_dirs,
            xi_dirs,
        }
    }

    pub fn len(&self) -> usize {
        self.radial * self.shell * self.x_dirs * self.xi_dirs
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn describe(&self) -> Value {
        serde_json::to_value(self).unwrap_or(Value::Null)
    }

    pub fn points(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        let radii = spaced(self.r_min, self.r_max, self.radial, true);
        let shells = spaced(self.xi_min, self.xi_max, self.shell, false);
        let xd = directions(self.dim, self.x_dirs, 0.5);
        let kd = directions(self.dim, self.xi_dirs, 0.25);
        let mut out = Vec::with_capacity(self.len());
        for r in &radii {
            for u in &xd {
                let x: Vec<f64> = u.iter().map(|c| r * c).collect();
                for k in &shells {
                    for w in &kd {
                        out.push((x.clone(), w.iter().map(|c| k * c).collect()));
                    }
                }
            }
        }
        out
    }
}

fn spaced(a: f64, b: f64, m: usize, log: bool) -> Vec<f64> {
    if m == 1 {
        return vec![a];
    }
    (0..m)
        .map(|i| {
            let t = i as f64 / (m - 1) as f64;
            if log && a > 0.0 {
                a * (b / a).powf(t)
            } else {
                a + (b - a) * t
            }
        })
        .collect()
}

/// `m` unit vectors: `+-1` in one dimension, offset angles in two, a
/// Fibonacci lattice on the sphere otherwise.
fn directions(dim: usize, m: usize, offset: f64) -> Vec<Vec<f64>> {
    use std::f64::consts::PI;
    match dim {
        1 => (0..m).map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }]).collect(),
        2 => (0..m)
            .map(|i| {
                let t = 2.0 * PI * (i as f64 + offset) / m as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..m)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + offset) / m as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let t = golden * i as f64 + offset;
                    let mut v = vec![r * t.cos(), r * t.sin(), z];
                    v.resize(dim, 0.0);
                    let s = crate::linalg::norm(&v);
                    v.iter().map(|c| c / s).collect()
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes_reach_target() {
        for dim in 1..=3 {
            let g = SampleGrid::covering(dim, (1.0, 50.0), (0.8, 1.2), 100_000);
            assert!(g.len() >= 100_000, "dim {dim}: {}", g.len());
            assert!(g.len() <= 400_000, "dim {dim}: {}", g.len());
            let pts = g.points();
            assert_eq!(pts.len(), g.len());
            for (x, xi) in pts.iter().step_by(997) {
                let r = crate::linalg::norm(x);
                let k = crate::linalg::norm(xi);
                assert!(r >= 1.0 - 1e-12 && r <= 50.0 + 1e-9);
                assert!(k >= 0.8 - 1e-12 && k <= 1.2 + 1e-12);
            }
        }
    }

    #[test]
    fn argmax_ties_go_first() {
        let pts = vec![(vec![1.0], vec![1.0]), (vec![2.0], vec![1.0]), (vec![3.0], vec![1.0])];
        let r = MarginReport::from_samples("q", Value::Null, Value::Null, &pts, &[0.0, 2.0, 2.0], 1.0);
        assert_eq!(r.worst, 2.0);
        assert_eq!(r.argmax.unwrap().x, vec![2.0]);
        assert!(!r.pass);
    }
}
