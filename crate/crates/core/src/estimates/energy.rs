//! From a commutator lower bound to an energy inequality.
//!
//! For Hermitian `P`, any `B` and any `z`,
//!
//! ```text
//! i<phi, [B*B, P] phi> = -2 Im <B phi, B (P - z) phi> - 2 Im z ||B phi||^2,
//! ```
//!
//! so the premise `i[B*B, P] >= (c/h) B* W B - Bt* W Bt - E*E` gives, after
//! Cauchy-Schwarz with weights `W^{1/2}` and `W^{-1/2}`,
//!
//! ```text
//! (c/2h) ||W^{1/2} B phi||^2 + 2 Im z ||B phi||^2
//!     <= (2h/c) ||W^{-1/2} B (P - z) phi||^2 + ||W^{1/2} Bt phi||^2 + ||E phi||^2.
//! ```
//!
//! Everything here is finite-dimensional linear algebra on the supplied
//! matrices; `W` is diagonal and positive.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantize::{eigen, hermiticity_defect, lambda_min, CMatrix, CVector};

/// Premise tolerance on `lambda_min`, relative to the matrix scale.
pub const PREMISE_TOL: f64 = 1e-10;
/// Conclusion slack, relative to the size of the terms.
pub const SLACK_TOL: f64 = 1e-10;

/// Matrices entering the energy inequality. `weight` is the diagonal of `W`.
#[derive(Debug, Clone)]
pub struct EnergyInputs {
    pub b: CMatrix,
    pub b_tilde: CMatrix,
    pub e: CMatrix,
    pub p: CMatrix,
    pub weight: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs - rhs`; must not exceed `tolerance`.
    pub slack: f64,
    pub tolerance: f64,
    /// `|i<[B*B,P]> + 2 Im <B phi, B(P-z) phi> + 2 Im z ||B phi||^2|`.
    pub identity_residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyReport {
    pub z: (f64, f64),
    pub c: f64,
    pub h: f64,
    pub premise_lambda_min: f64,
    pub states: Vec<StateCheck>,
    pub worst_slack: f64,
    pub max_identity_residual: f64,
    pub pass: bool,
}

fn weighted(w: &[f64], v: &CVector, power: f64) -> CVector {
    CVector::from_iterator(v.len(), v.iter().zip(w).map(|(c, x)| c * x.powf(power)))
}

fn diag(w: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(w.len(), w.iter().map(|x| Complex64::new(*x, 0.0))))
}

/// `i[B*B, P] - (c/h) B*WB + Bt*W Bt + E*E`, whose nonnegativity is the premise.
pub fn premise_matrix(inp: &EnergyInputs, c: f64, h: f64) -> CMatrix {
    let w = diag(&inp.weight);
    let bb = inp.b.adjoint() * &inp.b;
    let comm = (&bb * &inp.p - &inp.p * &bb) * Complex64::new(0.0, 1.0);
    comm - inp.b.adjoint() * &w * &inp.b * Complex64::new(c / h, 0.0)
        + inp.b_tilde.adjoint() * &w * &inp.b_tilde
        + inp.e.adjoint() * &inp.e
}

/// `E` with `E*E` equal to the negative part of the Hermitian matrix `m`, so
/// that `m + E*E >= 0`.
pub fn remainder_from_negative_part(m: &CMatrix) -> CMatrix {
    let (vals, vecs) = eigen(m);
    let n = vals.len();
    let mut e = CMatrix::zeros(n, n);
    for (k, v) in vals.iter().enumerate() {
        if *v < 0.0 {
            let col = vecs.column(k);
            let s = (-v).sqrt();
            for i in 0..n {
                e[(k, i)] = col[i].conj() * s;
            }
        }
    }
    e
}

/// Checks the energy inequality on every trial state. Fails with
/// `HypothesisViolation` when the premise does not hold.
pub fn verify_energy_inequality(
    inp: &EnergyInputs,
    z: Complex64,
    c: f64,
    h: f64,
    states: &[CVector],
) -> Result<EnergyReport> {
    let n = inp.p.nrows();
    for (name, m) in [("B", &inp.b), ("B tilde", &inp.b_tilde), ("E", &inp.e)] {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::invalid(format!("{name} is {}x{}, P is {n}x{n}", m.nrows(), m.ncols())));
        }
    }
    if inp.weight.len() != n || inp.weight.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::invalid("weight must be positive with one entry per grid point"));
    }
    if !(c > 0.0) || !(h > 0.0) {
        return Err(Error::invalid("c and h must be positive"));
    }
    if z.im < 0.0 {
        return Err(Error::invalid("Im z must be nonnegative"));
    }
    let defect = hermiticity_defect(&inp.p) / (1.0 + inp.p.norm());
    if defect > PREMISE_TOL {
        return Err(Error::NonHermitian { defect });
    }
    let prem = premise_matrix(inp, c, h);
    let lm = lambda_min(&prem);
    let scale = 1.0 + prem.norm();
    if lm < -PREMISE_TOL * scale {
        return Err(Error::HypothesisViolation { lambda_min: lm });
    }

    let bb = inp.b.adjoint() * &inp.b;
    let comm = (&bb * &inp.p - &inp.p * &bb) * Complex64::new(0.0, 1.0);
    let shifted = &inp.p - CMatrix::identity(n, n) * z;
    let mut checks = Vec::with_capacity(states.len());
    for phi in states {
        if phi.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: phi.len() });
        }
        let bphi = &inp.b * phi;
        let bpz = &inp.b * (&shifted * phi);
        let lhs_main = c / (2.0 * h) * weighted(&inp.weight, &bphi, 0.5).norm_squared();
        let lhs_z = 2.0 * z.im * bphi.norm_squared();
        let rhs_main = 2.0 * h / c * weighted(&inp.weight, &bpz, -0.5).norm_squared();
        let rhs_next = weighted(&inp.weight, &(&inp.b_tilde * phi), 0.5).norm_squared();
        let rhs_rem = (&inp.e * phi).norm_squared();
        let lhs = lhs_main + lhs_z;
        let rhs = rhs_main + rhs_next + rhs_rem;

        let form = phi.dotc(&(&comm * phi)).re;
        let cross = bphi.dotc(&bpz).im;
        let identity_residual = (form + 2.0 * cross + 2.0 * z.im * bphi.norm_squared()).abs();

        // a premise that only holds up to round-off loosens the conclusion by the same amount
        let tolerance = SLACK_TOL * (1.0 + lhs.abs() + rhs.abs() + form.abs()) + (-lm).max(0.0) * phi.norm_squared();
        let slack = lhs - rhs;
        checks.push(StateCheck {
            lhs,
            rhs,
            slack,
            tolerance,
            identity_residual,
            pass: slack <= tolerance,
        });
    }
    let worst_slack = checks.iter().map(|s| s.slack).fold(f64::NEG_INFINITY, f64::max);
    let max_identity_residual = checks.iter().map(|s| s.identity_residual).fold(0.0, f64::max);
    let pass = checks.iter().all(|s| s.pass);
    Ok(EnergyReport {
        z: (z.re, z.im),
        c,
        h,
        premise_lambda_min: lm,
        states: checks,
        worst_slack,
        max_identity_residual,
        pass,
    })
}

/// `count` unit vectors with independent uniform entries in the unit square,
/// reproducible from `seed`.
pub fn random_states(n: usize, count: usize, seed: u64) -> Vec<CVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let v = CVector::from_iterator(
                n,
                (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))),
            );
            let s = v.norm();
            v / Complex64::new(s, 0.0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hermitian(n: usize, seed: u64) -> CMatrix {
        let cols = random_states(n, n, seed);
        let a = CMatrix::from_columns(&cols);
        (&a + a.adjoint()) * Complex64::new(0.5, 0.0)
    }

    #[test]
    fn zero_observable_is_trivial() {
        let n = 12;
        let z = CMatrix::zeros(n, n);
        let inp = EnergyInputs {
            b: z.clone(),
            b_tilde: z.clone(),
            e: z,
            p: hermitian(n, 1),
            weight: vec![1.0; n],
        };
        let r = verify_energy_inequality(&inp, Complex64::new(0.0, 1.0), 0.5, 0.1, &random_states(n, 10, 2)).unwrap();
        assert!(r.pass);
        for s in &r.states {
            assert_eq!(s.lhs, 0.0);
            assert_eq!(s.identity_residual, 0.0);
        }
    }

    #[test]
    fn identity_observable_with_absorbing_remainder() {
        let n = 16;
        let (c, h) = (0.05, 0.1);
        let weight: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + (i as f64 * 0.3).powi(2)).sqrt()).collect();
        let e = diag(&weight.iter().map(|w| (c / h * w).sqrt()).collect::<Vec<_>>());
        let inp = EnergyInputs {
            b: CMatrix::identity(n, n),
            b_tilde: CMatrix::zeros(n, n),
            e,
            p: hermitian(n, 3),
            weight,
        };
        assert!(premise_matrix(&inp, c, h).norm() < 1e-12);
        for z in [Complex64::new(0.0, 1.0), Complex64::new(2.0, 0.5), Complex64::new(-1.0, 0.0)] {
            let r = verify_energy_inequality(&inp, z, c, h, &random_states(n, 100, 4)).unwrap();
            assert!(r.pass, "z = {z}: worst slack {}", r.worst_slack);
            assert!(r.max_identity_residual < 1e-10);
        }
    }

    #[test]
    fn negative_part_remainder_restores_premise() {
        let n = 10;
        let m = hermitian(n, 7);
        let e = remainder_from_negative_part(&m);
        assert!(lambda_min(&(&m + e.adjoint() * &e)) > -1e-12);
    }

    #[test]
    fn violated_premise_is_reported() {
        let n = 8;
        let inp = EnergyInputs {
            b: CMatrix::identity(n, n),
            b_tilde: CMatrix::zeros(n, n),
            e: CMatrix::zeros(n, n),
            p: hermitian(n, 5),
            weight: vec![1.0; n],
        };
        match verify_energy_inequality(&inp, Complex64::new(0.0, 1.0), 1.0, 0.1, &[]) {
            Err(Error::HypothesisViolation { lambda_min }) => assert!(lambda_min < -1.0),
            other => panic!("{other:?}"),
        }
        assert!(verify_energy_inequality(&inp, Complex64::new(0.0, -1.0), 1.0, 0.1, &[]).is_err());
    }
}
