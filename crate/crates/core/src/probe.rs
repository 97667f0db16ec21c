//! The full operator `P = sum D_j g^{jk} D_k + (1/2) sum (D_j u_j + u_j D_j) + u_0`
//! at `h = 1` on a periodic grid, and the finite-dimensional facts behind its
//! self-adjointness: a real quadratic form, `[P, X_R]` decaying in `R`, and
//! `sigma_min(P - z) >= |Im z|`.
//!
//! `D_j = -i d/dx_j` is the spectral derivative, so plane waves at grid
//! momenta are exact eigenvectors of the flat operator. The discretized
//! operator is a Hermitian matrix and trivially self-adjoint; these checks
//! anchor the algebra and say nothing about behaviour at infinity.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Cometric;
use crate::quantize::{grid_norm, hermiticity_defect, loglog_slope, CMatrix, CVector, GridSpec};
use crate::smooth::chi2;

/// Hermiticity tolerance, relative to `1 + ||P||_F`.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Tolerance of the form-reality ratio.
pub const FORM_TOL: f64 = 1e-10;
/// Absolute tolerance on `sigma_min(P - z) >= |Im z|`.
pub const RESOLVENT_TOL: f64 = 1e-8;

/// Test hooks that break the symmetric assembly on purpose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Injection {
    #[default]
    None,
    /// `u_0 + i eps`.
    ComplexPotential { eps: f64 },
    /// `(1/2)(D u - u D)` in place of `(1/2)(D u + u D)`.
    FlippedFirstOrder,
}

#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub matrix: CMatrix,
    pub grid: GridSpec,
    pub hermiticity_defect: f64,
    pub provenance: String,
}

fn momenta(grid: &GridSpec) -> Vec<f64> {
    let n = grid.points as i64;
    // FFT order: 0, 1, ..., N/2 - 1, -N/2, ..., -1
    (0..n)
        .map(|k| {
            let m = if k < n / 2 { k } else { k - n };
            std::f64::consts::PI * m as f64 / grid.half_width
        })
        .collect()
}

/// `-i d/dx` on one periodic axis as a dense `N x N` matrix.
fn derivative_1d(grid: &GridSpec) -> CMatrix {
    let n = grid.points;
    let k = momenta(grid);
    // circulant: first column is the inverse DFT of the momenta
    let col: Vec<Complex64> = (0..n)
        .map(|d| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (m, km) in k.iter().enumerate() {
                let ph = 2.0 * std::f64::consts::PI * (m * d) as f64 / n as f64;
                acc += Complex64::from_polar(*km, ph);
            }
            acc / n as f64
        })
        .collect();
    DMatrix::from_fn(n, n, |a, b| col[(a + n - b) % n])
}

/// `D_j` on the full grid, last axis fastest.
fn derivative(grid: &GridSpec, axis: usize) -> CMatrix {
    let d1 = derivative_1d(grid);
    let n = grid.points;
    match (grid.dim, axis) {
        (1, _) => d1,
        (2, 0) => d1.kronecker(&CMatrix::identity(n, n)),
        (2, _) => CMatrix::identity(n, n).kronecker(&d1),
        _ => unreachable!("grids have one or two axes"),
    }
}

fn diag(values: impl Iterator<Item = Complex64>, size: usize) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(size, values))
}

/// Assembles `P` with an optional deliberate break. No Hermiticity check.
pub fn assemble_p_with(g: &Cometric, grid: &GridSpec, injection: Injection) -> Result<DiscreteOperator> {
    let n = g.dim();
    if n != grid.dim {
        return Err(Error::DimensionMismatch {
            expected: grid.dim,
            got: n,
        });
    }
    let size = grid.size();
    let points: Vec<Vec<f64>> = (0..size).map(|i| grid.point(i)).collect();
    let metric: Vec<Vec<f64>> = points.iter().map(|x| g.at(x)).collect();
    let first: Vec<Vec<f64>> = points.iter().map(|x| g.first_order(x).0).collect();
    let d: Vec<CMatrix> = (0..n).map(|j| derivative(grid, j)).collect();

    let mut p = CMatrix::zeros(size, size);
    for j in 0..n {
        for k in 0..n {
            let gjk = diag(metric.iter().map(|m| Complex64::new(m[j * n + k], 0.0)), size);
            p += &d[j] * gjk * &d[k];
        }
        let uj = diag(first.iter().map(|u| Complex64::new(u[j], 0.0)), size);
        let sign = if injection == Injection::FlippedFirstOrder { -1.0 } else { 1.0 };
        p += (&d[j] * &uj + &uj * &d[j] * Complex64::new(sign, 0.0)) * Complex64::new(0.5, 0.0);
    }
    let eps = match injection {
        Injection::ComplexPotential { eps } => eps,
        _ => 0.0,
    };
    p += diag(points.iter().map(|x| Complex64::new(g.zeroth_order(x).0, eps)), size);

    let defect = hermiticity_defect(&p) / (1.0 + p.norm());
    Ok(DiscreteOperator {
        matrix: p,
        grid: *grid,
        hermiticity_defect: defect,
        provenance: format!("symmetric spectral assembly at h = 1, injection {injection:?}"),
    })
}

/// Assembles `P`, rejecting a non-Hermitian result.
pub fn assemble_p(g: &Cometric, grid: &GridSpec) -> Result<DiscreteOperator> {
    let op = assemble_p_with(g, grid, Injection::None)?;
    if op.hermiticity_defect > HERMITIAN_TOL {
        return Err(Error::NonHermitian {
            defect: op.hermiticity_defect,
        });
    }
    Ok(op)
}

/// `-i d/dx_axis` applied with FFTs.
fn apply_derivative(grid: &GridSpec, v: &[Complex64], axis: usize) -> Vec<Complex64> {
    let n = grid.points;
    let k = momenta(grid);
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut out = v.to_vec();
    let lines: Vec<Vec<usize>> = match (grid.dim, axis) {
        (1, _) => vec![(0..n).collect()],
        (2, 0) => (0..n).map(|c| (0..n).map(|r| r * n + c).collect()).collect(),
        _ => (0..n).map(|r| (0..n).map(|c| r * n + c).collect()).collect(),
    };
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for line in lines {
        for (b, &i) in buf.iter_mut().zip(&line) {
            *b = v[i];
        }
        fwd.process(&mut buf);
        for (b, km) in buf.iter_mut().zip(&k) {
            *b *= km / n as f64;
        }
        inv.process(&mut buf);
        for (b, &i) in buf.iter().zip(&line) {
            out[i] = *b;
        }
    }
    out
}

/// `P v` without forming the matrix; agrees with [`assemble_p`].
pub fn apply_p(g: &Cometric, grid: &GridSpec, v: &CVector) -> CVector {
    let n = g.dim();
    let size = grid.size();
    let points: Vec<Vec<f64>> = (0..size).map(|i| grid.point(i)).collect();
    let metric: Vec<Vec<f64>> = points.iter().map(|x| g.at(x)).collect();
    let first: Vec<Vec<f64>> = points.iter().map(|x| g.first_order(x).0).collect();
    let vs = v.as_slice();
    let dv: Vec<Vec<Complex64>> = (0..n).map(|k| apply_derivative(grid, vs, k)).collect();
    let mut out: Vec<Complex64> = points
        .iter()
        .zip(vs)
        .map(|(x, c)| c * g.zeroth_order(x).0)
        .collect();
    for j in 0..n {
        let inner: Vec<Complex64> = (0..size)
            .map(|i| {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    acc += dv[k][i] * metric[i][j * n + k];
                }
                // first-order term: (1/2)(D_j (u_j v) + u_j D_j v)
                acc + vs[i] * first[i][j] * 0.5
            })
            .collect();
        let dj = apply_derivative(grid, &inner, j);
        for i in 0..size {
            out[i] += dj[i] + dv[j][i] * first[i][j] * 0.5;
        }
    }
    CVector::from_vec(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FormReport {
    /// `|Im <phi, P phi>| / (||phi|| ||P phi||)` per state.
    pub ratios: Vec<f64>,
    pub worst: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn quadratic_form_reality(op: &DiscreteOperator, states: &[CVector]) -> FormReport {
    let ratios: Vec<f64> = states
        .iter()
        .map(|phi| {
            let pphi = &op.matrix * phi;
            let denom = phi.norm() * pphi.norm();
            if denom == 0.0 {
                0.0
            } else {
                phi.dotc(&pphi).im.abs() / denom
            }
        })
        .collect();
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    FormReport {
        ratios,
        worst,
        tolerance: FORM_TOL,
        pass: worst <= FORM_TOL,
    }
}

/// `||[P, X] phi||` for the multiplication operator by `cutoff`.
pub fn cutoff_commutator(g: &Cometric, grid: &GridSpec, cutoff: &dyn Fn(&[f64]) -> f64, phi: &CVector) -> f64 {
    let x: Vec<f64> = (0..grid.size()).map(|i| cutoff(&grid.point(i))).collect();
    let mul = |v: &CVector| CVector::from_iterator(v.len(), v.iter().zip(&x).map(|(c, s)| c * s));
    let a = apply_p(g, grid, &mul(phi));
    let b = mul(&apply_p(g, grid, phi));
    grid_norm(grid, &(a - b))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CutoffDecayReport {
    pub radii: Vec<f64>,
    pub norms: Vec<f64>,
    pub exponent: f64,
    pub slack: f64,
    pub pass: bool,
}

/// `||[P, X_R] phi||` with `X_R(x) = chi2(|x| / R)` over `radii`; passes when
/// the fitted exponent is at most `-1 + slack`.
pub fn cutoff_commutator_decay(
    g: &Cometric,
    grid: &GridSpec,
    radii: &[f64],
    phi: &CVector,
    slack: f64,
) -> Result<CutoffDecayReport> {
    if radii.len() < 2 {
        return Err(Error::invalid("need at least two radii"));
    }
    let limit = grid.half_width * (1.0 - grid.margin);
    if let Some(r) = radii.iter().find(|r| 2.0 * **r > limit) {
        return Err(Error::GridViolation(format!(
            "cutoff of radius {r} reaches |x| = {}, beyond {limit}",
            2.0 * r
        )));
    }
    let norms: Vec<f64> = radii
        .iter()
        .map(|r| cutoff_commutator(g, grid, &|x| chi2(crate::linalg::norm(x) / r), phi))
        .collect();
    let exponent = loglog_slope(radii, &norms.iter().map(|n| n.max(1e-300)).collect::<Vec<_>>());
    Ok(CutoffDecayReport {
        radii: radii.to_vec(),
        norms,
        exponent,
        slack,
        pass: exponent <= -1.0 + slack,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolventReport {
    pub z: (f64, f64),
    pub sigma_min: f64,
    pub bound: f64,
    /// `sigma_min - |Im z|`.
    pub margin: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub note: String,
}

/// Smallest singular value of `P_d - z` against `|Im z|`.
pub fn resolvent_kernel_probe(op: &DiscreteOperator, z: Complex64) -> Result<ResolventReport> {
    if z.im == 0.0 {
        return Err(Error::invalid(format!("z = {z} is real")));
    }
    let n = op.matrix.nrows();
    let shifted = &op.matrix - CMatrix::identity(n, n) * z;
    let sv = shifted.singular_values();
    let sigma_min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let bound = z.im.abs();
    Ok(ResolventReport {
        z: (z.re, z.im),
        sigma_min,
        bound,
        margin: sigma_min - bound,
        tolerance: RESOLVENT_TOL,
        pass: sigma_min >= bound - RESOLVENT_TOL,
        note: "finite Hermitian matrix: a sanity anchor, not a statement about the operator on R^n".into(),
    })
}

/// `<x>^{-1} e^{i x_1}` cut off smoothly between `inner` and `outer`, unit
/// norm: the slowest tail for which `||[P, X_R] phi||` still decays in two
/// dimensions.
pub fn tail_state(grid: &GridSpec, inner: f64, outer: f64) -> CVector {
    let v = CVector::from_iterator(
        grid.size(),
        (0..grid.size()).map(|i| {
            let x = grid.point(i);
            let r = crate::linalg::norm(&x);
            let w = crate::smooth::window_jet(r, inner, outer).value;
            Complex64::from_polar(w / crate::linalg::japanese(&x), x[0])
        }),
    );
    let s = grid_norm(grid, &v);
    v / Complex64::new(s, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimates::random_states;
    use crate::geometry::{CometricSpec, Perturbation, ScalarField, VectorField};

    fn lower_order_metric() -> Cometric {
        Cometric::new(CometricSpec {
            dimension: 1,
            flat: vec![vec![1.0]],
            mu: 0.5,
            perturbation: Perturbation::PowerDecay {
                amplitude: vec![vec![0.3]],
                scale: 1.0,
            },
            first_order: VectorField::PowerDecay {
                amplitude: vec![0.4],
                scale: 1.0,
            },
            zeroth_order: ScalarField::GaussianBump {
                center: vec![0.5],
                width: 1.0,
                amplitude: 0.7,
            },
        })
        .unwrap()
    }

    fn grid1() -> GridSpec {
        GridSpec::new(1, 10.0, 64, 1.0).unwrap()
    }

    #[test]
    fn flat_elliptic_spectrum_is_nonnegative() {
        let op = assemble_p(&Cometric::euclidean(1), &grid1()).unwrap();
        assert!(crate::quantize::lambda_min(&op.matrix) > -1e-10);
    }

    #[test]
    fn plane_waves_diagonalize_flat_operator() {
        let g = Cometric::minkowski(2);
        let grid = GridSpec::new(2, 4.0, 8, 1.0).unwrap();
        let op = assemble_p(&g, &grid).unwrap();
        for (m1, m2) in [(0, 0), (1, 2), (-4, 3), (3, -4), (-4, -4)] {
            let xi = [grid.momentum(m1), grid.momentum(m2)];
            let v = CVector::from_iterator(
                grid.size(),
                (0..grid.size()).map(|i| {
                    let x = grid.point(i);
                    Complex64::from_polar(1.0, x[0] * xi[0] + x[1] * xi[1])
                }),
            );
            let expected = xi[0] * xi[0] - xi[1] * xi[1];
            let r = &op.matrix * &v - &v * Complex64::new(expected, 0.0);
            assert!(r.norm() / v.norm() < 1e-10, "({m1}, {m2}): {}", r.norm());
        }
    }

    #[test]
    fn matrix_free_matches_dense() {
        let g = lower_order_metric();
        let op = assemble_p(&g, &grid1()).unwrap();
        for v in random_states(64, 3, 9) {
            let d = (&op.matrix * &v - apply_p(&g, &grid1(), &v)).norm();
            assert!(d < 1e-10, "{d}");
        }
    }

    #[test]
    fn injections_break_hermiticity() {
        let g = lower_order_metric();
        assert!(assemble_p(&g, &grid1()).is_ok());
        for inj in [Injection::ComplexPotential { eps: 1e-3 }, Injection::FlippedFirstOrder] {
            let op = assemble_p_with(&g, &grid1(), inj).unwrap();
            assert!(op.hermiticity_defect > HERMITIAN_TOL, "{inj:?}");
            let form = quadratic_form_reality(&op, &random_states(64, 20, 1));
            assert!(!form.pass, "{inj:?}");
        }
        let skew = assemble_p_with(&g, &grid1(), Injection::ComplexPotential { eps: 0.3 }).unwrap();
        let r = resolvent_kernel_probe(&skew, Complex64::new(0.0, 1.0)).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn form_is_real_and_resolvent_bounded() {
        let op = assemble_p(&lower_order_metric(), &grid1()).unwrap();
        assert!(quadratic_form_reality(&op, &random_states(64, 50, 2)).pass);
        for z in [Complex64::new(0.0, 1.0), Complex64::new(2.0, 0.5), Complex64::new(-1.0, 0.1)] {
            let r = resolvent_kernel_probe(&op, z).unwrap();
            assert!(r.pass, "{r:?}");
        }
        assert!(resolvent_kernel_probe(&op, Complex64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn constant_cutoff_commutes() {
        let g = lower_order_metric();
        let v = &random_states(64, 1, 3)[0];
        assert_eq!(cutoff_commutator(&g, &grid1(), &|_| 1.0, v), 0.0);
    }

    #[test]
    fn gaussian_commutator_decays_fast() {
        let g = Cometric::minkowski(1);
        let grid = GridSpec::new(1, 20.0, 256, 1.0).unwrap();
        let phi = CVector::from_iterator(256, (0..256).map(|i| {
            let x = grid.point(i)[0];
            Complex64::new((-x * x / 2.0).exp(), 0.0)
        }));
        let r = cutoff_commutator_decay(&g, &grid, &[1.0, 2.0, 4.0], &phi, 0.1).unwrap();
        assert!(r.exponent < -3.0 && r.pass, "{r:?}");
        assert!(cutoff_commutator_decay(&g, &grid, &[4.0, 10.0], &phi, 0.1).is_err());
    }

    #[test]
    fn tail_state_decays_like_one_over_r() {
        let g = Cometric::minkowski(2);
        let grid = GridSpec::new(2, 20.0, 128, 1.0).unwrap();
        let phi = tail_state(&grid, 17.0, 19.0);
        let r = cutoff_commutator_decay(&g, &grid, &[2.0, 4.0, 8.0], &phi, 0.1).unwrap();
        assert!((r.exponent + 1.0).abs() < 0.25 && r.pass, "{r:?}");
    }
}
