//! Asymptotically flat Lorentzian cometrics and the flat-part geometry built on them.
//!
//! A [`Cometric`] is `g^{jk}(x) = g0^{jk} + perturbation`, together with the
//! lower-order coefficients `u_j(x)` and `u_0(x)`. Every family is closed form
//! with analytic derivatives.
//!
//! The angle variable, the parallel/perpendicular split and the `tau`
//! functions only see the flat part through `v(xi) = 2 g0 xi`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, japanese, matmul, matvec, norm};
use crate::smooth::chi2_jet;

/// Tolerance below which `|g0 xi|` counts as zero.
pub const VELOCITY_TOL: f64 = 1e-14;
/// Relative tolerance on `|x_perp| / |x|` for the gradient of `tau`.
pub const PERP_TOL: f64 = 1e-8;
/// Minimum `|det g0|` accepted for the flat part.
pub const DET_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Incoming,
    Outgoing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, xi: Vec<f64>) -> Self {
        PhasePoint { x, xi }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.xi).all(|v| v.is_finite())
    }
}

/// Perturbation of the principal coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Perturbation {
    None,
    /// `A exp(-|x - c|^2 / w^2)`.
    GaussianBump {
        center: Vec<f64>,
        width: f64,
        amplitude: Vec<Vec<f64>>,
    },
    /// `A (1 + |x|^2 / s^2)^{-mu/2}`, with `mu` taken from the metric.
    PowerDecay {
        amplitude: Vec<Vec<f64>>,
        scale: f64,
    },
    /// Compactly supported twist around the ring `r = radius` in the
    /// `(x_1, x_2)` plane that makes every circle of that radius a closed
    /// null geodesic. Requires `n = 3` and flat part `diag(-1, 1, 1)`.
    RingTrap {
        radius: f64,
        width: f64,
        twist: f64,
    },
}

/// Perturbation of the first-order coefficients `u_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum VectorField {
    None,
    GaussianBump {
        center: Vec<f64>,
        width: f64,
        amplitude: Vec<f64>,
    },
    PowerDecay {
        amplitude: Vec<f64>,
        scale: f64,
    },
}

/// Perturbation of the zeroth-order coefficient `u_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarField {
    None,
    GaussianBump {
        center: Vec<f64>,
        width: f64,
        amplitude: f64,
    },
    PowerDecay {
        amplitude: f64,
        scale: f64,
    },
}

fn default_vector_field() -> VectorField {
    VectorField::None
}

fn default_scalar_field() -> ScalarField {
    ScalarField::None
}

fn default_perturbation() -> Perturbation {
    Perturbation::None
}

/// Serializable description of a cometric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CometricSpec {
    pub dimension: usize,
    /// Rows of the flat part `g0`.
    pub flat: Vec<Vec<f64>>,
    /// Decay exponent in `(0, 1)`.
    pub mu: f64,
    #[serde(default = "default_perturbation")]
    pub perturbation: Perturbation,
    #[serde(default = "default_vector_field")]
    pub first_order: VectorField,
    #[serde(default = "default_scalar_field")]
    pub zeroth_order: ScalarField,
}

impl CometricSpec {
    pub fn flat(flat: Vec<Vec<f64>>) -> Self {
        CometricSpec {
            dimension: flat.len(),
            flat,
            mu: 0.5,
            perturbation: Perturbation::None,
            first_order: VectorField::None,
            zeroth_order: ScalarField::None,
        }
    }
}

/// Radial profile `f(|x - c|^2)` with derivatives up to third order in `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Profile {
    Gaussian { width: f64 },
    Power { half_mu: f64, scale: f64 },
}

impl Profile {
    /// `f, f', f'', f'''` as functions of `s = |x - c|^2`.
    fn derivs(&self, s: f64) -> [f64; 4] {
        match *self {
            Profile::Gaussian { width } => {
                let k = -1.0 / (width * width);
                let f = (k * s).exp();
                [f, k * f, k * k * f, k * k * k * f]
            }
            Profile::Power { half_mu: m, scale } => {
                let a2 = scale * scale;
                let base = 1.0 + s / a2;
                let f = base.powf(-m);
                let f1 = -m / a2 * f / base;
                let f2 = -(m + 1.0) / a2 * f1 / base;
                let f3 = -(m + 2.0) / a2 * f2 / base;
                [f, f1, f2, f3]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Radial {
    profile: Profile,
    center: Vec<f64>,
}

/// Value, gradient, Hessian and third derivatives of a radial profile.
struct RadialJet {
    value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
    third: Option<Vec<f64>>,
}

impl Radial {
    fn jet(&self, x: &[f64], order: usize) -> RadialJet {
        let n = x.len();
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        let s = dot(&d, &d);
        let [f, f1, f2, f3] = self.profile.derivs(s);
        let grad = d.iter().map(|di| 2.0 * di * f1).collect();
        let mut hess = vec![0.0; n * n];
        if order >= 2 {
            for i in 0..n {
                for j in 0..n {
                    let delta = if i == j { 2.0 * f1 } else { 0.0 };
                    hess[i * n + j] = 4.0 * d[i] * d[j] * f2 + delta;
                }
            }
        }
        let third = (order >= 3).then(|| {
            let mut t = vec![0.0; n * n * n];
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut sym = 0.0;
                        if i == j {
                            sym += d[k];
                        }
                        if i == k {
                            sym += d[j];
                        }
                        if j == k {
                            sym += d[i];
                        }
                        t[(i * n + j) * n + k] = 8.0 * d[i] * d[j] * d[k] * f3 + 4.0 * sym * f2;
                    }
                }
            }
            t
        });
        RadialJet {
            value: f,
            grad,
            hess,
            third,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum PrincipalTerm {
    Flat,
    Radial { radial: Radial, amplitude: Vec<f64> },
    Ring { radius: f64, width: f64, twist: f64 },
}

/// Cometric `g^{jk}(x)` and its derivatives at a point.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub g: Vec<f64>,
    /// `dg[l]` is `d/dx_l g`.
    pub dg: Vec<Vec<f64>>,
    /// `ddg[l * n + m]` is `d^2/dx_l dx_m g`; empty unless requested.
    pub ddg: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Cometric {
    n: usize,
    flat: Vec<f64>,
    mu: f64,
    principal: PrincipalTerm,
    first: Option<(Radial, Vec<f64>)>,
    zeroth: Option<(Radial, f64)>,
    spec: CometricSpec,
}

fn check_len(what: &str, got: usize, n: usize) -> Result<()> {
    if got != n {
        return Err(Error::invalid(format!("{what} has length {got}, expected {n}")));
    }
    Ok(())
}

fn flatten_square(rows: &[Vec<f64>], n: usize, what: &str) -> Result<Vec<f64>> {
    check_len(what, rows.len(), n)?;
    let mut out = Vec::with_capacity(n * n);
    for r in rows {
        check_len(what, r.len(), n)?;
        out.extend_from_slice(r);
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{what} has non-finite entries")));
    }
    for i in 0..n {
        for j in 0..i {
            if (out[i * n + j] - out[j * n + i]).abs() > 1e-14 * (1.0 + out[i * n + j].abs()) {
                return Err(Error::invalid(format!("{what} is not symmetric")));
            }
        }
    }
    Ok(out)
}

fn positive(what: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::invalid(format!("{what} must be positive, got {v}")));
    }
    Ok(())
}

impl Cometric {
    pub fn new(spec: CometricSpec) -> Result<Self> {
        let n = spec.dimension;
        if n == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if !(spec.mu > 0.0 && spec.mu < 1.0) {
            return Err(Error::invalid(format!("mu must lie in (0, 1), got {}", spec.mu)));
        }
        let flat = flatten_square(&spec.flat, n, "flat part")?;
        let det = DMatrix::from_row_slice(n, n, &flat).determinant();
        if det.abs() < DET_TOL {
            return Err(Error::invalid(format!("flat part is degenerate: det = {det:e}")));
        }
        let half_mu = spec.mu / 2.0;
        let principal = match &spec.perturbation {
            Perturbation::None => PrincipalTerm::Flat,
            Perturbation::GaussianBump {
                center,
                width,
                amplitude,
            } => {
                check_len("bump center", center.len(), n)?;
                positive("bump width", *width)?;
                PrincipalTerm::Radial {
                    radial: Radial {
                        profile: Profile::Gaussian { width: *width },
                        center: center.clone(),
                    },
                    amplitude: flatten_square(amplitude, n, "bump amplitude")?,
                }
            }
            Perturbation::PowerDecay { amplitude, scale } => {
                positive("decay scale", *scale)?;
                PrincipalTerm::Radial {
                    radial: Radial {
                        profile: Profile::Power {
                            half_mu,
                            scale: *scale,
                        },
                        center: vec![0.0; n],
                    },
                    amplitude: flatten_square(amplitude, n, "decay amplitude")?,
                }
            }
            Perturbation::RingTrap {
                radius,
                width,
                twist,
            } => {
                if n != 3 {
                    return Err(Error::UnsupportedFamily(format!(
                        "ring_trap needs dimension 3, got {n}"
                    )));
                }
                let eta = [-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
                if flat.iter().zip(&eta).any(|(a, b)| (a - b).abs() > 1e-14) {
                    return Err(Error::UnsupportedFamily(
                        "ring_trap needs flat part diag(-1, 1, 1)".into(),
                    ));
                }
                positive("ring width", *width)?;
                if *radius <= 2.0 * width {
                    return Err(Error::invalid("ring radius must exceed twice its width"));
                }
                if *twist == 0.0 || !twist.is_finite() {
                    return Err(Error::invalid("ring twist must be nonzero"));
                }
                PrincipalTerm::Ring {
                    radius: *radius,
                    width: *width,
                    twist: *twist,
                }
            }
        };
        let first = match &spec.first_order {
            VectorField::None => None,
            VectorField::GaussianBump {
                center,
                width,
                amplitude,
            } => {
                check_len("first-order center", center.len(), n)?;
                check_len("first-order amplitude", amplitude.len(), n)?;
                positive("first-order width", *width)?;
                Some((
                    Radial {
                        profile: Profile::Gaussian { width: *width },
                        center: center.clone(),
                    },
                    amplitude.clone(),
                ))
            }
            VectorField::PowerDecay { amplitude, scale } => {
                check_len("first-order amplitude", amplitude.len(), n)?;
                positive("first-order scale", *scale)?;
                Some((
                    Radial {
                        profile: Profile::Power {
                            half_mu,
                            scale: *scale,
                        },
                        center: vec![0.0; n],
                    },
                    amplitude.clone(),
                ))
            }
        };
        let zeroth = match &spec.zeroth_order {
            ScalarField::None => None,
            ScalarField::GaussianBump {
                center,
                width,
                amplitude,
            } => {
                check_len("zeroth-order center", center.len(), n)?;
                positive("zeroth-order width", *width)?;
                Some((
                    Radial {
                        profile: Profile::Gaussian { width: *width },
                        center: center.clone(),
                    },
                    *amplitude,
                ))
            }
            ScalarField::PowerDecay { amplitude, scale } => {
                positive("zeroth-order scale", *scale)?;
                Some((
                    Radial {
                        profile: Profile::Power {
                            half_mu,
                            scale: *scale,
                        },
                        center: vec![0.0; n],
                    },
                    *amplitude,
                ))
            }
        };
        Ok(Cometric {
            n,
            flat,
            mu: spec.mu,
            principal,
            first,
            zeroth,
            spec,
        })
    }

    /// Constant cometric with the given flat part and no lower-order terms.
    pub fn flat(rows: Vec<Vec<f64>>) -> Result<Self> {
        Cometric::new(CometricSpec::flat(rows))
    }

    /// `diag(1, -1, ..., -1)` in dimension `n` (`diag(1)` when `n = 1`).
    pub fn minkowski(n: usize) -> Self {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![0.0; n];
                r[i] = if i == 0 { 1.0 } else { -1.0 };
                r
            })
            .collect();
        Cometric::flat(rows).expect("minkowski flat part is valid")
    }

    pub fn euclidean(n: usize) -> Self {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![0.0; n];
                r[i] = 1.0;
                r
            })
            .collect();
        Cometric::flat(rows).expect("identity flat part is valid")
    }

    /// Ring trap in `2 + 1` dimensions around the circle `r = radius`.
    pub fn ring_trap(radius: f64, width: f64, twist: f64) -> Result<Self> {
        Cometric::new(CometricSpec {
            dimension: 3,
            flat: vec![
                vec![-1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
            mu: 0.5,
            perturbation: Perturbation::RingTrap {
                radius,
                width,
                twist,
            },
            first_order: VectorField::None,
            zeroth_order: ScalarField::None,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn spec(&self) -> &CometricSpec {
        &self.spec
    }

    /// Row-major flat part `g0`.
    pub fn flat_part(&self) -> &[f64] {
        &self.flat
    }

    pub fn is_flat(&self) -> bool {
        matches!(self.principal, PrincipalTerm::Flat)
    }

    pub fn has_lower_order(&self) -> bool {
        self.first.is_some() || self.zeroth.is_some()
    }

    pub fn is_ring_trap(&self) -> bool {
        matches!(self.principal, PrincipalTerm::Ring { .. })
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `g^{jk}(x)` as a row-major matrix.
    pub fn at(&self, x: &[f64]) -> Vec<f64> {
        self.jet(x, 0).g
    }

    /// Cometric and its derivatives up to `order` (0, 1 or 2).
    pub fn jet(&self, x: &[f64], order: usize) -> MetricJet {
        let n = self.n;
        let nn = n * n;
        match &self.principal {
            PrincipalTerm::Flat => MetricJet {
                g: self.flat.clone(),
                dg: if order >= 1 { vec![vec![0.0; nn]; n] } else { Vec::new() },
                ddg: if order >= 2 { vec![vec![0.0; nn]; nn] } else { Vec::new() },
            },
            PrincipalTerm::Radial { radial, amplitude } => {
                let rj = radial.jet(x, order);
                let g = self
                    .flat
                    .iter()
                    .zip(amplitude)
                    .map(|(g0, a)| g0 + a * rj.value)
                    .collect();
                let dg = if order >= 1 {
                    (0..n)
                        .map(|l| amplitude.iter().map(|a| a * rj.grad[l]).collect())
                        .collect()
                } else {
                    Vec::new()
                };
                let ddg = if order >= 2 {
                    (0..nn)
                        .map(|lm| amplitude.iter().map(|a| a * rj.hess[lm]).collect())
                        .collect()
                } else {
                    Vec::new()
                };
                MetricJet { g, dg, ddg }
            }
            PrincipalTerm::Ring {
                radius,
                width,
                twist,
            } => ring_jet(x, *radius, *width, *twist, order),
        }
    }

    /// `sum_{jk} d_j d_k g^{jk}(x)` and, when available, its gradient.
    pub fn trace_hessian(&self, x: &[f64]) -> (f64, Option<Vec<f64>>) {
        let n = self.n;
        match &self.principal {
            PrincipalTerm::Flat => (0.0, Some(vec![0.0; n])),
            PrincipalTerm::Radial { radial, amplitude } => {
                let rj = radial.jet(x, 3);
                let third = rj.third.expect("third derivatives requested");
                let value = dot(amplitude, &rj.hess);
                let grad = (0..n)
                    .map(|l| {
                        let mut acc = 0.0;
                        for jk in 0..n * n {
                            acc += amplitude[jk] * third[jk * n + l];
                        }
                        acc
                    })
                    .collect();
                (value, Some(grad))
            }
            PrincipalTerm::Ring { .. } => {
                let jet = self.jet(x, 2);
                let mut acc = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        acc += jet.ddg[j * n + k][j * n + k];
                    }
                }
                (acc, None)
            }
        }
    }

    /// `u_j(x)` and `du[l][j] = d/dx_l u_j(x)`.
    pub fn first_order(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.n;
        match &self.first {
            None => (vec![0.0; n], vec![vec![0.0; n]; n]),
            Some((radial, amp)) => {
                let rj = radial.jet(x, 1);
                let u = amp.iter().map(|a| a * rj.value).collect();
                let du = (0..n)
                    .map(|l| amp.iter().map(|a| a * rj.grad[l]).collect())
                    .collect();
                (u, du)
            }
        }
    }

    /// `u_0(x)` and its gradient.
    pub fn zeroth_order(&self, x: &[f64]) -> (f64, Vec<f64>) {
        match &self.zeroth {
            None => (0.0, vec![0.0; self.n]),
            Some((radial, amp)) => {
                let rj = radial.jet(x, 1);
                (amp * rj.value, rj.grad.iter().map(|g| amp * g).collect())
            }
        }
    }

    /// Sampled decay constants `C_k = max |d^k (g - g0)| <x>^{mu + k}` for
    /// `k = 0, 1, 2` over the given points, plus the point-by-point maxima so a
    /// caller can check that the ratios stay bounded as `|x|` grows.
    pub fn decay_certificate(&self, points: &[Vec<f64>]) -> Result<DecayCertificate> {
        let n = self.n;
        let mut constants = [0.0f64; 3];
        let mut per_point = Vec::with_capacity(points.len());
        for x in points {
            self.check_point(x)?;
            let jet = self.jet(x, 2);
            let w = japanese(x);
            let d0 = jet
                .g
                .iter()
                .zip(&self.flat)
                .fold(0.0f64, |m, (g, g0)| m.max((g - g0).abs()));
            let d1 = jet.dg.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            let d2 = jet.ddg.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            let ratios = [
                d0 * w.powf(self.mu),
                d1 * w.powf(self.mu + 1.0),
                d2 * w.powf(self.mu + 2.0),
            ];
            for k in 0..3 {
                constants[k] = constants[k].max(ratios[k]);
            }
            per_point.push(ratios);
        }
        let _ = n;
        Ok(DecayCertificate {
            mu: self.mu,
            constants,
            per_point,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayCertificate {
    pub mu: f64,
    pub constants: [f64; 3],
    pub per_point: Vec<[f64; 3]>,
}

/// Covariant ring metric
/// `eta - phi(r) w w^T / r^2 + twist phi(r) (e_0 w^T + w e_0^T)`,
/// `w = (0, -x_2, x_1)`, inverted pointwise.
fn ring_jet(x: &[f64], radius: f64, width: f64, twist: f64, order: usize) -> MetricJet {
    let n = 3;
    let nn = 9;
    let eta = [-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    let r = (x[1] * x[1] + x[2] * x[2]).sqrt();
    let s = (r - radius) / width;
    let flat_jet = || MetricJet {
        g: eta.to_vec(),
        dg: if order >= 1 { vec![vec![0.0; nn]; n] } else { Vec::new() },
        ddg: if order >= 2 { vec![vec![0.0; nn]; nn] } else { Vec::new() },
    };
    if s.abs() >= 2.0 {
        return flat_jet();
    }
    let phi = chi2_jet(s);
    let (p0, p1, p2) = (phi.value, phi.d1 / width, phi.d2 / (width * width));
    let a0 = p0 / (r * r);
    let a1 = p1 / (r * r) - 2.0 * p0 / (r * r * r);
    let a2 = p2 / (r * r) - 4.0 * p1 / (r * r * r) + 6.0 * p0 / (r * r * r * r);
    let w = [0.0, -x[2], x[1]];
    let dw = |l: usize| -> [f64; 3] {
        match l {
            1 => [0.0, 0.0, 1.0],
            2 => [0.0, -1.0, 0.0],
            _ => [0.0; 3],
        }
    };
    let outer = |a: &[f64; 3], b: &[f64; 3]| -> Vec<f64> {
        let mut m = vec![0.0; nn];
        for i in 0..3 {
            for j in 0..3 {
                m[i * 3 + j] = a[i] * b[j];
            }
        }
        m
    };
    let sym = |a: &[f64; 3], b: &[f64; 3]| -> Vec<f64> {
        let mut m = outer(a, b);
        let t = outer(b, a);
        for (u, v) in m.iter_mut().zip(&t) {
            *u += v;
        }
        m
    };
    let e0 = [1.0, 0.0, 0.0];
    let ww = outer(&w, &w);
    let ew = sym(&e0, &w);
    // radial derivatives d/dx_l of a function of r
    let rl = |l: usize| if l == 0 { 0.0 } else { x[l] / r };
    let rlm = |l: usize, m: usize| {
        if l == 0 || m == 0 {
            0.0
        } else {
            let d = if l == m { 1.0 } else { 0.0 };
            d / r - x[l] * x[m] / (r * r * r)
        }
    };
    let mut gcov = eta.to_vec();
    for k in 0..nn {
        gcov[k] += -a0 * ww[k] + twist * p0 * ew[k];
    }
    let mut dgcov = Vec::new();
    if order >= 1 {
        for l in 0..3 {
            let dwl = dw(l);
            let d_ww = sym(&dwl, &w);
            let d_ew = sym(&e0, &dwl);
            let (al, bl) = (a1 * rl(l), twist * p1 * rl(l));
            let m: Vec<f64> = (0..nn)
                .map(|k| -(al * ww[k] + a0 * d_ww[k]) + bl * ew[k] + twist * p0 * d_ew[k])
                .collect();
            dgcov.push(m);
        }
    }
    let mut ddgcov = Vec::new();
    if order >= 2 {
        for l in 0..3 {
            for m in 0..3 {
                let (dwl, dwm) = (dw(l), dw(m));
                let dl_ww = sym(&dwl, &w);
                let dm_ww = sym(&dwm, &w);
                let dlm_ww = sym(&dwl, &dwm);
                let dl_ew = sym(&e0, &dwl);
                let dm_ew = sym(&e0, &dwm);
                let alm = a2 * rl(l) * rl(m) + a1 * rlm(l, m);
                let (al, am) = (a1 * rl(l), a1 * rl(m));
                let blm = twist * (p2 * rl(l) * rl(m) + p1 * rlm(l, m));
                let (bl, bm) = (twist * p1 * rl(l), twist * p1 * rl(m));
                let mat: Vec<f64> = (0..nn)
                    .map(|k| {
                        -(alm * ww[k] + al * dm_ww[k] + am * dl_ww[k] + a0 * dlm_ww[k])
                            + blm * ew[k]
                            + bl * dm_ew[k]
                            + bm * dl_ew[k]
                    })
                    .collect();
                ddgcov.push(mat);
            }
        }
    }
    let inv = DMatrix::from_row_slice(3, 3, &gcov)
        .try_inverse()
        .expect("ring metric is nondegenerate");
    let g: Vec<f64> = inv.transpose().as_slice().to_vec();
    let neg_conj = |d: &[f64]| -> Vec<f64> {
        let t = matmul(&matmul(&g, d, 3), &g, 3);
        t.iter().map(|v| -v).collect()
    };
    let dg: Vec<Vec<f64>> = dgcov.iter().map(|d| neg_conj(d)).collect();
    let mut ddg = Vec::new();
    if order >= 2 {
        for l in 0..3 {
            for m in 0..3 {
                let a = matmul(&matmul(&matmul(&matmul(&g, &dgcov[l], 3), &g, 3), &dgcov[m], 3), &g, 3);
                let b = matmul(&matmul(&matmul(&matmul(&g, &dgcov[m], 3), &g, 3), &dgcov[l], 3), &g, 3);
                let c = matmul(&matmul(&g, &ddgcov[l * 3 + m], 3), &g, 3);
                ddg.push((0..nn).map(|k| a[k] + b[k] - c[k]).collect());
            }
        }
    }
    MetricJet { g, dg, ddg }
}

/// Covariant ring metric at `x`, used to build initial data tangent to the ring.
pub fn ring_covariant(g: &Cometric, x: &[f64]) -> Option<Vec<f64>> {
    if !g.is_ring_trap() {
        return None;
    }
    let inv = DMatrix::from_row_slice(3, 3, &g.at(x)).try_inverse()?;
    Some(inv.transpose().as_slice().to_vec())
}

/// `v(xi) = 2 g0 xi` and its unit vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Velocity {
    pub v: Vec<f64>,
    pub v_hat: Vec<f64>,
}

pub fn group_velocity(xi: &[f64], g: &Cometric) -> Result<Velocity> {
    let w = matvec(&g.flat, xi);
    let wn = norm(&w);
    if !(wn > VELOCITY_TOL) {
        return Err(Error::ZeroVelocity { norm: wn });
    }
    Ok(Velocity {
        v: w.iter().map(|c| 2.0 * c).collect(),
        v_hat: w.iter().map(|c| c / wn).collect(),
    })
}

/// Everything derived from `(x, xi)` and the flat part that the angle
/// variable, the split and the `tau` functions share.
#[derive(Debug, Clone)]
pub(crate) struct LocalFrame {
    pub v_hat: Vec<f64>,
    /// `|g0 xi|`, half the speed.
    pub w_norm: f64,
    pub x_norm: f64,
    pub x_par: f64,
    pub x_perp: Vec<f64>,
    pub perp_norm: f64,
    pub beta: f64,
    flat: Vec<f64>,
}

impl LocalFrame {
    pub fn new(x: &[f64], xi: &[f64], g: &Cometric) -> Result<Self> {
        if x.len() != g.n || xi.len() != g.n {
            return Err(Error::DimensionMismatch {
                expected: g.n,
                got: if x.len() != g.n { x.len() } else { xi.len() },
            });
        }
        let vel = group_velocity(xi, g)?;
        let w_norm = vel.v.iter().map(|c| c * c).sum::<f64>().sqrt() / 2.0;
        let x_norm = norm(x);
        let x_par = dot(x, &vel.v_hat);
        let x_perp: Vec<f64> = x.iter().zip(&vel.v_hat).map(|(a, v)| a - x_par * v).collect();
        let perp_norm = norm(&x_perp);
        let beta = if x_norm > 0.0 {
            (x_par / x_norm).clamp(-1.0, 1.0)
        } else {
            f64::NAN
        };
        Ok(LocalFrame {
            v_hat: vel.v_hat,
            w_norm,
            x_norm,
            x_par,
            x_perp,
            perp_norm,
            beta,
            flat: g.flat.clone(),
        })
    }

    /// `d/dxi (y . v_hat) = g0 y_perp / |g0 xi|` for any fixed `y`.
    pub fn d_xi_parallel(&self, y: &[f64]) -> Vec<f64> {
        let yp = dot(y, &self.v_hat);
        let y_perp: Vec<f64> = y.iter().zip(&self.v_hat).map(|(a, v)| a - yp * v).collect();
        matvec(&self.flat, &y_perp)
            .into_iter()
            .map(|c| c / self.w_norm)
            .collect()
    }

    /// Unit vector along `x_perp`, or zero when `x_perp` vanishes; the zero
    /// choice is the average of the two one-sided limits.
    pub fn perp_hat(&self) -> Vec<f64> {
        if self.perp_norm > PERP_TOL * self.x_norm.max(f64::MIN_POSITIVE) {
            self.x_perp.iter().map(|c| c / self.perp_norm).collect()
        } else {
            vec![0.0; self.x_perp.len()]
        }
    }

    /// `(d_x beta, d_xi beta)`.
    pub fn grad_beta(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let r = self.x_norm;
        let dx = self
            .v_hat
            .iter()
            .zip(x)
            .map(|(v, xc)| (v - xc / r * self.beta) / r)
            .collect();
        let dxi = self.d_xi_parallel(x).into_iter().map(|c| c / r).collect();
        (dx, dxi)
    }

    /// `tau` and its gradient for the given orientation, with `c0` computed
    /// from `sigma_inf`. No domain check.
    pub fn tau_jet(&self, orientation: Orientation, c0: f64) -> (f64, Vec<f64>, Vec<f64>) {
        let n = self.v_hat.len();
        let ph = self.perp_hat();
        let dpar = matvec(&self.flat, &self.x_perp)
            .into_iter()
            .map(|c| c / self.w_norm)
            .collect::<Vec<_>>();
        // d_xi |x_perp| = -x_par g0 perp_hat / |w|
        let g_ph = matvec(&self.flat, &ph);
        let dperp: Vec<f64> = g_ph.iter().map(|c| -self.x_par * c / self.w_norm).collect();
        let s = match orientation {
            Orientation::Incoming => 1.0,
            Orientation::Outgoing => -1.0,
        };
        // incoming: c0 |x_perp| - x_par; outgoing: x_par - c0 |x_perp|
        let tau = s * (c0 * self.perp_norm - self.x_par);
        let dx = (0..n).map(|i| s * (c0 * ph[i] - self.v_hat[i])).collect();
        let dxi = (0..n).map(|i| s * (c0 * dperp[i] - dpar[i])).collect();
        (tau, dx, dxi)
    }
}

/// `sigma / sqrt(1 - sigma^2)`.
pub fn c0_of(sigma_inf: f64) -> f64 {
    sigma_inf / (1.0 - sigma_inf * sigma_inf).sqrt()
}

fn excluded(p: &PhasePoint) -> Result<()> {
    if p.x.iter().all(|v| *v == 0.0) {
        return Err(Error::ExcludedPoint("x = 0"));
    }
    if p.xi.iter().all(|v| *v == 0.0) {
        return Err(Error::ExcludedPoint("xi = 0"));
    }
    if !p.is_finite() {
        return Err(Error::invalid("non-finite phase point"));
    }
    Ok(())
}

/// `x_hat . v_hat(xi)`.
pub fn beta(p: &PhasePoint, g: &Cometric) -> Result<f64> {
    excluded(p)?;
    Ok(LocalFrame::new(&p.x, &p.xi, g)?.beta)
}

/// `(x . v_hat, x - (x . v_hat) v_hat)`.
pub fn split_parallel_perp(x: &[f64], xi: &[f64], g: &Cometric) -> Result<(f64, Vec<f64>)> {
    if xi.iter().all(|v| *v == 0.0) {
        return Err(Error::ExcludedPoint("xi = 0"));
    }
    let f = LocalFrame::new(x, xi, g)?;
    Ok((f.x_par, f.x_perp))
}

fn check_sigma(orientation: Orientation, sigma_inf: f64) -> Result<()> {
    let ok = match orientation {
        Orientation::Incoming => sigma_inf > 0.0 && sigma_inf < 1.0,
        Orientation::Outgoing => sigma_inf > -1.0 && sigma_inf < 0.0,
    };
    if !ok {
        return Err(Error::invalid(format!(
            "sigma_inf = {sigma_inf} is out of range for {orientation:?}"
        )));
    }
    Ok(())
}

fn tau_checked(p: &PhasePoint, orientation: Orientation, sigma_inf: f64, g: &Cometric) -> Result<(LocalFrame, f64)> {
    check_sigma(orientation, sigma_inf)?;
    excluded(p)?;
    let f = LocalFrame::new(&p.x, &p.xi, g)?;
    let bad = match orientation {
        Orientation::Incoming => f.beta > sigma_inf,
        Orientation::Outgoing => f.beta < sigma_inf,
    };
    if bad {
        return Err(Error::Domain {
            what: match orientation {
                Orientation::Incoming => "incoming tau",
                Orientation::Outgoing => "outgoing tau",
            },
            beta: f.beta,
            threshold: sigma_inf,
        });
    }
    let (tau, _, _) = f.tau_jet(orientation, c0_of(sigma_inf));
    Ok((f, tau.max(0.0)))
}

/// `c0 |x_perp| - x . v_hat` on `beta <= sigma_inf`.
pub fn tau_incoming(p: &PhasePoint, sigma_inf: f64, g: &Cometric) -> Result<f64> {
    tau_checked(p, Orientation::Incoming, sigma_inf, g).map(|(_, t)| t)
}

/// `x . v_hat - c0 |x_perp|` on `beta >= sigma_inf`, with `c0 < 0`.
pub fn tau_outgoing(p: &PhasePoint, sigma_inf: f64, g: &Cometric) -> Result<f64> {
    tau_checked(p, Orientation::Outgoing, sigma_inf, g).map(|(_, t)| t)
}

/// `(d_x tau, d_xi tau)`. In dimension one `x_perp` vanishes identically and
/// the formula is smooth, so only `n >= 2` rejects the direction singularity.
pub fn grad_tau(
    p: &PhasePoint,
    orientation: Orientation,
    sigma_inf: f64,
    g: &Cometric,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (f, _) = tau_checked(p, orientation, sigma_inf, g)?;
    if g.n >= 2 && f.perp_norm < PERP_TOL * f.x_norm {
        return Err(Error::SingularConfiguration {
            perp: f.perp_norm,
            tol: PERP_TOL,
        });
    }
    let (_, dx, dxi) = f.tau_jet(orientation, c0_of(sigma_inf));
    Ok((dx, dxi))
}
