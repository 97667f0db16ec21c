//! Semiclassical Weyl quantization on a periodic grid.
//!
//! Positions are `x_j = -L + j dx` with `dx = 2L / N` per axis and momenta are
//! `xi_m = h pi m / L` for `m` in `[-N/2, N/2)`. The matrix entries are
//!
//! ```text
//! A[j, k] = N^{-n} sum_m exp(2 pi i m . (j - k) / N) a((x_j + x_k) / 2, xi_m)
//! ```
//!
//! with `j - k` wrapped into `[-N/2, N/2)` per axis and the midpoint taken on
//! the half grid. The wrap-around offset `-N/2` has two equally valid
//! midpoints, half a box apart; both are averaged, which keeps real symbols
//! exactly Hermitian. For every midpoint the momentum sum is one FFT.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PhasePoint;
use crate::symbols::{poisson, Jet, Symbol, SymbolClass};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

fn default_margin() -> f64 {
    0.05
}

fn default_margin_factor() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    /// Box half-width `L`.
    pub half_width: f64,
    /// Points per axis, a power of two.
    pub points: usize,
    pub h: f64,
    /// Symbols must vanish for `|x_i| > L (1 - margin)`.
    #[serde(default = "default_margin")]
    pub margin: f64,
    /// Momentum supports must lie within `nyquist / margin_factor`.
    #[serde(default = "default_margin_factor")]
    pub margin_factor: f64,
}

impl GridSpec {
    pub fn new(dim: usize, half_width: f64, points: usize, h: f64) -> Result<Self> {
        let g = GridSpec {
            dim,
            half_width,
            points,
            h,
            margin: default_margin(),
            margin_factor: default_margin_factor(),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dim == 1 || self.dim == 2) {
            return Err(Error::invalid(format!("grid dimension must be 1 or 2, got {}", self.dim)));
        }
        if !self.points.is_power_of_two() || self.points < 4 {
            return Err(Error::invalid(format!("points per axis must be a power of two >= 4, got {}", self.points)));
        }
        if !(self.half_width > 0.0 && self.h > 0.0 && self.half_width.is_finite() && self.h.is_finite()) {
            return Err(Error::invalid("half-width and h must be positive"));
        }
        if !(0.0..1.0).contains(&self.margin) || self.margin_factor < 2.0 {
            return Err(Error::invalid("margin must lie in [0, 1) and margin_factor must be >= 2"));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    /// Size of the matrices, `N^n`.
    pub fn size(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    /// Largest representable momentum, `pi N h / (2 L)`.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI * self.points as f64 * self.h / (2.0 * self.half_width)
    }

    pub fn axis(&self) -> Vec<f64> {
        let dx = self.spacing();
        (0..self.points)
            .map(|j| -self.half_width + j as f64 * dx)
            .collect()
    }

    pub fn momentum(&self, m: i64) -> f64 {
        self.h * std::f64::consts::PI * m as f64 / self.half_width
    }

    /// Multi-index of a flat grid index, last axis fastest.
    pub fn unflatten(&self, idx: usize) -> Vec<usize> {
        let n = self.points;
        if self.dim == 1 {
            vec![idx]
        } else {
            vec![idx / n, idx % n]
        }
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let dx = self.spacing();
        self.unflatten(idx)
            .into_iter()
            .map(|j| -self.half_width + j as f64 * dx)
            .collect()
    }

    /// Measure of one grid cell, `dx^n`.
    pub fn cell(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn with_h(&self, h: f64) -> Self {
        GridSpec { h, ..*self }
    }
}

/// Which grid checks apply to a symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginPolicy {
    /// Both the position and the momentum margins.
    Strict,
    /// Coefficients of the operator itself, which are not compactly
    /// supported in `x`: only the momentum margin.
    Operator,
}

#[derive(Debug, Clone)]
pub struct QuantizedOperator {
    pub matrix: CMatrix,
    pub grid: GridSpec,
    pub symbol: String,
}

impl QuantizedOperator {
    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.matrix)
    }
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Checks the grid margins for `a`.
pub fn check_margins(a: &dyn Symbol, grid: &GridSpec, policy: MarginPolicy) -> Result<()> {
    grid.validate()?;
    if a.dim() != grid.dim {
        return Err(Error::DimensionMismatch {
            expected: grid.dim,
            got: a.dim(),
        });
    }
    let s = a.support();
    let limit = grid.half_width * (1.0 - grid.margin);
    if policy == MarginPolicy::Strict {
        match s.x_box {
            Some(b) if b <= limit => {}
            Some(b) => {
                return Err(Error::GridViolation(format!(
                    "{}: x-support {b} exceeds L (1 - margin) = {limit}",
                    a.name()
                )))
            }
            None => {
                return Err(Error::GridViolation(format!(
                    "{}: x-support is unbounded; window it first",
                    a.name()
                )))
            }
        }
    }
    if !s.xi_polynomial {
        let cap = grid.nyquist() / grid.margin_factor;
        match s.xi_radius {
            Some(r) if r <= cap => {}
            Some(r) => {
                return Err(Error::GridViolation(format!(
                    "{}: momentum support {r:.4} exceeds nyquist / {} = {cap:.4}",
                    a.name(),
                    grid.margin_factor
                )))
            }
            None => {
                return Err(Error::GridViolation(format!(
                    "{}: momentum support is unbounded",
                    a.name()
                )))
            }
        }
    }
    Ok(())
}

/// `Op_h(a)` with strict margins.
pub fn weyl_quantize(a: &dyn Symbol, grid: &GridSpec) -> Result<QuantizedOperator> {
    weyl_quantize_with(a, grid, MarginPolicy::Strict)
}

pub fn weyl_quantize_with(a: &dyn Symbol, grid: &GridSpec, policy: MarginPolicy) -> Result<QuantizedOperator> {
    check_margins(a, grid, policy)?;
    let matrix = match grid.dim {
        1 => assemble_1d(a, grid),
        _ => assemble_2d(a, grid),
    };
    Ok(QuantizedOperator {
        matrix,
        grid: *grid,
        symbol: a.name(),
    })
}

fn wrap(d: i64, n: i64) -> i64 {
    (d + n / 2).rem_euclid(n) - n / 2
}

fn half_grid(grid: &GridSpec, s: usize) -> f64 {
    let mut y = -grid.half_width + s as f64 * grid.spacing() / 2.0;
    if y >= grid.half_width {
        y -= 2.0 * grid.half_width;
    }
    y
}

fn assemble_1d(a: &dyn Symbol, grid: &GridSpec) -> CMatrix {
    let n = grid.points;
    let ni = n as i64;
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let scale = 1.0 / n as f64;
    // kernels[s][d mod N] = N^{-1} sum_m e^{2 pi i m d / N} a(y_s, xi_m)
    let kernels: Vec<Vec<Complex64>> = (0..2 * n)
        .into_par_iter()
        .map(|s| {
            let y = [half_grid(grid, s)];
            let mut buf: Vec<Complex64> = (0..n)
                .map(|idx| {
                    let m = wrap(idx as i64, ni);
                    Complex64::new(a.value(&y, &[grid.momentum(m)]) * scale, 0.0)
                })
                .collect();
            fft.process(&mut buf);
            buf
        })
        .collect();
    let mut m = CMatrix::zeros(n, n);
    for k in 0..n {
        for di in 0..n {
            let d = wrap(di as i64, ni);
            let j = (k as i64 + d).rem_euclid(ni) as usize;
            let s = (2 * k as i64 + d).rem_euclid(2 * ni) as usize;
            let v = if d == -ni / 2 {
                let s2 = (s + n) % (2 * n);
                (kernels[s][di] + kernels[s2][di]) * 0.5
            } else {
                kernels[s][di]
            };
            m[(j, k)] = v;
        }
    }
    m
}

fn assemble_2d(a: &dyn Symbol, grid: &GridSpec) -> CMatrix {
    let n = grid.points;
    let ni = n as i64;
    let size = n * n;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_inverse(n);
    let scale = 1.0 / (size as f64);
    let two_n = 2 * n;
    let kernels: Vec<Vec<Complex64>> = (0..two_n * two_n)
        .into_par_iter()
        .map(|s| {
            let (s1, s2) = (s / two_n, s % two_n);
            let y = [half_grid(grid, s1), half_grid(grid, s2)];
            let mut buf: Vec<Complex64> = (0..size)
                .map(|idx| {
                    let m1 = wrap((idx / n) as i64, ni);
                    let m2 = wrap((idx % n) as i64, ni);
                    let xi = [grid.momentum(m1), grid.momentum(m2)];
                    Complex64::new(a.value(&y, &xi) * scale, 0.0)
                })
                .collect();
            // rows then columns
            for r in 0..n {
                fft.process(&mut buf[r * n..(r + 1) * n]);
            }
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            for c in 0..n {
                for r in 0..n {
                    col[r] = buf[r * n + c];
                }
                fft.process(&mut col);
                for r in 0..n {
                    buf[r * n + c] = col[r];
                }
            }
            buf
        })
        .collect();
    let mut m = CMatrix::zeros(size, size);
    for k1 in 0..n {
        for k2 in 0..n {
            let col = k1 * n + k2;
            for d1i in 0..n {
                let d1 = wrap(d1i as i64, ni);
                let j1 = (k1 as i64 + d1).rem_euclid(ni) as usize;
                let s1 = (2 * k1 as i64 + d1).rem_euclid(2 * ni) as usize;
                let alts1: &[usize] = if d1 == -ni / 2 { &[0, 1] } else { &[0] };
                for d2i in 0..n {
                    let d2 = wrap(d2i as i64, ni);
                    let j2 = (k2 as i64 + d2).rem_euclid(ni) as usize;
                    let s2 = (2 * k2 as i64 + d2).rem_euclid(2 * ni) as usize;
                    let alts2: &[usize] = if d2 == -ni / 2 { &[0, 1] } else { &[0] };
                    let mut acc = Complex64::new(0.0, 0.0);
                    for &u in alts1 {
                        for &v in alts2 {
                            let a1 = (s1 + u * n) % two_n;
                            let a2 = (s2 + v * n) % two_n;
                            acc += kernels[a1 * two_n + a2][d1i * n + d2i];
                        }
                    }
                    let w = (alts1.len() * alts2.len()) as f64;
                    m[(j1 * n + j2, col)] = acc / w;
                }
            }
        }
    }
    m
}

/// Diagonal matrix of an `x`-only function.
pub fn multiplication(grid: &GridSpec, f: impl Fn(&[f64]) -> f64) -> CMatrix {
    let size = grid.size();
    let d = CVector::from_iterator(size, (0..size).map(|i| Complex64::new(f(&grid.point(i)), 0.0)));
    CMatrix::from_diagonal(&d)
}

/// Diagonal matrix of `<x>^{-1}`.
pub fn inverse_japanese(grid: &GridSpec) -> CMatrix {
    multiplication(grid, |x| 1.0 / crate::linalg::japanese(x))
}

/// Grid inner product `dx^n sum conj(u) v`.
pub fn inner(grid: &GridSpec, u: &CVector, v: &CVector) -> Complex64 {
    u.dotc(v) * grid.cell()
}

pub fn grid_norm(grid: &GridSpec, u: &CVector) -> f64 {
    inner(grid, u, u).re.max(0.0).sqrt()
}

/// `<psi, A psi>` in the grid inner product.
pub fn expectation(grid: &GridSpec, a: &CMatrix, psi: &CVector) -> Complex64 {
    inner(grid, psi, &(a * psi))
}

/// Gaussian wave packet `exp(-|x - x0|^2 / (2h)) exp(i x . xi0 / h)`, unit norm.
pub fn coherent_state(center: &PhasePoint, grid: &GridSpec) -> Result<CVector> {
    if center.dim() != grid.dim || center.xi.len() != grid.dim {
        return Err(Error::DimensionMismatch {
            expected: grid.dim,
            got: center.dim(),
        });
    }
    let limit = grid.half_width * (1.0 - grid.margin);
    if center.x.iter().any(|c| c.abs() > limit) {
        return Err(Error::GridViolation(format!(
            "coherent state center {:?} outside |x_i| <= {limit}",
            center.x
        )));
    }
    let h = grid.h;
    let size = grid.size();
    let mut v = CVector::from_iterator(
        size,
        (0..size).map(|i| {
            let x = grid.point(i);
            let r2: f64 = x.iter().zip(&center.x).map(|(a, b)| (a - b) * (a - b)).sum();
            let phase: f64 = x.iter().zip(&center.xi).map(|(a, b)| a * b).sum::<f64>() / h;
            Complex64::from_polar((-r2 / (2.0 * h)).exp(), phase)
        }),
    );
    let nrm = grid_norm(grid, &v);
    v /= Complex64::new(nrm, 0.0);
    Ok(v)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn lambda_min(m: &CMatrix) -> f64 {
    eigenvalues(m).into_iter().fold(f64::INFINITY, f64::min)
}

pub fn eigenvalues(m: &CMatrix) -> Vec<f64> {
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    herm.symmetric_eigenvalues().iter().copied().collect()
}

/// Hermitian eigen-decomposition `(values, vectors)`.
pub fn eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let e = herm.symmetric_eigen();
    (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
}

/// Spectral norm.
pub fn operator_norm(m: &CMatrix) -> f64 {
    if hermiticity_defect(m) < 1e-12 * (1.0 + m.norm()) {
        return eigenvalues(m).into_iter().fold(0.0, |a, v| a.max(v.abs()));
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0, |a: f64, v| a.max(*v))
}

/// Least-squares slope of `log y` against `log x`; `NaN` when fewer than two
/// positive values are available.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    sxy / sxx
}

struct BracketSymbol<'a> {
    a: &'a dyn Symbol,
    b: &'a dyn Symbol,
}

impl Symbol for BracketSymbol<'_> {
    fn dim(&self) -> usize {
        self.a.dim()
    }
    fn name(&self) -> String {
        format!("{{{}, {}}}", self.a.name(), self.b.name())
    }
    fn jet(&self, x: &[f64], xi: &[f64]) -> Jet {
        let v = poisson(&self.a.jet(x, xi), &self.b.jet(x, xi));
        Jet::constant(v, x.len())
    }
    fn support(&self) -> crate::symbols::Support {
        let (sa, sb) = (self.a.support(), self.b.support());
        crate::symbols::Support {
            x_box: match (sa.x_box, sb.x_box) {
                (Some(u), Some(v)) => Some(u.min(v)),
                (u, None) => u,
                (None, v) => v,
            },
            xi_radius: match (sa.xi_radius, sb.xi_radius) {
                (Some(u), Some(v)) => Some(u.min(v)),
                (u, None) => u,
                (None, v) => v,
            },
            xi_polynomial: sa.xi_polynomial && sb.xi_polynomial,
        }
    }
    fn class(&self) -> SymbolClass {
        SymbolClass { k: 0.0, l: 0.0 }
    }
}

struct ProductSymbol<'a> {
    a: &'a dyn Symbol,
    b: &'a dyn Symbol,
}

impl Symbol for ProductSymbol<'_> {
    fn dim(&self) -> usize {
        self.a.dim()
    }
    fn name(&self) -> String {
        format!("{}*{}", self.a.name(), self.b.name())
    }
    fn jet(&self, x: &[f64], xi: &[f64]) -> Jet {
        Jet::constant(self.a.value(x, xi) * self.b.value(x, xi), x.len())
    }
    fn support(&self) -> crate::symbols::Support {
        BracketSymbol { a: self.a, b: self.b }.support()
    }
    fn class(&self) -> SymbolClass {
        SymbolClass { k: 0.0, l: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CalculusReport {
    pub h: Vec<f64>,
    /// `|| (i/h)[Op a, Op b] - Op({a, b}) ||`.
    pub commutator_residual: Vec<f64>,
    /// `|| Op a Op b - Op(ab) ||`.
    pub product_residual: Vec<f64>,
    pub commutator_order: f64,
    pub product_order: f64,
}

/// Order fits for the composition and commutator rules over a list of grids.
pub fn calculus_checks(a: &dyn Symbol, b: &dyn Symbol, grids: &[GridSpec]) -> Result<CalculusReport> {
    let mut report = CalculusReport {
        h: Vec::new(),
        commutator_residual: Vec::new(),
        product_residual: Vec::new(),
        commutator_order: f64::NAN,
        product_order: f64::NAN,
    };
    let bracket = BracketSymbol { a, b };
    let prod = ProductSymbol { a, b };
    for grid in grids {
        let qa = weyl_quantize(a, grid)?.matrix;
        let qb = weyl_quantize(b, grid)?.matrix;
        let qc = weyl_quantize(&bracket, grid)?.matrix;
        let qp = weyl_quantize(&prod, grid)?.matrix;
        let ab = &qa * &qb;
        let ba = &qb * &qa;
        let comm = (&ab - &ba) * Complex64::new(0.0, 1.0 / grid.h) - qc;
        report.h.push(grid.h);
        report.commutator_residual.push(operator_norm(&comm));
        report.product_residual.push(operator_norm(&(ab - qp)));
    }
    report.commutator_order = loglog_slope(&report.h, &report.commutator_residual);
    report.product_order = loglog_slope(&report.h, &report.product_residual);
    Ok(report)
}

/// Largest factor by which the Garding constant may grow from one `h` to the
/// next smaller one and still count as stable.
pub const GARDING_GROWTH: f64 = 1.1;

#[derive(Debug, Clone, Serialize)]
pub struct GardingReport {
    pub h: Vec<f64>,
    pub lambda_min: Vec<f64>,
    /// `max(0, -lambda_min) / h` at each `h`.
    pub constant: Vec<f64>,
    /// Largest ratio between two of the constants; 1 when all vanish.
    pub spread: f64,
    /// One constant valid at every `h`: the largest of `constant`.
    pub bound: f64,
    /// The constants never grow by more than [`GARDING_GROWTH`] as `h`
    /// decreases, so `bound` does not depend on how far the ladder goes.
    pub stable: bool,
}

/// Lower bound `lambda_min(Op_h(a)) >= -C h` for a nonnegative symbol.
/// `grids` are taken in decreasing `h`.
pub fn garding_check(a: &dyn Symbol, grids: &[GridSpec]) -> Result<GardingReport> {
    let mut out = GardingReport {
        h: Vec::new(),
        lambda_min: Vec::new(),
        constant: Vec::new(),
        spread: 1.0,
        bound: 0.0,
        stable: true,
    };
    for w in grids.windows(2) {
        if w[1].h >= w[0].h {
            return Err(Error::invalid("garding grids must have strictly decreasing h"));
        }
    }
    for grid in grids {
        let n = grid.points as i64;
        let mut min = f64::INFINITY;
        for i in 0..grid.size() {
            let x = grid.point(i);
            for idx in 0..grid.size() {
                let ms: Vec<i64> = grid.unflatten(idx).into_iter().map(|m| m as i64 - n / 2).collect();
                let xi: Vec<f64> = ms.iter().map(|&m| grid.momentum(m)).collect();
                min = min.min(a.value(&x, &xi));
            }
        }
        if min < -1e-14 {
            return Err(Error::NotNonnegative { min });
        }
        let q = weyl_quantize(a, grid)?;
        let lm = lambda_min(&q.matrix);
        out.h.push(grid.h);
        out.lambda_min.push(lm);
        out.constant.push((-lm).max(0.0) / grid.h);
    }
    let pos: Vec<f64> = out.constant.iter().copied().filter(|c| *c > 1e-14).collect();
    if pos.len() >= 2 {
        let mx = pos.iter().copied().fold(0.0, f64::max);
        let mn = pos.iter().copied().fold(f64::INFINITY, f64::min);
        out.spread = mx / mn;
    }
    out.bound = out.constant.iter().copied().fold(0.0, f64::max);
    out.stable = out
        .constant
        .windows(2)
        .all(|w| w[1] <= GARDING_GROWTH * w[0] + 1e-14);
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoveryReport {
    pub symbol: String,
    pub h: Vec<f64>,
    pub centers: Vec<PhasePoint>,
    /// `|<psi, Op_h(a) psi> - a(center)|`, one row per center.
    pub errors: Vec<Vec<f64>>,
    /// Fitted exponent of each row in `h`.
    pub slopes: Vec<f64>,
}

/// Coherent-state recovery of `a` at each center on each grid.
pub fn coherent_recovery(a: &dyn Symbol, centers: &[PhasePoint], grids: &[GridSpec]) -> Result<RecoveryReport> {
    let ops = grids
        .iter()
        .map(|g| Ok(weyl_quantize(a, g)?.matrix))
        .collect::<Result<Vec<_>>>()?;
    let hs: Vec<f64> = grids.iter().map(|g| g.h).collect();
    let mut errors = Vec::with_capacity(centers.len());
    for c in centers {
        let exact = a.value(&c.x, &c.xi);
        let row = grids
            .iter()
            .zip(&ops)
            .map(|(g, m)| Ok((expectation(g, m, &coherent_state(c, g)?).re - exact).abs()))
            .collect::<Result<Vec<f64>>>()?;
        errors.push(row);
    }
    let slopes = errors.iter().map(|e| loglog_slope(&hs, e)).collect();
    Ok(RecoveryReport {
        symbol: a.name(),
        h: hs,
        centers: centers.to_vec(),
        errors,
        slopes,
    })
}

/// Binary dump: 32-byte header (`WEYLMAT1`, n: u32, N: u32, L: f64, h: f64,
/// little-endian) followed by the row-major complex128 entries.
pub fn write_matrix<W: Write>(mut w: W, op: &QuantizedOperator) -> Result<()> {
    w.write_all(b"WEYLMAT1")?;
    w.write_all(&(op.grid.dim as u32).to_le_bytes())?;
    w.write_all(&(op.grid.points as u32).to_le_bytes())?;
    w.write_all(&op.grid.half_width.to_le_bytes())?;
    w.write_all(&op.grid.h.to_le_bytes())?;
    let m = &op.matrix;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_all(&m[(i, j)].re.to_le_bytes())?;
            w.write_all(&m[(i, j)].im.to_le_bytes())?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::{FnSymbol, Support, SymbolClass, Windowed};

    fn grid1(n: usize, h: f64) -> GridSpec {
        GridSpec::new(1, 8.0, n, h).unwrap()
    }

    fn bump_symbol() -> Windowed<FnSymbol> {
        // (1 + x^2 / 4)^{-1} cos(xi) windowed
        let s = FnSymbol::new(1, "smooth", SymbolClass { k: 0.0, l: 0.0 }, |x, xi| {
            let u = 1.0 / (1.0 + x[0] * x[0] / 4.0);
            Jet {
                value: u * xi[0].cos(),
                dx: vec![-u * u * x[0] / 2.0 * xi[0].cos()],
                dxi: vec![-u * xi[0].sin()],
            }
        })
        .with_support(Support {
            xi_polynomial: false,
            xi_radius: Some(1.2),
            x_box: None,
        });
        Windowed::new(s, 5.0, 7.0)
    }

    #[test]
    fn identity_symbol() {
        let g = grid1(64, 0.1);
        let one = FnSymbol::constant(1, 1.0);
        let q = weyl_quantize(&one, &g);
        assert!(q.is_err(), "unwindowed constant has unbounded x support");
        let q = weyl_quantize_with(&one, &g, MarginPolicy::Operator).unwrap();
        let d = (&q.matrix - CMatrix::identity(64, 64)).map(|c| c.norm()).max();
        assert!(d < 1e-14, "{d}");
    }

    #[test]
    fn multiplication_symbol_is_diagonal() {
        let g = grid1(64, 0.1);
        let s = bump_symbol();
        let f = FnSymbol::position(1, "f", |x| (x[0].sin(), vec![x[0].cos()]));
        let w = Windowed::new(f, 5.0, 7.0);
        let q = weyl_quantize(&w, &g).unwrap();
        for j in 0..64 {
            for k in 0..64 {
                let expect = if j == k { w.value(&g.point(j), &[0.0]) } else { 0.0 };
                assert!((q.matrix[(j, k)] - Complex64::new(expect, 0.0)).norm() < 1e-13);
            }
        }
        let q = weyl_quantize(&s, &g.with_h(0.5)).unwrap();
        assert!(q.hermiticity_defect() < 1e-13);
    }

    #[test]
    fn fourier_multiplier_is_circulant() {
        let g = grid1(32, 0.2);
        let a = FnSymbol::new(1, "cos", SymbolClass { k: 0.0, l: 0.0 }, |_, xi| Jet {
            value: xi[0].cos(),
            dx: vec![0.0],
            dxi: vec![-xi[0].sin()],
        })
        .with_support(Support {
            xi_polynomial: true,
            ..Support::default()
        });
        let q = weyl_quantize_with(&a, &g, MarginPolicy::Operator).unwrap();
        let n = 32;
        for m in -16i64..16 {
            let v = CVector::from_iterator(n, (0..n).map(|j| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (m * j as i64) as f64 / n as f64)));
            let lam = g.momentum(m).cos();
            let r = &q.matrix * &v - &v * Complex64::new(lam, 0.0);
            assert!(r.norm() < 1e-12 * (n as f64).sqrt(), "m={m}");
        }
    }

    #[test]
    fn nyquist_margin_enforced() {
        let g = grid1(32, 0.05);
        assert!((g.nyquist() - std::f64::consts::PI * 32.0 * 0.05 / 16.0).abs() < 1e-15);
        assert!(matches!(weyl_quantize(&bump_symbol(), &g), Err(Error::GridViolation(_))));
    }

    #[test]
    fn coherent_state_norm_and_overlap() {
        let g = grid1(256, 0.05);
        let a = coherent_state(&PhasePoint::new(vec![-2.0], vec![1.0]), &g).unwrap();
        let b = coherent_state(&PhasePoint::new(vec![2.0], vec![1.0]), &g).unwrap();
        assert!((grid_norm(&g, &a) - 1.0).abs() < 1e-12);
        assert!(inner(&g, &a, &b).norm() < 1e-8);
        assert!(coherent_state(&PhasePoint::new(vec![7.9], vec![0.0]), &g).is_err());
    }

    #[test]
    fn two_dimensional_assembly() {
        let g = GridSpec::new(2, 6.0, 16, 0.3).unwrap();
        let s = FnSymbol::new(2, "s", SymbolClass { k: 0.0, l: 0.0 }, |x, xi| {
            Jet::constant((-(x[0] * x[0] + 2.0 * x[1] * x[1]) / 4.0).exp() * (xi[0] + 0.5 * xi[1] * xi[1]).cos(), 2)
        })
        .with_support(Support {
            xi_polynomial: true,
            ..Support::default()
        });
        let q = weyl_quantize_with(&s, &g, MarginPolicy::Operator).unwrap();
        assert!(q.hermiticity_defect() < 1e-13);
        let one = FnSymbol::constant(2, 1.0);
        let q = weyl_quantize_with(&one, &g, MarginPolicy::Operator).unwrap();
        assert!((&q.matrix - CMatrix::identity(256, 256)).map(|c| c.norm()).max() < 1e-14);
        let f = FnSymbol::position(2, "f", |x| (x[0] * x[1], vec![x[1], x[0]]));
        let q = weyl_quantize_with(&f, &g, MarginPolicy::Operator).unwrap();
        for i in 0..256 {
            let p = g.point(i);
            assert!((q.matrix[(i, i)].re - p[0] * p[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn matrix_dump_header() {
        let g = grid1(4, 0.5);
        let one = FnSymbol::constant(1, 1.0);
        let q = weyl_quantize_with(&one, &g, MarginPolicy::Operator).unwrap();
        let mut buf = Vec::new();
        write_matrix(&mut buf, &q).unwrap();
        assert_eq!(&buf[..8], b"WEYLMAT1");
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 4);
        assert_eq!(f64::from_le_bytes(buf[16..24].try_into().unwrap()), 8.0);
        assert_eq!(f64::from_le_bytes(buf[24..32].try_into().unwrap()), 0.5);
        assert_eq!(buf.len(), 32 + 16 * 16);
        assert_eq!(f64::from_le_bytes(buf[32..40].try_into().unwrap()), 1.0);
    }

    #[test]
    fn slope_fit() {
        let h = [0.2, 0.1, 0.05];
        let y: Vec<f64> = h.iter().map(|v| 3.0 * v * v).collect();
        assert!((loglog_slope(&h, &y) - 2.0).abs() < 1e-12);
    }
}
