//! Pointwise sign conditions on sample grids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{MarginReport, SampleGrid, SweepEntry};
use crate::error::{Error, Result};
use crate::geometry::{beta, Cometric, Orientation, PhasePoint};
use crate::linalg::{dot, japanese, norm};
use crate::symbols::{poisson, principal_symbol, CutoffParams, Localizer, Observable, Symbol};

/// Tolerance of every pointwise sign check.
pub const SIGN_TOL: f64 = 1e-12;

fn params_value(p: &CutoffParams) -> serde_json::Value {
    serde_json::to_value(p).unwrap_or(serde_json::Value::Null)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CutoffSignReport {
    /// `{p2, zeta}`.
    pub combined: MarginReport,
    /// `{p2, near} angle momentum`.
    pub near: MarginReport,
    /// `near {p2, angle} momentum`.
    pub angle: MarginReport,
    /// `near angle {p2, momentum}`.
    pub momentum: MarginReport,
    pub pass: bool,
}

/// `{p2, zeta_-} <= 0` and the same for each factor times the other two.
pub fn verify_incoming_cutoff_sign(params: &CutoffParams, g: &Cometric, grid: &SampleGrid) -> Result<CutoffSignReport> {
    if params.orientation != Orientation::Incoming {
        return Err(Error::invalid("incoming sign check needs incoming parameters"));
    }
    let zeta = Localizer::new(*params, g)?;
    let p2 = principal_symbol(g);
    let pts = grid.points();
    let vals: Vec<[f64; 4]> = pts
        .par_iter()
        .map(|(x, xi)| {
            let Some(f) = zeta.factors(x, xi) else {
                return [0.0; 4];
            };
            let jp = p2.jet(x, xi);
            let (a, n, m) = (f.angle.value, f.near.value, f.momentum.value);
            [
                poisson(&jp, &f.product()),
                poisson(&jp, &f.near) * a * m,
                n * poisson(&jp, &f.angle) * m,
                n * a * poisson(&jp, &f.momentum),
            ]
        })
        .collect();
    let col = |k: usize| vals.iter().map(|v| v[k]).collect::<Vec<_>>();
    let mk = |name: &str, k: usize| {
        MarginReport::from_samples(name, params_value(params), grid.describe(), &pts, &col(k), SIGN_TOL)
    };
    let combined = mk("{p2, zeta_-}", 0);
    let near = mk("{p2, near} * angle * momentum", 1);
    let angle = mk("near * {p2, angle} * momentum", 2);
    let momentum = mk("near * angle * {p2, momentum}", 3);
    let pass = combined.pass && near.pass && angle.pass && momentum.pass;
    Ok(CutoffSignReport {
        combined,
        near,
        angle,
        momentum,
        pass,
    })
}

impl CutoffSignReport {
    /// Largest value over the combined bracket and the three factor terms.
    pub fn worst(&self) -> f64 {
        [&self.combined, &self.near, &self.angle, &self.momentum]
            .iter()
            .fold(f64::NEG_INFINITY, |m, r| m.max(r.worst))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadiusSearch {
    /// First radius at which the check passes, `None` if none up to the cap.
    pub r0: Option<f64>,
    pub report: CutoffSignReport,
}

/// Doubling from `r_start` until `eval` passes, then bisection between the
/// last failing and first passing radius. `None` if nothing passes up to
/// `r_cap`.
fn radius_search(
    r_start: f64,
    r_cap: f64,
    mut eval: impl FnMut(f64) -> Result<(bool, f64)>,
) -> Result<(Option<f64>, Vec<SweepEntry>)> {
    let mut sweep = Vec::new();
    let mut step = |r: f64| -> Result<bool> {
        let (pass, worst) = eval(r)?;
        sweep.push(SweepEntry {
            parameter: "R".into(),
            value: r,
            worst,
            pass,
        });
        Ok(pass)
    };
    let mut r = r_start;
    let mut last_fail = None;
    while !step(r)? {
        last_fail = Some(r);
        r *= 2.0;
        if r > r_cap {
            return Ok((None, sweep));
        }
    }
    if let Some(mut lo) = last_fail {
        let mut hi = r;
        while hi - lo > 1e-3 * hi {
            let mid = 0.5 * (lo + hi);
            if step(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        r = hi;
    }
    Ok((Some(r), sweep))
}

/// Smallest passing radius of the incoming sign check. The grid is rebuilt
/// for every radius by `grid_for`; the returned report is the check at `r0`
/// (at the cap when nothing passes).
pub fn search_incoming_radius(
    params: &CutoffParams,
    g: &Cometric,
    grid_for: impl Fn(f64) -> SampleGrid,
    r_start: f64,
    r_cap: f64,
) -> Result<RadiusSearch> {
    let (r0, sweep) = radius_search(r_start, r_cap, |r| {
        let rep = verify_incoming_cutoff_sign(&params.with_radius(r), g, &grid_for(r))?;
        Ok((rep.pass, rep.worst()))
    })?;
    let r = r0.unwrap_or(r_cap);
    let mut report = verify_incoming_cutoff_sign(&params.with_radius(r), g, &grid_for(r))?;
    report.combined.sweep = sweep;
    if r0.is_none() {
        report.combined.notes.push(format!("no passing radius up to {r_cap}"));
    }
    Ok(RadiusSearch { r0, report })
}

/// Numerical counterpart of [`CutoffParams::plateau_constant`]: bisection for
/// the smallest `C` with the near factor identically one on the cone
/// `beta <= sigma'` (incoming) or `beta >= sigma'` (outgoing) beyond `C R`.
pub fn plateau_search(params: &CutoffParams) -> f64 {
    let (lo_b, hi_b, sg) = match params.orientation {
        Orientation::Incoming => (-1.0, params.sigma_prime, 1.0),
        Orientation::Outgoing => (params.sigma_prime, 1.0, -1.0),
    };
    let betas: Vec<f64> = (0..=4000).map(|i| lo_b + (hi_b - lo_b) * i as f64 / 4000.0).collect();
    // near argument + 1 at |y| = rho, beta; the plateau is argument <= -1
    let holds = |rho: f64| {
        betas
            .iter()
            .all(|&b| sg * b * rho - 0.5 * rho * rho * (1.0 - b * b) + 2.0 <= 0.0)
    };
    let (mut lo, mut hi) = (0.0, 1e3);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservableReport {
    /// Largest `c1 >= 0` with `{p2, b} + c1 <x>^{-1} b <= tol` on the grid.
    pub c1: f64,
    pub b_floor: f64,
    /// Share of in-support grid points with `b <= b_floor`.
    pub excluded_fraction: f64,
    /// `{p2, b} + c1 <x>^{-1} b`.
    pub report: MarginReport,
    pub pass: bool,
}

/// Extracts `c1` as the grid infimum of `-{p2, b} <x> / b` over points with
/// `b > 1e-6 max b`.
pub fn verify_incoming_observable(params: &CutoffParams, g: &Cometric, grid: &SampleGrid) -> Result<ObservableReport> {
    if params.orientation != Orientation::Incoming {
        return Err(Error::invalid("observable check needs incoming parameters"));
    }
    let b = Observable::new(*params, g)?;
    let p2 = principal_symbol(g);
    let pts = grid.points();
    let vals: Vec<(f64, f64, f64, bool)> = pts
        .par_iter()
        .map(|(x, xi)| {
            let jb = b.jet(x, xi);
            let br = if jb.value == 0.0 { 0.0 } else { poisson(&p2.jet(x, xi), &jb) };
            (jb.value, br, japanese(x), b.in_support(x, xi))
        })
        .collect();
    let b_max = vals.iter().fold(0.0f64, |m, v| m.max(v.0));
    let b_floor = 1e-6 * b_max;
    let mut c1 = f64::INFINITY;
    let (mut in_support, mut excluded) = (0usize, 0usize);
    for (bv, br, jx, ins) in &vals {
        if *ins {
            in_support += 1;
            if *bv <= b_floor {
                excluded += 1;
            }
        }
        if *bv > b_floor {
            c1 = c1.min(-br * jx / bv);
        }
    }
    if !c1.is_finite() {
        c1 = 0.0;
    }
    let c1 = c1.max(0.0);
    let margin: Vec<f64> = vals.iter().map(|(bv, br, jx, _)| br + c1 * bv / jx).collect();
    let mut report = MarginReport::from_samples(
        "{p2, b_-} + c1 <x>^{-1} b_-",
        params_value(params),
        grid.describe(),
        &pts,
        &margin,
        SIGN_TOL,
    );
    report.notes.push(format!("c1 = {c1:e}, b_floor = {b_floor:e}"));
    let excluded_fraction = if in_support == 0 {
        1.0
    } else {
        excluded as f64 / in_support as f64
    };
    let pass = c1 > 0.0 && report.pass;
    Ok(ObservableReport {
        c1,
        b_floor,
        excluded_fraction,
        report,
        pass,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupportAudit {
    pub points: usize,
    pub nonzero: usize,
    pub max_abs: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutgoingReport {
    /// `C0` of the declared support `|x| <= C0 R or sigma <= beta <= sigma'`.
    pub c0_support: f64,
    /// `{p2, zeta_+} - rho`.
    pub residual: MarginReport,
    pub audit: SupportAudit,
    pub pass: bool,
}

/// Remainder `rho = ({p2, near} angle + near {p2, angle}) momentum`; `None`
/// where the localizer vanishes identically.
fn outgoing_split(zeta: &Localizer, p2: &dyn Symbol, x: &[f64], xi: &[f64]) -> Option<(f64, f64)> {
    let f = zeta.factors(x, xi)?;
    let jp = p2.jet(x, xi);
    let rho = (poisson(&jp, &f.near) * f.angle.value + f.near.value * poisson(&jp, &f.angle)) * f.momentum.value;
    Some((poisson(&jp, &f.product()), rho))
}

fn in_declared_support(p: &CutoffParams, c0: f64, g: &Cometric, x: &[f64], xi: &[f64]) -> bool {
    let r2 = dot(xi, xi);
    if (r2 - 1.0).abs() > 4.0 * p.delta {
        return false;
    }
    if norm(x) <= c0 * p.radius {
        return true;
    }
    match beta(&PhasePoint::new(x.to_vec(), xi.to_vec()), g) {
        Ok(b) => p.sigma <= b && b <= p.sigma_prime,
        Err(_) => true,
    }
}

/// `{p2, zeta_+} <= rho` with `rho` supported in the declared set, checked on
/// `grid` and on `audit` seeded random points outside the declared set.
pub fn verify_outgoing_cutoff(
    params: &CutoffParams,
    g: &Cometric,
    grid: &SampleGrid,
    audit: usize,
    seed: u64,
) -> Result<OutgoingReport> {
    if params.orientation != Orientation::Outgoing {
        return Err(Error::invalid("outgoing check needs outgoing parameters"));
    }
    let zeta = Localizer::new(*params, g)?;
    let p2 = principal_symbol(g);
    let c0 = params.plateau_constant();
    let pts = grid.points();
    let residual: Vec<f64> = pts
        .par_iter()
        .map(|(x, xi)| match outgoing_split(&zeta, &p2, x, xi) {
            Some((full, rho)) => full - rho,
            None => 0.0,
        })
        .collect();
    let mut report = MarginReport::from_samples(
        "{p2, zeta_+} - rho",
        params_value(params),
        grid.describe(),
        &pts,
        &residual,
        SIGN_TOL,
    );
    report.notes.push(format!("declared support: |xi|^2 in [1-4delta, 1+4delta] and (|x| <= {c0} R or sigma <= beta <= sigma')"));

    let n = g.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outer = 10.0 * c0 * params.radius;
    let shell = ((1.0 - 4.0 * params.delta).max(0.0).sqrt(), (1.0 + 4.0 * params.delta).sqrt());
    let mut samples = Vec::with_capacity(audit);
    while samples.len() < audit {
        let k = samples.len();
        let ux = unit(&mut rng, n);
        let uk = unit(&mut rng, n);
        let r = if k % 4 == 3 {
            rng.random_range(0.0..outer)
        } else {
            rng.random_range(c0 * params.radius..outer)
        };
        let s = if k % 2 == 0 {
            rng.random_range(shell.0..shell.1)
        } else {
            rng.random_range(0.0..1.5)
        };
        let x: Vec<f64> = ux.iter().map(|c| r * c).collect();
        let xi: Vec<f64> = uk.iter().map(|c| s * c).collect();
        if !in_declared_support(params, c0, g, &x, &xi) {
            samples.push((x, xi));
        }
    }
    let rhos: Vec<f64> = samples
        .par_iter()
        .map(|(x, xi)| outgoing_split(&zeta, &p2, x, xi).map_or(0.0, |v| v.1))
        .collect();
    let audit_report = SupportAudit {
        points: audit,
        nonzero: rhos.iter().filter(|v| **v != 0.0).count(),
        max_abs: rhos.iter().fold(0.0, |m, v| m.max(v.abs())),
        seed,
    };
    let pass = report.pass && audit_report.nonzero == 0;
    Ok(OutgoingReport {
        c0_support: c0,
        residual: report,
        audit: audit_report,
        pass,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutgoingSearch {
    /// First radius at which the outgoing check passes.
    pub r0: Option<f64>,
    pub sweep: Vec<SweepEntry>,
    pub report: OutgoingReport,
}

/// Smallest radius at which [`verify_outgoing_cutoff`] passes, searched as
/// for the incoming cutoff.
pub fn search_outgoing_radius(
    params: &CutoffParams,
    g: &Cometric,
    grid_for: impl Fn(f64) -> SampleGrid,
    audit: usize,
    seed: u64,
    r_cap: f64,
) -> Result<OutgoingSearch> {
    let (r0, sweep) = radius_search(params.radius, r_cap, |r| {
        let rep = verify_outgoing_cutoff(&params.with_radius(r), g, &grid_for(r), audit, seed)?;
        Ok((rep.pass, rep.residual.worst))
    })?;
    let r = r0.unwrap_or(r_cap);
    let report = verify_outgoing_cutoff(&params.with_radius(r), g, &grid_for(r), audit, seed)?;
    Ok(OutgoingSearch { r0, sweep, report })
}

fn unit(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = norm(&v);
        if s > 1e-3 && s <= 1.0 {
            return v.iter().map(|c| c / s).collect();
        }
    }
}
