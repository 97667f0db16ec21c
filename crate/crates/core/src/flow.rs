//! Hamilton flow of `p2`, null non-trapping certificates and the backward
//! asymptotic direction diagnostic.
//!
//! The integrator is Dormand-Prince 5(4) with embedded error control. After a
//! step passes the error test it must also keep `p2` within the conservation
//! tolerance; otherwise the step is halved and retried.

use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{group_velocity, ring_covariant, tau_incoming, Cometric, PhasePoint, Perturbation};
use crate::linalg::{dot, norm, quad_form};
use crate::symbols::{principal_symbol, Symbol};

/// `(dx/dt, dxi/dt) = (d_xi p2, -d_x p2)`.
pub fn hamilton_rhs(p: &PhasePoint, g: &Cometric) -> (Vec<f64>, Vec<f64>) {
    let jet = principal_symbol(g).jet(&p.x, &p.xi);
    (jet.dxi, jet.dx.iter().map(|v| -v).collect())
}

fn rhs_flat(state: &[f64], g: &Cometric) -> Vec<f64> {
    let n = state.len() / 2;
    let mj = g.jet(&state[..n], 1);
    let xi = &state[n..];
    let mut out = vec![0.0; 2 * n];
    for i in 0..n {
        out[i] = 2.0 * dot(&mj.g[i * n..(i + 1) * n], xi);
        out[n + i] = -quad_form(&mj.dg[i], xi);
    }
    out
}

fn p2_of(state: &[f64], g: &Cometric) -> f64 {
    let n = state.len() / 2;
    quad_form(&g.at(&state[..n]), &state[n..])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Allowed drift of `p2`, relative to `1 + |p2(0)|`.
    pub conserve: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-11,
            atol: 1e-12,
            conserve: 1e-9,
            initial_step: 1e-2,
            min_step: 1e-12,
            max_step: 1.0,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Escaped,
    HorizonReached,
    StepFailure,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
    pub p2: Vec<f64>,
    pub accepted: usize,
    pub rejected: usize,
    /// Steps halved because of a conservation breach.
    pub conservation_retries: usize,
    pub smallest_step: f64,
    pub largest_step: f64,
    pub termination: Termination,
    pub tolerances: Tolerances,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn first(&self) -> &PhasePoint {
        &self.states[0]
    }

    pub fn last(&self) -> &PhasePoint {
        self.states.last().expect("trajectory is never empty")
    }

    /// Largest `|p2(t_i) - p2(t_0)| / (1 + |p2(t_0)|)`.
    pub fn conservation_error(&self) -> f64 {
        let p0 = self.p2[0];
        self.p2
            .iter()
            .fold(0.0, |m, p| m.max((p - p0).abs() / (1.0 + p0.abs())))
    }

    /// Cubic Hermite interpolation between recorded samples.
    pub fn sample(&self, t: f64, g: &Cometric) -> Option<PhasePoint> {
        let (t0, t1) = (self.times[0], *self.times.last()?);
        if t < t0 || t > t1 {
            return None;
        }
        let i = match self.times.binary_search_by(|s| s.partial_cmp(&t).unwrap()) {
            Ok(i) => return Some(self.states[i].clone()),
            Err(i) => i - 1,
        };
        let (ta, tb) = (self.times[i], self.times[i + 1]);
        let a = state_vec(&self.states[i]);
        let b = state_vec(&self.states[i + 1]);
        let (fa, fb) = (rhs_flat(&a, g), rhs_flat(&b, g));
        let h = tb - ta;
        let s = (t - ta) / h;
        let h00 = 2.0 * s * s * s - 3.0 * s * s + 1.0;
        let h10 = s * s * s - 2.0 * s * s + s;
        let h01 = -2.0 * s * s * s + 3.0 * s * s;
        let h11 = s * s * s - s * s;
        let v: Vec<f64> = (0..a.len())
            .map(|k| h00 * a[k] + h10 * h * fa[k] + h01 * b[k] + h11 * h * fb[k])
            .collect();
        Some(split_state(&v))
    }

    /// CSV with columns `t, y_1..y_n, eta_1..eta_n, p2, beta, tau_incoming`;
    /// `beta` and `tau_incoming` are empty where undefined.
    pub fn write_csv<W: Write>(&self, mut w: W, g: &Cometric, sigma_inf: f64) -> Result<()> {
        let n = self.states[0].dim();
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("y_{i}")));
        header.extend((1..=n).map(|i| format!("eta_{i}")));
        header.extend(["p2", "beta", "tau_incoming"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
        for ((t, s), p2) in self.times.iter().zip(&self.states).zip(&self.p2) {
            let mut row = vec![format!("{t:.17e}")];
            row.extend(s.x.iter().chain(&s.xi).map(|v| format!("{v:.17e}")));
            row.push(format!("{p2:.17e}"));
            match crate::geometry::beta(s, g) {
                Ok(b) => row.push(format!("{b:.17e}")),
                Err(_) => row.push(String::new()),
            }
            match tau_incoming(s, sigma_inf, g) {
                Ok(tau) => row.push(format!("{tau:.17e}")),
                Err(_) => row.push(String::new()),
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn state_vec(p: &PhasePoint) -> Vec<f64> {
    p.x.iter().chain(&p.xi).copied().collect()
}

fn split_state(v: &[f64]) -> PhasePoint {
    let n = v.len() / 2;
    PhasePoint::new(v[..n].to_vec(), v[n..].to_vec())
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand-Prince step; returns the fifth-order solution and the error estimate.
fn dp_step(y: &[f64], h: f64, g: &Cometric, k1: Option<Vec<f64>>) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let m = y.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    k.push(k1.unwrap_or_else(|| rhs_flat(y, g)));
    for s in 1..7 {
        let mut ys = y.to_vec();
        for (j, kj) in k.iter().enumerate() {
            let a = A[s][j];
            if a != 0.0 {
                for i in 0..m {
                    ys[i] += h * a * kj[i];
                }
            }
        }
        let _ = C[s];
        k.push(rhs_flat(&ys, g));
    }
    let mut y5 = y.to_vec();
    let mut err = vec![0.0; m];
    for s in 0..7 {
        for i in 0..m {
            y5[i] += h * B5[s] * k[s][i];
            err[i] += h * (B5[s] - B4[s]) * k[s][i];
        }
    }
    // FSAL: the last stage is f(y5)
    let last = k.pop().expect("seven stages");
    (y5, err, last)
}

/// Step-by-step driver in one time direction.
struct Stepper<'a> {
    g: &'a Cometric,
    tol: Tolerances,
    t: f64,
    y: Vec<f64>,
    f: Vec<f64>,
    h: f64,
    dir: f64,
    p2_0: f64,
    accepted: usize,
    rejected: usize,
    conservation_retries: usize,
    smallest: f64,
    largest: f64,
}

enum StepResult {
    Accepted,
    Failed,
}

impl<'a> Stepper<'a> {
    fn new(p0: &PhasePoint, dir: f64, tol: Tolerances, g: &'a Cometric) -> Self {
        let y = state_vec(p0);
        let f = rhs_flat(&y, g);
        let p2_0 = p2_of(&y, g);
        Stepper {
            g,
            tol,
            t: 0.0,
            y,
            f,
            h: tol.initial_step,
            dir,
            p2_0,
            accepted: 0,
            rejected: 0,
            conservation_retries: 0,
            smallest: f64::INFINITY,
            largest: 0.0,
        }
    }

    /// Advances by one accepted step without passing `|t| = t_end`.
    fn step(&mut self, t_end: f64) -> StepResult {
        loop {
            let remaining = t_end - self.t.abs();
            let mut h = self.h.min(self.tol.max_step).min(remaining);
            if h < self.tol.min_step && remaining > self.tol.min_step {
                return StepResult::Failed;
            }
            h = h.max(f64::MIN_POSITIVE);
            let (y5, err, f5) = dp_step(&self.y, self.dir * h, self.g, Some(self.f.clone()));
            let mut e = 0.0f64;
            for i in 0..self.y.len() {
                let sc = self.tol.atol + self.tol.rtol * self.y[i].abs().max(y5[i].abs());
                e = e.max(err[i].abs() / sc);
            }
            if !e.is_finite() {
                self.rejected += 1;
                self.h = h * 0.2;
                continue;
            }
            if e > 1.0 {
                self.rejected += 1;
                self.h = h * (0.9 * e.powf(-0.2)).max(0.2);
                continue;
            }
            let drift = (p2_of(&y5, self.g) - self.p2_0).abs() / (1.0 + self.p2_0.abs());
            if drift > self.tol.conserve {
                self.conservation_retries += 1;
                self.h = h * 0.5;
                if self.h < self.tol.min_step {
                    return StepResult::Failed;
                }
                continue;
            }
            self.t += self.dir * h;
            if (t_end - self.t.abs()).abs() < 1e-12 * t_end.max(1.0) {
                self.t = self.dir * t_end;
            }
            self.y = y5;
            self.f = f5;
            self.accepted += 1;
            self.smallest = self.smallest.min(h);
            self.largest = self.largest.max(h);
            let grow = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).min(5.0) };
            self.h = h * grow;
            return StepResult::Accepted;
        }
    }

    fn point(&self) -> PhasePoint {
        split_state(&self.y)
    }

    fn p2(&self) -> f64 {
        p2_of(&self.y, self.g)
    }
}

struct Leg {
    times: Vec<f64>,
    states: Vec<PhasePoint>,
    p2: Vec<f64>,
    accepted: usize,
    rejected: usize,
    retries: usize,
    smallest: f64,
    largest: f64,
    termination: Termination,
}

fn run_leg(p0: &PhasePoint, t_end: f64, tol: Tolerances, g: &Cometric, stop_radius: Option<f64>) -> Leg {
    let dir = if t_end < 0.0 { -1.0 } else { 1.0 };
    let t_abs = t_end.abs();
    let mut st = Stepper::new(p0, dir, tol, g);
    let mut leg = Leg {
        times: vec![0.0],
        states: vec![p0.clone()],
        p2: vec![st.p2()],
        accepted: 0,
        rejected: 0,
        retries: 0,
        smallest: f64::INFINITY,
        largest: 0.0,
        termination: Termination::HorizonReached,
    };
    while st.t.abs() < t_abs {
        if st.accepted >= tol.max_steps {
            leg.termination = Termination::StepFailure;
            break;
        }
        match st.step(t_abs) {
            StepResult::Accepted => {
                leg.times.push(st.t);
                leg.states.push(st.point());
                leg.p2.push(st.p2());
                if let Some(r) = stop_radius {
                    if norm(&st.y[..p0.dim()]) > r {
                        leg.termination = Termination::Escaped;
                        break;
                    }
                }
            }
            StepResult::Failed => {
                leg.termination = Termination::StepFailure;
                break;
            }
        }
    }
    leg.accepted = st.accepted;
    leg.rejected = st.rejected;
    leg.retries = st.conservation_retries;
    leg.smallest = st.smallest;
    leg.largest = st.largest;
    leg
}

/// Integrates over `[t_minus, t_plus]` (with `t_minus <= 0 <= t_plus`) from
/// `p0` at `t = 0`. With `stop_radius`, each direction stops once `|y|`
/// exceeds it.
pub fn integrate(
    p0: &PhasePoint,
    t_span: (f64, f64),
    tol: Tolerances,
    g: &Cometric,
    stop_radius: Option<f64>,
) -> Result<Trajectory> {
    let (tm, tp) = t_span;
    if !(tm.is_finite() && tp.is_finite() && tm <= 0.0 && tp >= 0.0) {
        return Err(Error::invalid(format!("time span must satisfy t- <= 0 <= t+, got [{tm}, {tp}]")));
    }
    if !(tol.rtol > 0.0 && tol.atol > 0.0 && tol.conserve > 0.0 && tol.max_step > 0.0) {
        return Err(Error::invalid("tolerances must be positive"));
    }
    if p0.dim() != g.dim() || p0.xi.len() != g.dim() || !p0.is_finite() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            got: p0.dim(),
        });
    }
    let fwd = run_leg(p0, tp, tol, g, stop_radius);
    let bwd = if tm < 0.0 {
        Some(run_leg(p0, tm, tol, g, stop_radius))
    } else {
        None
    };
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut p2 = Vec::new();
    let mut termination = fwd.termination;
    let (mut accepted, mut rejected, mut retries) = (fwd.accepted, fwd.rejected, fwd.retries);
    let (mut smallest, mut largest) = (fwd.smallest, fwd.largest);
    if let Some(b) = &bwd {
        for i in (1..b.times.len()).rev() {
            times.push(b.times[i]);
            states.push(b.states[i].clone());
            p2.push(b.p2[i]);
        }
        accepted += b.accepted;
        rejected += b.rejected;
        retries += b.retries;
        smallest = smallest.min(b.smallest);
        largest = largest.max(b.largest);
        if b.termination == Termination::StepFailure {
            termination = Termination::StepFailure;
        } else if termination == Termination::HorizonReached && b.termination == Termination::Escaped {
            termination = Termination::Escaped;
        }
    }
    times.extend(&fwd.times);
    states.extend(fwd.states);
    p2.extend(&fwd.p2);
    Ok(Trajectory {
        times,
        states,
        p2,
        accepted,
        rejected,
        conservation_retries: retries,
        smallest_step: smallest,
        largest_step: largest,
        termination,
        tolerances: tol,
    })
}

/// `steps` fixed fifth-order steps from `0` to `t_end`; the convergence oracle.
pub fn integrate_fixed(p0: &PhasePoint, t_end: f64, steps: usize, g: &Cometric) -> PhasePoint {
    let h = t_end / steps as f64;
    let mut y = state_vec(p0);
    for _ in 0..steps {
        y = dp_step(&y, h, g, None).0;
    }
    split_state(&y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyOptions {
    pub r_escape: f64,
    /// Horizon; `None` means `1000 R_escape / |v(xi_0)|`.
    pub t_max: Option<f64>,
    pub null_tol: f64,
    /// Dwell window as a multiple of `R_escape / |v(xi_0)|`.
    pub dwell: f64,
    pub tolerances: Tolerances,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            r_escape: 20.0,
            t_max: None,
            null_tol: 1e-10,
            dwell: 1.0,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Classification {
    Escaped { t_exit_fwd: f64, t_exit_bwd: f64 },
    Trapped { horizon: f64 },
    Undetermined { reason: String },
}

impl Classification {
    pub fn is_escaped(&self) -> bool {
        matches!(self, Classification::Escaped { .. })
    }
}

enum Direction {
    Escaped(f64),
    Bounded,
    Undetermined(String),
}

fn radial_speed(y: &[f64], dir: f64, g: &Cometric) -> f64 {
    let n = y.len() / 2;
    let f = rhs_flat(y, g);
    dir * dot(&y[..n], &f[..n]) / norm(&y[..n])
}

fn classify_direction(p0: &PhasePoint, dir: f64, t_max: f64, dwell: f64, opts: &ClassifyOptions, g: &Cometric) -> Direction {
    let mut st = Stepper::new(p0, dir, opts.tolerances, g);
    let n = p0.dim();
    let mut ever_out = false;
    let mut candidate: Option<f64> = None;
    while st.t.abs() < t_max {
        if st.accepted >= opts.tolerances.max_steps {
            return Direction::Undetermined("step budget exhausted".into());
        }
        if let StepResult::Failed = st.step(t_max) {
            return Direction::Undetermined(format!("step failure at t = {}", st.t));
        }
        let r = norm(&st.y[..n]);
        let outward = radial_speed(&st.y, dir, g) > 0.0;
        if r > opts.r_escape && outward {
            ever_out = true;
            let start = *candidate.get_or_insert(st.t.abs());
            if st.t.abs() - start >= dwell {
                return Direction::Escaped(dir * start);
            }
        } else {
            if r > opts.r_escape {
                ever_out = true;
            }
            candidate = None;
        }
    }
    if ever_out {
        Direction::Undetermined("left the escape ball without sustained outward motion".into())
    } else {
        Direction::Bounded
    }
}

/// Finite-horizon certificate for null non-trapping at `(x0, xi0)`.
pub fn classify_null_nontrapping(p0: &PhasePoint, g: &Cometric, opts: &ClassifyOptions) -> Result<Classification> {
    if p0.xi.iter().all(|v| *v == 0.0) {
        return Err(Error::ExcludedPoint("xi = 0"));
    }
    let p2 = principal_symbol(g).value(&p0.x, &p0.xi);
    let bound = opts.null_tol * dot(&p0.xi, &p0.xi);
    if p2.abs() > bound {
        return Err(Error::NotNull { p2: p2.abs(), bound });
    }
    let speed = norm(&hamilton_rhs(p0, g).0).max(1e-300);
    let crossing = opts.r_escape / speed;
    let t_max = opts.t_max.unwrap_or(1e3 * crossing);
    let dwell = opts.dwell * crossing;
    let fwd = classify_direction(p0, 1.0, t_max, dwell, opts, g);
    let bwd = classify_direction(p0, -1.0, t_max, dwell, opts, g);
    Ok(match (fwd, bwd) {
        (Direction::Escaped(a), Direction::Escaped(b)) => Classification::Escaped {
            t_exit_fwd: a,
            t_exit_bwd: b,
        },
        (Direction::Bounded, Direction::Bounded) => Classification::Trapped { horizon: t_max },
        (Direction::Undetermined(r), _) => Classification::Undetermined {
            reason: format!("forward: {r}"),
        },
        (_, Direction::Undetermined(r)) => Classification::Undetermined {
            reason: format!("backward: {r}"),
        },
        (Direction::Bounded, _) => Classification::Undetermined {
            reason: "bounded forward, escaped backward".into(),
        },
        (_, Direction::Bounded) => Classification::Undetermined {
            reason: "escaped forward, bounded backward".into(),
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticDirection {
    pub times: Vec<f64>,
    /// `y_hat(t) . v_hat(eta(t))` at each sample time.
    pub values: Vec<f64>,
    /// Aitken extrapolation of the last three values.
    pub limit: f64,
}

/// Samples `y_hat . v_hat(eta)` at the backward dyadic times contained in the
/// trajectory and extrapolates the limit as `t -> -inf`.
pub fn backward_asymptotic_direction(traj: &Trajectory, g: &Cometric, r_escape: f64) -> Result<AsymptoticDirection> {
    let t0 = traj.times[0];
    let first = traj.first();
    if t0 >= 0.0 || norm(&first.x) <= r_escape {
        return Err(Error::InsufficientHorizon(format!(
            "backward leg reaches t = {t0} with |y| = {:.3e} <= {r_escape}",
            norm(&first.x)
        )));
    }
    let last_state = traj.sample(t0, g).expect("endpoint");
    if radial_speed(&state_vec(&last_state), -1.0, g) <= 0.0 {
        return Err(Error::InsufficientHorizon("not moving outward at the backward end".into()));
    }
    let mut times = Vec::new();
    let mut t = -1.0;
    while t >= t0 {
        times.push(t);
        t *= 2.0;
    }
    if times.len() < 3 {
        return Err(Error::InsufficientHorizon("fewer than three dyadic sample times".into()));
    }
    let mut values = Vec::with_capacity(times.len());
    for &t in &times {
        let p = traj.sample(t, g).expect("inside span");
        let v = group_velocity(&p.xi, g)?;
        values.push(dot(&p.x, &v.v_hat) / norm(&p.x));
    }
    let k = values.len();
    let (a, b, c) = (values[k - 3], values[k - 2], values[k - 1]);
    let den = c - 2.0 * b + a;
    let limit = if den.abs() > 1e-300 && ((c - b) * (c - b) / den).is_finite() {
        c - (c - b) * (c - b) / den
    } else {
        c
    };
    Ok(AsymptoticDirection { times, values, limit })
}

/// `count` null covectors of unit length at base points uniform in the ball
/// `|x| <= radius`, reproducible from `seed`. Each covector combines the
/// positive and negative eigendirections of `g(x)` in the ratio that makes
/// `p2` vanish.
pub fn sample_null_data(g: &Cometric, count: usize, radius: f64, seed: u64) -> Result<Vec<PhasePoint>> {
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::invalid(format!("sampling radius must be finite and nonnegative, got {radius}")));
    }
    let n = g.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > 100 * count + 100 {
            return Err(Error::invalid("could not sample null covectors; is the metric Lorentzian?"));
        }
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-radius..=radius)).collect();
        if norm(&x) > radius {
            continue;
        }
        let e = DMatrix::from_row_slice(n, n, &g.at(&x)).symmetric_eigen();
        let coeffs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut plus = vec![0.0; n];
        let mut minus = vec![0.0; n];
        let (mut qp, mut qm) = (0.0, 0.0);
        for (k, lam) in e.eigenvalues.iter().enumerate() {
            let c = coeffs[k];
            let target = if *lam > 0.0 { &mut plus } else { &mut minus };
            for (t, v) in target.iter_mut().zip(e.eigenvectors.column(k).iter()) {
                *t += c * v;
            }
            if *lam > 0.0 {
                qp += lam * c * c;
            } else {
                qm -= lam * c * c;
            }
        }
        if qp < 1e-6 || qm < 1e-6 {
            continue;
        }
        let s = (qp / qm).sqrt();
        let xi: Vec<f64> = plus.iter().zip(&minus).map(|(a, b)| a + s * b).collect();
        let len = norm(&xi);
        out.push(PhasePoint::new(x, xi.iter().map(|v| v / len).collect()));
    }
    Ok(out)
}

/// Null data tangent to the trapped ring at `count` evenly spaced angles.
/// Fails unless `g` is a ring-trap metric.
pub fn ring_null_data(g: &Cometric, count: usize) -> Result<Vec<PhasePoint>> {
    let radius = match g.spec().perturbation {
        Perturbation::RingTrap { radius, .. } => radius,
        _ => return Err(Error::invalid("ring data needs a ring_trap metric")),
    };
    (0..count)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / count.max(1) as f64;
            let x = vec![0.0, radius * t.cos(), radius * t.sin()];
            let cov = ring_covariant(g, &x).ok_or_else(|| Error::invalid("ring metric is singular"))?;
            let w = [0.0, -radius * t.sin(), radius * t.cos()];
            let xi = crate::linalg::matvec(&cov, &w);
            let len = norm(&xi);
            Ok(PhasePoint::new(x, xi.iter().map(|v| v / len).collect()))
        })
        .collect()
}
