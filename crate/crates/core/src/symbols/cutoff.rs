//! Incoming and outgoing localizers `zeta`, observables `b = tau^gamma zeta`
//! and the ladders of parameters they are built from.
//!
//! The incoming localizer is the product of three factors:
//!
//! ```text
//! near:     chi1(y_par - |y_perp|^2 / 2 + 1),   y = x / R
//! angle:    chi1((beta - sigma) / (sigma - sigma'))
//! momentum: chi2((|xi|^2 - 1) / lambda),       lambda = 2 delta - delta <tau>^{-nu}
//! ```
//!
//! The outgoing one flips the roles: `chi1(-y_par - |y_perp|^2 / 2 + 1)`,
//! `chi1((sigma - beta) / (sigma' - sigma))` and `lambda = delta + delta <tau>^{-nu}`.
//! The zero variant swaps the momentum shell for `chi3(xi) = chi1(t - |xi|)`.

use serde::{Deserialize, Serialize};

use super::{Jet, Support, Symbol, SymbolClass};
use crate::error::{Error, Result};
use crate::geometry::{c0_of, Cometric, LocalFrame, Orientation};
use crate::linalg::dot;
use crate::smooth::{chi1_jet, chi2_jet, chi3};

fn default_threshold() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffParams {
    pub orientation: Orientation,
    pub delta: f64,
    pub sigma: f64,
    pub sigma_prime: f64,
    pub sigma_inf: f64,
    /// Radius `R` of the near-zone cutoff.
    pub radius: f64,
    pub gamma: f64,
    pub nu: f64,
    /// Threshold `t` of the low-momentum cutoff `chi1(t - |xi|)`.
    #[serde(default = "default_threshold")]
    pub xi_threshold: f64,
}

impl CutoffParams {
    pub fn incoming(delta: f64, sigma: f64, sigma_prime: f64, sigma_inf: f64, radius: f64) -> Self {
        CutoffParams {
            orientation: Orientation::Incoming,
            delta,
            sigma,
            sigma_prime,
            sigma_inf,
            radius,
            gamma: 0.05,
            nu: 0.1,
            xi_threshold: 1.0,
        }
    }

    pub fn outgoing(delta: f64, sigma: f64, sigma_prime: f64, sigma_inf: f64, radius: f64) -> Self {
        CutoffParams {
            orientation: Orientation::Outgoing,
            ..CutoffParams::incoming(delta, sigma, sigma_prime, sigma_inf, radius)
        }
    }

    pub fn with_weights(mut self, gamma: f64, nu: f64) -> Self {
        self.gamma = gamma;
        self.nu = nu;
        self
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    /// `sigma_inf / sqrt(1 - sigma_inf^2)`; negative for outgoing parameters.
    pub fn c0(&self) -> f64 {
        c0_of(self.sigma_inf)
    }

    /// Checks the orderings against the decay exponent `mu` of the metric.
    pub fn validate(&self, mu: f64) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        let all_finite = [
            self.delta,
            self.sigma,
            self.sigma_prime,
            self.sigma_inf,
            self.radius,
            self.gamma,
            self.nu,
            self.xi_threshold,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return bad("non-finite cutoff parameter".into());
        }
        if !(self.delta > 0.0 && self.delta < 0.25) {
            return bad(format!("delta must lie in (0, 1/4), got {}", self.delta));
        }
        if self.radius <= 0.0 {
            return bad(format!("radius must be positive, got {}", self.radius));
        }
        if !(self.nu > 0.0 && self.nu < mu) {
            return bad(format!("nu must lie in (0, mu = {mu}), got {}", self.nu));
        }
        if !(self.gamma >= 0.0 && self.gamma < mu) {
            return bad(format!("gamma must lie in [0, mu = {mu}), got {}", self.gamma));
        }
        if self.xi_threshold <= 0.0 {
            return bad("xi_threshold must be positive".into());
        }
        let (s1, s, si) = (self.sigma_prime, self.sigma, self.sigma_inf);
        match self.orientation {
            Orientation::Incoming => {
                if !(0.0 < s1 && s1 < s && s < si && si < 1.0) {
                    return bad(format!(
                        "incoming needs 0 < sigma' < sigma < sigma_inf < 1, got {s1}, {s}, {si}"
                    ));
                }
            }
            Orientation::Outgoing => {
                if !(-1.0 < si && si < s && s < s1 && s1 < 0.0) {
                    return bad(format!(
                        "outgoing needs -1 < sigma_inf < sigma < sigma' < 0, got {si}, {s}, {s1}"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Smallest `C` such that the near factor equals one on
    /// `{beta <= sigma', |x| >= C R}` (incoming) or
    /// `{beta >= sigma', |x| >= C R}` (outgoing).
    pub fn plateau_constant(&self) -> f64 {
        let s = match self.orientation {
            Orientation::Incoming => self.sigma_prime,
            Orientation::Outgoing => -self.sigma_prime,
        };
        let one_minus = 1.0 - s * s;
        (2.0f64).max((s + (4.0 - 3.0 * s * s).sqrt()) / one_minus)
    }

    /// Outgoing only: radius multiple beyond which the derivative of the
    /// near factor vanishes on `{beta >= sigma}`.
    pub fn transition_constant(&self) -> f64 {
        let c = c0_of(self.sigma);
        let r = (1.0 + c * c).sqrt() * (c.abs() + (c * c + 4.0).sqrt());
        r.max(2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rung {
    pub delta: f64,
    pub sigma: f64,
    pub sigma_prime: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ladder {
    pub orientation: Orientation,
    pub sigma_inf: f64,
    pub gamma: f64,
    pub nu: f64,
    #[serde(default = "default_threshold")]
    pub xi_threshold: f64,
    pub rungs: Vec<Rung>,
}

/// Sufficient conditions for rung `j + 1` to equal one on the support of rung `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Nesting {
    pub j: usize,
    /// `4 delta_j <= delta_{j+1}`.
    pub momentum: bool,
    /// `sigma_j <= sigma'_{j+1}` (incoming) or `sigma_j >= sigma'_{j+1}` (outgoing).
    pub angle: bool,
    /// `R_j >= C R_{j+1}` with the plateau constant of rung `j + 1`.
    pub radius: bool,
}

impl Ladder {
    pub fn len(&self) -> usize {
        self.rungs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rungs.is_empty()
    }

    pub fn rung(&self, j: usize) -> CutoffParams {
        let r = self.rungs[j];
        CutoffParams {
            orientation: self.orientation,
            delta: r.delta,
            sigma: r.sigma,
            sigma_prime: r.sigma_prime,
            sigma_inf: self.sigma_inf,
            radius: r.radius,
            gamma: self.gamma,
            nu: self.nu,
            xi_threshold: self.xi_threshold,
        }
    }

    pub fn validate(&self, mu: f64) -> Result<()> {
        if self.rungs.is_empty() {
            return Err(Error::invalid("ladder has no rungs"));
        }
        for j in 0..self.rungs.len() {
            self.rung(j).validate(mu)?;
        }
        for (j, w) in self.rungs.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let angles = match self.orientation {
                Orientation::Incoming => a.sigma < b.sigma && a.sigma_prime < b.sigma_prime,
                Orientation::Outgoing => a.sigma > b.sigma && a.sigma_prime > b.sigma_prime,
            };
            if !(a.delta < b.delta && angles && a.radius > b.radius) {
                return Err(Error::invalid(format!("ladder orderings fail between rungs {j} and {}", j + 1)));
            }
        }
        Ok(())
    }

    pub fn nesting(&self) -> Vec<Nesting> {
        (0..self.rungs.len().saturating_sub(1))
            .map(|j| {
                let (a, b) = (self.rungs[j], self.rungs[j + 1]);
                let next = self.rung(j + 1);
                Nesting {
                    j,
                    momentum: 4.0 * a.delta <= b.delta,
                    angle: match self.orientation {
                        Orientation::Incoming => a.sigma <= b.sigma_prime,
                        Orientation::Outgoing => a.sigma >= b.sigma_prime,
                    },
                    radius: a.radius >= next.plateau_constant() * b.radius,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentumCutoff {
    /// `chi2((|xi|^2 - 1) / lambda)`.
    Shell,
    /// `chi1(t - |xi|)`.
    LowMomentum,
}

/// Factor jets of a localizer at one point, plus the `tau` jet.
#[derive(Debug, Clone)]
pub struct LocalizerFactors {
    pub near: Jet,
    pub angle: Jet,
    pub momentum: Jet,
    pub tau: Jet,
    /// Width `lambda` of the momentum shell; `NaN` for the zero variant.
    pub lambda: f64,
    pub beta: f64,
}

impl LocalizerFactors {
    pub fn product(&self) -> Jet {
        self.near.mul(&self.angle).mul(&self.momentum)
    }
}

/// `zeta_-`, `zeta_+` or their zero variants.
#[derive(Debug, Clone)]
pub struct Localizer {
    params: CutoffParams,
    g: Cometric,
    momentum: MomentumCutoff,
}

impl Localizer {
    pub fn new(params: CutoffParams, g: &Cometric) -> Result<Self> {
        params.validate(g.mu())?;
        Ok(Localizer {
            params,
            g: g.clone(),
            momentum: MomentumCutoff::Shell,
        })
    }

    /// Zero variant with near-zone radius `params.radius` and momentum cutoff
    /// `chi1(t - |xi|)`.
    pub fn zero_variant(params: CutoffParams, g: &Cometric) -> Result<Self> {
        params.validate(g.mu())?;
        Ok(Localizer {
            params,
            g: g.clone(),
            momentum: MomentumCutoff::LowMomentum,
        })
    }

    pub fn params(&self) -> &CutoffParams {
        &self.params
    }

    pub fn momentum_cutoff(&self) -> MomentumCutoff {
        self.momentum
    }

    pub fn cometric(&self) -> &Cometric {
        &self.g
    }

    /// `None` where the localizer vanishes to infinite order.
    pub fn factors(&self, x: &[f64], xi: &[f64]) -> Option<LocalizerFactors> {
        let p = &self.params;
        let n = x.len();
        let r2 = dot(xi, xi);
        let low = match self.momentum {
            MomentumCutoff::Shell => {
                if (r2 - 1.0).abs() >= 4.0 * p.delta {
                    return None;
                }
                None
            }
            MomentumCutoff::LowMomentum => {
                let (v, d) = chi3(xi, p.xi_threshold);
                if v == 0.0 {
                    return None;
                }
                Some(Jet {
                    value: v,
                    dx: vec![0.0; n],
                    dxi: d,
                })
            }
        };
        if x.iter().all(|c| *c == 0.0) {
            return None;
        }
        let frame = LocalFrame::new(x, xi, &self.g).ok()?;
        let incoming = p.orientation == Orientation::Incoming;

        let (dbx, dbxi) = frame.grad_beta(x);
        let (arg, scale) = if incoming {
            ((frame.beta - p.sigma) / (p.sigma - p.sigma_prime), 1.0 / (p.sigma - p.sigma_prime))
        } else {
            ((p.sigma - frame.beta) / (p.sigma_prime - p.sigma), -1.0 / (p.sigma_prime - p.sigma))
        };
        let a = chi1_jet(arg);
        if a.value == 0.0 {
            return None;
        }
        let angle = Jet {
            value: a.value,
            dx: dbx.iter().map(|d| a.d1 * scale * d).collect(),
            dxi: dbxi.iter().map(|d| a.d1 * scale * d).collect(),
        };

        let rr = p.radius;
        let y_par = frame.x_par / rr;
        let y_perp2 = frame.perp_norm * frame.perp_norm / (rr * rr);
        let sgn = if incoming { 1.0 } else { -1.0 };
        let nj = chi1_jet(sgn * y_par - 0.5 * y_perp2 + 1.0);
        if nj.value == 0.0 {
            return None;
        }
        let dpar = frame.d_xi_parallel(x);
        let near = Jet {
            value: nj.value,
            dx: (0..n)
                .map(|i| nj.d1 * (sgn * frame.v_hat[i] - frame.x_perp[i] / rr) / rr)
                .collect(),
            dxi: dpar
                .iter()
                .map(|d| nj.d1 * d / rr * (sgn + y_par))
                .collect(),
        };

        let (tv, tdx, tdxi) = frame.tau_jet(p.orientation, p.c0());
        let tau = Jet {
            value: tv.max(0.0),
            dx: tdx,
            dxi: tdxi,
        };

        let (momentum, lambda) = match low {
            Some(j) => (j, f64::NAN),
            None => {
                let jt2 = 1.0 + tau.value * tau.value;
                let decay = jt2.powf(-p.nu / 2.0);
                let (lambda, dlam_dtau) = if incoming {
                    (
                        2.0 * p.delta - p.delta * decay,
                        p.delta * p.nu * decay / jt2 * tau.value,
                    )
                } else {
                    (
                        p.delta + p.delta * decay,
                        -p.delta * p.nu * decay / jt2 * tau.value,
                    )
                };
                let s = (r2 - 1.0) / lambda;
                let c = chi2_jet(s);
                // d s = 2 xi / lambda - s / lambda d lambda
                let k = -s / lambda * dlam_dtau;
                let mj = Jet {
                    value: c.value,
                    dx: tau.dx.iter().map(|d| c.d1 * k * d).collect(),
                    dxi: (0..n)
                        .map(|i| c.d1 * (2.0 * xi[i] / lambda + k * tau.dxi[i]))
                        .collect(),
                };
                (mj, lambda)
            }
        };
        Some(LocalizerFactors {
            near,
            angle,
            momentum,
            tau,
            lambda,
            beta: frame.beta,
        })
    }

    fn support_predicate(&self, x: &[f64], xi: &[f64]) -> bool {
        let p = &self.params;
        let r2 = dot(xi, xi);
        let shell_ok = match self.momentum {
            MomentumCutoff::Shell => (r2 - 1.0).abs() <= 4.0 * p.delta,
            MomentumCutoff::LowMomentum => r2.sqrt() >= p.xi_threshold,
        };
        if !shell_ok || x.iter().all(|c| *c == 0.0) {
            return false;
        }
        let Ok(frame) = LocalFrame::new(x, xi, &self.g) else {
            return false;
        };
        let angle_ok = match p.orientation {
            Orientation::Incoming => frame.beta <= p.sigma,
            Orientation::Outgoing => frame.beta >= p.sigma,
        };
        angle_ok && frame.x_norm >= p.radius
    }
}

impl Symbol for Localizer {
    fn dim(&self) -> usize {
        self.g.dim()
    }
    fn name(&self) -> String {
        let o = match self.params.orientation {
            Orientation::Incoming => "-",
            Orientation::Outgoing => "+",
        };
        match self.momentum {
            MomentumCutoff::Shell => format!("zeta{o}"),
            MomentumCutoff::LowMomentum => format!("zeta0{o}"),
        }
    }
    fn jet(&self, x: &[f64], xi: &[f64]) -> Jet {
        match self.factors(x, xi) {
            Some(f) => f.product(),
            None => Jet::zero(x.len()),
        }
    }
    fn support(&self) -> Support {
        match self.momentum {
            MomentumCutoff::Shell => Support {
                x_box: None,
                xi_radius: Some((1.0 + 4.0 * self.params.delta).sqrt()),
                xi_polynomial: false,
            },
            MomentumCutoff::LowMomentum => Support::default(),
        }
    }
    fn in_support(&self, x: &[f64], xi: &[f64]) -> bool {
        self.support_predicate(x, xi)
    }
    fn class(&self) -> SymbolClass {
        SymbolClass { k: 0.0, l: 0.0 }
    }
}

/// `b = tau^gamma zeta`, extended by zero off the support of `zeta`.
#[derive(Debug, Clone)]
pub struct Observable {
    zeta: Localizer,
}

impl Observable {
    pub fn new(params: CutoffParams, g: &Cometric) -> Result<Self> {
        Ok(Observable {
            zeta: Localizer::new(params, g)?,
        })
    }

    pub fn zero_variant(params: CutoffParams, g: &Cometric) -> Result<Self> {
        Ok(Observable {
            zeta: Localizer::zero_variant(params, g)?,
        })
    }

    pub fn localizer(&self) -> &Localizer {
        &self.zeta
    }

    pub fn params(&self) -> &CutoffParams {
        self.zeta.params()
    }

    /// Jet of `tau^gamma` from a `tau` jet; `tau > 0` on the support.
    pub fn weight(&self, tau: &Jet) -> Jet {
        let gamma = self.zeta.params.gamma;
        if gamma == 0.0 {
            return Jet::constant(1.0, tau.dx.len());
        }
        let w = tau.value.powf(gamma);
        let d = gamma * tau.value.powf(gamma - 1.0);
        Jet {
            value: w,
            dx: tau.dx.iter().map(|v| d * v).collect(),
            dxi: tau.dxi.iter().map(|v| d * v).collect(),
        }
    }
}

impl Symbol for Observable {
    fn dim(&self) -> usize {
        self.zeta.dim()
    }
    fn name(&self) -> String {
        format!("tau^{}*{}", self.zeta.params.gamma, self.zeta.name())
    }
    fn jet(&self, x: &[f64], xi: &[f64]) -> Jet {
        match self.zeta.factors(x, xi) {
            Some(f) => self.weight(&f.tau).mul(&f.product()),
            None => Jet::zero(x.len()),
        }
    }
    fn support(&self) -> Support {
        self.zeta.support()
    }
    fn in_support(&self, x: &[f64], xi: &[f64]) -> bool {
        self.zeta.in_support(x, xi)
    }
    fn class(&self) -> SymbolClass {
        SymbolClass {
            k: 0.0,
            l: self.zeta.params.gamma,
        }
    }
}

/// The zero variants `zeta^0` and `b^0` share the types above.
pub type ObservableZero = Observable;

#[cfg(test)]
mod tests {
    use super::super::testing::fd_gradient;
    use super::*;
    use crate::geometry::{tau_incoming, tau_outgoing, CometricSpec, PhasePoint};

    fn flat2() -> Cometric {
        Cometric::flat(vec![vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap()
    }

    fn inc() -> CutoffParams {
        CutoffParams::incoming(0.1, 0.5, 0.3, 0.9, 1.0).with_weights(0.05, 0.1)
    }

    fn out() -> CutoffParams {
        CutoffParams::outgoing(0.1, -0.5, -0.3, -0.9, 1.0).with_weights(0.05, 0.1)
    }

    #[test]
    fn c0_is_derived() {
        let p = inc();
        assert!((p.c0() - 0.9 / 0.19f64.sqrt()).abs() < 1e-15);
        assert!(out().c0() < 0.0);
    }

    #[test]
    fn orderings_rejected() {
        let mut p = inc();
        p.sigma_prime = 0.6;
        assert!(p.validate(0.5).is_err());
        let mut p = out();
        p.sigma = -0.95;
        assert!(p.validate(0.5).is_err());
        let mut p = inc();
        p.nu = 0.6;
        assert!(p.validate(0.5).is_err());
        assert!(Localizer::new(inc(), &flat2()).is_ok());
    }

    #[test]
    fn deep_incoming_point_is_plateau() {
        let g = Cometric::euclidean(2);
        let p = inc();
        let z = Localizer::new(p, &g).unwrap();
        let x = [-10.0 * p.plateau_constant() * p.radius, 0.0];
        let xi = [1.0, 0.0];
        let f = z.factors(&x, &xi).unwrap();
        assert_eq!(f.near.value, 1.0);
        assert_eq!(f.angle.value, 1.0);
        assert_eq!(f.momentum.value, 1.0);
        assert_eq!(z.value(&x, &xi), 1.0);
    }

    #[test]
    fn shell_edge_and_angle_edge_vanish() {
        let g = Cometric::euclidean(2);
        let p = inc();
        let z = Localizer::new(p, &g).unwrap();
        let k = (1.0 + 4.0 * p.delta).sqrt();
        assert_eq!(z.value(&[-20.0, 0.0], &[k, 0.0]), 0.0);
        // beta = sigma exactly
        let s = p.sigma;
        let x = [20.0 * s, 20.0 * (1.0 - s * s).sqrt()];
        assert_eq!(z.value(&x, &[1.0, 0.0]), 0.0);
    }

    #[test]
    fn outgoing_examples() {
        let g = Cometric::euclidean(2);
        let p = out();
        let z = Localizer::new(p, &g).unwrap();
        assert_eq!(z.value(&[50.0, 0.0], &[1.0, 0.0]), 1.0);
        let s = p.sigma;
        let x = [20.0 * s, 20.0 * (1.0 - s * s).sqrt()];
        assert_eq!(z.value(&x, &[1.0, 0.0]), 0.0);
        assert_eq!(z.value(&[50.0, 0.0], &[1.8, 0.0]), 0.0);
    }

    #[test]
    fn observable_passes_weight_through() {
        let g = Cometric::euclidean(2);
        let p = inc();
        let b = Observable::new(p, &g).unwrap();
        let x = [-30.0, 0.0];
        let xi = [1.0, 0.0];
        let tau = tau_incoming(&PhasePoint::new(x.to_vec(), xi.to_vec()), p.sigma_inf, &g).unwrap();
        assert!((b.value(&x, &xi) - tau.powf(p.gamma)).abs() < 1e-14);
        assert_eq!(b.value(&[30.0, 0.0], &xi), 0.0);
        let b0 = Observable::new(p.with_weights(0.0, 0.1), &g).unwrap();
        let z = Localizer::new(p, &g).unwrap();
        let y = [-1.7, 0.4];
        assert_eq!(b0.value(&y, &[1.02, 0.1]), z.value(&y, &[1.02, 0.1]));
        let bo = Observable::new(out(), &g).unwrap();
        let t = tau_outgoing(&PhasePoint::new(vec![30.0, 0.0], xi.to_vec()), -0.9, &g).unwrap();
        assert!((bo.value(&[30.0, 0.0], &xi) - t.powf(0.05)).abs() < 1e-14);
    }

    #[test]
    fn zero_variant_is_homogeneous_in_xi() {
        let g = Cometric::euclidean(2);
        let p = inc().with_radius(2.0);
        let z0 = Localizer::zero_variant(p, &g).unwrap();
        assert_eq!(z0.value(&[-30.0, 1.0], &[0.5, 0.2]), 0.0);
        let x = [-7.0, 2.5];
        let a = z0.value(&x, &[2.1, 0.4]);
        let b = z0.value(&x, &[2.1 * 3.0, 0.4 * 3.0]);
        assert!(a > 0.0);
        assert!((a - b).abs() < 1e-14);
        let b0 = Observable::zero_variant(p, &g).unwrap();
        let x = [-40.0, 0.0];
        let tau = tau_incoming(&PhasePoint::new(x.to_vec(), vec![3.0, 0.0]), 0.9, &g).unwrap();
        assert!((b0.value(&x, &[3.0, 0.0]) - tau.powf(p.gamma)).abs() < 1e-14);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let g = Cometric::new(CometricSpec::flat(vec![vec![1.0, 0.2], vec![0.2, -1.0]])).unwrap();
        let syms: Vec<Box<dyn Symbol>> = vec![
            Box::new(Localizer::new(inc(), &g).unwrap()),
            Box::new(Observable::new(inc(), &g).unwrap()),
            Box::new(Localizer::new(out(), &g).unwrap()),
            Box::new(Observable::new(out(), &g).unwrap()),
            Box::new(Observable::zero_variant(inc(), &g).unwrap()),
        ];
        let pts = [
            ([-1.6, 0.9], [0.95, 0.25]),
            ([-2.3, -0.4], [1.05, -0.1]),
            ([1.8, 0.5], [0.98, 0.12]),
            ([2.4, -1.1], [1.02, 0.2]),
            ([-1.9, 0.3], [1.6, 0.2]),
        ];
        let mut checked = 0;
        for s in &syms {
            for (x, xi) in &pts {
                let j = s.jet(x, xi);
                if j.value == 0.0 {
                    continue;
                }
                checked += 1;
                let (fx, fk) = fd_gradient(s.as_ref(), x, xi, 1e-4);
                for i in 0..2 {
                    let sc = 1.0 + fx[i].abs();
                    assert!((j.dx[i] - fx[i]).abs() < 1e-6 * sc, "{} dx {i} {:?}", s.name(), x);
                    let sc = 1.0 + fk[i].abs();
                    assert!((j.dxi[i] - fk[i]).abs() < 1e-6 * sc, "{} dxi {i} {:?}", s.name(), x);
                }
            }
        }
        assert!(checked >= 8, "only {checked} interior points");
    }

    #[test]
    fn plateau_constant_closed_form() {
        let p = inc();
        let s: f64 = 0.3;
        let c = (s + (4.0 - 3.0 * s * s).sqrt()) / (1.0 - s * s);
        assert!((p.plateau_constant() - c.max(2.0)).abs() < 1e-15);
    }

    #[test]
    fn ladder_checks() {
        let ladder = Ladder {
            orientation: Orientation::Incoming,
            sigma_inf: 0.9,
            gamma: 0.05,
            nu: 0.1,
            xi_threshold: 1.0,
            rungs: vec![
                Rung {
                    delta: 0.02,
                    sigma: 0.3,
                    sigma_prime: 0.2,
                    radius: 8.0,
                },
                Rung {
                    delta: 0.1,
                    sigma: 0.5,
                    sigma_prime: 0.4,
                    radius: 2.0,
                },
            ],
        };
        ladder.validate(0.5).unwrap();
        let nest = ladder.nesting();
        assert_eq!(nest.len(), 1);
        assert!(nest[0].momentum && nest[0].angle);
        let mut bad = ladder.clone();
        bad.rungs[1].radius = 9.0;
        assert!(bad.validate(0.5).is_err());
    }
}
