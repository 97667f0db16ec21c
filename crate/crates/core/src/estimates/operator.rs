//! The commutator inequality
//!
//! ```text
//! M(h) = i[B_j^2, P_h] - (c0 / h) B_j W B_j + alpha B_{j+1} W B_{j+1} >= -C h^2
//! ```
//!
//! with `B_j = Op_h(b_j)`, `W = <x>^{-1}` and `P_h = Op_h(p2) / h^2 + Op_h(q)`.
//!
//! The observables are not compactly supported in `x`, so they are multiplied
//! by a smooth box window before quantization and `M(h)` is compressed to
//! grid points well inside the window plateau. A lower bound for `M` on the
//! whole space implies the same bound for its compression; on a periodic box
//! the uncompressed matrix always has an `O(1/h)` negative part at the window
//! edge, where `b_j` must increase along the flow.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::energy::{remainder_from_negative_part, EnergyInputs};
use super::SampleGrid;
use crate::error::{Error, Result};
use crate::geometry::{Cometric, Orientation};
use crate::quantize::{
    hermiticity_defect, inverse_japanese, lambda_min, loglog_slope, weyl_quantize, weyl_quantize_with, CMatrix,
    GridSpec, MarginPolicy,
};
use crate::symbols::{principal_symbol, subprincipal_symbol, Ladder, Observable, Windowed};

/// Hermiticity tolerance for assembled matrices, relative to their scale.
const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommutatorOptions {
    /// Box window `(plateau, edge)` applied to every observable.
    pub window: (f64, f64),
    /// Compression to grid points with `|x_i| <= interior`.
    pub interior: f64,
    /// Fixed `c0`; searched when absent.
    pub c0: Option<f64>,
    /// Fixed `alpha_j`; searched when absent.
    pub alpha: Option<f64>,
    /// Candidate `c0` values as fractions of `2 c1`, tried largest first.
    pub c0_fractions: Vec<f64>,
    /// Candidate `alpha_j` values, tried smallest first.
    pub alphas: Vec<f64>,
    /// Required decay order of the negative part.
    pub order: f64,
    /// Negative parts below `floor * ||i[B^2, P]||` count as zero.
    pub floor: f64,
    /// Deliberate break: use `-i[B^2, P]`.
    pub reverse_commutator: bool,
    /// Sample-grid size for the pointwise `c1` bound.
    pub samples: usize,
}

impl Default for CommutatorOptions {
    fn default() -> Self {
        CommutatorOptions {
            window: (5.0, 6.5),
            interior: 4.5,
            c0: None,
            alpha: None,
            c0_fractions: vec![0.75, 0.5, 0.25, 0.1],
            alphas: vec![0.0, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0],
            order: 2.0,
            floor: 1e-11,
            reverse_commutator: false,
            samples: 20_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HLevel {
    pub h: f64,
    pub lambda_min: f64,
    /// `max(0, -lambda_min)`.
    pub negative_part: f64,
    /// Round-off floor below which the negative part counts as zero.
    pub floor: f64,
    pub hermiticity_defect: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchEntry {
    pub c0: f64,
    pub alpha: f64,
    pub order: Option<f64>,
    pub pass: bool,
}

/// Constants frozen for one rung.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RungConstants {
    pub j: usize,
    pub c0: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommutatorReport {
    pub rung: usize,
    /// `2 c1` from the pointwise bound on `{p2, b_j^2}`.
    pub symbol_bound: f64,
    pub c0: f64,
    pub alpha: f64,
    pub levels: Vec<HLevel>,
    /// Fitted decay order of the negative part; `None` when it is below the
    /// round-off floor at every `h`.
    pub order: Option<f64>,
    pub pass: bool,
    pub reversed: bool,
    pub search: Vec<SearchEntry>,
    pub notes: Vec<String>,
}

impl CommutatorReport {
    pub fn constants(&self) -> RungConstants {
        RungConstants {
            j: self.rung,
            c0: self.c0,
            alpha: self.alpha,
        }
    }
}

/// `P_h = Op_h(p2) / h^2 + Op_h(q)` on the grid.
pub fn assemble_hamiltonian(g: &Cometric, grid: &GridSpec) -> Result<CMatrix> {
    let h = grid.h;
    let p2 = weyl_quantize_with(&principal_symbol(g), grid, MarginPolicy::Operator)?;
    let mut p = p2.matrix * Complex64::new(1.0 / (h * h), 0.0);
    if !g.is_flat() || g.has_lower_order() {
        let q = weyl_quantize_with(&subprincipal_symbol(g, h)?, grid, MarginPolicy::Operator)?;
        p += q.matrix;
    }
    Ok(p)
}

fn compress(m: &CMatrix, idx: &[usize]) -> CMatrix {
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])])
}

fn interior_indices(grid: &GridSpec, radius: f64) -> Vec<usize> {
    (0..grid.size())
        .filter(|&i| grid.point(i).iter().all(|c| c.abs() <= radius))
        .collect()
}

/// Pieces of `M(h)` at one `h`, already compressed.
struct Pieces {
    h: f64,
    commutator: CMatrix,
    main: CMatrix,
    next: Option<CMatrix>,
    scale: f64,
}

impl Pieces {
    fn assemble(&self, c0: f64, alpha: f64) -> CMatrix {
        let mut m = &self.commutator - &self.main * Complex64::new(c0 / self.h, 0.0);
        if let Some(n) = &self.next {
            m += n * Complex64::new(alpha, 0.0);
        }
        m
    }
}

/// `M(h)` on the full grid for the quantized `B_j`, `B_{j+1}`, `P_h` and `W`.
pub fn commutator_matrix(
    b: &CMatrix,
    b_next: Option<&CMatrix>,
    p: &CMatrix,
    w: &CMatrix,
    c0: f64,
    alpha: f64,
    h: f64,
) -> CMatrix {
    let b2 = b * b;
    let comm = (&b2 * p - p * &b2) * Complex64::new(0.0, 1.0);
    let mut m = comm - b * w * b * Complex64::new(c0 / h, 0.0);
    if let Some(bn) = b_next {
        m += bn * w * bn * Complex64::new(alpha, 0.0);
    }
    m
}

/// Matrices for the energy inequality at rung `j`: `B = Op(b_j)`,
/// `Bt = sqrt(alpha) Op(b_{j+1})` and `E` from the negative part of `M(h)` on
/// the full grid, so the premise holds by construction.
pub fn rung_energy_inputs(
    ladder: &Ladder,
    j: usize,
    g: &Cometric,
    grid: &GridSpec,
    opts: &CommutatorOptions,
    constants: RungConstants,
) -> Result<EnergyInputs> {
    if j >= ladder.len() {
        return Err(Error::invalid(format!("rung {j} outside a ladder of {}", ladder.len())));
    }
    let (plateau, edge) = opts.window;
    let b = weyl_quantize(&Windowed::new(Observable::new(ladder.rung(j), g)?, plateau, edge), grid)?.matrix;
    let next = if j + 1 < ladder.len() {
        Some(weyl_quantize(&Windowed::new(Observable::new(ladder.rung(j + 1), g)?, plateau, edge), grid)?.matrix)
    } else {
        None
    };
    let p = assemble_hamiltonian(g, grid)?;
    let w = inverse_japanese(grid);
    let m = commutator_matrix(&b, next.as_ref(), &p, &w, constants.c0, constants.alpha, grid.h);
    let e = remainder_from_negative_part(&m);
    let n = grid.size();
    let b_tilde = match next {
        Some(bn) => bn * Complex64::new(constants.alpha.sqrt(), 0.0),
        None => CMatrix::zeros(n, n),
    };
    Ok(EnergyInputs {
        b,
        b_tilde,
        e,
        p,
        weight: (0..n).map(|i| w[(i, i)].re).collect(),
    })
}

fn pieces(
    ladder: &Ladder,
    j: usize,
    g: &Cometric,
    grid: &GridSpec,
    opts: &CommutatorOptions,
) -> Result<(Pieces, f64)> {
    let (plateau, edge) = opts.window;
    let b = Windowed::new(Observable::new(ladder.rung(j), g)?, plateau, edge);
    let bq = weyl_quantize(&b, grid)?.matrix;
    let next = if j + 1 < ladder.len() {
        let bn = Windowed::new(Observable::new(ladder.rung(j + 1), g)?, plateau, edge);
        Some(weyl_quantize(&bn, grid)?.matrix)
    } else {
        None
    };
    let p = assemble_hamiltonian(g, grid)?;
    let w = inverse_japanese(grid);
    let b2 = &bq * &bq;
    let sign = if opts.reverse_commutator { -1.0 } else { 1.0 };
    let comm = (&b2 * &p - &p * &b2) * Complex64::new(0.0, sign);
    let main = &bq * &w * &bq;
    let next = next.map(|bn| &bn * &w * &bn);
    let idx = interior_indices(grid, opts.interior);
    if idx.is_empty() {
        return Err(Error::GridViolation("no grid points inside the interior radius".into()));
    }
    let commutator = compress(&comm, &idx);
    let scale = commutator.norm();
    let defect = hermiticity_defect(&comm) / (1.0 + comm.norm());
    let pc = Pieces {
        h: grid.h,
        commutator,
        main: compress(&main, &idx),
        next: next.as_ref().map(|n| compress(n, &idx)),
        scale,
    };
    Ok((pc, defect))
}

fn evaluate(levels: &[(Pieces, f64)], c0: f64, alpha: f64, floor: f64, order: f64) -> (Vec<HLevel>, Option<f64>, bool) {
    let out: Vec<HLevel> = levels
        .iter()
        .map(|(pc, defect)| {
            let lm = lambda_min(&pc.assemble(c0, alpha));
            HLevel {
                h: pc.h,
                lambda_min: lm,
                negative_part: (-lm).max(0.0),
                floor: floor * pc.scale,
                hermiticity_defect: *defect,
            }
        })
        .collect();
    if out.iter().all(|l| l.negative_part <= l.floor) {
        return (out, None, true);
    }
    let hs: Vec<f64> = out.iter().map(|l| l.h).collect();
    let neg: Vec<f64> = out.iter().map(|l| l.negative_part.max(l.floor)).collect();
    let fitted = loglog_slope(&hs, &neg);
    (out, Some(fitted), fitted >= order)
}

/// Checks rung `j` of an incoming ladder over the grids (one per `h`),
/// searching `c0` and `alpha_j` unless they are fixed in `opts`.
pub fn verify_operator_commutator(
    ladder: &Ladder,
    j: usize,
    g: &Cometric,
    grids: &[GridSpec],
    opts: &CommutatorOptions,
) -> Result<CommutatorReport> {
    if ladder.orientation != Orientation::Incoming {
        return Err(Error::invalid("the operator commutator check is defined for incoming ladders"));
    }
    if j >= ladder.len() {
        return Err(Error::invalid(format!("rung {j} outside a ladder of {}", ladder.len())));
    }
    if grids.len() < 2 {
        return Err(Error::invalid("need at least two values of h"));
    }
    let rung = ladder.rung(j);
    let r = rung.radius;
    let shell = ((1.0 - 4.0 * rung.delta).sqrt(), (1.0 + 4.0 * rung.delta).sqrt());
    let sg = SampleGrid::covering(g.dim(), (r, opts.window.1.max(2.0 * r)), shell, opts.samples);
    let obs = super::verify_incoming_observable(&rung, g, &sg)?;
    let symbol_bound = 2.0 * obs.c1;

    let mut levels = Vec::with_capacity(grids.len());
    for grid in grids {
        let (pc, defect) = pieces(ladder, j, g, grid, opts)?;
        if defect > HERMITIAN_TOL {
            return Err(Error::NonHermitian { defect });
        }
        levels.push((pc, defect));
    }

    let c0s: Vec<f64> = match opts.c0 {
        Some(c) => vec![c],
        None => opts.c0_fractions.iter().map(|f| f * symbol_bound).collect(),
    };
    let alphas: Vec<f64> = match opts.alpha {
        Some(a) => vec![a],
        None => opts.alphas.clone(),
    };
    let mut search = Vec::new();
    let mut chosen = None;
    'outer: for &c0 in &c0s {
        for &alpha in &alphas {
            let (lv, order, pass) = evaluate(&levels, c0, alpha, opts.floor, opts.order);
            search.push(SearchEntry { c0, alpha, order, pass });
            if pass {
                chosen = Some((c0, alpha, lv, order));
                break 'outer;
            }
        }
    }
    let mut notes = vec![format!(
        "compressed to |x_i| <= {} inside window plateau {} (edge {})",
        opts.interior, opts.window.0, opts.window.1
    )];
    let (c0, alpha, lv, order, pass) = match chosen {
        Some((c0, alpha, lv, order)) => (c0, alpha, lv, order, true),
        None => {
            // report the most generous candidate
            let c0 = *c0s.last().unwrap_or(&0.0);
            let alpha = *alphas.last().unwrap_or(&0.0);
            let (lv, order, _) = evaluate(&levels, c0, alpha, opts.floor, opts.order);
            notes.push("no candidate (c0, alpha) reached the required order".into());
            (c0, alpha, lv, order, false)
        }
    };
    if opts.reverse_commutator {
        notes.push("deliberate break: commutator sign reversed".into());
    }
    Ok(CommutatorReport {
        rung: j,
        symbol_bound,
        c0,
        alpha,
        levels: lv,
        order,
        pass,
        reversed: opts.reverse_commutator,
        search,
        notes,
    })
}
