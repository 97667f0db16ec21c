//! The verification campaigns behind each subcommand.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::{Expectation, Format, RunConfig};
use super::report::{Check, ConstantsManifest, MANIFEST_FILE};
use crate::error::{Error, Result};
use crate::estimates::{
    ladder_cascade, plateau_search, random_states, rung_energy_inputs, search_incoming_radius, search_outgoing_radius,
    verify_energy_inequality, verify_incoming_observable, verify_operator_commutator,
    EnergyInputs, RungConstants, SampleGrid,
};
use crate::flow::{
    backward_asymptotic_direction, classify_null_nontrapping, integrate, ring_null_data, sample_null_data,
    Classification, Termination, Tolerances,
};
use crate::geometry::{tau_incoming, PhasePoint};
use crate::probe::{
    assemble_p_with, cutoff_commutator_decay, quadratic_form_reality, resolvent_kernel_probe, tail_state,
    HERMITIAN_TOL,
};
use crate::quantize::{
    calculus_checks, coherent_recovery, coherent_state, garding_check, hermiticity_defect, weyl_quantize,
    weyl_quantize_with, write_matrix, CMatrix, CVector, GridSpec, MarginPolicy,
};
use crate::symbols::{reference, FnSymbol, Symbol};

/// Largest conservation drift accepted by `flow trace`.
pub const TRACE_CONSERVATION: f64 = 1e-8;
/// Accepted range of the coherent-state recovery slope.
pub const RECOVERY_SLOPE: (f64, f64) = (0.8, 1.3);
/// Relative tolerance of the plateau value in `cascade run`.
pub const PLATEAU_TOL: f64 = 0.1;
/// Required decay order of `||B_0 psi_h||` off the support.
pub const CASCADE_ORDER: f64 = 2.0;

/// Everything a campaign needs from the command line and the config.
pub struct Context {
    pub cfg: RunConfig,
    pub seed: u64,
    pub out: PathBuf,
    pub formats: Vec<Format>,
}

/// What a campaign produced.
#[derive(Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub result: Value,
    /// Constants to merge into the manifest of the output directory.
    pub manifest: Option<ConstantsManifest>,
    /// Extra files `(name, bytes)` written next to the report.
    pub artifacts: Vec<(String, Vec<u8>)>,
}

fn missing(path: &str, message: &str) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn shell(delta: f64) -> (f64, f64) {
    ((1.0 - 4.0 * delta).max(0.0).sqrt(), (1.0 + 4.0 * delta).sqrt())
}

pub fn flow_trace(ctx: &Context) -> Result<Outcome> {
    let cfg = &ctx.cfg;
    let g = cfg.cometric()?;
    let f = &cfg.flow;
    if f.initial.is_empty() {
        return Err(missing("flow.initial", "flow trace needs at least one initial point"));
    }
    let sigma_inf = f
        .sigma_inf
        .or(cfg.cutoff.incoming.map(|p| p.sigma_inf))
        .unwrap_or(0.9);
    let trajs = f
        .initial
        .par_iter()
        .map(|p0| integrate(p0, f.t_span, f.tolerances, &g, None))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Outcome::default();
    let mut rows = Vec::new();
    for (k, tr) in trajs.iter().enumerate() {
        let drift = tr.conservation_error();
        let ok = tr.termination != Termination::StepFailure && drift <= TRACE_CONSERVATION;
        out.checks.push(Check::new(
            format!("trajectory[{k}]"),
            ok,
            format!("termination {:?}, p2 drift {drift:.3e}", tr.termination),
        ));
        let mut csv = Vec::new();
        tr.write_csv(&mut csv, &g, sigma_inf)?;
        out.artifacts.push((format!("trajectory_{k}.csv"), csv));
        rows.push(json!({
            "initial": tr.first(),
            "final": tr.last(),
            "t_span": [tr.times[0], tr.times[tr.len() - 1]],
            "samples": tr.len(),
            "accepted": tr.accepted,
            "rejected": tr.rejected,
            "conservation_retries": tr.conservation_retries,
            "smallest_step": tr.smallest_step,
            "largest_step": tr.largest_step,
            "conservation_error": drift,
            "termination": tr.termination,
        }));
    }
    out.result = json!({ "sigma_inf": sigma_inf, "trajectories": rows });
    Ok(out)
}

pub fn nontrap_scan(ctx: &Context) -> Result<Outcome> {
    let cfg = &ctx.cfg;
    let g = cfg.cometric()?;
    let f = &cfg.flow;
    let opts = f.classify_options();
    let mut data = sample_null_data(&g, f.count, f.sample_radius, ctx.seed)?;
    let sampled = data.len();
    if g.is_ring_trap() {
        data.extend(ring_null_data(&g, f.ring_points)?);
    }
    let classes = data
        .par_iter()
        .map(|p| classify_null_nontrapping(p, &g, &opts))
        .collect::<Result<Vec<_>>>()?;
    let escaped = classes.iter().filter(|c| c.is_escaped()).count();
    let trapped = classes.iter().filter(|c| matches!(c, Classification::Trapped { .. })).count();
    let undetermined = classes.len() - escaped - trapped;
    let mut out = Outcome::default();
    out.checks.push(Check::new(
        "nontrap",
        escaped == classes.len(),
        format!("{escaped} escaped, {trapped} trapped, {undetermined} undetermined of {}", classes.len()),
    ));

    let mut asymptotic = Vec::new();
    if f.asymptotic > 0 {
        let picks: Vec<&PhasePoint> = data[..sampled]
            .iter()
            .zip(&classes)
            .filter(|(_, c)| c.is_escaped())
            .map(|(p, _)| p)
            .take(f.asymptotic)
            .collect();
        let tol = Tolerances {
            max_step: 64.0,
            ..f.tolerances
        };
        let limits = picks
            .par_iter()
            .map(|p| {
                let tr = integrate(p, (-f.asymptotic_horizon, 0.0), tol, &g, None)?;
                Ok(backward_asymptotic_direction(&tr, &g, f.r_escape)?.limit)
            })
            .collect::<Result<Vec<f64>>>()?;
        let worst = limits.iter().map(|l| (l + 1.0).abs()).fold(0.0, f64::max);
        out.checks.push(Check::new(
            "asymptotic_direction",
            limits.len() == f.asymptotic && worst <= f.asymptotic_tol,
            format!("{} limits, worst |limit + 1| = {worst:.3e}", limits.len()),
        ));
        asymptotic = picks
            .iter()
            .zip(&limits)
            .map(|(p, l)| json!({ "initial": p, "limit": l }))
            .collect();
    }
    let points: Vec<Value> = data
        .iter()
        .zip(&classes)
        .enumerate()
        .map(|(k, (p, c))| json!({ "source": if k < sampled { "sampled" } else { "ring" }, "initial": p, "classification": c }))
        .collect();
    out.result = json!({
        "counts": { "escaped": escaped, "trapped": trapped, "undetermined": undetermined },
        "points": points,
        "asymptotic": asymptotic,
    });
    Ok(out)
}

pub fn escape_verify(ctx: &Context) -> Result<Outcome> {
    let cfg = &ctx.cfg;
    let g = cfg.cometric()?;
    let e = &cfg.escape;
    let (inc, outg) = (cfg.cutoff.incoming, cfg.cutoff.outgoing);
    if inc.is_none() && outg.is_none() {
        return Err(missing("cutoff", "escape verify needs cutoff.incoming or cutoff.outgoing"));
    }
    let dim = g.dim();
    let mut out = Outcome::default();
    let mut manifest = ConstantsManifest::empty();
    manifest.metric = Some(to_value(&cfg.metric));
    let mut result = serde_json::Map::new();

    if let Some(p) = inc {
        let grid_for = |r: f64| SampleGrid::covering(dim, (r, e.r_max_factor * r), shell(p.delta), e.samples);
        let search = search_incoming_radius(&p, &g, grid_for, p.radius, e.r_cap)?;
        match search.r0 {
            None => {
                out.checks.push(Check::new("incoming_radius", false, format!("no passing radius up to {}", e.r_cap)));
                result.insert("incoming_search".into(), to_value(&search));
            }
            Some(r0) => {
                let p0 = p.with_radius(r0);
                let grid = grid_for(r0);
                let sign = search.report;
                out.checks.push(Check::new(
                    "incoming_sign",
                    sign.pass,
                    format!(
                        "R0 = {r0:.6}, worst {{p2, zeta}} = {:.3e}, factors {:.3e} {:.3e} {:.3e} on {} points",
                        sign.combined.worst,
                        sign.near.worst,
                        sign.angle.worst,
                        sign.momentum.worst,
                        grid.len()
                    ),
                ));
                let obs = verify_incoming_observable(&p0, &g, &grid)?;
                out.checks.push(Check::new("incoming_c1", obs.pass, format!("c1 = {:.6e}", obs.c1)));
                let xs: Vec<Vec<f64>> = grid.points().into_iter().step_by(grid.len().div_ceil(10_000).max(1)).map(|p| p.0).collect();
                let cert = g.decay_certificate(&xs)?;
                manifest.r0 = Some(r0);
                manifest.c1 = Some(obs.c1);
                manifest.c0_plateau = Some(p0.plateau_constant());
                manifest.c0_transition = Some(p0.transition_constant());
                manifest.c_basic = Some(cert.constants);
                result.insert("incoming_search".into(), to_value(&sign.combined.sweep));
                result.insert("incoming_sign".into(), to_value(&sign));
                result.insert("incoming_observable".into(), to_value(&obs));
                result.insert(
                    "plateau".into(),
                    json!({ "closed_form": p0.plateau_constant(), "search": plateau_search(&p0), "transition": p0.transition_constant() }),
                );
                result.insert("c_basic".into(), json!({ "mu": cert.mu, "constants": cert.constants, "points": xs.len() }));
            }
        }
    }
    if let Some(p) = outg {
        let grid_for = |r: f64| SampleGrid::covering(dim, (r / 8.0, e.r_max_factor * r), shell(p.delta), e.samples);
        let search = search_outgoing_radius(&p, &g, grid_for, e.audit, ctx.seed, e.r_cap)?;
        let rep = &search.report;
        out.checks.push(Check::new(
            "outgoing",
            rep.pass,
            format!(
                "R = {}, worst {{p2, zeta+}} - rho = {:.3e}; rho nonzero at {} of {} audit points",
                search.r0.map_or_else(|| format!("none up to {}", e.r_cap), |r| format!("{r:.6}")),
                rep.residual.worst,
                rep.audit.nonzero,
                rep.audit.points
            ),
        ));
        manifest.r0_outgoing = search.r0;
        manifest.c0_outgoing = Some(rep.c0_support);
        result.insert("outgoing".into(), to_value(&search));
    }
    out.result = Value::Object(result);
    out.manifest = Some(manifest);
    Ok(out)
}

fn reference_grids(ctx: &Context) -> Result<Vec<GridSpec>> {
    match &ctx.cfg.grid {
        Some(b) => {
            if b.dimension != 1 {
                return Err(missing("grid.dimension", "quantize check uses one-dimensional reference symbols"));
            }
            b.grids()
        }
        None => [0.2, 0.1, 0.05]
            .iter()
            .map(|&h| GridSpec::new(1, reference::HALF_WIDTH, reference::POINTS, h))
            .collect(),
    }
}

pub fn quantize_check(ctx: &Context) -> Result<Outcome> {
    let grids = reference_grids(ctx)?;
    let mut out = Outcome::default();

    let one = FnSymbol::constant(1, 1.0);
    let mut id_err = 0.0f64;
    for g in &grids {
        let q = weyl_quantize_with(&one, g, MarginPolicy::Operator)?;
        let d = (&q.matrix - CMatrix::identity(g.size(), g.size())).map(|c| c.norm()).max();
        id_err = id_err.max(d);
    }
    out.checks.push(Check::new("identity", id_err <= 1e-12, format!("max |Op(1) - I| = {id_err:.3e}")));

    let rec = reference::recovery_symbol();
    let (a, b) = reference::bracket_pair();
    let nonneg = reference::nonnegative_symbol();
    let symbols: [&dyn Symbol; 4] = [&rec, &a, &b, &nonneg];
    let mut herm = 0.0f64;
    for g in &grids {
        for (i, s) in symbols.iter().enumerate() {
            let q = weyl_quantize(*s, g)?;
            herm = herm.max(hermiticity_defect(&q.matrix));
            // the recovery symbol comes first
            if ctx.cfg.output.matrices && i == 0 {
                let mut buf = Vec::new();
                write_matrix(&mut buf, &q)?;
                out.artifacts.push((format!("recovery_h{}.bin", g.h), buf));
            }
        }
    }
    out.checks.push(Check::new("hermiticity", herm <= 1e-10, format!("max |A - A*| = {herm:.3e}")));

    let centers: Vec<PhasePoint> = reference::recovery_centers()
        .into_iter()
        .map(|(x, xi)| PhasePoint::new(vec![x], vec![xi]))
        .collect();
    let recovery = coherent_recovery(&rec, &centers, &grids)?;
    let ok = recovery.slopes.iter().all(|s| (RECOVERY_SLOPE.0..=RECOVERY_SLOPE.1).contains(s));
    out.checks.push(Check::new("recovery", ok, format!("slopes {:?}", recovery.slopes)));

    let calc = calculus_checks(&a, &b, &grids)?;
    out.checks.push(Check::new(
        "commutator_order",
        calc.commutator_order >= 1.0,
        format!("order {:.3}", calc.commutator_order),
    ));

    let garding = garding_check(&nonneg, &grids)?;
    out.checks.push(Check::new(
        "garding",
        garding.stable,
        format!("C_h = {:?}, C = {:.4}", garding.constant, garding.bound),
    ));
    out.result = json!({
        "grids": grids,
        "identity_error": id_err,
        "hermiticity_defect": herm,
        "recovery": recovery,
        "calculus": calc,
        "garding": garding,
    });
    Ok(out)
}

fn ladder_and_grids(ctx: &Context) -> Result<(crate::symbols::Ladder, Vec<GridSpec>)> {
    let ladder = ctx.cfg.cutoff.ladder.clone().ok_or_else(|| missing("cutoff.ladder", "a ladder is required"))?;
    let grids = ctx.cfg.grid.as_ref().ok_or_else(|| missing("grid", "a grid block is required"))?.grids()?;
    Ok((ladder, grids))
}

/// `count` coherent states with centers drawn inside `|x_i| <= radius` and
/// `|xi_i| <= 1.5`, reproducible from `seed`.
fn coherent_states(grid: &GridSpec, count: usize, radius: f64, seed: u64) -> Result<Vec<CVector>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let x = (0..grid.dim).map(|_| rng.random_range(-radius..=radius)).collect();
            let xi = (0..grid.dim).map(|_| rng.random_range(-1.5..=1.5)).collect();
            let v = coherent_state(&PhasePoint::new(x, xi), grid)?;
            let s = v.norm();
            Ok(v / Complex64::new(s, 0.0))
        })
        .collect()
}

pub fn commutator_verify(ctx: &Context) -> Result<Outcome> {
    let (ladder, grids) = ladder_and_grids(ctx)?;
    let g = ctx.cfg.cometric()?;
    let c = &ctx.cfg.commutator;
    let rungs: Vec<usize> = if c.rungs.is_empty() {
        (0..ladder.len().saturating_sub(1).max(1)).collect()
    } else {
        c.rungs.clone()
    };
    let mut out = Outcome::default();
    let mut manifest = ConstantsManifest::empty();
    manifest.metric = Some(to_value(&ctx.cfg.metric));
    let mut reports = Vec::new();
    let mut energy = Vec::new();
    for &j in &rungs {
        let rep = verify_operator_commutator(&ladder, j, &g, &grids, &c.options)?;
        out.checks.push(Check::new(
            format!("operator[{j}]"),
            rep.pass,
            format!("c0 = {:.4}, alpha = {}, order {:?}", rep.c0, rep.alpha, rep.order),
        ));
        if rep.pass {
            manifest.rungs.push(rep.constants());
        }
        reports.push(to_value(&rep));
        if c.break_check {
            let opts = crate::estimates::CommutatorOptions {
                reverse_commutator: true,
                ..c.options.clone()
            };
            let br = verify_operator_commutator(&ladder, j, &g, &grids, &opts)?;
            out.checks.push(Check::new(
                format!("break[{j}]"),
                !br.pass,
                format!("reversed commutator order {:?} must fail", br.order),
            ));
            reports.push(to_value(&br));
        }
        let k = rep.constants();
        for (gi, grid) in grids.iter().enumerate() {
            let inputs = rung_energy_inputs(&ladder, j, &g, grid, &c.options, k)?;
            let n = grid.size();
            let stream = ctx.seed.wrapping_add(1000 * j as u64 + gi as u64);
            let mut states = random_states(n, c.random_states, stream);
            states.extend(coherent_states(grid, c.coherent_states, c.options.interior, stream)?);
            for &(re, im) in &c.z {
                let r = verify_energy_inequality(&inputs, Complex64::new(re, im), k.c0, grid.h, &states)?;
                out.checks.push(Check::new(
                    format!("energy[{j}] h={} z={re}{im:+}i", grid.h),
                    r.pass,
                    format!("premise lambda_min {:.3e}, worst slack {:.3e}", r.premise_lambda_min, r.worst_slack),
                ));
                energy.push(json!({
                    "rung": j,
                    "h": grid.h,
                    "z": [re, im],
                    "premise_lambda_min": r.premise_lambda_min,
                    "worst_slack": r.worst_slack,
                    "max_identity_residual": r.max_identity_residual,
                    "states": r.states.len(),
                    "pass": r.pass,
                }));
            }
        }
    }
    // B = 0: both sides vanish and the identity holds exactly
    if let Some(grid) = grids.first() {
        let n = grid.size();
        let p = crate::estimates::assemble_hamiltonian(&g, grid)?;
        let zero = CMatrix::zeros(n, n);
        let inputs = EnergyInputs {
            b: zero.clone(),
            b_tilde: zero.clone(),
            e: zero,
            p,
            weight: vec![1.0; n],
        };
        let states = random_states(n, 10, ctx.seed);
        let r = verify_energy_inequality(&inputs, Complex64::new(0.0, 1.0), 1.0, grid.h, &states)?;
        let exact = r.states.iter().all(|s| s.lhs == 0.0 && s.rhs == 0.0 && s.identity_residual == 0.0);
        out.checks.push(Check::new("energy_zero_observable", exact && r.pass, "B = 0 gives 0 <= 0 with zero residual"));
    }
    out.result = json!({ "commutator": reports, "energy": energy });
    out.manifest = Some(manifest);
    Ok(out)
}

fn cascade_constants(ctx: &Context) -> Result<Vec<RungConstants>> {
    let c = &ctx.cfg.cascade;
    if !c.constants.is_empty() {
        return Ok(c.constants.clone());
    }
    let path = match &c.manifest {
        Some(p) => PathBuf::from(p),
        None => ctx.out.join(MANIFEST_FILE),
    };
    if path.exists() {
        Ok(ConstantsManifest::load(&path)?.rungs)
    } else {
        Ok(Vec::new())
    }
}

pub fn cascade_run(ctx: &Context) -> Result<Outcome> {
    let (ladder, grids) = ladder_and_grids(ctx)?;
    let g = ctx.cfg.cometric()?;
    let c = &ctx.cfg.cascade;
    if c.centers.is_empty() {
        return Err(missing("cascade.centers", "cascade run needs at least one center"));
    }
    let constants = cascade_constants(ctx)?;
    let mut out = Outcome::default();
    let mut rows = Vec::new();
    for (k, center) in c.centers.iter().enumerate() {
        let p = PhasePoint::new(center.x.clone(), center.xi.clone());
        let states = grids.iter().map(|gr| coherent_state(&p, gr)).collect::<Result<Vec<_>>>()?;
        let rep = ladder_cascade(&ladder, &g, &grids, &states, &constants, &c.options)?;
        let rung0 = &rep.rungs[0];
        let mut expected = Value::Null;
        match center.expect {
            Expectation::Decay => {
                let ok = rung0.order.is_none_or(|o| o >= CASCADE_ORDER);
                out.checks.push(Check::new(format!("decay[{k}]"), ok, format!("order {:?}", rung0.order)));
            }
            Expectation::Plateau => {
                let target = tau_incoming(&p, ladder.sigma_inf, &g)?.powf(ladder.gamma);
                let got = *rung0.norms.last().expect("at least one grid");
                let rel = (got / target - 1.0).abs();
                out.checks.push(Check::new(
                    format!("plateau[{k}]"),
                    rel <= PLATEAU_TOL,
                    format!("||B0 psi|| = {got:.5} vs tau^gamma = {target:.5} (relative {rel:.3e})"),
                ));
                expected = json!(target);
            }
            Expectation::Report => {}
        }
        if !rep.chain.is_empty() {
            out.checks.push(Check::new(
                format!("chain[{k}]"),
                rep.chain_pass,
                format!("{} inequalities", rep.chain.len()),
            ));
        }
        rows.push(json!({ "center": p, "expect": center.expect, "expected_plateau": expected, "report": rep }));
    }
    out.result = json!({ "constants": constants, "centers": rows });
    Ok(out)
}

pub fn probe_run(ctx: &Context) -> Result<Outcome> {
    let g = ctx.cfg.cometric()?;
    let pb = &ctx.cfg.probe;
    let grid = GridSpec::new(g.dim(), pb.half_width, pb.points, 1.0)?;
    let op = assemble_p_with(&g, &grid, pb.injection)?;
    let mut out = Outcome::default();
    let defect = hermiticity_defect(&op.matrix) / (1.0 + op.matrix.norm());
    out.checks.push(Check::new("hermiticity", defect <= HERMITIAN_TOL, format!("relative defect {defect:.3e}")));
    let states = random_states(grid.size(), pb.random_states, ctx.seed);
    let form = quadratic_form_reality(&op, &states);
    out.checks.push(Check::new("form", form.pass, format!("worst |Im<v,Pv>| / |<v,Pv>| = {:.3e}", form.worst)));
    let mut resolvent = Vec::new();
    for &(re, im) in &pb.z {
        let r = resolvent_kernel_probe(&op, Complex64::new(re, im))?;
        out.checks.push(Check::new(
            format!("resolvent z={re}{im:+}i"),
            r.pass,
            format!("sigma_min {:.6e} vs |Im z| {:.3e}", r.sigma_min, r.bound),
        ));
        resolvent.push(r);
    }
    let mut decay = Value::Null;
    if !pb.radii.is_empty() {
        let tg = GridSpec::new(g.dim(), pb.half_width, pb.tail_points, 1.0)?;
        let phi = tail_state(&tg, pb.tail_window.0, pb.tail_window.1);
        let d = cutoff_commutator_decay(&g, &tg, &pb.radii, &phi, pb.slack)?;
        out.checks.push(Check::new("cutoff_decay", d.pass, format!("exponent {:.4}", d.exponent)));
        decay = to_value(&d);
    }
    out.result = json!({
        "grid": grid,
        "injection": pb.injection,
        "provenance": op.provenance,
        "hermiticity_defect": defect,
        "form": form,
        "resolvent": resolvent,
        "cutoff_decay": decay,
    });
    Ok(out)
}

/// Summary of several reports: passes when every input passed.
pub fn report_merge(inputs: &[PathBuf]) -> Result<(Vec<Check>, Value)> {
    if inputs.is_empty() {
        return Err(missing("<inputs>", "report merge needs at least one report"));
    }
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for path in inputs {
        let text = std::fs::read(path)?;
        let r: super::report::Report = serde_json::from_slice(&text).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let name = file_label(path);
        let same = r.manifest_version == super::report::MANIFEST_VERSION;
        checks.push(Check::new(
            format!("{name}: {}", r.command),
            r.pass && same,
            match (&r.first_failure, same) {
                (_, false) => format!("manifest version {}", r.manifest_version),
                (Some(f), _) => format!("first failure {f}"),
                (None, _) => "pass".into(),
            },
        ));
        rows.push(json!({
            "file": name,
            "command": r.command,
            "pass": r.pass,
            "first_failure": r.first_failure,
            "checks": r.checks,
        }));
    }
    Ok((checks, json!({ "reports": rows })))
}

fn file_label(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| p.display().to_string())
}
