//! Acceptance suite. Prints one line per criterion and exits nonzero if any
//! fails. Each criterion also has a wall-clock budget that counts toward its
//! verdict.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use microlocal::cli::config::RunConfig;
use microlocal::cli::report::{without_timestamp, ConstantsManifest};
use microlocal::estimates::{
    assemble_hamiltonian, ladder_cascade, random_states, rung_energy_inputs, search_incoming_radius, search_outgoing_radius,
    verify_energy_inequality, verify_incoming_observable, verify_operator_commutator, CommutatorOptions, EnergyInputs,
    SampleGrid,
};
use microlocal::flow::{
    backward_asymptotic_direction, classify_null_nontrapping, integrate, ring_null_data, sample_null_data, Classification,
    ClassifyOptions, Tolerances,
};
use microlocal::geometry::{grad_tau, group_velocity, split_parallel_perp, tau_incoming, Cometric, Orientation, PhasePoint};
use microlocal::linalg::{dot, norm};
use microlocal::probe::{assemble_p, assemble_p_with, quadratic_form_reality, resolvent_kernel_probe, Injection, HERMITIAN_TOL};
use microlocal::quantize::{
    calculus_checks, coherent_recovery, coherent_state, garding_check, hermiticity_defect, weyl_quantize, weyl_quantize_with,
    CMatrix, CVector, GridSpec, MarginPolicy,
};
use microlocal::symbols::{reference, CutoffParams, FnSymbol, Localizer, Symbol};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = microlocal::Result<(bool, String)>;

const SIGMA_INF: f64 = 0.7;
const RESOLVENT_Z: [(f64, f64); 3] = [(0.0, 1.0), (2.0, 0.5), (-1.0, 0.1)];

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn config(name: &str) -> RunConfig {
    RunConfig::load(&root().join("configs").join(name)).expect("example config loads")
}

fn frozen(name: &str) -> ConstantsManifest {
    ConstantsManifest::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)).expect("frozen manifest loads")
}

fn shell(delta: f64) -> (f64, f64) {
    ((1.0 - 4.0 * delta).sqrt(), (1.0 + 4.0 * delta).sqrt())
}

/// Fourth-order central difference of `f` along coordinate `i` of `v`.
fn fd(f: &dyn Fn(&[f64]) -> f64, v: &[f64], i: usize, step: f64) -> f64 {
    let at = |s: f64| {
        let mut w = v.to_vec();
        w[i] += s;
        f(&w)
    };
    (8.0 * (at(step) - at(-step)) - (at(2.0 * step) - at(-2.0 * step))) / (12.0 * step)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn geometry_identities() -> Verdict {
    let g = Cometric::minkowski(2);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut points, mut transport, mut grad, mut boundary) = (0, 0.0f64, 0.0f64, 0);
    while points < 10_000 {
        let x: Vec<f64> = (0..2).map(|_| rng.random_range(-10.0..10.0)).collect();
        let xi: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
        let p = PhasePoint::new(x.clone(), xi.clone());
        let (Ok(_), Ok((dx, dxi))) = (tau_incoming(&p, SIGMA_INF, &g), grad_tau(&p, Orientation::Incoming, SIGMA_INF, &g)) else {
            continue;
        };
        points += 1;
        let v = group_velocity(&xi, &g)?;
        transport = transport.max((-dot(&v.v_hat, &dx) - 1.0).abs());
        let tx = |y: &[f64]| tau_incoming(&PhasePoint::new(y.to_vec(), xi.clone()), SIGMA_INF, &g).unwrap_or(f64::NAN);
        let tk = |k: &[f64]| tau_incoming(&PhasePoint::new(x.clone(), k.to_vec()), SIGMA_INF, &g).unwrap_or(f64::NAN);
        for i in 0..2 {
            let e1 = rel(fd(&tx, &x, i, 1e-4), dx[i]);
            let e2 = rel(fd(&tk, &xi, i, 1e-5), dxi[i]);
            // NaN marks a stencil that crossed the admissible boundary
            if e1.is_nan() || e2.is_nan() {
                boundary += 1;
                continue;
            }
            grad = grad.max(e1).max(e2);
        }
    }

    // the incoming localizer jet on its support
    let params = CutoffParams::incoming(0.1, 0.5, 0.3, SIGMA_INF, 2.0).with_weights(0.1, 0.2);
    let zeta = Localizer::new(params, &g)?;
    let value = |x: &[f64], xi: &[f64]| zeta.factors(x, xi).map_or(0.0, |f| f.product().value);
    let grid = SampleGrid::covering(2, (2.0, 40.0), shell(0.1), 10_000);
    let (mut zeta_grad, mut checked, mut kinks) = (0.0f64, 0, 0);
    for (x, xi) in grid.points() {
        let Some(f) = zeta.factors(&x, &xi) else { continue };
        // tau has a kink where x_perp = 0; no gradient to compare there
        let (_, perp) = split_parallel_perp(&x, &xi, &g)?;
        if norm(&perp) < 1e-3 * norm(&x) {
            kinks += 1;
            continue;
        }
        checked += 1;
        let jet = f.product();
        for i in 0..2 {
            let fx = fd(&|y: &[f64]| value(y, &xi), &x, i, 1e-4);
            let fk = fd(&|k: &[f64]| value(&x, k), &xi, i, 1e-6);
            zeta_grad = zeta_grad.max(rel(fx, jet.dx[i])).max(rel(fk, jet.dxi[i]));
        }
    }
    let pass = transport <= 1e-10 && grad <= 1e-6 && zeta_grad <= 1e-6;
    Ok((
        pass,
        format!(
            "{points} points, max |v.d_x tau + 1| = {transport:.2e}, gradient error tau {grad:.2e} \
             ({boundary} stencils crossing beta = sigma_inf skipped), zeta {zeta_grad:.2e} \
             on {checked} support points ({kinks} on x_perp = 0 skipped)"
        ),
    ))
}

fn flow_exactness() -> Verdict {
    let flat = Cometric::minkowski(2);
    let tol = Tolerances {
        max_step: 4.0,
        ..Tolerances::default()
    };
    let mut closed = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let x: Vec<f64> = (0..2).map(|_| rng.random_range(-5.0..5.0)).collect();
        let xi: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let tr = integrate(&PhasePoint::new(x.clone(), xi.clone()), (-100.0, 100.0), tol, &flat, None)?;
        for (t, s) in tr.times.iter().zip(&tr.states) {
            // g0 = diag(1, -1)
            let expect = [x[0] + 2.0 * t * xi[0], x[1] - 2.0 * t * xi[1]];
            for i in 0..2 {
                closed = closed.max((s.x[i] - expect[i]).abs() / (1.0 + expect[i].abs())).max((s.xi[i] - xi[i]).abs());
            }
        }
    }

    let cfg = config("perturbed.toml");
    let g = cfg.cometric()?;
    let (mut drift, mut reversal) = (0.0f64, 0.0f64);
    for p in sample_null_data(&g, 20, 5.0, 3)? {
        let p = PhasePoint::new(p.x, p.xi.iter().map(|v| v * 1.3).collect());
        let fwd = integrate(&p, (0.0, 50.0), Tolerances::default(), &g, None)?;
        drift = drift.max(fwd.conservation_error());
        let back = integrate(fwd.last(), (-50.0, 0.0), Tolerances::default(), &g, None)?;
        let end = back.first();
        let err = end.x.iter().zip(&p.x).chain(end.xi.iter().zip(&p.xi)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        reversal = reversal.max(err);
    }
    let pass = closed <= 1e-10 && drift <= 1e-8 && reversal <= 1e-8;
    Ok((pass, format!("closed form {closed:.2e}, p2 drift {drift:.2e}, round trip {reversal:.2e}")))
}

fn nontrapping() -> Verdict {
    let flat = Cometric::minkowski(2);
    let opts = ClassifyOptions::default();
    let data = sample_null_data(&flat, 200, 5.0, 0)?;
    let escaped = data
        .iter()
        .map(|p| classify_null_nontrapping(p, &flat, &opts))
        .collect::<microlocal::Result<Vec<_>>>()?
        .iter()
        .filter(|c| c.is_escaped())
        .count();

    let ring = config("ring_trap.toml");
    let rg = ring.cometric()?;
    let ring_opts = ClassifyOptions {
        t_max: Some(1e3),
        ..ring.flow.classify_options()
    };
    let ring_data = ring_null_data(&rg, 8)?;
    let trapped = ring_data
        .iter()
        .map(|p| classify_null_nontrapping(p, &rg, &ring_opts))
        .collect::<microlocal::Result<Vec<_>>>()?
        .iter()
        .filter(|c| matches!(c, Classification::Trapped { .. }))
        .count();

    let pert = config("perturbed.toml");
    let pg = pert.cometric()?;
    let popts = pert.flow.classify_options();
    let mut limits = Vec::new();
    for p in sample_null_data(&pg, 100, 5.0, 0)? {
        if limits.len() == 50 {
            break;
        }
        if !classify_null_nontrapping(&p, &pg, &popts)?.is_escaped() {
            continue;
        }
        let tol = Tolerances {
            max_step: 64.0,
            ..Tolerances::default()
        };
        let tr = integrate(&p, (-4096.0, 0.0), tol, &pg, None)?;
        limits.push(backward_asymptotic_direction(&tr, &pg, popts.r_escape)?.limit);
    }
    let worst = limits.iter().map(|l| (l + 1.0).abs()).fold(0.0, f64::max);
    let pass = escaped == 200 && trapped == ring_data.len() && limits.len() == 50 && worst <= 1e-3;
    Ok((
        pass,
        format!(
            "flat {escaped}/200 escaped, ring {trapped}/{} trapped at T = 1e3, {} limits with max |limit + 1| = {worst:.2e}",
            ring_data.len(),
            limits.len()
        ),
    ))
}

fn incoming_sign() -> Verdict {
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, manifest) in [("minkowski.toml", "minkowski_constants.json"), ("perturbed.toml", "perturbed_constants.json")] {
        let cfg = config(name);
        let g = cfg.cometric()?;
        let p = cfg.cutoff.incoming.expect("incoming block");
        let grid_for = |r: f64| SampleGrid::covering(2, (r, 64.0 * r), shell(p.delta), 100_000);
        let s = search_incoming_radius(&p, &g, grid_for, p.radius, 1e4)?;
        let Some(r0) = s.r0 else {
            pass = false;
            detail.push(format!("{name}: no R0"));
            continue;
        };
        let grid = grid_for(r0);
        let obs = verify_incoming_observable(&p.with_radius(r0), &g, &grid)?;
        let same = frozen(manifest).r0 == Some(r0);
        pass &= s.report.pass && grid.len() >= 100_000 && obs.c1 > 0.0 && same;
        detail.push(format!(
            "{name}: R0 {r0} (frozen {}), worst {:.1e} [{:.1e} {:.1e} {:.1e}], c1 {:.4}",
            if same { "match" } else { "MISMATCH" },
            s.report.combined.worst,
            s.report.near.worst,
            s.report.angle.worst,
            s.report.momentum.worst,
            obs.c1
        ));
    }
    Ok((pass, detail.join("; ")))
}

fn outgoing_condition() -> Verdict {
    let mut pass = true;
    let mut detail = Vec::new();
    for name in ["minkowski.toml", "perturbed.toml"] {
        let cfg = config(name);
        let g = cfg.cometric()?;
        let p = cfg.cutoff.outgoing.expect("outgoing block");
        let grid_for = |r: f64| SampleGrid::covering(2, (r / 8.0, 64.0 * r), shell(p.delta), 100_000);
        let s = search_outgoing_radius(&p, &g, grid_for, 10_000, 0, 1e4)?;
        let rep = &s.report;
        pass &= s.r0.is_some() && rep.pass && rep.audit.points == 10_000 && rep.audit.nonzero == 0;
        detail.push(format!(
            "{name}: R {:?}, worst {:.1e}, rho nonzero at {}/{}",
            s.r0, rep.residual.worst, rep.audit.nonzero, rep.audit.points
        ));
    }
    Ok((pass, detail.join("; ")))
}

fn quantization() -> Verdict {
    let grids = [0.2, 0.1, 0.05]
        .iter()
        .map(|&h| GridSpec::new(1, reference::HALF_WIDTH, reference::POINTS, h))
        .collect::<microlocal::Result<Vec<_>>>()?;
    let one = FnSymbol::constant(1, 1.0);
    let mut id = 0.0f64;
    for gr in &grids {
        let q = weyl_quantize_with(&one, gr, MarginPolicy::Operator)?;
        id = id.max((&q.matrix - CMatrix::identity(gr.size(), gr.size())).map(|c| c.norm()).max());
    }
    let rec = reference::recovery_symbol();
    let (a, b) = reference::bracket_pair();
    let nonneg = reference::nonnegative_symbol();
    let mut herm = 0.0f64;
    for gr in &grids {
        for s in [&rec as &dyn Symbol, &a, &b, &nonneg] {
            herm = herm.max(hermiticity_defect(&weyl_quantize(s, gr)?.matrix));
        }
    }
    let centers: Vec<PhasePoint> = reference::recovery_centers()
        .into_iter()
        .map(|(x, xi)| PhasePoint::new(vec![x], vec![xi]))
        .collect();
    let recovery = coherent_recovery(&rec, &centers, &grids)?;
    let slopes_ok = recovery.slopes.iter().all(|s| (0.8..=1.3).contains(s));
    let calc = calculus_checks(&a, &b, &grids)?;
    let garding = garding_check(&nonneg, &grids)?;
    let pass = id <= 1e-12 && herm <= 1e-10 && slopes_ok && calc.commutator_order >= 1.0 && garding.stable;
    Ok((
        pass,
        format!(
            "|Op(1) - I| {id:.1e}, Hermiticity {herm:.1e}, recovery slopes {:?}, commutator order {:.2}, Garding C_h {:?}",
            recovery.slopes.iter().map(|s| (s * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            calc.commutator_order,
            garding.constant.iter().map(|c| (c * 1e4).round() / 1e4).collect::<Vec<_>>()
        ),
    ))
}

fn operator_inequality() -> Verdict {
    let cfg = config("ladder_1d.toml");
    let g = cfg.cometric()?;
    let ladder = cfg.cutoff.ladder.clone().expect("ladder");
    let grids = cfg.grid.as_ref().expect("grid").grids()?;
    let opts = cfg.commutator.options.clone();
    let rep = verify_operator_commutator(&ladder, 0, &g, &grids, &opts)?;
    let broken = verify_operator_commutator(
        &ladder,
        0,
        &g,
        &grids,
        &CommutatorOptions {
            reverse_commutator: true,
            ..opts
        },
    )?;
    let same = frozen("ladder_1d_constants.json").rungs.first() == Some(&rep.constants());
    let order_ok = rep.order.is_none_or(|o| o >= 2.0);
    let broken_flat = broken.order.is_some_and(|o| o <= 0.5);
    let pass = rep.pass && order_ok && !broken.pass && broken_flat && same && grids.iter().all(|gr| gr.points <= 256);
    Ok((
        pass,
        format!(
            "c0 {:.4}, alpha {} (frozen {}), negative parts {:?}, order {:?}; reversed: order {:?}, pass {}",
            rep.c0,
            rep.alpha,
            if same { "match" } else { "MISMATCH" },
            rep.levels.iter().map(|l| format!("{:.1e}", l.negative_part)).collect::<Vec<_>>(),
            rep.order,
            broken.order,
            broken.pass
        ),
    ))
}

fn coherent_states(grid: &GridSpec, count: usize, radius: f64, seed: u64) -> microlocal::Result<Vec<CVector>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let c = PhasePoint::new(vec![rng.random_range(-radius..=radius)], vec![rng.random_range(-1.5..=1.5)]);
            let v = coherent_state(&c, grid)?;
            let s = v.norm();
            Ok(v / Complex64::new(s, 0.0))
        })
        .collect()
}

fn energy_algebra() -> Verdict {
    let cfg = config("ladder_1d.toml");
    let g = cfg.cometric()?;
    let ladder = cfg.cutoff.ladder.clone().expect("ladder");
    let grids = cfg.grid.as_ref().expect("grid").grids()?;
    let opts = &cfg.commutator.options;
    let k = frozen("ladder_1d_constants.json").rungs[0];
    let mut worst_slack = f64::NEG_INFINITY;
    let mut premise = f64::INFINITY;
    let mut pass = true;
    for (gi, grid) in grids.iter().enumerate() {
        let inputs = rung_energy_inputs(&ladder, 0, &g, grid, opts, k)?;
        let mut states = random_states(grid.size(), 100, gi as u64);
        states.extend(coherent_states(grid, 20, opts.interior, gi as u64)?);
        for &(re, im) in &RESOLVENT_Z {
            let r = verify_energy_inequality(&inputs, Complex64::new(re, im), k.c0, grid.h, &states)?;
            pass &= r.pass && r.states.len() == 120;
            worst_slack = worst_slack.max(r.worst_slack);
            premise = premise.min(r.premise_lambda_min);
        }
    }
    let grid = &grids[0];
    let n = grid.size();
    let zero = CMatrix::zeros(n, n);
    let inputs = EnergyInputs {
        b: zero.clone(),
        b_tilde: zero.clone(),
        e: zero,
        p: assemble_hamiltonian(&g, grid)?,
        weight: vec![1.0; n],
    };
    let r = verify_energy_inequality(&inputs, Complex64::new(0.0, 1.0), 1.0, grid.h, &random_states(n, 10, 9))?;
    let exact = r.pass && r.states.iter().all(|s| s.lhs == 0.0 && s.rhs == 0.0 && s.identity_residual == 0.0);
    Ok((
        pass && exact,
        format!("premise lambda_min >= {premise:.1e}, worst slack {worst_slack:.1e} over 120 states x 3 z x 3 h; B = 0 exact: {exact}"),
    ))
}

fn cascade() -> Verdict {
    let cfg = config("cascade_1d.toml");
    let g = cfg.cometric()?;
    let ladder = cfg.cutoff.ladder.clone().expect("ladder");
    let grids = cfg.grid.as_ref().expect("grid").grids()?;
    let h_last = grids.last().expect("grids").h;
    let mut pass = h_last == 0.05;
    let mut detail = Vec::new();
    for c in &cfg.cascade.centers {
        let p = PhasePoint::new(c.x.clone(), c.xi.clone());
        let states = grids.iter().map(|gr| coherent_state(&p, gr)).collect::<microlocal::Result<Vec<_>>>()?;
        let rep = ladder_cascade(&ladder, &g, &grids, &states, &[], &cfg.cascade.options)?;
        let r0 = &rep.rungs[0];
        match c.expect {
            microlocal::cli::config::Expectation::Plateau => {
                let target = tau_incoming(&p, ladder.sigma_inf, &g)?.powf(ladder.gamma);
                let relerr = (r0.norms.last().unwrap() / target - 1.0).abs();
                pass &= relerr <= 0.1;
                detail.push(format!("x {} plateau {relerr:.1e}", c.x[0]));
            }
            microlocal::cli::config::Expectation::Decay => {
                pass &= r0.order.is_none_or(|o| o >= 2.0);
                detail.push(format!("({}, {}) order {:.2}", c.x[0], c.xi[0], r0.order.unwrap_or(f64::INFINITY)));
            }
            microlocal::cli::config::Expectation::Report => {}
        }
    }
    Ok((pass, detail.join(", ")))
}

fn probe() -> Verdict {
    let cfg = config("probe.toml");
    let g = cfg.cometric()?;
    let grid = GridSpec::new(1, cfg.probe.half_width, cfg.probe.points, 1.0)?;
    let op = assemble_p(&g, &grid)?;
    let herm = hermiticity_defect(&op.matrix) / (1.0 + op.matrix.norm());
    let mut margins = Vec::new();
    let mut pass = herm <= HERMITIAN_TOL;
    for (re, im) in RESOLVENT_Z {
        let r = resolvent_kernel_probe(&op, Complex64::new(re, im))?;
        pass &= r.sigma_min >= im.abs() - 1e-8;
        margins.push(r.margin);
    }
    let states = random_states(grid.size(), 20, 0);
    pass &= quadratic_form_reality(&op, &states).pass;

    // negative controls
    let skew = assemble_p_with(&g, &grid, Injection::ComplexPotential { eps: 0.3 })?;
    let skew_caught = hermiticity_defect(&skew.matrix) / (1.0 + skew.matrix.norm()) > HERMITIAN_TOL
        && !quadratic_form_reality(&skew, &states).pass
        && !resolvent_kernel_probe(&skew, Complex64::new(0.0, 1.0))?.pass;
    let flip = assemble_p_with(&g, &grid, Injection::FlippedFirstOrder)?;
    let flip_caught =
        hermiticity_defect(&flip.matrix) / (1.0 + flip.matrix.norm()) > HERMITIAN_TOL && !quadratic_form_reality(&flip, &states).pass;
    pass &= skew_caught && flip_caught;
    Ok((
        pass,
        format!(
            "Hermiticity {herm:.1e}, resolvent margins {:?}, skew control caught {skew_caught}, flipped control caught {flip_caught}",
            margins.iter().map(|m| format!("{m:.2e}")).collect::<Vec<_>>()
        ),
    ))
}

const SUITE: [(&str, &[&str]); 12] = [
    ("minkowski.toml", &["flow", "trace"]),
    ("minkowski.toml", &["nontrap", "scan"]),
    ("minkowski.toml", &["escape", "verify"]),
    ("perturbed.toml", &["nontrap", "scan"]),
    ("perturbed.toml", &["escape", "verify"]),
    ("ring_trap.toml", &["nontrap", "scan"]),
    ("ring_trap.toml", &["escape", "verify"]),
    ("quantize.toml", &["quantize", "check"]),
    ("ladder_1d.toml", &["commutator", "verify"]),
    ("ladder_1d.toml", &["cascade", "run"]),
    ("cascade_1d.toml", &["cascade", "run"]),
    ("probe.toml", &["probe", "run"]),
];

fn run_suite(out: &Path) -> microlocal::Result<()> {
    for (cfg, args) in SUITE {
        let dir = out.join(cfg.trim_end_matches(".toml"));
        let status = Command::new(env!("CARGO_BIN_EXE_microlocal"))
            .args(args)
            .arg("--config")
            .arg(root().join("configs").join(cfg))
            .arg("--out")
            .arg(&dir)
            .arg("--seed")
            .arg("7")
            .stderr(std::process::Stdio::null())
            .status()?;
        // 1 is a legitimate outcome (the ring trap scan fails by design)
        if !matches!(status.code(), Some(0 | 1)) {
            return Err(std::io::Error::other(format!("{cfg} {args:?} exited with {status}")).into());
        }
    }
    Ok(())
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).into_iter().flatten().flatten() {
        let p = e.path();
        if p.is_dir() {
            out.extend(files(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

fn determinism() -> Verdict {
    let (a, b) = (tempfile::tempdir()?, tempfile::tempdir()?);
    run_suite(a.path())?;
    run_suite(b.path())?;
    let (fa, fb) = (files(a.path()), files(b.path()));
    let rel_a: Vec<_> = fa.iter().map(|p| p.strip_prefix(a.path()).unwrap().to_path_buf()).collect();
    let rel_b: Vec<_> = fb.iter().map(|p| p.strip_prefix(b.path()).unwrap().to_path_buf()).collect();
    if rel_a != rel_b {
        return Ok((false, "the two runs wrote different file sets".into()));
    }
    let mut reports = 0;
    for r in &rel_a {
        let (x, y) = (std::fs::read(a.path().join(r))?, std::fs::read(b.path().join(r))?);
        let is_report = r.extension().is_some_and(|e| e == "json") && r.file_name().is_some_and(|n| n != "constants.json");
        let same = if is_report {
            reports += 1;
            without_timestamp(&x)? == without_timestamp(&y)? && strip_timestamp_line(&x) == strip_timestamp_line(&y)
        } else {
            x == y
        };
        if !same {
            return Ok((false, format!("{} differs", r.display())));
        }
    }
    Ok((true, format!("{} files identical across two runs ({reports} reports, timestamp excluded)", rel_a.len())))
}

/// Report bytes without the timestamp line, for a byte-level comparison.
fn strip_timestamp_line(bytes: &[u8]) -> Vec<u8> {
    String::from_utf8_lossy(bytes)
        .lines()
        .filter(|l| !l.trim_start().starts_with("\"timestamp\""))
        .flat_map(|l| l.bytes().chain(std::iter::once(b'\n')))
        .collect()
}

fn main() {
    let criteria: [(&str, fn() -> Verdict, u64); 11] = [
        ("geometry identities", geometry_identities, 10),
        ("flow exactness", flow_exactness, 30),
        ("non-trapping classifier", nontrapping, 300),
        ("incoming sign conditions", incoming_sign, 120),
        ("outgoing condition", outgoing_condition, 120),
        ("quantization", quantization, 300),
        ("operator inequality", operator_inequality, 600),
        ("energy inequality algebra", energy_algebra, 60),
        ("cascade microlocalization", cascade, 300),
        ("probe", probe, 120),
        ("determinism", determinism, 600),
    ];
    let mut failed = 0;
    for (i, (name, f, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = f();
        let took = start.elapsed();
        let in_budget = took <= Duration::from_secs(*budget);
        let (pass, detail) = match verdict {
            Ok((p, d)) => (p && in_budget, d),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<28} {}  [{:.1} s of {} s] {}",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget,
            detail
        );
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
