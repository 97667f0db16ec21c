//! Property tests over random inputs.

use microlocal::estimates::{premise_matrix, remainder_from_negative_part, verify_energy_inequality, EnergyInputs};
use microlocal::flow::integrate_fixed;
use microlocal::geometry::{beta, grad_tau, group_velocity, tau_incoming, Cometric, Orientation, PhasePoint};
use microlocal::linalg::dot;
use microlocal::quantize::{hermiticity_defect, weyl_quantize, CMatrix, GridSpec};
use microlocal::smooth::{chi1, chi2_jet};
use microlocal::symbols::{FnSymbol, Jet, Support, SymbolClass, Windowed};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SIGMA_INF: f64 = 0.7;

fn vec2() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn chi_profiles(s in -5.0..5.0f64) {
        prop_assert!((0.0..=1.0).contains(&chi1(s)));
        let j = chi2_jet(s);
        prop_assert!((0.0..=1.0).contains(&j.value));
        prop_assert!(s * j.d1 <= 0.0);
        prop_assert_eq!(j.value, chi2_jet(-s).value);
    }

    #[test]
    fn beta_bounded_and_scale_invariant(x in vec2(), xi in vec2(), lx in 0.1..10.0f64, lk in 0.1..10.0f64) {
        prop_assume!(dot(&x, &x) > 1e-6 && dot(&xi, &xi) > 1e-6);
        let g = Cometric::minkowski(2);
        let Ok(b) = beta(&PhasePoint::new(x.clone(), xi.clone()), &g) else { return Ok(()) };
        prop_assert!((-1.0..=1.0).contains(&b));
        let xs: Vec<f64> = x.iter().map(|v| v * lx).collect();
        let ks: Vec<f64> = xi.iter().map(|v| v * lk).collect();
        let bs = beta(&PhasePoint::new(xs, ks), &g).unwrap();
        prop_assert!((b - bs).abs() <= 1e-12, "{} vs {}", b, bs);
    }

    #[test]
    fn tau_homogeneity_and_transport(x in vec2(), xi in vec2(), l in 0.1..10.0f64) {
        prop_assume!(dot(&x, &x) > 1e-2 && dot(&xi, &xi) > 1e-2);
        let g = Cometric::minkowski(2);
        let p = PhasePoint::new(x.clone(), xi.clone());
        let Ok(t) = tau_incoming(&p, SIGMA_INF, &g) else { return Ok(()) };
        let Ok(v) = group_velocity(&xi, &g) else { return Ok(()) };
        let xl: Vec<f64> = x.iter().map(|c| c * l).collect();
        let kl: Vec<f64> = xi.iter().map(|c| c * l).collect();
        let tx = tau_incoming(&PhasePoint::new(xl, xi.clone()), SIGMA_INF, &g).unwrap();
        let tk = tau_incoming(&PhasePoint::new(x.clone(), kl), SIGMA_INF, &g).unwrap();
        let scale = 1.0 + t.abs() * l;
        prop_assert!((tx - l * t).abs() <= 1e-12 * scale);
        prop_assert!((tk - t).abs() <= 1e-12 * scale);
        if let Ok((dx, _)) = grad_tau(&p, Orientation::Incoming, SIGMA_INF, &g) {
            prop_assert!((dot(&v.v_hat, &dx) + 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn flat_flow_is_a_straight_line(x in vec2(), xi in vec2(), l in 0.1..5.0f64, t in -100.0..100.0f64) {
        let g = Cometric::minkowski(2);
        let x0: Vec<f64> = x.iter().map(|c| c * l).collect();
        let end = integrate_fixed(&PhasePoint::new(x0.clone(), xi.clone()), t, 4, &g);
        // g0 = diag(1, -1)
        let expect = [x0[0] + 2.0 * t * xi[0], x0[1] - 2.0 * t * xi[1]];
        for i in 0..2 {
            prop_assert!((end.x[i] - expect[i]).abs() <= 1e-10 * (1.0 + expect[i].abs()));
            prop_assert_eq!(end.xi[i], xi[i]);
        }
    }

    #[test]
    fn real_symbols_quantize_to_hermitian(a in -2.0..2.0f64, b in -2.0..2.0f64, c in 0.2..2.0f64, h in 0.05..0.3f64) {
        let s = FnSymbol::new(1, "poly", SymbolClass { k: 0.0, l: 0.0 }, move |x, xi| {
            let e = (-c * x[0] * x[0]).exp();
            let m = a + b * xi[0];
            Jet { value: e * m, dx: vec![-2.0 * c * x[0] * e * m], dxi: vec![e * b] }
        })
        .with_support(Support { xi_polynomial: true, ..Support::default() });
        let s = Windowed::new(s, 2.0, 4.0);
        let grid = GridSpec::new(1, 5.0, 64, h).unwrap();
        let q = weyl_quantize(&s, &grid).unwrap();
        prop_assert!(hermiticity_defect(&q.matrix) <= 1e-10);
    }

    #[test]
    fn energy_conclusion_follows_from_premise(seed in any::<u64>(), zr in -2.0..2.0f64, zi in 0.0..2.0f64, c in 0.1..3.0f64, h in 0.05..0.5f64) {
        let n = 12;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = || CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let (b, b_tilde, a) = (m(), m(), m());
        let p = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.rotate_left(7));
        let weight: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let mut inp = EnergyInputs { b, b_tilde, e: DMatrix::zeros(n, n), p, weight };
        inp.e = remainder_from_negative_part(&premise_matrix(&inp, c, h));
        let states = microlocal::estimates::random_states(n, 10, seed);
        let rep = verify_energy_inequality(&inp, Complex64::new(zr, zi), c, h, &states).unwrap();
        prop_assert!(rep.pass, "worst slack {}", rep.worst_slack);
    }
}
