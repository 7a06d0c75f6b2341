use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use saclab::adaptive_law::{
    integral_gain_derivatives, proportional_gains, AdaptiveGains, GainWeights,
};
use saclab::bounds::{bound_report, error_system_matrices};
use saclab::command::CommandSpec;
use saclab::integrator::integrate;
use saclab::lti::{eig, poly_roots, Complex64, Polynomial, StateSpace, TransferFunction};
use saclab::passivity::{synthesize_pfc, verify_waspr_certificate, WasprCertificate};

/// `|p(z)|` relative to the sum of the absolute terms.
fn relative_residual(p: &Polynomial, z: Complex64) -> f64 {
    let scale: f64 = p
        .coeffs()
        .iter()
        .rev()
        .enumerate()
        .map(|(k, c)| c.abs() * z.norm().powi(k as i32))
        .sum();
    p.eval_complex(z).norm() / scale.max(f64::MIN_POSITIVE)
}

fn matrix(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-5.0..5.0f64, n * n).prop_map(move |v| DMatrix::from_row_slice(n, n, &v))
}

fn system() -> impl Strategy<Value = StateSpace> {
    (1usize..=4).prop_flat_map(|n| {
        (
            matrix(n),
            prop::collection::vec(-3.0..3.0f64, n),
            prop::collection::vec(-3.0..3.0f64, n),
        )
            .prop_map(move |(a, b, c)| {
                StateSpace::new(
                    a,
                    DMatrix::from_column_slice(n, 1, &b),
                    DMatrix::from_row_slice(1, n, &c),
                )
                .unwrap()
            })
    })
}

fn nonzero(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    prop_oneof![lo..hi, -hi..-lo]
}

fn proper_tf() -> impl Strategy<Value = TransferFunction> {
    (1usize..=4).prop_flat_map(|n| {
        (
            nonzero(0.5, 3.0),
            prop::collection::vec(-4.0..4.0f64, n),
            0usize..=n,
            nonzero(0.5, 3.0),
            prop::collection::vec(-4.0..4.0f64, n),
        )
            .prop_map(move |(den_lead, den_rest, num_deg, num_lead, num_rest)| {
                let mut den = vec![den_lead];
                den.extend(den_rest);
                let mut num = vec![num_lead];
                num.extend(&num_rest[..num_deg]);
                TransferFunction::from_coeffs(&num, &den).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn eigenvalues_are_roots_of_characteristic_polynomial(sys in system()) {
        let den = sys.to_tf().unwrap().den;
        for lambda in eig(sys.a()).unwrap() {
            prop_assert!(relative_residual(&den, lambda) < 1e-9, "lambda {lambda}");
        }
    }

    #[test]
    fn companion_roots_satisfy_polynomial(
        lead in nonzero(0.5, 3.0),
        rest in prop::collection::vec(-5.0..5.0f64, 1..7),
    ) {
        let mut c = vec![lead];
        c.extend(rest);
        let p = Polynomial::new(c);
        let roots = poly_roots(&p).unwrap();
        prop_assert_eq!(roots.len(), p.degree());
        for z in roots {
            prop_assert!(relative_residual(&p, z) < 1e-9, "root {z}");
        }
    }

    #[test]
    fn tf_add_is_commutative(a in proper_tf(), b in proper_tf()) {
        prop_assert_eq!(a.add(&b), b.add(&a));
    }

    #[test]
    fn realization_round_trip(tf in proper_tf()) {
        let back = tf.to_ss().unwrap().to_tf().unwrap();
        for w in [0.1, 1.0, 7.0] {
            let s = Complex64::new(0.3, w);
            let (g0, g1) = (tf.eval_complex(s), back.eval_complex(s));
            prop_assert!((g0 - g1).norm() <= 1e-8 * (1.0 + g0.norm()), "at {s}: {g0} vs {g1}");
        }
        prop_assert_eq!(back.den.degree(), tf.den.degree());
        prop_assert_eq!(back.den.leading(), 1.0);
    }

    #[test]
    fn pfc_inverts_compensator(
        a in nonzero(0.1, 10.0),
        b in 0.1..100.0f64,
        c in nonzero(0.1, 10.0),
    ) {
        let comp = TransferFunction::from_coeffs(&[a, b], &[c]).unwrap();
        let pfc = synthesize_pfc(&comp).unwrap();
        prop_assert_eq!(pfc.feedforward.reciprocal().unwrap(), comp.clone());
        let realized = pfc.realization.to_tf().unwrap();
        for w in [0.0, 1.0, 50.0] {
            let s = Complex64::new(0.0, w);
            let product = realized.eval_complex(s) * comp.eval_complex(s);
            prop_assert!((product - Complex64::new(1.0, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn certificate_acceptance_monotone_in_tolerance(
        p in 0.1..10.0f64,
        k in 0.0..5.0f64,
        dq in -1.0..1.0f64,
        tol in 1e-6..1.0f64,
    ) {
        let m1 = |x| DMatrix::from_element(1, 1, x);
        let plant = StateSpace::new(m1(-1.0), m1(1.0), m1(1.0)).unwrap();
        let cert = WasprCertificate {
            p: m1(p),
            q: m1(2.0 * p * (1.0 + k) + dq),
            w: m1(p),
            ke_tilde: m1(k),
        };
        if cert.q[(0, 0)] > 0.0 && verify_waspr_certificate(&plant, &cert, tol).unwrap() {
            prop_assert!(verify_waspr_certificate(&plant, &cert, 2.0 * tol).unwrap());
        }
    }

    #[test]
    fn sigma_leak_bounds_integral_gain(
        amplitude in 0.0..2.0f64,
        omega in 0.1..10.0f64,
        k0 in 0.0..5.0f64,
    ) {
        let w = GainWeights::uniform(10.0, 5.0, 1, 1, 1).unwrap();
        let zero = DVector::zeros(1);
        let f = |t: f64, x: &DVector<f64>| {
            let e = DVector::from_element(1, amplitude * (omega * t).sin());
            let gains = AdaptiveGains { k_ie: DMatrix::from_element(1, 1, x[0]), ..AdaptiveGains::zeros(1, 1, 1) };
            let d = integral_gain_derivatives(&e, &zero, &zero, &gains, &w);
            DVector::from_element(1, d.k_ie[(0, 0)])
        };
        let ceiling = k0.max(10.0 * amplitude * amplitude / 5.0) + 1e-9;
        let mut x = DVector::from_element(1, k0);
        for step in 0..200 {
            x = integrate(f, &x, step as f64 * 0.05, 1e-2, 5).unwrap();
            prop_assert!(x[0] <= ceiling && x[0] >= -1e-12, "K_Ie = {}", x[0]);
        }
    }

    #[test]
    fn proportional_error_gain_has_nonnegative_spectrum(
        e in prop::collection::vec(-3.0..3.0f64, 1..4),
        gamma in prop::collection::vec(0.1..20.0f64, 3),
    ) {
        let m = e.len();
        let g = DMatrix::from_diagonal(&DVector::from_column_slice(&gamma[..m]));
        let w = GainWeights {
            gamma_pe: g.clone(),
            gamma_ie: g.clone(),
            gamma_px: DMatrix::identity(1, 1),
            gamma_ix: DMatrix::identity(1, 1),
            gamma_pu: DMatrix::identity(1, 1),
            gamma_iu: DMatrix::identity(1, 1),
            sigma: 1.0,
            leak_all: false,
        };
        let e = DVector::from_vec(e);
        let p = proportional_gains(&e, &DVector::zeros(1), &DVector::zeros(1), &w);
        let scale = 1.0 + p.k_pe.norm();
        for l in eig(&p.k_pe).unwrap() {
            prop_assert!(l.re >= -1e-12 * scale && l.im.abs() <= 1e-9 * scale, "eigenvalue {l}");
        }
    }

    #[test]
    fn bound_ratio_invariant_under_q_scaling(
        a in matrix(2),
        lv in 0.0..50.0f64,
        c in 0.01..100.0f64,
    ) {
        let a_mm = -(&a * a.transpose()) - DMatrix::identity(2, 2);
        let a_mn = &a_mm - DMatrix::identity(2, 2) * lv;
        let q = DMatrix::identity(2, 2);
        let r1 = bound_report(&a_mm, &a_mn, &q).unwrap();
        let r2 = bound_report(&a_mm, &a_mn, &(q * c)).unwrap();
        let (b1, b2) = (r1.bound_ratio.unwrap(), r2.bound_ratio.unwrap());
        prop_assert!((b1 - b2).abs() <= 1e-12 * b1);
    }

    #[test]
    fn error_matrices_linear_in_ke_and_lv(
        cpbp in matrix(2),
        k1 in matrix(2),
        k2 in matrix(2),
        l1 in matrix(2),
        l2 in matrix(2),
        alpha in -3.0..3.0f64,
    ) {
        let cm = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.25, 2.0]);
        let amm = |k: &DMatrix<f64>| error_system_matrices(&cpbp, k, &cm, None).unwrap().0;
        let close = |x: &DMatrix<f64>, y: &DMatrix<f64>| (x - y).norm() <= 1e-12 * (1.0 + x.norm());
        prop_assert!(close(&amm(&(&k1 + &k2)), &(amm(&k1) + amm(&k2))));
        prop_assert!(close(&amm(&(&k1 * alpha)), &(amm(&k1) * alpha)));

        let shift = |lv: &DMatrix<f64>| {
            let (a_mm, a_mn) = error_system_matrices(&cpbp, &k1, &cm, Some(lv)).unwrap();
            a_mn - a_mm
        };
        prop_assert!(close(&shift(&(&l1 + &l2)), &(shift(&l1) + shift(&l2))));
        prop_assert!(close(&shift(&(&l1 * alpha)), &(shift(&l1) * alpha)));
    }

    #[test]
    fn square_command_magnitude(amplitude in -2.0..2.0f64, period in 0.1..50.0f64, t in 0.0..500.0f64) {
        let c = CommandSpec::square(amplitude, period);
        prop_assert_eq!(c.value(t).abs(), amplitude.abs());
    }
}
