use std::f64::consts::PI;

use cyclosync::channel::pmd_matrix;
use cyclosync::cyclostats::CyclicMatrixEstimate;
use cyclosync::estimators::{distance_up_to_phase, estimate_dgd, estimate_psp, reconstruct_u};
use cyclosync::jones::{JonesUnitary, Mat2, StokesVector};
use cyclosync::scalar::{wrap_pi, wrap_ui};
use cyclosync::seed::rng;
use cyclosync::sync::farrow_weights;
use cyclosync::ted::{ted_det, ted_trace, TedReading};
use num_complex::Complex;
use proptest::prelude::*;

const ALPHA: f64 = 32e9;
const T0: f64 = 1.0 / ALPHA;

fn cplx() -> impl Strategy<Value = Complex<f64>> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| Complex::new(re, im))
}

fn matrix() -> impl Strategy<Value = Mat2<f64>> {
    (cplx(), cplx(), cplx(), cplx()).prop_map(|(a, b, c, d)| Mat2::new(a, b, c, d))
}

fn unitary() -> impl Strategy<Value = Mat2<f64>> {
    any::<u64>().prop_map(|s| JonesUnitary::<f64>::random(&mut rng(s)).matrix())
}

fn psp() -> impl Strategy<Value = StokesVector<f64>> {
    any::<u64>().prop_map(|s| StokesVector::random(&mut rng(s)))
}

fn value(r: TedReading) -> Complex<f64> {
    Complex::new(r.aux_real, -r.e_t)
}

fn close(a: Complex<f64>, b: Complex<f64>, scale: f64) -> bool {
    (a - b).norm() <= 1e-12 * scale.max(1.0)
}

proptest! {
    #[test]
    fn trace_detector_ignores_polarization_rotation(c in matrix(), v in unitary()) {
        let rotated = v * c * v.adjoint();
        let a = value(ted_trace(&CyclicMatrixEstimate::new(c, ALPHA)));
        let b = value(ted_trace(&CyclicMatrixEstimate::new(rotated, ALPHA)));
        prop_assert!(close(a, b, c.frobenius()));
    }

    #[test]
    fn det_detector_ignores_any_unitaries(c in matrix(), u in unitary(), v in unitary()) {
        let a = value(ted_det(&CyclicMatrixEstimate::new(c, ALPHA)));
        let b = value(ted_det(&CyclicMatrixEstimate::new(u * c * v, ALPHA)));
        prop_assert!(close(a, b, c.frobenius_sq()));
    }

    #[test]
    fn column_energy_survives_left_unitary(c in matrix(), u in unitary()) {
        let uc = u * c;
        for k in 0..2 {
            prop_assert!((uc.column_energy(k) - c.column_energy(k)).abs() <= 1e-12 * c.frobenius_sq().max(1.0));
        }
    }

    #[test]
    fn pmd_matrix_is_special_unitary(dgd_ps in 0.0..60.0f64, p in psp()) {
        let u = pmd_matrix(dgd_ps * 1e-12, &p, ALPHA).unwrap().matrix();
        prop_assert!((u * u.adjoint()).max_abs_diff(&Mat2::identity()) < 1e-12);
        prop_assert!((u.det() - Complex::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn dgd_and_psp_survive_common_phase(frac in 0.02..0.48f64, p in psp(), theta in -PI..PI) {
        let dgd = frac * T0;
        let u = pmd_matrix(dgd, &p, ALPHA).unwrap().matrix();
        let ut = u.scale(Complex::from_polar(1.0, theta));
        prop_assert!((estimate_dgd(&ut, ALPHA).unwrap() - dgd).abs() < 1e-9 * T0);
        let p_hat = estimate_psp(&ut, ALPHA).unwrap();
        prop_assert!(p_hat.angle_to(&p) < 1e-6);
        let back = reconstruct_u(dgd, &p_hat, ALPHA).unwrap().matrix();
        prop_assert!(distance_up_to_phase(&back, &u) < 1e-9);
    }

    #[test]
    fn dgd_estimate_is_wrapped_to_half_symbol(frac in 0.0..2.0f64, p in psp()) {
        let u = pmd_matrix(frac * T0, &p, ALPHA).unwrap().matrix();
        let d = estimate_dgd(&u, ALPHA).unwrap();
        prop_assert!((0.0..=0.5 * T0 * (1.0 + 1e-12)).contains(&d));
    }

    #[test]
    fn wrapped_phases_stay_in_range(x in -1e3..1e3f64) {
        let u = wrap_ui(x);
        prop_assert!((-0.5..0.5).contains(&u));
        prop_assert!(((x - u) - (x - u).round()).abs() < 1e-9);
        let p = wrap_pi(x);
        prop_assert!((-PI..=PI).contains(&p));
    }

    #[test]
    fn farrow_weights_reproduce_constants_and_ramps(mu in 0.0..1.0f64) {
        let w = farrow_weights(mu);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // taps sit at -1, 0, 1, 2
        let ramp: f64 = w.iter().enumerate().map(|(k, wk)| wk * (k as f64 - 1.0)).sum();
        prop_assert!((ramp - mu).abs() < 2e-3);
    }
}
