use epfrag::expfam::{grad_a_invchisq, grad_a_normal, in_moment_domain, inv_grad_a_invchisq, inv_grad_a_normal, NatParam};
use epfrag::oracle::{normal_density, Grid1D};
use epfrag::quadrature::{integral_a, integral_b, integral_c, moment_ratios_c, IntegrandKernel, QuadConfig};
use epfrag::special::{inv_logmdigamma, logmdigamma};
use proptest::prelude::*;

fn cfg() -> QuadConfig<f64> {
    QuadConfig::default()
}

proptest! {
    #[test]
    fn normal_round_trip(e1 in -50.0..50.0f64, e2 in -50.0..-0.01f64) {
        let p = NatParam::normal(e1, e2);
        let m = grad_a_normal(&p).unwrap();
        prop_assert!(in_moment_domain(&m));
        prop_assert!(m.tau[1] > m.tau[0] * m.tau[0]);
        let back = inv_grad_a_normal(&m).unwrap();
        for k in 0..2 {
            prop_assert!((back.eta[k] - p.eta[k]).abs() <= 1e-10 * p.eta[k].abs().max(1.0));
        }
    }

    #[test]
    fn invchisq_round_trip(e1 in -200.0..-1.001f64, e2 in -200.0..-0.01f64) {
        let p = NatParam::inv_chisq(e1, e2);
        let m = grad_a_invchisq(&p).unwrap();
        prop_assert!(in_moment_domain(&m));
        let back = inv_grad_a_invchisq(&m).unwrap();
        for k in 0..2 {
            prop_assert!((back.eta[k] / p.eta[k] - 1.0).abs() <= 1e-8);
        }
    }

    #[test]
    fn normal_moments_by_quadrature(e1 in -5.0..5.0f64, e2 in -5.0..-0.05f64) {
        let p = NatParam::normal(e1, e2);
        let m = grad_a_normal(&p).unwrap();
        let sd = (-0.5 / e2).sqrt();
        let mean = -e1 / (2.0 * e2);
        let grid = Grid1D::from_fn(Grid1D::linspace(mean - 15.0 * sd, mean + 15.0 * sd, 4001), |x| normal_density(&p, x));
        prop_assert!((grid.mean() - m.tau[0]).abs() < 1e-7 * m.tau[0].abs().max(1.0));
        let second = grid.variance() + grid.mean() * grid.mean();
        prop_assert!((second - m.tau[1]).abs() < 1e-7 * m.tau[1].abs().max(1.0));
    }

    #[test]
    fn guo_qi_bracket(ly in -13.8..13.8f64) {
        let y = ly.exp();
        let x = inv_logmdigamma(y).unwrap();
        prop_assert!(x > 0.5 / y && x < 1.0 / y);
        prop_assert!((logmdigamma(x).unwrap() - y).abs() < 1e-12 * y.max(1.0));
    }

    #[test]
    fn logmdigamma_positive_and_decreasing(a in 1e-3..50.0f64, step in 1e-3..5.0f64) {
        let (fa, fb) = (logmdigamma(a).unwrap(), logmdigamma(a + step).unwrap());
        prop_assert!(fa > 0.0 && fb > 0.0 && fb < fa);
    }

    #[test]
    fn jensen_for_every_family(q in 0.2..3.0f64, r in 0.2..3.0f64, t in 0.5..3.0f64, u in 0.2..3.0f64) {
        let c = cfg();
        let a: Vec<f64> = (0..3).map(|p| integral_a(p, q, r, 0.3, t, u, &c).unwrap().value()).collect();
        prop_assert!(a[2] / a[0] > (a[1] / a[0]).powi(2));
        let b: Vec<f64> = (0..3).map(|p| integral_b(p, q, r, 0.5, t, u, &c).unwrap().value()).collect();
        prop_assert!(b[2] / b[0] > (b[1] / b[0]).powi(2));
        for k in [IntegrandKernel::Logistic, IntegrandKernel::Poisson] {
            let (m1, m2) = moment_ratios_c(k, q - 1.0, r, &c).unwrap();
            prop_assert!(m2 > m1 * m1);
        }
    }

    #[test]
    fn tighter_tolerance_agrees(q in -3.0..3.0f64, r in 0.2..3.0f64) {
        let coarse = QuadConfig { rel_tol: 1e-8, ..cfg() };
        let fine = QuadConfig { rel_tol: 5e-9, ..cfg() };
        let x = integral_c(IntegrandKernel::Logistic, 2, q, r, &coarse).unwrap();
        let y = integral_c(IntegrandKernel::Logistic, 2, q, r, &fine).unwrap();
        prop_assert!((x.log_magnitude - y.log_magnitude).abs() < 1e-8);
    }
}

#[test]
fn huge_linear_terms_stay_finite() {
    // ∫exp(qx − x²) = √π·exp(q²/4), far beyond the f64 range at q = 600.
    let v = integral_a(0, 600.0, 1.0, 0.0, 1.0, 0.0, &cfg()).unwrap();
    let want = 0.5 * std::f64::consts::PI.ln() + 600.0 * 600.0 / 4.0;
    assert!((v.log_magnitude - want).abs() < 1e-10 * want);
    let a = integral_c(IntegrandKernel::Logistic, 0, 600.5, 1.0, &cfg()).unwrap();
    let b = integral_c(IntegrandKernel::Logistic, 0, 1.0 - 600.5, 1.0, &cfg()).unwrap();
    assert!(a.log_magnitude.is_finite());
    assert!((a.log_magnitude - b.log_magnitude).abs() < 1e-10 * a.log_magnitude.abs());
}
