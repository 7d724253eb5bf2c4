mod common;

use common::*;
use epfrag::expfam::{mvn_common_to_natural, mvn_natural_to_common, normal_natural_to_common, CommonMVN, FamilyTag, NatParam};
use epfrag::fragments::{damp, gaussian_lik_update, iter_invchisq_update, lin_comb_update, mult_lin_comb_update, FragmentData};
use epfrag::linalg::Mat;
use epfrag::oracle::tilted_projection_oracle;
use epfrag::quadrature::QuadConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cfg() -> QuadConfig<f64> {
    QuadConfig::default()
}

fn check_against_oracle(f: &FragmentData<f64>, inc: &[NatParam<f64>]) {
    let got = f.compute(inc, &cfg()).unwrap();
    let want = tilted_projection_oracle(f, inc).unwrap();
    for (g, w) in got.iter().zip(&want) {
        assert!(g.max_abs_diff(w) < 1e-6, "{f:?} {inc:?}: {g:?} vs {w:?}");
    }
}

#[test]
fn stated_oracle_examples() {
    let s = NatParam::inv_chisq(-2.0, -1.0);
    check_against_oracle(&FragmentData::IteratedInvChiSq { nu: 1.0 }, &[s.clone(), s.clone()]);
    check_against_oracle(&FragmentData::GaussianLik { y: 0.0 }, &[NatParam::normal(0.0, -0.5), s]);
}

#[test]
fn random_messages_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..15 {
        let y = rng.gen_range(-3.0..3.0);
        check_against_oracle(&FragmentData::GaussianLik { y }, &[normal_msg(&mut rng), invchisq_msg(&mut rng)]);
        let nu = rng.gen_range(0.5..5.0);
        check_against_oracle(&FragmentData::IteratedInvChiSq { nu }, &[invchisq_msg(&mut rng), invchisq_msg(&mut rng)]);
        let yb = rng.gen_bool(0.5);
        check_against_oracle(&FragmentData::LogisticLik { y: yb }, &[normal_msg(&mut rng)]);
        check_against_oracle(&FragmentData::ProbitLik { y: yb }, &[normal_msg(&mut rng)]);
        let yp = rng.gen_range(0..12);
        check_against_oracle(&FragmentData::PoissonLik { y: yp }, &[normal_msg(&mut rng)]);
    }
}

#[test]
fn sharp_variance_gives_conjugate_message() {
    let (y, s0) = (1.3, 0.7);
    let kappa = 1e6;
    let s = NatParam::inv_chisq(-kappa / 2.0 - 1.0, -kappa * s0 / 2.0);
    let (to_alpha, _) = gaussian_lik_update(y, &NatParam::normal(0.2, -0.3), &s, None, 0.0, &cfg()).unwrap();
    assert!((to_alpha.eta[0] - y / s0).abs() < 1e-3);
    assert!((to_alpha.eta[1] + 0.5 / s0).abs() < 1e-3);
}

/// Every fragment variant with a random instance and matching incoming messages.
fn random_instances(rng: &mut ChaCha8Rng) -> Vec<(FragmentData<f64>, Vec<NatParam<f64>>)> {
    let d = 3;
    let a: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect();
    let mut am = Mat::zeros(d, 2);
    for j in 0..2 {
        for i in 0..d {
            am[(i, j)] = rng.gen_range(-1.5..1.5);
        }
    }
    vec![
        (
            FragmentData::GaussianPrior { mu: vec![0.5, -1.0], sigma: spd(rng, 2) },
            vec![],
        ),
        (
            FragmentData::InverseWishartPrior { kappa: 2.5, lambda: Mat::diag(&[0.3]) },
            vec![],
        ),
        (
            FragmentData::IteratedInvChiSq { nu: rng.gen_range(0.5..4.0) },
            vec![invchisq_msg(rng), invchisq_msg(rng)],
        ),
        (FragmentData::LinComb { a }, vec![normal_msg(rng), mvn_msg(rng, d)]),
        (FragmentData::MultLinComb { a: am }, vec![mvn_msg(rng, 2), mvn_msg(rng, d)]),
        (
            FragmentData::GaussianLik { y: rng.gen_range(-2.0..2.0) },
            vec![normal_msg(rng), invchisq_msg(rng)],
        ),
        (FragmentData::LogisticLik { y: true }, vec![normal_msg(rng)]),
        (FragmentData::ProbitLik { y: false }, vec![normal_msg(rng)]),
        (FragmentData::PoissonLik { y: 4 }, vec![normal_msg(rng)]),
    ]
}

fn random_like(rng: &mut ChaCha8Rng, p: &NatParam<f64>) -> NatParam<f64> {
    NatParam {
        family: p.family,
        eta: p.eta.iter().map(|v| v + rng.gen_range(-1.0..1.0)).collect(),
    }
}

#[test]
fn damping_is_linear_for_every_fragment() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        for (f, inc) in random_instances(&mut rng) {
            let fresh = f.compute(&inc, &cfg()).unwrap();
            let old: Vec<_> = fresh.iter().map(|p| random_like(&mut rng, p)).collect();
            for eps in [0.0, 0.1, 0.5, 0.9] {
                let out = f.update(&inc, &old, eps, &cfg()).unwrap();
                for ((o, n), got) in old.iter().zip(&fresh).zip(&out) {
                    for ((&ov, &nv), &gv) in o.eta.iter().zip(&n.eta).zip(&got.eta) {
                        let want = eps * ov + (1.0 - eps) * nv;
                        assert!((gv - want).abs() <= 1e-15 * want.abs().max(1.0), "{}: ε={eps}", f.kind());
                    }
                }
            }
        }
    }
}

#[test]
fn damp_examples() {
    let out = damp(&NatParam::normal(2.0, -1.0), &NatParam::normal(0.0, -3.0), 0.5).unwrap();
    assert_eq!(out.eta, vec![1.0, -2.0]);
    let n = NatParam::normal(0.3, -0.7);
    assert_eq!(damp(&NatParam::normal(9.0, -9.0), &n, 0.0).unwrap(), n);
    assert!(damp(&NatParam::normal(0.0, -1.0), &NatParam::inv_chisq(-2.0, -1.0), 0.5).is_err());
    assert!(damp(&n, &n, 1.0).is_err());
}

#[test]
fn named_updates_damp_against_old_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (s, a) = (invchisq_msg(&mut rng), invchisq_msg(&mut rng));
    let fresh = iter_invchisq_update(1.0, &s, &a, None, 0.0, &cfg()).unwrap();
    let old = (invchisq_msg(&mut rng), invchisq_msg(&mut rng));
    let out = iter_invchisq_update(1.0, &s, &a, Some((&old.0, &old.1)), 0.9, &cfg()).unwrap();
    for k in 0..2 {
        let want = 0.9 * old.0.eta[k] + (1.0 - 0.9) * fresh.0.eta[k];
        assert!((out.0.eta[k] - want).abs() <= 1e-15 * want.abs().max(1.0));
    }
}

#[test]
fn one_column_mult_lin_comb_is_lin_comb() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for d in 1..5 {
        let a: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let in_alpha = normal_msg(&mut rng);
        let in_theta = mvn_msg(&mut rng, d);
        let (ua, ut) = lin_comb_update(&a, &in_alpha, &in_theta, None, 0.0).unwrap();
        let am = Mat::from_col_major(d, 1, a.clone()).unwrap();
        let alpha_mvn = NatParam::new(FamilyTag::MultivariateNormal(1), in_alpha.eta.clone()).unwrap();
        let (ma, mt) = mult_lin_comb_update(&am, &alpha_mvn, &in_theta, None, 0.0).unwrap();
        assert_eq!(ua.eta, ma.eta);
        assert_eq!(ut.eta, mt.eta);
    }
}

#[test]
fn lin_comb_marginal_matches_quadrature() {
    // The α-message from a θ-message N(μ, Σ) is the density of aᵀθ. Check it
    // against ∫ p(θ₁, (α − a₁θ₁)/a₂) / |a₂| dθ₁ computed by brute force.
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..5 {
        let mu = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let sigma = spd(&mut rng, 2);
        let a = vec![rng.gen_range(0.3..1.5), rng.gen_range(0.3..1.5)];
        let in_theta = mvn_common_to_natural(&CommonMVN { mu: mu.clone(), sigma: sigma.clone() }).unwrap();
        let (to_alpha, _) = lin_comb_update(&a, &NatParam::normal(0.0, -0.5), &in_theta, None, 0.0).unwrap();
        let c = normal_natural_to_common(&to_alpha).unwrap();

        let prec = epfrag::linalg::spd_inverse(&sigma).unwrap();
        let det = sigma[(0, 0)] * sigma[(1, 1)] - sigma[(0, 1)] * sigma[(1, 0)];
        let dens2 = |t1: f64, t2: f64| {
            let (x, y) = (t1 - mu[0], t2 - mu[1]);
            let q = prec[(0, 0)] * x * x + 2.0 * prec[(0, 1)] * x * y + prec[(1, 1)] * y * y;
            (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
        };
        let n = 20_000;
        let (lo, hi) = (mu[0] - 12.0 * sigma[(0, 0)].sqrt(), mu[0] + 12.0 * sigma[(0, 0)].sqrt());
        let h = (hi - lo) / n as f64;
        for alpha in [-1.0, 0.0, 0.7, 2.0] {
            let marginal: f64 = (0..n)
                .map(|i| {
                    let t1 = lo + (i as f64 + 0.5) * h;
                    dens2(t1, (alpha - a[0] * t1) / a[1]) / a[1]
                })
                .sum::<f64>()
                * h;
            let closed = (-(alpha - c.mu).powi(2) / (2.0 * c.sigsq)).exp() / (2.0 * std::f64::consts::PI * c.sigsq).sqrt();
            assert!((marginal - closed).abs() < 1e-6, "{marginal} vs {closed}");
        }
    }
}

#[test]
fn mult_lin_comb_marginal_is_projected_mvn() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let d = 4;
    let in_theta = mvn_msg(&mut rng, d);
    let mut am = Mat::zeros(d, 2);
    for j in 0..2 {
        for i in 0..d {
            am[(i, j)] = rng.gen_range(-1.5..1.5);
        }
    }
    let (to_alpha, _) = mult_lin_comb_update(&am, &mvn_msg(&mut rng, 2), &in_theta, None, 0.0).unwrap();
    let got = mvn_natural_to_common(&to_alpha).unwrap();
    let th = mvn_natural_to_common(&in_theta).unwrap();
    let at = am.transpose();
    let mu = at.matvec(&th.mu).unwrap();
    let sig = at.matmul(&th.sigma).unwrap().matmul(&am).unwrap();
    for i in 0..2 {
        assert!((got.mu[i] - mu[i]).abs() < 1e-10);
        for j in 0..2 {
            assert!((got.sigma[(i, j)] - sig[(i, j)]).abs() < 1e-10);
        }
    }
}
