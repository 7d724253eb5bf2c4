#![allow(dead_code)]

use epfrag::expfam::{mvn_common_to_natural, CommonMVN, NatParam};
use epfrag::linalg::Mat;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn normal_msg(rng: &mut ChaCha8Rng) -> NatParam<f64> {
    let mean: f64 = rng.gen_range(-3.0..3.0);
    let var: f64 = rng.gen_range(0.2..4.0);
    NatParam::normal(mean / var, -0.5 / var)
}

pub fn invchisq_msg(rng: &mut ChaCha8Rng) -> NatParam<f64> {
    let kappa: f64 = rng.gen_range(1.0..20.0);
    let lambda: f64 = rng.gen_range(0.5..10.0);
    NatParam::inv_chisq(-0.5 * kappa - 1.0, -0.5 * lambda)
}

pub fn spd(rng: &mut ChaCha8Rng, d: usize) -> Mat<f64> {
    let mut l = Mat::zeros(d, d);
    for j in 0..d {
        for i in j..d {
            l[(i, j)] = if i == j { rng.gen_range(0.5..2.0) } else { rng.gen_range(-0.8..0.8) };
        }
    }
    l.matmul(&l.transpose()).unwrap().symmetrize()
}

pub fn mvn_msg(rng: &mut ChaCha8Rng, d: usize) -> NatParam<f64> {
    let mu = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
    mvn_common_to_natural(&CommonMVN { mu, sigma: spd(rng, d) }).unwrap()
}

pub fn max_rel_diff(a: &NatParam<f64>, b: &NatParam<f64>) -> f64 {
    a.eta
        .iter()
        .zip(&b.eta)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}
