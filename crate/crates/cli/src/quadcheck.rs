use anyhow::Result;
use epfrag::oracle::{naive_integral, NaiveFamily};
use epfrag::quadrature::{integral_a, integral_b, integral_c, IntegrandKernel, QuadConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::output::num;

pub const TOLERANCE: f64 = 1e-6;

/// Largest error over p = 0, 1, 2, each relative to max(|naive value|, √(I₀I₂)).
fn rel_error(fast: impl Fn(u32) -> Result<f64>, naive: impl Fn(u32) -> Result<f64>) -> Result<f64> {
    let n: Vec<f64> = (0..3).map(&naive).collect::<Result<_>>()?;
    let scale = (n[0] * n[2]).sqrt();
    let mut worst = 0.0f64;
    for p in 0..3u32 {
        let v = n[p as usize];
        worst = worst.max((fast(p)? - v).abs() / v.abs().max(scale));
    }
    Ok(worst)
}

/// Compares the adaptive quadrature against the naive oracle on `tuples`
/// random valid arguments per family.
pub fn battery(seed: u64, tuples: usize) -> Result<[f64; 4]> {
    let cfg = QuadConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 4];
    for _ in 0..tuples {
        let (q, r, s) = (rng.gen_range(-3.0..3.0), rng.gen_range(0.2..3.0), rng.gen_range(-2.0..2.0));
        let t = 0.25 * s * s + rng.gen_range(0.2..3.0);
        let u = rng.gen_range(0.0..3.0);
        let e = rel_error(
            |p| Ok(integral_a(p, q, r, s, t, u, &cfg)?.value()),
            |p| Ok(naive_integral(NaiveFamily::A, p, &[q, r, s, t, u])?),
        )?;
        worst[0] = worst[0].max(e);

        let (q, r, s, t, u) = (
            rng.gen_range(0.2..4.0),
            rng.gen_range(0.2..4.0),
            rng.gen_range(0.0..3.0),
            rng.gen_range(0.2..3.0),
            rng.gen_range(0.2..3.0),
        );
        let e = rel_error(
            |p| Ok(integral_b(p, q, r, s, t, u, &cfg)?.value()),
            |p| Ok(naive_integral(NaiveFamily::B, p, &[q, r, s, t, u])?),
        )?;
        worst[1] = worst[1].max(e);

        for (slot, kernel, family) in [
            (2, IntegrandKernel::Logistic, NaiveFamily::CLogistic),
            (3, IntegrandKernel::Poisson, NaiveFamily::CPoisson),
        ] {
            let (q, r) = (rng.gen_range(-3.0..5.0), rng.gen_range(0.1..3.0));
            let e = rel_error(
                |p| Ok(integral_c(kernel, p, q, r, &cfg)?.value()),
                |p| Ok(naive_integral(family, p, &[q, r])?),
            )?;
            worst[slot] = worst[slot].max(e);
        }
    }
    Ok(worst)
}

pub fn report(seed: u64, tuples: usize) -> Result<(Value, bool)> {
    let w = battery(seed, tuples)?;
    let pass = w.iter().all(|&v| v < TOLERANCE);
    let doc = json!({
        "seed": seed,
        "tuples_per_family": tuples,
        "tolerance": num(TOLERANCE),
        "max_rel_error": {
            "A": num(w[0]),
            "B": num(w[1]),
            "C_logistic": num(w[2]),
            "C_poisson": num(w[3]),
        },
        "pass": pass,
    });
    Ok((doc, pass))
}
