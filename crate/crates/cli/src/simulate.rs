use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const BETA0: f64 = -0.5;
pub const BETA1: f64 = 0.8;
pub const SIGMA_GRP: f64 = 0.7;

/// The smooth effect of `x2`.
pub fn smooth(x: f64) -> f64 {
    (2.0 * std::f64::consts::PI * x).sin()
}

/// Logistic random-intercept data with one linear and one smooth predictor.
/// The generating values are written as `#` comment lines above the header.
pub fn simulate(seed: u64, groups: usize, per_group: usize, out: &Path) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = Normal::new(0.0, SIGMA_GRP)?;
    let x1_dist = Normal::new(0.0, 1.0)?;

    let mut file = std::fs::File::create(out).with_context(|| format!("creating {}", out.display()))?;
    writeln!(file, "# epfrag simulate seed={seed} groups={groups} per_group={per_group}")?;
    writeln!(file, "# logit P(y = 1) = beta0 + beta1*x1 + sin(2*pi*x2) + u[g], u[g] ~ N(0, sigma_grp^2)")?;
    writeln!(file, "# beta0={BETA0} beta1={BETA1} sigma_grp={SIGMA_GRP}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["g", "x1", "x2", "y"])?;
    for g in 0..groups {
        let ug = u.sample(&mut rng);
        for _ in 0..per_group {
            let x1: f64 = x1_dist.sample(&mut rng);
            let x2: f64 = rng.gen_range(0.0..1.0);
            let eta = BETA0 + BETA1 * x1 + smooth(x2) + ug;
            let y = u8::from(rng.gen_bool(1.0 / (1.0 + (-eta).exp())));
            w.write_record([g.to_string(), x1.to_string(), x2.to_string(), y.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
