//! Brute-force references: wide-window midpoint sums for the integral
//! families, tilted-density projections for every fragment, dense-grid
//! posteriors for models with at most two free parameters, and the accuracy
//! score `100·(1 − ½∫|q − p|)`.
//!
//! Nothing here calls into the quadrature or kernel modules; the only shared
//! pieces are elementary special functions and the ∇A inversions of `expfam`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expfam::{invchisq_from_log_gap, normal_from_mean_var, FamilyTag, NatParam};
use crate::fragments::FragmentData;
use crate::kernels::norm_phi_phi_identities;
use crate::linalg::Mat;
use crate::special::{ln_gamma, norm_cdf};

/// Nodes of the naive midpoint rule.
pub const NAIVE_NODES: usize = 200_000;
/// Nodes per axis of the 2-d tilted-density grids.
pub const TILTED_NODES_2D: usize = 1600;
/// Default nodes per axis of posterior grids.
pub const GRID_NODES: usize = 2001;

/// Log-density drop below the peak at which a window edge is accepted.
const TILT_DROP: f64 = 46.0;
const GRID_DROP: f64 = 40.0;
const SCAN: usize = 101;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NaiveFamily {
    A,
    B,
    CLogistic,
    CPoisson,
}

fn log1pexp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn naive_log_base(family: NaiveFamily, args: &[f64], x: f64) -> f64 {
    match family {
        NaiveFamily::A => {
            let (q, r, s, t, u) = (args[0], args[1], args[2], args[3], args[4]);
            q * x - r * x * x - u * (x * x + s * x + t).ln()
        }
        NaiveFamily::B => {
            let (q, r, s, t, u) = (args[0], args[1], args[2], args[3], args[4]);
            let ex = x.exp();
            q * x - r * ex - s * ex / (t + ex) - u * (t + ex).ln()
        }
        NaiveFamily::CLogistic => args[0] * x - args[1] * x * x - log1pexp(x),
        NaiveFamily::CPoisson => args[0] * x - args[1] * x * x - x.exp(),
    }
}

fn check_naive_args(family: NaiveFamily, args: &[f64]) -> Result<()> {
    let need = match family {
        NaiveFamily::A | NaiveFamily::B => 5,
        _ => 2,
    };
    if args.len() != need {
        return Err(Error::Contract(format!("{family:?} takes {need} arguments, got {}", args.len())));
    }
    if !args.iter().all(|v| v.is_finite()) {
        return Err(Error::Domain("arguments must be finite".into()));
    }
    let bad = match family {
        NaiveFamily::A => !(args[1] > 0.0 && args[3] > 0.25 * args[2] * args[2] && args[4] >= 0.0),
        NaiveFamily::B => !(args[0] > 0.0 && args[1] > 0.0 && args[2] >= 0.0 && args[3] > 0.0 && args[4] > 0.0),
        _ => !(args[1] > 0.0),
    };
    if bad {
        return Err(Error::Domain(format!("{family:?} arguments {args:?} outside the domain")));
    }
    Ok(())
}

/// Integral of `xᵖ·exp(base(x))` by a midpoint sum over `[mode − 20σ, mode + 20σ]`,
/// widened while the edges are not yet negligible.
///
/// `args` is `(q, r, s, t, u)` for 𝒜 and ℬ and `(q, r)` for 𝒞.
pub fn naive_integral(family: NaiveFamily, p: u32, args: &[f64]) -> Result<f64> {
    check_naive_args(family, args)?;
    let f = |x: f64| naive_log_base(family, args, x);
    // Coarse scan for the mode, then golden-section refinement.
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 0..=4000 {
        let x = -200.0 + 0.1 * i as f64;
        let v = f(x);
        if v > best.0 {
            best = (v, x);
        }
    }
    let (mut lo, mut hi) = (best.1 - 0.1, best.1 + 0.1);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let m1 = hi - phi * (hi - lo);
        let m2 = lo + phi * (hi - lo);
        if f(m1) < f(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let mode = 0.5 * (lo + hi);
    let h = 1e-3 * (1.0 + mode.abs());
    let curv = (f(mode + h) - 2.0 * f(mode) + f(mode - h)) / (h * h);
    let sigma = if curv < 0.0 { (-curv).sqrt().recip() } else { 1.0 };
    let peak = f(mode);
    let weighted = |x: f64| f(x) + p as f64 * x.abs().ln();
    let mut half = 20.0 * sigma;
    while weighted(mode - half).max(weighted(mode + half)) > peak - 60.0 && half < 1e4 {
        half *= 1.5;
    }
    let (a, b) = (mode - half, mode + half);
    let step = (b - a) / NAIVE_NODES as f64;
    let terms: Vec<(f64, f64)> = (0..NAIVE_NODES)
        .map(|i| {
            let x = a + (i as f64 + 0.5) * step;
            (f(x) - peak, x.powi(p as i32))
        })
        .collect();
    let sum: f64 = terms.iter().map(|&(lg, w)| lg.exp() * w).sum();
    Ok(sum * step * peak.exp())
}

/// Bounding box of the region where `logf` exceeds its maximum minus `drop`.
fn locate_box<const D: usize>(
    logf: &(dyn Fn([f64; D]) -> f64 + Sync),
    center: [f64; D],
    half: [f64; D],
    drop: f64,
) -> Result<[(f64, f64); D]> {
    let mut lo: [f64; D] = std::array::from_fn(|k| center[k] - half[k]);
    let mut hi: [f64; D] = std::array::from_fn(|k| center[k] + half[k]);
    let total = SCAN.pow(D as u32);
    for _ in 0..200 {
        let pt = |idx: usize| -> [f64; D] {
            let mut rem = idx;
            std::array::from_fn(|k| {
                let i = rem % SCAN;
                rem /= SCAN;
                lo[k] + (hi[k] - lo[k]) * i as f64 / (SCAN - 1) as f64
            })
        };
        let vals: Vec<f64> = (0..total).into_par_iter().map(|i| logf(pt(i))).collect();
        let (imax, vmax) = vals
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .fold((usize::MAX, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        if imax == usize::MAX {
            for k in 0..D {
                let (c, w) = (0.5 * (lo[k] + hi[k]), hi[k] - lo[k]);
                lo[k] = c - 2.0 * w;
                hi[k] = c + 2.0 * w;
            }
            continue;
        }
        let mut emin = [SCAN; D];
        let mut emax = [0usize; D];
        for (i, &v) in vals.iter().enumerate() {
            if v > vmax - drop {
                let mut rem = i;
                for k in 0..D {
                    let j = rem % SCAN;
                    rem /= SCAN;
                    emin[k] = emin[k].min(j);
                    emax[k] = emax[k].max(j);
                }
            }
        }
        let mut settled = true;
        for k in 0..D {
            let w = hi[k] - lo[k];
            if !(w < 1e9) {
                return Err(Error::Numeric("density does not decay; is it improper?".into()));
            }
            let cell = w / (SCAN - 1) as f64;
            let touch_lo = emin[k] == 0;
            let touch_hi = emax[k] == SCAN - 1;
            if touch_lo || touch_hi || emax[k] - emin[k] < 40 {
                settled = false;
                let a = if touch_lo { lo[k] - w } else { lo[k] + (emin[k] as f64 - 2.0) * cell };
                let b = if touch_hi { hi[k] + w } else { lo[k] + (emax[k] as f64 + 2.0) * cell };
                lo[k] = a;
                hi[k] = b;
            }
        }
        if settled {
            return Ok(std::array::from_fn(|k| {
                let cell = (hi[k] - lo[k]) / (SCAN - 1) as f64;
                (lo[k] + (emin[k] as f64 - 1.0) * cell, lo[k] + (emax[k] as f64 + 1.0) * cell)
            }));
        }
    }
    Err(Error::Numeric("could not locate the bulk of the density".into()))
}

/// Midpoint nodes of `n` equal cells on `[a, b]`.
fn midpoints(a: f64, b: f64, n: usize) -> (Vec<f64>, f64) {
    let h = (b - a) / n as f64;
    ((0..n).map(|i| a + (i as f64 + 0.5) * h).collect(), h)
}

/// Normal projection of a 1-d tilted density, minus the cavity `a`.
fn project_normal_1d(logf: &(dyn Fn(f64) -> f64 + Sync), a: [f64; 2]) -> Result<NatParam<f64>> {
    let c = -a[0] / (2.0 * a[1]);
    let sd = (-0.5 / a[1]).sqrt();
    let [(lo, hi)] = locate_box(&|p: [f64; 1]| logf(p[0]), [c], [10.0 * sd], TILT_DROP)?;
    let (xs, _) = midpoints(lo, hi, NAIVE_NODES);
    let vals: Vec<f64> = xs.iter().map(|&x| logf(x)).collect();
    let peak = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mid = 0.5 * (lo + hi);
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (&x, &v) in xs.iter().zip(&vals) {
        let w = (v - peak).exp();
        let d = x - mid;
        m0 += w;
        m1 += w * d;
        m2 += w * d * d;
    }
    let e1 = m1 / m0;
    let var = m2 / m0 - e1 * e1;
    let p = normal_from_mean_var(mid + e1, var)?;
    p.sub(&NatParam::normal(a[0], a[1]))
}

struct Moments2 {
    /// (E u, Var u) of the first coordinate.
    first: (f64, f64),
    /// Invariant gap E[w−c] + log E[e^{−(w−c)}] and E[e^{−w}] for each
    /// coordinate treated as a log-variance.
    gap: [(f64, f64); 2],
}

fn moments_2d(logf: &(dyn Fn([f64; 2]) -> f64 + Sync), center: [f64; 2], half: [f64; 2]) -> Result<Moments2> {
    let bx = locate_box(logf, center, half, TILT_DROP)?;
    let n = TILTED_NODES_2D;
    let (us, _) = midpoints(bx[0].0, bx[0].1, n);
    let (vs, _) = midpoints(bx[1].0, bx[1].1, n);
    let c = [0.5 * (bx[0].0 + bx[0].1), 0.5 * (bx[1].0 + bx[1].1)];
    let rows: Vec<(f64, Vec<f64>)> = us
        .par_iter()
        .map(|&u| {
            let row: Vec<f64> = vs.iter().map(|&v| logf([u, v])).collect();
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (m, row)
        })
        .collect();
    let peak = rows.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    // Sums of w·{1, du, du², dv, e^{−du}, e^{−dv}}.
    let acc = rows
        .par_iter()
        .zip(us.par_iter())
        .map(|((_, row), &u)| {
            let du = u - c[0];
            let eu = (-du).exp();
            let mut s = [0.0f64; 6];
            for (&lv, &v) in row.iter().zip(&vs) {
                let w = (lv - peak).exp();
                if w == 0.0 {
                    continue;
                }
                let dv = v - c[1];
                s[0] += w;
                s[1] += w * du;
                s[2] += w * du * du;
                s[3] += w * dv;
                s[4] += w * eu;
                s[5] += w * (-dv).exp();
            }
            s
        })
        .reduce(|| [0.0; 6], |a, b| std::array::from_fn(|k| a[k] + b[k]));
    let e = |k: usize| acc[k] / acc[0];
    let (eu, ev) = (e(1), e(3));
    Ok(Moments2 {
        first: (c[0] + eu, e(2) - eu * eu),
        gap: [
            (eu + e(4).ln(), e(4) * (-c[0]).exp()),
            (ev + e(5).ln(), e(5) * (-c[1]).exp()),
        ],
    })
}

fn check_pair(m: &NatParam<f64>, fam: FamilyTag) -> Result<[f64; 2]> {
    if m.family != fam {
        return Err(Error::Contract(format!("expected a {fam:?} message, got {:?}", m.family)));
    }
    let [a1, a2] = m.pair();
    let ok = match fam {
        FamilyTag::UnivariateNormal => a2 < 0.0,
        _ => a1 < -1.0 && a2 < 0.0,
    };
    if !ok {
        return Err(Error::Domain(format!("oracle needs a proper {fam:?} message, got {:?}", m.eta)));
    }
    Ok([a1, a2])
}

/// Rough location and spread of log x under an Inverse-χ² message.
fn log_scale_guess(b: [f64; 2]) -> (f64, f64) {
    let shape = -b[0] - 1.0;
    let scale = -b[1];
    ((scale / shape).ln(), (1.0 / shape).sqrt().max(0.05) * 5.0)
}

/// Oracle for the Gaussian likelihood fragment: (to α, to σ²).
pub fn oracle_gaussian_lik(y: f64, in_alpha: &NatParam<f64>, in_sigsq: &NatParam<f64>) -> Result<(NatParam<f64>, NatParam<f64>)> {
    let a = check_pair(in_alpha, FamilyTag::UnivariateNormal)?;
    let b = check_pair(in_sigsq, FamilyTag::InverseChiSquared)?;
    // Coordinates (α, w = log σ²); the Jacobian of σ² = eʷ adds w.
    let logf = move |p: [f64; 2]| {
        let (x, w) = (p[0], p[1]);
        let r = y - x;
        a[0] * x + a[1] * x * x + b[0] * w + b[1] * (-w).exp() + w - 0.5 * w - 0.5 * r * r * (-w).exp()
    };
    let (lw, sw) = log_scale_guess(b);
    let cx = -a[0] / (2.0 * a[1]);
    let sx = (-0.5 / a[1]).sqrt();
    let m = moments_2d(&logf, [0.5 * (cx + y), lw], [5.0 * sx + (y - cx).abs(), sw])?;
    let to_alpha = normal_from_mean_var(m.first.0, m.first.1)?.sub(in_alpha)?;
    let (gap, tau2) = m.gap[1];
    let to_sigsq = invchisq_from_log_gap(gap, tau2)?.sub(in_sigsq)?;
    Ok((to_alpha, to_sigsq))
}

/// Oracle for the iterated Inverse-χ² fragment with σ² | a ~ Inverse-χ²(ν, ν/a):
/// (to σ², to a).
pub fn oracle_iter_invchisq(nu: f64, in_sigsq: &NatParam<f64>, in_a: &NatParam<f64>) -> Result<(NatParam<f64>, NatParam<f64>)> {
    if !(nu > 0.0) {
        return Err(Error::Domain(format!("ν must be positive, got {nu}")));
    }
    let b = check_pair(in_sigsq, FamilyTag::InverseChiSquared)?;
    let c = check_pair(in_a, FamilyTag::InverseChiSquared)?;
    let hn = 0.5 * nu;
    let lconst = hn * hn.ln() - ln_gamma(hn);
    // Coordinates (w = log σ², v = log a).
    let logf = move |p: [f64; 2]| {
        let (w, v) = (p[0], p[1]);
        let factor = lconst - hn * v - (hn + 1.0) * w - hn * (-(v + w)).exp();
        b[0] * w + b[1] * (-w).exp() + c[0] * v + c[1] * (-v).exp() + w + v + factor
    };
    let (lw, sw) = log_scale_guess(b);
    let (lv, sv) = log_scale_guess(c);
    let m = moments_2d(&logf, [lw, lv], [sw + 5.0, sv + 5.0])?;
    let to_s = invchisq_from_log_gap(m.gap[0].0, m.gap[0].1)?.sub(in_sigsq)?;
    let to_a = invchisq_from_log_gap(m.gap[1].0, m.gap[1].1)?.sub(in_a)?;
    Ok((to_s, to_a))
}

pub fn oracle_logistic(y: bool, in_alpha: &NatParam<f64>) -> Result<NatParam<f64>> {
    let a = check_pair(in_alpha, FamilyTag::UnivariateNormal)?;
    let yv = if y { 1.0 } else { 0.0 };
    project_normal_1d(&move |x| a[0] * x + a[1] * x * x + yv * x - log1pexp(x), a)
}

pub fn oracle_poisson(y: u64, in_alpha: &NatParam<f64>) -> Result<NatParam<f64>> {
    let a = check_pair(in_alpha, FamilyTag::UnivariateNormal)?;
    let yv = y as f64;
    project_normal_1d(&move |x| a[0] * x + a[1] * x * x + yv * x - x.exp(), a)
}

/// Probit oracle by direct integration of φ-cavity × Φ((2y−1)α).
pub fn oracle_probit(y: bool, in_alpha: &NatParam<f64>) -> Result<NatParam<f64>> {
    let a = check_pair(in_alpha, FamilyTag::UnivariateNormal)?;
    let sgn = if y { 1.0 } else { -1.0 };
    project_normal_1d(&move |x| a[0] * x + a[1] * x * x + log_norm_cdf(sgn * x), a)
}

fn log_norm_cdf(x: f64) -> f64 {
    if x > -30.0 {
        norm_cdf(x).ln()
    } else {
        // Mills-ratio expansion of log Φ.
        let t = x * x;
        -0.5 * t - (-x).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + (1.0 - 1.0 / t + 3.0 / (t * t)).ln()
    }
}

/// Probit update through the closed-form ∫Φ(a+bz)φ(z)zᵖdz identities.
pub fn oracle_probit_identities(y: bool, in_alpha: &NatParam<f64>) -> Result<NatParam<f64>> {
    let a = check_pair(in_alpha, FamilyTag::UnivariateNormal)?;
    let sgn = if y { 1.0 } else { -1.0 };
    let v = -0.5 / a[1];
    let mu = a[0] * v;
    let sd = v.sqrt();
    let (i0, i1, i2) = norm_phi_phi_identities(sgn * mu, sgn * sd);
    let ez = i1 / i0;
    let mean = mu + sd * ez;
    let var = v * (i2 / i0 - ez * ez);
    normal_from_mean_var(mean, var)?.sub(in_alpha)
}

/// The ε = 0 output of `fragment`, computed independently from its tilted density.
pub fn tilted_projection_oracle(fragment: &FragmentData<f64>, incoming: &[NatParam<f64>]) -> Result<Vec<NatParam<f64>>> {
    let need = fragment.signature().len();
    if incoming.len() != need {
        return Err(Error::Contract(format!("{} needs {need} messages", fragment.kind())));
    }
    match fragment {
        FragmentData::GaussianLik { y } => {
            let (x, s) = oracle_gaussian_lik(*y, &incoming[0], &incoming[1])?;
            Ok(vec![x, s])
        }
        FragmentData::IteratedInvChiSq { nu } => {
            let (s, a) = oracle_iter_invchisq(*nu, &incoming[0], &incoming[1])?;
            Ok(vec![s, a])
        }
        FragmentData::LogisticLik { y } => Ok(vec![oracle_logistic(*y, &incoming[0])?]),
        FragmentData::ProbitLik { y } => Ok(vec![oracle_probit(*y, &incoming[0])?]),
        FragmentData::PoissonLik { y } => Ok(vec![oracle_poisson(*y, &incoming[0])?]),
        other => Err(Error::Contract(format!(
            "no tilted-density oracle for the {} fragment",
            other.kind()
        ))),
    }
}

/// A density tabulated on an increasing grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid1D {
    pub x: Vec<f64>,
    pub density: Vec<f64>,
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

impl Grid1D {
    pub fn from_fn(x: Vec<f64>, f: impl Fn(f64) -> f64) -> Self {
        let density = x.iter().map(|&v| f(v)).collect();
        Grid1D { x, density }
    }

    pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    pub fn mass(&self) -> f64 {
        trapezoid(&self.x, &self.density)
    }

    pub fn normalized(mut self) -> Self {
        let m = self.mass();
        for d in &mut self.density {
            *d /= m;
        }
        self
    }

    pub fn mean(&self) -> f64 {
        let xd: Vec<f64> = self.x.iter().zip(&self.density).map(|(a, b)| a * b).collect();
        trapezoid(&self.x, &xd) / self.mass()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let xd: Vec<f64> = self.x.iter().zip(&self.density).map(|(a, b)| (a - m) * (a - m) * b).collect();
        trapezoid(&self.x, &xd) / self.mass()
    }
}

/// An unnormalised log-density on a tensor grid; `log_density[i * y.len() + j]`
/// is the value at `(x[i], y[j])`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid2D {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub log_density: Vec<f64>,
}

impl Grid2D {
    fn weights(&self) -> Vec<f64> {
        let peak = self.log_density.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        self.log_density.iter().map(|&v| (v - peak).exp()).collect()
    }

    /// Total trapezoid mass of the normalised density (1 up to rounding).
    pub fn mass(&self) -> f64 {
        let mx = self.marginal_x();
        mx.mass()
    }

    pub fn marginal_x(&self) -> Grid1D {
        let w = self.weights();
        let ny = self.y.len();
        let rows: Vec<f64> = (0..self.x.len()).map(|i| trapezoid(&self.y, &w[i * ny..(i + 1) * ny])).collect();
        Grid1D {
            x: self.x.clone(),
            density: rows,
        }
        .normalized()
    }

    pub fn marginal_y(&self) -> Grid1D {
        let w = self.weights();
        let ny = self.y.len();
        let cols: Vec<f64> = (0..ny)
            .map(|j| {
                let col: Vec<f64> = (0..self.x.len()).map(|i| w[i * ny + j]).collect();
                trapezoid(&self.x, &col)
            })
            .collect();
        Grid1D {
            x: self.y.clone(),
            density: cols,
        }
        .normalized()
    }
}

/// Models whose exact posterior is tabulated by [`grid_posterior`].
#[derive(Clone, Debug)]
pub enum GridModel {
    /// Normal mean with known variance and a N(mu0, tau0sq) prior.
    NormalMean { y: Vec<f64>, sigsq: f64, mu0: f64, tau0sq: f64 },
    /// Logistic regression with independent N(0, sigsq_beta) priors.
    Logistic { x: Mat<f64>, y: Vec<bool>, sigsq_beta: f64 },
    /// Gaussian regression with a N(0, sigsq_beta) prior on the single
    /// coefficient and σ ~ Half-Cauchy(A). Coordinates are (β, σ²).
    LinearHalfCauchy { x: Vec<f64>, y: Vec<f64>, sigsq_beta: f64, a: f64 },
}

#[derive(Clone, Debug)]
pub enum GridPosterior {
    One(Grid1D),
    Two(Grid2D),
}

impl GridModel {
    fn free_parameters(&self) -> usize {
        match self {
            GridModel::NormalMean { .. } => 1,
            GridModel::Logistic { x, .. } => x.cols(),
            GridModel::LinearHalfCauchy { .. } => 2,
        }
    }
}

/// Log density of σ² when σ ~ Half-Cauchy(A), up to a constant.
pub fn half_cauchy_log_density_sigsq(sigsq: f64, a: f64) -> f64 {
    if sigsq <= 0.0 {
        return f64::NEG_INFINITY;
    }
    -0.5 * sigsq.ln() - (sigsq / (a * a)).ln_1p()
}

/// Exact posterior of a model with at most two free parameters on a dense grid.
pub fn grid_posterior(model: &GridModel, nodes: usize) -> Result<GridPosterior> {
    if model.free_parameters() > 2 {
        return Err(Error::Contract(format!(
            "grid posteriors support at most 2 free parameters, got {}",
            model.free_parameters()
        )));
    }
    if nodes < 3 {
        return Err(Error::Contract("a grid needs at least 3 nodes per axis".into()));
    }
    match model {
        GridModel::NormalMean { y, sigsq, mu0, tau0sq } => {
            let n = y.len() as f64;
            let sy: f64 = y.iter().sum();
            let (s, m0, t0) = (*sigsq, *mu0, *tau0sq);
            let logf = move |p: [f64; 1]| {
                let m = p[0];
                -0.5 * (n * m * m - 2.0 * m * sy) / s - 0.5 * (m - m0) * (m - m0) / t0
            };
            let sd = (1.0 / (n / s + 1.0 / t0)).sqrt();
            let [(lo, hi)] = locate_box(&logf, [m0], [10.0 * sd + (sy / n.max(1.0) - m0).abs()], GRID_DROP)?;
            let x = Grid1D::linspace(lo, hi, nodes);
            let peak = x.iter().map(|&v| logf([v])).fold(f64::NEG_INFINITY, f64::max);
            Ok(GridPosterior::One(
                Grid1D::from_fn(x, |v| (logf([v]) - peak).exp()).normalized(),
            ))
        }
        GridModel::Logistic { x, y, sigsq_beta } => {
            if x.rows() != y.len() || x.rows() == 0 {
                return Err(Error::Contract("design and response lengths differ".into()));
            }
            let d = x.cols();
            let sb = *sigsq_beta;
            let loglik = |b: &[f64]| -> f64 {
                let mut s = 0.0;
                for i in 0..x.rows() {
                    let eta: f64 = (0..d).map(|j| x[(i, j)] * b[j]).sum();
                    s += if y[i] { eta } else { 0.0 } - log1pexp(eta);
                }
                s - 0.5 * b.iter().map(|v| v * v).sum::<f64>() / sb
            };
            if d == 1 {
                let f = |p: [f64; 1]| loglik(&p);
                let [(lo, hi)] = locate_box(&f, [0.0], [5.0], GRID_DROP)?;
                let xs = Grid1D::linspace(lo, hi, nodes);
                let vals: Vec<f64> = xs.par_iter().map(|&v| loglik(&[v])).collect();
                let peak = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                return Ok(GridPosterior::One(
                    Grid1D {
                        x: xs,
                        density: vals.iter().map(|v| (v - peak).exp()).collect(),
                    }
                    .normalized(),
                ));
            }
            let f = |p: [f64; 2]| loglik(&p);
            let bx = locate_box(&f, [0.0, 0.0], [5.0, 5.0], GRID_DROP)?;
            Ok(GridPosterior::Two(tabulate_2d(&f, bx, nodes)))
        }
        GridModel::LinearHalfCauchy { x, y, sigsq_beta, a } => {
            if x.len() != y.len() || x.is_empty() {
                return Err(Error::Contract("design and response lengths differ".into()));
            }
            let n = x.len() as f64;
            let sxx: f64 = x.iter().map(|v| v * v).sum();
            let sxy: f64 = x.iter().zip(y).map(|(u, v)| u * v).sum();
            let syy: f64 = y.iter().map(|v| v * v).sum();
            let (sb, aa) = (*sigsq_beta, *a);
            let f = move |p: [f64; 2]| {
                let (b, s2) = (p[0], p[1]);
                if s2 <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let rss = syy - 2.0 * b * sxy + b * b * sxx;
                -0.5 * n * s2.ln() - 0.5 * rss / s2 - 0.5 * b * b / sb + half_cauchy_log_density_sigsq(s2, aa)
            };
            let bhat = sxy / sxx;
            let s2hat = ((syy - bhat * sxy) / n).max(1e-12);
            let bx = locate_box(&f, [bhat, s2hat], [10.0 * (s2hat / sxx).sqrt(), 0.99 * s2hat], GRID_DROP)?;
            Ok(GridPosterior::Two(tabulate_2d(&f, bx, nodes)))
        }
    }
}

fn tabulate_2d(f: &(dyn Fn([f64; 2]) -> f64 + Sync), bx: [(f64, f64); 2], nodes: usize) -> Grid2D {
    let xs = Grid1D::linspace(bx[0].0, bx[0].1, nodes);
    let ys = Grid1D::linspace(bx[1].0, bx[1].1, nodes);
    let log_density: Vec<f64> = xs
        .par_iter()
        .flat_map_iter(|&u| ys.iter().map(move |&v| f([u, v])).collect::<Vec<_>>())
        .map(|v| if v.is_finite() { v } else { f64::NEG_INFINITY })
        .collect();
    Grid2D { x: xs, y: ys, log_density }
}

/// `100·(1 − ½∫|q − p|)` by the trapezoid rule on a shared grid, clamped to [0, 100].
pub fn accuracy(q: &Grid1D, p: &Grid1D) -> Result<f64> {
    if q.x.len() != p.x.len() || q.x.iter().zip(&p.x).any(|(a, b)| a != b) {
        return Err(Error::Contract("accuracy needs both densities on the same grid".into()));
    }
    if q.x.len() < 2 {
        return Err(Error::Contract("accuracy needs at least two grid points".into()));
    }
    let diff: Vec<f64> = q.density.iter().zip(&p.density).map(|(a, b)| (a - b).abs()).collect();
    Ok((100.0 * (1.0 - 0.5 * trapezoid(&q.x, &diff))).clamp(0.0, 100.0))
}

/// Density of a Normal natural parameter at `x`.
pub fn normal_density(p: &NatParam<f64>, x: f64) -> f64 {
    let [e1, e2] = p.pair();
    let var = -0.5 / e2;
    let mu = e1 * var;
    (-(x - mu) * (x - mu) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Density of an Inverse-χ² natural parameter at `x > 0`.
pub fn invchisq_density(p: &NatParam<f64>, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let [e1, e2] = p.pair();
    let shape = -e1 - 1.0;
    let rate = -e2;
    (shape * rate.ln() - ln_gamma(shape) + e1 * x.ln() + e2 / x).exp()
}

/// Marginal density of coordinate `k` of a Multivariate Normal natural parameter.
pub fn mvn_marginal_density(p: &NatParam<f64>, k: usize) -> Result<impl Fn(f64) -> f64> {
    let c = crate::expfam::mvn_natural_to_common(p)?;
    let mu = c.mu[k];
    let var = c.sigma[(k, k)];
    let q = NatParam::normal(mu / var, -0.5 / var);
    Ok(move |x: f64| normal_density(&q, x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn naive_closed_forms() {
        let v = naive_integral(NaiveFamily::A, 0, &[0.0, 1.0, 0.0, 1.0, 1.0]).unwrap();
        let want = std::f64::consts::PI * 1f64.exp() * libm::erfc(1.0);
        assert!((v - want).abs() < 1e-6);
        assert!(naive_integral(NaiveFamily::A, 1, &[0.0, 1.0, 0.0, 1.0, 1.0]).unwrap().abs() < 1e-10);
        assert!(naive_integral(NaiveFamily::B, 0, &[0.0, 1.0, 0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn accuracy_fixtures() {
        let x = Grid1D::linspace(-12.0, 13.0, 20001);
        let p = Grid1D::from_fn(x.clone(), |v| (-0.5 * v * v).exp() / (2.0 * std::f64::consts::PI).sqrt());
        let q = Grid1D::from_fn(x.clone(), |v| (-0.5 * (v - 1.0) * (v - 1.0)).exp() / (2.0 * std::f64::consts::PI).sqrt());
        assert!((accuracy(&p, &p).unwrap() - 100.0).abs() < 1e-12);
        let acc = accuracy(&q, &p).unwrap();
        assert!((acc - 61.707_500_0).abs() < 1e-4, "{acc}");
        let far = Grid1D::from_fn(x, |v| (-0.5 * (v - 12.0) * (v - 12.0) * 400.0).exp() * 20.0 / (2.0 * std::f64::consts::PI).sqrt());
        assert!(accuracy(&far, &p).unwrap() < 1e-6);
    }

    #[test]
    fn probit_paths_agree_on_skew_normal() {
        let a = NatParam::normal(0.0, -0.5);
        let q = oracle_probit(true, &a).unwrap();
        let c = oracle_probit_identities(true, &a).unwrap();
        assert!((q.eta[0] - 0.827_6).abs() < 1e-4 && (q.eta[1] + 0.233_5).abs() < 1e-4);
        assert!(q.max_abs_diff(&c) < 1e-9);
    }

    #[test]
    fn three_parameters_rejected() {
        let m = GridModel::Logistic {
            x: Mat::zeros(4, 3),
            y: vec![true; 4],
            sigsq_beta: 1.0,
        };
        assert!(matches!(grid_posterior(&m, 11), Err(Error::Contract(_))));
    }

    #[test]
    fn half_cauchy_from_iterated_construction() {
        // ∫ Inverse-χ²(σ²; 1, 1/a) Inverse-χ²(a; 1, 1/A²) da against the Half-Cauchy form.
        let big_a = 1.7f64;
        let ig = |x: f64, kappa: f64, lambda: f64| {
            let h = 0.5 * kappa;
            (h * (0.5 * lambda).ln() - ln_gamma(h) - (h + 1.0) * x.ln() - 0.5 * lambda / x).exp()
        };
        let mix = |s2: f64| {
            // Integrate over v = log a.
            let (lo, hi, n) = (-40.0, 40.0, 40_000);
            let h = (hi - lo) / n as f64;
            (0..n)
                .map(|i| {
                    let v: f64 = lo + (i as f64 + 0.5) * h;
                    let a = v.exp();
                    ig(s2, 1.0, 1.0 / a) * ig(a, 1.0, 1.0 / (big_a * big_a)) * a * h
                })
                .sum::<f64>()
        };
        let r1 = mix(0.3) / mix(2.0);
        let r2 = (half_cauchy_log_density_sigsq(0.3, big_a) - half_cauchy_log_density_sigsq(2.0, big_a)).exp();
        assert!((r1 / r2 - 1.0).abs() < 1e-8, "{r1} vs {r2}");
    }
}
