//! Explicit functions behind the fragment updates: α, β, g, Gᴺ, G^IG1, G^IG3,
//! H_b (logistic/Poisson), H_probit and ζ′.
//!
//! Moment ratios that share a tilted density are computed on one quadrature
//! node set; ratios are never formed from separately computed integrals.

use crate::error::{Error, Result};
use crate::expfam::{inv_logmdigamma, normal_from_mean_var};
use crate::quadrature::{
    b_log_gap, integral_a, integral_b, mean_var, AIntegrand, BIntegrand, CIntegrand,
    IntegrandKernel, LogValue, QuadConfig,
};
use crate::scalar::Real;
use crate::special::{norm_cdf, norm_pdf};

pub use crate::special::zeta_prime;

/// Arguments of 𝒜 implied by α(k, a, b, c).
fn alpha_args<T: Real>(a: [T; 2], b: [T; 2], c: [T; 3]) -> Result<(T, T, T, T, T)> {
    if !(a[1] < T::zero()) {
        return Err(Error::Domain(format!("α needs a₂ < 0, got a₂ = {}", a[1])));
    }
    if c[0] == T::zero() {
        return Err(Error::Domain("α needs c₁ ≠ 0".into()));
    }
    let two = T::lit(2.0);
    Ok((
        a[0],
        -a[1],
        -two * c[1] / c[0],
        (c[2] - two * b[1]) / c[0],
        (c[0] - two * b[0] - two) / two,
    ))
}

/// Arguments of ℬ implied by β(k, ℓ, v, w, a, b, c).
fn beta_args<T: Real>(l: T, v: T, w: T, a: [T; 2], b: [T; 2], c: [T; 3]) -> Result<(T, T, T, T, T)> {
    if b[1] == T::zero() {
        return Err(Error::Domain(
            "β's s-argument is undefined at b₂ = 0".into(),
        ));
    }
    if c[0] == T::zero() {
        return Err(Error::Domain("β needs c₁ ≠ 0".into()));
    }
    let two = T::lit(2.0);
    let m = c[1] / c[0] + b[0] / (two * b[1]);
    Ok((
        (l + c[0] - T::one()) / two - a[0],
        (c[0] * c[2] - c[1] * c[1]) / (two * c[0]) - a[1],
        -b[1] * m * m,
        v,
        w,
    ))
}

pub fn alpha_fn<T: Real>(k: u32, a: [T; 2], b: [T; 2], c: [T; 3], cfg: &QuadConfig<T>) -> Result<LogValue<T>> {
    let (q, r, s, t, u) = alpha_args(a, b, c)?;
    integral_a(k, q, r, s, t, u, cfg)
}

#[allow(clippy::too_many_arguments)]
pub fn beta_fn<T: Real>(
    k: u32,
    l: T,
    v: T,
    w: T,
    a: [T; 2],
    b: [T; 2],
    c: [T; 3],
    cfg: &QuadConfig<T>,
) -> Result<LogValue<T>> {
    let (q, r, s, t, u) = beta_args(l, v, w, a, b, c)?;
    integral_b(k, q, r, s, t, u, cfg)
}

/// `(log E eˣ − E x, log E eˣ)` under the ℬ-density of β(·, ℓ−1, ...).
fn beta_gap<T: Real>(l: T, v: T, w: T, a: [T; 2], b: [T; 2], c: [T; 3], cfg: &QuadConfig<T>) -> Result<(T, T)> {
    let (q, r, s, t, u) = beta_args(l - T::one(), v, w, a, b, c)?;
    let f = BIntegrand::new(q, r, s, t, u)?;
    b_log_gap(&f, cfg)
}

fn invert_gap<T: Real>(gap: T) -> Result<T> {
    if !(gap > T::zero()) || !gap.is_finite() {
        return Err(Error::MomentDomain(format!(
            "argument of (log − digamma)⁻¹ must be positive, got {gap}"
        )));
    }
    inv_logmdigamma(gap)
}

/// g(ℓ, v, w, a, b, c) = (log − digamma)⁻¹(log{β(0,ℓ+1)/β(0,ℓ−1)} − β(1,ℓ−1)/β(0,ℓ−1)).
pub fn g_fn<T: Real>(l: T, v: T, w: T, a: [T; 2], b: [T; 2], c: [T; 3], cfg: &QuadConfig<T>) -> Result<T> {
    let (gap, _) = beta_gap(l, v, w, a, b, c, cfg)?;
    invert_gap(gap)
}

/// Gᴺ(a, b; c): Normal projection of the α-tilted density, minus a.
pub fn g_n<T: Real>(a: [T; 2], b: [T; 2], c: [T; 3], cfg: &QuadConfig<T>) -> Result<[T; 2]> {
    let (q, r, s, t, u) = alpha_args(a, b, c)?;
    let f = AIntegrand::new(q, r, s, t, u)?;
    let (mean, var) = mean_var(&f, cfg)?;
    let p = normal_from_mean_var(mean, var)?;
    Ok([p.eta[0] - a[0], p.eta[1] - a[1]])
}

/// G^IG1(a, b; c): Inverse-χ² projection for the variance in a Gaussian
/// likelihood, minus a.
pub fn g_ig1<T: Real>(a: [T; 2], b: [T; 2], c: [T; 3], cfg: &QuadConfig<T>) -> Result<[T; 2]> {
    if !(b[1] < T::zero()) {
        return Err(Error::Domain(format!("G^IG1 needs b₂ < 0, got {}", b[1])));
    }
    if !(c[0] > T::zero()) {
        return Err(Error::Domain(format!("G^IG1 needs c₁ > 0, got {}", c[0])));
    }
    let v = -T::lit(2.0) * b[1] / c[0];
    let (gap, log_e) = beta_gap(T::zero(), v, T::lit(0.5), a, b, c, cfg)?;
    let g = invert_gap(gap)?;
    // β(0,−1)/β(0,1) = 1 / E[eˣ] under the ℓ = −1 density.
    Ok([-T::one() - g - a[0], -g * (-log_e).exp() - a[1]])
}

/// G^IG3(a, b; k, ℓ): Inverse-χ² projection for the iterated Inverse-χ²
/// factor, minus a. With ℓ = 1 this is the Half-Cauchy form G^IG2.
pub fn g_ig3<T: Real>(a: [T; 2], b: [T; 2], k: T, l: T, cfg: &QuadConfig<T>) -> Result<[T; 2]> {
    if !(l > T::zero()) {
        return Err(Error::Domain(format!("G^IG3 needs ℓ > 0, got {l}")));
    }
    if !(b[1] < T::zero()) {
        return Err(Error::Domain(format!("G^IG3 needs b₂ < 0, got {}", b[1])));
    }
    let (v, w, bb, cc) = g_ig3_args(b, k, l);
    let (gap, log_e) = beta_gap(k - T::lit(2.0), v, w, a, bb, cc, cfg)?;
    let g = invert_gap(gap)?;
    // β(0,k−3)/β(0,k−1) = 1 / E[eˣ] under the (k−3)-density.
    Ok([-T::one() - g - a[0], -g * (-log_e).exp() - a[1]])
}

/// (v, w, b, c) passed to g and β inside G^IG3: v = −b₂/ℓ, w = ℓ − k/2 − b₁,
/// b = (0, b₂), c = (2, 0, 0).
pub fn g_ig3_args<T: Real>(b: [T; 2], k: T, l: T) -> (T, T, [T; 2], [T; 3]) {
    (
        -b[1] / l,
        l - k / T::lit(2.0) - b[0],
        [T::zero(), b[1]],
        [T::lit(2.0), T::zero(), T::zero()],
    )
}

/// H_b(a; y): Normal projection of exp{a₁x + a₂x² + yx − b(x)}, minus a.
pub fn h_generic<T: Real>(kernel: IntegrandKernel, a: [T; 2], y: T, cfg: &QuadConfig<T>) -> Result<[T; 2]> {
    if !(a[1] < T::zero()) {
        return Err(Error::Domain(format!("H needs a₂ < 0, got {}", a[1])));
    }
    let f = CIntegrand::new(kernel, a[0] + y, -a[1])?;
    let (mean, var) = mean_var(&f, cfg)?;
    let p = normal_from_mean_var(mean, var)?;
    Ok([p.eta[0] - a[0], p.eta[1] - a[1]])
}

pub fn h_logistic<T: Real>(a: [T; 2], y: T, cfg: &QuadConfig<T>) -> Result<[T; 2]> {
    h_generic(IntegrandKernel::Logistic, a, y, cfg)
}

pub fn h_poisson<T: Real>(a: [T; 2], y: T, cfg: &QuadConfig<T>) -> Result<[T; 2]> {
    h_generic(IntegrandKernel::Poisson, a, y, cfg)
}

/// H_probit(a; y), closed form through ζ′.
pub fn h_probit<T: Real>(a: [T; 2], y: bool) -> Result<[T; 2]> {
    if !(a[1] < T::zero()) || !a[0].is_finite() {
        return Err(Error::Domain(format!("H_probit needs a₂ < 0, got {}", a[1])));
    }
    let one = T::one();
    let two = T::lit(2.0);
    let sgn = if y { one } else { -one };
    let root = (two * a[1] * (two * a[1] - one)).sqrt();
    let r = sgn * a[0] / root;
    let z = zeta_prime(r);
    let lead = one - two * a[1];
    let den = lead - z * (r + z);
    Ok([
        (a[0] * lead + sgn * z * root) / den - a[0],
        a[1] * lead / den - a[1],
    ])
}

/// ∫Φ(a + bx)φ(x)xᵖ dx for p = 0, 1, 2.
pub fn norm_phi_phi_identities<T: Real>(a: T, b: T) -> (T, T, T) {
    let s = (b * b + T::one()).sqrt();
    let z = a / s;
    let cdf = norm_cdf(z);
    let pdf = norm_pdf(z);
    (cdf, b / s * pdf, cdf - a * b * b / (s * s * s) * pdf)
}
