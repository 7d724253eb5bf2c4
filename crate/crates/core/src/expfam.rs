//! Exponential families in natural parameterization.
//!
//! | family | T(x) | natural parameter space |
//! |---|---|---|
//! | Normal | (x, x²) | η₂ < 0 |
//! | Multivariate Normal | (x, vec(xxᵀ)) | vec⁻¹(η₂) symmetric negative definite |
//! | Inverse-χ² | (log x, 1/x) | η₁ < −1, η₂ < 0 |
//! | Inverse Wishart | (log\|X\|, vec(X⁻¹)) | η₁ < −d, vec⁻¹(η₂) symmetric negative definite |
//! | Moon Rock | (x log x − log Γ(x), x) | η₁ ≥ 0, η₁ + η₂ < 0 |
//!
//! The multivariate second block is stored as the full column-major `vec`.

use crate::error::{Error, Result};
use crate::linalg::{cholesky, spd_inverse, Mat};
use crate::scalar::Real;
use crate::special::digamma;

pub use crate::special::{inv_logmdigamma, logmdigamma};

/// Relative asymmetry tolerated in matrices that should be symmetric.
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FamilyTag {
    UnivariateNormal,
    MultivariateNormal(usize),
    InverseChiSquared,
    InverseWishart(usize),
    MoonRock,
}

impl FamilyTag {
    /// Length of the natural parameter vector.
    pub fn eta_len(self) -> usize {
        match self {
            FamilyTag::UnivariateNormal | FamilyTag::InverseChiSquared | FamilyTag::MoonRock => 2,
            FamilyTag::MultivariateNormal(d) => d + d * d,
            FamilyTag::InverseWishart(d) => 1 + d * d,
        }
    }

    /// Dimension of the random variable (d for vector/matrix families).
    pub fn dim(self) -> usize {
        match self {
            FamilyTag::MultivariateNormal(d) | FamilyTag::InverseWishart(d) => d,
            _ => 1,
        }
    }

    pub fn is_valid(self) -> bool {
        !matches!(
            self,
            FamilyTag::MultivariateNormal(0) | FamilyTag::InverseWishart(0)
        )
    }

    /// True for the univariate and multivariate Normal families.
    pub fn is_normal(self) -> bool {
        matches!(
            self,
            FamilyTag::UnivariateNormal | FamilyTag::MultivariateNormal(_)
        )
    }
}

/// Natural parameter vector tagged with its family. May be improper.
#[derive(Clone, Debug, PartialEq)]
pub struct NatParam<T> {
    pub family: FamilyTag,
    pub eta: Vec<T>,
}

impl<T: Real> NatParam<T> {
    pub fn new(family: FamilyTag, eta: Vec<T>) -> Result<Self> {
        if !family.is_valid() {
            return Err(Error::Contract(format!("invalid family {family:?}")));
        }
        if eta.len() != family.eta_len() {
            return Err(Error::Contract(format!(
                "{family:?} needs {} natural parameters, got {}",
                family.eta_len(),
                eta.len()
            )));
        }
        Ok(NatParam { family, eta })
    }

    pub fn normal(eta1: T, eta2: T) -> Self {
        NatParam {
            family: FamilyTag::UnivariateNormal,
            eta: vec![eta1, eta2],
        }
    }

    pub fn inv_chisq(eta1: T, eta2: T) -> Self {
        NatParam {
            family: FamilyTag::InverseChiSquared,
            eta: vec![eta1, eta2],
        }
    }

    pub fn zeros(family: FamilyTag) -> Self {
        NatParam {
            family,
            eta: vec![T::zero(); family.eta_len()],
        }
    }

    /// The 2-vector of a univariate family.
    pub fn pair(&self) -> [T; 2] {
        [self.eta[0], self.eta[1]]
    }

    /// First block (η₁) of a Normal-type parameter.
    pub fn first_block(&self) -> &[T] {
        let d = self.family.dim();
        match self.family {
            FamilyTag::InverseWishart(_) => &self.eta[..1],
            _ => &self.eta[..d.min(self.eta.len())],
        }
    }

    /// Second block reshaped as a d×d matrix (Normal and Inverse Wishart).
    pub fn second_block(&self) -> Mat<T> {
        let d = self.family.dim();
        let start = self.eta.len() - d * d;
        Mat::from_col_major(d, d, self.eta[start..].to_vec())
            .expect("second block has d² entries")
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.family != other.family || self.eta.len() != other.eta.len() {
            return Err(Error::Contract(format!(
                "family mismatch: {:?} vs {:?}",
                self.family, other.family
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(NatParam {
            family: self.family,
            eta: self.eta.iter().zip(&other.eta).map(|(&a, &b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(NatParam {
            family: self.family,
            eta: self.eta.iter().zip(&other.eta).map(|(&a, &b)| a - b).collect(),
        })
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_same(other)?;
        for (a, &b) in self.eta.iter_mut().zip(&other.eta) {
            *a += b;
        }
        Ok(())
    }

    /// ∞-norm of the difference, or infinity on family mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        if self.check_same(other).is_err() {
            return T::infinity();
        }
        self.eta
            .iter()
            .zip(&other.eta)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.eta.iter().all(|v| v.is_finite())
    }

    pub fn is_proper(&self) -> bool {
        in_natural_domain(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CommonNormal<T> {
    pub mu: T,
    pub sigsq: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CommonMVN<T> {
    pub mu: Vec<T>,
    pub sigma: Mat<T>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CommonInvChiSq<T> {
    pub kappa: T,
    pub lambda: T,
}

/// Expected sufficient statistic E T(x).
#[derive(Clone, Debug, PartialEq)]
pub struct MomentVector<T> {
    pub family: FamilyTag,
    pub tau: Vec<T>,
}

impl<T: Real> MomentVector<T> {
    pub fn normal(tau1: T, tau2: T) -> Self {
        MomentVector {
            family: FamilyTag::UnivariateNormal,
            tau: vec![tau1, tau2],
        }
    }

    pub fn inv_chisq(tau1: T, tau2: T) -> Self {
        MomentVector {
            family: FamilyTag::InverseChiSquared,
            tau: vec![tau1, tau2],
        }
    }
}

fn expect_family<T>(p: &NatParam<T>, want: FamilyTag) -> Result<()> {
    if p.family != want || p.eta.len() != want.eta_len() {
        return Err(Error::Contract(format!(
            "expected {want:?}, got {:?}",
            p.family
        )));
    }
    Ok(())
}

fn expect_moment_family<T>(m: &MomentVector<T>, want: FamilyTag) -> Result<()> {
    if m.family != want || m.tau.len() != 2 {
        return Err(Error::Contract(format!(
            "expected {want:?} moments, got {:?}",
            m.family
        )));
    }
    Ok(())
}

pub fn normal_common_to_natural<T: Real>(c: CommonNormal<T>) -> Result<NatParam<T>> {
    if !(c.sigsq > T::zero()) || !c.sigsq.is_finite() || !c.mu.is_finite() {
        return Err(Error::Domain(format!(
            "Normal variance must be positive and finite, got {}",
            c.sigsq
        )));
    }
    Ok(NatParam::normal(c.mu / c.sigsq, -T::lit(0.5) / c.sigsq))
}

pub fn normal_natural_to_common<T: Real>(p: &NatParam<T>) -> Result<CommonNormal<T>> {
    expect_normal_like(p)?;
    let [e1, e2] = p.pair();
    if !(e2 < T::zero()) {
        return Err(Error::Domain(format!("Normal needs η₂ < 0, got {e2}")));
    }
    Ok(CommonNormal {
        mu: -e1 / (T::lit(2.0) * e2),
        sigsq: -T::lit(0.5) / e2,
    })
}

// A one-dimensional Multivariate Normal shares the univariate layout.
fn expect_normal_like<T>(p: &NatParam<T>) -> Result<()> {
    match p.family {
        FamilyTag::UnivariateNormal | FamilyTag::MultivariateNormal(1) if p.eta.len() == 2 => Ok(()),
        other => Err(Error::Contract(format!(
            "expected a univariate Normal, got {other:?}"
        ))),
    }
}

pub fn mvn_common_to_natural<T: Real>(c: &CommonMVN<T>) -> Result<NatParam<T>> {
    let d = c.mu.len();
    if d == 0 || c.sigma.rows() != d || c.sigma.cols() != d {
        return Err(Error::Contract("mean/covariance dimension mismatch".into()));
    }
    if !c.sigma.is_symmetric(T::lit(SYMMETRY_TOL)) {
        return Err(Error::Domain("covariance matrix is not symmetric".into()));
    }
    let prec = spd_inverse(&c.sigma)?;
    let mut eta = prec.matvec(&c.mu)?;
    eta.extend(prec.as_slice().iter().map(|&v| -T::lit(0.5) * v));
    NatParam::new(FamilyTag::MultivariateNormal(d), eta)
}

pub fn mvn_natural_to_common<T: Real>(p: &NatParam<T>) -> Result<CommonMVN<T>> {
    let d = match p.family {
        FamilyTag::MultivariateNormal(d) => d,
        FamilyTag::UnivariateNormal => 1,
        other => {
            return Err(Error::Contract(format!(
                "expected a Multivariate Normal, got {other:?}"
            )))
        }
    };
    let h = p.second_block();
    if !h.is_symmetric(T::lit(SYMMETRY_TOL)) {
        return Err(Error::Domain("second natural block is not symmetric".into()));
    }
    let prec = h.scale(-T::lit(2.0));
    let sigma = spd_inverse(&prec).map_err(|e| match e {
        Error::Numeric(msg) => Error::Domain(format!(
            "second natural block is not negative definite: {msg}"
        )),
        other => other,
    })?;
    let mu = sigma.matvec(&p.eta[..d])?;
    Ok(CommonMVN { mu, sigma })
}

pub fn invchisq_common_to_natural<T: Real>(c: CommonInvChiSq<T>) -> Result<NatParam<T>> {
    if !(c.kappa > T::zero() && c.lambda > T::zero()) {
        return Err(Error::Domain(format!(
            "Inverse-χ² needs κ > 0 and λ > 0, got ({}, {})",
            c.kappa, c.lambda
        )));
    }
    Ok(NatParam::inv_chisq(
        -T::lit(0.5) * c.kappa - T::one(),
        -T::lit(0.5) * c.lambda,
    ))
}

pub fn invchisq_natural_to_common<T: Real>(p: &NatParam<T>) -> Result<CommonInvChiSq<T>> {
    expect_family(p, FamilyTag::InverseChiSquared)?;
    if !in_natural_domain(p) {
        return Err(Error::Domain(format!(
            "improper Inverse-χ² parameter ({}, {})",
            p.eta[0], p.eta[1]
        )));
    }
    Ok(CommonInvChiSq {
        kappa: -T::lit(2.0) * p.eta[0] - T::lit(2.0),
        lambda: -T::lit(2.0) * p.eta[1],
    })
}

/// ∇A for the Normal family: (E x, E x²).
pub fn grad_a_normal<T: Real>(p: &NatParam<T>) -> Result<MomentVector<T>> {
    let c = normal_natural_to_common(p)?;
    Ok(MomentVector::normal(c.mu, c.sigsq + c.mu * c.mu))
}

/// (∇A)⁻¹ for the Normal family.
pub fn inv_grad_a_normal<T: Real>(m: &MomentVector<T>) -> Result<NatParam<T>> {
    expect_moment_family(m, FamilyTag::UnivariateNormal)?;
    let (t1, t2) = (m.tau[0], m.tau[1]);
    let var = t2 - t1 * t1;
    if !(var > T::zero()) || !var.is_finite() {
        return Err(Error::MomentDomain(format!(
            "Normal moments need τ₂ > τ₁², got ({t1}, {t2})"
        )));
    }
    normal_from_mean_var(t1, var)
}

/// Normal natural parameter from mean and variance, as used after moment
/// matching where the variance is available without cancellation.
pub fn normal_from_mean_var<T: Real>(mean: T, var: T) -> Result<NatParam<T>> {
    if !(var > T::zero()) || !var.is_finite() || !mean.is_finite() {
        return Err(Error::MomentDomain(format!(
            "variance must be positive and finite, got {var} (mean {mean})"
        )));
    }
    Ok(NatParam::normal(mean / var, -T::lit(0.5) / var))
}

/// ∇A for the Inverse-χ² family: (E log x, E 1/x).
pub fn grad_a_invchisq<T: Real>(p: &NatParam<T>) -> Result<MomentVector<T>> {
    expect_family(p, FamilyTag::InverseChiSquared)?;
    let [e1, e2] = p.pair();
    if !(e1 < -T::one() && e2 < T::zero()) {
        return Err(Error::Domain(format!(
            "Inverse-χ² needs η₁ < −1 and η₂ < 0, got ({e1}, {e2})"
        )));
    }
    Ok(MomentVector::inv_chisq(
        (-e2).ln() - digamma(-e1 - T::one()),
        (e1 + T::one()) / e2,
    ))
}

/// (∇A)⁻¹ for the Inverse-χ² family.
pub fn inv_grad_a_invchisq<T: Real>(m: &MomentVector<T>) -> Result<NatParam<T>> {
    expect_moment_family(m, FamilyTag::InverseChiSquared)?;
    let (t1, t2) = (m.tau[0], m.tau[1]);
    if !(t2 > T::zero()) {
        return Err(Error::MomentDomain(format!(
            "Inverse-χ² moments need τ₂ > e^(−τ₁), got ({t1}, {t2})"
        )));
    }
    invchisq_from_log_gap(t1 + t2.ln(), t2)
}

/// Inverse-χ² natural parameter from `y = τ₁ + log τ₂` (the Jensen gap of
/// log 1/x) and `τ₂ = E 1/x`.
pub fn invchisq_from_log_gap<T: Real>(gap: T, tau2: T) -> Result<NatParam<T>> {
    if !(gap > T::zero()) || !gap.is_finite() || !(tau2 > T::zero()) {
        return Err(Error::MomentDomain(format!(
            "Inverse-χ² moments need τ₁ + log τ₂ > 0, got {gap} (τ₂ = {tau2})"
        )));
    }
    let g = inv_logmdigamma(gap)?;
    Ok(NatParam::inv_chisq(-g - T::one(), -g / tau2))
}

/// Membership of η in the natural parameter space H of its family.
pub fn in_natural_domain<T: Real>(p: &NatParam<T>) -> bool {
    if p.eta.len() != p.family.eta_len() || !p.is_finite() {
        return false;
    }
    match p.family {
        FamilyTag::UnivariateNormal => p.eta[1] < T::zero(),
        FamilyTag::MultivariateNormal(_) => negative_definite(&p.second_block()),
        FamilyTag::InverseChiSquared => p.eta[0] < -T::one() && p.eta[1] < T::zero(),
        FamilyTag::InverseWishart(d) => {
            p.eta[0] < -T::lit(d as f64) && negative_definite(&p.second_block())
        }
        FamilyTag::MoonRock => p.eta[0] >= T::zero() && p.eta[0] + p.eta[1] < T::zero(),
    }
}

fn negative_definite<T: Real>(h: &Mat<T>) -> bool {
    h.is_symmetric(T::lit(SYMMETRY_TOL)) && cholesky(&h.scale(-T::one())).is_ok()
}

/// Membership of τ in the interior of the realizable set T.
pub fn in_moment_domain<T: Real>(m: &MomentVector<T>) -> bool {
    if m.tau.len() != 2 || !m.tau.iter().all(|v| v.is_finite()) {
        return false;
    }
    match m.family {
        FamilyTag::UnivariateNormal => m.tau[1] > m.tau[0] * m.tau[0],
        FamilyTag::InverseChiSquared => m.tau[1] > (-m.tau[0]).exp(),
        _ => false,
    }
}
