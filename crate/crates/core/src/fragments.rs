//! Fragment updates. Each maps the stochastic-node→factor messages of one
//! factor to its factor→stochastic-node messages, with damping `a ⟵ε b`
//! meaning `ε·a + (1−ε)·b`.

use crate::error::{Error, Result};
use crate::expfam::{FamilyTag, NatParam};
use crate::kernels::{g_ig1, g_ig3, g_n, h_logistic, h_poisson, h_probit};
use crate::linalg::{dot, spd_inverse, Lu, Mat};
use crate::quadrature::QuadConfig;
use crate::scalar::Real;

/// Per-factor constants.
#[derive(Clone, Debug, PartialEq)]
pub enum FragmentData<T> {
    GaussianPrior { mu: Vec<T>, sigma: Mat<T> },
    /// With d = 1 this is an Inverse-χ²(κ, Λ) prior.
    InverseWishartPrior { kappa: T, lambda: Mat<T> },
    /// σ² | a ~ Inverse-χ²(ν, ν/a); neighbours are (σ², a).
    IteratedInvChiSq { nu: T },
    /// δ(α − aᵀθ); neighbours are (α, θ).
    LinComb { a: Vec<T> },
    /// δ(𝛂 − Aᵀθ); neighbours are (𝛂, θ).
    MultLinComb { a: Mat<T> },
    /// N(y; α, σ²); neighbours are (α, σ²).
    GaussianLik { y: T },
    LogisticLik { y: bool },
    ProbitLik { y: bool },
    PoissonLik { y: u64 },
}

impl<T: Real> FragmentData<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            FragmentData::GaussianPrior { .. } => "gaussian_prior",
            FragmentData::InverseWishartPrior { .. } => "inverse_wishart_prior",
            FragmentData::IteratedInvChiSq { .. } => "iterated_inv_chisq",
            FragmentData::LinComb { .. } => "lin_comb",
            FragmentData::MultLinComb { .. } => "mult_lin_comb",
            FragmentData::GaussianLik { .. } => "gaussian_lik",
            FragmentData::LogisticLik { .. } => "logistic_lik",
            FragmentData::ProbitLik { .. } => "probit_lik",
            FragmentData::PoissonLik { .. } => "poisson_lik",
        }
    }

    /// Families of the neighbouring stochastic nodes, in slot order.
    pub fn signature(&self) -> Vec<FamilyTag> {
        use FamilyTag::*;
        match self {
            FragmentData::GaussianPrior { mu, .. } => vec![MultivariateNormal(mu.len())],
            FragmentData::InverseWishartPrior { lambda, .. } => {
                if lambda.rows() == 1 {
                    vec![InverseChiSquared]
                } else {
                    vec![InverseWishart(lambda.rows())]
                }
            }
            FragmentData::IteratedInvChiSq { .. } => vec![InverseChiSquared, InverseChiSquared],
            FragmentData::LinComb { a } => vec![UnivariateNormal, MultivariateNormal(a.len())],
            FragmentData::MultLinComb { a } => {
                vec![MultivariateNormal(a.cols()), MultivariateNormal(a.rows())]
            }
            FragmentData::GaussianLik { .. } => vec![UnivariateNormal, InverseChiSquared],
            FragmentData::LogisticLik { .. }
            | FragmentData::ProbitLik { .. }
            | FragmentData::PoissonLik { .. } => vec![UnivariateNormal],
        }
    }

    /// Prior fragments consume no messages and are never damped.
    pub fn is_prior(&self) -> bool {
        matches!(
            self,
            FragmentData::GaussianPrior { .. } | FragmentData::InverseWishartPrior { .. }
        )
    }

    /// Checks the invariants of the constants.
    pub fn validate(&self) -> Result<()> {
        match self {
            FragmentData::GaussianPrior { mu, sigma } => {
                if sigma.rows() != mu.len() || !sigma.is_square() {
                    return Err(Error::Contract(format!(
                        "Gaussian prior: μ has length {} but Σ is {}x{}",
                        mu.len(),
                        sigma.rows(),
                        sigma.cols()
                    )));
                }
                gaussian_prior_update(mu, sigma).map(|_| ())
            }
            FragmentData::InverseWishartPrior { kappa, lambda } => {
                inverse_wishart_prior_update(*kappa, lambda).map(|_| ())
            }
            FragmentData::IteratedInvChiSq { nu } => check_nu(*nu),
            FragmentData::LinComb { a } => {
                if a.is_empty() || !a.iter().all(|v| v.is_finite()) {
                    return Err(Error::Contract("lin-comb vector must be non-empty and finite".into()));
                }
                Ok(())
            }
            FragmentData::MultLinComb { a } => {
                if a.rows() == 0 || a.cols() == 0 || !a.as_slice().iter().all(|v| v.is_finite()) {
                    return Err(Error::Contract("lin-comb matrix must be non-empty and finite".into()));
                }
                Ok(())
            }
            FragmentData::GaussianLik { y } => {
                if !y.is_finite() {
                    return Err(Error::Contract(format!("Gaussian response must be finite, got {y}")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Undamped (ε = 0) outgoing messages.
    pub fn compute(&self, incoming: &[NatParam<T>], cfg: &QuadConfig<T>) -> Result<Vec<NatParam<T>>> {
        let sig = if self.is_prior() { Vec::new() } else { self.signature() };
        if incoming.len() != sig.len() {
            return Err(Error::Contract(format!(
                "{} expects {} incoming messages, got {}",
                self.kind(),
                sig.len(),
                incoming.len()
            )));
        }
        for (m, fam) in incoming.iter().zip(&sig) {
            if m.family != *fam || m.eta.len() != fam.eta_len() {
                return Err(Error::Contract(format!(
                    "{} expects a {fam:?} message, got {:?}",
                    self.kind(),
                    m.family
                )));
            }
        }
        match self {
            FragmentData::GaussianPrior { mu, sigma } => Ok(vec![gaussian_prior_update(mu, sigma)?]),
            FragmentData::InverseWishartPrior { kappa, lambda } => {
                Ok(vec![inverse_wishart_prior_update(*kappa, lambda)?])
            }
            FragmentData::IteratedInvChiSq { nu } => {
                let (s, a) = iter_invchisq_messages(*nu, &incoming[0], &incoming[1], cfg)?;
                Ok(vec![s, a])
            }
            FragmentData::LinComb { a } => {
                let (x, t) = lin_comb_messages(a, &incoming[0], &incoming[1])?;
                Ok(vec![x, t])
            }
            FragmentData::MultLinComb { a } => {
                let (x, t) = mult_lin_comb_messages(a, &incoming[0], &incoming[1])?;
                Ok(vec![x, t])
            }
            FragmentData::GaussianLik { y } => {
                let (x, s) = gaussian_lik_messages(*y, &incoming[0], &incoming[1], cfg)?;
                Ok(vec![x, s])
            }
            FragmentData::LogisticLik { y } => {
                let h = h_logistic(incoming[0].pair(), bool_to(*y), cfg)?;
                Ok(vec![NatParam::normal(h[0], h[1])])
            }
            FragmentData::ProbitLik { y } => {
                let h = h_probit(incoming[0].pair(), *y)?;
                Ok(vec![NatParam::normal(h[0], h[1])])
            }
            FragmentData::PoissonLik { y } => {
                let h = h_poisson(incoming[0].pair(), T::lit(*y as f64), cfg)?;
                Ok(vec![NatParam::normal(h[0], h[1])])
            }
        }
    }

    /// Damped outgoing messages: `old ⟵ε compute(incoming)`.
    pub fn update(
        &self,
        incoming: &[NatParam<T>],
        old: &[NatParam<T>],
        eps: T,
        cfg: &QuadConfig<T>,
    ) -> Result<Vec<NatParam<T>>> {
        check_eps(eps)?;
        let fresh = self.compute(incoming, cfg)?;
        if old.len() != fresh.len() {
            return Err(Error::Contract(format!(
                "{} produces {} messages but {} old messages were given",
                self.kind(),
                fresh.len(),
                old.len()
            )));
        }
        old.iter().zip(fresh).map(|(o, n)| damp(o, &n, eps)).collect()
    }
}

fn bool_to<T: Real>(y: bool) -> T {
    if y {
        T::one()
    } else {
        T::zero()
    }
}

fn check_eps<T: Real>(eps: T) -> Result<()> {
    if !(eps >= T::zero() && eps < T::one()) {
        return Err(Error::Contract(format!("damping ε must lie in [0, 1), got {eps}")));
    }
    Ok(())
}

fn check_nu<T: Real>(nu: T) -> Result<()> {
    if !(nu > T::zero()) || !nu.is_finite() {
        return Err(Error::Domain(format!("ν must be positive, got {nu}")));
    }
    Ok(())
}

/// `ε·old + (1−ε)·new`. Returns `new` untouched when ε = 0, and components
/// where `old` already equals `new` are copied rather than recombined.
pub fn damp<T: Real>(old: &NatParam<T>, new: &NatParam<T>, eps: T) -> Result<NatParam<T>> {
    if old.family != new.family || old.eta.len() != new.eta.len() {
        return Err(Error::Contract(format!(
            "cannot damp {:?} towards {:?}",
            old.family, new.family
        )));
    }
    check_eps(eps)?;
    if eps == T::zero() {
        return Ok(new.clone());
    }
    let keep = T::one() - eps;
    Ok(NatParam {
        family: new.family,
        eta: old.eta.iter().zip(&new.eta).map(|(&o, &n)| if o == n { n } else { eps * o + keep * n }).collect(),
    })
}

fn damp_pair<T: Real>(
    fresh: (NatParam<T>, NatParam<T>),
    old: Option<(&NatParam<T>, &NatParam<T>)>,
    eps: T,
) -> Result<(NatParam<T>, NatParam<T>)> {
    match old {
        None => Ok(fresh),
        Some((o0, o1)) => Ok((damp(o0, &fresh.0, eps)?, damp(o1, &fresh.1, eps)?)),
    }
}

/// `[Σ⁻¹μ; −½vec(Σ⁻¹)]`.
pub fn gaussian_prior_update<T: Real>(mu: &[T], sigma: &Mat<T>) -> Result<NatParam<T>> {
    if sigma.rows() != mu.len() || !sigma.is_square() {
        return Err(Error::Contract("Gaussian prior dimensions disagree".into()));
    }
    let prec = spd_inverse(sigma)?;
    let mut eta = prec.matvec(mu)?;
    eta.extend(prec.scale(-T::lit(0.5)).into_vec());
    NatParam::new(FamilyTag::MultivariateNormal(mu.len()), eta)
}

/// `[−½(κ + d + 1); −½vec(Λ)]`; tagged Inverse-χ² when d = 1.
pub fn inverse_wishart_prior_update<T: Real>(kappa: T, lambda: &Mat<T>) -> Result<NatParam<T>> {
    let d = lambda.rows();
    if d == 0 || !lambda.is_square() {
        return Err(Error::Contract("Inverse Wishart Λ must be square and non-empty".into()));
    }
    let dm1 = T::lit(d as f64 - 1.0);
    if !(kappa > dm1) || !kappa.is_finite() {
        return Err(Error::Domain(format!(
            "Inverse Wishart prior needs κ > d − 1 = {dm1}, got {kappa}"
        )));
    }
    // Positive definiteness check.
    spd_inverse(lambda)?;
    let half = T::lit(0.5);
    let mut eta = vec![-half * (kappa + T::lit(d as f64 + 1.0))];
    eta.extend(lambda.scale(-half).into_vec());
    let fam = if d == 1 {
        FamilyTag::InverseChiSquared
    } else {
        FamilyTag::InverseWishart(d)
    };
    NatParam::new(fam, eta)
}

fn iter_invchisq_messages<T: Real>(
    nu: T,
    in_sigsq: &NatParam<T>,
    in_a: &NatParam<T>,
    cfg: &QuadConfig<T>,
) -> Result<(NatParam<T>, NatParam<T>)> {
    check_nu(nu)?;
    let two = T::lit(2.0);
    let s = in_sigsq.pair();
    // The kernels use the auxiliary variable a′ = 2a, for which the factor's
    // scale is 2ν/a′; a message (c₁, c₂) on a reads (c₁, 2c₂) on a′.
    let a = in_a.pair();
    let a_prime = [a[0], two * a[1]];
    let to_s = g_ig3(s, a_prime, nu + two, nu, cfg)?;
    let to_a = g_ig3(a_prime, s, nu, nu, cfg)?;
    Ok((
        NatParam::inv_chisq(to_s[0], to_s[1]),
        NatParam::inv_chisq(to_a[0], to_a[1] / two),
    ))
}

/// Iterated Inverse-χ² fragment: (to σ², to a).
pub fn iter_invchisq_update<T: Real>(
    nu: T,
    in_sigsq: &NatParam<T>,
    in_a: &NatParam<T>,
    old: Option<(&NatParam<T>, &NatParam<T>)>,
    eps: T,
    cfg: &QuadConfig<T>,
) -> Result<(NatParam<T>, NatParam<T>)> {
    check_eps(eps)?;
    damp_pair(iter_invchisq_messages(nu, in_sigsq, in_a, cfg)?, old, eps)
}

fn lin_comb_messages<T: Real>(
    a: &[T],
    in_alpha: &NatParam<T>,
    in_theta: &NatParam<T>,
) -> Result<(NatParam<T>, NatParam<T>)> {
    let d = a.len();
    if in_theta.family.dim() != d || in_alpha.eta.len() != 2 {
        return Err(Error::Contract(format!(
            "lin-comb of length {d} received a {:?} θ-message",
            in_theta.family
        )));
    }
    let lu = Lu::new(&in_theta.second_block())?;
    let omega = lu.solve_vec(a);
    let s = dot(&omega, a);
    if s == T::zero() || !s.is_finite() {
        return Err(Error::Numeric(format!("lin-comb: ωᵀa = {s}")));
    }
    let inv = T::one() / s;
    let to_alpha = NatParam::normal(inv * dot(&omega, in_theta.first_block()), inv);

    let [c1, c2] = in_alpha.pair();
    let mut eta: Vec<T> = a.iter().map(|&ai| ai * c1).collect();
    eta.reserve(d * d);
    for j in 0..d {
        for i in 0..d {
            eta.push(a[i.min(j)] * c2 * a[i.max(j)]);
        }
    }
    let to_theta = NatParam {
        family: in_theta.family,
        eta,
    };
    Ok((to_alpha, to_theta))
}

/// Linear-combination fragment δ(α − aᵀθ): (to α, to θ).
pub fn lin_comb_update<T: Real>(
    a: &[T],
    in_alpha: &NatParam<T>,
    in_theta: &NatParam<T>,
    old: Option<(&NatParam<T>, &NatParam<T>)>,
    eps: T,
) -> Result<(NatParam<T>, NatParam<T>)> {
    check_eps(eps)?;
    damp_pair(lin_comb_messages(a, in_alpha, in_theta)?, old, eps)
}

fn mult_lin_comb_messages<T: Real>(
    a: &Mat<T>,
    in_alpha: &NatParam<T>,
    in_theta: &NatParam<T>,
) -> Result<(NatParam<T>, NatParam<T>)> {
    let (d, dp) = (a.rows(), a.cols());
    if in_theta.family.dim() != d || in_alpha.family.dim() != dp {
        return Err(Error::Contract(format!(
            "multivariate lin-comb with a {d}x{dp} matrix received {:?} and {:?}",
            in_alpha.family, in_theta.family
        )));
    }
    let omega = Lu::new(&in_theta.second_block())?.solve(a);
    let gram = omega.transpose().matmul(a)?;
    let gram_inv = Lu::new(&gram)?.inverse();
    let proj = omega.transpose().matvec(in_theta.first_block())?;
    let mut eta = gram_inv.matvec(&proj)?;
    eta.extend(gram_inv.symmetrize().into_vec());
    let to_alpha = NatParam {
        family: in_alpha.family,
        eta,
    };

    let h = in_alpha.second_block();
    let mut eta = a.matvec(in_alpha.first_block())?;
    eta.extend(a.matmul(&h)?.matmul(&a.transpose())?.mirror_upper().into_vec());
    let to_theta = NatParam {
        family: in_theta.family,
        eta,
    };
    Ok((to_alpha, to_theta))
}

/// Multivariate linear-combination fragment δ(𝛂 − Aᵀθ): (to 𝛂, to θ).
pub fn mult_lin_comb_update<T: Real>(
    a: &Mat<T>,
    in_alpha: &NatParam<T>,
    in_theta: &NatParam<T>,
    old: Option<(&NatParam<T>, &NatParam<T>)>,
    eps: T,
) -> Result<(NatParam<T>, NatParam<T>)> {
    check_eps(eps)?;
    damp_pair(mult_lin_comb_messages(a, in_alpha, in_theta)?, old, eps)
}

fn gaussian_lik_messages<T: Real>(
    y: T,
    in_alpha: &NatParam<T>,
    in_sigsq: &NatParam<T>,
    cfg: &QuadConfig<T>,
) -> Result<(NatParam<T>, NatParam<T>)> {
    let c = [T::one(), y, y * y];
    let x = in_alpha.pair();
    let s = in_sigsq.pair();
    let to_alpha = g_n(x, s, c, cfg)?;
    let to_sigsq = g_ig1(s, x, c, cfg)?;
    Ok((
        NatParam::normal(to_alpha[0], to_alpha[1]),
        NatParam::inv_chisq(to_sigsq[0], to_sigsq[1]),
    ))
}

/// Gaussian likelihood fragment N(y; α, σ²): (to α, to σ²).
pub fn gaussian_lik_update<T: Real>(
    y: T,
    in_alpha: &NatParam<T>,
    in_sigsq: &NatParam<T>,
    old: Option<(&NatParam<T>, &NatParam<T>)>,
    eps: T,
    cfg: &QuadConfig<T>,
) -> Result<(NatParam<T>, NatParam<T>)> {
    check_eps(eps)?;
    damp_pair(gaussian_lik_messages(y, in_alpha, in_sigsq, cfg)?, old, eps)
}

fn damp_single<T: Real>(fresh: [T; 2], old: Option<&NatParam<T>>, eps: T) -> Result<NatParam<T>> {
    check_eps(eps)?;
    let fresh = NatParam::normal(fresh[0], fresh[1]);
    match old {
        None => Ok(fresh),
        Some(o) => damp(o, &fresh, eps),
    }
}

pub fn logistic_update<T: Real>(
    y: bool,
    in_alpha: &NatParam<T>,
    old: Option<&NatParam<T>>,
    eps: T,
    cfg: &QuadConfig<T>,
) -> Result<NatParam<T>> {
    damp_single(h_logistic(in_alpha.pair(), bool_to(y), cfg)?, old, eps)
}

pub fn probit_update<T: Real>(
    y: bool,
    in_alpha: &NatParam<T>,
    old: Option<&NatParam<T>>,
    eps: T,
) -> Result<NatParam<T>> {
    damp_single(h_probit(in_alpha.pair(), y)?, old, eps)
}

pub fn poisson_update<T: Real>(
    y: u64,
    in_alpha: &NatParam<T>,
    old: Option<&NatParam<T>>,
    eps: T,
    cfg: &QuadConfig<T>,
) -> Result<NatParam<T>> {
    damp_single(h_poisson(in_alpha.pair(), T::lit(y as f64), cfg)?, old, eps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mvn(eta: Vec<f64>) -> NatParam<f64> {
        let d = ((4 * eta.len() + 1) as f64).sqrt() as usize / 2;
        NatParam::new(FamilyTag::MultivariateNormal(d), eta).unwrap()
    }

    #[test]
    fn damping_examples() {
        let old = NatParam::normal(2.0, -1.0);
        let new = NatParam::normal(0.0, -3.0);
        assert_eq!(damp(&old, &new, 0.0).unwrap(), new);
        assert_eq!(damp(&old, &new, 0.5).unwrap().eta, vec![1.0, -2.0]);
        assert!(matches!(
            damp(&old, &NatParam::inv_chisq(-2.0, -1.0), 0.5),
            Err(Error::Contract(_))
        ));
        assert!(damp(&old, &new, 1.0).is_err());
    }

    #[test]
    fn gaussian_prior_examples() {
        let p = gaussian_prior_update(&[0.0, 0.0], &Mat::identity(2)).unwrap();
        assert_eq!(p.eta, vec![0.0, 0.0, -0.5, 0.0, 0.0, -0.5]);
        let p = gaussian_prior_update(&[1.0], &Mat::diag(&[2.0])).unwrap();
        assert_eq!(p.eta, vec![0.5, -0.25]);
        assert!(matches!(
            gaussian_prior_update(&[0.0, 0.0], &Mat::diag(&[1.0, 0.0])),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn inverse_wishart_prior_examples() {
        let p = inverse_wishart_prior_update(1.0, &Mat::diag(&[1.0])).unwrap();
        assert_eq!(p.family, FamilyTag::InverseChiSquared);
        assert_eq!(p.eta, vec![-1.5, -0.5]);
        let p = inverse_wishart_prior_update(4.0, &Mat::identity(2)).unwrap();
        assert_eq!(p.eta, vec![-3.5, -0.5, 0.0, 0.0, -0.5]);
        assert!(matches!(
            inverse_wishart_prior_update(0.0, &Mat::<f64>::identity(2)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn lin_comb_examples() {
        let std = mvn(vec![0.0, 0.0, -0.5, 0.0, 0.0, -0.5]);
        let alpha = NatParam::normal(0.3, -0.7);
        let (to_a, _) = lin_comb_update(&[1.0, 0.0], &alpha, &std, None, 0.0).unwrap();
        assert_eq!(to_a.eta, vec![0.0, -0.5]);
        let shifted = mvn(vec![1.0, 0.0, -0.5, 0.0, 0.0, -0.5]);
        let (to_a, to_t) = lin_comb_update(&[1.0, 0.0], &alpha, &shifted, None, 0.0).unwrap();
        assert_eq!(to_a.eta, vec![1.0, -0.5]);
        assert_eq!(to_t.eta, vec![0.3, 0.0, -0.7, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn mult_lin_comb_identity_is_passthrough() {
        let theta = mvn(vec![0.4, -1.0, -0.8, 0.1, 0.1, -0.6]);
        let alpha = mvn(vec![0.0, 0.0, -0.5, 0.0, 0.0, -0.5]);
        let (to_a, to_t) = mult_lin_comb_update(&Mat::identity(2), &alpha, &theta, None, 0.0).unwrap();
        assert!(to_a.max_abs_diff(&theta) < 1e-14);
        assert!(to_t.max_abs_diff(&alpha) < 1e-15);
    }

    #[test]
    fn probit_fragment_example() {
        let out = probit_update(true, &NatParam::normal(0.0f64, -0.5), None, 0.0).unwrap();
        assert!((out.eta[0] - 0.8276).abs() < 1e-3 && (out.eta[1] + 0.2335).abs() < 1e-3);
    }

    #[test]
    fn signature_mismatch_is_contract_error() {
        let f = FragmentData::GaussianLik { y: 0.0 };
        let msgs = vec![NatParam::normal(0.0, -0.5), NatParam::normal(0.0, -0.5)];
        assert!(matches!(
            f.compute(&msgs, &QuadConfig::default()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn iterated_rejects_nonpositive_nu() {
        let m = NatParam::inv_chisq(-2.0, -1.0);
        assert!(matches!(
            iter_invchisq_update(0.0, &m, &m, None, 0.0, &QuadConfig::default()),
            Err(Error::Domain(_))
        ));
    }
}
