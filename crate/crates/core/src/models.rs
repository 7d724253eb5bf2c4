//! Graph builders for the Bayesian linear model and for Gaussian, logistic,
//! probit and Poisson mixed models with a random intercept and a penalised
//! spline, plus predictor standardization.

use crate::error::{Error, Result};
use crate::expfam::{
    invchisq_natural_to_common, mvn_common_to_natural, mvn_natural_to_common, normal_natural_to_common, CommonMVN,
    FamilyTag, NatParam,
};
use crate::fragments::FragmentData;
use crate::graph::{FactorGraph, FitResult, NodeId};
use crate::linalg::Mat;

/// Prior degrees of freedom used to pin a variance at a known value.
pub const SHARP_KAPPA: f64 = 1e7;

/// Named numeric columns of equal length.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Contract("one name per column is required".into()));
        }
        let n = columns.first().map_or(0, Vec::len);
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::Contract(format!("column {name} has {} rows, expected {n}", col.len())));
            }
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::Contract(format!("duplicate column {name}")));
            }
        }
        Ok(Dataset { names, columns })
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        let i = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Contract(format!("missing column `{name}`")))?;
        let col = &self.columns[i];
        if let Some(r) = col.iter().position(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("column `{name}` has a missing value in row {}", r + 1)));
        }
        Ok(col)
    }

    fn replace(&mut self, name: &str, values: Vec<f64>) {
        if let Some(i) = self.names.iter().position(|n| n == name) {
            self.columns[i] = values;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Likelihood {
    Gaussian,
    Logistic,
    Probit,
    Poisson,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplineSpec {
    pub column: String,
    pub knots: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Priors {
    /// Defaults to zero.
    pub mu_beta: Option<Vec<f64>>,
    /// Defaults to 10¹⁰·I.
    pub sigma_beta: Option<Mat<f64>>,
    pub a_grp: f64,
    pub a_spl: f64,
    pub a_eps: f64,
    pub nu: f64,
    /// Gaussian likelihood only: pin σ²_ε at this value instead of giving it
    /// a Half-t prior. The node gets a sharp Inverse-χ² prior and is held
    /// fixed during the iteration.
    pub known_variance: Option<f64>,
}

impl Default for Priors {
    fn default() -> Self {
        Priors {
            mu_beta: None,
            sigma_beta: None,
            a_grp: 1e5,
            a_spl: 1e5,
            a_eps: 1e5,
            nu: 1.0,
            known_variance: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub likelihood: Likelihood,
    pub response: String,
    pub fixed_effects: Vec<String>,
    pub intercept: bool,
    pub group: Option<String>,
    pub spline: Option<SplineSpec>,
    pub priors: Priors,
    pub standardize: bool,
}

impl ModelSpec {
    pub fn new(likelihood: Likelihood, response: impl Into<String>) -> Self {
        ModelSpec {
            likelihood,
            response: response.into(),
            fixed_effects: Vec::new(),
            intercept: true,
            group: None,
            spline: None,
            priors: Priors::default(),
            standardize: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.priors;
        for (name, v) in [("A_grp", p.a_grp), ("A_spl", p.a_spl), ("A_eps", p.a_eps), ("nu", p.nu)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Contract(format!("prior {name} must be positive, got {v}")));
            }
        }
        if let Some(s) = &self.spline {
            if s.knots < 2 {
                return Err(Error::Contract(format!("spline needs at least 2 knots, got {}", s.knots)));
            }
        }
        if let Some(v) = p.known_variance {
            if self.likelihood != Likelihood::Gaussian {
                return Err(Error::Contract("known_variance applies only to the Gaussian likelihood".into()));
            }
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Contract(format!("known_variance must be positive, got {v}")));
            }
        }
        if self.fixed_effects.is_empty() && !self.intercept {
            return Err(Error::Contract("the model needs at least one fixed effect or an intercept".into()));
        }
        Ok(())
    }
}

/// X, Z = [Z_grp Z_spl] and C = [X Z].
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrices {
    pub x: Mat<f64>,
    pub z_grp: Mat<f64>,
    pub z_spl: Mat<f64>,
    pub c: Mat<f64>,
    pub knots: Vec<f64>,
    /// Distinct group labels in increasing order; column i of Z_grp is group i.
    pub group_levels: Vec<f64>,
    pub fixed_names: Vec<String>,
    pub spline_column: Option<String>,
}

impl DesignMatrices {
    pub fn d_beta(&self) -> usize {
        self.x.cols()
    }

    pub fn n_ranef(&self) -> usize {
        self.z_grp.cols() + self.z_spl.cols()
    }

    pub fn dim(&self) -> usize {
        self.c.cols()
    }

    /// Row ℓ of C.
    pub fn c_row(&self, l: usize) -> Vec<f64> {
        self.c.row(l)
    }

    /// E_dβ: the dβ×dβ identity on top of zeros.
    pub fn e_dbeta(&self) -> Mat<f64> {
        let mut e = Mat::zeros(self.dim(), self.d_beta());
        for i in 0..self.d_beta() {
            e[(i, i)] = 1.0;
        }
        e
    }

    /// e_r: the r-th coordinate vector of the stacked (β, u).
    pub fn e_r(&self, r: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.dim()];
        e[r] = 1.0;
        e
    }
}

/// Truncated-line basis `z_k(x) = max(x − κ_k, 0)` with κ_k at the k/(K+1)
/// sample quantiles.
pub fn spline_basis(x: &[f64], k: usize) -> Result<(Mat<f64>, Vec<f64>)> {
    if k < 2 {
        return Err(Error::Contract(format!("spline needs at least 2 knots, got {k}")));
    }
    let mut sorted: Vec<f64> = x.to_vec();
    if sorted.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("spline predictor has non-finite values".into()));
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < k + 2 {
        return Err(Error::Contract(format!(
            "{k} knots need at least {} distinct predictor values, got {}",
            k + 2,
            distinct.len()
        )));
    }
    let n = sorted.len();
    let knots: Vec<f64> = (1..=k)
        .map(|j| {
            let pos = (n - 1) as f64 * j as f64 / (k + 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        })
        .collect();
    let mut z = Mat::zeros(x.len(), k);
    for (i, &xi) in x.iter().enumerate() {
        for (j, &kj) in knots.iter().enumerate() {
            z[(i, j)] = (xi - kj).max(0.0);
        }
    }
    Ok((z, knots))
}

pub fn design_matrices(spec: &ModelSpec, data: &Dataset) -> Result<DesignMatrices> {
    let n = data.n_rows();
    if n == 0 {
        return Err(Error::Contract("the dataset has no rows".into()));
    }
    let mut fixed_names = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    if spec.intercept {
        fixed_names.push("(intercept)".to_string());
        cols.push(vec![1.0; n]);
    }
    for name in &spec.fixed_effects {
        cols.push(data.column(name)?.to_vec());
        fixed_names.push(name.clone());
    }
    let x = Mat::from_col_major(n, cols.len(), cols.concat())?;

    let (z_grp, group_levels) = match &spec.group {
        Some(g) => {
            let labels = data.column(g)?;
            let mut levels = labels.to_vec();
            levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
            levels.dedup();
            let mut z = Mat::zeros(n, levels.len());
            for (i, v) in labels.iter().enumerate() {
                let j = levels.iter().position(|l| l == v).unwrap();
                z[(i, j)] = 1.0;
            }
            (z, levels)
        }
        None => (Mat::zeros(n, 0), Vec::new()),
    };
    let (z_spl, knots) = match &spec.spline {
        Some(s) => spline_basis(data.column(&s.column)?, s.knots)?,
        None => (Mat::zeros(n, 0), Vec::new()),
    };
    let mut c = x.as_slice().to_vec();
    c.extend_from_slice(z_grp.as_slice());
    c.extend_from_slice(z_spl.as_slice());
    let width = x.cols() + z_grp.cols() + z_spl.cols();
    let c = Mat::from_col_major(n, width, c)?;
    Ok(DesignMatrices {
        x,
        z_grp,
        z_spl,
        c,
        knots,
        group_levels,
        fixed_names,
        spline_column: spec.spline.as_ref().map(|s| s.column.clone()),
    })
}

fn inv_chisq_prior(a: f64) -> FragmentData<f64> {
    FragmentData::InverseWishartPrior {
        kappa: 1.0,
        lambda: Mat::diag(&[1.0 / (a * a)]),
    }
}

/// Adds σ², a, the iterated factor and the prior on a; returns (σ², a).
fn add_variance_chain(g: &mut FactorGraph<f64>, tag: &str, nu: f64, a_scale: f64) -> Result<(NodeId, NodeId)> {
    let s = g.add_node(format!("sigsq_{tag}"), FamilyTag::InverseChiSquared)?;
    let a = g.add_node(format!("a_{tag}"), FamilyTag::InverseChiSquared)?;
    g.add_factor(format!("p(sigsq_{tag}|a_{tag})"), FragmentData::IteratedInvChiSq { nu }, &[s, a])?;
    g.add_factor(format!("p(a_{tag})"), inv_chisq_prior(a_scale), &[a])?;
    Ok((s, a))
}

/// The Bayesian linear model with derived variables αᵢ = xᵢᵀβ.
#[derive(Clone, Debug)]
pub struct LinearModel {
    pub graph: FactorGraph<f64>,
    pub beta: NodeId,
    pub alphas: Vec<NodeId>,
    pub sigsq: NodeId,
    pub aux: NodeId,
}

/// y ~ N(Xβ, σ²I), β ~ N(0, σ²_β I), σ ~ Half-Cauchy(A) through the
/// auxiliary variable a.
pub fn build_linear_model(x: &Mat<f64>, y: &[f64], sigsq_beta: f64, a: f64) -> Result<LinearModel> {
    let (n, p) = (x.rows(), x.cols());
    if n == 0 {
        return Err(Error::Contract("the linear model needs at least one observation".into()));
    }
    if y.len() != n {
        return Err(Error::Contract(format!("X has {n} rows but y has {} entries", y.len())));
    }
    if p == 0 {
        return Err(Error::Contract("X has no columns".into()));
    }
    if !(sigsq_beta > 0.0) || !(a > 0.0) {
        return Err(Error::Contract("σ²_β and A must be positive".into()));
    }
    let mut g = FactorGraph::new();
    let beta = g.add_node("beta", FamilyTag::MultivariateNormal(p))?;
    let alphas = (0..n)
        .map(|i| g.add_node(format!("alpha[{i}]"), FamilyTag::UnivariateNormal))
        .collect::<Result<Vec<_>>>()?;
    let sigsq = g.add_node("sigsq", FamilyTag::InverseChiSquared)?;
    let aux = g.add_node("a", FamilyTag::InverseChiSquared)?;
    g.add_factor(
        "p(beta)",
        FragmentData::GaussianPrior {
            mu: vec![0.0; p],
            sigma: Mat::identity(p).scale(sigsq_beta),
        },
        &[beta],
    )?;
    for (i, &al) in alphas.iter().enumerate() {
        g.add_factor(format!("delta(alpha[{i}])"), FragmentData::LinComb { a: x.row(i) }, &[al, beta])?;
    }
    for (i, &al) in alphas.iter().enumerate() {
        g.add_factor(format!("p(y[{i}]|alpha[{i}],sigsq)"), FragmentData::GaussianLik { y: y[i] }, &[al, sigsq])?;
    }
    g.add_factor("p(sigsq|a)", FragmentData::IteratedInvChiSq { nu: 1.0 }, &[sigsq, aux])?;
    g.add_factor("p(a)", inv_chisq_prior(a), &[aux])?;
    Ok(LinearModel {
        graph: g,
        beta,
        alphas,
        sigsq,
        aux,
    })
}

/// A mixed-model graph together with the roles of its nodes.
#[derive(Clone, Debug)]
pub struct GlmmModel {
    pub graph: FactorGraph<f64>,
    pub design: DesignMatrices,
    pub likelihood: Likelihood,
    /// β̃, the fixed effects alone.
    pub beta: NodeId,
    /// The stacked (β, u_grp, u_spl).
    pub theta: NodeId,
    pub linear_predictors: Vec<NodeId>,
    pub ranef: Vec<NodeId>,
    pub sigsq_grp: Option<(NodeId, NodeId)>,
    pub sigsq_spl: Option<(NodeId, NodeId)>,
    /// Residual variance; the auxiliary node is absent when the variance is known.
    pub sigsq_eps: Option<(NodeId, Option<NodeId>)>,
}

fn check_response(lik: Likelihood, name: &str, y: &[f64]) -> Result<()> {
    for (i, &v) in y.iter().enumerate() {
        let ok = match lik {
            Likelihood::Gaussian => v.is_finite(),
            Likelihood::Logistic | Likelihood::Probit => v == 0.0 || v == 1.0,
            Likelihood::Poisson => v >= 0.0 && v == v.floor() && v < 9.0e15,
        };
        if !ok {
            return Err(Error::Contract(format!(
                "response `{name}` row {}: {v} is outside the support of the {lik:?} likelihood",
                i + 1
            )));
        }
    }
    Ok(())
}

pub fn build_glmm(spec: &ModelSpec, data: &Dataset) -> Result<GlmmModel> {
    spec.validate()?;
    let y = data.column(&spec.response)?;
    check_response(spec.likelihood, &spec.response, y)?;
    let design = design_matrices(spec, data)?;
    let (n, db, d) = (data.n_rows(), design.d_beta(), design.dim());
    let m = design.z_grp.cols();
    let k = design.z_spl.cols();

    let mu = spec.priors.mu_beta.clone().unwrap_or_else(|| vec![0.0; db]);
    let sigma = spec.priors.sigma_beta.clone().unwrap_or_else(|| Mat::identity(db).scale(1e10));
    if mu.len() != db || sigma.rows() != db {
        return Err(Error::Contract(format!(
            "prior on β has dimension {} but the model has {db} fixed effects",
            mu.len()
        )));
    }

    let mut g = FactorGraph::new();
    let beta = g.add_node("beta", FamilyTag::MultivariateNormal(db))?;
    let theta = g.add_node("theta", FamilyTag::MultivariateNormal(d))?;
    g.add_factor("p(beta)", FragmentData::GaussianPrior { mu, sigma }, &[beta])?;
    g.add_factor("delta(beta)", FragmentData::MultLinComb { a: design.e_dbeta() }, &[beta, theta])?;

    let sigsq_eps = if spec.likelihood == Likelihood::Gaussian {
        Some(match spec.priors.known_variance {
            Some(v) => {
                let s = g.add_node("sigsq_eps", FamilyTag::InverseChiSquared)?;
                g.add_factor(
                    "p(sigsq_eps)",
                    FragmentData::InverseWishartPrior {
                        kappa: SHARP_KAPPA,
                        lambda: Mat::diag(&[SHARP_KAPPA * v]),
                    },
                    &[s],
                )?;
                g.fix_node(s)?;
                (s, None)
            }
            None => {
                let (s, a) = add_variance_chain(&mut g, "eps", spec.priors.nu, spec.priors.a_eps)?;
                (s, Some(a))
            }
        })
    } else {
        None
    };

    let mut linear_predictors = Vec::with_capacity(n);
    for (l, &yl) in y.iter().enumerate() {
        let al = g.add_node(format!("alpha[{l}]"), FamilyTag::UnivariateNormal)?;
        g.add_factor(format!("delta(alpha[{l}])"), FragmentData::LinComb { a: design.c_row(l) }, &[al, theta])?;
        let lik = match spec.likelihood {
            Likelihood::Gaussian => FragmentData::GaussianLik { y: yl },
            Likelihood::Logistic => FragmentData::LogisticLik { y: yl == 1.0 },
            Likelihood::Probit => FragmentData::ProbitLik { y: yl == 1.0 },
            Likelihood::Poisson => FragmentData::PoissonLik { y: yl as u64 },
        };
        let mut nb = vec![al];
        if let Some((s, _)) = sigsq_eps {
            nb.push(s);
        }
        g.add_factor(format!("p(y[{l}])"), lik, &nb)?;
        linear_predictors.push(al);
    }

    let mut ranef = Vec::with_capacity(m + k);
    let mut add_ranef = |g: &mut FactorGraph<f64>, tag: &str, count: usize, offset: usize, var: NodeId| -> Result<()> {
        for i in 0..count {
            let r = db + offset + i;
            let u = g.add_node(format!("u_{tag}[{i}]"), FamilyTag::UnivariateNormal)?;
            g.add_factor(format!("delta(u_{tag}[{i}])"), FragmentData::LinComb { a: design.e_r(r) }, &[u, theta])?;
            g.add_factor(format!("p(u_{tag}[{i}]|sigsq_{tag})"), FragmentData::GaussianLik { y: 0.0 }, &[u, var])?;
            ranef.push(u);
        }
        Ok(())
    };
    let sigsq_grp = if m > 0 {
        let chain = add_variance_chain(&mut g, "grp", spec.priors.nu, spec.priors.a_grp)?;
        add_ranef(&mut g, "grp", m, 0, chain.0)?;
        Some(chain)
    } else {
        None
    };
    let sigsq_spl = if k > 0 {
        let chain = add_variance_chain(&mut g, "spl", spec.priors.nu, spec.priors.a_spl)?;
        add_ranef(&mut g, "spl", k, m, chain.0)?;
        Some(chain)
    } else {
        None
    };

    Ok(GlmmModel {
        graph: g,
        design,
        likelihood: spec.likelihood,
        beta,
        theta,
        linear_predictors,
        ranef,
        sigsq_grp,
        sigsq_spl,
        sigsq_eps,
    })
}

/// Centering and scaling applied by [`standardize`].
#[derive(Clone, Debug, PartialEq)]
pub struct Transform {
    /// (column, mean, standard deviation) for every transformed predictor.
    pub columns: Vec<(String, f64, f64)>,
    /// (mean, standard deviation) of a Gaussian response.
    pub response: Option<(f64, f64)>,
}

impl Transform {
    fn get(&self, name: &str) -> (f64, f64) {
        self.columns
            .iter()
            .find(|(n, _, _)| n == name)
            .map_or((0.0, 1.0), |&(_, m, s)| (m, s))
    }
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, v.sqrt())
}

fn is_binary(x: &[f64]) -> bool {
    x.iter().all(|&v| v == 0.0 || v == 1.0)
}

/// Centers and scales continuous predictors (and a Gaussian response) by
/// their sample mean and standard deviation. Without an intercept, columns
/// are only scaled. A known residual variance is rescaled to match.
pub fn standardize(data: &Dataset, spec: &ModelSpec) -> Result<(Dataset, ModelSpec, Transform)> {
    let center = spec.intercept;
    let mut out = data.clone();
    let mut names: Vec<&String> = spec.fixed_effects.iter().collect();
    if let Some(s) = &spec.spline {
        if !names.contains(&&s.column) {
            names.push(&s.column);
        }
    }
    let mut columns = Vec::new();
    for name in names {
        let x = data.column(name)?;
        let (m, sd) = mean_sd(x);
        if !(sd > 0.0) {
            return Err(Error::Contract(format!("column `{name}` has zero variance")));
        }
        if is_binary(x) && spec.spline.as_ref().is_none_or(|s| &s.column != name) {
            continue;
        }
        let m = if center { m } else { 0.0 };
        out.replace(name, x.iter().map(|v| (v - m) / sd).collect());
        columns.push((name.clone(), m, sd));
    }
    let mut new_spec = spec.clone();
    let response = if spec.likelihood == Likelihood::Gaussian {
        let y = data.column(&spec.response)?;
        let (m, sd) = mean_sd(y);
        if !(sd > 0.0) {
            return Err(Error::Contract(format!("response `{}` has zero variance", spec.response)));
        }
        let m = if center { m } else { 0.0 };
        out.replace(&spec.response, y.iter().map(|v| (v - m) / sd).collect());
        if let Some(v) = spec.priors.known_variance {
            new_spec.priors.known_variance = Some(v / (sd * sd));
        }
        Some((m, sd))
    } else {
        None
    };
    new_spec.standardize = false;
    Ok((out, new_spec, Transform { columns, response }))
}

/// Maps posteriors of a model fitted to standardized data back to the
/// original units. Messages are left in the standardized parameterization.
pub fn destandardize(fit: &FitResult<f64>, model: &GlmmModel, tr: &Transform) -> Result<FitResult<f64>> {
    let des = &model.design;
    let (db, d) = (des.d_beta(), des.dim());
    let (my, sy) = tr.response.unwrap_or((0.0, 1.0));
    // θ_orig = L θ' + shift.
    let mut l = Mat::zeros(d, d);
    let mut shift = vec![0.0; d];
    let has_int = des.fixed_names.first().is_some_and(|n| n == "(intercept)");
    for (j, name) in des.fixed_names.iter().enumerate() {
        if has_int && j == 0 {
            l[(0, 0)] = sy;
            shift[0] = my;
            continue;
        }
        let (m, s) = tr.get(name);
        l[(j, j)] = sy / s;
        if has_int {
            l[(0, j)] = -sy * m / s;
        }
    }
    let m_grp = des.z_grp.cols();
    let spl_sd = des.spline_column.as_deref().map_or(1.0, |c| tr.get(c).1);
    for r in db..d {
        l[(r, r)] = if r < db + m_grp { sy } else { sy / spl_sd };
    }
    let map_mvn = |p: &NatParam<f64>, lm: &Mat<f64>, sh: &[f64]| -> Result<NatParam<f64>> {
        let c = mvn_natural_to_common(p)?;
        let mut mu = lm.matvec(&c.mu)?;
        for (a, b) in mu.iter_mut().zip(sh) {
            *a += b;
        }
        let sigma = lm.matmul(&c.sigma)?.matmul(&lm.transpose())?.symmetrize();
        mvn_common_to_natural(&CommonMVN { mu, sigma })
    };
    let map_normal = |p: &NatParam<f64>, scale: f64, sh: f64| -> Result<NatParam<f64>> {
        let c = normal_natural_to_common(p)?;
        let mu = scale * c.mu + sh;
        let v = scale * scale * c.sigsq;
        Ok(NatParam::normal(mu / v, -0.5 / v))
    };
    let map_var = |p: &NatParam<f64>, c: f64| -> Result<NatParam<f64>> {
        invchisq_natural_to_common(p)?;
        Ok(NatParam::inv_chisq(p.eta[0], c * p.eta[1]))
    };

    let mut post = fit.posteriors.clone();
    post[model.theta] = map_mvn(&fit.posteriors[model.theta], &l, &shift)?;
    let mut lb = Mat::zeros(db, db);
    for j in 0..db {
        for i in 0..db {
            lb[(i, j)] = l[(i, j)];
        }
    }
    post[model.beta] = map_mvn(&fit.posteriors[model.beta], &lb, &shift[..db])?;
    for &al in &model.linear_predictors {
        post[al] = map_normal(&fit.posteriors[al], sy, my)?;
    }
    for (i, &u) in model.ranef.iter().enumerate() {
        post[u] = map_normal(&fit.posteriors[u], l[(db + i, db + i)], 0.0)?;
    }
    let chains = [
        (model.sigsq_grp.map(|(s, a)| (s, Some(a))), sy * sy),
        (model.sigsq_spl.map(|(s, a)| (s, Some(a))), sy * sy / (spl_sd * spl_sd)),
        (model.sigsq_eps, sy * sy),
    ];
    for (chain, c) in chains {
        if let Some((s, a)) = chain {
            post[s] = map_var(&fit.posteriors[s], c)?;
            if let Some(a) = a {
                post[a] = map_var(&fit.posteriors[a], 1.0 / c)?;
            }
        }
    }
    Ok(FitResult {
        posteriors: post,
        ..fit.clone()
    })
}
