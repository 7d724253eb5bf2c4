use anyhow::{bail, Result};
use epfrag::graph::EpConfig;
use epfrag::models::{design_matrices, Dataset, Likelihood, ModelSpec};
use epfrag::oracle::{
    accuracy, grid_posterior, invchisq_density, mvn_marginal_density, Grid1D, GridModel, GridPosterior,
};
use serde_json::{json, Value};

use crate::fit::fit_model;
use crate::output::num;

/// Zero prior mean and an isotropic prior covariance; returns σ²_β.
fn isotropic_prior(spec: &ModelSpec, d: usize) -> Result<f64> {
    if spec.priors.mu_beta.as_ref().is_some_and(|m| m.iter().any(|&v| v != 0.0)) {
        bail!("the grid oracle needs priors.mu_beta = 0");
    }
    let Some(s) = &spec.priors.sigma_beta else {
        return Ok(1e10);
    };
    let v = s[(0, 0)];
    for i in 0..d {
        for j in 0..d {
            if s[(i, j)] != if i == j { v } else { 0.0 } {
                bail!("the grid oracle needs an isotropic priors.sigma_beta");
            }
        }
    }
    Ok(v)
}

/// The exact grid counterpart of a model with at most two free parameters.
fn grid_model(spec: &ModelSpec, data: &Dataset) -> Result<GridModel> {
    let des = design_matrices(spec, data)?;
    let d = des.d_beta();
    let y = data.column(&spec.response)?.to_vec();
    let mut free = d + des.n_ranef() + 2 * usize::from(spec.group.is_some()) + 2 * usize::from(spec.spline.is_some());
    if spec.likelihood == Likelihood::Gaussian && spec.priors.known_variance.is_none() {
        free += 1;
    }
    if free > 2 || des.n_ranef() > 0 {
        bail!("contract error: accuracy needs at most 2 free parameters, the model has {free}");
    }
    let sigsq_beta = isotropic_prior(spec, d)?;
    match spec.likelihood {
        Likelihood::Logistic => Ok(GridModel::Logistic {
            x: des.x,
            y: y.iter().map(|&v| v == 1.0).collect(),
            sigsq_beta,
        }),
        Likelihood::Gaussian => match spec.priors.known_variance {
            Some(sigsq) if spec.intercept && d == 1 => Ok(GridModel::NormalMean { y, sigsq, mu0: 0.0, tau0sq: sigsq_beta }),
            None if !spec.intercept && d == 1 && spec.priors.nu == 1.0 => Ok(GridModel::LinearHalfCauchy {
                x: des.x.col(0).to_vec(),
                y,
                sigsq_beta,
                a: spec.priors.a_eps,
            }),
            _ => bail!(
                "the grid oracle covers Gaussian models with an intercept only and known variance, \
                 or one coefficient without intercept and a Half-Cauchy prior (nu = 1)"
            ),
        },
        _ => bail!("the grid oracle covers logistic and Gaussian likelihoods"),
    }
}

/// Fits by EP and scores each marginal against the grid posterior.
pub fn report(spec: &ModelSpec, data: &Dataset, cfg: &EpConfig<f64>, nodes: usize) -> Result<(Value, bool)> {
    let grid = grid_model(spec, data)?;
    let (model, fit) = fit_model(spec, data, cfg)?;
    let marginals = match grid_posterior(&grid, nodes)? {
        GridPosterior::One(g) => vec![g],
        GridPosterior::Two(g) => vec![g.marginal_x(), g.marginal_y()],
    };
    let beta = &fit.posteriors[model.beta];
    let mut out = vec![];
    for (k, name) in model.design.fixed_names.iter().enumerate() {
        let f = mvn_marginal_density(beta, k)?;
        let q = Grid1D::from_fn(marginals[k].x.clone(), f);
        out.push(json!({ "name": name, "accuracy": num(accuracy(&q, &marginals[k])?) }));
    }
    if let (GridModel::LinearHalfCauchy { .. }, Some((s, _))) = (&grid, model.sigsq_eps) {
        let p = &fit.posteriors[s];
        let q = Grid1D::from_fn(marginals[1].x.clone(), |x| invchisq_density(p, x));
        out.push(json!({ "name": "sigsq_eps", "accuracy": num(accuracy(&q, &marginals[1])?) }));
    }
    let doc = json!({
        "converged": fit.converged,
        "iterations_used": fit.iterations_used,
        "grid_nodes": nodes,
        "parameters": out,
    });
    Ok((doc, fit.converged))
}
