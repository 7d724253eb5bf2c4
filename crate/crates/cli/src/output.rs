use std::path::Path;
use std::str::FromStr;

use anyhow::{Context, Result};
use epfrag::expfam::{invchisq_natural_to_common, mvn_natural_to_common, normal_natural_to_common, FamilyTag, NatParam};
use epfrag::graph::FitResult;
use epfrag::linalg::Mat;
use epfrag::models::GlmmModel;
use epfrag::oracle::{invchisq_density, mvn_marginal_density, Grid1D};
use serde_json::{json, Map, Number, Value};

const DENSITY_POINTS: usize = 201;

/// A float with 17 significant digits; non-finite values become null.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(Number::from_str(&format!("{x:.16e}")).expect("formatted float is valid JSON"))
    } else {
        Value::Null
    }
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

fn matrix(m: &Mat<f64>) -> Value {
    Value::Array((0..m.rows()).map(|i| nums(&m.row(i))).collect())
}

fn family_name(f: FamilyTag) -> String {
    match f {
        FamilyTag::UnivariateNormal => "normal".into(),
        FamilyTag::MultivariateNormal(d) => format!("multivariate_normal({d})"),
        FamilyTag::InverseChiSquared => "inverse_chi_squared".into(),
        FamilyTag::InverseWishart(d) => format!("inverse_wishart({d})"),
        FamilyTag::MoonRock => "moon_rock".into(),
    }
}

/// Common parameters with a fixed key set: mean and variance for Normal
/// families, κ and λ for Inverse-χ².
fn common(p: &NatParam<f64>) -> Value {
    let (mut mean, mut variance, mut kappa, mut lambda) = (Value::Null, Value::Null, Value::Null, Value::Null);
    match p.family {
        FamilyTag::UnivariateNormal => {
            if let Ok(c) = normal_natural_to_common(p) {
                mean = num(c.mu);
                variance = num(c.sigsq);
            }
        }
        FamilyTag::MultivariateNormal(_) => {
            if let Ok(c) = mvn_natural_to_common(p) {
                mean = nums(&c.mu);
                variance = matrix(&c.sigma);
            }
        }
        FamilyTag::InverseChiSquared => {
            if let Ok(c) = invchisq_natural_to_common(p) {
                kappa = num(c.kappa);
                lambda = num(c.lambda);
            }
        }
        _ => {}
    }
    json!({ "mean": mean, "variance": variance, "kappa": kappa, "lambda": lambda })
}

fn density_entry(name: &str, grid: Grid1D) -> Value {
    json!({ "name": name, "x": nums(&grid.x), "density": nums(&grid.density) })
}

fn normal_grid(mean: f64, var: f64, f: impl Fn(f64) -> f64) -> Grid1D {
    let sd = var.sqrt();
    Grid1D::from_fn(Grid1D::linspace(mean - 5.0 * sd, mean + 5.0 * sd, DENSITY_POINTS), f)
}

/// Plotting grid for an Inverse-χ² density: from near zero to well past the bulk.
fn invchisq_grid(p: &NatParam<f64>) -> Option<Grid1D> {
    let c = invchisq_natural_to_common(p).ok()?;
    let mode = c.lambda / (c.kappa + 2.0);
    let hi = if c.kappa > 4.0 {
        let mean = c.lambda / (c.kappa - 2.0);
        let sd = mean * (2.0 / (c.kappa - 4.0)).sqrt();
        mean + 8.0 * sd
    } else {
        20.0 * mode
    };
    let lo = 0.05 * mode;
    Some(Grid1D::from_fn(Grid1D::linspace(lo, hi, DENSITY_POINTS), |x| invchisq_density(p, x)))
}

/// The fit document written by `fit`.
pub fn fit_document(model: &GlmmModel, fit: &FitResult<f64>, standardized: bool) -> Value {
    let nodes = model.graph.nodes();
    let parameters: Vec<Value> = nodes
        .iter()
        .zip(&fit.posteriors)
        .map(|(n, p)| {
            json!({
                "name": n.name,
                "family": family_name(p.family),
                "natural": nums(&p.eta),
                "common": common(p),
            })
        })
        .collect();

    let beta_post = &fit.posteriors[model.beta];
    let beta_common = mvn_natural_to_common(beta_post).ok();
    let mut coefficients = vec![];
    let mut densities = vec![];
    for (k, name) in model.design.fixed_names.iter().enumerate() {
        let (mean, var) = beta_common
            .as_ref()
            .map_or((f64::NAN, f64::NAN), |c| (c.mu[k], c.sigma[(k, k)]));
        coefficients.push(json!({ "name": name, "mean": num(mean), "variance": num(var) }));
        if let (true, Ok(f)) = (var > 0.0, mvn_marginal_density(beta_post, k)) {
            densities.push(density_entry(name, normal_grid(mean, var, f)));
        }
    }
    let variances = [
        ("sigsq_grp", model.sigsq_grp.map(|(s, _)| s)),
        ("sigsq_spl", model.sigsq_spl.map(|(s, _)| s)),
        ("sigsq_eps", model.sigsq_eps.map(|(s, _)| s)),
    ];
    for (name, node) in variances {
        if let Some(g) = node.and_then(|s| invchisq_grid(&fit.posteriors[s])) {
            densities.push(density_entry(name, g));
        }
    }
    // u_grp[i] belongs to group_levels[i].
    let mut design = Map::new();
    design.insert("group_levels".into(), nums(&model.design.group_levels));
    design.insert("knots".into(), nums(&model.design.knots));

    json!({
        "converged": fit.converged,
        "iterations_used": fit.iterations_used,
        "failure_count": fit.failure_count,
        "max_change_trace": nums(&fit.max_change_trace),
        "standardized": standardized,
        "coefficients": coefficients,
        "design": Value::Object(design),
        "parameters": parameters,
        "densities": densities,
    })
}

pub fn write_json(doc: &Value, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc)?;
    text.push('\n');
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
