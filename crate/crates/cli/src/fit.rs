use anyhow::Result;
use epfrag::graph::{EpConfig, FitResult};
use epfrag::models::{build_glmm, destandardize, standardize, Dataset, GlmmModel, ModelSpec};

/// Builds and fits the model, standardizing first when `spec.standardize` is set.
/// Posteriors are reported on the original scale either way.
pub fn fit_model(spec: &ModelSpec, data: &Dataset, cfg: &EpConfig<f64>) -> Result<(GlmmModel, FitResult<f64>)> {
    if spec.standardize {
        let (sdata, sspec, tr) = standardize(data, spec)?;
        let model = build_glmm(&sspec, &sdata)?;
        let fit = model.graph.run(cfg)?;
        let back = destandardize(&fit, &model, &tr)?;
        Ok((model, back))
    } else {
        let model = build_glmm(spec, data)?;
        let fit = model.graph.run(cfg)?;
        Ok((model, fit))
    }
}
