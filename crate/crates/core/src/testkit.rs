//! The end-to-end test and the reproducible experiment harnesses built on it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ApfError, Result};
use crate::estimate::{fit_mle, FitOptions, FitResult};
use crate::intensity::{BaseIntensityModel, BaseShape, ParamBox, ShiftScaleParams, TabulatedBase};
use crate::ks::{self, KsResult};
use crate::limit::{validate_epsilon, ThresholdTable};
use crate::rng;
use crate::simulate::{sample_dataset, Dataset};
use crate::statistic::{cvm_statistic, StatValue};

/// Estimation settings shared by every replicate of a study.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FitSettings {
    pub theta_box: ParamBox,
    pub options: FitOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub delta_hat: StatValue,
    pub theta_hat: FitResult,
    pub epsilon: f64,
    pub c_epsilon: f64,
    /// `delta_hat.delta > c_epsilon`.
    pub reject: bool,
    pub warnings: Vec<String>,
}

/// Fits the MLE, evaluates the statistic there and compares it with the
/// tabulated threshold.
pub fn run_test(
    model: &BaseIntensityModel,
    dataset: &Dataset,
    epsilon: f64,
    table: &ThresholdTable,
    settings: &FitSettings,
) -> Result<TestReport> {
    if table.model_id != model.model_id() {
        return Err(ApfError::ModelMismatch { table: table.model_id.clone(), model: model.model_id().into() });
    }
    validate_epsilon(epsilon)?;
    let c_epsilon = table.threshold(epsilon)?;
    let fit = fit_mle(model, dataset, &settings.theta_box, &settings.options)?;
    let delta_hat = cvm_statistic(model, dataset, &fit.theta_hat);
    let mut warnings = Vec::new();
    if fit.boundary_hit {
        warnings.push(format!(
            "boundary_hit: estimate ({}, {}) lies on the edge of the parameter box",
            fit.theta_hat.alpha, fit.theta_hat.beta
        ));
    }
    Ok(TestReport { reject: delta_hat.delta > c_epsilon, delta_hat, theta_hat: fit, epsilon, c_epsilon, warnings })
}

/// Data-generating intensity of a power study: a base model placed at
/// `params`. Tabulated grids give alternatives outside the null family.
#[derive(Debug, Clone, PartialEq)]
pub struct AltIntensity {
    pub model: BaseIntensityModel,
    pub params: ShiftScaleParams,
}

#[derive(Serialize, Deserialize)]
struct AltFile {
    id: String,
    grid: Vec<[f64; 2]>,
    #[serde(default)]
    total_mass: Option<f64>,
}

impl AltIntensity {
    /// A member of a shift/scale family (degenerates the power study to a
    /// size study).
    pub fn family(model: &BaseIntensityModel, params: ShiftScaleParams) -> Self {
        AltIntensity { model: model.clone(), params }
    }

    /// Tabulated `(t, λ(t))` grid, optionally rescaled to `total_mass`.
    pub fn tabulated(id: &str, grid: &[[f64; 2]], total_mass: Option<f64>) -> Result<Self> {
        let mut tab = TabulatedBase::new(grid)?;
        if let Some(m) = total_mass {
            tab = tab.scaled_to_total(m)?;
        }
        Ok(AltIntensity {
            model: BaseIntensityModel::new(id, BaseShape::Tabulated(tab)),
            params: ShiftScaleParams::unit(),
        })
    }

    /// Tabulates `f` at `points` equispaced knots on `[lo, hi]`.
    pub fn from_fn<F: Fn(f64) -> f64>(id: &str, f: F, lo: f64, hi: f64, points: usize) -> Result<Self> {
        let grid: Vec<[f64; 2]> = (0..points)
            .map(|i| {
                let t = lo + (hi - lo) * i as f64 / (points - 1) as f64;
                [t, f(t)]
            })
            .collect();
        Self::tabulated(id, &grid, None)
    }

    /// `{"id": .., "grid": [[t, λ], ..], "total_mass": ..}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let f: AltFile = serde_json::from_str(text)?;
        Self::tabulated(&f.id, &f.grid, f.total_mass)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn id(&self) -> String {
        format!("{}@({}, {})", self.model.model_id(), self.params.alpha, self.params.beta)
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        sample_dataset(&self.model, &self.params, n, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: String,
    pub null_model: String,
    pub generator: String,
    pub n: usize,
    pub replicates: usize,
    pub epsilon: f64,
    pub c_epsilon: f64,
    pub seed: u64,
    pub fit: FitSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub scenario: Scenario,
    /// SHA-256 of the serialized scenario.
    pub config_hash: String,
    pub replicates: usize,
    pub rejects: usize,
    pub rejection_rate: f64,
    /// 95% Wilson score interval.
    pub wilson_interval: [f64; 2],
    pub boundary_hits: usize,
    /// Rejection rate over replicates whose estimate stayed interior.
    pub interior_rejection_rate: Option<f64>,
    pub seeds: Vec<u64>,
}

impl StudyResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("study serialization is infallible")
    }
}

/// 95% Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize) -> [f64; 2] {
    const Z: f64 = 1.959_963_984_540_054;
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = Z * Z;
    let center = (p + z2 / (2.0 * n_f)) / (1.0 + z2 / n_f);
    let half = Z / (1.0 + z2 / n_f) * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    [(center - half).max(0.0), (center + half).min(1.0)]
}

pub fn config_hash<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).expect("config serialization is infallible");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[allow(clippy::too_many_arguments)]
fn run_study(
    null: &BaseIntensityModel,
    generator: &AltIntensity,
    kind: &str,
    n: usize,
    replicates: usize,
    epsilon: f64,
    seed: u64,
    table: &ThresholdTable,
    settings: &FitSettings,
) -> Result<StudyResult> {
    validate_epsilon(epsilon)?;
    if replicates < 100 {
        return Err(ApfError::InvalidParams(format!("studies need >= 100 replicates, got {replicates}")));
    }
    if n == 0 {
        return Err(ApfError::InvalidParams("n must be at least 1".into()));
    }
    let c_epsilon = table.threshold(epsilon)?;
    let seeds: Vec<u64> = (0..replicates as u64).map(|r| rng::child_seed(seed, r)).collect();
    let outcomes = seeds
        .par_iter()
        .map(|&s| {
            let data = generator.sample(n, s)?;
            run_test(null, &data, epsilon, table, settings).map(|r| (r.reject, r.theta_hat.boundary_hit))
        })
        .collect::<Result<Vec<_>>>()?;
    let rejects = outcomes.iter().filter(|o| o.0).count();
    let boundary_hits = outcomes.iter().filter(|o| o.1).count();
    let interior = replicates - boundary_hits;
    let interior_rejects = outcomes.iter().filter(|o| o.0 && !o.1).count();
    let scenario = Scenario {
        kind: kind.into(),
        null_model: null.model_id().into(),
        generator: generator.id(),
        n,
        replicates,
        epsilon,
        c_epsilon,
        seed,
        fit: *settings,
    };
    Ok(StudyResult {
        config_hash: config_hash(&scenario),
        scenario,
        replicates,
        rejects,
        rejection_rate: rejects as f64 / replicates as f64,
        wilson_interval: wilson_interval(rejects, replicates),
        boundary_hits,
        interior_rejection_rate: (interior > 0).then(|| interior_rejects as f64 / interior as f64),
        seeds,
    })
}

/// Rejection rate of the full test on fresh null datasets at `theta0`.
#[allow(clippy::too_many_arguments)]
pub fn size_study(
    model: &BaseIntensityModel,
    theta0: &ShiftScaleParams,
    n: usize,
    replicates: usize,
    epsilon: f64,
    seed: u64,
    table: &ThresholdTable,
    settings: &FitSettings,
) -> Result<StudyResult> {
    theta0.validate()?;
    run_study(model, &AltIntensity::family(model, *theta0), "size", n, replicates, epsilon, seed, table, settings)
}

/// Rejection rate of the test for `model_null` on data drawn from `alt`.
#[allow(clippy::too_many_arguments)]
pub fn power_study(
    model_null: &BaseIntensityModel,
    alt: &AltIntensity,
    n: usize,
    replicates: usize,
    epsilon: f64,
    seed: u64,
    table: &ThresholdTable,
    settings: &FitSettings,
) -> Result<StudyResult> {
    run_study(model_null, alt, "power", n, replicates, epsilon, seed, table, settings)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseKs {
    pub i: usize,
    pub j: usize,
    #[serde(flatten)]
    pub ks: KsResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApfReport {
    pub model_id: String,
    pub thetas: Vec<ShiftScaleParams>,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub config_hash: String,
    /// Two-sample tests between the statistic samples of each pair of
    /// parameter points.
    pub pairwise: Vec<PairwiseKs>,
    /// Each statistic sample against the supplied limit draws.
    pub versus_limit: Vec<KsResult>,
    pub limit_draws: usize,
    /// Mean of the statistic at each parameter point.
    pub means: Vec<f64>,
    pub boundary_hits: Vec<usize>,
}

/// Statistic samples at one parameter point: replicate `r` draws its data
/// from a seed derived from `(seed, θ, r)`, so equal points reproduce equal
/// samples and distinct points are independent.
pub fn statistic_sample(
    model: &BaseIntensityModel,
    theta0: &ShiftScaleParams,
    n: usize,
    replicates: usize,
    seed: u64,
    settings: &FitSettings,
) -> Result<(Vec<f64>, usize)> {
    theta0.validate()?;
    let key = theta0.alpha.to_bits().rotate_left(32) ^ theta0.beta.to_bits();
    let point_seed = rng::child_seed(seed, key);
    let out = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let data = sample_dataset(model, theta0, n, rng::child_seed(point_seed, r))?;
            let fit = fit_mle(model, &data, &settings.theta_box, &settings.options)?;
            Ok((cvm_statistic(model, &data, &fit.theta_hat).delta, fit.boundary_hit))
        })
        .collect::<Result<Vec<_>>>()?;
    let hits = out.iter().filter(|o| o.1).count();
    Ok((out.into_iter().map(|o| o.0).collect(), hits))
}

/// Compares the null distribution of the statistic across parameter points
/// and against draws of the limit variable.
pub fn apf_check(
    model: &BaseIntensityModel,
    thetas: &[ShiftScaleParams],
    n: usize,
    replicates: usize,
    seed: u64,
    settings: &FitSettings,
    limit_draws: &[f64],
) -> Result<ApfReport> {
    if thetas.len() < 2 {
        return Err(ApfError::InvalidParams("apf check needs at least two parameter points".into()));
    }
    if replicates < 1000 {
        return Err(ApfError::InvalidParams(format!("apf check needs >= 1000 replicates, got {replicates}")));
    }
    if limit_draws.is_empty() {
        return Err(ApfError::InvalidParams("apf check needs limit draws".into()));
    }
    let samples =
        thetas.iter().map(|t| statistic_sample(model, t, n, replicates, seed, settings)).collect::<Result<Vec<_>>>()?;
    let mut pairwise = Vec::new();
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            pairwise.push(PairwiseKs { i, j, ks: ks::two_sample(&samples[i].0, &samples[j].0) });
        }
    }
    let versus_limit = samples.iter().map(|s| ks::two_sample(&s.0, limit_draws)).collect();
    let config = (model.model_id(), thetas, n, replicates, seed, settings, limit_draws.len());
    Ok(ApfReport {
        model_id: model.model_id().into(),
        thetas: thetas.to_vec(),
        n,
        replicates,
        seed,
        config_hash: config_hash(&config),
        pairwise,
        versus_limit,
        limit_draws: limit_draws.len(),
        means: samples.iter().map(|s| s.0.iter().sum::<f64>() / s.0.len() as f64).collect(),
        boundary_hits: samples.iter().map(|s| s.1).collect(),
    })
}
