//! Poisson log-likelihood, score, maximum likelihood fitting over the box
//! and the parameter-free Fisher matrix.

use serde::{Deserialize, Serialize};

use crate::error::{ApfError, Result};
use crate::intensity::{BaseIntensityModel, ParamBox, ShiftScaleParams};
use crate::optimize::{self, Bounds, SimplexOptions};
use crate::quadrature;
use crate::simulate::Dataset;

/// Tuning of [`fit_mle`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Points per axis of the coarse start grid.
    pub grid_size: usize,
    /// Number of best grid points refined by the simplex search.
    pub starts: usize,
    /// Iteration cap of each simplex run.
    pub max_iter: usize,
    pub xtol: f64,
    pub ftol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { grid_size: 16, starts: 3, max_iter: 10_000, xtol: 1e-10, ftol: 1e-14 }
    }
}

/// Outcome of [`fit_mle`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_hat: ShiftScaleParams,
    pub loglik: f64,
    /// Euclidean norm of the score at `theta_hat`.
    pub score_norm: f64,
    /// Simplex iterations of the winning start.
    pub iterations: usize,
    pub boundary_hit: bool,
    pub starts_tried: usize,
}

/// `ln L(θ) = Σ ln λ₀((t−α)/β) − n·β·Λ₀(∞)`, the likelihood ratio against a
/// fixed reference up to a parameter-free constant.
pub fn log_likelihood(model: &BaseIntensityModel, params: &ShiftScaleParams, dataset: &Dataset) -> f64 {
    let events: f64 =
        dataset.trajectories.iter().flat_map(|t| t.events()).map(|&t| model.log_lambda0(params.to_base(t))).sum();
    events - dataset.n() as f64 * params.beta * model.total()
}

fn loglik_pooled(model: &BaseIntensityModel, alpha: f64, beta: f64, pooled: &[f64], n: usize) -> f64 {
    let inv = 1.0 / beta;
    let mut acc = 0.0;
    for &t in pooled {
        acc += model.log_lambda0((t - alpha) * inv);
    }
    acc - n as f64 * beta * model.total()
}

/// Gradient of [`log_likelihood`] in `(α, β)`.
pub fn score(model: &BaseIntensityModel, params: &ShiftScaleParams, dataset: &Dataset) -> [f64; 2] {
    let mut g = [0.0, 0.0];
    for &t in dataset.trajectories.iter().flat_map(|t| t.events()) {
        let s = params.to_base(t);
        let w = -model.dlog_lambda0(s) / params.beta;
        g[0] += w;
        g[1] += w * s;
    }
    g[1] -= dataset.n() as f64 * model.total();
    g
}

fn better(a: &(ShiftScaleParams, f64), b: &(ShiftScaleParams, f64)) -> std::cmp::Ordering {
    // Larger likelihood first, then smaller β, then smaller α.
    b.1.total_cmp(&a.1).then(a.0.beta.total_cmp(&b.0.beta)).then(a.0.alpha.total_cmp(&b.0.alpha))
}

/// Maximum likelihood estimate over `theta_box`: a coarse grid search
/// followed by box-constrained simplex refinement of the best grid points.
pub fn fit_mle(
    model: &BaseIntensityModel,
    dataset: &Dataset,
    theta_box: &ParamBox,
    options: &FitOptions,
) -> Result<FitResult> {
    theta_box.validate()?;
    if options.grid_size < 1 || options.starts < 1 {
        return Err(ApfError::InvalidConfig("grid_size and starts must be positive".into()));
    }
    let pooled = dataset.pooled_events();
    if pooled.is_empty() {
        return Err(ApfError::EmptyDataset);
    }
    let n = dataset.n();
    let ll = |a: f64, b: f64| loglik_pooled(model, a, b, &pooled, n);

    let g = options.grid_size;
    let da = (theta_box.alpha_max - theta_box.alpha_min) / g as f64;
    let db = (theta_box.beta_max - theta_box.beta_min) / g as f64;
    let mut grid: Vec<(ShiftScaleParams, f64)> = Vec::with_capacity(g * g);
    for i in 0..g {
        for j in 0..g {
            let p = ShiftScaleParams {
                alpha: theta_box.alpha_min + (i as f64 + 0.5) * da,
                beta: theta_box.beta_min + (j as f64 + 0.5) * db,
            };
            let v = ll(p.alpha, p.beta);
            grid.push((p, if v.is_nan() { f64::NEG_INFINITY } else { v }));
        }
    }
    grid.sort_by(better);

    let bounds =
        Bounds { lower: [theta_box.alpha_min, theta_box.beta_min], upper: [theta_box.alpha_max, theta_box.beta_max] };
    let simplex = SimplexOptions { max_iter: options.max_iter, xtol: options.xtol, ftol: options.ftol };
    let starts = options.starts.min(grid.len());
    let mut best: Option<((ShiftScaleParams, f64), usize)> = None;
    for (start, _) in grid.iter().take(starts) {
        let objective = |x: &[f64; 2]| -ll(x[0], x[1]);
        let mut run = optimize::minimize(objective, start.as_array(), [0.5 * da, 0.5 * db], &bounds, &simplex);
        let mut iterations = run.iterations;
        if run.converged {
            // One restart from the optimum guards against a collapsed simplex.
            let step = [1e-3 * da, 1e-3 * db];
            run = optimize::minimize(objective, run.x, step, &bounds, &simplex);
            iterations += run.iterations;
        }
        if !run.converged {
            return Err(ApfError::NonConvergence(options.max_iter));
        }
        let cand = (ShiftScaleParams { alpha: run.x[0], beta: run.x[1] }, -run.f);
        let replace = match &best {
            None => true,
            Some((b, _)) => better(&cand, b).is_lt(),
        };
        if replace {
            best = Some((cand, iterations));
        }
    }
    let ((theta_hat, loglik), iterations) = best.expect("at least one start");
    let sc = score(model, &theta_hat, dataset);
    let tol_a = 1e-6 * (theta_box.alpha_max - theta_box.alpha_min);
    let tol_b = 1e-6 * (theta_box.beta_max - theta_box.beta_min);
    let boundary_hit = theta_hat.alpha - theta_box.alpha_min <= tol_a
        || theta_box.alpha_max - theta_hat.alpha <= tol_a
        || theta_hat.beta - theta_box.beta_min <= tol_b
        || theta_box.beta_max - theta_hat.beta <= tol_b;
    Ok(FitResult { theta_hat, loglik, score_norm: sc[0].hypot(sc[1]), iterations, boundary_hit, starts_tried: starts })
}

/// Parameter-free Fisher matrix
/// `I* = ∫ (λ₀′²/λ₀)(s)·[[1, s], [s, s²]] ds`; the information of `n`
/// observations at scale `β` is `n·I*/β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherStar {
    pub matrix: [[f64; 2]; 2],
    pub det: f64,
}

impl FisherStar {
    pub fn inverse(&self) -> [[f64; 2]; 2] {
        let m = &self.matrix;
        [[m[1][1] / self.det, -m[0][1] / self.det], [-m[1][0] / self.det, m[0][0] / self.det]]
    }
}

pub fn fisher_star(model: &BaseIntensityModel) -> Result<FisherStar> {
    let breaks = model.quadrature_breaks();
    let weight = |s: f64| {
        let d = model.dlog_lambda0(s);
        let v = d * d * model.lambda0(s);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let moment = |k: i32| quadrature::integrate_pieces(|s| weight(s) * s.powi(k), &breaks, 1e-14, 1e-12);
    let (i00, i01, i11) = (moment(0), moment(1), moment(2));
    let det = i00 * i11 - i01 * i01;
    if !(det > 1e-10 * i00 * i11) {
        return Err(ApfError::SingularFisher { det });
    }
    Ok(FisherStar { matrix: [[i00, i01], [i01, i11]], det })
}
