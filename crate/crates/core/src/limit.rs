//! Simulation of the limit law of the test statistic and Monte Carlo
//! calibration of rejection thresholds.
//!
//! Under the null the statistic converges to
//! `Δ₀ = ∫₀^{Λ₀(∞)} [W(r) − ⟨ζ, Λ̇₀(s(r))⟩]² dr`, with `s(r) = Λ₀⁻¹(r)`,
//! `W` a Wiener process on `[0, Λ₀(∞)]`, `Λ̇₀` from
//! [`crate::intensity::mean_gradient_base`] and `ζ = I*⁻¹ ∫ ℓ(s)/λ₀(s) dW(Λ₀(s))`.
//!
//! The path is discretized on `K` equal cells of the `r` axis. Over a cell
//! `(r_{i−1}, r_i]` the integrand `ℓ/λ₀` of `ζ` is replaced by its cell
//! average, which is exact in closed form because `∫_{-∞}^s ℓ = Λ̇₀(s)`:
//! `b_i = (Λ̇₀(s_i) − Λ̇₀(s_{i−1}))/Δr`. `W` and `Λ̇₀` enter the outer
//! integral at right cell ends.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ApfError, Result};
use crate::estimate::{fisher_star, FisherStar};
use crate::intensity::BaseIntensityModel;
use crate::rng;

pub const DEFAULT_K: usize = 8192;
pub const DEFAULT_M: usize = 100_000;
const BOOTSTRAP_REPLICATES: usize = 200;

/// One draw of the limit variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitDraw {
    pub delta0: f64,
    pub zeta: [f64; 2],
    /// `W(Λ₀(∞))`.
    pub w_end: f64,
}

/// Model-dependent quantities of the discretized limit, computed once.
#[derive(Debug, Clone)]
pub struct LimitGrid {
    model_id: String,
    cells: usize,
    dr: f64,
    /// Cell averages of `ℓ/λ₀`.
    score_weights: Vec<[f64; 2]>,
    /// `Λ̇₀` at right cell ends.
    gradients: Vec<[f64; 2]>,
    fisher_inv: [[f64; 2]; 2],
    fisher: FisherStar,
}

impl LimitGrid {
    pub fn new(model: &BaseIntensityModel, cells: usize) -> Result<Self> {
        if cells < 2 {
            return Err(ApfError::InvalidParams(format!("grid size K must be >= 2, got {cells}")));
        }
        let fisher = fisher_star(model)?;
        let total = model.total();
        let dr = total / cells as f64;
        let gradients: Vec<[f64; 2]> = (1..=cells)
            .map(|i| {
                if i == cells {
                    [0.0, total]
                } else {
                    let r = i as f64 * dr;
                    let s = model.inverse_cumulative(r);
                    let lam = model.lambda0(s);
                    [-lam, r - s * lam]
                }
            })
            .collect();
        let score_weights = (0..cells)
            .map(|i| {
                let prev = if i == 0 { [0.0, 0.0] } else { gradients[i - 1] };
                let next = gradients[i];
                [(next[0] - prev[0]) / dr, (next[1] - prev[1]) / dr]
            })
            .collect();
        Ok(LimitGrid {
            model_id: model.model_id().to_string(),
            cells,
            dr,
            score_weights,
            gradients,
            fisher_inv: fisher.inverse(),
            fisher,
        })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn fisher(&self) -> &FisherStar {
        &self.fisher
    }

    /// `Λ̇₀` at the right end of each cell.
    pub fn gradients(&self) -> &[[f64; 2]] {
        &self.gradients
    }

    /// One draw of `(Δ₀, ζ, W(Λ₀(∞)))`; `increments` is scratch space.
    fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, increments: &mut Vec<f64>) -> LimitDraw {
        let sd = self.dr.sqrt();
        increments.clear();
        increments.extend((0..self.cells).map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sd * z
        }));
        let mut proj = [0.0, 0.0];
        for (dw, b) in increments.iter().zip(&self.score_weights) {
            proj[0] += b[0] * dw;
            proj[1] += b[1] * dw;
        }
        let fi = &self.fisher_inv;
        let zeta = [fi[0][0] * proj[0] + fi[0][1] * proj[1], fi[1][0] * proj[0] + fi[1][1] * proj[1]];
        let mut w = 0.0;
        let mut acc = 0.0;
        for (dw, v) in increments.iter().zip(&self.gradients) {
            w += dw;
            let gap = w - (zeta[0] * v[0] + zeta[1] * v[1]);
            acc += gap * gap;
        }
        LimitDraw { delta0: acc * self.dr, zeta, w_end: w }
    }
}

/// One draw of the limit variable on `grid`.
pub fn sample_limit_delta0<R: Rng + ?Sized>(grid: &LimitGrid, rng: &mut R) -> LimitDraw {
    grid.draw_into(rng, &mut Vec::with_capacity(grid.cells))
}

/// `M` draws; draw `m` uses [`rng::substream`]`(seed, m)`.
pub fn sample_limit_many(grid: &LimitGrid, m: usize, seed: u64) -> Vec<LimitDraw> {
    (0..m as u64)
        .into_par_iter()
        .map_init(|| Vec::with_capacity(grid.cells), |buf, i| grid.draw_into(&mut rng::substream(seed, i), buf))
        .collect()
}

/// One draw of `∫₀¹ W(s)² ds` as a right-endpoint sum on `K` cells.
pub fn sample_limit_simple<R: Rng + ?Sized>(cells: usize, rng: &mut R) -> Result<f64> {
    if cells < 2 {
        return Err(ApfError::InvalidParams(format!("grid size K must be >= 2, got {cells}")));
    }
    let h = 1.0 / cells as f64;
    let sd = h.sqrt();
    let mut w = 0.0;
    let mut acc = 0.0;
    for _ in 0..cells {
        let z: f64 = StandardNormal.sample(rng);
        w += sd * z;
        acc += w * w;
    }
    Ok(acc * h)
}

/// Type-7 (linear interpolation) quantile of sorted data.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub epsilon: f64,
    pub c: f64,
    pub stderr: f64,
}

/// Monte Carlo thresholds `c_ε` with `P(Δ₀ > c_ε) = ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub model_id: String,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub seed: u64,
    pub quantile_method: String,
    pub stderr_method: String,
    pub rows: Vec<ThresholdRow>,
}

impl ThresholdTable {
    /// Threshold for `epsilon`, matched to within `1e-12`.
    pub fn threshold(&self, epsilon: f64) -> Result<f64> {
        self.rows
            .iter()
            .find(|r| (r.epsilon - epsilon).abs() <= 1e-12)
            .map(|r| r.c)
            .ok_or(ApfError::MissingEpsilon(epsilon))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: ThresholdTable = serde_json::from_str(text)?;
        for r in &t.rows {
            validate_epsilon(r.epsilon)?;
        }
        Ok(t)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub fn validate_epsilon(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(ApfError::InvalidEpsilon(eps))
    }
}

fn sorted_epsilons(epsilons: &[f64]) -> Result<Vec<f64>> {
    if epsilons.is_empty() {
        return Err(ApfError::InvalidConfig("at least one epsilon is required".into()));
    }
    for &e in epsilons {
        validate_epsilon(e)?;
    }
    let mut eps = epsilons.to_vec();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    Ok(eps)
}

/// Builds a table from existing `Δ₀` draws: type-7 upper quantiles, with
/// standard errors from a 200-fold bootstrap of the draws.
pub fn threshold_table_from_draws(
    model_id: &str,
    draws: &[f64],
    epsilons: &[f64],
    cells: usize,
    seed: u64,
) -> Result<ThresholdTable> {
    let eps = sorted_epsilons(epsilons)?;
    if draws.len() < 2 {
        return Err(ApfError::InvalidConfig("need at least two draws".into()));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let point: Vec<f64> = eps.iter().map(|e| quantile_type7(&sorted, 1.0 - e)).collect();

    let boot_seed = rng::child_seed(seed, u64::MAX);
    let m = draws.len();
    let boot: Vec<Vec<f64>> = (0..BOOTSTRAP_REPLICATES as u64)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::substream(boot_seed, b);
            let idx = Uniform::new(0, m).expect("non-empty range");
            let mut resample: Vec<f64> = (0..m).map(|_| sorted[idx.sample(&mut r)]).collect();
            resample.sort_by(f64::total_cmp);
            eps.iter().map(|e| quantile_type7(&resample, 1.0 - e)).collect()
        })
        .collect();
    let rows: Vec<ThresholdRow> = eps
        .iter()
        .enumerate()
        .map(|(k, &epsilon)| {
            let vals: Vec<f64> = boot.iter().map(|b| b[k]).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
            ThresholdRow { epsilon, c: point[k], stderr: var.sqrt() }
        })
        .collect();
    if rows.windows(2).any(|w| !(w[1].c < w[0].c)) {
        return Err(ApfError::InvalidConfig("thresholds are not strictly decreasing in epsilon; increase M".into()));
    }
    Ok(ThresholdTable {
        model_id: model_id.to_string(),
        k: cells,
        m,
        seed,
        quantile_method: "type7".into(),
        stderr_method: format!("bootstrap{BOOTSTRAP_REPLICATES}"),
        rows,
    })
}

/// Simulates `M` draws of `Δ₀` on a `K`-cell grid and tabulates `c_ε`.
pub fn calibrate_threshold(
    model: &BaseIntensityModel,
    epsilons: &[f64],
    m: usize,
    cells: usize,
    seed: u64,
) -> Result<ThresholdTable> {
    sorted_epsilons(epsilons)?;
    if m < 1000 {
        return Err(ApfError::InvalidParams(format!("M must be >= 1000, got {m}")));
    }
    let grid = LimitGrid::new(model, cells)?;
    let draws: Vec<f64> = sample_limit_many(&grid, m, seed).into_iter().map(|d| d.delta0).collect();
    threshold_table_from_draws(model.model_id(), &draws, epsilons, cells, seed)
}
