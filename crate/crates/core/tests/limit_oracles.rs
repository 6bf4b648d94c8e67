#![allow(clippy::needless_range_loop)]

mod common;

use apf_core::estimate::fisher_star;
use apf_core::ks;
use apf_core::limit::{calibrate_threshold, sample_limit_many, LimitGrid};
use apf_core::BaseIntensityModel;
use statrs::function::erf::erfc;

/// `E Δ₀` of the discretized variable, computed from the grid itself:
/// `Δr Σᵢ [rᵢ − 2vᵢᵀI⁻¹vᵢ + vᵢᵀI⁻¹JI⁻¹vᵢ]` with `J = Σ ΔvΔvᵀ/Δr`.
fn discrete_mean(grid: &LimitGrid, total: f64) -> f64 {
    let v = grid.gradients();
    let k = v.len();
    let dr = total / k as f64;
    let fi = common::inv2(grid.fisher().matrix);
    let mut j = [[0.0; 2]; 2];
    let mut prev = [0.0, 0.0];
    for g in v {
        let d = [g[0] - prev[0], g[1] - prev[1]];
        for a in 0..2 {
            for b in 0..2 {
                j[a][b] += d[a] * d[b] / dr;
            }
        }
        prev = *g;
    }
    let mul = |m: [[f64; 2]; 2], x: [f64; 2]| [m[0][0] * x[0] + m[0][1] * x[1], m[1][0] * x[0] + m[1][1] * x[1]];
    let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];
    let mut acc = 0.0;
    for (i, g) in v.iter().enumerate() {
        let r = (i + 1) as f64 * dr;
        let u = mul(fi, *g);
        acc += r - 2.0 * dot(*g, u) + dot(u, mul(j, u));
    }
    acc * dr
}

#[test]
fn mean_matches_second_moment_oracle() {
    for model in [BaseIntensityModel::gauss2(), BaseIntensityModel::gumbel3()] {
        let oracle = common::mean_delta0_oracle(&model, common::inv2(common::fisher_oracle(&model)));
        let grid = LimitGrid::new(&model, 4096).unwrap();
        let draws: Vec<f64> = sample_limit_many(&grid, 20_000, 8).into_iter().map(|d| d.delta0).collect();
        assert!(draws.iter().all(|d| *d >= 0.0));
        let (m, se) = common::mean_se(&draws);
        let bias = (discrete_mean(&grid, model.total()) - oracle).abs();
        assert!((m - oracle).abs() <= 3.0 * se + bias, "{}: {m} ± {se} vs {oracle} (bias {bias})", model.model_id());
        assert!(bias < 0.01 * oracle, "{}: discretization bias {bias}", model.model_id());
    }
}

#[test]
fn grid_refinement_changes_mean_little() {
    for model in [BaseIntensityModel::gauss2(), BaseIntensityModel::logistic5(), BaseIntensityModel::gumbel3()] {
        let a = discrete_mean(&LimitGrid::new(&model, 4096).unwrap(), model.total());
        let b = discrete_mean(&LimitGrid::new(&model, 8192).unwrap(), model.total());
        assert!((a - b).abs() < 0.005 * b, "{}: {a} vs {b}", model.model_id());
    }
}

#[test]
fn zeta_marginals_are_normal() {
    let g = BaseIntensityModel::gauss2();
    let fi = fisher_star(&g).unwrap().inverse();
    let grid = LimitGrid::new(&g, 1024).unwrap();
    let draws = sample_limit_many(&grid, 100_000, 21);
    let phi = |x: f64| 0.5 * erfc(-x / std::f64::consts::SQRT_2);
    for c in 0..2 {
        let sd = fi[c][c].sqrt();
        let z: Vec<f64> = draws.iter().map(|d| d.zeta[c] / sd).collect();
        let r = ks::one_sample(&z, phi);
        assert!(r.p_value > 0.01, "coordinate {c}: {r:?}");
    }
}

#[test]
fn thresholds_reproduce_across_seeds() {
    let g = BaseIntensityModel::gauss2();
    let a = calibrate_threshold(&g, &[0.05], 100_000, 4096, 1).unwrap();
    let b = calibrate_threshold(&g, &[0.05], 100_000, 4096, 2).unwrap();
    let (ra, rb) = (&a.rows[0], &b.rows[0]);
    let combined = (ra.stderr.powi(2) + rb.stderr.powi(2)).sqrt();
    assert!((ra.c - rb.c).abs() <= 2.0 * combined, "{} vs {} (stderr {combined})", ra.c, rb.c);
}
