//! Independent reference computations shared by the integration tests.
//!
//! Everything here is deliberately naive: composite rules on fixed grids and
//! finite differences of `λ₀`, so the library's adaptive quadrature, closed
//! forms and analytic derivatives are never used to check themselves.

#![allow(dead_code)]

use apf_core::{BaseIntensityModel, Dataset, ShiftScaleParams};

/// Base-coordinate range outside of which every bundled model has
/// negligible mass.
pub const S_RANGE: (f64, f64) = (-40.0, 40.0);

/// Composite Simpson rule with `panels` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    assert!(panels.is_multiple_of(2));
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for i in 1..panels {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// `d/ds ln λ₀(s)` by central differences.
fn dlog_fd(model: &BaseIntensityModel, s: f64) -> f64 {
    let h = 1e-5;
    (model.log_lambda0(s + h) - model.log_lambda0(s - h)) / (2.0 * h)
}

/// `∫ (λ₀′²/λ₀)(1, s)(1, s)ᵀ ds` with `λ₀′²/λ₀ = (ln λ₀)′²·λ₀`.
pub fn fisher_oracle(model: &BaseIntensityModel) -> [[f64; 2]; 2] {
    let (a, b) = S_RANGE;
    let w = |s: f64| dlog_fd(model, s).powi(2) * model.lambda0(s);
    let i00 = simpson(w, a, b, 800_000);
    let i01 = simpson(|s| w(s) * s, a, b, 800_000);
    let i11 = simpson(|s| w(s) * s * s, a, b, 800_000);
    [[i00, i01], [i01, i11]]
}

pub fn inv2(m: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]
}

/// `E Δ₀ = L²/2 − ∫₀^L vᵀ I⁻¹ v dr`, `v = Λ̇₀(s(r))`, written in `s` as
/// `∫ vᵀ I⁻¹ v λ₀ ds`. Follows from `E W(r)² = r` and
/// `E[W(r) ζ] = I⁻¹ Λ̇₀(s(r))`.
pub fn mean_delta0_oracle(model: &BaseIntensityModel, fisher_inv: [[f64; 2]; 2]) -> f64 {
    let (a, b) = S_RANGE;
    let total = simpson(|s| model.lambda0(s), a, b, 800_000);
    let q = |s: f64| {
        let l = model.lambda0(s);
        let v = [-l, model.cumulative(s) - s * l];
        let fv = [fisher_inv[0][0] * v[0] + fisher_inv[0][1] * v[1], fisher_inv[1][0] * v[0] + fisher_inv[1][1] * v[1]];
        (v[0] * fv[0] + v[1] * fv[1]) * l
    };
    total * total / 2.0 - simpson(q, a, b, 800_000)
}

/// `(n/β²)∫[Λ̂ₙ(t) − β Λ₀((t−α)/β)]² λ₀((t−α)/β) dt` by two-point
/// Gauss–Legendre on `2^19` uniform cells in `t`, each event time inserted as
/// a breakpoint so the integrand is smooth on every piece.
pub fn quadrature_statistic(model: &BaseIntensityModel, data: &Dataset, theta: &ShiftScaleParams) -> f64 {
    let n = data.n() as f64;
    let events = data.pooled_events();
    let (lo, hi) = (theta.alpha + theta.beta * S_RANGE.0, theta.alpha + theta.beta * S_RANGE.1);
    let cells = 1usize << 19;
    let mut breaks: Vec<f64> = (0..=cells).map(|i| lo + (hi - lo) * i as f64 / cells as f64).collect();
    breaks.extend(events.iter().copied().filter(|t| *t > lo && *t < hi));
    breaks.sort_by(f64::total_cmp);
    let g = 0.5 / 3f64.sqrt();
    let mut acc = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let mid = 0.5 * (a + b);
        // Λ̂ₙ is constant on the open piece.
        let level = events.partition_point(|&e| e <= mid) as f64 / n;
        let f = |t: f64| {
            let s = (t - theta.alpha) / theta.beta;
            let gap = level - theta.beta * model.cumulative(s);
            gap * gap * model.lambda0(s)
        };
        let h = b - a;
        acc += 0.5 * h * (f(mid - g * h) + f(mid + g * h));
    }
    n / (theta.beta * theta.beta) * acc
}

/// Sample mean and its standard error.
pub fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

pub fn variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)
}

/// `λ(t) = e^{−t²/2} + e^{−(t−6)²/2}`, which no shift/scale image of a
/// single Gaussian bump can match.
pub fn bimodal(t: f64) -> f64 {
    (-t * t / 2.0).exp() + (-(t - 6.0) * (t - 6.0) / 2.0).exp()
}
