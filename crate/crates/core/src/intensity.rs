//! Base intensity models and the shift/scale family generated from them.
//!
//! A base model supplies `λ₀`, its derivative, the cumulative
//! `Λ₀(s) = ∫_{-∞}^s λ₀`, the total mass `Λ₀(∞)` and the inverse cumulative.
//! The family member with parameters `(α, β)` has intensity `λ₀((t-α)/β)`
//! and mean function `β·Λ₀((t-α)/β)`.

use std::f64::consts::{PI, SQRT_2};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{ApfError, Result};
use crate::quadrature;

/// Mass fraction cut from each end when truncating integrals over the real
/// line to a finite interval.
pub const SUPPORT_DELTA: f64 = 1e-10;

/// Absolute tolerance (in cumulative-mass units) of the generic inverse.
const INVERSE_TOL: f64 = 1e-12;

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Shift/scale parameter `θ = (α, β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftScaleParams {
    pub alpha: f64,
    pub beta: f64,
}

impl ShiftScaleParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let p = ShiftScaleParams { alpha, beta };
        p.validate()?;
        Ok(p)
    }

    /// The identity member `(0, 1)`.
    pub const fn unit() -> Self {
        ShiftScaleParams { alpha: 0.0, beta: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(ApfError::InvalidParams(format!("non-finite parameters ({}, {})", self.alpha, self.beta)));
        }
        if self.beta <= 0.0 {
            return Err(ApfError::InvalidParams(format!("beta must be > 0, got {}", self.beta)));
        }
        Ok(())
    }

    /// Base coordinate `(t - α)/β` of time `t`.
    #[inline]
    pub fn to_base(&self, t: f64) -> f64 {
        (t - self.alpha) / self.beta
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.alpha, self.beta]
    }
}

/// The admissible box `Θ = (a₁, a₂) × (b₁, b₂)` with `b₁ > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub beta_min: f64,
    pub beta_max: f64,
}

impl Default for ParamBox {
    fn default() -> Self {
        ParamBox { alpha_min: -10.0, alpha_max: 10.0, beta_min: 0.2, beta_max: 8.0 }
    }
}

impl ParamBox {
    pub fn new(alpha_min: f64, alpha_max: f64, beta_min: f64, beta_max: f64) -> Result<Self> {
        let b = ParamBox { alpha_min, alpha_max, beta_min, beta_max };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.alpha_min, self.alpha_max, self.beta_min, self.beta_max].iter().all(|v| v.is_finite());
        if !finite || self.alpha_min >= self.alpha_max || self.beta_min >= self.beta_max {
            return Err(ApfError::InvalidParams(format!("degenerate box {self:?}")));
        }
        if self.beta_min <= 0.0 {
            return Err(ApfError::InvalidParams(format!("box lower scale bound must be > 0, got {}", self.beta_min)));
        }
        Ok(())
    }

    pub fn contains(&self, p: &ShiftScaleParams) -> bool {
        (self.alpha_min..=self.alpha_max).contains(&p.alpha) && (self.beta_min..=self.beta_max).contains(&p.beta)
    }

    pub fn clamp(&self, alpha: f64, beta: f64) -> ShiftScaleParams {
        ShiftScaleParams {
            alpha: alpha.clamp(self.alpha_min, self.alpha_max),
            beta: beta.clamp(self.beta_min, self.beta_max),
        }
    }

    /// The box mapped through `t ↦ c·t + shift` (`c > 0`).
    pub fn transformed(&self, c: f64, shift: f64) -> ParamBox {
        ParamBox {
            alpha_min: c * self.alpha_min + shift,
            alpha_max: c * self.alpha_max + shift,
            beta_min: c * self.beta_min,
            beta_max: c * self.beta_max,
        }
    }
}

/// Tabulated base intensity: monotone cubic (Fritsch–Carlson) interpolation
/// of `(s, λ₀(s))` knots, continued by exponential tails outside the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedBase {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    /// Λ₀ at each knot, left tail included.
    cum: Vec<f64>,
    kappa_left: f64,
    kappa_right: f64,
    total: f64,
}

impl TabulatedBase {
    pub fn new(grid: &[[f64; 2]]) -> Result<Self> {
        if grid.len() < 2 {
            return Err(ApfError::InvalidModel("tabulated grid needs at least 2 points".into()));
        }
        for w in grid.windows(2) {
            if !(w[1][0] > w[0][0]) {
                return Err(ApfError::InvalidModel(format!(
                    "grid abscissae must be strictly increasing ({} then {})",
                    w[0][0], w[1][0]
                )));
            }
        }
        if let Some(bad) = grid.iter().find(|p| !(p[1] > 0.0) || !p[1].is_finite() || !p[0].is_finite()) {
            return Err(ApfError::InvalidModel(format!(
                "intensity must be finite and strictly positive, got {} at s = {}",
                bad[1], bad[0]
            )));
        }
        let knots: Vec<f64> = grid.iter().map(|p| p[0]).collect();
        let values: Vec<f64> = grid.iter().map(|p| p[1]).collect();
        let slopes = pchip_slopes(&knots, &values);

        let k = knots.len() - 1;
        let h_first = knots[1] - knots[0];
        let h_last = knots[k] - knots[k - 1];
        let kappa_left = (slopes[0] / values[0]).max(1.0 / h_first);
        let kappa_right = (-slopes[k] / values[k]).max(1.0 / h_last);

        let mut cum = Vec::with_capacity(knots.len());
        let mut acc = values[0] / kappa_left;
        cum.push(acc);
        for i in 0..k {
            acc += segment_integral(&knots, &values, &slopes, i, 1.0);
            cum.push(acc);
        }
        let total = acc + values[k] / kappa_right;
        Ok(TabulatedBase { knots, values, slopes, cum, kappa_left, kappa_right, total })
    }

    /// Same shape with every value multiplied so the total mass is `mass`.
    pub fn scaled_to_total(&self, mass: f64) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(ApfError::InvalidModel(format!("total mass must be positive, got {mass}")));
        }
        let f = mass / self.total;
        let grid: Vec<[f64; 2]> = self.knots.iter().zip(&self.values).map(|(&s, &v)| [s, v * f]).collect();
        TabulatedBase::new(&grid)
    }

    fn segment(&self, s: f64) -> usize {
        let i = self.knots.partition_point(|&k| k <= s);
        i.saturating_sub(1).min(self.knots.len() - 2)
    }

    fn lambda(&self, s: f64) -> f64 {
        let k = self.knots.len() - 1;
        if s < self.knots[0] {
            return self.values[0] * (self.kappa_left * (s - self.knots[0])).exp();
        }
        if s > self.knots[k] {
            return self.values[k] * (-self.kappa_right * (s - self.knots[k])).exp();
        }
        let i = self.segment(s);
        let h = self.knots[i + 1] - self.knots[i];
        let t = (s - self.knots[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.values[i]
            + (t3 - 2.0 * t2 + t) * h * self.slopes[i]
            + (-2.0 * t3 + 3.0 * t2) * self.values[i + 1]
            + (t3 - t2) * h * self.slopes[i + 1]
    }

    fn lambda_prime(&self, s: f64) -> f64 {
        let k = self.knots.len() - 1;
        if s < self.knots[0] {
            return self.kappa_left * self.lambda(s);
        }
        if s > self.knots[k] {
            return -self.kappa_right * self.lambda(s);
        }
        let i = self.segment(s);
        let h = self.knots[i + 1] - self.knots[i];
        let t = (s - self.knots[i]) / h;
        let t2 = t * t;
        ((6.0 * t2 - 6.0 * t) * self.values[i]
            + (3.0 * t2 - 4.0 * t + 1.0) * h * self.slopes[i]
            + (-6.0 * t2 + 6.0 * t) * self.values[i + 1]
            + (3.0 * t2 - 2.0 * t) * h * self.slopes[i + 1])
            / h
    }

    fn log_lambda(&self, s: f64) -> f64 {
        let k = self.knots.len() - 1;
        if s < self.knots[0] {
            self.values[0].ln() + self.kappa_left * (s - self.knots[0])
        } else if s > self.knots[k] {
            self.values[k].ln() - self.kappa_right * (s - self.knots[k])
        } else {
            self.lambda(s).ln()
        }
    }

    fn cumulative(&self, s: f64) -> f64 {
        let k = self.knots.len() - 1;
        if s < self.knots[0] {
            return self.values[0] / self.kappa_left * (self.kappa_left * (s - self.knots[0])).exp();
        }
        if s >= self.knots[k] {
            let tail = self.values[k] / self.kappa_right * (-self.kappa_right * (s - self.knots[k])).exp();
            return self.total - tail;
        }
        let i = self.segment(s);
        let t = (s - self.knots[i]) / (self.knots[i + 1] - self.knots[i]);
        self.cum[i] + segment_integral(&self.knots, &self.values, &self.slopes, i, t)
    }

    /// Closed-form inverse in the tails, otherwise the knot bracket that
    /// contains the answer.
    fn inverse_bracket(&self, r: f64) -> std::result::Result<f64, (f64, f64)> {
        let k = self.knots.len() - 1;
        if r <= self.cum[0] {
            return Ok(self.knots[0] + (r * self.kappa_left / self.values[0]).ln() / self.kappa_left);
        }
        if r >= self.cum[k] {
            let tail = self.total - r;
            return Ok(self.knots[k] - (tail * self.kappa_right / self.values[k]).ln() / self.kappa_right);
        }
        let i = self.cum.partition_point(|&c| c <= r).saturating_sub(1).min(k - 1);
        Err((self.knots[i], self.knots[i + 1]))
    }

    pub fn grid(&self) -> Vec<[f64; 2]> {
        self.knots.iter().zip(&self.values).map(|(&s, &v)| [s, v]).collect()
    }
}

/// ∫ of the Hermite cubic on segment `i` from its left knot to fraction `t`.
fn segment_integral(knots: &[f64], values: &[f64], slopes: &[f64], i: usize, t: f64) -> f64 {
    let h = knots[i + 1] - knots[i];
    let (t2, t3, t4) = (t * t, t * t * t, t * t * t * t);
    h * ((t - t3 + 0.5 * t4) * values[i]
        + (0.5 * t2 - 2.0 / 3.0 * t3 + 0.25 * t4) * h * slopes[i]
        + (t3 - 0.5 * t4) * values[i + 1]
        + (-t3 / 3.0 + 0.25 * t4) * h * slopes[i + 1])
}

/// Fritsch–Carlson slopes: each Hermite segment stays monotone between its
/// knot values, so positive data interpolates to a positive function.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let secants: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
    let mut d = vec![0.0; n];
    d[0] = secants[0];
    d[n - 1] = secants[n - 2];
    for i in 1..n - 1 {
        let (a, b) = (secants[i - 1], secants[i]);
        if a * b <= 0.0 {
            d[i] = 0.0;
        } else {
            let (h0, h1) = (x[i] - x[i - 1], x[i + 1] - x[i]);
            let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
            d[i] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    for i in 0..n - 1 {
        let m = secants[i];
        if m == 0.0 {
            d[i] = 0.0;
            d[i + 1] = 0.0;
            continue;
        }
        let (a, b) = (d[i] / m, d[i + 1] / m);
        let norm = a * a + b * b;
        if norm > 9.0 {
            let tau = 3.0 / norm.sqrt();
            d[i] = tau * a * m;
            d[i + 1] = tau * b * m;
        }
    }
    d
}

/// Shape of a base intensity.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseShape {
    /// `λ₀(s) = 2·exp(-s²/2)`, total mass `2√(2π)`.
    Gauss2,
    /// `λ₀(s) = 5·e^{-s}/(1+e^{-s})²`, total mass 5.
    Logistic5,
    /// `λ₀(s) = 3·exp(-s - e^{-s})`, total mass 3. Skewed.
    Gumbel3,
    /// `λ₀(s) = 1/(1+s²)`, total mass π. Heavy tailed; fails the moment
    /// conditions and is only useful as a negative example.
    Cauchy,
    Tabulated(TabulatedBase),
}

/// A named base intensity. Cheap to clone and immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseIntensityModel {
    model_id: String,
    shape: Arc<BaseShape>,
}

#[derive(Serialize, Deserialize)]
struct TabulatedFile {
    model_id: String,
    grid: Vec<[f64; 2]>,
}

impl BaseIntensityModel {
    pub fn new(model_id: impl Into<String>, shape: BaseShape) -> Self {
        BaseIntensityModel { model_id: model_id.into(), shape: Arc::new(shape) }
    }

    pub fn gauss2() -> Self {
        Self::new("gauss2", BaseShape::Gauss2)
    }

    pub fn logistic5() -> Self {
        Self::new("logistic5", BaseShape::Logistic5)
    }

    pub fn gumbel3() -> Self {
        Self::new("gumbel3", BaseShape::Gumbel3)
    }

    pub fn cauchy() -> Self {
        Self::new("cauchy", BaseShape::Cauchy)
    }

    pub fn tabulated(model_id: impl Into<String>, grid: &[[f64; 2]]) -> Result<Self> {
        Ok(Self::new(model_id, BaseShape::Tabulated(TabulatedBase::new(grid)?)))
    }

    /// Same intensity under a different identifier.
    pub fn relabeled(&self, model_id: impl Into<String>) -> Self {
        BaseIntensityModel { model_id: model_id.into(), shape: Arc::clone(&self.shape) }
    }

    /// Identifiers of the bundled models.
    pub fn builtin_ids() -> &'static [&'static str] {
        &["gauss2", "logistic5", "gumbel3"]
    }

    pub fn builtin(model_id: &str) -> Option<Self> {
        match model_id {
            "gauss2" => Some(Self::gauss2()),
            "logistic5" => Some(Self::logistic5()),
            "gumbel3" => Some(Self::gumbel3()),
            _ => None,
        }
    }

    /// Parses a tabulated model `{"model_id": .., "grid": [[s, λ₀], ..]}` and
    /// checks the regularity conditions before returning it.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: TabulatedFile = serde_json::from_str(text)?;
        let model = Self::tabulated(file.model_id, &file.grid)?;
        validate_conditions(&model, &ConditionGrid::for_model(&model))?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Option<String> {
        match &*self.shape {
            BaseShape::Tabulated(t) => {
                serde_json::to_string_pretty(&TabulatedFile { model_id: self.model_id.clone(), grid: t.grid() }).ok()
            }
            _ => None,
        }
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn shape(&self) -> &BaseShape {
        &self.shape
    }

    /// `λ₀(s)`.
    pub fn lambda0(&self, s: f64) -> f64 {
        match &*self.shape {
            BaseShape::Gauss2 => 2.0 * (-0.5 * s * s).exp(),
            BaseShape::Logistic5 => {
                let e = (-s.abs()).exp();
                5.0 * e / ((1.0 + e) * (1.0 + e))
            }
            BaseShape::Gumbel3 => 3.0 * (-s - (-s).exp()).exp(),
            BaseShape::Cauchy => 1.0 / (1.0 + s * s),
            BaseShape::Tabulated(t) => t.lambda(s),
        }
    }

    /// `λ₀′(s)`.
    pub fn lambda0_prime(&self, s: f64) -> f64 {
        match &*self.shape {
            BaseShape::Tabulated(t) => t.lambda_prime(s),
            BaseShape::Cauchy => -2.0 * s / ((1.0 + s * s) * (1.0 + s * s)),
            _ => self.lambda0(s) * self.dlog_lambda0(s),
        }
    }

    /// `ln λ₀(s)`, evaluated without underflow where a closed form allows.
    pub fn log_lambda0(&self, s: f64) -> f64 {
        match &*self.shape {
            BaseShape::Gauss2 => std::f64::consts::LN_2 - 0.5 * s * s,
            BaseShape::Logistic5 => {
                let a = s.abs();
                5f64.ln() - a - 2.0 * (-a).exp().ln_1p()
            }
            BaseShape::Gumbel3 => 3f64.ln() - s - (-s).exp(),
            BaseShape::Cauchy => -(s * s).ln_1p(),
            BaseShape::Tabulated(t) => t.log_lambda(s),
        }
    }

    /// `λ₀′(s)/λ₀(s)`.
    pub fn dlog_lambda0(&self, s: f64) -> f64 {
        match &*self.shape {
            BaseShape::Gauss2 => -s,
            BaseShape::Logistic5 => -(0.5 * s).tanh(),
            BaseShape::Gumbel3 => (-s).exp() - 1.0,
            BaseShape::Cauchy => -2.0 * s / (1.0 + s * s),
            BaseShape::Tabulated(t) => t.lambda_prime(s) / t.lambda(s),
        }
    }

    /// `Λ₀(s) = ∫_{-∞}^s λ₀`.
    pub fn cumulative(&self, s: f64) -> f64 {
        match &*self.shape {
            BaseShape::Gauss2 => SQRT_2PI * erfc(-s / SQRT_2),
            BaseShape::Logistic5 => {
                if s >= 0.0 {
                    5.0 / (1.0 + (-s).exp())
                } else {
                    let e = s.exp();
                    5.0 * e / (1.0 + e)
                }
            }
            BaseShape::Gumbel3 => 3.0 * (-(-s).exp()).exp(),
            BaseShape::Cauchy => s.atan() + 0.5 * PI,
            BaseShape::Tabulated(t) => t.cumulative(s),
        }
    }

    /// `Λ₀(∞)`.
    pub fn total(&self) -> f64 {
        match &*self.shape {
            BaseShape::Gauss2 => 2.0 * SQRT_2PI,
            BaseShape::Logistic5 => 5.0,
            BaseShape::Gumbel3 => 3.0,
            BaseShape::Cauchy => PI,
            BaseShape::Tabulated(t) => t.total,
        }
    }

    /// `Λ₀⁻¹(r)` for `r ∈ (0, Λ₀(∞))`; the endpoints map to `∓∞`.
    pub fn inverse_cumulative(&self, r: f64) -> f64 {
        let total = self.total();
        if r <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if r >= total {
            return f64::INFINITY;
        }
        match &*self.shape {
            BaseShape::Gauss2 => {
                let s = -SQRT_2 * erfc_inv(r / SQRT_2PI);
                self.newton_polish(s, r)
            }
            BaseShape::Logistic5 => {
                let p = r / 5.0;
                (p / (1.0 - p)).ln()
            }
            BaseShape::Gumbel3 => -(-((r - 3.0) / 3.0).ln_1p()).ln(),
            BaseShape::Cauchy => (r - 0.5 * PI).tan(),
            BaseShape::Tabulated(t) => match t.inverse_bracket(r) {
                Ok(s) => s,
                Err((lo, hi)) => self.solve_inverse(r, lo, hi),
            },
        }
    }

    fn newton_polish(&self, mut s: f64, r: f64) -> f64 {
        for _ in 0..2 {
            let lam = self.lambda0(s);
            if !(lam > 0.0) {
                break;
            }
            let step = (self.cumulative(s) - r) / lam;
            if !step.is_finite() {
                break;
            }
            s -= step;
        }
        s
    }

    /// Safeguarded Newton iteration for `Λ₀(s) = r` on a bracket.
    fn solve_inverse(&self, r: f64, mut lo: f64, mut hi: f64) -> f64 {
        let mut s = 0.5 * (lo + hi);
        for _ in 0..200 {
            let f = self.cumulative(s) - r;
            if f.abs() <= INVERSE_TOL {
                return s;
            }
            if f < 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            let newton = s - f / self.lambda0(s);
            s = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo <= 4.0 * f64::EPSILON * s.abs().max(1.0) {
                return s;
            }
        }
        s
    }

    /// Generic inverse by bracket expansion and safeguarded Newton; used by
    /// tests as an independent route to the closed forms.
    pub fn inverse_cumulative_numeric(&self, r: f64) -> f64 {
        let (mut lo, mut hi) = (-1.0, 1.0);
        while self.cumulative(lo) > r {
            lo *= 2.0;
        }
        while self.cumulative(hi) < r {
            hi *= 2.0;
        }
        self.solve_inverse(r, lo, hi)
    }

    /// Truncated integration range holding all but `2·SUPPORT_DELTA` of the mass.
    pub fn effective_support(&self) -> (f64, f64) {
        let total = self.total();
        (self.inverse_cumulative(SUPPORT_DELTA * total), self.inverse_cumulative((1.0 - SUPPORT_DELTA) * total))
    }

    /// Effective support split at `0` and at the bulk quartiles, which keeps
    /// the adaptive quadrature from missing narrow peaks.
    pub(crate) fn quadrature_breaks(&self) -> Vec<f64> {
        let (lo, hi) = self.effective_support();
        let total = self.total();
        let mut b = vec![lo, hi, 0.0];
        for q in [0.01, 0.25, 0.5, 0.75, 0.99] {
            b.push(self.inverse_cumulative(q * total));
        }
        b.retain(|x| *x >= lo && *x <= hi);
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }
}

/// `Λ(t) = β·Λ₀((t−α)/β)`.
pub fn family_mean(model: &BaseIntensityModel, params: &ShiftScaleParams, t: f64) -> f64 {
    params.beta * model.cumulative(params.to_base(t))
}

/// `λ₀((t−α)/β)`, the time derivative of [`family_mean`].
pub fn family_intensity(model: &BaseIntensityModel, params: &ShiftScaleParams, t: f64) -> f64 {
    model.lambda0(params.to_base(t))
}

/// Gradient of `(α, β) ↦ β·Λ₀((t−α)/β)` at base coordinate `s`:
/// `(−λ₀(s), Λ₀(s) − s·λ₀(s))`.
pub fn mean_gradient_base(model: &BaseIntensityModel, s: f64) -> [f64; 2] {
    if s == f64::INFINITY {
        return [0.0, model.total()];
    }
    if s == f64::NEG_INFINITY {
        return [0.0, 0.0];
    }
    let lam = model.lambda0(s);
    let slam = if lam == 0.0 { 0.0 } else { s * lam };
    [-lam, model.cumulative(s) - slam]
}

/// `ℓ(s) = −λ₀′(s)·(1, s)`.
pub fn score_vector_base(model: &BaseIntensityModel, s: f64) -> [f64; 2] {
    let d = -model.lambda0_prime(s);
    [d, s * d]
}

/// Range over which [`validate_conditions`] integrates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionGrid {
    /// Integrals run over `[-half_width, half_width]`.
    pub half_width: f64,
    /// Number of equispaced points used for the positivity check.
    pub samples: usize,
}

impl ConditionGrid {
    /// Symmetric range covering the model's effective support.
    pub fn for_model(model: &BaseIntensityModel) -> Self {
        let (lo, hi) = model.effective_support();
        ConditionGrid { half_width: lo.abs().max(hi.abs()), samples: 10_001 }
    }
}

/// Numerical check of positivity and the moment conditions on `λ₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub r1_positive: bool,
    /// `∫ t² λ₀(t) dt`.
    pub c3_second_moment: f64,
    /// `∫ t⁴ |λ₀′(t)| dt`.
    pub c3_fourth_moment_prime: f64,
    /// `∫ |Λ̇₀(s)|² λ₀(s) ds` with `Λ̇₀` from [`mean_gradient_base`].
    pub c4_bound: f64,
    pub all_finite: bool,
}

/// Checks positivity of `λ₀` on the grid and evaluates the moment integrals.
/// An integral whose value moves by more than 1% when the range is doubled
/// is reported as divergent.
pub fn validate_conditions(model: &BaseIntensityModel, grid: &ConditionGrid) -> Result<ConditionReport> {
    let r = grid.half_width;
    if !(r > 0.0) || !r.is_finite() || grid.samples < 2 {
        return Err(ApfError::InvalidParams(format!("bad condition grid {grid:?}")));
    }
    let total = model.total();
    let covered = model.cumulative(r) - model.cumulative(-r);
    if covered < 0.9999 * total {
        return Err(ApfError::InvalidParams(format!(
            "condition grid [-{r}, {r}] holds only {:.6} of the mass",
            covered / total
        )));
    }
    let r1_positive = (0..grid.samples).all(|i| {
        let s = -r + 2.0 * r * i as f64 / (grid.samples - 1) as f64;
        // λ₀ may underflow far in a tail; its logarithm stays finite.
        let v = model.lambda0(s);
        (v > 0.0 || model.log_lambda0(s) > f64::NEG_INFINITY) && v.is_finite()
    });

    type Integrand<'a> = Box<dyn Fn(f64) -> f64 + 'a>;
    let integrals: [(&str, Integrand<'_>); 3] = [
        ("c3_second_moment", Box::new(|t: f64| t * t * model.lambda0(t))),
        ("c3_fourth_moment_prime", Box::new(|t: f64| t.powi(4) * model.lambda0_prime(t).abs())),
        (
            "c4_bound",
            Box::new(|t: f64| {
                let g = mean_gradient_base(model, t);
                (g[0] * g[0] + g[1] * g[1]) * model.lambda0(t)
            }),
        ),
    ];
    let mut values = [0.0; 3];
    let mut diverging = Vec::new();
    for (k, (name, f)) in integrals.iter().enumerate() {
        let over = |w: f64| {
            let breaks = [-w, -r, -1.0, 0.0, 1.0, r, w];
            let mut b: Vec<f64> = breaks.iter().copied().filter(|x| x.abs() <= w).collect();
            b.sort_by(f64::total_cmp);
            b.dedup();
            quadrature::integrate_pieces(f, &b, 1e-13, 1e-11)
        };
        let narrow = over(r);
        let wide = over(2.0 * r);
        values[k] = narrow;
        let finite = narrow.is_finite() && wide.is_finite();
        if !finite || (wide - narrow).abs() > 0.01 * narrow.abs().max(f64::MIN_POSITIVE) {
            diverging.push(name.to_string());
        }
    }
    if !diverging.is_empty() {
        return Err(ApfError::NonFinite(diverging));
    }
    Ok(ConditionReport {
        r1_positive,
        c3_second_moment: values[0],
        c3_fourth_moment_prime: values[1],
        c4_bound: values[2],
        all_finite: true,
    })
}
