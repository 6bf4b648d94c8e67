//! Simulation of independent inhomogeneous Poisson trajectories and the
//! empirical mean function.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Open01, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ApfError, Result};
use crate::intensity::{BaseIntensityModel, ShiftScaleParams};
use crate::rng;

/// Sorted event times of one process. `X(t)` is the number of events `≤ t`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trajectory {
    events: Vec<f64>,
}

impl Trajectory {
    /// Builds a trajectory, rejecting unsorted or non-finite input.
    pub fn new(events: Vec<f64>) -> Result<Self> {
        if let Some(bad) = events.iter().find(|t| !t.is_finite()) {
            return Err(ApfError::InvalidDataset(format!("non-finite event time {bad}")));
        }
        if events.windows(2).any(|w| w[1] < w[0]) {
            return Err(ApfError::InvalidDataset("event times must be sorted".into()));
        }
        Ok(Trajectory { events })
    }

    /// Sorts the given times.
    pub fn from_unsorted(mut events: Vec<f64>) -> Self {
        events.sort_by(f64::total_cmp);
        Trajectory { events }
    }

    pub fn events(&self) -> &[f64] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// `X(t)`, right-continuous.
    pub fn count_at(&self, t: f64) -> usize {
        self.events.partition_point(|&e| e <= t)
    }
}

/// `n` independent trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub trajectories: Vec<Trajectory>,
    pub model_id: String,
    pub theta_true: Option<ShiftScaleParams>,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    model_id: String,
    theta_true: Option<[f64; 2]>,
    seed: u64,
    n: usize,
    trajectories: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(
        trajectories: Vec<Trajectory>,
        model_id: impl Into<String>,
        theta_true: Option<ShiftScaleParams>,
        seed: u64,
    ) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(ApfError::InvalidDataset("dataset needs at least one trajectory".into()));
        }
        Ok(Dataset { trajectories, model_id: model_id.into(), theta_true, seed })
    }

    /// Convenience constructor from raw (sorted) event lists.
    pub fn from_events(events: Vec<Vec<f64>>) -> Result<Self> {
        let trajectories = events.into_iter().map(Trajectory::new).collect::<Result<Vec<_>>>()?;
        Dataset::new(trajectories, "", None, 0)
    }

    pub fn n(&self) -> usize {
        self.trajectories.len()
    }

    pub fn total_events(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    /// All event times across trajectories, sorted.
    pub fn pooled_events(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.trajectories.iter().flat_map(|t| t.events.iter().copied()).collect();
        all.sort_by(f64::total_cmp);
        all
    }

    /// Every event time mapped through `t ↦ scale·t + shift` (`scale > 0`).
    pub fn transformed(&self, scale: f64, shift: f64) -> Dataset {
        Dataset {
            trajectories: self
                .trajectories
                .iter()
                .map(|t| Trajectory { events: t.events.iter().map(|&e| scale * e + shift).collect() })
                .collect(),
            model_id: self.model_id.clone(),
            theta_true: self
                .theta_true
                .map(|p| ShiftScaleParams { alpha: scale * p.alpha + shift, beta: scale * p.beta }),
            seed: self.seed,
        }
    }

    pub fn to_json(&self) -> String {
        let file = DatasetFile {
            model_id: self.model_id.clone(),
            theta_true: self.theta_true.map(|p| p.as_array()),
            seed: self.seed,
            n: self.n(),
            trajectories: self.trajectories.iter().map(|t| t.events.clone()).collect(),
        };
        serde_json::to_string(&file).expect("dataset serialization is infallible")
    }

    /// Parses and validates a dataset file.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: DatasetFile = serde_json::from_str(text)?;
        if file.n != file.trajectories.len() {
            return Err(ApfError::InvalidDataset(format!(
                "n = {} but {} trajectories present",
                file.n,
                file.trajectories.len()
            )));
        }
        let theta_true = file.theta_true.map(|[a, b]| ShiftScaleParams::new(a, b)).transpose()?;
        let trajectories = file
            .trajectories
            .into_iter()
            .enumerate()
            .map(|(j, ev)| Trajectory::new(ev).map_err(|e| ApfError::InvalidDataset(format!("trajectory {j}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(trajectories, file.model_id, theta_true, file.seed)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// One trajectory with mean `β·Λ₀((t−α)/β)`: a Poisson count with mean
/// `β·Λ₀(∞)`, then each event placed at `α + β·Λ₀⁻¹(U·Λ₀(∞))`.
pub fn sample_trajectory<R: Rng + ?Sized>(
    model: &BaseIntensityModel,
    params: &ShiftScaleParams,
    rng: &mut R,
) -> Trajectory {
    let total = model.total();
    let mean = params.beta * total;
    let count = Poisson::new(mean).expect("positive finite Poisson mean").sample(rng) as usize;
    let events = (0..count)
        .map(|_| {
            let u: f64 = Open01.sample(rng);
            params.alpha + params.beta * model.inverse_cumulative(u * total)
        })
        .collect();
    Trajectory::from_unsorted(events)
}

/// `n` trajectories; trajectory `j` draws from [`rng::substream`]`(seed, j)`,
/// so the result does not depend on the thread count.
pub fn sample_dataset(model: &BaseIntensityModel, params: &ShiftScaleParams, n: usize, seed: u64) -> Result<Dataset> {
    params.validate()?;
    if n == 0 {
        return Err(ApfError::InvalidParams("n must be at least 1".into()));
    }
    let trajectories =
        (0..n as u64).into_par_iter().map(|j| sample_trajectory(model, params, &mut rng::substream(seed, j))).collect();
    Dataset::new(trajectories, model.model_id(), Some(*params), seed)
}

/// `Λ̂ₙ(t) = (1/n) Σⱼ Xⱼ(t)`.
pub fn empirical_mean(dataset: &Dataset, t: f64) -> f64 {
    let total: usize = dataset.trajectories.iter().map(|tr| tr.count_at(t)).sum();
    total as f64 / dataset.n() as f64
}
