//! Incremental partial dependence curves.
//!
//! Each feature keeps `m` grid slots. Every observation produces one ICE
//! curve (the model probed at `m` equidistant evaluation points inside the
//! current feature range) and both the per-slot estimates and the per-slot
//! grid coordinates are folded in with an exponential moving average. The
//! published curve divides both by `1 - (1 - alpha)^t` to remove the
//! zero-initialization bias, and is condensed into a scalar importance value
//! (the standard deviation of the curve).
//!
//! The feature range is read from a rolling sketch *before* the sketch sees
//! the current observation, so a step's evaluation range never includes its
//! own feature value.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{FeatureVector, ModelError, PredictionFunction};
use crate::seed;
use crate::storage::{FrequencyReservoir, RollingMinMax, StorageError, VictimPolicy};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("smoothing parameter {0} must be in (0, 1)")]
    InvalidAlpha(f64),
    #[error("grid size {0} must be at least 2")]
    InvalidGridSize(usize),
    #[error("quantile bounds ({low}, {high}) must satisfy 0 <= low < high <= 1")]
    InvalidQuantileBounds { low: f64, high: f64 },
    #[error("evaluation range [{min}, {max}] is not a finite interval")]
    InvalidRange { min: f64, max: f64 },
    #[error("value {0} is not finite")]
    NonFiniteValue(f64),
    #[error("debiasing is undefined at t = 0")]
    UndefinedDebias,
    #[error("observation does not contain feature `{0}`")]
    MissingFeature(String),
    #[error("duplicate explainer for feature `{0}`")]
    DuplicateFeature(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Storage(#[from] StorageError),
}

/// How the current feature range is obtained from the stream history.
#[derive(Debug, Clone, PartialEq)]
pub enum RangeStrategy {
    /// Exact extremes over a sliding window of the given length.
    MinMax { window: u64 },
    /// Quantile bounds computed from a skip-probability reservoir covering an
    /// effective window of `capacity / entrance_probability` observations.
    Quantile {
        q_low: f64,
        q_high: f64,
        capacity: usize,
        entrance_probability: f64,
    },
}

impl Default for RangeStrategy {
    /// Q05..Q95 bounds over an effective window of 2000 observations.
    fn default() -> Self {
        RangeStrategy::Quantile {
            q_low: 0.05,
            q_high: 0.95,
            capacity: 100,
            entrance_probability: 0.05,
        }
    }
}

/// Parameters of one incremental PDP.
#[derive(Debug, Clone, PartialEq)]
pub struct PdpConfig {
    alpha: f64,
    grid_size: usize,
    range_strategy: RangeStrategy,
    seed: u64,
}

impl PdpConfig {
    pub fn new(
        alpha: f64,
        grid_size: usize,
        range_strategy: RangeStrategy,
        seed: u64,
    ) -> Result<Self, EngineError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(EngineError::InvalidAlpha(alpha));
        }
        if grid_size < 2 {
            return Err(EngineError::InvalidGridSize(grid_size));
        }
        if let RangeStrategy::Quantile { q_low, q_high, .. } = &range_strategy {
            if !(*q_low >= 0.0 && q_low < q_high && *q_high <= 1.0) {
                return Err(EngineError::InvalidQuantileBounds {
                    low: *q_low,
                    high: *q_high,
                });
            }
        }
        Ok(Self {
            alpha,
            grid_size,
            range_strategy,
            seed,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn range_strategy(&self) -> &RangeStrategy {
        &self.range_strategy
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// One time step of a feature's debiased incremental PDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationFrame {
    /// Stream position of the observation that produced this frame (1-based).
    pub t: u64,
    pub feature: String,
    /// Debiased grid coordinates, non-decreasing.
    pub grid: Vec<f64>,
    /// Debiased partial dependence estimates, one per grid coordinate.
    pub estimates: Vec<f64>,
    /// Standard deviation of `estimates`.
    pub importance: f64,
    pub eval_min: f64,
    pub eval_max: f64,
}

/// Equidistant model evaluation points spanning `[range_min, range_max]`.
pub fn eval_points(
    range_min: f64,
    range_max: f64,
    grid_size: usize,
) -> Result<Vec<f64>, EngineError> {
    if grid_size < 2 {
        return Err(EngineError::InvalidGridSize(grid_size));
    }
    if !range_min.is_finite() || !range_max.is_finite() || range_min > range_max {
        return Err(EngineError::InvalidRange {
            min: range_min,
            max: range_max,
        });
    }
    let span = range_max - range_min;
    let last = grid_size - 1;
    Ok((0..grid_size)
        .map(|k| {
            if k == last {
                range_max
            } else {
                range_min + (k as f64 / last as f64) * span
            }
        })
        .collect())
}

fn ema(prev: f64, target: f64, alpha: f64) -> Result<f64, EngineError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EngineError::InvalidAlpha(alpha));
    }
    if !prev.is_finite() {
        return Err(EngineError::NonFiniteValue(prev));
    }
    if !target.is_finite() {
        return Err(EngineError::NonFiniteValue(target));
    }
    Ok((1.0 - alpha) * prev + alpha * target)
}

/// Exponential moving average step for a grid slot's PD estimate.
pub fn update_estimate(prev: f64, ice_value: f64, alpha: f64) -> Result<f64, EngineError> {
    ema(prev, ice_value, alpha)
}

/// Exponential moving average step for a grid slot's coordinate.
pub fn update_grid_point(prev: f64, eval_point: f64, alpha: f64) -> Result<f64, EngineError> {
    ema(prev, eval_point, alpha)
}

/// Removes the zero-initialization bias after `t` smoothing updates.
pub fn debias(value: f64, alpha: f64, t: u64) -> Result<f64, EngineError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EngineError::InvalidAlpha(alpha));
    }
    if t == 0 {
        return Err(EngineError::UndefinedDebias);
    }
    Ok(value / (1.0 - (1.0 - alpha).powf(t as f64)))
}

/// Condenses a PD curve into a scalar: the sample standard deviation of the
/// estimates around the curve mean.
pub fn pdp_importance(estimates: &[f64]) -> Result<f64, EngineError> {
    if estimates.len() < 2 {
        return Err(EngineError::InvalidGridSize(estimates.len()));
    }
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let ss = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>();
    Ok((ss / (n - 1.0)).sqrt())
}

#[derive(Debug, Clone)]
enum RangeStore {
    MinMax(RollingMinMax),
    Quantile {
        reservoir: FrequencyReservoir,
        q_low: f64,
        q_high: f64,
    },
}

impl RangeStore {
    fn from_strategy(strategy: &RangeStrategy, seed: u64) -> Result<Self, EngineError> {
        match strategy {
            RangeStrategy::MinMax { window } => Ok(RangeStore::MinMax(RollingMinMax::new(*window)?)),
            RangeStrategy::Quantile {
                q_low,
                q_high,
                capacity,
                entrance_probability,
            } => Ok(RangeStore::Quantile {
                reservoir: FrequencyReservoir::new(
                    *capacity,
                    *entrance_probability,
                    VictimPolicy::OldestFirst,
                    seed,
                )?,
                q_low: *q_low,
                q_high: *q_high,
            }),
        }
    }

    fn update(&mut self, value: f64, t: u64) -> Result<(), StorageError> {
        match self {
            RangeStore::MinMax(store) => store.update(value, t),
            RangeStore::Quantile { reservoir, .. } => reservoir.update(value),
        }
    }

    fn current_range(&self) -> Result<(f64, f64), StorageError> {
        match self {
            RangeStore::MinMax(store) => Ok((store.min()?, store.max()?)),
            RangeStore::Quantile {
                reservoir,
                q_low,
                q_high,
            } => Ok((reservoir.quantile(*q_low)?, reservoir.quantile(*q_high)?)),
        }
    }

    /// Whether the store has seen enough data to provide a usable range.
    fn ready(&self) -> bool {
        match self {
            RangeStore::MinMax(store) => match (store.min(), store.max()) {
                (Ok(min), Ok(max)) => min < max,
                _ => false,
            },
            RangeStore::Quantile {
                reservoir,
                q_low,
                q_high,
            } => {
                let needed = (1.0 / (q_high - q_low)).ceil() as usize;
                reservoir.len() >= needed.max(10)
            }
        }
    }

    fn stored_values(&self) -> usize {
        match self {
            RangeStore::MinMax(store) => store.stored_entries(),
            RangeStore::Quantile { reservoir, .. } => reservoir.len(),
        }
    }
}

/// Maintains one feature's incremental PDP over a stream.
///
/// Frames are withheld while the range sketch warms up: the min/max strategy
/// needs two distinct values, the quantile strategy needs
/// `max(10, ceil(1 / (q_high - q_low)))` stored values. Warm-up observations
/// still feed the sketch. Once warmed up the explainer stays warmed up, so a
/// later degenerate range (all window values equal) still emits a frame with
/// collapsed evaluation points.
#[derive(Debug, Clone)]
pub struct FeatureExplainer {
    feature: String,
    config: PdpConfig,
    raw_grid: Vec<f64>,
    raw_estimates: Vec<f64>,
    /// Smoothing updates performed so far; the debiasing clock.
    step: u64,
    /// Observations consumed, including warm-up.
    observations: u64,
    range_store: RangeStore,
    warmed_up: bool,
}

impl FeatureExplainer {
    pub fn new(feature: impl Into<String>, config: PdpConfig) -> Result<Self, EngineError> {
        let range_store = RangeStore::from_strategy(config.range_strategy(), config.seed())?;
        let m = config.grid_size();
        Ok(Self {
            feature: feature.into(),
            config,
            raw_grid: vec![0.0; m],
            raw_estimates: vec![0.0; m],
            step: 0,
            observations: 0,
            range_store,
            warmed_up: false,
        })
    }

    pub fn feature(&self) -> &str {
        &self.feature
    }

    pub fn config(&self) -> &PdpConfig {
        &self.config
    }

    /// Smoothing updates performed so far (excludes warm-up observations).
    pub fn step(&self) -> u64 {
        self.step
    }

    /// Observations consumed, including warm-up.
    pub fn observations(&self) -> u64 {
        self.observations
    }

    pub fn is_warmed_up(&self) -> bool {
        self.warmed_up
    }

    /// Biased (raw) grid coordinates before debiasing.
    pub fn raw_grid(&self) -> &[f64] {
        &self.raw_grid
    }

    /// Biased (raw) PD estimates before debiasing.
    pub fn raw_estimates(&self) -> &[f64] {
        &self.raw_estimates
    }

    /// Values currently held by the range sketch.
    pub fn range_values_stored(&self) -> usize {
        self.range_store.stored_values()
    }

    /// Processes one observation against the current model.
    ///
    /// The evaluation range is read before the sketch sees this observation's
    /// feature value. Probes overwrite only this explainer's feature; every
    /// other coordinate keeps the observed value. Returns `None` during
    /// warm-up.
    pub fn explain_one<M>(
        &mut self,
        model: &M,
        x: &FeatureVector,
    ) -> Result<Option<ExplanationFrame>, EngineError>
    where
        M: PredictionFunction + ?Sized,
    {
        let value = x
            .get(&self.feature)
            .ok_or_else(|| EngineError::MissingFeature(self.feature.clone()))?;
        self.observations += 1;
        if !self.warmed_up && self.range_store.ready() {
            self.warmed_up = true;
        }

        let frame = if self.warmed_up {
            let (range_min, range_max) = self.range_store.current_range()?;
            let points = eval_points(range_min, range_max, self.config.grid_size())?;
            let alpha = self.config.alpha();
            let mut probe = x.clone();
            for (k, &point) in points.iter().enumerate() {
                self.raw_grid[k] = update_grid_point(self.raw_grid[k], point, alpha)?;
                probe.set(&self.feature, point)?;
                let ice = model.predict(&probe)?;
                if !ice.is_finite() {
                    return Err(EngineError::NonFiniteValue(ice));
                }
                self.raw_estimates[k] = update_estimate(self.raw_estimates[k], ice, alpha)?;
            }
            self.step += 1;

            let factor = 1.0 - (1.0 - alpha).powf(self.step as f64);
            let grid: Vec<f64> = self.raw_grid.iter().map(|g| g / factor).collect();
            let estimates: Vec<f64> = self.raw_estimates.iter().map(|e| e / factor).collect();
            let importance = pdp_importance(&estimates)?;
            Some(ExplanationFrame {
                t: self.observations,
                feature: self.feature.clone(),
                grid,
                estimates,
                importance,
                eval_min: range_min,
                eval_max: range_max,
            })
        } else {
            None
        };

        self.range_store.update(value, self.observations)?;
        Ok(frame)
    }
}

/// Runs one explainer per feature in lockstep over a stream.
#[derive(Debug, Clone)]
pub struct MultiExplainer {
    explainers: Vec<FeatureExplainer>,
}

impl MultiExplainer {
    pub fn new(explainers: Vec<FeatureExplainer>) -> Result<Self, EngineError> {
        for (i, ex) in explainers.iter().enumerate() {
            if explainers[..i].iter().any(|e| e.feature() == ex.feature()) {
                return Err(EngineError::DuplicateFeature(ex.feature().to_owned()));
            }
        }
        Ok(Self { explainers })
    }

    /// One explainer per feature, each with a distinct sketch seed derived
    /// from the base config's seed.
    pub fn with_config<S: AsRef<str>>(
        features: &[S],
        config: &PdpConfig,
    ) -> Result<Self, EngineError> {
        let pairs: Vec<(&str, PdpConfig)> = features
            .iter()
            .map(|f| (f.as_ref(), config.clone()))
            .collect();
        Self::with_feature_configs(pairs)
    }

    /// One explainer per `(feature, config)` pair; each feature's sketch seed
    /// is derived from its own config's seed and its position.
    pub fn with_feature_configs<S: AsRef<str>>(
        configs: impl IntoIterator<Item = (S, PdpConfig)>,
    ) -> Result<Self, EngineError> {
        let explainers = configs
            .into_iter()
            .enumerate()
            .map(|(i, (feature, config))| {
                let seed = seed::derive(config.seed(), i as u64);
                FeatureExplainer::new(feature.as_ref(), config.with_seed(seed))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(explainers)
    }

    /// Explains one observation for every configured feature; warm-up
    /// features are absent from the result.
    pub fn observe<M>(
        &mut self,
        model: &M,
        x: &FeatureVector,
    ) -> Result<BTreeMap<String, ExplanationFrame>, EngineError>
    where
        M: PredictionFunction + ?Sized,
    {
        let mut frames = BTreeMap::new();
        for explainer in &mut self.explainers {
            if let Some(frame) = explainer.explain_one(model, x)? {
                frames.insert(frame.feature.clone(), frame);
            }
        }
        Ok(frames)
    }

    pub fn explainers(&self) -> &[FeatureExplainer] {
        &self.explainers
    }

    pub fn features(&self) -> impl Iterator<Item = &str> {
        self.explainers.iter().map(FeatureExplainer::feature)
    }
}
