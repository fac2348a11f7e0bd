//! Batch partial dependence over a fixed dataset.
//!
//! This is the static ground truth the streaming engine is checked against:
//! the Monte-Carlo PD estimate averages the model over all rows with the
//! explained feature overwritten by each grid value, and an ICE curve is one
//! row's term of that average.

use thiserror::Error;

use crate::model::{FeatureVector, ModelError, PredictionFunction};

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("feature `{0}` is not in the schema")]
    UnknownFeature(String),
    #[error("grid is empty")]
    EmptyGrid,
    #[error("record {index} does not match the dataset schema")]
    SchemaMismatch { index: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// An in-memory dataset whose records share one ordered feature schema.
#[derive(Debug, Clone)]
pub struct Dataset {
    schema: Vec<String>,
    records: Vec<FeatureVector>,
}

impl Dataset {
    pub fn new(records: Vec<FeatureVector>) -> Result<Self, BatchError> {
        let first = records.first().ok_or(BatchError::EmptyDataset)?;
        let schema: Vec<String> = first.names().map(str::to_owned).collect();
        for (index, record) in records.iter().enumerate() {
            if record.len() != schema.len()
                || !record.names().zip(&schema).all(|(a, b)| a == b)
            {
                return Err(BatchError::SchemaMismatch { index });
            }
        }
        Ok(Self { schema, records })
    }

    pub fn schema(&self) -> &[String] {
        &self.schema
    }

    pub fn records(&self) -> &[FeatureVector] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Minimum and maximum of a feature across all records.
    pub fn feature_range(&self, feature: &str) -> Result<(f64, f64), BatchError> {
        if !self.schema.iter().any(|s| s == feature) {
            return Err(BatchError::UnknownFeature(feature.to_owned()));
        }
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for record in &self.records {
            let v = record.get(feature).expect("schema checked");
            min = min.min(v);
            max = max.max(v);
        }
        Ok((min, max))
    }
}

/// Monte-Carlo partial dependence: for each grid value, the model output
/// averaged over every dataset row with the feature overwritten.
pub fn batch_pdp<M>(
    model: &M,
    data: &Dataset,
    feature: &str,
    grid: &[f64],
) -> Result<Vec<f64>, BatchError>
where
    M: PredictionFunction + ?Sized,
{
    if grid.is_empty() {
        return Err(BatchError::EmptyGrid);
    }
    if !data.schema().iter().any(|s| s == feature) {
        return Err(BatchError::UnknownFeature(feature.to_owned()));
    }
    let mut sums = vec![0.0; grid.len()];
    for record in data.records() {
        let mut probe = record.clone();
        for (k, &v) in grid.iter().enumerate() {
            probe.set(feature, v)?;
            sums[k] += model.predict(&probe)?;
        }
    }
    let n = data.len() as f64;
    for s in &mut sums {
        *s /= n;
    }
    Ok(sums)
}

/// One observation's trajectory as the feature sweeps the grid.
pub fn ice_curve<M>(
    model: &M,
    x: &FeatureVector,
    feature: &str,
    grid: &[f64],
) -> Result<Vec<f64>, BatchError>
where
    M: PredictionFunction + ?Sized,
{
    if grid.is_empty() {
        return Err(BatchError::EmptyGrid);
    }
    if x.get(feature).is_none() {
        return Err(BatchError::UnknownFeature(feature.to_owned()));
    }
    let mut probe = x.clone();
    let mut out = Vec::with_capacity(grid.len());
    for &v in grid {
        probe.set(feature, v)?;
        out.push(model.predict(&probe)?);
    }
    Ok(out)
}
