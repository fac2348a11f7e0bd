//! Prediction and incremental-learning contracts, two built-in online
//! learners, and a static-model wrapper.
//!
//! Classifiers expose the probability of class 1 as their output; regressors
//! the raw prediction. Both built-in learners fix their feature schema at
//! construction and reject inputs that do not cover it exactly.

use indexmap::IndexMap;
use thiserror::Error;

/// Errors raised by feature vectors and models.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("feature `{0}` is not part of the schema")]
    UnknownFeature(String),
    #[error("feature `{0}` is missing from the input")]
    MissingFeature(String),
    #[error("feature `{name}` has non-finite value {value}")]
    NonFiniteValue { name: String, value: f64 },
    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),
    #[error("label {0} is not a valid binary label (expected 0 or 1)")]
    InvalidLabel(f64),
    #[error("target value {0} is not finite")]
    NonFiniteTarget(f64),
    #[error("model schema is empty")]
    EmptySchema,
}

/// An observation's named feature values, in a fixed insertion order.
///
/// Names are unique and all values are finite.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureVector {
    values: IndexMap<String, f64>,
}

impl FeatureVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<S, I>(pairs: I) -> Result<Self, ModelError>
    where
        S: Into<String>,
        I: IntoIterator<Item = (S, f64)>,
    {
        let mut fv = Self::new();
        for (name, value) in pairs {
            fv.insert(name, value)?;
        }
        Ok(fv)
    }

    /// Adds a new feature; rejects duplicates and non-finite values.
    pub fn insert(&mut self, name: impl Into<String>, value: f64) -> Result<(), ModelError> {
        let name = name.into();
        if !value.is_finite() {
            return Err(ModelError::NonFiniteValue { name, value });
        }
        if self.values.contains_key(&name) {
            return Err(ModelError::DuplicateFeature(name));
        }
        self.values.insert(name, value);
        Ok(())
    }

    /// Overwrites the value of an existing feature.
    pub fn set(&mut self, name: &str, value: f64) -> Result<(), ModelError> {
        if !value.is_finite() {
            return Err(ModelError::NonFiniteValue {
                name: name.to_owned(),
                value,
            });
        }
        match self.values.get_mut(name) {
            Some(slot) => {
                *slot = value;
                Ok(())
            }
            None => Err(ModelError::UnknownFeature(name.to_owned())),
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.values.iter().map(|(name, value)| (name.as_str(), *value))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One stream observation: features, target, and stream position.
///
/// `t` is strictly increasing within a stream; classification targets are
/// encoded as 0/1.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamRecord {
    pub x: FeatureVector,
    pub y: f64,
    pub t: u64,
}

/// A black-box prediction function.
///
/// Predictions are deterministic between learning updates: two calls with
/// equal input and no interleaved `learn_one` return equal output.
pub trait PredictionFunction {
    fn predict(&self, x: &FeatureVector) -> Result<f64, ModelError>;
}

/// A model that learns from exactly one observation per call.
///
/// Instances are single-writer: callers serialize `learn_one` externally.
pub trait IncrementalModel: PredictionFunction {
    fn learn_one(&mut self, x: &FeatureVector, y: f64) -> Result<(), ModelError>;
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn validate_schema(schema: Vec<String>) -> Result<Vec<String>, ModelError> {
    if schema.is_empty() {
        return Err(ModelError::EmptySchema);
    }
    for (i, name) in schema.iter().enumerate() {
        if schema[..i].contains(name) {
            return Err(ModelError::DuplicateFeature(name.clone()));
        }
    }
    Ok(schema)
}

fn linear_score(
    schema: &[String],
    weights: &[f64],
    bias: f64,
    x: &FeatureVector,
) -> Result<f64, ModelError> {
    let mut z = bias;
    for (name, w) in schema.iter().zip(weights) {
        let v = x
            .get(name)
            .ok_or_else(|| ModelError::MissingFeature(name.clone()))?;
        z += w * v;
    }
    if x.len() != schema.len() {
        let unknown = x
            .names()
            .find(|n| !schema.iter().any(|s| s == n))
            .unwrap_or("")
            .to_owned();
        return Err(ModelError::UnknownFeature(unknown));
    }
    Ok(z)
}

fn sgd_step(
    schema: &[String],
    weights: &mut [f64],
    bias: &mut f64,
    learning_rate: f64,
    x: &FeatureVector,
    residual: f64,
) {
    for (name, w) in schema.iter().zip(weights.iter_mut()) {
        // linear_score already checked coverage
        let v = x.get(name).expect("schema coverage checked");
        *w -= learning_rate * residual * v;
    }
    *bias -= learning_rate * residual;
}

pub const DEFAULT_LEARNING_RATE: f64 = 0.01;

/// Online logistic regression trained by one gradient step per observation.
#[derive(Debug, Clone)]
pub struct SgdLogistic {
    schema: Vec<String>,
    weights: Vec<f64>,
    bias: f64,
    learning_rate: f64,
}

impl SgdLogistic {
    pub fn new<S: Into<String>>(schema: impl IntoIterator<Item = S>) -> Result<Self, ModelError> {
        Self::with_learning_rate(schema, DEFAULT_LEARNING_RATE)
    }

    pub fn with_learning_rate<S: Into<String>>(
        schema: impl IntoIterator<Item = S>,
        learning_rate: f64,
    ) -> Result<Self, ModelError> {
        let schema = validate_schema(schema.into_iter().map(Into::into).collect())?;
        let weights = vec![0.0; schema.len()];
        Ok(Self {
            schema,
            weights,
            bias: 0.0,
            learning_rate,
        })
    }

    pub fn schema(&self) -> &[String] {
        &self.schema
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }
}

impl PredictionFunction for SgdLogistic {
    fn predict(&self, x: &FeatureVector) -> Result<f64, ModelError> {
        linear_score(&self.schema, &self.weights, self.bias, x).map(sigmoid)
    }
}

impl IncrementalModel for SgdLogistic {
    fn learn_one(&mut self, x: &FeatureVector, y: f64) -> Result<(), ModelError> {
        if y != 0.0 && y != 1.0 {
            return Err(ModelError::InvalidLabel(y));
        }
        let p = self.predict(x)?;
        sgd_step(
            &self.schema,
            &mut self.weights,
            &mut self.bias,
            self.learning_rate,
            x,
            p - y,
        );
        Ok(())
    }
}

/// Online linear regression under squared loss, same update shape as the
/// logistic learner.
#[derive(Debug, Clone)]
pub struct SgdLinear {
    schema: Vec<String>,
    weights: Vec<f64>,
    bias: f64,
    learning_rate: f64,
}

impl SgdLinear {
    pub fn new<S: Into<String>>(schema: impl IntoIterator<Item = S>) -> Result<Self, ModelError> {
        Self::with_learning_rate(schema, DEFAULT_LEARNING_RATE)
    }

    pub fn with_learning_rate<S: Into<String>>(
        schema: impl IntoIterator<Item = S>,
        learning_rate: f64,
    ) -> Result<Self, ModelError> {
        let schema = validate_schema(schema.into_iter().map(Into::into).collect())?;
        let weights = vec![0.0; schema.len()];
        Ok(Self {
            schema,
            weights,
            bias: 0.0,
            learning_rate,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }
}

impl PredictionFunction for SgdLinear {
    fn predict(&self, x: &FeatureVector) -> Result<f64, ModelError> {
        linear_score(&self.schema, &self.weights, self.bias, x)
    }
}

impl IncrementalModel for SgdLinear {
    fn learn_one(&mut self, x: &FeatureVector, y: f64) -> Result<(), ModelError> {
        if !y.is_finite() {
            return Err(ModelError::NonFiniteTarget(y));
        }
        let p = self.predict(x)?;
        sgd_step(
            &self.schema,
            &mut self.weights,
            &mut self.bias,
            self.learning_rate,
            x,
            p - y,
        );
        Ok(())
    }
}

/// Wraps a fixed function as a model; learning is a no-op.
#[derive(Clone)]
pub struct StaticModel<F> {
    func: F,
}

impl<F: Fn(&FeatureVector) -> f64> StaticModel<F> {
    pub fn from_fn(func: F) -> Self {
        Self { func }
    }
}

impl<F: Fn(&FeatureVector) -> f64> PredictionFunction for StaticModel<F> {
    fn predict(&self, x: &FeatureVector) -> Result<f64, ModelError> {
        Ok((self.func)(x))
    }
}

impl<F: Fn(&FeatureVector) -> f64> IncrementalModel for StaticModel<F> {
    fn learn_one(&mut self, _x: &FeatureVector, _y: f64) -> Result<(), ModelError> {
        Ok(())
    }
}
