//! Streaming partial dependence explanations for online models.
//!
//! The engine keeps one exponentially smoothed partial dependence curve per
//! feature while a black-box model trains on a data stream. Each observation
//! costs exactly `m` model evaluations per feature (one ICE curve), the
//! feature range is tracked by rolling-window sketches, and every step can be
//! condensed into a scalar importance value. Feeding those importance values
//! into an adaptive-windowing detector turns the explanation stream into a
//! drift monitor; a batch Monte-Carlo estimator is included as the static
//! ground truth.

pub mod batch;
pub mod drift;
pub mod engine;
pub mod model;
mod seed;
pub mod storage;
pub mod stream;

pub use batch::{batch_pdp, ice_curve, BatchError, Dataset};
pub use drift::{AdwinDetector, CutBound, DriftError, DriftEvent, DriftSignal, FiDriftPipeline};
pub use engine::{
    debias, eval_points, pdp_importance, update_estimate, update_grid_point, EngineError,
    ExplanationFrame, FeatureExplainer, MultiExplainer, PdpConfig, RangeStrategy,
};
pub use model::{
    sigmoid, FeatureVector, IncrementalModel, ModelError, PredictionFunction, SgdLinear,
    SgdLogistic, StaticModel, StreamRecord,
};
pub use storage::{
    ExtremeValueStore, FrequencyReservoir, RollingMinMax, StorageError, VictimPolicy,
};
pub use stream::{
    parse_type_spec, write_records_csv, ColumnType, CsvSource, DriftSchedule, HyperplaneConcept,
    HyperplaneGenerator, StreamError,
};
