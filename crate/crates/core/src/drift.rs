//! Adaptive-windowing change detection over scalar streams, and the pipeline
//! that applies it per feature to the importance values of an explanation
//! stream.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::ExplanationFrame;

#[derive(Debug, Error)]
pub enum DriftError {
    #[error("value {0} is not finite")]
    NonFiniteValue(f64),
    #[error("confidence delta {0} must be in (0, 1)")]
    InvalidDelta(f64),
    #[error("max buckets per level must be at least 1")]
    ZeroBuckets,
    #[error("frame for feature `{feature}` at t = {t} arrived at or before t = {last}")]
    OutOfOrder { feature: String, t: u64, last: u64 },
}

/// Outcome of feeding one value to a detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftSignal {
    None,
    /// Drift confirmed while consuming the value at this position (1-based
    /// count of values fed to the detector).
    DriftAt(u64),
}

/// Which statistical bound decides that two sub-window means differ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CutBound {
    /// Variance-adjusted bound; tighter on low-variance streams.
    #[default]
    VarianceAware,
    /// Plain Hoeffding bound.
    Hoeffding,
}

#[derive(Debug, Clone, Copy)]
struct Bucket {
    sum: f64,
    /// Sum of squared deviations within the bucket.
    variance: f64,
}

/// Adaptive-windowing detector over a scalar stream.
///
/// The current window is kept as an exponential histogram: level `j` holds
/// buckets of `2^j` elements, at most `max_buckets_per_level` per level, with
/// the oldest data at the highest level. After every insert all bucket
/// boundaries are scanned; when the means of the two sub-windows around a
/// boundary differ by at least the confidence bound, the older sub-window is
/// dropped (always a whole number of buckets) and drift is signalled.
#[derive(Debug, Clone)]
pub struct AdwinDetector {
    delta: f64,
    max_buckets_per_level: usize,
    cut_bound: CutBound,
    /// `rows[level]` holds buckets of `2^level` elements, oldest at the front.
    rows: Vec<VecDeque<Bucket>>,
    total_count: u64,
    total_sum: f64,
    /// Sum of squared deviations over the whole window.
    variance_sum: f64,
    items_seen: u64,
}

impl AdwinDetector {
    pub const DEFAULT_DELTA: f64 = 0.002;
    pub const DEFAULT_MAX_BUCKETS: usize = 5;

    pub fn new(delta: f64, max_buckets_per_level: usize) -> Result<Self, DriftError> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(DriftError::InvalidDelta(delta));
        }
        if max_buckets_per_level == 0 {
            return Err(DriftError::ZeroBuckets);
        }
        Ok(Self {
            delta,
            max_buckets_per_level,
            cut_bound: CutBound::default(),
            rows: Vec::new(),
            total_count: 0,
            total_sum: 0.0,
            variance_sum: 0.0,
            items_seen: 0,
        })
    }

    pub fn with_defaults() -> Self {
        Self::new(Self::DEFAULT_DELTA, Self::DEFAULT_MAX_BUCKETS).expect("valid defaults")
    }

    pub fn with_cut_bound(mut self, bound: CutBound) -> Self {
        self.cut_bound = bound;
        self
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Elements currently represented by the window.
    pub fn window_len(&self) -> u64 {
        self.total_count
    }

    /// Values fed to the detector so far.
    pub fn items_seen(&self) -> u64 {
        self.items_seen
    }

    pub fn mean(&self) -> Option<f64> {
        (self.total_count > 0).then(|| self.total_sum / self.total_count as f64)
    }

    /// Population variance of the window.
    pub fn variance(&self) -> Option<f64> {
        (self.total_count > 0).then(|| (self.variance_sum / self.total_count as f64).max(0.0))
    }

    pub fn bucket_count(&self) -> usize {
        self.rows.iter().map(VecDeque::len).sum()
    }

    /// Inserts a value and reports whether the window was cut.
    pub fn update(&mut self, value: f64) -> Result<DriftSignal, DriftError> {
        if !value.is_finite() {
            return Err(DriftError::NonFiniteValue(value));
        }
        self.items_seen += 1;
        self.insert(value);
        let mut dropped = false;
        while let Some(prefix) = self.find_cut() {
            self.drop_oldest_buckets(prefix);
            dropped = true;
        }
        Ok(if dropped {
            DriftSignal::DriftAt(self.items_seen)
        } else {
            DriftSignal::None
        })
    }

    fn insert(&mut self, value: f64) {
        if self.total_count > 0 {
            let w = self.total_count as f64;
            let diff = w * value - self.total_sum;
            self.variance_sum += diff * diff / (w * (w + 1.0));
        }
        self.total_count += 1;
        self.total_sum += value;
        if self.rows.is_empty() {
            self.rows.push(VecDeque::new());
        }
        self.rows[0].push_back(Bucket {
            sum: value,
            variance: 0.0,
        });
        self.compress();
    }

    fn compress(&mut self) {
        let mut level = 0;
        while level < self.rows.len() {
            if self.rows[level].len() > self.max_buckets_per_level {
                let first = self.rows[level].pop_front().expect("level overfull");
                let second = self.rows[level].pop_front().expect("level overfull");
                let n = (1u64 << level) as f64;
                let mean_gap = first.sum / n - second.sum / n;
                let merged = Bucket {
                    sum: first.sum + second.sum,
                    variance: first.variance + second.variance + (n / 2.0) * mean_gap * mean_gap,
                };
                if level + 1 == self.rows.len() {
                    self.rows.push(VecDeque::new());
                }
                self.rows[level + 1].push_back(merged);
            }
            level += 1;
        }
    }

    /// Scans every bucket boundary and returns the largest prefix (in
    /// buckets) whose two sub-windows fail the bound, if any. Dropping the
    /// newest qualifying boundary removes all data older than the change at
    /// once.
    fn find_cut(&self) -> Option<usize> {
        if self.total_count < 2 {
            return None;
        }
        let total = self.total_count as f64;
        let window_variance = (self.variance_sum / total).max(0.0);
        let mut n0 = 0.0;
        let mut sum0 = 0.0;
        let mut buckets_scanned = 0usize;
        let mut cut = None;
        for level in (0..self.rows.len()).rev() {
            let count = (1u64 << level) as f64;
            for bucket in &self.rows[level] {
                n0 += count;
                sum0 += bucket.sum;
                buckets_scanned += 1;
                let n1 = total - n0;
                if n1 < 1.0 {
                    break;
                }
                let mean0 = sum0 / n0;
                let mean1 = (self.total_sum - sum0) / n1;
                if (mean0 - mean1).abs() >= self.epsilon_cut(n0, n1, window_variance, total) {
                    cut = Some(buckets_scanned);
                }
            }
        }
        cut
    }

    fn epsilon_cut(&self, n0: f64, n1: f64, variance: f64, total: f64) -> f64 {
        let m_recip = 1.0 / n0 + 1.0 / n1;
        match self.cut_bound {
            CutBound::VarianceAware => {
                let dd = (2.0 * total.ln() / self.delta).ln();
                (2.0 * m_recip * variance * dd).sqrt() + (2.0 / 3.0) * m_recip * dd
            }
            CutBound::Hoeffding => ((m_recip / 2.0) * (4.0 * total / self.delta).ln()).sqrt(),
        }
    }

    fn drop_oldest_buckets(&mut self, mut prefix: usize) {
        for level in (0..self.rows.len()).rev() {
            let count = 1u64 << level;
            while prefix > 0 {
                let Some(bucket) = self.rows[level].pop_front() else {
                    break;
                };
                self.total_count -= count;
                self.total_sum -= bucket.sum;
                if self.total_count == 0 {
                    self.variance_sum = 0.0;
                } else {
                    let removed = count as f64;
                    let rest = self.total_count as f64;
                    let mean_removed = bucket.sum / removed;
                    let mean_rest = self.total_sum / rest;
                    let gap = mean_removed - mean_rest;
                    self.variance_sum = (self.variance_sum
                        - bucket.variance
                        - removed * rest / (removed + rest) * gap * gap)
                        .max(0.0);
                }
                prefix -= 1;
            }
            if prefix == 0 {
                break;
            }
        }
        while self.rows.last().is_some_and(VecDeque::is_empty) {
            self.rows.pop();
        }
    }
}

/// A drift detection together with the explanation frame that triggered it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftEvent {
    pub t: u64,
    pub feature: String,
    pub frame: ExplanationFrame,
}

/// Feeds each frame's importance into a per-feature detector and, when one
/// signals, emits the triggering frame as the change explanation.
#[derive(Debug, Clone)]
pub struct FiDriftPipeline {
    delta: f64,
    max_buckets_per_level: usize,
    detectors: BTreeMap<String, (AdwinDetector, u64)>,
}

impl FiDriftPipeline {
    pub fn new(delta: f64, max_buckets_per_level: usize) -> Result<Self, DriftError> {
        // validate eagerly with a throwaway detector
        AdwinDetector::new(delta, max_buckets_per_level)?;
        Ok(Self {
            delta,
            max_buckets_per_level,
            detectors: BTreeMap::new(),
        })
    }

    /// Consumes one frame; frames must arrive in strictly increasing time
    /// order per feature.
    pub fn push(&mut self, frame: &ExplanationFrame) -> Result<Option<DriftEvent>, DriftError> {
        let (detector, last_t) = self
            .detectors
            .entry(frame.feature.clone())
            .or_insert_with(|| {
                (
                    AdwinDetector::new(self.delta, self.max_buckets_per_level)
                        .expect("validated at construction"),
                    0,
                )
            });
        if frame.t <= *last_t {
            return Err(DriftError::OutOfOrder {
                feature: frame.feature.clone(),
                t: frame.t,
                last: *last_t,
            });
        }
        *last_t = frame.t;
        match detector.update(frame.importance)? {
            DriftSignal::DriftAt(_) => Ok(Some(DriftEvent {
                t: frame.t,
                feature: frame.feature.clone(),
                frame: frame.clone(),
            })),
            DriftSignal::None => Ok(None),
        }
    }

    pub fn detector(&self, feature: &str) -> Option<&AdwinDetector> {
        self.detectors.get(feature).map(|(d, _)| d)
    }

    pub fn detectors(&self) -> impl Iterator<Item = (&str, &AdwinDetector)> {
        self.detectors.iter().map(|(f, (d, _))| (f.as_str(), d))
    }
}
