//! Rolling-window sketches: a monotonic-pruning store for window extremes
//! and a fixed-capacity skip-probability reservoir for rolling quantiles.

use std::collections::VecDeque;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("value {0} is not finite")]
    NonFiniteValue(f64),
    #[error("store is empty")]
    Empty,
    #[error("update at t = {t} is not after the previous update at t = {last}")]
    NonMonotonicTime { t: u64, last: u64 },
    #[error("quantile {0} is outside [0, 1]")]
    InvalidQuantile(f64),
    #[error("window size must be at least 1")]
    ZeroWindow,
    #[error("capacity must be at least 1")]
    ZeroCapacity,
    #[error("entrance probability {0} is outside (0, 1]")]
    InvalidEntranceProbability(f64),
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    value: f64,
    inserted_at: u64,
}

/// Sliding-window maximum with monotonic pruning.
///
/// Entries stay strictly decreasing in value from front to back, so the front
/// entry is the current window maximum. An incoming value prunes every stored
/// value less than or equal to it; equal values therefore keep the newest
/// timestamp. Only strictly decreasing input fills the whole window.
#[derive(Debug, Clone)]
pub struct ExtremeValueStore {
    window: u64,
    entries: VecDeque<Entry>,
    last_t: Option<u64>,
}

impl ExtremeValueStore {
    pub fn new(window_size: u64) -> Result<Self, StorageError> {
        if window_size == 0 {
            return Err(StorageError::ZeroWindow);
        }
        Ok(Self {
            window: window_size,
            entries: VecDeque::new(),
            last_t: None,
        })
    }

    pub fn window_size(&self) -> u64 {
        self.window
    }

    /// Inserts the value observed at time `t`. Times must be strictly
    /// increasing across calls.
    pub fn update(&mut self, value: f64, t: u64) -> Result<(), StorageError> {
        if !value.is_finite() {
            return Err(StorageError::NonFiniteValue(value));
        }
        if let Some(last) = self.last_t {
            if t <= last {
                return Err(StorageError::NonMonotonicTime { t, last });
            }
        }
        self.last_t = Some(t);
        while self
            .entries
            .front()
            .is_some_and(|e| t - e.inserted_at >= self.window)
        {
            self.entries.pop_front();
        }
        while self.entries.back().is_some_and(|e| e.value <= value) {
            self.entries.pop_back();
        }
        self.entries.push_back(Entry {
            value,
            inserted_at: t,
        });
        Ok(())
    }

    /// Current maximum over the trailing window, as of the last update.
    pub fn query_max(&self) -> Result<f64, StorageError> {
        self.entries
            .front()
            .map(|e| e.value)
            .ok_or(StorageError::Empty)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stored values from front (current max) to back (most recent).
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.value)
    }
}

/// Rolling minimum and maximum over the same window, the minimum obtained
/// from a twin store fed negated values.
#[derive(Debug, Clone)]
pub struct RollingMinMax {
    max_store: ExtremeValueStore,
    negated_min_store: ExtremeValueStore,
}

impl RollingMinMax {
    pub fn new(window_size: u64) -> Result<Self, StorageError> {
        Ok(Self {
            max_store: ExtremeValueStore::new(window_size)?,
            negated_min_store: ExtremeValueStore::new(window_size)?,
        })
    }

    pub fn update(&mut self, value: f64, t: u64) -> Result<(), StorageError> {
        if !value.is_finite() {
            return Err(StorageError::NonFiniteValue(value));
        }
        self.max_store.update(value, t)?;
        self.negated_min_store.update(-value, t)
    }

    pub fn max(&self) -> Result<f64, StorageError> {
        self.max_store.query_max()
    }

    pub fn min(&self) -> Result<f64, StorageError> {
        self.negated_min_store.query_max().map(|v| -v)
    }

    pub fn is_empty(&self) -> bool {
        self.max_store.is_empty()
    }

    /// Total entries held by both twin stores.
    pub fn stored_entries(&self) -> usize {
        self.max_store.len() + self.negated_min_store.len()
    }
}

/// How a full reservoir picks the slot to evict when a replacement fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VictimPolicy {
    /// Deterministically evict the slot stored the longest.
    #[default]
    OldestFirst,
    /// Evict a slot chosen uniformly at random.
    UniformRandom,
}

/// Fixed-capacity reservoir with a skip probability for new observations.
///
/// With capacity `L` and entrance probability `p`, the stored values cover an
/// effective window of `L / p` recent observations. While not yet full, every
/// observation is appended; afterwards a replacement fires with probability
/// `p` and the victim is chosen by the configured policy.
#[derive(Debug, Clone)]
pub struct FrequencyReservoir {
    capacity: usize,
    entrance_probability: f64,
    policy: VictimPolicy,
    slots: VecDeque<f64>,
    rng: ChaCha12Rng,
}

impl FrequencyReservoir {
    pub fn new(
        capacity: usize,
        entrance_probability: f64,
        policy: VictimPolicy,
        seed: u64,
    ) -> Result<Self, StorageError> {
        if capacity == 0 {
            return Err(StorageError::ZeroCapacity);
        }
        if !(entrance_probability > 0.0 && entrance_probability <= 1.0) {
            return Err(StorageError::InvalidEntranceProbability(
                entrance_probability,
            ));
        }
        Ok(Self {
            capacity,
            entrance_probability,
            policy,
            slots: VecDeque::with_capacity(capacity),
            rng: ChaCha12Rng::seed_from_u64(seed),
        })
    }

    pub fn update(&mut self, value: f64) -> Result<(), StorageError> {
        if !value.is_finite() {
            return Err(StorageError::NonFiniteValue(value));
        }
        if self.slots.len() < self.capacity {
            self.slots.push_back(value);
            return Ok(());
        }
        let v: f64 = self.rng.random();
        if v <= self.entrance_probability {
            let victim = match self.policy {
                VictimPolicy::OldestFirst => 0,
                VictimPolicy::UniformRandom => self.rng.random_range(0..self.slots.len()),
            };
            self.slots.remove(victim);
            self.slots.push_back(value);
        }
        Ok(())
    }

    /// Empirical quantile of the stored slots by the nearest-rank rule.
    pub fn quantile(&self, q: f64) -> Result<f64, StorageError> {
        if !(0.0..=1.0).contains(&q) {
            return Err(StorageError::InvalidQuantile(q));
        }
        if self.slots.is_empty() {
            return Err(StorageError::Empty);
        }
        let mut sorted: Vec<f64> = self.slots.iter().copied().collect();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
        Ok(sorted[rank - 1])
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn entrance_probability(&self) -> f64 {
        self.entrance_probability
    }

    /// Expected recency span covered by the stored values.
    pub fn effective_window(&self) -> f64 {
        self.capacity as f64 / self.entrance_probability
    }

    /// Stored values in insertion order, oldest first.
    pub fn slots(&self) -> impl Iterator<Item = f64> + '_ {
        self.slots.iter().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_increasing_input_collapses_store() {
        let mut store = ExtremeValueStore::new(3).unwrap();
        for (t, v) in [1.0, 2.0, 3.0].into_iter().enumerate() {
            store.update(v, t as u64 + 1).unwrap();
        }
        assert_eq!(store.len(), 1);
        assert_eq!(store.query_max().unwrap(), 3.0);
    }

    #[test]
    fn strictly_decreasing_input_fills_store() {
        let mut store = ExtremeValueStore::new(3).unwrap();
        for (t, v) in [3.0, 2.0, 1.0].into_iter().enumerate() {
            store.update(v, t as u64 + 1).unwrap();
        }
        assert_eq!(store.values().collect::<Vec<_>>(), vec![3.0, 2.0, 1.0]);
        assert_eq!(store.query_max().unwrap(), 3.0);
    }

    #[test]
    fn single_update_is_the_max() {
        let mut store = ExtremeValueStore::new(5).unwrap();
        store.update(7.0, 1).unwrap();
        assert_eq!(store.query_max().unwrap(), 7.0);
    }

    #[test]
    fn negated_twin_yields_rolling_min() {
        let mut mm = RollingMinMax::new(3).unwrap();
        for (t, v) in [3.0, 2.0, 1.0].into_iter().enumerate() {
            mm.update(v, t as u64 + 1).unwrap();
        }
        assert_eq!(mm.min().unwrap(), 1.0);
        assert_eq!(mm.max().unwrap(), 3.0);
    }

    #[test]
    fn expired_entries_are_evicted() {
        let mut store = ExtremeValueStore::new(2).unwrap();
        store.update(9.0, 1).unwrap();
        store.update(1.0, 2).unwrap();
        store.update(0.5, 3).unwrap();
        // 9.0 was inserted at t = 1 and is out of the window at t = 3
        assert_eq!(store.query_max().unwrap(), 1.0);
    }

    #[test]
    fn equal_values_keep_the_newest_timestamp() {
        let mut store = ExtremeValueStore::new(2).unwrap();
        store.update(5.0, 1).unwrap();
        store.update(5.0, 2).unwrap();
        store.update(1.0, 3).unwrap();
        assert_eq!(store.query_max().unwrap(), 5.0);
        assert_eq!(store.len(), 2);
    }

    #[test]
    fn empty_store_and_bad_values_error() {
        let store = ExtremeValueStore::new(2).unwrap();
        assert!(matches!(store.query_max(), Err(StorageError::Empty)));
        let mut store = ExtremeValueStore::new(2).unwrap();
        assert!(matches!(
            store.update(f64::NAN, 1),
            Err(StorageError::NonFiniteValue(_))
        ));
        store.update(1.0, 5).unwrap();
        assert!(matches!(
            store.update(2.0, 5),
            Err(StorageError::NonMonotonicTime { .. })
        ));
        assert!(ExtremeValueStore::new(0).is_err());
    }

    #[test]
    fn oldest_first_replacement_traces_the_queue() {
        let mut r = FrequencyReservoir::new(3, 1.0, VictimPolicy::OldestFirst, 0).unwrap();
        for v in [1.0, 2.0, 3.0, 4.0] {
            r.update(v).unwrap();
        }
        assert_eq!(r.slots().collect::<Vec<_>>(), vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn full_entrance_with_large_capacity_keeps_the_stream() {
        let mut r = FrequencyReservoir::new(10, 1.0, VictimPolicy::OldestFirst, 0).unwrap();
        let stream = [5.0, 1.0, 4.0, 2.0];
        for v in stream {
            r.update(v).unwrap();
        }
        assert_eq!(r.slots().collect::<Vec<_>>(), stream.to_vec());
    }

    #[test]
    fn effective_window_is_capacity_over_entrance_probability() {
        let r = FrequencyReservoir::new(100, 0.05, VictimPolicy::OldestFirst, 0).unwrap();
        assert_eq!(r.effective_window(), 2000.0);
    }

    #[test]
    fn quantile_of_constant_stream_is_the_constant() {
        let mut r = FrequencyReservoir::new(8, 1.0, VictimPolicy::OldestFirst, 0).unwrap();
        for _ in 0..20 {
            r.update(2.5).unwrap();
        }
        for q in [0.0, 0.1, 0.5, 0.9, 1.0] {
            assert_eq!(r.quantile(q).unwrap(), 2.5);
        }
    }

    #[test]
    fn nearest_rank_median_of_one_to_hundred() {
        let mut r = FrequencyReservoir::new(100, 1.0, VictimPolicy::OldestFirst, 0).unwrap();
        for v in 1..=100 {
            r.update(v as f64).unwrap();
        }
        assert_eq!(r.quantile(0.5).unwrap(), 50.0);
        assert_eq!(r.quantile(0.0).unwrap(), 1.0);
        assert_eq!(r.quantile(1.0).unwrap(), 100.0);
    }

    #[test]
    fn quantile_errors() {
        let r = FrequencyReservoir::new(4, 1.0, VictimPolicy::OldestFirst, 0).unwrap();
        assert!(matches!(r.quantile(0.5), Err(StorageError::Empty)));
        let mut r = FrequencyReservoir::new(4, 1.0, VictimPolicy::OldestFirst, 0).unwrap();
        r.update(1.0).unwrap();
        assert!(matches!(
            r.quantile(1.5),
            Err(StorageError::InvalidQuantile(_))
        ));
        assert!(matches!(
            r.quantile(f64::NAN),
            Err(StorageError::InvalidQuantile(_))
        ));
    }

    #[test]
    fn reservoir_parameter_validation() {
        assert!(FrequencyReservoir::new(0, 0.5, VictimPolicy::OldestFirst, 0).is_err());
        assert!(FrequencyReservoir::new(4, 0.0, VictimPolicy::OldestFirst, 0).is_err());
        assert!(FrequencyReservoir::new(4, 1.5, VictimPolicy::OldestFirst, 0).is_err());
    }

    #[test]
    fn same_seed_same_slots() {
        let mut a = FrequencyReservoir::new(5, 0.3, VictimPolicy::UniformRandom, 77).unwrap();
        let mut b = FrequencyReservoir::new(5, 0.3, VictimPolicy::UniformRandom, 77).unwrap();
        for i in 0..200 {
            let v = (i as f64).sin();
            a.update(v).unwrap();
            b.update(v).unwrap();
        }
        assert_eq!(a.slots().collect::<Vec<_>>(), b.slots().collect::<Vec<_>>());
    }
}
