//! Detection power, false-alarm calibration, and pipeline behavior for the
//! adaptive-windowing detector.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use pdstream::{AdwinDetector, DriftSignal, ExplanationFrame, FiDriftPipeline};

fn frame(feature: &str, t: u64, importance: f64) -> ExplanationFrame {
    ExplanationFrame {
        t,
        feature: feature.to_owned(),
        grid: vec![0.0, 1.0],
        estimates: vec![0.0, importance],
        importance,
        eval_min: 0.0,
        eval_max: 1.0,
    }
}

/// Brute-force reference detector: stores the raw window and checks every
/// split position with the same variance-aware bound. Strictly more split
/// points than the bucketed structure, same statistics.
struct NaiveSplitDetector {
    delta: f64,
    window: Vec<f64>,
}

impl NaiveSplitDetector {
    fn new(delta: f64) -> Self {
        Self {
            delta,
            window: Vec::new(),
        }
    }

    fn update(&mut self, value: f64) -> bool {
        self.window.push(value);
        let n = self.window.len();
        if n < 2 {
            return false;
        }
        let total: f64 = self.window.iter().sum();
        let mean = total / n as f64;
        let variance = self
            .window
            .iter()
            .map(|v| (v - mean).powi(2))
            .sum::<f64>()
            / n as f64;
        let dd = (2.0 * (n as f64).ln() / self.delta).ln();
        let mut prefix = 0.0;
        let mut cut = None;
        for i in 1..n {
            prefix += self.window[i - 1];
            let n0 = i as f64;
            let n1 = (n - i) as f64;
            let mean0 = prefix / n0;
            let mean1 = (total - prefix) / n1;
            let m_recip = 1.0 / n0 + 1.0 / n1;
            let eps = (2.0 * m_recip * variance * dd).sqrt() + (2.0 / 3.0) * m_recip * dd;
            if (mean0 - mean1).abs() >= eps {
                cut = Some(i);
                break;
            }
        }
        match cut {
            Some(i) => {
                self.window.drain(..i);
                true
            }
            None => false,
        }
    }
}

#[test]
fn naive_split_oracle_detects_the_bernoulli_switch_quickly() {
    let switch = 5_000u64;
    let mut rng = ChaCha12Rng::seed_from_u64(314);
    let mut naive = NaiveSplitDetector::new(0.002);
    let mut detected = None;
    for t in 1..=(switch + 500) {
        let p = if t <= switch { 0.2 } else { 0.8 };
        let v = if rng.random_bool(p) { 1.0 } else { 0.0 };
        if naive.update(v) && t > switch && detected.is_none() {
            detected = Some(t);
        }
    }
    let t = detected.expect("oracle must confirm the switch is detectable within 500 steps");
    assert!(t <= switch + 500);
}

#[test]
fn bernoulli_switch_is_detected_within_500_steps() {
    let switch = 5_000u64;
    let runs = 100u64;
    let mut detected_in_time = 0u32;
    let mut retained_mean_ok = 0u32;
    for run in 0..runs {
        let mut rng = ChaCha12Rng::seed_from_u64(10_000 + run);
        let mut adwin = AdwinDetector::with_defaults();
        let mut first_post = None;
        for t in 1..=(switch + 500) {
            let p = if t <= switch { 0.2 } else { 0.8 };
            let v = if rng.random_bool(p) { 1.0 } else { 0.0 };
            if let DriftSignal::DriftAt(at) = adwin.update(v).unwrap() {
                if at > switch && first_post.is_none() {
                    first_post = Some(at);
                }
            }
        }
        if first_post.is_some() {
            detected_in_time += 1;
            if (adwin.mean().unwrap() - 0.8).abs() <= 0.05 {
                retained_mean_ok += 1;
            }
        }
    }
    assert!(
        detected_in_time >= 95,
        "detected within 500 steps in only {detected_in_time}/100 runs"
    );
    // after cutting, the retained window tracks the post-change mean
    assert!(
        retained_mean_ok * 100 >= detected_in_time * 90,
        "retained mean within 0.05 in only {retained_mean_ok}/{detected_in_time} detecting runs"
    );
}

#[test]
fn false_alarms_stay_within_budget_on_iid_streams() {
    let mut alarms = 0u32;
    for seed in 0..20u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(777 + seed);
        let mut adwin = AdwinDetector::with_defaults();
        for _ in 0..100_000u64 {
            let v: f64 = rng.random();
            if matches!(adwin.update(v).unwrap(), DriftSignal::DriftAt(_)) {
                alarms += 1;
            }
        }
    }
    assert!(alarms <= 5, "{alarms} false alarms across 20 runs");
}

#[test]
fn importance_step_yields_exactly_one_snapshot_near_the_step() {
    let mut pipeline = FiDriftPipeline::new(0.002, 5).unwrap();
    let mut events = Vec::new();
    for t in 1..=10_000u64 {
        let imp = if t <= 5_000 { 0.0 } else { 1.0 };
        if let Some(event) = pipeline.push(&frame("x1", t, imp)).unwrap() {
            events.push(event.t);
        }
    }
    assert_eq!(events.len(), 1, "events at {events:?}");
    assert!(events[0] > 5_000 && events[0] <= 5_500);
}

#[test]
fn noisy_importance_step_snapshots_within_500_steps_across_seeds() {
    let mut hits = 0u32;
    let runs = 40u64;
    for run in 0..runs {
        let mut rng = ChaCha12Rng::seed_from_u64(31_000 + run);
        let mut pipeline = FiDriftPipeline::new(0.002, 5).unwrap();
        let mut hit = false;
        for t in 1..=5_500u64 {
            let base = if t <= 5_000 { 0.0 } else { 1.0 };
            let noise: f64 = rng.random_range(-0.1..0.1);
            if let Some(event) = pipeline.push(&frame("x1", t, base + noise)).unwrap() {
                if event.t > 5_000 {
                    hit = true;
                }
            }
        }
        if hit {
            hits += 1;
        }
    }
    assert!(
        hits as f64 >= 0.95 * runs as f64,
        "snapshot within 500 steps in only {hits}/{runs} runs"
    );
}
