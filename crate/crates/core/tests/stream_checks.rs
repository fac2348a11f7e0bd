//! Distributional checks for the synthetic stream generators against
//! closed-form Gaussian oracles.

use statrs::distribution::{ContinuousCDF, Normal};

use pdstream::{DriftSchedule, HyperplaneConcept, HyperplaneGenerator};

#[test]
fn class_one_prevalence_matches_the_gaussian_tail() {
    // Z = beta1 X1 + beta2 X2 + eps is Gaussian; the label is 1 iff
    // sigmoid(Z) >= tau, i.e. Z >= logit(tau).
    let c = HyperplaneConcept::concept_a();
    let mean = c.beta1 * c.mu1 + c.beta2 * c.mu2 + c.mu_eps;
    let var = c.beta1 * c.beta1 * c.sigma1_sq + c.beta2 * c.beta2 * c.sigma2_sq + c.sigma_eps_sq;
    let logit_tau = (c.tau / (1.0 - c.tau)).ln();
    let normal = Normal::new(mean, var.sqrt()).unwrap();
    let expected = 1.0 - normal.cdf(logit_tau);

    let n = 100_000usize;
    let gen = HyperplaneGenerator::new(c, 2024).unwrap();
    let positives = gen.take(n).filter(|r| r.y == 1.0).count();
    let p_hat = positives as f64 / n as f64;
    let std_err = (expected * (1.0 - expected) / n as f64).sqrt();
    assert!(
        (p_hat - expected).abs() <= 3.0 * std_err,
        "prevalence {p_hat} vs analytic {expected} (3se = {})",
        3.0 * std_err
    );
}

#[test]
fn post_switch_feature_mean_matches_the_second_concept() {
    let schedule = DriftSchedule::new(
        HyperplaneConcept::concept_a(),
        HyperplaneConcept::concept_b(),
        20_000,
        55,
    )
    .unwrap();
    let records: Vec<_> = schedule.take(40_000).collect();
    let window: Vec<f64> = records[29_999..40_000]
        .iter()
        .map(|r| r.x.get("x1").unwrap())
        .collect();
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    // x1 ~ N(200, 40) after the switch
    let std_err = (40.0f64 / n).sqrt();
    assert!(
        (mean - 200.0).abs() <= 3.0 * std_err,
        "window mean {mean} (3se = {})",
        3.0 * std_err
    );
}

#[test]
fn record_times_are_strictly_increasing_from_one() {
    let gen = HyperplaneGenerator::new(HyperplaneConcept::concept_a(), 1).unwrap();
    for (i, record) in gen.take(1_000).enumerate() {
        assert_eq!(record.t, i as u64 + 1);
        assert_eq!(record.x.len(), 2);
        assert!(record.y == 0.0 || record.y == 1.0);
    }
}
