use cogduty::presets::ChannelPreset;
use cogduty::simulator::{simulate, validate_policy, SimConfig};
use cogduty::throughput::evaluate;
use cogduty::{ChannelState, PerfectPolicy, Policy, SoftMetricModel, SoftPolicy, ThresholdSet};

fn soft(thresholds: Vec<f64>, powers: Vec<f64>, durations: Vec<f64>) -> Policy {
    Policy::Soft(SoftPolicy::new(ThresholdSet::new(thresholds).unwrap(), powers, durations).unwrap())
}

#[test]
fn soft_level_occupancy_matches_mixture() {
    let scenario = ChannelPreset::ChannelB.scenario();
    for gamma0 in [3.0, 10.0] {
        let metric = SoftMetricModel::new(gamma0).unwrap();
        let thresholds = ThresholdSet::new(vec![1.0, 4.0]).unwrap();
        let policy = soft(thresholds.values().to_vec(), vec![8.0, 3.0, 0.5], vec![6.0, 2.0, 9.0]);
        let report = simulate(&scenario, &policy, Some(&metric), &SimConfig::default()).unwrap();
        let p_ss = evaluate(&scenario, 0.5, &policy, Some(&metric)).unwrap().p_ss;
        let free = metric.level_probs(&thresholds, ChannelState::Free);
        let busy = metric.level_probs(&thresholds, ChannelState::Busy);
        for k in 0..3 {
            let expected = p_ss * free[k] + (1.0 - p_ss) * busy[k];
            let (got, se) = (report.level_occupancy[k], report.level_occupancy_se[k]);
            assert!((got - expected).abs() <= 3.0 * se, "gamma0={gamma0} level {k}: {got} vs {expected}");
        }
    }
}

#[test]
fn perfect_and_two_threshold_policies_validate() {
    let scenario = ChannelPreset::ChannelA.scenario();
    let metric = SoftMetricModel::new(3.0).unwrap();
    let config = SimConfig {
        seed: 9,
        ..SimConfig::default()
    };
    let perfect = Policy::Perfect(PerfectPolicy {
        p_free: 7.0,
        t_free: 4.0,
        p_busy: 0.4,
        t_busy: 1.5,
    });
    let report = validate_policy(&scenario, &perfect, None, &config).unwrap();
    assert!(report.all_within(4.0), "{:?}", report.rows);

    let two = soft(vec![0.8, 3.5], vec![9.0, 2.0, 0.0], vec![10.0, 3.0, 0.5]);
    let report = validate_policy(&scenario, &two, Some(&metric), &config).unwrap();
    assert!(report.all_within(4.0), "{:?}", report.rows);
}

#[test]
fn crediting_sensing_time_raises_primary_rate() {
    let scenario = ChannelPreset::ChannelB.scenario();
    let policy = Policy::Perfect(PerfectPolicy {
        p_free: 5.0,
        t_free: 0.5,
        p_busy: 1.0,
        t_busy: 0.5,
    });
    let base = SimConfig {
        cycles: 50_000,
        ..SimConfig::default()
    };
    let credited = SimConfig {
        credit_sensing_primary: true,
        ..base
    };
    let plain = simulate(&scenario, &policy, None, &base).unwrap();
    let more = simulate(&scenario, &policy, None, &credited).unwrap();
    assert_eq!(plain.rate_secondary_mean, more.rate_secondary_mean);
    assert!(more.rate_primary_mean > plain.rate_primary_mean);
}

#[test]
fn mode_mismatch_is_rejected() {
    let scenario = ChannelPreset::ChannelB.scenario();
    let metric = SoftMetricModel::new(3.0).unwrap();
    let perfect = Policy::Perfect(PerfectPolicy {
        p_free: 1.0,
        t_free: 1.0,
        p_busy: 1.0,
        t_busy: 1.0,
    });
    assert!(simulate(&scenario, &perfect, Some(&metric), &SimConfig::default()).is_err());
    let one = soft(vec![2.0], vec![1.0, 1.0], vec![1.0, 1.0]);
    assert!(simulate(&scenario, &one, None, &SimConfig::default()).is_err());
}
