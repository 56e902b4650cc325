//! Analytic evaluation of a secondary transmission policy.
//!
//! After every sensing period of length `t_s` the secondary picks a level
//! `k` (perfect sensing: free/busy; soft sensing: quantized metric) and
//! transmits with power `P_k` for `T_k`. The state seen at consecutive
//! sensing instants forms a two-state Markov chain whose stationary
//! free probability is `P^ss = B / (1 - A + B)` with
//! `A = Σ ε_k P^{00}(t_s+T_k)` and `B = Σ ϑ_k P^{10}(t_s+T_k)`.
//! Rates are renewal-reward ratios over the mean cycle `μ`.
//!
//! Perfect sensing is the two-level special case with `ε = (1, 0)` and
//! `ϑ = (0, 1)`, so both modes share one evaluation path.

use serde::{Deserialize, Serialize};

use crate::error::{check_param, Error, Result};
use crate::link::LinkBudget;
use crate::sensing::{Sensing, SoftMetricModel, ThresholdSet};
use crate::traffic::{ChannelState, TrafficModel};

/// Primary traffic, radio constants and sensing time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub traffic: TrafficModel,
    pub link: LinkBudget,
    /// Sensing duration `t_s`.
    pub t_s: f64,
}

impl Scenario {
    pub fn new(traffic: TrafficModel, link: LinkBudget, t_s: f64) -> Result<Self> {
        link.validate()?;
        check_param(
            t_s > 0.0 && t_s.is_finite(),
            "t_s",
            format!("sensing time must be finite and > 0, got {t_s}"),
        )?;
        Ok(Self { traffic, link, t_s })
    }

    pub(crate) fn power_terms(&self, power: f64) -> PowerTerms {
        PowerTerms {
            power,
            capacity_free: self.link.c_free(power),
            capacity_interfered: self.link.c_interfered(power),
            success: 1.0 - self.link.outage(power),
        }
    }

    pub(crate) fn duration_terms(&self, duration: f64) -> DurationTerms {
        let traffic = &self.traffic;
        let cycle = self.t_s + duration;
        DurationTerms {
            duration,
            cycle,
            free_after_free: traffic.free_time_after(ChannelState::Free, duration),
            free_after_busy: traffic.free_time_after(ChannelState::Busy, duration),
            busy_after_free: traffic.busy_time_after(ChannelState::Free, duration),
            busy_after_busy: traffic.busy_time_after(ChannelState::Busy, duration),
            free_to_free: traffic.free_prob_after(ChannelState::Free, cycle),
            busy_to_free: traffic.free_prob_after(ChannelState::Busy, cycle),
        }
    }
}

/// Power and duration while the channel is sensed free or busy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfectPolicy {
    pub p_free: f64,
    pub t_free: f64,
    pub p_busy: f64,
    pub t_busy: f64,
}

/// Per-level power and duration for quantized soft sensing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftPolicy {
    pub thresholds: ThresholdSet,
    pub powers: Vec<f64>,
    pub durations: Vec<f64>,
}

impl SoftPolicy {
    pub fn new(thresholds: ThresholdSet, powers: Vec<f64>, durations: Vec<f64>) -> Result<Self> {
        let levels = thresholds.levels();
        check_param(
            powers.len() == levels,
            "powers",
            format!("expected {levels} values, got {}", powers.len()),
        )?;
        check_param(
            durations.len() == levels,
            "durations",
            format!("expected {levels} values, got {}", durations.len()),
        )?;
        Ok(Self {
            thresholds,
            powers,
            durations,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Policy {
    Perfect(PerfectPolicy),
    Soft(SoftPolicy),
}

impl From<PerfectPolicy> for Policy {
    fn from(p: PerfectPolicy) -> Self {
        Policy::Perfect(p)
    }
}

impl From<SoftPolicy> for Policy {
    fn from(p: SoftPolicy) -> Self {
        Policy::Soft(p)
    }
}

impl Policy {
    /// `(power, duration)` for each sensing level.
    pub fn actions(&self) -> Vec<(f64, f64)> {
        match self {
            Policy::Perfect(p) => vec![(p.p_free, p.t_free), (p.p_busy, p.t_busy)],
            Policy::Soft(p) => p.powers.iter().copied().zip(p.durations.iter().copied()).collect(),
        }
    }

    pub fn levels(&self) -> usize {
        match self {
            Policy::Perfect(_) => 2,
            Policy::Soft(p) => p.thresholds.levels(),
        }
    }

    /// Checks power and duration ranges against the link's cap.
    pub fn validate(&self, link: &LinkBudget) -> Result<()> {
        for (power, duration) in self.actions() {
            check_param(
                (0.0..=link.p_max).contains(&power),
                "power",
                format!("must lie in [0, {}], got {power}", link.p_max),
            )?;
            check_param(
                duration >= 0.0 && duration.is_finite(),
                "duration",
                format!("must be finite and >= 0, got {duration}"),
            )?;
        }
        Ok(())
    }

    /// Pairs the policy with its sensing model.
    pub fn sensing(&self, metric: Option<&SoftMetricModel>) -> Result<Sensing> {
        match (self, metric) {
            (Policy::Perfect(_), None) => Ok(Sensing::Perfect),
            (Policy::Soft(p), Some(model)) => Ok(Sensing::Soft {
                model: *model,
                thresholds: p.thresholds.clone(),
            }),
            (Policy::Perfect(_), Some(_)) => Err(Error::ModeMismatch(
                "perfect-sensing policy given a soft metric model".into(),
            )),
            (Policy::Soft(_), None) => Err(Error::ModeMismatch(
                "soft-sensing policy needs a metric model".into(),
            )),
        }
    }
}

/// Long-run performance of a policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvaluation {
    /// Probability that a sensing instant finds the channel free.
    pub p_ss: f64,
    /// Mean time between sensing instants.
    pub mean_cycle: f64,
    /// Secondary throughput, nats per unit time.
    pub rate_secondary: f64,
    /// Primary throughput, nats per unit time.
    pub rate_primary: f64,
    /// `(1-α) R_s + α R_p`.
    pub objective: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PowerTerms {
    pub power: f64,
    pub capacity_free: f64,
    pub capacity_interfered: f64,
    /// `1 - P_o(p)`.
    pub success: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct DurationTerms {
    pub duration: f64,
    pub cycle: f64,
    pub free_after_free: f64,
    pub free_after_busy: f64,
    pub busy_after_free: f64,
    pub busy_after_busy: f64,
    /// `P^{00}(t_s + T)`.
    pub free_to_free: f64,
    /// `P^{10}(t_s + T)`.
    pub busy_to_free: f64,
}

/// One sensing level: its conditional probabilities and action terms.
#[derive(Clone, Copy)]
pub(crate) struct LevelTerms<'a> {
    pub free_prob: f64,
    pub busy_prob: f64,
    pub power: &'a PowerTerms,
    pub duration: &'a DurationTerms,
}

/// Single pass over the levels; no allocation, so the optimizer can call
/// it millions of times.
pub(crate) fn evaluate_levels<'a, I>(levels: I, r_primary: f64, alpha: f64) -> PolicyEvaluation
where
    I: IntoIterator<Item = LevelTerms<'a>>,
{
    let mut stay_free = 0.0; // A
    let mut become_free = 0.0; // B
    let mut cycle_free = 0.0;
    let mut cycle_busy = 0.0;
    let mut secondary_free = 0.0;
    let mut secondary_busy = 0.0;
    let mut primary_free = 0.0;
    let mut primary_busy = 0.0;

    for level in levels {
        let (eps, theta) = (level.free_prob, level.busy_prob);
        let (pw, dt) = (level.power, level.duration);
        stay_free += eps * dt.free_to_free;
        become_free += theta * dt.busy_to_free;
        cycle_free += eps * dt.cycle;
        cycle_busy += theta * dt.cycle;
        secondary_free += eps
            * (dt.free_after_free * pw.capacity_free + dt.busy_after_free * pw.capacity_interfered);
        secondary_busy += theta
            * (dt.free_after_busy * pw.capacity_free + dt.busy_after_busy * pw.capacity_interfered);
        primary_free += eps * dt.busy_after_free * pw.success;
        primary_busy += theta * dt.busy_after_busy * pw.success;
    }

    let p_ss = become_free / (1.0 - stay_free + become_free);
    let mean_cycle = p_ss * cycle_free + (1.0 - p_ss) * cycle_busy;
    let rate_secondary = (p_ss * secondary_free + (1.0 - p_ss) * secondary_busy) / mean_cycle;
    let rate_primary =
        r_primary * (p_ss * primary_free + (1.0 - p_ss) * primary_busy) / mean_cycle;
    PolicyEvaluation {
        p_ss,
        mean_cycle,
        rate_secondary,
        rate_primary,
        objective: (1.0 - alpha) * rate_secondary + alpha * rate_primary,
        alpha,
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    check_param(
        (0.0..=1.0).contains(&alpha),
        "alpha",
        format!("must lie in [0, 1], got {alpha}"),
    )
}

/// Level probabilities `(ε_k, ϑ_k)` and action terms for a policy.
struct PreparedPolicy {
    free_probs: Vec<f64>,
    busy_probs: Vec<f64>,
    powers: Vec<PowerTerms>,
    durations: Vec<DurationTerms>,
}

impl PreparedPolicy {
    fn new(scenario: &Scenario, policy: &Policy, metric: Option<&SoftMetricModel>) -> Result<Self> {
        policy.validate(&scenario.link)?;
        let sensing = policy.sensing(metric)?;
        let actions = policy.actions();
        Ok(Self {
            free_probs: sensing.level_probs(ChannelState::Free),
            busy_probs: sensing.level_probs(ChannelState::Busy),
            powers: actions.iter().map(|&(p, _)| scenario.power_terms(p)).collect(),
            durations: actions.iter().map(|&(_, t)| scenario.duration_terms(t)).collect(),
        })
    }

    fn levels(&self) -> impl Iterator<Item = LevelTerms<'_>> {
        (0..self.powers.len()).map(move |k| LevelTerms {
            free_prob: self.free_probs[k],
            busy_prob: self.busy_probs[k],
            power: &self.powers[k],
            duration: &self.durations[k],
        })
    }

    fn chain(&self) -> (f64, f64) {
        let stay: f64 = self.levels().map(|l| l.free_prob * l.duration.free_to_free).sum();
        let enter: f64 = self.levels().map(|l| l.busy_prob * l.duration.busy_to_free).sum();
        (stay, enter)
    }
}

/// Stationary probability that a sensing instant finds the channel free.
pub fn steady_state_free(
    scenario: &Scenario,
    policy: &Policy,
    metric: Option<&SoftMetricModel>,
) -> Result<f64> {
    let prepared = PreparedPolicy::new(scenario, policy, metric)?;
    let (stay, enter) = prepared.chain();
    Ok(enter / (1.0 - stay + enter))
}

/// One step of the sensing-instant chain: the free probability at the next
/// sensing instant given `pi` at the current one.
pub fn sensing_chain_step(
    scenario: &Scenario,
    policy: &Policy,
    metric: Option<&SoftMetricModel>,
    pi: f64,
) -> Result<f64> {
    let prepared = PreparedPolicy::new(scenario, policy, metric)?;
    let (stay, enter) = prepared.chain();
    Ok(pi * stay + (1.0 - pi) * enter)
}

/// Mean time between sensing instants,
/// `μ = P^ss Σ ε_k (t_s+T_k) + (1-P^ss) Σ ϑ_k (t_s+T_k)`.
pub fn mean_cycle(
    t_s: f64,
    durations: &[f64],
    free_probs: &[f64],
    busy_probs: &[f64],
    p_ss: f64,
) -> f64 {
    let weighted = |probs: &[f64]| -> f64 {
        probs
            .iter()
            .zip(durations)
            .map(|(p, t)| p * (t_s + t))
            .sum()
    };
    p_ss * weighted(free_probs) + (1.0 - p_ss) * weighted(busy_probs)
}

/// Full analytic evaluation of `policy`.
pub fn evaluate(
    scenario: &Scenario,
    alpha: f64,
    policy: &Policy,
    metric: Option<&SoftMetricModel>,
) -> Result<PolicyEvaluation> {
    check_alpha(alpha)?;
    let prepared = PreparedPolicy::new(scenario, policy, metric)?;
    Ok(evaluate_levels(
        prepared.levels(),
        scenario.link.r_primary,
        alpha,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::ChannelPreset;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn perfect(p_free: f64, t_free: f64, p_busy: f64, t_busy: f64) -> Policy {
        Policy::Perfect(PerfectPolicy {
            p_free,
            t_free,
            p_busy,
            t_busy,
        })
    }

    /// Iterates the sensing chain from π₀ = 0.5 until it stops moving.
    fn iterate_chain(scenario: &Scenario, policy: &Policy, metric: Option<&SoftMetricModel>) -> f64 {
        let mut pi = 0.5;
        for _ in 0..100_000 {
            let next = sensing_chain_step(scenario, policy, metric, pi).unwrap();
            if (next - pi).abs() < 1e-16 {
                return next;
            }
            pi = next;
        }
        pi
    }

    #[test]
    fn equal_durations_sample_the_stationary_law() {
        let s = ChannelPreset::ChannelB.scenario();
        for t in [0.0, 0.3, 2.0, 20.0] {
            let pss = steady_state_free(&s, &perfect(3.0, t, 7.0, t), None).unwrap();
            assert_relative_eq!(pss, 5.0 / 9.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn asymmetric_durations_fixed_point() {
        let s = ChannelPreset::ChannelB.scenario();
        let policy = perfect(0.0, 20.0, 0.0, 0.0);
        let pss = steady_state_free(&s, &policy, None).unwrap();
        let oracle = iterate_chain(&s, &policy, None);
        // B / (1 - A + B) with A = P00(20.05), B = P10(0.05).
        assert_relative_eq!(pss, 0.027_061_609_703_477_27, max_relative = 1e-10);
        assert_relative_eq!(pss, oracle, max_relative = 1e-12);
        let step = sensing_chain_step(&s, &policy, None, pss).unwrap();
        assert!((step - pss).abs() <= 1e-12);
        let mu = mean_cycle(s.t_s, &[20.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], pss);
        assert_relative_eq!(mu, 0.05 + pss * 20.0, max_relative = 1e-14);
        assert_relative_eq!(mu, 0.591_232_194_069_545_5, max_relative = 1e-10);
    }

    #[test]
    fn single_level_soft_equals_perfect() {
        let s = ChannelPreset::ChannelB.scenario();
        let metric = SoftMetricModel::new(3.0).unwrap();
        let soft = Policy::Soft(SoftPolicy::new(ThresholdSet::empty(), vec![4.0], vec![2.5]).unwrap());
        let hard = perfect(4.0, 2.5, 4.0, 2.5);
        let a = evaluate(&s, 0.3, &soft, Some(&metric)).unwrap();
        let b = evaluate(&s, 0.3, &hard, None).unwrap();
        assert!((a.p_ss - b.p_ss).abs() <= 1e-12);
        assert!((a.objective - b.objective).abs() <= 1e-12);
        assert!((a.rate_primary - b.rate_primary).abs() <= 1e-12);
        assert!((a.mean_cycle - b.mean_cycle).abs() <= 1e-12);
    }

    #[test]
    fn zero_power_equal_durations() {
        let s = ChannelPreset::ChannelB.scenario();
        let e = evaluate(&s, 0.5, &perfect(0.0, 20.0, 0.0, 20.0), None).unwrap();
        assert_eq!(e.rate_secondary, 0.0);
        // r₀ · (u·20/20.05) · (1 - P_o(0))
        assert_relative_eq!(e.rate_primary, 1.482_791_603_024_022_7, max_relative = 1e-12);
        assert_relative_eq!(e.mean_cycle, 20.05, max_relative = 1e-14);
    }

    #[test]
    fn zero_durations_earn_nothing() {
        let s = ChannelPreset::ChannelA.scenario();
        let e = evaluate(&s, 0.5, &perfect(10.0, 0.0, 10.0, 0.0), None).unwrap();
        assert_eq!(e.rate_secondary, 0.0);
        assert_eq!(e.rate_primary, 0.0);
        assert_relative_eq!(e.mean_cycle, s.t_s);
    }

    #[test]
    fn rejects_invalid_inputs() {
        let s = ChannelPreset::ChannelA.scenario();
        let metric = SoftMetricModel::new(3.0).unwrap();
        assert!(evaluate(&s, 1.5, &perfect(1.0, 1.0, 1.0, 1.0), None).is_err());
        assert!(evaluate(&s, 0.5, &perfect(11.0, 1.0, 1.0, 1.0), None).is_err());
        assert!(evaluate(&s, 0.5, &perfect(1.0, -1.0, 1.0, 1.0), None).is_err());
        assert!(matches!(
            evaluate(&s, 0.5, &perfect(1.0, 1.0, 1.0, 1.0), Some(&metric)),
            Err(Error::ModeMismatch(_))
        ));
        assert!(SoftPolicy::new(ThresholdSet::empty(), vec![1.0, 2.0], vec![1.0]).is_err());
    }

    fn arb_soft() -> impl Strategy<Value = SoftPolicy> {
        (
            0.05f64..5.0,
            proptest::collection::vec((0.0f64..=10.0, 0.0f64..=20.0), 2),
        )
            .prop_map(|(t, actions)| {
                SoftPolicy::new(
                    ThresholdSet::new(vec![t]).unwrap(),
                    actions.iter().map(|a| a.0).collect(),
                    actions.iter().map(|a| a.1).collect(),
                )
                .unwrap()
            })
    }

    proptest! {
        #[test]
        fn fixed_point_and_time_budget(
            pf in 0.0f64..=10.0, tf in 0.0f64..=20.0, pb in 0.0f64..=10.0, tb in 0.0f64..=20.0,
        ) {
            let s = ChannelPreset::ChannelB.scenario();
            let policy = perfect(pf, tf, pb, tb);
            let e = evaluate(&s, 0.4, &policy, None).unwrap();
            let step = sensing_chain_step(&s, &policy, None, e.p_ss).unwrap();
            prop_assert!((step - e.p_ss).abs() <= 1e-12);
            let budget = e.p_ss * tf + (1.0 - e.p_ss) * tb + s.t_s;
            prop_assert!((budget - e.mean_cycle).abs() <= 1e-12 * e.mean_cycle);
            prop_assert!(e.mean_cycle >= s.t_s);
            prop_assert!(e.p_ss > 0.0 && e.p_ss < 1.0);
            prop_assert!(e.rate_secondary >= 0.0 && e.rate_primary >= 0.0);
        }

        #[test]
        fn objective_is_affine_in_alpha(policy in arb_soft(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let s = ChannelPreset::ChannelB.scenario();
            let metric = SoftMetricModel::new(3.0).unwrap();
            let policy = Policy::Soft(policy);
            let ea = evaluate(&s, a, &policy, Some(&metric)).unwrap();
            let eb = evaluate(&s, b, &policy, Some(&metric)).unwrap();
            prop_assert_eq!(ea.rate_secondary, eb.rate_secondary);
            prop_assert_eq!(ea.rate_primary, eb.rate_primary);
            let predicted = (1.0 - b) * ea.rate_secondary + b * ea.rate_primary;
            prop_assert!((predicted - eb.objective).abs() <= 1e-12);
            let step = sensing_chain_step(&s, &policy, Some(&metric), ea.p_ss).unwrap();
            prop_assert!((step - ea.p_ss).abs() <= 1e-12);
        }
    }
}
