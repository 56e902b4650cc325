//! Event-driven Monte Carlo of the primary on/off process and the
//! secondary sense/transmit cycle.
//!
//! Each cycle: the primary state at the sensing instant is observed (or a
//! metric is drawn and quantized), the policy picks `(P, T)`, and the
//! primary process is advanced with exact switching times through the
//! transmission window and the sensing gap. Channel gains are redrawn every
//! cycle. Secondary nats come from the instantaneous rates
//! `ln(1 + P g_ss/σ_s²)` (primary off) and
//! `ln(1 + P g_ss/(P_p g_ps + σ_s²))` (primary on); the primary earns `r₀`
//! over its on-time inside the window unless it is in outage.
//!
//! `sensing_lag` sets where the window starts relative to the sensing
//! instant. With 0 the window opens at the sensing instant and the sensing
//! gap follows it, which is exactly what the analytic rates assume. With
//! `t_s` the window opens after the sensing period, as it would physically.
//!
//! Replicas run on independent ChaCha8 streams: replica `i` uses the
//! master seed with stream id `i`, so results do not depend on how the
//! replicas are scheduled.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_param, Result};
use crate::sensing::{Sensing, SoftMetricModel};
use crate::throughput::{self, Policy, Scenario};
use crate::traffic::{ChannelState, TrafficModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Sensing cycles to record, summed over replicas.
    pub cycles: u64,
    pub seed: u64,
    /// Offset of the transmission window from the sensing instant, in `[0, t_s]`.
    pub sensing_lag: f64,
    /// Credit primary throughput earned while the secondary senses.
    pub credit_sensing_primary: bool,
    pub replicas: usize,
    /// Unrecorded cycles each replica runs first so the sensing chain
    /// forgets its initial state.
    pub warmup_cycles: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            cycles: 100_000,
            seed: 0x00C0_FFEE,
            sensing_lag: 0.0,
            credit_sensing_primary: false,
            replicas: 32,
            warmup_cycles: 500,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, t_s: f64) -> Result<()> {
        check_param(self.cycles >= 1, "cycles", "must be >= 1")?;
        check_param(self.replicas >= 2, "replicas", "must be >= 2")?;
        check_param(
            (0.0..=t_s).contains(&self.sensing_lag),
            "sensing_lag",
            format!("must lie in [0, t_s = {t_s}], got {}", self.sensing_lag),
        )
    }
}

/// Time spent free and busy over an interval.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Occupancy {
    pub free: f64,
    pub busy: f64,
}

/// The primary on/off process with exact switching epochs.
#[derive(Debug, Clone)]
pub struct RenewalProcess {
    traffic: TrafficModel,
    state: ChannelState,
    /// Time left until the next switch.
    remaining: f64,
}

impl RenewalProcess {
    /// Starts in the stationary distribution.
    pub fn stationary<R: Rng + ?Sized>(traffic: TrafficModel, rng: &mut R) -> Self {
        let state = if rng.random::<f64>() < traffic.utilization() {
            ChannelState::Busy
        } else {
            ChannelState::Free
        };
        Self::starting_in(traffic, state, rng)
    }

    /// Starts at the beginning of a holding period in `state`; by
    /// memorylessness this is the same as observing `state` at a random time.
    pub fn starting_in<R: Rng + ?Sized>(traffic: TrafficModel, state: ChannelState, rng: &mut R) -> Self {
        let mut process = Self {
            traffic,
            state,
            remaining: 0.0,
        };
        process.remaining = process.holding_time(rng);
        process
    }

    pub fn state(&self) -> ChannelState {
        self.state
    }

    fn holding_time<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mean = match self.state {
            ChannelState::Busy => self.traffic.t_on_mean(),
            ChannelState::Free => self.traffic.t_off_mean(),
        };
        let draw: f64 = Exp1.sample(rng);
        mean * draw
    }

    /// Advances by `dt`, returning the free and busy time inside it.
    pub fn advance<R: Rng + ?Sized>(&mut self, mut dt: f64, rng: &mut R) -> Occupancy {
        let mut occ = Occupancy::default();
        while dt > 0.0 {
            let step = dt.min(self.remaining);
            match self.state {
                ChannelState::Free => occ.free += step,
                ChannelState::Busy => occ.busy += step,
            }
            dt -= step;
            self.remaining -= step;
            if self.remaining <= 0.0 {
                self.state = self.state.flip();
                self.remaining = self.holding_time(rng);
            }
        }
        occ
    }
}

/// Monte Carlo estimates with standard errors taken across replicas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub rate_secondary_mean: f64,
    pub rate_secondary_se: f64,
    pub rate_primary_mean: f64,
    pub rate_primary_se: f64,
    pub p_ss_empirical: f64,
    pub p_ss_se: f64,
    pub mean_cycle_empirical: f64,
    pub mean_cycle_se: f64,
    /// Fraction of sensing instants that landed in each level.
    pub level_occupancy: Vec<f64>,
    pub level_occupancy_se: Vec<f64>,
    pub cycles_run: u64,
    pub replicas: usize,
}

#[derive(Debug, Clone, Default)]
struct Tally {
    cycles: f64,
    time: f64,
    secondary: f64,
    primary: f64,
    free_at_sensing: f64,
    levels: Vec<f64>,
}

struct Gains {
    ss: f64,
    ps: f64,
    pp: f64,
    sp: f64,
}

impl Gains {
    fn draw<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Self {
        let link = &scenario.link;
        let mut exp = |mean: f64| -> f64 {
            let v: f64 = Exp1.sample(rng);
            mean * v
        };
        Self {
            ss: exp(link.mean_gain_ss),
            ps: exp(link.mean_gain_ps),
            pp: exp(link.mean_gain_pp),
            sp: exp(link.mean_gain_sp),
        }
    }
}

fn run_replica(
    scenario: &Scenario,
    sensing: &Sensing,
    actions: &[(f64, f64)],
    config: &SimConfig,
    replica: usize,
    cycles: u64,
) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(replica as u64);

    let link = &scenario.link;
    let threshold = link.sinr_threshold();
    let lag = config.sensing_lag;
    let tail = scenario.t_s - lag;
    let mut process = RenewalProcess::stationary(scenario.traffic, &mut rng);
    let mut tally = Tally {
        levels: vec![0.0; actions.len()],
        ..Tally::default()
    };

    for cycle in 0..config.warmup_cycles + cycles {
        let state = process.state();
        let level = sensing.observe(state, &mut rng);
        let (power, duration) = actions[level];
        let before = process.advance(lag, &mut rng);
        let window = process.advance(duration, &mut rng);
        let after = process.advance(tail, &mut rng);
        let g = Gains::draw(scenario, &mut rng);
        if cycle < config.warmup_cycles {
            continue;
        }

        let clear = (power * g.ss / link.noise_s).ln_1p();
        let interfered = (power * g.ss / (link.p_primary * g.ps + link.noise_s)).ln_1p();
        let sinr = link.p_primary * g.pp / (power * g.sp + link.noise_p);
        let mut primary = if sinr >= threshold {
            link.r_primary * window.busy
        } else {
            0.0
        };
        if config.credit_sensing_primary && link.p_primary * g.pp / link.noise_p >= threshold {
            primary += link.r_primary * (before.busy + after.busy);
        }

        tally.cycles += 1.0;
        tally.time += lag + duration + tail;
        tally.secondary += window.free * clear + window.busy * interfered;
        tally.primary += primary;
        if state.is_free() {
            tally.free_at_sensing += 1.0;
        }
        tally.levels[level] += 1.0;
    }
    tally
}

/// Pooled ratio `Σy/Σx` and its delta-method standard error across replicas.
fn ratio_estimate(tallies: &[Tally], num: impl Fn(&Tally) -> f64, den: impl Fn(&Tally) -> f64) -> (f64, f64) {
    let n = tallies.len() as f64;
    let total_num: f64 = tallies.iter().map(&num).sum();
    let total_den: f64 = tallies.iter().map(&den).sum();
    let ratio = total_num / total_den;
    if tallies.len() < 2 {
        return (ratio, f64::INFINITY);
    }
    let mean_den = total_den / n;
    let ss: f64 = tallies
        .iter()
        .map(|t| {
            let r = num(t) - ratio * den(t);
            r * r
        })
        .sum();
    let se = (ss / (n * (n - 1.0))).sqrt() / mean_den;
    (ratio, se)
}

/// Simulates `policy` and reports empirical rates with standard errors.
pub fn simulate(
    scenario: &Scenario,
    policy: &Policy,
    metric: Option<&SoftMetricModel>,
    config: &SimConfig,
) -> Result<SimReport> {
    config.validate(scenario.t_s)?;
    policy.validate(&scenario.link)?;
    let sensing = policy.sensing(metric)?;
    let actions = policy.actions();

    let replicas = config.replicas.min(config.cycles as usize);
    let base = config.cycles / replicas as u64;
    let extra = (config.cycles % replicas as u64) as usize;
    let tallies: Vec<Tally> = (0..replicas)
        .into_par_iter()
        .map(|i| {
            let cycles = base + u64::from(i < extra);
            run_replica(scenario, &sensing, &actions, config, i, cycles)
        })
        .collect();

    let cycles = |t: &Tally| t.cycles;
    let (rate_secondary_mean, rate_secondary_se) = ratio_estimate(&tallies, |t| t.secondary, |t| t.time);
    let (rate_primary_mean, rate_primary_se) = ratio_estimate(&tallies, |t| t.primary, |t| t.time);
    let (p_ss_empirical, p_ss_se) = ratio_estimate(&tallies, |t| t.free_at_sensing, cycles);
    let (mean_cycle_empirical, mean_cycle_se) = ratio_estimate(&tallies, |t| t.time, cycles);
    let (level_occupancy, level_occupancy_se) = (0..actions.len())
        .map(|k| ratio_estimate(&tallies, |t| t.levels[k], cycles))
        .unzip();

    Ok(SimReport {
        rate_secondary_mean,
        rate_secondary_se,
        rate_primary_mean,
        rate_primary_se,
        p_ss_empirical,
        p_ss_se,
        mean_cycle_empirical,
        mean_cycle_se,
        level_occupancy,
        level_occupancy_se,
        cycles_run: config.cycles,
        replicas,
    })
}

/// One analytic-versus-simulated comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub quantity: String,
    pub analytic: f64,
    pub simulated: f64,
    pub std_err: f64,
    pub z: f64,
}

impl ValidationRow {
    fn new(quantity: &str, analytic: f64, simulated: f64, std_err: f64) -> Self {
        let diff = simulated - analytic;
        let z = if std_err > 0.0 {
            diff / std_err
        } else if diff.abs() <= 1e-12 * analytic.abs().max(1.0) {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
        Self {
            quantity: quantity.to_string(),
            analytic,
            simulated,
            std_err,
            z,
        }
    }

    pub fn flagged(&self, limit: f64) -> bool {
        self.z.is_nan() || self.z.abs() > limit
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
    pub report: SimReport,
}

impl ValidationReport {
    pub const Z_LIMIT: f64 = 3.0;

    /// Quantities whose |z| exceeds 3.
    pub fn flagged(&self) -> Vec<&ValidationRow> {
        self.rows.iter().filter(|r| r.flagged(Self::Z_LIMIT)).collect()
    }

    pub fn all_within(&self, limit: f64) -> bool {
        self.rows.iter().all(|r| !r.flagged(limit))
    }
}

/// Runs the simulator and the analytic evaluator on the same policy and
/// reports z-scores for `R_s`, `R_p`, `P^ss` and `μ`.
pub fn validate_policy(
    scenario: &Scenario,
    policy: &Policy,
    metric: Option<&SoftMetricModel>,
    config: &SimConfig,
) -> Result<ValidationReport> {
    let analytic = throughput::evaluate(scenario, 0.5, policy, metric)?;
    let report = simulate(scenario, policy, metric, config)?;
    let rows = vec![
        ValidationRow::new("rate_s", analytic.rate_secondary, report.rate_secondary_mean, report.rate_secondary_se),
        ValidationRow::new("rate_p", analytic.rate_primary, report.rate_primary_mean, report.rate_primary_se),
        ValidationRow::new("p_ss", analytic.p_ss, report.p_ss_empirical, report.p_ss_se),
        ValidationRow::new("mu", analytic.mean_cycle, report.mean_cycle_empirical, report.mean_cycle_se),
    ];
    Ok(ValidationReport { rows, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::ChannelPreset;
    use crate::throughput::PerfectPolicy;

    fn perfect(p_free: f64, t_free: f64, p_busy: f64, t_busy: f64) -> Policy {
        Policy::Perfect(PerfectPolicy {
            p_free,
            t_free,
            p_busy,
            t_busy,
        })
    }

    fn quick(cycles: u64) -> SimConfig {
        SimConfig {
            cycles,
            ..SimConfig::default()
        }
    }

    #[test]
    fn zero_power_has_zero_secondary_rate() {
        let s = ChannelPreset::ChannelB.scenario();
        let r = simulate(&s, &perfect(0.0, 3.0, 0.0, 1.0), None, &quick(20_000)).unwrap();
        assert_eq!(r.rate_secondary_mean, 0.0);
        assert_eq!(r.rate_secondary_se, 0.0);
        assert!(r.rate_primary_mean > 0.0);
    }

    #[test]
    fn equal_durations_stationary_sampling() {
        let s = ChannelPreset::ChannelB.scenario();
        let r = simulate(&s, &perfect(5.0, 2.0, 5.0, 2.0), None, &quick(100_000)).unwrap();
        assert!((r.p_ss_empirical - 5.0 / 9.0).abs() <= 3.0 * r.p_ss_se);
        assert_eq!(r.level_occupancy.len(), 2);
        assert!((r.level_occupancy[0] - r.p_ss_empirical).abs() < 1e-15);
    }

    #[test]
    fn reproducible_bit_for_bit() {
        let s = ChannelPreset::ChannelA.scenario();
        let policy = perfect(7.0, 4.0, 2.0, 1.0);
        let a = simulate(&s, &policy, None, &quick(5_000)).unwrap();
        let b = simulate(&s, &policy, None, &quick(5_000)).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let c = pool.install(|| simulate(&s, &policy, None, &quick(5_000)).unwrap());
        assert_eq!(a, c);
        let other = SimConfig {
            seed: 99,
            ..quick(5_000)
        };
        assert_ne!(a, simulate(&s, &policy, None, &other).unwrap());
    }

    #[test]
    fn config_checks() {
        let s = ChannelPreset::ChannelA.scenario();
        let policy = perfect(1.0, 1.0, 1.0, 1.0);
        let bad_lag = SimConfig {
            sensing_lag: 0.1,
            ..quick(100)
        };
        assert!(simulate(&s, &policy, None, &bad_lag).is_err());
        let metric = SoftMetricModel::new(3.0).unwrap();
        assert!(simulate(&s, &policy, Some(&metric), &quick(100)).is_err());
        let one_replica = SimConfig {
            replicas: 1,
            ..quick(100)
        };
        assert!(simulate(&s, &policy, None, &one_replica).is_err());
    }

    #[test]
    fn small_runs_still_report() {
        let s = ChannelPreset::ChannelB.scenario();
        let report = validate_policy(&s, &perfect(10.0, 5.0, 2.0, 5.0), None, &quick(10)).unwrap();
        assert_eq!(report.rows.len(), 4);
        assert_eq!(report.report.replicas, 10);
        assert_eq!(report.report.cycles_run, 10);
        assert!(report.rows.iter().all(|r| r.std_err >= 0.0));
    }

    #[test]
    fn renewal_busy_fraction() {
        let traffic = ChannelPreset::ChannelB.traffic();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let batches = 50;
        let fractions: Vec<f64> = (0..batches)
            .map(|_| {
                let mut p = RenewalProcess::stationary(traffic, &mut rng);
                let occ = p.advance(20_000.0, &mut rng);
                occ.busy / (occ.busy + occ.free)
            })
            .collect();
        let mean = fractions.iter().sum::<f64>() / batches as f64;
        let var = fractions.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (batches as f64 - 1.0);
        let se = (var / batches as f64).sqrt();
        assert!((mean - 4.0 / 9.0).abs() <= 3.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn empirical_free_time_after_free_observation() {
        let traffic = ChannelPreset::ChannelB.traffic();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        for t in [0.5, 2.0, 5.0] {
            let samples: Vec<f64> = (0..n)
                .map(|_| {
                    let mut p = RenewalProcess::starting_in(traffic, ChannelState::Free, &mut rng);
                    p.advance(t, &mut rng).free
                })
                .collect();
            let mean = samples.iter().sum::<f64>() / n as f64;
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            let se = (var / n as f64).sqrt();
            let expected = traffic.expected_free_time(ChannelState::Free, t).unwrap();
            assert!((mean - expected).abs() <= 3.0 * se, "t={t}: {mean} vs {expected} ± {se}");
        }
    }
}
