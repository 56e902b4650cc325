//! Exhaustive grid search with local refinement, and seeded coordinate
//! descent when the full grid is too large.
//!
//! A policy is flattened into a parameter vector laid out as
//! `[thresholds (S), powers (L), durations (L)]` with `L` sensing levels
//! (perfect sensing: `S = 0`, `L = 2`, levels ordered free then busy).
//! Every axis is tabulated once per round so the inner loop only
//! combines cached terms.
//!
//! Ties (objectives within `1e-12`) go to lower powers, then lower
//! durations, both scanned from the highest level down, then to higher
//! thresholds. For perfect sensing that is `P_B`, `P_F`, `T_B`, `T_F`.
//! The argmax is computed in two passes (maximum, then the smallest key
//! among near-maximal points), so it does not depend on evaluation order.

use std::cmp::Ordering;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_param, Error, Result};
use crate::sensing::{SoftMetricModel, ThresholdSet};
use crate::throughput::{
    evaluate_levels, DurationTerms, LevelTerms, PerfectPolicy, Policy, PolicyEvaluation,
    PowerTerms, Scenario, SoftPolicy,
};
use crate::traffic::ChannelState;

/// Objectives closer than this are treated as equal.
pub const TIE_TOLERANCE: f64 = 1.0e-12;

/// Largest supported number of thresholds.
pub const MAX_THRESHOLDS: usize = 7;
const MAX_LEVELS: usize = MAX_THRESHOLDS + 1;
const MAX_DIMS: usize = MAX_THRESHOLDS + 2 * MAX_LEVELS;

/// Grid densities and search limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Points on `[0, P_max]`.
    pub power_points: usize,
    /// Points on `[0, t_cap]`.
    pub time_points: usize,
    /// Points on `(0, γ_max]`.
    pub threshold_points: usize,
    pub refine_rounds: usize,
    /// Artificial upper bound on transmission time.
    pub t_cap: f64,
    /// Upper end of the threshold range; `None` uses `γ₀ + 5√γ₀ + 5`.
    pub gamma_max: Option<f64>,
    /// Largest full grid (points per round) searched exhaustively.
    pub full_grid_budget: u64,
    /// Fall back to coordinate descent when the full grid is over budget.
    pub descent_fallback: bool,
    /// Random starting points for coordinate descent.
    pub descent_starts: usize,
    pub descent_seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            power_points: 21,
            time_points: 21,
            threshold_points: 15,
            refine_rounds: 2,
            t_cap: crate::presets::T_CAP,
            gamma_max: None,
            full_grid_budget: 10_000_000,
            descent_fallback: true,
            descent_starts: 5,
            descent_seed: 0x6772_6964,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        check_param(self.power_points >= 2, "power_points", "must be >= 2")?;
        check_param(self.time_points >= 2, "time_points", "must be >= 2")?;
        check_param(self.threshold_points >= 2, "threshold_points", "must be >= 2")?;
        check_param(
            self.t_cap > 0.0 && self.t_cap.is_finite(),
            "t_cap",
            format!("must be finite and > 0, got {}", self.t_cap),
        )?;
        if let Some(g) = self.gamma_max {
            check_param(g > 0.0 && g.is_finite(), "gamma_max", format!("must be finite and > 0, got {g}"))?;
        }
        Ok(())
    }
}

/// Outcome of one optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub best_policy: Policy,
    pub evaluation: PolicyEvaluation,
    /// Distinct policy evaluations performed.
    pub evaluations_count: u64,
    /// Incumbent objective after the initial round and each refinement.
    pub grid_trace: Vec<f64>,
}

/// Which family of policies to search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SearchMode {
    Perfect,
    /// Soft sensing with `thresholds` = `S` quantization thresholds.
    Soft { metric: SoftMetricModel, thresholds: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AxisKind {
    Threshold,
    Power,
    Time,
}

/// Cached quantities for one value on one axis.
#[derive(Debug, Clone, Copy)]
enum Term {
    Threshold { value: f64, free_tail: f64, busy_tail: f64 },
    Power(PowerTerms),
    Time(DurationTerms),
}

impl Term {
    fn value(&self) -> f64 {
        match self {
            Term::Threshold { value, .. } => *value,
            Term::Power(p) => p.power,
            Term::Time(t) => t.duration,
        }
    }

    fn power(&self) -> &PowerTerms {
        match self {
            Term::Power(p) => p,
            _ => unreachable!("power slot holds a non-power term"),
        }
    }

    fn time(&self) -> &DurationTerms {
        match self {
            Term::Time(t) => t,
            _ => unreachable!("duration slot holds a non-duration term"),
        }
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    values: Vec<f64>,
    eval: PolicyEvaluation,
}

struct Problem<'a> {
    scenario: &'a Scenario,
    alpha: f64,
    metric: Option<SoftMetricModel>,
    thresholds: usize,
    levels: usize,
    kinds: Vec<AxisKind>,
    bounds: Vec<(f64, f64)>,
    counts: Vec<usize>,
}

impl<'a> Problem<'a> {
    fn new(scenario: &'a Scenario, alpha: f64, mode: SearchMode, grid: &GridSpec) -> Result<Self> {
        grid.validate()?;
        check_param(
            (0.0..=1.0).contains(&alpha),
            "alpha",
            format!("must lie in [0, 1], got {alpha}"),
        )?;
        let (metric, thresholds, levels, gamma_max) = match mode {
            SearchMode::Perfect => (None, 0, 2, 0.0),
            SearchMode::Soft { metric, thresholds } => {
                check_param(
                    (1..=MAX_THRESHOLDS).contains(&thresholds),
                    "s_levels",
                    format!("must lie in 1..={MAX_THRESHOLDS}, got {thresholds}"),
                )?;
                let gamma_max = grid.gamma_max.unwrap_or_else(|| metric.default_gamma_max());
                (Some(metric), thresholds, thresholds + 1, gamma_max)
            }
        };
        let mut kinds = vec![AxisKind::Threshold; thresholds];
        kinds.extend(std::iter::repeat_n(AxisKind::Power, levels));
        kinds.extend(std::iter::repeat_n(AxisKind::Time, levels));
        let bounds = kinds
            .iter()
            .map(|k| match k {
                AxisKind::Threshold => (0.0, gamma_max),
                AxisKind::Power => (0.0, scenario.link.p_max),
                AxisKind::Time => (0.0, grid.t_cap),
            })
            .collect();
        let counts = kinds
            .iter()
            .map(|k| match k {
                AxisKind::Threshold => grid.threshold_points,
                AxisKind::Power => grid.power_points,
                AxisKind::Time => grid.time_points,
            })
            .collect();
        Ok(Self {
            scenario,
            alpha,
            metric,
            thresholds,
            levels,
            kinds,
            bounds,
            counts,
        })
    }

    fn dims(&self) -> usize {
        self.kinds.len()
    }

    fn term(&self, dim: usize, value: f64) -> Term {
        match self.kinds[dim] {
            AxisKind::Threshold => {
                let metric = self.metric.as_ref().expect("thresholds imply a metric");
                Term::Threshold {
                    value,
                    free_tail: metric.tail(ChannelState::Free, value),
                    busy_tail: metric.tail(ChannelState::Busy, value),
                }
            }
            AxisKind::Power => Term::Power(self.scenario.power_terms(value)),
            AxisKind::Time => Term::Time(self.scenario.duration_terms(value)),
        }
    }

    fn table(&self, dim: usize, values: &[f64]) -> Vec<Term> {
        values.iter().map(|&v| self.term(dim, v)).collect()
    }

    /// Combines one term per dimension; `None` when thresholds are not
    /// strictly increasing.
    fn evaluate<'t>(&self, term: impl Fn(usize) -> &'t Term) -> Option<PolicyEvaluation> {
        let s = self.thresholds;
        let l = self.levels;
        let mut free = [0.0; MAX_LEVELS];
        let mut busy = [0.0; MAX_LEVELS];
        if self.metric.is_none() {
            free[0] = 1.0;
            busy[1] = 1.0;
        } else {
            let (mut prev_value, mut prev_free, mut prev_busy) = (0.0, 1.0, 1.0);
            for k in 0..s {
                let Term::Threshold { value, free_tail, busy_tail } = *term(k) else {
                    unreachable!("threshold slot holds a non-threshold term");
                };
                if k > 0 && value <= prev_value {
                    return None;
                }
                free[k] = (prev_free - free_tail).max(0.0);
                busy[k] = (prev_busy - busy_tail).max(0.0);
                (prev_value, prev_free, prev_busy) = (value, free_tail, busy_tail);
            }
            free[s] = prev_free;
            busy[s] = prev_busy;
        }
        let levels = (0..l).map(|k| LevelTerms {
            free_prob: free[k],
            busy_prob: busy[k],
            power: term(s + k).power(),
            duration: term(s + l + k).time(),
        });
        Some(evaluate_levels(levels, self.scenario.link.r_primary, self.alpha))
    }

    fn evaluate_point(&self, values: &[f64]) -> Option<PolicyEvaluation> {
        let terms: Vec<Term> = values.iter().enumerate().map(|(d, &v)| self.term(d, v)).collect();
        self.evaluate(|d| &terms[d])
    }

    /// Lexicographic tie-break key; `Less` means preferred.
    fn key_cmp(&self, a: &[f64], b: &[f64]) -> Ordering {
        let (s, l) = (self.thresholds, self.levels);
        let powers = (0..l).rev().map(|k| s + k);
        let durations = (0..l).rev().map(|k| s + l + k);
        for d in powers.chain(durations) {
            match a[d].total_cmp(&b[d]) {
                Ordering::Equal => continue,
                other => return other,
            }
        }
        for d in 0..s {
            match b[d].total_cmp(&a[d]) {
                Ordering::Equal => continue,
                other => return other,
            }
        }
        Ordering::Equal
    }

    fn prefers(&self, challenger: &Candidate, incumbent: &Candidate) -> bool {
        let (c, i) = (challenger.eval.objective, incumbent.eval.objective);
        if c > i + TIE_TOLERANCE {
            true
        } else if c >= i - TIE_TOLERANCE {
            self.key_cmp(&challenger.values, &incumbent.values) == Ordering::Less
        } else {
            false
        }
    }

    fn merge(&self, incumbent: Option<Candidate>, challenger: Candidate) -> Candidate {
        match incumbent {
            Some(inc) if !self.prefers(&challenger, &inc) => inc,
            _ => challenger,
        }
    }

    fn initial_axis(&self, dim: usize) -> Vec<f64> {
        let (lo, hi) = self.bounds[dim];
        let n = self.counts[dim];
        match self.kinds[dim] {
            AxisKind::Threshold => (1..=n).map(|i| hi * i as f64 / n as f64).collect(),
            _ => linspace(lo, hi, n),
        }
    }

    /// Axis of the same density over half the previous span, centred on
    /// the incumbent and clipped to the feasible range.
    fn refined_axis(&self, dim: usize, center: f64, round: usize) -> Vec<f64> {
        let (lo_bound, hi_bound) = self.bounds[dim];
        let n = self.counts[dim];
        let center = center.clamp(lo_bound, hi_bound);
        let half = (hi_bound - lo_bound) / 2f64.powi(round as i32 + 1);
        let lo = (center - half).max(lo_bound);
        let hi = (center + half).min(hi_bound);
        if self.kinds[dim] == AxisKind::Threshold && lo <= 0.0 {
            return (1..=n).map(|i| hi * i as f64 / n as f64).collect();
        }
        linspace(lo, hi, n)
    }

    fn full_grid_size(&self) -> u128 {
        self.counts.iter().map(|&c| c as u128).product()
    }

    /// Exhaustive pass over the product of `axes`.
    fn grid_round(&self, axes: &[Vec<f64>]) -> (Option<Candidate>, u64) {
        let tables: Vec<Vec<Term>> = axes.iter().enumerate().map(|(d, v)| self.table(d, v)).collect();
        let sizes: Vec<usize> = axes.iter().map(Vec::len).collect();
        let total: usize = sizes.iter().product();
        let dims = self.dims();
        let decode = |mut flat: usize| {
            let mut idx = [0usize; MAX_DIMS];
            for d in (0..dims).rev() {
                idx[d] = flat % sizes[d];
                flat /= sizes[d];
            }
            idx
        };

        let objectives: Vec<f64> = (0..total)
            .into_par_iter()
            .map(|flat| {
                let idx = decode(flat);
                self.evaluate(|d| &tables[d][idx[d]])
                    .map_or(f64::NEG_INFINITY, |e| e.objective)
            })
            .collect();

        let evaluated = objectives.iter().filter(|o| o.is_finite()).count() as u64;
        let best = objectives.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !best.is_finite() {
            return (None, evaluated);
        }
        let mut chosen: Option<Vec<f64>> = None;
        for (flat, &obj) in objectives.iter().enumerate() {
            if obj < best - TIE_TOLERANCE {
                continue;
            }
            let idx = decode(flat);
            let values: Vec<f64> = (0..dims).map(|d| tables[d][idx[d]].value()).collect();
            let replace = match &chosen {
                None => true,
                Some(cur) => self.key_cmp(&values, cur) == Ordering::Less,
            };
            if replace {
                chosen = Some(values);
            }
        }
        let values = chosen.expect("at least one point attains the maximum");
        let eval = self.evaluate_point(&values).expect("chosen point is feasible");
        (Some(Candidate { values, eval }), evaluated)
    }

    /// Coordinate descent over the grid axes from `start`; moves only on
    /// strict improvement, so it terminates.
    fn descend(&self, start: &Candidate, axes: &[Vec<f64>]) -> (Candidate, u64) {
        let tables: Vec<Vec<Term>> = axes.iter().enumerate().map(|(d, v)| self.table(d, v)).collect();
        let mut current: Vec<Term> = start.values.iter().enumerate().map(|(d, &v)| self.term(d, v)).collect();
        let mut best = start.clone();
        let mut count = 0;

        for _sweep in 0..1000 {
            let mut moved = false;
            for dim in 0..self.dims() {
                let mut axis_best: Option<(usize, Candidate)> = None;
                for (j, term) in tables[dim].iter().enumerate() {
                    if term.value() == best.values[dim] {
                        continue;
                    }
                    let Some(eval) = self.evaluate(|d| if d == dim { term } else { &current[d] }) else {
                        continue;
                    };
                    count += 1;
                    let mut values = best.values.clone();
                    values[dim] = term.value();
                    let cand = Candidate { values, eval };
                    let take = match &axis_best {
                        None => true,
                        Some((_, inc)) => self.prefers(&cand, inc),
                    };
                    if take {
                        axis_best = Some((j, cand));
                    }
                }
                if let Some((j, cand)) = axis_best {
                    if cand.eval.objective > best.eval.objective + TIE_TOLERANCE {
                        current[dim] = tables[dim][j];
                        best = cand;
                        moved = true;
                    }
                }
            }
            if !moved {
                break;
            }
        }
        (best, count)
    }

    fn random_start(&self, axes: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Option<Candidate> {
        for _ in 0..100 {
            let mut values: Vec<f64> = axes
                .iter()
                .map(|axis| *axis.choose(rng).expect("axes are non-empty"))
                .collect();
            values[..self.thresholds].sort_by(f64::total_cmp);
            if let Some(eval) = self.evaluate_point(&values) {
                return Some(Candidate { values, eval });
            }
        }
        None
    }

    fn search(&self, grid: &GridSpec, seeds: Vec<Vec<f64>>) -> Result<(Candidate, u64, Vec<f64>)> {
        let mut count = 0u64;
        let mut incumbent: Option<Candidate> = None;
        let mut seed_candidates = Vec::new();
        for values in seeds {
            if let Some(eval) = self.evaluate_point(&values) {
                count += 1;
                seed_candidates.push(Candidate { values, eval });
            }
        }
        let axes0: Vec<Vec<f64>> = (0..self.dims()).map(|d| self.initial_axis(d)).collect();
        let full = self.full_grid_size();
        let mut trace = Vec::with_capacity(grid.refine_rounds + 1);

        if full <= grid.full_grid_budget as u128 {
            for round in 0..=grid.refine_rounds {
                let axes = match (&incumbent, round) {
                    (Some(inc), r) if r > 0 => self.refined_axes(&inc.values, r),
                    _ => axes0.clone(),
                };
                let (cand, n) = self.grid_round(&axes);
                count += n;
                if let Some(c) = cand {
                    incumbent = Some(self.merge(incumbent, c));
                }
                if round == 0 {
                    for seed in seed_candidates.drain(..) {
                        incumbent = Some(self.merge(incumbent, seed));
                    }
                }
                trace.push(incumbent.as_ref().map_or(f64::NEG_INFINITY, |c| c.eval.objective));
            }
        } else if grid.descent_fallback {
            let mut rng = ChaCha8Rng::seed_from_u64(grid.descent_seed);
            let mut starts = seed_candidates;
            for _ in 0..grid.descent_starts {
                if let Some(c) = self.random_start(&axes0, &mut rng) {
                    count += 1;
                    starts.push(c);
                }
            }
            for start in &starts {
                let (local, n) = self.descend(start, &axes0);
                count += n;
                incumbent = Some(self.merge(incumbent, local));
            }
            trace.push(incumbent.as_ref().map_or(f64::NEG_INFINITY, |c| c.eval.objective));
            for round in 1..=grid.refine_rounds {
                let Some(inc) = incumbent.clone() else { break };
                let axes = self.refined_axes(&inc.values, round);
                let (local, n) = self.descend(&inc, &axes);
                count += n;
                incumbent = Some(self.merge(Some(inc), local));
                trace.push(incumbent.as_ref().map_or(f64::NEG_INFINITY, |c| c.eval.objective));
            }
        } else {
            return Err(Error::Dimensionality {
                evaluations: full,
                budget: grid.full_grid_budget,
            });
        }

        let best = incumbent.ok_or_else(|| Error::InvalidParameter {
            name: "grid",
            reason: "no feasible point".into(),
        })?;
        Ok((best, count, trace))
    }

    fn refined_axes(&self, center: &[f64], round: usize) -> Vec<Vec<f64>> {
        (0..self.dims()).map(|d| self.refined_axis(d, center[d], round)).collect()
    }

    fn to_policy(&self, values: &[f64]) -> Result<Policy> {
        let (s, l) = (self.thresholds, self.levels);
        if self.metric.is_none() {
            return Ok(Policy::Perfect(PerfectPolicy {
                p_free: values[0],
                p_busy: values[1],
                t_free: values[2],
                t_busy: values[3],
            }));
        }
        Ok(Policy::Soft(SoftPolicy::new(
            ThresholdSet::new(values[..s].to_vec())?,
            values[s..s + l].to_vec(),
            values[s + l..].to_vec(),
        )?))
    }

    /// Flattens a seed policy, splitting one level when it has one threshold
    /// fewer than the search.
    fn seed_values(&self, policy: &Policy) -> Result<Vec<f64>> {
        let values = match (policy, self.metric.is_some()) {
            (Policy::Perfect(p), false) => vec![p.p_free, p.p_busy, p.t_free, p.t_busy],
            (Policy::Soft(p), true) => {
                let s = p.thresholds.len();
                if s == self.thresholds {
                    let mut v = p.thresholds.values().to_vec();
                    v.extend(&p.powers);
                    v.extend(&p.durations);
                    v
                } else if s + 1 == self.thresholds {
                    self.split_level(p)
                } else {
                    return Err(Error::ModeMismatch(format!(
                        "seed has {s} thresholds, search has {}",
                        self.thresholds
                    )));
                }
            }
            _ => {
                return Err(Error::ModeMismatch("seed policy does not match the search mode".into()))
            }
        };
        for (d, &v) in values.iter().enumerate() {
            let (lo, hi) = self.bounds[d];
            let ok = match self.kinds[d] {
                AxisKind::Threshold => v > 0.0 && v.is_finite(),
                _ => (lo..=hi).contains(&v),
            };
            check_param(ok, "seed", format!("value {v} outside [{lo}, {hi}]"))?;
        }
        Ok(values)
    }

    /// Adds one threshold without changing behaviour: the new level copies
    /// the action of the level it is carved out of.
    fn split_level(&self, p: &SoftPolicy) -> Vec<f64> {
        let gamma_max = self.bounds[0].1;
        let mut thresholds = p.thresholds.values().to_vec();
        let mut powers = p.powers.clone();
        let mut durations = p.durations.clone();
        let top = thresholds.last().copied().unwrap_or(0.0);
        if top < gamma_max {
            thresholds.push(0.5 * (top + gamma_max));
            powers.push(*powers.last().expect("at least one level"));
            durations.push(*durations.last().expect("at least one level"));
        } else {
            thresholds.insert(0, 0.5 * thresholds[0]);
            powers.insert(0, powers[0]);
            durations.insert(0, durations[0]);
        }
        thresholds.extend(powers);
        thresholds.extend(durations);
        thresholds
    }

    fn run(&self, grid: &GridSpec, seeds: &[Policy]) -> Result<OptResult> {
        let seed_values = seeds.iter().map(|p| self.seed_values(p)).collect::<Result<Vec<_>>>()?;
        let (best, evaluations_count, grid_trace) = self.search(grid, seed_values)?;
        Ok(OptResult {
            best_policy: self.to_policy(&best.values)?,
            evaluation: best.eval,
            evaluations_count,
            grid_trace,
        })
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    let mut v: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
    v[n - 1] = hi;
    v
}

/// Best perfect-sensing policy over `(P_F, T_F, P_B, T_B)`.
pub fn optimize_perfect(scenario: &Scenario, alpha: f64, grid: &GridSpec) -> Result<OptResult> {
    optimize_perfect_seeded(scenario, alpha, grid, &[])
}

/// As [`optimize_perfect`], with extra starting points evaluated alongside
/// the first grid.
pub fn optimize_perfect_seeded(
    scenario: &Scenario,
    alpha: f64,
    grid: &GridSpec,
    seeds: &[PerfectPolicy],
) -> Result<OptResult> {
    let problem = Problem::new(scenario, alpha, SearchMode::Perfect, grid)?;
    let seeds: Vec<Policy> = seeds.iter().copied().map(Policy::Perfect).collect();
    problem.run(grid, &seeds)
}

/// Best soft-sensing policy with `s_levels` thresholds (`3S+2` parameters).
///
/// With `S ≥ 2` and no seed carrying `S-1` thresholds, the `S-1` problem
/// is solved first and its optimum, with one level split, seeds the search,
/// so the result is never worse than the coarser quantizer.
pub fn optimize_soft(
    scenario: &Scenario,
    metric: &SoftMetricModel,
    alpha: f64,
    s_levels: usize,
    grid: &GridSpec,
    seeds: &[SoftPolicy],
) -> Result<OptResult> {
    let mode = SearchMode::Soft {
        metric: *metric,
        thresholds: s_levels,
    };
    let problem = Problem::new(scenario, alpha, mode, grid)?;
    let mut seeds: Vec<Policy> = seeds.iter().cloned().map(Policy::Soft).collect();
    let has_coarser = seeds.iter().any(|p| p.levels() == s_levels);
    if s_levels >= 2 && !has_coarser {
        let coarser = optimize_soft(scenario, metric, alpha, s_levels - 1, grid, &[])?;
        seeds.push(coarser.best_policy);
    }
    problem.run(grid, &seeds)
}

/// Optimizes for each `α` in ascending order; each run also starts from the
/// previous `α`'s optimum, and for `S ≥ 2` from the `S-1` optimum at the
/// same `α`.
pub fn sweep_alpha(
    scenario: &Scenario,
    mode: SearchMode,
    alphas: &[f64],
    grid: &GridSpec,
) -> Result<Vec<OptResult>> {
    let lower = match mode {
        SearchMode::Soft { metric, thresholds } if thresholds >= 2 => {
            let coarser = SearchMode::Soft {
                metric,
                thresholds: thresholds - 1,
            };
            Some(sweep_alpha(scenario, coarser, alphas, grid)?)
        }
        _ => None,
    };
    sweep_alpha_with_lower(scenario, mode, alphas, grid, lower.as_deref())
}

/// As [`sweep_alpha`] with the coarser sweep supplied by the caller.
pub fn sweep_alpha_with_lower(
    scenario: &Scenario,
    mode: SearchMode,
    alphas: &[f64],
    grid: &GridSpec,
    lower: Option<&[OptResult]>,
) -> Result<Vec<OptResult>> {
    check_param(
        alphas.iter().all(|a| (0.0..=1.0).contains(a)),
        "alphas",
        "every alpha must lie in [0, 1]",
    )?;
    check_param(
        alphas.windows(2).all(|w| w[0] <= w[1]),
        "alphas",
        "must be sorted ascending",
    )?;
    if let Some(lower) = lower {
        check_param(lower.len() == alphas.len(), "lower", "needs one result per alpha")?;
    }
    let mut results: Vec<OptResult> = Vec::with_capacity(alphas.len());
    for (i, &alpha) in alphas.iter().enumerate() {
        let mut seeds: Vec<Policy> = Vec::new();
        if let Some(prev) = results.last() {
            seeds.push(prev.best_policy.clone());
        }
        if let Some(lower) = lower {
            seeds.push(lower[i].best_policy.clone());
        }
        let problem = Problem::new(scenario, alpha, mode, grid)?;
        let result = match mode {
            SearchMode::Soft { thresholds, .. } if thresholds >= 2 && lower.is_none() => {
                let SearchMode::Soft { metric, .. } = mode else { unreachable!() };
                let soft_seeds: Vec<SoftPolicy> = seeds
                    .into_iter()
                    .filter_map(|p| match p {
                        Policy::Soft(s) => Some(s),
                        Policy::Perfect(_) => None,
                    })
                    .collect();
                optimize_soft(scenario, &metric, alpha, thresholds, grid, &soft_seeds)?
            }
            _ => problem.run(grid, &seeds)?,
        };
        results.push(result);
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::ChannelPreset;
    use crate::throughput::evaluate;

    fn coarse() -> GridSpec {
        GridSpec {
            power_points: 6,
            time_points: 6,
            threshold_points: 5,
            refine_rounds: 2,
            ..GridSpec::default()
        }
    }

    #[test]
    fn linspace_hits_endpoints() {
        let v = linspace(0.0, 20.0, 21);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[20], 20.0);
        assert_eq!(v[10], 10.0);
    }

    #[test]
    fn evaluation_count_matches_grid() {
        let s = ChannelPreset::ChannelB.scenario();
        let g = coarse();
        let r = optimize_perfect(&s, 0.5, &g).unwrap();
        assert_eq!(r.evaluations_count, 3 * 6u64.pow(4));
        let seeded = optimize_perfect_seeded(
            &s,
            0.5,
            &g,
            &[PerfectPolicy {
                p_free: 1.0,
                t_free: 1.0,
                p_busy: 1.0,
                t_busy: 1.0,
            }],
        )
        .unwrap();
        assert_eq!(seeded.evaluations_count, 3 * 6u64.pow(4) + 1);
    }

    #[test]
    fn trace_is_monotone_and_matches_evaluation() {
        let s = ChannelPreset::ChannelA.scenario();
        for alpha in [0.2, 0.6, 0.95] {
            let r = optimize_perfect(&s, alpha, &coarse()).unwrap();
            assert_eq!(r.grid_trace.len(), 3);
            for w in r.grid_trace.windows(2) {
                assert!(w[1] >= w[0] - TIE_TOLERANCE);
            }
            let check = evaluate(&s, alpha, &r.best_policy, None).unwrap();
            assert!((check.objective - r.evaluation.objective).abs() < 1e-12);
            assert_eq!(*r.grid_trace.last().unwrap(), r.evaluation.objective);
        }
    }

    #[test]
    fn grid_optimum_beats_every_grid_point() {
        let s = ChannelPreset::ChannelB.scenario();
        let g = GridSpec {
            refine_rounds: 0,
            ..coarse()
        };
        let r = optimize_perfect(&s, 0.7, &g).unwrap();
        let axis_p = linspace(0.0, 10.0, 6);
        let axis_t = linspace(0.0, 20.0, 6);
        for &pf in &axis_p {
            for &pb in &axis_p {
                for &tf in &axis_t {
                    for &tb in &axis_t {
                        let policy = Policy::Perfect(PerfectPolicy {
                            p_free: pf,
                            t_free: tf,
                            p_busy: pb,
                            t_busy: tb,
                        });
                        let e = evaluate(&s, 0.7, &policy, None).unwrap();
                        assert!(e.objective <= r.evaluation.objective + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let s = ChannelPreset::ChannelB.scenario();
        let metric = SoftMetricModel::new(3.0).unwrap();
        let a = optimize_soft(&s, &metric, 0.5, 1, &coarse(), &[]).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let b = pool.install(|| optimize_soft(&s, &metric, 0.5, 1, &coarse(), &[]).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn over_budget_without_fallback_errors() {
        let s = ChannelPreset::ChannelB.scenario();
        let metric = SoftMetricModel::new(3.0).unwrap();
        let g = GridSpec {
            full_grid_budget: 100,
            descent_fallback: false,
            ..coarse()
        };
        let r = optimize_soft(&s, &metric, 0.5, 1, &g, &[]);
        assert!(matches!(r, Err(Error::Dimensionality { .. })));
    }

    #[test]
    fn two_thresholds_never_worse_than_one() {
        let s = ChannelPreset::ChannelB.scenario();
        let metric = SoftMetricModel::new(3.0).unwrap();
        for alpha in [0.3, 0.7] {
            let one = optimize_soft(&s, &metric, alpha, 1, &coarse(), &[]).unwrap();
            let two = optimize_soft(&s, &metric, alpha, 2, &coarse(), &[]).unwrap();
            assert!(two.evaluation.objective >= one.evaluation.objective - 1e-9);
            let Policy::Soft(p) = &two.best_policy else { panic!("soft result expected") };
            assert_eq!(p.thresholds.len(), 2);
        }
    }

    #[test]
    fn level_split_preserves_objective() {
        let s = ChannelPreset::ChannelB.scenario();
        let metric = SoftMetricModel::new(3.0).unwrap();
        let one = SoftPolicy::new(ThresholdSet::new(vec![2.0]).unwrap(), vec![10.0, 3.0], vec![12.0, 2.0]).unwrap();
        let mode = SearchMode::Soft {
            metric,
            thresholds: 2,
        };
        let problem = Problem::new(&s, 0.4, mode, &coarse()).unwrap();
        let split = problem.seed_values(&Policy::Soft(one.clone())).unwrap();
        let e_split = problem.evaluate_point(&split).unwrap();
        let e_one = evaluate(&s, 0.4, &Policy::Soft(one), Some(&metric)).unwrap();
        assert!((e_split.objective - e_one.objective).abs() < 1e-12);
    }

    #[test]
    fn tie_break_prefers_low_power_and_duration() {
        let s = ChannelPreset::ChannelA.scenario();
        let problem = Problem::new(&s, 1.0, SearchMode::Perfect, &coarse()).unwrap();
        // [p_free, p_busy, t_free, t_busy]
        let a = [0.0, 0.0, 5.0, 5.0];
        let b = [0.0, 2.0, 5.0, 5.0];
        let c = [1.0, 0.0, 5.0, 5.0];
        assert_eq!(problem.key_cmp(&a, &b), Ordering::Less);
        assert_eq!(problem.key_cmp(&c, &b), Ordering::Less);
        assert_eq!(problem.key_cmp(&a, &a), Ordering::Equal);
    }

    #[test]
    fn sweep_rejects_unsorted_alphas() {
        let s = ChannelPreset::ChannelB.scenario();
        assert!(sweep_alpha(&s, SearchMode::Perfect, &[0.5, 0.2], &coarse()).is_err());
        assert!(sweep_alpha(&s, SearchMode::Perfect, &[0.5, 1.2], &coarse()).is_err());
        let r = sweep_alpha(&s, SearchMode::Perfect, &[0.0, 0.5, 1.0], &coarse()).unwrap();
        assert_eq!(r.len(), 3);
    }
}
