//! Sensing outcomes: perfect state observation and quantized soft sensing.
//!
//! Under soft sensing the metric `γ` has density `f₀(γ) = e^{-γ}` while the
//! primary is idle and `f₁(γ) = e^{-(γ+γ₀)} I0(2√(γγ₀))` while it is
//! active. The metric axis is cut by `S` thresholds into `S+1` levels and
//! each level carries its own transmit power and duration.
//!
//! Levels are indexed from zero here; level `k` covers
//! `[γ^th_k, γ^th_{k+1})` with `γ^th_0 = 0` and `γ^th_{S+1} = ∞`.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_param, Error, Result};
use crate::numerics::{active_metric_density, marcum_q1_unchecked};
use crate::traffic::ChannelState;

/// Conditional metric distributions, parameterised by `γ₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftMetricModel {
    gamma0: f64,
}

impl SoftMetricModel {
    pub fn new(gamma0: f64) -> Result<Self> {
        check_param(
            gamma0 >= 0.0 && gamma0.is_finite(),
            "gamma0",
            format!("must be finite and >= 0, got {gamma0}"),
        )?;
        Ok(Self { gamma0 })
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    /// Conditional density of the metric given the channel state.
    pub fn pdf(&self, state: ChannelState, gamma: f64) -> f64 {
        if gamma < 0.0 {
            return 0.0;
        }
        match state {
            ChannelState::Free => (-gamma).exp(),
            ChannelState::Busy => active_metric_density(gamma, self.gamma0),
        }
    }

    /// `Pr{γ ≥ t | state}`.
    pub fn tail(&self, state: ChannelState, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        if t.is_infinite() {
            return 0.0;
        }
        match state {
            ChannelState::Free => (-t).exp(),
            ChannelState::Busy => marcum_q1_unchecked((2.0 * self.gamma0).sqrt(), (2.0 * t).sqrt()),
        }
    }

    /// Upper end of the default threshold search range, `γ₀ + 5√γ₀ + 5`.
    pub fn default_gamma_max(&self) -> f64 {
        self.gamma0 + 5.0 * self.gamma0.sqrt() + 5.0
    }

    /// Draws a metric value for the given true channel state.
    pub fn sample<R: Rng + ?Sized>(&self, state: ChannelState, rng: &mut R) -> f64 {
        match state {
            ChannelState::Free => Exp1.sample(rng),
            ChannelState::Busy => {
                let z1: f64 = StandardNormal.sample(rng);
                let z2: f64 = StandardNormal.sample(rng);
                let shifted = z1 + (2.0 * self.gamma0).sqrt();
                0.5 * (shifted * shifted + z2 * z2)
            }
        }
    }

    /// Probability of each of the `S+1` levels given the channel state
    /// (`ε_k` when free, `ϑ_k` when busy).
    pub fn level_probs(&self, thresholds: &ThresholdSet, state: ChannelState) -> Vec<f64> {
        let tails: Vec<f64> = thresholds.values.iter().map(|&t| self.tail(state, t)).collect();
        probs_from_tails(&tails)
    }
}

/// Turns tail probabilities at each threshold into level probabilities.
pub(crate) fn probs_from_tails(tails: &[f64]) -> Vec<f64> {
    let mut probs = Vec::with_capacity(tails.len() + 1);
    let mut upper = 1.0;
    for &tail in tails {
        probs.push((upper - tail).max(0.0));
        upper = tail;
    }
    probs.push(upper.max(0.0));
    probs
}

/// Strictly increasing, finite, positive quantization thresholds.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ThresholdSet {
    values: Vec<f64>,
}

impl ThresholdSet {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let ok = values.iter().all(|v| v.is_finite() && *v > 0.0)
            && values.windows(2).all(|w| w[0] < w[1]);
        if ok {
            Ok(Self { values })
        } else {
            Err(Error::UnorderedThresholds(values))
        }
    }

    /// A single level spanning `[0, ∞)`.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of thresholds `S`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of quantization levels, `S + 1`.
    pub fn levels(&self) -> usize {
        self.values.len() + 1
    }

    /// Zero-based level whose right-open interval contains `gamma`.
    pub fn classify(&self, gamma: f64) -> usize {
        self.values.partition_point(|&t| t <= gamma)
    }
}

impl TryFrom<Vec<f64>> for ThresholdSet {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<ThresholdSet> for Vec<f64> {
    fn from(set: ThresholdSet) -> Self {
        set.values
    }
}

/// How the secondary turns a sensing period into a level index.
#[derive(Debug, Clone, PartialEq)]
pub enum Sensing {
    /// The true state is revealed: level 0 when free, level 1 when busy.
    Perfect,
    /// The metric is drawn from the model and quantized.
    Soft {
        model: SoftMetricModel,
        thresholds: ThresholdSet,
    },
}

impl Sensing {
    pub fn levels(&self) -> usize {
        match self {
            Sensing::Perfect => 2,
            Sensing::Soft { thresholds, .. } => thresholds.levels(),
        }
    }

    /// Level probabilities conditioned on the true state.
    pub fn level_probs(&self, state: ChannelState) -> Vec<f64> {
        match self {
            Sensing::Perfect => match state {
                ChannelState::Free => vec![1.0, 0.0],
                ChannelState::Busy => vec![0.0, 1.0],
            },
            Sensing::Soft { model, thresholds } => model.level_probs(thresholds, state),
        }
    }

    /// Senses the channel once.
    pub fn observe<R: Rng + ?Sized>(&self, state: ChannelState, rng: &mut R) -> usize {
        match self {
            Sensing::Perfect => usize::from(!state.is_free()),
            Sensing::Soft { model, thresholds } => thresholds.classify(model.sample(state, rng)),
        }
    }
}
