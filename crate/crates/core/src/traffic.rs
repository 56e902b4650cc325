//! Alternating on/off primary channel with exponential holding times.

use serde::{Deserialize, Serialize};

use crate::error::{check_param, Error, Result};

/// Primary channel state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelState {
    /// Primary transmitter off.
    Free,
    /// Primary transmitter on.
    Busy,
}

impl ChannelState {
    pub fn is_free(self) -> bool {
        matches!(self, ChannelState::Free)
    }

    pub fn flip(self) -> Self {
        match self {
            ChannelState::Free => ChannelState::Busy,
            ChannelState::Busy => ChannelState::Free,
        }
    }
}

/// Mean on and off durations of the primary user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficModel {
    t_on_mean: f64,
    t_off_mean: f64,
}

fn check_time(function: &'static str, t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            function,
            name: "t",
            value: t,
        })
    }
}

impl TrafficModel {
    pub fn new(t_on_mean: f64, t_off_mean: f64) -> Result<Self> {
        check_param(
            t_on_mean > 0.0 && t_on_mean.is_finite(),
            "t_on",
            format!("mean on duration must be finite and > 0, got {t_on_mean}"),
        )?;
        check_param(
            t_off_mean > 0.0 && t_off_mean.is_finite(),
            "t_off",
            format!("mean off duration must be finite and > 0, got {t_off_mean}"),
        )?;
        Ok(Self {
            t_on_mean,
            t_off_mean,
        })
    }

    pub fn t_on_mean(&self) -> f64 {
        self.t_on_mean
    }

    pub fn t_off_mean(&self) -> f64 {
        self.t_off_mean
    }

    pub fn lambda_on(&self) -> f64 {
        1.0 / self.t_on_mean
    }

    pub fn lambda_off(&self) -> f64 {
        1.0 / self.t_off_mean
    }

    /// `Λ = λ_on + λ_off`, the relaxation rate of the two-state chain.
    pub fn total_rate(&self) -> f64 {
        self.lambda_on() + self.lambda_off()
    }

    /// Long-run fraction of time the primary is on.
    pub fn utilization(&self) -> f64 {
        self.t_on_mean / (self.t_on_mean + self.t_off_mean)
    }

    /// Density of the holding time in `state` (on period for `Busy`, off
    /// period for `Free`).
    pub fn duration_pdf(&self, state: ChannelState, t: f64) -> Result<f64> {
        check_time("duration_pdf", t)?;
        let rate = match state {
            ChannelState::Busy => self.lambda_on(),
            ChannelState::Free => self.lambda_off(),
        };
        Ok(rate * (-rate * t).exp())
    }

    /// Probability of being in `to` a time `t` after being observed in `from`.
    pub fn transition_prob(&self, from: ChannelState, to: ChannelState, t: f64) -> Result<f64> {
        check_time("transition_prob", t)?;
        let free = self.free_prob_after(from, t);
        Ok(if to.is_free() { free } else { 1.0 - free })
    }

    /// Expected time the channel spends free during `[0, t]` given its
    /// state at time 0.
    pub fn expected_free_time(&self, sensed: ChannelState, t: f64) -> Result<f64> {
        check_time("expected_free_time", t)?;
        Ok(self.free_time_after(sensed, t))
    }

    /// Expected time the channel spends busy during `[0, t]` given its
    /// state at time 0.
    pub fn expected_busy_time(&self, sensed: ChannelState, t: f64) -> Result<f64> {
        check_time("expected_busy_time", t)?;
        Ok(self.busy_time_after(sensed, t))
    }

    /// `P^{00}(t)` for `Free`, `P^{10}(t)` for `Busy`.
    pub(crate) fn free_prob_after(&self, from: ChannelState, t: f64) -> f64 {
        let u = self.utilization();
        let decay = (-self.total_rate() * t).exp();
        match from {
            ChannelState::Free => (1.0 - u) + u * decay,
            ChannelState::Busy => (1.0 - u) * (1.0 - decay),
        }
    }

    /// `t - (1 - e^{-Λt})/Λ`, the part of a window not yet relaxed to
    /// stationarity; written with `expm1` to keep small windows accurate.
    fn excess(&self, t: f64) -> f64 {
        let rate = self.total_rate();
        (t + (-rate * t).exp_m1() / rate).max(0.0)
    }

    pub(crate) fn free_time_after(&self, sensed: ChannelState, t: f64) -> f64 {
        let u = self.utilization();
        match sensed {
            ChannelState::Free => t - u * self.excess(t),
            ChannelState::Busy => (1.0 - u) * self.excess(t),
        }
    }

    pub(crate) fn busy_time_after(&self, sensed: ChannelState, t: f64) -> f64 {
        let u = self.utilization();
        match sensed {
            ChannelState::Free => u * self.excess(t),
            ChannelState::Busy => t - (1.0 - u) * self.excess(t),
        }
    }
}
