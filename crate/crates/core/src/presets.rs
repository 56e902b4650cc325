//! Reference parameter sets: one primary channel, three interference
//! levels at the primary receiver.

use serde::{Deserialize, Serialize};

use crate::link::LinkBudget;
use crate::throughput::Scenario;
use crate::traffic::TrafficModel;

pub const T_ON: f64 = 4.0;
pub const T_OFF: f64 = 5.0;
pub const SENSING_TIME: f64 = 0.05;
pub const R_PRIMARY: f64 = 4.5;
pub const NOISE: f64 = 1.0;
pub const P_PRIMARY: f64 = 100.0;
pub const P_MAX: f64 = 10.0;
pub const GAIN_SS: f64 = 2.0;
pub const GAIN_PP: f64 = 3.0;
pub const GAIN_PS: f64 = 0.03;
/// Upper bound on transmission time used by the grid search.
pub const T_CAP: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelPreset {
    /// Strong secondary → primary interference (ḡ_sp = 2).
    ChannelA,
    /// Moderate interference (ḡ_sp = 0.2).
    ChannelB,
    /// Negligible interference (ḡ_sp = 0.002).
    TinyGsp,
}

impl ChannelPreset {
    pub const ALL: [ChannelPreset; 3] = [Self::ChannelA, Self::ChannelB, Self::TinyGsp];

    pub fn name(self) -> &'static str {
        match self {
            Self::ChannelA => "channel_a",
            Self::ChannelB => "channel_b",
            Self::TinyGsp => "tiny_gsp",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn mean_gain_sp(self) -> f64 {
        match self {
            Self::ChannelA => 2.0,
            Self::ChannelB => 0.2,
            Self::TinyGsp => 0.002,
        }
    }

    pub fn traffic(self) -> TrafficModel {
        TrafficModel::new(T_ON, T_OFF).expect("preset traffic is valid")
    }

    pub fn link(self) -> LinkBudget {
        LinkBudget {
            p_primary: P_PRIMARY,
            r_primary: R_PRIMARY,
            noise_p: NOISE,
            noise_s: NOISE,
            mean_gain_pp: GAIN_PP,
            mean_gain_ss: GAIN_SS,
            mean_gain_ps: GAIN_PS,
            mean_gain_sp: self.mean_gain_sp(),
            p_max: P_MAX,
        }
    }

    pub fn scenario(self) -> Scenario {
        Scenario::new(self.traffic(), self.link(), SENSING_TIME).expect("preset scenario is valid")
    }
}
