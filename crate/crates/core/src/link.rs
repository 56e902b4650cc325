//! Rayleigh-fading link closed forms: primary outage probability and the
//! secondary ergodic capacities without and with primary interference.
//!
//! All gains are exponentially distributed with the means held in
//! [`LinkBudget`]. Capacities are in nats per channel use.

use serde::{Deserialize, Serialize};

use crate::error::{check_param, Error, Result};
use crate::numerics::scaled_e1;

/// Relative gap between `p·ḡ_ss` and `P_p·ḡ_ps` under which the
/// equal-means form of the interfered capacity is used.
const EQUAL_MEANS_RADIUS: f64 = 1.0e-9;

/// Radio constants shared by the primary and secondary links.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// Primary transmit power `P_p`.
    pub p_primary: f64,
    /// Fixed primary rate `r₀` in nats.
    pub r_primary: f64,
    /// Noise variance at the primary receiver.
    pub noise_p: f64,
    /// Noise variance at the secondary receiver.
    pub noise_s: f64,
    /// Mean gain primary transmitter → primary receiver.
    pub mean_gain_pp: f64,
    /// Mean gain secondary transmitter → secondary receiver.
    pub mean_gain_ss: f64,
    /// Mean gain primary transmitter → secondary receiver.
    pub mean_gain_ps: f64,
    /// Mean gain secondary transmitter → primary receiver.
    pub mean_gain_sp: f64,
    /// Secondary power cap.
    pub p_max: f64,
}

fn check_power(function: &'static str, p: f64) -> Result<()> {
    if p >= 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            function,
            name: "p",
            value: p,
        })
    }
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("p_primary", self.p_primary),
            ("r0", self.r_primary),
            ("noise_p", self.noise_p),
            ("noise_s", self.noise_s),
            ("g_pp", self.mean_gain_pp),
            ("g_ss", self.mean_gain_ss),
            ("g_ps", self.mean_gain_ps),
            ("g_sp", self.mean_gain_sp),
            ("p_max", self.p_max),
        ];
        for (name, value) in fields {
            check_param(
                value > 0.0 && value.is_finite(),
                name,
                format!("must be finite and > 0, got {value}"),
            )?;
        }
        Ok(())
    }

    /// `c = e^{r₀} - 1`, the SINR the primary needs to support `r₀`.
    pub fn sinr_threshold(&self) -> f64 {
        self.r_primary.exp_m1()
    }

    /// Probability that the primary rate exceeds the instantaneous primary
    /// capacity while the secondary emits power `p`.
    ///
    /// Powers above `p_max` are evaluated, not rejected; the cap is the
    /// optimizer's business.
    pub fn outage_prob(&self, p: f64) -> Result<f64> {
        check_power("outage_prob", p)?;
        Ok(self.outage(p))
    }

    /// Ergodic secondary capacity with the primary silent.
    pub fn capacity_free(&self, p: f64) -> Result<f64> {
        check_power("capacity_free", p)?;
        Ok(self.c_free(p))
    }

    /// Ergodic secondary capacity while the primary transmits.
    pub fn capacity_interfered(&self, p: f64) -> Result<f64> {
        check_power("capacity_interfered", p)?;
        Ok(self.c_interfered(p))
    }

    /// Density of `z = (P_p g_ps + p g_ss)/σ_s²`, the convolution of two
    /// exponentials; the interfered capacity is `E[ln(1+z)] - C_1b`.
    pub fn interference_sum_pdf(&self, p: f64, z: f64) -> Result<f64> {
        check_power("interference_sum_pdf", p)?;
        if z < 0.0 {
            return Ok(0.0);
        }
        let own = p * self.mean_gain_ss;
        let other = self.p_primary * self.mean_gain_ps;
        let s = self.noise_s;
        if own == 0.0 {
            return Ok(s / other * (-s * z / other).exp());
        }
        if is_equal_means(own, other) {
            let w = own;
            return Ok(s * s * z / (w * w) * (-s * z / w).exp());
        }
        Ok(s * ((-s * z / own).exp() - (-s * z / other).exp()) / (own - other))
    }

    pub(crate) fn outage(&self, p: f64) -> f64 {
        let c = self.sinr_threshold();
        let direct = self.p_primary * self.mean_gain_pp;
        let noise_only = (-c * self.noise_p / direct).exp();
        1.0 - direct / (direct + p * c * self.mean_gain_sp) * noise_only
    }

    pub(crate) fn c_free(&self, p: f64) -> f64 {
        if p == 0.0 {
            return 0.0;
        }
        scaled_e1(self.noise_s / (p * self.mean_gain_ss))
    }

    pub(crate) fn c_interfered(&self, p: f64) -> f64 {
        if p == 0.0 {
            return 0.0;
        }
        let own = p * self.mean_gain_ss;
        let other = self.p_primary * self.mean_gain_ps;
        let s = self.noise_s;
        if is_equal_means(own, other) {
            let x = s / own;
            return 1.0 - x * scaled_e1(x);
        }
        own / (own - other) * (scaled_e1(s / own) - scaled_e1(s / other))
    }
}

fn is_equal_means(own: f64, other: f64) -> bool {
    (own - other).abs() < EQUAL_MEANS_RADIUS * own.max(other)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::ChannelPreset;
    use approx::assert_relative_eq;

    fn channel(preset: ChannelPreset) -> LinkBudget {
        preset.link()
    }

    // Expected values below are the closed forms evaluated with an
    // independent E1 (scipy.special.exp1) and cross-checked against 2-D
    // quadrature in tests/link_quadrature.rs.

    #[test]
    fn outage_reference_values() {
        let a = channel(ChannelPreset::ChannelA);
        let b = channel(ChannelPreset::ChannelB);
        assert_relative_eq!(a.outage_prob(0.0).unwrap(), 0.256_750_708_984_208_7, max_relative = 1e-13);
        assert_relative_eq!(a.outage_prob(10.0).unwrap(), 0.892_818_238_439_72, max_relative = 1e-13);
        assert_relative_eq!(b.outage_prob(10.0).unwrap(), 0.533_558_983_635_390_6, max_relative = 1e-13);
        let c = a.sinr_threshold();
        assert_relative_eq!(
            a.outage_prob(0.0).unwrap(),
            1.0 - (-c * a.noise_p / (a.p_primary * a.mean_gain_pp)).exp(),
            max_relative = 1e-15
        );
        assert!(a.outage_prob(-1.0).is_err());
        // Above the cap is still evaluated.
        assert!(a.outage_prob(2.0 * a.p_max).unwrap() > a.outage_prob(a.p_max).unwrap());
    }

    #[test]
    fn capacity_reference_values() {
        let link = channel(ChannelPreset::ChannelB);
        assert_eq!(link.capacity_free(0.0).unwrap(), 0.0);
        assert_eq!(link.capacity_interfered(0.0).unwrap(), 0.0);
        assert_relative_eq!(link.capacity_free(10.0).unwrap(), 2.594_430_349_760_613_4, max_relative = 1e-12);
        assert_relative_eq!(link.capacity_free(1.5).unwrap(), 1.156_806_036_410_082, max_relative = 1e-12);
        assert_relative_eq!(link.capacity_interfered(10.0).unwrap(), 1.691_322_721_588_860_4, max_relative = 1e-12);
        // p·ḡ_ss = P_p·ḡ_ps = 3 exactly.
        assert_relative_eq!(link.capacity_interfered(1.5).unwrap(), 0.614_397_987_863_306, max_relative = 1e-12);
        assert!(link.capacity_free(f64::NAN).is_err());
        assert!(link.capacity_interfered(-0.5).is_err());
    }

    #[test]
    fn equal_means_continuity() {
        let link = channel(ChannelPreset::ChannelA);
        let p_star = link.p_primary * link.mean_gain_ps / link.mean_gain_ss;
        let at = link.c_interfered(p_star);
        for factor in [1.0 - 1e-6, 1.0 + 1e-6, 1.0 - 1e-8, 1.0 + 1e-8, 1.0 + 2e-9] {
            assert!((link.c_interfered(p_star * factor) - at).abs() <= 1e-5);
        }
    }

    #[test]
    fn monotone_and_ordered() {
        let link = channel(ChannelPreset::ChannelA);
        let mut prev = (link.outage(0.0), 0.0, 0.0);
        for i in 1..=50 {
            let p = link.p_max * i as f64 / 50.0;
            let cur = (link.outage(p), link.c_free(p), link.c_interfered(p));
            assert!(cur.0 >= prev.0 && cur.1 > prev.1 && cur.2 > prev.2);
            assert!(cur.2 < cur.1);
            assert!(cur.0 > 0.0 && cur.0 < 1.0);
            prev = cur;
        }
    }

    #[test]
    fn tiny_power_limit() {
        let link = channel(ChannelPreset::ChannelB);
        let p = 1e-12;
        assert_relative_eq!(link.c_free(p), p * link.mean_gain_ss / link.noise_s, max_relative = 1e-9);
        assert!(link.c_interfered(p) > 0.0);
    }

    #[test]
    fn validate_rejects_non_positive() {
        let mut link = channel(ChannelPreset::ChannelA);
        link.mean_gain_sp = 0.0;
        assert!(link.validate().is_err());
        let mut link = channel(ChannelPreset::ChannelA);
        link.r_primary = -4.5;
        assert!(link.validate().is_err());
    }
}
