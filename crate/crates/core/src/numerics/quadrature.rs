//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite and
//! semi-infinite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{check_param, Error, Result};

/// Tolerances and limits for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Characteristic length of the integrand's decay on `[lower, ∞)`; the
    /// change of variables `x = lower + L·s/(1-s)` puts the bulk of the mass
    /// near the middle of `s ∈ [0, 1)` when `L` is of that order.
    pub length_scale: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1.0e-10,
            abs_tol: 1.0e-13,
            max_subdivisions: 1000,
            length_scale: 1.0,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        check_param(self.rel_tol > 0.0, "rel_tol", "must be > 0")?;
        check_param(self.abs_tol > 0.0, "abs_tol", "must be > 0")?;
        check_param(self.max_subdivisions >= 1, "max_subdivisions", "must be >= 1")?;
        check_param(
            self.length_scale > 0.0 && self.length_scale.is_finite(),
            "length_scale",
            "must be finite and > 0",
        )
    }

    pub fn with_length_scale(mut self, length_scale: f64) -> Self {
        self.length_scale = length_scale;
        self
    }
}

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Gauss weights for the odd-indexed Kronrod nodes.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

/// One 15-point Kronrod panel with the QUADPACK error heuristic.
fn kronrod_panel<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Result<Segment> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let eval = |x: f64| -> Result<f64> {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::NonFiniteIntegrand(x))
        }
    };

    let f_center = eval(center)?;
    let mut kronrod = f_center * WGK[7];
    let mut gauss = f_center * WG[3];
    let mut abs_sum = kronrod.abs();
    let mut values = [(0.0, 0.0); 7];
    for (j, node) in XGK.iter().take(7).enumerate() {
        let dx = half * node;
        let left = eval(center - dx)?;
        let right = eval(center + dx)?;
        values[j] = (left, right);
        kronrod += WGK[j] * (left + right);
        abs_sum += WGK[j] * (left.abs() + right.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (left + right);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (f_center - mean).abs();
    for (j, (left, right)) in values.iter().enumerate() {
        asc += WGK[j] * ((left - mean).abs() + (right - mean).abs());
    }

    let value = kronrod * half;
    let asc = asc * half.abs();
    let abs_sum = abs_sum * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    if abs_sum > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * abs_sum);
    }
    Ok(Segment { lo, hi, value, error })
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    check_param(a.is_finite() && b.is_finite(), "interval", "bounds must be finite")?;
    if a == b {
        return Ok(0.0);
    }
    adaptive(&f, a, b, spec)
}

/// Integrates `f` over `[lower, ∞)` through the substitution
/// `x = lower + L·s/(1-s)`, `dx = L/(1-s)² ds`.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(
    f: F,
    lower: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    spec.validate()?;
    check_param(lower.is_finite(), "lower", "must be finite")?;
    let scale = spec.length_scale;
    let mapped = |s: f64| {
        let one_minus = 1.0 - s;
        let x = lower + scale * s / one_minus;
        let y = f(x);
        if y == 0.0 {
            0.0
        } else {
            y * scale / (one_minus * one_minus)
        }
    };
    adaptive(&mapped, 0.0, 1.0, spec)
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    let first = kronrod_panel(f, a, b)?;
    let mut total = first.value;
    let mut total_error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut subdivisions = 1;

    loop {
        let tolerance = spec.abs_tol.max(spec.rel_tol * total.abs());
        if total_error <= tolerance {
            return Ok(total);
        }
        if subdivisions >= spec.max_subdivisions {
            return Err(Error::Convergence {
                subdivisions,
                estimate: total,
                error: total_error,
            });
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            return Err(Error::Convergence {
                subdivisions,
                estimate: total,
                error: total_error,
            });
        }
        let left = kronrod_panel(f, worst.lo, mid)?;
        let right = kronrod_panel(f, mid, worst.hi)?;
        total += left.value + right.value - worst.value;
        total_error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        subdivisions += 1;

        // Running sums drift; resynchronise occasionally.
        if subdivisions % 64 == 0 {
            total = heap.iter().map(|s| s.value).sum();
            total_error = heap.iter().map(|s| s.error).sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tight() -> QuadratureSpec {
        QuadratureSpec {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            max_subdivisions: 2000,
            length_scale: 1.0,
        }
    }

    #[test]
    fn unit_exponential() {
        let v = integrate_semi_infinite(|x| (-x).exp(), 0.0, &tight()).unwrap();
        assert_relative_eq!(v, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn exponential_integral_identities() {
        let v = integrate_semi_infinite(|x| (-x).exp() / (1.0 + x), 0.0, &tight()).unwrap();
        assert_relative_eq!(v, 0.596_347_362_323_194_6, max_relative = 1e-11);
        let v = integrate_semi_infinite(|x| (-x).exp() / x, 1.0, &tight()).unwrap();
        assert_relative_eq!(v, 0.219_383_934_395_520_27, max_relative = 1e-11);
    }

    #[test]
    fn slow_decay_with_length_scale() {
        let spec = tight().with_length_scale(50.0);
        let v = integrate_semi_infinite(|x| (-x / 50.0).exp() / 50.0, 0.0, &spec).unwrap();
        assert_relative_eq!(v, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn finite_interval() {
        let v = integrate(|x| x.sin(), 0.0, std::f64::consts::PI, &tight()).unwrap();
        assert_relative_eq!(v, 2.0, max_relative = 1e-12);
        assert_eq!(integrate(|x| x, 3.0, 3.0, &tight()).unwrap(), 0.0);
    }

    #[test]
    fn reports_convergence_failure() {
        let spec = QuadratureSpec {
            max_subdivisions: 2,
            ..tight()
        };
        let r = integrate(|x| (50.0 * x).sin().abs(), 0.0, 10.0, &spec);
        assert!(matches!(r, Err(Error::Convergence { .. })));
    }

    #[test]
    fn rejects_bad_spec_and_nan() {
        let spec = QuadratureSpec {
            rel_tol: 0.0,
            ..tight()
        };
        assert!(integrate(|x| x, 0.0, 1.0, &spec).is_err());
        assert!(matches!(
            integrate(|_| f64::NAN, 0.0, 1.0, &tight()),
            Err(Error::NonFiniteIntegrand(_))
        ));
    }

    #[test]
    fn deterministic() {
        let f = |x: f64| (-x * x).exp() * (1.0 + x).ln();
        let a = integrate_semi_infinite(f, 0.3, &tight()).unwrap();
        let b = integrate_semi_infinite(f, 0.3, &tight()).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
