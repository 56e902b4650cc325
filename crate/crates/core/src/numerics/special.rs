//! Special functions: the exponential integral E1, the modified Bessel
//! function I0, and the first-order Marcum Q function.
//!
//! Every function has an exponentially scaled companion because the
//! capacity and sensing formulas only ever need the scaled products
//! (`e^x E1(x)`, `e^{-x} I0(x)`), and the unscaled values over/underflow
//! long before the products do.

use crate::error::{Error, Result};

use super::quadrature::{integrate_semi_infinite, QuadratureSpec};

/// Euler–Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Below this argument E1 uses its power series, above it the continued fraction.
const E1_SERIES_LIMIT: f64 = 1.0;

/// Below this argument I0 uses its power series, above it the asymptotic expansion.
const I0_SERIES_LIMIT: f64 = 15.0;

/// Beyond this product `a·b` the Marcum series is replaced by quadrature.
const MARCUM_SERIES_LIMIT: f64 = 1.0e4;

const TERM_EPS: f64 = 1.0e-17;

fn domain(function: &'static str, name: &'static str, value: f64) -> Error {
    Error::Domain {
        function,
        name,
        value,
    }
}

/// Exponential integral `E1(x) = ∫_x^∞ e^{-t}/t dt` for finite `x > 0`.
pub fn exp_integral_e1(x: f64) -> Result<f64> {
    let scaled = scaled_exp_integral_e1(x)?;
    Ok(scaled * (-x).exp())
}

/// `e^x · E1(x)` for finite `x > 0`.
///
/// This is the form every Rayleigh ergodic-capacity expression needs; it
/// stays finite and accurate for arbitrarily large `x`, where it behaves
/// like `1/x`.
pub fn scaled_exp_integral_e1(x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 || x.is_infinite() {
        return Err(domain("exp_integral_e1", "x", x));
    }
    Ok(scaled_e1(x))
}

pub(crate) fn scaled_e1(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x <= E1_SERIES_LIMIT {
        e1_series(x) * x.exp()
    } else {
        e1_continued_fraction_scaled(x)
    }
}

/// `E1(x) = -γ - ln x - Σ_{k≥1} (-x)^k / (k·k!)`.
fn e1_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut power = 1.0; // (-x)^k / k!
    for k in 1..200 {
        let kf = k as f64;
        power *= -x / kf;
        let term = power / kf;
        sum += term;
        if term.abs() < TERM_EPS * sum.abs() {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

/// Modified Lentz evaluation of the continued fraction
/// `e^x E1(x) = 1/(x+1- 1/(x+3- 4/(x+5- ...)))`.
fn e1_continued_fraction_scaled(x: f64) -> f64 {
    const TINY: f64 = 1.0e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let fi = i as f64;
        let an = -fi * fi;
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let delta = c * d;
        h *= delta;
        if (delta - 1.0).abs() < 1.0e-16 {
            break;
        }
    }
    h
}

/// Zero-order modified Bessel function of the first kind, `x ≥ 0`.
pub fn bessel_i0(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(domain("bessel_i0", "x", x));
    }
    if x <= I0_SERIES_LIMIT {
        Ok(i0_series(x))
    } else {
        Ok(i0_asymptotic_scaled(x) * x.exp())
    }
}

/// `e^{-x} · I0(x)` for `x ≥ 0`.
pub fn bessel_i0_scaled(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(domain("bessel_i0_scaled", "x", x));
    }
    Ok(scaled_i0(x))
}

pub(crate) fn scaled_i0(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    if x <= I0_SERIES_LIMIT {
        i0_series(x) * (-x).exp()
    } else {
        i0_asymptotic_scaled(x)
    }
}

/// `Σ (x²/4)^k / (k!)²`; all terms positive.
fn i0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..500 {
        let kf = k as f64;
        term *= q / (kf * kf);
        sum += term;
        if term < TERM_EPS * sum {
            break;
        }
    }
    sum
}

/// `e^{-x} I0(x) ≈ (2πx)^{-1/2} Σ_k [(2k-1)!!]² / (k! (8x)^k)`, truncated at
/// the smallest term.
fn i0_asymptotic_scaled(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = term * odd * odd / (8.0 * x * k as f64);
        if next >= term {
            break;
        }
        term = next;
        sum += term;
        if term < TERM_EPS * sum {
            break;
        }
    }
    sum / (2.0 * std::f64::consts::PI * x).sqrt()
}

/// `e^{-x} I_k(x)` for `k = 0..=n` by Miller's backward recurrence,
/// normalised against [`scaled_i0`].
fn scaled_bessel_i_sequence(x: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let reach = n.max(x.ceil() as usize) + 10;
    let start = 2 * (reach + (200.0 * reach as f64).sqrt() as usize);
    let two_over_x = 2.0 / x;
    let mut above = 0.0;
    let mut current = 1.0;
    for j in (1..=start).rev() {
        let below = above + j as f64 * two_over_x * current;
        above = current;
        current = below;
        if current.abs() > 1.0e200 {
            current *= 1.0e-200;
            above *= 1.0e-200;
            for v in out.iter_mut() {
                *v *= 1.0e-200;
            }
        }
        if j - 1 <= n {
            out[j - 1] = current;
        }
    }
    let norm = scaled_i0(x) / out[0];
    for v in out.iter_mut() {
        *v *= norm;
    }
    out
}

/// First-order Marcum Q function `Q1(a, b)`.
///
/// `Q1(√(2γ₀), √(2t))` is the probability that a metric drawn from the
/// active-state density `e^{-(γ+γ₀)} I0(2√(γγ₀))` exceeds `t`.
pub fn marcum_q1(a: f64, b: f64) -> Result<f64> {
    if a.is_nan() || a < 0.0 || a.is_infinite() {
        return Err(domain("marcum_q1", "a", a));
    }
    if b.is_nan() || b < 0.0 {
        return Err(domain("marcum_q1", "b", b));
    }
    Ok(marcum_q1_unchecked(a, b))
}

pub(crate) fn marcum_q1_unchecked(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        return 1.0;
    }
    if b.is_infinite() {
        return 0.0;
    }
    if a == 0.0 {
        return (-0.5 * b * b).exp();
    }
    let x = a * b;
    if x > MARCUM_SERIES_LIMIT {
        return marcum_q1_quadrature(a, b);
    }
    let gap = a - b;
    let envelope = (-0.5 * gap * gap).exp();
    if envelope == 0.0 {
        return if b > a { 0.0 } else { 1.0 };
    }
    let n = (9.0 * x.sqrt()) as usize + 40;
    let bessel = scaled_bessel_i_sequence(x, n);
    if b >= a {
        // Q1 = e^{-(a-b)²/2} Σ_{k≥0} (a/b)^k Ĩ_k(ab)
        let ratio = a / b;
        let mut sum = 0.0;
        let mut power = 1.0;
        for value in &bessel {
            let term = power * value;
            sum += term;
            if term < 1.0e-16 * sum {
                break;
            }
            power *= ratio;
        }
        (envelope * sum).clamp(0.0, 1.0)
    } else {
        // 1 - Q1 = e^{-(a-b)²/2} Σ_{k≥1} (b/a)^k Ĩ_k(ab)
        let ratio = b / a;
        let mut sum = 0.0;
        let mut power = ratio;
        for value in &bessel[1..] {
            let term = power * value;
            sum += term;
            if term < 1.0e-16 * sum {
                break;
            }
            power *= ratio;
        }
        (1.0 - envelope * sum).clamp(0.0, 1.0)
    }
}

/// Tail of the noncentral density, integrated directly.
fn marcum_q1_quadrature(a: f64, b: f64) -> f64 {
    let noncentrality = 0.5 * a * a;
    let lower = 0.5 * b * b;
    let spec = QuadratureSpec {
        rel_tol: 1.0e-12,
        abs_tol: 1.0e-15,
        max_subdivisions: 2000,
        length_scale: noncentrality.sqrt().max(1.0),
    };
    let density = |g: f64| active_metric_density(g, noncentrality);
    match integrate_semi_infinite(density, lower, &spec) {
        Ok(v) => v.clamp(0.0, 1.0),
        Err(Error::Convergence { estimate, .. }) => estimate.clamp(0.0, 1.0),
        Err(_) => f64::NAN,
    }
}

/// `e^{-(γ+γ₀)} I0(2√(γγ₀))`, evaluated as
/// `e^{-(√γ-√γ₀)²} · [e^{-z} I0(z)]` with `z = 2√(γγ₀)`.
pub(crate) fn active_metric_density(gamma: f64, gamma0: f64) -> f64 {
    if gamma < 0.0 {
        return 0.0;
    }
    let root_gap = gamma.sqrt() - gamma0.sqrt();
    let z = 2.0 * (gamma * gamma0).sqrt();
    (-root_gap * root_gap).exp() * scaled_i0(z)
}
