//! Special functions and the quadrature oracle behind every closed form.

mod quadrature;
mod special;

pub use quadrature::{integrate, integrate_semi_infinite, QuadratureSpec};
pub use special::{
    bessel_i0, bessel_i0_scaled, exp_integral_e1, marcum_q1, scaled_exp_integral_e1,
};

pub(crate) use special::{active_metric_density, marcum_q1_unchecked, scaled_e1};
