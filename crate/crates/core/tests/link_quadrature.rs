use cogduty::numerics::{integrate_semi_infinite, QuadratureSpec};
use cogduty::presets::ChannelPreset;

fn spec(scale: f64) -> QuadratureSpec {
    QuadratureSpec {
        rel_tol: 1e-11,
        abs_tol: 1e-15,
        max_subdivisions: 2000,
        length_scale: scale,
    }
}

#[test]
fn interference_sum_density_is_normalized() {
    for preset in ChannelPreset::ALL {
        let link = preset.link();
        let p_star = link.p_primary * link.mean_gain_ps / link.mean_gain_ss;
        for p in [0.0, 0.05, 1.0, p_star, 10.0] {
            let scale = (p * link.mean_gain_ss).max(link.p_primary * link.mean_gain_ps) / link.noise_s;
            let mass =
                integrate_semi_infinite(|z| link.interference_sum_pdf(p, z).unwrap(), 0.0, &spec(scale)).unwrap();
            assert!((mass - 1.0).abs() <= 1e-8, "{} p={p}: {mass}", preset.name());
        }
    }
}

/// `C_1 = E[ln(1+z)] - E[ln(1 + P_p g_ps/σ²)]` with `z` the normalized
/// received power from both transmitters.
#[test]
fn convolution_density_reproduces_interfered_capacity() {
    for preset in [ChannelPreset::ChannelA, ChannelPreset::ChannelB] {
        let link = preset.link();
        let other = link.p_primary * link.mean_gain_ps / link.noise_s;
        let primary_only = integrate_semi_infinite(|z| z.ln_1p() * (-z / other).exp() / other, 0.0, &spec(other))
            .unwrap();
        for p in [0.01, 0.3, 1.5, 4.0, 10.0] {
            let scale = (p * link.mean_gain_ss / link.noise_s).max(other);
            let both = integrate_semi_infinite(
                |z| z.ln_1p() * link.interference_sum_pdf(p, z).unwrap(),
                0.0,
                &spec(scale),
            )
            .unwrap();
            let closed = link.capacity_interfered(p).unwrap();
            let oracle = both - primary_only;
            assert!(
                (closed - oracle).abs() <= 1e-7 * closed.max(1e-3),
                "{} p={p}: {closed} vs {oracle}",
                preset.name()
            );
        }
    }
}

#[test]
fn interference_never_helps() {
    let link = ChannelPreset::ChannelB.link();
    assert_eq!(link.capacity_free(0.0).unwrap(), link.capacity_interfered(0.0).unwrap());
    for i in 1..=50 {
        let p = link.p_max * i as f64 / 50.0;
        assert!(link.capacity_interfered(p).unwrap() < link.capacity_free(p).unwrap());
    }
}
