//! Corrector quantities against independent quadratures and closed forms.

use std::f64::consts::PI;

use kinfrac_core::auxiliary::{
    chi_l2f_gap, operator_limit_parts, Apply, CorrectorEval, SpatialProfile, TestFunction,
    TimeEnvelope,
};
use kinfrac_core::quadrature::adaptive;
use kinfrac_core::{Model, ModelParams};

fn model(alpha: f64, beta: f64, a: f64, delta: f64) -> Model {
    Model::new(ModelParams {
        alpha,
        beta,
        core_asym: a,
        nu0_delta: delta,
        ..ModelParams::default()
    })
    .unwrap()
}

/// `∫_ℝ (χ − g)² dx` for the unit-rate corrector of a Gaussian of width `w`, from
/// Plancherel: `(1/2π)∫ |ĝ|² ξ²c²/(ν² + ξ²c²) dξ` with `|ĝ|² = 2πw² e^{-ξ²w²}`.
fn fourier_gap(w: f64, c: f64, nu: f64) -> f64 {
    let f = |xi: f64| 2.0 * w * w * (-xi * xi * w * w).exp() * xi * xi * c * c / (nu * nu + xi * xi * c * c);
    adaptive(f, 0.0, 4.0 / w, 1e-15, 1e-14).value + adaptive(f, 4.0 / w, 12.0 / w, 1e-15, 1e-14).value
}

#[test]
fn gap_matches_fourier_oracle() {
    // δ = 0, β = 0: c = εv, ν = ν̄
    let (alpha, a, width, t_end) = (1.5, 0.5, 1.0, 1.0);
    let m = model(alpha, 0.0, a, 0.0);
    let nu = m.params.nu0_mean;
    let phi = TestFunction::new(
        SpatialProfile::Gaussian {
            center: 0.0,
            width,
        },
        TimeEnvelope::Bump { t_end },
        None,
    )
    .unwrap();
    for eps in [0.2, 0.05] {
        // the x-integral is even in v; the odd part of the core drops out
        let per_v = |v: f64| fourier_gap(width, eps * v, nu);
        let core = 2.0 * m.core_height * adaptive(per_v, 0.0, 1.0, 1e-14, 1e-13).value;
        // tail with s = v^{-α}: κ v^{-1-α} dv = (κ/α) ds
        let tail = 2.0 * m.kappa() / alpha
            * adaptive(|s: f64| if s <= 0.0 { width * PI.sqrt() } else { per_v(s.powf(-1.0 / alpha)) }, 0.0, 1.0, 1e-14, 1e-13).value;
        let gap_x = core + tail;
        // ∫ cos⁴ = 3T/8 and ∫ (ψ')² = π²/(8T) over the bump
        let want = 3.0 * t_end / 8.0 * gap_x;
        let want_dt = PI * PI / (8.0 * t_end) * gap_x;
        let r = chi_l2f_gap(&m, &phi, eps).unwrap();
        assert!((r.gap / want - 1.0).abs() < 1e-6, "eps={eps}: {} vs {want}", r.gap);
        assert!((r.gap_dt / want_dt - 1.0).abs() < 1e-6, "eps={eps}: {} vs {want_dt}", r.gap_dt);
    }
}

#[test]
fn affine_profile_is_shifted_by_the_mean_flight() {
    let m = model(1.5, 0.0, 0.5, 0.0);
    let (slope, offset) = (0.7, -1.3);
    let phi = TestFunction::new(SpatialProfile::Affine { slope, offset }, TimeEnvelope::Constant, None)
        .unwrap();
    for eps in [1.0, 0.3, 0.05] {
        let ce = CorrectorEval::new(&m, phi, eps).unwrap();
        for v in [-40.0, -1.0, 0.0, 0.2, 3.0, 900.0] {
            for x in [-5.0, 0.0, 2.5] {
                let want = slope * x + offset + slope * eps * v / m.params.nu0_mean;
                let got = ce.chi(0.0, x, v).unwrap();
                assert!((got - want).abs() < 1e-12 * want.abs().max(1.0), "{got} vs {want}");
            }
        }
    }
}

/// Direct evaluation of `∫₀^∞ ν₀(x+cz) e^{-∫₀^z ν₀} g(x+cz) dz` for the periodic
/// Gaussian on a torus of length `l`, with `ν₀ = ν̄(1 + δ cos 2πy/l)`.
fn direct_corrector(nu_bar: f64, delta: f64, l: f64, x: f64, c: f64) -> f64 {
    let k = 2.0 * PI / l;
    let nu0 = |y: f64| nu_bar * (1.0 + delta * (k * y).cos());
    let hazard = |z: f64| nu_bar * z + nu_bar * delta / (k * c) * ((k * (x + c * z)).sin() - (k * x).sin());
    let g = |y: f64| {
        let r = y - 10.0 - l * ((y - 10.0) / l).round();
        (-30..=30)
            .map(|m| {
                let d = r + m as f64 * l;
                (-0.5 * d * d).exp()
            })
            .sum::<f64>()
    };
    let z_max = 50.0 / (nu_bar * (1.0 - delta));
    let half = 0.5 * l / c.abs();
    let n = (z_max / half).ceil() as usize;
    (0..n)
        .map(|i| {
            let (a, b) = (i as f64 * half, ((i + 1) as f64 * half).min(z_max));
            adaptive(|z| nu0(x + c * z) * (-hazard(z)).exp() * g(x + c * z), a, b, 1e-15, 1e-14).value
        })
        .sum()
}

#[test]
fn periodic_long_flight_matches_direct_integration() {
    let m = model(1.5, 0.0, 0.5, 0.4);
    let l = m.domain_length();
    let phi = TestFunction::new(
        SpatialProfile::Gaussian {
            center: 10.0,
            width: 1.0,
        },
        TimeEnvelope::Constant,
        Some(l),
    )
    .unwrap();
    let ce = CorrectorEval::new(&m, phi, 0.5).unwrap();
    for v in [3.0, -7.5, 40.0, -400.0] {
        let c = ce.speed(v);
        assert!(c.abs() / m.nu1 > ce.long_flight, "v={v} is not a long flight");
        for x in [0.0, 9.3, 10.0, 17.1] {
            let got = ce.chi_profile(x, v, Apply::Value).unwrap();
            let want = direct_corrector(m.params.nu0_mean, 0.4, l, x, c);
            assert!((got - want).abs() < 1e-10 * want.abs().max(1e-3), "v={v} x={x}: {got} vs {want}");
        }
    }
}

#[test]
fn small_velocity_part_is_of_order_two_minus_gamma() {
    // symmetric core, β = 0: the odd first-order term cancels on |v| ≤ 1
    let m = model(1.5, 0.0, 0.0, 0.0);
    let phi = TestFunction::new(
        SpatialProfile::Gaussian {
            center: 10.0,
            width: 1.0,
        },
        TimeEnvelope::Constant,
        None,
    )
    .unwrap();
    let power = 2.0 - m.gamma;
    let x = 10.4;
    let small = |eps: f64| operator_limit_parts(&m, &phi, 0.0, x, eps).unwrap().small;
    let c0 = small(0.2).abs() / 0.2f64.powf(power);
    assert!(c0 > 0.0);
    for eps in [0.1, 0.05, 0.025, 0.0125] {
        let s = small(eps).abs();
        // the scaled part settles to its limit from below
        let ratio = s / (c0 * eps.powf(power));
        assert!((0.9..1.1).contains(&ratio), "eps={eps}: ratio {ratio}");
    }
}
