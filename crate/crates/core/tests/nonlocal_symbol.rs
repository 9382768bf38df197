//! Assembled limit operator against its Fourier symbol.

use std::f64::consts::PI;

use kinfrac_core::nonlocal::{assemble, eta, symbol_constant};
use kinfrac_core::quadrature::adaptive;
use kinfrac_core::{Grid1d, Model, ModelParams};

/// `c* = π ν̄^{1-γ} / (sin(πγ/2)(1 − β))` for constant ν₀, from
/// `∫(1 − cos w)|w|^{-1-γ} dw = π/(Γ(1+γ) sin(πγ/2))`.
fn symbol_oracle(m: &Model) -> f64 {
    let g = m.gamma;
    PI * m.params.nu0_mean.powf(1.0 - g) / ((PI * g / 2.0).sin() * (1.0 - m.beta()))
}

fn model(alpha: f64, beta: f64, nu: f64) -> Model {
    Model::new(ModelParams {
        alpha,
        beta,
        nu0_mean: nu,
        ..ModelParams::default()
    })
    .unwrap()
}

#[test]
fn symbol_constant_matches_closed_form() {
    for (alpha, beta, nu) in [(1.5, 0.0, 1.0), (0.8, 0.25, 1.0), (0.5, 0.0, 2.0), (1.2, 0.4, 0.7)] {
        let m = model(alpha, beta, nu);
        let got = symbol_constant(&m).unwrap();
        let want = symbol_oracle(&m);
        assert!((got / want - 1.0).abs() < 1e-9, "alpha={alpha} beta={beta}: {got} vs {want}");
    }
}

/// Eigenvalue of the operator whose kernel is cut at `|w| = reach`:
/// `λ_∞ − (2η₀/(1−β)) ∫_reach^∞ (1 − cos ξw) w^{-1-γ} dw`, with `ξ reach ∈ 2πℤ`.
fn truncated_symbol(m: &Model, xi: f64, reach: f64) -> f64 {
    let g = m.gamma;
    let full = symbol_oracle(m) * xi.powf(g);
    let period = 2.0 * PI / xi;
    // past the last period the oscillatory remainder is below w^{-1-γ}/ξ
    let osc: f64 = (0..4000)
        .map(|k| {
            let a = reach + k as f64 * period;
            adaptive(|w: f64| (xi * w).cos() * w.powf(-1.0 - g), a, a + period, 1e-18, 1e-12).value
        })
        .sum();
    let far = reach.powf(-g) / g - osc;
    full - 2.0 * eta(m, 0.0, 0.0) / (1.0 - m.beta()) * far
}

#[test]
fn assembled_operator_converges_on_cosines() {
    let images = 8;
    for (alpha, beta) in [(1.5, 0.0), (0.8, 0.25)] {
        let m = model(alpha, beta, 1.0);
        let l = m.domain_length();
        let xi = 2.0 * PI * 2.0 / l;
        let lambda = truncated_symbol(&m, xi, images as f64 * l);
        let full = symbol_oracle(&m) * xi.powf(m.gamma);
        let errs: Vec<f64> = [32, 64, 128, 256]
            .iter()
            .map(|&nx| {
                let grid = Grid1d::new(nx, l);
                let op = assemble(&m, grid, images).unwrap();
                assert!(full - lambda <= op.tail_bound);
                let rho: Vec<f64> = grid.nodes().iter().map(|&x| (xi * x).cos()).collect();
                op.apply(&rho)
                    .iter()
                    .zip(&rho)
                    .map(|(a, r)| (a - lambda * r).abs())
                    .fold(0.0, f64::max)
                    / lambda
            })
            .collect();
        for w in errs.windows(2) {
            assert!(w[1] < w[0], "alpha={alpha}: {errs:?}");
        }
        assert!(errs[3] < 1e-3, "alpha={alpha}: {errs:?}");
    }
}
