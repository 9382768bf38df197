//! Property tests of structural invariants.

use proptest::prelude::*;

use kinfrac_core::auxiliary::{CorrectorEval, SpatialProfile, TestFunction, TimeEnvelope};
use kinfrac_core::config::RunConfig;
use kinfrac_core::kinetic_fv::{KineticFv, PhaseField, Scheme};
use kinfrac_core::nonlocal::{eta, eta_bounds};
use kinfrac_core::{gamma_exponent, DensityField, Grid1d, Model, ModelParams, Provenance};

/// Admissible `(α, β)` with `0 ≤ β < min(α, 2 − α)`.
fn alpha_beta() -> impl Strategy<Value = (f64, f64)> {
    (0.1f64..1.95, 0.0f64..0.999).prop_map(|(a, s)| (a, s * a.min(2.0 - a)))
}

fn params() -> impl Strategy<Value = ModelParams> {
    (alpha_beta(), 0.01f64..0.99, -0.95f64..0.95, 0.2f64..3.0, 0.0f64..0.9).prop_map(
        |((alpha, beta), k, a, nu, delta)| ModelParams {
            alpha,
            beta,
            kappa: k * alpha / 2.0,
            core_asym: a,
            nu0_mean: nu,
            nu0_delta: delta,
            domain_length: 20.0,
        },
    )
}

fn solver(p: ModelParams, scheme: Scheme) -> KineticFv {
    KineticFv::new(Model::new(p).unwrap(), 16, 33, 30.0, scheme).unwrap()
}

fn random_field(fv: &KineticFv, noise: &[f64]) -> PhaseField {
    let nv = fv.vgrid.nv;
    let values = (0..fv.grid.nx * nv)
        .map(|k| fv.vgrid.f_eq[k % nv] * (0.05 + noise[k % noise.len()]))
        .collect();
    PhaseField {
        nx: fv.grid.nx,
        nv,
        length: fv.grid.length,
        time: 0.0,
        values,
    }
}

fn column_masses(fv: &KineticFv, f: &PhaseField) -> Vec<f64> {
    fv.density(f).values
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn gamma_lies_in_range((alpha, beta) in alpha_beta()) {
        let g = gamma_exponent(alpha, beta).unwrap();
        prop_assert!(g > 0.0 && g < 2.0);
        // γ − α = β(α − 1)/(1 − β)
        prop_assert!((g - alpha) * (alpha - 1.0) >= -1e-12);
    }

    #[test]
    fn quantile_inverts_cdf(p in params(), u in 1e-9f64..(1.0 - 1e-9)) {
        let m = Model::new(p).unwrap();
        for law in [m.equilibrium(), m.post_collision()] {
            let v = law.quantile(u);
            prop_assert!((law.cdf(v) - u).abs() < 1e-10, "u={u} v={v} cdf={}", law.cdf(v));
        }
    }

    #[test]
    fn equilibrium_is_fixed_by_collisions(p in params(), dt in 1e-3f64..5.0, eps in 0.05f64..1.0) {
        let fv = solver(p, Scheme::Muscl);
        let mut f = random_field(&fv, &[1.0]);
        let before = f.values.clone();
        fv.collision_apply(&mut f, dt, eps).unwrap();
        for (a, b) in f.values.iter().zip(&before) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300) + 1e-15);
        }
    }

    #[test]
    fn collision_conserves_mass_and_dissipates(
        p in params(),
        noise in prop::collection::vec(0.0f64..3.0, 1..40),
        dt in 1e-3f64..5.0,
        eps in 0.05f64..1.0,
    ) {
        let fv = solver(p, Scheme::Muscl);
        let mut f = random_field(&fv, &noise);
        let rho0 = column_masses(&fv, &f);
        let g0 = fv.gnorm2(&f);
        let n0 = fv.weighted_norm2(&f);
        fv.collision_apply(&mut f, dt, eps).unwrap();
        for (a, b) in column_masses(&fv, &f).iter().zip(&rho0) {
            prop_assert!((a - b).abs() < 1e-12 * b);
        }
        prop_assert!(f.values.iter().all(|&x| x >= 0.0));
        prop_assert!(fv.gnorm2(&f) <= g0 * (1.0 + 1e-12) + 1e-28 * n0);
        prop_assert!(fv.weighted_norm2(&f) <= n0 * (1.0 + 1e-12));
    }

    #[test]
    fn transport_conserves_mass_and_positivity(
        p in params(),
        noise in prop::collection::vec(0.0f64..3.0, 1..40),
        frac in 0.05f64..1.0,
        eps in 0.05f64..1.0,
        upwind in any::<bool>(),
    ) {
        let scheme = if upwind { Scheme::Upwind } else { Scheme::Muscl };
        let fv = solver(p, scheme);
        let mut f = random_field(&fv, &noise);
        let m0 = fv.mass(&f);
        fv.transport_apply(&mut f, frac * fv.max_dt(eps), eps).unwrap();
        prop_assert!((fv.mass(&f) - m0).abs() < 1e-12 * m0);
        prop_assert!(f.values.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn eta_is_symmetric_and_bounded(p in params(), x in -30.0f64..30.0, y in -30.0f64..30.0) {
        let m = Model::new(p).unwrap();
        let a = eta(&m, x, y);
        let b = eta(&m, y, x);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs());
        let (lo, hi) = eta_bounds(&m);
        prop_assert!(a >= lo * (1.0 - 1e-12) && a <= hi * (1.0 + 1e-12), "{lo} <= {a} <= {hi}");
    }

    #[test]
    fn corrector_of_constant_is_constant(
        p in params(),
        value in -5.0f64..5.0,
        x in 0.0f64..20.0,
        v in -50.0f64..50.0,
        eps in 0.05f64..1.0,
    ) {
        let m = Model::new(p).unwrap();
        let phi = TestFunction::new(SpatialProfile::Constant { value }, TimeEnvelope::Constant, None)
            .unwrap();
        let ce = CorrectorEval::new(&m, phi, eps).unwrap();
        let chi = ce.chi(0.0, x, v).unwrap();
        prop_assert!((chi - value).abs() <= 1e-12 * value.abs().max(1.0));
    }

    #[test]
    fn corrector_respects_sup_bound(
        p in params(),
        x in 0.0f64..20.0,
        v in -20.0f64..20.0,
        eps in 0.05f64..1.0,
    ) {
        let m = Model::new(p).unwrap();
        let spatial = SpatialProfile::Gaussian { center: 10.0, width: 1.0 };
        let phi = TestFunction::new(spatial, TimeEnvelope::Constant, None).unwrap();
        let ce = CorrectorEval::new(&m, phi, eps).unwrap();
        let diff = (ce.chi(0.0, x, v).unwrap() - spatial.eval(x)[0]).abs();
        // sup |g'| of the unit Gaussian is e^{-1/2}
        let bound = ce.sup_bound(v, (-0.5f64).exp());
        prop_assert!(diff <= bound * (1.0 + 1e-9) + 1e-14, "{diff} > {bound}");
    }

    #[test]
    fn config_round_trips(
        p in params(),
        nx in 16usize..512,
        half_nv in 2usize..200,
        seed in any::<u64>(),
        cfl in 0.1f64..1.0,
        eps0 in 0.3f64..1.0,
    ) {
        let mut cfg = RunConfig::default();
        cfg.model = p;
        cfg.discretization.nx = nx - nx % 16;
        cfg.discretization.mc_bins = 16;
        cfg.discretization.nv = 2 * half_nv + 1;
        cfg.discretization.cfl = cfl;
        cfg.experiment.seed = seed;
        cfg.experiment.eps_list = vec![eps0, eps0 / 3.0, eps0 / 7.0];
        let text = cfg.to_flat();
        let back = RunConfig::parse(&text).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn phase_field_binary_round_trips(
        nx in 1usize..12,
        nv in 1usize..12,
        t in 0.0f64..10.0,
        seed in any::<u64>(),
    ) {
        let values = (0..nx * nv)
            .map(|k| f64::from_bits(seed.rotate_left(k as u32) >> 2))
            .collect();
        let f = PhaseField { nx, nv, length: 20.0, time: t, values };
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        prop_assert_eq!(buf.len(), 32 + 8 * nx * nv);
        let g = PhaseField::read_binary(&buf[..]).unwrap();
        prop_assert_eq!(g.nx, nx);
        prop_assert_eq!(g.nv, nv);
        prop_assert_eq!(g.time.to_bits(), t.to_bits());
        prop_assert!(g.values.iter().zip(&f.values).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn coarsening_conserves_mass(
        values in prop::collection::vec(0.0f64..10.0, 64),
        k in 0usize..7,
    ) {
        let coarse = [1, 2, 4, 8, 16, 32, 64][k];
        let f = DensityField {
            grid: Grid1d::new(64, 20.0),
            values,
            time: 0.0,
            provenance: Provenance::KineticMarginal,
        };
        let c = f.coarsen(coarse).unwrap();
        prop_assert_eq!(c.values.len(), coarse);
        prop_assert!((c.mass() - f.mass()).abs() <= 1e-12 * f.mass().max(1.0));
    }
}

#[test]
fn coarsening_rejects_non_divisors() {
    let f = DensityField {
        grid: Grid1d::new(64, 20.0),
        values: vec![0.05; 64],
        time: 0.0,
        provenance: Provenance::KineticMarginal,
    };
    assert!(f.coarsen(48).is_err());
    assert!(f.coarsen(0).is_err());
}
