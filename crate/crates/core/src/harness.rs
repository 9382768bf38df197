//! ε-sweeps and the verification checks, each producing named verdicts.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::auxiliary::{
    chi_l2f_gap, corrector_term_qplus, drift_terms, operator_limit_lhs, Apply, CorrectorEval,
    SpatialProfile, TestFunction, TimeEnvelope,
};
use crate::config::RunConfig;
use crate::density::{DensityField, Grid1d, InitialProfile, Provenance};
use crate::error::{Error, Result};
use crate::kinetic_fv::{run_kinetic_det, DetConfig, DetRun, VelocityGrid};
use crate::kinetic_mc::{advance, estimate_density, histogram_standard_error, init_ensemble};
use crate::model::Model;
use crate::nonlocal::{
    assemble, eta, fourier_reference, operator_pointwise, solve_macro, symbol_constant,
};
use crate::quadrature;

/// Slack on inequalities that hold for the continuous model only.
pub const DISCRETIZATION_SLACK: f64 = 0.05;
/// Allowed shortfall of a measured log-log slope.
pub const SLOPE_SLACK: f64 = 0.15;

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    /// Acceptance criterion number (1-10).
    pub criterion: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(criterion: u8, name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Verdict {
            criterion,
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }

    /// `PASS [C7] name: detail`.
    pub fn line(&self) -> String {
        format!(
            "{} [C{}] {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.criterion,
            self.name,
            self.detail
        )
    }
}

pub fn all_passed(verdicts: &[Verdict]) -> bool {
    verdicts.iter().all(|v| v.passed)
}

fn sci(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.4e}")).collect();
    format!("[{}]", parts.join(", "))
}

pub fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

/// Least-squares slope of `log y` against `log ε`.
pub fn loglog_slope(eps: &[f64], ys: &[f64]) -> Result<f64> {
    if eps.len() != ys.len() || eps.len() < 2 {
        return Err(Error::Input("slope fit needs at least two matching points".into()));
    }
    if ys.iter().any(|&y| !(y > 0.0)) {
        return Err(Error::Numeric("slope fit needs positive values".into()));
    }
    let lx: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Every derived constant of a model.
#[derive(Debug, Clone, Serialize)]
pub struct ModelSummary {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub core_height: f64,
    pub c_beta: f64,
    pub c_negbeta: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub coercivity: f64,
    pub drift: f64,
    pub dnu0_bound: f64,
    pub tail_mass: f64,
    pub eta_diagonal: f64,
    /// `c*` of `𝓛 e^{iξx} = c*|ξ|^γ e^{iξx}`, constant ν₀ only.
    pub symbol_constant: Option<f64>,
}

pub fn model_summary(model: &Model) -> Result<ModelSummary> {
    Ok(ModelSummary {
        alpha: model.alpha(),
        beta: model.beta(),
        gamma: model.gamma,
        core_height: model.core_height,
        c_beta: model.c_beta,
        c_negbeta: model.c_negbeta,
        nu1: model.nu1,
        nu2: model.nu2,
        coercivity: model.coercivity,
        drift: model.drift(1.0),
        dnu0_bound: model.dnu0_bound,
        tail_mass: 2.0 * model.kappa() / model.alpha(),
        eta_diagonal: eta(model, 0.0, 0.0),
        symbol_constant: if model.params.nu0_delta == 0.0 {
            Some(symbol_constant(model)?)
        } else {
            None
        },
    })
}

// ---------------------------------------------------------------------------
// a-priori bounds

#[derive(Debug, Clone, Serialize)]
pub struct AprioriCheck {
    pub eps: f64,
    /// `max_t ‖g‖² / (M‖f₀‖²ε^γ)`.
    pub gnorm_ratio: f64,
    /// `max_t ‖ρ‖ / ‖f₀‖`.
    pub rho_ratio: f64,
    pub verdict: Verdict,
}

/// Checks the g-norm and density bounds at every stored time of a run.
pub fn check_apriori(run: &DetRun) -> Result<AprioriCheck> {
    if run.gnorm_series.is_empty() || run.snapshots.is_empty() {
        return Err(Error::Input("run carries no g-norm diagnostics".into()));
    }
    let gmax = run
        .gnorm_series
        .iter()
        .map(|p| p.1)
        .chain(run.snapshots.iter().map(|s| s.gnorm2))
        .fold(0.0, f64::max);
    let gnorm_ratio = gmax / run.gnorm_bound;
    let f0 = run.f0_norm2.sqrt();
    let rho_ratio = run
        .snapshots
        .iter()
        .map(|s| s.rho.l2_norm() / f0)
        .fold(0.0, f64::max);
    let limit = 1.0 + DISCRETIZATION_SLACK;
    let passed = gnorm_ratio <= limit && rho_ratio <= limit;
    Ok(AprioriCheck {
        eps: run.eps,
        gnorm_ratio,
        rho_ratio,
        verdict: Verdict::new(
            7,
            "a-priori bounds",
            passed,
            format!(
                "eps={}: max|g|^2/(M|f0|^2 eps^gamma) = {gnorm_ratio:.4}, max|rho|/|f0| = \
                 {rho_ratio:.4} (limit {limit})",
                run.eps
            ),
        ),
    })
}

// ---------------------------------------------------------------------------
// coercivity

#[derive(Debug, Clone, Serialize)]
pub struct CoercivityReport {
    pub samples: usize,
    pub closed_form: f64,
    pub grid_sup: f64,
    /// Largest `(LHS − RHS)/scale` of the dissipation inequality (≤ 0 passes).
    pub worst_dissipation: f64,
    /// Largest `‖Q⁺f/ν‖²/‖f‖²` in `L²_{νF⁻¹}` (≤ 1 passes).
    pub worst_gain_ratio: f64,
    /// Smallest `−LHS/RHS` ratio, i.e. how much slack the constant leaves.
    pub min_slack: f64,
    pub equilibrium_residual: f64,
    pub verdicts: Vec<Verdict>,
}

struct DiscreteCollision<'a> {
    g: &'a VelocityGrid,
}

impl DiscreteCollision<'_> {
    fn moment(&self, f: &[f64]) -> f64 {
        (0..self.g.nv).map(|j| self.g.w[j] * self.g.bracket[j] * f[j]).sum()
    }

    fn apply(&self, nu0: f64, f: &[f64]) -> Vec<f64> {
        let m = self.moment(f);
        (0..self.g.nv)
            .map(|j| nu0 * (self.g.post[j] * m - self.g.bracket[j] * f[j]))
            .collect()
    }
}

/// Dissipation inequality and gain bound on random discrete `f ≥ 0`.
pub fn check_coercivity(model: &Model, n_samples: usize, seed: u64) -> Result<CoercivityReport> {
    let grid = VelocityGrid::new(model, 129, 200.0)?;
    let q = DiscreteCollision { g: &grid };
    let m = model.coercivity;
    let length = model.domain_length();
    let xs: Vec<f64> = (0..16).map(|k| length * k as f64 / 16.0).collect();
    let vs: Vec<f64> = (0..64).map(|k| -8.0 + 16.0 * k as f64 / 63.0).collect();
    let grid_sup = model.coercivity_constant(&xs, &vs)?;
    let nv = grid.nv;
    let evaluate = |nu0: f64, f: &[f64]| -> (f64, f64, f64, f64) {
        let qf = q.apply(nu0, f);
        let rho: f64 = (0..nv).map(|j| grid.w[j] * f[j]).sum();
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        let mut fnorm = 0.0;
        for j in 0..nv {
            let fe = grid.f_eq[j];
            let nu = nu0 * grid.bracket[j];
            lhs += grid.w[j] * qf[j] * f[j] / fe;
            rhs += grid.w[j] * (f[j] - rho * fe).powi(2) * nu / fe;
            fnorm += grid.w[j] * f[j] * f[j] * nu / fe;
        }
        // Q⁺f/ν = F m_β(f)/c_β: its squared norm is ν₀ m²/c_β
        let mb = q.moment(f);
        let gain = nu0 * mb * mb / grid.c_beta;
        (lhs, -rhs / (2.0 * m), fnorm, gain)
    };
    let results: Vec<(f64, f64, f64)> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let x = rng.gen::<f64>() * length;
            let sigma = 3.0 * rng.gen::<f64>();
            let f: Vec<f64> = (0..nv)
                .map(|j| {
                    let z: f64 = rng.sample(StandardNormal);
                    let spike = if rng.gen::<f64>() < 0.05 { 50.0 } else { 1.0 };
                    grid.f_eq[j] * (sigma * z).exp() * spike
                })
                .collect();
            let (lhs, rhs, fnorm, gain) = evaluate(model.nu0(x), &f);
            let excess = (lhs - rhs) / fnorm;
            let slack = if rhs < 0.0 { lhs / rhs } else { f64::INFINITY };
            (excess, gain / fnorm, slack)
        })
        .collect();
    let worst_dissipation = results.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let worst_gain_ratio = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let min_slack = results.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    // f = F and f = ρF give zero dissipation
    let mut equilibrium_residual = 0.0f64;
    for (x, rho) in [(0.3, 1.0), (7.1, 2.5), (0.5 * length, 0.01)] {
        let f: Vec<f64> = grid.f_eq.iter().map(|&fe| rho * fe).collect();
        let (lhs, rhs, fnorm, _) = evaluate(model.nu0(x), &f);
        equilibrium_residual = equilibrium_residual.max((lhs.abs() + rhs.abs()) / fnorm);
    }
    let tol = 1e-10;
    let agreement = (grid_sup - m).abs() / m;
    let verdicts = vec![
        Verdict::new(
            6,
            "dissipation inequality",
            worst_dissipation <= tol && equilibrium_residual <= 1e-12,
            format!(
                "{n_samples} samples, worst (LHS-RHS)/|f|^2 = {worst_dissipation:.3e} (tol \
                 {tol:e}), min slack factor {min_slack:.3}, equilibrium residual \
                 {equilibrium_residual:.1e}"
            ),
        ),
        Verdict::new(
            6,
            "gain bound",
            worst_gain_ratio <= 1.0 + tol,
            format!("max |Q+f/nu|^2/|f|^2 = {worst_gain_ratio:.6}"),
        ),
        Verdict::new(
            6,
            "coercivity constant",
            agreement <= 1e-8,
            format!("grid sup {grid_sup:.12} vs closed form {m:.12} (rel {agreement:.1e})"),
        ),
    ];
    Ok(CoercivityReport {
        samples: n_samples,
        closed_form: m,
        grid_sup,
        worst_dissipation,
        worst_gain_ratio,
        min_slack,
        equilibrium_residual,
        verdicts,
    })
}

// ---------------------------------------------------------------------------
// kernel

#[derive(Debug, Clone, Serialize)]
pub struct KernelReport {
    pub gamma: f64,
    pub eta_closed_form: Option<f64>,
    pub eta_quadrature: Option<f64>,
    pub max_asymmetry: f64,
    pub pairs: usize,
    pub verdicts: Vec<Verdict>,
}

/// Closed form of η for constant ν₀ (with Γ from quadrature) and symmetry of η.
pub fn check_kernel(model: &Model, pairs: usize, seed: u64) -> Result<KernelReport> {
    let g = model.gamma;
    let mut verdicts = Vec::new();
    let (mut closed, mut quad) = (None, None);
    if model.params.nu0_delta == 0.0 {
        // Γ(γ+1) = ∫₀^∞ t^γ e^{-t} dt
        let gamma_q = quadrature::adaptive_pieces(
            |t: f64| t.powf(g) * (-t).exp(),
            &[0.0, 1.0, 4.0, 16.0, 64.0, 200.0],
            1e-16,
            1e-14,
        )
        .value;
        let want = gamma_q * model.params.nu0_mean.powf(1.0 - g);
        let got = eta(model, 1.3, 7.9);
        let rel = (got - want).abs() / want;
        verdicts.push(Verdict::new(
            2,
            "kernel closed form",
            rel <= 1e-8,
            format!("eta = {got:.12}, Gamma(gamma+1) nu^(1-gamma) = {want:.12} (rel {rel:.1e})"),
        ));
        closed = Some(got);
        quad = Some(want);
    }
    let length = model.domain_length();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let x = rng.gen::<f64>() * 3.0 * length - length;
        let y = rng.gen::<f64>() * 3.0 * length - length;
        let a = eta(model, x, y);
        let b = eta(model, y, x);
        worst = worst.max((a - b).abs() / a.abs().max(b.abs()));
    }
    verdicts.push(Verdict::new(
        2,
        "kernel symmetry",
        worst <= 1e-12,
        format!("{pairs} pairs, max relative asymmetry {worst:.1e}"),
    ));
    Ok(KernelReport {
        gamma: g,
        eta_closed_form: closed,
        eta_quadrature: quad,
        max_asymmetry: worst,
        pairs,
        verdicts,
    })
}

// ---------------------------------------------------------------------------
// macroscopic solver

#[derive(Debug, Clone, Serialize)]
pub struct MacroReport {
    pub nx: usize,
    pub images: usize,
    pub t_final: f64,
    pub mass_error: f64,
    pub fourier_rel_diff: Option<f64>,
    pub max_offdiag: f64,
    pub verdicts: Vec<Verdict>,
    #[serde(skip)]
    pub rho: Option<DensityField>,
    #[serde(skip)]
    pub fourier: Option<DensityField>,
}

pub fn initial_density(model: &Model, profile: &InitialProfile, nx: usize) -> Result<DensityField> {
    profile.validate(model.domain_length())?;
    let grid = Grid1d::new(nx, model.domain_length());
    Ok(DensityField {
        grid,
        values: profile.discretize(&grid),
        time: 0.0,
        provenance: Provenance::Macro,
    })
}

/// Solves the limit equation and, for constant ν₀, compares with the Fourier solution.
pub fn check_macro(
    model: &Model,
    profile: &InitialProfile,
    nx: usize,
    images: usize,
    t_final: f64,
    dt: f64,
) -> Result<MacroReport> {
    let rho0 = initial_density(model, profile, nx)?;
    let op = assemble(model, rho0.grid, images)?;
    let rho = solve_macro(&op, model.kappa(), &rho0, t_final, dt, &[])?
        .pop()
        .ok_or_else(|| Error::Numeric("macro solver returned no state".into()))?;
    let mass_error = (rho.mass() - rho0.mass()).abs();
    let mut verdicts = vec![Verdict::new(
        3,
        "macro mass",
        mass_error < 1e-9,
        format!("|mass(T) - mass(0)| = {mass_error:.1e}"),
    )];
    let (mut diff, mut fourier) = (None, None);
    if model.params.nu0_delta == 0.0 {
        let f = fourier_reference(model, &rho0, t_final)?;
        let d = rho.l2_distance(&f)? / f.l2_norm();
        verdicts.push(Verdict::new(
            3,
            "spectral cross-check",
            d < 1e-3,
            format!("nx={nx}, K={images}, T={t_final}: relative L2 difference {d:.3e} (tol 1e-3)"),
        ));
        diff = Some(d);
        fourier = Some(f);
    }
    Ok(MacroReport {
        nx,
        images,
        t_final,
        mass_error,
        fourier_rel_diff: diff,
        max_offdiag: op.max_offdiag,
        verdicts,
        rho: Some(rho),
        fourier,
    })
}

// ---------------------------------------------------------------------------
// corrector identities and L² gaps

#[derive(Debug, Clone, Serialize)]
pub struct ChiRow {
    pub eps: f64,
    pub gap: f64,
    pub gap_dt: f64,
    pub chi_ratio: f64,
    pub chi_ratio_bound: f64,
    pub sup_bound_ok: bool,
    pub sup_bound_worst: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChiReport {
    pub identity_samples: usize,
    pub identity_max_error: f64,
    pub hazard_max_error: f64,
    pub rows: Vec<ChiRow>,
    pub verdicts: Vec<Verdict>,
}

/// Constant φ at random `(t, x, v, ε)`: `χ = φ` and unit hazard weight.
pub fn check_corrector_identity(model: &Model, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let phi = TestFunction::new(
        SpatialProfile::Constant { value: 1.7 },
        TimeEnvelope::Constant,
        None,
    )?;
    let errs: Vec<(f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let t = rng.gen::<f64>();
            let x = (rng.gen::<f64>() - 0.5) * 4.0 * model.domain_length();
            // log-uniform speeds over eight decades, either sign
            let v = 10f64.powf(rng.gen::<f64>() * 8.0 - 3.0)
                * if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let eps = 10f64.powf(-2.0 * rng.gen::<f64>());
            let ce = CorrectorEval::new(model, phi, eps)?;
            let chi = ce.chi(t, x, v)?;
            let w = ce.weight_integral(x, v)?;
            Ok(((chi - 1.7).abs() / 1.7, (w - 1.0).abs()))
        })
        .collect::<Result<_>>()?;
    Ok((
        errs.iter().map(|e| e.0).fold(0.0, f64::max),
        errs.iter().map(|e| e.1).fold(0.0, f64::max),
    ))
}

/// Worst `|χ − φ| / bound` on a sample grid (≤ 1 passes).
pub fn sup_bound_ratio(model: &Model, phi: &TestFunction, eps: f64) -> Result<f64> {
    let ce = CorrectorEval::new(model, *phi, eps)?;
    let (a, b) = phi.spatial.window().unwrap_or((-10.0, 10.0));
    let xs: Vec<f64> = (0..=40).map(|k| a + (b - a) * k as f64 / 40.0).collect();
    let grad_sup = xs
        .iter()
        .map(|&x| phi.spatial_eval(x)[1].abs())
        .chain((0..=4000).map(|k| phi.spatial_eval(a + (b - a) * k as f64 / 4000.0)[1].abs()))
        .fold(0.0, f64::max);
    let vs: Vec<f64> = (-30i32..=30)
        .map(|k| {
            let s = if k < 0 { -1.0 } else { 1.0 };
            s * 10f64.powf(k.abs() as f64 / 6.0 - 2.0)
        })
        .collect();
    let mut worst = 0.0f64;
    for &x in &xs {
        for &v in &vs {
            let d = (ce.chi_profile(x, v, Apply::Value)? - phi.spatial_eval(x)[0]).abs();
            let bound = ce.sup_bound(v, grad_sup);
            if bound > 0.0 {
                worst = worst.max(d / bound);
            } else if d > 1e-14 {
                worst = f64::INFINITY;
            }
        }
    }
    Ok(worst)
}

pub fn check_chi(
    model: &Model,
    phi: &TestFunction,
    eps_list: &[f64],
    identity_samples: usize,
    seed: u64,
) -> Result<ChiReport> {
    let (identity_max_error, hazard_max_error) =
        check_corrector_identity(model, identity_samples, seed)?;
    let mut rows = Vec::new();
    for &eps in eps_list {
        let gap = chi_l2f_gap(model, phi, eps)?;
        let worst = sup_bound_ratio(model, phi, eps)?;
        rows.push(ChiRow {
            eps,
            gap: gap.gap,
            gap_dt: gap.gap_dt,
            chi_ratio: gap.chi_ratio,
            chi_ratio_bound: gap.chi_ratio_bound,
            sup_bound_ok: worst <= 1.0 + 1e-9,
            sup_bound_worst: worst,
        });
    }
    let mut verdicts = vec![Verdict::new(
        4,
        "corrector identity",
        identity_max_error <= 1e-12 && hazard_max_error <= 1e-12,
        format!(
            "{identity_samples} samples: max |chi - phi|/|phi| = {identity_max_error:.1e}, max \
             |hazard weight - 1| = {hazard_max_error:.1e} (tol 1e-12)"
        ),
    )];
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    let gaps_dt: Vec<f64> = rows.iter().map(|r| r.gap_dt).collect();
    if rows.len() >= 2 {
        verdicts.push(Verdict::new(
            5,
            "corrector L2 gaps",
            strictly_decreasing(&gaps) && strictly_decreasing(&gaps_dt),
            format!("gap {}, gap_dt {}", sci(&gaps), sci(&gaps_dt)),
        ));
    }
    let worst_ratio = rows
        .iter()
        .map(|r| r.chi_ratio / r.chi_ratio_bound)
        .fold(0.0, f64::max);
    verdicts.push(Verdict::new(
        5,
        "corrector L2 bound",
        worst_ratio <= 1.0,
        format!(
            "max |chi|^2_F / ((nu2/nu1)|phi|^2) = {worst_ratio:.4} (nu2/nu1 = {:.4})",
            model.nu2 / model.nu1
        ),
    ));
    verdicts.push(Verdict::new(
        5,
        "corrector pointwise bound",
        rows.iter().all(|r| r.sup_bound_ok),
        format!(
            "max |chi - phi| / bound = {:.4}",
            rows.iter().map(|r| r.sup_bound_worst).fold(0.0, f64::max)
        ),
    ));
    Ok(ChiReport {
        identity_samples,
        identity_max_error,
        hazard_max_error,
        rows,
        verdicts,
    })
}

// ---------------------------------------------------------------------------
// operator limit

#[derive(Debug, Clone, Serialize)]
pub struct LimitPoint {
    pub t: f64,
    pub x: f64,
    /// `−κ𝓛φ(t, x)`.
    pub target: f64,
    pub values: Vec<f64>,
    pub abs_errors: Vec<f64>,
    pub rel_errors: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitReport {
    pub eps_list: Vec<f64>,
    pub points: Vec<LimitPoint>,
    pub verdicts: Vec<Verdict>,
}

/// `operator_limit_lhs` against `−κ𝓛φ` from the nonlocal module.
pub fn check_limit(
    model: &Model,
    phi: &TestFunction,
    t: f64,
    xs: &[f64],
    eps_list: &[f64],
    label: &str,
) -> Result<LimitReport> {
    if phi.period.is_some() {
        return Err(Error::Precondition("the operator limit is taken on the line".into()));
    }
    let psi = phi.envelope.eval(t).0;
    let scale = phi.spatial.scale().min(1.0);
    let points: Vec<LimitPoint> = xs
        .par_iter()
        .map(|&x| {
            let l = operator_pointwise(model, x, |y| phi.spatial_eval(y), scale, 400.0 * scale);
            let target = -model.kappa() * psi * l;
            let values: Vec<f64> = eps_list
                .iter()
                .map(|&eps| operator_limit_lhs(model, phi, t, x, eps))
                .collect::<Result<_>>()?;
            let abs_errors: Vec<f64> = values.iter().map(|v| (v - target).abs()).collect();
            let rel_errors = abs_errors.iter().map(|e| e / target.abs()).collect();
            Ok(LimitPoint {
                t,
                x,
                target,
                values,
                abs_errors,
                rel_errors,
            })
        })
        .collect::<Result<_>>()?;
    let monotone = points.iter().all(|p| strictly_decreasing(&p.abs_errors));
    let terminal = points
        .iter()
        .map(|p| *p.rel_errors.last().expect("non-empty"))
        .fold(0.0, f64::max);
    let verdicts = vec![Verdict::new(
        1,
        &format!("operator limit ({label})"),
        monotone && terminal < 0.05,
        format!(
            "{} points, errors strictly decreasing: {monotone}, terminal max relative error \
             {terminal:.3e} at eps={} (tol 5e-2)",
            points.len(),
            eps_list.last().copied().unwrap_or(f64::NAN)
        ),
    )];
    Ok(LimitReport {
        eps_list: eps_list.to_vec(),
        points,
        verdicts,
    })
}

// ---------------------------------------------------------------------------
// corrector terms of the weak formulation

#[derive(Debug, Clone, Serialize)]
pub struct CorrectorRow {
    pub eps: f64,
    pub step1: f64,
    pub step2: f64,
    pub step3: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TermFit {
    pub name: String,
    /// Exponent of the vanishing rate.
    pub exponent: f64,
    /// `None` when the term vanishes identically.
    pub slope: Option<f64>,
    pub decreasing: bool,
    /// Constant fitted at the largest ε, `|term|/ε^{exponent}`.
    pub fitted_constant: f64,
    /// Whether the fitted constant bounds every smaller ε.
    pub fit_bounds_all: bool,
    pub identically_zero: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrectorReport {
    pub rows: Vec<CorrectorRow>,
    pub fits: Vec<TermFit>,
    pub verdicts: Vec<Verdict>,
}

/// Terms below this magnitude count as vanishing identically (round-off level).
const ZERO_TERM: f64 = 1e-13;

fn fit_term(name: &str, exponent: f64, eps: &[f64], vals: &[f64], shape: impl Fn(f64) -> f64) -> TermFit {
    let abs: Vec<f64> = vals.iter().map(|v| v.abs()).collect();
    let zero = abs.iter().all(|&v| v < ZERO_TERM);
    if zero {
        return TermFit {
            name: name.into(),
            exponent,
            slope: None,
            decreasing: true,
            fitted_constant: 0.0,
            fit_bounds_all: true,
            identically_zero: true,
        };
    }
    let c = abs[0] / shape(eps[0]);
    TermFit {
        name: name.into(),
        exponent,
        slope: loglog_slope(eps, &abs).ok(),
        decreasing: strictly_decreasing(&abs),
        fitted_constant: c,
        fit_bounds_all: abs
            .iter()
            .zip(eps)
            .all(|(&v, &e)| v <= c * shape(e) * (1.0 + 1e-9)),
        identically_zero: false,
    }
}

/// Runs the kinetic solver for each ε and evaluates the three corrector terms.
pub fn check_correctors(
    model: &Model,
    det: &DetConfig,
    profile: &InitialProfile,
    phi: &TestFunction,
    eps_list: &[f64],
) -> Result<CorrectorReport> {
    if eps_list.len() < 3 {
        return Err(Error::Input("slope estimation needs at least 3 eps values".into()));
    }
    if phi.period.is_none() {
        return Err(Error::Precondition("corrector terms need a periodized test function".into()));
    }
    let t_end = phi
        .envelope
        .support_end()
        .ok_or_else(|| Error::Precondition("test function needs compact time support".into()))?
        .min(det.t_final);
    let need_fields = model.drift(1.0) != 0.0;
    let samples = 50;
    let cfg = DetConfig {
        t_final: t_end,
        snapshot_times: (0..=samples).map(|k| t_end * k as f64 / samples as f64).collect(),
        keep_fields: need_fields,
        moment_stride: 1,
        ..det.clone()
    };
    let rows: Vec<CorrectorRow> = eps_list
        .iter()
        .map(|&eps| {
            let run = run_kinetic_det(model, &cfg, profile, eps)?;
            let step1 = corrector_term_qplus(model, phi, &run)?;
            let (step2, step3) = drift_terms(model, phi, &run)?;
            Ok(CorrectorRow {
                eps,
                step1,
                step2,
                step3,
            })
        })
        .collect::<Result<_>>()?;
    let g = model.gamma;
    let b = model.beta();
    let e1 = ((2.0 - g) / 2.0).min(g / 2.0);
    let e2 = (1.0 - g / 2.0).min(1.0 / (1.0 - b));
    let e3 = (2.0 - g).min(1.0 / (1.0 - b));
    let col = |f: fn(&CorrectorRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let fits = vec![
        fit_term("step1", e1, eps_list, &col(|r| r.step1), |e| {
            e.powf((2.0 - g) / 2.0) + e.powf(g / 2.0)
        }),
        fit_term("step2", e2, eps_list, &col(|r| r.step2), |e| e.powf(e2)),
        fit_term("step3", e3, eps_list, &col(|r| r.step3), |e| e.powf(e3)),
    ];
    let mut verdicts = Vec::new();
    for f in &fits {
        let (passed, detail) = if f.identically_zero {
            (true, format!("{}: identically zero (|term| < {ZERO_TERM:e})", f.name))
        } else {
            let slope = f.slope.unwrap_or(f64::NAN);
            (
                f.decreasing && slope >= f.exponent - SLOPE_SLACK,
                format!(
                    "{}: decreasing {}, log-log slope {slope:.3} vs exponent {:.3} - {SLOPE_SLACK}, \
                     constant fitted at largest eps bounds the rest: {}",
                    f.name, f.decreasing, f.exponent, f.fit_bounds_all
                ),
            )
        };
        verdicts.push(Verdict::new(9, "corrector vanishing", passed, detail));
    }
    if model.alpha() < 1.0 {
        let zero = rows.iter().all(|r| r.step2 == 0.0 && r.step3 == 0.0);
        verdicts.push(Verdict::new(
            9,
            "drift terms vanish for alpha < 1",
            zero,
            format!("step2/step3 exactly zero: {zero}"),
        ));
    }
    Ok(CorrectorReport {
        rows,
        fits,
        verdicts,
    })
}

// ---------------------------------------------------------------------------
// sweep

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub failure: Option<String>,
    pub vmax: f64,
    pub dt: f64,
    pub steps: usize,
    /// `‖ρ^ε(T) − ρ(T)‖_{L²}`.
    pub error_l2: f64,
    pub rel_error: f64,
    pub gnorm_max: f64,
    pub gnorm_bound: f64,
    /// `max ‖g‖² / ε^γ`, expected to be roughly ε-independent.
    pub gnorm_scaled: f64,
    pub rho_ratio: f64,
    pub mass_error: f64,
    pub mass_drift_rate: f64,
    pub min_value: f64,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub wall_seconds: f64,
    #[serde(skip)]
    pub rho: Option<DensityField>,
}

#[derive(Debug, Clone, Serialize)]
pub struct McComparison {
    pub eps: f64,
    pub particles: usize,
    pub seed: u64,
    pub bins: usize,
    pub max_z: f64,
    pub bins_outside: usize,
    pub mass: f64,
    pub collisions: u64,
    #[serde(skip)]
    pub wall_seconds: f64,
    #[serde(skip)]
    pub mc: Option<DensityField>,
    #[serde(skip)]
    pub det: Option<DensityField>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub code_version: String,
    pub config: RunConfig,
    pub seed: u64,
    pub constants: ModelSummary,
    pub macro_check: MacroReport,
    pub rows: Vec<SweepRow>,
    /// Fitted log-log slope of `E(ε)`; reported, not asserted.
    pub empirical_rate: Option<f64>,
    /// `max/min` of `‖g‖²/ε^γ` across the sweep; reported, not asserted.
    pub gnorm_scaled_spread: Option<f64>,
    pub mc: Option<McComparison>,
    pub verdicts: Vec<Verdict>,
}

fn sweep_row(
    model: &Model,
    det: &DetConfig,
    profile: &InitialProfile,
    eps: f64,
    reference: &DensityField,
) -> SweepRow {
    let start = Instant::now();
    let mut row = SweepRow {
        eps,
        failure: None,
        vmax: 0.0,
        dt: 0.0,
        steps: 0,
        error_l2: 0.0,
        rel_error: 0.0,
        gnorm_max: 0.0,
        gnorm_bound: 0.0,
        gnorm_scaled: 0.0,
        rho_ratio: 0.0,
        mass_error: 0.0,
        mass_drift_rate: 0.0,
        min_value: 0.0,
        warnings: vec![],
        wall_seconds: 0.0,
        rho: None,
    };
    let outcome = (|| -> Result<()> {
        let run = run_kinetic_det(model, det, profile, eps)?;
        let rho = run.final_density().clone();
        let ap = check_apriori(&run)?;
        row.vmax = run.vmax;
        row.dt = run.dt;
        row.steps = run.steps;
        row.error_l2 = rho.l2_distance(reference)?;
        row.rel_error = row.error_l2 / reference.l2_norm();
        row.gnorm_max = run.gnorm_series.iter().map(|p| p.1).fold(0.0, f64::max);
        row.gnorm_bound = run.gnorm_bound;
        row.gnorm_scaled = row.gnorm_max / eps.powf(model.gamma);
        row.rho_ratio = ap.rho_ratio;
        row.mass_error = (run.final_mass - 1.0).abs();
        row.mass_drift_rate = (run.final_mass - run.initial_mass).abs() / det.t_final;
        row.min_value = run.min_value;
        row.warnings = run.warnings.clone();
        row.rho = Some(rho);
        Ok(())
    })();
    if let Err(e) = outcome {
        row.failure = Some(e.to_string());
    }
    row.wall_seconds = start.elapsed().as_secs_f64();
    row
}

/// Monte Carlo density against a deterministic one, binned on `bins` cells.
pub fn mc_cross_check(
    model: &Model,
    profile: &InitialProfile,
    det_rho: &DensityField,
    eps: f64,
    particles: usize,
    seed: u64,
    bins: usize,
) -> Result<McComparison> {
    let start = Instant::now();
    let mut ens = init_ensemble(model, profile, particles, seed)?;
    let stats = advance(model, &mut ens, det_rho.time, eps)?;
    let grid = Grid1d::new(bins, model.domain_length());
    let mc = estimate_density(&ens, grid, false)?;
    let det = det_rho.coarsen(bins)?;
    let se = histogram_standard_error(&mc, particles);
    let z: Vec<f64> = mc
        .values
        .iter()
        .zip(&det.values)
        .zip(&se)
        .map(|((a, b), s)| if *s > 0.0 { (a - b).abs() / s } else if a == b { 0.0 } else { f64::INFINITY })
        .collect();
    Ok(McComparison {
        eps,
        particles,
        seed,
        bins,
        max_z: z.iter().copied().fold(0.0, f64::max),
        bins_outside: z.iter().filter(|&&v| v > 3.0).count(),
        mass: mc.mass(),
        collisions: stats.collisions,
        wall_seconds: start.elapsed().as_secs_f64(),
        mc: Some(mc),
        det: Some(det),
    })
}

/// Runs the kinetic solver over the ε-list against one macroscopic solve.
pub fn run_sweep(config: &RunConfig) -> Result<SweepReport> {
    config.validate()?;
    let model = config.model()?;
    let d = &config.discretization;
    let e = &config.experiment;
    let det = config.det_config();
    let macro_check = check_macro(&model, &e.initial, d.nx, d.images, e.t_final, d.macro_dt)?;
    let reference = macro_check.rho.clone().expect("macro state");
    let rows: Vec<SweepRow> = e
        .eps_list
        .par_iter()
        .map(|&eps| sweep_row(&model, &det, &e.initial, eps, &reference))
        .collect();
    let mut verdicts = macro_check.verdicts.clone();
    let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.failure.is_none()).collect();
    for r in &rows {
        if let Some(f) = &r.failure {
            verdicts.push(Verdict::new(8, "kinetic run", false, format!("eps={}: {f}", r.eps)));
        }
    }
    for r in &ok {
        let limit = 1.0 + DISCRETIZATION_SLACK;
        let g = r.gnorm_max / r.gnorm_bound;
        verdicts.push(Verdict::new(
            7,
            "a-priori bounds",
            g <= limit && r.rho_ratio <= limit,
            format!(
                "eps={}: max|g|^2/bound = {g:.4}, max|rho|/|f0| = {:.4} (limit {limit})",
                r.eps, r.rho_ratio
            ),
        ));
        verdicts.push(Verdict::new(
            10,
            "deterministic mass",
            r.mass_error < 1e-9 && r.mass_drift_rate < 1e-10,
            format!(
                "eps={}: |mass - 1| = {:.1e}, drift rate {:.1e}/unit time",
                r.eps, r.mass_error, r.mass_drift_rate
            ),
        ));
    }
    let errs: Vec<f64> = ok.iter().map(|r| r.error_l2).collect();
    let eps_ok: Vec<f64> = ok.iter().map(|r| r.eps).collect();
    let mut empirical_rate = None;
    let mut spread = None;
    if rows.len() >= 2 && ok.len() == rows.len() {
        let ratio = errs[errs.len() - 1] / errs[0];
        verdicts.push(Verdict::new(
            8,
            "hydrodynamic limit",
            strictly_decreasing(&errs) && ratio < 0.5,
            format!(
                "E(eps) = {} over eps = {eps_ok:?}; E(last)/E(first) = {ratio:.3} (< 0.5)",
                sci(&errs)
            ),
        ));
        empirical_rate = loglog_slope(&eps_ok, &errs).ok();
        let scaled: Vec<f64> = ok.iter().map(|r| r.gnorm_scaled).collect();
        let hi = scaled.iter().copied().fold(0.0, f64::max);
        let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
        spread = Some(hi / lo);
    }
    let mut mc = None;
    if e.particles > 0 {
        let det_rho = match ok.iter().find(|r| r.eps == e.mc_eps) {
            Some(r) => r.rho.clone().expect("row density"),
            None => run_kinetic_det(&model, &det, &e.initial, e.mc_eps)?
                .final_density()
                .clone(),
        };
        let c = mc_cross_check(
            &model,
            &e.initial,
            &det_rho,
            e.mc_eps,
            e.particles,
            e.seed,
            d.mc_bins,
        )?;
        verdicts.push(Verdict::new(
            8,
            "Monte Carlo cross-check",
            c.bins_outside == 0,
            format!(
                "eps={}, N={}, {} bins: max |rho_mc - rho_det|/SE = {:.2} (limit 3), {} bins outside",
                c.eps, c.particles, c.bins, c.max_z, c.bins_outside
            ),
        ));
        verdicts.push(Verdict::new(
            10,
            "Monte Carlo mass",
            (c.mass - 1.0).abs() < 1e-12,
            format!("histogram mass {:.15}", c.mass),
        ));
        mc = Some(c);
    }
    Ok(SweepReport {
        schema_version: crate::io::SCHEMA_VERSION,
        code_version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        seed: e.seed,
        constants: model_summary(&model)?,
        macro_check,
        rows,
        empirical_rate,
        gnorm_scaled_spread: spread,
        mc,
        verdicts,
    })
}
