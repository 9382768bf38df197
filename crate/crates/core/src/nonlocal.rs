//! The limit operator
//! `𝓛ρ(x) = (1/(1−β)) PV∫ η(x, y)(ρ(x) − ρ(y))/|x − y|^{1+γ} dy`
//! with kernel `η(x, y) = ν₀(x)ν₀(y)Γ(γ+1)/ν̄₀(x, y)^{γ+1}`, where `ν̄₀` is the
//! average of ν₀ along the segment from x to y.
//!
//! On the torus the operator is discretized densely: far-field interactions
//! integrate a piecewise-cubic interpolant of ρ against the kernel over `K` periodic
//! images, the singular cell is replaced by its second-order Taylor expansion.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;
use statrs::function::gamma::gamma as gamma_fn;

use crate::density::{DensityField, Grid1d, Provenance};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::quadrature::{self, gauss_legendre};

/// Kernel `η(x, y)` of the limit operator.
pub fn eta(model: &Model, x: f64, y: f64) -> f64 {
    let g = model.gamma;
    let avg = model.nu0_segment_average(x, y);
    model.nu0(x) * model.nu0(y) * gamma_fn(g + 1.0) * avg.powf(-g - 1.0)
}

/// Bounds `η₁ ≤ η ≤ η₂` implied by `ν₁ ≤ ν₀ ≤ ν₂`.
pub fn eta_bounds(model: &Model) -> (f64, f64) {
    let g = model.gamma;
    let gg = gamma_fn(g + 1.0);
    (
        model.nu1 * model.nu1 * gg * model.nu2.powf(-g - 1.0),
        model.nu2 * model.nu2 * gg * model.nu1.powf(-g - 1.0),
    )
}

/// `C(γ) = ∫_ℝ (1 − cos w)/|w|^{1+γ} dw`, the symbol constant of the fractional
/// Laplacian, by quadrature.
pub fn c_gamma(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(Error::Validation(format!("0 < gamma < 2 violated (gamma = {gamma})")));
    }
    // [0, 1]: termwise integration of the cosine series
    let mut near = 0.0;
    let mut fact = 1.0;
    for n in 1..30 {
        let k = 2 * n;
        fact *= ((k - 1) * k) as f64;
        let term = 1.0 / (fact * (k as f64 - gamma));
        near += if n % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    // [1, A] adaptively with one break per half period, A = 2πN
    let cycles = 40;
    let a = 2.0 * PI * cycles as f64;
    let mut breaks = vec![1.0];
    breaks.extend((1..=2 * cycles).map(|k| PI * k as f64));
    let mid = quadrature::adaptive_pieces(
        |w| (1.0 - w.cos()) * w.powf(-1.0 - gamma),
        &breaks,
        1e-15,
        1e-14,
    )
    .value;
    // [A, ∞): ∫w^{-1-γ} minus the cosine tail, by repeated integration by parts
    // (sin A = 0, cos A = 1): I(p) = p(A^{-p-1} − (p+1) I(p+2))
    fn cos_tail(p: f64, a: f64, depth: u32) -> f64 {
        if depth == 0 {
            return 0.0;
        }
        p * (a.powf(-p - 1.0) - (p + 1.0) * cos_tail(p + 2.0, a, depth - 1))
    }
    let tail = a.powf(-gamma) / gamma - cos_tail(1.0 + gamma, a, 6);
    Ok(2.0 * (near + mid + tail))
}

/// Fourier multiplier constant `c* = η C(γ)/(1−β)` for constant ν₀, so that
/// `𝓛 e^{iξx} = c*|ξ|^γ e^{iξx}`.
pub fn symbol_constant(model: &Model) -> Result<f64> {
    if model.params.nu0_delta != 0.0 {
        return Err(Error::Precondition(
            "the Fourier symbol is only available for constant nu0 (delta = 0)".into(),
        ));
    }
    let eta0 = eta(model, 0.0, 0.0);
    Ok(eta0 * c_gamma(model.gamma)? / (1.0 - model.beta()))
}

/// Pairwise kernel values on a grid, for the base cell and `images` periodic shifts
/// of `y` on each side.
#[derive(Debug, Clone, Serialize)]
pub struct KernelTable {
    pub grid: Grid1d,
    pub images: usize,
    /// `values[(m + K) * nx² + i * nx + j] = η(x_i, x_j + mL)`.
    pub values: Vec<f64>,
    /// Segment averages `ν̄₀(x_i, x_j + mL)` in the same layout.
    pub averages: Vec<f64>,
}

impl KernelTable {
    pub fn build(model: &Model, grid: Grid1d, images: usize) -> KernelTable {
        let nx = grid.nx;
        let k = images as i64;
        let xs = grid.nodes();
        let pairs: Vec<(f64, f64)> = (-k..=k)
            .flat_map(|m| {
                let xs = &xs;
                (0..nx * nx).map(move |p| {
                    let (i, j) = (p / nx, p % nx);
                    (xs[i], xs[j] + m as f64 * grid.length)
                })
            })
            .collect();
        let (values, averages) = pairs
            .par_iter()
            .map(|&(x, y)| (eta(model, x, y), model.nu0_segment_average(x, y)))
            .unzip();
        KernelTable {
            grid,
            images,
            values,
            averages,
        }
    }

    pub fn get(&self, i: usize, j: usize, image: i64) -> f64 {
        let nx = self.grid.nx;
        let m = (image + self.images as i64) as usize;
        self.values[m * nx * nx + i * nx + j]
    }
}

/// Dense discretization of 𝓛 on the torus.
#[derive(Debug, Clone)]
pub struct NonlocalOperator {
    pub grid: Grid1d,
    pub gamma: f64,
    pub beta: f64,
    pub images: usize,
    pub matrix: DMatrix<f64>,
    /// Near-field coefficients `η(x_i, x_i) h^{-γ}/((2−γ)(1−β))`.
    pub near_coeff: Vec<f64>,
    /// Bound on the neglected interactions beyond `K L`, per unit `‖ρ‖∞`.
    pub tail_bound: f64,
    /// Largest off-diagonal entry (non-positive for an M-matrix structure).
    pub max_offdiag: f64,
}

impl NonlocalOperator {
    pub fn apply(&self, rho: &[f64]) -> Vec<f64> {
        let v = &self.matrix * DVector::from_column_slice(rho);
        v.as_slice().to_vec()
    }
}

/// Cubic Lagrange cardinal functions on nodes −1, 0, 1, 2.
fn cubic_cardinals(s: f64) -> [f64; 4] {
    [
        -s * (s - 1.0) * (s - 2.0) / 6.0,
        (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
        -(s + 1.0) * s * (s - 2.0) / 2.0,
        (s + 1.0) * s * (s - 1.0) / 6.0,
    ]
}

/// Assembles the dense operator with `images` periodic copies on each side.
pub fn assemble(model: &Model, grid: Grid1d, images: usize) -> Result<NonlocalOperator> {
    let g = model.gamma;
    if !(g > 0.0 && g < 2.0) {
        return Err(Error::Validation(format!("0 < gamma < 2 violated (gamma = {g})")));
    }
    if grid.nx < 16 {
        return Err(Error::Config(format!("nx must be at least 16 (nx = {})", grid.nx)));
    }
    if images < 1 {
        return Err(Error::Config("image count K must be at least 1".into()));
    }
    let nx = grid.nx;
    let h = grid.dx();
    let beta = model.beta();
    let scale = 1.0 / (1.0 - beta);
    let near_rule = gauss_legendre(8);
    let far_rule = gauss_legendre(4);
    let intervals = images * nx;
    let xs = grid.nodes();
    let near_coeff: Vec<f64> = xs
        .iter()
        .map(|&x| eta(model, x, x) * h.powf(-g) * scale / (2.0 - g))
        .collect();

    let build_row = |i: usize| -> Vec<f64> {
        let x = xs[i];
        let mut row = vec![0.0; nx];
        let mut diag = 0.0;
        for side in [1i64, -1] {
            for m in 1..intervals {
                let rule = if m <= 8 { &near_rule } else { &far_rule };
                let lo = m as f64 * h;
                for (&t, &wt) in rule.nodes.iter().zip(&rule.weights) {
                    let s = 0.5 * (t + 1.0);
                    let w = lo + s * h;
                    let k = eta(model, x, x + side as f64 * w) * w.powf(-1.0 - g) * scale
                        * 0.5
                        * h
                        * wt;
                    diag += k;
                    for (l, c) in cubic_cardinals(s).iter().enumerate() {
                        let off = side * (m as i64 + l as i64 - 1);
                        let j = (i as i64 + off).rem_euclid(nx as i64) as usize;
                        row[j] -= k * c;
                    }
                }
            }
        }
        row[i] += diag;
        let c = near_coeff[i];
        row[i] += 2.0 * c;
        row[(i + 1) % nx] -= c;
        row[(i + nx - 1) % nx] -= c;
        row
    };

    let rows: Vec<Vec<f64>> = if model.params.nu0_delta == 0.0 {
        // translation invariant: circulant matrix
        let r0 = build_row(0);
        (0..nx)
            .map(|i| (0..nx).map(|j| r0[(j + nx - i) % nx]).collect())
            .collect()
    } else {
        (0..nx).into_par_iter().map(build_row).collect()
    };
    let mut a = DMatrix::from_fn(nx, nx, |i, j| rows[i][j]);
    a = (&a + a.transpose()) * 0.5;
    let mut max_offdiag = f64::NEG_INFINITY;
    for i in 0..nx {
        let mut off = 0.0;
        for j in 0..nx {
            if i != j {
                off += a[(i, j)];
                max_offdiag = max_offdiag.max(a[(i, j)]);
            }
        }
        a[(i, i)] = -off;
    }
    let (_, eta2) = eta_bounds(model);
    let reach = images as f64 * grid.length;
    let tail_bound = 4.0 * eta2 * scale * reach.powf(-g) / g;
    Ok(NonlocalOperator {
        grid,
        gamma: g,
        beta,
        images,
        matrix: a,
        near_coeff,
        tail_bound,
        max_offdiag,
    })
}

/// Solves `∂tρ + κ𝓛ρ = 0` from the cell values of `rho0` by Crank–Nicolson, returning
/// the solution at each requested time (`t_final` always included, last).
pub fn solve_macro(
    op: &NonlocalOperator,
    kappa: f64,
    rho0: &DensityField,
    t_final: f64,
    dt: f64,
    snapshot_times: &[f64],
) -> Result<Vec<DensityField>> {
    if !(dt > 0.0) {
        return Err(Error::Precondition(format!("macro dt must be positive ({dt})")));
    }
    if rho0.grid != op.grid {
        return Err(Error::Precondition("initial density and operator grids differ".into()));
    }
    let nx = op.grid.nx;
    let half = 0.5 * kappa;
    let mut times: Vec<f64> = snapshot_times
        .iter()
        .copied()
        .filter(|&t| t >= 0.0 && t < t_final)
        .collect();
    times.push(t_final);
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut rho = DVector::from_column_slice(&rho0.values);
    let mut out = Vec::with_capacity(times.len());
    let mut t0 = 0.0;
    let mut cached: Option<(f64, nalgebra::Cholesky<f64, nalgebra::Dyn>)> = None;
    for &t1 in &times {
        if t1 > t0 {
            let n = ((t1 - t0) / dt).ceil().max(1.0) as usize;
            let step = (t1 - t0) / n as f64;
            let reuse = matches!(&cached, Some((s, _)) if (*s - step).abs() <= 1e-14 * step);
            if !reuse {
                let lhs = DMatrix::identity(nx, nx) + &op.matrix * (half * step);
                let chol = lhs.cholesky().ok_or_else(|| {
                    Error::Numeric("Crank-Nicolson matrix is not positive definite".into())
                })?;
                cached = Some((step, chol));
            }
            let (_, chol) = cached.as_ref().expect("factorization cached");
            for _ in 0..n {
                let rhs = &rho - &op.matrix * &rho * (half * step);
                rho = chol.solve(&rhs);
            }
        }
        if rho.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("macro solution not finite at t = {t1}")));
        }
        out.push(DensityField {
            grid: op.grid,
            values: rho.as_slice().to_vec(),
            time: t1,
            provenance: Provenance::Macro,
        });
        t0 = t1;
    }
    Ok(out)
}

/// Exact evolution of `∂tρ = −κ c*|ξ|^γ ρ` on the torus by discrete Fourier
/// transform of the cell values. Requires constant ν₀.
pub fn fourier_reference(model: &Model, rho0: &DensityField, t: f64) -> Result<DensityField> {
    let cstar = symbol_constant(model)?;
    let nx = rho0.grid.nx;
    let length = rho0.grid.length;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(nx);
    let inv = planner.plan_fft_inverse(nx);
    let mut buf: Vec<Complex<f64>> = rho0.values.iter().map(|&r| Complex::new(r, 0.0)).collect();
    fwd.process(&mut buf);
    let kappa = model.kappa();
    for (k, c) in buf.iter_mut().enumerate() {
        let kk = if k <= nx / 2 { k as f64 } else { k as f64 - nx as f64 };
        let xi = 2.0 * PI * kk / length;
        *c *= (-kappa * cstar * xi.abs().powf(model.gamma) * t).exp();
    }
    inv.process(&mut buf);
    let values = buf.iter().map(|c| c.re / nx as f64).collect();
    Ok(DensityField {
        grid: rho0.grid,
        values,
        time: t,
        provenance: Provenance::Fourier,
    })
}

/// `𝓛φ(x)` on the whole line, by adaptive quadrature.
///
/// `phi(y)` returns `(φ, φ', φ'')`. `scale` is the length scale over which φ varies
/// and `reach` the distance from `x` beyond which `φ(x ± w)` may be treated as zero
/// compared with `φ(x)`.
pub fn operator_pointwise(
    model: &Model,
    x: f64,
    phi: impl Fn(f64) -> [f64; 3],
    scale: f64,
    reach: f64,
) -> f64 {
    let g = model.gamma;
    let [p0, p1, p2] = phi(x);
    let eta0 = eta(model, x, x);
    let bracket = |w: f64| -> f64 {
        let ep = eta(model, x, x + w);
        let em = eta(model, x, x - w);
        if w < 1e-3 * scale {
            // second-order Taylor; the odd terms cancel up to the kernel asymmetry
            -p1 * (ep - em) * w - 0.5 * p2 * (ep + em) * w * w
        } else {
            ep * (p0 - phi(x + w)[0]) + em * (p0 - phi(x - w)[0])
        }
    };
    let tol = 1e-13;
    // (0, w0] with w = s^{1/(2-γ)}, which makes the integrand bounded
    let w0 = 0.25 * scale;
    let q = 1.0 / (2.0 - g);
    let s0 = w0.powf(2.0 - g);
    let near = quadrature::adaptive(
        |s| {
            if s <= 0.0 {
                return -(p2 * eta0) * q;
            }
            let w = s.powf(q);
            bracket(w) * w.powf(-1.0 - g) * q * s.powf(q - 1.0)
        },
        0.0,
        s0,
        tol,
        tol,
    )
    .value;
    let w1 = reach.max(2.0 * w0);
    let pieces = ((w1 - w0) / scale).ceil().max(1.0) as usize;
    let breaks: Vec<f64> = (0..=pieces)
        .map(|k| w0 + (w1 - w0) * k as f64 / pieces as f64)
        .collect();
    let mid = quadrature::adaptive_pieces(|w| bracket(w) * w.powf(-1.0 - g), &breaks, tol, tol)
        .value;
    // [w1, ∞): only φ(x) survives; w = t^{-1/γ}
    let t1 = w1.powf(-g);
    let far = quadrature::adaptive(
        |t| {
            if t <= 0.0 {
                return 0.0;
            }
            let w = t.powf(-1.0 / g);
            (eta(model, x, x + w) + eta(model, x, x - w)) * p0 / g
        },
        0.0,
        t1,
        tol,
        tol,
    )
    .value;
    (near + mid + far) / (1.0 - model.beta())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    fn model(alpha: f64, beta: f64, delta: f64) -> Model {
        Model::new(ModelParams {
            alpha,
            beta,
            nu0_delta: delta,
            ..ModelParams::default()
        })
        .unwrap()
    }

    #[test]
    fn eta_constant_case_and_symmetry() {
        let m = model(1.0, 0.0, 0.0);
        assert!((eta(&m, 0.3, 7.0) - 1.0).abs() < 1e-14);
        let m = model(1.5, 0.0, 0.4);
        let (lo, hi) = eta_bounds(&m);
        for k in 0..50 {
            let x = 0.37 * k as f64;
            let y = 19.0 - 0.81 * k as f64;
            let a = eta(&m, x, y);
            assert!((a - eta(&m, y, x)).abs() < 1e-12 * a);
            assert!(a >= lo && a <= hi);
        }
    }

    #[test]
    fn c_gamma_matches_gamma_one() {
        assert!((c_gamma(1.0).unwrap() - PI).abs() < 1e-10);
        assert!(c_gamma(2.0).is_err());
    }

    #[test]
    fn assembly_invariants() {
        for delta in [0.0, 0.3] {
            let m = model(1.5, 0.0, delta);
            let op = assemble(&m, Grid1d::new(64, 20.0), 2).unwrap();
            let a = &op.matrix;
            for i in 0..64 {
                let s: f64 = (0..64).map(|j| a[(i, j)]).sum();
                assert!(s.abs() < 1e-10, "row {i} sums to {s}");
            }
            assert!((a - a.transpose()).amax() < 1e-10);
            assert!(op.max_offdiag <= 0.0);
        }
        let m = model(1.5, 0.0, 0.0);
        assert!(assemble(&m, Grid1d::new(8, 20.0), 2).is_err());
        assert!(assemble(&m, Grid1d::new(32, 20.0), 0).is_err());
    }

    #[test]
    fn fourier_reference_identity_at_zero_time() {
        let m = model(1.5, 0.0, 0.0);
        let grid = Grid1d::new(32, 20.0);
        let rho = DensityField {
            grid,
            values: (0..32).map(|i| (i as f64 * 0.3).sin() + 2.0).collect(),
            time: 0.0,
            provenance: Provenance::Macro,
        };
        let r = fourier_reference(&m, &rho, 0.0).unwrap();
        for (a, b) in r.values.iter().zip(&rho.values) {
            assert!((a - b).abs() < 1e-14);
        }
        let r = fourier_reference(&m, &rho, 0.7).unwrap();
        assert!((r.mass() - rho.mass()).abs() < 1e-12);
        assert!(fourier_reference(&model(1.5, 0.0, 0.2), &rho, 0.1).is_err());
    }
}
