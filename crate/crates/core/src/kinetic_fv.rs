//! Deterministic finite-volume solver for the scaled kinetic equation on the torus
//! `[0, L)` times a compactified velocity line.
//!
//! Velocities live on `u ∈ (-U, U)`, `v = u/(1 - |u|)`, with `nv` (odd) cell-centred
//! nodes. Interior cells carry their exact `v`-length as quadrature weight; the two
//! outer cells carry the midpoint Jacobian weight and absorb the whole tail of `F`
//! beyond them, so `Σ w_j F_j = 1` holds exactly. The collision operator is rank
//! one, `Q(f) = ν₀(x)[p(v) m_β(f) − ⌈v⌋^β f]`, and is stepped implicitly in closed
//! form. Transport is upwind or limited MUSCL, combined with the collision step by
//! Strang splitting `C(dt/2) T(dt) C(dt/2)`.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{DensityField, Grid1d, InitialProfile, Provenance};
use crate::error::{Error, Result};
use crate::model::{bracket_pow, Model};

/// Discrete velocity grid together with the discrete equilibrium and
/// post-collision law.
#[derive(Debug, Clone, Serialize)]
pub struct VelocityGrid {
    pub nv: usize,
    pub vmax: f64,
    pub u_max: f64,
    pub v: Vec<f64>,
    /// Quadrature weights in `v` (cell lengths, Jacobian included).
    pub w: Vec<f64>,
    /// Cell-averaged equilibrium `F_j`.
    pub f_eq: Vec<f64>,
    /// `⌈v_j⌋^β`.
    pub bracket: Vec<f64>,
    /// Discrete post-collision law `⌈v_j⌋^β F_j / c_β^h`, with `Σ w_j p_j = 1`.
    pub post: Vec<f64>,
    /// Discrete `c_β^h = Σ w_j ⌈v_j⌋^β F_j`.
    pub c_beta: f64,
    /// Mass of `F` beyond `|v| = vmax`, which is transported at the outer speeds.
    pub tail_mass: f64,
}

impl VelocityGrid {
    pub fn new(model: &Model, nv: usize, vmax: f64) -> Result<Self> {
        if nv < 5 || nv % 2 == 0 {
            return Err(Error::Config(format!("nv must be odd and at least 5 (nv = {nv})")));
        }
        if !(vmax > 1.0 && vmax.is_finite()) {
            return Err(Error::Config(format!("vmax must exceed 1 (vmax = {vmax})")));
        }
        let u_max = vmax / (1.0 + vmax);
        let du = 2.0 * u_max / nv as f64;
        let to_v = |u: f64| u / (1.0 - u.abs());
        let eq = model.equilibrium();
        let mut v = Vec::with_capacity(nv);
        let mut w = Vec::with_capacity(nv);
        let mut f_eq = Vec::with_capacity(nv);
        for j in 0..nv {
            let ul = -u_max + j as f64 * du;
            let ur = ul + du;
            let uc = if j == nv / 2 { 0.0 } else { 0.5 * (ul + ur) };
            let vc = to_v(uc);
            let (mass, weight) = if j == 0 {
                (eq.cdf(to_v(ur)), du / (1.0 - uc.abs()).powi(2))
            } else if j == nv - 1 {
                (1.0 - eq.cdf(to_v(ul)), du / (1.0 - uc.abs()).powi(2))
            } else {
                let (vl, vr) = (to_v(ul), to_v(ur));
                (cdf_diff(&eq, vl, vr), vr - vl)
            };
            v.push(vc);
            w.push(weight);
            f_eq.push(mass / weight);
        }
        let beta = model.beta();
        let bracket: Vec<f64> = v.iter().map(|&x| bracket_pow(x, beta)).collect();
        let c_beta: f64 = (0..nv).map(|j| w[j] * bracket[j] * f_eq[j]).sum();
        let post = (0..nv).map(|j| bracket[j] * f_eq[j] / c_beta).collect();
        let tail_mass = 2.0 * model.kappa() * vmax.powf(-model.alpha()) / model.alpha();
        Ok(VelocityGrid {
            nv,
            vmax,
            u_max,
            v,
            w,
            f_eq,
            bracket,
            post,
            c_beta,
            tail_mass,
        })
    }
}

/// `F((a, b])`, computed on the side of the line where the CDF does not cancel.
fn cdf_diff(eq: &crate::model::PiecewisePowerLaw, a: f64, b: f64) -> f64 {
    if a >= 1.0 {
        let t = eq.tail_mass();
        t * (a.powf(-eq.tail_exp) - b.powf(-eq.tail_exp))
    } else if b <= -1.0 {
        let t = eq.tail_mass();
        t * ((-b).powf(-eq.tail_exp) - (-a).powf(-eq.tail_exp))
    } else {
        eq.cdf(b) - eq.cdf(a)
    }
}

/// Distribution function on the phase-space grid, stored row-major with one row
/// of `nv` velocities per spatial cell: `values[i * nv + j] = f(x_i, v_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    pub nx: usize,
    pub nv: usize,
    pub length: f64,
    pub time: f64,
    pub values: Vec<f64>,
}

impl PhaseField {
    pub fn grid(&self) -> Grid1d {
        Grid1d::new(self.nx, self.length)
    }

    #[inline]
    pub fn column(&self, i: usize) -> &[f64] {
        &self.values[i * self.nv..(i + 1) * self.nv]
    }

    /// Writes the flat binary dump: little-endian `u64 nx, u64 nv, f64 L, f64 t`,
    /// then `nx * nv` little-endian `f64` values in row-major order.
    pub fn write_binary(&self, mut out: impl Write) -> std::io::Result<()> {
        out.write_all(&(self.nx as u64).to_le_bytes())?;
        out.write_all(&(self.nv as u64).to_le_bytes())?;
        out.write_all(&self.length.to_le_bytes())?;
        out.write_all(&self.time.to_le_bytes())?;
        let mut buf = Vec::with_capacity(8 * self.values.len());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)
    }

    pub fn read_binary(mut input: impl Read) -> Result<PhaseField> {
        let mut word = [0u8; 8];
        let mut next = |input: &mut dyn Read| -> Result<[u8; 8]> {
            input
                .read_exact(&mut word)
                .map_err(|e| Error::Input(format!("truncated phase-field dump: {e}")))?;
            Ok(word)
        };
        let nx = u64::from_le_bytes(next(&mut input)?) as usize;
        let nv = u64::from_le_bytes(next(&mut input)?) as usize;
        let length = f64::from_le_bytes(next(&mut input)?);
        let time = f64::from_le_bytes(next(&mut input)?);
        let count = nx
            .checked_mul(nv)
            .ok_or_else(|| Error::Input("phase-field header overflows".into()))?;
        let mut bytes = vec![0u8; 8 * count];
        input
            .read_exact(&mut bytes)
            .map_err(|e| Error::Input(format!("truncated phase-field dump: {e}")))?;
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(PhaseField {
            nx,
            nv,
            length,
            time,
            values,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_binary(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<PhaseField> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        PhaseField::read_binary(std::io::BufReader::new(file))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Upwind,
    /// Single-stage MUSCL with the van Leer limiter.
    Muscl,
}

/// Rule for the velocity cut-off `V_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VmaxPolicy {
    /// Smallest `V` with `V ≥ ε^{-1/(1-β)}` and tail loss `2κV^{-α}/α` under `tail_tol`.
    Critical { tail_tol: f64 },
    /// As `Critical`, and additionally large enough that a single flight of mean
    /// duration spans the whole torus: `V^{1-β} ≥ L/ε`.
    Domain { tail_tol: f64 },
    Fixed { vmax: f64 },
}

impl Default for VmaxPolicy {
    fn default() -> Self {
        VmaxPolicy::Domain { tail_tol: 1e-3 }
    }
}

impl VmaxPolicy {
    pub fn resolve(&self, model: &Model, eps: f64) -> f64 {
        let (alpha, beta, kappa) = (model.alpha(), model.beta(), model.kappa());
        let critical = eps.powf(-1.0 / (1.0 - beta));
        let tail = |tol: f64| (2.0 * kappa / (alpha * tol)).powf(1.0 / alpha);
        match *self {
            VmaxPolicy::Critical { tail_tol } => critical.max(tail(tail_tol)).max(2.0),
            VmaxPolicy::Domain { tail_tol } => {
                let domain = (model.domain_length() / eps).powf(1.0 / (1.0 - beta));
                critical.max(domain).max(tail(tail_tol)).max(2.0)
            }
            VmaxPolicy::Fixed { vmax } => vmax,
        }
    }
}

/// Solver state that does not change during a run.
#[derive(Debug, Clone)]
pub struct KineticFv {
    pub model: Model,
    pub grid: Grid1d,
    pub vgrid: VelocityGrid,
    pub scheme: Scheme,
    nu0: Vec<f64>,
}

impl KineticFv {
    pub fn new(model: Model, nx: usize, nv: usize, vmax: f64, scheme: Scheme) -> Result<Self> {
        if nx < 4 {
            return Err(Error::Config(format!("nx must be at least 4 (nx = {nx})")));
        }
        let grid = Grid1d::new(nx, model.domain_length());
        let vgrid = VelocityGrid::new(&model, nv, vmax)?;
        let nu0 = grid.nodes().iter().map(|&x| model.nu0(x)).collect();
        Ok(KineticFv {
            model,
            grid,
            vgrid,
            scheme,
            nu0,
        })
    }

    /// `f₀ = ρ₀(x) F(v)` with `ρ₀` cell-averaged.
    pub fn initial_field(&self, profile: &InitialProfile) -> Result<PhaseField> {
        profile.validate(self.grid.length)?;
        let rho = profile.discretize(&self.grid);
        let nv = self.vgrid.nv;
        let mut values = vec![0.0; self.grid.nx * nv];
        for (i, col) in values.chunks_mut(nv).enumerate() {
            for (j, f) in col.iter_mut().enumerate() {
                *f = rho[i] * self.vgrid.f_eq[j];
            }
        }
        Ok(PhaseField {
            nx: self.grid.nx,
            nv,
            length: self.grid.length,
            time: 0.0,
            values,
        })
    }

    fn check_shape(&self, field: &PhaseField) -> Result<()> {
        if field.nx != self.grid.nx || field.nv != self.vgrid.nv {
            return Err(Error::Precondition(format!(
                "phase field is {}x{}, solver grid is {}x{}",
                field.nx, field.nv, self.grid.nx, self.vgrid.nv
            )));
        }
        Ok(())
    }

    /// Transport speeds `ε^{1-γ}(v_j − j^ε_F)`.
    pub fn speeds(&self, eps: f64) -> Vec<f64> {
        let scale = eps.powf(1.0 - self.model.gamma);
        let drift = self.model.drift(eps);
        self.vgrid.v.iter().map(|&v| scale * (v - drift)).collect()
    }

    /// Largest transport step allowed by the CFL condition.
    pub fn max_dt(&self, eps: f64) -> f64 {
        let smax = self.speeds(eps).iter().fold(0.0f64, |m, s| m.max(s.abs()));
        self.grid.dx() / smax
    }

    /// Backward-Euler collision step of length `dt` (macroscopic time), exact for the
    /// rank-one gain: per column,
    /// `f_j ← (f_j + τ p_j m)/(1 + τ b_j)` with `τ = dt ν₀/ε^γ` and
    /// `m = Σ w b f/(1+τb) / Σ w p/(1+τb)` the post-step `m_β`.
    pub fn collision_apply(&self, field: &mut PhaseField, dt: f64, eps: f64) -> Result<()> {
        self.check_shape(field)?;
        if !(dt > 0.0) {
            return Err(Error::Precondition(format!("collision dt must be positive ({dt})")));
        }
        let vg = &self.vgrid;
        let rate = eps.powf(-self.model.gamma);
        field
            .values
            .par_chunks_mut(vg.nv)
            .zip(self.nu0.par_iter())
            .for_each(|(col, &nu0)| {
                let tau = dt * nu0 * rate;
                let mut s1 = 0.0;
                let mut s2 = 0.0;
                for j in 0..vg.nv {
                    let d = 1.0 / (1.0 + tau * vg.bracket[j]);
                    s1 += vg.w[j] * vg.bracket[j] * col[j] * d;
                    s2 += vg.w[j] * vg.post[j] * d;
                }
                let m = s1 / s2;
                for j in 0..vg.nv {
                    col[j] = (col[j] + tau * vg.post[j] * m) / (1.0 + tau * vg.bracket[j]);
                }
            });
        Ok(())
    }

    /// Periodic transport over `dt` at speeds `ε^{1-γ}(v_j − j^ε_F)`.
    pub fn transport_apply(&self, field: &mut PhaseField, dt: f64, eps: f64) -> Result<()> {
        self.check_shape(field)?;
        let max_dt = self.max_dt(eps);
        if dt > max_dt * (1.0 + 1e-12) {
            return Err(Error::Cfl { dt, max_dt });
        }
        let (nx, nv) = (self.grid.nx, self.vgrid.nv);
        let dx = self.grid.dx();
        let speeds = self.speeds(eps);
        let scheme = self.scheme;
        let values = &field.values;
        let rows: Vec<Vec<f64>> = (0..nv)
            .into_par_iter()
            .map(|j| {
                let mut row: Vec<f64> = (0..nx).map(|i| values[i * nv + j]).collect();
                advect_row(&mut row, speeds[j] * dt / dx, scheme);
                row
            })
            .collect();
        field
            .values
            .par_chunks_mut(nv)
            .enumerate()
            .for_each(|(i, col)| {
                for (j, f) in col.iter_mut().enumerate() {
                    *f = rows[j][i];
                }
            });
        Ok(())
    }

    /// One Strang step `C(dt/2) T(dt) C(dt/2)`.
    pub fn step(&self, field: &mut PhaseField, dt: f64, eps: f64) -> Result<()> {
        self.collision_apply(field, 0.5 * dt, eps)?;
        self.transport_apply(field, dt, eps)?;
        self.collision_apply(field, 0.5 * dt, eps)?;
        field.time += dt;
        Ok(())
    }

    /// `ρ_i = Σ_j w_j f_ij`.
    pub fn density(&self, field: &PhaseField) -> DensityField {
        let w = &self.vgrid.w;
        let values = field
            .values
            .par_chunks(field.nv)
            .map(|col| col.iter().zip(w).map(|(f, w)| f * w).sum())
            .collect();
        DensityField {
            grid: self.grid,
            values,
            time: field.time,
            provenance: Provenance::KineticMarginal,
        }
    }

    /// Discrete `‖f‖²_{L²_{F⁻¹}}`.
    pub fn weighted_norm2(&self, field: &PhaseField) -> f64 {
        let vg = &self.vgrid;
        let dx = self.grid.dx();
        field
            .values
            .par_chunks(field.nv)
            .map(|col| {
                (0..vg.nv)
                    .map(|j| vg.w[j] * col[j] * col[j] / vg.f_eq[j])
                    .sum::<f64>()
            })
            .sum::<f64>()
            * dx
    }

    /// Discrete `‖f − ρF‖²_{L²_{νF⁻¹}}`.
    pub fn gnorm2(&self, field: &PhaseField) -> f64 {
        let vg = &self.vgrid;
        let dx = self.grid.dx();
        field
            .values
            .par_chunks(field.nv)
            .zip(self.nu0.par_iter())
            .map(|(col, &nu0)| {
                let rho: f64 = col.iter().zip(&vg.w).map(|(f, w)| f * w).sum();
                let s: f64 = (0..vg.nv)
                    .map(|j| {
                        let g = col[j] - rho * vg.f_eq[j];
                        vg.w[j] * g * g * vg.bracket[j] / vg.f_eq[j]
                    })
                    .sum();
                nu0 * s
            })
            .sum::<f64>()
            * dx
    }

    /// `m_β(g)(x_i) = Σ_j w_j ⌈v_j⌋^β (f_ij − ρ_i F_j)`.
    pub fn g_moment(&self, field: &PhaseField) -> Vec<f64> {
        let vg = &self.vgrid;
        field
            .values
            .par_chunks(field.nv)
            .map(|col| {
                let rho: f64 = col.iter().zip(&vg.w).map(|(f, w)| f * w).sum();
                (0..vg.nv)
                    .map(|j| vg.w[j] * vg.bracket[j] * (col[j] - rho * vg.f_eq[j]))
                    .sum()
            })
            .collect()
    }

    pub fn mass(&self, field: &PhaseField) -> f64 {
        self.density(field).mass()
    }
}

fn van_leer(a: f64, b: f64) -> f64 {
    if a * b > 0.0 {
        2.0 * a * b / (a + b)
    } else {
        0.0
    }
}

/// Advects one periodic row by Courant number `c` (`|c| ≤ 1`).
fn advect_row(row: &mut [f64], c: f64, scheme: Scheme) {
    if c == 0.0 {
        return;
    }
    if c < 0.0 {
        row.reverse();
        advect_row(row, -c, scheme);
        row.reverse();
        return;
    }
    let n = row.len();
    // flux[i] crosses the face between cells i and i+1
    let flux: Vec<f64> = match scheme {
        Scheme::Upwind => row.iter().map(|&f| c * f).collect(),
        Scheme::Muscl => (0..n)
            .map(|i| {
                let fm = row[(i + n - 1) % n];
                let f0 = row[i];
                let fp = row[(i + 1) % n];
                let slope = van_leer(f0 - fm, fp - f0);
                c * (f0 + 0.5 * (1.0 - c) * slope)
            })
            .collect(),
    };
    for i in 0..n {
        row[i] -= flux[i] - flux[(i + n - 1) % n];
    }
}

/// Settings for [`run_kinetic_det`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetConfig {
    pub nx: usize,
    pub nv: usize,
    pub vmax: VmaxPolicy,
    pub scheme: Scheme,
    /// Courant number of the transport step.
    pub cfl: f64,
    pub t_final: f64,
    /// Times at which ρ^ε and the g-norm are recorded (`t_final` is always added).
    pub snapshot_times: Vec<f64>,
    /// Keep full phase-space fields at the snapshot times.
    pub keep_fields: bool,
    /// Record `m_β(g^ε)` every this many steps (0 disables).
    pub moment_stride: usize,
}

impl Default for DetConfig {
    fn default() -> Self {
        DetConfig {
            nx: 256,
            nv: 257,
            vmax: VmaxPolicy::default(),
            scheme: Scheme::Muscl,
            cfl: 0.9,
            t_final: 0.5,
            snapshot_times: vec![],
            keep_fields: false,
            moment_stride: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DetSnapshot {
    pub time: f64,
    pub rho: DensityField,
    pub gnorm2: f64,
    pub fnorm2: f64,
    #[serde(skip)]
    pub field: Option<PhaseField>,
}

/// Output of a deterministic run.
#[derive(Debug, Clone, Serialize)]
pub struct DetRun {
    pub eps: f64,
    pub vmax: f64,
    pub dt: f64,
    pub steps: usize,
    /// `‖f₀‖²_{L²_{F⁻¹}}`.
    pub f0_norm2: f64,
    /// `M‖f₀‖²ε^γ`.
    pub gnorm_bound: f64,
    pub initial_mass: f64,
    pub final_mass: f64,
    pub min_value: f64,
    /// `(t, ‖g‖²)` after every step, starting at `t = 0`.
    pub gnorm_series: Vec<(f64, f64)>,
    /// `∫₀^T ‖g‖² dt` (trapezoid rule on the step grid).
    pub gnorm_time_integral: f64,
    pub snapshots: Vec<DetSnapshot>,
    /// `(t, m_β(g)(x_i))` samples.
    #[serde(skip)]
    pub moments: Vec<(f64, Vec<f64>)>,
    /// Velocity grid of the run, needed to take moments of stored fields.
    #[serde(skip)]
    pub velocity: Option<VelocityGrid>,
    pub warnings: Vec<String>,
}

impl DetRun {
    pub fn final_density(&self) -> &DensityField {
        &self.snapshots.last().expect("at least one snapshot").rho
    }
}

/// Runs the deterministic solver from `f₀ = ρ₀F` to `t_final`.
pub fn run_kinetic_det(
    model: &Model,
    cfg: &DetConfig,
    profile: &InitialProfile,
    eps: f64,
) -> Result<DetRun> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Precondition(format!("eps must lie in (0, 1] ({eps})")));
    }
    if !(cfg.t_final > 0.0) {
        return Err(Error::Config(format!("t_final must be positive ({})", cfg.t_final)));
    }
    if !(cfg.cfl > 0.0 && cfg.cfl <= 1.0) {
        return Err(Error::Config(format!("cfl must lie in (0, 1] ({})", cfg.cfl)));
    }
    let vmax = cfg.vmax.resolve(model, eps);
    let solver = KineticFv::new(model.clone(), cfg.nx, cfg.nv, vmax, cfg.scheme)?;
    let mut warnings = Vec::new();
    let critical = eps.powf(-1.0 / (1.0 - model.beta()));
    if vmax < critical {
        warnings.push(format!(
            "vmax = {vmax} is below the critical scale {critical}; tail mass {:.3e} is \
             transported at the cut-off speed",
            solver.vgrid.tail_mass
        ));
    }
    let mut times: Vec<f64> = cfg
        .snapshot_times
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t < cfg.t_final)
        .collect();
    times.push(cfg.t_final);
    times.sort_by(f64::total_cmp);
    times.dedup();

    let mut field = solver.initial_field(profile)?;
    let f0_norm2 = solver.weighted_norm2(&field);
    let initial_mass = solver.mass(&field);
    let dt_max = cfg.cfl * solver.max_dt(eps);
    let mut gnorm_series = vec![(0.0, solver.gnorm2(&field))];
    let mut moments = Vec::new();
    if cfg.moment_stride > 0 {
        moments.push((0.0, solver.g_moment(&field)));
    }
    let mut snapshots = Vec::with_capacity(times.len() + 1);
    if cfg.snapshot_times.contains(&0.0) {
        snapshots.push(DetSnapshot {
            time: 0.0,
            rho: solver.density(&field),
            gnorm2: solver.gnorm2(&field),
            fnorm2: f0_norm2,
            field: cfg.keep_fields.then(|| field.clone()),
        });
    }
    let mut steps = 0usize;
    let mut t0 = 0.0;
    let mut dt_used = 0.0f64;
    for &t1 in &times {
        let n = ((t1 - t0) / dt_max).ceil().max(1.0) as usize;
        let dt = (t1 - t0) / n as f64;
        dt_used = dt_used.max(dt);
        for k in 0..n {
            solver.step(&mut field, dt, eps)?;
            // pin the clock to the interval grid to avoid drift from summation
            field.time = t0 + (k + 1) as f64 * dt;
            steps += 1;
            gnorm_series.push((field.time, solver.gnorm2(&field)));
            if cfg.moment_stride > 0 && steps % cfg.moment_stride == 0 {
                moments.push((field.time, solver.g_moment(&field)));
            }
        }
        field.time = t1;
        if field.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite values at t = {t1}")));
        }
        snapshots.push(DetSnapshot {
            time: t1,
            rho: solver.density(&field),
            gnorm2: solver.gnorm2(&field),
            fnorm2: solver.weighted_norm2(&field),
            field: cfg.keep_fields.then(|| field.clone()),
        });
        t0 = t1;
    }
    let gnorm_time_integral = gnorm_series
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum();
    let min_value = field.values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(DetRun {
        eps,
        vmax,
        dt: dt_used,
        steps,
        f0_norm2,
        gnorm_bound: model.coercivity * f0_norm2 * eps.powf(model.gamma),
        initial_mass,
        final_mass: solver.mass(&field),
        min_value,
        gnorm_series,
        gnorm_time_integral,
        snapshots,
        moments,
        velocity: Some(solver.vgrid.clone()),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    fn solver(nx: usize, nv: usize, scheme: Scheme) -> KineticFv {
        let m = Model::new(ModelParams::default()).unwrap();
        KineticFv::new(m, nx, nv, 40.0, scheme).unwrap()
    }

    fn gaussian() -> InitialProfile {
        InitialProfile::Gaussian {
            center: 10.0,
            width: 1.0,
        }
    }

    #[test]
    fn velocity_grid_is_calibrated() {
        let s = solver(16, 129, Scheme::Upwind);
        let vg = &s.vgrid;
        let mass: f64 = vg.w.iter().zip(&vg.f_eq).map(|(w, f)| w * f).sum();
        assert!((mass - 1.0).abs() < 1e-13);
        let post: f64 = vg.w.iter().zip(&vg.post).map(|(w, p)| w * p).sum();
        assert!((post - 1.0).abs() < 1e-13);
        assert_eq!(vg.v[64], 0.0);
        assert!(vg.v.windows(2).all(|p| p[1] > p[0]));
        assert!(VelocityGrid::new(&s.model, 128, 40.0).is_err());
    }

    #[test]
    fn equilibrium_is_fixed_by_collisions() {
        let s = solver(8, 65, Scheme::Upwind);
        let mut f = s.initial_field(&InitialProfile::Uniform).unwrap();
        let f0 = f.clone();
        s.collision_apply(&mut f, 0.3, 0.1).unwrap();
        for (a, b) in f.values.iter().zip(&f0.values) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300), "{a} vs {b}");
        }
    }

    #[test]
    fn collision_preserves_column_mass_and_positivity() {
        let s = solver(4, 65, Scheme::Upwind);
        let mut f = s.initial_field(&InitialProfile::Uniform).unwrap();
        for (k, x) in f.values.iter_mut().enumerate() {
            *x = ((k * 7919) % 13) as f64 * 0.1;
        }
        let before = s.density(&f);
        s.collision_apply(&mut f, 0.05, 0.2).unwrap();
        let after = s.density(&f);
        for (a, b) in before.values.iter().zip(&after.values) {
            assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
        }
        assert!(f.values.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn transport_checks_cfl_and_conserves_mass() {
        let s = solver(64, 33, Scheme::Muscl);
        let mut f = s.initial_field(&gaussian()).unwrap();
        let dtmax = s.max_dt(0.3);
        match s.transport_apply(&mut f, 1.5 * dtmax, 0.3) {
            Err(Error::Cfl { max_dt, .. }) => assert!((max_dt - dtmax).abs() < 1e-15),
            other => panic!("expected CFL error, got {other:?}"),
        }
        let m0 = s.mass(&f);
        for _ in 0..50 {
            s.transport_apply(&mut f, dtmax, 0.3).unwrap();
        }
        assert!((s.mass(&f) - m0).abs() < 1e-13);
        assert!(f.values.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn full_period_translation() {
        // c = 0.5 exactly divides the period into 2 nx steps
        let n = 256;
        let h = 20.0 / n as f64;
        let x0: Vec<f64> = (0..n)
            .map(|i| {
                let x = (i as f64 + 0.5) * h - 10.0;
                (-x * x / 2.0).exp()
            })
            .collect();
        for (scheme, tol) in [(Scheme::Muscl, 0.05), (Scheme::Upwind, 1.0)] {
            let mut row = x0.clone();
            for _ in 0..2 * n {
                advect_row(&mut row, 0.5, scheme);
            }
            let l1: f64 = row.iter().zip(&x0).map(|(a, b)| (a - b).abs()).sum::<f64>()
                / x0.iter().sum::<f64>();
            assert!(l1 < tol, "{scheme:?}: {l1}");
        }
        let mut row = x0.clone();
        advect_row(&mut row, 0.0, Scheme::Muscl);
        assert_eq!(row, x0);
    }

    #[test]
    fn binary_dump_round_trips() {
        let s = solver(8, 17, Scheme::Upwind);
        let mut f = s.initial_field(&gaussian()).unwrap();
        f.time = 0.125;
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 32 + 8 * 8 * 17);
        let g = PhaseField::read_binary(buf.as_slice()).unwrap();
        assert_eq!(f, g);
        assert!(PhaseField::read_binary(&buf[..40]).is_err());
    }

    #[test]
    fn short_run_diagnostics() {
        let m = Model::new(ModelParams::default()).unwrap();
        let cfg = DetConfig {
            nx: 64,
            nv: 65,
            t_final: 0.05,
            snapshot_times: vec![0.02],
            ..DetConfig::default()
        };
        let run = run_kinetic_det(&m, &cfg, &gaussian(), 0.4).unwrap();
        assert!(run.gnorm_series[0].1 < 1e-28);
        assert_eq!(run.snapshots.len(), 2);
        assert!((run.snapshots[0].time - 0.02).abs() < 1e-15);
        assert!((run.final_mass - run.initial_mass).abs() < 1e-12);
        assert!(run.min_value >= 0.0);
        assert!(run.gnorm_series.iter().all(|&(_, g)| g <= run.gnorm_bound));
    }
}
