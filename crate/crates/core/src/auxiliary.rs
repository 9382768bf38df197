//! The corrector `χ^ε`, solution of `ν₀χ − c ∂ₓχ = ν₀φ` with `c = ε⌈v⌋^{-β}v`:
//!
//! `χ^ε(t, x, v) = ∫₀^∞ ν₀(x + cz) e^{-U(z)} φ(t, x + cz) dz`, `U(z) = ∫₀^z ν₀(x + cs) ds`.
//!
//! With the hazard substitution `u = U(z)` the weight becomes `e^{-u}` and the
//! integral is evaluated by Gauss–Laguerre. When a flight is long compared with
//! the scale on which φ varies the Laguerre nodes can no longer resolve
//! `φ(x + cz)`, and the integral is taken adaptively in `z` instead.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetic_fv::DetRun;
use crate::model::{bracket_pow, Model};
use crate::quadrature::{self, gauss_laguerre, gauss_legendre, GaussRule};

/// Hazard level beyond which the remaining weight `e^{-u}` is below 1e-20.
const HAZARD_CUTOFF: f64 = 46.0;

/// Spatial factor of a test function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpatialProfile {
    Gaussian { center: f64, width: f64 },
    /// `cos(ξ(x − center)) exp(−(x − center)²/(2 width²))`.
    PlaneWave { center: f64, width: f64, xi: f64 },
    Cosine { xi: f64 },
    Constant { value: f64 },
    Affine { slope: f64, offset: f64 },
}

impl SpatialProfile {
    /// `(φ, φ', φ'')` at `x`.
    pub fn eval(&self, x: f64) -> [f64; 3] {
        match *self {
            SpatialProfile::Gaussian { center, width } => {
                let y = (x - center) / width;
                let g = (-0.5 * y * y).exp();
                [g, -y / width * g, (y * y - 1.0) / (width * width) * g]
            }
            SpatialProfile::PlaneWave { center, width, xi } => {
                let d = x - center;
                let y = d / width;
                let g = (-0.5 * y * y).exp();
                let g1 = -y / width * g;
                let g2 = (y * y - 1.0) / (width * width) * g;
                let (s, c) = (xi * d).sin_cos();
                [
                    c * g,
                    -xi * s * g + c * g1,
                    -xi * xi * c * g - 2.0 * xi * s * g1 + c * g2,
                ]
            }
            SpatialProfile::Cosine { xi } => {
                let (s, c) = (xi * x).sin_cos();
                [c, -xi * s, -xi * xi * c]
            }
            SpatialProfile::Constant { value } => [value, 0.0, 0.0],
            SpatialProfile::Affine { slope, offset } => [slope * x + offset, slope, 0.0],
        }
    }

    /// Length over which the profile changes appreciably.
    pub fn scale(&self) -> f64 {
        match *self {
            SpatialProfile::Gaussian { width, .. } => width,
            SpatialProfile::PlaneWave { width, xi, .. } => width.min(1.0 / xi.abs().max(1e-300)),
            SpatialProfile::Cosine { xi } => 1.0 / xi.abs().max(1e-300),
            SpatialProfile::Constant { .. } | SpatialProfile::Affine { .. } => f64::INFINITY,
        }
    }

    /// Interval outside which the profile is below 1e-20 of its peak.
    pub fn window(&self) -> Option<(f64, f64)> {
        match *self {
            SpatialProfile::Gaussian { center, width }
            | SpatialProfile::PlaneWave { center, width, .. } => {
                let r = 9.6 * width;
                Some((center - r, center + r))
            }
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            SpatialProfile::Gaussian { center, width } => center.is_finite() && width > 0.0,
            SpatialProfile::PlaneWave { center, width, xi } => {
                center.is_finite() && width > 0.0 && xi.is_finite()
            }
            SpatialProfile::Cosine { xi } => xi.is_finite(),
            SpatialProfile::Constant { value } => value.is_finite(),
            SpatialProfile::Affine { slope, offset } => slope.is_finite() && offset.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid test-function profile {self:?}")))
        }
    }
}

/// Temporal factor `ψ(t)` of a test function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeEnvelope {
    Constant,
    /// `cos²(πt/(2T))` on `[0, T]`, zero afterwards (C¹ at `T`).
    Bump { t_end: f64 },
}

impl TimeEnvelope {
    /// `(ψ, ψ')`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        match *self {
            TimeEnvelope::Constant => (1.0, 0.0),
            TimeEnvelope::Bump { t_end } => {
                if t < 0.0 || t >= t_end {
                    (0.0, 0.0)
                } else {
                    let a = PI * t / (2.0 * t_end);
                    let (s, c) = a.sin_cos();
                    (c * c, -PI / t_end * s * c)
                }
            }
        }
    }

    pub fn support_end(&self) -> Option<f64> {
        match *self {
            TimeEnvelope::Constant => None,
            TimeEnvelope::Bump { t_end } => Some(t_end),
        }
    }
}

/// Separable test function `φ(t, x) = ψ(t) g(x)`, optionally periodized over a
/// torus of the given length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub spatial: SpatialProfile,
    pub envelope: TimeEnvelope,
    pub period: Option<f64>,
}

impl TestFunction {
    /// Builds the function and checks its analytic derivatives against finite
    /// differences.
    pub fn new(
        spatial: SpatialProfile,
        envelope: TimeEnvelope,
        period: Option<f64>,
    ) -> Result<TestFunction> {
        spatial.validate()?;
        if let TimeEnvelope::Bump { t_end } = envelope {
            if !(t_end > 0.0 && t_end.is_finite()) {
                return Err(Error::Config(format!("bump envelope needs t_end > 0 ({t_end})")));
            }
        }
        if let Some(l) = period {
            if !(l > 0.0) {
                return Err(Error::Config(format!("period must be positive ({l})")));
            }
            if matches!(spatial, SpatialProfile::Affine { .. }) && spatial.eval(0.0)[1] != 0.0 {
                return Err(Error::Config("an affine profile cannot be periodized".into()));
            }
        }
        let f = TestFunction {
            spatial,
            envelope,
            period,
        };
        f.self_check()?;
        Ok(f)
    }

    fn self_check(&self) -> Result<()> {
        let scale = self.spatial.scale().min(1.0);
        let h = 1e-4 * scale;
        let centre = match self.spatial.window() {
            Some((a, b)) => 0.5 * (a + b),
            None => 0.0,
        };
        for k in -4..=4 {
            let x = centre + 0.37 * k as f64 * scale;
            let d = self.spatial_eval(x);
            let p = self.spatial_eval(x + h);
            let m = self.spatial_eval(x - h);
            let fd1 = (p[0] - m[0]) / (2.0 * h);
            let fd2 = (p[1] - m[1]) / (2.0 * h);
            let mag1 = d[0].abs() / scale + d[1].abs();
            let mag2 = d[1].abs() / scale + d[2].abs();
            if (fd1 - d[1]).abs() > 1e-6 * mag1.max(1e-300)
                || (fd2 - d[2]).abs() > 1e-6 * mag2.max(1e-300)
            {
                return Err(Error::Numeric(format!(
                    "test-function derivatives disagree with finite differences at x = {x}"
                )));
            }
        }
        Ok(())
    }

    /// `(g, g', g'')`, periodized when a period is set.
    pub fn spatial_eval(&self, x: f64) -> [f64; 3] {
        match (self.period, self.spatial.window()) {
            (Some(l), Some((a, b))) => {
                let lo = ((a - x) / l).floor() as i64;
                let hi = ((b - x) / l).ceil() as i64;
                let mut acc = [0.0; 3];
                for k in lo..=hi {
                    let v = self.spatial.eval(x + k as f64 * l);
                    acc[0] += v[0];
                    acc[1] += v[1];
                    acc[2] += v[2];
                }
                acc
            }
            _ => self.spatial.eval(x),
        }
    }

    pub fn phi(&self, t: f64, x: f64) -> f64 {
        self.envelope.eval(t).0 * self.spatial_eval(x)[0]
    }

    pub fn dphi_dt(&self, t: f64, x: f64) -> f64 {
        self.envelope.eval(t).1 * self.spatial_eval(x)[0]
    }

    pub fn dphi_dx(&self, t: f64, x: f64) -> f64 {
        self.envelope.eval(t).0 * self.spatial_eval(x)[1]
    }

    pub fn d2phi_dx2(&self, t: f64, x: f64) -> f64 {
        self.envelope.eval(t).0 * self.spatial_eval(x)[2]
    }

    /// Windows of `[lo, hi]` where the spatial factor is non-negligible, or `None`
    /// when it is not localized.
    fn windows(&self, lo: f64, hi: f64) -> Option<Vec<(f64, f64)>> {
        let (a, b) = self.spatial.window()?;
        let mut out = Vec::new();
        match self.period {
            None => {
                if b > lo && a < hi {
                    out.push((a.max(lo), b.min(hi)));
                }
            }
            Some(l) => {
                if b - a >= l {
                    return None;
                }
                let k0 = ((lo - b) / l).floor() as i64;
                let k1 = ((hi - a) / l).ceil() as i64;
                for k in k0..=k1 {
                    let (wa, wb) = (a + k as f64 * l, b + k as f64 * l);
                    if wb > lo && wa < hi {
                        out.push((wa.max(lo), wb.min(hi)));
                    }
                }
            }
        }
        Some(out)
    }
}

/// Which spatial factor the corrector is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Apply {
    Value,
    Gradient,
}

/// Corrector evaluator for one ε.
#[derive(Debug, Clone)]
pub struct CorrectorEval<'a> {
    pub model: &'a Model,
    pub phi: TestFunction,
    pub eps: f64,
    pub rule: GaussRule,
    /// Flights longer than this fraction of the profile scale use the adaptive path.
    pub long_flight: f64,
}

impl<'a> CorrectorEval<'a> {
    pub fn new(model: &'a Model, phi: TestFunction, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::Precondition(format!("eps must lie in (0, 1] ({eps})")));
        }
        Ok(CorrectorEval {
            model,
            phi,
            eps,
            rule: gauss_laguerre(64),
            long_flight: 0.25,
        })
    }

    /// Renormalized flight speed `c = ε⌈v⌋^{-β}v`.
    #[inline]
    pub fn speed(&self, v: f64) -> f64 {
        self.eps * bracket_pow(v, -self.model.beta()) * v
    }

    /// Solves `U(z) = u` for the flight from `x` at speed `c`.
    pub fn invert_hazard(&self, x: f64, c: f64, u: f64) -> Result<f64> {
        let m = self.model;
        if m.params.nu0_delta == 0.0 {
            return Ok(u / m.params.nu0_mean);
        }
        let (mut lo, mut hi) = (u / m.nu2, u / m.nu1);
        let mut z = u / m.params.nu0_mean;
        for _ in 0..100 {
            let r = m.nu0_line_integral(x, c, z) - u;
            if r.abs() <= 1e-15 * u.max(1.0) {
                return Ok(z);
            }
            if r > 0.0 {
                hi = z;
            } else {
                lo = z;
            }
            let mut next = z - r / m.nu0(x + c * z);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - z).abs() <= 1e-16 * z.abs() {
                return Ok(next);
            }
            z = next;
        }
        Err(Error::Numeric(format!(
            "hazard inversion did not converge (x = {x}, c = {c}, u = {u})"
        )))
    }

    /// Hazard-form nodes `(z_k, w_k)` with `Σ w_k h(z_k) ≈ ∫ P(z) h(z) dz`.
    pub fn hazard_nodes(&self, x: f64, c: f64) -> Result<Vec<(f64, f64)>> {
        self.rule
            .nodes
            .iter()
            .zip(&self.rule.weights)
            .map(|(&u, &w)| Ok((self.invert_hazard(x, c, u)?, w)))
            .collect()
    }

    /// `Σ_k w_k P(z_k)/(e^{-u_k} U'(z_k))`, which is 1 when the nodes are exact.
    pub fn weight_integral(&self, x: f64, v: f64) -> Result<f64> {
        let c = self.speed(v);
        let m = self.model;
        let mut s = 0.0;
        for (&u, &w) in self.rule.nodes.iter().zip(&self.rule.weights) {
            let z = self.invert_hazard(x, c, u)?;
            let p = m.nu0(x + c * z) * (-m.nu0_line_integral(x, c, z)).exp();
            s += w * p / ((-u).exp() * m.nu0(x + c * z));
        }
        Ok(s)
    }

    fn profile(&self, y: f64, which: Apply) -> f64 {
        let d = self.phi.spatial_eval(y);
        match which {
            Apply::Value => d[0],
            Apply::Gradient => d[1],
        }
    }

    /// `∫₀^∞ P(z) g(x + cz) dz` for the spatial factor (or its gradient).
    pub fn chi_profile(&self, x: f64, v: f64, which: Apply) -> Result<f64> {
        let c = self.speed(v);
        let m = self.model;
        let scale = self.phi.spatial.scale();
        let flight = c.abs() / m.nu1;
        if c == 0.0 {
            return Ok(self.profile(x, which));
        }
        if flight <= self.long_flight * scale {
            let mut s = 0.0;
            for (z, w) in self.hazard_nodes(x, c)? {
                s += w * self.profile(x + c * z, which);
            }
            return Ok(s);
        }
        // long flight: integrate in z over the stretch where the weight is alive
        let mut z_max = HAZARD_CUTOFF / m.nu1;
        let mut factor = 1.0;
        // When φ and ν₀ share the period L, the flight integral over consecutive
        // periods is geometric: the total is the first period over 1 − e^{-U(L/|c|)}.
        let shared = self.phi.period.filter(|&l| {
            m.params.nu0_delta == 0.0 || (l - m.domain_length()).abs() <= 1e-12 * l
        });
        if let Some(l) = shared {
            let z_period = l / c.abs();
            if z_period < z_max {
                z_max = z_period;
                factor = 1.0 / -(-m.nu0_line_integral(x, c, z_period)).exp_m1();
            }
        }
        let integrand = |z: f64| {
            m.nu0(x + c * z) * (-m.nu0_line_integral(x, c, z)).exp() * self.profile(x + c * z, which)
        };
        let (ylo, yhi) = if c > 0.0 {
            (x, x + c * z_max)
        } else {
            (x + c * z_max, x)
        };
        let to_z = |y: f64| ((y - x) / c).clamp(0.0, z_max);
        let tol = 1e-15;
        let value = match self.phi.windows(ylo, yhi) {
            Some(wins) => wins
                .iter()
                .map(|&(a, b)| {
                    let (za, zb) = {
                        let (p, q) = (to_z(a), to_z(b));
                        (p.min(q), p.max(q))
                    };
                    let pieces = (((zb - za) * c.abs() / scale).ceil() as usize).clamp(1, 64);
                    let breaks: Vec<f64> = (0..=pieces)
                        .map(|k| za + (zb - za) * k as f64 / pieces as f64)
                        .collect();
                    quadrature::adaptive_pieces(integrand, &breaks, tol, 1e-13).value
                })
                .sum(),
            None => {
                let pieces = ((z_max * c.abs() / scale).ceil() as usize).clamp(1, 4096);
                let breaks: Vec<f64> = (0..=pieces)
                    .map(|k| z_max * k as f64 / pieces as f64)
                    .collect();
                quadrature::adaptive_pieces(integrand, &breaks, tol, 1e-13).value
            }
        };
        Ok(factor * value)
    }

    /// `χ^ε(t, x, v)`.
    pub fn chi(&self, t: f64, x: f64, v: f64) -> Result<f64> {
        Ok(self.phi.envelope.eval(t).0 * self.chi_profile(x, v, Apply::Value)?)
    }

    /// `∂tχ^ε(t, x, v)`, the corrector of `∂tφ`.
    pub fn chi_dt(&self, t: f64, x: f64, v: f64) -> Result<f64> {
        Ok(self.phi.envelope.eval(t).1 * self.chi_profile(x, v, Apply::Value)?)
    }

    /// Spatial gradient of the corrector of the spatial factor, from the
    /// transport identity `c ∂ₓχ = ν₀(x)(χ − g)`.
    pub fn chi_profile_dx(&self, x: f64, v: f64) -> Result<f64> {
        let c = self.speed(v);
        if self.model.params.nu0_delta == 0.0 {
            return self.chi_profile(x, v, Apply::Gradient);
        }
        if c.abs() < 1e-7 * self.phi.spatial.scale().min(1.0) {
            // the identity cancels catastrophically; the corrector is φ to O(c)
            return self.chi_profile(x, v, Apply::Gradient);
        }
        let chi = self.chi_profile(x, v, Apply::Value)?;
        Ok(self.model.nu0(x) * (chi - self.profile(x, Apply::Value)) / c)
    }

    /// Pointwise bound `(ν₂/ν₁) ε|v|⌈v⌋^{-β} ‖g'‖∞` on `|χ − g|`.
    pub fn sup_bound(&self, v: f64, grad_sup: f64) -> f64 {
        self.model.nu2 / self.model.nu1 * self.speed(v).abs() * grad_sup
    }
}

/// Fixed rule `(v_k, w_k)` for `∫_ℝ h(v) dv` with `h ~ |v|^{-1-decay}`: 16-point
/// Gauss–Legendre panels on the core and on each tail mapped by `v = s^{-1/decay}`,
/// graded geometrically towards `s = 0`.
pub fn velocity_rule(decay: f64) -> Vec<(f64, f64)> {
    let base = gauss_legendre(16);
    let mut out = Vec::new();
    for e in [-1.0, -0.5, 0.0, 0.5, 1.0].windows(2) {
        let r = base.mapped(e[0], e[1]);
        out.extend(r.nodes.into_iter().zip(r.weights));
    }
    let mut s_edges = vec![0.0];
    s_edges.extend((0..=20).rev().map(|k| 0.5f64.powi(k)));
    for e in s_edges.windows(2) {
        let r = base.mapped(e[0], e[1]);
        for (s, w) in r.nodes.into_iter().zip(r.weights) {
            let v = s.powf(-1.0 / decay);
            let jac = w * v / (decay * s);
            out.push((v, jac));
            out.push((-v, jac));
        }
    }
    out
}

/// Splits of [`operator_limit_lhs`] by velocity range.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OperatorLimitParts {
    /// `ε^{-γ}∫_{|v|≤1} νF(χ − φ) dv`.
    pub small: f64,
    /// `ε^{-γ}∫_{|v|>1} νF(χ − φ) dv`.
    pub large: f64,
    /// `−ε^{1-γ} j^ε_F ∂ₓφ`.
    pub drift: f64,
}

impl OperatorLimitParts {
    pub fn total(&self) -> f64 {
        self.small + self.large + self.drift
    }
}

/// `ε^{-γ}∫ νF(χ^ε − φ − (ε/ν) j^ε_F ∂ₓφ) dv` at `(t, x)`, split by velocity range.
pub fn operator_limit_parts(
    model: &Model,
    phi: &TestFunction,
    t: f64,
    x: f64,
    eps: f64,
) -> Result<OperatorLimitParts> {
    let ce = CorrectorEval::new(model, *phi, eps)?;
    let psi = phi.envelope.eval(t).0;
    let g = phi.spatial_eval(x);
    let nu0 = model.nu0(x);
    let gamma = model.gamma;
    let (alpha, beta, kappa) = (model.alpha(), model.beta(), model.kappa());
    let tol = 1e-12;
    let diff = |v: f64| -> Result<f64> { Ok(ce.chi_profile(x, v, Apply::Value)? - g[0]) };
    let failure = std::sync::Mutex::new(None::<Error>);
    let guarded = |v: f64| match diff(v) {
        Ok(y) => y,
        Err(e) => {
            failure.lock().expect("poisoned").get_or_insert(e);
            0.0
        }
    };
    // ν F on the core is ν₀ A(1 + av)
    let small = quadrature::adaptive_pieces(
        |v| nu0 * model.equilibrium_pdf(v) * guarded(v),
        &[-1.0, -0.5, 0.0, 0.5, 1.0],
        tol,
        tol,
    )
    .value;
    // tails: νF = ν₀κ|v|^{β-1-α}; with v = s^{-1/(α-β)}, νF dv = ν₀κ/(α-β) ds
    let p = alpha - beta;
    let large = quadrature::adaptive_pieces(
        |s| {
            if s <= 0.0 {
                return -2.0 * g[0] * nu0 * kappa / p;
            }
            let v = s.powf(-1.0 / p);
            nu0 * kappa / p * (guarded(v) + guarded(-v))
        },
        &[0.0, 1e-4, 1e-3, 0.01, 0.1, 0.4, 1.0],
        tol,
        tol,
    )
    .value;
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    let scale = eps.powf(-gamma);
    Ok(OperatorLimitParts {
        small: psi * scale * small,
        large: psi * scale * large,
        drift: -psi * eps.powf(1.0 - gamma) * model.drift(eps) * g[1],
    })
}

/// `ε^{-γ}∫ νF(χ^ε − φ − (ε/ν) j^ε_F ∂ₓφ) dv`, which tends to `−κ𝓛φ`.
pub fn operator_limit_lhs(
    model: &Model,
    phi: &TestFunction,
    t: f64,
    x: f64,
    eps: f64,
) -> Result<f64> {
    Ok(operator_limit_parts(model, phi, t, x, eps)?.total())
}

/// Results of [`chi_l2f_gap`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GapReport {
    pub eps: f64,
    /// `∫∫∫ F(χ − φ)²`.
    pub gap: f64,
    /// `∫∫∫ F(∂tχ − ∂tφ)²`.
    pub gap_dt: f64,
    /// `‖χ‖²_{L²_F} / ‖φ‖²_{L²}` (equal for the time derivative of a separable φ).
    pub chi_ratio: f64,
    pub chi_ratio_bound: f64,
}

/// L²_F gaps between `χ^ε` and φ and between their time derivatives over
/// `(0, T) × ℝ × ℝ`. Time uses 32-point Gauss–Legendre over the envelope support,
/// space an adaptive rule over the support of φ extended upstream by the flight
/// length, velocity the tail-mapped adaptive rule.
pub fn chi_l2f_gap(model: &Model, phi: &TestFunction, eps: f64) -> Result<GapReport> {
    let t_end = phi.envelope.support_end().ok_or_else(|| {
        Error::Precondition("the L2 gap needs a test function with compact time support".into())
    })?;
    if phi.period.is_some() {
        return Err(Error::Precondition("the L2 gap is taken on the whole line".into()));
    }
    let ce = CorrectorEval::new(model, *phi, eps)?;
    let time_rule = gauss_legendre(32).mapped(0.0, t_end);
    let psi2 = time_rule.integrate(|t| phi.envelope.eval(t).0.powi(2));
    let dpsi2 = time_rule.integrate(|t| phi.envelope.eval(t).1.powi(2));
    let profile = phi.spatial;

    // per-velocity spatial integrals (∫(χ − g)², ∫χ²) by composite Gauss–Legendre
    let base = gauss_legendre(16);
    let spatial = |v: f64| -> Result<(f64, f64)> {
        let (a, b) = match profile.window() {
            Some(w) => w,
            None => {
                if matches!(profile, SpatialProfile::Constant { .. }) {
                    return Ok((0.0, 0.0));
                }
                return Err(Error::Precondition(
                    "the L2 gap needs a spatially localized test function".into(),
                ));
            }
        };
        let c = ce.speed(v);
        let lam = c.abs() / model.nu1;
        let panels = (((b - a) / profile.scale()).ceil() as usize).max(4);
        let mut edges: Vec<f64> =
            (0..=panels).map(|k| a + (b - a) * k as f64 / panels as f64).collect();
        // upstream exponential tail of the corrector
        const TAIL: [f64; 9] = [0.5, 1.5, 3.0, 6.0, 10.0, 15.0, 22.0, 32.0, 46.0];
        if lam > 0.0 {
            if c > 0.0 {
                edges.splice(0..0, TAIL.iter().rev().map(|f| a - f * lam));
            } else {
                edges.extend(TAIL.iter().map(|f| b + f * lam));
            }
        }
        let mut nodes = Vec::with_capacity(16 * edges.len());
        for e in edges.windows(2) {
            let r = base.mapped(e[0], e[1]);
            nodes.extend(r.nodes.into_iter().zip(r.weights));
        }
        let parts: Vec<(f64, f64)> = nodes
            .par_iter()
            .map(|&(x, w)| {
                let chi = ce.chi_profile(x, v, Apply::Value)?;
                let d = chi - profile.eval(x)[0];
                Ok((w * d * d, w * chi * chi))
            })
            .collect::<Result<_>>()?;
        Ok(parts
            .iter()
            .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1)))
    };
    let vrule = velocity_rule(model.alpha());
    let parts: Vec<(f64, f64)> = vrule
        .iter()
        .map(|&(v, w)| {
            let (g, n) = spatial(v)?;
            let f = w * model.equilibrium_pdf(v);
            Ok((f * g, f * n))
        })
        .collect::<Result<_>>()?;
    let gap_x: f64 = parts.iter().map(|p| p.0).sum();
    let norm_x: f64 = parts.iter().map(|p| p.1).sum();
    let phi_norm = match profile.window() {
        Some((a, b)) => {
            quadrature::adaptive(|x| profile.eval(x)[0].powi(2), a, b, 1e-16, 1e-13).value
        }
        None => f64::INFINITY,
    };
    Ok(GapReport {
        eps,
        gap: psi2 * gap_x,
        gap_dt: dpsi2 * gap_x,
        chi_ratio: norm_x / phi_norm,
        chi_ratio_bound: model.nu2 / model.nu1,
    })
}

/// `H(x) = ∫ p(v)(χ_g(x, v) − g(x)) dv` for the spatial factor.
pub fn post_collision_defect(ce: &CorrectorEval<'_>, x: f64) -> Result<f64> {
    let m = ce.model;
    let g = ce.phi.spatial_eval(x)[0];
    let mut acc = 0.0;
    for (v, w) in velocity_rule(m.alpha() - m.beta()) {
        acc += w * m.post_collision_pdf(v) * (ce.chi_profile(x, v, Apply::Value)? - g);
    }
    Ok(acc)
}

/// Step-1 quantity `ε^{-γ}∫∫∫ Q⁺(g^ε)(χ^ε − φ) dv dx dt` from a deterministic run.
///
/// The gain is rank one, `Q⁺(g) = ν₀(x)p(v)m_β(g)`, so the velocity integral is
/// `ν₀ m_β(g) H(x)`; `m_β(g)` comes from the run's moment series (trapezoid in t).
pub fn corrector_term_qplus(model: &Model, phi: &TestFunction, run: &DetRun) -> Result<f64> {
    if run.moments.len() < 2 {
        return Err(Error::Input(
            "Step-1 term needs the m_beta(g) series (run with moment_stride > 0)".into(),
        ));
    }
    let nx = run.moments[0].1.len();
    let length = model.domain_length();
    let grid = crate::density::Grid1d::new(nx, length);
    let ce = CorrectorEval::new(model, *phi, run.eps)?;
    if run.moments.iter().all(|(_, m)| m.iter().all(|&v| v == 0.0)) {
        return Ok(0.0);
    }
    let h: Vec<f64> = (0..nx)
        .into_par_iter()
        .map(|i| post_collision_defect(&ce, grid.x(i)))
        .collect::<Result<_>>()?;
    let nu0: Vec<f64> = (0..nx).map(|i| model.nu0(grid.x(i))).collect();
    let dx = grid.dx();
    let slice = |t: f64, m: &[f64]| -> f64 {
        let psi = phi.envelope.eval(t).0;
        psi * (0..nx).map(|i| nu0[i] * m[i] * h[i]).sum::<f64>() * dx
    };
    let integral: f64 = run
        .moments
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (slice(w[0].0, &w[0].1) + slice(w[1].0, &w[1].1)))
        .sum();
    Ok(run.eps.powf(-model.gamma) * integral)
}

/// Step-2 and Step-3 drift quantities
/// `ε^{1-γ}∫∫∫ j ∂ₓχ g` and `ε^{1-γ}∫∫∫ j ∂ₓ(χ − φ) ρ F`,
/// evaluated on the solver's phase-space grid from stored snapshots.
pub fn drift_terms(model: &Model, phi: &TestFunction, run: &DetRun) -> Result<(f64, f64)> {
    let j = model.drift(run.eps);
    if j == 0.0 {
        return Ok((0.0, 0.0));
    }
    let fields: Vec<(f64, &crate::kinetic_fv::PhaseField)> = run
        .snapshots
        .iter()
        .filter_map(|s| s.field.as_ref().map(|f| (s.time, f)))
        .collect();
    let vg = run.velocity.as_ref().ok_or_else(|| {
        Error::Input("drift terms need the run's velocity grid".into())
    })?;
    if fields.len() < 2 {
        return Err(Error::Input("drift terms need stored phase fields at >= 2 times".into()));
    }
    let (nx, nv) = (fields[0].1.nx, fields[0].1.nv);
    let grid = crate::density::Grid1d::new(nx, model.domain_length());
    let ce = CorrectorEval::new(model, *phi, run.eps)?;
    // spatial factors of ∂ₓχ and ∂ₓ(χ − φ) on the grid
    let dchi: Vec<f64> = (0..nx * nv)
        .into_par_iter()
        .map(|k| ce.chi_profile_dx(grid.x(k / nv), vg.v[k % nv]))
        .collect::<Result<_>>()?;
    let dphi: Vec<f64> = (0..nx).map(|i| phi.spatial_eval(grid.x(i))[1]).collect();
    let dx = grid.dx();
    let step = |f: &crate::kinetic_fv::PhaseField| -> (f64, f64) {
        let mut s2 = 0.0;
        let mut s3 = 0.0;
        for i in 0..nx {
            let col = f.column(i);
            let rho: f64 = (0..nv).map(|k| vg.w[k] * col[k]).sum();
            for k in 0..nv {
                let d = dchi[i * nv + k];
                let g = col[k] - rho * vg.f_eq[k];
                s2 += vg.w[k] * d * g;
                s3 += vg.w[k] * (d - dphi[i]) * rho * vg.f_eq[k];
            }
        }
        (s2 * dx, s3 * dx)
    };
    let vals: Vec<(f64, f64, f64)> = fields
        .iter()
        .map(|&(t, f)| {
            let psi = phi.envelope.eval(t).0;
            let (a, b) = step(f);
            (t, psi * a, psi * b)
        })
        .collect();
    let mut i2 = 0.0;
    let mut i3 = 0.0;
    for w in vals.windows(2) {
        let dt = w[1].0 - w[0].0;
        i2 += 0.5 * dt * (w[0].1 + w[1].1);
        i3 += 0.5 * dt * (w[0].2 + w[1].2);
    }
    let scale = run.eps.powf(1.0 - model.gamma) * j;
    Ok((scale * i2, scale * i3))
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

    fn gaussian() -> TestFunction {
        TestFunction::new(
            SpatialProfile::Gaussian {
                center: 0.0,
                width: 1.0,
            },
            TimeEnvelope::Bump { t_end: 1.0 },
            None,
        )
        .unwrap()
    }

    #[test]
    fn constants_are_reproduced() {
        let m = model(1.2, 0.5, 0.3);
        let phi = TestFunction::new(
            SpatialProfile::Constant { value: 2.5 },
            TimeEnvelope::Constant,
            None,
        )
        .unwrap();
        for eps in [1.0, 0.1, 0.01] {
            let ce = CorrectorEval::new(&m, phi, eps).unwrap();
            for v in [-300.0, -2.0, -0.3, 0.0, 0.7, 5.0, 1e4] {
                let chi = ce.chi(0.2, 3.3, v).unwrap();
                assert!((chi - 2.5).abs() < 1e-12 * 2.5, "v={v}: {chi}");
                assert!((ce.weight_integral(3.3, v).unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cosine_closed_form() {
        let m = model(1.5, 0.0, 0.0);
        let xi = 0.8;
        let phi =
            TestFunction::new(SpatialProfile::Cosine { xi }, TimeEnvelope::Constant, None).unwrap();
        let ce = CorrectorEval::new(&m, phi, 0.1).unwrap();
        for v in [-3.0, -1.0, 0.2, 2.0, 4.0, 30.0, 200.0] {
            for x in [0.0, 0.4, 2.0] {
                let c = ce.speed(v);
                // Re[ν/(ν − iξc) e^{iξx}], ν = 1
                let den = 1.0 + xi * xi * c * c;
                let want = ((xi * x).cos() - xi * c * (xi * x).sin()) / den;
                let got = ce.chi(0.0, x, v).unwrap();
                assert!((got - want).abs() < 1e-10, "v={v} x={x}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn derivative_self_check_rejects_bad_input() {
        assert!(TestFunction::new(
            SpatialProfile::Gaussian {
                center: 0.0,
                width: -1.0
            },
            TimeEnvelope::Constant,
            None
        )
        .is_err());
        assert!(TestFunction::new(
            SpatialProfile::PlaneWave {
                center: 1.0,
                width: 1.5,
                xi: 2.0
            },
            TimeEnvelope::Bump { t_end: 0.5 },
            Some(20.0)
        )
        .is_ok());
    }

    #[test]
    fn sup_bound_holds() {
        let m = model(1.5, 0.0, 0.4);
        let phi = gaussian();
        let grad_sup = (-0.5f64).exp();
        let ce = CorrectorEval::new(&m, phi, 0.2).unwrap();
        for v in [-50.0, -3.0, -0.5, 0.5, 2.0, 8.0, 120.0] {
            for k in -8..=8 {
                let x = 0.5 * k as f64;
                let d = ce.chi_profile(x, v, Apply::Value).unwrap() - phi.spatial_eval(x)[0];
                assert!(d.abs() <= ce.sup_bound(v, grad_sup) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn gradient_identity_matches_finite_difference() {
        let m = model(1.5, 0.0, 0.4);
        let ce = CorrectorEval::new(&m, gaussian(), 0.2).unwrap();
        for v in [-4.0, 0.3, 2.0, 15.0] {
            let x = 0.7;
            let h = 1e-5;
            let fd = (ce.chi_profile(x + h, v, Apply::Value).unwrap()
                - ce.chi_profile(x - h, v, Apply::Value).unwrap())
                / (2.0 * h);
            let an = ce.chi_profile_dx(x, v).unwrap();
            assert!((fd - an).abs() < 1e-7, "v={v}: {fd} vs {an}");
        }
    }

    #[test]
    fn constant_in_space_gives_zero_gap_and_zero_limit() {
        let m = model(1.5, 0.0, 0.0);
        let phi = TestFunction::new(
            SpatialProfile::Constant { value: 1.0 },
            TimeEnvelope::Bump { t_end: 1.0 },
            None,
        )
        .unwrap();
        let r = chi_l2f_gap(&m, &phi, 0.1).unwrap();
        assert_eq!(r.gap, 0.0);
        let l = operator_limit_lhs(&m, &phi, 0.3, 1.0, 0.1).unwrap();
        assert!(l.abs() < 1e-10, "{l}");
    }
}
