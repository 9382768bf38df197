//! Monte Carlo particle solver for `ε^γ ∂t f + ε(v − j^ε_F) ∂x f = Q(f)` on the torus.
//!
//! In macroscopic time a particle moves at speed `ε^{1−γ}(v − j^ε_F)` and collides at
//! rate `ν(x, v)/ε^γ`. Collisions are simulated exactly by thinning against the
//! majorant `ν₂⌈v⌋^β/ε^γ`, which is constant along a free flight because `v` does not
//! change between collisions. Each particle owns a counter-based ChaCha stream keyed
//! by `(seed, particle index)`, so results do not depend on the worker count.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use crate::density::{DensityField, Grid1d, InitialProfile, Provenance};
use crate::error::{Error, Result};
use crate::model::{bracket_pow, Model};

/// Words reserved in a particle's stream for a single call.
const WORDS_PER_CALL: u128 = 1 << 40;

#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    pub time: f64,
    pub seed: u64,
    /// Number of stream blocks consumed so far (init counts as one).
    calls: u64,
    pub collisions: u64,
    pub candidates: u64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AdvanceStats {
    pub collisions: u64,
    pub candidates: u64,
}

fn particle_rng(seed: u64, index: usize, call: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng.set_word_pos(call as u128 * WORDS_PER_CALL);
    rng
}

impl ParticleEnsemble {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Draws `n` i.i.d. particles from `ρ₀(x)F(v)`.
pub fn init_ensemble(
    model: &Model,
    profile: &InitialProfile,
    n: usize,
    seed: u64,
) -> Result<ParticleEnsemble> {
    if n == 0 {
        return Err(Error::Config("particle count must be at least 1".into()));
    }
    let length = model.domain_length();
    profile.validate(length)?;
    let (positions, velocities): (Vec<f64>, Vec<f64>) = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = particle_rng(seed, i, 0);
            let x = profile.sample(&mut rng, length);
            let v = model.sample_equilibrium(&mut rng);
            (x, v)
        })
        .unzip();
    Ok(ParticleEnsemble {
        positions,
        velocities,
        time: 0.0,
        seed,
        calls: 1,
        collisions: 0,
        candidates: 0,
    })
}

/// Exact jump-process evolution of one particle over `dt` macroscopic time units.
fn advance_particle<R: Rng>(
    model: &Model,
    rng: &mut R,
    x: &mut f64,
    v: &mut f64,
    dt: f64,
    speed_scale: f64,
    rate_scale: f64,
    drift: f64,
) -> (u64, u64) {
    let length = model.domain_length();
    let beta = model.beta();
    let mut t = 0.0;
    let mut collisions = 0;
    let mut candidates = 0;
    loop {
        let majorant = model.nu2 * bracket_pow(*v, beta) * rate_scale;
        let tau: f64 = Exp1.sample(rng);
        let tau = tau / majorant;
        let speed = speed_scale * (*v - drift);
        if t + tau >= dt {
            *x = (*x + speed * (dt - t)).rem_euclid(length);
            break;
        }
        t += tau;
        *x = (*x + speed * tau).rem_euclid(length);
        candidates += 1;
        // acceptance ν(x, v)/(ν₂⌈v⌋^β) = ν₀(x)/ν₂
        let accept = model.nu0(*x) / model.nu2;
        if accept >= 1.0 || rng.gen::<f64>() < accept {
            *v = model.sample_post_collision(rng);
            collisions += 1;
        }
    }
    (collisions, candidates)
}

/// Advances every particle by `dt_macro` at Knudsen number `eps`.
pub fn advance(
    model: &Model,
    ensemble: &mut ParticleEnsemble,
    dt_macro: f64,
    eps: f64,
) -> Result<AdvanceStats> {
    if !(dt_macro > 0.0) {
        return Err(Error::Precondition(format!("dt_macro must be positive ({dt_macro})")));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Precondition(format!("eps must lie in (0, 1] ({eps})")));
    }
    let gamma = model.gamma;
    let speed_scale = eps.powf(1.0 - gamma);
    let rate_scale = eps.powf(-gamma);
    let drift = model.drift(eps);
    let seed = ensemble.seed;
    let call = ensemble.calls;
    let (collisions, candidates) = ensemble
        .positions
        .par_iter_mut()
        .zip(ensemble.velocities.par_iter_mut())
        .enumerate()
        .map(|(i, (x, v))| {
            let mut rng = particle_rng(seed, i, call);
            advance_particle(model, &mut rng, x, v, dt_macro, speed_scale, rate_scale, drift)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    ensemble.calls += 1;
    ensemble.time += dt_macro;
    ensemble.collisions += collisions;
    ensemble.candidates += candidates;
    Ok(AdvanceStats {
        collisions,
        candidates,
    })
}

/// Histogram estimate of `ρ^ε = ∫f dv`, normalized to unit mass.
///
/// With `smooth` set, each particle is shared linearly between the two nearest cell
/// centres (triangular kernel of one cell width).
pub fn estimate_density(
    ensemble: &ParticleEnsemble,
    grid: Grid1d,
    smooth: bool,
) -> Result<DensityField> {
    if grid.nx < 2 {
        return Err(Error::Precondition("density grid needs nx >= 2".into()));
    }
    let nx = grid.nx;
    let h = grid.dx();
    // integer counts keep the reduction order-independent
    let counts: Vec<f64> = if smooth {
        // fixed-point weights, 2^20 per particle
        const SCALE: f64 = (1u64 << 20) as f64;
        let c = ensemble
            .positions
            .par_iter()
            .fold(
                || vec![0u64; nx],
                |mut acc, &x| {
                    let s = x / h - 0.5;
                    let left = s.floor();
                    let frac = s - left;
                    let wr = (frac * SCALE).round() as u64;
                    let wl = SCALE as u64 - wr;
                    let il = (left as i64).rem_euclid(nx as i64) as usize;
                    acc[il] += wl;
                    acc[(il + 1) % nx] += wr;
                    acc
                },
            )
            .reduce(|| vec![0u64; nx], add_counts);
        c.into_iter().map(|k| k as f64 / SCALE).collect()
    } else {
        let c = ensemble
            .positions
            .par_iter()
            .fold(
                || vec![0u64; nx],
                |mut acc, &x| {
                    let i = ((x / h) as usize).min(nx - 1);
                    acc[i] += 1;
                    acc
                },
            )
            .reduce(|| vec![0u64; nx], add_counts);
        c.into_iter().map(|k| k as f64).collect()
    };
    let n = ensemble.len() as f64;
    Ok(DensityField {
        grid,
        values: counts.into_iter().map(|c| c / (n * h)).collect(),
        time: ensemble.time,
        provenance: Provenance::MonteCarlo,
    })
}

fn add_counts(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
    a
}

/// Per-bin standard error of a plain histogram, `sqrt(p(1−p)/N)/h` with `p = ρh`.
pub fn histogram_standard_error(field: &DensityField, particles: usize) -> Vec<f64> {
    let h = field.grid.dx();
    field
        .values
        .iter()
        .map(|&rho| {
            let p = (rho * h).clamp(0.0, 1.0);
            (p * (1.0 - p) / particles as f64).sqrt() / h
        })
        .collect()
}
