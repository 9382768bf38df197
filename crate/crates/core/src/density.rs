use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform cell-centred grid on the torus `[0, L)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1d {
    pub nx: usize,
    pub length: f64,
}

impl Grid1d {
    pub fn new(nx: usize, length: f64) -> Self {
        Grid1d { nx, length }
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.length / self.nx as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    MonteCarlo,
    KineticMarginal,
    Macro,
    Fourier,
}

/// `ρ(x)` sampled at the cell centres of a [`Grid1d`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub grid: Grid1d,
    pub values: Vec<f64>,
    pub time: f64,
    pub provenance: Provenance,
}

impl DensityField {
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.dx()).sqrt()
    }

    /// `‖self − other‖_{L²}` on a shared grid.
    pub fn l2_distance(&self, other: &DensityField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Precondition("density grids differ".into()));
        }
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok((s * self.grid.dx()).sqrt())
    }

    /// Averages onto a coarser grid whose cell count divides `nx`.
    pub fn coarsen(&self, nx: usize) -> Result<DensityField> {
        if nx == 0 || self.grid.nx % nx != 0 {
            return Err(Error::Precondition(format!(
                "cannot coarsen {} cells onto {nx}",
                self.grid.nx
            )));
        }
        let r = self.grid.nx / nx;
        let values = self
            .values
            .chunks(r)
            .map(|c| c.iter().sum::<f64>() / r as f64)
            .collect();
        Ok(DensityField {
            grid: Grid1d::new(nx, self.grid.length),
            values,
            time: self.time,
            provenance: self.provenance,
        })
    }
}

/// Initial spatial profile `ρ₀`, normalized to unit mass on the torus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialProfile {
    /// Gaussian periodized over the torus.
    Gaussian { center: f64, width: f64 },
    Uniform,
}

impl InitialProfile {
    pub fn validate(&self, length: f64) -> Result<()> {
        match *self {
            InitialProfile::Gaussian { center, width } => {
                if !(width > 0.0 && width.is_finite() && center.is_finite()) {
                    return Err(Error::Config(format!(
                        "initial profile is not normalizable (width = {width})"
                    )));
                }
            }
            InitialProfile::Uniform => {
                if !(length > 0.0 && length.is_finite()) {
                    return Err(Error::Config("uniform profile needs a finite domain".into()));
                }
            }
        }
        Ok(())
    }

    pub fn density(&self, x: f64, length: f64) -> f64 {
        match *self {
            InitialProfile::Gaussian { center, width } => {
                let norm = 1.0 / (width * (2.0 * PI).sqrt());
                let images = (8.0 * width / length).ceil() as i64 + 1;
                (-images..=images)
                    .map(|m| {
                        let d = (x - center + m as f64 * length) / width;
                        norm * (-0.5 * d * d).exp()
                    })
                    .sum()
            }
            InitialProfile::Uniform => 1.0 / length,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, length: f64) -> f64 {
        match *self {
            InitialProfile::Gaussian { center, width } => {
                let n = Normal::new(center, width).expect("validated width");
                n.sample(rng).rem_euclid(length)
            }
            InitialProfile::Uniform => rng.gen::<f64>() * length,
        }
    }

    /// Cell averages on `grid`, renormalized so the discrete mass is exactly one.
    pub fn discretize(&self, grid: &Grid1d) -> Vec<f64> {
        let rule = crate::quadrature::gauss_legendre(8);
        let h = grid.dx();
        let mut vals: Vec<f64> = (0..grid.nx)
            .map(|i| {
                let a = i as f64 * h;
                rule.mapped(a, a + h)
                    .integrate(|x| self.density(x, grid.length))
                    / h
            })
            .collect();
        let mass: f64 = vals.iter().sum::<f64>() * h;
        vals.iter_mut().for_each(|v| *v /= mass);
        vals
    }
}
