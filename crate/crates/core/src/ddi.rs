//! Free-space dipole-dipole coupling between emitters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{EmitterChain, UnitSystem};

/// Coherent dipole-dipole coupling in units of `Γ0` at dimensionless
/// separation `r = ω_eg d / c`, for a dipole at angle `theta` to the
/// separation axis.
pub fn ddi_coupling(r: f64, theta: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::domain("r_dimensionless", format!("{r} must be positive")));
    }
    let (s, c) = r.sin_cos();
    let r2 = r * r;
    let r3 = r2 * r;
    let transverse = 0.75 * (c / r3 + s / r2 - c / r);
    let cos_theta = theta.cos();
    let axial = cos_theta * cos_theta * (c / r - 3.0 * c / r3 - 3.0 * s / r2);
    Ok(transverse + axial)
}

/// Symmetric pairwise coupling matrix `J_ij` (units of `Γ0`, zero diagonal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdiMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DdiMatrix {
    pub fn zeros(n: usize) -> Self {
        DdiMatrix {
            n,
            values: vec![0.0; n * n],
        }
    }

    /// Builds a matrix from the strict upper triangle generated by `coupling(i, j)`, `i < j`.
    pub fn from_fn(n: usize, mut coupling: impl FnMut(usize, usize) -> Result<f64>) -> Result<Self> {
        let mut m = DdiMatrix::zeros(n);
        for i in 0..n {
            for j in i + 1..n {
                let v = coupling(i, j)?;
                if !v.is_finite() {
                    return Err(Error::domain("ddi", format!("J[{i}][{j}] is not finite")));
                }
                m.values[i * n + j] = v;
                m.values[j * n + i] = v;
            }
        }
        Ok(m)
    }

    /// Two emitters coupled by `j`.
    pub fn pair(j: f64) -> Result<Self> {
        DdiMatrix::from_fn(2, |_, _| Ok(j))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

/// Couplings for every pair of emitters in `chain`. No range cutoff.
pub fn ddi_matrix(chain: &EmitterChain, units: &UnitSystem) -> Result<DdiMatrix> {
    let x = chain.positions_nm();
    let k = units.emitter_wavenumber();
    let theta = chain.params.theta_dipole;
    DdiMatrix::from_fn(chain.count(), |i, j| ddi_coupling(k * (x[i] - x[j]).abs(), theta))
}
