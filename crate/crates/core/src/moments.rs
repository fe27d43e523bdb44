//! Closed-form first and second moments of the torus particle system
//! started from constant fields `ξ₀ ≡ v`, `η₀ ≡ u`.
//!
//! The kernel values `p_{2t}` and `g_{2t}` always come from the spectral
//! [`KernelTable`], never from simulation.

use crate::error::{Error, Result};
use crate::kernels::KernelTable;
use crate::lattice::Site;

#[derive(Debug, Clone, Copy)]
pub struct MomentQuery<'a> {
    pub table: &'a KernelTable,
    pub t: f64,
    pub gamma: f64,
    pub sigma2: f64,
    /// Constant initial ξ-density `v`.
    pub theta1: u64,
    /// Constant initial η-density `u`.
    pub theta2: u64,
    pub x: Site,
    pub y: Site,
}

impl<'a> MomentQuery<'a> {
    pub fn new(table: &'a KernelTable, t: f64, gamma: f64, sigma2: f64, theta1: u64, theta2: u64) -> Self {
        let origin = Site::origin(table.lattice().dim());
        MomentQuery {
            table,
            t,
            gamma,
            sigma2,
            theta1,
            theta2,
            x: origin,
            y: origin,
        }
    }

    pub fn at(mut self, x: Site, y: Site) -> Self {
        self.x = x;
        self.y = y;
        self
    }

    /// Same query with the roles of the two populations swapped.
    pub fn swapped(mut self) -> Self {
        std::mem::swap(&mut self.theta1, &mut self.theta2);
        self
    }

    fn check(&self) -> Result<()> {
        if self.t.is_nan() || self.t < 0.0 {
            return Err(Error::misuse(format!("time must be non-negative, got {}", self.t)));
        }
        Ok(())
    }

    fn branching_coefficient(&self) -> f64 {
        0.5 * self.sigma2 * self.gamma * (self.theta1 * self.theta2) as f64
    }

    fn diff(&self) -> Site {
        self.table.lattice().difference(&self.x, &self.y)
    }
}

/// `E ξ_t(x) = v`.
pub fn mean_xi(q: &MomentQuery) -> Result<f64> {
    q.check()?;
    Ok(q.theta1 as f64)
}

pub fn mean_eta(q: &MomentQuery) -> Result<f64> {
    mean_xi(&q.swapped())
}

/// `E ξ_t(x) η_t(y) = v u` for all `x`, `y`.
pub fn cross_moment(q: &MomentQuery) -> Result<f64> {
    q.check()?;
    Ok((q.theta1 * q.theta2) as f64)
}

/// `E ξ_t(x)² = v² + ½σ²γuv g_{2t}(0) + v (1 - p_{2t}(0))`.
pub fn second_moment_xi(q: &MomentQuery) -> Result<f64> {
    q.check()?;
    let origin = Site::origin(q.table.lattice().dim());
    let v = q.theta1 as f64;
    let g = q.table.green_t(2.0 * q.t, &origin)?;
    let p = q.table.p_t(2.0 * q.t, &origin)?;
    Ok(v * v + q.branching_coefficient() * g + v * (1.0 - p))
}

pub fn second_moment_eta(q: &MomentQuery) -> Result<f64> {
    second_moment_xi(&q.swapped())
}

/// `E ξ_t(x) ξ_t(y) = v² - v p_{2t}(x-y) + ½σ²γuv g_{2t}(x-y)` for `x ≠ y`.
pub fn pair_moment_xi(q: &MomentQuery) -> Result<f64> {
    q.check()?;
    if q.x == q.y {
        return Err(Error::misuse("pair moment needs x != y; use second_moment_xi"));
    }
    let z = q.diff();
    let v = q.theta1 as f64;
    let p = q.table.p_t(2.0 * q.t, &z)?;
    let g = q.table.green_t(2.0 * q.t, &z)?;
    Ok(v * v - v * p + q.branching_coefficient() * g)
}

pub fn pair_moment_eta(q: &MomentQuery) -> Result<f64> {
    pair_moment_xi(&q.swapped())
}
