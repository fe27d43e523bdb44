//! Finite-system-scheme harness: the torus particle system run to time
//! `β_n(T) = |Λ_n| T`, rescaled by `|Λ_n|`, against the two-dimensional
//! limit diffusion at time `T`.
//!
//! Both are compared through the mixed Laplace-Fourier transform
//! `E exp(-(X+Y)(a+b) - i(X-Y)(a-b))` over a grid of `(a, b)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{green_infinity_zd, max_gamma_sigma2, GREEN_TOLERANCE};
use crate::lattice::{Lattice, Site};
use crate::offspring::OffspringLaw;
use crate::particle::{run, ParticleState, SimConfig, Trajectory};
use crate::sde::limit_diffusion_samples;
use crate::seeding::{derive_replicate_seed, domain_seed, replicate_map, SeedDomain};
use crate::stats::{Complex, ComplexStats};

/// Gap threshold for desk-scale `n`; calibrated, not derived.
pub const GAP_THRESHOLD: f64 = 0.05;

pub fn default_grid() -> Vec<(f64, f64)> {
    let pts = [0.0, 0.5, 1.0];
    pts.iter().flat_map(|&a| pts.iter().map(move |&b| (a, b))).collect()
}

#[derive(Debug, Clone)]
pub struct FssConfig {
    pub dim: usize,
    pub n_values: Vec<u32>,
    /// Macroscopic time `T ∈ (0, 1]`.
    pub horizon: f64,
    pub theta1: u64,
    pub theta2: u64,
    pub gamma: f64,
    pub kappa: f64,
    pub law: OffspringLaw,
    /// Transform arguments `(a, b)`.
    pub grid: Vec<(f64, f64)>,
    pub particle_replicates: usize,
    pub diffusion_paths: usize,
    pub dt: f64,
    pub seed: u64,
    /// Run even when `γσ²` is above the admissible bound.
    pub allow_large_gamma: bool,
}

impl FssConfig {
    pub fn new(dim: usize, n_values: Vec<u32>, horizon: f64, theta: (u64, u64), gamma: f64, law: OffspringLaw) -> Self {
        FssConfig {
            dim,
            n_values,
            horizon,
            theta1: theta.0,
            theta2: theta.1,
            gamma,
            kappa: 1.0,
            law,
            grid: default_grid(),
            particle_replicates: 500,
            diffusion_paths: 100_000,
            dt: 1e-3,
            seed: 0,
            allow_large_gamma: false,
        }
    }

    pub fn gamma_tilde(&self) -> f64 {
        self.gamma * self.law.sigma2()
    }

    /// Largest admissible `γσ²` for this dimension and jump rate.
    pub fn gamma_sigma2_bound(&self) -> Result<f64> {
        let g0 = green_infinity_zd(self.dim, self.kappa, &Site::origin(self.dim), GREEN_TOLERANCE)?;
        Ok(max_gamma_sigma2(g0))
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.dim < 3 || self.dim > crate::lattice::MAX_DIM {
            problems.push(format!(
                "dim must be in 3..={}, got {}",
                crate::lattice::MAX_DIM,
                self.dim
            ));
        }
        if self.n_values.is_empty() {
            problems.push("n_values must not be empty".into());
        }
        if self.n_values.contains(&0) {
            problems.push("every n must be >= 1".into());
        }
        if !(self.horizon > 0.0 && self.horizon <= 1.0) {
            problems.push(format!("T must lie in (0, 1], got {}", self.horizon));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            problems.push(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            problems.push(format!("kappa must be positive, got {}", self.kappa));
        }
        if self
            .grid
            .iter()
            .any(|&(a, b)| !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()))
        {
            problems.push("transform arguments must be finite and non-negative".into());
        }
        if self.grid.is_empty() {
            problems.push("transform grid must not be empty".into());
        }
        if self.particle_replicates == 0 {
            problems.push("particle_replicates must be positive".into());
        }
        if self.diffusion_paths == 0 {
            problems.push("diffusion_paths must be positive".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            problems.push(format!("dt must be positive, got {}", self.dt));
        }
        if problems.is_empty() && !self.allow_large_gamma {
            let bound = self.gamma_sigma2_bound()?;
            if self.gamma_tilde() >= bound {
                problems.push(format!(
                    "gamma * sigma2 = {} is not below the admissible bound {bound:.6}; set the override flag to run anyway",
                    self.gamma_tilde()
                ));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransformEstimate {
    pub value: Complex,
    pub stderr: f64,
    pub replicates: u64,
}

/// `e^{-(x+y)(a+b) - i(x-y)(a-b)}`.
pub fn transform_integrand(x: f64, y: f64, a: f64, b: f64) -> Complex {
    Complex::exp_neg((x + y) * (a + b), (x - y) * (a - b))
}

pub fn transform_estimate(samples: &[(f64, f64)], a: f64, b: f64) -> TransformEstimate {
    let stats: ComplexStats = samples.iter().map(|&(x, y)| transform_integrand(x, y, a, b)).collect();
    TransformEstimate {
        value: stats.mean(),
        stderr: stats.stderr(),
        replicates: stats.count(),
    }
}

/// `(Ξ_{β_n(T)}, H_{β_n(T)}) / |Λ_n|` from a torus trajectory started at
/// time 0.
pub fn rescaled_totals(traj: &Trajectory, horizon: f64) -> Result<(f64, f64)> {
    let lattice = traj.final_state.lattice();
    let size = lattice
        .size()
        .ok_or_else(|| Error::misuse("rescaled totals need a torus trajectory"))? as f64;
    let beta = size * horizon;
    if traj.final_state.clock() < beta {
        return Err(Error::misuse(format!(
            "trajectory ends at {} before beta_n(T) = {beta}",
            traj.final_state.clock()
        )));
    }
    let (xi, eta) = traj.totals_at(beta)?;
    Ok((xi as f64 / size, eta as f64 / size))
}

fn particle_master(seed: u64, n: u32) -> u64 {
    derive_replicate_seed(domain_seed(seed, SeedDomain::Particle), n as u64)
}

/// Rescaled totals of every particle replicate on `Λ_n`, in index order.
pub fn particle_samples(cfg: &FssConfig, n: u32) -> Result<Vec<(f64, f64)>> {
    let lattice = Lattice::torus(cfg.dim, n)?;
    let beta = lattice.size().expect("torus") as f64 * cfg.horizon;
    let base = SimConfig::new(lattice, cfg.kappa, cfg.gamma, cfg.law.clone(), beta, 0);
    base.validate()?;
    let initial = ParticleState::constant(lattice, cfg.theta1, cfg.theta2)?;
    replicate_map(cfg.particle_replicates, particle_master(cfg.seed, n), |_, seed| {
        let sim = SimConfig { seed, ..base.clone() };
        let traj = run(&sim, initial.clone())?;
        rescaled_totals(&traj, cfg.horizon)
    })
    .into_iter()
    .collect()
}

pub fn particle_transform(cfg: &FssConfig, n: u32, a: f64, b: f64) -> Result<TransformEstimate> {
    Ok(transform_estimate(&particle_samples(cfg, n)?, a, b))
}

/// Limit-diffusion samples `(X_T, Y_T)` for the configuration.
pub fn limit_samples(cfg: &FssConfig) -> Result<Vec<(f64, f64)>> {
    Ok(limit_diffusion_samples(
        cfg.theta1 as f64,
        cfg.theta2 as f64,
        cfg.gamma_tilde(),
        cfg.horizon,
        cfg.diffusion_paths,
        cfg.dt,
        cfg.seed,
    )?
    .into_iter()
    .map(|s| (s.x, s.y))
    .collect())
}

#[allow(clippy::too_many_arguments)]
pub fn limit_transform(
    gamma_tilde: f64,
    theta1: f64,
    theta2: f64,
    horizon: f64,
    a: f64,
    b: f64,
    paths: usize,
    dt: f64,
    seed: u64,
) -> Result<TransformEstimate> {
    let samples: Vec<(f64, f64)> = limit_diffusion_samples(theta1, theta2, gamma_tilde, horizon, paths, dt, seed)?
        .into_iter()
        .map(|s| (s.x, s.y))
        .collect();
    Ok(transform_estimate(&samples, a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FssRow {
    pub n: u32,
    pub a: f64,
    pub b: f64,
    pub particle: TransformEstimate,
    pub limit: TransformEstimate,
    /// `|particle - limit|`.
    pub gap: f64,
    pub combined_stderr: f64,
    /// `gap ≤ GAP_THRESHOLD + 3·combined_stderr`.
    pub within_threshold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FssReport {
    pub rows: Vec<FssRow>,
    pub gamma_sigma2: f64,
    pub gamma_sigma2_bound: f64,
    /// Sample means of the rescaled totals per `n`, for the martingale check.
    pub mean_totals: Vec<(u32, f64, f64, f64, f64)>,
    pub all_within_threshold: bool,
    /// For every `(a, b)`, the gap at each `n` is not larger than at the
    /// previous `n` beyond three combined standard errors.
    pub trend_ok: bool,
}

pub fn fss_compare(cfg: &FssConfig) -> Result<FssReport> {
    cfg.validate()?;
    let bound = cfg.gamma_sigma2_bound()?;
    let limit = limit_samples(cfg)?;
    let mut rows = Vec::new();
    let mut mean_totals = Vec::new();
    for &n in &cfg.n_values {
        let samples = particle_samples(cfg, n)?;
        let xs: crate::stats::SampleStats = samples.iter().map(|s| s.0).collect();
        let ys: crate::stats::SampleStats = samples.iter().map(|s| s.1).collect();
        mean_totals.push((n, xs.mean(), xs.stderr(), ys.mean(), ys.stderr()));
        for &(a, b) in &cfg.grid {
            let p = transform_estimate(&samples, a, b);
            let l = transform_estimate(&limit, a, b);
            let gap = p.value.sub(&l.value).abs();
            let combined = p.stderr.hypot(l.stderr);
            rows.push(FssRow {
                n,
                a,
                b,
                particle: p,
                limit: l,
                gap,
                combined_stderr: combined,
                within_threshold: gap <= GAP_THRESHOLD + 3.0 * combined,
            });
        }
    }
    let k = cfg.grid.len();
    let mut trend_ok = true;
    for j in 0..k {
        let series: Vec<&FssRow> = rows.iter().skip(j).step_by(k).collect();
        for w in series.windows(2) {
            if w[1].gap > w[0].gap + 3.0 * w[0].combined_stderr.hypot(w[1].combined_stderr) {
                trend_ok = false;
            }
        }
    }
    Ok(FssReport {
        all_within_threshold: rows.iter().all(|r| r.within_threshold),
        rows,
        gamma_sigma2: cfg.gamma_tilde(),
        gamma_sigma2_bound: bound,
        mean_totals,
        trend_ok,
    })
}
