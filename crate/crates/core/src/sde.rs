//! Euler-Maruyama integration of the continuous-state catalytic system on
//! the torus and of its two-dimensional limit diffusion.
//!
//! Both schemes use full truncation: diffusion coefficients are evaluated
//! at the non-negative parts of the state and the result is clipped at 0.
//! The mass removed by clipping is accumulated in `clipped`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::KernelTable;
use crate::lattice::Lattice;
use crate::seeding::{derive_replicate_seed, domain_seed, replicate_map, rng_from_seed, SeedDomain};
use crate::stats::{Complex, ComplexStats};

/// Pair of non-negative fields indexed like the torus sites.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub clock: f64,
    /// Total mass removed by clipping so far.
    pub clipped: f64,
}

impl FieldPair {
    pub fn new(u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::misuse("fields must have the same length"));
        }
        if u.iter().chain(&v).any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::misuse("fields must be finite and non-negative"));
        }
        Ok(FieldPair {
            u,
            v,
            clock: 0.0,
            clipped: 0.0,
        })
    }

    pub fn total_u(&self) -> f64 {
        self.u.iter().sum()
    }

    pub fn total_v(&self) -> f64 {
        self.v.iter().sum()
    }
}

/// State of the limit diffusion `dX = √(γ̃XY) dw¹`, `dY = √(γ̃XY) dw²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiffusionPair {
    pub x: f64,
    pub y: f64,
    pub clock: f64,
}

impl DiffusionPair {
    pub fn new(x: f64, y: f64) -> Self {
        DiffusionPair { x, y, clock: 0.0 }
    }
}

/// Integrator for the field system with the wrapped generator applied as a
/// sparse stencil.
#[derive(Debug, Clone)]
pub struct DpIntegrator {
    kappa: f64,
    degree: usize,
    neighbors: Vec<usize>,
    drift_u: Vec<f64>,
    drift_v: Vec<f64>,
}

impl DpIntegrator {
    pub fn new(table: &KernelTable) -> Result<Self> {
        let lattice = table.lattice();
        let neighbors = lattice.neighbor_table()?;
        let size = lattice.size().expect("torus");
        Ok(DpIntegrator {
            kappa: table.kappa(),
            degree: 2 * lattice.dim(),
            neighbors,
            drift_u: vec![0.0; size],
            drift_v: vec![0.0; size],
        })
    }

    fn check(&self, state: &FieldPair, gamma_tilde: f64, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::misuse(format!("dt must be positive, got {dt}")));
        }
        if !(gamma_tilde >= 0.0 && gamma_tilde.is_finite()) {
            return Err(Error::misuse(format!(
                "gamma_tilde must be non-negative, got {gamma_tilde}"
            )));
        }
        if self.kappa * dt >= 1.0 {
            return Err(Error::Stability {
                product: self.kappa * dt,
            });
        }
        if state.u.len() != self.drift_u.len() || state.v.len() != self.drift_v.len() {
            return Err(Error::misuse("field length does not match the torus"));
        }
        Ok(())
    }

    /// One explicit step of length `dt`.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        state: &mut FieldPair,
        gamma_tilde: f64,
        dt: f64,
        rng: &mut R,
    ) -> Result<()> {
        self.check(state, gamma_tilde, dt)?;
        let w = self.kappa / self.degree as f64;
        for (i, nb) in self.neighbors.chunks_exact(self.degree).enumerate() {
            let (mut su, mut sv) = (0.0, 0.0);
            for &j in nb {
                su += state.u[j];
                sv += state.v[j];
            }
            self.drift_u[i] = w * su - self.kappa * state.u[i];
            self.drift_v[i] = w * sv - self.kappa * state.v[i];
        }
        let sqrt_dt = dt.sqrt();
        for i in 0..state.u.len() {
            let (u, v) = (state.u[i].max(0.0), state.v[i].max(0.0));
            let sigma = (gamma_tilde * u * v).sqrt() * sqrt_dt;
            let zu: f64 = rng.sample(StandardNormal);
            let zv: f64 = rng.sample(StandardNormal);
            let nu = state.u[i] + self.drift_u[i] * dt + sigma * zu;
            let nv = state.v[i] + self.drift_v[i] * dt + sigma * zv;
            state.clipped += (-nu).max(0.0) + (-nv).max(0.0);
            state.u[i] = nu.max(0.0);
            state.v[i] = nv.max(0.0);
        }
        state.clock += dt;
        Ok(())
    }

    /// Integrate to `clock + t` with `⌈t/dt⌉` equal steps.
    pub fn advance<R: Rng + ?Sized>(
        &mut self,
        state: &mut FieldPair,
        gamma_tilde: f64,
        t: f64,
        dt: f64,
        rng: &mut R,
    ) -> Result<()> {
        let (steps, h) = step_plan(t, dt)?;
        let start = state.clock;
        for _ in 0..steps {
            self.step(state, gamma_tilde, h, rng)?;
        }
        state.clock = start + t;
        Ok(())
    }
}

/// Number of steps and step length covering `t` with steps `≤ dt`.
fn step_plan(t: f64, dt: f64) -> Result<(u64, f64)> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::misuse(format!("time must be finite and non-negative, got {t}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::misuse(format!("dt must be positive, got {dt}")));
    }
    if t == 0.0 {
        return Ok((0, dt));
    }
    // Tolerate t/dt a hair above an integer from decimal round-off.
    let steps = ((t / dt) * (1.0 - 1e-12)).ceil().max(1.0) as u64;
    Ok((steps, t / steps as f64))
}

/// One step of the field system. Builds the stencil on every call; use
/// [`DpIntegrator`] in loops.
pub fn dp_step<R: Rng + ?Sized>(
    state: &mut FieldPair,
    table: &KernelTable,
    gamma_tilde: f64,
    dt: f64,
    rng: &mut R,
) -> Result<()> {
    DpIntegrator::new(table)?.step(state, gamma_tilde, dt, rng)
}

/// One step of the limit diffusion. Returns the mass clipped in this step.
pub fn limit_diffusion_step<R: Rng + ?Sized>(state: &mut DiffusionPair, gamma_tilde: f64, dt: f64, rng: &mut R) -> f64 {
    let sigma = (gamma_tilde * state.x.max(0.0) * state.y.max(0.0) * dt).sqrt();
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    let nx = state.x + sigma * z1;
    let ny = state.y + sigma * z2;
    state.x = nx.max(0.0);
    state.y = ny.max(0.0);
    state.clock += dt;
    (-nx).max(0.0) + (-ny).max(0.0)
}

/// Limit diffusion from `(x0, y0)` to time `t`. Returns the final state and
/// the clipped mass.
pub fn limit_diffusion_path<R: Rng + ?Sized>(
    x0: f64,
    y0: f64,
    gamma_tilde: f64,
    t: f64,
    dt: f64,
    rng: &mut R,
) -> Result<(DiffusionPair, f64)> {
    let (steps, h) = step_plan(t, dt)?;
    let mut state = DiffusionPair::new(x0, y0);
    let mut clipped = 0.0;
    for _ in 0..steps {
        clipped += limit_diffusion_step(&mut state, gamma_tilde, h, rng);
    }
    state.clock = t;
    Ok((state, clipped))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `H(φ, ψ, φ̃, ψ̃) = exp(-⟨φ+ψ, φ̃+ψ̃⟩ - i⟨φ-ψ, φ̃-ψ̃⟩)`.
pub fn duality_functional(phi: &[f64], psi: &[f64], phi_t: &[f64], psi_t: &[f64]) -> Result<Complex> {
    let n = phi.len();
    if psi.len() != n || phi_t.len() != n || psi_t.len() != n {
        return Err(Error::misuse("duality functional needs four fields of equal length"));
    }
    // Expanded so each inner product is of non-negative vectors.
    let (a, b, c, d) = (dot(phi, phi_t), dot(phi, psi_t), dot(psi, phi_t), dot(psi, psi_t));
    Ok(Complex::exp_neg(a + b + c + d, a - b - c + d))
}

#[derive(Debug, Clone)]
pub struct DualityConfig {
    pub lattice: Lattice,
    pub kappa: f64,
    pub gamma_tilde: f64,
    /// Initial pair evolved on the left-hand side.
    pub left: (Vec<f64>, Vec<f64>),
    /// Initial pair evolved on the right-hand side.
    pub right: (Vec<f64>, Vec<f64>),
    pub t: f64,
    pub replicates: usize,
    pub dt: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualityRecord {
    /// Estimate of `E H(u_t, v_t, ũ₀, ṽ₀)`.
    pub lhs: Complex,
    /// Estimate of `E H(u₀, v₀, ũ_t, ṽ_t)`.
    pub rhs: Complex,
    pub lhs_stderr: f64,
    pub rhs_stderr: f64,
    pub replicates: u64,
    /// Largest per-path clipped mass relative to the initial total mass.
    pub max_clipped_fraction: f64,
}

impl DualityRecord {
    pub fn gap(&self) -> f64 {
        self.lhs.sub(&self.rhs).abs()
    }

    pub fn combined_stderr(&self) -> f64 {
        self.lhs_stderr.hypot(self.rhs_stderr)
    }
}

fn check_pair(lattice: &Lattice, pair: &(Vec<f64>, Vec<f64>)) -> Result<FieldPair> {
    let size = lattice
        .size()
        .ok_or_else(|| Error::misuse("duality check runs on a torus"))?;
    if pair.0.len() != size || pair.1.len() != size {
        return Err(Error::misuse(format!("initial fields must have {size} entries")));
    }
    FieldPair::new(pair.0.clone(), pair.1.clone())
}

/// Monte Carlo estimates of both sides of the self-duality relation from
/// independent Euler paths.
pub fn self_duality_check(cfg: &DualityConfig) -> Result<DualityRecord> {
    if cfg.replicates == 0 {
        return Err(Error::Config(vec!["replicates must be positive".into()]));
    }
    let table = KernelTable::new(cfg.lattice, cfg.kappa)?;
    let left = check_pair(&cfg.lattice, &cfg.left)?;
    let right = check_pair(&cfg.lattice, &cfg.right)?;
    // Validate step parameters once so per-path errors cannot occur.
    let (steps, h) = step_plan(cfg.t, cfg.dt)?;
    if steps > 0 {
        DpIntegrator::new(&table)?.check(&left, cfg.gamma_tilde, h)?;
    }

    let side = |start: &FieldPair, fixed: &FieldPair, domain: SeedDomain, evolved_first: bool| {
        let mass = start.total_u() + start.total_v();
        let master = domain_seed(cfg.seed, domain);
        let results = replicate_map(cfg.replicates, master, |_, seed| {
            let mut rng = rng_from_seed(seed);
            let mut integ = DpIntegrator::new(&table).expect("torus");
            let mut s = start.clone();
            integ
                .advance(&mut s, cfg.gamma_tilde, cfg.t, cfg.dt, &mut rng)
                .expect("validated");
            let h = if evolved_first {
                duality_functional(&s.u, &s.v, &fixed.u, &fixed.v)
            } else {
                duality_functional(&fixed.u, &fixed.v, &s.u, &s.v)
            }
            .expect("lengths match");
            (h, s.clipped)
        });
        let stats: ComplexStats = results.iter().map(|r| r.0).collect();
        let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
        let frac = if mass > 0.0 { worst / mass } else { 0.0 };
        (stats, frac)
    };
    let (ls, lf) = side(&left, &right, SeedDomain::DualityLeft, true);
    let (rs, rf) = side(&right, &left, SeedDomain::DualityRight, false);
    Ok(DualityRecord {
        lhs: ls.mean(),
        rhs: rs.mean(),
        lhs_stderr: ls.stderr(),
        rhs_stderr: rs.stderr(),
        replicates: cfg.replicates as u64,
        max_clipped_fraction: lf.max(rf),
    })
}

/// Both sides without noise, with the exact semigroup in place of the
/// Euler flow: `H(P_t u₀, P_t v₀, ũ₀, ṽ₀)` and `H(u₀, v₀, P_t ũ₀, P_t ṽ₀)`.
pub fn deterministic_duality_sides(
    table: &KernelTable,
    t: f64,
    left: (&[f64], &[f64]),
    right: (&[f64], &[f64]),
) -> Result<(Complex, Complex)> {
    let (pu, pv) = (table.apply_semigroup(t, left.0)?, table.apply_semigroup(t, left.1)?);
    let (pu_t, pv_t) = (table.apply_semigroup(t, right.0)?, table.apply_semigroup(t, right.1)?);
    Ok((
        duality_functional(&pu, &pv, right.0, right.1)?,
        duality_functional(left.0, left.1, &pu_t, &pv_t)?,
    ))
}

/// Final states of `paths` independent limit-diffusion paths, in index
/// order. Seeds come from the diffusion domain of `seed`.
pub fn limit_diffusion_samples(
    x0: f64,
    y0: f64,
    gamma_tilde: f64,
    t: f64,
    paths: usize,
    dt: f64,
    seed: u64,
) -> Result<Vec<DiffusionPair>> {
    step_plan(t, dt)?;
    let master = domain_seed(seed, SeedDomain::Diffusion);
    Ok(replicate_map(paths, master, |_, s| {
        let mut rng = rng_from_seed(s);
        limit_diffusion_path(x0, y0, gamma_tilde, t, dt, &mut rng)
            .expect("validated")
            .0
    }))
}

/// Seed for the `i`-th path of a stand-alone field-system run.
pub fn field_path_seed(seed: u64, index: u64) -> u64 {
    derive_replicate_seed(domain_seed(seed, SeedDomain::Diffusion), index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::SampleStats;
    use proptest::prelude::*;

    fn table(d: usize, n: u32) -> KernelTable {
        KernelTable::new(Lattice::torus(d, n).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn constants_are_preserved_without_noise() {
        let tab = table(2, 1);
        let mut s = FieldPair::new(vec![2.5; 9], vec![0.75; 9]).unwrap();
        let mut integ = DpIntegrator::new(&tab).unwrap();
        let mut rng = rng_from_seed(1);
        integ.advance(&mut s, 0.0, 1.0, 1e-2, &mut rng).unwrap();
        assert!(s.u.iter().all(|&x| x == 2.5));
        assert!(s.v.iter().all(|&x| x == 0.75));
        assert!((s.clock - 1.0).abs() < 1e-15);
    }

    #[test]
    fn heat_flow_matches_semigroup() {
        let tab = table(1, 3);
        let mut u0 = vec![0.0; 7];
        u0[3] = 1.0;
        let exact = tab.apply_semigroup(1.0, &u0).unwrap();
        let mut errs = Vec::new();
        for dt in [1e-2, 1e-3] {
            let mut s = FieldPair::new(u0.clone(), vec![0.0; 7]).unwrap();
            DpIntegrator::new(&tab)
                .unwrap()
                .advance(&mut s, 0.0, 1.0, dt, &mut rng_from_seed(0))
                .unwrap();
            let err = s.u.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            errs.push(err);
        }
        assert!(errs[1] < 1e-3, "{errs:?}");
        // first order: ten times smaller step, roughly ten times smaller error
        assert!(errs[0] / errs[1] > 7.0 && errs[0] / errs[1] < 13.0, "{errs:?}");
    }

    #[test]
    fn step_rejects_unstable_dt() {
        let tab = KernelTable::new(Lattice::torus(1, 1).unwrap(), 4.0).unwrap();
        let mut s = FieldPair::new(vec![1.0; 3], vec![1.0; 3]).unwrap();
        let err = dp_step(&mut s, &tab, 0.1, 0.25, &mut rng_from_seed(0)).unwrap_err();
        assert!(matches!(err, Error::Stability { product } if product == 1.0));
        assert!(dp_step(&mut s, &tab, 0.1, 0.2, &mut rng_from_seed(0)).is_ok());
        assert!(dp_step(&mut s, &tab, -0.1, 0.2, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn total_mass_is_a_martingale() {
        let tab = table(1, 1);
        let u0 = vec![1.0, 0.5, 2.0];
        let v0 = vec![1.0, 1.5, 0.0];
        let paths = 4000;
        let (mut su, mut sv) = (SampleStats::new(), SampleStats::new());
        let mut integ = DpIntegrator::new(&tab).unwrap();
        for i in 0..paths {
            let mut s = FieldPair::new(u0.clone(), v0.clone()).unwrap();
            integ
                .advance(&mut s, 0.5, 1.0, 1e-2, &mut rng_from_seed(field_path_seed(3, i)))
                .unwrap();
            su.push(s.total_u());
            sv.push(s.total_v());
        }
        assert!(su.z_score(3.5).abs() < 4.0, "{}", su.z_score(3.5));
        assert!(sv.z_score(2.5).abs() < 4.0, "{}", sv.z_score(2.5));
    }

    #[test]
    fn zero_is_absorbing_for_limit_diffusion() {
        let mut rng = rng_from_seed(5);
        let (s, clipped) = limit_diffusion_path(0.0, 1.7, 0.5, 2.0, 1e-3, &mut rng).unwrap();
        assert_eq!((s.x, s.y, clipped), (0.0, 1.7, 0.0));
        let (s, _) = limit_diffusion_path(0.3, 1.7, 0.0, 2.0, 1e-3, &mut rng).unwrap();
        assert_eq!((s.x, s.y), (0.3, 1.7));
    }

    // X, Y are martingales with independent drivers, so E X_T = X_0 and
    // E X_T Y_T = X_0 Y_0.
    #[test]
    fn limit_diffusion_moments() {
        let samples = limit_diffusion_samples(1.0, 1.0, 0.03, 1.0, 20_000, 1e-2, 11).unwrap();
        let x: SampleStats = samples.iter().map(|s| s.x).collect();
        let xy: SampleStats = samples.iter().map(|s| s.x * s.y).collect();
        assert!(x.z_score(1.0).abs() < 4.0);
        assert!(xy.z_score(1.0).abs() < 4.0);
        assert!(samples.iter().all(|s| s.x >= 0.0 && s.y >= 0.0));
    }

    #[test]
    fn step_plan_covers_horizon() {
        assert_eq!(step_plan(1.0, 1e-3).unwrap().0, 1000);
        assert_eq!(step_plan(0.2, 1e-3).unwrap().0, 200);
        let (n, h) = step_plan(1.05, 0.1).unwrap();
        assert_eq!(n, 11);
        assert!(h <= 0.1);
        assert_eq!(step_plan(0.0, 0.1).unwrap().0, 0);
        assert!(step_plan(1.0, 0.0).is_err());
    }

    #[test]
    fn duality_functional_examples() {
        let z = vec![0.0; 3];
        assert_eq!(duality_functional(&z, &z, &z, &z).unwrap(), Complex::ONE);
        let phi = [1.0, 0.0, 2.0];
        let ut = [0.5, 0.25, 0.125];
        let h = duality_functional(&phi, &phi, &ut, &ut).unwrap();
        assert_eq!(h.im, 0.0);
        assert!((h.re - (-4.0f64 * 0.75).exp()).abs() < 1e-15);
        assert!(duality_functional(&phi, &phi, &ut, &[0.0]).is_err());
    }

    #[test]
    fn time_zero_duality_is_exact() {
        let lat = Lattice::torus(1, 1).unwrap();
        let cfg = DualityConfig {
            lattice: lat,
            kappa: 1.0,
            gamma_tilde: 0.3,
            left: (vec![1.0, 0.0, 0.5], vec![0.2, 0.2, 0.2]),
            right: (vec![0.1, 0.3, 0.0], vec![0.0, 0.4, 0.1]),
            t: 0.0,
            replicates: 10,
            dt: 1e-3,
            seed: 1,
        };
        let r = self_duality_check(&cfg).unwrap();
        let h = duality_functional(&cfg.left.0, &cfg.left.1, &cfg.right.0, &cfg.right.1).unwrap();
        assert_eq!(r.lhs, h);
        assert_eq!(r.rhs, h);
        assert_eq!(r.combined_stderr(), 0.0);
    }

    #[test]
    fn deterministic_sides_agree() {
        let tab = table(2, 1);
        let f = |k: usize| (0..9).map(|i| ((i * k + 1) % 5) as f64 * 0.1).collect::<Vec<_>>();
        let (l, r) = deterministic_duality_sides(&tab, 0.7, (&f(1), &f(2)), (&f(3), &f(4))).unwrap();
        assert!(l.sub(&r).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn duality_functional_is_bounded(
            f in proptest::collection::vec(0.0f64..3.0, 16)
        ) {
            let h = duality_functional(&f[0..4], &f[4..8], &f[8..12], &f[12..16]).unwrap();
            prop_assert!(h.abs() <= 1.0 + 1e-15);
        }

        #[test]
        fn fields_stay_nonnegative(seed in 0u64..1000, g in 0.0f64..5.0) {
            let tab = table(1, 1);
            let mut s = FieldPair::new(vec![0.1, 0.0, 0.3], vec![0.2, 0.05, 0.0]).unwrap();
            let mut integ = DpIntegrator::new(&tab).unwrap();
            integ.advance(&mut s, g, 0.5, 0.05, &mut rng_from_seed(seed)).unwrap();
            prop_assert!(s.u.iter().chain(&s.v).all(|&x| x >= 0.0));
            prop_assert!(s.clipped >= 0.0);
        }
    }
}
