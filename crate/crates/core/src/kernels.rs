//! Transition probabilities and Green functions of the continuous-time
//! nearest-neighbor walk with jump rate `κ`.
//!
//! On the torus the generator is diagonal in the real cosine basis, with
//! eigenvalue `λ_k = -κ (1 - d⁻¹ Σ_i cos(2π k_i / L))` for each Fourier mode
//! `k ∈ [-n, n]^d`. Everything on the torus is evaluated from that
//! representation, so there is no truncation error:
//!
//! ```text
//! p_t(x) = |Λ|⁻¹ Σ_k e^{λ_k t} Π_i cos(2π k_i x_i / L)
//! g_t(x) = |Λ|⁻¹ Σ_k w_k(t)    Π_i cos(2π k_i x_i / L),   w_k(t) = ∫₀ᵗ e^{λ_k s} ds
//! ```
//!
//! On `Z^d` (d ≥ 3) only `g_∞` is provided, by Fourier quadrature on a mesh
//! graded toward the integrable singularity at `θ = 0`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::{Lattice, Site};

#[derive(Debug, Clone)]
pub struct KernelTable {
    lattice: Lattice,
    kappa: f64,
    side: usize,
    eigenvalues: Vec<f64>,
    /// Per-mode axis indices in `0..side`, `dim` entries per mode.
    mode_digits: Vec<u32>,
    /// `cos(2π r / L)` for `r in 0..L`, made exactly even in `r`.
    cos_by_residue: Vec<f64>,
}

impl KernelTable {
    pub fn new(lattice: Lattice, kappa: f64) -> Result<Self> {
        let (Some(side), Some(size)) = (lattice.side(), lattice.size()) else {
            return Err(Error::misuse("kernel tables are built on a torus"));
        };
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::misuse(format!("jump rate must be positive, got {kappa}")));
        }
        let dim = lattice.dim();
        let cos_by_residue: Vec<f64> = (0..side)
            .map(|r| {
                let r = r.min(side - r);
                (2.0 * PI * r as f64 / side as f64).cos()
            })
            .collect();
        // 1 - cos, so the zero mode is exactly zero rather than 1 - 1.
        let one_minus_cos: Vec<f64> = (0..side)
            .map(|r| {
                let r = r.min(side - r);
                2.0 * (PI * r as f64 / side as f64).sin().powi(2)
            })
            .collect();
        let n = (side / 2) as i64;
        let mut mode_digits = Vec::with_capacity(size * dim);
        let mut eigenvalues = Vec::with_capacity(size);
        for m in 0..size {
            let k = lattice.site_at(m)?;
            let mut acc = 0.0;
            for &c in k.coords() {
                mode_digits.push((c as i64 + n) as u32);
                acc += one_minus_cos[(c as i64).rem_euclid(side as i64) as usize];
            }
            eigenvalues.push(-kappa * acc / dim as f64);
        }
        Ok(KernelTable {
            lattice,
            kappa,
            side,
            eigenvalues,
            mode_digits,
            cos_by_residue,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Eigenvalues of the wrapped generator, indexed like the sites.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    fn size(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Σ_k weight(λ_k) Π_i cos(2π k_i x_i / L) / |Λ|`.
    fn mode_sum(&self, x: &Site, weight: impl Fn(f64) -> f64) -> Result<f64> {
        if !self.lattice.contains(x) {
            return Err(Error::misuse(format!("site {x:?} is not on the torus")));
        }
        let dim = self.lattice.dim();
        let side = self.side as i64;
        let n = side / 2;
        // Per-axis factor for every axis index k in 0..L.
        let axis_cos: Vec<Vec<f64>> = x
            .coords()
            .iter()
            .map(|&xi| {
                (0..side)
                    .map(|k| self.cos_by_residue[((k - n) * xi as i64).rem_euclid(side) as usize])
                    .collect()
            })
            .collect();
        let mut sum = 0.0;
        for (m, &lam) in self.eigenvalues.iter().enumerate() {
            let digits = &self.mode_digits[m * dim..(m + 1) * dim];
            let mut prod = weight(lam);
            for (axis, &k) in digits.iter().enumerate() {
                prod *= axis_cos[axis][k as usize];
            }
            sum += prod;
        }
        Ok(sum / self.size() as f64)
    }

    /// Transition probability `p_t(0, x)`.
    pub fn p_t(&self, t: f64, x: &Site) -> Result<f64> {
        check_time(t)?;
        self.mode_sum(x, |lam| (lam * t).exp())
    }

    /// Green function `g_t(x) = ∫₀ᵗ p_s(x) ds`.
    pub fn green_t(&self, t: f64, x: &Site) -> Result<f64> {
        check_time(t)?;
        self.mode_sum(x, |lam| integrated_exp(lam, t))
    }

    /// `p_t(0, x)` for every site, in site-index order.
    pub fn p_t_field(&self, t: f64) -> Result<Vec<f64>> {
        check_time(t)?;
        self.lattice.sites().map(|x| self.p_t(t, &x)).collect()
    }

    pub fn green_field(&self, t: f64) -> Result<Vec<f64>> {
        check_time(t)?;
        self.lattice.sites().map(|x| self.green_t(t, &x)).collect()
    }

    /// `(P_t f)(x) = Σ_y p_t(x - y) f(y)`.
    pub fn apply_semigroup(&self, t: f64, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.size() {
            return Err(Error::misuse(format!(
                "field has {} entries, torus has {}",
                f.len(),
                self.size()
            )));
        }
        let kernel = self.p_t_field(t)?;
        let sites: Vec<Site> = self.lattice.sites().collect();
        let mut out = vec![0.0; f.len()];
        for (i, x) in sites.iter().enumerate() {
            out[i] = sites
                .iter()
                .zip(f)
                .map(|(y, fy)| {
                    let diff = self.lattice.difference(x, y);
                    kernel[self.lattice.site_index(&diff).expect("on torus")] * fy
                })
                .sum();
        }
        Ok(out)
    }

    /// Dense wrapped generator `Q^n`, row-major over site indices.
    pub fn q_matrix(&self) -> Vec<f64> {
        let size = self.size();
        let dim = self.lattice.dim();
        let table = self.lattice.neighbor_table().expect("torus");
        let mut q = vec![0.0; size * size];
        for i in 0..size {
            q[i * size + i] -= self.kappa;
            for &j in &table[i * 2 * dim..(i + 1) * 2 * dim] {
                q[i * size + j] += self.kappa / (2 * dim) as f64;
            }
        }
        q
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::misuse(format!(
            "time must be a finite non-negative number, got {t}"
        )))
    }
}

/// `∫₀ᵗ e^{λ s} ds`, with the zero mode handled exactly.
fn integrated_exp(lam: f64, t: f64) -> f64 {
    if lam == 0.0 {
        t
    } else {
        (lam * t).exp_m1() / lam
    }
}

/// Largest admissible `γσ²` for the finite system scheme given `g_∞(0)`:
/// `1 / (√(3⁵) (g_∞(0)/2 + 1))`.
pub fn max_gamma_sigma2(g_inf_0: f64) -> f64 {
    1.0 / (243f64.sqrt() * (0.5 * g_inf_0 + 1.0))
}

/// Default tolerance for [`green_infinity_zd`].
pub const GREEN_TOLERANCE: f64 = 1e-6;

/// `g_∞(x)` for the rate-`κ` nearest-neighbor walk on `Z^d`, `d ≥ 3`:
///
/// ```text
/// g_∞(x) = π^{-d} ∫_{[0,π]^d} Π_i cos(x_i θ_i) / (κ (1 - d⁻¹ Σ_i cos θ_i)) dθ
/// ```
///
/// The cube is cut into a tensor mesh that halves toward `θ = 0` on every
/// axis. Each box gets a tensor Gauss-Legendre rule whose order is raised
/// until two successive orders agree; the box touching the origin is
/// dropped once its size makes its contribution negligible.
pub fn green_infinity_zd(dim: usize, kappa: f64, x: &Site, tolerance: f64) -> Result<f64> {
    if dim <= 2 {
        return Err(Error::Divergent { dim });
    }
    if x.dim() != dim {
        return Err(Error::misuse(format!("site {x:?} is not in dimension {dim}")));
    }
    if !(kappa > 0.0 && tolerance > 0.0) {
        return Err(Error::misuse("kappa and tolerance must be positive"));
    }
    let d = dim as f64;
    // Near zero the integrand is ~ 2d / (κ |θ|²). Its integral over the
    // corner box [0, ε]^d is bounded by the octant ball of radius ε√d.
    let octant_sphere = unit_sphere_area(dim) / 2f64.powi(dim as i32);
    let corner_coeff =
        2.0 * d / kappa / PI.powi(dim as i32) * octant_sphere * d.sqrt().powi(dim as i32 - 2) / (d - 2.0);
    let eps = (0.25 * tolerance / corner_coeff).powf(1.0 / (d - 2.0));
    let levels = (PI / eps).log2().ceil().max(1.0) as usize;

    let mut breaks = vec![0.0];
    breaks.extend((0..=levels).rev().map(|j| PI * 0.5f64.powi(j as i32)));

    let mut order = 6;
    let mut previous = graded_integral(dim, kappa, x, &breaks, order);
    loop {
        order += 4;
        let current = graded_integral(dim, kappa, x, &breaks, order);
        if (current - previous).abs() < 0.5 * tolerance || order >= 40 {
            return Ok(current);
        }
        previous = current;
    }
}

fn unit_sphere_area(dim: usize) -> f64 {
    // S_{d-1} = 2 π^{d/2} / Γ(d/2), tabulated for the supported range.
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        4 => 2.0 * PI * PI,
        _ => unreachable!("dimension bounded by MAX_DIM"),
    }
}

struct AxisCell {
    /// `1 - cos θ` as `2 sin²(θ/2)`, exact near `θ = 0`.
    one_minus_cos: Vec<f64>,
    cos_x_theta: Vec<f64>,
    weights: Vec<f64>,
}

fn graded_integral(dim: usize, kappa: f64, x: &Site, breaks: &[f64], order: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(order);
    let axes: Vec<Vec<AxisCell>> = x
        .coords()
        .iter()
        .map(|&xi| {
            breaks
                .windows(2)
                .map(|w| {
                    let (a, b) = (w[0], w[1]);
                    let half = 0.5 * (b - a);
                    let mid = 0.5 * (a + b);
                    let thetas: Vec<f64> = nodes.iter().map(|s| mid + half * s).collect();
                    AxisCell {
                        one_minus_cos: thetas.iter().map(|t| 2.0 * (0.5 * t).sin().powi(2)).collect(),
                        cos_x_theta: thetas.iter().map(|t| (xi as f64 * t).cos()).collect(),
                        weights: weights.iter().map(|w| w * half).collect(),
                    }
                })
                .collect()
        })
        .collect();

    let cells = breaks.len() - 1;
    let d = dim as f64;
    let mut total = 0.0;
    let mut cell_idx = vec![0usize; dim];
    loop {
        if cell_idx.iter().any(|&c| c != 0) {
            total += box_integral(&axes, &cell_idx, order, kappa, d);
        }
        // odometer over boxes
        let mut axis = 0;
        loop {
            if axis == dim {
                return total / PI.powi(dim as i32);
            }
            cell_idx[axis] += 1;
            if cell_idx[axis] < cells {
                break;
            }
            cell_idx[axis] = 0;
            axis += 1;
        }
    }
}

fn box_integral(axes: &[Vec<AxisCell>], cell_idx: &[usize], order: usize, kappa: f64, d: f64) -> f64 {
    let dim = cell_idx.len();
    let cells: Vec<&AxisCell> = (0..dim).map(|a| &axes[a][cell_idx[a]]).collect();
    let mut node = vec![0usize; dim];
    let mut sum = 0.0;
    loop {
        let mut deficit = 0.0;
        let mut numer = 1.0;
        let mut w = 1.0;
        for (a, c) in cells.iter().enumerate() {
            deficit += c.one_minus_cos[node[a]];
            numer *= c.cos_x_theta[node[a]];
            w *= c.weights[node[a]];
        }
        sum += w * numer / (kappa * deficit / d);
        let mut a = 0;
        loop {
            if a == dim {
                return sum;
            }
            node[a] += 1;
            if node[a] < order {
                break;
            }
            node[a] = 0;
            a += 1;
        }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let m = order.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp;
        loop {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..order {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = order as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[order - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(d: usize, n: u32, kappa: f64) -> KernelTable {
        KernelTable::new(Lattice::torus(d, n).unwrap(), kappa).unwrap()
    }

    fn s(c: &[i32]) -> Site {
        Site::new(c)
    }

    // 3-cycle with rate κ = 1: Q = [[-1, ½, ½], ...] has spectrum {0, -3/2, -3/2}.
    #[test]
    fn eigenvalues_of_three_cycle() {
        let t = table(1, 1, 1.0);
        let mut ev = t.eigenvalues().to_vec();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((ev[0] + 1.5).abs() < 1e-15);
        assert!((ev[1] + 1.5).abs() < 1e-15);
        assert_eq!(ev[2], 0.0);
    }

    #[test]
    fn eigenvalue_at_diagonal_mode_d2() {
        let t = table(2, 1, 1.0);
        let lat = t.lattice();
        let idx = lat.site_index(&s(&[1, 1])).unwrap();
        // -(1 - cos(2π/3)) = -3/2
        assert!((t.eigenvalues()[idx] + 1.5).abs() < 1e-14);
    }

    #[test]
    fn zero_mode_is_exactly_zero() {
        for (d, n, kappa) in [(1, 3, 0.7), (2, 2, 2.0), (3, 1, 1.0)] {
            let t = table(d, n, kappa);
            let zero = t.lattice().site_index(&Site::origin(d)).unwrap();
            assert_eq!(t.eigenvalues()[zero], 0.0);
            assert!(t.eigenvalues().iter().all(|&l| l <= 0.0));
        }
    }

    #[test]
    fn p_t_values() {
        let t = table(1, 1, 1.0);
        assert_eq!(t.p_t(0.0, &s(&[0])).unwrap(), 1.0);
        assert!(t.p_t(0.0, &s(&[1])).unwrap().abs() < 1e-15);
        let expected = (1.0 + 2.0 * (-1.5f64).exp()) / 3.0;
        assert!((t.p_t(1.0, &s(&[0])).unwrap() - expected).abs() < 1e-14);
        assert!((expected - 0.482087).abs() < 1e-6);
        assert!(t.p_t(-1.0, &s(&[0])).is_err());
        assert!(t.p_t(1.0, &s(&[2])).is_err());
    }

    #[test]
    fn p_t_equilibrates() {
        let t = table(2, 2, 1.0);
        for x in t.lattice().sites() {
            assert!((t.p_t(500.0, &x).unwrap() - 1.0 / 25.0).abs() < 1e-12);
        }
    }

    #[test]
    fn p_t_is_exactly_symmetric() {
        let t = table(2, 3, 1.3);
        for x in t.lattice().sites() {
            assert_eq!(t.p_t(0.7, &x).unwrap(), t.p_t(0.7, &x.negated()).unwrap());
        }
    }

    // Independent oracle: Simpson quadrature of the closed form
    // p_s(0) = (1 + 2 e^{-3s/2}) / 3 on the 3-cycle.
    #[test]
    fn green_matches_quadrature_on_three_cycle() {
        let t = table(1, 1, 1.0);
        let p = |s: f64| (1.0 + 2.0 * (-1.5 * s).exp()) / 3.0;
        let n = 2000;
        let h = 1.0 / n as f64;
        let simpson: f64 = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                w * p(i as f64 * h)
            })
            .sum::<f64>()
            * h
            / 3.0;
        let g = t.green_t(1.0, &s(&[0])).unwrap();
        assert!((g - simpson).abs() < 1e-12, "{g} vs {simpson}");
        // (1/3)(1 + 2 (1 - e^{-3/2}) / (3/2))
        assert!((g - 0.678609).abs() < 1e-6);
        assert_eq!(t.green_t(0.0, &s(&[0])).unwrap(), 0.0);
    }

    #[test]
    fn green_is_monotone_and_peaked_at_origin() {
        let t = table(2, 2, 1.0);
        let times = [0.0, 0.1, 0.5, 1.0, 3.0, 10.0];
        for x in t.lattice().sites() {
            let values: Vec<f64> = times.iter().map(|&s| t.green_t(s, &x).unwrap()).collect();
            assert!(values.windows(2).all(|w| w[1] >= w[0] - 1e-15));
            for &s in &times {
                assert!(t.green_t(s, &Site::origin(2)).unwrap() >= t.green_t(s, &x).unwrap() - 1e-15);
            }
        }
    }

    #[test]
    fn green_identity_at_every_site() {
        for (d, n, kappa) in [(1, 2, 1.0), (2, 1, 0.5), (3, 1, 2.0)] {
            let t = table(d, n, kappa);
            let lat = *t.lattice();
            for time in [0.1, 1.0, 10.0] {
                for x in lat.sites() {
                    let avg: f64 = lat
                        .neighbors(&x)
                        .unwrap()
                        .iter()
                        .map(|y| t.green_t(time, y).unwrap())
                        .sum::<f64>()
                        / (2 * d) as f64;
                    let delta = if x == Site::origin(d) { 1.0 } else { 0.0 };
                    let lhs = t.green_t(time, &x).unwrap() - avg;
                    let rhs = (delta - t.p_t(time, &x).unwrap()) / kappa;
                    assert!((lhs - rhs).abs() < 1e-12, "{d} {n} {time} {x:?}");
                }
            }
        }
    }

    #[test]
    fn semigroup_preserves_mass_and_constants() {
        let t = table(2, 2, 1.0);
        let constant = vec![2.5; 25];
        let out = t.apply_semigroup(0.8, &constant).unwrap();
        assert!(out.iter().all(|v| (v - 2.5).abs() < 1e-12));
        let mut delta = vec![0.0; 25];
        delta[3] = 1.0;
        let out = t.apply_semigroup(0.8, &delta).unwrap();
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(t.apply_semigroup(0.8, &delta[..5]).is_err());
    }

    #[test]
    fn q_matrix_rows_vanish() {
        let t = table(2, 1, 1.7);
        let q = t.q_matrix();
        for row in q.chunks(9) {
            assert!(row.iter().sum::<f64>().abs() < 1e-15);
        }
    }

    #[test]
    fn kernel_table_rejects_bad_inputs() {
        assert!(KernelTable::new(Lattice::infinite(3).unwrap(), 1.0).is_err());
        assert!(KernelTable::new(Lattice::torus(1, 1).unwrap(), 0.0).is_err());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(6);
        // exact through degree 11
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((integral - 2.0 / 11.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn green_infinity_rejects_recurrent_dimensions() {
        for d in 1..=2 {
            assert!(matches!(
                green_infinity_zd(d, 1.0, &Site::origin(d), 1e-6),
                Err(Error::Divergent { .. })
            ));
        }
    }

    #[test]
    fn green_infinity_scales_with_kappa() {
        let x = Site::origin(3);
        let g1 = green_infinity_zd(3, 1.0, &x, 1e-5).unwrap();
        let g2 = green_infinity_zd(3, 2.0, &x, 1e-5).unwrap();
        assert!((g1 - 2.0 * g2).abs() < 2e-5);
    }

    #[test]
    fn green_infinity_peaks_at_origin() {
        let g0 = green_infinity_zd(3, 1.0, &s(&[0, 0, 0]), 1e-5).unwrap();
        for x in [s(&[1, 0, 0]), s(&[1, 1, 0]), s(&[2, 1, 0])] {
            let gx = green_infinity_zd(3, 1.0, &x, 1e-5).unwrap();
            assert!(gx < g0 && gx > 0.0, "{x:?}: {gx}");
        }
        // Point-source identity on Z^d: g(0) - g(e_1) = 1/κ.
        let g1 = green_infinity_zd(3, 1.0, &s(&[1, 0, 0]), 1e-6).unwrap();
        assert!((g0 - g1 - 1.0).abs() < 1e-5, "{}", g0 - g1);
    }

    // Tight tolerances push the mesh to |θ| ~ 1e-8, where 1 - cos θ
    // underflows to zero if formed by subtraction.
    #[test]
    fn green_infinity_finite_at_tight_tolerance() {
        let g = green_infinity_zd(3, 1.0, &Site::origin(3), 1e-9).unwrap();
        assert!(g.is_finite());
        assert!((g - 1.516_386_059_151_978).abs() < 1e-6, "{g}");
    }

    #[test]
    fn gamma_sigma_bound_arithmetic() {
        assert!((max_gamma_sigma2(0.0) - 1.0 / 243f64.sqrt()).abs() < 1e-15);
        assert!((max_gamma_sigma2(1.5164) - 0.03649).abs() < 1e-5);
        // doubling g/2 + 1 halves the bound
        let g = 0.8;
        assert!((max_gamma_sigma2(2.0 * g + 2.0) - 0.5 * max_gamma_sigma2(g)).abs() < 1e-15);
    }
}
