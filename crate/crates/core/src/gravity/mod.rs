//! Free-space self-gravity on the uniform grid, rotating-frame forces and
//! the domain constant of the stability estimate.
//!
//! The discrete potential is the cell-average convolution
//!
//! ```text
//! V_i = −G h³ Σ_j ρ_j K(x_i − x_j),   K(d) = 1/|d|,  K(0) = ⟨1/|x|⟩_cell
//! ```
//!
//! and the acceleration uses the vector kernel `(x_j − x_i)/|x_j − x_i|³`
//! directly, which is exactly antisymmetric. [`solve_potential_direct`]
//! sums the kernel pairwise; [`solve_potential_fast`] applies the same
//! operator through a zero-padded FFT convolution (isolated boundaries,
//! no periodic images).

mod fft;

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{cube_inverse_power, exterior_inverse_quartic};
use crate::state::Grid;
use crate::tensor::Vec3;

pub(crate) use fft::Fft3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GravityMethod {
    /// Pairwise O(N²) summation.
    #[serde(alias = "direct")]
    Oracle,
    /// Zero-padded FFT convolution.
    #[default]
    Fast,
}

/// Potential and acceleration per cell.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PotentialField {
    pub v: Vec<f64>,
    pub g: Vec<Vec3>,
}

impl PotentialField {
    pub fn zeros(len: usize) -> Self {
        Self {
            v: vec![0.0; len],
            g: vec![[0.0; 3]; len],
        }
    }
}

/// Symmetric table of `1/|d|` and `1/|d|³` over integer offsets.
struct KernelTable {
    n: [usize; 3],
    inv_r: Vec<f64>,
    inv_r3: Vec<f64>,
}

impl KernelTable {
    fn new(n: [usize; 3]) -> Self {
        let self_cell = cube_inverse_power(1.0);
        let len = n[0] * n[1] * n[2];
        let mut inv_r = vec![0.0; len];
        let mut inv_r3 = vec![0.0; len];
        for c in 0..n[2] {
            for b in 0..n[1] {
                for a in 0..n[0] {
                    let i = a + n[0] * (b + n[1] * c);
                    let r2 = (a * a + b * b + c * c) as f64;
                    if r2 == 0.0 {
                        inv_r[i] = self_cell;
                    } else {
                        let r = r2.sqrt();
                        inv_r[i] = 1.0 / r;
                        inv_r3[i] = 1.0 / (r2 * r);
                    }
                }
            }
        }
        Self { n, inv_r, inv_r3 }
    }

    #[inline]
    fn index(&self, d: [i64; 3]) -> usize {
        d[0].unsigned_abs() as usize
            + self.n[0] * (d[1].unsigned_abs() as usize + self.n[1] * d[2].unsigned_abs() as usize)
    }
}

/// Spectra of the combined kernels `K_V + i K_x` and `K_y + i K_z` on the
/// doubled grid, plus the transform plan.
struct FastKernel {
    fft: Fft3,
    spec_a: Vec<Complex64>,
    spec_b: Vec<Complex64>,
}

#[inline]
fn wrap(q: usize, n: usize, p: usize) -> Option<i64> {
    if q < n {
        Some(q as i64)
    } else if q > p - n {
        Some(q as i64 - p as i64)
    } else {
        None
    }
}

impl FastKernel {
    fn new(table: &KernelTable) -> Self {
        let n = table.n;
        let p = n.map(|k| 2 * k);
        let fft = Fft3::new(p);
        let mut a = vec![Complex64::new(0.0, 0.0); fft.len()];
        let mut b = a.clone();
        for z in 0..p[2] {
            let Some(dz) = wrap(z, n[2], p[2]) else { continue };
            for y in 0..p[1] {
                let Some(dy) = wrap(y, n[1], p[1]) else { continue };
                for x in 0..p[0] {
                    let Some(dx) = wrap(x, n[0], p[0]) else { continue };
                    let t = table.index([dx, dy, dz]);
                    let (kv, k3) = (table.inv_r[t], table.inv_r3[t]);
                    // g_i = Σ_j ρ_j k3(i−j) (j − i): the kernel at offset d = i−j is −d k3.
                    let i = x + p[0] * (y + p[1] * z);
                    a[i] = Complex64::new(kv, -(dx as f64) * k3);
                    b[i] = Complex64::new(-(dy as f64) * k3, -(dz as f64) * k3);
                }
            }
        }
        fft.process(&mut a, false);
        fft.process(&mut b, false);
        Self {
            fft,
            spec_a: a,
            spec_b: b,
        }
    }
}

/// Gravitational constant, frame rotation and per-grid kernel tables.
#[derive(Clone)]
pub struct GravityContext {
    /// Gravitational constant, m³/(kg·s²).
    pub g_const: f64,
    /// Frame angular velocity about e₃, rad/s.
    pub omega: f64,
    pub method: GravityMethod,
    /// Self-gravity switch; rotation is independent of it.
    pub enabled: bool,
    n: [usize; 3],
    h: f64,
    table: Arc<OnceLock<KernelTable>>,
    fast: Arc<OnceLock<FastKernel>>,
}

impl std::fmt::Debug for GravityContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GravityContext")
            .field("g_const", &self.g_const)
            .field("omega", &self.omega)
            .field("method", &self.method)
            .field("enabled", &self.enabled)
            .field("n", &self.n)
            .field("h", &self.h)
            .finish()
    }
}

pub const G_SI: f64 = 6.674e-11;

impl GravityContext {
    /// Kernel tables are built lazily on the first solve.
    pub fn new(grid: &Grid, g_const: f64, omega: f64, method: GravityMethod) -> Self {
        Self {
            g_const,
            omega,
            method,
            enabled: true,
            n: grid.n,
            h: grid.h,
            table: Arc::new(OnceLock::new()),
            fast: Arc::new(OnceLock::new()),
        }
    }

    /// A context with self-gravity switched off and the given rotation.
    pub fn disabled(grid: &Grid, omega: f64) -> Self {
        Self {
            enabled: false,
            ..Self::new(grid, 0.0, omega, GravityMethod::Fast)
        }
    }

    fn table(&self) -> &KernelTable {
        self.table.get_or_init(|| KernelTable::new(self.n))
    }

    fn fast(&self) -> &FastKernel {
        self.fast.get_or_init(|| FastKernel::new(self.table()))
    }

    fn check_grid(&self, grid: &Grid, rho: &[f64]) {
        assert_eq!(grid.n, self.n, "gravity context built for a different grid");
        assert_eq!(rho.len(), grid.len(), "density length does not match the grid");
    }

    /// Solve with the configured method; zero fields when disabled.
    pub fn solve(&self, grid: &Grid, rho: &[f64]) -> PotentialField {
        if !self.enabled {
            return PotentialField::zeros(grid.len());
        }
        match self.method {
            GravityMethod::Oracle => solve_potential_direct(self, rho, grid),
            GravityMethod::Fast => solve_potential_fast(self, rho, grid),
        }
    }
}

/// Pairwise summation over all occupied cells.
pub fn solve_potential_direct(ctx: &GravityContext, rho: &[f64], grid: &Grid) -> PotentialField {
    ctx.check_grid(grid, rho);
    let targets: Vec<usize> = (0..grid.len()).collect();
    let (v, g) = direct_at(ctx, rho, grid, &targets);
    PotentialField { v, g }
}

/// Direct evaluation at selected target cells only.
pub fn potential_direct_at(
    ctx: &GravityContext,
    rho: &[f64],
    grid: &Grid,
    targets: &[usize],
) -> (Vec<f64>, Vec<Vec3>) {
    ctx.check_grid(grid, rho);
    direct_at(ctx, rho, grid, targets)
}

fn direct_at(ctx: &GravityContext, rho: &[f64], grid: &Grid, targets: &[usize]) -> (Vec<f64>, Vec<Vec3>) {
    let table = ctx.table();
    let sources: Vec<([i64; 3], f64)> = rho
        .iter()
        .enumerate()
        .filter(|(_, &r)| r != 0.0)
        .map(|(j, &r)| (grid.ijk_signed(j), r))
        .collect();
    let h = grid.h;
    let g_const = ctx.g_const;
    let out: Vec<(f64, Vec3)> = targets
        .par_iter()
        .map(|&i| {
            let xi = grid.ijk_signed(i);
            let (mut sv, mut sx, mut sy, mut sz) = (0.0, 0.0, 0.0, 0.0);
            for &(xj, r) in &sources {
                let d = [xj[0] - xi[0], xj[1] - xi[1], xj[2] - xi[2]];
                let t = table.index(d);
                sv += r * table.inv_r[t];
                let w = r * table.inv_r3[t];
                sx += w * d[0] as f64;
                sy += w * d[1] as f64;
                sz += w * d[2] as f64;
            }
            (-g_const * h * h * sv, [g_const * h * sx, g_const * h * sy, g_const * h * sz])
        })
        .collect();
    out.into_iter().unzip()
}

/// Same discrete operator as [`solve_potential_direct`] through one
/// forward and two inverse transforms on the doubled grid.
pub fn solve_potential_fast(ctx: &GravityContext, rho: &[f64], grid: &Grid) -> PotentialField {
    ctx.check_grid(grid, rho);
    let fk = ctx.fast();
    let n = grid.n;
    let p = fk.fft.dims();
    let total = fk.fft.len();
    let mut r = vec![Complex64::new(0.0, 0.0); total];
    for z in 0..n[2] {
        for y in 0..n[1] {
            for x in 0..n[0] {
                r[x + p[0] * (y + p[1] * z)] = Complex64::new(rho[grid.idx(x, y, z)], 0.0);
            }
        }
    }
    fk.fft.process(&mut r, false);
    let scale = 1.0 / total as f64;
    let mut a: Vec<Complex64> = r.par_iter().zip(&fk.spec_a).map(|(r, k)| r * k * scale).collect();
    r.par_iter_mut().zip(&fk.spec_b).for_each(|(r, k)| *r = *r * k * scale);
    fk.fft.process(&mut a, true);
    fk.fft.process(&mut r, true);

    let h = grid.h;
    let g_const = ctx.g_const;
    let mut out = PotentialField::zeros(grid.len());
    for z in 0..n[2] {
        for y in 0..n[1] {
            for x in 0..n[0] {
                let q = x + p[0] * (y + p[1] * z);
                let i = grid.idx(x, y, z);
                out.v[i] = -g_const * h * h * a[q].re;
                out.g[i] = [g_const * h * a[q].im, g_const * h * r[q].re, g_const * h * r[q].im];
            }
        }
    }
    out
}

/// `g = −∇V` by central differences (one-sided at the grid edges); a
/// diagnostic alternative to the vector-kernel acceleration.
pub fn differenced_acceleration(grid: &Grid, v: &[f64]) -> Vec<Vec3> {
    let h = grid.h;
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let c = grid.ijk(i);
            let mut g = [0.0; 3];
            for a in 0..3 {
                let lo = (c[a] > 0).then(|| grid.offset(i, a, -1));
                let hi = (c[a] + 1 < grid.n[a]).then(|| grid.offset(i, a, 1));
                g[a] = match (lo, hi) {
                    (Some(l), Some(u)) => -(v[u] - v[l]) / (2.0 * h),
                    (None, Some(u)) => -(v[u] - v[i]) / h,
                    (Some(l), None) => -(v[i] - v[l]) / h,
                    (None, None) => 0.0,
                };
            }
            g
        })
        .collect()
}

/// Coriolis force density `−2ρ ω×v` for `ω = (0, 0, omega)`.
#[inline]
pub fn coriolis_force(ctx: &GravityContext, rho: f64, v: Vec3) -> Vec3 {
    coriolis(ctx.omega, rho, v)
}

#[inline]
pub(crate) fn coriolis(omega: f64, rho: f64, v: Vec3) -> Vec3 {
    let c = 2.0 * rho * omega;
    [c * v[1], -(c * v[0]), 0.0]
}

/// Frame rotation rate at which centrifugal and stellar gravity balance at
/// orbital distance `d`: `ω = sqrt(G M / d³)`.
pub fn orbital_omega(m_star: f64, d: f64, g_const: f64) -> Result<f64> {
    if !(m_star > 0.0 && d > 0.0 && g_const > 0.0) {
        return Err(Error::Domain(format!(
            "orbital rate needs positive mass, distance and G, got {m_star}, {d}, {g_const}"
        )));
    }
    Ok((g_const * m_star / (d * d * d)).sqrt())
}

/// Real-kernel convolution through the padded FFT, used for the domain
/// constant and other kernel sums over the grid.
pub(crate) fn convolve_real(n: [usize; 3], input: &[f64], kernel: impl Fn([i64; 3]) -> f64) -> Vec<f64> {
    let p = n.map(|k| 2 * k);
    let fft = Fft3::new(p);
    let mut k = vec![Complex64::new(0.0, 0.0); fft.len()];
    for z in 0..p[2] {
        let Some(dz) = wrap(z, n[2], p[2]) else { continue };
        for y in 0..p[1] {
            let Some(dy) = wrap(y, n[1], p[1]) else { continue };
            for x in 0..p[0] {
                let Some(dx) = wrap(x, n[0], p[0]) else { continue };
                k[x + p[0] * (y + p[1] * z)] = Complex64::new(kernel([dx, dy, dz]), 0.0);
            }
        }
    }
    let mut f = vec![Complex64::new(0.0, 0.0); fft.len()];
    for z in 0..n[2] {
        for y in 0..n[1] {
            for x in 0..n[0] {
                f[x + p[0] * (y + p[1] * z)] = Complex64::new(input[x + n[0] * (y + n[1] * z)], 0.0);
            }
        }
    }
    fft.process(&mut k, false);
    fft.process(&mut f, false);
    let scale = 1.0 / fft.len() as f64;
    f.par_iter_mut().zip(&k).for_each(|(a, b)| *a = *a * b * scale);
    fft.process(&mut f, true);
    let mut out = vec![0.0; n[0] * n[1] * n[2]];
    for z in 0..n[2] {
        for y in 0..n[1] {
            for x in 0..n[0] {
                out[x + n[0] * (y + n[1] * z)] = f[x + p[0] * (y + p[1] * z)].re;
            }
        }
    }
    out
}

/// `C_{r,Ω} = sup_x ∫_Ω |x − x̃|^(−r/(r−1)) dx̃` over the active cells,
/// with the self-cell contribution integrated exactly.
pub fn domain_constant(grid: &Grid, r: f64) -> Result<f64> {
    if !(r > 1.5) || !r.is_finite() {
        return Err(Error::Domain(format!(
            "domain constant is infinite for r ≤ 3/2, got r = {r}"
        )));
    }
    let s = r / (r - 1.0);
    Ok(domain_constant_exponent(grid, s))
}

/// Same sup for the kernel `|x − x̃|^-s`, `s < 3`; `s → 1` is the `r → ∞` limit.
pub fn domain_constant_exponent(grid: &Grid, s: f64) -> f64 {
    assert!((0.0..3.0).contains(&s));
    let h = grid.h;
    let self_cell = cube_inverse_power(s) * h.powf(3.0 - s);
    let mask: Vec<f64> = grid.domain_mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    let conv = convolve_real(grid.n, &mask, |d| {
        if d == [0, 0, 0] {
            self_cell
        } else {
            let r2 = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) as f64;
            h.powi(3) * (r2.sqrt() * h).powf(-s)
        }
    });
    conv.iter()
        .zip(&grid.domain_mask)
        .filter(|(_, &m)| m)
        .map(|(c, _)| *c)
        .fold(0.0, f64::max)
}

/// Monopole estimate of the gravitational field energy outside the grid
/// box, `G M² / (8π) ∫_{R³∖box} |x − x_c|^-4 dx`.
pub fn field_energy_tail(g_const: f64, mass: f64, center: Vec3, grid: &Grid) -> f64 {
    if mass == 0.0 || g_const == 0.0 {
        return 0.0;
    }
    let (lo, hi) = grid.bounds();
    let c = [0, 1, 2].map(|a| center[a].clamp(lo[a] + 1e-9 * grid.h, hi[a] - 1e-9 * grid.h));
    g_const * mass * mass / (8.0 * std::f64::consts::PI) * exterior_inverse_quartic(c, lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_density(grid: &Grid, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..grid.len()).map(|_| rng.gen_range(0.0..1.0)).collect()
    }

    fn max_rel(a: &[f64], b: &[f64]) -> f64 {
        let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
    }

    #[test]
    fn empty_space_has_no_field() {
        let grid = Grid::new_box([6, 5, 4], 0.1, [0.0; 3]);
        let ctx = GravityContext::new(&grid, 1.0, 0.0, GravityMethod::Fast);
        let rho = vec![0.0; grid.len()];
        for f in [solve_potential_direct(&ctx, &rho, &grid), solve_potential_fast(&ctx, &rho, &grid)] {
            assert!(f.v.iter().all(|&v| v == 0.0));
            assert!(f.g.iter().all(|g| g.iter().all(|&c| c == 0.0)));
        }
    }

    #[test]
    fn fast_matches_direct_on_anisotropic_grid() {
        let grid = Grid::new_box([7, 5, 6], 0.3, [0.0; 3]);
        let ctx = GravityContext::new(&grid, 2.5, 0.0, GravityMethod::Fast);
        let rho = random_density(&grid, 7);
        let d = solve_potential_direct(&ctx, &rho, &grid);
        let f = solve_potential_fast(&ctx, &rho, &grid);
        assert!(max_rel(&f.v, &d.v) < 1e-12);
        for a in 0..3 {
            let fa: Vec<f64> = f.g.iter().map(|g| g[a]).collect();
            let da: Vec<f64> = d.g.iter().map(|g| g[a]).collect();
            assert!(max_rel(&fa, &da) < 1e-12);
        }
        assert!(d.v.iter().all(|&v| v < 0.0));
    }

    #[test]
    fn symmetric_point_masses_exert_no_net_force() {
        let grid = Grid::new_box([8, 8, 8], 1.0, [0.0; 3]);
        let ctx = GravityContext::new(&grid, 1.0, 0.0, GravityMethod::Oracle);
        let mut rho = vec![0.0; grid.len()];
        rho[grid.idx(2, 3, 4)] = 1.0;
        rho[grid.idx(5, 4, 3)] = 1.0;
        let f = solve_potential_direct(&ctx, &rho, &grid);
        let mut net = [0.0; 3];
        for i in 0..grid.len() {
            for a in 0..3 {
                net[a] += rho[i] * f.g[i][a];
            }
        }
        assert!(net.iter().all(|c| c.abs() < 1e-15));
        // The pair attract each other along the separation.
        let g = f.g[grid.idx(2, 3, 4)];
        assert!(g[0] > 0.0 && g[1] > 0.0 && g[2] < 0.0);
    }

    #[test]
    fn far_field_decays_like_point_mass() {
        let grid = Grid::new_box([24, 24, 24], 1.0 / 24.0, [0.0; 3]);
        let ctx = GravityContext::new(&grid, 1.0, 0.0, GravityMethod::Fast);
        let c = grid.center(grid.idx(12, 12, 12));
        let mut rho = vec![0.0; grid.len()];
        for i in 0..grid.len() {
            let x = grid.center(i);
            let r2 = (0..3).map(|a| (x[a] - c[a]).powi(2)).sum::<f64>();
            if r2 < 0.1f64.powi(2) {
                rho[i] = 1.0;
            }
        }
        let mass: f64 = rho.iter().sum::<f64>() * grid.cell_volume();
        let f = solve_potential_fast(&ctx, &rho, &grid);
        let corner = grid.idx(0, 0, 0);
        let x = grid.center(corner);
        let r = (0..3).map(|a| (x[a] - c[a]).powi(2)).sum::<f64>().sqrt();
        assert!((f.v[corner] * r / (-mass) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn coriolis_examples() {
        let grid = Grid::new_box([2, 2, 2], 1.0, [0.0; 3]);
        let ctx = GravityContext::new(&grid, 1.0, 0.5, GravityMethod::Fast);
        assert_eq!(coriolis_force(&ctx, 1.0, [1.0, 0.0, 0.0]), [0.0, -1.0, 0.0]);
        assert_eq!(coriolis_force(&ctx, 3.0, [0.0, 0.0, 2.0]), [0.0, 0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let v = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
            let rho = rng.gen_range(0.0..3.0);
            let f = coriolis_force(&ctx, rho, v);
            // Orthogonal up to one rounding per product.
            let bound = 4.0 * f64::EPSILON * 2.0 * rho * 0.5 * dot(v, v);
            assert!(dot(f, v).abs() <= bound);
        }
    }

    #[test]
    fn orbital_rate_scalings() {
        let w = orbital_omega(1.0, 1.0, 1.0).unwrap();
        assert!((orbital_omega(1.0, 8.0, 1.0).unwrap() * 512f64.sqrt() - w).abs() < 1e-15);
        assert!((orbital_omega(4.0, 1.0, 1.0).unwrap() - 2.0 * w).abs() < 1e-15);
        assert!(orbital_omega(0.0, 1.0, 1.0).is_err());
        assert!(orbital_omega(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn domain_constant_errors_and_scaling() {
        let grid = Grid::new_box([8, 8, 8], 0.25, [-1.0; 3]).with_sphere([0.0; 3], 1.0);
        assert!(domain_constant(&grid, 1.5).is_err());
        assert!(domain_constant(&grid, 1.2).is_err());
        let c = domain_constant(&grid, 2.0).unwrap();
        // Shrinking every length by λ scales C by λ^(3−s).
        let lam = 0.001;
        let tiny = Grid::new_box([8, 8, 8], 0.25 * lam, [-lam; 3]).with_sphere([0.0; 3], lam);
        assert_eq!(tiny.domain_mask, grid.domain_mask);
        let ct = domain_constant(&tiny, 2.0).unwrap();
        assert!((ct / c - lam).abs() < 1e-12 * lam);
        // A sub-domain has a smaller constant.
        let sub = Grid::new_box([8, 8, 8], 0.25, [-1.0; 3]).with_sphere([0.0; 3], 0.6);
        assert!(domain_constant(&sub, 2.0).unwrap() < c);
    }
}
