//! Grid geometry, per-component fields, border-zone sources and the
//! initial-state builder.

mod snapshot;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constitutive::{eval_thermo, ConstitutiveModel};
use crate::error::{Error, Result};
use crate::tensor::{dot, norm2, sub, Vec3, ZERO3};

pub use snapshot::{read_snapshot, write_snapshot, Snapshot, SnapshotManifest};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DomainShape {
    Box,
    Sphere { center: Vec3, radius: f64 },
}

/// Uniform cell-centred grid with an active-cell mask and a border zone.
///
/// Cell `(i, j, k)` is stored at `i + n0 (j + n1 k)` and covers
/// `origin + h [i, i+1] × [j, j+1] × [k, k+1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub n: [usize; 3],
    /// Cell size, m.
    pub h: f64,
    /// Lower corner of the box, m.
    pub origin: Vec3,
    pub shape: DomainShape,
    pub domain_mask: Vec<bool>,
    pub border_mask: Vec<bool>,
}

impl Grid {
    /// All cells active, no border zone.
    pub fn new_box(n: [usize; 3], h: f64, origin: Vec3) -> Self {
        assert!(n.iter().all(|&k| k > 0), "grid needs at least one cell per axis");
        assert!(h > 0.0 && h.is_finite(), "cell size must be positive");
        let len = n[0] * n[1] * n[2];
        Self {
            n,
            h,
            origin,
            shape: DomainShape::Box,
            domain_mask: vec![true; len],
            border_mask: vec![false; len],
        }
    }

    /// Restrict the active cells to those whose centre lies in the ball.
    pub fn with_sphere(mut self, center: Vec3, radius: f64) -> Self {
        for i in 0..self.len() {
            let d = sub(self.center(i), center);
            self.domain_mask[i] = norm2(d) < radius * radius;
            self.border_mask[i] &= self.domain_mask[i];
        }
        self.shape = DomainShape::Sphere { center, radius };
        self
    }

    /// Mark active cells whose centre is closer than `thickness` to ∂Ω.
    pub fn with_border(mut self, thickness: f64) -> Self {
        for i in 0..self.len() {
            self.border_mask[i] =
                self.domain_mask[i] && self.distance_to_boundary(self.center(i)) < thickness;
        }
        self
    }

    /// Distance from an interior point to the boundary of Ω.
    pub fn distance_to_boundary(&self, x: Vec3) -> f64 {
        match self.shape {
            DomainShape::Box => {
                let (lo, hi) = self.bounds();
                (0..3).map(|a| (x[a] - lo[a]).min(hi[a] - x[a])).fold(f64::INFINITY, f64::min)
            }
            DomainShape::Sphere { center, radius } => radius - norm2(sub(x, center)).sqrt(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n[0] * (j + self.n[1] * k)
    }

    #[inline]
    pub fn ijk(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.n[0];
        let r = idx / self.n[0];
        [i, r % self.n[1], r / self.n[1]]
    }

    #[inline]
    pub(crate) fn ijk_signed(&self, idx: usize) -> [i64; 3] {
        self.ijk(idx).map(|c| c as i64)
    }

    #[inline]
    pub fn center(&self, idx: usize) -> Vec3 {
        let c = self.ijk(idx);
        [0, 1, 2].map(|a| self.origin[a] + (c[a] as f64 + 0.5) * self.h)
    }

    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.h * self.h * self.h
    }

    /// Lower and upper corners of the box.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let hi = [0, 1, 2].map(|a| self.origin[a] + self.n[a] as f64 * self.h);
        (self.origin, hi)
    }

    /// Index of the cell one step along `axis`; the caller guarantees it exists.
    #[inline]
    pub(crate) fn offset(&self, idx: usize, axis: usize, dir: i32) -> usize {
        let stride = match axis {
            0 => 1,
            1 => self.n[0],
            _ => self.n[0] * self.n[1],
        };
        if dir > 0 {
            idx + stride
        } else {
            idx - stride
        }
    }

    /// Active neighbour along `axis` in direction `dir` (±1), or `None`
    /// when the face between them is a wall.
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, dir: i32) -> Option<usize> {
        let c = self.ijk(idx)[axis];
        let inside = if dir > 0 { c + 1 < self.n[axis] } else { c > 0 };
        if !inside {
            return None;
        }
        let j = self.offset(idx, axis, dir);
        self.domain_mask[j].then_some(j)
    }

    pub fn active_count(&self) -> usize {
        self.domain_mask.iter().filter(|&&m| m).count()
    }

    /// Volume of Ω as resolved by the mask.
    pub fn domain_volume(&self) -> f64 {
        self.active_count() as f64 * self.cell_volume()
    }

    /// Longest box edge.
    pub fn extent(&self) -> f64 {
        self.n.iter().map(|&k| k as f64 * self.h).fold(0.0, f64::max)
    }
}

/// Lower limits on density and Jacobian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Floors {
    pub rho: f64,
    pub j: f64,
}

impl Floors {
    pub fn for_density(rho0: f64) -> Self {
        Self {
            rho: 1e-12 * rho0,
            j: 1e-6,
        }
    }
}

/// Conserved fields of one component. `w` is the thermal internal energy
/// per actual volume; θ is derived from it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FieldState {
    pub rho: Vec<f64>,
    pub mom: Vec<Vec3>,
    pub j: Vec<f64>,
    pub w: Vec<f64>,
    pub t: f64,
}

impl FieldState {
    pub fn zeros(len: usize) -> Self {
        Self {
            rho: vec![0.0; len],
            mom: vec![ZERO3; len],
            j: vec![0.0; len],
            w: vec![0.0; len],
            t: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// `mom / max(ρ, ρ_floor)`.
    #[inline]
    pub fn velocity(&self, i: usize, rho_floor: f64) -> Vec3 {
        let r = self.rho[i].max(rho_floor);
        [self.mom[i][0] / r, self.mom[i][1] / r, self.mom[i][2] / r]
    }

    pub fn mass(&self, grid: &Grid) -> f64 {
        active_sum(grid, |i| self.rho[i]) * grid.cell_volume()
    }
}

/// Metal (index 0) and silicate (index 1) sharing one grid and clock.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TwoPhaseState {
    pub phases: [FieldState; 2],
}

impl TwoPhaseState {
    pub fn metal(&self) -> &FieldState {
        &self.phases[0]
    }

    pub fn silicate(&self) -> &FieldState {
        &self.phases[1]
    }

    pub fn t(&self) -> f64 {
        self.phases[0].t
    }
}

/// Sequential sum over active cells (fixed order, reproducible).
pub(crate) fn active_sum(grid: &Grid, f: impl Fn(usize) -> f64) -> f64 {
    let mut s = 0.0;
    for i in 0..grid.len() {
        if grid.domain_mask[i] {
            s += f(i);
        }
    }
    s
}

/// Velocity carried by incoming material.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InflowVelocity {
    /// Same vector everywhere, m/s.
    Fixed { velocity: Vec3 },
    /// Directed at `center` with the given speed, m/s.
    Radial { speed: f64, center: Vec3 },
    /// Equal to the local flow velocity.
    Local,
}

/// Bulk sources in the border zone.
///
/// Inside `[t_start, t_end)` every border cell receives volume rate
/// `v_ext`, mass rate `r_ext = ρ₀ v_ext / J`, momentum rate `r_ext 𝒗_ext`
/// and heat `h_ext`. Everything is exactly zero elsewhere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceSpec {
    /// Volume rate, 1/s.
    pub v_ext: f64,
    pub inflow: InflowVelocity,
    /// Heat power, W/m³.
    pub h_ext: f64,
    /// Referential density, kg/m³.
    pub rho0: f64,
    pub t_start: f64,
    pub t_end: f64,
}

impl SourceSpec {
    pub fn off(rho0: f64) -> Self {
        Self {
            v_ext: 0.0,
            inflow: InflowVelocity::Local,
            h_ext: 0.0,
            rho0,
            t_start: 0.0,
            t_end: f64::INFINITY,
        }
    }

    #[inline]
    pub fn active_at(&self, t: f64) -> bool {
        (self.v_ext != 0.0 || self.h_ext != 0.0) && t >= self.t_start && t < self.t_end
    }

    #[inline]
    pub fn inflow_velocity(&self, x: Vec3, v_local: Vec3) -> Vec3 {
        match self.inflow {
            InflowVelocity::Fixed { velocity } => velocity,
            InflowVelocity::Local => v_local,
            InflowVelocity::Radial { speed, center } => {
                let d = sub(center, x);
                let r = norm2(d).sqrt();
                if r == 0.0 {
                    ZERO3
                } else {
                    [speed * d[0] / r, speed * d[1] / r, speed * d[2] / r]
                }
            }
        }
    }

    /// Rates in one cell.
    #[inline]
    pub fn cell_rates(&self, grid: &Grid, i: usize, j: f64, v_local: Vec3, t: f64) -> CellSource {
        if !grid.border_mask[i] || !self.active_at(t) {
            return CellSource::default();
        }
        let r = self.rho0 * self.v_ext / j;
        let vel = self.inflow_velocity(grid.center(i), v_local);
        CellSource {
            r_ext: r,
            momentum: [r * vel[0], r * vel[1], r * vel[2]],
            velocity: vel,
            volume: self.v_ext,
            heat: self.h_ext,
        }
    }

    /// The largest of `|v_ext|` and `v_ext |𝒗_ext|²` over the border, which
    /// must stay below the configured bound.
    pub fn bound(&self, grid: &Grid) -> f64 {
        let mut k = self.v_ext.abs();
        for i in 0..grid.len() {
            if grid.border_mask[i] {
                let v = self.inflow_velocity(grid.center(i), ZERO3);
                k = k.max(self.v_ext * norm2(v));
            }
        }
        k
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CellSource {
    /// Mass rate, kg/(m³·s).
    pub r_ext: f64,
    /// Momentum rate, N/m³.
    pub momentum: Vec3,
    /// Velocity of the incoming material, m/s.
    pub velocity: Vec3,
    /// Volume rate, 1/s.
    pub volume: f64,
    /// Heat power, W/m³.
    pub heat: f64,
}

/// Per-cell source rates for a whole field.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SourceRates {
    pub r_ext: Vec<f64>,
    pub momentum: Vec<Vec3>,
    pub volume: Vec<f64>,
    pub heat: Vec<f64>,
}

pub fn source_rates(spec: &SourceSpec, grid: &Grid, state: &FieldState, t: f64) -> SourceRates {
    let floor = Floors::for_density(spec.rho0).rho;
    let n = grid.len();
    let mut out = SourceRates {
        r_ext: vec![0.0; n],
        momentum: vec![ZERO3; n],
        volume: vec![0.0; n],
        heat: vec![0.0; n],
    };
    for i in 0..n {
        let c = spec.cell_rates(grid, i, state.j[i], state.velocity(i, floor), t);
        out.r_ext[i] = c.r_ext;
        out.momentum[i] = c.momentum;
        out.volume[i] = c.volume;
        out.heat[i] = c.heat;
    }
    out
}

/// Initial velocity field.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VelocityProfile {
    #[default]
    Rest,
    Uniform { velocity: Vec3 },
    /// Cellular vortex `A (sin πx̂ cos πŷ, −cos πx̂ sin πŷ, 0)` with
    /// `x̂, ŷ` the box coordinates scaled to `[0, 1]`; tangential on the walls.
    Vortex { amplitude: f64 },
    /// `−rate (x − center)`.
    Compression { rate: f64, center: Vec3 },
    /// Rigid rotation `rate e₃ × (x − center)`.
    Spin { rate: f64, center: Vec3 },
}

/// Spherical region of compact material at the start.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedBlob {
    pub center: Vec3,
    /// m.
    pub radius: f64,
    pub j: f64,
    /// Width of the smooth transition in ln J, m; zero for a sharp edge.
    #[serde(default)]
    pub edge: f64,
}

/// Additive Gaussian perturbation of J.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianBump {
    pub center: Vec3,
    /// Standard deviation, m.
    pub width: f64,
    pub amplitude: f64,
}

/// Everything [`init_state`] needs for one component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialProfile {
    pub j_background: f64,
    pub seed_blob: Option<SeedBlob>,
    pub bump: Option<GaussianBump>,
    /// Relative multiplicative noise on J, drawn from `seed`.
    pub noise: f64,
    pub seed: u64,
    /// K.
    pub theta: f64,
    pub velocity: VelocityProfile,
}

impl InitialProfile {
    pub fn uniform(j: f64, theta: f64) -> Self {
        Self {
            j_background: j,
            seed_blob: None,
            bump: None,
            noise: 0.0,
            seed: 0,
            theta,
            velocity: VelocityProfile::Rest,
        }
    }

    fn jacobian_at(&self, x: Vec3) -> f64 {
        let mut j = self.j_background;
        if let Some(b) = self.seed_blob {
            let r = norm2(sub(x, b.center)).sqrt();
            if b.edge > 0.0 {
                let s = 0.5 * (1.0 - ((r - b.radius) / b.edge).tanh());
                j = (s * b.j.ln() + (1.0 - s) * j.ln()).exp();
            } else if r < b.radius {
                j = b.j;
            }
        }
        if let Some(g) = self.bump {
            let r2 = norm2(sub(x, g.center));
            j += g.amplitude * (-0.5 * r2 / (g.width * g.width)).exp();
        }
        j
    }

    fn velocity_at(&self, grid: &Grid, x: Vec3) -> Vec3 {
        use std::f64::consts::PI;
        match self.velocity {
            VelocityProfile::Rest => ZERO3,
            VelocityProfile::Uniform { velocity } => velocity,
            VelocityProfile::Vortex { amplitude } => {
                let (lo, hi) = grid.bounds();
                let u = (x[0] - lo[0]) / (hi[0] - lo[0]);
                let v = (x[1] - lo[1]) / (hi[1] - lo[1]);
                [
                    amplitude * (PI * u).sin() * (PI * v).cos(),
                    -amplitude * (PI * u).cos() * (PI * v).sin(),
                    0.0,
                ]
            }
            VelocityProfile::Compression { rate, center } => {
                let d = sub(x, center);
                [-rate * d[0], -rate * d[1], -rate * d[2]]
            }
            VelocityProfile::Spin { rate, center } => {
                let d = sub(x, center);
                [-rate * d[1], rate * d[0], 0.0]
            }
        }
    }
}

/// Build one component: J from the profile, `ρ = ρ₀/J`, `w = w(J, θ)`.
/// Inactive cells stay zero.
pub fn init_state(
    grid: &Grid,
    model: &ConstitutiveModel,
    rho0: f64,
    profile: &InitialProfile,
) -> Result<FieldState> {
    if !(rho0 > 0.0 && rho0.is_finite()) {
        return Err(Error::config("initial.rho0", format!("must be positive, got {rho0}")));
    }
    if !(profile.theta >= 0.0 && profile.theta.is_finite()) {
        return Err(Error::config("initial.theta", format!("must be nonnegative, got {}", profile.theta)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let mut s = FieldState::zeros(grid.len());
    for i in 0..grid.len() {
        // Draw for every cell so the pattern does not depend on the mask.
        let noise = if profile.noise > 0.0 {
            1.0 + profile.noise * rng.gen_range(-1.0..1.0)
        } else {
            1.0
        };
        if !grid.domain_mask[i] {
            continue;
        }
        let x = grid.center(i);
        let j = profile.jacobian_at(x) * noise;
        if !(j > 0.0 && j.is_finite()) {
            return Err(Error::config(
                "initial",
                format!("J must be positive everywhere, got {j} at {x:?}"),
            ));
        }
        let rho = rho0 / j;
        let v = profile.velocity_at(grid, x);
        s.j[i] = j;
        s.rho[i] = rho;
        s.mom[i] = [rho * v[0], rho * v[1], rho * v[2]];
        s.w[i] = eval_thermo(model, j, profile.theta)?.w;
    }
    Ok(s)
}

/// `max |ρJ − ρ₀| / ρ₀` over the active cells.
pub fn consistency_rho_j(grid: &Grid, state: &FieldState, rho0: f64) -> f64 {
    let mut m = 0.0f64;
    for i in 0..grid.len() {
        if grid.domain_mask[i] {
            m = m.max((state.rho[i] * state.j[i] - rho0).abs() / rho0);
        }
    }
    m
}

/// Mass-weighted mean distance from `center`.
pub fn mass_weighted_radius(grid: &Grid, state: &FieldState, center: Vec3) -> f64 {
    let m = active_sum(grid, |i| state.rho[i]);
    let r = active_sum(grid, |i| state.rho[i] * norm2(sub(grid.center(i), center)).sqrt());
    r / m
}

/// Mass-weighted centre of a set of components.
pub fn barycenter(grid: &Grid, phases: &[FieldState]) -> Vec3 {
    let mut m = 0.0;
    let mut c = ZERO3;
    for i in 0..grid.len() {
        if !grid.domain_mask[i] {
            continue;
        }
        let x = grid.center(i);
        for p in phases {
            m += p.rho[i];
            for a in 0..3 {
                c[a] += p.rho[i] * x[a];
            }
        }
    }
    c.map(|v| v / m)
}

/// Kinetic energy density of one cell.
#[inline]
pub(crate) fn kinetic_density(mom: Vec3, v: Vec3) -> f64 {
    0.5 * dot(mom, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new_box([10, 10, 10], 0.1, [0.0; 3])
    }

    #[test]
    fn indexing_round_trips() {
        let g = Grid::new_box([3, 4, 5], 1.0, [0.0; 3]);
        for i in 0..g.len() {
            let [a, b, c] = g.ijk(i);
            assert_eq!(g.idx(a, b, c), i);
        }
        assert_eq!(g.neighbor(g.idx(0, 1, 1), 0, -1), None);
        assert_eq!(g.neighbor(g.idx(0, 1, 1), 0, 1), Some(g.idx(1, 1, 1)));
        assert_eq!(g.neighbor(g.idx(2, 3, 4), 2, 1), None);
    }

    #[test]
    fn border_shell_and_sphere_mask() {
        let g = grid().with_border(0.2);
        assert!(g.border_mask[g.idx(0, 5, 5)]);
        assert!(g.border_mask[g.idx(1, 5, 5)]);
        assert!(!g.border_mask[g.idx(2, 5, 5)]);
        let s = grid().with_sphere([0.5; 3], 0.5).with_border(0.1);
        for i in 0..s.len() {
            assert!(!s.border_mask[i] || s.domain_mask[i]);
        }
        assert!(!s.domain_mask[s.idx(0, 0, 0)]);
        assert!(s.domain_mask[s.idx(5, 5, 5)] && !s.border_mask[s.idx(5, 5, 5)]);
    }

    #[test]
    fn uniform_dilute_state() {
        let g = grid();
        let s = init_state(&g, &ConstitutiveModel::default(), 1.0, &InitialProfile::uniform(100.0, 1.0)).unwrap();
        assert!(s.rho.iter().all(|&r| r == 0.01));
        assert_eq!(consistency_rho_j(&g, &s, 1.0), 0.0);
    }

    #[test]
    fn seed_blob_is_piecewise() {
        let g = grid();
        let mut p = InitialProfile::uniform(100.0, 1.0);
        p.seed_blob = Some(SeedBlob {
            center: [0.5; 3],
            radius: 0.2,
            j: 0.9,
            edge: 0.0,
        });
        let s = init_state(&g, &ConstitutiveModel::default(), 1.0, &p).unwrap();
        assert_eq!(s.rho[g.idx(5, 5, 5)], 1.0 / 0.9);
        assert_eq!(s.rho[g.idx(0, 0, 0)], 0.01);
    }

    #[test]
    fn zero_temperature_has_no_thermal_energy() {
        let g = grid();
        let s = init_state(&g, &ConstitutiveModel::default(), 1.0, &InitialProfile::uniform(2.0, 0.0)).unwrap();
        assert!(s.w.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn rejects_nonpositive_jacobian() {
        let g = grid();
        let mut p = InitialProfile::uniform(1.0, 1.0);
        p.bump = Some(GaussianBump {
            center: [0.5; 3],
            width: 0.1,
            amplitude: -5.0,
        });
        assert!(matches!(
            init_state(&g, &ConstitutiveModel::default(), 1.0, &p),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn source_rates_are_supported_on_the_border() {
        let g = grid().with_border(0.1);
        let s = init_state(&g, &ConstitutiveModel::default(), 1.0, &InitialProfile::uniform(100.0, 1.0)).unwrap();
        let off = source_rates(&SourceSpec::off(1.0), &g, &s, 0.0);
        assert!(off.r_ext.iter().all(|&r| r == 0.0));
        let spec = SourceSpec {
            v_ext: 0.1,
            ..SourceSpec::off(1.0)
        };
        let r = source_rates(&spec, &g, &s, 0.0);
        for i in 0..g.len() {
            if g.border_mask[i] {
                assert!((r.r_ext[i] - 1e-3).abs() < 1e-18);
                // r_ext = v_ext ρ while ρ = ρ₀/J holds.
                assert!((r.r_ext[i] - 0.1 * s.rho[i]).abs() <= 1e-18);
            } else {
                assert_eq!(r.r_ext[i].to_bits(), 0);
                assert_eq!(r.heat[i].to_bits(), 0);
                assert!(r.momentum[i].iter().all(|m| m.to_bits() == 0));
            }
        }
        let later = SourceSpec { t_end: 1.0, ..spec };
        assert!(source_rates(&later, &g, &s, 2.0).r_ext.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn imposed_mismatch_is_reported() {
        let g = grid();
        let mut s = init_state(&g, &ConstitutiveModel::default(), 1.0, &InitialProfile::uniform(4.0, 1.0)).unwrap();
        s.rho[7] *= 1.25;
        assert!((consistency_rho_j(&g, &s, 1.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn vortex_is_tangential_on_walls() {
        let g = grid();
        let mut p = InitialProfile::uniform(2.0, 1.0);
        p.velocity = VelocityProfile::Vortex { amplitude: 1.0 };
        let v = p.velocity_at(&g, [0.0, 0.3, 0.5]);
        assert!(v[0].abs() < 1e-15);
        let v = p.velocity_at(&g, [0.3, 1.0, 0.5]);
        assert!(v[1].abs() < 1e-15);
    }
}
