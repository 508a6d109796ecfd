//! Finite-volume right-hand side shared by one- and two-component runs.

use rayon::prelude::*;

use crate::constitutive::{eval_thermo, temperature_from_w, ConstitutiveModel};
use crate::diagnostics::{Col, Terms};
use crate::error::{Error, Result};
use crate::gravity::{coriolis, field_energy_tail, GravityContext, PotentialField};
use crate::mixture::{friction_pair, mixing_energy, mixing_pressures, mixing_stiffness, exchange_pair, MixtureParams};
use crate::state::{barycenter, kinetic_density, FieldState, Floors, Grid, SourceSpec};
use crate::tensor::{dot, norm2, sub, Mat3, Vec3, ZERO3};

use super::{Flux, Tendency};

/// Cell primitives of one component.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Prim {
    pub rho: f64,
    pub v: Vec3,
    pub j: f64,
    /// `1/J`, transported conservatively alongside ρ.
    pub q: f64,
    pub w: f64,
    pub theta: f64,
    /// Total pressure, including the mixing part.
    pub p: f64,
    pub cs: f64,
    pub mu: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub c: f64,
    pub eta: f64,
    pub phi: f64,
    pub dphi: f64,
    pub gamma_j: f64,
}

/// Borrowed description of the system being integrated.
#[derive(Clone, Copy)]
pub struct Engine<'a> {
    pub grid: &'a Grid,
    pub models: &'a [ConstitutiveModel],
    pub sources: &'a [SourceSpec],
    pub mixture: Option<&'a MixtureParams>,
    pub gravity: &'a GravityContext,
    pub flux: Flux,
}

/// Result of one right-hand-side evaluation.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub tendencies: Vec<Tendency>,
    pub potential: PotentialField,
    /// Ledger integrals and rates at the evaluated state.
    pub terms: Terms,
    /// Largest stable step for this state at unit CFL.
    pub dt_limit: f64,
}

impl<'a> Engine<'a> {
    pub fn floors(&self, k: usize) -> Floors {
        Floors::for_density(self.sources[k].rho0)
    }

    fn coupled(&self) -> Option<&'a MixtureParams> {
        if self.models.len() == 2 {
            self.mixture
        } else {
            None
        }
    }

    fn step_error(t: f64, e: Error) -> Error {
        Error::Step {
            t,
            message: e.to_string(),
        }
    }

    /// Primitive variables of every component on every active cell.
    pub(crate) fn primitives(&self, phases: &[FieldState]) -> Result<Vec<Vec<Prim>>> {
        let grid = self.grid;
        let t = phases[0].t;
        let mix = self.coupled();
        let per_cell: Vec<Result<Vec<Prim>>> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let mut out = vec![Prim::default(); phases.len()];
                if !grid.domain_mask[i] {
                    return Ok(out);
                }
                let (p_mix, stiff) = match mix {
                    Some(m) => {
                        let (a, b) = mixing_pressures(m, phases[0].j[i], phases[1].j[i])
                            .map_err(|e| Self::step_error(t, e))?;
                        let (sa, sb) = mixing_stiffness(m, phases[0].j[i], phases[1].j[i]);
                        ([a, b], [sa, sb])
                    }
                    None => ([0.0; 2], [0.0; 2]),
                };
                for (k, st) in phases.iter().enumerate() {
                    let model = &self.models[k];
                    let floors = self.floors(k);
                    let j = st.j[i];
                    let w = st.w[i];
                    let theta = temperature_from_w(model, j, w).map_err(|e| Self::step_error(t, e))?;
                    let th = eval_thermo(model, j, theta).map_err(|e| Self::step_error(t, e))?;
                    let rho0 = self.sources[k].rho0;
                    let stiffness = th.psi_jj + stiff[k];
                    let p = if mix.is_some() { th.p + p_mix[k] } else { th.p };
                    out[k] = Prim {
                        rho: st.rho[i],
                        v: st.velocity(i, floors.rho),
                        j,
                        q: 1.0 / j,
                        w,
                        theta,
                        p,
                        cs: (stiffness.max(0.0) * j * j / rho0).sqrt(),
                        mu: model.viscosity.mu_at(j, theta),
                        lambda: model.viscosity.lambda_at(j, theta),
                        kappa: model.viscosity.kappa_at(j, theta),
                        c: th.c,
                        eta: th.eta,
                        phi: th.phi,
                        dphi: th.dphi,
                        gamma_j: th.gamma_j,
                    };
                }
                Ok(out)
            })
            .collect();
        let mut prims = vec![vec![Prim::default(); grid.len()]; phases.len()];
        for (i, cell) in per_cell.into_iter().enumerate() {
            for (k, p) in cell?.into_iter().enumerate() {
                prims[k][i] = p;
            }
        }
        Ok(prims)
    }

    /// Largest stable step at unit CFL.
    pub(crate) fn dt_limit(&self, prims: &[Vec<Prim>]) -> f64 {
        let grid = self.grid;
        let h = grid.h;
        let mix = self.coupled();
        let omega = self.gravity.omega.abs();
        let limits: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                if !grid.domain_mask[i] {
                    return f64::INFINITY;
                }
                let mut coupling = 2.0 * omega * h;
                if let Some(m) = mix {
                    let (a, b) = (&prims[0][i], &prims[1][i]);
                    let f = m.friction_coefficient(a.rho, b.rho);
                    let k = m.heat_coefficient(a.rho, b.rho);
                    if f > 0.0 {
                        coupling += h * f * (1.0 / a.rho + 1.0 / b.rho);
                    }
                    if k > 0.0 {
                        coupling += h * k * (1.0 / a.c + 1.0 / b.c);
                    }
                }
                let mut best = f64::INFINITY;
                for (kk, ps) in prims.iter().enumerate() {
                    let p = &ps[i];
                    let rho = p.rho.max(self.floors(kk).rho);
                    let mut denom = p.v[0].abs() + p.v[1].abs() + p.v[2].abs() + 3.0 * p.cs + coupling;
                    let nu = 2.0 * p.mu + p.lambda;
                    if nu > 0.0 {
                        denom += 6.0 * nu / (rho * h);
                    }
                    if p.kappa > 0.0 {
                        denom += 6.0 * p.kappa / (p.c * h);
                    }
                    if denom > 0.0 {
                        best = best.min(h / denom);
                    }
                }
                best
            })
            .collect();
        limits.into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Evaluate every tendency and the ledger integrals at `phases`.
    pub fn evaluate(&self, phases: &[FieldState]) -> Result<Evaluation> {
        assert_eq!(phases.len(), self.models.len());
        assert_eq!(phases.len(), self.sources.len());
        let grid = self.grid;
        let n = grid.len();
        let nc = phases.len();
        let t = phases[0].t;
        let prims = self.primitives(phases)?;
        let dt_limit = self.dt_limit(&prims);

        let potential = if self.gravity.enabled {
            let mut rho = phases[0].rho.clone();
            for st in &phases[1..] {
                for (a, b) in rho.iter_mut().zip(&st.rho) {
                    *a += b;
                }
            }
            self.gravity.solve(grid, &rho)
        } else {
            PotentialField::zeros(n)
        };

        let grads: Vec<Vec<Mat3>> = prims
            .iter()
            .map(|ps| {
                (0..n)
                    .into_par_iter()
                    .map(|i| if grid.domain_mask[i] { cell_gradient(grid, ps, i) } else { [[0.0; 3]; 3] })
                    .collect()
            })
            .collect();

        let global_speed = match self.flux {
            Flux::Upwind => None,
            Flux::CentralDiffusive => Some(
                prims
                    .iter()
                    .flat_map(|ps| ps.iter().map(|p| p.v.iter().fold(0.0f64, |m, c| m.max(c.abs())) + p.cs))
                    .fold(0.0f64, f64::max),
            ),
        };

        let ctx = CellContext {
            engine: self,
            prims: &prims,
            grads: &grads,
            potential: &potential,
            global_speed,
            t,
        };

        const CHUNK: usize = 512;
        let chunks: Vec<Result<ChunkOut>> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(n);
                let mut out = ChunkOut {
                    cells: Vec::with_capacity(hi - lo),
                    terms: Terms::default(),
                    ext: Extremes::default(),
                };
                for i in lo..hi {
                    let cell = if grid.domain_mask[i] {
                        ctx.cell(i, phases, &mut out.terms, &mut out.ext)?
                    } else {
                        [CellTendency::default(); 2]
                    };
                    out.cells.push(cell);
                }
                Ok(out)
            })
            .collect();

        let mut tendencies: Vec<Tendency> = (0..nc).map(|_| Tendency::zeros(n)).collect();
        let mut terms = Terms::default();
        let mut ext = Extremes::default();
        let mut i = 0;
        for chunk in chunks {
            let chunk = chunk?;
            terms.accumulate(&chunk.terms);
            ext.merge(&chunk.ext);
            for cell in chunk.cells {
                for (k, td) in tendencies.iter_mut().enumerate() {
                    td.d_rho[i] = cell[k].d_rho;
                    td.d_mom[i] = cell[k].d_mom;
                    td.d_j[i] = cell[k].d_j;
                    td.d_w[i] = cell[k].d_w;
                }
                i += 1;
            }
        }

        let dv = grid.cell_volume();
        terms.scale(dv);
        terms.set(Col::MaxRho, ext.max_rho);
        terms.set(Col::MinJ, ext.min_j);
        terms.set(Col::RhoJDrift, ext.drift);
        terms.set(Col::PotMaxSquared, ext.pot_max2);
        terms.set(Col::SProductionMin, ext.s_prod_min);
        terms.set(Col::VacuumCells, ext.vacuum);
        terms.set(
            Col::Mass,
            terms.get(Col::Mass0) + terms.get(Col::Mass1),
        );
        let physical = [
            Col::PKineticIn,
            Col::PFrictionIn,
            Col::PStoredIn,
            Col::PThermalIn,
            Col::PPressureIn,
            Col::PHeat,
            Col::PGravIn,
        ]
        .iter()
        .map(|&c| terms.get(c))
        .sum::<f64>();
        terms.set(Col::PPhysical, physical);
        terms.set(Col::PScheme, terms.get(Col::PChain) - physical);
        terms.set(
            Col::SProduction,
            [Col::SConduction, Col::SHeating, Col::SInflow, Col::SExchange, Col::SFriction]
                .iter()
                .map(|&c| terms.get(c))
                .sum(),
        );
        terms.set(
            Col::TotalEnergy,
            terms.get(Col::Kinetic)
                + terms.get(Col::Stored)
                + terms.get(Col::Thermal)
                + 0.5 * terms.get(Col::GravEnergy)
                + terms.get(Col::MixingEnergy),
        );
        if self.gravity.enabled && self.gravity.g_const > 0.0 {
            let g2: f64 = potential.g.iter().map(|g| norm2(*g)).sum();
            let g_const = self.gravity.g_const;
            let domain = g2 * dv / (8.0 * std::f64::consts::PI * g_const);
            let tail = field_energy_tail(g_const, terms.get(Col::Mass), barycenter(grid, phases), grid);
            terms.set(Col::FieldEnergy, domain + tail);
            terms.set(Col::FieldTail, tail);
        }

        Ok(Evaluation {
            tendencies,
            potential,
            terms,
            dt_limit,
        })
    }
}

struct ChunkOut {
    cells: Vec<[CellTendency; 2]>,
    terms: Terms,
    ext: Extremes,
}

#[derive(Clone, Copy, Debug)]
struct Extremes {
    max_rho: f64,
    min_j: f64,
    drift: f64,
    pot_max2: f64,
    s_prod_min: f64,
    vacuum: f64,
}

impl Default for Extremes {
    fn default() -> Self {
        Self {
            max_rho: 0.0,
            min_j: f64::INFINITY,
            drift: 0.0,
            pot_max2: 0.0,
            s_prod_min: f64::INFINITY,
            vacuum: 0.0,
        }
    }
}

impl Extremes {
    fn merge(&mut self, o: &Extremes) {
        self.max_rho = self.max_rho.max(o.max_rho);
        self.min_j = self.min_j.min(o.min_j);
        self.drift = self.drift.max(o.drift);
        self.pot_max2 = self.pot_max2.max(o.pot_max2);
        self.s_prod_min = self.s_prod_min.min(o.s_prod_min);
        self.vacuum += o.vacuum;
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct CellTendency {
    d_rho: f64,
    d_mom: Vec3,
    d_j: f64,
    d_w: f64,
}

/// Face fluxes in the +axis direction.
#[derive(Clone, Copy, Debug, Default)]
struct FaceFlux {
    mass: f64,
    q: f64,
    mom: Vec3,
    w: f64,
}

/// Mirror image of a cell across a wall normal to `axis`.
#[inline]
fn ghost(p: &Prim, g: &Mat3, axis: usize) -> (Prim, Mat3) {
    let mut gp = *p;
    gp.v[axis] = -gp.v[axis];
    let mut gg = *g;
    for b in 0..3 {
        for c in 0..3 {
            if (b == axis) != (c == axis) {
                gg[b][c] = -gg[b][c];
            }
        }
    }
    (gp, gg)
}

/// Central-difference velocity gradient `G[b][c] = ∂v_b/∂x_c`.
fn cell_gradient(grid: &Grid, prims: &[Prim], i: usize) -> Mat3 {
    let h2 = 2.0 * grid.h;
    let vi = prims[i].v;
    let mut g = [[0.0; 3]; 3];
    for c in 0..3 {
        let side = |dir: i32| match grid.neighbor(i, c, dir) {
            Some(j) => prims[j].v,
            None => {
                let mut v = vi;
                v[c] = -v[c];
                v
            }
        };
        let (lo, hi) = (side(-1), side(1));
        for b in 0..3 {
            g[b][c] = (hi[b] - lo[b]) / h2;
        }
    }
    g
}

struct CellContext<'a, 'b> {
    engine: &'b Engine<'a>,
    prims: &'b [Vec<Prim>],
    grads: &'b [Vec<Mat3>],
    potential: &'b PotentialField,
    global_speed: Option<f64>,
    t: f64,
}

impl CellContext<'_, '_> {
    /// Flux through the face between `l` (lower) and `r` (upper) on `axis`.
    #[inline]
    fn face_flux(&self, l: &Prim, r: &Prim, gl: &Mat3, gr: &Mat3, axis: usize) -> FaceFlux {
        let h = self.engine.grid.h;
        let a = axis;
        let s = self
            .global_speed
            .unwrap_or_else(|| (l.v[a].abs() + l.cs).max(r.v[a].abs() + r.cs));
        let (ul, ur) = (l.v[a], r.v[a]);
        let ml = [l.rho * l.v[0], l.rho * l.v[1], l.rho * l.v[2]];
        let mr = [r.rho * r.v[0], r.rho * r.v[1], r.rho * r.v[2]];
        let mass = 0.5 * (l.rho * ul + r.rho * ur) - 0.5 * s * (r.rho - l.rho);
        let q = 0.5 * (l.q * ul + r.q * ur) - 0.5 * s * (r.q - l.q);
        let pf = 0.5 * (l.p + r.p);
        let mut mom = [0.0; 3];
        for b in 0..3 {
            mom[b] = 0.5 * (ml[b] * ul + mr[b] * ur) - 0.5 * s * (mr[b] - ml[b]);
        }
        mom[a] += pf;

        let mu = 0.5 * (l.mu + r.mu);
        let lambda = 0.5 * (l.lambda + r.lambda);
        if mu != 0.0 || lambda != 0.0 {
            // Normal derivatives from the two cells, tangential ones averaged.
            let dn: Vec3 = [0, 1, 2].map(|b| (r.v[b] - l.v[b]) / h);
            let mut div = dn[a];
            for c in 0..3 {
                if c != a {
                    div += 0.5 * (gl[c][c] + gr[c][c]);
                }
            }
            for b in 0..3 {
                let cross = if b == a { dn[a] } else { 0.5 * (gl[a][b] + gr[a][b]) };
                let mut d = mu * (dn[b] + cross);
                if b == a {
                    d += lambda * div;
                }
                mom[b] -= d;
            }
        }

        let kappa = 0.5 * (l.kappa + r.kappa);
        let mut w = 0.5 * (l.w * ul + r.w * ur) - 0.5 * s * (r.w - l.w);
        if kappa != 0.0 {
            w -= kappa * (r.theta - l.theta) / h;
        }
        FaceFlux { mass, q, mom, w }
    }

    fn cell(
        &self,
        i: usize,
        phases: &[FieldState],
        terms: &mut Terms,
        ext: &mut Extremes,
    ) -> Result<[CellTendency; 2]> {
        let eng = self.engine;
        let grid = eng.grid;
        let h = grid.h;
        let area = h * h;
        let dv = grid.cell_volume();
        let v_pot = self.potential.v[i];
        let g = self.potential.g[i];
        let omega = eng.gravity.omega;
        let nc = phases.len();

        let mut out = [CellTendency::default(); 2];
        let mut grad_j = [ZERO3; 2];
        let mut prod_min = f64::INFINITY;
        let mut rho_total = 0.0;

        for k in 0..nc {
            let p = &self.prims[k][i];
            let gi = &self.grads[k][i];
            let src = eng.sources[k].cell_rates(grid, i, p.j, p.v, self.t);
            let floors = eng.floors(k);

            let mut div_f = FaceFlux::default();
            let mut div_v = 0.0;
            let mut grad_theta = ZERO3;
            for a in 0..3 {
                let mut sides = [(*p, *gi); 2];
                let mut fluxes = [FaceFlux::default(); 2];
                for (s, dir) in [-1, 1].into_iter().enumerate() {
                    let nb = grid.neighbor(i, a, dir);
                    let (pn, gn) = match nb {
                        Some(j) => (self.prims[k][j], self.grads[k][j]),
                        None => ghost(p, gi, a),
                    };
                    sides[s] = (pn, gn);
                    let f = if dir < 0 {
                        self.face_flux(&pn, p, &gn, gi, a)
                    } else {
                        self.face_flux(p, &pn, gi, &gn, a)
                    };
                    if nb.is_none() {
                        // Force exerted by the wall on the fluid.
                        let sign = if dir < 0 { area } else { -area };
                        // Stored as a density; the cell volume is applied with the rest.
                        let force = [0, 1, 2].map(|b| sign * f.mom[b] / dv);
                        terms.add3(Col::WallX, force);
                        terms.add(Col::WallAbs, norm2(force).sqrt());
                    }
                    fluxes[s] = f;
                }
                let (lo, hi) = (&sides[0].0, &sides[1].0);
                div_v += (hi.v[a] - lo.v[a]) / (2.0 * h);
                grad_theta[a] = (hi.theta - lo.theta) / (2.0 * h);
                grad_j[k][a] = (hi.j - lo.j) / (2.0 * h);
                let (fl, fh) = (&fluxes[0], &fluxes[1]);
                div_f.mass += (fh.mass - fl.mass) / h;
                div_f.q += (fh.q - fl.q) / h;
                div_f.w += (fh.w - fl.w) / h;
                for b in 0..3 {
                    div_f.mom[b] += (fh.mom[b] - fl.mom[b]) / h;
                }
            }

            // Viscous heating from the cell-centred strain rate.
            let mut e = [[0.0; 3]; 3];
            for b in 0..3 {
                for c in 0..3 {
                    e[b][c] = 0.5 * (gi[b][c] + gi[c][b]);
                }
            }
            let (_, xi_k) = crate::constitutive::newtonian_stress(p.mu, p.lambda, &e);

            let cor = coriolis(omega, p.rho, p.v);
            let grav = [p.rho * g[0], p.rho * g[1], p.rho * g[2]];
            let d_rho = -div_f.mass + src.r_ext;
            let d_q = -div_f.q + p.q * src.volume;
            let mut d_mom = [0.0; 3];
            for b in 0..3 {
                d_mom[b] = -div_f.mom[b] + src.momentum[b] + grav[b] + cor[b];
            }
            let d_w = -div_f.w + xi_k + p.gamma_j * (div_v - src.volume) + p.w * src.volume + src.heat;
            out[k] = CellTendency {
                d_rho,
                d_mom,
                d_j: -p.j * p.j * d_q,
                d_w,
            };

            // Ledger contributions.
            let st = &phases[k];
            rho_total += p.rho;
            terms.add(if k == 0 { Col::Mass0 } else { Col::Mass1 }, p.rho);
            terms.add3(Col::MomX, st.mom[i]);
            terms.add(Col::MomAbs, norm2(st.mom[i]).sqrt());
            terms.add(Col::Kinetic, kinetic_density(st.mom[i], p.v));
            terms.add(Col::Stored, p.phi / p.j);
            terms.add(Col::Thermal, p.w);
            terms.add(Col::Entropy, p.eta);
            terms.add(Col::EntropyScale, p.eta.abs());
            terms.add(Col::IncomingMass, src.r_ext);
            terms.add3(Col::IncomingMomX, src.momentum);
            terms.add3(Col::CoriolisX, cor);
            terms.add(Col::CoriolisPower, dot(cor, p.v));
            terms.add3(Col::GravityMomX, grav);
            terms.add(Col::GravityMomAbs, norm2(grav).sqrt());
            terms.add(Col::ViscousDissipation, xi_k);
            terms.add(Col::AdiabaticPower, p.gamma_j * div_v);
            if src.volume != 0.0 || src.heat != 0.0 {
                let dvel = sub(p.v, src.velocity);
                terms.add(Col::PKineticIn, 0.5 * src.r_ext * norm2(src.velocity));
                terms.add(Col::PFrictionIn, -0.5 * src.r_ext * norm2(dvel));
                terms.add(Col::PStoredIn, p.phi / p.j * src.volume);
                terms.add(Col::PThermalIn, p.w * src.volume);
                terms.add(Col::PPressureIn, p.p * src.volume);
                terms.add(Col::PHeat, src.heat);
                terms.add(Col::PGravIn, src.r_ext * v_pot);
            }
            let s_cond = p.kappa * norm2(grad_theta) / (p.theta * p.theta);
            let s_heat = (xi_k + src.heat) / p.theta;
            let s_in = src.volume * p.eta;
            terms.add(Col::SConduction, s_cond);
            terms.add(Col::SHeating, s_heat);
            terms.add(Col::SInflow, s_in);
            prod_min = prod_min.min(s_cond).min(s_heat).min(s_in);

            ext.max_rho = ext.max_rho.max(p.rho);
            ext.min_j = ext.min_j.min(p.j);
            let rho0 = eng.sources[k].rho0;
            ext.drift = ext.drift.max((p.rho * p.j - rho0).abs() / rho0);
            if p.rho < 1e3 * floors.rho {
                ext.vacuum += 1.0;
            }
        }

        let mut phi_mix_partials = (0.0, 0.0);
        if let Some(m) = eng.coupled() {
            let (pm, ps) = (&self.prims[0][i], &self.prims[1][i]);
            let f = m.friction_coefficient(pm.rho, ps.rho);
            if f != 0.0 {
                let (on_m, on_s, diss) = friction_pair(f, pm.v, ps.v);
                for b in 0..3 {
                    out[0].d_mom[b] += on_m[b];
                    out[1].d_mom[b] += on_s[b];
                }
                out[0].d_w += 0.5 * diss;
                out[1].d_w += 0.5 * diss;
                terms.add3(Col::FrictionPairX, [on_m[0] + on_s[0], on_m[1] + on_s[1], on_m[2] + on_s[2]]);
                terms.add(Col::FrictionDissipation, diss);
                let s_f = 0.5 * diss * (pm.theta + ps.theta) / (pm.theta * ps.theta);
                terms.add(Col::SFriction, s_f);
                prod_min = prod_min.min(s_f);
            }
            let kx = m.heat_coefficient(pm.rho, ps.rho);
            if kx != 0.0 {
                let (q_m, q_s, s_x) = exchange_pair(kx, pm.theta, ps.theta).map_err(|e| Engine::step_error(self.t, e))?;
                out[0].d_w += q_m;
                out[1].d_w += q_s;
                terms.add(Col::HeatExchangeSum, q_m + q_s);
                terms.add(Col::SExchange, s_x);
                prod_min = prod_min.min(s_x);
            }
            if m.varkappa != 0.0 {
                let (phi, d_m, d_s) = mixing_energy(m, pm.j, ps.j).map_err(|e| Engine::step_error(self.t, e))?;
                if phi != 0.0 || d_m != 0.0 || d_s != 0.0 {
                    let fm = [-d_m * grad_j[0][0], -d_m * grad_j[0][1], -d_m * grad_j[0][2]];
                    let fs = [-d_s * grad_j[1][0], -d_s * grad_j[1][1], -d_s * grad_j[1][2]];
                    for b in 0..3 {
                        out[0].d_mom[b] += fm[b];
                        out[1].d_mom[b] += fs[b];
                    }
                    terms.add3(Col::MixingMomX, [fm[0] + fs[0], fm[1] + fs[1], fm[2] + fs[2]]);
                    terms.add(Col::MixingEnergy, phi);
                }
                phi_mix_partials = (d_m, d_s);
            }
        }
        ext.s_prod_min = ext.s_prod_min.min(prod_min);

        // Chain-rule time derivative of the total energy under this tendency.
        let mut chain = 0.0;
        for k in 0..nc {
            let p = &self.prims[k][i];
            let o = &out[k];
            chain += dot(p.v, o.d_mom) - 0.5 * norm2(p.v) * o.d_rho
                + (p.dphi / p.j - p.phi / (p.j * p.j)) * o.d_j
                + o.d_w
                + v_pot * o.d_rho;
        }
        if nc == 2 {
            chain += phi_mix_partials.0 * out[0].d_j + phi_mix_partials.1 * out[1].d_j;
        }
        terms.add(Col::PChain, chain);
        terms.add(Col::GravEnergy, rho_total * v_pot);
        terms.add(Col::RhoSquared, rho_total * rho_total);
        terms.add(Col::PotSquared, v_pot * v_pot);
        ext.pot_max2 = ext.pot_max2.max(v_pot * v_pot);
        Ok(out)
    }
}
