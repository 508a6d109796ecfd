//! Finite-volume discretisation and explicit time stepping.
//!
//! Each component carries `(ρ, ρv, J, w)` per cell. Fluxes of ρ, ρv, w and
//! `1/J` use local Lax-Friedrichs (Rusanov) upwinding; pressure, viscous
//! stress and heat conduction are centred. `J` itself is advanced through
//! its reciprocal, which obeys a continuity equation with the same face
//! fluxes as ρ, so the two stay consistent up to time-integration error.
//! Walls are mirror ghosts: normal velocity reflected, everything else
//! copied, giving zero mass flux and free slip.

mod rhs;

use serde::{Deserialize, Serialize};

use crate::constitutive::ConstitutiveModel;
use crate::diagnostics::{Col, Terms};
use crate::error::{Error, Result};
use crate::gravity::GravityContext;
use crate::mixture::MixtureParams;
use crate::state::{FieldState, Floors, Grid, SourceSpec, TwoPhaseState};
use crate::tensor::{Vec3, ZERO3};

pub use rhs::{Engine, Evaluation};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flux {
    /// Local Lax-Friedrichs: per-face wave speed.
    #[default]
    Upwind,
    /// Global Lax-Friedrichs: one wave speed for the whole grid.
    CentralDiffusive,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    ForwardEuler,
    #[default]
    SspRk2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub cfl: f64,
    #[serde(default)]
    pub flux: Flux,
    #[serde(default)]
    pub integrator: Integrator,
    /// s.
    pub dt_max: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cfl: 0.4,
            flux: Flux::Upwind,
            integrator: Integrator::SspRk2,
            dt_max: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::config("time.cfl", format!("must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return Err(Error::config("time.dt_max", "must be positive and finite"));
        }
        Ok(())
    }
}

/// Time derivatives of the fields of one component.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tendency {
    pub d_rho: Vec<f64>,
    pub d_mom: Vec<Vec3>,
    pub d_j: Vec<f64>,
    pub d_w: Vec<f64>,
}

impl Tendency {
    pub fn zeros(len: usize) -> Self {
        Self {
            d_rho: vec![0.0; len],
            d_mom: vec![ZERO3; len],
            d_j: vec![0.0; len],
            d_w: vec![0.0; len],
        }
    }
}

/// Right-hand side of the single-component system.
pub fn rhs_single(
    state: &FieldState,
    model: &ConstitutiveModel,
    gravity: &GravityContext,
    sources: &SourceSpec,
    grid: &Grid,
) -> Result<Tendency> {
    let engine = Engine {
        grid,
        models: std::slice::from_ref(model),
        sources: std::slice::from_ref(sources),
        mixture: None,
        gravity,
        flux: Flux::Upwind,
    };
    let mut eval = engine.evaluate(std::slice::from_ref(state))?;
    Ok(eval.tendencies.pop().expect("one component"))
}

/// Right-hand sides of the metal and silicate components.
pub fn rhs_two(
    state: &TwoPhaseState,
    models: &[ConstitutiveModel; 2],
    mixture: &MixtureParams,
    gravity: &GravityContext,
    sources: &[SourceSpec; 2],
    grid: &Grid,
) -> Result<(Tendency, Tendency)> {
    let engine = Engine {
        grid,
        models,
        sources,
        mixture: Some(mixture),
        gravity,
        flux: Flux::Upwind,
    };
    let mut eval = engine.evaluate(&state.phases)?;
    let s = eval.tendencies.pop().expect("two components");
    let m = eval.tendencies.pop().expect("two components");
    Ok((m, s))
}

/// A wall face of an active cell: the cell, the face normal axis and the
/// side (`-1` lower, `+1` upper).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WallFace {
    pub cell: usize,
    pub axis: usize,
    pub dir: i32,
}

/// Ghost values mirrored across one wall face.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GhostCell {
    pub face: WallFace,
    pub rho: f64,
    pub mom: Vec3,
    pub j: f64,
    pub w: f64,
}

pub fn wall_faces(grid: &Grid) -> Vec<WallFace> {
    let mut out = Vec::new();
    for cell in 0..grid.len() {
        if !grid.domain_mask[cell] {
            continue;
        }
        for axis in 0..3 {
            for dir in [-1, 1] {
                if grid.neighbor(cell, axis, dir).is_none() {
                    out.push(WallFace { cell, axis, dir });
                }
            }
        }
    }
    out
}

/// Ghost states for every wall face: normal momentum reflected, tangential
/// momentum and scalars copied. The solver builds the same mirror images
/// internally when it assembles face fluxes.
pub fn apply_boundary(state: &FieldState, grid: &Grid) -> Vec<GhostCell> {
    wall_faces(grid)
        .into_iter()
        .map(|face| {
            let i = face.cell;
            let mut mom = state.mom[i];
            mom[face.axis] = -mom[face.axis];
            GhostCell {
                face,
                rho: state.rho[i],
                mom,
                j: state.j[i],
                w: state.w[i],
            }
        })
        .collect()
}

/// Stable step for a single-component state.
pub fn stable_dt(
    state: &FieldState,
    model: &ConstitutiveModel,
    config: &SolverConfig,
    grid: &Grid,
    rho0: f64,
) -> Result<f64> {
    let gravity = GravityContext::disabled(grid, 0.0);
    let source = SourceSpec::off(rho0);
    let engine = Engine {
        grid,
        models: std::slice::from_ref(model),
        sources: std::slice::from_ref(&source),
        mixture: None,
        gravity: &gravity,
        flux: config.flux,
    };
    let prims = engine.primitives(std::slice::from_ref(state))?;
    finish_dt(engine.dt_limit(&prims), config, state.t)
}

pub(crate) fn finish_dt(limit: f64, config: &SolverConfig, t: f64) -> Result<f64> {
    if limit.is_nan() {
        return Err(Error::DegenerateDt { dt: limit, t });
    }
    let dt = (config.cfl * limit).min(config.dt_max);
    if !(dt.is_finite() && dt > 1e-14 * config.dt_max) {
        return Err(Error::DegenerateDt { dt, t });
    }
    Ok(dt)
}

/// Outcome of one step.
#[derive(Clone, Debug)]
pub struct StepResult {
    pub phases: Vec<FieldState>,
    /// Integrator-weighted integrals over the step of the rates in the
    /// initial evaluation's ledger terms (mass source, momentum rates).
    pub integrals: Terms,
    pub w_clamped: usize,
}

fn axpy(base: &FieldState, dt: f64, td: &Tendency, grid: &Grid) -> FieldState {
    let mut out = base.clone();
    for i in 0..grid.len() {
        if !grid.domain_mask[i] {
            continue;
        }
        out.rho[i] = base.rho[i] + dt * td.d_rho[i];
        for a in 0..3 {
            out.mom[i][a] = base.mom[i][a] + dt * td.d_mom[i][a];
        }
        out.j[i] = base.j[i] + dt * td.d_j[i];
        out.w[i] = base.w[i] + dt * td.d_w[i];
    }
    out.t = base.t + dt;
    out
}

fn average(a: &FieldState, b: &FieldState, grid: &Grid) -> FieldState {
    let mut out = a.clone();
    for i in 0..grid.len() {
        if !grid.domain_mask[i] {
            continue;
        }
        out.rho[i] = 0.5 * a.rho[i] + 0.5 * b.rho[i];
        for c in 0..3 {
            out.mom[i][c] = 0.5 * a.mom[i][c] + 0.5 * b.mom[i][c];
        }
        out.j[i] = 0.5 * a.j[i] + 0.5 * b.j[i];
        out.w[i] = 0.5 * a.w[i] + 0.5 * b.w[i];
    }
    out
}

/// Enforce floors: negative thermal energy is clamped (and counted), any
/// density or Jacobian below its floor aborts the step.
fn enforce(state: &mut FieldState, grid: &Grid, floors: Floors) -> Result<usize> {
    let mut clamped = 0;
    for i in 0..grid.len() {
        if !grid.domain_mask[i] {
            continue;
        }
        let (rho, j) = (state.rho[i], state.j[i]);
        if !(rho >= floors.rho) || !(j >= floors.j) || !state.mom[i].iter().all(|m| m.is_finite()) {
            let x = grid.ijk(i);
            return Err(Error::Step {
                t: state.t,
                message: format!("floor violated in cell {x:?}: rho = {rho:e}, J = {j:e}"),
            });
        }
        if !state.w[i].is_finite() {
            return Err(Error::Step {
                t: state.t,
                message: format!("non-finite thermal energy in cell {:?}", grid.ijk(i)),
            });
        }
        if state.w[i] < 0.0 {
            state.w[i] = 0.0;
            clamped += 1;
        }
    }
    Ok(clamped)
}

fn momentum_rate(t: &Terms) -> Vec3 {
    let mut r = ZERO3;
    for first in [Col::IncomingMomX, Col::CoriolisX, Col::GravityMomX, Col::WallX, Col::MixingMomX, Col::FrictionPairX] {
        let v = t.get3(first);
        for a in 0..3 {
            r[a] += v[a];
        }
    }
    r
}

fn weighted_integrals(evals: &[(&Terms, f64)], dt: f64) -> Terms {
    let mut out = Terms::default();
    for (t, w) in evals {
        out.add(Col::StepMassIn, dt * w * t.get(Col::IncomingMass));
        let m = momentum_rate(t);
        out.add3(Col::StepMomX, [dt * w * m[0], dt * w * m[1], dt * w * m[2]]);
        out.add(Col::StepForceAbs, dt * w * (t.get(Col::WallAbs) + t.get(Col::GravityMomAbs)));
    }
    out
}

/// Advance by `dt`. `first` must be the evaluation of `phases`; for the
/// two-stage scheme the second evaluation is done here.
pub fn step(
    engine: &Engine<'_>,
    integrator: Integrator,
    phases: &[FieldState],
    first: &Evaluation,
    dt: f64,
) -> Result<StepResult> {
    advance_with(engine.grid, &|k| engine.floors(k), integrator, phases, first, dt, |s| engine.evaluate(s))
}

/// The stage logic of [`step`] over an arbitrary right-hand side.
pub(crate) fn advance_with(
    grid: &Grid,
    floors: &dyn Fn(usize) -> Floors,
    integrator: Integrator,
    phases: &[FieldState],
    first: &Evaluation,
    dt: f64,
    mut evaluate: impl FnMut(&[FieldState]) -> Result<Evaluation>,
) -> Result<StepResult> {
    let mut clamped = 0;
    let mut stage1: Vec<FieldState> = Vec::with_capacity(phases.len());
    for (k, st) in phases.iter().enumerate() {
        let mut s = axpy(st, dt, &first.tendencies[k], grid);
        clamped += enforce(&mut s, grid, floors(k))?;
        stage1.push(s);
    }
    match integrator {
        Integrator::ForwardEuler => Ok(StepResult {
            phases: stage1,
            integrals: weighted_integrals(&[(&first.terms, 1.0)], dt),
            w_clamped: clamped,
        }),
        Integrator::SspRk2 => {
            let second = evaluate(&stage1)?;
            let mut out = Vec::with_capacity(phases.len());
            for (k, st) in phases.iter().enumerate() {
                let pushed = axpy(&stage1[k], dt, &second.tendencies[k], grid);
                let mut s = average(st, &pushed, grid);
                s.t = st.t + dt;
                clamped += enforce(&mut s, grid, floors(k))?;
                out.push(s);
            }
            Ok(StepResult {
                phases: out,
                integrals: weighted_integrals(&[(&first.terms, 0.5), (&second.terms, 0.5)], dt),
                w_clamped: clamped,
            })
        }
    }
}
