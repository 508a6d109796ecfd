//! Run driver: owns the state, steps it, records ledger rows and writes
//! snapshots. The CLI and the test suites both go through this type.

use std::fmt;
use std::path::{Path, PathBuf};

use crate::constitutive::{check_assumptions, AssumptionConfig, AssumptionReport, ConstitutiveModel};
use crate::constitutive::{STANDARD_J_RANGE, STANDARD_SAMPLES, STANDARD_THETA_RANGE};
use crate::diagnostics::{
    energy_audit, entropy_audit, entropy_tolerance, gravity_momentum_audit, mass_audit, momentum_audit,
    stability_audit, BalanceLedger, Col, EnergyAudit, EntropyAudit, LedgerRow, StabilityInputs, StabilityReport,
};
use crate::error::{Error, Result};
use crate::gravity::{domain_constant, GravityContext};
use crate::mixture::MixtureParams;
use crate::scenario::{Scenario, Shape, StabilityConfig};
use crate::solver::{self, finish_dt, Engine, Evaluation, SolverConfig};
use crate::state::{init_state, read_snapshot, write_snapshot, FieldState, Grid, Snapshot, SourceSpec};

/// Field-name suffixes of the components.
pub fn component_suffixes(count: usize) -> &'static [&'static str] {
    if count == 2 {
        &["_metal", "_silicate"]
    } else {
        &[""]
    }
}

pub struct Simulation {
    pub grid: Grid,
    pub models: Vec<ConstitutiveModel>,
    pub sources: Vec<SourceSpec>,
    pub mixture: Option<MixtureParams>,
    pub gravity: GravityContext,
    pub config: SolverConfig,
    pub stability: StabilityConfig,
    pub phases: Vec<FieldState>,
    pub ledger: BalanceLedger,
    pub steps: u64,
    pub w_clamped: u64,
    current: Option<Evaluation>,
}

/// Build the grid described by a scenario.
pub fn scenario_grid(s: &Scenario) -> Result<Grid> {
    let h = s.cell_size()?;
    let d = &s.domain;
    let mut grid = Grid::new_box(d.n, h, d.origin);
    if d.shape == Shape::Sphere {
        let r = d
            .radius
            .unwrap_or(0.5 * d.n.iter().copied().min().unwrap_or(1) as f64 * h);
        grid = grid.with_sphere(s.box_center()?, r);
        if grid.active_count() == 0 {
            return Err(Error::config("domain.radius", "no cell centre lies inside the sphere"));
        }
    }
    Ok(grid.with_border(d.border))
}

impl Simulation {
    /// Assemble a run from its parts; `phases` holds one or two components.
    pub fn new(
        grid: Grid,
        models: Vec<ConstitutiveModel>,
        sources: Vec<SourceSpec>,
        mixture: Option<MixtureParams>,
        gravity: GravityContext,
        config: SolverConfig,
        phases: Vec<FieldState>,
    ) -> Result<Self> {
        let nc = phases.len();
        if !(nc == 1 || nc == 2) || models.len() != nc || sources.len() != nc {
            return Err(Error::config("components", "need one or two components with a model and source each"));
        }
        if phases.iter().any(|p| p.len() != grid.len()) {
            return Err(Error::config("initial", "field length does not match the grid"));
        }
        config.validate()?;
        Ok(Self {
            grid,
            models,
            sources,
            mixture,
            gravity,
            config,
            stability: StabilityConfig::default(),
            phases,
            ledger: BalanceLedger::default(),
            steps: 0,
            w_clamped: 0,
            current: None,
        })
    }

    pub fn from_scenario(s: &Scenario) -> Result<Self> {
        let grid = scenario_grid(s)?;
        let nc = if s.is_two_phase() { 2 } else { 1 };
        let model = s.model();
        let rho0 = s.rho0()?;
        let mut phases = Vec::with_capacity(nc);
        let mut sources = Vec::with_capacity(nc);
        for k in 0..nc {
            phases.push(init_state(&grid, &model, rho0[k], &s.initial_profile(k))?);
            sources.push(s.source(k)?);
        }
        let omega = s.omega()?;
        let gravity = if s.gravity.enabled {
            GravityContext::new(&grid, s.g_const()?, omega, s.gravity.method)
        } else {
            GravityContext::disabled(&grid, omega)
        };
        let mut sim = Self::new(grid, vec![model; nc], sources, s.mixture_params(), gravity, s.solver_config(), phases)?;
        sim.stability = s.stability.clone();
        Ok(sim)
    }

    pub fn engine(&self) -> Engine<'_> {
        Engine {
            grid: &self.grid,
            models: &self.models,
            sources: &self.sources,
            mixture: self.mixture.as_ref(),
            gravity: &self.gravity,
            flux: self.config.flux,
        }
    }

    pub fn time(&self) -> f64 {
        self.phases[0].t
    }

    /// Evaluation of the current state, computed once per state.
    pub fn evaluation(&mut self) -> Result<&Evaluation> {
        if self.current.is_none() {
            self.current = Some(self.engine().evaluate(&self.phases)?);
        }
        Ok(self.current.as_ref().expect("just set"))
    }

    /// Stable step for the current state.
    pub fn stable_dt(&mut self) -> Result<f64> {
        let limit = self.evaluation()?.dt_limit;
        finish_dt(limit, &self.config, self.time())
    }

    /// Advance by exactly `dt` and append the ledger row of the state the
    /// step started from.
    pub fn advance(&mut self, dt: f64) -> Result<()> {
        self.evaluation()?;
        let first = self.current.take().expect("evaluated");
        let result = solver::step(&self.engine(), self.config.integrator, &self.phases, &first, dt);
        let result = match result {
            Ok(r) => r,
            Err(e) => {
                self.current = Some(first);
                return Err(e);
            }
        };
        let mut terms = first.terms;
        terms.accumulate(&result.integrals);
        terms.set(Col::WClamped, result.w_clamped as f64);
        self.ledger.push(LedgerRow {
            step: self.steps,
            t: self.time(),
            dt,
            terms,
        });
        self.phases = result.phases;
        self.steps += 1;
        self.w_clamped += result.w_clamped as u64;
        Ok(())
    }

    /// One step at the stable time step; returns the step taken.
    pub fn step(&mut self) -> Result<f64> {
        let dt = self.stable_dt()?;
        self.advance(dt)?;
        Ok(dt)
    }

    /// Append the row of the current state with `dt = 0`. Call once at the
    /// end of a run so the ledger covers the final state.
    pub fn close_ledger(&mut self) -> Result<()> {
        if self.ledger.rows.last().is_some_and(|r| r.dt == 0.0 && r.step == self.steps) {
            return Ok(());
        }
        let terms = self.evaluation()?.terms.clone();
        self.ledger.push(LedgerRow {
            step: self.steps,
            t: self.time(),
            dt: 0.0,
            terms,
        });
        Ok(())
    }

    /// Step until `t_end` (hit exactly) or `max_steps`, whichever is first.
    /// The ledger is left open.
    pub fn run_until(&mut self, t_end: f64, max_steps: Option<u64>) -> Result<()> {
        let opts = RunOptions {
            t_end,
            max_steps,
            snapshot_every: None,
            output_dir: None,
        };
        self.run_loop(&opts, &mut None, &mut Vec::new())
    }

    /// Full run with optional snapshots and ledger output. The ledger is
    /// closed and written even when a step fails; the error is returned
    /// afterwards.
    pub fn run_with(&mut self, opts: &RunOptions) -> Result<RunOutcome> {
        let mut snapshots = Vec::new();
        let mut next_snap = opts.snapshot_every.map(|_| self.time());
        let result = self.run_loop(opts, &mut next_snap, &mut snapshots);
        let closed = self.close_ledger();
        let mut ledger_path = None;
        if let Some(dir) = &opts.output_dir {
            let path = dir.join("ledger.csv");
            self.ledger.save(&path)?;
            ledger_path = Some(path);
            if result.is_ok() && closed.is_ok() && opts.snapshot_every.is_some() {
                let last = snapshots.last().map(|(t, _)| *t);
                if last != Some(self.time()) {
                    snapshots.push((self.time(), self.write_snapshot_in(dir)?));
                }
            }
        }
        result?;
        closed?;
        Ok(RunOutcome {
            steps: self.steps,
            t: self.time(),
            snapshots,
            ledger_path,
        })
    }

    fn run_loop(
        &mut self,
        opts: &RunOptions,
        next_snap: &mut Option<f64>,
        snapshots: &mut Vec<(f64, PathBuf)>,
    ) -> Result<()> {
        let eps = 1e-12 * opts.t_end.abs().max(f64::MIN_POSITIVE);
        loop {
            let t = self.time();
            if let (Some(dir), Some(ts), Some(every)) = (&opts.output_dir, *next_snap, opts.snapshot_every) {
                if t >= ts - eps {
                    snapshots.push((t, self.write_snapshot_in(dir)?));
                    *next_snap = Some(ts + every);
                }
            }
            if t >= opts.t_end - eps || opts.max_steps.is_some_and(|m| self.steps >= m) {
                return Ok(());
            }
            let mut dt = self.stable_dt()?.min(opts.t_end - t);
            if let (Some(ts), Some(_)) = (*next_snap, &opts.output_dir) {
                if ts > t + eps {
                    dt = dt.min(ts - t);
                }
            }
            self.advance(dt)?;
        }
    }

    /// Snapshot fields of the current state.
    pub fn snapshot_fields(&mut self) -> Result<Vec<(String, Vec<f64>)>> {
        let mut out = Vec::new();
        let suffixes = component_suffixes(self.phases.len());
        for (k, st) in self.phases.iter().enumerate() {
            let s = suffixes[k];
            out.push((format!("rho{s}"), st.rho.clone()));
            for (a, name) in ["x", "y", "z"].iter().enumerate() {
                out.push((format!("mom_{name}{s}"), st.mom.iter().map(|m| m[a]).collect()));
            }
            out.push((format!("J{s}"), st.j.clone()));
            out.push((format!("w{s}"), st.w.clone()));
            let theta = (0..self.grid.len())
                .map(|i| {
                    if self.grid.domain_mask[i] {
                        crate::constitutive::temperature_from_w(&self.models[k], st.j[i], st.w[i]).unwrap_or(f64::NAN)
                    } else {
                        0.0
                    }
                })
                .collect();
            out.push((format!("theta{s}"), theta));
        }
        let v = self.evaluation()?.potential.v.clone();
        out.push(("V".to_string(), v));
        Ok(out)
    }

    fn write_snapshot_in(&mut self, out_dir: &Path) -> Result<PathBuf> {
        let dir = out_dir.join("snapshots").join(format!("snap_{:07}", self.steps));
        let fields = self.snapshot_fields()?;
        let refs: Vec<(&str, &[f64])> = fields.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
        write_snapshot(&dir, &self.grid, self.time(), self.steps, &refs)?;
        Ok(dir)
    }

    /// Replace the state by the contents of a snapshot.
    pub fn restore(&mut self, snap: &Snapshot) -> Result<()> {
        if snap.manifest.dims != self.grid.n {
            return Err(Error::config("snapshot.dims", "snapshot grid differs from the scenario grid"));
        }
        let suffixes = component_suffixes(self.phases.len());
        for (k, st) in self.phases.iter_mut().enumerate() {
            let s = suffixes[k];
            st.rho = snap.field(&format!("rho{s}"))?.to_vec();
            let mx = snap.field(&format!("mom_x{s}"))?;
            let my = snap.field(&format!("mom_y{s}"))?;
            let mz = snap.field(&format!("mom_z{s}"))?;
            st.mom = (0..mx.len()).map(|i| [mx[i], my[i], mz[i]]).collect();
            st.j = snap.field(&format!("J{s}"))?.to_vec();
            st.w = snap.field(&format!("w{s}"))?.to_vec();
            st.t = snap.manifest.time;
        }
        self.steps = snap.manifest.step;
        self.current = None;
        Ok(())
    }

    /// Stored-energy assumptions on the standard sample box.
    pub fn assumptions(&self) -> AssumptionReport {
        check_assumptions(
            &self.models[0],
            STANDARD_J_RANGE,
            STANDARD_THETA_RANGE,
            STANDARD_SAMPLES,
            &AssumptionConfig::default(),
        )
    }

    /// Audit the ledger recorded so far.
    pub fn report(&self) -> Result<RunReport> {
        report_for(&self.grid, &self.ledger, &self.assumptions(), self.gravity.g_const, &self.stability)
    }
}

/// Audit a ledger of a run on `grid`.
pub fn report_for(
    grid: &Grid,
    ledger: &BalanceLedger,
    assumptions: &AssumptionReport,
    g_const: f64,
    stability: &StabilityConfig,
) -> Result<RunReport> {
    let h_ref = grid.extent() / 32.0;
    let c2 = domain_constant(grid, stability.r)?;
    let inputs = StabilityInputs {
        c2,
        volume: grid.domain_volume(),
        g_const,
        slack: stability.slack,
        growth_limit: stability.growth_limit,
    };
    Ok(RunReport {
        rows: ledger.len(),
        mass: mass_audit(ledger),
        momentum: momentum_audit(ledger),
        gravity_momentum: gravity_momentum_audit(ledger),
        rho_j_drift: ledger.column(Col::RhoJDrift).into_iter().fold(0.0, f64::max),
        w_clamped: ledger.column(Col::WClamped).into_iter().sum::<f64>() as u64,
        energy: energy_audit(ledger),
        entropy: entropy_audit(ledger, entropy_tolerance(ledger, grid.h, h_ref)),
        stability: stability_audit(ledger, assumptions, &inputs),
    })
}

/// Rebuild a ledger from snapshots alone. Step integrals are not
/// available, so mass and momentum columns hold state values only; the
/// `dt` of each row is the gap to the next snapshot.
pub fn ledger_from_snapshots(scenario: &Scenario, dirs: &[PathBuf]) -> Result<BalanceLedger> {
    let mut sim = Simulation::from_scenario(scenario)?;
    let mut snaps: Vec<Snapshot> = dirs.iter().map(|d| read_snapshot(d)).collect::<Result<_>>()?;
    snaps.sort_by(|a, b| a.manifest.time.total_cmp(&b.manifest.time));
    let mut ledger = BalanceLedger::default();
    for (n, snap) in snaps.iter().enumerate() {
        sim.restore(snap)?;
        let terms = sim.evaluation()?.terms.clone();
        let dt = snaps.get(n + 1).map(|s| s.manifest.time - snap.manifest.time).unwrap_or(0.0);
        ledger.push(LedgerRow {
            step: snap.manifest.step,
            t: snap.manifest.time,
            dt,
            terms,
        });
    }
    Ok(ledger)
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub t_end: f64,
    pub max_steps: Option<u64>,
    /// Simulated time between snapshots.
    pub snapshot_every: Option<f64>,
    pub output_dir: Option<PathBuf>,
}

impl RunOptions {
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            t_end: s.time.t_end,
            max_steps: s.time.max_steps,
            snapshot_every: if s.output.snapshots { s.time.snapshot_every } else { None },
            output_dir: s.output.dir.as_ref().map(PathBuf::from),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub steps: u64,
    pub t: f64,
    pub snapshots: Vec<(f64, PathBuf)>,
    pub ledger_path: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub rows: usize,
    pub mass: f64,
    pub momentum: f64,
    pub gravity_momentum: f64,
    pub rho_j_drift: f64,
    pub w_clamped: u64,
    pub energy: EnergyAudit,
    pub entropy: EntropyAudit,
    pub stability: StabilityReport,
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ledger rows: {}", self.rows)?;
        writeln!(f, "mass balance (max relative): {:.3e}", self.mass)?;
        writeln!(f, "momentum balance (max relative): {:.3e}", self.momentum)?;
        writeln!(f, "net gravitational force (relative): {:.3e}", self.gravity_momentum)?;
        writeln!(f, "rho J drift (max relative): {:.3e}", self.rho_j_drift)?;
        writeln!(f, "thermal energy clamps: {}", self.w_clamped)?;
        writeln!(
            f,
            "energy residual: max {:.3e} (relative {:.3e}), sum {:.3e}",
            self.energy.max_abs, self.energy.max_rel, self.energy.sum_abs
        )?;
        writeln!(
            f,
            "entropy: {} (worst drop {:.3e}, tolerance {:.3e}, min pointwise production {:.3e})",
            if self.entropy.monotone { "nondecreasing" } else { "DECREASED" },
            self.entropy.worst_drop,
            self.entropy.tolerance,
            self.entropy.min_pointwise
        )?;
        write!(f, "{}", self.stability)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const QUIET: &str = r#"
[domain]
n = [6, 6, 6]

[initial]
j_background = 2.0
theta = 1.0

[gravity]
enabled = false

[time]
t_end = 0.05
dt_max = 0.01

[nondimensional]
"#;

    #[test]
    fn quiet_box_stays_put_and_ledger_closes() {
        let s = Scenario::parse(QUIET).unwrap();
        let mut sim = Simulation::from_scenario(&s).unwrap();
        let before = sim.phases[0].clone();
        sim.run_until(0.05, None).unwrap();
        sim.close_ledger().unwrap();
        assert!((sim.time() - 0.05).abs() < 1e-15);
        assert_eq!(sim.ledger.rows.last().unwrap().dt, 0.0);
        assert_eq!(sim.ledger.len() as u64, sim.steps + 1);
        for i in 0..sim.grid.len() {
            assert_eq!(sim.phases[0].rho[i], before.rho[i]);
            assert_eq!(sim.phases[0].j[i], before.j[i]);
        }
    }

    #[test]
    fn snapshots_follow_simulated_time_and_restore() {
        let s = Scenario::parse(QUIET).unwrap();
        let dir = std::env::temp_dir().join(format!("accrete-sim-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        let mut sim = Simulation::from_scenario(&s).unwrap();
        let out = sim
            .run_with(&RunOptions {
                t_end: 0.05,
                max_steps: None,
                snapshot_every: Some(0.02),
                output_dir: Some(dir.clone()),
            })
            .unwrap();
        let times: Vec<f64> = out.snapshots.iter().map(|(t, _)| *t).collect();
        assert_eq!(times.len(), 4, "{times:?}");
        for (t, want) in times.iter().zip([0.0, 0.02, 0.04, 0.05]) {
            assert!((t - want).abs() < 1e-12);
        }
        let dirs: Vec<PathBuf> = out.snapshots.iter().map(|(_, d)| d.clone()).collect();
        let rebuilt = ledger_from_snapshots(&s, &dirs).unwrap();
        assert_eq!(rebuilt.len(), 4);
        let first = &rebuilt.rows[0];
        assert_eq!(first.get(Col::Mass), sim.ledger.rows[0].get(Col::Mass));
        assert!(dir.join("ledger.csv").exists());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
