//! Per-step balance ledgers and the audits computed from them.
//!
//! A [`LedgerRow`] holds the integrals and rates of one state, plus the
//! integrator-weighted source integrals over the step that starts there.
//! The audits only read ledger rows, so they can be recomputed from a CSV
//! file or from snapshots.

mod columns;

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::constitutive::AssumptionReport;
use crate::error::{Error, Result};

pub use columns::{Col, Terms, N_COLS};

#[derive(Clone, Debug, PartialEq)]
pub struct LedgerRow {
    pub step: u64,
    pub t: f64,
    /// Step taken from this row to the next; zero on the last row.
    pub dt: f64,
    pub terms: Terms,
}

impl LedgerRow {
    #[inline]
    pub fn get(&self, c: Col) -> f64 {
        self.terms.get(c)
    }

    #[inline]
    pub fn get3(&self, c: Col) -> [f64; 3] {
        self.terms.get3(c)
    }
}

/// Ordered ledger of a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BalanceLedger {
    pub rows: Vec<LedgerRow>,
}

impl BalanceLedger {
    pub fn push(&mut self, row: LedgerRow) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, c: Col) -> Vec<f64> {
        self.rows.iter().map(|r| r.get(c)).collect()
    }

    pub fn header() -> String {
        let mut s = String::from("step,t,dt");
        for c in Col::ALL {
            s.push(',');
            s.push_str(c.name());
        }
        s
    }

    /// One CSV line, 17 significant digits per value.
    pub fn format_row(row: &LedgerRow) -> String {
        let mut s = format!("{},{:.16e},{:.16e}", row.step, row.t, row.dt);
        for v in row.terms.0.iter() {
            s.push(',');
            s.push_str(&format!("{v:.16e}"));
        }
        s
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::header())?;
        for r in &self.rows {
            writeln!(out, "{}", Self::format_row(r))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f)).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::config("ledger", "empty file"))?
            .map_err(|e| Error::io("ledger", e))?;
        if header.trim() != Self::header() {
            return Err(Error::config("ledger", "unexpected column layout"));
        }
        let mut ledger = BalanceLedger::default();
        for (n, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io("ledger", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::config(format!("ledger line {}", n + 2), "malformed value");
            let mut it = line.split(',');
            let step = it.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
            let t = it.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
            let dt = it.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
            let mut terms = Terms::default();
            for slot in terms.0.iter_mut() {
                *slot = it.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
            }
            ledger.push(LedgerRow { step, t, dt, terms });
        }
        Ok(ledger)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

/// Residuals of the total-energy balance.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyAudit {
    /// `ΔE − ½Δt (P_n + P_{n+1})` with `P` the full rate of change of the
    /// discrete energy (physical source powers plus scheme dissipation).
    pub residuals: Vec<f64>,
    /// Same with only the physical source powers on the right.
    pub physical_residuals: Vec<f64>,
    pub scale: f64,
    pub max_abs: f64,
    pub max_rel: f64,
    pub sum_abs: f64,
}

fn energy_scale(r: &LedgerRow) -> f64 {
    r.get(Col::Kinetic).abs()
        + r.get(Col::Stored).abs()
        + r.get(Col::Thermal).abs()
        + 0.5 * r.get(Col::GravEnergy).abs()
        + r.get(Col::MixingEnergy).abs()
}

pub fn energy_audit(ledger: &BalanceLedger) -> EnergyAudit {
    let rows = &ledger.rows;
    let mut residuals = Vec::new();
    let mut physical = Vec::new();
    for w in rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let de = b.get(Col::TotalEnergy) - a.get(Col::TotalEnergy);
        residuals.push(de - 0.5 * a.dt * (a.get(Col::PChain) + b.get(Col::PChain)));
        physical.push(de - 0.5 * a.dt * (a.get(Col::PPhysical) + b.get(Col::PPhysical)));
    }
    let scale = rows.iter().map(energy_scale).fold(0.0, f64::max);
    let max_abs = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    EnergyAudit {
        sum_abs: residuals.iter().map(|r| r.abs()).sum(),
        max_rel: if scale > 0.0 { max_abs / scale } else { max_abs },
        residuals,
        physical_residuals: physical,
        scale,
        max_abs,
    }
}

/// Monotonicity of the total entropy.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyAudit {
    pub monotone: bool,
    pub tolerance: f64,
    /// Largest drop below the running maximum.
    pub worst_drop: f64,
    /// Total production rate per row.
    pub production: Vec<f64>,
    /// Smallest pointwise production term seen in any row.
    pub min_pointwise: f64,
}

/// `tol_η = 1e−3 · max Σ|η|ΔV · (h / h_ref)`.
pub fn entropy_tolerance(ledger: &BalanceLedger, h: f64, h_ref: f64) -> f64 {
    let scale = ledger.column(Col::EntropyScale).into_iter().fold(0.0, f64::max);
    1e-3 * scale * (h / h_ref)
}

pub fn entropy_audit(ledger: &BalanceLedger, tolerance: f64) -> EntropyAudit {
    let mut running = f64::NEG_INFINITY;
    let mut worst = 0.0f64;
    for r in &ledger.rows {
        let s = r.get(Col::Entropy);
        running = running.max(s);
        worst = worst.max(running - s);
    }
    EntropyAudit {
        monotone: worst <= tolerance,
        tolerance,
        worst_drop: worst,
        production: ledger.column(Col::SProduction),
        min_pointwise: ledger.column(Col::SProductionMin).into_iter().fold(f64::INFINITY, f64::min),
    }
}

/// `max_n |M_{n+1} − M_n − ∫ r_ext| / M_{n+1}`.
pub fn mass_audit(ledger: &BalanceLedger) -> f64 {
    ledger
        .rows
        .windows(2)
        .map(|w| {
            let dm = w[1].get(Col::Mass) - w[0].get(Col::Mass);
            (dm - w[0].get(Col::StepMassIn)).abs() / w[1].get(Col::Mass)
        })
        .fold(0.0, f64::max)
}

/// `max_n |ΔP − ∫(incoming + Coriolis + gravity + wall + mixing + friction)|`
/// relative to `Σ|ρv|ΔV` or, when larger, to the integrated magnitude of the
/// wall and gravity forces over the step.
pub fn momentum_audit(ledger: &BalanceLedger) -> f64 {
    ledger
        .rows
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].get3(Col::MomX), w[1].get3(Col::MomX));
            let pred = w[0].get3(Col::StepMomX);
            let scale = w[0]
                .get(Col::MomAbs)
                .max(w[1].get(Col::MomAbs))
                .max(w[0].get(Col::StepForceAbs))
                .max((0..3).map(|k| pred[k].abs()).fold(0.0, f64::max));
            let err = (0..3).map(|k| (b[k] - a[k] - pred[k]).abs()).fold(0.0, f64::max);
            if scale > 0.0 {
                err / scale
            } else {
                err
            }
        })
        .fold(0.0, f64::max)
}

/// `max_n |Σρg ΔV| / Σ|ρg| ΔV`.
pub fn gravity_momentum_audit(ledger: &BalanceLedger) -> f64 {
    ledger
        .rows
        .iter()
        .map(|r| {
            let g = r.get3(Col::GravityMomX);
            let s = r.get(Col::GravityMomAbs);
            let m = g.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            if s > 0.0 {
                m / s
            } else {
                m
            }
        })
        .fold(0.0, f64::max)
}

/// Inputs to [`stability_audit`] that do not come from the ledger.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityInputs {
    /// Domain constant for r = 2.
    pub c2: f64,
    /// Volume of Ω.
    pub volume: f64,
    pub g_const: f64,
    /// Relative slack on the energy bound.
    pub slack: f64,
    /// Growth factor of Σρ²ΔV that counts as runaway compression.
    pub growth_limit: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityRow {
    pub t: f64,
    /// `Σ(½ρ|v|² + φ(J)/J + w)ΔV`.
    pub left: f64,
    /// Initial energy plus integrated source powers plus the Young/Hölder
    /// majorant of the gravitational term.
    pub bound: f64,
    pub young: bool,
    pub holder: bool,
    pub energy: bool,
    /// Majorant of the gravitational term over the stored energy.
    pub absorb_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    pub assumptions_passed: bool,
    pub failed_assumptions: Vec<String>,
    pub rows: Vec<StabilityRow>,
    pub chain_holds: bool,
    pub rho2_growth: f64,
    pub runaway: bool,
}

impl fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "assumptions: {}",
            if self.assumptions_passed {
                "all satisfied".to_string()
            } else {
                format!("violated ({})", self.failed_assumptions.join(", "))
            }
        )?;
        writeln!(f, "bound chain: {}", if self.chain_holds { "holds" } else { "VIOLATED" })?;
        writeln!(f, "growth of sum rho^2: {:.3e}{}", self.rho2_growth, if self.runaway { " (runaway)" } else { "" })?;
        if let Some(last) = self.rows.last() {
            writeln!(
                f,
                "final: left {:.6e}, bound {:.6e}, margin {:.6e}",
                last.left,
                last.bound,
                last.bound - last.left
            )?;
        }
        Ok(())
    }
}

/// Energy bound, Young and Hölder steps evaluated on every ledger row.
pub fn stability_audit(ledger: &BalanceLedger, assumptions: &AssumptionReport, inp: &StabilityInputs) -> StabilityReport {
    let rows = &ledger.rows;
    let mut out = Vec::with_capacity(rows.len());
    let Some(first) = rows.first() else {
        return StabilityReport {
            assumptions_passed: assumptions.all_passed(),
            failed_assumptions: Vec::new(),
            rows: out,
            chain_holds: true,
            rho2_growth: 1.0,
            runaway: false,
        };
    };
    let g2c = inp.g_const * inp.g_const * inp.c2;
    let e0 = first.get(Col::TotalEnergy);
    let mut integral = 0.0;
    for (n, r) in rows.iter().enumerate() {
        if n > 0 {
            let p = &rows[n - 1];
            integral += 0.5 * p.dt * (p.get(Col::PPhysical) + r.get(Col::PPhysical));
        }
        let rho2 = r.get(Col::RhoSquared);
        let pot2 = r.get(Col::PotSquared);
        let grav = r.get(Col::GravEnergy);
        let tiny = 1e-12 * (rho2 + pot2).max(f64::MIN_POSITIVE);
        let young = -grav <= 0.5 * (rho2 + pot2) + tiny;
        let holder = pot2 <= inp.volume * g2c * rho2 * (1.0 + 1e-12) + tiny
            && r.get(Col::PotMaxSquared) <= g2c * rho2 * (1.0 + 1e-12) + tiny;
        let majorant = 0.5 * (1.0 + inp.volume * g2c) * rho2;
        let left = r.get(Col::Kinetic) + r.get(Col::Stored) + r.get(Col::Thermal);
        let bound = e0 + integral + majorant;
        let scale = energy_scale(r).max(energy_scale(first));
        let energy = left <= bound + inp.slack * scale;
        let stored = r.get(Col::Stored);
        out.push(StabilityRow {
            t: r.t,
            left,
            bound,
            young,
            holder,
            energy,
            absorb_ratio: if stored > 0.0 { majorant / stored } else { f64::INFINITY },
        });
    }
    let growth = rows.last().map(|l| l.get(Col::RhoSquared)).unwrap_or(0.0) / first.get(Col::RhoSquared);
    StabilityReport {
        assumptions_passed: assumptions.all_passed(),
        failed_assumptions: assumptions
            .entries
            .iter()
            .filter(|e| !e.passed)
            .map(|e| e.id.to_string())
            .collect(),
        chain_holds: out.iter().all(|r| r.young && r.holder && r.energy),
        rows: out,
        rho2_growth: growth,
        runaway: growth > inp.growth_limit,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(step: u64, t: f64, dt: f64, set: &[(Col, f64)]) -> LedgerRow {
        let mut terms = Terms::default();
        for &(c, v) in set {
            terms.set(c, v);
        }
        LedgerRow { step, t, dt, terms }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut l = BalanceLedger::default();
        for n in 0..4 {
            l.push(row(n, n as f64 * 0.1, 0.1, &[(Col::Mass, 1.0 / 3.0 + n as f64), (Col::Entropy, -2e-300)]));
        }
        let mut buf = Vec::new();
        l.write_csv(&mut buf).unwrap();
        let back = BalanceLedger::read_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, l);
        assert!(BalanceLedger::read_csv(std::io::Cursor::new(b"step,t\n".to_vec())).is_err());
    }

    #[test]
    fn energy_residual_is_zero_for_exact_trapezoid() {
        // E(t) = t² with P = 2t: the trapezoid rule is exact for linear P.
        let mut l = BalanceLedger::default();
        for n in 0..5 {
            let t = n as f64 * 0.5;
            l.push(row(n, t, 0.5, &[(Col::TotalEnergy, t * t), (Col::Kinetic, t * t), (Col::PChain, 2.0 * t)]));
        }
        let a = energy_audit(&l);
        assert!(a.max_abs < 1e-15);
        assert_eq!(a.residuals.len(), 4);
    }

    #[test]
    fn entropy_drop_detection() {
        let mut l = BalanceLedger::default();
        for (n, s) in [1.0, 1.1, 1.05, 1.2].into_iter().enumerate() {
            l.push(row(n as u64, n as f64, 1.0, &[(Col::Entropy, s), (Col::EntropyScale, 1.0)]));
        }
        assert!(!entropy_audit(&l, 0.01).monotone);
        let a = entropy_audit(&l, 0.06);
        assert!(a.monotone);
        assert!((a.worst_drop - 0.05).abs() < 1e-12);
        assert!((entropy_tolerance(&l, 1.0, 2.0) - 5e-4).abs() < 1e-18);
    }

    #[test]
    fn mass_audit_uses_step_integrals() {
        let mut l = BalanceLedger::default();
        l.push(row(0, 0.0, 1.0, &[(Col::Mass, 1.0), (Col::StepMassIn, 0.25)]));
        l.push(row(1, 1.0, 0.0, &[(Col::Mass, 1.25)]));
        assert!(mass_audit(&l) < 1e-16);
    }
}
