//! TOML scenario files.
//!
//! Every physical quantity is in SI units unless the optional
//! `[nondimensional]` table is present, in which case G, ρ₀ and the domain
//! length default to 1. Validation reports the dotted key of the first
//! offending entry.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constitutive::{ConstitutiveModel, FreeEnergyParams, Segment, ViscosityParams};
use crate::error::{Error, Result};
use crate::gravity::{orbital_omega, GravityMethod, G_SI};
use crate::mixture::MixtureParams;
use crate::solver::{Flux, Integrator, SolverConfig};
use crate::state::{GaussianBump, InflowVelocity, InitialProfile, SeedBlob, SourceSpec, VelocityProfile};
use crate::tensor::Vec3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    #[default]
    Box,
    Sphere,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    /// Cells per axis.
    pub n: [usize; 3],
    /// Box edge along x, m; cells are cubes of side `length / n[0]`.
    pub length: Option<f64>,
    /// Lower box corner, m; defaults to the origin.
    #[serde(default)]
    pub origin: Vec3,
    #[serde(default)]
    pub shape: Shape,
    /// Sphere radius, m; defaults to half the shortest box edge.
    pub radius: Option<f64>,
    /// Border-zone thickness, m.
    #[serde(default)]
    pub border: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    /// Background Jacobian (dimensionless).
    pub j_background: f64,
    /// Temperature, K.
    pub theta: f64,
    /// Referential density of a single-component run, kg/m³.
    pub rho0: Option<f64>,
    /// Seed of the random J perturbation.
    #[serde(default)]
    pub seed: u64,
    /// Relative amplitude of the random J perturbation.
    #[serde(default)]
    pub noise: f64,
    pub seed_blob: Option<SeedBlob>,
    pub bump: Option<GaussianBump>,
    #[serde(default)]
    pub velocity: VelocityProfile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstitutiveConfig {
    pub alpha: f64,
    pub beta: f64,
    pub z: f64,
    /// Pa/K.
    pub b: f64,
    /// Pa/K.
    pub c0: f64,
    /// Pa/K^β.
    pub c1: f64,
    /// Pa·s.
    pub mu: f64,
    /// Pa·s.
    pub lambda: f64,
    /// W/(m·K).
    pub kappa: f64,
    pub dilute_weakening: bool,
    pub segment: Option<Segment>,
}

impl Default for ConstitutiveConfig {
    fn default() -> Self {
        let e = FreeEnergyParams::default();
        let v = ViscosityParams::default();
        Self {
            alpha: e.alpha,
            beta: e.beta,
            z: e.z,
            b: e.b,
            c0: e.c0,
            c1: e.c1,
            mu: v.mu,
            lambda: v.lambda,
            kappa: v.kappa,
            dilute_weakening: v.dilute_weakening,
            segment: None,
        }
    }
}

impl ConstitutiveConfig {
    pub fn model(&self) -> ConstitutiveModel {
        ConstitutiveModel {
            energy: FreeEnergyParams {
                alpha: self.alpha,
                beta: self.beta,
                z: self.z,
                b: self.b,
                c0: self.c0,
                c1: self.c1,
                segment: self.segment,
            },
            viscosity: ViscosityParams {
                mu: self.mu,
                lambda: self.lambda,
                kappa: self.kappa,
                dilute_weakening: self.dilute_weakening,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureConfig {
    /// Pa.
    #[serde(default)]
    pub varkappa: f64,
    #[serde(default = "one")]
    pub alpha_mix: f64,
    /// Pa·s/m².
    #[serde(default)]
    pub f0: f64,
    /// W/(m³·K).
    #[serde(default)]
    pub k0: f64,
    /// kg/m³.
    pub rho0_metal: f64,
    /// kg/m³.
    pub rho0_silicate: f64,
    /// Volume fraction of metal in the initial and incoming material.
    #[serde(default = "half")]
    pub metal_fraction: f64,
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InflowConfig {
    #[default]
    Local,
    Fixed {
        velocity: Vec3,
    },
    /// Towards `center` (default: the box centre).
    Radial {
        speed: f64,
        center: Option<Vec3>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourcesConfig {
    /// Volume rate in the border zone, 1/s.
    #[serde(default)]
    pub v_ext: f64,
    /// Heat power in the border zone, W/m³.
    #[serde(default)]
    pub h_ext: f64,
    #[serde(default)]
    pub t_start: f64,
    pub t_end: Option<f64>,
    #[serde(default)]
    pub inflow: InflowConfig,
    /// Bound K on |v_ext| and v_ext |𝒗_ext|².
    #[serde(default = "default_bound")]
    pub bound: f64,
}

fn default_bound() -> f64 {
    1e6
}

impl Default for SourcesConfig {
    fn default() -> Self {
        Self {
            v_ext: 0.0,
            h_ext: 0.0,
            t_start: 0.0,
            t_end: None,
            inflow: InflowConfig::Local,
            bound: default_bound(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GravityConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default)]
    pub method: GravityMethod,
    /// m³/(kg·s²).
    #[serde(rename = "G")]
    pub g: Option<f64>,
}

fn yes() -> bool {
    true
}

impl Default for GravityConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            method: GravityMethod::Fast,
            g: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationConfig {
    /// rad/s; overrides `m_star`/`distance`.
    pub omega: Option<f64>,
    /// kg.
    pub m_star: Option<f64>,
    /// m.
    pub distance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    /// s.
    pub t_end: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// s.
    pub dt_max: f64,
    /// Simulated time between snapshots, s.
    pub snapshot_every: Option<f64>,
    pub max_steps: Option<u64>,
}

fn default_cfl() -> f64 {
    0.4
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default)]
    pub flux: Flux,
    #[serde(default)]
    pub integrator: Integrator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory (the CLI flag takes precedence).
    pub dir: Option<String>,
    #[serde(default = "yes")]
    pub snapshots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            snapshots: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NondimensionalConfig {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityConfig {
    /// Hölder exponent used for the domain constant.
    pub r: f64,
    pub slack: f64,
    pub growth_limit: f64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            r: 2.0,
            slack: 1e-3,
            growth_limit: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: Option<String>,
    pub domain: DomainConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub constitutive: ConstitutiveConfig,
    pub mixture: Option<MixtureConfig>,
    #[serde(default)]
    pub sources: SourcesConfig,
    #[serde(default)]
    pub gravity: GravityConfig,
    #[serde(default)]
    pub rotation: RotationConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputConfig,
    pub nondimensional: Option<NondimensionalConfig>,
    #[serde(default)]
    pub stability: StabilityConfig,
}

fn toml_error(e: toml::de::Error) -> Error {
    let msg = e.message().to_string();
    let key = match e.span() {
        Some(span) => format!("byte {}..{}", span.start, span.end),
        None => "scenario".to_string(),
    };
    Error::config(key, msg)
}

/// Locate a byte offset as `line L, column C`.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map(|p| p + 1).unwrap_or(0) + 1;
    (line, col)
}

fn parse_value(raw: &str) -> toml::Value {
    // Parse as a TOML value; bare words fall back to strings.
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Set `section.key = value` (any depth) in a parsed table.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(spec, "override must look like section.key=value"))?;
    let path = path.trim();
    let keys: Vec<&str> = path.split('.').map(str::trim).collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::config(path, "empty key in override path"));
    }
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(path, format!("`{k}` is not a table")))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl Scenario {
    /// Parse and validate scenario text.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_overrides(text, &[])
    }

    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let scenario: Scenario = if overrides.is_empty() {
            toml::from_str(text).map_err(|e| {
                let err = toml_error(e.clone());
                match e.span() {
                    Some(span) => {
                        let (l, c) = line_col(text, span.start);
                        Error::config(format!("line {l}, column {c}"), e.message().to_string())
                    }
                    None => err,
                }
            })?
        } else {
            let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
                let (l, c) = e.span().map(|s| line_col(text, s.start)).unwrap_or((0, 0));
                Error::config(format!("line {l}, column {c}"), e.message().to_string())
            })?;
            for o in overrides {
                apply_override(&mut table, o)?;
            }
            toml::Value::Table(table)
                .try_into()
                .map_err(|e: toml::de::Error| Error::config("override", e.message().to_string()))?
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_with_overrides(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    fn nondim(&self) -> bool {
        self.nondimensional.is_some()
    }

    pub fn is_two_phase(&self) -> bool {
        self.mixture.is_some()
    }

    pub fn length(&self) -> Result<f64> {
        match (self.domain.length, self.nondim()) {
            (Some(l), _) => Ok(l),
            (None, true) => Ok(1.0),
            (None, false) => Err(Error::config("domain.length", "required outside nondimensional runs")),
        }
    }

    pub fn cell_size(&self) -> Result<f64> {
        Ok(self.length()? / self.domain.n[0] as f64)
    }

    pub fn g_const(&self) -> Result<f64> {
        Ok(match (self.gravity.g, self.nondim()) {
            (Some(g), _) => g,
            (None, true) => 1.0,
            (None, false) => G_SI,
        })
    }

    /// Referential densities per component (metal first).
    pub fn rho0(&self) -> Result<Vec<f64>> {
        match &self.mixture {
            Some(m) => Ok(vec![m.rho0_metal, m.rho0_silicate]),
            None => match (self.initial.rho0, self.nondim()) {
                (Some(r), _) => Ok(vec![r]),
                (None, true) => Ok(vec![1.0]),
                (None, false) => Err(Error::config("initial.rho0", "required outside nondimensional runs")),
            },
        }
    }

    /// Volume fraction each component occupies in the initial and
    /// incoming material.
    pub fn fractions(&self) -> Vec<f64> {
        match &self.mixture {
            Some(m) => vec![m.metal_fraction, 1.0 - m.metal_fraction],
            None => vec![1.0],
        }
    }

    pub fn omega(&self) -> Result<f64> {
        let r = &self.rotation;
        match (r.omega, r.m_star, r.distance) {
            (Some(w), _, _) => Ok(w),
            (None, Some(m), Some(d)) => orbital_omega(m, d, self.g_const()?)
                .map_err(|e| Error::config("rotation", e.to_string())),
            (None, None, None) => Ok(0.0),
            _ => Err(Error::config("rotation", "give omega, or both m_star and distance")),
        }
    }

    pub fn model(&self) -> ConstitutiveModel {
        self.constitutive.model()
    }

    pub fn mixture_params(&self) -> Option<MixtureParams> {
        self.mixture.as_ref().map(|m| MixtureParams {
            varkappa: m.varkappa,
            alpha_mix: m.alpha_mix,
            f0: m.f0,
            k0: m.k0,
            ..MixtureParams::default()
        })
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            cfl: self.time.cfl,
            flux: self.solver.flux,
            integrator: self.solver.integrator,
            dt_max: self.time.dt_max,
        }
    }

    pub fn box_center(&self) -> Result<Vec3> {
        let h = self.cell_size()?;
        let o = self.domain.origin;
        Ok([0, 1, 2].map(|a| o[a] + 0.5 * self.domain.n[a] as f64 * h))
    }

    /// Initial profile of component `k`; its Jacobian is the bulk one
    /// divided by the component's volume fraction.
    pub fn initial_profile(&self, k: usize) -> InitialProfile {
        let f = self.fractions()[k];
        let i = &self.initial;
        InitialProfile {
            j_background: i.j_background / f,
            seed_blob: i.seed_blob.map(|b| SeedBlob { j: b.j / f, ..b }),
            bump: i.bump.map(|b| GaussianBump {
                amplitude: b.amplitude / f,
                ..b
            }),
            noise: i.noise,
            seed: i.seed.wrapping_add(k as u64),
            theta: i.theta,
            velocity: i.velocity,
        }
    }

    /// Border-zone sources of component `k`.
    pub fn source(&self, k: usize) -> Result<SourceSpec> {
        let s = &self.sources;
        let inflow = match s.inflow {
            InflowConfig::Local => InflowVelocity::Local,
            InflowConfig::Fixed { velocity } => InflowVelocity::Fixed { velocity },
            InflowConfig::Radial { speed, center } => InflowVelocity::Radial {
                speed,
                center: match center {
                    Some(c) => c,
                    None => self.box_center()?,
                },
            },
        };
        let f = self.fractions()[k];
        Ok(SourceSpec {
            v_ext: s.v_ext,
            inflow,
            h_ext: s.h_ext * f,
            rho0: self.rho0()?[k],
            t_start: s.t_start,
            t_end: s.t_end.unwrap_or(f64::INFINITY),
        })
    }

    /// Reject anything the model or the solver cannot run with.
    pub fn validate(&self) -> Result<()> {
        let d = &self.domain;
        if d.n.contains(&0) {
            return Err(Error::config("domain.n", "every axis needs at least one cell"));
        }
        let cells: usize = d.n.iter().product();
        if cells > 64 * 64 * 64 * 8 {
            return Err(Error::config("domain.n", format!("{cells} cells exceed the supported size")));
        }
        let length = self.length()?;
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::config("domain.length", "must be positive"));
        }
        if !(d.border >= 0.0 && d.border.is_finite()) {
            return Err(Error::config("domain.border", "must be nonnegative"));
        }
        if let Some(r) = d.radius {
            if !(r > 0.0) {
                return Err(Error::config("domain.radius", "must be positive"));
            }
        }

        let i = &self.initial;
        if !(i.j_background > 0.0 && i.j_background.is_finite()) {
            return Err(Error::config("initial.j_background", "J must be positive"));
        }
        if !(i.theta >= 0.0 && i.theta.is_finite()) {
            return Err(Error::config("initial.theta", "θ must be nonnegative"));
        }
        if !(i.noise >= 0.0 && i.noise < 1.0) {
            return Err(Error::config("initial.noise", "must lie in [0, 1)"));
        }
        if let Some(b) = i.seed_blob {
            if !(b.j > 0.0) {
                return Err(Error::config("initial.seed_blob.j", "J must be positive"));
            }
            if !(b.radius > 0.0) || !(b.edge >= 0.0) {
                return Err(Error::config("initial.seed_blob", "radius must be positive and edge nonnegative"));
            }
        }
        if let Some(b) = i.bump {
            if !(b.width > 0.0) {
                return Err(Error::config("initial.bump.width", "must be positive"));
            }
            if i.j_background + b.amplitude.min(0.0) <= 0.0 {
                return Err(Error::config("initial.bump.amplitude", "would make J nonpositive"));
            }
        }
        for (k, r) in self.rho0()?.into_iter().enumerate() {
            if !(r > 0.0 && r.is_finite()) {
                let key = match (&self.mixture, k) {
                    (None, _) => "initial.rho0",
                    (Some(_), 0) => "mixture.rho0_metal",
                    _ => "mixture.rho0_silicate",
                };
                return Err(Error::config(key, "must be positive"));
            }
        }

        self.model().validate()?;
        if let Some(m) = &self.mixture {
            if !(m.metal_fraction > 0.0 && m.metal_fraction < 1.0) {
                return Err(Error::config("mixture.metal_fraction", "must lie in (0, 1)"));
            }
            self.mixture_params().expect("present").validate()?;
        }

        let s = &self.sources;
        if !(s.v_ext >= 0.0 && s.v_ext.is_finite()) {
            return Err(Error::config("sources.v_ext", "must be nonnegative (outflow is not supported)"));
        }
        if !(s.h_ext >= 0.0 && s.h_ext.is_finite()) {
            return Err(Error::config("sources.h_ext", "must be nonnegative"));
        }
        if let Some(te) = s.t_end {
            if !(te >= s.t_start) {
                return Err(Error::config("sources.t_end", "must not precede t_start"));
            }
        }
        if s.v_ext > 0.0 && d.border <= 0.0 {
            return Err(Error::config("domain.border", "sources need a border zone of positive thickness"));
        }
        let speed = match s.inflow {
            InflowConfig::Local => 0.0,
            InflowConfig::Fixed { velocity } => crate::tensor::norm2(velocity).sqrt(),
            InflowConfig::Radial { speed, .. } => speed.abs(),
        };
        if s.v_ext > s.bound || s.v_ext * speed * speed > s.bound {
            return Err(Error::config("sources.bound", "v_ext or v_ext·|v_in|² exceeds the configured bound"));
        }
        if let (Some(blob), true) = (i.seed_blob, d.border > 0.0) {
            // The border shell must stay clear of the seed.
            let lo = d.origin;
            let h = length / d.n[0] as f64;
            let gap = (0..3)
                .map(|a| (blob.center[a] - lo[a]).min(lo[a] + d.n[a] as f64 * h - blob.center[a]))
                .fold(f64::INFINITY, f64::min)
                - blob.radius;
            let gap = match (d.shape, d.radius) {
                (Shape::Sphere, r) => {
                    let c = self.box_center()?;
                    let rad = r.unwrap_or(0.5 * d.n.iter().copied().min().unwrap_or(1) as f64 * h);
                    rad - crate::tensor::norm2(crate::tensor::sub(blob.center, c)).sqrt() - blob.radius
                }
                _ => gap,
            };
            if gap < d.border {
                return Err(Error::config("domain.border", "border zone overlaps the seed blob"));
            }
        }

        let g = self.g_const()?;
        if self.gravity.enabled && !(g > 0.0 && g.is_finite()) {
            return Err(Error::config("gravity.G", "must be positive"));
        }
        self.omega()?;

        let t = &self.time;
        if !(t.cfl > 0.0 && t.cfl <= 1.0) {
            return Err(Error::config("time.cfl", format!("must lie in (0, 1], got {}", t.cfl)));
        }
        if !(t.dt_max > 0.0 && t.dt_max.is_finite()) {
            return Err(Error::config("time.dt_max", "must be positive"));
        }
        if !(t.t_end > 0.0 && t.t_end.is_finite()) {
            return Err(Error::config("time.t_end", "must be positive"));
        }
        if let Some(e) = t.snapshot_every {
            if !(e > 0.0) {
                return Err(Error::config("time.snapshot_every", "must be positive"));
            }
        }
        if t.max_steps == Some(0) {
            return Err(Error::config("time.max_steps", "must allow at least one step"));
        }

        let st = &self.stability;
        if !(st.r > 1.5) {
            return Err(Error::config("stability.r", "the domain constant is infinite for r ≤ 3/2"));
        }
        if !(st.slack >= 0.0) || !(st.growth_limit > 1.0) {
            return Err(Error::config("stability", "slack must be nonnegative and growth_limit above 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[domain]
n = [4, 4, 4]

[initial]
j_background = 10.0
theta = 1.0

[time]
t_end = 0.1
dt_max = 0.01

[nondimensional]
"#;

    #[test]
    fn minimal_nondimensional_defaults() {
        let s = Scenario::parse(MINIMAL).unwrap();
        assert_eq!(s.length().unwrap(), 1.0);
        assert_eq!(s.g_const().unwrap(), 1.0);
        assert_eq!(s.rho0().unwrap(), vec![1.0]);
        assert_eq!(s.cell_size().unwrap(), 0.25);
        assert!(!s.is_two_phase());
        assert!(s.output.snapshots);
        let back = Scenario::parse(&s.to_toml()).unwrap();
        assert_eq!(back, s);
    }

    fn rejects(overrides: &[&str], key: &str) {
        let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        match Scenario::parse_with_overrides(MINIMAL, &o) {
            Err(Error::Config { key: k, .. }) => assert!(k.contains(key), "expected key {key}, got {k}"),
            other => panic!("expected config error for {overrides:?}, got {other:?}"),
        }
    }

    #[test]
    fn validation_names_the_key() {
        rejects(&["sources.v_ext=-1.0", "domain.border=0.1"], "sources.v_ext");
        rejects(&["sources.h_ext=-1.0"], "sources.h_ext");
        rejects(&["initial.theta=-1.0"], "initial.theta");
        rejects(&["initial.j_background=0.0"], "initial.j_background");
        rejects(&["time.cfl=1.5"], "time.cfl");
        rejects(&["time.cfl=0.0"], "time.cfl");
        rejects(&["stability.r=1.5"], "stability.r");
        rejects(&["sources.v_ext=0.1"], "domain.border");
        rejects(&["constitutive.beta=1.0"], "constitutive.beta");
    }

    #[test]
    fn syntax_errors_report_the_line() {
        let bad = MINIMAL.replace("theta = 1.0", "theta = ");
        match Scenario::parse(&bad) {
            Err(Error::Config { key, .. }) => assert!(key.starts_with("line 7"), "{key}"),
            other => panic!("{other:?}"),
        }
        let unknown = MINIMAL.replace("theta = 1.0", "theta = 1.0\ntemperature = 3.0");
        assert!(matches!(Scenario::parse(&unknown), Err(Error::Config { .. })));
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let s = Scenario::parse_with_overrides(
            MINIMAL,
            &["constitutive.alpha=0.5".into(), "solver.integrator=forward-euler".into(), "name=renamed".into()],
        )
        .unwrap();
        assert_eq!(s.constitutive.alpha, 0.5);
        assert_eq!(s.solver.integrator, Integrator::ForwardEuler);
        assert_eq!(s.name.as_deref(), Some("renamed"));
        assert!(Scenario::parse_with_overrides(MINIMAL, &["novalue".into()]).is_err());
    }

    #[test]
    fn rotation_from_orbit() {
        let s = Scenario::parse_with_overrides(MINIMAL, &["rotation.m_star=1.0".into(), "rotation.distance=4.0".into()]).unwrap();
        assert!((s.omega().unwrap() - 0.125).abs() < 1e-15);
        rejects(&["rotation.m_star=1.0"], "rotation");
    }

    #[test]
    fn two_phase_split() {
        let s = Scenario::parse_with_overrides(
            MINIMAL,
            &["mixture.rho0_metal=3.0".into(), "mixture.rho0_silicate=1.0".into(), "mixture.metal_fraction=0.25".into()],
        )
        .unwrap();
        assert!(s.is_two_phase());
        assert_eq!(s.initial_profile(0).j_background, 40.0);
        assert_eq!(s.source(1).unwrap().rho0, 1.0);
        assert!((s.source(0).unwrap().h_ext).abs() < 1e-15);
    }
}
