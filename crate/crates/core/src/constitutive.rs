//! Free energy, dissipation and conduction laws of a single component.
//!
//! The free energy per reference volume is
//!
//! ```text
//! ψ(J,θ) = φ(J) + b θ / J^z + c0 θ (1 − ln θ) − c1 θ^β
//! ```
//!
//! with the stored energy `φ(J) = max(0, J^-α − 1)` by default. All derived
//! quantities (pressure, actual thermal energy, heat capacity, entropy) are
//! evaluated in closed form by [`eval_thermo`]; [`temperature_from_w`]
//! inverts the thermal energy for θ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{ddot, trace, Mat3};

/// Optional piecewise-linear gas branch of the stored energy.
///
/// Below `j0` the stored energy is `J^-α − j0^-α + slope (j_gas − j0)`,
/// between `j0` and `j_gas` it is the straight segment `slope (j_gas − J)`,
/// and it vanishes beyond `j_gas`. The pressure jumps at the kink `j0` and
/// equals `slope` along the segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub j0: f64,
    pub j_gas: f64,
    pub slope: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeEnergyParams {
    pub alpha: f64,
    pub beta: f64,
    pub z: f64,
    /// Thermal coupling modulus, Pa/K.
    pub b: f64,
    /// Heat-capacity modulus, Pa/K.
    pub c0: f64,
    /// Heat-capacity modulus, Pa/K^β.
    pub c1: f64,
    #[serde(default)]
    pub segment: Option<Segment>,
}

impl Default for FreeEnergyParams {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            beta: 2.0,
            z: 1.0,
            b: 0.1,
            c0: 1.0,
            c1: 0.5,
            segment: None,
        }
    }
}

impl FreeEnergyParams {
    /// Hard parameter checks. Conditions that the stability analysis
    /// needs but the model can run without (α > 1, the Kirchhoff bound)
    /// are left to [`check_assumptions`].
    pub fn validate(&self) -> Result<()> {
        let finite = [self.alpha, self.beta, self.z, self.b, self.c0, self.c1];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("constitutive", "parameters must be finite"));
        }
        if self.alpha <= 0.0 {
            return Err(Error::config("constitutive.alpha", "must be positive"));
        }
        if self.beta <= 1.0 {
            return Err(Error::config("constitutive.beta", "must exceed 1"));
        }
        if self.z <= 0.0 {
            return Err(Error::config("constitutive.z", "must be positive"));
        }
        if self.b < 0.0 {
            return Err(Error::config("constitutive.b", "must be nonnegative"));
        }
        if self.c0 <= 0.0 {
            return Err(Error::config("constitutive.c0", "must be positive"));
        }
        if self.c1 < 0.0 {
            return Err(Error::config("constitutive.c1", "must be nonnegative"));
        }
        if let Some(s) = self.segment {
            if !(s.j0 > 0.0 && s.j_gas > s.j0 && s.slope >= 0.0) {
                return Err(Error::config(
                    "constitutive.segment",
                    "requires 0 < j0 < j_gas and slope >= 0",
                ));
            }
        }
        Ok(())
    }

    /// Stored energy `φ(J)` with its first and second derivatives.
    ///
    /// At a kink the right-sided derivatives are returned.
    pub fn stored(&self, j: f64) -> (f64, f64, f64) {
        let a = self.alpha;
        match self.segment {
            None => {
                if j < 1.0 {
                    let ja = j.powf(-a);
                    (ja - 1.0, -a * ja / j, a * (a + 1.0) * ja / (j * j))
                } else {
                    (0.0, 0.0, 0.0)
                }
            }
            Some(s) => {
                if j < s.j0 {
                    let ja = j.powf(-a);
                    (
                        ja - s.j0.powf(-a) + s.slope * (s.j_gas - s.j0),
                        -a * ja / j,
                        a * (a + 1.0) * ja / (j * j),
                    )
                } else if j < s.j_gas {
                    (s.slope * (s.j_gas - j), -s.slope, 0.0)
                } else {
                    (0.0, 0.0, 0.0)
                }
            }
        }
    }

    /// Actual thermal energy `w` and heat capacity `c = ∂w/∂θ` at fixed J.
    #[inline]
    pub fn w_and_c(&self, j: f64, theta: f64) -> (f64, f64) {
        let tb1 = theta.powf(self.beta - 1.0);
        let w = (self.c0 * theta + self.c1 * (self.beta - 1.0) * tb1 * theta) / j;
        let c = (self.c0 + self.c1 * self.beta * (self.beta - 1.0) * tb1) / j;
        (w, c)
    }

    /// Lower bound on the Kirchhoff-controllability exponent, `zβ/(β−1)`.
    pub fn kirchhoff_alpha(&self) -> f64 {
        self.z * self.beta / (self.beta - 1.0)
    }
}

/// Newtonian viscosity and Fourier conductivity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViscosityParams {
    /// Shear viscosity, Pa·s.
    pub mu: f64,
    /// Bulk-coupling viscosity, Pa·s.
    pub lambda: f64,
    /// Thermal conductivity, W/(m·K).
    pub kappa: f64,
    /// Scale all three coefficients with 1/J (weaker in the dilute phase).
    #[serde(default)]
    pub dilute_weakening: bool,
}

impl Default for ViscosityParams {
    fn default() -> Self {
        Self {
            mu: 1e-3,
            lambda: 0.0,
            kappa: 1e-3,
            dilute_weakening: false,
        }
    }
}

impl ViscosityParams {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("constitutive.mu", self.mu),
            ("constitutive.lambda", self.lambda),
            ("constitutive.kappa", self.kappa),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(key, "must be finite and nonnegative"));
            }
        }
        Ok(())
    }

    #[inline]
    fn factor(&self, j: f64) -> f64 {
        if self.dilute_weakening {
            1.0 / j
        } else {
            1.0
        }
    }

    #[inline]
    pub fn mu_at(&self, j: f64, _theta: f64) -> f64 {
        self.mu * self.factor(j)
    }

    #[inline]
    pub fn lambda_at(&self, j: f64, _theta: f64) -> f64 {
        self.lambda * self.factor(j)
    }

    #[inline]
    pub fn kappa_at(&self, j: f64, _theta: f64) -> f64 {
        self.kappa * self.factor(j)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstitutiveModel {
    pub energy: FreeEnergyParams,
    pub viscosity: ViscosityParams,
}

impl ConstitutiveModel {
    pub fn validate(&self) -> Result<()> {
        self.energy.validate()?;
        self.viscosity.validate()
    }
}

/// Everything [`eval_thermo`] derives from ψ at one `(J, θ)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ThermoEval {
    pub psi: f64,
    pub psi_j: f64,
    pub psi_theta: f64,
    pub psi_jj: f64,
    pub psi_thetatheta: f64,
    pub psi_jtheta: f64,
    pub p: f64,
    pub phi: f64,
    /// `φ'(J)`.
    pub dphi: f64,
    /// `ψ_J − φ'`, the thermal part of the pressure derivative.
    pub gamma_j: f64,
    pub w: f64,
    pub c: f64,
    pub eta: f64,
}

/// Closed-form thermodynamics at `(J, θ)`.
///
/// At θ = 0 the entropy and `ψ_θ` diverge logarithmically and are returned
/// as infinities; everything else stays finite.
pub fn eval_thermo(model: &ConstitutiveModel, j: f64, theta: f64) -> Result<ThermoEval> {
    if !(j > 0.0 && j.is_finite()) {
        return Err(Error::Domain(format!("J must be positive, got {j}")));
    }
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::Domain(format!("θ must be nonnegative, got {theta}")));
    }
    let e = &model.energy;
    let (phi, dphi, ddphi) = e.stored(j);
    let (ln_t, t_ln_t) = if theta > 0.0 {
        let l = theta.ln();
        (l, theta * l)
    } else {
        (f64::NEG_INFINITY, 0.0)
    };
    let jz = j.powf(-e.z);
    let tb1 = theta.powf(e.beta - 1.0);
    let tb = tb1 * theta;

    let psi = phi + e.b * theta * jz + e.c0 * (theta - t_ln_t) - e.c1 * tb;
    let gamma_j = -e.z * e.b * theta * jz / j;
    let psi_j = dphi + gamma_j;
    let psi_theta = e.b * jz - e.c0 * ln_t - e.c1 * e.beta * tb1;
    let psi_jj = ddphi + e.z * (e.z + 1.0) * e.b * theta * jz / (j * j);
    let psi_thetatheta = -e.c0 / theta - e.c1 * e.beta * (e.beta - 1.0) * theta.powf(e.beta - 2.0);
    let psi_jtheta = -e.z * e.b * jz / j;
    let (w, c) = e.w_and_c(j, theta);

    Ok(ThermoEval {
        psi,
        psi_j,
        psi_theta,
        psi_jj,
        psi_thetatheta,
        psi_jtheta,
        p: -psi_j,
        phi,
        dphi,
        gamma_j,
        w,
        c,
        eta: -psi_theta / j,
    })
}

const THETA_RTOL: f64 = 4.0 * f64::EPSILON;
const THETA_MAX_ITER: usize = 100;

/// Invert `w(J, ·)` for the temperature.
///
/// Safeguarded Newton iteration inside a bracket `[lo, hi]` that starts at
/// `[0, 1]` and grows geometrically until it contains the target; a
/// bisection step replaces any Newton step that leaves the bracket.
pub fn temperature_from_w(model: &ConstitutiveModel, j: f64, w_target: f64) -> Result<f64> {
    if !(j > 0.0 && j.is_finite()) {
        return Err(Error::Domain(format!("J must be positive, got {j}")));
    }
    if !(w_target >= 0.0 && w_target.is_finite()) {
        return Err(Error::Domain(format!("w must be nonnegative, got {w_target}")));
    }
    if w_target == 0.0 {
        return Ok(0.0);
    }
    let e = &model.energy;
    let fail = |iterations| Error::NoConvergence {
        j,
        w: w_target,
        iterations,
    };

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut w_hi = e.w_and_c(j, hi).0;
    let mut grow = 0;
    while w_hi < w_target {
        lo = hi;
        hi *= 4.0;
        w_hi = e.w_and_c(j, hi).0;
        grow += 1;
        if grow > 600 || !w_hi.is_finite() {
            return Err(fail(grow));
        }
    }
    // w(0) = 0 and w is convex in θ for β ≥ 2, so the chord through the
    // origin gives a reasonable starting point.
    let mut theta = (hi * w_target / w_hi).clamp(lo, hi);
    for it in 0..THETA_MAX_ITER {
        let (w, c) = e.w_and_c(j, theta);
        let r = w - w_target;
        if r == 0.0 {
            return Ok(theta);
        }
        if r > 0.0 {
            hi = theta;
        } else {
            lo = theta;
        }
        let newton = theta - r / c;
        let next = if c > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - theta).abs() <= THETA_RTOL * next || hi - lo <= THETA_RTOL * hi {
            return Ok(next);
        }
        theta = next;
        if it + 1 == THETA_MAX_ITER {
            break;
        }
    }
    Err(fail(THETA_MAX_ITER))
}

/// Newtonian stress `D = 2μe + λ tr(e) I` and dissipation `ξ = D : e`.
pub fn viscous_stress(params: &ViscosityParams, j: f64, theta: f64, e: &Mat3) -> (Mat3, f64) {
    let mu = params.mu_at(j, theta);
    let lambda = params.lambda_at(j, theta);
    newtonian_stress(mu, lambda, e)
}

#[inline]
pub(crate) fn newtonian_stress(mu: f64, lambda: f64, e: &Mat3) -> (Mat3, f64) {
    let tr = trace(e);
    let mut d = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            d[a][b] = 2.0 * mu * e[a][b];
        }
        d[a][a] += lambda * tr;
    }
    let xi = 2.0 * mu * ddot(e, e) + lambda * tr * tr;
    (d, xi)
}

/// Thresholds used by [`check_assumptions`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssumptionConfig {
    /// Lower bound ε for the heat-capacity, dissipation and conductivity tests.
    pub eps: f64,
    /// Exponent margin ε in the compression test `J^(1+ε) φ(J)`.
    pub eps_compress: f64,
    /// Largest acceptable fitted constant in the pressure-growth test.
    pub k_max: f64,
    /// A sampled quantity counts as decaying to zero when it drops below
    /// this fraction of its value one decade further in.
    pub decay_ratio: f64,
}

impl Default for AssumptionConfig {
    fn default() -> Self {
        Self {
            eps: 1e-3,
            eps_compress: 1.0,
            k_max: 1e3,
            decay_ratio: 0.5,
        }
    }
}

/// The sampled box on which scenarios are checked by default.
pub const STANDARD_J_RANGE: (f64, f64) = (1e-6, 1e3);
pub const STANDARD_THETA_RANGE: (f64, f64) = (1e-2, 1e2);
pub const STANDARD_SAMPLES: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionEntry {
    /// Short identifier: `a`, `b`, `d`, `e` or `kirchhoff`.
    pub id: &'static str,
    pub description: &'static str,
    pub passed: bool,
    /// The fitted constant (liminf value, best K, best ε, or margin).
    pub fitted: f64,
    /// Sample point `(J, θ)` realising the fitted value.
    pub witness: Option<(f64, f64)>,
    pub note: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AssumptionReport {
    pub entries: Vec<AssumptionEntry>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn entry(&self, id: &str) -> Option<&AssumptionEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

impl std::fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for e in &self.entries {
            let status = if e.passed { "PASS" } else { "FAIL" };
            write!(f, "{status} ({}) {}: fitted {:.6e}", e.id, e.description, e.fitted)?;
            if let Some((j, t)) = e.witness {
                write!(f, " at J = {j:.3e}, θ = {t:.3e}")?;
            }
            if !e.note.is_empty() {
                write!(f, " [{}]", e.note)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn log_space(range: (f64, f64), n: usize) -> Vec<f64> {
    let n = n.max(2);
    let (a, b) = (range.0.ln(), range.1.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Test the stability assumptions on a log-spaced sample grid.
///
/// This is a falsifier: a pass means no counterexample was found on the
/// grid, with fitted constants reported for inspection.
pub fn check_assumptions(
    model: &ConstitutiveModel,
    j_range: (f64, f64),
    theta_range: (f64, f64),
    sample_count: usize,
    cfg: &AssumptionConfig,
) -> AssumptionReport {
    let e = &model.energy;
    let js = log_space(j_range, sample_count);
    let thetas = log_space(theta_range, sample_count);
    let mut entries = Vec::new();

    // (a) stored energy blows up faster than 1/J under compression.
    {
        let j0 = j_range.0;
        let j1 = (10.0 * j0).min(j_range.1);
        let v = |j: f64| j.powf(1.0 + cfg.eps_compress) * e.stored(j).0;
        let (v0, v1) = (v(j0), v(j1));
        let exponent = (e.stored(j0).0 / e.stored(j1).0).ln() / (j1 / j0).ln();
        let passed = v0 > 0.0 && v0.is_finite() && v0 >= cfg.decay_ratio * v1;
        entries.push(AssumptionEntry {
            id: "a",
            description: "J^(1+ε) φ(J) bounded away from 0 as J → 0",
            passed,
            fitted: v0,
            witness: Some((j0, 0.0)),
            note: format!("ε = {}, local blow-up exponent {:.4}", cfg.eps_compress, exponent),
        });
    }

    // (b) |θψ_θ/J − ψ_J| ≤ K (1 + φ/J + w).
    {
        let mut best = (0.0f64, None);
        let mut finite = true;
        for &j in &js {
            for &t in &thetas {
                let Ok(te) = eval_thermo(model, j, t) else {
                    finite = false;
                    continue;
                };
                let ratio = (t * te.psi_theta / j - te.psi_j).abs() / (1.0 + te.phi / j + te.w);
                if !ratio.is_finite() {
                    finite = false;
                } else if ratio > best.0 {
                    best = (ratio, Some((j, t)));
                }
            }
        }
        entries.push(AssumptionEntry {
            id: "b",
            description: "|θψ_θ/J − ψ_J| ≤ K(1 + φ/J + w)",
            passed: finite && best.0 <= cfg.k_max,
            fitted: best.0,
            witness: best.1,
            note: format!("K_max = {}", cfg.k_max),
        });
    }

    // (d) w ≥ ε(1 + θ^β)/J, including a decay test at the hot end.
    {
        let ratio = |j: f64, t: f64| e.w_and_c(j, t).0 * j / (1.0 + t.powf(e.beta));
        let mut best = (f64::INFINITY, None);
        for &j in &js {
            for &t in &thetas {
                let r = ratio(j, t);
                if r < best.0 {
                    best = (r, Some((j, t)));
                }
            }
        }
        let inf_over_j = |t: f64| js.iter().map(|&j| ratio(j, t)).fold(f64::INFINITY, f64::min);
        let t_hi = theta_range.1;
        let t_in = (t_hi / 10.0).max(theta_range.0);
        let decaying = inf_over_j(t_hi) < cfg.decay_ratio * inf_over_j(t_in);
        entries.push(AssumptionEntry {
            id: "d",
            description: "w ≥ ε(1 + θ^β)/J",
            passed: best.0 >= cfg.eps && !decaying,
            fitted: best.0,
            witness: best.1,
            note: if decaying {
                format!("ratio decays towards θ = {t_hi:e}")
            } else {
                String::new()
            },
        });
    }

    // (e) ξ ≥ ε|e|² and κ ≥ ε.
    {
        let mut best_xi = (f64::INFINITY, None);
        let mut best_kappa = (f64::INFINITY, None);
        for &j in &js {
            for &t in &thetas {
                let v = &model.viscosity;
                let (mu, lambda) = (v.mu_at(j, t), v.lambda_at(j, t));
                // inf over unit symmetric e of 2μ|e|² + λ(tr e)², with (tr e)² ≤ 3|e|².
                let xi_min = (2.0 * mu).min(2.0 * mu + 3.0 * lambda);
                if xi_min < best_xi.0 {
                    best_xi = (xi_min, Some((j, t)));
                }
                let k = v.kappa_at(j, t);
                if k < best_kappa.0 {
                    best_kappa = (k, Some((j, t)));
                }
            }
        }
        let (fitted, witness) = if best_xi.0 <= best_kappa.0 { best_xi } else { best_kappa };
        entries.push(AssumptionEntry {
            id: "e",
            description: "ξ ≥ ε|e|² and κ ≥ ε",
            passed: best_xi.0 >= cfg.eps && best_kappa.0 >= cfg.eps,
            fitted,
            witness,
            note: format!("inf ξ/|e|² = {:.3e}, inf κ = {:.3e}", best_xi.0, best_kappa.0),
        });
    }

    {
        let bound = e.kirchhoff_alpha();
        entries.push(AssumptionEntry {
            id: "kirchhoff",
            description: "α ≥ zβ/(β−1)",
            passed: e.alpha >= bound,
            fitted: e.alpha - bound,
            witness: None,
            note: format!("zβ/(β−1) = {bound}"),
        });
    }

    AssumptionReport { entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model(alpha: f64, beta: f64, z: f64, b: f64, c0: f64, c1: f64) -> ConstitutiveModel {
        ConstitutiveModel {
            energy: FreeEnergyParams {
                alpha,
                beta,
                z,
                b,
                c0,
                c1,
                segment: None,
            },
            viscosity: ViscosityParams::default(),
        }
    }

    #[test]
    fn pressure_of_pure_power_law() {
        let m = model(1.0, 2.0, 1.0, 0.0, 0.0, 0.0);
        let t = eval_thermo(&m, 0.5, 0.0).unwrap();
        assert!((t.p - 4.0).abs() < 1e-14);
        // Central difference of ψ in J.
        let h = 1e-6;
        let fd = -(eval_thermo(&m, 0.5 + h, 0.0).unwrap().psi
            - eval_thermo(&m, 0.5 - h, 0.0).unwrap().psi)
            / (2.0 * h);
        assert!((fd - 4.0).abs() < 1e-6);
    }

    #[test]
    fn thermal_energy_and_heat_capacity_values() {
        let m = model(2.0, 2.0, 1.0, 0.0, 1.0, 0.5);
        let t = eval_thermo(&m, 1.0, 2.0).unwrap();
        assert!((t.w - 4.0).abs() < 1e-14);
        let split = (t.psi - 2.0 * t.psi_theta - t.phi) / 1.0;
        assert!((split - 4.0).abs() < 1e-13);
        let t = eval_thermo(&m, 2.0, 1.0).unwrap();
        assert!((t.c - 1.0).abs() < 1e-14);
    }

    #[test]
    fn domain_errors() {
        let m = ConstitutiveModel::default();
        assert!(matches!(eval_thermo(&m, 0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(eval_thermo(&m, -1.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(eval_thermo(&m, 1.0, -1e-9), Err(Error::Domain(_))));
        assert!(temperature_from_w(&m, 1.0, -1.0).is_err());
    }

    #[test]
    fn zero_temperature_limit() {
        let m = ConstitutiveModel::default();
        let t = eval_thermo(&m, 0.7, 0.0).unwrap();
        assert_eq!(t.w, 0.0);
        assert!(t.c.is_finite() && t.c > 0.0);
        assert_eq!(t.eta, f64::NEG_INFINITY);
        assert_eq!(temperature_from_w(&m, 0.7, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn temperature_inversion_examples() {
        let m = model(2.0, 2.0, 1.0, 0.0, 1.0, 0.5);
        assert!((temperature_from_w(&m, 1.0, 4.0).unwrap() - 2.0).abs() < 1e-12);
        let m = model(2.0, 2.0, 1.0, 0.0, 1.0, 0.0);
        assert!((temperature_from_w(&m, 2.0, 3.0).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn viscous_stress_examples() {
        let p = ViscosityParams {
            mu: 1.0,
            lambda: 0.0,
            kappa: 1.0,
            dilute_weakening: false,
        };
        let (d, xi) = viscous_stress(&p, 1.0, 1.0, &[[0.0; 3]; 3]);
        assert_eq!(d, [[0.0; 3]; 3]);
        assert_eq!(xi, 0.0);
        let e = [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 0.0]];
        let (d, xi) = viscous_stress(&p, 1.0, 1.0, &e);
        assert_eq!(d, [[2.0, 0.0, 0.0], [0.0, -2.0, 0.0], [0.0, 0.0, 0.0]]);
        assert_eq!(xi, 4.0);
        let p = ViscosityParams { mu: 0.0, lambda: 1.0, ..p };
        let id = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let (d, xi) = viscous_stress(&p, 1.0, 1.0, &id);
        assert_eq!(d, [[3.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 3.0]]);
        assert_eq!(xi, 9.0);
    }

    #[test]
    fn dilute_weakening_scales_with_inverse_jacobian() {
        let p = ViscosityParams {
            mu: 2.0,
            lambda: 1.0,
            kappa: 4.0,
            dilute_weakening: true,
        };
        assert_eq!(p.mu_at(4.0, 1.0), 0.5);
        assert_eq!(p.lambda_at(4.0, 1.0), 0.25);
        assert_eq!(p.kappa_at(4.0, 1.0), 1.0);
    }

    #[test]
    fn segmented_stored_energy_is_continuous_with_pressure_kink() {
        let mut m = ConstitutiveModel::default();
        m.energy.segment = Some(Segment {
            j0: 1.0,
            j_gas: 50.0,
            slope: 1e-3,
        });
        m.energy.validate().unwrap();
        let e = &m.energy;
        let eps = 1e-12;
        let (below, dbelow, _) = e.stored(1.0 - eps);
        let (above, dabove, _) = e.stored(1.0 + eps);
        assert!((below - above).abs() < 1e-9);
        // Pressure jumps from α to the segment slope across the kink.
        assert!((-dbelow - 2.0).abs() < 1e-9);
        assert_eq!(-dabove, 1e-3);
        assert!(e.stored(49.999).0 > 0.0);
        assert_eq!(e.stored(50.0).0, 0.0);
    }

    #[test]
    fn default_example_passes_assumption_checks() {
        let m = ConstitutiveModel::default();
        assert!(m.energy.alpha >= m.energy.kirchhoff_alpha());
        let r = check_assumptions(
            &m,
            STANDARD_J_RANGE,
            STANDARD_THETA_RANGE,
            STANDARD_SAMPLES,
            &AssumptionConfig::default(),
        );
        assert!(r.all_passed(), "{r}");
        // J²φ(J) → 1 for α = 2.
        assert!((r.entry("a").unwrap().fitted - 1.0).abs() < 1e-9);
    }

    #[test]
    fn slow_blow_up_fails_compression_check() {
        let mut m = ConstitutiveModel::default();
        m.energy.alpha = 0.5;
        let r = check_assumptions(&m, STANDARD_J_RANGE, STANDARD_THETA_RANGE, 32, &AssumptionConfig::default());
        assert!(!r.entry("a").unwrap().passed);
        assert!(!r.entry("kirchhoff").unwrap().passed);
    }

    #[test]
    fn linear_heat_capacity_fails_growth_check() {
        let mut m = ConstitutiveModel::default();
        m.energy.c1 = 0.0;
        let r = check_assumptions(&m, STANDARD_J_RANGE, STANDARD_THETA_RANGE, 32, &AssumptionConfig::default());
        assert!(!r.entry("d").unwrap().passed);
        assert!(r.entry("a").unwrap().passed);
    }

    #[test]
    fn missing_conductivity_fails_dissipation_check() {
        let mut m = ConstitutiveModel::default();
        m.viscosity.kappa = 0.0;
        let r = check_assumptions(&m, STANDARD_J_RANGE, STANDARD_THETA_RANGE, 16, &AssumptionConfig::default());
        let e = r.entry("e").unwrap();
        assert!(!e.passed);
        assert_eq!(e.fitted, 0.0);
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
    }

    proptest! {
        #[test]
        fn inversion_round_trips(j in 0.05f64..20.0, theta in 1e-3f64..1e3) {
            let m = ConstitutiveModel::default();
            let w = eval_thermo(&m, j, theta).unwrap().w;
            let back = temperature_from_w(&m, j, w).unwrap();
            prop_assert!(rel(back, theta) <= 1e-12);
            let w_back = eval_thermo(&m, j, back).unwrap().w;
            prop_assert!((w_back - w).abs() <= 1e-12 * (1.0 + w));
        }

        #[test]
        fn dissipation_is_nonnegative(
            mu in 0.0f64..10.0, lambda in 0.0f64..10.0,
            a in prop::array::uniform6(-5.0f64..5.0),
        ) {
            let e = [[a[0], a[3], a[4]], [a[3], a[1], a[5]], [a[4], a[5], a[2]]];
            let p = ViscosityParams { mu, lambda, kappa: 1.0, dilute_weakening: false };
            let (d, xi) = viscous_stress(&p, 1.0, 1.0, &e);
            prop_assert!(xi >= 0.0);
            prop_assert!(xi + 1e-12 * xi.abs().max(1.0) >= 2.0 * mu * ddot(&e, &e));
            prop_assert!(rel(ddot(&d, &e), xi) < 1e-12 || xi == 0.0);
        }

        #[test]
        fn heat_capacity_positive(j in 1e-3f64..1e3, theta in 0.0f64..1e3) {
            let t = eval_thermo(&ConstitutiveModel::default(), j, theta).unwrap();
            prop_assert!(t.c > 0.0);
            prop_assert!(t.w >= 0.0);
        }
    }
}
