//! Metal/silicate interaction: mixing energy, friction and heat exchange.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{norm2, sub, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureParams {
    /// Mixing modulus ϰ, Pa.
    pub varkappa: f64,
    /// Mixing exponent α.
    pub alpha_mix: f64,
    /// Friction scale, Pa·s/m².
    pub f0: f64,
    /// Heat-exchange scale, W/(m³·K).
    pub k0: f64,
    /// Density regularisation in the coefficient laws, kg/m³.
    #[serde(default = "default_rho_floor")]
    pub rho_floor: f64,
}

fn default_rho_floor() -> f64 {
    1e-12
}

impl Default for MixtureParams {
    fn default() -> Self {
        Self {
            varkappa: 0.0,
            alpha_mix: 1.0,
            f0: 0.0,
            k0: 0.0,
            rho_floor: default_rho_floor(),
        }
    }
}

impl MixtureParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.varkappa.is_finite() && self.varkappa >= 0.0) {
            return Err(Error::config("mixture.varkappa", "must be finite and nonnegative"));
        }
        if !(self.alpha_mix.is_finite() && self.alpha_mix > 0.0) {
            return Err(Error::config("mixture.alpha_mix", "must be positive"));
        }
        if !(self.f0.is_finite() && self.f0 >= 0.0) {
            return Err(Error::config("mixture.f0", "must be finite and nonnegative"));
        }
        if !(self.k0.is_finite() && self.k0 >= 0.0) {
            return Err(Error::config("mixture.k0", "must be finite and nonnegative"));
        }
        if !(self.rho_floor.is_finite() && self.rho_floor > 0.0) {
            return Err(Error::config("mixture.rho_floor", "must be positive"));
        }
        Ok(())
    }

    /// Friction coefficient `f0 ρ_M ρ_S / (ρ_M + ρ_S + ρ_floor)`.
    #[inline]
    pub fn friction_coefficient(&self, rho_m: f64, rho_s: f64) -> f64 {
        self.f0 * rho_m * rho_s / (rho_m + rho_s + self.rho_floor)
    }

    /// Heat-exchange coefficient `k0 ρ_M ρ_S / (ρ_M + ρ_S + ρ_floor)`.
    #[inline]
    pub fn heat_coefficient(&self, rho_m: f64, rho_s: f64) -> f64 {
        self.k0 * rho_m * rho_s / (rho_m + rho_s + self.rho_floor)
    }
}

fn check_jacobians(j_m: f64, j_s: f64) -> Result<()> {
    if !(j_m > 0.0 && j_s > 0.0) {
        return Err(Error::Domain(format!(
            "Jacobians must be positive, got J_M = {j_m}, J_S = {j_s}"
        )));
    }
    Ok(())
}

/// `φ_mix` and its partials in `J_M` and `J_S`.
///
/// `φ_mix = ϰ[P^-α + αP − α − 1]` for `P = J_M J_S < 1`, zero otherwise.
/// The bracket and its derivative vanish at `P = 1`, so `φ_mix` is C¹.
pub fn mixing_energy(params: &MixtureParams, j_m: f64, j_s: f64) -> Result<(f64, f64, f64)> {
    check_jacobians(j_m, j_s)?;
    let p = j_m * j_s;
    if p >= 1.0 || params.varkappa == 0.0 {
        return Ok((0.0, 0.0, 0.0));
    }
    let (k, a) = (params.varkappa, params.alpha_mix);
    let pa = p.powf(-a);
    let phi = k * (pa + a * p - a - 1.0);
    // dφ/dP = αϰ(1 − P^(−α−1))
    let dp = a * k * (1.0 - pa / p);
    Ok((phi, dp * j_s, dp * j_m))
}

/// Mixing pressures `p_mix,k = −J_k ∂φ_mix/∂J_k`.
///
/// Both equal `αϰ(P^-α − P) ≥ 0` in the mixed regime and vanish for
/// `P ≥ 1`. This is the sign that makes the mixing forces do exactly the
/// work stored in `φ_mix`.
pub fn mixing_pressures(params: &MixtureParams, j_m: f64, j_s: f64) -> Result<(f64, f64)> {
    let (_, d_m, d_s) = mixing_energy(params, j_m, j_s)?;
    Ok((-j_m * d_m, -j_s * d_s))
}

/// `−∂p_mix,k/∂J_k` for each component: the mixing contribution to the
/// acoustic stiffness, `αϰ J_other (1 + α P^(−α−1))` when `P < 1`.
pub fn mixing_stiffness(params: &MixtureParams, j_m: f64, j_s: f64) -> (f64, f64) {
    let p = j_m * j_s;
    if p >= 1.0 || params.varkappa == 0.0 {
        return (0.0, 0.0);
    }
    let (k, a) = (params.varkappa, params.alpha_mix);
    let g = a * k * (1.0 + a * p.powf(-a - 1.0));
    (g * j_s, g * j_m)
}

/// Drag pair for a given coefficient `f`: `force_on_M = −f (v_M − v_S)`,
/// `force_on_S = −force_on_M`, and dissipation `ξ_f = f |v_M − v_S|²`.
#[inline]
pub fn friction_pair(f: f64, v_m: Vec3, v_s: Vec3) -> (Vec3, Vec3, f64) {
    let dv = sub(v_m, v_s);
    let on_m = [-f * dv[0], -f * dv[1], -f * dv[2]];
    let on_s = [-on_m[0], -on_m[1], -on_m[2]];
    (on_m, on_s, f * norm2(dv))
}

pub fn friction_exchange(
    params: &MixtureParams,
    rho_m: f64,
    rho_s: f64,
    v_m: Vec3,
    v_s: Vec3,
) -> (Vec3, Vec3, f64) {
    friction_pair(params.friction_coefficient(rho_m, rho_s), v_m, v_s)
}

/// Heat exchange for a given coefficient `k`: `q_to_M = k (θ_S − θ_M)`,
/// `q_to_S = −q_to_M`, with entropy production `k(θ_M − θ_S)²/(θ_M θ_S)`.
pub fn exchange_pair(k: f64, theta_m: f64, theta_s: f64) -> Result<(f64, f64, f64)> {
    if !(theta_m > 0.0 && theta_s > 0.0) {
        return Err(Error::Domain(format!(
            "entropy production needs positive temperatures, got {theta_m}, {theta_s}"
        )));
    }
    let q = k * (theta_s - theta_m);
    let d = theta_m - theta_s;
    Ok((q, -q, k * d * d / (theta_m * theta_s)))
}

pub fn heat_exchange(
    params: &MixtureParams,
    rho_m: f64,
    rho_s: f64,
    theta_m: f64,
    theta_s: f64,
) -> Result<(f64, f64, f64)> {
    exchange_pair(params.heat_coefficient(rho_m, rho_s), theta_m, theta_s)
}
