//! Finite-difference self-checks of the closed-form thermodynamics and the
//! mixing energy, run by `accrete check`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constitutive::{eval_thermo, ConstitutiveModel};
use crate::error::Result;
use crate::mixture::{mixing_energy, MixtureParams};

/// Largest relative errors of the analytic derivatives against central
/// differences on random `(J, θ)` samples: p, η and w from ψ, and c from η.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DerivativeReport {
    pub samples: usize,
    pub pressure: f64,
    pub heat_capacity: f64,
    pub thermal_energy: f64,
    pub entropy: f64,
    /// `|J w − (ψ − θψ_θ − φ)|` relative to the size of the terms.
    pub gibbs: f64,
}

impl DerivativeReport {
    pub fn worst(&self) -> f64 {
        self.pressure.max(self.heat_capacity).max(self.thermal_energy).max(self.entropy)
    }

    pub fn passed(&self, tol: f64, gibbs_tol: f64) -> bool {
        self.worst() <= tol && self.gibbs <= gibbs_tol
    }
}

impl fmt::Display for DerivativeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} samples: p {:.2e}, c {:.2e}, w {:.2e}, eta {:.2e}, gibbs split {:.2e}",
            self.samples, self.pressure, self.heat_capacity, self.thermal_energy, self.entropy, self.gibbs
        )
    }
}

fn rel(a: f64, b: f64) -> f64 {
    rel_floor(a, b, 0.0)
}

/// Relative error with the denominator kept at least `floor`.
fn rel_floor(a: f64, b: f64, floor: f64) -> f64 {
    let s = a.abs().max(b.abs()).max(floor);
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// Points within `margin` (relative) of a kink of φ are skipped so that
/// the difference stencils stay on one smooth branch.
fn near_kink(model: &ConstitutiveModel, j: f64, margin: f64) -> bool {
    let kinks: Vec<f64> = match model.energy.segment {
        None => vec![1.0],
        Some(s) => vec![s.j0, s.j_gas],
    };
    kinks.iter().any(|k| (j - k).abs() < margin * k)
}

pub fn derivative_suite(
    model: &ConstitutiveModel,
    j_range: (f64, f64),
    theta_range: (f64, f64),
    samples: usize,
    seed: u64,
) -> Result<DerivativeReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let log_uniform = |rng: &mut ChaCha8Rng, (a, b): (f64, f64)| (rng.gen_range(a.ln()..b.ln())).exp();
    let psi = |j: f64, t: f64| eval_thermo(model, j, t).map(|e| e.psi);
    let mut r = DerivativeReport {
        samples,
        ..DerivativeReport::default()
    };
    let mut thermal_only = *model;
    thermal_only.energy.alpha = 0.0;
    thermal_only.energy.segment = None;
    let mut taken = 0;
    while taken < samples {
        let j = log_uniform(&mut rng, j_range);
        let t = log_uniform(&mut rng, theta_range);
        if near_kink(model, j, 1e-3) {
            continue;
        }
        taken += 1;
        let e = eval_thermo(model, j, t)?;
        let (dj, dt) = (1e-5 * j, 1e-4 * t);
        let psi_j = (psi(j + dj, t)? - psi(j - dj, t)?) / (2.0 * dj);
        // φ does not depend on θ, and at small J it is large enough to round
        // ψ away, so the θ-differences use the model without it.
        let thermal = |t: f64| eval_thermo(&thermal_only, j, t).map(|e| e.psi);
        let psi_t = (thermal(t + dt)? - thermal(t - dt)?) / (2.0 * dt);
        // c = θ ∂η/∂θ; one difference of η rounds less than two of ψ.
        let eta = |t: f64| eval_thermo(&thermal_only, j, t).map(|e| e.eta);
        let eta_t = (eta(t + dt)? - eta(t - dt)?) / (2.0 * dt);
        // Differences of ψ carry rounding of size ε|ψ|/step; the floors keep
        // that from dominating where p or η happen to be small.
        r.pressure = r.pressure.max(rel_floor(e.p, -psi_j, e.psi.abs() / j));
        r.entropy = r.entropy.max(rel_floor(e.eta, -psi_t / j, thermal(t)?.abs() / (t * j)));
        r.heat_capacity = r.heat_capacity.max(rel(e.c, t * eta_t));
        r.thermal_energy = r.thermal_energy.max(rel(e.w, (thermal(t)? - t * psi_t) / j));
        let scale = e.psi.abs() + (t * e.psi_theta).abs() + e.phi.abs();
        r.gibbs = r.gibbs.max((j * e.w - (e.psi - t * e.psi_theta - e.phi)).abs() / scale);
    }
    Ok(r)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MixingReport {
    pub samples: usize,
    /// Largest |φ_mix| or |∂φ_mix| just below `J_M J_S = 1`; both vanish above.
    pub continuity: f64,
    /// Largest relative error of the partials against central differences.
    pub partials: f64,
    pub min_value: f64,
}

impl MixingReport {
    pub fn passed(&self, continuity_tol: f64, partial_tol: f64) -> bool {
        self.continuity <= continuity_tol && self.partials <= partial_tol && self.min_value >= 0.0
    }
}

impl fmt::Display for MixingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} samples: jump at J_M J_S = 1 {:.2e}, partials {:.2e}, min value {:.2e}",
            self.samples, self.continuity, self.partials, self.min_value
        )
    }
}

pub fn mixing_suite(params: &MixtureParams, samples: usize, seed: u64) -> Result<MixingReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = MixingReport {
        samples,
        min_value: f64::INFINITY,
        ..MixingReport::default()
    };
    for _ in 0..samples {
        let jm = (rng.gen_range(-3.0f64..1.0)).exp();
        let js = (rng.gen_range(-3.0f64..1.0)).exp();
        let (phi, dm, ds) = mixing_energy(params, jm, js)?;
        r.min_value = r.min_value.min(phi);
        let p = jm * js;
        if (p - 1.0).abs() > 1e-4 {
            let h = 1e-6;
            let f = |a: f64, b: f64| mixing_energy(params, a, b).map(|x| x.0);
            let fm = (f(jm * (1.0 + h), js)? - f(jm * (1.0 - h), js)?) / (2.0 * h * jm);
            let fs = (f(jm, js * (1.0 + h))? - f(jm, js * (1.0 - h))?) / (2.0 * h * js);
            let floor = 1e-8 * params.varkappa;
            for (a, b) in [(dm, fm), (ds, fs)] {
                if a.abs().max(b.abs()) > floor {
                    r.partials = r.partials.max(rel(a, b));
                }
            }
        }
        // Approach the switching surface from below along J_S.
        let below = mixing_energy(params, jm, (1.0 - 1e-13) / jm)?;
        let above = mixing_energy(params, jm, (1.0 + 1e-13) / jm)?;
        for (x, y) in [(below.0, above.0), (below.1, above.1), (below.2, above.2)] {
            r.continuity = r.continuity.max((x - y).abs());
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_model_passes_its_own_suite() {
        let r = derivative_suite(&ConstitutiveModel::default(), (0.05, 20.0), (0.05, 20.0), 200, 1).unwrap();
        assert!(r.passed(1e-6, 1e-14), "{r}");
    }

    #[test]
    fn mixing_suite_on_defaults() {
        let p = MixtureParams {
            varkappa: 2.0,
            alpha_mix: 1.5,
            ..MixtureParams::default()
        };
        let r = mixing_suite(&p, 300, 2).unwrap();
        assert!(r.passed(1e-10, 1e-6), "{r}");
    }
}
