macro_rules! ledger_columns {
    ($($variant:ident = $name:literal,)*) => {
        /// Ledger columns in CSV order.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
        pub enum Col {
            $($variant,)*
        }

        impl Col {
            pub const ALL: &'static [Col] = &[$(Col::$variant,)*];

            pub fn name(self) -> &'static str {
                match self {
                    $(Col::$variant => $name,)*
                }
            }

            pub fn from_name(name: &str) -> Option<Col> {
                match name {
                    $($name => Some(Col::$variant),)*
                    _ => None,
                }
            }
        }
    };
}

// Quantities are integrals over Ω (already multiplied by the cell volume)
// unless noted. Rates are evaluated at the row's state; `step_*` columns are
// the integrator-weighted integrals over the step that starts at the row.
ledger_columns! {
    Mass = "mass",
    Mass0 = "mass_0",
    Mass1 = "mass_1",
    MomX = "mom_x",
    MomY = "mom_y",
    MomZ = "mom_z",
    MomAbs = "mom_abs",
    Kinetic = "kinetic",
    Stored = "stored",
    Thermal = "thermal",
    GravEnergy = "grav_energy",
    FieldEnergy = "field_energy",
    FieldTail = "field_tail",
    MixingEnergy = "mixing_energy",
    TotalEnergy = "total_energy",
    Entropy = "entropy",
    EntropyScale = "entropy_scale",
    RhoSquared = "rho_squared",
    PotSquared = "pot_squared",
    PotMaxSquared = "pot_max_squared",
    RhoJDrift = "rho_j_drift",
    MaxRho = "max_rho",
    MinJ = "min_j",
    IncomingMass = "incoming_mass",
    IncomingMomX = "incoming_mom_x",
    IncomingMomY = "incoming_mom_y",
    IncomingMomZ = "incoming_mom_z",
    CoriolisX = "coriolis_x",
    CoriolisY = "coriolis_y",
    CoriolisZ = "coriolis_z",
    GravityMomX = "gravity_mom_x",
    GravityMomY = "gravity_mom_y",
    GravityMomZ = "gravity_mom_z",
    GravityMomAbs = "gravity_mom_abs",
    WallX = "wall_x",
    WallY = "wall_y",
    WallZ = "wall_z",
    WallAbs = "wall_abs",
    MixingMomX = "mixing_mom_x",
    MixingMomY = "mixing_mom_y",
    MixingMomZ = "mixing_mom_z",
    FrictionPairX = "friction_pair_x",
    FrictionPairY = "friction_pair_y",
    FrictionPairZ = "friction_pair_z",
    ViscousDissipation = "viscous_dissipation",
    FrictionDissipation = "friction_dissipation",
    AdiabaticPower = "adiabatic_power",
    HeatExchangeSum = "heat_exchange_sum",
    CoriolisPower = "coriolis_power",
    PKineticIn = "p_kinetic_in",
    PFrictionIn = "p_friction_in",
    PStoredIn = "p_stored_in",
    PThermalIn = "p_thermal_in",
    PPressureIn = "p_pressure_in",
    PHeat = "p_heat",
    PGravIn = "p_grav_in",
    PPhysical = "p_physical",
    PChain = "p_chain",
    PScheme = "p_scheme",
    SConduction = "s_conduction",
    SHeating = "s_heating",
    SInflow = "s_inflow",
    SExchange = "s_exchange",
    SFriction = "s_friction",
    SProduction = "s_production",
    SProductionMin = "s_production_min",
    StepMassIn = "step_mass_in",
    StepMomX = "step_mom_x",
    StepMomY = "step_mom_y",
    StepMomZ = "step_mom_z",
    StepForceAbs = "step_force_abs",
    WClamped = "w_clamped",
    VacuumCells = "vacuum_cells",
}

pub const N_COLS: usize = Col::ALL.len();

/// Fixed-size accumulator indexed by [`Col`].
#[derive(Clone, Debug, PartialEq)]
pub struct Terms(pub [f64; N_COLS]);

impl Default for Terms {
    fn default() -> Self {
        Terms([0.0; N_COLS])
    }
}

impl Terms {
    #[inline]
    pub fn get(&self, c: Col) -> f64 {
        self.0[c as usize]
    }

    #[inline]
    pub fn set(&mut self, c: Col, v: f64) {
        self.0[c as usize] = v;
    }

    #[inline]
    pub fn add(&mut self, c: Col, v: f64) {
        self.0[c as usize] += v;
    }

    #[inline]
    pub fn add3(&mut self, first: Col, v: [f64; 3]) {
        let k = first as usize;
        self.0[k] += v[0];
        self.0[k + 1] += v[1];
        self.0[k + 2] += v[2];
    }

    #[inline]
    pub fn get3(&self, first: Col) -> [f64; 3] {
        let k = first as usize;
        [self.0[k], self.0[k + 1], self.0[k + 2]]
    }

    pub(crate) fn accumulate(&mut self, other: &Terms) {
        for (a, b) in self.0.iter_mut().zip(other.0.iter()) {
            *a += b;
        }
    }

    pub(crate) fn scale(&mut self, s: f64) {
        for a in self.0.iter_mut() {
            *a *= s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique_and_round_trip() {
        let mut seen = std::collections::HashSet::new();
        for &c in Col::ALL {
            assert!(seen.insert(c.name()));
            assert_eq!(Col::from_name(c.name()), Some(c));
        }
        // Vector columns are laid out x, y, z.
        for first in [Col::MomX, Col::IncomingMomX, Col::CoriolisX, Col::GravityMomX, Col::WallX, Col::MixingMomX, Col::FrictionPairX, Col::StepMomX] {
            let k = first as usize;
            assert!(Col::ALL[k + 1].name().ends_with("_y"));
            assert!(Col::ALL[k + 2].name().ends_with("_z"));
        }
    }
}
