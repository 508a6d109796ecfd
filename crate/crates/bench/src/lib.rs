//! Shared fixtures for the benchmarks.

use accrete_core::state::{init_state, InitialProfile, SeedBlob};
use accrete_core::{ConstitutiveModel, FieldState, Grid};

/// Unit box with `n³` cells.
pub fn unit_grid(n: usize) -> Grid {
    Grid::new_box([n; 3], 1.0 / n as f64, [0.0; 3])
}

/// A compact blob in a dilute background, the typical accretion state.
pub fn seeded_state(grid: &Grid, model: &ConstitutiveModel) -> FieldState {
    let profile = InitialProfile {
        seed_blob: Some(SeedBlob {
            center: [0.5; 3],
            radius: 0.2,
            j: 1.0,
            edge: 0.05,
        }),
        noise: 0.01,
        seed: 7,
        ..InitialProfile::uniform(20.0, 1.0)
    };
    init_state(grid, model, 1.0, &profile).expect("valid profile")
}
