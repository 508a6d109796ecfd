//! Acceptance criteria, one PASS/FAIL line each. Runs as a plain binary
//! (`harness = false`) so the lines come out in order and a failure of
//! one criterion does not hide the others.

use std::f64::consts::PI;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use accrete_core::constitutive::{STANDARD_J_RANGE, STANDARD_SAMPLES, STANDARD_THETA_RANGE};
use accrete_core::diagnostics::Col;
use accrete_core::gravity::{
    domain_constant, orbital_omega, solve_potential_direct, solve_potential_fast, G_SI,
};
use accrete_core::mixture::{exchange_pair, friction_pair};
use accrete_core::simulation::RunReport;
use accrete_core::state::{barycenter, mass_weighted_radius};
use accrete_core::verify::{derivative_suite, mixing_suite};
use accrete_core::{
    check_assumptions, AssumptionConfig, ConstitutiveModel, GravityContext, GravityMethod, Grid, MixtureParams,
    Scenario, Simulation,
};

// Reference values from the first validated run. The envelope for the
// ρJ drift is the measured drift rounded up to two significant digits.
const DRIFT_ENVELOPE: [f64; 3] = [7.1e-6, 2.1e-6, 2.3e-7];
const DIFFERENTIATION_RATIO: f64 = 0.936973867;

struct Line {
    pass: bool,
    detail: String,
}

fn line(pass: bool, detail: impl Into<String>) -> Line {
    Line {
        pass,
        detail: detail.into(),
    }
}

fn scenario(name: &str, overrides: &[&str]) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.toml"));
    let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    Scenario::load(&path, &overrides).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn run(s: &Scenario) -> (Simulation, RunReport) {
    let mut sim = Simulation::from_scenario(s).unwrap();
    sim.run_until(s.time.t_end, s.time.max_steps).unwrap();
    sim.close_ledger().unwrap();
    let report = sim.report().unwrap();
    (sim, report)
}

fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn constitutive_identities() -> Line {
    let model = ConstitutiveModel::default();
    let r = derivative_suite(&model, STANDARD_J_RANGE, STANDARD_THETA_RANGE, 1000, 20).unwrap();
    line(r.passed(1e-6, 1e-14), r.to_string())
}

fn random_density(grid: &Grid, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..grid.len()).map(|_| rng.gen_range(0.0..1.0)).collect()
}

fn max_abs(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, |m, x| m.max(x.abs()))
}

/// Uniform ball of radius 1 centred in a box of side 2.5, with boundary
/// cells weighted by their covered volume fraction.
fn ball_density(n: usize) -> (Grid, Vec<f64>) {
    let side = 2.5;
    let h = side / n as f64;
    let grid = Grid::new_box([n; 3], h, [-0.5 * side; 3]);
    let sub = 8;
    let rho = (0..grid.len())
        .map(|i| {
            let c = grid.center(i);
            let r = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
            let half_diag = 0.5 * h * 3f64.sqrt();
            if r + half_diag <= 1.0 {
                return 1.0;
            }
            if r - half_diag >= 1.0 {
                return 0.0;
            }
            let mut inside = 0;
            for a in 0..sub {
                for b in 0..sub {
                    for d in 0..sub {
                        let off = |k: usize| ((k as f64 + 0.5) / sub as f64 - 0.5) * h;
                        let p = [c[0] + off(a), c[1] + off(b), c[2] + off(d)];
                        if p[0] * p[0] + p[1] * p[1] + p[2] * p[2] < 1.0 {
                            inside += 1;
                        }
                    }
                }
            }
            inside as f64 / (sub * sub * sub) as f64
        })
        .collect();
    (grid, rho)
}

fn gravity_oracles() -> Line {
    let mut worst = 0.0f64;
    for (k, n) in [8usize, 16, 32].into_iter().enumerate() {
        let grid = Grid::new_box([n; 3], 1.0 / n as f64, [0.0; 3]);
        let rho = random_density(&grid, 100 + k as u64);
        let ctx = GravityContext::new(&grid, 1.0, 0.0, GravityMethod::Fast);
        let fast = solve_potential_fast(&ctx, &rho, &grid);
        let direct = solve_potential_direct(&ctx, &rho, &grid);
        let vs = max_abs(direct.v.iter().copied());
        let gs = max_abs(direct.g.iter().flatten().copied());
        let ev = max_abs(fast.v.iter().zip(&direct.v).map(|(a, b)| a - b)) / vs;
        let eg = max_abs(
            fast.g
                .iter()
                .flatten()
                .zip(direct.g.iter().flatten())
                .map(|(a, b)| a - b),
        ) / gs;
        worst = worst.max(ev).max(eg);
    }

    // Analytic potential of the unit ball with G = ρ = 1.
    let exact = |r: f64| {
        if r < 1.0 {
            -2.0 * PI * (1.0 - r * r / 3.0)
        } else {
            -4.0 * PI / (3.0 * r)
        }
    };
    let mut errors = Vec::new();
    for n in [16usize, 32, 64] {
        let (grid, rho) = ball_density(n);
        let ctx = GravityContext::new(&grid, 1.0, 0.0, GravityMethod::Fast);
        let v = solve_potential_fast(&ctx, &rho, &grid).v;
        let mut err = 0.0f64;
        for i in 0..grid.len() {
            let c = grid.center(i);
            let r = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
            if r < 1.0 {
                err = err.max((v[i] - exact(r)).abs() / exact(0.0).abs());
            }
        }
        errors.push(err);
    }
    let orders = [order(errors[0], errors[1]), order(errors[1], errors[2])];
    let pass = worst <= 1e-10 && errors[2] <= 0.02 && orders.iter().all(|&p| p >= 1.0);
    line(
        pass,
        format!(
            "fast vs direct {worst:.2e}; ball interior error at 16/32/64: {} (orders {:.2}, {:.2})",
            fmt_list(&errors),
            orders[0],
            orders[1]
        ),
    )
}

fn orbital_period() -> Line {
    let m_sun = 1.98847e30;
    let au = 1.495978707e11;
    let omega = orbital_omega(m_sun, au, G_SI).unwrap();
    let days = 2.0 * PI / omega / 86400.0;
    let rel = (days - 365.26).abs() / 365.26;
    line(rel <= 1e-4, format!("period {days:.4} days (relative deviation {rel:.2e})"))
}

// Everything stays below J = 1, where the stored energy is smooth; cells
// crossing its kink make the residual converge irregularly under refinement.
const LEDGER_BOX: &str = r#"
[domain]
n = [32, 32, 32]

[initial]
j_background = 0.95
theta = 1.0
seed = 3
noise = 0.02

[initial.seed_blob]
center = [0.5, 0.5, 0.5]
radius = 0.2
j = 0.8
edge = 0.03

[initial.velocity]
kind = "vortex"
amplitude = 0.2

[gravity]
G = 1.0

[time]
t_end = 1.0
dt_max = 1.0

[nondimensional]
"#;

fn conservation_ledgers() -> Line {
    let s = Scenario::parse(LEDGER_BOX).unwrap();
    let probe = Simulation::from_scenario(&s).unwrap().stable_dt().unwrap();
    // Fixed steps well inside the stable range so all three runs use the
    // same sequence of step sizes up to the halving.
    let dt0 = 0.5 * probe;
    let mut residuals = Vec::new();
    let mut mass_drift = 0.0f64;
    let mut gravity_injection = 0.0f64;
    for level in 0..3u32 {
        let steps = 200 * 2usize.pow(level);
        let dt = dt0 / 2f64.powi(level as i32);
        let mut sim = Simulation::from_scenario(&s).unwrap();
        for _ in 0..steps {
            sim.advance(dt).unwrap();
        }
        sim.close_ledger().unwrap();
        let report = sim.report().unwrap();
        let mass = sim.ledger.column(Col::Mass);
        mass_drift = mass_drift.max((mass[mass.len() - 1] - mass[0]).abs() / mass[0]);
        gravity_injection = gravity_injection.max(report.gravity_momentum);
        residuals.push(report.energy.sum_abs);
    }
    let orders = [order(residuals[0], residuals[1]), order(residuals[1], residuals[2])];
    let pass = mass_drift <= 1e-12 && gravity_injection <= 1e-12 && orders.iter().all(|&p| p >= 1.0);
    line(
        pass,
        format!(
            "mass drift {mass_drift:.2e}, net gravity force {gravity_injection:.2e}, \
             energy residual at dt, dt/2, dt/4: {} (orders {:.2}, {:.2})",
            fmt_list(&residuals),
            orders[0],
            orders[1]
        ),
    )
}

fn open_system(accrete: &(Simulation, RunReport)) -> Line {
    let (sim, report) = accrete;
    let radial = sim.ledger.column(Col::PFrictionIn);
    let radial_max = radial.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let local = scenario("accrete-1c", &["sources.inflow.kind=\"local\"", "time.max_steps=30"]);
    let (local_sim, local_report) = run(&local);
    let local_terms = local_sim.ledger.column(Col::PFrictionIn);
    let local_zero = local_terms.iter().all(|&x| x == 0.0);

    let mass = report.mass.max(local_report.mass);
    let pass = mass <= 1e-12 && local_zero && radial_max <= 0.0;
    line(
        pass,
        format!(
            "mass audit {mass:.2e}; incoming friction power with local inflow {}, with radial inflow at most {radial_max:.2e}",
            if local_zero { "identically 0" } else { "NONZERO" }
        ),
    )
}

fn entropy(runs: &[(&str, &(Simulation, RunReport))]) -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, (_, r)) in runs {
        let ok = r.entropy.monotone && r.entropy.min_pointwise >= 0.0;
        pass &= ok;
        parts.push(format!(
            "{name} drop {:.1e}/{:.1e} min production {:.1e}",
            r.entropy.worst_drop, r.entropy.tolerance, r.entropy.min_pointwise
        ));
    }
    line(pass, parts.join("; "))
}

fn two_component_exactness() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut bitwise = true;
    for _ in 0..10_000 {
        let f = rng.gen_range(0.0..10.0);
        let vm = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
        let vs = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
        let (on_m, on_s, _) = friction_pair(f, vm, vs);
        bitwise &= (0..3).all(|a| on_m[a] + on_s[a] == 0.0);
        let (qm, qs, _) = exchange_pair(f, rng.gen_range(0.1..10.0), rng.gen_range(0.1..10.0)).unwrap();
        bitwise &= qm + qs == 0.0;
    }

    // Ledger sums over a coupled two-component state.
    let coupled = scenario("differentiate-2c", &["domain.n=[12,12,12]"]);
    let mut sim = Simulation::from_scenario(&coupled).unwrap();
    for _ in 0..5 {
        sim.step().unwrap();
    }
    let terms = &sim.evaluation().unwrap().terms;
    let pair = terms.get3(Col::FrictionPairX);
    let ledger_exact = pair.iter().all(|&x| x == 0.0) && terms.get(Col::HeatExchangeSum) == 0.0;

    // Identical uncoupled components reproduce the single-component run.
    let single = scenario("smooth-advection", &["domain.n=[12,12,12]", "time.max_steps=10"]);
    let double = scenario(
        "smooth-advection",
        &[
            "domain.n=[12,12,12]",
            "time.max_steps=10",
            "mixture.varkappa=0.0",
            "mixture.f0=0.0",
            "mixture.k0=0.0",
            "mixture.metal_fraction=0.5",
            "mixture.rho0_metal=1.0",
            "mixture.rho0_silicate=1.0",
        ],
    );
    let (a, _) = run(&single);
    let mut b = Simulation::from_scenario(&double).unwrap();
    // The scenario splits the bulk into two half-fractions; here both
    // components are set to the full single-component state instead.
    b.phases = vec![Simulation::from_scenario(&single).unwrap().phases[0].clone(); 2];
    b.sources = vec![a.sources[0]; 2];
    b.run_until(single.time.t_end, single.time.max_steps).unwrap();
    let same = b.phases.iter().all(|p| {
        p.rho == a.phases[0].rho && p.mom == a.phases[0].mom && p.j == a.phases[0].j && p.w == a.phases[0].w
    });

    let (_, _, s1) = exchange_pair(1.0, 2.0, 1.0).unwrap();
    let (_, _, s2) = exchange_pair(2.0, 3.0, 1.5).unwrap();
    let hand = s1 == 0.5 && (s2 - 1.0).abs() <= 1e-15;
    line(
        bitwise && ledger_exact && same && hand,
        format!(
            "pairs cancel bitwise: {bitwise}; ledger sums zero: {ledger_exact}; \
             symmetric run matches single: {same}; production {s1} and {s2} (hand 0.5 and 1)"
        ),
    )
}

fn mixing_energy() -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha_mix in [1.0, 1.5, 3.0] {
        let p = MixtureParams {
            varkappa: 1.0,
            alpha_mix,
            ..MixtureParams::default()
        };
        let r = mixing_suite(&p, 1000, 30).unwrap();
        pass &= r.passed(1e-10, 1e-6);
        parts.push(format!("alpha {alpha_mix}: {r}"));
    }
    line(pass, parts.join("; "))
}

fn stability(runs: &[(&str, &(Simulation, RunReport))]) -> Line {
    let n = 64;
    let grid = Grid::new_box([n; 3], 2.0 / n as f64, [-1.0; 3]).with_sphere([0.0; 3], 1.0);
    let c2 = domain_constant(&grid, 2.0).unwrap();
    let c2_rel = (c2 - 4.0 * PI).abs() / (4.0 * PI);

    let chains: Vec<String> = runs
        .iter()
        .filter(|(_, (_, r))| !r.stability.chain_holds)
        .map(|(n, _)| n.to_string())
        .collect();

    let collapse = scenario("collapse", &[]);
    let flagged = check_assumptions(
        &collapse.model(),
        STANDARD_J_RANGE,
        STANDARD_THETA_RANGE,
        STANDARD_SAMPLES,
        &AssumptionConfig::default(),
    );
    let a_fails = flagged.entry("a").is_some_and(|e| !e.passed);
    line(
        c2_rel <= 0.05 && chains.is_empty() && a_fails,
        format!(
            "C2 of unit ball {c2:.4} vs 4pi (relative {c2_rel:.2e}); bound chain violated on: [{}]; collapse flagged: {a_fails}",
            chains.join(", ")
        ),
    )
}

fn consistency() -> Line {
    let mut drifts = Vec::new();
    for n in [16, 32, 64] {
        let s = scenario("smooth-advection", &[&format!("domain.n=[{n},{n},{n}]")]);
        let (sim, _) = run(&s);
        drifts.push(sim.ledger.rows.last().unwrap().get(Col::RhoJDrift));
    }
    let orders = [order(drifts[0], drifts[1]), order(drifts[1], drifts[2])];
    let within = drifts.iter().zip(DRIFT_ENVELOPE).all(|(d, e)| *d <= e);
    line(
        within && orders.iter().all(|&p| p >= 1.0),
        format!(
            "drift at 16/32/64: {} (orders {:.2}, {:.2}); envelope {}",
            fmt_list(&drifts),
            orders[0],
            orders[1],
            fmt_list(&DRIFT_ENVELOPE)
        ),
    )
}

fn differentiation(run: &(Simulation, RunReport)) -> Line {
    let sim = &run.0;
    let c = barycenter(&sim.grid, &sim.phases);
    let metal = mass_weighted_radius(&sim.grid, &sim.phases[0], c);
    let silicate = mass_weighted_radius(&sim.grid, &sim.phases[1], c);
    let ratio = metal / silicate;
    let matches = (ratio - DIFFERENTIATION_RATIO).abs() <= 1e-6 * DIFFERENTIATION_RATIO;
    line(
        metal < silicate && matches,
        format!("metal radius {metal:.6e}, silicate radius {silicate:.6e}, ratio {ratio:.9} (reference {DIFFERENTIATION_RATIO:.9})"),
    )
}

fn guarded(f: impl FnOnce() -> Line) -> Line {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(l) => l,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            line(false, format!("panicked: {msg}"))
        }
    }
}

fn main() -> ExitCode {
    // Panics inside a criterion become its FAIL line.
    panic::set_hook(Box::new(|_| {}));
    let started = Instant::now();
    let quiet = run(&scenario("quiet-box", &[]));
    let accrete = run(&scenario("accrete-1c", &[]));
    let differentiate = run(&scenario("differentiate-2c", &[]));
    let smooth = run(&scenario("smooth-advection", &[]));
    let suite = [
        ("quiet-box", &quiet),
        ("accrete-1c", &accrete),
        ("differentiate-2c", &differentiate),
        ("smooth-advection", &smooth),
    ];
    eprintln!("regression runs done in {:.1} s", started.elapsed().as_secs_f64());

    let criteria: Vec<(&str, Box<dyn FnOnce() -> Line + '_>)> = vec![
        ("constitutive identities", Box::new(constitutive_identities)),
        ("gravity oracles", Box::new(gravity_oracles)),
        ("orbital balance", Box::new(orbital_period)),
        ("conservation ledgers", Box::new(conservation_ledgers)),
        ("open-system balances", Box::new(|| open_system(&accrete))),
        ("entropy", Box::new(|| entropy(&suite))),
        ("two-component exactness", Box::new(two_component_exactness)),
        ("mixing energy", Box::new(mixing_energy)),
        ("stability audit", Box::new(|| stability(&suite))),
        ("rho J consistency", Box::new(consistency)),
        ("differentiation", Box::new(|| differentiation(&differentiate))),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let l = guarded(f);
        if !l.pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {} [{:.1} s]",
            if l.pass { "PASS" } else { "FAIL" },
            k + 1,
            l.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!("{} of 11 criteria passed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
