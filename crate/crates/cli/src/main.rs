use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use accrete_core::constitutive::{STANDARD_J_RANGE, STANDARD_THETA_RANGE};
use accrete_core::gravity::{solve_potential_direct, solve_potential_fast};
use accrete_core::simulation::{ledger_from_snapshots, report_for, RunOptions};
use accrete_core::verify::{derivative_suite, mixing_suite};
use accrete_core::{BalanceLedger, Error, GravityContext, GravityMethod, Grid, Scenario, Simulation};

#[derive(Parser)]
#[command(name = "accrete", version, about = "Self-gravitating open-system flow simulator")]
struct Cli {
    /// Worker threads for the parallel kernels (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario TOML file.
    scenario: PathBuf,
    /// Override a scenario key, e.g. `constitutive.alpha=0.5`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario, writing snapshots, the ledger and an audit report.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Simulated seconds between snapshots.
        #[arg(long)]
        snapshot_every: Option<f64>,
    },
    /// Check the constitutive assumptions and derivative identities.
    Check {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Time the direct and fast gravity solvers; prints CSV.
    Gravity {
        /// Cells per axis, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [8usize, 16, 32])]
        sizes: Vec<usize>,
        /// Largest size for which the direct sum is run.
        #[arg(long, default_value_t = 32)]
        direct_max: usize,
        /// Largest accepted size.
        #[arg(long, default_value_t = 128)]
        max_size: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Recompute the audits of a finished run from its snapshots.
    Ledger {
        /// Output directory of a previous `run`.
        run_dir: PathBuf,
        /// Scenario to use instead of the copy stored in the run directory.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Resource(_) => 2,
        Error::Step { .. } | Error::DegenerateDt { .. } | Error::NoConvergence { .. } | Error::Domain(_) => 3,
        Error::Io { .. } => 4,
    }
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn run(args: &ScenarioArgs, output_dir: Option<PathBuf>, snapshot_every: Option<f64>) -> Result<(), Error> {
    let scenario = Scenario::load(&args.scenario, &args.overrides)?;
    if let Some(s) = snapshot_every {
        if !(s > 0.0) {
            return Err(Error::config("--snapshot-every", "must be positive"));
        }
    }
    let name = scenario.name.clone().unwrap_or_else(|| {
        args.scenario
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into())
    });
    let dir = output_dir
        .or_else(|| scenario.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(&name));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    let mut sim = Simulation::from_scenario(&scenario)?;
    write(&dir.join("scenario.toml"), &scenario.to_toml())?;
    write(
        &dir.join("manifest.txt"),
        &format!(
            "name = {name}\nversion = {}\ncomponents = {}\ndims = {} {} {}\nh = {:e}\nworkers = {}\nledger = ledger.csv\nreport = report.txt\nsnapshots = snapshots/\n",
            env!("CARGO_PKG_VERSION"),
            sim.phases.len(),
            sim.grid.n[0],
            sim.grid.n[1],
            sim.grid.n[2],
            sim.grid.h,
            rayon::current_num_threads(),
        ),
    )?;

    let mut opts = RunOptions::from_scenario(&scenario);
    opts.output_dir = Some(dir.clone());
    if snapshot_every.is_some() {
        opts.snapshot_every = snapshot_every;
    }
    let started = Instant::now();
    eprintln!("running {name}: {} cells, t_end = {}", sim.grid.active_count(), opts.t_end);
    let outcome = sim.run_with(&opts);
    eprintln!(
        "{} steps to t = {:.6e} in {:.2} s",
        sim.steps,
        sim.time(),
        started.elapsed().as_secs_f64()
    );
    let report = sim.report()?;
    write(&dir.join("report.txt"), &report.to_string())?;
    print!("{report}");
    outcome.map(|_| ())
}

fn check(args: &ScenarioArgs) -> Result<bool, Error> {
    let scenario = Scenario::load(&args.scenario, &args.overrides)?;
    let sim = Simulation::from_scenario(&scenario)?;
    let assumptions = sim.assumptions();
    print!("{assumptions}");
    let mut ok = assumptions.all_passed();

    let d = derivative_suite(&sim.models[0], STANDARD_J_RANGE, STANDARD_THETA_RANGE, 1000, 1)?;
    let d_ok = d.passed(1e-6, 1e-14);
    println!("{} derivatives: {d}", if d_ok { "PASS" } else { "FAIL" });
    ok &= d_ok;

    if let Some(m) = &sim.mixture {
        let r = mixing_suite(m, 1000, 2)?;
        let m_ok = r.passed(1e-10, 1e-6);
        println!("{} mixing energy: {r}", if m_ok { "PASS" } else { "FAIL" });
        ok &= m_ok;
    }
    println!("{}", if ok { "all checks passed" } else { "some checks FAILED" });
    Ok(ok)
}

fn gravity_bench(sizes: &[usize], direct_max: usize, max_size: usize, seed: u64) -> Result<(), Error> {
    use rand::{Rng, SeedableRng};
    if let Some(&n) = sizes.iter().find(|&&n| n == 0 || n > max_size) {
        return Err(Error::Resource(format!("size {n} outside 1..={max_size}")));
    }
    println!("n,cells,direct_seconds,fast_seconds,max_relative_error");
    for &n in sizes {
        let grid = Grid::new_box([n; 3], 1.0 / n as f64, [0.0; 3]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rho: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let ctx = GravityContext::new(&grid, 1.0, 0.0, GravityMethod::Fast);
        let t = Instant::now();
        let fast = solve_potential_fast(&ctx, &rho, &grid);
        let fast_s = t.elapsed().as_secs_f64();
        if n <= direct_max {
            let t = Instant::now();
            let direct = solve_potential_direct(&ctx, &rho, &grid);
            let direct_s = t.elapsed().as_secs_f64();
            let vmax = direct.v.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let err = fast.v.iter().zip(&direct.v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / vmax;
            println!("{n},{},{direct_s:.6e},{fast_s:.6e},{err:.3e}", grid.len());
        } else {
            println!("{n},{},,{fast_s:.6e},", grid.len());
        }
    }
    Ok(())
}

fn ledger(run_dir: &Path, scenario: Option<PathBuf>) -> Result<(), Error> {
    let path = scenario.unwrap_or_else(|| run_dir.join("scenario.toml"));
    let scenario = Scenario::load(&path, &[])?;
    let snap_root = run_dir.join("snapshots");
    let mut dirs: Vec<PathBuf> = fs::read_dir(&snap_root)
        .map_err(|e| Error::io(&snap_root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("manifest.txt").exists())
        .collect();
    dirs.sort();
    if dirs.len() < 2 {
        return Err(Error::config("snapshots", "need at least two snapshots"));
    }
    let ledger: BalanceLedger = ledger_from_snapshots(&scenario, &dirs)?;
    ledger.save(&run_dir.join("ledger_from_snapshots.csv"))?;
    let sim = Simulation::from_scenario(&scenario)?;
    let report = report_for(&sim.grid, &ledger, &sim.assumptions(), sim.gravity.g_const, &scenario.stability)?;
    println!("recomputed from {} snapshots (step integrals unavailable: mass and momentum audits are state-only)", dirs.len());
    print!("{report}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(w) = cli.workers {
        if w == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Run {
            scenario,
            output_dir,
            snapshot_every,
        } => run(scenario, output_dir.clone(), *snapshot_every),
        Command::Check { scenario } => match check(scenario) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(1),
            Err(e) => Err(e),
        },
        Command::Gravity {
            sizes,
            direct_max,
            max_size,
            seed,
        } => gravity_bench(sizes, *direct_max, *max_size, *seed),
        Command::Ledger { run_dir, scenario } => ledger(run_dir, scenario.clone()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
