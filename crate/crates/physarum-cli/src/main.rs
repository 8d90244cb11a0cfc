//! Command-line front end: instance generation, exact oracle reports,
//! trajectory simulation with CSV export, verification against the oracle,
//! experiment presets, and concurrent sweeps.
//!
//! Exit codes: 0 on success, 1 when a judgment fails, 2 on usage or data
//! errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use physarum::dynamics::DynamicsSpec;
use physarum::experiments;
use physarum::instance::{gen_incidence, gen_parallel_links, gen_random, ProblemInstance};
use physarum::integrate::{self, IntegratorConfig, Method, Status};
use physarum::oracle;

#[derive(Parser)]
#[command(
    name = "physarum",
    version,
    about = "Physarum dynamics for weighted basis pursuit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a problem instance file
    Gen {
        #[command(subcommand)]
        family: GenFamily,
    },
    /// Enumerate basic feasible solutions in exact rational arithmetic
    Oracle {
        /// Instance JSON file
        instance: PathBuf,
        /// Write the report here instead of standard output
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Integrate a dynamics variant and export the trajectory as CSV
    Simulate {
        /// Instance JSON file
        instance: PathBuf,
        /// "uniform", inline spec JSON, or a path to a spec file
        #[arg(long)]
        spec: String,
        /// "ones", "uniform:lo,hi" (seeded), or an explicit "v1,v2,..."
        #[arg(long, default_value = "ones")]
        x0: String,
        /// Step size
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        /// Time horizon
        #[arg(long = "t-end", default_value_t = 50.0)]
        t_end: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Rk4)]
        method: MethodArg,
        /// Record every k-th step
        #[arg(long, default_value_t = 1)]
        record_every: usize,
        /// Early-convergence threshold on the equilibrium residual; 0 disables
        #[arg(long, default_value_t = 1e-8)]
        fp_tol: f64,
        /// Positivity floor
        #[arg(long, default_value_t = 1e-12)]
        x_min: f64,
        /// Clamp floor violations instead of halving the step
        #[arg(long)]
        no_adapt: bool,
        /// Seed for randomized starting vectors
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path (events go to <path>.events.json)
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Check a recorded trajectory against the exact oracle
    Verify {
        /// Trajectory CSV produced by `simulate`
        trajectory: PathBuf,
        /// Instance JSON file
        instance: PathBuf,
        /// Terminal distance tolerance
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Run a named experiment preset
    Experiment {
        /// Preset id; see --list
        #[arg(default_value = "")]
        id: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write trajectory artifacts into this directory
        #[arg(long)]
        artifacts: Option<PathBuf>,
        /// List available presets and exit
        #[arg(long)]
        list: bool,
    },
    /// Run a grid of presets concurrently
    Sweep {
        /// Grid JSON: {"presets": ["id", ...], "seeds": [0, 1, ...]}
        grid: PathBuf,
        /// Directory for outcome files
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Subcommand)]
enum GenFamily {
    /// Two nodes joined by parallel edges carrying one unit of flow
    Parallel {
        /// Comma-separated positive edge costs
        #[arg(long, value_delimiter = ',', required = true)]
        costs: Vec<i64>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Node-arc incidence instance of a directed graph (sink row deleted)
    Incidence {
        #[arg(long)]
        nodes: usize,
        /// Comma-separated arcs "tail-head", e.g. "0-1,1-2"
        #[arg(long, value_delimiter = ',', required = true)]
        edges: Vec<String>,
        /// Comma-separated arc lengths
        #[arg(long, value_delimiter = ',', required = true)]
        lengths: Vec<i64>,
        #[arg(long)]
        source: usize,
        #[arg(long)]
        sink: usize,
        #[arg(long, default_value_t = 1)]
        demand: i64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Random full-row-rank integer instance with guaranteed-feasible b
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 2)]
        entry_bound: i64,
        #[arg(long, default_value_t = 5)]
        cost_bound: i64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Euler,
    Rk4,
}

impl From<MethodArg> for Method {
    fn from(value: MethodArg) -> Self {
        match value {
            MethodArg::Euler => Method::Euler,
            MethodArg::Rk4 => Method::Rk4,
        }
    }
}

enum CliError {
    Domain(physarum::Error),
    Usage(String),
}

impl From<physarum::Error> for CliError {
    fn from(e: physarum::Error) -> Self {
        CliError::Domain(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Domain(physarum::Error::Io(e))
    }
}

type CliResult = Result<bool, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Domain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Gen { family } => gen(family),
        Command::Oracle { instance, output } => oracle_cmd(&instance, output.as_deref()),
        Command::Simulate {
            instance,
            spec,
            x0,
            h,
            t_end,
            method,
            record_every,
            fp_tol,
            x_min,
            no_adapt,
            seed,
            output,
        } => {
            let config = IntegratorConfig {
                method: method.into(),
                h,
                t_end,
                x_min,
                adapt: !no_adapt,
                record_every,
                fp_tol,
            };
            simulate_cmd(&instance, &spec, &x0, seed, &config, &output)
        }
        Command::Verify {
            trajectory,
            instance,
            tol,
        } => verify_cmd(&trajectory, &instance, tol),
        Command::Experiment {
            id,
            seed,
            artifacts,
            list,
        } => {
            if list {
                for preset in experiments::PRESET_IDS {
                    println!("{preset}");
                }
                return Ok(true);
            }
            if id.is_empty() {
                return Err(CliError::Usage(
                    "missing preset id; use --list to see the catalog".into(),
                ));
            }
            let outcome = experiments::run_preset(&id, seed, artifacts.as_deref())?;
            print!("{}", outcome.to_json());
            Ok(outcome.pass)
        }
        Command::Sweep { grid, output } => sweep_cmd(&grid, &output),
    }
}

fn gen(family: GenFamily) -> CliResult {
    let (instance, output) = match family {
        GenFamily::Parallel { costs, output } => (gen_parallel_links(&costs)?, output),
        GenFamily::Incidence {
            nodes,
            edges,
            lengths,
            source,
            sink,
            demand,
            output,
        } => {
            let arcs = edges
                .iter()
                .map(|s| parse_arc(s))
                .collect::<Result<Vec<_>, _>>()?;
            (
                gen_incidence(nodes, &arcs, &lengths, source, sink, demand)?,
                output,
            )
        }
        GenFamily::Random {
            n,
            m,
            entry_bound,
            cost_bound,
            seed,
            output,
        } => (gen_random(n, m, entry_bound, cost_bound, seed)?, output),
    };
    instance.save(&output)?;
    println!(
        "wrote {} ({}x{} instance)",
        output.display(),
        instance.n(),
        instance.m()
    );
    Ok(true)
}

fn parse_arc(s: &str) -> Result<(usize, usize), CliError> {
    let (tail, head) = s
        .split_once('-')
        .ok_or_else(|| CliError::Usage(format!("bad arc {s:?}; expected \"tail-head\"")))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| CliError::Usage(format!("bad node index {v:?} in arc {s:?}")))
    };
    Ok((parse(tail)?, parse(head)?))
}

fn oracle_cmd(instance_path: &Path, output: Option<&Path>) -> CliResult {
    let instance = ProblemInstance::load(instance_path)?;
    let report = oracle::enumerate_bfs(&instance)?;
    let json = report.to_json();
    match output {
        Some(path) => {
            fs::write(path, &json)?;
            println!(
                "wrote {} ({} basic solutions, optimum cost {})",
                path.display(),
                report.solutions.len(),
                report.optimum().cost
            );
        }
        None => print!("{json}"),
    }
    Ok(true)
}

fn parse_spec(value: &str) -> Result<DynamicsSpec, CliError> {
    if value == "uniform" {
        return Ok(DynamicsSpec::Uniform);
    }
    if value.trim_start().starts_with('{') {
        return Ok(DynamicsSpec::from_json(value)?);
    }
    let text = fs::read_to_string(value)
        .map_err(|e| CliError::Usage(format!("cannot read spec file {value:?}: {e}")))?;
    Ok(DynamicsSpec::from_json(&text)?)
}

fn parse_x0(value: &str, m: usize, seed: u64) -> Result<Vec<f64>, CliError> {
    if value == "ones" {
        return Ok(vec![1.0; m]);
    }
    if let Some(range) = value.strip_prefix("uniform:") {
        let (lo, hi) = range
            .split_once(',')
            .ok_or_else(|| CliError::Usage(format!("bad x0 range {value:?}")))?;
        let lo: f64 = lo
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad x0 bound {lo:?}")))?;
        let hi: f64 = hi
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad x0 bound {hi:?}")))?;
        if !(lo > 0.0 && hi > lo) {
            return Err(CliError::Usage(format!(
                "x0 range must satisfy 0 < lo < hi, got {lo}, {hi}"
            )));
        }
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        return Ok((0..m).map(|_| rng.gen_range(lo..hi)).collect());
    }
    let values: Vec<f64> = value
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad x0 entry {v:?}")))
        })
        .collect::<Result<_, _>>()?;
    if values.len() != m {
        return Err(CliError::Usage(format!(
            "x0 has {} entries for {} edges",
            values.len(),
            m
        )));
    }
    Ok(values)
}

fn simulate_cmd(
    instance_path: &Path,
    spec_value: &str,
    x0_value: &str,
    seed: u64,
    config: &IntegratorConfig,
    output: &Path,
) -> CliResult {
    let instance = ProblemInstance::load(instance_path)?;
    let spec = parse_spec(spec_value)?;
    let x0 = parse_x0(x0_value, instance.m(), seed)?;
    let record = integrate::simulate(&instance, &spec, &x0, config)?;
    record.save_csv(output)?;
    let sidecar = sidecar_path(output);
    fs::write(&sidecar, record.sidecar_json())?;
    println!(
        "{:?} at t = {:.6} ({} samples, {} clamps) -> {}",
        record.status,
        record.terminal().t,
        record.samples.len(),
        record.clamp_count,
        output.display()
    );
    Ok(record.status != Status::Error)
}

fn sidecar_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_os_string();
    name.push(".events.json");
    PathBuf::from(name)
}

fn verify_cmd(trajectory: &Path, instance_path: &Path, tol: f64) -> CliResult {
    let instance = ProblemInstance::load(instance_path)?;
    let file = fs::File::open(trajectory)?;
    let samples = integrate::read_csv(std::io::BufReader::new(file))?;
    if samples[0].x.len() != instance.m() {
        return Err(CliError::Usage(format!(
            "trajectory has {} edges, instance has {}",
            samples[0].x.len(),
            instance.m()
        )));
    }
    let report = oracle::enumerate_bfs(&instance)?;
    let x_star = report.x_star();
    let terminal = samples.last().expect("read_csv yields at least one row");
    let distance = terminal
        .x
        .iter()
        .zip(&x_star)
        .map(|(xe, xs)| (xe - xs).abs())
        .fold(0.0_f64, f64::max);
    let gap = oracle::optimality_gap(&instance, &terminal.x, &report)?;

    let mut violations = 0usize;
    for pair in samples.windows(2) {
        if pair[1].lyapunov > pair[0].lyapunov + experiments::lyapunov_slack(pair[0].lyapunov) {
            violations += 1;
        }
    }

    let pass = distance <= tol && violations == 0;
    let verdict = json!({
        "pass": pass,
        "tolerance": tol,
        "distance_to_optimum": distance,
        "gap": gap,
        "lyapunov_violations": violations,
        "terminal_t": terminal.t,
        "samples": samples.len(),
    });
    println!("{}", serde_json::to_string_pretty(&verdict).expect("verdict serializes"));
    Ok(pass)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepGrid {
    presets: Vec<String>,
    seeds: Vec<u64>,
}

fn sweep_cmd(grid_path: &Path, output: &Path) -> CliResult {
    let text = fs::read_to_string(grid_path)?;
    let grid: SweepGrid =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad grid file: {e}")))?;
    if grid.presets.is_empty() || grid.seeds.is_empty() {
        return Err(CliError::Usage("grid needs presets and seeds".into()));
    }
    fs::create_dir_all(output)?;

    let runs: Vec<(String, u64)> = grid
        .presets
        .iter()
        .flat_map(|id| grid.seeds.iter().map(move |&seed| (id.clone(), seed)))
        .collect();
    let outcomes = experiments::run_suite(&runs, None);

    let mut all_pass = true;
    for ((id, seed), outcome) in runs.iter().zip(outcomes) {
        let outcome = outcome?;
        let path = output.join(format!("outcome-{id}-{seed}.json"));
        fs::write(&path, outcome.to_json())?;
        println!(
            "{} seed {} -> {} ({})",
            id,
            seed,
            if outcome.pass { "pass" } else { "FAIL" },
            path.display()
        );
        all_pass &= outcome.pass;
    }
    Ok(all_pass)
}
