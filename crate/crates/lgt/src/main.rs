//! Batch command-line front end: configure, run, and serialize the chain,
//! interpolation, ascending-channel, and graph-reduction experiments.
//!
//! Every command reads one JSON config file, validates it strictly (unknown
//! fields are rejected), runs deterministically for fixed seeds, and writes
//! data outputs plus an optional JSON-lines log sidecar.  Exit codes:
//! 0 success, 2 config error, 3 numerical non-convergence.

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use lgt::chain::{
    fidelity_sweep, ground_state, sweep_csv, Boundary, ChainParams, CiAssembly, SolverKind,
    SweepParams,
};
use lgt::error::LgtError;
use lgt::graph::{reduce_to_petal, GaugeGraph};
use lgt::group::GroupVariant;
use lgt::interp::{subdivide_2d, LatticeConfig2d};
use lgt::linkspace::TruncatedLinkBasis;
use lgt::mera::{
    expect_in_ansatz, pushforward_oracle, MeraRecord, OracleEstimate, PlaquetteObservable, Sampler,
};

#[derive(Parser)]
#[command(name = "lgt", about = "Lattice gauge toolkit batch runner", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Override a scalar config field, e.g. --set g2=1.5 (repeatable; the
    /// value is parsed as JSON, falling back to a string).
    #[arg(long, global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads for cell-parallel commands (results are identical for
    /// any value; execution is currently sequential).
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// JSON-lines log sidecar path.
    #[arg(long, global = true)]
    log: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one chain ground state and write a result JSON.
    GsSolve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the fine-graining fidelity-per-site sweep and write a CSV.
    FidelitySweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Classically subdivide a 2D lattice configuration.
    Interp {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate plaquette observables in the lambda = 1 ansatz.
    MeraExpect {
        #[arg(long)]
        config: PathBuf,
    },
    /// Reduce a gauge graph to its petal form and write the gate sequence.
    ReduceGraph {
        #[arg(long)]
        config: PathBuf,
    },
}

struct Logger {
    file: Option<fs::File>,
}

impl Logger {
    fn open(path: &Option<PathBuf>) -> Result<Logger, LgtError> {
        let file = match path {
            Some(p) => Some(fs::File::create(p)?),
            None => None,
        };
        Ok(Logger { file })
    }

    fn emit(&mut self, record: Value) {
        if let Some(f) = &mut self.file {
            let _ = writeln!(f, "{record}");
        }
    }
}

fn parse_variant(s: &str) -> Result<GroupVariant, LgtError> {
    match s {
        "u1" => Ok(GroupVariant::U1),
        "su2" => Ok(GroupVariant::Su2),
        other => Err(LgtError::InvalidArgument(format!(
            "unknown group variant {other:?} (expected \"u1\" or \"su2\")"
        ))),
    }
}

fn parse_boundary(s: &str) -> Result<Boundary, LgtError> {
    match s {
        "periodic" => Ok(Boundary::Periodic),
        "open" => Ok(Boundary::Open),
        other => Err(LgtError::InvalidArgument(format!(
            "unknown boundary {other:?} (expected \"periodic\" or \"open\")"
        ))),
    }
}

fn parse_solver(s: &str) -> Result<SolverKind, LgtError> {
    match s {
        "ed" => Ok(SolverKind::Ed),
        "dmrg" => Ok(SolverKind::Dmrg),
        other => Err(LgtError::InvalidArgument(format!(
            "unknown solver {other:?} (expected \"ed\" or \"dmrg\")"
        ))),
    }
}

/// Load a config file and apply --set KEY=VALUE overrides to top-level
/// scalar fields before typed deserialization.
fn load_config<T: for<'de> Deserialize<'de>>(
    path: &PathBuf,
    sets: &[String],
) -> Result<T, LgtError> {
    let raw = fs::read_to_string(path)?;
    let mut value: Value = serde_json::from_str(&raw)?;
    for s in sets {
        let (key, val) = s.split_once('=').ok_or_else(|| {
            LgtError::InvalidArgument(format!("--set needs KEY=VALUE, got {s:?}"))
        })?;
        let parsed: Value =
            serde_json::from_str(val).unwrap_or_else(|_| Value::String(val.to_string()));
        if parsed.is_array() || parsed.is_object() {
            return Err(LgtError::InvalidArgument(format!(
                "--set only overrides scalar fields, got {val:?} for {key:?}"
            )));
        }
        match &mut value {
            Value::Object(map) => {
                map.insert(key.to_string(), parsed);
            }
            _ => {
                return Err(LgtError::InvalidArgument(
                    "config root must be a JSON object".into(),
                ))
            }
        }
    }
    Ok(serde_json::from_value(value)?)
}

fn write_text(path: &str, content: &str) -> Result<(), LgtError> {
    fs::write(path, content)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &str, payload: &T) -> Result<(), LgtError> {
    let mut text = serde_json::to_string_pretty(payload)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GsSolveConfig {
    variant: String,
    two_l_max: i64,
    n_links: usize,
    g2: f64,
    boundary: String,
    solver: String,
    #[serde(default = "default_bond_dim")]
    bond_dim: usize,
    #[serde(default)]
    seed: u64,
    output: String,
    #[serde(default)]
    state_output: Option<String>,
}

fn default_bond_dim() -> usize {
    16
}

#[derive(Serialize)]
struct GsSolveResult {
    variant: String,
    two_l_max: i64,
    n_links: usize,
    g2: f64,
    boundary: String,
    solver: String,
    bond_dim: usize,
    seed: u64,
    energy: f64,
    energy_density: f64,
    residual: f64,
    iterations: usize,
}

fn cmd_gs_solve(cfg: GsSolveConfig, log: &mut Logger) -> Result<(), LgtError> {
    let params = ChainParams {
        n_links: cfg.n_links,
        g2: cfg.g2,
        basis: TruncatedLinkBasis::new(parse_variant(&cfg.variant)?, cfg.two_l_max)?,
        boundary: parse_boundary(&cfg.boundary)?,
        solver: parse_solver(&cfg.solver)?,
        bond_dim: cfg.bond_dim,
        seed: cfg.seed,
    };
    params.validate()?;
    let res = ground_state(&params)?;
    log.emit(serde_json::json!({
        "event": "gs_converged",
        "residual": res.residual,
        "iterations": res.iterations,
    }));
    write_json(
        &cfg.output,
        &GsSolveResult {
            variant: cfg.variant,
            two_l_max: cfg.two_l_max,
            n_links: cfg.n_links,
            g2: cfg.g2,
            boundary: cfg.boundary,
            solver: cfg.solver,
            bond_dim: cfg.bond_dim,
            seed: cfg.seed,
            energy: res.energy,
            energy_density: res.energy_density,
            residual: res.residual,
            iterations: res.iterations,
        },
    )?;
    if let Some(state_path) = &cfg.state_output {
        let dense = res.state.to_dense()?;
        let amps: Vec<[f64; 2]> = dense.amp.iter().map(|a| [a.re, a.im]).collect();
        write_json(state_path, &serde_json::json!({ "amplitudes": amps }))?;
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FidelitySweepConfig {
    variant: String,
    two_l_max: i64,
    n_links: usize,
    g0_inv2: f64,
    g_inv2_grid: Vec<f64>,
    lambda_grid: Vec<f64>,
    boundary: String,
    /// "exact_fourier" or a quadrature exactness degree.
    #[serde(default)]
    assembly_degree: Option<usize>,
    solver: String,
    #[serde(default = "default_bond_dim")]
    bond_dim: usize,
    #[serde(default)]
    seed: u64,
    output: String,
}

fn cmd_fidelity_sweep(cfg: FidelitySweepConfig, log: &mut Logger) -> Result<(), LgtError> {
    let variant = parse_variant(&cfg.variant)?;
    let assembly = match cfg.assembly_degree {
        None => {
            if variant == GroupVariant::U1 {
                CiAssembly::ExactFourier
            } else {
                CiAssembly::Quadrature(3)
            }
        }
        Some(deg) => CiAssembly::Quadrature(deg),
    };
    let params = SweepParams {
        n_links: cfg.n_links,
        basis: TruncatedLinkBasis::new(variant, cfg.two_l_max)?,
        g0_inv2: cfg.g0_inv2,
        g_inv2_grid: cfg.g_inv2_grid,
        lambda_grid: cfg.lambda_grid,
        boundary: parse_boundary(&cfg.boundary)?,
        assembly,
        solver: parse_solver(&cfg.solver)?,
        bond_dim: cfg.bond_dim,
        seed: cfg.seed,
    };
    let rows = fidelity_sweep(&params)?;
    let mut failed = 0usize;
    for r in &rows {
        log.emit(serde_json::json!({
            "event": "sweep_cell",
            "g_inv2": r.g_inv2,
            "lambda": r.lambda,
            "isometry_defect": r.isometry_defect,
            "error": r.error,
        }));
        if r.error.is_some() {
            failed += 1;
        }
    }
    write_text(&cfg.output, &sweep_csv(&rows))?;
    if failed > 0 {
        return Err(LgtError::Convergence(format!("{failed} sweep cells failed")));
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InterpConfig {
    /// Path to a JSON-serialized 2D lattice configuration.
    input: String,
    #[serde(default = "default_iterations")]
    iterations: u32,
    /// Refined lattice JSON.
    output: String,
    /// Per-cell flux CSV of the refined lattice.
    flux_csv: String,
}

fn default_iterations() -> u32 {
    1
}

fn cmd_interp(cfg: InterpConfig, log: &mut Logger) -> Result<(), LgtError> {
    let raw = fs::read_to_string(&cfg.input)?;
    let mut lat: LatticeConfig2d = serde_json::from_str(&raw)?;
    for level in 0..cfg.iterations {
        lat = subdivide_2d(&lat)?;
        log.emit(serde_json::json!({
            "event": "subdivided",
            "level": level + 1,
            "nx": lat.nx,
            "ny": lat.ny,
        }));
    }
    write_json(&cfg.output, &lat)?;
    let mut csv = String::from("i,j,flux\n");
    for (i, j, flux) in lat.flux_map()? {
        csv.push_str(&format!("{i},{j},{flux:.16e}\n"));
    }
    write_text(&cfg.flux_csv, &csv)?;
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MeraExpectConfig {
    observables: Vec<PlaquetteObservable>,
    #[serde(default = "default_lambda")]
    lambda: f64,
    /// Any of "closed_form", "quadrature", "monte_carlo".
    methods: Vec<String>,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_samples")]
    samples: u64,
    output: String,
}

fn default_lambda() -> f64 {
    1.0
}

fn default_samples() -> u64 {
    100_000
}

fn cmd_mera_expect(cfg: MeraExpectConfig, log: &mut Logger) -> Result<(), LgtError> {
    let mut records = Vec::new();
    for obs in &cfg.observables {
        for method in &cfg.methods {
            let (est, label) = match method.as_str() {
                "closed_form" => (
                    OracleEstimate {
                        value: expect_in_ansatz(obs, cfg.lambda)?,
                        stderr: 0.0,
                        samples: 0,
                        seed: 0,
                    },
                    "closed_form",
                ),
                "quadrature" => (
                    pushforward_oracle(obs, Sampler::Quadrature, cfg.lambda)?,
                    "quadrature",
                ),
                "monte_carlo" => (
                    pushforward_oracle(
                        obs,
                        Sampler::MonteCarlo {
                            seed: cfg.seed,
                            samples: cfg.samples,
                        },
                        cfg.lambda,
                    )?,
                    "monte_carlo",
                ),
                other => {
                    return Err(LgtError::InvalidArgument(format!(
                        "unknown method {other:?}"
                    )))
                }
            };
            let rec = MeraRecord::new(obs, label, &est);
            log.emit(serde_json::json!({
                "event": "mera_record",
                "observable": rec.observable,
                "method": rec.method,
                "value": rec.value,
            }));
            records.push(rec);
        }
    }
    write_json(&cfg.output, &records)?;
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReduceGraphConfig {
    /// Path to a JSON-serialized gauge graph {vertices, edges}.
    input: String,
    /// Gate-sequence (reduction plan) JSON output.
    output: String,
}

fn cmd_reduce_graph(cfg: ReduceGraphConfig, log: &mut Logger) -> Result<(), LgtError> {
    let raw = fs::read_to_string(&cfg.input)?;
    let graph: GaugeGraph = serde_json::from_str(&raw)?;
    let plan = reduce_to_petal(&graph)?;
    log.emit(serde_json::json!({
        "event": "reduced",
        "tree_edges": plan.tree_edges.len(),
        "loop_edges": plan.loop_edges.len(),
        "steps": plan.steps.len(),
    }));
    write_json(&cfg.output, &plan)?;
    Ok(())
}

fn exit_code_for(err: &LgtError) -> ExitCode {
    match err {
        LgtError::Convergence(_) => ExitCode::from(3),
        _ => ExitCode::from(2),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut log = match Logger::open(&cli.log) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match &cli.cmd {
        Cmd::GsSolve { config } => {
            load_config(config, &cli.set).and_then(|c| cmd_gs_solve(c, &mut log))
        }
        Cmd::FidelitySweep { config } => {
            load_config(config, &cli.set).and_then(|c| cmd_fidelity_sweep(c, &mut log))
        }
        Cmd::Interp { config } => load_config(config, &cli.set).and_then(|c| cmd_interp(c, &mut log)),
        Cmd::MeraExpect { config } => {
            load_config(config, &cli.set).and_then(|c| cmd_mera_expect(c, &mut log))
        }
        Cmd::ReduceGraph { config } => {
            load_config(config, &cli.set).and_then(|c| cmd_reduce_graph(c, &mut log))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}
