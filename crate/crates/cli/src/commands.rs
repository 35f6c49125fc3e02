use std::fs;
use std::path::{Path, PathBuf};

use cvmfe_core::blanket::{run_pipeline_full, PipelineConfig, PipelineReport};
use cvmfe_core::exact::{enumerate_min_free_energy, EnumerationResult};
use cvmfe_core::minimize::{anneal_profile_with_stall, default_max_trials, MinimizeTrace, TraceSummary};
use cvmfe_core::thermo::{eps_from_h, estimate_h, free_energy_cvm, HEstimate, ThermoReport};
use cvmfe_core::varbayes::{
    conditional_from_joint, decompose, jensen_chain_check, DiscreteJoint, Distribution,
    FreeEnergyDecomposition, JensenCheck,
};
use cvmfe_core::{count_config, ConfigCounts, ConfigVars, GridState};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::output::{csv_bytes, manifest_beside, read_text, to_json, CliError, CliResult, Outputs};
use crate::{AnalyzeArgs, GenerateArgs, Interaction, MinimizeArgs, OracleArgs, PipelineArgs, VarbayesArgs};

fn eps1_of(i: &Interaction) -> CliResult<Option<f64>> {
    match (i.eps1, i.h) {
        (Some(e), _) if !e.is_finite() => Err(CliError::Invalid(format!("--eps1 must be finite, got {e}"))),
        (Some(e), _) => Ok(Some(e)),
        (None, Some(h)) => Ok(Some(eps_from_h(h)?)),
        (None, None) => Ok(None),
    }
}

fn required_eps1(i: &Interaction) -> CliResult<f64> {
    eps1_of(i)?.ok_or_else(|| CliError::Invalid("one of --eps1 or --h is required".into()))
}

fn read_grid(path: &Path) -> CliResult<GridState> {
    GridState::from_text(&read_text(path)?)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    serde_json::from_str(&read_text(path)?)
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn first_path(paths: &[&Option<PathBuf>]) -> Option<PathBuf> {
    paths.iter().find_map(|p| p.as_ref()).map(|p| manifest_beside(p))
}

pub fn generate(args: &GenerateArgs) -> CliResult {
    let grid = GridState::new_random(args.rows, args.cols, args.seed)?;
    let mut out = Outputs::new();
    out.emit(args.out.as_deref(), &grid.to_text())?;
    out.finish("generate", args, first_path(&[&args.out]))
}

#[derive(Serialize)]
struct AnalyzeReport {
    rows: usize,
    cols: usize,
    counts: ConfigCounts,
    config_vars: ConfigVars<f64>,
    estimate: Option<HEstimate<f64>>,
    /// Why estimation failed, when it did.
    estimate_error: Option<String>,
    thermo: ThermoReport<f64>,
}

pub fn analyze(args: &AnalyzeArgs) -> CliResult {
    let grid = read_grid(&args.grid)?;
    let counts = count_config(&grid);
    let cv = counts.fractions::<f64>();
    let estimated = estimate_h(&cv);
    let eps1 = match (eps1_of(&args.interaction)?, &estimated) {
        (Some(eps1), _) => eps1,
        (None, Ok(est)) => eps_from_h(est.h_mean)?,
        (None, Err(err)) => return Err(err.clone().into()),
    };
    let (estimate, estimate_error) = match estimated {
        Ok(e) => (Some(e), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let report = AnalyzeReport {
        rows: grid.rows(),
        cols: grid.cols(),
        counts,
        config_vars: cv,
        estimate,
        estimate_error,
        thermo: free_energy_cvm(&cv, eps1)?,
    };
    let mut out = Outputs::new();
    out.emit(args.json_out.as_deref(), &to_json(&report))?;
    out.finish("analyze", args, first_path(&[&args.json_out]))
}

#[derive(Serialize)]
struct MinimizeReport {
    eps1: f64,
    h: f64,
    trials_per_restart: usize,
    input: ThermoReport<f64>,
    result: ThermoReport<f64>,
    best_restart: usize,
    restart_free_energies: Vec<f64>,
    trace: TraceSummary<f64>,
}

fn trace_csv(trace: &MinimizeTrace<f64>) -> CliResult<Vec<u8>> {
    csv_bytes(trace.rows())
}

pub fn minimize(args: &MinimizeArgs) -> CliResult {
    let grid = read_grid(&args.grid)?;
    let eps1 = required_eps1(&args.interaction)?;
    let trials = args.trials.unwrap_or_else(|| default_max_trials(grid.len()));
    let input = free_energy_cvm(&count_config(&grid).fractions(), eps1)?;
    let res = anneal_profile_with_stall(&grid, eps1, args.restarts, trials, args.stall_window, args.seed)?;

    let mut out = Outputs::new();
    out.emit(args.out.as_deref(), &res.grid.to_text())?;
    if let Some(path) = &args.trace_csv {
        out.write(path, &trace_csv(&res.trace)?)?;
    }
    if let Some(path) = &args.json_out {
        let report = MinimizeReport {
            eps1,
            h: res.report.h,
            trials_per_restart: trials,
            input,
            result: res.report,
            best_restart: res.best_restart,
            restart_free_energies: res.restart_free_energies.clone(),
            trace: res.trace.summary(),
        };
        out.write(path, to_json(&report).as_bytes())?;
    }
    out.finish(
        "minimize",
        args,
        first_path(&[&args.out, &args.json_out, &args.trace_csv]),
    )
}

fn parse_config(path: &Path) -> CliResult<PipelineConfig> {
    let text = read_text(path)?;
    let invalid = |msg: String| CliError::Invalid(format!("{}: {msg}", path.display()));
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let cfg: PipelineConfig = if is_toml {
        toml::from_str(&text).map_err(|e| invalid(e.to_string()))?
    } else {
        serde_json::from_str(&text).map_err(|e| invalid(e.to_string()))?
    };
    cfg.validate().map_err(|e| invalid(e.to_string()))?;
    Ok(cfg)
}

#[derive(Serialize)]
struct PipelineEcho<'a> {
    config_path: &'a Path,
    pipeline: &'a PipelineConfig,
}

pub fn pipeline(args: &PipelineArgs) -> CliResult {
    let cfg = parse_config(&args.config)?;
    let run = run_pipeline_full::<f64>(&cfg)?;
    fs::create_dir_all(&args.out_dir).map_err(|e| CliError::io(&args.out_dir, e))?;
    let dir = &args.out_dir;

    let mut out = Outputs::new();
    out.write(&dir.join("external.txt"), run.external.to_text().as_bytes())?;
    out.write(&dir.join("repr.txt"), run.repr.to_text().as_bytes())?;
    out.write(&dir.join("model.txt"), run.model.to_text().as_bytes())?;
    if let Some(trace) = &run.world_trace {
        out.write(&dir.join("world_trace.csv"), &trace_csv(trace)?)?;
    }
    out.write(&dir.join("fit_trace.csv"), &trace_csv(&run.fit_trace)?)?;
    let report: &PipelineReport<f64> = &run.report;
    out.write(&dir.join("report.json"), to_json(report).as_bytes())?;
    let echo = PipelineEcho {
        config_path: &args.config,
        pipeline: &cfg,
    };
    out.finish("pipeline", &echo, Some(dir.join("manifest.json")))
}

#[derive(Serialize)]
struct OracleReport {
    rows: usize,
    cols: usize,
    argmin_count: usize,
    #[serde(flatten)]
    result: EnumerationResult<f64>,
}

pub fn oracle(args: &OracleArgs) -> CliResult {
    let eps1 = required_eps1(&args.interaction)?;
    let result = enumerate_min_free_energy(args.rows, args.cols, eps1)?;
    let report = OracleReport {
        rows: args.rows,
        cols: args.cols,
        argmin_count: result.argmin_grids.len(),
        result,
    };
    let mut out = Outputs::new();
    out.emit(args.json_out.as_deref(), &to_json(&report))?;
    out.finish("oracle", args, first_path(&[&args.json_out]))
}

#[derive(Serialize)]
struct VarbayesReport {
    blanket_state: usize,
    q: Distribution<f64>,
    posterior: Distribution<f64>,
    #[serde(flatten)]
    decomposition: FreeEnergyDecomposition<f64>,
    jensen: JensenCheck<f64>,
    bound_holds: bool,
}

pub fn varbayes(args: &VarbayesArgs) -> CliResult {
    let joint: DiscreteJoint<f64> = read_json(&args.joint_json)?;
    let j = args.blanket_state;
    let posterior = conditional_from_joint(&joint, j)?;
    let q = match &args.q_json {
        Some(path) => read_json(path)?,
        None => posterior.clone(),
    };
    let decomposition = decompose(&q, &joint, j)?;
    let jensen = jensen_chain_check(&joint, j, &q)?;
    let report = VarbayesReport {
        blanket_state: j,
        q,
        posterior,
        decomposition,
        bound_holds: jensen.holds(),
        jensen,
    };
    let mut out = Outputs::new();
    out.emit(args.json_out.as_deref(), &to_json(&report))?;
    out.finish("varbayes", args, first_path(&[&args.json_out]))
}
