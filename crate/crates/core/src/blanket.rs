//! External world -> sensing -> representational grid -> fitted model.
//!
//! The sensory layer is a one-way map: [`sense`] borrows the external grid
//! immutably and produces a new representational grid. [`fit_model`] only
//! ever sees that representational grid. The report is the only thing the
//! pipeline emits; nothing is written back to the external grid.

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{count_config_vars, ConfigVars, GridState, Unit};
use crate::minimize::{
    anneal_profile_with_stall, default_max_trials, minimize_grid, MinimizeTrace, TraceSummary,
    DEFAULT_STALL_WINDOW,
};
use crate::scalar::Real;
use crate::thermo::{eps_from_h, estimate_h, free_energy_cvm, HEstimate, ThermoReport};
use crate::varbayes::{kl_divergence, Distribution};

fn default_stall_window() -> usize {
    DEFAULT_STALL_WINDOW
}

/// Pipeline parameters. Dimensions are `[rows, cols]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub external_dims: [usize; 2],
    pub repr_dims: [usize; 2],
    pub sense_block: [usize; 2],
    /// Interaction energy of the external world. When absent the world stays
    /// a random grid.
    #[serde(default)]
    pub eps1_true: Option<f64>,
    pub fit_restarts: usize,
    pub fit_trials: usize,
    pub seed: u64,
    /// Trial budget for equilibrating the world; defaults to `10 N^2`.
    #[serde(default)]
    pub world_trials: Option<usize>,
    /// Consecutive rejections that end any descent run.
    #[serde(default = "default_stall_window")]
    pub stall_window: usize,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        for (name, dims) in [
            ("external_dims", self.external_dims),
            ("repr_dims", self.repr_dims),
            ("sense_block", self.sense_block),
        ] {
            if dims.contains(&0) {
                return bad(format!("{name} must be positive, got {dims:?}"));
            }
        }
        for axis in 0..2 {
            if self.repr_dims[axis] * self.sense_block[axis] != self.external_dims[axis] {
                return bad(format!(
                    "external_dims {:?} is not repr_dims {:?} tiled by sense_block {:?}",
                    self.external_dims, self.repr_dims, self.sense_block
                ));
            }
        }
        for (name, dims) in [("external_dims", self.external_dims), ("repr_dims", self.repr_dims)] {
            if dims[0] % 2 != 0 || dims[0] < 4 || dims[1] < 4 {
                return bad(format!("{name} must have an even row count and be at least 4x4, got {dims:?}"));
            }
        }
        if self.fit_restarts == 0 || self.fit_trials == 0 || self.stall_window == 0 {
            return bad("fit_restarts, fit_trials and stall_window must be positive".into());
        }
        if self.world_trials == Some(0) {
            return bad("world_trials must be positive".into());
        }
        if let Some(e) = self.eps1_true {
            if !e.is_finite() {
                return bad(format!("eps1_true must be finite, got {e}"));
            }
        }
        Ok(())
    }
}

/// Block-majority downsampling. Tied blocks take a fair seeded coin, drawn
/// in row-major block order.
pub fn sense(external: &GridState, block: [usize; 2], seed: u64) -> Result<GridState> {
    let [br, bc] = block;
    if br == 0 || bc == 0 || external.rows() % br != 0 || external.cols() % bc != 0 {
        return Err(Error::InvalidConfig(format!(
            "block {br}x{bc} does not tile a {}x{} grid",
            external.rows(),
            external.cols()
        )));
    }
    let (rows, cols) = (external.rows() / br, external.cols() / bc);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = br * bc;
    let ext = external.cells();
    let mut cells = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let a = (0..br)
                .flat_map(|dr| (0..bc).map(move |dc| (r * br + dr) * external.cols() + c * bc + dc))
                .filter(|&i| ext[i] == Unit::A)
                .count();
            let unit = match (2 * a).cmp(&size) {
                std::cmp::Ordering::Greater => Unit::A,
                std::cmp::Ordering::Less => Unit::B,
                std::cmp::Ordering::Equal if rng.gen_bool(0.5) => Unit::A,
                std::cmp::Ordering::Equal => Unit::B,
            };
            cells.push(unit);
        }
    }
    GridState::from_cells(rows, cols, cells).map_err(|e| Error::InvalidConfig(e.to_string()))
}

/// Flips the fewest cells needed to reach exactly half A, choosing them
/// uniformly among the majority state. Returns the number flipped.
pub fn rebalance(grid: &mut GridState, seed: u64) -> Result<usize> {
    if grid.len() % 2 != 0 {
        return Err(Error::Precondition(format!(
            "a grid of {} cells cannot be balanced",
            grid.len()
        )));
    }
    let half = grid.len() / 2;
    let a = grid.count_a();
    let (majority, excess) = if a > half { (Unit::A, a - half) } else { (Unit::B, half - a) };
    if excess == 0 {
        return Ok(0);
    }
    let pool: Vec<usize> = (0..grid.len())
        .filter(|&i| grid.cells()[i] == majority)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in index::sample(&mut rng, pool.len(), excess) {
        grid.set_index(pool[k], majority.flipped());
    }
    Ok(excess)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult<T> {
    pub model: GridState,
    /// Interaction ratio used for the minimization.
    pub h: T,
    /// `None` when inversion failed and `h = 1` was used instead.
    pub estimate: Option<HEstimate<T>>,
    pub thermo: ThermoReport<T>,
    /// The (rebalanced) representational grid evaluated at the same `h`.
    pub repr_thermo: ThermoReport<T>,
    pub rebalanced_cells: usize,
    pub trace: MinimizeTrace<T>,
}

pub fn fit_model<T: Real>(
    repr: &GridState,
    restarts: usize,
    trials: usize,
    seed: u64,
) -> Result<FitResult<T>> {
    fit_model_with_stall(repr, restarts, trials, DEFAULT_STALL_WINDOW, seed)
}

/// Estimates `h` from the representational grid, then minimizes a balanced
/// copy of it at `eps1 = ln(h) / 2`.
pub fn fit_model_with_stall<T: Real>(
    repr: &GridState,
    restarts: usize,
    trials: usize,
    stall_window: usize,
    seed: u64,
) -> Result<FitResult<T>> {
    if repr.is_uniform() {
        return Err(Error::CannotFit);
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut balanced = repr.clone();
    let rebalanced_cells = rebalance(&mut balanced, master.next_u64())?;

    // h comes from the grid as sensed; the balanced copy only seeds descent
    let estimate = estimate_h(&count_config_vars::<T>(repr)).ok();
    let h = estimate.as_ref().map_or(T::one(), |e| e.h_mean);
    let eps1 = eps_from_h(h)?;
    let repr_thermo = free_energy_cvm(&count_config_vars::<T>(&balanced), eps1)?;
    let anneal = anneal_profile_with_stall(
        &balanced,
        eps1,
        restarts,
        trials,
        stall_window,
        master.next_u64(),
    )?;
    Ok(FitResult {
        model: anneal.grid,
        h,
        estimate,
        thermo: anneal.report,
        repr_thermo,
        rebalanced_cells,
        trace: anneal.trace,
    })
}

/// `KL(model || external)` between the γ-weighted triplet profiles.
pub fn profile_divergence<T: Real>(external: &ConfigVars<T>, model: &ConfigVars<T>) -> Result<T> {
    let p = Distribution::from_weights(external.gamma_weighted_z().to_vec())?;
    let q = Distribution::from_weights(model.gamma_weighted_z().to_vec())?;
    kl_divergence(&q, &p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineTraces<T> {
    /// Equilibration of the external world, when `eps1_true` was given.
    pub world: Option<TraceSummary<T>>,
    pub fit: TraceSummary<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport<T> {
    pub external_cv: ConfigVars<T>,
    pub repr_cv: ConfigVars<T>,
    pub model_cv: ConfigVars<T>,
    pub h_estimated: T,
    /// True when estimation failed and the fit used `h = 1`.
    pub h_fallback: bool,
    pub estimate: Option<HEstimate<T>>,
    pub rebalanced_cells: usize,
    pub model_thermo: ThermoReport<T>,
    pub divergence: T,
    pub traces: PipelineTraces<T>,
}

/// Everything a pipeline run produced: the report plus the grids and full
/// traces behind it.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineRun<T> {
    pub report: PipelineReport<T>,
    pub external: GridState,
    pub repr: GridState,
    pub model: GridState,
    pub world_trace: Option<MinimizeTrace<T>>,
    pub fit_trace: MinimizeTrace<T>,
}

pub fn run_pipeline<T: Real>(cfg: &PipelineConfig) -> Result<PipelineReport<T>> {
    run_pipeline_full(cfg).map(|run| run.report)
}

pub fn run_pipeline_full<T: Real>(cfg: &PipelineConfig) -> Result<PipelineRun<T>> {
    cfg.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let world_seed = master.next_u64();
    let world_run_seed = master.next_u64();
    let sense_seed = master.next_u64();
    let fit_seed = master.next_u64();

    let [er, ec] = cfg.external_dims;
    let mut external = GridState::new_random(er, ec, world_seed)?;
    let mut world_trace = None;
    if let Some(eps1) = cfg.eps1_true {
        let trials = cfg.world_trials.unwrap_or_else(|| default_max_trials(external.len()));
        let (grid, trace) = minimize_grid(&external, T::lit(eps1), trials, cfg.stall_window, world_run_seed)?;
        external = grid;
        world_trace = Some(trace);
    }

    let repr = sense(&external, cfg.sense_block, sense_seed)?;
    let fit = fit_model_with_stall::<T>(&repr, cfg.fit_restarts, cfg.fit_trials, cfg.stall_window, fit_seed)?;

    let external_cv = count_config_vars::<T>(&external);
    let model_cv = count_config_vars::<T>(&fit.model);
    let divergence = profile_divergence(&external_cv, &model_cv)?;
    let report = PipelineReport {
        external_cv,
        repr_cv: count_config_vars(&repr),
        model_cv,
        h_estimated: fit.h,
        h_fallback: fit.estimate.is_none(),
        estimate: fit.estimate.clone(),
        rebalanced_cells: fit.rebalanced_cells,
        model_thermo: fit.thermo,
        divergence,
        traces: PipelineTraces {
            world: world_trace.as_ref().map(MinimizeTrace::summary),
            fit: fit.trace.summary(),
        },
    };
    Ok(PipelineRun {
        report,
        external,
        repr,
        model: fit.model,
        world_trace,
        fit_trace: fit.trace,
    })
}
