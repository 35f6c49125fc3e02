//! Conserved-composition swap descent on the CVM free energy.
//!
//! Each trial draws sites uniformly until it has one A and one B, swaps
//! them, and keeps the swap only if the free energy strictly drops.
//! Counts are updated locally from the instances touching the two sites and
//! audited against a full recount every [`AUDIT_INTERVAL`] trials.

use rand::{Rng, RngCore, SeedableRng};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ConfigCounts, GridState, Site, SignedCounts, Topology, Unit};
use crate::scalar::Real;
use crate::thermo::{free_energy_cvm, ThermoReport};

pub const DEFAULT_STALL_WINDOW: usize = 1000;
pub const AUDIT_INTERVAL: usize = 1000;

/// Default trial budget, `10 N^2`.
pub fn default_max_trials(sites: usize) -> usize {
    10 * sites * sites
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxTrials,
    StallWindow,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord<T> {
    pub trial: usize,
    pub site_a: Site,
    pub site_b: Site,
    pub delta_f: T,
    pub accepted: bool,
    pub free_energy_after: T,
}

/// One CSV row of a trace: `trial, delta_f, accepted, free_energy_after`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceRow<T> {
    pub trial: usize,
    pub delta_f: T,
    pub accepted: bool,
    pub free_energy_after: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeTrace<T> {
    pub records: Vec<TrialRecord<T>>,
    pub initial_report: ThermoReport<T>,
    pub final_report: ThermoReport<T>,
    pub trials_run: usize,
    pub stop_reason: StopReason,
}

impl<T: Real> MinimizeTrace<T> {
    pub fn accepted(&self) -> impl Iterator<Item = &TrialRecord<T>> {
        self.records.iter().filter(|r| r.accepted)
    }

    pub fn accepted_count(&self) -> usize {
        self.accepted().count()
    }

    pub fn rows(&self) -> impl Iterator<Item = TraceRow<T>> + '_ {
        self.records.iter().map(|r| TraceRow {
            trial: r.trial,
            delta_f: r.delta_f,
            accepted: r.accepted,
            free_energy_after: r.free_energy_after,
        })
    }

    /// Compact description without the per-trial records.
    pub fn summary(&self) -> TraceSummary<T> {
        TraceSummary {
            trials_run: self.trials_run,
            accepted: self.accepted_count(),
            stop_reason: self.stop_reason,
            initial_free_energy: self.initial_report.free_energy,
            final_free_energy: self.final_report.free_energy,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary<T> {
    pub trials_run: usize,
    pub accepted: usize,
    pub stop_reason: StopReason,
    pub initial_free_energy: T,
    pub final_free_energy: T,
}

fn report_for<T: Real>(counts: &ConfigCounts, eps1: T) -> Result<ThermoReport<T>> {
    free_energy_cvm(&counts.fractions::<T>(), eps1)
}

/// Strict-descent swap search over a single grid.
pub fn minimize_grid<T: Real>(
    grid: &GridState,
    eps1: T,
    max_trials: usize,
    stall_window: usize,
    seed: u64,
) -> Result<(GridState, MinimizeTrace<T>)> {
    if max_trials == 0 {
        return Err(Error::Precondition("max_trials must be at least 1".into()));
    }
    if stall_window == 0 {
        return Err(Error::Precondition("stall_window must be at least 1".into()));
    }
    if grid.is_uniform() {
        return Err(Error::NoSwapPossible);
    }

    let topo = Topology::for_grid(grid);
    let mut state = grid.clone();
    let mut counts = topo.count(state.cells());
    let initial_report = report_for(&counts, eps1)?;
    let mut current = initial_report.free_energy;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = state.len();

    let mut records = Vec::new();
    let mut rejected_run = 0;
    let mut stop_reason = StopReason::MaxTrials;
    let mut trials_run = 0;

    for trial in 1..=max_trials {
        let i = draw_site(&mut rng, state.cells(), n, Unit::A);
        let j = draw_site(&mut rng, state.cells(), n, Unit::B);

        let local = topo.local_instances(i, j);
        let mut delta = SignedCounts::default();
        topo.tally_local(state.cells(), &local, &mut delta, -1);
        state.swap_indices(i, j);
        topo.tally_local(state.cells(), &local, &mut delta, 1);
        let mut proposed = counts;
        proposed.apply(&delta);

        let candidate = report_for(&proposed, eps1)?.free_energy;
        let delta_f = candidate - current;
        let accepted = delta_f < T::zero();
        if accepted {
            counts = proposed;
            current = candidate;
            rejected_run = 0;
        } else {
            state.swap_indices(i, j);
            rejected_run += 1;
        }
        records.push(TrialRecord {
            trial,
            site_a: state.site(i),
            site_b: state.site(j),
            delta_f,
            accepted,
            free_energy_after: current,
        });
        trials_run = trial;

        if trial % AUDIT_INTERVAL == 0 {
            audit(&topo, &state, &counts, current, eps1)?;
        }
        if rejected_run >= stall_window {
            stop_reason = StopReason::StallWindow;
            break;
        }
    }

    audit(&topo, &state, &counts, current, eps1)?;
    let final_report = report_for(&counts, eps1)?;
    let trace = MinimizeTrace {
        records,
        initial_report,
        final_report,
        trials_run,
        stop_reason,
    };
    Ok((state.with_seed(grid.seed()), trace))
}

fn draw_site(rng: &mut ChaCha8Rng, cells: &[Unit], n: usize, want: Unit) -> usize {
    loop {
        let i = rng.gen_range(0..n);
        if cells[i] == want {
            return i;
        }
    }
}

fn audit<T: Real>(
    topo: &Topology,
    state: &GridState,
    counts: &ConfigCounts,
    current: T,
    eps1: T,
) -> Result<()> {
    let full = topo.count(state.cells());
    if &full != counts {
        return Err(Error::Numerical(format!(
            "incremental counts drifted from full recount: {counts:?} vs {full:?}"
        )));
    }
    let recomputed = report_for(&full, eps1)?.free_energy;
    if (recomputed - current).abs() > T::lit(1e-9) {
        return Err(Error::Numerical(format!(
            "incremental free energy {current} differs from recount {recomputed}"
        )));
    }
    Ok(())
}

/// Seeds used by restart `k` of [`anneal_profile`]: `(shuffle_seed, run_seed)`.
pub fn restart_seeds(seed: u64, restarts: usize) -> Vec<(u64, u64)> {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    (0..restarts)
        .map(|_| (master.next_u64(), master.next_u64()))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealResult<T> {
    pub grid: GridState,
    pub report: ThermoReport<T>,
    /// Trace of the winning restart.
    pub trace: MinimizeTrace<T>,
    pub best_restart: usize,
    pub restart_free_energies: Vec<T>,
}

/// Multi-restart wrapper. Restart 0 descends from `grid` itself; restart
/// `k > 0` descends from an independent shuffle of its cells. The lowest
/// final free energy wins, ties going to the lower restart index.
pub fn anneal_profile<T: Real>(
    grid: &GridState,
    eps1: T,
    restarts: usize,
    per_restart_trials: usize,
    seed: u64,
) -> Result<AnnealResult<T>> {
    anneal_profile_with_stall(
        grid,
        eps1,
        restarts,
        per_restart_trials,
        DEFAULT_STALL_WINDOW,
        seed,
    )
}

pub fn anneal_profile_with_stall<T: Real>(
    grid: &GridState,
    eps1: T,
    restarts: usize,
    per_restart_trials: usize,
    stall_window: usize,
    seed: u64,
) -> Result<AnnealResult<T>> {
    if restarts == 0 {
        return Err(Error::Precondition("restarts must be at least 1".into()));
    }
    let seeds = restart_seeds(seed, restarts);
    let runs: Vec<(GridState, MinimizeTrace<T>)> = seeds
        .par_iter()
        .enumerate()
        .map(|(k, &(shuffle_seed, run_seed))| {
            let start = if k == 0 {
                grid.clone()
            } else {
                shuffled(grid, shuffle_seed)
            };
            minimize_grid(&start, eps1, per_restart_trials, stall_window, run_seed)
        })
        .collect::<Result<_>>()?;

    let restart_free_energies: Vec<T> =
        runs.iter().map(|(_, t)| t.final_report.free_energy).collect();
    let best_restart = restart_free_energies
        .iter()
        .enumerate()
        .fold(0, |best, (k, &f)| if f < restart_free_energies[best] { k } else { best });
    let (best_grid, trace) = runs.into_iter().nth(best_restart).expect("non-empty");
    Ok(AnnealResult {
        grid: best_grid,
        report: trace.final_report,
        trace,
        best_restart,
        restart_free_energies,
    })
}

fn shuffled(grid: &GridState, seed: u64) -> GridState {
    let mut cells = grid.cells().to_vec();
    cells.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    GridState::from_cells(grid.rows(), grid.cols(), cells)
        .expect("same shape")
        .with_seed(grid.seed())
}
