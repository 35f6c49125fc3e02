//! Brute-force oracles: exhaustive free-energy minimization over every
//! balanced configuration of a small grid, and Boltzmann statistics of a
//! finite energy spectrum (`k = 1`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{GridState, Topology, Unit};
use crate::scalar::Real;
use crate::thermo::{free_energy_cvm, ThermoReport};

/// Largest grid accepted by [`enumerate_min_free_energy`].
pub const MAX_ENUMERATION_CELLS: usize = 24;

/// Default central-difference step for the `d ln Q / d beta` route.
pub const DEFAULT_DELTA: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnumerationResult<T> {
    pub min_free_energy: T,
    pub min_report: ThermoReport<T>,
    /// Every configuration whose free energy ties the minimum.
    pub argmin_grids: Vec<GridState>,
    pub states_enumerated: usize,
}

/// Iterator over all configurations of a grid with exactly half the cells
/// in state A, in increasing bitmask order (bit `i` set means cell `i` is A).
pub struct BalancedConfigs {
    sites: usize,
    next: Option<u32>,
    last: u32,
}

impl BalancedConfigs {
    pub fn new(sites: usize) -> Result<Self> {
        if sites == 0 || sites % 2 != 0 || sites > 31 {
            return Err(Error::InvalidDimension(format!(
                "balanced enumeration needs an even cell count below 32, got {sites}"
            )));
        }
        let half = sites / 2;
        let first = (1u32 << half) - 1;
        Ok(BalancedConfigs {
            sites,
            next: Some(first),
            last: first << half,
        })
    }

    pub fn fill(&self, mask: u32, cells: &mut [Unit]) {
        for (i, cell) in cells.iter_mut().enumerate().take(self.sites) {
            *cell = if mask >> i & 1 == 1 { Unit::A } else { Unit::B };
        }
    }
}

impl Iterator for BalancedConfigs {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        let cur = self.next?;
        self.next = if cur == self.last {
            None
        } else {
            // next integer with the same popcount
            let low = cur & cur.wrapping_neg();
            let ripple = cur + low;
            Some((((ripple ^ cur) >> 2) / low) | ripple)
        };
        Some(cur)
    }
}

/// Exhaustive minimum of the CVM free energy over balanced configurations.
pub fn enumerate_min_free_energy<T: Real>(
    rows: usize,
    cols: usize,
    eps1: T,
) -> Result<EnumerationResult<T>> {
    let cells_n = rows * cols;
    if cells_n > MAX_ENUMERATION_CELLS {
        return Err(Error::TooLarge {
            cells: cells_n,
            limit: MAX_ENUMERATION_CELLS,
        });
    }
    let topo = Topology::new(rows, cols)?;
    let configs = BalancedConfigs::new(cells_n)?;
    let mut cells = vec![Unit::B; cells_n];

    let mut best: Option<(T, ThermoReport<T>)> = None;
    let mut argmin: Vec<u32> = Vec::new();
    let mut states = 0usize;
    let tol = T::identity_tol();

    for mask in BalancedConfigs::new(cells_n)? {
        states += 1;
        configs.fill(mask, &mut cells);
        let report = free_energy_cvm(&topo.count(&cells).fractions::<T>(), eps1)?;
        let f = report.free_energy;
        match &best {
            Some((min, _)) if f > *min + tol * (T::one() + min.abs()) => {}
            Some((min, _)) if f >= *min - tol * (T::one() + min.abs()) => {
                argmin.push(mask);
                if f < *min {
                    best = Some((f, report));
                }
            }
            _ => {
                best = Some((f, report));
                argmin.clear();
                argmin.push(mask);
            }
        }
    }

    let (min_free_energy, min_report) = best.expect("at least one configuration");
    let argmin_grids = argmin
        .into_iter()
        .map(|mask| {
            configs.fill(mask, &mut cells);
            GridState::from_cells(rows, cols, cells.clone()).expect("validated shape")
        })
        .collect();
    Ok(EnumerationResult {
        min_free_energy,
        min_report,
        argmin_grids,
        states_enumerated: states,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoltzmannReport<T> {
    pub partition_function: T,
    pub ln_partition_function: T,
    pub probs: Vec<T>,
    pub enthalpy: T,
    pub entropy: T,
    pub free_energy: T,
    pub beta: T,
}

fn check_spectrum<T: Real>(energies: &[T], beta: T) -> Result<()> {
    if energies.is_empty() {
        return Err(Error::Domain("energy list is empty".into()));
    }
    if let Some(e) = energies.iter().find(|e| !e.is_finite()) {
        return Err(Error::Domain(format!("energy {e} is not finite")));
    }
    if !(beta > T::zero()) || !beta.is_finite() {
        return Err(Error::Domain(format!("beta must be positive, got {beta}")));
    }
    Ok(())
}

/// `ln sum exp(-beta E)`, shifted by the ground state for stability.
fn ln_q<T: Real>(energies: &[T], beta: T) -> T {
    let shift = energies
        .iter()
        .map(|&e| -beta * e)
        .fold(T::neg_infinity(), T::max);
    let sum: T = energies.iter().map(|&e| (-beta * e - shift).exp()).sum();
    shift + sum.ln()
}

pub fn partition_function<T: Real>(energies: &[T], beta: T) -> Result<BoltzmannReport<T>> {
    check_spectrum(energies, beta)?;
    let lnq = ln_q(energies, beta);
    let probs: Vec<T> = energies.iter().map(|&e| (-beta * e - lnq).exp()).collect();
    let enthalpy = energies.iter().zip(&probs).map(|(&e, &p)| e * p).sum();
    let entropy = -probs
        .iter()
        .map(|&p| if p > T::zero() { p * p.ln() } else { T::zero() })
        .sum::<T>();
    Ok(BoltzmannReport {
        partition_function: lnq.exp(),
        ln_partition_function: lnq,
        probs,
        enthalpy,
        entropy,
        free_energy: -lnq / beta,
        beta,
    })
}

/// Enthalpy as `-d ln Q / d beta`, by central difference.
pub fn enthalpy_via_logq_derivative<T: Real>(energies: &[T], beta: T, delta: T) -> Result<T> {
    check_spectrum(energies, beta)?;
    if !(delta > T::zero()) {
        return Err(Error::Domain(format!("difference step must be positive, got {delta}")));
    }
    let up = ln_q(energies, beta + delta);
    let down = ln_q(energies, beta - delta);
    Ok(-(up - down) / (T::lit(2.0) * delta))
}
