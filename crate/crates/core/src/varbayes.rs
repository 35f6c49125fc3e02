//! Finite discrete distributions and the static variational free-energy
//! identities.
//!
//! A [`DiscreteJoint`] tabulates `p(psi_i, b_j)` where `i` indexes external
//! states and `j` indexes the flattened (sensory, active, internal) blanket
//! state. For a candidate `q(psi)` and an observed `j`:
//!
//! ```text
//! F = sum_i q_i ln(q_i / p(i, j))
//!   = E_q[-ln p(i, j)] - H[q]
//!   = -ln p(j) + KL(q || p(. | j))
//! ```
//!
//! Errors are raised where an infinity would otherwise appear.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>")]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct Distribution<T> {
    probs: Vec<T>,
    labels: Option<Vec<String>>,
}

impl<T: Real> Distribution<T> {
    pub fn new(probs: Vec<T>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Domain("distribution has no outcomes".into()));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(**p >= T::zero()) || !p.is_finite())
        {
            return Err(Error::Domain(format!("probability #{i} = {p} is not a non-negative number")));
        }
        let total: T = probs.iter().copied().sum();
        if (total - T::one()).abs() > T::identity_tol() {
            return Err(Error::Domain(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Distribution { probs, labels: None })
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(weights: Vec<T>) -> Result<Self> {
        let total: T = weights.iter().copied().sum();
        if !(total > T::zero()) || !total.is_finite() {
            return Err(Error::Domain(format!("weights sum to {total}")));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::from_weights(vec![T::one(); n])
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.probs.len() {
            return Err(Error::Precondition(format!(
                "{} labels for {} outcomes",
                labels.len(),
                self.probs.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// `(1 - weight) * self + weight * other`.
    pub fn mix(&self, other: &Self, weight: T) -> Result<Self> {
        same_support(self, other)?;
        Self::from_weights(
            self.probs
                .iter()
                .zip(&other.probs)
                .map(|(&a, &b)| (T::one() - weight) * a + weight * b)
                .collect(),
        )
    }
}

impl<T: Real> TryFrom<Vec<T>> for Distribution<T> {
    type Error = Error;

    fn try_from(probs: Vec<T>) -> Result<Self> {
        Distribution::new(probs)
    }
}

impl<T> From<Distribution<T>> for Vec<T> {
    fn from(d: Distribution<T>) -> Vec<T> {
        d.probs
    }
}

/// Joint table over (external state `i`, blanket state `j`). Serializes as
/// an array of rows, one row per external state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<T>>", into = "Vec<Vec<T>>")]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct DiscreteJoint<T> {
    table: Vec<T>,
    rows: usize,
    cols: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Distribution over external states (row sums).
    Psi,
    /// Distribution over blanket states (column sums).
    Blanket,
}

impl<T: Real> DiscreteJoint<T> {
    pub fn new(rows: Vec<Vec<T>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::Domain("joint table is empty".into()));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != n_cols) {
            return Err(Error::Domain(format!("joint row {i} has a different length")));
        }
        let table: Vec<T> = rows.into_iter().flatten().collect();
        if let Some((k, p)) = table
            .iter()
            .enumerate()
            .find(|(_, p)| !(**p >= T::zero()) || !p.is_finite())
        {
            return Err(Error::Domain(format!(
                "joint entry ({}, {}) = {p} is not a non-negative number",
                k / n_cols,
                k % n_cols
            )));
        }
        let total: T = table.iter().copied().sum();
        if (total - T::one()).abs() > T::identity_tol() {
            return Err(Error::Domain(format!("joint table sums to {total}, not 1")));
        }
        Ok(DiscreteJoint {
            table,
            rows: n_rows,
            cols: n_cols,
        })
    }

    /// `p_i q_j`.
    pub fn product(psi: &Distribution<T>, blanket: &Distribution<T>) -> Result<Self> {
        Self::new(
            psi.probs()
                .iter()
                .map(|&p| blanket.probs().iter().map(|&q| p * q).collect())
                .collect(),
        )
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.table[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Result<Vec<T>> {
        self.check_column(j)?;
        Ok((0..self.rows).map(|i| self.get(i, j)).collect())
    }

    fn check_column(&self, j: usize) -> Result<()> {
        if j >= self.cols {
            return Err(Error::Precondition(format!(
                "blanket state {j} out of range (joint has {} columns)",
                self.cols
            )));
        }
        Ok(())
    }

    fn blanket_mass(&self, j: usize) -> Result<T> {
        self.check_column(j)?;
        Ok((0..self.rows).map(|i| self.get(i, j)).sum())
    }
}

impl<T: Real> TryFrom<Vec<Vec<T>>> for DiscreteJoint<T> {
    type Error = Error;

    fn try_from(rows: Vec<Vec<T>>) -> Result<Self> {
        DiscreteJoint::new(rows)
    }
}

impl<T: Copy> From<DiscreteJoint<T>> for Vec<Vec<T>> {
    fn from(j: DiscreteJoint<T>) -> Vec<Vec<T>> {
        j.table.chunks(j.cols).map(<[T]>::to_vec).collect()
    }
}

fn same_support<T: Real>(q: &Distribution<T>, p: &Distribution<T>) -> Result<()> {
    if q.len() != p.len() {
        return Err(Error::Precondition(format!(
            "distributions have {} and {} outcomes",
            q.len(),
            p.len()
        )));
    }
    Ok(())
}

pub fn marginal<T: Real>(joint: &DiscreteJoint<T>, axis: Axis) -> Distribution<T> {
    let (rows, cols) = joint.dims();
    let probs: Vec<T> = match axis {
        Axis::Psi => (0..rows)
            .map(|i| (0..cols).map(|j| joint.get(i, j)).sum())
            .collect(),
        Axis::Blanket => (0..cols)
            .map(|j| (0..rows).map(|i| joint.get(i, j)).sum())
            .collect(),
    };
    Distribution::from_weights(probs).expect("marginal of a normalized joint")
}

/// Posterior `p(psi | j) = p(psi, j) / p(j)`.
pub fn conditional_from_joint<T: Real>(joint: &DiscreteJoint<T>, j: usize) -> Result<Distribution<T>> {
    let mass = joint.blanket_mass(j)?;
    if mass <= T::zero() {
        return Err(Error::ConditioningOnNull(j));
    }
    let col = joint.column(j)?;
    Distribution::new(col.into_iter().map(|p| p / mass).collect())
        .or_else(|_| Distribution::from_weights(joint.column(j).expect("checked")))
}

pub fn kl_divergence<T: Real>(q: &Distribution<T>, p: &Distribution<T>) -> Result<T> {
    same_support(q, p)?;
    let mut acc = T::zero();
    for (i, (&qi, &pi)) in q.probs().iter().zip(p.probs()).enumerate() {
        if qi > T::zero() {
            if pi <= T::zero() {
                return Err(Error::DivergenceInfinite(i));
            }
            acc = acc + qi * (qi / pi).ln();
        }
    }
    Ok(acc)
}

pub fn shannon_entropy<T: Real>(d: &Distribution<T>) -> T {
    -d.probs()
        .iter()
        .map(|&p| if p > T::zero() { p * p.ln() } else { T::zero() })
        .sum::<T>()
}

/// Negative log evidence `-ln p(j)`.
pub fn surprisal<T: Real>(joint: &DiscreteJoint<T>, j: usize) -> Result<T> {
    let mass = joint.blanket_mass(j)?;
    if mass <= T::zero() {
        return Err(Error::InfiniteSurprisal(j));
    }
    Ok(-mass.ln())
}

fn check_q<T: Real>(q: &Distribution<T>, joint: &DiscreteJoint<T>, j: usize) -> Result<Vec<T>> {
    let col = joint.column(j)?;
    if q.len() != col.len() {
        return Err(Error::Precondition(format!(
            "q has {} outcomes but the joint has {} external states",
            q.len(),
            col.len()
        )));
    }
    Ok(col)
}

/// `F = sum_i q_i ln(q_i / p(i, j))`.
pub fn variational_free_energy<T: Real>(
    q: &Distribution<T>,
    joint: &DiscreteJoint<T>,
    j: usize,
) -> Result<T> {
    let col = check_q(q, joint, j)?;
    let mut acc = T::zero();
    for (i, (&qi, &pij)) in q.probs().iter().zip(&col).enumerate() {
        if qi > T::zero() {
            if pij <= T::zero() {
                return Err(Error::DivergenceInfinite(i));
            }
            acc = acc + qi * (qi / pij).ln();
        }
    }
    Ok(acc)
}

/// All five terms of the variational free energy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyDecomposition<T> {
    pub free_energy: T,
    /// `E_q[-ln p(psi, j)]`.
    pub expected_energy: T,
    pub entropy_q: T,
    /// `-ln p(j)`.
    pub surprisal: T,
    pub kl_posterior: T,
}

/// Computes `F` and both decompositions, and checks that they agree.
pub fn decompose<T: Real>(
    q: &Distribution<T>,
    joint: &DiscreteJoint<T>,
    j: usize,
) -> Result<FreeEnergyDecomposition<T>> {
    let free_energy = variational_free_energy(q, joint, j)?;
    let col = check_q(q, joint, j)?;
    let expected_energy = -q
        .probs()
        .iter()
        .zip(&col)
        .filter(|(&qi, _)| qi > T::zero())
        .map(|(&qi, &pij)| qi * pij.ln())
        .sum::<T>();
    let entropy_q = shannon_entropy(q);
    let surprisal = surprisal(joint, j)?;
    let kl_posterior = kl_divergence(q, &conditional_from_joint(joint, j)?)?;

    let tol = T::solver_tol();
    let energy_route = expected_energy - entropy_q;
    let evidence_route = surprisal + kl_posterior;
    if (free_energy - energy_route).abs() > tol || (free_energy - evidence_route).abs() > tol {
        return Err(Error::Numerical(format!(
            "free-energy decompositions disagree: F = {free_energy}, E - H = {energy_route}, L + KL = {evidence_route}"
        )));
    }
    Ok(FreeEnergyDecomposition {
        free_energy,
        expected_energy,
        entropy_q,
        surprisal,
        kl_posterior,
    })
}

/// The evidence bound in both sign conventions: `ln p(j) >= -F`, the gap
/// being `KL(q || posterior)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JensenCheck<T> {
    /// `ln p(j)` (the negated surprisal).
    pub lhs: T,
    /// `-F`.
    pub rhs: T,
    pub gap: T,
}

impl<T: Real> JensenCheck<T> {
    pub fn holds(&self) -> bool {
        self.gap >= -T::identity_tol()
    }
}

pub fn jensen_chain_check<T: Real>(
    joint: &DiscreteJoint<T>,
    j: usize,
    q: &Distribution<T>,
) -> Result<JensenCheck<T>> {
    let d = decompose(q, joint, j)?;
    let lhs = -d.surprisal;
    let rhs = -d.free_energy;
    Ok(JensenCheck {
        lhs,
        rhs,
        gap: lhs - rhs,
    })
}
