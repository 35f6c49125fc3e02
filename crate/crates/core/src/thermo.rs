//! Reduced CVM enthalpy, entropy and free energy (`kT = 1`), the analytic
//! equilibrium at `x1 = x2 = 1/2`, and recovery of the interaction
//! parameter from counted configuration variables.
//!
//! The interaction parameter enters through `h = exp(2 eps1)`. Each site
//! owns two nearest-neighbor bonds, so the per-site enthalpy is
//! `2 eps1 (2 y2 - y1 - y3) = 2 eps1 (-z1 + z3 + z4 - z6)`; with that
//! normalization the free-energy minimum reproduces the closed-form
//! `z3(h)` exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{ConfigVars, BETA, GAMMA};
use crate::scalar::{lf, Real};

/// Nearest-neighbor bonds per lattice site.
pub const BONDS_PER_SITE: f64 = 2.0;

/// Interval of `h` on which the analytic equilibrium is trusted.
pub const H_WINDOW: (f64, f64) = (1.0 / 1.6, 1.6);

/// Activation enthalpy. Fixed at zero: every equilibrium here has
/// `x1 = x2 = 1/2`.
pub const EPS0: f64 = 0.0;

/// Largest tolerated `|x1 - 1/2|` for h-estimation.
pub const ESTIMATE_X1_TOL: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermoReport<T> {
    pub enthalpy: T,
    pub entropy: T,
    pub free_energy: T,
    pub eps1: T,
    pub h: T,
}

pub fn enthalpy_cvm<T: Real>(cv: &ConfigVars<T>, eps1: T) -> T {
    T::lit(BONDS_PER_SITE) * eps1 * cv.unlike_triplet_excess()
}

/// CVM entropy `2 sum beta Lf(y) + sum beta Lf(w) - sum Lf(x) - 2 sum gamma Lf(z)`.
pub fn entropy_cvm<T: Real>(cv: &ConfigVars<T>) -> Result<T> {
    for (k, &v) in cv.all_fractions().enumerate() {
        if !(v >= T::zero() && v <= T::one()) {
            return Err(Error::Domain(format!(
                "configuration fraction #{k} = {v} is outside [0, 1]"
            )));
        }
    }
    let weighted = |vals: &[T], deg: &[u32]| -> T {
        vals.iter()
            .zip(deg)
            .map(|(&v, &d)| T::lit(d as f64) * lf(v))
            .sum()
    };
    let pairs_y = weighted(&cv.y, &BETA);
    let pairs_w = weighted(&cv.w, &BETA);
    let sites = weighted(&cv.x, &[1, 1]);
    let triplets = weighted(&cv.z, &GAMMA);
    let two = T::lit(2.0);
    Ok(two * pairs_y + pairs_w - sites - two * triplets)
}

pub fn free_energy_cvm<T: Real>(cv: &ConfigVars<T>, eps1: T) -> Result<ThermoReport<T>> {
    let enthalpy = enthalpy_cvm(cv, eps1);
    let entropy = entropy_cvm(cv)?;
    Ok(ThermoReport {
        enthalpy,
        entropy,
        free_energy: enthalpy - entropy,
        eps1,
        h: h_from_eps(eps1),
    })
}

pub fn h_from_eps<T: Real>(eps1: T) -> T {
    (T::lit(2.0) * eps1).exp()
}

pub fn eps_from_h<T: Real>(h: T) -> Result<T> {
    if !(h > T::zero()) || !h.is_finite() {
        return Err(Error::Domain(format!("h must be positive and finite, got {h}")));
    }
    Ok(h.ln() / T::lit(2.0))
}

/// Closed-form equilibrium `z3 = (h-3)(h+1) / (8 (h^2 - 6h + 1))`.
pub fn analytic_z3<T: Real>(h: T) -> Result<T> {
    if !(h > T::zero()) || !h.is_finite() {
        return Err(Error::Domain(format!("h must be positive and finite, got {h}")));
    }
    let root_gap = T::lit(2.0) * T::lit(2.0).sqrt();
    let three = T::lit(3.0);
    let tol = T::lit(1e-9);
    for root in [three - root_gap, three + root_gap] {
        if (h - root).abs() < tol {
            return Err(Error::Singularity(format!(
                "h = {h} is a root of h^2 - 6h + 1 (root {root})"
            )));
        }
    }
    let num = (h - three) * (h + T::one());
    let den = T::lit(8.0) * (h * h - T::lit(6.0) * h + T::one());
    Ok(num / den)
}

fn check_window<T: Real>(h: T) -> Result<()> {
    let (lo, hi) = H_WINDOW;
    let hv = h.to_f64().unwrap_or(f64::NAN);
    if !(hv >= lo && hv <= hi) {
        return Err(Error::OutOfValidity { h: hv, lo, hi });
    }
    Ok(())
}

/// Equilibrium configuration variables at `x1 = x2 = 1/2` for interaction
/// parameter `h`, by Newton minimization of the free energy over the
/// consistent triplet manifold.
pub fn analytic_equilibrium<T: Real>(h: T) -> Result<ConfigVars<T>> {
    check_window(h)?;
    let eps1 = eps_from_h(h)?;
    let u = EquilibriumProblem::new(eps1).solve()?;
    Ok(ConfigVars::from_triplets(EquilibriumProblem::triplets(&u)))
}

/// Affine function `a . u + b` of the three free triplet coordinates.
#[derive(Clone, Copy)]
struct Affine<T> {
    a: [T; 3],
    b: T,
}

impl<T: Real> Affine<T> {
    fn new(a: [f64; 3], b: f64) -> Self {
        Affine {
            a: a.map(T::lit),
            b: T::lit(b),
        }
    }

    fn eval(&self, u: &[T; 3]) -> T {
        self.a[0] * u[0] + self.a[1] * u[1] + self.a[2] * u[2] + self.b
    }

    fn plus(self, o: Self) -> Self {
        Affine {
            a: [self.a[0] + o.a[0], self.a[1] + o.a[1], self.a[2] + o.a[2]],
            b: self.b + o.b,
        }
    }

    fn scaled(self, k: T) -> Self {
        Affine {
            a: self.a.map(|v| v * k),
            b: self.b * k,
        }
    }
}

/// Free energy restricted to `x1 = 1/2`, `sum gamma z = 1` and
/// `z2 + z4 = z3 + z5`. Free coordinates are `u = (z1, z2, z3)`; then
/// `z4 = 1/2 - z1 - 2 z2`, `z5 = 1/2 - z1 - z2 - z3`,
/// `z6 = 2 z1 + 2 z2 + z3 - 1/2`.
struct EquilibriumProblem<T> {
    linear: Affine<T>,
    terms: Vec<(T, Affine<T>)>,
}

impl<T: Real> EquilibriumProblem<T> {
    fn z_forms() -> [Affine<T>; 6] {
        [
            Affine::new([1.0, 0.0, 0.0], 0.0),
            Affine::new([0.0, 1.0, 0.0], 0.0),
            Affine::new([0.0, 0.0, 1.0], 0.0),
            Affine::new([-1.0, -2.0, 0.0], 0.5),
            Affine::new([-1.0, -1.0, -1.0], 0.5),
            Affine::new([2.0, 2.0, 1.0], -0.5),
        ]
    }

    fn triplets(u: &[T; 3]) -> [T; 6] {
        Self::z_forms().map(|f| f.eval(u))
    }

    fn new(eps1: T) -> Self {
        let z = Self::z_forms();
        let half = T::lit(0.5);
        let y = [
            z[0].plus(z[1]),
            z[1].plus(z[2]).plus(z[3]).plus(z[4]).scaled(half),
            z[4].plus(z[5]),
        ];
        let w = [z[0].plus(z[2]), z[1].plus(z[4]), z[3].plus(z[5])];
        let mut terms = Vec::with_capacity(12);
        for i in 0..3 {
            terms.push((T::lit(-2.0 * BETA[i] as f64), y[i]));
            terms.push((T::lit(-(BETA[i] as f64)), w[i]));
        }
        for i in 0..6 {
            terms.push((T::lit(2.0 * GAMMA[i] as f64), z[i]));
        }
        let k = T::lit(BONDS_PER_SITE) * eps1;
        let linear = z[2]
            .plus(z[3])
            .plus(z[0].scaled(-T::one()))
            .plus(z[5].scaled(-T::one()))
            .scaled(k);
        EquilibriumProblem { linear, terms }
    }

    fn feasible(&self, u: &[T; 3]) -> bool {
        self.terms.iter().all(|(_, f)| f.eval(u) > T::zero())
    }

    /// Objective without the constant single-site term.
    fn value(&self, u: &[T; 3]) -> T {
        self.linear.eval(u) + self.terms.iter().map(|(c, f)| *c * lf(f.eval(u))).sum::<T>()
    }

    fn gradient_hessian(&self, u: &[T; 3]) -> ([T; 3], [[T; 3]; 3]) {
        let mut g = self.linear.a;
        let mut hess = [[T::zero(); 3]; 3];
        for (c, f) in &self.terms {
            let v = f.eval(u);
            let dl = *c * (v.ln() + T::one());
            let d2 = *c / v;
            for i in 0..3 {
                g[i] = g[i] + dl * f.a[i];
                for j in 0..3 {
                    hess[i][j] = hess[i][j] + d2 * f.a[i] * f.a[j];
                }
            }
        }
        (g, hess)
    }

    fn solve(&self) -> Result<[T; 3]> {
        let tol = T::solver_tol();
        let mut u = [T::lit(0.125); 3];
        for _ in 0..200 {
            let (g, hess) = self.gradient_hessian(&u);
            let gnorm = norm(&g);
            if gnorm < tol {
                return Ok(u);
            }
            let neg_g = g.map(|v| -v);
            let dir = match solve3(hess, neg_g) {
                Some(d) if dot(&d, &g) < T::zero() => d,
                _ => neg_g,
            };
            let f0 = self.value(&u);
            let slope = dot(&dir, &g);
            let slack = T::epsilon() * T::lit(16.0) * (T::one() + f0.abs());
            let mut t = T::one();
            let mut moved = false;
            for _ in 0..80 {
                let cand = [u[0] + t * dir[0], u[1] + t * dir[1], u[2] + t * dir[2]];
                if self.feasible(&cand)
                    && self.value(&cand) <= f0 + T::lit(1e-4) * t * slope + slack
                {
                    u = cand;
                    moved = true;
                    break;
                }
                t = t * T::lit(0.5);
            }
            if !moved {
                break;
            }
        }
        let (g, _) = self.gradient_hessian(&u);
        if norm(&g) < tol {
            Ok(u)
        } else {
            Err(Error::Numerical(format!(
                "equilibrium solve stalled with gradient norm {}",
                norm(&g)
            )))
        }
    }
}

fn dot<T: Real>(a: &[T; 3], b: &[T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm<T: Real>(a: &[T; 3]) -> T {
    dot(a, a).sqrt()
}

/// Gaussian elimination with partial pivoting.
fn solve3<T: Real>(mut m: [[T; 3]; 3], mut rhs: [T; 3]) -> Option<[T; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| {
            m[a][col]
                .abs()
                .partial_cmp(&m[b][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[pivot][col].abs() <= T::epsilon() {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] = m[row][k] - f * m[col][k];
            }
            rhs[row] = rhs[row] - f * rhs[col];
        }
    }
    let mut out = [T::zero(); 3];
    for row in (0..3).rev() {
        let mut acc = rhs[row];
        for k in row + 1..3 {
            acc = acc - m[row][k] * out[k];
        }
        out[row] = acc / m[row][row];
    }
    Some(out)
}

/// Configuration variables whose equilibrium value is inverted for `h`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptiveVar {
    /// A-A-A triplets.
    Z1,
    /// A-B-A triplets.
    Z3,
    /// Unlike nearest-neighbor pairs.
    Y2,
}

impl DescriptiveVar {
    pub const ALL: [DescriptiveVar; 3] = [DescriptiveVar::Z1, DescriptiveVar::Z3, DescriptiveVar::Y2];

    pub fn name(self) -> &'static str {
        match self {
            DescriptiveVar::Z1 => "z1",
            DescriptiveVar::Z3 => "z3",
            DescriptiveVar::Y2 => "y2",
        }
    }

    pub fn of<T: Copy>(self, cv: &ConfigVars<T>) -> T {
        match self {
            DescriptiveVar::Z1 => cv.z[0],
            DescriptiveVar::Z3 => cv.z[2],
            DescriptiveVar::Y2 => cv.y[1],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HCandidate<T> {
    pub variable: DescriptiveVar,
    pub h: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HEstimate<T> {
    pub h_mean: T,
    pub candidates: Vec<HCandidate<T>>,
}

/// Inverts the equilibrium relation for `z1`, `z3` and `y2` by bisection
/// over [`H_WINDOW`] and averages the candidates that fall inside it.
pub fn estimate_h<T: Real>(cv: &ConfigVars<T>) -> Result<HEstimate<T>> {
    let x1 = cv.x[0];
    if !((x1 - T::lit(0.5)).abs() <= T::lit(ESTIMATE_X1_TOL)) {
        return Err(Error::Precondition(format!(
            "h estimation needs x1 near 0.5 (tolerance {ESTIMATE_X1_TOL}), got {x1}"
        )));
    }
    let lo = T::lit(H_WINDOW.0);
    let hi = T::lit(H_WINDOW.1);
    let eq_lo = analytic_equilibrium(lo)?;
    let eq_hi = analytic_equilibrium(hi)?;

    let mut candidates = Vec::new();
    for var in DescriptiveVar::ALL {
        let target = var.of(cv);
        let f_lo = var.of(&eq_lo);
        let f_hi = var.of(&eq_hi);
        let (min, max) = if f_lo <= f_hi { (f_lo, f_hi) } else { (f_hi, f_lo) };
        if !(target >= min && target <= max) {
            continue;
        }
        let increasing = f_hi > f_lo;
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            if b - a <= T::lit(1e-12) {
                break;
            }
            let mid = (a + b) * T::lit(0.5);
            let f_mid = var.of(&analytic_equilibrium(mid)?);
            if (f_mid < target) == increasing {
                a = mid;
            } else {
                b = mid;
            }
        }
        candidates.push(HCandidate {
            variable: var,
            h: (a + b) * T::lit(0.5),
        });
    }
    if candidates.is_empty() {
        return Err(Error::EstimationFailure {
            attempted: DescriptiveVar::ALL.iter().map(|v| v.name().to_string()).collect(),
        });
    }
    let h_mean = candidates.iter().map(|c| c.h).sum::<T>() / T::lit(candidates.len() as f64);
    Ok(HEstimate { h_mean, candidates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{count_config_vars, GridState, Unit};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Direct transcription of the entropy bracket, for cross-checking.
    fn entropy_bracket(x: &[f64], y: &[f64], w: &[f64], z: &[f64]) -> f64 {
        let l = |v: f64| if v == 0.0 { 0.0 } else { v * v.ln() };
        2.0 * (l(y[0]) + 2.0 * l(y[1]) + l(y[2])) + (l(w[0]) + 2.0 * l(w[1]) + l(w[2]))
            - (l(x[0]) + l(x[1]))
            - 2.0 * (l(z[0]) + 2.0 * l(z[1]) + l(z[2]) + l(z[3]) + 2.0 * l(z[4]) + l(z[5]))
    }

    #[test]
    fn enthalpy_examples() {
        let all_a: ConfigVars<f64> = count_config_vars(&GridState::uniform(4, 4, Unit::A).unwrap());
        assert_eq!(enthalpy_cvm(&all_a, 0.0), 0.0);
        assert!(close(enthalpy_cvm(&all_a, 0.1), -0.2, 1e-15));
        let eq = ConfigVars::<f64>::equiprobable();
        assert_eq!(enthalpy_cvm(&eq, 0.7), 0.0);
        // both forms of the interaction term agree on counted grids
        let g = GridState::new_random(8, 8, 3).unwrap();
        let cv: ConfigVars<f64> = count_config_vars(&g);
        assert!(close(cv.unlike_bond_excess(), cv.unlike_triplet_excess(), 1e-15));
    }

    #[test]
    fn entropy_examples() {
        let all_a: ConfigVars<f64> = count_config_vars(&GridState::uniform(4, 4, Unit::A).unwrap());
        assert_eq!(entropy_cvm(&all_a).unwrap(), 0.0);
        let eq = ConfigVars::<f64>::equiprobable();
        assert!(close(entropy_cvm(&eq).unwrap(), std::f64::consts::LN_2, 1e-15));

        let striped = GridState::from_text("1111\n0000\n1111\n0000\n").unwrap();
        let cv: ConfigVars<f64> = count_config_vars(&striped);
        let expected = entropy_bracket(&cv.x, &cv.y, &cv.w, &cv.z);
        assert!(close(entropy_cvm(&cv).unwrap(), expected, 1e-15));
        assert!(close(expected, 0.0, 1e-15));

        let g = GridState::new_random(12, 12, 5).unwrap();
        let cv: ConfigVars<f64> = count_config_vars(&g);
        let expected = entropy_bracket(&cv.x, &cv.y, &cv.w, &cv.z);
        assert!(close(entropy_cvm(&cv).unwrap(), expected, 1e-13));
    }

    #[test]
    fn entropy_rejects_out_of_range_fractions() {
        let mut cv = ConfigVars::<f64>::equiprobable();
        cv.z[3] = -0.01;
        assert!(matches!(entropy_cvm(&cv), Err(Error::Domain(_))));
        cv.z[3] = 1.5;
        assert!(matches!(entropy_cvm(&cv), Err(Error::Domain(_))));
        cv.z[3] = f64::NAN;
        assert!(matches!(entropy_cvm(&cv), Err(Error::Domain(_))));
    }

    #[test]
    fn free_energy_examples() {
        let eq = ConfigVars::<f64>::equiprobable();
        let r = free_energy_cvm(&eq, 0.0).unwrap();
        assert!(close(r.free_energy, -std::f64::consts::LN_2, 1e-15));
        assert_eq!(r.h, 1.0);

        let all_a: ConfigVars<f64> = count_config_vars(&GridState::uniform(4, 4, Unit::A).unwrap());
        let r = free_energy_cvm(&all_a, 0.1).unwrap();
        assert!(close(r.free_energy, -0.2, 1e-15));
        assert_eq!(r.free_energy, r.enthalpy - r.entropy);

        let g = GridState::new_random(8, 8, 9).unwrap();
        let cv: ConfigVars<f64> = count_config_vars(&g);
        let r = free_energy_cvm(&cv, 0.0).unwrap();
        assert_eq!(r.free_energy, -entropy_cvm(&cv).unwrap());
    }

    #[test]
    fn h_eps_conversions() {
        assert_eq!(h_from_eps(0.0f64), 1.0);
        assert!(close(eps_from_h(1.2f64).unwrap(), 0.091_161, 1e-6));
        assert!(close(eps_from_h(1.2f64).unwrap(), 1.2f64.ln() / 2.0, 1e-16));
        for x in [-0.7, -0.01, 0.0, 0.2, 1.3] {
            assert!(close(eps_from_h(h_from_eps(x)).unwrap(), x, 1e-12));
        }
        assert!(matches!(eps_from_h(0.0f64), Err(Error::Domain(_))));
        assert!(matches!(eps_from_h(-1.0f64), Err(Error::Domain(_))));
    }

    #[test]
    fn analytic_z3_values() {
        assert_eq!(analytic_z3(1.0f64).unwrap(), 0.125);
        // (h-3)(h+1) = -3.96, 8 (h^2 - 6h + 1) = -38.08
        assert!(close(analytic_z3(1.2f64).unwrap(), 3.96 / 38.08, 1e-15));
        assert!(close(analytic_z3(1.2f64).unwrap(), 0.103_992, 1e-6));
        let root = 3.0 + 2.0 * 2f64.sqrt();
        assert!(matches!(analytic_z3(root), Err(Error::Singularity(_))));
        assert!(matches!(analytic_z3(3.0 - 2.0 * 2f64.sqrt()), Err(Error::Singularity(_))));
        assert!(matches!(analytic_z3(0.0f64), Err(Error::Domain(_))));
    }

    #[test]
    fn analytic_z3_decreases_on_unit_to_window_top() {
        let mut prev = analytic_z3(1.0f64).unwrap();
        for k in 1..=600 {
            let h = 1.0 + 0.6 * k as f64 / 600.0;
            let z = analytic_z3(h).unwrap();
            assert!(z < prev, "not decreasing at h = {h}");
            assert!(prev - z < 1e-3, "jump at h = {h}");
            prev = z;
        }
    }

    #[test]
    fn equilibrium_symmetry_point() {
        let cv = analytic_equilibrium(1.0f64).unwrap();
        for v in cv.z {
            assert!(close(v, 0.125, 1e-12));
        }
        for v in cv.y.iter().chain(&cv.w) {
            assert!(close(*v, 0.25, 1e-12));
        }
        assert!(close(cv.x[0], 0.5, 1e-15));
    }

    #[test]
    fn equilibrium_matches_closed_form_across_window() {
        for h in [0.625, 0.7, 0.9, 1.05, 1.2, 1.5, 1.6] {
            let cv = analytic_equilibrium(h).unwrap();
            let z3 = analytic_z3(h).unwrap();
            assert!(close(cv.z[2], z3, 1e-9), "h = {h}: {} vs {z3}", cv.z[2]);
            assert!(close(cv.weighted_sum_z(), 1.0, 1e-12));
            assert!(close(cv.weighted_sum_y(), 1.0, 1e-12));
            assert!(close(cv.weighted_sum_w(), 1.0, 1e-12));
            assert!(close(cv.x[0], 0.5, 1e-12));
            assert!(close(cv.z[1] + cv.z[3], cv.z[2] + cv.z[4], 1e-12));
            // A/B symmetry of the equilibrium
            assert!(close(cv.z[0], cv.z[5], 1e-9));
            assert!(close(cv.z[2], cv.z[3], 1e-9));
        }
    }

    #[test]
    fn equilibrium_is_a_minimum() {
        // perturbing along the feasible directions raises the free energy
        let h = 1.3f64;
        let eps = eps_from_h(h).unwrap();
        let cv = analytic_equilibrium(h).unwrap();
        let f0 = free_energy_cvm(&cv, eps).unwrap().free_energy;
        let u = [cv.z[0], cv.z[1], cv.z[2]];
        for d in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, -1.0, 0.5]] {
            for s in [-1e-3, 1e-3] {
                let p = [u[0] + s * d[0], u[1] + s * d[1], u[2] + s * d[2]];
                let z = EquilibriumProblem::<f64>::triplets(&p);
                let f = free_energy_cvm(&ConfigVars::from_triplets(z), eps).unwrap().free_energy;
                assert!(f > f0);
            }
        }
    }

    #[test]
    fn equilibrium_window() {
        match analytic_equilibrium(5.0f64) {
            Err(Error::OutOfValidity { lo, hi, .. }) => {
                assert_eq!((lo, hi), H_WINDOW);
            }
            other => panic!("expected out-of-validity, got {other:?}"),
        }
        assert!(analytic_equilibrium(0.5f64).is_err());
        assert!(analytic_equilibrium(f64::NAN).is_err());
    }

    #[test]
    fn estimate_round_trip() {
        let est = estimate_h(&analytic_equilibrium(1.2f64).unwrap()).unwrap();
        assert!(close(est.h_mean, 1.2, 1e-4));
        assert_eq!(est.candidates.len(), 3);
        for c in &est.candidates {
            assert!(close(c.h, 1.2, 1e-4), "{:?}", c);
        }
        let est = estimate_h(&ConfigVars::<f64>::equiprobable()).unwrap();
        assert!(close(est.h_mean, 1.0, 1e-9));
    }

    #[test]
    fn estimate_drops_out_of_range_candidates() {
        // z3 over the window spans [z3(1.6), z3(0.625)] ~ [0.0753, 0.2045]
        let lo_end = analytic_z3(H_WINDOW.1).unwrap();
        let hi_end = analytic_z3(H_WINDOW.0).unwrap();
        assert!(close(lo_end, 3.64 / 48.32, 1e-12));
        assert!(close(hi_end, 3.859_375 / 18.875, 1e-12));

        let mut cv = analytic_equilibrium(1.2f64).unwrap();
        cv.z[2] = 0.25;
        let est = estimate_h(&cv).unwrap();
        assert_eq!(est.candidates.len(), 2);
        assert!(est.candidates.iter().all(|c| c.variable != DescriptiveVar::Z3));

        cv.z[0] = 0.3;
        cv.y[1] = 0.01;
        match estimate_h(&cv) {
            Err(Error::EstimationFailure { attempted }) => {
                assert_eq!(attempted, ["z1", "z3", "y2"]);
            }
            other => panic!("expected estimation failure, got {other:?}"),
        }
    }

    #[test]
    fn estimate_requires_balanced_sites() {
        let mut cv = ConfigVars::<f64>::equiprobable();
        cv.x = [0.6, 0.4];
        assert!(matches!(estimate_h(&cv), Err(Error::Precondition(_))));
    }

    #[test]
    fn single_precision_equilibrium() {
        let cv = analytic_equilibrium(1.2f32).unwrap();
        assert!((cv.z[2] - analytic_z3(1.2f32).unwrap()).abs() < 1e-4);
        let r = free_energy_cvm(&ConfigVars::<f32>::equiprobable(), 0.0).unwrap();
        assert!((r.free_energy + std::f32::consts::LN_2).abs() < 1e-6);
    }
}
