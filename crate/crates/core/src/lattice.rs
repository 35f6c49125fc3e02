//! Bistate zigzag lattices and their configuration variables.
//!
//! Rows are offset like brickwork and wrap periodically in both directions.
//! An even row `r` links site `(r, c)` down to `(r+1, c)` and `(r+1, c+1)`;
//! an odd row links down to `(r+1, c-1)` and `(r+1, c)`. Those diagonal
//! links are the nearest-neighbor bonds (`y`). The two ends of every
//! chevron `u - v - w` (both down-pointing and up-pointing) are horizontal
//! neighbors in one row, so the horizontal pairs are the next-nearest
//! pairs (`w`) and every chevron is a triplet (`z`). Per site there are two
//! bonds, one horizontal pair and two triplets, which makes `w` and `y`
//! exact marginals of `z`.
//!
//! Triplet classes, read end-center-end:
//!
//! | class | pattern         | degeneracy |
//! |-------|-----------------|------------|
//! | z1    | A-A-A           | 1          |
//! | z2    | A-A-B, B-A-A    | 2          |
//! | z3    | A-B-A           | 1          |
//! | z4    | B-A-B           | 1          |
//! | z5    | A-B-B, B-B-A    | 2          |
//! | z6    | B-B-B           | 1          |

use std::fmt;
use std::hash::{Hash, Hasher};

use num_traits::{FromPrimitive, Num};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pair degeneracies for `y` and `w`.
pub const BETA: [u32; 3] = [1, 2, 1];
/// Triplet degeneracies for `z`.
pub const GAMMA: [u32; 6] = [1, 2, 1, 1, 2, 1];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    /// On / active, written as `1`.
    A,
    /// Off, written as `0`.
    B,
}

impl Unit {
    pub fn flipped(self) -> Unit {
        match self {
            Unit::A => Unit::B,
            Unit::B => Unit::A,
        }
    }

    fn is_a(self) -> bool {
        self == Unit::A
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub row: usize,
    pub col: usize,
}

impl Site {
    pub fn new(row: usize, col: usize) -> Self {
        Site { row, col }
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

/// A periodic bistate grid. Equality and hashing ignore `seed`, which only
/// records provenance. Serializes as its text form.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GridState {
    rows: usize,
    cols: usize,
    cells: Vec<Unit>,
    seed: Option<u64>,
}

impl PartialEq for GridState {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.cells == other.cells
    }
}

impl Eq for GridState {}

impl Hash for GridState {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rows.hash(state);
        self.cols.hash(state);
        self.cells.hash(state);
    }
}

fn check_shape(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidDimension(format!(
            "grid must be non-empty, got {rows}x{cols}"
        )));
    }
    if rows % 2 != 0 {
        return Err(Error::InvalidDimension(format!(
            "row count must be even for the zigzag wrap, got {rows}"
        )));
    }
    Ok(())
}

impl GridState {
    /// Builds a grid from row-major cells.
    pub fn from_cells(rows: usize, cols: usize, cells: Vec<Unit>) -> Result<Self> {
        check_shape(rows, cols)?;
        if cells.len() != rows * cols {
            return Err(Error::InvalidDimension(format!(
                "expected {} cells for {rows}x{cols}, got {}",
                rows * cols,
                cells.len()
            )));
        }
        Ok(GridState {
            rows,
            cols,
            cells,
            seed: None,
        })
    }

    pub fn uniform(rows: usize, cols: usize, unit: Unit) -> Result<Self> {
        Self::from_cells(rows, cols, vec![unit; rows * cols])
    }

    /// Random grid with exactly half the cells in state A, uniform over all
    /// such assignments for the given seed.
    pub fn new_random(rows: usize, cols: usize, seed: u64) -> Result<Self> {
        check_shape(rows, cols)?;
        if rows < 4 || cols < 4 {
            return Err(Error::InvalidDimension(format!(
                "random grids need at least 4x4, got {rows}x{cols}"
            )));
        }
        let n = rows * cols;
        if n % 2 != 0 {
            return Err(Error::InvalidDimension(format!(
                "cell count must be even for an equal A/B split, got {n}"
            )));
        }
        let mut cells: Vec<Unit> = (0..n)
            .map(|i| if i < n / 2 { Unit::A } else { Unit::B })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        cells.shuffle(&mut rng);
        Ok(GridState {
            rows,
            cols,
            cells,
            seed: Some(seed),
        })
    }

    /// Parses rows of `0`/`1` characters (`1` is A). The final newline is
    /// optional; a trailing `\r` on each line is tolerated.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines: Vec<&str> = text.split('\n').collect();
        if lines.last() == Some(&"") {
            lines.pop();
        }
        if lines.is_empty() {
            return Err(Error::Parse {
                line: 1,
                message: "empty grid".into(),
            });
        }
        let mut cells = Vec::new();
        let mut cols = 0;
        for (idx, raw) in lines.iter().enumerate() {
            let line_no = idx + 1;
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    message: "empty row".into(),
                });
            }
            let width = line.chars().count();
            if idx == 0 {
                cols = width;
            } else if width != cols {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("ragged row: expected {cols} cells, found {width}"),
                });
            }
            for ch in line.chars() {
                cells.push(match ch {
                    '1' => Unit::A,
                    '0' => Unit::B,
                    other => {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("illegal character {other:?}"),
                        })
                    }
                });
            }
        }
        let rows = lines.len();
        if rows % 2 != 0 {
            return Err(Error::Parse {
                line: rows,
                message: format!("row count must be even, found {rows} rows"),
            });
        }
        Self::from_cells(rows, cols, cells)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.rows * (self.cols + 1));
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.push(match self.cells[r * self.cols + c] {
                    Unit::A => '1',
                    Unit::B => '0',
                });
            }
            out.push('\n');
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn cells(&self) -> &[Unit] {
        &self.cells
    }

    pub fn index(&self, site: Site) -> usize {
        site.row * self.cols + site.col
    }

    pub fn site(&self, index: usize) -> Site {
        Site::new(index / self.cols, index % self.cols)
    }

    pub fn get(&self, site: Site) -> Option<Unit> {
        if site.row < self.rows && site.col < self.cols {
            Some(self.cells[self.index(site)])
        } else {
            None
        }
    }

    pub fn count_a(&self) -> usize {
        self.cells.iter().filter(|u| u.is_a()).count()
    }

    pub fn is_uniform(&self) -> bool {
        let a = self.count_a();
        a == 0 || a == self.len()
    }

    pub(crate) fn set_index(&mut self, index: usize, unit: Unit) {
        self.cells[index] = unit;
    }

    pub(crate) fn swap_indices(&mut self, i: usize, j: usize) {
        self.cells.swap(i, j);
    }

    /// Exchanges an A site with a B site in place.
    pub fn swap_in_place(&mut self, site_a: Site, site_b: Site) -> Result<()> {
        let ua = self
            .get(site_a)
            .ok_or_else(|| Error::Precondition(format!("site {site_a} is out of bounds")))?;
        let ub = self
            .get(site_b)
            .ok_or_else(|| Error::Precondition(format!("site {site_b} is out of bounds")))?;
        if ua != Unit::A || ub != Unit::B {
            return Err(Error::Precondition(format!(
                "swap needs an A site and a B site, got {ua:?} at {site_a} and {ub:?} at {site_b}"
            )));
        }
        let (i, j) = (self.index(site_a), self.index(site_b));
        self.swap_indices(i, j);
        Ok(())
    }

    /// Returns a copy with the A site and the B site exchanged.
    pub fn swap(&self, site_a: Site, site_b: Site) -> Result<GridState> {
        let mut out = self.clone();
        out.swap_in_place(site_a, site_b)?;
        Ok(out)
    }

    /// Cyclic shift of all rows by `dr` and all columns by `dc`.
    pub fn shifted(&self, dr: usize, dc: usize) -> GridState {
        let mut cells = vec![Unit::B; self.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                let to = ((r + dr) % self.rows) * self.cols + (c + dc) % self.cols;
                cells[to] = self.cells[r * self.cols + c];
            }
        }
        GridState {
            cells,
            ..self.clone()
        }
    }

    /// Column mirror `c -> cols-1-c`.
    pub fn mirrored(&self) -> GridState {
        let mut cells = self.cells.clone();
        for row in cells.chunks_mut(self.cols) {
            row.reverse();
        }
        GridState {
            cells,
            ..self.clone()
        }
    }
}

impl From<GridState> for String {
    fn from(g: GridState) -> String {
        g.to_text()
    }
}

impl TryFrom<String> for GridState {
    type Error = Error;

    fn try_from(text: String) -> Result<Self> {
        GridState::from_text(&text)
    }
}

impl fmt::Display for GridState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

pub(crate) fn pair_class(a: Unit, b: Unit) -> usize {
    match (a.is_a(), b.is_a()) {
        (true, true) => 0,
        (false, false) => 2,
        _ => 1,
    }
}

pub(crate) fn triplet_class(end1: Unit, center: Unit, end2: Unit) -> usize {
    let ends_a = end1.is_a() as u8 + end2.is_a() as u8;
    match (center.is_a(), ends_a) {
        (true, 2) => 0,
        (true, 1) => 1,
        (true, _) => 3,
        (false, 2) => 2,
        (false, 1) => 4,
        (false, _) => 5,
    }
}

/// Bond, pair and triplet instances of a lattice shape, with per-site
/// incidence lists for local recounting.
#[derive(Clone, Debug)]
pub struct Topology {
    rows: usize,
    cols: usize,
    bonds: Vec<[usize; 2]>,
    pairs: Vec<[usize; 2]>,
    triplets: Vec<[usize; 3]>,
    bonds_of: Vec<Vec<usize>>,
    pairs_of: Vec<Vec<usize>>,
    triplets_of: Vec<Vec<usize>>,
}

impl Topology {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        check_shape(rows, cols)?;
        let n = rows * cols;
        let idx = |r: usize, c: usize| (r % rows) * cols + c % cols;
        let down = |r: usize, c: usize| -> [usize; 2] {
            if r % 2 == 0 {
                [idx(r + 1, c), idx(r + 1, c + 1)]
            } else {
                [idx(r + 1, c + cols - 1), idx(r + 1, c)]
            }
        };
        let up = |r: usize, c: usize| -> [usize; 2] {
            let above = r + rows - 1;
            if r % 2 == 0 {
                [idx(above, c), idx(above, c + 1)]
            } else {
                [idx(above, c + cols - 1), idx(above, c)]
            }
        };

        let mut bonds = Vec::with_capacity(2 * n);
        let mut pairs = Vec::with_capacity(n);
        let mut triplets = Vec::with_capacity(2 * n);
        for r in 0..rows {
            for c in 0..cols {
                let v = idx(r, c);
                let d = down(r, c);
                let u = up(r, c);
                bonds.push([v, d[0]]);
                bonds.push([v, d[1]]);
                pairs.push([v, idx(r, c + 1)]);
                triplets.push([d[0], v, d[1]]);
                triplets.push([u[0], v, u[1]]);
            }
        }

        fn incidence<const K: usize>(n: usize, items: &[[usize; K]]) -> Vec<Vec<usize>> {
            let mut of = vec![Vec::new(); n];
            for (id, item) in items.iter().enumerate() {
                for &s in item {
                    of[s].push(id);
                }
            }
            for list in &mut of {
                list.sort_unstable();
                list.dedup();
            }
            of
        }

        Ok(Topology {
            rows,
            cols,
            bonds_of: incidence(n, &bonds),
            pairs_of: incidence(n, &pairs),
            triplets_of: incidence(n, &triplets),
            bonds,
            pairs,
            triplets,
        })
    }

    pub fn for_grid(grid: &GridState) -> Self {
        Self::new(grid.rows, grid.cols).expect("grid shape already validated")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn sites(&self) -> usize {
        self.rows * self.cols
    }

    pub fn bonds(&self) -> &[[usize; 2]] {
        &self.bonds
    }

    pub fn pairs(&self) -> &[[usize; 2]] {
        &self.pairs
    }

    pub fn triplets(&self) -> &[[usize; 3]] {
        &self.triplets
    }

    /// Full count over every instance.
    pub fn count(&self, cells: &[Unit]) -> ConfigCounts {
        assert_eq!(cells.len(), self.sites(), "cell slice does not match topology");
        let mut counts = ConfigCounts::empty(self.sites());
        counts.a_sites = cells.iter().filter(|u| u.is_a()).count();
        for b in &self.bonds {
            counts.y[pair_class(cells[b[0]], cells[b[1]])] += 1;
        }
        for p in &self.pairs {
            counts.w[pair_class(cells[p[0]], cells[p[1]])] += 1;
        }
        for t in &self.triplets {
            counts.z[triplet_class(cells[t[0]], cells[t[1]], cells[t[2]])] += 1;
        }
        counts
    }

    /// Instances touching either site, each listed once.
    pub(crate) fn local_instances(&self, i: usize, j: usize) -> LocalInstances {
        fn merge(a: &[usize], b: &[usize]) -> Vec<usize> {
            let mut out: Vec<usize> = a.iter().chain(b).copied().collect();
            out.sort_unstable();
            out.dedup();
            out
        }
        LocalInstances {
            bonds: merge(&self.bonds_of[i], &self.bonds_of[j]),
            pairs: merge(&self.pairs_of[i], &self.pairs_of[j]),
            triplets: merge(&self.triplets_of[i], &self.triplets_of[j]),
        }
    }

    /// Adds (`sign = 1`) or removes (`sign = -1`) the contribution of the
    /// listed instances.
    pub(crate) fn tally_local(
        &self,
        cells: &[Unit],
        local: &LocalInstances,
        counts: &mut SignedCounts,
        sign: i64,
    ) {
        for &id in &local.bonds {
            let [a, b] = self.bonds[id];
            counts.y[pair_class(cells[a], cells[b])] += sign;
        }
        for &id in &local.pairs {
            let [a, b] = self.pairs[id];
            counts.w[pair_class(cells[a], cells[b])] += sign;
        }
        for &id in &local.triplets {
            let [a, b, c] = self.triplets[id];
            counts.z[triplet_class(cells[a], cells[b], cells[c])] += sign;
        }
    }
}

pub(crate) struct LocalInstances {
    bonds: Vec<usize>,
    pairs: Vec<usize>,
    triplets: Vec<usize>,
}

#[derive(Default)]
pub(crate) struct SignedCounts {
    y: [i64; 3],
    w: [i64; 3],
    z: [i64; 6],
}

/// Raw instance counts. `y` and `w` are indexed AA, AB (either order), BB;
/// `z` by triplet class. Denominators: `N` sites, `2N` bonds, `N` pairs,
/// `2N` triplets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfigCounts {
    pub sites: usize,
    pub a_sites: usize,
    pub y: [usize; 3],
    pub w: [usize; 3],
    pub z: [usize; 6],
}

impl ConfigCounts {
    fn empty(sites: usize) -> Self {
        ConfigCounts {
            sites,
            a_sites: 0,
            y: [0; 3],
            w: [0; 3],
            z: [0; 6],
        }
    }

    pub(crate) fn apply(&mut self, delta: &SignedCounts) {
        fn add<const K: usize>(dst: &mut [usize; K], d: &[i64; K]) {
            for (v, &dv) in dst.iter_mut().zip(d) {
                *v = (*v as i64 + dv) as usize;
            }
        }
        add(&mut self.y, &delta.y);
        add(&mut self.w, &delta.w);
        add(&mut self.z, &delta.z);
    }

    /// Per-distinct-pattern fractions, exact for rational `T`.
    pub fn fractions<T>(&self) -> ConfigVars<T>
    where
        T: Num + FromPrimitive + Clone,
    {
        let n = self.sites;
        let frac = |count: usize, denom: usize| -> T {
            T::from_usize(count).expect("count fits scalar")
                / T::from_usize(denom).expect("count fits scalar")
        };
        ConfigVars {
            x: [frac(self.a_sites, n), frac(n - self.a_sites, n)],
            y: std::array::from_fn(|i| frac(self.y[i], 2 * n * BETA[i] as usize)),
            w: std::array::from_fn(|i| frac(self.w[i], n * BETA[i] as usize)),
            z: std::array::from_fn(|i| frac(self.z[i], 2 * n * GAMMA[i] as usize)),
        }
    }
}

/// Configuration-variable fractions. Serializes as `{x, y, w, z}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigVars<T> {
    pub x: [T; 2],
    pub y: [T; 3],
    pub w: [T; 3],
    pub z: [T; 6],
}

impl<T> ConfigVars<T>
where
    T: Num + FromPrimitive + Clone,
{
    pub const BETA: [u32; 3] = BETA;
    pub const GAMMA: [u32; 6] = GAMMA;

    fn weight(k: u32) -> T {
        T::from_u32(k).expect("small integer")
    }

    /// The fully random profile: `x = 1/2`, `y = w = 1/4`, `z = 1/8`.
    pub fn equiprobable() -> Self {
        let q = |d: u32| T::one() / Self::weight(d);
        ConfigVars {
            x: [q(2), q(2)],
            y: [q(4), q(4), q(4)],
            w: [q(4), q(4), q(4)],
            z: [q(8), q(8), q(8), q(8), q(8), q(8)],
        }
    }

    /// Rebuilds `x`, `y`, `w` as marginals of the triplet fractions.
    pub fn from_triplets(z: [T; 6]) -> Self {
        let two = Self::weight(2);
        let [z1, z2, z3, z4, z5, z6] = z.clone();
        ConfigVars {
            x: [
                z1.clone() + two.clone() * z2.clone() + z4.clone(),
                z3.clone() + two * z5.clone() + z6.clone(),
            ],
            y: [
                z1.clone() + z2.clone(),
                (z2.clone() + z3.clone() + z4.clone() + z5.clone()) / Self::weight(2),
                z5.clone() + z6.clone(),
            ],
            w: [z1 + z3, z2 + z5, z4 + z6],
            z,
        }
    }

    pub fn sum_x(&self) -> T {
        self.x[0].clone() + self.x[1].clone()
    }

    pub fn weighted_sum_y(&self) -> T {
        weighted(&self.y, &BETA)
    }

    pub fn weighted_sum_w(&self) -> T {
        weighted(&self.w, &BETA)
    }

    pub fn weighted_sum_z(&self) -> T {
        weighted(&self.z, &GAMMA)
    }

    /// `gamma_i z_i`: the triplet profile as a probability vector.
    pub fn gamma_weighted_z(&self) -> [T; 6] {
        std::array::from_fn(|i| Self::weight(GAMMA[i]) * self.z[i].clone())
    }

    /// `2 y2 - y1 - y3`, the bond form of the interaction term.
    pub fn unlike_bond_excess(&self) -> T {
        Self::weight(2) * self.y[1].clone() - self.y[0].clone() - self.y[2].clone()
    }

    /// `-z1 + z3 + z4 - z6`, the triplet form of the interaction term.
    pub fn unlike_triplet_excess(&self) -> T {
        self.z[2].clone() + self.z[3].clone() - self.z[0].clone() - self.z[5].clone()
    }

    pub fn map<U>(&self, f: impl Fn(T) -> U) -> ConfigVars<U> {
        ConfigVars {
            x: self.x.clone().map(&f),
            y: self.y.clone().map(&f),
            w: self.w.clone().map(&f),
            z: self.z.clone().map(&f),
        }
    }

    pub fn all_fractions(&self) -> impl Iterator<Item = &T> {
        self.x.iter().chain(&self.y).chain(&self.w).chain(&self.z)
    }
}

fn weighted<T: Num + FromPrimitive + Clone>(v: &[T], k: &[u32]) -> T {
    v.iter()
        .zip(k)
        .fold(T::zero(), |acc, (vi, &ki)| acc + T::from_u32(ki).unwrap() * vi.clone())
}

/// Exact instance counts of a grid.
pub fn count_config(grid: &GridState) -> ConfigCounts {
    Topology::for_grid(grid).count(&grid.cells)
}

/// Configuration-variable fractions of a grid.
pub fn count_config_vars<T>(grid: &GridState) -> ConfigVars<T>
where
    T: Num + FromPrimitive + Clone,
{
    count_config(grid).fractions()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    fn g(text: &str) -> GridState {
        GridState::from_text(text).unwrap()
    }

    #[test]
    fn random_grid_is_balanced_and_deterministic() {
        let a = GridState::new_random(4, 4, 1).unwrap();
        assert_eq!(a.count_a(), 8);
        assert_eq!(a, GridState::new_random(4, 4, 1).unwrap());
        assert_ne!(a, GridState::new_random(4, 4, 2).unwrap());
        let b = GridState::new_random(16, 16, 7).unwrap();
        let cv: ConfigVars<Rational64> = count_config_vars(&b);
        assert_eq!(cv.x[0], Rational64::new(1, 2));
        assert_eq!(cv.weighted_sum_y(), Rational64::from_integer(1));
        assert_eq!(cv.weighted_sum_z(), Rational64::from_integer(1));
    }

    #[test]
    fn random_grid_rejects_bad_dimensions() {
        assert!(matches!(
            GridState::new_random(3, 4, 0),
            Err(Error::InvalidDimension(_))
        ));
        assert!(matches!(
            GridState::new_random(2, 4, 0),
            Err(Error::InvalidDimension(_))
        ));
        assert!(matches!(
            GridState::new_random(4, 3, 0),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn text_parsing() {
        let grid = g("10\n01\n10\n01\n");
        assert_eq!((grid.rows(), grid.cols()), (4, 2));
        let cv: ConfigVars<f64> = count_config_vars(&grid);
        assert_eq!(cv.x, [0.5, 0.5]);
        assert_eq!(g("10\r\n01\r\n"), g("10\n01"));

        match GridState::from_text("10\n0\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        match GridState::from_text("10\n0x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        match GridState::from_text("10\n01\n11\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(GridState::from_text("").is_err());
    }

    #[test]
    fn text_round_trip_keeps_final_newline_optional() {
        let t = "1100\n0011\n1010\n0101\n";
        assert_eq!(g(t).to_text(), t);
        assert_eq!(g(t.trim_end()).to_text(), t);
    }

    #[test]
    fn uniform_grid_has_only_like_patterns() {
        let grid = GridState::uniform(4, 4, Unit::A).unwrap();
        let cv: ConfigVars<f64> = count_config_vars(&grid);
        assert_eq!(cv.x, [1.0, 0.0]);
        assert_eq!(cv.y, [1.0, 0.0, 0.0]);
        assert_eq!(cv.w, [1.0, 0.0, 0.0]);
        assert_eq!(cv.z, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn striped_grid() {
        // Every bond joins an A row to a B row; every horizontal pair is
        // like; chevrons centered on A rows are B-A-B and on B rows A-B-A.
        let grid = g("1111\n0000\n1111\n0000\n");
        let cv: ConfigVars<Rational64> = count_config_vars(&grid);
        let r = Rational64::new;
        assert_eq!(cv.y, [r(0, 1), r(1, 2), r(0, 1)]);
        assert_eq!(cv.w, [r(1, 2), r(0, 1), r(1, 2)]);
        assert_eq!(
            cv.z,
            [r(0, 1), r(0, 1), r(1, 2), r(1, 2), r(0, 1), r(0, 1)]
        );
        assert_eq!(cv.weighted_sum_y(), r(1, 1));
    }

    #[test]
    fn topology_instance_counts() {
        let t = Topology::new(6, 8).unwrap();
        let n = 48;
        assert_eq!(t.bonds().len(), 2 * n);
        assert_eq!(t.pairs().len(), n);
        assert_eq!(t.triplets().len(), 2 * n);
        // every bond lies in exactly two triplets, every pair ends exactly two
        let mut bond_hits = std::collections::HashMap::new();
        let mut pair_hits = std::collections::HashMap::new();
        for &[u, v, w] in t.triplets() {
            for e in [[u.min(v), u.max(v)], [v.min(w), v.max(w)]] {
                *bond_hits.entry(e).or_insert(0) += 1;
            }
            *pair_hits.entry([u.min(w), u.max(w)]).or_insert(0) += 1;
        }
        assert_eq!(bond_hits.len(), 2 * n);
        assert!(bond_hits.values().all(|&k| k == 2));
        assert_eq!(pair_hits.len(), n);
        assert!(pair_hits.values().all(|&k| k == 2));
        for &[a, b] in t.bonds() {
            assert!(bond_hits.contains_key(&[a.min(b), a.max(b)]));
        }
    }

    #[test]
    fn swap_semantics() {
        let grid = g("1100\n0011\n1010\n0101\n");
        let (a, b) = (Site::new(0, 0), Site::new(0, 2));
        let swapped = grid.swap(a, b).unwrap();
        assert_eq!(swapped.get(a), Some(Unit::B));
        assert_eq!(swapped.get(b), Some(Unit::A));
        assert_eq!(swapped.count_a(), grid.count_a());
        assert_eq!(swapped.swap(b, a).unwrap(), grid);
        assert!(matches!(
            grid.swap(Site::new(0, 0), Site::new(0, 1)),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            grid.swap(Site::new(0, 0), Site::new(9, 9)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn equiprobable_profile_is_normalized() {
        let cv = ConfigVars::<Rational64>::equiprobable();
        assert_eq!(cv.sum_x(), Rational64::from_integer(1));
        assert_eq!(cv.weighted_sum_w(), Rational64::from_integer(1));
        assert_eq!(cv.weighted_sum_z(), Rational64::from_integer(1));
        assert_eq!(ConfigVars::from_triplets(cv.z), cv);
    }

    #[test]
    fn config_vars_json_shape() {
        let cv: ConfigVars<f64> = ConfigVars::equiprobable();
        let v = serde_json::to_value(cv).unwrap();
        let obj = v.as_object().unwrap();
        let mut keys: Vec<_> = obj.keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["w", "x", "y", "z"]);
        assert_eq!(obj["z"].as_array().unwrap().len(), 6);
    }
}
