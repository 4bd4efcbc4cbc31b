//! Interpolation grid, domain-address maps and the homogeneity conditions.
//!
//! Cells are addressed with 1-based pairs `(i, j)`: cell `(i, j)` is the
//! rectangle spanned by nodes `i-1..=i` in x and `j-1..=j` in y. Node indices
//! are 0-based. Every geometric relation between cells and domains is decided
//! on node indices, never on floating-point coordinates.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::error::GridError;

/// Horizontal axis selector used in diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::X => f.write_str("x"),
            Axis::Y => f.write_str("y"),
        }
    }
}

/// A grid cell `D_ij`, 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Cell {
    pub i: usize,
    pub j: usize,
}

impl Cell {
    pub const fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }

    /// The node-index rectangle covered by this cell.
    pub fn rect(self) -> IndexRect {
        IndexRect {
            x0: self.i - 1,
            x1: self.i,
            y0: self.j - 1,
            y1: self.j,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.i, self.j)
    }
}

/// Closed rectangle `[x_{x0}, x_{x1}] × [y_{y0}, y_{y1}]` in node indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct IndexRect {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

impl IndexRect {
    pub fn contains_rect(&self, other: &IndexRect) -> bool {
        self.x0 <= other.x0 && other.x1 <= self.x1 && self.y0 <= other.y0 && other.y1 <= self.y1
    }

    /// True when the open interiors intersect.
    pub fn interiors_overlap(&self, other: &IndexRect) -> bool {
        self.x0.max(other.x0) < self.x1.min(other.x1) && self.y0.max(other.y0) < self.y1.min(other.y1)
    }

    pub fn contains_node(&self, p: usize, q: usize) -> bool {
        self.x0 <= p && p <= self.x1 && self.y0 <= q && q <= self.y1
    }

    /// The grid cells inside this rectangle, in row-major `(i, j)` order.
    pub fn cells(self) -> impl Iterator<Item = Cell> {
        let (y0, y1) = (self.y0, self.y1);
        (self.x0 + 1..=self.x1).flat_map(move |i| (y0 + 1..=y1).map(move |j| Cell::new(i, j)))
    }
}

impl fmt::Display for IndexRect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[x{},x{}]x[y{},y{}]", self.x0, self.x1, self.y0, self.y1)
    }
}

/// Dense row-major table indexed by node pairs `(p, q)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodeTable {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl NodeTable {
    pub fn from_rows(rows: &[Vec<f64>], expected_rows: usize, expected_cols: usize) -> Result<Self, GridError> {
        if rows.len() != expected_rows {
            return Err(GridError::ShapeMismatch {
                what: "row count",
                expected: expected_rows,
                found: rows.len(),
            });
        }
        let mut data = Vec::with_capacity(expected_rows * expected_cols);
        for row in rows {
            if row.len() != expected_cols {
                return Err(GridError::ShapeMismatch {
                    what: "column count",
                    expected: expected_cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: expected_rows,
            cols: expected_cols,
            data,
        })
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.data[p * self.cols + q]
    }

    #[inline]
    pub fn set(&mut self, p: usize, q: usize, value: f64) {
        self.data[p * self.cols + q] = value;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|k| (k / self.cols, k % self.cols))
    }
}

/// Grid nodes and heights, normalized so that the domain is `[0,1]²`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InterpolationData {
    x: Vec<f64>,
    y: Vec<f64>,
    z: NodeTable,
}

impl InterpolationData {
    /// Builds the data set from node coordinates and a `(N+1)×(M+1)` height
    /// matrix (row index along x). Nodes are rescaled onto `[0,1]`.
    pub fn new(x: &[f64], y: &[f64], z: &[Vec<f64>]) -> Result<Self, GridError> {
        let x = normalize_axis(Axis::X, x)?;
        let y = normalize_axis(Axis::Y, y)?;
        let z = NodeTable::from_rows(z, x.len(), y.len())?;
        if let Some((i, j)) = z.first_non_finite() {
            return Err(GridError::NonFiniteHeight { i, j });
        }
        Ok(Self { x, y, z })
    }

    /// Data on the uniform grid `x_i = i/n`, `y_j = j/m`.
    pub fn uniform(n: usize, m: usize, z: &[Vec<f64>]) -> Result<Self, GridError> {
        let x: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let y: Vec<f64> = (0..=m).map(|j| j as f64 / m as f64).collect();
        Self::new(&x, &y, z)
    }

    /// Number of cells along x.
    pub fn n(&self) -> usize {
        self.x.len() - 1
    }

    /// Number of cells along y.
    pub fn m(&self) -> usize {
        self.y.len() - 1
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn nodes(&self, axis: Axis) -> &[f64] {
        match axis {
            Axis::X => &self.x,
            Axis::Y => &self.y,
        }
    }

    #[inline]
    pub fn z(&self, p: usize, q: usize) -> f64 {
        self.z.get(p, q)
    }

    pub fn heights(&self) -> &NodeTable {
        &self.z
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let m = self.m();
        (1..=self.n()).flat_map(move |i| (1..=m).map(move |j| Cell::new(i, j)))
    }
}

fn normalize_axis(axis: Axis, nodes: &[f64]) -> Result<Vec<f64>, GridError> {
    if nodes.len() < 3 {
        return Err(GridError::TooFewCells {
            axis,
            cells: nodes.len().saturating_sub(1),
        });
    }
    for (index, pair) in nodes.windows(2).enumerate() {
        if !(pair[0].is_finite() && pair[1].is_finite()) || pair[1] <= pair[0] {
            return Err(GridError::NonMonotoneNodes { axis, index: index + 1 });
        }
    }
    let lo = nodes[0];
    let width = nodes[nodes.len() - 1] - lo;
    let last = nodes.len() - 1;
    Ok(nodes
        .iter()
        .enumerate()
        .map(|(k, &v)| match k {
            0 => 0.0,
            k if k == last => 1.0,
            _ => (v - lo) / width,
        })
        .collect())
}

/// One affine contraction `u_i : I'_i → I_i` (or `v_j`).
///
/// Evaluated in interpolation form so that both endpoint conditions hold
/// exactly in floating point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AxisMap {
    /// Node index of `x'_{i-1}`.
    pub from_node: usize,
    /// Node index of `x'_i`.
    pub to_node: usize,
    from: f64,
    to: f64,
    image_lo: f64,
    image_hi: f64,
}

impl AxisMap {
    /// Coefficient `a` of `u(x) = a·x + b`; negative when orientation reverses.
    pub fn slope(&self) -> f64 {
        (self.image_hi - self.image_lo) / (self.to - self.from)
    }

    pub fn offset(&self) -> f64 {
        self.image_lo - self.slope() * self.from
    }

    pub fn reverses(&self) -> bool {
        self.to_node < self.from_node
    }

    /// Node-index interval `[min, max]` of the domain `I'_i`.
    pub fn domain_nodes(&self) -> (usize, usize) {
        (self.from_node.min(self.to_node), self.from_node.max(self.to_node))
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.from.min(self.to), self.from.max(self.to))
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        let t = (x - self.from) / (self.to - self.from);
        (1.0 - t) * self.image_lo + t * self.image_hi
    }

    #[inline]
    pub fn invert(&self, x: f64) -> f64 {
        let t = (x - self.image_lo) / (self.image_hi - self.image_lo);
        (1.0 - t) * self.from + t * self.to
    }

    /// Fraction `t ∈ [0,1]` of `x` along `I'_i` from `x'_{i-1}` to `x'_i`.
    #[inline]
    pub fn domain_fraction(&self, x: f64) -> f64 {
        (x - self.from) / (self.to - self.from)
    }

    /// Image node index of a domain endpoint node.
    pub fn image_node_of(&self, node: usize, cell_index: usize) -> Option<usize> {
        if node == self.from_node {
            Some(cell_index - 1)
        } else if node == self.to_node {
            Some(cell_index)
        } else {
            None
        }
    }
}

/// Domain-address sequences and the contractions they determine.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AddressMaps {
    xprime_idx: Vec<usize>,
    yprime_idx: Vec<usize>,
    u: Vec<AxisMap>,
    v: Vec<AxisMap>,
    zprime: NodeTable,
}

impl AddressMaps {
    /// Builds `u_i`, `v_j` from `x'_i = x_{xprime_idx[i]}` and
    /// `y'_j = y_{yprime_idx[j]}` and tabulates `z'_ij`.
    pub fn new(data: &InterpolationData, xprime_idx: &[usize], yprime_idx: &[usize]) -> Result<Self, GridError> {
        let u = build_axis(Axis::X, data.x(), xprime_idx)?;
        let v = build_axis(Axis::Y, data.y(), yprime_idx)?;
        let mut zprime = NodeTable::filled(data.n() + 1, data.m() + 1, 0.0);
        for (i, &p) in xprime_idx.iter().enumerate() {
            for (j, &q) in yprime_idx.iter().enumerate() {
                zprime.set(i, j, data.z(p, q));
            }
        }
        Ok(Self {
            xprime_idx: xprime_idx.to_vec(),
            yprime_idx: yprime_idx.to_vec(),
            u,
            v,
            zprime,
        })
    }

    pub fn xprime_idx(&self) -> &[usize] {
        &self.xprime_idx
    }

    pub fn yprime_idx(&self) -> &[usize] {
        &self.yprime_idx
    }

    pub fn prime_idx(&self, axis: Axis) -> &[usize] {
        match axis {
            Axis::X => &self.xprime_idx,
            Axis::Y => &self.yprime_idx,
        }
    }

    /// `u_i`, for `1 <= i <= N`.
    #[inline]
    pub fn u(&self, i: usize) -> &AxisMap {
        &self.u[i - 1]
    }

    /// `v_j`, for `1 <= j <= M`.
    #[inline]
    pub fn v(&self, j: usize) -> &AxisMap {
        &self.v[j - 1]
    }

    /// `z'_ij = z_{p_i, q_j}`.
    #[inline]
    pub fn zprime(&self, i: usize, j: usize) -> f64 {
        self.zprime.get(i, j)
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn m(&self) -> usize {
        self.v.len()
    }

    /// Node-index rectangle of `D'_ij`.
    pub fn domain_rect(&self, cell: Cell) -> IndexRect {
        let (x0, x1) = self.u(cell.i).domain_nodes();
        let (y0, y1) = self.v(cell.j).domain_nodes();
        IndexRect { x0, x1, y0, y1 }
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let m = self.m();
        (1..=self.n()).flat_map(move |i| (1..=m).map(move |j| Cell::new(i, j)))
    }
}

fn build_axis(axis: Axis, nodes: &[f64], idx: &[usize]) -> Result<Vec<AxisMap>, GridError> {
    let cells = nodes.len() - 1;
    if idx.len() != nodes.len() {
        return Err(GridError::ShapeMismatch {
            what: match axis {
                Axis::X => "xprime_idx length",
                Axis::Y => "yprime_idx length",
            },
            expected: nodes.len(),
            found: idx.len(),
        });
    }
    if let Some((index, &value)) = idx.iter().enumerate().find(|(_, &p)| p > cells) {
        return Err(GridError::IndexOutOfRange { axis, index, value });
    }
    (1..=cells)
        .map(|i| {
            let (a, b) = (idx[i - 1], idx[i]);
            if (nodes[a] - nodes[b]).abs() <= nodes[i] - nodes[i - 1] {
                return Err(GridError::ExpansionViolation { axis, index: i });
            }
            Ok(AxisMap {
                from_node: a,
                to_node: b,
                from: nodes[a],
                to: nodes[b],
                image_lo: nodes[i - 1],
                image_hi: nodes[i],
            })
        })
        .collect()
}

/// One failed homogeneity condition.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HomogeneityFailure {
    NotSquare { n: usize, m: usize },
    NonUniformNode { axis: Axis, index: usize, value: f64 },
    RatioMismatch { axis: Axis, index: usize, ratio: f64 },
    OverlappingDomains { first: Cell, second: Cell },
}

impl fmt::Display for HomogeneityFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NotSquare { n, m } => write!(f, "grid is {n}x{m}, expected square"),
            Self::NonUniformNode { axis, index, value } => {
                write!(f, "{axis}_{index} = {value} is not on the uniform grid")
            }
            Self::RatioMismatch { axis, index, ratio } => {
                write!(f, "domain/cell length ratio along {axis} for map {index} is {ratio}")
            }
            Self::OverlappingDomains { first, second } => {
                write!(f, "domains of cells {first} and {second} overlap without coinciding")
            }
        }
    }
}

/// Outcome of the homogeneity check required by sampling and dimension theory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HomogeneityCertificate {
    pub k: usize,
    pub uniform_spacing: bool,
    pub ratio: bool,
    pub domain_overlap: bool,
    pub failures: Vec<HomogeneityFailure>,
    /// Distinct domains `D'_ij`, sorted.
    pub domains: Vec<IndexRect>,
}

impl HomogeneityCertificate {
    pub fn passed(&self) -> bool {
        self.uniform_spacing && self.ratio && self.domain_overlap
    }
}

const UNIFORM_NODE_TOL: f64 = 1e-12;

pub fn check_homogeneity(data: &InterpolationData, maps: &AddressMaps, k: usize) -> HomogeneityCertificate {
    let mut failures = Vec::new();
    let (n, m) = (data.n(), data.m());

    let mut uniform_spacing = true;
    if n != m {
        uniform_spacing = false;
        failures.push(HomogeneityFailure::NotSquare { n, m });
    }
    for axis in [Axis::X, Axis::Y] {
        let nodes = data.nodes(axis);
        let cells = nodes.len() - 1;
        for (index, &value) in nodes.iter().enumerate() {
            if (value - index as f64 / cells as f64).abs() > UNIFORM_NODE_TOL {
                uniform_spacing = false;
                failures.push(HomogeneityFailure::NonUniformNode { axis, index, value });
            }
        }
    }

    let mut ratio = k >= 2;
    for axis in [Axis::X, Axis::Y] {
        let nodes = data.nodes(axis);
        let idx = maps.prime_idx(axis);
        for i in 1..nodes.len() {
            let r = (nodes[idx[i]] - nodes[idx[i - 1]]).abs() / (nodes[i] - nodes[i - 1]);
            let index_ratio = idx[i].abs_diff(idx[i - 1]);
            // On a uniform grid the ratio is the node-index gap; elsewhere fall back to lengths.
            let ok = if uniform_spacing {
                index_ratio == k
            } else {
                (r - k as f64).abs() <= 1e-9
            };
            if !ok {
                ratio = false;
                failures.push(HomogeneityFailure::RatioMismatch { axis, index: i, ratio: r });
            }
        }
    }

    let cells: Vec<Cell> = maps.cells().collect();
    let rects: Vec<IndexRect> = cells.iter().map(|&c| maps.domain_rect(c)).collect();
    let mut domain_overlap = true;
    for a in 0..rects.len() {
        for b in a + 1..rects.len() {
            if rects[a] != rects[b] && rects[a].interiors_overlap(&rects[b]) {
                domain_overlap = false;
                failures.push(HomogeneityFailure::OverlappingDomains {
                    first: cells[a],
                    second: cells[b],
                });
            }
        }
    }
    let domains: Vec<IndexRect> = rects.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();

    HomogeneityCertificate {
        k,
        uniform_spacing,
        ratio,
        domain_overlap,
        failures,
        domains,
    }
}

/// The refinement ratio `K` suggested by the first x map, if the grid is
/// homogeneous with respect to it.
pub fn infer_ratio(data: &InterpolationData, maps: &AddressMaps) -> Option<usize> {
    let idx = maps.xprime_idx();
    let k = idx[1].abs_diff(idx[0]);
    check_homogeneity(data, maps, k).passed().then_some(k)
}

/// Directed edges `(i,j) → (k,ℓ)` with `D_kℓ ⊂ D'_ij`, grouped by source cell
/// in row-major order.
pub fn cell_dependency_edges(maps: &AddressMaps) -> Vec<(Cell, Cell)> {
    maps.cells()
        .flat_map(|src| {
            let rect = maps.domain_rect(src);
            rect.cells().map(move |dst| (src, dst)).collect::<Vec<_>>()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::example;

    fn example_data() -> InterpolationData {
        InterpolationData::uniform(4, 4, &example::heights()).unwrap()
    }

    fn example_maps() -> AddressMaps {
        AddressMaps::new(&example_data(), &example::XPRIME_IDX, &example::YPRIME_IDX).unwrap()
    }

    #[test]
    fn zero_heights_are_valid() {
        let z = vec![vec![0.0; 3]; 3];
        let data = InterpolationData::uniform(2, 2, &z).unwrap();
        assert!(data.cells().all(|c| data.z(c.i, c.j) == 0.0));
    }

    #[test]
    fn rejects_non_monotone_nodes() {
        let z = vec![vec![0.0; 4]; 4];
        let err = InterpolationData::new(&[0.0, 0.5, 0.25, 1.0], &[0.0, 0.3, 0.6, 1.0], &z).unwrap_err();
        assert_eq!(err, GridError::NonMonotoneNodes { axis: Axis::X, index: 2 });
    }

    #[test]
    fn rejects_shape_and_non_finite() {
        let short = vec![vec![0.0; 3]; 2];
        assert!(matches!(
            InterpolationData::uniform(2, 2, &short),
            Err(GridError::ShapeMismatch { .. })
        ));
        let mut z = vec![vec![0.0; 3]; 3];
        z[1][2] = f64::NAN;
        assert_eq!(
            InterpolationData::uniform(2, 2, &z).unwrap_err(),
            GridError::NonFiniteHeight { i: 1, j: 2 }
        );
    }

    #[test]
    fn normalizes_to_unit_square() {
        let z = vec![vec![0.0; 3]; 3];
        let data = InterpolationData::new(&[2.0, 3.0, 6.0], &[-1.0, 0.0, 1.0], &z).unwrap();
        assert_eq!(data.x(), &[0.0, 0.25, 1.0]);
        assert_eq!(data.y(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn example_maps_hit_their_endpoints() {
        let data = example_data();
        let maps = example_maps();
        let x = data.x();
        assert_eq!(maps.u(2).apply(x[0]), x[2]);
        assert_eq!(maps.u(3).apply(x[0]), x[2]);
        assert_eq!(maps.u(1).apply(x[2]), x[1]);
        assert_eq!(maps.u(2).apply(x[2]), x[1]);
        assert_eq!(maps.u(1).apply(x[0]), x[0]);
        let y = data.y();
        assert_eq!(maps.v(1).apply(y[2]), y[0]);
        assert_eq!(maps.v(1).apply(y[4]), y[1]);
        assert_eq!(maps.v(2).apply(y[4]), y[1]);
        assert_eq!(maps.v(2).apply(y[2]), y[2]);
        assert_eq!(maps.v(3).apply(y[2]), y[2]);
    }

    #[test]
    fn shared_endpoints_are_exact() {
        let data = example_data();
        let maps = example_maps();
        for i in 1..4 {
            let xp = data.x()[maps.xprime_idx()[i]];
            assert_eq!(maps.u(i).apply(xp), data.x()[i]);
            assert_eq!(maps.u(i + 1).apply(xp), data.x()[i]);
            let yp = data.y()[maps.yprime_idx()[i]];
            assert_eq!(maps.v(i).apply(yp), data.y()[i]);
            assert_eq!(maps.v(i + 1).apply(yp), data.y()[i]);
        }
    }

    #[test]
    fn two_cell_maps_and_orientation() {
        let z = vec![vec![0.0; 3]; 3];
        let data = InterpolationData::uniform(2, 2, &z).unwrap();
        let maps = AddressMaps::new(&data, &[0, 2, 0], &[0, 2, 0]).unwrap();
        let (u1, u2) = (maps.u(1), maps.u(2));
        assert_eq!((u1.slope(), u1.offset()), (0.5, 0.0));
        assert_eq!((u2.slope(), u2.offset()), (-0.5, 1.0));
        assert!(u2.reverses() && !u1.reverses());
        for x in [0.0, 0.3, 0.7, 1.0] {
            assert!((u1.apply(x) - x / 2.0).abs() < 1e-15);
            assert!((u2.apply(x) - (1.0 - x / 2.0)).abs() < 1e-15);
            assert!((u2.invert(u2.apply(x)) - x).abs() < 1e-15);
        }
    }

    #[test]
    fn expansion_violation_detected() {
        let z = vec![vec![0.0; 5]; 5];
        let data = InterpolationData::uniform(4, 4, &z).unwrap();
        let err = AddressMaps::new(&data, &[0, 1, 2, 3, 4], &[0, 2, 0, 2, 0]).unwrap_err();
        assert_eq!(err, GridError::ExpansionViolation { axis: Axis::X, index: 1 });
        let err = AddressMaps::new(&data, &[0, 2, 0, 2, 9], &[0, 2, 0, 2, 0]).unwrap_err();
        assert_eq!(
            err,
            GridError::IndexOutOfRange {
                axis: Axis::X,
                index: 4,
                value: 9
            }
        );
    }

    #[test]
    fn zprime_is_addressed_height() {
        let data = example_data();
        let maps = example_maps();
        for i in 0..=4 {
            for j in 0..=4 {
                let (p, q) = (example::XPRIME_IDX[i], example::YPRIME_IDX[j]);
                assert_eq!(maps.zprime(i, j), data.z(p, q));
            }
        }
    }

    #[test]
    fn example_example_is_homogeneous() {
        let cert = check_homogeneity(&example_data(), &example_maps(), 2);
        assert!(cert.passed(), "{:?}", cert.failures);
        let expected = vec![
            IndexRect { x0: 0, x1: 2, y0: 0, y1: 2 },
            IndexRect { x0: 0, x1: 2, y0: 2, y1: 4 },
        ];
        assert_eq!(cert.domains, expected);
        assert_eq!(infer_ratio(&example_data(), &example_maps()), Some(2));
        assert!(!check_homogeneity(&example_data(), &example_maps(), 3).passed());
    }

    #[test]
    fn full_square_domains_are_homogeneous() {
        let z = vec![vec![1.0; 4]; 4];
        let data = InterpolationData::uniform(3, 3, &z).unwrap();
        let maps = AddressMaps::new(&data, &[0, 3, 0, 3], &[3, 0, 3, 0]).unwrap();
        let cert = check_homogeneity(&data, &maps, 3);
        assert!(cert.passed());
        assert_eq!(cert.domains, vec![IndexRect { x0: 0, x1: 3, y0: 0, y1: 3 }]);
        let edges = cell_dependency_edges(&maps);
        assert_eq!(edges.len(), 81);
    }

    #[test]
    fn nonuniform_nodes_fail_spacing() {
        let z = vec![vec![0.0; 3]; 3];
        let data = InterpolationData::new(&[0.0, 0.3, 1.0], &[0.0, 0.5, 1.0], &z).unwrap();
        let maps = AddressMaps::new(&data, &[0, 2, 0], &[0, 2, 0]).unwrap();
        let cert = check_homogeneity(&data, &maps, 2);
        assert!(!cert.uniform_spacing);
        assert!(!cert.passed());
        assert!(cert
            .failures
            .iter()
            .any(|f| matches!(f, HomogeneityFailure::NonUniformNode { axis: Axis::X, index: 1, .. })));
    }

    #[test]
    fn overlapping_domains_fail() {
        let z = vec![vec![0.0; 5]; 5];
        let data = InterpolationData::uniform(4, 4, &z).unwrap();
        // With a common index gap K all x-domains share a residue mod K, so
        // partial overlaps need a ratio failure too.
        let maps = AddressMaps::new(&data, &[0, 2, 4, 1, 4], &[0, 2, 0, 2, 0]).unwrap();
        let cert = check_homogeneity(&data, &maps, 2);
        assert!(cert.uniform_spacing);
        assert!(!cert.ratio);
        assert!(!cert.domain_overlap);
        assert!(cert.failures.iter().any(|f| matches!(
            f,
            HomogeneityFailure::OverlappingDomains { first, second }
                if *first == Cell::new(1, 1) && *second == Cell::new(3, 1)
        )));
    }

    #[test]
    fn example_dependency_edges() {
        let maps = example_maps();
        let edges = cell_dependency_edges(&maps);
        assert_eq!(edges.len(), 64);
        let from_11: Vec<Cell> = edges.iter().filter(|(s, _)| *s == Cell::new(1, 1)).map(|&(_, d)| d).collect();
        // Oracle: cells whose node ranges sit inside [x_0,x_2]x[y_2,y_4].
        let expected: Vec<Cell> = (1..=4)
            .flat_map(|k| (1..=4).map(move |l| Cell::new(k, l)))
            .filter(|c| c.i >= 1 && c.i <= 2 && c.j >= 3 && c.j <= 4)
            .collect();
        assert_eq!(from_11, expected);
        for c in maps.cells() {
            assert_eq!(edges.iter().filter(|(s, _)| *s == c).count(), 4);
        }
    }
}
