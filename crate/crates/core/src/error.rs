use thiserror::Error;

use crate::grid::{Axis, Cell, HomogeneityFailure};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("{axis} nodes are not strictly increasing at index {index}")]
    NonMonotoneNodes { axis: Axis, index: usize },
    #[error("{what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("height z[{i}][{j}] is not finite")]
    NonFiniteHeight { i: usize, j: usize },
    #[error("{axis} axis has {cells} cells, at least 2 required")]
    TooFewCells { axis: Axis, cells: usize },
    #[error("{axis}' domain {index} is not longer than its cell")]
    ExpansionViolation { axis: Axis, index: usize },
    #[error("{axis}prime_idx[{index}] = {value} is not a node index")]
    IndexOutOfRange { axis: Axis, index: usize, value: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RfisError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("scaling factor s[{i}][{j}] = {value} must satisfy |s| < 1")]
    FactorOutOfRange { i: usize, j: usize, value: f64 },
    #[error("point ({x}, {y}) is outside the evaluation domain")]
    OutOfDomain { x: f64, y: f64 },
    #[error("grid sampling requires the homogeneity conditions: {}", join(.0))]
    HomogeneityRequired(Vec<HomogeneityFailure>),
    #[error("start set for cell {0} is empty")]
    EmptyStartSet(Cell),
    #[error("node ({k}, {l}) at level {level} does not lie in cell {cell}")]
    NodeOutsideCell {
        k: usize,
        l: usize,
        level: u32,
        cell: Cell,
    },
    #[error("level {level} grid is too large to sample")]
    LevelTooLarge { level: u32 },
}

fn join(failures: &[HomogeneityFailure]) -> String {
    if failures.is_empty() {
        return "refinement ratio could not be inferred".to_string();
    }
    failures.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PartitionError {
    #[error("part {part} is empty")]
    EmptyPart { part: usize },
    #[error("cell {0} is not a grid cell")]
    CellOutOfRange(Cell),
    #[error("cell {0} appears in more than one part")]
    DuplicateCell(Cell),
    #[error("cell {0} is not covered by any part")]
    UncoveredCell(Cell),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UniformSumError {
    #[error("partition is not compatible with the cell domains")]
    NotCompatible,
    #[error("scaling factors are not steady on {} cell(s)", .0.len())]
    NotSteady(Vec<Cell>),
    #[error("grid sampling conditions fail; domains are not aligned blocks")]
    NotHomogeneous,
    #[error(
        "uniform sums violated at (r,t)=({},{}), domain corner ({},{}) of [x{a},x{}]x[y{b},y{}]: sum {value} != {expected}",
        .r + 1, .t + 1, .corner.0, .corner.1, .alpha + .k, .beta + .k, a = .alpha, b = .beta
    )]
    UniformSumViolation {
        /// 0-based part indices.
        r: usize,
        t: usize,
        alpha: usize,
        beta: usize,
        k: usize,
        /// Node indices of the offending domain corner.
        corner: (usize, usize),
        value: f64,
        expected: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("matrix is empty")]
    Empty,
    #[error("entry ({row},{col}) = {value} is negative or not finite")]
    NotNonnegative { row: usize, col: usize, value: f64 },
    #[error("power iteration did not converge in {iterations} iterations")]
    NoConvergence { iterations: usize },
}

/// Which assumption of the dimension formula failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    Homogeneity,
    Compatibility,
    Steadiness,
    UniformSums,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DimensionError {
    #[error("{hypothesis:?} hypothesis fails: {detail}")]
    HypothesisViolation { hypothesis: Hypothesis, detail: String },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("position recursion revisits part {0}")]
    CycleInPositionRecursion(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmpiricalError {
    #[error("surface levels do not line up: {0}")]
    LevelMismatch(String),
    #[error("oscillation vanishes at level {level}; no slope to fit")]
    DegenerateRegression { level: u32 },
    #[error("regression needs at least {required} levels, got {found}")]
    InsufficientLevels { required: usize, found: usize },
    #[error(transparent)]
    Rfis(#[from] RfisError),
}
