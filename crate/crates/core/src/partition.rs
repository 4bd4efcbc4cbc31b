//! Partitions of the square into unions of cells, compatibility, steadiness
//! and the uniform-sum transfer matrix.
//!
//! Parts are indexed from 0 in this API; diagnostics print them 1-based.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::bilinear::{BilinearRfis, Field, ScalingFactors};
use crate::error::{PartitionError, UniformSumError};
use crate::grid::{AddressMaps, Cell, IndexRect};

/// Absolute tolerance for corner-sum agreement.
pub const UNIFORM_SUM_TOL: f64 = 1e-9;

/// A partition `{B_r}` stored as cell sets `Λ_r`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Partition {
    parts: Vec<BTreeSet<Cell>>,
    owner: BTreeMap<Cell, usize>,
    n: usize,
    m: usize,
}

impl Partition {
    pub fn new(parts: &[Vec<Cell>], n: usize, m: usize) -> Result<Self, PartitionError> {
        let mut owner = BTreeMap::new();
        let mut sets = Vec::with_capacity(parts.len());
        for (r, part) in parts.iter().enumerate() {
            if part.is_empty() {
                return Err(PartitionError::EmptyPart { part: r + 1 });
            }
            let mut set = BTreeSet::new();
            for &cell in part {
                if cell.i == 0 || cell.j == 0 || cell.i > n || cell.j > m {
                    return Err(PartitionError::CellOutOfRange(cell));
                }
                if owner.insert(cell, r).is_some() {
                    return Err(PartitionError::DuplicateCell(cell));
                }
                set.insert(cell);
            }
            sets.push(set);
        }
        for i in 1..=n {
            for j in 1..=m {
                if !owner.contains_key(&Cell::new(i, j)) {
                    return Err(PartitionError::UncoveredCell(Cell::new(i, j)));
                }
            }
        }
        Ok(Self {
            parts: sets,
            owner,
            n,
            m,
        })
    }

    /// The one-part partition `{[0,1]²}`.
    pub fn whole(n: usize, m: usize) -> Self {
        let cells: Vec<Cell> = (1..=n).flat_map(|i| (1..=m).map(move |j| Cell::new(i, j))).collect();
        Self::new(&[cells], n, m).expect("whole square is a partition")
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// `Λ_r`.
    pub fn part(&self, r: usize) -> &BTreeSet<Cell> {
        &self.parts[r]
    }

    pub fn parts(&self) -> &[BTreeSet<Cell>] {
        &self.parts
    }

    pub fn owner(&self, cell: Cell) -> usize {
        self.owner[&cell]
    }

    /// The part containing every cell of `rect`, if there is one.
    pub fn part_containing(&self, rect: &IndexRect) -> Option<usize> {
        let mut cells = rect.cells();
        let first = self.owner(cells.next()?);
        cells.all(|c| self.owner(c) == first).then_some(first)
    }

    /// `Λ'_t = {(i,j) : D'_ij ⊂ B_t}`.
    pub fn lambda_prime(&self, maps: &AddressMaps, t: usize) -> BTreeSet<Cell> {
        maps.cells()
            .filter(|&c| self.part_containing(&maps.domain_rect(c)) == Some(t))
            .collect()
    }

    /// `Λ_r ∩ Λ'_t`.
    pub fn intersection(&self, maps: &AddressMaps, r: usize, t: usize) -> BTreeSet<Cell> {
        self.parts[r]
            .iter()
            .copied()
            .filter(|&c| self.part_containing(&maps.domain_rect(c)) == Some(t))
            .collect()
    }

    /// `Λ_r(α,β)` for every domain rectangle met by `Λ_r ∩ Λ'_t`, keyed by
    /// `(α, β)`.
    pub fn lambda_blocks(&self, maps: &AddressMaps, r: usize, t: usize) -> BTreeMap<(usize, usize), Vec<Cell>> {
        let mut blocks: BTreeMap<(usize, usize), Vec<Cell>> = BTreeMap::new();
        for cell in self.intersection(maps, r, t) {
            let rect = maps.domain_rect(cell);
            blocks.entry((rect.x0, rect.y0)).or_default().push(cell);
        }
        blocks
    }

    pub fn to_cell_lists(&self) -> Vec<Vec<Cell>> {
        self.parts.iter().map(|p| p.iter().copied().collect()).collect()
    }

    pub fn grid_size(&self) -> (usize, usize) {
        (self.n, self.m)
    }
}

/// One failed compatibility condition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CompatibilityViolation {
    /// `D'_ij` meets more than one part.
    DomainSplit { cell: Cell, parts: Vec<usize> },
    /// `B_t` differs from the union of the domains `D'_kℓ`, `(k,ℓ) ∈ Λ_r ∩ Λ'_t`.
    CoverMismatch { r: usize, t: usize, missing: Vec<Cell> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CompatibilityReport {
    pub violations: Vec<CompatibilityViolation>,
    /// Pairs `(r, t)` with `Λ_r ∩ Λ'_t ≠ ∅`, 0-based, sorted.
    pub intersections: Vec<(usize, usize)>,
}

impl CompatibilityReport {
    pub fn compatible(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn check_compatible(partition: &Partition, maps: &AddressMaps) -> CompatibilityReport {
    let mut violations = Vec::new();
    for cell in maps.cells() {
        let rect = maps.domain_rect(cell);
        if partition.part_containing(&rect).is_none() {
            let parts: BTreeSet<usize> = rect.cells().map(|c| partition.owner(c)).collect();
            violations.push(CompatibilityViolation::DomainSplit {
                cell,
                parts: parts.into_iter().collect(),
            });
        }
    }
    let mut intersections = Vec::new();
    for r in 0..partition.len() {
        for t in 0..partition.len() {
            let common = partition.intersection(maps, r, t);
            if common.is_empty() {
                continue;
            }
            intersections.push((r, t));
            let covered: BTreeSet<Cell> = common.iter().flat_map(|&c| maps.domain_rect(c).cells()).collect();
            if covered != *partition.part(t) {
                violations.push(CompatibilityViolation::CoverMismatch {
                    r,
                    t,
                    missing: partition.part(t).difference(&covered).copied().collect(),
                });
            }
        }
    }
    CompatibilityReport {
        violations,
        intersections,
    }
}

/// Cells whose four corner factors do not share a sign.
pub fn check_steady(s: &ScalingFactors) -> Vec<Cell> {
    let table = s.table();
    let mut offending = Vec::new();
    for i in 1..table.rows() {
        for j in 1..table.cols() {
            let corners = s.corners(Cell::new(i, j));
            let nonneg = corners.iter().all(|&v| v >= 0.0);
            let nonpos = corners.iter().all(|&v| v <= 0.0);
            if !(nonneg || nonpos) {
                offending.push(Cell::new(i, j));
            }
        }
    }
    offending
}

/// Nonnegative square matrix `G = (γ_rt)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransferMatrix {
    rows: Vec<Vec<f64>>,
}

impl TransferMatrix {
    /// Wraps a square matrix; entries are validated where they are consumed.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        assert!(rows.iter().all(|r| r.len() == rows.len()), "transfer matrix must be square");
        Self { rows }
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    #[inline]
    pub fn get(&self, r: usize, t: usize) -> f64 {
        self.rows[r][t]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// `G|_V` for an index set `V`, in the given order.
    pub fn submatrix(&self, indices: &[usize]) -> Vec<Vec<f64>> {
        indices
            .iter()
            .map(|&r| indices.iter().map(|&t| self.rows[r][t]).collect())
            .collect()
    }
}

/// The four corner sums of one block `Λ_r(α,β)`, corners in the order
/// `(α,β), (α,β+K), (α+K,β), (α+K,β+K)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CornerSums {
    pub r: usize,
    pub t: usize,
    pub alpha: usize,
    pub beta: usize,
    pub cells: Vec<Cell>,
    pub corners: [(usize, usize); 4],
    pub sums: [f64; 4],
}

/// Every corner sum for every `(r, t, α, β)` with `Λ_r ∩ Λ'_t ≠ ∅`.
///
/// `|S(u_i(x_c), v_j(y_c))|` is the factor at the image node of the corner,
/// so each sum is a sum of `|s_pq|`.
pub fn corner_sums(rfis: &BilinearRfis, partition: &Partition) -> Vec<CornerSums> {
    let maps = rfis.maps();
    let mut out = Vec::new();
    for r in 0..partition.len() {
        for t in 0..partition.len() {
            for ((alpha, beta), cells) in partition.lambda_blocks(maps, r, t) {
                let rect = maps.domain_rect(cells[0]);
                let corners = [(rect.x0, rect.y0), (rect.x0, rect.y1), (rect.x1, rect.y0), (rect.x1, rect.y1)];
                let mut sums = [0.0; 4];
                for (sum, &(p, q)) in sums.iter_mut().zip(&corners) {
                    for &cell in &cells {
                        let a = maps.u(cell.i).image_node_of(p, cell.i).expect("corner is a domain endpoint");
                        let b = maps.v(cell.j).image_node_of(q, cell.j).expect("corner is a domain endpoint");
                        *sum += rfis.factors().get(a, b).abs();
                    }
                }
                out.push(CornerSums {
                    r,
                    t,
                    alpha,
                    beta,
                    cells,
                    corners,
                    sums,
                });
            }
        }
    }
    out
}

/// Extracts `G` after checking compatibility, steadiness and uniform sums.
pub fn compute_uniform_sums(rfis: &BilinearRfis, partition: &Partition) -> Result<TransferMatrix, UniformSumError> {
    let k = rfis.ratio().ok_or(UniformSumError::NotHomogeneous)?;
    if !check_compatible(partition, rfis.maps()).compatible() {
        return Err(UniformSumError::NotCompatible);
    }
    let unsteady = check_steady(rfis.factors());
    if !unsteady.is_empty() {
        return Err(UniformSumError::NotSteady(unsteady));
    }
    let size = partition.len();
    let mut rows = vec![vec![0.0; size]; size];
    let mut expected: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for block in corner_sums(rfis, partition) {
        let target = *expected.entry((block.r, block.t)).or_insert(block.sums[0]);
        for (&value, &corner) in block.sums.iter().zip(&block.corners) {
            if (value - target).abs() > UNIFORM_SUM_TOL {
                return Err(UniformSumError::UniformSumViolation {
                    r: block.r,
                    t: block.t,
                    alpha: block.alpha,
                    beta: block.beta,
                    k,
                    corner,
                    value,
                    expected: target,
                });
            }
        }
        rows[block.r][block.t] = target;
    }
    Ok(TransferMatrix { rows })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InteriorUniformityReport {
    pub blocks: usize,
    pub samples: usize,
    pub max_deviation: f64,
    pub worst: Option<(usize, usize, usize, usize)>,
}

/// Samples `Σ_{Λ_r(α,β)} |S(u_i(x), v_j(y))|` on a `samples × samples`
/// interior lattice of each domain and compares with `γ_rt`.
pub fn verify_interior_uniformity(
    rfis: &BilinearRfis,
    partition: &Partition,
    g: &TransferMatrix,
    samples: usize,
) -> InteriorUniformityReport {
    let maps = rfis.maps();
    let mut report = InteriorUniformityReport {
        blocks: 0,
        samples: 0,
        max_deviation: 0.0,
        worst: None,
    };
    for block in corner_sums(rfis, partition) {
        report.blocks += 1;
        let (x0, x1) = (rfis.data().x()[block.corners[0].0], rfis.data().x()[block.corners[3].0]);
        let (y0, y1) = (rfis.data().y()[block.corners[0].1], rfis.data().y()[block.corners[3].1]);
        let gamma = g.get(block.r, block.t);
        for a in 1..=samples {
            let x = x0 + (x1 - x0) * a as f64 / (samples + 1) as f64;
            for b in 1..=samples {
                let y = y0 + (y1 - y0) * b as f64 / (samples + 1) as f64;
                let sum: f64 = block
                    .cells
                    .iter()
                    .map(|c| {
                        rfis.eval_field(Field::S, maps.u(c.i).apply(x), maps.v(c.j).apply(y))
                            .expect("image point in the square")
                            .abs()
                    })
                    .sum();
                report.samples += 1;
                let deviation = (sum - gamma).abs();
                if deviation > report.max_deviation {
                    report.max_deviation = deviation;
                    report.worst = Some((block.r, block.t, block.alpha, block.beta));
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::example;

    fn build(s: &[Vec<f64>]) -> BilinearRfis {
        BilinearRfis::uniform(&example::heights(), s, &example::XPRIME_IDX, &example::YPRIME_IDX).unwrap()
    }

    fn example_partition() -> Partition {
        Partition::new(&example::partition_cells(), 4, 4).unwrap()
    }

    fn strips(n: usize) -> Partition {
        let parts: Vec<Vec<Cell>> = (1..=n).map(|i| (1..=n).map(|j| Cell::new(i, j)).collect()).collect();
        Partition::new(&parts, n, n).unwrap()
    }

    #[test]
    fn partition_validation() {
        let mut parts = example::partition_cells();
        parts[2].pop();
        assert_eq!(Partition::new(&parts, 4, 4), Err(PartitionError::UncoveredCell(Cell::new(4, 4))));
        parts[2].push(Cell::new(1, 1));
        assert_eq!(Partition::new(&parts, 4, 4), Err(PartitionError::DuplicateCell(Cell::new(1, 1))));
        assert_eq!(
            Partition::new(&[vec![Cell::new(5, 1)]], 4, 4),
            Err(PartitionError::CellOutOfRange(Cell::new(5, 1)))
        );
        assert_eq!(Partition::new(&[vec![]], 4, 4), Err(PartitionError::EmptyPart { part: 1 }));
    }

    #[test]
    fn example_partition_is_compatible() {
        let rfis = build(&example::factors_corrected());
        let report = check_compatible(&example_partition(), rfis.maps());
        assert!(report.compatible(), "{report:?}");
        assert_eq!(report.intersections, vec![(0, 1), (1, 0), (2, 0), (2, 1)]);
    }

    #[test]
    fn whole_square_with_full_domains() {
        let z = vec![vec![0.0, 1.0, 0.5, 0.0]; 4];
        let rfis = BilinearRfis::uniform(&z, &vec![vec![0.3; 4]; 4], &[0, 3, 0, 3], &[3, 0, 3, 0]).unwrap();
        let whole = Partition::whole(3, 3);
        let report = check_compatible(&whole, rfis.maps());
        assert!(report.compatible());
        assert_eq!(report.intersections, vec![(0, 0)]);
        let g = compute_uniform_sums(&rfis, &whole).unwrap();
        assert!((g.get(0, 0) - 9.0 * 0.3).abs() < 1e-12);
    }

    #[test]
    fn column_strips_split_domains() {
        let rfis = build(&example::factors_corrected());
        let report = check_compatible(&strips(4), rfis.maps());
        assert!(!report.compatible());
        let split: Vec<Cell> = report
            .violations
            .iter()
            .filter_map(|v| match v {
                CompatibilityViolation::DomainSplit { cell, parts } => {
                    assert_eq!(parts, &vec![0, 1]);
                    Some(*cell)
                }
                _ => None,
            })
            .collect();
        assert_eq!(split.len(), 16);
    }

    #[test]
    fn halves_are_compatible() {
        let rfis = build(&example::factors_corrected());
        let left: Vec<Cell> = (1..=2).flat_map(|i| (1..=4).map(move |j| Cell::new(i, j))).collect();
        let right: Vec<Cell> = (3..=4).flat_map(|i| (1..=4).map(move |j| Cell::new(i, j))).collect();
        let halves = Partition::new(&[left, right], 4, 4).unwrap();
        let report = check_compatible(&halves, rfis.maps());
        assert!(report.compatible());
        assert_eq!(report.intersections, vec![(0, 0), (1, 0)]);
    }

    #[test]
    fn cover_mismatch_is_reported() {
        // Every domain sits in the three-quadrant part, but only two quadrants are domains.
        let rfis = build(&example::factors_corrected());
        let upper_right: Vec<Cell> = (3..=4).flat_map(|i| (3..=4).map(move |j| Cell::new(i, j))).collect();
        let rest: Vec<Cell> = rfis.data().cells().filter(|c| !upper_right.contains(c)).collect();
        let partition = Partition::new(&[rest, upper_right], 4, 4).unwrap();
        let report = check_compatible(&partition, rfis.maps());
        let lower_right: Vec<Cell> = (3..=4).flat_map(|i| (1..=2).map(move |j| Cell::new(i, j))).collect();
        assert_eq!(report.violations.len(), 2);
        assert_eq!(
            report.violations[0],
            CompatibilityViolation::CoverMismatch { r: 0, t: 0, missing: lower_right }
        );

        let top: Vec<Cell> = (1..=4).map(|i| Cell::new(i, 4)).collect();
        let bottom: Vec<Cell> = (1..=4).flat_map(|i| (1..=3).map(move |j| Cell::new(i, j))).collect();
        let rows = Partition::new(&[bottom, top], 4, 4).unwrap();
        let report = check_compatible(&rows, rfis.maps());
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, CompatibilityViolation::DomainSplit { .. })));
    }

    #[test]
    fn steadiness() {
        let rfis = build(&example::factors_original());
        assert!(check_steady(rfis.factors()).is_empty());
        let zero = build(&vec![vec![0.0; 5]; 5]);
        assert!(check_steady(zero.factors()).is_empty());
        let checker: Vec<Vec<f64>> = (0..5)
            .map(|p| (0..5).map(|q| if (p + q) % 2 == 0 { 0.5 } else { -0.5 }).collect())
            .collect();
        assert_eq!(check_steady(build(&checker).factors()).len(), 16);
    }

    #[test]
    fn corrected_gammas() {
        let g = compute_uniform_sums(&build(&example::factors_corrected()), &example_partition()).unwrap();
        let expected = [[0.0, 1.8, 0.0], [2.8, 0.0, 0.0], [1.2, 0.8, 0.0]];
        for r in 0..3 {
            for t in 0..3 {
                assert!((g.get(r, t) - expected[r][t]).abs() <= 1e-12, "({r},{t})");
            }
        }
    }

    #[test]
    fn original_matrix_violates_uniform_sums() {
        let err = compute_uniform_sums(&build(&example::factors_original()), &example_partition()).unwrap_err();
        match err {
            UniformSumError::UniformSumViolation {
                r,
                t,
                value,
                expected,
                corner,
                ..
            } => {
                assert_eq!((r, t), (0, 1));
                assert!((value - 2.0).abs() < 1e-12);
                assert!((expected - 1.8).abs() < 1e-12);
                assert_eq!(corner, (2, 2));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn corner_sums_match_hand_expressions() {
        let s = example::factors_original();
        let rfis = build(&s);
        let blocks = corner_sums(&rfis, &example_partition());
        let b = blocks.iter().find(|b| (b.r, b.t) == (0, 1)).unwrap();
        assert_eq!((b.alpha, b.beta), (0, 2));
        let a = |p: usize, q: usize| s[p][q].abs();
        let hand = [
            a(0, 0) + a(0, 2) + a(2, 0) + a(2, 2),
            2.0 * (a(0, 1) + a(2, 1)),
            2.0 * (a(1, 0) + a(1, 2)),
            4.0 * a(1, 1),
        ];
        for (got, want) in b.sums.iter().zip(hand) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_factors_give_zero_gammas() {
        let g = compute_uniform_sums(&build(&vec![vec![0.0; 5]; 5]), &example_partition()).unwrap();
        assert!(g.rows().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn requirements_are_checked() {
        let checker: Vec<Vec<f64>> = (0..5)
            .map(|p| (0..5).map(|q| if (p + q) % 2 == 0 { 0.5 } else { -0.5 }).collect())
            .collect();
        assert!(matches!(
            compute_uniform_sums(&build(&checker), &example_partition()),
            Err(UniformSumError::NotSteady(_))
        ));
        assert_eq!(
            compute_uniform_sums(&build(&example::factors_corrected()), &strips(4)),
            Err(UniformSumError::NotCompatible)
        );
    }

    #[test]
    fn interior_uniformity_on_corrected_example() {
        let rfis = build(&example::factors_corrected());
        let partition = example_partition();
        let g = compute_uniform_sums(&rfis, &partition).unwrap();
        let report = verify_interior_uniformity(&rfis, &partition, &g, 9);
        assert!(report.max_deviation <= 1e-12, "{report:?}");
        assert_eq!(report.samples, report.blocks * 81);
    }

    #[test]
    fn constant_factors_single_part() {
        let z = vec![vec![0.0, 1.0, 0.0]; 3];
        let rfis = BilinearRfis::uniform(&z, &vec![vec![0.5; 3]; 3], &[0, 2, 0], &[0, 2, 0]).unwrap();
        let whole = Partition::whole(2, 2);
        let g = compute_uniform_sums(&rfis, &whole).unwrap();
        assert_eq!(g.get(0, 0), 2.0);
        let report = verify_interior_uniformity(&rfis, &whole, &g, 9);
        assert!(report.max_deviation < 1e-12);
    }

    #[test]
    fn sign_mixed_factors_break_interior_uniformity() {
        // Every corner sum is 2.0, but |S| dips inside the mixed-sign cells.
        let z = vec![vec![0.0, 1.0, 0.0]; 3];
        let s: Vec<Vec<f64>> = (0..3)
            .map(|p| (0..3).map(|q| if (p + q) % 2 == 0 { 0.5 } else { -0.5 }).collect())
            .collect();
        let rfis = BilinearRfis::uniform(&z, &s, &[0, 2, 0], &[0, 2, 0]).unwrap();
        let whole = Partition::whole(2, 2);
        let sums = corner_sums(&rfis, &whole);
        assert!(sums[0].sums.iter().all(|&v| (v - 2.0).abs() < 1e-15));
        let g = TransferMatrix::from_rows(vec![vec![2.0]]);
        let report = verify_interior_uniformity(&rfis, &whole, &g, 9);
        assert!(report.max_deviation > 0.1, "{report:?}");
    }
}
