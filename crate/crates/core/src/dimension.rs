//! Box dimension of a bilinear RFIS from its transfer matrix.
//!
//! Parts are vertices of a directed graph with an edge `t → r` whenever
//! `γ_rt > 0`. Components are the strongly connected classes that carry a
//! cycle; the dimension is `1 + max(1, log ρ(G|_V) / log K)` over the
//! non-degenerate components.

use std::collections::VecDeque;

use serde::Serialize;

use crate::bilinear::BilinearRfis;
use crate::error::{DimensionError, Hypothesis, SpectralError, UniformSumError};
use crate::grid::{Cell, IndexRect};
use crate::partition::{check_compatible, check_steady, compute_uniform_sums, Partition, TransferMatrix};

const POWER_ITERATION_CAP: usize = 200_000;
const SPECTRAL_REL_TOL: f64 = 1e-12;
/// Distance from `ρ = K` at which the report carries a sensitivity warning.
pub const RHO_NEAR_K_TOL: f64 = 1e-9;

/// `reach[u][w]`: a path of length at least one from `u` to `w`, where
/// `u → w` iff `weight(u, w) > 0`.
fn transitive_closure(size: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<Vec<bool>> {
    let mut reach: Vec<Vec<bool>> = (0..size).map(|u| (0..size).map(|w| edge(u, w)).collect()).collect();
    for k in 0..size {
        for u in 0..size {
            if reach[u][k] {
                for w in 0..size {
                    if reach[k][w] {
                        reach[u][w] = true;
                    }
                }
            }
        }
    }
    reach
}

/// Mutually reachable classes that contain a cycle, each sorted, ordered by
/// smallest member.
fn cyclic_classes(reach: &[Vec<bool>]) -> Vec<Vec<usize>> {
    let size = reach.len();
    let mut assigned = vec![false; size];
    let mut classes = Vec::new();
    for r in 0..size {
        if assigned[r] || !reach[r][r] {
            continue;
        }
        let class: Vec<usize> = (r..size).filter(|&t| reach[r][t] && reach[t][r]).collect();
        for &t in &class {
            assigned[t] = true;
        }
        classes.push(class);
    }
    classes
}

fn graph_edge(g: &TransferMatrix) -> impl Fn(usize, usize) -> bool + '_ {
    move |u, w| g.get(w, u) > 0.0
}

/// Connected components of the part graph, 0-based.
pub fn connected_components(g: &TransferMatrix) -> Vec<Vec<usize>> {
    cyclic_classes(&transitive_closure(g.size(), graph_edge(g)))
}

/// Whether every part reaches every other part.
pub fn is_irreducible(g: &TransferMatrix) -> bool {
    let comps = connected_components(g);
    comps.len() == 1 && comps[0].len() == g.size()
}

fn validate(a: &[Vec<f64>]) -> Result<(), SpectralError> {
    if a.is_empty() {
        return Err(SpectralError::Empty);
    }
    for (row, values) in a.iter().enumerate() {
        assert_eq!(values.len(), a.len(), "matrix must be square");
        for (col, &value) in values.iter().enumerate() {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(SpectralError::NotNonnegative { row, col, value });
            }
        }
    }
    Ok(())
}

/// Spectral radius of a nonnegative square matrix.
///
/// Each irreducible diagonal block is handled by power iteration on `A + I`,
/// bracketing `ρ(A + I)` between the min and max Collatz–Wielandt ratios.
pub fn spectral_radius(a: &[Vec<f64>]) -> Result<f64, SpectralError> {
    validate(a)?;
    let reach = transitive_closure(a.len(), |u, w| a[u][w] > 0.0);
    let mut rho = 0.0_f64;
    for class in cyclic_classes(&reach) {
        let block: Vec<Vec<f64>> = class.iter().map(|&r| class.iter().map(|&t| a[r][t]).collect()).collect();
        rho = rho.max(irreducible_radius(&block)?);
    }
    Ok(rho)
}

fn irreducible_radius(a: &[Vec<f64>]) -> Result<f64, SpectralError> {
    let size = a.len();
    if size == 1 {
        return Ok(a[0][0]);
    }
    let mut v = vec![1.0; size];
    let mut w = vec![0.0; size];
    let (mut best_gap, mut stale) = (f64::INFINITY, 0);
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    for _ in 0..POWER_ITERATION_CAP {
        for (r, out) in w.iter_mut().enumerate() {
            *out = v[r] + a[r].iter().zip(&v).map(|(x, y)| x * y).sum::<f64>();
        }
        lo = f64::INFINITY;
        hi = 0.0_f64;
        for (wr, vr) in w.iter().zip(&v) {
            let ratio = wr / vr;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        let scale = w.iter().fold(0.0_f64, |m, &x| m.max(x));
        for (vr, wr) in v.iter_mut().zip(&w) {
            *vr = wr / scale;
        }
        let gap = hi - lo;
        if gap <= 4.0 * f64::EPSILON * hi {
            break;
        }
        if gap < best_gap {
            best_gap = gap;
            stale = 0;
        } else {
            stale += 1;
            if stale > 100 {
                break;
            }
        }
    }
    if hi - lo <= SPECTRAL_REL_TOL * hi {
        Ok(0.5 * (lo + hi) - 1.0)
    } else {
        Err(SpectralError::NoConvergence {
            iterations: POWER_ITERATION_CAP,
        })
    }
}

/// `P(r)`: 1 when no part outside the class of `r` has a path to `r`,
/// otherwise one more than the largest position among those parts.
pub fn positions(g: &TransferMatrix) -> Result<Vec<usize>, DimensionError> {
    let size = g.size();
    let reach = transitive_closure(size, graph_edge(g));
    let ancestors: Vec<Vec<usize>> = (0..size)
        .map(|r| {
            (0..size)
                .filter(|&t| reach[t][r] && !(reach[r][t] && reach[t][r]))
                .collect()
        })
        .collect();
    let mut memo: Vec<Option<usize>> = vec![None; size];
    let mut visiting = vec![false; size];
    fn visit(
        r: usize,
        ancestors: &[Vec<usize>],
        memo: &mut [Option<usize>],
        visiting: &mut [bool],
    ) -> Result<usize, DimensionError> {
        if let Some(p) = memo[r] {
            return Ok(p);
        }
        if visiting[r] {
            return Err(DimensionError::CycleInPositionRecursion(r));
        }
        visiting[r] = true;
        let mut best = 0;
        for &t in &ancestors[r] {
            best = best.max(visit(t, ancestors, memo, visiting)?);
        }
        visiting[r] = false;
        memo[r] = Some(best + 1);
        Ok(best + 1)
    }
    (0..size)
        .map(|r| visit(r, &ancestors, &mut memo, &mut visiting))
        .collect()
}

fn collinearity_tol(rfis: &BilinearRfis) -> f64 {
    1e-12 * rfis.data().heights().max_abs().max(1.0)
}

/// Whether the data points on every grid line through `rect` are collinear.
fn grid_lines_collinear(rfis: &BilinearRfis, rect: &IndexRect) -> bool {
    let data = rfis.data();
    let tol = collinearity_tol(rfis);
    let triple = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| {
        let lambda = (c.0 - b.0) / (c.0 - a.0);
        (b.1 - (lambda * a.1 + (1.0 - lambda) * c.1)).abs() <= tol
    };
    for p in rect.x0..=rect.x1 {
        for q in rect.y0..rect.y1.saturating_sub(1) {
            let pt = |q: usize| (data.y()[q], data.z(p, q));
            if !triple(pt(q), pt(q + 1), pt(q + 2)) {
                return false;
            }
        }
    }
    for q in rect.y0..=rect.y1 {
        for p in rect.x0..rect.x1.saturating_sub(1) {
            let pt = |p: usize| (data.x()[p], data.z(p, q));
            if !triple(pt(p), pt(p + 1), pt(p + 2)) {
                return false;
            }
        }
    }
    true
}

/// Whether `(k,ℓ)` itself has zero corner factors or data that is bilinear on
/// its domain.
pub fn locally_degenerate(rfis: &BilinearRfis, cell: Cell) -> bool {
    rfis.factors().corners(cell).iter().all(|&s| s == 0.0)
        || grid_lines_collinear(rfis, &rfis.maps().domain_rect(cell))
}

/// Degeneracy of every cell, row-major over `(i, j)`.
///
/// A cell is non-degenerate exactly when some cell in its ancestor closure
/// is not locally degenerate, so non-degeneracy spreads backwards along the
/// dependency edges from the locally non-degenerate cells.
pub fn degenerate_cells(rfis: &BilinearRfis) -> Vec<(Cell, bool)> {
    let maps = rfis.maps();
    let m = maps.m();
    let index = |c: Cell| (c.i - 1) * m + (c.j - 1);
    let cells: Vec<Cell> = maps.cells().collect();
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); cells.len()];
    for &src in &cells {
        for dst in maps.domain_rect(src).cells() {
            parents[index(dst)].push(index(src));
        }
    }
    let mut degenerate: Vec<bool> = cells.iter().map(|&c| locally_degenerate(rfis, c)).collect();
    let mut queue: VecDeque<usize> = (0..cells.len()).filter(|&c| !degenerate[c]).collect();
    while let Some(c) = queue.pop_front() {
        for &p in &parents[c] {
            if degenerate[p] {
                degenerate[p] = false;
                queue.push_back(p);
            }
        }
    }
    cells.into_iter().zip(degenerate).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DegeneracyFlags {
    /// Per part: every cell of `Λ_r` is degenerate.
    pub parts: Vec<bool>,
    /// Per component, in the order given.
    pub components: Vec<bool>,
}

pub fn component_degeneracy(
    components: &[Vec<usize>],
    partition: &Partition,
    degenerate: &[(Cell, bool)],
) -> DegeneracyFlags {
    let lookup: std::collections::BTreeMap<Cell, bool> = degenerate.iter().copied().collect();
    let parts: Vec<bool> = partition
        .parts()
        .iter()
        .map(|part| part.iter().all(|c| lookup[c]))
        .collect();
    let components = components.iter().map(|v| v.iter().all(|&r| parts[r])).collect();
    DegeneracyFlags { parts, components }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComponentInfo {
    /// Member parts, 0-based.
    pub parts: Vec<usize>,
    pub submatrix: Vec<Vec<f64>>,
    pub rho: f64,
    /// `log ρ / log K`.
    pub d: f64,
    pub degenerate: bool,
}

/// Classification available when `G` is irreducible.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IrreducibleCase {
    /// Non-degenerate and `ρ(G) > K`: dimension `1 + log ρ(G) / log K`.
    SpectralRadiusAboveRatio,
    /// Dimension 2.
    Two,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimensionReport {
    pub k: usize,
    pub transfer_matrix: TransferMatrix,
    pub components: Vec<ComponentInfo>,
    pub positions: Vec<usize>,
    pub part_degenerate: Vec<bool>,
    pub degenerate_cells: Vec<(Cell, bool)>,
    pub d_star: f64,
    pub dimension: f64,
    pub irreducible_case: Option<IrreducibleCase>,
    pub warnings: Vec<String>,
}

fn violation(hypothesis: Hypothesis, detail: impl Into<String>) -> DimensionError {
    DimensionError::HypothesisViolation {
        hypothesis,
        detail: detail.into(),
    }
}

/// `dim_B Γf = 1 + d*` with `d* = max(1, d_1, …)` over non-degenerate components.
pub fn theoretical_box_dimension(rfis: &BilinearRfis, partition: &Partition) -> Result<DimensionReport, DimensionError> {
    let k = match rfis.ratio() {
        Some(k) => k,
        None => {
            let failures = rfis.homogeneity().failures;
            let detail = if failures.is_empty() {
                "refinement ratio could not be inferred".to_string()
            } else {
                failures.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
            };
            return Err(violation(Hypothesis::Homogeneity, detail));
        }
    };
    let compat = check_compatible(partition, rfis.maps());
    if !compat.compatible() {
        return Err(violation(
            Hypothesis::Compatibility,
            format!("{} violation(s), first: {:?}", compat.violations.len(), compat.violations[0]),
        ));
    }
    let unsteady = check_steady(rfis.factors());
    if !unsteady.is_empty() {
        let cells: Vec<String> = unsteady.iter().map(ToString::to_string).collect();
        return Err(violation(Hypothesis::Steadiness, format!("mixed-sign cells {}", cells.join(" "))));
    }
    let g = compute_uniform_sums(rfis, partition).map_err(|e| match e {
        UniformSumError::NotHomogeneous => violation(Hypothesis::Homogeneity, e.to_string()),
        UniformSumError::NotCompatible => violation(Hypothesis::Compatibility, e.to_string()),
        UniformSumError::NotSteady(_) => violation(Hypothesis::Steadiness, e.to_string()),
        UniformSumError::UniformSumViolation { .. } => violation(Hypothesis::UniformSums, e.to_string()),
    })?;

    let comps = connected_components(&g);
    let degenerate = degenerate_cells(rfis);
    let flags = component_degeneracy(&comps, partition, &degenerate);
    let log_k = (k as f64).ln();
    let mut components = Vec::with_capacity(comps.len());
    let mut warnings = Vec::new();
    let mut d_star = 1.0_f64;
    for (parts, &is_degenerate) in comps.iter().zip(&flags.components) {
        let submatrix = g.submatrix(parts);
        let rho = spectral_radius(&submatrix)?;
        let d = rho.ln() / log_k;
        if !is_degenerate {
            d_star = d_star.max(d);
            if (rho - k as f64).abs() <= RHO_NEAR_K_TOL {
                let names: Vec<String> = parts.iter().map(|r| (r + 1).to_string()).collect();
                warnings.push(format!(
                    "component {{{}}} has spectral radius {rho} within {RHO_NEAR_K_TOL:e} of K = {k}; the dimension is sensitive here",
                    names.join(",")
                ));
            }
        }
        components.push(ComponentInfo {
            parts: parts.clone(),
            submatrix,
            rho,
            d,
            degenerate: is_degenerate,
        });
    }

    let irreducible_case = is_irreducible(&g).then(|| {
        let whole = &components[0];
        if !whole.degenerate && whole.rho > k as f64 {
            IrreducibleCase::SpectralRadiusAboveRatio
        } else {
            IrreducibleCase::Two
        }
    });

    Ok(DimensionReport {
        k,
        positions: positions(&g)?,
        transfer_matrix: g,
        components,
        part_degenerate: flags.parts,
        degenerate_cells: degenerate,
        d_star,
        dimension: 1.0 + d_star,
        irreducible_case,
        warnings,
    })
}
