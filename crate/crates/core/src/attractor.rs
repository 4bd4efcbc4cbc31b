//! Convergence of the recurrent set map to the graph of `f`.
//!
//! `(W(A))_ij = ∪ W_ij(A_kℓ)` over the cells `D_kℓ ⊂ D'_ij`. Iterates are
//! kept as exact points, thinned to one representative per sub-voxel. Each
//! point also carries the value of `f` at its `(x, y)`, mapped alongside it
//! by the same `F_ij`, which gives the z-deviation `Δ_n = sup |z − f(x,y)|`
//! without evaluating `f` off the grid.

use std::collections::{BTreeSet, HashMap, HashSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::bilinear::BilinearRfis;
use crate::error::RfisError;
use crate::grid::Cell;

/// Sub-voxels per voxel edge used when thinning iterates.
const THINNING: f64 = 1.0;

/// Initial tuple `A = (A_ij)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StartSet {
    /// The four corners of each cell lifted to height `z`.
    CellCorners { z: f64 },
    /// Exact graph points at the level-`level` nodes of each cell.
    Graph { level: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Point {
    x: f64,
    y: f64,
    z: f64,
    /// `f(x, y)`.
    f: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttractorReport {
    pub voxel_level: u32,
    pub voxel_size: f64,
    pub voxel_diagonal: f64,
    pub alpha: f64,
    /// Discrete Hausdorff distance to the graph voxels after `n` steps, `n = 0..=steps`.
    pub distances: Vec<f64>,
    /// Directed part: iterate voxels to their nearest graph voxel.
    pub to_graph: Vec<f64>,
    /// Directed part: graph voxels to their nearest iterate voxel.
    pub from_graph: Vec<f64>,
    /// `Δ_n`, `n = 0..=steps`.
    pub deviations: Vec<f64>,
    /// Retained points after each step.
    pub points: Vec<usize>,
}

impl AttractorReport {
    /// Distances never increase from step `from` on.
    pub fn nonincreasing_from(&self, from: usize) -> bool {
        self.first_increase(from).is_none()
    }

    /// First step `n > from` with `d_n > d_{n−1}`.
    pub fn first_increase(&self, from: usize) -> Option<usize> {
        (from + 1..self.distances.len()).find(|&n| self.distances[n] > self.distances[n - 1])
    }

    /// Final distance in voxel diagonals.
    pub fn final_in_diagonals(&self) -> Option<f64> {
        self.distances.last().map(|d| d / self.voxel_diagonal)
    }

    /// `Δ_n ≤ α Δ_{n−1} + slack` at every step.
    pub fn deviation_contracts(&self, slack: f64) -> bool {
        self.deviations.windows(2).all(|w| w[1] <= self.alpha * w[0] + slack)
    }
}

fn start_points(rfis: &BilinearRfis, start: StartSet) -> Result<Vec<Vec<Point>>, RfisError> {
    let data = rfis.data();
    let cells: Vec<Cell> = data.cells().collect();
    let sets: Vec<Vec<Point>> = match start {
        StartSet::CellCorners { z } => cells
            .iter()
            .map(|c| {
                [(c.i - 1, c.j - 1), (c.i, c.j - 1), (c.i - 1, c.j), (c.i, c.j)]
                    .iter()
                    .map(|&(p, q)| Point {
                        x: data.x()[p],
                        y: data.y()[q],
                        z,
                        f: data.z(p, q),
                    })
                    .collect()
            })
            .collect(),
        StartSet::Graph { level } => {
            let surface = rfis.sample_surface(level)?;
            let w = surface.per_cell();
            cells
                .iter()
                .map(|c| {
                    let mut pts = Vec::with_capacity((w + 1) * (w + 1));
                    for kx in (c.i - 1) * w..=c.i * w {
                        for ly in (c.j - 1) * w..=c.j * w {
                            let f = surface.get(kx, ly);
                            pts.push(Point {
                                x: surface.coord(kx),
                                y: surface.coord(ly),
                                z: f,
                                f,
                            });
                        }
                    }
                    pts
                })
                .collect()
        }
    };
    if let Some((cell, _)) = cells.iter().zip(&sets).find(|(_, s)| s.is_empty()) {
        return Err(RfisError::EmptyStartSet(*cell));
    }
    Ok(sets)
}

fn step(rfis: &BilinearRfis, sets: &[Vec<Point>], thin: f64) -> Vec<Vec<Point>> {
    let maps = rfis.maps();
    let m = rfis.m();
    let cells: Vec<Cell> = rfis.data().cells().collect();
    cells
        .par_iter()
        .map(|&cell| {
            let (u, v) = (maps.u(cell.i), maps.v(cell.j));
            let mut seen = HashSet::new();
            let mut out = Vec::new();
            for src in maps.domain_rect(cell).cells() {
                for p in &sets[(src.i - 1) * m + (src.j - 1)] {
                    let z = rfis.eval_f_map(cell, p.x, p.y, p.z).expect("source cell lies in the domain");
                    let f = rfis.eval_f_map(cell, p.x, p.y, p.f).expect("source cell lies in the domain");
                    let q = Point {
                        x: u.apply(p.x),
                        y: v.apply(p.y),
                        z,
                        f,
                    };
                    let key = ((q.x * thin).floor() as i64, (q.y * thin).floor() as i64, (q.z * thin).floor() as i64);
                    if seen.insert(key) {
                        out.push(q);
                    }
                }
            }
            out
        })
        .collect()
}

type Voxel = (i64, i64, i64);

/// Voxels grouped by `(x, y)` column with sorted heights.
struct ColumnIndex {
    columns: HashMap<(i64, i64), Vec<i64>>,
    /// Bounding box of the column keys.
    lo: (i64, i64),
    hi: (i64, i64),
}

impl ColumnIndex {
    fn new(voxels: &BTreeSet<Voxel>) -> Self {
        let mut columns: HashMap<(i64, i64), Vec<i64>> = HashMap::new();
        let (mut lo, mut hi) = ((i64::MAX, i64::MAX), (i64::MIN, i64::MIN));
        // BTreeSet order keeps each column sorted by height.
        for &(a, b, c) in voxels {
            columns.entry((a, b)).or_default().push(c);
            lo = (lo.0.min(a), lo.1.min(b));
            hi = (hi.0.max(a), hi.1.max(b));
        }
        Self { columns, lo, hi }
    }

    fn column_gap(&self, key: (i64, i64), c: i64) -> Option<i64> {
        let col = self.columns.get(&key)?;
        let at = col.partition_point(|&h| h < c);
        let above = col.get(at).map(|&h| h - c);
        let below = at.checked_sub(1).map(|i| c - col[i]);
        match (above, below) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, y) => x.or(y),
        }
    }

    /// Squared distance to the nearest voxel, searched in growing square rings.
    fn nearest_sq(&self, (a, b, c): Voxel) -> i64 {
        let mut best = i64::MAX;
        let reach = (a - self.lo.0)
            .abs()
            .max((self.hi.0 - a).abs())
            .max((b - self.lo.1).abs())
            .max((self.hi.1 - b).abs());
        let mut r = 0;
        while r <= reach && r * r < best {
            for da in -r..=r {
                let edge = da.abs() == r;
                let step = if edge { 1 } else { 2 * r.max(1) };
                let mut db = -r;
                while db <= r {
                    if let Some(dz) = self.column_gap((a + da, b + db), c) {
                        best = best.min(da * da + db * db + dz * dz);
                    }
                    db += step;
                }
            }
            r += 1;
        }
        best
    }
}

type Bounds = ([i64; 3], [i64; 3]);

fn bounds(voxels: &BTreeSet<Voxel>) -> Option<Bounds> {
    let mut it = voxels.iter();
    let &(a, b, c) = it.next()?;
    let (mut lo, mut hi) = ([a, b, c], [a, b, c]);
    for &(a, b, c) in it {
        for (d, v) in [a, b, c].into_iter().enumerate() {
            lo[d] = lo[d].min(v);
            hi[d] = hi[d].max(v);
        }
    }
    Some((lo, hi))
}

fn union(a: Bounds, b: Bounds) -> Bounds {
    (
        [0, 1, 2].map(|d| a.0[d].min(b.0[d])),
        [0, 1, 2].map(|d| a.1[d].max(b.1[d])),
    )
}

/// Largest box, in voxels, given a dense distance field.
const MAX_FIELD_CELLS: i64 = 1 << 26;

/// Squared Euclidean distance transform of a voxel set over a box.
struct DistanceField {
    lo: [i64; 3],
    dims: [usize; 3],
    sq: Vec<f64>,
}

/// Lower envelope of parabolas: `d[q] = min_p (q − p)² + f[p]`.
fn edt_line(f: &[f64], d: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    v.clear();
    z.clear();
    for q in 0..f.len() {
        if !f[q].is_finite() {
            continue;
        }
        let mut s = f64::NEG_INFINITY;
        while let Some(&p) = v.last() {
            let (qf, pf) = (q as f64, p as f64);
            s = ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf));
            if s <= *z.last().expect("paired with v") {
                v.pop();
                z.pop();
                s = f64::NEG_INFINITY;
            } else {
                break;
            }
        }
        v.push(q);
        z.push(s);
    }
    if v.is_empty() {
        d.fill(f64::INFINITY);
        return;
    }
    let mut j = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while j + 1 < v.len() && z[j + 1] < q as f64 {
            j += 1;
        }
        let p = v[j];
        *out = (q as f64 - p as f64).powi(2) + f[p];
    }
}

/// Runs `edt_line` along every line of the given stride inside each chunk.
fn edt_pass(sq: &mut [f64], chunk: usize, len: usize, stride: usize) {
    sq.par_chunks_mut(chunk).for_each(|block| {
        let (mut f, mut d) = (vec![0.0; len], vec![0.0; len]);
        let (mut v, mut z) = (Vec::new(), Vec::new());
        for offset in 0..stride {
            for (k, x) in f.iter_mut().enumerate() {
                *x = block[offset + k * stride];
            }
            edt_line(&f, &mut d, &mut v, &mut z);
            for (k, x) in d.iter().enumerate() {
                block[offset + k * stride] = *x;
            }
        }
    });
}

impl DistanceField {
    fn new(to: &BTreeSet<Voxel>, (lo, hi): Bounds) -> Option<Self> {
        let ext = [0, 1, 2].map(|d| hi[d] - lo[d] + 1);
        if ext.iter().product::<i64>() > MAX_FIELD_CELLS {
            return None;
        }
        let dims = ext.map(|e| e as usize);
        let [nx, ny, nz] = dims;
        let mut sq = vec![f64::INFINITY; nx * ny * nz];
        let mut field = Self { lo, dims, sq: Vec::new() };
        for &v in to {
            if let Some(i) = field.index(v) {
                sq[i] = 0.0;
            }
        }
        edt_pass(&mut sq, nz, nz, 1);
        edt_pass(&mut sq, ny * nz, ny, nz);
        edt_pass(&mut sq, nx * ny * nz, nx, ny * nz);
        field.sq = sq;
        Some(field)
    }

    fn index(&self, (a, b, c): Voxel) -> Option<usize> {
        let rel = [a - self.lo[0], b - self.lo[1], c - self.lo[2]];
        if (0..3).any(|d| rel[d] < 0 || rel[d] >= self.dims[d] as i64) {
            return None;
        }
        let [_, ny, nz] = self.dims;
        Some((rel[0] as usize * ny + rel[1] as usize) * nz + rel[2] as usize)
    }
}

/// Exact nearest-voxel queries: the distance field inside its box, the
/// column ring search elsewhere.
struct NearestVoxel {
    field: Option<DistanceField>,
    columns: ColumnIndex,
}

impl NearestVoxel {
    fn new(to: &BTreeSet<Voxel>, region: Option<Bounds>) -> Self {
        let field = bounds(to).and_then(|b| DistanceField::new(to, region.map_or(b, |r| union(b, r))));
        Self {
            field,
            columns: ColumnIndex::new(to),
        }
    }

    fn nearest_sq(&self, v: Voxel) -> f64 {
        match self.field.as_ref().and_then(|f| f.index(v).map(|i| f.sq[i])) {
            Some(d) => d,
            None => self.columns.nearest_sq(v) as f64,
        }
    }
}

/// Largest distance, in voxel units, from a voxel of `from` to the nearest voxel of `to`.
fn directed(from: &BTreeSet<Voxel>, to: &NearestVoxel) -> f64 {
    let items: Vec<Voxel> = from.iter().copied().collect();
    items
        .par_iter()
        .map(|&v| to.nearest_sq(v))
        .reduce(|| 0.0, f64::max)
        .sqrt()
}

/// Voxels met by the graph. Exact graph points are gathered from the
/// level-(L+2) samples and from the iterates of the graph-start set, where
/// `z = f` holds exactly. Since `f` is continuous, every voxel of a column
/// between the lowest and highest known value meets the graph.
fn graph_voxels(rfis: &BilinearRfis, voxel_level: u32, steps: usize, delta: f64) -> Result<BTreeSet<Voxel>, RfisError> {
    let fine = rfis.sample_surface(voxel_level + 2)?;
    let side = (fine.side() / (fine.ratio() * fine.ratio())) as i64;
    let column = |x: f64| ((x / delta).floor() as i64).min(side - 1);
    let mut range: HashMap<(i64, i64), (f64, f64)> = HashMap::new();
    let mut note = |x: f64, y: f64, f: f64| {
        let e = range.entry((column(x), column(y))).or_insert((f, f));
        e.0 = e.0.min(f);
        e.1 = e.1.max(f);
    };
    for kx in 0..=fine.side() {
        for ly in 0..=fine.side() {
            note(fine.coord(kx), fine.coord(ly), fine.get(kx, ly));
        }
    }
    let thin = THINNING * side as f64;
    let mut sets = start_points(rfis, StartSet::Graph { level: voxel_level })?;
    for _ in 0..steps {
        sets = step(rfis, &sets, thin);
        for p in sets.iter().flatten() {
            note(p.x, p.y, p.f);
        }
    }
    Ok(range
        .into_iter()
        .flat_map(|((a, b), (lo, hi))| ((lo / delta).floor() as i64..=(hi / delta).floor() as i64).map(move |c| (a, b, c)))
        .collect())
}

fn point_voxels(sets: &[Vec<Point>], delta: f64, side: i64) -> BTreeSet<Voxel> {
    sets.iter()
        .flatten()
        .map(|p| {
            (
                ((p.x / delta).floor() as i64).min(side - 1),
                ((p.y / delta).floor() as i64).min(side - 1),
                (p.z / delta).floor() as i64,
            )
        })
        .collect()
}

/// Iterates the set map `steps` times from `start` and measures the
/// distance to the graph at voxel size `1/(K^L N)`.
pub fn attractor_convergence_check(
    rfis: &BilinearRfis,
    voxel_level: u32,
    steps: usize,
    start: StartSet,
) -> Result<AttractorReport, RfisError> {
    let probe = rfis.sample_surface(voxel_level)?;
    let side = probe.side();
    let delta = 1.0 / side as f64;
    let graph = graph_voxels(rfis, voxel_level, steps, delta)?;
    let graph_bounds = bounds(&graph);
    let graph_index = NearestVoxel::new(&graph, None);

    let mut sets = start_points(rfis, start)?;
    let thin = THINNING * side as f64;
    let mut report = AttractorReport {
        voxel_level,
        voxel_size: delta,
        voxel_diagonal: delta * 3f64.sqrt(),
        alpha: rfis.alpha(),
        distances: Vec::with_capacity(steps + 1),
        to_graph: Vec::with_capacity(steps + 1),
        from_graph: Vec::with_capacity(steps + 1),
        deviations: Vec::with_capacity(steps + 1),
        points: Vec::with_capacity(steps + 1),
    };
    for n in 0..=steps {
        if n > 0 {
            sets = step(rfis, &sets, thin);
        }
        let voxels = point_voxels(&sets, delta, side as i64);
        let index = NearestVoxel::new(&voxels, graph_bounds);
        let (to, from) = (directed(&voxels, &graph_index) * delta, directed(&graph, &index) * delta);
        report.distances.push(to.max(from));
        report.to_graph.push(to);
        report.from_graph.push(from);
        report.deviations.push(
            sets.iter()
                .flatten()
                .fold(0.0_f64, |acc, p| acc.max((p.z - p.f).abs())),
        );
        report.points.push(sets.iter().map(Vec::len).sum());
    }
    Ok(report)
}
