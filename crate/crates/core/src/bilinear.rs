//! Bilinear recurrent fractal interpolation surfaces.
//!
//! `F_ij(x,y,z) = S(u_i(x), v_j(y))·(z − g_ij(x,y)) + h(u_i(x), v_j(y))` where
//! `h` and `S` are the piecewise-bilinear interpolants of the heights and the
//! vertical scaling factors, and `g_ij` is the bilinear function through the
//! four addressed heights at the corners of `D'_ij`.
//!
//! The fixed point `f` is sampled exactly on the refinement grids of mesh
//! `1/(KⁿN)`: every level-(n+1) node in `D_ij` is the image under
//! `u_i × v_j` of a level-n node.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::RfisError;
use crate::grid::{check_homogeneity, infer_ratio, AddressMaps, Cell, HomogeneityCertificate, InterpolationData, NodeTable};

/// Vertical scaling factors `s_ij` on the grid nodes, each with `|s_ij| < 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingFactors(NodeTable);

impl ScalingFactors {
    pub fn new(data: &InterpolationData, rows: &[Vec<f64>]) -> Result<Self, RfisError> {
        let table = NodeTable::from_rows(rows, data.n() + 1, data.m() + 1)?;
        for p in 0..table.rows() {
            for q in 0..table.cols() {
                let value = table.get(p, q);
                if value.is_nan() || value.abs() >= 1.0 {
                    return Err(RfisError::FactorOutOfRange { i: p, j: q, value });
                }
            }
        }
        Ok(Self(table))
    }

    #[inline]
    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.0.get(p, q)
    }

    pub fn table(&self) -> &NodeTable {
        &self.0
    }

    /// Corner factors of `D_ij` in the order `(i-1,j-1), (i,j-1), (i-1,j), (i,j)`.
    pub fn corners(&self, cell: Cell) -> [f64; 4] {
        let (i, j) = (cell.i, cell.j);
        [self.get(i - 1, j - 1), self.get(i, j - 1), self.get(i - 1, j), self.get(i, j)]
    }
}

/// The two piecewise-bilinear fields defined over the whole square.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    /// Interpolant `h` of the heights.
    H,
    /// Vertical scale factor function `S`.
    S,
}

/// Bilinear coefficients over one cell, stored as corner values
/// `c00, c10, c01, c11` (first index along x).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CornerTable(pub [f64; 4]);

impl CornerTable {
    #[inline]
    pub fn eval(&self, tx: f64, ty: f64) -> f64 {
        let [c00, c10, c01, c11] = self.0;
        let (sx, sy) = (1.0 - tx, 1.0 - ty);
        c00 * sx * sy + c10 * tx * sy + c01 * sx * ty + c11 * tx * ty
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
struct CellTables {
    h: CornerTable,
    s: CornerTable,
    /// `g_ij` pulled back to `D_ij`: corner `(a,b)` holds `z'_{i-1+a, j-1+b}`.
    g: CornerTable,
    alpha: f64,
}

/// A bilinear RFIS: data, address maps, scaling factors and derived tables.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BilinearRfis {
    data: InterpolationData,
    maps: AddressMaps,
    s: ScalingFactors,
    cells: Vec<CellTables>,
    alpha: f64,
    ratio: Option<usize>,
}

impl BilinearRfis {
    pub fn new(data: InterpolationData, maps: AddressMaps, s: ScalingFactors) -> Self {
        let (n, m) = (data.n(), data.m());
        let mut cells = Vec::with_capacity(n * m);
        for cell in data.cells() {
            let (i, j) = (cell.i, cell.j);
            let s_corners = s.corners(cell);
            cells.push(CellTables {
                h: CornerTable([data.z(i - 1, j - 1), data.z(i, j - 1), data.z(i - 1, j), data.z(i, j)]),
                s: CornerTable(s_corners),
                g: CornerTable([
                    maps.zprime(i - 1, j - 1),
                    maps.zprime(i, j - 1),
                    maps.zprime(i - 1, j),
                    maps.zprime(i, j),
                ]),
                alpha: s_corners.iter().fold(0.0_f64, |a, v| a.max(v.abs())),
            });
        }
        let alpha = cells.iter().fold(0.0_f64, |a, c| a.max(c.alpha));
        let ratio = infer_ratio(&data, &maps);
        Self {
            data,
            maps,
            s,
            cells,
            alpha,
            ratio,
        }
    }

    /// Convenience constructor on the uniform grid `x_i = i/N`, `y_j = j/N`.
    pub fn uniform(
        z: &[Vec<f64>],
        s: &[Vec<f64>],
        xprime_idx: &[usize],
        yprime_idx: &[usize],
    ) -> Result<Self, RfisError> {
        let n = z.len().saturating_sub(1);
        let m = z.first().map_or(0, |r| r.len().saturating_sub(1));
        let data = InterpolationData::uniform(n, m, z)?;
        let maps = AddressMaps::new(&data, xprime_idx, yprime_idx)?;
        let s = ScalingFactors::new(&data, s)?;
        Ok(Self::new(data, maps, s))
    }

    pub fn data(&self) -> &InterpolationData {
        &self.data
    }

    pub fn maps(&self) -> &AddressMaps {
        &self.maps
    }

    pub fn factors(&self) -> &ScalingFactors {
        &self.s
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn m(&self) -> usize {
        self.data.m()
    }

    /// `α = max α_ij`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Lipschitz bound of `F_ij` in `z`: the largest `|s|` over the corners of `D_ij`.
    pub fn cell_alpha(&self, cell: Cell) -> f64 {
        self.tables(cell).alpha
    }

    /// The refinement ratio `K`, when the homogeneity conditions hold.
    pub fn ratio(&self) -> Option<usize> {
        self.ratio
    }

    pub fn homogeneity(&self) -> HomogeneityCertificate {
        let idx = self.maps.xprime_idx();
        check_homogeneity(&self.data, &self.maps, idx[1].abs_diff(idx[0]))
    }

    fn require_ratio(&self) -> Result<usize, RfisError> {
        self.ratio
            .ok_or_else(|| RfisError::HomogeneityRequired(self.homogeneity().failures))
    }

    #[inline]
    fn tables(&self, cell: Cell) -> &CellTables {
        &self.cells[(cell.i - 1) * self.m() + (cell.j - 1)]
    }

    /// Bilinear `g_ij` corner values `z'`, for cell `(i,j)`.
    pub fn g_corners(&self, cell: Cell) -> [f64; 4] {
        self.tables(cell).g.0
    }

    /// Overwrites the stored `g_ij` corner table of one cell.
    #[cfg(test)]
    pub(crate) fn perturb_g_corner(&mut self, cell: Cell, corner: usize, delta: f64) {
        let m = self.m();
        self.cells[(cell.i - 1) * m + (cell.j - 1)].g.0[corner] += delta;
    }

    fn locate(nodes: &[f64], x: f64) -> Option<(usize, f64)> {
        if !(0.0..=1.0).contains(&x) {
            return None;
        }
        // Lowest cell whose closed interval contains x.
        let i = nodes.partition_point(|&v| v < x).max(1);
        let t = (x - nodes[i - 1]) / (nodes[i] - nodes[i - 1]);
        Some((i, t))
    }

    /// Value of `h` or `S` at `(x, y) ∈ [0,1]²`.
    pub fn eval_field(&self, field: Field, x: f64, y: f64) -> Result<f64, RfisError> {
        let ((i, tx), (j, ty)) = Self::locate(self.data.x(), x)
            .zip(Self::locate(self.data.y(), y))
            .ok_or(RfisError::OutOfDomain { x, y })?;
        let tables = self.tables(Cell::new(i, j));
        Ok(match field {
            Field::H => tables.h.eval(tx, ty),
            Field::S => tables.s.eval(tx, ty),
        })
    }

    /// Local fractions of `(x,y)` in `D'_ij`, measured from `(x'_{i-1}, y'_{j-1})`.
    fn domain_fractions(&self, cell: Cell, x: f64, y: f64) -> Result<(f64, f64), RfisError> {
        const SLACK: f64 = 1e-12;
        let tx = self.maps.u(cell.i).domain_fraction(x);
        let ty = self.maps.v(cell.j).domain_fraction(y);
        let inside = |t: f64| (-SLACK..=1.0 + SLACK).contains(&t);
        if inside(tx) && inside(ty) {
            Ok((tx.clamp(0.0, 1.0), ty.clamp(0.0, 1.0)))
        } else {
            Err(RfisError::OutOfDomain { x, y })
        }
    }

    /// `g_ij(x, y)` for `(x, y) ∈ D'_ij`, from `λ_i(x)` and `μ_j(y)`.
    pub fn eval_g(&self, cell: Cell, x: f64, y: f64) -> Result<f64, RfisError> {
        self.domain_fractions(cell, x, y)?;
        let xp = |k: usize| self.data.x()[self.maps.xprime_idx()[k]];
        let yp = |k: usize| self.data.y()[self.maps.yprime_idx()[k]];
        let (i, j) = (cell.i, cell.j);
        let lambda = (xp(i) - x) / (xp(i) - xp(i - 1));
        let mu = (yp(j) - y) / (yp(j) - yp(j - 1));
        let [z00, z10, z01, z11] = self.tables(cell).g.0;
        Ok(lambda * mu * z00 + (1.0 - lambda) * mu * z10 + lambda * (1.0 - mu) * z01 + (1.0 - lambda) * (1.0 - mu) * z11)
    }

    /// `F_ij(x, y, z)` for `(x, y) ∈ D'_ij`.
    pub fn eval_f_map(&self, cell: Cell, x: f64, y: f64, z: f64) -> Result<f64, RfisError> {
        let g = self.eval_g(cell, x, y)?;
        let (tx, ty) = self.image_fractions(cell, x, y);
        let tables = self.tables(cell);
        Ok(tables.s.eval(tx, ty) * (z - g) + tables.h.eval(tx, ty))
    }

    /// Fractions of `(u_i(x), v_j(y))` inside `D_ij`.
    fn image_fractions(&self, cell: Cell, x: f64, y: f64) -> (f64, f64) {
        let (i, j) = (cell.i, cell.j);
        let (xs, ys) = (self.data.x(), self.data.y());
        let ux = self.maps.u(i).apply(x);
        let vy = self.maps.v(j).apply(y);
        ((ux - xs[i - 1]) / (xs[i] - xs[i - 1]), (vy - ys[j - 1]) / (ys[j] - ys[j - 1]))
    }

    /// `W_ij(x, y, z) = (u_i(x), v_j(y), F_ij(x, y, z))`.
    pub fn eval_w(&self, cell: Cell, point: [f64; 3]) -> Result<[f64; 3], RfisError> {
        let [x, y, z] = point;
        let fz = self.eval_f_map(cell, x, y, z)?;
        Ok([self.maps.u(cell.i).apply(x), self.maps.v(cell.j).apply(y), fz])
    }

    /// Maximum seam discrepancy `|F_ij − F_{i+1,j}|` on `x* = x'_i` (and the
    /// y analogue), sampled at `samples_per_edge` points along each seam and a
    /// fixed set of heights.
    pub fn check_matchable(&self, samples_per_edge: usize) -> MatchableReport {
        let zs = self.probe_heights();
        let steps = samples_per_edge.max(2);
        let mut report = MatchableReport {
            seams_checked: 0,
            samples: 0,
            max_discrepancy: 0.0,
            worst_seam: None,
        };
        let (n, m) = (self.n(), self.m());
        for i in 1..n {
            let xstar = self.data.x()[self.maps.xprime_idx()[i]];
            for j in 1..=m {
                let (lo, hi) = self.maps.v(j).domain();
                let (a, b) = (Cell::new(i, j), Cell::new(i + 1, j));
                report.seams_checked += 1;
                for s in 0..steps {
                    let y = lo + (hi - lo) * s as f64 / (steps - 1) as f64;
                    for &z in &zs {
                        let d = (self.eval_f_map(a, xstar, y, z).expect("seam point in domain")
                            - self.eval_f_map(b, xstar, y, z).expect("seam point in domain"))
                        .abs();
                        report.record(d, a, b);
                    }
                }
            }
        }
        for j in 1..m {
            let ystar = self.data.y()[self.maps.yprime_idx()[j]];
            for i in 1..=n {
                let (lo, hi) = self.maps.u(i).domain();
                let (a, b) = (Cell::new(i, j), Cell::new(i, j + 1));
                report.seams_checked += 1;
                for s in 0..steps {
                    let x = lo + (hi - lo) * s as f64 / (steps - 1) as f64;
                    for &z in &zs {
                        let d = (self.eval_f_map(a, x, ystar, z).expect("seam point in domain")
                            - self.eval_f_map(b, x, ystar, z).expect("seam point in domain"))
                        .abs();
                        report.record(d, a, b);
                    }
                }
            }
        }
        report
    }

    fn probe_heights(&self) -> Vec<f64> {
        let zmax = self.data.heights().max_abs().max(1.0);
        vec![-2.0 * zmax, -0.5, 0.0, 0.75, zmax, 3.0 * zmax]
    }

    /// Exact samples of `f` on the level-`level` grid.
    pub fn sample_surface(&self, level: u32) -> Result<SampledSurface, RfisError> {
        let k = self.require_ratio()?;
        let side = grid_side(k, self.n(), level).ok_or(RfisError::LevelTooLarge { level })?;
        if side > 1 << 16 {
            return Err(RfisError::LevelTooLarge { level });
        }
        let mut surface = self.level_zero(k);
        for _ in 0..level {
            surface = self.refine(&surface);
        }
        Ok(surface)
    }

    /// Level 0 of the recursion: the heights themselves.
    pub fn level_zero(&self, k: usize) -> SampledSurface {
        let n = self.n();
        let mut values = Vec::with_capacity((n + 1) * (n + 1));
        for p in 0..=n {
            for q in 0..=n {
                values.push(self.data.z(p, q));
            }
        }
        SampledSurface {
            level: 0,
            k,
            n,
            side: n,
            values,
        }
    }

    /// One step of the grid recursion `f(u_i x, v_j y) = F_ij(x, y, f(x, y))`.
    pub fn refine(&self, coarse: &SampledSurface) -> SampledSurface {
        let side = coarse.side * coarse.k;
        let stride = side + 1;
        let mut values = vec![0.0; stride * stride];
        values.par_chunks_mut(stride).enumerate().for_each(|(kx, row)| {
            for (ly, out) in row.iter_mut().enumerate() {
                *out = self.refined_value(coarse, kx, ly);
            }
        });
        SampledSurface {
            level: coarse.level + 1,
            k: coarse.k,
            n: coarse.n,
            side,
            values,
        }
    }

    /// Level-(n+1) value at node `(kx, ly)`, computed through the lowest cell
    /// containing it.
    #[inline]
    pub fn refined_value(&self, coarse: &SampledSurface, kx: usize, ly: usize) -> f64 {
        let w = coarse.side / coarse.n * coarse.k;
        let i = kx.div_ceil(w).max(1);
        let j = ly.div_ceil(w).max(1);
        self.refined_value_in(coarse, Cell::new(i, j), kx, ly)
    }

    #[inline]
    fn refined_value_in(&self, coarse: &SampledSurface, cell: Cell, kx: usize, ly: usize) -> f64 {
        let k = coarse.k;
        let w = coarse.side / coarse.n * k;
        let coarse_w = w / k;
        let (tx_i, ty_i) = (kx - (cell.i - 1) * w, ly - (cell.j - 1) * w);
        let u = self.maps.u(cell.i);
        let v = self.maps.v(cell.j);
        let px = if u.reverses() {
            u.from_node * coarse_w - tx_i
        } else {
            u.from_node * coarse_w + tx_i
        };
        let py = if v.reverses() {
            v.from_node * coarse_w - ty_i
        } else {
            v.from_node * coarse_w + ty_i
        };
        let (tx, ty) = (tx_i as f64 / w as f64, ty_i as f64 / w as f64);
        let tables = self.tables(cell);
        tables.s.eval(tx, ty) * (coarse.get(px, py) - tables.g.eval(tx, ty)) + tables.h.eval(tx, ty)
    }

    /// Recomputes a level-(n+1) node through a specific containing cell.
    pub fn refined_value_via(&self, coarse: &SampledSurface, cell: Cell, kx: usize, ly: usize) -> Result<f64, RfisError> {
        let w = coarse.side / coarse.n * coarse.k;
        let inside = (cell.i - 1) * w <= kx && kx <= cell.i * w && (cell.j - 1) * w <= ly && ly <= cell.j * w;
        if cell.i == 0 || cell.j == 0 || cell.i > self.n() || cell.j > self.m() || !inside {
            return Err(RfisError::NodeOutsideCell {
                k: kx,
                l: ly,
                level: coarse.level + 1,
                cell,
            });
        }
        Ok(self.refined_value_in(coarse, cell, kx, ly))
    }

    /// Iterates the Read–Bajraktarević operator on the level grid starting
    /// from sampled `h`, reading the current iterate at preimages by bilinear
    /// interpolation. Gaps are sup-distances to the exact samples.
    pub fn operator_t_iterate(&self, level: u32, iterations: usize) -> Result<OperatorIteration, RfisError> {
        let exact = self.sample_surface(level)?;
        let side = exact.side;
        let coord = |k: usize| k as f64 / side as f64;
        let mut current = exact.map_nodes(|kx, ly| {
            self.eval_field(Field::H, coord(kx), coord(ly)).expect("grid node in domain")
        });
        let initial_gap = current.sup_distance(&exact);
        let mut gaps = Vec::with_capacity(iterations);
        for _ in 0..iterations.max(1) {
            let phi = &current;
            let next = exact.map_nodes(|kx, ly| {
                let (x, y) = (coord(kx), coord(ly));
                let (i, _) = Self::locate(self.data.x(), x).expect("grid node in domain");
                let (j, _) = Self::locate(self.data.y(), y).expect("grid node in domain");
                let cell = Cell::new(i, j);
                let xp = self.maps.u(i).invert(x);
                let yp = self.maps.v(j).invert(y);
                let value = phi.interpolate(xp, yp);
                self.eval_f_map(cell, xp, yp, value).expect("preimage in domain")
            });
            gaps.push(next.sup_distance(&exact));
            current = next;
        }
        Ok(OperatorIteration {
            surface: current,
            initial_gap,
            gaps,
            alpha: self.alpha,
        })
    }
}

fn grid_side(k: usize, n: usize, level: u32) -> Option<usize> {
    k.checked_pow(level)?.checked_mul(n)
}

/// Seam discrepancy summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatchableReport {
    pub seams_checked: usize,
    pub samples: usize,
    pub max_discrepancy: f64,
    pub worst_seam: Option<(Cell, Cell)>,
}

impl MatchableReport {
    fn record(&mut self, d: f64, a: Cell, b: Cell) {
        self.samples += 1;
        if d > self.max_discrepancy || d.is_nan() {
            self.max_discrepancy = d;
            self.worst_seam = Some((a, b));
        }
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.max_discrepancy <= tol
    }
}

/// Values of `f` at the nodes `(k/side, ℓ/side)`, `side = KⁿN`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampledSurface {
    level: u32,
    k: usize,
    n: usize,
    side: usize,
    values: Vec<f64>,
}

impl SampledSurface {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn ratio(&self) -> usize {
        self.k
    }

    /// Cells per axis of the original grid.
    pub fn cells(&self) -> usize {
        self.n
    }

    /// Number of level-n intervals per axis, `KⁿN`.
    pub fn side(&self) -> usize {
        self.side
    }

    /// Level-n intervals per original cell, `Kⁿ`.
    pub fn per_cell(&self) -> usize {
        self.side / self.n
    }

    #[inline]
    pub fn get(&self, kx: usize, ly: usize) -> f64 {
        self.values[kx * (self.side + 1) + ly]
    }

    /// Row-major values, x index outermost.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn coord(&self, k: usize) -> f64 {
        k as f64 / self.side as f64
    }

    /// Every K-th sample: the level-(n-1) surface.
    pub fn coarsen(&self) -> Option<SampledSurface> {
        if self.level == 0 {
            return None;
        }
        let side = self.side / self.k;
        let mut values = Vec::with_capacity((side + 1) * (side + 1));
        for kx in 0..=side {
            for ly in 0..=side {
                values.push(self.get(kx * self.k, ly * self.k));
            }
        }
        Some(SampledSurface {
            level: self.level - 1,
            k: self.k,
            n: self.n,
            side,
            values,
        })
    }

    fn map_nodes(&self, f: impl Fn(usize, usize) -> f64 + Sync) -> SampledSurface {
        let stride = self.side + 1;
        let mut values = vec![0.0; stride * stride];
        values.par_chunks_mut(stride).enumerate().for_each(|(kx, row)| {
            for (ly, out) in row.iter_mut().enumerate() {
                *out = f(kx, ly);
            }
        });
        SampledSurface {
            level: self.level,
            k: self.k,
            n: self.n,
            side: self.side,
            values,
        }
    }

    /// Sup-norm distance between two surfaces on the same grid.
    pub fn sup_distance(&self, other: &SampledSurface) -> f64 {
        assert_eq!(self.side, other.side, "surfaces on different grids");
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// Bilinear interpolation of the grid values at `(x, y) ∈ [0,1]²`.
    pub fn interpolate(&self, x: f64, y: f64) -> f64 {
        let side = self.side as f64;
        let (fx, fy) = ((x * side).clamp(0.0, side), (y * side).clamp(0.0, side));
        let kx = (fx.floor() as usize).min(self.side - 1);
        let ly = (fy.floor() as usize).min(self.side - 1);
        let (tx, ty) = (fx - kx as f64, fy - ly as f64);
        CornerTable([
            self.get(kx, ly),
            self.get(kx + 1, ly),
            self.get(kx, ly + 1),
            self.get(kx + 1, ly + 1),
        ])
        .eval(tx, ty)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Trace of the operator iteration against the exact samples.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OperatorIteration {
    #[serde(skip)]
    pub surface: SampledSurface,
    pub initial_gap: f64,
    /// `sup |Tᵏφ₀ − f|` for `k = 1, 2, …`.
    pub gaps: Vec<f64>,
    pub alpha: f64,
}
