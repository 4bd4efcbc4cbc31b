//! Oscillation sums, box counts and empirical dimension slopes.
//!
//! The oscillation of `f` on a level-n cell is approximated by max − min over
//! the `(K+1)²` level-(n+1) nodes of that cell. Those values are recomputed
//! on the fly from the level-n surface, so the finer grid is never stored.

use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::bilinear::{BilinearRfis, SampledSurface};
use crate::error::EmpiricalError;
use crate::partition::{Partition, TransferMatrix};

/// Oscillation and box count at one level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelOscillation {
    pub level: u32,
    /// `ε_n = 1/(KⁿN)`.
    pub epsilon: f64,
    /// `O(f, n)`.
    pub total: f64,
    /// `O(f, n, B_r)`, empty when no partition was given.
    pub per_part: Vec<f64>,
    /// Column count of `ε_n`-cubes meeting the sampled graph.
    pub box_count: u64,
}

impl LevelOscillation {
    /// `⌊ε_n⁻¹·O(f,n)⌋`.
    pub fn lower_bound(&self) -> u64 {
        (self.total / self.epsilon).floor() as u64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OscillationProfile {
    pub k: usize,
    pub n: usize,
    pub levels: Vec<LevelOscillation>,
}

impl OscillationProfile {
    pub fn level(&self, n: u32) -> Option<&LevelOscillation> {
        self.levels.iter().find(|l| l.level == n)
    }
}

#[derive(Default)]
struct RowStats {
    total: f64,
    per_part: Vec<f64>,
    boxes: u64,
}

/// Sums per-cell oscillation over the level-`level` cells of a grid with
/// `side` intervals. `value(kx, ly)` returns the level-(n+1) sample.
fn accumulate(
    level: u32,
    k: usize,
    n: usize,
    side: usize,
    partition: Option<&Partition>,
    value: impl Fn(usize, usize) -> f64 + Sync,
) -> LevelOscillation {
    let per_cell = side / n;
    let parts = partition.map_or(0, Partition::len);
    let owner: Vec<usize> = match partition {
        Some(p) => (1..=n)
            .flat_map(|i| (1..=n).map(move |j| (i, j)))
            .map(|(i, j)| p.owner(crate::grid::Cell::new(i, j)))
            .collect(),
        None => Vec::new(),
    };
    let scale = side as f64;
    let rows: Vec<RowStats> = (0..side)
        .into_par_iter()
        .map(|a| {
            let mut stats = RowStats {
                per_part: vec![0.0; parts],
                ..RowStats::default()
            };
            for b in 0..side {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for da in 0..=k {
                    for db in 0..=k {
                        let v = value(k * a + da, k * b + db);
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
                let osc = hi - lo;
                stats.total += osc;
                if parts > 0 {
                    stats.per_part[owner[(a / per_cell) * n + b / per_cell]] += osc;
                }
                stats.boxes += ((hi * scale).floor() - (lo * scale).floor()) as u64 + 1;
            }
            stats
        })
        .collect();
    let mut out = LevelOscillation {
        level,
        epsilon: 1.0 / scale,
        total: 0.0,
        per_part: vec![0.0; parts],
        box_count: 0,
    };
    for row in rows {
        out.total += row.total;
        for (acc, v) in out.per_part.iter_mut().zip(&row.per_part) {
            *acc += v;
        }
        out.box_count += row.boxes;
    }
    out
}

/// Oscillation at the level of `coarse`, generating level-(n+1) values from it.
pub fn level_oscillation(rfis: &BilinearRfis, coarse: &SampledSurface, partition: Option<&Partition>) -> LevelOscillation {
    accumulate(
        coarse.level(),
        coarse.ratio(),
        coarse.cells(),
        coarse.side(),
        partition,
        |kx, ly| rfis.refined_value(coarse, kx, ly),
    )
}

/// Oscillation at level `n` read from an explicit level-(n+1) surface.
pub fn level_oscillation_from(fine: &SampledSurface, n: u32, partition: Option<&Partition>) -> Result<LevelOscillation, EmpiricalError> {
    if fine.level() < n + 1 {
        return Err(EmpiricalError::LevelMismatch(format!(
            "level {n} oscillation needs samples at level {} or finer, got level {}",
            n + 1,
            fine.level()
        )));
    }
    let k = fine.ratio();
    let stride = k.pow(fine.level() - n - 1);
    Ok(accumulate(n, k, fine.cells(), fine.side() / (stride * k), partition, |kx, ly| {
        fine.get(kx * stride, ly * stride)
    }))
}

/// Box count `N(ε_n)` from a surface of level at least `n + 1`.
pub fn box_count(fine: &SampledSurface, n: u32) -> Result<u64, EmpiricalError> {
    Ok(level_oscillation_from(fine, n, None)?.box_count)
}

/// Profile over consecutive explicit surfaces: levels `s₀ … s_{L-1}` of the
/// slice, using each next surface for the sub-node values.
pub fn profile_from_surfaces(surfaces: &[SampledSurface], partition: Option<&Partition>) -> Result<OscillationProfile, EmpiricalError> {
    let first = surfaces
        .first()
        .ok_or_else(|| EmpiricalError::LevelMismatch("no surfaces given".into()))?;
    let mut levels = Vec::new();
    for pair in surfaces.windows(2) {
        if pair[1].level() != pair[0].level() + 1 || pair[1].ratio() != pair[0].ratio() {
            return Err(EmpiricalError::LevelMismatch(format!(
                "level {} is followed by level {}",
                pair[0].level(),
                pair[1].level()
            )));
        }
        levels.push(level_oscillation_from(&pair[1], pair[0].level(), partition)?);
    }
    Ok(OscillationProfile {
        k: first.ratio(),
        n: first.cells(),
        levels,
    })
}

/// Profile over `levels`, sampling one level at a time.
pub fn oscillation_profile(
    rfis: &BilinearRfis,
    partition: Option<&Partition>,
    levels: RangeInclusive<u32>,
) -> Result<OscillationProfile, EmpiricalError> {
    let mut surface = rfis.sample_surface(*levels.start())?;
    let mut out = Vec::new();
    loop {
        out.push(level_oscillation(rfis, &surface, partition));
        if surface.level() >= *levels.end() {
            break;
        }
        surface = rfis.refine(&surface);
    }
    Ok(OscillationProfile {
        k: surface.ratio(),
        n: surface.cells(),
        levels: out,
    })
}

/// Least-squares fit `y = a + b·x`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Half-width of the 95% confidence interval for the slope.
    pub slope_ci95: f64,
}

fn fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let df = xs.len() - 2;
    let stderr = (sse / df as f64 / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, df as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    LinearFit {
        slope,
        intercept,
        slope_ci95: t * stderr,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimensionEstimate {
    pub levels: Vec<u32>,
    /// `log O(f,n)` against `n log K`.
    pub oscillation_fit: LinearFit,
    /// `1 + slope`.
    pub dimension: f64,
    /// `log N(ε_n)` against `log(1/ε_n)`.
    pub box_fit: LinearFit,
    pub box_dimension: f64,
}

pub const MIN_REGRESSION_LEVELS: usize = 4;

pub fn empirical_dimension(profile: &OscillationProfile) -> Result<DimensionEstimate, EmpiricalError> {
    if profile.levels.len() < MIN_REGRESSION_LEVELS {
        return Err(EmpiricalError::InsufficientLevels {
            required: MIN_REGRESSION_LEVELS,
            found: profile.levels.len(),
        });
    }
    if let Some(flat) = profile.levels.iter().find(|l| l.total.is_nan() || l.total <= 0.0) {
        return Err(EmpiricalError::DegenerateRegression { level: flat.level });
    }
    let log_k = (profile.k as f64).ln();
    let xs: Vec<f64> = profile.levels.iter().map(|l| l.level as f64 * log_k).collect();
    let ys: Vec<f64> = profile.levels.iter().map(|l| l.total.ln()).collect();
    let oscillation_fit = fit(&xs, &ys);
    let bx: Vec<f64> = profile.levels.iter().map(|l| (1.0 / l.epsilon).ln()).collect();
    let by: Vec<f64> = profile.levels.iter().map(|l| (l.box_count as f64).ln()).collect();
    let box_fit = fit(&bx, &by);
    Ok(DimensionEstimate {
        levels: profile.levels.iter().map(|l| l.level).collect(),
        dimension: 1.0 + oscillation_fit.slope,
        box_dimension: box_fit.slope,
        oscillation_fit,
        box_fit,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransferResiduals {
    /// Values of `n` with both `n` and `n + 1` in the profile.
    pub levels: Vec<u32>,
    /// `R_n(r) = |O(f,n+1,B_r) − Σ_t γ_rt O(f,n,B_t)| / Kⁿ`, indexed `[n][r]`.
    pub residuals: Vec<Vec<f64>>,
    /// `C = sup R_n(r)`.
    pub bound: f64,
    pub first_third_mean: f64,
    pub last_third_mean: f64,
    /// No growth trend: last-third mean ≤ 2 × first-third mean + 0.1·C.
    pub bounded: bool,
}

fn thirds(values: &[f64]) -> (f64, f64) {
    let span = values.len().div_ceil(3).max(1);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    (mean(&values[..span]), mean(&values[values.len() - span..]))
}

pub fn transfer_inequality_check(profile: &OscillationProfile, g: &TransferMatrix) -> TransferResiduals {
    let k = profile.k as f64;
    let mut levels = Vec::new();
    let mut residuals = Vec::new();
    for pair in profile.levels.windows(2) {
        let (now, next) = (&pair[0], &pair[1]);
        if next.level != now.level + 1 {
            continue;
        }
        let row: Vec<f64> = (0..g.size())
            .map(|r| {
                let predicted: f64 = (0..g.size()).map(|t| g.get(r, t) * now.per_part[t]).sum();
                (next.per_part[r] - predicted).abs() / k.powi(now.level as i32)
            })
            .collect();
        levels.push(now.level);
        residuals.push(row);
    }
    let worst: Vec<f64> = residuals.iter().map(|r| r.iter().fold(0.0_f64, |a, &b| a.max(b))).collect();
    let bound = worst.iter().fold(0.0_f64, |a, &b| a.max(b));
    let (first_third_mean, last_third_mean) = if worst.is_empty() { (0.0, 0.0) } else { thirds(&worst) };
    TransferResiduals {
        levels,
        residuals,
        bound,
        first_third_mean,
        last_third_mean,
        bounded: last_third_mean <= 2.0 * first_third_mean + 0.1 * bound,
    }
}

/// `O(f,n,B_r)/ρ₀ⁿ` for parts of a component with `ρ₀ > K`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthCheck {
    pub rho: f64,
    pub levels: Vec<u32>,
    /// `min_r O(f,n,B_r)/ρ₀ⁿ` over the component's parts.
    pub ratios: Vec<f64>,
    /// `O(f,n,B_r)/Kⁿ`, same minimum.
    pub ratios_over_k: Vec<f64>,
    /// Every ratio is positive and the last third does not fall below half
    /// the first third, so no decay toward zero is visible.
    pub bounded_below: bool,
}

pub fn growth_check(profile: &OscillationProfile, parts: &[usize], rho: f64) -> GrowthCheck {
    let k = profile.k as f64;
    let min_over = |l: &LevelOscillation, base: f64| {
        parts
            .iter()
            .map(|&r| l.per_part[r] / base.powi(l.level as i32))
            .fold(f64::INFINITY, f64::min)
    };
    let ratios: Vec<f64> = profile.levels.iter().map(|l| min_over(l, rho)).collect();
    let ratios_over_k = profile.levels.iter().map(|l| min_over(l, k)).collect();
    let (first, last) = if ratios.is_empty() { (0.0, 0.0) } else { thirds(&ratios) };
    let last_min = ratios[ratios.len() - ratios.len().div_ceil(3)..]
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b));
    GrowthCheck {
        rho,
        levels: profile.levels.iter().map(|l| l.level).collect(),
        bounded_below: ratios.iter().all(|&r| r > 0.0) && last > 0.0 && last_min >= 0.5 * first,
        ratios,
        ratios_over_k,
    }
}
