//! The tower-based time stepper and its diagnostics.
//!
//! Each grid point carries a [`Tower`] of stored coefficients `F(k, h)`
//! (temporal layers `0..T`, spatial orders `0..H_stored`). One step, per
//! point and per stacking level:
//!
//! 1. spatial extension — the level's cached stencil weights reconstruct the
//!    spatial orders above the level's stored band from the neighbors'
//!    stored coefficients;
//! 2. temporal extension — the system's recurrence fills higher temporal
//!    layers out to the truncation frontier (the largest layer whose
//!    dependency chain stays inside the reconstructed spatial range);
//! 3. propagation — a Taylor shift in time re-centers the stored entries:
//!    `F(k0,h) ← Σ_{k≥k0} C(k,k0) F(k,h) dt^(k-k0)`.
//!
//! With pairwise stacking, each pair of spatial orders forms its own
//! sub-scheme: level `j` sees stored orders up to its band and *its own*
//! reconstructions above, never the stored data of higher bands. All levels
//! read only the previous-step grid, so the result does not depend on level
//! or point ordering, and point updates can run on several threads.

use crate::equations::{Scratch, System};
use crate::series::Series2;
use crate::stencil::{self, NeighborhoodGeometry, StencilError, StencilWeightSet};
use std::fmt;

/// Stored coefficient tower at one grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct Tower {
    pub x: f64,
    /// `F(k, h)` for `k < temporal_order`, `h < h_stored`.
    pub stored: Series2,
}

/// Periodic uniform grid of towers.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    length: f64,
    dx: f64,
    towers: Vec<Tower>,
}

impl Grid {
    /// Initialize all towers from the system's initial data.
    pub fn from_initial(system: &System, n: usize, length: f64, h_stored: usize) -> Grid {
        let dx = length / n as f64;
        let towers = (0..n)
            .map(|i| {
                let x = i as f64 * dx;
                Tower {
                    x,
                    stored: system.initial_tower(x, h_stored),
                }
            })
            .collect();
        Grid { length, dx, towers }
    }

    /// Build from explicit stored tables (positions are `i*dx`).
    pub fn from_tables(length: f64, tables: Vec<Series2>) -> Grid {
        let n = tables.len();
        let dx = length / n as f64;
        let towers = tables
            .into_iter()
            .enumerate()
            .map(|(i, stored)| Tower { x: i as f64 * dx, stored })
            .collect();
        Grid { length, dx, towers }
    }

    pub fn len(&self) -> usize {
        self.towers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.towers.is_empty()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn tower(&self, i: usize) -> &Tower {
        &self.towers[i]
    }

    pub fn towers(&self) -> &[Tower] {
        &self.towers
    }

    #[inline]
    fn wrap(&self, i: isize) -> usize {
        let n = self.towers.len() as isize;
        (((i % n) + n) % n) as usize
    }

    /// Cyclic rotation of the stored data (positions stay put).
    pub fn rotated(&self, shift: usize) -> Grid {
        let n = self.towers.len();
        let towers = (0..n)
            .map(|i| Tower {
                x: self.towers[i].x,
                stored: self.towers[(i + shift) % n].stored.clone(),
            })
            .collect();
        Grid { length: self.length, dx: self.dx, towers }
    }
}

/// How stored spatial orders are grouped for interpolation and evolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stacking {
    /// One interpolation band: the top `min(2, H_stored)` stored orders feed
    /// a single reconstruction of everything above the stored range.
    None,
    /// Each pair of stored orders `(2j, 2j+1)` evolves as its own sub-scheme
    /// with its own interpolation band. Requires an even `H_stored`.
    Pairs,
}

impl fmt::Display for Stacking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stacking::None => write!(f, "none"),
            Stacking::Pairs => write!(f, "pairs"),
        }
    }
}

/// Evolution scheme selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Imdtm,
    Rk4,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Imdtm => write!(f, "imdtm"),
            Scheme::Rk4 => write!(f, "rk4"),
        }
    }
}

/// Numerical configuration of a run.
#[derive(Clone, Debug)]
pub struct EvolverConfig {
    pub dt: f64,
    pub steps: usize,
    /// Interpolation uses `2*radius + 1` neighboring points.
    pub radius: usize,
    /// Stored spatial orders per temporal layer.
    pub h_stored: usize,
    pub stacking: Stacking,
    /// Highest spatial order reconstructed for the top band.
    pub max_order: usize,
    pub scheme: Scheme,
}

/// Configuration rejected by the stepper.
#[derive(Clone, Debug, PartialEq)]
pub enum EvolverError {
    Invalid(String),
    Stencil(StencilError),
}

impl fmt::Display for EvolverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvolverError::Invalid(msg) => write!(f, "invalid configuration: {msg}"),
            EvolverError::Stencil(e) => write!(f, "stencil construction failed: {e}"),
        }
    }
}

impl std::error::Error for EvolverError {}

impl From<StencilError> for EvolverError {
    fn from(e: StencilError) -> Self {
        EvolverError::Stencil(e)
    }
}

/// Default cap on the highest reconstructed spatial order: as much of the
/// interpolant capacity as double precision can use. Coefficients of smooth
/// solutions decay factorially, so orders much past a dozen above the stored
/// band sit below rounding and only feed noise into deep temporal layers.
pub fn default_max_order(h_stored: usize, radius: usize, stacking: Stacking) -> usize {
    let m = 2 * radius + 1;
    let band = match stacking {
        Stacking::Pairs => 2,
        Stacking::None => h_stored.min(2),
    };
    let capacity_cap = (h_stored - band) + m * band - 1;
    capacity_cap.min(h_stored - 1 + 13)
}

/// A step produced a non-finite coefficient; the run must halt.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepDiverged;

impl fmt::Display for StepDiverged {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step produced a non-finite coefficient")
    }
}

impl std::error::Error for StepDiverged {}

/// Largest temporal layer computable at each spatial order, derived from the
/// system's declared spatial consumption: reaching layer `k` costs
/// `consumption` spatial orders per recurrence application, and one
/// application raises the temporal order by `t_order`.
#[derive(Clone, Copy, Debug)]
pub struct Frontier {
    pub t_order: usize,
    pub consumption: usize,
    pub max_order: usize,
}

impl Frontier {
    /// Highest spatial order available at temporal layer `k`, if any.
    pub fn h_max(&self, k: usize) -> Option<usize> {
        if k < self.t_order {
            return Some(self.max_order);
        }
        let applications = (k - self.t_order) / self.t_order + 1;
        let spent = self.consumption * applications;
        (spent <= self.max_order).then(|| self.max_order - spent)
    }

    /// Highest temporal layer with any computable entry.
    pub fn k_top(&self) -> usize {
        let mut k = self.t_order - 1;
        while self.h_max(k + 1).is_some() {
            k += 1;
        }
        k
    }

    /// Highest temporal layer whose entry at spatial order `h` is computable.
    pub fn k_max(&self, h: usize) -> usize {
        let mut k = self.t_order - 1;
        while self.h_max(k + 1).is_some_and(|hm| hm >= h) {
            k += 1;
        }
        k
    }
}

struct Level {
    /// First stored order of the interpolation band.
    base: usize,
    /// Band width (1 or 2).
    band: usize,
    /// Highest reconstructed order for this level.
    cap: usize,
    /// Stored orders this level advances: the band itself under pairwise
    /// stacking, every stored order for a single-band scheme.
    propagates: std::ops::Range<usize>,
    weights: StencilWeightSet,
    frontier: Frontier,
}

/// Precomputed stepper: system, per-level stencil weights, frontiers.
pub struct Stepper {
    system: System,
    dt: f64,
    t_order: usize,
    h_stored: usize,
    levels: Vec<Level>,
    threads: usize,
}

impl Stepper {
    pub fn new(
        system: System,
        n: usize,
        length: f64,
        cfg: &EvolverConfig,
    ) -> Result<Stepper, EvolverError> {
        let invalid = |msg: String| Err(EvolverError::Invalid(msg));
        if cfg.h_stored == 0 {
            return invalid("H_stored must be at least 1".into());
        }
        if cfg.radius == 0 {
            return invalid("radius must be at least 1 (neighborhood must include neighbors)".into());
        }
        if n < 2 * cfg.radius + 1 {
            return invalid(format!(
                "N = {n} is smaller than the neighborhood (2*radius+1 = {})",
                2 * cfg.radius + 1
            ));
        }
        if !(cfg.dt.is_finite()) {
            return invalid(format!("dt = {} is not finite", cfg.dt));
        }
        if cfg.stacking == Stacking::Pairs && !cfg.h_stored.is_multiple_of(2) {
            return invalid(format!(
                "pairwise stacking needs an even H_stored, got {}",
                cfg.h_stored
            ));
        }
        let t_order = system.temporal_order();
        let consumption = system.spatial_consumption();
        if cfg.max_order < cfg.h_stored - 1 + consumption {
            return invalid(format!(
                "max_order = {} leaves no room to advance the top stored order \
                 (need at least H_stored-1+{consumption} = {})",
                cfg.max_order,
                cfg.h_stored - 1 + consumption
            ));
        }
        let dx = length / n as f64;
        let geom = NeighborhoodGeometry::uniform(cfg.radius, dx)?;
        let m = geom.len();

        let bands: Vec<(usize, usize, usize, std::ops::Range<usize>)> = match cfg.stacking {
            Stacking::Pairs => {
                let ext = cfg.max_order - (cfg.h_stored - 1);
                (0..cfg.h_stored / 2)
                    .map(|j| (2 * j, 2usize, 2 * j + 1 + ext, 2 * j..2 * j + 2))
                    .collect()
            }
            Stacking::None => {
                let band = cfg.h_stored.min(2);
                vec![(cfg.h_stored - band, band, cfg.max_order, 0..cfg.h_stored)]
            }
        };

        let mut levels = Vec::with_capacity(bands.len());
        for (base, band, cap, propagates) in bands {
            let capacity = m * band - 1;
            if cap - base > capacity {
                return invalid(format!(
                    "max_order implies reconstructing order {cap} from the band at {base} \
                     (width {band}), beyond the interpolant capacity {}",
                    base + capacity
                ));
            }
            let targets: Vec<usize> = (base + band..=cap).collect();
            let weights = stencil::build_weights(&geom, base..base + band, &targets)?;
            levels.push(Level {
                base,
                band,
                cap,
                propagates,
                weights,
                frontier: Frontier {
                    t_order,
                    consumption,
                    max_order: cap,
                },
            });
        }
        Ok(Stepper {
            system,
            dt: cfg.dt,
            t_order,
            h_stored: cfg.h_stored,
            levels,
            threads: 1,
        })
    }

    /// Number of worker threads for point updates (0 = auto).
    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = if threads == 0 {
            std::thread::available_parallelism().map_or(1, |p| p.get())
        } else {
            threads
        };
        self
    }

    pub fn system(&self) -> &System {
        &self.system
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level_weights(&self, level: usize) -> &StencilWeightSet {
        &self.levels[level].weights
    }

    pub fn level_frontier(&self, level: usize) -> Frontier {
        self.levels[level].frontier
    }

    /// Spatial extension for one point and level: stored coefficients up to
    /// the level's band, and reconstructed coefficients above it out to the
    /// level cap. Stored entries are copied, never overwritten.
    pub fn level_series(&self, grid: &Grid, i: usize, level: usize) -> Series2 {
        let lv = &self.levels[level];
        let k_top = lv.frontier.k_top();
        let mut table = Series2::zeros(k_top, lv.cap);
        let band_top = lv.base + lv.band - 1;
        for k in 0..self.t_order {
            for h in 0..=band_top {
                table.set(k, h, grid.tower(i).stored.get(k, h));
            }
            let rec = apply_weights(grid, i, &lv.weights, k);
            for (t, &h) in lv.weights.target_orders().iter().enumerate() {
                table.set(k, h, rec[t]);
            }
        }
        table
    }

    /// Fill temporal layers above the stored ones out to the frontier.
    pub fn extend_temporal(&self, table: &mut Series2, frontier: Frontier, scratch: &mut Scratch) {
        for k in self.t_order..=frontier.k_top() {
            let h_max = frontier.h_max(k).expect("k_top bounds the loop");
            for h in 0..=h_max {
                let v = self
                    .system
                    .coefficient(table, scratch, k, h)
                    .expect("frontier keeps dependencies in range");
                table.set(k, h, v);
            }
        }
    }

    /// Taylor-shift one stored entry to `t + dt`:
    /// `Σ_{k=k0}^{k_max(h)} C(k, k0) · F(k, h) · dt^(k-k0)`.
    pub fn propagate_value(table: &Series2, frontier: Frontier, dt: f64, k0: usize, h: usize) -> f64 {
        let mut acc = 0.0;
        let mut dt_pow = 1.0;
        let mut binom = 1.0; // C(k, k0), starting at k = k0
        for k in k0..=frontier.k_max(h) {
            if k > k0 {
                dt_pow *= dt;
                binom *= k as f64 / (k - k0) as f64;
            }
            acc += binom * table.get(k, h) * dt_pow;
        }
        acc
    }

    fn advance_tower(&self, grid: &Grid, i: usize) -> Result<Series2, StepDiverged> {
        let mut new_stored = Series2::zeros(self.t_order - 1, self.h_stored - 1);
        for (li, lv) in self.levels.iter().enumerate() {
            let mut table = self.level_series(grid, i, li);
            let mut scratch = self.system.new_scratch(table.k_max(), table.h_max());
            self.extend_temporal(&mut table, lv.frontier, &mut scratch);
            for h in lv.propagates.clone() {
                for k0 in 0..self.t_order {
                    let v = Self::propagate_value(&table, lv.frontier, self.dt, k0, h);
                    if !v.is_finite() {
                        return Err(StepDiverged);
                    }
                    new_stored.set(k0, h, v);
                }
            }
        }
        Ok(new_stored)
    }

    /// Advance the whole grid by one time step (double-buffered: the input
    /// grid is the read-only previous state).
    pub fn step(&self, grid: &Grid) -> Result<Grid, StepDiverged> {
        let n = grid.len();
        let tables: Result<Vec<Series2>, StepDiverged> = if self.threads <= 1 || n < 4 {
            (0..n).map(|i| self.advance_tower(grid, i)).collect()
        } else {
            let workers = self.threads.min(n);
            let chunk = n.div_ceil(workers);
            let mut results: Vec<Result<Vec<Series2>, StepDiverged>> = Vec::new();
            std::thread::scope(|scope| {
                let handles: Vec<_> = (0..workers)
                    .map(|w| {
                        let lo = w * chunk;
                        let hi = ((w + 1) * chunk).min(n);
                        scope.spawn(move || {
                            (lo..hi)
                                .map(|i| self.advance_tower(grid, i))
                                .collect::<Result<Vec<_>, _>>()
                        })
                    })
                    .collect();
                results = handles.into_iter().map(|h| h.join().unwrap()).collect();
            });
            results
                .into_iter()
                .collect::<Result<Vec<_>, _>>()
                .map(|chunks| chunks.concat())
        };
        Ok(Grid::from_tables(grid.length(), tables?))
    }
}

/// Reconstruct the weight set's target orders for the tower at
/// `center_index`, temporal layer `k`, from the neighbors' stored
/// coefficients (periodic wrap).
pub fn apply_weights(grid: &Grid, center_index: usize, ws: &StencilWeightSet, k: usize) -> Vec<f64> {
    let m = ws.geometry().len();
    let center = ws.geometry().center_index();
    debug_assert!(grid.len() >= m);
    ws.apply(|j, s| {
        let idx = grid.wrap(center_index as isize + j as isize - center as isize);
        grid.tower(idx).stored.get(k, s)
    })
}

/// Per-step diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub t: f64,
    /// Mean log10 relative error of `F(0,0)` against the analytic solution.
    pub analytic_err: f64,
    /// Mean log10 neighbor self-consistency violation; absent for single-order
    /// towers and for the method-of-lines baseline.
    pub constraint_err: Option<f64>,
    /// Wall-clock time of the step, informational only.
    pub wall_ms: f64,
}

/// Relative-error denominators are clamped at `REL_CLAMP` times the slice
/// maximum so points where the reference vanishes stay meaningful.
const REL_CLAMP: f64 = 1e-12;
/// Per-point mismatches are floored here before taking log10 so exact data
/// produces a finite metric.
const ERR_FLOOR: f64 = 1e-17;

pub(crate) fn mean_log10_relative(
    pairs: impl Iterator<Item = (f64, f64)>, // (approx, exact)
    slice_max: f64,
) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (approx, exact) in pairs {
        let den = exact.abs().max(REL_CLAMP * slice_max).max(f64::MIN_POSITIVE);
        let err = ((approx - exact).abs() / den).max(ERR_FLOOR);
        sum += err.log10();
        count += 1;
    }
    sum / count as f64
}

/// Mean over grid points of the base-ten log of the relative error of the
/// stored function value against the analytic solution at time `t`.
pub fn analytic_error(grid: &Grid, system: &System, t: f64) -> f64 {
    let slice_max = grid
        .towers()
        .iter()
        .map(|tw| system.analytic(tw.x, t).abs())
        .fold(0.0, f64::max);
    mean_log10_relative(
        grid.towers()
            .iter()
            .map(|tw| (tw.stored.get(0, 0), system.analytic(tw.x, t))),
        slice_max,
    )
}

/// Same metric for a plain value array (method-of-lines states).
pub fn analytic_error_values(values: &[f64], system: &System, dx: f64, t: f64) -> f64 {
    let exact: Vec<f64> = (0..values.len())
        .map(|i| system.analytic(i as f64 * dx, t))
        .collect();
    let slice_max = exact.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    mean_log10_relative(
        values.iter().copied().zip(exact.iter().copied()),
        slice_max,
    )
}

/// Neighbor self-consistency violation: each tower's stored spatial series,
/// evaluated at the two adjacent points, must reproduce the neighbors'
/// stored values. Returns the mean log10 relative mismatch over all points,
/// both neighbors, and all stored temporal layers.
pub fn constraint_violation(grid: &Grid) -> f64 {
    let t_order = grid.tower(0).stored.k_max() + 1;
    let n = grid.len();
    let mut sum = 0.0;
    let mut count = 0usize;
    for k in 0..t_order {
        let slice_max = grid
            .towers()
            .iter()
            .map(|tw| tw.stored.get(k, 0).abs())
            .fold(0.0, f64::max);
        for i in 0..n {
            for delta in [-1isize, 1] {
                let j = grid.wrap(i as isize + delta);
                let predicted = grid.tower(i).stored.eval_row(k, delta as f64 * grid.dx());
                let stored = grid.tower(j).stored.get(k, 0);
                let den = stored.abs().max(REL_CLAMP * slice_max).max(f64::MIN_POSITIVE);
                let err = ((predicted - stored).abs() / den).max(ERR_FLOOR);
                sum += err.log10();
                count += 1;
            }
        }
    }
    sum / count as f64
}

/// Run until the solution diverges (non-finite coefficients or mean relative
/// error reaching 100%), returning the step index, or None if it survives
/// `max_steps`. Regression demonstration for unstable interpolation layouts.
pub fn unstable_mode_demo(stepper: &Stepper, mut grid: Grid, max_steps: usize) -> Option<usize> {
    for step in 1..=max_steps {
        grid = match stepper.step(&grid) {
            Ok(g) => g,
            Err(StepDiverged) => return Some(step),
        };
        let t = step as f64 * stepper.dt();
        if analytic_error(&grid, stepper.system(), t) >= 0.0 {
            return Some(step);
        }
    }
    None
}
