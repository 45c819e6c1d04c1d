//! The evolved PDE systems: coefficient recurrences, analytic solutions,
//! and initial data.
//!
//! Each system turns its PDE into a recurrence that produces the temporal
//! coefficient `F(k, h)` of a [`Series2`] from entries at strictly lower
//! temporal order. The layers below `temporal_order()` are the Cauchy data
//! and are never computed by the recurrence. `spatial_consumption()` bounds
//! how many spatial orders one application of the recurrence reaches above
//! `h`; the evolver derives its truncation frontier from it.

use crate::series::Series2;
use std::fmt;

/// Wave equation `f_tt = f_xx` on a periodic domain of the given length,
/// with standing-cosine initial data `f = cos(2πx/L)`, `ḟ = 0`.
#[derive(Clone, Debug)]
pub struct Wave {
    pub length: f64,
}

/// Modified KdV equation `f_t + f² f_x + f_xxx = 0` with the periodic
/// traveling-profile solution selected by the free parameter `a`.
#[derive(Clone, Debug)]
pub struct Mkdv {
    pub a: f64,
}

/// A pluggable PDE system.
#[derive(Clone, Debug)]
pub enum System {
    Wave(Wave),
    Mkdv(Mkdv),
}

/// Requested a coefficient whose dependencies lie beyond the table bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncationError {
    pub k: usize,
    pub h: usize,
}

impl fmt::Display for TruncationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "coefficient ({}, {}) depends on entries beyond the stored bounds",
            self.k, self.h
        )
    }
}

impl std::error::Error for TruncationError {}

/// Per-point, per-step cache space for nonlinear recurrences.
pub enum Scratch {
    None,
    Mkdv(MkdvScratch),
}

impl Wave {
    fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.length
    }

    /// Standing wave `cos(2πx/L)·cos(2πt/L)` matching the initial data.
    pub fn analytic(&self, x: f64, t: f64) -> f64 {
        let w = self.omega();
        (w * x).cos() * (w * t).cos()
    }

    /// `F(k,h) = (h+2)(h+1)/(k(k-1)) · F(k-2, h+2)` for `k ≥ 2`.
    pub fn coefficient(table: &Series2, k: usize, h: usize) -> Result<f64, TruncationError> {
        if k < 2 || h + 2 > table.h_max() || k > table.k_max() {
            return Err(TruncationError { k, h });
        }
        let num = ((h + 2) * (h + 1)) as f64;
        let den = (k * (k - 1)) as f64;
        Ok(num / den * table.get(k - 2, h + 2))
    }

    /// Exact local coefficients of the initial data: derivatives of
    /// `cos(ωx)` cycle through ±cos/±sin, and the velocity layer is zero.
    pub fn initial_tower(&self, x: f64, h_count: usize) -> Series2 {
        let w = self.omega();
        let mut tower = Series2::zeros(1, h_count - 1);
        let (s, c) = (w * x).sin_cos();
        let mut scale = 1.0; // ω^h / h!
        for h in 0..h_count {
            if h > 0 {
                scale *= w / h as f64;
            }
            let v = match h % 4 {
                0 => c,
                1 => -s,
                2 => -c,
                _ => s,
            };
            tower.set(0, h, scale * v);
        }
        tower
    }
}

impl Mkdv {
    /// `-2√2·a + 6√2·a / (2 + cos(2ax - 8a³t))`.
    pub fn analytic(&self, x: f64, t: f64) -> f64 {
        let a = self.a;
        let root2 = std::f64::consts::SQRT_2;
        let theta = 2.0 * a * x - 8.0 * a.powi(3) * t;
        -2.0 * root2 * a + 6.0 * root2 * a / (2.0 + theta.cos())
    }

    /// Initial tower generated by series composition: the profile is a
    /// constant plus a quotient by `2 + cos(2ax)`, so the spatial
    /// coefficients come straight out of the series engine.
    pub fn initial_tower(&self, x: f64, h_count: usize) -> Series2 {
        let a = self.a;
        let root2 = std::f64::consts::SQRT_2;
        let h_max = h_count - 1;
        // inner angle 2a(x + ξ) as a series in the local displacement ξ
        let mut angle = Series2::zeros(0, h_max);
        angle.set(0, 0, 2.0 * a * x);
        if h_max >= 1 {
            angle.set(0, 1, 2.0 * a);
        }
        let (_, cos) = angle.sin_cos();
        let denom = Series2::constant(2.0, 0, h_max).add(&cos).expect("same bounds");
        let numer = Series2::constant(6.0 * root2 * a, 0, h_max);
        let frac = numer.div(&denom).expect("denominator bounded away from zero");
        frac.add(&Series2::constant(-2.0 * root2 * a, 0, h_max))
            .expect("same bounds")
    }

    /// `F(k,h) = -(1/k)[G(k-1,h) + (h+3)(h+2)(h+1)·F(k-1,h+3)]` where the
    /// cached tables hold `H = F∗F` (the squared field) and `G = H∗∂ₓF`
    /// (the advection flux), filled layer by layer.
    pub fn coefficient(
        table: &Series2,
        scratch: &mut MkdvScratch,
        k: usize,
        h: usize,
    ) -> Result<f64, TruncationError> {
        if k < 1 || h + 3 > table.h_max() || k > table.k_max() {
            return Err(TruncationError { k, h });
        }
        scratch.fill(table, k - 1, h);
        let g = scratch.flux.get(k - 1, h);
        let third = ((h + 3) * (h + 2) * (h + 1)) as f64;
        Ok(-(g + third * table.get(k - 1, h + 3)) / k as f64)
    }
}

/// Cached convolution layers for the mKdV recurrence. Recomputed per tower
/// per step; entries are filled on demand and memoized within the step.
pub struct MkdvScratch {
    squared: Series2, // H(k,h): coefficients of f²
    flux: Series2,    // G(k,h): coefficients of f²·f_x
    filled: Vec<usize>, // per temporal layer, number of spatial entries done
}

impl MkdvScratch {
    pub fn new(k_max: usize, h_max: usize) -> Self {
        MkdvScratch {
            squared: Series2::zeros(k_max, h_max),
            flux: Series2::zeros(k_max, h_max),
            filled: vec![0; k_max + 1],
        }
    }

    /// Cached `H(k,h)`; layers must have been filled via the recurrence path.
    pub fn squared(&self, k: usize, h: usize) -> f64 {
        debug_assert!(h < self.filled[k]);
        self.squared.get(k, h)
    }

    fn fill(&mut self, table: &Series2, layer: usize, h_needed: usize) {
        for n in self.filled[layer]..=h_needed {
            let mut sq = 0.0;
            for m in 0..=layer {
                for j in 0..=n {
                    sq += table.get(layer - m, j) * table.get(m, n - j);
                }
            }
            self.squared.set(layer, n, sq);
            let mut fl = 0.0;
            for m in 0..=layer {
                for j in 0..=n {
                    fl += (n - j + 1) as f64
                        * self.squared.get(layer - m, j)
                        * table.get(m, n - j + 1);
                }
            }
            self.flux.set(layer, n, fl);
        }
        self.filled[layer] = self.filled[layer].max(h_needed + 1);
    }
}

impl System {
    pub fn wave(length: f64) -> Self {
        System::Wave(Wave { length })
    }

    pub fn mkdv(a: f64) -> Self {
        System::Mkdv(Mkdv { a })
    }

    pub fn name(&self) -> &'static str {
        match self {
            System::Wave(_) => "wave",
            System::Mkdv(_) => "mkdv",
        }
    }

    /// Number of stored temporal layers (the Cauchy data).
    pub fn temporal_order(&self) -> usize {
        match self {
            System::Wave(_) => 2,
            System::Mkdv(_) => 1,
        }
    }

    /// Spatial orders consumed per application of the recurrence (which
    /// raises the temporal order by `temporal_order()`).
    pub fn spatial_consumption(&self) -> usize {
        match self {
            System::Wave(_) => 2,
            System::Mkdv(_) => 3,
        }
    }

    pub fn analytic(&self, x: f64, t: f64) -> f64 {
        match self {
            System::Wave(w) => w.analytic(x, t),
            System::Mkdv(m) => m.analytic(x, t),
        }
    }

    /// Stored coefficients `F(0..T, 0..h_count)` of the initial data at `x`.
    pub fn initial_tower(&self, x: f64, h_count: usize) -> Series2 {
        match self {
            System::Wave(w) => w.initial_tower(x, h_count),
            System::Mkdv(m) => m.initial_tower(x, h_count),
        }
    }

    pub fn new_scratch(&self, k_max: usize, h_max: usize) -> Scratch {
        match self {
            System::Wave(_) => Scratch::None,
            System::Mkdv(_) => Scratch::Mkdv(MkdvScratch::new(k_max, h_max)),
        }
    }

    /// Evaluate the recurrence for `F(k, h)` from lower layers of `table`.
    pub fn coefficient(
        &self,
        table: &Series2,
        scratch: &mut Scratch,
        k: usize,
        h: usize,
    ) -> Result<f64, TruncationError> {
        match (self, scratch) {
            (System::Wave(_), _) => Wave::coefficient(table, k, h),
            (System::Mkdv(_), Scratch::Mkdv(s)) => Mkdv::coefficient(table, s, k, h),
            (System::Mkdv(_), Scratch::None) => panic!("mkdv recurrence needs its scratch"),
        }
    }
}
