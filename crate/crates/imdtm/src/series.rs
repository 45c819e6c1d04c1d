//! Truncated bivariate power-series tables and their coefficient algebra.
//!
//! A [`Series2`] stores scaled Taylor coefficients of a function of one
//! temporal and one spatial variable about a single expansion point:
//!
//! ```text
//! F(k, h) = 1/(k! h!) * ∂_t^k ∂_x^h f |_(t0, x0)
//! ```
//!
//! indexed by temporal order `k` in `0..=k_max` and spatial order `h` in
//! `0..=h_max`. All operations are exact up to the smallest shared truncation
//! bound; entries beyond a table's bounds are treated as unavailable, never as
//! zero, so binary operations require matching bounds and derivative shifts
//! shrink the output bounds. Nonlinear maps (division, sqrt, exp, ln, powers,
//! sin/cos) are evaluated by coefficient recurrences: the entry at the origin
//! is the scalar function of the input's origin entry, and every other entry
//! is obtained from a convolution over strictly earlier entries, recursing on
//! the temporal index when it is nonzero and on the spatial index otherwise.
//!
//! Values are plain `f64`; tables are immutable in spirit (all operations
//! return new tables) and safe to share across threads.

use std::fmt;

/// Error type for table operations.
#[derive(Clone, Debug, PartialEq)]
pub enum SeriesError {
    /// Binary operation on tables with different truncation bounds.
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    /// A derivative shift larger than the stored bounds would leave nothing.
    EmptyResult {
        r_t: usize,
        r_x: usize,
        k_max: usize,
        h_max: usize,
    },
    /// Division by a table whose leading coefficient is zero.
    ZeroLeadingCoefficient,
    /// sqrt/ln/pow need a strictly positive leading coefficient.
    NonPositiveLeadingCoefficient(f64),
    /// An operation produced a non-finite entry (overflow in a recurrence).
    NonFinite,
}

impl fmt::Display for SeriesError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeriesError::ShapeMismatch { left, right } => write!(
                f,
                "table bounds mismatch: ({}, {}) vs ({}, {})",
                left.0, left.1, right.0, right.1
            ),
            SeriesError::EmptyResult { r_t, r_x, k_max, h_max } => write!(
                f,
                "derivative shift ({r_t}, {r_x}) exceeds table bounds ({k_max}, {h_max})"
            ),
            SeriesError::ZeroLeadingCoefficient => {
                write!(f, "division by a series with zero leading coefficient")
            }
            SeriesError::NonPositiveLeadingCoefficient(v) => {
                write!(f, "operation requires a positive leading coefficient, got {v}")
            }
            SeriesError::NonFinite => write!(f, "operation produced a non-finite coefficient"),
        }
    }
}

impl std::error::Error for SeriesError {}

/// Dense table of scaled Taylor coefficients `F(k, h)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Series2 {
    k_max: usize,
    h_max: usize,
    coeffs: Vec<f64>, // row-major: index k * (h_max + 1) + h
}

impl Series2 {
    /// All-zero table with the given truncation bounds (inclusive).
    pub fn zeros(k_max: usize, h_max: usize) -> Self {
        Series2 {
            k_max,
            h_max,
            coeffs: vec![0.0; (k_max + 1) * (h_max + 1)],
        }
    }

    /// Table whose only nonzero entry is `F(0, 0) = c`.
    pub fn constant(c: f64, k_max: usize, h_max: usize) -> Self {
        let mut s = Series2::zeros(k_max, h_max);
        s.set(0, 0, c);
        s
    }

    /// Table for the monomial `t^k x^h`: a single unit entry at `(k, h)`.
    pub fn monomial(k_max: usize, h_max: usize, k: usize, h: usize) -> Self {
        let mut s = Series2::zeros(k_max, h_max);
        s.set(k, h, 1.0);
        s
    }

    /// Build from explicit rows (row `k` holds spatial orders `0..=h_max`).
    ///
    /// Panics if the rows are empty or ragged; intended for literals in tests
    /// and for assembling stored towers.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty() && !rows[0].is_empty(), "empty coefficient table");
        let h_len = rows[0].len();
        assert!(rows.iter().all(|r| r.len() == h_len), "ragged coefficient table");
        Series2 {
            k_max: rows.len() - 1,
            h_max: h_len - 1,
            coeffs: rows.concat(),
        }
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn h_max(&self) -> usize {
        self.h_max
    }

    #[inline]
    pub fn get(&self, k: usize, h: usize) -> f64 {
        debug_assert!(k <= self.k_max && h <= self.h_max);
        self.coeffs[k * (self.h_max + 1) + h]
    }

    #[inline]
    pub fn set(&mut self, k: usize, h: usize, v: f64) {
        debug_assert!(k <= self.k_max && h <= self.h_max);
        self.coeffs[k * (self.h_max + 1) + h] = v;
    }

    /// Spatial row at temporal order `k`.
    pub fn row(&self, k: usize) -> &[f64] {
        let w = self.h_max + 1;
        &self.coeffs[k * w..(k + 1) * w]
    }

    /// Copy truncated to smaller (or equal) bounds.
    pub fn truncated(&self, k_max: usize, h_max: usize) -> Self {
        assert!(k_max <= self.k_max && h_max <= self.h_max, "truncation must shrink bounds");
        let mut out = Series2::zeros(k_max, h_max);
        for k in 0..=k_max {
            for h in 0..=h_max {
                out.set(k, h, self.get(k, h));
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Evaluate the spatial series of row `k` at displacement `xi` from the
    /// expansion point (Horner).
    pub fn eval_row(&self, k: usize, xi: f64) -> f64 {
        self.row(k).iter().rev().fold(0.0, |acc, &c| acc * xi + c)
    }

    fn same_bounds(&self, other: &Self) -> Result<(), SeriesError> {
        if self.k_max != other.k_max || self.h_max != other.h_max {
            return Err(SeriesError::ShapeMismatch {
                left: (self.k_max, self.h_max),
                right: (other.k_max, other.h_max),
            });
        }
        Ok(())
    }

    /// Elementwise sum; bounds must match.
    pub fn add(&self, other: &Self) -> Result<Self, SeriesError> {
        self.same_bounds(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Series2 { k_max: self.k_max, h_max: self.h_max, coeffs })
    }

    /// Elementwise difference; bounds must match.
    pub fn sub(&self, other: &Self) -> Result<Self, SeriesError> {
        self.same_bounds(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Series2 { k_max: self.k_max, h_max: self.h_max, coeffs })
    }

    /// Multiply every entry by a scalar.
    pub fn scale(&self, c: f64) -> Self {
        Series2 {
            k_max: self.k_max,
            h_max: self.h_max,
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    /// Coefficients of `∂_t^{r_t} ∂_x^{r_x} f`.
    ///
    /// `W(k, h) = (k+r_t)!/k! * (h+r_x)!/h! * F(k+r_t, h+r_x)`; the output
    /// bounds shrink by `(r_t, r_x)` since higher entries are unavailable.
    pub fn shift_deriv(&self, r_t: usize, r_x: usize) -> Result<Self, SeriesError> {
        if r_t > self.k_max || r_x > self.h_max {
            return Err(SeriesError::EmptyResult {
                r_t,
                r_x,
                k_max: self.k_max,
                h_max: self.h_max,
            });
        }
        let mut out = Series2::zeros(self.k_max - r_t, self.h_max - r_x);
        for k in 0..=out.k_max {
            for h in 0..=out.h_max {
                let mut factor = 1.0;
                for i in 1..=r_t {
                    factor *= (k + i) as f64;
                }
                for j in 1..=r_x {
                    factor *= (h + j) as f64;
                }
                out.set(k, h, factor * self.get(k + r_t, h + r_x));
            }
        }
        Ok(out)
    }

    /// Cauchy product truncated to the shared bounds.
    pub fn mul(&self, other: &Self) -> Result<Self, SeriesError> {
        self.same_bounds(other)?;
        let mut out = Series2::zeros(self.k_max, self.h_max);
        for k in 0..=self.k_max {
            for h in 0..=self.h_max {
                let mut s = 0.0;
                for l in 0..=k {
                    for m in 0..=h {
                        s += self.get(l, m) * other.get(k - l, h - m);
                    }
                }
                out.set(k, h, s);
            }
        }
        Ok(out)
    }

    /// Quotient `w` with `self = w * other` to the shared bounds.
    ///
    /// Solved entry by entry in lexicographic order; the self-referential term
    /// of the defining convolution (the one at offset zero) is moved to the
    /// left-hand side, which is where the division by `other(0,0)` comes from.
    pub fn div(&self, other: &Self) -> Result<Self, SeriesError> {
        self.same_bounds(other)?;
        let z00 = other.get(0, 0);
        if z00 == 0.0 {
            return Err(SeriesError::ZeroLeadingCoefficient);
        }
        let mut w = Series2::zeros(self.k_max, self.h_max);
        for k in 0..=self.k_max {
            for h in 0..=self.h_max {
                let mut s = self.get(k, h);
                for l in 0..=k {
                    for m in 0..=h {
                        if l == 0 && m == 0 {
                            continue;
                        }
                        s -= other.get(l, m) * w.get(k - l, h - m);
                    }
                }
                w.set(k, h, s / z00);
            }
        }
        w.finite_checked()
    }

    /// Coefficients of `sqrt(f)`; requires `f(0,0) > 0`.
    pub fn sqrt(&self) -> Result<Self, SeriesError> {
        let y00 = self.get(0, 0);
        if y00 <= 0.0 {
            return Err(SeriesError::NonPositiveLeadingCoefficient(y00));
        }
        let mut w = Series2::zeros(self.k_max, self.h_max);
        w.set(0, 0, y00.sqrt());
        let two_w00 = 2.0 * w.get(0, 0);
        for k in 0..=self.k_max {
            for h in 0..=self.h_max {
                if k == 0 && h == 0 {
                    continue;
                }
                // w*w convolution without the two terms that contain w(k,h).
                let mut s = 0.0;
                for l in 0..=k {
                    for m in 0..=h {
                        if (l == 0 && m == 0) || (l == k && m == h) {
                            continue;
                        }
                        s += w.get(l, m) * w.get(k - l, h - m);
                    }
                }
                w.set(k, h, (self.get(k, h) - s) / two_w00);
            }
        }
        w.finite_checked()
    }

    /// Coefficients of `exp(f)`.
    pub fn exp(&self) -> Self {
        let mut w = Series2::zeros(self.k_max, self.h_max);
        w.set(0, 0, self.get(0, 0).exp());
        for k in 0..=self.k_max {
            for h in 0..=self.h_max {
                if k == 0 && h == 0 {
                    continue;
                }
                let s = if k > 0 {
                    let mut s = 0.0;
                    for l in 0..k {
                        for m in 0..=h {
                            s += (k - l) as f64 * w.get(l, m) * self.get(k - l, h - m);
                        }
                    }
                    s / k as f64
                } else {
                    let mut s = 0.0;
                    for m in 0..h {
                        s += (h - m) as f64 * w.get(0, m) * self.get(0, h - m);
                    }
                    s / h as f64
                };
                w.set(k, h, s);
            }
        }
        w
    }

    /// Coefficients of `ln(f)`; requires `f(0,0) > 0`.
    pub fn ln(&self) -> Result<Self, SeriesError> {
        let y00 = self.get(0, 0);
        if y00 <= 0.0 {
            return Err(SeriesError::NonPositiveLeadingCoefficient(y00));
        }
        let mut w = Series2::zeros(self.k_max, self.h_max);
        w.set(0, 0, y00.ln());
        for k in 0..=self.k_max {
            for h in 0..=self.h_max {
                if k == 0 && h == 0 {
                    continue;
                }
                let s = if k > 0 {
                    let mut s = 0.0;
                    for l in 0..k {
                        for m in 0..=h {
                            if l == 0 && m == 0 {
                                continue; // would reference w(k,h) itself
                            }
                            s += (k - l) as f64 * self.get(l, m) * w.get(k - l, h - m);
                        }
                    }
                    s / k as f64
                } else {
                    let mut s = 0.0;
                    for m in 1..h {
                        s += (h - m) as f64 * self.get(0, m) * w.get(0, h - m);
                    }
                    s / h as f64
                };
                w.set(k, h, (self.get(k, h) - s) / y00);
            }
        }
        w.finite_checked()
    }

    /// Coefficients of `f^s` for real `s`; requires `f(0,0) > 0`.
    pub fn powf(&self, s: f64) -> Result<Self, SeriesError> {
        let y00 = self.get(0, 0);
        if y00 <= 0.0 {
            return Err(SeriesError::NonPositiveLeadingCoefficient(y00));
        }
        let mut w = Series2::zeros(self.k_max, self.h_max);
        w.set(0, 0, y00.powf(s));
        let w00 = w.get(0, 0);
        for k in 0..=self.k_max {
            for h in 0..=self.h_max {
                if k == 0 && h == 0 {
                    continue;
                }
                let acc = if k > 0 {
                    let mut acc = 0.0;
                    for l in 0..k {
                        for m in 0..=h {
                            if l == 0 && m == 0 {
                                continue; // summand contains w(k,h)
                            }
                            acc += (k - l) as f64
                                * (s * w.get(l, m) * self.get(k - l, h - m)
                                    - self.get(l, m) * w.get(k - l, h - m));
                        }
                    }
                    acc / k as f64
                } else {
                    let mut acc = 0.0;
                    for m in 1..h {
                        acc += (h - m) as f64
                            * (s * w.get(0, m) * self.get(0, h - m)
                                - self.get(0, m) * w.get(0, h - m));
                    }
                    acc / h as f64
                };
                w.set(k, h, (s * w00 * self.get(k, h) + acc) / y00);
            }
        }
        w.finite_checked()
    }

    /// Coefficients of `(sin(f), cos(f))`, computed as a mutually recursive
    /// pair.
    pub fn sin_cos(&self) -> (Self, Self) {
        let mut sn = Series2::zeros(self.k_max, self.h_max);
        let mut cs = Series2::zeros(self.k_max, self.h_max);
        let (s0, c0) = self.get(0, 0).sin_cos();
        sn.set(0, 0, s0);
        cs.set(0, 0, c0);
        for k in 0..=self.k_max {
            for h in 0..=self.h_max {
                if k == 0 && h == 0 {
                    continue;
                }
                let (ws, wc) = if k > 0 {
                    let mut ws = 0.0;
                    let mut wc = 0.0;
                    for l in 0..k {
                        for m in 0..=h {
                            let fac = (k - l) as f64 * self.get(k - l, h - m);
                            ws += fac * cs.get(l, m);
                            wc += fac * sn.get(l, m);
                        }
                    }
                    (ws / k as f64, -wc / k as f64)
                } else {
                    let mut ws = 0.0;
                    let mut wc = 0.0;
                    for m in 0..h {
                        let fac = (h - m) as f64 * self.get(0, h - m);
                        ws += fac * cs.get(0, m);
                        wc += fac * sn.get(0, m);
                    }
                    (ws / h as f64, -wc / h as f64)
                };
                sn.set(k, h, ws);
                cs.set(k, h, wc);
            }
        }
        (sn, cs)
    }

    fn finite_checked(self) -> Result<Self, SeriesError> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(SeriesError::NonFinite)
        }
    }
}
