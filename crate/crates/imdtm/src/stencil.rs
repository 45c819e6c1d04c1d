//! Generalized finite-difference weights over derivative towers.
//!
//! Classic finite-difference stencils combine *function values* at
//! neighboring points to estimate a derivative at a center point. Here each
//! point carries several stored derivative coefficients, and the weights map
//! a whole band of coefficients per neighbor to reconstructed higher-order
//! coefficients at the center:
//!
//! ```text
//! F̂(h_t) = Σ_j Σ_s  w[h_t][j][s] · C_j(s)
//! ```
//!
//! where `C_j(s)` is the scaled coefficient `f^(s)(x_j)/s!` stored at
//! neighbor `j` (expanded about that neighbor's own position) and `F̂(h_t)` is
//! the scaled coefficient of order `h_t` about the center. With `m` points
//! and `q` stored orders per point the underlying interpolant is the unique
//! Hermite polynomial matching all `m·q` data, so reconstructions are exact
//! for polynomials through degree `m·q − 1` (the *capacity*).
//!
//! Two independent constructions are provided:
//!
//! * [`build_weights`] — evaluates the multipoint Taylor expansion of the
//!   interpolant directly. The expansion's point-local coefficient
//!   functionals are evaluated recursively through a logarithmic-derivative
//!   identity and the univariate product rule, and each term's polynomial
//!   factor is expanded about the center; no linear system is formed.
//! * [`birkhoff_weights_oracle`] — forms and solves the dense confluent
//!   interpolation system, one right-hand side per datum.
//!
//! Both evaluate in exact rational arithmetic and round to `f64` once at the
//! end: at high capacity the equivalent linear systems have condition numbers
//! far beyond what native `f64` construction could survive, while the inputs
//! (finite `f64` offsets) are exact rationals. Weights depend only on the
//! offsets and order sets, so a weight set can be cached and reused for every
//! point of a uniform grid.

use std::fmt;
use std::ops::Range;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// Error type for geometry validation and weight construction.
#[derive(Clone, Debug, PartialEq)]
pub enum StencilError {
    /// Offsets must be strictly increasing and pairwise distinct.
    DuplicateOffsets,
    /// Exactly one offset must be zero (the center point).
    NoCenter,
    /// Offsets must be finite and, for uniform construction, dx must be > 0.
    BadGeometry(String),
    /// Source band is empty.
    EmptySourceBand,
    /// A target order lies below the source band (unreachable) or beyond the
    /// interpolant capacity.
    TargetOutOfRange {
        target: usize,
        base: usize,
        capacity: usize,
    },
    /// The interpolation system is singular for this configuration.
    Singular,
}

impl fmt::Display for StencilError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StencilError::DuplicateOffsets => write!(f, "neighborhood offsets must be distinct"),
            StencilError::NoCenter => write!(f, "neighborhood must contain exactly one zero offset"),
            StencilError::BadGeometry(msg) => write!(f, "bad neighborhood geometry: {msg}"),
            StencilError::EmptySourceBand => write!(f, "source order band is empty"),
            StencilError::TargetOutOfRange { target, base, capacity } => write!(
                f,
                "target order {target} outside reachable range {base}..={} (capacity {capacity})",
                base + capacity
            ),
            StencilError::Singular => write!(f, "degenerate configuration: interpolation system is singular"),
        }
    }
}

impl std::error::Error for StencilError {}

/// The set of neighborhood points, as offsets relative to the center.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborhoodGeometry {
    offsets: Vec<f64>,
    center: usize,
}

impl NeighborhoodGeometry {
    /// Build from offsets relative to the center. The offsets are sorted;
    /// they must be finite, pairwise distinct, and include exactly one zero.
    pub fn new(mut offsets: Vec<f64>) -> Result<Self, StencilError> {
        if offsets.is_empty() {
            return Err(StencilError::BadGeometry("no points".into()));
        }
        if offsets.iter().any(|d| !d.is_finite()) {
            return Err(StencilError::BadGeometry("non-finite offset".into()));
        }
        offsets.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if offsets.windows(2).any(|w| w[0] == w[1]) {
            return Err(StencilError::DuplicateOffsets);
        }
        let center = offsets
            .iter()
            .position(|&d| d == 0.0)
            .ok_or(StencilError::NoCenter)?;
        Ok(NeighborhoodGeometry { offsets, center })
    }

    /// Symmetric uniform neighborhood: offsets `-radius*dx ..= radius*dx`.
    pub fn uniform(radius: usize, dx: f64) -> Result<Self, StencilError> {
        if !dx.is_finite() || dx <= 0.0 {
            return Err(StencilError::BadGeometry(format!("dx = {dx}")));
        }
        let offsets = (-(radius as isize)..=radius as isize)
            .map(|i| i as f64 * dx)
            .collect();
        NeighborhoodGeometry::new(offsets)
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// Index of the center (zero) offset.
    pub fn center_index(&self) -> usize {
        self.center
    }
}

/// Cached linear weights mapping stored neighborhood coefficients to
/// reconstructed coefficients at the center.
#[derive(Clone, Debug)]
pub struct StencilWeightSet {
    geometry: NeighborhoodGeometry,
    source_orders: Range<usize>,
    target_orders: Vec<usize>,
    // weights[t][j * q + s_rel]
    weights: Vec<Vec<f64>>,
}

impl StencilWeightSet {
    pub fn geometry(&self) -> &NeighborhoodGeometry {
        &self.geometry
    }

    /// Stored orders consumed at each neighbor (a contiguous band).
    pub fn source_orders(&self) -> Range<usize> {
        self.source_orders.clone()
    }

    /// Orders reconstructed at the center, in the order results are returned.
    pub fn target_orders(&self) -> &[usize] {
        &self.target_orders
    }

    /// Weight applied to stored order `source` (absolute) at neighbor `j`
    /// when reconstructing `target` (absolute).
    pub fn weight(&self, target: usize, j: usize, source: usize) -> f64 {
        let t = self
            .target_orders
            .iter()
            .position(|&h| h == target)
            .expect("target order not in weight set");
        let q = self.source_orders.len();
        self.weights[t][j * q + (source - self.source_orders.start)]
    }

    /// Reconstruct all target orders from a data accessor
    /// `data(neighbor_index, absolute_source_order)`.
    pub fn apply<D: Fn(usize, usize) -> f64>(&self, data: D) -> Vec<f64> {
        let q = self.source_orders.len();
        self.weights
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                for j in 0..self.geometry.len() {
                    for (r, s) in self.source_orders.clone().enumerate() {
                        acc += row[j * q + r] * data(j, s);
                    }
                }
                acc
            })
            .collect()
    }

    /// Highest polynomial degree reconstructed exactly: `m*q - 1` relative to
    /// the source band base.
    pub fn capacity(&self) -> usize {
        self.geometry.len() * self.source_orders.len() - 1
    }
}

fn validate(
    geom: &NeighborhoodGeometry,
    source_orders: &Range<usize>,
    target_orders: &[usize],
) -> Result<(), StencilError> {
    let q = source_orders.len();
    if q == 0 {
        return Err(StencilError::EmptySourceBand);
    }
    let capacity = geom.len() * q - 1;
    for &t in target_orders {
        if t < source_orders.start || t - source_orders.start > capacity {
            return Err(StencilError::TargetOutOfRange {
                target: t,
                base: source_orders.start,
                capacity,
            });
        }
    }
    Ok(())
}

/// Generate reconstruction weights from the multipoint Taylor expansion of
/// the Hermite interpolant (no linear solve).
pub fn build_weights(
    geom: &NeighborhoodGeometry,
    source_orders: Range<usize>,
    target_orders: &[usize],
) -> Result<StencilWeightSet, StencilError> {
    validate(geom, &source_orders, target_orders)?;
    let offsets = exact_offsets(geom);
    let q = source_orders.len();
    let rel_targets: Vec<usize> = target_orders
        .iter()
        .map(|&t| t - source_orders.start)
        .collect();
    let wrel = relative_weights_multipoint(&offsets, q, &rel_targets);
    Ok(absolutize(
        geom.clone(),
        source_orders,
        target_orders.to_vec(),
        wrel,
    ))
}

/// Generate the same weights by solving the dense interpolation system
/// (independent verification route; practical in one dimension).
pub fn birkhoff_weights_oracle(
    geom: &NeighborhoodGeometry,
    source_orders: Range<usize>,
    target_orders: &[usize],
) -> Result<StencilWeightSet, StencilError> {
    validate(geom, &source_orders, target_orders)?;
    let offsets = exact_offsets(geom);
    let q = source_orders.len();
    let rel_targets: Vec<usize> = target_orders
        .iter()
        .map(|&t| t - source_orders.start)
        .collect();
    let wrel = relative_weights_linear_solve(&offsets, q, &rel_targets)?;
    Ok(absolutize(
        geom.clone(),
        source_orders,
        target_orders.to_vec(),
        wrel,
    ))
}

// ---------------------------------------------------------------------------
// Exact-rational internals
// ---------------------------------------------------------------------------

type Rat = BigRational;

fn exact_offsets(geom: &NeighborhoodGeometry) -> Vec<Rat> {
    geom.offsets()
        .iter()
        .map(|&d| BigRational::from_float(d).expect("offsets validated finite"))
        .collect()
}

fn fact_big(n: usize) -> BigInt {
    let mut f = BigInt::one();
    for i in 2..=n {
        f *= i;
    }
    f
}

fn binom_big(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut num = BigInt::one();
    for i in 0..k {
        num *= n - i;
    }
    num / fact_big(k)
}

/// Round a possibly huge exact rational to the nearest-ish f64 by keeping
/// ~80 significant bits of the quotient. `to_f64` on the raw numerator and
/// denominator overflows once either exceeds f64 range.
fn rat_to_f64(r: &Rat) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let nbits = r.numer().bits() as i64;
    let dbits = r.denom().bits() as i64;
    let shift = (dbits - nbits + 80).max(0) as u64;
    let q = (r.numer() << shift) / r.denom();
    let qf = q.to_f64().unwrap_or(f64::INFINITY);
    qf * 2f64.powi(-(shift as i32))
}

/// Dense polynomial with rational coefficients, c[i] the coefficient of x^i.
#[derive(Clone)]
struct RatPoly {
    c: Vec<Rat>,
}

impl RatPoly {
    fn one() -> Self {
        RatPoly { c: vec![Rat::one()] }
    }

    fn coeff(&self, i: usize) -> Rat {
        self.c.get(i).cloned().unwrap_or_else(Rat::zero)
    }

    /// self * (x - root)
    fn mul_linear(&self, root: &Rat) -> Self {
        let mut out = vec![Rat::zero(); self.c.len() + 1];
        for (i, ci) in self.c.iter().enumerate() {
            out[i + 1] += ci;
            out[i] -= ci * root;
        }
        RatPoly { c: out }
    }

    fn mul(&self, other: &Self) -> Self {
        let mut out = vec![Rat::zero(); self.c.len() + other.c.len() - 1];
        for (i, a) in self.c.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.c.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        RatPoly { c: out }
    }
}

/// Derivatives, at point `offsets[k]`, of `R(x) = Π_s (x - offsets[s])^(-beta[s])`
/// (with `beta[k] == 0`), for orders `0..=n_max`.
///
/// Uses `R' = R · Λ` with `Λ = -Σ_s beta_s / (x - x_s)`, whose own derivatives
/// at the evaluation point are elementary, and the product rule to recurse.
fn inverse_product_derivs(offsets: &[Rat], beta: &[usize], k: usize, n_max: usize) -> Vec<Rat> {
    debug_assert_eq!(beta[k], 0);
    let mut r0 = Rat::one();
    for (s, b) in beta.iter().enumerate() {
        if *b == 0 {
            continue;
        }
        let diff = &offsets[k] - &offsets[s];
        let mut p = Rat::one();
        for _ in 0..*b {
            p *= &diff;
        }
        r0 /= p;
    }

    // lambda[p] = Λ^{(p)}(x_k) = Σ_s -beta_s · (-1)^p · p! / (x_k - x_s)^{p+1}
    let mut lambda = vec![Rat::zero(); n_max.max(1)];
    for (s, b) in beta.iter().enumerate() {
        if *b == 0 {
            continue;
        }
        let diff = &offsets[k] - &offsets[s];
        let inv = diff.recip();
        let mut inv_pow = inv.clone(); // (x_k - x_s)^-(p+1)
        let mut sign_fact = Rat::one(); // (-1)^p p!
        for (p, slot) in lambda.iter_mut().enumerate() {
            if p > 0 {
                inv_pow *= &inv;
                sign_fact *= Rat::from_integer(BigInt::from(-(p as i64)));
            }
            *slot -= Rat::from_integer(BigInt::from(*b as i64)) * &sign_fact * &inv_pow;
        }
    }

    let mut derivs = vec![r0; 1];
    for p in 0..n_max {
        // R^{(p+1)} = Σ_i C(p, i) R^{(i)} Λ^{(p-i)}
        let mut next = Rat::zero();
        for (i, ri) in derivs.iter().enumerate() {
            let c = Rat::from_integer(binom_big(p, i));
            next += c * ri * &lambda[p - i];
        }
        derivs.push(next);
    }
    derivs
}

/// Weights in the band-relative frame: data are scaled coefficients
/// `G_j(r) = g^(r)(x_j)/r!` for `r` in `0..q`, outputs are scaled center
/// coefficients `Ĝ(r_t)`. Layout: `w[t][j*q + r]`.
fn relative_weights_multipoint(offsets: &[Rat], q: usize, rel_targets: &[usize]) -> Vec<Vec<Rat>> {
    let m = offsets.len();
    let mut w = vec![vec![Rat::zero(); m * q]; rel_targets.len()];

    // π(x) = Π_k (x - x_k)
    let mut pi = RatPoly::one();
    for d in offsets {
        pi = pi.mul_linear(d);
    }
    // Lagrange numerators and denominators
    let mut lag_num = Vec::with_capacity(m);
    let mut lag_den = Vec::with_capacity(m);
    for j in 0..m {
        let mut num = RatPoly::one();
        let mut den = Rat::one();
        for (s, d) in offsets.iter().enumerate() {
            if s == j {
                continue;
            }
            num = num.mul_linear(d);
            den *= &offsets[j] - d;
        }
        lag_num.push(num);
        lag_den.push(den);
    }

    let facts: Vec<Rat> = (0..=q).map(|n| Rat::from_integer(fact_big(n))).collect();

    let mut pi_pow = RatPoly::one();
    for n in 0..q {
        if n > 0 {
            pi_pow = pi_pow.mul(&pi);
        }
        for j in 0..m {
            // term polynomial B(x) = ℓ_j(x) · π(x)^n, scaled by 1/lag_den[j]
            let b = lag_num[j].mul(&pi_pow);
            // per-target coefficients of B present in this term
            let coeffs: Vec<(usize, Rat)> = rel_targets
                .iter()
                .enumerate()
                .filter_map(|(ti, &rt)| {
                    let c = b.coeff(rt);
                    if c.is_zero() {
                        None
                    } else {
                        Some((ti, c / &lag_den[j]))
                    }
                })
                .collect();
            if coeffs.is_empty() {
                continue;
            }
            // the coefficient functional: evaluations at every point k
            for k in 0..m {
                let extra = usize::from(k != j);
                if n < extra {
                    continue; // the n = 0 functional only reads the point itself
                }
                let nn = n - extra;
                let mut beta = vec![n; m];
                beta[k] = 0;
                if k != j {
                    beta[j] = n + 1;
                }
                let derivs = inverse_product_derivs(offsets, &beta, k, nn);
                for r in 0..=nn {
                    // contribution of g^(r)(x_k); ×r! converts to the scaled
                    // datum G_k(r)
                    let alpha = &derivs[nn - r] / (&facts[r] * &facts[nn - r]);
                    let alpha_scaled = alpha * &facts[r];
                    for (ti, c) in &coeffs {
                        w[*ti][k * q + r] += c * &alpha_scaled;
                    }
                }
            }
        }
    }
    w
}

/// Same frame as [`relative_weights_multipoint`], obtained by inverting the
/// confluent interpolation matrix `M[(j,r)][p] = C(p,r) x_j^(p-r)`.
fn relative_weights_linear_solve(
    offsets: &[Rat],
    q: usize,
    rel_targets: &[usize],
) -> Result<Vec<Vec<Rat>>, StencilError> {
    let m = offsets.len();
    let dim = m * q;
    let mut mat = vec![vec![Rat::zero(); dim]; dim];
    for j in 0..m {
        // powers x_j^0 ..= x_j^(dim-1)
        let mut pows = Vec::with_capacity(dim);
        let mut acc = Rat::one();
        for _ in 0..dim {
            pows.push(acc.clone());
            acc *= &offsets[j];
        }
        for r in 0..q {
            let row = &mut mat[j * q + r];
            for (p, slot) in row.iter_mut().enumerate() {
                if p >= r {
                    *slot = Rat::from_integer(binom_big(p, r)) * &pows[p - r];
                }
            }
        }
    }
    let inv = invert(mat).ok_or(StencilError::Singular)?;
    // c = M⁻¹ d, so the weight of datum (j,r) in coefficient p is M⁻¹[p][(j,r)]
    Ok(rel_targets
        .iter()
        .map(|&rt| inv[rt].clone())
        .collect())
}

/// Exact Gauss-Jordan inversion; returns None when singular.
fn invert(mut a: Vec<Vec<Rat>>) -> Option<Vec<Vec<Rat>>> {
    let n = a.len();
    let mut inv: Vec<Vec<Rat>> = (0..n)
        .map(|i| {
            let mut row = vec![Rat::zero(); n];
            row[i] = Rat::one();
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col].clone();
        for x in a[col].iter_mut().chain(inv[col].iter_mut()) {
            *x /= &p;
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for c in 0..n {
                let d = &a[col][c] * &f;
                a[r][c] -= d;
                let d = &inv[col][c] * &f;
                inv[r][c] -= d;
            }
        }
    }
    Some(inv)
}

/// Rescale band-relative weights to absolute stored/reconstructed orders and
/// round to f64.
///
/// Stored data relate to the band-relative frame of `g = f^(base)` by
/// `G_j(r) = C_j(s) · s!/(s-base)!` with `s = base + r`, and outputs by
/// `F̂(h_t) = Ĝ(h_t - base) · (h_t - base)!/h_t!`.
fn absolutize(
    geometry: NeighborhoodGeometry,
    source_orders: Range<usize>,
    target_orders: Vec<usize>,
    wrel: Vec<Vec<Rat>>,
) -> StencilWeightSet {
    let base = source_orders.start;
    let q = source_orders.len();
    let m = geometry.len();
    let weights = wrel
        .into_iter()
        .zip(&target_orders)
        .map(|(row, &ht)| {
            let out_scale = Rat::from_integer(fact_big(ht - base)) / Rat::from_integer(fact_big(ht));
            let mut out = vec![0.0; m * q];
            for j in 0..m {
                for r in 0..q {
                    let s = base + r;
                    let in_scale =
                        Rat::from_integer(fact_big(s)) / Rat::from_integer(fact_big(s - base));
                    let w = &row[j * q + r] * &in_scale * &out_scale;
                    out[j * q + r] = rat_to_f64(&w);
                }
            }
            out
        })
        .collect();
    StencilWeightSet {
        geometry,
        source_orders,
        target_orders,
        weights,
    }
}
