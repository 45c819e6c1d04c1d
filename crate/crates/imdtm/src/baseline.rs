//! RK4 method-of-lines reference scheme with central-difference spatial
//! operators of configurable accuracy order.

use crate::equations::System;
use crate::evolver::StepDiverged;
use crate::stencil::{self, NeighborhoodGeometry, StencilError};
use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum BaselineError {
    Invalid(String),
    Stencil(StencilError),
}

impl fmt::Display for BaselineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaselineError::Invalid(msg) => write!(f, "invalid baseline configuration: {msg}"),
            BaselineError::Stencil(e) => write!(f, "stencil construction failed: {e}"),
        }
    }
}

impl std::error::Error for BaselineError {}

impl From<StencilError> for BaselineError {
    fn from(e: StencilError) -> Self {
        BaselineError::Stencil(e)
    }
}

/// A central finite-difference operator for the `d`-th spatial derivative at
/// accuracy order `p`, with weights taken from the dense-solve route.
#[derive(Clone, Debug)]
pub struct FdStencil {
    pub derivative: usize,
    pub accuracy: usize,
    radius: usize,
    weights: Vec<f64>, // raw-derivative weights, 1/dx^d included
}

impl FdStencil {
    pub fn central(derivative: usize, accuracy: usize, dx: f64) -> Result<FdStencil, BaselineError> {
        if derivative == 0 || accuracy == 0 || !accuracy.is_multiple_of(2) {
            return Err(BaselineError::Invalid(format!(
                "need derivative ≥ 1 and even accuracy, got d={derivative}, p={accuracy}"
            )));
        }
        // smallest odd point count with symmetric accuracy ≥ p
        let mut m = derivative + accuracy - 1;
        if m.is_multiple_of(2) {
            m += 1;
        }
        let radius = (m - 1) / 2;
        let geom = NeighborhoodGeometry::uniform(radius, dx)?;
        let ws = stencil::birkhoff_weights_oracle(&geom, 0..1, &[derivative])?;
        // the weight set yields the scaled coefficient f^(d)/d!; fold the
        // factorial back in for a raw derivative
        let dfact: f64 = (1..=derivative).map(|i| i as f64).product();
        let weights = (0..m).map(|j| ws.weight(derivative, j, 0) * dfact).collect();
        Ok(FdStencil { derivative, accuracy, radius, weights })
    }

    pub fn width(&self) -> usize {
        2 * self.radius + 1
    }

    /// Apply at one point with periodic wrap.
    pub fn apply(&self, u: &[f64], i: usize) -> f64 {
        let n = u.len();
        let mut acc = 0.0;
        for (j, w) in self.weights.iter().enumerate() {
            let idx = (i + n + j - self.radius) % n;
            acc += w * u[idx];
        }
        acc
    }

    /// The derivative field over the whole (periodic) array.
    pub fn derivative_field(&self, u: &[f64]) -> Vec<f64> {
        (0..u.len()).map(|i| self.apply(u, i)).collect()
    }
}

/// One classical fourth-order Runge-Kutta step of `y' = rhs(y)`.
pub fn rk4_step(y: &[f64], dt: f64, rhs: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    let k1 = rhs(y);
    let mid1: Vec<f64> = y.iter().zip(&k1).map(|(a, b)| a + 0.5 * dt * b).collect();
    let k2 = rhs(&mid1);
    let mid2: Vec<f64> = y.iter().zip(&k2).map(|(a, b)| a + 0.5 * dt * b).collect();
    let k3 = rhs(&mid2);
    let end: Vec<f64> = y.iter().zip(&k3).map(|(a, b)| a + dt * b).collect();
    let k4 = rhs(&end);
    y.iter()
        .enumerate()
        .map(|(i, a)| a + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

enum MolKind {
    /// first-order system (u, u̇): u' = u̇, u̇' = u_xx
    Wave { d2: FdStencil },
    /// u' = -u² u_x - u_xxx
    Mkdv { d1: FdStencil, d3: FdStencil },
}

/// Method-of-lines state holder and stepper for the two systems.
pub struct MolSolver {
    kind: MolKind,
    n: usize,
    dx: f64,
}

impl MolSolver {
    pub fn new(system: &System, n: usize, length: f64, accuracy: usize) -> Result<MolSolver, BaselineError> {
        let dx = length / n as f64;
        let kind = match system {
            System::Wave(_) => MolKind::Wave {
                d2: FdStencil::central(2, accuracy, dx)?,
            },
            System::Mkdv(_) => MolKind::Mkdv {
                d1: FdStencil::central(1, accuracy, dx)?,
                d3: FdStencil::central(3, accuracy, dx)?,
            },
        };
        let width = match &kind {
            MolKind::Wave { d2 } => d2.width(),
            MolKind::Mkdv { d1, d3 } => d1.width().max(d3.width()),
        };
        if n < width {
            return Err(BaselineError::Invalid(format!(
                "N = {n} is smaller than the stencil width {width}"
            )));
        }
        Ok(MolSolver { kind, n, dx })
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Sample the system's initial data.
    pub fn initial_state(&self, system: &System) -> Vec<f64> {
        let u: Vec<f64> = (0..self.n)
            .map(|i| system.analytic(i as f64 * self.dx, 0.0))
            .collect();
        match &self.kind {
            MolKind::Wave { .. } => {
                // velocity of the standing wave is zero at t = 0
                let mut state = u;
                state.extend(std::iter::repeat_n(0.0, self.n));
                state
            }
            MolKind::Mkdv { .. } => u,
        }
    }

    fn rhs(&self, y: &[f64]) -> Vec<f64> {
        match &self.kind {
            MolKind::Wave { d2 } => {
                let (u, v) = y.split_at(self.n);
                let mut out = v.to_vec();
                out.extend(d2.derivative_field(u));
                out
            }
            MolKind::Mkdv { d1, d3 } => {
                let ux = d1.derivative_field(y);
                let uxxx = d3.derivative_field(y);
                (0..self.n)
                    .map(|i| -y[i] * y[i] * ux[i] - uxxx[i])
                    .collect()
            }
        }
    }

    pub fn step(&self, y: &[f64], dt: f64) -> Result<Vec<f64>, StepDiverged> {
        let next = rk4_step(y, dt, |s| self.rhs(s));
        if next.iter().all(|v| v.is_finite()) {
            Ok(next)
        } else {
            Err(StepDiverged)
        }
    }

    /// Function values (the `u` part of the state).
    pub fn values<'y>(&self, y: &'y [f64]) -> &'y [f64] {
        &y[..self.n]
    }
}
