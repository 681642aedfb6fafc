//! Prescribed velocity fields with closed-form derivatives.
//!
//! Divergence-free fields are rotated gradients of a stream function,
//! `v = (∂_y ψ, -∂_x ψ)`. The radial field is kept for geometric tests and is
//! not solenoidal.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub type Point = [f64; 2];

/// `v`, `∇v` and `∇²v` at a point. `grad[i][j] = ∂_j v_i`,
/// `hess[i][j][k] = ∂_j ∂_k v_i`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VelocityJet {
    pub v: [f64; 2],
    pub grad: [[f64; 2]; 2],
    pub hess: [[[f64; 2]; 2]; 2],
}

impl VelocityJet {
    /// `∇v · a`
    pub fn grad_dot(&self, a: [f64; 2]) -> [f64; 2] {
        [
            self.grad[0][0] * a[0] + self.grad[0][1] * a[1],
            self.grad[1][0] * a[0] + self.grad[1][1] * a[1],
        ]
    }

    /// `∇²v[a, b]`
    pub fn hess_dot(&self, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (i, o) in out.iter_mut().enumerate() {
            for j in 0..2 {
                for k in 0..2 {
                    *o += self.hess[i][j][k] * a[j] * b[k];
                }
            }
        }
        out
    }

    pub fn divergence(&self) -> f64 {
        self.grad[0][0] + self.grad[1][1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum VelocityField {
    Zero,
    /// `ψ = A sin²(πx) sin²(πy)`
    StreamSinSq { amplitude: f64 },
    /// `v = ω (-(y - y_c), x - x_c)`
    RigidRotation { omega: f64, center: Point },
    /// `v = (γ y, 0)`
    LinearShear { rate: f64 },
    /// `v = a (x - c)`; not divergence free.
    Radial { rate: f64, center: Point },
}

impl Default for VelocityField {
    fn default() -> Self {
        VelocityField::StreamSinSq { amplitude: 0.02 }
    }
}

/// Derivatives of `sin²(πx)` of order 0..=4.
fn sin_sq(x: f64) -> [f64; 5] {
    let s = (PI * x).sin();
    let (s2, c2) = (2.0 * PI * x).sin_cos();
    [s * s, PI * s2, 2.0 * PI * PI * c2, -4.0 * PI.powi(3) * s2, -8.0 * PI.powi(4) * c2]
}

impl VelocityField {
    /// Stream-function derivative `∂_x^a ∂_y^b ψ` for `a + b <= 3`.
    fn psi_derivative(&self, x: Point, a: usize, b: usize) -> Option<f64> {
        match *self {
            VelocityField::Zero => Some(0.0),
            VelocityField::StreamSinSq { amplitude } => {
                let sx = sin_sq(x[0]);
                let sy = sin_sq(x[1]);
                Some(amplitude * sx[a] * sy[b])
            }
            VelocityField::RigidRotation { omega, center } => {
                let dx = x[0] - center[0];
                let dy = x[1] - center[1];
                Some(match (a, b) {
                    (0, 0) => -0.5 * omega * (dx * dx + dy * dy),
                    (1, 0) => -omega * dx,
                    (0, 1) => -omega * dy,
                    (2, 0) | (0, 2) => -omega,
                    _ => 0.0,
                })
            }
            VelocityField::LinearShear { rate } => Some(match (a, b) {
                (0, 0) => 0.5 * rate * x[1] * x[1],
                (0, 1) => rate * x[1],
                (0, 2) => rate,
                _ => 0.0,
            }),
            VelocityField::Radial { .. } => None,
        }
    }

    /// Stream function value, when the field has one.
    pub fn psi(&self, x: Point) -> Option<f64> {
        self.psi_derivative(x, 0, 0)
    }

    pub fn jet(&self, x: Point) -> VelocityJet {
        if let VelocityField::Radial { rate, center } = *self {
            return VelocityJet {
                v: [rate * (x[0] - center[0]), rate * (x[1] - center[1])],
                grad: [[rate, 0.0], [0.0, rate]],
                hess: [[[0.0; 2]; 2]; 2],
            };
        }
        let d = |a: usize, b: usize| self.psi_derivative(x, a, b).unwrap_or(0.0);
        // v0 = ψ_y, v1 = -ψ_x; derivative index 0 -> x, 1 -> y
        let exps = |i: usize, js: &[usize]| -> (usize, usize) {
            let mut a = if i == 1 { 1 } else { 0 };
            let mut b = if i == 0 { 1 } else { 0 };
            for &j in js {
                if j == 0 { a += 1 } else { b += 1 }
            }
            (a, b)
        };
        let sign = |i: usize| if i == 0 { 1.0 } else { -1.0 };
        let mut jet = VelocityJet::default();
        for i in 0..2 {
            let (a, b) = exps(i, &[]);
            jet.v[i] = sign(i) * d(a, b);
            for j in 0..2 {
                let (a, b) = exps(i, &[j]);
                jet.grad[i][j] = sign(i) * d(a, b);
                for k in 0..2 {
                    let (a, b) = exps(i, &[j, k]);
                    jet.hess[i][j][k] = sign(i) * d(a, b);
                }
            }
        }
        jet
    }

    pub fn velocity(&self, x: Point) -> [f64; 2] {
        match *self {
            VelocityField::Zero => [0.0, 0.0],
            _ => self.jet(x).v,
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            VelocityField::Zero => true,
            VelocityField::StreamSinSq { amplitude } => amplitude == 0.0,
            VelocityField::RigidRotation { omega, .. } => omega == 0.0,
            VelocityField::LinearShear { rate } => rate == 0.0,
            VelocityField::Radial { rate, .. } => rate == 0.0,
        }
    }

    /// The same field with its magnitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            VelocityField::Zero => VelocityField::Zero,
            VelocityField::StreamSinSq { amplitude } => {
                VelocityField::StreamSinSq { amplitude: amplitude * factor }
            }
            VelocityField::RigidRotation { omega, center } => {
                VelocityField::RigidRotation { omega: omega * factor, center }
            }
            VelocityField::LinearShear { rate } => VelocityField::LinearShear { rate: rate * factor },
            VelocityField::Radial { rate, center } => VelocityField::Radial { rate: rate * factor, center },
        }
    }

    /// Largest speed over a uniform sample of the unit square.
    pub fn max_speed_unit_square(&self) -> f64 {
        let n = 64;
        let mut m = 0.0f64;
        for i in 0..=n {
            for j in 0..=n {
                let v = self.velocity([i as f64 / n as f64, j as f64 / n as f64]);
                m = m.max(v[0].hypot(v[1]));
            }
        }
        m
    }
}
