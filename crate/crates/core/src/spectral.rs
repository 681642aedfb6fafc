//! Smallest eigenvalue of the linearized operator `−ε Δ_h + ε⁻¹ f''(c_A)`.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::approx::ApproximateSolution;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Relative eigenpair residual at which the iteration stops.
pub const EIGEN_TOL: f64 = 1e-8;
const MAX_LANCZOS: usize = 400;
const INNER_TOL: f64 = 1e-13;
const INNER_MAX_ITER: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralReport {
    pub eps: f64,
    pub t: f64,
    pub lambda_min: f64,
    /// Lanczos steps taken.
    pub iterations: usize,
    /// `‖A x − λ x‖ / ‖A‖` for the returned unit vector, with `‖A‖` bounded
    /// by Gershgorin.
    pub residual: f64,
}

/// `−ε Δ_h + q` on the interior nodes with homogeneous Dirichlet data.
struct Operator {
    m: usize,
    eps: f64,
    inv_h2: f64,
    /// Potential `q = ε⁻¹ f''(c_A)` per interior node, minus the shift.
    q: Vec<f64>,
}

impl Operator {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let m = self.m;
        let k = self.eps * self.inv_h2;
        y.par_chunks_mut(m).enumerate().for_each(|(j, row)| {
            for i in 0..m {
                let c = x[j * m + i];
                let mut nb = 0.0;
                if i > 0 {
                    nb += x[j * m + i - 1];
                }
                if i + 1 < m {
                    nb += x[j * m + i + 1];
                }
                if j > 0 {
                    nb += x[(j - 1) * m + i];
                }
                if j + 1 < m {
                    nb += x[(j + 1) * m + i];
                }
                row[i] = k * (4.0 * c - nb) + self.q[j * m + i] * c;
            }
        });
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let parts: Vec<f64> = a.par_chunks(4096).zip(b.par_chunks(4096)).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum()).collect();
    parts.iter().sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Conjugate gradients for the SPD shifted operator, from a zero guess.
fn cg(op: &Operator, b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let bn = norm(b).max(f64::MIN_POSITIVE);
    let mut rr = dot(&r, &r);
    for _ in 0..INNER_MAX_ITER {
        if rr.sqrt() <= INNER_TOL * bn {
            return Ok(x);
        }
        op.apply(&p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        x.iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.iter_mut().zip(&ap).for_each(|(r, a)| *r -= alpha * a);
        let next = dot(&r, &r);
        let beta = next / rr;
        rr = next;
        p.iter_mut().zip(&r).for_each(|(p, r)| *p = r + beta * *p);
    }
    Err(Error::LinearSolveDiverged { iterations: INNER_MAX_ITER, residual: rr.sqrt() / bn })
}

/// Smallest eigenvalue of `−ε Δ_h + ε⁻¹ diag(f2)` on the interior of `grid`,
/// where `f2` holds `f''(c_A)` at every grid node.
///
/// Shift-and-invert Lanczos with full reorthogonalization; the shift
/// `−2 ε⁻¹ max|f''|` keeps the shifted operator positive definite.
pub fn min_eigenvalue(grid: Grid, eps: f64, f2: &[f64], t: f64) -> Result<SpectralReport> {
    if f2.len() != grid.len() {
        return Err(Error::GridMismatch(format!("{} potential values for {} nodes", f2.len(), grid.len())));
    }
    let m = grid.n - 1;
    let size = m * m;
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let interior: Vec<f64> = (0..size).map(|k| f2[grid.index(k % m + 1, k / m + 1)] / eps).collect();
    let qmax = interior.iter().fold(0.0f64, |a, q| a.max(q.abs()));
    let shift = -2.0 * qmax;
    let op = Operator { m, eps, inv_h2, q: interior.iter().map(|q| q - shift).collect() };
    let plain = Operator { m, eps, inv_h2, q: interior };
    let scale = 8.0 * eps * inv_h2 + qmax;

    // deterministic start with every mode present
    let mut v0: Vec<f64> = (0..size).map(|k| 1.0 + 0.25 * ((k as f64) * 0.7548776662).sin()).collect();
    let n0 = norm(&v0);
    v0.iter_mut().for_each(|x| *x /= n0);
    let mut basis: Vec<Vec<f64>> = vec![v0];
    let (mut alpha, mut beta): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    let mut best = (f64::NAN, f64::INFINITY);
    let mut ax = vec![0.0; size];
    for k in 0..MAX_LANCZOS {
        let mut w = cg(&op, &basis[k])?;
        let a = dot(&w, &basis[k]);
        alpha.push(a);
        // two passes of classical Gram–Schmidt against the whole basis
        for _ in 0..2 {
            let coefs: Vec<f64> = basis.iter().map(|v| dot(&w, v)).collect();
            for (c, v) in coefs.iter().zip(&basis) {
                w.iter_mut().zip(v).for_each(|(w, v)| *w -= c * v);
            }
        }
        let b = norm(&w);
        let steps = k + 1;
        let check = steps % 5 == 0 || b < 1e-14 || steps == MAX_LANCZOS || steps == size;
        if check {
            let mut tri = DMatrix::<f64>::zeros(steps, steps);
            for i in 0..steps {
                tri[(i, i)] = alpha[i];
                if i + 1 < steps {
                    tri[(i, i + 1)] = beta[i];
                    tri[(i + 1, i)] = beta[i];
                }
            }
            let eig = SymmetricEigen::new(tri);
            let (top, _) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, &e)| if e > acc.1 { (i, e) } else { acc });
            let s = eig.eigenvectors.column(top);
            let mut x = vec![0.0; size];
            for (c, v) in s.iter().zip(&basis) {
                x.iter_mut().zip(v).for_each(|(x, v)| *x += c * v);
            }
            let xn = norm(&x);
            x.iter_mut().for_each(|v| *v /= xn);
            plain.apply(&x, &mut ax);
            let lambda = dot(&x, &ax);
            let res = ax.iter().zip(&x).map(|(a, x)| (a - lambda * x).powi(2)).sum::<f64>().sqrt() / scale;
            if res < best.1 {
                best = (lambda, res);
            }
            if res <= EIGEN_TOL {
                return Ok(SpectralReport { eps, t, lambda_min: lambda, iterations: steps, residual: res });
            }
        }
        if b < 1e-14 || k + 1 == size {
            break;
        }
        beta.push(b);
        w.iter_mut().for_each(|x| *x /= b);
        basis.push(w);
    }
    Err(Error::EigenIterationStalled { iterations: alpha.len(), residual: best.1 })
}

/// `λ_min` of the form `ε|∇u|² + ε⁻¹ f''(c_A(·, t)) u²` on `grid`.
pub fn min_rayleigh(sol: &ApproximateSolution, t: f64, grid: Grid) -> Result<SpectralReport> {
    let eps = sol.eps();
    if grid.h() > eps / 8.0 * (1.0 + 1e-12) {
        return Err(Error::ResolutionInsufficient { h: grid.h(), limit: eps / 8.0 });
    }
    let pot = sol.data().profile.potential;
    let ca = sol.frame(t)?.sample(&grid, 0);
    let f2: Vec<f64> = ca.iter().map(|&c| pot.d2f(c)).collect();
    min_eigenvalue(grid, eps, &f2, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn dirichlet_lambda1(n: usize) -> f64 {
        let h = 1.0 / n as f64;
        2.0 * 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2)
    }

    #[test]
    fn pure_laplacian() {
        let grid = Grid::new(40);
        let r = min_eigenvalue(grid, 0.1, &vec![0.0; grid.len()], 0.0).unwrap();
        assert!((r.lambda_min / (0.1 * 2.0 * PI * PI) - 1.0).abs() < 0.01, "{r:?}");
        assert!((r.lambda_min - 0.1 * dirichlet_lambda1(40)).abs() < 1e-8 * r.lambda_min);
        assert!(r.residual <= EIGEN_TOL);
    }

    #[test]
    fn constant_far_field_potential() {
        let grid = Grid::new(80);
        let eps = 0.1;
        let r = min_eigenvalue(grid, eps, &vec![2.0; grid.len()], 0.0).unwrap();
        let exact = 2.0 / eps + eps * dirichlet_lambda1(80);
        assert!(r.lambda_min >= 20.0);
        assert!((r.lambda_min - exact).abs() < 1e-7 * exact, "{} {exact}", r.lambda_min);
    }

    #[test]
    fn negative_well_is_found() {
        // a well deeper than the Laplacian floor drives λ below zero
        let grid = Grid::new(48);
        let f2 = grid.sample(|x| if (x[0] - 0.5).abs() < 0.1 && (x[1] - 0.5).abs() < 0.1 { -1.0 } else { 2.0 });
        let r = min_eigenvalue(grid, 0.05, &f2, 0.0).unwrap();
        assert!(r.lambda_min < 0.0 && r.lambda_min > -20.0, "{r:?}");
    }
}
