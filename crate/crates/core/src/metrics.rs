//! Error norms of `u = c_ε − c_A` on the tubular regions and fitted orders.

use rayon::prelude::*;

use crate::approx::{ApproximateSolution, Frame};
use crate::curve::{Curve, CurveLocator, Location};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::pde::Trajectory;

/// Node indicators of `Γ(δ)` and `Γ(2δ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TubeMasks {
    pub near: Vec<bool>,
    pub wide: Vec<bool>,
}

impl TubeMasks {
    pub fn area(&self, grid: &Grid, wide: bool) -> f64 {
        let m = if wide { &self.wide } else { &self.near };
        grid.weighted_sum(|i, j| if m[grid.index(i, j)] { 1.0 } else { 0.0 })
    }
}

pub fn tubular_masks(curve: &Curve, grid: &Grid, delta: f64) -> TubeMasks {
    if !(delta > 0.0) {
        return TubeMasks { near: vec![false; grid.len()], wide: vec![false; grid.len()] };
    }
    let loc = CurveLocator::new(curve.clone(), 2.0 * delta);
    let r = grid.sample(|x| match loc.locate(x) {
        Location::Near(tp) => tp.r.abs(),
        Location::Far(_) => f64::INFINITY,
    });
    TubeMasks { near: r.iter().map(|&r| r < delta).collect(), wide: r.iter().map(|&r| r < 2.0 * delta).collect() }
}

/// Where a node sits relative to the interface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeGeometry {
    /// Outside `Γ(2δ)`.
    Far,
    /// Inside `Γ(2δ)` at signed distance `r`, with the frame at its foot.
    Near { r: f64, tangent: [f64; 2], normal: [f64; 2] },
}

/// One snapshot of the error field with its node geometry.
#[derive(Debug, Clone)]
pub struct ErrorSnapshot {
    pub t: f64,
    pub grid: Grid,
    pub u: Vec<f64>,
    pub geometry: Vec<NodeGeometry>,
}

impl ErrorSnapshot {
    /// `u = c − c_A` against the frame at the snapshot time.
    pub fn from_frame(frame: &Frame<'_>, grid: Grid, c: &[f64]) -> Result<Self> {
        if c.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values for {} nodes", c.len(), grid.len())));
        }
        let ca = frame.sample(&grid, 0);
        let u = c.iter().zip(&ca).map(|(a, b)| a - b).collect();
        let curve = frame.curve();
        let geometry = (0..grid.len())
            .into_par_iter()
            .map(|k| match frame.locate(grid.point(k % grid.side(), k / grid.side())) {
                Location::Near(tp) => {
                    let (tangent, normal) = curve.tangent_normal(tp.s)?;
                    Ok(NodeGeometry::Near { r: tp.r, tangent, normal })
                }
                Location::Far(_) => Ok(NodeGeometry::Far),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { t: frame.t(), grid, u, geometry })
    }

    /// Field without an interface: every node counts as far.
    pub fn plain(t: f64, grid: Grid, u: Vec<f64>) -> Self {
        Self { t, grid, geometry: vec![NodeGeometry::Far; grid.len()], u }
    }

    /// Squared spatial integrals `[‖u‖², ‖∇u‖² off Γ(δ), ‖∇_τ u‖² on Γ(2δ),
    /// ‖∇u‖² on Γ(2δ), ‖∂_n u‖² on Γ(2δ)]`.
    fn integrals(&self, delta: f64) -> [f64; 5] {
        let g = self.grid;
        let n = g.n;
        let h = g.h();
        let u = |i: usize, j: usize| self.u[g.index(i, j)];
        let diff = |k: usize, f: &dyn Fn(usize) -> f64| -> f64 {
            if k == 0 {
                (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * h)
            } else if k == n {
                (3.0 * f(n) - 4.0 * f(n - 1) + f(n - 2)) / (2.0 * h)
            } else {
                (f(k + 1) - f(k - 1)) / (2.0 * h)
            }
        };
        let rows: Vec<[f64; 5]> = (0..g.side())
            .into_par_iter()
            .map(|j| {
                let mut acc = [0.0; 5];
                for i in 0..g.side() {
                    let w = g.weight(i, j);
                    let grad = [diff(i, &|k| u(k, j)), diff(j, &|k| u(i, k))];
                    let g2 = grad[0] * grad[0] + grad[1] * grad[1];
                    acc[0] += w * u(i, j).powi(2);
                    match self.geometry[g.index(i, j)] {
                        NodeGeometry::Near { r, tangent, normal } => {
                            if r.abs() >= delta {
                                acc[1] += w * g2;
                            }
                            acc[2] += w * (grad[0] * tangent[0] + grad[1] * tangent[1]).powi(2);
                            acc[3] += w * g2;
                            acc[4] += w * (grad[0] * normal[0] + grad[1] * normal[1]).powi(2);
                        }
                        NodeGeometry::Far => acc[1] += w * g2,
                    }
                }
                acc
            })
            .collect();
        rows.iter().fold([0.0; 5], |mut a, r| {
            a.iter_mut().zip(r).for_each(|(a, r)| *a += r);
            a
        })
    }
}

/// The norms of `u = c_ε − c_A`, each with its ε weight applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub eps: f64,
    /// `sup_t ‖u‖_{L²(Ω)}`.
    pub norm_linf_l2: f64,
    /// `ε^{1/2} ‖∇u‖` over the space-time region outside `Γ(δ)`.
    pub norm_grad_out: f64,
    /// `ε^{1/2} ‖∇_τ u‖` on `Γ(2δ)`.
    pub norm_tau_in: f64,
    /// `ε ‖∇u‖` on `Γ(2δ)`.
    pub norm_grad_in: f64,
    /// `ε ‖∂_n u‖` on `Γ(2δ)`.
    pub norm_dn_in: f64,
}

impl ErrorReport {
    pub const NAMES: [&'static str; 5] = ["norm_linf_l2", "norm_grad_out", "norm_tau_in", "norm_grad_in", "norm_dn_in"];

    pub fn values(&self) -> [f64; 5] {
        [self.norm_linf_l2, self.norm_grad_out, self.norm_tau_in, self.norm_grad_in, self.norm_dn_in]
    }
}

/// Time weights of the left rectangle rule; a lone snapshot gets weight 1.
fn rectangle_weights(times: &[f64]) -> Vec<f64> {
    if times.len() == 1 {
        return vec![1.0];
    }
    let mut w: Vec<f64> = times.windows(2).map(|p| p[1] - p[0]).collect();
    w.push(0.0);
    w
}

/// Combines snapshots into the weighted norms.
pub fn error_norms_from_snapshots(eps: f64, delta: f64, snaps: &[ErrorSnapshot]) -> Result<ErrorReport> {
    let first = snaps.first().ok_or_else(|| Error::GridMismatch("no snapshots".into()))?;
    for s in snaps {
        if s.grid != first.grid || s.u.len() != s.grid.len() || s.geometry.len() != s.grid.len() {
            return Err(Error::GridMismatch(format!("snapshot at t = {} does not match the first grid", s.t)));
        }
    }
    let times: Vec<f64> = snaps.iter().map(|s| s.t).collect();
    if times.windows(2).any(|p| p[1] < p[0]) {
        return Err(Error::GridMismatch("snapshot times are not increasing".into()));
    }
    let weights = rectangle_weights(&times);
    let parts: Vec<[f64; 5]> = snaps.par_iter().map(|s| s.integrals(delta)).collect();
    let mut space_time = [0.0; 4];
    let mut sup = 0.0f64;
    for (p, w) in parts.iter().zip(&weights) {
        sup = sup.max(p[0].sqrt());
        for k in 0..4 {
            space_time[k] += w * p[k + 1];
        }
    }
    let [go, ti, gi, dn] = space_time.map(f64::sqrt);
    Ok(ErrorReport {
        eps,
        norm_linf_l2: sup,
        norm_grad_out: eps.sqrt() * go,
        norm_tau_in: eps.sqrt() * ti,
        norm_grad_in: eps * gi,
        norm_dn_in: eps * dn,
    })
}

/// Norms of `c_ε − c_A` over a solver trajectory.
pub fn error_norms(traj: &Trajectory, sol: &ApproximateSolution) -> Result<ErrorReport> {
    let snaps = traj
        .snapshots
        .iter()
        .map(|c| ErrorSnapshot::from_frame(&sol.frame(c.t)?, c.grid, &c.values))
        .collect::<Result<Vec<_>>>()?;
    error_norms_from_snapshots(sol.eps(), sol.data().config.delta, &snaps)
}

/// Least-squares slope of `log norm` against `log ε`, plus the order of each
/// consecutive pair.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderFit {
    pub slope: f64,
    pub pairwise: Vec<f64>,
}

pub fn fit_order(eps: &[f64], norms: &[f64]) -> Result<OrderFit> {
    if eps.len() != norms.len() {
        return Err(Error::DegenerateFit(format!("{} eps values for {} norms", eps.len(), norms.len())));
    }
    let mut distinct: Vec<f64> = eps.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::DegenerateFit(format!("need at least 3 distinct eps values, got {}", distinct.len())));
    }
    if let Some(e) = eps.iter().chain(norms).find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::DegenerateFit(format!("cannot take the logarithm of {e}")));
    }
    let x: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = norms.iter().map(|e| e.ln()).collect();
    let k = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / k, y.iter().sum::<f64>() / k);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let pairwise = (1..x.len()).map(|i| (y[i - 1] - y[i]) / (x[i - 1] - x[i])).collect();
    Ok(OrderFit { slope: sxy / sxx, pairwise })
}

/// Fitted orders of every norm of an ε-sequence of reports.
#[derive(Debug, Clone, PartialEq)]
pub struct EocReport {
    pub fits: Vec<(&'static str, OrderFit)>,
}

impl EocReport {
    pub fn get(&self, name: &str) -> Option<&OrderFit> {
        self.fits.iter().find(|(n, _)| *n == name).map(|(_, f)| f)
    }
}

pub fn eoc(reports: &[ErrorReport]) -> Result<EocReport> {
    let eps: Vec<f64> = reports.iter().map(|r| r.eps).collect();
    let fits = ErrorReport::NAMES
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let norms: Vec<f64> = reports.iter().map(|r| r.values()[k]).collect();
            fit_order(&eps, &norms).map(|f| (*name, f))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EocReport { fits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn annulus_masks() {
        let curve = Curve::circle([0.5, 0.5], 0.25, 128).unwrap();
        let grid = Grid::new(200);
        let m = tubular_masks(&curve, &grid, 0.05);
        let area = m.area(&grid, false);
        let exact = 4.0 * PI * 0.25 * 0.05;
        assert!((area / exact - 1.0).abs() < 0.03, "{area} {exact}");
        assert!(m.near.iter().zip(&m.wide).all(|(a, b)| !a || *b));
        let empty = tubular_masks(&curve, &grid, 0.0);
        assert!(empty.near.iter().chain(&empty.wide).all(|b| !b));
    }

    #[test]
    fn constant_and_fourier_fields() {
        let grid = Grid::new(200);
        let snap = ErrorSnapshot::plain(0.0, grid, vec![0.3; grid.len()]);
        let r = error_norms_from_snapshots(0.5, 0.05, &[snap]).unwrap();
        assert!((r.norm_linf_l2 - 0.3).abs() < 1e-12);
        assert!(r.norm_grad_out < 1e-12 && r.norm_tau_in == 0.0 && r.norm_grad_in == 0.0);

        let u = grid.sample(|x| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin());
        let r = error_norms_from_snapshots(1.0, 0.05, &[ErrorSnapshot::plain(0.0, grid, u)]).unwrap();
        assert!((r.norm_linf_l2 - 0.5).abs() < 0.005);
        assert!((r.norm_grad_out / (2f64.sqrt() * PI) - 1.0).abs() < 0.01, "{}", r.norm_grad_out);
    }

    #[test]
    fn tube_norm_properties() {
        let curve = Curve::circle([0.5, 0.5], 0.25, 128).unwrap();
        let grid = Grid::new(100);
        let loc = CurveLocator::new(curve.clone(), 0.1);
        let geometry: Vec<NodeGeometry> = (0..grid.len())
            .map(|k| match loc.locate(grid.point(k % grid.side(), k / grid.side())) {
                Location::Near(tp) => {
                    let (tangent, normal) = curve.tangent_normal(tp.s).unwrap();
                    NodeGeometry::Near { r: tp.r, tangent, normal }
                }
                Location::Far(_) => NodeGeometry::Far,
            })
            .collect();
        let u = grid.sample(|x| (3.0 * x[0]).sin() * (5.0 * x[1]).cos() + x[0] * x[1]);
        let snap = |scale: f64| ErrorSnapshot {
            t: 0.0,
            grid,
            u: u.iter().map(|v| scale * v).collect(),
            geometry: geometry.clone(),
        };
        let a = error_norms_from_snapshots(1.0, 0.05, &[snap(1.0)]).unwrap();
        let b = error_norms_from_snapshots(1.0, 0.05, &[snap(-3.0)]).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((3.0 * x - y).abs() < 1e-12 * (1.0 + y));
        }
        let p = snap(1.0).integrals(0.05);
        // |∇u|² = (∂_τ u)² + (∂_n u)² on the tube, and Γ(δ) ⊂ Γ(2δ)
        assert!((p[3] - p[2] - p[4]).abs() < 1e-10 * p[3]);
        assert!(p[2] <= p[3]);
    }

    #[test]
    fn order_fits() {
        let eps = [0.1, 0.05, 0.025];
        let f = fit_order(&eps, &eps.map(|e: f64| e.powf(2.5))).unwrap();
        assert!((f.slope - 2.5).abs() < 1e-12);
        let f = fit_order(&eps, &eps.map(|e: f64| 3.0 * e * e + e.powi(3))).unwrap();
        assert!(f.slope > 2.0 && f.slope < 2.1, "{}", f.slope);
        assert_eq!(f.pairwise.len(), 2);
        assert!(matches!(fit_order(&[0.1], &[1.0]), Err(Error::DegenerateFit(_))));
        assert!(matches!(fit_order(&eps, &[1.0, 0.0, 1.0]), Err(Error::DegenerateFit(_))));
    }
}
