//! The assembled approximate solution `c_A` and its PDE residual.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::curve::{Curve, CurveLocator, Location, TubularPoint};
use crate::cutoff::Cutoff;
use crate::error::{Error, Result};
use crate::expansion::ExpansionData;
use crate::grid::Grid;
use crate::periodic;
use crate::velocity::{Point, VelocityField};

/// Upper bound on the number of per-marker tables carried by a frame.
const MAX_ROWS: usize = 16;

/// `c_A` for one `ε`, backed by shared expansion tables.
#[derive(Debug, Clone)]
pub struct ApproximateSolution {
    data: Arc<ExpansionData>,
    eps: f64,
}

/// Builds the evaluator for `eps` on top of `data`.
pub fn assemble_ca(data: Arc<ExpansionData>, eps: f64) -> Result<ApproximateSolution> {
    ApproximateSolution::new(data, eps)
}

impl ApproximateSolution {
    pub fn new(data: Arc<ExpansionData>, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidConfig(format!("eps must lie in (0, 1], got {eps}")));
        }
        let rows = 2 + data.basis.c1.len() + data.basis.c2.len();
        if rows > MAX_ROWS {
            return Err(Error::InvalidConfig(format!("{rows} tables exceed the frame capacity {MAX_ROWS}")));
        }
        Ok(Self { data, eps })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn data(&self) -> &Arc<ExpansionData> {
        &self.data
    }

    /// Physical end time covered by the tables.
    pub fn t_final(&self) -> f64 {
        self.data.horizon() / self.data.config.m0
    }

    /// Construction bound `1 + ε max|c1| + ε² max|c2|` over all tabulated
    /// `(s, t)`, using `Σ|w_k| max|U_k|` for each weighted sum.
    pub fn sup_bound(&self) -> f64 {
        let b = &self.data.basis;
        let peak = |funcs: &[crate::profile::RadialFunction], weights: &[Vec<f64>], j: usize| -> f64 {
            funcs.iter().zip(weights).map(|(u, w)| w[j].abs() * u.max_abs()).sum()
        };
        let (mut m1, mut m2) = (0.0f64, 0.0f64);
        for sl in &self.data.slices {
            for j in 0..sl.h1.len() {
                m1 = m1.max(peak(&b.c1, &sl.c1_weights, j));
                m2 = m2.max(peak(&b.c2, &sl.c2_weights, j));
            }
        }
        1.0 + self.eps * m1 + self.eps * self.eps * m2
    }

    /// Interface, tables and locator at physical time `t`.
    pub fn frame(&self, t: f64) -> Result<Frame<'_>> {
        let d = &self.data;
        let tau = d.config.m0 * t;
        let horizon = d.horizon();
        if !(tau >= -1e-12 && tau <= horizon * (1.0 + 1e-12) + 1e-12) {
            return Err(Error::InvalidConfig(format!("time {t} is outside the expansion horizon")));
        }
        let tau = tau.clamp(0.0, horizon);
        let last = d.slices.len() - 1;
        let x = tau / d.dt;
        let mut n = (x.floor() as usize).min(last);
        let mut theta = x - n as f64;
        if theta > 1.0 - 1e-9 && n < last {
            n += 1;
            theta = 0.0;
        }
        let rows_of = |k: usize| -> Vec<&Vec<f64>> {
            let sl = &d.slices[k];
            let mut r = vec![&sl.h1, &sl.h2];
            r.extend(sl.c1_weights.iter());
            r.extend(sl.c2_weights.iter());
            r
        };
        let (curve, rows) = if theta < 1e-9 {
            let mut c = d.slices[n].curve.clone();
            c.relabel = None;
            (c, rows_of(n).into_iter().cloned().collect::<Vec<_>>())
        } else {
            let curve = d.slices[n].curve.evolve(&d.velocity, tau, d.dt)?;
            let (lo, hi) = d.epoch_range(n);
            let start = (n.saturating_sub(1)).clamp(lo, hi.saturating_sub(3).max(lo));
            let nodes: Vec<usize> = (start..=(start + 3).min(hi)).collect();
            let weights = lagrange_weights(&nodes.iter().map(|&k| d.slices[k].t).collect::<Vec<_>>(), tau);
            let count = rows_of(n).len();
            let m = d.slices[n].h1.len();
            let mut rows = vec![vec![0.0; m]; count];
            for (&k, &w) in nodes.iter().zip(&weights) {
                for (acc, src) in rows.iter_mut().zip(rows_of(k)) {
                    acc.iter_mut().zip(src).for_each(|(a, v)| *a += w * v);
                }
            }
            (curve, rows)
        };
        let rows = match &curve.relabel {
            Some(params) => rows
                .iter()
                .map(|row| {
                    let hat = real_dft(row);
                    params.iter().map(|&s| periodic::trig_eval(&hat, s)).collect()
                })
                .collect(),
            None => rows,
        };
        let hats: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|r| {
                let mut h = real_dft(r);
                h.truncate(r.len() / 2 + 1);
                h
            })
            .collect();
        let delta = d.config.delta;
        Ok(Frame {
            sol: self,
            t,
            locator: CurveLocator::new(curve, 2.0 * delta),
            hats,
            n1: d.basis.c1.len(),
            cutoff: Cutoff::new(delta),
        })
    }

    /// `c_A(x, t)`; builds a frame, so prefer [`Frame::value`] in loops.
    pub fn value(&self, x: Point, t: f64) -> Result<f64> {
        Ok(self.frame(t)?.value(x))
    }

    /// `ρ_ε(x, t)`, or `None` outside `Γ_t(2δ)`.
    pub fn rho(&self, x: Point, t: f64) -> Result<Option<f64>> {
        Ok(self.frame(t)?.rho(x))
    }
}

fn real_dft(row: &[f64]) -> Vec<Complex64> {
    let c: Vec<Complex64> = row.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    periodic::dft(&c)
}

fn lagrange_weights(nodes: &[f64], x: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|i| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != i)
                .map(|(_, &xk)| (x - xk) / (nodes[i] - xk))
                .product()
        })
        .collect()
}

/// `c_A` frozen at one time: the interface, the `s`-tables and a locator.
#[derive(Debug)]
pub struct Frame<'a> {
    sol: &'a ApproximateSolution,
    t: f64,
    locator: CurveLocator,
    /// Half-spectra of h1, h2, then the c1 and c2 weights.
    hats: Vec<Vec<Complex64>>,
    n1: usize,
    cutoff: Cutoff,
}

impl Frame<'_> {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn curve(&self) -> &Curve {
        self.locator.curve()
    }

    pub fn locate(&self, x: Point) -> Location {
        self.locator.locate(x)
    }

    /// All tables at parameter `s`, in storage order.
    pub fn tables(&self, s: f64) -> [f64; MAX_ROWS] {
        let mut out = [0.0; MAX_ROWS];
        let half = self.hats[0].len() - 1;
        let m = 2 * half;
        let w = Complex64::from_polar(1.0, 2.0 * PI * s);
        let mut p = Complex64::new(1.0, 0.0);
        for (r, h) in self.hats.iter().enumerate() {
            out[r] = h[0].re;
        }
        for k in 1..=half {
            p *= w;
            let f = if k == half && m.is_multiple_of(2) { 1.0 } else { 2.0 };
            for (r, h) in self.hats.iter().enumerate() {
                out[r] += f * (h[k] * p).re;
            }
        }
        out
    }

    fn rho_at(&self, tp: &TubularPoint, tab: &[f64; MAX_ROWS]) -> f64 {
        let eps = self.sol.eps;
        tp.r / eps - tab[0] - eps * tab[1]
    }

    /// Inner expansion `θ0 + ε c1 + ε² c2` at tubular coordinates `(r, s)`.
    pub fn inner(&self, tp: &TubularPoint) -> f64 {
        let d = &self.sol.data;
        let eps = self.sol.eps;
        let tab = self.tables(tp.s);
        let rho = self.rho_at(tp, &tab);
        let grid = &d.profile.grid;
        let mut c1 = 0.0;
        for (u, &w) in d.basis.c1.iter().zip(&tab[2..2 + self.n1]) {
            if w != 0.0 {
                c1 += w * u.eval(grid, rho);
            }
        }
        let mut c2 = 0.0;
        for (u, &w) in d.basis.c2.iter().zip(&tab[2 + self.n1..]) {
            if w != 0.0 {
                c2 += w * u.eval(grid, rho);
            }
        }
        d.profile.theta0_at(rho) + eps * c1 + eps * eps * c2
    }

    pub fn value(&self, x: Point) -> f64 {
        match self.locator.locate(x) {
            Location::Far(side) => side,
            Location::Near(tp) => {
                let outer = if tp.r >= 0.0 { 1.0 } else { -1.0 };
                let z = self.cutoff.value(tp.r);
                if z == 0.0 {
                    outer
                } else {
                    z * self.inner(&tp) + (1.0 - z) * outer
                }
            }
        }
    }

    pub fn rho(&self, x: Point) -> Option<f64> {
        match self.locator.locate(x) {
            Location::Near(tp) => Some(self.rho_at(&tp, &self.tables(tp.s))),
            Location::Far(_) => None,
        }
    }

    /// Samples `c_A` on `grid` extended by `halo` layers.
    pub fn sample(&self, grid: &Grid, halo: usize) -> Vec<f64> {
        grid.sample_with_halo(halo, |x| self.value(x))
    }
}

/// Space-time residual of `c_A`.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub eps: f64,
    pub grid: Grid,
    /// Step of the time differences.
    pub dt: f64,
    pub times: Vec<f64>,
    /// Spatial L² norm of the residual at each quadrature node.
    pub node_norms: Vec<f64>,
    /// L² norm over `Ω × (0, T0)`.
    pub norm: f64,
    /// Residual at the final node, on the grid nodes (zero on the boundary).
    pub field: Vec<f64>,
}

const HALO: usize = 2;

/// Residual of `∂_t c + v·∇c = m0 (ε Δc − f'(c)/ε)` evaluated on `c_A`.
///
/// Space derivatives are fourth-order central differences on `grid`, time
/// derivatives second-order differences with step `dt` (one-sided at the
/// ends), and the time integral is the trapezoid rule on `time_nodes`
/// intervals.
pub fn residual_s(
    sol: &ApproximateSolution,
    v: &VelocityField,
    grid: Grid,
    dt: f64,
    time_nodes: usize,
) -> Result<ResidualReport> {
    let eps = sol.eps;
    let h = grid.h();
    if h > eps / 8.0 * (1.0 + 1e-12) {
        return Err(Error::ResolutionInsufficient { h, limit: eps / 8.0 });
    }
    if !(dt > 0.0 && dt <= eps * h * (1.0 + 1e-12)) {
        return Err(Error::InvalidConfig(format!("time step {dt:.3e} must lie in (0, eps h = {:.3e}]", eps * h)));
    }
    let horizon = sol.t_final();
    let nodes = time_nodes.max(1);
    if !(horizon > 2.0 * dt) {
        return Err(Error::InvalidConfig(format!("horizon {horizon} too short for time step {dt}")));
    }
    let m0 = sol.data.config.m0;
    let pot = sol.data.profile.potential;
    let w = grid.side() + 2 * HALO;
    let mut times = Vec::with_capacity(nodes + 1);
    let mut node_norms = Vec::with_capacity(nodes + 1);
    let mut total = 0.0;
    let mut field = Vec::new();
    for k in 0..=nodes {
        let t = horizon * k as f64 / nodes as f64;
        let (levels, coef): ([f64; 3], [f64; 3]) = if t - dt < 0.0 {
            ([t, t + dt, t + 2.0 * dt], [-1.5, 2.0, -0.5])
        } else if t + dt > horizon {
            ([t - 2.0 * dt, t - dt, t], [0.5, -2.0, 1.5])
        } else {
            ([t - dt, t, t + dt], [-0.5, 0.0, 0.5])
        };
        let centre = levels.iter().position(|&l| l == t).unwrap_or(1);
        let samples = levels
            .iter()
            .map(|&l| Ok(sol.frame(l)?.sample(&grid, HALO)))
            .collect::<Result<Vec<_>>>()?;
        let c = &samples[centre];
        let at = |a: &Vec<f64>, i: usize, j: usize| a[(j + HALO) * w + i + HALO];
        let mut s_field = vec![0.0; grid.len()];
        s_field.par_chunks_mut(grid.side()).enumerate().for_each(|(j, row)| {
            if j == 0 || j == grid.n {
                return;
            }
            for i in 1..grid.n {
                let u = |di: i64, dj: i64| {
                    c[((j + HALO) as i64 + dj) as usize * w + ((i + HALO) as i64 + di) as usize]
                };
                let c0 = u(0, 0);
                let dx = (-u(2, 0) + 8.0 * u(1, 0) - 8.0 * u(-1, 0) + u(-2, 0)) / (12.0 * h);
                let dy = (-u(0, 2) + 8.0 * u(0, 1) - 8.0 * u(0, -1) + u(0, -2)) / (12.0 * h);
                let lap = (-u(2, 0) + 16.0 * u(1, 0) - 30.0 * c0 + 16.0 * u(-1, 0) - u(-2, 0) - u(0, 2)
                    + 16.0 * u(0, 1)
                    - 30.0 * c0
                    + 16.0 * u(0, -1)
                    - u(0, -2))
                    / (12.0 * h * h);
                let dtc: f64 = samples.iter().zip(&coef).map(|(a, q)| q * at(a, i, j)).sum::<f64>() / dt;
                let vel = v.velocity(grid.point(i, j));
                row[i] = dtc + vel[0] * dx + vel[1] * dy - m0 * (eps * lap - pot.df(c0) / eps);
            }
        });
        let row_sums: Vec<f64> =
            s_field.par_chunks(grid.side()).map(|row| row.iter().map(|s| s * s).sum()).collect();
        let norm2 = h * h * row_sums.iter().sum::<f64>();
        if !norm2.is_finite() {
            return Err(Error::NonFinite { t });
        }
        let weight = if k == 0 || k == nodes { 0.5 } else { 1.0 } * horizon / nodes as f64;
        total += weight * norm2;
        times.push(t);
        node_norms.push(norm2.sqrt());
        if k == nodes {
            field = s_field;
        }
    }
    Ok(ResidualReport { eps, grid, dt, times, node_norms, norm: total.sqrt(), field })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::ExpansionConfig;
    use crate::potential::Potential;
    use crate::profile::solve_profile;

    fn data(v: &VelocityField, t_final: f64) -> Arc<ExpansionData> {
        let prof = solve_profile(Potential::quartic(), 40.0, 0.05).unwrap();
        let curve = Curve::circle([0.5, 0.5], 0.25, 64).unwrap();
        let cfg = ExpansionConfig { t_final, dt: 2.5e-3, ..Default::default() };
        Arc::new(ExpansionData::build(&curve, v, prof, cfg).unwrap())
    }

    #[test]
    fn far_field_and_zero_level() {
        let d = data(&VelocityField::Zero, 0.05);
        let sol = ApproximateSolution::new(d, 0.05).unwrap();
        let f = sol.frame(0.03).unwrap();
        assert_eq!(f.value([0.5, 0.5]), 1.0);
        assert_eq!(f.value([0.02, 0.9]), -1.0);
        assert_eq!(f.value([0.5, 0.5 + 0.25 - 0.11]), 1.0);
        // ρ = 0 where r = ε (h1 + ε h2) on the static circle
        let tab = f.tables(0.1);
        let r = 0.05 * (tab[0] + 0.05 * tab[1]);
        let p = f.curve().chart_point(r, 0.1);
        assert!(f.rho(p).unwrap().abs() < 1e-9);
        assert!(f.value(p).abs() < 1e-9, "{}", f.value(p));
    }

    #[test]
    fn frame_tables_match_slices() {
        let v = VelocityField::default();
        let d = data(&v, 0.05);
        let sol = ApproximateSolution::new(d.clone(), 0.1).unwrap();
        let n = 8;
        let f = sol.frame(d.slices[n].t).unwrap();
        let sl = &d.slices[n];
        for j in [0, 5, 40] {
            let tab = f.tables(sl.curve.parameter(j));
            assert!((tab[0] - sl.h1[j]).abs() < 1e-12);
            assert!((tab[1] - sl.h2[j]).abs() < 1e-12);
        }
        // off-grid frames interpolate smoothly between slices
        let mid = sol.frame(0.5 * (d.slices[n].t + d.slices[n + 1].t)).unwrap();
        let a = mid.tables(0.3)[0];
        let (lo, hi) = (sol.frame(d.slices[n].t).unwrap().tables(0.3)[0], sol.frame(d.slices[n + 1].t).unwrap().tables(0.3)[0]);
        assert!((a - 0.5 * (lo + hi)).abs() < 1e-6 * (1.0 + a.abs()), "{a} {lo} {hi}");
    }

    #[test]
    fn sup_bound_and_sample_sup() {
        let v = VelocityField::default();
        let d = data(&v, 0.05);
        let sol = ApproximateSolution::new(d, 0.1).unwrap();
        let bound = sol.sup_bound();
        assert!(bound <= 1.05, "{bound}");
        let f = sol.frame(0.05).unwrap();
        let grid = Grid::new(100);
        let peak = f.sample(&grid, 0).iter().fold(0.0f64, |m, c| m.max(c.abs()));
        assert!(peak <= bound + 1e-12, "{peak} {bound}");
    }

    #[test]
    fn residual_guards_resolution() {
        let d = data(&VelocityField::Zero, 0.05);
        let sol = ApproximateSolution::new(d, 0.1).unwrap();
        assert!(matches!(
            residual_s(&sol, &VelocityField::Zero, Grid::new(70), 1e-4, 4),
            Err(Error::ResolutionInsufficient { .. })
        ));
    }

    #[test]
    fn residual_vanishes_in_far_field() {
        let d = data(&VelocityField::Zero, 0.05);
        let sol = ApproximateSolution::new(d, 0.1).unwrap();
        let grid = Grid::new(80);
        let rep = residual_s(&sol, &VelocityField::Zero, grid, 0.1 / 80.0 * 0.1, 2).unwrap();
        assert!(rep.norm.is_finite() && rep.norm > 0.0);
        let f = sol.frame(sol.t_final()).unwrap();
        for j in 1..grid.n {
            for i in 1..grid.n {
                let x = grid.point(i, j);
                let far = (-2..=2).all(|a: i64| {
                    (-2..=2).all(|b: i64| {
                        let y = [x[0] + a as f64 * grid.h(), x[1] + b as f64 * grid.h()];
                        matches!(f.locate(y), Location::Far(_))
                    })
                });
                if far {
                    assert!(rep.field[grid.index(i, j)].abs() <= 1e-10);
                }
            }
        }
    }
}
