//! Stabilized IMEX solver for `∂_t c + v·∇c = m0 ε Δc − (m0/ε) f'(c)` on the
//! unit square with `c = -1` on the boundary.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::approx::ApproximateSolution;
use crate::curve::Location;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::potential::Potential;
use crate::velocity::VelocityField;

/// Dirichlet value on `∂Ω`.
pub const BOUNDARY_VALUE: f64 = -1.0;
/// Relative residual at which the implicit solve stops.
pub const CG_TOL: f64 = 1e-10;
const CG_MAX_ITER: usize = 2000;
/// Interval on which the stabilization constant must dominate `|f''|`.
pub const STAB_RANGE: f64 = 1.2;
/// Seed of the well-prepared perturbation.
pub const PERTURBATION_SEED: u64 = 0x5eed_c0de;

/// Node values on a [`Grid`], boundary nodes included and held at `-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField2D {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub t: f64,
}

impl ScalarField2D {
    pub fn new(grid: Grid, values: Vec<f64>, t: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} values for {} nodes", values.len(), grid.len())));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("non-finite value at node {k}")));
        }
        let mut f = Self { grid, values, t };
        f.enforce_boundary();
        Ok(f)
    }

    /// Interior nodes at `value`, boundary at `-1`.
    pub fn constant(grid: Grid, value: f64, t: f64) -> Self {
        let mut f = Self { grid, values: vec![value; grid.len()], t };
        f.enforce_boundary();
        f
    }

    pub fn enforce_boundary(&mut self) {
        let g = self.grid;
        for k in 0..g.side() {
            for idx in [g.index(k, 0), g.index(k, g.n), g.index(0, k), g.index(g.n, k)] {
                self.values[idx] = BOUNDARY_VALUE;
            }
        }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn l2(&self) -> f64 {
        self.grid.l2(&self.values)
    }

    /// Discrete Ginzburg–Landau energy `Σ h² (ε |∇_h c|² / 2 + f(c) / ε)`,
    /// with one-sided differences on every grid edge.
    pub fn energy(&self, eps: f64, pot: &Potential) -> f64 {
        let g = self.grid;
        let h = g.h();
        let rows: Vec<f64> = (0..g.side())
            .into_par_iter()
            .map(|j| {
                let mut acc = 0.0;
                for i in 0..g.side() {
                    let c = self.at(i, j);
                    let mut grad2 = 0.0;
                    if i < g.n {
                        grad2 += (self.at(i + 1, j) - c).powi(2);
                    }
                    if j < g.n {
                        grad2 += (self.at(i, j + 1) - c).powi(2);
                    }
                    acc += 0.5 * eps * grad2 + h * h * pot.f(c) / eps;
                }
                acc
            })
            .collect();
        rows.iter().sum()
    }
}

/// Time-stepping parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub eps: f64,
    pub m0: f64,
    pub dt: f64,
    pub t_final: f64,
    /// Implicit linear stabilization constant.
    pub stab: f64,
    /// Largest admissible `‖v‖_∞ dt / h`.
    pub cfl: f64,
    pub potential: Potential,
}

impl SolverConfig {
    /// Largest step satisfying both limits that divides `t_final` evenly,
    /// with the smallest admissible stabilization.
    pub fn for_grid(eps: f64, m0: f64, t_final: f64, grid: Grid, v: &VelocityField, potential: Potential) -> Self {
        Self::limited(eps, m0, t_final, grid, v, potential, 0.5, 1.0)
    }

    /// As [`SolverConfig::for_grid`] with a CFL limit and the step scaled by
    /// `dt_factor` before rounding.
    #[allow(clippy::too_many_arguments)]
    pub fn limited(
        eps: f64,
        m0: f64,
        t_final: f64,
        grid: Grid,
        v: &VelocityField,
        potential: Potential,
        cfl: f64,
        dt_factor: f64,
    ) -> Self {
        let h = grid.h();
        let speed = v.max_speed_unit_square();
        let mut dt = eps * h;
        if speed > 0.0 {
            dt = dt.min(cfl * h / speed);
        }
        dt *= dt_factor;
        if t_final > 0.0 {
            dt = t_final / (t_final / dt - 1e-9).ceil();
        }
        Self { eps, m0, dt, t_final, stab: potential.max_abs_d2f(STAB_RANGE), cfl, potential }
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt - 1e-6).ceil().max(0.0) as usize
    }

    pub fn validate(&self, grid: Grid, v: &VelocityField) -> Result<()> {
        if !(self.eps > 0.0 && self.m0 > 0.0 && self.dt > 0.0 && self.t_final >= 0.0) {
            return Err(Error::InvalidConfig(format!("invalid solver parameters {self:?}")));
        }
        let h = grid.h();
        let speed = v.max_speed_unit_square();
        if speed * self.dt > self.cfl * h * (1.0 + 1e-12) {
            return Err(Error::CflViolated(format!(
                "‖v‖ dt / h = {:.3} exceeds {:.3}",
                speed * self.dt / h,
                self.cfl
            )));
        }
        if self.dt > self.eps * h * (1.0 + 1e-12) {
            return Err(Error::CflViolated(format!("dt = {:.3e} exceeds eps h = {:.3e}", self.dt, self.eps * h)));
        }
        let need = self.potential.max_abs_d2f(STAB_RANGE);
        if self.stab < need {
            return Err(Error::InvalidConfig(format!("stabilization {} below max|f''| = {need}", self.stab)));
        }
        Ok(())
    }
}

/// Solver state reused across steps: grid velocities and work buffers.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Grid,
    cfg: SolverConfig,
    vel: Vec<[f64; 2]>,
    /// CG iterations of the last solve.
    pub last_iterations: usize,
}

impl Stepper {
    pub fn new(grid: Grid, v: &VelocityField, cfg: SolverConfig) -> Result<Self> {
        cfg.validate(grid, v)?;
        let vel = (0..grid.len()).map(|k| v.velocity(grid.point(k % grid.side(), k / grid.side()))).collect();
        Ok(Self { grid, cfg, vel, last_iterations: 0 })
    }

    /// Explicit right-hand side `c/dt - v·∇c + (m0/ε)(S c - f'(c))` at
    /// interior nodes.
    fn explicit(&self, c: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let n = g.n;
        let h = g.h();
        let SolverConfig { eps, m0, dt, stab, potential, .. } = self.cfg;
        let mut out = vec![0.0; g.len()];
        out.par_chunks_mut(g.side()).enumerate().for_each(|(j, row)| {
            if j == 0 || j == n {
                return;
            }
            let at = |i: usize, j: usize| c[g.index(i, j)];
            for i in 1..n {
                let v = self.vel[g.index(i, j)];
                let dx = upwind(v[0], i, n, h, |k| at(k, j));
                let dy = upwind(v[1], j, n, h, |k| at(i, k));
                let u = at(i, j);
                row[i] = u / dt - (v[0] * dx + v[1] * dy) + m0 / eps * (stab * u - potential.df(u));
            }
        });
        out
    }

    /// `((1/dt + m0 S/ε) - m0 ε Δ_h) w` for `w` vanishing on the boundary.
    fn apply(&self, w: &[f64], out: &mut [f64]) {
        let g = self.grid;
        let n = g.n;
        let SolverConfig { eps, m0, dt, stab, .. } = self.cfg;
        let diag = 1.0 / dt + m0 * stab / eps;
        let k = m0 * eps / (g.h() * g.h());
        out.par_chunks_mut(g.side()).enumerate().for_each(|(j, row)| {
            if j == 0 || j == n {
                row.iter_mut().for_each(|x| *x = 0.0);
                return;
            }
            row[0] = 0.0;
            row[n] = 0.0;
            for i in 1..n {
                let c = w[g.index(i, j)];
                let nb = w[g.index(i - 1, j)] + w[g.index(i + 1, j)] + w[g.index(i, j - 1)] + w[g.index(i, j + 1)];
                row[i] = diag * c - k * (nb - 4.0 * c);
            }
        });
    }

    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        let side = self.grid.side();
        let rows: Vec<f64> =
            a.par_chunks(side).zip(b.par_chunks(side)).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum()).collect();
        rows.iter().sum()
    }

    /// Conjugate gradients for `A w = b` starting from `w`.
    fn solve(&mut self, b: &[f64], w: &mut [f64]) -> Result<()> {
        let len = b.len();
        let mut r = vec![0.0; len];
        let mut ap = vec![0.0; len];
        self.apply(w, &mut ap);
        r.iter_mut().zip(b.iter().zip(&ap)).for_each(|(r, (b, a))| *r = b - a);
        let bnorm = self.dot(b, b).sqrt().max(f64::MIN_POSITIVE);
        let mut rr = self.dot(&r, &r);
        let mut p = r.clone();
        for it in 0..=CG_MAX_ITER {
            if rr.sqrt() <= CG_TOL * bnorm {
                self.last_iterations = it;
                return Ok(());
            }
            if it == CG_MAX_ITER {
                break;
            }
            self.apply(&p, &mut ap);
            let alpha = rr / self.dot(&p, &ap);
            w.iter_mut().zip(&p).for_each(|(w, p)| *w += alpha * p);
            r.iter_mut().zip(&ap).for_each(|(r, a)| *r -= alpha * a);
            let next = self.dot(&r, &r);
            let beta = next / rr;
            rr = next;
            p.iter_mut().zip(&r).for_each(|(p, r)| *p = r + beta * *p);
        }
        Err(Error::LinearSolveDiverged { iterations: CG_MAX_ITER, residual: rr.sqrt() / bnorm })
    }

    /// One IMEX step.
    pub fn step(&mut self, c: &ScalarField2D) -> Result<ScalarField2D> {
        if c.grid != self.grid {
            return Err(Error::GridMismatch(format!("field has n = {}, stepper n = {}", c.grid.n, self.grid.n)));
        }
        let SolverConfig { eps, m0, dt, stab, .. } = self.cfg;
        // shift by +1 so the unknown vanishes on the boundary
        let diag = 1.0 / dt + m0 * stab / eps;
        let mut b = self.explicit(&c.values);
        let g = self.grid;
        for j in 1..g.n {
            for i in 1..g.n {
                b[g.index(i, j)] += diag;
            }
        }
        let mut w: Vec<f64> = c.values.iter().map(|v| v + 1.0).collect();
        for j in 0..g.side() {
            for i in 0..g.side() {
                if g.is_boundary(i, j) {
                    w[g.index(i, j)] = 0.0;
                }
            }
        }
        self.solve(&b, &mut w)?;
        let t = c.t + dt;
        let values: Vec<f64> = w.iter().map(|w| w - 1.0).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t });
        }
        let mut out = ScalarField2D { grid: g, values, t };
        out.enforce_boundary();
        Ok(out)
    }
}

/// Second-order upwind difference of `u(k)` at `k = i`, first order next to
/// the boundary.
#[inline]
fn upwind(a: f64, i: usize, n: usize, h: f64, u: impl Fn(usize) -> f64) -> f64 {
    if a > 0.0 {
        if i >= 2 {
            (3.0 * u(i) - 4.0 * u(i - 1) + u(i - 2)) / (2.0 * h)
        } else {
            (u(i) - u(i - 1)) / h
        }
    } else if a < 0.0 {
        if i + 2 <= n {
            (-3.0 * u(i) + 4.0 * u(i + 1) - u(i + 2)) / (2.0 * h)
        } else {
            (u(i + 1) - u(i)) / h
        }
    } else {
        0.0
    }
}

/// One step of the scheme; [`Stepper`] avoids re-sampling `v` in loops.
pub fn step(c: &ScalarField2D, v: &VelocityField, cfg: &SolverConfig) -> Result<ScalarField2D> {
    Stepper::new(c.grid, v, *cfg)?.step(c)
}

/// Snapshots and energies of a solver run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<ScalarField2D>,
    pub energies: Vec<f64>,
    /// Largest `|c|` over every step.
    pub max_abs: f64,
    pub steps: usize,
}

/// Integrates from `c0` to `cfg.t_final`, recording a snapshot at the step
/// nearest to each requested time.
pub fn run(c0: &ScalarField2D, v: &VelocityField, cfg: &SolverConfig, snapshot_times: &[f64]) -> Result<Trajectory> {
    if let Some(t) = snapshot_times.iter().find(|&&t| !(t >= 0.0 && t <= cfg.t_final * (1.0 + 1e-12))) {
        return Err(Error::InvalidConfig(format!("snapshot time {t} outside [0, {}]", cfg.t_final)));
    }
    let steps = cfg.steps();
    let mut marks: Vec<usize> = snapshot_times
        .iter()
        .map(|&t| ((t - c0.t) / cfg.dt).round().clamp(0.0, steps as f64) as usize)
        .collect();
    marks.sort_unstable();
    marks.dedup();
    let mut traj = Trajectory { snapshots: Vec::new(), energies: Vec::new(), max_abs: c0.max_abs(), steps };
    let record = |c: &ScalarField2D, k: usize, traj: &mut Trajectory| {
        if marks.binary_search(&k).is_ok() {
            traj.energies.push(c.energy(cfg.eps, &cfg.potential));
            traj.snapshots.push(c.clone());
        }
    };
    if steps == 0 {
        traj.energies.push(c0.energy(cfg.eps, &cfg.potential));
        traj.snapshots.push(c0.clone());
        return Ok(traj);
    }
    let mut stepper = Stepper::new(c0.grid, v, *cfg)?;
    let mut c = c0.clone();
    record(&c, 0, &mut traj);
    for k in 1..=steps {
        c = stepper.step(&c)?;
        c.t = c0.t + k as f64 * cfg.dt;
        traj.max_abs = traj.max_abs.max(c.max_abs());
        record(&c, k, &mut traj);
    }
    Ok(traj)
}

/// `c_A(·, 0)` on `grid` plus a seeded smooth bump supported in `Γ_0(δ)`
/// whose discrete L² norm is `amp ε^{5/2}`.
pub fn well_prepared_initial(sol: &ApproximateSolution, grid: Grid, amp: f64) -> Result<ScalarField2D> {
    if !(amp >= 0.0) {
        return Err(Error::InvalidConfig(format!("perturbation amplitude must be non-negative, got {amp}")));
    }
    let frame = sol.frame(0.0)?;
    let mut c = ScalarField2D::new(grid, frame.sample(&grid, 0), 0.0)?;
    if amp == 0.0 {
        return Ok(c);
    }
    let delta = sol.data().config.delta;
    let mut rng = ChaCha8Rng::seed_from_u64(PERTURBATION_SEED);
    let modes: Vec<(f64, f64)> = (0..5).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let bump = grid.sample(|x| match frame.locate(x) {
        Location::Near(tp) if tp.r.abs() < delta => {
            let q = tp.r / delta;
            let window = (-1.0 / (1.0 - q * q)).exp();
            let wave: f64 = modes
                .iter()
                .enumerate()
                .map(|(k, (a, b))| {
                    let arg = 2.0 * std::f64::consts::PI * k as f64 * tp.s;
                    a * arg.cos() + b * arg.sin()
                })
                .sum();
            window * wave
        }
        _ => 0.0,
    });
    let norm = grid.l2(&bump);
    if !(norm > 0.0) {
        return Err(Error::ResolutionInsufficient { h: grid.h(), limit: delta });
    }
    let scale = amp * sol.eps().powf(2.5) / norm;
    for (v, b) in c.values.iter_mut().zip(&bump) {
        *v += scale * b;
    }
    c.enforce_boundary();
    Ok(c)
}
