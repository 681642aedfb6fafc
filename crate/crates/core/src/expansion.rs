//! Interface-attached coefficient tables: curve history, `κ1`, `κ2`, `h1`,
//! `b`, `g`, `h2` and the corrector weights, on a uniform time grid.

use serde::{Deserialize, Serialize};

use crate::curve::{dot, Curve};
use crate::error::{Error, Result};
use crate::layer::{CorrectorBasis, ExpansionVariant, LayerCoefficients};
use crate::periodic;
use crate::profile::Profile;
use crate::velocity::VelocityField;

/// Largest admissible characteristic displacement per step, in grid cells.
pub const CFL_CELLS: f64 = 4.0;
/// Bound on `|F(0)|` before differentiating in `r`.
pub const ELIMINATION_TOL: f64 = 1e-6;
/// Bound on `|V - n·v|` at the interface.
pub const TRANSPORT_TOL: f64 = 1e-8;

/// Reaction term in the `h2` equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum H2Variant {
    /// `D_t h2 - κ1 h2 = Δ_Γ h1 - g`
    #[default]
    Derived,
    /// `κ1 h2` cancelled on both sides: `D_t h2 = Δ_Γ h1 - g`
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpansionConfig {
    /// Tube half-width `δ`.
    pub delta: f64,
    pub t_final: f64,
    /// Largest time step of the curve and `h` tables.
    pub dt: f64,
    pub m0: f64,
    pub variant: ExpansionVariant,
    pub h2_rhs_variant: H2Variant,
    pub include_c1: bool,
    pub include_c2: bool,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        Self {
            delta: 0.05,
            t_final: 0.25,
            dt: 1e-3,
            m0: 1.0,
            variant: ExpansionVariant::Consistent,
            h2_rhs_variant: H2Variant::Derived,
            include_c1: true,
            include_c2: true,
        }
    }
}

/// `κ1 = n·(∇v n)` and `κ2 = ½ n·∇²v[n, n]` at `s`. When a measured normal
/// speed is supplied it is checked against `n·v`.
pub fn compute_kappas(curve: &Curve, v: &VelocityField, s: f64, normal_speed: Option<f64>) -> Result<(f64, f64)> {
    let (_, n) = curve.tangent_normal(s)?;
    let jet = v.jet(curve.point(s));
    if let Some(speed) = normal_speed {
        let defect = (speed - dot(n, jet.v)).abs();
        if defect > TRANSPORT_TOL {
            return Err(Error::TransportViolated { s, defect });
        }
    }
    Ok((dot(n, jet.grad_dot(n)), 0.5 * dot(n, jet.hess_dot(n, n))))
}

/// Rate of change of `κ1` following a marker moving with `v`.
pub fn kappa1_rate(curve: &Curve, v: &VelocityField, s: f64) -> f64 {
    let cj = curve.jet(s);
    let (tau, n, sp) = (cj.tangent(), cj.normal(), cj.speed());
    let jet = v.jet(cj.x);
    let g = jet.grad;
    let mut gdot = [[0.0; 2]; 2];
    for (i, row) in gdot.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            *e = jet.hess[i][j][0] * jet.v[0] + jet.hess[i][j][1] * jet.v[1];
        }
    }
    let dn_scale = -dot(n, jet.grad_dot(cj.d1)) / sp;
    let ndot = [dn_scale * tau[0], dn_scale * tau[1]];
    let quad = |m: &[[f64; 2]; 2], a: [f64; 2], b: [f64; 2]| {
        a[0] * (m[0][0] * b[0] + m[0][1] * b[1]) + a[1] * (m[1][0] * b[0] + m[1][1] * b[1])
    };
    quad(&gdot, n, n) + quad(&g, ndot, n) + quad(&g, n, ndot)
}

/// Curves at `t_k = t0 + k dt`, `k = 0..=steps`.
pub fn curve_history(curve: &Curve, v: &VelocityField, steps: usize, dt: f64) -> Result<Vec<Curve>> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(curve.clone());
    for k in 1..=steps {
        let next = out[k - 1].evolve(v, curve.t + k as f64 * dt, dt)?;
        out.push(next);
    }
    Ok(out)
}

/// Per-marker quantities of one curve.
struct SliceGeometry {
    kappa1: Vec<f64>,
    kappa2: Vec<f64>,
    curvature: Vec<f64>,
    /// `∂_t S + v·∇S` at `r = 0`
    transport: Vec<f64>,
    speed: Vec<f64>,
    lap_s: Vec<f64>,
}

fn slice_geometry(curve: &Curve, v: &VelocityField, normal_speed: Option<&[f64]>) -> Result<SliceGeometry> {
    let m = curve.len();
    let mut g = SliceGeometry {
        kappa1: vec![0.0; m],
        kappa2: vec![0.0; m],
        curvature: vec![0.0; m],
        transport: vec![0.0; m],
        speed: vec![0.0; m],
        lap_s: vec![0.0; m],
    };
    for j in 0..m {
        let s = curve.parameter(j);
        let (k1, k2) = compute_kappas(curve, v, s, normal_speed.map(|ns| ns[j]))?;
        let cd = curve.chart_derivatives(0.0, s, v)?;
        let x = curve.point(s);
        g.kappa1[j] = k1;
        g.kappa2[j] = k2;
        g.curvature[j] = curve.curvature(s)?;
        g.transport[j] = cd.dt_s + dot(v.velocity(x), cd.grad_s);
        g.speed[j] = curve.jet(s).speed();
        g.lap_s[j] = cd.lap_s;
    }
    Ok(g)
}

/// One step of `∂_t h + a ∂_s h - k h = q` from table `n` to `n + 1` by
/// backward characteristics (RK4, cubic interpolation) and Crank–Nicolson in
/// the reaction and source.
#[allow(clippy::too_many_arguments)]
fn transport_step(
    h: &[f64],
    a0: &[f64],
    a1: &[f64],
    k0: &[f64],
    k1: &[f64],
    q0: &[f64],
    q1: &[f64],
    relabel: Option<&[f64]>,
    dt: f64,
) -> Result<Vec<f64>> {
    let m = h.len();
    let ds = 1.0 / m as f64;
    let amax = a0.iter().chain(a1).fold(0.0f64, |x, a| x.max(a.abs()));
    if amax * dt / ds > CFL_CELLS {
        return Err(Error::CflViolated(format!(
            "characteristic moves {:.2} cells per step (limit {CFL_CELLS})",
            amax * dt / ds
        )));
    }
    let mut out = vec![0.0; m];
    for (j, o) in out.iter_mut().enumerate() {
        let start = match relabel {
            Some(r) => r[j],
            None => j as f64 * ds,
        };
        let speed = |s: f64, theta: f64| {
            if relabel.is_some() {
                periodic::cubic(a0, s)
            } else {
                (1.0 - theta) * periodic::cubic(a0, s) + theta * periodic::cubic(a1, s)
            }
        };
        // integrate ds/dt = a backwards from θ = 1 to θ = 0
        let y = start;
        let s1 = speed(y, 1.0);
        let s2 = speed(y - 0.5 * dt * s1, 0.5);
        let s3 = speed(y - 0.5 * dt * s2, 0.5);
        let s4 = speed(y - dt * s3, 0.0);
        let foot = y - dt / 6.0 * (s1 + 2.0 * s2 + 2.0 * s3 + s4);
        let hf = periodic::cubic(h, foot);
        let kf = periodic::cubic(k0, foot);
        let qf = periodic::cubic(q0, foot);
        *o = (hf * (1.0 + 0.5 * dt * kf) + 0.5 * dt * (qf + q1[j])) / (1.0 - 0.5 * dt * k1[j]);
    }
    Ok(out)
}

fn solve_transport(
    curves: &[Curve],
    speed: &[Vec<f64>],
    reaction: &[Vec<f64>],
    source: &[Vec<f64>],
    dt: f64,
) -> Result<Vec<Vec<f64>>> {
    let m = curves[0].len();
    let mut out = vec![vec![0.0; m]];
    for n in 0..curves.len() - 1 {
        let next = transport_step(
            &out[n],
            &speed[n],
            &speed[n + 1],
            &reaction[n],
            &reaction[n + 1],
            &source[n],
            &source[n + 1],
            curves[n + 1].relabel.as_deref(),
            dt,
        )?;
        out.push(next);
    }
    Ok(out)
}

/// `h1` on the history's time grid: `D_t h1 + a ∂_s h1 - κ1 h1 = H`, `h1(0) = 0`.
pub fn solve_h1(curves: &[Curve], v: &VelocityField, dt: f64) -> Result<Vec<Vec<f64>>> {
    let geo: Vec<SliceGeometry> = curves.iter().map(|c| slice_geometry(c, v, None)).collect::<Result<_>>()?;
    let speed: Vec<Vec<f64>> = geo.iter().map(|g| g.transport.clone()).collect();
    let react: Vec<Vec<f64>> = geo.iter().map(|g| g.kappa1.clone()).collect();
    let src: Vec<Vec<f64>> = geo.iter().map(|g| g.curvature.clone()).collect();
    solve_transport(curves, &speed, &react, &src, dt)
}

/// `Δ_Γ h = |∇S|² h_ss + ΔS h_s` and `|∇_Γ h|²` at `r = 0`.
fn surface_derivatives(h: &[f64], speed: &[f64], lap_s: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let hs = periodic::spectral_derivative(h, 1);
    let hss = periodic::spectral_derivative(h, 2);
    let lap = (0..h.len()).map(|j| hss[j] / speed[j].powi(2) + lap_s[j] * hs[j]).collect();
    let grad_sq = (0..h.len()).map(|j| (hs[j] / speed[j]).powi(2)).collect();
    (lap, grad_sq)
}

/// `h2`: `D_t h2 + a ∂_s h2 - κ1 h2 = Δ_Γ h1 - g` (or without the reaction
/// term for [`H2Variant::Literal`]), `h2(0) = 0`.
pub fn solve_h2(
    curves: &[Curve],
    v: &VelocityField,
    h1: &[Vec<f64>],
    g: &[Vec<f64>],
    dt: f64,
    variant: H2Variant,
) -> Result<Vec<Vec<f64>>> {
    let geo: Vec<SliceGeometry> = curves.iter().map(|c| slice_geometry(c, v, None)).collect::<Result<_>>()?;
    let speed: Vec<Vec<f64>> = geo.iter().map(|g| g.transport.clone()).collect();
    let react: Vec<Vec<f64>> = geo
        .iter()
        .map(|g| match variant {
            H2Variant::Derived => g.kappa1.clone(),
            H2Variant::Literal => vec![0.0; g.kappa1.len()],
        })
        .collect();
    let src: Vec<Vec<f64>> = geo
        .iter()
        .zip(h1.iter().zip(g))
        .map(|(geo, (h, g))| {
            let (lap, _) = surface_derivatives(h, &geo.speed, &geo.lap_s);
            lap.iter().zip(g).map(|(l, g)| l - g).collect()
        })
        .collect();
    solve_transport(curves, &speed, &react, &src, dt)
}

/// `F(r) = h1 κ1 - ∂_t h1 - a(r) ∂_s h1 - Δd(X(r))` at one `s`.
#[allow(clippy::too_many_arguments)]
fn elimination_defect(
    curve: &Curve,
    v: &VelocityField,
    r: f64,
    s: f64,
    h1: f64,
    h1_s: f64,
    dt_h1: f64,
    kappa1: f64,
) -> Result<f64> {
    let cd = curve.chart_derivatives(r, s, v)?;
    let a = cd.dt_s + dot(v.velocity(curve.chart_point(r, s)), cd.grad_s);
    Ok(h1 * kappa1 - dt_h1 - a * h1_s - cd.lap_d)
}

/// `b = ∂_r F(0)` by fourth-order central differences at step `δ/64`, after
/// checking that `F(0)` vanishes.
#[allow(clippy::too_many_arguments)]
pub fn compute_b(
    curve: &Curve,
    v: &VelocityField,
    delta: f64,
    s: f64,
    h1: f64,
    h1_s: f64,
    dt_h1: f64,
    kappa1: f64,
) -> Result<f64> {
    let f = |r: f64| elimination_defect(curve, v, r, s, h1, h1_s, dt_h1, kappa1);
    let f0 = f(0.0)?;
    if !(f0.abs() <= ELIMINATION_TOL) {
        return Err(Error::EliminationFailed { s, t: curve.t, defect: f0.abs() });
    }
    let k = delta / 64.0;
    Ok((-f(2.0 * k)? + 8.0 * f(k)? - 8.0 * f(-k)? + f(-2.0 * k)?) / (12.0 * k))
}

/// Tables at one time level, indexed by marker.
#[derive(Debug, Clone)]
pub struct Slice {
    pub t: f64,
    pub curve: Curve,
    /// Increments whenever the markers were redistributed.
    pub epoch: usize,
    pub kappa1: Vec<f64>,
    pub kappa2: Vec<f64>,
    pub dkappa1: Vec<f64>,
    pub b: Vec<f64>,
    pub g: Vec<f64>,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub grad_h1_sq: Vec<f64>,
    /// Weights of the first corrector basis, one row per basis function.
    pub c1_weights: Vec<Vec<f64>>,
    pub c2_weights: Vec<Vec<f64>>,
}

/// Everything needed to evaluate the approximate solution.
///
/// Tables are built in the normalized time `τ = m0 t` with velocity `v / m0`,
/// in which the mobility factor drops out.
#[derive(Debug, Clone)]
pub struct ExpansionData {
    pub config: ExpansionConfig,
    pub profile: Profile,
    pub basis: CorrectorBasis,
    /// Velocity in normalized time.
    pub velocity: VelocityField,
    pub dt: f64,
    pub slices: Vec<Slice>,
}

/// Index pairs `(first, last)` of the slices sharing one marker labelling.
fn epoch_bounds(curves: &[Curve]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut first = 0;
    for n in 1..curves.len() {
        if curves[n].relabel.is_some() {
            out.push((first, n - 1));
            first = n;
        }
    }
    out.push((first, curves.len() - 1));
    out
}

/// Time derivative of a per-marker table at slice `n`, using only slices of
/// the same epoch. Fourth-order stencils (central, else one-sided) are used
/// when the epoch is long enough; `central_only` refuses anything else.
fn time_derivative(tables: &[Vec<f64>], n: usize, bounds: (usize, usize), dt: f64, central_only: bool) -> Option<Vec<f64>> {
    let (lo, hi) = bounds;
    let m = tables[n].len();
    let at = |k: usize, j: usize| tables[k][j];
    let d: Box<dyn Fn(usize) -> f64> = if n >= lo + 2 && n + 2 <= hi {
        Box::new(move |j| (-at(n + 2, j) + 8.0 * at(n + 1, j) - 8.0 * at(n - 1, j) + at(n - 2, j)) / (12.0 * dt))
    } else if central_only {
        return None;
    } else if n + 4 <= hi {
        Box::new(move |j| {
            (-25.0 * at(n, j) + 48.0 * at(n + 1, j) - 36.0 * at(n + 2, j) + 16.0 * at(n + 3, j) - 3.0 * at(n + 4, j))
                / (12.0 * dt)
        })
    } else if n >= lo + 4 {
        Box::new(move |j| {
            (25.0 * at(n, j) - 48.0 * at(n - 1, j) + 36.0 * at(n - 2, j) - 16.0 * at(n - 3, j) + 3.0 * at(n - 4, j))
                / (12.0 * dt)
        })
    } else if n > lo && n < hi {
        Box::new(move |j| (at(n + 1, j) - at(n - 1, j)) / (2.0 * dt))
    } else if hi > lo {
        let (a, b) = if n < hi { (n, n + 1) } else { (n - 1, n) };
        Box::new(move |j| (at(b, j) - at(a, j)) / dt)
    } else {
        Box::new(|_| 0.0)
    };
    Some((0..m).map(d).collect())
}

impl ExpansionData {
    pub fn build(curve0: &Curve, v: &VelocityField, profile: Profile, config: ExpansionConfig) -> Result<Self> {
        if !(config.delta > 0.0 && config.t_final >= 0.0 && config.dt > 0.0 && config.m0 > 0.0) {
            return Err(Error::InvalidConfig(format!("invalid expansion parameters {config:?}")));
        }
        let vel = v.scaled(1.0 / config.m0);
        let horizon = config.m0 * config.t_final;
        let steps = ((horizon / (config.m0 * config.dt)) - 1e-9).ceil().max(1.0) as usize;
        let dt = horizon / steps as f64;
        let mut start = curve0.clone();
        start.t = 0.0;
        let curves = curve_history(&start, &vel, steps, dt)?;
        for c in &curves {
            if c.boundary_clearance() <= 3.0 * config.delta {
                return Err(Error::InvalidConfig(format!(
                    "curve comes within {:.4} of the boundary at t = {:.4}; need more than 3δ = {:.4}",
                    c.boundary_clearance(),
                    c.t / config.m0,
                    3.0 * config.delta
                )));
            }
            if let Some((a, b)) = c.self_intersection() {
                return Err(Error::CurveDegenerate(format!("segments {a} and {b} intersect at t = {}", c.t)));
            }
        }
        let bounds = epoch_bounds(&curves);
        let epoch_of = |n: usize| bounds.iter().position(|&(lo, hi)| lo <= n && n <= hi).unwrap_or(0);

        // transport check against the measured marker motion
        let positions: Vec<[Vec<f64>; 2]> = curves
            .iter()
            .map(|c| [c.markers().iter().map(|p| p[0]).collect(), c.markers().iter().map(|p| p[1]).collect()])
            .collect();
        let xs: Vec<Vec<f64>> = positions.iter().map(|p| p[0].clone()).collect();
        let ys: Vec<Vec<f64>> = positions.iter().map(|p| p[1].clone()).collect();
        let mut geo = Vec::with_capacity(curves.len());
        for (n, c) in curves.iter().enumerate() {
            let b = bounds[epoch_of(n)];
            let speed = match (time_derivative(&xs, n, b, dt, true), time_derivative(&ys, n, b, dt, true)) {
                (Some(vx), Some(vy)) => Some(
                    (0..c.len())
                        .map(|j| {
                            let (_, nn) = c.tangent_normal(c.parameter(j)).unwrap_or(([1.0, 0.0], [0.0, 1.0]));
                            nn[0] * vx[j] + nn[1] * vy[j]
                        })
                        .collect::<Vec<f64>>(),
                ),
                _ => None,
            };
            geo.push(slice_geometry(c, &vel, speed.as_deref())?);
        }

        let h1 = {
            let speed: Vec<Vec<f64>> = geo.iter().map(|g| g.transport.clone()).collect();
            let react: Vec<Vec<f64>> = geo.iter().map(|g| g.kappa1.clone()).collect();
            let src: Vec<Vec<f64>> = geo.iter().map(|g| g.curvature.clone()).collect();
            solve_transport(&curves, &speed, &react, &src, dt)?
        };

        let basis = CorrectorBasis::new(&profile, config.variant)?;
        let m = curve0.len();
        let mut b_tab = Vec::with_capacity(curves.len());
        let mut g_tab = Vec::with_capacity(curves.len());
        let mut coeffs = Vec::with_capacity(curves.len());
        for (n, c) in curves.iter().enumerate() {
            let dth1 = time_derivative(&h1, n, bounds[epoch_of(n)], dt, false).unwrap_or_else(|| vec![0.0; m]);
            let h1s = periodic::spectral_derivative(&h1[n], 1);
            let (_, grad_sq) = surface_derivatives(&h1[n], &geo[n].speed, &geo[n].lap_s);
            let mut b = vec![0.0; m];
            let mut g = vec![0.0; m];
            let mut k = Vec::with_capacity(m);
            for j in 0..m {
                let s = c.parameter(j);
                b[j] = compute_b(c, &vel, config.delta, s, h1[n][j], h1s[j], dth1[j], geo[n].kappa1[j])?;
                let lc = LayerCoefficients {
                    kappa1: geo[n].kappa1[j],
                    kappa2: geo[n].kappa2[j],
                    b: b[j],
                    h1: h1[n][j],
                    grad_h1_sq: grad_sq[j],
                    dkappa1: kappa1_rate(c, &vel, s),
                };
                g[j] = basis.c2_weights(&lc).0;
                k.push(lc);
            }
            b_tab.push(b);
            g_tab.push(g);
            coeffs.push(k);
        }

        let h2 = {
            let speed: Vec<Vec<f64>> = geo.iter().map(|g| g.transport.clone()).collect();
            let react: Vec<Vec<f64>> = geo
                .iter()
                .map(|g| match config.h2_rhs_variant {
                    H2Variant::Derived => g.kappa1.clone(),
                    H2Variant::Literal => vec![0.0; m],
                })
                .collect();
            let src: Vec<Vec<f64>> = (0..curves.len())
                .map(|n| {
                    let (lap, _) = surface_derivatives(&h1[n], &geo[n].speed, &geo[n].lap_s);
                    lap.iter().zip(&g_tab[n]).map(|(l, g)| l - g).collect()
                })
                .collect();
            solve_transport(&curves, &speed, &react, &src, dt)?
        };

        let n1 = basis.c1.len();
        let n2 = basis.c2.len();
        let mut slices = Vec::with_capacity(curves.len());
        for (n, c) in curves.into_iter().enumerate() {
            let mut c1w = vec![vec![0.0; m]; n1];
            let mut c2w = vec![vec![0.0; m]; n2];
            for (j, lc) in coeffs[n].iter().enumerate() {
                if config.include_c1 {
                    for (row, w) in c1w.iter_mut().zip(basis.c1_weights(lc)) {
                        row[j] = w;
                    }
                }
                if config.include_c2 {
                    for (row, w) in c2w.iter_mut().zip(basis.c2_weights(lc).1) {
                        row[j] = w;
                    }
                }
            }
            slices.push(Slice {
                t: c.t,
                epoch: epoch_of(n),
                kappa1: geo[n].kappa1.clone(),
                kappa2: geo[n].kappa2.clone(),
                dkappa1: coeffs[n].iter().map(|k| k.dkappa1).collect(),
                b: b_tab[n].clone(),
                g: g_tab[n].clone(),
                h1: h1[n].clone(),
                h2: if config.include_c2 { h2[n].clone() } else { vec![0.0; m] },
                grad_h1_sq: coeffs[n].iter().map(|k| k.grad_h1_sq).collect(),
                c1_weights: c1w,
                c2_weights: c2w,
                curve: c,
            });
        }
        Ok(Self { config, profile, basis, velocity: vel, dt, slices })
    }

    /// Normalized time of the last slice.
    pub fn horizon(&self) -> f64 {
        self.slices.last().map_or(0.0, |s| s.t)
    }

    /// First and last slice sharing the labelling of slice `n`.
    pub fn epoch_range(&self, n: usize) -> (usize, usize) {
        let e = self.slices[n].epoch;
        let lo = self.slices.iter().position(|s| s.epoch == e).unwrap_or(n);
        let hi = self.slices.iter().rposition(|s| s.epoch == e).unwrap_or(n);
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Potential;
    use crate::profile::solve_profile;

    fn prof() -> Profile {
        solve_profile(Potential::quartic(), 40.0, 0.05).unwrap()
    }

    fn circle() -> Curve {
        Curve::circle([0.5, 0.5], 0.25, 128).unwrap()
    }

    #[test]
    fn kappa_examples() {
        let c = circle();
        assert_eq!(compute_kappas(&c, &VelocityField::Zero, 0.3, Some(0.0)).unwrap(), (0.0, 0.0));
        let shear = VelocityField::LinearShear { rate: 0.4 };
        assert_eq!(compute_kappas(&c, &shear, 0.1, None).unwrap().1, 0.0);
        let v = VelocityField::default();
        let delta = 0.05;
        let k = delta / 64.0;
        for s in [0.0, 0.2, 0.45, 0.8] {
            let (k1, _) = compute_kappas(&c, &v, s, None).unwrap();
            let (_, n) = c.tangent_normal(s).unwrap();
            let nv = |r: f64| dot(n, v.velocity(c.chart_point(r, s)));
            let fd = (-nv(2.0 * k) + 8.0 * nv(k) - 8.0 * nv(-k) + nv(-2.0 * k)) / (12.0 * k);
            assert!((k1 - fd).abs() < 1e-7);
        }
        assert!(matches!(
            compute_kappas(&c, &v, 0.1, Some(1.0)),
            Err(Error::TransportViolated { .. })
        ));
    }

    #[test]
    fn kappa1_rate_matches_differences() {
        let c = Curve::ellipse([0.5, 0.5], 0.2, 0.15, 128).unwrap();
        let v = VelocityField::default();
        let dt = 1e-3;
        let (a, b) = (c.evolve(&v, dt, dt / 4.0).unwrap(), c.evolve(&v, 2.0 * dt, dt / 4.0).unwrap());
        for s in [0.0, 0.3, 0.7] {
            let k = |c: &Curve| compute_kappas(c, &v, s, None).unwrap().0;
            let fd = (-3.0 * k(&c) + 4.0 * k(&a) - k(&b)) / (2.0 * dt);
            assert!((fd - kappa1_rate(&c, &v, s)).abs() < 1e-6, "{fd} {}", kappa1_rate(&c, &v, s));
        }
    }

    #[test]
    fn static_circle_h1_and_b() {
        let c = circle();
        let dt = 0.01;
        let curves = curve_history(&c, &VelocityField::Zero, 25, dt).unwrap();
        let h1 = solve_h1(&curves, &VelocityField::Zero, dt).unwrap();
        for (n, row) in h1.iter().enumerate() {
            for v in row {
                assert!((v - n as f64 * dt / 0.25).abs() < 1e-8);
            }
        }
        let b = compute_b(&curves[10], &VelocityField::Zero, 0.05, 0.3, h1[10][0], 0.0, 4.0, 0.0).unwrap();
        assert!((b - 16.0).abs() < 1e-6, "{b}");
        assert!(matches!(
            compute_b(&curves[10], &VelocityField::Zero, 0.05, 0.3, 0.4, 0.0, 0.0, 0.0),
            Err(Error::EliminationFailed { .. })
        ));
    }

    #[test]
    fn rotating_circle_h1_is_uniform() {
        let c = circle();
        let v = VelocityField::RigidRotation { omega: 2.0, center: [0.5, 0.5] };
        let dt = 0.01;
        let curves = curve_history(&c, &v, 25, dt).unwrap();
        let h1 = solve_h1(&curves, &v, dt).unwrap();
        let t = 25.0 * dt;
        assert!(h1[25].iter().all(|x| (x - t / 0.25).abs() < 1e-8));
    }

    #[test]
    fn zero_source_gives_zero_h() {
        let c = circle();
        let curves = curve_history(&c, &VelocityField::Zero, 5, 0.01).unwrap();
        let m = c.len();
        let zeros = vec![vec![0.0; m]; 6];
        let out = solve_transport(&curves, &zeros, &zeros, &zeros, 0.01).unwrap();
        assert!(out.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn static_circle_h2_integrates_g() {
        let c = circle();
        let p = prof();
        let cfg = ExpansionConfig { dt: 0.01, ..Default::default() };
        let data = ExpansionData::build(&c, &VelocityField::Zero, p, cfg).unwrap();
        let r = 0.25f64;
        for s in &data.slices {
            let t = s.t;
            for j in 0..c.len() {
                assert!((s.h1[j] - t / r).abs() < 1e-8);
                assert!((s.b[j] - 1.0 / (r * r)).abs() < 1e-6);
                assert!((s.g[j] + t / r.powi(3)).abs() < 1e-6);
                // h2 = -∫ g = t² / (2 R³)
                assert!((s.h2[j] - t * t / (2.0 * r.powi(3))).abs() < 1e-6, "{} {}", s.h2[j], t * t / (2.0 * r.powi(3)));
            }
        }
    }

    #[test]
    fn reference_field_tables() {
        let c = circle();
        let p = prof();
        let cfg = ExpansionConfig { dt: 2.5e-3, ..Default::default() };
        let v = VelocityField::default();
        let data = ExpansionData::build(&c, &v, p, cfg).unwrap();
        assert!(data.slices[0].h1.iter().chain(&data.slices[0].h2).all(|&x| x == 0.0));
        let last = data.slices.last().unwrap();
        assert!((last.t - 0.25).abs() < 1e-12);
        // the rotation-dominated field keeps h1 close to t/R
        for x in &last.h1 {
            assert!((x - 1.0).abs() < 0.05, "{x}");
        }
    }

    #[test]
    fn b_against_sixth_order_oracle() {
        let c = circle().evolve(&VelocityField::default(), 0.1, 1e-3).unwrap();
        let v = VelocityField::default();
        let s = 0.37;
        let (k1, _) = compute_kappas(&c, &v, s, None).unwrap();
        let (h1, h1s) = (0.4, 0.3);
        let cd = c.chart_derivatives(0.0, s, &v).unwrap();
        let a0 = cd.dt_s + dot(v.velocity(c.point(s)), cd.grad_s);
        let dth1 = h1 * k1 - a0 * h1s + c.curvature(s).unwrap();
        let b = compute_b(&c, &v, 0.05, s, h1, h1s, dth1, k1).unwrap();
        let f = |r: f64| elimination_defect(&c, &v, r, s, h1, h1s, dth1, k1).unwrap();
        let k = 0.05 / 32.0;
        let oracle = (f(3.0 * k) - 9.0 * f(2.0 * k) + 45.0 * f(k) - 45.0 * f(-k) + 9.0 * f(-2.0 * k) - f(-3.0 * k)) / (60.0 * k);
        assert!((b - oracle).abs() < 1e-5, "{b} vs {oracle}");
    }
}
