//! First- and second-order layer correctors.
//!
//! The correctors solve `-u'' + f''(θ0) u = rhs(ρ)` with right-hand sides that
//! are linear combinations of a few fixed functions of `ρ` whose coefficients
//! depend on `(s, t)`. Each fixed function is solved once; the corrector at a
//! given `(s, t)` is the matching combination of those solutions.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::profile::{sigma, solve_linearized, Profile, RadialFunction};

/// Which set of layer equations the builder uses.
///
/// `Consistent` collects every term of each order in `ε`. `Literal` keeps the
/// shortened equations: the squared tangential gradient of `h1` enters the
/// first corrector, and the second corrector omits the transport of the first
/// corrector, the `f'''` term, and keeps `(ρ + h1) κ1 ∂_ρ c1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionVariant {
    #[default]
    Consistent,
    Literal,
}

/// Local coefficients of the corrector equations at one `(s, t)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LayerCoefficients {
    pub kappa1: f64,
    pub kappa2: f64,
    pub b: f64,
    pub h1: f64,
    /// `|∇_Γ h1|²`
    pub grad_h1_sq: f64,
    /// Time derivative of `κ1` following the markers.
    pub dkappa1: f64,
}

/// Right-hand side of the first corrector: `|∇_Γ h1|² θ0'' - ρ κ1 θ0'`.
pub fn c1_rhs(prof: &Profile, grad_h1_sq: f64, kappa1: f64) -> Vec<f64> {
    (0..prof.grid.len)
        .map(|i| grad_h1_sq * prof.theta0_pp[i] - prof.grid.rho(i) * kappa1 * prof.theta0_p[i])
        .collect()
}

/// Decay rate used for the corrector envelopes. The `ρ θ0'` forcing decays at
/// the homogeneous rate, which adds a polynomial factor to the solution, so
/// the envelope is taken slightly below `α`.
pub fn envelope_rate(prof: &Profile) -> f64 {
    0.9 * prof.alpha
}

pub fn solve_c1(prof: &Profile, grad_h1_sq: f64, kappa1: f64) -> Result<RadialFunction> {
    let mut u = solve_linearized(&c1_rhs(prof, grad_h1_sq, kappa1), prof)?;
    u.verify_decay(&prof.grid, envelope_rate(prof), 1);
    Ok(u)
}

/// `-(κ2 (ρ + h1)² + (ρ + h1) b) θ0' - (ρ + h1) κ1 ∂_ρ c1`, without the `g` term.
fn c2_rhs_without_g(prof: &Profile, c1: &RadialFunction, kappa1: f64, kappa2: f64, b: f64, h1: f64) -> Vec<f64> {
    (0..prof.grid.len)
        .map(|i| {
            let y = prof.grid.rho(i) + h1;
            -(kappa2 * y * y + y * b) * prof.theta0_p[i] - y * kappa1 * c1.d1[i]
        })
        .collect()
}

/// The value of `g` that makes the second corrector equation solvable.
pub fn compute_g(prof: &Profile, c1: &RadialFunction, kappa1: f64, kappa2: f64, b: f64, h1: f64) -> f64 {
    let rest = c2_rhs_without_g(prof, c1, kappa1, kappa2, b, h1);
    prof.project(&rest) / sigma(prof)
}

pub fn c2_rhs(prof: &Profile, g: f64, kappa1: f64, kappa2: f64, b: f64, h1: f64, c1: &RadialFunction) -> Vec<f64> {
    let mut rhs = c2_rhs_without_g(prof, c1, kappa1, kappa2, b, h1);
    for (r, t) in rhs.iter_mut().zip(&prof.theta0_p) {
        *r -= g * t;
    }
    rhs
}

pub fn solve_c2(prof: &Profile, g: f64, kappa1: f64, kappa2: f64, b: f64, h1: f64, c1: &RadialFunction) -> Result<RadialFunction> {
    let mut u = solve_linearized(&c2_rhs(prof, g, kappa1, kappa2, b, h1, c1), prof)?;
    u.verify_decay(&prof.grid, envelope_rate(prof), 2);
    Ok(u)
}

/// Precomputed solutions for every fixed function appearing in the corrector
/// right-hand sides of one variant.
#[derive(Debug, Clone)]
pub struct CorrectorBasis {
    pub variant: ExpansionVariant,
    pub sigma: f64,
    /// First corrector `c1 = Σ α_k u_k`; `u_0` answers `θ0''`, `u_1` answers `-ρθ0'`.
    pub c1: Vec<RadialFunction>,
    /// Second corrector `c2 = Σ β_k w_k` with `w_k` solving the projected
    /// right-hand side `q_k - (⟨q_k, θ0'⟩ / σ) θ0'`.
    pub c2: Vec<RadialFunction>,
    /// `⟨q_k, θ0'⟩`
    pub c2_moments: Vec<f64>,
    /// The fixed right-hand sides `q_k` themselves.
    pub c2_sources: Vec<Vec<f64>>,
}

impl CorrectorBasis {
    pub fn new(prof: &Profile, variant: ExpansionVariant) -> Result<Self> {
        let sig = sigma(prof);
        let n = prof.grid.len;
        let rho: Vec<f64> = prof.grid.nodes().collect();
        let tp = &prof.theta0_p;
        let ua = solve_linearized(&prof.theta0_pp, prof)?;
        let ub_rhs: Vec<f64> = (0..n).map(|i| -rho[i] * tp[i]).collect();
        let ub = solve_linearized(&ub_rhs, prof)?;
        let mut q: Vec<Vec<f64>> = vec![
            tp.clone(),
            (0..n).map(|i| rho[i] * tp[i]).collect(),
            (0..n).map(|i| rho[i] * rho[i] * tp[i]).collect(),
        ];
        match variant {
            ExpansionVariant::Consistent => {
                q.push(prof.theta0_pp.clone());
                q.push(
                    (0..n)
                        .map(|i| rho[i] * ub.d1[i] + 0.5 * prof.potential.d3f(prof.theta0[i]) * ub.values[i].powi(2))
                        .collect(),
                );
                q.push(ub.values.clone());
            }
            ExpansionVariant::Literal => {
                q.push((0..n).map(|i| rho[i] * ua.d1[i]).collect());
                q.push(ua.d1.clone());
                q.push((0..n).map(|i| rho[i] * ub.d1[i]).collect());
                q.push(ub.d1.clone());
            }
        }
        let mut c2 = Vec::with_capacity(q.len());
        let mut moments = Vec::with_capacity(q.len());
        for (k, qk) in q.iter().enumerate() {
            let m = prof.project(qk);
            moments.push(m);
            if k == 0 {
                c2.push(RadialFunction::zeros(&prof.grid));
                continue;
            }
            let projected: Vec<f64> = qk.iter().zip(tp).map(|(a, t)| a - m / sig * t).collect();
            c2.push(solve_linearized(&projected, prof)?);
        }
        Ok(Self { variant, sigma: sig, c1: vec![ua, ub], c2, c2_moments: moments, c2_sources: q })
    }

    /// Weights of `c1` in terms of `self.c1`.
    pub fn c1_weights(&self, k: &LayerCoefficients) -> [f64; 2] {
        match self.variant {
            ExpansionVariant::Consistent => [0.0, k.kappa1],
            ExpansionVariant::Literal => [k.grad_h1_sq, k.kappa1],
        }
    }

    /// Weights of the fixed right-hand sides `q_k` in the second corrector
    /// equation, excluding the `-g θ0'` term.
    pub fn c2_rhs_weights(&self, k: &LayerCoefficients) -> Vec<f64> {
        let base = [
            -k.kappa2 * k.h1 * k.h1 - k.b * k.h1,
            -2.0 * k.kappa2 * k.h1 - k.b,
            -k.kappa2,
        ];
        let k1sq = k.kappa1 * k.kappa1;
        let mut w = base.to_vec();
        match self.variant {
            ExpansionVariant::Consistent => {
                w.extend([k.grad_h1_sq, -k1sq, -k.dkappa1]);
            }
            ExpansionVariant::Literal => {
                let kg = k.kappa1 * k.grad_h1_sq;
                w.extend([-kg, -k.h1 * kg, -k1sq, -k.h1 * k1sq]);
            }
        }
        w
    }

    /// `g` and the weights of `c2` in terms of `self.c2`.
    pub fn c2_weights(&self, k: &LayerCoefficients) -> (f64, Vec<f64>) {
        let w = self.c2_rhs_weights(k);
        let g = w.iter().zip(&self.c2_moments).map(|(a, m)| a * m).sum::<f64>() / self.sigma;
        (g, w)
    }

    /// Samples `Σ w_k f_k` on the grid.
    pub fn combine(funcs: &[RadialFunction], weights: &[f64]) -> Vec<f64> {
        let n = funcs[0].values.len();
        let mut out = vec![0.0; n];
        for (f, &w) in funcs.iter().zip(weights) {
            if w != 0.0 {
                for (o, v) in out.iter_mut().zip(&f.values) {
                    *o += w * v;
                }
            }
        }
        out
    }
}
