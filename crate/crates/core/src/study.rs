//! End-to-end pipeline over an ε-sequence: expansion, residual, solver runs,
//! error orders and the spectral check, with the acceptance verdicts.

use std::path::Path;
use std::sync::Arc;

use crate::approx::{residual_s, ApproximateSolution, ResidualReport};
use crate::config::StudyConfig;
use crate::error::{Error, Result};
use crate::expansion::ExpansionData;
use crate::grid::Grid;
use crate::io::Csv;
use crate::metrics::{eoc, error_norms, fit_order, EocReport, ErrorReport, OrderFit};
use crate::pde::{run, well_prepared_initial, SolverConfig, Trajectory};
use crate::profile::{sigma, solve_profile, Profile};
use crate::spectral::{min_rayleigh, SpectralReport};

/// Bound on `‖c‖_∞` asserted for every solver run.
pub const MAX_ABS_BOUND: f64 = 1.1;

pub fn build_profile(cfg: &StudyConfig) -> Result<Profile> {
    solve_profile(cfg.profile.potential, cfg.profile.half_width, cfg.profile.step)
}

/// Checks of the computed optimal profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSummary {
    pub sigma: f64,
    /// Largest `|−θ0'' + f'(θ0)|` with fourth-order differences.
    pub ode_residual: f64,
    pub theta0_at_zero: f64,
    /// `max (1 − |θ0|) e^{α|ρ|}` over `|ρ| ≥ 1` where `1 − |θ0|` is above
    /// roundoff.
    pub decay_constant: f64,
    pub monotone: bool,
}

/// Tolerance on the profile ODE residual; dominated by the difference stencil.
pub const PROFILE_ODE_TOL: f64 = 1e-5;

impl ProfileSummary {
    pub fn passed(&self) -> bool {
        self.ode_residual <= PROFILE_ODE_TOL
            && self.theta0_at_zero.abs() <= 1e-12
            && self.monotone
            && self.decay_constant.is_finite()
            && self.sigma > 0.0
    }
}

pub fn profile_summary(p: &Profile) -> ProfileSummary {
    let h = p.grid.step;
    let th = &p.theta0;
    let n = th.len();
    let mut ode_residual = 0.0f64;
    for i in 2..n - 2 {
        let d2 = (-th[i + 2] + 16.0 * th[i + 1] - 30.0 * th[i] + 16.0 * th[i - 1] - th[i - 2]) / (12.0 * h * h);
        ode_residual = ode_residual.max((-d2 + p.potential.df(th[i])).abs());
    }
    let decay_constant = (0..n)
        .filter(|&i| p.grid.rho(i).abs() >= 1.0 && 1.0 - th[i].abs() > 1e-10)
        .map(|i| (1.0 - th[i].abs()) * (p.alpha * p.grid.rho(i).abs()).exp())
        .fold(0.0f64, f64::max);
    ProfileSummary {
        sigma: sigma(p),
        ode_residual,
        theta0_at_zero: th[p.grid.center()],
        decay_constant,
        monotone: th.windows(2).all(|w| w[1] >= w[0]),
    }
}

pub fn profile_csv(p: &Profile) -> Csv {
    let mut csv = Csv::new(&["rho", "theta0", "theta0_p", "theta0_pp"]);
    for i in 0..p.grid.len {
        csv.row(&[p.grid.rho(i), p.theta0[i], p.theta0_p[i], p.theta0_pp[i]]);
    }
    csv
}

pub fn build_expansion(cfg: &StudyConfig) -> Result<Arc<ExpansionData>> {
    cfg.validate()?;
    let profile = build_profile(cfg)?;
    let curve = cfg.geometry.curve.build(cfg.geometry.markers)?;
    Ok(Arc::new(ExpansionData::build(&curve, &cfg.velocity, profile, cfg.expansion)?))
}

/// Space-time residual of `c_A` at one `ε`.
pub fn residual_case(data: &Arc<ExpansionData>, cfg: &StudyConfig, eps: f64) -> Result<ResidualReport> {
    let sol = ApproximateSolution::new(data.clone(), eps)?;
    let grid = Grid::for_eps(eps, cfg.residual.cells_per_eps);
    residual_s(&sol, &cfg.velocity, grid, cfg.residual.dt_factor * eps * grid.h(), cfg.residual.time_nodes)
}

/// Solver run from well-prepared data plus the error norms against `c_A`.
pub fn solve_case(data: &Arc<ExpansionData>, cfg: &StudyConfig, eps: f64) -> Result<(Trajectory, ErrorReport)> {
    let sol = ApproximateSolution::new(data.clone(), eps)?;
    let grid = Grid::for_eps(eps, cfg.pde.cells_per_eps);
    let c0 = well_prepared_initial(&sol, grid, cfg.pde.perturbation_amp)?;
    let t_final = sol.t_final();
    let solver = SolverConfig::limited(
        eps,
        data.config.m0,
        t_final,
        grid,
        &cfg.velocity,
        data.profile.potential,
        cfg.pde.cfl,
        cfg.pde.dt_factor,
    );
    let k = cfg.pde.snapshots.max(1);
    let times: Vec<f64> = (0..=k).map(|i| t_final * i as f64 / k as f64).collect();
    let traj = run(&c0, &cfg.velocity, &solver, &times)?;
    let report = error_norms(&traj, &sol)?;
    Ok((traj, report))
}

/// `λ_min` at each configured time fraction.
pub fn spectral_case(data: &Arc<ExpansionData>, cfg: &StudyConfig, eps: f64) -> Result<Vec<SpectralReport>> {
    let sol = ApproximateSolution::new(data.clone(), eps)?;
    let grid = Grid::for_eps(eps, cfg.spectral.cells_per_eps);
    cfg.spectral.time_fractions.iter().map(|f| min_rayleigh(&sol, f * sol.t_final(), grid)).collect()
}

/// Per ε, the envelope `C_L(ε) = max(0, max_t −λ_min)`, in ε order.
pub fn spectral_envelope(reports: &[SpectralReport]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for r in reports {
        let c = (-r.lambda_min).max(0.0);
        match out.iter_mut().find(|(e, _)| *e == r.eps) {
            Some(entry) => entry.1 = entry.1.max(c),
            None => out.push((r.eps, c)),
        }
    }
    out
}

/// Worst ratio of the envelope growth to the allowance `(1 + g)^{log2(ε_i/ε_{i+1})}`
/// over consecutive ε; at most 1 when the check passes.
pub fn spectral_growth_ratio(envelope: &[(f64, f64)], growth: f64) -> f64 {
    envelope
        .windows(2)
        .map(|w| {
            let (e0, c0) = w[0];
            let (e1, c1) = w[1];
            let allowed = c0 * (1.0 + growth).powf((e0 / e1).log2());
            if allowed > 0.0 {
                c1 / allowed
            } else if c1 > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// One acceptance check of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub eps: Vec<f64>,
    pub residual_norms: Vec<f64>,
    pub residual_fit: OrderFit,
    pub errors: Vec<ErrorReport>,
    pub max_abs: Vec<f64>,
    pub eoc: EocReport,
    pub spectral: Vec<SpectralReport>,
    pub criteria: Vec<Criterion>,
}

impl StudyOutcome {
    pub fn first_failure(&self) -> Option<&Criterion> {
        self.criteria.iter().find(|c| !c.passed)
    }
}

pub fn residual_csv(eps: &[f64], norms: &[f64]) -> Csv {
    let mut csv = Csv::new(&["eps", "norm_L2"]);
    for (e, n) in eps.iter().zip(norms) {
        csv.row(&[*e, *n]);
    }
    csv
}

pub fn errors_csv(reports: &[ErrorReport]) -> Csv {
    let mut header = vec!["eps"];
    header.extend(ErrorReport::NAMES);
    let mut csv = Csv::new(&header);
    for r in reports {
        let mut row = vec![r.eps];
        row.extend(r.values());
        csv.row(&row);
    }
    csv
}

/// `norm,slope,pairwise_orders...`, one row per norm; the residual enters as
/// `residual_L2` when given.
pub fn eoc_csv(eoc: &EocReport, residual: Option<&OrderFit>) -> Csv {
    let mut csv = Csv::new(&["norm", "slope", "pairwise_orders..."]);
    let mut push = |name: &str, f: &OrderFit| {
        let mut row = vec![f.slope];
        row.extend(&f.pairwise);
        csv.labeled_row(name, &row);
    };
    if let Some(f) = residual {
        push("residual_L2", f);
    }
    for (name, f) in &eoc.fits {
        push(name, f);
    }
    csv
}

pub fn spectral_csv(reports: &[SpectralReport]) -> Csv {
    let mut csv = Csv::new(&["eps", "t", "lambda_min"]);
    for r in reports {
        csv.row(&[r.eps, r.t, r.lambda_min]);
    }
    csv
}

fn order_criterion(name: &'static str, fit: &OrderFit, min: f64) -> Criterion {
    Criterion {
        name,
        passed: fit.slope >= min,
        detail: format!("fitted order {:.3} (required >= {min}), pairwise {:?}", fit.slope, rounded(&fit.pairwise)),
    }
}

fn rounded(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1000.0).round() / 1000.0).collect()
}

/// Runs every stage and writes `residual.csv`, `errors.csv`, `eoc.csv` and
/// `spectral.csv` to `out`. Tables are written only once all stages succeed.
pub fn run_study(cfg: &StudyConfig, out: &Path) -> Result<StudyOutcome> {
    cfg.validate()?;
    let eps = cfg.study.eps.clone();
    if eps.len() < 3 {
        return Err(Error::DegenerateFit(format!("need at least 3 eps values, got {}", eps.len())));
    }
    let data = build_expansion(cfg)?;

    let residuals = eps.iter().map(|&e| residual_case(&data, cfg, e)).collect::<Result<Vec<_>>>()?;
    let residual_norms: Vec<f64> = residuals.iter().map(|r| r.norm).collect();
    let residual_fit = fit_order(&eps, &residual_norms)?;

    let mut errors = Vec::with_capacity(eps.len());
    let mut max_abs = Vec::with_capacity(eps.len());
    for &e in &eps {
        let (traj, report) = solve_case(&data, cfg, e)?;
        max_abs.push(traj.max_abs);
        errors.push(report);
    }
    let eoc_report = eoc(&errors)?;

    let mut spectral = Vec::new();
    for &e in &eps {
        spectral.extend(spectral_case(&data, cfg, e)?);
    }

    let min = cfg.study.min_order;
    let mut criteria = vec![order_criterion("residual_order", &residual_fit, min)];
    for name in ["norm_linf_l2", "norm_grad_out", "norm_tau_in", "norm_grad_in"] {
        let fit = eoc_report.get(name).expect("every norm is fitted");
        criteria.push(order_criterion(name, fit, min));
    }
    let worst = max_abs.iter().cloned().fold(0.0, f64::max);
    criteria.push(Criterion {
        name: "max_abs_bound",
        passed: worst <= MAX_ABS_BOUND,
        detail: format!("max |c| = {worst:.4} (bound {MAX_ABS_BOUND})"),
    });
    let envelope = spectral_envelope(&spectral);
    let ratio = spectral_growth_ratio(&envelope, cfg.study.max_spectral_growth);
    criteria.push(Criterion {
        name: "spectral_uniformity",
        passed: ratio <= 1.0,
        detail: format!(
            "envelope -lambda_min per eps {:?}, worst growth/allowance {ratio:.3}",
            envelope.iter().map(|(e, c)| (*e, (c * 1e4).round() / 1e4)).collect::<Vec<_>>()
        ),
    });

    residual_csv(&eps, &residual_norms).write(&out.join("residual.csv"))?;
    errors_csv(&errors).write(&out.join("errors.csv"))?;
    eoc_csv(&eoc_report, Some(&residual_fit)).write(&out.join("eoc.csv"))?;
    spectral_csv(&spectral).write(&out.join("spectral.csv"))?;

    Ok(StudyOutcome { eps, residual_norms, residual_fit, errors, max_abs, eoc: eoc_report, spectral, criteria })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartic_profile_summary() {
        let cfg = StudyConfig::default();
        let s = profile_summary(&build_profile(&cfg).unwrap());
        assert!((s.sigma - 2.0 * 2f64.sqrt() / 3.0).abs() < 1e-8, "{s:?}");
        assert!(s.passed(), "{s:?}");
        // 1 − tanh(ρ/√2) ≈ 2 e^{−√2 ρ}
        assert!((s.decay_constant - 2.0).abs() < 0.05, "{s:?}");
    }

    #[test]
    fn growth_ratio_rules() {
        let env = [(0.1, 2.0), (0.05, 2.2), (0.025, 2.3)];
        assert!(spectral_growth_ratio(&env, 0.1) <= 1.0);
        assert!(spectral_growth_ratio(&[(0.1, 2.0), (0.05, 2.5)], 0.1) > 1.0);
        assert_eq!(spectral_growth_ratio(&[(0.1, 0.0), (0.05, 0.0)], 0.1), 0.0);
        assert!(spectral_growth_ratio(&[(0.1, 0.0), (0.05, 1e-3)], 0.1).is_infinite());
    }

    #[test]
    fn too_few_eps_is_degenerate() {
        let mut cfg = StudyConfig::default();
        cfg.study.eps = vec![0.1];
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(run_study(&cfg, dir.path()), Err(Error::DegenerateFit(_))));
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn envelope_takes_worst_time() {
        let r = |eps, t, l| SpectralReport { eps, t, lambda_min: l, iterations: 1, residual: 0.0 };
        let env = spectral_envelope(&[r(0.1, 0.0, -1.0), r(0.1, 0.1, -3.0), r(0.05, 0.0, 4.0)]);
        assert_eq!(env, vec![(0.1, 3.0), (0.05, 0.0)]);
    }
}
