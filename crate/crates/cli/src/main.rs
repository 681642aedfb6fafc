use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use convac::config::{validate_eps_list, StudyConfig};
use convac::io::{write_atomic, write_expansion, write_snapshots};
use convac::metrics::{eoc, fit_order};
use convac::study::{self, MAX_ABS_BOUND};

const EXIT_FAIL: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "convac", version, about = "Approximate solutions and convergence studies for the convective Allen-Cahn equation")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `study.out_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated eps list replacing `study.eps`.
    #[arg(long, global = true, value_delimiter = ',')]
    eps_override: Option<Vec<f64>>,
    /// Worker threads for the grid sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimal profile table and its checks.
    Profile,
    /// Expansion tables (h1, h2, kappa1, kappa2, b, g, c1, c2) and curves.
    Expansion,
    /// Residual of the approximate solution and its fitted order.
    Residual,
    /// Solver runs from well-prepared data with error norms.
    Solve,
    /// Smallest eigenvalue of the linearized operator.
    Spectrum,
    /// Every stage plus the acceptance verdicts.
    Study,
    /// Prints the effective configuration as TOML.
    PrintConfig,
}

/// Errors that map to the usage exit code.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn load(common: &Common) -> Result<(StudyConfig, PathBuf)> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Usage(format!("cannot read config {}: {e}", path.display())))?;
            StudyConfig::from_toml(&text).map_err(|e| Usage(e.to_string()))?
        }
        None => StudyConfig::default(),
    };
    if let Some(eps) = &common.eps_override {
        validate_eps_list(eps).map_err(|e| Usage(e.to_string()))?;
        cfg.study.eps = eps.clone();
    }
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.study.out_dir));
    Ok((cfg, out))
}

fn verdict(ok: bool) -> bool {
    println!("{}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn cmd_profile(cfg: &StudyConfig, out: &Path) -> Result<bool> {
    let p = study::build_profile(cfg)?;
    let s = study::profile_summary(&p);
    study::profile_csv(&p).write(&out.join("profile.csv"))?;
    println!("sigma = {:.9}", s.sigma);
    println!("ode_residual = {:.3e} (tolerance {:.0e})", s.ode_residual, study::PROFILE_ODE_TOL);
    println!("theta0(0) = {:.3e}", s.theta0_at_zero);
    println!("decay_constant = {:.6}", s.decay_constant);
    println!("monotone = {}", s.monotone);
    Ok(verdict(s.passed()))
}

fn cmd_expansion(cfg: &StudyConfig, out: &Path) -> Result<bool> {
    let data = study::build_expansion(cfg)?;
    write_expansion(&out.join("expansion"), &data, cfg.study.dump_every, cfg.study.dump_rho)?;
    println!("slices = {}, dt = {}, horizon = {}", data.slices.len(), data.dt, data.horizon());
    Ok(true)
}

fn cmd_residual(cfg: &StudyConfig, out: &Path) -> Result<bool> {
    cfg.validate()?;
    let data = study::build_expansion(cfg)?;
    let eps = &cfg.study.eps;
    let mut norms = Vec::with_capacity(eps.len());
    for &e in eps {
        let r = study::residual_case(&data, cfg, e)?;
        println!("eps = {e}: n = {}, ||S|| = {:.6e}", r.grid.n, r.norm);
        norms.push(r.norm);
    }
    let fit = fit_order(eps, &norms)?;
    study::residual_csv(eps, &norms).write(&out.join("residual.csv"))?;
    println!("fitted order = {:.4}, pairwise = {:?}", fit.slope, fit.pairwise);
    Ok(verdict(fit.slope >= cfg.study.min_order))
}

fn cmd_solve(cfg: &StudyConfig, out: &Path) -> Result<bool> {
    cfg.validate()?;
    let data = study::build_expansion(cfg)?;
    let mut reports = Vec::new();
    let mut ok = true;
    for &e in &cfg.study.eps {
        let (traj, report) = study::solve_case(&data, cfg, e)?;
        write_snapshots(&out.join(format!("solve_eps_{e}")), &traj.snapshots)?;
        let energies: String = traj.energies.iter().map(|x| format!("{x}\n")).collect();
        write_atomic(&out.join(format!("solve_eps_{e}/energy.csv")), &format!("energy\n{energies}"))?;
        println!("eps = {e}: steps = {}, max|c| = {:.5}, norms = {:?}", traj.steps, traj.max_abs, report.values());
        ok &= traj.max_abs <= MAX_ABS_BOUND;
        reports.push(report);
    }
    study::errors_csv(&reports).write(&out.join("errors.csv"))?;
    if reports.len() >= 3 {
        let fits = eoc(&reports)?;
        study::eoc_csv(&fits, None).write(&out.join("eoc.csv"))?;
        for (name, f) in &fits.fits {
            println!("{name}: order {:.4}", f.slope);
        }
    }
    Ok(verdict(ok))
}

fn cmd_spectrum(cfg: &StudyConfig, out: &Path) -> Result<bool> {
    cfg.validate()?;
    let data = study::build_expansion(cfg)?;
    let mut reports = Vec::new();
    for &e in &cfg.study.eps {
        for r in study::spectral_case(&data, cfg, e)? {
            println!("eps = {e}, t = {}: lambda_min = {:.6} ({} steps)", r.t, r.lambda_min, r.iterations);
            reports.push(r);
        }
    }
    study::spectral_csv(&reports).write(&out.join("spectral.csv"))?;
    let env = study::spectral_envelope(&reports);
    let ratio = study::spectral_growth_ratio(&env, cfg.study.max_spectral_growth);
    let c_l = env.iter().map(|(_, c)| *c).fold(0.0, f64::max);
    println!("C_L = {c_l:.6}, worst growth/allowance = {ratio:.3}");
    Ok(verdict(ratio <= 1.0))
}

fn cmd_study(cfg: &StudyConfig, out: &Path) -> Result<bool> {
    let outcome = study::run_study(cfg, out)?;
    for c in &outcome.criteria {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(c) = outcome.first_failure() {
        eprintln!("first failing criterion: {}", c.name);
        return Ok(false);
    }
    Ok(true)
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Usage(format!("cannot start {n} threads: {e}")))?;
    }
    let (cfg, out) = load(&cli.common)?;
    match cli.command {
        Command::PrintConfig => {
            print!("{}", cfg.to_toml());
            Ok(true)
        }
        Command::Profile => cmd_profile(&cfg, &out),
        Command::Expansion => cmd_expansion(&cfg, &out),
        Command::Residual => cmd_residual(&cfg, &out),
        Command::Solve => cmd_solve(&cfg, &out),
        Command::Spectrum => cmd_spectrum(&cfg, &out),
        Command::Study => cmd_study(&cfg, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(EXIT_FAIL)
            }
        }
    }
}
