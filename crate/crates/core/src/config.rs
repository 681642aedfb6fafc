//! Study configuration, read from TOML with every field defaulted.

use serde::{Deserialize, Serialize};

use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::expansion::ExpansionConfig;
use crate::potential::Potential;
use crate::velocity::{Point, VelocityField};

/// Minimum grid rule: cells per `ε`.
pub const MIN_CELLS_PER_EPS: f64 = 8.0;
/// Largest admissible `ε`.
pub const MAX_EPS: f64 = 0.2;

/// Initial interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveSpec {
    Circle { center: Point, radius: f64 },
    Ellipse { center: Point, a: f64, b: f64 },
    /// `z(s) = Σ c_k e^{2πiks}` with entries `[k, Re c_k, Im c_k]`.
    Fourier { modes: Vec<[f64; 3]> },
}

impl CurveSpec {
    pub fn build(&self, markers: usize) -> Result<Curve> {
        match self {
            CurveSpec::Circle { center, radius } => Curve::circle(*center, *radius, markers),
            CurveSpec::Ellipse { center, a, b } => Curve::ellipse(*center, *a, *b, markers),
            CurveSpec::Fourier { modes } => {
                for m in modes {
                    if m[0].fract() != 0.0 || m[0].abs() as usize >= markers / 2 {
                        return Err(Error::InvalidConfig(format!(
                            "Fourier mode {} is not an integer below {}",
                            m[0],
                            markers / 2
                        )));
                    }
                }
                Curve::from_fn(0.0, markers, |s| {
                    let (mut x, mut y) = (0.0, 0.0);
                    for &[k, re, im] in modes {
                        let (sn, cs) = (2.0 * std::f64::consts::PI * k * s).sin_cos();
                        x += re * cs - im * sn;
                        y += re * sn + im * cs;
                    }
                    [x, y]
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    /// Side length of the square domain; only the unit square is supported.
    pub domain_size: f64,
    pub markers: usize,
    pub curve: CurveSpec,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { domain_size: 1.0, markers: 128, curve: CurveSpec::Circle { center: [0.5, 0.5], radius: 0.25 } }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    pub potential: Potential,
    /// Truncation `L` of the `ρ`-line `[-L, L]`.
    pub half_width: f64,
    pub step: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self { potential: Potential::default(), half_width: 40.0, step: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResidualConfig {
    pub cells_per_eps: f64,
    /// Trapezoid intervals of the time integral.
    pub time_nodes: usize,
    /// Time-difference step as a fraction of `ε h`.
    pub dt_factor: f64,
}

impl Default for ResidualConfig {
    fn default() -> Self {
        Self { cells_per_eps: 8.0, time_nodes: 64, dt_factor: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeConfig {
    pub cells_per_eps: f64,
    /// Step as a fraction of the largest admissible one.
    pub dt_factor: f64,
    pub cfl: f64,
    /// Snapshot intervals over `[0, T0]`.
    pub snapshots: usize,
    pub perturbation_amp: f64,
}

impl Default for PdeConfig {
    fn default() -> Self {
        Self { cells_per_eps: 8.0, dt_factor: 1.0, cfl: 0.5, snapshots: 50, perturbation_amp: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    pub cells_per_eps: f64,
    /// Evaluation times as fractions of `T0`.
    pub time_fractions: Vec<f64>,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self { cells_per_eps: 8.0, time_fractions: vec![0.0, 0.5, 1.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySettings {
    pub eps: Vec<f64>,
    pub out_dir: String,
    /// Smallest acceptable fitted order of every measured norm.
    pub min_order: f64,
    /// Largest growth of `−λ_min` per halving of `ε`.
    pub max_spectral_growth: f64,
    /// Every how many expansion slices the table dumps are written.
    pub dump_every: usize,
    /// `|ρ|` range of the corrector dumps.
    pub dump_rho: f64,
}

impl Default for StudySettings {
    fn default() -> Self {
        Self {
            eps: vec![0.12, 0.08, 0.0533, 0.0356],
            out_dir: "out".into(),
            min_order: 2.2,
            max_spectral_growth: 0.1,
            dump_every: 25,
            dump_rho: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub geometry: GeometryConfig,
    pub velocity: VelocityField,
    pub profile: ProfileConfig,
    pub expansion: ExpansionConfig,
    pub residual: ResidualConfig,
    pub pde: PdeConfig,
    pub spectral: SpectralConfig,
    pub study: StudySettings,
}

impl StudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Static checks; the curve clearance is checked when the expansion is
    /// built.
    pub fn validate(&self) -> Result<()> {
        if self.geometry.domain_size != 1.0 {
            return Err(Error::InvalidConfig("only the unit square domain is supported".into()));
        }
        validate_eps_list(&self.study.eps)?;
        let cells = [self.residual.cells_per_eps, self.pde.cells_per_eps, self.spectral.cells_per_eps];
        if let Some(c) = cells.iter().find(|c| !(**c >= MIN_CELLS_PER_EPS)) {
            let eps = self.study.eps.iter().cloned().fold(f64::INFINITY, f64::min);
            return Err(Error::ResolutionInsufficient { h: eps / c, limit: eps / MIN_CELLS_PER_EPS });
        }
        if !(self.pde.dt_factor > 0.0 && self.pde.dt_factor <= 1.0) {
            return Err(Error::InvalidConfig("pde.dt_factor must lie in (0, 1]".into()));
        }
        if !(self.residual.dt_factor > 0.0 && self.residual.dt_factor <= 1.0) {
            return Err(Error::InvalidConfig("residual.dt_factor must lie in (0, 1]".into()));
        }
        if !(self.pde.perturbation_amp >= 0.0) {
            return Err(Error::InvalidConfig("pde.perturbation_amp must be non-negative".into()));
        }
        if self.spectral.time_fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::InvalidConfig("spectral.time_fractions must lie in [0, 1]".into()));
        }
        self.profile.potential.validate()?;
        Ok(())
    }
}

/// An `ε` list must be a geometric sequence inside `(0, 0.2]`. Single entries
/// pass; fits reject them later.
pub fn validate_eps_list(eps: &[f64]) -> Result<()> {
    if eps.is_empty() {
        return Err(Error::InvalidConfig("eps list is empty".into()));
    }
    if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && **e <= MAX_EPS)) {
        return Err(Error::InvalidConfig(format!("eps = {e} outside (0, {MAX_EPS}]")));
    }
    if eps.len() >= 2 {
        let ratios: Vec<f64> = eps.windows(2).map(|w| w[0] / w[1]).collect();
        let r0 = ratios[0];
        if r0 <= 1.0 || ratios.iter().any(|r| (r / r0 - 1.0).abs() > 0.01) {
            return Err(Error::InvalidConfig(format!("eps list {eps:?} is not a decreasing geometric sequence")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = StudyConfig::default();
        let back = StudyConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, back);
        cfg.validate().unwrap();
    }

    #[test]
    fn partial_files_keep_defaults() {
        let cfg = StudyConfig::from_toml("[study]\neps = [0.1, 0.05, 0.025]\n[velocity]\nname = \"zero\"\n").unwrap();
        assert_eq!(cfg.velocity, VelocityField::Zero);
        assert_eq!(cfg.expansion.delta, 0.05);
        assert!(StudyConfig::from_toml("[study]\nepss = [0.1]\n").is_err());
    }

    #[test]
    fn rejects_bad_lists_and_grids() {
        assert!(validate_eps_list(&[0.3]).is_err());
        assert!(validate_eps_list(&[0.1, 0.05, 0.03]).is_err());
        validate_eps_list(&[0.12, 0.08, 0.0533, 0.0356]).unwrap();
        let mut cfg = StudyConfig::default();
        cfg.pde.cells_per_eps = 4.0;
        assert!(matches!(cfg.validate(), Err(Error::ResolutionInsufficient { .. })));
    }

    #[test]
    fn fourier_curve_is_a_circle() {
        let spec = CurveSpec::Fourier { modes: vec![[0.0, 0.5, 0.5], [1.0, 0.25, 0.0]] };
        let c = spec.build(64).unwrap();
        assert!((c.area() - std::f64::consts::PI / 16.0).abs() < 1e-12);
    }
}
