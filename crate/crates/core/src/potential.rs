//! Even double-well potentials with wells at ±1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Double-well potential `f` together with its first three derivatives.
///
/// * `Quartic { scale }`: `f(c) = scale * (1 - c^2)^2 / 4`
/// * `Sextic { beta }`: `f(c) = (1 - c^2)^2 (1 + beta c^2) / 4`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Potential {
    Quartic { scale: f64 },
    Sextic { beta: f64 },
}

impl Default for Potential {
    fn default() -> Self {
        Potential::Quartic { scale: 1.0 }
    }
}

impl Potential {
    pub fn quartic() -> Self {
        Self::default()
    }

    pub fn f(&self, c: f64) -> f64 {
        let w = 1.0 - c * c;
        match *self {
            Potential::Quartic { scale } => scale * w * w / 4.0,
            Potential::Sextic { beta } => w * w * (1.0 + beta * c * c) / 4.0,
        }
    }

    pub fn df(&self, c: f64) -> f64 {
        match *self {
            Potential::Quartic { scale } => scale * (c * c * c - c),
            Potential::Sextic { beta } => {
                // d/dc [(1 - c^2)^2 (1 + b c^2) / 4]
                let w = 1.0 - c * c;
                (-4.0 * c * w * (1.0 + beta * c * c) + w * w * 2.0 * beta * c) / 4.0
            }
        }
    }

    pub fn d2f(&self, c: f64) -> f64 {
        match *self {
            Potential::Quartic { scale } => scale * (3.0 * c * c - 1.0),
            Potential::Sextic { beta } => {
                // expanded: f = (1 + (b-2) c^2 + (1-2b) c^4 + b c^6) / 4
                let c2 = c * c;
                (2.0 * (beta - 2.0) + 12.0 * (1.0 - 2.0 * beta) * c2 + 30.0 * beta * c2 * c2) / 4.0
            }
        }
    }

    pub fn d3f(&self, c: f64) -> f64 {
        match *self {
            Potential::Quartic { scale } => scale * 6.0 * c,
            Potential::Sextic { beta } => {
                (24.0 * (1.0 - 2.0 * beta) * c + 120.0 * beta * c * c * c) / 4.0
            }
        }
    }

    /// Decay rate of the optimal profile, `min(sqrt f''(-1), sqrt f''(1))`.
    pub fn alpha(&self) -> f64 {
        self.d2f(-1.0).sqrt().min(self.d2f(1.0).sqrt())
    }

    /// Largest `|f''|` on `[-bound, bound]`, by dense sampling.
    pub fn max_abs_d2f(&self, bound: f64) -> f64 {
        let n = 2000;
        (0..=n)
            .map(|i| self.d2f(-bound + 2.0 * bound * i as f64 / n as f64).abs())
            .fold(0.0, f64::max)
    }

    /// Checks the standing assumptions: `f'(±1) = 0`, `f''(±1) > 0`,
    /// `f(c) = f(-c) > 0` on `(-1, 1)` (sampled).
    pub fn validate(&self) -> Result<()> {
        for w in [-1.0, 1.0] {
            if self.df(w).abs() > 1e-12 {
                return Err(Error::PotentialInvalid(format!("f'({w}) = {} != 0", self.df(w))));
            }
            let k = self.d2f(w);
            if !(k > 0.0) || !k.is_finite() {
                return Err(Error::PotentialInvalid(format!("f''({w}) = {k} is not positive")));
            }
        }
        let n = 1000;
        for i in 1..n {
            let c = -1.0 + 2.0 * i as f64 / n as f64;
            let (fp, fm) = (self.f(c), self.f(-c));
            if !(fp > 0.0) {
                return Err(Error::PotentialInvalid(format!("f({c}) = {fp} is not positive")));
            }
            if (fp - fm).abs() > 1e-14 * (1.0 + fp.abs()) {
                return Err(Error::PotentialInvalid(format!("f is not even at c = {c}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(p: Potential) {
        let h = 1e-5;
        for i in 0..=20 {
            let c = -1.2 + 0.12 * i as f64;
            let d1 = (p.f(c + h) - p.f(c - h)) / (2.0 * h);
            let d2 = (p.df(c + h) - p.df(c - h)) / (2.0 * h);
            let d3 = (p.d2f(c + h) - p.d2f(c - h)) / (2.0 * h);
            assert!((d1 - p.df(c)).abs() < 1e-8, "f' at {c}");
            assert!((d2 - p.d2f(c)).abs() < 1e-8, "f'' at {c}");
            assert!((d3 - p.d3f(c)).abs() < 1e-7, "f''' at {c}");
        }
    }

    #[test]
    fn derivatives_are_consistent() {
        fd_check(Potential::quartic());
        fd_check(Potential::Quartic { scale: 2.5 });
        fd_check(Potential::Sextic { beta: 0.7 });
    }

    #[test]
    fn quartic_wells() {
        let p = Potential::quartic();
        p.validate().unwrap();
        assert_eq!(p.d2f(1.0), 2.0);
        assert!((p.alpha() - 2f64.sqrt()).abs() < 1e-15);
        assert!((p.max_abs_d2f(1.2) - 3.32).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_wells() {
        assert!(matches!(
            Potential::Quartic { scale: -1.0 }.validate(),
            Err(Error::PotentialInvalid(_))
        ));
        assert!(matches!(
            Potential::Quartic { scale: 0.0 }.validate(),
            Err(Error::PotentialInvalid(_))
        ));
        // beta <= -1 makes f vanish inside (-1, 1)
        assert!(Potential::Sextic { beta: -1.5 }.validate().is_err());
        Potential::Sextic { beta: 0.5 }.validate().unwrap();
    }
}
