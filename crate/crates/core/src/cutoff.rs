//! Smooth cutoff in the signed distance: 1 on `[-δ, δ]`, 0 off `[-2δ, 2δ]`.

/// `e^{-1/x}` for `x > 0`, else 0.
fn bump(x: f64) -> f64 {
    if x > 0.0 { (-1.0 / x).exp() } else { 0.0 }
}

fn bump_prime(x: f64) -> f64 {
    if x > 0.0 { bump(x) / (x * x) } else { 0.0 }
}

/// C∞ step from 0 at `x <= 0` to 1 at `x >= 1`.
fn smoothstep(x: f64) -> f64 {
    let (a, b) = (bump(x), bump(1.0 - x));
    if a + b == 0.0 { 0.0 } else { a / (a + b) }
}

fn smoothstep_prime(x: f64) -> f64 {
    let (a, b) = (bump(x), bump(1.0 - x));
    let (da, db) = (bump_prime(x), -bump_prime(1.0 - x));
    let den = a + b;
    if den == 0.0 { 0.0 } else { (da * den - a * (da + db)) / (den * den) }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    pub delta: f64,
}

impl Cutoff {
    pub fn new(delta: f64) -> Self {
        Self { delta }
    }

    pub fn value(&self, r: f64) -> f64 {
        smoothstep(2.0 - r.abs() / self.delta)
    }

    pub fn derivative(&self, r: f64) -> f64 {
        -r.signum() / self.delta * smoothstep_prime(2.0 - r.abs() / self.delta)
    }

    /// Largest `-r ζ'(r)` and smallest value of the same quantity over `n`
    /// samples of `[-3δ, 3δ]`.
    pub fn slope_extrema(&self, n: usize) -> (f64, f64) {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..=n {
            let r = -3.0 * self.delta + 6.0 * self.delta * i as f64 / n as f64;
            let q = -r * self.derivative(r);
            lo = lo.min(q);
            hi = hi.max(q);
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_support_and_slope() {
        let z = Cutoff::new(0.05);
        for i in 0..=1000 {
            let r = -0.15 + 0.3 * i as f64 / 1000.0;
            let v = z.value(r);
            if r.abs() <= 0.05 {
                assert_eq!(v, 1.0);
            }
            if r.abs() >= 0.1 {
                assert_eq!(v, 0.0);
            }
            assert!((0.0..=1.0).contains(&v));
        }
        let (lo, hi) = z.slope_extrema(20000);
        assert!(lo >= 0.0 && hi <= 4.0, "{lo} {hi}");
    }

    #[test]
    fn derivative_matches_differences() {
        let z = Cutoff::new(0.05);
        let h = 1e-7;
        for r in [-0.09, -0.07, 0.06, 0.075, 0.099] {
            let fd = (z.value(r + h) - z.value(r - h)) / (2.0 * h);
            assert!((fd - z.derivative(r)).abs() < 1e-5 * (1.0 + fd.abs()));
        }
    }
}
