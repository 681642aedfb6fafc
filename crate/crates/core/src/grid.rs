//! Uniform node grid on the unit square.

use rayon::prelude::*;

use crate::velocity::Point;

/// `n` cells per side; nodes `(i h, j h)` for `i, j = 0..=n`, stored row by
/// row (`j` outer).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Self {
        assert!(n >= 4, "grid needs at least 4 cells");
        Self { n }
    }

    /// Smallest grid with at least `cells_per_eps / eps` cells per side.
    pub fn for_eps(eps: f64, cells_per_eps: f64) -> Self {
        Self::new(((cells_per_eps / eps) - 1e-9).ceil().max(4.0) as usize)
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Nodes per side.
    pub fn side(&self) -> usize {
        self.n + 1
    }

    pub fn len(&self) -> usize {
        self.side() * self.side()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.side() + i
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize) -> Point {
        [i as f64 * self.h(), j as f64 * self.h()]
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.n || j == self.n
    }

    /// Trapezoid quadrature weight of node `(i, j)`.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let edge = |k: usize| if k == 0 || k == self.n { 0.5 } else { 1.0 };
        edge(i) * edge(j) * self.h() * self.h()
    }

    /// Discrete `L²(Ω)` norm of node values, trapezoid rule.
    pub fn l2(&self, values: &[f64]) -> f64 {
        self.weighted_sum(|i, j| values[self.index(i, j)].powi(2)).sqrt()
    }

    /// `Σ w_ij g(i, j)` with trapezoid weights, summed row by row in a fixed
    /// order.
    pub fn weighted_sum<G>(&self, g: G) -> f64
    where
        G: Fn(usize, usize) -> f64 + Sync,
    {
        let rows: Vec<f64> = (0..self.side())
            .into_par_iter()
            .map(|j| (0..self.side()).map(|i| self.weight(i, j) * g(i, j)).sum())
            .collect();
        rows.iter().sum()
    }

    /// Samples `f` at every node, rows in parallel.
    pub fn sample<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(Point) -> f64 + Sync,
    {
        self.sample_with_halo(0, f)
    }

    /// Samples `f` on the nodes extended by `halo` layers on every side;
    /// the result has `(n + 1 + 2 halo)²` entries.
    pub fn sample_with_halo<F>(&self, halo: usize, f: F) -> Vec<f64>
    where
        F: Fn(Point) -> f64 + Sync,
    {
        let w = self.side() + 2 * halo;
        let h = self.h();
        let mut out = vec![0.0; w * w];
        out.par_chunks_mut(w).enumerate().for_each(|(b, row)| {
            let y = (b as f64 - halo as f64) * h;
            for (a, o) in row.iter_mut().enumerate() {
                *o = f([(a as f64 - halo as f64) * h, y]);
            }
        });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_norms() {
        let g = Grid::new(50);
        assert!((g.l2(&vec![3.0; g.len()]) - 3.0).abs() < 1e-12);
        let v = g.sample(|x| (std::f64::consts::PI * x[0]).sin() * (std::f64::consts::PI * x[1]).sin());
        assert!((g.l2(&v) - 0.5).abs() < 1e-10);
        assert_eq!(Grid::for_eps(0.1, 8.0).n, 80);
    }
}
