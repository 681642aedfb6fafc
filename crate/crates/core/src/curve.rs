//! Closed plane curves as trigonometric interpolants over `T¹ = [0, 1)`.
//!
//! Orientation is counterclockwise; `n` is `τ` rotated by +90° and points into
//! the enclosed region, where the signed distance is positive. Curvature is
//! signed with respect to `n`, so a circle of radius `R` has curvature `1/R`.

use rustfft::num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::periodic;
use crate::velocity::{Point, VelocityField};

/// Markers closer than this (relative to the curve size) count as degenerate.
const SPEED_TOL: f64 = 1e-10;
/// Closest-point condition tolerance, relative to `|∂_s X0|`.
const PROJECTION_TOL: f64 = 1e-12;
/// Spacing ratio that triggers redistribution to arclength.
const SPACING_RATIO_LIMIT: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub t: f64,
    markers: Vec<Point>,
    hat: Vec<Complex64>,
    /// Parameter in the input curve of each marker, set when `evolve` had to
    /// redistribute markers. `None` means the labels are unchanged.
    pub relabel: Option<Vec<f64>>,
}

/// Position and first three parametric derivatives at one parameter value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveJet {
    pub x: Point,
    pub d1: [f64; 2],
    pub d2: [f64; 2],
    pub d3: [f64; 2],
}

impl CurveJet {
    pub fn speed(&self) -> f64 {
        self.d1[0].hypot(self.d1[1])
    }

    pub fn tangent(&self) -> [f64; 2] {
        let sp = self.speed();
        [self.d1[0] / sp, self.d1[1] / sp]
    }

    pub fn normal(&self) -> [f64; 2] {
        let t = self.tangent();
        [-t[1], t[0]]
    }

    pub fn curvature(&self) -> f64 {
        cross(self.d1, self.d2) / self.speed().powi(3)
    }

    /// `∂_s |∂_s X0|`
    pub fn speed_derivative(&self) -> f64 {
        dot(self.d1, self.d2) / self.speed()
    }

    /// `∂_s` of the curvature.
    pub fn curvature_derivative(&self) -> f64 {
        let sp = self.speed();
        cross(self.d1, self.d3) / sp.powi(3) - 3.0 * self.curvature() * dot(self.d1, self.d2) / (sp * sp)
    }
}

/// Tubular coordinates of a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TubularPoint {
    /// Signed distance, positive inside.
    pub r: f64,
    /// Parameter of the closest point.
    pub s: f64,
    pub inside_tube: bool,
}

/// Derivatives of the parameter coordinate `S(x, t)` at chart point `(r, s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartDerivatives {
    pub grad_s: [f64; 2],
    pub lap_s: f64,
    pub dt_s: f64,
    /// `Δd` at the same point, `-H / (1 - r H)`.
    pub lap_d: f64,
}

#[inline]
pub(crate) fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

impl Curve {
    /// Builds a curve from ordered, counterclockwise markers at `s_j = j / M`.
    pub fn from_markers(t: f64, markers: Vec<Point>) -> Result<Self> {
        let m = markers.len();
        if m < 8 || !m.is_multiple_of(2) {
            return Err(Error::CurveDegenerate(format!("need an even marker count >= 8, got {m}")));
        }
        if markers.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::CurveDegenerate("non-finite marker".into()));
        }
        let z: Vec<Complex64> = markers.iter().map(|p| Complex64::new(p[0], p[1])).collect();
        let hat = periodic::dft(&z);
        let curve = Curve { t, markers, hat, relabel: None };
        curve.check_regular()?;
        if curve.area() <= 0.0 {
            return Err(Error::CurveDegenerate("curve is not positively oriented".into()));
        }
        Ok(curve)
    }

    pub fn from_fn(t: f64, m: usize, f: impl Fn(f64) -> Point) -> Result<Self> {
        Self::from_markers(t, (0..m).map(|j| f(j as f64 / m as f64)).collect())
    }

    pub fn circle(center: Point, radius: f64, m: usize) -> Result<Self> {
        Self::ellipse(center, radius, radius, m)
    }

    /// Ellipse with semi-axes `a` along x and `b` along y, starting at `(c_x + a, c_y)`.
    pub fn ellipse(center: Point, a: f64, b: f64, m: usize) -> Result<Self> {
        Self::from_fn(0.0, m, |s| {
            let (sn, cs) = (2.0 * PI * s).sin_cos();
            [center[0] + a * cs, center[1] + b * sn]
        })
    }

    pub fn markers(&self) -> &[Point] {
        &self.markers
    }

    pub fn len(&self) -> usize {
        self.markers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.markers.is_empty()
    }

    /// Highest retained Fourier mode.
    pub fn max_mode(&self) -> usize {
        self.markers.len() / 2
    }

    pub fn parameter(&self, j: usize) -> f64 {
        j as f64 / self.markers.len() as f64
    }

    pub fn jet(&self, s: f64) -> CurveJet {
        let m = self.hat.len();
        let half = m / 2;
        let w = Complex64::from_polar(1.0, 2.0 * PI * s);
        let mut p = Complex64::new(1.0, 0.0);
        let mut z = [self.hat[0], Complex64::default(), Complex64::default(), Complex64::default()];
        for k in 1..half {
            p *= w;
            let a = self.hat[k] * p;
            let b = self.hat[m - k] * p.conj();
            let om = 2.0 * PI * k as f64;
            let (sum, diff) = (a + b, a - b);
            z[0] += sum;
            z[1] += Complex64::new(0.0, om) * diff;
            z[2] -= om * om * sum;
            z[3] -= Complex64::new(0.0, om * om * om) * diff;
        }
        // Nyquist mode, split symmetrically: c cos(π M s)
        let c = self.hat[half];
        let om = PI * m as f64;
        let (sn, cs) = (om * s).sin_cos();
        z[0] += c * cs;
        z[1] -= c * (om * sn);
        z[2] -= c * (om * om * cs);
        z[3] += c * (om * om * om * sn);
        let pt = |c: Complex64| [c.re, c.im];
        CurveJet { x: pt(z[0]), d1: pt(z[1]), d2: pt(z[2]), d3: pt(z[3]) }
    }

    pub fn point(&self, s: f64) -> Point {
        self.jet(s).x
    }

    fn check_regular(&self) -> Result<()> {
        let scale = self.diameter().max(f64::MIN_POSITIVE);
        for j in 0..self.len() {
            let s = self.parameter(j);
            let sp = self.jet(s).speed();
            if !(sp > SPEED_TOL * scale) {
                return Err(Error::CurveDegenerate(format!("|X0'| = {sp:.3e} at s = {s:.6}")));
            }
        }
        Ok(())
    }

    fn diameter(&self) -> f64 {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &self.markers {
            for i in 0..2 {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        (hi[0] - lo[0]).hypot(hi[1] - lo[1])
    }

    fn regular_jet(&self, s: f64) -> Result<CurveJet> {
        let j = self.jet(s);
        if !(j.speed() > SPEED_TOL * self.diameter()) {
            return Err(Error::CurveDegenerate(format!("|X0'| = {:.3e} at s = {s:.6}", j.speed())));
        }
        Ok(j)
    }

    pub fn tangent_normal(&self, s: f64) -> Result<([f64; 2], [f64; 2])> {
        let j = self.regular_jet(s)?;
        Ok((j.tangent(), j.normal()))
    }

    pub fn curvature(&self, s: f64) -> Result<f64> {
        Ok(self.regular_jet(s)?.curvature())
    }

    pub fn normal_velocity(&self, v: &VelocityField, s: f64) -> Result<f64> {
        let j = self.regular_jet(s)?;
        Ok(dot(j.normal(), v.velocity(j.x)))
    }

    /// Enclosed area from the Fourier coefficients, `π Σ k |c_k|²`.
    pub fn area(&self) -> f64 {
        let m = self.hat.len();
        let mut a = 0.0;
        for k in 1..m / 2 {
            a += k as f64 * (self.hat[k].norm_sqr() - self.hat[m - k].norm_sqr());
        }
        PI * a
    }

    /// Shoelace area of the marker polygon.
    pub fn polygon_area(&self) -> f64 {
        let m = self.len();
        (0..m).map(|j| cross(self.markers[j], self.markers[(j + 1) % m])).sum::<f64>() / 2.0
    }

    /// Total length, by the trapezoid rule on `4M` samples of `|∂_s X0|`.
    pub fn length(&self) -> f64 {
        let n = 4 * self.len();
        (0..n).map(|j| self.jet(j as f64 / n as f64).speed()).sum::<f64>() / n as f64
    }

    /// Ratio of the longest to the shortest marker spacing.
    pub fn spacing_ratio(&self) -> f64 {
        spacing_ratio(&self.markers)
    }

    /// Winding-number test against the marker polygon.
    pub fn contains(&self, x: Point) -> bool {
        let m = self.len();
        let mut wn = 0i32;
        for j in 0..m {
            let a = self.markers[j];
            let b = self.markers[(j + 1) % m];
            let side = cross([b[0] - a[0], b[1] - a[1]], [x[0] - a[0], x[1] - a[1]]);
            if a[1] <= x[1] {
                if b[1] > x[1] && side > 0.0 {
                    wn += 1;
                }
            } else if b[1] <= x[1] && side < 0.0 {
                wn -= 1;
            }
        }
        wn != 0
    }

    /// `+1` inside, `-1` outside.
    pub fn side(&self, x: Point) -> f64 {
        if self.contains(x) { 1.0 } else { -1.0 }
    }

    fn nearest_marker(&self, x: Point) -> usize {
        let mut best = (0, f64::INFINITY);
        for (j, p) in self.markers.iter().enumerate() {
            let d = (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2);
            if d < best.1 {
                best = (j, d);
            }
        }
        best.0
    }

    /// Closest-point parameter by safeguarded Newton on
    /// `φ(s) = (X0(s) - x)·∂_s X0(s) = 0`, bracketed around the nearest marker.
    fn project(&self, x: Point) -> (f64, CurveJet) {
        self.project_from(x, self.nearest_marker(x))
    }

    fn project_from(&self, x: Point, j0: usize) -> (f64, CurveJet) {
        let m = self.len() as f64;
        let s0 = j0 as f64 / m;
        let phi = |s: f64| -> (f64, f64, CurveJet) {
            let j = self.jet(s);
            let d = [j.x[0] - x[0], j.x[1] - x[1]];
            (dot(d, j.d1), dot(j.d1, j.d1) + dot(d, j.d2), j)
        };
        let (mut lo, mut hi) = (s0 - 1.5 / m, s0 + 1.5 / m);
        let (flo, _, _) = phi(lo);
        let (fhi, _, _) = phi(hi);
        let bracketed = flo < 0.0 && fhi > 0.0;
        let mut s = s0;
        let (mut f, mut df, mut jet) = phi(s);
        for _ in 0..100 {
            if f.abs() <= PROJECTION_TOL * jet.speed().powi(2) * (1.0 + self.diameter()) {
                break;
            }
            if bracketed {
                if f < 0.0 { lo = s } else { hi = s }
            }
            let mut next = s - f / df;
            if bracketed && !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - s).abs() < 1e-16 {
                s = next;
                break;
            }
            s = next;
            (f, df, jet) = phi(s);
        }
        let (_, _, jet) = phi(s);
        (s.rem_euclid(1.0), jet)
    }

    /// Signed distance and closest-point parameter of `x`. Points at distance
    /// `tube` or more are rejected; use [`Curve::side`] for those.
    pub fn signed_distance(&self, x: Point, tube: f64) -> Result<TubularPoint> {
        self.finish_projection(x, self.project(x), tube)
    }

    fn finish_projection(&self, x: Point, (s, jet): (f64, CurveJet), tube: f64) -> Result<TubularPoint> {
        let n = jet.normal();
        let r = dot([x[0] - jet.x[0], x[1] - jet.x[1]], n);
        if r.abs() >= tube {
            return Err(Error::ProjectionAmbiguous { distance: r.abs(), tube });
        }
        Ok(TubularPoint { r, s, inside_tube: true })
    }

    /// Chart point `X0(s) + r n(s)`.
    pub fn chart_point(&self, r: f64, s: f64) -> Point {
        let j = self.jet(s);
        let n = j.normal();
        [j.x[0] + r * n[0], j.x[1] + r * n[1]]
    }

    /// `∇S`, `ΔS`, `∂_t S` at chart point `(r, s)` for markers moving with `v`.
    pub fn chart_derivatives(&self, r: f64, s: f64, v: &VelocityField) -> Result<ChartDerivatives> {
        let j = self.regular_jet(s)?;
        let sp = j.speed();
        let k = j.curvature();
        let w = sp * (1.0 - r * k);
        if !(w > SPEED_TOL * sp.max(1.0)) {
            return Err(Error::ChartSingular { r, det: w });
        }
        let tau = j.tangent();
        let n = j.normal();
        let grad_s = [tau[0] / w, tau[1] / w];
        let w_s = j.speed_derivative() * (1.0 - r * k) - sp * r * j.curvature_derivative();
        let lap_s = -w_s / (w * w * w);
        let dt_s = if v.is_zero() {
            0.0
        } else {
            let jet = v.jet(j.x);
            let p = jet.v;
            let p_s = jet.grad_dot(j.d1);
            let dn = -dot(n, p_s) / sp;
            let dx = [p[0] + r * dn * tau[0], p[1] + r * dn * tau[1]];
            -dot(grad_s, dx)
        };
        Ok(ChartDerivatives { grad_s, lap_s, dt_s, lap_d: -k / (1.0 - r * k) })
    }

    /// `ΔS` at `x` by fourth-order central differences of the closed-form `∇S`.
    pub fn laplacian_s_fd(&self, x: Point, h: f64, tube: f64) -> Result<f64> {
        let grad = |y: Point| -> Result<[f64; 2]> {
            let tp = self.signed_distance(y, tube)?;
            Ok(self.chart_derivatives(tp.r, tp.s, &VelocityField::Zero)?.grad_s)
        };
        let mut lap = 0.0;
        for i in 0..2 {
            let shifted = |k: f64| {
                let mut y = x;
                y[i] += k * h;
                grad(y).map(|g| g[i])
            };
            lap += (-shifted(2.0)? + 8.0 * shifted(1.0)? - 8.0 * shifted(-1.0)? + shifted(-2.0)?) / (12.0 * h);
        }
        Ok(lap)
    }

    /// Advects the markers with `v` up to `t1` using RK4 steps no longer than
    /// `dt`, redistributing them to arclength spacing when needed.
    pub fn evolve(&self, v: &VelocityField, t1: f64, dt: f64) -> Result<Curve> {
        if !(dt > 0.0) {
            return Err(Error::InvalidConfig(format!("time step must be positive, got {dt}")));
        }
        if t1 < self.t {
            return Err(Error::InvalidConfig(format!("target time {t1} precedes curve time {}", self.t)));
        }
        let span = t1 - self.t;
        let steps = (span / dt - 1e-9).ceil().max(0.0) as usize;
        if steps == 0 || v.is_zero() {
            let mut out = self.clone();
            out.t = t1;
            out.relabel = None;
            return Ok(out);
        }
        let h = span / steps as f64;
        let m = self.len();
        let mut markers = self.markers.clone();
        let mut labels: Option<Vec<f64>> = None;
        let f = |p: Point| v.velocity(p);
        for _ in 0..steps {
            for p in markers.iter_mut() {
                let k1 = f(*p);
                let k2 = f([p[0] + 0.5 * h * k1[0], p[1] + 0.5 * h * k1[1]]);
                let k3 = f([p[0] + 0.5 * h * k2[0], p[1] + 0.5 * h * k2[1]]);
                let k4 = f([p[0] + h * k3[0], p[1] + h * k3[1]]);
                for i in 0..2 {
                    p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
            if spacing_ratio(&markers) > SPACING_RATIO_LIMIT {
                let c = Curve::from_markers(0.0, markers.clone())?;
                let old = c.arclength_parameters();
                let cur: Vec<f64> = labels.clone().unwrap_or_else(|| (0..m).map(|j| j as f64 / m as f64).collect());
                labels = Some(compose_labels(&cur, &old));
                markers = old.iter().map(|&s| c.point(s)).collect();
                if spacing_ratio(&markers) > SPACING_RATIO_LIMIT {
                    return Err(Error::CurveDegenerate("marker spacing could not be restored".into()));
                }
            }
        }
        let mut out = Curve::from_markers(t1, markers)?;
        out.relabel = labels;
        if let Some((a, b)) = out.self_intersection() {
            return Err(Error::CurveDegenerate(format!("segments {a} and {b} intersect")));
        }
        Ok(out)
    }

    /// Parameters `s_j` whose arclength is `j L / M`.
    fn arclength_parameters(&self) -> Vec<f64> {
        let m = self.len();
        let n = 4 * m;
        let speed: Vec<Complex64> =
            (0..n).map(|j| Complex64::new(self.jet(j as f64 / n as f64).speed(), 0.0)).collect();
        let sh = periodic::dft(&speed);
        let total = sh[0].re;
        // σ(s) = L s + Σ_{k≠0} ŝ_k (e^{2πiks} - 1) / (2πik)
        let sigma = |s: f64| -> f64 {
            let mut acc = total * s;
            for (k, c) in sh.iter().enumerate().skip(1) {
                let w = periodic::wavenumber(k, n);
                if n.is_multiple_of(2) && w as usize == n / 2 {
                    continue;
                }
                let e = Complex64::from_polar(1.0, 2.0 * PI * w as f64 * s) - 1.0;
                acc += (c * e / Complex64::new(0.0, 2.0 * PI * w as f64)).re;
            }
            acc
        };
        let mut out = Vec::with_capacity(m);
        let mut s = 0.0;
        for j in 0..m {
            let target = total * j as f64 / m as f64;
            for _ in 0..30 {
                let d = (sigma(s) - target) / self.jet(s).speed();
                s -= d;
                if d.abs() < 1e-15 {
                    break;
                }
            }
            out.push(s);
        }
        out
    }

    /// First pair of non-adjacent intersecting marker segments, if any.
    pub fn self_intersection(&self) -> Option<(usize, usize)> {
        let m = self.len();
        let seg = |j: usize| (self.markers[j], self.markers[(j + 1) % m]);
        for a in 0..m {
            let (p1, p2) = seg(a);
            for b in a + 2..m {
                if a == 0 && b == m - 1 {
                    continue;
                }
                let (q1, q2) = seg(b);
                if p1[0].max(p2[0]) < q1[0].min(q2[0])
                    || q1[0].max(q2[0]) < p1[0].min(p2[0])
                    || p1[1].max(p2[1]) < q1[1].min(q2[1])
                    || q1[1].max(q2[1]) < p1[1].min(p2[1])
                {
                    continue;
                }
                let o = |a: Point, b: Point, c: Point| cross([b[0] - a[0], b[1] - a[1]], [c[0] - a[0], c[1] - a[1]]);
                let d1 = o(q1, q2, p1);
                let d2 = o(q1, q2, p2);
                let d3 = o(p1, p2, q1);
                let d4 = o(p1, p2, q2);
                if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
                    return Some((a, b));
                }
            }
        }
        None
    }

    /// Minimum distance from the markers to the boundary of the unit square.
    pub fn boundary_clearance(&self) -> f64 {
        self.markers
            .iter()
            .map(|p| p[0].min(1.0 - p[0]).min(p[1]).min(1.0 - p[1]))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Where a query point sits relative to a curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Location {
    /// Within `reach` of the curve, with its tubular coordinates.
    Near(TubularPoint),
    /// At distance `reach` or more; `+1` inside, `-1` outside.
    Far(f64),
}

/// Bucketed marker index for repeated tubular-coordinate queries.
///
/// Buckets are at least `reach` plus one marker spacing wide, so a point whose
/// 3×3 bucket neighbourhood holds no marker is farther than `reach` from the
/// curve. Such buckets never straddle the curve and carry a cached side.
#[derive(Debug, Clone)]
pub struct CurveLocator {
    curve: Curve,
    reach: f64,
    spacing: f64,
    origin: Point,
    cell: f64,
    dims: [usize; 2],
    buckets: Vec<Vec<u32>>,
    side: Vec<f64>,
}

impl CurveLocator {
    pub fn new(curve: Curve, reach: f64) -> Self {
        let m = curve.len();
        let spacing = (0..m)
            .map(|j| {
                let (a, b) = (curve.markers[j], curve.markers[(j + 1) % m]);
                (b[0] - a[0]).hypot(b[1] - a[1])
            })
            .fold(0.0, f64::max);
        let cell = reach + spacing;
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &curve.markers {
            for i in 0..2 {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        let origin = [lo[0] - 2.0 * cell, lo[1] - 2.0 * cell];
        let dims = [
            ((hi[0] - origin[0]) / cell).ceil() as usize + 2,
            ((hi[1] - origin[1]) / cell).ceil() as usize + 2,
        ];
        let mut buckets = vec![Vec::new(); dims[0] * dims[1]];
        for (j, p) in curve.markers.iter().enumerate() {
            let (a, b) = (((p[0] - origin[0]) / cell) as usize, ((p[1] - origin[1]) / cell) as usize);
            buckets[b * dims[0] + a].push(j as u32);
        }
        let mut side = vec![0.0; buckets.len()];
        for b in 0..dims[1] {
            for a in 0..dims[0] {
                let empty = (a.saturating_sub(1)..(a + 2).min(dims[0]))
                    .all(|i| (b.saturating_sub(1)..(b + 2).min(dims[1])).all(|k| buckets[k * dims[0] + i].is_empty()));
                if empty {
                    let c = [origin[0] + (a as f64 + 0.5) * cell, origin[1] + (b as f64 + 0.5) * cell];
                    side[b * dims[0] + a] = curve.side(c);
                }
            }
        }
        Self { curve, reach, spacing, origin, cell, dims, buckets, side }
    }

    pub fn curve(&self) -> &Curve {
        &self.curve
    }

    pub fn reach(&self) -> f64 {
        self.reach
    }

    pub fn locate(&self, x: Point) -> Location {
        let fa = (x[0] - self.origin[0]) / self.cell;
        let fb = (x[1] - self.origin[1]) / self.cell;
        if fa < 0.0 || fb < 0.0 || fa >= self.dims[0] as f64 || fb >= self.dims[1] as f64 {
            return Location::Far(-1.0);
        }
        let (a, b) = (fa as usize, fb as usize);
        let cached = self.side[b * self.dims[0] + a];
        if cached != 0.0 {
            return Location::Far(cached);
        }
        let mut best = (usize::MAX, f64::INFINITY);
        for k in b.saturating_sub(1)..(b + 2).min(self.dims[1]) {
            for i in a.saturating_sub(1)..(a + 2).min(self.dims[0]) {
                for &j in &self.buckets[k * self.dims[0] + i] {
                    let p = self.curve.markers[j as usize];
                    let d = (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2);
                    if d < best.1 {
                        best = (j as usize, d);
                    }
                }
            }
        }
        if best.1.sqrt() - 0.5 * self.spacing >= self.reach {
            return Location::Far(self.curve.side(x));
        }
        let proj = self.curve.project_from(x, best.0);
        match self.curve.finish_projection(x, proj, self.reach) {
            Ok(tp) => Location::Near(tp),
            Err(_) => Location::Far(self.curve.side(x)),
        }
    }
}

fn spacing_ratio(markers: &[Point]) -> f64 {
    let m = markers.len();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for j in 0..m {
        let a = markers[j];
        let b = markers[(j + 1) % m];
        let d = (b[0] - a[0]).hypot(b[1] - a[1]);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    hi / lo
}

/// Composes relabelings: `labels` gives the original parameter of each
/// current marker; `new` gives current parameters of the new markers.
fn compose_labels(labels: &[f64], new: &[f64]) -> Vec<f64> {
    let m = labels.len();
    // the offset label(s) - s is periodic and smooth
    let offset: Vec<f64> = labels.iter().enumerate().map(|(j, &l)| unwrap_near(l - j as f64 / m as f64)).collect();
    new.iter().map(|&s| (s + periodic::trig(&offset, s)).rem_euclid(1.0)).collect()
}

fn unwrap_near(d: f64) -> f64 {
    d - d.round()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle() -> Curve {
        Curve::circle([0.5, 0.5], 0.25, 256).unwrap()
    }

    #[test]
    fn circle_frame() {
        let c = circle();
        let (tau, n) = c.tangent_normal(0.0).unwrap();
        assert!((n[0] + 1.0).abs() < 1e-12 && n[1].abs() < 1e-12);
        assert!(tau[0].abs() < 1e-12 && (tau[1] - 1.0).abs() < 1e-12);
        let (tau, n) = c.tangent_normal(0.25).unwrap();
        assert!((tau[0] + 1.0).abs() < 1e-12 && tau[1].abs() < 1e-12);
        assert!(n[0].abs() < 1e-12 && (n[1] + 1.0).abs() < 1e-12);
        for s in [0.1, 0.37, 0.9] {
            let (tau, n) = c.tangent_normal(s).unwrap();
            assert!((dot(tau, tau) - 1.0).abs() < 1e-14 && dot(tau, n).abs() < 1e-14);
        }
    }

    #[test]
    fn curvature_examples() {
        let c = circle();
        for s in [0.0, 0.13, 0.5, 0.77] {
            assert!((c.curvature(s).unwrap() - 4.0).abs() < 1e-10);
        }
        let big = Curve::circle([0.0, 0.0], 1e3, 256).unwrap();
        assert!(big.curvature(0.3).unwrap().abs() <= 1.001e-3);
        let e = Curve::ellipse([0.5, 0.5], 0.3, 0.2, 256).unwrap();
        assert!((e.curvature(0.0).unwrap() - 0.3 / 0.04).abs() < 1e-9);
        assert!((e.curvature(0.25).unwrap() - 0.2 / 0.09).abs() < 1e-9);
    }

    #[test]
    fn curvature_derivative_matches_differences() {
        let e = Curve::ellipse([0.5, 0.5], 0.3, 0.2, 256).unwrap();
        let h = 1e-5;
        for s in [0.05, 0.3, 0.61] {
            let fd = (e.jet(s + h).curvature() - e.jet(s - h).curvature()) / (2.0 * h);
            assert!((fd - e.jet(s).curvature_derivative()).abs() < 1e-5 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn normal_velocity_examples() {
        let c = circle();
        let rot = VelocityField::RigidRotation { omega: 3.0, center: [0.5, 0.5] };
        let rad = VelocityField::Radial { rate: 0.8, center: [0.5, 0.5] };
        for s in [0.0, 0.2, 0.71] {
            assert_eq!(c.normal_velocity(&VelocityField::Zero, s).unwrap(), 0.0);
            assert!(c.normal_velocity(&rot, s).unwrap().abs() < 1e-14);
            assert!((c.normal_velocity(&rad, s).unwrap() + 0.8 * 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn area_matches_circle() {
        let c = circle();
        assert!((c.area() - PI * 0.0625).abs() < 1e-14);
        assert!((c.length() - 2.0 * PI * 0.25).abs() < 1e-13);
    }

    #[test]
    fn signed_distance_examples() {
        let c = circle();
        assert!(matches!(
            c.signed_distance([0.5, 0.5], 0.15),
            Err(Error::ProjectionAmbiguous { .. })
        ));
        let tp = c.signed_distance([0.6, 0.5], 0.2).unwrap();
        assert!((tp.r - 0.15).abs() < 1e-12);
        assert!(tp.s.min(1.0 - tp.s) < 1e-12);
        let tp = c.signed_distance([0.5 + 0.3 * 0.6, 0.5 + 0.3 * 0.8], 0.15).unwrap();
        assert!((tp.r + 0.05).abs() < 1e-12);
        for s in [0.0, 0.123, 0.5, 0.999] {
            let x = c.point(s);
            let tp = c.signed_distance(x, 0.15).unwrap();
            assert!(tp.r.abs() < 1e-12);
        }
    }

    #[test]
    fn reconstruction_in_the_tube() {
        let e = Curve::ellipse([0.5, 0.5], 0.3, 0.2, 256).unwrap();
        for (i, r) in [-0.1, -0.03, 0.0, 0.04, 0.1].into_iter().enumerate() {
            for k in 0..17 {
                let s = (k as f64 + 0.1 * i as f64) / 17.0;
                let x = e.chart_point(r, s);
                let tp = e.signed_distance(x, 0.15).unwrap();
                let y = e.chart_point(tp.r, tp.s);
                assert!((x[0] - y[0]).hypot(x[1] - y[1]) < 1e-10);
                assert!((tp.r - r).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn circle_chart() {
        let c = circle();
        let len = 2.0 * PI * 0.25;
        for r in [-0.1, 0.0, 0.1] {
            for s in [0.0, 0.3, 0.8] {
                let cd = c.chart_derivatives(r, s, &VelocityField::Zero).unwrap();
                let g = cd.grad_s[0].hypot(cd.grad_s[1]);
                // s has period 1 here, so the arclength factor is L / R
                assert!((g * (0.25 - r) * len / 0.25 - 1.0).abs() < 1e-8);
                assert_eq!(cd.dt_s, 0.0);
                assert!(cd.lap_s.abs() < 1e-9);
                assert!((cd.lap_d + 1.0 / (0.25 - r)).abs() < 1e-9);
            }
            let cd = c.chart_derivatives(0.0, 0.4, &VelocityField::Zero).unwrap();
            let (_, n) = c.tangent_normal(0.4).unwrap();
            assert!(dot(cd.grad_s, n).abs() < 1e-10);
        }
    }

    #[test]
    fn closed_form_laplacian_matches_differences() {
        let e = Curve::ellipse([0.5, 0.5], 0.3, 0.2, 256).unwrap();
        let delta = 0.05;
        for (r, s) in [(0.0, 0.1), (0.07, 0.33), (-0.1, 0.8)] {
            let cd = e.chart_derivatives(r, s, &VelocityField::Zero).unwrap();
            let fd = e.laplacian_s_fd(e.chart_point(r, s), delta / 64.0, 3.0 * delta).unwrap();
            assert!((cd.lap_s - fd).abs() < 1e-6 * (1.0 + fd.abs()), "{} vs {}", cd.lap_s, fd);
        }
    }

    #[test]
    fn chart_singular_at_center_of_curvature() {
        let c = circle();
        assert!(matches!(
            c.chart_derivatives(0.25, 0.0, &VelocityField::Zero),
            Err(Error::ChartSingular { .. })
        ));
    }

    #[test]
    fn rotation_moves_markers_rigidly() {
        let c = Curve::ellipse([0.5, 0.5], 0.3, 0.2, 128).unwrap();
        let omega = 1.7;
        let v = VelocityField::RigidRotation { omega, center: [0.5, 0.5] };
        let out = c.evolve(&v, 0.5, 1e-3).unwrap();
        let (sn, cs) = (omega * 0.5).sin_cos();
        for (p, q) in c.markers().iter().zip(out.markers()) {
            let (dx, dy) = (p[0] - 0.5, p[1] - 0.5);
            let e = [0.5 + cs * dx - sn * dy, 0.5 + sn * dx + cs * dy];
            assert!((e[0] - q[0]).hypot(e[1] - q[1]) < 1e-8);
        }
        assert!(out.relabel.is_none());
        assert_eq!(out.t, 0.5);
    }

    #[test]
    fn zero_field_keeps_curve() {
        let c = circle();
        let out = c.evolve(&VelocityField::Zero, 1.0, 0.1).unwrap();
        assert_eq!(out.markers(), c.markers());
    }

    #[test]
    fn stream_field_preserves_area() {
        let c = circle();
        let v = VelocityField::default();
        let out = c.evolve(&v, 0.5, 1e-3).unwrap();
        assert!((out.area() / c.area() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn redistribution_restores_spacing() {
        // strong shear stretches the front and back of the circle
        let c = Curve::circle([0.5, 0.5], 0.2, 128).unwrap();
        let v = VelocityField::LinearShear { rate: 1.5 };
        let out = c.evolve(&v, 1.0, 1e-3).unwrap();
        assert!(out.spacing_ratio() <= SPACING_RATIO_LIMIT);
        let labels = out.relabel.as_ref().expect("markers were redistributed");
        // every relabeled marker is the image of its original label under the flow
        for (j, &l) in labels.iter().enumerate().step_by(7) {
            let p = c.point(l);
            let q = [p[0] + 1.5 * p[1], p[1]];
            let x = out.markers()[j];
            assert!((q[0] - x[0]).hypot(q[1] - x[1]) < 1e-8, "marker {j}: {}", (q[0] - x[0]).hypot(q[1] - x[1]));
        }
        assert!((out.area() / c.area() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn detects_self_intersection() {
        // limacon with an inner loop; both loops wind counterclockwise
        let c = Curve::from_fn(0.0, 128, |s| {
            let a = 2.0 * PI * s;
            let r = 0.1 + 0.2 * a.cos();
            [0.5 + r * a.cos(), 0.5 + r * a.sin()]
        })
        .unwrap();
        assert!(c.self_intersection().is_some());
        assert!(circle().self_intersection().is_none());
    }

    #[test]
    fn locator_agrees_with_direct_queries() {
        let e = Curve::ellipse([0.5, 0.5], 0.3, 0.2, 256).unwrap();
        let loc = CurveLocator::new(e.clone(), 0.1);
        let n = 60;
        for i in 0..=n {
            for k in 0..=n {
                let x = [i as f64 / n as f64, k as f64 / n as f64];
                match loc.locate(x) {
                    Location::Near(tp) => {
                        let d = e.signed_distance(x, 0.1).unwrap();
                        assert!((d.r - tp.r).abs() < 1e-12 && (d.s - tp.s).abs() < 1e-12);
                    }
                    Location::Far(side) => {
                        assert!(e.signed_distance(x, 0.1).is_err());
                        assert_eq!(side, e.side(x));
                    }
                }
            }
        }
    }

    #[test]
    fn inside_test() {
        let c = circle();
        assert!(c.contains([0.5, 0.5]));
        assert!(!c.contains([0.9, 0.9]));
        assert_eq!(c.side([0.05, 0.5]), -1.0);
    }
}
