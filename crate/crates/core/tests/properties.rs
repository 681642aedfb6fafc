use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use convac::approx::ApproximateSolution;
use convac::config::StudyConfig;
use convac::curve::Curve;
use convac::cutoff::Cutoff;
use convac::expansion::ExpansionData;
use convac::grid::Grid;
use convac::io::Csv;
use convac::layer::{CorrectorBasis, ExpansionVariant, LayerCoefficients};
use convac::metrics::{error_norms_from_snapshots, ErrorSnapshot};
use convac::pde::{run, well_prepared_initial, SolverConfig};
use convac::profile::Profile;
use convac::study;
use convac::velocity::VelocityField;

fn profile() -> &'static Profile {
    static P: OnceLock<Profile> = OnceLock::new();
    P.get_or_init(|| study::build_profile(&StudyConfig::default()).unwrap())
}

fn basis(variant: ExpansionVariant) -> &'static CorrectorBasis {
    static C: OnceLock<CorrectorBasis> = OnceLock::new();
    static L: OnceLock<CorrectorBasis> = OnceLock::new();
    let cell = if variant == ExpansionVariant::Consistent { &C } else { &L };
    cell.get_or_init(|| CorrectorBasis::new(profile(), variant).unwrap())
}

fn static_circle() -> &'static Arc<ExpansionData> {
    static D: OnceLock<Arc<ExpansionData>> = OnceLock::new();
    D.get_or_init(|| {
        let mut cfg = StudyConfig::default();
        cfg.velocity = VelocityField::Zero;
        cfg.expansion.t_final = 0.05;
        study::build_expansion(&cfg).unwrap()
    })
}

fn coefficients() -> impl Strategy<Value = LayerCoefficients> {
    (-5.0..5.0, -5.0..5.0, -20.0..20.0, -2.0..2.0, 0.0..4.0, -5.0..5.0).prop_map(
        |(kappa1, kappa2, b, h1, grad_h1_sq, dkappa1)| LayerCoefficients { kappa1, kappa2, b, h1, grad_h1_sq, dkappa1 },
    )
}

fn variant() -> impl Strategy<Value = ExpansionVariant> {
    prop_oneof![Just(ExpansionVariant::Consistent), Just(ExpansionVariant::Literal)]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn distance_gradient_is_unit(a in 0.15..0.3f64, b in 0.15..0.3f64, s in 0.0..1.0f64, q in -0.9..0.9f64) {
        let c = Curve::ellipse([0.5, 0.5], a, b, 128).unwrap();
        // stay well inside the smallest radius of curvature
        let reach = a.min(b).powi(2) / a.max(b) * 0.5;
        let x = c.chart_point(q * reach, s);
        let fd = 1e-5;
        let d = |dx: f64, dy: f64| c.signed_distance([x[0] + dx, x[1] + dy], 2.0 * reach).unwrap().r;
        let gx = (d(fd, 0.0) - d(-fd, 0.0)) / (2.0 * fd);
        let gy = (d(0.0, fd) - d(0.0, -fd)) / (2.0 * fd);
        prop_assert!((gx.hypot(gy) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn cutoff_plateau_and_slope(delta in 0.01..0.1f64, u in -3.0..3.0f64) {
        let z = Cutoff::new(delta);
        let r = u * delta;
        let v = z.value(r);
        if u.abs() <= 1.0 { prop_assert_eq!(v, 1.0); }
        if u.abs() >= 2.0 { prop_assert_eq!(v, 0.0); }
        let q = -r * z.derivative(r);
        prop_assert!((0.0..=4.0).contains(&q), "{}", q);
    }

    #[test]
    fn correctors_vanish_at_the_origin_and_are_compatible(k in coefficients(), variant in variant()) {
        let p = profile();
        let bs = basis(variant);
        let c1: f64 = bs.c1.iter().zip(bs.c1_weights(&k)).map(|(u, w)| w * u.at_zero(&p.grid)).sum();
        let (g, w) = bs.c2_weights(&k);
        let c2: f64 = bs.c2.iter().zip(&w).map(|(u, w)| w * u.at_zero(&p.grid)).sum();
        prop_assert!(c1.abs() <= 1e-12 && c2.abs() <= 1e-12);
        let mut rhs: Vec<f64> = p.theta0_p.iter().map(|t| -g * t).collect();
        for (q, w) in bs.c2_sources.iter().zip(&w) {
            rhs.iter_mut().zip(q).for_each(|(r, q)| *r += w * q);
        }
        prop_assert!(p.project(&rhs).abs() <= 1e-8);
    }

    #[test]
    fn csv_numbers_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let mut csv = Csv::new(&["x"]);
        csv.row(&[x]);
        let back: f64 = csv.as_str().lines().nth(1).unwrap().parse().unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }

    #[test]
    fn error_norms_scale_linearly(lambda in -10.0..10.0f64) {
        let sol = ApproximateSolution::new(static_circle().clone(), 0.1).unwrap();
        let grid = Grid::new(40);
        let u = grid.sample(|x| (3.0 * x[0]).sin() * (2.0 * x[1]).cos());
        let snap = |t: f64, scale: f64| {
            let frame = sol.frame(t).unwrap();
            let ca = frame.sample(&grid, 0);
            let c: Vec<f64> = ca.iter().zip(&u).map(|(a, u)| a + scale * u).collect();
            ErrorSnapshot::from_frame(&frame, grid, &c).unwrap()
        };
        let base = error_norms_from_snapshots(0.1, 0.05, &[snap(0.0, 1.0), snap(0.01, 1.0)]).unwrap();
        let scaled = error_norms_from_snapshots(0.1, 0.05, &[snap(0.0, lambda), snap(0.01, lambda)]).unwrap();
        for (a, b) in base.values().iter().zip(scaled.values()) {
            prop_assert!((b - lambda.abs() * a).abs() <= 1e-9 * (1.0 + a));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 4, ..ProptestConfig::default() })]

    #[test]
    fn energy_is_non_increasing_without_flow(amp in 0.0..5.0f64, eps in 0.12..0.2f64) {
        let sol = ApproximateSolution::new(static_circle().clone(), eps).unwrap();
        let grid = Grid::for_eps(eps, 8.0);
        let c0 = well_prepared_initial(&sol, grid, amp).unwrap();
        let v = VelocityField::Zero;
        let cfg = SolverConfig::for_grid(eps, 1.0, 0.05, grid, &v, sol.data().profile.potential);
        let times: Vec<f64> = (0..=10).map(|k| 0.005 * k as f64).collect();
        let traj = run(&c0, &v, &cfg, &times).unwrap();
        for w in traj.energies.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-10), "{} > {}", w[1], w[0]);
        }
        prop_assert!(traj.max_abs <= 1.1);
    }

    #[test]
    fn reruns_are_byte_identical(eps in 0.12..0.2f64) {
        let data = static_circle();
        let mut cfg = StudyConfig::default();
        cfg.velocity = VelocityField::Zero;
        cfg.residual.time_nodes = 2;
        let once = || {
            let r = study::residual_case(data, &cfg, eps).unwrap();
            study::residual_csv(&[eps], &[r.norm]).as_str().to_owned()
        };
        prop_assert_eq!(once(), once());
    }
}
