use std::f64::consts::PI;

use approx::assert_relative_eq;
use nalgebra::Vector3;
use npsl_core::geometry::{ChartPoint, Surface};
use npsl_core::symbol::{
    birkhoff_average, f_alpha, hamiltonian, hamiltonian_gradient, integrate_flow, np_symbol, orbit_normal,
    variety_sample, weighted_variety_volume, CotangentPoint, FAlphaVariant, HamiltonianKind, VarietySample,
};
use proptest::prelude::*;

fn norm_g(jet: &npsl_core::geometry::GeometryJet, xi: [f64; 2]) -> f64 {
    let gi = jet.metric_inverse();
    (xi[0] * (gi[(0, 0)] * xi[0] + gi[(0, 1)] * xi[1]) + xi[1] * (gi[(1, 0)] * xi[0] + gi[(1, 1)] * xi[1])).sqrt()
}

#[test]
fn sphere_symbol_is_inverse_length() {
    let s = Surface::parse("sphere:2").unwrap();
    let jet = s.jet(&ChartPoint::new(1, [0.9, -0.4])).unwrap();
    for xi in [[1.0, 0.0], [0.3, -2.0], [-5.0, 1.5]] {
        let p = np_symbol(&jet, &xi).unwrap();
        assert_relative_eq!(p, 1.0 / (2.0 * norm_g(&jet, xi)), max_relative = 1e-12);
    }
}

#[test]
fn curves_have_vanishing_symbol() {
    let s = Surface::parse("ellipse:2,1").unwrap();
    let jet = s.jet(&ChartPoint::new(0, [0.3, 0.0])).unwrap();
    assert_eq!(np_symbol(&jet, &[1.0]).unwrap(), 0.0);
    assert!(np_symbol(&jet, &[0.0]).is_err());
}

#[test]
fn regularized_hamiltonians() {
    let s = Surface::parse("ellipsoid:1,1.5,2").unwrap();
    let jet = s.jet(&ChartPoint::new(0, [1.0, 0.5])).unwrap();
    let xi = [0.7, 0.2];
    let raw = hamiltonian(&jet, &xi, HamiltonianKind::Raw).unwrap();
    assert_relative_eq!(hamiltonian(&jet, &xi, HamiltonianKind::Rho).unwrap(), 1.0 - (-raw).exp(), epsilon = 1e-15);
    assert_relative_eq!(hamiltonian(&jet, &xi, HamiltonianKind::Arctan).unwrap(), raw.atan(), epsilon = 1e-15);
    // Convex surface: the arctan flow extends to the zero section.
    assert_relative_eq!(hamiltonian(&jet, &[0.0, 0.0], HamiltonianKind::Arctan).unwrap(), PI / 2.0);
    assert!(hamiltonian(&jet, &[0.0, 0.0], HamiltonianKind::Raw).is_err());
    assert!(HamiltonianKind::parse("cubic").is_err());
}

#[test]
fn unit_sphere_variety() {
    let vs = VarietySample::from_curvatures([1.0, 1.0], 512).unwrap();
    assert!(!vs.degenerate);
    assert_relative_eq!(vs.total_measure(), 2.0 * PI, epsilon = 1e-12);
    for alpha in [-0.5, 0.0, 0.7] {
        assert_relative_eq!(weighted_variety_volume(&vs, alpha).unwrap().value, 2.0 * PI, epsilon = 1e-12);
    }
    assert_relative_eq!(vs.liouville_volume(0.0), PI, epsilon = 1e-12);
}

#[test]
fn saddle_variety_is_flagged() {
    // k~ = (-1, 1): r = -cos 2 theta vanishes on grid points.
    let vs = VarietySample::from_curvatures([1.0, -1.0], 256).unwrap();
    assert!(vs.degenerate);
    let vol = weighted_variety_volume(&vs, 0.0).unwrap();
    assert!(vol.value.is_finite());
    assert!(vol.excluded_fraction > 0.0);
    assert!(weighted_variety_volume(&vs, -1.5).unwrap_err().to_string().contains("diverges"));
}

#[test]
fn variety_covectors_lie_on_the_unit_level() {
    let s = Surface::parse("ellipsoid:1,1.5,2").unwrap();
    let jet = s.jet(&ChartPoint::new(0, [1.2, 0.4])).unwrap();
    let vs = variety_sample(&jet, 64).unwrap();
    for xi in &vs.covectors {
        let h = hamiltonian(&jet, xi, HamiltonianKind::Raw).unwrap();
        assert_relative_eq!(h, 1.0, max_relative = 1e-10);
    }
}

#[test]
fn paper_exponent_counterexample() {
    let f = f_alpha(&[3.0, 3.0], -0.5, FAlphaVariant::Paper).unwrap();
    let v = weighted_variety_volume(&VarietySample::from_curvatures([3.0, 3.0], 4096).unwrap(), -0.5).unwrap().value;
    assert_relative_eq!(f, 18.0 * PI, max_relative = 1e-10);
    assert_relative_eq!(v, 6.0 * PI, max_relative = 1e-10);
    assert!(f > v);
}

fn start(surface: &Surface, level: f64) -> CotangentPoint {
    CotangentPoint::on_level(surface, ChartPoint::new(0, [1.0, 0.3]), [0.3, 1.0], level).unwrap()
}

#[test]
fn flow_conserves_energy_across_chart_switches() {
    let s = Surface::parse("ellipsoid:1,1,2").unwrap();
    // Mostly meridional start so the orbit passes near the poles.
    let init = CotangentPoint::on_level(&s, ChartPoint::new(0, [1.0, 0.3]), [1.0, 0.1], 1.0).unwrap();
    let traj = integrate_flow(&s, &init, HamiltonianKind::Raw, 50.0, 1e-8).unwrap();
    assert!(traj.max_drift < 1e-8, "{:e}", traj.max_drift);
    assert!(traj.states.iter().any(|p| p.base.chart != traj.states[0].base.chart));
    assert_relative_eq!(*traj.times.last().unwrap(), 50.0);
}

#[test]
fn sphere_orbits_are_great_circles() {
    let s = Surface::parse("sphere:1").unwrap();
    let init = start(&s, 1.0);
    let (_, v) = hamiltonian_gradient(&s, &init, HamiltonianKind::Raw).unwrap();
    let n = orbit_normal(&s, &init, v);
    let traj = integrate_flow(&s, &init, HamiltonianKind::Raw, 30.0, 1e-9).unwrap();
    for x in &traj.positions {
        assert!(Vector3::from(*x).dot(&n).abs() < 1e-7);
    }
}

#[test]
fn rho_flow_is_a_time_change_of_the_raw_flow() {
    let s = Surface::parse("ellipsoid:1,1.3,1.8").unwrap();
    let init = start(&s, 0.5);
    let raw = integrate_flow(&s, &init, HamiltonianKind::Raw, 4.0, 1e-10).unwrap();
    let rho = integrate_flow(&s, &init, HamiltonianKind::Rho, 4.0 * 0.5f64.exp(), 1e-10).unwrap();
    let (a, b) = (raw.positions.last().unwrap(), rho.positions.last().unwrap());
    let gap = (Vector3::from(*a) - Vector3::from(*b)).norm();
    assert!(gap < 1e-6, "{gap:e}");
}

#[test]
fn birkhoff_average_of_a_constant() {
    let s = Surface::parse("ellipsoid:1,1,2").unwrap();
    let one = |_: &Surface, _: &CotangentPoint| 1.0;
    let series = birkhoff_average(&s, &one, &start(&s, 1.0), HamiltonianKind::Raw, 10.0, 5, 1e-8).unwrap();
    assert_eq!(series.averages.len(), 5);
    for a in &series.averages {
        assert_relative_eq!(*a, 1.0, epsilon = 1e-10);
    }
}

#[test]
fn flow_rejects_bad_input() {
    let s = Surface::parse("sphere:1").unwrap();
    let p = ChartPoint::new(0, [1.0, 0.0]);
    let zero = CotangentPoint::new(p, [0.0, 0.0]);
    assert!(integrate_flow(&s, &zero, HamiltonianKind::Raw, 1.0, 1e-8).unwrap_err().is_validation());
    let ok = CotangentPoint::new(p, [1.0, 0.0]);
    assert!(integrate_flow(&s, &ok, HamiltonianKind::Raw, -1.0, 1e-8).unwrap_err().is_validation());
    assert!(integrate_flow(&s, &ok, HamiltonianKind::Raw, 1.0, 2.0).unwrap_err().is_validation());
    let curve = Surface::parse("ellipse:2,1").unwrap();
    assert!(integrate_flow(&curve, &ok, HamiltonianKind::Raw, 1.0, 1e-8).is_err());
}

fn definite_pair() -> impl Strategy<Value = [f64; 2]> {
    (0.1f64..5.0, 0.1f64..5.0, any::<bool>()).prop_map(|(a, b, neg)| if neg { [-a, -b] } else { [a, b] })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn symbol_is_homogeneous_of_degree_minus_one(
        theta in 0.4f64..2.7, phi in -3.0f64..3.0, x0 in -2.0f64..2.0, x1 in 0.1f64..2.0, t in 0.05f64..20.0
    ) {
        let s = Surface::parse("ellipsoid:1,1.5,2").unwrap();
        let jet = s.jet(&ChartPoint::new(0, [theta, phi])).unwrap();
        let p = np_symbol(&jet, &[x0, x1]).unwrap();
        let pt = np_symbol(&jet, &[t * x0, t * x1]).unwrap();
        prop_assert!((pt * t - p).abs() < 1e-12 * p.abs().max(1.0));
        prop_assert!(p > 0.0);
    }

    #[test]
    fn variety_volume_scales_with_curvature(k in definite_pair(), beta in 0.2f64..5.0, alpha in -0.5f64..1.0) {
        let v = weighted_variety_volume(&VarietySample::from_curvatures(k, 1024).unwrap(), alpha).unwrap().value;
        let scaled = [beta * k[0], beta * k[1]];
        let vb = weighted_variety_volume(&VarietySample::from_curvatures(scaled, 1024).unwrap(), alpha).unwrap().value;
        prop_assert!((vb / v / beta.powf(2.0 + 2.0 * alpha) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn corrected_functional_brackets_the_volume(k in definite_pair(), alpha in prop::sample::select(vec![-0.5, 0.0, 0.5])) {
        let v = weighted_variety_volume(&VarietySample::from_curvatures(k, 4096).unwrap(), alpha).unwrap().value;
        let f = f_alpha(&k, alpha, FAlphaVariant::Corrected).unwrap();
        prop_assert!(f <= v * (1.0 + 1e-8));
        prop_assert!(v <= 2.0 * f * (1.0 + 1e-8));
    }

    #[test]
    fn paper_functional_between_extreme_curvatures(k0 in 0.05f64..5.0, k1 in 0.05f64..5.0, alpha in prop::sample::select(vec![-0.5, 0.0])) {
        let f = f_alpha(&[k0, k1], alpha, FAlphaVariant::Paper).unwrap() / (2.0 * PI);
        let e = 3.0 + 2.0 * alpha;
        prop_assert!(f >= k0.min(k1).powf(e) * (1.0 - 1e-12));
        prop_assert!(f <= k0.max(k1).powf(e) * (1.0 + 1e-12));
    }
}
