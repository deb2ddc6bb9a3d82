use approx::assert_relative_eq;
use nalgebra::Vector3;
use num_complex::Complex64;
use npsl_core::geometry::Surface;
use npsl_core::spectrum::eigensystem;
use npsl_core::helmholtz::{
    drift_slope, find_resonance, is_inside, plasmonic_lambda_complex, scattered_field, solve_scattering,
    static_deviation, Incident, MediumParams,
};

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn medium(mu1: f64, omega: f64) -> MediumParams {
    MediumParams::new(1.0, 1.0, c(mu1), c(1.0), omega).unwrap()
}

fn log_omegas() -> Vec<f64> {
    (0..5).map(|i| 10f64.powf(-3.0 + 0.5 * f64::from(i))).collect()
}

#[test]
fn sphere_resonances_match_the_plasmonic_constants() {
    let surface = Surface::parse("sphere:1").unwrap();
    let nodes = surface.node_set(10).unwrap();
    // Degree n resonates at mu1 = -(n + 1) / n.
    for (lambda, mu) in [(1.0 / 6.0, -2.0), (0.1, -1.5)] {
        let r = find_resonance(&surface, &nodes, &medium(1.0, 1e-4), lambda, 1e-12).unwrap();
        assert!((r.mu1 - c(mu)).norm() < 1e-6, "{lambda}: {}", r.mu1);
        assert!(r.drift < 1e-6);
        let back = plasmonic_lambda_complex(r.mu1, c(1.0)).unwrap();
        assert!((back.re - lambda).abs() < 1e-6);
    }
}

#[test]
fn eigenvalue_drift_is_quadratic() {
    let surface = Surface::parse("sphere:1").unwrap();
    let nodes = surface.node_set(10).unwrap();
    let rep = drift_slope(&surface, &nodes, &medium(1.0, 0.0), 1.0 / 6.0, &log_omegas(), 1e-12).unwrap();
    assert!((1.8..=2.2).contains(&rep.slope), "slope {}", rep.slope);
    assert_eq!(rep.points.len(), 5);
    for p in &rep.points {
        assert!(p.residual < 1e-8, "{p:?}");
    }
}

#[test]
fn eigenfunction_drift_on_a_spheroid() {
    let surface = Surface::parse("ellipsoid:1,1,1.5").unwrap();
    let nodes = surface.node_set(10).unwrap();
    let (_, es) = eigensystem(&surface, &nodes).unwrap();
    // Second eigenvalue: a simple axisymmetric mode.
    let lambda = es.values[1];
    let rep = drift_slope(&surface, &nodes, &medium(1.0, 0.0), lambda, &log_omegas(), 1e-12).unwrap();
    assert!((1.8..=2.2).contains(&rep.slope), "slope {}", rep.slope);
    assert!((1.8..=2.2).contains(&rep.eigenfunction_slope), "eigenfunction slope {}", rep.eigenfunction_slope);
    assert!(rep.excluded.is_empty());
}

#[test]
fn operator_deviation_on_mean_free_densities_is_quadratic() {
    let surface = Surface::parse("sphere:1").unwrap();
    let nodes = surface.node_set(10).unwrap();
    let a = static_deviation(&surface, &nodes, &medium(-2.0, 1e-2)).unwrap();
    let b = static_deviation(&surface, &nodes, &medium(-2.0, 1e-3)).unwrap();
    // Well within the O(omega) bound: the first-order term only sees the mean.
    assert!(a < 1e-2);
    assert!((a / b - 100.0).abs() < 5.0, "ratio {}", a / b);
}

#[test]
fn zero_contrast_and_rayleigh_limit() {
    let surface = Surface::parse("sphere:1").unwrap();
    let nodes = surface.node_set(10).unwrap();
    let omega = 1e-2;
    let targets: Vec<Vector3<f64>> =
        (0..4).map(|i| {
            let th = 0.4 + 0.7 * f64::from(i);
            Vector3::new(3.0 * th.sin(), 0.0, 3.0 * th.cos())
        }).collect();
    let incident = Incident::PlaneWave { direction: [0.0, 0.0, 1.0] };
    let (_, zero) = scattered_field(&surface, &nodes, &medium(1.0, omega), incident, &targets).unwrap();
    assert!(zero.iter().all(|u| u.norm() < 1e-10));

    let mu1 = 3.0;
    let (sol, vals) = scattered_field(&surface, &nodes, &medium(mu1, omega), incident, &targets).unwrap();
    assert!(!sol.near_resonant);
    let amp = (mu1 - 1.0) / (mu1 + 2.0);
    for (x, u) in targets.iter().zip(&vals) {
        let r = x.norm();
        let dipole = -Complex64::i() * omega * amp * (x.z / r) / (r * r);
        assert!((u - dipole).norm() < 0.05 * dipole.norm(), "{u} vs {dipole}");
    }
    assert!(sol.continuity_error(&surface, &nodes, 7).unwrap() < 1e-6);
}

#[test]
fn point_source_transmission_converges_to_continuity() {
    let surface = Surface::parse("ellipsoid:1,0.8,1.2").unwrap();
    let params = MediumParams::new(1.0, 1.0, Complex64::new(2.0, 0.1), c(1.5), 0.05).unwrap();
    let source = Incident::PointSource { position: [0.0, 0.0, 3.0] };
    let errs: Vec<f64> = [8, 12]
        .iter()
        .map(|&res| {
            let nodes = surface.node_set(res).unwrap();
            let sol = solve_scattering(&surface, &nodes, &params, source).unwrap();
            assert!(sol.condition.is_finite());
            sol.continuity_error(&surface, &nodes, 5).unwrap()
        })
        .collect();
    assert!(errs[1] < 1e-5 && errs[1] < errs[0] / 10.0, "{errs:?}");
}

#[test]
fn inside_test() {
    let surface = Surface::parse("ellipsoid:1,1,2").unwrap();
    let nodes = surface.node_set(10).unwrap();
    assert!(is_inside(&surface, &nodes, &Vector3::new(0.0, 0.0, 1.9)));
    assert!(!is_inside(&surface, &nodes, &Vector3::new(0.0, 0.0, 2.1)));
    assert!(!is_inside(&surface, &nodes, &Vector3::new(1.05, 0.0, 0.0)));
}

#[test]
fn invalid_parameters_are_rejected() {
    assert!(MediumParams::new(0.0, 1.0, c(1.0), c(1.0), 0.1).unwrap_err().is_validation());
    assert!(MediumParams::new(1.0, 1.0, c(1.0), c(1.0), -0.1).unwrap_err().is_validation());
    assert!(MediumParams::new(1.0, 1.0, c(f64::NAN), c(1.0), 0.1).is_err());
    let surface = Surface::parse("sphere:1").unwrap();
    let nodes = surface.node_set(8).unwrap();
    let incident = Incident::PlaneWave { direction: [1.0, 0.0, 0.0] };
    assert!(solve_scattering(&surface, &nodes, &medium(2.0, 0.0), incident).unwrap_err().is_validation());
    assert!(solve_scattering(&surface, &nodes, &medium(2.0, 1.0), incident).unwrap_err().is_validation());
    let curve = Surface::parse("ellipse:2,1").unwrap();
    let cn = curve.node_set(64).unwrap();
    assert!(solve_scattering(&curve, &cn, &medium(2.0, 0.01), incident).unwrap_err().is_validation());
    assert!(drift_slope(&surface, &nodes, &medium(1.0, 0.0), 1.0 / 6.0, &[1e-3, 1e-2], 1e-12).is_err());
    assert_relative_eq!(plasmonic_lambda_complex(c(-2.0), c(1.0)).unwrap().re, 1.0 / 6.0);
}
