use std::f64::consts::PI;

use approx::assert_relative_eq;
use nalgebra::{DVector, Vector3};
use npsl_core::geometry::{ChartPoint, Surface, SurfaceSpec};
use proptest::prelude::*;

#[test]
fn shorthand_round_trips_through_labels() {
    for text in ["sphere:2", "ellipsoid:1,1.5,2", "ellipse:2,1", "revolution:1,0.1", "star:1,0.2,0.1"] {
        let spec = SurfaceSpec::parse(text).unwrap();
        assert_eq!(SurfaceSpec::parse(&spec.label()).unwrap(), spec);
    }
    assert_eq!(SurfaceSpec::parse("spheroid:1,1,3").unwrap(), SurfaceSpec::Ellipsoid { a: 1.0, b: 1.0, c: 3.0 });
}

#[test]
fn malformed_specs_are_rejected() {
    for text in ["blob:1", "sphere:x", "ellipsoid:1,2", "sphere:-1", "ellipse:0,1", "star:1,0.2"] {
        let r = SurfaceSpec::parse(text).and_then(Surface::new);
        assert!(r.is_err(), "{text} should fail");
        assert!(r.unwrap_err().is_validation());
    }
}

#[test]
fn sphere_jet_is_umbilic() {
    let s = Surface::parse("sphere:2").unwrap();
    let jet = s.jet(&ChartPoint::new(0, [1.1, 0.7])).unwrap();
    assert_relative_eq!(jet.curvatures[0], 0.5, epsilon = 1e-10);
    assert_relative_eq!(jet.curvatures[1], 0.5, epsilon = 1e-10);
    assert_relative_eq!(jet.position.norm(), 2.0, epsilon = 1e-12);
    assert_relative_eq!(jet.normal.dot(&jet.position), 2.0, epsilon = 1e-12);
}

#[test]
fn spheroid_curvatures_at_marked_points() {
    let s = Surface::parse("ellipsoid:1,1,2").unwrap();
    let pole = s.jet(&s.named_point("pole").unwrap()).unwrap();
    assert_relative_eq!(pole.position, Vector3::new(0.0, 0.0, 2.0), epsilon = 1e-12);
    // c / a^2 at the tip.
    assert_relative_eq!(pole.curvatures[0], 2.0, epsilon = 1e-8);
    assert_relative_eq!(pole.curvatures[1], 2.0, epsilon = 1e-8);
    let eq = s.jet(&s.named_point("equator").unwrap()).unwrap();
    // a / c^2 along the meridian, 1 / a around the equator.
    assert_relative_eq!(eq.curvatures[0], 0.25, epsilon = 1e-8);
    assert_relative_eq!(eq.curvatures[1], 1.0, epsilon = 1e-8);
    assert_relative_eq!(eq.mean_curvature, 0.625, epsilon = 1e-8);
}

#[test]
fn ellipse_curvature_at_vertices() {
    let s = Surface::parse("ellipse:2,1").unwrap();
    let end = s.jet(&s.named_point("equator").unwrap()).unwrap();
    assert_relative_eq!(end.curvatures[0], 2.0, epsilon = 1e-10);
    let top = s.jet(&s.named_point("pole").unwrap()).unwrap();
    assert_relative_eq!(top.curvatures[0], 0.25, epsilon = 1e-10);
}

#[test]
fn quadrature_areas() {
    let sphere = Surface::parse("sphere:1").unwrap().node_set(16).unwrap();
    assert_relative_eq!(sphere.area(), 4.0 * PI, epsilon = 1e-12);
    assert_eq!(sphere.len(), 2 * 16 * 16);

    let e = (1.0f64 - 0.25).sqrt();
    let spheroid = 2.0 * PI * (1.0 + 2.0 / e * e.asin());
    let nodes = Surface::parse("ellipsoid:1,1,2").unwrap().node_set(24).unwrap();
    assert_relative_eq!(nodes.area(), spheroid, max_relative = 1e-10);

    let ellipse = Surface::parse("ellipse:2,1").unwrap().node_set(128).unwrap();
    assert_relative_eq!(ellipse.area(), 9.688_448_220_547_675, max_relative = 1e-12);
}

#[test]
fn harmonic_analysis_inverts_synthesis() {
    let nodes = Surface::parse("ellipsoid:1,1.3,0.8").unwrap().node_set(12).unwrap();
    let m = nodes.space_dim();
    let c = DVector::from_fn(m, |i, _| ((i * 7 + 3) % 11) as f64 - 5.0);
    let back = nodes.analyze(&nodes.synthesize(&c));
    assert_relative_eq!(back, c, epsilon = 1e-10);
}

#[test]
fn resolution_floor() {
    let s = Surface::parse("sphere:1").unwrap();
    assert!(s.node_set(4).unwrap_err().is_validation());
}

#[test]
fn axisymmetry_is_detected() {
    assert!(Surface::parse("ellipsoid:1,1,3").unwrap().is_axisymmetric());
    assert!(!Surface::parse("ellipsoid:1,2,3").unwrap().is_axisymmetric());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jets_are_orthonormal_frames(theta in 0.3f64..2.8, phi in -3.0f64..3.0, chart in 0usize..2) {
        let s = Surface::parse("ellipsoid:1,1.5,2").unwrap();
        let jet = s.jet(&ChartPoint::new(chart, [theta, phi])).unwrap();
        prop_assert!((jet.normal.norm() - 1.0).abs() < 1e-12);
        for t in &jet.tangents {
            prop_assert!(t.dot(&jet.normal).abs() < 1e-10);
        }
        prop_assert!(jet.metric.determinant() > 0.0);
        prop_assert!(jet.curvatures[0] <= jet.curvatures[1]);
        prop_assert!(jet.curvatures[0] > 0.0);
        // Principal directions are metric-orthonormal.
        let gram = jet.directions.transpose() * &jet.metric * &jet.directions;
        prop_assert!((gram - nalgebra::DMatrix::identity(2, 2)).amax() < 1e-10);
    }

    #[test]
    fn chart_change_keeps_point_and_pairing(theta in 0.6f64..2.5, phi in -2.5f64..2.5, a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let s = Surface::parse("ellipsoid:1,1.2,1.7").unwrap();
        let p = ChartPoint::new(0, [theta, phi]);
        let (q, eta) = s.change_chart(&p, [a, b], 1).unwrap();
        prop_assert!((s.position(&p) - s.position(&q)).norm() < 1e-12);
        // A covector pairs with tangent vectors the same way in both charts.
        let (jp, jq) = (s.jet(&p).unwrap(), s.jet(&q).unwrap());
        if q.u[0].sin().abs() > 0.2 {
            for (k, v) in jq.tangents.iter().enumerate() {
                let coords = tangent_coords(&jp.tangents, v);
                let lhs = a * coords[0] + b * coords[1];
                prop_assert!((lhs - eta[k]).abs() < 1e-8 * (1.0 + lhs.abs()));
            }
        }
    }
}

fn tangent_coords(basis: &[Vector3<f64>], v: &Vector3<f64>) -> [f64; 2] {
    let g = nalgebra::Matrix2::new(basis[0].dot(&basis[0]), basis[0].dot(&basis[1]), basis[1].dot(&basis[0]), basis[1].dot(&basis[1]));
    let r = g.try_inverse().unwrap() * nalgebra::Vector2::new(basis[0].dot(v), basis[1].dot(v));
    [r[0], r[1]]
}
