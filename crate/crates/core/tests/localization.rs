use approx::assert_relative_eq;
use nalgebra::DVector;
use npsl_core::geometry::Surface;
use npsl_core::localization::{
    band_local_mass, bump_function, feature_size, localization_ratio, qe_variance, variety_weight, BumpSpec,
};
use npsl_core::selftest::Fixture;
use npsl_core::spectrum::SpectralBand;
use proptest::prelude::*;
use std::sync::OnceLock;

fn sphere() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| Fixture::new("sphere:1", 16).unwrap())
}

#[test]
fn bump_has_unit_integral_and_support() {
    let f = sphere();
    let spec = BumpSpec::at(&f.surface, &f.surface.named_point("pole").unwrap(), 0.5).unwrap();
    let b = bump_function(&f.nodes, &spec).unwrap();
    assert_relative_eq!(b.dot(&f.nodes.weights), 1.0, epsilon = 1e-12);
    for (x, v) in f.nodes.positions.iter().zip(b.iter()) {
        assert!(*v >= 0.0);
        if (x - spec.center).norm() >= 0.5 {
            assert_eq!(*v, 0.0);
        }
    }
}

#[test]
fn tiny_bumps_are_degenerate() {
    let f = sphere();
    let spec = BumpSpec::at(&f.surface, &f.surface.named_point("equator").unwrap(), 0.05).unwrap();
    let err = bump_function(&f.nodes, &spec).unwrap_err();
    assert!(!err.is_validation());
    assert!(BumpSpec::new(nalgebra::Vector3::x(), 0.0).unwrap_err().is_validation());
}

#[test]
fn feature_size_of_spheres() {
    assert_relative_eq!(feature_size(&sphere().nodes), 1.0, epsilon = 1e-12);
    let big = Surface::parse("sphere:3").unwrap().node_set(8).unwrap();
    assert_relative_eq!(feature_size(&big), 3.0, epsilon = 1e-12);
}

#[test]
fn sphere_masses_are_isotropic() {
    let f = sphere();
    let frac = f.power(-0.5).unwrap();
    let band = SpectralBand::new(0.03, 0.11).unwrap();
    let p = f.surface.named_point("pole").unwrap();
    let q = f.surface.named_point("equator").unwrap();
    let rep = localization_ratio(&f.es, &f.surface, &f.nodes, &frac, &p, &q, &band, 0.6).unwrap();
    assert_relative_eq!(rep.empirical_ratio, 1.0, epsilon = 1e-8);
    assert_relative_eq!(rep.predicted_ratio, 1.0, epsilon = 1e-10);
    assert_eq!(rep.band.count, rep.contributions.len());
    // Degrees 2..=7 fill the band.
    assert_eq!(rep.band.count, (2..=7).map(|n| 2 * n + 1).sum::<usize>());
}

#[test]
fn mass_is_invariant_under_eigenfunction_rescaling() {
    let f = sphere();
    let frac = f.power(0.0).unwrap();
    let band = SpectralBand::new(0.05, 0.2).unwrap();
    let spec = BumpSpec::at(&f.surface, &f.surface.named_point("pole").unwrap(), 0.7).unwrap();
    let bump = bump_function(&f.nodes, &spec).unwrap();
    let before = band_local_mass(&f.es, &f.nodes, &band, &bump, &frac).unwrap().total;
    let mut es = f.es.clone();
    for (j, t) in [(1usize, 3.0), (4, -0.25), (7, 10.0)] {
        es.coeffs.column_mut(j).scale_mut(t);
        es.functions.column_mut(j).scale_mut(t);
    }
    let after = band_local_mass(&es, &f.nodes, &band, &bump, &frac).unwrap().total;
    assert_relative_eq!(before, after, max_relative = 1e-12);
}

#[test]
fn spheroid_tip_concentrates_mass() {
    let f = Fixture::new("ellipsoid:1,1,2", 24).unwrap();
    let frac = f.power(-0.5).unwrap();
    let band = SpectralBand::new(0.03, 0.1).unwrap();
    let p = f.surface.named_point("pole").unwrap();
    let q = f.surface.named_point("equator").unwrap();
    let delta = 0.4 * feature_size(&f.nodes);
    let rep = localization_ratio(&f.es, &f.surface, &f.nodes, &frac, &p, &q, &band, delta).unwrap();
    assert!(rep.empirical_ratio > 1.0, "{}", rep.empirical_ratio);
    assert!(rep.predicted_ratio > 1.0 && rep.liouville_ratio > rep.predicted_ratio);
}

#[test]
fn curves_have_no_localization_ratio() {
    let f = Fixture::new("ellipse:0.6,0.4", 64).unwrap();
    let frac = f.power(-0.5).unwrap();
    let band = SpectralBand::new(0.0, 0.5).unwrap();
    let p = f.surface.named_point("pole").unwrap();
    let err = localization_ratio(&f.es, &f.surface, &f.nodes, &frac, &p, &p, &band, 0.5).unwrap_err();
    assert!(err.is_validation());
}

#[test]
fn constant_observable_has_unit_elements() {
    let f = sphere();
    let half = f.power(-0.5).unwrap();
    let band = SpectralBand::new(0.03, 0.1).unwrap();
    let one = DVector::from_element(f.nodes.len(), 1.0);
    let rep = qe_variance(&f.es, &f.surface, &f.nodes, &band, &one, &half).unwrap();
    assert_relative_eq!(rep.m_pred, 1.0, epsilon = 1e-12);
    assert!(rep.elements.iter().all(|e| (e - 1.0).abs() < 1e-12));
    assert!(rep.variance < 1e-24);
    let wrong = f.power(0.5).unwrap();
    assert!(qe_variance(&f.es, &f.surface, &f.nodes, &band, &one, &wrong).unwrap_err().is_validation());
}

#[test]
fn variety_weight_is_a_probability_density() {
    let surface = Surface::parse("ellipsoid:1,1.2,2").unwrap();
    let nodes = surface.node_set(10).unwrap();
    let w = variety_weight(&surface, &nodes).unwrap();
    assert_relative_eq!(w.dot(&nodes.weights), 1.0, epsilon = 1e-12);
    assert!(w.iter().all(|v| *v > 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bump_integral_is_one_anywhere(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0, delta in 0.5f64..1.5) {
        let v = nalgebra::Vector3::new(x, y, z);
        prop_assume!(v.norm() > 0.1);
        let f = sphere();
        let spec = BumpSpec::new(v.normalize(), delta).unwrap();
        let b = bump_function(&f.nodes, &spec).unwrap();
        prop_assert!((b.dot(&f.nodes.weights) - 1.0).abs() < 1e-12);
    }
}
