use approx::assert_relative_eq;
use nalgebra::DVector;
use npsl_core::geometry::Surface;
use npsl_core::quadrature::sh_degree_order;
use npsl_core::spectrum::{
    converged_count, deepest_converged_band, eigensystem, multiplicity_groups, plasmonic_constant, plasmonic_lambda,
    SingleLayerSpectrum, SpectralBand,
};
use proptest::prelude::*;

#[test]
fn sphere_spectrum_and_weights() {
    let surface = Surface::parse("sphere:1").unwrap();
    let nodes = surface.node_set(12).unwrap();
    let (_, es) = eigensystem(&surface, &nodes).unwrap();
    assert_eq!(es.values.len(), nodes.space_dim());
    let mut i = 0;
    for n in 0..12usize {
        for _ in 0..(2 * n + 1) {
            let d = (2 * n + 1) as f64;
            assert!((es.values[i] - 0.5 / d).abs() < 1e-8, "lambda_{i} = {}", es.values[i]);
            assert!((es.weights[i] - d).abs() < 1e-6 * d, "c_{i} = {}", es.weights[i]);
            assert!(es.residuals[i] < 1e-8);
            i += 1;
        }
    }
    let groups = multiplicity_groups(&es.values, 1e-6);
    assert_eq!(*groups.last().unwrap(), 11);
    // Eigenfunctions are L2-normalized.
    for j in 0..5 {
        let f = es.functions.column(j).into_owned();
        assert_relative_eq!(nodes.inner(&f, &f), 1.0, epsilon = 1e-10);
    }
}

#[test]
fn ellipse_spectrum_is_symmetric_about_zero() {
    // On ellipses the nonzero NP eigenvalues come in pairs +-((a-b)/(a+b))^n / 2.
    let surface = Surface::parse("ellipse:2,1").unwrap();
    let nodes = surface.node_set(256).unwrap();
    let (_, es) = eigensystem(&surface, &nodes).unwrap();
    assert_relative_eq!(es.values[0], 0.5, epsilon = 1e-12);
    let q: f64 = 1.0 / 3.0;
    for n in 1..6 {
        let target = 0.5 * q.powi(n);
        for sign in [1.0, -1.0] {
            let hit = es.values.iter().any(|v| (v - sign * target).abs() < 1e-12);
            assert!(hit, "missing {}", sign * target);
        }
    }
}

#[test]
fn fractional_powers_compose() {
    let surface = Surface::parse("ellipsoid:1,1.2,0.8").unwrap();
    let nodes = surface.node_set(10).unwrap();
    let (ops, _) = eigensystem(&surface, &nodes).unwrap();
    let spec = SingleLayerSpectrum::with_blocks(&nodes, &ops.single, &ops.blocks).unwrap();
    let a = spec.power(0.3);
    let b = spec.power(-0.8);
    let ab = spec.power(-0.5);
    assert!((&a.matrix * &b.matrix - &ab.matrix).amax() < 1e-9);
    let id = spec.power(0.0).matrix;
    assert!((id - nalgebra::DMatrix::identity(nodes.space_dim(), nodes.space_dim())).amax() < 1e-10);
    // |D|^-1 = -2S on the well-resolved low degrees.
    let low = 25;
    let inv = spec.power(-1.0).matrix.view((0, 0), (low, low)).into_owned();
    let s = ops.single.coefficient_matrix(&nodes).view((0, 0), (low, low)).into_owned() * -2.0;
    let gap = (inv - &s).amax() / s.amax();
    assert!(gap < 1e-6, "{gap:e}");
}

#[test]
fn sphere_fractional_power_acts_by_degree() {
    let surface = Surface::parse("sphere:1").unwrap();
    let nodes = surface.node_set(10).unwrap();
    let (ops, _) = eigensystem(&surface, &nodes).unwrap();
    let p = SingleLayerSpectrum::new(&nodes, &ops.single).unwrap().power(0.5);
    for i in [0, 3, 17, 50] {
        let (n, _) = sh_degree_order(i);
        let mut e = DVector::zeros(nodes.space_dim());
        e[i] = 1.0;
        let out = p.apply_coeffs(&e);
        assert_relative_eq!(out[i], ((2 * n + 1) as f64 / 2.0).sqrt(), epsilon = 1e-9);
    }
}

#[test]
fn bands_and_convergence() {
    let band = SpectralBand::new(0.1, 0.2).unwrap();
    assert!(band.contains(0.1) && band.contains(0.2) && !band.contains(0.21));
    assert!(SpectralBand::new(0.3, 0.2).unwrap_err().is_validation());
    assert!(SpectralBand::new(f64::NAN, 0.2).is_err());

    let fine = [0.5, 0.2, -0.1, 0.05, 0.011];
    let coarse = [0.5, 0.2, -0.1, 0.05, 0.02];
    assert_eq!(converged_count(&coarse, &fine, 1e-3), 4);
    let b = deepest_converged_band(&fine, &coarse, 1e-3, 2).unwrap();
    assert_eq!((b.lambda_min, b.lambda_max), (0.05, 0.2));
    assert!(deepest_converged_band(&fine, &coarse, 1e-3, 4).is_err());
    assert!(deepest_converged_band(&fine, &[0.4], 1e-3, 1).is_err());
}

#[test]
fn plasmonic_map_rejects_degenerate_input() {
    assert!(plasmonic_constant(0.5, 1.0).is_err());
    assert!(plasmonic_constant(0.1, 0.0).is_err());
    assert!(plasmonic_lambda(1.0, 1.0).is_err());
    // The sphere dipole resonance sits at eps = -2.
    assert_relative_eq!(plasmonic_constant(1.0 / 6.0, 1.0).unwrap(), -2.0, epsilon = 1e-14);
}

proptest! {
    #[test]
    fn plasmonic_maps_are_inverse(lambda in -0.49f64..0.49, gm in 0.1f64..10.0) {
        let gc = plasmonic_constant(lambda, gm).unwrap();
        let back = plasmonic_lambda(gc, gm).unwrap();
        prop_assert!((back - lambda).abs() < 1e-12);
        // Inside (-1/2, 1/2) the inclusion coefficient is negative.
        prop_assert!(gc < 0.0);
    }
}
