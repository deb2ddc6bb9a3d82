use approx::assert_relative_eq;
use nalgebra::{DVector, Vector3};
use npsl_core::geometry::Surface;
use npsl_core::potential::{assemble, assemble_laplace_pair, evaluate_laplace_single, jump_check, KernelKind};
use npsl_core::quadrature::sh_degree_order;

#[test]
fn sphere_operators_are_diagonal_on_harmonics() {
    let surface = Surface::parse("sphere:1").unwrap();
    let nodes = surface.node_set(12).unwrap();
    let ops = assemble_laplace_pair(&surface, &nodes, &[KernelKind::LaplaceSingle, KernelKind::LaplaceNpStar]).unwrap();
    let s = ops[0].coefficient_matrix(&nodes);
    let k = ops[1].coefficient_matrix(&nodes);
    for i in 0..nodes.space_dim() {
        let (n, _) = sh_degree_order(i);
        let d = (2 * n + 1) as f64;
        for j in 0..nodes.space_dim() {
            let (es, ek) = if i == j { (-1.0 / d, 0.5 / d) } else { (0.0, 0.0) };
            assert!((s[(i, j)] - es).abs() < 1e-8, "S[{i},{j}] = {}", s[(i, j)]);
            assert!((k[(i, j)] - ek).abs() < 1e-8, "K*[{i},{j}] = {}", k[(i, j)]);
        }
    }
}

#[test]
fn sphere_radius_scales_single_layer() {
    let surface = Surface::parse("sphere:2").unwrap();
    let nodes = surface.node_set(10).unwrap();
    let s = assemble(&surface, &nodes, KernelKind::LaplaceSingle).unwrap().coefficient_matrix(&nodes);
    // S scales with the radius, K* does not.
    assert_relative_eq!(s[(0, 0)], -2.0, epsilon = 1e-10);
    assert_relative_eq!(s[(1, 1)], -2.0 / 3.0, epsilon = 1e-10);
}

#[test]
fn constant_density_potential_off_the_sphere() {
    let surface = Surface::parse("sphere:1").unwrap();
    let nodes = surface.node_set(16).unwrap();
    let one = DVector::from_element(nodes.len(), 1.0);
    let targets = [
        Vector3::new(0.0, 0.0, 3.0),
        Vector3::new(1.2, 0.5, -0.3),
        Vector3::new(1.01, 0.0, 0.0),
        Vector3::new(0.2, 0.1, 0.0),
        Vector3::new(0.0, 0.0, 0.995),
        Vector3::new(0.6, 0.6, 0.0),
    ];
    let vals = evaluate_laplace_single(&surface, &nodes, &one, &targets).unwrap();
    for (x, v) in targets.iter().zip(&vals) {
        let r = x.norm();
        let exact = if r > 1.0 { -1.0 / r } else { -1.0 };
        assert!((v - exact).abs() < 1e-6, "|x| = {r}: {v} vs {exact}");
    }
}

#[test]
fn curve_single_layer_of_constant_density() {
    // log r / (2 pi) against arc length on the unit circle gives log|x| outside, 0 inside.
    let surface = Surface::parse("circle:1").unwrap();
    let nodes = surface.node_set(128).unwrap();
    let one = DVector::from_element(nodes.len(), 1.0);
    let targets = [Vector3::new(2.0, 0.0, 0.0), Vector3::new(0.0, 1.05, 0.0), Vector3::new(0.3, -0.2, 0.0)];
    let vals = evaluate_laplace_single(&surface, &nodes, &one, &targets).unwrap();
    for (x, v) in targets.iter().zip(&vals) {
        let exact = x.norm().ln().max(0.0);
        assert!((v - exact).abs() < 1e-8, "{v} vs {exact}");
    }
}

#[test]
fn jump_relations_hold_on_an_ellipsoid() {
    let surface = Surface::parse("ellipsoid:1,1.2,0.9").unwrap();
    let nodes = surface.node_set(14).unwrap();
    let npstar = assemble(&surface, &nodes, KernelKind::LaplaceNpStar).unwrap();
    let phi = DVector::from_fn(nodes.len(), |i, _| {
        let x = nodes.positions[i];
        x.x * x.z + 0.5 * x.y
    });
    let subset: Vec<usize> = (0..nodes.len()).step_by(17).collect();
    let rep = jump_check(&surface, &nodes, &npstar, &phi, 1e-3, Some(&subset)).unwrap();
    assert!(rep.exterior < 1e-5, "{rep:?}");
    assert!(rep.interior < 1e-5, "{rep:?}");
}

#[test]
fn invalid_requests_are_rejected() {
    let surface = Surface::parse("sphere:1").unwrap();
    let nodes = surface.node_set(8).unwrap();
    let npstar = assemble(&surface, &nodes, KernelKind::LaplaceNpStar).unwrap();
    let phi = DVector::from_element(nodes.len(), 1.0);
    assert!(jump_check(&surface, &nodes, &npstar, &phi, 0.0, None).unwrap_err().is_validation());
    let short = DVector::from_element(3, 1.0);
    assert!(evaluate_laplace_single(&surface, &nodes, &short, &[Vector3::x()]).unwrap_err().is_validation());
    let err = assemble(&surface, &nodes, KernelKind::helmholtz_single(1.0.into())).unwrap_err();
    assert!(err.is_validation());
}
