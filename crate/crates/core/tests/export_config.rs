use std::path::PathBuf;

use nalgebra::DMatrix;
use npsl_core::config::{parse_point, RunConfig};
use npsl_core::export::{num, read_matrix, spectrum_table, write_eigenfunctions, write_operator, json_with_digest};
use npsl_core::geometry::Surface;
use npsl_core::potential::{assemble, KernelKind};
use npsl_core::spectrum::eigensystem;
use proptest::prelude::*;

#[test]
fn config_parses_and_validates() {
    let cfg = RunConfig::from_toml("surface = \"spheroid:1,1,3\"\nresolution = 24\nalpha = -0.5\n").unwrap();
    cfg.validate().unwrap();
    assert_eq!(cfg.resolution, Some(24));
    assert!(cfg.surface().unwrap().is_axisymmetric());

    let table = RunConfig::from_toml("resolution = 16\n[surface]\nkind = \"ellipsoid\"\na = 1.0\nb = 1.0\nc = 3.0\n").unwrap();
    assert_eq!(table.surface().unwrap().spec(), cfg.surface().unwrap().spec());
}

#[test]
fn unknown_keys_and_bad_ranges_are_rejected() {
    assert!(RunConfig::from_toml("surfce = \"sphere\"\n").unwrap_err().is_validation());
    for text in ["resolution = 4", "tol = -1.0", "band_min = 0.2\nband_max = 0.1", "omegas = []", "resolution = 16\ncoarse_resolution = 20"] {
        let cfg = RunConfig::from_toml(text).unwrap();
        assert!(cfg.validate().unwrap_err().is_validation(), "{text}");
    }
}

#[test]
fn digest_ignores_output_path_and_shorthand_form() {
    let a = RunConfig::from_toml("surface = \"spheroid:1,1,3\"\nresolution = 16\nout = \"a.csv\"\n").unwrap();
    let b = RunConfig::from_toml("resolution = 16\nout = \"b.csv\"\n[surface]\nkind = \"ellipsoid\"\na = 1.0\nb = 1.0\nc = 3.0\n").unwrap();
    assert_eq!(a.digest(), b.digest());
    assert_eq!(a.digest().len(), 64);
    let c = RunConfig { resolution: Some(17), ..a.clone() };
    assert_ne!(a.digest(), c.digest());
}

#[test]
fn merge_prefers_the_overlay() {
    let mut base = RunConfig::from_toml("surface = \"sphere:1\"\nresolution = 16\nalpha = 0.5\n").unwrap();
    base.merge(RunConfig { resolution: Some(20), out: Some(PathBuf::from("x")), ..RunConfig::default() });
    assert_eq!(base.resolution, Some(20));
    assert_eq!(base.alpha, Some(0.5));
    assert!(base.out.is_some());
}

#[test]
fn points_by_name_or_coordinates() {
    let s = Surface::parse("sphere:1").unwrap();
    assert_eq!(parse_point(&s, "1:0.5,2").unwrap().chart, 1);
    assert!(parse_point(&s, "pole").is_ok());
    for bad in ["north", "2:0,0", "0:1", "x:1,2"] {
        assert!(parse_point(&s, bad).unwrap_err().is_validation(), "{bad}");
    }
}

#[test]
fn tables_carry_the_digest() {
    let s = Surface::parse("sphere:1").unwrap();
    let nodes = s.node_set(8).unwrap();
    let (_, es) = eigensystem(&s, &nodes).unwrap();
    let text = spectrum_table(&es, "abc").unwrap().render();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# config_digest=abc"));
    assert_eq!(lines.next(), Some("index,lambda,c_weight,multiplicity_group"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "0");
    assert!((first[1].parse::<f64>().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(text.lines().count(), 2 + es.values.len());

    let json = json_with_digest(&serde_json::json!({ "x": 1 }), "abc").unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["config_digest"], "abc");
}

#[test]
fn binary_dumps_round_trip_and_detect_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let s = Surface::parse("ellipsoid:1,1.2,0.9").unwrap();
    let nodes = s.node_set(8).unwrap();
    let op = assemble(&s, &nodes, KernelKind::LaplaceNpStar).unwrap();
    let path = dir.path().join("k.bin");
    let header = write_operator(&path, &op, "d").unwrap();
    assert_eq!((header.rows, header.cols), (nodes.len(), nodes.space_dim()));
    let back: DMatrix<f64> = read_matrix(&path).unwrap();
    assert_eq!(back, op.range);

    let (_, es) = eigensystem(&s, &nodes).unwrap();
    let ef = dir.path().join("phi.bin");
    write_eigenfunctions(&ef, &es, "d").unwrap();
    assert_eq!(read_matrix(&ef).unwrap(), es.functions);

    let mut bytes = std::fs::read(&path).unwrap();
    bytes[11] ^= 0x40;
    std::fs::write(&path, bytes).unwrap();
    assert!(read_matrix(&path).unwrap_err().is_validation());
}

proptest! {
    #[test]
    fn numbers_round_trip_exactly(x in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
}
