use std::path::PathBuf;

use nalgebra::{DVector, Vector3};
use num_complex::Complex64;
use npsl_core::config::{parse_point, RunConfig};
use npsl_core::error::{Error, Result};
use npsl_core::export::{
    drift_table, field_table, json_with_digest, spectrum_table, trajectory_table, variety_table, write_eigenfunctions,
    write_operator, write_text,
};
use npsl_core::geometry::{NodeSet, Surface};
use npsl_core::helmholtz::{drift_slope, scattered_field, Incident, MediumParams};
use npsl_core::localization::{feature_size, localization_ratio, qe_variance};
use npsl_core::selftest::Suite;
use npsl_core::spectrum::{
    converged_count, deepest_converged_band, eigensystem, weyl_diagnostic, EigenSystem, LaplaceOperators,
    SingleLayerSpectrum, SpectralBand,
};
use npsl_core::symbol::{
    assumption_a_margin, f_alpha, integrate_flow, variety_sample, weighted_variety_volume, CotangentPoint,
    FAlphaVariant, HamiltonianKind, VarietySample,
};
use serde::Serialize;

const DEFAULT_SEED: u64 = 1;

pub enum Kind {
    SurfaceInfo,
    Spectrum { eigenfunctions: Option<PathBuf>, operators: Option<PathBuf> },
    Weyl,
    Flow,
    Variety { paper_measure: bool },
    Falpha,
    Localize,
    QeVariance,
    HelmholtzDrift,
    Scatter,
    Selftest { criteria: Option<Vec<usize>> },
}

pub fn execute(kind: &Kind, cfg: &RunConfig) -> Result<String> {
    match kind {
        Kind::SurfaceInfo => surface_info(cfg),
        Kind::Spectrum { eigenfunctions, operators } => spectrum(cfg, eigenfunctions.as_ref(), operators.as_ref()),
        Kind::Weyl => weyl(cfg),
        Kind::Flow => flow(cfg),
        Kind::Variety { paper_measure } => variety(cfg, *paper_measure),
        Kind::Falpha => falpha(cfg),
        Kind::Localize => localize(cfg),
        Kind::QeVariance => qe(cfg),
        Kind::HelmholtzDrift => helmholtz_drift(cfg),
        Kind::Scatter => scatter(cfg),
        Kind::Selftest { criteria } => selftest(cfg, criteria.as_deref()),
    }
}

fn default_resolution(surface: &Surface, surface_default: usize) -> usize {
    if surface.dim() == 2 {
        256
    } else {
        surface_default
    }
}

/// Surface, nodes and the config with defaults filled in.
fn discretize(cfg: &RunConfig, surface_default: usize) -> Result<(Surface, NodeSet, RunConfig)> {
    let surface = cfg.surface()?;
    let res = cfg.resolution.unwrap_or_else(|| default_resolution(&surface, surface_default));
    let nodes = surface.node_set(res)?;
    let mut resolved = cfg.clone();
    resolved.resolution = Some(res);
    Ok((surface, nodes, resolved))
}

fn write_json<T: Serialize>(cfg: &RunConfig, value: &T, digest: &str) -> Result<()> {
    if let Some(path) = &cfg.out {
        write_text(path, &json_with_digest(value, digest)?)?;
    }
    Ok(())
}

fn require_surface3(surface: &Surface, what: &str) -> Result<()> {
    if surface.dim() != 3 {
        return Err(Error::Validation(format!("{what} needs a surface in space, not a curve")));
    }
    Ok(())
}

#[derive(Serialize)]
struct SurfaceInfo {
    surface: String,
    dim: usize,
    nodes: usize,
    area: f64,
    feature_size: f64,
    bounding_radius: f64,
    axisymmetric: bool,
    /// Smallest |r| over nodes and directions (surfaces only).
    symbol_margin: Option<f64>,
    pole_curvatures: Vec<f64>,
    equator_curvatures: Vec<f64>,
}

fn surface_info(cfg: &RunConfig) -> Result<String> {
    let (surface, nodes, resolved) = discretize(cfg, 24)?;
    let digest = resolved.digest();
    let curv = |name: &str| -> Result<Vec<f64>> { Ok(surface.jet(&surface.named_point(name)?)?.curvatures.clone()) };
    let info = SurfaceInfo {
        surface: surface.spec().label(),
        dim: surface.dim(),
        nodes: nodes.len(),
        area: nodes.area(),
        feature_size: feature_size(&nodes),
        bounding_radius: surface.bounding_radius(),
        axisymmetric: surface.is_axisymmetric(),
        symbol_margin: if surface.dim() == 3 { Some(assumption_a_margin(&surface, &nodes, 64)?) } else { None },
        pole_curvatures: curv("pole")?,
        equator_curvatures: curv("equator")?,
    };
    write_json(cfg, &info, &digest)?;
    Ok(format!(
        "{}: dim {}, {} nodes, {} {:.10}, symbol margin {}",
        info.surface,
        info.dim,
        info.nodes,
        if info.dim == 2 { "length" } else { "area" },
        info.area,
        info.symbol_margin.map_or("n/a".to_string(), |m| format!("{m:.6}"))
    ))
}

fn spectrum(cfg: &RunConfig, eigenfunctions: Option<&PathBuf>, operators: Option<&PathBuf>) -> Result<String> {
    let (surface, nodes, resolved) = discretize(cfg, 24)?;
    let digest = resolved.digest();
    let (ops, es) = eigensystem(&surface, &nodes)?;
    if let Some(path) = &cfg.out {
        spectrum_table(&es, &digest)?.write(path)?;
    }
    if let Some(path) = eigenfunctions {
        write_eigenfunctions(path, &es, &digest)?;
    }
    if let Some(prefix) = operators {
        let base = prefix.to_string_lossy();
        write_operator(&PathBuf::from(format!("{base}.single.bin")), &ops.single, &digest)?;
        write_operator(&PathBuf::from(format!("{base}.npstar.bin")), &ops.npstar, &digest)?;
    }
    Ok(format!(
        "{}: N = {}, {} eigenvalues, lambda_0 = {}, asymmetry {:.2e}",
        es.surface,
        nodes.len(),
        es.values.len(),
        es.values[0],
        es.asymmetry
    ))
}

#[derive(Serialize)]
struct WeylOutput {
    #[serde(flatten)]
    report: npsl_core::spectrum::WeylReport,
    converged: usize,
}

fn weyl(cfg: &RunConfig) -> Result<String> {
    let (surface, nodes, mut resolved) = discretize(cfg, 32)?;
    let res = resolved.resolution.unwrap_or(32);
    let coarse_res = cfg.coarse_resolution.unwrap_or(if surface.dim() == 2 { res / 2 } else { res.saturating_sub(8) });
    let (j_min, j_max) = (cfg.j_min.unwrap_or(20), cfg.j_max.unwrap_or(200));
    resolved.coarse_resolution = Some(coarse_res);
    resolved.j_min = Some(j_min);
    resolved.j_max = Some(j_max);
    let digest = resolved.digest();
    let (_, es) = eigensystem(&surface, &nodes)?;
    let (_, coarse) = eigensystem(&surface, &surface.node_set(coarse_res)?)?;
    let converged = converged_count(&coarse.values, &es.values, 1e-3);
    if converged < j_max {
        eprintln!("warning: only {converged} eigenvalues have converged; the fit window ends at {j_max}");
    }
    let volume = if surface.dim() == 3 { Some(phase_volume(&surface, &nodes)?) } else { None };
    let report = weyl_diagnostic(&es.values, surface.dim(), j_min, j_max, volume)?;
    write_json(cfg, &WeylOutput { report, converged }, &digest)?;
    Ok(format!(
        "slope {:.6} (expected {:.6}) over [{j_min}, {j_max}], counting ratio {:.4}, {converged} converged",
        report.slope, report.expected_slope, report.volume_ratio
    ))
}

/// `int int r^2 dw dsigma` over the boundary.
fn phase_volume(surface: &Surface, nodes: &NodeSet) -> Result<f64> {
    let mut total = 0.0;
    for (d, w) in nodes.directions.iter().zip(nodes.weights.iter()) {
        let vs = variety_sample(&surface.jet(&Surface::chart_point_for_direction(d))?, 256)?;
        total += 2.0 * vs.liouville_volume(-0.5) * w;
    }
    Ok(total)
}

fn flow(cfg: &RunConfig) -> Result<String> {
    let surface = cfg.surface()?;
    require_surface3(&surface, "the symbol flow")?;
    let mut resolved = cfg.clone();
    let p_text = cfg.p.clone().unwrap_or_else(|| "0:1,0.3".into());
    let xi = cfg.xi.unwrap_or([0.3, 1.0]);
    let kind_text = cfg.hamiltonian.clone().unwrap_or_else(|| "raw".into());
    let t_end = cfg.t_end.unwrap_or(100.0);
    let tol = cfg.tol.unwrap_or(1e-8);
    resolved.p = Some(p_text.clone());
    resolved.xi = Some(xi);
    resolved.hamiltonian = Some(kind_text.clone());
    resolved.t_end = Some(t_end);
    resolved.tol = Some(tol);
    let digest = resolved.digest();
    let base = parse_point(&surface, &p_text)?;
    let kind = HamiltonianKind::parse(&kind_text)?;
    let init = CotangentPoint::on_level(&surface, base, xi, 1.0)?;
    let traj = integrate_flow(&surface, &init, kind, t_end, tol)?;
    if let Some(path) = &cfg.out {
        trajectory_table(&traj, &digest)?.write(path)?;
    }
    Ok(format!(
        "{} flow to t = {t_end}: {} steps ({} rejected), max relative H drift {:.3e}",
        kind_text, traj.accepted_steps, traj.rejected_steps, traj.max_drift
    ))
}

fn variety(cfg: &RunConfig, paper_measure: bool) -> Result<String> {
    let alpha = cfg.alpha.unwrap_or(0.0);
    let n = cfg.angular_res.unwrap_or(4096);
    let mut resolved = cfg.clone();
    resolved.alpha = Some(alpha);
    resolved.angular_res = Some(n);
    let vs = match cfg.kappas {
        Some(k) => VarietySample::from_curvatures(k, n)?,
        None => {
            let surface = cfg.surface()?;
            require_surface3(&surface, "the characteristic variety")?;
            let p_text = cfg.p.clone().unwrap_or_else(|| "equator".into());
            resolved.p = Some(p_text.clone());
            variety_sample(&surface.jet(&parse_point(&surface, &p_text)?)?, n)?
        }
    };
    let digest = resolved.digest();
    let volume = if paper_measure {
        vs.r.iter()
            .zip(vs.closed_form_weights())
            .filter(|(_, w)| w.is_finite())
            .map(|(r, w)| r.abs().powf(1.0 + 2.0 * alpha) * w)
            .sum()
    } else {
        weighted_variety_volume(&vs, alpha)?.value
    };
    if let Some(path) = &cfg.out {
        variety_table(&vs, &digest)?.write(path)?;
    }
    Ok(format!("{volume}"))
}

#[derive(Serialize)]
struct FalphaOutput {
    kappas: [f64; 2],
    alpha: f64,
    variant: FAlphaVariant,
    f_alpha: f64,
    variety_volume: f64,
}

fn falpha(cfg: &RunConfig) -> Result<String> {
    let kappas = cfg.kappas.ok_or_else(|| Error::Validation("falpha needs --kappas k1,k2".into()))?;
    let alpha = cfg.alpha.unwrap_or(0.0);
    let variant_text = cfg.variant.clone().unwrap_or_else(|| "corrected".into());
    let variant = FAlphaVariant::parse(&variant_text)?;
    let mut resolved = cfg.clone();
    resolved.alpha = Some(alpha);
    resolved.variant = Some(variant_text);
    let digest = resolved.digest();
    let f = f_alpha(&kappas, alpha, variant)?;
    let v = weighted_variety_volume(&VarietySample::from_curvatures(kappas, 4096)?, alpha)?.value;
    write_json(cfg, &FalphaOutput { kappas, alpha, variant, f_alpha: f, variety_volume: v }, &digest)?;
    Ok(format!("F = {f} (V = {v}, V/F = {:.6})", v / f))
}

struct Spectral {
    surface: Surface,
    nodes: NodeSet,
    ops: LaplaceOperators,
    es: EigenSystem,
    band: SpectralBand,
    resolved: RunConfig,
}

/// Eigensystem plus the band requested by explicit edges or by count.
fn spectral_band(cfg: &RunConfig, surface_default: usize) -> Result<Spectral> {
    let (surface, nodes, mut resolved) = discretize(cfg, surface_default)?;
    require_surface3(&surface, "this command")?;
    let (ops, es) = eigensystem(&surface, &nodes)?;
    let band = match (cfg.band_min, cfg.band_max) {
        (Some(a), Some(b)) => SpectralBand::new(a, b)?,
        (None, None) => {
            let count = cfg.band_count.unwrap_or(50);
            let res = nodes.basis.as_ref().map_or(nodes.len(), |b| b.degree + 1);
            let coarse_res = cfg.coarse_resolution.unwrap_or(res.saturating_sub(8).max(8));
            resolved.band_count = Some(count);
            resolved.coarse_resolution = Some(coarse_res);
            let (_, coarse) = eigensystem(&surface, &surface.node_set(coarse_res)?)?;
            deepest_converged_band(&es.values, &coarse.values, 1e-3, count)?
        }
        _ => return Err(Error::Validation("give both band_min and band_max, or neither".into())),
    };
    Ok(Spectral { surface, nodes, ops, es, band, resolved })
}

fn localize(cfg: &RunConfig) -> Result<String> {
    let mut s = spectral_band(cfg, 40)?;
    let alpha = cfg.alpha.unwrap_or(-0.5);
    let delta = cfg.delta.unwrap_or(0.4);
    let (p_text, q_text) = (cfg.p.clone().unwrap_or_else(|| "pole".into()), cfg.q.clone().unwrap_or_else(|| "equator".into()));
    s.resolved.alpha = Some(alpha);
    s.resolved.delta = Some(delta);
    s.resolved.p = Some(p_text.clone());
    s.resolved.q = Some(q_text.clone());
    let digest = s.resolved.digest();
    let p = parse_point(&s.surface, &p_text)?;
    let q = parse_point(&s.surface, &q_text)?;
    let frac = SingleLayerSpectrum::with_blocks(&s.nodes, &s.ops.single, &s.ops.blocks)?.power(alpha);
    let report = localization_ratio(&s.es, &s.surface, &s.nodes, &frac, &p, &q, &s.band, delta * feature_size(&s.nodes))?;
    write_json(cfg, &report, &digest)?;
    Ok(format!(
        "empirical ratio {:.6} over {} eigenvalues in [{:.6}, {:.6}]; arc-length prediction {:.6}, smeared Liouville {:.6}",
        report.empirical_ratio,
        report.band.count,
        s.band.lambda_min,
        s.band.lambda_max,
        report.predicted_ratio,
        report.smeared_liouville_ratio
    ))
}

fn qe(cfg: &RunConfig) -> Result<String> {
    let s = spectral_band(cfg, 32)?;
    let digest = s.resolved.digest();
    let half = SingleLayerSpectrum::with_blocks(&s.nodes, &s.ops.single, &s.ops.blocks)?.power(-0.5);
    let z = DVector::from_iterator(s.nodes.len(), s.nodes.positions.iter().map(|x| x.z));
    let report = qe_variance(&s.es, &s.surface, &s.nodes, &s.band, &z, &half)?;
    write_json(cfg, &report, &digest)?;
    Ok(format!(
        "variance {:.6e} over {} eigenvalues in [{:.6}, {:.6}], m_pred {:.3e}, mean element {:.3e}",
        report.variance, report.count, s.band.lambda_min, s.band.lambda_max, report.m_pred, report.mean_element
    ))
}

fn medium(cfg: &RunConfig, resolved: &mut RunConfig, mu1_default: [f64; 2], omega: f64) -> Result<MediumParams> {
    let mu0 = cfg.mu0.unwrap_or(1.0);
    let eps0 = cfg.eps0.unwrap_or(1.0);
    let mu1 = cfg.mu1.unwrap_or(mu1_default);
    let eps1 = cfg.eps1.unwrap_or([1.0, 0.0]);
    resolved.mu0 = Some(mu0);
    resolved.eps0 = Some(eps0);
    resolved.mu1 = Some(mu1);
    resolved.eps1 = Some(eps1);
    MediumParams::new(mu0, eps0, Complex64::new(mu1[0], mu1[1]), Complex64::new(eps1[0], eps1[1]), omega)
}

fn helmholtz_drift(cfg: &RunConfig) -> Result<String> {
    let (surface, nodes, mut resolved) = discretize(cfg, 12)?;
    require_surface3(&surface, "the Helmholtz drift")?;
    let lambda = cfg.lambda.unwrap_or(1.0 / 6.0);
    let omegas = cfg.omegas.clone().unwrap_or_else(|| (0..5).map(|i| 10f64.powf(-3.0 + 0.5 * f64::from(i))).collect());
    let tol = cfg.tol.unwrap_or(1e-12);
    resolved.lambda = Some(lambda);
    resolved.omegas = Some(omegas.clone());
    resolved.tol = Some(tol);
    let base = medium(cfg, &mut resolved, [-2.0, 0.0], 0.0)?;
    let digest = resolved.digest();
    let report = drift_slope(&surface, &nodes, &base, lambda, &omegas, tol)?;
    if let Some(path) = &cfg.out {
        drift_table(&report, &digest)?.write(path)?;
    }
    Ok(format!(
        "drift slope {:.4} (eigenfunction slope {:.4}) over {} frequencies near lambda = {lambda:.6}",
        report.slope,
        report.eigenfunction_slope,
        report.points.len()
    ))
}

fn scatter(cfg: &RunConfig) -> Result<String> {
    let (surface, nodes, mut resolved) = discretize(cfg, 12)?;
    require_surface3(&surface, "scattering")?;
    let omega = cfg.omega.unwrap_or(1e-2);
    let radius = cfg.radius.unwrap_or(3.0);
    let samples = cfg.samples.unwrap_or(36);
    resolved.omega = Some(omega);
    resolved.radius = Some(radius);
    resolved.samples = Some(samples);
    let incident = match (cfg.source, cfg.direction) {
        (Some(_), Some(_)) => return Err(Error::Validation("give either a direction or a source, not both".into())),
        (Some(s), None) => Incident::PointSource { position: s },
        (None, d) => {
            let d = d.unwrap_or([0.0, 0.0, 1.0]);
            resolved.direction = Some(d);
            if Vector3::from(d).norm() == 0.0 {
                return Err(Error::Validation("direction must be nonzero".into()));
            }
            Incident::PlaneWave { direction: d }
        }
    };
    let params = medium(cfg, &mut resolved, [2.0, 0.0], omega)?;
    let digest = resolved.digest();
    if samples == 0 {
        return Err(Error::Validation("samples must be positive".into()));
    }
    let targets: Vec<Vector3<f64>> = (0..samples)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / samples as f64;
            Vector3::new(radius * t.sin(), 0.0, radius * t.cos())
        })
        .collect();
    if targets.iter().any(|x| npsl_core::helmholtz::is_inside(&surface, &nodes, x)) {
        return Err(Error::Validation("the evaluation circle enters the inclusion".into()));
    }
    let (sol, values) = scattered_field(&surface, &nodes, &params, incident, &targets)?;
    if let Some(path) = &cfg.out {
        field_table(&targets, &values, &digest)?.write(path)?;
    }
    let peak = values.iter().map(|u| u.norm()).fold(0.0, f64::max);
    Ok(format!(
        "max |u_s| {peak:.6e} on |x| = {radius}, condition {:.3e}, resonance residual {:.3e}{}",
        sol.condition,
        sol.resonance_residual,
        if sol.near_resonant { " (near resonant)" } else { "" }
    ))
}

fn selftest(cfg: &RunConfig, criteria: Option<&[usize]>) -> Result<String> {
    let suite = Suite::new(cfg.seed.unwrap_or(DEFAULT_SEED));
    let ids: Vec<usize> = criteria.map_or_else(|| (1..=14).collect(), <[usize]>::to_vec);
    let mut outcomes = Vec::new();
    for id in ids {
        let o = suite.run(id)?;
        println!("{}", o.summary());
        for c in &o.checks {
            eprintln!("    {} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
        }
        outcomes.push(o);
    }
    let mut resolved = cfg.clone();
    resolved.seed = Some(cfg.seed.unwrap_or(DEFAULT_SEED));
    write_json(cfg, &serde_json::json!({ "criteria": outcomes }), &resolved.digest())?;
    let passed = outcomes.iter().filter(|o| o.passed()).count();
    let unexpected: Vec<usize> = outcomes
        .iter()
        .filter(|o| o.checks.iter().any(|c| !c.passed && !c.is_known_failure(o.id)))
        .map(|o| o.id)
        .collect();
    let summary = format!("{passed}/{} criteria passed", outcomes.len());
    if unexpected.is_empty() {
        let known = outcomes.len() - passed;
        Ok(if known > 0 { format!("{summary}; {known} known failure(s)") } else { summary })
    } else {
        Err(Error::Numerical(format!("{summary}; unexpected failures in {unexpected:?}")))
    }
}
