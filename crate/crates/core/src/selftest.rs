//! Acceptance suite: fourteen numbered criteria, each made of named checks
//! against closed-form oracles or trend requirements.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use nalgebra::{DVector, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{ChartPoint, NodeSet, Surface};
use crate::helmholtz::{drift_slope, scattered_field, Incident, MediumParams, ResonanceProblem};
use crate::localization::{feature_size, localization_ratio, qe_variance};
use crate::potential::jump_checks;
use crate::quadrature::sh_index;
use crate::spectrum::{
    converged_count, eigensystem, weyl_diagnostic, EigenSystem, FractionalOperator, LaplaceOperators,
    SingleLayerSpectrum, SpectralBand,
};
use crate::symbol::{
    f_alpha, hamiltonian_gradient, integrate_flow, integrate_flow_with, orbit_normal, variety_sample,
    weighted_variety_volume, CotangentPoint, FAlphaVariant, FlowOptions, HamiltonianKind, VarietySample,
};

/// Checks that fail at every resolution this suite can afford. They are still
/// run and reported; callers may choose not to treat them as regressions.
pub const KNOWN_FAILURES: &[(usize, &str)] = &[(10, "deepest band within 50% of the arc-length prediction")];

/// Bands with fewer members are too small to show a trend.
pub const MIN_BAND_MEMBERS: usize = 10;

/// QE variances below this are rounding noise.
pub const QE_NOISE_FLOOR: f64 = 1e-24;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }

    /// True if listed in [`KNOWN_FAILURES`] for criterion `id`.
    #[must_use]
    pub fn is_known_failure(&self, id: usize) -> bool {
        KNOWN_FAILURES.iter().any(|(i, n)| *i == id && *n == self.name)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: usize,
    pub title: &'static str,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl CriterionOutcome {
    #[must_use]
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// One line: `PASS 3 jump relations (1.2 s)`, with failing checks appended.
    #[must_use]
    pub fn summary(&self) -> String {
        let failing: Vec<&str> = self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        let mut s = format!(
            "{} {:>2} {} ({:.1} s)",
            if self.passed() { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.seconds
        );
        if !failing.is_empty() {
            s.push_str(&format!(" [failed: {}]", failing.join("; ")));
        }
        s
    }
}

pub const TITLES: [&str; 14] = [
    "sphere NP spectrum",
    "ellipse NP spectrum",
    "jump relations",
    "variety exactness",
    "curvature functional bounds",
    "variety volume scaling",
    "convex curvature bounds",
    "flow conservation and regularization",
    "Weyl decay",
    "tip/equator localization",
    "sphere isotropy null test",
    "QE variance",
    "Helmholtz drift",
    "scattered field sanity",
];

/// Discretization and eigensystem shared between criteria.
pub struct Fixture {
    pub surface: Surface,
    pub nodes: NodeSet,
    pub ops: LaplaceOperators,
    pub es: EigenSystem,
}

impl Fixture {
    pub fn new(spec: &str, resolution: usize) -> Result<Self> {
        let surface = Surface::parse(spec)?;
        let nodes = surface.node_set(resolution)?;
        let (ops, es) = eigensystem(&surface, &nodes)?;
        Ok(Self { surface, nodes, ops, es })
    }

    pub fn power(&self, alpha: f64) -> Result<FractionalOperator> {
        Ok(SingleLayerSpectrum::with_blocks(&self.nodes, &self.ops.single, &self.ops.blocks)?.power(alpha))
    }
}

/// Runs criteria with shared fixtures and a fixed seed.
pub struct Suite {
    seed: u64,
    sphere: OnceLock<Arc<Fixture>>,
}

const SPHERE_RES: usize = 32;
/// Resolution pair for non-spherical surfaces; eigenvalues count as converged
/// where the two agree.
const FINE_RES: usize = 40;
const COARSE_RES: usize = 32;

impl Suite {
    #[must_use]
    pub fn new(seed: u64) -> Self {
        Self { seed, sphere: OnceLock::new() }
    }

    fn sphere(&self) -> Result<Arc<Fixture>> {
        if let Some(f) = self.sphere.get() {
            return Ok(f.clone());
        }
        let f = Arc::new(Fixture::new("sphere:1", SPHERE_RES)?);
        Ok(self.sphere.get_or_init(|| f).clone())
    }

    fn rng(&self, id: usize) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed ^ (id as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }

    pub fn run(&self, id: usize) -> Result<CriterionOutcome> {
        let title = *TITLES.get(id.wrapping_sub(1)).ok_or_else(|| Error::Validation(format!("no criterion {id}")))?;
        let start = Instant::now();
        let checks = match id {
            1 => self.sphere_spectrum(),
            2 => ellipse_spectrum(),
            3 => self.jump_relations(),
            4 => variety_exactness(),
            5 => self.curvature_bounds(),
            6 => self.scaling(),
            7 => self.convex_bounds(),
            8 => flow_checks(),
            9 => self.weyl(),
            10 => localization_trend(),
            11 => self.isotropy(),
            12 => self.qe(),
            13 => helmholtz_drift(),
            _ => scattering_sanity(),
        };
        let checks = checks.unwrap_or_else(|e| vec![Check::new("run", false, e.to_string())]);
        Ok(CriterionOutcome { id, title, checks, seconds: start.elapsed().as_secs_f64() })
    }

    #[must_use]
    pub fn run_all(&self) -> Vec<CriterionOutcome> {
        (1..=14).filter_map(|i| self.run(i).ok()).collect()
    }

    fn sphere_spectrum(&self) -> Result<Vec<Check>> {
        // Timed on one thread; the fixture is then kept for later criteria.
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
        let start = Instant::now();
        let fixture = pool.install(|| Fixture::new("sphere:1", SPHERE_RES))?;
        let secs = start.elapsed().as_secs_f64();
        let fixture = self.sphere.get_or_init(|| Arc::new(fixture)).clone();
        let es = &fixture.es;
        let mut expected = Vec::new();
        for n in 0..=6usize {
            expected.extend(std::iter::repeat_n(1.0 / (2.0 * (2 * n + 1) as f64), 2 * n + 1));
        }
        let err = expected.iter().zip(&es.values).map(|(e, v)| (e - v).abs()).fold(0.0, f64::max);
        let mut mult_ok = true;
        let mut mults = Vec::new();
        for n in 0..=6usize {
            let lam = 1.0 / (2.0 * (2 * n + 1) as f64);
            let m = es.values.iter().filter(|v| (*v - lam).abs() < 1e-3).count();
            mult_ok &= m == 2 * n + 1;
            mults.push(m);
        }
        Ok(vec![
            Check::new("eigenvalues n <= 6 within 1e-3", err < 1e-3, format!("max error {err:.3e}, N = {}", fixture.nodes.len())),
            Check::new("multiplicities 2n+1", mult_ok, format!("{mults:?}")),
            Check::new("single-threaded runtime < 2 min", secs < 120.0, format!("{secs:.1} s")),
        ])
    }

    fn jump_relations(&self) -> Result<Vec<Check>> {
        let surface = Surface::parse("sphere:1")?;
        let nodes = surface.node_set(16)?;
        let ops = LaplaceOperators::assemble(&surface, &nodes)?;
        let subset: Vec<usize> = (0..nodes.len()).step_by(13).collect();
        let m = nodes.space_dim();
        let mut densities = Vec::new();
        for n in 0..=4usize {
            for order in -(n as i64)..=(n as i64) {
                let mut c = DVector::zeros(m);
                c[sh_index(n, order)] = 1.0;
                densities.push(nodes.synthesize(&c));
            }
        }
        let reports = jump_checks(&surface, &nodes, &ops.npstar, &densities, 1e-3, Some(&subset))?;
        let worst = reports.iter().map(|r| r.exterior.max(r.interior)).fold(0.0, f64::max);
        Ok(vec![Check::new("relative error < 1e-3 for Y_n, n <= 4", worst < 1e-3, format!("max {worst:.3e}"))])
    }

    fn curvature_bounds(&self) -> Result<Vec<Check>> {
        let mut rng = self.rng(5);
        let budget = 1e-8;
        let mut worst = f64::INFINITY;
        let mut count = 0;
        for _ in 0..1000 {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let kappas = [sign * rng.gen_range(0.1..5.0), sign * rng.gen_range(0.1..5.0)];
            let vs = VarietySample::from_curvatures(kappas, 4096)?;
            for alpha in [-0.5, 0.0, 0.5] {
                let v = weighted_variety_volume(&vs, alpha)?.value;
                let f = f_alpha(&kappas, alpha, FAlphaVariant::Corrected)?;
                let slack = (v - f).min(2.0 * f - v) / f;
                worst = worst.min(slack);
                count += 1;
            }
        }
        let paper = f_alpha(&[3.0, 3.0], -0.5, FAlphaVariant::Paper)?;
        let v33 = weighted_variety_volume(&VarietySample::from_curvatures([3.0, 3.0], 4096)?, -0.5)?.value;
        if paper > v33 {
            log::info!("paper-exponent functional at kappa = (3, 3), alpha = -1/2: F = {paper:.6} > V = {v33:.6}");
        }
        Ok(vec![
            Check::new(
                "F <= V <= 2F (corrected exponent)",
                worst >= -budget,
                format!("{count} cases, smallest relative slack {worst:.3e}"),
            ),
            Check::new(
                "paper exponent violates the lower bound at (3, 3)",
                (paper - 18.0 * PI).abs() < 1e-8 && (v33 - 6.0 * PI).abs() < 1e-8,
                format!("F = {paper:.10} (18 pi), V = {v33:.10} (6 pi)"),
            ),
        ])
    }

    fn scaling(&self) -> Result<Vec<Check>> {
        let mut rng = self.rng(6);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let kappas = [sign * rng.gen_range(0.1..5.0), sign * rng.gen_range(0.1..5.0)];
            let beta = rng.gen_range(0.2..5.0);
            let alpha = [-0.5, 0.0, 0.5, 1.0][rng.gen_range(0..4)];
            let v = weighted_variety_volume(&VarietySample::from_curvatures(kappas, 1024)?, alpha)?.value;
            let scaled = [beta * kappas[0], beta * kappas[1]];
            let vb = weighted_variety_volume(&VarietySample::from_curvatures(scaled, 1024)?, alpha)?.value;
            worst = worst.max((vb / v / beta.powf(2.0 + 2.0 * alpha) - 1.0).abs());
        }
        Ok(vec![Check::new("V(beta k) / V(k) = beta^(2 + 2 alpha)", worst < 1e-10, format!("max relative error {worst:.3e}"))])
    }

    fn convex_bounds(&self) -> Result<Vec<Check>> {
        let mut rng = self.rng(7);
        let mut worst: f64 = f64::INFINITY;
        for _ in 0..1000 {
            let kappas = [rng.gen_range(0.05..5.0), rng.gen_range(0.05..5.0)];
            for alpha in [-0.5, 0.0] {
                let f = f_alpha(&kappas, alpha, FAlphaVariant::Paper)? / (2.0 * PI);
                let e = 3.0 + 2.0 * alpha;
                let lo = kappas[0].min(kappas[1]).powf(e);
                let hi = kappas[0].max(kappas[1]).powf(e);
                worst = worst.min(((f - lo) / lo).min((hi - f) / hi));
            }
        }
        Ok(vec![Check::new(
            "min k^(3+2a) <= F/2pi <= max k^(3+2a)",
            worst >= -1e-12,
            format!("smallest relative slack {worst:.3e}"),
        )])
    }

    fn weyl(&self) -> Result<Vec<Check>> {
        let sphere = self.sphere()?;
        let s = weyl_diagnostic(&sphere.es.values, 3, 20, 200, None)?;
        let ell = Fixture::new("ellipsoid:1,1,2", FINE_RES)?;
        let coarse = Fixture::new("ellipsoid:1,1,2", COARSE_RES)?;
        let converged = converged_count(&coarse.es.values, &ell.es.values, 1e-3);
        let e = weyl_diagnostic(&ell.es.values, 3, 20, 200, None)?;
        Ok(vec![
            Check::new("sphere slope -0.5 +- 0.05", (s.slope + 0.5).abs() <= 0.05, format!("{:.4}", s.slope)),
            Check::new("ellipsoid(1,1,2) slope -0.5 +- 0.05", (e.slope + 0.5).abs() <= 0.05, format!("{:.4}", e.slope)),
            Check::new("ellipsoid window converged", converged >= 200, format!("{converged} eigenvalues agree to 1e-3")),
        ])
    }

    fn isotropy(&self) -> Result<Vec<Check>> {
        let f = self.sphere()?;
        let frac = f.power(-0.5)?;
        let band = SpectralBand::new(0.021, 0.05)?;
        let delta = 0.3 * feature_size(&f.nodes);
        let mut rng = self.rng(11);
        let mut random_point = || {
            let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            Surface::chart_point_for_direction(&v.normalize())
        };
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for _ in 0..20 {
            let (p, q) = (random_point(), random_point());
            let r = localization_ratio(&f.es, &f.surface, &f.nodes, &frac, &p, &q, &band, delta)?.empirical_ratio;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        Ok(vec![Check::new("20 random pairs in [0.9, 1.1]", lo >= 0.9 && hi <= 1.1, format!("range [{lo:.6}, {hi:.6}]"))])
    }

    fn qe(&self) -> Result<Vec<Check>> {
        let f = self.sphere()?;
        let half = f.power(-0.5)?;
        let z = DVector::from_iterator(f.nodes.len(), f.nodes.positions.iter().map(|x| x.z));
        let mut reports = Vec::new();
        let mut hi = 0.25;
        while hi > 1.0 / (2.0 * (2.0 * (SPHERE_RES - 1) as f64 + 1.0)) {
            let band = SpectralBand::new(hi / 2.0, hi)?;
            reports.push(qe_variance(&f.es, &f.surface, &f.nodes, &band, &z, &half)?);
            hi /= 2.0;
        }
        let m_pred = reports.iter().map(|r| r.m_pred.abs()).fold(0.0, f64::max);
        let vars: Vec<f64> = reports.iter().map(|r| r.variance).collect();
        let decreasing = vars.windows(2).all(|w| w[1] <= 1.2 * w[0] || w[1] < QE_NOISE_FLOOR);
        Ok(vec![
            Check::new("m_pred = 0", m_pred < 1e-12, format!("max |m_pred| {m_pred:.3e}")),
            Check::new(
                "variance non-increasing with depth (1.2x slack)",
                decreasing,
                format!("variances {}", vars.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(" ")),
            ),
        ])
    }
}

fn ellipse_spectrum() -> Result<Vec<Check>> {
    let start = Instant::now();
    let surface = Surface::parse("ellipse:2,1")?;
    let nodes = surface.node_set(512)?;
    let (_, es) = eigensystem(&surface, &nodes)?;
    let secs = start.elapsed().as_secs_f64();
    let mut expected = vec![0.5];
    for n in 1..=8 {
        let l = 0.5 * (1.0f64 / 3.0).powi(n);
        expected.push(l);
        expected.push(-l);
    }
    let mut used = vec![false; es.values.len()];
    let mut worst: f64 = 0.0;
    for e in &expected {
        let (j, d) = es
            .values
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, v)| (j, (v - e).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or_else(|| Error::Numerical("too few eigenvalues".into()))?;
        used[j] = true;
        worst = worst.max(d);
    }
    Ok(vec![
        Check::new("+-(1/2)((a-b)/(a+b))^n, n <= 8, within 1e-6", worst < 1e-6, format!("max error {worst:.3e}, N = 512")),
        Check::new("runtime < 10 s", secs < 10.0, format!("{secs:.2} s")),
    ])
}

fn variety_exactness() -> Result<Vec<Check>> {
    let sphere = Surface::parse("sphere:1")?;
    let jet = sphere.jet(&ChartPoint::new(0, [1.0, 0.4]))?;
    let vs = variety_sample(&jet, 4096)?;
    let mut worst: f64 = 0.0;
    for alpha in [-0.5, 0.0, 1.0] {
        worst = worst.max((weighted_variety_volume(&vs, alpha)?.value - 2.0 * PI).abs());
    }
    let fig1 = VarietySample::from_curvatures([1.0, 0.5], 720)?;
    let e1 = fig1.theta.iter().zip(&fig1.r).map(|(t, r)| (r - (0.75 - 0.25 * (2.0 * t).cos())).abs()).fold(0.0, f64::max);
    let fig2 = VarietySample::from_curvatures([-1.0, 1.0], 720)?;
    let e2 = fig2.theta.iter().zip(&fig2.r).map(|(t, r)| (r * r - (2.0 * t).cos().powi(2)).abs()).fold(0.0, f64::max);
    Ok(vec![
        Check::new("unit sphere volume 2 pi for alpha in {-1/2, 0, 1}", worst < 1e-8, format!("max error {worst:.3e}")),
        Check::new("profile 0.75 - 0.25 cos 2t", e1 < 1e-12, format!("max error {e1:.3e}")),
        Check::new("profile r^2 = cos^2 2t", e2 < 1e-12, format!("max error {e2:.3e}")),
    ])
}

fn flow_checks() -> Result<Vec<Check>> {
    let ell = Surface::parse("ellipsoid:1,1,2")?;
    let base = ChartPoint::new(0, [1.0, 0.3]);
    let init = CotangentPoint::on_level(&ell, base, [0.3, 1.0], 1.0)?;
    let raw = integrate_flow(&ell, &init, HamiltonianKind::Raw, 200.0, 1e-8)?;

    let (t_raw, step) = (20.0, 0.5);
    let e = std::f64::consts::E;
    let a = integrate_flow_with(
        &ell,
        &init,
        HamiltonianKind::Raw,
        t_raw,
        FlowOptions { output_step: Some(step), ..FlowOptions::new(1e-10) },
        None,
    )?;
    let b = integrate_flow_with(
        &ell,
        &init,
        HamiltonianKind::Rho,
        e * t_raw,
        FlowOptions { output_step: Some(e * step), ..FlowOptions::new(1e-10) },
        None,
    )?;
    let n = a.positions.len().min(b.positions.len());
    let orbit_gap = (0..n)
        .map(|i| (Vector3::from(a.positions[i]) - Vector3::from(b.positions[i])).norm())
        .fold(0.0, f64::max);

    let sphere = Surface::parse("sphere:1")?;
    let s_init = CotangentPoint::on_level(&sphere, base, [0.3, 1.0], 1.0)?;
    let (_, vel) = hamiltonian_gradient(&sphere, &s_init, HamiltonianKind::Raw)?;
    let normal = orbit_normal(&sphere, &s_init, vel);
    let s_traj = integrate_flow(&sphere, &s_init, HamiltonianKind::Raw, 100.0, 1e-8)?;
    let off_plane = s_traj.positions.iter().map(|p| Vector3::from(*p).dot(&normal).abs()).fold(0.0, f64::max);
    Ok(vec![
        Check::new("H drift < 1e-6 on ellipsoid(1,1,2), T = 200", raw.max_drift < 1e-6, format!("{:.3e}", raw.max_drift)),
        Check::new(
            "rho orbit matches raw orbit at t / e",
            orbit_gap < 1e-5 && n == a.positions.len(),
            format!("max gap {orbit_gap:.3e} over {n} samples"),
        ),
        Check::new("sphere orbits are great circles", off_plane < 1e-5, format!("max off-plane {off_plane:.3e}")),
    ])
}

/// Dyadic bands `[2^-(k+1), 2^-k]` with lower edge above `floor`.
fn dyadic_bands(floor: f64) -> Vec<SpectralBand> {
    let mut out = Vec::new();
    let mut hi = 0.5;
    while hi / 2.0 >= floor {
        if let Ok(b) = SpectralBand::new(hi / 2.0, hi) {
            out.push(b);
        }
        hi /= 2.0;
    }
    out
}

fn localization_trend() -> Result<Vec<Check>> {
    let fine = Fixture::new("spheroid:1,1,3", FINE_RES)?;
    let coarse = Fixture::new("spheroid:1,1,3", COARSE_RES)?;
    let n_conv = converged_count(&coarse.es.values, &fine.es.values, 1e-3);
    let mut mags: Vec<f64> = fine.es.values.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let floor = mags[n_conv.saturating_sub(1)];
    let frac = fine.power(-0.5)?;
    let p = fine.surface.named_point("pole")?;
    let q = fine.surface.named_point("equator")?;
    let l = feature_size(&fine.nodes);
    let bands: Vec<SpectralBand> = dyadic_bands(floor)
        .into_iter()
        .filter(|b| b.members(&fine.es).len() >= MIN_BAND_MEMBERS)
        .collect();
    if bands.is_empty() {
        return Err(Error::NoConvergence("no converged band with enough members".into()));
    }
    let mut above_one = true;
    let mut trend = true;
    let mut within = true;
    let mut liouville = true;
    let mut lines = Vec::new();
    let mut deepest = Vec::new();
    for scale in [0.2, 0.4, 0.8] {
        let delta = scale * l;
        let reports = bands
            .iter()
            .map(|b| localization_ratio(&fine.es, &fine.surface, &fine.nodes, &frac, &p, &q, b, delta))
            .collect::<Result<Vec<_>>>()?;
        let ratios: Vec<f64> = reports.iter().map(|r| r.empirical_ratio).collect();
        above_one &= ratios.iter().all(|r| *r > 1.0);
        trend &= ratios.windows(2).all(|w| w[1] >= 0.9 * w[0]);
        let last = reports.last().expect("bands are nonempty");
        within &= (last.empirical_ratio / last.predicted_ratio - 1.0).abs() <= 0.5;
        liouville &= (last.empirical_ratio / last.smeared_liouville_ratio - 1.0).abs() <= 0.1;
        deepest.push(format!(
            "delta {scale}L: {:.3} vs {:.3} (smeared Liouville {:.3})",
            last.empirical_ratio, last.predicted_ratio, last.smeared_liouville_ratio
        ));
        lines.push(format!("delta {scale}L: {}", ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(" ")));
    }
    let band_desc = bands.iter().map(|b| format!("[{:.4}, {:.4}]", b.lambda_min, b.lambda_max)).collect::<Vec<_>>().join(" ");
    Ok(vec![
        Check::new("ratio > 1 for every converged band", above_one, format!("bands {band_desc}; {}", lines.join("; "))),
        Check::new(KNOWN_FAILURES[0].1, within, deepest.join("; ")),
        Check::new("non-decreasing toward deeper bands (10%)", trend, lines.join("; ")),
        Check::new("deepest band within 10% of the smeared Liouville prediction", liouville, deepest.join("; ")),
    ])
}

fn helmholtz_base() -> Result<MediumParams> {
    MediumParams::new(1.0, 1.0, Complex64::new(-2.0, 0.0), Complex64::new(1.0, 0.0), 0.0)
}

fn helmholtz_drift() -> Result<Vec<Check>> {
    let start = Instant::now();
    let surface = Surface::parse("sphere:1")?;
    let nodes = surface.node_set(12)?;
    let base = helmholtz_base()?;
    let root = ResonanceProblem::new(&surface, &nodes)?.find(&base, 1.0 / 6.0, 1e-12)?;
    let omegas: Vec<f64> = (0..5).map(|i| 10f64.powf(-3.0 + 0.5 * f64::from(i))).collect();
    let mut checks = vec![Check::new(
        "static root mu1 = -2 for lambda = 1/6",
        (root.mu1 + 2.0).norm() < 1e-6,
        format!("mu1 = {:.12}", root.mu1),
    )];
    for lam in [1.0 / 6.0, 0.1] {
        let rep = drift_slope(&surface, &nodes, &base, lam, &omegas, 1e-12)?;
        checks.push(Check::new(
            format!("slope in [1.8, 2.2] for lambda = {lam:.4}"),
            (1.8..=2.2).contains(&rep.slope),
            format!("{:.4}", rep.slope),
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    checks.push(Check::new("runtime < 5 min", secs < 300.0, format!("{secs:.1} s")));
    Ok(checks)
}

fn scattering_sanity() -> Result<Vec<Check>> {
    let surface = Surface::parse("sphere:1")?;
    let nodes = surface.node_set(12)?;
    let omega = 1e-2;
    let targets: Vec<Vector3<f64>> = (0..6)
        .map(|i| {
            let th = 0.3 + 0.5 * f64::from(i);
            Vector3::new(3.0 * th.sin(), 0.0, 3.0 * th.cos())
        })
        .collect();
    let incident = Incident::PlaneWave { direction: [0.0, 0.0, 1.0] };
    let same = MediumParams::new(1.0, 1.0, Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), omega)?;
    let (_, zero) = scattered_field(&surface, &nodes, &same, incident, &targets)?;
    let zero_max = zero.iter().map(|u| u.norm()).fold(0.0, f64::max);
    let mu1 = 2.0;
    let params = MediumParams::new(1.0, 1.0, Complex64::new(mu1, 0.0), Complex64::new(1.0, 0.0), omega)?;
    let (_, vals) = scattered_field(&surface, &nodes, &params, incident, &targets)?;
    let amp = (mu1 - 1.0) / (mu1 + 2.0);
    let worst = targets
        .iter()
        .zip(&vals)
        .map(|(x, u)| {
            let r = x.norm();
            let dipole = -Complex64::i() * omega * amp * (x.z / r) / (r * r);
            (u - dipole).norm() / dipole.norm()
        })
        .fold(0.0, f64::max);
    Ok(vec![
        Check::new("zero contrast gives zero field (1e-8)", zero_max < 1e-8, format!("max |u_s| {zero_max:.3e}")),
        Check::new("Rayleigh dipole within 5% at |x| = 3", worst < 0.05, format!("max relative error {worst:.3e}")),
    ])
}
