//! Localization of band-limited eigenfunction mass near boundary points and
//! the quantum-ergodicity variance.

use nalgebra::{DVector, Vector3};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::{ChartPoint, NodeSet, Surface};
use crate::spectrum::{EigenSystem, FractionalOperator, SpectralBand};
use crate::symbol::{point_margin, variety_sample, weighted_variety_volume, VarietySample};

/// Smallest number of nodes a bump must cover.
pub const MIN_BUMP_NODES: usize = 12;

/// Angular samples used for variety volumes in this module.
const VARIETY_SAMPLES: usize = 2048;

/// Smooth bump of chordal radius `delta` centered at a boundary point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpSpec {
    pub center: Vector3<f64>,
    pub delta: f64,
}

impl BumpSpec {
    pub fn new(center: Vector3<f64>, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return invalid("bump radius must be positive");
        }
        Ok(Self { center, delta })
    }

    pub fn at(surface: &Surface, p: &ChartPoint, delta: f64) -> Result<Self> {
        Self::new(surface.position(p), delta)
    }
}

/// Node values of `c exp(-1 / (1 - (rho/delta)^2))`, normalized to unit
/// integral over the boundary.
pub fn bump_function(nodes: &NodeSet, spec: &BumpSpec) -> Result<DVector<f64>> {
    let mut inside = 0usize;
    let mut values = DVector::from_iterator(
        nodes.len(),
        nodes.positions.iter().map(|x| {
            let t = (x - spec.center).norm() / spec.delta;
            if t < 1.0 {
                inside += 1;
                (-1.0 / (1.0 - t * t)).exp()
            } else {
                0.0
            }
        }),
    );
    if inside < MIN_BUMP_NODES {
        return Err(Error::Degenerate(format!(
            "bump of radius {} covers {inside} nodes, need at least {MIN_BUMP_NODES}",
            spec.delta
        )));
    }
    let total = values.dot(&nodes.weights);
    values /= total;
    Ok(values)
}

/// Length scale used to set default bump radii: the radius of the sphere
/// (or circle) with the same area (or length).
#[must_use]
pub fn feature_size(nodes: &NodeSet) -> f64 {
    if nodes.dim == 2 {
        nodes.area() / (2.0 * std::f64::consts::PI)
    } else {
        (nodes.area() / (4.0 * std::f64::consts::PI)).sqrt()
    }
}

/// One eigenfunction's share of a band mass.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Contribution {
    pub index: usize,
    pub lambda: f64,
    pub weight: f64,
    pub mass: f64,
}

/// `sum_i c_i int chi ||D|^alpha phi_i|^2` over the band.
#[derive(Debug, Clone, Serialize)]
pub struct BandMass {
    pub total: f64,
    pub contributions: Vec<Contribution>,
}

/// Weights `c_i` for the eigenfunctions as stored. `EigenSystem::weights`
/// refer to unit-norm eigenfunctions; rescaled columns scale it by `1/t^2`.
fn weight_of(es: &EigenSystem, nodes: &NodeSet, i: usize) -> f64 {
    let phi = es.functions.column(i).into_owned();
    es.weights[i] / nodes.inner(&phi, &phi)
}

fn band_indices(es: &EigenSystem, band: &SpectralBand) -> Result<Vec<usize>> {
    let idx = band.members(es);
    if idx.is_empty() {
        return invalid(format!("band [{}, {}] contains no eigenvalues", band.lambda_min, band.lambda_max));
    }
    Ok(idx)
}

pub fn band_local_mass(
    es: &EigenSystem,
    nodes: &NodeSet,
    band: &SpectralBand,
    bump: &DVector<f64>,
    frac: &FractionalOperator,
) -> Result<BandMass> {
    if bump.len() != nodes.len() {
        return invalid("bump and node set sizes differ");
    }
    let idx = band_indices(es, band)?;
    let weighted_bump = bump.component_mul(&nodes.weights);
    let contributions: Vec<Contribution> = idx
        .iter()
        .map(|&i| {
            let c = weight_of(es, nodes, i);
            let lifted = nodes.synthesize(&frac.apply_coeffs(&es.coeffs.column(i).into_owned()));
            let mass = lifted.iter().zip(weighted_bump.iter()).map(|(f, b)| f * f * b).sum::<f64>() * c;
            Contribution { index: i, lambda: es.values[i], weight: c, mass }
        })
        .collect();
    Ok(BandMass { total: contributions.iter().map(|c| c.mass).sum(), contributions })
}

/// Empirical versus predicted mass ratio between two boundary points.
#[derive(Debug, Clone, Serialize)]
pub struct LocalizationReport {
    pub surface: String,
    pub band: BandSummary,
    pub alpha: f64,
    pub delta: f64,
    pub p: [f64; 3],
    pub q: [f64; 3],
    pub empirical_ratio: f64,
    /// Ratio of arc-length weighted variety volumes.
    pub predicted_ratio: f64,
    /// Ratio of Liouville-measure volumes at the two points.
    pub liouville_ratio: f64,
    /// Same, averaged against the two bumps.
    pub smeared_liouville_ratio: f64,
    pub mass_p: f64,
    pub mass_q: f64,
    pub contributions: Vec<ContributionPair>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BandSummary {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ContributionPair {
    pub index: usize,
    pub lambda: f64,
    pub weight: f64,
    pub mass_p: f64,
    pub mass_q: f64,
}

/// Weighted variety volume at a boundary point.
pub fn point_variety_volume(surface: &Surface, p: &ChartPoint, alpha: f64) -> Result<f64> {
    let vs = variety_sample(&surface.jet(p)?, VARIETY_SAMPLES)?;
    Ok(weighted_variety_volume(&vs, alpha)?.value)
}

#[allow(clippy::too_many_arguments)]
pub fn localization_ratio(
    es: &EigenSystem,
    surface: &Surface,
    nodes: &NodeSet,
    frac: &FractionalOperator,
    p: &ChartPoint,
    q: &ChartPoint,
    band: &SpectralBand,
    delta: f64,
) -> Result<LocalizationReport> {
    if surface.dim() != 3 {
        return invalid("localization ratios need a surface (the symbol vanishes on curves)");
    }
    for (name, pt) in [("p", p), ("q", q)] {
        if point_margin(surface, pt, 256)? <= 1e-10 {
            return Err(Error::Degenerate(format!("the symbol has zeros at {name}; the variety is degenerate")));
        }
    }
    let alpha = frac.alpha;
    let bp = bump_function(nodes, &BumpSpec::at(surface, p, delta)?)?;
    let bq = bump_function(nodes, &BumpSpec::at(surface, q, delta)?)?;
    let mp = band_local_mass(es, nodes, band, &bp, frac)?;
    let mq = band_local_mass(es, nodes, band, &bq, frac)?;
    let predicted_ratio = point_variety_volume(surface, p, alpha)? / point_variety_volume(surface, q, alpha)?;
    let liouville = |pt: &ChartPoint| -> Result<f64> {
        Ok(variety_sample(&surface.jet(pt)?, VARIETY_SAMPLES)?.liouville_volume(alpha))
    };
    let liouville_ratio = liouville(p)? / liouville(q)?;
    let field = liouville_field(surface, nodes, alpha)?;
    let smeared_liouville_ratio = field.dot(&bp.component_mul(&nodes.weights)) / field.dot(&bq.component_mul(&nodes.weights));
    let contributions = mp
        .contributions
        .iter()
        .zip(&mq.contributions)
        .map(|(a, b)| ContributionPair { index: a.index, lambda: a.lambda, weight: a.weight, mass_p: a.mass, mass_q: b.mass })
        .collect();
    let xp = surface.position(p);
    let xq = surface.position(q);
    Ok(LocalizationReport {
        surface: es.surface.clone(),
        band: BandSummary { lambda_min: band.lambda_min, lambda_max: band.lambda_max, count: mp.contributions.len() },
        alpha,
        delta,
        p: [xp.x, xp.y, xp.z],
        q: [xq.x, xq.y, xq.z],
        empirical_ratio: mp.total / mq.total,
        predicted_ratio,
        liouville_ratio,
        smeared_liouville_ratio,
        mass_p: mp.total,
        mass_q: mq.total,
        contributions,
    })
}

/// Liouville-measure volume of the variety at every node.
pub fn liouville_field(surface: &Surface, nodes: &NodeSet, alpha: f64) -> Result<DVector<f64>> {
    let vals: Vec<f64> = nodes
        .directions
        .iter()
        .map(|d| {
            let p = Surface::chart_point_for_direction(d);
            Ok(variety_sample(&surface.jet(&p)?, VARIETY_SAMPLES / 4)?.liouville_volume(alpha))
        })
        .collect::<Result<_>>()?;
    Ok(DVector::from_vec(vals))
}

/// Normalized variety measure `w(x)` at every node, summing to one against
/// the node weights.
pub fn variety_weight(surface: &Surface, nodes: &NodeSet) -> Result<DVector<f64>> {
    if surface.dim() != 3 {
        return invalid("variety weights need a surface");
    }
    let raw: Vec<f64> = nodes
        .directions
        .iter()
        .map(|d| {
            let p = Surface::chart_point_for_direction(d);
            let vs: VarietySample = variety_sample(&surface.jet(&p)?, VARIETY_SAMPLES / 4)?;
            Ok(vs.total_measure())
        })
        .collect::<Result<_>>()?;
    let w = DVector::from_vec(raw);
    let total = w.dot(&nodes.weights);
    Ok(w / total)
}

/// Result of [`qe_variance`].
#[derive(Debug, Clone, Serialize)]
pub struct QeReport {
    pub band: SpectralBand,
    pub count: usize,
    /// Mean of `|e_i - m_pred|^2`.
    pub variance: f64,
    /// Mean of the normalized matrix elements `e_i`.
    pub mean_element: f64,
    pub m_pred: f64,
    pub elements: Vec<f64>,
}

/// Variance of the normalized matrix elements
/// `e_i = <obs phî_i, phî_i> / <phî_i, phî_i>` with `phî_i = |D|^{-1/2} phi_i`
/// around the variety-weighted mean of the observable.
///
/// `half` must be `|D|^{-1/2}`.
pub fn qe_variance(
    es: &EigenSystem,
    surface: &Surface,
    nodes: &NodeSet,
    band: &SpectralBand,
    observable: &DVector<f64>,
    half: &FractionalOperator,
) -> Result<QeReport> {
    if (half.alpha + 0.5).abs() > 1e-12 {
        return invalid("qe_variance needs |D|^(-1/2)");
    }
    if observable.len() != nodes.len() {
        return invalid("observable must have one value per node");
    }
    let idx = band_indices(es, band)?;
    let w = variety_weight(surface, nodes)?;
    let m_pred = observable.component_mul(&w).dot(&nodes.weights);
    let elements: Vec<f64> = idx
        .iter()
        .map(|&i| {
            let hat = nodes.synthesize(&half.apply_coeffs(&es.coeffs.column(i).into_owned()));
            let num: f64 = hat.iter().zip(observable.iter()).zip(nodes.weights.iter()).map(|((h, o), w)| h * h * o * w).sum();
            num / nodes.inner(&hat, &hat)
        })
        .collect();
    let count = elements.len();
    let variance = elements.iter().map(|e| (e - m_pred).powi(2)).sum::<f64>() / count as f64;
    let mean_element = elements.iter().sum::<f64>() / count as f64;
    Ok(QeReport { band: *band, count, variance, mean_element, m_pred, elements })
}
