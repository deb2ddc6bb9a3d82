//! Layer-potential kernels, dense Nyström assembly and off-boundary evaluation.
//!
//! Curves use the periodic trapezoid rule with a logarithmic product rule for
//! the single layer. Surfaces use a spectral scheme: densities are expanded in
//! real spherical harmonics on the parameter sphere and, for each target, the
//! integral is taken on a spherical grid rotated so the target sits at the
//! pole, where the area element cancels the kernel singularity.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{pole_rotation, tangent_frame, NodeSet, Surface};
use crate::quadrature::{gauss_legendre_on, ShTable};

/// Boundary integral kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    LaplaceSingle,
    LaplaceNpStar,
    HelmholtzSingle { k_re: f64, k_im: f64 },
    HelmholtzNpStar { k_re: f64, k_im: f64 },
}

impl KernelKind {
    #[must_use]
    pub fn helmholtz_single(k: Complex64) -> Self {
        KernelKind::HelmholtzSingle { k_re: k.re, k_im: k.im }
    }

    #[must_use]
    pub fn helmholtz_np_star(k: Complex64) -> Self {
        KernelKind::HelmholtzNpStar { k_re: k.re, k_im: k.im }
    }

    #[must_use]
    pub fn is_helmholtz(&self) -> bool {
        matches!(self, KernelKind::HelmholtzSingle { .. } | KernelKind::HelmholtzNpStar { .. })
    }

    #[must_use]
    pub fn is_single_layer(&self) -> bool {
        matches!(self, KernelKind::LaplaceSingle | KernelKind::HelmholtzSingle { .. })
    }

    #[must_use]
    pub fn label(&self) -> String {
        match self {
            KernelKind::LaplaceSingle => "laplace_single".into(),
            KernelKind::LaplaceNpStar => "laplace_npstar".into(),
            KernelKind::HelmholtzSingle { k_re, k_im } => format!("helmholtz_single(k={k_re}{k_im:+}i)"),
            KernelKind::HelmholtzNpStar { k_re, k_im } => format!("helmholtz_npstar(k={k_re}{k_im:+}i)"),
        }
    }

    fn wavenumber(&self) -> Complex64 {
        match self {
            KernelKind::HelmholtzSingle { k_re, k_im } | KernelKind::HelmholtzNpStar { k_re, k_im } => {
                Complex64::new(*k_re, *k_im)
            }
            _ => Complex64::new(0.0, 0.0),
        }
    }

    /// Kernel value for target `x` with normal `nx` and source `y`.
    ///
    /// The single layer in the plane is `log|x-y| / (2 pi)`.
    #[must_use]
    pub fn eval(&self, dim: usize, x: &Vector3<f64>, nx: &Vector3<f64>, y: &Vector3<f64>) -> Complex64 {
        let d = x - y;
        let r = d.norm();
        match (self, dim) {
            (KernelKind::LaplaceSingle, 2) => Complex64::from(r.ln() / (2.0 * PI)),
            (KernelKind::LaplaceNpStar, 2) => Complex64::from(d.dot(nx) / (2.0 * PI * r * r)),
            (KernelKind::LaplaceSingle, _) => Complex64::from(-1.0 / (4.0 * PI * r)),
            (KernelKind::LaplaceNpStar, _) => Complex64::from(d.dot(nx) / (4.0 * PI * r * r * r)),
            (KernelKind::HelmholtzSingle { .. }, _) => {
                let k = self.wavenumber();
                -(Complex64::i() * k * r).exp() / (4.0 * PI * r)
            }
            (KernelKind::HelmholtzNpStar { .. }, _) => {
                let k = self.wavenumber();
                let ikr = Complex64::i() * k * r;
                ikr.exp() * (1.0 - ikr) * (d.dot(nx) / (4.0 * PI * r * r * r))
            }
        }
    }
}

/// Rule used on the rotated grid for each surface target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurfaceRule {
    pub theta_points: usize,
    pub phi_points: usize,
}

impl SurfaceRule {
    /// Default rule for a basis of the given degree.
    #[must_use]
    pub fn for_degree(degree: usize) -> Self {
        let theta_points = degree + 1 + (degree + 1) / 4 + 4;
        Self { theta_points, phi_points: 2 * theta_points }
    }
}

/// A discretized boundary operator.
///
/// `range` holds the operator applied to each basis function and sampled at
/// the nodes (`N x m`). For curves the basis is nodal so `range` is the
/// familiar `N x N` Nyström matrix.
#[derive(Debug, Clone)]
pub struct DenseOperator<T: nalgebra::Scalar> {
    pub kernel: KernelKind,
    pub surface: String,
    pub range: DMatrix<T>,
}

impl DenseOperator<f64> {
    /// Nodal `N x N` matrix acting on nodal values.
    #[must_use]
    pub fn node_matrix(&self, nodes: &NodeSet) -> DMatrix<f64> {
        match &nodes.basis {
            Some(b) => &self.range * &b.analysis,
            None => self.range.clone(),
        }
    }

    /// Applies the operator to nodal values.
    #[must_use]
    pub fn apply(&self, nodes: &NodeSet, phi: &DVector<f64>) -> DVector<f64> {
        &self.range * nodes.analyze(phi)
    }

    /// Adjoint in the weighted inner product: `W^-1 M^T W`.
    #[must_use]
    pub fn weighted_transpose(&self, nodes: &NodeSet) -> DMatrix<f64> {
        let m = self.node_matrix(nodes);
        let w = &nodes.weights;
        DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(j, i)] * w[j] / w[i])
    }
}

impl DenseOperator<Complex64> {
    /// Matrix in the basis coordinates (`m x m`).
    #[must_use]
    pub fn coefficient_matrix(&self, nodes: &NodeSet) -> DMatrix<Complex64> {
        match &nodes.basis {
            Some(b) => b.analysis.map(Complex64::from) * &self.range,
            None => self.range.clone(),
        }
    }
}

impl DenseOperator<f64> {
    /// Matrix in the basis coordinates (`m x m`).
    #[must_use]
    pub fn coefficient_matrix(&self, nodes: &NodeSet) -> DMatrix<f64> {
        match &nodes.basis {
            Some(b) => &b.analysis * &self.range,
            None => self.range.clone(),
        }
    }
}

/// Assembles a real (Laplace) operator.
pub fn assemble(surface: &Surface, nodes: &NodeSet, kernel: KernelKind) -> Result<DenseOperator<f64>> {
    Ok(assemble_laplace_pair(surface, nodes, &[kernel])?.remove(0))
}

/// Assembles several Laplace operators sharing one pass over the quadrature.
pub fn assemble_laplace_pair(
    surface: &Surface,
    nodes: &NodeSet,
    kernels: &[KernelKind],
) -> Result<Vec<DenseOperator<f64>>> {
    if kernels.iter().any(KernelKind::is_helmholtz) {
        return invalid("use assemble_complex for Helmholtz kernels");
    }
    let mats = if surface.dim() == 2 {
        kernels.iter().map(|k| assemble_curve(surface, nodes, *k)).collect()
    } else {
        let comps: Vec<Component> = kernels.iter().map(|k| Component { kernel: *k, imag: false }).collect();
        assemble_surface(surface, nodes, &comps, None)?
    };
    Ok(kernels
        .iter()
        .zip(mats)
        .map(|(k, range)| DenseOperator { kernel: *k, surface: surface.spec().label(), range })
        .collect())
}

/// Assembles complex operators on a surface in one pass.
pub fn assemble_complex(
    surface: &Surface,
    nodes: &NodeSet,
    kernels: &[KernelKind],
) -> Result<Vec<DenseOperator<Complex64>>> {
    if surface.dim() != 3 {
        return invalid("complex kernels are implemented for surfaces only");
    }
    let comps: Vec<Component> = kernels
        .iter()
        .flat_map(|k| [Component { kernel: *k, imag: false }, Component { kernel: *k, imag: true }])
        .collect();
    let mats = assemble_surface(surface, nodes, &comps, None)?;
    Ok(kernels
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let (re, im) = (&mats[2 * i], &mats[2 * i + 1]);
            let range = DMatrix::from_fn(re.nrows(), re.ncols(), |r, c| Complex64::new(re[(r, c)], im[(r, c)]));
            DenseOperator { kernel: *k, surface: surface.spec().label(), range }
        })
        .collect())
}

#[derive(Clone, Copy)]
struct Component {
    kernel: KernelKind,
    imag: bool,
}

/// Surface assembly with an explicit rotated rule (mainly for convergence studies).
pub fn assemble_with_rule(
    surface: &Surface,
    nodes: &NodeSet,
    kernel: KernelKind,
    rule: SurfaceRule,
) -> Result<DenseOperator<f64>> {
    if surface.dim() != 3 || kernel.is_helmholtz() {
        return invalid("explicit rules apply to Laplace kernels on surfaces");
    }
    let range = assemble_surface(surface, nodes, &[Component { kernel, imag: false }], Some(rule))?.remove(0);
    Ok(DenseOperator { kernel, surface: surface.spec().label(), range })
}

fn assemble_surface(
    surface: &Surface,
    nodes: &NodeSet,
    comps: &[Component],
    rule: Option<SurfaceRule>,
) -> Result<Vec<DMatrix<f64>>> {
    let basis = nodes
        .basis
        .as_ref()
        .ok_or_else(|| Error::Validation("surface node set lacks a harmonic basis".into()))?;
    let table = ShTable::new(basis.degree);
    let m = table.len();
    let rule = rule.unwrap_or_else(|| SurfaceRule::for_degree(basis.degree));
    let (tq, tw) = gauss_legendre_on(rule.theta_points, 0.0, PI);
    let local: Vec<(Vector3<f64>, f64)> = tq
        .iter()
        .zip(&tw)
        .flat_map(|(&t, &w)| {
            let (st, ct) = t.sin_cos();
            (0..rule.phi_points).map(move |j| {
                let p = 2.0 * PI * j as f64 / rule.phi_points as f64;
                let (sp, cp) = p.sin_cos();
                (Vector3::new(st * cp, st * sp, ct), w * st * 2.0 * PI / rule.phi_points as f64)
            })
        })
        .collect();
    let nc = comps.len();
    // On surfaces of revolution one target per latitude ring suffices; the
    // other rows follow by rotating the harmonic coefficients about the axis.
    let n_phi = 2 * nodes.resolution;
    let symmetric = surface.is_axisymmetric() && nodes.len() == nodes.resolution * n_phi;
    let targets: Vec<usize> = if symmetric {
        (0..nodes.resolution).map(|r| r * n_phi).collect()
    } else {
        (0..nodes.len()).collect()
    };
    let rows: Vec<Vec<f64>> = targets
        .par_iter()
        .copied()
        .map_init(
            || (vec![0.0; m], vec![0.0; table.scratch_len()]),
            |(yv, scratch), i| {
                let x = nodes.positions[i];
                let nx = nodes.normals[i];
                let q: Matrix3<f64> = pole_rotation(&nodes.directions[i]);
                let mut acc = vec![0.0; nc * m];
                let mut vals = vec![0.0; nc];
                for (p, w) in &local {
                    let s = q * p;
                    let y = surface.map(&s);
                    let jw = w * surface.sphere_jacobian(&s);
                    for (v, c) in vals.iter_mut().zip(comps) {
                        let kv = c.kernel.eval(3, &x, &nx, &y);
                        *v = jw * if c.imag { kv.im } else { kv.re };
                    }
                    table.eval([s.x, s.y, s.z], yv, scratch);
                    for (c, v) in vals.iter().enumerate() {
                        let row = &mut acc[c * m..(c + 1) * m];
                        for (r, yy) in row.iter_mut().zip(yv.iter()) {
                            *r += v * yy;
                        }
                    }
                }
                acc
            },
        )
        .collect();
    let mut out = vec![DMatrix::zeros(nodes.len(), m); nc];
    if symmetric {
        let degree = basis.degree;
        for (ring, row) in rows.iter().enumerate() {
            for j in 0..n_phi {
                let delta = 2.0 * PI * j as f64 / n_phi as f64;
                let i = ring * n_phi + j;
                for (c, mat) in out.iter_mut().enumerate() {
                    let src = &row[c * m..(c + 1) * m];
                    for l in 0..=degree {
                        let base = l * l + l;
                        mat[(i, base)] = src[base];
                        for mm in 1..=l {
                            let (sd, cd) = (mm as f64 * delta).sin_cos();
                            let (pc, ps) = (src[base + mm], src[base - mm]);
                            mat[(i, base + mm)] = cd * pc - sd * ps;
                            mat[(i, base - mm)] = cd * ps + sd * pc;
                        }
                    }
                }
            }
        }
    } else {
        for (i, row) in rows.iter().enumerate() {
            for (c, mat) in out.iter_mut().enumerate() {
                for a in 0..m {
                    mat[(i, a)] = row[c * m + a];
                }
            }
        }
    }
    Ok(out)
}

fn assemble_curve(surface: &Surface, nodes: &NodeSet, kernel: KernelKind) -> DMatrix<f64> {
    let n = nodes.len();
    let h = 2.0 * PI / n as f64;
    match kernel {
        KernelKind::LaplaceNpStar => DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                let [_, dx, ddx] = surface.curve(h * i as f64);
                let speed = dx.norm();
                let kappa = -ddx.dot(&nodes.normals[i]) / (speed * speed);
                kappa / (4.0 * PI) * nodes.weights[i]
            } else {
                kernel.eval(2, &nodes.positions[i], &nodes.normals[i], &nodes.positions[j]).re * nodes.weights[j]
            }
        }),
        _ => {
            // log|x(t)-x(s)| = 0.5 log(4 sin^2((t-s)/2)) + smooth remainder
            let half = n / 2;
            let log_weights: Vec<f64> = (0..n)
                .map(|d| {
                    let tau = h * d as f64;
                    let mut s = 0.0;
                    for m in 1..half {
                        s += (m as f64 * tau).cos() / m as f64;
                    }
                    -(4.0 * PI / n as f64) * s - (4.0 * PI / (n * n) as f64) * (half as f64 * tau).cos()
                })
                .collect();
            DMatrix::from_fn(n, n, |i, j| {
                let smooth = if i == j {
                    nodes.speeds[i].ln()
                } else {
                    let tau = h * (i as f64 - j as f64);
                    (nodes.positions[i] - nodes.positions[j]).norm().ln() - 0.5 * (4.0 * (tau / 2.0).sin().powi(2)).ln()
                };
                let d = if i >= j { i - j } else { n + i - j };
                (0.5 * log_weights[d] + h * smooth) * nodes.speeds[j] / (2.0 * PI)
            })
        }
    }
}

/// Foot point of a target on the boundary: parameter direction (surfaces) or
/// parameter value (curves), and the distance.
#[derive(Debug, Clone, Copy)]
pub struct Projection {
    pub direction: Vector3<f64>,
    pub t: f64,
    pub distance: f64,
}

/// Projects a point onto the boundary by Gauss-Newton from the nearest node.
#[must_use]
pub fn project(surface: &Surface, nodes: &NodeSet, z: &Vector3<f64>) -> Projection {
    let nearest = (0..nodes.len())
        .min_by(|&a, &b| (nodes.positions[a] - z).norm_squared().total_cmp(&(nodes.positions[b] - z).norm_squared()))
        .unwrap_or(0);
    if surface.dim() == 2 {
        let mut t = nodes.points[nearest].u[0];
        for _ in 0..30 {
            let [x, dx, ddx] = surface.curve(t);
            let f = (x - z).dot(&dx);
            let df = dx.dot(&dx) + (x - z).dot(&ddx);
            let step = if df.abs() > 1e-300 { f / df } else { 0.0 };
            t -= step.clamp(-0.5, 0.5);
            if step.abs() < 1e-15 {
                break;
            }
        }
        let x = surface.curve(t)[0];
        return Projection { direction: Vector3::zeros(), t, distance: (x - z).norm() };
    }
    let mut s = nodes.directions[nearest];
    for _ in 0..30 {
        let (t1, t2) = tangent_frame(&s);
        let d = surface.dmap(&s);
        let (a, b) = (d * t1, d * t2);
        let r = surface.map(&s) - z;
        let g = nalgebra::Matrix2::new(a.dot(&a), a.dot(&b), a.dot(&b), b.dot(&b));
        let rhs = nalgebra::Vector2::new(-a.dot(&r), -b.dot(&r));
        let Some(step) = g.try_inverse().map(|gi| gi * rhs) else { break };
        let step = if step.norm() > 0.5 { step * (0.5 / step.norm()) } else { step };
        s = (s + t1 * step.x + t2 * step.y).normalize();
        if step.norm() < 1e-15 {
            break;
        }
    }
    Projection { direction: s, t: 0.0, distance: (surface.map(&s) - z).norm() }
}

/// Number of node spacings within which a target counts as near the boundary.
pub const NEAR_FIELD_SPACINGS: f64 = 4.0;

/// Evaluates a single-layer potential with nodal density at off-boundary targets.
///
/// Targets closer than [`NEAR_FIELD_SPACINGS`] node spacings use a graded
/// quadrature centred at the foot point, with the density interpolated from
/// its band-limited expansion. Targets on the boundary itself are allowed and
/// give the (continuous) on-boundary value.
pub fn evaluate_layer_potential(
    surface: &Surface,
    nodes: &NodeSet,
    density: &DVector<Complex64>,
    kernel: KernelKind,
    targets: &[Vector3<f64>],
) -> Result<Vec<Complex64>> {
    Ok(evaluate_layer_potentials(surface, nodes, std::slice::from_ref(density), kernel, targets)?.remove(0))
}

/// [`evaluate_layer_potential`] for several densities at once; the near-field
/// quadrature is built once per target. Returns one vector per density.
pub fn evaluate_layer_potentials(
    surface: &Surface,
    nodes: &NodeSet,
    densities: &[DVector<Complex64>],
    kernel: KernelKind,
    targets: &[Vector3<f64>],
) -> Result<Vec<Vec<Complex64>>> {
    if !kernel.is_single_layer() {
        return invalid("only single-layer potentials can be evaluated off the boundary");
    }
    if densities.is_empty() {
        return invalid("no densities given");
    }
    if let Some(d) = densities.iter().find(|d| d.len() != nodes.len()) {
        return invalid(format!("density has {} values for {} nodes", d.len(), nodes.len()));
    }
    if kernel.is_helmholtz() && surface.dim() != 3 {
        return invalid("complex kernels are implemented for surfaces only");
    }
    let dim = surface.dim();
    let near = NEAR_FIELD_SPACINGS * nodes.spacing();
    let coeffs: Vec<DVector<Complex64>> = densities.iter().map(|d| analyze_complex(nodes, d)).collect();
    let table = nodes.basis.as_ref().map(|b| ShTable::new(b.degree));
    let per_target: Vec<Vec<Complex64>> = targets
        .par_iter()
        .map(|z| {
            let proj = project(surface, nodes, z);
            if proj.distance > near {
                let zero = Vector3::zeros();
                let w: Vec<Complex64> = (0..nodes.len())
                    .map(|k| kernel.eval(dim, z, &zero, &nodes.positions[k]) * nodes.weights[k])
                    .collect();
                densities.iter().map(|d| d.iter().zip(&w).map(|(a, b)| a * b).sum()).collect()
            } else if dim == 2 {
                densities.iter().map(|d| near_curve(surface, nodes, d, kernel, z, &proj)).collect()
            } else {
                let row = near_surface(surface, table.as_ref().expect("surface basis"), kernel, z, &proj);
                coeffs.iter().map(|c| c.iter().zip(&row).map(|(a, b)| a * b).sum()).collect()
            }
        })
        .collect();
    Ok((0..densities.len()).map(|j| per_target.iter().map(|v| v[j]).collect()).collect())
}

/// Real-density convenience wrapper returning real parts for Laplace kernels.
pub fn evaluate_laplace_single(
    surface: &Surface,
    nodes: &NodeSet,
    density: &DVector<f64>,
    targets: &[Vector3<f64>],
) -> Result<Vec<f64>> {
    let d = density.map(Complex64::from);
    Ok(evaluate_layer_potential(surface, nodes, &d, KernelKind::LaplaceSingle, targets)?
        .into_iter()
        .map(|v| v.re)
        .collect())
}

fn analyze_complex(nodes: &NodeSet, density: &DVector<Complex64>) -> DVector<Complex64> {
    match &nodes.basis {
        Some(b) => b.analysis.map(Complex64::from) * density,
        None => density.clone(),
    }
}

// Geometric panel breakpoints on [0, span] refined towards 0 down to `eps`.
fn graded_breaks(eps: f64, span: f64) -> Vec<f64> {
    let mut b = vec![0.0];
    let mut x = eps.max(1e-5).min(span);
    while x < span {
        b.push(x);
        x *= 2.0;
    }
    b.push(span);
    b
}

const PANEL_POINTS: usize = 12;

// Quadrature functional on basis coefficients for a target near the surface.
fn near_surface(
    surface: &Surface,
    table: &ShTable,
    kernel: KernelKind,
    z: &Vector3<f64>,
    proj: &Projection,
) -> Vec<Complex64> {
    let s0 = proj.direction;
    let q = pole_rotation(&s0);
    let stretch = surface.dmap(&s0).norm().max(1e-300);
    let breaks = graded_breaks(0.5 * proj.distance / stretch, PI);
    let n_phi = 2 * (table.degree() + 1) + 48;
    let mut yv = vec![0.0; table.len()];
    let mut scratch = vec![0.0; table.scratch_len()];
    let zero = Vector3::zeros();
    let mut row = vec![Complex64::new(0.0, 0.0); table.len()];
    for w in breaks.windows(2) {
        let (tq, tw) = gauss_legendre_on(PANEL_POINTS, w[0], w[1]);
        for (t, wt) in tq.iter().zip(&tw) {
            let (st, ct) = t.sin_cos();
            for j in 0..n_phi {
                let (sp, cp) = (2.0 * PI * j as f64 / n_phi as f64).sin_cos();
                let s = q * Vector3::new(st * cp, st * sp, ct);
                let y = surface.map(&s);
                table.eval([s.x, s.y, s.z], &mut yv, &mut scratch);
                let weight = wt * st * 2.0 * PI / n_phi as f64 * surface.sphere_jacobian(&s);
                let kw = kernel.eval(3, z, &zero, &y) * weight;
                for (r, v) in row.iter_mut().zip(&yv) {
                    *r += kw * v;
                }
            }
        }
    }
    row
}

fn near_curve(
    surface: &Surface,
    nodes: &NodeSet,
    density: &DVector<Complex64>,
    kernel: KernelKind,
    z: &Vector3<f64>,
    proj: &Projection,
) -> Complex64 {
    let n = nodes.len();
    let speed0 = surface.curve(proj.t)[1].norm();
    let breaks = graded_breaks(0.5 * proj.distance / speed0, PI);
    let zero = Vector3::zeros();
    let mut total = Complex64::new(0.0, 0.0);
    for side in [-1.0, 1.0] {
        for w in breaks.windows(2) {
            let (tq, tw) = gauss_legendre_on(PANEL_POINTS, w[0], w[1]);
            for (tau, wt) in tq.iter().zip(&tw) {
                let t = proj.t + side * tau;
                let [y, dy, _] = surface.curve(t);
                let dens = trig_interpolate(density, n, t);
                total += kernel.eval(2, z, &zero, &y) * dens * (wt * dy.norm());
            }
        }
    }
    total
}

/// Band-limited interpolation of equispaced periodic samples.
fn trig_interpolate(values: &DVector<Complex64>, n: usize, t: f64) -> Complex64 {
    let h = 2.0 * PI / n as f64;
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 0..n {
        let d = t - h * k as f64;
        let half = 0.5 * d;
        let s = half.sin();
        let w = if s.abs() < 1e-14 {
            1.0
        } else {
            (n as f64 * half).sin() * half.cos() / (n as f64 * s)
        };
        sum += values[k] * w;
    }
    sum
}

/// Result of comparing finite-difference normal derivatives of the single
/// layer with the jump relations.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct JumpReport {
    /// Max nodal error on the outside, relative to `max |phi|`.
    pub exterior: f64,
    pub interior: f64,
}

/// Checks `d/dnu S[phi]` on both sides against `(+-1/2 + K*) phi`.
///
/// The potential is sampled on the boundary and at one, two and three steps
/// of size `offset` along the normal on each side; a third-order one-sided
/// difference then gives the derivative at the boundary.
pub fn jump_check(
    surface: &Surface,
    nodes: &NodeSet,
    npstar: &DenseOperator<f64>,
    phi: &DVector<f64>,
    offset: f64,
    subset: Option<&[usize]>,
) -> Result<JumpReport> {
    Ok(jump_checks(surface, nodes, npstar, std::slice::from_ref(phi), offset, subset)?.remove(0))
}

/// [`jump_check`] for several densities sharing the near-field quadrature.
pub fn jump_checks(
    surface: &Surface,
    nodes: &NodeSet,
    npstar: &DenseOperator<f64>,
    densities: &[DVector<f64>],
    offset: f64,
    subset: Option<&[usize]>,
) -> Result<Vec<JumpReport>> {
    if !(offset > 0.0) {
        return invalid("offset must be positive");
    }
    let idx: Vec<usize> = subset.map_or_else(|| (0..nodes.len()).collect(), <[usize]>::to_vec);
    if idx.iter().any(|&i| i >= nodes.len()) {
        return invalid("subset index out of range");
    }
    let mut targets = Vec::with_capacity(idx.len() * 7);
    for &i in &idx {
        let x = nodes.positions[i];
        let n = nodes.normals[i];
        for j in -3..=3 {
            targets.push(x + n * (offset * f64::from(j)));
        }
    }
    let complex: Vec<DVector<Complex64>> = densities.iter().map(|d| d.map(Complex64::from)).collect();
    let values = evaluate_layer_potentials(surface, nodes, &complex, KernelKind::LaplaceSingle, &targets)?;
    Ok(densities
        .iter()
        .zip(values)
        .map(|(phi, u)| {
            let kphi = npstar.apply(nodes, phi);
            let scale = phi.amax().max(1e-300);
            let mut ext: f64 = 0.0;
            let mut int: f64 = 0.0;
            for (c, &i) in idx.iter().enumerate() {
                let v: Vec<f64> = u[7 * c..7 * c + 7].iter().map(|z| z.re).collect();
                let d_out = (-11.0 * v[3] + 18.0 * v[4] - 9.0 * v[5] + 2.0 * v[6]) / (6.0 * offset);
                let d_in = (11.0 * v[3] - 18.0 * v[2] + 9.0 * v[1] - 2.0 * v[0]) / (6.0 * offset);
                ext = ext.max((d_out - (0.5 * phi[i] + kphi[i])).abs() / scale);
                int = int.max((d_in - (-0.5 * phi[i] + kphi[i])).abs() / scale);
            }
            JumpReport { exterior: ext, interior: int }
        })
        .collect())
}
