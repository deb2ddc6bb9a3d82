//! Quasi-static Helmholtz transmission problem and its plasmonic resonances.
//!
//! The inclusion has coefficients `(mu1, eps1)` inside and `(mu0, eps0)`
//! outside. `mu` is the flux coefficient, so `u` solves
//! `div(mu grad u) + omega^2 eps u = 0` with wavenumbers
//! `k_j = omega sqrt(eps_j / mu_j)` and transmission conditions `u_- = u_+`,
//! `mu1 d_nu u_- = mu0 d_nu u_+`. With
//! `u = S^{k1}[phi]` inside and `u = u0 + S^{k0}[psi]` outside, eliminating
//! `phi = (S^{k1})^-1 S^{k0} psi` leaves the resonance operator
//! `1/2 (mu0 + mu1 X) + mu0 K^{k0*} - mu1 K^{k1*} X` with `X = (S^{k1})^-1 S^{k0}`.
//! At `omega = 0` it is singular exactly when `(mu0 + mu1) / (2 (mu1 - mu0))`
//! is an NP eigenvalue.
//!
//! All operators act on basis coefficients, so only surfaces are supported.

use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::{NodeSet, Surface};
use crate::potential::{assemble_complex, evaluate_layer_potential, project, KernelKind};
use crate::spectrum::{eigensystem, plasmonic_constant, EigenSystem, LaplaceOperators};

/// Largest admissible `k diam` for the quasi-static regime.
pub const QUASI_STATIC_CEILING: f64 = 0.5;

/// Condition number of `S^{k1}` beyond which the operator is rejected.
const MAX_CONDITION: f64 = 1e12;

/// Material and frequency parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MediumParams {
    pub mu0: f64,
    pub eps0: f64,
    pub mu1: Complex64,
    pub eps1: Complex64,
    /// Angular frequency; zero selects the static (Laplace) limit.
    pub omega: f64,
}

impl MediumParams {
    pub fn new(mu0: f64, eps0: f64, mu1: Complex64, eps1: Complex64, omega: f64) -> Result<Self> {
        let p = Self { mu0, eps0, mu1, eps1, omega };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu0 > 0.0 && self.eps0 > 0.0) {
            return invalid("mu0 and eps0 must be positive");
        }
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return invalid("omega must be finite and nonnegative");
        }
        if !(self.mu1.is_finite() && self.eps1.is_finite()) {
            return invalid("mu1 and eps1 must be finite");
        }
        Ok(())
    }

    /// Exterior wavenumber.
    #[must_use]
    pub fn k0(&self) -> Complex64 {
        Complex64::from(self.omega * (self.eps0 / self.mu0).sqrt())
    }

    /// Interior wavenumber on the branch with nonnegative imaginary part.
    #[must_use]
    pub fn k1(&self) -> Complex64 {
        let k = (self.eps1 / self.mu1).sqrt() * self.omega;
        if k.im < 0.0 {
            -k
        } else {
            k
        }
    }

    #[must_use]
    pub fn with_mu1(&self, mu1: Complex64) -> Self {
        Self { mu1, ..*self }
    }

    /// `k diam` for the larger wavenumber.
    #[must_use]
    pub fn electrical_size(&self, surface: &Surface) -> f64 {
        2.0 * surface.bounding_radius() * self.k0().norm().max(self.k1().norm())
    }
}

/// `(a + b) / (2 (a - b))` for complex arguments.
pub fn plasmonic_lambda_complex(a: Complex64, b: Complex64) -> Result<Complex64> {
    if (a - b).norm() == 0.0 {
        return invalid("equal coefficients have no plasmonic eigenvalue");
    }
    Ok((a + b) / ((a - b) * 2.0))
}

/// Coefficient-space operators that do not depend on `mu1`.
pub struct ResonanceContext<'a> {
    surface: &'a Surface,
    nodes: &'a NodeSet,
    /// Static `K*` in coefficients.
    npstar: DMatrix<f64>,
    /// `S^{k0}` and `K^{k0*}` for the exterior, cached per wavenumber.
    exterior: Option<(Complex64, DMatrix<Complex64>, DMatrix<Complex64>)>,
}

impl<'a> ResonanceContext<'a> {
    pub fn new(surface: &'a Surface, nodes: &'a NodeSet, ops: &LaplaceOperators) -> Result<Self> {
        if surface.dim() != 3 || nodes.basis.is_none() {
            return invalid("the Helmholtz transmission problem is implemented for surfaces only");
        }
        Ok(Self { surface, nodes, npstar: ops.npstar.coefficient_matrix(nodes), exterior: None })
    }

    fn pair(&self, k: Complex64) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
        let mut ops = assemble_complex(
            self.surface,
            self.nodes,
            &[KernelKind::helmholtz_single(k), KernelKind::helmholtz_np_star(k)],
        )?;
        let kstar = ops.pop().expect("two operators").coefficient_matrix(self.nodes);
        let single = ops.pop().expect("two operators").coefficient_matrix(self.nodes);
        Ok((single, kstar))
    }

    fn exterior(&mut self, params: &MediumParams) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
        match &self.exterior {
            Some((k, s, kstar)) if *k == params.k0() => Ok((s.clone(), kstar.clone())),
            _ => {
                let (s, k) = self.pair(params.k0())?;
                self.exterior = Some((params.k0(), s.clone(), k.clone()));
                Ok((s, k))
            }
        }
    }

    /// The resonance operator in basis coordinates.
    pub fn operator(&mut self, params: &MediumParams) -> Result<DMatrix<Complex64>> {
        params.validate()?;
        let m = self.npstar.nrows();
        let mu0 = Complex64::from(params.mu0);
        let mu1 = params.mu1;
        if params.omega == 0.0 {
            let k = self.npstar.map(Complex64::from);
            return Ok(DMatrix::identity(m, m) * ((mu0 + mu1) * 0.5) + k * (mu0 - mu1));
        }
        let (s0, k0) = self.exterior(params)?;
        let (s1, k1) = self.pair(params.k1())?;
        let x = solve_refined(&s1, &s0)?;
        Ok(DMatrix::identity(m, m) * (mu0 * 0.5) + &x * (mu1 * 0.5) + k0 * mu0 - (k1 * &x) * mu1)
    }

    /// Static resonance operator with the same coefficients.
    pub fn static_operator(&mut self, params: &MediumParams) -> Result<DMatrix<Complex64>> {
        self.operator(&MediumParams { omega: 0.0, ..*params })
    }
}

/// `a^-1 b` by LU with one step of iterative refinement; rejects
/// ill-conditioned `a`.
fn solve_refined(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let sv = a.clone().singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    if !(lo > 0.0) || hi / lo > MAX_CONDITION {
        return Err(Error::Numerical(format!(
            "S^k1 is ill-conditioned (condition {:.3e}); k1^2 may be a Dirichlet eigenvalue",
            hi / lo
        )));
    }
    let lu = a.clone().lu();
    let mut x = lu.solve(b).ok_or_else(|| Error::Numerical("singular S^k1".into()))?;
    let r = b - a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    Ok(x)
}

/// Smallest singular value and the size of the near-zero cluster.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Residual {
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Singular values within a factor 10 of the smallest (generalized
    /// resonances of higher multiplicity show up here).
    pub near_zero: usize,
}

fn residual_of(m: &DMatrix<Complex64>) -> Residual {
    let sv = m.clone().singular_values();
    let lo = sv.min();
    let hi = sv.max();
    let cut = (10.0 * lo).max(1e-12 * hi);
    Residual { sigma_min: lo, sigma_max: hi, near_zero: sv.iter().filter(|s| **s <= cut).count() }
}

/// Assembles the resonance operator from scratch.
pub fn resonance_operator(surface: &Surface, nodes: &NodeSet, params: &MediumParams) -> Result<DMatrix<Complex64>> {
    check_contrast(params)?;
    let ops = LaplaceOperators::assemble(surface, nodes)?;
    ResonanceContext::new(surface, nodes, &ops)?.operator(params)
}

/// Smallest singular value of the resonance operator.
pub fn resonance_residual(surface: &Surface, nodes: &NodeSet, params: &MediumParams) -> Result<Residual> {
    Ok(residual_of(&resonance_operator(surface, nodes, params)?))
}

fn check_contrast(params: &MediumParams) -> Result<()> {
    if (params.mu1 - params.mu0).norm() == 0.0 {
        return invalid("mu1 must differ from mu0 for a resonance");
    }
    Ok(())
}

/// Outcome of a resonance search.
#[derive(Debug, Clone, Serialize)]
pub struct ResonanceResult {
    pub target_lambda: f64,
    /// The discrete static eigenvalue closest to the target.
    pub static_lambda: f64,
    pub omega: f64,
    pub mu1: Complex64,
    pub residual: f64,
    pub near_zero: usize,
    /// `|lambda(1/mu0, 1/mu1) - lambda_i|`.
    pub drift: f64,
    /// Distance of the resonant density from the static eigenspace.
    pub eigenfunction_drift: f64,
    pub iterations: usize,
    pub trace: Vec<f64>,
}

/// Static data shared by resonance searches on one discretization.
pub struct ResonanceProblem<'a> {
    surface: &'a Surface,
    nodes: &'a NodeSet,
    ops: LaplaceOperators,
    eig: EigenSystem,
}

impl<'a> ResonanceProblem<'a> {
    pub fn new(surface: &'a Surface, nodes: &'a NodeSet) -> Result<Self> {
        if surface.dim() != 3 {
            return invalid("the Helmholtz transmission problem is implemented for surfaces only");
        }
        let (ops, eig) = eigensystem(surface, nodes)?;
        Ok(Self { surface, nodes, ops, eig })
    }

    #[must_use]
    pub fn eigensystem(&self) -> &EigenSystem {
        &self.eig
    }

    /// Searches `mu1` with the other parameters fixed so that the resonance
    /// operator becomes singular near the static eigenvalue `target`.
    pub fn find(&self, base: &MediumParams, target: f64, tol: f64) -> Result<ResonanceResult> {
        base.validate()?;
        if !(tol > 0.0) {
            return invalid("tolerance must be positive");
        }
        let (index, lambda) = self
            .eig
            .values
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
            .ok_or_else(|| Error::Degenerate("empty spectrum".into()))?;
        let mu_static = plasmonic_constant(lambda, base.mu0)?;
        let guess = base.with_mu1(Complex64::from(mu_static));
        let size = guess.electrical_size(self.surface);
        if size >= QUASI_STATIC_CEILING {
            return invalid(format!("k diam = {size:.3} exceeds the quasi-static ceiling {QUASI_STATIC_CEILING}"));
        }
        let v: DVector<Complex64> = self.eig.coeffs.column(index).map(Complex64::from);
        let mut ctx = ResonanceContext::new(self.surface, self.nodes, &self.ops)?;
        // Null space of the discrete static operator, so that the symmetrization
        // error of the eigenvectors does not leak into the drift.
        let cluster = self.eig.cluster_basis(index, 1e-6).ncols();
        let space = null_space(&ctx.static_operator(&guess)?, cluster);
        let mut eval = |mu: Complex64| -> Result<(Complex64, DMatrix<Complex64>)> {
            let m = ctx.operator(&base.with_mu1(mu))?;
            let y = m.clone().lu().solve(&v).ok_or_else(|| Error::Numerical("resonance operator is singular".into()))?;
            Ok((Complex64::from(1.0) / v.dotc(&y), m))
        };
        let mut trace = Vec::new();
        let mut x0 = Complex64::from(mu_static);
        let mut x1 = x0 * (1.0 + 1e-4) + Complex64::new(0.0, 1e-6 * mu_static.abs().max(1.0));
        let (mut f0, _) = eval(x0)?;
        let (mut f1, mut m1) = eval(x1)?;
        for it in 1..=50 {
            let res = residual_of(&m1);
            trace.push(res.sigma_min);
            let step_small = (x1 - x0).norm() <= 1e-14 * x1.norm().max(1.0);
            if res.sigma_min < tol || step_small || f1.norm() == 0.0 {
                let mu = x1;
                return Ok(self.finish(base, target, lambda, mu, &m1, res, &space, it, trace));
            }
            let denom = f1 - f0;
            if denom.norm() == 0.0 {
                break;
            }
            let x2 = x1 - f1 * (x1 - x0) / denom;
            x0 = x1;
            f0 = f1;
            x1 = x2;
            let (f, m) = eval(x1)?;
            f1 = f;
            m1 = m;
        }
        Err(Error::NoConvergence(format!(
            "resonance search did not converge in 50 iterations; residual trace {trace:?}"
        )))
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        base: &MediumParams,
        target: f64,
        lambda: f64,
        mu: Complex64,
        m: &DMatrix<Complex64>,
        res: Residual,
        space: &DMatrix<Complex64>,
        iterations: usize,
        trace: Vec<f64>,
    ) -> ResonanceResult {
        let lam = plasmonic_lambda_complex(Complex64::from(1.0 / base.mu0), Complex64::from(1.0) / mu)
            .unwrap_or(Complex64::new(f64::NAN, 0.0));
        let null = smallest_right_singular_vector(m);
        ResonanceResult {
            target_lambda: target,
            static_lambda: lambda,
            omega: base.omega,
            mu1: mu,
            residual: res.sigma_min,
            near_zero: res.near_zero,
            drift: (lam - lambda).norm(),
            eigenfunction_drift: subspace_distance(&null, space),
            iterations,
            trace,
        }
    }
}

/// Convenience wrapper for one search.
pub fn find_resonance(
    surface: &Surface,
    nodes: &NodeSet,
    base: &MediumParams,
    target: f64,
    tol: f64,
) -> Result<ResonanceResult> {
    ResonanceProblem::new(surface, nodes)?.find(base, target, tol)
}

fn smallest_right_singular_vector(m: &DMatrix<Complex64>) -> DVector<Complex64> {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let k = svd.singular_values.imin();
    v_t.row(k).adjoint()
}

/// Right singular vectors of the `dim` smallest singular values.
fn null_space(m: &DMatrix<Complex64>, dim: usize) -> DMatrix<Complex64> {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|a, b| svd.singular_values[*a].total_cmp(&svd.singular_values[*b]));
    let cols: Vec<DVector<Complex64>> = order[..dim].iter().map(|&k| v_t.row(k).adjoint()).collect();
    DMatrix::from_columns(&cols)
}

/// `|| v - P v || / ||v||` for the orthogonal projector onto `span(space)`.
fn subspace_distance(v: &DVector<Complex64>, space: &DMatrix<Complex64>) -> f64 {
    let q = space.clone().qr().q();
    let proj = &q * (q.adjoint() * v);
    (v - proj).norm() / v.norm()
}

impl EigenSystem {
    /// Orthonormal basis (in coefficients) of the eigenspace cluster
    /// containing `index`.
    #[must_use]
    pub fn cluster_basis(&self, index: usize, rel_tol: f64) -> DMatrix<f64> {
        let lam = self.values[index];
        let cols: Vec<usize> = (0..self.values.len())
            .filter(|&j| (self.values[j] - lam).abs() <= rel_tol * lam.abs().max(1e-12))
            .collect();
        self.coeffs.select_columns(&cols)
    }
}

/// One point of a drift study.
#[derive(Debug, Clone, Serialize)]
pub struct DriftPoint {
    pub omega: f64,
    pub mu1: Complex64,
    pub lambda_drift: f64,
    pub eigenfunction_drift: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Log-log fit of the eigenvalue drift against frequency.
#[derive(Debug, Clone, Serialize)]
pub struct DriftReport {
    pub target_lambda: f64,
    pub points: Vec<DriftPoint>,
    pub slope: f64,
    pub eigenfunction_slope: f64,
    /// Frequencies dropped because the drift was below the numerical floor.
    pub excluded: Vec<f64>,
}

/// Drift below this is treated as numerical noise.
pub const DRIFT_FLOOR: f64 = 1e-12;

/// Resonance drift over a frequency grid.
pub fn drift_slope(
    surface: &Surface,
    nodes: &NodeSet,
    base: &MediumParams,
    target: f64,
    omegas: &[f64],
    tol: f64,
) -> Result<DriftReport> {
    if omegas.len() < 5 {
        return invalid("drift fits need at least 5 frequencies");
    }
    if omegas.iter().any(|w| !(*w > 0.0)) {
        return invalid("drift frequencies must be positive");
    }
    let problem = ResonanceProblem::new(surface, nodes)?;
    let points: Vec<DriftPoint> = omegas
        .par_iter()
        .map(|&omega| {
            let r = problem.find(&MediumParams { omega, ..*base }, target, tol)?;
            Ok(DriftPoint {
                omega,
                mu1: r.mu1,
                lambda_drift: r.drift,
                eigenfunction_drift: r.eigenfunction_drift,
                residual: r.residual,
                iterations: r.iterations,
            })
        })
        .collect::<Result<_>>()?;
    let excluded: Vec<f64> = points.iter().filter(|p| p.lambda_drift < DRIFT_FLOOR).map(|p| p.omega).collect();
    if !excluded.is_empty() {
        log::warn!("drift below the numerical floor at omega = {excluded:?}; excluded from the fit");
    }
    let fit = |f: &dyn Fn(&DriftPoint) -> f64| {
        let pts: Vec<(f64, f64)> =
            points.iter().filter(|p| f(p) >= DRIFT_FLOOR).map(|p| (p.omega.ln(), f(p).ln())).collect();
        log_slope(&pts)
    };
    let slope = fit(&|p| p.lambda_drift);
    let eigenfunction_slope = fit(&|p| p.eigenfunction_drift);
    Ok(DriftReport { target_lambda: target, points, slope, eigenfunction_slope, excluded })
}

fn log_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `||(M(omega) - M(0)) P0||_2` where `P0` removes the mean of the density.
pub fn static_deviation(surface: &Surface, nodes: &NodeSet, params: &MediumParams) -> Result<f64> {
    let ops = LaplaceOperators::assemble(surface, nodes)?;
    let mut ctx = ResonanceContext::new(surface, nodes, &ops)?;
    let diff = ctx.operator(params)? - ctx.static_operator(params)?;
    let basis = nodes.basis.as_ref().expect("surface basis");
    // Mean functional on coefficients.
    let ell = basis.eval.transpose() * &nodes.weights;
    let u = ell.normalize().map(Complex64::from);
    let m = diff.nrows();
    let p0 = DMatrix::<Complex64>::identity(m, m) - &u * u.adjoint();
    Ok((diff * p0).singular_values().max())
}

/// Incident fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Incident {
    /// `exp(i k0 d.x)` with unit `direction`.
    PlaneWave { direction: [f64; 3] },
    /// Outgoing point source `exp(i k0 r) / (4 pi r)` at `position`.
    PointSource { position: [f64; 3] },
}

impl Incident {
    /// Value and gradient at `x`.
    #[must_use]
    pub fn eval(&self, k0: Complex64, x: &Vector3<f64>) -> (Complex64, Vector3<Complex64>) {
        let i = Complex64::i();
        match self {
            Incident::PlaneWave { direction } => {
                let d = Vector3::from(*direction).normalize();
                let u = (i * k0 * d.dot(x)).exp();
                (u, d.map(|c| i * k0 * c * u))
            }
            Incident::PointSource { position } => {
                let r_vec = x - Vector3::from(*position);
                let r = r_vec.norm();
                let u = (i * k0 * r).exp() / (4.0 * std::f64::consts::PI * r);
                let du = u * (i * k0 - 1.0 / r) / r;
                (u, r_vec.map(|c| du * c))
            }
        }
    }
}

/// Densities solving the transmission problem.
#[derive(Debug, Clone)]
pub struct ScatteringSolution {
    pub params: MediumParams,
    /// Interior density coefficients.
    pub phi: DVector<Complex64>,
    /// Exterior density coefficients.
    pub psi: DVector<Complex64>,
    /// 2-norm condition number of the block system.
    pub condition: f64,
    /// Smallest singular value of the resonance operator.
    pub resonance_residual: f64,
    pub near_resonant: bool,
    incident: Incident,
}

/// Resonance residual below which a solve is flagged near-resonant.
pub const NEAR_RESONANT: f64 = 1e-6;

/// Solves the block boundary system for a given incident field.
pub fn solve_scattering(
    surface: &Surface,
    nodes: &NodeSet,
    params: &MediumParams,
    incident: Incident,
) -> Result<ScatteringSolution> {
    params.validate()?;
    if surface.dim() != 3 || nodes.basis.is_none() {
        return invalid("the Helmholtz transmission problem is implemented for surfaces only");
    }
    if params.omega == 0.0 {
        return invalid("scattering needs omega > 0");
    }
    let size = params.electrical_size(surface);
    if size >= QUASI_STATIC_CEILING {
        return invalid(format!("k diam = {size:.3} exceeds the quasi-static ceiling {QUASI_STATIC_CEILING}"));
    }
    let basis = nodes.basis.as_ref().expect("surface basis");
    let m = basis.eval.ncols();
    let ops = LaplaceOperators::assemble(surface, nodes)?;
    let mut ctx = ResonanceContext::new(surface, nodes, &ops)?;
    let (s0, k0) = ctx.exterior(params)?;
    let (s1, k1) = ctx.pair(params.k1())?;
    let half = DMatrix::<Complex64>::identity(m, m) * Complex64::from(0.5);
    let mu0 = Complex64::from(params.mu0);
    let mu1 = params.mu1;
    let mut block = DMatrix::<Complex64>::zeros(2 * m, 2 * m);
    block.view_mut((0, 0), (m, m)).copy_from(&s1);
    block.view_mut((0, m), (m, m)).copy_from(&(-&s0));
    block.view_mut((m, 0), (m, m)).copy_from(&((&k1 - &half) * mu1));
    block.view_mut((m, m), (m, m)).copy_from(&(-(&k0 + &half) * mu0));
    let kk = params.k0();
    let mut u0 = DVector::<Complex64>::zeros(nodes.len());
    let mut du0 = DVector::<Complex64>::zeros(nodes.len());
    for (j, x) in nodes.positions.iter().enumerate() {
        let (u, g) = incident.eval(kk, x);
        u0[j] = u;
        let n = nodes.normals[j];
        du0[j] = g[0] * n.x + g[1] * n.y + g[2] * n.z;
    }
    let analysis = basis.analysis.map(Complex64::from);
    let mut rhs = DVector::<Complex64>::zeros(2 * m);
    rhs.rows_mut(0, m).copy_from(&(&analysis * u0));
    rhs.rows_mut(m, m).copy_from(&(&analysis * du0 * mu0));
    let sv = block.clone().singular_values();
    let condition = sv.max() / sv.min();
    let sol = block.lu().solve(&rhs).ok_or_else(|| Error::Numerical("transmission system is singular".into()))?;
    let resonance = if (params.mu1 - params.mu0).norm() == 0.0 {
        f64::INFINITY
    } else {
        residual_of(&ctx.operator(params)?).sigma_min
    };
    let near_resonant = resonance < NEAR_RESONANT;
    if near_resonant {
        log::warn!("near-resonant transmission solve (residual {resonance:.3e}, condition {condition:.3e})");
    }
    Ok(ScatteringSolution {
        params: *params,
        phi: sol.rows(0, m).into_owned(),
        psi: sol.rows(m, m).into_owned(),
        condition,
        resonance_residual: resonance,
        near_resonant,
        incident,
    })
}

impl ScatteringSolution {
    fn nodal(&self, nodes: &NodeSet, c: &DVector<Complex64>) -> DVector<Complex64> {
        nodes.basis.as_ref().expect("surface basis").eval.map(Complex64::from) * c
    }

    /// Total field `u` at targets (interior or exterior).
    pub fn total_field(&self, surface: &Surface, nodes: &NodeSet, targets: &[Vector3<f64>]) -> Result<Vec<Complex64>> {
        let (inside, outside): (Vec<usize>, Vec<usize>) =
            (0..targets.len()).partition(|&i| is_inside(surface, nodes, &targets[i]));
        let mut out = vec![Complex64::new(0.0, 0.0); targets.len()];
        let k0 = self.params.k0();
        if !outside.is_empty() {
            let pts: Vec<Vector3<f64>> = outside.iter().map(|&i| targets[i]).collect();
            let s = evaluate_layer_potential(surface, nodes, &self.nodal(nodes, &self.psi), KernelKind::helmholtz_single(k0), &pts)?;
            for (j, &i) in outside.iter().enumerate() {
                out[i] = self.incident.eval(k0, &targets[i]).0 + s[j];
            }
        }
        if !inside.is_empty() {
            let pts: Vec<Vector3<f64>> = inside.iter().map(|&i| targets[i]).collect();
            let s = evaluate_layer_potential(
                surface,
                nodes,
                &self.nodal(nodes, &self.phi),
                KernelKind::helmholtz_single(self.params.k1()),
                &pts,
            )?;
            for (j, &i) in inside.iter().enumerate() {
                out[i] = s[j];
            }
        }
        Ok(out)
    }

    /// Scattered field `u - u0` outside the inclusion.
    pub fn scattered_field(&self, surface: &Surface, nodes: &NodeSet, targets: &[Vector3<f64>]) -> Result<Vec<Complex64>> {
        if targets.iter().any(|t| is_inside(surface, nodes, t)) {
            return invalid("scattered field targets must lie outside the inclusion");
        }
        evaluate_layer_potential(surface, nodes, &self.nodal(nodes, &self.psi), KernelKind::helmholtz_single(self.params.k0()), targets)
    }

    /// Far-field pattern `A(xhat)` with `u - u0 ~ A exp(i k0 r) / r`.
    #[must_use]
    pub fn far_field(&self, nodes: &NodeSet, directions: &[Vector3<f64>]) -> Vec<Complex64> {
        let k0 = self.params.k0();
        let psi = self.nodal(nodes, &self.psi);
        directions
            .iter()
            .map(|d| {
                let d = d.normalize();
                let sum: Complex64 = (0..nodes.len())
                    .map(|j| (-Complex64::i() * k0 * d.dot(&nodes.positions[j])).exp() * psi[j] * nodes.weights[j])
                    .sum();
                -sum / (4.0 * std::f64::consts::PI)
            })
            .collect()
    }

    /// Relative jump `|u_int - u_ext|` of the two representations on the
    /// boundary at every `stride`-th node.
    pub fn continuity_error(&self, surface: &Surface, nodes: &NodeSet, stride: usize) -> Result<f64> {
        let pts: Vec<Vector3<f64>> = nodes.positions.iter().step_by(stride.max(1)).copied().collect();
        let k0 = self.params.k0();
        let ext = evaluate_layer_potential(surface, nodes, &self.nodal(nodes, &self.psi), KernelKind::helmholtz_single(k0), &pts)?;
        let int = evaluate_layer_potential(
            surface,
            nodes,
            &self.nodal(nodes, &self.phi),
            KernelKind::helmholtz_single(self.params.k1()),
            &pts,
        )?;
        let mut scale = 0.0f64;
        let mut worst = 0.0f64;
        for (j, x) in pts.iter().enumerate() {
            let u0 = self.incident.eval(k0, x).0;
            let outer = u0 + ext[j];
            scale = scale.max(outer.norm()).max(int[j].norm());
            worst = worst.max((outer - int[j]).norm());
        }
        Ok(worst / scale.max(f64::MIN_POSITIVE))
    }
}

/// Inside test through the projected foot point and its outward normal.
#[must_use]
pub fn is_inside(surface: &Surface, nodes: &NodeSet, z: &Vector3<f64>) -> bool {
    let proj = project(surface, nodes, z);
    let p = Surface::chart_point_for_direction(&proj.direction);
    match surface.jet(&p) {
        Ok(jet) => (z - jet.position).dot(&jet.normal) < 0.0,
        Err(_) => false,
    }
}

/// Solves and evaluates the scattered field `u - u0` at exterior targets.
pub fn scattered_field(
    surface: &Surface,
    nodes: &NodeSet,
    params: &MediumParams,
    incident: Incident,
    targets: &[Vector3<f64>],
) -> Result<(ScatteringSolution, Vec<Complex64>)> {
    let sol = solve_scattering(surface, nodes, params, incident)?;
    let values = sol.scattered_field(surface, nodes, targets)?;
    Ok((sol, values))
}
