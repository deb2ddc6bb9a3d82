//! Symmetrized NP eigenproblem, fractional powers of `|D|`, and spectral
//! diagnostics.
//!
//! `K*` is self-adjoint for the inner product `-<S f, g>`, so the eigenproblem
//! is posed in Galerkin form with test functions `S b_a`:
//! `<K* phi - lambda phi, S b_a> = 0`. Both sides are symmetric up to
//! discretization error, which is reported as the asymmetry.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{NodeSet, Surface};
use crate::potential::{assemble_laplace_pair, DenseOperator, KernelKind};

/// Eigenpairs of `K*`.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub surface: String,
    /// Eigenvalues in decreasing order.
    pub values: Vec<f64>,
    /// Basis coefficients of each eigenfunction (columns).
    pub coeffs: DMatrix<f64>,
    /// Nodal values, normalized in `L^2` of the boundary (columns).
    pub functions: DMatrix<f64>,
    /// `1 / (-<S phi, phi>)` for each normalized eigenfunction.
    pub weights: Vec<f64>,
    /// Relative Frobenius asymmetry of the Galerkin matrix before symmetrizing.
    pub asymmetry: f64,
    /// `||K* phi - lambda phi|| / ||phi||` per eigenpair.
    pub residuals: Vec<f64>,
}

/// Operators needed to build an eigensystem, assembled once.
#[derive(Debug, Clone)]
pub struct LaplaceOperators {
    pub single: DenseOperator<f64>,
    pub npstar: DenseOperator<f64>,
    /// Groups of basis indices that the operators do not couple.
    pub blocks: Vec<Vec<usize>>,
}

impl LaplaceOperators {
    pub fn assemble(surface: &Surface, nodes: &NodeSet) -> Result<Self> {
        let mut ops = assemble_laplace_pair(surface, nodes, &[KernelKind::LaplaceSingle, KernelKind::LaplaceNpStar])?;
        let npstar = ops.pop().expect("two operators");
        let single = ops.pop().expect("two operators");
        let blocks = match &nodes.basis {
            Some(b) if surface.is_axisymmetric() => azimuthal_blocks(b.degree),
            _ => vec![(0..nodes.space_dim()).collect()],
        };
        Ok(Self { single, npstar, blocks })
    }
}

/// Harmonic indices grouped by signed azimuthal order.
#[must_use]
pub fn azimuthal_blocks(degree: usize) -> Vec<Vec<usize>> {
    let d = degree as i64;
    (-d..=d)
        .map(|m| (m.unsigned_abs() as usize..=degree).map(|l| ((l * l + l) as i64 + m) as usize).collect())
        .collect()
}

/// Contiguous set of eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralBand {
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl SpectralBand {
    pub fn new(lambda_min: f64, lambda_max: f64) -> Result<Self> {
        if !(lambda_min.is_finite() && lambda_max.is_finite()) || lambda_min > lambda_max {
            return invalid(format!("band [{lambda_min}, {lambda_max}] is empty or not finite"));
        }
        Ok(Self { lambda_min, lambda_max })
    }

    #[must_use]
    pub fn contains(&self, lambda: f64) -> bool {
        lambda >= self.lambda_min && lambda <= self.lambda_max
    }

    /// Indices of the eigenvalues inside the band.
    #[must_use]
    pub fn members(&self, eig: &EigenSystem) -> Vec<usize> {
        (0..eig.values.len()).filter(|&i| self.contains(eig.values[i])).collect()
    }
}

/// Mean-zero basis for curves: an orthonormal complement of the weights.
fn mean_zero_basis(w: &DVector<f64>) -> DMatrix<f64> {
    let n = w.len();
    let u = w.normalize();
    // Householder reflector mapping e_0 to u; its other columns span u-perp.
    let mut v = u.clone();
    v[0] -= 1.0;
    let vn = v.norm_squared();
    let h = if vn < 1e-300 {
        DMatrix::identity(n, n)
    } else {
        DMatrix::identity(n, n) - (&v * v.transpose()) * (2.0 / vn)
    };
    h.columns(1, n - 1).into_owned()
}

/// Builds the eigensystem of `K*` from assembled operators.
pub fn symmetrized_eigensystem(nodes: &NodeSet, ops: &LaplaceOperators) -> Result<EigenSystem> {
    let w = &nodes.weights;
    let n = nodes.len();
    // Per block: nodal basis columns, S and K* applied to them.
    let parts: Vec<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> = match &nodes.basis {
        Some(b) => ops
            .blocks
            .iter()
            .map(|idx| (b.eval.select_columns(idx), ops.single.range.select_columns(idx), ops.npstar.range.select_columns(idx)))
            .collect(),
        None => {
            let q = mean_zero_basis(w);
            let (rs, rk) = (&ops.single.range * &q, &ops.npstar.range * &q);
            vec![(q, rs, rk)]
        }
    };
    let mut values = Vec::new();
    let mut funcs: Vec<DVector<f64>> = Vec::new();
    let mut coeffs: Vec<DVector<f64>> = Vec::new();
    let mut s_funcs: Vec<DVector<f64>> = Vec::new();
    let mut k_funcs: Vec<DVector<f64>> = Vec::new();
    let (mut asym_num, mut asym_den) = (0.0, 0.0);
    let space = nodes.space_dim();
    for (bi, (basis, rs, rk)) in parts.iter().enumerate() {
        let wrs = weighted(rs, w);
        let g = -(wrs.transpose() * basis);
        let ga = -(wrs.transpose() * rk);
        asym_num += (&ga - ga.transpose()).norm_squared();
        asym_den += ga.norm_squared();
        let chol = Cholesky::new(symmetrize(g)).ok_or_else(|| {
            Error::Numerical("-S is not positive definite on the discrete space (refine the node set)".into())
        })?;
        let (vals, vecs) = generalized_eigen(&chol, &symmetrize(ga));
        for (j, v) in vals.iter().enumerate() {
            let c = vecs.column(j).into_owned();
            values.push(*v);
            funcs.push(basis * &c);
            s_funcs.push(rs * &c);
            k_funcs.push(rk * &c);
            coeffs.push(match &nodes.basis {
                Some(_) => {
                    let mut full = DVector::zeros(space);
                    for (k, &idx) in ops.blocks[bi].iter().enumerate() {
                        full[idx] = c[k];
                    }
                    full
                }
                None => basis * &c,
            });
        }
    }
    if nodes.basis.is_none() {
        // Curves: append the equilibrium density (eigenvalue 1/2).
        let (lam, phi) = equilibrium_density(nodes, ops)?;
        values.push(lam);
        s_funcs.push(ops.single.apply(nodes, &phi));
        k_funcs.push(ops.npstar.apply(nodes, &phi));
        coeffs.push(phi.clone());
        funcs.push(phi);
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut functions = DMatrix::zeros(n, order.len());
    let mut out_coeffs = DMatrix::zeros(space, order.len());
    let mut out_vals = Vec::with_capacity(order.len());
    let mut weights = Vec::with_capacity(order.len());
    let mut residuals = Vec::with_capacity(order.len());
    for (col, &i) in order.iter().enumerate() {
        let norm = nodes.inner(&funcs[i], &funcs[i]).sqrt();
        let phi = &funcs[i] / norm;
        let quad = -nodes.inner(&s_funcs[i], &funcs[i]) / (norm * norm);
        weights.push(if quad.abs() > 1e-14 { 1.0 / quad } else { f64::NAN });
        let r = (&k_funcs[i] - &funcs[i] * values[i]) / norm;
        residuals.push(nodes.inner(&r, &r).sqrt());
        functions.set_column(col, &phi);
        out_coeffs.set_column(col, &(&coeffs[i] / norm));
        out_vals.push(values[i]);
    }
    Ok(EigenSystem {
        surface: ops.single.surface.clone(),
        values: out_vals,
        coeffs: out_coeffs,
        functions,
        weights,
        asymmetry: (asym_num / asym_den.max(1e-300)).sqrt(),
        residuals,
    })
}

/// Assembles the operators and computes the eigensystem.
pub fn eigensystem(surface: &Surface, nodes: &NodeSet) -> Result<(LaplaceOperators, EigenSystem)> {
    let ops = LaplaceOperators::assemble(surface, nodes)?;
    let eig = symmetrized_eigensystem(nodes, &ops)?;
    Ok((ops, eig))
}

// Eigenvector of K* for 1/2 on a curve, by inverse iteration.
fn equilibrium_density(nodes: &NodeSet, ops: &LaplaceOperators) -> Result<(f64, DVector<f64>)> {
    let n = nodes.len();
    let k = ops.npstar.node_matrix(nodes);
    let shift = 0.5 + 1e-9;
    let lu = (&k - DMatrix::identity(n, n) * shift).lu();
    let mut x = DVector::from_element(n, 1.0);
    for _ in 0..3 {
        x = lu
            .solve(&x)
            .ok_or_else(|| Error::Numerical("inverse iteration for the equilibrium density failed".into()))?;
        x /= x.norm();
    }
    let kx = &k * &x;
    let lam = nodes.inner(&kx, &x) / nodes.inner(&x, &x);
    Ok((lam, x))
}

fn weighted(m: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= w[i];
    }
    out
}

pub(crate) fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Solves `a x = lambda b x` with `b = L L^T`; vectors are `b`-orthonormal.
pub(crate) fn generalized_eigen(chol: &Cholesky<f64, Dyn>, a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let l = chol.l();
    let mut tmp = a.clone();
    // tmp = L^-1 a L^-T
    l.solve_lower_triangular_mut(&mut tmp);
    let mut tmp = tmp.transpose();
    l.solve_lower_triangular_mut(&mut tmp);
    let m = symmetrize(tmp);
    let eig = m.symmetric_eigen();
    let mut vecs = eig.eigenvectors;
    l.transpose().solve_upper_triangular_mut(&mut vecs);
    (eig.eigenvalues.iter().copied().collect(), vecs)
}

/// Groups eigenvalues (sorted decreasingly) into clusters of near-equal values.
#[must_use]
pub fn multiplicity_groups(values: &[f64], tol: f64) -> Vec<usize> {
    let mut groups = Vec::with_capacity(values.len());
    let mut g = 0;
    for (i, v) in values.iter().enumerate() {
        if i > 0 && (values[i - 1] - v).abs() > tol * values[i - 1].abs().max(v.abs()).max(1e-12) {
            g += 1;
        }
        groups.push(g);
    }
    groups
}

/// Inverse of the plasmonic map: the inclusion coefficient that puts the
/// NP eigenvalue `lambda` at resonance against background `gamma_m`.
pub fn plasmonic_constant(lambda: f64, gamma_m: f64) -> Result<f64> {
    if !lambda.is_finite() || !gamma_m.is_finite() || gamma_m == 0.0 {
        return invalid("lambda and gamma_m must be finite, gamma_m nonzero");
    }
    if (2.0 * lambda - 1.0).abs() < 1e-14 {
        return invalid("lambda = 1/2 has no finite plasmonic constant");
    }
    Ok(gamma_m * (2.0 * lambda + 1.0) / (2.0 * lambda - 1.0))
}

/// Forward plasmonic map `(gc + gm) / (2 (gc - gm))`.
pub fn plasmonic_lambda(gamma_c: f64, gamma_m: f64) -> Result<f64> {
    if gamma_c == gamma_m {
        return invalid("equal coefficients have no plasmonic eigenvalue");
    }
    Ok((gamma_c + gamma_m) / (2.0 * (gamma_c - gamma_m)))
}

/// Real power `((-2S)_sym)^(-alpha)` in basis coordinates.
#[derive(Debug, Clone)]
pub struct FractionalOperator {
    pub alpha: f64,
    /// `m x m` matrix acting on basis coefficients.
    pub matrix: DMatrix<f64>,
}

impl FractionalOperator {
    /// Applies to nodal values.
    #[must_use]
    pub fn apply(&self, nodes: &NodeSet, phi: &DVector<f64>) -> DVector<f64> {
        nodes.synthesize(&(&self.matrix * nodes.analyze(phi)))
    }

    /// Applies to basis coefficients.
    #[must_use]
    pub fn apply_coeffs(&self, c: &DVector<f64>) -> DVector<f64> {
        &self.matrix * c
    }
}

/// Spectral decomposition of `-2S` in the `L^2` inner product, reusable for
/// several powers.
#[derive(Debug, Clone)]
pub struct SingleLayerSpectrum {
    dim: usize,
    parts: Vec<SpectrumPart>,
}

#[derive(Debug, Clone)]
struct SpectrumPart {
    indices: Vec<usize>,
    values: Vec<f64>,
    vectors: DMatrix<f64>,
    mass: DMatrix<f64>,
}

impl SingleLayerSpectrum {
    pub fn new(nodes: &NodeSet, single: &DenseOperator<f64>) -> Result<Self> {
        Self::with_blocks(nodes, single, &[(0..nodes.space_dim()).collect()])
    }

    /// Decomposes block by block; `blocks` must be index groups that `S` does
    /// not couple (see [`LaplaceOperators::blocks`]).
    pub fn with_blocks(nodes: &NodeSet, single: &DenseOperator<f64>, blocks: &[Vec<usize>]) -> Result<Self> {
        let dim = nodes.space_dim();
        let parts = blocks
            .iter()
            .map(|idx| {
                let basis = match &nodes.basis {
                    Some(b) => b.eval.select_columns(idx),
                    None => DMatrix::identity(nodes.len(), nodes.len()).select_columns(idx),
                };
                let range = single.range.select_columns(idx);
                let wb = weighted(&basis, &nodes.weights);
                let mass = symmetrize(wb.transpose() * &basis);
                let gs = symmetrize(-(weighted(&range, &nodes.weights).transpose() * &basis) * 2.0);
                let chol =
                    Cholesky::new(mass.clone()).ok_or_else(|| Error::Numerical("mass matrix is singular".into()))?;
                let (values, vectors) = generalized_eigen(&chol, &gs);
                if let Some(v) = values.iter().copied().find(|v| *v <= 0.0) {
                    return Err(Error::Numerical(format!(
                        "-S is not positive definite (eigenvalue {v:e}); fractional powers need it"
                    )));
                }
                Ok(SpectrumPart { indices: idx.clone(), values, vectors, mass })
            })
            .collect::<Result<_>>()?;
        Ok(Self { dim, parts })
    }

    /// `|D|^alpha` with `|D|^-1 = -2S`.
    #[must_use]
    pub fn power(&self, alpha: f64) -> FractionalOperator {
        let mut matrix = DMatrix::zeros(self.dim, self.dim);
        for part in &self.parts {
            let v = &part.vectors;
            let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |r, c| v[(r, c)] * part.values[c].powf(-alpha));
            let block = scaled * v.transpose() * &part.mass;
            for (a, &i) in part.indices.iter().enumerate() {
                for (b, &j) in part.indices.iter().enumerate() {
                    matrix[(i, j)] = block[(a, b)];
                }
            }
        }
        FractionalOperator { alpha, matrix }
    }
}

/// Convenience wrapper building `|D|^alpha` directly.
pub fn fractional_d_power(nodes: &NodeSet, single: &DenseOperator<f64>, alpha: f64) -> Result<FractionalOperator> {
    if !alpha.is_finite() {
        return invalid("alpha must be finite");
    }
    Ok(SingleLayerSpectrum::new(nodes, single)?.power(alpha))
}

/// Number of leading eigenvalues (by magnitude) that agree between a coarse
/// and a fine discretization to relative tolerance `rel_tol`.
#[must_use]
pub fn converged_count(coarse: &[f64], fine: &[f64], rel_tol: f64) -> usize {
    let sort = |v: &[f64]| {
        let mut a: Vec<f64> = v.to_vec();
        a.sort_by(|x, y| y.abs().total_cmp(&x.abs()));
        a
    };
    let (c, f) = (sort(coarse), sort(fine));
    c.iter()
        .zip(&f)
        .take_while(|(a, b)| (a.abs() - b.abs()).abs() <= rel_tol * b.abs())
        .count()
}

/// The band spanned by the `count` smallest positive eigenvalues among those
/// that agree between a coarse and a fine discretization.
pub fn deepest_converged_band(fine: &[f64], coarse: &[f64], rel_tol: f64, count: usize) -> Result<SpectralBand> {
    if count == 0 {
        return invalid("band count must be positive");
    }
    let n_conv = converged_count(coarse, fine, rel_tol);
    if n_conv == 0 {
        return Err(Error::NoConvergence("no eigenvalue agrees between the two resolutions".into()));
    }
    let mut mags: Vec<f64> = fine.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let floor = mags[n_conv - 1];
    let mut pos: Vec<f64> = fine.iter().copied().filter(|v| *v > 0.0 && *v >= floor).collect();
    pos.sort_by(|a, b| b.total_cmp(a));
    if pos.len() < count {
        return Err(Error::NoConvergence(format!(
            "only {} converged positive eigenvalues, {count} requested",
            pos.len()
        )));
    }
    let tail = &pos[pos.len() - count..];
    SpectralBand::new(tail[count - 1], tail[0])
}

/// Power-law fit of the eigenvalue decay.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WeylReport {
    /// Least-squares slope of `log |lambda_j|` against `log j`.
    pub slope: f64,
    pub expected_slope: f64,
    /// Observed counting function over the symbol-based prediction at the
    /// threshold `|lambda_{j_max}|` (surfaces only, otherwise NaN).
    pub volume_ratio: f64,
    pub j_min: usize,
    pub j_max: usize,
}

/// Fits the decay of `|lambda_j|` (1-based `j`) over `[j_min, j_max]`.
///
/// `phase_volume` is `int_{boundary} int_0^{2 pi} r(x, w)^2 dw dsigma` for the
/// symbol profile `r`; pass `None` to skip the volume comparison.
pub fn weyl_diagnostic(
    values: &[f64],
    dim: usize,
    j_min: usize,
    j_max: usize,
    phase_volume: Option<f64>,
) -> Result<WeylReport> {
    if j_min < 1 || j_max <= j_min + 1 || j_max > values.len() {
        return invalid(format!(
            "fit window [{j_min}, {j_max}] needs 1 <= j_min < j_max <= {} converged eigenvalues",
            values.len()
        ));
    }
    let mut mags: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let pts: Vec<(f64, f64)> = (j_min..=j_max).map(|j| ((j as f64).ln(), mags[j - 1].max(1e-300).ln())).collect();
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx).powi(2)));
    let slope = sxy / sxx;
    let volume_ratio = match phase_volume {
        Some(v) if dim == 3 => {
            // N(t) ~ (2 pi)^-2 * v / (2 (4t)^2): principal symbol r / (4 |xi|).
            let t = mags[j_max - 1];
            let predicted = v / (2.0 * 16.0 * t * t) / (4.0 * std::f64::consts::PI.powi(2));
            j_max as f64 / predicted
        }
        _ => f64::NAN,
    };
    Ok(WeylReport {
        slope,
        expected_slope: -1.0 / (dim as f64 - 1.0),
        volume_ratio,
        j_min,
        j_max,
    })
}
