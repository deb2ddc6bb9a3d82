//! Smooth closed curves and surfaces, local jets and quadrature node sets.
//!
//! Every surface is the image of the unit sphere under a smooth map, and
//! every curve the image of the circle. Local coordinates on surfaces are
//! spherical angles in one of two frames whose poles are orthogonal, so any
//! point sits well inside at least one chart.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{gauss_legendre, sh_count, ShTable};

/// Declarative description of a boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceSpec {
    Sphere { radius: f64 },
    Ellipsoid { a: f64, b: f64, c: f64 },
    /// Surface of revolution about the z-axis with radius
    /// `R(theta) = sum_k profile[k] cos(k theta)` in the polar angle.
    Revolution { profile: Vec<f64> },
    Ellipse { a: f64, b: f64 },
    /// Star-shaped curve `r(t) = mean + sum_k cos[k] cos((k+1)t) + sin[k] sin((k+1)t)`.
    Star { mean: f64, cos: Vec<f64>, sin: Vec<f64> },
}

impl SurfaceSpec {
    /// Parses shorthand such as `sphere:1`, `spheroid:1,1,3` or `ellipse:2,1`.
    pub fn parse(text: &str) -> Result<Self> {
        let (name, args) = text.split_once(':').unwrap_or((text, ""));
        let nums: Vec<f64> = if args.trim().is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Validation(format!("bad number '{t}' in '{text}'"))))
                .collect::<Result<_>>()?
        };
        let want = |n: usize| -> Result<()> {
            if nums.len() == n {
                Ok(())
            } else {
                invalid(format!("'{name}' expects {n} parameters, got {}", nums.len()))
            }
        };
        let spec = match name.trim().to_ascii_lowercase().as_str() {
            "sphere" => {
                if nums.is_empty() {
                    SurfaceSpec::Sphere { radius: 1.0 }
                } else {
                    want(1)?;
                    SurfaceSpec::Sphere { radius: nums[0] }
                }
            }
            "ellipsoid" | "spheroid" => {
                want(3)?;
                SurfaceSpec::Ellipsoid { a: nums[0], b: nums[1], c: nums[2] }
            }
            "revolution" => SurfaceSpec::Revolution { profile: nums },
            "circle" => {
                let r = if nums.is_empty() { 1.0 } else { want(1).map(|()| nums[0])? };
                SurfaceSpec::Ellipse { a: r, b: r }
            }
            "ellipse" => {
                want(2)?;
                SurfaceSpec::Ellipse { a: nums[0], b: nums[1] }
            }
            "star" => {
                if nums.is_empty() || nums.len().is_multiple_of(2) {
                    return invalid("'star' expects mean followed by (cos, sin) pairs");
                }
                let (cos, sin) = nums[1..].chunks(2).map(|p| (p[0], p[1])).unzip();
                SurfaceSpec::Star { mean: nums[0], cos, sin }
            }
            other => return invalid(format!("unknown surface kind '{other}'")),
        };
        Ok(spec)
    }

    /// Ambient dimension.
    #[must_use]
    pub fn dim(&self) -> usize {
        match self {
            SurfaceSpec::Ellipse { .. } | SurfaceSpec::Star { .. } => 2,
            _ => 3,
        }
    }

    /// Canonical one-line text form.
    #[must_use]
    pub fn label(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        match self {
            SurfaceSpec::Sphere { radius } => format!("sphere:{radius}"),
            SurfaceSpec::Ellipsoid { a, b, c } => format!("ellipsoid:{a},{b},{c}"),
            SurfaceSpec::Revolution { profile } => format!("revolution:{}", join(profile)),
            SurfaceSpec::Ellipse { a, b } => format!("ellipse:{a},{b}"),
            SurfaceSpec::Star { mean, cos, sin } => {
                let mut v = vec![*mean];
                for (c, s) in cos.iter().zip(sin) {
                    v.push(*c);
                    v.push(*s);
                }
                format!("star:{}", join(&v))
            }
        }
    }
}

/// Point in a coordinate chart. Curves use chart 0 with `u[0] = t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub chart: usize,
    pub u: [f64; 2],
}

impl ChartPoint {
    #[must_use]
    pub fn new(chart: usize, u: [f64; 2]) -> Self {
        Self { chart, u }
    }
}

/// Second-order local geometry at a point.
#[derive(Debug, Clone)]
pub struct GeometryJet {
    pub position: Vector3<f64>,
    /// Outward unit normal.
    pub normal: Vector3<f64>,
    /// Columns are the coordinate tangent vectors.
    pub tangents: Vec<Vector3<f64>>,
    pub metric: DMatrix<f64>,
    /// Second fundamental form, positive on convex boundaries.
    pub second_form: DMatrix<f64>,
    /// Principal curvatures in ascending order.
    pub curvatures: Vec<f64>,
    /// Metric-orthonormal principal directions in chart coordinates (columns).
    pub directions: DMatrix<f64>,
    /// Average of the principal curvatures.
    pub mean_curvature: f64,
}

impl GeometryJet {
    #[must_use]
    pub fn metric_inverse(&self) -> DMatrix<f64> {
        self.metric.clone().try_inverse().expect("metric is positive definite")
    }

    /// Area element `sqrt(det g)` of the chart.
    #[must_use]
    pub fn area_element(&self) -> f64 {
        self.metric.determinant().sqrt()
    }
}

/// A validated smooth closed boundary.
#[derive(Debug, Clone)]
pub struct Surface {
    spec: SurfaceSpec,
}

const CHART_MIN_SIN: f64 = 1e-8;

impl Surface {
    pub fn new(spec: SurfaceSpec) -> Result<Self> {
        let bad = |m: &str| invalid(format!("{}: {m}", spec.label()));
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        match &spec {
            SurfaceSpec::Sphere { radius } => {
                if !finite_pos(*radius) {
                    return bad("radius must be positive");
                }
            }
            SurfaceSpec::Ellipsoid { a, b, c } => {
                if ![*a, *b, *c].into_iter().all(finite_pos) {
                    return bad("semi-axes must be positive");
                }
            }
            SurfaceSpec::Ellipse { a, b } => {
                if !finite_pos(*a) || !finite_pos(*b) {
                    return bad("semi-axes must be positive");
                }
            }
            SurfaceSpec::Revolution { profile } => {
                if profile.is_empty() || profile.iter().any(|c| !c.is_finite()) {
                    return bad("profile needs finite coefficients");
                }
                let min = (0..=2000)
                    .map(|i| cheb(profile, (PI * i as f64 / 2000.0).cos()).0)
                    .fold(f64::INFINITY, f64::min);
                if min <= 0.0 {
                    return bad("profile radius must stay positive");
                }
            }
            SurfaceSpec::Star { mean, cos, sin } => {
                if cos.len() != sin.len() || !mean.is_finite() || cos.iter().chain(sin).any(|c| !c.is_finite()) {
                    return bad("coefficient lists must be finite and of equal length");
                }
                let s = Surface { spec: spec.clone() };
                let min = (0..4000)
                    .map(|i| s.star_radius(2.0 * PI * i as f64 / 4000.0).0)
                    .fold(f64::INFINITY, f64::min);
                if min <= 0.0 {
                    return bad("radius must stay positive (the curve self-intersects otherwise)");
                }
            }
        }
        Ok(Self { spec })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::new(SurfaceSpec::parse(text)?)
    }

    #[must_use]
    pub fn spec(&self) -> &SurfaceSpec {
        &self.spec
    }

    #[must_use]
    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// True when the boundary is invariant under rotations about the z-axis.
    #[must_use]
    pub fn is_axisymmetric(&self) -> bool {
        match &self.spec {
            SurfaceSpec::Sphere { .. } | SurfaceSpec::Revolution { .. } => true,
            SurfaceSpec::Ellipsoid { a, b, .. } => a == b,
            _ => false,
        }
    }

    /// Radius of a ball containing the boundary, centred at the origin.
    #[must_use]
    pub fn bounding_radius(&self) -> f64 {
        match &self.spec {
            SurfaceSpec::Sphere { radius } => *radius,
            SurfaceSpec::Ellipsoid { a, b, c } => a.max(*b).max(*c),
            SurfaceSpec::Ellipse { a, b } => a.max(*b),
            SurfaceSpec::Revolution { profile } => profile.iter().map(|c| c.abs()).sum(),
            SurfaceSpec::Star { mean, cos, sin } => mean.abs() + cos.iter().chain(sin).map(|c| c.abs()).sum::<f64>(),
        }
    }

    // ---- surfaces: X(s) for s on the unit sphere, extended to R^3 ----

    pub(crate) fn map(&self, s: &Vector3<f64>) -> Vector3<f64> {
        match &self.spec {
            SurfaceSpec::Sphere { radius } => s * *radius,
            SurfaceSpec::Ellipsoid { a, b, c } => Vector3::new(a * s.x, b * s.y, c * s.z),
            SurfaceSpec::Revolution { profile } => s * cheb(profile, s.z).0,
            _ => unreachable!("map is only defined for surfaces"),
        }
    }

    pub(crate) fn dmap(&self, s: &Vector3<f64>) -> Matrix3<f64> {
        match &self.spec {
            SurfaceSpec::Sphere { radius } => Matrix3::identity() * *radius,
            SurfaceSpec::Ellipsoid { a, b, c } => Matrix3::from_diagonal(&Vector3::new(*a, *b, *c)),
            SurfaceSpec::Revolution { profile } => {
                let (p, dp, _) = cheb(profile, s.z);
                let mut m = Matrix3::identity() * p;
                for i in 0..3 {
                    m[(i, 2)] += s[i] * dp;
                }
                m
            }
            _ => unreachable!(),
        }
    }

    fn d2map(&self, s: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> Vector3<f64> {
        match &self.spec {
            SurfaceSpec::Revolution { profile } => {
                let (_, dp, ddp) = cheb(profile, s.z);
                (b * a.z + a * b.z) * dp + s * (ddp * a.z * b.z)
            }
            _ => Vector3::zeros(),
        }
    }

    /// Area density of the surface relative to the unit sphere at `s`.
    pub(crate) fn sphere_jacobian(&self, s: &Vector3<f64>) -> f64 {
        let (t1, t2) = tangent_frame(s);
        let d = self.dmap(s);
        (d * t1).cross(&(d * t2)).norm()
    }

    // ---- curves: X(t) ----

    fn star_radius(&self, t: f64) -> (f64, f64, f64) {
        let SurfaceSpec::Star { mean, cos, sin } = &self.spec else { unreachable!() };
        let (mut r, mut dr, mut ddr) = (*mean, 0.0, 0.0);
        for (k, (c, s)) in cos.iter().zip(sin).enumerate() {
            let kf = (k + 1) as f64;
            let (sk, ck) = (kf * t).sin_cos();
            r += c * ck + s * sk;
            dr += kf * (-c * sk + s * ck);
            ddr -= kf * kf * (c * ck + s * sk);
        }
        (r, dr, ddr)
    }

    /// Curve position and its first two derivatives in the parameter.
    pub(crate) fn curve(&self, t: f64) -> [Vector3<f64>; 3] {
        match &self.spec {
            SurfaceSpec::Ellipse { a, b } => {
                let (s, c) = t.sin_cos();
                [
                    Vector3::new(a * c, b * s, 0.0),
                    Vector3::new(-a * s, b * c, 0.0),
                    Vector3::new(-a * c, -b * s, 0.0),
                ]
            }
            SurfaceSpec::Star { .. } => {
                let (r, dr, ddr) = self.star_radius(t);
                let (s, c) = t.sin_cos();
                [
                    Vector3::new(r * c, r * s, 0.0),
                    Vector3::new(dr * c - r * s, dr * s + r * c, 0.0),
                    Vector3::new(ddr * c - 2.0 * dr * s - r * c, ddr * s + 2.0 * dr * c - r * s, 0.0),
                ]
            }
            _ => unreachable!("curve is only defined in two dimensions"),
        }
    }

    // ---- charts ----

    /// Parameter-sphere direction of a chart point (surfaces only).
    pub fn direction(&self, p: &ChartPoint) -> Vector3<f64> {
        chart_frame(p.chart, p.u).0
    }

    /// Chart point for a unit direction, picking the better-conditioned chart.
    #[must_use]
    pub fn chart_point_for_direction(s: &Vector3<f64>) -> ChartPoint {
        let chart = if s.z.abs() <= s.x.abs().max(0.8) { 0 } else { 1 };
        ChartPoint { chart, u: chart_coords(chart, s) }
    }

    /// Position of a chart point.
    pub fn position(&self, p: &ChartPoint) -> Vector3<f64> {
        if self.dim() == 2 {
            self.curve(p.u[0])[0]
        } else {
            self.map(&self.direction(p))
        }
    }

    /// Named marked points: `pole` (top of the z-axis for surfaces, `t = pi/2`
    /// for curves) and `equator` (on the positive x-axis).
    pub fn named_point(&self, name: &str) -> Result<ChartPoint> {
        match (name, self.dim()) {
            ("pole", 3) => Ok(Self::chart_point_for_direction(&Vector3::z())),
            ("equator", 3) => Ok(Self::chart_point_for_direction(&Vector3::x())),
            ("pole", _) => Ok(ChartPoint::new(0, [PI / 2.0, 0.0])),
            ("equator", _) => Ok(ChartPoint::new(0, [0.0, 0.0])),
            _ => invalid(format!("unknown named point '{name}' (use pole or equator)")),
        }
    }

    /// Metric and second fundamental form at a chart point (surfaces only),
    /// without the principal-frame decomposition.
    pub(crate) fn forms(&self, p: &ChartPoint) -> Result<(Matrix2<f64>, Matrix2<f64>)> {
        if p.u[0].sin().abs() < CHART_MIN_SIN {
            return Err(Error::ChartSingularity(format!("chart {} is singular at theta = {}", p.chart, p.u[0])));
        }
        let (s, su, suu) = chart_frame(p.chart, p.u);
        let d = self.dmap(&s);
        let xu = [d * su[0], d * su[1]];
        let normal = xu[0].cross(&xu[1]).normalize();
        let g = Matrix2::new(xu[0].dot(&xu[0]), xu[0].dot(&xu[1]), xu[1].dot(&xu[0]), xu[1].dot(&xu[1]));
        let mut a = Matrix2::zeros();
        for i in 0..2 {
            for j in 0..2 {
                a[(i, j)] = -(self.d2map(&s, &su[i], &su[j]) + d * suu[i][j]).dot(&normal);
            }
        }
        Ok((g, a))
    }

    /// Local geometry at a chart point.
    pub fn jet(&self, p: &ChartPoint) -> Result<GeometryJet> {
        if self.dim() == 2 {
            return Ok(self.curve_jet(p.u[0]));
        }
        if p.chart > 1 {
            return invalid(format!("chart {} does not exist", p.chart));
        }
        let (s, su, suu) = chart_frame(p.chart, p.u);
        let sin_t = p.u[0].sin();
        if sin_t.abs() < CHART_MIN_SIN {
            return Err(Error::ChartSingularity(format!(
                "chart {} is singular at theta = {}",
                p.chart, p.u[0]
            )));
        }
        let d = self.dmap(&s);
        let xu = [d * su[0], d * su[1]];
        let mut xuu = [[Vector3::zeros(); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                xuu[i][j] = self.d2map(&s, &su[i], &su[j]) + d * suu[i][j];
            }
        }
        let n = xu[0].cross(&xu[1]);
        let normal = n / n.norm();
        let metric = DMatrix::from_fn(2, 2, |i, j| xu[i].dot(&xu[j]));
        let second = DMatrix::from_fn(2, 2, |i, j| -xuu[i][j].dot(&normal));
        let (curvatures, directions) = principal(&metric, &second);
        let mean_curvature = curvatures.iter().sum::<f64>() / 2.0;
        Ok(GeometryJet {
            position: self.map(&s),
            normal,
            tangents: xu.to_vec(),
            metric,
            second_form: second,
            curvatures,
            directions,
            mean_curvature,
        })
    }

    fn curve_jet(&self, t: f64) -> GeometryJet {
        let [x, dx, ddx] = self.curve(t);
        let speed = dx.norm();
        let normal = Vector3::new(dx.y, -dx.x, 0.0) / speed;
        let g = speed * speed;
        let h = -ddx.dot(&normal);
        GeometryJet {
            position: x,
            normal,
            tangents: vec![dx],
            metric: DMatrix::from_element(1, 1, g),
            second_form: DMatrix::from_element(1, 1, h),
            curvatures: vec![h / g],
            directions: DMatrix::from_element(1, 1, 1.0 / speed),
            mean_curvature: h / g,
        }
    }

    /// Transition of a cotangent pair from its chart to `target`.
    pub fn change_chart(&self, p: &ChartPoint, xi: [f64; 2], target: usize) -> Result<(ChartPoint, [f64; 2])> {
        if self.dim() == 2 || p.chart == target {
            return Ok((*p, xi));
        }
        let (s, su, _) = chart_frame(p.chart, p.u);
        let q = ChartPoint { chart: target, u: chart_coords(target, &s) };
        let (_, sv, _) = chart_frame(target, q.u);
        // du/dv via the tangent-plane pseudo-inverse of ds/du.
        let gram = nalgebra::Matrix2::new(su[0].dot(&su[0]), su[0].dot(&su[1]), su[1].dot(&su[0]), su[1].dot(&su[1]));
        let ginv = gram
            .try_inverse()
            .ok_or_else(|| Error::ChartSingularity("source chart is singular".into()))?;
        let mut out = [0.0; 2];
        for (j, svj) in sv.iter().enumerate() {
            let rhs = nalgebra::Vector2::new(su[0].dot(svj), su[1].dot(svj));
            let du = ginv * rhs;
            out[j] = xi[0] * du[0] + xi[1] * du[1];
        }
        Ok((q, out))
    }

    /// Builds quadrature nodes. For surfaces `resolution` is the number of
    /// Gauss-Legendre rings (`N = 2 resolution^2`); for curves it is `N`.
    pub fn node_set(&self, resolution: usize) -> Result<NodeSet> {
        if resolution < 8 {
            return invalid(format!("resolution must be at least 8, got {resolution}"));
        }
        if self.dim() == 2 {
            return Ok(self.curve_nodes(resolution));
        }
        let n_theta = resolution;
        let n_phi = 2 * n_theta;
        let (z, wz) = gauss_legendre(n_theta);
        let degree = n_theta - 1;
        let table = ShTable::new(degree);
        let m = sh_count(degree);
        let n = n_theta * n_phi;
        let mut points = Vec::with_capacity(n);
        let mut dirs = Vec::with_capacity(n);
        let mut positions = Vec::with_capacity(n);
        let mut normals = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut sphere_weights = Vec::with_capacity(n);
        let mut basis = DMatrix::zeros(n, m);
        let mut row = vec![0.0; m];
        let mut scratch = vec![0.0; table.scratch_len()];
        for (i, (&zi, &wi)) in z.iter().zip(&wz).enumerate() {
            let theta = zi.acos();
            for j in 0..n_phi {
                let phi = 2.0 * PI * j as f64 / n_phi as f64;
                let p = ChartPoint::new(0, [theta, phi]);
                let s = self.direction(&p);
                let w0 = wi * 2.0 * PI / n_phi as f64;
                let jet = self.jet(&p)?;
                let k = i * n_phi + j;
                table.eval([s.x, s.y, s.z], &mut row, &mut scratch);
                for (a, v) in row.iter().enumerate() {
                    basis[(k, a)] = *v;
                }
                points.push(p);
                dirs.push(s);
                positions.push(jet.position);
                normals.push(jet.normal);
                weights.push(w0 * self.sphere_jacobian(&s));
                sphere_weights.push(w0);
            }
        }
        let mut analysis = basis.transpose();
        for (k, w) in sphere_weights.iter().enumerate() {
            analysis.column_mut(k).scale_mut(*w);
        }
        Ok(NodeSet {
            dim: 3,
            resolution,
            points,
            directions: dirs,
            positions,
            normals,
            weights: DVector::from_vec(weights),
            sphere_weights: DVector::from_vec(sphere_weights),
            basis: Some(HarmonicBasis { degree, eval: basis, analysis }),
            speeds: Vec::new(),
        })
    }

    fn curve_nodes(&self, n: usize) -> NodeSet {
        let h = 2.0 * PI / n as f64;
        let mut points = Vec::with_capacity(n);
        let mut positions = Vec::with_capacity(n);
        let mut normals = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut speeds = Vec::with_capacity(n);
        for k in 0..n {
            let t = h * k as f64;
            let [x, dx, _] = self.curve(t);
            let speed = dx.norm();
            points.push(ChartPoint::new(0, [t, 0.0]));
            positions.push(x);
            normals.push(Vector3::new(dx.y, -dx.x, 0.0) / speed);
            weights.push(h * speed);
            speeds.push(speed);
        }
        NodeSet {
            dim: 2,
            resolution: n,
            points,
            directions: Vec::new(),
            positions,
            normals,
            weights: DVector::from_vec(weights),
            sphere_weights: DVector::from_element(n, h),
            basis: None,
            speeds,
        }
    }
}

/// Real spherical-harmonic basis sampled on a node set.
#[derive(Debug, Clone)]
pub struct HarmonicBasis {
    pub degree: usize,
    /// `N x m` values of each harmonic at the nodes.
    pub eval: DMatrix<f64>,
    /// `m x N` exact analysis operator (inverse of `eval` on band-limited data).
    pub analysis: DMatrix<f64>,
}

/// Quadrature nodes on a boundary.
#[derive(Debug, Clone)]
pub struct NodeSet {
    pub dim: usize,
    pub resolution: usize,
    pub points: Vec<ChartPoint>,
    /// Parameter-sphere directions (surfaces only).
    pub directions: Vec<Vector3<f64>>,
    pub positions: Vec<Vector3<f64>>,
    pub normals: Vec<Vector3<f64>>,
    /// Surface quadrature weights.
    pub weights: DVector<f64>,
    /// Weights of the underlying parameter rule (sphere or circle).
    pub sphere_weights: DVector<f64>,
    pub basis: Option<HarmonicBasis>,
    /// Parameter speed `|X'(t)|` at the nodes (curves only).
    pub speeds: Vec<f64>,
}

impl NodeSet {
    #[must_use]
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    #[must_use]
    pub fn area(&self) -> f64 {
        self.weights.sum()
    }

    /// Dimension of the discrete function space.
    #[must_use]
    pub fn space_dim(&self) -> usize {
        self.basis.as_ref().map_or(self.len(), |b| b.eval.ncols())
    }

    /// Coefficients of nodal values in the discrete basis.
    #[must_use]
    pub fn analyze(&self, values: &DVector<f64>) -> DVector<f64> {
        match &self.basis {
            Some(b) => &b.analysis * values,
            None => values.clone(),
        }
    }

    /// Nodal values of basis coefficients.
    #[must_use]
    pub fn synthesize(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        match &self.basis {
            Some(b) => &b.eval * coeffs,
            None => coeffs.clone(),
        }
    }

    /// Weighted inner product on the boundary.
    #[must_use]
    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        a.iter().zip(b.iter()).zip(self.weights.iter()).map(|((x, y), w)| x * y * w).sum()
    }

    /// Typical node spacing `sqrt(area / N)` (or `length / N` for curves).
    #[must_use]
    pub fn spacing(&self) -> f64 {
        let a = self.area();
        if self.dim == 2 {
            a / self.len() as f64
        } else {
            (a / self.len() as f64).sqrt()
        }
    }
}

// Rotation of chart `c`: chart 1 maps (x, y, z) -> (z, x, y).
fn rotate(chart: usize, v: Vector3<f64>) -> Vector3<f64> {
    if chart == 0 {
        v
    } else {
        Vector3::new(v.z, v.x, v.y)
    }
}

fn unrotate(chart: usize, v: &Vector3<f64>) -> Vector3<f64> {
    if chart == 0 {
        *v
    } else {
        Vector3::new(v.y, v.z, v.x)
    }
}

pub(crate) fn chart_coords(chart: usize, s: &Vector3<f64>) -> [f64; 2] {
    let v = unrotate(chart, s);
    let theta = v.z.clamp(-1.0, 1.0).acos();
    let mut phi = v.y.atan2(v.x);
    if phi < 0.0 {
        phi += 2.0 * PI;
    }
    [theta, phi]
}

type Frame = (Vector3<f64>, [Vector3<f64>; 2], [[Vector3<f64>; 2]; 2]);

/// Direction and its first and second derivatives in chart coordinates.
pub(crate) fn chart_frame(chart: usize, u: [f64; 2]) -> Frame {
    let (st, ct) = u[0].sin_cos();
    let (sp, cp) = u[1].sin_cos();
    let r = |v| rotate(chart, v);
    let s = r(Vector3::new(st * cp, st * sp, ct));
    let s_t = r(Vector3::new(ct * cp, ct * sp, -st));
    let s_p = r(Vector3::new(-st * sp, st * cp, 0.0));
    let s_tp = r(Vector3::new(-ct * sp, ct * cp, 0.0));
    let s_pp = r(Vector3::new(-st * cp, -st * sp, 0.0));
    (s, [s_t, s_p], [[-s, s_tp], [s_tp, s_pp]])
}

/// Orthonormal tangent pair at a unit vector.
pub(crate) fn tangent_frame(s: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if s.x.abs() < 0.6 { Vector3::x() } else { Vector3::y() };
    let t1 = (helper - s * s.dot(&helper)).normalize();
    (t1, s.cross(&t1))
}

/// Rotation whose third column is `s`.
pub(crate) fn pole_rotation(s: &Vector3<f64>) -> Matrix3<f64> {
    let (t1, t2) = tangent_frame(s);
    Matrix3::from_columns(&[t1, t2, *s])
}

// Chebyshev series value and first two derivatives.
fn cheb(c: &[f64], z: f64) -> (f64, f64, f64) {
    let (mut t0, mut t1) = (1.0, z);
    let (mut d0, mut d1) = (0.0, 1.0);
    let (mut e0, mut e1) = (0.0, 0.0);
    let mut v = c[0];
    let mut dv = 0.0;
    let mut ddv = 0.0;
    for (k, ck) in c.iter().enumerate().skip(1) {
        if k > 1 {
            let t2 = 2.0 * z * t1 - t0;
            let d2 = 2.0 * t1 + 2.0 * z * d1 - d0;
            let e2 = 4.0 * d1 + 2.0 * z * e1 - e0;
            (t0, t1, d0, d1, e0, e1) = (t1, t2, d1, d2, e1, e2);
        }
        v += ck * t1;
        dv += ck * d1;
        ddv += ck * e1;
    }
    (v, dv, ddv)
}

fn principal(g: &DMatrix<f64>, h: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    // Solve h v = k g v through the Cholesky factor of g.
    let l = g.clone().cholesky().expect("metric is positive definite").l();
    let linv = l.clone().try_inverse().expect("invertible factor");
    let m = &linv * h * linv.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let k = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = linv.transpose() * &eig.eigenvectors;
    let dirs = DMatrix::from_fn(vecs.nrows(), order.len(), |r, c| vecs[(r, order[c])]);
    (k, dirs)
}
