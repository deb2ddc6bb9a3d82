//! Principal symbol of the NP operator, its Hamiltonian flow and the
//! characteristic variety `{H(p, .) = 1}`.
//!
//! Covectors live in chart coordinates. On surfaces the symbol is
//! `p = (d-1)H |xi|^{-1} - <A g^{-1} xi, g^{-1} xi> |xi|^{-3}` where `H` is the
//! mean curvature and `A` the second fundamental form; on curves it vanishes.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{ChartPoint, GeometryJet, NodeSet, Surface};

/// A point of the cotangent bundle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CotangentPoint {
    pub base: ChartPoint,
    pub xi: [f64; 2],
}

impl CotangentPoint {
    #[must_use]
    pub fn new(base: ChartPoint, xi: [f64; 2]) -> Self {
        Self { base, xi }
    }

    /// Rescales `xi` so that the raw Hamiltonian equals `level`.
    pub fn on_level(surface: &Surface, base: ChartPoint, xi: [f64; 2], level: f64) -> Result<Self> {
        if level <= 0.0 {
            return invalid("energy level must be positive");
        }
        let (g, a) = surface.forms(&base)?;
        let h = raw_value(&g, &a, Vector2::from(xi))?;
        if h < SINGULAR_H {
            return Err(Error::Degenerate("symbol vanishes on this covector".into()));
        }
        let t = (h / level).sqrt();
        Ok(Self { base, xi: [xi[0] * t, xi[1] * t] })
    }
}

/// Which function of the squared symbol drives the flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HamiltonianKind {
    /// `H = p^2`.
    Raw,
    /// `1 - exp(-H)`.
    Rho,
    /// `arctan H`.
    Arctan,
}

impl HamiltonianKind {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "raw" => Ok(Self::Raw),
            "rho" => Ok(Self::Rho),
            "arctan" => Ok(Self::Arctan),
            _ => invalid(format!("unknown hamiltonian kind '{text}' (raw, rho, arctan)")),
        }
    }

    fn apply(self, h: f64) -> f64 {
        match self {
            Self::Raw => h,
            Self::Rho => 1.0 - (-h).exp(),
            Self::Arctan => h.atan(),
        }
    }

    /// Derivative of the regularizing function at `h`.
    fn slope(self, h: f64) -> f64 {
        match self {
            Self::Raw => 1.0,
            Self::Rho => (-h).exp(),
            Self::Arctan => 1.0 / (1.0 + h * h),
        }
    }
}

const SINGULAR_H: f64 = 1e-8;

/// Symbol value from the chart metric and second form.
fn symbol_value(g: &Matrix2<f64>, a: &Matrix2<f64>, xi: Vector2<f64>) -> Result<f64> {
    let ginv = g.try_inverse().ok_or(Error::ChartSingularity("degenerate metric".into()))?;
    let v = ginv * xi;
    let n2 = xi.dot(&v);
    if n2 <= 0.0 || !n2.is_finite() {
        return invalid("covector must be nonzero");
    }
    let n = n2.sqrt();
    let trace = (ginv * a).trace();
    let q = v.dot(&(a * v));
    Ok(trace / n - q / (n2 * n))
}

fn raw_value(g: &Matrix2<f64>, a: &Matrix2<f64>, xi: Vector2<f64>) -> Result<f64> {
    symbol_value(g, a, xi).map(|p| p * p)
}

fn jet_forms(jet: &GeometryJet) -> Result<(Matrix2<f64>, Matrix2<f64>)> {
    if jet.metric.nrows() != 2 {
        return invalid("jet is not a surface jet");
    }
    Ok((
        Matrix2::from_fn(|i, j| jet.metric[(i, j)]),
        Matrix2::from_fn(|i, j| jet.second_form[(i, j)]),
    ))
}

/// Principal symbol at a jet. Curves give 0 for every nonzero covector.
pub fn np_symbol(jet: &GeometryJet, xi: &[f64]) -> Result<f64> {
    if xi.iter().all(|v| *v == 0.0) {
        return invalid("symbol is undefined at the zero covector");
    }
    if jet.metric.nrows() == 1 {
        if xi.len() != 1 {
            return invalid("curve covectors have one component");
        }
        return Ok(0.0);
    }
    if xi.len() != 2 {
        return invalid("surface covectors have two components");
    }
    let (g, a) = jet_forms(jet)?;
    symbol_value(&g, &a, Vector2::new(xi[0], xi[1]))
}

/// Hamiltonian of the requested kind at a jet.
pub fn hamiltonian(jet: &GeometryJet, xi: &[f64], kind: HamiltonianKind) -> Result<f64> {
    if xi.iter().all(|v| *v == 0.0) {
        return match kind {
            HamiltonianKind::Arctan => {
                // The limit is pi/2 when the symbol is bounded away from zero
                // on the unit cosphere.
                if jet.metric.nrows() == 2 {
                    let (g, a) = jet_forms(jet)?;
                    if cosphere_min_abs(&g, &a, 256) > 1e-10 {
                        return Ok(PI / 2.0);
                    }
                }
                Err(Error::Degenerate("arctan Hamiltonian is singular at the zero section here".into()))
            }
            _ => invalid("Hamiltonian is undefined at the zero covector"),
        };
    }
    let p = np_symbol(jet, xi)?;
    Ok(kind.apply(p * p))
}

/// Minimum of |p| on the unit cosphere of a chart point, sampled.
fn cosphere_min_abs(g: &Matrix2<f64>, a: &Matrix2<f64>, samples: usize) -> f64 {
    let chol = match g.cholesky() {
        Some(c) => c,
        None => return 0.0,
    };
    let l = chol.l();
    (0..samples)
        .map(|k| {
            let t = PI * k as f64 / samples as f64;
            // xi = L w with |w| = 1 has |xi|_g = 1.
            let xi = l * Vector2::new(t.cos(), t.sin());
            symbol_value(g, a, xi).map_or(0.0, f64::abs)
        })
        .fold(f64::INFINITY, f64::min)
}

fn xi_gradient(g: &Matrix2<f64>, a: &Matrix2<f64>, xi: Vector2<f64>) -> Result<(f64, Vector2<f64>)> {
    let ginv = g.try_inverse().ok_or(Error::ChartSingularity("degenerate metric".into()))?;
    let v = ginv * xi;
    let n2 = xi.dot(&v);
    if n2 <= 0.0 {
        return invalid("covector must be nonzero");
    }
    let n = n2.sqrt();
    let n3 = n2 * n;
    let trace = (ginv * a).trace();
    let av = ginv * (a * v);
    let q = v.dot(&(a * v));
    let p = trace / n - q / n3;
    let dp = v * (-trace / n3 + 3.0 * q / (n3 * n2)) - av * (2.0 / n3);
    Ok((p, dp * (2.0 * p)))
}

/// Relative finite-difference step for the base-point derivatives.
const FD_STEP: f64 = 1e-5 * 2.0 * PI;

/// Raw Hamiltonian, its gradient in `(u, xi)`.
fn raw_gradient(surface: &Surface, pt: &CotangentPoint) -> Result<(f64, [f64; 2], [f64; 2])> {
    let xi = Vector2::from(pt.xi);
    let (g, a) = surface.forms(&pt.base)?;
    let (p, dxi) = xi_gradient(&g, &a, xi)?;
    let h = p * p;
    let raw_at = |du: [f64; 2]| -> Result<f64> {
        let q = ChartPoint::new(pt.base.chart, [pt.base.u[0] + du[0], pt.base.u[1] + du[1]]);
        let (g, a) = surface.forms(&q)?;
        raw_value(&g, &a, xi)
    };
    let mut dx = [0.0; 2];
    for (k, slot) in dx.iter_mut().enumerate() {
        let central = |step: f64| -> Result<f64> {
            let mut e = [0.0; 2];
            e[k] = step;
            let plus = raw_at(e)?;
            e[k] = -step;
            let minus = raw_at(e)?;
            Ok((plus - minus) / (2.0 * step))
        };
        let coarse = central(FD_STEP)?;
        let fine = central(FD_STEP / 2.0)?;
        *slot = (4.0 * fine - coarse) / 3.0;
    }
    Ok((h, dx, [dxi[0], dxi[1]]))
}

/// Gradient `(d_x H, d_xi H)` of the chosen Hamiltonian at a cotangent point.
pub fn hamiltonian_gradient(
    surface: &Surface,
    pt: &CotangentPoint,
    kind: HamiltonianKind,
) -> Result<([f64; 2], [f64; 2])> {
    if surface.dim() != 3 {
        return invalid("the symbol vanishes identically on curves");
    }
    let (h, dx, dxi) = raw_gradient(surface, pt)?;
    if h < SINGULAR_H {
        return Err(Error::Degenerate(format!("Hamiltonian {h:.3e} is too close to zero")));
    }
    let s = kind.slope(h);
    Ok(([s * dx[0], s * dx[1]], [s * dxi[0], s * dxi[1]]))
}

/// Output of [`integrate_flow`].
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub kind: HamiltonianKind,
    pub times: Vec<f64>,
    pub states: Vec<CotangentPoint>,
    /// Hamiltonian of the integration kind along the path.
    pub h_values: Vec<f64>,
    /// Base points in space.
    pub positions: Vec<[f64; 3]>,
    /// Running integral of the observable, if one was supplied.
    pub integrals: Vec<f64>,
    /// Largest relative deviation of `H` from its initial value.
    pub max_drift: f64,
    pub tol: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

/// Observable along a trajectory.
pub type Observable<'a> = &'a (dyn Fn(&Surface, &CotangentPoint) -> f64 + Sync);

/// Integration controls.
#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    pub tol: f64,
    /// Record states on this uniform time grid instead of at every step.
    pub output_step: Option<f64>,
    pub max_steps: usize,
}

impl FlowOptions {
    #[must_use]
    pub fn new(tol: f64) -> Self {
        Self { tol, output_step: None, max_steps: 2_000_000 }
    }
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B_LOW: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

type State = [f64; 5];

/// Per-step error target relative to the requested tolerance, so that the
/// accumulated drift over long runs stays within the requested budget.
const LOCAL_TOL_FACTOR: f64 = 1e-3;

/// Switch charts once the chart's polar factor drops below this.
const CHART_SWITCH_SIN: f64 = 0.5;

struct Flow<'a> {
    surface: &'a Surface,
    kind: HamiltonianKind,
    chart: usize,
    observable: Option<Observable<'a>>,
}

impl Flow<'_> {
    fn point(&self, y: &State) -> CotangentPoint {
        CotangentPoint { base: ChartPoint::new(self.chart, [y[0], y[1]]), xi: [y[2], y[3]] }
    }

    fn rhs(&self, y: &State) -> Result<State> {
        let pt = self.point(y);
        let (dx, dxi) = hamiltonian_gradient(self.surface, &pt, self.kind)?;
        let a = self.observable.map_or(0.0, |f| f(self.surface, &pt));
        Ok([dxi[0], dxi[1], -dx[0], -dx[1], a])
    }

    fn energy(&self, y: &State) -> Result<f64> {
        let (g, a) = self.surface.forms(&self.point(y).base)?;
        Ok(self.kind.apply(raw_value(&g, &a, Vector2::new(y[2], y[3]))?))
    }
}

fn record(flow: &Flow<'_>, traj: &mut Trajectory, t: f64, y: &State) -> Result<()> {
    let pt = flow.point(y);
    traj.times.push(t);
    traj.states.push(pt);
    traj.h_values.push(flow.energy(y)?);
    let x = flow.surface.position(&pt.base);
    traj.positions.push([x.x, x.y, x.z]);
    traj.integrals.push(y[4]);
    Ok(())
}

/// Integrates Hamilton's equations `x' = d_xi H`, `xi' = -d_x H` up to `t_end`.
pub fn integrate_flow(
    surface: &Surface,
    init: &CotangentPoint,
    kind: HamiltonianKind,
    t_end: f64,
    tol: f64,
) -> Result<Trajectory> {
    integrate_flow_with(surface, init, kind, t_end, FlowOptions::new(tol), None)
}

/// [`integrate_flow`] with output control and an optional observable whose
/// time integral is carried along.
pub fn integrate_flow_with(
    surface: &Surface,
    init: &CotangentPoint,
    kind: HamiltonianKind,
    t_end: f64,
    opts: FlowOptions,
    observable: Option<Observable<'_>>,
) -> Result<Trajectory> {
    if surface.dim() != 3 {
        return invalid("Hamiltonian flow needs a surface; the symbol vanishes on curves");
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return invalid("flow duration must be positive");
    }
    if !(opts.tol > 0.0 && opts.tol < 1.0) {
        return invalid("tolerance must lie in (0, 1)");
    }
    if init.xi == [0.0, 0.0] {
        return invalid("flow must start off the zero section");
    }
    if let Some(dt) = opts.output_step {
        if !(dt > 0.0) {
            return invalid("output step must be positive");
        }
    }
    let mut flow = Flow { surface, kind, chart: init.base.chart, observable };
    let mut y: State = [init.base.u[0], init.base.u[1], init.xi[0], init.xi[1], 0.0];
    switch_chart(&mut flow, &mut y)?;
    let h0 = flow.energy(&y)?;
    if h0 <= 0.0 {
        return Err(Error::Degenerate("initial covector lies on the zero set of the symbol".into()));
    }
    let mut traj = Trajectory {
        kind,
        times: Vec::new(),
        states: Vec::new(),
        h_values: Vec::new(),
        positions: Vec::new(),
        integrals: Vec::new(),
        max_drift: 0.0,
        tol: opts.tol,
        accepted_steps: 0,
        rejected_steps: 0,
    };
    record(&flow, &mut traj, 0.0, &y)?;

    let mut t = 0.0;
    let mut k1 = flow.rhs(&y)?;
    let speed = (k1[0].hypot(k1[1])).max(1e-12);
    let mut step = (0.01 / speed).min(t_end);
    let mut next_out = opts.output_step.map(|dt| dt.min(t_end));
    let mut out_index = 1usize;
    while t < t_end {
        if traj.accepted_steps + traj.rejected_steps >= opts.max_steps {
            return Err(Error::NoConvergence(format!("flow exceeded {} steps", opts.max_steps)));
        }
        let target = next_out.unwrap_or(t_end).min(t_end);
        let mut h = step.min(target - t);
        let landing = h >= target - t;
        if landing {
            h = target - t;
        }
        let (y_new, err, k_last) = dp_step(&flow, &y, &k1, h, opts.tol)?;
        if !(err <= 1.0) {
            traj.rejected_steps += 1;
            let factor = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
            step = h * factor;
            if step < 1e-14 * t_end.max(1.0) {
                return Err(Error::NoConvergence("flow step size underflow".into()));
            }
            continue;
        }
        traj.accepted_steps += 1;
        t = if landing { target } else { t + h };
        y = y_new;
        k1 = if switch_chart(&mut flow, &mut y)? { flow.rhs(&y)? } else { k_last };
        if y[2] == 0.0 && y[3] == 0.0 {
            return Err(Error::Degenerate("trajectory reached the zero section".into()));
        }
        let drift = ((flow.energy(&y)? - h0) / h0).abs();
        traj.max_drift = traj.max_drift.max(drift);
        if drift > 100.0 * opts.tol {
            return Err(Error::NoConvergence(format!(
                "Hamiltonian drift {drift:.3e} exceeds 100 x tolerance at t = {t:.6}"
            )));
        }
        let factor = if err > 0.0 { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) } else { 5.0 };
        if !landing || h >= step {
            step = h * factor;
        }
        match (opts.output_step, landing) {
            (Some(dt), true) => {
                record(&flow, &mut traj, t, &y)?;
                out_index += 1;
                next_out = Some((dt * out_index as f64).min(t_end));
                if t >= t_end {
                    break;
                }
            }
            (None, _) => record(&flow, &mut traj, t, &y)?,
            _ => {}
        }
    }
    Ok(traj)
}

/// Moves the state to the other chart when it nears the current chart's poles.
fn switch_chart(flow: &mut Flow<'_>, y: &mut State) -> Result<bool> {
    if y[0].sin().abs() >= CHART_SWITCH_SIN {
        return Ok(false);
    }
    let other = 1 - flow.chart;
    let (q, xi) = flow.surface.change_chart(&ChartPoint::new(flow.chart, [y[0], y[1]]), [y[2], y[3]], other)?;
    flow.chart = other;
    *y = [q.u[0], q.u[1], xi[0], xi[1], y[4]];
    Ok(true)
}

fn dp_step(flow: &Flow<'_>, y: &State, k1: &State, h: f64, tol: f64) -> Result<(State, f64, State)> {
    let mut k = [[0.0; 5]; 7];
    k[0] = *k1;
    let mut high = *y;
    for s in 1..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            for (v, kv) in ys.iter_mut().zip(kj) {
                *v += h * A[s][j] * kv;
            }
        }
        // Trial stages may stray into a singular chart region; reject the step.
        match flow.rhs(&ys) {
            Ok(v) => k[s] = v,
            Err(Error::ChartSingularity(_) | Error::Degenerate(_) | Error::Validation(_)) => {
                return Ok((*y, f64::INFINITY, *k1));
            }
            Err(e) => return Err(e),
        }
        high = ys;
    }
    let mut err = 0.0;
    for i in 0..5 {
        let delta: f64 = (0..7).map(|s| (A[6].get(s).copied().unwrap_or(0.0) - B_LOW[s]) * k[s][i]).sum();
        let scale = LOCAL_TOL_FACTOR * tol * (1.0 + y[i].abs().max(high[i].abs()));
        let e = h * delta / scale;
        err += e * e;
    }
    Ok((high, (err / 5.0).sqrt(), k[6]))
}

/// Partial time averages of an observable along a trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct BirkhoffSeries {
    pub times: Vec<f64>,
    pub averages: Vec<f64>,
    /// Differences between consecutive partial averages.
    pub cauchy: Vec<f64>,
    pub max_drift: f64,
}

/// `(1/T_k) int_0^{T_k} a dt` at `n_checkpoints` equally spaced times up to `t_end`.
pub fn birkhoff_average(
    surface: &Surface,
    observable: Observable<'_>,
    init: &CotangentPoint,
    kind: HamiltonianKind,
    t_end: f64,
    n_checkpoints: usize,
    tol: f64,
) -> Result<BirkhoffSeries> {
    if n_checkpoints == 0 {
        return invalid("need at least one checkpoint");
    }
    let opts = FlowOptions { output_step: Some(t_end / n_checkpoints as f64), ..FlowOptions::new(tol) };
    let traj = integrate_flow_with(surface, init, kind, t_end, opts, Some(observable))?;
    let times: Vec<f64> = traj.times[1..].to_vec();
    let averages: Vec<f64> = times.iter().zip(&traj.integrals[1..]).map(|(t, i)| i / t).collect();
    let cauchy = averages.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    Ok(BirkhoffSeries { times, averages, cauchy, max_drift: traj.max_drift })
}

/// The variety `{H(p, .) = 1}` sampled on a uniform angular grid in the
/// principal frame.
#[derive(Debug, Clone, Serialize)]
pub struct VarietySample {
    /// Complementary curvatures `kappa~_i = sum_j kappa_j - kappa_i`.
    pub kappa_tilde: [f64; 2],
    pub theta: Vec<f64>,
    /// Signed radial profile `r = sum kappa~_i omega_i^2`.
    pub r: Vec<f64>,
    pub dr: Vec<f64>,
    /// Arc-length quadrature weights `sqrt(r^2 + r'^2) dtheta`.
    pub weights: Vec<f64>,
    /// Sample covectors `|r| omega` in chart coordinates (empty for bare
    /// curvature samples).
    pub covectors: Vec<[f64; 2]>,
    /// Set when `r` has (near) zeros: the Hamiltonian vanishes on those rays.
    pub degenerate: bool,
}

/// Radial profile is treated as zero below this.
const ZERO_PROFILE: f64 = 1e-10;

impl VarietySample {
    /// Sample from principal curvatures alone (orthonormal frame, `g = I`).
    pub fn from_curvatures(kappas: [f64; 2], angular_res: usize) -> Result<Self> {
        if angular_res < 8 {
            return invalid("angular resolution must be at least 8");
        }
        if kappas.iter().any(|k| !k.is_finite()) {
            return invalid("curvatures must be finite");
        }
        let total = kappas[0] + kappas[1];
        let kt = [total - kappas[0], total - kappas[1]];
        let step = 2.0 * PI / angular_res as f64;
        let mut s = Self {
            kappa_tilde: kt,
            theta: Vec::with_capacity(angular_res),
            r: Vec::with_capacity(angular_res),
            dr: Vec::with_capacity(angular_res),
            weights: Vec::with_capacity(angular_res),
            covectors: Vec::new(),
            degenerate: false,
        };
        for m in 0..angular_res {
            let th = step * m as f64;
            let (sn, cs) = th.sin_cos();
            let r = kt[0] * cs * cs + kt[1] * sn * sn;
            let dr = 2.0 * (kt[1] - kt[0]) * sn * cs;
            s.theta.push(th);
            s.r.push(r);
            s.dr.push(dr);
            s.weights.push(r.hypot(dr) * step);
        }
        let scale = kt[0].abs().max(kt[1].abs()).max(f64::MIN_POSITIVE);
        s.degenerate = s.r.iter().any(|r| r.abs() < ZERO_PROFILE * scale.max(1.0))
            || kt[0].signum() != kt[1].signum()
            || kt[0] == 0.0
            || kt[1] == 0.0;
        Ok(s)
    }

    /// Unweighted measure of the variety.
    #[must_use]
    pub fn total_measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `int |xi|^{1+2 alpha} dsigma` for the Liouville (Leray) measure
    /// `dxi / dH` on the level set, which is `1/2 int |r|^{3+2 alpha} dtheta`.
    #[must_use]
    pub fn liouville_volume(&self, alpha: f64) -> f64 {
        let step = 2.0 * PI / self.r.len() as f64;
        0.5 * self.r.iter().map(|r| r.abs().powf(3.0 + 2.0 * alpha)).sum::<f64>() * step
    }

    /// Density of the alternative closed-form measure
    /// `sqrt(4 (sum k~^2 w^2)^2 - 3 (sum k~ w^2)(sum w^2))`, kept only for
    /// comparison; it is not homogeneous under curvature scaling. Negative
    /// radicands give NaN.
    #[must_use]
    pub fn closed_form_weights(&self) -> Vec<f64> {
        let step = 2.0 * PI / self.theta.len() as f64;
        let kt = self.kappa_tilde;
        self.theta
            .iter()
            .map(|th| {
                let (s, c) = th.sin_cos();
                let sq = kt[0] * kt[0] * c * c + kt[1] * kt[1] * s * s;
                let lin = kt[0] * c * c + kt[1] * s * s;
                (4.0 * sq * sq - 3.0 * lin).sqrt() * step
            })
            .collect()
    }
}

/// Samples the variety at a surface jet.
pub fn variety_sample(jet: &GeometryJet, angular_res: usize) -> Result<VarietySample> {
    if jet.metric.nrows() != 2 {
        return invalid("the characteristic variety is only sampled on surfaces");
    }
    let kappas = [jet.curvatures[0], jet.curvatures[1]];
    let mut s = VarietySample::from_curvatures(kappas, angular_res)?;
    let (g, _) = jet_forms(jet)?;
    let e: [Vector2<f64>; 2] = [
        g * Vector2::new(jet.directions[(0, 0)], jet.directions[(1, 0)]),
        g * Vector2::new(jet.directions[(0, 1)], jet.directions[(1, 1)]),
    ];
    s.covectors = s
        .theta
        .iter()
        .zip(&s.r)
        .map(|(th, r)| {
            let (sn, cs) = th.sin_cos();
            let xi = (e[0] * cs + e[1] * sn) * r.abs();
            [xi[0], xi[1]]
        })
        .collect();
    Ok(s)
}

/// `int |r|^{1+2 alpha} sqrt(r^2 + r'^2) dtheta` with any zero set excluded.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct VarietyVolume {
    pub value: f64,
    /// Fraction of angular samples dropped because `r` vanishes there.
    pub excluded_fraction: f64,
}

/// Weighted variety volume.
pub fn weighted_variety_volume(vs: &VarietySample, alpha: f64) -> Result<VarietyVolume> {
    if !alpha.is_finite() {
        return invalid("alpha must be finite");
    }
    let exponent = 1.0 + 2.0 * alpha;
    let scale = vs.r.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if scale == 0.0 {
        return Err(Error::Degenerate("variety collapses to the zero section".into()));
    }
    let has_zeros = vs.degenerate && vs.r.iter().any(|r| r.abs() < 1e-3 * scale);
    if has_zeros && alpha <= -1.0 {
        return Err(Error::Degenerate(format!("weighted volume diverges for alpha = {alpha} at zeros of r")));
    }
    let mut value = 0.0;
    let mut dropped = 0usize;
    for (r, w) in vs.r.iter().zip(&vs.weights) {
        if r.abs() < ZERO_PROFILE * scale.max(1.0) {
            dropped += 1;
            continue;
        }
        value += r.abs().powf(exponent) * w;
    }
    Ok(VarietyVolume { value, excluded_fraction: dropped as f64 / vs.r.len() as f64 })
}

/// Exponent convention for [`f_alpha`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FAlphaVariant {
    /// Exponent `d - 1 + 2 alpha` on `|sum k~ w^2|`.
    Paper,
    /// Exponent `d - 2 + 2 alpha`, homogeneous of the same degree as the
    /// weighted variety volume.
    Corrected,
}

impl FAlphaVariant {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "paper" => Ok(Self::Paper),
            "corrected" => Ok(Self::Corrected),
            _ => invalid(format!("unknown variant '{text}' (paper, corrected)")),
        }
    }
}

/// Integrand of the curvature functional at a unit vector `omega` in
/// `d - 1` dimensions, given principal curvatures `kappas`.
pub fn f_alpha_integrand(kappas: &[f64], omega: &[f64], alpha: f64, variant: FAlphaVariant) -> Result<f64> {
    if kappas.len() != omega.len() || kappas.is_empty() {
        return invalid("curvature tuple and direction must have the same nonzero length");
    }
    let d = kappas.len() as f64 + 1.0;
    let total: f64 = kappas.iter().sum();
    let mut lin = 0.0;
    let mut sq = 0.0;
    for (k, w) in kappas.iter().zip(omega) {
        let kt = total - k;
        lin += kt * w * w;
        sq += kt * kt * w * w;
    }
    let exponent = match variant {
        FAlphaVariant::Paper => d - 1.0 + 2.0 * alpha,
        FAlphaVariant::Corrected => d - 2.0 + 2.0 * alpha,
    };
    Ok(lin.abs().powf(exponent) * sq.sqrt())
}

/// Curvature functional over the unit circle (surfaces in space).
pub fn f_alpha(kappas: &[f64], alpha: f64, variant: FAlphaVariant) -> Result<f64> {
    if kappas.len() != 2 {
        return invalid("F_alpha quadrature is implemented for surfaces (two curvatures)");
    }
    if !alpha.is_finite() || kappas.iter().any(|k| !k.is_finite()) {
        return invalid("inputs must be finite");
    }
    const SAMPLES: usize = 4096;
    let step = 2.0 * PI / SAMPLES as f64;
    let mut sum = 0.0;
    for m in 0..SAMPLES {
        let (s, c) = (step * m as f64).sin_cos();
        sum += f_alpha_integrand(kappas, &[c, s], alpha, variant)?;
    }
    Ok(sum * step)
}

/// Smallest `|r|` over surface nodes and cosphere directions; positive values
/// certify that the symbol has no zeros on the sample.
pub fn assumption_a_margin(surface: &Surface, nodes: &NodeSet, angular_res: usize) -> Result<f64> {
    if surface.dim() != 3 {
        return Ok(0.0);
    }
    if angular_res < 4 {
        return invalid("angular resolution must be at least 4");
    }
    let mut margin = f64::INFINITY;
    for dir in &nodes.directions {
        let p = Surface::chart_point_for_direction(dir);
        let (g, a) = surface.forms(&p)?;
        margin = margin.min(unit_cosphere_min(&g, &a, angular_res));
    }
    Ok(margin)
}

/// `min |2H - <A g^-1 w, g^-1 w>|` over `|w|_g = 1`.
fn unit_cosphere_min(g: &Matrix2<f64>, a: &Matrix2<f64>, samples: usize) -> f64 {
    let Some(chol) = g.cholesky() else { return 0.0 };
    let l = chol.l();
    let Some(ginv) = g.try_inverse() else { return 0.0 };
    let trace = (ginv * a).trace();
    (0..samples)
        .map(|k| {
            let t = PI * k as f64 / samples as f64;
            let w = l * Vector2::new(t.cos(), t.sin());
            let v = ginv * w;
            (trace - v.dot(&(a * v))).abs()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Margin at a single point.
pub fn point_margin(surface: &Surface, p: &ChartPoint, angular_res: usize) -> Result<f64> {
    let (g, a) = surface.forms(p)?;
    Ok(unit_cosphere_min(&g, &a, angular_res.max(4)))
}

/// Unit vector normal to the plane of a great circle through `x` along the
/// base-point velocity, for geodesic checks.
#[must_use]
pub fn orbit_normal(surface: &Surface, pt: &CotangentPoint, velocity: [f64; 2]) -> Vector3<f64> {
    let x = surface.position(&pt.base);
    let jet = surface.jet(&pt.base);
    match jet {
        Ok(j) => {
            let v = j.tangents[0] * velocity[0] + j.tangents[1] * velocity[1];
            x.cross(&v).normalize()
        }
        Err(_) => Vector3::zeros(),
    }
}
