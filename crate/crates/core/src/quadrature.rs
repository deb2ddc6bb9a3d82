//! Gauss-Legendre rules and real spherical harmonics.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
#[must_use]
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, z);
                dp = d;
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
#[must_use]
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    (x.iter().map(|t| c + h * t).collect(), w.iter().map(|v| v * h).collect())
}

/// Number of real spherical harmonics of degree at most `degree`.
#[must_use]
pub fn sh_count(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// Index of `Y_{l,m}` in the flat ordering `l^2 + l + m`.
#[must_use]
pub fn sh_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// Degree and order for a flat index.
#[must_use]
pub fn sh_degree_order(index: usize) -> (usize, i64) {
    let l = (index as f64).sqrt().floor() as usize;
    let l = if (l + 1) * (l + 1) <= index { l + 1 } else { l };
    (l, index as i64 - (l * l + l) as i64)
}

/// Precomputed recurrence coefficients for orthonormal real harmonics.
#[derive(Debug, Clone)]
pub struct ShTable {
    degree: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    diag: Vec<f64>,
}

impl ShTable {
    #[must_use]
    pub fn new(degree: usize) -> Self {
        let n = sh_count(degree);
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        for m in 0..=degree {
            for l in (m + 2)..=degree {
                let (lf, mf) = (l as f64, m as f64);
                let idx = tri(l, m);
                a[idx] = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                b[idx] = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            }
        }
        let diag = (0..=degree)
            .map(|m| if m == 0 { 0.0 } else { ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() })
            .collect();
        Self { degree, a, b, diag }
    }

    #[must_use]
    pub fn degree(&self) -> usize {
        self.degree
    }

    #[must_use]
    pub fn len(&self) -> usize {
        sh_count(self.degree)
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Evaluates all harmonics at the unit vector `s` into `out`.
    ///
    /// `scratch` must hold at least `(degree+1)(degree+2)/2` values.
    pub fn eval(&self, s: [f64; 3], out: &mut [f64], scratch: &mut [f64]) {
        let x = s[2].clamp(-1.0, 1.0);
        let rho = (s[0] * s[0] + s[1] * s[1]).sqrt();
        let (cphi, sphi) = if rho > 0.0 { (s[0] / rho, s[1] / rho) } else { (1.0, 0.0) };
        let st = rho;
        let lmax = self.degree;
        // normalized associated Legendre values, int p^2 dx = 1
        let p = scratch;
        let mut pmm = std::f64::consts::FRAC_1_SQRT_2;
        for m in 0..=lmax {
            if m > 0 {
                pmm *= self.diag[m] * st;
            }
            p[tri(m, m)] = pmm;
            if m < lmax {
                p[tri(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * x * pmm;
            }
            for l in (m + 2)..=lmax {
                let i = tri(l, m);
                p[i] = self.a[i] * (x * p[tri(l - 1, m)] - self.b[i] * p[tri(l - 2, m)]);
            }
        }
        let c0 = 1.0 / (2.0 * PI).sqrt();
        let c1 = 1.0 / PI.sqrt();
        let (mut cm, mut sm) = (1.0, 0.0);
        for m in 0..=lmax {
            for l in m..=lmax {
                let v = p[tri(l, m)];
                let base = l * l + l;
                if m == 0 {
                    out[base] = c0 * v;
                } else {
                    out[base + m] = c1 * v * cm;
                    out[base - m] = c1 * v * sm;
                }
            }
            let c = cm * cphi - sm * sphi;
            sm = sm * cphi + cm * sphi;
            cm = c;
        }
    }

    #[must_use]
    pub fn scratch_len(&self) -> usize {
        (self.degree + 1) * (self.degree + 2) / 2
    }

    /// Convenience allocation-heavy evaluation.
    #[must_use]
    pub fn eval_vec(&self, s: [f64; 3]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        let mut scratch = vec![0.0; self.scratch_len()];
        self.eval(s, &mut out, &mut scratch);
        out
    }
}

// Legendre table index for (l, m), l >= m. Stored column-major by m.
fn tri(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}
