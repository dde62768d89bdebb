//! Target densities `pi(x) ∝ exp{-U(x)}` with potentials, gradients, and
//! optional curvature summaries, plus the synthetic-data simulators for the
//! latent-variable experiments.

use crate::linalg::{chol_dense, CholFactor, DMatrix};
use crate::rng::RngStream;
use crate::{Error, Result};

/// Exponent clamp: anything beyond this raises [`Error::NonFinite`] so a
/// diverging chain fails loudly instead of producing infinities.
const EXP_CLAMP: f64 = 700.0;

#[inline]
fn guarded_exp(arg: f64, what: &'static str) -> Result<f64> {
    if !arg.is_finite() || arg > EXP_CLAMP {
        return Err(Error::NonFinite { what });
    }
    Ok(arg.exp())
}

/// A target model: potential `U`, gradient, and (optionally) the diagonal of
/// the Hessian, needed by the configurational-temperature estimator.
pub trait TargetModel: Sync {
    fn dim(&self) -> usize;

    fn potential(&self, x: &[f64]) -> Result<f64>;

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()>;

    /// Potential and gradient in one pass; kernels call this once per step.
    fn potential_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.gradient(x, grad)?;
        self.potential(x)
    }

    /// Diagonal of the Hessian, when the model exposes one.
    fn hessian_diag(&self, _x: &[f64], _out: &mut [f64]) -> Result<()> {
        Err(Error::Unsupported("hessian_diag not available for this model"))
    }

    fn has_hessian_diag(&self) -> bool {
        false
    }
}

/// Convenience wrapper returning `(U, grad)` as a pair.
pub fn evaluate<M: TargetModel + ?Sized>(model: &M, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    let mut g = vec![0.0; model.dim()];
    let u = model.potential_and_gradient(x, &mut g)?;
    Ok((u, g))
}

// ---------------------------------------------------------------------------
// Isotropic Gaussian
// ---------------------------------------------------------------------------

/// `U(x) = gamma ||x||^2 / 2`, i.e. `pi = N(0, gamma^{-1} I)`.
#[derive(Debug, Clone)]
pub struct GaussianTarget {
    pub gamma: f64,
    pub dim: usize,
}

impl GaussianTarget {
    pub fn new(gamma: f64, dim: usize) -> Result<Self> {
        if gamma <= 0.0 || dim == 0 {
            return Err(Error::InvalidParams(format!(
                "gaussian target needs gamma > 0 and dim >= 1, got ({gamma}, {dim})"
            )));
        }
        Ok(Self { gamma, dim })
    }

    pub fn standard(dim: usize) -> Self {
        Self { gamma: 1.0, dim }
    }
}

impl TargetModel for GaussianTarget {
    fn dim(&self) -> usize {
        self.dim
    }

    fn potential(&self, x: &[f64]) -> Result<f64> {
        Ok(0.5 * self.gamma * x.iter().map(|v| v * v).sum::<f64>())
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        for (o, &v) in out.iter_mut().zip(x) {
            *o = self.gamma * v;
        }
        Ok(())
    }

    fn hessian_diag(&self, _x: &[f64], out: &mut [f64]) -> Result<()> {
        out.fill(self.gamma);
        Ok(())
    }

    fn has_hessian_diag(&self) -> bool {
        true
    }
}

// ---------------------------------------------------------------------------
// One-dimensional double well
// ---------------------------------------------------------------------------

/// `U(x) = ((x^2 - 1)^2 + x) / T`: two wells with the left one deeper.
#[derive(Debug, Clone)]
pub struct DoubleWellTarget {
    pub temperature: f64,
}

impl DoubleWellTarget {
    pub fn new(temperature: f64) -> Result<Self> {
        if temperature <= 0.0 {
            return Err(Error::InvalidParams(format!("temperature must be positive, got {temperature}")));
        }
        Ok(Self { temperature })
    }
}

impl Default for DoubleWellTarget {
    fn default() -> Self {
        Self { temperature: 1.0 }
    }
}

impl TargetModel for DoubleWellTarget {
    fn dim(&self) -> usize {
        1
    }

    fn potential(&self, x: &[f64]) -> Result<f64> {
        let v = x[0];
        let q = v * v - 1.0;
        let u = (q * q + v) / self.temperature;
        if u.is_finite() {
            Ok(u)
        } else {
            Err(Error::NonFinite { what: "double-well potential" })
        }
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let v = x[0];
        out[0] = (4.0 * v * (v * v - 1.0) + 1.0) / self.temperature;
        if out[0].is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite { what: "double-well gradient" })
        }
    }

    fn hessian_diag(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = (12.0 * x[0] * x[0] - 4.0) / self.temperature;
        Ok(())
    }

    fn has_hessian_diag(&self) -> bool {
        true
    }
}

// ---------------------------------------------------------------------------
// Stochastic volatility posterior
// ---------------------------------------------------------------------------

/// Symmetric tridiagonal matrix with constant off-diagonal, the AR(1)
/// precision `C^{-1}`: diagonal `(1, 1+varphi^2, ..., 1+varphi^2, 1)/sigma^2`,
/// off-diagonal `-varphi/sigma^2`.
#[derive(Debug, Clone)]
pub struct Tridiag {
    pub diag: Vec<f64>,
    pub off: f64,
}

impl Tridiag {
    pub fn ar1_precision(t_len: usize, varphi: f64, sigma: f64) -> Self {
        let s2 = sigma * sigma;
        let mut diag = vec![(1.0 + varphi * varphi) / s2; t_len];
        diag[0] = 1.0 / s2;
        diag[t_len - 1] = 1.0 / s2;
        Self { diag, off: -varphi / s2 }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off * x[i - 1];
            }
            if i + 1 < n {
                s += self.off * x[i + 1];
            }
            out[i] = s;
        }
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let n = self.len();
        let mut s = 0.0;
        for i in 0..n {
            s += self.diag[i] * x[i] * x[i];
            if i + 1 < n {
                s += 2.0 * self.off * x[i] * x[i + 1];
            }
        }
        s
    }

    pub fn to_dense(&self) -> DMatrix {
        let n = self.len();
        let mut m = DMatrix::zeros(n);
        for i in 0..n {
            m.set(i, i, self.diag[i]);
            if i + 1 < n {
                m.set(i, i + 1, self.off);
                m.set(i + 1, i, self.off);
            }
        }
        m
    }
}

/// Latent-volatility posterior: AR(1) Gaussian prior on the log-volatilities
/// plus the heteroskedastic observation likelihood.
///
/// `U(x) = x^T C^{-1} x / 2 + sum_t (x_t + y_t^2 exp(-x_t)/beta^2) / 2`.
#[derive(Debug, Clone)]
pub struct SvModel {
    pub t_len: usize,
    pub beta: f64,
    pub sigma: f64,
    pub varphi: f64,
    pub y: Vec<f64>,
    pub precision: Tridiag,
}

impl SvModel {
    pub fn new(beta: f64, sigma: f64, varphi: f64, y: Vec<f64>) -> Result<Self> {
        if !(varphi.abs() < 1.0) || sigma <= 0.0 || beta <= 0.0 || y.is_empty() {
            return Err(Error::InvalidParams(
                "sv model needs |varphi| < 1, sigma > 0, beta > 0, nonempty y".into(),
            ));
        }
        let t_len = y.len();
        Ok(Self {
            t_len,
            beta,
            sigma,
            varphi,
            precision: Tridiag::ar1_precision(t_len, varphi, sigma),
            y,
        })
    }
}

impl TargetModel for SvModel {
    fn dim(&self) -> usize {
        self.t_len
    }

    fn potential(&self, x: &[f64]) -> Result<f64> {
        let b2 = self.beta * self.beta;
        let mut lik = 0.0;
        for (&xt, &yt) in x.iter().zip(&self.y) {
            lik += xt + yt * yt * guarded_exp(-xt, "sv potential")? / b2;
        }
        Ok(0.5 * self.precision.quadratic_form(x) + 0.5 * lik)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.precision.matvec(x, out);
        let b2 = self.beta * self.beta;
        for ((o, &xt), &yt) in out.iter_mut().zip(x).zip(&self.y) {
            *o += 0.5 - 0.5 * yt * yt * guarded_exp(-xt, "sv gradient")? / b2;
        }
        Ok(())
    }

    fn hessian_diag(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let b2 = self.beta * self.beta;
        for ((o, &xt), (&yt, &d)) in out
            .iter_mut()
            .zip(x)
            .zip(self.y.iter().zip(&self.precision.diag))
        {
            *o = d + 0.5 * yt * yt * guarded_exp(-xt, "sv hessian")? / b2;
        }
        Ok(())
    }

    fn has_hessian_diag(&self) -> bool {
        true
    }
}

/// Simulates latent volatilities and observations:
/// `x_1 ~ N(0, sigma^2/(1-varphi^2))`, `x_t = varphi x_{t-1} + N(0, sigma^2)`,
/// `y_t = z_t beta exp(x_t/2)`.
pub fn simulate_sv(
    t_len: usize,
    beta: f64,
    sigma: f64,
    varphi: f64,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(varphi.abs() < 1.0) || sigma <= 0.0 || beta <= 0.0 || t_len == 0 {
        return Err(Error::InvalidParams(
            "simulate_sv needs |varphi| < 1, sigma > 0, beta > 0, t_len >= 1".into(),
        ));
    }
    let mut x = vec![0.0; t_len];
    x[0] = rng.normal() * sigma / (1.0 - varphi * varphi).sqrt();
    for t in 1..t_len {
        x[t] = varphi * x[t - 1] + sigma * rng.normal();
    }
    let y = x
        .iter()
        .map(|&xt| rng.normal() * beta * (0.5 * xt).exp())
        .collect();
    Ok((x, y))
}

// ---------------------------------------------------------------------------
// Log-Gaussian Cox posterior
// ---------------------------------------------------------------------------

/// Latent Gaussian field on an `m x m` grid with exponential covariance
/// `sigma^2 exp(-dist/(m beta))` and independent Poisson counts with means
/// `exp(x_ij + mu)/n`.
pub struct CoxModel {
    pub m: usize,
    pub n: usize,
    pub sigma2: f64,
    pub beta: f64,
    pub mu: f64,
    pub y: Vec<f64>,
    cinv: DMatrix,
}

impl CoxModel {
    /// Dense covariance over the grid, row-major in `(i, j)` order.
    pub fn covariance(m: usize, sigma2: f64, beta: f64) -> DMatrix {
        let n = m * m;
        let mut c = DMatrix::zeros(n);
        let scale = 1.0 / (m as f64 * beta);
        for a in 0..n {
            let (ia, ja) = ((a / m) as f64, (a % m) as f64);
            for b in a..n {
                let (ib, jb) = ((b / m) as f64, (b % m) as f64);
                let dist = ((ia - ib).powi(2) + (ja - jb).powi(2)).sqrt();
                let v = sigma2 * (-dist * scale).exp();
                c.set(a, b, v);
                c.set(b, a, v);
            }
        }
        c
    }

    fn chol_with_jitter(c: &DMatrix, sigma2: f64) -> Result<CholFactor> {
        match chol_dense(c) {
            Ok(l) => Ok(l),
            Err(_) => {
                let mut cj = c.clone();
                for i in 0..cj.n {
                    let v = cj.get(i, i) + 1e-10 * sigma2;
                    cj.set(i, i, v);
                }
                chol_dense(&cj)
            }
        }
    }

    pub fn new(m: usize, sigma2: f64, beta: f64, mu: f64, y: Vec<f64>) -> Result<Self> {
        if m < 2 || sigma2 <= 0.0 || beta <= 0.0 {
            return Err(Error::InvalidParams(
                "cox model needs m >= 2, sigma2 > 0, beta > 0".into(),
            ));
        }
        let n = m * m;
        if y.len() != n || y.iter().any(|&v| v < 0.0 || v.fract() != 0.0) {
            return Err(Error::InvalidParams(
                "cox counts must be nonnegative integers of length m^2".into(),
            ));
        }
        let c = Self::covariance(m, sigma2, beta);
        let l = Self::chol_with_jitter(&c, sigma2)?;
        Ok(Self { m, n, sigma2, beta, mu, y, cinv: l.inverse() })
    }

    pub fn precision(&self) -> &DMatrix {
        &self.cinv
    }
}

impl TargetModel for CoxModel {
    fn dim(&self) -> usize {
        self.n
    }

    fn potential(&self, x: &[f64]) -> Result<f64> {
        let mut cx = vec![0.0; self.n];
        self.cinv.matvec(x, &mut cx);
        let quad: f64 = 0.5 * x.iter().zip(&cx).map(|(a, b)| a * b).sum::<f64>();
        let ninv = 1.0 / self.n as f64;
        let mut lik = 0.0;
        for (&xi, &yi) in x.iter().zip(&self.y) {
            lik += yi * (xi + self.mu) - ninv * guarded_exp(xi + self.mu, "cox potential")?;
        }
        Ok(quad - lik)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.cinv.matvec(x, out);
        let ninv = 1.0 / self.n as f64;
        for ((o, &xi), &yi) in out.iter_mut().zip(x).zip(&self.y) {
            *o += ninv * guarded_exp(xi + self.mu, "cox gradient")? - yi;
        }
        Ok(())
    }

    fn hessian_diag(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let ninv = 1.0 / self.n as f64;
        for (i, (o, &xi)) in out.iter_mut().zip(x).enumerate() {
            *o = self.cinv.get(i, i) + ninv * guarded_exp(xi + self.mu, "cox hessian")?;
        }
        Ok(())
    }

    fn has_hessian_diag(&self) -> bool {
        true
    }
}

/// Simulates the latent field `x ~ N(0, C)` (Cholesky of the dense
/// covariance, with a small diagonal jitter retry) and Poisson counts.
pub fn simulate_cox(
    m: usize,
    sigma2: f64,
    beta: f64,
    mu: f64,
    rng: &mut RngStream,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if m < 2 || sigma2 <= 0.0 {
        return Err(Error::InvalidParams("simulate_cox needs m >= 2, sigma2 > 0".into()));
    }
    let n = m * m;
    let c = CoxModel::covariance(m, sigma2, beta);
    let l = CoxModel::chol_with_jitter(&c, sigma2)?;
    let mut z = vec![0.0; n];
    rng.fill_normal(&mut z);
    let mut x = vec![0.0; n];
    l.mul_lower(&z, &mut x);
    let ninv = 1.0 / n as f64;
    let y = x
        .iter()
        .map(|&xi| rng.poisson(ninv * (xi + mu).exp()) as f64)
        .collect();
    Ok((x, y))
}

// ---------------------------------------------------------------------------
// Preconditioners
// ---------------------------------------------------------------------------

/// Approximate stationary precision `Sigma_hat^{-1}` for models that define
/// one; this is the natural input for whitening.
///
/// - stochastic volatility: `C^{-1} + I/2` (tridiagonal, never forms `C`);
/// - Cox: `C^{-1} + exp(mu + sigma^2/2)/n * I`, the expected Hessian of the
///   potential under the latent prior.
pub fn preconditioner_precision(model: &dyn PreconditionedModel) -> DMatrix {
    model.approx_precision()
}

/// Approximate stationary covariance `Sigma_hat` (dense inverse of
/// [`preconditioner_precision`]).
pub fn preconditioner_matrix(model: &dyn PreconditionedModel) -> Result<DMatrix> {
    let p = model.approx_precision();
    Ok(chol_dense(&p)?.inverse())
}

/// Models that supply a preconditioner. Gaussian and double-well targets use
/// the identity and are deliberately not covered here.
pub trait PreconditionedModel: TargetModel {
    fn approx_precision(&self) -> DMatrix;
}

impl PreconditionedModel for SvModel {
    fn approx_precision(&self) -> DMatrix {
        let mut p = self.precision.to_dense();
        for i in 0..p.n {
            let v = p.get(i, i) + 0.5;
            p.set(i, i, v);
        }
        p
    }
}

impl PreconditionedModel for CoxModel {
    fn approx_precision(&self) -> DMatrix {
        let mut p = self.cinv.clone();
        let shift = (self.mu + 0.5 * self.sigma2).exp() / self.n as f64;
        for i in 0..p.n {
            let v = p.get(i, i) + shift;
            p.set(i, i, v);
        }
        p
    }
}

// ---------------------------------------------------------------------------
// CSV emission for simulated datasets
// ---------------------------------------------------------------------------

/// One row per index: `index,x_true,y`.
pub fn dataset_to_csv(x_true: &[f64], y: &[f64]) -> String {
    let mut out = String::from("index,x_true,y\n");
    for (i, (xv, yv)) in x_true.iter().zip(y).enumerate() {
        out.push_str(&format!("{i},{xv},{yv}\n"));
    }
    out
}

/// Parses the simulator CSV format back into `(x_true, y)`.
pub fn dataset_from_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if ln == 0 || line.trim().is_empty() {
            continue;
        }
        let mut it = line.split(',');
        let _idx = it.next();
        let xv = it
            .next()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::InvalidParams(format!("bad dataset row {ln}")))?;
        let yv = it
            .next()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::InvalidParams(format!("bad dataset row {ln}")))?;
        x.push(xv);
        y.push(yv);
    }
    Ok((x, y))
}
