//! Chain evaluation: Bartlett-window and within/between effective sample
//! sizes, configurational/kinetic temperature estimators, density-bin error
//! against a quadrature truth, and RMSE aggregation across repetitions.

use crate::targets::TargetModel;
use crate::{Error, Result};

/// Draws, momenta, and per-step accept/exponent traces from one chain.
#[derive(Debug, Clone, Default)]
pub struct ChainRecord {
    /// `n x k` draws, one row per kept step.
    pub draws: Vec<Vec<f64>>,
    /// Matching momenta rows, when recorded.
    pub momenta: Option<Vec<Vec<f64>>>,
    pub accepted: Vec<bool>,
    pub delta_g: Vec<f64>,
}

impl ChainRecord {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            draws: Vec::with_capacity(n),
            momenta: Some(Vec::with_capacity(n)),
            accepted: Vec::with_capacity(n),
            delta_g: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.draws.first().map_or(0, |r| r.len())
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.accepted.is_empty() {
            return 0.0;
        }
        self.accepted.iter().filter(|&&a| a).count() as f64 / self.accepted.len() as f64
    }

    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.draws.iter().map(|row| row[j]).collect()
    }

    /// CSV with header `step,x1..xk,u1..uk,accepted,delta_g`; the momentum
    /// columns are present only when momenta were recorded.
    pub fn to_csv(&self) -> String {
        let k = self.dim();
        let mut out = String::from("step");
        for j in 1..=k {
            out.push_str(&format!(",x{j}"));
        }
        if self.momenta.is_some() {
            for j in 1..=k {
                out.push_str(&format!(",u{j}"));
            }
        }
        out.push_str(",accepted,delta_g\n");
        for i in 0..self.len() {
            out.push_str(&format!("{i}"));
            for v in &self.draws[i] {
                out.push_str(&format!(",{v}"));
            }
            if let Some(us) = &self.momenta {
                for v in &us[i] {
                    out.push_str(&format!(",{v}"));
                }
            }
            out.push_str(&format!(
                ",{},{}\n",
                u8::from(self.accepted[i]),
                self.delta_g[i]
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidParams("empty chain csv".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        let k = cols.iter().filter(|c| c.starts_with('x')).count();
        let has_u = cols.iter().any(|c| c.starts_with('u'));
        let mut rec = ChainRecord { momenta: has_u.then(Vec::new), ..Default::default() };
        for (ln, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let expect = 1 + k + if has_u { k } else { 0 } + 2;
            if fields.len() != expect {
                return Err(Error::InvalidParams(format!(
                    "chain csv row {ln}: {} fields, expected {expect}",
                    fields.len()
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidParams(format!("bad float {s:?} in row {ln}")))
            };
            let xs: Vec<f64> = fields[1..1 + k].iter().map(|s| parse(s)).collect::<Result<_>>()?;
            rec.draws.push(xs);
            if has_u {
                let us: Vec<f64> =
                    fields[1 + k..1 + 2 * k].iter().map(|s| parse(s)).collect::<Result<_>>()?;
                rec.momenta.as_mut().unwrap().push(us);
            }
            rec.accepted.push(parse(fields[expect - 2])? != 0.0);
            rec.delta_g.push(parse(fields[expect - 1])?);
        }
        Ok(rec)
    }
}

/// Bartlett-window effective sample size
/// `n / (1 + 2 sum_{l<L} (1 - l/L) rho(l))` with biased-normalization sample
/// autocorrelations (divide by `n`), which keeps the window positive
/// definite. A cutoff at or beyond `n` is reduced to `n - 1` with a warning.
/// The denominator is floored at `1/n`, so the estimate stays positive.
pub fn ess_bartlett(series: &[f64], cutoff: usize) -> Result<f64> {
    let n = series.len();
    if n < 4 || cutoff == 0 {
        return Err(Error::InvalidParams(format!(
            "ess needs n >= 4 and cutoff >= 1, got ({n}, {cutoff})"
        )));
    }
    let cutoff = if cutoff >= n {
        eprintln!("warning: ess cutoff {cutoff} >= series length {n}; using {}", n - 1);
        n - 1
    } else {
        cutoff
    };
    let nf = n as f64;
    let mean = series.iter().sum::<f64>() / nf;
    let centered: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let var = centered.iter().map(|v| v * v).sum::<f64>() / nf;
    if var <= 0.0 || !var.is_finite() {
        return Err(Error::ZeroVariance);
    }
    let mut acc = 0.0;
    let lf = cutoff as f64;
    for lag in 1..cutoff {
        let dot = lagged_dot(&centered, lag);
        let rho = dot / (nf * var);
        acc += (1.0 - lag as f64 / lf) * rho;
    }
    let denom = (1.0 + 2.0 * acc).max(1.0 / nf);
    Ok(nf / denom)
}

/// `sum_i v[i] v[i+lag]`, four-way unrolled so the reduction is not bound by
/// floating-point add latency (this dominates the ESS cost on long chains).
#[inline]
fn lagged_dot(v: &[f64], lag: usize) -> f64 {
    let head = &v[..v.len() - lag];
    let tail = &v[lag..];
    let chunks = head.len() / 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0f64, 0.0, 0.0, 0.0);
    for c in 0..chunks {
        let i = 4 * c;
        s0 += head[i] * tail[i];
        s1 += head[i + 1] * tail[i + 1];
        s2 += head[i + 2] * tail[i + 2];
        s3 += head[i + 3] * tail[i + 3];
    }
    let mut rest = 0.0;
    for i in 4 * chunks..head.len() {
        rest += head[i] * tail[i];
    }
    (s0 + s1) + (s2 + s3) + rest
}

/// Within/between multi-chain effective sample size `n W / B` for `m` chains
/// of length `n`:
/// `W = sum_ij (x_ij - xbar_j)^2 / (m (n-1))`,
/// `B = n sum_j (xbar_j - xbar)^2 / (m-1)`.
pub fn ess_multichain(chains: &[Vec<f64>]) -> Result<f64> {
    let m = chains.len();
    if m < 2 {
        return Err(Error::InvalidParams(format!("need at least 2 chains, got {m}")));
    }
    let n = chains[0].len();
    if n < 2 || chains.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidParams("chains must share a length of at least 2".into()));
    }
    let nf = n as f64;
    let mf = m as f64;
    let chain_means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / nf).collect();
    let grand = chain_means.iter().sum::<f64>() / mf;
    let w: f64 = chains
        .iter()
        .zip(&chain_means)
        .map(|(c, &cm)| c.iter().map(|v| (v - cm) * (v - cm)).sum::<f64>())
        .sum::<f64>()
        / (mf * (nf - 1.0));
    let b: f64 = nf * chain_means.iter().map(|&cm| (cm - grand) * (cm - grand)).sum::<f64>()
        / (mf - 1.0);
    if b < 1e-300 {
        return Err(Error::DegenerateBetween);
    }
    Ok(nf * w / b)
}

/// Sample-mean temperature estimators on univariate draws:
/// configurational `T_C1 = E[x grad U]`, `T_C2 = E[(grad U)^2] / E[lap U]`,
/// kinetic `T_K = E[u^2]`. Needs the model's Hessian diagonal.
pub fn temperatures<M: TargetModel + ?Sized>(
    xs: &[f64],
    us: &[f64],
    model: &M,
) -> Result<(f64, f64, f64)> {
    if model.dim() != 1 {
        return Err(Error::Unsupported("temperature estimators are univariate"));
    }
    if !model.has_hessian_diag() {
        return Err(Error::Unsupported("temperature estimators need hessian_diag"));
    }
    if xs.is_empty() || xs.len() != us.len() {
        return Err(Error::InvalidParams("temperatures need matching nonempty draws".into()));
    }
    let mut s_xg = 0.0;
    let mut s_g2 = 0.0;
    let mut s_h = 0.0;
    let mut g = [0.0f64];
    let mut h = [0.0f64];
    for &x in xs {
        model.gradient(&[x], &mut g)?;
        model.hessian_diag(&[x], &mut h)?;
        s_xg += x * g[0];
        s_g2 += g[0] * g[0];
        s_h += h[0];
    }
    let n = xs.len() as f64;
    let t_k = us.iter().map(|u| u * u).sum::<f64>() / n;
    Ok((s_xg / n, s_g2 / s_h, t_k))
}

// ---------------------------------------------------------------------------
// Density-bin error
// ---------------------------------------------------------------------------

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let mid = 0.5 * (a + b);
    let whole = simpson(f, a, b);
    let left = simpson(f, a, mid);
    let right = simpson(f, mid, b);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        left + right + (left + right - whole) / 15.0
    } else {
        adaptive_simpson(f, a, mid, 0.5 * tol, depth - 1)
            + adaptive_simpson(f, mid, b, 0.5 * tol, depth - 1)
    }
}

/// Integrates `exp(-U)` over `[a, b]` to absolute tolerance `tol`.
pub fn quadrature_mass<M: TargetModel + ?Sized>(model: &M, a: f64, b: f64, tol: f64) -> f64 {
    let f = |x: f64| model.potential(&[x]).map_or(0.0, |u| (-u).exp());
    adaptive_simpson(&f, a, b, tol, 48)
}

/// Mean absolute bin-mass error over 16 equal bins of `[-2, 2]`, with the
/// truth normalized by quadrature of `exp(-U)` over `[-10, 10]`.
pub fn density_bin_error<M: TargetModel + ?Sized>(samples: &[f64], model: &M) -> f64 {
    density_bin_error_with_truth(samples, &density_bin_truth(model))
}

/// Same error against a precomputed truth (the quadrature is per-model, so
/// repeated experiments share it).
pub fn density_bin_error_with_truth(samples: &[f64], truth: &[f64; 16]) -> f64 {
    const BINS: usize = 16;
    let width = 4.0 / BINS as f64;
    let mut counts = [0usize; BINS];
    for &x in samples {
        if (-2.0..2.0).contains(&x) {
            let idx = (((x + 2.0) / width) as usize).min(BINS - 1);
            counts[idx] += 1;
        }
    }
    let n = samples.len() as f64;
    truth
        .iter()
        .zip(&counts)
        .map(|(t, &c)| (c as f64 / n - t).abs())
        .sum::<f64>()
        / BINS as f64
}

/// Exact per-bin masses of the 16-bin grid (used by tests and reports).
pub fn density_bin_truth<M: TargetModel + ?Sized>(model: &M) -> [f64; 16] {
    let z = quadrature_mass(model, -10.0, 10.0, 1e-10);
    let width = 4.0 / 16.0;
    let mut truth = [0.0f64; 16];
    for (i, t) in truth.iter_mut().enumerate() {
        let lo = -2.0 + i as f64 * width;
        *t = quadrature_mass(model, lo, lo + width, 1e-12) / z;
    }
    truth
}

/// Root mean squared deviation of repeated estimates from the truth.
pub fn rmse_over_reps(estimates: &[f64], truth: f64) -> f64 {
    if estimates.is_empty() {
        return 0.0;
    }
    (estimates.iter().map(|e| (e - truth) * (e - truth)).sum::<f64>() / estimates.len() as f64)
        .sqrt()
}

/// Autocorrelation-robust standard error of the mean by batch means.
pub fn batch_mean_se(series: &[f64], nbatch: usize) -> f64 {
    let n = series.len();
    let per = n / nbatch;
    if per < 2 || nbatch < 2 {
        return f64::NAN;
    }
    let means: Vec<f64> = (0..nbatch)
        .map(|b| series[b * per..(b + 1) * per].iter().sum::<f64>() / per as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / nbatch as f64;
    let var =
        means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() / (nbatch - 1) as f64;
    (var / nbatch as f64).sqrt()
}
