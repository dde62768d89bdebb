//! Small dense linear algebra: the 2x2 per-coordinate noise factorization
//! used by every kernel, and an unblocked row-oriented Cholesky with
//! triangular solves for preconditioning. Problem sizes stay at or below a
//! few thousand, so nothing here is blocked or parallel.

use crate::rng::RngStream;
use crate::{Error, Result};

/// Absolute pivot tolerance for the 2x2 factorizations. The one-noise HAMS
/// variants make the covariance exactly singular, so a zero second pivot is a
/// supported path, not an error.
pub const PSD_TOL: f64 = 1e-12;

/// Per-coordinate covariance of a noise pair `(z1_i, z2_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cov2x2 {
    pub v11: f64,
    pub v12: f64,
    pub v22: f64,
}

impl Cov2x2 {
    pub fn new(v11: f64, v12: f64, v22: f64) -> Self {
        Self { v11, v12, v22 }
    }

    pub fn det(&self) -> f64 {
        self.v11 * self.v22 - self.v12 * self.v12
    }
}

/// Lower-triangular 2x2 factor `F` with `F F^T` reproducing a [`Cov2x2`].
/// Rank deficiency is represented by a zeroed column; `normals_needed`
/// reports how many standard normals a draw consumes (0, 1, or 2).
#[derive(Debug, Clone, Copy)]
pub struct NoiseFactor {
    pub f11: f64,
    pub f21: f64,
    pub f22: f64,
}

impl NoiseFactor {
    pub fn is_zero(&self) -> bool {
        self.f11 == 0.0 && self.f21 == 0.0 && self.f22 == 0.0
    }

    /// Number of independent standard normals consumed per coordinate pair.
    pub fn normals_needed(&self) -> usize {
        if self.is_zero() {
            0
        } else if self.f22 == 0.0 {
            1
        } else {
            2
        }
    }

    /// Applies the factor to a pair of standard normals.
    #[inline]
    pub fn apply(&self, xi1: f64, xi2: f64) -> (f64, f64) {
        (self.f11 * xi1, self.f21 * xi1 + self.f22 * xi2)
    }
}

/// A noise pair `(z1, z2)`, one correlated draw per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePair {
    pub z1: Vec<f64>,
    pub z2: Vec<f64>,
}

impl NoisePair {
    pub fn zeros(k: usize) -> Self {
        Self { z1: vec![0.0; k], z2: vec![0.0; k] }
    }

    pub fn len(&self) -> usize {
        self.z1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z1.is_empty()
    }

    /// Componentwise negation, as used by the backward transition.
    pub fn negated(&self) -> Self {
        Self {
            z1: self.z1.iter().map(|v| -v).collect(),
            z2: self.z2.iter().map(|v| -v).collect(),
        }
    }
}

/// Factors a 2x2 covariance as `F F^T` with `F` lower triangular.
///
/// A pivot below [`PSD_TOL`] zeroes the corresponding column, which turns a
/// rank-1 covariance into a one-normal draw. Returns [`Error::NotPsd`] when a
/// diagonal entry or the determinant is negative beyond tolerance.
pub fn factor_cov2(cov: Cov2x2) -> Result<NoiseFactor> {
    if cov.v11 < -PSD_TOL || cov.v22 < -PSD_TOL {
        return Err(Error::NotPsd(format!(
            "negative diagonal: v11={}, v22={}",
            cov.v11, cov.v22
        )));
    }
    if cov.det() < -PSD_TOL {
        return Err(Error::NotPsd(format!("negative determinant: {}", cov.det())));
    }
    if cov.v11 < PSD_TOL {
        // First column vanishes; any consistent v12 must be ~0.
        if cov.v12.abs() > 1e-6 {
            return Err(Error::NotPsd(format!(
                "v11 ~ 0 but v12 = {} is not",
                cov.v12
            )));
        }
        let f22 = if cov.v22 < PSD_TOL { 0.0 } else { cov.v22.sqrt() };
        return Ok(NoiseFactor { f11: 0.0, f21: 0.0, f22 });
    }
    let f11 = cov.v11.sqrt();
    let f21 = cov.v12 / f11;
    let pivot2 = cov.v22 - f21 * f21;
    let f22 = if pivot2 < PSD_TOL { 0.0 } else { pivot2.sqrt() };
    Ok(NoiseFactor { f11, f21, f22 })
}

/// Draws a [`NoisePair`] of dimension `k` through a factored covariance.
///
/// Consumes exactly `normals_needed()` standard normals per coordinate, so
/// the one-noise kernels (singular covariance) stay in lockstep with their
/// hand-written single-noise transcriptions on a shared stream.
pub fn sample_noise_pair(factor: &NoiseFactor, k: usize, rng: &mut RngStream) -> NoisePair {
    let mut out = NoisePair::zeros(k);
    match factor.normals_needed() {
        0 => {}
        1 => {
            for i in 0..k {
                let xi = rng.normal();
                out.z1[i] = factor.f11 * xi;
                out.z2[i] = factor.f21 * xi;
            }
        }
        _ => {
            for i in 0..k {
                let xi1 = rng.normal();
                let xi2 = rng.normal();
                let (z1, z2) = factor.apply(xi1, xi2);
                out.z1[i] = z1;
                out.z2[i] = z2;
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Dense symmetric matrices and Cholesky
// ---------------------------------------------------------------------------

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl DMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Maximum relative symmetry defect, `|m_ij - m_ji| / max|m|`.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst / scale
    }
}

/// Lower-triangular Cholesky factor with forward/backward solves.
#[derive(Debug, Clone)]
pub struct CholFactor {
    pub n: usize,
    /// Row-major lower triangle (upper part zero).
    pub data: Vec<f64>,
}

/// Unblocked row-oriented Cholesky of a symmetric positive-definite matrix.
///
/// Fails with [`Error::NotPd`] on a nonpositive pivot and with
/// [`Error::InvalidParams`] when the input is asymmetric beyond 1e-10
/// relative.
pub fn chol_dense(m: &DMatrix) -> Result<CholFactor> {
    if m.symmetry_defect() > 1e-10 {
        return Err(Error::InvalidParams(format!(
            "matrix not symmetric (defect {})",
            m.symmetry_defect()
        )));
    }
    let n = m.n;
    let mut l = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::NotPd { index: i, value: s });
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(CholFactor { n, data: l })
}

impl CholFactor {
    #[inline]
    fn l(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Solves `L y = b` in place.
    pub fn solve_lower(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            for j in 0..i {
                s -= self.l(i, j) * b[j];
            }
            b[i] = s / self.l(i, i);
        }
    }

    /// Solves `L^T y = b` in place.
    pub fn solve_lower_t(&self, b: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in (i + 1)..n {
                s -= self.l(j, i) * b[j];
            }
            b[i] = s / self.l(i, i);
        }
    }

    /// Solves `L L^T y = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        self.solve_lower(b);
        self.solve_lower_t(b);
    }

    /// Applies `y = L x`.
    pub fn mul_lower(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut s = 0.0;
            for j in 0..=i {
                s += self.l(i, j) * x[j];
            }
            out[i] = s;
        }
    }

    /// Applies `y = L^T x`.
    pub fn mul_lower_t(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = 0.0;
            for j in i..n {
                s += self.l(j, i) * x[j];
            }
            out[i] = s;
        }
    }

    /// Dense inverse of the factored matrix, `(L L^T)^{-1}`.
    pub fn inverse(&self) -> DMatrix {
        let n = self.n;
        let mut inv = DMatrix::zeros(n);
        let mut col = vec![0.0f64; n];
        for j in 0..n {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[j] = 1.0;
            self.solve(&mut col);
            for i in 0..n {
                inv.set(i, j, col[i]);
            }
        }
        // Symmetrize away the last bits of solve asymmetry.
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (inv.get(i, j) + inv.get(j, i));
                inv.set(i, j, v);
                inv.set(j, i, v);
            }
        }
        inv
    }

    /// Reconstructs `L L^T`.
    pub fn reconstruct(&self) -> DMatrix {
        let n = self.n;
        let mut m = DMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = 0.0;
                for k in 0..=j.min(i) {
                    s += self.l(i, k) * self.l(j, k);
                }
                m.set(i, j, s);
                m.set(j, i, s);
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct2(f: &NoiseFactor) -> Cov2x2 {
        Cov2x2::new(
            f.f11 * f.f11,
            f.f21 * f.f11,
            f.f21 * f.f21 + f.f22 * f.f22,
        )
    }

    #[test]
    fn factor_identity() {
        let f = factor_cov2(Cov2x2::new(1.0, 0.0, 1.0)).unwrap();
        assert_eq!((f.f11, f.f21, f.f22), (1.0, 0.0, 1.0));
        assert_eq!(f.normals_needed(), 2);
    }

    #[test]
    fn factor_rank_one() {
        let f = factor_cov2(Cov2x2::new(1.0, 1.0, 1.0)).unwrap();
        assert_eq!((f.f11, f.f21, f.f22), (1.0, 1.0, 0.0));
        assert_eq!(f.normals_needed(), 1);
    }

    #[test]
    fn factor_hams_a_covariance() {
        // One-noise kernel at eps = 0.6, eta2 = 2: exactly singular.
        let (a1, a2, a3) = (0.2, 0.6 * (-0.3f64).exp(), (-0.6f64).exp() * 1.8);
        let cov = Cov2x2::new(
            2.0 * a1 - a1 * a1 - a2 * a2,
            a2 * (2.0 - a1 - a3),
            2.0 * a3 - a3 * a3 - a2 * a2,
        );
        assert!((cov.v11 - 0.162428).abs() < 1e-6);
        let f = factor_cov2(cov).unwrap();
        assert_eq!(f.normals_needed(), 1);
        let r = reconstruct2(&f);
        assert!((r.v11 - cov.v11).abs() < 1e-12);
        assert!((r.v12 - cov.v12).abs() < 1e-12);
        assert!((r.v22 - cov.v22).abs() < 1e-12);
    }

    #[test]
    fn factor_rejects_indefinite() {
        assert!(matches!(
            factor_cov2(Cov2x2::new(1.0, 2.0, 1.0)),
            Err(Error::NotPsd(_))
        ));
        assert!(matches!(
            factor_cov2(Cov2x2::new(-1.0, 0.0, 1.0)),
            Err(Error::NotPsd(_))
        ));
    }

    #[test]
    fn zero_factor_gives_zero_noise() {
        let f = factor_cov2(Cov2x2::new(0.0, 0.0, 0.0)).unwrap();
        let mut rng = RngStream::new(1, 0);
        let z = sample_noise_pair(&f, 4, &mut rng);
        assert!(z.z1.iter().chain(&z.z2).all(|&v| v == 0.0));
        assert_eq!(f.normals_needed(), 0);
    }

    #[test]
    fn rank_one_forces_equal_components() {
        let f = factor_cov2(Cov2x2::new(1.0, 1.0, 1.0)).unwrap();
        let mut rng = RngStream::new(1, 0);
        let z = sample_noise_pair(&f, 100, &mut rng);
        for i in 0..100 {
            assert_eq!(z.z1[i].to_bits(), z.z2[i].to_bits());
        }
    }

    #[test]
    fn sample_covariance_matches_identity() {
        // 1e6 univariate pairs through the identity factor.
        let f = factor_cov2(Cov2x2::new(1.0, 0.0, 1.0)).unwrap();
        let mut rng = RngStream::new(5, 0);
        let n = 1_000_000usize;
        let (mut s11, mut s12, mut s22) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let z = sample_noise_pair(&f, 1, &mut rng);
            s11 += z.z1[0] * z.z1[0];
            s12 += z.z1[0] * z.z2[0];
            s22 += z.z2[0] * z.z2[0];
        }
        let nf = n as f64;
        assert!((s11 / nf - 1.0).abs() < 0.01);
        assert!((s12 / nf).abs() < 0.01);
        assert!((s22 / nf - 1.0).abs() < 0.01);
    }

    #[test]
    fn empirical_covariance_general_case() {
        // Four-standard-error window around a correlated target.
        let cov = Cov2x2::new(0.8, -0.3, 0.5);
        let f = factor_cov2(cov).unwrap();
        let mut rng = RngStream::new(11, 3);
        let n = 1_000_000usize;
        let (mut s11, mut s12, mut s22) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let z = sample_noise_pair(&f, 1, &mut rng);
            s11 += z.z1[0] * z.z1[0];
            s12 += z.z1[0] * z.z2[0];
            s22 += z.z2[0] * z.z2[0];
        }
        let nf = n as f64;
        // SE of a second moment of variance v is ~ v * sqrt(2/n).
        let se = (2.0 / nf).sqrt();
        assert!((s11 / nf - cov.v11).abs() < 4.0 * se * cov.v11.max(0.1));
        assert!((s22 / nf - cov.v22).abs() < 4.0 * se * cov.v22.max(0.1));
        assert!((s12 / nf - cov.v12).abs() < 4.0 * se);
    }

    #[test]
    fn chol_identity() {
        let l = chol_dense(&DMatrix::identity(3)).unwrap();
        assert_eq!(l.reconstruct(), DMatrix::identity(3));
    }

    #[test]
    fn chol_2x2_exact() {
        let mut m = DMatrix::zeros(2);
        m.data.copy_from_slice(&[4.0, 2.0, 2.0, 3.0]);
        let l = chol_dense(&m).unwrap();
        assert_eq!(l.l(0, 0), 2.0);
        assert_eq!(l.l(1, 0), 1.0);
        assert!((l.l(1, 1) - 2.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn chol_rejects_indefinite() {
        let mut m = DMatrix::zeros(2);
        m.data.copy_from_slice(&[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(chol_dense(&m), Err(Error::NotPd { .. })));
    }

    #[test]
    fn chol_ar1_precision_reconstruction() {
        // Tridiagonal AR(1) precision, T = 1000.
        let t = 1000usize;
        let (varphi, sigma) = (0.98f64, 0.15f64);
        let s2 = sigma * sigma;
        let mut m = DMatrix::zeros(t);
        for i in 0..t {
            let d = if i == 0 || i == t - 1 { 1.0 } else { 1.0 + varphi * varphi };
            m.set(i, i, d / s2);
            if i + 1 < t {
                m.set(i, i + 1, -varphi / s2);
                m.set(i + 1, i, -varphi / s2);
            }
        }
        let l = chol_dense(&m).unwrap();
        let r = l.reconstruct();
        let scale = m.max_abs();
        let mut worst = 0.0f64;
        for i in 0..t * t {
            worst = worst.max((r.data[i] - m.data[i]).abs());
        }
        assert!(worst / scale < 1e-9, "relative residual {}", worst / scale);
    }

    #[test]
    fn triangular_solves_invert() {
        let mut m = DMatrix::zeros(3);
        m.data.copy_from_slice(&[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let l = chol_dense(&m).unwrap();
        let b = vec![1.0, -2.0, 0.5];
        let mut y = b.clone();
        l.solve(&mut y);
        let mut back = vec![0.0; 3];
        m.matvec(&y, &mut back);
        for i in 0..3 {
            assert!((back[i] - b[i]).abs() < 1e-12);
        }
    }
}
