//! Cholesky whitening: given an approximate stationary covariance
//! `Sigma_hat`, factor `Sigma_hat^{-1} = L L'` and run any kernel on the
//! transformed variable `x^ = L' x`, whose target is roughly standard
//! Gaussian. Gradients transport by `L^{-1}`, samples map back by `L'^{-1}`.
//! One iteration costs one gradient evaluation plus two triangular solves.

use crate::linalg::{chol_dense, CholFactor, DMatrix};
use crate::targets::TargetModel;
use crate::Result;

/// Whitening transform built from a Cholesky factor `L` with
/// `L L' = Sigma_hat^{-1}`.
#[derive(Debug, Clone)]
pub struct Whitener {
    chol: CholFactor,
}

impl Whitener {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self { chol: CholFactor { n: dim, data } }
    }

    pub fn dim(&self) -> usize {
        self.chol.n
    }

    pub fn factor(&self) -> &CholFactor {
        &self.chol
    }

    /// `x^ = L' x`.
    pub fn to_whitened(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.chol.mul_lower_t(x, &mut out);
        out
    }

    /// `x = L'^{-1} x^`.
    pub fn from_whitened(&self, x_hat: &[f64]) -> Vec<f64> {
        let mut out = x_hat.to_vec();
        self.chol.solve_lower_t(&mut out);
        out
    }

    /// Gradient transport `g^ = L^{-1} g`, in place.
    pub fn transport_gradient(&self, g: &mut [f64]) {
        self.chol.solve_lower(g);
    }
}

/// Factors `Sigma_hat^{-1} = L L'` from the covariance itself.
pub fn build_whitener(sigma_hat: &DMatrix) -> Result<Whitener> {
    let precision = chol_dense(sigma_hat)?.inverse();
    whitener_from_precision(&precision)
}

/// Factors directly from the precision `Sigma_hat^{-1}`; the cheap path when
/// the model supplies a (possibly sparse-structured) precision.
pub fn whitener_from_precision(precision: &DMatrix) -> Result<Whitener> {
    Ok(Whitener { chol: chol_dense(precision)? })
}

/// The target seen in whitened coordinates:
/// `U^(x^) = U(L'^{-1} x^)`, `grad U^(x^) = L^{-1} grad U(L'^{-1} x^)`.
pub struct WhitenedModel<'a, M: TargetModel + ?Sized> {
    inner: &'a M,
    whitener: &'a Whitener,
}

/// Wraps a model for sampling in whitened coordinates.
pub fn whiten<'a, M: TargetModel + ?Sized>(
    model: &'a M,
    whitener: &'a Whitener,
) -> WhitenedModel<'a, M> {
    assert_eq!(model.dim(), whitener.dim(), "whitener dimension mismatch");
    WhitenedModel { inner: model, whitener }
}

impl<M: TargetModel + ?Sized> TargetModel for WhitenedModel<'_, M> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn potential(&self, x_hat: &[f64]) -> Result<f64> {
        let x = self.whitener.from_whitened(x_hat);
        self.inner.potential(&x)
    }

    fn gradient(&self, x_hat: &[f64], out: &mut [f64]) -> Result<()> {
        let x = self.whitener.from_whitened(x_hat);
        self.inner.gradient(&x, out)?;
        self.whitener.transport_gradient(out);
        Ok(())
    }

    fn potential_and_gradient(&self, x_hat: &[f64], grad: &mut [f64]) -> Result<f64> {
        let x = self.whitener.from_whitened(x_hat);
        let pot = self.inner.potential_and_gradient(&x, grad)?;
        self.whitener.transport_gradient(grad);
        Ok(pot)
    }
}
