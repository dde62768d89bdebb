//! Closed-form results for the kernels under an isotropic Gaussian target:
//! the order-1 VAR representation, its stationary variance, the expected
//! acceptance rate, the spectral radius with its optimal tuning, and the
//! bivariate-normal quadrant probability behind the acceptance identities.

use crate::hams::HamsCoeffs;
use crate::langevin::LinearKernel;
use crate::metropolized::MaKind;
use crate::{Error, Result};
use std::f64::consts::PI;

/// Drift and noise of one HAMS proposal under `grad U(x) = gamma x`
/// (gradient-correction coefficient included):
///
/// `Phi = [[1 - a1 g, a2], [a1 phi g (g-1) - a2 g, a3 - 1 + phi a2 (1-g)]]`
///
/// with the noise of `(x*, u*)` being `(Z1, phi (1-g) Z1 + Z2)`.
/// At `gamma = 1` this reduces to the rotation `[[1-a1, a2], [-a2, a3-1]]`.
pub fn var_kernel(coeffs: &HamsCoeffs, gamma: f64) -> LinearKernel {
    let (a1, a2, a3, phi) = (coeffs.a1, coeffs.a2, coeffs.a3, coeffs.phi);
    let g = gamma;
    let cov = coeffs.noise_cov();
    let t = phi * (1.0 - g);
    LinearKernel {
        m: [
            [1.0 - a1 * g, a2],
            [a1 * phi * g * (g - 1.0) - a2 * g, a3 - 1.0 + phi * a2 * (1.0 - g)],
        ],
        s: [
            [cov.v11, t * cov.v11 + cov.v12],
            [
                t * cov.v11 + cov.v12,
                t * t * cov.v11 + 2.0 * t * cov.v12 + cov.v22,
            ],
        ],
    }
}

/// Solves the 2x2 discrete Lyapunov equation `V = Phi V Phi' + W` exactly via
/// the symmetric 3-unknown linear system. Errors when the system is singular
/// (an eigenvalue product of `Phi` equals 1).
pub fn dlyap2(kernel: &LinearKernel) -> Result<[[f64; 2]; 2]> {
    let [[p11, p12], [p21, p22]] = kernel.m;
    let a = [
        [1.0 - p11 * p11, -2.0 * p11 * p12, -p12 * p12],
        [-p11 * p21, 1.0 - (p11 * p22 + p12 * p21), -p12 * p22],
        [-p21 * p21, -2.0 * p21 * p22, 1.0 - p22 * p22],
    ];
    let b = [kernel.s[0][0], kernel.s[0][1], kernel.s[1][1]];
    let v = solve3(a, b)?;
    Ok([[v[0], v[1]], [v[1], v[2]]])
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Result<[f64; 3]> {
    let mut m = a;
    let mut rhs = b;
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[pivot][col].abs() < 1e-14 {
            return Err(Error::Degenerate("singular Lyapunov system"));
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in (col + 1)..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut s = rhs[row];
        for k in (row + 1)..3 {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    Ok(x)
}

/// Stationary position variance of the proposal-only chain with default phi:
/// `Var(x) = (a1 - 2) / (gamma (a1 gamma - 2))`.
pub fn stationary_variance_closed(a1: f64, gamma: f64) -> Result<f64> {
    if (a1 * gamma - 2.0).abs() < 1e-12 {
        return Err(Error::Degenerate("stationary variance undefined at a1 gamma = 2"));
    }
    Ok((a1 - 2.0) / (gamma * (a1 * gamma - 2.0)))
}

/// Stationary mean of the acceptance exponent with default phi:
/// `E[dG] = a1^3 gamma (gamma - 1)^2 / (2 (2 - a1))`.
pub fn expected_delta_g(a1: f64, gamma: f64) -> Result<f64> {
    if !(a1 > 0.0 && a1 < 2.0) || gamma <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "expected_delta_g needs a1 in (0, 2) and gamma > 0, got ({a1}, {gamma})"
        )));
    }
    Ok(a1.powi(3) * gamma * (gamma - 1.0) * (gamma - 1.0) / (2.0 * (2.0 - a1)))
}

/// `E[alpha] = 1 - (2/pi) arctan(sqrt(E[dG]/2))`.
pub fn acceptance_from_expected_dg(e_dg: f64) -> f64 {
    1.0 - 2.0 / PI * (e_dg / 2.0).sqrt().atan()
}

/// Stationary expected acceptance rate of the Metropolized HAMS chain.
pub fn expected_acceptance(a1: f64, gamma: f64) -> Result<f64> {
    Ok(acceptance_from_expected_dg(expected_delta_g(a1, gamma)?))
}

/// Stationary `E[dG]` of the Metropolis-adjusted integrators, with
/// `c = e^{-eta eps}`:
/// BAOAB/ABOBA `gamma^2 eps^4 (1+c) [4 - 4c + (1+c) gamma eps^2] / 128`;
/// BP `gamma^3 eps^6 / 32` (friction-independent).
pub fn expected_delta_g_ma(kind: MaKind, epsilon: f64, eta: f64, gamma: f64) -> Result<f64> {
    if epsilon <= 0.0 || eta < 0.0 || gamma <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "expected_delta_g_ma needs eps > 0, eta >= 0, gamma > 0, got ({epsilon}, {eta}, {gamma})"
        )));
    }
    let e2 = epsilon * epsilon;
    Ok(match kind {
        MaKind::Bp => gamma.powi(3) * e2.powi(3) / 32.0,
        MaKind::Baoab | MaKind::Aboba => {
            let c = (-eta * epsilon).exp();
            gamma * gamma * e2 * e2 * (1.0 + c) * (4.0 - 4.0 * c + (1.0 + c) * gamma * e2) / 128.0
        }
    })
}

/// Stationary expected acceptance rate of the Metropolis-adjusted
/// integrators.
pub fn expected_acceptance_ma(kind: MaKind, epsilon: f64, eta: f64, gamma: f64) -> Result<f64> {
    Ok(acceptance_from_expected_dg(expected_delta_g_ma(kind, epsilon, eta, gamma)?))
}

/// Spectral radius of the standard-Gaussian drift
/// `Phi = [[1-a1, a2], [-a2, a3-1]]`, in the piecewise closed form: complex
/// eigenvalues give `sqrt(a1 + a3 - a1 a3 + a2^2 - 1)`, real ones
/// `(|a3 - a1| + sqrt((a1 + a3 - 2)^2 - 4 a2^2)) / 2`. The branch boundary is
/// resolved at 1e-12; both branches agree there.
pub fn spectral_radius(coeffs: &HamsCoeffs) -> f64 {
    spectral_radius_parts(coeffs.a1, coeffs.a2, coeffs.a3)
}

pub fn spectral_radius_parts(a1: f64, a2: f64, a3: f64) -> f64 {
    let disc = (a1 + a3 - 2.0) * (a1 + a3 - 2.0) - 4.0 * a2 * a2;
    if disc < 1e-12 {
        (a1 + a3 - a1 * a3 + a2 * a2 - 1.0).max(0.0).sqrt()
    } else {
        0.5 * ((a3 - a1).abs() + disc.sqrt())
    }
}

/// Minimizes the spectral radius over `(a2, a3)` at fixed `a1` and
/// `nu = a2^2 / a3`: the optimum is `a3* = (sqrt(nu + 2 - a1) - sqrt(nu))^2`,
/// `a2* = sqrt(nu a3*)`, radius `|a3* - a1| / 2`. Requires
/// `0 < a1 < 2` and `nu <= a1 <= 1 + nu`.
pub fn optimal_a3(a1: f64, nu: f64) -> Result<(f64, f64, f64)> {
    if !(a1 > 0.0 && a1 < 2.0) || nu < 0.0 {
        return Err(Error::ConstraintViolation(format!(
            "optimal_a3 needs 0 < a1 < 2 and nu >= 0, got ({a1}, {nu})"
        )));
    }
    if !(nu <= a1 + 1e-12 && a1 <= 1.0 + nu + 1e-12) {
        return Err(Error::ConstraintViolation(format!(
            "optimal_a3 needs nu <= a1 <= 1 + nu, got ({a1}, {nu})"
        )));
    }
    let a3 = ((nu + 2.0 - a1).sqrt() - nu.sqrt()).powi(2);
    let a2 = (nu * a3).sqrt();
    Ok((a3, a2, 0.5 * (a3 - a1).abs()))
}

/// Mirror image of [`optimal_a3`]: minimizes over `(a1, a2)` at fixed `a3`
/// and `nu~ = a2^2/(2 - a1)`; the optimum satisfies
/// `2 - a1* = (sqrt(nu~ + a3) - sqrt(nu~))^2`. Requires
/// `0 < a3 < 2` and `nu~ <= 2 - a3 <= 1 + nu~`.
pub fn optimal_a1(a3: f64, nu_tilde: f64) -> Result<(f64, f64, f64)> {
    if !(a3 > 0.0 && a3 < 2.0) || nu_tilde < 0.0 {
        return Err(Error::ConstraintViolation(format!(
            "optimal_a1 needs 0 < a3 < 2 and nu~ >= 0, got ({a3}, {nu_tilde})"
        )));
    }
    if !(nu_tilde <= 2.0 - a3 + 1e-12 && 2.0 - a3 <= 1.0 + nu_tilde + 1e-12) {
        return Err(Error::ConstraintViolation(format!(
            "optimal_a1 needs nu~ <= 2 - a3 <= 1 + nu~, got ({a3}, {nu_tilde})"
        )));
    }
    let a1 = 2.0 - ((nu_tilde + a3).sqrt() - nu_tilde.sqrt()).powi(2);
    let a2 = (nu_tilde * (2.0 - a1)).sqrt();
    Ok((a1, a2, 0.5 * (a3 - a1).abs()))
}

/// Orthant mass of a standardized bivariate normal with correlation `tau`:
/// `P[X > 0, Y > 0] = 1/4 + arcsin(tau) / (2 pi)`.
pub fn quadrant_probability(tau: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&tau) {
        return Err(Error::InvalidParams(format!("correlation must lie in [-1, 1], got {tau}")));
    }
    Ok(0.25 + tau.asin() / (2.0 * PI))
}
