//! Coefficient maps embedding the modified integrators into (shifted) HAMS
//! form, and numerical verification of the embeddings at the linearization
//! level.
//!
//! GJF, BAOAB, IL, and BP match the plain update (GJF/BAOAB/IL with a
//! singular `A` and a phi that differs from the default by `O(eps^2)`; BP
//! exactly, default phi included). ABOBA, SPV, and Mannella's leapfrog use a
//! position midpoint, so they match the shifted update, with noise moments
//! differing by `O(eps^3)`.

use crate::hams::{default_phi, HamsCoeffs, ShiftedHamsCoeffs};
use crate::langevin::{linearize, spv_shift, IntegratorKind, LinearKernel, Variant};
use crate::linalg::factor_cov2;
use crate::{Error, Result};

/// Matched plain-HAMS coefficients for GJF, BAOAB, IL, BP, and VEC. The
/// returned `phi` is the matched one, not the default.
pub fn hams_coeffs_for(kind: IntegratorKind, epsilon: f64, eta: f64) -> Result<HamsCoeffs> {
    if !(epsilon > 0.0 && epsilon < 1.0) || eta < 0.0 {
        return Err(Error::InvalidParams(format!(
            "matching needs epsilon in (0, 1) and eta >= 0, got ({epsilon}, {eta})"
        )));
    }
    let eps = epsilon;
    match kind {
        IntegratorKind::Gjf => {
            let denom = 2.0 + eta * eps;
            let r = (4.0 - eps * eps).sqrt();
            HamsCoeffs::new(
                eps * eps / denom,
                eps * r / denom,
                (4.0 - eps * eps) / denom,
                eps / r,
            )
        }
        IntegratorKind::Baoab | IntegratorKind::Il => {
            let c = (-eta * eps).exp();
            let r = (4.0 - eps * eps).sqrt();
            HamsCoeffs::new(
                eps * eps / 4.0 * (1.0 + c),
                eps * r / 4.0 * (1.0 + c),
                (1.0 + c) * (1.0 - eps * eps / 4.0),
                eps / r,
            )
        }
        IntegratorKind::Bp => {
            let c = (-eta * eps).exp();
            let root = (1.0 - eps * eps).sqrt();
            HamsCoeffs::new(
                1.0 - root,
                eps * c.sqrt(),
                1.0 + c * root,
                c.sqrt() * eps / (1.0 + root),
            )
        }
        IntegratorKind::Vec => HamsCoeffs::new(
            eps * eps / 2.0,
            eps - eta * eps * eps / 2.0,
            2.0 - eps / 4.0 * (2.0 - eta * eps) * (2.0 * eta + eps),
            eps / 2.0,
        ),
        other => Err(Error::InvalidParams(format!(
            "{} matches the shifted form, use shifted_coeffs_for",
            other.name()
        ))),
    }
}

/// Matched shifted-HAMS coefficients for ABOBA, SPV, and Mannella's leapfrog.
/// All three satisfy `b = a1 / a2` and `b = eps/2 + O(eps^3)`.
pub fn shifted_coeffs_for(
    kind: IntegratorKind,
    epsilon: f64,
    eta: f64,
) -> Result<ShiftedHamsCoeffs> {
    if !(epsilon > 0.0 && epsilon < 1.0) || eta < 0.0 {
        return Err(Error::InvalidParams(format!(
            "matching needs epsilon in (0, 1) and eta >= 0, got ({epsilon}, {eta})"
        )));
    }
    let eps = epsilon;
    let root = (1.0 - eps * eps).sqrt();
    match kind {
        IntegratorKind::Aboba => {
            let c = (-eta * eps).exp();
            ShiftedHamsCoeffs::new(
                0.5 * (1.0 + c) * (1.0 - root),
                0.5 * eps * (1.0 + c),
                0.5 * (1.0 + c) * (1.0 + root),
                (1.0 - root) / eps,
            )
        }
        IntegratorKind::Spv => {
            let c = (-eta * eps).exp();
            let kick = if eta == 0.0 { eps } else { (1.0 - c) / eta };
            let b = spv_shift(eps, eta)?;
            let rad = ((1.0 + c) * (1.0 + c) - 4.0 * kick * kick).max(0.0).sqrt();
            ShiftedHamsCoeffs::new(0.5 * (1.0 + c - rad), kick, 0.5 * (1.0 + c + rad), b)
        }
        IntegratorKind::Mannella => {
            let denom = 2.0 + eta * eps;
            ShiftedHamsCoeffs::new(
                2.0 * (1.0 - root) / denom,
                2.0 * eps / denom,
                2.0 * (1.0 + root) / denom,
                (1.0 - root) / eps,
            )
        }
        other => Err(Error::InvalidParams(format!(
            "{} matches the plain form, use hams_coeffs_for",
            other.name()
        ))),
    }
}

/// Exact linearization of one plain-HAMS proposal under `grad U(x) = gamma x`
/// by direct transcription of the univariate update
/// `x* = x0 - a1 g0 + a2 u0 + Z1`,
/// `u* = (a3 + phi a2 - 1) u0 + (phi - phi a1 - a2) g0 - phi g* + phi Z1 + Z2`.
/// This is an independent route from both the kernel implementation and the
/// closed-form VAR coefficients.
pub fn hams_linearize(coeffs: &HamsCoeffs, gamma: f64) -> Result<LinearKernel> {
    let (a1, a2, a3, phi) = (coeffs.a1, coeffs.a2, coeffs.a3, coeffs.phi);
    let step = |x0: f64, u0: f64, z1: f64, z2: f64| -> [f64; 2] {
        let g0 = gamma * x0;
        let x_star = x0 - a1 * g0 + a2 * u0 + z1;
        let g_star = gamma * x_star;
        let u_star = (a3 + phi * a2 - 1.0) * u0 + (phi - phi * a1 - a2) * g0 - phi * g_star
            + phi * z1
            + z2;
        [x_star, u_star]
    };
    let factor = factor_cov2(coeffs.noise_cov())?;
    let col_x = step(1.0, 0.0, 0.0, 0.0);
    let col_u = step(0.0, 1.0, 0.0, 0.0);
    let n1 = step(0.0, 0.0, factor.f11, factor.f21);
    let n2 = step(0.0, 0.0, 0.0, factor.f22);
    Ok(LinearKernel {
        m: [[col_x[0], col_u[0]], [col_x[1], col_u[1]]],
        s: [
            [n1[0] * n1[0] + n2[0] * n2[0], n1[0] * n1[1] + n2[0] * n2[1]],
            [n1[0] * n1[1] + n2[0] * n2[1], n1[1] * n1[1] + n2[1] * n2[1]],
        ],
    })
}

/// Exact linearization of one shifted-HAMS proposal under
/// `grad U(x) = gamma x`.
pub fn shifted_linearize(sc: &ShiftedHamsCoeffs, gamma: f64) -> Result<LinearKernel> {
    let (a1, a2, a3, b) = (sc.a1, sc.a2, sc.a3, sc.b);
    let step = |x0: f64, u0: f64, z1: f64, z2: f64| -> [f64; 2] {
        let g_mid = gamma * (x0 + b * u0);
        [
            x0 - a1 * g_mid + (b * a1 + a2) * u0 + z1,
            (a3 + b * a2 - 1.0) * u0 - a2 * g_mid + z2,
        ]
    };
    let factor = factor_cov2(sc.noise_cov())?;
    let col_x = step(1.0, 0.0, 0.0, 0.0);
    let col_u = step(0.0, 1.0, 0.0, 0.0);
    let n1 = step(0.0, 0.0, factor.f11, factor.f21);
    let n2 = step(0.0, 0.0, 0.0, factor.f22);
    Ok(LinearKernel {
        m: [[col_x[0], col_u[0]], [col_x[1], col_u[1]]],
        s: [
            [n1[0] * n1[0] + n2[0] * n2[0], n1[0] * n1[1] + n2[0] * n2[1]],
            [n1[0] * n1[1] + n2[0] * n2[1], n1[1] * n1[1] + n2[1] * n2[1]],
        ],
    })
}

/// Comparison of the modified integrator against its matched (shifted-)HAMS
/// linearization, plus the order diagnostics.
#[derive(Debug, Clone)]
pub struct MatchReport {
    pub kind: IntegratorKind,
    pub variant: Variant,
    pub epsilon: f64,
    pub eta: f64,
    pub gamma: f64,
    /// Max abs difference of the drift matrices.
    pub drift_diff: f64,
    /// Max abs difference of the noise covariances.
    pub cov_diff: f64,
    /// Plain matches: |matched phi - default phi|; shifted matches:
    /// |b - eps/2|.
    pub phi_diff: f64,
    /// Halving diagnostic for the match defect: the relevant gap at `eps`
    /// over the gap at `eps/2` (phi gap for GJF/BAOAB/IL, covariance gap for
    /// VEC and the shifted kinds). `None` for BP, which matches exactly.
    pub order_ratio: Option<f64>,
}

fn phi_gap(kind: IntegratorKind, epsilon: f64, eta: f64) -> Result<f64> {
    let c = hams_coeffs_for(kind, epsilon, eta)?;
    Ok((c.phi - default_phi(c.a1, c.a2)?).abs())
}

fn cov_gap(kind: IntegratorKind, epsilon: f64, eta: f64, gamma: f64) -> Result<f64> {
    let lhs = linearize(kind, Variant::Modified, epsilon, eta, gamma)?;
    let rhs = match kind {
        IntegratorKind::Aboba | IntegratorKind::Spv | IntegratorKind::Mannella => {
            shifted_linearize(&shifted_coeffs_for(kind, epsilon, eta)?, gamma)?
        }
        _ => hams_linearize(&hams_coeffs_for(kind, epsilon, eta)?, gamma)?,
    };
    Ok(lhs.cov_diff(&rhs))
}

/// Builds the matched comparator for `kind` and reports the differences at
/// `(epsilon, eta, gamma)` together with the halving order diagnostic.
pub fn verify_match(
    kind: IntegratorKind,
    epsilon: f64,
    eta: f64,
    gamma: f64,
) -> Result<MatchReport> {
    let lhs = linearize(kind, Variant::Modified, epsilon, eta, gamma)?;
    let (rhs, phi_diff) = match kind {
        IntegratorKind::Aboba | IntegratorKind::Spv | IntegratorKind::Mannella => {
            let sc = shifted_coeffs_for(kind, epsilon, eta)?;
            (shifted_linearize(&sc, gamma)?, (sc.b - epsilon / 2.0).abs())
        }
        _ => {
            let c = hams_coeffs_for(kind, epsilon, eta)?;
            (
                hams_linearize(&c, gamma)?,
                (c.phi - default_phi(c.a1, c.a2)?).abs(),
            )
        }
    };
    let order_ratio = match kind {
        IntegratorKind::Bp => None,
        IntegratorKind::Gjf | IntegratorKind::Baoab | IntegratorKind::Il => {
            Some(phi_gap(kind, epsilon, eta)? / phi_gap(kind, epsilon / 2.0, eta)?)
        }
        _ => Some(cov_gap(kind, epsilon, eta, gamma)? / cov_gap(kind, epsilon / 2.0, eta, gamma)?),
    };
    Ok(MatchReport {
        kind,
        variant: Variant::Modified,
        epsilon,
        eta,
        gamma,
        drift_diff: lhs.drift_diff(&rhs),
        cov_diff: lhs.cov_diff(&rhs),
        phi_diff,
        order_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::var_kernel;
    use crate::hams::{hams_a_coeffs, ChainState, HamsKernel, PhaseState};
    use crate::linalg::NoisePair;
    use crate::targets::GaussianTarget;

    #[test]
    fn gjf_matched_coefficients() {
        let c = hams_coeffs_for(IntegratorKind::Gjf, 0.6, 1.0).unwrap();
        assert!((c.a1 - 0.138462).abs() < 1e-6);
        assert!((c.a2 - 0.440280).abs() < 1e-6);
        assert!((c.a3 - 1.4).abs() < 1e-12);
        assert!((c.phi - 0.314486).abs() < 1e-6);
        assert!((c.a1 * c.a3 - 0.193846).abs() < 1e-6);
        assert!((c.a1 * c.a3 - c.a2 * c.a2).abs() < 1e-12);
    }

    #[test]
    fn bp_matched_coefficients_use_default_phi() {
        let c = hams_coeffs_for(IntegratorKind::Bp, 0.6, 1.0).unwrap();
        assert!((c.a1 - 0.2).abs() < 1e-12);
        assert!((c.a2 - 0.444491).abs() < 1e-6);
        assert!((c.a3 - 1.439050).abs() < 1e-6);
        assert!((c.phi - 0.246939).abs() < 1e-6);
        assert!((c.phi - default_phi(c.a1, c.a2).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn baoab_matched_a1() {
        let c = hams_coeffs_for(IntegratorKind::Baoab, 0.6, 1.0).unwrap();
        assert!((c.a1 - 0.139393).abs() < 1e-6);
    }

    #[test]
    fn baoab_and_il_identical() {
        for (eps, eta) in [(0.1, 0.5), (0.3, 1.0), (0.6, 2.0)] {
            let a = hams_coeffs_for(IntegratorKind::Baoab, eps, eta).unwrap();
            let b = hams_coeffs_for(IntegratorKind::Il, eps, eta).unwrap();
            assert!((a.a1 - b.a1).abs() < 1e-12);
            assert!((a.a2 - b.a2).abs() < 1e-12);
            assert!((a.a3 - b.a3).abs() < 1e-12);
            assert!((a.phi - b.phi).abs() < 1e-12);
        }
    }

    #[test]
    fn single_noise_structure_over_grid() {
        for kind in [IntegratorKind::Gjf, IntegratorKind::Baoab, IntegratorKind::Il] {
            for &eps in &[0.1, 0.3, 0.6] {
                for &eta in &[0.5, 1.0, 2.0] {
                    let c = hams_coeffs_for(kind, eps, eta).unwrap();
                    assert!(
                        (c.a1 * c.a3 - c.a2 * c.a2).abs() < 1e-9,
                        "{} eps={eps} eta={eta}",
                        kind.name()
                    );
                }
            }
        }
    }

    #[test]
    fn shifted_coefficients() {
        let sc = shifted_coeffs_for(IntegratorKind::Aboba, 0.6, 1.0).unwrap();
        assert!((sc.b - 1.0 / 3.0).abs() < 1e-14);

        let sc = shifted_coeffs_for(IntegratorKind::Spv, 0.01, 1.0).unwrap();
        assert!((sc.b - 0.005).abs() < 1e-6);

        let sc = shifted_coeffs_for(IntegratorKind::Mannella, 0.6, 1.0).unwrap();
        assert!((sc.a1 - 2.0 / 13.0).abs() < 1e-9);
        // b = a1/a2 for all three midpoint matches.
        for kind in [IntegratorKind::Aboba, IntegratorKind::Spv, IntegratorKind::Mannella] {
            let sc = shifted_coeffs_for(kind, 0.3, 0.7).unwrap();
            assert!((sc.b - sc.a1 / sc.a2).abs() < 1e-12, "{}", kind.name());
        }
    }

    #[test]
    fn leading_term_expansions() {
        // a1 = eps^2/2 (1 - eta eps/2) + O(eps^4) for the single-noise
        // matches; BP and VEC agree through eps^2.
        let eta = 1.0;
        for kind in [IntegratorKind::Gjf, IntegratorKind::Baoab, IntegratorKind::Il] {
            for &eps in &[0.05, 0.025] {
                let c = hams_coeffs_for(kind, eps, eta).unwrap();
                let lead = eps * eps * (1.0 - eta * eps / 2.0) / 2.0;
                let scaled = (c.a1 - lead) / eps.powi(4);
                assert!(scaled.abs() < 5.0, "{} eps={eps}: {scaled}", kind.name());
            }
        }
        for kind in [IntegratorKind::Bp, IntegratorKind::Vec] {
            for &eps in &[0.05, 0.025] {
                let c = hams_coeffs_for(kind, eps, eta).unwrap();
                let scaled = (c.a1 - eps * eps / 2.0) / eps.powi(3);
                assert!(scaled.abs() < 5.0, "{} eps={eps}: {scaled}", kind.name());
            }
        }
    }

    #[test]
    fn formula_probe_agrees_with_var_coefficients() {
        // Two algebraic routes to the same linearization.
        let cases = [
            HamsCoeffs::with_default_phi(0.3, 0.4, 1.5).unwrap(),
            hams_a_coeffs(0.5, 1.0).unwrap(),
            HamsCoeffs::new(0.5, 0.4, 1.3, 0.37).unwrap(),
        ];
        for coeffs in cases {
            for gamma in [0.7, 1.0, 2.0] {
                let a = hams_linearize(&coeffs, gamma).unwrap();
                let b = var_kernel(&coeffs, gamma);
                assert!(a.drift_diff(&b) < 1e-13, "{coeffs:?} gamma={gamma}");
                assert!(a.cov_diff(&b) < 1e-13);
            }
        }
    }

    #[test]
    fn kernel_probe_agrees_with_formula_probe() {
        // The production kernel, probed with unit states and unit noise,
        // reproduces the transcribed update map.
        let coeffs = HamsCoeffs::with_default_phi(0.3, 0.4, 1.5).unwrap();
        let gamma = 1.6;
        let target = GaussianTarget::new(gamma, 1).unwrap();
        let kernel = HamsKernel::new(coeffs).unwrap();
        let probe = |x: f64, u: f64, z1: f64, z2: f64| -> [f64; 2] {
            let st = ChainState::new(&target, PhaseState::new(vec![x], vec![u]).unwrap()).unwrap();
            let z = NoisePair { z1: vec![z1], z2: vec![z2] };
            let out = kernel.propose_with_noise(&target, &st, &z).unwrap();
            [out.proposed.x[0], out.proposed.u[0]]
        };
        let factor = factor_cov2(coeffs.noise_cov()).unwrap();
        let col_x = probe(1.0, 0.0, 0.0, 0.0);
        let col_u = probe(0.0, 1.0, 0.0, 0.0);
        let n1 = probe(0.0, 0.0, factor.f11, factor.f21);
        let n2 = probe(0.0, 0.0, 0.0, factor.f22);
        let reference = hams_linearize(&coeffs, gamma).unwrap();
        assert!((col_x[0] - reference.m[0][0]).abs() < 1e-13);
        assert!((col_x[1] - reference.m[1][0]).abs() < 1e-13);
        assert!((col_u[0] - reference.m[0][1]).abs() < 1e-13);
        assert!((col_u[1] - reference.m[1][1]).abs() < 1e-13);
        let s00 = n1[0] * n1[0] + n2[0] * n2[0];
        assert!((s00 - reference.s[0][0]).abs() < 1e-13);
    }

    #[test]
    fn shifted_gaussian_process_is_shift_invariant() {
        // Under gamma = 1 the shifted linearization does not depend on b.
        let base = shifted_linearize(
            &ShiftedHamsCoeffs::new(0.2, 0.5, 1.5, 0.0).unwrap(),
            1.0,
        )
        .unwrap();
        for b in [0.1, 0.3, 0.7] {
            let k = shifted_linearize(
                &ShiftedHamsCoeffs::new(0.2, 0.5, 1.5, b).unwrap(),
                1.0,
            )
            .unwrap();
            assert!(base.drift_diff(&k) < 1e-14, "b={b}");
            assert!(base.cov_diff(&k) < 1e-14);
        }
    }

    #[test]
    fn bp_match_is_exact() {
        let r = verify_match(IntegratorKind::Bp, 0.3, 1.0, 1.5).unwrap();
        assert!(r.drift_diff <= 1e-12, "drift {}", r.drift_diff);
        assert!(r.cov_diff <= 1e-12, "cov {}", r.cov_diff);
        assert!(r.phi_diff < 1e-14);
        assert!(r.order_ratio.is_none());
    }

    #[test]
    fn single_noise_matches_are_exact_with_matched_phi() {
        for kind in [IntegratorKind::Gjf, IntegratorKind::Baoab, IntegratorKind::Il] {
            let r = verify_match(kind, 0.3, 1.0, 1.5).unwrap();
            assert!(r.drift_diff <= 1e-12, "{} drift {}", kind.name(), r.drift_diff);
            assert!(r.cov_diff <= 1e-12, "{} cov {}", kind.name(), r.cov_diff);
            // phi gap shrinks like eps^2.
            let ratio = r.order_ratio.unwrap();
            assert!((3.0..=5.0).contains(&ratio), "{}: {ratio}", kind.name());
        }
    }

    #[test]
    fn midpoint_matches_have_cubic_noise_defect() {
        for kind in [IntegratorKind::Aboba, IntegratorKind::Spv, IntegratorKind::Mannella] {
            let r = verify_match(kind, 0.2, 1.0, 1.0).unwrap();
            assert!(r.drift_diff <= 1e-12, "{} drift {}", kind.name(), r.drift_diff);
            let ratio = r.order_ratio.unwrap();
            assert!((6.0..=11.0).contains(&ratio), "{}: ratio {ratio}", kind.name());
            // b - eps/2 is O(eps^3) as well.
            let b1 = (shifted_coeffs_for(kind, 0.2, 1.0).unwrap().b - 0.1).abs();
            let b2 = (shifted_coeffs_for(kind, 0.1, 1.0).unwrap().b - 0.05).abs();
            let bratio = b1 / b2;
            assert!((6.0..=11.0).contains(&bratio), "{}: b ratio {bratio}", kind.name());
        }
    }

    #[test]
    fn vec_match_has_cubic_noise_defect() {
        let r = verify_match(IntegratorKind::Vec, 0.2, 1.0, 1.0).unwrap();
        assert!(r.drift_diff <= 1e-12, "drift {}", r.drift_diff);
        let ratio = r.order_ratio.unwrap();
        assert!((6.0..=11.0).contains(&ratio), "vec cov ratio {ratio}");
        // phi gap O(eps^2).
        let p1 = phi_gap(IntegratorKind::Vec, 0.2, 1.0).unwrap();
        let p2 = phi_gap(IntegratorKind::Vec, 0.1, 1.0).unwrap();
        assert!((3.0..=5.0).contains(&(p1 / p2)), "vec phi ratio {}", p1 / p2);
    }
}
