//! One-step (un-Metropolized) underdamped-Langevin integrators, in their raw
//! published forms and in the rescaled/modified forms that embed into the
//! HAMS family, plus exact linearizations under an isotropic Gaussian target.
//!
//! All steps expose the full-step state `(x, u)`. The impulsive leapfrog (IL)
//! keeps its half-step momentum as an internal representation only: the
//! public state is converted through
//! `u = 2 (u_half - (eps/2) grad) / sqrt(4 - eps^2)` on the way in and out,
//! which makes IL coincide with rescaled BAOAB; its raw/modified variants are
//! therefore the same update.

use crate::hams::PhaseState;
use crate::rng::RngStream;
use crate::targets::TargetModel;
use crate::{Error, Result};

/// The integrators covered by the coefficient-matching maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IntegratorKind {
    Gjf,
    Baoab,
    Aboba,
    Il,
    Bp,
    Vec,
    Spv,
    Mannella,
}

impl IntegratorKind {
    pub const ALL: [IntegratorKind; 8] = [
        IntegratorKind::Gjf,
        IntegratorKind::Baoab,
        IntegratorKind::Aboba,
        IntegratorKind::Il,
        IntegratorKind::Bp,
        IntegratorKind::Vec,
        IntegratorKind::Spv,
        IntegratorKind::Mannella,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            IntegratorKind::Gjf => "gjf",
            IntegratorKind::Baoab => "baoab",
            IntegratorKind::Aboba => "aboba",
            IntegratorKind::Il => "il",
            IntegratorKind::Bp => "bp",
            IntegratorKind::Vec => "vec",
            IntegratorKind::Spv => "spv",
            IntegratorKind::Mannella => "mannella",
        }
    }

    /// Independent standard normals consumed per coordinate and step.
    pub fn noise_count(&self) -> usize {
        match self {
            IntegratorKind::Bp | IntegratorKind::Vec => 2,
            _ => 1,
        }
    }
}

/// Raw published update vs the rescaled/modified form used for matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Raw,
    Modified,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Raw => "raw",
            Variant::Modified => "modified",
        }
    }
}

/// Exact one-step linearization under `grad U(x) = gamma x`: drift matrix `M`
/// and per-coordinate noise covariance `S` of `(x*, u*)` given `(x0, u0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearKernel {
    pub m: [[f64; 2]; 2],
    pub s: [[f64; 2]; 2],
}

impl LinearKernel {
    pub fn drift_diff(&self, other: &LinearKernel) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((self.m[i][j] - other.m[i][j]).abs());
            }
        }
        worst
    }

    pub fn cov_diff(&self, other: &LinearKernel) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((self.s[i][j] - other.s[i][j]).abs());
            }
        }
        worst
    }
}

fn check_params(kind: IntegratorKind, variant: Variant, epsilon: f64, eta: f64) -> Result<()> {
    if !(epsilon > 0.0) || eta < 0.0 {
        return Err(Error::InvalidParams(format!(
            "integrator needs epsilon > 0 and eta >= 0, got ({epsilon}, {eta})"
        )));
    }
    let needs_unit_root = matches!(
        (kind, variant),
        (IntegratorKind::Bp, Variant::Modified)
            | (IntegratorKind::Aboba, Variant::Modified)
            | (IntegratorKind::Spv, Variant::Modified)
            | (IntegratorKind::Mannella, Variant::Modified)
    );
    if needs_unit_root && epsilon >= 1.0 {
        return Err(Error::InvalidParams(format!(
            "modified {} needs epsilon < 1, got {epsilon}",
            kind.name()
        )));
    }
    // The rescalings by sqrt(4 - eps^2) and IL's momentum conversion cap the
    // step at 2.
    if epsilon >= 2.0 {
        return Err(Error::InvalidParams(format!("epsilon must be below 2, got {epsilon}")));
    }
    Ok(())
}

/// `(1 - e^{-eta eps})/eta`, with the `eta -> 0` limit `eps`.
fn spv_kick(epsilon: f64, eta: f64) -> f64 {
    if eta == 0.0 {
        epsilon
    } else {
        (1.0 - (-eta * epsilon).exp()) / eta
    }
}

/// Shift coefficient for modified SPV; the guarded radicand is clamped at
/// zero and rejected below -1e-12.
pub fn spv_shift(epsilon: f64, eta: f64) -> Result<f64> {
    let c = (-eta * epsilon).exp();
    let kick = spv_kick(epsilon, eta);
    let radicand = (1.0 + c) * (1.0 + c) - 4.0 * kick * kick;
    if radicand < -1e-12 {
        return Err(Error::InvalidParams(format!(
            "spv shift radicand negative: {radicand}"
        )));
    }
    Ok(2.0 * kick / (1.0 + c + radicand.max(0.0).sqrt()))
}

/// One integrator step driven by explicit standard normals (`w2` only for the
/// two-noise kinds). The stochastic step and the linearization probes both
/// route through here.
pub fn integrator_step_with_noise<M: TargetModel + ?Sized>(
    kind: IntegratorKind,
    variant: Variant,
    target: &M,
    state: &PhaseState,
    epsilon: f64,
    eta: f64,
    w1: &[f64],
    w2: Option<&[f64]>,
) -> Result<PhaseState> {
    check_params(kind, variant, epsilon, eta)?;
    let k = state.dim();
    let (x0, u0) = (&state.x, &state.u);
    let eps = epsilon;
    let mut g0 = vec![0.0; k];
    let mut x_star = vec![0.0; k];
    let mut u_star = vec![0.0; k];

    match (kind, variant) {
        (IntegratorKind::Gjf, variant) => {
            target.gradient(x0, &mut g0)?;
            let denom = 2.0 + eta * eps;
            let sigma = (2.0 * eta * eps).sqrt();
            let rescale = match variant {
                Variant::Raw => 2.0,
                Variant::Modified => (4.0 - eps * eps).sqrt(),
            };
            for i in 0..k {
                let w = sigma * w1[i];
                x_star[i] = x0[i] - eps * eps / denom * g0[i] + eps * rescale / denom * u0[i]
                    + eps / denom * w;
            }
            let mut g_star = vec![0.0; k];
            target.gradient(&x_star, &mut g_star)?;
            for i in 0..k {
                let w = sigma * w1[i];
                u_star[i] = (2.0 - eta * eps) / denom * u0[i]
                    + (eta * eps * eps - 2.0 * eps) / (rescale * denom) * g0[i]
                    - eps / rescale * g_star[i]
                    + 4.0 / (rescale * denom) * w;
            }
        }
        (IntegratorKind::Baoab, Variant::Raw) => {
            target.gradient(x0, &mut g0)?;
            let c = (-eta * eps).exp();
            let noise = (1.0 - c * c).max(0.0).sqrt();
            for i in 0..k {
                let u_half = u0[i] - 0.5 * eps * g0[i];
                let x_mid = x0[i] + 0.5 * eps * u_half;
                let u_mixed = c * u_half + noise * w1[i];
                x_star[i] = x_mid + 0.5 * eps * u_mixed;
                u_star[i] = u_mixed; // final kick applied after g*
            }
            let mut g_star = vec![0.0; k];
            target.gradient(&x_star, &mut g_star)?;
            for i in 0..k {
                u_star[i] -= 0.5 * eps * g_star[i];
            }
        }
        (IntegratorKind::Baoab, Variant::Modified) => {
            target.gradient(x0, &mut g0)?;
            let c = (-eta * eps).exp();
            let r = (4.0 - eps * eps).sqrt();
            let noise = (1.0 - c * c).max(0.0).sqrt();
            for i in 0..k {
                x_star[i] = x0[i] - eps * eps / 4.0 * (1.0 + c) * g0[i]
                    + eps * r / 4.0 * (1.0 + c) * u0[i]
                    + 0.5 * eps * noise * w1[i];
            }
            let mut g_star = vec![0.0; k];
            target.gradient(&x_star, &mut g_star)?;
            for i in 0..k {
                u_star[i] = c * u0[i] - eps * c / r * g0[i] - eps / r * g_star[i]
                    + 2.0 * noise / r * w1[i];
            }
        }
        (IntegratorKind::Il, _) => {
            // Half-step representation internally, full-step state outside.
            target.gradient(x0, &mut g0)?;
            let ct = 1.0 - (-eta * eps).exp();
            let r = (4.0 - eps * eps).sqrt();
            let noise = (ct * (2.0 - ct)).max(0.0).sqrt();
            let mut u_half_next = vec![0.0; k];
            for i in 0..k {
                let u_half = 0.5 * r * u0[i] + 0.5 * eps * g0[i];
                let u_kicked = u_half - eps * g0[i];
                let u_mixed = -ct * u_kicked + noise * w1[i];
                x_star[i] = x0[i] + eps * (u_kicked + 0.5 * u_mixed);
                u_half_next[i] = u_kicked + u_mixed;
            }
            let mut g_star = vec![0.0; k];
            target.gradient(&x_star, &mut g_star)?;
            for i in 0..k {
                u_star[i] = 2.0 * (u_half_next[i] - 0.5 * eps * g_star[i]) / r;
            }
        }
        (IntegratorKind::Bp, variant) => {
            target.gradient(x0, &mut g0)?;
            let c = (-eta * eps).exp();
            let carry = c.sqrt();
            let noise = (1.0 - c).max(0.0).sqrt();
            let kick = match variant {
                Variant::Raw => 0.5 * eps,
                Variant::Modified => eps / (1.0 + (1.0 - eps * eps).sqrt()),
            };
            let w2 = w2.expect("bp needs two noise vectors");
            let mut u_minus = vec![0.0; k];
            for i in 0..k {
                let u_plus = carry * u0[i] + noise * w1[i];
                let u_kicked = u_plus - kick * g0[i];
                x_star[i] = x0[i] + eps * u_kicked;
                u_minus[i] = u_kicked;
            }
            let mut g_star = vec![0.0; k];
            target.gradient(&x_star, &mut g_star)?;
            for i in 0..k {
                u_minus[i] -= kick * g_star[i];
                u_star[i] = carry * u_minus[i] + noise * w2[i];
            }
        }
        (IntegratorKind::Vec, variant) => {
            target.gradient(x0, &mut g0)?;
            let w2 = w2.expect("vec needs two noise vectors");
            let s1x = (2.0 * eta).sqrt() * eps.powf(1.5) / 2.0;
            let s2x = (6.0 * eta).sqrt() * eps.powf(1.5) / 6.0;
            let g0_coef = match variant {
                Variant::Raw => 0.5 * (eta * eps * eps - eps),
                Variant::Modified => 0.5 * (eta * eps * eps - eps) - 0.25 * eps.powi(3),
            };
            for i in 0..k {
                x_star[i] = x0[i] - 0.5 * eps * eps * g0[i]
                    + 0.5 * (2.0 * eps - eta * eps * eps) * u0[i]
                    + s1x * w1[i]
                    + s2x * w2[i];
            }
            let mut g_star = vec![0.0; k];
            target.gradient(&x_star, &mut g_star)?;
            let s1u = 0.5 * (2.0 * eta * eps).sqrt() * (2.0 - eta * eps);
            let s2u = 6.0f64.sqrt() / 6.0 * (eta * eps).powf(1.5);
            for i in 0..k {
                u_star[i] = (1.0 - eta * eps + 0.5 * eta * eta * eps * eps) * u0[i]
                    + g0_coef * g0[i]
                    - 0.5 * eps * g_star[i]
                    + s1u * w1[i]
                    - s2u * w2[i];
            }
        }
        (IntegratorKind::Aboba, variant) => {
            let shift = match variant {
                Variant::Raw => 0.5 * eps,
                Variant::Modified => eps / (1.0 + (1.0 - eps * eps).sqrt()),
            };
            let c = (-eta * eps).exp();
            let noise = (1.0 - c * c).max(0.0).sqrt();
            let mut x_mid = vec![0.0; k];
            for i in 0..k {
                x_mid[i] = x0[i] + shift * u0[i];
            }
            let mut g_mid = vec![0.0; k];
            target.gradient(&x_mid, &mut g_mid)?;
            for i in 0..k {
                let u_half = u0[i] - 0.5 * eps * g_mid[i];
                let u_mixed = c * u_half + noise * w1[i];
                u_star[i] = u_mixed - 0.5 * eps * g_mid[i];
                x_star[i] = x_mid[i] + shift * u_star[i];
            }
        }
        (IntegratorKind::Spv, variant) => {
            let shift = match variant {
                Variant::Raw => 0.5 * eps,
                Variant::Modified => spv_shift(eps, eta)?,
            };
            let c = (-eta * eps).exp();
            let kick = spv_kick(eps, eta);
            let noise = (1.0 - c * c).max(0.0).sqrt();
            let mut x_mid = vec![0.0; k];
            for i in 0..k {
                x_mid[i] = x0[i] + shift * u0[i];
            }
            let mut g_mid = vec![0.0; k];
            target.gradient(&x_mid, &mut g_mid)?;
            for i in 0..k {
                u_star[i] = c * u0[i] - kick * g_mid[i] + noise * w1[i];
                x_star[i] = x_mid[i] + shift * u_star[i];
            }
        }
        (IntegratorKind::Mannella, variant) => {
            let shift = match variant {
                Variant::Raw => 0.5 * eps,
                Variant::Modified => eps / (1.0 + (1.0 - eps * eps).sqrt()),
            };
            let c1 = 0.5 * (2.0 - eta * eps);
            let c2 = 2.0 / (2.0 + eta * eps);
            let sigma = (2.0 * eta).sqrt() * eps.sqrt();
            let mut x_mid = vec![0.0; k];
            for i in 0..k {
                x_mid[i] = x0[i] + shift * u0[i];
            }
            let mut g_mid = vec![0.0; k];
            target.gradient(&x_mid, &mut g_mid)?;
            for i in 0..k {
                u_star[i] = c2 * (c1 * u0[i] - eps * g_mid[i] + sigma * w1[i]);
                x_star[i] = x_mid[i] + shift * u_star[i];
            }
        }
    }

    Ok(PhaseState { x: x_star, u: u_star })
}

/// One stochastic integrator step.
pub fn integrator_step<M: TargetModel + ?Sized>(
    kind: IntegratorKind,
    variant: Variant,
    target: &M,
    state: &PhaseState,
    epsilon: f64,
    eta: f64,
    rng: &mut RngStream,
) -> Result<PhaseState> {
    let k = state.dim();
    let mut w1 = vec![0.0; k];
    rng.fill_normal(&mut w1);
    let w2 = if kind.noise_count() == 2 {
        let mut w = vec![0.0; k];
        rng.fill_normal(&mut w);
        Some(w)
    } else {
        None
    };
    integrator_step_with_noise(kind, variant, target, state, epsilon, eta, &w1, w2.as_deref())
}

/// Exact linearization of one integrator step under `grad U(x) = gamma x`,
/// obtained by probing the affine update with unit states and unit noises.
pub fn linearize(
    kind: IntegratorKind,
    variant: Variant,
    epsilon: f64,
    eta: f64,
    gamma: f64,
) -> Result<LinearKernel> {
    if gamma <= 0.0 {
        return Err(Error::InvalidParams(format!("gamma must be positive, got {gamma}")));
    }
    let target = crate::targets::GaussianTarget::new(gamma, 1)?;
    let probe = |x: f64, u: f64, w1: f64, w2: f64| -> Result<[f64; 2]> {
        let state = PhaseState { x: vec![x], u: vec![u] };
        let w2_slice = [w2];
        let out = integrator_step_with_noise(
            kind,
            variant,
            &target,
            &state,
            epsilon,
            eta,
            &[w1],
            if kind.noise_count() == 2 { Some(&w2_slice) } else { None },
        )?;
        Ok([out.x[0], out.u[0]])
    };
    let col_x = probe(1.0, 0.0, 0.0, 0.0)?;
    let col_u = probe(0.0, 1.0, 0.0, 0.0)?;
    let n1 = probe(0.0, 0.0, 1.0, 0.0)?;
    let mut s = [
        [n1[0] * n1[0], n1[0] * n1[1]],
        [n1[0] * n1[1], n1[1] * n1[1]],
    ];
    if kind.noise_count() == 2 {
        let n2 = probe(0.0, 0.0, 0.0, 1.0)?;
        s[0][0] += n2[0] * n2[0];
        s[0][1] += n2[0] * n2[1];
        s[1][0] += n2[0] * n2[1];
        s[1][1] += n2[1] * n2[1];
    }
    Ok(LinearKernel {
        m: [[col_x[0], col_u[0]], [col_x[1], col_u[1]]],
        s,
    })
}
