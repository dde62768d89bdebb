//! Metropolis-adjusted BAOAB, ABOBA, and BP: the integrator proposals wrapped
//! in the generalized accept/reject step (momentum negated in the backward
//! proposal and on rejection), with closed-form acceptance exponents.
//!
//! Each kernel's `dG` is the change of `G = H + ||Z||^2 / 2` along the
//! forward map, where the backward noise `Z*` is reconstructed from the
//! momentum update; the closed forms below eliminate `Z` entirely:
//!
//! - BAOAB: `dU - [eps u*/2 + eps^2 g*/8]'g* - [eps u0/2 - eps^2 g0/8]'g0`
//! - ABOBA: `dU - (eps/2)(u* + u0)'g(x~)` with the midpoint `x~ = x0 + eps u0/2`
//! - BP:    `dU - (x* - x0)'(g* + g0)/2 + eps^2 (||g*||^2 - ||g0||^2)/8`

use crate::hams::PhaseState;
use crate::rng::RngStream;
use crate::targets::TargetModel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaKind {
    Baoab,
    Aboba,
    Bp,
}

impl MaKind {
    pub const ALL: [MaKind; 3] = [MaKind::Baoab, MaKind::Aboba, MaKind::Bp];

    pub fn name(&self) -> &'static str {
        match self {
            MaKind::Baoab => "ma-baoab",
            MaKind::Aboba => "ma-aboba",
            MaKind::Bp => "ma-bp",
        }
    }
}

/// One accept/reject outcome.
#[derive(Debug, Clone, Copy)]
pub struct MaStepOutcome {
    pub accepted: bool,
    pub delta_g: f64,
}

/// Chain state with the kernel's gradient cache: BAOAB/BP keep `grad U(x)`,
/// ABOBA keeps `grad U(x + eps u / 2)` (which must be refreshed on rejection
/// because the momentum flips).
#[derive(Debug, Clone)]
pub struct MaState {
    pub state: PhaseState,
    pub potential: f64,
    pub grad: Vec<f64>,
}

/// Metropolis-adjusted integrator kernel with momentum carryover
/// `c = e^{-eta eps}` (or any custom carryover in `[0, 1]`).
#[derive(Debug, Clone, Copy)]
pub struct MaKernel {
    pub kind: MaKind,
    pub epsilon: f64,
    pub c: f64,
}

impl MaKernel {
    pub fn from_eta(kind: MaKind, epsilon: f64, eta: f64) -> Result<Self> {
        if !(epsilon > 0.0) || eta < 0.0 {
            return Err(Error::InvalidParams(format!(
                "ma kernel needs eps > 0 and eta >= 0, got ({epsilon}, {eta})"
            )));
        }
        Ok(Self { kind, epsilon, c: (-eta * epsilon).exp() })
    }

    pub fn with_carryover(kind: MaKind, epsilon: f64, c: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !(0.0..=1.0).contains(&c) {
            return Err(Error::InvalidParams(format!(
                "ma kernel needs eps > 0 and carryover in [0, 1], got ({epsilon}, {c})"
            )));
        }
        Ok(Self { kind, epsilon, c })
    }

    fn midpoint(&self, state: &PhaseState) -> Vec<f64> {
        state
            .x
            .iter()
            .zip(&state.u)
            .map(|(&x, &u)| x + 0.5 * self.epsilon * u)
            .collect()
    }

    /// Builds the cached state for this kernel.
    pub fn init_state<M: TargetModel + ?Sized>(
        &self,
        target: &M,
        state: PhaseState,
    ) -> Result<MaState> {
        let mut grad = vec![0.0; state.dim()];
        let potential = match self.kind {
            MaKind::Baoab | MaKind::Bp => target.potential_and_gradient(&state.x, &mut grad)?,
            MaKind::Aboba => {
                let mid = self.midpoint(&state);
                target.gradient(&mid, &mut grad)?;
                target.potential(&state.x)?
            }
        };
        Ok(MaState { state, potential, grad })
    }

    /// One accept/reject step. The uniform draw is consumed first, then the
    /// noise; BP's second noise vector is drawn after the drift so the
    /// sequential structure of its update is preserved on the stream.
    pub fn step<M: TargetModel + ?Sized>(
        &self,
        target: &M,
        state: &mut MaState,
        rng: &mut RngStream,
    ) -> Result<MaStepOutcome> {
        let k = state.state.dim();
        let w = rng.uniform();
        let eps = self.epsilon;
        let c = self.c;

        match self.kind {
            MaKind::Baoab => {
                let mut z = vec![0.0; k];
                rng.fill_normal(&mut z);
                let nz = (1.0 - c * c).max(0.0).sqrt();
                let (x0, u0, g0) = (&state.state.x, &state.state.u, &state.grad);
                let mut x_star = vec![0.0; k];
                for i in 0..k {
                    x_star[i] = x0[i] - (1.0 + c) * eps * eps / 4.0 * g0[i]
                        + (1.0 + c) * 0.5 * eps * u0[i]
                        + 0.5 * eps * nz * z[i];
                }
                let mut g_star = vec![0.0; k];
                let pot_star = target.potential_and_gradient(&x_star, &mut g_star)?;
                let mut u_star = vec![0.0; k];
                let mut dg = pot_star - state.potential;
                for i in 0..k {
                    u_star[i] =
                        c * u0[i] - 0.5 * eps * c * g0[i] - 0.5 * eps * g_star[i] + nz * z[i];
                    dg -= (0.5 * eps * u_star[i] + eps * eps / 8.0 * g_star[i]) * g_star[i];
                    dg -= (0.5 * eps * u0[i] - eps * eps / 8.0 * g0[i]) * g0[i];
                }
                let accepted = w < (-dg).exp().min(1.0);
                if accepted {
                    state.state = PhaseState { x: x_star, u: u_star };
                    state.potential = pot_star;
                    state.grad = g_star;
                } else {
                    for v in state.state.u.iter_mut() {
                        *v = -*v;
                    }
                }
                Ok(MaStepOutcome { accepted, delta_g: dg })
            }
            MaKind::Aboba => {
                let mut z = vec![0.0; k];
                rng.fill_normal(&mut z);
                let nz = (1.0 - c * c).max(0.0).sqrt();
                let (x0, u0, g_mid) = (&state.state.x, &state.state.u, &state.grad);
                let mut x_star = vec![0.0; k];
                let mut u_star = vec![0.0; k];
                for i in 0..k {
                    x_star[i] = x0[i] - (1.0 + c) * eps * eps / 4.0 * g_mid[i]
                        + (1.0 + c) * 0.5 * eps * u0[i]
                        + 0.5 * eps * nz * z[i];
                    u_star[i] = c * u0[i] - (1.0 + c) * 0.5 * eps * g_mid[i] + nz * z[i];
                }
                let pot_star = target.potential(&x_star)?;
                let mut dg = pot_star - state.potential;
                for i in 0..k {
                    dg -= 0.5 * eps * (u_star[i] + u0[i]) * g_mid[i];
                }
                let accepted = w < (-dg).exp().min(1.0);
                if accepted {
                    state.state = PhaseState { x: x_star, u: u_star };
                    state.potential = pot_star;
                } else {
                    for v in state.state.u.iter_mut() {
                        *v = -*v;
                    }
                }
                // The midpoint moved either way (new state or flipped
                // momentum); refresh its gradient.
                let mid = self.midpoint(&state.state);
                target.gradient(&mid, &mut state.grad)?;
                Ok(MaStepOutcome { accepted, delta_g: dg })
            }
            MaKind::Bp => {
                let mut z1 = vec![0.0; k];
                rng.fill_normal(&mut z1);
                let carry = c.sqrt();
                let nz = (1.0 - c).max(0.0).sqrt();
                let (x0, u0, g0) = (&state.state.x, &state.state.u, &state.grad);
                let mut x_star = vec![0.0; k];
                let mut u_minus = vec![0.0; k];
                for i in 0..k {
                    let u_plus = carry * u0[i] + nz * z1[i];
                    let u_kicked = u_plus - 0.5 * eps * g0[i];
                    x_star[i] = x0[i] + eps * u_kicked;
                    u_minus[i] = u_kicked;
                }
                let mut g_star = vec![0.0; k];
                let pot_star = target.potential_and_gradient(&x_star, &mut g_star)?;
                let mut z2 = vec![0.0; k];
                rng.fill_normal(&mut z2);
                let mut u_star = vec![0.0; k];
                let mut dg = pot_star - state.potential;
                for i in 0..k {
                    u_minus[i] -= 0.5 * eps * g_star[i];
                    u_star[i] = carry * u_minus[i] + nz * z2[i];
                    dg -= 0.5 * (x_star[i] - x0[i]) * (g_star[i] + g0[i]);
                    dg += eps * eps / 8.0 * (g_star[i] * g_star[i] - g0[i] * g0[i]);
                }
                let accepted = w < (-dg).exp().min(1.0);
                if accepted {
                    state.state = PhaseState { x: x_star, u: u_star };
                    state.potential = pot_star;
                    state.grad = g_star;
                } else {
                    for v in state.state.u.iter_mut() {
                        *v = -*v;
                    }
                }
                Ok(MaStepOutcome { accepted, delta_g: dg })
            }
        }
    }
}

/// Runs one proposal from explicit standard normals and returns the closed
/// form `dG` next to the direct generalized-Hamiltonian difference
/// `H* - H0 + (||Z*||^2 - ||Z0||^2)/2`, with `Z*` reconstructed from the
/// momentum update. Requires strictly positive friction (the reconstruction
/// divides by `sqrt(1 - c^2)` or `sqrt(1 - c)`).
pub fn ma_delta_g_crosscheck<M: TargetModel + ?Sized>(
    kind: MaKind,
    target: &M,
    state0: &PhaseState,
    epsilon: f64,
    eta: f64,
    z1: &[f64],
    z2: &[f64],
) -> Result<(f64, f64)> {
    if eta <= 0.0 {
        return Err(Error::InvalidParams(
            "backward-noise reconstruction needs eta > 0".into(),
        ));
    }
    let k = state0.dim();
    let eps = epsilon;
    let c = (-eta * epsilon).exp();
    let (x0, u0) = (&state0.x, &state0.u);
    let kinetic = |u: &[f64]| 0.5 * u.iter().map(|v| v * v).sum::<f64>();
    let norm2 = |z: &[f64]| z.iter().map(|v| v * v).sum::<f64>();
    let pot0 = target.potential(x0)?;

    match kind {
        MaKind::Baoab => {
            let mut g0 = vec![0.0; k];
            target.gradient(x0, &mut g0)?;
            let nz = (1.0 - c * c).sqrt();
            let mut x_star = vec![0.0; k];
            for i in 0..k {
                x_star[i] = x0[i] - (1.0 + c) * eps * eps / 4.0 * g0[i]
                    + (1.0 + c) * 0.5 * eps * u0[i]
                    + 0.5 * eps * nz * z1[i];
            }
            let mut g_star = vec![0.0; k];
            let pot_star = target.potential_and_gradient(&x_star, &mut g_star)?;
            let mut u_star = vec![0.0; k];
            let mut z_back = vec![0.0; k];
            let mut closed = pot_star - pot0;
            for i in 0..k {
                u_star[i] = c * u0[i] - 0.5 * eps * c * g0[i] - 0.5 * eps * g_star[i] + nz * z1[i];
                z_back[i] = -(c * u_star[i] - u0[i]
                    + 0.5 * eps * g0[i]
                    + 0.5 * eps * c * g_star[i])
                    / nz;
                closed -= (0.5 * eps * u_star[i] + eps * eps / 8.0 * g_star[i]) * g_star[i];
                closed -= (0.5 * eps * u0[i] - eps * eps / 8.0 * g0[i]) * g0[i];
            }
            let direct = pot_star - pot0 + kinetic(&u_star) - kinetic(u0)
                + 0.5 * (norm2(&z_back) - norm2(z1));
            Ok((closed, direct))
        }
        MaKind::Aboba => {
            let mid: Vec<f64> = x0
                .iter()
                .zip(u0)
                .map(|(&x, &u)| x + 0.5 * eps * u)
                .collect();
            let mut g_mid = vec![0.0; k];
            target.gradient(&mid, &mut g_mid)?;
            let nz = (1.0 - c * c).sqrt();
            let mut x_star = vec![0.0; k];
            let mut u_star = vec![0.0; k];
            for i in 0..k {
                x_star[i] = x0[i] - (1.0 + c) * eps * eps / 4.0 * g_mid[i]
                    + (1.0 + c) * 0.5 * eps * u0[i]
                    + 0.5 * eps * nz * z1[i];
                u_star[i] = c * u0[i] - (1.0 + c) * 0.5 * eps * g_mid[i] + nz * z1[i];
            }
            let pot_star = target.potential(&x_star)?;
            let mut closed = pot_star - pot0;
            let mut z_back = vec![0.0; k];
            for i in 0..k {
                closed -= 0.5 * eps * (u_star[i] + u0[i]) * g_mid[i];
                z_back[i] =
                    -(c * u_star[i] - u0[i] + (1.0 + c) * 0.5 * eps * g_mid[i]) / nz;
            }
            let direct = pot_star - pot0 + kinetic(&u_star) - kinetic(u0)
                + 0.5 * (norm2(&z_back) - norm2(z1));
            Ok((closed, direct))
        }
        MaKind::Bp => {
            let mut g0 = vec![0.0; k];
            target.gradient(x0, &mut g0)?;
            let carry = c.sqrt();
            let nz = (1.0 - c).sqrt();
            let mut x_star = vec![0.0; k];
            let mut u_minus = vec![0.0; k];
            for i in 0..k {
                let u_plus = carry * u0[i] + nz * z1[i];
                let u_kicked = u_plus - 0.5 * eps * g0[i];
                x_star[i] = x0[i] + eps * u_kicked;
                u_minus[i] = u_kicked;
            }
            let mut g_star = vec![0.0; k];
            let pot_star = target.potential_and_gradient(&x_star, &mut g_star)?;
            let mut u_star = vec![0.0; k];
            let mut closed = pot_star - pot0;
            let mut zb1 = vec![0.0; k];
            let mut zb2 = vec![0.0; k];
            for i in 0..k {
                u_minus[i] -= 0.5 * eps * g_star[i];
                u_star[i] = carry * u_minus[i] + nz * z2[i];
                closed -= 0.5 * (x_star[i] - x0[i]) * (g_star[i] + g0[i]);
                closed += eps * eps / 8.0 * (g_star[i] * g_star[i] - g0[i] * g0[i]);
                zb1[i] = -((x0[i] - x_star[i]) / eps + 0.5 * eps * g_star[i] + carry * u_star[i])
                    / nz;
                // Second backward component, read off the reversed momentum
                // update; this is the unique choice that closes the
                // involution (x*, -u*) -> (x0, -u0).
                zb2[i] = (u0[i]
                    - c * u_star[i]
                    - 0.5 * eps * carry * (g_star[i] + g0[i])
                    - carry * nz * zb1[i])
                    / nz;
            }
            let direct = pot_star - pot0 + kinetic(&u_star) - kinetic(u0)
                + 0.5 * (norm2(&zb1) + norm2(&zb2) - norm2(z1) - norm2(z2));
            Ok((closed, direct))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{expected_acceptance_ma, expected_delta_g_ma};
    use crate::targets::{DoubleWellTarget, GaussianTarget};

    #[test]
    fn closed_form_matches_reconstruction_on_double_well() {
        let target = DoubleWellTarget::default();
        let mut rng = RngStream::new(19, 0);
        for kind in MaKind::ALL {
            let mut worst = 0.0f64;
            for _ in 0..100 {
                let state = PhaseState::new(vec![rng.normal()], vec![rng.normal()]).unwrap();
                let (closed, direct) = ma_delta_g_crosscheck(
                    kind,
                    &target,
                    &state,
                    0.3,
                    1.0,
                    &[rng.normal()],
                    &[rng.normal()],
                )
                .unwrap();
                let scale = direct.abs().max(1.0);
                worst = worst.max((closed - direct).abs() / scale);
            }
            assert!(worst < 1e-9, "{}: worst {worst}", kind.name());
        }
    }

    #[test]
    fn crosscheck_rejects_zero_friction() {
        let target = DoubleWellTarget::default();
        let state = PhaseState::new(vec![0.0], vec![0.0]).unwrap();
        assert!(ma_delta_g_crosscheck(MaKind::Baoab, &target, &state, 0.3, 0.0, &[0.0], &[0.0])
            .is_err());
    }

    #[test]
    fn delta_g_vanishes_with_step_size() {
        let target = DoubleWellTarget::default();
        let state = PhaseState::new(vec![0.4], vec![-0.3]).unwrap();
        let mut prev = f64::INFINITY;
        for eps in [0.2, 0.1, 0.05, 0.025] {
            let (closed, _) =
                ma_delta_g_crosscheck(MaKind::Bp, &target, &state, eps, 1.0, &[0.3], &[-0.1])
                    .unwrap();
            assert!(closed.abs() < prev);
            prev = closed.abs();
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn baoab_delta_g_nonzero_under_standard_gaussian() {
        // Unlike HAMS, the adjusted integrators keep a nonzero dG at gamma=1.
        let target = GaussianTarget::standard(1);
        let mut rng = RngStream::new(23, 0);
        let kernel = MaKernel::from_eta(MaKind::Baoab, 0.5, 1.0).unwrap();
        let mut st = kernel
            .init_state(&target, PhaseState::new(vec![0.9], vec![0.4]).unwrap())
            .unwrap();
        let mut seen_nonzero = false;
        for _ in 0..50 {
            let out = kernel.step(&target, &mut st, &mut rng).unwrap();
            if out.delta_g.abs() > 1e-6 {
                seen_nonzero = true;
            }
        }
        assert!(seen_nonzero);
    }

    #[test]
    fn rejection_negates_momentum_exactly() {
        let steep = GaussianTarget::new(40.0, 2).unwrap();
        let mut rng = RngStream::new(29, 0);
        for kind in MaKind::ALL {
            let kernel = MaKernel::from_eta(kind, 0.9, 1.0).unwrap();
            let mut st = kernel
                .init_state(
                    &steep,
                    PhaseState::new(vec![30.0, -25.0], vec![0.1, 0.3]).unwrap(),
                )
                .unwrap();
            let x0 = st.state.x.clone();
            let u0 = st.state.u.clone();
            let mut rejected = false;
            for _ in 0..50 {
                let out = kernel.step(&steep, &mut st, &mut rng).unwrap();
                if !out.accepted {
                    rejected = true;
                    assert_eq!(st.state.x, x0);
                    for i in 0..2 {
                        assert_eq!(st.state.u[i].to_bits(), (-u0[i]).to_bits());
                    }
                    break;
                }
            }
            assert!(rejected, "{} never rejected in the tail", kind.name());
        }
    }

    #[test]
    fn aboba_midpoint_identity() {
        // x0 + eps u0 / 2 equals x* - eps u* / 2 along accepted proposals.
        let target = DoubleWellTarget::default();
        let kernel = MaKernel::from_eta(MaKind::Aboba, 0.2, 1.0).unwrap();
        let mut rng = RngStream::new(41, 0);
        let mut st = kernel
            .init_state(&target, PhaseState::new(vec![0.1], vec![0.2]).unwrap())
            .unwrap();
        for _ in 0..100 {
            let before = st.state.x[0] + 0.1 * st.state.u[0];
            let prev = st.state.clone();
            let out = kernel.step(&target, &mut st, &mut rng).unwrap();
            if out.accepted && st.state.x != prev.x {
                let after = st.state.x[0] - 0.1 * st.state.u[0];
                assert!((before - after).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stationary_acceptance_matches_identity() {
        // Empirical acceptance within 0.005 of the closed-form identity.
        let gamma = 2.0;
        let target = GaussianTarget::new(gamma, 1).unwrap();
        let (eps, eta) = (0.35, 1.0);
        for kind in MaKind::ALL {
            let kernel = MaKernel::from_eta(kind, eps, eta).unwrap();
            let mut rng = RngStream::new(61, 0);
            let mut st = kernel
                .init_state(
                    &target,
                    PhaseState::new(
                        vec![rng.normal() / gamma.sqrt()],
                        vec![rng.normal()],
                    )
                    .unwrap(),
                )
                .unwrap();
            let n = 1_000_000usize;
            let mut acc = 0usize;
            for _ in 0..n {
                if kernel.step(&target, &mut st, &mut rng).unwrap().accepted {
                    acc += 1;
                }
            }
            let rate = acc as f64 / n as f64;
            let expect = expected_acceptance_ma(kind, eps, eta, gamma).unwrap();
            assert!(
                (rate - expect).abs() < 0.005,
                "{}: {rate} vs {expect}",
                kind.name()
            );
        }
    }

    #[test]
    fn stationary_moments_are_exact() {
        // E[x^2] = 1/gamma and E[u^2] = 1 within four batch-means SEs.
        let gamma = 2.0;
        let target = GaussianTarget::new(gamma, 1).unwrap();
        for kind in MaKind::ALL {
            let kernel = MaKernel::from_eta(kind, 0.4, 1.0).unwrap();
            let mut rng = RngStream::new(67, 0);
            let mut st = kernel
                .init_state(
                    &target,
                    PhaseState::new(
                        vec![rng.normal() / gamma.sqrt()],
                        vec![rng.normal()],
                    )
                    .unwrap(),
                )
                .unwrap();
            let n = 1_000_000usize;
            let nbatch = 1000;
            let mut bx = vec![0.0; nbatch];
            let mut bu = vec![0.0; nbatch];
            for b in 0..nbatch {
                let (mut sx, mut su) = (0.0, 0.0);
                for _ in 0..n / nbatch {
                    kernel.step(&target, &mut st, &mut rng).unwrap();
                    sx += st.state.x[0] * st.state.x[0];
                    su += st.state.u[0] * st.state.u[0];
                }
                bx[b] = sx / (n / nbatch) as f64;
                bu[b] = su / (n / nbatch) as f64;
            }
            let check = |batches: &[f64], truth: f64, label: &str| {
                let mean = batches.iter().sum::<f64>() / batches.len() as f64;
                let var = batches.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                    / (batches.len() - 1) as f64;
                let se = (var / batches.len() as f64).sqrt();
                assert!(
                    (mean - truth).abs() < 4.0 * se,
                    "{} {label}: {mean} vs {truth} (se {se})",
                    kind.name()
                );
            };
            check(&bx, 1.0 / gamma, "E[x^2]");
            check(&bu, 1.0, "E[u^2]");
        }
    }

    #[test]
    fn expected_dg_sanity() {
        // The closed-form E[dG] is hit by the stationary sample mean of dG.
        let gamma = 2.0;
        let target = GaussianTarget::new(gamma, 1).unwrap();
        let (eps, eta) = (0.35, 1.0);
        for kind in MaKind::ALL {
            let kernel = MaKernel::from_eta(kind, eps, eta).unwrap();
            let mut rng = RngStream::new(71, 0);
            let mut st = kernel
                .init_state(
                    &target,
                    PhaseState::new(
                        vec![rng.normal() / gamma.sqrt()],
                        vec![rng.normal()],
                    )
                    .unwrap(),
                )
                .unwrap();
            let n = 400_000usize;
            let mut s = 0.0;
            for _ in 0..n {
                s += kernel.step(&target, &mut st, &mut rng).unwrap().delta_g;
            }
            let mean = s / n as f64;
            let expect = expected_delta_g_ma(kind, eps, eta, gamma).unwrap();
            assert!(
                (mean - expect).abs() < 0.1 * expect.max(0.002),
                "{}: {mean} vs {expect}",
                kind.name()
            );
        }
    }
}
