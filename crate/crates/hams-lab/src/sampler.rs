//! Sampler construction and the unified chain-step interface.
//!
//! Two tuning flavors exist per preset. Without preconditioning (the double
//! well), the friction is an explicit knob: the one-noise variants and the
//! `eta1 = k eps` family take their momentum carryover from `eta`, and the
//! adjusted integrators use `c = exp(-eta eps)`. With preconditioning the
//! target is roughly standard Gaussian, so the remaining carryover is set to
//! its convergence-optimal value and only the step size is tuned.

use anyhow::{anyhow, Result};
use hams_core::analytic::{optimal_a1, optimal_a3};
use hams_core::hams::{
    coeffs_from_sde, hams_a_coeffs, hams_b_coeffs, hams_k_coeffs, ChainState, HamsCoeffs,
    HamsKernel, PhaseState, SdeParams,
};
use hams_core::metropolized::{MaKernel, MaKind, MaState};
use hams_core::rng::RngStream;
use hams_core::targets::TargetModel;

use crate::config::SamplerKind;

/// Momentum carryover `c` matching the one-noise optimal tuning, used for the
/// adjusted integrators under preconditioning.
pub fn ma_tuned_carryover(epsilon: f64) -> f64 {
    let root = (1.0 - epsilon * epsilon).sqrt();
    ((3.0 - root) / (1.0 + root) - 2.0 * 2.0f64.sqrt() * epsilon * (1.0 + root).powf(-1.5))
        .clamp(0.0, 1.0)
}

/// Coefficients for the proposal kernels under the two tuning flavors.
pub fn hams_coefficients(
    sampler: SamplerKind,
    epsilon: f64,
    eta: f64,
    preconditioned: bool,
) -> Result<HamsCoeffs> {
    let root = (1.0 - epsilon * epsilon).sqrt();
    let coeffs = match (sampler, preconditioned) {
        (SamplerKind::HamsA, false) => hams_a_coeffs(epsilon, eta)?,
        (SamplerKind::HamsA, true) => {
            let a1 = 1.0 - root;
            let (a3, a2, _) = optimal_a3(a1, a1)?;
            HamsCoeffs::with_default_phi(a1, a2, a3)?
        }
        (SamplerKind::HamsB, false) => hams_b_coeffs(epsilon, eta)?,
        (SamplerKind::HamsB, true) => {
            let a3 = 1.0 + root;
            let (a1, a2, _) = optimal_a1(a3, 2.0 - a3)?;
            HamsCoeffs::with_default_phi(a1, a2, a3)?
        }
        (SamplerKind::HamsK(k), false) => coeffs_from_sde(SdeParams::from_frictions(
            epsilon,
            k * epsilon,
            eta,
        )?)?,
        (SamplerKind::HamsK(k), true) => hams_k_coeffs(epsilon, k)?,
        _ => return Err(anyhow!("{} is not a proposal-kernel sampler", sampler.name())),
    };
    Ok(coeffs)
}

/// A sampler instance at a fixed step size.
#[derive(Debug, Clone)]
pub enum Kernel {
    Hams(HamsKernel),
    Ma(MaKernel),
}

/// Chain state with the kernel-specific evaluation cache.
#[derive(Debug, Clone)]
pub enum KernelState {
    Hams(ChainState),
    Ma(MaState),
}

impl KernelState {
    pub fn phase(&self) -> &PhaseState {
        match self {
            KernelState::Hams(s) => &s.state,
            KernelState::Ma(s) => &s.state,
        }
    }
}

/// Builds the sampler at `(epsilon, eta)`, in the requested tuning flavor.
pub fn build_kernel(
    sampler: SamplerKind,
    epsilon: f64,
    eta: f64,
    preconditioned: bool,
) -> Result<Kernel> {
    Ok(match sampler {
        SamplerKind::MaBaoab | SamplerKind::MaAboba | SamplerKind::MaBp => {
            let kind = match sampler {
                SamplerKind::MaBaoab => MaKind::Baoab,
                SamplerKind::MaAboba => MaKind::Aboba,
                _ => MaKind::Bp,
            };
            let kernel = if preconditioned {
                MaKernel::with_carryover(kind, epsilon, ma_tuned_carryover(epsilon))?
            } else {
                MaKernel::from_eta(kind, epsilon, eta)?
            };
            Kernel::Ma(kernel)
        }
        _ => Kernel::Hams(HamsKernel::new(hams_coefficients(
            sampler,
            epsilon,
            eta,
            preconditioned,
        )?)?),
    })
}

impl Kernel {
    pub fn init_state<M: TargetModel + ?Sized>(
        &self,
        target: &M,
        state: PhaseState,
    ) -> Result<KernelState> {
        Ok(match self {
            Kernel::Hams(_) => KernelState::Hams(ChainState::new(target, state)?),
            Kernel::Ma(k) => KernelState::Ma(k.init_state(target, state)?),
        })
    }

    /// One accept/reject step; returns `(accepted, delta_g)`.
    pub fn step<M: TargetModel + ?Sized>(
        &self,
        target: &M,
        state: &mut KernelState,
        rng: &mut RngStream,
    ) -> Result<(bool, f64)> {
        match (self, state) {
            (Kernel::Hams(k), KernelState::Hams(s)) => {
                let out = k.step(target, s, rng)?;
                Ok((out.accepted, out.delta_g))
            }
            (Kernel::Ma(k), KernelState::Ma(s)) => {
                let out = k.step(target, s, rng)?;
                Ok((out.accepted, out.delta_g))
            }
            _ => Err(anyhow!("kernel/state mismatch")),
        }
    }
}

/// Step-size bounds used by the tuner.
pub const EPSILON_MIN: f64 = 1e-3;
pub const EPSILON_MAX: f64 = 0.999;

/// A tuned chain: the frozen step size together with the kernel and the chain
/// state at the end of the adaptation window, ready to draw from.
pub struct TunedChain {
    pub epsilon: f64,
    pub kernel: Kernel,
    pub state: KernelState,
}

/// Tunes the step size toward a target acceptance rate by stochastic
/// approximation on `log eps`:
/// `log eps_{t+1} = log eps_t + t^{-0.7} (alpha_t - target)`, with `alpha_t`
/// the step's acceptance probability and `eps` clamped to
/// `[EPSILON_MIN, EPSILON_MAX]`.
///
/// Adaptation doubles as burn-in: it starts at a conservative `eps = 0.1`,
/// so a chain initialized far in the tail can relax while the step size
/// grows, and the returned state continues straight into the draw phase.
///
/// Fails when the mean acceptance over the trailing 20% of the adaptation
/// window misses the target by more than 0.15 while `eps` sits strictly
/// inside the clamp range (at a clamp boundary the miss is structural: a
/// rejection-free target pushes `eps` to the upper clamp by design).
pub fn autotune_chain<M: TargetModel + ?Sized>(
    sampler: SamplerKind,
    eta: f64,
    preconditioned: bool,
    target: &M,
    init: PhaseState,
    target_rate: f64,
    n_adapt: usize,
    rng: &mut RngStream,
) -> Result<TunedChain> {
    if !(0.0 < target_rate && target_rate < 1.0) {
        return Err(anyhow!("target acceptance must lie in (0, 1), got {target_rate}"));
    }
    // The midpoint integrator caches a gradient at x + eps u / 2, which goes
    // stale when eps moves.
    let cache_tracks_eps = matches!(sampler, SamplerKind::MaAboba);
    let mut eps = 0.1f64;
    let mut log_eps = eps.ln();
    let mut kernel = build_kernel(sampler, eps, eta, preconditioned)?;
    let mut state = kernel.init_state(target, init)?;
    let trail_start = n_adapt - n_adapt / 5;
    let mut trail_sum = 0.0;
    let mut trail_count = 0usize;
    for t in 1..=n_adapt {
        let (_, delta_g) = kernel.step(target, &mut state, rng)?;
        let alpha = (-delta_g).exp().min(1.0);
        log_eps += (t as f64).powf(-0.7) * (alpha - target_rate);
        eps = log_eps.exp().clamp(EPSILON_MIN, EPSILON_MAX);
        log_eps = eps.ln();
        kernel = build_kernel(sampler, eps, eta, preconditioned)?;
        if cache_tracks_eps {
            state = kernel.init_state(target, state.phase().clone())?;
        }
        if t > trail_start {
            trail_sum += alpha;
            trail_count += 1;
        }
    }
    let trailing = trail_sum / trail_count.max(1) as f64;
    let at_clamp = eps <= EPSILON_MIN * 1.0001 || eps >= EPSILON_MAX * 0.9999;
    if (trailing - target_rate).abs() > 0.15 && !at_clamp {
        return Err(hams_core::Error::TuningFailed { acceptance: trailing, target: target_rate }.into());
    }
    Ok(TunedChain { epsilon: eps, kernel, state })
}

/// [`autotune_chain`], returning only the tuned step size.
#[allow(clippy::too_many_arguments)]
pub fn autotune_epsilon<M: TargetModel + ?Sized>(
    sampler: SamplerKind,
    eta: f64,
    preconditioned: bool,
    target: &M,
    init: PhaseState,
    target_rate: f64,
    n_adapt: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    Ok(autotune_chain(sampler, eta, preconditioned, target, init, target_rate, n_adapt, rng)?
        .epsilon)
}
