//! Standard-Gaussian invariant suites behind the `gaussian-validate`
//! subcommand: rejection-free acceptance, generalized involution, stationary
//! variance against the closed form, and the expected-acceptance identity.

use anyhow::Result;
use hams_core::analytic::{
    dlyap2, expected_acceptance, stationary_variance_closed, var_kernel,
};
use hams_core::diagnostics::batch_mean_se;
use hams_core::hams::{
    hams_a_coeffs, hams_b_coeffs, hams_k_coeffs, ChainState, HamsCoeffs, HamsKernel, PhaseState,
};
use hams_core::rng::RngStream;
use hams_core::targets::GaussianTarget;

/// One suite verdict.
#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Presets swept by the rejection-free suite.
fn presets(epsilon: f64) -> Vec<(String, HamsCoeffs)> {
    let mut out = vec![
        ("hams-a".to_string(), hams_a_coeffs(epsilon, 1.0).unwrap()),
        ("hams-b".to_string(), hams_b_coeffs(epsilon, 1.0).unwrap()),
    ];
    for k in [1.0, 2.0, 3.0] {
        out.push((format!("hams-{k}"), hams_k_coeffs(epsilon, k).unwrap()));
    }
    out
}

/// Max |dG| over 10^4 steps per preset and step size under N(0, I) in k = 5;
/// the bound is 1e-9.
pub fn rejection_free_suite(seed: u64) -> Result<SuiteOutcome> {
    let target = GaussianTarget::standard(5);
    let mut rng = RngStream::new(seed, 0);
    let mut worst: f64 = 0.0;
    for &eps in &[0.1, 0.5, 0.9] {
        for (_, coeffs) in presets(eps) {
            let kernel = HamsKernel::new(coeffs)?;
            let mut st = ChainState::new(
                &target,
                PhaseState::new(
                    (0..5).map(|_| rng.normal()).collect(),
                    (0..5).map(|_| rng.normal()).collect(),
                )?,
            )?;
            for _ in 0..10_000 {
                let out = kernel.step(&target, &mut st, &mut rng)?;
                worst = worst.max(out.delta_g.abs());
            }
        }
    }
    Ok(SuiteOutcome {
        name: "rejection-free",
        passed: worst <= 1e-9,
        detail: format!("max |dG| = {worst:.3e} (bound 1e-9)"),
    })
}

/// 10^3 random (state, noise, coefficients) cases: the forward map at
/// (x*, -u*) with the negated backward noise reproduces (x0, -u0) within
/// 1e-12 relative.
pub fn involution_suite(seed: u64) -> Result<SuiteOutcome> {
    let target = GaussianTarget::new(1.3, 2)?;
    let mut rng = RngStream::new(seed, 1);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let eps = 0.1 + 0.8 * rng.uniform();
        let coeffs = match case % 3 {
            0 => hams_a_coeffs(eps, 2.0 * rng.uniform())?,
            1 => hams_b_coeffs(eps, 2.0 * rng.uniform())?,
            _ => hams_k_coeffs(eps, 3.0 * rng.uniform())?,
        };
        let kernel = HamsKernel::new(coeffs)?;
        let st = ChainState::new(
            &target,
            PhaseState::new(
                (0..2).map(|_| rng.normal()).collect(),
                (0..2).map(|_| rng.normal()).collect(),
            )?,
        )?;
        let out = kernel.propose(&target, &st, &mut rng)?;
        let flipped = ChainState::new(&target, out.proposed.momentum_flipped())?;
        let back = kernel.propose_with_noise(&target, &flipped, &out.z_backward.negated())?;
        for i in 0..2 {
            let sx = st.state.x[i].abs().max(1.0);
            let su = st.state.u[i].abs().max(1.0);
            worst = worst.max((back.proposed.x[i] - st.state.x[i]).abs() / sx);
            worst = worst.max((back.proposed.u[i] + st.state.u[i]).abs() / su);
        }
    }
    Ok(SuiteOutcome {
        name: "involution",
        passed: worst <= 1e-12,
        detail: format!("max relative reconstruction error = {worst:.3e} (bound 1e-12)"),
    })
}

/// Proposal-only chain at gamma = 2, a1 = 0.2: position variance within four
/// batch-means standard errors of 0.5625, plus the Lyapunov-vs-closed-form
/// identity over the (a1, gamma) grid at 1e-10.
pub fn stationary_variance_suite(seed: u64) -> Result<SuiteOutcome> {
    let target = GaussianTarget::new(2.0, 1)?;
    let kernel = HamsKernel::new(hams_a_coeffs(0.6, 1.0)?)?;
    let mut rng = RngStream::new(seed, 2);
    let mut st = ChainState::new(&target, PhaseState::new(vec![0.5], vec![0.0])?)?;
    let advance = |st: &mut ChainState, rng: &mut RngStream| -> Result<()> {
        let out = kernel.propose(&target, st, rng)?;
        st.state = out.proposed;
        st.potential = out.potential;
        st.grad = out.grad;
        Ok(())
    };
    for _ in 0..5000 {
        advance(&mut st, &mut rng)?;
    }
    let n = 1_000_000usize;
    let mut sq = Vec::with_capacity(n);
    for _ in 0..n {
        advance(&mut st, &mut rng)?;
        sq.push(st.state.x[0] * st.state.x[0]);
    }
    let mean = sq.iter().sum::<f64>() / n as f64;
    let se = batch_mean_se(&sq, 1000);
    let mc_pass = (mean - 0.5625).abs() < 4.0 * se;

    let mut lyap_worst: f64 = 0.0;
    for &a1 in &[0.1f64, 0.5, 1.0, 1.5, 1.9] {
        for &g in &[0.5f64, 2.0, 5.0] {
            if (a1 * g - 2.0).abs() < 1e-12 {
                continue; // the closed form is degenerate here
            }
            let a3 = (2.0f64.sqrt() - a1.sqrt()).powi(2);
            let coeffs = HamsCoeffs::with_default_phi(a1, (a1 * a3).sqrt(), a3)?;
            let v = dlyap2(&var_kernel(&coeffs, g))?;
            let expect = stationary_variance_closed(a1, g)?;
            lyap_worst = lyap_worst
                .max((v[0][0] - expect).abs())
                .max((v[1][1] - 1.0).abs())
                .max(v[0][1].abs());
        }
    }
    let passed = mc_pass && lyap_worst <= 1e-10;
    Ok(SuiteOutcome {
        name: "stationary-variance",
        passed,
        detail: format!(
            "Var(x) = {mean:.6} (target 0.5625, 4se = {:.2e}); Lyapunov defect {lyap_worst:.2e}",
            4.0 * se
        ),
    })
}

/// Stationary Metropolized chains at gamma = 2, a1 in {0.2, 0.5, 1.0}:
/// empirical acceptance within 0.005 of the closed-form identity.
pub fn acceptance_identity_suite(seed: u64) -> Result<SuiteOutcome> {
    let gamma = 2.0;
    let target = GaussianTarget::new(gamma, 1)?;
    let mut rng = RngStream::new(seed, 3);
    let mut detail = String::new();
    let mut passed = true;
    for &a1 in &[0.2f64, 0.5, 1.0] {
        let a3 = (2.0f64.sqrt() - a1.sqrt()).powi(2);
        // a2 stays strictly inside the singular boundary: with a rank-one
        // noise and a1 * gamma = 2 the momentum update degenerates to
        // u -> -u, conserving u^2, and a single chain stops being ergodic
        // (the expected rate only depends on a1, so any valid a2 works).
        let coeffs = HamsCoeffs::with_default_phi(a1, 0.9 * (a1 * a3).sqrt(), a3)?;
        let kernel = HamsKernel::new(coeffs)?;
        let mut st = ChainState::new(
            &target,
            PhaseState::new(vec![rng.normal() / gamma.sqrt()], vec![rng.normal()])?,
        )?;
        let n = 1_000_000usize;
        let mut acc = 0usize;
        for _ in 0..n {
            acc += usize::from(kernel.step(&target, &mut st, &mut rng)?.accepted);
        }
        let rate = acc as f64 / n as f64;
        let expect = expected_acceptance(a1, gamma)?;
        if (rate - expect).abs() >= 0.005 {
            passed = false;
        }
        detail.push_str(&format!("a1={a1}: {rate:.5} vs {expect:.5}; "));
    }
    Ok(SuiteOutcome {
        name: "acceptance-identity",
        passed,
        detail,
    })
}

/// Runs the four suites and returns their outcomes.
pub fn run_all(seed: u64) -> Result<Vec<SuiteOutcome>> {
    Ok(vec![
        rejection_free_suite(seed)?,
        involution_suite(seed)?,
        stationary_variance_suite(seed)?,
        acceptance_identity_suite(seed)?,
    ])
}
