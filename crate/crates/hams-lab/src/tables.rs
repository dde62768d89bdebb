//! CSV emitters for the closed-form theory table and the integrator-matching
//! report.

use anyhow::{bail, Result};
use hams_core::analytic::{
    expected_acceptance, expected_delta_g, optimal_a3, spectral_radius, stationary_variance_closed,
};
use hams_core::hams::hams_k_coeffs;
use hams_core::langevin::IntegratorKind;
use hams_core::matching::verify_match;

pub const THEORY_HEADER: &str = "epsilon,k,gamma,a1,a2,a3,phi,var_x,e_delta_g,e_alpha,rho_min";

fn theory_row(epsilon: &str, k: &str, gamma: f64, coeffs: &hams_core::HamsCoeffs) -> String {
    let a1 = coeffs.a1;
    let var_x = stationary_variance_closed(a1, gamma).map_or(f64::NAN, |v| v);
    let e_dg = expected_delta_g(a1, gamma).map_or(f64::NAN, |v| v);
    let e_alpha = expected_acceptance(a1, gamma).map_or(f64::NAN, |v| v);
    let rho = spectral_radius(coeffs);
    format!(
        "{epsilon},{k},{gamma},{},{},{},{},{var_x},{e_dg},{e_alpha},{rho}",
        coeffs.a1, coeffs.a2, coeffs.a3, coeffs.phi
    )
}

/// Theory table: either a single row at an explicit `a1` (with the singular
/// one-noise tuning for the remaining coefficients), or a sweep over the
/// `(epsilon, k)` grid.
pub fn theory_table(
    gamma: f64,
    a1: Option<f64>,
    eps_grid: &[f64],
    k_grid: &[f64],
) -> Result<String> {
    let mut out = String::from(THEORY_HEADER);
    out.push('\n');
    if let Some(a1) = a1 {
        if !(a1 > 0.0 && a1 < 2.0) {
            bail!("a1 must lie in (0, 2), got {a1}");
        }
        let (a3, a2, _) = optimal_a3(a1, a1)?;
        let coeffs = hams_core::HamsCoeffs::with_default_phi(a1, a2, a3)?;
        out.push_str(&theory_row("", "", gamma, &coeffs));
        out.push('\n');
        return Ok(out);
    }
    for &eps in eps_grid {
        for &k in k_grid {
            let coeffs = hams_k_coeffs(eps, k)?;
            out.push_str(&theory_row(&format!("{eps}"), &format!("{k}"), gamma, &coeffs));
            out.push('\n');
        }
    }
    Ok(out)
}

pub const MATCH_HEADER: &str =
    "kind,variant,epsilon,eta,gamma,drift_diff,cov_diff,phi_diff,order_ratio";

fn parse_kind(name: &str) -> Result<IntegratorKind> {
    Ok(match name.to_ascii_lowercase().as_str() {
        "gjf" => IntegratorKind::Gjf,
        "baoab" => IntegratorKind::Baoab,
        "aboba" => IntegratorKind::Aboba,
        "il" => IntegratorKind::Il,
        "bp" => IntegratorKind::Bp,
        "vec" => IntegratorKind::Vec,
        "spv" => IntegratorKind::Spv,
        "mannella" => IntegratorKind::Mannella,
        other => bail!("unknown integrator {other:?}"),
    })
}

/// Matching report rows for one integrator or all eight.
pub fn match_table(kind: Option<&str>, epsilon: f64, eta: f64, gamma: f64) -> Result<String> {
    let kinds: Vec<IntegratorKind> = match kind {
        Some(name) if !name.eq_ignore_ascii_case("all") => vec![parse_kind(name)?],
        _ => IntegratorKind::ALL.to_vec(),
    };
    let mut out = String::from(MATCH_HEADER);
    out.push('\n');
    for k in kinds {
        let r = verify_match(k, epsilon, eta, gamma)?;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.kind.name(),
            r.variant.name(),
            r.epsilon,
            r.eta,
            r.gamma,
            r.drift_diff,
            r.cov_diff,
            r.phi_diff,
            r.order_ratio.map_or(String::new(), |v| format!("{v}")),
        ));
    }
    Ok(out)
}
