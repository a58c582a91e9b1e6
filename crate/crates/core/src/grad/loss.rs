//! Scale-invariant signal-to-noise ratio.

use std::f64::consts::LN_10;

use crate::error::{Error, Result};

/// Relative guard on the error energy; caps a perfect estimate at +120 dB.
const GUARD: f64 = 1e-12;
pub const SI_SNR_CEILING_DB: f64 = 120.0;
/// Returned when the estimate has no component along the reference.
pub const SI_SNR_FLOOR_DB: f64 = -120.0;

struct Projection {
    target: Vec<f64>,
    target_energy: f64,
    error_energy: f64,
}

fn project(estimate: &[f64], reference: &[f64]) -> Result<Projection> {
    if estimate.len() != reference.len() {
        return Err(Error::LengthMismatch(estimate.len(), reference.len()));
    }
    if reference.is_empty() {
        return Err(Error::ZeroReference);
    }
    let ref_energy: f64 = reference.iter().map(|s| s * s).sum();
    if ref_energy == 0.0 {
        return Err(Error::ZeroReference);
    }
    let dot: f64 = estimate.iter().zip(reference).map(|(e, s)| e * s).sum();
    let alpha = dot / ref_energy;
    let target: Vec<f64> = reference.iter().map(|s| alpha * s).collect();
    let target_energy = target.iter().map(|t| t * t).sum();
    let error_energy = estimate.iter().zip(&target).map(|(e, t)| (e - t) * (e - t)).sum();
    Ok(Projection {
        target,
        target_energy,
        error_energy,
    })
}

fn ratio(p: &Projection) -> f64 {
    p.target_energy / (p.error_energy + GUARD * p.target_energy)
}

/// SI-SNR of `estimate` against `reference`, in dB.
///
/// `s_t = (⟨ŝ, s⟩ / ‖s‖²) s`, `e = ŝ - s_t`, and the result is
/// `10 log10(‖s_t‖² / (‖e‖² + 1e-12 ‖s_t‖²))`, clamped below at -120 dB.
/// No mean is subtracted from either signal.
pub fn si_snr(estimate: &[f64], reference: &[f64]) -> Result<f64> {
    let p = project(estimate, reference)?;
    Ok(10.0 * ratio(&p).max(GUARD).log10())
}

/// SI-SNR together with its gradient w.r.t. `estimate`.
///
/// The gradient is zero where the floor clamp is active.
pub fn si_snr_with_grad(estimate: &[f64], reference: &[f64]) -> Result<(f64, Vec<f64>)> {
    let p = project(estimate, reference)?;
    let r = ratio(&p);
    if r <= GUARD {
        return Ok((SI_SNR_FLOOR_DB, vec![0.0; estimate.len()]));
    }
    // d/dŝ ‖s_t‖² = 2 s_t and ‖e‖² = ‖ŝ‖² - ‖s_t‖².
    let denom = p.error_energy + GUARD * p.target_energy;
    let k = 10.0 / LN_10;
    let grad = estimate
        .iter()
        .zip(&p.target)
        .map(|(e, t)| k * (2.0 * t / p.target_energy - (2.0 * e - 2.0 * (1.0 - GUARD) * t) / denom))
        .collect();
    Ok((10.0 * r.log10(), grad))
}
