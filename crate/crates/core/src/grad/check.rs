//! Finite-difference verification of the end-to-end analytic gradients.
//!
//! Each configuration draws a sampling frequency, small paired encoder and
//! decoder banks and a noise signal, then compares the analytic gradient of
//! the reconstruction loss with central differences taken by regenerating
//! the weights from perturbed parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::train::ReconstructionPipeline;
use super::NormGradient;
use crate::error::Result;
use crate::filterbank::{BaseFilter, FilterbankSpec};
use crate::layers::{SfiConv, SfiConvTranspose, SfiLayer};

const RATES: [f64; 7] = [8000.0, 11025.0, 16000.0, 22050.0, 32000.0, 44100.0, 48000.0];

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckConfig {
    pub configs: usize,
    pub seed: u64,
    pub bases: usize,
    /// Relative step for `f` (scaled by `max(1, |f|)`) and absolute step for `φ`.
    pub step: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            configs: 50,
            seed: 0,
            bases: 3,
            step: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub configs: usize,
    pub parameters_checked: usize,
    pub max_relative_error: f64,
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(floor);
    if denom == 0.0 {
        0.0
    } else {
        (analytic - numeric).abs() / denom
    }
}

fn random_bank(rng: &mut ChaCha8Rng, n: usize, fs: f64) -> Result<FilterbankSpec> {
    let bases = (0..n)
        .map(|_| {
            // Keep a margin around Nyquist so a perturbation never flips the
            // aliasing decision.
            let mut f = rng.gen_range(50.0..0.6 * fs);
            if (f - fs / 2.0).abs() < 10.0 {
                f -= 20.0;
            }
            BaseFilter::gammatone(f, rng.gen_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    FilterbankSpec::new(bases, true)
}

enum Which {
    Encoder,
    Decoder,
}

fn perturbed_loss(pipeline: &ReconstructionPipeline, which: &Which, i: usize, df: f64, dphi: f64) -> Result<f64> {
    let mut p = pipeline.clone();
    let layer: &mut SfiLayer = match which {
        Which::Encoder => &mut p.encoder,
        Which::Decoder => &mut p.decoder,
    };
    let base = layer.spec().bases()[i];
    layer.update_spec(|s| s.set_trainable(i, base.center_frequency + df, base.phase_shift + dphi))?;
    p.loss()
}

/// Runs the suite and returns the worst relative error over every parameter.
///
/// Components are compared relative to the larger of the two estimates, with
/// a floor of `1e-6` times the largest gradient magnitude of the configuration.
pub fn gradient_check(config: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for _ in 0..config.configs {
        let fs = RATES[rng.gen_range(0..RATES.len())];
        let mut encoder = SfiConv::new(random_bank(&mut rng, config.bases, fs)?);
        let mut decoder = SfiConvTranspose::new(random_bank(&mut rng, config.bases, fs)?);
        let frame = *encoder.set_sampling_frequency(fs)?;
        decoder.set_sampling_frequency(fs)?;
        let len = frame.kernel_size * rng.gen_range(4..10);
        let signal: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pipeline = ReconstructionPipeline::new(encoder, decoder, signal);

        let (_, enc, dec) = pipeline.loss_and_grads(NormGradient::Propagate)?;
        let mut pairs = Vec::new();
        for (which, bundle, layer) in [
            (Which::Encoder, &enc, &*pipeline.encoder),
            (Which::Decoder, &dec, &*pipeline.decoder),
        ] {
            for (i, base) in layer.spec().bases().iter().enumerate() {
                let hf = config.step * base.center_frequency.abs().max(1.0);
                let hp = config.step;
                let fd_f = (perturbed_loss(&pipeline, &which, i, hf, 0.0)?
                    - perturbed_loss(&pipeline, &which, i, -hf, 0.0)?)
                    / (2.0 * hf);
                let fd_phi = (perturbed_loss(&pipeline, &which, i, 0.0, hp)?
                    - perturbed_loss(&pipeline, &which, i, 0.0, -hp)?)
                    / (2.0 * hp);
                pairs.push((bundle.d_loss_d_f[i], fd_f));
                pairs.push((bundle.d_loss_d_phi[i], fd_phi));
            }
        }
        let floor = 1e-6 * pairs.iter().fold(0.0f64, |m, (a, n)| m.max(a.abs()).max(n.abs()));
        for (a, n) in pairs {
            worst = worst.max(relative_error(a, n, floor));
            checked += 1;
        }
    }
    Ok(GradCheckReport {
        configs: config.configs,
        parameters_checked: checked,
        max_relative_error: worst,
    })
}
