//! Plain gradient descent on the analog parameters of small problems.

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{backprop_filter_params, si_snr_with_grad, GradientBundle, NormGradient, WeightGradient};
use crate::discretize::{assemble_weights, AssembleOptions, FrameParams, Normalization};
use crate::error::{Error, Result};
use crate::filterbank::{init_filterbank, BaseFilter, FilterbankSpec, PhaseInit};
use crate::layers::{apply_mask, rectifier_backward, SfiConv, SfiConvTranspose, SfiLayer};

#[derive(Clone, Debug, PartialEq)]
pub enum Objective {
    /// Fit one filter's generated row to the row of a target filter by
    /// squared l2 distance.
    FilterRecovery {
        target_f: f64,
        target_phi: f64,
        init_f: f64,
        init_phi: f64,
    },
    /// Encode white noise with the default bank, pass it through an identity
    /// mask, decode, and maximize SI-SNR against the input.
    Reconstruction { signal_len: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub steps: usize,
    pub fs: f64,
    /// Frequencies are updated in units of `f_scale` Hz, so the step on `f`
    /// is `lr · f_scale² · ∂loss/∂f`.
    pub f_scale: f64,
    pub normalization: Normalization,
    pub norm_gradient: NormGradient,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.1,
            steps: 500,
            fs: 16000.0,
            f_scale: 100.0,
            normalization: Normalization::default(),
            norm_gradient: NormGradient::Propagate,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub loss: f64,
    pub params: Vec<f64>,
}

/// Loss and tracked parameter values before each update.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainTrace {
    pub param_names: Vec<String>,
    pub rows: Vec<TraceRow>,
}

impl TrainTrace {
    pub fn losses(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.loss).collect()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.rows.last().map(|r| r.loss)
    }
}

/// Proposed `(f, φ)` for every base filter, or `None` if any is non-finite.
fn proposal(layer: &SfiLayer, grads: &GradientBundle, config: &TrainConfig) -> Option<Vec<(f64, f64)>> {
    let f_rate = config.lr * config.f_scale * config.f_scale;
    layer
        .spec()
        .bases()
        .iter()
        .enumerate()
        .map(|(i, base)| {
            let f = (base.center_frequency - f_rate * grads.d_loss_d_f[i]).max(0.0);
            let phi = base.phase_shift - config.lr * grads.d_loss_d_phi[i];
            (f.is_finite() && phi.is_finite()).then_some((f, phi))
        })
        .collect()
}

fn apply(layer: &mut SfiLayer, next: &[(f64, f64)]) -> Result<()> {
    layer.update_spec(|spec| {
        for (i, &(f, phi)) in next.iter().enumerate() {
            spec.set_trainable(i, f, phi)?;
        }
        Ok(())
    })
}

fn diverged(step: usize, trace: TrainTrace) -> Error {
    Error::Diverged {
        step,
        trace: Box::new(trace),
    }
}

/// Encoder, identity mask and decoder around a fixed input signal, with loss
/// `-SI-SNR(x̂, x[..len(x̂)])`.
#[derive(Clone, Debug)]
pub struct ReconstructionPipeline {
    pub encoder: SfiConv,
    pub decoder: SfiConvTranspose,
    pub signal: Vec<f64>,
}

impl ReconstructionPipeline {
    pub fn new(encoder: SfiConv, decoder: SfiConvTranspose, signal: Vec<f64>) -> Self {
        ReconstructionPipeline {
            encoder,
            decoder,
            signal,
        }
    }

    pub fn loss(&self) -> Result<f64> {
        let latent = self.encoder.encode(&self.signal)?;
        let mask = Array2::ones(latent.values().raw_dim());
        let out = self.decoder.decode(&apply_mask(&latent, mask.view())?)?;
        Ok(-super::si_snr(&out, &self.signal[..out.len()])?)
    }

    /// Loss and the gradients w.r.t. the encoder and decoder base filters.
    pub fn loss_and_grads(&self, mode: NormGradient) -> Result<(f64, GradientBundle, GradientBundle)> {
        let pre = self.encoder.encode_linear(&self.signal)?;
        let latent = pre.clone().rectify();
        let mask = Array2::ones(latent.values().raw_dim());
        let masked = apply_mask(&latent, mask.view())?;
        let out = self.decoder.decode(&masked)?;
        let (snr, d_snr) = si_snr_with_grad(&out, &self.signal[..out.len()])?;
        let d_out: Vec<f64> = d_snr.iter().map(|g| -g).collect();

        let dec_w = self.decoder.weight_gradient(&masked, &d_out)?;
        let d_latent = self.decoder.latent_gradient(&masked, &d_out)? * &mask;
        let d_pre = rectifier_backward(&pre, d_latent.view());
        let enc_w = self.encoder.weight_gradient(&self.signal, d_pre.view())?;

        let enc = backprop_filter_params(&enc_w, &self.encoder, mode)?;
        let dec = backprop_filter_params(&dec_w, &self.decoder, mode)?;
        Ok((-snr, enc, dec))
    }
}

fn check_config(config: &TrainConfig) -> Result<()> {
    if !(config.lr.is_finite() && config.lr >= 0.0) {
        return Err(Error::InvalidParameter(format!("learning rate must be non-negative, got {}", config.lr)));
    }
    if !(config.f_scale.is_finite() && config.f_scale > 0.0) {
        return Err(Error::InvalidParameter(format!("f_scale must be positive, got {}", config.f_scale)));
    }
    Ok(())
}

/// Runs `config.steps` gradient-descent updates and records `steps + 1` rows.
pub fn train_toy(objective: &Objective, config: &TrainConfig) -> Result<TrainTrace> {
    check_config(config)?;
    let options = AssembleOptions {
        normalization: config.normalization,
        ..AssembleOptions::analysis()
    };
    match *objective {
        Objective::FilterRecovery {
            target_f,
            target_phi,
            init_f,
            init_phi,
        } => {
            let frame = FrameParams::new(config.fs)?;
            let target_spec = FilterbankSpec::new(vec![BaseFilter::gammatone(target_f, target_phi)], false)?;
            let target = assemble_weights(&target_spec, &frame, &options)?;
            let mut enc = SfiConv::with_options(
                FilterbankSpec::new(vec![BaseFilter::gammatone(init_f, init_phi)], false)?,
                options,
            );
            enc.set_sampling_frequency(config.fs)?;

            let mut trace = TrainTrace {
                param_names: vec!["f".into(), "phi".into()],
                rows: Vec::with_capacity(config.steps + 1),
            };
            for step in 0..=config.steps {
                let weights = enc.weights()?;
                let diff: Array3<f64> = weights.data() - target.data();
                let loss = diff.iter().map(|d| d * d).sum::<f64>();
                let base = enc.spec().bases()[0];
                trace.rows.push(TraceRow {
                    step,
                    loss,
                    params: vec![base.center_frequency, base.phase_shift],
                });
                if !loss.is_finite() {
                    return Err(diverged(step, trace));
                }
                if step == config.steps {
                    break;
                }
                let upstream = WeightGradient {
                    values: diff * 2.0,
                    generation: weights.generation(),
                };
                let grads = backprop_filter_params(&upstream, &enc, config.norm_gradient)?;
                let Some(next) = proposal(&enc, &grads, config) else {
                    return Err(diverged(step, trace));
                };
                apply(&mut enc, &next)?;
            }
            Ok(trace)
        }
        Objective::Reconstruction { signal_len, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let signal: Vec<f64> = (0..signal_len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut encoder = SfiConv::with_options(init_filterbank(PhaseInit::Grid), options);
            let mut decoder = SfiConvTranspose::with_options(
                init_filterbank(PhaseInit::Grid),
                AssembleOptions {
                    normalization: config.normalization,
                    ..AssembleOptions::synthesis()
                },
            );
            encoder.set_sampling_frequency(config.fs)?;
            decoder.set_sampling_frequency(config.fs)?;
            let mut pipeline = ReconstructionPipeline::new(encoder, decoder, signal);

            let mut trace = TrainTrace {
                param_names: ["enc_f0", "enc_phi0", "dec_f0", "dec_phi0"].map(String::from).to_vec(),
                rows: Vec::with_capacity(config.steps + 1),
            };
            for step in 0..=config.steps {
                let (loss, enc, dec) = pipeline.loss_and_grads(config.norm_gradient)?;
                let e = pipeline.encoder.spec().bases()[0];
                let d = pipeline.decoder.spec().bases()[0];
                trace.rows.push(TraceRow {
                    step,
                    loss,
                    params: vec![e.center_frequency, e.phase_shift, d.center_frequency, d.phase_shift],
                });
                if !loss.is_finite() {
                    return Err(diverged(step, trace));
                }
                if step == config.steps {
                    break;
                }
                let (Some(next_enc), Some(next_dec)) = (
                    proposal(&pipeline.encoder, &enc, config),
                    proposal(&pipeline.decoder, &dec, config),
                ) else {
                    return Err(diverged(step, trace));
                };
                apply(&mut pipeline.encoder, &next_enc)?;
                apply(&mut pipeline.decoder, &next_dec)?;
            }
            Ok(trace)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recovery(init_f: f64, init_phi: f64) -> Objective {
        Objective::FilterRecovery {
            target_f: 1000.0,
            target_phi: 0.4,
            init_f,
            init_phi,
        }
    }

    #[test]
    fn zero_learning_rate_is_static() {
        let config = TrainConfig {
            lr: 0.0,
            steps: 5,
            ..TrainConfig::default()
        };
        let trace = train_toy(&recovery(1100.0, 0.4), &config).unwrap();
        assert_eq!(trace.rows.len(), 6);
        for r in &trace.rows {
            assert_eq!(r.loss, trace.rows[0].loss);
            assert_eq!(r.params, trace.rows[0].params);
        }
    }

    #[test]
    fn optimum_has_zero_loss_and_stays() {
        let config = TrainConfig {
            steps: 3,
            ..TrainConfig::default()
        };
        let trace = train_toy(&recovery(1000.0, 0.4), &config).unwrap();
        for r in &trace.rows {
            assert_eq!(r.loss, 0.0);
            assert_eq!(r.params, vec![1000.0, 0.4]);
        }
    }

    #[test]
    fn non_finite_learning_rate_rejected() {
        let config = TrainConfig {
            lr: f64::NAN,
            ..TrainConfig::default()
        };
        assert!(train_toy(&recovery(1100.0, 0.4), &config).is_err());
    }

    #[test]
    fn diverging_run_reports_trace() {
        // lr · f_scale² overflows on the first update.
        let config = TrainConfig {
            lr: f64::MAX,
            steps: 50,
            ..TrainConfig::default()
        };
        match train_toy(&recovery(1100.0, 0.4), &config) {
            Err(Error::Diverged { step, trace }) => {
                assert_eq!(step, 0);
                assert_eq!(trace.rows.len(), 1);
                assert!(trace.rows[0].loss.is_finite());
            }
            Err(other) => panic!("unexpected error {other}"),
            Ok(_) => panic!("expected divergence"),
        }
    }

    #[test]
    fn reconstruction_improves() {
        let config = TrainConfig {
            lr: 1e-4,
            steps: 3,
            ..TrainConfig::default()
        };
        let trace = train_toy(&Objective::Reconstruction { signal_len: 1600, seed: 3 }, &config).unwrap();
        assert_eq!(trace.rows.len(), 4);
        assert!(trace.final_loss().unwrap() < trace.rows[0].loss);
    }
}
