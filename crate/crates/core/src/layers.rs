//! Sampling-frequency-independent convolution layers.
//!
//! [`SfiConv`] is the analysis encoder: a strided valid-mode convolution with
//! one input channel and `N` output channels followed by a rectifier.
//! [`SfiConvTranspose`] is the synthesis decoder: overlap-add of every latent
//! frame scattered through its channel's row.
//!
//! Both layers regenerate their weights from the analog filterbank when the
//! sampling frequency changes and reuse the cached tensor otherwise.

use std::ops::{Deref, DerefMut};

use ndarray::{Array2, Array3, ArrayView2, Axis, Zip};
use rayon::prelude::*;

use crate::discretize::{assemble_weights, AssembleOptions, FrameParams, WeightTensor};
use crate::error::{Error, Result};
use crate::filterbank::FilterbankSpec;
use crate::grad::WeightGradient;

/// State shared by both layer kinds: the analog bank and the cached weights.
#[derive(Clone, Debug)]
pub struct SfiLayer {
    spec: FilterbankSpec,
    options: AssembleOptions,
    cache: Option<WeightTensor>,
    generations: u64,
}

impl SfiLayer {
    pub fn new(spec: FilterbankSpec, options: AssembleOptions) -> Self {
        SfiLayer {
            spec,
            options,
            cache: None,
            generations: 0,
        }
    }

    /// Regenerates the weights for `fs` unless they are already cached.
    pub fn set_sampling_frequency(&mut self, fs: f64) -> Result<&FrameParams> {
        let cached = self.cache.as_ref().map(|w| w.fs());
        if cached != Some(fs) {
            let frame = FrameParams::new(fs)?;
            self.rebuild(frame)?;
        }
        Ok(self.cache.as_ref().expect("cache populated").frame())
    }

    fn rebuild(&mut self, frame: FrameParams) -> Result<()> {
        let mut weights = assemble_weights(&self.spec, &frame, &self.options)?;
        self.generations += 1;
        weights.set_generation(self.generations);
        self.cache = Some(weights);
        Ok(())
    }

    /// Applies `edit` to the analog bank and regenerates the cached weights at
    /// the current rate.
    ///
    /// The bank is left unchanged if either step fails.
    pub fn update_spec<F>(&mut self, edit: F) -> Result<()>
    where
        F: FnOnce(&mut FilterbankSpec) -> Result<()>,
    {
        let previous = self.spec.clone();
        edit(&mut self.spec)?;
        if let Some(frame) = self.cache.as_ref().map(|w| *w.frame()) {
            if let Err(e) = self.rebuild(frame) {
                self.spec = previous;
                return Err(e);
            }
        }
        Ok(())
    }

    /// Number of times weights have been generated.
    pub fn generation(&self) -> u64 {
        self.generations
    }

    pub fn spec(&self) -> &FilterbankSpec {
        &self.spec
    }

    pub fn options(&self) -> &AssembleOptions {
        &self.options
    }

    pub fn weights(&self) -> Result<&WeightTensor> {
        self.cache.as_ref().ok_or(Error::NotConfigured)
    }

    pub fn frame(&self) -> Result<&FrameParams> {
        Ok(self.weights()?.frame())
    }
}

/// `N × K` latent frames together with the frame geometry that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentRepresentation {
    values: Array2<f64>,
    frame: FrameParams,
    rectified: bool,
}

impl LatentRepresentation {
    pub fn new(values: Array2<f64>, frame: FrameParams) -> Self {
        LatentRepresentation {
            values,
            frame,
            rectified: false,
        }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn frame(&self) -> &FrameParams {
        &self.frame
    }

    pub fn n_channels(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_frames(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_rectified(&self) -> bool {
        self.rectified
    }

    pub fn rectify(mut self) -> Self {
        self.values.mapv_inplace(|v| v.max(0.0));
        self.rectified = true;
        self
    }
}

/// Elementwise product of a latent with a mask in `[0, 1]`.
pub fn apply_mask(latent: &LatentRepresentation, mask: ArrayView2<'_, f64>) -> Result<LatentRepresentation> {
    if mask.shape() != latent.values.shape() {
        return Err(Error::ShapeMismatch {
            expected: latent.values.shape().to_vec(),
            got: mask.shape().to_vec(),
        });
    }
    if let Some(bad) = mask.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::MaskOutOfRange(*bad));
    }
    Ok(LatentRepresentation {
        values: &latent.values * &mask,
        frame: latent.frame,
        rectified: latent.rectified,
    })
}

/// Routes `upstream` (gradient w.r.t. the rectified latent) back through the
/// rectifier using the pre-rectifier values in `pre`.
pub fn rectifier_backward(pre: &LatentRepresentation, upstream: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = upstream.to_owned();
    Zip::from(&mut out).and(&pre.values).for_each(|g, &y| {
        if y <= 0.0 {
            *g = 0.0;
        }
    });
    out
}

/// Analysis layer: strided convolution from one waveform to `N` channels.
#[derive(Clone, Debug)]
pub struct SfiConv {
    layer: SfiLayer,
}

impl SfiConv {
    pub fn new(spec: FilterbankSpec) -> Self {
        Self::with_options(spec, AssembleOptions::analysis())
    }

    pub fn with_options(spec: FilterbankSpec, options: AssembleOptions) -> Self {
        SfiConv {
            layer: SfiLayer::new(spec, options),
        }
    }

    /// Pre-rectifier output `y[n, k] = Σ_j w[n, j] · x[kW + j]`.
    pub fn encode_linear(&self, signal: &[f64]) -> Result<LatentRepresentation> {
        let weights = self.layer.weights()?;
        let frame = *weights.frame();
        let frames = frame.frame_count(signal.len()).ok_or(Error::SignalTooShort {
            len: signal.len(),
            kernel_size: frame.kernel_size,
        })?;
        let mut values = Array2::zeros((weights.n_channels(), frames));
        values
            .axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .for_each(|(n, mut out)| {
                if weights.channel_meta()[n].zeroed {
                    return;
                }
                let row = weights.row(n);
                let row = row.as_slice().expect("rows are contiguous");
                for (k, y) in out.iter_mut().enumerate() {
                    let window = &signal[k * frame.stride..k * frame.stride + frame.kernel_size];
                    *y = row.iter().zip(window).map(|(w, x)| w * x).sum();
                }
            });
        Ok(LatentRepresentation::new(values, frame))
    }

    /// Rectified latent representation.
    pub fn encode(&self, signal: &[f64]) -> Result<LatentRepresentation> {
        Ok(self.encode_linear(signal)?.rectify())
    }

    /// Gradient of a loss w.r.t. the stored weights, given the gradient
    /// `upstream` w.r.t. the pre-rectifier latent of `signal`.
    pub fn weight_gradient(&self, signal: &[f64], upstream: ArrayView2<'_, f64>) -> Result<WeightGradient> {
        let weights = self.layer.weights()?;
        let frame = *weights.frame();
        let frames = frame.frame_count(signal.len()).ok_or(Error::SignalTooShort {
            len: signal.len(),
            kernel_size: frame.kernel_size,
        })?;
        let expected = [weights.n_channels(), frames];
        if upstream.shape() != expected {
            return Err(Error::ShapeMismatch {
                expected: expected.to_vec(),
                got: upstream.shape().to_vec(),
            });
        }
        let mut values = Array3::zeros((1, weights.n_channels(), frame.kernel_size));
        values
            .index_axis_mut(Axis(0), 0)
            .axis_iter_mut(Axis(0))
            .into_par_iter()
            .zip(upstream.axis_iter(Axis(0)))
            .for_each(|(mut grad, up)| {
                for (k, g) in up.iter().enumerate() {
                    if *g == 0.0 {
                        continue;
                    }
                    let window = &signal[k * frame.stride..k * frame.stride + frame.kernel_size];
                    grad.iter_mut().zip(window).for_each(|(d, x)| *d += g * x);
                }
            });
        Ok(WeightGradient {
            values,
            generation: weights.generation(),
        })
    }
}

impl Deref for SfiConv {
    type Target = SfiLayer;
    fn deref(&self) -> &SfiLayer {
        &self.layer
    }
}

impl DerefMut for SfiConv {
    fn deref_mut(&mut self) -> &mut SfiLayer {
        &mut self.layer
    }
}

/// Synthesis layer: transposed strided convolution from `N` channels back to
/// one waveform.
#[derive(Clone, Debug)]
pub struct SfiConvTranspose {
    layer: SfiLayer,
}

impl SfiConvTranspose {
    pub fn new(spec: FilterbankSpec) -> Self {
        Self::with_options(spec, AssembleOptions::synthesis())
    }

    pub fn with_options(spec: FilterbankSpec, options: AssembleOptions) -> Self {
        SfiConvTranspose {
            layer: SfiLayer::new(spec, options),
        }
    }

    fn check_latent(&self, latent: &LatentRepresentation) -> Result<&WeightTensor> {
        let weights = self.layer.weights()?;
        if latent.frame != *weights.frame() {
            return Err(Error::FrameMismatch {
                latent: latent.frame.fs,
                layer: weights.fs(),
            });
        }
        if latent.n_channels() != weights.n_channels() {
            return Err(Error::ShapeMismatch {
                expected: vec![weights.n_channels(), latent.n_frames()],
                got: latent.values.shape().to_vec(),
            });
        }
        Ok(weights)
    }

    /// `x̂[kW + j] += y[n, k] · w[n, j]`, output length `(K - 1) W + L`.
    pub fn decode(&self, latent: &LatentRepresentation) -> Result<Vec<f64>> {
        let weights = self.check_latent(latent)?;
        let frame = latent.frame;
        let mut out = vec![0.0; frame.synthesis_len(latent.n_frames())];
        for (n, ys) in latent.values.axis_iter(Axis(0)).enumerate() {
            if weights.channel_meta()[n].zeroed {
                continue;
            }
            let row = weights.row(n);
            for (k, y) in ys.iter().enumerate() {
                if *y == 0.0 {
                    continue;
                }
                let dst = &mut out[k * frame.stride..k * frame.stride + frame.kernel_size];
                dst.iter_mut().zip(row.iter()).for_each(|(o, w)| *o += y * w);
            }
        }
        Ok(out)
    }

    fn check_upstream(&self, latent: &LatentRepresentation, upstream: &[f64]) -> Result<()> {
        let len = latent.frame.synthesis_len(latent.n_frames());
        if upstream.len() != len {
            return Err(Error::LengthMismatch(upstream.len(), len));
        }
        Ok(())
    }

    /// Gradient w.r.t. the stored weights given `upstream = ∂loss/∂x̂`.
    pub fn weight_gradient(&self, latent: &LatentRepresentation, upstream: &[f64]) -> Result<WeightGradient> {
        let weights = self.check_latent(latent)?;
        self.check_upstream(latent, upstream)?;
        let frame = latent.frame;
        let mut values = Array3::zeros((weights.n_channels(), 1, frame.kernel_size));
        values
            .index_axis_mut(Axis(1), 0)
            .axis_iter_mut(Axis(0))
            .into_par_iter()
            .zip(latent.values.axis_iter(Axis(0)))
            .for_each(|(mut grad, ys)| {
                for (k, y) in ys.iter().enumerate() {
                    if *y == 0.0 {
                        continue;
                    }
                    let src = &upstream[k * frame.stride..k * frame.stride + frame.kernel_size];
                    grad.iter_mut().zip(src).for_each(|(d, u)| *d += y * u);
                }
            });
        Ok(WeightGradient {
            values,
            generation: weights.generation(),
        })
    }

    /// Gradient w.r.t. the latent given `upstream = ∂loss/∂x̂`.
    pub fn latent_gradient(&self, latent: &LatentRepresentation, upstream: &[f64]) -> Result<Array2<f64>> {
        let weights = self.check_latent(latent)?;
        self.check_upstream(latent, upstream)?;
        let frame = latent.frame;
        let mut out = Array2::zeros(latent.values.raw_dim());
        out.axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .for_each(|(n, mut grad)| {
                let row = weights.row(n);
                for (k, g) in grad.iter_mut().enumerate() {
                    let src = &upstream[k * frame.stride..k * frame.stride + frame.kernel_size];
                    *g = row.iter().zip(src).map(|(w, u)| w * u).sum();
                }
            });
        Ok(out)
    }
}

impl Deref for SfiConvTranspose {
    type Target = SfiLayer;
    fn deref(&self) -> &SfiLayer {
        &self.layer
    }
}

impl DerefMut for SfiConvTranspose {
    fn deref_mut(&mut self) -> &mut SfiLayer {
        &mut self.layer
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::Normalization;
    use crate::filterbank::{init_filterbank, BaseFilter, PhaseInit};
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn one_channel(f: f64) -> FilterbankSpec {
        FilterbankSpec::new(vec![BaseFilter::gammatone(f, 0.3)], false).unwrap()
    }

    #[test]
    fn weights_are_cached_per_rate() {
        let mut enc = SfiConv::new(init_filterbank(PhaseInit::Grid));
        assert!(matches!(enc.weights(), Err(Error::NotConfigured)));
        enc.set_sampling_frequency(16000.0).unwrap();
        enc.set_sampling_frequency(16000.0).unwrap();
        assert_eq!(enc.generation(), 1);
        assert_eq!(enc.frame().unwrap().kernel_size, 80);
        enc.set_sampling_frequency(32000.0).unwrap();
        assert_eq!(enc.generation(), 2);
        assert_eq!(enc.frame().unwrap().kernel_size, 160);
        assert_eq!(enc.weights().unwrap().generation(), 2);
        assert!(enc.set_sampling_frequency(-1.0).is_err());
        assert_eq!(enc.frame().unwrap().fs, 32000.0);
    }

    #[test]
    fn impulse_probe_reads_one_tap() {
        let mut enc = SfiConv::new(one_channel(1000.0));
        enc.set_sampling_frequency(16000.0).unwrap();
        let mut x = vec![0.0; 80];
        x[79] = 1.0;
        let y = enc.encode_linear(&x).unwrap();
        let w = enc.weights().unwrap().row(0);
        assert_eq!(y.values()[[0, 0]], w[79]);
    }

    #[test]
    fn short_signal_rejected() {
        let mut enc = SfiConv::new(one_channel(1000.0));
        enc.set_sampling_frequency(16000.0).unwrap();
        assert!(matches!(enc.encode(&[0.0; 79]), Err(Error::SignalTooShort { len: 79, kernel_size: 80 })));
    }

    #[test]
    fn rectified_pairs_sum_to_magnitude() {
        let mut enc = SfiConv::new(init_filterbank(PhaseInit::Grid));
        enc.set_sampling_frequency(16000.0).unwrap();
        let x = noise(1000, 1);
        let pre = enc.encode_linear(&x).unwrap();
        let post = pre.clone().rectify();
        for m in 0..220 {
            for k in 0..pre.n_frames() {
                let a = pre.values()[[m, k]];
                assert_eq!(a, -pre.values()[[m + 220, k]]);
                assert_eq!(post.values()[[m, k]] + post.values()[[m + 220, k]], a.abs());
            }
        }
    }

    #[test]
    fn quadrature_tone_response_matches_dft() {
        // Encoding sin and cos of one tone and combining them in quadrature
        // gives the magnitude of each row's DFT at that tone, on every frame.
        let spec = FilterbankSpec::new(
            vec![
                BaseFilter::gammatone(1000.0, 0.0),
                BaseFilter::gammatone(200.0, 0.0),
                BaseFilter::gammatone(5000.0, 0.0),
            ],
            true,
        )
        .unwrap();
        let mut enc = SfiConv::new(spec);
        enc.set_sampling_frequency(16000.0).unwrap();
        let tone = |phase: f64| -> Vec<f64> {
            (0..4000)
                .map(|s| (std::f64::consts::TAU * 1000.0 * s as f64 / 16000.0 + phase).cos())
                .collect()
        };
        let yc = enc.encode_linear(&tone(0.0)).unwrap();
        let ys = enc.encode_linear(&tone(-std::f64::consts::FRAC_PI_2)).unwrap();
        let w = enc.weights().unwrap();
        let expected: Vec<f64> = (0..6)
            .map(|m| crate::analysis::magnitude_at(&w.row(m).to_vec(), 16000.0, 1000.0))
            .collect();
        for m in 0..6 {
            for k in 0..yc.n_frames() {
                let got = yc.values()[[m, k]].hypot(ys.values()[[m, k]]);
                assert!((got - expected[m]).abs() <= 1e-9 * expected[0], "{m} {k} {got} {}", expected[m]);
            }
        }
        assert!(expected[0] > 10.0 * expected[1]);
        assert!(expected[0] > 10.0 * expected[2]);
    }

    #[test]
    fn decode_examples() {
        let spec = one_channel(800.0);
        let mut dec = SfiConvTranspose::new(spec);
        let frame = *dec.set_sampling_frequency(16000.0).unwrap();
        let row = dec.weights().unwrap().row(0).to_vec();

        let single = LatentRepresentation::new(array![[1.0]], frame);
        assert_eq!(dec.decode(&single).unwrap(), row);

        let two = LatentRepresentation::new(array![[1.0, 1.0]], frame);
        let out = dec.decode(&two).unwrap();
        assert_eq!(out.len(), 120);
        for (s, v) in out.iter().enumerate() {
            let a = if s < 80 { row[s] } else { 0.0 };
            let b = if s >= 40 { row[s - 40] } else { 0.0 };
            assert_eq!(*v, a + b);
        }

        let other = LatentRepresentation::new(array![[1.0]], FrameParams::new(8000.0).unwrap());
        assert!(matches!(dec.decode(&other), Err(Error::FrameMismatch { .. })));
        let wide = LatentRepresentation::new(array![[1.0], [1.0]], frame);
        assert!(matches!(dec.decode(&wide), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn mask_examples() {
        let frame = FrameParams::new(16000.0).unwrap();
        let latent = LatentRepresentation::new(array![[1.0, 2.0], [3.0, 4.0]], frame);
        let ones = Array2::ones((2, 2));
        assert_eq!(apply_mask(&latent, ones.view()).unwrap(), latent);
        let zeros = Array2::zeros((2, 2));
        assert!(apply_mask(&latent, zeros.view()).unwrap().values().iter().all(|v| *v == 0.0));

        let m = array![[0.25, 1.0], [0.5, 0.0]];
        let c = 1.0 - &m;
        let a = apply_mask(&latent, m.view()).unwrap();
        let b = apply_mask(&latent, c.view()).unwrap();
        assert_eq!(a.values() + b.values(), *latent.values());

        assert!(matches!(apply_mask(&latent, array![[1.5, 0.0], [0.0, 0.0]].view()), Err(Error::MaskOutOfRange(_))));
        assert!(matches!(apply_mask(&latent, Array2::ones((2, 3)).view()), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn shift_by_stride_shifts_one_frame() {
        let mut enc = SfiConv::new(init_filterbank(PhaseInit::Grid));
        enc.set_sampling_frequency(16000.0).unwrap();
        let x = noise(2000, 4);
        let shifted = &x[40..];
        let a = enc.encode_linear(&x).unwrap();
        let b = enc.encode_linear(shifted).unwrap();
        for k in 0..b.n_frames() {
            assert_eq!(a.values().column(k + 1), b.values().column(k));
        }
    }

    #[test]
    fn update_spec_regenerates() {
        let mut enc = SfiConv::with_options(
            one_channel(1000.0),
            AssembleOptions {
                normalization: Normalization::Unit,
                ..AssembleOptions::analysis()
            },
        );
        enc.update_spec(|s| s.set_trainable(0, 1100.0, 0.0)).unwrap();
        assert_eq!(enc.generation(), 0);
        enc.set_sampling_frequency(16000.0).unwrap();
        let before = enc.weights().unwrap().row(0).to_owned();
        enc.update_spec(|s| s.set_trainable(0, 1200.0, 0.1)).unwrap();
        assert_eq!(enc.generation(), 2);
        assert_ne!(enc.weights().unwrap().row(0), before);
        assert!(enc.update_spec(|s| s.set_trainable(0, -5.0, 0.1)).is_err());
        assert_eq!(enc.spec().bases()[0].center_frequency, 1200.0);
    }
}
