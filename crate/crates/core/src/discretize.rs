//! Impulse-invariant discretization and weight assembly.
//!
//! Given a sampling frequency `fs` (period `T = 1/fs`), each analog filter is
//! sampled as `h[l] = T · g(l T)` for `l = 1..=L`. The taps of every channel
//! are then optionally zeroed (aliasing reduction), normalized, time-reversed
//! and stacked into a weight tensor.

use ndarray::{s, Array3, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analog::AnalogFilterParams;
use crate::error::{Error, Result};
use crate::filterbank::{FilterbankSpec, Polarity};

/// Frame length held constant in continuous time, in microseconds.
pub const FRAME_LENGTH_US: u32 = 5_000;
/// Frame shift held constant in continuous time, in microseconds.
pub const FRAME_SHIFT_US: u32 = 2_500;
/// Rate at which [`Normalization::RateScaled`] yields unit-norm rows by default.
pub const REFERENCE_FS: f64 = 16_000.0;

/// Sampling frequency together with the kernel size and stride derived from it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameParams {
    pub fs: f64,
    pub period: f64,
    pub kernel_size: usize,
    pub stride: usize,
}

impl FrameParams {
    /// Frame geometry for `fs` with the default 5.0 ms / 2.5 ms frame.
    pub fn new(fs: f64) -> Result<Self> {
        Self::with_durations(fs, FRAME_LENGTH_US, FRAME_SHIFT_US)
    }

    /// Frame geometry for `fs` with arbitrary frame length and shift.
    ///
    /// Sample counts are rounded half away from zero.
    pub fn with_durations(fs: f64, length_us: u32, shift_us: u32) -> Result<Self> {
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::InvalidSamplingFrequency(fs));
        }
        let samples = |us: u32| (fs * us as f64 / 1e6).round() as usize;
        let kernel_size = samples(length_us);
        let stride = samples(shift_us);
        if kernel_size == 0 || stride == 0 || stride > kernel_size {
            return Err(Error::DegenerateFrame {
                fs,
                kernel_size,
                stride,
            });
        }
        Ok(FrameParams {
            fs,
            period: 1.0 / fs,
            kernel_size,
            stride,
        })
    }

    /// Number of valid frames for a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> Option<usize> {
        (len >= self.kernel_size).then(|| (len - self.kernel_size) / self.stride + 1)
    }

    /// Output length of the transposed convolution for `frames` frames.
    pub fn synthesis_len(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            (frames - 1) * self.stride + self.kernel_size
        }
    }
}

pub fn frame_params(fs: f64) -> Result<FrameParams> {
    FrameParams::new(fs)
}

/// Samples `h[l] = T · g(l T)` for `l = 1..=L`.
///
/// The first tap sits at `t = T`; `t = 0` is never sampled.
pub fn impulse_invariant(params: &AnalogFilterParams, frame: &FrameParams) -> Vec<f64> {
    (1..=frame.kernel_size)
        .map(|l| frame.period * params.eval_sample(l, frame.fs))
        .collect()
}

/// Row normalization applied during weight generation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Normalization {
    /// Keep the raw `T · g(lT)` taps.
    Off,
    /// Every non-zeroed row has unit l2 norm at every sampling frequency.
    Unit,
    /// Every non-zeroed row has l2 norm `sqrt(reference_fs / fs)`.
    ///
    /// Rows are unit-norm at `reference_fs`, and the norm shrinks as the
    /// number of taps grows, so a row's frequency response keeps the same
    /// gain at every rate.
    RateScaled { reference_fs: f64 },
}

impl Normalization {
    /// The l2 norm every non-zeroed row is scaled to at `fs`, if any.
    pub fn target_norm(&self, fs: f64) -> Option<f64> {
        match *self {
            Normalization::Off => None,
            Normalization::Unit => Some(1.0),
            Normalization::RateScaled { reference_fs } => Some((reference_fs / fs).sqrt()),
        }
    }
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization::RateScaled {
            reference_fs: REFERENCE_FS,
        }
    }
}

/// Layout of the stacked weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    /// `1 × N × L`: one input channel fanning out to `N` filters (encoder).
    Analysis,
    /// `N × 1 × L`: `N` latent channels summed into one output (decoder).
    Synthesis,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssembleOptions {
    pub aliasing_reduction: bool,
    pub normalization: Normalization,
    /// Store `w[l] = h[L+1-l]` so a cross-correlation with the row filters by `h`.
    pub time_reverse: bool,
    pub orientation: Orientation,
}

impl AssembleOptions {
    /// Encoder defaults: aliasing reduction, rate-scaled norm, time-reversed rows.
    pub fn analysis() -> Self {
        AssembleOptions {
            aliasing_reduction: true,
            normalization: Normalization::default(),
            time_reverse: true,
            orientation: Orientation::Analysis,
        }
    }

    /// Decoder defaults: the transposed convolution scatters `h` itself.
    pub fn synthesis() -> Self {
        AssembleOptions {
            time_reverse: false,
            orientation: Orientation::Synthesis,
            ..Self::analysis()
        }
    }
}

impl Default for AssembleOptions {
    fn default() -> Self {
        Self::analysis()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelMeta {
    pub center_frequency: f64,
    pub zeroed: bool,
}

/// Discretized weights for one sampling frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightTensor {
    data: Array3<f64>,
    frame: FrameParams,
    orientation: Orientation,
    time_reversed: bool,
    row_norm: Option<f64>,
    channel_meta: Vec<ChannelMeta>,
    generation: u64,
}

impl WeightTensor {
    /// Wraps raw data, checking that its shape agrees with the metadata.
    pub fn from_parts(
        data: Array3<f64>,
        frame: FrameParams,
        orientation: Orientation,
        time_reversed: bool,
        row_norm: Option<f64>,
        channel_meta: Vec<ChannelMeta>,
    ) -> Result<Self> {
        let n = channel_meta.len();
        let expected = match orientation {
            Orientation::Analysis => [1, n, frame.kernel_size],
            Orientation::Synthesis => [n, 1, frame.kernel_size],
        };
        if data.shape() != expected {
            return Err(Error::ShapeMismatch {
                expected: expected.to_vec(),
                got: data.shape().to_vec(),
            });
        }
        Ok(WeightTensor {
            data,
            frame,
            orientation,
            time_reversed,
            row_norm,
            channel_meta,
            generation: 0,
        })
    }

    /// `(M_in, M_out, L)`.
    pub fn shape(&self) -> [usize; 3] {
        let s = self.data.shape();
        [s[0], s[1], s[2]]
    }

    pub fn n_channels(&self) -> usize {
        self.channel_meta.len()
    }

    pub fn taps(&self) -> usize {
        self.frame.kernel_size
    }

    pub fn fs(&self) -> f64 {
        self.frame.fs
    }

    pub fn frame(&self) -> &FrameParams {
        &self.frame
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn is_time_reversed(&self) -> bool {
        self.time_reversed
    }

    /// Norm every non-zeroed row was scaled to, or `None` without normalization.
    pub fn row_norm(&self) -> Option<f64> {
        self.row_norm
    }

    pub fn channel_meta(&self) -> &[ChannelMeta] {
        &self.channel_meta
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub(crate) fn set_generation(&mut self, generation: u64) {
        self.generation = generation;
    }

    /// Stored taps of filter channel `m`.
    pub fn row(&self, m: usize) -> ArrayView1<'_, f64> {
        match self.orientation {
            Orientation::Analysis => self.data.slice(s![0, m, ..]),
            Orientation::Synthesis => self.data.slice(s![m, 0, ..]),
        }
    }

    fn zero_row(&mut self, m: usize) {
        match self.orientation {
            Orientation::Analysis => self.data.slice_mut(s![0, m, ..]).fill(0.0),
            Orientation::Synthesis => self.data.slice_mut(s![m, 0, ..]).fill(0.0),
        }
        self.channel_meta[m].zeroed = true;
    }

    /// Zeroes every channel whose center frequency is at or above Nyquist.
    ///
    /// Other channels are left bitwise unchanged.
    pub fn reduce_aliasing(mut self) -> Self {
        let fs = self.frame.fs;
        for m in 0..self.n_channels() {
            if is_aliased(self.channel_meta[m].center_frequency, fs) {
                self.zero_row(m);
            }
        }
        self
    }
}

/// `true` when a filter centered at `f` Hz lies at or above the Nyquist frequency.
pub fn is_aliased(f: f64, fs: f64) -> bool {
    f >= fs / 2.0
}

/// Free-function form of [`WeightTensor::reduce_aliasing`].
pub fn reduce_aliasing(tensor: WeightTensor) -> WeightTensor {
    tensor.reduce_aliasing()
}

/// Scales `taps` in place to l2 norm `target`, returning the norm before scaling.
pub(crate) fn normalize_row(taps: &mut [f64], target: f64) -> Option<f64> {
    let norm = taps.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return None;
    }
    let scale = target / norm;
    taps.iter_mut().for_each(|v| *v *= scale);
    Some(norm)
}

/// Generates the weight tensor of `spec` at the rate described by `frame`.
///
/// Phase-reversed partners are stored as the exact negation of their base row.
pub fn assemble_weights(spec: &FilterbankSpec, frame: &FrameParams, options: &AssembleOptions) -> Result<WeightTensor> {
    if spec.n_bases() == 0 {
        return Err(Error::EmptyBank);
    }
    let target = options.normalization.target_norm(frame.fs);
    let bases: Vec<Option<Vec<f64>>> = spec
        .bases()
        .par_iter()
        .enumerate()
        .map(|(i, base)| {
            if options.aliasing_reduction && is_aliased(base.center_frequency, frame.fs) {
                return Ok(None);
            }
            let mut taps = impulse_invariant(&base.params(), frame);
            if let Some(target) = target {
                normalize_row(&mut taps, target).ok_or(Error::DegenerateFilter(i))?;
            }
            if options.time_reverse {
                taps.reverse();
            }
            Ok(Some(taps))
        })
        .collect::<Result<_>>()?;

    let n = spec.n_channels();
    let taps = frame.kernel_size;
    let shape = match options.orientation {
        Orientation::Analysis => (1, n, taps),
        Orientation::Synthesis => (n, 1, taps),
    };
    let mut data = Array3::zeros(shape);
    let mut meta = Vec::with_capacity(n);
    for m in 0..n {
        let (base_index, polarity) = spec.base_of(m);
        let row = &bases[base_index];
        meta.push(ChannelMeta {
            center_frequency: spec.bases()[base_index].center_frequency,
            zeroed: row.is_none(),
        });
        if let Some(row) = row {
            let mut dst = match options.orientation {
                Orientation::Analysis => data.slice_mut(s![0, m, ..]),
                Orientation::Synthesis => data.slice_mut(s![m, 0, ..]),
            };
            match polarity {
                Polarity::Base => dst.iter_mut().zip(row).for_each(|(d, v)| *d = *v),
                Polarity::Reversed => dst.iter_mut().zip(row).for_each(|(d, v)| *d = -*v),
            }
        }
    }
    WeightTensor::from_parts(data, *frame, options.orientation, options.time_reverse, target, meta)
}
