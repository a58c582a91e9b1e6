//! Backpropagation from weight-space gradients to the analog parameters.
//!
//! Each stored tap is a smooth function of its filter's center frequency and
//! phase: `u = s · h / ‖h‖` with `h[l] = T · g(lT)`. The chain rule runs
//! through the normalization, then through `g`, and finally sums the
//! contributions of a base channel and its phase-reversed partner, whose row
//! is `-u`.

mod check;
mod loss;
mod train;

pub use check::{gradient_check, relative_error, GradCheckConfig, GradCheckReport};
pub use loss::{si_snr, si_snr_with_grad, SI_SNR_CEILING_DB, SI_SNR_FLOOR_DB};
pub use train::{train_toy, Objective, ReconstructionPipeline, TraceRow, TrainConfig, TrainTrace};

use ndarray::{Array3, ArrayView1};
use rayon::prelude::*;

use crate::analog::AnalogFilterParams;
use crate::discretize::{impulse_invariant, FrameParams, Normalization};
use crate::error::{Error, Result};
use crate::layers::SfiLayer;

/// Gradient of a loss w.r.t. a layer's stored weights, tagged with the
/// generation of the weights it was computed against.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightGradient {
    pub values: Array3<f64>,
    pub generation: u64,
}

/// Whether derivatives pass through the row normalization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NormGradient {
    #[default]
    Propagate,
    /// Treat `‖h‖` as a constant.
    Detach,
}

/// `∂u/∂f` and `∂u/∂φ` for every tap, in generation order (`l = 1..=L`).
#[derive(Clone, Debug, PartialEq)]
pub struct WeightJacobian {
    pub d_f: Vec<f64>,
    pub d_phi: Vec<f64>,
}

/// Loss gradients for every base filter of a bank.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientBundle {
    pub d_loss_d_f: Vec<f64>,
    pub d_loss_d_phi: Vec<f64>,
    pub generation: u64,
}

impl GradientBundle {
    pub fn zeros(n: usize, generation: u64) -> Self {
        GradientBundle {
            d_loss_d_f: vec![0.0; n],
            d_loss_d_phi: vec![0.0; n],
            generation,
        }
    }
}

/// Jacobian of the generated taps of one filter w.r.t. `(f, φ)`.
pub fn weight_jacobian(
    params: &AnalogFilterParams,
    frame: &FrameParams,
    normalization: Normalization,
    mode: NormGradient,
) -> Result<WeightJacobian> {
    jacobian_for(0, params, frame, normalization, mode)
}

fn jacobian_for(
    index: usize,
    params: &AnalogFilterParams,
    frame: &FrameParams,
    normalization: Normalization,
    mode: NormGradient,
) -> Result<WeightJacobian> {
    let (mut d_f, mut d_phi): (Vec<f64>, Vec<f64>) = (1..=frame.kernel_size)
        .map(|l| {
            let g = params.grad(l as f64 / frame.fs);
            (frame.period * g.d_f, frame.period * g.d_phi)
        })
        .unzip();
    let Some(target) = normalization.target_norm(frame.fs) else {
        return Ok(WeightJacobian { d_f, d_phi });
    };
    let h = impulse_invariant(params, frame);
    let norm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::DegenerateFilter(index));
    }
    let scale = target / norm;
    for d in [&mut d_f, &mut d_phi] {
        let radial = match mode {
            NormGradient::Propagate => h.iter().zip(d.iter()).map(|(a, b)| a * b).sum::<f64>() / (norm * norm),
            NormGradient::Detach => 0.0,
        };
        d.iter_mut().zip(&h).for_each(|(v, hv)| *v = scale * (*v - hv * radial));
    }
    Ok(WeightJacobian { d_f, d_phi })
}

fn dot_in_generation_order(stored: ArrayView1<'_, f64>, jac: &[f64], reversed: bool) -> f64 {
    if reversed {
        stored.iter().rev().zip(jac).map(|(g, j)| g * j).sum()
    } else {
        stored.iter().zip(jac).map(|(g, j)| g * j).sum()
    }
}

/// Chains a weight-space gradient back to every base filter's `(f, φ)`.
///
/// A phase-reversed partner's row is the negation of its base row, so its
/// upstream gradient enters with a minus sign. Zeroed channels and
/// non-trainable parameters receive exactly zero.
pub fn backprop_filter_params(upstream: &WeightGradient, layer: &SfiLayer, mode: NormGradient) -> Result<GradientBundle> {
    let weights = layer.weights()?;
    if upstream.generation != weights.generation() {
        return Err(Error::StaleGeneration {
            got: upstream.generation,
            current: weights.generation(),
        });
    }
    if upstream.values.shape() != weights.data().shape() {
        return Err(Error::ShapeMismatch {
            expected: weights.data().shape().to_vec(),
            got: upstream.values.shape().to_vec(),
        });
    }
    let spec = layer.spec();
    let frame = *weights.frame();
    let normalization = layer.options().normalization;
    let reversed = weights.is_time_reversed();
    let offset = spec.pair_offset();
    // Same view of `upstream` as `weights.row` gives of the weights.
    let row = |m: usize| match weights.orientation() {
        crate::discretize::Orientation::Analysis => upstream.values.slice(ndarray::s![0, m, ..]),
        crate::discretize::Orientation::Synthesis => upstream.values.slice(ndarray::s![m, 0, ..]),
    };

    let grads: Vec<(f64, f64)> = spec
        .bases()
        .par_iter()
        .enumerate()
        .map(|(i, base)| {
            if weights.channel_meta()[i].zeroed || !(base.trainable.f || base.trainable.phi) {
                return Ok((0.0, 0.0));
            }
            let jac = jacobian_for(i, &base.params(), &frame, normalization, mode)?;
            let mut d_f = dot_in_generation_order(row(i), &jac.d_f, reversed);
            let mut d_phi = dot_in_generation_order(row(i), &jac.d_phi, reversed);
            if let Some(p) = offset {
                d_f -= dot_in_generation_order(row(i + p), &jac.d_f, reversed);
                d_phi -= dot_in_generation_order(row(i + p), &jac.d_phi, reversed);
            }
            Ok((
                if base.trainable.f { d_f } else { 0.0 },
                if base.trainable.phi { d_phi } else { 0.0 },
            ))
        })
        .collect::<Result<_>>()?;

    let (d_loss_d_f, d_loss_d_phi) = grads.into_iter().unzip();
    Ok(GradientBundle {
        d_loss_d_f,
        d_loss_d_phi,
        generation: weights.generation(),
    })
}
