//! Sampling-frequency-independent gammatone filterbank layers.
//!
//! Filters are defined in continuous time by a handful of parameters per
//! channel and discretized on demand for whatever sampling frequency the
//! input arrives at. The same trained parameters therefore serve 8 kHz and
//! 48 kHz audio alike.
//!
//! ```
//! use sfi_core::{init_filterbank, PhaseInit, SfiConv};
//!
//! let mut encoder = SfiConv::new(init_filterbank(PhaseInit::Grid));
//! let frame = *encoder.set_sampling_frequency(16_000.0).unwrap();
//! assert_eq!((frame.kernel_size, frame.stride), (80, 40));
//! let latent = encoder.encode(&vec![0.1; 800]).unwrap();
//! assert_eq!(latent.n_channels(), 440);
//! ```

pub mod analog;
pub mod analysis;
pub mod cli;
pub mod discretize;
pub mod error;
pub mod filterbank;
pub mod grad;
pub mod io;
pub mod layers;

pub use analog::{AnalogFilterParams, Bandwidth, Trainable};
pub use analysis::{consistency_report, frequency_response, ConsistencyReport, ResponseMatrix};
pub use discretize::{assemble_weights, frame_params, AssembleOptions, FrameParams, Normalization, WeightTensor};
pub use error::{Error, Result};
pub use filterbank::{init_filterbank, BaseFilter, FilterbankSpec, PhaseInit};
pub use grad::{backprop_filter_params, gradient_check, si_snr, train_toy, NormGradient};
pub use layers::{LatentRepresentation, SfiConv, SfiConvTranspose, SfiLayer};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/analog-filters.md")]
    mod analog_filters {}
    #[doc = include_str!("../../../book/src/impulse-invariance.md")]
    mod impulse_invariance {}
    #[doc = include_str!("../../../book/src/filterbank.md")]
    mod filterbank {}
    #[doc = include_str!("../../../book/src/layers.md")]
    mod layers {}
    #[doc = include_str!("../../../book/src/gradients.md")]
    mod gradients {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
