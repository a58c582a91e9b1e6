//! The multi-phase gammatone filterbank: ERB-spaced centers, several phases
//! per center, and phase-reversed partners.
//!
//! The default bank has 48 centers spread uniformly on the ERB-number scale
//! between 50 Hz and 8 kHz. The lowest 28 centers get five phase variants and
//! the remaining 20 get four, giving 220 base channels. Each base channel `m`
//! has a partner `m + 220` with the same center and the phase advanced by π,
//! for 440 channels in total.
//!
//! Only the base channels are stored. A partner has no parameters of its own,
//! so the pairing holds by construction through any number of training steps.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analog::{AnalogFilterParams, Bandwidth, Trainable};
use crate::error::{Error, Result};

/// ERB-number (Cam) of a frequency in Hz: `21.4 · log10(1 + 0.00437 f)`.
pub fn erb_number(f: f64) -> f64 {
    21.4 * (1.0 + 0.00437 * f).log10()
}

/// Inverse of [`erb_number`].
pub fn erb_number_to_hz(e: f64) -> f64 {
    (10f64.powf(e / 21.4) - 1.0) / 0.00437
}

/// `n` frequencies uniformly spaced on the ERB-number scale, both endpoints
/// included.
pub fn erb_space(f_min: f64, f_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(f_min > 0.0 && f_min < f_max && f_max.is_finite()) || n < 2 {
        return Err(Error::InvalidRange { f_min, f_max, n });
    }
    let lo = erb_number(f_min);
    let hi = erb_number(f_max);
    let step = (hi - lo) / (n - 1) as f64;
    let mut out: Vec<f64> = (0..n).map(|i| erb_number_to_hz(lo + step * i as f64)).collect();
    out[0] = f_min;
    out[n - 1] = f_max;
    Ok(out)
}

/// A run of consecutive centers sharing the same number of phase variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CenterGroup {
    pub centers: usize,
    pub phases: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BankLayout {
    pub f_min: f64,
    pub f_max: f64,
    pub groups: Vec<CenterGroup>,
    pub paired: bool,
}

impl Default for BankLayout {
    fn default() -> Self {
        BankLayout {
            f_min: 50.0,
            f_max: 8000.0,
            groups: vec![
                CenterGroup { centers: 28, phases: 5 },
                CenterGroup { centers: 20, phases: 4 },
            ],
            paired: true,
        }
    }
}

impl BankLayout {
    pub fn n_centers(&self) -> usize {
        self.groups.iter().map(|g| g.centers).sum()
    }

    pub fn n_bases(&self) -> usize {
        self.groups.iter().map(|g| g.centers * g.phases).sum()
    }
}

/// How phases are placed among the `K` filters that share a center.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseInit {
    /// `φ_k = kπ/K` for `k = 0..K`.
    Grid,
    /// `φ_k = (k + u_k)π/K` with `u_k ~ U[0, 1)` drawn from a seeded generator.
    Jittered { seed: u64 },
}

/// One independently parameterized filter of the bank.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BaseFilter {
    pub center_frequency: f64,
    pub phase_shift: f64,
    pub amplitude: f64,
    pub order: u32,
    pub bandwidth: Bandwidth,
    pub center_index: Option<usize>,
    pub trainable: Trainable,
}

impl BaseFilter {
    pub fn gammatone(center_frequency: f64, phase_shift: f64) -> Self {
        BaseFilter {
            center_frequency,
            phase_shift,
            amplitude: 1.0,
            order: 2,
            bandwidth: Bandwidth::Erb,
            center_index: None,
            trainable: Trainable::ALL,
        }
    }

    pub fn params(&self) -> AnalogFilterParams {
        AnalogFilterParams {
            amplitude: self.amplitude,
            order: self.order,
            bandwidth: self.bandwidth,
            center_frequency: self.center_frequency,
            phase_shift: self.phase_shift,
            trainable: self.trainable,
        }
    }
}

/// Whether a channel is a base filter or the phase-reversed partner of one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Polarity {
    Base,
    Reversed,
}

impl Polarity {
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Base => 1.0,
            Polarity::Reversed => -1.0,
        }
    }
}

/// Ordered collection of analog filters.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterbankSpec {
    bases: Vec<BaseFilter>,
    paired: bool,
}

impl FilterbankSpec {
    pub fn new(bases: Vec<BaseFilter>, paired: bool) -> Result<Self> {
        for base in &bases {
            base.params().validate()?;
        }
        Ok(FilterbankSpec { bases, paired })
    }

    pub fn from_layout(layout: &BankLayout, phase_init: PhaseInit) -> Result<Self> {
        let centers = erb_space(layout.f_min, layout.f_max, layout.n_centers())?;
        let mut rng = match phase_init {
            PhaseInit::Grid => None,
            PhaseInit::Jittered { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        let mut bases = Vec::with_capacity(layout.n_bases());
        let mut center_index = 0;
        for group in &layout.groups {
            for _ in 0..group.centers {
                let f = centers[center_index];
                for k in 0..group.phases {
                    let offset = rng.as_mut().map_or(0.0, |r| r.gen::<f64>());
                    let phi = (k as f64 + offset) * PI / group.phases as f64;
                    bases.push(BaseFilter {
                        center_index: Some(center_index),
                        ..BaseFilter::gammatone(f, phi)
                    });
                }
                center_index += 1;
            }
        }
        Self::new(bases, layout.paired)
    }

    pub fn bases(&self) -> &[BaseFilter] {
        &self.bases
    }

    pub fn n_bases(&self) -> usize {
        self.bases.len()
    }

    pub fn is_paired(&self) -> bool {
        self.paired
    }

    /// Index distance between a base channel and its partner.
    pub fn pair_offset(&self) -> Option<usize> {
        self.paired.then_some(self.bases.len())
    }

    pub fn n_channels(&self) -> usize {
        if self.paired {
            2 * self.bases.len()
        } else {
            self.bases.len()
        }
    }

    /// Base filter index and polarity of channel `m`.
    pub fn base_of(&self, m: usize) -> (usize, Polarity) {
        let n = self.bases.len();
        assert!(m < self.n_channels(), "channel {m} out of range");
        if m < n {
            (m, Polarity::Base)
        } else {
            (m - n, Polarity::Reversed)
        }
    }

    /// Analog parameters of channel `m`; partners report `φ + π`.
    pub fn channel(&self, m: usize) -> AnalogFilterParams {
        let (i, polarity) = self.base_of(m);
        let params = self.bases[i].params();
        match polarity {
            Polarity::Base => params,
            Polarity::Reversed => params.phase_reversed(),
        }
    }

    pub fn center_frequency(&self, m: usize) -> f64 {
        self.bases[self.base_of(m).0].center_frequency
    }

    /// Moves the trainable parameters of base filter `i`.
    ///
    /// Parameters not flagged trainable are left untouched.
    pub fn set_trainable(&mut self, i: usize, f: f64, phi: f64) -> Result<()> {
        let base = &mut self.bases[i];
        let mut next = *base;
        if base.trainable.f {
            next.center_frequency = f;
        }
        if base.trainable.phi {
            next.phase_shift = phi;
        }
        next.params().validate()?;
        *base = next;
        Ok(())
    }
}

/// The default 440-channel bank.
pub fn init_filterbank(phase_init: PhaseInit) -> FilterbankSpec {
    FilterbankSpec::from_layout(&BankLayout::default(), phase_init).expect("default layout is valid")
}
