//! Continuous-time multi-phase gammatone filters.
//!
//! A gammatone impulse response is
//!
//! ```text
//! g(t) = a · t^(p-1) · exp(-2π b t) · cos(2π f t + φ)
//! ```
//!
//! with amplitude `a`, integer order `p`, bandwidth `b` (Hz), center frequency
//! `f` (Hz) and phase shift `φ` (radians). Because `g` lives in continuous time
//! it carries no notion of a sampling rate; the [`discretize`](crate::discretize)
//! module turns it into taps for whatever rate the signal arrives at.
//!
//! Bandwidth normally follows the equivalent rectangular bandwidth rule
//! `b = ERB(f) / 1.57`, in which case it moves with `f` during training and the
//! derivative with respect to `f` includes the `db/df` term.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constant term of the ERB formula, in Hz.
pub const ERB_OFFSET_HZ: f64 = 24.7;
/// `ERB(f) = ERB_OFFSET_HZ + f / ERB_DIVISOR`.
pub const ERB_DIVISOR: f64 = 9.265;
/// `b = ERB(f) / BANDWIDTH_DIVISOR`.
pub const BANDWIDTH_DIVISOR: f64 = 1.57;
/// `db/df` when the bandwidth follows the ERB rule.
pub const BANDWIDTH_SLOPE: f64 = 1.0 / (ERB_DIVISOR * BANDWIDTH_DIVISOR);

fn check_frequency(f: f64) -> Result<()> {
    if f.is_finite() && f >= 0.0 {
        Ok(())
    } else {
        Err(Error::NegativeFrequency(f))
    }
}

/// Equivalent rectangular bandwidth of the auditory filter centered at `f` Hz.
pub fn erb(f: f64) -> Result<f64> {
    check_frequency(f)?;
    Ok(ERB_OFFSET_HZ + f / ERB_DIVISOR)
}

/// Gammatone bandwidth parameter `b = ERB(f) / 1.57`.
pub fn bandwidth_from_f(f: f64) -> Result<f64> {
    Ok(erb(f)? / BANDWIDTH_DIVISOR)
}

/// How the bandwidth `b` of a filter is determined.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Bandwidth {
    /// `b = ERB(f) / 1.57`, recomputed whenever `f` changes.
    Erb,
    /// A constant bandwidth in Hz, independent of `f`.
    Fixed(f64),
}

/// Which parameters a training loop is allowed to move.
///
/// Only `f` and `φ` can ever be trainable; amplitude, order and bandwidth are
/// structural.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trainable {
    pub f: bool,
    pub phi: bool,
}

impl Trainable {
    pub const ALL: Trainable = Trainable { f: true, phi: true };
    pub const NONE: Trainable = Trainable { f: false, phi: false };
}

impl Default for Trainable {
    fn default() -> Self {
        Trainable::ALL
    }
}

/// Parameters of one continuous-time gammatone filter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalogFilterParams {
    pub amplitude: f64,
    pub order: u32,
    pub bandwidth: Bandwidth,
    pub center_frequency: f64,
    pub phase_shift: f64,
    pub trainable: Trainable,
}

/// Partial derivatives of `g(t)` with respect to the trainable parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterGradient {
    pub d_f: f64,
    pub d_phi: f64,
}

impl AnalogFilterParams {
    /// Builds and validates a filter.
    pub fn new(
        amplitude: f64,
        order: u32,
        bandwidth: Bandwidth,
        center_frequency: f64,
        phase_shift: f64,
    ) -> Result<Self> {
        let params = AnalogFilterParams {
            amplitude,
            order,
            bandwidth,
            center_frequency,
            phase_shift,
            trainable: Trainable::ALL,
        };
        params.validate()?;
        Ok(params)
    }

    /// The multi-phase gammatone default: `a = 1`, `p = 2`, ERB bandwidth.
    pub fn gammatone(center_frequency: f64, phase_shift: f64) -> Result<Self> {
        Self::new(1.0, 2, Bandwidth::Erb, center_frequency, phase_shift)
    }

    pub fn with_trainable(mut self, trainable: Trainable) -> Self {
        self.trainable = trainable;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_frequency(self.center_frequency)?;
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "amplitude must be positive, got {}",
                self.amplitude
            )));
        }
        if self.order < 1 {
            return Err(Error::InvalidParameter("order must be at least 1".into()));
        }
        if !self.phase_shift.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "phase shift must be finite, got {}",
                self.phase_shift
            )));
        }
        if let Bandwidth::Fixed(b) = self.bandwidth {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "bandwidth must be positive, got {b}"
                )));
            }
        }
        Ok(())
    }

    /// Current bandwidth `b` in Hz.
    pub fn bandwidth_hz(&self) -> f64 {
        match self.bandwidth {
            Bandwidth::Erb => (ERB_OFFSET_HZ + self.center_frequency / ERB_DIVISOR) / BANDWIDTH_DIVISOR,
            Bandwidth::Fixed(b) => b,
        }
    }

    /// `db/df` for the current bandwidth rule.
    pub fn bandwidth_slope(&self) -> f64 {
        match self.bandwidth {
            Bandwidth::Erb => BANDWIDTH_SLOPE,
            Bandwidth::Fixed(_) => 0.0,
        }
    }

    /// `a · t^(p-1) · exp(-2π b t)`.
    pub fn envelope(&self, t: f64) -> f64 {
        self.amplitude * t.powi(self.order as i32 - 1) * (-TAU * self.bandwidth_hz() * t).exp()
    }

    // 2πft + φ with whole cycles removed before scaling by 2π; subtracting the
    // nearest integer is exact, so only the rounding of f·t survives.
    fn carrier_phase(&self, t: f64) -> f64 {
        let cycles = self.center_frequency * t;
        TAU * (cycles - cycles.round()) + self.phase_shift
    }

    /// Evaluates the impulse response at `t` seconds.
    pub fn eval(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0, "impulse response is defined for t >= 0");
        self.envelope(t) * self.carrier_phase(t).cos()
    }

    /// Evaluates `g(l / fs)`, the value at sample index `l`.
    ///
    /// Agrees with [`eval`](Self::eval) but carries the product `f · l` and the
    /// division by `fs` with their rounding errors, so the carrier phase is
    /// accurate to a few ulps of its fractional part whatever `l` is.
    pub fn eval_sample(&self, l: usize, fs: f64) -> f64 {
        let l = l as f64;
        let p = self.center_frequency * l;
        let p_err = self.center_frequency.mul_add(l, -p);
        let q = p / fs;
        let q_err = (-q).mul_add(fs, p);
        let frac = (q - q.round()) + (q_err + p_err) / fs;
        self.envelope(l / fs) * (TAU * frac + self.phase_shift).cos()
    }

    /// Evaluates `(∂g/∂f, ∂g/∂φ)` at `t` seconds.
    ///
    /// With the ERB rule the bandwidth is differentiated through, giving
    /// `∂g/∂f = env · (-2πt sin(θ) - 2πt (db/df) cos(θ))`.
    pub fn grad(&self, t: f64) -> FilterGradient {
        debug_assert!(t >= 0.0, "impulse response is defined for t >= 0");
        let env = self.envelope(t);
        let (sin, cos) = self.carrier_phase(t).sin_cos();
        let two_pi_t = TAU * t;
        FilterGradient {
            d_f: env * (-two_pi_t * sin - two_pi_t * self.bandwidth_slope() * cos),
            d_phi: -env * sin,
        }
    }

    /// The same filter with its phase advanced by π.
    pub fn phase_reversed(&self) -> Self {
        AnalogFilterParams {
            phase_shift: self.phase_shift + PI,
            ..*self
        }
    }
}

/// Free-function form of [`AnalogFilterParams::eval`].
pub fn eval_g(params: &AnalogFilterParams, t: f64) -> f64 {
    params.eval(t)
}

/// Free-function form of [`AnalogFilterParams::grad`].
pub fn grad_g(params: &AnalogFilterParams, t: f64) -> FilterGradient {
    params.grad(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn erb_values() {
        assert_eq!(erb(0.0).unwrap(), 24.7);
        // 40-digit reference values.
        assert!(rel(erb(1000.0).unwrap(), 132.633_081_489_476_52) < 1e-15);
        assert!(rel(erb(8000.0).unwrap(), 888.164_651_915_812_2) < 1e-15);
        assert!(matches!(erb(-1.0), Err(Error::NegativeFrequency(_))));
        assert!(erb(f64::NAN).is_err());
    }

    #[test]
    fn bandwidth_values() {
        assert!(rel(bandwidth_from_f(0.0).unwrap(), 15.732_484_076_433_12) < 1e-15);
        assert!(rel(bandwidth_from_f(1000.0).unwrap(), 84.479_669_738_520_08) < 1e-15);
        assert!(bandwidth_from_f(-0.5).is_err());
        let mut prev = bandwidth_from_f(0.0).unwrap();
        for i in 1..2000 {
            let b = bandwidth_from_f(i as f64 * 7.3).unwrap();
            assert!(b > prev);
            prev = b;
        }
    }

    #[test]
    fn eval_reference_point() {
        let g = AnalogFilterParams::gammatone(1000.0, 0.0).unwrap();
        let v = g.eval(1.0 / 16000.0);
        assert!(rel(v, 5.585_828_599_496_475e-5) < 1e-14, "{v}");
    }

    #[test]
    fn eval_special_cases() {
        let g = AnalogFilterParams::gammatone(440.0, 1.3).unwrap();
        assert_eq!(g.eval(0.0), 0.0);
        let gd = g.grad(0.0);
        assert_eq!((gd.d_f, gd.d_phi), (0.0, 0.0));

        let flat = AnalogFilterParams::new(1.0, 1, Bandwidth::Fixed(30.0), 0.0, 0.0).unwrap();
        for t in [0.0, 1e-3, 0.01, 0.2] {
            assert_eq!(flat.eval(t), (-TAU * 30.0 * t).exp());
        }
    }

    #[test]
    fn phase_reversal_negates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let g = AnalogFilterParams::gammatone(rng.gen_range(0.0..8000.0), rng.gen_range(0.0..PI)).unwrap();
            let r = g.phase_reversed();
            let t = rng.gen_range(0.0..0.01);
            let scale = g.envelope(t);
            assert!((g.eval(t) + r.eval(t)).abs() <= 1e-14 * scale);
            assert!((g.grad(t).d_phi + r.grad(t).d_phi).abs() <= 1e-14 * scale);
        }
    }

    #[test]
    fn sample_evaluation_agrees_with_time_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let g = AnalogFilterParams::gammatone(rng.gen_range(0.0..20000.0), rng.gen_range(-PI..PI)).unwrap();
            let fs = rng.gen_range(8000.0..96000.0);
            let l = rng.gen_range(1..2000);
            let t = l as f64 / fs;
            // `eval` loses phase in proportion to the number of elapsed cycles.
            let scale = g.envelope(t) * (1.0 + g.center_frequency * t);
            assert!((g.eval_sample(l, fs) - g.eval(t)).abs() <= 1e-14 * scale);
        }
        // 16 kHz, f = 1000 Hz: 1/16 cycle per sample, so sample 4 sits on the
        // first zero crossing of the cosine.
        let g = AnalogFilterParams::gammatone(1000.0, 0.0).unwrap();
        assert!(g.eval_sample(4, 16000.0).abs() <= 1e-16 * g.envelope(4.0 / 16000.0));
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(AnalogFilterParams::new(0.0, 2, Bandwidth::Erb, 100.0, 0.0).is_err());
        assert!(AnalogFilterParams::new(1.0, 0, Bandwidth::Erb, 100.0, 0.0).is_err());
        assert!(AnalogFilterParams::new(1.0, 2, Bandwidth::Fixed(-3.0), 100.0, 0.0).is_err());
        assert!(AnalogFilterParams::new(1.0, 2, Bandwidth::Erb, -100.0, 0.0).is_err());
    }

    // Five-point central stencil; the step is 1e-4·max(1,|f|) for f and 1e-4
    // for φ.
    fn central(fun: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (-fun(x + 2.0 * h) + 8.0 * fun(x + h) - 8.0 * fun(x - h) + fun(x - 2.0 * h)) / (12.0 * h)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut worst: f64 = 0.0;
        for draw in 0..100 {
            let bandwidth = if draw % 4 == 3 {
                Bandwidth::Fixed(rng.gen_range(10.0..400.0))
            } else {
                Bandwidth::Erb
            };
            let g = AnalogFilterParams::new(
                rng.gen_range(0.5..2.0),
                rng.gen_range(1..5),
                bandwidth,
                rng.gen_range(20.0..8000.0),
                rng.gen_range(0.0..TAU),
            )
            .unwrap();
            for _ in 0..10 {
                let t = rng.gen_range(0.0..0.01);
                let analytic = g.grad(t);
                let hf = 1e-4 * g.center_frequency.abs().max(1.0);
                let fd_f = central(
                    |f| AnalogFilterParams { center_frequency: f, ..g }.eval(t),
                    g.center_frequency,
                    hf,
                );
                let fd_phi = central(
                    |p| AnalogFilterParams { phase_shift: p, ..g }.eval(t),
                    g.phase_shift,
                    1e-4,
                );
                // Both derivatives pass through zero as the carrier oscillates,
                // so errors are measured against the magnitude of their
                // envelopes.
                let env = g.envelope(t);
                let scale_f = env * TAU * t * (1.0 + g.bandwidth_slope());
                let scale_phi = env;
                if scale_f > 0.0 {
                    worst = worst.max((analytic.d_f - fd_f).abs() / scale_f);
                }
                if scale_phi > 0.0 {
                    worst = worst.max((analytic.d_phi - fd_phi).abs() / scale_phi);
                }
            }
        }
        assert!(worst < 1e-6, "worst relative error {worst}");
    }
}
