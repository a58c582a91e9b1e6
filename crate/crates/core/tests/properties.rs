use proptest::prelude::*;

use sfi_core::discretize::FrameParams;
use sfi_core::filterbank::{init_filterbank, BaseFilter, FilterbankSpec, PhaseInit};
use sfi_core::layers::{SfiConv, SfiConvTranspose};

const RATES: [f64; 5] = [8000.0, 16000.0, 22050.0, 44100.0, 48000.0];

fn small_bank() -> impl Strategy<Value = FilterbankSpec> {
    prop::collection::vec((50.0f64..3900.0, 0.0f64..std::f64::consts::TAU), 1..6)
        .prop_map(|v| FilterbankSpec::new(v.into_iter().map(|(f, p)| BaseFilter::gammatone(f, p)).collect(), true).unwrap())
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-12 * scale.max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encoder_is_linear_before_rectifier(
        spec in small_bank(),
        fs in prop::sample::select(RATES.to_vec()),
        seed_a in prop::collection::vec(-1.0f64..1.0, 600),
        seed_b in prop::collection::vec(-1.0f64..1.0, 600),
        alpha in -3.0f64..3.0,
    ) {
        let mut enc = SfiConv::new(spec);
        let frame = *enc.set_sampling_frequency(fs).unwrap();
        let n = frame.kernel_size + 2 * frame.stride;
        let (x, y) = (&seed_a[..n.min(600)], &seed_b[..n.min(600)]);
        prop_assume!(x.len() >= frame.kernel_size);
        let mix: Vec<f64> = x.iter().zip(y).map(|(a, b)| alpha * a + b).collect();
        let ex = enc.encode_linear(x).unwrap();
        let ey = enc.encode_linear(y).unwrap();
        let em = enc.encode_linear(&mix).unwrap();
        let scale = em.values().iter().chain(ex.values().iter()).fold(1.0f64, |m, v| m.max(v.abs()));
        for ((m, a), b) in em.values().iter().zip(ex.values()).zip(ey.values()) {
            prop_assert!(close(*m, alpha * a + b, scale * (1.0 + alpha.abs())));
        }
    }

    #[test]
    fn frame_count_and_output_length(
        fs in prop::sample::select(RATES.to_vec()),
        len in 0usize..4000,
    ) {
        let mut enc = SfiConv::new(init_filterbank(PhaseInit::Grid));
        let mut dec = SfiConvTranspose::new(init_filterbank(PhaseInit::Grid));
        let frame = *enc.set_sampling_frequency(fs).unwrap();
        dec.set_sampling_frequency(fs).unwrap();
        let x = vec![0.25; len];
        match frame.frame_count(len) {
            None => prop_assert!(enc.encode(&x).is_err()),
            Some(k) => {
                prop_assert_eq!(k, (len - frame.kernel_size) / frame.stride + 1);
                let latent = enc.encode(&x).unwrap();
                prop_assert_eq!(latent.n_frames(), k);
                let y = dec.decode(&latent).unwrap();
                prop_assert_eq!(y.len(), frame.synthesis_len(k));
                prop_assert!(y.len() <= len && len - y.len() < frame.stride);
            }
        }
    }

    #[test]
    fn pairs_are_exact_negations(
        seed in any::<u64>(),
        fs in prop::sample::select(RATES.to_vec()),
    ) {
        let spec = init_filterbank(PhaseInit::Jittered { seed });
        let mut enc = SfiConv::new(spec.clone());
        enc.set_sampling_frequency(fs).unwrap();
        let w = enc.weights().unwrap();
        let p = spec.pair_offset().unwrap();
        for m in 0..p {
            prop_assert_eq!(spec.center_frequency(m), spec.center_frequency(m + p));
            for (a, b) in w.row(m).iter().zip(w.row(m + p).iter()) {
                prop_assert_eq!(*a, -*b);
            }
        }
    }

    #[test]
    fn frame_duration_is_rate_independent(fs in 4000.0f64..192000.0) {
        let frame = FrameParams::new(fs).unwrap();
        prop_assert!((frame.kernel_size as f64 / fs - 0.005).abs() <= 0.5 / fs + 1e-15);
        prop_assert!((frame.stride as f64 / fs - 0.0025).abs() <= 0.5 / fs + 1e-15);
    }
}
