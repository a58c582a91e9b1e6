//! Command-line front end. [`run`] parses arguments, dispatches and maps any
//! error to a nonzero exit code.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{consistency_report, frequency_response};
use crate::discretize::{assemble_weights, AssembleOptions, FrameParams, Normalization, REFERENCE_FS};
use crate::error::{Error, Result};
use crate::filterbank::{init_filterbank, PhaseInit};
use crate::grad::{gradient_check, si_snr, train_toy, GradCheckConfig, Objective, TrainConfig};
use crate::io::{
    read_bank, read_wav, write_bank, write_consistency_json, write_response_csv, write_trace_csv, write_wav,
    write_weights, AudioBuffer, BitDepth,
};
use crate::layers::{SfiConv, SfiConvTranspose};

#[derive(Parser, Debug)]
#[command(name = "sfi", version, about = "Sampling-frequency-independent gammatone filterbanks")]
struct Cli {
    /// Worker threads for per-channel parallelism.
    #[arg(long, global = true, env = "SFI_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the default 440-channel bank.
    InitBank {
        #[arg(long)]
        out: PathBuf,
        /// Jitter phases within their grid cells using this seed.
        #[arg(long)]
        jitter_seed: Option<u64>,
    },
    /// Discretize a bank at one sampling frequency.
    GenWeights {
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        fs: f64,
        #[arg(long)]
        out: PathBuf,
        /// Emit decoder (transposed-convolution) weights.
        #[arg(long)]
        decoder: bool,
        #[command(flatten)]
        weights: WeightArgs,
    },
    /// Frequency responses at several rates plus a cross-rate consistency report.
    Response {
        #[arg(long)]
        bank: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        fs: Vec<f64>,
        #[arg(long, default_value_t = 512)]
        bins: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        weights: WeightArgs,
    },
    /// Encode, apply an identity mask and decode a WAV file at its own rate.
    Passthrough {
        #[arg(long)]
        bank: PathBuf,
        /// Decoder bank; defaults to the encoder bank.
        #[arg(long)]
        decoder_bank: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = DepthArg::Float32)]
        bit_depth: DepthArg,
        #[command(flatten)]
        weights: WeightArgs,
    },
    /// Compare analytic and finite-difference gradients.
    CheckGrad {
        #[arg(long, default_value_t = 50)]
        configs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Exit nonzero when the worst relative error exceeds this.
        #[arg(long, default_value_t = 1e-5)]
        tolerance: f64,
    },
    /// Run a small gradient-descent problem and write its loss trace.
    TrainToy {
        #[arg(long, value_enum, default_value_t = ObjectiveArg::Recovery)]
        objective: ObjectiveArg,
        #[arg(long, default_value_t = TrainConfig::default().lr)]
        lr: f64,
        #[arg(long, default_value_t = 500)]
        steps: usize,
        #[arg(long, default_value_t = 16000.0)]
        fs: f64,
        /// Target center frequency for the recovery objective.
        #[arg(long, default_value_t = 1000.0)]
        target_f: f64,
        /// Relative detuning of the initial center frequency.
        #[arg(long, default_value_t = 0.1)]
        detune: f64,
        /// Noise length in samples for the reconstruction objective.
        #[arg(long, default_value_t = 1600)]
        signal_len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Clone, Copy)]
struct WeightArgs {
    #[arg(long)]
    no_aliasing_reduction: bool,
    #[arg(long, value_enum, default_value_t = NormArg::RateScaled)]
    normalization: NormArg,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum NormArg {
    RateScaled,
    Unit,
    Off,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum DepthArg {
    Pcm16,
    Float32,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ObjectiveArg {
    Recovery,
    Reconstruction,
}

impl WeightArgs {
    fn options(&self, decoder: bool) -> AssembleOptions {
        let base = if decoder {
            AssembleOptions::synthesis()
        } else {
            AssembleOptions::analysis()
        };
        AssembleOptions {
            aliasing_reduction: !self.no_aliasing_reduction,
            normalization: match self.normalization {
                NormArg::RateScaled => Normalization::RateScaled {
                    reference_fs: REFERENCE_FS,
                },
                NormArg::Unit => Normalization::Unit,
                NormArg::Off => Normalization::Off,
            },
            ..base
        }
    }
}

/// Parses `argv` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(n) = cli.threads {
        // The global pool can only be configured once per process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::InitBank { out, jitter_seed } => {
            let init = jitter_seed.map_or(PhaseInit::Grid, |seed| PhaseInit::Jittered { seed });
            let spec = init_filterbank(init);
            write_bank(&out, &spec)?;
            println!("wrote {} channels to {}", spec.n_channels(), out.display());
        }
        Command::GenWeights {
            bank,
            fs,
            out,
            decoder,
            weights,
        } => {
            let spec = read_bank(bank)?;
            let w = assemble_weights(&spec, &FrameParams::new(fs)?, &weights.options(decoder))?;
            let side = write_weights(&out, &w)?;
            let [a, b, c] = w.shape();
            let zeroed = w.channel_meta().iter().filter(|m| m.zeroed).count();
            println!("shape {a}x{b}x{c} stride {} zeroed {zeroed}", w.frame().stride);
            println!("wrote {} and {}", out.display(), side.display());
        }
        Command::Response {
            bank,
            fs,
            bins,
            out,
            report,
            weights,
        } => {
            let spec = read_bank(bank)?;
            let options = weights.options(false);
            let responses = fs
                .iter()
                .map(|&fs| frequency_response(&assemble_weights(&spec, &FrameParams::new(fs)?, &options)?, bins))
                .collect::<Result<Vec<_>>>()?;
            write_response_csv(&out, &responses)?;
            println!("wrote {}", out.display());
            if let Some(path) = report {
                let r = consistency_report(&spec, &fs, bins, &options)?;
                write_consistency_json(&path, &r)?;
                println!("wrote {}", path.display());
            }
        }
        Command::Passthrough {
            bank,
            decoder_bank,
            input,
            output,
            bit_depth,
            weights,
        } => {
            let enc_spec = read_bank(&bank)?;
            let dec_spec = match decoder_bank {
                Some(p) => read_bank(p)?,
                None => enc_spec.clone(),
            };
            let audio = read_wav(&input)?;
            let mut encoder = SfiConv::with_options(enc_spec, weights.options(false));
            let mut decoder = SfiConvTranspose::with_options(dec_spec, weights.options(true));
            encoder.set_sampling_frequency(audio.fs)?;
            decoder.set_sampling_frequency(audio.fs)?;
            let mut channels = Vec::with_capacity(audio.channels());
            for (c, x) in audio.samples.iter().enumerate() {
                let mut y = decoder.decode(&encoder.encode(x)?)?;
                y.resize(x.len(), 0.0);
                println!(
                    "channel {c}: correlation {:.16e} si_snr_db {:.16e}",
                    correlation(x, &y),
                    si_snr(&y, x).unwrap_or(f64::NAN)
                );
                channels.push(y);
            }
            let depth = match bit_depth {
                DepthArg::Pcm16 => BitDepth::Pcm16,
                DepthArg::Float32 => BitDepth::Float32,
            };
            write_wav(&output, &AudioBuffer::new(channels, audio.fs)?, depth)?;
            println!("wrote {}", output.display());
        }
        Command::CheckGrad {
            configs,
            seed,
            tolerance,
        } => {
            let report = gradient_check(&GradCheckConfig {
                configs,
                seed,
                ..GradCheckConfig::default()
            })?;
            println!("configs {} parameters {}", report.configs, report.parameters_checked);
            println!("max_relative_error {:.16e}", report.max_relative_error);
            if report.max_relative_error.is_nan() || report.max_relative_error >= tolerance {
                eprintln!("gradient check exceeded tolerance {tolerance:e}");
                return Ok(1);
            }
        }
        Command::TrainToy {
            objective,
            lr,
            steps,
            fs,
            target_f,
            detune,
            signal_len,
            seed,
            out,
        } => {
            let objective = match objective {
                ObjectiveArg::Recovery => Objective::FilterRecovery {
                    target_f,
                    target_phi: 0.0,
                    init_f: target_f * (1.0 + detune),
                    init_phi: 0.0,
                },
                ObjectiveArg::Reconstruction => Objective::Reconstruction { signal_len, seed },
            };
            let config = TrainConfig {
                lr,
                steps,
                fs,
                ..TrainConfig::default()
            };
            let trace = match train_toy(&objective, &config) {
                Ok(t) => t,
                Err(Error::Diverged { step, trace }) => {
                    write_trace_csv(&out, &trace)?;
                    return Err(Error::Diverged { step, trace });
                }
                Err(e) => return Err(e),
            };
            write_trace_csv(&out, &trace)?;
            let first = trace.rows.first().map_or(f64::NAN, |r| r.loss);
            println!("initial_loss {first:.16e}");
            println!("final_loss {:.16e}", trace.final_loss().unwrap_or(f64::NAN));
            println!("wrote {}", out.display());
        }
    }
    Ok(0)
}

fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    if n == 0.0 {
        return f64::NAN;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}
