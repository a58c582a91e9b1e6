use std::path::Path;

use crate::error::{Error, Result};

/// Per-channel samples in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<Vec<f64>>,
    pub fs: f64,
}

impl AudioBuffer {
    pub fn new(samples: Vec<Vec<f64>>, fs: f64) -> Result<Self> {
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::InvalidSamplingFrequency(fs));
        }
        if let Some(first) = samples.first() {
            if let Some(bad) = samples.iter().find(|c| c.len() != first.len()) {
                return Err(Error::LengthMismatch(first.len(), bad.len()));
            }
        }
        Ok(AudioBuffer { samples, fs })
    }

    pub fn channels(&self) -> usize {
        self.samples.len()
    }

    pub fn len(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitDepth {
    Pcm16,
    Float32,
}

fn map_hound(err: hound::Error) -> Error {
    match err {
        // The file is already open, so read failures mean a short or corrupt header.
        hound::Error::IoError(e) => Error::MalformedWav(e.to_string()),
        hound::Error::FormatError(msg) => Error::MalformedWav(msg.to_string()),
        hound::Error::Unsupported => Error::UnsupportedEncoding("format not supported by the reader".into()),
        other => Error::UnsupportedEncoding(other.to_string()),
    }
}

/// Reads 16-bit PCM or 32-bit float WAV, mono or stereo.
///
/// Integer samples are scaled by `1/32768`.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let file = std::io::BufReader::new(std::fs::File::open(path).map_err(super::at(path))?);
    let mut reader = hound::WavReader::new(file).map_err(map_hound)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if !(1..=2).contains(&channels) {
        return Err(Error::UnsupportedEncoding(format!("{channels} channels")));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(map_hound)?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(map_hound)?,
        (format, bits) => {
            return Err(Error::UnsupportedEncoding(format!("{bits}-bit {format:?}")));
        }
    };
    let mut samples = vec![Vec::with_capacity(interleaved.len() / channels); channels];
    for frame in interleaved.chunks_exact(channels) {
        for (c, v) in frame.iter().enumerate() {
            samples[c].push(*v);
        }
    }
    AudioBuffer::new(samples, spec.sample_rate as f64)
}

/// Writes the buffer, clipping samples to `[-1, 1]` first.
pub fn write_wav(path: impl AsRef<Path>, buffer: &AudioBuffer, depth: BitDepth) -> Result<()> {
    let channels = buffer.channels();
    if !(1..=2).contains(&channels) {
        return Err(Error::UnsupportedEncoding(format!("{channels} channels")));
    }
    if buffer.fs.fract() != 0.0 || buffer.fs > u32::MAX as f64 {
        return Err(Error::UnsupportedEncoding(format!("sample rate {} Hz", buffer.fs)));
    }
    let spec = hound::WavSpec {
        channels: channels as u16,
        sample_rate: buffer.fs as u32,
        bits_per_sample: match depth {
            BitDepth::Pcm16 => 16,
            BitDepth::Float32 => 32,
        },
        sample_format: match depth {
            BitDepth::Pcm16 => hound::SampleFormat::Int,
            BitDepth::Float32 => hound::SampleFormat::Float,
        },
    };
    let path = path.as_ref();
    let write_err = |e: hound::Error| match e {
        hound::Error::IoError(e) => super::at(path)(e),
        other => map_hound(other),
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(write_err)?;
    for i in 0..buffer.len() {
        for channel in &buffer.samples {
            let v = channel[i].clamp(-1.0, 1.0);
            match depth {
                BitDepth::Pcm16 => writer
                    .write_sample((v * 32768.0).round().clamp(-32768.0, 32767.0) as i16)
                    .map_err(write_err)?,
                BitDepth::Float32 => writer.write_sample(v as f32).map_err(write_err)?,
            }
        }
    }
    writer.finalize().map_err(write_err)
}
