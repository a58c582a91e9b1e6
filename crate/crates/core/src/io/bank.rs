//! Filterbank JSON.
//!
//! Every channel is listed, partners included, with floating-point fields
//! stored as the hexadecimal image of their 64-bit pattern (`"0x4049000000000000"`
//! for 50.0) so files round-trip bit for bit.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analog::{Bandwidth, Trainable};
use crate::error::{Error, Result};
use crate::filterbank::{BaseFilter, FilterbankSpec};

mod hex_f64 {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn encode(v: f64) -> String {
        format!("0x{:016x}", v.to_bits())
    }

    pub fn decode(s: &str) -> Result<f64, String> {
        let digits = s.strip_prefix("0x").ok_or_else(|| format!("expected 0x-prefixed bits, got {s:?}"))?;
        if digits.len() != 16 {
            return Err(format!("expected 16 hex digits, got {s:?}"));
        }
        u64::from_str_radix(digits, 16).map(f64::from_bits).map_err(|e| e.to_string())
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&encode(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        decode(&String::deserialize(d)?).map_err(D::Error::custom)
    }

    pub mod option {
        use serde::{de::Error, Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(v) => s.serialize_some(&super::encode(*v)),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            Option::<String>::deserialize(d)?
                .map(|s| super::decode(&s).map_err(D::Error::custom))
                .transpose()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct FilterEntry {
    #[serde(with = "hex_f64")]
    f: f64,
    #[serde(with = "hex_f64")]
    phi: f64,
    #[serde(with = "hex_f64")]
    a: f64,
    p: u32,
    /// Fixed bandwidth in Hz; absent when `b = ERB(f)/1.57`.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "hex_f64::option")]
    b: Option<f64>,
    trainable: Trainable,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    center_index: Option<usize>,
}

/// On-disk form of a [`FilterbankSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BankFile {
    pair_offset: Option<usize>,
    filters: Vec<FilterEntry>,
}

impl BankFile {
    pub fn from_spec(spec: &FilterbankSpec) -> Self {
        let filters = (0..spec.n_channels())
            .map(|m| {
                let (i, _) = spec.base_of(m);
                let base = spec.bases()[i];
                let params = spec.channel(m);
                FilterEntry {
                    f: params.center_frequency,
                    phi: params.phase_shift,
                    a: params.amplitude,
                    p: params.order,
                    b: match params.bandwidth {
                        Bandwidth::Erb => None,
                        Bandwidth::Fixed(b) => Some(b),
                    },
                    trainable: params.trainable,
                    center_index: base.center_index,
                }
            })
            .collect();
        BankFile {
            pair_offset: spec.pair_offset(),
            filters,
        }
    }

    pub fn into_spec(self) -> std::result::Result<FilterbankSpec, String> {
        let n = self.filters.len();
        let bases_len = match self.pair_offset {
            None | Some(0) => n,
            Some(p) if 2 * p == n => p,
            Some(p) => return Err(format!("pair_offset {p} does not match {n} filters")),
        };
        let paired = bases_len != n;
        if paired {
            for m in 0..bases_len {
                let (a, b) = (&self.filters[m], &self.filters[m + bases_len]);
                let consistent = a.f.to_bits() == b.f.to_bits()
                    && (a.phi + PI).to_bits() == b.phi.to_bits()
                    && a.a.to_bits() == b.a.to_bits()
                    && a.p == b.p
                    && a.b.map(f64::to_bits) == b.b.map(f64::to_bits)
                    && a.trainable == b.trainable;
                if !consistent {
                    return Err(format!("channel {} is not the phase-reversed partner of channel {m}", m + bases_len));
                }
            }
        }
        let bases = self.filters[..bases_len]
            .iter()
            .map(|e| BaseFilter {
                center_frequency: e.f,
                phase_shift: e.phi,
                amplitude: e.a,
                order: e.p,
                bandwidth: e.b.map_or(Bandwidth::Erb, Bandwidth::Fixed),
                center_index: e.center_index,
                trainable: e.trainable,
            })
            .collect();
        FilterbankSpec::new(bases, paired).map_err(|e| e.to_string())
    }
}

pub fn write_bank(path: impl AsRef<Path>, spec: &FilterbankSpec) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(&BankFile::from_spec(spec))?;
    std::fs::write(path, json + "\n").map_err(super::at(path))?;
    Ok(())
}

pub fn read_bank(path: impl AsRef<Path>) -> Result<FilterbankSpec> {
    let path = path.as_ref();
    let invalid = |reason: String| Error::InvalidFile {
        kind: "bank",
        path: path.to_path_buf(),
        reason,
    };
    let text = std::fs::read_to_string(path).map_err(super::at(path))?;
    let file: BankFile = serde_json::from_str(&text).map_err(|e| invalid(e.to_string()))?;
    file.into_spec().map_err(invalid)
}
