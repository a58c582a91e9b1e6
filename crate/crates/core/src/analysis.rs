//! Frequency responses of generated weights and how well they agree across
//! sampling frequencies.

use std::f64::consts::TAU;

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::discretize::{assemble_weights, AssembleOptions, FrameParams, WeightTensor};
use crate::error::{Error, Result};
use crate::filterbank::FilterbankSpec;

/// Floor applied before converting magnitudes to dB.
pub const DB_FLOOR: f64 = -100.0;

pub fn to_db(magnitude: f64) -> f64 {
    (20.0 * magnitude.log10()).max(DB_FLOOR)
}

/// `|Σ_l h[l] e^{-j 2π f l T}|` for one row, `l = 1..=L`.
pub fn magnitude_at(row: &[f64], fs: f64, f: f64) -> f64 {
    let omega = TAU * f / fs;
    let (re, im) = row.iter().enumerate().fold((0.0, 0.0), |(re, im), (i, h)| {
        let (s, c) = (omega * (i + 1) as f64).sin_cos();
        (re + h * c, im - h * s)
    });
    re.hypot(im)
}

/// `n_bins` frequencies evenly spaced over `[0, f_max]`, both ends included.
pub fn uniform_grid(f_max: f64, n_bins: usize) -> Vec<f64> {
    let step = f_max / (n_bins - 1) as f64;
    (0..n_bins).map(|i| if i + 1 == n_bins { f_max } else { i as f64 * step }).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResponseMatrix {
    /// Linear magnitudes, one row per channel.
    pub magnitudes: Array2<f64>,
    pub bin_frequencies: Vec<f64>,
    pub fs: f64,
    pub zeroed: Vec<bool>,
    pub center_frequencies: Vec<f64>,
}

impl ResponseMatrix {
    /// Magnitudes in dB, floored at [`DB_FLOOR`].
    pub fn magnitudes_db(&self) -> Array2<f64> {
        self.magnitudes.mapv(to_db)
    }

    /// Frequency of the largest magnitude of channel `m` (first bin on ties).
    pub fn peak_frequency(&self, m: usize) -> f64 {
        let row = self.magnitudes.row(m);
        let (idx, _) = row
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        self.bin_frequencies[idx]
    }
}

/// Responses of every channel of `weights` at the given frequencies.
pub fn response_on_grid(weights: &WeightTensor, bin_frequencies: Vec<f64>) -> ResponseMatrix {
    let fs = weights.fs();
    let rows: Vec<Vec<f64>> = (0..weights.n_channels())
        .into_par_iter()
        .map(|m| {
            let row = weights.row(m).to_vec();
            bin_frequencies.iter().map(|&f| magnitude_at(&row, fs, f)).collect()
        })
        .collect();
    let mut magnitudes = Array2::zeros((rows.len(), bin_frequencies.len()));
    for (m, row) in rows.into_iter().enumerate() {
        magnitudes.row_mut(m).assign(&ndarray::Array1::from(row));
    }
    ResponseMatrix {
        magnitudes,
        bin_frequencies,
        fs,
        zeroed: weights.channel_meta().iter().map(|c| c.zeroed).collect(),
        center_frequencies: weights.channel_meta().iter().map(|c| c.center_frequency).collect(),
    }
}

/// Responses on an `n_bins`-point uniform grid over `[0, fs/2]`.
pub fn frequency_response(weights: &WeightTensor, n_bins: usize) -> Result<ResponseMatrix> {
    if n_bins < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 bins, got {n_bins}")));
    }
    Ok(response_on_grid(weights, uniform_grid(weights.fs() / 2.0, n_bins)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ChannelComparison {
    Compared {
        max_abs_db: f64,
        mean_abs_db: f64,
        peak_a_hz: f64,
        peak_b_hz: f64,
        peak_diff_hz: f64,
    },
    /// Aliasing reduction zeroed the channel at `fs`.
    Blocked { at_fs: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChannelDeviation {
    pub channel: usize,
    pub center_frequency: f64,
    #[serde(flatten)]
    pub comparison: ChannelComparison,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairReport {
    pub fs_a: f64,
    pub fs_b: f64,
    /// Spacing of the common grid over `[0, min(fs_a, fs_b)/2]`.
    pub bin_width_hz: f64,
    pub channels: Vec<ChannelDeviation>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub n_bins: usize,
    pub db_floor: f64,
    pub pairs: Vec<PairReport>,
}

/// Compares every channel's response for each pair of sampling frequencies on
/// their common band.
pub fn consistency_report(
    spec: &FilterbankSpec,
    fs_list: &[f64],
    n_bins: usize,
    options: &AssembleOptions,
) -> Result<ConsistencyReport> {
    if fs_list.len() < 2 {
        return Err(Error::InvalidParameter("need at least two sampling frequencies".into()));
    }
    if n_bins < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 bins, got {n_bins}")));
    }
    let tensors = fs_list
        .iter()
        .map(|&fs| assemble_weights(spec, &FrameParams::new(fs)?, options))
        .collect::<Result<Vec<_>>>()?;

    let mut pairs = Vec::new();
    for a in 0..tensors.len() {
        for b in a + 1..tensors.len() {
            let (wa, wb) = (&tensors[a], &tensors[b]);
            let grid = uniform_grid(wa.fs().min(wb.fs()) / 2.0, n_bins);
            let bin_width_hz = grid[1] - grid[0];
            let ra = response_on_grid(wa, grid.clone());
            let rb = response_on_grid(wb, grid);
            let (da, db) = (ra.magnitudes_db(), rb.magnitudes_db());
            let channels = (0..spec.n_channels())
                .map(|m| {
                    let comparison = if ra.zeroed[m] || rb.zeroed[m] {
                        let at_fs = if ra.zeroed[m] && rb.zeroed[m] {
                            wa.fs().min(wb.fs())
                        } else if ra.zeroed[m] {
                            wa.fs()
                        } else {
                            wb.fs()
                        };
                        ChannelComparison::Blocked { at_fs }
                    } else {
                        let dev: Vec<f64> = da.row(m).iter().zip(db.row(m)).map(|(x, y)| (x - y).abs()).collect();
                        let (peak_a_hz, peak_b_hz) = (ra.peak_frequency(m), rb.peak_frequency(m));
                        ChannelComparison::Compared {
                            max_abs_db: dev.iter().cloned().fold(0.0, f64::max),
                            mean_abs_db: dev.iter().sum::<f64>() / dev.len() as f64,
                            peak_a_hz,
                            peak_b_hz,
                            peak_diff_hz: (peak_a_hz - peak_b_hz).abs(),
                        }
                    };
                    ChannelDeviation {
                        channel: m,
                        center_frequency: spec.center_frequency(m),
                        comparison,
                    }
                })
                .collect();
            pairs.push(PairReport {
                fs_a: wa.fs(),
                fs_b: wb.fs(),
                bin_width_hz,
                channels,
            });
        }
    }
    Ok(ConsistencyReport {
        n_bins,
        db_floor: DB_FLOOR,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{ChannelMeta, Orientation};
    use crate::filterbank::{init_filterbank, BaseFilter, PhaseInit};
    use ndarray::Array3;

    fn tensor_from_row(row: &[f64], fs: f64) -> WeightTensor {
        let frame = FrameParams {
            fs,
            period: 1.0 / fs,
            kernel_size: row.len(),
            stride: 1,
        };
        let data = Array3::from_shape_vec((1, 1, row.len()), row.to_vec()).unwrap();
        WeightTensor::from_parts(
            data,
            frame,
            Orientation::Analysis,
            false,
            None,
            vec![ChannelMeta {
                center_frequency: 0.0,
                zeroed: false,
            }],
        )
        .unwrap()
    }

    #[test]
    fn single_tap_is_flat() {
        let mut row = vec![0.0; 16];
        row[0] = 1.0;
        let r = frequency_response(&tensor_from_row(&row, 16000.0), 64).unwrap();
        assert_eq!(r.bin_frequencies[0], 0.0);
        assert_eq!(*r.bin_frequencies.last().unwrap(), 8000.0);
        for v in r.magnitudes.iter() {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn reversal_preserves_magnitude() {
        let row: Vec<f64> = (0..40).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
        let rev: Vec<f64> = row.iter().rev().cloned().collect();
        let a = frequency_response(&tensor_from_row(&row, 8000.0), 100).unwrap();
        let b = frequency_response(&tensor_from_row(&rev, 8000.0), 100).unwrap();
        for (x, y) in a.magnitudes.iter().zip(b.magnitudes.iter()) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn zeroed_rows_have_zero_response() {
        let spec = FilterbankSpec::new(vec![BaseFilter::gammatone(5000.0, 0.0)], true).unwrap();
        let w = assemble_weights(&spec, &FrameParams::new(8000.0).unwrap(), &AssembleOptions::analysis()).unwrap();
        let r = frequency_response(&w, 32).unwrap();
        assert!(r.magnitudes.iter().all(|v| *v == 0.0));
        assert!(r.magnitudes_db().iter().all(|v| *v == DB_FLOOR));
        assert!(frequency_response(&w, 1).is_err());
    }

    #[test]
    fn peak_near_center() {
        // Dense-grid maximization of the same sum as the oracle.
        let spec = FilterbankSpec::new(vec![BaseFilter::gammatone(1000.0, 0.0)], false).unwrap();
        let w = assemble_weights(&spec, &FrameParams::new(16000.0).unwrap(), &AssembleOptions::analysis()).unwrap();
        let r = frequency_response(&w, 512).unwrap();
        let bin = r.bin_frequencies[1];
        let peak = r.peak_frequency(0);
        assert!((peak - 1000.0).abs() <= 2.0 * bin, "{peak}");
        let row = w.row(0).to_vec();
        let dense = (0..=80_000)
            .map(|i| i as f64 * 0.1)
            .fold((0.0, 0.0), |(bf, bv), f| {
                let v = magnitude_at(&row, 16000.0, f);
                if v > bv {
                    (f, v)
                } else {
                    (bf, bv)
                }
            })
            .0;
        assert!((peak - dense).abs() <= bin, "{peak} vs {dense}");
    }

    #[test]
    fn identical_rates_have_no_deviation() {
        let bank = init_filterbank(PhaseInit::Grid);
        let report = consistency_report(&bank, &[16000.0, 16000.0], 64, &AssembleOptions::analysis()).unwrap();
        assert_eq!(report.pairs.len(), 1);
        for c in &report.pairs[0].channels {
            match c.comparison {
                ChannelComparison::Compared {
                    max_abs_db,
                    mean_abs_db,
                    peak_diff_hz,
                    ..
                } => assert_eq!((max_abs_db, mean_abs_db, peak_diff_hz), (0.0, 0.0, 0.0)),
                ChannelComparison::Blocked { at_fs } => {
                    assert_eq!(at_fs, 16000.0);
                    assert!(c.center_frequency >= 8000.0);
                }
            }
        }
    }

    #[test]
    fn blocked_channels_at_8k() {
        let bank = init_filterbank(PhaseInit::Grid);
        let report = consistency_report(&bank, &[8000.0, 16000.0], 64, &AssembleOptions::analysis()).unwrap();
        for c in &report.pairs[0].channels {
            let blocked = matches!(c.comparison, ChannelComparison::Blocked { at_fs } if at_fs == 8000.0);
            assert_eq!(blocked, c.center_frequency >= 4000.0, "channel {}", c.channel);
        }
        assert!(consistency_report(&bank, &[8000.0], 64, &AssembleOptions::analysis()).is_err());
    }
}
