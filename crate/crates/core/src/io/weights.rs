//! Raw weight tensors: little-endian `f64` in `(in, out, tap)` order, with a
//! JSON sidecar at the same path and a `.json` extension.

use std::path::{Path, PathBuf};

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::discretize::{ChannelMeta, FrameParams, Orientation, WeightTensor};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSidecar {
    pub shape: [usize; 3],
    pub fs: f64,
    pub kernel_size: usize,
    pub stride: usize,
    pub orientation: Orientation,
    pub time_reversed: bool,
    pub row_norm: Option<f64>,
    pub channel_meta: Vec<ChannelMeta>,
}

impl WeightSidecar {
    pub fn from_tensor(w: &WeightTensor) -> Self {
        WeightSidecar {
            shape: w.shape(),
            fs: w.fs(),
            kernel_size: w.frame().kernel_size,
            stride: w.frame().stride,
            orientation: w.orientation(),
            time_reversed: w.is_time_reversed(),
            row_norm: w.row_norm(),
            channel_meta: w.channel_meta().to_vec(),
        }
    }
}

pub fn sidecar_path(path: impl AsRef<Path>) -> PathBuf {
    path.as_ref().with_extension("json")
}

/// Writes the tensor and its sidecar; returns the sidecar path.
pub fn write_weights(path: impl AsRef<Path>, weights: &WeightTensor) -> Result<PathBuf> {
    let path = path.as_ref();
    let side = sidecar_path(path);
    if side == path {
        return Err(Error::InvalidParameter(format!(
            "weight file {} would collide with its sidecar",
            path.display()
        )));
    }
    let bytes: Vec<u8> = weights.data().iter().flat_map(|v| v.to_le_bytes()).collect();
    std::fs::write(path, bytes).map_err(super::at(path))?;
    let json = serde_json::to_string_pretty(&WeightSidecar::from_tensor(weights))? + "\n";
    std::fs::write(&side, json).map_err(super::at(&side))?;
    Ok(side)
}

pub fn read_weights(path: impl AsRef<Path>) -> Result<WeightTensor> {
    let path = path.as_ref();
    let invalid = |reason: String| Error::InvalidFile {
        kind: "weights",
        path: path.to_path_buf(),
        reason,
    };
    let side_path = sidecar_path(path);
    let side: WeightSidecar =
        serde_json::from_str(&std::fs::read_to_string(&side_path).map_err(super::at(&side_path))?)
            .map_err(|e| invalid(format!("sidecar: {e}")))?;
    let bytes = std::fs::read(path).map_err(super::at(path))?;
    let count: usize = side.shape.iter().product();
    if bytes.len() != 8 * count {
        return Err(invalid(format!("expected {} bytes, found {}", 8 * count, bytes.len())));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let data = Array3::from_shape_vec(side.shape, values).map_err(|e| invalid(e.to_string()))?;
    if !(side.fs.is_finite() && side.fs > 0.0) || side.kernel_size == 0 || side.stride == 0 || side.stride > side.kernel_size {
        return Err(invalid(format!(
            "invalid frame: fs {}, kernel_size {}, stride {}",
            side.fs, side.kernel_size, side.stride
        )));
    }
    let frame = FrameParams {
        fs: side.fs,
        period: 1.0 / side.fs,
        kernel_size: side.kernel_size,
        stride: side.stride,
    };
    WeightTensor::from_parts(data, frame, side.orientation, side.time_reversed, side.row_norm, side.channel_meta)
        .map_err(|e| invalid(e.to_string()))
}
