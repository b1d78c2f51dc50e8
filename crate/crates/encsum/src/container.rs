//! Binary tensor checkpoint container shared by the scorer and the ranker.
//!
//! Layout: the magic bytes `ENCSUM1`, a little-endian u64 header length, a
//! JSON header (model metadata plus tensor names, shapes, and byte offsets
//! into the data section), then the tensor data as raw little-endian f32,
//! laid out contiguously in header order.
//!
//! In-memory values are f64; saving narrows to f32 and loading widens back,
//! so a load/save cycle reproduces the file byte for byte.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ranker::{RankingModel, Standardization};
use crate::scorer::{LossCoefficients, ScorerDims, ScorerParams};

const MAGIC: &[u8; 7] = b"ENCSUM1";

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("not a checkpoint: bad magic bytes")]
    BadMagic,
    #[error("malformed checkpoint header: {reason}")]
    Header { reason: String },
    #[error("tensor {name}: {reason}")]
    Shape { name: String, reason: String },
    #[error("checkpoint I/O failed")]
    Io(#[from] std::io::Error),
}

/// One named tensor with its logical shape. `data` length always equals the
/// shape product.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> NamedTensor {
        let name = name.into();
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "tensor {name}: shape does not match data length"
        );
        NamedTensor { name, shape, data }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorContainer {
    /// Model-specific header fields (dimensions, seed, coefficients, ...).
    pub metadata: serde_json::Value,
    pub tensors: Vec<NamedTensor>,
}

#[derive(Serialize, Deserialize)]
struct HeaderTensor {
    name: String,
    shape: Vec<usize>,
    /// Byte offset into the data section.
    offset: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    metadata: serde_json::Value,
    tensors: Vec<HeaderTensor>,
}

impl TensorContainer {
    pub fn new(metadata: serde_json::Value, tensors: Vec<NamedTensor>) -> TensorContainer {
        TensorContainer { metadata, tensors }
    }

    pub fn tensor(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Serializes the whole container; the same bytes go to disk and into
    /// the fingerprint.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut offset = 0u64;
        let header = Header {
            metadata: self.metadata.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| {
                    let h = HeaderTensor { name: t.name.clone(), shape: t.shape.clone(), offset };
                    offset += 4 * t.data.len() as u64;
                    h
                })
                .collect(),
        };
        let header_json = serde_json::to_vec(&header).expect("header is always serializable");
        let mut out = Vec::with_capacity(MAGIC.len() + 8 + header_json.len() + offset as usize);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
        out.extend_from_slice(&header_json);
        for t in &self.tensors {
            for &v in &t.data {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out
    }

    /// Hex SHA-256 of the serialized container.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_bytes());
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }

    pub fn save(&self, writer: &mut impl Write) -> Result<(), ContainerError> {
        writer.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn save_path(&self, path: impl AsRef<Path>) -> Result<(), ContainerError> {
        let mut file = BufWriter::new(File::create(path)?);
        self.save(&mut file)?;
        file.flush()?;
        Ok(())
    }

    pub fn load(reader: &mut impl Read) -> Result<TensorContainer, ContainerError> {
        let mut magic = [0u8; 7];
        reader.read_exact(&mut magic).map_err(|_| ContainerError::BadMagic)?;
        if &magic != MAGIC {
            return Err(ContainerError::BadMagic);
        }
        let mut len_bytes = [0u8; 8];
        reader.read_exact(&mut len_bytes).map_err(|_| ContainerError::Header {
            reason: "truncated before header length".into(),
        })?;
        let header_len = u64::from_le_bytes(len_bytes) as usize;
        let mut header_bytes = vec![0u8; header_len];
        reader.read_exact(&mut header_bytes).map_err(|_| ContainerError::Header {
            reason: "truncated header".into(),
        })?;
        let header: Header = serde_json::from_slice(&header_bytes)
            .map_err(|e| ContainerError::Header { reason: e.to_string() })?;
        let mut data = Vec::new();
        reader.read_to_end(&mut data)?;

        let mut tensors = Vec::with_capacity(header.tensors.len());
        let mut expected_offset = 0u64;
        for ht in &header.tensors {
            if tensors.iter().any(|t: &NamedTensor| t.name == ht.name) {
                return Err(ContainerError::Header {
                    reason: format!("duplicate tensor name {}", ht.name),
                });
            }
            if ht.offset != expected_offset {
                return Err(ContainerError::Shape {
                    name: ht.name.clone(),
                    reason: format!("offset {} does not follow the previous tensor", ht.offset),
                });
            }
            let elements = ht.shape.iter().product::<usize>();
            let bytes = 4 * elements;
            let start = ht.offset as usize;
            if start + bytes > data.len() {
                return Err(ContainerError::Shape {
                    name: ht.name.clone(),
                    reason: format!(
                        "shape {:?} needs {bytes} bytes at offset {start}, file has {}",
                        ht.shape,
                        data.len()
                    ),
                });
            }
            let values = data[start..start + bytes]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect();
            tensors.push(NamedTensor { name: ht.name.clone(), shape: ht.shape.clone(), data: values });
            expected_offset += bytes as u64;
        }
        if expected_offset != data.len() as u64 {
            return Err(ContainerError::Header {
                reason: format!(
                    "data section has {} bytes but tensors account for {expected_offset}",
                    data.len()
                ),
            });
        }
        Ok(TensorContainer { metadata: header.metadata, tensors })
    }

    pub fn load_path(path: impl AsRef<Path>) -> Result<TensorContainer, ContainerError> {
        let mut file = BufReader::new(File::open(path)?);
        TensorContainer::load(&mut file)
    }
}

// ---------------------------------------------------------------------------
// Scorer checkpoint adapter
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ScorerMetadata {
    dims: ScorerDims,
    rng_seed: u64,
    coeffs: LossCoefficients,
}

fn scorer_tensors(params: &ScorerParams) -> Vec<NamedTensor> {
    let dims = params.dims;
    vec![
        NamedTensor::new(
            "conv_kernel",
            vec![dims.filters, dims.embed_dim * dims.window],
            params.conv_kernel.data().to_vec(),
        ),
        NamedTensor::new(
            "mlp_hidden_w",
            vec![dims.hidden, 3 * dims.filters],
            params.mlp_hidden_w.data().to_vec(),
        ),
        NamedTensor::new("mlp_hidden_b", vec![dims.hidden], params.mlp_hidden_b.clone()),
        NamedTensor::new("mlp_out_w", vec![dims.hidden], params.mlp_out_w.clone()),
        NamedTensor::new("mlp_out_b", vec![1], vec![params.mlp_out_b]),
    ]
}

/// Packs trained scorer parameters with their training provenance.
pub fn scorer_checkpoint(
    params: &ScorerParams,
    rng_seed: u64,
    coeffs: &LossCoefficients,
) -> TensorContainer {
    let metadata =
        serde_json::to_value(ScorerMetadata { dims: params.dims, rng_seed, coeffs: *coeffs })
            .expect("scorer metadata is always serializable");
    TensorContainer::new(metadata, scorer_tensors(params))
}

/// Stable identity of a parameter set: the fingerprint of its dimensions
/// plus f32-narrowed tensors. A freshly trained model and the same model
/// reloaded from a checkpoint share one fingerprint; training provenance
/// (seed, coefficients) does not affect it.
pub fn params_fingerprint(params: &ScorerParams) -> String {
    TensorContainer::new(serde_json::json!({ "dims": params.dims }), scorer_tensors(params))
        .fingerprint()
}

/// Rebuilds scorer parameters from a checkpoint, validating every shape
/// against the declared dimensions.
pub fn scorer_from_checkpoint(
    container: &TensorContainer,
) -> Result<(ScorerParams, u64, LossCoefficients), ContainerError> {
    let meta: ScorerMetadata = serde_json::from_value(container.metadata.clone())
        .map_err(|e| ContainerError::Header { reason: format!("scorer metadata: {e}") })?;
    let dims = meta.dims;
    let expect = |name: &str, shape: Vec<usize>| -> Result<&NamedTensor, ContainerError> {
        let t = container.tensor(name).ok_or_else(|| ContainerError::Shape {
            name: name.to_string(),
            reason: "missing".into(),
        })?;
        if t.shape != shape {
            return Err(ContainerError::Shape {
                name: name.to_string(),
                reason: format!("expected shape {shape:?}, found {:?}", t.shape),
            });
        }
        Ok(t)
    };
    let mut params = ScorerParams::zeros(dims);
    let conv = expect("conv_kernel", vec![dims.filters, dims.embed_dim * dims.window])?;
    params.conv_kernel.data_mut().copy_from_slice(&conv.data);
    let hidden_w = expect("mlp_hidden_w", vec![dims.hidden, 3 * dims.filters])?;
    params.mlp_hidden_w.data_mut().copy_from_slice(&hidden_w.data);
    params.mlp_hidden_b.copy_from_slice(&expect("mlp_hidden_b", vec![dims.hidden])?.data);
    params.mlp_out_w.copy_from_slice(&expect("mlp_out_w", vec![dims.hidden])?.data);
    params.mlp_out_b = expect("mlp_out_b", vec![1])?.data[0];
    Ok((params, meta.rng_seed, meta.coeffs))
}

// ---------------------------------------------------------------------------
// Ranker checkpoint adapter
// ---------------------------------------------------------------------------

/// Packs a trained ranking model: weights, bias, and the standardization
/// that scoring depends on, with the regularization constant as metadata.
pub fn ranker_checkpoint(model: &RankingModel) -> TensorContainer {
    let n = model.weights.len();
    TensorContainer::new(
        serde_json::json!({ "reg_c": model.reg_c }),
        vec![
            NamedTensor::new("weights", vec![n], model.weights.clone()),
            NamedTensor::new("bias", vec![1], vec![model.bias]),
            NamedTensor::new("means", vec![n], model.standardization.means.clone()),
            NamedTensor::new("stds", vec![n], model.standardization.stds.clone()),
        ],
    )
}

/// Rebuilds a ranking model, requiring the four tensors to share one
/// feature dimension.
pub fn ranker_from_checkpoint(container: &TensorContainer) -> Result<RankingModel, ContainerError> {
    let reg_c = container
        .metadata
        .get("reg_c")
        .and_then(|v| v.as_f64())
        .ok_or_else(|| ContainerError::Header { reason: "ranker metadata: missing reg_c".into() })?;
    let weights = container.tensor("weights").ok_or_else(|| ContainerError::Shape {
        name: "weights".into(),
        reason: "missing".into(),
    })?;
    let n = weights.data.len();
    let expect = |name: &str, shape: Vec<usize>| -> Result<Vec<f64>, ContainerError> {
        let t = container.tensor(name).ok_or_else(|| ContainerError::Shape {
            name: name.to_string(),
            reason: "missing".into(),
        })?;
        if t.shape != shape {
            return Err(ContainerError::Shape {
                name: name.to_string(),
                reason: format!("expected shape {shape:?}, found {:?}", t.shape),
            });
        }
        Ok(t.data.clone())
    };
    Ok(RankingModel {
        weights: weights.data.clone(),
        bias: expect("bias", vec![1])?[0],
        standardization: Standardization {
            means: expect("means", vec![n])?,
            stds: expect("stds", vec![n])?,
        },
        reg_c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TensorContainer {
        TensorContainer::new(
            serde_json::json!({"kind": "test", "seed": 7}),
            vec![
                NamedTensor::new("a", vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
                NamedTensor::new("b", vec![2], vec![-0.5, 0.25]),
            ],
        )
    }

    #[test]
    fn roundtrip_preserves_everything() {
        let c = sample();
        let bytes = c.to_bytes();
        let loaded = TensorContainer::load(&mut bytes.as_slice()).unwrap();
        assert_eq!(loaded, c);
        assert_eq!(loaded.to_bytes(), bytes);
        assert_eq!(loaded.fingerprint(), c.fingerprint());
    }

    #[test]
    fn narrowing_quantizes_to_f32_once() {
        let c = TensorContainer::new(
            serde_json::json!({}),
            vec![NamedTensor::new("x", vec![1], vec![std::f64::consts::PI])],
        );
        let once = TensorContainer::load(&mut c.to_bytes().as_slice()).unwrap();
        assert_eq!(once.tensors[0].data[0], std::f64::consts::PI as f32 as f64);
        let twice = TensorContainer::load(&mut once.to_bytes().as_slice()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut bytes = sample().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(
            TensorContainer::load(&mut bytes.as_slice()),
            Err(ContainerError::BadMagic)
        ));
    }

    #[test]
    fn truncated_data_is_rejected() {
        let bytes = sample().to_bytes();
        let cut = &bytes[..bytes.len() - 4];
        assert!(matches!(
            TensorContainer::load(&mut &cut[..]),
            Err(ContainerError::Shape { .. })
        ));
    }

    #[test]
    fn trailing_garbage_is_rejected() {
        let mut bytes = sample().to_bytes();
        bytes.extend_from_slice(&[0, 0, 0, 0]);
        assert!(matches!(
            TensorContainer::load(&mut bytes.as_slice()),
            Err(ContainerError::Header { .. })
        ));
    }

    #[test]
    fn file_roundtrip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let c = sample();
        c.save_path(&path).unwrap();
        let first = std::fs::read(&path).unwrap();
        let loaded = TensorContainer::load_path(&path).unwrap();
        loaded.save_path(&path).unwrap();
        let second = std::fs::read(&path).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn scorer_adapter_roundtrips() {
        let dims = ScorerDims { embed_dim: 4, window: 2, filters: 3, hidden: 3 };
        let params = ScorerParams::init(dims, 13);
        let coeffs = LossCoefficients::set_ii(1.0);
        let ckpt = scorer_checkpoint(&params, 13, &coeffs);
        let reloaded = TensorContainer::load(&mut ckpt.to_bytes().as_slice()).unwrap();
        let (restored, seed, restored_coeffs) = scorer_from_checkpoint(&reloaded).unwrap();
        assert_eq!(seed, 13);
        assert_eq!(restored_coeffs, coeffs);
        assert_eq!(restored.dims, dims);
        for (a, b) in restored.tensors().into_iter().zip(params.tensors()) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(*x, *y as f32 as f64);
            }
        }
    }

    #[test]
    fn fingerprint_survives_a_checkpoint_cycle() {
        let dims = ScorerDims { embed_dim: 4, window: 2, filters: 3, hidden: 3 };
        let params = ScorerParams::init(dims, 21);
        let ckpt = scorer_checkpoint(&params, 21, &LossCoefficients::default());
        let reloaded = TensorContainer::load(&mut ckpt.to_bytes().as_slice()).unwrap();
        let (restored, _, _) = scorer_from_checkpoint(&reloaded).unwrap();
        assert_eq!(params_fingerprint(&params), params_fingerprint(&restored));
        let other = ScorerParams::init(dims, 22);
        assert_ne!(params_fingerprint(&params), params_fingerprint(&other));
    }

    #[test]
    fn scorer_adapter_rejects_shape_mismatch() {
        let dims = ScorerDims { embed_dim: 4, window: 2, filters: 3, hidden: 3 };
        let params = ScorerParams::init(dims, 13);
        let mut ckpt = scorer_checkpoint(&params, 13, &LossCoefficients::default());
        ckpt.tensors[0] = NamedTensor::new("conv_kernel", vec![2, 2], vec![0.0; 4]);
        let err = scorer_from_checkpoint(&ckpt).unwrap_err();
        assert!(matches!(err, ContainerError::Shape { .. }));
    }

    fn sample_ranker() -> RankingModel {
        RankingModel {
            weights: vec![0.5, -1.25, 2.0],
            bias: 0.0,
            standardization: Standardization {
                means: vec![1.0, 2.0, 3.0],
                stds: vec![0.5, 1.0, 2.0],
            },
            reg_c: 4.0,
        }
    }

    #[test]
    fn ranker_adapter_roundtrips() {
        let model = sample_ranker();
        let ckpt = ranker_checkpoint(&model);
        let reloaded = TensorContainer::load(&mut ckpt.to_bytes().as_slice()).unwrap();
        let restored = ranker_from_checkpoint(&reloaded).unwrap();
        assert_eq!(restored, model);
    }

    #[test]
    fn ranker_adapter_rejects_mismatched_std_length() {
        let mut ckpt = ranker_checkpoint(&sample_ranker());
        ckpt.tensors[3] = NamedTensor::new("stds", vec![2], vec![1.0, 1.0]);
        assert!(matches!(
            ranker_from_checkpoint(&ckpt).unwrap_err(),
            ContainerError::Shape { name, .. } if name == "stds"
        ));
    }

    #[test]
    fn ranker_adapter_requires_reg_c() {
        let mut ckpt = ranker_checkpoint(&sample_ranker());
        ckpt.metadata = serde_json::json!({});
        assert!(matches!(
            ranker_from_checkpoint(&ckpt).unwrap_err(),
            ContainerError::Header { .. }
        ));
    }
}
