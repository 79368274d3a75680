//! Checkpoint layout:
//!
//! ```text
//! "RLV1" | u32 LE metadata length | metadata (UTF-8 JSON)
//!        | parameters as f32 LE, in declared order
//!        | optimizer accumulators as f64 LE (first moments, then second)
//!        | window matrices, real rows only, as f32 LE
//!        | CRC32 of everything above, u32 LE
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::hyperparams::Hyperparameters;
use super::ClassifierModel;
use crate::error::{Error, Result};
use crate::label::RelevanceLabel;
use crate::nn::{OptimizerKind, OptimizerState, Tensor2};
use crate::text::SentenceMatrix;
use crate::trainer::{ExampleSource, LabeledExample, TrainingWindow};

pub const CHECKPOINT_MAGIC: &[u8; 3] = b"RLV";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ParamMeta {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct OptimizerMeta {
    kind: OptimizerKind,
    t: u64,
    first: usize,
    second: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct ExampleMeta {
    id: String,
    tokens: Vec<String>,
    label: RelevanceLabel,
    source: ExampleSource,
    length: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct WindowMeta {
    capacity: usize,
    examples: Vec<ExampleMeta>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Metadata {
    format_version: u32,
    hyperparameters: Hyperparameters,
    n_trained: u64,
    submissions: u64,
    created_at: u64,
    updated_at: u64,
    params: Vec<ParamMeta>,
    optimizer: OptimizerMeta,
    window: WindowMeta,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::Checkpoint(format!("truncated payload at byte {} (wanted {n} more)", self.pos))
        })?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        Ok(self
            .take(n * 4)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self
            .take(n * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

impl ClassifierModel {
    /// Serializes the model into checkpoint bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let params = self.net.params();
        let meta = Metadata {
            format_version: CHECKPOINT_VERSION,
            hyperparameters: self.hp.clone(),
            n_trained: self.n_trained,
            submissions: self.submissions,
            created_at: self.created_at,
            updated_at: self.updated_at,
            params: self
                .net
                .param_names()
                .iter()
                .zip(&params)
                .map(|(name, p)| ParamMeta {
                    name: name.to_string(),
                    rows: p.rows(),
                    cols: p.cols(),
                })
                .collect(),
            optimizer: OptimizerMeta {
                kind: self.optimizer.kind,
                t: self.optimizer.t,
                first: self.optimizer.first.len(),
                second: self.optimizer.second.len(),
            },
            window: WindowMeta {
                capacity: self.window.capacity(),
                examples: self
                    .window
                    .iter()
                    .map(|ex| ExampleMeta {
                        id: ex.id.clone(),
                        tokens: ex.tokens.clone(),
                        label: ex.label,
                        source: ex.source,
                        length: ex.matrix.length(),
                    })
                    .collect(),
            },
        };
        let meta = serde_json::to_vec(&meta).expect("metadata serializes");

        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.push(b'0' + CHECKPOINT_VERSION as u8);
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(&meta);
        for p in &params {
            for &v in p.as_slice() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        for t in self.optimizer.first.iter().chain(&self.optimizer.second) {
            for &v in t.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        for ex in self.window.iter() {
            for &v in ex.matrix.real_rows() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..3] != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
        }
        let version = match bytes[3] {
            d @ b'0'..=b'9' => u32::from(d - b'0'),
            other => return Err(Error::Checkpoint(format!("bad version byte {other:#04x}"))),
        };
        if version > CHECKPOINT_VERSION {
            return Err(Error::CheckpointVersion {
                found: version,
                supported: CHECKPOINT_VERSION,
            });
        }
        if bytes.len() < 12 {
            return Err(Error::Checkpoint("truncated header".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }

        let mut r = Reader { buf: body, pos: 4 };
        let meta_len = u32::from_le_bytes(r.take(4)?.try_into().unwrap()) as usize;
        let meta: Metadata = serde_json::from_slice(r.take(meta_len)?)
            .map_err(|e| Error::Checkpoint(format!("metadata: {e}")))?;
        if meta.format_version != version {
            return Err(Error::Checkpoint(format!(
                "metadata version {} disagrees with header version {version}",
                meta.format_version
            )));
        }

        let hp = meta.hyperparameters;
        let mut model = ClassifierModel::build(hp.clone())?;
        let expected = model.net.params();
        if expected.len() != meta.params.len() {
            return Err(Error::Checkpoint("parameter count does not match architecture".into()));
        }
        let mut values = Vec::with_capacity(meta.params.len());
        for (pm, p) in meta.params.iter().zip(&expected) {
            if (pm.rows, pm.cols) != p.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter {} is {}x{}, architecture needs {:?}",
                    pm.name,
                    pm.rows,
                    pm.cols,
                    p.shape()
                )));
            }
            let data = r.f32s(pm.rows * pm.cols)?.into_iter().map(f64::from).collect();
            values.push(Tensor2::from_vec(pm.rows, pm.cols, data)?);
        }
        let shapes: Vec<(usize, usize)> = expected.iter().map(|p| p.shape()).collect();
        drop(expected);
        model.net.set_params(&values)?;

        let read_group = |r: &mut Reader, n: usize| -> Result<Vec<Tensor2>> {
            if n != 0 && n != shapes.len() {
                return Err(Error::Checkpoint("optimizer accumulator count mismatch".into()));
            }
            shapes
                .iter()
                .take(n)
                .map(|&(rows, cols)| Tensor2::from_vec(rows, cols, r.f64s(rows * cols)?))
                .collect()
        };
        let first = read_group(&mut r, meta.optimizer.first)?;
        let second = read_group(&mut r, meta.optimizer.second)?;
        model.optimizer = OptimizerState {
            kind: meta.optimizer.kind,
            t: meta.optimizer.t,
            first,
            second,
        };

        let mut window = TrainingWindow::new(meta.window.capacity);
        for ex in meta.window.examples {
            let rows = r.f32s(ex.length * hp.embedding_dim)?;
            let matrix = SentenceMatrix::from_rows(hp.max_len, hp.embedding_dim, &rows)
                .ok_or_else(|| Error::Checkpoint(format!("window example {:?} has bad length", ex.id)))?;
            window.push(LabeledExample::new(ex.id, ex.tokens, matrix, ex.label, ex.source));
        }
        if r.pos != body.len() {
            return Err(Error::Checkpoint(format!("{} trailing bytes", body.len() - r.pos)));
        }

        model.window = window;
        model.n_trained = meta.n_trained;
        model.submissions = meta.submissions;
        model.created_at = meta.created_at;
        model.updated_at = meta.updated_at;
        Ok(model)
    }

    /// Writes the checkpoint atomically (temporary file, then rename),
    /// creating missing parent directories.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_bytes();
        let tmp = path.with_extension("rlv.tmp");
        let write = || -> std::io::Result<()> {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
            fs::rename(&tmp, path)
        };
        write().map_err(|e| Error::io(path, e))
    }

    pub fn restore(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelType;

    fn tiny() -> ClassifierModel {
        ClassifierModel::build(Hyperparameters {
            max_len: 5,
            embedding_dim: 3,
            filter_size: 4,
            ..Hyperparameters::cnn()
        })
        .unwrap()
    }

    #[test]
    fn bytes_round_trip() {
        let mut model = tiny();
        model.n_trained = 42;
        model.window.push(LabeledExample::new(
            "t1",
            vec!["a".into()],
            SentenceMatrix::from_rows(5, 3, &[1.0, 2.0, 3.0]).unwrap(),
            RelevanceLabel::Relevant,
            ExampleSource::User,
        ));
        let back = ClassifierModel::from_bytes(&model.to_bytes()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn corrupt_byte_fails_checksum() {
        let mut bytes = tiny().to_bytes();
        let i = bytes.len() - 10;
        bytes[i] ^= 0x40;
        assert!(matches!(ClassifierModel::from_bytes(&bytes), Err(Error::Checksum { .. })));
    }

    #[test]
    fn newer_version_is_rejected() {
        let mut bytes = tiny().to_bytes();
        bytes[3] = b'2';
        assert!(matches!(
            ClassifierModel::from_bytes(&bytes),
            Err(Error::CheckpointVersion { found: 2, supported: 1 })
        ));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let bytes = tiny().to_bytes();
        for cut in [2, 8, bytes.len() / 2, bytes.len() - 1] {
            assert!(ClassifierModel::from_bytes(&bytes[..cut]).is_err(), "cut at {cut}");
        }
    }

    #[test]
    fn recurrent_round_trip() {
        let model = ClassifierModel::build(Hyperparameters {
            model_type: ModelType::Lstm,
            max_len: 4,
            embedding_dim: 2,
            hidden_size: 3,
            ..Hyperparameters::lstm()
        })
        .unwrap();
        assert_eq!(ClassifierModel::from_bytes(&model.to_bytes()).unwrap(), model);
    }
}
