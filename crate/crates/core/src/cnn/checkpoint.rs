//! Model checkpoints.
//!
//! Layout: 8-byte magic `LORAFPCK`, `u32` LE format version, `u64` LE
//! descriptor length, the JSON descriptor, then every tensor in descriptor
//! order as little-endian values of the listed dtype.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BnStats, Cnn, CnnArchitecture, EpochRecord, Tensor, TrainSchedule};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"LORAFPCK";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Cnn<f32>,
    pub schedule: TrainSchedule,
    pub best_epoch: usize,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    #[serde(default)]
    decay: bool,
}

#[derive(Serialize, Deserialize)]
struct Descriptor {
    architecture: CnnArchitecture,
    schedule: TrainSchedule,
    best_epoch: usize,
    tensors: Vec<TensorEntry>,
}

pub fn save_checkpoint(ck: &Checkpoint, path: &Path) -> Result<()> {
    let mut tensors: Vec<TensorEntry> = ck
        .model
        .params
        .iter()
        .map(|t| TensorEntry {
            name: t.name.clone(),
            shape: t.shape.clone(),
            dtype: "f32".into(),
            decay: t.decay,
        })
        .collect();
    let f = ck.model.arch.filters;
    for b in 0..ck.model.bn.len() {
        for stat in ["running_mean", "running_var"] {
            tensors.push(TensorEntry {
                name: format!("bn{b}.{stat}"),
                shape: vec![f],
                dtype: "f64".into(),
                decay: false,
            });
        }
    }
    let desc = Descriptor {
        architecture: ck.model.arch.clone(),
        schedule: ck.schedule.clone(),
        best_epoch: ck.best_epoch,
        tensors,
    };
    let json = serde_json::to_vec(&desc).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for t in &ck.model.params {
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for st in &ck.model.bn {
        for v in st.mean.iter().chain(&st.var) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Checkpoint("unexpected end of file".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader { buf: &bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    let len = u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")) as usize;
    let desc: Descriptor = serde_json::from_slice(r.take(len)?).map_err(|e| Error::Checkpoint(e.to_string()))?;
    desc.architecture.validate()?;

    let template = Cnn::<f32>::new(desc.architecture.clone(), 0)?;
    let mut params = Vec::new();
    let mut bn: Vec<BnStats> = Vec::new();
    let mut entries = desc.tensors.into_iter();
    for t in &template.params {
        let e = entries.next().ok_or_else(|| Error::Checkpoint("missing tensors".into()))?;
        if e.name != t.name || e.shape != t.shape || e.dtype != "f32" {
            return Err(Error::ShapeMismatch {
                expected: format!("{} {:?} f32", t.name, t.shape),
                got: format!("{} {:?} {}", e.name, e.shape, e.dtype),
            });
        }
        let data = r
            .take(4 * t.data.len())?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        params.push(Tensor {
            name: e.name,
            shape: e.shape,
            data,
            decay: t.decay,
        });
    }
    let f = desc.architecture.filters;
    for _ in 0..desc.architecture.conv_blocks {
        let mut read = |what: &str| -> Result<Vec<f64>> {
            let e = entries.next().ok_or_else(|| Error::Checkpoint(format!("missing {what}")))?;
            if e.shape != [f] || e.dtype != "f64" {
                return Err(Error::Checkpoint(format!("bad buffer {}", e.name)));
            }
            Ok(r.take(8 * f)?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect())
        };
        let mean = read("running mean")?;
        let var = read("running var")?;
        bn.push(BnStats { mean, var });
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(Checkpoint {
        model: Cnn {
            arch: desc.architecture,
            params,
            bn,
        },
        schedule: desc.schedule,
        best_epoch: desc.best_epoch,
    })
}

/// `epoch,lr,train_loss,train_acc,val_loss,val_acc` rows.
pub fn write_history_csv(history: &[EpochRecord], path: &Path) -> Result<()> {
    let mut s = String::from("epoch,lr,train_loss,train_acc,val_loss,val_acc\n");
    for h in history {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            h.epoch, h.lr, h.train_loss, h.train_acc, h.val_loss, h.val_acc
        ));
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}
