use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::{Shape, Tensor, TensorError};

pub const MODEL_MAGIC: &[u8; 4] = b"EFDP";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
struct Param {
    name: String,
    value: Tensor,
    grad: Option<Vec<f64>>,
    m: Vec<f64>,
    v: Vec<f64>,
    // Set once a gradient has been seen; untouched parameters skip Adam.
    live: bool,
}

/// Named trainable tensors with their gradients and Adam moments.
#[derive(Debug, Clone, Default)]
pub struct ParameterStore {
    params: Vec<Param>,
    names: HashMap<String, ParamId>,
    adam: AdamConfig,
    steps: u64,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_adam(adam: AdamConfig) -> Self {
        ParameterStore {
            adam,
            ..Self::default()
        }
    }

    pub fn adam_config(&self) -> AdamConfig {
        self.adam
    }

    pub fn set_adam_config(&mut self, adam: AdamConfig) {
        self.adam = adam;
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId, TensorError> {
        let name = name.into();
        if self.names.contains_key(&name) {
            return Err(TensorError::DuplicateName(name));
        }
        let id = ParamId(self.params.len());
        let len = value.len();
        self.names.insert(name.clone(), id);
        self.params.push(Param {
            name,
            value,
            grad: None,
            m: vec![0.0; len],
            v: vec![0.0; len],
            live: false,
        });
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.names.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    /// Accumulated gradient, or `None` if nothing reached the parameter.
    pub fn grad(&self, id: ParamId) -> Option<&[f64]> {
        self.params[id.0].grad.as_deref()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    /// Total number of scalar parameters.
    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn accumulate(&mut self, grads: &Gradients) {
        for (index, entry) in grads.entries.iter().enumerate() {
            let Some(buf) = entry else { continue };
            let param = &mut self.params[index];
            let len = param.value.len();
            let cols = param.value.cols();
            let grad = param.grad.get_or_insert_with(|| vec![0.0; len]);
            match buf {
                GradBuf::Dense(g) => {
                    for (a, b) in grad.iter_mut().zip(g) {
                        *a += b;
                    }
                }
                GradBuf::Rows(rows) => {
                    for (&row, g) in rows {
                        for (a, b) in grad[row * cols..(row + 1) * cols].iter_mut().zip(g) {
                            *a += b;
                        }
                    }
                }
            }
            param.live = true;
        }
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            if let Some(g) = &mut p.grad {
                g.iter_mut().for_each(|x| *x = 0.0);
            }
        }
    }

    /// One bias-corrected Adam update from the accumulated gradients, which
    /// are zeroed afterwards.
    pub fn adam_step(&mut self, lr: f64) {
        self.steps += 1;
        let AdamConfig { beta1, beta2, eps } = self.adam;
        let t = self.steps as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);

        for p in &mut self.params {
            if !p.live {
                continue;
            }
            let values = p.value.data_mut();
            match &mut p.grad {
                Some(grad) => {
                    for i in 0..values.len() {
                        let g = grad[i];
                        p.m[i] = beta1 * p.m[i] + (1.0 - beta1) * g;
                        p.v[i] = beta2 * p.v[i] + (1.0 - beta2) * g * g;
                        values[i] -= lr * (p.m[i] / bc1) / ((p.v[i] / bc2).sqrt() + eps);
                        grad[i] = 0.0;
                    }
                }
                None => {
                    for i in 0..values.len() {
                        p.m[i] *= beta1;
                        p.v[i] *= beta2;
                        values[i] -= lr * (p.m[i] / bc1) / ((p.v[i] / bc2).sqrt() + eps);
                    }
                }
            }
        }
    }

    /// Copies of every parameter value, in id order.
    pub fn snapshot(&self) -> Vec<Tensor> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Tensor]) {
        assert_eq!(snapshot.len(), self.params.len(), "snapshot from another store");
        for (p, v) in self.params.iter_mut().zip(snapshot) {
            assert_eq!(p.value.shape(), v.shape());
            p.value = v.clone();
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    /// Writes `EFDP`, the format version, the entry count, then per entry the
    /// name, rank, dimensions, and little-endian `f64` values.
    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(MODEL_MAGIC)?;
        w.write_u32::<LittleEndian>(MODEL_VERSION)?;
        w.write_u32::<LittleEndian>(self.params.len() as u32)?;
        for p in &self.params {
            w.write_u32::<LittleEndian>(p.name.len() as u32)?;
            w.write_all(p.name.as_bytes())?;
            let (rows, cols) = p.value.shape();
            if cols == 1 {
                w.write_u32::<LittleEndian>(1)?;
                w.write_u64::<LittleEndian>(rows as u64)?;
            } else {
                w.write_u32::<LittleEndian>(2)?;
                w.write_u64::<LittleEndian>(rows as u64)?;
                w.write_u64::<LittleEndian>(cols as u64)?;
            }
            for &v in p.value.data() {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TensorError> {
        let mut cursor = bytes;
        let store = Self::read_from(&mut cursor)?;
        if !cursor.is_empty() {
            return Err(TensorError::TrailingBytes(cursor.len()));
        }
        Ok(store)
    }

    /// Reads one parameter section, advancing `cursor` past it.
    pub fn read_from(cursor: &mut &[u8]) -> Result<Self, TensorError> {
        let mut store = ParameterStore::new();
        for (name, value) in read_entries(cursor)? {
            store.add(name, value)?;
        }
        Ok(store)
    }

    /// Overwrites this store's values from a serialized section. Every name
    /// in the section must exist here with the same shape, and every
    /// parameter here must be present in the section.
    pub fn load_strict(&mut self, cursor: &mut &[u8]) -> Result<(), TensorError> {
        let entries = read_entries(cursor)?;
        let mut seen = vec![false; self.params.len()];
        for (name, value) in entries {
            let id = self.id(&name).ok_or_else(|| TensorError::UnknownName(name.clone()))?;
            let expected = self.params[id.0].value.shape();
            if expected != value.shape() {
                return Err(TensorError::ParamShape {
                    name,
                    expected,
                    found: value.shape(),
                });
            }
            self.params[id.0].value = value;
            seen[id.0] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(TensorError::MissingName(self.params[missing].name.clone()));
        }
        Ok(())
    }
}

fn read_entries(cursor: &mut &[u8]) -> Result<Vec<(String, Tensor)>, TensorError> {
    let mut magic = [0u8; 4];
    read_exact(cursor, &mut magic)?;
    if &magic != MODEL_MAGIC {
        return Err(TensorError::BadMagic);
    }
    let version = read_u32(cursor)?;
    if version != MODEL_VERSION {
        return Err(TensorError::UnsupportedVersion(version));
    }
    let count = read_u32(cursor)? as usize;

    let mut entries = Vec::new();
    for _ in 0..count {
        let name_len = read_u32(cursor)? as usize;
        if name_len > cursor.len() {
            return Err(TensorError::Truncated);
        }
        let name = std::str::from_utf8(&cursor[..name_len])
            .map_err(|_| TensorError::Malformed("parameter name is not UTF-8".into()))?
            .to_owned();
        *cursor = &cursor[name_len..];

        let rank = read_u32(cursor)?;
        let (rows, cols) = match rank {
            1 => (read_dim(cursor)?, 1),
            2 => (read_dim(cursor)?, read_dim(cursor)?),
            r => return Err(TensorError::Malformed(format!("rank {r} for `{name}`"))),
        };
        let len = rows
            .checked_mul(cols)
            .filter(|&len| len.checked_mul(8).is_some_and(|b| b <= cursor.len()))
            .ok_or(TensorError::Truncated)?;
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            let v = cursor.read_f64::<LittleEndian>().map_err(|_| TensorError::Truncated)?;
            data.push(v);
        }
        entries.push((name, Tensor::from_vec(rows, cols, data)?));
    }
    Ok(entries)
}

fn read_exact(cursor: &mut &[u8], buf: &mut [u8]) -> Result<(), TensorError> {
    io::Read::read_exact(cursor, buf).map_err(|_| TensorError::Truncated)
}

fn read_u32(cursor: &mut &[u8]) -> Result<u32, TensorError> {
    cursor.read_u32::<LittleEndian>().map_err(|_| TensorError::Truncated)
}

fn read_dim(cursor: &mut &[u8]) -> Result<usize, TensorError> {
    let d = cursor.read_u64::<LittleEndian>().map_err(|_| TensorError::Truncated)?;
    usize::try_from(d).map_err(|_| TensorError::Truncated)
}

#[derive(Debug, Clone)]
pub(crate) enum GradBuf {
    Dense(Vec<f64>),
    // Row-sparse gradient of an embedding table, keyed by row.
    Rows(BTreeMap<usize, Vec<f64>>),
}

/// Parameter gradients produced by one backward pass.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    pub(crate) entries: Vec<Option<GradBuf>>,
    pub(crate) shapes: Vec<Shape>,
}

impl Gradients {
    /// Dense gradient for `id`; zeros when the parameter was unreachable.
    pub fn dense(&self, id: ParamId) -> Vec<f64> {
        let (rows, cols) = self.shapes[id.0];
        match &self.entries[id.0] {
            None => vec![0.0; rows * cols],
            Some(GradBuf::Dense(g)) => g.clone(),
            Some(GradBuf::Rows(map)) => {
                let mut out = vec![0.0; rows * cols];
                for (&r, g) in map {
                    out[r * cols..(r + 1) * cols].copy_from_slice(g);
                }
                out
            }
        }
    }

    pub fn is_reached(&self, id: ParamId) -> bool {
        self.entries.get(id.0).is_some_and(|e| e.is_some())
    }
}
