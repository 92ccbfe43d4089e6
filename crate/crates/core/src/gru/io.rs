//! Versioned weight container shared by the FP32 and INT8 model files.
//!
//! Binary layout, little-endian throughout:
//!
//! ```text
//! magic "CSIW" | format_version u32 | kind u8 (0 = fp32, 1 = int8)
//! input u32 | hidden u32 | layers u32 | activity u32 | presence u32 | seed u64
//! tensor_count u32
//! per tensor:
//!   name_len u16 | name | ndim u8 | dims u32 * ndim | dtype u8
//!   dtype 0: f32 * numel
//!   dtype 1: scale f32 | zero_point i32 | i8 * numel
//! ```
//!
//! Next to every container, `<file>.manifest` lists the tensors with their
//! shapes and SHA-256 checksums.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::network::{GruConfig, GruLayerParams, GruNetwork, Linear, NetParams};
use super::GruError;
use crate::matrix::Matrix;

pub const MAGIC: &[u8; 4] = b"CSIW";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Fp32,
    Int8,
}

impl ModelKind {
    fn code(self) -> u8 {
        match self {
            ModelKind::Fp32 => 0,
            ModelKind::Int8 => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ModelKind::Fp32 => "fp32",
            ModelKind::Int8 => "int8",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    I8 {
        scale: f32,
        zero_point: i32,
        values: Vec<i8>,
    },
}

impl TensorData {
    fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::I8 { values, .. } => values.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: TensorData,
}

impl StoredTensor {
    pub fn f32(name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Self {
        Self {
            name: name.into(),
            shape,
            data: TensorData::F32(data),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: ModelKind,
    pub config: GruConfig,
    pub seed: u64,
    pub tensors: Vec<StoredTensor>,
}

fn payload_bytes(data: &TensorData) -> Vec<u8> {
    let mut out = Vec::new();
    match data {
        TensorData::F32(v) => {
            out.push(0);
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        TensorData::I8 {
            scale,
            zero_point,
            values,
        } => {
            out.push(1);
            out.extend_from_slice(&scale.to_le_bytes());
            out.extend_from_slice(&zero_point.to_le_bytes());
            out.extend(values.iter().map(|&v| v as u8));
        }
    }
    out
}

impl Container {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(self.kind.code());
        let c = &self.config;
        for v in [
            c.input_size,
            c.hidden_size,
            c.num_layers,
            c.activity_classes,
            c.presence_classes,
        ] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.push(t.shape.len() as u8);
            for &d in &t.shape {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            out.extend(payload_bytes(&t.data));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self, GruError> {
        let mut r = Reader {
            bytes,
            pos: 0,
            path,
        };
        if r.take(4)? != MAGIC {
            return Err(r.bad("missing CSIW magic"));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(r.bad(&format!("unsupported format version {version}")));
        }
        let kind = match r.u8()? {
            0 => ModelKind::Fp32,
            1 => ModelKind::Int8,
            k => return Err(r.bad(&format!("unknown model kind {k}"))),
        };
        let config = GruConfig {
            input_size: r.u32()? as usize,
            hidden_size: r.u32()? as usize,
            num_layers: r.u32()? as usize,
            activity_classes: r.u32()? as usize,
            presence_classes: r.u32()? as usize,
        };
        let seed = r.u64()?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = u16::from_le_bytes(r.take(2)?.try_into().unwrap()) as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| r.bad("tensor name is not UTF-8"))?;
            let ndim = r.u8()? as usize;
            let shape = (0..ndim)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>, _>>()?;
            let numel: usize = shape.iter().product();
            let data = match r.u8()? {
                0 => TensorData::F32(
                    r.take(4 * numel)?
                        .chunks_exact(4)
                        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                ),
                1 => {
                    let scale = f32::from_le_bytes(r.take(4)?.try_into().unwrap());
                    let zero_point = r.u32()? as i32;
                    let values = r.take(numel)?.iter().map(|&b| b as i8).collect();
                    TensorData::I8 {
                        scale,
                        zero_point,
                        values,
                    }
                }
                d => return Err(r.bad(&format!("unknown dtype {d} for {name}"))),
            };
            tensors.push(StoredTensor { name, shape, data });
        }
        if r.pos != bytes.len() {
            return Err(r.bad("trailing bytes after last tensor"));
        }
        Ok(Self {
            kind,
            config,
            seed,
            tensors,
        })
    }

    /// Text manifest: header fields, then `name shape dtype sha256` per tensor.
    pub fn manifest(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let _ = writeln!(s, "format_version={FORMAT_VERSION}");
        let _ = writeln!(s, "kind={}", self.kind.name());
        let _ = writeln!(
            s,
            "input_size={} hidden_size={} num_layers={} activity_classes={} presence_classes={} seed={}",
            c.input_size, c.hidden_size, c.num_layers, c.activity_classes, c.presence_classes, self.seed
        );
        for t in &self.tensors {
            let shape: Vec<String> = t.shape.iter().map(usize::to_string).collect();
            let (dtype, extra) = match &t.data {
                TensorData::F32(_) => ("f32", String::new()),
                TensorData::I8 {
                    scale, zero_point, ..
                } => ("i8", format!(" scale={scale:e} zero_point={zero_point}")),
            };
            let digest = Sha256::digest(payload_bytes(&t.data));
            let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
            let _ = writeln!(
                s,
                "{} {} {dtype} sha256={hex}{extra}",
                t.name,
                shape.join("x")
            );
        }
        s
    }

    pub fn tensor(&self, name: &str) -> Result<&StoredTensor, GruError> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| GruError::Shape(format!("missing tensor {name}")))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn bad(&self, reason: &str) -> GruError {
        GruError::Format {
            path: self.path.to_path_buf(),
            reason: reason.to_string(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], GruError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(self.bad("truncated file"));
        };
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, GruError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, GruError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, GruError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

pub fn write_container(path: impl AsRef<Path>, c: &Container) -> Result<(), GruError> {
    let path = path.as_ref();
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |source| GruError::Io { path: p, source }
    };
    fs::write(path, c.to_bytes()).map_err(io(path))?;
    let mpath = manifest_path(path);
    fs::write(&mpath, c.manifest()).map_err(io(&mpath))
}

pub fn read_container(path: impl AsRef<Path>) -> Result<Container, GruError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => GruError::ModelNotFound(path.to_path_buf()),
        _ => GruError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    Container::from_bytes(&bytes, path)
}

pub fn network_to_container(net: &GruNetwork<f32>) -> Container {
    let p = net.params();
    let layers = net.config().num_layers;
    let tensors = p
        .tensor_names()
        .into_iter()
        .zip(p.tensors())
        .enumerate()
        .map(|(i, (name, ((r, c), data)))| {
            let shape = if NetParams::<f32>::is_weight(i, layers) {
                vec![r, c]
            } else {
                vec![r]
            };
            StoredTensor::f32(name, shape, data.to_vec())
        })
        .collect();
    Container {
        kind: ModelKind::Fp32,
        config: *net.config(),
        seed: net.seed(),
        tensors,
    }
}

fn f32_tensor(c: &Container, name: &str, shape: &[usize]) -> Result<Vec<f32>, GruError> {
    let t = c.tensor(name)?;
    if t.shape != shape {
        return Err(GruError::Shape(format!(
            "{name} has shape {:?}, expected {shape:?}",
            t.shape
        )));
    }
    match &t.data {
        TensorData::F32(v) if v.len() == t.data.len() => Ok(v.clone()),
        _ => Err(GruError::Shape(format!("{name} is not an f32 tensor"))),
    }
}

pub(crate) fn load_matrix(
    c: &Container,
    name: &str,
    rows: usize,
    cols: usize,
) -> Result<Matrix<f32>, GruError> {
    let v = f32_tensor(c, name, &[rows, cols])?;
    Ok(Matrix::from_vec(rows, cols, v).expect("shape checked"))
}

pub(crate) fn load_vector(c: &Container, name: &str, len: usize) -> Result<Vec<f32>, GruError> {
    f32_tensor(c, name, &[len])
}

pub fn container_to_network(c: &Container) -> Result<GruNetwork<f32>, GruError> {
    if c.kind != ModelKind::Fp32 {
        return Err(GruError::Config("expected an fp32 model file".into()));
    }
    let cfg = c.config;
    let h = cfg.hidden_size;
    let mut layers = Vec::with_capacity(cfg.num_layers);
    for l in 0..cfg.num_layers {
        let cols = h + cfg.layer_input(l);
        layers.push(GruLayerParams {
            wz: load_matrix(c, &format!("gru.{l}.wz"), h, cols)?,
            wr: load_matrix(c, &format!("gru.{l}.wr"), h, cols)?,
            wh: load_matrix(c, &format!("gru.{l}.wh"), h, cols)?,
            bz: load_vector(c, &format!("gru.{l}.bz"), h)?,
            br: load_vector(c, &format!("gru.{l}.br"), h)?,
            bh: load_vector(c, &format!("gru.{l}.bh"), h)?,
        });
    }
    let head = |name: &str, n: usize| -> Result<Linear<f32>, GruError> {
        Ok(Linear {
            w: load_matrix(c, &format!("head.{name}.w"), n, h)?,
            b: load_vector(c, &format!("head.{name}.b"), n)?,
        })
    };
    let params = NetParams {
        layers,
        activity: head("activity", cfg.activity_classes)?,
        presence: head("presence", cfg.presence_classes)?,
    };
    GruNetwork::from_params(cfg, c.seed, params)
}

pub fn save_network(path: impl AsRef<Path>, net: &GruNetwork<f32>) -> Result<(), GruError> {
    write_container(path, &network_to_container(net))
}

pub fn load_network(path: impl AsRef<Path>) -> Result<GruNetwork<f32>, GruError> {
    container_to_network(&read_container(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GruNetwork<f32> {
        let cfg = GruConfig {
            hidden_size: 5,
            ..GruConfig::default()
        };
        GruNetwork::init(cfg, 42).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let net = small();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.w");
        save_network(&p, &net).unwrap();
        let back = load_network(&p).unwrap();
        assert_eq!(back.params(), net.params());
        assert_eq!(back.config(), net.config());
        assert_eq!(back.seed(), 42);
        let manifest = fs::read_to_string(manifest_path(&p)).unwrap();
        assert!(manifest.contains("gru.0.wz 5x54 f32 sha256="));
        assert!(manifest.contains("gru.2.bh 5 f32"));
        assert_eq!(manifest.lines().count(), 3 + 22);
    }

    #[test]
    fn missing_and_corrupt_files() {
        let err = load_network("/nonexistent/model.w").unwrap_err();
        assert_eq!(err.class(), "model-not-found");
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.w");
        let mut bytes = network_to_container(&small()).to_bytes();
        bytes.truncate(bytes.len() - 3);
        fs::write(&p, bytes).unwrap();
        assert!(matches!(load_network(&p), Err(GruError::Format { .. })));
        fs::write(&p, b"nope").unwrap();
        assert!(matches!(load_network(&p), Err(GruError::Format { .. })));
    }
}
