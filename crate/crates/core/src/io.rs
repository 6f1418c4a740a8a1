//! File formats: IDX datasets, binary checkpoints, PGM image grids, run
//! configs and key=value reports. Every write goes through a temp file and a
//! rename so an interrupted run never leaves a half-written file.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::{EvalReport, Value};
use crate::nets::model::{Activation, LayerSpec, ModelBundle};
use crate::tensor::Tensor;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Writes `bytes` to `path` via a sibling temp file and an atomic rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

// ----------------------------------------------------------------------- IDX

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: String,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], what: impl Into<String>) -> Self {
        Reader { bytes, pos: 0, what: what.into() }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| Error::Truncated(self.what.clone()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32_be(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u32_le(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u16_le(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

fn expect_magic(r: &mut Reader, path: &Path, expected: u32) -> Result<()> {
    let found = r.u32_be()?;
    if found != expected {
        return Err(Error::BadMagic { path: path.to_path_buf(), expected, found });
    }
    Ok(())
}

/// Parses an IDX image file (`[n, rows, cols]` of u8) and its label file.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let bytes = fs::read(images_path)?;
    let mut r = Reader::new(&bytes, images_path.display().to_string());
    expect_magic(&mut r, images_path, IDX_IMAGES_MAGIC)?;
    let n = r.u32_be()? as usize;
    let rows = r.u32_be()? as usize;
    let cols = r.u32_be()? as usize;
    let pixels = r.take(n * rows * cols)?;
    let images: Vec<f64> = pixels.iter().map(|&b| b as f64 / 255.0).collect();

    let bytes = fs::read(labels_path)?;
    let mut r = Reader::new(&bytes, labels_path.display().to_string());
    expect_magic(&mut r, labels_path, IDX_LABELS_MAGIC)?;
    let count = r.u32_be()? as usize;
    if count != n {
        return Err(Error::CountMismatch { images: n, labels: count });
    }
    let labels: Vec<usize> = r.take(count)?.iter().map(|&b| b as usize).collect();
    let classes = labels.iter().max().map_or(0, |m| m + 1).max(crate::data::NUM_CLASSES);
    Dataset::new(Tensor::new(vec![n, rows * cols], images)?, labels, classes)
}

/// Writes a dataset of square images as an IDX image/label pair. Pixels are
/// quantized like grid output.
pub fn write_idx(ds: &Dataset, images_path: &Path, labels_path: &Path) -> Result<()> {
    let side = (ds.dim() as f64).sqrt() as usize;
    if side * side != ds.dim() {
        return Err(Error::InvalidArgument(format!("IDX export needs square images, got {} pixels", ds.dim())));
    }
    if let Some(&bad) = ds.labels.iter().find(|&&l| l > 255) {
        return Err(Error::InvalidArgument(format!("label {bad} does not fit in a byte")));
    }
    let mut img = Vec::with_capacity(16 + ds.images.numel());
    for v in [IDX_IMAGES_MAGIC, ds.len() as u32, side as u32, side as u32] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    img.extend(ds.images.data().iter().map(|&v| quantize(v)));
    let mut lab = Vec::with_capacity(8 + ds.len());
    for v in [IDX_LABELS_MAGIC, ds.len() as u32] {
        lab.extend_from_slice(&v.to_be_bytes());
    }
    lab.extend(ds.labels.iter().map(|&l| l as u8));
    atomic_write(images_path, &img)?;
    atomic_write(labels_path, &lab)
}

// ---------------------------------------------------------------- checkpoint

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"PPGN";
pub const CHECKPOINT_VERSION: u16 = 1;

// Model structure travels as ordinary tensors under these names.
const META_LAYERS: &str = "meta.layers";
const META_TAP: &str = "meta.tap.";
const META_NOISE: &str = "meta.noise_sigma";
const META_EXTRA: &str = "meta.extra.";

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} exceeds u32")))
}

fn put_name(out: &mut Vec<u8>, name: &str) -> Result<()> {
    out.extend_from_slice(&to_u32(name.len(), "name length")?.to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    Ok(())
}

/// Checkpoint bytes: magic, version, model name, then named tensors and a
/// trailing CRC32 over everything before it.
pub fn encode_checkpoint(model: &ModelBundle) -> Result<Vec<u8>> {
    let mut tensors: Vec<(String, Tensor)> = Vec::new();
    if !model.layers.is_empty() {
        let spec: Vec<f64> = model
            .layers
            .iter()
            .flat_map(|l| [l.in_dim as f64, l.out_dim as f64, l.activation.code() as f64])
            .collect();
        tensors.push((META_LAYERS.into(), Tensor::new(vec![model.layers.len(), 3], spec)?));
    }
    for (name, &layer) in &model.taps {
        tensors.push((format!("{META_TAP}{name}"), Tensor::scalar(layer as f64)?));
    }
    if let Some(s) = model.noise_sigma {
        tensors.push((META_NOISE.into(), Tensor::scalar(s)?));
    }
    for (name, t) in &model.extras {
        tensors.push((format!("{META_EXTRA}{name}"), t.clone()));
    }
    tensors.extend(model.params.iter().map(|(k, v)| (k.clone(), v.clone())));

    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    put_name(&mut out, &model.name)?;
    for (name, t) in &tensors {
        put_name(&mut out, name)?;
        out.extend_from_slice(&to_u32(t.rank(), "rank")?.to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&to_u32(d, "dimension")?.to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

pub fn save_checkpoint(model: &ModelBundle, path: &Path) -> Result<()> {
    atomic_write(path, &encode_checkpoint(model)?)
}

fn read_name(r: &mut Reader) -> Result<String> {
    let len = r.u32_le()? as usize;
    String::from_utf8(r.take(len)?.to_vec()).map_err(|_| Error::Format("name is not UTF-8".into()))
}

fn meta_usize(t: &Tensor, what: &str) -> Result<usize> {
    let v = t.data().first().copied().unwrap_or(-1.0);
    if v < 0.0 || v.fract() != 0.0 || !t.is_scalar() {
        return Err(Error::Format(format!("{what} must be a non-negative integer scalar")));
    }
    Ok(v as usize)
}

pub fn decode_checkpoint(bytes: &[u8], what: &str) -> Result<ModelBundle> {
    if bytes.len() < CHECKPOINT_MAGIC.len() + 2 + 4 {
        return Err(Error::Truncated(what.into()));
    }
    if &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!("{what}: not a PPGN checkpoint")));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Crc { stored, computed });
    }
    let mut r = Reader::new(body, what);
    r.take(4)?;
    let version = r.u16_le()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version { expected: CHECKPOINT_VERSION, found: version });
    }
    let name = read_name(&mut r)?;
    let mut model = ModelBundle {
        name,
        layers: Vec::new(),
        params: BTreeMap::new(),
        taps: BTreeMap::new(),
        noise_sigma: None,
        extras: BTreeMap::new(),
    };
    while r.remaining() > 0 {
        let tname = read_name(&mut r)?;
        let rank = r.u32_le()? as usize;
        let shape = (0..rank).map(|_| r.u32_le().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or_else(|| Error::Format("tensor too large".into()))?;
        let payload = r.take(n.checked_mul(8).ok_or_else(|| Error::Format("tensor too large".into()))?)?;
        let data = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let t = Tensor::new(shape, data)?;
        if tname == META_LAYERS {
            let (rows, cols) = t.as_matrix_dims();
            if t.rank() != 2 || cols != 3 {
                return Err(Error::Format("meta.layers must be [n, 3]".into()));
            }
            for row in 0..rows {
                let v = &t.data()[row * 3..row * 3 + 3];
                let activation = Activation::from_code(v[2] as u8)
                    .filter(|_| v[2].fract() == 0.0)
                    .ok_or_else(|| Error::Format(format!("unknown activation code {}", v[2])))?;
                model.layers.push(LayerSpec::new(v[0] as usize, v[1] as usize, activation));
            }
        } else if let Some(tap) = tname.strip_prefix(META_TAP) {
            model.taps.insert(tap.to_string(), meta_usize(&t, "tap layer")?);
        } else if tname == META_NOISE {
            model.noise_sigma = Some(t.item());
        } else if let Some(extra) = tname.strip_prefix(META_EXTRA) {
            model.extras.insert(extra.to_string(), t);
        } else {
            model.params.insert(tname, t);
        }
    }
    model.validate()?;
    Ok(model)
}

pub fn load_checkpoint(path: &Path) -> Result<ModelBundle> {
    decode_checkpoint(&fs::read(path)?, &path.display().to_string())
}

// ---------------------------------------------------------------------- grid

/// `round(clamp(v, 0, 1) * 255)` with halves rounded away from zero.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Tiles square images into a binary PGM, `cols` per row, with one-pixel
/// black separators between tiles.
pub fn encode_grid(samples: &[Tensor], cols: usize) -> Result<Vec<u8>> {
    let first = samples.first().ok_or_else(|| Error::InvalidArgument("no samples to draw".into()))?;
    if cols == 0 {
        return Err(Error::InvalidArgument("grid needs at least one column".into()));
    }
    let n = first.numel();
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n {
        return Err(Error::InvalidArgument(format!("grid tiles must be square, got {n} pixels")));
    }
    if let Some(bad) = samples.iter().find(|s| s.numel() != n) {
        return Err(Error::shape("write_grid", &[first.shape(), bad.shape()]));
    }
    let cols = cols.min(samples.len());
    let rows = samples.len().div_ceil(cols);
    let (w, h) = (cols * side + cols - 1, rows * side + rows - 1);
    let mut pixels = vec![0u8; w * h];
    for (i, s) in samples.iter().enumerate() {
        let (top, left) = ((i / cols) * (side + 1), (i % cols) * (side + 1));
        for r in 0..side {
            for c in 0..side {
                pixels[(top + r) * w + left + c] = quantize(s.data()[r * side + c]);
            }
        }
    }
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(pixels);
    Ok(out)
}

pub fn write_grid(samples: &[Tensor], cols: usize, path: &Path) -> Result<()> {
    atomic_write(path, &encode_grid(samples, cols)?)
}

/// Splits a grid written by [`encode_grid`] back into `side x side` tiles.
/// All-black tiles in the last row are padding and are dropped.
pub fn decode_grid(bytes: &[u8], side: usize) -> Result<Vec<Tensor>> {
    let bad = |why: &str| Error::Format(format!("PGM grid: {why}"));
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Truncated("PGM header".into()));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header is not ASCII"))?);
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(bad("expected a binary 8-bit PGM"));
    }
    let dim = |s: &str| s.parse::<usize>().map_err(|_| bad("bad width or height"));
    let (w, h) = (dim(fields[1])?, dim(fields[2])?);
    if side == 0 || (w + 1) % (side + 1) != 0 || (h + 1) % (side + 1) != 0 {
        return Err(bad(&format!("{w}x{h} is not a grid of {side}x{side} tiles")));
    }
    let px = bytes.get(pos..pos + w * h).ok_or_else(|| Error::Truncated("PGM pixels".into()))?;
    let (cols, rows) = ((w + 1) / (side + 1), (h + 1) / (side + 1));
    let mut out = Vec::with_capacity(cols * rows);
    for i in 0..cols * rows {
        let (top, left) = ((i / cols) * (side + 1), (i % cols) * (side + 1));
        let tile: Vec<f64> =
            (0..side * side).map(|k| px[(top + k / side) * w + left + k % side] as f64 / 255.0).collect();
        out.push(Tensor::new(vec![side * side], tile)?);
    }
    while out.len() > (rows - 1) * cols && out.last().is_some_and(|t| t.data().iter().all(|&v| v == 0.0)) {
        out.pop();
    }
    Ok(out)
}

// -------------------------------------------------------------------- report

/// A decimal with six significant digits, keeping trailing zeros.
pub fn format_sig6(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0.00000".into();
    }
    let sci = format!("{v:.5e}");
    let exp: i32 = sci.split_once('e').and_then(|(_, e)| e.parse().ok()).unwrap_or(0);
    if (-5..6).contains(&exp) {
        format!("{v:.prec$}", prec = (5 - exp) as usize)
    } else {
        sci
    }
}

pub fn encode_report(report: &EvalReport) -> String {
    let sorted: BTreeMap<String, Value> = report.entries().into_iter().collect();
    let mut out = String::new();
    for (k, v) in sorted {
        let value = match v {
            Value::Int(i) => i.to_string(),
            Value::Real(r) => format_sig6(r),
        };
        out.push_str(&format!("{k}={value}\n"));
    }
    out
}

pub fn write_report(report: &EvalReport, path: &Path) -> Result<()> {
    atomic_write(path, encode_report(report).as_bytes())
}

// -------------------------------------------------------------------- config

/// Flat `key=value` run settings. Every field is optional so that command-line
/// flags can fill or override it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub variant: Option<String>,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    pub eps3: Option<f64>,
    pub steps: Option<usize>,
    pub chains: Option<usize>,
    pub seed: Option<u64>,
    pub target_class: Option<usize>,
    pub hidden_layer: Option<String>,
    pub hidden_unit: Option<usize>,
    pub mask_x: Option<usize>,
    pub mask_y: Option<usize>,
    pub mask_w: Option<usize>,
    pub mask_h: Option<usize>,
    pub context_weight: Option<f64>,
    pub noise_placement: Option<String>,
    pub classifier: Option<PathBuf>,
    pub heldout: Option<PathBuf>,
    pub generator: Option<PathBuf>,
    pub encoder: Option<PathBuf>,
    pub h_dae: Option<PathBuf>,
    pub x_dae: Option<PathBuf>,
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

pub const CONFIG_KEYS: [&str; 25] = [
    "variant", "eps1", "eps2", "eps3", "steps", "chains", "seed", "target_class", "hidden_layer", "hidden_unit",
    "mask_x", "mask_y", "mask_w", "mask_h", "context_weight", "noise_placement", "classifier", "heldout", "generator", "encoder",
    "h_dae", "x_dae", "images", "labels", "output",
];

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config { line, reason: format!("expected key=value, got '{content}'") })?;
            cfg.set(key, value).map_err(|reason| Error::Config { line, reason })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        RunConfig::parse(&fs::read_to_string(path)?)
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<Option<T>, String> {
            v.parse().map(Some).map_err(|_| format!("{key}: cannot parse '{v}'"))
        }
        fn eps(key: &str, v: &str) -> std::result::Result<Option<f64>, String> {
            match v.parse::<f64>() {
                Ok(x) if x.is_finite() && x >= 0.0 => Ok(Some(x)),
                _ => Err(format!("{key}: expected a finite number >= 0, got '{v}'")),
            }
        }
        let path = |v: &str| Some(PathBuf::from(v));
        match key {
            "variant" => self.variant = Some(value.to_string()),
            "eps1" => self.eps1 = eps(key, value)?,
            "eps2" => self.eps2 = eps(key, value)?,
            "eps3" => self.eps3 = eps(key, value)?,
            "context_weight" => self.context_weight = eps(key, value)?,
            "steps" => self.steps = num(key, value)?,
            "chains" => self.chains = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "target_class" => self.target_class = num(key, value)?,
            "hidden_layer" => self.hidden_layer = Some(value.to_string()),
            "noise_placement" => self.noise_placement = Some(value.to_string()),
            "hidden_unit" => self.hidden_unit = num(key, value)?,
            "mask_x" => self.mask_x = num(key, value)?,
            "mask_y" => self.mask_y = num(key, value)?,
            "mask_w" => self.mask_w = num(key, value)?,
            "mask_h" => self.mask_h = num(key, value)?,
            "classifier" => self.classifier = path(value),
            "heldout" => self.heldout = path(value),
            "generator" => self.generator = path(value),
            "encoder" => self.encoder = path(value),
            "h_dae" => self.h_dae = path(value),
            "x_dae" => self.x_dae = path(value),
            "images" => self.images = path(value),
            "labels" => self.labels = path(value),
            "output" => self.output = path(value),
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }
}
