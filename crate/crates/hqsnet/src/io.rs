//! Binary file formats: `GRD1` grids, `MSK1` sampling masks and `HQN1`
//! network checkpoints. All integers and floats are little-endian; values are
//! stored as `f32` and widened on load.

use std::fs;
use std::path::Path;

use hqsnet_core::autodiff::Tensor;
use hqsnet_core::net::{ConvLayer, NetConfig, NetParams, Residual};
use hqsnet_core::{ComplexGrid, Mask, RealGrid};
use num_complex::Complex64;

use crate::error::{io_err, HarnessError, Result};

pub const GRID_MAGIC: &[u8; 4] = b"GRD1";
pub const MASK_MAGIC: &[u8; 4] = b"MSK1";
pub const CHECKPOINT_MAGIC: &[u8; 4] = b"HQN1";
pub const CHECKPOINT_VERSION: u16 = 1;

const DTYPE_REAL: u8 = 0;
const DTYPE_COMPLEX: u8 = 1;
const MASK_HEADER_LEN: usize = 4 + 4 + 4 + 4 + 1 + 8;

fn format<T>(msg: impl Into<String>) -> Result<T> {
    Err(HarnessError::Format(msg.into()))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], what: &'static str) -> Self {
        Self { buf, pos: 0, what }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return format(format!("{} truncated at byte {}", self.what, self.pos));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let m = self.take(4)?;
        if m != magic {
            return format(format!("bad {} magic {:?}", self.what, String::from_utf8_lossy(m)));
        }
        Ok(())
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| HarnessError::Format("size overflow".into()))?)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return format(format!("{} has {} trailing bytes", self.what, self.buf.len() - self.pos));
        }
        Ok(())
    }
}

fn push_f32s(out: &mut Vec<u8>, values: impl IntoIterator<Item = f64>) {
    for v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

/// Contents of a `GRD1` file.
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    Real(RealGrid),
    Complex(ComplexGrid),
}

impl Grid {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Grid::Real(g) => g.shape(),
            Grid::Complex(g) => g.shape(),
        }
    }

    pub fn into_real(self) -> Result<RealGrid> {
        match self {
            Grid::Real(g) => Ok(g),
            Grid::Complex(_) => format("expected a real grid, found complex"),
        }
    }

    pub fn into_complex(self) -> ComplexGrid {
        match self {
            Grid::Real(g) => g.to_complex(),
            Grid::Complex(g) => g,
        }
    }
}

fn grid_header(out: &mut Vec<u8>, h: usize, w: usize, dtype: u8) {
    out.extend_from_slice(GRID_MAGIC);
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out.push(dtype);
}

pub fn encode_real_grid(g: &RealGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(13 + 4 * g.len());
    grid_header(&mut out, g.height(), g.width(), DTYPE_REAL);
    push_f32s(&mut out, g.as_slice().iter().copied());
    out
}

pub fn encode_complex_grid(g: &ComplexGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(13 + 8 * g.len());
    grid_header(&mut out, g.height(), g.width(), DTYPE_COMPLEX);
    push_f32s(&mut out, g.as_slice().iter().flat_map(|c| [c.re, c.im]));
    out
}

pub fn decode_grid(bytes: &[u8]) -> Result<Grid> {
    let mut r = Reader::new(bytes, "GRD1");
    r.magic(GRID_MAGIC)?;
    let (h, w) = (r.u32()? as usize, r.u32()? as usize);
    if h == 0 || w == 0 {
        return format(format!("empty grid shape {h}x{w}"));
    }
    let n = h.checked_mul(w).ok_or_else(|| HarnessError::Format("grid too large".into()))?;
    let grid = match r.u8()? {
        DTYPE_REAL => Grid::Real(RealGrid::from_vec(h, w, r.f32s(n)?)?),
        DTYPE_COMPLEX => {
            let v = r.f32s(2 * n)?;
            let data = v.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
            Grid::Complex(ComplexGrid::from_vec(h, w, data)?)
        }
        t => return format(format!("unknown GRD1 dtype {t}")),
    };
    r.finish()?;
    Ok(grid)
}

/// Header fields of a `MSK1` file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskHeader {
    pub height: usize,
    pub width: usize,
    pub accel: f32,
    pub order: u8,
    pub seed: u64,
}

/// Bits are packed row-major, least significant bit first.
pub fn encode_mask(m: &Mask) -> Vec<u8> {
    let (h, w) = m.shape();
    let mut out = Vec::with_capacity(MASK_HEADER_LEN + m.bits().len().div_ceil(8));
    out.extend_from_slice(MASK_MAGIC);
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out.extend_from_slice(&m.accel.to_le_bytes());
    out.push(m.order);
    out.extend_from_slice(&m.seed.to_le_bytes());
    for chunk in m.bits().chunks(8) {
        out.push(chunk.iter().enumerate().fold(0u8, |b, (i, &s)| b | (u8::from(s) << i)));
    }
    out
}

fn mask_header(r: &mut Reader) -> Result<MaskHeader> {
    r.magic(MASK_MAGIC)?;
    let (height, width) = (r.u32()? as usize, r.u32()? as usize);
    let accel = r.f32()?;
    let order = r.u8()?;
    let seed = r.u64()?;
    if height == 0 || width == 0 {
        return format(format!("empty mask shape {height}x{width}"));
    }
    Ok(MaskHeader { height, width, accel, order, seed })
}

/// Parses only the fixed-size header.
pub fn decode_mask_header(bytes: &[u8]) -> Result<MaskHeader> {
    mask_header(&mut Reader::new(bytes, "MSK1"))
}

pub fn decode_mask(bytes: &[u8]) -> Result<Mask> {
    let mut r = Reader::new(bytes, "MSK1");
    let hd = mask_header(&mut r)?;
    let n = hd.height.checked_mul(hd.width).ok_or_else(|| HarnessError::Format("mask too large".into()))?;
    let packed = r.take(n.div_ceil(8))?;
    r.finish()?;
    let bits = (0..n).map(|p| packed[p / 8] >> (p % 8) & 1 == 1).collect();
    Mask::new(hd.height, hd.width, bits, hd.accel, hd.order, hd.seed).or_else(|e| format(e.to_string()))
}

/// Serializes a checkpoint. Fails if a size does not fit the `u16` header fields.
pub fn encode_checkpoint(params: &NetParams, cfg: &NetConfig) -> Result<Vec<u8>> {
    params.check(cfg)?;
    let field = |v: usize, name: &str| -> Result<[u8; 2]> {
        u16::try_from(v).map(u16::to_le_bytes).or_else(|_| format(format!("{name} = {v} exceeds u16")))
    };
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&field(cfg.blocks, "blocks")?);
    out.extend_from_slice(&field(cfg.layers_per_block, "layers")?);
    out.extend_from_slice(&field(cfg.channels, "channels")?);
    out.extend_from_slice(&field(cfg.kernel, "kernel")?);
    out.extend_from_slice(&(cfg.lambda as f32).to_le_bytes());
    out.push(cfg.residual.code());
    out.push(u8::from(cfg.shared_weights));
    for t in params.tensors() {
        push_f32s(&mut out, t.data().iter().copied());
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(NetParams, NetConfig)> {
    let mut r = Reader::new(bytes, "HQN1");
    r.magic(CHECKPOINT_MAGIC)?;
    let version = r.u16()?;
    if version != CHECKPOINT_VERSION {
        return format(format!("unsupported HQN1 version {version}"));
    }
    let blocks = r.u16()? as usize;
    let layers_per_block = r.u16()? as usize;
    let channels = r.u16()? as usize;
    let kernel = r.u16()? as usize;
    // Shortest decimal form, so a config value such as 1.8 survives the f32 field.
    let lambda: f64 = r.f32()?.to_string().parse().expect("f32 display parses as f64");
    let residual = match Residual::from_code(r.u8()?) {
        Some(res) => res,
        None => return format("unknown residual code"),
    };
    let shared_weights = match r.u8()? {
        0 => false,
        1 => true,
        s => return format(format!("bad shared flag {s}")),
    };
    let cfg = NetConfig { blocks, layers_per_block, channels, kernel, lambda, residual, shared_weights };
    cfg.validate().or_else(|e| format(format!("invalid header: {e}")))?;
    let expected: usize = cfg
        .layer_channels()
        .iter()
        .map(|&(cin, cout)| cout * cin * kernel * kernel + cout)
        .sum::<usize>()
        * cfg.param_blocks();
    let payload = bytes.len() - r.pos;
    if payload != 4 * expected {
        return format(format!(
            "payload of {payload} bytes does not match header ({} blocks need {} bytes)",
            cfg.param_blocks(),
            4 * expected
        ));
    }
    let mut param_blocks = Vec::with_capacity(cfg.param_blocks());
    for _ in 0..cfg.param_blocks() {
        let mut layers = Vec::with_capacity(layers_per_block);
        for (cin, cout) in cfg.layer_channels() {
            let weight = Tensor::new(&[cout, cin, kernel, kernel], r.f32s(cout * cin * kernel * kernel)?)?;
            let bias = Tensor::new(&[cout], r.f32s(cout)?)?;
            layers.push(ConvLayer { weight, bias });
        }
        param_blocks.push(layers);
    }
    r.finish()?;
    Ok((NetParams { blocks: param_blocks }, cfg))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(io_err(path))
}

pub fn write_real_grid(path: &Path, g: &RealGrid) -> Result<()> {
    write(path, &encode_real_grid(g))
}

pub fn write_complex_grid(path: &Path, g: &ComplexGrid) -> Result<()> {
    write(path, &encode_complex_grid(g))
}

pub fn read_grid(path: &Path) -> Result<Grid> {
    decode_grid(&read(path)?)
}

pub fn write_mask(path: &Path, m: &Mask) -> Result<()> {
    write(path, &encode_mask(m))
}

pub fn read_mask(path: &Path) -> Result<Mask> {
    decode_mask(&read(path)?)
}

pub fn read_mask_header(path: &Path) -> Result<MaskHeader> {
    use std::io::Read;
    let mut buf = Vec::with_capacity(MASK_HEADER_LEN);
    let f = fs::File::open(path).map_err(io_err(path))?;
    f.take(MASK_HEADER_LEN as u64).read_to_end(&mut buf).map_err(io_err(path))?;
    decode_mask_header(&buf)
}

pub fn save_checkpoint(path: &Path, params: &NetParams, cfg: &NetConfig) -> Result<()> {
    write(path, &encode_checkpoint(params, cfg)?)
}

/// Loads a checkpoint; a missing file is reported as [`HarnessError::MissingCheckpoint`].
pub fn load_checkpoint(path: &Path) -> Result<(NetParams, NetConfig)> {
    if !path.exists() {
        return Err(HarnessError::MissingCheckpoint(path.to_path_buf()));
    }
    decode_checkpoint(&read(path)?)
}

/// First four bytes of a file.
pub fn sniff_magic(path: &Path) -> Result<[u8; 4]> {
    use std::io::Read;
    let mut m = [0u8; 4];
    fs::File::open(path).and_then(|mut f| f.read_exact(&mut m)).map_err(io_err(path))?;
    Ok(m)
}
