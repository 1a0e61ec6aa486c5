//! Binary image-stack format and phase raster files.
//!
//! Stack files start with a 28-byte little-endian header:
//!
//! | bytes | field                                   |
//! |-------|-----------------------------------------|
//! | 0..8  | magic `SLKSTACK`                        |
//! | 8..10 | version (u16, currently 1)              |
//! | 10..12| `l` (u16)                               |
//! | 12..16| height (u32)                            |
//! | 16..20| width (u32)                             |
//! | 20    | dtype (u8): 0 = complex64, 1 = complex128 |
//! | 21..28| reserved, zero                          |
//!
//! followed by interleaved `(re, im)` pairs, image-major then row-major.
//! Phase rasters use the analogous `SLKPHASE` header, a flag byte per pixel
//! (bit 0 masked, bit 1 undersampled), then `f64` angles pixel by pixel.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::raster::{ImageStack, PhaseRaster};
use crate::torus::TorusPhases;

pub const STACK_MAGIC: &[u8; 8] = b"SLKSTACK";
pub const PHASE_MAGIC: &[u8; 8] = b"SLKPHASE";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    Complex64,
    Complex128,
}

impl DType {
    fn code(self) -> u8 {
        match self {
            DType::Complex64 => 0,
            DType::Complex128 => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(DType::Complex64),
            1 => Ok(DType::Complex128),
            other => Err(Error::Format(format!("unknown dtype code {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StackFileHeader {
    pub version: u16,
    pub l: u16,
    pub height: u32,
    pub width: u32,
    pub dtype: DType,
}

impl StackFileHeader {
    pub fn entries(&self) -> usize {
        self.l as usize * self.height as usize * self.width as usize
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(STACK_MAGIC)?;
        w.write_u16::<LE>(self.version)?;
        w.write_u16::<LE>(self.l)?;
        w.write_u32::<LE>(self.height)?;
        w.write_u32::<LE>(self.width)?;
        w.write_u8(self.dtype.code())?;
        w.write_all(&[0u8; 7])?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != STACK_MAGIC {
            return Err(Error::Format("not a stack file (bad magic)".into()));
        }
        let version = r.read_u16::<LE>()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported stack version {version}")));
        }
        let l = r.read_u16::<LE>()?;
        let height = r.read_u32::<LE>()?;
        let width = r.read_u32::<LE>()?;
        let dtype = DType::from_code(r.read_u8()?)?;
        let mut reserved = [0u8; 7];
        r.read_exact(&mut reserved)?;
        if reserved != [0u8; 7] {
            return Err(Error::Format("nonzero reserved header bytes".into()));
        }
        Ok(Self { version, l, height, width, dtype })
    }
}

fn narrow<T: TryFrom<usize>>(value: usize, what: &str) -> Result<T> {
    T::try_from(value).map_err(|_| Error::Format(format!("{what} {value} does not fit the file header")))
}

pub fn write_stack<W: Write>(w: &mut W, stack: &ImageStack, dtype: DType) -> Result<()> {
    let header = StackFileHeader {
        version: FORMAT_VERSION,
        l: narrow(stack.l(), "image count")?,
        height: narrow(stack.height(), "height")?,
        width: narrow(stack.width(), "width")?,
        dtype,
    };
    header.write_to(w)?;
    for z in stack.data() {
        match dtype {
            DType::Complex64 => {
                w.write_f32::<LE>(z.re as f32)?;
                w.write_f32::<LE>(z.im as f32)?;
            }
            DType::Complex128 => {
                w.write_f64::<LE>(z.re)?;
                w.write_f64::<LE>(z.im)?;
            }
        }
    }
    Ok(())
}

pub fn read_stack<R: Read>(r: &mut R) -> Result<ImageStack> {
    let header = StackFileHeader::read_from(r)?;
    let mut data = Vec::with_capacity(header.entries());
    for _ in 0..header.entries() {
        let z = match header.dtype {
            DType::Complex64 => Complex64::new(r.read_f32::<LE>()? as f64, r.read_f32::<LE>()? as f64),
            DType::Complex128 => Complex64::new(r.read_f64::<LE>()?, r.read_f64::<LE>()?),
        };
        data.push(z);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after stack payload".into()));
    }
    ImageStack::new(header.l as usize, header.height as usize, header.width as usize, data)
}

pub fn save_stack(path: &Path, stack: &ImageStack, dtype: DType) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write_stack(&mut w, stack, dtype)?;
    w.flush()?;
    Ok(())
}

pub fn load_stack(path: &Path) -> Result<ImageStack> {
    read_stack(&mut BufReader::new(std::fs::File::open(path)?))
}

/// CSV with header `row,col,theta_0,…`; masked pixels carry `NaN` angles.
pub fn write_phase_csv<W: Write>(w: &mut W, raster: &PhaseRaster) -> Result<()> {
    write!(w, "row,col")?;
    for i in 0..raster.count() {
        write!(w, ",theta_{i}")?;
    }
    writeln!(w)?;
    for r in 0..raster.height() {
        for c in 0..raster.width() {
            write!(w, "{r},{c}")?;
            for t in raster.angles_at(r, c) {
                write!(w, ",{t}")?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Reads a phase CSV. Every pixel of the bounding grid must appear once;
/// rows whose angles are all `NaN` are masked.
pub fn read_phase_csv<R: BufRead>(r: R) -> Result<PhaseRaster> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty phase CSV".into()))??;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.len() < 3 || cols[0] != "row" || cols[1] != "col" {
        return Err(Error::Format(format!("bad phase CSV header '{header}'")));
    }
    let count = cols.len() - 2;
    let mut rows = Vec::new();
    for (ln, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != count + 2 {
            return Err(Error::Format(format!("line {}: expected {} fields", ln + 2, count + 2)));
        }
        let bad = |f: &str| Error::Format(format!("line {}: bad value '{f}'", ln + 2));
        let row: usize = fields[0].parse().map_err(|_| bad(fields[0]))?;
        let col: usize = fields[1].parse().map_err(|_| bad(fields[1]))?;
        let angles = fields[2..].iter().map(|f| f.parse::<f64>().map_err(|_| bad(f))).collect::<Result<Vec<_>>>()?;
        rows.push((row, col, angles));
    }
    let height = rows.iter().map(|r| r.0 + 1).max().ok_or_else(|| Error::Format("phase CSV has no pixels".into()))?;
    let width = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
    let mut data = vec![f64::NAN; height * width * count];
    let mut seen = vec![false; height * width];
    let mut mask = vec![true; height * width];
    for (row, col, angles) in rows {
        let p = row * width + col;
        if std::mem::replace(&mut seen[p], true) {
            return Err(Error::Format(format!("pixel ({row}, {col}) listed twice")));
        }
        mask[p] = angles.iter().all(|t| t.is_nan());
        data[p * count..(p + 1) * count].copy_from_slice(&angles);
    }
    if let Some(p) = seen.iter().position(|s| !s) {
        return Err(Error::Format(format!("pixel ({}, {}) missing", p / width, p % width)));
    }
    PhaseRaster::new(count, height, width, data, mask)
}

pub fn write_phase_binary<W: Write>(w: &mut W, raster: &PhaseRaster) -> Result<()> {
    w.write_all(PHASE_MAGIC)?;
    w.write_u16::<LE>(FORMAT_VERSION)?;
    w.write_u16::<LE>(narrow(raster.count(), "phase count")?)?;
    w.write_u32::<LE>(narrow(raster.height(), "height")?)?;
    w.write_u32::<LE>(narrow(raster.width(), "width")?)?;
    w.write_all(&[0u8; 8])?;
    for (m, u) in raster.mask().iter().zip(raster.undersampled()) {
        w.write_u8(u8::from(*m) | (u8::from(*u) << 1))?;
    }
    for t in raster.data() {
        w.write_f64::<LE>(*t)?;
    }
    Ok(())
}

pub fn read_phase_binary<R: Read>(r: &mut R) -> Result<PhaseRaster> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != PHASE_MAGIC {
        return Err(Error::Format("not a phase raster file (bad magic)".into()));
    }
    let version = r.read_u16::<LE>()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported phase raster version {version}")));
    }
    let count = r.read_u16::<LE>()? as usize;
    let height = r.read_u32::<LE>()? as usize;
    let width = r.read_u32::<LE>()? as usize;
    let mut reserved = [0u8; 8];
    r.read_exact(&mut reserved)?;
    let pixels = height * width;
    let mut mask = Vec::with_capacity(pixels);
    let mut under = Vec::with_capacity(pixels);
    for _ in 0..pixels {
        let flags = r.read_u8()?;
        mask.push(flags & 1 != 0);
        under.push(flags & 2 != 0);
    }
    let data = (0..pixels * count).map(|_| r.read_f64::<LE>()).collect::<std::io::Result<Vec<_>>>()?;
    PhaseRaster::new(count, height, width, data, mask)?.with_undersampled(under)
}

/// Writes a phase raster, choosing CSV or binary by `binary`.
pub fn save_phases(path: &Path, raster: &PhaseRaster, binary: bool) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    if binary {
        write_phase_binary(&mut w, raster)?;
    } else {
        write_phase_csv(&mut w, raster)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a phase raster in either format, detected from the magic bytes.
pub fn load_phases(path: &Path) -> Result<PhaseRaster> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(PHASE_MAGIC) {
        read_phase_binary(&mut bytes.as_slice())
    } else {
        read_phase_csv(bytes.as_slice())
    }
}

/// Truth CSV: header `date,theta` and one row per date.
pub fn write_truth_csv<W: Write>(w: &mut W, phases: &TorusPhases) -> Result<()> {
    writeln!(w, "date,theta")?;
    for (i, t) in phases.angles().iter().enumerate() {
        writeln!(w, "{i},{t}")?;
    }
    Ok(())
}

pub fn read_truth_csv<R: BufRead>(r: R) -> Result<TorusPhases> {
    let mut angles = Vec::new();
    for (ln, line) in r.lines().enumerate().skip(1) {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (_, theta) = line
            .trim()
            .split_once(',')
            .ok_or_else(|| Error::Format(format!("line {}: expected 'date,theta'", ln + 1)))?;
        angles.push(theta.parse().map_err(|_| Error::Format(format!("line {}: bad angle '{theta}'", ln + 1)))?);
    }
    Ok(TorusPhases::from_angles(&angles))
}
