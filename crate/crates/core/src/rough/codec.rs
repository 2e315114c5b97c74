//! JSON and little-endian binary encodings of rough sheets.
//!
//! Binary layout: magic `HLRS`, then `u32` version, dimension and grid
//! level, `u64` time count, the times, and for each slice its initial
//! value, level-1 prefixes and level-2 prefixes, all as `f64`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{node_count, RoughSheet, RoughSlice};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"HLRS";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceRecord {
    pub initial_value: Vec<f64>,
    pub level1: Vec<f64>,
    pub level2: Vec<f64>,
}

/// Plain serde form of a [`RoughSheet`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SheetRecord {
    pub dim: usize,
    pub grid_level: u32,
    pub times: Vec<f64>,
    pub slices: Vec<SliceRecord>,
}

impl From<&RoughSheet> for SheetRecord {
    fn from(sheet: &RoughSheet) -> Self {
        SheetRecord {
            dim: sheet.dim(),
            grid_level: sheet.grid_level(),
            times: sheet.times().to_vec(),
            slices: sheet
                .slices()
                .iter()
                .map(|s| SliceRecord {
                    initial_value: s.initial_value().to_vec(),
                    level1: s.level1_prefixes().to_vec(),
                    level2: s.level2_prefixes().to_vec(),
                })
                .collect(),
        }
    }
}

impl TryFrom<SheetRecord> for RoughSheet {
    type Error = Error;

    fn try_from(rec: SheetRecord) -> Result<Self> {
        let slices = rec
            .slices
            .into_iter()
            .map(|s| {
                RoughSlice::from_prefixes(
                    rec.dim,
                    rec.grid_level,
                    s.level1,
                    s.level2,
                    s.initial_value,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        RoughSheet::new(rec.times, slices)
    }
}

fn put_f64s<W: Write>(w: &mut W, xs: &[f64]) -> Result<()> {
    for x in xs {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_sheet_binary<W: Write>(sheet: &RoughSheet, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(sheet.dim() as u32).to_le_bytes())?;
    w.write_all(&sheet.grid_level().to_le_bytes())?;
    w.write_all(&(sheet.len() as u64).to_le_bytes())?;
    put_f64s(&mut w, sheet.times())?;
    for s in sheet.slices() {
        put_f64s(&mut w, s.initial_value())?;
        put_f64s(&mut w, s.level1_prefixes())?;
        put_f64s(&mut w, s.level2_prefixes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated sheet: {e}")))?;
    Ok(buf)
}

fn get_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    (0..n)
        .map(|_| read_exact::<R, 8>(r).map(f64::from_le_bytes))
        .collect()
}

pub fn read_sheet_binary<R: Read>(mut r: R) -> Result<RoughSheet> {
    if &read_exact::<R, 4>(&mut r)? != MAGIC {
        return Err(Error::Format("bad magic, expected HLRS".into()));
    }
    let version = u32::from_le_bytes(read_exact(&mut r)?);
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported sheet version {version}"
        )));
    }
    let dim = u32::from_le_bytes(read_exact(&mut r)?) as usize;
    let level = u32::from_le_bytes(read_exact(&mut r)?);
    let n_times = u64::from_le_bytes(read_exact(&mut r)?) as usize;
    let nodes = node_count(level)?;
    if dim == 0 || dim > 64 || n_times == 0 || n_times > 1 << 24 {
        return Err(Error::Format(format!(
            "implausible header d={dim}, times={n_times}"
        )));
    }
    let times = get_f64s(&mut r, n_times)?;
    let mut slices = Vec::with_capacity(n_times);
    for _ in 0..n_times {
        let init = get_f64s(&mut r, dim)?;
        let l1 = get_f64s(&mut r, nodes * dim)?;
        let l2 = get_f64s(&mut r, nodes * dim * dim)?;
        slices.push(RoughSlice::from_prefixes(dim, level, l1, l2, init)?);
    }
    RoughSheet::new(times, slices)
}
