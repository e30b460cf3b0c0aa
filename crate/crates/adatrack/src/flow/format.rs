//! Binary flow dump format.
//!
//! Layout: magic bytes `ADFL`, little-endian u32 width, u32 height, then
//! `width * height` pairs of f32 `(u, v)` row-major, then `width * height`
//! u8 valid flags (1 = valid).

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"ADFL";

pub fn write_flow<T: Scalar, W: Write>(flow: &FlowField<T>, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&(flow.width() as u32).to_le_bytes())?;
    out.write_all(&(flow.height() as u32).to_le_bytes())?;
    for y in 0..flow.height() {
        for x in 0..flow.width() {
            let (u, v) = flow.at(x, y);
            out.write_all(&(u.as_f64() as f32).to_le_bytes())?;
            out.write_all(&(v.as_f64() as f32).to_le_bytes())?;
        }
    }
    for y in 0..flow.height() {
        for x in 0..flow.width() {
            out.write_all(&[u8::from(flow.is_valid(x, y))])?;
        }
    }
    Ok(())
}

pub fn read_flow<T: Scalar, R: Read>(mut input: R) -> Result<FlowField<T>> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::InvalidFlowFile("bad magic".into()));
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let width = u32::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let height = u32::from_le_bytes(word) as usize;
    if width == 0 || height == 0 || width.saturating_mul(height) > (1 << 28) {
        return Err(Error::InvalidFlowFile(format!("bad extent {width}x{height}")));
    }
    let mut flow = FlowField::zeros(width, height);
    for y in 0..height {
        for x in 0..width {
            input.read_exact(&mut word)?;
            let u = f32::from_le_bytes(word);
            input.read_exact(&mut word)?;
            let v = f32::from_le_bytes(word);
            flow.set(x, y, T::c(u as f64), T::c(v as f64));
        }
    }
    let mut flag = [0u8; 1];
    for y in 0..height {
        for x in 0..width {
            input.read_exact(&mut flag)?;
            flow.set_valid(x, y, flag[0] != 0);
        }
    }
    Ok(flow)
}
