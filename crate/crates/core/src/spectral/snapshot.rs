//! `DSOL1` binary field snapshots.
//!
//! Layout: magic `DSOL1`, `u32` n, `f64` l, `u8` component count, `u8`
//! representation (0 position, 1 momentum), then every component's `n³`
//! samples as little-endian `(f64 re, f64 im)` pairs, z fastest.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::{Field, GridSpec, Representation};
use crate::error::{Error, Result};

const MAGIC: &[u8; 5] = b"DSOL1";

pub fn write<const C: usize, W: Write>(field: &Field<C>, mut out: W) -> Result<()> {
    let g = field.grid();
    let n = u32::try_from(g.n()).map_err(|_| Error::Format("grid too large".into()))?;
    out.write_all(MAGIC)?;
    out.write_all(&n.to_le_bytes())?;
    out.write_all(&g.l().to_le_bytes())?;
    out.write_all(&[C as u8, field.repr().tag()])?;
    for comp in field.components() {
        for v in comp {
            out.write_all(&v.re.to_le_bytes())?;
            out.write_all(&v.im.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read<const C: usize, R: Read>(mut input: R) -> Result<Field<C>> {
    let mut magic = [0u8; 5];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic, expected DSOL1".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    input.read_exact(&mut b4)?;
    let n = u32::from_le_bytes(b4) as usize;
    input.read_exact(&mut b8)?;
    let l = f64::from_le_bytes(b8);
    let mut hdr = [0u8; 2];
    input.read_exact(&mut hdr)?;
    if hdr[0] as usize != C {
        return Err(Error::Format(format!(
            "file holds {} components, expected {C}",
            hdr[0]
        )));
    }
    let repr = Representation::from_tag(hdr[1])
        .ok_or_else(|| Error::Format(format!("unknown representation tag {}", hdr[1])))?;
    let grid = GridSpec::new(n, l).map_err(|e| Error::Format(e.to_string()))?;
    let mut comps: [Vec<Complex64>; C] = std::array::from_fn(|_| Vec::with_capacity(grid.len()));
    for comp in comps.iter_mut() {
        for _ in 0..grid.len() {
            input.read_exact(&mut b8)?;
            let re = f64::from_le_bytes(b8);
            input.read_exact(&mut b8)?;
            let im = f64::from_le_bytes(b8);
            comp.push(Complex64::new(re, im));
        }
    }
    Field::from_components(grid, repr, comps)
}

pub fn save<const C: usize>(field: &Field<C>, path: &Path) -> Result<()> {
    write(field, BufWriter::new(File::create(path)?))
}

pub fn load<const C: usize>(path: &Path) -> Result<Field<C>> {
    read(BufReader::new(File::open(path)?))
}
