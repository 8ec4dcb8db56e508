//! Raw tensor blob I/O.
//!
//! Format: header `{magic "TNSR", u32 rank, u32 dims[rank]}` followed by
//! little-endian f32 values in row-major order. All integers little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TNSR";

pub fn write_blob(path: &Path, dims: &[usize], values: &[f64]) -> Result<()> {
    let n: usize = dims.iter().product();
    if n != values.len() {
        return Err(Error::ShapeMismatch(format!(
            "blob dims {:?} hold {} values, got {}",
            dims,
            n,
            values.len()
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(dims.len() as u32).to_le_bytes())?;
    for &d in dims {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for &v in values {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_blob(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::other(format!(
            "{}: bad magic {:?}",
            path.display(),
            magic
        )));
    }
    let rank = read_u32(&mut r)? as usize;
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        dims.push(read_u32(&mut r)? as usize);
    }
    let n: usize = dims.iter().product();
    let mut buf = vec![0u8; n * 4];
    r.read_exact(&mut buf)?;
    let values = buf
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    Ok((dims, values))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = std::env::temp_dir().join("blob_rt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.tnsr");
        let vals: Vec<f64> = (0..24).map(|i| i as f64 * 0.5).collect();
        write_blob(&path, &[2, 3, 4], &vals).unwrap();
        let (dims, got) = read_blob(&path).unwrap();
        assert_eq!(dims, vec![2, 3, 4]);
        assert_eq!(got, vals);
    }

    #[test]
    fn rejects_bad_shape() {
        let dir = std::env::temp_dir().join("blob_rt_test2");
        std::fs::create_dir_all(&dir).unwrap();
        assert!(write_blob(&dir.join("x.tnsr"), &[2, 2], &[1.0]).is_err());
    }
}
