//! Voxel grid blob I/O.
//!
//! 32-byte header: magic "VOXG", u32 resolution, 3 x f32 origin, f32 cell
//! size, then 8 reserved zero bytes. Followed by resolution^3 little-endian
//! f32 values in x-fastest order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Vec3, VoxelGrid};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"VOXG";

pub fn write_grid(path: &Path, grid: &VoxelGrid) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(grid.resolution as u32).to_le_bytes())?;
    for a in 0..3 {
        w.write_all(&(grid.origin[a] as f32).to_le_bytes())?;
    }
    w.write_all(&(grid.cell as f32).to_le_bytes())?;
    w.write_all(&[0u8; 8])?;
    for &v in &grid.values {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_grid(path: &Path) -> Result<VoxelGrid> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = [0u8; 32];
    r.read_exact(&mut header)?;
    if &header[0..4] != MAGIC {
        return Err(Error::other(format!("{}: bad magic", path.display())));
    }
    let resolution = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let f = |o: usize| f32::from_le_bytes(header[o..o + 4].try_into().unwrap()) as f64;
    let origin = Vec3::new(f(8), f(12), f(16));
    let cell = f(20);
    let n = resolution * resolution * resolution;
    let mut buf = vec![0u8; n * 4];
    r.read_exact(&mut buf)?;
    let values = buf
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    Ok(VoxelGrid {
        resolution,
        origin,
        cell,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_32_bytes_and_round_trips() {
        let dir = std::env::temp_dir().join("voxg_rt");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("g.voxg");
        let mut g = VoxelGrid::unit_box(4);
        g.values[13] = 1.0;
        write_grid(&path, &g).unwrap();
        let len = std::fs::metadata(&path).unwrap().len();
        assert_eq!(len, 32 + 64 * 4);
        let back = read_grid(&path).unwrap();
        assert_eq!(back.resolution, 4);
        assert_eq!(back.values[13], 1.0);
        assert!((back.cell - g.cell).abs() < 1e-7);
    }
}
