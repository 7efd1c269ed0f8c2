//! `ATNSR` feature-grid files.
//!
//! Layout (all little-endian):
//! - magic: `ATNSR1` (6 bytes)
//! - rank: u32, always 4
//! - dims: 4 x u32 `(T, H, W, C)`
//! - data: `T*H*W*C` IEEE-754 f32, row-major

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fusion::FeatureGrid;
use crate::resampler::TokenMatrix;

pub const MAGIC: &[u8; 6] = b"ATNSR1";
const RANK: u32 = 4;

fn malformed(reason: impl Into<String>) -> Error {
    Error::Format {
        what: "ATNSR file",
        reason: reason.into(),
    }
}

pub fn write_grid(mut w: impl Write, grid: &FeatureGrid) -> Result<()> {
    let mut buf = Vec::with_capacity(6 + 20 + grid.data().len() * 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&RANK.to_le_bytes());
    for d in grid.dims() {
        let d = u32::try_from(d).map_err(|_| Error::validation("dims", format!("{d} exceeds u32")))?;
        buf.extend_from_slice(&d.to_le_bytes());
    }
    for &v in grid.data() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_grid(mut r: impl Read) -> Result<FeatureGrid> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode(&bytes)
}

pub fn decode(bytes: &[u8]) -> Result<FeatureGrid> {
    if bytes.len() < 26 {
        return Err(malformed(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..6] != MAGIC {
        return Err(malformed("bad magic"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[6 + 4 * i..10 + 4 * i].try_into().unwrap());
    let rank = word(0);
    if rank != RANK {
        return Err(malformed(format!("rank {rank}, expected 4")));
    }
    let dims = [word(1), word(2), word(3), word(4)].map(|d| d as usize);
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| malformed("dims overflow"))?;
    let body = &bytes[26..];
    if body.len() != count * 4 {
        return Err(malformed(format!(
            "expected {} data bytes for dims {:?}, found {}",
            count * 4,
            dims,
            body.len()
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    FeatureGrid::new(dims[0], dims[1], dims[2], dims[3], data)
}

pub fn save_grid(path: impl AsRef<Path>, grid: &FeatureGrid) -> Result<()> {
    let mut buf = Vec::new();
    write_grid(&mut buf, grid)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<FeatureGrid> {
    decode(&fs::read(path)?)
}

/// Token matrices are stored with dims `(rows, 1, 1, dim)`.
pub fn tokens_to_grid(tokens: &TokenMatrix) -> Result<FeatureGrid> {
    FeatureGrid::new(tokens.rows(), 1, 1, tokens.dim(), tokens.as_slice().to_vec())
}

pub fn save_tokens(path: impl AsRef<Path>, tokens: &TokenMatrix) -> Result<()> {
    save_grid(path, &tokens_to_grid(tokens)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let g = FeatureGrid::new(1, 1, 2, 1, vec![1.0, -2.5]).unwrap();
        let mut buf = Vec::new();
        write_grid(&mut buf, &g).unwrap();
        let mut expected = b"ATNSR1".to_vec();
        for w in [4u32, 1, 1, 2, 1] {
            expected.extend_from_slice(&w.to_le_bytes());
        }
        expected.extend_from_slice(&1.0f32.to_le_bytes());
        expected.extend_from_slice(&(-2.5f32).to_le_bytes());
        assert_eq!(buf, expected);
    }

    #[test]
    fn rejects_corruption() {
        let g = FeatureGrid::filled(2, 2, 2, 2, 0.5).unwrap();
        let mut buf = Vec::new();
        write_grid(&mut buf, &g).unwrap();
        assert!(decode(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut bad = buf.clone();
        bad[6] = 3;
        assert!(decode(&bad).is_err());
        assert!(decode(&buf[..10]).is_err());
    }

    proptest! {
        #[test]
        fn f32_values_round_trip(t in 1usize..3, h in 1usize..4, w in 1usize..4, c in 1usize..4,
                                 seed in any::<u64>()) {
            let mut s = seed;
            let grid = FeatureGrid::from_fn(t, h, w, c, |_, _, _, _| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 40) as f32 / 1e3 - 8.0) as f64
            }).unwrap();
            let mut buf = Vec::new();
            write_grid(&mut buf, &grid).unwrap();
            prop_assert_eq!(decode(&buf).unwrap(), grid);
        }
    }
}
