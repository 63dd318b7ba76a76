//! `CMEL` matrix files: a 16-byte header followed by row-major little-endian
//! `f32` values.
//!
//! ```text
//! 0..4   magic  "CMEL"
//! 4..6   version u16 (1)
//! 6..8   rows    u16
//! 8..12  cols    u32
//! 12..16 reserved u32 (0)
//! ```

use std::io::{Read, Write};

use ndarray::Array2;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CMEL";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;

pub fn write_matrix<W: Write>(w: &mut W, m: &Array2<f32>) -> std::io::Result<()> {
    let (rows, cols) = m.dim();
    let rows = u16::try_from(rows).map_err(|_| std::io::Error::other(format!("{rows} rows exceed u16")))?;
    let cols = u32::try_from(cols).map_err(|_| std::io::Error::other(format!("{cols} cols exceed u32")))?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&rows.to_le_bytes())?;
    w.write_all(&cols.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    for v in m.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_matrix<R: Read>(r: &mut R) -> Result<Array2<f32>> {
    let bad = |m: &str| Error::Checkpoint(format!("CMEL: {m}"));
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header).map_err(|_| bad("truncated header"))?;
    if &header[0..4] != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let rows = u16::from_le_bytes([header[6], header[7]]) as usize;
    let cols = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let mut body = vec![0u8; rows * cols * 4];
    r.read_exact(&mut body).map_err(|_| bad("truncated body"))?;
    let values = body.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
    Array2::from_shape_vec((rows, cols), values).map_err(|e| bad(&e.to_string()))
}

pub fn to_bytes(m: &Array2<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + m.len() * 4);
    write_matrix(&mut out, m).expect("in-memory write");
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<Array2<f32>> {
    read_matrix(&mut &bytes[..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let m = Array2::from_shape_vec((2, 3), vec![1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = to_bytes(&m);
        assert_eq!(b.len(), 16 + 24);
        assert_eq!(&b[..4], b"CMEL");
        assert_eq!(&b[4..16], &[1, 0, 2, 0, 3, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&b[16..20], &1.0f32.to_le_bytes());
    }

    #[test]
    fn rejects_corruption() {
        let b = to_bytes(&Array2::zeros((2, 2)));
        assert!(from_bytes(&b[..20]).is_err());
        let mut c = b.clone();
        c[0] = b'X';
        assert!(from_bytes(&c).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip(rows in 0usize..8, cols in 0usize..8, seed in any::<u32>()) {
            let m = Array2::from_shape_fn((rows, cols), |(i, j)| (seed as f32).sin() * (i * 31 + j) as f32 - 3.5);
            prop_assert_eq!(from_bytes(&to_bytes(&m)).unwrap(), m);
        }
    }
}
