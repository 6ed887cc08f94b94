//! Eigen cache files.
//!
//! Layout: ASCII header line `LCFB1 DIGEST SIDE F DIM COUNT\n`, then COUNT
//! frequencies and the DIM×COUNT eigenvectors column by column, all as
//! little-endian f64.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use ndarray::Array2;

use crate::error::{invalid, Error, Result};
use crate::linalg::SpectralBasis;

pub const EIGEN_CACHE_MAGIC: &str = "LCFB1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    User,
    Item,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::User => "user",
            Self::Item => "item",
        })
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "user" => Ok(Self::User),
            "item" => Ok(Self::Item),
            other => Err(invalid(format!("unknown side {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenCacheHeader {
    pub digest: String,
    pub side: Side,
    pub cutoff_ratio: f64,
    pub dim: usize,
    pub count: usize,
}

pub fn write_eigen_cache<W: Write>(
    mut out: W,
    digest: &str,
    side: Side,
    cutoff_ratio: f64,
    basis: &SpectralBasis,
) -> Result<()> {
    if digest.is_empty() || digest.contains(char::is_whitespace) {
        return Err(invalid("digest must be a non-empty token"));
    }
    writeln!(out, "{EIGEN_CACHE_MAGIC} {digest} {side} {cutoff_ratio} {} {}", basis.dim(), basis.len())?;
    for f in basis.frequencies() {
        out.write_all(&f.to_le_bytes())?;
    }
    for col in basis.vectors().columns() {
        for v in col {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

/// Reads a cache; with `expected_digest`, a different dataset digest fails.
pub fn read_eigen_cache<R: BufRead>(
    mut input: R,
    expected_digest: Option<&str>,
) -> Result<(EigenCacheHeader, SpectralBasis)> {
    let mut line = String::new();
    input.read_line(&mut line)?;
    let fields: Vec<&str> = line.trim_end_matches('\n').split(' ').collect();
    let [magic, digest, side, ratio, dim, count] = fields[..] else {
        return Err(bad(format!("eigen cache header needs 6 fields, got {}", fields.len())));
    };
    if magic != EIGEN_CACHE_MAGIC {
        return Err(bad(format!("missing {EIGEN_CACHE_MAGIC} header")));
    }
    let number = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad header field {s:?}")));
    let header = EigenCacheHeader {
        digest: digest.to_string(),
        side: side.parse()?,
        cutoff_ratio: ratio.parse().map_err(|_| bad(format!("bad ratio {ratio:?}")))?,
        dim: number(dim)?,
        count: number(count)?,
    };
    if let Some(expected) = expected_digest {
        if expected != header.digest {
            return Err(Error::CacheMismatch(format!(
                "{} cache was built from dataset {}, current dataset is {expected}",
                header.side, header.digest
            )));
        }
    }
    let (dim, count) = (header.dim, header.count);
    if count > dim {
        return Err(bad(format!("{count} eigenpairs exceed dimension {dim}")));
    }
    let mut buf = vec![0u8; 8 * count * (dim + 1)];
    input.read_exact(&mut buf).map_err(|e| bad(format!("truncated eigen cache: {e}")))?;
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(bad(format!("{} trailing bytes after eigen cache", rest.len())));
    }
    let values: Vec<f64> =
        buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    let frequencies = values[..count].to_vec();
    let vectors = Array2::from_shape_vec((count, dim), values[count..].to_vec())
        .expect("shape")
        .reversed_axes()
        .as_standard_layout()
        .into_owned();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(bad("non-finite value in eigen cache"));
    }
    let basis = SpectralBasis::from_raw(vectors, frequencies);
    basis.validate(None, f64::INFINITY)?;
    Ok((header, basis))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn basis() -> SpectralBasis {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        SpectralBasis::new(array![[s, s], [s, -s], [0.0, 0.0]], vec![0.0, 1.5]).unwrap()
    }

    #[test]
    fn roundtrip_is_exact() {
        let b = basis();
        let mut buf = Vec::new();
        write_eigen_cache(&mut buf, "abc", Side::Item, 0.1, &b).unwrap();
        assert!(buf.starts_with(b"LCFB1 abc item 0.1 3 2\n"));
        let (h, back) = read_eigen_cache(&buf[..], Some("abc")).unwrap();
        assert_eq!(back, b);
        assert_eq!((h.side, h.cutoff_ratio, h.dim, h.count), (Side::Item, 0.1, 3, 2));
    }

    #[test]
    fn digest_mismatch_is_loud() {
        let mut buf = Vec::new();
        write_eigen_cache(&mut buf, "abc", Side::User, 1.0, &basis()).unwrap();
        assert!(matches!(read_eigen_cache(&buf[..], Some("abd")), Err(Error::CacheMismatch(_))));
    }

    #[test]
    fn corrupt_caches_rejected() {
        let mut buf = Vec::new();
        write_eigen_cache(&mut buf, "abc", Side::User, 1.0, &basis()).unwrap();
        assert!(read_eigen_cache(&buf[..buf.len() - 1], None).is_err());
        let mut longer = buf.clone();
        longer.push(0);
        assert!(read_eigen_cache(&longer[..], None).is_err());
        assert!(read_eigen_cache(&b"LCFB0 abc user 1 3 2\n"[..], None).is_err());
    }
}
