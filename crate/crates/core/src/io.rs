//! Matrix Market coordinate files and dense vector files.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::SparseSym;

/// Symmetric coordinate Matrix Market text, lower triangle, 1-based.
/// Values use the shortest representation that parses back to the same bits.
pub fn encode_matrix_market(m: &SparseSym) -> String {
    let entries: Vec<_> = m.lower_entries().collect();
    let mut out = String::from("%%MatrixMarket matrix coordinate real symmetric\n");
    let _ = writeln!(out, "{} {} {}", m.n(), m.n(), entries.len());
    for (i, j, v) in entries {
        let _ = writeln!(out, "{} {} {v:e}", i + 1, j + 1);
    }
    out
}

pub fn write_matrix_market(path: impl AsRef<Path>, m: &SparseSym) -> Result<()> {
    std::fs::write(path, encode_matrix_market(m))?;
    Ok(())
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseSym> {
    parse_matrix_market(&std::fs::read_to_string(path)?)
}

/// Accepts `real`/`integer` coordinate matrices that are `symmetric` or
/// `general`; a general matrix must be exactly symmetric.
pub fn parse_matrix_market(text: &str) -> Result<SparseSym> {
    let mut lines = text.lines();
    let banner = lines
        .next()
        .ok_or_else(|| Error::MatrixMarket("empty file".into()))?
        .to_ascii_lowercase();
    let fields: Vec<&str> = banner.split_whitespace().collect();
    let symmetric = match fields.as_slice() {
        ["%%matrixmarket", "matrix", "coordinate", "real" | "integer", sym] => match *sym {
            "symmetric" => true,
            "general" => false,
            other => return Err(Error::MatrixMarket(format!("unsupported symmetry `{other}`"))),
        },
        _ => return Err(Error::MatrixMarket(format!("unsupported banner `{banner}`"))),
    };

    let mut data = lines.filter(|l| !l.trim_start().starts_with('%') && !l.trim().is_empty());
    let size: Vec<usize> = data
        .next()
        .ok_or_else(|| Error::MatrixMarket("missing size line".into()))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::MatrixMarket(format!("bad size token `{t}`"))))
        .collect::<Result<_>>()?;
    let [rows, cols, nnz] = size[..] else {
        return Err(Error::MatrixMarket("size line needs three integers".into()));
    };
    if rows != cols {
        return Err(Error::MatrixMarket(format!("matrix is {rows}x{cols}, not square")));
    }

    let mut lower = Vec::with_capacity(nnz);
    let mut upper = Vec::new();
    for line in data.by_ref().take(nnz) {
        let t: Vec<&str> = line.split_whitespace().collect();
        let [i, j, v] = t[..] else {
            return Err(Error::MatrixMarket(format!("bad entry line `{line}`")));
        };
        let parse_idx = |s: &str| -> Result<usize> {
            let k: usize = s.parse().map_err(|_| Error::MatrixMarket(format!("bad index `{s}`")))?;
            if k == 0 || k > rows {
                return Err(Error::MatrixMarket(format!("index {k} out of range 1..={rows}")));
            }
            Ok(k - 1)
        };
        let (i, j) = (parse_idx(i)?, parse_idx(j)?);
        let v: f64 = v.parse().map_err(|_| Error::MatrixMarket(format!("bad value `{v}`")))?;
        if j <= i {
            lower.push((i, j, v));
        } else if symmetric {
            return Err(Error::MatrixMarket(format!(
                "upper-triangle entry ({}, {}) in symmetric file",
                i + 1,
                j + 1
            )));
        } else {
            upper.push((j, i, v));
        }
    }
    if lower.len() + upper.len() != nnz {
        return Err(Error::MatrixMarket(format!(
            "expected {nnz} entries, found {}",
            lower.len() + upper.len()
        )));
    }
    if !symmetric {
        let strict_lower = lower.iter().filter(|&&(i, j, _)| i != j).copied();
        if SparseSym::from_triplets(rows, upper)? != SparseSym::from_triplets(rows, strict_lower)? {
            return Err(Error::MatrixMarket("general matrix is not symmetric".into()));
        }
    }
    SparseSym::from_triplets(rows, lower)
}

pub fn write_vector_bin(path: impl AsRef<Path>, x: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = x.iter().flat_map(|v| v.to_le_bytes()).collect();
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn read_vector_bin(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let bytes = std::fs::read(path)?;
    decode_f64_le(&bytes)
}

pub fn decode_f64_le(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::InvalidArgument(format!(
            "binary vector length {} is not a multiple of 8",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// One value per line.
pub fn write_vector_csv(path: impl AsRef<Path>, x: &[f64]) -> Result<()> {
    let mut out = String::with_capacity(x.len() * 24);
    for v in x {
        let _ = writeln!(out, "{v:e}");
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_vector_csv(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad number `{l}`")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_market_round_trip_is_exact() {
        let m = SparseSym::from_triplets(4, [(0, 0, 0.1), (1, 0, -1.0 / 3.0), (3, 2, 1e-300), (3, 3, 7.0)]).unwrap();
        let text = encode_matrix_market(&m);
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real symmetric\n4 4 4\n"));
        assert_eq!(parse_matrix_market(&text).unwrap(), m);
    }

    #[test]
    fn general_files_must_be_symmetric() {
        let ok = "%%MatrixMarket matrix coordinate real general\n% comment\n2 2 3\n1 1 2\n1 2 -1\n2 1 -1\n";
        assert_eq!(parse_matrix_market(ok).unwrap().get(0, 1), -1.0);
        let bad = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 -1\n2 1 -2\n";
        assert!(parse_matrix_market(bad).is_err());
        let short = "%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 2\n";
        assert!(parse_matrix_market(short).is_err());
        assert!(parse_matrix_market("%%MatrixMarket matrix array real general\n").is_err());
    }

    #[test]
    fn vector_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let x = vec![0.1, -2.0, f64::MIN_POSITIVE, 1e300];
        write_vector_bin(dir.path().join("x.bin"), &x).unwrap();
        assert_eq!(read_vector_bin(dir.path().join("x.bin")).unwrap(), x);
        write_vector_csv(dir.path().join("x.csv"), &x).unwrap();
        assert_eq!(read_vector_csv(dir.path().join("x.csv")).unwrap(), x);
    }
}
