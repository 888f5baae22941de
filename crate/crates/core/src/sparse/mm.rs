//! Matrix Market coordinate format (real, general or symmetric).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::CsrMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    General,
    /// Only the lower triangle is written; the reader mirrors it.
    Symmetric,
}

pub fn mm_read(path: impl AsRef<Path>) -> Result<CsrMatrix> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| Error::parse(path, "empty file"))??;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(Error::parse(path, format!("bad header: {header}")));
    }
    if tokens[2] != "coordinate" {
        return Err(Error::parse(path, "only coordinate format is supported"));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(Error::parse(path, format!("unsupported field type {}", tokens[3])));
    }
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(Error::parse(path, format!("unsupported symmetry {other}"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        let bad = |what: &str| Error::parse(path, format!("line {}: {what}: {t}", lineno + 2));
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(bad("expected 'rows cols nnz'"));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|_| bad("invalid size"));
                let s = (p(fields[0])?, p(fields[1])?, p(fields[2])?);
                triplets.reserve(if symmetric { 2 * s.2 } else { s.2 });
                size = Some(s);
            }
            Some((nr, nc, _)) => {
                if fields.len() != 3 {
                    return Err(bad("expected 'row col value'"));
                }
                let r: usize = fields[0].parse().map_err(|_| bad("invalid row"))?;
                let c: usize = fields[1].parse().map_err(|_| bad("invalid column"))?;
                let v: f64 = fields[2].parse().map_err(|_| bad("invalid value"))?;
                if r == 0 || c == 0 || r > nr || c > nc {
                    return Err(bad("index out of range"));
                }
                triplets.push((r - 1, c - 1, v));
                if symmetric && r != c {
                    triplets.push((c - 1, r - 1, v));
                }
            }
        }
    }
    let (nr, nc, nnz) = size.ok_or_else(|| Error::parse(path, "missing size line"))?;
    let stored = if symmetric { triplets.iter().filter(|t| t.0 >= t.1).count() } else { triplets.len() };
    if stored != nnz {
        return Err(Error::parse(path, format!("expected {nnz} entries, found {stored}")));
    }
    CsrMatrix::from_triplets(nr, nc, &triplets)
}

pub fn mm_write(a: &CsrMatrix, path: impl AsRef<Path>) -> Result<()> {
    mm_write_with(a, path, Symmetry::General)
}

pub fn mm_write_with(a: &CsrMatrix, path: impl AsRef<Path>, symmetry: Symmetry) -> Result<()> {
    if symmetry == Symmetry::Symmetric && !a.is_symmetric() {
        return Err(Error::invalid("matrix is not symmetric"));
    }
    let mut w = BufWriter::new(File::create(path)?);
    let kind = match symmetry {
        Symmetry::General => "general",
        Symmetry::Symmetric => "symmetric",
    };
    writeln!(w, "%%MatrixMarket matrix coordinate real {kind}")?;
    let keep = |r: usize, c: usize| symmetry == Symmetry::General || r >= c;
    let count = (0..a.nrows()).map(|r| a.row(r).0.iter().filter(|&&c| keep(r, c)).count()).sum::<usize>();
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), count)?;
    for r in 0..a.nrows() {
        for (c, v) in a.row_iter(r) {
            if keep(r, c) {
                writeln!(w, "{} {} {:.16e}", r + 1, c + 1, v)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes a dense vector as a Matrix Market array file.
pub fn mm_write_vector(v: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} 1", v.len())?;
    for x in v {
        writeln!(w, "{x:.16e}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_matrix() -> impl Strategy<Value = CsrMatrix> {
        (1usize..8, 1usize..8).prop_flat_map(|(nr, nc)| {
            proptest::collection::vec((0..nr, 0..nc, -1e6f64..1e6), 0..30)
                .prop_map(move |t| CsrMatrix::from_triplets(nr, nc, &t).unwrap())
        })
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(a in arb_matrix()) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("a.mtx");
            mm_write(&a, &p).unwrap();
            prop_assert_eq!(mm_read(&p).unwrap(), a);
        }
    }

    #[test]
    fn symmetric_round_trip() {
        let a =
            CsrMatrix::from_triplets(3, 3, &[(0, 0, 2.0), (0, 2, 1.0 / 3.0), (2, 0, 1.0 / 3.0), (1, 1, -1.0)]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.mtx");
        mm_write_with(&a, &p, Symmetry::Symmetric).unwrap();
        assert_eq!(mm_read(&p).unwrap(), a);
    }

    #[test]
    fn malformed_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            "%%MatrixMarket matrix array real general\n2 2\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n",
            "garbage\n",
            "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 abc\n",
        ];
        for (k, text) in cases.iter().enumerate() {
            let p = dir.path().join(format!("bad{k}.mtx"));
            std::fs::write(&p, text).unwrap();
            assert!(matches!(mm_read(&p), Err(Error::Parse { .. })), "case {k}");
        }
    }
}
