//! Matrix Market coordinate files and plain vector files.
//!
//! Only the `matrix coordinate real general|symmetric` flavour is handled.
//! Symmetric files store the lower triangle; reading mirrors it.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    General,
    Symmetric,
}

pub fn read_matrix_market<R: Read>(reader: R) -> Result<SparseMatrix> {
    let reader = BufReader::new(reader);
    let mut lines = reader.lines().enumerate();
    let parse_err = |line: usize, message: &str| Error::Parse { line: line + 1, message: message.to_string() };

    let (hline, header) = lines.next().ok_or_else(|| parse_err(0, "empty file"))?;
    let header = header?;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(hline, "missing %%MatrixMarket matrix header"));
    }
    if tokens[2] != "coordinate" {
        return Err(parse_err(hline, "only coordinate storage is supported"));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(parse_err(hline, "only real or integer fields are supported"));
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        _ => return Err(parse_err(hline, "only general or symmetric matrices are supported")),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (ln, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(ln, "size line needs rows, cols, entries"));
                }
                let nums: Vec<usize> = fields
                    .iter()
                    .map(|f| f.parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| parse_err(ln, "malformed size line"))?;
                size = Some((nums[0], nums[1], nums[2]));
                triplets.reserve(nums[2]);
            }
            Some((rows, cols, _)) => {
                if fields.len() != 3 {
                    return Err(parse_err(ln, "entry line needs row, col, value"));
                }
                let i: usize = fields[0].parse().map_err(|_| parse_err(ln, "bad row index"))?;
                let j: usize = fields[1].parse().map_err(|_| parse_err(ln, "bad column index"))?;
                let v: f64 = fields[2].parse().map_err(|_| parse_err(ln, "bad value"))?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(parse_err(ln, "index out of range"));
                }
                triplets.push((i - 1, j - 1, v));
                if symmetry == Symmetry::Symmetric && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (rows, cols, declared) = size.ok_or_else(|| parse_err(0, "missing size line"))?;
    let stored = match symmetry {
        Symmetry::General => triplets.len(),
        Symmetry::Symmetric => triplets.iter().filter(|(i, j, _)| i >= j).count(),
    };
    if stored != declared {
        return Err(Error::Parse {
            line: 0,
            message: format!("header declares {declared} entries, found {stored}"),
        });
    }
    SparseMatrix::from_triplets(rows, cols, &triplets)
}

pub fn write_matrix_market<W: Write>(m: &SparseMatrix, symmetry: Symmetry, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let kind = match symmetry {
        Symmetry::General => "general",
        Symmetry::Symmetric => "symmetric",
    };
    if symmetry == Symmetry::Symmetric && (m.nrows() != m.ncols() || m.asymmetry() != 0.0) {
        return Err(Error::InvalidArgument("symmetric output requested for a non-symmetric matrix".into()));
    }
    let entries: Vec<_> = m
        .triplets()
        .filter(|&(i, j, _)| symmetry == Symmetry::General || i >= j)
        .collect();
    writeln!(w, "%%MatrixMarket matrix coordinate real {kind}")?;
    writeln!(w, "{} {} {}", m.nrows(), m.ncols(), entries.len())?;
    for (i, j, v) in entries {
        writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_matrix_market(path: &Path) -> Result<SparseMatrix> {
    read_matrix_market(File::open(path)?)
}

pub fn save_matrix_market(m: &SparseMatrix, symmetry: Symmetry, path: &Path) -> Result<()> {
    write_matrix_market(m, symmetry, File::create(path)?)
}

/// Reads whitespace-, comma- or newline-separated numbers; `#` starts a comment.
pub fn read_vector<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (ln, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("");
        for tok in body.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: ln + 1,
                message: format!("not a number: {tok:?}"),
            })?;
            out.push(v);
        }
    }
    Ok(out)
}

/// One value per line, shortest round-trip representation.
pub fn write_vector<W: Write>(v: &[f64], writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for x in v {
        writeln!(w, "{x:?}")?;
    }
    w.flush()?;
    Ok(())
}

/// CSV with an `index,value` header.
pub fn write_vector_csv<W: Write>(v: &[f64], writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    writeln!(w, "index,value")?;
    for (i, x) in v.iter().enumerate() {
        writeln!(w, "{i},{x:?}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vector_csv<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (ln, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || (ln == 0 && t.starts_with("index")) {
            continue;
        }
        let value = t.rsplit(',').next().unwrap_or("");
        out.push(value.trim().parse().map_err(|_| Error::Parse {
            line: ln + 1,
            message: format!("bad CSV value {value:?}"),
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_general() {
        let m = SparseMatrix::from_triplets(2, 3, &[(0, 0, 1.5), (1, 2, -2.25e-7)]).unwrap();
        let mut buf = Vec::new();
        write_matrix_market(&m, Symmetry::General, &mut buf).unwrap();
        assert_eq!(read_matrix_market(&buf[..]).unwrap(), m);
    }

    #[test]
    fn symmetric_file_is_mirrored() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% c\n2 2 2\n1 1 4\n2 1 1\n";
        let m = read_matrix_market(text.as_bytes()).unwrap();
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(1, 0), 1.0);
        let mut buf = Vec::new();
        write_matrix_market(&m, Symmetry::Symmetric, &mut buf).unwrap();
        assert_eq!(read_matrix_market(&buf[..]).unwrap(), m);
    }

    #[test]
    fn malformed_inputs_are_errors() {
        assert!(read_matrix_market("".as_bytes()).is_err());
        assert!(read_matrix_market("%%MatrixMarket matrix array real general\n1 1\n1\n".as_bytes()).is_err());
        assert!(read_matrix_market("%%MatrixMarket matrix coordinate real general\n1 1 1\n2 1 1\n".as_bytes()).is_err());
        assert!(read_matrix_market("%%MatrixMarket matrix coordinate real general\n1 1 2\n1 1 1\n".as_bytes()).is_err());
        assert!(read_matrix_market("%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 x\n".as_bytes()).is_err());
    }

    #[test]
    fn vector_roundtrips() {
        let v = vec![1.0, -0.1, 3.5e-300];
        let mut buf = Vec::new();
        write_vector(&v, &mut buf).unwrap();
        assert_eq!(read_vector(&buf[..]).unwrap(), v);
        let mut buf = Vec::new();
        write_vector_csv(&v, &mut buf).unwrap();
        assert_eq!(read_vector_csv(&buf[..]).unwrap(), v);
        assert_eq!(read_vector("1, 2\n3 # c\n".as_bytes()).unwrap(), vec![1.0, 2.0, 3.0]);
    }
}
