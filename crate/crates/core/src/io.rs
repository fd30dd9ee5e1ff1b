//! Matrix Market, the `MSPM` binary dump, vectors and point clouds.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{MspError, Result};
use crate::linalg::{CsrMatrix, DenseMatrix, Matrix, Storage};

const MSPM_MAGIC: &[u8; 4] = b"MSPM";

fn parse_err(line: usize, msg: impl std::fmt::Display) -> MspError {
    MspError::Parse(format!("line {line}: {msg}"))
}

/// Reads a real Matrix Market file (`coordinate` or `array`, `general` or `symmetric`).
pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<Matrix> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let header = header?.to_ascii_lowercase();
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(1, "missing %%MatrixMarket matrix header"));
    }
    let coordinate = match tokens[2] {
        "coordinate" => true,
        "array" => false,
        other => return Err(parse_err(1, format!("unsupported format {other}"))),
    };
    if !matches!(tokens[3], "real" | "integer" | "double") {
        return Err(parse_err(1, format!("unsupported field {}", tokens[3])));
    }
    let symmetric = match tokens[4] {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err(1, format!("unsupported symmetry {other}"))),
    };

    let mut body = lines.filter_map(|(i, l)| match l {
        Ok(l) if l.trim().is_empty() || l.trim_start().starts_with('%') => None,
        Ok(l) => Some(Ok((i + 1, l))),
        Err(e) => Some(Err(e)),
    });
    let (size_line, size) = body.next().ok_or_else(|| parse_err(2, "missing size line"))??;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().map_err(|e| parse_err(size_line, e)))
        .collect::<Result<_>>()?;

    if coordinate {
        if dims.len() != 3 {
            return Err(parse_err(size_line, "expected `rows cols nnz`"));
        }
        let (rows, cols, nnz) = (dims[0], dims[1], dims[2]);
        let mut trip = Vec::with_capacity(if symmetric { 2 * nnz } else { nnz });
        for _ in 0..nnz {
            let (ln, l) = body.next().ok_or_else(|| parse_err(0, "fewer entries than declared"))??;
            let mut it = l.split_whitespace();
            let mut idx = || -> Result<usize> {
                it.next()
                    .ok_or_else(|| parse_err(ln, "short entry"))?
                    .parse::<usize>()
                    .map_err(|e| parse_err(ln, e))
            };
            let (i, j) = (idx()?, idx()?);
            let v: f64 = l
                .split_whitespace()
                .nth(2)
                .ok_or_else(|| parse_err(ln, "missing value"))?
                .parse()
                .map_err(|e| parse_err(ln, e))?;
            if i == 0 || j == 0 || i > rows || j > cols {
                return Err(parse_err(ln, format!("index ({i}, {j}) out of range")));
            }
            trip.push((i - 1, j - 1, v));
            if symmetric && i != j {
                trip.push((j - 1, i - 1, v));
            }
        }
        Ok(Matrix::csr(CsrMatrix::from_triplets(rows, cols, &trip)?))
    } else {
        if dims.len() != 2 {
            return Err(parse_err(size_line, "expected `rows cols`"));
        }
        let (rows, cols) = (dims[0], dims[1]);
        let mut d = DenseMatrix::zeros(rows, cols);
        // column-major; symmetric arrays store the lower triangle only
        for j in 0..cols {
            let start = if symmetric { j } else { 0 };
            for i in start..rows {
                let (ln, l) = body.next().ok_or_else(|| parse_err(0, "fewer entries than declared"))??;
                let v: f64 = l.trim().parse().map_err(|e| parse_err(ln, e))?;
                d.set(i, j, v);
                if symmetric {
                    d.set(j, i, v);
                }
            }
        }
        Ok(Matrix::dense(d))
    }
}

pub fn write_matrix_market<W: Write>(mut w: W, a: &Matrix) -> Result<()> {
    match a.storage() {
        Storage::Dense(d) => {
            writeln!(w, "%%MatrixMarket matrix array real general")?;
            writeln!(w, "{} {}", d.rows(), d.cols())?;
            for j in 0..d.cols() {
                for i in 0..d.rows() {
                    writeln!(w, "{:e}", d.get(i, j))?;
                }
            }
        }
        Storage::Csr(c) => {
            writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
            writeln!(w, "{} {} {}", c.rows(), c.cols(), c.nnz())?;
            for i in 0..c.rows() {
                for (j, v) in c.row_entries(i) {
                    writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
                }
            }
        }
    }
    Ok(())
}

/// `MSPM` little-endian dump: magic, `u64` rows, `u64` cols, row-major `f64` payload.
pub fn write_mspm<W: Write>(mut w: W, a: &DenseMatrix) -> Result<()> {
    w.write_all(MSPM_MAGIC)?;
    w.write_all(&(a.rows() as u64).to_le_bytes())?;
    w.write_all(&(a.cols() as u64).to_le_bytes())?;
    for v in a.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_mspm<R: Read>(mut r: R) -> Result<DenseMatrix> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MSPM_MAGIC {
        return Err(MspError::Parse("bad MSPM magic".into()));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| MspError::Parse("MSPM dimensions overflow".into()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != len * 8 {
        return Err(MspError::Parse(format!(
            "MSPM payload has {} bytes, expected {}",
            bytes.len(),
            len * 8
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    DenseMatrix::from_row_major(rows, cols, data)
}

/// Reads `.mtx` or `MSPM` files, detected by content.
pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let mut f = BufReader::new(File::open(path)?);
    let head = f.fill_buf()?;
    if head.starts_with(MSPM_MAGIC) {
        Ok(Matrix::dense(read_mspm(f)?))
    } else {
        read_matrix_market(f)
    }
}

pub fn write_matrix(path: &Path, a: &Matrix) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    if path.extension().is_some_and(|e| e == "mspm" || e == "bin") {
        write_mspm(w, &a.to_dense())
    } else {
        write_matrix_market(w, a)
    }
}

/// Whitespace- or comma-separated numbers; `#` and `%` start comment lines.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with('%') {
            continue;
        }
        for tok in t.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()) {
            out.push(tok.parse().map_err(|e| parse_err(ln + 1, e))?);
        }
    }
    Ok(out)
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    parse_vector(&std::fs::read_to_string(path)?)
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for x in v {
        writeln!(w, "{x:e}")?;
    }
    Ok(())
}

/// One point per line, coordinates separated by commas or whitespace. A first line
/// that fails to parse is treated as a header.
pub fn parse_points(text: &str) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = t
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(str::parse::<f64>)
            .collect();
        match parsed {
            Ok(r) => rows.push(r),
            Err(_) if rows.is_empty() && ln == 0 => continue,
            Err(e) => return Err(parse_err(ln + 1, e)),
        }
    }
    DenseMatrix::from_rows(&rows)
}

pub fn read_points(path: &Path) -> Result<DenseMatrix> {
    parse_points(&std::fs::read_to_string(path)?)
}
