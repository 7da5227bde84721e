//! Matrix Market reader and writer (coordinate and array layouts).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Integer,
    Complex,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
    Hermitian,
}

/// A parsed file with symmetric storage already expanded.
#[derive(Debug, Clone)]
pub struct MatrixMarket {
    pub nrows: usize,
    pub ncols: usize,
    pub layout: Layout,
    pub complex: bool,
    pub entries: Vec<(usize, usize, C64)>,
}

impl MatrixMarket {
    pub fn density(&self) -> f64 {
        let total = (self.nrows * self.ncols).max(1) as f64;
        self.entries.iter().filter(|e| e.2 != C64::new(0.0, 0.0)).count() as f64 / total
    }

    fn require_real(&self, path: &Path) -> Result<()> {
        if self.complex && self.entries.iter().any(|e| e.2.im != 0.0) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: "complex entries where a real matrix is required".into(),
            });
        }
        Ok(())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v.re;
        }
        m
    }

    pub fn to_complex_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.nrows, self.ncols);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let t: Vec<_> = self.entries.iter().map(|&(i, j, v)| (i, j, v.re)).collect();
        CsrMatrix::from_triplets(self.nrows, self.ncols, &t)
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, message: message.into() }
}

pub fn read(path: impl AsRef<Path>) -> Result<MatrixMarket> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, path)
}

/// Reads a file that must hold real values.
pub fn read_real(path: impl AsRef<Path>) -> Result<MatrixMarket> {
    let mm = read(path.as_ref())?;
    mm.require_real(path.as_ref())?;
    Ok(mm)
}

pub fn parse(text: &str, path: &Path) -> Result<MatrixMarket> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(path, 1, "missing `%%MatrixMarket matrix` banner"));
    }
    let layout = match tokens[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(parse_err(path, 1, format!("unknown layout `{other}`"))),
    };
    let field = match tokens[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "complex" => Field::Complex,
        "pattern" => Field::Pattern,
        other => return Err(parse_err(path, 1, format!("unknown field `{other}`"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        "hermitian" => Symmetry::Hermitian,
        other => return Err(parse_err(path, 1, format!("unknown symmetry `{other}`"))),
    };
    if layout == Layout::Array && field == Field::Pattern {
        return Err(parse_err(path, 1, "pattern field is only valid for coordinate layout"));
    }

    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_line, size_text) = body.next().ok_or_else(|| parse_err(path, 2, "missing size line"))?;
    let sizes: Vec<usize> = size_text
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(path, size_line + 1, format!("bad size line: {e}")))?;
    let expected_sizes = if layout == Layout::Coordinate { 3 } else { 2 };
    if sizes.len() != expected_sizes {
        return Err(parse_err(path, size_line + 1, format!("expected {expected_sizes} integers on size line")));
    }
    let (nrows, ncols) = (sizes[0], sizes[1]);
    if symmetry != Symmetry::General && nrows != ncols {
        return Err(parse_err(path, size_line + 1, "symmetric storage requires a square matrix"));
    }

    let value_width = match field {
        Field::Complex => 2,
        Field::Pattern => 0,
        _ => 1,
    };
    let parse_value = |toks: &[&str], line: usize| -> Result<C64> {
        let num = |t: &str| t.parse::<f64>().map_err(|e| parse_err(path, line, format!("bad number `{t}`: {e}")));
        Ok(match field {
            Field::Pattern => C64::new(1.0, 0.0),
            Field::Complex => C64::new(num(toks[0])?, num(toks[1])?),
            _ => C64::new(num(toks[0])?, 0.0),
        })
    };

    let mut entries = Vec::new();
    let mut push = |i: usize, j: usize, v: C64| {
        entries.push((i, j, v));
        if i != j {
            match symmetry {
                Symmetry::General => {}
                Symmetry::Symmetric => entries.push((j, i, v)),
                Symmetry::SkewSymmetric => entries.push((j, i, -v)),
                Symmetry::Hermitian => entries.push((j, i, v.conj())),
            }
        }
    };

    match layout {
        Layout::Coordinate => {
            let nnz = sizes[2];
            let mut seen = 0;
            for (lineno, text) in body {
                let toks: Vec<&str> = text.split_whitespace().collect();
                if toks.len() != 2 + value_width {
                    return Err(parse_err(path, lineno + 1, format!("expected {} fields", 2 + value_width)));
                }
                let i: usize = toks[0].parse().map_err(|_| parse_err(path, lineno + 1, "bad row index"))?;
                let j: usize = toks[1].parse().map_err(|_| parse_err(path, lineno + 1, "bad column index"))?;
                if i == 0 || j == 0 || i > nrows || j > ncols {
                    return Err(parse_err(path, lineno + 1, format!("index ({i}, {j}) outside {nrows}x{ncols}")));
                }
                let v = parse_value(&toks[2..], lineno + 1)?;
                push(i - 1, j - 1, v);
                seen += 1;
            }
            if seen != nnz {
                return Err(parse_err(path, size_line + 1, format!("declared {nnz} entries, found {seen}")));
            }
        }
        Layout::Array => {
            // column-major; symmetric variants store the lower triangle only
            let mut slots = Vec::new();
            for j in 0..ncols {
                let start = match symmetry {
                    Symmetry::General => 0,
                    Symmetry::SkewSymmetric => j + 1,
                    _ => j,
                };
                for i in start..nrows {
                    slots.push((i, j));
                }
            }
            let mut slot_iter = slots.into_iter();
            for (lineno, text) in body {
                let toks: Vec<&str> = text.split_whitespace().collect();
                if toks.len() != value_width {
                    return Err(parse_err(path, lineno + 1, format!("expected {value_width} fields")));
                }
                let (i, j) = slot_iter
                    .next()
                    .ok_or_else(|| parse_err(path, lineno + 1, "more values than the declared size"))?;
                let v = parse_value(&toks, lineno + 1)?;
                push(i, j, v);
            }
            if slot_iter.next().is_some() {
                return Err(parse_err(path, size_line + 1, "fewer values than the declared size"));
            }
        }
    }
    Ok(MatrixMarket { nrows, ncols, layout, complex: field == Field::Complex, entries })
}

fn write_file(path: &Path, text: String) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_real_array(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::from("%%MatrixMarket matrix array real general\n");
    writeln!(out, "{} {}", m.nrows(), m.ncols()).unwrap();
    for v in m.iter() {
        writeln!(out, "{v:e}").unwrap();
    }
    write_file(path.as_ref(), out)
}

/// Writes a complex matrix; falls back to a real file when every imaginary part vanishes.
pub fn write_complex_array(path: impl AsRef<Path>, m: &CMat) -> Result<()> {
    if m.iter().all(|z| z.im == 0.0) {
        return write_real_array(path, &m.map(|z| z.re));
    }
    let mut out = String::from("%%MatrixMarket matrix array complex general\n");
    writeln!(out, "{} {}", m.nrows(), m.ncols()).unwrap();
    for z in m.iter() {
        writeln!(out, "{:e} {:e}", z.re, z.im).unwrap();
    }
    write_file(path.as_ref(), out)
}

pub fn write_coordinate(path: impl AsRef<Path>, m: &CsrMatrix) -> Result<()> {
    let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
    writeln!(out, "{} {} {}", m.nrows(), m.ncols(), m.nnz()).unwrap();
    for (i, j, v) in m.triplets() {
        writeln!(out, "{} {} {v:e}", i + 1, j + 1).unwrap();
    }
    write_file(path.as_ref(), out)
}
