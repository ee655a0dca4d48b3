//! Shared text/file plumbing: atomic writes, line-oriented parsing with
//! positioned errors, full-precision float round-tripping, and hashing.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::numerics::Matrix;
use crate::{Error, Result, Scalar};

/// Write `contents` to `path` atomically: the data lands in a sibling
/// temporary file first and is renamed into place, so readers never observe
/// a partially written artifact. Parent directories are created as needed.
pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let wrap = |e| Error::io(path, e);
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(wrap)?;
        }
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Argument(format!("not a file path: {}", path.display())))?;
    let mut tmp = path.to_path_buf();
    tmp.set_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(wrap)
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        write!(out, "{byte:02x}").expect("string write");
    }
    out
}

/// Shortest decimal representation that parses back to the same bits
/// (guaranteed by the standard library's float formatting).
pub(crate) fn fmt_float<F: Scalar>(x: F) -> String {
    format!("{x}")
}

pub(crate) fn parse_float<F: Scalar>(text: &str, what: &str) -> Result<F> {
    text.parse::<F>()
        .map_err(|_| Error::format(what, format!("invalid number {text:?}")))
}

pub(crate) fn parse_usize(text: &str, what: &str) -> Result<usize> {
    text.parse::<usize>()
        .map_err(|_| Error::format(what, format!("invalid count {text:?}")))
}

/// Line cursor over a text document that reports the 1-based line number in
/// every error.
pub(crate) struct LineReader<'a> {
    what: String,
    lines: std::str::Lines<'a>,
    line_no: usize,
}

impl<'a> LineReader<'a> {
    pub fn new(what: impl Into<String>, source: &'a str) -> Self {
        Self {
            what: what.into(),
            lines: source.lines(),
            line_no: 0,
        }
    }

    pub fn err(&self, detail: impl std::fmt::Display) -> Error {
        Error::format(&self.what, format!("line {}: {detail}", self.line_no))
    }

    pub fn next_line(&mut self) -> Result<&'a str> {
        self.line_no += 1;
        self.lines
            .next()
            .ok_or_else(|| Error::format(&self.what, "unexpected end of file"))
    }

    pub fn opt_line(&mut self) -> Option<&'a str> {
        let line = self.lines.next();
        if line.is_some() {
            self.line_no += 1;
        }
        line
    }

    /// Read a `key=value` line and demand a specific key.
    pub fn expect_kv(&mut self, key: &str) -> Result<&'a str> {
        self.line_no += 1;
        let line = self
            .lines
            .next()
            .ok_or_else(|| Error::format(&self.what, format!("missing key {key:?}")))?;
        match line.split_once('=') {
            Some((k, v)) if k == key => Ok(v),
            Some((k, _)) => Err(self.err(format!("expected key {key:?}, found {k:?}"))),
            None => Err(self.err(format!("expected {key}=..., found {line:?}"))),
        }
    }

    /// Parse a comma-separated row of exactly `n` floats.
    pub fn float_row<F: Scalar>(&mut self, n: usize) -> Result<Vec<F>> {
        let line = self.next_line()?;
        let mut row = Vec::with_capacity(n);
        for tok in line.split(',') {
            let tok = tok.trim();
            row.push(
                tok.parse::<F>()
                    .map_err(|_| self.err(format!("invalid number {tok:?}")))?,
            );
        }
        if row.len() != n {
            return Err(self.err(format!("expected {n} values, found {}", row.len())));
        }
        Ok(row)
    }
}

/// Append raw CSV rows (no header), one line per matrix row.
pub(crate) fn push_csv_rows<F: Scalar>(out: &mut String, m: &Matrix<F>) {
    for i in 0..m.rows() {
        let mut sep = "";
        for &x in m.row(i) {
            write!(out, "{sep}{}", fmt_float(x)).expect("string write");
            sep = ",";
        }
        out.push('\n');
    }
}

/// Append a named tensor block:
/// `tensor <name> <rows> <cols>` followed by one CSV row per line.
pub(crate) fn push_matrix<F: Scalar>(out: &mut String, name: &str, m: &Matrix<F>) {
    writeln!(out, "tensor {name} {} {}", m.rows(), m.cols()).expect("string write");
    push_csv_rows(out, m);
}

/// Read the tensor block written by [`push_matrix`], checking the name.
pub(crate) fn parse_matrix<F: Scalar>(reader: &mut LineReader, name: &str) -> Result<Matrix<F>> {
    let header = reader.next_line()?;
    let fields: Vec<&str> = header.split_ascii_whitespace().collect();
    if fields.len() != 4 || fields[0] != "tensor" {
        return Err(reader.err(format!("expected tensor header, found {header:?}")));
    }
    if fields[1] != name {
        return Err(reader.err(format!("expected tensor {name:?}, found {:?}", fields[1])));
    }
    let rows = fields[2]
        .parse::<usize>()
        .map_err(|_| reader.err("invalid tensor row count"))?;
    let cols = fields[3]
        .parse::<usize>()
        .map_err(|_| reader.err("invalid tensor column count"))?;
    let mut entries = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        entries.extend(reader.float_row::<F>(cols)?);
    }
    Ok(Matrix::from_vec(rows, cols, entries))
}
