//! On-disk formats.
//!
//! - `EMB v1` text: header `EMB v1 <rows> <cols>`, one whitespace-separated
//!   row per line, optional trailing `LABELS` line of 0/1 flags.
//! - `EMBF` binary: magic, version byte `0x01`, `u32` LE rows and cols, then
//!   `f32` LE values row-major. Labels live in a sidecar `.labels` file
//!   holding a single `LABELS` line.
//! - Masks: binary PGM (`P5`), a byte `>= 128` is a set bit.
//! - Latent grids: `EMBF` (or `EMB v1`) with `rows == cols == side`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use idforge_core::{EmbeddingMatrix, LatentGrid, Mask, Matrix};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const TEXT_VERSION: &str = "EMB v1";
pub const BIN_MAGIC: &[u8; 4] = b"EMBF";
pub const BIN_VERSION: u8 = 0x01;
const BIN_HEADER: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Text,
    Bin,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Text => "emb",
            Format::Bin => "embf",
        }
    }
}

/// A matrix read from disk plus optional per-row inlier flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeled {
    pub matrix: Matrix,
    pub labels: Option<Vec<bool>>,
}

impl Labeled {
    pub fn embeddings(&self) -> CliResult<EmbeddingMatrix> {
        Ok(EmbeddingMatrix::new(self.matrix.clone())?)
    }
}

fn labels_line(labels: &[bool]) -> String {
    let flags: Vec<&str> = labels.iter().map(|&b| if b { "1" } else { "0" }).collect();
    format!("LABELS {}\n", flags.join(" "))
}

fn parse_labels(rest: &str, rows: usize, line: usize) -> Result<Vec<bool>, String> {
    let labels = rest
        .split_whitespace()
        .map(|t| match t {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(format!("line {line}: label {other:?} is not 0 or 1")),
        })
        .collect::<Result<Vec<_>, _>>()?;
    if labels.len() != rows {
        return Err(format!("line {line}: {} labels for {rows} rows", labels.len()));
    }
    Ok(labels)
}

pub fn encode_text(m: &Matrix, labels: Option<&[bool]>) -> String {
    let mut out = format!("{TEXT_VERSION} {} {}\n", m.rows(), m.cols());
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    if let Some(l) = labels {
        out.push_str(&labels_line(l));
    }
    out
}

pub fn decode_text(text: &str) -> Result<Labeled, String> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or("line 1: empty input")?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (rows, cols) = match fields.as_slice() {
        ["EMB", "v1", r, c] => (
            r.parse::<usize>().map_err(|_| format!("line 1: bad row count {r:?}"))?,
            c.parse::<usize>().map_err(|_| format!("line 1: bad column count {c:?}"))?,
        ),
        _ => return Err(format!("line 1: expected \"{TEXT_VERSION} <rows> <cols>\", got {header:?}")),
    };
    let mut values = Vec::with_capacity(rows * cols);
    let mut labels = None;
    let mut seen_rows = 0;
    for (no, line) in lines {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if labels.is_some() {
            return Err(format!("line {no}: content after the LABELS line"));
        }
        if let Some(rest) = trimmed.strip_prefix("LABELS") {
            labels = Some(parse_labels(rest, rows, no)?);
            continue;
        }
        if seen_rows == rows {
            return Err(format!("line {no}: more than the declared {rows} rows"));
        }
        let before = values.len();
        for tok in trimmed.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| format!("line {no}: {tok:?} is not a number"))?;
            if !v.is_finite() {
                return Err(format!("line {no}: non-finite value {tok}"));
            }
            values.push(v);
        }
        if values.len() - before != cols {
            return Err(format!("line {no}: expected {cols} values, found {}", values.len() - before));
        }
        seen_rows += 1;
    }
    if seen_rows != rows {
        return Err(format!("expected {rows} rows, found {seen_rows}"));
    }
    let matrix = Matrix::from_vec(rows, cols, values).map_err(|e| e.to_string())?;
    Ok(Labeled { matrix, labels })
}

/// Values are stored as `f32`; decoding widens them back exactly.
pub fn encode_bin(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(BIN_HEADER + 4 * m.as_slice().len());
    out.extend_from_slice(BIN_MAGIC);
    out.push(BIN_VERSION);
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for &v in m.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_bin(bytes: &[u8]) -> Result<Matrix, String> {
    if bytes.len() < BIN_HEADER {
        return Err(format!("offset {}: truncated header", bytes.len()));
    }
    if &bytes[..4] != BIN_MAGIC {
        return Err("offset 0: missing EMBF magic".into());
    }
    if bytes[4] != BIN_VERSION {
        return Err(format!("offset 4: unsupported version {:#04x}", bytes[4]));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
    let (rows, cols) = (word(5), word(9));
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(BIN_HEADER))
        .ok_or("offset 5: dimensions overflow")?;
    if bytes.len() != expected {
        return Err(format!(
            "offset {}: expected {expected} bytes for {rows}x{cols}, found {}",
            bytes.len().min(expected),
            bytes.len()
        ));
    }
    let mut values = Vec::with_capacity(rows * cols);
    for (i, chunk) in bytes[BIN_HEADER..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        if !v.is_finite() {
            return Err(format!("offset {}: non-finite value", BIN_HEADER + 4 * i));
        }
        values.push(v as f64);
    }
    Matrix::from_vec(rows, cols, values).map_err(|e| e.to_string())
}

pub fn encode_pgm(mask: &Mask) -> Vec<u8> {
    let side = mask.side();
    let mut out = format!("P5\n{side} {side}\n255\n").into_bytes();
    out.extend(mask.bits().iter().map(|&b| if b { 255u8 } else { 0 }));
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Mask, String> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(format!("offset {pos}: truncated PGM header"));
        }
        fields.push((start, std::str::from_utf8(&bytes[start..pos]).unwrap_or("")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    if fields[0].1 != "P5" {
        return Err("offset 0: not a binary PGM (P5)".into());
    }
    let num = |(at, s): (usize, &str)| s.parse::<usize>().map_err(|_| format!("offset {at}: bad number {s:?}"));
    let (w, h, maxval) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    if w != h {
        return Err(format!("offset {}: mask must be square, got {w}x{h}", fields[1].0));
    }
    if maxval == 0 || maxval > 255 {
        return Err(format!("offset {}: maxval {maxval} outside 1..=255", fields[3].0));
    }
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() != w * h {
        return Err(format!("offset {pos}: expected {} raster bytes, found {}", w * h, raster.len()));
    }
    Mask::new(w, raster.iter().map(|&b| b >= 128).collect()).map_err(|e| e.to_string())
}

pub fn grid_matrix(grid: &LatentGrid) -> Matrix {
    Matrix::from_vec(grid.side(), grid.side(), grid.values().to_vec()).expect("grid values are finite")
}

pub fn matrix_grid(m: &Matrix) -> Result<LatentGrid, String> {
    if m.rows() != m.cols() {
        return Err(format!("latent grid must be square, got {}x{}", m.rows(), m.cols()));
    }
    LatentGrid::new(m.rows(), m.as_slice().to_vec()).map_err(|e| e.to_string())
}

pub fn labels_path(path: &Path) -> PathBuf {
    path.with_extension("labels")
}

pub fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

/// Writes a matrix in `format`; returns every file written.
pub fn write_matrix(path: &Path, m: &Matrix, labels: Option<&[bool]>, format: Format) -> CliResult<Vec<PathBuf>> {
    match format {
        Format::Text => {
            write_file(path, encode_text(m, labels).as_bytes())?;
            Ok(vec![path.to_path_buf()])
        }
        Format::Bin => {
            write_file(path, &encode_bin(m))?;
            let mut written = vec![path.to_path_buf()];
            if let Some(l) = labels {
                let side = labels_path(path);
                write_file(&side, labels_line(l).as_bytes())?;
                written.push(side);
            }
            Ok(written)
        }
    }
}

/// Reads either format, detected by the `EMBF` magic. Binary labels come
/// from the sidecar file when present.
pub fn read_matrix(path: &Path) -> CliResult<Labeled> {
    let bytes = read_file(path)?;
    if bytes.starts_with(BIN_MAGIC) {
        let matrix = decode_bin(&bytes).map_err(|m| CliError::parse(path, m))?;
        let side = labels_path(path);
        let labels = if side.is_file() {
            let text = String::from_utf8(read_file(&side)?).map_err(|_| CliError::parse(&side, "not UTF-8"))?;
            let rest =
                text.trim().strip_prefix("LABELS").ok_or_else(|| CliError::parse(&side, "line 1: expected LABELS"))?;
            Some(parse_labels(rest, matrix.rows(), 1).map_err(|m| CliError::parse(&side, m))?)
        } else {
            None
        };
        Ok(Labeled { matrix, labels })
    } else {
        let text = String::from_utf8(bytes).map_err(|_| CliError::parse(path, "not UTF-8 and not EMBF"))?;
        decode_text(&text).map_err(|m| CliError::parse(path, m))
    }
}

pub fn write_grid(path: &Path, grid: &LatentGrid, format: Format) -> CliResult<Vec<PathBuf>> {
    write_matrix(path, &grid_matrix(grid), None, format)
}

pub fn read_grid(path: &Path) -> CliResult<LatentGrid> {
    matrix_grid(&read_matrix(path)?.matrix).map_err(|m| CliError::parse(path, m))
}

pub fn write_mask(path: &Path, mask: &Mask) -> CliResult<()> {
    write_file(path, &encode_pgm(mask))
}

pub fn read_mask(path: &Path) -> CliResult<Mask> {
    decode_pgm(&read_file(path)?).map_err(|m| CliError::parse(path, m))
}
