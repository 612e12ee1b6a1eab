//! NPY (version 1.0) and headerless CSV input/output.
//!
//! Readers accept little-endian `f4`/`f8` arrays in C order. Writers always
//! emit version 1.0, `<f8`, C order, with the header padded to 64 bytes.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::representations::{ConvRepresentation, RepresentationMatrix};

const MAGIC: &[u8; 6] = b"\x93NUMPY";

/// A dense array read from an NPY file, values in C order.
#[derive(Clone, Debug, PartialEq)]
pub struct NpyArray {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NpyArray {
    /// Interprets a 2-D array as a matrix.
    pub fn into_matrix(self) -> Option<DMatrix<f64>> {
        match self.shape[..] {
            [r, c] => Some(DMatrix::from_row_slice(r, c, &self.data)),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Dtype {
    F4,
    F8,
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_npy(path: impl AsRef<Path>) -> Result<NpyArray> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    read_npy_from(&mut BufReader::new(file), path)
}

/// Reads an NPY stream; `path` is used only for error messages.
pub fn read_npy_from<R: Read>(reader: &mut R, path: &Path) -> Result<NpyArray> {
    let mut preamble = [0u8; 8];
    reader.read_exact(&mut preamble).map_err(io_err(path))?;
    if &preamble[..6] != MAGIC {
        return Err(format_err(path, "missing NPY magic string"));
    }
    let header_len = match preamble[6] {
        1 => {
            let mut buf = [0u8; 2];
            reader.read_exact(&mut buf).map_err(io_err(path))?;
            u16::from_le_bytes(buf) as usize
        }
        2 | 3 => {
            let mut buf = [0u8; 4];
            reader.read_exact(&mut buf).map_err(io_err(path))?;
            u32::from_le_bytes(buf) as usize
        }
        v => return Err(format_err(path, format!("unsupported NPY version {v}"))),
    };
    let mut header = vec![0u8; header_len];
    reader.read_exact(&mut header).map_err(io_err(path))?;
    let header = String::from_utf8(header).map_err(|_| format_err(path, "header is not UTF-8"))?;
    let (dtype, fortran, shape) = parse_header(&header).map_err(|m| format_err(path, m))?;
    if fortran {
        return Err(format_err(path, "Fortran-order arrays are not supported"));
    }
    let count: usize = shape.iter().product();
    let width = match dtype {
        Dtype::F4 => 4,
        Dtype::F8 => 8,
    };
    let mut bytes = vec![0u8; count * width];
    reader
        .read_exact(&mut bytes)
        .map_err(|_| format_err(path, format!("expected {count} values, file is truncated")))?;
    let data = match dtype {
        Dtype::F8 => bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect(),
        Dtype::F4 => bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect(),
    };
    Ok(NpyArray { shape, data })
}

fn dict_value<'a>(header: &'a str, key: &str) -> Result<&'a str, String> {
    let needle = format!("'{key}'");
    let start = header
        .find(&needle)
        .ok_or_else(|| format!("header has no '{key}' entry"))?;
    let rest = &header[start + needle.len()..];
    let rest = rest.trim_start();
    let rest = rest
        .strip_prefix(':')
        .ok_or_else(|| format!("malformed '{key}' entry"))?;
    Ok(rest.trim_start())
}

fn parse_header(header: &str) -> Result<(Dtype, bool, Vec<usize>), String> {
    let descr = dict_value(header, "descr")?;
    let quote = descr.chars().next().ok_or("empty descr")?;
    let descr = descr[1..].split(quote).next().ok_or("unterminated descr")?;
    let dtype = match descr {
        "<f8" => Dtype::F8,
        "<f4" => Dtype::F4,
        other => return Err(format!("unsupported dtype '{other}' (expected <f4 or <f8)")),
    };
    let fortran = dict_value(header, "fortran_order")?;
    let fortran = if fortran.starts_with("True") {
        true
    } else if fortran.starts_with("False") {
        false
    } else {
        return Err("malformed fortran_order".into());
    };
    let shape = dict_value(header, "shape")?;
    let shape = shape
        .strip_prefix('(')
        .and_then(|s| s.split(')').next())
        .ok_or("malformed shape")?;
    let dims = shape
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| format!("bad shape entry '{s}'")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((dtype, fortran, dims))
}

/// Writes an NPY v1.0 `<f8` C-order array.
pub fn write_npy_to<W: Write>(writer: &mut W, shape: &[usize], data: &[f64]) -> std::io::Result<()> {
    assert_eq!(shape.iter().product::<usize>(), data.len(), "shape does not match data");
    let dims = match shape {
        [d] => format!("({d},)"),
        _ => format!(
            "({})",
            shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
        ),
    };
    let mut header = format!("{{'descr': '<f8', 'fortran_order': False, 'shape': {dims}, }}");
    let unpadded = MAGIC.len() + 2 + 2 + header.len() + 1;
    header.push_str(&" ".repeat((64 - unpadded % 64) % 64));
    header.push('\n');
    writer.write_all(MAGIC)?;
    writer.write_all(&[1, 0])?;
    writer.write_all(&(header.len() as u16).to_le_bytes())?;
    writer.write_all(header.as_bytes())?;
    for v in data {
        writer.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_npy(path: impl AsRef<Path>, shape: &[usize], data: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut writer = BufWriter::new(file);
    write_npy_to(&mut writer, shape, data).map_err(io_err(path))?;
    writer.flush().map_err(io_err(path))
}

pub fn write_matrix_npy(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let row_major = m.transpose();
    write_npy(path, &[m.nrows(), m.ncols()], row_major.as_slice())
}

/// Reads a headerless comma-separated matrix; rows are stimuli.
pub fn read_csv_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format_err(path, e.to_string()))?;
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| format_err(path, e.to_string()))?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(format_err(
                    path,
                    format!("row {} has {} fields, expected {c}", line + 1, record.len()),
                ))
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| format_err(path, format!("row {}: '{field}' is not a number", line + 1)))?;
            values.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| format_err(path, "empty CSV file"))?;
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

/// A representation loaded from disk.
#[derive(Clone, Debug)]
pub enum LoadedRepresentation {
    Matrix(RepresentationMatrix),
    Conv(ConvRepresentation),
}

impl LoadedRepresentation {
    pub fn label(&self) -> &str {
        match self {
            LoadedRepresentation::Matrix(m) => m.label(),
            LoadedRepresentation::Conv(c) => c.label(),
        }
    }
}

/// Loads a 2-D (matrix) or 4-D (conv) NPY file, or a CSV matrix.
pub fn load_representation(path: impl AsRef<Path>) -> Result<LoadedRepresentation> {
    let path = path.as_ref();
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let with_path = |e: Error| match e {
        Error::InvalidInput(msg) | Error::Shape(msg) => format_err(path, msg),
        other => other,
    };
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        let data = read_csv_matrix(path)?;
        let rep = RepresentationMatrix::new(data).map_err(with_path)?;
        return Ok(LoadedRepresentation::Matrix(rep.with_label(label)));
    }
    let array = read_npy(path)?;
    match array.shape[..] {
        [m, n] => {
            let rep = RepresentationMatrix::from_row_slice(m, n, &array.data).map_err(with_path)?;
            Ok(LoadedRepresentation::Matrix(rep.with_label(label)))
        }
        [m, h, w, c] => {
            let conv = ConvRepresentation::new(array.data, [m, h, w, c]).map_err(with_path)?;
            Ok(LoadedRepresentation::Conv(conv.with_label(label)))
        }
        _ => Err(format_err(
            path,
            format!("expected a 2-D or 4-D array, got shape {:?}", array.shape),
        )),
    }
}

/// Path helper used by writers that emit sidecar files next to an NPY file.
pub fn sidecar_path(npy: &Path, extension: &str) -> PathBuf {
    npy.with_extension(extension)
}
