//! On-disk formats for snapshot matrices.
//!
//! Binary `SNP1` layout (all little-endian):
//!
//! | offset | content                          |
//! |--------|----------------------------------|
//! | 0      | magic `SNP1`                     |
//! | 4      | `u64` n_dof                      |
//! | 12     | `u64` n_time                     |
//! | 20     | `f64` dt                         |
//! | 28     | `f64` t0                         |
//! | 36     | `u16` label length `L`           |
//! | 38     | `L` bytes of UTF-8 label         |
//! | 38+L   | n_dof·n_time `f64`, column-major |
//!
//! The CSV format has a header `t,dof0,...,dofN` and one row per time
//! instance.

use std::fs;
use std::io::Write;
use std::path::Path;

use faer::Mat;

use super::SnapshotMatrix;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SNP1";
const HEADER_LEN: usize = 38;

/// Encodes `s` into the `SNP1` byte layout.
pub fn write_binary(s: &SnapshotMatrix) -> Vec<u8> {
    let label = truncate_label(s.label());
    let mut out = Vec::with_capacity(HEADER_LEN + label.len() + 8 * s.n_dof() * s.n_time());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(s.n_dof() as u64).to_le_bytes());
    out.extend_from_slice(&(s.n_time() as u64).to_le_bytes());
    out.extend_from_slice(&s.dt().to_le_bytes());
    out.extend_from_slice(&s.t0().to_le_bytes());
    out.extend_from_slice(&(label.len() as u16).to_le_bytes());
    out.extend_from_slice(label);
    for j in 0..s.n_time() {
        for v in s.column(j) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn truncate_label(label: &str) -> &[u8] {
    let mut end = label.len().min(u16::MAX as usize);
    while !label.is_char_boundary(end) {
        end -= 1;
    }
    &label.as_bytes()[..end]
}

/// Decodes an `SNP1` byte buffer. `origin` only names the source in errors.
pub fn read_binary(bytes: &[u8], origin: &Path) -> Result<SnapshotMatrix> {
    let fail = |offset: usize, reason: String| Error::Format {
        path: origin.to_path_buf(),
        location: format!("byte {offset}"),
        reason,
    };
    if bytes.len() < HEADER_LEN {
        return Err(fail(bytes.len(), "truncated header".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(fail(0, "bad magic, expected SNP1".into()));
    }
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let n_dof = usize::try_from(u64_at(4)).map_err(|_| fail(4, "n_dof overflows".into()))?;
    let n_time = usize::try_from(u64_at(12)).map_err(|_| fail(12, "n_time overflows".into()))?;
    if n_dof == 0 || n_time == 0 {
        return Err(fail(4, format!("empty dimensions {n_dof}x{n_time}")));
    }
    let dt = f64_at(20);
    if !(dt.is_finite() && dt > 0.0) {
        return Err(fail(20, format!("time step must be positive, got {dt}")));
    }
    let t0 = f64_at(28);
    if !t0.is_finite() {
        return Err(fail(28, "non-finite t0".into()));
    }
    let label_len = u16::from_le_bytes([bytes[36], bytes[37]]) as usize;
    let data_start = HEADER_LEN + label_len;
    if bytes.len() < data_start {
        return Err(fail(bytes.len(), "truncated label".into()));
    }
    let label = std::str::from_utf8(&bytes[HEADER_LEN..data_start])
        .map_err(|e| fail(HEADER_LEN + e.valid_up_to(), "label is not UTF-8".into()))?;
    let expected = n_dof
        .checked_mul(n_time)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| fail(4, "dimensions overflow".into()))?;
    let available = bytes.len() - data_start;
    if available != expected {
        return Err(fail(
            bytes.len(),
            format!("dimension mismatch: header promises {expected} data bytes, found {available}"),
        ));
    }
    let mut values = Mat::<f64>::zeros(n_dof, n_time);
    for j in 0..n_time {
        let col = values.col_as_slice_mut(j);
        for (i, slot) in col.iter_mut().enumerate() {
            let offset = data_start + 8 * (j * n_dof + i);
            let v = f64_at(offset);
            if !v.is_finite() {
                return Err(fail(offset, format!("non-finite value {v}")));
            }
            *slot = v;
        }
    }
    SnapshotMatrix::new(values, dt, t0, label)
}

pub fn save_binary(s: &SnapshotMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_binary(s)).map_err(|e| Error::io(path, e))
}

pub fn load_binary(path: impl AsRef<Path>) -> Result<SnapshotMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_binary(&bytes, path)
}

pub fn save_csv(s: &SnapshotMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("t");
    for i in 0..s.n_dof() {
        out.push_str(&format!(",dof{i}"));
    }
    out.push('\n');
    for k in 0..s.n_time() {
        // `{}` on f64 prints the shortest representation that parses back exactly.
        out.push_str(&format!("{}", s.time(k)));
        for v in s.column(k) {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Reads the CSV format. The time step is inferred from the `t` column; a
/// single-row file gets `dt = 1`. The label is the file stem.
pub fn load_csv(path: impl AsRef<Path>) -> Result<SnapshotMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let fail = |line: usize, reason: String| Error::Format {
        path: path.to_path_buf(),
        location: format!("line {line}"),
        reason,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| fail(1, "empty file".into()))?;
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if fields.first() != Some(&"t") || fields.len() < 2 {
        return Err(fail(1, "header must be `t,dof0,...`".into()));
    }
    for (i, f) in fields[1..].iter().enumerate() {
        if *f != format!("dof{i}") {
            return Err(fail(1, format!("expected column `dof{i}`, found `{f}`")));
        }
    }
    let n_dof = fields.len() - 1;
    let mut times = Vec::new();
    let mut columns = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let parsed: Vec<f64> = line
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|e| fail(lineno, format!("cannot parse `{tok}`: {e}")))
            })
            .collect::<Result<_>>()?;
        if parsed.len() != n_dof + 1 {
            return Err(fail(
                lineno,
                format!("expected {} fields, found {}", n_dof + 1, parsed.len()),
            ));
        }
        if let Some(bad) = parsed.iter().position(|v| !v.is_finite()) {
            return Err(fail(lineno, format!("non-finite value in field {bad}")));
        }
        times.push(parsed[0]);
        columns.push(parsed[1..].to_vec());
    }
    if columns.is_empty() {
        return Err(fail(2, "no data rows".into()));
    }
    let t0 = times[0];
    let dt = if times.len() > 1 {
        (times[times.len() - 1] - t0) / (times.len() - 1) as f64
    } else {
        1.0
    };
    if !(dt > 0.0) {
        return Err(fail(3, "time column must be increasing".into()));
    }
    for (k, t) in times.iter().enumerate() {
        let expect = t0 + k as f64 * dt;
        if (t - expect).abs() > 1e-9 * expect.abs().max(1.0) {
            return Err(fail(k + 2, format!("non-uniform time grid: t = {t}, expected {expect}")));
        }
    }
    let label = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default()
        .to_string();
    SnapshotMatrix::from_columns(&columns, dt, t0, label)
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Writes CSV for `.csv` paths and `SNP1` otherwise.
pub fn save(s: &SnapshotMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if is_csv(path) {
        save_csv(s, path)
    } else {
        save_binary(s, path)
    }
}

/// Reads either format; `.csv` files that do not start with the binary
/// magic are parsed as CSV.
pub fn load(path: impl AsRef<Path>) -> Result<SnapshotMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(MAGIC) || !is_csv(path) {
        read_binary(&bytes, path)
    } else {
        load_csv(path)
    }
}
