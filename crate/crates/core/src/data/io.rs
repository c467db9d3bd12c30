//! Dataset files.
//!
//! CSV: header `label,f0,f1,...`, one sample per line.
//!
//! Binary (little-endian throughout):
//!
//! ```text
//! b"HSGD" | u32 n | u32 input_dim | u32 num_classes | n·input_dim f32 features | n u32 labels
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use super::Dataset;
use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"HSGD";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Csv,
    Binary,
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(DatasetFormat::Csv),
            "binary" | "bin" => Ok(DatasetFormat::Binary),
            other => Err(Error::Config(format!("unknown dataset format `{other}`"))),
        }
    }
}

pub fn load_dataset(path: &Path, format: DatasetFormat, num_classes: Option<usize>) -> Result<Dataset> {
    match format {
        DatasetFormat::Csv => load_csv(path, num_classes),
        DatasetFormat::Binary => {
            let ds = load_binary(path)?;
            match num_classes {
                Some(c) if c != ds.num_classes() => Err(Error::Shape(format!(
                    "file declares {} classes, config expects {c}",
                    ds.num_classes()
                ))),
                _ => Ok(ds),
            }
        }
    }
}

/// Reads a CSV dataset. When `num_classes` is `None` it is inferred as
/// `max label + 1`.
pub fn load_csv(path: &Path, num_classes: Option<usize>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(Error::Parse { line: 1, msg: "missing header".into() });
    }
    if headers.get(0) != Some("label") {
        return Err(Error::Parse { line: 1, msg: "first column must be `label`".into() });
    }
    let input_dim = headers.len() - 1;
    for (k, name) in headers.iter().skip(1).enumerate() {
        if name != format!("f{k}") {
            return Err(Error::Parse { line: 1, msg: format!("expected column `f{k}`, found `{name}`") });
        }
    }
    if input_dim == 0 {
        return Err(Error::Parse { line: 1, msg: "no feature columns".into() });
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        if record.len() != input_dim + 1 {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} fields, found {}", input_dim + 1, record.len()),
            });
        }
        let label: usize = record[0]
            .parse()
            .map_err(|_| Error::Parse { line, msg: format!("bad label `{}`", &record[0]) })?;
        labels.push(label);
        for field in record.iter().skip(1) {
            let v: f64 = field.parse().map_err(|_| Error::Parse { line, msg: format!("bad feature `{field}`") })?;
            features.push(v);
        }
    }
    if labels.is_empty() {
        return Err(Error::Parse { line: 2, msg: "no samples".into() });
    }
    let classes = num_classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1).max(2));
    Dataset::new(features, input_dim, labels, classes)
}

/// Writes a CSV dataset. Values use the shortest representation that parses
/// back to the same `f64`.
pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["label".to_string()];
    header.extend((0..dataset.input_dim()).map(|k| format!("f{k}")));
    writer.write_record(&header)?;
    for i in 0..dataset.len() {
        let mut rec = vec![dataset.labels()[i].to_string()];
        rec.extend(dataset.row(i).iter().map(|v| v.to_string()));
        writer.write_record(&rec)?;
    }
    writer.flush()?;
    Ok(())
}

fn read_u32(bytes: &[u8], offset: &mut usize) -> Result<u32> {
    let end = *offset + 4;
    let chunk = bytes
        .get(*offset..end)
        .ok_or_else(|| Error::Parse { line: 0, msg: format!("truncated binary file at byte {offset}") })?;
    *offset = end;
    Ok(u32::from_le_bytes(chunk.try_into().expect("4-byte slice")))
}

pub fn load_binary(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path)?;
    if bytes.len() < 16 || &bytes[..4] != BINARY_MAGIC {
        return Err(Error::Parse { line: 0, msg: "missing HSGD magic".into() });
    }
    let mut off = 4;
    let n = read_u32(&bytes, &mut off)? as usize;
    let input_dim = read_u32(&bytes, &mut off)? as usize;
    let num_classes = read_u32(&bytes, &mut off)? as usize;
    let expected = 16 + 4 * n * input_dim + 4 * n;
    if bytes.len() != expected {
        return Err(Error::Parse {
            line: 0,
            msg: format!("binary file is {} bytes, header implies {expected}", bytes.len()),
        });
    }
    let mut features = Vec::with_capacity(n * input_dim);
    for _ in 0..n * input_dim {
        features.push(f32::from_bits(read_u32(&bytes, &mut off)?) as f64);
    }
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        labels.push(read_u32(&bytes, &mut off)? as usize);
    }
    Dataset::new(features, input_dim, labels, num_classes)
}

/// Writes the binary format. Features are narrowed to `f32`.
pub fn save_binary(dataset: &Dataset, path: &Path) -> Result<()> {
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("{what} {v} does not fit in u32")))
    };
    let mut out = Vec::with_capacity(16 + 4 * dataset.features().len() + 4 * dataset.len());
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&to_u32(dataset.len(), "n")?.to_le_bytes());
    out.extend_from_slice(&to_u32(dataset.input_dim(), "input_dim")?.to_le_bytes());
    out.extend_from_slice(&to_u32(dataset.num_classes(), "num_classes")?.to_le_bytes());
    for v in dataset.features() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    for l in dataset.labels() {
        out.extend_from_slice(&to_u32(*l, "label")?.to_le_bytes());
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> Dataset {
        Dataset::new(vec![0.1, -2.5, 3.0, 1e-7, 0.3333333333333333, 42.0], 2, vec![1, 0, 2], 3).unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let ds = fixture();
        save_csv(&ds, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("label,f0,f1\n"));
        assert_eq!(load_csv(&path, Some(3)).unwrap(), ds);
        assert_eq!(load_dataset(&path, DatasetFormat::Csv, None).unwrap(), ds);
    }

    #[test]
    fn binary_round_trip_through_f32() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        let ds = fixture();
        save_binary(&ds, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"HSGD");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 3);
        assert_eq!(bytes.len(), 16 + 4 * 6 + 4 * 3);
        let back = load_binary(&path).unwrap();
        assert_eq!(back.labels(), ds.labels());
        for (a, b) in back.features().iter().zip(ds.features()) {
            assert_eq!(*a, *b as f32 as f64);
        }
        assert!(load_dataset(&path, DatasetFormat::Binary, Some(4)).is_err());
    }

    #[test]
    fn malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let write = |name: &str, body: &[u8]| {
            let p = dir.path().join(name);
            fs::write(&p, body).unwrap();
            p
        };
        let empty = write("empty.csv", b"");
        assert!(matches!(load_csv(&empty, None), Err(Error::Parse { .. })));
        let header_only = write("h.csv", b"label,f0\n");
        assert!(matches!(load_csv(&header_only, None), Err(Error::Parse { .. })));
        let bad_header = write("bh.csv", b"y,f0\n0,1.0\n");
        assert!(matches!(load_csv(&bad_header, None), Err(Error::Parse { .. })));
        let ragged = write("r.csv", b"label,f0,f1\n0,1.0\n");
        assert!(matches!(load_csv(&ragged, None), Err(Error::Parse { .. })));
        let bad_num = write("n.csv", b"label,f0\n0,abc\n");
        assert!(matches!(load_csv(&bad_num, None), Err(Error::Parse { .. })));
        let too_many_classes = write("c.csv", b"label,f0\n5,1.0\n");
        assert!(load_csv(&too_many_classes, Some(3)).is_err());

        let no_magic = write("x.bin", b"ABCD\0\0\0\0\0\0\0\0\0\0\0\0");
        assert!(matches!(load_binary(&no_magic), Err(Error::Parse { .. })));
        let mut truncated = b"HSGD".to_vec();
        for v in [2u32, 1, 2] {
            truncated.extend_from_slice(&v.to_le_bytes());
        }
        truncated.extend_from_slice(&1.0f32.to_le_bytes());
        let truncated = write("t.bin", &truncated);
        assert!(matches!(load_binary(&truncated), Err(Error::Parse { .. })));
    }
}
