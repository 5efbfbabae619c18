//! Line-delimited dataset files: a header object followed by one sample per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sample::PersonSample;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DATASET_FORMAT: &str = "remix-ds";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub dim: usize,
}

impl DatasetHeader {
    pub fn new(dim: usize) -> Self {
        Self { format: DATASET_FORMAT.into(), version: DATASET_VERSION, dim }
    }
}

pub fn write_samples<'a, T, W, I>(mut out: W, dim: usize, samples: I) -> Result<usize>
where
    T: Scalar,
    W: Write,
    I: IntoIterator<Item = &'a PersonSample<T>>,
{
    serde_json::to_writer(&mut out, &DatasetHeader::new(dim))?;
    out.write_all(b"\n")?;
    let mut n = 0;
    for s in samples {
        if s.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: s.dim() });
        }
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
        n += 1;
    }
    out.flush()?;
    Ok(n)
}

pub fn write_samples_to_path<'a, T, I>(path: &Path, dim: usize, samples: I) -> Result<usize>
where
    T: Scalar,
    I: IntoIterator<Item = &'a PersonSample<T>>,
{
    write_samples(BufWriter::new(File::create(path)?), dim, samples)
}

/// Stream samples from a reader, validating the header and every record's dimension.
pub fn read_samples<T: Scalar, R: BufRead>(input: R) -> Result<(DatasetHeader, Vec<PersonSample<T>>)> {
    let mut lines = input.lines().enumerate();
    let header: DatasetHeader = match lines.next() {
        Some((_, line)) => serde_json::from_str(&line?).map_err(|e| Error::Format { line: 1, message: e.to_string() })?,
        None => return Err(Error::Format { line: 1, message: "missing header".into() }),
    };
    if header.format != DATASET_FORMAT || header.version != DATASET_VERSION {
        return Err(Error::VersionMismatch {
            what: "dataset",
            found: format!("{} v{}", header.format, header.version),
        });
    }
    let mut samples = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: PersonSample<T> =
            serde_json::from_str(&line).map_err(|e| Error::Format { line: i + 1, message: e.to_string() })?;
        if s.dim() != header.dim {
            return Err(Error::DimensionMismatch { expected: header.dim, got: s.dim() });
        }
        samples.push(s);
    }
    Ok((header, samples))
}

pub fn read_samples_from_path<T: Scalar>(path: &Path) -> Result<(DatasetHeader, Vec<PersonSample<T>>)> {
    read_samples(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Source;

    fn sample(id: u64) -> PersonSample<f64> {
        PersonSample {
            sample_id: id,
            features: vec![0.1, -0.25, 1.0 / 3.0],
            identity: Some(2),
            camera: Some(1),
            video_id: None,
            source: Source::Multi,
            hidden_identity: 9,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let samples = vec![sample(0), sample(1)];
        let mut buf = Vec::new();
        write_samples(&mut buf, 3, &samples).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(r#"{"format":"remix-ds","version":1,"dim":3}"#));
        let (h, back) = read_samples::<f64, _>(buf.as_slice()).unwrap();
        assert_eq!(h.dim, 3);
        assert_eq!(back, samples);
    }

    #[test]
    fn record_keys() {
        let v: serde_json::Value = serde_json::to_value(sample(4)).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            ["camera", "features", "hidden_identity", "identity", "sample_id", "source", "video_id"]
        );
        assert_eq!(v["source"], "multi");
    }

    #[test]
    fn rejects_wrong_header_and_dim() {
        let bad = b"{\"format\":\"other\",\"version\":1,\"dim\":3}\n";
        assert!(matches!(read_samples::<f64, _>(&bad[..]), Err(Error::VersionMismatch { .. })));
        let mut buf = Vec::new();
        write_samples(&mut buf, 3, &[sample(0)]).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("\"dim\":3", "\"dim\":4");
        assert!(matches!(read_samples::<f64, _>(text.as_bytes()), Err(Error::DimensionMismatch { .. })));
    }
}
