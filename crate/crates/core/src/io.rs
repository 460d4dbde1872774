//! File formats: sample CSV, 16-bit PCM mono WAV, matrix JSON, and JSON-lines traces.
//!
//! Every parser takes untrusted bytes and reports failures as [`Error`]
//! values; none of them panic on malformed input.

use std::io::{Cursor, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cost::SampleMatrix;
use crate::error::{Error, Result};
use crate::optimizer::IterationRecord;

/// Channel names plus samples read from a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTable {
    pub names: Vec<String>,
    pub samples: SampleMatrix,
}

/// Parses CSV with a header row of channel names and one sample per row.
pub fn parse_csv_samples(bytes: &[u8]) -> Result<ChannelTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(bytes);
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(&e, 1))?
        .iter()
        .map(str::to_owned)
        .collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(Error::Parse {
            line: 1,
            message: "missing header row".into(),
        });
    }
    let n = names.len();
    let mut values: Vec<f64> = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = reader.read_record(&mut record).map_err(|e| csv_error(&e, 0))?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != n {
            return Err(Error::Parse {
                line,
                message: format!("expected {n} fields, found {}", record.len()),
            });
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("column {} ('{}'): cannot parse '{field}' as a number", j + 1, names[j]),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("column {}: non-finite value '{field}'", j + 1),
                });
            }
            values.push(v);
        }
    }
    let t = values.len() / n;
    // values are sample-major, which is column-major for an n×t matrix
    let samples = SampleMatrix::new(DMatrix::from_column_slice(n, t, &values))?;
    Ok(ChannelTable { names, samples })
}

fn csv_error(e: &csv::Error, fallback_line: u64) -> Error {
    let line = e.position().map_or(fallback_line, |p| p.line());
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

pub fn read_csv_samples(path: &Path) -> Result<ChannelTable> {
    parse_csv_samples(&std::fs::read(path)?)
}

/// Writes the CSV layout read by [`parse_csv_samples`] with 17 significant digits.
pub fn write_csv_samples(mut w: impl Write, names: &[String], samples: &SampleMatrix) -> Result<()> {
    if names.len() != samples.n() {
        return Err(Error::Dimension(format!(
            "{} channel names for {} channels",
            names.len(),
            samples.n()
        )));
    }
    let mut writer = csv::Writer::from_writer(&mut w);
    writer.write_record(names).map_err(into_io)?;
    let m = samples.matrix();
    let mut row = Vec::with_capacity(samples.n());
    for s in 0..samples.t() {
        row.clear();
        row.extend((0..samples.n()).map(|i| format!("{:.16e}", m[(i, s)])));
        writer.write_record(&row).map_err(into_io)?;
    }
    writer.flush()?;
    Ok(())
}

fn into_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Default channel names `ch0, ch1, ...`.
pub fn default_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("ch{i}")).collect()
}

/// Decodes a 16-bit PCM mono WAV file into samples scaled to `[-1, 1)`.
pub fn decode_wav_mono16(bytes: &[u8]) -> Result<Vec<f64>> {
    let reader = hound::WavReader::new(Cursor::new(bytes)).map_err(|e| Error::Wav(e.to_string()))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Wav(format!("expected mono, found {} channels", spec.channels)));
    }
    if spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::Wav(format!(
            "expected 16-bit PCM, found {}-bit {:?}",
            spec.bits_per_sample, spec.sample_format
        )));
    }
    if reader.len() as usize > bytes.len() / 2 {
        return Err(Error::Wav("header claims more samples than the file holds".into()));
    }
    reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / 32768.0).map_err(|e| Error::Wav(e.to_string())))
        .collect()
}

/// Sample rate from a WAV header.
pub fn wav_sample_rate(bytes: &[u8]) -> Result<u32> {
    let reader = hound::WavReader::new(Cursor::new(bytes)).map_err(|e| Error::Wav(e.to_string()))?;
    Ok(reader.spec().sample_rate)
}

/// Reads one mono WAV per channel; all files must have equal length.
pub fn read_wav_channels(paths: &[impl AsRef<Path>]) -> Result<SampleMatrix> {
    let mut channels = Vec::with_capacity(paths.len());
    for path in paths {
        let path = path.as_ref();
        let bytes = std::fs::read(path)?;
        let samples = decode_wav_mono16(&bytes).map_err(|e| Error::Wav(format!("{}: {e}", path.display())))?;
        channels.push(samples);
    }
    if channels.windows(2).any(|w| w[0].len() != w[1].len()) {
        return Err(Error::Wav("channel files have unequal lengths".into()));
    }
    SampleMatrix::from_channels(&channels)
}

/// Encodes samples as 16-bit PCM mono; values are clamped to `[-1, 1)`.
pub fn encode_wav_mono16(samples: &[f64], sample_rate: u32) -> Result<Vec<u8>> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut buf = Cursor::new(Vec::new());
    {
        let mut writer = hound::WavWriter::new(&mut buf, spec).map_err(|e| Error::Wav(e.to_string()))?;
        for &v in samples {
            let q = (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            writer.write_sample(q).map_err(|e| Error::Wav(e.to_string()))?;
        }
        writer.finalize().map_err(|e| Error::Wav(e.to_string()))?;
    }
    Ok(buf.into_inner())
}

/// JSON matrix file: `{"rows": [[...], ...], "seed": 7}` with row-major rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub rows: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl MatrixFile {
    pub fn from_matrix(a: &DMatrix<f64>, seed: Option<u64>) -> Self {
        Self {
            rows: a.row_iter().map(|r| r.iter().copied().collect()).collect(),
            seed,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("matrix file serializes");
        s.push('\n');
        s
    }
}

/// Parses a square, finite matrix from [`MatrixFile`] JSON.
pub fn parse_matrix_file(text: &str) -> Result<DMatrix<f64>> {
    let file: MatrixFile = serde_json::from_str(text).map_err(|e| Error::MatrixFile(e.to_string()))?;
    let n = file.rows.len();
    if n == 0 {
        return Err(Error::MatrixFile("no rows".into()));
    }
    if let Some(k) = file.rows.iter().position(|r| r.len() != n) {
        return Err(Error::MatrixFile(format!(
            "row {k} has {} entries, expected {n}",
            file.rows[k].len()
        )));
    }
    if file.rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::MatrixFile("non-finite entry".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| file.rows[i][j]))
}

/// Serializes trace records as JSON lines.
pub fn write_trace(mut w: impl Write, trace: &[IterationRecord]) -> Result<()> {
    for record in trace {
        serde_json::to_writer(&mut w, record).map_err(|e| Error::Io(e.into()))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Parses one trace line.
pub fn parse_trace_line(line: &str) -> Result<IterationRecord> {
    serde_json::from_str(line).map_err(|e| Error::Parse {
        line: e.line() as u64,
        message: e.to_string(),
    })
}
