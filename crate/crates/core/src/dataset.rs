//! Dataset CSV reading and writing.
//!
//! One row per sample with the header `t,gx,gy,gz,ax,ay,az,pitch_gt,roll_gt`
//! in SI units and radians. Estimate traces append `pitch_est,roll_est`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::domain::{EulerAngles, ImuSample, Sequence, DEFAULT_DT};
use crate::error::{Error, Result};

pub const DATASET_HEADER: [&str; 9] = [
    "t", "gx", "gy", "gz", "ax", "ay", "az", "pitch_gt", "roll_gt",
];

pub const ESTIMATE_COLUMNS: [&str; 2] = ["pitch_est", "roll_est"];

pub fn write_sequence<W: Write>(out: W, seq: &Sequence) -> Result<()> {
    write_rows(out, seq, None)
}

pub fn write_sequence_file(path: &Path, seq: &Sequence) -> Result<()> {
    write_sequence(BufWriter::new(File::create(path)?), seq)
}

/// Writes the dataset layout with estimate columns appended.
pub fn write_estimates<W: Write>(out: W, seq: &Sequence, est: &[EulerAngles]) -> Result<()> {
    if est.len() != seq.len() {
        return Err(Error::LengthMismatch {
            left: seq.len(),
            right: est.len(),
        });
    }
    write_rows(out, seq, Some(est))
}

fn write_rows<W: Write>(out: W, seq: &Sequence, est: Option<&[EulerAngles]>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let mut header: Vec<&str> = DATASET_HEADER.to_vec();
    if est.is_some() {
        header.extend(ESTIMATE_COLUMNS);
    }
    w.write_record(&header)?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for (k, (s, t)) in seq.samples().iter().zip(seq.truth()).enumerate() {
        row.clear();
        row.push(s.t.to_string());
        row.extend(s.gyro.iter().chain(&s.accel).map(|v| v.to_string()));
        row.push(t.pitch.to_string());
        row.push(t.roll.to_string());
        if let Some(e) = est {
            row.push(e[k].pitch.to_string());
            row.push(e[k].roll.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a dataset CSV. The sample period is inferred from the timestamps.
pub fn read_sequence<R: Read>(input: R) -> Result<Sequence> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers()?.clone();
    let found: Vec<&str> = header.iter().map(str::trim).collect();
    if found.len() < DATASET_HEADER.len() || found[..DATASET_HEADER.len()] != DATASET_HEADER {
        return Err(Error::Schema(format!(
            "expected header `{}`, found `{}`",
            DATASET_HEADER.join(","),
            found.join(",")
        )));
    }
    let mut samples = Vec::new();
    let mut truth = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let mut v = [0.0f64; 9];
        for (c, slot) in v.iter_mut().enumerate() {
            let field = rec
                .get(c)
                .ok_or_else(|| Error::Schema(format!("row {k}: missing column {}", DATASET_HEADER[c])))?;
            *slot = field.trim().parse().map_err(|_| {
                Error::Schema(format!("row {k}: cannot parse `{field}` as {}", DATASET_HEADER[c]))
            })?;
        }
        samples.push(ImuSample {
            t: v[0],
            gyro: [v[1], v[2], v[3]],
            accel: [v[4], v[5], v[6]],
        });
        truth.push(EulerAngles {
            pitch: v[7],
            roll: v[8],
        });
    }
    let dt = match samples.len() {
        0 | 1 => DEFAULT_DT,
        n => (samples[n - 1].t - samples[0].t) / (n - 1) as f64,
    };
    Sequence::new(samples, truth, dt)
}

pub fn read_sequence_file(path: &Path) -> Result<Sequence> {
    read_sequence(File::open(path)?)
}

/// All `*.csv` files in `dir`, sorted by name. A path to a single file is
/// returned as-is.
pub fn list_csv(dir: &Path) -> Result<Vec<PathBuf>> {
    if dir.is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn read_dir(dir: &Path) -> Result<Vec<Sequence>> {
    let files = list_csv(dir)?;
    if files.is_empty() {
        return Err(Error::EmptyDataset);
    }
    files.iter().map(|p| read_sequence_file(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq() -> Sequence {
        let samples = (0..5)
            .map(|k| ImuSample {
                t: k as f64 * 0.005,
                gyro: [0.1 * k as f64, -0.2, 1e-17],
                accel: [0.3, -0.1, 9.81],
            })
            .collect();
        let truth = (0..5).map(|k| EulerAngles::new(0.01 * k as f64, -0.3)).collect();
        Sequence::new(samples, truth, 0.005).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let s = seq();
        let mut buf = Vec::new();
        write_sequence(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,gx,gy,gz,ax,ay,az,pitch_gt,roll_gt\n"));
        assert!(!text.contains('\r'));
        let back = read_sequence(buf.as_slice()).unwrap();
        assert_eq!(back.samples(), s.samples());
        assert_eq!(back.truth(), s.truth());
        assert!((back.dt() - 0.005).abs() < 1e-15);
    }

    #[test]
    fn wrong_header_is_schema_error() {
        let csv = "time,gx,gy,gz,ax,ay,az,pitch_gt,roll_gt\n0,0,0,0,0,0,9.81,0,0\n";
        assert!(matches!(read_sequence(csv.as_bytes()), Err(Error::Schema(_))));
    }

    #[test]
    fn unparsable_field_is_schema_error() {
        let csv = "t,gx,gy,gz,ax,ay,az,pitch_gt,roll_gt\n0,x,0,0,0,0,9.81,0,0\n";
        assert!(matches!(read_sequence(csv.as_bytes()), Err(Error::Schema(_))));
    }

    #[test]
    fn estimates_are_appended() {
        let s = seq();
        let est = vec![EulerAngles::new(0.5, 0.25); s.len()];
        let mut buf = Vec::new();
        write_estimates(&mut buf, &s, &est).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().ends_with(",pitch_est,roll_est"));
        assert!(lines.next().unwrap().ends_with(",0.5,0.25"));
        // Still readable as a dataset.
        assert_eq!(read_sequence(text.as_bytes()).unwrap().len(), s.len());
    }
}
