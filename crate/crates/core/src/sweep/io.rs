use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sweep_map::{SweepData, SweepMap, SweepMeta};

const COMPLEX_HEADER: [&str; 4] = ["field_t", "freq_hz", "re", "im"];
const DB_HEADER: [&str; 3] = ["field_t", "freq_hz", "s21_db"];

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes one row per cell, fields outermost, with 17 significant digits.
pub fn write_sweep_csv<W: Write>(out: W, map: &SweepMap) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Parse(format!("csv write: {e}"));
    match map.data() {
        SweepData::Complex(v) => {
            w.write_record(COMPLEX_HEADER).map_err(io)?;
            for (i, b) in map.fields().iter().enumerate() {
                for (j, f) in map.freqs_hz().iter().enumerate() {
                    let z = v[i * map.n_freqs() + j];
                    w.write_record([num(*b), num(*f), num(z.re), num(z.im)]).map_err(io)?;
                }
            }
        }
        SweepData::MagnitudeDb(v) => {
            w.write_record(DB_HEADER).map_err(io)?;
            for (i, b) in map.fields().iter().enumerate() {
                for (j, f) in map.freqs_hz().iter().enumerate() {
                    w.write_record([num(*b), num(*f), num(v[i * map.n_freqs() + j])]).map_err(io)?;
                }
            }
        }
    }
    w.flush().map_err(|e| Error::io("sweep csv", e))?;
    Ok(())
}

/// Reads either schema back into a map; the grid must be complete and row-major.
pub fn read_sweep_csv<R: Read>(input: R, meta: SweepMeta) -> Result<SweepMap> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = rd
        .headers()
        .map_err(|e| Error::Parse(format!("csv header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let complex = if header == COMPLEX_HEADER {
        true
    } else if header == DB_HEADER {
        false
    } else {
        return Err(Error::Parse(format!(
            "unrecognized sweep header {header:?}; expected field_t,freq_hz,re,im or field_t,freq_hz,s21_db"
        )));
    };
    let mut fields: Vec<f64> = Vec::new();
    let mut freqs: Vec<f64> = Vec::new();
    let mut cplx = Vec::new();
    let mut db = Vec::new();
    let mut row_col = 0usize;
    for (n, rec) in rd.records().enumerate() {
        let line = n + 2;
        let rec = rec.map_err(|e| Error::Parse(format!("line {line}: {e}")))?;
        let parse = |k: usize| -> Result<f64> {
            rec.get(k)
                .ok_or_else(|| Error::Parse(format!("line {line}: missing column {}", k + 1)))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {line}: {e}")))
        };
        let (b, f) = (parse(0)?, parse(1)?);
        if fields.last() != Some(&b) {
            if !fields.is_empty() && row_col != freqs.len() {
                return Err(Error::Parse(format!("line {line}: field row ended after {row_col} of {} frequencies", freqs.len())));
            }
            fields.push(b);
            row_col = 0;
        }
        if fields.len() == 1 {
            freqs.push(f);
        } else if freqs.get(row_col) != Some(&f) {
            return Err(Error::Parse(format!("line {line}: frequency {f} does not match the first row's grid")));
        }
        row_col += 1;
        if complex {
            cplx.push(Complex64::new(parse(2)?, parse(3)?));
        } else {
            db.push(parse(2)?);
        }
    }
    if fields.is_empty() {
        return Err(Error::Parse("sweep file has no data rows".into()));
    }
    if row_col != freqs.len() {
        return Err(Error::Parse("last field row is incomplete".into()));
    }
    let data = if complex { SweepData::Complex(cplx) } else { SweepData::MagnitudeDb(db) };
    SweepMap::new(fields, freqs, data, meta).map_err(|e| Error::Parse(e.to_string()))
}

/// Sidecar metadata path `<csv>.meta.json`.
pub fn meta_path(csv_path: &Path) -> PathBuf {
    let mut s = csv_path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Writes the CSV and its metadata sidecar.
pub fn write_sweep(path: &Path, map: &SweepMap) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    write_sweep_csv(BufWriter::new(f), map)?;
    let mp = meta_path(path);
    let text = serde_json::to_string_pretty(&map.meta).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(&mp, text + "\n").map_err(|e| Error::io(mp.display().to_string(), e))
}

/// Reads a CSV and, when present, its sidecar.
pub fn read_sweep(path: &Path) -> Result<SweepMap> {
    let mp = meta_path(path);
    let meta = if mp.exists() {
        let text = std::fs::read_to_string(&mp).map_err(|e| Error::io(mp.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", mp.display())))?
    } else {
        SweepMeta::default()
    };
    let f = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    read_sweep_csv(BufReader::new(f), meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(complex: bool) -> SweepMap {
        let fields = vec![0.1, 0.1001, 0.1002];
        let freqs = vec![3.5e9, 3.5001e9];
        let data = if complex {
            SweepData::Complex((0..6).map(|k| Complex64::new(0.1 * k as f64 + 1.0 / 3.0, -(k as f64).sqrt())).collect())
        } else {
            SweepData::MagnitudeDb((0..6).map(|k| -(k as f64) / 7.0).collect())
        };
        SweepMap::new(fields, freqs, data, SweepMeta::default()).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        for complex in [true, false] {
            let m = tiny(complex);
            let mut a = Vec::new();
            write_sweep_csv(&mut a, &m).unwrap();
            let back = read_sweep_csv(&a[..], SweepMeta::default()).unwrap();
            assert_eq!(back, m);
            let mut b = Vec::new();
            write_sweep_csv(&mut b, &back).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn ragged_grid_rejected() {
        let text = "field_t,freq_hz,s21_db\n0.1,1e9,0\n0.1,2e9,0\n0.2,1e9,0\n";
        assert!(read_sweep_csv(text.as_bytes(), SweepMeta::default()).is_err());
        let text = "field_t,freq_hz,s21_db\n0.1,1e9,0\n0.2,2e9,0\n";
        assert!(read_sweep_csv(text.as_bytes(), SweepMeta::default()).is_err());
        assert!(read_sweep_csv("a,b\n".as_bytes(), SweepMeta::default()).is_err());
        assert!(read_sweep_csv("field_t,freq_hz,s21_db\n".as_bytes(), SweepMeta::default()).is_err());
    }
}
