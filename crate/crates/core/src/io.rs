//! File formats. Every writer goes through [`atomic_write`].

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use realfft::num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::detector::{ShotMeta, ShotSequence};
use crate::error::{Error, Result};
use crate::extract::QubitOperatingPoint;
use crate::qp::Occupation;
use crate::spectra::SpectrumEstimate;
use crate::synth::TimeSeries;

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        source_name: path.display().to_string(),
        message: message.into(),
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn atomic_write<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| format_err(path, "output path has no file name"))?
        .to_string_lossy()
        .into_owned();
    let tmp = dir.join(format!(
        ".{name}.tmp.{}.{}",
        std::process::id(),
        TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    let result = (|| {
        let mut w = BufWriter::new(File::create(&tmp)?);
        body(&mut w)?;
        let f = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    atomic_write(path, |w| Ok(w.write_all(bytes)?))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    atomic_write(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| format_err(path, e.to_string()))
}

/// Rows of a serializable type with a header taken from the field names.
pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    atomic_write(path, |w| {
        let mut c = csv::Writer::from_writer(w);
        for r in rows {
            c.serialize(r)?;
        }
        c.flush()?;
        Ok(())
    })
}

fn expect_header(path: &Path, rdr: &mut csv::Reader<File>, want: &[&str], optional_tail: usize) -> Result<usize> {
    let h = rdr.headers()?.clone();
    let got: Vec<&str> = h.iter().map(str::trim).collect();
    let min = want.len() - optional_tail;
    if got.len() < min || got.len() > want.len() || got[..] != want[..got.len()] {
        return Err(format_err(
            path,
            format!("expected header `{}`, found `{}`", want.join(","), got.join(",")),
        ));
    }
    Ok(got.len())
}

fn parse_field(path: &Path, rec: &csv::StringRecord, i: usize, row: usize, name: &str) -> Result<f64> {
    let s = rec.get(i).unwrap_or("").trim();
    s.parse::<f64>()
        .map_err(|_| format_err(path, format!("row {row}, column `{name}`: cannot parse `{s}` as a number")))
}

/// `t_s,phi_phi0`.
pub fn write_timeseries_csv(path: &Path, ts: &TimeSeries) -> Result<()> {
    atomic_write(path, |w| {
        writeln!(w, "t_s,phi_phi0")?;
        for (i, v) in ts.samples.iter().enumerate() {
            writeln!(w, "{:e},{:e}", i as f64 * ts.dt, v)?;
        }
        Ok(())
    })
}

/// Reads a uniformly sampled record; the spacing is taken from the first two
/// rows and every later row must agree to 1e-6 of `dt`.
pub fn read_timeseries_csv(path: &Path) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new().from_path(path)?;
    expect_header(path, &mut rdr, &["t_s", "phi_phi0"], 0)?;
    let mut t = Vec::new();
    let mut x = Vec::new();
    let mut rec = csv::StringRecord::new();
    let mut row = 0;
    while rdr.read_record(&mut rec)? {
        row += 1;
        t.push(parse_field(path, &rec, 0, row, "t_s")?);
        x.push(parse_field(path, &rec, 1, row, "phi_phi0")?);
    }
    if t.len() < 2 {
        return Err(format_err(path, "need at least two samples"));
    }
    let dt = t[1] - t[0];
    if !(dt > 0.0) {
        return Err(format_err(path, "t_s must increase"));
    }
    for (i, &ti) in t.iter().enumerate() {
        let expect = t[0] + i as f64 * dt;
        if (ti - expect).abs() > 1e-6 * dt {
            return Err(format_err(path, format!("row {}: t_s = {ti} breaks uniform spacing {dt}", i + 1)));
        }
    }
    TimeSeries::new(x, dt)
}

/// Sidecar path of a shot file: `<path>.json`.
pub fn shot_sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// One byte per shot (`'0'` for -1, `'1'` for +1) plus the JSON sidecar.
pub fn write_shots(path: &Path, shots: &ShotSequence, seed: u64) -> Result<()> {
    let bytes: Vec<u8> = shots.shots.iter().map(|&s| if s > 0 { b'1' } else { b'0' }).collect();
    write_bytes(path, &bytes)?;
    write_json(
        &shot_sidecar(path),
        &ShotMeta {
            dt_s: shots.dt,
            sensitivity_per_phi0: shots.sensitivity,
            seed,
        },
    )
}

pub fn read_shots(path: &Path) -> Result<(ShotSequence, ShotMeta)> {
    let meta: ShotMeta = read_json(&shot_sidecar(path))?;
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let mut shots = Vec::with_capacity(bytes.len());
    for (i, b) in bytes.iter().enumerate() {
        shots.push(match b {
            b'0' => -1,
            b'1' => 1,
            _ => return Err(format_err(path, format!("byte {i} is {b:#04x}, expected '0' or '1'"))),
        });
    }
    let seq = ShotSequence::new(shots, meta.dt_s, meta.sensitivity_per_phi0)?;
    Ok((seq, meta))
}

/// `f_hz,s_plus_phi0sq_per_hz[,csd_re,csd_im]`.
pub fn write_spectrum_csv(path: &Path, s: &SpectrumEstimate) -> Result<()> {
    s.validate()?;
    atomic_write(path, |w| {
        match &s.csd {
            Some(c) => {
                writeln!(w, "f_hz,s_plus_phi0sq_per_hz,csd_re,csd_im")?;
                for ((f, p), z) in s.freqs.iter().zip(&s.s_plus).zip(c) {
                    writeln!(w, "{f:e},{p:e},{:e},{:e}", z.re, z.im)?;
                }
            }
            None => {
                writeln!(w, "f_hz,s_plus_phi0sq_per_hz")?;
                for (f, p) in s.freqs.iter().zip(&s.s_plus) {
                    writeln!(w, "{f:e},{p:e}")?;
                }
            }
        }
        Ok(())
    })
}

/// Columns of a spectrum file.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTable {
    pub f_hz: Vec<f64>,
    pub s_plus: Vec<f64>,
    pub csd: Option<Vec<Complex64>>,
}

pub fn read_spectrum_csv(path: &Path) -> Result<SpectrumTable> {
    let mut rdr = csv::ReaderBuilder::new().from_path(path)?;
    let cols = expect_header(path, &mut rdr, &["f_hz", "s_plus_phi0sq_per_hz", "csd_re", "csd_im"], 2)?;
    if cols == 3 {
        return Err(format_err(path, "csd_re present without csd_im"));
    }
    let mut out = SpectrumTable {
        f_hz: vec![],
        s_plus: vec![],
        csd: (cols == 4).then(Vec::new),
    };
    let mut rec = csv::StringRecord::new();
    let mut row = 0;
    while rdr.read_record(&mut rec)? {
        row += 1;
        out.f_hz.push(parse_field(path, &rec, 0, row, "f_hz")?);
        out.s_plus.push(parse_field(path, &rec, 1, row, "s_plus_phi0sq_per_hz")?);
        if let Some(c) = out.csd.as_mut() {
            c.push(Complex64::new(
                parse_field(path, &rec, 2, row, "csd_re")?,
                parse_field(path, &rec, 3, row, "csd_im")?,
            ));
        }
    }
    Ok(out)
}

/// `f10_hz,t1_s,p_stray,matrix_element_wb,l_h`.
pub fn read_operating_points(path: &Path) -> Result<Vec<QubitOperatingPoint>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    expect_header(path, &mut rdr, &["f10_hz", "t1_s", "p_stray", "matrix_element_wb", "l_h"], 0)?;
    let mut out = Vec::new();
    for (i, r) in rdr.deserialize::<QubitOperatingPoint>().enumerate() {
        let p = r.map_err(|e| format_err(path, format!("row {}: {e}", i + 1)))?;
        p.validate().map_err(|e| format_err(path, format!("row {}: {e}", i + 1)))?;
        out.push(p);
    }
    Ok(out)
}

/// `x_over_gap,occupation`.
pub fn read_occupation_csv(path: &Path) -> Result<Occupation> {
    let mut rdr = csv::ReaderBuilder::new().from_path(path)?;
    expect_header(path, &mut rdr, &["x_over_gap", "occupation"], 0)?;
    let (mut x, mut f) = (Vec::new(), Vec::new());
    let mut rec = csv::StringRecord::new();
    let mut row = 0;
    while rdr.read_record(&mut rec)? {
        row += 1;
        x.push(parse_field(path, &rec, 0, row, "x_over_gap")?);
        f.push(parse_field(path, &rec, 1, row, "occupation")?);
    }
    let occ = Occupation::Tabulated {
        x_over_gap: x,
        occupation: f,
    };
    occ.validate().map_err(|e| format_err(path, e.to_string()))?;
    Ok(occ)
}
