//! On-disk formats: flight records, per-flight feature tables and the
//! ground-truth manifest.
//!
//! Records and feature tables are CSV files whose first line is a metadata
//! comment (`# reg=B-7701 flight_id=B-7701-F001 sample_interval_s=1`) and
//! whose header names every channel with a unit suffix (`alpha_rad`,
//! `Va_mps`, `mdot_l_kgps`). Records may use alternate units (`alpha_deg`,
//! `h_ft`, `Va_kt`, ...); everything is converted to SI on load.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use qar_mass::model_core::{Channel, FlightRecord, FlightSample, FEATURE_CHANNELS};
use qar_mass::preprocess::FeatureRow;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

const KNOT: f64 = 1852.0 / 3600.0;
const FOOT: f64 = 0.3048;
const POUND: f64 = 0.453_592_37;

/// Factor converting `unit` to the SI unit of `ch`, if `unit` applies.
pub fn unit_factor(ch: Channel, unit: &str) -> Option<f64> {
    let deg = std::f64::consts::PI / 180.0;
    let f = match (ch.si_unit(), unit) {
        (si, u) if si == u => 1.0,
        ("rad", "deg") => deg,
        ("radps", "degps") => deg,
        ("mps", "kt") => KNOT,
        ("mps", "kmh") => 1.0 / 3.6,
        ("mps", "fps") => FOOT,
        ("mps", "fpm") => FOOT / 60.0,
        ("m", "ft") => FOOT,
        ("mps2", "g") => qar_mass::model_core::G0,
        ("mps2", "fps2") => FOOT,
        ("Pa", "hPa") => 100.0,
        ("Pa", "kPa") => 1000.0,
        ("Pa", "psf") => POUND * qar_mass::model_core::G0 / (FOOT * FOOT),
        ("kg", "lb") => POUND,
        ("kg", "t") => 1000.0,
        ("kgps", "kgph") => 1.0 / 3600.0,
        ("kgps", "lbps") => POUND,
        ("kgps", "lbph") => POUND / 3600.0,
        _ => return None,
    };
    Some(f)
}

fn column_name(ch: Channel) -> String {
    format!("{}_{}", ch.symbol(), ch.si_unit())
}

/// Splits a header like `a_theta_degps` into its channel and SI factor.
fn parse_column(name: &str) -> Option<(Channel, f64)> {
    Channel::ALL.into_iter().find_map(|ch| {
        let unit = name.strip_prefix(ch.symbol())?.strip_prefix('_')?;
        unit_factor(ch, unit).map(|f| (ch, f))
    })
}

fn time_factor(unit: &str) -> Option<f64> {
    match unit {
        "s" => Some(1.0),
        "ms" => Some(1e-3),
        "min" => Some(60.0),
        _ => None,
    }
}

/// Parses `# key=value key=value` into a map.
fn parse_metadata(line: &str) -> Option<BTreeMap<String, String>> {
    let body = line.strip_prefix('#')?;
    let mut out = BTreeMap::new();
    for token in body.split_whitespace() {
        let (k, v) = token.split_once('=')?;
        out.insert(k.to_string(), v.to_string());
    }
    Some(out)
}

fn split_header(path: &Path, text: &str) -> CliResult<(BTreeMap<String, String>, usize)> {
    let first = text.lines().next().unwrap_or("");
    let meta = parse_metadata(first.trim())
        .ok_or_else(|| CliError::malformed(path, "first line must be a `# key=value ...` metadata comment"))?;
    Ok((meta, first.len() + 1))
}

fn number(path: &Path, row: usize, col: &str, s: &str) -> CliResult<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| CliError::malformed(path, format!("row {row}: column {col}: '{s}' is not a number")))?;
    if !v.is_finite() {
        return Err(CliError::malformed(path, format!("row {row}: column {col}: non-finite value")));
    }
    Ok(v)
}

fn reader(body: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes())
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::malformed(path, e.to_string())
}

pub fn read_record(path: &Path) -> CliResult<FlightRecord> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_record(path, &text)
}

pub fn parse_record(path: &Path, text: &str) -> CliResult<FlightRecord> {
    let (meta, offset) = split_header(path, text)?;
    let reg = meta
        .get("reg")
        .ok_or_else(|| CliError::malformed(path, "metadata is missing `reg`"))?
        .clone();
    let interval = meta
        .get("sample_interval_s")
        .ok_or_else(|| CliError::malformed(path, "metadata is missing `sample_interval_s`"))?;
    let sample_interval = number(path, 0, "sample_interval_s", interval)?;
    let flight_id = match meta.get("flight_id") {
        Some(id) => id.clone(),
        None => path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
    };

    let mut rdr = reader(&text[offset.min(text.len())..]);
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let mut time: Option<(usize, f64)> = None;
    let mut columns: Vec<(usize, Channel, f64)> = Vec::new();
    for (i, name) in headers.iter().enumerate() {
        if let Some(unit) = name.strip_prefix("t_") {
            if let Some(f) = time_factor(unit) {
                if time.replace((i, f)).is_some() {
                    return Err(CliError::malformed(path, "duplicate time column"));
                }
                continue;
            }
        }
        match parse_column(name) {
            Some((ch, f)) => {
                if columns.iter().any(|c| c.1 == ch) {
                    return Err(CliError::malformed(path, format!("duplicate column for channel {}", ch.symbol())));
                }
                columns.push((i, ch, f));
            }
            None => log::warn!("{}: ignoring column '{name}'", path.display()),
        }
    }
    let (t_col, t_factor) = time.ok_or_else(|| CliError::malformed(path, "missing time column (t_s)"))?;
    if let Some(missing) = Channel::ALL.into_iter().find(|ch| !columns.iter().any(|c| c.1 == *ch)) {
        return Err(CliError::malformed(path, format!("missing column {}", column_name(missing))));
    }

    let mut samples = Vec::new();
    for (r, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let field = |i: usize| row.get(i).unwrap_or("");
        let mut s = FlightSample {
            t: number(path, r + 1, "t", field(t_col))? * t_factor,
            ..FlightSample::default()
        };
        for &(i, ch, f) in &columns {
            s.set(ch, number(path, r + 1, ch.symbol(), field(i))? * f);
        }
        samples.push(s);
    }
    let record = FlightRecord {
        flight_id,
        reg,
        samples,
        sample_interval,
    };
    record
        .validate()
        .map_err(|e| CliError::malformed(path, e.to_string()))?;
    Ok(record)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?))
}

fn finish<W: Write>(path: &Path, w: csv::Writer<W>) -> CliResult<()> {
    let mut inner = w.into_inner().map_err(|e| CliError::io(path, e.into_error()))?;
    inner.flush().map_err(|e| CliError::io(path, e))
}

/// Writes CSV rows (already formatted) to `path`, creating parent directories.
pub fn write_table(path: &Path, comment: Option<&str>, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
    let mut out = create(path)?;
    if let Some(c) = comment {
        writeln!(out, "# {c}").map_err(|e| CliError::io(path, e))?;
    }
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::io(path, std::io::Error::other(e));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    finish(path, w)
}

pub fn write_record(path: &Path, record: &FlightRecord) -> CliResult<()> {
    let comment = format!(
        "reg={} flight_id={} sample_interval_s={}",
        record.reg, record.flight_id, record.sample_interval
    );
    let mut header = vec!["t_s".to_string()];
    header.extend(Channel::ALL.into_iter().map(column_name));
    let rows: Vec<Vec<String>> = record
        .samples
        .iter()
        .map(|s| {
            std::iter::once(s.t)
                .chain(Channel::ALL.into_iter().map(|ch| s.get(ch)))
                .map(|v| v.to_string())
                .collect()
        })
        .collect();
    write_table(path, Some(&comment), &header, &rows)
}

/// Feature table of one processed flight.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub flight_id: String,
    pub reg: String,
    pub rows: Vec<FeatureRow>,
}

fn feature_header() -> Vec<String> {
    let mut h: Vec<String> = FEATURE_CHANNELS.into_iter().map(column_name).collect();
    h.extend(["dh_m", "dt_s", "m_kg", "fuel_burned_kg"].map(String::from));
    h
}

pub fn write_features(path: &Path, flight_id: &str, reg: &str, rows: &[FeatureRow]) -> CliResult<()> {
    let comment = format!("reg={reg} flight_id={flight_id}");
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            r.x.iter()
                .chain([r.dh, r.dt, r.target_m, r.fuel_burned].iter())
                .map(|v| v.to_string())
                .collect()
        })
        .collect();
    write_table(path, Some(&comment), &feature_header(), &body)
}

pub fn read_features(path: &Path) -> CliResult<FeatureTable> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let (meta, offset) = split_header(path, &text)?;
    let get = |k: &str| {
        meta.get(k)
            .cloned()
            .ok_or_else(|| CliError::malformed(path, format!("metadata is missing `{k}`")))
    };
    let (flight_id, reg) = (get("flight_id")?, get("reg")?);
    let mut rdr = reader(&text[offset.min(text.len())..]);
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let expected = feature_header();
    if headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(CliError::malformed(path, format!("feature header must be {}", expected.join(","))));
    }
    let mut rows = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let v: Vec<f64> = rec
            .iter()
            .zip(&expected)
            .map(|(s, name)| number(path, r + 1, name, s))
            .collect::<CliResult<_>>()?;
        let mut x = [0.0; 15];
        x.copy_from_slice(&v[..15]);
        rows.push(FeatureRow {
            x,
            dh: v[15],
            dt: v[16],
            reg: reg.clone(),
            target_m: v[17],
            fuel_burned: v[18],
        });
    }
    Ok(FeatureTable { flight_id, reg, rows })
}

/// Ground truth for one simulated flight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub flight_id: String,
    pub reg: String,
    pub initial_mass_kg: f64,
    pub n_samples: usize,
    pub record: String,
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> CliResult<()> {
    let header = ["flight_id", "reg", "initial_mass_kg", "n_samples", "record"].map(String::from);
    let rows: Vec<Vec<String>> = entries
        .iter()
        .map(|e| {
            vec![
                e.flight_id.clone(),
                e.reg.clone(),
                e.initial_mass_kg.to_string(),
                e.n_samples.to_string(),
                e.record.clone(),
            ]
        })
        .collect();
    write_table(path, None, &header, &rows)
}

pub fn read_manifest(path: &Path) -> CliResult<Vec<ManifestEntry>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => CliError::io(path, std::io::Error::other(e)),
        _ => csv_error(path, e),
    })?;
    rdr.deserialize()
        .collect::<Result<Vec<ManifestEntry>, _>>()
        .map_err(|e| csv_error(path, e))
}

/// File name for a flight id, keeping only portable characters.
pub fn file_stem(flight_id: &str) -> String {
    flight_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(k: f64) -> FlightSample {
        let mut s = FlightSample {
            t: k,
            ..Default::default()
        };
        for (i, ch) in Channel::ALL.into_iter().enumerate() {
            s.set(ch, 0.1 * (i as f64 + 1.0) + k / 3.0);
        }
        s
    }

    fn record() -> FlightRecord {
        FlightRecord {
            flight_id: "B-7701-F001".into(),
            reg: "B-7701".into(),
            samples: (0..5).map(|k| sample(k as f64)).collect(),
            sample_interval: 1.0,
        }
    }

    #[test]
    fn record_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let r = record();
        write_record(&p, &r).unwrap();
        assert_eq!(read_record(&p).unwrap(), r);
    }

    #[test]
    fn alternate_units_convert_to_si() {
        let text = "# reg=X sample_interval_s=1\n\
            t_s,alpha_deg,gamma_deg,theta_deg,psi_deg,mu_deg,Va_kt,Vv_fpm,Vg_kt,a_theta_degps,h_ft,ax_g,ay_mps2,az_mps2,M_nd,q_hPa,m_lb,mdot_l_kgph,mdot_r_lbph\n\
            0,180,0,0,0,0,100,1000,0,90,1000,1,0,0,0.5,10,1000,3600,3600\n\
            1,180,0,0,0,0,100,1000,0,90,1000,1,0,0,0.5,10,1000,3600,3600\n";
        let r = parse_record(Path::new("flight9.csv"), text).unwrap();
        let s = &r.samples[0];
        assert_eq!(r.flight_id, "flight9");
        assert!((s.alpha - std::f64::consts::PI).abs() < 1e-15);
        assert!((s.va - 51.444_444_444_444_44).abs() < 1e-12);
        assert!((s.vv - 5.08).abs() < 1e-12);
        assert!((s.h - 304.8).abs() < 1e-12);
        assert!((s.ax - 9.80665).abs() < 1e-15);
        assert_eq!(s.q, 1000.0);
        assert!((s.m - 453.592_37).abs() < 1e-9);
        assert!((s.mdot_l - 1.0).abs() < 1e-15);
        assert!((s.mdot_r - 0.453_592_37).abs() < 1e-15);
    }

    #[test]
    fn malformed_records_are_data_errors() {
        let p = Path::new("x.csv");
        let no_meta = "t_s,alpha_rad\n0,1\n";
        assert_eq!(parse_record(p, no_meta).unwrap_err().exit_code(), 4);
        let missing = "# reg=X sample_interval_s=1\nt_s,alpha_rad\n0,1\n";
        let e = parse_record(p, missing).unwrap_err();
        assert!(e.to_string().contains("missing column"), "{e}");
        let mut text = String::from("# reg=X sample_interval_s=1\nt_s");
        for ch in Channel::ALL {
            text.push(',');
            text.push_str(&column_name(ch));
        }
        text.push_str("\n0");
        text.push_str(&",1".repeat(18));
        text.push_str("\n1");
        text.push_str(&",abc".repeat(18));
        let e = parse_record(p, &text).unwrap_err();
        assert!(e.to_string().contains("row 2"), "{e}");
    }

    #[test]
    fn feature_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let rows: Vec<FeatureRow> = (0..3)
            .map(|k| FeatureRow {
                x: std::array::from_fn(|i| i as f64 * 0.5 + k as f64 / 7.0),
                dh: 10.0 * k as f64,
                dt: k as f64,
                reg: "R1".into(),
                target_m: 250_000.0 - 3.3 * k as f64,
                fuel_burned: 3.3 * k as f64,
            })
            .collect();
        write_features(&p, "F1", "R1", &rows).unwrap();
        let t = read_features(&p).unwrap();
        assert_eq!((t.flight_id.as_str(), t.reg.as_str()), ("F1", "R1"));
        assert_eq!(t.rows, rows);
    }

    #[test]
    fn stems_are_portable() {
        assert_eq!(file_stem("B-7701-F001"), "B-7701-F001");
        assert_eq!(file_stem("a/b c"), "a_b_c");
    }
}
