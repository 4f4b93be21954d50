//! CSV tables with a `# key=value` metadata preamble.
//!
//! Floats are written as `{:.16e}`, which carries 17 significant digits and
//! reads back bit-exactly.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::analysis::SweepRow;
use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::io::meta::Metadata;

pub const FIELD_HEADER: [&str; 2] = ["theta", "value"];
pub const EIGEN_HEADER: [&str; 5] = ["k", "tau", "sigma", "Zk", "Gamma_k"];
pub const SWEEP_HEADER: [&str; 5] = ["param_name", "param_value", "spike_count", "converged", "steps"];

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_table<I>(path: &Path, meta: &Metadata, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut file = create(path)?;
    file.write_all(meta.render("# ").as_bytes())?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes())
}

fn check_header(r: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<()> {
    let found = r.headers()?;
    if found.iter().ne(expected.iter().copied()) {
        return Err(Error::Config(format!(
            "expected columns {}, found {}",
            expected.join(","),
            found.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Config(format!("bad {what} value '{s}'")))
}

pub fn write_field_csv(field: &Field, path: &Path, meta: &Metadata) -> Result<()> {
    let rows = field
        .grid()
        .theta()
        .iter()
        .zip(field.values())
        .map(|(t, v)| vec![fmt_f64(*t), fmt_f64(*v)]);
    write_table(path, meta, &FIELD_HEADER, rows)
}

/// Node angles and values of a field file, with its metadata.
pub fn read_field_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>, Metadata)> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    let meta = Metadata::parse_header(&text);
    let mut r = reader(&text);
    check_header(&mut r, &FIELD_HEADER)?;
    let (mut theta, mut values) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        theta.push(parse_f64(&rec[0], "theta")?);
        values.push(parse_f64(&rec[1], "value")?);
    }
    Ok((theta, values, meta))
}

/// Reads a field written on `grid`; the node angles must match.
pub fn read_field_csv(path: &Path, grid: &Arc<Grid>) -> Result<Field> {
    let (theta, values, _) = read_field_table(path)?;
    if theta.len() != grid.n_nodes() {
        return Err(Error::LengthMismatch { expected: grid.n_nodes(), got: theta.len() });
    }
    for (i, (a, b)) in theta.iter().zip(grid.theta()).enumerate() {
        if (a - b).abs() > 1e-9 {
            return Err(Error::Config(format!("node {i} at theta={a}, grid expects {b}")));
        }
    }
    Field::new(grid.clone(), values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenRow {
    pub k: i64,
    pub tau: f64,
    pub sigma: f64,
    pub z: f64,
    pub gamma: f64,
}

pub fn write_eigen_csv(rows: &[EigenRow], path: &Path, meta: &Metadata) -> Result<()> {
    let rows = rows.iter().map(|r| {
        vec![r.k.to_string(), fmt_f64(r.tau), fmt_f64(r.sigma), fmt_f64(r.z), fmt_f64(r.gamma)]
    });
    write_table(path, meta, &EIGEN_HEADER, rows)
}

pub fn read_eigen_csv(path: &Path) -> Result<Vec<EigenRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut r = reader(&text);
    check_header(&mut r, &EIGEN_HEADER)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        out.push(EigenRow {
            k: rec[0].trim().parse().map_err(|_| Error::Config(format!("bad k '{}'", &rec[0])))?,
            tau: parse_f64(&rec[1], "tau")?,
            sigma: parse_f64(&rec[2], "sigma")?,
            z: parse_f64(&rec[3], "Zk")?,
            gamma: parse_f64(&rec[4], "Gamma_k")?,
        });
    }
    Ok(out)
}

/// Non-converged rows leave `spike_count` empty.
pub fn write_sweep_csv(rows: &[SweepRow], path: &Path, meta: &Metadata) -> Result<()> {
    let rows = rows.iter().map(|r| {
        vec![
            r.param_name.clone(),
            fmt_f64(r.param_value),
            r.spike_count.map(|c| c.to_string()).unwrap_or_default(),
            r.converged.to_string(),
            r.steps.to_string(),
        ]
    });
    write_table(path, meta, &SWEEP_HEADER, rows)
}

/// `(param_name, param_value, spike_count, converged, steps)` per row.
pub fn read_sweep_csv(path: &Path) -> Result<Vec<(String, f64, Option<usize>, bool, usize)>> {
    let text = std::fs::read_to_string(path)?;
    let mut r = reader(&text);
    check_header(&mut r, &SWEEP_HEADER)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let spikes = match rec[2].trim() {
            "" => None,
            s => Some(s.parse().map_err(|_| Error::Config(format!("bad spike_count '{s}'")))?),
        };
        let converged = rec[3].trim().parse().map_err(|_| Error::Config(format!("bad converged '{}'", &rec[3])))?;
        let steps = rec[4].trim().parse().map_err(|_| Error::Config(format!("bad steps '{}'", &rec[4])))?;
        out.push((rec[0].to_string(), parse_f64(&rec[1], "param_value")?, spikes, converged, steps));
    }
    Ok(out)
}

/// Generic numeric table, for critical curves and heatmaps.
pub fn write_numeric_csv(header: &[&str], rows: &[Vec<f64>], path: &Path, meta: &Metadata) -> Result<()> {
    let rows = rows.iter().map(|r| {
        r.iter().map(|x| if x.is_nan() { String::new() } else { fmt_f64(*x) }).collect()
    });
    write_table(path, meta, header, rows)
}
