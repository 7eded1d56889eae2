//! CSV interchange formats.
//!
//! All files are UTF-8 with LF line endings and comma delimiters. Blank lines and lines
//! starting with `#` are skipped on input. Numbers use a decimal point and no thousands
//! separators.
//!
//! - confusion matrix: `K` rows of `K` nonnegative numbers, no header; row = true class,
//!   column = predicted class. Counts or probabilities.
//! - pmf / prior: the probabilities in order, one per line (or comma-separated).
//! - distortion matrix: rows of nonnegative numbers, no header.
//! - logits: header `label,l0,l1,...,l{K-1}`, then one record per line with a 0-based
//!   integer label.
//! - curves: header `method,lambda,rate_bits,distortion,bpp,flags`.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::classify::ConfusionMatrix;
use crate::curve::RdCurve;
use crate::error::{Error, Result};
use crate::prob::{DistortionMatrix, Pmf};
use crate::snc::LogitsDataset;

pub const CURVES_HEADER: &str = "method,lambda,rate_bits,distortion,bpp,flags";

/// How to obtain the class prior when reading a confusion matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorChoice {
    /// Integral tables are counts and use row-mass proportions; row-stochastic
    /// tables are ambiguous and rejected; any other table uses row masses.
    Auto,
    /// Row-mass proportions.
    RowMass,
    Uniform,
    /// Companion pmf file.
    File(PathBuf),
}

struct Line {
    number: usize,
    fields: Vec<String>,
}

/// Non-comment, non-blank records with their 1-based line numbers.
fn data_lines(path: &Path) -> Result<Vec<Line>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(std::io::BufReader::new(file));
    let mut lines = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        lines.push(Line {
            number: record.position().map_or(0, |p| p.line() as usize),
            fields: record.iter().map(str::to_owned).collect(),
        });
    }
    Ok(lines)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => parse_error(path, line, 1, format!("{other:?}")),
    }
}

fn parse_error(path: &Path, line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message: message.into(),
    }
}

fn parse_number(path: &Path, line: usize, column: usize, field: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| parse_error(path, line, column, format!("not a number: {field:?}")))?;
    if !v.is_finite() {
        return Err(parse_error(path, line, column, format!("non-finite value {field:?}")));
    }
    Ok(v)
}

fn read_table(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in data_lines(path)? {
        let row = line
            .fields
            .iter()
            .enumerate()
            .map(|(c, f)| parse_number(path, line.number, c + 1, f))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_error(
                    path,
                    line.number,
                    row.len().min(first.len()) + 1,
                    format!("ragged row: {} fields, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_error(path, 1, 1, "no data rows"));
    }
    Ok(rows)
}

/// Reads a square confusion table and resolves its prior according to `prior`.
pub fn read_confusion_csv(path: &Path, prior: &PriorChoice) -> Result<ConfusionMatrix> {
    let rows = read_table(path)?;
    let k = rows.len();
    if rows[0].len() != k {
        return Err(Error::InvalidConfusion(format!(
            "{}: table is {k}x{}, expected square",
            path.display(),
            rows[0].len()
        )));
    }
    for (i, row) in rows.iter().enumerate() {
        if let Some(j) = row.iter().position(|&v| v < 0.0) {
            return Err(Error::InvalidConfusion(format!(
                "{}: negative entry at row {}, column {}",
                path.display(),
                i + 1,
                j + 1
            )));
        }
        if row.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidConfusion(format!(
                "{}: row {} is all zeros",
                path.display(),
                i + 1
            )));
        }
    }
    let integral = rows.iter().flatten().all(|v| (v - v.round()).abs() <= 1e-9);
    let stochastic = rows
        .iter()
        .all(|r| (r.iter().sum::<f64>() - 1.0).abs() <= crate::prob::SIMPLEX_TOL);
    match prior {
        PriorChoice::RowMass => ConfusionMatrix::from_counts(&rows),
        PriorChoice::Uniform => ConfusionMatrix::from_rows(&rows, Pmf::uniform(k)?),
        PriorChoice::File(p) => ConfusionMatrix::from_rows(&rows, read_pmf_csv(p)?),
        PriorChoice::Auto if stochastic && !integral => Err(Error::InvalidConfusion(format!(
            "{}: rows are already normalized, so the class prior is unknown; \
             supply a prior file or choose the uniform prior explicitly",
            path.display()
        ))),
        PriorChoice::Auto => ConfusionMatrix::from_counts(&rows),
    }
}

/// Writes the joint table `p(y, ỹ)`; reading it back recovers channel and prior.
pub fn write_confusion_csv(cm: &ConfusionMatrix, path: &Path) -> Result<()> {
    let k = cm.classes();
    let joint = cm.joint();
    let mut out = String::new();
    for row in joint.chunks(k) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_pmf_csv(path: &Path) -> Result<Pmf> {
    let mut values = Vec::new();
    for line in data_lines(path)? {
        for (c, f) in line.fields.iter().enumerate() {
            values.push(parse_number(path, line.number, c + 1, f)?);
        }
    }
    Pmf::new(values).map_err(|e| Error::InvalidPmf(format!("{}: {e}", path.display())))
}

pub fn read_distortion_csv(path: &Path) -> Result<DistortionMatrix> {
    DistortionMatrix::from_rows(read_table(path)?)
        .map_err(|e| Error::InvalidDistortion(format!("{}: {e}", path.display())))
}

pub fn read_logits_csv(path: &Path) -> Result<LogitsDataset> {
    let mut lines = data_lines(path)?.into_iter();
    let header = lines
        .next()
        .ok_or_else(|| parse_error(path, 1, 1, "missing header"))?;
    if header.fields.first().map(String::as_str) != Some("label") {
        return Err(parse_error(path, header.number, 1, "header must start with \"label\""));
    }
    let k = header.fields.len() - 1;
    for (j, f) in header.fields.iter().enumerate().skip(1) {
        if *f != format!("l{}", j - 1) {
            return Err(parse_error(
                path,
                header.number,
                j + 1,
                format!("expected column \"l{}\", found {f:?}", j - 1),
            ));
        }
    }
    let mut labels = Vec::new();
    let mut logits = Vec::new();
    for line in lines {
        if line.fields.len() != k + 1 {
            return Err(parse_error(
                path,
                line.number,
                line.fields.len().min(k + 1) + 1,
                format!("ragged row: {} fields, expected {}", line.fields.len(), k + 1),
            ));
        }
        let label: usize = line.fields[0].parse().map_err(|_| {
            parse_error(
                path,
                line.number,
                1,
                format!("label must be a nonnegative integer, found {:?}", line.fields[0]),
            )
        })?;
        if label >= k {
            return Err(parse_error(
                path,
                line.number,
                1,
                format!("label {label} outside 0..{k}"),
            ));
        }
        labels.push(label);
        for (c, f) in line.fields.iter().enumerate().skip(1) {
            logits.push(parse_number(path, line.number, c + 1, f)?);
        }
    }
    LogitsDataset::new(k, labels, logits)
        .map_err(|e| Error::InvalidDataset(format!("{}: {e}", path.display())))
}

pub fn format_logits_csv(ds: &LogitsDataset) -> String {
    let mut out = String::from("label");
    for j in 0..ds.classes() {
        let _ = write!(out, ",l{j}");
    }
    out.push('\n');
    for (i, &y) in ds.labels().iter().enumerate() {
        let _ = write!(out, "{y}");
        for v in ds.logits(i) {
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    out
}

pub fn write_logits_csv(ds: &LogitsDataset, path: &Path) -> Result<()> {
    write_atomic(path, format_logits_csv(ds).as_bytes())
}

/// Fixed-point rendering with nine significant digits; zero prints as `0`.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (8 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Renders curves in the curves CSV schema. `bpp = rate_bits / pixel_count`.
pub fn format_curves_csv(curves: &[RdCurve], pixel_count: Option<u64>) -> Result<String> {
    if curves.is_empty() {
        return Err(Error::Domain("no curves to write".into()));
    }
    if pixel_count == Some(0) {
        return Err(Error::Domain("pixel count must be positive".into()));
    }
    let mut rows: Vec<(&str, f64, String)> = Vec::new();
    for c in curves {
        for p in &c.points {
            let mut flags = Vec::new();
            if c.empirical {
                flags.push("empirical".to_string());
            }
            if !p.converged {
                flags.push("not-converged".to_string());
            }
            if let Some(n) = &p.note {
                flags.push(n.clone());
            }
            let line = format!(
                "{},{},{},{},{},{}",
                c.method,
                p.lambda.map(sig9).unwrap_or_default(),
                sig9(p.rate),
                sig9(p.distortion),
                pixel_count
                    .map(|n| sig9(p.rate / n as f64))
                    .unwrap_or_default(),
                flags.join(";")
            );
            rows.push((&c.method, p.distortion, line));
        }
    }
    rows.sort_by(|a, b| a.0.cmp(b.0).then(a.1.total_cmp(&b.1)));
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CURVES_HEADER);
    out.push('\n');
    for (_, _, line) in rows {
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_curves_csv(curves: &[RdCurve], pixel_count: Option<u64>, path: &Path) -> Result<()> {
    let text = format_curves_csv(curves, pixel_count)?;
    write_atomic(path, text.as_bytes())
}

/// Writes to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.flush().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
