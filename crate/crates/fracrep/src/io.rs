//! CSV ingestion and emission for the three external inputs: person
//! microdata, poverty thresholds, and calibration control margins.
//!
//! The persons file carries fixed identifier/weight columns, then zero or
//! more covariates prefixed `cov_`, then income items `y1..yK` paired with
//! response flags `r1..rK`:
//!
//! ```text
//! person_id,family_id,household_id,is_householder,age,stratum_id,county_id,
//! w0,w,cov_<name>...,y1..yK,r1..rK
//! ```
//!
//! A flag of 1 means the matching `y` column holds an observed value; a
//! flag of 0 means the item is missing and the `y` cell is ignored (written
//! back as an empty cell).

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::frame::{AgeClass, Frame, PersonRecord, ThresholdTable};
use crate::raking::{ControlMargins, MarginCategory, MarginDimension};

/// Failure while reading or writing one of the external files. These are
/// transport and format errors; substantive data checks live in
/// [`Frame::validate`](crate::frame::Frame::validate).
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {message}")]
    Header { path: String, message: String },
    #[error("{path} row {row}: column {column}: {message}")]
    Cell {
        path: String,
        row: usize,
        column: String,
        message: String,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> IngestError {
    IngestError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path, source: csv::Error) -> IngestError {
    IngestError::Csv {
        path: path.display().to_string(),
        source,
    }
}

fn header_err(path: &Path, message: impl Into<String>) -> IngestError {
    IngestError::Header {
        path: path.display().to_string(),
        message: message.into(),
    }
}

fn cell_err(path: &Path, row: usize, column: &str, message: impl Into<String>) -> IngestError {
    IngestError::Cell {
        path: path.display().to_string(),
        row,
        column: column.to_string(),
        message: message.into(),
    }
}

const FIXED_COLUMNS: [&str; 9] = [
    "person_id",
    "family_id",
    "household_id",
    "is_householder",
    "age",
    "stratum_id",
    "county_id",
    "w0",
    "w",
];

/// Layout of a persons file derived from its header row.
struct PersonsLayout {
    covariate_names: Vec<String>,
    item_count: usize,
    cov_start: usize,
    y_start: usize,
    r_start: usize,
}

fn parse_persons_header(path: &Path, header: &csv::StringRecord) -> Result<PersonsLayout, IngestError> {
    let cols: Vec<&str> = header.iter().collect();
    for (i, expected) in FIXED_COLUMNS.iter().enumerate() {
        match cols.get(i) {
            Some(got) if got == expected => {}
            Some(got) => {
                return Err(header_err(
                    path,
                    format!("column {} is '{got}', expected '{expected}'", i + 1),
                ))
            }
            None => return Err(header_err(path, format!("missing column '{expected}'"))),
        }
    }
    let cov_start = FIXED_COLUMNS.len();
    let mut covariate_names = Vec::new();
    let mut pos = cov_start;
    while pos < cols.len() {
        if let Some(name) = cols[pos].strip_prefix("cov_") {
            covariate_names.push(name.to_string());
            pos += 1;
        } else {
            break;
        }
    }
    let y_start = pos;
    let mut item_count = 0;
    while pos < cols.len() && cols[pos] == format!("y{}", item_count + 1) {
        item_count += 1;
        pos += 1;
    }
    if item_count == 0 {
        return Err(header_err(path, "no income columns (expected y1, y2, ...)"));
    }
    let r_start = pos;
    for s in 0..item_count {
        let expected = format!("r{}", s + 1);
        match cols.get(r_start + s) {
            Some(got) if *got == expected => {}
            _ => {
                return Err(header_err(
                    path,
                    format!("expected response flag column '{expected}' to pair with y{}", s + 1),
                ))
            }
        }
    }
    if cols.len() > r_start + item_count {
        return Err(header_err(
            path,
            format!("unrecognized trailing column '{}'", cols[r_start + item_count]),
        ));
    }
    Ok(PersonsLayout {
        covariate_names,
        item_count,
        cov_start,
        y_start,
        r_start,
    })
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    row: usize,
    column: &str,
    raw: &str,
) -> Result<T, IngestError> {
    raw.trim()
        .parse::<T>()
        .map_err(|_| cell_err(path, row, column, format!("cannot parse '{raw}'")))
}

/// Reads a persons CSV into a [`Frame`]. Format problems surface here;
/// substantive checks are left to [`Frame::validate`].
pub fn read_persons_csv(path: impl AsRef<Path>) -> Result<Frame, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let header = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let layout = parse_persons_header(path, &header)?;

    let mut records = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| csv_err(path, e))?;
        // Row numbers in errors count from 1 and skip the header line.
        let rowno = line + 1;
        let expected_len = layout.r_start + layout.item_count;
        if row.len() != expected_len {
            return Err(cell_err(
                path,
                rowno,
                "<row>",
                format!("expected {expected_len} fields, found {}", row.len()),
            ));
        }
        let flag = |raw: &str, col: &str, rowno: usize| -> Result<bool, IngestError> {
            match raw.trim() {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(cell_err(path, rowno, col, format!("expected 0 or 1, found '{other}'"))),
            }
        };
        let mut covariates = Vec::with_capacity(layout.covariate_names.len());
        for (c, name) in layout.covariate_names.iter().enumerate() {
            covariates.push(parse_field::<f64>(
                path,
                rowno,
                &format!("cov_{name}"),
                &row[layout.cov_start + c],
            )?);
        }
        let mut incomes = Vec::with_capacity(layout.item_count);
        for s in 0..layout.item_count {
            let responded = flag(&row[layout.r_start + s], &format!("r{}", s + 1), rowno)?;
            if responded {
                let raw = &row[layout.y_start + s];
                if raw.trim().is_empty() {
                    return Err(cell_err(
                        path,
                        rowno,
                        &format!("y{}", s + 1),
                        "flagged as observed but the value cell is empty",
                    ));
                }
                incomes.push(Some(parse_field::<f64>(
                    path,
                    rowno,
                    &format!("y{}", s + 1),
                    raw,
                )?));
            } else {
                incomes.push(None);
            }
        }
        records.push(PersonRecord {
            person_id: parse_field(path, rowno, "person_id", &row[0])?,
            family_id: parse_field(path, rowno, "family_id", &row[1])?,
            household_id: parse_field(path, rowno, "household_id", &row[2])?,
            is_householder: flag(&row[3], "is_householder", rowno)?,
            age: parse_field(path, rowno, "age", &row[4])?,
            stratum_id: parse_field(path, rowno, "stratum_id", &row[5])?,
            county_id: parse_field(path, rowno, "county_id", &row[6])?,
            initial_weight: parse_field(path, rowno, "w0", &row[7])?,
            final_weight: parse_field(path, rowno, "w", &row[8])?,
            covariates,
            incomes,
        });
    }
    Ok(Frame::new(records, layout.covariate_names, layout.item_count))
}

/// Writes a frame back out in the persons CSV layout. Missing items are
/// written as an empty `y` cell with a 0 response flag.
pub fn write_persons_csv(path: impl AsRef<Path>, frame: &Frame) -> Result<(), IngestError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);

    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(frame.covariate_names().iter().map(|n| format!("cov_{n}")));
    header.extend((1..=frame.item_count()).map(|s| format!("y{s}")));
    header.extend((1..=frame.item_count()).map(|s| format!("r{s}")));
    writeln!(out, "{}", header.join(",")).map_err(|e| io_err(path, e))?;

    let mut line = String::new();
    for rec in frame.records() {
        line.clear();
        line.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}",
            rec.person_id,
            rec.family_id,
            rec.household_id,
            u8::from(rec.is_householder),
            rec.age,
            rec.stratum_id,
            rec.county_id,
            rec.initial_weight,
            rec.final_weight,
        ));
        for v in &rec.covariates {
            line.push(',');
            line.push_str(&format!("{v}"));
        }
        for inc in &rec.incomes {
            line.push(',');
            if let Some(v) = inc {
                line.push_str(&format!("{v}"));
            }
        }
        for inc in &rec.incomes {
            line.push(',');
            line.push(if inc.is_some() { '1' } else { '0' });
        }
        writeln!(out, "{line}").map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

/// Reads the poverty threshold table (`children,size,age_class,threshold`).
/// `age_class` codes the household reference person's bracket: 0 = under
/// 65, 1 = 65 or older.
pub fn read_thresholds_csv(path: impl AsRef<Path>) -> Result<ThresholdTable, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let header = reader.headers().map_err(|e| csv_err(path, e))?;
    let expected = ["children", "size", "age_class", "threshold"];
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(header_err(
            path,
            format!("expected header {expected:?}, found {got:?}"),
        ));
    }
    let mut table = ThresholdTable::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let rowno = line + 1;
        let children: u32 = parse_field(path, rowno, "children", &row[0])?;
        let size: u32 = parse_field(path, rowno, "size", &row[1])?;
        let code: u8 = parse_field(path, rowno, "age_class", &row[2])?;
        let age_class = AgeClass::from_code(code)
            .ok_or_else(|| cell_err(path, rowno, "age_class", "expected 0 (under 65) or 1 (65+)"))?;
        let threshold: f64 = parse_field(path, rowno, "threshold", &row[3])?;
        if !(threshold.is_finite() && threshold > 0.0) {
            return Err(cell_err(
                path,
                rowno,
                "threshold",
                "must be finite and positive",
            ));
        }
        table.insert(children, size, age_class, threshold);
    }
    Ok(table)
}

/// Writes a threshold table in the layout [`read_thresholds_csv`] accepts.
pub fn write_thresholds_csv(
    path: impl AsRef<Path>,
    table: &ThresholdTable,
) -> Result<(), IngestError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "children,size,age_class,threshold").map_err(|e| io_err(path, e))?;
    for (children, size, age_class, threshold) in table.iter() {
        writeln!(out, "{children},{size},{},{threshold}", age_class.code())
            .map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

/// Reads calibration control margins (`dimension,category,control`).
/// Dimensions name covariates of the frame; categories are the integer
/// codes those covariates take.
pub fn read_margins_csv(path: impl AsRef<Path>) -> Result<ControlMargins, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let header = reader.headers().map_err(|e| csv_err(path, e))?;
    let expected = ["dimension", "category", "control"];
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(header_err(
            path,
            format!("expected header {expected:?}, found {got:?}"),
        ));
    }
    let mut dimensions: Vec<MarginDimension> = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let rowno = line + 1;
        let name = row[0].trim().to_string();
        let code: i64 = parse_field(path, rowno, "category", &row[1])?;
        let control: f64 = parse_field(path, rowno, "control", &row[2])?;
        if !(control.is_finite() && control >= 0.0) {
            return Err(cell_err(
                path,
                rowno,
                "control",
                "must be finite and nonnegative",
            ));
        }
        let dim = match dimensions.iter_mut().find(|d| d.variable == name) {
            Some(d) => d,
            None => {
                dimensions.push(MarginDimension {
                    variable: name,
                    categories: Vec::new(),
                });
                dimensions.last_mut().unwrap()
            }
        };
        if dim.categories.iter().any(|c| c.code == code) {
            return Err(cell_err(
                path,
                rowno,
                "category",
                format!("duplicate category {code} for dimension {}", dim.variable),
            ));
        }
        dim.categories.push(MarginCategory { code, control });
    }
    if dimensions.is_empty() {
        return Err(header_err(path, "no margin rows"));
    }
    Ok(ControlMargins { dimensions })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().expect("tmp file");
        f.write_all(content.as_bytes()).expect("write");
        f
    }

    #[test]
    fn persons_round_trip_preserves_records() {
        let csv = "\
person_id,family_id,household_id,is_householder,age,stratum_id,county_id,w0,w,cov_cell,cov_x,y1,y2,r1,r2
1,1,1,1,40,0,0,2,2.5,3,0.25,1000,,1,0
2,1,1,0,12,0,0,2,2.5,3,0.75,,2000,0,1
";
        let f = write_tmp(csv);
        let frame = read_persons_csv(f.path()).expect("read");
        assert_eq!(frame.len(), 2);
        assert_eq!(frame.item_count(), 2);
        assert_eq!(frame.covariate_names(), &["cell".to_string(), "x".to_string()]);
        assert_eq!(frame.record(0).incomes, vec![Some(1000.0), None]);
        assert_eq!(frame.record(1).incomes, vec![None, Some(2000.0)]);
        assert_eq!(frame.record(1).age, 12);
        assert_eq!(frame.record(0).final_weight, 2.5);

        let out = tempfile::NamedTempFile::new().expect("tmp out");
        write_persons_csv(out.path(), &frame).expect("write");
        let again = read_persons_csv(out.path()).expect("reread");
        assert_eq!(again.records(), frame.records());
    }

    #[test]
    fn persons_header_errors_name_the_offending_column() {
        let csv = "person_id,family_id,household_id,is_householder,age,stratum_id,county_id,w0,weight,y1,r1\n";
        let f = write_tmp(csv);
        let err = read_persons_csv(f.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("'weight'"), "unexpected message: {msg}");
        assert!(msg.contains("'w'"), "unexpected message: {msg}");
    }

    #[test]
    fn persons_observed_flag_with_empty_value_is_an_error() {
        let csv = "\
person_id,family_id,household_id,is_householder,age,stratum_id,county_id,w0,w,y1,r1
1,1,1,1,40,0,0,2,2,,1
";
        let f = write_tmp(csv);
        let err = read_persons_csv(f.path()).unwrap_err();
        assert!(err.to_string().contains("flagged as observed"));
    }

    #[test]
    fn thresholds_parse_and_reject_bad_age_class() {
        let good = write_tmp("children,size,age_class,threshold\n0,2,0,15000\n0,2,1,13500\n");
        let table = read_thresholds_csv(good.path()).expect("read");
        assert_eq!(table.len(), 2);

        let bad = write_tmp("children,size,age_class,threshold\n0,2,7,15000\n");
        let err = read_thresholds_csv(bad.path()).unwrap_err();
        assert!(err.to_string().contains("age_class"));
    }

    #[test]
    fn margins_group_rows_by_dimension() {
        let f = write_tmp(
            "dimension,category,control\nregion,1,100\nregion,2,200\nsex,1,150\nsex,2,150\n",
        );
        let margins = read_margins_csv(f.path()).expect("read");
        assert_eq!(margins.dimensions.len(), 2);
        assert_eq!(margins.dimensions[0].variable, "region");
        assert_eq!(margins.dimensions[0].categories.len(), 2);
        assert_eq!(margins.dimensions[1].categories[1].control, 150.0);
    }

    #[test]
    fn margins_reject_duplicate_category() {
        let f = write_tmp("dimension,category,control\nregion,1,100\nregion,1,50\n");
        assert!(read_margins_csv(f.path()).is_err());
    }
}
