//! CSV ingestion for monthly series.
//!
//! Two layouts are accepted, auto-detected by header:
//!
//! - long: `year,month,value`, one row per month, months 1..=12, strictly
//!   increasing (year, month), starting in January;
//! - wide: `year,jan,feb,...,dec`, one row per year, years consecutive.
//!
//! Values must be finite decimals; missing cells are errors.

use crate::error::{Error, Result};
use crate::timeseries::MonthlySeries;
use std::path::Path;

const MONTH_NAMES: [&str; 12] = [
    "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec",
];

/// Minimum series length for any downstream use.
const MIN_MONTHS: usize = 24;

/// Loads a monthly series from a long- or wide-format CSV file.
pub fn load_csv<P: AsRef<Path>>(path: P) -> Result<MonthlySeries> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Csv {
                path: display.clone(),
                line: 0,
                message: "cannot open file".into(),
            },
            _ => Error::Csv {
                path: display.clone(),
                line: 0,
                message: e.to_string(),
            },
        })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(&display, 1, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_ascii_lowercase())
        .collect();

    let wide_headers: Vec<String> = std::iter::once("year".to_string())
        .chain(MONTH_NAMES.iter().map(|m| m.to_string()))
        .collect();

    let series = if headers == ["year", "month", "value"] {
        load_long(&display, &mut reader)?
    } else if headers == wide_headers {
        load_wide(&display, &mut reader)?
    } else {
        return Err(csv_error(
            &display,
            1,
            format!(
                "unrecognized header {:?}; expected year,month,value or year,jan,...,dec",
                headers.join(",")
            ),
        ));
    };

    if series.values.len() < MIN_MONTHS {
        return Err(Error::Data(format!(
            "{}: series has {} months, need at least {}",
            display,
            series.values.len(),
            MIN_MONTHS
        )));
    }
    Ok(series)
}

fn csv_error(path: &str, line: u64, message: String) -> Error {
    Error::Csv {
        path: path.to_string(),
        line,
        message,
    }
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn parse_value(path: &str, line: u64, field: &str, what: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| csv_error(path, line, format!("{what} {field:?} is not a number")))?;
    if !v.is_finite() {
        return Err(csv_error(path, line, format!("{what} {field:?} is not finite")));
    }
    Ok(v)
}

fn parse_int(path: &str, line: u64, field: &str, what: &str) -> Result<i64> {
    field
        .parse()
        .map_err(|_| csv_error(path, line, format!("{what} {field:?} is not an integer")))
}

fn load_long<R: std::io::Read>(path: &str, reader: &mut csv::Reader<R>) -> Result<MonthlySeries> {
    let mut start_year = None;
    let mut values = Vec::new();
    let mut expected: Option<(i64, i64)> = None;

    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, 0, e.to_string()))?;
        let line = record_line(&record);
        if record.len() != 3 {
            return Err(csv_error(
                path,
                line,
                format!("expected 3 fields, found {}", record.len()),
            ));
        }
        let year = parse_int(path, line, &record[0], "year")?;
        let month = parse_int(path, line, &record[1], "month")?;
        if !(1..=12).contains(&month) {
            return Err(csv_error(path, line, format!("month {month} out of 1..=12")));
        }
        match expected {
            None => {
                if month != 1 {
                    return Err(csv_error(
                        path,
                        line,
                        format!("series must start in January, found month {month}"),
                    ));
                }
                start_year = Some(year as i32);
            }
            Some((ey, em)) => {
                if (year, month) != (ey, em) {
                    return Err(csv_error(
                        path,
                        line,
                        format!("expected year {ey} month {em}, found year {year} month {month}"),
                    ));
                }
            }
        }
        expected = Some(if month == 12 {
            (year + 1, 1)
        } else {
            (year, month + 1)
        });
        values.push(parse_value(path, line, &record[2], "value")?);
    }
    let start_year = start_year.ok_or_else(|| Error::Data(format!("{path}: no data rows")))?;
    MonthlySeries::new(start_year, values)
}

fn load_wide<R: std::io::Read>(path: &str, reader: &mut csv::Reader<R>) -> Result<MonthlySeries> {
    let mut start_year = None;
    let mut values = Vec::new();
    let mut expected_year: Option<i64> = None;

    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, 0, e.to_string()))?;
        let line = record_line(&record);
        if record.len() != 13 {
            return Err(csv_error(
                path,
                line,
                format!("expected 13 fields, found {}", record.len()),
            ));
        }
        let year = parse_int(path, line, &record[0], "year")?;
        match expected_year {
            None => start_year = Some(year as i32),
            Some(ey) => {
                if year != ey {
                    return Err(csv_error(
                        path,
                        line,
                        format!("expected year {ey}, found {year}"),
                    ));
                }
            }
        }
        expected_year = Some(year + 1);
        for m in 0..12 {
            values.push(parse_value(path, line, &record[m + 1], MONTH_NAMES[m])?);
        }
    }
    let start_year = start_year.ok_or_else(|| Error::Data(format!("{path}: no data rows")))?;
    MonthlySeries::new(start_year, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    fn long_csv(series: &MonthlySeries) -> String {
        let mut out = String::from("year,month,value\n");
        for (i, v) in series.values.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{}\n",
                series.start_year + (i / 12) as i32,
                i % 12 + 1,
                v
            ));
        }
        out
    }

    fn wide_csv(series: &MonthlySeries) -> String {
        let mut out = String::from("year,jan,feb,mar,apr,may,jun,jul,aug,sep,oct,nov,dec\n");
        for (y, chunk) in series.values.chunks(12).enumerate() {
            out.push_str(&format!("{}", series.start_year + y as i32));
            for v in chunk {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    fn sample_series(years: usize) -> MonthlySeries {
        MonthlySeries::new(
            1893,
            (0..years * 12)
                .map(|i| 100.0 + 50.0 * ((i % 12) as f64) + (i as f64) * 0.25)
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn well_formed_long_file_loads_every_month() {
        let series = sample_series(2);
        let f = write_temp(&long_csv(&series));
        let loaded = load_csv(f.path()).unwrap();
        assert_eq!(loaded.values.len(), 24);
        assert_eq!(loaded.start_year, 1893);
        assert_eq!(loaded, series);
    }

    #[test]
    fn wide_and_long_encodings_load_identically() {
        let series = sample_series(3);
        let f_long = write_temp(&long_csv(&series));
        let f_wide = write_temp(&wide_csv(&series));
        let a = load_csv(f_long.path()).unwrap();
        let b = load_csv(f_wide.path()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nan_cell_reports_its_line() {
        let series = sample_series(2);
        let mut text = long_csv(&series);
        // Replace the value on data line 5 (file line 6) with NaN.
        text = text
            .lines()
            .enumerate()
            .map(|(i, l)| {
                if i == 5 {
                    let mut parts: Vec<&str> = l.split(',').collect();
                    parts[2] = "NaN";
                    parts.join(",")
                } else {
                    l.to_string()
                }
            })
            .collect::<Vec<_>>()
            .join("\n");
        let f = write_temp(&text);
        match load_csv(f.path()) {
            Err(Error::Csv { line, message, .. }) => {
                assert_eq!(line, 6);
                assert!(message.contains("not finite"), "{message}");
            }
            other => panic!("expected a line-numbered error, got {other:?}"),
        }
    }

    #[test]
    fn short_series_and_gaps_are_rejected() {
        let series = sample_series(1);
        let f = write_temp(&long_csv(&series));
        assert!(matches!(load_csv(f.path()), Err(Error::Data(_))));

        let gap = "year,month,value\n1900,1,1.0\n1900,3,2.0\n";
        let f = write_temp(gap);
        assert!(matches!(load_csv(f.path()), Err(Error::Csv { line: 3, .. })));

        let bad_start = "year,month,value\n1900,2,1.0\n";
        let f = write_temp(bad_start);
        assert!(matches!(load_csv(f.path()), Err(Error::Csv { line: 2, .. })));

        let bad_header = "time,rain\n1,2\n";
        let f = write_temp(bad_header);
        assert!(matches!(load_csv(f.path()), Err(Error::Csv { line: 1, .. })));
    }

    #[test]
    fn missing_file_is_a_data_error() {
        assert!(load_csv("/nonexistent/series.csv").is_err());
    }
}
