use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{Dataset, Labels};
use crate::{Error, Result};

/// Target column selected by header name or by 0-based position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TargetColumn {
    Name(String),
    Index(usize),
}

impl std::str::FromStr for TargetColumn {
    type Err = std::convert::Infallible;

    /// A bare non-negative integer is a position, anything else a name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => TargetColumn::Index(i),
            Err(_) => TargetColumn::Name(s.to_string()),
        })
    }
}

pub fn load_csv(path: &Path, target: &TargetColumn, has_header: bool) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(file, target, has_header)
}

/// Parse comma-separated numeric data. Reported row and column positions are
/// 1-based and count data rows only.
pub fn parse_csv<R: Read>(reader: R, target: &TargetColumn, has_header: bool) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Option<Vec<String>> = if has_header {
        Some(rdr.headers()?.iter().map(str::to_string).collect())
    } else {
        None
    };

    let mut values = Vec::new();
    let mut width = header.as_ref().map(Vec::len);
    let mut rows = 0;
    for record in rdr.records() {
        let record = record?;
        rows += 1;
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row: rows,
                col: c + 1,
                value: cell.to_string(),
            })?;
            values.push(v);
        }
        width.get_or_insert(record.len());
    }
    let width = width.unwrap_or(0);

    let t = match target {
        TargetColumn::Index(i) => *i,
        TargetColumn::Name(name) => header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| Error::InvalidArgument(format!("no target column named {name:?}")))?,
    };
    if t >= width {
        return Err(Error::InvalidArgument(format!(
            "target column {t} out of range for {width} columns"
        )));
    }

    let all =
        Array2::from_shape_vec((rows, width), values).map_err(|e| Error::Shape(e.to_string()))?;
    let keep: Vec<usize> = (0..width).filter(|&c| c != t).collect();
    let x = all.select(ndarray::Axis(1), &keep);
    let y = all.select(ndarray::Axis(1), &[t]);
    let mut ds = Dataset::new(x, Labels::Real(y))?;
    if let Some(h) = header {
        ds.feature_names = Some(keep.iter().map(|&c| h[c].clone()).collect());
        ds.target_name = Some(h[t].clone());
    }
    Ok(ds)
}

/// Write features then the target as the last column, with a header when the
/// dataset carries names. Values use the shortest round-tripping decimal form.
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_csv_to(ds, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_csv_to<W: Write>(ds: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let target_cols = ds.y.output_dim().max(1);
    if let Some(names) = &ds.feature_names {
        let mut header = names.clone();
        let t = ds.target_name.clone().unwrap_or_else(|| "target".into());
        if target_cols == 1 || matches!(ds.y, Labels::Class { .. }) {
            header.push(t);
        } else {
            header.extend((0..target_cols).map(|k| format!("{t}{k}")));
        }
        w.write_record(&header)?;
    }
    for (i, row) in ds.x.outer_iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        match &ds.y {
            Labels::Real(y) => rec.extend(y.row(i).iter().map(|v| format!("{v}"))),
            Labels::Class { labels, .. } => rec.push(labels[i].to_string()),
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_row_fixture() {
        let text = "a,b,y\n1,2,3\n4,5,6\n7,8,9\n";
        let ds = parse_csv(text.as_bytes(), &TargetColumn::Name("y".into()), true).unwrap();
        assert_eq!(ds.x.dim(), (3, 2));
        assert_eq!(ds.y.len(), 3);
        assert_eq!(
            ds.feature_names.as_deref(),
            Some(&["a".to_string(), "b".to_string()][..])
        );
    }

    #[test]
    fn bad_cell_names_position() {
        let text = "a,b,y\n1,2,3\nabc,5,6\n";
        let err = parse_csv(text.as_bytes(), &TargetColumn::Index(2), true).unwrap_err();
        match err {
            Error::Parse { row, col, value } => {
                assert_eq!((row, col), (2, 1));
                assert_eq!(value, "abc");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_target() {
        let text = "a,b\n1,2\n";
        assert!(parse_csv(text.as_bytes(), &TargetColumn::Name("y".into()), true).is_err());
        assert!(parse_csv(text.as_bytes(), &TargetColumn::Index(5), true).is_err());
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let text = "a,y\n0.1,3.3333333333333335\n-1e-300,2\n";
        let ds = parse_csv(text.as_bytes(), &TargetColumn::Name("y".into()), true).unwrap();
        let mut buf = Vec::new();
        write_csv_to(&ds, &mut buf).unwrap();
        let back = parse_csv(&buf[..], &TargetColumn::Name("y".into()), true).unwrap();
        assert_eq!(back, ds);
    }
}
