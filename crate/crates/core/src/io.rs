//! CSV reading and writing.
//!
//! Input: header `group,x1,...,xK,y`, one observation per row. Groups are numbered in
//! order of first appearance. Columns with other names are ignored.
//!
//! Every writer renders the whole file in memory and then moves it into place, so a
//! failed run never leaves a half-written file behind.

use std::collections::HashMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use crate::diagnostics::DiagnosticsReport;
use crate::error::{Error, Result};
use crate::model::{parameter_names, ChainOutput, Group, GroupedCountDataset, RawDataset};
use crate::special::KsPoint;

/// Parses grouped counts without the positivity check; zeros are kept.
pub fn read_raw_csv<R: Read>(reader: R) -> Result<RawDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.is_empty() {
        return Err(Error::Data {
            row: 1,
            message: "empty file".into(),
        });
    }
    let find = |name: &str| header.iter().position(|h| h == name);
    let group_col = find("group").ok_or_else(|| Error::Data {
        row: 1,
        message: "missing column 'group'".into(),
    })?;
    let y_col = find("y").ok_or_else(|| Error::Data {
        row: 1,
        message: "missing column 'y'".into(),
    })?;
    let mut x_cols = Vec::new();
    while let Some(c) = find(&format!("x{}", x_cols.len() + 1)) {
        x_cols.push(c);
    }
    if x_cols.is_empty() {
        return Err(Error::Data {
            row: 1,
            message: "missing covariate column 'x1'".into(),
        });
    }
    let k = x_cols.len();

    let mut order: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut xs: Vec<Vec<f64>> = Vec::new();
    let mut ys: Vec<Vec<u64>> = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let row = r + 2;
        let record = record?;
        let field = |c: usize| record.get(c).unwrap_or("");
        let label = field(group_col);
        if label.is_empty() {
            return Err(Error::Data {
                row,
                message: "empty group label".into(),
            });
        }
        let j = *index.entry(label.to_string()).or_insert_with(|| {
            order.push(label.to_string());
            xs.push(Vec::new());
            ys.push(Vec::new());
            order.len() - 1
        });
        for (n, &c) in x_cols.iter().enumerate() {
            let v: f64 = field(c).parse().map_err(|_| Error::Data {
                row,
                message: format!("x{} = '{}' is not a number", n + 1, field(c)),
            })?;
            if !v.is_finite() {
                return Err(Error::Data {
                    row,
                    message: format!("x{} = '{}' is not finite", n + 1, field(c)),
                });
            }
            xs[j].push(v);
        }
        ys[j].push(parse_count(field(y_col), row)?);
    }
    if order.is_empty() {
        return Err(Error::Data {
            row: 2,
            message: "no data rows".into(),
        });
    }
    let groups = order
        .into_iter()
        .zip(xs.into_iter().zip(ys))
        .map(|(label, (x, y))| Group::new(label, x, y, None))
        .collect();
    RawDataset::new(k, groups)
}

fn parse_count(s: &str, row: usize) -> Result<u64> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let err = |message: String| Error::Data { row, message };
    match s.parse::<f64>() {
        Ok(v) if v < 0.0 => Err(err(format!("negative count y = '{s}'"))),
        Ok(v) if v.is_finite() && v.fract() == 0.0 && v <= u64::MAX as f64 => Ok(v as u64),
        _ => Err(err(format!("y = '{s}' is not a non-negative integer"))),
    }
}

/// Reads the file, adds `shift` to every count if given, and requires positive counts.
pub fn ingest_csv(path: &Path, shift: Option<u64>) -> Result<GroupedCountDataset> {
    let raw = read_raw_csv_file(path)?;
    raw_to_dataset(raw, shift)
}

pub fn read_raw_csv_file(path: &Path) -> Result<RawDataset> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_raw_csv(file)
}

/// Like [`RawDataset::into_dataset`], but a zero count is reported with its CSV row number.
pub fn raw_to_dataset(raw: RawDataset, shift: Option<u64>) -> Result<GroupedCountDataset> {
    if shift.is_none() {
        if let Some(row) = zero_count_row(&raw) {
            return Err(Error::Data {
                row,
                message: "zero count; the Gaussian approximation needs positive counts \
                          (pass a count shift to add a positive constant)"
                    .into(),
            });
        }
    }
    raw.into_dataset(shift)
}

/// CSV row (header = 1) of the first zero count, assuming rows are stored group by group
/// in first-appearance order, as written by [`dataset_csv`].
fn zero_count_row(raw: &RawDataset) -> Option<usize> {
    raw.counts().position(|y| y == 0).map(|p| p + 2)
}

pub fn dataset_csv(data: &RawDataset) -> Result<Vec<u8>> {
    let k = data.num_covariates();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["group".to_string()];
    header.extend((1..=k).map(|i| format!("x{i}")));
    header.push("y".into());
    w.write_record(&header)?;
    for g in data.groups() {
        for i in 0..g.len() {
            let mut rec = vec![g.label().to_string()];
            rec.extend(g.row(i, k).iter().map(|v| v.to_string()));
            rec.push(g.counts()[i].to_string());
            w.write_record(&rec)?;
        }
    }
    finish(w)
}

/// Generating coefficients as `parameter,value` rows named `w[j,k]`.
pub fn truth_csv(j: usize, k: usize, true_w: &[f64]) -> Result<Vec<u8>> {
    if true_w.len() != j * k {
        return Err(Error::Config(format!("{} coefficients for a {j} x {k} model", true_w.len())));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["parameter", "value"])?;
    for (name, v) in parameter_names(j, k).into_iter().zip(true_w) {
        w.write_record([name, v.to_string()])?;
    }
    finish(w)
}

/// Long format `chain,iteration,parameter,value`; chains and iterations are 1-based and
/// iterations count retained draws only.
pub fn draws_csv(output: &ChainOutput) -> Result<Vec<u8>> {
    let names = output.parameter_names();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["chain", "iteration", "parameter", "value"])?;
    for (c, chain) in output.draws.iter().enumerate() {
        let c = (c + 1).to_string();
        for (t, state) in chain.iter().enumerate() {
            let t = (t + 1).to_string();
            for (name, v) in names.iter().zip(state.flatten()) {
                w.write_record([c.as_str(), t.as_str(), name.as_str(), v.to_string().as_str()])?;
            }
        }
    }
    finish(w)
}

/// One row of the diagnostics table.
#[derive(Debug, Clone)]
pub struct DiagnosticsRow<'a> {
    pub dataset: &'a str,
    pub report: &'a DiagnosticsReport,
}

/// `dataset,sampler,N_d,K,J,T_s,E_s,R2,RMSE`. With `omit_timing` the wall-clock columns
/// are written as `NA` so the file depends on the seed alone.
pub fn diagnostics_csv(rows: &[DiagnosticsRow<'_>], omit_timing: bool) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["dataset", "sampler", "N_d", "K", "J", "T_s", "E_s", "R2", "RMSE"])?;
    for row in rows {
        let r = row.report;
        let (t_s, e_s) = if omit_timing {
            ("NA".to_string(), "NA".to_string())
        } else {
            (number(r.t_s), number(r.e_s))
        };
        w.write_record([
            row.dataset.to_string(),
            r.sampler.clone(),
            r.characteristics.n_d.to_string(),
            r.num_covariates.to_string(),
            r.num_groups.to_string(),
            t_s,
            e_s,
            number(r.r2),
            number(r.rmse),
        ])?;
    }
    finish(w)
}

/// Per-parameter ESS as `parameter,ess`.
pub fn ess_csv(names: &[String], report: &DiagnosticsReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["parameter", "ess"])?;
    for (name, v) in names.iter().zip(&report.ess) {
        w.write_record([name.clone(), number(*v)])?;
    }
    finish(w)
}

pub fn ks_curve_csv(points: &[KsPoint]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["y", "ks_distance", "abs_mean_error"])?;
    for p in points {
        w.write_record([p.y.to_string(), number(p.ks_distance), number(p.abs_mean_error)])?;
    }
    finish(w)
}

fn number(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        "NA".into()
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = PathBuf::from(path);
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
    tmp.set_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<RawDataset> {
        read_raw_csv(s.as_bytes())
    }

    #[test]
    fn groups_in_first_appearance_order() {
        let raw = parse("group,x1,y\n1,0.5,3\n1,0.7,4\n2,1.0,5\n").unwrap();
        assert_eq!(raw.groups().len(), 2);
        assert_eq!(raw.groups()[0].len(), 2);
        assert_eq!(raw.groups()[1].len(), 1);
        let raw = parse("group,x1,y\nb,0.5,3\na,0.7,4\nb,1.0,5\n").unwrap();
        assert_eq!(raw.groups()[0].label(), "b");
        assert_eq!(raw.groups()[0].counts(), &[3, 5]);
    }

    #[test]
    fn covid_style_columns() {
        let raw = parse("group,x1,x2,x3,x4,y\nNY,0.1,0.01,0.001,3,12\nNY,0.2,0.04,0.008,3,0\n").unwrap();
        assert_eq!(raw.num_covariates(), 4);
    }

    #[test]
    fn extra_columns_ignored() {
        let raw = parse("note,group,x1,y\nhello,1,0.5,3\n").unwrap();
        assert_eq!(raw.num_covariates(), 1);
    }

    #[test]
    fn rejects_bad_input_with_row_numbers() {
        let row = |s: &str| match parse(s) {
            Err(Error::Data { row, .. }) => row,
            other => panic!("expected data error, got {other:?}"),
        };
        assert_eq!(row("x1,y\n0.5,3\n"), 1);
        assert_eq!(row("group,x1\n1,0.5\n"), 1);
        assert_eq!(row("group,y\n1,3\n"), 1);
        assert_eq!(row("group,x1,y\n1,0.5,3\n1,0.5,2.5\n"), 3);
        assert_eq!(row("group,x1,y\n1,0.5,-1\n"), 2);
        assert_eq!(row("group,x1,y\n1,abc,1\n"), 2);
        assert_eq!(row("group,x1,y\n"), 2);
        assert!(parse("").is_err());
    }

    #[test]
    fn zero_count_needs_shift() {
        let raw = parse("group,x1,y\n1,0.5,3\n2,0.7,0\n").unwrap();
        match raw_to_dataset(raw.clone(), None) {
            Err(Error::Data { row, message }) => {
                assert_eq!(row, 3);
                assert!(message.contains("positive"));
            }
            other => panic!("{other:?}"),
        }
        let data = raw_to_dataset(raw, Some(1)).unwrap();
        assert_eq!(data.counts().collect::<Vec<_>>(), vec![4, 1]);
    }

    #[test]
    fn integral_float_counts_accepted() {
        let raw = parse("group,x1,y\n1,0.5,3.0\n").unwrap();
        assert_eq!(raw.groups()[0].counts(), &[3]);
    }

    #[test]
    fn dataset_round_trip() {
        let text = "group,x1,x2,y\n1,0.5,1.25,3\n1,0.7,2,4\n2,1,0.1,5\n";
        let raw = parse(text).unwrap();
        let out = dataset_csv(&raw).unwrap();
        assert_eq!(String::from_utf8(out.clone()).unwrap(), text);
        assert_eq!(read_raw_csv(out.as_slice()).unwrap(), raw);
    }

    #[test]
    fn truth_names() {
        let out = String::from_utf8(truth_csv(1, 2, &[0.5, -1.0]).unwrap()).unwrap();
        assert_eq!(out, "parameter,value\n\"w[1,1]\",0.5\n\"w[1,2]\",-1\n");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
