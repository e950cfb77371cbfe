//! Censored survival records, covariates, and their CSV form.
//!
//! Two record kinds are supported: right-censored `(time, status)` pairs and
//! mixed-case interval-censored `(left, right)` pairs where `right` may be
//! infinite. Row order is significant everywhere: pseudo-observation `l`
//! lines up with covariate row `l`, so nothing here ever sorts.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Censoring class implied by an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CensoringClass {
    /// `L = 0 < R < inf`: the event happened before the first inspection.
    Left,
    /// `0 < L < R < inf`.
    Interval,
    /// `R = inf`.
    Right,
    /// `L = R < inf`.
    Exact,
}

/// Behaviour shared by both record kinds.
pub trait Record: Clone + std::fmt::Debug + Send + Sync {
    /// CSV header names of the two outcome columns.
    const COLUMNS: [&'static str; 2];

    fn class(&self) -> CensoringClass;

    /// Parse the two outcome cells. `row` is the 1-based data row for error messages.
    fn parse(first: &str, second: &str, row: usize) -> Result<Self>;

    fn to_cells(&self) -> [String; 2];
}

/// One right-censored observation `T = min(T*, C)` with `status = I(T* <= C)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RightCensoredRecord {
    pub time: f64,
    pub event: bool,
}

impl RightCensoredRecord {
    pub fn new(time: f64, event: bool) -> Result<Self> {
        if !time.is_finite() || time < 0.0 {
            return Err(Error::MalformedInterval {
                row: 0,
                message: format!("time {time} must be finite and nonnegative"),
            });
        }
        Ok(Self { time, event })
    }

    /// The same observation in interval form: `(T, T)` for events, `(T, inf)` otherwise.
    pub fn to_interval(&self) -> IntervalRecord {
        if self.event {
            IntervalRecord {
                left: self.time,
                right: self.time,
            }
        } else {
            IntervalRecord {
                left: self.time,
                right: f64::INFINITY,
            }
        }
    }
}

impl Record for RightCensoredRecord {
    const COLUMNS: [&'static str; 2] = ["time", "status"];

    fn class(&self) -> CensoringClass {
        if self.event {
            CensoringClass::Exact
        } else {
            CensoringClass::Right
        }
    }

    fn parse(first: &str, second: &str, row: usize) -> Result<Self> {
        let time = parse_real(first, row, "time")?;
        if !time.is_finite() || time < 0.0 {
            return Err(Error::MalformedInterval {
                row,
                message: format!("time {time} must be finite and nonnegative"),
            });
        }
        let event = match second.trim() {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::Parse {
                    row,
                    message: format!("status must be 0 or 1, got {other:?}"),
                })
            }
        };
        Ok(Self { time, event })
    }

    fn to_cells(&self) -> [String; 2] {
        [
            format!("{}", self.time),
            if self.event { "1" } else { "0" }.to_string(),
        ]
    }
}

/// One mixed-case interval-censored observation: the event time lies in `[left, right]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalRecord {
    pub left: f64,
    pub right: f64,
}

impl IntervalRecord {
    pub fn new(left: f64, right: f64) -> Result<Self> {
        validate_interval(left, right, 0)?;
        Ok(Self { left, right })
    }

    pub fn exact(time: f64) -> Result<Self> {
        Self::new(time, time)
    }

    pub fn right_censored(left: f64) -> Result<Self> {
        Self::new(left, f64::INFINITY)
    }

    pub fn is_exact(&self) -> bool {
        self.left == self.right
    }

    pub fn is_right_censored(&self) -> bool {
        self.right == f64::INFINITY
    }
}

fn validate_interval(left: f64, right: f64, row: usize) -> Result<()> {
    if left.is_nan() || right.is_nan() {
        return Err(Error::MalformedInterval {
            row,
            message: "NaN endpoint".into(),
        });
    }
    if !left.is_finite() || left < 0.0 {
        return Err(Error::MalformedInterval {
            row,
            message: format!("left endpoint {left} must be finite and nonnegative"),
        });
    }
    if right < left {
        return Err(Error::MalformedInterval {
            row,
            message: format!("right endpoint {right} is smaller than left endpoint {left}"),
        });
    }
    Ok(())
}

impl Record for IntervalRecord {
    const COLUMNS: [&'static str; 2] = ["left", "right"];

    fn class(&self) -> CensoringClass {
        if self.right == f64::INFINITY {
            CensoringClass::Right
        } else if self.left == self.right {
            CensoringClass::Exact
        } else if self.left == 0.0 {
            CensoringClass::Left
        } else {
            CensoringClass::Interval
        }
    }

    fn parse(first: &str, second: &str, row: usize) -> Result<Self> {
        let left = parse_real(first, row, "left")?;
        let right = if second.trim().is_empty() {
            f64::INFINITY
        } else {
            parse_real(second, row, "right")?
        };
        if right == f64::NEG_INFINITY {
            return Err(Error::MalformedInterval {
                row,
                message: "right endpoint cannot be -inf".into(),
            });
        }
        validate_interval(left, right, row)?;
        if left == 0.0 && right == 0.0 {
            log::warn!("row {row}: exact observation at time 0");
        }
        Ok(Self { left, right })
    }

    fn to_cells(&self) -> [String; 2] {
        [format!("{}", self.left), format!("{}", self.right)]
    }
}

fn parse_real(cell: &str, row: usize, column: &str) -> Result<f64> {
    let trimmed = cell.trim();
    trimmed
        .parse::<f64>()
        .ok()
        .filter(|v| !v.is_nan())
        .ok_or_else(|| Error::Parse {
            row,
            message: format!("column {column}: cannot parse {trimmed:?} as a number"),
        })
}

/// Dense covariate matrix with column names, one row per record.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariates {
    pub names: Vec<String>,
    pub values: DMatrix<f64>,
}

impl Covariates {
    pub fn new(names: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if names.len() != values.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} covariate columns",
                names.len(),
                values.ncols()
            )));
        }
        Ok(Self { names, values })
    }

    /// Design matrix with a leading column of ones named `(Intercept)`.
    pub fn with_intercept(&self) -> Covariates {
        let n = self.values.nrows();
        let mut values = DMatrix::zeros(n, self.values.ncols() + 1);
        values.column_mut(0).fill(1.0);
        values
            .columns_mut(1, self.values.ncols())
            .copy_from(&self.values);
        let mut names = vec!["(Intercept)".to_string()];
        names.extend(self.names.iter().cloned());
        Covariates { names, values }
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }
}

/// An ordered sample of one record kind with optional covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<R: Record> {
    pub records: Vec<R>,
    pub covariates: Option<Covariates>,
}

pub type RightCensoredDataset = Dataset<RightCensoredRecord>;
pub type IntervalDataset = Dataset<IntervalRecord>;

impl<R: Record> Dataset<R> {
    pub fn new(records: Vec<R>) -> Self {
        Self {
            records,
            covariates: None,
        }
    }

    pub fn with_covariates(records: Vec<R>, covariates: Covariates) -> Result<Self> {
        if covariates.nrows() != records.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} covariate rows for {} records",
                covariates.nrows(),
                records.len()
            )));
        }
        Ok(Self {
            records,
            covariates: Some(covariates),
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Class counts in the order (left, interval, right, exact).
    pub fn class_counts(&self) -> ClassCounts {
        let mut counts = ClassCounts::default();
        for r in &self.records {
            match r.class() {
                CensoringClass::Left => counts.left += 1,
                CensoringClass::Interval => counts.interval += 1,
                CensoringClass::Right => counts.right += 1,
                CensoringClass::Exact => counts.exact += 1,
            }
        }
        counts
    }

    /// Write the dataset back as CSV with the same column layout it is read from.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = R::COLUMNS.iter().map(|s| s.to_string()).collect();
        if let Some(cov) = &self.covariates {
            header.extend(cov.names.iter().cloned());
        }
        w.write_record(&header).map_err(csv_err)?;
        for (i, r) in self.records.iter().enumerate() {
            let mut row: Vec<String> = r.to_cells().to_vec();
            if let Some(cov) = &self.covariates {
                row.extend(cov.values.row(i).iter().map(|v| format!("{v}")));
            }
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.position() {
        Some(pos) => Error::Parse {
            row: pos.record() as usize,
            message: e.to_string(),
        },
        None => Error::Io(e.to_string()),
    }
}

/// Number of records in each censoring class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub left: usize,
    pub interval: usize,
    pub right: usize,
    pub exact: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.left + self.interval + self.right + self.exact
    }
}

/// Class proportions; they sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CensoringSummary {
    pub left: f64,
    pub interval: f64,
    pub right: f64,
    pub exact: f64,
}

pub fn censoring_summary<R: Record>(data: &Dataset<R>) -> Result<CensoringSummary> {
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let c = data.class_counts();
    let n = c.total() as f64;
    Ok(CensoringSummary {
        left: c.left as f64 / n,
        interval: c.interval as f64 / n,
        right: c.right as f64 / n,
        exact: c.exact as f64 / n,
    })
}

fn load_dataset<R: Record, Rd: Read>(source: Rd) -> Result<Dataset<R>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = reader.headers().map_err(csv_err)?.clone();
    let position = |name: &str| {
        header
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Parse {
                row: 0,
                message: format!("missing required column {name:?}"),
            })
    };
    let first = position(R::COLUMNS[0])?;
    let second = position(R::COLUMNS[1])?;
    let cov_cols: Vec<usize> = (0..header.len())
        .filter(|&j| j != first && j != second)
        .collect();
    let names: Vec<String> = cov_cols.iter().map(|&j| header[j].to_string()).collect();

    let mut records = Vec::new();
    let mut cov_values: Vec<f64> = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(csv_err)?;
        if row.len() != header.len() {
            return Err(Error::Parse {
                row: row_no,
                message: format!("expected {} fields, found {}", header.len(), row.len()),
            });
        }
        records.push(R::parse(&row[first], &row[second], row_no)?);
        for &j in &cov_cols {
            let v = parse_real(&row[j], row_no, &header[j])?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: row_no,
                    message: format!("column {}: covariates must be finite", &header[j]),
                });
            }
            cov_values.push(v);
        }
    }
    if cov_cols.is_empty() {
        return Ok(Dataset::new(records));
    }
    let values = DMatrix::from_row_slice(records.len(), cov_cols.len(), &cov_values);
    Dataset::with_covariates(records, Covariates::new(names, values)?)
}

/// Read `left,right[,covariate...]` CSV. `right` may be `inf`, `+inf`, `Inf` or empty.
pub fn load_interval_dataset<Rd: Read>(source: Rd) -> Result<IntervalDataset> {
    let data = load_dataset::<IntervalRecord, _>(source)?;
    let c = data.class_counts();
    log::info!(
        "loaded {} interval records: {} left, {} interval, {} right, {} exact",
        data.len(),
        c.left,
        c.interval,
        c.right,
        c.exact
    );
    Ok(data)
}

/// Read `time,status[,covariate...]` CSV with `status` in {0, 1}.
pub fn load_right_censored_dataset<Rd: Read>(source: Rd) -> Result<RightCensoredDataset> {
    load_dataset(source)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ic(s: &str) -> Result<IntervalDataset> {
        load_interval_dataset(s.as_bytes())
    }

    #[test]
    fn classifies_each_row() {
        let d = ic("left,right\n1.0,2.0\n3.0,inf\n2.0,2.0\n0,1.5\n").unwrap();
        let classes: Vec<_> = d.records.iter().map(|r| r.class()).collect();
        assert_eq!(
            classes,
            vec![
                CensoringClass::Interval,
                CensoringClass::Right,
                CensoringClass::Exact,
                CensoringClass::Left
            ]
        );
        assert_eq!(d.records[1].right, f64::INFINITY);
        assert_eq!(
            d.class_counts(),
            ClassCounts {
                left: 1,
                interval: 1,
                right: 1,
                exact: 1
            }
        );
    }

    #[test]
    fn infinity_spellings() {
        let d = ic("left,right\n1,inf\n1,+inf\n1,Inf\n1,\n").unwrap();
        assert!(d.records.iter().all(|r| r.right == f64::INFINITY));
    }

    #[test]
    fn interval_errors() {
        assert!(matches!(
            ic("left,right\n2,1\n"),
            Err(Error::MalformedInterval { row: 1, .. })
        ));
        assert!(matches!(
            ic("left,right\n1,2\n-1,2\n"),
            Err(Error::MalformedInterval { row: 2, .. })
        ));
        assert!(matches!(
            ic("left,right\n1,2\n1,abc\n"),
            Err(Error::Parse { row: 2, .. })
        ));
    }

    #[test]
    fn right_censored_rows() {
        let d = load_right_censored_dataset("time,status\n5.2,1\n5.2,0\n".as_bytes()).unwrap();
        assert_eq!(
            d.records[0],
            RightCensoredRecord {
                time: 5.2,
                event: true
            }
        );
        assert_eq!(
            d.records[1],
            RightCensoredRecord {
                time: 5.2,
                event: false
            }
        );
        assert!(matches!(
            load_right_censored_dataset("time,status\n5.2,2\n".as_bytes()),
            Err(Error::Parse { row: 1, .. })
        ));
        assert!(matches!(
            load_right_censored_dataset("time,status\n-1,1\n".as_bytes()),
            Err(Error::MalformedInterval { row: 1, .. })
        ));
    }

    #[test]
    fn covariates_are_kept_in_order() {
        let d = ic("x,left,right,z\n1,0,1,10\n2,1,2,20\n").unwrap();
        let cov = d.covariates.unwrap();
        assert_eq!(cov.names, vec!["x", "z"]);
        assert_eq!(cov.values[(1, 0)], 2.0);
        assert_eq!(cov.values[(1, 1)], 20.0);
        let design = cov.with_intercept();
        assert_eq!(design.names[0], "(Intercept)");
        assert_eq!(design.values[(0, 0)], 1.0);
        assert_eq!(design.values[(0, 2)], 10.0);
    }

    #[test]
    fn summary_of_exact_data() {
        let d = ic("left,right\n1,1\n2,2\n").unwrap();
        let s = censoring_summary(&d).unwrap();
        assert_eq!((s.left, s.interval, s.right, s.exact), (0.0, 0.0, 0.0, 1.0));
        assert_eq!(
            censoring_summary(&IntervalDataset::new(vec![])),
            Err(Error::EmptyInput)
        );
    }

    #[test]
    fn exact_at_zero_is_accepted() {
        let d = ic("left,right\n0,0\n").unwrap();
        assert_eq!(d.records[0].class(), CensoringClass::Exact);
    }

    fn arb_interval() -> impl Strategy<Value = IntervalRecord> {
        prop_oneof![
            (0.0..10.0f64).prop_map(|l| IntervalRecord { left: l, right: l }),
            (0.0..10.0f64).prop_map(|l| IntervalRecord {
                left: l,
                right: f64::INFINITY
            }),
            (0.0..10.0f64, 1e-6..5.0f64).prop_map(|(l, w)| IntervalRecord {
                left: l,
                right: l + w
            }),
            (1e-6..5.0f64).prop_map(|r| IntervalRecord {
                left: 0.0,
                right: r
            }),
        ]
    }

    proptest! {
        #[test]
        fn csv_round_trip(
            records in prop::collection::vec(arb_interval(), 1..30),
            seed in -100.0..100.0f64,
        ) {
            let n = records.len();
            let values = DMatrix::from_fn(n, 2, |i, j| seed * (i as f64 + 1.0) / (j as f64 + 3.0));
            let cov = Covariates::new(vec!["a".into(), "b".into()], values).unwrap();
            let data = Dataset::with_covariates(records, cov).unwrap();
            let mut buf = Vec::new();
            data.write_csv(&mut buf).unwrap();
            let back = load_interval_dataset(buf.as_slice()).unwrap();
            prop_assert_eq!(&back, &data);
            let classes: Vec<_> = back.records.iter().map(|r| r.class()).collect();
            let orig: Vec<_> = data.records.iter().map(|r| r.class()).collect();
            prop_assert_eq!(classes, orig);
        }

        #[test]
        fn classification_is_total(l in 0.0..10.0f64, w in prop_oneof![Just(0.0), 0.0..5.0f64, Just(f64::INFINITY)]) {
            let r = IntervalRecord::new(l, l + w).unwrap();
            let class = r.class();
            let expected = if w == f64::INFINITY {
                CensoringClass::Right
            } else if w == 0.0 {
                CensoringClass::Exact
            } else if l == 0.0 {
                CensoringClass::Left
            } else {
                CensoringClass::Interval
            };
            prop_assert_eq!(class, expected);
        }
    }
}
