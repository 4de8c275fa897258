//! Daily catchment records, monthly aggregation and period partitioning.

use std::ops::Range;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One day of catchment forcing and response, all in mm/day.
/// `None` marks a missing observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyRecord {
    pub date: NaiveDate,
    pub precipitation: Option<f64>,
    pub potential_evaporation: Option<f64>,
    pub streamflow: Option<f64>,
}

/// Calendar month used as the origin of a monthly series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Self {
        debug_assert!((1..=12).contains(&month));
        YearMonth { year, month }
    }

    /// The month `offset` months after this one.
    pub fn plus(self, offset: usize) -> Self {
        let idx = self.year as i64 * 12 + (self.month as i64 - 1) + offset as i64;
        YearMonth {
            year: idx.div_euclid(12) as i32,
            month: (idx.rem_euclid(12) + 1) as u32,
        }
    }

    pub fn first_day(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("valid month")
    }

    pub fn days(self) -> u32 {
        let next = self.plus(1).first_day();
        (next - self.first_day()).num_days() as u32
    }
}

/// Inclusive range of calendar years.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct YearSpan {
    pub first: i32,
    pub last: i32,
}

impl YearSpan {
    pub fn new(first: i32, last: i32) -> Result<Self> {
        if last < first {
            return Err(Error::invalid(format!("empty year span {first}..={last}")));
        }
        Ok(YearSpan { first, last })
    }

    pub fn years(&self) -> usize {
        (self.last - self.first + 1) as usize
    }
}

/// Aligned monthly totals (mm/month) of precipitation, potential evaporation
/// and streamflow.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlySeries {
    pub origin: YearMonth,
    pub precipitation: Vec<f64>,
    pub potential_evaporation: Vec<f64>,
    pub streamflow: Vec<f64>,
}

impl MonthlySeries {
    pub fn new(
        origin: YearMonth,
        precipitation: Vec<f64>,
        potential_evaporation: Vec<f64>,
        streamflow: Vec<f64>,
    ) -> Result<Self> {
        let n = precipitation.len();
        if potential_evaporation.len() != n || streamflow.len() != n {
            return Err(Error::invalid(format!(
                "monthly variables differ in length: {} / {} / {}",
                n,
                potential_evaporation.len(),
                streamflow.len()
            )));
        }
        Ok(MonthlySeries {
            origin,
            precipitation,
            potential_evaporation,
            streamflow,
        })
    }

    pub fn len(&self) -> usize {
        self.precipitation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.precipitation.is_empty()
    }

    /// Keeps only the first `n` months.
    pub fn truncate(&mut self, n: usize) {
        self.precipitation.truncate(n);
        self.potential_evaporation.truncate(n);
        self.streamflow.truncate(n);
    }
}

/// Reads a catchment CSV with header `date,precip_mm,pet_mm,flow_mm`.
/// Empty fields are missing values.
pub fn read_daily_csv(path: &Path) -> Result<Vec<DailyRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_daily_csv(file, path)
}

pub(crate) fn parse_daily_csv<R: std::io::Read>(reader: R, path: &Path) -> Result<Vec<DailyRecord>> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["date", "precip_mm", "pet_mm", "flow_mm"];
    if headers.len() != 4 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(parse_err(format!(
            "expected header `{}`, found `{}`",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let date = NaiveDate::parse_from_str(&row[0], "%Y-%m-%d")
            .map_err(|e| parse_err(format!("row {}: bad date `{}`: {e}", line + 2, &row[0])))?;
        let field = |i: usize| -> Result<Option<f64>> {
            let s = &row[i];
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<f64>()
                .map(Some)
                .map_err(|e| parse_err(format!("row {}: bad number `{s}`: {e}", line + 2)))
        };
        out.push(DailyRecord {
            date,
            precipitation: field(1)?,
            potential_evaporation: field(2)?,
            streamflow: field(3)?,
        });
    }
    check_daily_order(&out)?;
    Ok(out)
}

/// Writes daily records in the catchment CSV layout.
pub fn write_daily_csv(path: &Path, records: &[DailyRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["date", "precip_mm", "pet_mm", "flow_mm"])?;
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        w.write_record([
            r.date.format("%Y-%m-%d").to_string(),
            fmt(r.precipitation),
            fmt(r.potential_evaporation),
            fmt(r.streamflow),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn check_daily_order(daily: &[DailyRecord]) -> Result<()> {
    for w in daily.windows(2) {
        if w[1].date <= w[0].date {
            return Err(Error::invalid(format!(
                "dates not strictly increasing at {}",
                w[1].date
            )));
        }
        if (w[1].date - w[0].date).num_days() != 1 {
            return Err(Error::invalid(format!(
                "gap in daily record between {} and {}",
                w[0].date, w[1].date
            )));
        }
    }
    Ok(())
}

/// The widest span of whole calendar years present in a daily record.
pub fn full_year_span(daily: &[DailyRecord]) -> Result<YearSpan> {
    let (first, last) = match (daily.first(), daily.last()) {
        (Some(f), Some(l)) => (f.date, l.date),
        _ => return Err(Error::IncompleteSpan("empty daily record".into())),
    };
    let first_year = if first.ordinal() == 1 {
        first.year()
    } else {
        first.year() + 1
    };
    let last_year = if last.month() == 12 && last.day() == 31 {
        last.year()
    } else {
        last.year() - 1
    };
    YearSpan::new(first_year, last_year)
        .map_err(|_| Error::IncompleteSpan(format!("no complete calendar year in {first}..{last}")))
}

/// Sums daily values into calendar-month totals over `span`.
///
/// Every day inside the span must be present with all three variables
/// non-missing and non-negative; the first offending date is reported.
pub fn aggregate_daily_to_monthly(daily: &[DailyRecord], span: YearSpan) -> Result<MonthlySeries> {
    check_daily_order(daily)?;
    let start = NaiveDate::from_ymd_opt(span.first, 1, 1).expect("valid date");
    let end = NaiveDate::from_ymd_opt(span.last, 12, 31).expect("valid date");
    let (Some(head), Some(tail)) = (daily.first(), daily.last()) else {
        return Err(Error::IncompleteSpan(format!("{start}..={end}")));
    };
    if head.date > start || tail.date < end {
        return Err(Error::IncompleteSpan(format!(
            "{start}..={end} (record spans {}..={})",
            head.date, tail.date
        )));
    }
    let offset = (start - head.date).num_days() as usize;
    let n_days = (end - start).num_days() as usize + 1;
    let days = &daily[offset..offset + n_days];

    let n_months = 12 * span.years();
    let mut precipitation = Vec::with_capacity(n_months);
    let mut pet = Vec::with_capacity(n_months);
    let mut flow = Vec::with_capacity(n_months);
    let origin = YearMonth::new(span.first, 1);

    let mut cursor = 0;
    for m in 0..n_months {
        let ym = origin.plus(m);
        let len = ym.days() as usize;
        let month = &days[cursor..cursor + len];
        cursor += len;
        let (mut p, mut e, mut q) = (0.0, 0.0, 0.0);
        for rec in month {
            p += checked(rec.date, "precipitation", rec.precipitation)?;
            e += checked(rec.date, "potential_evaporation", rec.potential_evaporation)?;
            q += checked(rec.date, "streamflow", rec.streamflow)?;
        }
        precipitation.push(p);
        pet.push(e);
        flow.push(q);
    }
    MonthlySeries::new(origin, precipitation, pet, flow)
}

fn checked(date: NaiveDate, variable: &'static str, value: Option<f64>) -> Result<f64> {
    match value {
        None => Err(Error::MissingValue { date, variable }),
        Some(v) if v.is_nan() => Err(Error::MissingValue { date, variable }),
        Some(v) if v < 0.0 => Err(Error::NegativeValue {
            date,
            variable,
            value: v,
        }),
        Some(v) if !v.is_finite() => Err(Error::NonFinite(variable)),
        Some(v) => Ok(v),
    }
}

/// Warm-up, calibration, error-training and testing periods as 0-based
/// half-open index ranges over the monthly series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodPartition {
    pub warmup: Range<usize>,
    pub calibration: Range<usize>,
    pub training: Range<usize>,
    pub testing: Range<usize>,
}

impl PeriodPartition {
    pub fn n_total(&self) -> usize {
        self.testing.end
    }

    /// Months after warm-up (calibration + training + testing).
    pub fn n_simulated(&self) -> usize {
        self.testing.end - self.warmup.end
    }

    pub fn n_cal(&self) -> usize {
        self.calibration.len()
    }

    pub fn n_train(&self) -> usize {
        self.training.len()
    }

    pub fn n_test(&self) -> usize {
        self.testing.len()
    }

    /// `(first, last)` 1-based inclusive bounds, `None` for an empty range.
    pub fn one_based(range: &Range<usize>) -> Option<(usize, usize)> {
        (!range.is_empty()).then(|| (range.start + 1, range.end))
    }
}

/// Splits `n_total` months into warm-up, calibration and training blocks of
/// the given sizes; testing takes the remainder.
pub fn partition(n_total: usize, warmup: usize, cal: usize, train: usize) -> Result<PeriodPartition> {
    if cal == 0 || train == 0 {
        return Err(Error::invalid(format!(
            "calibration and training lengths must be positive (got {cal}, {train})"
        )));
    }
    let used = warmup + cal + train;
    if used >= n_total {
        return Err(Error::invalid(format!(
            "no testing months left: {warmup} + {cal} + {train} >= {n_total}"
        )));
    }
    Ok(PeriodPartition {
        warmup: 0..warmup,
        calibration: warmup..warmup + cal,
        training: warmup + cal..used,
        testing: used..n_total,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct VariableDefects {
    pub zeros: usize,
    pub negative: Vec<usize>,
    pub non_finite: Vec<usize>,
}

impl VariableDefects {
    fn scan(values: &[f64]) -> Self {
        let mut d = VariableDefects::default();
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                d.non_finite.push(i);
            } else if v < 0.0 {
                d.negative.push(i);
            } else if v == 0.0 {
                d.zeros += 1;
            }
        }
        d
    }

    fn is_clean(&self) -> bool {
        self.negative.is_empty() && self.non_finite.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub months: usize,
    pub precipitation: VariableDefects,
    pub potential_evaporation: VariableDefects,
    pub streamflow: VariableDefects,
    pub accepted: bool,
}

/// Counts zeros, negatives and non-finite values per variable. The series is
/// accepted iff it has no negatives and no non-finite values.
pub fn validate_series(series: &MonthlySeries) -> ValidationReport {
    let precipitation = VariableDefects::scan(&series.precipitation);
    let potential_evaporation = VariableDefects::scan(&series.potential_evaporation);
    let streamflow = VariableDefects::scan(&series.streamflow);
    let accepted = precipitation.is_clean() && potential_evaporation.is_clean() && streamflow.is_clean();
    ValidationReport {
        months: series.len(),
        precipitation,
        potential_evaporation,
        streamflow,
        accepted,
    }
}
