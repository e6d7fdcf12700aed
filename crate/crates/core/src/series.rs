//! Daily affect time series: building per-category daily fractions from a
//! labeled corpus, filling gaps, and the CSV interchange format.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::affect::{AffectCategory, LabelVector, CATEGORY_COUNT};
use crate::error::{Error, Result};

/// One category's daily fraction series over a contiguous date range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyAffectSeries {
    pub category: AffectCategory,
    /// First day covered; day `i` is `start_date + i`.
    pub start_date: NaiveDate,
    /// Fraction of the day's posts flagged with the category, in [0, 1]
    /// wherever `missing[i]` is false.
    pub values: Vec<f64>,
    /// Total posts observed each day (all categories share these totals).
    pub counts: Vec<usize>,
    /// True where the day had no posts at all.
    pub missing: Vec<bool>,
}

impl DailyAffectSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Calendar date of index `i`.
    pub fn date_at(&self, i: usize) -> NaiveDate {
        self.start_date + chrono::Duration::days(i as i64)
    }

    /// Last day covered.
    pub fn end_date(&self) -> NaiveDate {
        self.date_at(self.len().saturating_sub(1))
    }

    /// Index of `date` if it falls inside the covered range.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start_date).num_days();
        if offset < 0 || offset as usize >= self.len() {
            None
        } else {
            Some(offset as usize)
        }
    }

    fn validate_shape(&self) -> Result<()> {
        if self.values.len() != self.counts.len() || self.values.len() != self.missing.len() {
            return Err(Error::invalid(
                "series values, counts, and missing flags must have equal length",
            ));
        }
        if self.values.is_empty() {
            return Err(Error::invalid("series must cover at least one day"));
        }
        Ok(())
    }
}

/// Build the 21 per-category daily fraction series from day-bucketed,
/// labeled posts.
///
/// The series span the full corpus date range; days with no posts are
/// flagged missing. The denominator for every category is the total number
/// of posts that day.
pub fn build_daily_fractions(
    posts: &[(NaiveDate, LabelVector)],
) -> Result<[DailyAffectSeries; CATEGORY_COUNT]> {
    if posts.is_empty() {
        return Err(Error::invalid(
            "cannot build daily series from an empty corpus",
        ));
    }
    let start = posts.iter().map(|(d, _)| *d).min().unwrap();
    let end = posts.iter().map(|(d, _)| *d).max().unwrap();
    let n_days = (end - start).num_days() as usize + 1;

    let mut totals = vec![0usize; n_days];
    let mut flagged = vec![[0usize; CATEGORY_COUNT]; n_days];
    for (day, labels) in posts {
        let idx = (*day - start).num_days() as usize;
        totals[idx] += 1;
        for category in labels.active() {
            flagged[idx][category.index()] += 1;
        }
    }

    let missing: Vec<bool> = totals.iter().map(|t| *t == 0).collect();
    Ok(AffectCategory::ALL.map(|category| {
        let values = (0..n_days)
            .map(|i| {
                if totals[i] == 0 {
                    0.0
                } else {
                    flagged[i][category.index()] as f64 / totals[i] as f64
                }
            })
            .collect();
        DailyAffectSeries {
            category,
            start_date: start,
            values,
            counts: totals.clone(),
            missing: missing.clone(),
        }
    }))
}

/// Fill missing days by linear interpolation between the nearest observed
/// neighbours; leading/trailing gaps copy the nearest observed value.
///
/// Missing flags are preserved so downstream consumers can tell imputed
/// values from observed ones. Requires at least two observed days.
pub fn impute_missing(series: &DailyAffectSeries) -> Result<DailyAffectSeries> {
    series.validate_shape()?;
    let observed: Vec<usize> = (0..series.len()).filter(|i| !series.missing[*i]).collect();
    if observed.len() < 2 {
        return Err(Error::invalid(format!(
            "category {}: need at least 2 observed days to impute, found {}",
            series.category,
            observed.len()
        )));
    }

    let mut values = series.values.clone();
    let (first, last) = (observed[0], *observed.last().unwrap());
    values[..first].fill(series.values[first]);
    values[last + 1..].fill(series.values[last]);
    for pair in observed.windows(2) {
        let (l, r) = (pair[0], pair[1]);
        if r - l > 1 {
            let (vl, vr) = (series.values[l], series.values[r]);
            for (offset, value) in values[l + 1..r].iter_mut().enumerate() {
                let t = (offset + 1) as f64 / (r - l) as f64;
                *value = vl + (vr - vl) * t;
            }
        }
    }

    Ok(DailyAffectSeries {
        values,
        ..series.clone()
    })
}

/// Convenience: impute all 21 series.
pub fn impute_all(
    series: &[DailyAffectSeries; CATEGORY_COUNT],
) -> Result<[DailyAffectSeries; CATEGORY_COUNT]> {
    let mut out = Vec::with_capacity(CATEGORY_COUNT);
    for s in series {
        out.push(impute_missing(s)?);
    }
    Ok(out.try_into().expect("exactly 21 series"))
}

/// Write series as CSV (`date,category,fraction,count,missing`), grouped by
/// category in canonical order with ascending dates.
///
/// Fractions use shortest round-trip formatting, so re-reading reproduces
/// the in-memory values exactly.
pub fn write_series_csv<W: Write>(output: W, series: &[DailyAffectSeries]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(output);
    writer.write_record(["date", "category", "fraction", "count", "missing"])?;
    let mut ordered: Vec<&DailyAffectSeries> = series.iter().collect();
    ordered.sort_by_key(|s| s.category.index());
    for s in ordered {
        s.validate_shape()?;
        for i in 0..s.len() {
            writer.write_record([
                s.date_at(i).to_string(),
                s.category.name().to_string(),
                format!("{}", s.values[i]),
                s.counts[i].to_string(),
                s.missing[i].to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Read series CSV written by [`write_series_csv`] (or produced externally
/// in the same shape). Categories may be any subset of the 21; each
/// category's days must be contiguous and ascending.
pub fn read_series_csv<R: Read>(input: R) -> Result<Vec<DailyAffectSeries>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = reader.headers()?.clone();
    let expected = ["date", "category", "fraction", "count", "missing"];
    let positions: Vec<usize> = expected
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| Error::invalid(format!("series csv missing `{name}` column")))
        })
        .collect::<Result<_>>()?;

    struct Partial {
        dates: Vec<NaiveDate>,
        values: Vec<f64>,
        counts: Vec<usize>,
        missing: Vec<bool>,
    }
    let mut partials: BTreeMap<usize, Partial> = BTreeMap::new();

    for result in reader.records() {
        let record = result?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| record.get(positions[i]).map(str::trim).unwrap_or("");
        let date: NaiveDate = field(0)
            .parse()
            .map_err(|e| Error::malformed(line, format!("bad date: {e}")))?;
        let category = AffectCategory::parse(field(1))
            .map_err(|_| Error::malformed(line, format!("bad category `{}`", field(1))))?;
        let fraction: f64 = field(2)
            .parse()
            .map_err(|e| Error::malformed(line, format!("bad fraction: {e}")))?;
        let count: usize = field(3)
            .parse()
            .map_err(|e| Error::malformed(line, format!("bad count: {e}")))?;
        let missing: bool = field(4)
            .parse()
            .map_err(|e| Error::malformed(line, format!("bad missing flag: {e}")))?;
        if !missing && !(0.0..=1.0).contains(&fraction) {
            return Err(Error::malformed(
                line,
                format!("fraction {fraction} outside [0, 1]"),
            ));
        }
        let partial = partials.entry(category.index()).or_insert_with(|| Partial {
            dates: Vec::new(),
            values: Vec::new(),
            counts: Vec::new(),
            missing: Vec::new(),
        });
        partial.dates.push(date);
        partial.values.push(fraction);
        partial.counts.push(count);
        partial.missing.push(missing);
    }

    let mut out = Vec::new();
    for (index, partial) in partials {
        let category = AffectCategory::ALL[index];
        for pair in partial.dates.windows(2) {
            if (pair[1] - pair[0]).num_days() != 1 {
                return Err(Error::invalid(format!(
                    "category {category}: series days must be contiguous and ascending \
                     ({} then {})",
                    pair[0], pair[1]
                )));
            }
        }
        let start_date = *partial
            .dates
            .first()
            .ok_or_else(|| Error::invalid("empty series"))?;
        out.push(DailyAffectSeries {
            category,
            start_date,
            values: partial.values,
            counts: partial.counts,
            missing: partial.missing,
        });
    }
    if out.is_empty() {
        return Err(Error::invalid("series csv contains no data rows"));
    }
    Ok(out)
}
