//! Artifact files shared between pipeline stages.
//!
//! Stage outputs are the only inter-stage contract: every reader here
//! accepts exactly what the corresponding writer produces, and writes are
//! atomic (temp file + rename) so a failed stage never leaves a torn
//! artifact behind. JSON reports carry ISO-8601 dates and fixed-decimal
//! reals — six places for the stage reports, two for the evaluation summary.

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use moodpulse_core::affect::AffectCategory;
use moodpulse_core::changepoint::{ChangePoint, DetectionMethod, Direction};
use moodpulse_core::eval::ClusterAssignment;
use moodpulse_core::ingest::PreprocessedPost;
use moodpulse_core::series::{read_series_csv, DailyAffectSeries};

pub const PREPROCESSED_FILE: &str = "preprocessed.jsonl";
pub const LABELS_FILE: &str = "labels.csv";
pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const CHANGEPOINTS_FILE: &str = "changepoints.json";
pub const REACTIONS_FILE: &str = "reactions.json";
pub const TOPICS_FILE: &str = "topics.json";
pub const EVAL_FILE: &str = "eval.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PLOTS_DIR: &str = "plots";
pub const PLOT_MARKER_FILE: &str = "changepoints.csv";

/// Pretty JSON with every real rendered to a fixed number of decimals.
/// Non-finite values fall back to `null` upstream of the formatter.
struct FixedDecimalFormatter<'a> {
    inner: PrettyFormatter<'a>,
    places: usize,
}

impl FixedDecimalFormatter<'_> {
    fn new(places: usize) -> Self {
        FixedDecimalFormatter {
            inner: PrettyFormatter::new(),
            places,
        }
    }

    fn write_fixed<W: ?Sized + io::Write>(&self, writer: &mut W, value: f64) -> io::Result<()> {
        let mut text = format!("{:.*}", self.places, value);
        // A negative zero would round-trip as "-0.000000"; normalise it.
        if text.starts_with('-') && text[1..].bytes().all(|b| b == b'0' || b == b'.') {
            text.remove(0);
        }
        writer.write_all(text.as_bytes())
    }
}

impl Formatter for FixedDecimalFormatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        self.write_fixed(writer, value)
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_fixed(writer, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object_value(writer)
    }
}

/// Write `name` under `dir` through a temp file so readers never observe a
/// partially written artifact.
pub fn write_atomic(
    dir: &Path,
    name: &str,
    write: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
) -> Result<()> {
    let tmp = dir.join(format!(".tmp-{name}"));
    let file = File::create(&tmp)
        .with_context(|| format!("creating `{}`", tmp.display()))?;
    let mut writer = BufWriter::new(file);
    write(&mut writer)?;
    writer.flush()?;
    drop(writer);
    fs::rename(&tmp, dir.join(name))
        .with_context(|| format!("moving `{}` into place", tmp.display()))?;
    Ok(())
}

/// Serialize `value` as pretty JSON with `places`-decimal reals.
pub fn write_json_atomic<T: Serialize>(
    dir: &Path,
    name: &str,
    places: usize,
    value: &T,
) -> Result<()> {
    write_atomic(dir, name, |writer| {
        let formatter = FixedDecimalFormatter::new(places);
        let mut serializer = serde_json::Serializer::with_formatter(&mut *writer, formatter);
        value
            .serialize(&mut serializer)
            .with_context(|| format!("serializing `{name}`"))?;
        writer.write_all(b"\n")?;
        Ok(())
    })
}

fn open(dir: &Path, name: &str) -> Result<File> {
    File::open(dir.join(name))
        .with_context(|| format!("opening `{}`", dir.join(name).display()))
}

/// Write the preprocessed corpus as one JSON object per line.
pub fn write_preprocessed(dir: &Path, posts: &[PreprocessedPost]) -> Result<()> {
    write_atomic(dir, PREPROCESSED_FILE, |writer| {
        for post in posts {
            serde_json::to_writer(&mut *writer, post)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    })
}

/// Read the preprocessed corpus back; blank lines are ignored.
pub fn read_preprocessed(dir: &Path) -> Result<Vec<PreprocessedPost>> {
    let reader = BufReader::new(open(dir, PREPROCESSED_FILE)?);
    let mut posts = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let post: PreprocessedPost = serde_json::from_str(&line)
            .with_context(|| format!("{PREPROCESSED_FILE} line {}", idx + 1))?;
        posts.push(post);
    }
    Ok(posts)
}

/// Read the daily series; a header-only file (empty corpus) yields no series.
pub fn read_timeseries(dir: &Path) -> Result<Vec<DailyAffectSeries>> {
    let text = fs::read_to_string(dir.join(TIMESERIES_FILE))
        .with_context(|| format!("reading `{}`", dir.join(TIMESERIES_FILE).display()))?;
    let mut probe = csv::Reader::from_reader(text.as_bytes());
    if probe.records().next().is_none() {
        return Ok(Vec::new());
    }
    Ok(read_series_csv(text.as_bytes())?)
}

pub fn write_changepoints(dir: &Path, points: &[ChangePoint]) -> Result<()> {
    write_json_atomic(dir, CHANGEPOINTS_FILE, 6, &points)
}

pub fn read_changepoints(dir: &Path) -> Result<Vec<ChangePoint>> {
    let reader = BufReader::new(open(dir, CHANGEPOINTS_FILE)?);
    serde_json::from_reader(reader).context("parsing changepoints.json")
}

pub fn method_name(method: DetectionMethod) -> &'static str {
    match method {
        DetectionMethod::Cusum => "cusum",
        DetectionMethod::Bocpd => "bocpd",
    }
}

pub fn direction_name(direction: Direction) -> &'static str {
    match direction {
        Direction::Increase => "increase",
        Direction::Decrease => "decrease",
    }
}

/// Significance stars at the conventional 0.05 / 0.01 / 0.001 levels.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// `reactions.json` — one record per change point, short- and long-term.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReactionsReport {
    /// Reminder that the regression's time index is window-relative.
    pub t_indexing: String,
    pub ttest: String,
    pub reactions: Vec<ReactionRecord>,
}

pub const T_INDEXING_NOTE: &str = "t runs 0..10 across the 11-day window; the change date is t = 7, \
     the first day with the after indicator set";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReactionRecord {
    pub category: AffectCategory,
    pub date: NaiveDate,
    pub method: DetectionMethod,
    pub direction: Direction,
    pub confidence: f64,
    /// `null` when the window does not fit inside the series.
    pub short_term: Option<ShortTermRecord>,
    /// `null` when the window does not fit inside the series.
    pub long_term: Option<LongTermRecord>,
    /// Why a window was skipped, when one was.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<String>,
}

/// Per-coefficient values in design order.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CoefficientBlock {
    pub intercept: f64,
    pub t: f64,
    pub after: f64,
    pub t_after: f64,
}

impl From<[f64; 4]> for CoefficientBlock {
    fn from(values: [f64; 4]) -> Self {
        CoefficientBlock {
            intercept: values[0],
            t: values[1],
            after: values[2],
            t_after: values[3],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShortTermRecord {
    pub window_start: NaiveDate,
    pub window_end: NaiveDate,
    pub coefficients: CoefficientBlock,
    pub std_errors: CoefficientBlock,
    pub t_statistics: CoefficientBlock,
    pub p_values: CoefficientBlock,
    pub rss: f64,
    pub dof: f64,
    /// β₃ — the change in daily slope at the break.
    pub slope_change: f64,
    /// `100 · β₃ / mean(window)`; `null` when the window mean is zero.
    pub pct_change: Option<f64>,
    pub p_value: f64,
    pub significance: String,
    /// True when any window day was imputed rather than observed.
    pub window_contains_imputed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LongTermRecord {
    pub baseline_start: NaiveDate,
    pub baseline_end: NaiveDate,
    pub post_start: NaiveDate,
    pub post_end: NaiveDate,
    pub baseline_mean: f64,
    pub post_mean: f64,
    /// `null` when the statistic is infinite (zero variance, unequal means).
    pub t_statistic: Option<f64>,
    pub dof: f64,
    pub p_value: f64,
    /// `100 · (post − baseline) / baseline`; `null` when the baseline is zero.
    pub pct_change: Option<f64>,
    pub significance: String,
    pub window_contains_imputed: bool,
}

/// `topics.json` — explanation record per change point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopicRecord {
    pub category: AffectCategory,
    pub date: NaiveDate,
    pub direction: Direction,
    /// Categories whose flagged posts fed the windows: the category itself
    /// for rises; for dips, the categories that rose alongside.
    pub source_categories: Vec<AffectCategory>,
    pub window_before: [NaiveDate; 2],
    pub window_after: [NaiveDate; 2],
    pub n_docs_before: usize,
    pub n_docs_after: usize,
    pub unexplained: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub before: Vec<TopicEntry>,
    pub after: Vec<TopicEntry>,
    /// Indices into `after` of topics new relative to every before-topic.
    pub emerging: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopicEntry {
    pub size: usize,
    pub keywords: Vec<KeywordEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeywordEntry {
    pub term: String,
    pub weight: f64,
}

/// `eval.json` — corpus-level evaluation summary. Reports both the raw
/// per-category detection count and the grouped event count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_changepoints: usize,
    pub changepoints_by_category: Vec<CategoryCount>,
    pub n_events: usize,
    pub n_verified: usize,
    pub precision: Option<f64>,
    pub derate: Option<f64>,
    pub confidence_mean: Option<f64>,
    pub confidence_std: Option<f64>,
    pub events: Vec<ClusterAssignment>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CategoryCount {
    pub category: AffectCategory,
    pub count: usize,
}

/// `manifest.json` — provenance of a full pipeline run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub versions: Versions,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Versions {
    pub moodpulse: String,
    #[serde(rename = "moodpulse-core")]
    pub moodpulse_core: String,
}

/// Write plot-ready CSV exports: one `date,fraction` file per category plus
/// a change-point marker file. An empty detection list leaves the marker
/// with its header only.
pub fn export_plot_data(
    series: &[DailyAffectSeries],
    points: &[ChangePoint],
    outdir: &Path,
) -> Result<()> {
    fs::create_dir_all(outdir)
        .with_context(|| format!("creating `{}`", outdir.display()))?;
    for s in series {
        write_atomic(outdir, &format!("{}.csv", s.category.name()), |writer| {
            let mut csv_writer = csv::Writer::from_writer(writer);
            csv_writer.write_record(["date", "fraction"])?;
            for i in 0..s.len() {
                csv_writer
                    .write_record([s.date_at(i).to_string(), format!("{}", s.values[i])])?;
            }
            csv_writer.flush()?;
            Ok(())
        })?;
    }
    write_atomic(outdir, PLOT_MARKER_FILE, |writer| {
        let mut csv_writer = csv::Writer::from_writer(writer);
        csv_writer.write_record(["category", "date", "method", "confidence", "direction"])?;
        for point in points {
            csv_writer.write_record([
                point.category.name().to_string(),
                point.date.to_string(),
                method_name(point.method).to_string(),
                format!("{}", point.confidence),
                direction_name(point.direction).to_string(),
            ])?;
        }
        csv_writer.flush()?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use moodpulse_core::affect::AffectCategory;

    fn date(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2021, 3, d).unwrap()
    }

    #[test]
    fn fixed_decimals_render_reals_and_nulls() {
        #[derive(Serialize)]
        struct Sample {
            confidence: f64,
            zero: f64,
            negative_zero: f64,
            infinite: f64,
            missing: Option<f64>,
        }
        let dir = tempfile::tempdir().unwrap();
        write_json_atomic(
            dir.path(),
            "sample.json",
            6,
            &Sample {
                confidence: 0.5,
                zero: 0.0,
                negative_zero: -0.0,
                infinite: f64::INFINITY,
                missing: None,
            },
        )
        .unwrap();
        let text = fs::read_to_string(dir.path().join("sample.json")).unwrap();
        assert!(text.contains("\"confidence\": 0.500000"), "{text}");
        assert!(text.contains("\"zero\": 0.000000"), "{text}");
        assert!(text.contains("\"negative_zero\": 0.000000"), "{text}");
        assert!(text.contains("\"infinite\": null"), "{text}");
        assert!(text.contains("\"missing\": null"), "{text}");
    }

    #[test]
    fn two_decimal_mode_matches_summary_style() {
        let dir = tempfile::tempdir().unwrap();
        write_json_atomic(dir.path(), "two.json", 2, &[0.84_f64, 0.190476]).unwrap();
        let text = fs::read_to_string(dir.path().join("two.json")).unwrap();
        assert!(text.contains("0.84"), "{text}");
        assert!(text.contains("0.19"), "{text}");
        assert!(!text.contains("0.1904"), "{text}");
    }

    #[test]
    fn preprocessed_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let posts = vec![PreprocessedPost {
            id: "a1".to_string(),
            day: date(10),
            tokens: vec!["quiet".to_string(), "morning".to_string()],
            clean_text: "quiet morning".to_string(),
        }];
        write_preprocessed(dir.path(), &posts).unwrap();
        assert_eq!(read_preprocessed(dir.path()).unwrap(), posts);
    }

    #[test]
    fn changepoints_round_trip_with_six_decimals() {
        let dir = tempfile::tempdir().unwrap();
        let points = vec![ChangePoint {
            category: AffectCategory::Anger,
            date: date(12),
            method: DetectionMethod::Cusum,
            confidence: 0.8725,
            direction: Direction::Increase,
        }];
        write_changepoints(dir.path(), &points).unwrap();
        let text = fs::read_to_string(dir.path().join(CHANGEPOINTS_FILE)).unwrap();
        assert!(text.contains("\"confidence\": 0.872500"), "{text}");
        assert!(text.contains("\"category\": \"anger\""), "{text}");
        assert!(text.contains("\"date\": \"2021-03-12\""), "{text}");
        let back = read_changepoints(dir.path()).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].category, AffectCategory::Anger);
        assert_eq!(back[0].confidence, 0.8725);
    }

    #[test]
    fn empty_timeseries_reads_as_no_series() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join(TIMESERIES_FILE),
            "date,category,fraction,count,missing\n",
        )
        .unwrap();
        assert!(read_timeseries(dir.path()).unwrap().is_empty());
    }

    #[test]
    fn plot_export_writes_per_category_files_and_marker() {
        let dir = tempfile::tempdir().unwrap();
        let series = DailyAffectSeries {
            category: AffectCategory::Joy,
            start_date: date(1),
            values: vec![0.25, 1.0 / 3.0],
            counts: vec![4, 3],
            missing: vec![false, false],
        };
        export_plot_data(std::slice::from_ref(&series), &[], dir.path()).unwrap();
        let joy = fs::read_to_string(dir.path().join("joy.csv")).unwrap();
        assert_eq!(joy, "date,fraction\n2021-03-01,0.25\n2021-03-02,0.3333333333333333\n");
        let marker = fs::read_to_string(dir.path().join(PLOT_MARKER_FILE)).unwrap();
        assert_eq!(marker, "category,date,method,confidence,direction\n");

        // Fractions round-trip exactly through the plot CSV.
        let mut reader = csv::Reader::from_reader(joy.as_bytes());
        let values: Vec<f64> = reader
            .records()
            .map(|r| r.unwrap().get(1).unwrap().parse().unwrap())
            .collect();
        assert_eq!(values, series.values);
    }
}
