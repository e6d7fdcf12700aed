//! The seven pipeline stages plus the plot-data report.
//!
//! Each stage reads only the configured input paths and the previous stage's
//! artifact in `dir`, and writes exactly one artifact back — files are the
//! only inter-stage contract, so any stage can rerun on prior outputs.
//! Per-category and per-change-point work inside detect, measure, and
//! explain fans out on the rayon pool and joins before the single write;
//! every task derives its seed from the config seed, so scheduling never
//! affects results.

use std::collections::{BTreeSet, HashMap};
use std::io::BufReader;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use chrono::{Datelike, Duration, NaiveDate};
use rayon::prelude::*;

use moodpulse_core::affect::{AffectCategory, LabelVector, CATEGORY_COUNT};
use moodpulse_core::changepoint::{detect_series, ChangePoint, Direction};
use moodpulse_core::error::Error as CoreError;
use moodpulse_core::eval::{evaluate, group_events, load_verdicts};
use moodpulse_core::ingest::{parse_posts, preprocess_corpus};
use moodpulse_core::label::{
    align_labels, label_with_ddr, label_with_lexicon, load_labels, write_labels, DdrConfig,
    Lexicon, WordVectorTable,
};
use moodpulse_core::reaction::{long_term_change, short_term_change};
use moodpulse_core::series::{build_daily_fractions, impute_all, write_series_csv};
use moodpulse_core::stats::derive_seed;
use moodpulse_core::topic::emerging_topics;

use crate::artifacts::{
    export_plot_data, read_changepoints, read_preprocessed, read_timeseries, significance_stars,
    write_atomic, write_changepoints, write_json_atomic, write_preprocessed, CategoryCount,
    EvalReport, KeywordEntry, LongTermRecord, ReactionRecord, ReactionsReport, ShortTermRecord,
    TopicEntry, TopicRecord, EVAL_FILE, LABELS_FILE, PLOTS_DIR, REACTIONS_FILE, TIMESERIES_FILE,
    TOPICS_FILE, T_INDEXING_NOTE,
};
use crate::config::{LabelerSection, PipelineConfig};

/// Seed lanes 0..20 belong to the detectors (one per category); topic
/// extraction takes the next block so the two never collide.
const TOPIC_SEED_LANE_BASE: u64 = CATEGORY_COUNT as u64;

/// Parse and preprocess the corpus into `preprocessed.jsonl`.
pub fn run_ingest(config: &PipelineConfig, dir: &Path) -> Result<()> {
    let preprocess = config.preprocess_config()?;
    let file = std::fs::File::open(&config.paths.corpus)
        .with_context(|| format!("opening corpus `{}`", config.paths.corpus.display()))?;
    let corpus = parse_posts(
        BufReader::new(file),
        config.preprocess.format,
        config.preprocess.on_malformed,
    )?;
    let (posts, stats) = preprocess_corpus(&corpus, &preprocess, config.preprocess.dedupe_exact);
    write_preprocessed(dir, &posts)?;
    eprintln!(
        "[ingest] parsed {} posts ({} skipped as malformed, {} deduplicated)",
        stats.parsed, stats.skipped_malformed, stats.deduplicated
    );
    Ok(())
}

/// Label every post and write the 21-column `labels.csv`.
pub fn run_label(config: &PipelineConfig, dir: &Path) -> Result<()> {
    let posts = read_preprocessed(dir)?;
    let ids: Vec<String> = posts.iter().map(|p| p.id.clone()).collect();
    let labels: HashMap<String, LabelVector> = match config.labeler {
        LabelerSection::Precomputed => {
            let path = config.paths.labels.as_ref().expect("validated");
            let file = std::fs::File::open(path)
                .with_context(|| format!("opening labels `{}`", path.display()))?;
            let provided = load_labels(file)?;
            let (vectors, coverage) = align_labels(&provided, &ids);
            if coverage.unknown_ids > 0 || coverage.unlabeled_posts > 0 {
                eprintln!(
                    "[label] coverage: {} label rows without a post, {} posts without a label",
                    coverage.unknown_ids, coverage.unlabeled_posts
                );
            }
            ids.iter().cloned().zip(vectors).collect()
        }
        LabelerSection::Lexicon => {
            let lexicon = load_lexicon(config)?;
            posts
                .iter()
                .map(|p| (p.id.clone(), label_with_lexicon(&p.tokens, &lexicon)))
                .collect()
        }
        LabelerSection::Ddr {
            threshold,
            min_covered_tokens,
        } => {
            let lexicon = load_lexicon(config)?;
            let path = config.paths.vectors.as_ref().expect("validated");
            let file = std::fs::File::open(path)
                .with_context(|| format!("opening vectors `{}`", path.display()))?;
            let table = WordVectorTable::from_text(BufReader::new(file))?;
            let ddr = DdrConfig {
                threshold,
                min_covered_tokens,
            };
            posts
                .iter()
                .map(|p| (p.id.clone(), label_with_ddr(&p.tokens, &lexicon, &table, &ddr)))
                .collect()
        }
    };
    write_atomic(dir, LABELS_FILE, |writer| {
        write_labels(writer, &ids, &labels)?;
        Ok(())
    })?;
    eprintln!("[label] labeled {} posts", ids.len());
    Ok(())
}

fn load_lexicon(config: &PipelineConfig) -> Result<Lexicon> {
    let path = config.paths.lexicon.as_ref().expect("validated");
    let file = std::fs::File::open(path)
        .with_context(|| format!("opening lexicon `{}`", path.display()))?;
    Ok(Lexicon::from_tsv(BufReader::new(file))?)
}

/// Build the 21 daily fraction series, impute gaps, write `timeseries.csv`.
pub fn run_series(_config: &PipelineConfig, dir: &Path) -> Result<()> {
    let posts = read_preprocessed(dir)?;
    let labels = load_labels(std::fs::File::open(dir.join(LABELS_FILE)).with_context(|| {
        format!("opening `{}`", dir.join(LABELS_FILE).display())
    })?)?;
    if posts.is_empty() {
        write_atomic(dir, TIMESERIES_FILE, |writer| {
            let mut csv_writer = csv::Writer::from_writer(writer);
            csv_writer.write_record(["date", "category", "fraction", "count", "missing"])?;
            csv_writer.flush()?;
            Ok(())
        })?;
        eprintln!("[series] empty corpus: wrote a header-only series file");
        return Ok(());
    }
    let pairs: Vec<(NaiveDate, LabelVector)> = posts
        .iter()
        .map(|p| {
            let vector = labels.get(&p.id).copied().unwrap_or_else(LabelVector::all_off);
            (p.day, vector)
        })
        .collect();
    let series = build_daily_fractions(&pairs)?;
    let missing_days = series[0].missing.iter().filter(|m| **m).count();
    let series = if missing_days > 0 {
        impute_all(&series)?
    } else {
        series
    };
    write_atomic(dir, TIMESERIES_FILE, |writer| {
        write_series_csv(writer, &series)?;
        Ok(())
    })?;
    eprintln!(
        "[series] {} days × {CATEGORY_COUNT} categories ({missing_days} missing days imputed)",
        series[0].len()
    );
    Ok(())
}

/// Run both detectors on every series and write `changepoints.json`.
pub fn run_detect(config: &PipelineConfig, dir: &Path) -> Result<()> {
    let series_list = read_timeseries(dir)?;
    let detector = config.detector.to_config(config.seed);
    let detections: Vec<Vec<ChangePoint>> = series_list
        .par_iter()
        .map(|series| detect_series(series, &detector))
        .collect::<Result<_, CoreError>>()?;
    let mut points: Vec<ChangePoint> = detections.into_iter().flatten().collect();
    points.sort_by_key(|p| (p.date, p.category.index()));
    write_changepoints(dir, &points)?;
    eprintln!(
        "[detect] {} change points across {} series",
        points.len(),
        series_list.len()
    );
    Ok(())
}

/// Measure short- and long-term reactions at every change point and write
/// `reactions.json`.
pub fn run_measure(config: &PipelineConfig, dir: &Path) -> Result<()> {
    let series_list = read_timeseries(dir)?;
    let points = read_changepoints(dir)?;
    let by_category: HashMap<usize, &moodpulse_core::series::DailyAffectSeries> = series_list
        .iter()
        .map(|s| (s.category.index(), s))
        .collect();
    let kind = config.measure.ttest.to_kind();

    let reactions: Vec<ReactionRecord> = points
        .par_iter()
        .map(|point| -> Result<ReactionRecord> {
            let series = *by_category.get(&point.category.index()).ok_or_else(|| {
                anyhow!("no series for category `{}` in {TIMESERIES_FILE}", point.category)
            })?;
            let mut skips: Vec<String> = Vec::new();

            let short_term = match short_term_change(series, point.date) {
                Ok(short) => {
                    let idx = series.index_of(point.date).expect("window fit");
                    let fit = &short.fit;
                    Some(ShortTermRecord {
                        window_start: point.date - Duration::days(7),
                        window_end: point.date + Duration::days(3),
                        coefficients: fit.coefficients.into(),
                        std_errors: fit.std_errors.into(),
                        t_statistics: fit.t_statistics.into(),
                        p_values: fit.p_values.into(),
                        rss: fit.rss,
                        dof: fit.dof,
                        slope_change: short.slope_change(),
                        pct_change: short.pct_change,
                        p_value: short.p_value(),
                        significance: significance_stars(short.p_value()).to_string(),
                        window_contains_imputed: series.missing[idx - 7..=idx + 3]
                            .iter()
                            .any(|m| *m),
                    })
                }
                Err(CoreError::InsufficientCoverage(message)) => {
                    skips.push(message);
                    None
                }
                Err(other) => return Err(other.into()),
            };

            let long_term = match long_term_change(series, point.date, kind) {
                Ok(long) => {
                    let idx = series.index_of(point.date).expect("window fit");
                    let imputed = series.missing[idx - 7..idx].iter().any(|m| *m)
                        || series.missing[idx + 12..=idx + 16].iter().any(|m| *m);
                    Some(LongTermRecord {
                        baseline_start: point.date - Duration::days(7),
                        baseline_end: point.date - Duration::days(1),
                        post_start: point.date + Duration::days(12),
                        post_end: point.date + Duration::days(16),
                        baseline_mean: long.baseline_mean,
                        post_mean: long.post_mean,
                        t_statistic: long.t_statistic.is_finite().then_some(long.t_statistic),
                        dof: long.dof,
                        p_value: long.p_value,
                        pct_change: long.pct_change,
                        significance: significance_stars(long.p_value).to_string(),
                        window_contains_imputed: imputed,
                    })
                }
                Err(CoreError::InsufficientCoverage(message)) => {
                    skips.push(message);
                    None
                }
                Err(other) => return Err(other.into()),
            };

            Ok(ReactionRecord {
                category: point.category,
                date: point.date,
                method: point.method,
                direction: point.direction,
                confidence: point.confidence,
                short_term,
                long_term,
                coverage: if skips.is_empty() {
                    None
                } else {
                    Some(skips.join("; "))
                },
            })
        })
        .collect::<Result<_>>()?;

    let report = ReactionsReport {
        t_indexing: T_INDEXING_NOTE.to_string(),
        ttest: config.measure.ttest.name().to_string(),
        reactions,
    };
    write_json_atomic(dir, REACTIONS_FILE, 6, &report)?;
    eprintln!("[measure] measured {} change points", points.len());
    Ok(())
}

/// Extract before/after topics around every change point and write
/// `topics.json`. Dips are explained through the categories that rose at
/// the same time, since a category's own posts cannot explain its absence.
pub fn run_explain(config: &PipelineConfig, dir: &Path) -> Result<()> {
    let posts = read_preprocessed(dir)?;
    let labels = load_labels(std::fs::File::open(dir.join(LABELS_FILE)).with_context(|| {
        format!("opening `{}`", dir.join(LABELS_FILE).display())
    })?)?;
    let points = read_changepoints(dir)?;
    let stopwords = config.stopwords()?;
    let window = config.topic.window_days;
    let merge_window = config.detector.merge_window_days;

    let tagged: Vec<(NaiveDate, LabelVector, &[String])> = posts
        .iter()
        .map(|p| {
            let vector = labels.get(&p.id).copied().unwrap_or_else(LabelVector::all_off);
            (p.day, vector, p.tokens.as_slice())
        })
        .collect();

    let records: Vec<TopicRecord> = points
        .par_iter()
        .map(|point| -> Result<TopicRecord> {
            let sources: Vec<AffectCategory> = match point.direction {
                Direction::Increase => vec![point.category],
                Direction::Decrease => points
                    .iter()
                    .filter(|q| {
                        q.direction == Direction::Increase
                            && (q.date - point.date).num_days().abs() <= merge_window
                    })
                    .map(|q| q.category.index())
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .map(|i| AffectCategory::ALL[i])
                    .collect(),
            };
            let before_range = (point.date - Duration::days(window), point.date - Duration::days(1));
            let after_range = (point.date, point.date + Duration::days(window - 1));
            let collect_docs = |range: (NaiveDate, NaiveDate)| -> Vec<Vec<String>> {
                tagged
                    .iter()
                    .filter(|(day, vector, _)| {
                        *day >= range.0
                            && *day <= range.1
                            && sources.iter().any(|c| vector.flags()[c.index()])
                    })
                    .map(|(_, _, tokens)| tokens.to_vec())
                    .collect()
            };
            let before_docs = collect_docs(before_range);
            let after_docs = collect_docs(after_range);

            let mut record = TopicRecord {
                category: point.category,
                date: point.date,
                direction: point.direction,
                source_categories: sources.clone(),
                window_before: [before_range.0, before_range.1],
                window_after: [after_range.0, after_range.1],
                n_docs_before: before_docs.len(),
                n_docs_after: after_docs.len(),
                unexplained: false,
                note: None,
                before: Vec::new(),
                after: Vec::new(),
                emerging: Vec::new(),
            };

            if sources.is_empty() {
                record.unexplained = true;
                record.note = Some(format!(
                    "no category rose within ±{merge_window} days of this dip"
                ));
                return Ok(record);
            }

            let seed = derive_seed(
                config.seed,
                TOPIC_SEED_LANE_BASE + point.category.index() as u64,
                point.date.num_days_from_ce() as u64,
            );
            let topics = emerging_topics(
                &before_docs,
                &after_docs,
                &stopwords,
                &config.topic.to_config(seed),
            )?;
            if topics.unexplained {
                record.unexplained = true;
                record.note = Some(format!(
                    "a window holds fewer than {} documents",
                    config.topic.min_docs
                ));
                return Ok(record);
            }
            record.before = topics.before.iter().map(to_entry).collect();
            record.after = topics.after.iter().map(to_entry).collect();
            record.emerging = topics.emerging;
            Ok(record)
        })
        .collect::<Result<_>>()?;

    write_json_atomic(dir, TOPICS_FILE, 6, &records)?;
    let emerging_total: usize = records.iter().map(|r| r.emerging.len()).sum();
    eprintln!(
        "[explain] {} change points explained ({} emerging topics)",
        records.len(),
        emerging_total
    );
    Ok(())
}

fn to_entry(topic: &moodpulse_core::topic::Topic) -> TopicEntry {
    TopicEntry {
        size: topic.size,
        keywords: topic
            .keywords
            .iter()
            .map(|(term, weight)| KeywordEntry {
                term: term.clone(),
                weight: *weight,
            })
            .collect(),
    }
}

/// Group detections into events, match them against the verdict file, and
/// write `eval.json`.
pub fn run_evaluate(config: &PipelineConfig, dir: &Path) -> Result<()> {
    let points = read_changepoints(dir)?;
    let clusters = group_events(&points, config.eval.grouping_window_days);
    let verdicts = match &config.paths.verdicts {
        Some(path) => load_verdicts(path)?,
        None => Vec::new(),
    };
    let evaluation = evaluate(&clusters, &verdicts)?;

    let mut counts = [0usize; CATEGORY_COUNT];
    for point in &points {
        counts[point.category.index()] += 1;
    }
    let changepoints_by_category = AffectCategory::ALL
        .iter()
        .filter(|c| counts[c.index()] > 0)
        .map(|c| CategoryCount {
            category: *c,
            count: counts[c.index()],
        })
        .collect();

    let (confidence_mean, confidence_std) = match evaluation.confidence {
        Some((mean, std)) => (Some(mean), Some(std)),
        None => (None, None),
    };
    let report = EvalReport {
        n_changepoints: points.len(),
        changepoints_by_category,
        n_events: evaluation.n_clusters,
        n_verified: evaluation.n_verified,
        precision: evaluation.precision,
        derate: evaluation.detected_emotion_rate,
        confidence_mean,
        confidence_std,
        events: evaluation.assignments,
    };
    write_json_atomic(dir, EVAL_FILE, 2, &report)?;
    eprintln!(
        "[evaluate] {} change points, {} events, {} verified",
        points.len(),
        evaluation.n_clusters,
        evaluation.n_verified
    );
    Ok(())
}

/// Export per-category plot CSVs and the change-point marker file.
pub fn run_report(_config: &PipelineConfig, dir: &Path) -> Result<()> {
    let series_list = read_timeseries(dir)?;
    let points = read_changepoints(dir)?;
    export_plot_data(&series_list, &points, &dir.join(PLOTS_DIR))?;
    eprintln!(
        "[report] wrote {} plot series and {} change-point markers",
        series_list.len(),
        points.len()
    );
    Ok(())
}
