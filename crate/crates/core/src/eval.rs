//! Evaluation against ground-truth events.
//!
//! Change points across categories are grouped into candidate events by
//! single-linkage date clustering, matched to ground-truth verdicts by
//! date-span overlap, and scored: precision (fraction of clusters matching a
//! verified event), the detected-emotion rate (how many of the 21 categories
//! fired per verified event), and a summary of detector confidences.

use std::collections::BTreeSet;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::affect::CATEGORY_COUNT;
use crate::changepoint::ChangePoint;
use crate::error::{Error, Result};
use crate::stats::{mean, sample_std};

/// Ground-truth verdict for one real-world event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventVerdict {
    pub event_id: String,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub verified: bool,
    pub description: String,
}

/// A group of change points close enough in time to describe one event.
/// Points are sorted by date, then category.
#[derive(Debug, Clone, PartialEq)]
pub struct EventCluster {
    pub points: Vec<ChangePoint>,
}

impl EventCluster {
    pub fn start_date(&self) -> NaiveDate {
        self.points.first().expect("clusters are non-empty").date
    }

    pub fn end_date(&self) -> NaiveDate {
        self.points.last().expect("clusters are non-empty").date
    }

    /// Number of distinct affect categories that fired.
    pub fn distinct_categories(&self) -> usize {
        self.points
            .iter()
            .map(|p| p.category)
            .collect::<BTreeSet<_>>()
            .len()
    }
}

/// One cluster's assignment to a verdict, for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub event_id: String,
    pub verified: bool,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub n_points: usize,
    pub n_categories: usize,
}

/// Aggregate evaluation over all clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub n_clusters: usize,
    pub n_verified: usize,
    /// Verified clusters over all clusters; `None` with zero clusters.
    pub precision: Option<f64>,
    /// Mean over verified clusters of distinct categories / 21; `None`
    /// with zero verified clusters.
    pub detected_emotion_rate: Option<f64>,
    /// Mean and sample standard deviation of all clustered change-point
    /// confidences; `None` with zero clusters.
    pub confidence: Option<(f64, f64)>,
    pub assignments: Vec<ClusterAssignment>,
}

/// Group change points into event clusters by single-linkage on dates: any
/// two points (regardless of category) at most `window_days` apart chain
/// into the same cluster. Output clusters are ordered by start date, and
/// the result does not depend on the input order.
pub fn group_events(points: &[ChangePoint], window_days: i64) -> Vec<EventCluster> {
    let mut sorted: Vec<ChangePoint> = points.to_vec();
    sorted.sort_by_key(|p| (p.date, p.category.index()));
    let mut clusters: Vec<EventCluster> = Vec::new();
    for point in sorted {
        match clusters.last_mut() {
            Some(cluster)
                if (point.date - cluster.end_date()).num_days() <= window_days =>
            {
                cluster.points.push(point);
            }
            _ => clusters.push(EventCluster {
                points: vec![point],
            }),
        }
    }
    clusters
}

/// Days in the intersection of two inclusive date ranges.
fn overlap_days(
    a_start: NaiveDate,
    a_end: NaiveDate,
    b_start: NaiveDate,
    b_end: NaiveDate,
) -> i64 {
    let start = a_start.max(b_start);
    let end = a_end.min(b_end);
    ((end - start).num_days() + 1).max(0)
}

/// Match each cluster to the verdict whose date span overlaps it by the
/// most days (earliest verdict start, then id, on ties). A cluster touching
/// no verdict at all is an error: the ground truth does not cover the run.
pub fn match_verdicts<'a>(
    clusters: &[EventCluster],
    verdicts: &'a [EventVerdict],
) -> Result<Vec<&'a EventVerdict>> {
    let mut matches = Vec::with_capacity(clusters.len());
    for cluster in clusters {
        let mut best: Option<(&EventVerdict, i64)> = None;
        for verdict in verdicts {
            let days = overlap_days(
                cluster.start_date(),
                cluster.end_date(),
                verdict.start_date,
                verdict.end_date,
            );
            if days == 0 {
                continue;
            }
            let better = match best {
                None => true,
                Some((current, current_days)) => {
                    days > current_days
                        || (days == current_days
                            && (verdict.start_date, &verdict.event_id)
                                < (current.start_date, &current.event_id))
                }
            };
            if better {
                best = Some((verdict, days));
            }
        }
        match best {
            Some((verdict, _)) => matches.push(verdict),
            None => {
                return Err(Error::invalid(format!(
                    "no ground-truth event overlaps the cluster spanning {} to {}",
                    cluster.start_date(),
                    cluster.end_date()
                )))
            }
        }
    }
    Ok(matches)
}

/// Mean and sample standard deviation of confidences; `None` when empty.
/// A single value has standard deviation 0.
pub fn confidence_summary(confidences: &[f64]) -> Option<(f64, f64)> {
    if confidences.is_empty() {
        None
    } else {
        Some((mean(confidences), sample_std(confidences)))
    }
}

/// Run the full evaluation: cluster verdicts, precision, detected-emotion
/// rate and confidence summary.
pub fn evaluate(
    clusters: &[EventCluster],
    verdicts: &[EventVerdict],
) -> Result<Evaluation> {
    let matches = match_verdicts(clusters, verdicts)?;
    let n_clusters = clusters.len();
    let n_verified = matches.iter().filter(|v| v.verified).count();
    let precision = if n_clusters == 0 {
        None
    } else {
        Some(n_verified as f64 / n_clusters as f64)
    };

    let verified_rates: Vec<f64> = clusters
        .iter()
        .zip(&matches)
        .filter(|(_, v)| v.verified)
        .map(|(c, _)| c.distinct_categories() as f64 / CATEGORY_COUNT as f64)
        .collect();
    let detected_emotion_rate = if verified_rates.is_empty() {
        None
    } else {
        Some(mean(&verified_rates))
    };

    let confidences: Vec<f64> = clusters
        .iter()
        .flat_map(|c| c.points.iter().map(|p| p.confidence))
        .collect();

    let assignments = clusters
        .iter()
        .zip(&matches)
        .map(|(c, v)| ClusterAssignment {
            event_id: v.event_id.clone(),
            verified: v.verified,
            start_date: c.start_date(),
            end_date: c.end_date(),
            n_points: c.points.len(),
            n_categories: c.distinct_categories(),
        })
        .collect();

    Ok(Evaluation {
        n_clusters,
        n_verified,
        precision,
        detected_emotion_rate,
        confidence: confidence_summary(&confidences),
        assignments,
    })
}

/// Parse verdicts from CSV with columns `event_id,start_date,end_date,
/// verified,description`; `verified` is 0 or 1, dates are ISO.
pub fn parse_verdicts<R: Read>(reader: R) -> Result<Vec<EventVerdict>> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = csv_reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::invalid(format!("verdicts CSV is missing column '{name}'")))
    };
    let id_col = col("event_id")?;
    let start_col = col("start_date")?;
    let end_col = col("end_date")?;
    let verified_col = col("verified")?;
    let description_col = col("description")?;

    let mut verdicts: Vec<EventVerdict> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for record in csv_reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0) as usize;
        let field = |idx: usize| -> Result<&str> {
            record
                .get(idx)
                .ok_or_else(|| Error::malformed(line, "missing field"))
        };
        let date = |idx: usize, name: &str| -> Result<NaiveDate> {
            field(idx)?.trim().parse().map_err(|_| {
                Error::malformed(line, format!("invalid {name} '{}'", field(idx).unwrap_or("")))
            })
        };
        let event_id = field(id_col)?.trim().to_string();
        if event_id.is_empty() {
            return Err(Error::malformed(line, "empty event_id"));
        }
        if !seen.insert(event_id.clone()) {
            return Err(Error::Conflict {
                id: event_id,
                message: "duplicate event_id in verdicts".to_string(),
            });
        }
        let start_date = date(start_col, "start_date")?;
        let end_date = date(end_col, "end_date")?;
        if end_date < start_date {
            return Err(Error::malformed(line, "end_date precedes start_date"));
        }
        let verified = match field(verified_col)?.trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::malformed(
                    line,
                    format!("verified must be 0 or 1, got '{other}'"),
                ))
            }
        };
        verdicts.push(EventVerdict {
            event_id,
            start_date,
            end_date,
            verified,
            description: field(description_col)?.to_string(),
        });
    }
    Ok(verdicts)
}

/// Load verdicts from a CSV file. See [`parse_verdicts`].
pub fn load_verdicts(path: &Path) -> Result<Vec<EventVerdict>> {
    parse_verdicts(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affect::AffectCategory;
    use crate::changepoint::{DetectionMethod, Direction};
    use proptest::prelude::*;

    fn day(offset: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2023, 1, 1).unwrap() + chrono::Duration::days(offset)
    }

    fn point(offset: i64, category: AffectCategory, confidence: f64) -> ChangePoint {
        ChangePoint {
            category,
            date: day(offset),
            method: DetectionMethod::Cusum,
            confidence,
            direction: Direction::Increase,
        }
    }

    fn verdict(id: &str, start: i64, end: i64, verified: bool) -> EventVerdict {
        EventVerdict {
            event_id: id.to_string(),
            start_date: day(start),
            end_date: day(end),
            verified,
            description: format!("event {id}"),
        }
    }

    // ---- grouping --------------------------------------------------------

    #[test]
    fn points_within_the_window_chain_transitively() {
        let points = vec![
            point(0, AffectCategory::Anger, 0.9),
            point(2, AffectCategory::Fear, 0.8),
            point(4, AffectCategory::Sadness, 0.7),
            point(7, AffectCategory::Joy, 0.6),
        ];
        let clusters = group_events(&points, 2);
        assert_eq!(clusters.len(), 2);
        assert_eq!(clusters[0].points.len(), 3, "0→2→4 chains");
        assert_eq!(clusters[0].start_date(), day(0));
        assert_eq!(clusters[0].end_date(), day(4));
        assert_eq!(clusters[1].points.len(), 1);
    }

    #[test]
    fn same_day_points_of_different_categories_share_a_cluster() {
        let points = vec![
            point(10, AffectCategory::Fear, 0.9),
            point(10, AffectCategory::Anger, 0.9),
            point(10, AffectCategory::Care, 0.9),
        ];
        let clusters = group_events(&points, 2);
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].distinct_categories(), 3);
        // Sorted by category within the day.
        assert_eq!(clusters[0].points[0].category, AffectCategory::Anger);
    }

    #[test]
    fn empty_input_gives_no_clusters() {
        assert!(group_events(&[], 2).is_empty());
    }

    // ---- matching --------------------------------------------------------

    #[test]
    fn largest_day_overlap_wins() {
        let clusters = group_events(
            &[
                point(10, AffectCategory::Anger, 0.9),
                point(12, AffectCategory::Fear, 0.9),
            ],
            2,
        );
        // "small" touches one day of the cluster, "big" covers it fully.
        let verdicts = vec![verdict("small", 8, 10, false), verdict("big", 10, 14, true)];
        let matches = match_verdicts(&clusters, &verdicts).unwrap();
        assert_eq!(matches[0].event_id, "big");
    }

    #[test]
    fn overlap_ties_pick_the_earliest_verdict() {
        let clusters = group_events(&[point(10, AffectCategory::Anger, 0.9)], 2);
        // Both cover the single cluster day entirely.
        let verdicts = vec![verdict("later", 10, 12, true), verdict("earlier", 9, 11, false)];
        let matches = match_verdicts(&clusters, &verdicts).unwrap();
        assert_eq!(matches[0].event_id, "earlier");
    }

    #[test]
    fn uncovered_clusters_are_an_error() {
        let clusters = group_events(&[point(50, AffectCategory::Anger, 0.9)], 2);
        let verdicts = vec![verdict("far", 0, 5, true)];
        let err = match_verdicts(&clusters, &verdicts).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)), "{err:?}");
    }

    // ---- metrics ---------------------------------------------------------

    #[test]
    fn frozen_precision_forty_two_of_fifty() {
        let mut points = Vec::new();
        let mut verdicts = Vec::new();
        for i in 0..50i64 {
            points.push(point(i * 10, AffectCategory::Anger, 0.8));
            verdicts.push(verdict(&format!("e{i:02}"), i * 10, i * 10 + 1, i < 42));
        }
        let clusters = group_events(&points, 2);
        assert_eq!(clusters.len(), 50);
        let eval = evaluate(&clusters, &verdicts).unwrap();
        assert_eq!(eval.n_clusters, 50);
        assert_eq!(eval.n_verified, 42);
        assert!((eval.precision.unwrap() - 0.84).abs() < 1e-12);
    }

    #[test]
    fn frozen_detected_emotion_rate() {
        // Verified cluster with 2 categories, verified cluster with 6,
        // and an unverified cluster with 3 (excluded from the rate).
        let mut points = Vec::new();
        for c in [AffectCategory::Anger, AffectCategory::Fear] {
            points.push(point(0, c, 0.9));
        }
        for c in [
            AffectCategory::Joy,
            AffectCategory::Love,
            AffectCategory::Trust,
            AffectCategory::Optimism,
            AffectCategory::Surprise,
            AffectCategory::Care,
        ] {
            points.push(point(20, c, 0.9));
        }
        for c in [
            AffectCategory::Harm,
            AffectCategory::Cheating,
            AffectCategory::Betrayal,
        ] {
            points.push(point(40, c, 0.9));
        }
        let clusters = group_events(&points, 2);
        assert_eq!(clusters.len(), 3);
        let verdicts = vec![
            verdict("a", 0, 1, true),
            verdict("b", 19, 21, true),
            verdict("c", 40, 41, false),
        ];
        let eval = evaluate(&clusters, &verdicts).unwrap();
        let expected = 4.0 / 21.0; // mean(2/21, 6/21)
        assert!((eval.detected_emotion_rate.unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn confidence_summary_frozen_cases() {
        let (m, s) = confidence_summary(&[0.5, 1.0]).unwrap();
        assert_eq!(m, 0.75);
        assert!((s - 0.3535533905932738).abs() < 1e-15);

        let (m, s) = confidence_summary(&[1.0, 1.0]).unwrap();
        assert_eq!((m, s), (1.0, 0.0));

        let (m, s) = confidence_summary(&[0.7]).unwrap();
        assert_eq!((m, s), (0.7, 0.0));

        assert_eq!(confidence_summary(&[]), None);
    }

    #[test]
    fn empty_run_evaluates_to_none_metrics() {
        let eval = evaluate(&[], &[verdict("e", 0, 1, true)]).unwrap();
        assert_eq!(eval.n_clusters, 0);
        assert_eq!(eval.precision, None);
        assert_eq!(eval.detected_emotion_rate, None);
        assert_eq!(eval.confidence, None);
        assert!(eval.assignments.is_empty());
    }

    // ---- CSV -------------------------------------------------------------

    #[test]
    fn verdict_csv_round_trips_with_quoted_descriptions() {
        let csv = "event_id,start_date,end_date,verified,description\n\
                   quake-01,2023-02-06,2023-02-10,1,\"Earthquake, magnitude 7.8\"\n\
                   rumor-02,2023-03-01,2023-03-02,0,unconfirmed rumor\n";
        let verdicts = parse_verdicts(csv.as_bytes()).unwrap();
        assert_eq!(verdicts.len(), 2);
        assert_eq!(verdicts[0].event_id, "quake-01");
        assert!(verdicts[0].verified);
        assert_eq!(verdicts[0].description, "Earthquake, magnitude 7.8");
        assert_eq!(
            verdicts[0].start_date,
            NaiveDate::from_ymd_opt(2023, 2, 6).unwrap()
        );
        assert!(!verdicts[1].verified);
    }

    #[test]
    fn verdict_csv_column_order_does_not_matter() {
        let csv = "description,verified,end_date,start_date,event_id\n\
                   flood,1,2023-05-04,2023-05-01,flood-1\n";
        let verdicts = parse_verdicts(csv.as_bytes()).unwrap();
        assert_eq!(verdicts[0].event_id, "flood-1");
        assert!(verdicts[0].verified);
    }

    #[test]
    fn malformed_verdict_rows_name_their_line() {
        let bad_flag = "event_id,start_date,end_date,verified,description\n\
                        a,2023-01-01,2023-01-02,1,ok\n\
                        b,2023-01-05,2023-01-06,yes,bad\n";
        match parse_verdicts(bad_flag.as_bytes()).unwrap_err() {
            Error::Malformed { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("verified"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }

        let bad_date = "event_id,start_date,end_date,verified,description\n\
                        a,not-a-date,2023-01-02,1,ok\n";
        assert!(matches!(
            parse_verdicts(bad_date.as_bytes()).unwrap_err(),
            Error::Malformed { line: 2, .. }
        ));

        let reversed = "event_id,start_date,end_date,verified,description\n\
                        a,2023-01-05,2023-01-02,1,ok\n";
        assert!(matches!(
            parse_verdicts(reversed.as_bytes()).unwrap_err(),
            Error::Malformed { line: 2, .. }
        ));

        let missing = "event_id,start_date,end_date,verified\n\
                       a,2023-01-01,2023-01-02,1\n";
        assert!(matches!(
            parse_verdicts(missing.as_bytes()).unwrap_err(),
            Error::InvalidInput(_)
        ));

        let duplicate = "event_id,start_date,end_date,verified,description\n\
                         a,2023-01-01,2023-01-02,1,x\n\
                         a,2023-02-01,2023-02-02,0,y\n";
        assert!(matches!(
            parse_verdicts(duplicate.as_bytes()).unwrap_err(),
            Error::Conflict { .. }
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn grouping_ignores_input_order(
            offsets in proptest::collection::vec(0i64..60, 1..15),
            seed in 0u64..100,
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let categories = AffectCategory::ALL;
            let points: Vec<ChangePoint> = offsets
                .iter()
                .enumerate()
                .map(|(i, o)| point(*o, categories[i % categories.len()], 0.5))
                .collect();
            let mut shuffled = points.clone();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            shuffled.shuffle(&mut rng);
            prop_assert_eq!(group_events(&points, 2), group_events(&shuffled, 2));
        }

        #[test]
        fn cluster_spans_and_gaps_respect_the_window(
            offsets in proptest::collection::vec(0i64..90, 1..20),
        ) {
            let points: Vec<ChangePoint> = offsets
                .iter()
                .map(|o| point(*o, AffectCategory::Joy, 0.5))
                .collect();
            let clusters = group_events(&points, 2);
            // Clusters are ordered, non-overlapping, with gaps > window.
            for pair in clusters.windows(2) {
                prop_assert!((pair[1].start_date() - pair[0].end_date()).num_days() > 2);
            }
            // Within a cluster, consecutive points are within the window.
            for cluster in &clusters {
                for pair in cluster.points.windows(2) {
                    prop_assert!((pair[1].date - pair[0].date).num_days() <= 2);
                }
            }
            let total: usize = clusters.iter().map(|c| c.points.len()).sum();
            prop_assert_eq!(total, points.len());
        }
    }
}
