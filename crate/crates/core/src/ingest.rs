//! Corpus ingestion: record parsing, text preprocessing, and day bucketing.
//!
//! Preprocessing is deliberately simple and fully deterministic: URLs and
//! @-mentions are removed, emoji are replaced by textual descriptions from a
//! caller-supplied table, hashtags are segmented into words, text is
//! lowercased, and tokens are split on whitespace/punctuation. Running the
//! pipeline on its own output is a no-op (idempotence), which the tests
//! assert as a property.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Read};

use chrono::{DateTime, FixedOffset, NaiveDate};
use chrono_tz::Tz;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

/// One post as found in the input corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPost {
    #[serde(deserialize_with = "id_from_string_or_number")]
    pub id: String,
    /// Publication instant; must carry an explicit UTC offset.
    pub timestamp: DateTime<FixedOffset>,
    pub text: String,
    /// Optional source-language tag; carried through untouched.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
}

/// Accept post ids either as JSON strings or as bare integers.
fn id_from_string_or_number<'de, D>(deserializer: D) -> std::result::Result<String, D::Error>
where
    D: Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum StringOrNumber {
        S(String),
        N(i64),
    }
    Ok(match StringOrNumber::deserialize(deserializer)? {
        StringOrNumber::S(s) => s,
        StringOrNumber::N(n) => n.to_string(),
    })
}

/// A post after cleaning, tokenization, and day assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessedPost {
    pub id: String,
    /// Calendar day in the configured analysis time zone.
    pub day: NaiveDate,
    pub tokens: Vec<String>,
    /// Tokens joined by single spaces; re-preprocessing this string yields
    /// the same tokens.
    pub clean_text: String,
}

/// What to do when an input record cannot be parsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MalformedPolicy {
    /// Skip the record and count it.
    Skip,
    /// Abort parsing with the offending line number.
    Fail,
}

/// Input serialization of the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    /// One JSON object per line.
    Jsonl,
    /// Header + one record per row.
    Csv,
}

/// Resources and options steering preprocessing.
#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    /// Emoji string → textual description (may contain spaces).
    pub emoji_map: HashMap<String, String>,
    /// Words recognised by the hashtag segmenter.
    pub hashtag_wordlist: HashSet<String>,
    /// Tokens suppressed later when topic keywords are emitted. Held here so
    /// one config owns all text resources; tokenization keeps stopwords.
    pub stopword_list: HashSet<String>,
    /// IANA zone used to assign posts to calendar days.
    pub time_zone: Tz,
    pub on_malformed: MalformedPolicy,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            emoji_map: HashMap::new(),
            hashtag_wordlist: HashSet::new(),
            stopword_list: HashSet::new(),
            time_zone: chrono_tz::UTC,
            on_malformed: MalformedPolicy::Skip,
        }
    }
}

/// Result of parsing a corpus stream.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCorpus {
    pub posts: Vec<RawPost>,
    /// Records dropped under [`MalformedPolicy::Skip`].
    pub skipped: usize,
}

/// Parse a corpus from `input` in the given format.
///
/// An empty stream yields an empty corpus. Under [`MalformedPolicy::Fail`]
/// the first bad record aborts with its 1-based line number; under
/// [`MalformedPolicy::Skip`] bad records are counted and dropped.
pub fn parse_posts<R: Read>(
    input: R,
    format: CorpusFormat,
    on_malformed: MalformedPolicy,
) -> Result<ParsedCorpus> {
    match format {
        CorpusFormat::Jsonl => parse_posts_jsonl(input, on_malformed),
        CorpusFormat::Csv => parse_posts_csv(input, on_malformed),
    }
}

fn parse_posts_jsonl<R: Read>(input: R, on_malformed: MalformedPolicy) -> Result<ParsedCorpus> {
    let reader = BufReader::new(input);
    let mut posts = Vec::new();
    let mut skipped = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RawPost>(&line) {
            Ok(post) => posts.push(post),
            Err(err) => match on_malformed {
                MalformedPolicy::Skip => skipped += 1,
                MalformedPolicy::Fail => {
                    return Err(Error::malformed(idx + 1, err.to_string()));
                }
            },
        }
    }
    Ok(ParsedCorpus { posts, skipped })
}

fn parse_posts_csv<R: Read>(input: R, on_malformed: MalformedPolicy) -> Result<ParsedCorpus> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let headers = match reader.headers() {
        Ok(h) => h.clone(),
        // An entirely empty stream has no header row and no records.
        Err(_) => {
            return Ok(ParsedCorpus {
                posts: Vec::new(),
                skipped: 0,
            })
        }
    };
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Ok(ParsedCorpus {
            posts: Vec::new(),
            skipped: 0,
        });
    }
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (id_col, ts_col, text_col) = match (col("id"), col("timestamp"), col("text")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => {
            return Err(Error::invalid(
                "corpus csv must have `id`, `timestamp`, and `text` columns",
            ))
        }
    };
    let lang_col = col("lang");

    let mut posts = Vec::new();
    let mut skipped = 0usize;
    for result in reader.records() {
        let record = match result {
            Ok(r) => r,
            Err(err) => match on_malformed {
                MalformedPolicy::Skip => {
                    skipped += 1;
                    continue;
                }
                MalformedPolicy::Fail => return Err(err.into()),
            },
        };
        // +1 for the header row; positions are 0-based byte lines.
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(0);
        let parsed = parse_csv_record(&record, id_col, ts_col, text_col, lang_col);
        match parsed {
            Ok(post) => posts.push(post),
            Err(message) => match on_malformed {
                MalformedPolicy::Skip => skipped += 1,
                MalformedPolicy::Fail => return Err(Error::malformed(line, message)),
            },
        }
    }
    Ok(ParsedCorpus { posts, skipped })
}

fn parse_csv_record(
    record: &csv::StringRecord,
    id_col: usize,
    ts_col: usize,
    text_col: usize,
    lang_col: Option<usize>,
) -> std::result::Result<RawPost, String> {
    let field = |i: usize| record.get(i).map(str::trim);
    let id = field(id_col).filter(|s| !s.is_empty());
    let ts = field(ts_col).filter(|s| !s.is_empty());
    let text = record.get(text_col);
    let (id, ts, text) = match (id, ts, text) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err("missing id, timestamp, or text field".to_string()),
    };
    let timestamp = DateTime::parse_from_rfc3339(ts)
        .map_err(|e| format!("bad timestamp `{ts}`: {e}"))?;
    let lang = lang_col
        .and_then(|i| record.get(i))
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string);
    Ok(RawPost {
        id: id.to_string(),
        timestamp,
        text: text.to_string(),
        lang,
    })
}

/// Resolve an IANA zone name, e.g. `America/Los_Angeles`.
pub fn resolve_time_zone(name: &str) -> Result<Tz> {
    name.parse::<Tz>()
        .map_err(|_| Error::config(format!("unknown IANA time zone `{name}`")))
}

/// Calendar day of `timestamp` in `zone`.
///
/// Day boundaries are civil midnight in `zone`, so the same instant may land
/// on different days under different zones.
pub fn bucket_day(timestamp: DateTime<FixedOffset>, zone: Tz) -> NaiveDate {
    timestamp.with_timezone(&zone).date_naive()
}

/// Split a hashtag body (leading `#` already removed) into word tokens.
///
/// Boundaries between lowercase→uppercase, acronym→word, and letter↔digit
/// transitions split the tag into runs. Runs that were entirely lowercase in
/// the original are further segmented by greedy longest-prefix match against
/// `wordlist`; a run that cannot be fully segmented stays whole. Output
/// tokens are lowercase.
pub fn split_hashtag(tag: &str, wordlist: &HashSet<String>) -> Vec<String> {
    let chars: Vec<char> = tag.chars().collect();
    if chars.is_empty() {
        return Vec::new();
    }

    #[derive(PartialEq, Clone, Copy)]
    enum Class {
        Upper,
        Lower,
        Digit,
        Other,
    }
    let class = |c: char| {
        if c.is_uppercase() {
            Class::Upper
        } else if c.is_lowercase() {
            Class::Lower
        } else if c.is_numeric() {
            Class::Digit
        } else {
            Class::Other
        }
    };

    // Cut the tag into runs at camel-case and letter↔digit boundaries.
    let mut runs: Vec<(String, bool)> = Vec::new(); // (run, was_all_lowercase)
    let mut start = 0usize;
    for i in 1..chars.len() {
        let prev = class(chars[i - 1]);
        let cur = class(chars[i]);
        let boundary = match (prev, cur) {
            (Class::Lower, Class::Upper) => true,
            (Class::Digit, Class::Upper | Class::Lower) => true,
            (Class::Upper | Class::Lower, Class::Digit) => true,
            // Acronym followed by a word: "COVIDCases" → COVID | Cases.
            (Class::Upper, Class::Upper) => {
                i + 1 < chars.len() && class(chars[i + 1]) == Class::Lower
            }
            _ => false,
        };
        if boundary {
            let run: String = chars[start..i].iter().collect();
            let all_lower = run.chars().all(|c| !c.is_uppercase());
            runs.push((run, all_lower));
            start = i;
        }
    }
    let run: String = chars[start..].iter().collect();
    let all_lower = run.chars().all(|c| !c.is_uppercase());
    runs.push((run, all_lower));

    let mut tokens = Vec::new();
    for (run, was_lower) in runs {
        let lowered = run.to_lowercase();
        if was_lower && run.chars().any(|c| c.is_alphabetic()) {
            match greedy_segment(&lowered, wordlist) {
                Some(words) => tokens.extend(words),
                None => tokens.push(lowered),
            }
        } else {
            tokens.push(lowered);
        }
    }
    tokens
}

/// Greedy longest-prefix segmentation of `run` over `wordlist`; `None` when
/// the run cannot be consumed completely.
fn greedy_segment(run: &str, wordlist: &HashSet<String>) -> Option<Vec<String>> {
    if wordlist.is_empty() {
        return None;
    }
    let chars: Vec<char> = run.chars().collect();
    let mut words = Vec::new();
    let mut pos = 0usize;
    while pos < chars.len() {
        let mut matched = None;
        for end in (pos + 1..=chars.len()).rev() {
            let candidate: String = chars[pos..end].iter().collect();
            if wordlist.contains(&candidate) {
                matched = Some((candidate, end));
                break;
            }
        }
        match matched {
            Some((word, end)) => {
                words.push(word);
                pos = end;
            }
            None => return None,
        }
    }
    Some(words)
}

/// Clean and tokenize one text.
///
/// Steps, in order: drop whitespace-delimited segments containing a URL
/// scheme (`://`), remove `@mention` spans, expand hashtags via
/// [`split_hashtag`], replace mapped emoji with their descriptions, then
/// lowercase and split into tokens. Unmapped emoji survive as single tokens.
pub fn preprocess(text: &str, config: &PreprocessConfig) -> (Vec<String>, String) {
    // Drop URL segments wholesale.
    let mut no_urls = String::with_capacity(text.len());
    for segment in text.split_whitespace() {
        if segment.contains("://") {
            continue;
        }
        if !no_urls.is_empty() {
            no_urls.push(' ');
        }
        no_urls.push_str(segment);
    }

    // Remove @mentions (@ followed by word characters).
    let chars: Vec<char> = no_urls.chars().collect();
    let mut no_mentions = String::with_capacity(no_urls.len());
    let mut i = 0usize;
    let is_word = |c: char| c.is_alphanumeric() || c == '_';
    while i < chars.len() {
        if chars[i] == '@' && i + 1 < chars.len() && is_word(chars[i + 1]) {
            i += 1;
            while i < chars.len() && is_word(chars[i]) {
                i += 1;
            }
        } else {
            no_mentions.push(chars[i]);
            i += 1;
        }
    }

    // Expand hashtags.
    let chars: Vec<char> = no_mentions.chars().collect();
    let mut expanded = String::with_capacity(no_mentions.len());
    let mut i = 0usize;
    while i < chars.len() {
        if chars[i] == '#' && i + 1 < chars.len() && chars[i + 1].is_alphanumeric() {
            let start = i + 1;
            let mut end = start;
            while end < chars.len() && (chars[end].is_alphanumeric() || chars[end] == '_') {
                end += 1;
            }
            let tag: String = chars[start..end].iter().collect();
            let words = split_hashtag(&tag, &config.hashtag_wordlist);
            expanded.push(' ');
            expanded.push_str(&words.join(" "));
            expanded.push(' ');
            i = end;
        } else {
            expanded.push(chars[i]);
            i += 1;
        }
    }

    // Replace mapped emoji with their descriptions, longest keys first so a
    // short emoji never shadows a longer sequence containing it.
    let mut with_emoji = expanded;
    if !config.emoji_map.is_empty() {
        let mut keys: Vec<&String> = config.emoji_map.keys().collect();
        keys.sort_by(|a, b| b.chars().count().cmp(&a.chars().count()).then(a.cmp(b)));
        for key in keys {
            if with_emoji.contains(key.as_str()) {
                let replacement = format!(" {} ", config.emoji_map[key.as_str()]);
                with_emoji = with_emoji.replace(key.as_str(), &replacement);
            }
        }
    }

    let lowered = with_emoji.to_lowercase();
    let tokens = tokenize(&lowered);
    let clean_text = tokens.join(" ");
    (tokens, clean_text)
}

/// Non-ASCII punctuation commonly found in social-media text; treated as a
/// token boundary alongside ASCII punctuation and whitespace.
const EXTRA_PUNCT: &[char] = &[
    '\u{2018}', '\u{2019}', '\u{201C}', '\u{201D}', '\u{2026}', '\u{2013}', '\u{2014}',
    '\u{00A1}', '\u{00BF}', '\u{00AB}', '\u{00BB}', '\u{3001}', '\u{3002}', '\u{FF01}',
    '\u{FF1F}', '\u{FF0C}',
];

/// Split lowered text into tokens.
///
/// Token characters are Unicode letters/digits plus non-ASCII symbols (so
/// emoji survive); everything else — whitespace, ASCII punctuation, common
/// non-ASCII punctuation — separates tokens.
fn tokenize(text: &str) -> Vec<String> {
    let keep = |c: char| {
        !c.is_whitespace()
            && !EXTRA_PUNCT.contains(&c)
            && (c.is_alphanumeric() || !c.is_ascii())
    };
    text.split(|c: char| !keep(c))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Counters describing one preprocessing pass over a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IngestStats {
    pub parsed: usize,
    pub skipped_malformed: usize,
    pub deduplicated: usize,
}

/// Preprocess a parsed corpus: bucket each post to a day, optionally drop
/// exact duplicate texts within a day, and clean/tokenize.
///
/// Output order follows input order.
pub fn preprocess_corpus(
    corpus: &ParsedCorpus,
    config: &PreprocessConfig,
    dedupe_exact: bool,
) -> (Vec<PreprocessedPost>, IngestStats) {
    let mut seen: HashSet<(NaiveDate, String)> = HashSet::new();
    let mut out = Vec::with_capacity(corpus.posts.len());
    let mut deduplicated = 0usize;
    for post in &corpus.posts {
        let day = bucket_day(post.timestamp, config.time_zone);
        if dedupe_exact && !seen.insert((day, post.text.clone())) {
            deduplicated += 1;
            continue;
        }
        let (tokens, clean_text) = preprocess(&post.text, config);
        out.push(PreprocessedPost {
            id: post.id.clone(),
            day,
            tokens,
            clean_text,
        });
    }
    let stats = IngestStats {
        parsed: corpus.posts.len(),
        skipped_malformed: corpus.skipped,
        deduplicated,
    };
    (out, stats)
}

/// Load an emoji→description table: one `emoji<TAB>description` pair per
/// line; blank lines ignored.
pub fn load_emoji_map<R: Read>(input: R) -> Result<HashMap<String, String>> {
    let reader = BufReader::new(input);
    let mut map = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() {
            continue;
        }
        let mut parts = trimmed.splitn(2, '\t');
        let emoji = parts.next().unwrap_or("").trim();
        let description = parts.next().map(str::trim).unwrap_or("");
        if emoji.is_empty() || description.is_empty() {
            return Err(Error::malformed(
                idx + 1,
                "expected `emoji<TAB>description`",
            ));
        }
        map.insert(emoji.to_string(), description.to_string());
    }
    Ok(map)
}

/// Load a word set: one word per line, lowercased; blank lines ignored.
pub fn load_word_set<R: Read>(input: R) -> Result<HashSet<String>> {
    let reader = BufReader::new(input);
    let mut set = HashSet::new();
    for line in reader.lines() {
        let line = line?;
        let word = line.trim();
        if !word.is_empty() {
            set.insert(word.to_lowercase());
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn wordlist(words: &[&str]) -> HashSet<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    /// Brute-force oracle: enumerate every way to cover `run` with wordlist
    /// words. Independent of the greedy implementation.
    fn all_segmentations(run: &str, wordlist: &HashSet<String>) -> Vec<Vec<String>> {
        fn recurse(
            rest: &str,
            wordlist: &HashSet<String>,
            prefix: &mut Vec<String>,
            out: &mut Vec<Vec<String>>,
        ) {
            if rest.is_empty() {
                out.push(prefix.clone());
                return;
            }
            for end in 1..=rest.len() {
                if !rest.is_char_boundary(end) {
                    continue;
                }
                let head = &rest[..end];
                if wordlist.contains(head) {
                    prefix.push(head.to_string());
                    recurse(&rest[end..], wordlist, prefix, out);
                    prefix.pop();
                }
            }
        }
        let mut out = Vec::new();
        recurse(run, wordlist, &mut Vec::new(), &mut out);
        out
    }

    // ---- hashtag segmentation -------------------------------------------

    #[test]
    fn camel_case_hashtag_splits_at_case_boundaries() {
        let tokens = split_hashtag("RoeVsWade", &HashSet::new());
        assert_eq!(tokens, vec!["roe", "vs", "wade"]);
    }

    #[test]
    fn letter_digit_boundary_splits() {
        let tokens = split_hashtag("COVID19", &HashSet::new());
        assert_eq!(tokens, vec!["covid", "19"]);
    }

    #[test]
    fn acronym_followed_by_word_splits_before_the_word() {
        let tokens = split_hashtag("COVIDCases", &HashSet::new());
        assert_eq!(tokens, vec!["covid", "cases"]);
    }

    #[test]
    fn lowercase_run_segmented_by_greedy_longest_match() {
        // Oracle: over this wordlist the run has exactly one full cover,
        // so greedy must find it.
        let wl = wordlist(&["black", "lives", "matter", "live"]);
        let covers = all_segmentations("blacklivesmatter", &wl);
        assert_eq!(covers, vec![vec!["black", "lives", "matter"]]);
        let tokens = split_hashtag("blacklivesmatter", &wl);
        assert_eq!(tokens, vec!["black", "lives", "matter"]);
    }

    #[test]
    fn greedy_prefers_longest_word_at_each_position() {
        // Both [into] and [in, to] cover the run; greedy takes the longest
        // first word.
        let wl = wordlist(&["in", "to", "into"]);
        let covers = all_segmentations("into", &wl);
        assert_eq!(covers.len(), 2);
        assert_eq!(split_hashtag("into", &wl), vec!["into"]);
    }

    #[test]
    fn unsegmentable_lowercase_tag_stays_whole() {
        let wl = wordlist(&["black", "lives"]);
        assert!(all_segmentations("blacklivesmatterxyz", &wl).is_empty());
        let tokens = split_hashtag("blacklivesmatterxyz", &wl);
        assert_eq!(tokens, vec!["blacklivesmatterxyz"]);
    }

    #[test]
    fn empty_wordlist_keeps_lowercase_tag_whole() {
        assert_eq!(split_hashtag("sunset", &HashSet::new()), vec!["sunset"]);
    }

    // ---- day bucketing ---------------------------------------------------

    /// Hand-derived civil-time oracle table: (RFC 3339 instant, zone,
    /// expected local date). Offsets: Los Angeles −08:00 (PST) / −07:00
    /// (PDT, from 2020-03-08 02:00 local); New York −05:00 (EST) in
    /// January; Tokyo +09:00 year-round.
    #[test]
    fn bucket_day_matches_civil_time_table() {
        let cases = [
            ("2020-05-26T08:00:00Z", "UTC", date(2020, 5, 26)),
            ("2020-03-11T01:30:00+00:00", "America/Los_Angeles", date(2020, 3, 10)),
            // 01:59 PST, still before the 2020 spring-forward instant.
            ("2020-03-08T09:59:00Z", "America/Los_Angeles", date(2020, 3, 8)),
            // 03:30 PDT, just after spring-forward.
            ("2020-03-08T10:30:00Z", "America/Los_Angeles", date(2020, 3, 8)),
            // 23:59 EST on New Year's Eve.
            ("2020-01-01T04:59:00Z", "America/New_York", date(2019, 12, 31)),
            // Midnight JST on New Year's Day.
            ("2020-12-31T15:00:00Z", "Asia/Tokyo", date(2021, 1, 1)),
            // Timestamp already carrying a non-UTC offset.
            ("2020-05-26T01:00:00-07:00", "UTC", date(2020, 5, 26)),
        ];
        for (ts, zone, expected) in cases {
            let parsed = DateTime::parse_from_rfc3339(ts).unwrap();
            let tz = resolve_time_zone(zone).unwrap();
            assert_eq!(bucket_day(parsed, tz), expected, "{ts} in {zone}");
        }
    }

    #[test]
    fn unknown_zone_is_a_config_error() {
        let err = resolve_time_zone("Mars/Olympus_Mons").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    // ---- preprocessing ---------------------------------------------------

    fn la_config() -> PreprocessConfig {
        let mut emoji = HashMap::new();
        emoji.insert("\u{2764}".to_string(), "red heart".to_string());
        PreprocessConfig {
            emoji_map: emoji,
            hashtag_wordlist: wordlist(&["los", "angeles"]),
            ..PreprocessConfig::default()
        }
    }

    #[test]
    fn preprocess_removes_urls_mentions_and_expands_hashtags() {
        let (tokens, clean) = preprocess(
            "I \u{2764} LA @dodgers #LosAngeles http://t.co/xyz",
            &la_config(),
        );
        assert_eq!(tokens, vec!["i", "red", "heart", "la", "los", "angeles"]);
        assert_eq!(clean, "i red heart la los angeles");
    }

    #[test]
    fn unmapped_emoji_passes_through_as_single_token() {
        let (tokens, _) = preprocess("ok \u{1F600}", &PreprocessConfig::default());
        assert_eq!(tokens, vec!["ok", "\u{1F600}"]);
    }

    #[test]
    fn longer_emoji_sequences_win_over_prefixes() {
        let mut config = PreprocessConfig::default();
        config
            .emoji_map
            .insert("\u{2764}".to_string(), "red heart".to_string());
        config
            .emoji_map
            .insert("\u{2764}\u{FE0F}".to_string(), "red heart".to_string());
        let (tokens, _) = preprocess("x \u{2764}\u{FE0F} y", &config);
        assert_eq!(tokens, vec!["x", "red", "heart", "y"]);
    }

    #[test]
    fn mixed_punctuation_and_case_tokenization() {
        let (tokens, _) = preprocess(
            "Don't PANIC!! (really) over-react?",
            &PreprocessConfig::default(),
        );
        assert_eq!(
            tokens,
            vec!["don", "t", "panic", "really", "over", "react"]
        );
    }

    #[test]
    fn empty_and_all_junk_text_yields_no_tokens() {
        let config = PreprocessConfig::default();
        assert!(preprocess("", &config).0.is_empty());
        assert!(preprocess("@user https://a.example/b", &config).0.is_empty());
        assert_eq!(preprocess("@user hi", &config).0, vec!["hi"]);
    }

    proptest! {
        /// Preprocessing is idempotent: cleaning clean text is a no-op.
        #[test]
        fn preprocess_is_idempotent(text in "\\PC{0,80}") {
            let config = la_config();
            let (tokens, clean) = preprocess(&text, &config);
            let (tokens2, clean2) = preprocess(&clean, &config);
            prop_assert_eq!(tokens, tokens2);
            prop_assert_eq!(clean, clean2);
        }

        /// No token carries a hashtag, mention, or URL scheme marker.
        #[test]
        fn no_forbidden_substrings_in_tokens(text in "\\PC{0,80}") {
            let (tokens, _) = preprocess(&text, &la_config());
            for t in &tokens {
                prop_assert!(!t.contains('#'), "token {t:?} contains #");
                prop_assert!(!t.contains('@'), "token {t:?} contains @");
                prop_assert!(!t.contains("://"), "token {t:?} contains ://");
                prop_assert!(!t.is_empty());
            }
        }

        /// Day bucketing preserves chronological order.
        #[test]
        fn bucket_day_is_monotone(mut offsets in proptest::collection::vec(0i64..5_000_000, 1..20)) {
            offsets.sort_unstable();
            let base = DateTime::parse_from_rfc3339("2020-01-01T00:00:00Z").unwrap();
            let tz = resolve_time_zone("America/Los_Angeles").unwrap();
            let days: Vec<NaiveDate> = offsets
                .iter()
                .map(|s| bucket_day(base + chrono::Duration::seconds(*s), tz))
                .collect();
            for pair in days.windows(2) {
                prop_assert!(pair[0] <= pair[1]);
            }
        }
    }

    // ---- parsing ---------------------------------------------------------

    const GOOD_JSONL: &str = concat!(
        "{\"id\":\"42\",\"timestamp\":\"2020-05-26T08:00:00Z\",\"text\":\"hello\"}\n",
        "\n",
        "{\"id\":7,\"timestamp\":\"2020-05-26T09:30:00-07:00\",\"text\":\"bonjour\",\"lang\":\"fr\"}\n",
    );

    #[test]
    fn parse_jsonl_happy_path() {
        let parsed = parse_posts(
            GOOD_JSONL.as_bytes(),
            CorpusFormat::Jsonl,
            MalformedPolicy::Fail,
        )
        .unwrap();
        assert_eq!(parsed.posts.len(), 2);
        assert_eq!(parsed.skipped, 0);
        assert_eq!(parsed.posts[0].id, "42");
        assert_eq!(parsed.posts[0].text, "hello");
        // Numeric ids are accepted and stringified.
        assert_eq!(parsed.posts[1].id, "7");
        assert_eq!(parsed.posts[1].lang.as_deref(), Some("fr"));
    }

    #[test]
    fn parse_jsonl_skip_policy_counts_bad_records() {
        let input = format!("{GOOD_JSONL}not json\n{{\"id\":\"x\"}}\n");
        let parsed = parse_posts(
            input.as_bytes(),
            CorpusFormat::Jsonl,
            MalformedPolicy::Skip,
        )
        .unwrap();
        assert_eq!(parsed.posts.len(), 2);
        assert_eq!(parsed.skipped, 2);
    }

    #[test]
    fn parse_jsonl_fail_policy_reports_line_number() {
        let input = format!("{GOOD_JSONL}not json\n");
        let err = parse_posts(
            input.as_bytes(),
            CorpusFormat::Jsonl,
            MalformedPolicy::Fail,
        )
        .unwrap_err();
        match err {
            Error::Malformed { line, .. } => assert_eq!(line, 4),
            other => panic!("expected Malformed, got {other:?}"),
        }
    }

    #[test]
    fn timestamp_without_offset_is_malformed() {
        let input = "{\"id\":\"1\",\"timestamp\":\"2020-05-26T08:00:00\",\"text\":\"x\"}\n";
        let err = parse_posts(
            input.as_bytes(),
            CorpusFormat::Jsonl,
            MalformedPolicy::Fail,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 1, .. }));
    }

    #[test]
    fn parse_csv_happy_path_and_optional_lang() {
        let input = "id,timestamp,text,lang\n1,2020-05-26T08:00:00Z,hi there,en\n2,2020-05-26T09:00:00Z,\"a, b\",\n";
        let parsed =
            parse_posts(input.as_bytes(), CorpusFormat::Csv, MalformedPolicy::Fail).unwrap();
        assert_eq!(parsed.posts.len(), 2);
        assert_eq!(parsed.posts[0].lang.as_deref(), Some("en"));
        assert_eq!(parsed.posts[1].text, "a, b");
        assert_eq!(parsed.posts[1].lang, None);
    }

    #[test]
    fn parse_csv_missing_required_header_is_invalid() {
        let input = "id,when,text\n1,2020-05-26T08:00:00Z,hi\n";
        let err = parse_posts(input.as_bytes(), CorpusFormat::Csv, MalformedPolicy::Fail)
            .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn parse_csv_bad_row_respects_policy() {
        let input = "id,timestamp,text\n1,not-a-time,hi\n2,2020-05-26T08:00:00Z,ok\n";
        let skipped = parse_posts(input.as_bytes(), CorpusFormat::Csv, MalformedPolicy::Skip)
            .unwrap();
        assert_eq!(skipped.posts.len(), 1);
        assert_eq!(skipped.skipped, 1);
        let err = parse_posts(input.as_bytes(), CorpusFormat::Csv, MalformedPolicy::Fail)
            .unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 2, .. }));
    }

    #[test]
    fn empty_streams_yield_empty_corpora() {
        for format in [CorpusFormat::Jsonl, CorpusFormat::Csv] {
            let parsed =
                parse_posts(&b""[..], format, MalformedPolicy::Fail).unwrap();
            assert!(parsed.posts.is_empty());
            assert_eq!(parsed.skipped, 0);
        }
    }

    // ---- corpus preprocessing -------------------------------------------

    fn post(id: &str, ts: &str, text: &str) -> RawPost {
        RawPost {
            id: id.to_string(),
            timestamp: DateTime::parse_from_rfc3339(ts).unwrap(),
            text: text.to_string(),
            lang: None,
        }
    }

    #[test]
    fn dedupe_exact_drops_same_day_duplicates_only() {
        let corpus = ParsedCorpus {
            posts: vec![
                post("1", "2020-05-26T08:00:00Z", "same text"),
                post("2", "2020-05-26T10:00:00Z", "same text"),
                post("3", "2020-05-27T08:00:00Z", "same text"),
            ],
            skipped: 0,
        };
        let config = PreprocessConfig::default();
        let (kept, stats) = preprocess_corpus(&corpus, &config, true);
        assert_eq!(kept.len(), 2);
        assert_eq!(stats.deduplicated, 1);
        assert_eq!(kept[0].id, "1");
        assert_eq!(kept[1].id, "3");

        let (all, stats) = preprocess_corpus(&corpus, &config, false);
        assert_eq!(all.len(), 3);
        assert_eq!(stats.deduplicated, 0);
    }

    #[test]
    fn preprocess_corpus_buckets_days_in_configured_zone() {
        let corpus = ParsedCorpus {
            posts: vec![post("1", "2020-03-11T01:30:00Z", "night owl")],
            skipped: 0,
        };
        let config = PreprocessConfig {
            time_zone: resolve_time_zone("America/Los_Angeles").unwrap(),
            ..PreprocessConfig::default()
        };
        let (posts, _) = preprocess_corpus(&corpus, &config, false);
        assert_eq!(posts[0].day, date(2020, 3, 10));
        assert_eq!(posts[0].tokens, vec!["night", "owl"]);
    }

    // ---- resource loaders -----------------------------------------------

    #[test]
    fn emoji_map_loader_parses_tsv() {
        let input = "\u{2764}\tred heart\n\n\u{1F600}\tgrinning face\n";
        let map = load_emoji_map(input.as_bytes()).unwrap();
        assert_eq!(map.len(), 2);
        assert_eq!(map["\u{2764}"], "red heart");
    }

    #[test]
    fn emoji_map_loader_rejects_missing_description() {
        let err = load_emoji_map("\u{2764}\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 1, .. }));
    }

    #[test]
    fn word_set_loader_lowercases() {
        let set = load_word_set("Black\nlives\n\nMATTER\n".as_bytes()).unwrap();
        assert_eq!(set, wordlist(&["black", "lives", "matter"]));
    }
}
