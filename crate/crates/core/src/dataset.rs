//! Corpus records, CSV ingestion, exploratory statistics and k-fold plans.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::{self, Write as _};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Datelike};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// The six binary prediction tasks, in column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Task {
    EmotionDisclosure,
    InformationDisclosure,
    Support,
    EmotionSupport,
    InformationSupport,
    GeneralSupport,
}

impl Task {
    pub const ALL: [Task; 6] = [
        Task::EmotionDisclosure,
        Task::InformationDisclosure,
        Task::Support,
        Task::EmotionSupport,
        Task::InformationSupport,
        Task::GeneralSupport,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Column name used when writing a corpus.
    pub fn column(self) -> &'static str {
        match self {
            Task::EmotionDisclosure => "Emotion_disclosure",
            Task::InformationDisclosure => "Information_disclosure",
            Task::Support => "Support",
            Task::EmotionSupport => "Emotion_support",
            Task::InformationSupport => "Information_support",
            Task::GeneralSupport => "General_support",
        }
    }

    /// Normalized header spellings accepted for this task's column.
    fn aliases(self) -> &'static [&'static str] {
        match self {
            Task::EmotionDisclosure => &["emotiondisclosure", "emotionaldisclosure", "emodisclosure"],
            Task::InformationDisclosure => &["informationdisclosure", "infodisclosure"],
            Task::Support => &["support"],
            Task::EmotionSupport => &[
                "emotionsupport",
                "emmotionsupport",
                "emotionalsupport",
                "emosupport",
            ],
            Task::InformationSupport => &["informationsupport", "infosupport"],
            Task::GeneralSupport => &["generalsupport"],
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = normalize_header(s);
        Task::ALL
            .into_iter()
            .find(|t| t.aliases().contains(&key.as_str()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown task `{s}`")))
    }
}

/// One corpus row: ten attributes plus optional task labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub sentenceid: String,
    pub author: String,
    pub nchar: u64,
    pub created_utc: i64,
    pub score: i64,
    pub subreddit: String,
    pub label: String,
    pub full_text: String,
    pub wordcount: u64,
    pub id: String,
    /// Indexed by [`Task::index`]; every value is 0 or 1.
    pub task_labels: Option<[u8; 6]>,
}

impl Record {
    /// A record carrying only text; the other attributes are filled with
    /// consistent placeholders.
    pub fn from_text(sentenceid: impl Into<String>, full_text: impl Into<String>) -> Self {
        let full_text = full_text.into();
        Record {
            sentenceid: sentenceid.into(),
            author: String::new(),
            nchar: full_text.chars().count() as u64,
            created_utc: 1_514_764_800,
            score: 0,
            subreddit: String::new(),
            label: String::new(),
            wordcount: tokenize(&full_text).len() as u64,
            full_text,
            id: String::new(),
            task_labels: None,
        }
    }

    pub fn task_label(&self, task: Task) -> Option<u8> {
        self.task_labels.map(|l| l[task.index()])
    }

    pub fn token_count(&self) -> usize {
        tokenize(&self.full_text).len()
    }
}

/// Splits on runs of Unicode whitespace; punctuation stays attached.
pub fn tokenize(full_text: &str) -> Vec<&str> {
    full_text.split_whitespace().collect()
}

const ATTRIBUTE_COLUMNS: [&str; 10] = [
    "sentenceid",
    "author",
    "nchar",
    "created_utc",
    "score",
    "subreddit",
    "label",
    "full_text",
    "wordcount",
    "id",
];

fn normalize_header(name: &str) -> String {
    name.trim()
        .trim_start_matches('\u{feff}')
        .chars()
        .filter(|c| *c != '_' && *c != ' ' && *c != '-')
        .flat_map(char::to_lowercase)
        .collect()
}

struct ColumnMap {
    attrs: [usize; 10],
    tasks: Option<[usize; 6]>,
}

impl ColumnMap {
    fn resolve(headers: &csv::StringRecord, has_labels: bool) -> Result<Self> {
        let normalized: Vec<String> = headers.iter().map(normalize_header).collect();
        let find = |aliases: &[&str]| normalized.iter().position(|h| aliases.contains(&h.as_str()));

        let mut attrs = [0; 10];
        for (slot, name) in attrs.iter_mut().zip(ATTRIBUTE_COLUMNS) {
            let key = normalize_header(name);
            *slot = find(&[key.as_str()]).ok_or_else(|| Error::MissingColumn(name.to_string()))?;
        }
        let tasks = if has_labels {
            let mut cols = [0; 6];
            for (slot, task) in cols.iter_mut().zip(Task::ALL) {
                *slot = find(task.aliases())
                    .ok_or_else(|| Error::MissingColumn(task.column().to_string()))?;
            }
            Some(cols)
        } else {
            None
        };
        Ok(ColumnMap { attrs, tasks })
    }
}

fn row_error(row: usize, message: impl Into<String>) -> Error {
    Error::Row {
        row,
        message: message.into(),
    }
}

fn parse_int<T: FromStr>(raw: &str, column: &str, row: usize) -> Result<T> {
    let raw = raw.trim();
    if let Ok(v) = raw.parse::<T>() {
        return Ok(v);
    }
    // Exports sometimes carry integral values as "1532634562.0".
    if let Some(int_part) = raw.strip_suffix(".0") {
        if let Ok(v) = int_part.parse::<T>() {
            return Ok(v);
        }
    }
    Err(row_error(
        row,
        format!("column `{column}`: invalid value `{raw}` for this integer column"),
    ))
}

fn parse_record(fields: &csv::StringRecord, cols: &ColumnMap, row: usize) -> Result<Record> {
    let get = |i: usize| fields.get(cols.attrs[i]).unwrap_or("");
    let created_utc: i64 = parse_int(get(3), "created_utc", row)?;
    if DateTime::from_timestamp(created_utc, 0).is_none() {
        return Err(row_error(row, format!("created_utc {created_utc} is not a valid date")));
    }
    let task_labels = match cols.tasks {
        None => None,
        Some(task_cols) => {
            let mut labels = [0u8; 6];
            for ((slot, col), task) in labels.iter_mut().zip(task_cols).zip(Task::ALL) {
                let raw = fields.get(col).unwrap_or("").trim();
                *slot = match raw {
                    "0" | "0.0" => 0,
                    "1" | "1.0" => 1,
                    other => {
                        return Err(row_error(
                            row,
                            format!("label `{task}` must be 0 or 1, got `{other}`"),
                        ))
                    }
                };
            }
            Some(labels)
        }
    };
    Ok(Record {
        sentenceid: get(0).to_string(),
        author: get(1).to_string(),
        nchar: parse_int(get(2), "nchar", row)?,
        created_utc,
        score: parse_int(get(4), "score", row)?,
        subreddit: get(5).to_string(),
        label: get(6).to_string(),
        full_text: get(7).to_string(),
        wordcount: parse_int(get(8), "wordcount", row)?,
        id: get(9).to_string(),
        task_labels,
    })
}

/// Parses a corpus from any reader. Columns are matched by name, not position.
pub fn parse_corpus_from<R: Read>(reader: R, has_labels: bool) -> Result<Vec<Record>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = ColumnMap::resolve(&headers, has_labels)?;
    let mut records = Vec::new();
    for (i, result) in rdr.records().enumerate() {
        let row = i + 1;
        let fields = result?;
        records.push(parse_record(&fields, &cols, row)?);
    }
    Ok(records)
}

pub fn parse_corpus(path: &Path, has_labels: bool) -> Result<Vec<Record>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus_from(file, has_labels)
}

/// Writes records in canonical column order; labels are written when every
/// record carries them.
pub fn write_corpus_to<W: Write>(writer: W, records: &[Record]) -> Result<()> {
    let labeled = !records.is_empty() && records.iter().all(|r| r.task_labels.is_some());
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = ATTRIBUTE_COLUMNS.to_vec();
    if labeled {
        header.extend(Task::ALL.iter().map(|t| t.column()));
    }
    wtr.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.sentenceid.clone(),
            r.author.clone(),
            r.nchar.to_string(),
            r.created_utc.to_string(),
            r.score.to_string(),
            r.subreddit.clone(),
            r.label.clone(),
            r.full_text.clone(),
            r.wordcount.to_string(),
            r.id.clone(),
        ];
        if let (true, Some(labels)) = (labeled, r.task_labels) {
            row.extend(labels.iter().map(u8::to_string));
        }
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn write_corpus(path: &Path, records: &[Record]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_corpus_to(file, records)
}

/// Non-fatal data issues: wordcount disagreeing with the tokenizer, and
/// timestamps outside the 2017–2018 span of the reference corpus.
pub fn corpus_warnings(records: &[Record]) -> Vec<String> {
    let mut out = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let tokens = r.token_count() as u64;
        if tokens != r.wordcount {
            out.push(format!(
                "row {}: wordcount column is {} but full_text has {} tokens",
                i + 1,
                r.wordcount,
                tokens
            ));
        }
        if let Some(dt) = DateTime::from_timestamp(r.created_utc, 0) {
            if !(2017..=2018).contains(&dt.year()) {
                out.push(format!("row {}: created_utc falls in {}", i + 1, dt.year()));
            }
        }
    }
    out
}

/// Exploratory statistics over a corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatsReport {
    pub row_count: usize,
    pub unique_ids: usize,
    pub unique_authors: usize,
    pub max_nchar: u64,
    pub max_wordcount: u64,
    pub score_min: i64,
    pub score_max: i64,
    pub unique_scores: usize,
    pub unique_labels: usize,
    pub subreddit_values: Vec<String>,
    /// Token count of full_text → number of records.
    pub length_histogram: BTreeMap<usize, usize>,
    /// Records whose wordcount column disagrees with the token count.
    pub wordcount_mismatches: usize,
}

pub fn corpus_stats(records: &[Record]) -> Result<StatsReport> {
    if records.is_empty() {
        return Err(Error::Empty("corpus has no records"));
    }
    let unique = |f: fn(&Record) -> &str| records.iter().map(f).collect::<HashSet<_>>().len();
    let mut histogram = BTreeMap::new();
    let mut mismatches = 0;
    for r in records {
        let n = r.token_count();
        *histogram.entry(n).or_insert(0) += 1;
        if n as u64 != r.wordcount {
            mismatches += 1;
        }
    }
    Ok(StatsReport {
        row_count: records.len(),
        unique_ids: unique(|r| &r.id),
        unique_authors: unique(|r| &r.author),
        max_nchar: records.iter().map(|r| r.nchar).max().unwrap_or(0),
        max_wordcount: records.iter().map(|r| r.wordcount).max().unwrap_or(0),
        score_min: records.iter().map(|r| r.score).min().unwrap_or(0),
        score_max: records.iter().map(|r| r.score).max().unwrap_or(0),
        unique_scores: records.iter().map(|r| r.score).collect::<HashSet<_>>().len(),
        unique_labels: unique(|r| &r.label),
        subreddit_values: records
            .iter()
            .map(|r| r.subreddit.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
        length_histogram: histogram,
        wordcount_mismatches: mismatches,
    })
}

impl StatsReport {
    /// Fraction of records with more tokens than `cut`.
    pub fn truncated_fraction(&self, cut: usize) -> f64 {
        let over: usize = self.length_histogram.range(cut + 1..).map(|(_, c)| c).sum();
        over as f64 / self.row_count as f64
    }

    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "row_count={}", self.row_count);
        let _ = writeln!(s, "unique_ids={}", self.unique_ids);
        let _ = writeln!(s, "unique_authors={}", self.unique_authors);
        let _ = writeln!(s, "max_nchar={}", self.max_nchar);
        let _ = writeln!(s, "max_wordcount={}", self.max_wordcount);
        let _ = writeln!(s, "score_min={}", self.score_min);
        let _ = writeln!(s, "score_max={}", self.score_max);
        let _ = writeln!(s, "unique_scores={}", self.unique_scores);
        let _ = writeln!(s, "unique_labels={}", self.unique_labels);
        let _ = writeln!(s, "subreddit_values={}", self.subreddit_values.join("|"));
        let _ = writeln!(s, "wordcount_mismatches={}", self.wordcount_mismatches);
        for cut in [40, 42, 49] {
            let _ = writeln!(s, "truncated_at_{cut}={:.6}", self.truncated_fraction(cut));
        }
        for (len, count) in &self.length_histogram {
            let _ = writeln!(s, "histogram.{len}={count}");
        }
        s
    }

    /// Human-readable block with a text bar chart of the length histogram.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "rows              {}", self.row_count);
        let _ = writeln!(s, "unique ids        {}", self.unique_ids);
        let _ = writeln!(s, "unique authors    {}", self.unique_authors);
        let _ = writeln!(s, "max nchar         {}", self.max_nchar);
        let _ = writeln!(s, "max wordcount     {}", self.max_wordcount);
        let _ = writeln!(
            s,
            "score range       [{}, {}] ({} unique)",
            self.score_min, self.score_max, self.unique_scores
        );
        let _ = writeln!(s, "unique labels     {}", self.unique_labels);
        let _ = writeln!(s, "subreddits        {}", self.subreddit_values.join(", "));
        let _ = writeln!(s, "wordcount mismatches {}", self.wordcount_mismatches);
        for cut in [40, 42, 49] {
            let _ = writeln!(
                s,
                "cut at {cut:<3} words  {:.2}%",
                100.0 * self.truncated_fraction(cut)
            );
        }
        let _ = writeln!(s, "\nsentence length histogram (tokens: records)");
        let peak = self.length_histogram.values().copied().max().unwrap_or(1).max(1);
        for (len, count) in &self.length_histogram {
            let bar = (count * 50).div_ceil(peak);
            let _ = writeln!(s, "{len:>5} {count:>7} {}", "#".repeat(bar));
        }
        s
    }
}

/// Assignment of record indices to `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    /// `assignment[i]` is the fold of record `i`.
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn validation(&self, fold: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn training(&self, fold: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.assignment[i] != fold).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }

    /// Two-column text: `index,fold` per line.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.len() * 8);
        for (i, f) in self.assignment.iter().enumerate() {
            let _ = writeln!(s, "{i},{f}");
        }
        s
    }

    pub fn from_text(text: &str, k: usize) -> std::result::Result<Self, String> {
        let mut pairs = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (a, b) = line
                .split_once(',')
                .ok_or_else(|| format!("line {}: expected `index,fold`", line_no + 1))?;
            let idx: usize = a.trim().parse().map_err(|_| format!("line {}: bad index", line_no + 1))?;
            let fold: usize = b.trim().parse().map_err(|_| format!("line {}: bad fold", line_no + 1))?;
            if fold >= k {
                return Err(format!("line {}: fold {fold} out of range for k={k}", line_no + 1));
            }
            pairs.push((idx, fold));
        }
        pairs.sort_unstable();
        if pairs.iter().enumerate().any(|(i, (idx, _))| *idx != i) {
            return Err("indices must cover 0..n exactly once".into());
        }
        Ok(FoldPlan {
            k,
            assignment: pairs.into_iter().map(|(_, f)| f).collect(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path, k: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        FoldPlan::from_text(&text, k).map_err(|m| Error::format(path, m))
    }
}

fn check_fold_args(n: usize, k: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Empty("cannot split an empty corpus"));
    }
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "k={k} exceeds the record count {n}"
        )));
    }
    Ok(())
}

fn round_robin(order: &[usize], k: usize) -> FoldPlan {
    let mut assignment = vec![0; order.len()];
    for (pos, &idx) in order.iter().enumerate() {
        assignment[idx] = pos % k;
    }
    FoldPlan { k, assignment }
}

/// Seeded permutation followed by round-robin assignment.
pub fn make_folds(records: &[Record], k: usize, seed: u64) -> Result<FoldPlan> {
    check_fold_args(records.len(), k)?;
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(round_robin(&order, k))
}

/// Like [`make_folds`], but records are grouped by their label for `task`
/// before the round-robin so each fold sees a similar class ratio.
pub fn make_folds_stratified(records: &[Record], task: Task, k: usize, seed: u64) -> Result<FoldPlan> {
    check_fold_args(records.len(), k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = Vec::with_capacity(records.len());
    for class in [0u8, 1] {
        let mut group: Vec<usize> = (0..records.len())
            .filter(|&i| records[i].task_label(task).unwrap_or(0) == class)
            .collect();
        group.shuffle(&mut rng);
        order.extend(group);
    }
    Ok(round_robin(&order, k))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER16: &str = "sentenceid,author,nchar,created_utc,score,subreddit,label,full_text,wordcount,id,Emotion_disclosure,Information_disclosure,Support,Emmotion_support,Information_support,General_support\n";

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("If it were me,"), ["If", "it", "were", "me,"]);
        assert!(tokenize("").is_empty());
        assert!(tokenize(" \t\n ").is_empty());
        assert_eq!(tokenize("a  b\tc"), ["a", "b", "c"]);
        assert_eq!(tokenize("a\u{3000}b"), ["a", "b"]);
    }

    #[test]
    fn parses_labeled_rows_with_quoting() {
        let csv = format!(
            "{HEADER16}s1,alice,12,1532634562,5,offmychest,husband,\"hi, there\nfriend\",3,t1,1,0,1,0,0,1\n"
        );
        let recs = parse_corpus_from(csv.as_bytes(), true).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].full_text, "hi, there\nfriend");
        assert_eq!(recs[0].task_labels, Some([1, 0, 1, 0, 0, 1]));
        assert_eq!(recs[0].task_label(Task::GeneralSupport), Some(1));
    }

    #[test]
    fn header_order_does_not_matter() {
        let csv = "id,full_text,wordcount,label,subreddit,score,created_utc,nchar,author,sentenceid\nX,a b,2,wife,offmychest,-3,1500000000,3,bob,S\n";
        let recs = parse_corpus_from(csv.as_bytes(), false).unwrap();
        assert_eq!(recs[0].id, "X");
        assert_eq!(recs[0].score, -3);
        assert_eq!(recs[0].sentenceid, "S");
        assert!(recs[0].task_labels.is_none());
    }

    #[test]
    fn header_only_is_empty() {
        let recs = parse_corpus_from(HEADER16.as_bytes(), true).unwrap();
        assert!(recs.is_empty());
    }

    #[test]
    fn missing_column_is_named() {
        let csv = "sentenceid,author,nchar,created_utc,score,subreddit,label,full_text,id\n";
        match parse_corpus_from(csv.as_bytes(), false) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "wordcount"),
            other => panic!("unexpected {other:?}"),
        }
        match parse_corpus_from(HEADER16.replace(",General_support", "").as_bytes(), true) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "General_support"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_numbers_and_labels_report_row() {
        let csv = format!("{HEADER16}a,b,1,1500000000,1,s,l,t,1,i,0,0,0,0,0,0\na,b,x,1500000000,1,s,l,t,1,i,0,0,0,0,0,0\n");
        match parse_corpus_from(csv.as_bytes(), true) {
            Err(Error::Row { row, message }) => {
                assert_eq!(row, 2);
                assert!(message.contains("nchar"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let csv = format!("{HEADER16}a,b,-1,1500000000,1,s,l,t,1,i,0,0,0,0,0,0\n");
        assert!(matches!(parse_corpus_from(csv.as_bytes(), true), Err(Error::Row { row: 1, .. })));
        let csv = format!("{HEADER16}a,b,1,1500000000,1,s,l,t,1,i,0,0,2,0,0,0\n");
        match parse_corpus_from(csv.as_bytes(), true) {
            Err(Error::Row { message, .. }) => assert!(message.contains("Support")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn stats_single_record() {
        let r = Record::from_text("s", "a b");
        let s = corpus_stats(&[r]).unwrap();
        assert_eq!(s.row_count, 1);
        assert_eq!(s.length_histogram, BTreeMap::from([(2, 1)]));
        assert!(matches!(corpus_stats(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn stats_counts_uniques() {
        let mut a = Record::from_text("1", "x y z");
        a.id = "t1".into();
        a.author = "ann".into();
        a.score = -44;
        a.label = "wife".into();
        a.subreddit = "offmychest".into();
        let mut b = a.clone();
        b.sentenceid = "2".into();
        b.score = 1838;
        b.author = "bo".into();
        b.subreddit = "CasualConversation".into();
        let s = corpus_stats(&[a, b]).unwrap();
        assert_eq!(s.unique_ids, 1);
        assert_eq!(s.unique_authors, 2);
        assert_eq!((s.score_min, s.score_max, s.unique_scores), (-44, 1838, 2));
        assert_eq!(s.subreddit_values, ["CasualConversation", "offmychest"]);
        assert_eq!(s.unique_labels, 1);
    }

    #[test]
    fn warnings_flag_mismatch_and_date() {
        let mut r = Record::from_text("1", "a b c");
        r.wordcount = 4;
        r.created_utc = 0;
        let w = corpus_warnings(&[r]);
        assert_eq!(w.len(), 2);
    }

    #[test]
    fn folds_examples() {
        let recs: Vec<Record> = (0..12_860).map(|i| Record::from_text(i.to_string(), "")).collect();
        let plan = make_folds(&recs, 10, 7).unwrap();
        assert!(plan.sizes().iter().all(|&s| s == 1286));
        assert_eq!(plan, make_folds(&recs, 10, 7).unwrap());
        assert_ne!(plan, make_folds(&recs, 10, 8).unwrap());

        let five = &recs[..5];
        assert_eq!(make_folds(five, 5, 1).unwrap().sizes(), vec![1; 5]);
        assert!(make_folds(five, 6, 1).is_err());
        assert!(make_folds(five, 1, 1).is_err());
    }

    #[test]
    fn fold_plan_text_round_trip() {
        let recs: Vec<Record> = (0..23).map(|i| Record::from_text(i.to_string(), "")).collect();
        let plan = make_folds(&recs, 4, 3).unwrap();
        assert_eq!(FoldPlan::from_text(&plan.to_text(), 4).unwrap(), plan);
        assert!(FoldPlan::from_text("0,0\n2,1\n", 2).is_err());
        assert!(FoldPlan::from_text("0,5\n", 2).is_err());
    }

    #[test]
    fn stratified_folds_balance_classes() {
        let recs: Vec<Record> = (0..40)
            .map(|i| {
                let mut r = Record::from_text(i.to_string(), "");
                r.task_labels = Some([u8::from(i < 10), 0, 0, 0, 0, 0]);
                r
            })
            .collect();
        let plan = make_folds_stratified(&recs, Task::EmotionDisclosure, 5, 2).unwrap();
        for f in 0..5 {
            let pos = plan
                .validation(f)
                .iter()
                .filter(|&&i| recs[i].task_labels.unwrap()[0] == 1)
                .count();
            assert_eq!(pos, 2);
        }
    }

    #[test]
    fn task_names_parse() {
        assert_eq!("Emmotion_support".parse::<Task>().unwrap(), Task::EmotionSupport);
        assert_eq!("general-support".parse::<Task>().unwrap(), Task::GeneralSupport);
        assert!("nope".parse::<Task>().is_err());
    }
}
