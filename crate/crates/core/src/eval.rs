//! Confusion-matrix metrics, per-task fold reports, and a consistency check
//! of published per-fold result rows.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::dataset::Task;
use crate::error::{Error, Result};
use crate::layout::Scheme;

/// Binary confusion counts with the positive class = 1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Metrics {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `num / den` as a percentage in hundredths, rounded half up; 0 when `den` is 0.
fn percent_hundredths(num: u64, den: u64) -> u64 {
    if den == 0 {
        return 0;
    }
    let (num, den) = (u128::from(num), u128::from(den));
    ((2 * num * 10_000 + den) / (2 * den)) as u64
}

/// Formats hundredths of a percent as `12.34`.
pub fn format_hundredths(h: u64) -> String {
    format!("{}.{:02}", h / 100, h % 100)
}

/// Percentage with two decimals, half rounded up.
pub fn format_percent(fraction: f64) -> String {
    let h = (fraction * 10_000.0 + 0.5 + 1e-9).floor().max(0.0) as u64;
    format_hundredths(h)
}

impl Metrics {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    /// 0 when nothing is predicted positive.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    /// 0 when there are no positives.
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall, 0 when both are 0.
    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    /// Accuracy, precision, recall and F1 in hundredths of a percent, computed
    /// exactly from the counts.
    pub fn percent_row(&self) -> [u64; 4] {
        [
            percent_hundredths(self.tp + self.tn, self.total()),
            percent_hundredths(self.tp, self.tp + self.fp),
            percent_hundredths(self.tp, self.tp + self.fn_),
            // 2PR/(P+R) reduces to 2tp/(2tp+fp+fn)
            percent_hundredths(2 * self.tp, 2 * self.tp + self.fp + self.fn_),
        ]
    }
}

pub fn confusion(preds: &[u8], labels: &[u8]) -> Result<Metrics> {
    if preds.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Empty("no predictions"));
    }
    let mut m = Metrics::default();
    for (&p, &l) in preds.iter().zip(labels) {
        match (p != 0, l != 0) {
            (true, true) => m.tp += 1,
            (true, false) => m.fp += 1,
            (false, true) => m.fn_ += 1,
            (false, false) => m.tn += 1,
        }
    }
    Ok(m)
}

/// One published system-run row, values in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedRow {
    pub task: Task,
    pub scheme: Scheme,
    pub fold: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

macro_rules! rows {
    ($task:expr, $scheme:expr; $([$f:expr, $a:expr, $p:expr, $r:expr, $f1:expr]),* $(,)?) => {
        [$(PublishedRow { task: $task, scheme: $scheme, fold: $f, accuracy: $a, precision: $p, recall: $r, f1: $f1 }),*]
    };
}

/// The sixty published rows: six tasks × {design one, design four} × folds 0–4.
pub fn published_rows() -> Vec<PublishedRow> {
    use Scheme::{Four, One};
    use Task::*;
    let mut v = Vec::with_capacity(60);
    v.extend(rows!(EmotionDisclosure, One;
        [0, 68.98, 33.33, 1.29, 2.48], [1, 69.21, 33.33, 0.51, 1.01], [2, 69.21, 33.33, 0.51, 1.01],
        [3, 69.21, 33.33, 0.51, 1.01], [4, 69.21, 33.33, 0.51, 1.01]));
    v.extend(rows!(EmotionDisclosure, Four;
        [0, 68.98, 44.19, 4.88, 8.80], [1, 64.65, 42.99, 47.30, 45.04], [2, 70.94, 55.38, 26.48, 35.83],
        [3, 70.08, 51.66, 35.99, 42.42], [4, 71.34, 59.40, 20.31, 30.27]));
    v.extend(rows!(InformationDisclosure, One;
        [0, 65.93, 59.21, 33.88, 43.10], [1, 66.14, 61.84, 29.13, 39.61], [2, 65.25, 54.65, 51.14, 52.83],
        [3, 63.20, 51.13, 74.95, 60.79], [4, 65.48, 53.63, 68.74, 60.25]));
    v.extend(rows!(InformationDisclosure, Four;
        [0, 67.90, 63.38, 37.19, 46.88], [1, 67.95, 64.31, 35.74, 45.95], [2, 65.80, 66.44, 20.50, 31.33],
        [3, 66.19, 54.61, 66.25, 59.87], [4, 66.75, 55.64, 62.32, 58.79]));
    v.extend(rows!(Support, One;
        [0, 77.95, 64.18, 27.04, 38.05], [1, 78.82, 61.83, 40.25, 48.76], [2, 78.19, 58.10, 46.23, 51.49],
        [3, 76.06, 51.62, 70.13, 59.47], [4, 75.02, 50.12, 63.21, 55.91]));
    v.extend(rows!(Support, Four;
        [0, 78.43, 59.57, 43.08, 50.0], [1, 79.53, 62.95, 44.34, 52.03], [2, 79.13, 70.23, 28.93, 40.98],
        [3, 78.58, 81.94, 18.55, 30.26], [4, 78.41, 56.79, 57.86, 57.32]));
    v.extend(rows!(EmotionSupport, One;
        [0, 73.35, 73.33, 22.22, 34.11], [1, 72.33, 57.97, 40.40, 47.62], [2, 72.64, 59.68, 37.37, 45.96],
        [3, 72.64, 75.0, 18.18, 29.27], [4, 73.27, 62.50, 35.35, 45.16]));
    v.extend(rows!(EmotionSupport, Four;
        [0, 72.10, 61.90, 26.26, 36.88], [1, 72.64, 66.67, 24.24, 35.56], [2, 72.33, 62.79, 27.27, 38.03],
        [3, 75.47, 62.65, 52.53, 57.14], [4, 71.38, 56.45, 35.35, 43.48]));
    v.extend(rows!(InformationSupport, One;
        [0, 66.14, 55.41, 66.13, 60.29], [1, 68.03, 61.96, 45.97, 52.78], [2, 68.03, 57.43, 68.55, 62.5],
        [3, 67.92, 72.34, 27.64, 40.0], [4, 66.67, 66.67, 27.64, 39.08]));
    v.extend(rows!(InformationSupport, Four;
        [0, 71.16, 65.69, 54.03, 59.29], [1, 71.16, 65.69, 54.03, 69.29], [2, 68.65, 58.82, 64.52, 61.54],
        [3, 68.24, 66.67, 35.77, 46.56], [4, 69.18, 69.84, 35.77, 47.31]));
    v.extend(rows!(GeneralSupport, One;
        [0, 78.93, 0.0, 0.0, 0.0], [1, 79.25, 0.0, 0.0, 0.0], [2, 73.27, 19.35, 9.09, 12.37],
        [3, 77.67, 36.84, 10.61, 16.47], [4, 79.56, 66.67, 3.03, 5.80]));
    v.extend(rows!(GeneralSupport, Four;
        [0, 76.73, 16.67, 3.03, 5.13], [1, 79.25, 50.0, 1.52, 2.94], [2, 76.42, 36.36, 18.18, 24.24],
        [3, 80.82, 72.73, 12.12, 20.78], [4, 77.99, 25.0, 3.03, 5.41]));
    v
}

/// Tolerance, in percentage points, for a recomputed F1 against a published
/// two-decimal value.
pub const F1_TOLERANCE_PP: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    /// Recomputed F1 agrees with the published value.
    Consistent { recomputed: f64 },
    /// Precision and recall are both 0 and the published F1 is 0.
    ZeroByConvention,
    /// Recomputed F1 disagrees; reported, not fatal.
    Outlier { recomputed: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowCheck {
    pub row: PublishedRow,
    pub verdict: Verdict,
}

impl RowCheck {
    pub fn is_outlier(&self) -> bool {
        matches!(self.verdict, Verdict::Outlier { .. })
    }
}

/// Recomputes F1 = 2PR/(P+R) for each row and compares with the published F1.
pub fn validate_published_rows(rows: &[PublishedRow]) -> Vec<RowCheck> {
    rows.iter()
        .map(|&row| {
            let (p, r) = (row.precision, row.recall);
            let verdict = if p + r == 0.0 {
                if row.f1 == 0.0 {
                    Verdict::ZeroByConvention
                } else {
                    Verdict::Outlier { recomputed: 0.0 }
                }
            } else {
                let recomputed = 2.0 * p * r / (p + r);
                if (recomputed - row.f1).abs() <= F1_TOLERANCE_PP + 1e-9 {
                    Verdict::Consistent { recomputed }
                } else {
                    Verdict::Outlier { recomputed }
                }
            };
            RowCheck { row, verdict }
        })
        .collect()
}

fn design_label(scheme: Scheme) -> String {
    let word = match scheme {
        Scheme::One => "One",
        Scheme::Two => "Two",
        Scheme::Three => "Three",
        Scheme::Four => "Four",
    };
    format!("Design Option {word}")
}

/// Metrics of every (task, design, fold) run; `None` marks a run with no
/// predictions.
#[derive(Debug, Clone, Default)]
pub struct RunTable {
    pub runs: BTreeMap<(Task, SchemeKey, usize), Option<Metrics>>,
}

/// Orderable wrapper so runs sort by design option.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SchemeKey(u8);

impl From<Scheme> for SchemeKey {
    fn from(s: Scheme) -> Self {
        SchemeKey(match s {
            Scheme::One => 1,
            Scheme::Two => 2,
            Scheme::Three => 3,
            Scheme::Four => 4,
        })
    }
}

impl SchemeKey {
    pub fn scheme(self) -> Scheme {
        match self.0 {
            1 => Scheme::One,
            2 => Scheme::Two,
            3 => Scheme::Three,
            _ => Scheme::Four,
        }
    }
}

impl RunTable {
    pub fn insert(&mut self, task: Task, scheme: Scheme, fold: usize, metrics: Option<Metrics>) {
        self.runs.insert((task, scheme.into(), fold), metrics);
    }

    /// Adds `None` entries for every expected run that is missing.
    pub fn expect_runs(&mut self, tasks: &[Task], schemes: &[Scheme], folds: &[usize]) {
        for &t in tasks {
            for &s in schemes {
                for &f in folds {
                    self.runs.entry((t, s.into(), f)).or_insert(None);
                }
            }
        }
    }

    pub fn tasks(&self) -> Vec<Task> {
        let mut t: Vec<Task> = self.runs.keys().map(|k| k.0).collect();
        t.dedup();
        t
    }

    /// One table per task in the layout of the published results, with a
    /// mean row over the runs present.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        for task in self.tasks() {
            let _ = writeln!(s, "Task: {task}");
            let _ = writeln!(
                s,
                "{:<28} {:>9} {:>10} {:>9} {:>9}",
                "System Runs", "Accuracy", "Precision", "Recall", "F1"
            );
            let mut sums = [0.0f64; 4];
            let mut present = 0usize;
            for ((_, key, fold), m) in self.runs.range((task, SchemeKey(0), 0)..=(task, SchemeKey(u8::MAX), usize::MAX)) {
                let name = format!("{} fold{fold}", design_label(key.scheme()));
                match m {
                    Some(m) => {
                        let row = m.percent_row();
                        let _ = writeln!(
                            s,
                            "{name:<28} {:>8}% {:>9}% {:>8}% {:>8}%",
                            format_hundredths(row[0]),
                            format_hundredths(row[1]),
                            format_hundredths(row[2]),
                            format_hundredths(row[3])
                        );
                        for (acc, v) in sums.iter_mut().zip([m.accuracy(), m.precision(), m.recall(), m.f1()]) {
                            *acc += v;
                        }
                        present += 1;
                    }
                    None => {
                        let _ = writeln!(s, "{name:<28} {:>9} {:>10} {:>9} {:>9}", "n/a", "n/a", "n/a", "n/a");
                    }
                }
            }
            if present > 0 {
                let n = present as f64;
                let _ = writeln!(
                    s,
                    "{:<28} {:>8}% {:>9}% {:>8}% {:>8}%",
                    "mean",
                    format_percent(sums[0] / n),
                    format_percent(sums[1] / n),
                    format_percent(sums[2] / n),
                    format_percent(sums[3] / n)
                );
            } else {
                let _ = writeln!(s, "{:<28} {:>9} {:>10} {:>9} {:>9}", "mean", "n/a", "n/a", "n/a", "n/a");
            }
            s.push('\n');
        }
        s
    }

    /// `task,design,fold,acc,prec,rec,f1` rows, percentages with two decimals.
    pub fn render_csv(&self) -> String {
        let mut s = String::from("task,design,fold,acc,prec,rec,f1\n");
        for ((task, key, fold), m) in &self.runs {
            let cols = match m {
                Some(m) => m.percent_row().map(format_hundredths).join(","),
                None => "n/a,n/a,n/a,n/a".to_string(),
            };
            let _ = writeln!(s, "{task},{},{fold},{cols}", key.scheme().name());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_predictions() {
        let m = confusion(&[1, 1, 0, 0], &[1, 1, 0, 0]).unwrap();
        assert_eq!((m.accuracy(), m.precision(), m.recall(), m.f1()), (1.0, 1.0, 1.0, 1.0));
        assert_eq!(m.percent_row(), [10_000; 4]);
    }

    #[test]
    fn all_negative_predictions_zero_out() {
        let m = confusion(&[0, 0, 0, 0], &[0, 1, 0, 0]).unwrap();
        assert_eq!((m.precision(), m.recall(), m.f1()), (0.0, 0.0, 0.0));
        assert_eq!(m.accuracy(), 0.75);
    }

    #[test]
    fn errors() {
        assert!(confusion(&[1], &[1, 0]).is_err());
        assert!(confusion(&[], &[]).is_err());
    }

    #[test]
    fn f1_from_published_precision_recall() {
        let p = 0.3333;
        let r = 0.0129;
        let f1 = 2.0 * p * r / (p + r);
        assert_eq!(format_percent(f1), "2.48");
    }

    #[test]
    fn rounding_is_half_up() {
        // 1/8 = 12.5% exactly; 1/800 = 0.125% -> 0.13
        assert_eq!(percent_hundredths(1, 800), 13);
        assert_eq!(percent_hundredths(1, 3), 3333);
        assert_eq!(percent_hundredths(2, 3), 6667);
        assert_eq!(format_hundredths(5), "0.05");
        assert_eq!(format_percent(0.00125), "0.13");
    }

    #[test]
    fn published_table_spot_checks() {
        let checks = validate_published_rows(&published_rows());
        assert_eq!(checks.len(), 60);
        let find = |task, scheme, fold| {
            checks
                .iter()
                .find(|c| c.row.task == task && c.row.scheme == scheme && c.row.fold == fold)
                .unwrap()
        };
        match find(Task::InformationDisclosure, Scheme::One, 0).verdict {
            Verdict::Consistent { recomputed } => assert!((recomputed - 43.10).abs() < 0.01),
            v => panic!("{v:?}"),
        }
        match find(Task::Support, Scheme::Four, 3).verdict {
            Verdict::Consistent { recomputed } => assert!((recomputed - 30.26).abs() < 0.01),
            v => panic!("{v:?}"),
        }
        match find(Task::InformationSupport, Scheme::Four, 1).verdict {
            Verdict::Outlier { recomputed } => assert!((recomputed - 59.29).abs() < 0.01),
            v => panic!("{v:?}"),
        }
        assert_eq!(find(Task::GeneralSupport, Scheme::One, 0).verdict, Verdict::ZeroByConvention);
    }

    #[test]
    fn report_marks_missing_runs() {
        let mut t = RunTable::default();
        t.insert(Task::Support, Scheme::One, 0, Some(confusion(&[1, 0], &[1, 0]).unwrap()));
        t.expect_runs(&[Task::Support], &[Scheme::One], &[0, 1]);
        let text = t.render_text();
        assert!(text.contains("Design Option One fold0"));
        assert!(text.contains("100.00%"));
        assert!(text.lines().any(|l| l.starts_with("Design Option One fold1") && l.contains("n/a")));
        let csv = t.render_csv();
        assert!(csv.contains("Support,one,1,n/a,n/a,n/a,n/a"));
        assert!(csv.contains("Support,one,0,100.00,100.00,100.00,100.00"));
    }

    proptest! {
        #[test]
        fn metric_identities(tp in 0u64..500, fp in 0u64..500, fn_ in 0u64..500, tn in 0u64..500) {
            prop_assume!(tp + fp + fn_ + tn > 0);
            let m = Metrics { tp, fp, fn_, tn };
            let acc = (tp + tn) as f64 / (tp + fp + fn_ + tn) as f64;
            prop_assert!((m.accuracy() - acc).abs() < 1e-12);
            for v in [m.accuracy(), m.precision(), m.recall(), m.f1()] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            // F1 lies between min(P, R) and max(P, R)
            let (p, r) = (m.precision(), m.recall());
            prop_assert!(m.f1() <= p.max(r) + 1e-12 && m.f1() + 1e-12 >= p.min(r) || m.f1() == 0.0);
            let exact_f1 = if tp == 0 { 0.0 } else { 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64 };
            prop_assert!((m.f1() - exact_f1).abs() < 1e-12);
        }

        #[test]
        fn swapping_fp_fn_preserves_f1_but_not_precision(tp in 1u64..100, fp in 0u64..100, fn_ in 0u64..100) {
            let a = Metrics { tp, fp, fn_, tn: 0 };
            let b = Metrics { tp, fp: fn_, fn_: fp, tn: 0 };
            prop_assert!((a.f1() - b.f1()).abs() < 1e-12);
            prop_assert_eq!(a.precision() == b.precision(), fp == fn_);
        }
    }
}
