//! Character and word error rates, `(S + D + I) / N`, and their aggregation
//! over runs.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Edit operations turning a hypothesis into its reference.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    /// Reference length.
    pub reference_len: usize,
}

impl ErrorCounts {
    pub fn total(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    pub fn rate(&self) -> Result<f64> {
        match (self.reference_len, self.total()) {
            (0, 0) => Ok(0.0),
            (0, _) => Err(Error::UndefinedRate),
            (n, e) => Ok(e as f64 / n as f64),
        }
    }
}

impl std::ops::Add for ErrorCounts {
    type Output = ErrorCounts;

    fn add(self, o: ErrorCounts) -> ErrorCounts {
        ErrorCounts {
            substitutions: self.substitutions + o.substitutions,
            deletions: self.deletions + o.deletions,
            insertions: self.insertions + o.insertions,
            reference_len: self.reference_len + o.reference_len,
        }
    }
}

impl std::iter::Sum for ErrorCounts {
    fn sum<I: Iterator<Item = ErrorCounts>>(iter: I) -> Self {
        iter.fold(ErrorCounts::default(), |a, b| a + b)
    }
}

/// Unit-cost Levenshtein alignment of `hyp` onto `reference`.
///
/// A deletion removes a hypothesis token, an insertion adds a reference
/// token. The split of the total is taken along one optimal path,
/// preferring substitution (or match), then deletion, then insertion.
pub fn edit_distance<T: PartialEq>(hyp: &[T], reference: &[T]) -> ErrorCounts {
    let (m, n) = (hyp.len(), reference.len());
    let cols = n + 1;
    let mut d = vec![0usize; (m + 1) * cols];
    for i in 0..=m {
        d[i * cols] = i;
    }
    for (j, v) in d.iter_mut().enumerate().take(cols) {
        *v = j;
    }
    for i in 1..=m {
        for j in 1..=n {
            let cost = usize::from(hyp[i - 1] != reference[j - 1]);
            let sub = d[(i - 1) * cols + j - 1] + cost;
            let del = d[(i - 1) * cols + j] + 1;
            let ins = d[i * cols + j - 1] + 1;
            d[i * cols + j] = sub.min(del).min(ins);
        }
    }
    let mut counts = ErrorCounts {
        reference_len: n,
        ..Default::default()
    };
    let (mut i, mut j) = (m, n);
    while i > 0 || j > 0 {
        let here = d[i * cols + j];
        if i > 0 && j > 0 {
            let cost = usize::from(hyp[i - 1] != reference[j - 1]);
            if d[(i - 1) * cols + j - 1] + cost == here {
                counts.substitutions += cost;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[(i - 1) * cols + j] + 1 == here {
            counts.deletions += 1;
            i -= 1;
        } else {
            counts.insertions += 1;
            j -= 1;
        }
    }
    counts
}

pub fn char_counts(hyp: &str, reference: &str) -> ErrorCounts {
    let h: Vec<char> = hyp.chars().collect();
    let r: Vec<char> = reference.chars().collect();
    edit_distance(&h, &r)
}

/// Words are runs of non-whitespace; case and punctuation are kept.
pub fn word_counts(hyp: &str, reference: &str) -> ErrorCounts {
    let h: Vec<&str> = hyp.split_whitespace().collect();
    let r: Vec<&str> = reference.split_whitespace().collect();
    edit_distance(&h, &r)
}

pub fn cer(hyp: &str, reference: &str) -> Result<f64> {
    char_counts(hyp, reference).rate()
}

pub fn wer(hyp: &str, reference: &str) -> Result<f64> {
    word_counts(hyp, reference).rate()
}

/// How per-line errors are pooled over a test set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Total edits over total reference length.
    #[default]
    Micro,
    /// Mean of per-line rates.
    Macro,
}

/// Corpus-level rate from per-line counts.
pub fn corpus_rate(lines: &[ErrorCounts], mode: Averaging) -> Result<f64> {
    match mode {
        Averaging::Micro => lines.iter().copied().sum::<ErrorCounts>().rate(),
        Averaging::Macro => {
            if lines.is_empty() {
                return Ok(0.0);
            }
            let rates = lines.iter().map(|c| c.rate()).collect::<Result<Vec<_>>>()?;
            Ok(rates.iter().sum::<f64>() / rates.len() as f64)
        }
    }
}

/// Split label of a results row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalSplit {
    /// All test lines, in- and out-of-domain together.
    Pooled,
    Cv,
    TestInDomain,
    TestOutOfDomain,
}

impl EvalSplit {
    pub fn as_str(&self) -> &'static str {
        match self {
            EvalSplit::Pooled => "pooled",
            EvalSplit::Cv => "cv",
            EvalSplit::TestInDomain => "test_in_domain",
            EvalSplit::TestOutOfDomain => "test_out_of_domain",
        }
    }

    pub fn includes(&self, split: crate::textdata::Split) -> bool {
        use crate::textdata::Split;
        match self {
            EvalSplit::Pooled => split.is_test(),
            EvalSplit::Cv => split == Split::Cv,
            EvalSplit::TestInDomain => split == Split::TestInDomain,
            EvalSplit::TestOutOfDomain => split == Split::TestOutOfDomain,
        }
    }
}

impl std::str::FromStr for EvalSplit {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pooled" => Ok(EvalSplit::Pooled),
            "cv" => Ok(EvalSplit::Cv),
            "test_in_domain" => Ok(EvalSplit::TestInDomain),
            "test_out_of_domain" => Ok(EvalSplit::TestOutOfDomain),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

impl std::fmt::Display for EvalSplit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One checkpoint's scores on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: String,
    pub fold: u32,
    pub run: u32,
    pub split: EvalSplit,
    #[serde(serialize_with = "six_digits")]
    pub cer: f64,
    #[serde(serialize_with = "six_digits")]
    pub wer: f64,
}

pub const RESULTS_HEADER: [&str; 6] = ["config", "fold", "run", "split", "cer", "wer"];

fn six_digits<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{v:.6}"))
}

pub fn write_results<W: Write>(out: W, results: &[RunResult]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in results {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<results>", e))?;
    Ok(())
}

pub fn read_results<R: Read>(input: R) -> Result<Vec<RunResult>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let want = RESULTS_HEADER;
    if headers.iter().collect::<Vec<_>>() != want {
        return Err(Error::Csv(csv::Error::from(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("results header must be {}", want.join(",")),
        ))));
    }
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let r: RunResult = row?;
        if !(r.cer.is_finite() && r.cer >= 0.0 && r.wer.is_finite() && r.wer >= 0.0) {
            return Err(Error::InvalidSample(format!(
                "{} fold {} run {}: rates must be finite and >= 0",
                r.config, r.fold, r.run
            )));
        }
        out.push(r);
    }
    Ok(out)
}

pub fn read_results_file(path: impl AsRef<Path>) -> Result<Vec<RunResult>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_results(std::io::BufReader::new(f))
}

/// Mean and sample standard deviation of a config's runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub config: String,
    pub n: usize,
    pub mean_cer: f64,
    pub std_cer: f64,
    pub mean_wer: f64,
    pub std_wer: f64,
}

impl Aggregate {
    /// With a single run the standard deviation is reported as 0.
    pub fn is_degenerate(&self) -> bool {
        self.n < 2
    }
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Aggregates the rows of `config` on `split`, in (fold, run) order.
pub fn aggregate(results: &[RunResult], config: &str, split: EvalSplit) -> Result<Aggregate> {
    let mut rows: Vec<&RunResult> = results
        .iter()
        .filter(|r| r.config == config && r.split == split)
        .collect();
    if rows.is_empty() {
        return Err(Error::EmptySelection(config.to_string()));
    }
    rows.sort_by_key(|r| (r.fold, r.run));
    let cers: Vec<f64> = rows.iter().map(|r| r.cer).collect();
    let wers: Vec<f64> = rows.iter().map(|r| r.wer).collect();
    let (mean_cer, std_cer) = mean_std(&cers);
    let (mean_wer, std_wer) = mean_std(&wers);
    Ok(Aggregate {
        config: config.to_string(),
        n: rows.len(),
        mean_cer,
        std_cer,
        mean_wer,
        std_wer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive search over every alignment; exponential, short inputs only.
    fn brute_distance(a: &[char], b: &[char]) -> usize {
        match (a.split_first(), b.split_first()) {
            (None, _) => b.len(),
            (_, None) => a.len(),
            (Some((x, ar)), Some((y, br))) => {
                let sub = brute_distance(ar, br) + usize::from(x != y);
                let del = brute_distance(ar, b) + 1;
                let ins = brute_distance(a, br) + 1;
                sub.min(del).min(ins)
            }
        }
    }

    #[test]
    fn examples() {
        let same = char_counts("abc", "abc");
        assert_eq!(same.total(), 0);
        assert_eq!(same.rate().unwrap(), 0.0);

        let k = char_counts("kitten", "sitting");
        assert_eq!(k.total(), 3);
        assert_eq!(k.reference_len, 7);
        assert_eq!(k.rate().unwrap(), 3.0 / 7.0);
        assert_eq!((k.substitutions, k.insertions, k.deletions), (2, 1, 0));

        let i = char_counts("abc", "abcd");
        assert_eq!((i.insertions, i.deletions, i.substitutions, i.reference_len), (1, 0, 0, 4));
        assert_eq!(i.rate().unwrap(), 0.25);

        assert_eq!(cer("abxd", "abcd").unwrap(), 0.25);
        assert_eq!(wer("jonatan hette", "jonatan hette inte").unwrap(), 1.0 / 3.0);
        assert_eq!(wer("a  b\tc", "a b c").unwrap(), 0.0);
        assert_eq!(wer("A b", "a b").unwrap(), 0.5);
    }

    #[test]
    fn empty_reference() {
        assert_eq!(cer("", "").unwrap(), 0.0);
        assert!(matches!(cer("x", ""), Err(Error::UndefinedRate)));
        assert!(matches!(wer("x", "  "), Err(Error::UndefinedRate)));
        assert_eq!(cer("", "ab").unwrap(), 1.0);
    }

    #[test]
    fn corpus_averaging() {
        let lines = [char_counts("a", "ab"), char_counts("abcd", "abcd")];
        assert_eq!(corpus_rate(&lines, Averaging::Micro).unwrap(), 1.0 / 6.0);
        assert_eq!(corpus_rate(&lines, Averaging::Macro).unwrap(), 0.25);
    }

    #[test]
    fn aggregate_examples() {
        let row = |run, cer, wer| RunResult {
            config: "c".into(),
            fold: 0,
            run,
            split: EvalSplit::Pooled,
            cer,
            wer,
        };
        let one = aggregate(&[row(0, 0.3, 0.5)], "c", EvalSplit::Pooled).unwrap();
        assert_eq!((one.mean_cer, one.std_cer, one.mean_wer), (0.3, 0.0, 0.5));
        assert!(one.is_degenerate());
        let two = aggregate(&[row(0, 0.2, 0.5), row(1, 0.4, 0.5)], "c", EvalSplit::Pooled).unwrap();
        assert!((two.mean_cer - 0.3).abs() < 1e-15);
        assert!((two.std_cer - 0.1414213562).abs() < 1e-9);
        assert!(matches!(
            aggregate(&[row(0, 0.2, 0.5)], "d", EvalSplit::Pooled),
            Err(Error::EmptySelection(_))
        ));
    }

    #[test]
    fn results_csv_format() {
        let rows = vec![RunResult {
            config: "rot1.5".into(),
            fold: 2,
            run: 29,
            split: EvalSplit::TestOutOfDomain,
            cer: 0.30481234567,
            wer: 1.25,
        }];
        let mut buf = Vec::new();
        write_results(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "config,fold,run,split,cer,wer\nrot1.5,2,29,test_out_of_domain,0.304812,1.250000\n"
        );
        let back = read_results(text.as_bytes()).unwrap();
        assert_eq!(back[0].cer, 0.304812);
        assert!(read_results("a,b\n1,2\n".as_bytes()).is_err());
        assert!(read_results("config,fold,run,split,cer,wer\nx,0,0,pooled,-1,0\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn matches_exhaustive_alignment(a in "[abc]{0,6}", b in "[abc]{0,6}") {
            let (va, vb): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
            let c = edit_distance(&va, &vb);
            prop_assert_eq!(c.total(), brute_distance(&va, &vb));
            // every hypothesis token is matched, substituted or deleted
            prop_assert!(c.substitutions + c.deletions <= va.len());
            prop_assert!(c.substitutions + c.insertions <= vb.len());
            prop_assert_eq!(va.len() - c.deletions + c.insertions, vb.len());
        }

        #[test]
        fn symmetric_with_swapped_indels(a in "[abcd]{0,10}", b in "[abcd]{0,10}") {
            let ab = char_counts(&a, &b);
            let ba = char_counts(&b, &a);
            prop_assert_eq!(ab.total(), ba.total());
            prop_assert_eq!(ab.deletions + ab.substitutions + ab.insertions, ba.insertions + ba.substitutions + ba.deletions);
        }

        #[test]
        fn triangle_inequality(a in "[ab]{0,8}", b in "[ab]{0,8}", c in "[ab]{0,8}") {
            let d = |x: &str, y: &str| char_counts(x, y).total();
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
        }

        #[test]
        fn repetition_never_worsens(a in "[ab]{0,5}", b in "[ab]{1,5}", k in 1usize..4) {
            // k copies joined by a separator token that always matches
            let base = char_counts(&a, &b);
            let rep = char_counts(&vec![a.as_str(); k].join("|"), &vec![b.as_str(); k].join("|"));
            // alignments may cross the separators, so repetition can only help
            prop_assert!(rep.total() <= k * base.total());
            prop_assert_eq!(rep.reference_len, k * base.reference_len + (k - 1));
        }
    }
}
