//! Paired Wilcoxon signed-rank tests against a baseline, with Bonferroni
//! correction, and the summary table built from them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::augment::preset_rank;
use crate::error::{Error, Result};
use crate::metrics::{aggregate, Aggregate, EvalSplit, RunResult};

pub const DEFAULT_ALPHA: f64 = 0.01;
pub const DEFAULT_COMPARISONS: usize = 22;
/// Largest sample for which `auto` mode computes the exact distribution.
pub const EXACT_LIMIT: usize = 25;

/// Paired observations `a[i]` and `b[i]` sharing the key `labels[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    pub labels: Vec<String>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl PairedSample {
    pub fn new(labels: Vec<String>, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.is_empty() || a.len() != b.len() || a.len() != labels.len() {
            return Err(Error::InvalidSample(format!(
                "need equal non-empty lengths, got {} labels, {} and {} values",
                labels.len(),
                a.len(),
                b.len()
            )));
        }
        let unique: BTreeSet<&String> = labels.iter().collect();
        if unique.len() != labels.len() {
            return Err(Error::InvalidSample("pairing keys are not unique".into()));
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSample("values must be finite".into()));
        }
        Ok(PairedSample { labels, a, b })
    }

    /// Unlabelled sample, keyed by position.
    pub fn from_values(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let labels = (0..a.len()).map(|i| i.to_string()).collect();
        PairedSample::new(labels, a, b)
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn differences(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(x, y)| x - y).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMode {
    Exact,
    NormalApprox,
    /// Exact up to [`EXACT_LIMIT`] non-zero differences.
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`.
    pub statistic: f64,
    pub p_value: f64,
    /// Non-zero differences used.
    pub n: usize,
    pub exact: bool,
}

/// Midranks of `|d|`, doubled so they are integers.
pub(crate) fn doubled_ranks(abs: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&i, &j| abs[i].total_cmp(&abs[j]));
    let mut ranks = vec![0u64; abs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && abs[order[j + 1]] == abs[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean; doubled: (i + 1) + (j + 1)
        let doubled = (i + j + 2) as u64;
        for &k in &order[i..=j] {
            ranks[k] = doubled;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided Wilcoxon signed-rank test on `a - b`.
///
/// Zero differences are dropped and tied magnitudes get midranks. The exact
/// p-value is `P(min(W+, W-) <= observed)` over all equally likely sign
/// assignments; the normal approximation uses the tie-corrected variance
/// and a continuity correction of 0.5.
pub fn wilcoxon_signed_rank(s: &PairedSample, mode: WilcoxonMode) -> Result<WilcoxonResult> {
    let d: Vec<f64> = s.differences().into_iter().filter(|&v| v != 0.0).collect();
    if d.is_empty() {
        return Err(Error::DegenerateSample);
    }
    let n = d.len();
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = doubled_ranks(&abs);
    let total: u64 = ranks.iter().sum();
    let plus: u64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let w2 = plus.min(total - plus);
    let exact = match mode {
        WilcoxonMode::Exact => true,
        WilcoxonMode::NormalApprox => false,
        WilcoxonMode::Auto => n <= EXACT_LIMIT,
    };
    let p_value = if exact {
        exact_p(&ranks, w2)
    } else {
        normal_p(n, &ranks, w2 as f64 / 2.0)
    };
    Ok(WilcoxonResult {
        statistic: w2 as f64 / 2.0,
        p_value,
        n,
        exact,
    })
}

/// Distribution of the positive doubled-rank sum under random signs, built
/// one rank at a time as probabilities so large samples do not overflow.
fn exact_p(ranks: &[u64], w2: u64) -> f64 {
    let total: u64 = ranks.iter().sum();
    let mut prob = vec![0f64; total as usize + 1];
    prob[0] = 1.0;
    let mut reach = 0usize;
    for &r in ranks {
        let r = r as usize;
        for s in (0..=reach + r).rev() {
            let with = if s >= r { prob[s - r] } else { 0.0 };
            prob[s] = 0.5 * (prob[s] + with);
        }
        reach += r;
    }
    let lo = w2 as usize;
    let hi = (total - w2) as usize;
    // min(W+, W-) <= w  <=>  W+ <= w or W+ >= total - w
    let extreme: f64 = prob
        .iter()
        .enumerate()
        .filter(|&(s, _)| s <= lo || s >= hi)
        .map(|(_, c)| c)
        .sum();
    extreme.min(1.0)
}

fn normal_p(n: usize, ranks: &[u64], w: f64) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_unstable();
    for group in sorted.chunk_by(|x, y| x == y) {
        let t = group.len() as f64;
        tie_term += t * t * t - t;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * (1.0 - std.cdf(z))).clamp(0.0, 1.0)
}

pub fn bonferroni(p: f64, n: usize) -> f64 {
    (p * n.max(1) as f64).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Cer,
    Wer,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Cer => "cer",
            Metric::Wer => "wer",
        }
    }

    fn of(&self, r: &RunResult) -> f64 {
        match self {
            Metric::Cer => r.cer,
            Metric::Wer => r.wer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Higher,
    Lower,
    NoDifference,
}

impl Direction {
    pub fn symbol(&self) -> &'static str {
        match self {
            Direction::Higher => ">",
            Direction::Lower => "<",
            Direction::NoDifference => "-",
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Higher => "higher",
            Direction::Lower => "lower",
            Direction::NoDifference => "no_difference",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub config: String,
    pub metric: Metric,
    pub direction: Direction,
    pub p_raw: f64,
    pub p_adjusted: f64,
}

/// Unit of pairing between a config and the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairOn {
    /// One pair per (fold, run) checkpoint.
    #[default]
    Run,
    /// One pair per fold, averaging the runs.
    FoldMean,
}

impl std::str::FromStr for PairOn {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "run" => Ok(PairOn::Run),
            "fold-mean" => Ok(PairOn::FoldMean),
            other => Err(format!("unknown pairing {other:?}, expected run or fold-mean")),
        }
    }
}

fn keyed_values(
    results: &[RunResult],
    config: &str,
    split: EvalSplit,
    metric: Metric,
    pair_on: PairOn,
) -> Result<BTreeMap<String, f64>> {
    let rows: Vec<&RunResult> = results
        .iter()
        .filter(|r| r.config == config && r.split == split)
        .collect();
    if rows.is_empty() {
        return Err(Error::EmptySelection(config.to_string()));
    }
    let mut out = BTreeMap::new();
    match pair_on {
        PairOn::Run => {
            for r in rows {
                let key = format!("fold{}/run{}", r.fold, r.run);
                if out.insert(key.clone(), metric.of(r)).is_some() {
                    return Err(Error::InvalidSample(format!("{config}: duplicate key {key}")));
                }
            }
        }
        PairOn::FoldMean => {
            let mut folds: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
            for r in rows {
                folds.entry(r.fold).or_default().push(metric.of(r));
            }
            for (fold, v) in folds {
                out.insert(format!("fold{fold}"), v.iter().sum::<f64>() / v.len() as f64);
            }
        }
    }
    Ok(out)
}

/// Aligns a config's results with the baseline's by pairing key.
pub fn pair_with_baseline(
    results: &[RunResult],
    baseline: &str,
    config: &str,
    split: EvalSplit,
    metric: Metric,
    pair_on: PairOn,
) -> Result<PairedSample> {
    let base = keyed_values(results, baseline, split, metric, pair_on)?;
    let cand = keyed_values(results, config, split, metric, pair_on)?;
    let unmatched: Vec<String> = base
        .keys()
        .filter(|k| !cand.contains_key(*k))
        .map(|k| format!("{baseline}:{k}"))
        .chain(
            cand.keys()
                .filter(|k| !base.contains_key(*k))
                .map(|k| format!("{config}:{k}")),
        )
        .collect();
    if !unmatched.is_empty() {
        return Err(Error::PairingMismatch(unmatched));
    }
    let labels: Vec<String> = base.keys().cloned().collect();
    let a = labels.iter().map(|k| cand[k]).collect();
    let b = labels.iter().map(|k| base[k]).collect();
    PairedSample::new(labels, a, b)
}

/// Verdict for a sample of (config, baseline) pairs.
pub fn verdict_from_sample(
    config: &str,
    metric: Metric,
    sample: &PairedSample,
    alpha: f64,
    n_comparisons: usize,
    mode: WilcoxonMode,
) -> Result<Verdict> {
    let p_raw = match wilcoxon_signed_rank(sample, mode) {
        Ok(r) => r.p_value,
        Err(Error::DegenerateSample) => 1.0,
        Err(e) => return Err(e),
    };
    let p_adjusted = bonferroni(p_raw, n_comparisons);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mc, mb) = (mean(&sample.a), mean(&sample.b));
    let direction = if p_adjusted >= alpha || mc == mb {
        Direction::NoDifference
    } else if mc > mb {
        Direction::Higher
    } else {
        Direction::Lower
    };
    Ok(Verdict {
        config: config.to_string(),
        metric,
        direction,
        p_raw,
        p_adjusted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareOptions {
    pub split: EvalSplit,
    pub alpha: f64,
    pub n_comparisons: usize,
    pub pair_on: PairOn,
    pub mode: WilcoxonMode,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            split: EvalSplit::Pooled,
            alpha: DEFAULT_ALPHA,
            n_comparisons: DEFAULT_COMPARISONS,
            pair_on: PairOn::Run,
            mode: WilcoxonMode::Exact,
        }
    }
}

pub fn compare_to_baseline(
    results: &[RunResult],
    baseline: &str,
    config: &str,
    metric: Metric,
    opts: &CompareOptions,
) -> Result<Verdict> {
    let sample = pair_with_baseline(results, baseline, config, opts.split, metric, opts.pair_on)?;
    verdict_from_sample(config, metric, &sample, opts.alpha, opts.n_comparisons, opts.mode)
}

/// Table order: presets by rank, anything else after them by name.
pub fn table_order(configs: &mut [String]) {
    configs.sort_by(|a, b| {
        let ka = (preset_rank(a).unwrap_or(usize::MAX), a.as_str());
        let kb = (preset_rank(b).unwrap_or(usize::MAX), b.as_str());
        ka.cmp(&kb)
    });
}

/// One row of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub aggregate: Aggregate,
    /// `None` for the baseline row.
    pub cer: Option<Verdict>,
    pub wer: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub baseline: String,
    pub rows: Vec<ReportRow>,
}

/// Compares every non-baseline config in `results` with the baseline.
pub fn build_report(results: &[RunResult], baseline: &str, opts: &CompareOptions) -> Result<Report> {
    let mut configs: Vec<String> = results
        .iter()
        .filter(|r| r.split == opts.split)
        .map(|r| r.config.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if !configs.iter().any(|c| c == baseline) {
        return Err(Error::MissingBaseline(baseline.to_string()));
    }
    table_order(&mut configs);
    configs.retain(|c| c != baseline);
    let mut rows = vec![ReportRow {
        aggregate: aggregate(results, baseline, opts.split)?,
        cer: None,
        wer: None,
    }];
    for config in configs {
        rows.push(ReportRow {
            aggregate: aggregate(results, &config, opts.split)?,
            cer: Some(compare_to_baseline(results, baseline, &config, Metric::Cer, opts)?),
            wer: Some(compare_to_baseline(results, baseline, &config, Metric::Wer, opts)?),
        });
    }
    Ok(Report {
        baseline: baseline.to_string(),
        rows,
    })
}

/// `mean (std)` with four decimals.
pub fn mean_std_cell(mean: f64, std: f64) -> String {
    format!("{mean:.4} ({std:.4})")
}

impl Report {
    /// Aligned plain-text table.
    pub fn render_text(&self) -> String {
        let header = [
            "Augmentation",
            "CER (std. dev.)",
            "CER Comparison",
            "WER (std. dev.)",
            "WER Comparison",
        ];
        let mut cells: Vec<[String; 5]> = vec![header.map(String::from)];
        for row in &self.rows {
            let a = &row.aggregate;
            let sym = |v: &Option<Verdict>| {
                v.as_ref()
                    .map_or_else(|| "N/A".to_string(), |v| v.direction.symbol().to_string())
            };
            cells.push([
                a.config.clone(),
                mean_std_cell(a.mean_cer, a.std_cer),
                sym(&row.cer),
                mean_std_cell(a.mean_wer, a.std_wer),
                sym(&row.wer),
            ]);
        }
        let widths: Vec<usize> = (0..5)
            .map(|c| cells.iter().map(|r| r[c].chars().count()).max().unwrap())
            .collect();
        let mut out = String::new();
        for (i, r) in cells.iter().enumerate() {
            let line: Vec<String> = r
                .iter()
                .zip(&widths)
                .map(|(cell, &w)| format!("{cell:<w$}"))
                .collect();
            writeln!(out, "{}", line.join(" | ").trim_end()).unwrap();
            if i == 0 {
                let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
                writeln!(out, "{}", rule.join("-+-")).unwrap();
            }
        }
        out
    }

    /// `config,metric,mean,std,p_raw,p_adjusted,direction`; the baseline
    /// rows leave the p-values empty and use `baseline` as direction.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("config,metric,mean,std,p_raw,p_adjusted,direction\n");
        for row in &self.rows {
            let a = &row.aggregate;
            for (metric, mean, std, verdict) in [
                (Metric::Cer, a.mean_cer, a.std_cer, &row.cer),
                (Metric::Wer, a.mean_wer, a.std_wer, &row.wer),
            ] {
                let (p_raw, p_adj, dir) = match verdict {
                    Some(v) => (
                        format!("{:e}", v.p_raw),
                        format!("{:e}", v.p_adjusted),
                        v.direction.as_str(),
                    ),
                    None => (String::new(), String::new(), "baseline"),
                };
                writeln!(
                    out,
                    "{},{},{mean:.6},{std:.6},{p_raw},{p_adj},{dir}",
                    csv_field(&a.config),
                    metric.as_str()
                )
                .unwrap();
            }
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
