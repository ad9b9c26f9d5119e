//! The `augeval` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

use std::collections::{BTreeMap, HashSet};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::augment::{AugmentConfig, Draw, Pipeline, SampledParams};
use crate::ctcdecode::{best_path_decode, parse_container, LogitMatrix};
use crate::error::Error;
use crate::metrics::{
    char_counts, corpus_rate, word_counts, write_results, Averaging, ErrorCounts, EvalSplit,
    RunResult,
};
use crate::raster::{read_png_with, round_dim, write_png, GrayImage, ReadOptions};
use crate::rng::RngStream;
use crate::stats::{build_report, CompareOptions, PairOn, WilcoxonMode};
use crate::textdata::{
    load_manifest, nfc, preprocess_line, validate_lion_layout, Alphabet, LineRecord, Manifest,
    Split, LINE_HEIGHT, LINE_WIDTH,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// Grey used for padding introduced by geometric augmentations in previews.
pub const PREVIEW_PAD: u8 = 128;

#[derive(Debug, Parser)]
#[command(
    name = "augeval",
    version,
    about = "Seeded augmentation, decoding, scoring and significance testing for line images"
)]
pub struct Cli {
    /// Print results and errors as JSON.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Augment and preprocess every image of a manifest.
    Augment(AugmentArgs),
    /// Render a contact sheet of augmented variants of one image.
    Preview(PreviewArgs),
    /// Score predictions or logits against a manifest.
    Score(ScoreArgs),
    /// Compare configs against the baseline with paired signed-rank tests.
    Compare(CompareArgs),
    /// Check a manifest against the canonical fold layout.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct ImageArgs {
    /// Invert intensities after loading (for dark-on-light scans).
    #[arg(long)]
    pub invert: bool,
    /// Convert colour images to grey instead of rejecting them.
    #[arg(long)]
    pub luma: bool,
}

impl ImageArgs {
    fn options(&self) -> ReadOptions {
        ReadOptions {
            luma: self.luma,
            invert: self.invert,
        }
    }
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Manifest TSV: image_path, fold, split, transliteration.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Alphabet file, one symbol per line (default: built-in 51 symbols).
    #[arg(long)]
    pub alphabet: Option<PathBuf>,
    /// Preset name, `combined-top3`, or a TOML config file.
    #[arg(long, default_value = "baseline")]
    pub preset: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Probability of augmenting each image (per member for sequences).
    #[arg(long, default_value_t = 0.5)]
    pub prob: f64,
    /// Epoch index; each epoch draws fresh coins and parameters.
    #[arg(long, default_value_t = 0)]
    pub epoch: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub image: ImageArgs,
}

#[derive(Debug, Args)]
pub struct PreviewArgs {
    /// Preset name, `combined-top3`, or a TOML config file.
    #[arg(long)]
    pub preset: String,
    /// Source line image (PNG).
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of tiles; range extremes come first, then random draws.
    #[arg(long, default_value_t = 6)]
    pub count: usize,
    /// Output PNG path.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub image_opts: ImageArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Pooled,
    Cv,
    TestInDomain,
    TestOutOfDomain,
}

impl From<SplitArg> for EvalSplit {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Pooled => EvalSplit::Pooled,
            SplitArg::Cv => EvalSplit::Cv,
            SplitArg::TestInDomain => EvalSplit::TestInDomain,
            SplitArg::TestOutOfDomain => EvalSplit::TestOutOfDomain,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AveragingArg {
    Micro,
    Macro,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PairOnArg {
    Run,
    FoldMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestArg {
    Exact,
    NormalApprox,
    Auto,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Manifest TSV with the reference transliterations.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub alphabet: Option<PathBuf>,
    /// Predictions TSV: record_id, hypothesis.
    #[arg(long, conflicts_with = "logits", required_unless_present = "logits")]
    pub predictions: Option<PathBuf>,
    /// Directory of `<record_id>.logits` files, or a logits container file.
    #[arg(long)]
    pub logits: Option<PathBuf>,
    /// Config name written to the results rows.
    #[arg(long, default_value = "baseline")]
    pub config: String,
    /// Fold and run written to the results rows.
    #[arg(long, default_value_t = 0)]
    pub fold: u32,
    #[arg(long, default_value_t = 0)]
    pub run: u32,
    /// Restrict lines.csv to one split (results.csv always has every split).
    #[arg(long, value_enum)]
    pub split: Option<SplitArg>,
    #[arg(long, value_enum, default_value = "micro")]
    pub averaging: AveragingArg,
    /// Fail when a manifest record has no prediction.
    #[arg(long)]
    pub strict: bool,
    /// Directory for results.csv, lines.csv and missing.txt.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Results CSVs; rows from all files are pooled.
    #[arg(required = true)]
    pub results: Vec<PathBuf>,
    #[arg(long, default_value = "baseline")]
    pub baseline: String,
    /// Significance level applied to Bonferroni-adjusted p-values.
    #[arg(long, default_value_t = 0.01)]
    pub alpha: f64,
    /// Number of comparisons in the correction.
    #[arg(long, default_value_t = 22)]
    pub n_comparisons: usize,
    /// Pair observations per (fold, run), or per fold after averaging runs.
    #[arg(long, value_enum, default_value = "run")]
    pub pair_on: PairOnArg,
    /// Which results rows to compare.
    #[arg(long, value_enum, default_value = "pooled")]
    pub split: SplitArg,
    /// How p-values are computed.
    #[arg(long, value_enum, default_value = "exact")]
    pub test: TestArg,
    /// Directory for verdicts.csv and report.txt.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub alphabet: Option<PathBuf>,
    /// Skip checking that image files exist.
    #[arg(long)]
    pub no_images: bool,
    /// Treat layout deviations as errors too.
    #[arg(long)]
    pub strict: bool,
}

/// Error with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            kind: "usage",
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DATA,
            kind: "data",
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INTERNAL,
            kind: "internal",
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownPreset(_) => CliError::usage(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let json = args.iter().any(|a| a == "--json");
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            report_error(&CliError::usage(e.to_string().trim_end()), json);
            return EXIT_USAGE;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            report_error(&e, cli.json);
            e.code
        }
    }
}

fn report_error(e: &CliError, json: bool) {
    if json {
        let v = serde_json::json!({
            "error": { "code": e.code, "kind": e.kind, "message": e.message }
        });
        eprintln!("{v}");
    } else {
        eprintln!("error: {}", e.message);
    }
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Augment(a) => cmd_augment(a, cli.json),
        Command::Preview(a) => cmd_preview(a, cli.json),
        Command::Score(a) => cmd_score(a, cli.json),
        Command::Compare(a) => cmd_compare(a, cli.json),
        Command::Validate(a) => cmd_validate(a, cli.json),
    }
}

fn load_alphabet(path: &Option<PathBuf>) -> CliResult<Alphabet> {
    match path {
        Some(p) => Ok(Alphabet::from_file(p)?),
        None => Ok(Alphabet::lion_default()),
    }
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

fn print_json(v: &impl Serialize) -> CliResult<()> {
    let s = serde_json::to_string(v).map_err(|e| CliError::internal(e.to_string()))?;
    println!("{s}");
    Ok(())
}

/// One line of `trace.jsonl`.
#[derive(Debug, Serialize)]
struct TraceLine<'a> {
    index: usize,
    record: &'a str,
    seed: u64,
    epoch: u64,
    config: &'a str,
    applied: Vec<SampledParams>,
}

#[derive(Debug, Serialize)]
struct AugmentSummary<'a> {
    preset: &'a str,
    seed: u64,
    epoch: u64,
    prob: f64,
    records: usize,
    augmented: usize,
    failed: usize,
}

/// Stream for one record in one epoch.
pub fn record_stream(seed: u64, record_id: &str, epoch: u64) -> RngStream {
    RngStream::new(seed).child(record_id).child_index(epoch)
}

/// Augments and preprocesses one record.
pub fn augment_record(
    manifest: &Manifest,
    record: &LineRecord,
    pipeline: &Pipeline,
    prob: f64,
    seed: u64,
    epoch: u64,
    opts: ReadOptions,
) -> crate::Result<(GrayImage, Vec<SampledParams>)> {
    let img = read_png_with(manifest.resolve_image(record), opts)?;
    let mut rng = record_stream(seed, record.id(), epoch);
    let (out, applied) = pipeline.apply(&img, prob, &mut rng)?;
    Ok((preprocess_line(&out)?, applied))
}

fn cmd_augment(a: &AugmentArgs, json: bool) -> CliResult<()> {
    if !(0.0..=1.0).contains(&a.prob) {
        return Err(CliError::usage(format!("--prob must be in [0, 1], got {}", a.prob)));
    }
    if a.workers == Some(0) {
        return Err(CliError::usage("--workers must be at least 1"));
    }
    let pipeline = Pipeline::resolve(&a.preset)?;
    let manifest = load_manifest(&a.manifest, load_alphabet(&a.alphabet)?)?;
    let images_dir = a.out.join("images");
    create_dir(&images_dir)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::internal(format!("thread pool: {e}")))?;
    let opts = a.image.options();
    let outcomes: Vec<crate::Result<Vec<SampledParams>>> = pool.install(|| {
        manifest
            .records
            .par_iter()
            .enumerate()
            .map(|(i, r)| {
                let (img, applied) =
                    augment_record(&manifest, r, &pipeline, a.prob, a.seed, a.epoch, opts)?;
                write_png(&img, images_dir.join(format!("{i:06}.png")))?;
                Ok(applied)
            })
            .collect()
    });

    let mut trace = String::new();
    let mut out_records = Vec::new();
    let mut failures = Vec::new();
    let mut augmented = 0;
    for (i, (record, outcome)) in manifest.records.iter().zip(outcomes).enumerate() {
        match outcome {
            Ok(applied) => {
                if !applied.is_empty() {
                    augmented += 1;
                }
                let line = TraceLine {
                    index: i,
                    record: record.id(),
                    seed: a.seed,
                    epoch: a.epoch,
                    config: pipeline.name(),
                    applied,
                };
                let s = serde_json::to_string(&line).map_err(|e| CliError::internal(e.to_string()))?;
                trace.push_str(&s);
                trace.push('\n');
                out_records.push(LineRecord {
                    image_path: format!("images/{i:06}.png"),
                    ..record.clone()
                });
            }
            Err(e) => failures.push(format!("{}\t{e}", record.id())),
        }
    }
    write_file(&a.out.join("trace.jsonl"), trace)?;
    let out_manifest = Manifest {
        records: out_records,
        alphabet: manifest.alphabet.clone(),
        base_dir: a.out.clone(),
    };
    out_manifest.write(a.out.join("manifest.tsv")).map_err(CliError::from)?;
    let summary = AugmentSummary {
        preset: pipeline.name(),
        seed: a.seed,
        epoch: a.epoch,
        prob: a.prob,
        records: manifest.records.len(),
        augmented,
        failed: failures.len(),
    };
    let run_json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::internal(e.to_string()))?;
    write_file(&a.out.join("run.json"), run_json + "\n")?;
    let failure_path = a.out.join("failures.tsv");
    if failures.is_empty() {
        if failure_path.exists() {
            fs::remove_file(&failure_path)
                .map_err(|e| CliError::data(format!("cannot remove {}: {e}", failure_path.display())))?;
        }
    } else {
        write_file(&failure_path, failures.join("\n") + "\n")?;
    }

    if json {
        print_json(&summary)?;
    } else {
        println!(
            "{}: {} records, {} augmented, {} failed (seed {}, epoch {})",
            summary.preset, summary.records, augmented, summary.failed, a.seed, a.epoch
        );
    }
    if failures.is_empty() {
        Ok(())
    } else {
        for f in &failures {
            eprintln!("failed: {f}");
        }
        Err(CliError::data(format!("{} of {} records failed", failures.len(), manifest.records.len())))
    }
}

/// Draw sequences shown in a preview, one per tile.
pub fn preview_draws(
    pipeline: &Pipeline,
    img: &GrayImage,
    seed: u64,
    count: usize,
) -> crate::Result<Vec<Vec<SampledParams>>> {
    let root = RngStream::new(seed);
    let mut tiles = Vec::new();
    if let Pipeline::Single(cfg) = pipeline {
        let mut rng = root.child("extremes");
        for draw in cfg.extremes(img.width(), &mut rng)? {
            tiles.push(vec![tagged(cfg, draw)]);
        }
        tiles.truncate(count);
    }
    let mut k = 0;
    while tiles.len() < count {
        let mut rng = root.child("draws").child_index(k);
        let (_, applied) = pipeline.apply(img, 1.0, &mut rng)?;
        tiles.push(applied);
        k += 1;
    }
    Ok(tiles)
}

fn tagged(cfg: &AugmentConfig, draw: Draw) -> SampledParams {
    SampledParams {
        config: cfg.name.clone(),
        draw,
    }
}

/// One preview tile: the preprocessed augmented line, with padding that the
/// geometric draws introduced shown in grey.
pub fn preview_tile(img: &GrayImage, draws: &[SampledParams]) -> crate::Result<GrayImage> {
    let mut out = img.clone();
    let mut valid = GrayImage::filled(img.width(), img.height(), 255);
    for p in draws {
        out = p.draw.apply(&out)?;
        if p.draw.is_geometric() {
            valid = p.draw.apply(&valid)?;
        }
    }
    let content_w = round_dim(out.width() as f64 * LINE_HEIGHT as f64 / out.height() as f64);
    let mut tile = preprocess_line(&out)?;
    let valid = preprocess_line(&valid)?;
    for y in 0..LINE_HEIGHT {
        for x in 0..content_w.min(LINE_WIDTH) {
            if valid.get(x, y) == 0 && tile.get(x, y) == 0 {
                tile.set(x, y, PREVIEW_PAD);
            }
        }
    }
    Ok(tile)
}

pub fn contact_sheet(tiles: &[GrayImage]) -> GrayImage {
    let mut sheet = GrayImage::new(LINE_WIDTH, LINE_HEIGHT * tiles.len());
    for (i, t) in tiles.iter().enumerate() {
        for y in 0..LINE_HEIGHT {
            for x in 0..LINE_WIDTH {
                sheet.set(x, i * LINE_HEIGHT + y, t.get(x, y));
            }
        }
    }
    sheet
}

fn cmd_preview(a: &PreviewArgs, json: bool) -> CliResult<()> {
    if a.count == 0 {
        return Err(CliError::usage("--count must be at least 1"));
    }
    let pipeline = Pipeline::resolve(&a.preset)?;
    let img = read_png_with(&a.image, a.image_opts.options())?;
    let draws = preview_draws(&pipeline, &img, a.seed, a.count)?;
    let tiles: Vec<GrayImage> = draws
        .iter()
        .map(|d| preview_tile(&img, d))
        .collect::<crate::Result<_>>()?;
    if let Some(dir) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_png(&contact_sheet(&tiles), &a.out)?;
    if json {
        print_json(&serde_json::json!({ "preset": pipeline.name(), "seed": a.seed, "tiles": draws }))?;
    } else {
        for (i, d) in draws.iter().enumerate() {
            let s = serde_json::to_string(d).map_err(|e| CliError::internal(e.to_string()))?;
            println!("tile {i}: {s}");
        }
    }
    Ok(())
}

/// Parses `record_id<TAB>hypothesis` lines. Hypotheses may be empty.
pub fn parse_predictions(text: &str, source: &Path) -> crate::Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.split('\n').enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            continue;
        }
        let perr = |message: String| Error::Parse {
            path: source.to_path_buf(),
            line: n + 1,
            message,
        };
        let (id, hyp) = line
            .split_once('\t')
            .ok_or_else(|| perr("expected record_id<TAB>hypothesis".into()))?;
        if out.insert(nfc(id), nfc(hyp)).is_some() {
            return Err(perr(format!("duplicate prediction for {id:?}")));
        }
    }
    Ok(out)
}

fn load_hypotheses(a: &ScoreArgs, manifest: &Manifest) -> CliResult<BTreeMap<String, String>> {
    if let Some(p) = &a.predictions {
        let text = fs::read_to_string(p).map_err(|e| CliError::from(Error::io(p, e)))?;
        return Ok(parse_predictions(&text, p)?);
    }
    let path = a.logits.as_ref().expect("clap requires predictions or logits");
    let mut out = BTreeMap::new();
    if path.is_dir() {
        for r in &manifest.records {
            let file = path.join(format!("{}.logits", r.id()));
            if file.is_file() {
                let m = LogitMatrix::from_file(&file)?;
                out.insert(r.id().to_string(), best_path_decode(&m, &manifest.alphabet)?);
            }
        }
    } else {
        let text = fs::read_to_string(path).map_err(|e| CliError::from(Error::io(path, e)))?;
        for (id, m) in parse_container(&text)? {
            let hyp = best_path_decode(&m, &manifest.alphabet)?;
            if out.insert(nfc(&id), hyp).is_some() {
                return Err(CliError::data(format!("duplicate logits for {id:?}")));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct LineScore {
    pub record: String,
    pub split: Split,
    pub chars: ErrorCounts,
    pub words: ErrorCounts,
}

/// Scores every manifest record that has a hypothesis; returns the scores
/// and the ids of records without one.
pub fn score_lines(
    manifest: &Manifest,
    hypotheses: &BTreeMap<String, String>,
) -> (Vec<LineScore>, Vec<String>) {
    let mut scores = Vec::new();
    let mut missing = Vec::new();
    for r in &manifest.records {
        match hypotheses.get(r.id()) {
            Some(h) => scores.push(LineScore {
                record: r.id().to_string(),
                split: r.split,
                chars: char_counts(h, &r.transliteration),
                words: word_counts(h, &r.transliteration),
            }),
            None => missing.push(r.id().to_string()),
        }
    }
    (scores, missing)
}

/// One results row per split that has scored lines, pooled first.
pub fn split_results(
    lines: &[LineScore],
    config: &str,
    fold: u32,
    run: u32,
    averaging: Averaging,
) -> crate::Result<Vec<RunResult>> {
    let mut out = Vec::new();
    for split in [
        EvalSplit::Pooled,
        EvalSplit::Cv,
        EvalSplit::TestInDomain,
        EvalSplit::TestOutOfDomain,
    ] {
        let sel: Vec<&LineScore> = lines.iter().filter(|l| split.includes(l.split)).collect();
        if sel.is_empty() {
            continue;
        }
        let chars: Vec<ErrorCounts> = sel.iter().map(|l| l.chars).collect();
        let words: Vec<ErrorCounts> = sel.iter().map(|l| l.words).collect();
        out.push(RunResult {
            config: config.to_string(),
            fold,
            run,
            split,
            cer: corpus_rate(&chars, averaging)?,
            wer: corpus_rate(&words, averaging)?,
        });
    }
    Ok(out)
}

fn rate_cell(c: &ErrorCounts) -> String {
    c.rate().map(|r| format!("{r:.6}")).unwrap_or_default()
}

fn lines_csv(lines: &[LineScore], filter: Option<EvalSplit>) -> crate::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "record", "split", "char_s", "char_d", "char_i", "char_n", "cer", "word_s", "word_d",
        "word_i", "word_n", "wer",
    ])?;
    for l in lines.iter().filter(|l| filter.is_none_or(|f| f.includes(l.split))) {
        let (c, wd) = (&l.chars, &l.words);
        w.write_record([
            l.record.clone(),
            l.split.as_str().to_string(),
            c.substitutions.to_string(),
            c.deletions.to_string(),
            c.insertions.to_string(),
            c.reference_len.to_string(),
            rate_cell(c),
            wd.substitutions.to_string(),
            wd.deletions.to_string(),
            wd.insertions.to_string(),
            wd.reference_len.to_string(),
            rate_cell(wd),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Codec(e.to_string()))
}

fn cmd_score(a: &ScoreArgs, json: bool) -> CliResult<()> {
    let manifest = load_manifest(&a.manifest, load_alphabet(&a.alphabet)?)?;
    let hyps = load_hypotheses(a, &manifest)?;
    let known: HashSet<&str> = manifest.records.iter().map(|r| r.id()).collect();
    let unknown: Vec<&String> = hyps.keys().filter(|k| !known.contains(k.as_str())).collect();
    for k in &unknown {
        eprintln!("warning: prediction for unknown record {k}");
    }
    let (lines, missing) = score_lines(&manifest, &hyps);
    create_dir(&a.out)?;
    let missing_path = a.out.join("missing.txt");
    write_file(&missing_path, missing.iter().map(|m| format!("{m}\n")).collect::<String>())?;
    if !missing.is_empty() {
        eprintln!(
            "warning: {} records have no prediction, listed in {}",
            missing.len(),
            missing_path.display()
        );
        if a.strict {
            return Err(CliError::data(format!("{} records have no prediction", missing.len())));
        }
    }
    let averaging = match a.averaging {
        AveragingArg::Micro => Averaging::Micro,
        AveragingArg::Macro => Averaging::Macro,
    };
    let results = split_results(&lines, &a.config, a.fold, a.run, averaging)?;
    let mut buf = Vec::new();
    write_results(&mut buf, &results)?;
    write_file(&a.out.join("results.csv"), buf)?;
    write_file(&a.out.join("lines.csv"), lines_csv(&lines, a.split.map(EvalSplit::from))?)?;
    if json {
        print_json(&serde_json::json!({
            "results": results,
            "scored": lines.len(),
            "missing": missing,
        }))?;
    } else {
        for r in &results {
            println!("{}: cer {:.4} wer {:.4}", r.split, r.cer, r.wer);
        }
        println!("{} lines scored, {} missing", lines.len(), missing.len());
    }
    Ok(())
}

fn cmd_compare(a: &CompareArgs, json: bool) -> CliResult<()> {
    if !(a.alpha > 0.0 && a.alpha <= 1.0) {
        return Err(CliError::usage(format!("--alpha must be in (0, 1], got {}", a.alpha)));
    }
    if a.n_comparisons == 0 {
        return Err(CliError::usage("--n-comparisons must be at least 1"));
    }
    let mut results = Vec::new();
    for p in &a.results {
        results.extend(crate::metrics::read_results_file(p).map_err(|e| match e {
            Error::Csv(inner) => Error::Codec(format!("{}: {inner}", p.display())),
            other => other,
        })?);
    }
    let opts = CompareOptions {
        split: a.split.into(),
        alpha: a.alpha,
        n_comparisons: a.n_comparisons,
        pair_on: match a.pair_on {
            PairOnArg::Run => PairOn::Run,
            PairOnArg::FoldMean => PairOn::FoldMean,
        },
        mode: match a.test {
            TestArg::Exact => WilcoxonMode::Exact,
            TestArg::NormalApprox => WilcoxonMode::NormalApprox,
            TestArg::Auto => WilcoxonMode::Auto,
        },
    };
    let report = build_report(&results, &a.baseline, &opts)?;
    let text = report.render_text();
    if let Some(out) = &a.out {
        create_dir(out)?;
        write_file(&out.join("verdicts.csv"), report.render_csv())?;
        write_file(&out.join("report.txt"), &text)?;
    }
    if json {
        print_json(&report)?;
    } else {
        print!("{text}");
        let compared = report.rows.len() - 1;
        if compared != a.n_comparisons {
            eprintln!(
                "note: {compared} configs compared, Bonferroni factor is {}",
                a.n_comparisons
            );
        }
    }
    Ok(())
}

fn cmd_validate(a: &ValidateArgs, json: bool) -> CliResult<()> {
    let manifest = load_manifest(&a.manifest, load_alphabet(&a.alphabet)?)?;
    let report = validate_lion_layout(&manifest, !a.no_images);
    if json {
        print_json(&report)?;
    } else {
        print!("{}", report.render());
    }
    if !report.violations.is_empty() {
        return Err(CliError::data(format!("{} violations", report.violations.len())));
    }
    if a.strict && !report.is_canonical() {
        return Err(CliError::data(format!("{} layout deviations", report.deviations.len())));
    }
    Ok(())
}
