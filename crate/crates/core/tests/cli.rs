use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use augeval::augment::{Draw, Pipeline};
use augeval::cli::{record_stream, PREVIEW_PAD};
use augeval::ctcdecode::{write_container, LogitMatrix};
use augeval::metrics::{read_results_file, write_results, EvalSplit, RunResult};
use augeval::raster::{read_png, write_png, GrayImage};
use augeval::textdata::{preprocess_line, Alphabet, LINE_HEIGHT, LINE_WIDTH};
use tempfile::TempDir;

fn augeval(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_augeval"))
        .args(args)
        .output()
        .expect("run augeval")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stroke_image(w: usize, h: usize, salt: usize) -> GrayImage {
    GrayImage::from_fn(w, h, |x, y| {
        if (x * 3 + y * 5 + salt) % 11 < 3 && y > 2 && y + 2 < h {
            220
        } else {
            0
        }
    })
}

/// Writes `n` images plus a manifest; returns the manifest path.
fn synthetic_dataset(dir: &Path, n: usize) -> PathBuf {
    fs::create_dir_all(dir.join("img")).unwrap();
    let mut tsv = String::new();
    for i in 0..n {
        let name = format!("img/line{i:04}.png");
        write_png(&stroke_image(60 + i % 40, 20 + i % 7, i), dir.join(&name)).unwrap();
        let (fold, split) = match i % 4 {
            0 => ("-".to_string(), "test_in_domain"),
            1 => ("-".to_string(), "test_out_of_domain"),
            _ => ((i % 5).to_string(), "cv"),
        };
        tsv.push_str(&format!("{name}\t{fold}\t{split}\tline {i}\n"));
    }
    let m = dir.join("manifest.tsv");
    fs::write(&m, tsv).unwrap();
    m
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
fn augment_is_deterministic_across_workers() {
    let tmp = TempDir::new().unwrap();
    let m = synthetic_dataset(&tmp.path().join("data"), 24);
    let mut trees = Vec::new();
    for (workers, out) in [("1", "a"), ("3", "b"), ("1", "c")] {
        let out = tmp.path().join(out);
        let o = augeval(&[
            "augment", "--manifest", p(&m), "--preset", "elastic", "--seed", "7", "--out", p(&out),
            "--workers", workers,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        trees.push(tree(&out));
    }
    assert_eq!(trees[0], trees[1]);
    assert_eq!(trees[0], trees[2]);
    assert_eq!(trees[0].keys().filter(|k| k.ends_with(".png")).count(), 24);
    for name in ["trace.jsonl", "manifest.tsv", "run.json"] {
        assert!(trees[0].contains_key(name), "{name}");
    }
}

#[test]
fn augment_epochs_and_seeds_differ() {
    let tmp = TempDir::new().unwrap();
    let m = synthetic_dataset(&tmp.path().join("data"), 12);
    let run = |seed: &str, epoch: &str, out: &str| {
        let out = tmp.path().join(out);
        let o = augeval(&[
            "augment", "--manifest", p(&m), "--preset", "rot5", "--seed", seed, "--epoch", epoch,
            "--out", p(&out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read_to_string(out.join("trace.jsonl")).unwrap()
    };
    let base = run("1", "0", "a");
    assert_ne!(base, run("1", "1", "b"));
    assert_ne!(base, run("2", "0", "c"));
}

#[test]
fn baseline_outputs_are_preprocessed_originals() {
    let tmp = TempDir::new().unwrap();
    let m = synthetic_dataset(&tmp.path().join("data"), 6);
    let out = tmp.path().join("out");
    let o = augeval(&["augment", "--manifest", p(&m), "--out", p(&out), "--prob", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for i in 0..6 {
        let src = read_png(tmp.path().join(format!("data/img/line{i:04}.png"))).unwrap();
        let got = read_png(out.join(format!("images/{i:06}.png"))).unwrap();
        assert_eq!(got, preprocess_line(&src).unwrap());
    }
    let manifest = fs::read_to_string(out.join("manifest.tsv")).unwrap();
    assert!(manifest.starts_with("images/000000.png\t-\ttest_in_domain\tline 0\n"));
}

#[test]
fn combined_trace_has_independent_coins() {
    let tmp = TempDir::new().unwrap();
    let m = synthetic_dataset(&tmp.path().join("data"), 40);
    let out = tmp.path().join("out");
    let o = augeval(&["augment", "--manifest", p(&m), "--preset", "combined-top3", "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut seen = [0usize; 4];
    for line in fs::read_to_string(out.join("trace.jsonl")).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["config"], "combined-top3");
        assert_eq!(v["seed"], 0);
        let applied = v["applied"].as_array().unwrap();
        let names: Vec<&str> = applied.iter().map(|a| a["config"].as_str().unwrap()).collect();
        let order = ["rot1.5", "shift", "scale75"];
        let idx: Vec<usize> = names.iter().map(|n| order.iter().position(|o| o == n).unwrap()).collect();
        assert!(idx.windows(2).all(|w| w[0] < w[1]), "{names:?}");
        seen[applied.len()] += 1;
    }
    assert!(seen.iter().all(|&c| c > 0), "{seen:?}");
}

#[test]
fn augment_rate_is_one_half() {
    // coins only; tiny images keep this fast
    let img = GrayImage::filled(4, 4, 200);
    let pipeline = Pipeline::resolve("blur").unwrap();
    let n = 10_000;
    let applied = (0..n)
        .filter(|i| {
            let mut rng = record_stream(3, &format!("rec{i}"), 0);
            !pipeline.apply(&img, 0.5, &mut rng).unwrap().1.is_empty()
        })
        .count();
    let frac = applied as f64 / n as f64;
    assert!((frac - 0.5).abs() <= 0.02, "{frac}");
}

#[test]
fn augment_reports_failed_records() {
    let tmp = TempDir::new().unwrap();
    let m = synthetic_dataset(&tmp.path().join("data"), 3);
    let mut text = fs::read_to_string(&m).unwrap();
    text.push_str("img/absent.png\t0\tcv\tx\n");
    fs::write(&m, text).unwrap();
    let out = tmp.path().join("out");
    let o = augeval(&["augment", "--manifest", p(&m), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(fs::read_to_string(out.join("failures.tsv")).unwrap().starts_with("img/absent.png\t"));
    assert_eq!(fs::read_to_string(out.join("trace.jsonl")).unwrap().lines().count(), 3);
}

#[test]
fn usage_and_data_errors() {
    let tmp = TempDir::new().unwrap();
    let m = synthetic_dataset(&tmp.path().join("data"), 2);
    let out = tmp.path().join("out");
    assert_eq!(augeval(&["augment"]).status.code(), Some(1));
    assert_eq!(augeval(&["frobnicate"]).status.code(), Some(1));
    let o = augeval(&["augment", "--manifest", p(&m), "--out", p(&out), "--preset", "rot99"]);
    assert_eq!(o.status.code(), Some(1));
    let o = augeval(&["augment", "--manifest", p(&m), "--out", p(&out), "--prob", "1.5"]);
    assert_eq!(o.status.code(), Some(1));
    let o = augeval(&["--json", "augment", "--manifest", "/nonexistent.tsv", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_str(stderr(&o).trim()).unwrap();
    assert_eq!(v["error"]["code"], 2);
    assert!(v["error"]["message"].as_str().unwrap().contains("nonexistent"));
    let o = augeval(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    for cmd in ["augment", "preview", "score", "compare", "validate"] {
        assert!(stdout(&o).contains(cmd), "{cmd}");
    }
}

#[test]
fn preview_baseline_single_tile() {
    let tmp = TempDir::new().unwrap();
    let src = stroke_image(90, 30, 1);
    let img = tmp.path().join("line.png");
    write_png(&src, &img).unwrap();
    let sheet = tmp.path().join("sheet.png");
    let o = augeval(&["preview", "--preset", "baseline", "--image", p(&img), "--count", "1", "--out", p(&sheet)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_png(&sheet).unwrap(), preprocess_line(&src).unwrap());
}

#[test]
fn preview_rotation_extremes_and_grey_padding() {
    let tmp = TempDir::new().unwrap();
    let img = tmp.path().join("line.png");
    write_png(&GrayImage::filled(100, 20, 255), &img).unwrap();
    let sheet = tmp.path().join("sheet.png");
    let args = ["--json", "preview", "--preset", "rot1.5", "--image", p(&img), "--count", "4", "--seed", "5", "--out", p(&sheet)];
    let o = augeval(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    let tiles = v["tiles"].as_array().unwrap();
    assert_eq!(tiles.len(), 4);
    assert_eq!(tiles[0][0]["angle"], -1.5);
    assert_eq!(tiles[1][0]["angle"], 1.5);
    let first = fs::read(&sheet).unwrap();
    let s = read_png(&sheet).unwrap();
    assert_eq!(s.dimensions(), (LINE_WIDTH, 4 * LINE_HEIGHT));
    // the rotated canvas corners are padding, shown grey; the right-hand
    // preprocessing pad stays black
    let grey: Vec<usize> = (0..LINE_WIDTH).filter(|&x| s.get(x, 0) == PREVIEW_PAD).collect();
    assert!(!grey.is_empty());
    // rotated 100x20 canvas is 101x23, about 281 px wide at height 64
    assert!(grey.iter().all(|&x| x < 285), "{grey:?}");
    assert_eq!(s.get(LINE_WIDTH - 1, 0), 0);
    assert_eq!(s.get(150, 32), 255);
    assert!(augeval(&args).status.success());
    assert_eq!(fs::read(&sheet).unwrap(), first);
}

#[test]
fn preview_rejects_unknown_preset() {
    let tmp = TempDir::new().unwrap();
    let img = tmp.path().join("line.png");
    write_png(&GrayImage::filled(10, 10, 9), &img).unwrap();
    let o = augeval(&["preview", "--preset", "nope", "--image", p(&img), "--out", p(&tmp.path().join("s.png"))]);
    assert_eq!(o.status.code(), Some(1));
}

/// Canonical layout manifest without images.
fn canonical_manifest(dir: &Path) -> PathBuf {
    let mut tsv = String::new();
    for f in 0..5 {
        for i in 0..306 {
            tsv.push_str(&format!("cv/{f}/{i}.png\t{f}\tcv\tword {i} here\n"));
        }
    }
    for i in 0..474 {
        tsv.push_str(&format!("in/{i}.png\t-\ttest_in_domain\tin domain {i}\n"));
    }
    for i in 0..191 {
        tsv.push_str(&format!("out/{i}.png\t-\ttest_out_of_domain\tout of domain {i}\n"));
    }
    let m = dir.join("lion.tsv");
    fs::write(&m, tsv).unwrap();
    m
}

fn manifest_rows(m: &Path) -> Vec<(String, String, String)> {
    fs::read_to_string(m)
        .unwrap()
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.splitn(4, '\t').collect();
            (f[0].to_string(), f[2].to_string(), f[3].to_string())
        })
        .collect()
}

#[test]
fn score_identity_and_split_filter() {
    let tmp = TempDir::new().unwrap();
    let m = canonical_manifest(tmp.path());
    let preds: String = manifest_rows(&m).iter().map(|(id, _, t)| format!("{id}\t{t}\n")).collect();
    let pf = tmp.path().join("preds.tsv");
    fs::write(&pf, preds).unwrap();
    let out = tmp.path().join("score");
    let o = augeval(&[
        "score", "--manifest", p(&m), "--predictions", p(&pf), "--out", p(&out), "--split", "test-out-of-domain",
        "--config", "rot5", "--fold", "3", "--run", "12",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let results = read_results_file(out.join("results.csv")).unwrap();
    let splits: Vec<EvalSplit> = results.iter().map(|r| r.split).collect();
    assert_eq!(
        splits,
        [EvalSplit::Pooled, EvalSplit::Cv, EvalSplit::TestInDomain, EvalSplit::TestOutOfDomain]
    );
    for r in &results {
        assert_eq!((r.cer, r.wer, r.fold, r.run, r.config.as_str()), (0.0, 0.0, 3, 12, "rot5"));
    }
    let lines = fs::read_to_string(out.join("lines.csv")).unwrap();
    assert_eq!(lines.lines().count(), 1 + 191);
    assert_eq!(fs::read_to_string(out.join("missing.txt")).unwrap(), "");
}

#[test]
fn score_missing_predictions() {
    let tmp = TempDir::new().unwrap();
    let m = tmp.path().join("m.tsv");
    fs::write(&m, "a.png\t-\ttest_in_domain\tabcd\nb.png\t-\ttest_in_domain\tef gh\n").unwrap();
    let pf = tmp.path().join("preds.tsv");
    fs::write(&pf, "a.png\tabxd\n").unwrap();
    let out = tmp.path().join("score");
    let o = augeval(&["score", "--manifest", p(&m), "--predictions", p(&pf), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(out.join("missing.txt")).unwrap(), "b.png\n");
    let r = read_results_file(out.join("results.csv")).unwrap();
    assert_eq!(r[0].cer, 0.25);
    assert_eq!(r[0].wer, 1.0);
    let o = augeval(&["score", "--manifest", p(&m), "--predictions", p(&pf), "--out", p(&out), "--strict"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn logits_score_like_decoded_text() {
    let tmp = TempDir::new().unwrap();
    let alphabet = Alphabet::lion_default();
    let m = tmp.path().join("m.tsv");
    let refs = [("l/0.png", "the cat"), ("l/1.png", "sat, on"), ("l/2.png", "a mat!")];
    let hyps = ["the cot", "sat on", "a mat!!"];
    let mut tsv = String::new();
    let mut preds = String::new();
    let mut container = Vec::new();
    for ((id, r), h) in refs.iter().zip(hyps) {
        tsv.push_str(&format!("{id}\t-\ttest_in_domain\t{r}\n"));
        preds.push_str(&format!("{id}\t{h}\n"));
        // each symbol followed by a blank so repeats survive the collapse
        let path: Vec<u32> = h
            .chars()
            .flat_map(|c| [alphabet.index_of(c).unwrap(), 0])
            .collect();
        let lm = LogitMatrix::from_path(&path, alphabet.num_classes()).unwrap();
        let file = tmp.path().join("logits").join(format!("{id}.logits"));
        fs::create_dir_all(file.parent().unwrap()).unwrap();
        fs::write(&file, lm.to_text()).unwrap();
        container.push((id.to_string(), lm));
    }
    fs::write(&m, tsv).unwrap();
    fs::write(tmp.path().join("preds.tsv"), preds).unwrap();
    fs::write(tmp.path().join("all.logits"), write_container(&container)).unwrap();
    let mut outputs = Vec::new();
    for (flag, src, out) in [
        ("--predictions", "preds.tsv", "s1"),
        ("--logits", "logits", "s2"),
        ("--logits", "all.logits", "s3"),
    ] {
        let out = tmp.path().join(out);
        let o = augeval(&["score", "--manifest", p(&m), flag, p(&tmp.path().join(src)), "--out", p(&out), "--strict"]);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push((fs::read(out.join("results.csv")).unwrap(), fs::read(out.join("lines.csv")).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

fn results_rows(config: &str, cer: impl Fn(u32, u32) -> f64) -> Vec<RunResult> {
    let mut out = Vec::new();
    for fold in 0..5 {
        for run in 0..30 {
            let c = cer(fold, run);
            out.push(RunResult {
                config: config.into(),
                fold,
                run,
                split: EvalSplit::Pooled,
                cer: c,
                wer: c * 2.0 + 0.1,
            });
        }
    }
    out
}

fn write_rows(path: &Path, rows: &[RunResult]) {
    let mut buf = Vec::new();
    write_results(&mut buf, rows).unwrap();
    fs::write(path, buf).unwrap();
}

fn base_cer(fold: u32, run: u32) -> f64 {
    0.3 + ((fold * 31 + run * 7) % 23) as f64 * 1e-3
}

#[test]
fn compare_identical_and_shifted() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    write_rows(&a, &results_rows("baseline", base_cer));
    let mut rows = results_rows("same", base_cer);
    rows.extend(results_rows("better", |f, r| base_cer(f, r) - 0.02));
    write_rows(&b, &rows);
    let out = tmp.path().join("cmp");
    let o = augeval(&["compare", p(&a), p(&b), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let verdicts = fs::read_to_string(out.join("verdicts.csv")).unwrap();
    let dir = |config: &str, metric: &str| {
        verdicts
            .lines()
            .find(|l| l.starts_with(&format!("{config},{metric},")))
            .unwrap()
            .rsplit(',')
            .next()
            .unwrap()
            .to_string()
    };
    assert_eq!(dir("same", "cer"), "no_difference");
    assert_eq!(dir("same", "wer"), "no_difference");
    assert_eq!(dir("better", "cer"), "lower");
    assert_eq!(dir("better", "wer"), "lower");
    assert_eq!(dir("baseline", "cer"), "baseline");
    assert_eq!(fs::read_to_string(out.join("report.txt")).unwrap(), stdout(&o));
}

#[test]
fn compare_orders_all_presets() {
    let tmp = TempDir::new().unwrap();
    let mut rows = Vec::new();
    let names: Vec<&str> = augeval::augment::PRESET_NAMES.iter().rev().copied().collect();
    for (k, name) in names.iter().enumerate() {
        rows.extend(results_rows(name, |f, r| base_cer(f, r) + k as f64 * 1e-4));
    }
    let f = tmp.path().join("all.csv");
    write_rows(&f, &rows);
    let o = augeval(&["compare", p(&f)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(lines.len(), 23);
    for (line, name) in lines.iter().zip(augeval::augment::PRESET_NAMES) {
        assert_eq!(line.split(' ').next().unwrap(), name);
    }
    assert!(!stderr(&o).contains("Bonferroni"));
}

#[test]
fn compare_errors() {
    let tmp = TempDir::new().unwrap();
    let f = tmp.path().join("x.csv");
    write_rows(&f, &results_rows("rot5", base_cer));
    let o = augeval(&["compare", p(&f)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("baseline"));
    let mut rows = results_rows("baseline", base_cer);
    rows.extend(results_rows("rot5", base_cer).into_iter().filter(|r| r.run != 4));
    write_rows(&f, &rows);
    let o = augeval(&["compare", p(&f)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("baseline:fold0/run4"));
    let o = augeval(&["compare", p(&f), "--pair-on", "fold-mean"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn validate_reports_layout() {
    let tmp = TempDir::new().unwrap();
    let m = canonical_manifest(tmp.path());
    let o = augeval(&["validate", "--manifest", p(&m), "--no-images"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("verdict: canonical\n"));
    let o = augeval(&["validate", "--manifest", p(&m)]);
    assert_eq!(o.status.code(), Some(2));
    let small = synthetic_dataset(&tmp.path().join("d"), 5);
    let o = augeval(&["validate", "--manifest", p(&small)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("verdict: non-canonical layout\n"));
    let o = augeval(&["validate", "--manifest", p(&small), "--strict"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn trace_replays_exactly() {
    let tmp = TempDir::new().unwrap();
    let m = synthetic_dataset(&tmp.path().join("data"), 8);
    let out = tmp.path().join("out");
    let o = augeval(&["augment", "--manifest", p(&m), "--preset", "noise", "--prob", "1", "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for (i, line) in fs::read_to_string(out.join("trace.jsonl")).unwrap().lines().enumerate() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let draw: Draw = serde_json::from_value(v["applied"][0].clone()).unwrap();
        let src = read_png(tmp.path().join(format!("data/img/line{i:04}.png"))).unwrap();
        let replay = preprocess_line(&draw.apply(&src).unwrap()).unwrap();
        assert_eq!(read_png(out.join(format!("images/{i:06}.png"))).unwrap(), replay);
    }
}
