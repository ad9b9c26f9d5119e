//! Alphabets, dataset manifests and the fixed line geometry.
//!
//! Manifests are UTF-8 TSV with one record per line:
//! `image_path <TAB> fold|- <TAB> split <TAB> transliteration`.
//! The transliteration is the last field and may contain spaces. Blank
//! lines and lines starting with `#` are skipped. All text is NFC-normalised
//! on load.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::raster::{pad_to, resize_height, Anchor, GrayImage};

pub const LINE_HEIGHT: usize = 64;
pub const LINE_WIDTH: usize = 1362;
pub const TARGET_LEN: usize = 271;
pub const BLANK: u32 = 0;
pub const NUM_FOLDS: usize = 5;
pub const FOLD_SIZE: usize = 306;
pub const TEST_IN_DOMAIN: usize = 474;
pub const TEST_OUT_OF_DOMAIN: usize = 191;

/// Default 51-symbol inventory: a-z, äöå, 0-9, space and 11 punctuation
/// marks. The punctuation selection is a best guess.
pub const DEFAULT_SYMBOLS: &str = "abcdefghijklmnopqrstuvwxyzäöå0123456789 .,!?-:;'\"()";

pub fn nfc(s: &str) -> String {
    s.nfc().collect()
}

/// Ordered symbol set. Class 0 is the CTC blank; symbols occupy 1..=len.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<char>,
    index: HashMap<char, u32>,
}

impl Alphabet {
    pub fn new(symbols: impl IntoIterator<Item = char>) -> Result<Self> {
        let symbols: Vec<char> = symbols.into_iter().collect();
        if symbols.is_empty() {
            return Err(Error::Alphabet("alphabet is empty".into()));
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, &c) in symbols.iter().enumerate() {
            if index.insert(c, i as u32 + 1).is_some() {
                return Err(Error::Alphabet(format!("duplicate symbol {c:?}")));
            }
        }
        Ok(Alphabet { symbols, index })
    }

    pub fn lion_default() -> Self {
        Alphabet::new(DEFAULT_SYMBOLS.chars()).expect("default alphabet is valid")
    }

    /// One symbol per line, in index order. A line holding a single space
    /// is the space symbol.
    pub fn parse(text: &str) -> Result<Self> {
        let mut symbols = Vec::new();
        for (n, raw) in text.split('\n').enumerate() {
            let line = nfc(raw.strip_suffix('\r').unwrap_or(raw));
            if line.is_empty() {
                continue;
            }
            let mut chars = line.chars();
            let c = chars.next().unwrap();
            if chars.next().is_some() {
                return Err(Error::Alphabet(format!(
                    "line {}: expected one symbol, got {line:?}",
                    n + 1
                )));
            }
            symbols.push(c);
        }
        Alphabet::new(symbols)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Alphabet::parse(&text)
    }

    pub fn to_text(&self) -> String {
        self.symbols.iter().map(|c| format!("{c}\n")).collect()
    }

    /// Number of real symbols, blank excluded.
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Symbols plus the blank.
    pub fn num_classes(&self) -> usize {
        self.symbols.len() + 1
    }

    pub fn index_of(&self, c: char) -> Option<u32> {
        self.index.get(&c).copied()
    }

    pub fn symbol(&self, class: u32) -> Option<char> {
        if class == BLANK {
            return None;
        }
        self.symbols.get(class as usize - 1).copied()
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }
}

/// Height-normalises to 64 rows and pads on the right to 1362 columns.
pub fn preprocess_line(img: &GrayImage) -> Result<GrayImage> {
    let scaled = resize_height(img, LINE_HEIGHT)?;
    if scaled.width() > LINE_WIDTH {
        return Err(Error::TooWide {
            width: scaled.width(),
            limit: LINE_WIDTH,
        });
    }
    pad_to(&scaled, LINE_WIDTH, LINE_HEIGHT, Anchor::TopLeft)
}

/// Symbol indices padded with blanks to [`TARGET_LEN`].
pub fn encode_target(text: &str, alphabet: &Alphabet) -> Result<Vec<u32>> {
    let text = nfc(text);
    let mut out = Vec::with_capacity(TARGET_LEN);
    for (position, c) in text.chars().enumerate() {
        let idx = alphabet
            .index_of(c)
            .ok_or(Error::UnknownSymbol { symbol: c, position })?;
        out.push(idx);
    }
    if out.len() > TARGET_LEN {
        return Err(Error::TargetTooLong {
            len: out.len(),
            limit: TARGET_LEN,
        });
    }
    out.resize(TARGET_LEN, BLANK);
    Ok(out)
}

pub fn decode_target(target: &[u32], alphabet: &Alphabet) -> String {
    target.iter().filter_map(|&i| alphabet.symbol(i)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Cv,
    TestInDomain,
    TestOutOfDomain,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Cv => "cv",
            Split::TestInDomain => "test_in_domain",
            Split::TestOutOfDomain => "test_out_of_domain",
        }
    }

    pub fn is_test(&self) -> bool {
        !matches!(self, Split::Cv)
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cv" => Ok(Split::Cv),
            "test_in_domain" => Ok(Split::TestInDomain),
            "test_out_of_domain" => Ok(Split::TestOutOfDomain),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineRecord {
    /// Path as written in the manifest; also the record id.
    pub image_path: String,
    pub transliteration: String,
    pub fold: Option<u8>,
    pub split: Split,
}

impl LineRecord {
    pub fn id(&self) -> &str {
        &self.image_path
    }
}

#[derive(Debug, Clone)]
pub struct Manifest {
    pub records: Vec<LineRecord>,
    pub alphabet: Alphabet,
    /// Directory relative image paths resolve against.
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn parse(text: &str, alphabet: Alphabet, source: &Path) -> Result<Manifest> {
        let perr = |line: usize, message: String| Error::Parse {
            path: source.to_path_buf(),
            line,
            message,
        };
        let mut records = Vec::new();
        for (n, raw) in text.split('\n').enumerate() {
            let lineno = n + 1;
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.splitn(4, '\t').collect();
            if fields.len() != 4 {
                return Err(perr(lineno, format!("expected 4 tab-separated fields, got {}", fields.len())));
            }
            if fields[0].is_empty() {
                return Err(perr(lineno, "empty image path".into()));
            }
            let fold = match fields[1] {
                "-" => None,
                f => match f.parse::<u8>() {
                    Ok(v) if (v as usize) < NUM_FOLDS => Some(v),
                    _ => return Err(perr(lineno, format!("fold must be 0-4 or '-', got {f:?}"))),
                },
            };
            let split: Split = fields[2].parse().map_err(|e| perr(lineno, e))?;
            match (split, fold) {
                (Split::Cv, None) => return Err(perr(lineno, "cv records need a fold".into())),
                (s, Some(_)) if s.is_test() => {
                    return Err(perr(lineno, "test records take '-' as fold".into()))
                }
                _ => {}
            }
            records.push(LineRecord {
                image_path: nfc(fields[0]),
                transliteration: nfc(fields[3]),
                fold,
                split,
            });
        }
        Ok(Manifest {
            records,
            alphabet,
            base_dir: source.parent().map(Path::to_path_buf).unwrap_or_default(),
        })
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let fold = r.fold.map_or_else(|| "-".to_string(), |f| f.to_string());
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                r.image_path, fold, r.split, r.transliteration
            ));
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn resolve_image(&self, record: &LineRecord) -> PathBuf {
        let p = Path::new(&record.image_path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn get(&self, id: &str) -> Option<&LineRecord> {
        self.records.iter().find(|r| r.id() == id)
    }
}

pub fn load_manifest(path: impl AsRef<Path>, alphabet: Alphabet) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Manifest::parse(&text, alphabet, path)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    UnknownSymbol {
        record: usize,
        symbol: char,
        position: usize,
    },
    TargetTooLong {
        record: usize,
        len: usize,
    },
    MissingImage {
        record: usize,
        path: String,
    },
    DuplicateId {
        record: usize,
        id: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownSymbol {
                record,
                symbol,
                position,
            } => write!(f, "record {record}: symbol {symbol:?} at position {position} not in alphabet"),
            Violation::TargetTooLong { record, len } => {
                write!(f, "record {record}: {len} symbols exceeds {TARGET_LEN}")
            }
            Violation::MissingImage { record, path } => {
                write!(f, "record {record}: image {path} not found")
            }
            Violation::DuplicateId { record, id } => write!(f, "record {record}: duplicate id {id}"),
        }
    }
}

/// Result of checking a manifest against the canonical fold layout.
#[derive(Debug, Clone, Serialize)]
pub struct LayoutReport {
    pub fold_sizes: [usize; NUM_FOLDS],
    pub cv_lines: usize,
    pub test_in_domain: usize,
    pub test_out_of_domain: usize,
    /// Layout deviations; informational only.
    pub deviations: Vec<String>,
    pub violations: Vec<Violation>,
}

impl LayoutReport {
    pub fn is_canonical(&self) -> bool {
        self.deviations.is_empty() && self.violations.is_empty()
    }

    pub fn verdict(&self) -> &'static str {
        if self.is_canonical() {
            "canonical"
        } else if self.violations.is_empty() {
            "non-canonical layout"
        } else {
            "invalid"
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("verdict: {}\n", self.verdict()));
        s.push_str(&format!(
            "folds: {}\n",
            self.fold_sizes.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("/")
        ));
        s.push_str(&format!("cv lines: {}\n", self.cv_lines));
        s.push_str(&format!("test in-domain: {}\n", self.test_in_domain));
        s.push_str(&format!("test out-of-domain: {}\n", self.test_out_of_domain));
        for d in &self.deviations {
            s.push_str(&format!("deviation: {d}\n"));
        }
        for v in &self.violations {
            s.push_str(&format!("violation: {v}\n"));
        }
        s
    }
}

/// Checks fold and split sizes, symbol coverage and target lengths. With
/// `check_images`, also reports records whose image file is missing.
pub fn validate_lion_layout(m: &Manifest, check_images: bool) -> LayoutReport {
    let mut fold_sizes = [0usize; NUM_FOLDS];
    let (mut cv, mut tin, mut tout) = (0, 0, 0);
    let mut violations = Vec::new();
    let mut seen = HashSet::new();
    for (i, r) in m.records.iter().enumerate() {
        match r.split {
            Split::Cv => {
                cv += 1;
                if let Some(f) = r.fold {
                    fold_sizes[f as usize] += 1;
                }
            }
            Split::TestInDomain => tin += 1,
            Split::TestOutOfDomain => tout += 1,
        }
        if !seen.insert(r.id()) {
            violations.push(Violation::DuplicateId {
                record: i,
                id: r.id().to_string(),
            });
        }
        match encode_target(&r.transliteration, &m.alphabet) {
            Ok(_) => {}
            Err(Error::UnknownSymbol { symbol, position }) => violations.push(Violation::UnknownSymbol {
                record: i,
                symbol,
                position,
            }),
            Err(Error::TargetTooLong { len, .. }) => {
                violations.push(Violation::TargetTooLong { record: i, len })
            }
            Err(_) => unreachable!("encode_target only fails on symbols or length"),
        }
        if check_images && !m.resolve_image(r).is_file() {
            violations.push(Violation::MissingImage {
                record: i,
                path: r.image_path.clone(),
            });
        }
    }
    let mut deviations = Vec::new();
    for (f, &n) in fold_sizes.iter().enumerate() {
        if n != FOLD_SIZE {
            deviations.push(format!("fold {f} has {n} lines, expected {FOLD_SIZE}"));
        }
    }
    if tin != TEST_IN_DOMAIN {
        deviations.push(format!("test_in_domain has {tin} lines, expected {TEST_IN_DOMAIN}"));
    }
    if tout != TEST_OUT_OF_DOMAIN {
        deviations.push(format!(
            "test_out_of_domain has {tout} lines, expected {TEST_OUT_OF_DOMAIN}"
        ));
    }
    LayoutReport {
        fold_sizes,
        cv_lines: cv,
        test_in_domain: tin,
        test_out_of_domain: tout,
        deviations,
        violations,
    }
}
