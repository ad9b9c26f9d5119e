//! Best-path CTC decoding.
//!
//! Matrix files are plain text: a `T C` header line followed by `T` rows of
//! `C` whitespace-separated reals. A container holds several matrices:
//!
//! ```text
//! records <N>
//! # <record id>
//! T C
//! ...T rows...
//! # <next record id>
//! ...
//! ```

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::textdata::{Alphabet, BLANK};

/// Per-timestep class scores, row-major `T x C`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitMatrix {
    timesteps: usize,
    classes: usize,
    values: Vec<f64>,
}

impl LogitMatrix {
    pub fn new(timesteps: usize, classes: usize, values: Vec<f64>) -> Result<Self> {
        if timesteps < 1 || classes < 2 {
            return Err(Error::InvalidLogits(format!(
                "need T >= 1 and C >= 2, got {timesteps}x{classes}"
            )));
        }
        if values.len() != timesteps * classes {
            return Err(Error::InvalidLogits(format!(
                "expected {} values, got {}",
                timesteps * classes,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidLogits(format!(
                "non-finite score at t={}, c={}",
                i / classes,
                i % classes
            )));
        }
        Ok(LogitMatrix {
            timesteps,
            classes,
            values,
        })
    }

    /// One-hot scores realising a given argmax path.
    pub fn from_path(path: &[u32], classes: usize) -> Result<Self> {
        let mut values = vec![0.0; path.len() * classes];
        for (t, &c) in path.iter().enumerate() {
            if c as usize >= classes {
                return Err(Error::InvalidLogits(format!("class {c} out of range at t={t}")));
            }
            values[t * classes + c as usize] = 1.0;
        }
        LogitMatrix::new(path.len(), classes, values)
    }

    pub fn timesteps(&self) -> usize {
        self.timesteps
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.classes..(t + 1) * self.classes]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Argmax class per timestep; ties go to the lowest index.
    pub fn argmax_path(&self) -> Vec<u32> {
        (0..self.timesteps)
            .map(|t| {
                let row = self.row(t);
                let mut best = 0;
                for (c, &v) in row.iter().enumerate().skip(1) {
                    if v > row[best] {
                        best = c;
                    }
                }
                best as u32
            })
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidLogits("missing 'T C' header".into()))?;
        let (t, c) = parse_header(header)?;
        let mut values = Vec::with_capacity(t * c);
        for row in 0..t {
            let line = lines
                .next()
                .ok_or_else(|| Error::InvalidLogits(format!("expected {t} rows, got {row}")))?;
            parse_row(line, c, row, &mut values)?;
        }
        if lines.next().is_some() {
            return Err(Error::InvalidLogits(format!("more than {t} rows")));
        }
        LogitMatrix::new(t, c, values)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.timesteps, self.classes);
        for t in 0..self.timesteps {
            let row: Vec<String> = self.row(t).iter().map(|v| format!("{v}")).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        LogitMatrix::parse(&text).map_err(|e| match e {
            Error::InvalidLogits(m) => Error::InvalidLogits(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

fn parse_header(line: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    match parts.as_slice() {
        [t, c] => match (t.parse(), c.parse()) {
            (Ok(t), Ok(c)) => Ok((t, c)),
            _ => Err(Error::InvalidLogits(format!("bad header {line:?}"))),
        },
        _ => Err(Error::InvalidLogits(format!("bad header {line:?}"))),
    }
}

fn parse_row(line: &str, classes: usize, row: usize, out: &mut Vec<f64>) -> Result<()> {
    let before = out.len();
    for tok in line.split_whitespace() {
        let v: f64 = tok
            .parse()
            .map_err(|_| Error::InvalidLogits(format!("row {row}: bad number {tok:?}")))?;
        out.push(v);
    }
    if out.len() - before != classes {
        return Err(Error::InvalidLogits(format!(
            "row {row}: expected {classes} values, got {}",
            out.len() - before
        )));
    }
    Ok(())
}

/// Parses a multi-record container into `(record id, matrix)` pairs.
pub fn parse_container(text: &str) -> Result<Vec<(String, LogitMatrix)>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidLogits("empty container".into()))?;
    let n: usize = header
        .strip_prefix("records ")
        .and_then(|n| n.trim().parse().ok())
        .ok_or_else(|| Error::InvalidLogits(format!("bad container header {header:?}")))?;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let id_line = lines
            .next()
            .ok_or_else(|| Error::InvalidLogits(format!("expected {n} records, got {i}")))?;
        let id = id_line
            .strip_prefix("# ")
            .ok_or_else(|| Error::InvalidLogits(format!("record {i}: expected '# <id>'")))?
            .to_string();
        let (t, c) = parse_header(
            lines
                .next()
                .ok_or_else(|| Error::InvalidLogits(format!("record {id}: missing header")))?,
        )?;
        let mut values = Vec::with_capacity(t * c);
        for row in 0..t {
            let line = lines
                .next()
                .ok_or_else(|| Error::InvalidLogits(format!("record {id}: missing row {row}")))?;
            parse_row(line, c, row, &mut values)?;
        }
        out.push((id, LogitMatrix::new(t, c, values)?));
    }
    if lines.next().is_some() {
        return Err(Error::InvalidLogits(format!("more than {n} records")));
    }
    Ok(out)
}

pub fn write_container(records: &[(String, LogitMatrix)]) -> String {
    let mut s = String::new();
    writeln!(s, "records {}", records.len()).unwrap();
    for (id, m) in records {
        writeln!(s, "# {id}").unwrap();
        s.push_str(&m.to_text());
    }
    s
}

/// Merges adjacent repeats, then drops blanks.
pub fn collapse_path(path: &[u32]) -> Vec<u32> {
    let mut out = Vec::new();
    let mut prev = None;
    for &c in path {
        if Some(c) != prev && c != BLANK {
            out.push(c);
        }
        prev = Some(c);
    }
    out
}

pub fn best_path_decode(m: &LogitMatrix, alphabet: &Alphabet) -> Result<String> {
    if m.classes() != alphabet.num_classes() {
        return Err(Error::ClassMismatch {
            classes: m.classes(),
            expected: alphabet.num_classes(),
        });
    }
    Ok(collapse_path(&m.argmax_path())
        .into_iter()
        .map(|c| alphabet.symbol(c).expect("class within alphabet"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ab() -> Alphabet {
        Alphabet::new("ab".chars()).unwrap()
    }

    fn decode_path(path: &[u32]) -> String {
        best_path_decode(&LogitMatrix::from_path(path, 3).unwrap(), &ab()).unwrap()
    }

    #[test]
    fn examples() {
        assert_eq!(decode_path(&[0, 0, 0]), "");
        assert_eq!(decode_path(&[1, 1, 0, 1, 2]), "aab");
        assert_eq!(decode_path(&[1, 0, 1]), "aa");
        assert_eq!(decode_path(&[1, 1, 1]), "a");
    }

    #[test]
    fn ties_pick_lowest_class() {
        let m = LogitMatrix::new(2, 3, vec![0.2, 0.5, 0.5, 0.7, 0.7, 0.1]).unwrap();
        assert_eq!(m.argmax_path(), vec![1, 0]);
    }

    #[test]
    fn class_count_must_match() {
        let m = LogitMatrix::from_path(&[1, 2], 3).unwrap();
        assert!(matches!(
            best_path_decode(&m, &Alphabet::lion_default()),
            Err(Error::ClassMismatch { classes: 3, expected: 52 })
        ));
    }

    #[test]
    fn invalid_matrices() {
        assert!(LogitMatrix::new(0, 3, vec![]).is_err());
        assert!(LogitMatrix::new(1, 1, vec![0.0]).is_err());
        assert!(LogitMatrix::new(1, 2, vec![0.0]).is_err());
        assert!(LogitMatrix::new(1, 2, vec![0.0, f64::NAN]).is_err());
        assert!(LogitMatrix::parse("2 2\n1 2\n").is_err());
        assert!(LogitMatrix::parse("1 2\n1 2 3\n").is_err());
        assert!(LogitMatrix::parse("1 2\n1 x\n").is_err());
        assert!(LogitMatrix::parse("1 2\n1 2\n3 4\n").is_err());
    }

    #[test]
    fn text_format() {
        let m = LogitMatrix::parse("2 3\n-1.5 2 0.25\n3e-2 -4 9\n").unwrap();
        assert_eq!(m.timesteps(), 2);
        assert_eq!(m.row(1), &[0.03, -4.0, 9.0]);
        assert_eq!(LogitMatrix::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn container_format() {
        let recs = vec![
            ("x/1.png".to_string(), LogitMatrix::from_path(&[1, 0, 2], 3).unwrap()),
            ("x/2.png".to_string(), LogitMatrix::from_path(&[2], 3).unwrap()),
        ];
        let text = write_container(&recs);
        assert!(text.starts_with("records 2\n# x/1.png\n3 3\n"));
        assert_eq!(parse_container(&text).unwrap(), recs);
        assert!(parse_container("records 3\n# a\n1 2\n0 1\n").is_err());
    }

    proptest! {
        #[test]
        fn blank_insertion_invariance(path in proptest::collection::vec(0u32..3, 1..12), at in 0usize..12) {
            let at = at.min(path.len());
            let mut longer = path.clone();
            longer.insert(at, 0);
            // a blank between two equal symbols splits them, so compare only
            // where it lands next to a blank or a symbol change
            let left = if at > 0 { Some(path[at - 1]) } else { None };
            let right = path.get(at).copied();
            if left.is_none() || right.is_none() || left != right || left == Some(0) {
                prop_assert_eq!(decode_path(&longer), decode_path(&path));
            }
            prop_assert!(decode_path(&path).chars().count() <= path.len());
        }

        #[test]
        fn monotone_transform_invariance(vals in proptest::collection::vec(-5.0f64..5.0, 3..30)) {
            let t = vals.len() / 3;
            let m = LogitMatrix::new(t, 3, vals[..t * 3].to_vec()).unwrap();
            let soft: Vec<f64> = m.values().iter().map(|v| v.exp() * 2.0 + 1.0).collect();
            let m2 = LogitMatrix::new(t, 3, soft).unwrap();
            prop_assert_eq!(m.argmax_path(), m2.argmax_path());
        }
    }
}
