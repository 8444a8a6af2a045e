//! SVMlight / libsvm text format.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{Dataset, Example, SparseVector};
use crate::error::{Error, Result};

/// Parses `label idx:val ...` lines. Blank lines and `#` comments are skipped;
/// example ids are 1-based line numbers. Native labels are remapped to
/// `0..K` in ascending native order.
pub fn parse_svmlight<R: BufRead>(input: R) -> Result<Dataset> {
    let mut raw: Vec<(f64, Example)> = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let lineno = n + 1;
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (label, features) = parse_line(body).map_err(|message| Error::Parse {
            line: lineno,
            message,
        })?;
        raw.push((
            label,
            Example {
                id: lineno as u64,
                features,
                label: 0,
                domain: None,
            },
        ));
    }
    if raw.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "no examples in input".into(),
        });
    }

    let mut native: Vec<f64> = raw.iter().map(|(l, _)| *l).collect();
    native.sort_by(f64::total_cmp);
    native.dedup();
    let index: BTreeMap<u64, usize> = native
        .iter()
        .enumerate()
        .map(|(i, v)| (v.to_bits(), i))
        .collect();

    let n_features = raw
        .iter()
        .map(|(_, e)| e.features.max_index())
        .max()
        .unwrap_or(0);
    let examples = raw
        .into_iter()
        .map(|(l, mut e)| {
            e.label = index[&l.to_bits()];
            e
        })
        .collect();
    Ok(Dataset {
        examples,
        native_labels: native,
        n_features,
    })
}

fn parse_line(body: &str) -> std::result::Result<(f64, SparseVector), String> {
    let mut parts = body.split_ascii_whitespace();
    let label_tok = parts.next().ok_or("missing label")?;
    let label: f64 = label_tok
        .parse()
        .map_err(|_| format!("bad label `{label_tok}`"))?;
    if !label.is_finite() {
        return Err(format!("bad label `{label_tok}`"));
    }
    // normalise -0 so it shares a class with 0
    let label = if label == 0.0 { 0.0 } else { label };

    let mut pairs = Vec::new();
    for tok in parts {
        let (idx, val) = tok
            .split_once(':')
            .ok_or_else(|| format!("expected idx:val, got `{tok}`"))?;
        let idx: u32 = idx
            .parse()
            .map_err(|_| format!("bad feature index `{idx}`"))?;
        let val: f64 = val
            .parse()
            .map_err(|_| format!("bad feature value `{val}`"))?;
        pairs.push((idx, val));
    }
    let features = SparseVector::new(pairs).map_err(|e| match e {
        Error::InvalidInput(m) => m,
        other => other.to_string(),
    })?;
    Ok((label, features))
}

pub fn read_svmlight_file(path: impl AsRef<Path>) -> Result<Dataset> {
    let file = File::open(path.as_ref())?;
    parse_svmlight(BufReader::new(file))
}

/// Writes the dataset back in SVMlight format using native label values.
pub fn write_svmlight<W: Write>(dataset: &Dataset, mut out: W) -> Result<()> {
    for ex in &dataset.examples {
        let native = dataset
            .native_labels
            .get(ex.label)
            .ok_or_else(|| Error::invalid(format!("example {} has unknown label", ex.id)))?;
        write!(out, "{native}")?;
        for (i, v) in ex.features.pairs() {
            write!(out, " {i}:{v}")?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Dataset> {
        parse_svmlight(s.as_bytes())
    }

    #[test]
    fn single_line() {
        let ds = parse("1 1:0.5 3:2.0").unwrap();
        assert_eq!(ds.examples.len(), 1);
        let ex = &ds.examples[0];
        assert_eq!(ex.label, 0);
        assert_eq!(ex.id, 1);
        assert_eq!(ex.features.pairs(), &[(1, 0.5), (3, 2.0)]);
        assert_eq!(ds.n_features, 3);
    }

    #[test]
    fn labels_remapped_by_sorted_native_value() {
        let ds = parse("2 1:1\n1 2:1\n").unwrap();
        let labels: Vec<usize> = ds.examples.iter().map(|e| e.label).collect();
        assert_eq!(labels, vec![1, 0]);
        assert_eq!(ds.native_labels, vec![1.0, 2.0]);
    }

    #[test]
    fn signed_labels() {
        let ds = parse("+1 1:1\n-1 1:2\n").unwrap();
        assert_eq!(ds.examples[0].label, 1);
        assert_eq!(ds.examples[1].label, 0);
    }

    #[test]
    fn non_increasing_indices_rejected() {
        match parse("1 3:1 2:1") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(parse("1 2:1 2:3").is_err());
    }

    #[test]
    fn malformed_line_reports_line_number() {
        match parse("1 1:1\n1 1:1\n1 oops\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(parse("x 1:1").is_err());
        assert!(parse("1 1:abc").is_err());
        assert!(parse("1 0:1").is_err());
    }

    #[test]
    fn empty_input_is_error() {
        assert!(parse("").is_err());
        assert!(parse("\n# only a comment\n").is_err());
    }

    #[test]
    fn comments_and_blank_lines_keep_line_ids() {
        let ds = parse("# header\n1 1:1\n\n2 2:1 # trailing\n").unwrap();
        let ids: Vec<u64> = ds.examples.iter().map(|e| e.id).collect();
        assert_eq!(ids, vec![2, 4]);
    }
}
