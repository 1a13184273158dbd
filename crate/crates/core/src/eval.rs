//! Chunk-level slot F1 (conlleval semantics), intent accuracy, and a results table.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("{0}")]
    Contract(String),
}

/// A labelled span; `end` is inclusive.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Chunk {
    pub label: String,
    pub start: usize,
    pub end: usize,
}

fn split_label(tag: &str) -> (&str, &str) {
    match tag.split_once('-') {
        Some((p @ ("B" | "I"), kind)) => (p, kind),
        _ => ("O", ""),
    }
}

/// Maximal `B-x (I-x)*` runs. An `I-x` that does not continue an open `x` chunk starts a
/// new one.
pub fn extract_chunks<S: AsRef<str>>(tags: &[S]) -> Vec<Chunk> {
    let mut out = Vec::new();
    let mut open: Option<Chunk> = None;
    for (i, tag) in tags.iter().enumerate() {
        let (prefix, kind) = split_label(tag.as_ref());
        let continues = prefix == "I" && open.as_ref().is_some_and(|c| c.label == kind);
        if continues {
            if let Some(c) = open.as_mut() {
                c.end = i;
            }
            continue;
        }
        if let Some(c) = open.take() {
            out.push(c);
        }
        if prefix != "O" {
            open = Some(Chunk { label: kind.to_string(), start: i, end: i });
        }
    }
    out.extend(open);
    out
}

/// Renders chunks back to BIO tags over `len` positions.
pub fn chunks_to_tags(chunks: &[Chunk], len: usize) -> Vec<String> {
    let mut tags = vec!["O".to_string(); len];
    for c in chunks {
        tags[c.start] = format!("B-{}", c.label);
        for t in tags.iter_mut().take(c.end + 1).skip(c.start + 1) {
            *t = format!("I-{}", c.label);
        }
    }
    tags
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Micro-averaged exact-match chunk precision, recall and F1.
///
/// `P = 0` with no predicted chunks, `R = 0` with no gold chunks, `F1 = 0` if `P + R = 0`.
pub fn slot_f1<S: AsRef<str>>(gold: &[Vec<S>], pred: &[Vec<S>]) -> Result<Scores, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::Contract(format!(
            "{} gold sentences but {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    let (mut correct, mut n_gold, mut n_pred) = (0usize, 0usize, 0usize);
    for (i, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(EvalError::Contract(format!(
                "sentence {i}: {} gold tags but {} predicted",
                g.len(),
                p.len()
            )));
        }
        let gc = extract_chunks(g);
        let pc = extract_chunks(p);
        correct += pc.iter().filter(|c| gc.contains(c)).count();
        n_gold += gc.len();
        n_pred += pc.len();
    }
    let precision = if n_pred == 0 { 0.0 } else { correct as f64 / n_pred as f64 };
    let recall = if n_gold == 0 { 0.0 } else { correct as f64 / n_gold as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Scores { precision, recall, f1 })
}

/// Fraction of exact matches; undefined (an error) for empty input.
pub fn intent_accuracy<S: AsRef<str>>(gold: &[S], pred: &[S]) -> Result<f64, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::Contract(format!(
            "{} gold intents but {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    if gold.is_empty() {
        return Err(EvalError::Contract("accuracy of an empty set is undefined".into()));
    }
    let hits = gold.iter().zip(pred).filter(|(g, p)| g.as_ref() == p.as_ref()).count();
    Ok(hits as f64 / gold.len() as f64)
}

/// Slot F1 and intent accuracy of one model on one dataset, both as fractions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DatasetResult {
    pub slot_f1: f64,
    pub intent_acc: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub model: String,
    /// One entry per dataset column; `None` renders as `--`.
    pub results: Vec<Option<DatasetResult>>,
}

/// Renders a results table with a `Slot (F1) | Intent (Acc)` column pair per dataset,
/// values in percent with two decimals.
pub fn report(datasets: &[&str], rows: &[ReportRow]) -> String {
    let name_width = rows
        .iter()
        .map(|r| r.model.len())
        .chain(std::iter::once("Model".len()))
        .max()
        .unwrap_or(5);
    let mut out = String::new();
    let mut header = format!("{:name_width$}", "");
    for d in datasets {
        write!(header, " | {d}").unwrap();
    }
    out.push_str(header.trim_end());
    out.push('\n');
    let mut columns = format!("{:name_width$}", "Model");
    for _ in datasets {
        columns.push_str(" | Slot (F1) | Intent (Acc)");
    }
    out.push_str(&columns);
    out.push('\n');
    for row in rows {
        let mut line = format!("{:name_width$}", row.model);
        for i in 0..datasets.len() {
            match row.results.get(i).copied().flatten() {
                Some(r) => write!(line, " | {} | {}", percent(r.slot_f1), percent(r.intent_acc)),
                None => write!(line, " | -- | --"),
            }
            .unwrap();
        }
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn percent(fraction: f64) -> String {
    format!("{:.2}", fraction * 100.0)
}
