use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::{Catalog, DstError};
use crate::eval::extract_chunks;
use crate::model::Prediction;

/// User dialog acts the tracker understands.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DialogAct {
    Byemsg,
    Greeting,
    Inform,
    Request,
    AskRecommend,
    Deny,
    Other,
}

impl DialogAct {
    pub const ALL: [DialogAct; 7] = [
        DialogAct::Byemsg,
        DialogAct::Greeting,
        DialogAct::Inform,
        DialogAct::Request,
        DialogAct::AskRecommend,
        DialogAct::Deny,
        DialogAct::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DialogAct::Byemsg => "byemsg",
            DialogAct::Greeting => "greeting",
            DialogAct::Inform => "inform",
            DialogAct::Request => "request",
            DialogAct::AskRecommend => "ask_recommend",
            DialogAct::Deny => "deny",
            DialogAct::Other => "other",
        }
    }
}

impl fmt::Display for DialogAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DialogAct {
    type Err = DstError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DialogAct::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| DstError::Config(format!("unknown dialog act {s:?}")))
    }
}

/// What the language understanding step extracted from one user utterance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NluResult {
    pub intent: DialogAct,
    /// `(slot, value)` pairs; a requested slot carries the value `?`.
    pub chunks: Vec<(String, String)>,
}

impl NluResult {
    pub fn new(intent: DialogAct) -> Self {
        NluResult { intent, chunks: Vec::new() }
    }

    pub fn with(mut self, slot: &str, value: &str) -> Self {
        self.chunks.push((slot.to_string(), value.to_string()));
        self
    }
}

fn parse_phrases(value: &str) -> Vec<Vec<String>> {
    value
        .split('|')
        .map(|p| p.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>())
        .filter(|p| !p.is_empty())
        .collect()
}

fn find_phrase(tokens: &[String], phrase: &[String]) -> Option<usize> {
    if phrase.len() > tokens.len() {
        return None;
    }
    (0..=tokens.len() - phrase.len()).find(|&i| tokens[i..i + phrase.len()] == *phrase)
}

/// Lowercased words with surrounding punctuation removed; inner apostrophes are kept.
pub fn normalize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Keyword understanding used when no trained model is loaded.
///
/// Rules file, one `act = phrase | phrase` per line, tried in file order; the first act with
/// a matching phrase wins. `request.<slot> = phrases` lines mark phrases that ask for a slot.
/// Slot values are the catalog's own values. An utterance with no act phrase but with catalog
/// values is an inform; with neither it is `other`.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleNlu {
    acts: Vec<(DialogAct, Vec<Vec<String>>)>,
    requests: Vec<(String, Vec<Vec<String>>)>,
}

impl RuleNlu {
    pub fn parse(text: &str) -> Result<Self, DstError> {
        let mut acts = Vec::new();
        let mut requests = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| DstError::Config(format!("rules line {}: expected act = phrases", i + 1)))?;
            let k = k.trim();
            match k.strip_prefix("request.") {
                Some(slot) => requests.push((slot.to_string(), parse_phrases(v))),
                None => acts.push((k.parse()?, parse_phrases(v))),
            }
        }
        Ok(RuleNlu { acts, requests })
    }

    pub fn understand(&self, text: &str, catalog: &Catalog) -> NluResult {
        let tokens = normalize(text);
        let mut values = Vec::new();
        for slot in &catalog.slots {
            for v in catalog.values(slot) {
                let phrase: Vec<String> = v.split_whitespace().map(str::to_string).collect();
                if let Some(at) = find_phrase(&tokens, &phrase) {
                    values.push((at, at + phrase.len(), slot.clone(), v.to_string()));
                }
            }
        }
        // leftmost first, longest first; drop matches inside an accepted one
        values.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        let mut covered = 0;
        let mut kept = Vec::new();
        for (start, end, slot, value) in values {
            if start >= covered {
                covered = end;
                kept.push((slot, value));
            }
        }
        let values = kept;
        let requested: Vec<(String, String)> = self
            .requests
            .iter()
            .filter(|(_, ps)| ps.iter().any(|p| find_phrase(&tokens, p).is_some()))
            .map(|(slot, _)| (slot.clone(), "?".to_string()))
            .collect();

        let act = self
            .acts
            .iter()
            .find(|(_, ps)| ps.iter().any(|p| find_phrase(&tokens, p).is_some()))
            .map(|(a, _)| *a);
        let intent = match act {
            Some(a) => a,
            None if !requested.is_empty() => DialogAct::Request,
            None if !values.is_empty() => DialogAct::Inform,
            None => DialogAct::Other,
        };
        let chunks = match intent {
            DialogAct::Request => requested,
            DialogAct::Inform | DialogAct::Deny | DialogAct::AskRecommend => values,
            _ => Vec::new(),
        };
        NluResult { intent, chunks }
    }
}

/// Maps model intent labels onto dialog acts (`label = act` lines); unmapped labels are
/// `other`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IntentMap {
    map: BTreeMap<String, DialogAct>,
}

impl IntentMap {
    pub fn parse(text: &str) -> Result<Self, DstError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| DstError::Config(format!("intent map line {}: expected label = act", i + 1)))?;
            map.insert(k.trim().to_string(), v.trim().parse()?);
        }
        Ok(IntentMap { map })
    }

    pub fn act(&self, intent: &str) -> DialogAct {
        self.map.get(intent).copied().unwrap_or(DialogAct::Other)
    }

    /// Dialog act and slot chunks from a tagger prediction. Chunk values are the covered
    /// tokens joined by spaces, lowercased.
    pub fn from_prediction(&self, p: &Prediction) -> NluResult {
        let chunks = extract_chunks(&p.slots)
            .into_iter()
            .map(|c| (c.label, p.tokens[c.start..=c.end].join(" ").to_lowercase()))
            .collect();
        NluResult { intent: self.act(&p.intent), chunks }
    }
}
