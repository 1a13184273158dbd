//! Intent/slot datasets in the three-file layout used by ATIS and Snips distributions:
//! `seq.in` (space-separated tokens), `seq.out` (space-separated BIO slot labels) and
//! `label` (one intent per line), all line-aligned.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

const TOKENS_FILE: &str = "seq.in";
const SLOTS_FILE: &str = "seq.out";
const INTENTS_FILE: &str = "label";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{file} line {line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error("{0}")]
    Contract(String),
}

/// One annotated sentence. `tokens` are lowercased; `forms` keep the surface spelling
/// and feed the character encoder.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub tokens: Vec<String>,
    pub forms: Vec<String>,
    pub slots: Vec<String>,
    pub intent: String,
}

impl Example {
    pub fn new<S: AsRef<str>>(forms: &[S], slots: &[S], intent: &str) -> Result<Self, CorpusError> {
        if forms.is_empty() {
            return Err(CorpusError::Contract("example has no tokens".into()));
        }
        if forms.len() != slots.len() {
            return Err(CorpusError::Contract(format!(
                "{} tokens but {} slot labels",
                forms.len(),
                slots.len()
            )));
        }
        if let Some(bad) = slots.iter().find(|s| !is_bio_label(s.as_ref())) {
            return Err(CorpusError::Contract(format!("malformed slot label {:?}", bad.as_ref())));
        }
        if intent.is_empty() || intent.contains(char::is_whitespace) {
            return Err(CorpusError::Contract(format!("malformed intent label {intent:?}")));
        }
        let forms: Vec<String> = forms.iter().map(|f| f.as_ref().to_string()).collect();
        Ok(Example {
            tokens: forms.iter().map(|f| f.to_lowercase()).collect(),
            forms,
            slots: slots.iter().map(|s| s.as_ref().to_string()).collect(),
            intent: intent.to_string(),
        })
    }

    /// Parses whitespace-separated tokens, slots and the intent.
    pub fn parse(tokens: &str, slots: &str, intent: &str) -> Result<Self, CorpusError> {
        let forms: Vec<&str> = tokens.split_whitespace().collect();
        let slots: Vec<&str> = slots.split_whitespace().collect();
        Example::new(&forms, &slots, intent.trim())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// `O`, or `B-`/`I-` followed by a non-empty type without whitespace.
pub fn is_bio_label(label: &str) -> bool {
    if label == "O" {
        return true;
    }
    match label.split_once('-') {
        Some((prefix, kind)) => {
            (prefix == "B" || prefix == "I")
                && !kind.is_empty()
                && !kind.contains(char::is_whitespace)
        }
        None => false,
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>, CorpusError> {
    let text = fs::read_to_string(path)
        .map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    Ok(text.lines().map(str::to_string).collect())
}

/// Loads one split from `dir`.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Vec<Example>, CorpusError> {
    let dir = dir.as_ref();
    let tokens = read_lines(&dir.join(TOKENS_FILE))?;
    let slots = read_lines(&dir.join(SLOTS_FILE))?;
    let intents = read_lines(&dir.join(INTENTS_FILE))?;

    let n = tokens.len().max(slots.len()).max(intents.len());
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let line = i + 1;
        let (Some(t), Some(s), Some(l)) = (tokens.get(i), slots.get(i), intents.get(i)) else {
            let file = [(TOKENS_FILE, &tokens), (SLOTS_FILE, &slots), (INTENTS_FILE, &intents)]
                .iter()
                .find(|(_, lines)| lines.len() <= i)
                .map(|(f, _)| f.to_string())
                .unwrap_or_default();
            return Err(CorpusError::Parse {
                file,
                line,
                message: format!(
                    "files are not line-aligned ({TOKENS_FILE}: {}, {SLOTS_FILE}: {}, {INTENTS_FILE}: {})",
                    tokens.len(),
                    slots.len(),
                    intents.len()
                ),
            });
        };
        let ex = Example::parse(t, s, l).map_err(|e| CorpusError::Parse {
            file: dir.display().to_string(),
            line,
            message: e.to_string(),
        })?;
        out.push(ex);
    }
    Ok(out)
}

/// Writes `data` to `dir` in the three-file layout, creating the directory if needed.
pub fn write_dataset(dir: impl AsRef<Path>, data: &[Example]) -> Result<(), CorpusError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| CorpusError::Io { path: dir.to_path_buf(), source })?;
    let mut tokens = String::new();
    let mut slots = String::new();
    let mut intents = String::new();
    for ex in data {
        tokens.push_str(&ex.forms.join(" "));
        tokens.push('\n');
        slots.push_str(&ex.slots.join(" "));
        slots.push('\n');
        intents.push_str(&ex.intent);
        intents.push('\n');
    }
    for (name, body) in [(TOKENS_FILE, tokens), (SLOTS_FILE, slots), (INTENTS_FILE, intents)] {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|source| CorpusError::Io { path, source })?;
    }
    Ok(())
}

/// Bidirectional string/id map. Word and character vocabularies reserve `PAD = 0` and
/// `UNK = 1`; label vocabularies hold only observed labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<String>,
    index: HashMap<String, usize>,
    reserved: bool,
}

impl Vocabulary {
    pub fn with_reserved() -> Self {
        let mut v = Vocabulary { entries: Vec::new(), index: HashMap::new(), reserved: true };
        v.insert(PAD);
        v.insert(UNK);
        v
    }

    pub fn labels() -> Self {
        Vocabulary { entries: Vec::new(), index: HashMap::new(), reserved: false }
    }

    /// Rebuilds a vocabulary from its ordered entries (e.g. read from a checkpoint).
    pub fn from_entries(entries: Vec<String>, reserved: bool) -> Result<Self, CorpusError> {
        if reserved && (entries.first().map(String::as_str) != Some(PAD) || entries.get(1).map(String::as_str) != Some(UNK)) {
            return Err(CorpusError::Contract("reserved vocabulary must start with PAD, UNK".into()));
        }
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if index.insert(e.clone(), i).is_some() {
                return Err(CorpusError::Contract(format!("duplicate vocabulary entry {e:?}")));
            }
        }
        Ok(Vocabulary { entries, index, reserved })
    }

    pub fn insert(&mut self, token: &str) -> usize {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.entries.len();
        self.entries.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Id of `token`, falling back to UNK for reserved vocabularies.
    pub fn encode(&self, token: &str) -> Option<usize> {
        match self.id(token) {
            Some(id) => Some(id),
            None if self.reserved => Some(UNK_ID),
            None => None,
        }
    }

    pub fn decode(&self, id: usize) -> Option<&str> {
        self.entries.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_reserved(&self) -> bool {
        self.reserved
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }
}

/// The four index spaces the model needs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabs {
    pub words: Vocabulary,
    pub chars: Vocabulary,
    pub slots: Vocabulary,
    pub intents: Vocabulary,
}

/// Builds vocabularies from training data. Words seen fewer than `min_count` times are
/// left out (and so encode to UNK); every observed label and character is kept. Slot
/// label `O` always gets id 0 when present.
pub fn build_vocab(data: &[Example], min_count: usize) -> Result<Vocabs, CorpusError> {
    if data.is_empty() {
        return Err(CorpusError::Contract("cannot build vocabularies from an empty dataset".into()));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let mut order: Vec<&str> = Vec::new();
    for ex in data {
        for t in &ex.tokens {
            let c = counts.entry(t).or_insert(0);
            if *c == 0 {
                order.push(t);
            }
            *c += 1;
        }
    }
    let mut words = Vocabulary::with_reserved();
    for t in order {
        if counts[t] >= min_count.max(1) {
            words.insert(t);
        }
    }

    let mut chars = Vocabulary::with_reserved();
    let mut slots = Vocabulary::labels();
    let mut intents = Vocabulary::labels();
    if data.iter().any(|ex| ex.slots.iter().any(|s| s == "O")) {
        slots.insert("O");
    }
    for ex in data {
        for f in &ex.forms {
            let mut buf = [0u8; 4];
            for ch in f.chars() {
                chars.insert(ch.encode_utf8(&mut buf));
            }
        }
        for s in &ex.slots {
            slots.insert(s);
        }
        intents.insert(&ex.intent);
    }
    Ok(Vocabs { words, chars, slots, intents })
}

struct SynthIntent {
    intent: &'static str,
    slot: &'static str,
    templates: &'static [&'static str],
    fillers: &'static [&'static str],
}

const SYNTH: [SynthIntent; 3] = [
    SynthIntent {
        intent: "flight",
        slot: "fromloc.city_name",
        templates: &[
            "show me flights from {}",
            "i need a flight from {} today",
            "list all flights leaving from {}",
            "what flights depart from {} tomorrow",
        ],
        fillers: &["boston", "denver", "dallas", "new york", "san francisco", "salt lake city"],
    },
    SynthIntent {
        intent: "shopping",
        slot: "item",
        templates: &[
            "i want to buy a {}",
            "do you sell {}",
            "how much is the {}",
            "please add a {} to my cart",
        ],
        fillers: &["shirt", "jacket", "hat", "running shoes", "leather belt", "winter coat"],
    },
    SynthIntent {
        intent: "restaurant",
        slot: "cuisine",
        templates: &[
            "book a table for {} food",
            "i am hungry for some {}",
            "find me a {} restaurant nearby",
            "where can i eat {} tonight",
        ],
        fillers: &["thai", "italian", "sushi", "indian", "fried chicken", "dim sum"],
    },
];

/// Deterministic templated corpus: intents `flight`, `shopping`, `restaurant`, one chunk
/// type each (`fromloc.city_name`, `item`, `cuisine`), so six B-/I- labels plus `O`.
/// Sentences are 4 to 9 tokens and fillers include multi-token chunks.
pub fn synth_generate(seed: u64, n: usize) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let intent_def = &SYNTH[i % SYNTH.len()];
        let template = intent_def.templates[rng.random_range(0..intent_def.templates.len())];
        let filler = intent_def.fillers[rng.random_range(0..intent_def.fillers.len())];
        let mut forms = Vec::new();
        let mut slots = Vec::new();
        for word in template.split_whitespace() {
            if word == "{}" {
                for (j, part) in filler.split_whitespace().enumerate() {
                    forms.push(part.to_string());
                    let prefix = if j == 0 { "B" } else { "I" };
                    slots.push(format!("{prefix}-{}", intent_def.slot));
                }
            } else {
                forms.push(word.to_string());
                slots.push("O".to_string());
            }
        }
        out.push(Example::new(&forms, &slots, intent_def.intent).expect("templates are well-formed"));
    }
    out.shuffle(&mut rng);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn table_one() -> Example {
        Example::parse(
            "All flights from boston to washington",
            "O O O B-fromloc.city_name O B-toloc.city_name",
            "flight",
        )
        .unwrap()
    }

    fn write_raw(dir: &Path, tokens: &str, slots: &str, labels: &str) {
        fs::write(dir.join(TOKENS_FILE), tokens).unwrap();
        fs::write(dir.join(SLOTS_FILE), slots).unwrap();
        fs::write(dir.join(INTENTS_FILE), labels).unwrap();
    }

    #[test]
    fn loads_table_one() {
        let dir = tempfile::tempdir().unwrap();
        write_raw(
            dir.path(),
            "All flights from boston to washington\n",
            "O O O B-fromloc.city_name O B-toloc.city_name\n",
            "flight\n",
        );
        let data = load_dataset(dir.path()).unwrap();
        assert_eq!(data, vec![table_one()]);
        assert_eq!(data[0].tokens[0], "all");
        assert_eq!(data[0].forms[0], "All");
        assert_eq!(data[0].slots[3], "B-fromloc.city_name");
    }

    #[test]
    fn empty_files_give_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        write_raw(dir.path(), "", "", "");
        assert!(load_dataset(dir.path()).unwrap().is_empty());
    }

    #[test]
    fn token_slot_length_mismatch_names_line() {
        let dir = tempfile::tempdir().unwrap();
        write_raw(dir.path(), "a b c d e f\n", "O O O O O\n", "x\n");
        match load_dataset(dir.path()) {
            Err(CorpusError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn line_count_mismatch_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        write_raw(dir.path(), "a b\nc d\n", "O O\nO O\n", "x\n");
        match load_dataset(dir.path()) {
            Err(CorpusError::Parse { file, line, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(file, INTENTS_FILE);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(CorpusError::Io { .. })));
    }

    #[test]
    fn bio_grammar() {
        for ok in ["O", "B-x", "I-fromloc.city_name", "B-a-b"] {
            assert!(is_bio_label(ok), "{ok}");
        }
        for bad in ["", "o", "B-", "X-y", "B", "Bx"] {
            assert!(!is_bio_label(bad), "{bad}");
        }
    }

    #[test]
    fn vocab_of_table_one() {
        let v = build_vocab(&[table_one()], 1).unwrap();
        assert_eq!(v.words.len(), 6 + 2);
        assert_eq!(
            v.slots.entries(),
            &["O", "B-fromloc.city_name", "B-toloc.city_name"]
        );
        assert_eq!(v.intents.entries(), &["flight"]);
        // characters come from the raw forms
        assert!(v.chars.id("A").is_some());
    }

    #[test]
    fn min_count_maps_rare_words_to_unk() {
        let mut data = vec![table_one()];
        data.push(Example::parse("flights to denver", "O O B-toloc.city_name", "flight").unwrap());
        let v = build_vocab(&data, 2).unwrap();
        assert_eq!(v.words.encode("boston"), Some(UNK_ID));
        assert_ne!(v.words.encode("flights"), Some(UNK_ID));
    }

    #[test]
    fn empty_data_is_rejected() {
        assert!(build_vocab(&[], 1).is_err());
    }

    #[test]
    fn encode_decode_round_trip() {
        let v = build_vocab(&synth_generate(3, 30), 1).unwrap();
        for voc in [&v.words, &v.chars, &v.slots, &v.intents] {
            for id in 0..voc.len() {
                assert_eq!(voc.encode(voc.decode(id).unwrap()), Some(id));
            }
        }
        assert_eq!(v.slots.encode("B-nothing"), None);
    }

    #[test]
    fn synth_is_deterministic_and_well_formed() {
        let a = synth_generate(7, 30);
        assert_eq!(a, synth_generate(7, 30));
        assert_ne!(a, synth_generate(8, 30));
        for ex in &a {
            assert_eq!(ex.tokens.len(), ex.slots.len());
            assert!((4..=9).contains(&ex.len()), "{:?}", ex.tokens);
        }
        for intent in ["flight", "shopping", "restaurant"] {
            let count = a.iter().filter(|e| e.intent == intent).count();
            assert!(count >= 30 / 3 - 1, "{intent}: {count}");
        }
        let v = build_vocab(&a, 1).unwrap();
        assert_eq!(v.intents.len(), 3);
        assert_eq!(v.slots.len(), 7, "six B-/I- labels plus O: {:?}", v.slots.entries());
        assert!(a.iter().any(|e| e.slots.iter().any(|s| s.starts_with("I-"))));
    }

    #[test]
    fn written_dataset_reloads_equal() {
        let dir = tempfile::tempdir().unwrap();
        let mut data = synth_generate(1, 12);
        data.push(table_one());
        write_dataset(dir.path(), &data).unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap(), data);
    }
}
