//! The joint tagger: architecture, loss, inference, training and checkpoints.
//!
//! Data flow for one sentence of `n` tokens:
//!
//! ```text
//! tokens ─ word+char embeddings (n × E)
//!        ─ lower windowed attention, heads concatenated (n × heads·E)
//!        ─ BiLSTM (n × 2H) ──────────── summary ─ intent head ─ y (intent distribution)
//!        ─ upper windowed attention (n × heads·2H)                        │
//!        ─ [M · y | context] per row ◄────────────────────────────────────┘
//!        ─ linear emission scores (n × T) ─ CRF with transitions (T+2 × T+2)
//! ```

mod checkpoint;
mod config;
mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::{CorpusError, Example, Vocabs};
use crate::crf::{crf_nll_on_tape, viterbi, Lattice};
use crate::eval::{intent_accuracy, slot_f1, DatasetResult, EvalError};
use crate::exec::Exec;
use crate::heads::{intent_loss, mask_gate, IntentHead, Linear, PriorMask};
use crate::layers::{char_ids, mh_local_attention, BiLstm, CharEncoder, LocalAttentionHead, TokenEmbedder};
use crate::numerics::{NumError, Tensor, Var};
use crate::params::{glorot, Graph, ParamId, ParamSet};

pub use checkpoint::{load_checkpoint, save_checkpoint, FORMAT_VERSION, MAGIC};
pub use config::{parse_key_values, ModelConfig, TrainConfig};
pub use train::{batch_gradients, train, EpochMetrics, TrainOutcome};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Contract(String),
    #[error("training diverged in epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },
    #[error("checkpoint format: {0}")]
    Format(String),
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Parameter handles of every layer.
#[derive(Clone, Debug)]
struct Layout {
    embed: TokenEmbedder,
    lower: Vec<LocalAttentionHead>,
    encoder: BiLstm,
    upper: Vec<LocalAttentionHead>,
    intent: IntentHead,
    emission: Linear,
    transitions: ParamId,
}

impl Layout {
    fn build(
        params: &mut ParamSet,
        cfg: &ModelConfig,
        vocabs: &Vocabs,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, NumError> {
        let w = cfg.half_width();
        let chars =
            CharEncoder::init(params, "embed.chars", vocabs.chars.len(), cfg.char_dim, cfg.char_hidden, rng)?;
        let embed = TokenEmbedder::init(params, vocabs.words.len(), cfg.word_dim, chars, rng)?;
        let e = embed.output_dim();
        let lower = (0..cfg.heads)
            .map(|h| LocalAttentionHead::init(params, &format!("lower.head{h}"), e, cfg.attention_dim, w, rng))
            .collect::<Result<Vec<_>, _>>()?;
        let encoder = BiLstm::init(params, "encoder", cfg.heads * e, cfg.hidden_dim, rng)?;
        let hd = encoder.output_dim();
        let upper = (0..cfg.heads)
            .map(|h| LocalAttentionHead::init(params, &format!("upper.head{h}"), hd, cfg.attention_dim, w, rng))
            .collect::<Result<Vec<_>, _>>()?;
        let intent = IntentHead::init(params, hd, &cfg.intent_hidden, vocabs.intents.len(), rng)?;
        let tags = vocabs.slots.len();
        let emission = Linear::init(params, "emission", tags + cfg.heads * hd, tags, rng)?;
        let transitions = params.insert("crf.transitions", glorot(rng, tags + 2, tags + 2))?;
        Ok(Layout { embed, lower, encoder, upper, intent, emission, transitions })
    }
}

/// A sentence mapped into the model's index spaces.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedInput {
    pub word_ids: Vec<usize>,
    pub char_ids: Vec<Vec<usize>>,
}

/// An encoded sentence with gold labels.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedExample {
    pub input: EncodedInput,
    pub slots: Vec<usize>,
    pub intent: usize,
}

/// Tape handles of one forward pass.
pub struct ForwardVars {
    pub intent_probs: Var,
    pub emissions: Var,
    pub transitions: Var,
}

/// Model output for one sentence.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Prediction {
    pub tokens: Vec<String>,
    pub intent: String,
    pub intent_probs: Vec<f64>,
    pub slots: Vec<String>,
}

/// Trained (or freshly initialised) joint model: vocabularies, prior mask and parameters.
#[derive(Clone, Debug)]
pub struct JointModel {
    config: ModelConfig,
    vocabs: Vocabs,
    prior: PriorMask,
    params: ParamSet,
    layout: Layout,
}

/// Splits raw text into tokens on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

impl JointModel {
    pub fn new(
        config: ModelConfig,
        vocabs: Vocabs,
        prior: PriorMask,
        seed: u64,
    ) -> Result<Self, ModelError> {
        if vocabs.slots.is_empty() || vocabs.intents.is_empty() {
            return Err(ModelError::Contract("model needs at least one slot label and intent".into()));
        }
        if prior.num_slots() != vocabs.slots.len() || prior.num_intents() != vocabs.intents.len() {
            return Err(ModelError::Contract(format!(
                "prior mask is {} but vocabularies have {} slots and {} intents",
                prior.matrix.shape(),
                vocabs.slots.len(),
                vocabs.intents.len()
            )));
        }
        if config.attention_window % 2 == 0 {
            return Err(ModelError::Config("attention_window must be odd".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let layout = Layout::build(&mut params, &config, &vocabs, &mut rng)?;
        Ok(JointModel { config, vocabs, prior, params, layout })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocabs(&self) -> &Vocabs {
        &self.vocabs
    }

    pub fn prior(&self) -> &PriorMask {
        &self.prior
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn num_tags(&self) -> usize {
        self.vocabs.slots.len()
    }

    pub fn encode_input<S: AsRef<str>>(&self, forms: &[S]) -> Result<EncodedInput, ModelError> {
        if forms.is_empty() {
            return Err(ModelError::Contract("empty sentence".into()));
        }
        let mut word_ids = Vec::with_capacity(forms.len());
        let mut chars = Vec::with_capacity(forms.len());
        for f in forms {
            let f = f.as_ref();
            word_ids.push(self.vocabs.words.encode(&f.to_lowercase()).expect("word vocabulary reserves UNK"));
            chars.push(char_ids(f, &self.vocabs.chars)?);
        }
        Ok(EncodedInput { word_ids, char_ids: chars })
    }

    pub fn encode_example(&self, ex: &Example) -> Result<EncodedExample, ModelError> {
        let input = self.encode_input(&ex.forms)?;
        let slots = ex
            .slots
            .iter()
            .map(|s| {
                self.vocabs
                    .slots
                    .id(s)
                    .ok_or_else(|| ModelError::Contract(format!("unknown slot label {s:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let intent = self
            .vocabs
            .intents
            .id(&ex.intent)
            .ok_or_else(|| ModelError::Contract(format!("unknown intent {:?}", ex.intent)))?;
        Ok(EncodedExample { input, slots, intent })
    }

    /// Records the full forward pass on `g`.
    pub fn forward_graph(&self, g: &mut Graph, input: &EncodedInput) -> Result<ForwardVars, ModelError> {
        let l = &self.layout;
        let embedded = l.embed.embed(g, &input.word_ids, &input.char_ids)?;
        let local = mh_local_attention(g, embedded, &l.lower)?;
        let encoded = l.encoder.run(g, local)?;
        let intent_probs = l.intent.forward(g, encoded.summary)?;
        let context = mh_local_attention(g, encoded.states, &l.upper)?;
        let gated = mask_gate(g, intent_probs, &self.prior, context)?;
        let emissions = l.emission.forward(g, gated)?;
        let transitions = g.param(l.transitions);
        Ok(ForwardVars { intent_probs, emissions, transitions })
    }

    /// Joint loss: intent cross-entropy plus CRF negative log-likelihood.
    pub fn loss_graph(&self, g: &mut Graph, ex: &EncodedExample) -> Result<Var, ModelError> {
        let f = self.forward_graph(g, &ex.input)?;
        let intent = intent_loss(g, f.intent_probs, ex.intent)?;
        let slots = crf_nll_on_tape(&mut g.tape, f.emissions, f.transitions, &ex.slots)?;
        Ok(g.tape.add(intent, slots)?)
    }

    pub fn loss(&self, ex: &Example) -> Result<f64, ModelError> {
        let enc = self.encode_example(ex)?;
        let mut g = Graph::new(&self.params);
        let loss = self.loss_graph(&mut g, &enc)?;
        Ok(g.value(loss).item())
    }

    /// Loss and one dense gradient buffer per parameter (zeros where unused).
    pub fn loss_and_grads(&self, ex: &EncodedExample) -> Result<(f64, Vec<Vec<f64>>), ModelError> {
        let mut g = Graph::new(&self.params);
        let loss = self.loss_graph(&mut g, ex)?;
        let grads = g.backward(loss)?;
        let mut dense: Vec<Vec<f64>> =
            self.params.iter().map(|(_, t)| vec![0.0; t.data().len()]).collect();
        for (slot, grad) in grads.slots() {
            dense[slot] = grad;
        }
        Ok((g.value(loss).item(), dense))
    }

    /// Intent distribution and CRF lattice for raw token forms.
    pub fn forward_joint<S: AsRef<str>>(&self, forms: &[S]) -> Result<(Vec<f64>, Lattice), ModelError> {
        let input = self.encode_input(forms)?;
        self.forward_encoded(&input)
    }

    fn forward_encoded(&self, input: &EncodedInput) -> Result<(Vec<f64>, Lattice), ModelError> {
        let mut g = Graph::new(&self.params);
        let f = self.forward_graph(&mut g, input)?;
        let probs = g.value(f.intent_probs).data().to_vec();
        let lattice = Lattice::new(g.value(f.emissions).clone(), g.value(f.transitions).clone())?;
        Ok((probs, lattice))
    }

    pub fn predict<S: AsRef<str>>(&self, forms: &[S]) -> Result<Prediction, ModelError> {
        let input = self.encode_input(forms)?;
        let (probs, lattice) = self.forward_encoded(&input)?;
        let path = viterbi(&lattice);
        let intent = self.vocabs.intents.decode(Tensor::row(&probs).argmax()).expect("valid id").to_string();
        let slots = path
            .tags
            .iter()
            .map(|t| self.vocabs.slots.decode(*t).expect("valid tag").to_string())
            .collect();
        Ok(Prediction {
            tokens: forms.iter().map(|f| f.as_ref().to_string()).collect(),
            intent,
            intent_probs: probs,
            slots,
        })
    }

    pub fn predict_text(&self, text: &str) -> Result<Prediction, ModelError> {
        self.predict(&tokenize(text))
    }

    pub fn predict_batch(&self, exec: Exec, sentences: &[Vec<String>]) -> Result<Vec<Prediction>, ModelError> {
        exec.try_map(sentences, |s| self.predict(s))
    }

    /// Slot F1 and intent accuracy on labelled data.
    pub fn evaluate(&self, exec: Exec, data: &[Example]) -> Result<DatasetResult, ModelError> {
        let sentences: Vec<Vec<String>> = data.iter().map(|e| e.forms.clone()).collect();
        let preds = self.predict_batch(exec, &sentences)?;
        score_predictions(data, &preds)
    }
}

/// Scores predictions against gold examples.
pub fn score_predictions(gold: &[Example], pred: &[Prediction]) -> Result<DatasetResult, ModelError> {
    let gold_slots: Vec<&[String]> = gold.iter().map(|e| e.slots.as_slice()).collect();
    let pred_slots: Vec<&[String]> = pred.iter().map(|p| p.slots.as_slice()).collect();
    let f1 = slot_f1(
        &gold_slots.iter().map(|s| s.to_vec()).collect::<Vec<_>>(),
        &pred_slots.iter().map(|s| s.to_vec()).collect::<Vec<_>>(),
    )?
    .f1;
    let gi: Vec<&str> = gold.iter().map(|e| e.intent.as_str()).collect();
    let pi: Vec<&str> = pred.iter().map(|p| p.intent.as_str()).collect();
    Ok(DatasetResult { slot_f1: f1, intent_acc: intent_accuracy(&gi, &pi)? })
}
