//! Sentence-level intent classifier and the prior mask that feeds the intent
//! distribution into the slot emissions.

use rand::Rng;

use crate::corpus::{Example, Vocabulary};
use crate::numerics::{NumError, Tensor, Var};
use crate::params::{glorot, Graph, ParamId, ParamSet};

/// Affine map for row vectors: `x · w + b`, `w` is `in × out`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn init(
        params: &mut ParamSet,
        prefix: &str,
        input: usize,
        output: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, NumError> {
        let w = params.insert(format!("{prefix}.w"), glorot(rng, input, output))?;
        let b = params.insert(format!("{prefix}.b"), Tensor::zeros(1, output))?;
        Ok(Linear { w, b })
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var, NumError> {
        let (w, b) = (g.param(self.w), g.param(self.b));
        let y = g.tape.matmul(x, w)?;
        g.tape.add_row(y, b)
    }
}

/// Fully connected classifier: tanh hidden layers, then a softmax output layer.
#[derive(Clone, Debug)]
pub struct IntentHead {
    pub hidden: Vec<Linear>,
    pub output: Linear,
}

impl IntentHead {
    pub fn init(
        params: &mut ParamSet,
        input: usize,
        hidden_sizes: &[usize],
        num_intents: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, NumError> {
        let mut hidden = Vec::with_capacity(hidden_sizes.len());
        let mut width = input;
        for (i, &h) in hidden_sizes.iter().enumerate() {
            hidden.push(Linear::init(params, &format!("intent.hidden{i}"), width, h, rng)?);
            width = h;
        }
        let output = Linear::init(params, "intent.out", width, num_intents, rng)?;
        Ok(IntentHead { hidden, output })
    }

    /// Probability row over intents for the sentence summary `summary` (`1 × d`).
    pub fn forward(&self, g: &mut Graph, summary: Var) -> Result<Var, NumError> {
        let mut x = summary;
        for layer in &self.hidden {
            let z = layer.forward(g, x)?;
            x = g.tape.tanh(z);
        }
        let logits = self.output.forward(g, x)?;
        g.tape.softmax_rows(logits)
    }
}

/// Cross-entropy `−ln p[gold]` of a probability row.
pub fn intent_loss(g: &mut Graph, probs: Var, gold: usize) -> Result<Var, NumError> {
    let n = g.tape.shape(probs).cols;
    if gold >= n {
        return Err(NumError::Contract(format!("gold intent {gold} out of range for {n} intents")));
    }
    let p = g.tape.pick(probs, 0, gold)?;
    let lp = g.tape.ln(p);
    Ok(g.tape.scale(lp, -1.0))
}

/// Empirical `P(slot | intent)` with additive smoothing; `matrix` is `|slots| × |intents|`
/// and each column sums to one.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorMask {
    pub matrix: Tensor,
    pub eps: f64,
}

/// Counts token-level slot labels per intent:
/// `M[s][i] = (count(s, i) + eps) / (Σ_s' count(s', i) + eps · |slots|)`.
///
/// An intent column with no observations and `eps = 0` falls back to uniform.
pub fn build_prior_mask(
    train: &[Example],
    intents: &Vocabulary,
    slots: &Vocabulary,
    eps: f64,
) -> Result<PriorMask, NumError> {
    if train.is_empty() {
        return Err(NumError::Contract("prior mask needs training data".into()));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(NumError::Contract(format!("smoothing must be finite and >= 0, got {eps}")));
    }
    let (ns, ni) = (slots.len(), intents.len());
    let mut counts = vec![vec![0.0f64; ni]; ns];
    for ex in train {
        let i = intents
            .id(&ex.intent)
            .ok_or_else(|| NumError::Contract(format!("unknown intent {:?}", ex.intent)))?;
        for s in &ex.slots {
            let s = slots
                .id(s)
                .ok_or_else(|| NumError::Contract(format!("unknown slot label {s:?}")))?;
            counts[s][i] += 1.0;
        }
    }
    let mut matrix = Tensor::zeros(ns, ni);
    for i in 0..ni {
        let total: f64 = (0..ns).map(|s| counts[s][i]).sum::<f64>() + eps * ns as f64;
        for (s, row) in counts.iter().enumerate() {
            let v = if total > 0.0 { (row[i] + eps) / total } else { 1.0 / ns as f64 };
            matrix.set(s, i, v);
        }
    }
    Ok(PriorMask { matrix, eps })
}

impl PriorMask {
    pub fn num_slots(&self) -> usize {
        self.matrix.rows()
    }

    pub fn num_intents(&self) -> usize {
        self.matrix.cols()
    }

    /// `M · y` for a probability row `y` over intents, on plain values.
    pub fn apply(&self, intent_probs: &[f64]) -> Result<Vec<f64>, NumError> {
        let y = Tensor::row(intent_probs);
        Ok(y.matmul(&self.matrix.transpose())?.into_data())
    }
}

/// Mixes the mask with the intent distribution and prepends it to every row of `context`:
/// row `k` of the result is `[M · y | context_k]`. The mask is a constant.
pub fn mask_gate(
    g: &mut Graph,
    intent_probs: Var,
    mask: &PriorMask,
    context: Var,
) -> Result<Var, NumError> {
    let probs = g.tape.shape(intent_probs);
    if probs.rows != 1 || probs.cols != mask.num_intents() {
        return Err(NumError::Dimension {
            op: "mask_gate",
            left: probs,
            right: mask.matrix.shape(),
        });
    }
    let mt = g.tape.constant(mask.matrix.transpose());
    let mixed = g.tape.matmul(intent_probs, mt)?;
    let n = g.tape.shape(context).rows;
    let tiled = g.tape.repeat_rows(mixed, n)?;
    g.tape.concat_cols(&[tiled, context])
}
