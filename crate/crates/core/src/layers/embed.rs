use rand::Rng;

use crate::corpus::Vocabulary;
use crate::numerics::{NumError, Var};
use crate::params::{glorot, Graph, ParamId, ParamSet};

use super::lstm::LstmCell;

/// Character ids of `word`, unknown characters mapped to UNK.
pub fn char_ids(word: &str, chars: &Vocabulary) -> Result<Vec<usize>, NumError> {
    if word.is_empty() {
        return Err(NumError::Contract("cannot embed an empty word".into()));
    }
    let mut buf = [0u8; 4];
    Ok(word
        .chars()
        .map(|c| chars.encode(c.encode_utf8(&mut buf)).expect("character vocabulary reserves UNK"))
        .collect())
}

/// Character-level word encoder: a character table read by a forward and a backward LSTM.
#[derive(Clone, Debug)]
pub struct CharEncoder {
    pub table: ParamId,
    pub fwd: LstmCell,
    pub bwd: LstmCell,
}

impl CharEncoder {
    pub fn init(
        params: &mut ParamSet,
        prefix: &str,
        num_chars: usize,
        char_dim: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, NumError> {
        let table = params.insert(format!("{prefix}.table"), glorot(rng, num_chars, char_dim))?;
        let fwd = LstmCell::init(params, &format!("{prefix}.fwd"), char_dim, hidden, rng)?;
        let bwd = LstmCell::init(params, &format!("{prefix}.bwd"), char_dim, hidden, rng)?;
        Ok(CharEncoder { table, fwd, bwd })
    }

    pub fn output_dim(&self) -> usize {
        self.fwd.hidden_dim() + self.bwd.hidden_dim()
    }

    /// `[final forward state | final backward state]` for one word (`1 × 2h`).
    pub fn embed(&self, g: &mut Graph, ids: &[usize]) -> Result<Var, NumError> {
        if ids.is_empty() {
            return Err(NumError::Contract("cannot embed an empty word".into()));
        }
        let table = g.param(self.table);
        let idx: Vec<Option<usize>> = ids.iter().map(|i| Some(*i)).collect();
        let xs = g.tape.select_rows(table, &idx)?;
        let f = self.fwd.run(g, xs, false)?;
        let b = self.bwd.run(g, xs, true)?;
        g.tape.concat_cols(&[f[f.len() - 1], b[0]])
    }
}

/// Concatenated word and character embeddings, one row per token.
#[derive(Clone, Debug)]
pub struct TokenEmbedder {
    pub words: ParamId,
    pub chars: CharEncoder,
    word_dim: usize,
}

impl TokenEmbedder {
    pub fn init(
        params: &mut ParamSet,
        num_words: usize,
        word_dim: usize,
        chars: CharEncoder,
        rng: &mut impl Rng,
    ) -> Result<Self, NumError> {
        let words = params.insert("embed.words", glorot(rng, num_words, word_dim))?;
        Ok(TokenEmbedder { words, chars, word_dim })
    }

    pub fn output_dim(&self) -> usize {
        self.word_dim + self.chars.output_dim()
    }

    pub fn embed(
        &self,
        g: &mut Graph,
        word_ids: &[usize],
        char_ids: &[Vec<usize>],
    ) -> Result<Var, NumError> {
        if word_ids.is_empty() || word_ids.len() != char_ids.len() {
            return Err(NumError::Contract(format!(
                "{} word ids with {} character sequences",
                word_ids.len(),
                char_ids.len()
            )));
        }
        let table = g.param(self.words);
        let idx: Vec<Option<usize>> = word_ids.iter().map(|i| Some(*i)).collect();
        let words = g.tape.select_rows(table, &idx)?;
        let chars = char_ids
            .iter()
            .map(|ids| self.chars.embed(g, ids))
            .collect::<Result<Vec<_>, _>>()?;
        let chars = g.tape.concat_rows(&chars)?;
        g.tape.concat_cols(&[words, chars])
    }
}
