use rand::Rng;

use crate::numerics::{NumError, Tensor, Var};
use crate::params::{glorot, Graph, ParamId, ParamSet};

/// Standard LSTM cell with sigmoid input/forget/output gates and a tanh candidate.
///
/// Weights are stored for row-vector inputs: `wx` is `input × 4h`, `wh` is `h × 4h` and
/// `bias` is `1 × 4h`, each split column-wise into the gate blocks `[i | f | g | o]`.
#[derive(Clone, Debug)]
pub struct LstmCell {
    pub wx: ParamId,
    pub wh: ParamId,
    pub bias: ParamId,
    input: usize,
    hidden: usize,
}

impl LstmCell {
    pub fn init(
        params: &mut ParamSet,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, NumError> {
        let wx = params.insert(format!("{prefix}.wx"), glorot(rng, input, 4 * hidden))?;
        let wh = params.insert(format!("{prefix}.wh"), glorot(rng, hidden, 4 * hidden))?;
        let mut b = Tensor::zeros(1, 4 * hidden);
        for j in hidden..2 * hidden {
            b.set(0, j, 1.0);
        }
        let bias = params.insert(format!("{prefix}.bias"), b)?;
        Ok(LstmCell { wx, wh, bias, input, hidden })
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    /// Runs the cell over the rows of `xs` (`n × input`) from zero initial state, left to
    /// right or right to left. Hidden states come back indexed by input position.
    pub fn run(&self, g: &mut Graph, xs: Var, reverse: bool) -> Result<Vec<Var>, NumError> {
        let n = g.tape.shape(xs).rows;
        let d = self.hidden;
        let (wx, wh, bias) = (g.param(self.wx), g.param(self.wh), g.param(self.bias));
        let proj = g.tape.matmul(xs, wx)?;
        let proj = g.tape.add_row(proj, bias)?;

        let mut states: Vec<Option<Var>> = vec![None; n];
        let mut prev: Option<(Var, Var)> = None;
        let order: Box<dyn Iterator<Item = usize>> =
            if reverse { Box::new((0..n).rev()) } else { Box::new(0..n) };
        for t in order {
            let mut pre = g.tape.row(proj, t)?;
            if let Some((h, _)) = prev {
                let rec = g.tape.matmul(h, wh)?;
                pre = g.tape.add(pre, rec)?;
            }
            let i = g.tape.slice_cols(pre, 0, d)?;
            let i = g.tape.sigmoid(i);
            let cand = g.tape.slice_cols(pre, 2 * d, d)?;
            let cand = g.tape.tanh(cand);
            let o = g.tape.slice_cols(pre, 3 * d, d)?;
            let o = g.tape.sigmoid(o);
            let mut c = g.tape.mul(i, cand)?;
            if let Some((_, c_prev)) = prev {
                let f = g.tape.slice_cols(pre, d, d)?;
                let f = g.tape.sigmoid(f);
                let keep = g.tape.mul(f, c_prev)?;
                c = g.tape.add(keep, c)?;
            }
            let squashed = g.tape.tanh(c);
            let h = g.tape.mul(o, squashed)?;
            states[t] = Some(h);
            prev = Some((h, c));
        }
        Ok(states.into_iter().map(|s| s.expect("every position visited")).collect())
    }
}

/// Forward and backward LSTM over the same sequence.
#[derive(Clone, Debug)]
pub struct BiLstm {
    pub fwd: LstmCell,
    pub bwd: LstmCell,
}

/// Per-position states (`n × 2h`, forward half first) and the sentence summary
/// `[last forward state | first backward state]` (`1 × 2h`).
pub struct BiLstmOutput {
    pub states: Var,
    pub summary: Var,
}

impl BiLstm {
    pub fn init(
        params: &mut ParamSet,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, NumError> {
        let fwd = LstmCell::init(params, &format!("{prefix}.fwd"), input, hidden, rng)?;
        let bwd = LstmCell::init(params, &format!("{prefix}.bwd"), input, hidden, rng)?;
        Ok(BiLstm { fwd, bwd })
    }

    pub fn output_dim(&self) -> usize {
        self.fwd.hidden_dim() + self.bwd.hidden_dim()
    }

    pub fn run(&self, g: &mut Graph, seq: Var) -> Result<BiLstmOutput, NumError> {
        let f = self.fwd.run(g, seq, false)?;
        let b = self.bwd.run(g, seq, true)?;
        let fs = g.tape.concat_rows(&f)?;
        let bs = g.tape.concat_rows(&b)?;
        let states = g.tape.concat_cols(&[fs, bs])?;
        let summary = g.tape.concat_cols(&[f[f.len() - 1], b[0]])?;
        Ok(BiLstmOutput { states, summary })
    }
}
