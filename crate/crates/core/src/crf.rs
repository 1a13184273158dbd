//! Linear-chain CRF over a fixed tag set with explicit START and STOP states.
//!
//! A path `y_1..y_n` scores
//! `A[START, y_1] + Σ P[k, y_k] + Σ A[y_k, y_{k+1}] + A[y_n, STOP]`.
//! The transition matrix is `(T + 2) × (T + 2)`; row/column `T` is START and `T + 1` is
//! STOP. Entries leading into START or out of STOP are never part of a path and are held
//! at `-inf` inside a [`Lattice`].

use crate::numerics::{log_sum_exp, CustomOp, NumError, Tape, Tensor, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    emissions: Tensor,
    transitions: Tensor,
}

/// A tag sequence together with its score under some lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct TagPath {
    pub tags: Vec<usize>,
    pub score: f64,
}

impl Lattice {
    /// `emissions` is `n × T`, `transitions` is `(T + 2) × (T + 2)`.
    pub fn new(emissions: Tensor, mut transitions: Tensor) -> Result<Self, NumError> {
        let tags = emissions.cols();
        if transitions.rows() != tags + 2 || transitions.cols() != tags + 2 {
            return Err(NumError::Dimension {
                op: "lattice",
                left: emissions.shape(),
                right: transitions.shape(),
            });
        }
        let (start, stop) = (tags, tags + 1);
        for i in 0..tags + 2 {
            transitions.set(i, start, f64::NEG_INFINITY);
            transitions.set(stop, i, f64::NEG_INFINITY);
        }
        Ok(Lattice { emissions, transitions })
    }

    pub fn len(&self) -> usize {
        self.emissions.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn num_tags(&self) -> usize {
        self.emissions.cols()
    }

    pub fn emissions(&self) -> &Tensor {
        &self.emissions
    }

    pub fn transitions(&self) -> &Tensor {
        &self.transitions
    }

    fn start(&self) -> usize {
        self.num_tags()
    }

    fn stop(&self) -> usize {
        self.num_tags() + 1
    }

    fn emit(&self, k: usize, y: usize) -> f64 {
        self.emissions.get(k, y)
    }

    fn trans(&self, from: usize, to: usize) -> f64 {
        self.transitions.get(from, to)
    }

    fn check_path(&self, tags: &[usize]) -> Result<(), NumError> {
        if tags.len() != self.len() {
            return Err(NumError::Contract(format!(
                "path of length {} for a lattice of length {}",
                tags.len(),
                self.len()
            )));
        }
        if let Some(t) = tags.iter().find(|t| **t >= self.num_tags()) {
            return Err(NumError::Contract(format!(
                "tag id {t} out of range for {} tags",
                self.num_tags()
            )));
        }
        Ok(())
    }

    /// Forward log-scores: `alpha[k][y]` is the log-sum over prefixes ending in `y` at `k`.
    fn forward_scores(&self) -> Vec<Vec<f64>> {
        let (n, t) = (self.len(), self.num_tags());
        let mut alpha = vec![vec![0.0; t]; n];
        for y in 0..t {
            alpha[0][y] = self.trans(self.start(), y) + self.emit(0, y);
        }
        let mut buf = vec![0.0; t];
        for k in 1..n {
            for y in 0..t {
                for (prev, b) in buf.iter_mut().enumerate() {
                    *b = alpha[k - 1][prev] + self.trans(prev, y);
                }
                alpha[k][y] = log_sum_exp(&buf) + self.emit(k, y);
            }
        }
        alpha
    }

    /// Backward log-scores: `beta[k][y]` is the log-sum over suffixes after `y` at `k`.
    fn backward_scores(&self) -> Vec<Vec<f64>> {
        let (n, t) = (self.len(), self.num_tags());
        let mut beta = vec![vec![0.0; t]; n];
        for y in 0..t {
            beta[n - 1][y] = self.trans(y, self.stop());
        }
        let mut buf = vec![0.0; t];
        for k in (0..n - 1).rev() {
            for y in 0..t {
                for (next, b) in buf.iter_mut().enumerate() {
                    *b = self.trans(y, next) + self.emit(k + 1, next) + beta[k + 1][next];
                }
                beta[k][y] = log_sum_exp(&buf);
            }
        }
        beta
    }

    fn log_z_from(&self, alpha: &[Vec<f64>]) -> f64 {
        let last = &alpha[self.len() - 1];
        let finals: Vec<f64> =
            (0..self.num_tags()).map(|y| last[y] + self.trans(y, self.stop())).collect();
        log_sum_exp(&finals)
    }
}

pub fn sequence_score(lat: &Lattice, tags: &[usize]) -> Result<f64, NumError> {
    lat.check_path(tags)?;
    let mut score = lat.trans(lat.start(), tags[0]);
    for (k, &y) in tags.iter().enumerate() {
        score += lat.emit(k, y);
    }
    for w in tags.windows(2) {
        score += lat.trans(w[0], w[1]);
    }
    score += lat.trans(tags[tags.len() - 1], lat.stop());
    Ok(score)
}

/// Log of the sum of `exp(score)` over every tag path, via the forward algorithm.
pub fn log_partition(lat: &Lattice) -> f64 {
    lat.log_z_from(&lat.forward_scores())
}

/// Negative log-likelihood of `gold`: `log_partition − sequence_score`.
pub fn crf_nll(lat: &Lattice, gold: &[usize]) -> Result<f64, NumError> {
    let score = sequence_score(lat, gold)?;
    Ok(log_partition(lat) - score)
}

/// Highest-scoring path. Ties go to the lowest tag id at every backtrack step.
pub fn viterbi(lat: &Lattice) -> TagPath {
    let (n, t) = (lat.len(), lat.num_tags());
    let mut delta = vec![vec![0.0; t]; n];
    let mut back = vec![vec![0usize; t]; n];
    for y in 0..t {
        delta[0][y] = lat.trans(lat.start(), y) + lat.emit(0, y);
    }
    for k in 1..n {
        for y in 0..t {
            let mut best = 0;
            let mut best_score = delta[k - 1][0] + lat.trans(0, y);
            for prev in 1..t {
                let s = delta[k - 1][prev] + lat.trans(prev, y);
                if s > best_score {
                    best = prev;
                    best_score = s;
                }
            }
            delta[k][y] = best_score + lat.emit(k, y);
            back[k][y] = best;
        }
    }
    let mut last = 0;
    let mut score = delta[n - 1][0] + lat.trans(0, lat.stop());
    for y in 1..t {
        let s = delta[n - 1][y] + lat.trans(y, lat.stop());
        if s > score {
            last = y;
            score = s;
        }
    }
    let mut tags = vec![0; n];
    tags[n - 1] = last;
    for k in (1..n).rev() {
        tags[k - 1] = back[k][tags[k]];
    }
    TagPath { tags, score }
}

/// Expected emission and transition counts under the CRF distribution.
#[derive(Debug, Clone)]
pub struct Marginals {
    /// `n × T`, probability of tag `y` at position `k`.
    pub unary: Tensor,
    /// `(T + 2) × (T + 2)`, expected number of uses of each transition.
    pub transitions: Tensor,
    pub log_z: f64,
}

pub fn marginals(lat: &Lattice) -> Marginals {
    let (n, t) = (lat.len(), lat.num_tags());
    let alpha = lat.forward_scores();
    let beta = lat.backward_scores();
    let log_z = lat.log_z_from(&alpha);

    let mut unary = Tensor::zeros(n, t);
    for k in 0..n {
        for y in 0..t {
            unary.set(k, y, (alpha[k][y] + beta[k][y] - log_z).exp());
        }
    }
    let mut trans = Tensor::zeros(t + 2, t + 2);
    for y in 0..t {
        trans.set(lat.start(), y, unary.get(0, y));
        trans.set(y, lat.stop(), unary.get(n - 1, y));
    }
    for k in 0..n.saturating_sub(1) {
        for y in 0..t {
            for next in 0..t {
                let p = (alpha[k][y] + lat.trans(y, next) + lat.emit(k + 1, next) + beta[k + 1][next]
                    - log_z)
                    .exp();
                trans.set(y, next, trans.get(y, next) + p);
            }
        }
    }
    Marginals { unary, transitions: trans, log_z }
}

struct CrfNllOp {
    gold: Vec<usize>,
}

impl CustomOp for CrfNllOp {
    fn name(&self) -> &'static str {
        "crf_nll"
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, out_grad: &[f64]) -> Vec<Vec<f64>> {
        let lat = Lattice::new(inputs[0].clone(), inputs[1].clone()).expect("validated in forward");
        let m = marginals(&lat);
        let g = out_grad[0];
        let t = lat.num_tags();

        let mut d_emit = m.unary.into_data();
        for (k, &y) in self.gold.iter().enumerate() {
            d_emit[k * t + y] -= 1.0;
        }
        let mut d_trans = m.transitions;
        let mut bump = |from: usize, to: usize| d_trans.set(from, to, d_trans.get(from, to) - 1.0);
        bump(t, self.gold[0]);
        for w in self.gold.windows(2) {
            bump(w[0], w[1]);
        }
        bump(self.gold[self.gold.len() - 1], t + 1);

        d_emit.iter_mut().for_each(|v| *v *= g);
        let mut d_trans = d_trans.into_data();
        d_trans.iter_mut().for_each(|v| *v *= g);
        vec![d_emit, d_trans]
    }
}

/// Records the CRF negative log-likelihood of `gold` on a tape.
///
/// `emissions` is `n × T`; `transitions` is `(T + 2) × (T + 2)`. Entries of `transitions`
/// leading into START or out of STOP are ignored and receive zero gradient.
pub fn crf_nll_on_tape(
    tape: &mut Tape,
    emissions: Var,
    transitions: Var,
    gold: &[usize],
) -> Result<Var, NumError> {
    let lat = Lattice::new(tape.value(emissions).clone(), tape.value(transitions).clone())?;
    let nll = crf_nll(&lat, gold)?;
    Ok(tape.custom(
        &[emissions, transitions],
        Tensor::scalar(nll),
        Box::new(CrfNllOp { gold: gold.to_vec() }),
    ))
}
