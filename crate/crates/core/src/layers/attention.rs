use rand::Rng;

use crate::numerics::{NumError, Shape, Tensor, Var};
use crate::params::{glorot, Graph, ParamId, ParamSet};

/// Row indices `k − w ..= k + w`; positions outside `0..n` are `None` (zero padding).
pub fn window_indices(n: usize, k: usize, half_width: usize) -> Vec<Option<usize>> {
    let k = k as isize;
    let w = half_width as isize;
    (k - w..=k + w)
        .map(|i| if i >= 0 && (i as usize) < n { Some(i as usize) } else { None })
        .collect()
}

/// The `(2w + 1) × d` block of rows around position `k`, zero-padded at the edges.
pub fn local_window(seq: &Tensor, k: usize, half_width: usize) -> Result<Tensor, NumError> {
    if k >= seq.rows() {
        return Err(NumError::Contract(format!(
            "window centre {k} out of range for {} rows",
            seq.rows()
        )));
    }
    let idx = window_indices(seq.rows(), k, half_width);
    let mut data = Vec::with_capacity(idx.len() * seq.cols());
    for i in &idx {
        match i {
            Some(r) => data.extend_from_slice(seq.row_slice(*r)),
            None => data.extend(std::iter::repeat_n(0.0, seq.cols())),
        }
    }
    Tensor::new(Shape::new(idx.len(), seq.cols()), data)
}

/// One head of windowed self-attention.
///
/// For the window `H` around each position the weights are
/// `a = softmax(tanh(H · proj) · score)ᵀ` and the output is `a · H`. `proj` is
/// `d_in × d_a` and `score` is `d_a × 1`, i.e. the transposes of the usual column-vector
/// weight matrices. Weights are shared across positions.
#[derive(Clone, Debug)]
pub struct LocalAttentionHead {
    pub proj: ParamId,
    pub score: ParamId,
    half_width: usize,
}

impl LocalAttentionHead {
    pub fn init(
        params: &mut ParamSet,
        prefix: &str,
        input: usize,
        attn_dim: usize,
        half_width: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, NumError> {
        let proj = params.insert(format!("{prefix}.proj"), glorot(rng, input, attn_dim))?;
        let score = params.insert(format!("{prefix}.score"), glorot(rng, attn_dim, 1))?;
        Ok(LocalAttentionHead { proj, score, half_width })
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Attends over `seq` (`n × d`), returning the `n × d` output and the `1 × (2w + 1)`
    /// weight row of every position.
    pub fn attend(&self, g: &mut Graph, seq: Var) -> Result<(Var, Vec<Var>), NumError> {
        let n = g.tape.shape(seq).rows;
        let (proj, score) = (g.param(self.proj), g.param(self.score));
        // Scores depend on a single row each; a zero padding row scores exactly 0.
        let hidden = g.tape.matmul(seq, proj)?;
        let hidden = g.tape.tanh(hidden);
        let scores = g.tape.matmul(hidden, score)?;

        let mut outputs = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for k in 0..n {
            let idx = window_indices(n, k, self.half_width);
            let s = g.tape.select_rows(scores, &idx)?;
            let s = g.tape.transpose(s);
            let a = g.tape.softmax_rows(s)?;
            let window = g.tape.select_rows(seq, &idx)?;
            outputs.push(g.tape.matmul(a, window)?);
            weights.push(a);
        }
        Ok((g.tape.concat_rows(&outputs)?, weights))
    }
}

/// Runs every head over `seq` and concatenates their outputs column-wise.
pub fn mh_local_attention(
    g: &mut Graph,
    seq: Var,
    heads: &[LocalAttentionHead],
) -> Result<Var, NumError> {
    if heads.is_empty() {
        return Err(NumError::Contract("attention needs at least one head".into()));
    }
    if heads.iter().any(|h| h.half_width != heads[0].half_width) {
        return Err(NumError::Contract("attention heads must share the window width".into()));
    }
    let outs = heads
        .iter()
        .map(|h| h.attend(g, seq).map(|(out, _)| out))
        .collect::<Result<Vec<_>, _>>()?;
    g.tape.concat_cols(&outs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::softmax;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Tensor {
        Tensor::new(Shape::new(n, d), (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap()
    }

    fn rows(t: &Tensor) -> Vec<Vec<f64>> {
        (0..t.rows()).map(|r| t.row_slice(r).to_vec()).collect()
    }

    #[test]
    fn window_examples() {
        let seq = Tensor::from_rows(&(0..6).map(|r| [r as f64 + 1.0, -(r as f64)]).collect::<Vec<_>>());
        let z = vec![0.0, 0.0];
        let w = local_window(&seq, 0, 2).unwrap();
        assert_eq!(rows(&w), vec![z.clone(), z.clone(), vec![1.0, 0.0], vec![2.0, -1.0], vec![3.0, -2.0]]);
        let w = local_window(&seq, 3, 2).unwrap();
        assert_eq!(rows(&w), (1..6).map(|r| seq.row_slice(r).to_vec()).collect::<Vec<_>>());
        let single = Tensor::row(&[4.0, 5.0]);
        let w = local_window(&single, 0, 2).unwrap();
        assert_eq!(rows(&w), vec![z.clone(), z.clone(), vec![4.0, 5.0], z.clone(), z]);
        assert!(local_window(&seq, 6, 2).is_err());
    }

    /// Direct evaluation of one head on plain tensors, window by window.
    fn reference_head(seq: &Tensor, proj: &Tensor, score: &Tensor, w: usize) -> Tensor {
        let mut out = Vec::new();
        for k in 0..seq.rows() {
            let h = local_window(seq, k, w).unwrap();
            let mut hidden = h.matmul(proj).unwrap();
            hidden.data_mut().iter_mut().for_each(|v| *v = v.tanh());
            let s = hidden.matmul(score).unwrap();
            let a = Tensor::row(&softmax(s.data()).unwrap());
            out.push(a.matmul(&h).unwrap().data().to_vec());
        }
        Tensor::from_rows(&out)
    }

    #[test]
    fn matches_windowed_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut params = ParamSet::new();
        let head = LocalAttentionHead::init(&mut params, "h", 4, 3, 2, &mut rng).unwrap();
        let seq = random(&mut rng, 7, 4);
        let mut g = Graph::new(&params);
        let s = g.tape.constant(seq.clone());
        let (out, weights) = head.attend(&mut g, s).unwrap();
        let expected = reference_head(&seq, params.get(head.proj), params.get(head.score), 2);
        for (a, b) in g.value(out).data().iter().zip(expected.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        for wv in weights {
            let w = g.value(wv);
            assert_eq!(w.cols(), 5);
            assert!(w.data().iter().all(|v| (0.0..=1.0).contains(v)));
            assert!((w.data().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_score_weights_average_the_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut params = ParamSet::new();
        let head = LocalAttentionHead::init(&mut params, "h", 3, 4, 2, &mut rng).unwrap();
        params.get_mut(head.score).data_mut().fill(0.0);
        let seq = random(&mut rng, 4, 3);
        let mut g = Graph::new(&params);
        let s = g.tape.constant(seq.clone());
        let (out, _) = head.attend(&mut g, s).unwrap();
        for k in 0..4 {
            let win = local_window(&seq, k, 2).unwrap();
            for c in 0..3 {
                let mean: f64 = (0..5).map(|r| win.get(r, c)).sum::<f64>() / 5.0;
                assert!((g.value(out).get(k, c) - mean).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn dominant_score_selects_its_row() {
        let mut params = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let head = LocalAttentionHead::init(&mut params, "h", 2, 1, 2, &mut rng).unwrap();
        *params.get_mut(head.proj) = Tensor::from_rows(&[[1000.0], [0.0]]);
        *params.get_mut(head.score) = Tensor::from_rows(&[[1e6]]);
        // only row 2 has a non-zero first feature, so it alone scores 1e6
        let seq = Tensor::from_rows(&[[0.0, 0.3], [0.0, -0.7], [1.0, 0.9], [0.0, 0.1], [0.0, 0.5]]);
        let mut g = Graph::new(&params);
        let s = g.tape.constant(seq.clone());
        let (out, _) = head.attend(&mut g, s).unwrap();
        for k in 0..5 {
            for c in 0..2 {
                assert!((g.value(out).get(k, c) - seq.get(2, c)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn output_ignores_rows_outside_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut params = ParamSet::new();
        let heads: Vec<_> = (0..2)
            .map(|i| LocalAttentionHead::init(&mut params, &format!("h{i}"), 3, 4, 2, &mut rng).unwrap())
            .collect();
        let seq = random(&mut rng, 8, 3);
        let mut perturbed = seq.clone();
        for c in 0..3 {
            perturbed.set(6, c, 9.0);
        }
        let mut g = Graph::new(&params);
        let a = g.tape.constant(seq);
        let b = g.tape.constant(perturbed);
        let oa = mh_local_attention(&mut g, a, &heads).unwrap();
        let ob = mh_local_attention(&mut g, b, &heads).unwrap();
        assert_eq!(g.value(oa).shape(), Shape::new(8, 6));
        for k in 0..=3 {
            assert_eq!(g.value(oa).row_slice(k), g.value(ob).row_slice(k));
        }
        assert_ne!(g.value(oa).row_slice(4), g.value(ob).row_slice(4));
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(60 + seed);
            let mut params = ParamSet::new();
            let heads: Vec<_> = (0..2)
                .map(|i| LocalAttentionHead::init(&mut params, &format!("h{i}"), 3, 2, 1, &mut rng).unwrap())
                .collect();
            let seq = random(&mut rng, 4, 3);
            let readout = random(&mut rng, 6, 1);
            let err = crate::layers::tests::param_gradcheck(&params, |g| {
                let s = g.tape.constant(seq.clone());
                let r = g.tape.constant(readout.clone());
                let out = mh_local_attention(g, s, &heads).unwrap();
                let m = g.tape.matmul(out, r).unwrap();
                let m = g.tape.tanh(m);
                g.tape.sum(m)
            });
            assert!(err < 1e-3, "seed {seed}: {err}");
        }
    }
}
