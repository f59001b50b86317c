use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::encoder::Activation;
use super::params::{glorot, impl_params, zeros};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorerSpec {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// Scores per pair: 1 for trees, `1 + labels` for labeled graphs.
    pub outputs: usize,
    /// Signed head-modifier distances are bucketed into
    /// `−max_distance ..= max_distance`, each with a learned bias. Arcs
    /// out of node 0 get a bias of their own: node 0 is a root or null
    /// node, so its distance to the modifier carries no signal.
    pub max_distance: usize,
    pub activation: Activation,
}

/// One-hidden-layer network over node pairs:
/// `s(i → j) = out · act(U x_i + V x_j + c) + b + dist(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScorer {
    pub spec: ScorerSpec,
    pub head: Array2<f64>,
    pub modifier: Array2<f64>,
    pub hidden_bias: Array1<f64>,
    pub out: Array2<f64>,
    pub out_bias: Array1<f64>,
    pub distance: Array2<f64>,
}

impl_params!(PairScorer {
    head,
    modifier,
    hidden_bias,
    out,
    out_bias,
    distance
});

#[derive(Debug, Clone)]
pub struct ScorerCache {
    pairs: Vec<(usize, usize)>,
    pre: Array2<f64>,
    hidden: Array2<f64>,
}

impl PairScorer {
    pub fn new<R: Rng>(spec: ScorerSpec, rng: &mut R) -> Result<Self> {
        if spec.input_dim == 0 || spec.hidden_dim == 0 || spec.outputs == 0 {
            return Err(Error::invalid("scorer dimensions must be positive"));
        }
        // the two halves of one affine layer over [x_i; x_j]
        let joint = glorot(spec.hidden_dim, 2 * spec.input_dim, rng);
        Ok(PairScorer {
            spec,
            head: joint.slice(ndarray::s![.., ..spec.input_dim]).to_owned(),
            modifier: joint.slice(ndarray::s![.., spec.input_dim..]).to_owned(),
            hidden_bias: zeros(spec.hidden_dim),
            out: glorot(spec.outputs, spec.hidden_dim, rng),
            out_bias: zeros(spec.outputs),
            distance: Array2::zeros((spec.outputs, 2 * spec.max_distance + 2)),
        })
    }

    fn bucket(&self, head: usize, modifier: usize) -> usize {
        let d = self.spec.max_distance as i64;
        if head == 0 {
            return 2 * self.spec.max_distance + 1;
        }
        let delta = (modifier as i64 - head as i64).clamp(-d, d);
        (delta + d) as usize
    }

    /// Scores every `(head, modifier)` pair of node rows in `nodes`;
    /// returns a `pairs × outputs` matrix.
    pub fn forward(
        &self,
        nodes: &Array2<f64>,
        pairs: &[(usize, usize)],
    ) -> (Array2<f64>, ScorerCache) {
        let as_head = nodes.dot(&self.head.t());
        let as_modifier = nodes.dot(&self.modifier.t());
        let act = self.spec.activation;
        let mut pre = Array2::zeros((pairs.len(), self.spec.hidden_dim));
        for (row, &(h, m)) in pairs.iter().enumerate() {
            let mut r = pre.row_mut(row);
            r.assign(&as_head.row(h));
            r += &as_modifier.row(m);
            r += &self.hidden_bias;
        }
        let hidden = pre.mapv(|x| act.apply(x));
        let mut scores = hidden.dot(&self.out.t()) + &self.out_bias;
        for (row, &(h, m)) in pairs.iter().enumerate() {
            let b = self.bucket(h, m);
            let mut r = scores.row_mut(row);
            r += &self.distance.column(b);
        }
        let cache = ScorerCache {
            pairs: pairs.to_vec(),
            pre,
            hidden,
        };
        (scores, cache)
    }

    /// Accumulates parameter gradients into `grad` and node gradients into
    /// `d_nodes`, given `d_scores` (same shape as the forward output).
    pub fn backward(
        &self,
        cache: &ScorerCache,
        nodes: &Array2<f64>,
        d_scores: &Array2<f64>,
        grad: &mut PairScorer,
        d_nodes: &mut Array2<f64>,
    ) {
        let act = self.spec.activation;
        grad.out += &d_scores.t().dot(&cache.hidden);
        grad.out_bias += &d_scores.sum_axis(Axis(0));
        for (row, &(h, m)) in cache.pairs.iter().enumerate() {
            let b = self.bucket(h, m);
            let mut col = grad.distance.column_mut(b);
            col += &d_scores.row(row);
        }
        let mut d_pre = d_scores.dot(&self.out);
        ndarray::Zip::from(&mut d_pre)
            .and(&cache.pre)
            .and(&cache.hidden)
            .for_each(|d, &p, &o| *d *= act.derivative(p, o));
        grad.hidden_bias += &d_pre.sum_axis(Axis(0));
        let mut d_as_head = Array2::zeros((nodes.nrows(), self.spec.hidden_dim));
        let mut d_as_modifier = Array2::zeros((nodes.nrows(), self.spec.hidden_dim));
        for (row, &(h, m)) in cache.pairs.iter().enumerate() {
            let mut a = d_as_head.row_mut(h);
            a += &d_pre.row(row);
            let mut b = d_as_modifier.row_mut(m);
            b += &d_pre.row(row);
        }
        grad.head += &d_as_head.t().dot(nodes);
        grad.modifier += &d_as_modifier.t().dot(nodes);
        *d_nodes += &d_as_head.dot(&self.head);
        *d_nodes += &d_as_modifier.dot(&self.modifier);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scorer(outputs: usize) -> PairScorer {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        PairScorer::new(
            ScorerSpec {
                input_dim: 3,
                hidden_dim: 5,
                outputs,
                max_distance: 2,
                activation: Activation::Tanh,
            },
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn symmetric_inputs_give_equal_scores() {
        let mut sc = scorer(1);
        sc.modifier = sc.head.clone();
        sc.distance.fill(0.0);
        let nodes = Array2::from_shape_fn((4, 3), |(_, c)| c as f64 * 0.3);
        let pairs = [(0, 1), (2, 1), (3, 2), (1, 3)];
        let (s, _) = sc.forward(&nodes, &pairs);
        assert!(s.iter().all(|&x| (x - s[[0, 0]]).abs() < 1e-15));
    }

    #[test]
    fn final_layer_is_linear() {
        let mut sc = scorer(2);
        let nodes = Array2::from_shape_fn((3, 3), |(r, c)| (r * 3 + c) as f64 * 0.1 - 0.4);
        let pairs = [(0, 1), (1, 2), (2, 1)];
        let (a, _) = sc.forward(&nodes, &pairs);
        sc.out *= 2.0;
        sc.out_bias *= 2.0;
        sc.distance *= 2.0;
        let (b, _) = sc.forward(&nodes, &pairs);
        assert!(a.iter().zip(&b).all(|(x, y)| (2.0 * x - y).abs() < 1e-14));
    }
}
