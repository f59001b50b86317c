use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{glorot, impl_params, zeros};
use crate::{Error, Result};

/// Elementwise nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative given the pre-activation and the output.
    pub fn derivative(self, pre: f64, out: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - out * out,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::invalid(format!("unknown activation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderSpec {
    /// Number of known word types; larger ids map to the unknown row.
    pub vocab_size: usize,
    pub embedding_dim: usize,
    /// Context radius: position `j` sees positions `j − w ..= j + w`.
    pub window: usize,
    pub hidden_dim: usize,
    pub activation: Activation,
}

impl EncoderSpec {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.embedding_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::invalid("encoder dimensions must be positive"));
        }
        Ok(())
    }

    fn input_dim(&self) -> usize {
        (2 * self.window + 1) * self.embedding_dim
    }
}

const ROOT_ROW: usize = 0;
const UNK_ROW: usize = 1;

/// Window-based feedforward encoder.
///
/// The sequence is prefixed with a root symbol at position 0, so the output
/// has `n + 1` rows. Each position concatenates the embeddings inside its
/// window (zeros beyond the sequence) and applies one affine layer and the
/// activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub spec: EncoderSpec,
    /// Rows: root, unknown, then one per word type.
    pub embeddings: Array2<f64>,
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl_params!(Encoder {
    embeddings,
    weight,
    bias
});

/// Intermediate values kept for [`Encoder::backward`].
#[derive(Debug, Clone)]
pub struct EncoderCache {
    rows: Vec<usize>,
    inputs: Array2<f64>,
    pre: Array2<f64>,
    out: Array2<f64>,
}

impl Encoder {
    pub fn new<R: Rng>(spec: EncoderSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        Ok(Encoder {
            spec,
            embeddings: glorot(spec.vocab_size + 2, spec.embedding_dim, rng),
            weight: glorot(spec.hidden_dim, spec.input_dim(), rng),
            bias: zeros(spec.hidden_dim),
        })
    }

    pub fn output_dim(&self) -> usize {
        self.spec.hidden_dim
    }

    fn row(&self, token: usize) -> usize {
        if token < self.spec.vocab_size {
            token + 2
        } else {
            UNK_ROW
        }
    }

    /// Encodes `tokens`; row `0` of the result belongs to the root symbol.
    pub fn forward(&self, tokens: &[usize]) -> (Array2<f64>, EncoderCache) {
        let len = tokens.len() + 1;
        let dim = self.spec.embedding_dim;
        let w = self.spec.window;
        let rows: Vec<usize> = std::iter::once(ROOT_ROW)
            .chain(tokens.iter().map(|&t| self.row(t)))
            .collect();
        let mut inputs = Array2::zeros((len, self.spec.input_dim()));
        for p in 0..len {
            for slot in 0..=2 * w {
                let q = p + slot;
                if q < w || q - w >= len {
                    continue;
                }
                inputs
                    .slice_mut(s![p, slot * dim..(slot + 1) * dim])
                    .assign(&self.embeddings.row(rows[q - w]));
            }
        }
        let pre = inputs.dot(&self.weight.t()) + &self.bias;
        let act = self.spec.activation;
        let out = pre.mapv(|x| act.apply(x));
        let cache = EncoderCache {
            rows,
            inputs,
            pre,
            out: out.clone(),
        };
        (out, cache)
    }

    /// Accumulates parameter gradients into `grad` given `d_out`, the
    /// gradient with respect to the forward output.
    pub fn backward(&self, cache: &EncoderCache, d_out: &Array2<f64>, grad: &mut Encoder) {
        let act = self.spec.activation;
        let mut d_pre = d_out.clone();
        ndarray::Zip::from(&mut d_pre)
            .and(&cache.pre)
            .and(&cache.out)
            .for_each(|d, &p, &o| *d *= act.derivative(p, o));
        grad.weight += &d_pre.t().dot(&cache.inputs);
        grad.bias += &d_pre.sum_axis(Axis(0));
        let d_inputs = d_pre.dot(&self.weight);
        let dim = self.spec.embedding_dim;
        let w = self.spec.window;
        let len = cache.rows.len();
        for p in 0..len {
            for slot in 0..=2 * w {
                let q = p + slot;
                if q < w || q - w >= len {
                    continue;
                }
                let mut target = grad.embeddings.row_mut(cache.rows[q - w]);
                target += &d_inputs.slice(s![p, slot * dim..(slot + 1) * dim]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::Params;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(window: usize) -> EncoderSpec {
        EncoderSpec {
            vocab_size: 10,
            embedding_dim: 3,
            window,
            hidden_dim: 4,
            activation: Activation::Tanh,
        }
    }

    #[test]
    fn zero_window_is_local() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let enc = Encoder::new(spec(0), &mut rng).unwrap();
        let (a, _) = enc.forward(&[1, 2, 3]);
        let (b, _) = enc.forward(&[1, 7, 3]);
        assert_eq!(a.row(1), b.row(1));
        assert_eq!(a.row(3), b.row(3));
        assert_ne!(a.row(2), b.row(2));
    }

    #[test]
    fn window_reaches_neighbors_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let enc = Encoder::new(spec(1), &mut rng).unwrap();
        let (a, _) = enc.forward(&[1, 2, 3, 4]);
        let (b, _) = enc.forward(&[1, 2, 3, 9]);
        assert_eq!(a.row(2), b.row(2));
        assert_ne!(a.row(3), b.row(3));
    }

    #[test]
    fn zero_parameters_give_activation_of_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut enc = Encoder::new(spec(1), &mut rng).unwrap();
        enc.fill(0.0);
        let (h, _) = enc.forward(&[1, 2, 30]);
        assert!(h.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn unknown_tokens_share_a_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let enc = Encoder::new(spec(0), &mut rng).unwrap();
        let (a, _) = enc.forward(&[10]);
        let (b, _) = enc.forward(&[999]);
        assert_eq!(a, b);
    }
}
