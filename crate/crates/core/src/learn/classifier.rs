use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{glorot, impl_params, zeros};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub input_dim: usize,
    /// Width of the per-token affine + ReLU layer.
    pub token_dim: usize,
    pub hidden_dim: usize,
    pub classes: usize,
}

/// Sentence classifier: per-token affine + ReLU, sum pooling, then a
/// two-layer ReLU MLP producing normalized log-probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    pub spec: ClassifierSpec,
    pub token: Array2<f64>,
    pub token_bias: Array1<f64>,
    pub hidden: Array2<f64>,
    pub hidden_bias: Array1<f64>,
    pub out: Array2<f64>,
    pub out_bias: Array1<f64>,
}

impl_params!(Classifier {
    token,
    token_bias,
    hidden,
    hidden_bias,
    out,
    out_bias
});

#[derive(Debug, Clone)]
pub struct ClassifierCache {
    token_pre: Array2<f64>,
    pooled: Array1<f64>,
    hidden_pre: Array1<f64>,
    hidden: Array1<f64>,
    log_probs: Array1<f64>,
}

impl ClassifierCache {
    /// Smallest distance of any ReLU pre-activation from the kink.
    pub fn kink_distance(&self) -> f64 {
        self.token_pre
            .iter()
            .chain(self.hidden_pre.iter())
            .fold(f64::INFINITY, |m, x| m.min(x.abs()))
    }
}

pub fn log_softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let total = logits.mapv(|x| (x - max).exp()).sum();
    logits.mapv(|x| x - max - total.ln())
}

impl Classifier {
    pub fn new<R: Rng>(spec: ClassifierSpec, rng: &mut R) -> Result<Self> {
        if spec.input_dim == 0 || spec.token_dim == 0 || spec.hidden_dim == 0 || spec.classes < 2 {
            return Err(Error::invalid(
                "classifier needs positive widths and at least two classes",
            ));
        }
        Ok(Classifier {
            spec,
            token: glorot(spec.token_dim, spec.input_dim, rng),
            token_bias: zeros(spec.token_dim),
            hidden: glorot(spec.hidden_dim, spec.token_dim, rng),
            hidden_bias: zeros(spec.hidden_dim),
            out: glorot(spec.classes, spec.hidden_dim, rng),
            out_bias: zeros(spec.classes),
        })
    }

    /// Class log-probabilities for a sentence given one row per token.
    pub fn forward(&self, tokens: &Array2<f64>) -> Result<(Array1<f64>, ClassifierCache)> {
        if tokens.nrows() == 0 {
            return Err(Error::invalid("cannot classify an empty sentence"));
        }
        crate::error::check_len(self.spec.input_dim, tokens.ncols())?;
        let token_pre = tokens.dot(&self.token.t()) + &self.token_bias;
        let pooled = token_pre.mapv(|x| x.max(0.0)).sum_axis(Axis(0));
        let hidden_pre = self.hidden.dot(&pooled) + &self.hidden_bias;
        let hidden = hidden_pre.mapv(|x| x.max(0.0));
        let logits = self.out.dot(&hidden) + &self.out_bias;
        let log_probs = log_softmax(&logits);
        let cache = ClassifierCache {
            token_pre,
            pooled,
            hidden_pre,
            hidden,
            log_probs: log_probs.clone(),
        };
        Ok((log_probs, cache))
    }

    /// `−log p(gold)`.
    pub fn loss(log_probs: &Array1<f64>, gold: usize) -> Result<f64> {
        log_probs
            .get(gold)
            .map(|lp| -lp)
            .ok_or_else(|| Error::invalid(format!("class {gold} out of range")))
    }

    /// Backpropagates `d_logits` (gradient with respect to the
    /// pre-softmax logits); returns the gradient with respect to the token
    /// rows.
    pub fn backward_logits(
        &self,
        cache: &ClassifierCache,
        tokens: &Array2<f64>,
        d_logits: &Array1<f64>,
        grad: &mut Classifier,
    ) -> Array2<f64> {
        let outer = |a: &Array1<f64>, b: &Array1<f64>| {
            a.view()
                .insert_axis(Axis(1))
                .dot(&b.view().insert_axis(Axis(0)))
        };
        grad.out += &outer(d_logits, &cache.hidden);
        grad.out_bias += d_logits;
        let mut d_hidden = self.out.t().dot(d_logits);
        d_hidden.zip_mut_with(&cache.hidden_pre, |d, &p| {
            if p <= 0.0 {
                *d = 0.0
            }
        });
        grad.hidden += &outer(&d_hidden, &cache.pooled);
        grad.hidden_bias += &d_hidden;
        let d_pooled = self.hidden.t().dot(&d_hidden);
        let mut d_token_pre = Array2::zeros(cache.token_pre.raw_dim());
        for (mut row, pre) in d_token_pre
            .rows_mut()
            .into_iter()
            .zip(cache.token_pre.rows())
        {
            row.assign(&d_pooled);
            row.zip_mut_with(&pre, |d, &p| {
                if p <= 0.0 {
                    *d = 0.0
                }
            });
        }
        grad.token += &d_token_pre.t().dot(tokens);
        grad.token_bias += &d_token_pre.sum_axis(Axis(0));
        d_token_pre.dot(&self.token)
    }

    /// Backpropagates the log-loss of `gold`.
    pub fn backward_loss(
        &self,
        cache: &ClassifierCache,
        tokens: &Array2<f64>,
        gold: usize,
        grad: &mut Classifier,
    ) -> Array2<f64> {
        let mut d_logits = cache.log_probs.mapv(f64::exp);
        d_logits[gold] -= 1.0;
        self.backward_logits(cache, tokens, &d_logits, grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tied_logits_split_evenly() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut c = Classifier::new(
            ClassifierSpec {
                input_dim: 3,
                token_dim: 4,
                hidden_dim: 4,
                classes: 2,
            },
            &mut rng,
        )
        .unwrap();
        let row = c.out.row(0).to_owned();
        c.out.row_mut(1).assign(&row);
        c.out_bias.fill(0.3);
        let x = Array2::from_shape_fn((2, 3), |(r, k)| (r + k) as f64 * 0.2);
        let (lp, _) = c.forward(&x).unwrap();
        assert!((lp[0].exp() - 0.5).abs() < 1e-15 && (lp[1].exp() - 0.5).abs() < 1e-15);
        assert!((Classifier::loss(&lp, 1).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn rejects_empty_and_bad_class() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = ClassifierSpec {
            input_dim: 2,
            token_dim: 2,
            hidden_dim: 2,
            classes: 2,
        };
        let c = Classifier::new(spec, &mut rng).unwrap();
        assert!(c.forward(&Array2::zeros((0, 2))).is_err());
        let (lp, _) = c.forward(&Array2::zeros((1, 2))).unwrap();
        assert!(Classifier::loss(&lp, 5).is_err());
    }
}
