use serde::{Deserialize, Serialize};

use super::Params;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::invalid(format!("unknown optimizer '{other}'"))),
        }
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

/// Optimizer state for one parameter bundle.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    first: Vec<f64>,
    second: Vec<f64>,
    steps: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, num_params: usize) -> Self {
        let buffers = if kind == OptimizerKind::Adam {
            num_params
        } else {
            0
        };
        Optimizer {
            kind,
            first: vec![0.0; buffers],
            second: vec![0.0; buffers],
            steps: 0,
        }
    }

    /// Applies one update with learning rate `lr`.
    pub fn step<P: Params>(&mut self, params: &mut P, grad: &P, lr: f64) {
        self.steps += 1;
        match self.kind {
            OptimizerKind::Sgd => params.add_scaled(grad, -lr),
            OptimizerKind::Adam => {
                let t = self.steps as i32;
                let correction1 = 1.0 - BETA1.powi(t);
                let correction2 = 1.0 - BETA2.powi(t);
                let mut offset = 0;
                for (p, g) in params.slices_mut().into_iter().zip(grad.slices()) {
                    for (i, (x, dx)) in p.iter_mut().zip(g).enumerate() {
                        let m = &mut self.first[offset + i];
                        let v = &mut self.second[offset + i];
                        *m = BETA1 * *m + (1.0 - BETA1) * dx;
                        *v = BETA2 * *v + (1.0 - BETA2) * dx * dx;
                        *x -= lr * (*m / correction1) / ((*v / correction2).sqrt() + EPSILON);
                    }
                    offset += p.len();
                }
            }
        }
    }
}

/// Step-decay schedule: `base · factor^⌊epoch / every⌋`.
pub fn annealed_rate(base: f64, factor: f64, every: usize, epoch: usize) -> f64 {
    if every == 0 {
        return base;
    }
    base * factor.powi((epoch / every) as i32)
}
