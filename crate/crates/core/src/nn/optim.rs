use serde::{Deserialize, Serialize};

use super::{Gradients, Network};
use crate::error::{Error, Result};

/// How per-sample gradients in a minibatch are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradReduction {
    #[default]
    Mean,
    Sum,
}

impl GradReduction {
    pub fn factor(self, batch: usize) -> f64 {
        match self {
            GradReduction::Mean => 1.0 / batch.max(1) as f64,
            GradReduction::Sum => 1.0,
        }
    }
}

/// SGD with optional heavy-ball momentum. Momentum 0 is exactly
/// [`Network::sgd_step`].
#[derive(Clone, Debug)]
pub struct Sgd {
    pub learning_rate: f64,
    pub momentum: f64,
    velocity: Option<Gradients>,
}

impl Sgd {
    pub fn new(learning_rate: f64) -> Self {
        Sgd {
            learning_rate,
            momentum: 0.0,
            velocity: None,
        }
    }

    pub fn with_momentum(mut self, momentum: f64) -> Self {
        self.momentum = momentum;
        self
    }

    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        if self.momentum == 0.0 {
            return net.sgd_step(grads, self.learning_rate);
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::param(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        let v = self
            .velocity
            .get_or_insert_with(|| Gradients::zeros_like(net));
        v.scale(self.momentum);
        v.add_assign(grads);
        net.sgd_step(v, self.learning_rate)
    }
}
