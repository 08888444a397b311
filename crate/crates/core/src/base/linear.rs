use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    add_row_bias, column_sums, cross_entropy, softmax_rows, uniform_init, Classifier,
    ForwardMode, Features,
};
use crate::matrix::ScoreMatrix;

/// One linear layer followed by softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSoftmax {
    // [weights (p x c), bias (1 x c)]
    params: Vec<ScoreMatrix>,
}

impl LinearSoftmax {
    pub fn new(inputs: usize, classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = uniform_init(inputs, classes, inputs, &mut rng);
        let b = uniform_init(1, classes, inputs, &mut rng);
        Self { params: vec![w, b] }
    }

    fn logits(&self, x: &Features, rows: &[usize], parallel: bool) -> ScoreMatrix {
        let mut z = if parallel {
            x.par_rows_mul(rows, &self.params[0])
        } else {
            x.rows_mul(rows, &self.params[0])
        };
        add_row_bias(&mut z, &self.params[1]);
        z
    }
}

impl Classifier for LinearSoftmax {
    fn params(&self) -> &[ScoreMatrix] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [ScoreMatrix] {
        &mut self.params
    }

    fn decays(&self) -> Vec<bool> {
        vec![true, false]
    }

    fn loss_and_grad(
        &mut self,
        x: &Features,
        rows: &[usize],
        targets: &[usize],
        _mode: ForwardMode,
        _rng: &mut ChaCha8Rng,
    ) -> (f64, Vec<ScoreMatrix>) {
        let mut p = self.logits(x, rows, false);
        softmax_rows(&mut p);
        let (loss, dz) = cross_entropy(&p, targets);
        let dw = x.rows_t_mul(rows, &dz);
        let db = column_sums(&dz);
        (loss, vec![dw, db])
    }

    fn predict(&self, x: &Features, rows: &[usize]) -> ScoreMatrix {
        let mut p = self.logits(x, rows, true);
        softmax_rows(&mut p);
        p
    }
}
