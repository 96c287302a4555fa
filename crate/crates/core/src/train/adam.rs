use rayon::prelude::*;

use crate::embed::{Gradients, TwoBranchParams};

/// Adaptive-moment optimizer with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &mut TwoBranchParams, learning_rate: f64) -> Self {
        let shapes: Vec<usize> = params.trainables_mut().iter().map(|t| t.len()).collect();
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut TwoBranchParams, grads: &Gradients) {
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let lr = self.learning_rate;
        let correction1 = 1.0 - b1.powi(t);
        let correction2 = 1.0 - b2.powi(t);
        let grads = grads.tensors();
        let mut tensors = params.trainables_mut();
        debug_assert_eq!(tensors.len(), grads.len());
        tensors
            .par_iter_mut()
            .zip(grads.par_iter())
            .zip(self.first.par_iter_mut().zip(self.second.par_iter_mut()))
            .for_each(|((p, g), (m, v))| {
                for i in 0..p.len() {
                    let gi = g[i];
                    m[i] = b1 * m[i] + (1.0 - b1) * gi;
                    v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                    let m_hat = m[i] / correction1;
                    let v_hat = v[i] / correction2;
                    p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{BranchSpec, NetSpec};

    fn tiny() -> TwoBranchParams {
        let spec = NetSpec {
            music: BranchSpec {
                input_dim: 3,
                layer_widths: vec![4, 2],
            },
            video: BranchSpec {
                input_dim: 2,
                layer_widths: vec![2],
            },
            ..NetSpec::default()
        };
        TwoBranchParams::init(spec, 1).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut params = tiny();
        let before = params.clone();
        let mut adam = Adam::new(&mut params, 1e-3);
        let zero = Gradients::zeros_like(&params);
        for _ in 0..3 {
            adam.step(&mut params, &zero);
        }
        assert_eq!(params, before);
        assert_eq!(adam.steps_taken(), 3);
    }

    #[test]
    fn first_step_moves_each_weight_by_the_learning_rate() {
        let mut params = tiny();
        let before = params.clone();
        let mut adam = Adam::new(&mut params, 1e-3);
        let mut g = Gradients::zeros_like(&params);
        g.music.layers[0].weight.fill(0.5);
        g.video.beta.fill(-2.0);
        adam.step(&mut params, &g);
        let dw = &before.music.layers[0].weight - &params.music.layers[0].weight;
        assert!(dw.iter().all(|d| (d - 1e-3).abs() < 1e-10), "{dw}");
        let db = &params.video.bn.beta - &before.video.bn.beta;
        assert!(db.iter().all(|d| (d - 1e-3).abs() < 1e-10));
        assert_eq!(params.music.layers[1], before.music.layers[1]);
    }
}
