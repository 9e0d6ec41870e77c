//! Feed-forward networks: rectifier between layers, identity at the output.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;
use crate::seeds;
use crate::tape::{GradTape, Var};

/// One dense layer: `y = x * weight + bias`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Layer<T> {
    pub weight: DenseMatrix<T>,
    pub bias: DenseMatrix<T>,
}

/// Multi-layer perceptron with fixed widths.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MlpNet<T> {
    widths: Vec<usize>,
    layers: Vec<Layer<T>>,
}

impl<T: Scalar> MlpNet<T> {
    /// Seeded He-style initialization: weights `N(0, sqrt(2 / fan_in))`,
    /// zero biases.
    pub fn new(widths: &[usize], rng: &mut impl Rng) -> Self {
        assert!(widths.len() >= 2, "an MLP needs input and output widths");
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                Layer {
                    weight: seeds::normal_matrix(rng, fan_in, fan_out, (2.0 / fan_in as f64).sqrt()),
                    bias: DenseMatrix::zeros(1, fan_out),
                }
            })
            .collect();
        Self {
            widths: widths.to_vec(),
            layers,
        }
    }

    pub fn from_layers(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(CoreError::InvalidInput("MLP needs at least one layer".into()));
        }
        let mut widths = vec![layers[0].weight.rows()];
        for layer in &layers {
            if layer.weight.rows() != *widths.last().expect("nonempty") {
                return Err(CoreError::ShapeMismatch(
                    "consecutive layer widths are incompatible".into(),
                ));
            }
            if layer.bias.rows() != 1 || layer.bias.cols() != layer.weight.cols() {
                return Err(CoreError::ShapeMismatch("bias width mismatch".into()));
            }
            widths.push(layer.weight.cols());
        }
        Ok(Self { widths, layers })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("nonempty widths")
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    /// Flat parameter views in `[w0, b0, w1, b1, ...]` order.
    pub fn params(&self) -> Vec<&DenseMatrix<T>> {
        self.layers
            .iter()
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut DenseMatrix<T>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    pub fn param_shapes(&self) -> Vec<(usize, usize)> {
        self.params().iter().map(|p| (p.rows(), p.cols())).collect()
    }

    /// Plain forward pass over a batch (rows are samples).
    pub fn forward(&self, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        if x.cols() != self.input_width() {
            return Err(CoreError::InvalidInput(format!(
                "input width {} does not match network input {}",
                x.cols(),
                self.input_width()
            )));
        }
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = h.matmul(&layer.weight);
            for r in 0..z.rows() {
                for (v, &b) in z.row_mut(r).iter_mut().zip(layer.bias.row(0)) {
                    *v += b;
                }
            }
            h = if i < last { z.map(|v| v.max(T::zero())) } else { z };
        }
        Ok(h)
    }

    /// Registers all parameters on `tape` as differentiable leaves,
    /// in `params()` order.
    pub fn tape_params(&self, tape: &mut GradTape<T>) -> Vec<Var> {
        self.params().into_iter().map(|p| tape.var(p.clone())).collect()
    }

    /// Forward pass through previously registered parameter vars.
    pub fn tape_forward(&self, tape: &mut GradTape<T>, params: &[Var], x: Var) -> Var {
        assert_eq!(params.len(), 2 * self.layers.len(), "parameter count mismatch");
        let last = self.layers.len() - 1;
        let mut h = x;
        for i in 0..self.layers.len() {
            let z = tape.matmul(h, params[2 * i]);
            let z = tape.add_row(z, params[2 * i + 1]);
            h = if i < last { tape.relu(z) } else { z };
        }
        h
    }

    /// Forward pass with parameters pinned as constants (no gradient flows
    /// into this network).
    pub fn tape_forward_frozen(&self, tape: &mut GradTape<T>, x: Var) -> Var {
        let params: Vec<Var> = self
            .params()
            .into_iter()
            .map(|p| tape.constant(p.clone()))
            .collect();
        self.tape_forward(tape, &params, x)
    }

    /// Gradient of a scalar-output network with respect to a single input
    /// vector. Rectifier subgradient at 0 is 0.
    pub fn input_gradient(&self, x: &[T]) -> Result<Vec<T>> {
        if self.output_width() != 1 {
            return Err(CoreError::Contract(format!(
                "input_gradient requires a scalar output, network has {}",
                self.output_width()
            )));
        }
        if x.len() != self.input_width() {
            return Err(CoreError::InvalidInput(format!(
                "input width {} does not match network input {}",
                x.len(),
                self.input_width()
            )));
        }
        let mut tape = GradTape::new();
        let xv = tape.var(DenseMatrix::from_vec_unchecked(1, x.len(), x.to_vec()));
        let out = self.tape_forward_frozen(&mut tape, xv);
        let grads = tape.grad(out, &[xv])?;
        Ok(tape.value(grads[0]).data().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::stream;
    use proptest::prelude::*;

    type M = DenseMatrix<f64>;

    fn linear_identity(n: usize) -> MlpNet<f64> {
        MlpNet::from_layers(vec![Layer {
            weight: M::identity(n),
            bias: M::zeros(1, n),
        }])
        .unwrap()
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let net = linear_identity(2);
        let x = M::from_vec(1, 2, vec![1.0, 2.0]).unwrap();
        let y = net.forward(&x).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0]);
    }

    #[test]
    fn dead_rectifier_leaves_only_the_bias_path() {
        // Hidden pre-activations forced negative; output = out bias.
        let hidden = Layer {
            weight: M::from_vec(1, 2, vec![1.0, 1.0]).unwrap(),
            bias: M::from_vec(1, 2, vec![-10.0, -10.0]).unwrap(),
        };
        let out = Layer {
            weight: M::from_vec(2, 1, vec![3.0, -2.0]).unwrap(),
            bias: M::from_vec(1, 1, vec![0.75]).unwrap(),
        };
        let net = MlpNet::from_layers(vec![hidden, out]).unwrap();
        let y = net
            .forward(&M::from_vec(1, 1, vec![1.0]).unwrap())
            .unwrap();
        assert_eq!(y.data(), &[0.75]);
    }

    #[test]
    fn forward_matches_hand_rolled_evaluation() {
        let mut rng = stream(21, "mlp-test", 0);
        let net = MlpNet::<f64>::new(&[3, 4, 2], &mut rng);
        let x = vec![0.3, -1.2, 0.7];

        // Independent re-implementation with explicit index arithmetic.
        let mut h = x.clone();
        for (li, layer) in net.layers().iter().enumerate() {
            let (fan_in, fan_out) = (layer.weight.rows(), layer.weight.cols());
            let mut z = vec![0.0; fan_out];
            for (j, zj) in z.iter_mut().enumerate() {
                let mut acc = layer.bias.get(0, j);
                for i in 0..fan_in {
                    acc += h[i] * layer.weight.get(i, j);
                }
                *zj = acc;
            }
            if li + 1 < net.layers().len() {
                for zj in &mut z {
                    if *zj < 0.0 {
                        *zj = 0.0;
                    }
                }
            }
            h = z;
        }

        let y = net
            .forward(&M::from_vec(1, 3, x).unwrap())
            .unwrap();
        for (a, b) in y.data().iter().zip(h.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn input_gradient_of_linear_net_is_the_weight() {
        let w = vec![0.5, -1.5, 2.0];
        let net = MlpNet::from_layers(vec![Layer {
            weight: M::from_vec(3, 1, w.clone()).unwrap(),
            bias: M::zeros(1, 1),
        }])
        .unwrap();
        let g = net.input_gradient(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(g, w);
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = stream(9, "mlp-fd", 0);
        let net = MlpNet::<f64>::new(&[4, 6, 1], &mut rng);
        let x = vec![0.4, -0.3, 0.9, 0.1];
        let grad = net.input_gradient(&x).unwrap();

        let h = 1e-4;
        for i in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fp = net.forward(&M::from_vec(1, 4, xp).unwrap()).unwrap().get(0, 0);
            let fm = net.forward(&M::from_vec(1, 4, xm).unwrap()).unwrap().get(0, 0);
            let fd = (fp - fm) / (2.0 * h);
            let denom = fd.abs().max(grad[i].abs()).max(1e-6);
            assert!(
                (grad[i] - fd).abs() / denom < 1e-4,
                "component {}: ad {} vs fd {}",
                i,
                grad[i],
                fd
            );
        }
    }

    #[test]
    fn input_gradient_at_a_kink_uses_zero_subgradient() {
        // Single hidden unit with zero pre-activation at x = 0.
        let hidden = Layer {
            weight: M::from_vec(1, 1, vec![1.0]).unwrap(),
            bias: M::zeros(1, 1),
        };
        let out = Layer {
            weight: M::from_vec(1, 1, vec![5.0]).unwrap(),
            bias: M::zeros(1, 1),
        };
        let net = MlpNet::from_layers(vec![hidden, out]).unwrap();
        let g = net.input_gradient(&[0.0]).unwrap();
        assert_eq!(g, vec![0.0]);
    }

    #[test]
    fn input_gradient_rejects_vector_outputs() {
        let net = linear_identity(2);
        assert!(net.input_gradient(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn forward_rejects_width_mismatch() {
        let net = linear_identity(2);
        let x = M::from_vec(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(net.forward(&x).is_err());
    }

    proptest! {
        // With zero biases, rectifier networks are positively homogeneous.
        #[test]
        fn positive_homogeneity_with_zero_bias(seed in 0u64..500, c in 0.01f64..50.0) {
            let mut rng = stream(seed, "homogeneity", 0);
            let mut net = MlpNet::<f64>::new(&[3, 5, 2], &mut rng);
            for layer in net.layers_mut() {
                layer.bias = M::zeros(1, layer.bias.cols());
            }
            let x = M::from_vec(1, 3, vec![0.5, -1.0, 2.0]).unwrap();
            let y1 = net.forward(&x.scale(c)).unwrap();
            let y2 = net.forward(&x).unwrap().scale(c);
            prop_assert!(y1.max_abs_diff(&y2) < 1e-9 * (1.0 + y2.max_abs()));
        }
    }
}
