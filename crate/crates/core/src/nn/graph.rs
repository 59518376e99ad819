//! Define-by-run computation graph with reverse-mode differentiation.
//!
//! Each op evaluates eagerly and records itself on the tape. `backward`
//! walks the tape in reverse and accumulates gradients for every node that
//! depends on a leaf created with [`Graph::param`].

use crate::error::{Error, Result};

use super::kernels::{self, ConvDims};
use super::{Float, Tensor};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<S> {
    Leaf,
    Conv1d { input: Var, kernel: Var, bias: Var, stride: usize },
    Relu(Var),
    Reshape(Var),
    Linear { input: Var, weight: Var, bias: Var },
    Concat(Vec<Var>),
    Sum(Var),
    WeightedMse { pred: Var, target: Var, weights: Vec<S> },
}

#[derive(Debug)]
struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Graph<S> {
    nodes: Vec<Node<S>>,
}

/// Gradients indexed by [`Var`]. Nodes that do not depend on a parameter
/// have none.
#[derive(Debug)]
pub struct Gradients<S> {
    grads: Vec<Option<Tensor<S>>>,
}

impl<S: Float> Gradients<S> {
    pub fn get(&self, v: Var) -> Option<&Tensor<S>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<S>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

impl<S: Float> Graph<S> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf that receives a gradient.
    pub fn param(&mut self, value: Tensor<S>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf without a gradient (data, targets).
    pub fn constant(&mut self, value: Tensor<S>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn check(&self, v: Var) -> Result<&Node<S>> {
        self.nodes
            .get(v.0)
            .ok_or_else(|| Error::invalid(format!("variable {} is not on this graph", v.0)))
    }

    fn record(&mut self, name: &str, value: Tensor<S>, op: Op<S>, inputs: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(name.to_string()));
        }
        let rg = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        Ok(self.push(value, op, rg))
    }

    /// Valid 1D convolution over `[B, T, C_in]` with kernel `[C_out, C_in, K]`
    /// and bias `[C_out]`. Output `[B, (T - K) / stride + 1, C_out]`.
    pub fn conv1d(&mut self, input: Var, kernel: Var, bias: Var, stride: usize) -> Result<Var> {
        let d = self.conv_dims(input, kernel, bias, stride)?;
        let out = kernels::conv1d_forward(
            self.value(input).data(),
            self.value(kernel).data(),
            self.value(bias).data(),
            d,
        );
        let value = Tensor::new(vec![d.batch, d.t_out(), d.c_out], out)?;
        self.record(
            "conv1d",
            value,
            Op::Conv1d {
                input,
                kernel,
                bias,
                stride,
            },
            &[input, kernel, bias],
        )
    }

    fn conv_dims(&self, input: Var, kernel: Var, bias: Var, stride: usize) -> Result<ConvDims> {
        let (x, k, b) = (
            &self.check(input)?.value,
            &self.check(kernel)?.value,
            &self.check(bias)?.value,
        );
        if x.rank() != 3 || k.rank() != 3 || b.rank() != 1 {
            return Err(Error::Shape(format!(
                "conv1d expects input [B,T,C], kernel [O,C,K], bias [O]; got {:?}, {:?}, {:?}",
                x.shape(),
                k.shape(),
                b.shape()
            )));
        }
        if stride == 0 {
            return Err(Error::invalid("conv1d stride must be positive"));
        }
        let d = ConvDims {
            batch: x.shape()[0],
            t_in: x.shape()[1],
            c_in: x.shape()[2],
            c_out: k.shape()[0],
            k: k.shape()[2],
            stride,
        };
        if k.shape()[1] != d.c_in || b.shape()[0] != d.c_out {
            return Err(Error::Shape(format!(
                "conv1d channel mismatch: input {:?}, kernel {:?}, bias {:?}",
                x.shape(),
                k.shape(),
                b.shape()
            )));
        }
        if d.k == 0 || d.t_in < d.k {
            return Err(Error::Shape(format!(
                "conv1d input length {} shorter than kernel {}",
                d.t_in, d.k
            )));
        }
        Ok(d)
    }

    pub fn relu(&mut self, input: Var) -> Result<Var> {
        let x = &self.check(input)?.value;
        let data = x.data().iter().map(|&v| v.max(S::zero())).collect();
        let value = Tensor::new(x.shape().to_vec(), data)?;
        self.record("relu", value, Op::Relu(input), &[input])
    }

    pub fn reshape(&mut self, input: Var, shape: Vec<usize>) -> Result<Var> {
        let value = self.check(input)?.value.clone().reshape(shape)?;
        self.record("reshape", value, Op::Reshape(input), &[input])
    }

    /// `[B, ...]` to `[B, prod(...)]`.
    pub fn flatten(&mut self, input: Var) -> Result<Var> {
        let x = &self.check(input)?.value;
        if x.rank() == 0 {
            return Err(Error::Shape("cannot flatten a scalar".into()));
        }
        let b = x.shape()[0];
        let rest = x.shape()[1..].iter().product();
        self.reshape(input, vec![b, rest])
    }

    /// `[B, in] x W[out, in]^T + b[out]`.
    pub fn linear(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let (x, w, b) = (
            &self.check(input)?.value,
            &self.check(weight)?.value,
            &self.check(bias)?.value,
        );
        if x.rank() != 2 || w.rank() != 2 || b.rank() != 1 || w.shape()[1] != x.shape()[1] || b.shape()[0] != w.shape()[0] {
            return Err(Error::Shape(format!(
                "linear expects input [B,in], weight [out,in], bias [out]; got {:?}, {:?}, {:?}",
                x.shape(),
                w.shape(),
                b.shape()
            )));
        }
        let (batch, n_in, n_out) = (x.shape()[0], x.shape()[1], w.shape()[0]);
        let out = kernels::linear_forward(x.data(), w.data(), b.data(), batch, n_in, n_out);
        let value = Tensor::new(vec![batch, n_out], out)?;
        self.record(
            "linear",
            value,
            Op::Linear {
                input,
                weight,
                bias,
            },
            &[input, weight, bias],
        )
    }

    /// Concatenate rank-2 tensors `[B, n_i]` along the last axis.
    pub fn concat(&mut self, inputs: &[Var]) -> Result<Var> {
        if inputs.is_empty() {
            return Err(Error::invalid("concat of nothing"));
        }
        let mut batch = None;
        let mut widths = Vec::with_capacity(inputs.len());
        for &v in inputs {
            let x = &self.check(v)?.value;
            if x.rank() != 2 || batch.is_some_and(|b| b != x.shape()[0]) {
                return Err(Error::Shape(format!("concat input {:?}", x.shape())));
            }
            batch = Some(x.shape()[0]);
            widths.push(x.shape()[1]);
        }
        let batch = batch.unwrap_or(0);
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(batch * total);
        for b in 0..batch {
            for (&v, &w) in inputs.iter().zip(&widths) {
                out.extend_from_slice(&self.value(v).data()[b * w..(b + 1) * w]);
            }
        }
        let value = Tensor::new(vec![batch, total], out)?;
        self.record("concat", value, Op::Concat(inputs.to_vec()), inputs)
    }

    pub fn sum(&mut self, input: Var) -> Result<Var> {
        let total = self.check(input)?.value.data().iter().copied().sum();
        self.record("sum", Tensor::scalar(total), Op::Sum(input), &[input])
    }

    /// Batch mean of `sum_f w_f (p - t)^2 / F` over `[B, F]` predictions.
    pub fn weighted_mse(&mut self, pred: Var, target: Var, weights: &[S]) -> Result<Var> {
        let (p, t) = (&self.check(pred)?.value, &self.check(target)?.value);
        if p.rank() != 2 || p.shape() != t.shape() || p.shape()[1] != weights.len() {
            return Err(Error::Shape(format!(
                "weighted_mse: pred {:?}, target {:?}, {} weights",
                p.shape(),
                t.shape(),
                weights.len()
            )));
        }
        let (batch, nf) = (p.shape()[0], p.shape()[1]);
        if batch == 0 {
            return Err(Error::Shape("weighted_mse on an empty batch".into()));
        }
        let mut total = S::zero();
        for (row_p, row_t) in p.data().chunks(nf).zip(t.data().chunks(nf)) {
            for f in 0..nf {
                let e = row_p[f] - row_t[f];
                total += weights[f] * e * e;
            }
        }
        let loss = total / S::of((batch * nf) as f64);
        self.record(
            "weighted_mse",
            Tensor::scalar(loss),
            Op::WeightedMse {
                pred,
                target,
                weights: weights.to_vec(),
            },
            &[pred, target],
        )
    }

    /// Gradients of a scalar `root` with respect to every node.
    pub fn backward(&self, root: Var) -> Result<Gradients<S>> {
        let node = self.check(root)?;
        if node.value.len() != 1 {
            return Err(Error::Shape(format!(
                "backward needs a scalar root, got {:?}",
                node.value.shape()
            )));
        }
        let seed = Tensor::new(node.value.shape().to_vec(), vec![S::one()])?;
        self.backward_with(root, seed)
    }

    /// Reverse pass from `root` with an explicit upstream gradient.
    pub fn backward_with(&self, root: Var, seed: Tensor<S>) -> Result<Gradients<S>> {
        let node = self.check(root)?;
        if seed.shape() != node.value.shape() {
            return Err(Error::Shape(format!(
                "seed {:?} does not match root {:?}",
                seed.shape(),
                node.value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(seed);
        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads)?;
            grads[i] = Some(g);
        }
        for (g, n) in grads.iter_mut().zip(&self.nodes) {
            if !n.requires_grad {
                *g = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, node: &Node<S>, g: &Tensor<S>, grads: &mut [Option<Tensor<S>>]) -> Result<()> {
        let mut acc = |v: Var, t: Tensor<S>| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&t),
            slot @ None => *slot = Some(t),
        };
        match &node.op {
            Op::Leaf => {}
            Op::Conv1d {
                input,
                kernel,
                bias,
                stride,
            } => {
                let d = self.conv_dims(*input, *kernel, *bias, *stride)?;
                let (gi, gk, gb) = kernels::conv1d_backward(
                    self.value(*input).data(),
                    self.value(*kernel).data(),
                    g.data(),
                    d,
                    self.wants(*input),
                );
                if let Some(gi) = gi {
                    acc(*input, Tensor::new(self.value(*input).shape().to_vec(), gi)?);
                }
                if self.wants(*kernel) {
                    acc(*kernel, Tensor::new(self.value(*kernel).shape().to_vec(), gk)?);
                }
                if self.wants(*bias) {
                    acc(*bias, Tensor::new(vec![d.c_out], gb)?);
                }
            }
            Op::Relu(input) => {
                let data = g
                    .data()
                    .iter()
                    .zip(node.value.data())
                    .map(|(&gv, &y)| if y > S::zero() { gv } else { S::zero() })
                    .collect();
                acc(*input, Tensor::new(g.shape().to_vec(), data)?);
            }
            Op::Reshape(input) => {
                let shape = self.value(*input).shape().to_vec();
                acc(*input, g.clone().reshape(shape)?);
            }
            Op::Linear {
                input,
                weight,
                bias,
            } => {
                let (x, w) = (self.value(*input), self.value(*weight));
                let (batch, n_in, n_out) = (x.shape()[0], x.shape()[1], w.shape()[0]);
                let (gi, gw, gb) = kernels::linear_backward(
                    x.data(),
                    w.data(),
                    g.data(),
                    batch,
                    n_in,
                    n_out,
                    self.wants(*input),
                );
                if let Some(gi) = gi {
                    acc(*input, Tensor::new(vec![batch, n_in], gi)?);
                }
                if self.wants(*weight) {
                    acc(*weight, Tensor::new(vec![n_out, n_in], gw)?);
                }
                if self.wants(*bias) {
                    acc(*bias, Tensor::new(vec![n_out], gb)?);
                }
            }
            Op::Concat(inputs) => {
                let batch = g.shape()[0];
                let total = g.shape()[1];
                let mut offset = 0;
                for &v in inputs {
                    let w = self.value(v).shape()[1];
                    if self.wants(v) {
                        let mut data = Vec::with_capacity(batch * w);
                        for b in 0..batch {
                            data.extend_from_slice(&g.data()[b * total + offset..b * total + offset + w]);
                        }
                        acc(v, Tensor::new(vec![batch, w], data)?);
                    }
                    offset += w;
                }
            }
            Op::Sum(input) => {
                let gv = g.data()[0];
                let shape = self.value(*input).shape().to_vec();
                let n = self.value(*input).len();
                acc(*input, Tensor::new(shape, vec![gv; n])?);
            }
            Op::WeightedMse {
                pred,
                target,
                weights,
            } => {
                let (p, t) = (self.value(*pred), self.value(*target));
                let nf = weights.len();
                let scale = g.data()[0] * S::of(2.0 / p.len() as f64);
                let mut gp = Vec::with_capacity(p.len());
                for (i, (&pv, &tv)) in p.data().iter().zip(t.data()).enumerate() {
                    gp.push(scale * weights[i % nf] * (pv - tv));
                }
                if self.wants(*target) {
                    acc(*target, Tensor::new(p.shape().to_vec(), gp.iter().map(|&v| -v).collect())?);
                }
                if self.wants(*pred) {
                    acc(*pred, Tensor::new(p.shape().to_vec(), gp)?);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::from_f64(shape.to_vec(), data).unwrap()
    }

    #[test]
    fn identity_kernel_copies_input() {
        let mut g = Graph::new();
        let x: Vec<f64> = (0..7 * 3).map(|i| i as f64 * 0.3 - 2.0).collect();
        let xv = g.constant(t(&[1, 7, 3], &x));
        let mut k = vec![0.0; 9];
        for c in 0..3 {
            k[c * 3 + c] = 1.0;
        }
        let kv = g.param(t(&[3, 3, 1], &k));
        let bv = g.param(t(&[3], &[0.0; 3]));
        let y = g.conv1d(xv, kv, bv, 1).unwrap();
        assert_eq!(g.value(y).data(), &x[..]);
    }

    #[test]
    fn box_kernel_stride_two() {
        let mut g = Graph::new();
        let xv = g.constant(t(&[1, 4, 1], &[1.0, 2.0, 3.0, 4.0]));
        let kv = g.param(t(&[1, 1, 3], &[1.0, 1.0, 1.0]));
        let bv = g.param(t(&[1], &[0.0]));
        let y = g.conv1d(xv, kv, bv, 1).unwrap();
        assert_eq!(g.value(y).data(), &[6.0, 9.0]);
    }

    #[test]
    fn strided_output_length() {
        let mut g = Graph::<f64>::new();
        let xv = g.constant(Tensor::zeros(&[2, 120, 24]));
        let kv = g.param(Tensor::zeros(&[32, 24, 5]));
        let bv = g.param(Tensor::zeros(&[32]));
        let y = g.conv1d(xv, kv, bv, 2).unwrap();
        assert_eq!(g.value(y).shape(), &[2, 58, 32]);
    }

    #[test]
    fn conv_rejects_short_input_and_bad_channels() {
        let mut g = Graph::<f64>::new();
        let xv = g.constant(Tensor::zeros(&[1, 2, 1]));
        let kv = g.param(Tensor::zeros(&[1, 1, 3]));
        let bv = g.param(Tensor::zeros(&[1]));
        assert!(matches!(g.conv1d(xv, kv, bv, 1), Err(Error::Shape(_))));
        let kv2 = g.param(Tensor::zeros(&[1, 2, 1]));
        assert!(matches!(g.conv1d(xv, kv2, bv, 1), Err(Error::Shape(_))));
    }

    #[test]
    fn sum_gradient_is_one() {
        let mut g = Graph::new();
        let x = g.param(t(&[2, 3], &[1.0, -2.0, 3.0, 0.5, 0.0, 9.0]));
        let s = g.sum(x).unwrap();
        let grads = g.backward(s).unwrap();
        assert!(grads.get(x).unwrap().data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut g = Graph::new();
        let x = g.param(t(&[1, 6, 2], &[0.5; 12]));
        let k = g.param(t(&[3, 2, 2], &[0.1; 12]));
        let b = g.param(t(&[3], &[0.2; 3]));
        let y = g.conv1d(x, k, b, 1).unwrap();
        let seed = Tensor::zeros(g.value(y).shape());
        let grads = g.backward_with(y, seed).unwrap();
        for v in [x, k, b] {
            assert!(grads.get(v).unwrap().data().iter().all(|&e| e == 0.0));
        }
    }

    #[test]
    fn backward_needs_scalar_and_known_root() {
        let mut g = Graph::new();
        let x = g.param(t(&[2], &[1.0, 2.0]));
        assert!(matches!(g.backward(x), Err(Error::Shape(_))));
        assert!(matches!(g.backward(Var(17)), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut g = Graph::new();
        let x = g.constant(t(&[1, 2], &[1.0, 2.0]));
        let w = g.param(t(&[1, 2], &[3.0, 4.0]));
        let b = g.param(t(&[1], &[0.0]));
        let y = g.linear(x, w, b).unwrap();
        let s = g.sum(y).unwrap();
        let grads = g.backward(s).unwrap();
        assert!(grads.get(x).is_none());
        assert_eq!(grads.get(w).unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn weighted_mse_cases() {
        let w = [0.5, 2.0, 1.25, 1.0];
        let mut g = Graph::new();
        let p = g.param(t(&[1, 4], &[1.0, 2.0, 3.0, 4.0]));
        let tt = g.constant(t(&[1, 4], &[1.0, 2.0, 3.0, 4.0]));
        let l = g.weighted_mse(p, tt, &w).unwrap();
        assert_eq!(g.value(l).item().unwrap(), 0.0);

        let p = g.param(t(&[1, 4], &[1.0; 4]));
        let tt = g.constant(t(&[1, 4], &[0.0; 4]));
        let l = g.weighted_mse(p, tt, &w).unwrap();
        assert!((g.value(l).item().unwrap() - 1.1875).abs() < 1e-12);

        let l = g.weighted_mse(p, tt, &[1.0; 4]).unwrap();
        assert!((g.value(l).item().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_forward_is_an_error() {
        let mut g = Graph::new();
        let x = g.constant(t(&[1, 1], &[f64::INFINITY]));
        let w = g.param(t(&[1, 1], &[1.0]));
        let b = g.param(t(&[1], &[0.0]));
        assert!(matches!(g.linear(x, w, b), Err(Error::NonFinite(_))));
    }

    /// Central-difference oracle for d(loss)/d(leaf) where the loss is built
    /// by `build` from the given leaves.
    fn fd_check(leaves: Vec<Tensor<f64>>, build: impl Fn(&mut Graph<f64>, &[Var]) -> Var) {
        let mut g = Graph::new();
        let vars: Vec<Var> = leaves.iter().map(|l| g.param(l.clone())).collect();
        let root = build(&mut g, &vars);
        let grads = g.backward(root).unwrap();
        let h = 1e-5;
        for (li, leaf) in leaves.iter().enumerate() {
            let analytic = grads.get(vars[li]).unwrap();
            for i in 0..leaf.len() {
                let eval = |delta: f64| {
                    let mut ls = leaves.clone();
                    ls[li].data_mut()[i] += delta;
                    let mut g = Graph::new();
                    let vs: Vec<Var> = ls.into_iter().map(|l| g.param(l)).collect();
                    let r = build(&mut g, &vs);
                    g.value(r).item().unwrap()
                };
                let numeric = (eval(h) - eval(-h)) / (2.0 * h);
                let a = analytic.data()[i];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
                assert!(rel < 1e-4, "leaf {li} elem {i}: analytic {a} numeric {numeric}");
            }
        }
    }

    fn pseudo(n: usize, salt: u64) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let z = (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt;
                ((z >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect()
    }

    #[test]
    fn gradient_check_conv() {
        fd_check(
            vec![
                t(&[2, 9, 3], &pseudo(54, 1)),
                t(&[4, 3, 3], &pseudo(36, 2)),
                t(&[4], &pseudo(4, 3)),
                t(&[2, 4, 4], &pseudo(32, 4)),
            ],
            |g, v| {
                let y = g.conv1d(v[0], v[1], v[2], 2).unwrap();
                let y = g.reshape(y, vec![2, 16]).unwrap();
                let tgt = g.reshape(v[3], vec![2, 16]).unwrap();
                g.weighted_mse(y, tgt, &[0.5; 16]).unwrap()
            },
        );
    }

    #[test]
    fn gradient_check_linear_relu_concat() {
        fd_check(
            vec![
                t(&[3, 4], &pseudo(12, 5)),
                t(&[3, 2], &pseudo(6, 6)),
                t(&[5, 6], &pseudo(30, 7)),
                t(&[5], &pseudo(5, 8)),
            ],
            |g, v| {
                let c = g.concat(&[v[0], v[1]]).unwrap();
                let y = g.linear(c, v[2], v[3]).unwrap();
                let r = g.relu(y).unwrap();
                g.sum(r).unwrap()
            },
        );
    }

    #[test]
    fn gradient_check_weighted_mse() {
        fd_check(
            vec![t(&[2, 4], &pseudo(8, 9)), t(&[2, 4], &pseudo(8, 10))],
            |g, v| g.weighted_mse(v[0], v[1], &[0.5, 2.0, 1.25, 1.0]).unwrap(),
        );
    }

    proptest! {
        #[test]
        fn conv_is_linear_in_input(
            a in proptest::collection::vec(-5.0f64..5.0, 16),
            b in proptest::collection::vec(-5.0f64..5.0, 16),
            k in proptest::collection::vec(-1.0f64..1.0, 12),
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
        ) {
            let run = |x: &[f64]| {
                let mut g = Graph::new();
                let xv = g.constant(t(&[1, 8, 2], x));
                let kv = g.constant(t(&[2, 2, 3], &k));
                let bv = g.constant(t(&[2], &[0.0, 0.0]));
                let y = g.conv1d(xv, kv, bv, 2).unwrap();
                g.value(y).data().to_vec()
            };
            let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + beta * y).collect();
            let (ya, yb, ym) = (run(&a), run(&b), run(&mix));
            for i in 0..ym.len() {
                prop_assert!((ym[i] - (alpha * ya[i] + beta * yb[i])).abs() < 1e-9);
            }
        }
    }
}
