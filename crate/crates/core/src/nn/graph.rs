use super::ops;
use super::{ParamStore, Real, Tensor};
use crate::error::{Error, Result};

/// One node of a static network graph. Node ids index earlier nodes only.
#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    Input,
    Conv3 { input: usize, weight: usize, bias: usize, cout: usize },
    Conv1 { input: usize, weight: usize, bias: usize, cout: usize },
    ConvT2 { input: usize, weight: usize, bias: usize, cout: usize },
    AvgPool2 { input: usize },
    Relu { input: usize },
    Concat { a: usize, b: usize },
    Add { a: usize, b: usize },
}

impl Op {
    fn inputs(&self) -> Vec<usize> {
        match *self {
            Op::Input => vec![],
            Op::Conv3 { input, .. }
            | Op::Conv1 { input, .. }
            | Op::ConvT2 { input, .. }
            | Op::AvgPool2 { input }
            | Op::Relu { input } => vec![input],
            Op::Concat { a, b } | Op::Add { a, b } => vec![a, b],
        }
    }
}

/// Topologically ordered op list with node 0 as the input.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    nodes: Vec<Op>,
    output: usize,
}

/// Every intermediate value of one forward pass, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct Activations<T> {
    values: Vec<Tensor<T>>,
    output: usize,
}

impl<T: Real> Activations<T> {
    pub fn output(&self) -> &Tensor<T> {
        &self.values[self.output]
    }

    pub fn into_output(mut self) -> Tensor<T> {
        self.values.swap_remove(self.output)
    }

    /// Pre-activation sign pattern of every ReLU, used to detect kink crossings.
    pub fn relu_pattern(&self, graph: &Graph) -> Vec<bool> {
        graph
            .nodes
            .iter()
            .filter_map(|op| match *op {
                Op::Relu { input } => Some(input),
                _ => None,
            })
            .flat_map(|i| self.values[i].data.iter().map(|&v| v > T::zero()))
            .collect()
    }
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self {
            nodes: vec![Op::Input],
            output: 0,
        }
    }

    pub fn push(&mut self, op: Op) -> usize {
        assert!(op.inputs().iter().all(|&i| i < self.nodes.len()), "graph edges must point backwards");
        self.nodes.push(op);
        self.output = self.nodes.len() - 1;
        self.output
    }

    pub fn nodes(&self) -> &[Op] {
        &self.nodes
    }

    pub fn output_node(&self) -> usize {
        self.output
    }

    pub fn forward<T: Real>(&self, params: &ParamStore<T>, x: Tensor<T>) -> Activations<T> {
        self.forward_impl(params, x, None)
    }

    /// Forward pass with every ReLU replaced by the fixed 0/1 mask of `frozen`'s
    /// pre-activations, making the map affine in each single parameter.
    pub fn forward_frozen<T: Real>(&self, params: &ParamStore<T>, x: Tensor<T>, frozen: &Activations<T>) -> Activations<T> {
        self.forward_impl(params, x, Some(frozen))
    }

    fn forward_impl<T: Real>(&self, params: &ParamStore<T>, x: Tensor<T>, frozen: Option<&Activations<T>>) -> Activations<T> {
        let mut values: Vec<Tensor<T>> = Vec::with_capacity(self.nodes.len());
        values.push(x);
        for op in &self.nodes[1..] {
            let v = match *op {
                Op::Relu { input } if frozen.is_some() => {
                    let mask = &frozen.expect("checked").values[input];
                    let x = &values[input];
                    Tensor {
                        data: x.data.iter().zip(&mask.data).map(|(&v, &m)| if m > T::zero() { v } else { T::zero() }).collect(),
                        ..*x
                    }
                }
                Op::Input => unreachable!("only node 0 is an input"),
                Op::Conv3 { input, weight, bias, cout } => {
                    ops::conv3x3_forward(&values[input], params.get(weight), params.get(bias), cout)
                }
                Op::Conv1 { input, weight, bias, cout } => {
                    ops::conv1x1_forward(&values[input], params.get(weight), params.get(bias), cout)
                }
                Op::ConvT2 { input, weight, bias, cout } => {
                    ops::conv_transpose2x2_forward(&values[input], params.get(weight), params.get(bias), cout)
                }
                Op::AvgPool2 { input } => ops::avg_pool2_forward(&values[input]),
                Op::Relu { input } => ops::relu_forward(&values[input]),
                Op::Concat { a, b } => ops::concat_forward(&values[a], &values[b]),
                Op::Add { a, b } => ops::add_forward(&values[a], &values[b]),
            };
            values.push(v);
        }
        Activations {
            values,
            output: self.output,
        }
    }

    /// Accumulate parameter gradients of `<dout, output>` into `grads` and
    /// return the gradient with respect to the input.
    pub fn backward<T: Real>(
        &self,
        params: &ParamStore<T>,
        acts: &Activations<T>,
        dout: Tensor<T>,
        grads: &mut ParamStore<T>,
    ) -> Result<Tensor<T>> {
        if !dout.same_shape(acts.output()) {
            return Err(Error::InvalidArgument("output gradient shape differs from output".into()));
        }
        let mut g: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        g[self.output] = Some(dout);
        for id in (1..self.nodes.len()).rev() {
            let Some(dy) = g[id].take() else { continue };
            let v = &acts.values;
            let pass: Vec<(usize, Tensor<T>)> = match self.nodes[id] {
                Op::Input => unreachable!(),
                Op::Conv3 { input, weight, bias, .. } => {
                    let (dw, db) = split_two(grads, weight, bias);
                    vec![(input, ops::conv3x3_backward(&v[input], params.get(weight), &dy, dw, db))]
                }
                Op::Conv1 { input, weight, bias, .. } => {
                    let (dw, db) = split_two(grads, weight, bias);
                    vec![(input, ops::conv1x1_backward(&v[input], params.get(weight), &dy, dw, db))]
                }
                Op::ConvT2 { input, weight, bias, .. } => {
                    let (dw, db) = split_two(grads, weight, bias);
                    vec![(input, ops::conv_transpose2x2_backward(&v[input], params.get(weight), &dy, dw, db))]
                }
                Op::AvgPool2 { input } => vec![(input, ops::avg_pool2_backward(&dy))],
                Op::Relu { input } => vec![(input, ops::relu_backward(&v[id], &dy))],
                Op::Concat { a, b } => {
                    let (da, db) = ops::concat_backward(v[a].c, &dy);
                    vec![(a, da), (b, db)]
                }
                Op::Add { a, b } => vec![(a, dy.clone()), (b, dy)],
            };
            for (target, grad) in pass {
                match &mut g[target] {
                    Some(acc) => acc.data.iter_mut().zip(&grad.data).for_each(|(a, &b)| *a += b),
                    slot => *slot = Some(grad),
                }
            }
        }
        let x = &acts.values[0];
        Ok(g[0].take().unwrap_or_else(|| Tensor::zeros(x.c, x.h, x.w)))
    }
}

fn split_two<T>(grads: &mut ParamStore<T>, a: usize, b: usize) -> (&mut [T], &mut [T]) {
    assert!(a < b, "bias tensor follows its weight");
    let (lo, hi) = grads.tensors.split_at_mut(b);
    (&mut lo[a].data, &mut hi[0].data)
}
