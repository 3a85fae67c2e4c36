//! Uncertainty computation lowered to a small DAG of primitive operators
//! (relu, add_const, squeeze, reduce_sum, divide) that a restricted
//! inference runtime can execute.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    /// Graph input with a fixed shape.
    Input {
        shape: Vec<usize>,
    },
    Constant {
        shape: Vec<usize>,
        value: Vec<f64>,
    },
    Relu,
    AddConst(f64),
    /// Drops all size-1 axes.
    Squeeze,
    /// Sums every element into a `[1]` tensor.
    ReduceSum,
    /// Elementwise `a / b`, `b` broadcast when it has one element.
    Divide,
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Input { .. } => "input",
            Op::Constant { .. } => "constant",
            Op::Relu => "relu",
            Op::AddConst(_) => "add_const",
            Op::Squeeze => "squeeze",
            Op::ReduceSum => "reduce_sum",
            Op::Divide => "divide",
        }
    }

    fn arity(&self) -> usize {
        match self {
            Op::Input { .. } | Op::Constant { .. } => 0,
            Op::Divide => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub op: Op,
    pub inputs: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpGraph {
    pub nodes: Vec<Node>,
    pub output: usize,
}

#[derive(Clone, Debug, PartialEq)]
struct Value {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl OpGraph {
    /// Checks arity and references, then returns a topological order
    /// (Kahn's algorithm, lowest index first among ready nodes).
    pub fn topo_order(&self) -> Result<Vec<usize>> {
        let n = self.nodes.len();
        if self.output >= n {
            return Err(Error::Graph(format!("output node {} out of range", self.output)));
        }
        let mut indegree = vec![0usize; n];
        let mut users = vec![Vec::new(); n];
        for (i, node) in self.nodes.iter().enumerate() {
            if node.inputs.len() != node.op.arity() {
                return Err(Error::Graph(format!(
                    "node {i} ({}) has {} inputs, expected {}",
                    node.op.name(),
                    node.inputs.len(),
                    node.op.arity()
                )));
            }
            for &j in &node.inputs {
                if j >= n {
                    return Err(Error::Graph(format!("node {i} reads missing node {j}")));
                }
                indegree[i] += 1;
                users[j].push(i);
            }
        }
        let mut ready: VecDeque<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_front() {
            order.push(i);
            for &u in &users[i] {
                indegree[u] -= 1;
                if indegree[u] == 0 {
                    ready.push_back(u);
                }
            }
        }
        if order.len() != n {
            return Err(Error::CyclicGraph);
        }
        Ok(order)
    }

    /// Evaluates the graph with a single input tensor.
    pub fn eval(&self, input: &[f64]) -> Result<Vec<f64>> {
        let order = self.topo_order()?;
        let mut values: Vec<Option<Value>> = vec![None; self.nodes.len()];
        for i in order {
            let node = &self.nodes[i];
            let arg = |k: usize| values[node.inputs[k]].as_ref().expect("topological order");
            let v = match &node.op {
                Op::Input { shape } => {
                    if shape.iter().product::<usize>() != input.len() {
                        return Err(Error::dim(
                            "op graph input",
                            format!("{} values for shape {shape:?}", input.len()),
                        ));
                    }
                    Value { shape: shape.clone(), data: input.to_vec() }
                }
                Op::Constant { shape, value } => Value { shape: shape.clone(), data: value.clone() },
                Op::Relu => {
                    let a = arg(0);
                    Value { shape: a.shape.clone(), data: a.data.iter().map(|&x| x.max(0.0)).collect() }
                }
                Op::AddConst(c) => {
                    let a = arg(0);
                    Value { shape: a.shape.clone(), data: a.data.iter().map(|&x| x + c).collect() }
                }
                Op::Squeeze => {
                    let a = arg(0);
                    let mut shape: Vec<usize> = a.shape.iter().copied().filter(|&d| d != 1).collect();
                    if shape.is_empty() {
                        shape.push(1);
                    }
                    Value { shape, data: a.data.clone() }
                }
                Op::ReduceSum => Value { shape: vec![1], data: vec![arg(0).data.iter().sum()] },
                Op::Divide => {
                    let (a, b) = (arg(0), arg(1));
                    let data = if b.data.len() == 1 {
                        a.data.iter().map(|&x| x / b.data[0]).collect()
                    } else if a.data.len() == 1 {
                        b.data.iter().map(|&y| a.data[0] / y).collect()
                    } else if a.data.len() == b.data.len() {
                        a.data.iter().zip(&b.data).map(|(x, y)| x / y).collect()
                    } else {
                        return Err(Error::dim("op graph divide", format!("{:?} / {:?}", a.shape, b.shape)));
                    };
                    let shape = if a.data.len() >= b.data.len() { a.shape.clone() } else { b.shape.clone() };
                    Value { shape, data }
                }
            };
            values[i] = Some(v);
        }
        Ok(values[self.output].take().expect("output evaluated").data)
    }

    /// Op name → count, for golden comparisons.
    pub fn op_counts(&self) -> BTreeMap<&'static str, usize> {
        let mut m = BTreeMap::new();
        for n in &self.nodes {
            *m.entry(n.op.name()).or_insert(0) += 1;
        }
        m
    }
}

/// `u = K / Σ (relu(z) + 1)` for one head with `classes` outputs (2 for a
/// Beta head). Input shape is `[1, classes]`.
pub fn build_uncertainty_opgraph(classes: usize) -> Result<OpGraph> {
    if classes < 2 {
        return Err(Error::Config(format!("uncertainty graph needs >= 2 outputs, got {classes}")));
    }
    let nodes = vec![
        Node { op: Op::Input { shape: vec![1, classes] }, inputs: vec![] },
        Node { op: Op::Relu, inputs: vec![0] },
        Node { op: Op::AddConst(1.0), inputs: vec![1] },
        Node { op: Op::Squeeze, inputs: vec![2] },
        Node { op: Op::ReduceSum, inputs: vec![3] },
        Node { op: Op::Constant { shape: vec![1], value: vec![classes as f64] }, inputs: vec![] },
        Node { op: Op::Divide, inputs: vec![5, 4] },
    ];
    Ok(OpGraph { nodes, output: 6 })
}

/// Uncertainty of one head's logits through `graph`.
pub fn eval_opgraph(graph: &OpGraph, logits: &[f64]) -> Result<f64> {
    let out = graph.eval(logits)?;
    match out.as_slice() {
        [u] => Ok(*u),
        other => Err(Error::Graph(format!("uncertainty graph produced {} values", other.len()))),
    }
}
