use std::rc::Rc;

use crate::error::{Error, Result};
use crate::graphs::GraphOperators;
use crate::model::{GateParams, RangeMixing};
use crate::numerics::{SparseOp, Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
}

/// `ρ(op · x · θ)` over every block of `x`.
pub fn graph_conv(
    tape: &Tape,
    x: &Var,
    op: &Rc<SparseOp>,
    theta: &Var,
    activation: Activation,
) -> Result<Var> {
    let projected = tape.matmul(x, theta)?;
    let mixed = tape.propagate(op, &projected)?;
    Ok(match activation {
        Activation::Identity => mixed,
        Activation::Tanh => tape.tanh(&mixed),
        Activation::Relu => tape.relu(&mixed),
    })
}

/// Node representations for hops `1..=k`.
///
/// ```text
/// X¹     = ρ(Â x₀ θn⁰)
/// Z⁰     = Mᵀ x₀ W_b
/// Zˡ     = ρ(Âe Zˡ⁻¹ θeˡ⁻¹)            l = 1..k−1
/// Xˡ⁺¹   = ρ(Â [Xˡ ∥ M Zˡ] θnˡ)        l = 1..k−1
/// ```
///
/// `ρ` is tanh throughout. The edge stream is only evaluated when `k ≥ 2`.
pub fn bicomponent_forward(
    tape: &Tape,
    x0: &Var,
    ops: &GraphOperators,
    gate: &GateParams,
    params: &[Var],
    k: usize,
) -> Result<Vec<Var>> {
    if k == 0 {
        return Err(Error::contract("bicomponent convolution needs k >= 1"));
    }
    if gate.theta_node.len() < k || gate.theta_edge.len() < k - 1 {
        return Err(Error::contract(format!(
            "gate parameters cover {} node hops and {} edge hops, k = {k}",
            gate.theta_node.len(),
            gate.theta_edge.len()
        )));
    }
    let p = |i: usize| &params[i];
    let mut x = graph_conv(tape, x0, &ops.node, p(gate.theta_node[0]), Activation::Tanh)?;
    let mut hops = Vec::with_capacity(k);
    if k == 1 {
        hops.push(x);
        return Ok(hops);
    }

    let w_b = gate
        .w_b
        .ok_or_else(|| Error::contract("edge projection W_b missing for k >= 2"))?;
    let mut z = tape.propagate(&ops.incidence_t, &tape.matmul(x0, p(w_b))?)?;
    for l in 1..k {
        z = graph_conv(tape, &z, &ops.edge, p(gate.theta_edge[l - 1]), Activation::Tanh)?;
        let gathered = tape.propagate(&ops.incidence, &z)?;
        let joined = tape.concat_cols(&[&x, &gathered])?;
        let next = graph_conv(tape, &joined, &ops.node, p(gate.theta_node[l]), Activation::Tanh)?;
        hops.push(std::mem::replace(&mut x, next));
    }
    hops.push(x);
    Ok(hops)
}

/// Output of [`multi_range_attention`].
#[derive(Clone, Debug)]
pub struct Attended {
    pub output: Var,
    /// `(B·n) × k` softmax weights, one row per node.
    pub weights: Var,
}

/// Per-node softmax over hops of `(Xˡ W_a) u`, then the weighted sum of hops.
pub fn multi_range_attention(tape: &Tape, layers: &[Var], w_a: &Var, u: &Var) -> Result<Attended> {
    if layers.is_empty() {
        return Err(Error::contract("attention over zero layers"));
    }
    // (X W_a) u = X (W_a u)
    let context = tape.matmul(w_a, u)?;
    let scores = layers
        .iter()
        .map(|x| tape.matmul(x, &context))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Var> = scores.iter().collect();
    let weights = tape.softmax_rows(&tape.concat_cols(&refs)?);
    let mut output: Option<Var> = None;
    for (l, x) in layers.iter().enumerate() {
        let a = tape.slice_cols(&weights, l, l + 1)?;
        let term = tape.scale_rows(x, &a)?;
        output = Some(match output {
            None => term,
            Some(acc) => tape.add(&acc, &term)?,
        });
    }
    Ok(Attended {
        output: output.expect("at least one layer"),
        weights,
    })
}

/// One gate's graph operation: bicomponent convolution followed by range mixing.
/// No activation is applied after mixing.
pub fn mra_bgcn(
    tape: &Tape,
    x0: &Var,
    ops: &GraphOperators,
    gate: &GateParams,
    params: &[Var],
    k: usize,
    mixing: RangeMixing,
) -> Result<Var> {
    let mut hops = bicomponent_forward(tape, x0, ops, gate, params, k)?;
    match mixing {
        RangeMixing::Attention => {
            let (w_a, u) = gate
                .w_a
                .zip(gate.u)
                .ok_or_else(|| Error::contract("attention parameters missing"))?;
            Ok(multi_range_attention(tape, &hops, &params[w_a], &params[u])?.output)
        }
        RangeMixing::Concat => {
            let mix = gate
                .mix
                .ok_or_else(|| Error::contract("concat projection missing"))?;
            let refs: Vec<&Var> = hops.iter().collect();
            let joined = tape.concat_cols(&refs)?;
            tape.matmul(&joined, &params[mix])
        }
        RangeMixing::LastHop => Ok(hops.pop().expect("k >= 1")),
    }
}
