//! Central finite-difference checks of the tape's gradients.
//!
//! Each check compares `∂L/∂θ` from [`Tape::backward`] with
//! `(L(θ + h) − L(θ − h)) / 2h` for every scalar of every parameter, and
//! reports the worst relative error `|a − n| / max(|a|, |n|, 1e-6)`.

use std::rc::Rc;

use crate::error::Result;
use crate::graphs::{EdgeVariant, GraphOperators, NodeGraph};
use crate::model::{
    bgcgru_step, bicomponent_forward, forecast, graph_conv, multi_range_attention, Activation,
    DecoderFeed, ModelConfig, ModelParams, RangeMixing,
};
use crate::numerics::{Matrix, Rng, Tape, Var};

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
const FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub max_rel_error: f64,
    /// Parameter and flat index of the worst entry.
    pub worst: (usize, usize),
    pub entries: usize,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_rel_error < TOLERANCE
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

/// Checks every entry of `params` for the scalar loss built by `f`.
pub fn check(
    name: &str,
    params: &[Matrix],
    f: impl Fn(&Tape, &[Var]) -> Result<Var>,
) -> Result<CheckResult> {
    let tape = Tape::new();
    let bound: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let loss = f(&tape, &bound)?;
    let grads = tape.backward(&loss)?;
    let analytic: Vec<Matrix> = bound.iter().map(|v| grads.wrt(v)).collect();

    let eval = |values: &[Matrix]| -> Result<f64> {
        let tape = Tape::new();
        let bound: Vec<Var> = values.iter().map(|p| tape.leaf(p.clone())).collect();
        Ok(f(&tape, &bound)?.scalar())
    };
    let mut values = params.to_vec();
    let mut result = CheckResult {
        name: name.to_string(),
        max_rel_error: 0.0,
        worst: (0, 0),
        entries: 0,
    };
    for p in 0..values.len() {
        for i in 0..values[p].len() {
            let orig = values[p].as_slice()[i];
            values[p].as_mut_slice()[i] = orig + STEP;
            let up = eval(&values)?;
            values[p].as_mut_slice()[i] = orig - STEP;
            let down = eval(&values)?;
            values[p].as_mut_slice()[i] = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let err = relative_error(analytic[p].as_slice()[i], numeric);
            result.entries += 1;
            if err > result.max_rel_error || err.is_nan() {
                result.max_rel_error = err;
                result.worst = (p, i);
            }
        }
    }
    Ok(result)
}

/// `Σ out ⊙ weights`, turning a matrix output into a scalar with a generic gradient.
fn project(tape: &Tape, out: &Var, weights: &Matrix) -> Result<Var> {
    let w = tape.constant(weights.clone());
    Ok(tape.sum(&tape.mul(out, &w)?))
}

/// A random directed graph on `n` nodes with `edges` distinct edges.
pub fn random_graph(n: usize, edges: usize, rng: &mut Rng) -> Result<NodeGraph> {
    let mut pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    rng.shuffle(&mut pairs);
    let list: Vec<(usize, usize, f64)> = pairs
        .into_iter()
        .take(edges)
        .map(|(i, j)| (i, j, rng.uniform(0.1, 1.0)))
        .collect();
    NodeGraph::from_edges(n, &list)
}

fn small_config() -> ModelConfig {
    ModelConfig {
        k: 2,
        hidden: 4,
        rnn_layers: 1,
        input_dim: 1,
        horizon: 2,
        history: 2,
        edge_variant: EdgeVariant::InteractionPatterns,
        mixing: RangeMixing::Attention,
        attention_dim: 4,
    }
}

/// Graph convolution, bicomponent convolution, attention, one recurrent cell,
/// one full model step with masked MAE, and a short encoder-decoder rollout,
/// all on a 6-node graph with 10 edges, `F = 4`, `k = 2`.
pub fn run_suite(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = Rng::seeded(seed);
    let g = random_graph(6, 10, &mut rng)?;
    let ops = GraphOperators::build(&g, EdgeVariant::InteractionPatterns)?;
    let n = g.node_count();
    let m = ops.edge_count();
    let f = 4;
    let mut out = Vec::new();

    {
        let x = rng.normal_matrix(n, 3);
        let w = rng.normal_matrix(n, f);
        let theta = rng.uniform_matrix(3, f, -0.8, 0.8);
        out.push(check("graph_conv", &[theta, x], |t, p| {
            let y = graph_conv(t, &p[1], &ops.node, &p[0], Activation::Tanh)?;
            project(t, &y, &w)
        })?);
    }

    let config = small_config();
    let params = ModelParams::init(&config, &mut rng)?;
    let gate = params.encoder[0].update.clone();
    let input_width = config.input_dim + config.hidden;
    {
        let x = rng.normal_matrix(n, input_width);
        let ws: Vec<Matrix> = (0..config.k).map(|_| rng.normal_matrix(n, f)).collect();
        let mut values: Vec<Matrix> = params.values().to_vec();
        values.push(x);
        let xi = values.len() - 1;
        out.push(check("bicomponent", &values, |t, p| {
            let hops = bicomponent_forward(t, &p[xi], &ops, &gate, p, config.k)?;
            let mut total = project(t, &hops[0], &ws[0])?;
            for (h, w) in hops.iter().zip(&ws).skip(1) {
                total = t.add(&total, &project(t, h, w)?)?;
            }
            Ok(total)
        })?);
    }

    {
        let layers: Vec<Matrix> = (0..3).map(|_| rng.normal_matrix(n, f)).collect();
        let w_a = rng.normal_matrix(f, 3);
        let u = rng.normal_matrix(3, 1);
        let w = rng.normal_matrix(n, f);
        let mut values = vec![w_a, u];
        values.extend(layers);
        out.push(check("attention", &values, |t, p| {
            let att = multi_range_attention(t, &p[2..], &p[0], &p[1])?;
            project(t, &att.output, &w)
        })?);
    }

    {
        let x = rng.normal_matrix(n, 1);
        let h = rng.uniform_matrix(n, f, -0.9, 0.9);
        let w = rng.normal_matrix(n, f);
        let cell = params.encoder[0].clone();
        let mut values = params.values().to_vec();
        values.push(h);
        let hi = values.len() - 1;
        out.push(check("gru_cell", &values, |t, p| {
            let xv = t.constant(x.clone());
            let step = bgcgru_step(t, &xv, &p[hi], &ops, &cell, p, &config)?;
            project(t, &step.hidden, &w)
        })?);
    }

    {
        let x = rng.normal_matrix(n, 1);
        let h = rng.uniform_matrix(n, f, -0.9, 0.9);
        let mut target = rng.normal_matrix(n, 1);
        target[(0, 0)] = 0.0;
        let target = Rc::new(target);
        let mask = Rc::new(target.map(|v| if v != 0.0 { 1.0 } else { 0.0 }));
        let cell = params.encoder[0].clone();
        let (ow, ob) = (params.out_weight, params.out_bias);
        out.push(check("model_step", params.values(), |t, p| {
            let xv = t.constant(x.clone());
            let hv = t.constant(h.clone());
            let step = bgcgru_step(t, &xv, &hv, &ops, &cell, p, &config)?;
            let ones = t.constant(Matrix::filled(n, 1, 1.0));
            let y = t.add(&t.matmul(&step.hidden, &p[ow])?, &t.matmul(&ones, &p[ob])?)?;
            t.masked_mae(&y, &target, Some(&mask))
        })?);
    }

    {
        // two stacked samples exercise the block-wise propagation
        let history: Vec<Matrix> = (0..config.history).map(|_| rng.normal_matrix(2 * n, 1)).collect();
        let targets: Vec<Rc<Matrix>> = (0..config.horizon)
            .map(|_| Rc::new(rng.normal_matrix(2 * n, 1)))
            .collect();
        out.push(check("seq2seq", params.values(), |t, p| {
            let preds = forecast(t, &history, &ops, &params, p, &config, DecoderFeed::free())?;
            let mut total = t.masked_mae(&preds[0], &targets[0], None)?;
            for (y, target) in preds.iter().zip(&targets).skip(1) {
                total = t.add(&total, &t.masked_mae(y, target, None)?)?;
            }
            Ok(total)
        })?);
    }

    log::debug!("gradcheck graph: {n} nodes, {m} edges");
    Ok(out)
}
