use crate::error::{Error, Result};
use crate::graphs::GraphOperators;
use crate::model::{bgcgru_step, CellParams, ModelConfig, ModelParams};
use crate::numerics::{Matrix, Rng, Tape, Var};

/// What the decoder reads after each step.
pub struct DecoderFeed<'a> {
    /// Ground-truth future signals, one `(B·n) × p` matrix per horizon step.
    pub teacher: Option<&'a [Matrix]>,
    /// Probability of feeding the ground truth instead of the model's own output.
    pub sampling_prob: f64,
    pub rng: Option<&'a mut Rng>,
}

impl DecoderFeed<'_> {
    /// The decoder always consumes its own predictions.
    pub fn free() -> Self {
        DecoderFeed {
            teacher: None,
            sampling_prob: 0.0,
            rng: None,
        }
    }
}

impl<'a> DecoderFeed<'a> {
    pub fn scheduled(teacher: &'a [Matrix], sampling_prob: f64, rng: &'a mut Rng) -> Self {
        DecoderFeed {
            teacher: Some(teacher),
            sampling_prob,
            rng: Some(rng),
        }
    }
}

fn run_stack(
    tape: &Tape,
    input: &Var,
    hidden: &mut [Var],
    cells: &[CellParams],
    ops: &GraphOperators,
    bound: &[Var],
    config: &ModelConfig,
) -> Result<Var> {
    let mut x = input.clone();
    for (h, cell) in hidden.iter_mut().zip(cells) {
        let out = bgcgru_step(tape, &x, h, ops, cell, bound, config)?;
        *h = out.hidden;
        x = h.clone();
    }
    Ok(x)
}

/// Encoder-decoder forecast of `config.horizon` signals from `config.history`.
///
/// The encoder runs the stacked cells over the history from zero state; the
/// decoder starts from the encoder's final states with a zero start token and
/// projects its top hidden state to `p` features per node at every step.
pub fn forecast(
    tape: &Tape,
    history: &[Matrix],
    ops: &GraphOperators,
    params: &ModelParams,
    bound: &[Var],
    config: &ModelConfig,
    mut feed: DecoderFeed<'_>,
) -> Result<Vec<Var>> {
    if history.len() != config.history {
        return Err(Error::contract(format!(
            "history has {} steps, model expects {}",
            history.len(),
            config.history
        )));
    }
    if bound.len() != params.len() {
        return Err(Error::contract("bound parameters do not match the model"));
    }
    if !(0.0..=1.0).contains(&feed.sampling_prob) {
        return Err(Error::contract(format!(
            "sampling probability {} outside [0, 1]",
            feed.sampling_prob
        )));
    }
    if feed.sampling_prob > 0.0 && (feed.teacher.is_none() || feed.rng.is_none()) {
        return Err(Error::contract(
            "teacher forcing requested without ground truth or random source",
        ));
    }
    if let Some(t) = feed.teacher {
        if t.len() != config.horizon {
            return Err(Error::contract(format!(
                "teacher has {} steps, horizon is {}",
                t.len(),
                config.horizon
            )));
        }
    }

    let n = ops.node_count();
    let p = config.input_dim;
    let rows = history[0].rows();
    for x in history.iter().chain(feed.teacher.into_iter().flatten()) {
        if x.rows() != rows || x.cols() != p || rows % n != 0 {
            return Err(Error::Dimension {
                op: "forecast input",
                left: (rows, p),
                right: x.shape(),
            });
        }
    }

    let zero_state = Matrix::zeros(rows, config.hidden);
    let mut hidden: Vec<Var> = (0..config.rnn_layers)
        .map(|_| tape.constant(zero_state.clone()))
        .collect();
    for x in history {
        let x = tape.constant(x.clone());
        run_stack(tape, &x, &mut hidden, &params.encoder, ops, bound, config)?;
    }

    let ones = tape.constant(Matrix::filled(rows, 1, 1.0));
    let bias = tape.matmul(&ones, &bound[params.out_bias])?;
    let mut input = tape.constant(Matrix::zeros(rows, p));
    let mut outputs = Vec::with_capacity(config.horizon);
    for t in 0..config.horizon {
        let top = run_stack(tape, &input, &mut hidden, &params.decoder, ops, bound, config)?;
        let y = tape.add(&tape.matmul(&top, &bound[params.out_weight])?, &bias)?;
        if t + 1 < config.horizon {
            let use_truth = match (&mut feed.rng, feed.teacher) {
                (Some(rng), Some(_)) if feed.sampling_prob > 0.0 => rng.chance(feed.sampling_prob),
                _ => false,
            };
            input = match feed.teacher {
                Some(truth) if use_truth => tape.constant(truth[t].clone()),
                _ => y.clone(),
            };
        }
        outputs.push(y);
    }
    Ok(outputs)
}

/// Inference-mode forecast returning plain matrices.
pub fn predict(
    params: &ModelParams,
    config: &ModelConfig,
    ops: &GraphOperators,
    history: &[Matrix],
) -> Result<Vec<Matrix>> {
    let tape = Tape::inference();
    let bound = params.bind(&tape);
    let out = forecast(&tape, history, ops, params, &bound, config, DecoderFeed::free())?;
    Ok(out.into_iter().map(|v| v.value().clone()).collect())
}
