use crate::error::Result;
use crate::graphs::GraphOperators;
use crate::model::{mra_bgcn, CellParams, ModelConfig};
use crate::numerics::{Tape, Var};

/// Hidden state and gate activations of one recurrent step.
#[derive(Clone, Debug)]
pub struct CellOutput {
    pub hidden: Var,
    pub update: Var,
    pub reset: Var,
    pub candidate: Var,
}

/// Graph-convolutional GRU step:
///
/// ```text
/// z = σ(G([x ∥ h]; Θz))
/// r = σ(G([x ∥ h]; Θr))
/// C = tanh(G([x ∥ r ⊙ h]; Θc))
/// H = z ⊙ h + (1 − z) ⊙ C
/// ```
pub fn bgcgru_step(
    tape: &Tape,
    x: &Var,
    h_prev: &Var,
    ops: &GraphOperators,
    cell: &CellParams,
    params: &[Var],
    config: &ModelConfig,
) -> Result<CellOutput> {
    let gate = |input: &Var, g| mra_bgcn(tape, input, ops, g, params, config.k, config.mixing);

    let xh = tape.concat_cols(&[x, h_prev])?;
    let update = tape.sigmoid(&gate(&xh, &cell.update)?);
    let reset = tape.sigmoid(&gate(&xh, &cell.reset)?);
    let xrh = tape.concat_cols(&[x, &tape.mul(&reset, h_prev)?])?;
    let candidate = tape.tanh(&gate(&xrh, &cell.candidate)?);

    let keep = tape.mul(&update, h_prev)?;
    let write = tape.mul(&tape.affine(&update, -1.0, 1.0), &candidate)?;
    let hidden = tape.add(&keep, &write)?;
    Ok(CellOutput {
        hidden,
        update,
        reset,
        candidate,
    })
}
