use crate::error::{Error, Result};
use crate::model::{ModelConfig, RangeMixing};
use crate::numerics::{Matrix, Rng, Tape, Var};

/// Parameter indices of one gate's graph operation.
///
/// `theta_node[0]` maps the gate input to the hidden width; `theta_node[l ≥ 1]`
/// maps the concatenated node and aggregated edge features (`2F`) to `F`.
/// `theta_edge[l]` produces edge hop `l + 1`; edge parameters exist only for
/// `k ≥ 2` because a single hop never reads the edge stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GateParams {
    pub theta_node: Vec<usize>,
    pub theta_edge: Vec<usize>,
    pub w_b: Option<usize>,
    pub w_a: Option<usize>,
    pub u: Option<usize>,
    pub mix: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellParams {
    pub update: GateParams,
    pub reset: GateParams,
    pub candidate: GateParams,
}

/// Every learnable matrix, by name, plus the structure that locates them.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    names: Vec<String>,
    values: Vec<Matrix>,
    pub encoder: Vec<CellParams>,
    pub decoder: Vec<CellParams>,
    pub out_weight: usize,
    pub out_bias: usize,
}

struct Builder {
    names: Vec<String>,
    shapes: Vec<(usize, usize)>,
}

impl Builder {
    fn add(&mut self, name: String, rows: usize, cols: usize) -> usize {
        self.names.push(name);
        self.shapes.push((rows, cols));
        self.names.len() - 1
    }

    fn gate(&mut self, prefix: &str, input: usize, c: &ModelConfig) -> GateParams {
        let f = c.hidden;
        let mut theta_node = vec![self.add(format!("{prefix}.theta_n.0"), input, f)];
        for l in 1..c.k {
            theta_node.push(self.add(format!("{prefix}.theta_n.{l}"), 2 * f, f));
        }
        let (mut theta_edge, mut w_b) = (Vec::new(), None);
        if c.k >= 2 {
            w_b = Some(self.add(format!("{prefix}.w_b"), input, f));
            for l in 0..c.k - 1 {
                theta_edge.push(self.add(format!("{prefix}.theta_e.{l}"), f, f));
            }
        }
        let (mut w_a, mut u, mut mix) = (None, None, None);
        match c.mixing {
            RangeMixing::Attention => {
                w_a = Some(self.add(format!("{prefix}.w_a"), f, c.attention_dim));
                u = Some(self.add(format!("{prefix}.u"), c.attention_dim, 1));
            }
            RangeMixing::Concat => mix = Some(self.add(format!("{prefix}.mix"), c.k * f, f)),
            RangeMixing::LastHop => {}
        }
        GateParams {
            theta_node,
            theta_edge,
            w_b,
            w_a,
            u,
            mix,
        }
    }

    fn cell(&mut self, prefix: &str, input_dim: usize, c: &ModelConfig) -> CellParams {
        let width = input_dim + c.hidden;
        CellParams {
            update: self.gate(&format!("{prefix}.z"), width, c),
            reset: self.gate(&format!("{prefix}.r"), width, c),
            candidate: self.gate(&format!("{prefix}.c"), width, c),
        }
    }
}

impl ModelParams {
    /// Glorot-uniform initialisation, `±√(6 / (fan_in + fan_out))` per matrix;
    /// the output bias starts at zero.
    pub fn init(config: &ModelConfig, rng: &mut Rng) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        for (idx, m) in p.values.iter_mut().enumerate() {
            if idx == p.out_bias {
                continue;
            }
            let limit = (6.0 / (m.rows() + m.cols()) as f64).sqrt();
            *m = rng.uniform_matrix(m.rows(), m.cols(), -limit, limit);
        }
        Ok(p)
    }

    /// All-zero parameters with the layout implied by `config`.
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut b = Builder {
            names: Vec::new(),
            shapes: Vec::new(),
        };
        let stack = |b: &mut Builder, side: &str| {
            (0..config.rnn_layers)
                .map(|l| {
                    let input = if l == 0 { config.input_dim } else { config.hidden };
                    b.cell(&format!("{side}.{l}"), input, config)
                })
                .collect::<Vec<_>>()
        };
        let encoder = stack(&mut b, "enc");
        let decoder = stack(&mut b, "dec");
        let out_weight = b.add("out.w".into(), config.hidden, config.input_dim);
        let out_bias = b.add("out.b".into(), 1, config.input_dim);
        Ok(Self {
            values: b.shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect(),
            names: b.names,
            encoder,
            decoder,
            out_weight,
            out_bias,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Matrix] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Matrix] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(Matrix::len).sum()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Replaces every value, checking shapes against the current layout.
    pub fn set_values(&mut self, values: Vec<Matrix>) -> Result<()> {
        if values.len() != self.values.len() {
            return Err(Error::contract(format!(
                "expected {} parameter matrices, got {}",
                self.values.len(),
                values.len()
            )));
        }
        for (i, (old, new)) in self.values.iter().zip(&values).enumerate() {
            if old.shape() != new.shape() {
                return Err(Error::contract(format!(
                    "parameter {} has shape {:?}, expected {:?}",
                    self.names[i],
                    new.shape(),
                    old.shape()
                )));
            }
        }
        self.values = values;
        Ok(())
    }

    /// Registers every parameter as a trainable leaf on `tape`.
    pub fn bind(&self, tape: &Tape) -> Vec<Var> {
        self.values.iter().map(|m| tape.leaf(m.clone())).collect()
    }
}
