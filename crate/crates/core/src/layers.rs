//! Recurrent and feed-forward building blocks on top of the tape.
//!
//! Parameters are registered in a [`ParameterStore`] under
//! `layer_name/gate/param` style names; the layer structs themselves only
//! hold [`ParamId`]s and are cheap to clone.

use rand::Rng;

use crate::tensor::{ParamId, ParameterStore, Tape, Tensor, TensorError, Var};

/// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    uniform(rng, rows, cols, bound)
}

pub fn uniform<R: Rng>(rng: &mut R, rows: usize, cols: usize, bound: f64) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-bound..=bound))
        .collect();
    Tensor::from_vec(rows, cols, data).expect("sized")
}

fn expect_dim(op: &'static str, tape: &Tape, x: Var, dim: usize) -> Result<(), TensorError> {
    let shape = tape.shape(x);
    if shape != (dim, 1) {
        return Err(TensorError::Shape {
            op,
            left: shape,
            right: (dim, 1),
        });
    }
    Ok(())
}

/// `W x + b`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    input_dim: usize,
    output_dim: usize,
}

impl Linear {
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        name: &str,
        input_dim: usize,
        output_dim: usize,
        rng: &mut R,
    ) -> Result<Self, TensorError> {
        let weight = store.add(format!("{name}/w"), glorot(rng, output_dim, input_dim))?;
        let bias = store.add(format!("{name}/b"), Tensor::zeros(output_dim, 1))?;
        Ok(Linear {
            weight,
            bias,
            input_dim,
            output_dim,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn apply(&self, tape: &mut Tape, x: Var) -> Result<Var, TensorError> {
        expect_dim("linear", tape, x, self.input_dim)?;
        let w = tape.param(self.weight);
        let b = tape.param(self.bias);
        let wx = tape.matmul(w, x)?;
        tape.add(wx, b)
    }
}

/// A lookup table of row vectors.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub table: ParamId,
    rows: usize,
    dim: usize,
}

impl Embedding {
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        name: &str,
        rows: usize,
        dim: usize,
        rng: &mut R,
    ) -> Result<Self, TensorError> {
        let table = store.add(name, uniform(rng, rows, dim, 0.05))?;
        Ok(Embedding { table, rows, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn lookup(&self, tape: &mut Tape, row: usize) -> Result<Var, TensorError> {
        let table = tape.param(self.table);
        tape.pick_row(table, row)
    }
}

#[derive(Debug, Clone)]
struct Gate {
    w_x: ParamId,
    w_h: ParamId,
    b: ParamId,
}

impl Gate {
    fn new<R: Rng>(
        store: &mut ParameterStore,
        name: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self, TensorError> {
        Ok(Gate {
            w_x: store.add(format!("{name}/w_x"), glorot(rng, hidden_dim, input_dim))?,
            w_h: store.add(format!("{name}/w_h"), glorot(rng, hidden_dim, hidden_dim))?,
            b: store.add(format!("{name}/b"), Tensor::zeros(hidden_dim, 1))?,
        })
    }

    fn preactivation(
        &self,
        tape: &mut Tape,
        x: Var,
        h: Option<Var>,
    ) -> Result<Var, TensorError> {
        let w_x = tape.param(self.w_x);
        let b = tape.param(self.b);
        let mut pre = tape.matmul(w_x, x)?;
        if let Some(h) = h {
            let w_h = tape.param(self.w_h);
            let wh = tape.matmul(w_h, h)?;
            pre = tape.add(pre, wh)?;
        }
        tape.add(pre, b)
    }
}

/// Hidden and memory vectors of an LSTM after some number of steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmState {
    pub h: Var,
    pub c: Var,
}

/// A single LSTM cell with logistic gates and a tanh candidate.
#[derive(Debug, Clone)]
pub struct LstmCell {
    input: Gate,
    forget: Gate,
    output: Gate,
    candidate: Gate,
    input_dim: usize,
    hidden_dim: usize,
}

impl LstmCell {
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        name: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self, TensorError> {
        let mut gate = |g: &str| Gate::new(store, &format!("{name}/{g}"), input_dim, hidden_dim, rng);
        Ok(LstmCell {
            input: gate("input")?,
            forget: gate("forget")?,
            output: gate("output")?,
            candidate: gate("candidate")?,
            input_dim,
            hidden_dim,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    /// Bias parameters of the input and forget gates, for tests that saturate
    /// the gates.
    pub fn gate_biases(&self) -> (ParamId, ParamId) {
        (self.input.b, self.forget.b)
    }

    /// Explicit zero `(h, c)`.
    pub fn zero_state(&self, tape: &mut Tape) -> LstmState {
        LstmState {
            h: tape.zeros(self.hidden_dim, 1),
            c: tape.zeros(self.hidden_dim, 1),
        }
    }

    /// One recurrence step. `None` stands for the zero initial state and
    /// skips the terms that would multiply it.
    pub fn step(
        &self,
        tape: &mut Tape,
        prev: Option<&LstmState>,
        x: Var,
    ) -> Result<LstmState, TensorError> {
        expect_dim("lstm_step", tape, x, self.input_dim)?;
        let h_prev = prev.map(|s| s.h);

        let i = self.input.preactivation(tape, x, h_prev)?;
        let i = tape.logistic(i)?;
        let f = self.forget.preactivation(tape, x, h_prev)?;
        let f = tape.logistic(f)?;
        let o = self.output.preactivation(tape, x, h_prev)?;
        let o = tape.logistic(o)?;
        let g = self.candidate.preactivation(tape, x, h_prev)?;
        let g = tape.tanh(g)?;

        let mut c = tape.mul(i, g)?;
        if let Some(prev) = prev {
            let kept = tape.mul(f, prev.c)?;
            c = tape.add(kept, c)?;
        }
        let squashed = tape.tanh(c)?;
        let h = tape.mul(o, squashed)?;
        Ok(LstmState { h, c })
    }

    /// Runs the cell over `inputs` from the zero state, returning every state.
    pub fn run(&self, tape: &mut Tape, inputs: &[Var]) -> Result<Vec<LstmState>, TensorError> {
        let mut states: Vec<LstmState> = Vec::with_capacity(inputs.len());
        for &x in inputs {
            let next = self.step(tape, states.last(), x)?;
            states.push(next);
        }
        Ok(states)
    }
}

/// Stacked bidirectional LSTM; layer `k` reads the concatenated outputs of
/// layer `k - 1`.
#[derive(Debug, Clone)]
pub struct BiLstm {
    layers: Vec<(LstmCell, LstmCell)>,
}

/// Top-layer outputs of a [`BiLstm`] run.
#[derive(Debug, Clone)]
pub struct BiLstmOutput {
    /// `forward[i]`: forward hidden state after reading inputs `0..=i`.
    pub forward: Vec<Var>,
    /// `backward[i]`: backward hidden state after reading inputs `n-1..=i`.
    pub backward: Vec<Var>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BiLstmError {
    #[error("bidirectional LSTM needs at least one input")]
    EmptyInput,
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

impl BiLstm {
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        name: &str,
        input_dim: usize,
        hidden_dim: usize,
        layers: usize,
        rng: &mut R,
    ) -> Result<Self, TensorError> {
        let mut stack = Vec::with_capacity(layers);
        let mut dim = input_dim;
        for layer in 0..layers {
            let fwd = LstmCell::new(store, &format!("{name}/l{layer}/fwd"), dim, hidden_dim, rng)?;
            let bwd = LstmCell::new(store, &format!("{name}/l{layer}/bwd"), dim, hidden_dim, rng)?;
            stack.push((fwd, bwd));
            dim = 2 * hidden_dim;
        }
        Ok(BiLstm { layers: stack })
    }

    /// Builds a stack from existing cells (e.g. with shared weights).
    pub fn from_cells(layers: Vec<(LstmCell, LstmCell)>) -> Self {
        BiLstm { layers }
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn output_dim(&self) -> usize {
        self.layers
            .last()
            .map(|(f, b)| f.hidden_dim() + b.hidden_dim())
            .unwrap_or(0)
    }

    pub fn run_directions(
        &self,
        tape: &mut Tape,
        inputs: &[Var],
    ) -> Result<BiLstmOutput, BiLstmError> {
        if inputs.is_empty() {
            return Err(BiLstmError::EmptyInput);
        }
        let mut current: Vec<Var> = inputs.to_vec();
        let mut out = BiLstmOutput {
            forward: Vec::new(),
            backward: Vec::new(),
        };
        for (layer, (fwd, bwd)) in self.layers.iter().enumerate() {
            let forward: Vec<Var> = fwd.run(tape, &current)?.into_iter().map(|s| s.h).collect();
            let reversed: Vec<Var> = current.iter().rev().copied().collect();
            let mut backward: Vec<Var> = bwd.run(tape, &reversed)?.into_iter().map(|s| s.h).collect();
            backward.reverse();

            if layer + 1 < self.layers.len() {
                current = forward
                    .iter()
                    .zip(&backward)
                    .map(|(&f, &b)| tape.concat(&[f, b]))
                    .collect::<Result<_, _>>()?;
            }
            out = BiLstmOutput { forward, backward };
        }
        Ok(out)
    }

    /// `output[i] = concat(forward_i, backward_i)` of the top layer.
    pub fn run(&self, tape: &mut Tape, inputs: &[Var]) -> Result<Vec<Var>, BiLstmError> {
        let out = self.run_directions(tape, inputs)?;
        Ok(out
            .forward
            .iter()
            .zip(&out.backward)
            .map(|(&f, &b)| tape.concat(&[f, b]))
            .collect::<Result<_, _>>()?)
    }

    /// Concatenation of the final forward and final backward states.
    pub fn summarize(&self, tape: &mut Tape, inputs: &[Var]) -> Result<Var, BiLstmError> {
        let out = self.run_directions(tape, inputs)?;
        let last = *out.forward.last().expect("non-empty");
        let first = out.backward[0];
        Ok(tape.concat(&[last, first])?)
    }
}

/// Feed-forward network with tanh hidden layers and a linear output layer.
#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<Linear>,
}

impl Mlp {
    /// `dims = [input, hidden..., output]`.
    pub fn new<R: Rng>(
        store: &mut ParameterStore,
        name: &str,
        dims: &[usize],
        rng: &mut R,
    ) -> Result<Self, TensorError> {
        assert!(dims.len() >= 2, "an MLP needs input and output sizes");
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(k, w)| Linear::new(store, &format!("{name}/l{k}"), w[0], w[1], rng))
            .collect::<Result<_, _>>()?;
        Ok(Mlp { layers })
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").output_dim()
    }

    pub fn apply(&self, tape: &mut Tape, x: Var) -> Result<Var, TensorError> {
        let mut h = x;
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            h = layer.apply(tape, h)?;
            if k < last {
                h = tape.tanh(h)?;
            }
        }
        Ok(h)
    }
}
