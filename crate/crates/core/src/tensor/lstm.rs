use rand::Rng;

use super::{Result, Tape, Tensor, TensorError, Var};

/// Weights of a single LSTM cell. Gate blocks are laid out as
/// `[input | forget | candidate | output]` along the columns.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub w_input: Tensor,
    pub w_hidden: Tensor,
    pub bias: Tensor,
}

impl LstmParams {
    pub fn glorot<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        Self {
            w_input: Tensor::glorot(input_dim, 4 * hidden_dim, rng),
            w_hidden: Tensor::glorot(hidden_dim, 4 * hidden_dim, rng),
            bias: Tensor::zeros(1, 4 * hidden_dim),
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            w_input: Tensor::zeros(input_dim, 4 * hidden_dim),
            w_hidden: Tensor::zeros(hidden_dim, 4 * hidden_dim),
            bias: Tensor::zeros(1, 4 * hidden_dim),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_hidden.rows()
    }

    pub fn record(&self, tape: &mut Tape) -> LstmVars {
        LstmVars {
            w_input: tape.leaf(self.w_input.clone()),
            w_hidden: tape.leaf(self.w_hidden.clone()),
            bias: tape.leaf(self.bias.clone()),
            hidden_dim: self.hidden_dim(),
        }
    }
}

/// LSTM weights recorded on a tape.
#[derive(Clone, Copy, Debug)]
pub struct LstmVars {
    pub w_input: Var,
    pub w_hidden: Var,
    pub bias: Var,
    pub hidden_dim: usize,
}

/// One step of the gated recurrence over a batch of rows.
pub fn lstm_cell(
    tape: &mut Tape,
    x: Var,
    h_prev: Var,
    c_prev: Var,
    p: &LstmVars,
) -> Result<(Var, Var)> {
    let hd = p.hidden_dim;
    let xi = tape.matmul(x, p.w_input)?;
    let hh = tape.matmul(h_prev, p.w_hidden)?;
    let pre = tape.add(xi, hh)?;
    let pre = tape.add_row(pre, p.bias)?;
    let i = tape.slice_cols(pre, 0, hd)?;
    let f = tape.slice_cols(pre, hd, hd)?;
    let g = tape.slice_cols(pre, 2 * hd, hd)?;
    let o = tape.slice_cols(pre, 3 * hd, hd)?;
    let i = tape.sigmoid(i);
    let f = tape.sigmoid(f);
    let g = tape.tanh(g);
    let o = tape.sigmoid(o);
    let keep = tape.mul(f, c_prev)?;
    let write = tape.mul(i, g)?;
    let c = tape.add(keep, write)?;
    let tc = tape.tanh(c);
    let h = tape.mul(o, tc)?;
    Ok((h, c))
}

/// Folds the cell over `sequence` left to right from a zero state and returns
/// the final hidden state.
pub fn lstm_sequence(tape: &mut Tape, sequence: &[Var], p: &LstmVars) -> Result<Var> {
    let first = *sequence.first().ok_or(TensorError::EmptySequence)?;
    let rows = tape.shape(first)[0];
    let mut h = tape.leaf(Tensor::zeros(rows, p.hidden_dim));
    let mut c = tape.leaf(Tensor::zeros(rows, p.hidden_dim));
    for &x in sequence {
        (h, c) = lstm_cell(tape, x, h, c, p)?;
    }
    Ok(h)
}
