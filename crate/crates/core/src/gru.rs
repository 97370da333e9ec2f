//! One-layer sequence-to-sequence GRU forecaster.
//!
//! The encoder reads the input window one value per step. The decoder
//! starts from the encoder's final state and the last observed value, then
//! feeds each of its own predictions back as the next input.
//!
//! Gate layout follows the usual `[reset | update | candidate]` column
//! blocks:
//!
//! ```text
//! r  = σ(x·Wi_r + bi_r + h·Wh_r + bh_r)
//! z  = σ(x·Wi_z + bi_z + h·Wh_z + bh_z)
//! n  = tanh(x·Wi_n + bi_n + r ⊙ (h·Wh_n + bh_n))
//! h' = n + z ⊙ (h − n)
//! ```

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::series::Series;
use crate::tape::{Gradients, Matrix, NodeId, Tape};

/// Parameters of one GRU cell with scalar input.
#[derive(Debug, Clone, PartialEq)]
pub struct CellParams {
    /// `1 × 3H`
    pub w_input: Matrix,
    /// `H × 3H`
    pub w_hidden: Matrix,
    /// `1 × 3H`
    pub b_input: Matrix,
    /// `1 × 3H`
    pub b_hidden: Matrix,
}

impl CellParams {
    fn init(hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut u = |rows, cols| uniform(rows, cols, hidden, rng);
        Self {
            w_input: u(1, 3 * hidden),
            w_hidden: u(hidden, 3 * hidden),
            b_input: u(1, 3 * hidden),
            b_hidden: u(1, 3 * hidden),
        }
    }
}

fn uniform(rows: usize, cols: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let bound = 1.0 / libm::sqrt(hidden as f64);
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruForecaster {
    hidden: usize,
    pub encoder: CellParams,
    pub decoder: CellParams,
    /// `H × 1`
    pub out_weight: Matrix,
    /// `1 × 1`
    pub out_bias: Matrix,
}

/// Number of parameter blocks, in declaration order.
pub const PARAM_BLOCKS: usize = 10;

/// Tape handles of every parameter, in declaration order.
struct ParamNodes([NodeId; PARAM_BLOCKS]);

impl GruForecaster {
    /// Uniform `±1/√hidden` initialization from `seed`.
    pub fn new(hidden: usize, seed: u64) -> Result<Self> {
        if hidden == 0 {
            return Err(invalid("hidden size must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = CellParams::init(hidden, &mut rng);
        let decoder = CellParams::init(hidden, &mut rng);
        let out_weight = uniform(hidden, 1, hidden, &mut rng);
        let out_bias = uniform(1, 1, hidden, &mut rng);
        Ok(Self {
            hidden,
            encoder,
            decoder,
            out_weight,
            out_bias,
        })
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    /// Expected `(rows, cols)` of each parameter block for a hidden size.
    pub fn block_shapes(hidden: usize) -> [(usize, usize); PARAM_BLOCKS] {
        let g = 3 * hidden;
        let cell = [(1, g), (hidden, g), (1, g), (1, g)];
        [
            cell[0], cell[1], cell[2], cell[3], cell[0], cell[1], cell[2], cell[3],
            (hidden, 1),
            (1, 1),
        ]
    }

    /// Parameter blocks in declaration order: encoder (input weights,
    /// hidden weights, input bias, hidden bias), decoder (same), output
    /// weights, output bias.
    pub fn params(&self) -> [&Matrix; PARAM_BLOCKS] {
        [
            &self.encoder.w_input,
            &self.encoder.w_hidden,
            &self.encoder.b_input,
            &self.encoder.b_hidden,
            &self.decoder.w_input,
            &self.decoder.w_hidden,
            &self.decoder.b_input,
            &self.decoder.b_hidden,
            &self.out_weight,
            &self.out_bias,
        ]
    }

    pub fn params_mut(&mut self) -> [&mut Matrix; PARAM_BLOCKS] {
        [
            &mut self.encoder.w_input,
            &mut self.encoder.w_hidden,
            &mut self.encoder.b_input,
            &mut self.encoder.b_hidden,
            &mut self.decoder.w_input,
            &mut self.decoder.w_hidden,
            &mut self.decoder.b_input,
            &mut self.decoder.b_hidden,
            &mut self.out_weight,
            &mut self.out_bias,
        ]
    }

    /// Rebuilds a model from blocks in declaration order.
    pub fn from_params(hidden: usize, blocks: Vec<Matrix>) -> Result<Self> {
        if hidden == 0 {
            return Err(invalid("hidden size must be positive"));
        }
        let shapes = Self::block_shapes(hidden);
        if blocks.len() != PARAM_BLOCKS || blocks.iter().zip(shapes).any(|(b, s)| b.shape() != s) {
            return Err(invalid("parameter blocks do not match the hidden size"));
        }
        let mut it = blocks.into_iter();
        let mut next = || it.next().expect("length checked above");
        Ok(Self {
            hidden,
            encoder: CellParams {
                w_input: next(),
                w_hidden: next(),
                b_input: next(),
                b_hidden: next(),
            },
            decoder: CellParams {
                w_input: next(),
                w_hidden: next(),
                b_input: next(),
                b_hidden: next(),
            },
            out_weight: next(),
            out_bias: next(),
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|p| p.as_slice().len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.is_finite())
    }

    fn load(&self, tape: &mut Tape) -> ParamNodes {
        let params = self.params();
        ParamNodes(core::array::from_fn(|i| tape.leaf(params[i].clone())))
    }

    fn cell_step(&self, tape: &mut Tape, cell: &[NodeId], x: NodeId, h: NodeId) -> NodeId {
        let hs = self.hidden;
        let xi = tape.matmul(x, cell[0]);
        let gi = tape.add_row(xi, cell[2]);
        let hh = tape.matmul(h, cell[1]);
        let gh = tape.add_row(hh, cell[3]);
        let gate = |tape: &mut Tape, block: usize| {
            let a = tape.slice(gi, block * hs, (block + 1) * hs);
            let b = tape.slice(gh, block * hs, (block + 1) * hs);
            (a, b)
        };
        let (ir, hr) = gate(tape, 0);
        let r_in = tape.add(ir, hr);
        let r = tape.sigmoid(r_in);
        let (iz, hz) = gate(tape, 1);
        let z_in = tape.add(iz, hz);
        let z = tape.sigmoid(z_in);
        let (inn, hn) = gate(tape, 2);
        let gated = tape.mul(r, hn);
        let n_in = tape.add(inn, gated);
        let n = tape.tanh(n_in);
        let diff = tape.sub(h, n);
        let keep = tape.mul(z, diff);
        tape.add(n, keep)
    }

    /// Records a batched forward pass. Returns the parameter handles and the
    /// `batch × horizon` prediction node.
    fn record(&self, tape: &mut Tape, inputs: &[&[f64]], horizon: usize) -> Result<(ParamNodes, NodeId)> {
        let batch = inputs.len();
        let n = inputs.first().map_or(0, |x| x.len());
        if batch == 0 || n == 0 || horizon == 0 {
            return Err(invalid("forward needs a non-empty batch, input and horizon"));
        }
        if inputs.iter().any(|x| x.len() != n) {
            return Err(invalid("all inputs in a batch must share a length"));
        }
        let p = self.load(tape);
        let mut h = tape.leaf(Matrix::zeros(batch, self.hidden));
        for t in 0..n {
            let col: Vec<f64> = inputs.iter().map(|x| x[t]).collect();
            let x = tape.leaf(Matrix::column(&col));
            h = self.cell_step(tape, &p.0[0..4], x, h);
        }
        let last: Vec<f64> = inputs.iter().map(|x| x[n - 1]).collect();
        let mut x = tape.leaf(Matrix::column(&last));
        let mut outputs = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            h = self.cell_step(tape, &p.0[4..8], x, h);
            let proj = tape.matmul(h, p.0[8]);
            let y = tape.add_row(proj, p.0[9]);
            outputs.push(y);
            x = y;
        }
        let preds = tape.concat(&outputs);
        if !tape.value(preds).is_finite() {
            return Err(Error::NumericDivergence(format!(
                "non-finite forecast from a batch of {batch}"
            )));
        }
        Ok((p, preds))
    }

    /// Forecasts `horizon` steps for every input in the batch.
    pub fn forecast_batch(&self, inputs: &[&[f64]], horizon: usize) -> Result<Vec<Vec<f64>>> {
        let mut tape = Tape::new();
        let (_, preds) = self.record(&mut tape, inputs, horizon)?;
        let m = tape.value(preds);
        Ok((0..m.rows()).map(|r| m.row(r).to_vec()).collect())
    }

    pub fn forward(&self, input: &Series, horizon: usize) -> Result<Series> {
        let mut out = self.forecast_batch(&[input.as_slice()], horizon)?;
        Series::new(out.pop().expect("batch of one"))
    }

    /// Forward pass plus gradients. `grad_fn` receives the `batch × horizon`
    /// forecasts and returns the gradient of the objective with respect to
    /// them (same layout) together with any value it wants passed through.
    pub fn backprop<T>(
        &self,
        inputs: &[&[f64]],
        horizon: usize,
        grad_fn: impl FnOnce(&Matrix) -> Result<(T, Matrix)>,
    ) -> Result<(T, Vec<Matrix>)> {
        let mut tape = Tape::new();
        let (p, preds) = self.record(&mut tape, inputs, horizon)?;
        let (out, seed) = grad_fn(tape.value(preds))?;
        let mut grads: Gradients = tape.backward(&[(preds, seed)]);
        let blocks = p
            .0
            .iter()
            .zip(self.params())
            .map(|(id, param)| grads.take(*id).unwrap_or_else(|| Matrix::zeros(param.rows(), param.cols())))
            .collect();
        Ok((out, blocks))
    }
}
