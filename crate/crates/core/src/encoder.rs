//! Stacked bidirectional LSTM encoder with a linear emission layer.
//!
//! Gate order inside the stacked `4h` blocks is input, forget,
//! cell-candidate, output. `c_t = f * c_{t-1} + i * g` and
//! `h_t = o * tanh(c_t)`, with sigmoid `i, f, o` and tanh `g`.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::params::{ParamSet, Tensor};
use crate::scalar::{sigmoid, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Weights of one LSTM direction.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmDirection<T> {
    /// `4h × d_in`
    pub w: Array2<T>,
    /// `4h × h`
    pub u: Array2<T>,
    /// `4h`
    pub b: Array1<T>,
}

impl<T: Scalar> LstmDirection<T> {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        LstmDirection {
            w: Array2::zeros((4 * hidden, input_dim)),
            u: Array2::zeros((4 * hidden, hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    /// Uniform `(-1/sqrt(h), 1/sqrt(h))` weights with the forget-gate bias raised by one.
    pub fn random(input_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut draw = || T::of(rng.gen_range(-bound..bound));
        let w = Array2::from_shape_simple_fn((4 * hidden, input_dim), &mut draw);
        let u = Array2::from_shape_simple_fn((4 * hidden, hidden), &mut draw);
        let mut b = Array1::from_shape_simple_fn(4 * hidden, &mut draw);
        b.slice_mut(s![hidden..2 * hidden]).mapv_inplace(|x| x + T::one());
        LstmDirection { w, u, b }
    }

    pub fn hidden(&self) -> usize {
        self.u.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    fn check(&self) -> Result<()> {
        let h = self.hidden();
        if self.u.nrows() != 4 * h || self.w.nrows() != 4 * h || self.b.len() != 4 * h {
            return Err(Error::ShapeMismatch(format!(
                "LSTM direction with hidden size {h} has W {:?}, U {:?}, b {}",
                self.w.dim(),
                self.u.dim(),
                self.b.len()
            )));
        }
        Ok(())
    }

    /// One recurrence step.
    pub fn step(
        &self,
        x: ArrayView1<'_, T>,
        h_prev: ArrayView1<'_, T>,
        c_prev: ArrayView1<'_, T>,
    ) -> Result<(Array1<T>, Array1<T>)> {
        self.check()?;
        let h = self.hidden();
        if x.len() != self.input_dim() || h_prev.len() != h || c_prev.len() != h {
            return Err(Error::ShapeMismatch(format!(
                "step expects x[{}], h[{h}], c[{h}]; got x[{}], h[{}], c[{}]",
                self.input_dim(),
                x.len(),
                h_prev.len(),
                c_prev.len()
            )));
        }
        let z = self.w.dot(&x) + self.u.dot(&h_prev) + &self.b;
        let mut h_out = Array1::zeros(h);
        let mut c_out = Array1::zeros(h);
        for k in 0..h {
            let i = sigmoid(z[k]);
            let f = sigmoid(z[h + k]);
            let g = z[2 * h + k].tanh();
            let o = sigmoid(z[3 * h + k]);
            c_out[k] = f * c_prev[k] + i * g;
            h_out[k] = o * c_out[k].tanh();
        }
        Ok((h_out, c_out))
    }
}

/// Activations of one direction over a sequence, stored by time index.
#[derive(Clone, Debug)]
pub(crate) struct DirectionCache<T> {
    reverse: bool,
    /// Post-nonlinearity gates, `T × 4h`.
    gates: Array2<T>,
    h_prev: Array2<T>,
    c_prev: Array2<T>,
    tanh_c: Array2<T>,
    out: Array2<T>,
}

fn time_order(len: usize, reverse: bool) -> Box<dyn Iterator<Item = usize>> {
    if reverse {
        Box::new((0..len).rev())
    } else {
        Box::new(0..len)
    }
}

pub(crate) fn run_direction<T: Scalar>(
    p: &LstmDirection<T>,
    x: ArrayView2<'_, T>,
    reverse: bool,
) -> DirectionCache<T> {
    let len = x.nrows();
    let h = p.hidden();
    let mut pre = Array2::<T>::zeros((len, 4 * h));
    general_mat_mul(T::one(), &x, &p.w.t(), T::zero(), &mut pre);
    pre += &p.b;

    let mut cache = DirectionCache {
        reverse,
        gates: Array2::zeros((len, 4 * h)),
        h_prev: Array2::zeros((len, h)),
        c_prev: Array2::zeros((len, h)),
        tanh_c: Array2::zeros((len, h)),
        out: Array2::zeros((len, h)),
    };
    let mut h_state = Array1::<T>::zeros(h);
    let mut c_state = Array1::<T>::zeros(h);
    let mut z = Array1::<T>::zeros(4 * h);
    for t in time_order(len, reverse) {
        z.assign(&pre.row(t));
        general_mat_mul_vec(&p.u, &h_state, &mut z);
        cache.h_prev.row_mut(t).assign(&h_state);
        cache.c_prev.row_mut(t).assign(&c_state);
        let mut gates = cache.gates.row_mut(t);
        for k in 0..h {
            let i = sigmoid(z[k]);
            let f = sigmoid(z[h + k]);
            let g = z[2 * h + k].tanh();
            let o = sigmoid(z[3 * h + k]);
            gates[k] = i;
            gates[h + k] = f;
            gates[2 * h + k] = g;
            gates[3 * h + k] = o;
            let c = f * c_state[k] + i * g;
            let tc = c.tanh();
            c_state[k] = c;
            h_state[k] = o * tc;
            cache.tanh_c[[t, k]] = tc;
        }
        cache.out.row_mut(t).assign(&h_state);
    }
    cache
}

/// `y += a · x`
fn general_mat_mul_vec<T: Scalar>(a: &Array2<T>, x: &Array1<T>, y: &mut Array1<T>) {
    ndarray::linalg::general_mat_vec_mul(T::one(), a, x, T::one(), y);
}

/// Accumulates parameter gradients into `grad` and returns `dL/dx`.
pub(crate) fn direction_backward<T: Scalar>(
    p: &LstmDirection<T>,
    cache: &DirectionCache<T>,
    x: ArrayView2<'_, T>,
    d_out: ArrayView2<'_, T>,
    grad: &mut LstmDirection<T>,
) -> Array2<T> {
    let len = x.nrows();
    let h = p.hidden();
    let one = T::one();
    let mut dz = Array2::<T>::zeros((len, 4 * h));
    let mut dh_next = Array1::<T>::zeros(h);
    let mut dc_next = Array1::<T>::zeros(h);
    for t in time_order(len, !cache.reverse) {
        let gates = cache.gates.row(t);
        let mut dz_t = dz.row_mut(t);
        for k in 0..h {
            let (i, f, g, o) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
            let tc = cache.tanh_c[[t, k]];
            let dh = d_out[[t, k]] + dh_next[k];
            let d_o = dh * tc;
            let dc = dh * o * (one - tc * tc) + dc_next[k];
            let d_f = dc * cache.c_prev[[t, k]];
            let d_i = dc * g;
            let d_g = dc * i;
            dc_next[k] = dc * f;
            dz_t[k] = d_i * i * (one - i);
            dz_t[h + k] = d_f * f * (one - f);
            dz_t[2 * h + k] = d_g * (one - g * g);
            dz_t[3 * h + k] = d_o * o * (one - o);
        }
        dh_next.fill(T::zero());
        ndarray::linalg::general_mat_vec_mul(one, &p.u.t(), &dz.row(t), T::zero(), &mut dh_next);
    }
    general_mat_mul(one, &dz.t(), &x, one, &mut grad.w);
    general_mat_mul(one, &dz.t(), &cache.h_prev, one, &mut grad.u);
    grad.b += &dz.sum_axis(Axis(0));
    let mut dx = Array2::<T>::zeros((len, p.input_dim()));
    general_mat_mul(one, &dz, &p.w, T::zero(), &mut dx);
    dx
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiLstmLayer<T> {
    pub forward: LstmDirection<T>,
    pub backward: LstmDirection<T>,
}

impl<T: Scalar> BiLstmLayer<T> {
    pub fn direction(&self, direction: Direction) -> &LstmDirection<T> {
        match direction {
            Direction::Forward => &self.forward,
            Direction::Backward => &self.backward,
        }
    }

    /// Single step of the chosen direction.
    pub fn step(
        &self,
        direction: Direction,
        x: ArrayView1<'_, T>,
        h_prev: ArrayView1<'_, T>,
        c_prev: ArrayView1<'_, T>,
    ) -> Result<(Array1<T>, Array1<T>)> {
        self.direction(direction).step(x, h_prev, c_prev)
    }

    pub fn input_dim(&self) -> usize {
        self.forward.input_dim()
    }

    /// Concatenated `[h_fwd; h_bwd]` width.
    pub fn output_dim(&self) -> usize {
        self.forward.hidden() + self.backward.hidden()
    }
}

/// BiLSTM stack plus projection to per-label emission scores.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams<T> {
    pub layers: Vec<BiLstmLayer<T>>,
    /// `labels × last_output_dim`
    pub proj_w: Array2<T>,
    pub proj_b: Array1<T>,
}

/// Everything the backward pass needs from a forward pass.
#[derive(Clone, Debug)]
pub struct EncoderCache<T> {
    layer_inputs: Vec<Array2<T>>,
    directions: Vec<(DirectionCache<T>, DirectionCache<T>)>,
    hidden: Array2<T>,
}

impl<T> EncoderCache<T> {
    /// Final BiLSTM output, `T × last_output_dim`.
    pub fn hidden(&self) -> &Array2<T> {
        &self.hidden
    }
}

impl<T: Scalar> EncoderParams<T> {
    /// `layer_outputs` are the concatenated (two-direction) widths, each even.
    pub fn zeros(input_dim: usize, layer_outputs: &[usize], labels: usize) -> Result<Self> {
        Self::build(input_dim, layer_outputs, labels, |d, h| {
            (LstmDirection::zeros(d, h), LstmDirection::zeros(d, h))
        })
        .map(|mut p| {
            p.proj_w.fill(T::zero());
            p
        })
    }

    pub fn random(
        input_dim: usize,
        layer_outputs: &[usize],
        labels: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let mut p = Self::build(input_dim, layer_outputs, labels, |d, h| {
            (LstmDirection::random(d, h, rng), LstmDirection::random(d, h, rng))
        })?;
        let fan_in = p.proj_w.ncols();
        let bound = 1.0 / (fan_in as f64).sqrt();
        p.proj_w
            .mapv_inplace(|_| T::of(rng.gen_range(-bound..bound)));
        Ok(p)
    }

    fn build(
        input_dim: usize,
        layer_outputs: &[usize],
        labels: usize,
        mut make: impl FnMut(usize, usize) -> (LstmDirection<T>, LstmDirection<T>),
    ) -> Result<Self> {
        if layer_outputs.is_empty() {
            return Err(Error::InvalidConfig("encoder needs at least one layer".into()));
        }
        let mut layers = Vec::with_capacity(layer_outputs.len());
        let mut d = input_dim;
        for &out in layer_outputs {
            if out == 0 || out % 2 != 0 {
                return Err(Error::InvalidConfig(format!(
                    "layer output size {out} must be a positive even number"
                )));
            }
            let (forward, backward) = make(d, out / 2);
            layers.push(BiLstmLayer { forward, backward });
            d = out;
        }
        Ok(EncoderParams {
            layers,
            proj_w: Array2::zeros((labels, d)),
            proj_b: Array1::zeros(labels),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.output_dim()).unwrap_or(0)
    }

    pub fn label_count(&self) -> usize {
        self.proj_w.nrows()
    }

    pub fn layer_output_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.output_dim()).collect()
    }

    fn check_shapes(&self) -> Result<()> {
        let mut d = self.input_dim();
        for (k, layer) in self.layers.iter().enumerate() {
            for dir in [&layer.forward, &layer.backward] {
                dir.check()?;
                if dir.input_dim() != d {
                    return Err(Error::ShapeMismatch(format!(
                        "layer {k} expects input width {}, previous layer gives {d}",
                        dir.input_dim()
                    )));
                }
            }
            d = layer.output_dim();
        }
        if self.proj_w.ncols() != d || self.proj_b.len() != self.proj_w.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "projection {:?} + bias {} does not fit encoder output {d}",
                self.proj_w.dim(),
                self.proj_b.len()
            )));
        }
        Ok(())
    }

    /// Runs the BiLSTM stack. Returns the last layer's output and the cache.
    pub fn bilstm_forward(&self, x: ArrayView2<'_, T>) -> Result<(Array2<T>, EncoderCache<T>)> {
        self.check_shapes()?;
        if x.nrows() == 0 {
            return Err(Error::EmptySequence);
        }
        if x.ncols() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "input width {} but encoder expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        let mut layer_inputs = Vec::with_capacity(self.layers.len());
        let mut directions = Vec::with_capacity(self.layers.len());
        let mut input = x.to_owned();
        for layer in &self.layers {
            let fwd = run_direction(&layer.forward, input.view(), false);
            let bwd = run_direction(&layer.backward, input.view(), true);
            let out = ndarray::concatenate(Axis(1), &[fwd.out.view(), bwd.out.view()])
                .expect("equal row counts");
            layer_inputs.push(std::mem::replace(&mut input, out));
            directions.push((fwd, bwd));
        }
        let hidden = input;
        Ok((
            hidden.clone(),
            EncoderCache {
                layer_inputs,
                directions,
                hidden,
            },
        ))
    }

    /// BiLSTM followed by the emission projection.
    pub fn forward(&self, x: ArrayView2<'_, T>) -> Result<(Array2<T>, EncoderCache<T>)> {
        let (hidden, cache) = self.bilstm_forward(x)?;
        let emissions = project(hidden.view(), self.proj_w.view(), self.proj_b.view())?;
        Ok((emissions, cache))
    }

    /// Exact gradients of a loss given `dL/d_emissions`.
    ///
    /// Returns parameter gradients (same layout as `self`) and `dL/dx`.
    pub fn backward(
        &self,
        cache: &EncoderCache<T>,
        d_emissions: ArrayView2<'_, T>,
    ) -> Result<(EncoderParams<T>, Array2<T>)> {
        let len = cache.hidden.nrows();
        if cache.directions.len() != self.layers.len()
            || cache.hidden.ncols() != self.output_dim()
            || cache.layer_inputs.first().map(|x| x.ncols()) != Some(self.input_dim())
        {
            return Err(Error::CacheMismatch(format!(
                "cache has {} layers with output width {}",
                cache.directions.len(),
                cache.hidden.ncols()
            )));
        }
        if d_emissions.dim() != (len, self.label_count()) {
            return Err(Error::ShapeMismatch(format!(
                "upstream gradient {:?}, expected ({len}, {})",
                d_emissions.dim(),
                self.label_count()
            )));
        }

        let mut grad = EncoderParams::zeros(
            self.input_dim(),
            &self.layer_output_sizes(),
            self.label_count(),
        )?;
        general_mat_mul(
            T::one(),
            &d_emissions.t(),
            &cache.hidden,
            T::zero(),
            &mut grad.proj_w,
        );
        grad.proj_b = d_emissions.sum_axis(Axis(0));

        let mut d_hidden = d_emissions.dot(&self.proj_w);
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let (fwd_cache, bwd_cache) = &cache.directions[k];
            let input = cache.layer_inputs[k].view();
            let hf = layer.forward.hidden();
            let g = &mut grad.layers[k];
            let dx_f = direction_backward(
                &layer.forward,
                fwd_cache,
                input,
                d_hidden.slice(s![.., ..hf]),
                &mut g.forward,
            );
            let dx_b = direction_backward(
                &layer.backward,
                bwd_cache,
                input,
                d_hidden.slice(s![.., hf..]),
                &mut g.backward,
            );
            d_hidden = dx_f + dx_b;
        }
        Ok((grad, d_hidden))
    }
}

/// `emissions[t] = w · hidden[t] + b`
pub fn project<T: Scalar>(
    hidden: ArrayView2<'_, T>,
    w: ArrayView2<'_, T>,
    b: ArrayView1<'_, T>,
) -> Result<Array2<T>> {
    if hidden.ncols() != w.ncols() || w.nrows() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "projection {:?} with bias {} applied to width {}",
            w.dim(),
            b.len(),
            hidden.ncols()
        )));
    }
    Ok(hidden.dot(&w.t()) + b)
}

impl<T: Scalar> ParamSet<T> for EncoderParams<T> {
    fn tensors(&self) -> Vec<Tensor<'_, T>> {
        let mut out = Vec::new();
        for (k, layer) in self.layers.iter().enumerate() {
            for (name, dir) in [("fwd", &layer.forward), ("bwd", &layer.backward)] {
                out.push(Tensor::new(format!("lstm{k}.{name}.w"), &dir.w));
                out.push(Tensor::new(format!("lstm{k}.{name}.u"), &dir.u));
                out.push(Tensor::new(format!("lstm{k}.{name}.b"), &dir.b));
            }
        }
        out.push(Tensor::new("proj.w".to_string(), &self.proj_w));
        out.push(Tensor::new("proj.b".to_string(), &self.proj_b));
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        for layer in &mut self.layers {
            for dir in [&mut layer.forward, &mut layer.backward] {
                out.push(dir.w.as_slice_mut().expect("standard layout"));
                out.push(dir.u.as_slice_mut().expect("standard layout"));
                out.push(dir.b.as_slice_mut().expect("standard layout"));
            }
        }
        out.push(self.proj_w.as_slice_mut().expect("standard layout"));
        out.push(self.proj_b.as_slice_mut().expect("standard layout"));
        out
    }
}
