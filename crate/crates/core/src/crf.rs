//! Linear-chain CRF over the five BILOU labels.
//!
//! A path `y` over emissions `e` scores
//! `start[y_0] + Σ_t e[t][y_t] + Σ_t trans[y_t][y_{t+1}] + stop[y_{T-1}]`.

use ndarray::{Array1, Array2, ArrayView2};

use crate::corpus::{Bilou, LABEL_COUNT};
use crate::error::{Error, Result};
use crate::params::{ParamSet, Tensor};
use crate::scalar::{log_sum_exp, Scalar};

/// Log-space stand-in for minus infinity on forbidden transitions.
pub const FORBIDDEN_SCORE: f64 = -1e4;

#[derive(Clone, Debug, PartialEq)]
pub struct CrfParams<T> {
    /// `transitions[[i, j]]` scores label `j` following label `i`.
    pub transitions: Array2<T>,
    pub start: Array1<T>,
    pub stop: Array1<T>,
}

impl<T: Scalar> Default for CrfParams<T> {
    fn default() -> Self {
        Self::zeros()
    }
}

impl<T: Scalar> CrfParams<T> {
    pub fn zeros() -> Self {
        CrfParams {
            transitions: Array2::zeros((LABEL_COUNT, LABEL_COUNT)),
            start: Array1::zeros(LABEL_COUNT),
            stop: Array1::zeros(LABEL_COUNT),
        }
    }

    /// Copy with [`FORBIDDEN_SCORE`] added wherever `mask` disallows.
    pub fn masked(&self, mask: &TransitionMask) -> Self {
        let pen = T::of(FORBIDDEN_SCORE);
        let mut out = self.clone();
        for i in 0..LABEL_COUNT {
            if !mask.start[i] {
                out.start[i] += pen;
            }
            if !mask.stop[i] {
                out.stop[i] += pen;
            }
            for j in 0..LABEL_COUNT {
                if !mask.allowed[i][j] {
                    out.transitions[[i, j]] += pen;
                }
            }
        }
        out
    }
}

impl<T: Scalar> ParamSet<T> for CrfParams<T> {
    fn tensors(&self) -> Vec<Tensor<'_, T>> {
        vec![
            Tensor::new("crf.transitions".into(), &self.transitions),
            Tensor::new("crf.start".into(), &self.start),
            Tensor::new("crf.stop".into(), &self.stop),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        vec![
            self.transitions.as_slice_mut().expect("standard layout"),
            self.start.as_slice_mut().expect("standard layout"),
            self.stop.as_slice_mut().expect("standard layout"),
        ]
    }
}

/// Which transitions, first labels and last labels a decoded path may use.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionMask {
    pub allowed: [[bool; LABEL_COUNT]; LABEL_COUNT],
    pub start: [bool; LABEL_COUNT],
    pub stop: [bool; LABEL_COUNT],
}

impl TransitionMask {
    pub fn unconstrained() -> Self {
        TransitionMask {
            allowed: [[true; LABEL_COUNT]; LABEL_COUNT],
            start: [true; LABEL_COUNT],
            stop: [true; LABEL_COUNT],
        }
    }

    /// Only structurally valid BILOU sequences.
    pub fn bilou() -> Self {
        use Bilou::*;
        let mut m = Self::unconstrained();
        let forbidden = [
            (O, I),
            (O, L),
            (B, B),
            (B, O),
            (B, U),
            (I, B),
            (I, O),
            (I, U),
            (U, I),
            (U, L),
            (L, I),
            (L, L),
        ];
        for (a, b) in forbidden {
            m.allowed[a.index()][b.index()] = false;
        }
        m.start[I.index()] = false;
        m.start[L.index()] = false;
        m.stop[B.index()] = false;
        m.stop[I.index()] = false;
        m
    }

    pub fn permits(&self, labels: &[Bilou]) -> bool {
        match (labels.first(), labels.last()) {
            (Some(f), Some(l)) => {
                self.start[f.index()]
                    && self.stop[l.index()]
                    && labels
                        .windows(2)
                        .all(|w| self.allowed[w[0].index()][w[1].index()])
            }
            _ => true,
        }
    }

    /// Whether some path of length `len` satisfies the mask.
    pub fn admits_length(&self, len: usize) -> bool {
        if len == 0 {
            return true;
        }
        let mut reach = self.start;
        for _ in 1..len {
            let mut next = [false; LABEL_COUNT];
            for (i, &r) in reach.iter().enumerate() {
                if r {
                    for j in 0..LABEL_COUNT {
                        next[j] |= self.allowed[i][j];
                    }
                }
            }
            reach = next;
        }
        reach.iter().zip(&self.stop).any(|(&r, &s)| r && s)
    }
}

fn check_emissions<T>(emissions: &ArrayView2<'_, T>) -> Result<usize> {
    if emissions.ncols() != LABEL_COUNT {
        return Err(Error::ShapeMismatch(format!(
            "emissions have {} columns, expected {LABEL_COUNT}",
            emissions.ncols()
        )));
    }
    if emissions.nrows() == 0 {
        return Err(Error::EmptySequence);
    }
    Ok(emissions.nrows())
}

pub fn score_path<T: Scalar>(
    emissions: ArrayView2<'_, T>,
    labels: &[Bilou],
    params: &CrfParams<T>,
) -> Result<T> {
    let len = check_emissions(&emissions)?;
    if labels.len() != len {
        return Err(Error::LengthMismatch {
            left: len,
            right: labels.len(),
        });
    }
    let mut score = params.start[labels[0].index()] + params.stop[labels[len - 1].index()];
    for (t, y) in labels.iter().enumerate() {
        score += emissions[[t, y.index()]];
    }
    for w in labels.windows(2) {
        score += params.transitions[[w[0].index(), w[1].index()]];
    }
    Ok(score)
}

fn forward_table<T: Scalar>(emissions: &ArrayView2<'_, T>, params: &CrfParams<T>) -> Array2<T> {
    let len = emissions.nrows();
    let mut alpha = Array2::<T>::zeros((len, LABEL_COUNT));
    for j in 0..LABEL_COUNT {
        alpha[[0, j]] = params.start[j] + emissions[[0, j]];
    }
    for t in 1..len {
        for j in 0..LABEL_COUNT {
            let prev = alpha.row(t - 1);
            let lse = log_sum_exp((0..LABEL_COUNT).map(|i| prev[i] + params.transitions[[i, j]]));
            alpha[[t, j]] = lse + emissions[[t, j]];
        }
    }
    alpha
}

fn backward_table<T: Scalar>(emissions: &ArrayView2<'_, T>, params: &CrfParams<T>) -> Array2<T> {
    let len = emissions.nrows();
    let mut beta = Array2::<T>::zeros((len, LABEL_COUNT));
    for i in 0..LABEL_COUNT {
        beta[[len - 1, i]] = params.stop[i];
    }
    for t in (0..len - 1).rev() {
        for i in 0..LABEL_COUNT {
            let lse = log_sum_exp(
                (0..LABEL_COUNT)
                    .map(|j| params.transitions[[i, j]] + emissions[[t + 1, j]] + beta[[t + 1, j]]),
            );
            beta[[t, i]] = lse;
        }
    }
    beta
}

/// Log of the sum of `exp(score)` over all `5^T` label paths.
pub fn log_partition<T: Scalar>(emissions: ArrayView2<'_, T>, params: &CrfParams<T>) -> Result<T> {
    let len = check_emissions(&emissions)?;
    let alpha = forward_table(&emissions, params);
    Ok(log_sum_exp(
        (0..LABEL_COUNT).map(|j| alpha[[len - 1, j]] + params.stop[j]),
    ))
}

/// Per-position label marginals, `T × 5`.
pub fn marginals<T: Scalar>(emissions: ArrayView2<'_, T>, params: &CrfParams<T>) -> Result<Array2<T>> {
    check_emissions(&emissions)?;
    let alpha = forward_table(&emissions, params);
    let beta = backward_table(&emissions, params);
    let log_z = log_sum_exp((0..LABEL_COUNT).map(|j| alpha[[0, j]] + beta[[0, j]]));
    Ok((alpha + beta).mapv(|v| (v - log_z).exp()))
}

/// Negative log-likelihood of `labels`.
pub fn nll<T: Scalar>(
    emissions: ArrayView2<'_, T>,
    labels: &[Bilou],
    params: &CrfParams<T>,
) -> Result<T> {
    let gold = score_path(emissions, labels, params)?;
    Ok(log_partition(emissions, params)? - gold)
}

#[derive(Clone, Debug)]
pub struct CrfGradients<T> {
    pub nll: T,
    pub d_emissions: Array2<T>,
    pub d_params: CrfParams<T>,
}

/// NLL together with its exact gradient, via forward-backward.
pub fn crf_backward<T: Scalar>(
    emissions: ArrayView2<'_, T>,
    labels: &[Bilou],
    params: &CrfParams<T>,
) -> Result<CrfGradients<T>> {
    let gold = score_path(emissions, labels, params)?;
    let len = emissions.nrows();
    let alpha = forward_table(&emissions, params);
    let beta = backward_table(&emissions, params);
    let log_z = log_sum_exp((0..LABEL_COUNT).map(|j| alpha[[len - 1, j]] + params.stop[j]));

    let mut d_emissions = (&alpha + &beta).mapv(|v| (v - log_z).exp());
    let mut d_params = CrfParams::zeros();
    for j in 0..LABEL_COUNT {
        d_params.start[j] = d_emissions[[0, j]];
        d_params.stop[j] = d_emissions[[len - 1, j]];
    }
    for t in 0..len - 1 {
        for i in 0..LABEL_COUNT {
            for j in 0..LABEL_COUNT {
                let log_xi = alpha[[t, i]]
                    + params.transitions[[i, j]]
                    + emissions[[t + 1, j]]
                    + beta[[t + 1, j]]
                    - log_z;
                d_params.transitions[[i, j]] += log_xi.exp();
            }
        }
    }
    for (t, y) in labels.iter().enumerate() {
        d_emissions[[t, y.index()]] -= T::one();
    }
    d_params.start[labels[0].index()] -= T::one();
    d_params.stop[labels[len - 1].index()] -= T::one();
    for w in labels.windows(2) {
        d_params.transitions[[w[0].index(), w[1].index()]] -= T::one();
    }
    Ok(CrfGradients {
        nll: log_z - gold,
        d_emissions,
        d_params,
    })
}

/// Highest-scoring path permitted by `mask`, with its score.
///
/// Forbidden moves are excluded outright. Ties go to the lowest label index.
pub fn viterbi<T: Scalar>(
    emissions: ArrayView2<'_, T>,
    params: &CrfParams<T>,
    mask: &TransitionMask,
) -> Result<(Vec<Bilou>, T)> {
    let len = check_emissions(&emissions)?;
    if !mask.admits_length(len) {
        return Err(Error::NoValidPath { len });
    }
    let neg_inf = T::neg_infinity();
    let mut best = Array2::<T>::from_elem((len, LABEL_COUNT), neg_inf);
    let mut back = Array2::<usize>::zeros((len, LABEL_COUNT));
    for j in 0..LABEL_COUNT {
        if mask.start[j] {
            best[[0, j]] = params.start[j] + emissions[[0, j]];
        }
    }
    for t in 1..len {
        for j in 0..LABEL_COUNT {
            let mut arg = 0;
            let mut max = neg_inf;
            for i in 0..LABEL_COUNT {
                if !mask.allowed[i][j] || best[[t - 1, i]] == neg_inf {
                    continue;
                }
                let s = best[[t - 1, i]] + params.transitions[[i, j]];
                if s > max {
                    max = s;
                    arg = i;
                }
            }
            if max > neg_inf {
                best[[t, j]] = max + emissions[[t, j]];
                back[[t, j]] = arg;
            }
        }
    }
    let mut last = 0;
    let mut max = neg_inf;
    for j in 0..LABEL_COUNT {
        if !mask.stop[j] || best[[len - 1, j]] == neg_inf {
            continue;
        }
        let s = best[[len - 1, j]] + params.stop[j];
        if s > max {
            max = s;
            last = j;
        }
    }
    if max == neg_inf {
        return Err(Error::NoValidPath { len });
    }
    let mut path = vec![0usize; len];
    path[len - 1] = last;
    for t in (1..len).rev() {
        path[t - 1] = back[[t, path[t]]];
    }
    let labels = path
        .into_iter()
        .map(|i| Bilou::from_index(i).expect("label index"))
        .collect();
    Ok((labels, max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use Bilou::*;

    #[test]
    fn score_single_token() {
        let e = array![[2.0, 0.0, 0.0, 0.0, 0.0]];
        let p = CrfParams::<f64>::zeros();
        assert_eq!(score_path(e.view(), &[B], &p).unwrap(), 2.0);
    }

    #[test]
    fn score_zero_everything() {
        let e = Array2::<f64>::zeros((3, 5));
        let p = CrfParams::zeros();
        assert_eq!(score_path(e.view(), &[U, O, B], &p).unwrap(), 0.0);
    }

    #[test]
    fn score_length_mismatch() {
        let e = Array2::<f64>::zeros((3, 5));
        assert!(matches!(
            score_path(e.view(), &[U, O], &CrfParams::zeros()),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn partition_of_zeros() {
        let e = Array2::<f64>::zeros((2, 5));
        let z = log_partition(e.view(), &CrfParams::zeros()).unwrap();
        assert!((z - 25f64.ln()).abs() < 1e-12);
        assert!((z - 3.21888).abs() < 1e-5);
    }

    #[test]
    fn partition_single_step_is_lse() {
        let e = array![[0.3, -1.0, 2.0, 0.0, 0.7]];
        let z = log_partition(e.view(), &CrfParams::zeros()).unwrap();
        let want = e.iter().map(|v: &f64| v.exp()).sum::<f64>().ln();
        assert!((z - want).abs() < 1e-12);
        assert!(matches!(
            log_partition(Array2::<f64>::zeros((0, 5)).view(), &CrfParams::zeros()),
            Err(Error::EmptySequence)
        ));
    }

    #[test]
    fn marginals_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e = Array2::from_shape_fn((7, 5), |_| rng.gen_range(-3.0..3.0));
        let mut p = CrfParams::<f64>::zeros();
        p.transitions.mapv_inplace(|_| rng.gen_range(-2.0..2.0));
        let m = marginals(e.view(), &p).unwrap();
        for row in m.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn nll_zero_when_mask_leaves_one_path() {
        let mut mask = TransitionMask {
            allowed: [[false; 5]; 5],
            start: [false; 5],
            stop: [false; 5],
        };
        mask.start[B.index()] = true;
        mask.allowed[B.index()][L.index()] = true;
        mask.stop[L.index()] = true;
        let e = array![[0.1, 0.2, 0.3, 0.4, 0.5], [1.0, -1.0, 0.0, 2.0, 0.5]];
        let p = CrfParams::<f64>::zeros().masked(&mask);
        assert_eq!(nll(e.view(), &[B, L], &p).unwrap(), 0.0);
    }

    #[test]
    fn unmasked_viterbi_is_argmax() {
        let e = array![[0.0, 3.0, 1.0, 0.0, 0.0], [5.0, 0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0, 0.1]];
        let (path, score) = viterbi(e.view(), &CrfParams::<f64>::zeros(), &TransitionMask::unconstrained())
            .unwrap();
        assert_eq!(path, vec![I, B, U]);
        assert!((score - 8.1).abs() < 1e-12);
    }

    #[test]
    fn masked_viterbi_avoids_o_to_i() {
        let e = array![[0.0, 0.0, 0.0, 5.0, 0.0], [0.0, 5.0, 0.0, 0.0, 0.0]];
        let mask = TransitionMask::bilou();
        let (path, _) = viterbi(e.view(), &CrfParams::<f64>::zeros(), &mask).unwrap();
        assert!(mask.permits(&path));
        assert_ne!(path, vec![O, I]);
        // enumerate admissible paths for the maximum
        let mut best = f64::NEG_INFINITY;
        for a in Bilou::ALL {
            for b in Bilou::ALL {
                if mask.permits(&[a, b]) {
                    best = best.max(e[[0, a.index()]] + e[[1, b.index()]]);
                }
            }
        }
        let s = score_path(e.view(), &path, &CrfParams::zeros()).unwrap();
        assert_eq!(s, best);
    }

    #[test]
    fn bilou_mask_admits_every_length() {
        let mask = TransitionMask::bilou();
        for len in 1..10 {
            assert!(mask.admits_length(len));
        }
        let mut none = TransitionMask::unconstrained();
        none.stop = [false; 5];
        let e = Array2::<f64>::zeros((2, 5));
        assert!(matches!(
            viterbi(e.view(), &CrfParams::zeros(), &none),
            Err(Error::NoValidPath { len: 2 })
        ));
    }

    #[test]
    fn bilou_mask_matches_decoder_validity() {
        // every length-3 sequence is permitted iff the chunk decoder accepts it
        let mask = TransitionMask::bilou();
        for a in Bilou::ALL {
            for b in Bilou::ALL {
                for c in Bilou::ALL {
                    let seq = [a, b, c];
                    assert_eq!(
                        mask.permits(&seq),
                        crate::corpus::chunk_ranges(&seq).is_ok(),
                        "{seq:?}"
                    );
                }
            }
        }
    }
}
