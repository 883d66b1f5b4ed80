//! Frame-context expansion and temporal attention over the context window.
//!
//! For frame `i` with context `C(i)` (F x c) and current frame `Y(i)`:
//!
//! ```text
//! Q(i) = W_Q C(i)            d_q x c
//! K(i) = W_K Y(i)            d_q
//! V(i) = W_V C(i)            d_v x c
//! A(i) = softmax(Q(i)^T K(i) / sqrt(d_q))      1 x c
//! Y'(i) = V(i) * A(i)        A broadcast over the d_v rows
//! ```
//!
//! `Y'(i)` is flattened context-major (column `j` occupies features
//! `j*d_v .. (j+1)*d_v`). The subband variant runs the same transform on
//! contiguous frequency bands with independent parameters and concatenates
//! features and weights in ascending band order.

use std::ops::Range;

use ndarray::{s, Array1, Array2, Array3, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::LpsMatrix;
use crate::error::{Error, Result};

/// T x F x c context features; slot `(c - 1) / 2` is the frame itself.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextTensor {
    values: Array3<f64>,
}

impl ContextTensor {
    /// Wraps explicit context values. Unlike [`expand_context`] this accepts
    /// any context width, even ones without a centre slot.
    pub fn new(values: Array3<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn n_frames(&self) -> usize {
        self.values.dim().0
    }

    pub fn n_bins(&self) -> usize {
        self.values.dim().1
    }

    pub fn context(&self) -> usize {
        self.values.dim().2
    }

    /// `C(i)`, F x c.
    pub fn frame(&self, i: usize) -> ArrayView2<'_, f64> {
        self.values.slice(s![i, .., ..])
    }

    /// Baseline features: each frame's context flattened context-major,
    /// T x (F * c).
    pub fn flatten(&self) -> Array2<f64> {
        let (t, f, c) = self.values.dim();
        let mut out = Array2::zeros((t, f * c));
        for i in 0..t {
            for j in 0..c {
                out.slice_mut(s![i, j * f..(j + 1) * f])
                    .assign(&self.values.slice(s![i, .., j]));
            }
        }
        out
    }
}

/// Stacks each frame with its `(c - 1) / 2` past and future neighbours,
/// replicating the first and last frames at the edges.
pub fn expand_context(y: &LpsMatrix, c: usize) -> Result<ContextTensor> {
    if c.is_multiple_of(2) {
        return Err(Error::EvenContext(c));
    }
    let v = y.values();
    let (t, f) = v.dim();
    if t == 0 {
        return Err(Error::EmptyInput);
    }
    let half = (c / 2) as isize;
    let mut values = Array3::zeros((t, f, c));
    for i in 0..t {
        for j in 0..c {
            let src = (i as isize + j as isize - half).clamp(0, t as isize - 1) as usize;
            values.slice_mut(s![i, .., j]).assign(&v.row(src));
        }
    }
    Ok(ContextTensor { values })
}

/// Learnable projections for one attention block.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    /// d_q x F
    pub w_q: Array2<f64>,
    /// d_q x F
    pub w_k: Array2<f64>,
    /// d_v x F
    pub w_v: Array2<f64>,
}

/// Uniform in `+-sqrt(6 / (fan_in + fan_out))`.
pub fn glorot<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-limit..limit))
}

impl AttentionParams {
    pub fn zeros(input: usize, d_q: usize, d_v: usize) -> Self {
        Self {
            w_q: Array2::zeros((d_q, input)),
            w_k: Array2::zeros((d_q, input)),
            w_v: Array2::zeros((d_v, input)),
        }
    }

    pub fn random<R: Rng>(input: usize, d_q: usize, d_v: usize, rng: &mut R) -> Self {
        Self {
            w_q: glorot(d_q, input, rng),
            w_k: glorot(d_q, input, rng),
            w_v: glorot(d_v, input, rng),
        }
    }

    pub fn input_width(&self) -> usize {
        self.w_q.ncols()
    }

    pub fn d_q(&self) -> usize {
        self.w_q.nrows()
    }

    pub fn d_v(&self) -> usize {
        self.w_v.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.input_width();
        if self.d_q() == 0 || self.d_v() == 0 || f == 0 {
            return Err(Error::Config(
                "attention dimensions must be at least 1".into(),
            ));
        }
        if self.w_k.dim() != (self.d_q(), f) || self.w_v.ncols() != f {
            return Err(Error::Dimension(format!(
                "inconsistent projections: W_Q {:?}, W_K {:?}, W_V {:?}",
                self.w_q.dim(),
                self.w_k.dim(),
                self.w_v.dim()
            )));
        }
        Ok(())
    }
}

/// Per-frame attention rows: T x c (full band) or T x (N * c) (subbands).
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights {
    values: Array2<f64>,
    context: usize,
}

impl AttentionWeights {
    pub fn new(values: Array2<f64>, context: usize) -> Result<Self> {
        if context == 0 || !values.ncols().is_multiple_of(context) {
            return Err(Error::Dimension(format!(
                "weight rows of width {} are not a multiple of c = {context}",
                values.ncols()
            )));
        }
        Ok(Self { values, context })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn context(&self) -> usize {
        self.context
    }

    pub fn n_bands(&self) -> usize {
        self.values.ncols() / self.context
    }

    pub fn n_frames(&self) -> usize {
        self.values.nrows()
    }

    /// The c weights of band `band` at frame `frame`.
    pub fn row(&self, frame: usize, band: usize) -> ArrayView1<'_, f64> {
        self.values
            .slice(s![frame, band * self.context..(band + 1) * self.context])
    }
}

/// Contiguous frequency bands given by `N + 1` increasing bin edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubbandPartition {
    edges: Vec<usize>,
}

impl SubbandPartition {
    pub fn from_edges(edges: Vec<usize>) -> Result<Self> {
        if edges.len() < 2 || edges[0] != 0 || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("invalid band edges {edges:?}")));
        }
        Ok(Self { edges })
    }

    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    pub fn n_bands(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn n_bins(&self) -> usize {
        *self.edges.last().unwrap()
    }

    pub fn band(&self, b: usize) -> Range<usize> {
        self.edges[b]..self.edges[b + 1]
    }

    pub fn width(&self, b: usize) -> usize {
        self.edges[b + 1] - self.edges[b]
    }
}

/// Splits `f` bins into `n` bands of width `f / n`, giving the remainder one
/// bin at a time to the lowest bands.
pub fn partition_bands(f: usize, n: usize) -> Result<SubbandPartition> {
    if n == 0 || n > f {
        return Err(Error::Config(format!(
            "cannot split {f} bins into {n} subbands"
        )));
    }
    let (base, extra) = (f / n, f % n);
    let mut edges = Vec::with_capacity(n + 1);
    edges.push(0);
    for b in 0..n {
        let w = base + usize::from(b < extra);
        edges.push(edges[b] + w);
    }
    SubbandPartition::from_edges(edges)
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Scaled dot-product logits `Q(i)^T K(i) / sqrt(d_q)` for one frame.
pub fn frame_scores(
    context: ArrayView2<'_, f64>,
    current: ArrayView1<'_, f64>,
    p: &AttentionParams,
) -> Array1<f64> {
    let q = p.w_q.dot(&context);
    let k = p.w_k.dot(&current);
    q.t().dot(&k) / (p.d_q() as f64).sqrt()
}

fn attend_frame(
    context: ArrayView2<'_, f64>,
    current: ArrayView1<'_, f64>,
    p: &AttentionParams,
    features: &mut [f64],
    weights: &mut [f64],
) {
    let scores = frame_scores(context, current, p);
    let a = softmax(scores.as_slice().expect("contiguous scores"));
    let v = p.w_v.dot(&context);
    let d_v = p.d_v();
    for (j, aj) in a.iter().enumerate() {
        for r in 0..d_v {
            features[j * d_v + r] = v[[r, j]] * aj;
        }
    }
    weights.copy_from_slice(&a);
}

fn check_inputs(ctx: &ContextTensor, y: &LpsMatrix) -> Result<()> {
    if ctx.n_frames() != y.n_frames() || ctx.n_bins() != y.n_bins() {
        return Err(Error::Dimension(format!(
            "context tensor is {}x{}, frames are {}x{}",
            ctx.n_frames(),
            ctx.n_bins(),
            y.n_frames(),
            y.n_bins()
        )));
    }
    Ok(())
}

/// Full-band temporal attention. Returns T x (d_v * c) weighted features and
/// the T x c weights.
pub fn fta_forward(
    ctx: &ContextTensor,
    y: &LpsMatrix,
    p: &AttentionParams,
) -> Result<(Array2<f64>, AttentionWeights)> {
    let full = SubbandPartition::from_edges(vec![0, y.n_bins()])?;
    sta_forward(ctx, y, std::slice::from_ref(p), &full)
}

/// Subband temporal attention with one parameter set per band.
pub fn sta_forward(
    ctx: &ContextTensor,
    y: &LpsMatrix,
    params: &[AttentionParams],
    part: &SubbandPartition,
) -> Result<(Array2<f64>, AttentionWeights)> {
    check_inputs(ctx, y)?;
    if part.n_bins() != y.n_bins() || params.len() != part.n_bands() {
        return Err(Error::Dimension(format!(
            "{} parameter sets for a {}-band partition of {} bins over {}-bin frames",
            params.len(),
            part.n_bands(),
            part.n_bins(),
            y.n_bins()
        )));
    }
    for (b, p) in params.iter().enumerate() {
        p.validate()?;
        if p.input_width() != part.width(b) {
            return Err(Error::Dimension(format!(
                "band {b} is {} bins wide but its projections take {}",
                part.width(b),
                p.input_width()
            )));
        }
    }
    let c = ctx.context();
    let t = ctx.n_frames();
    let offsets: Vec<usize> = params
        .iter()
        .scan(0, |acc, p| {
            let o = *acc;
            *acc += p.d_v() * c;
            Some(o)
        })
        .collect();
    let width: usize = params.iter().map(|p| p.d_v() * c).sum();
    let mut features = Array2::zeros((t, width));
    let mut weights = Array2::zeros((t, params.len() * c));
    for i in 0..t {
        let frame = ctx.frame(i);
        let current = y.values().row(i);
        let mut f_row = features.row_mut(i);
        let f_row = f_row.as_slice_mut().expect("row-major features");
        let mut w_row = weights.row_mut(i);
        let w_row = w_row.as_slice_mut().expect("row-major weights");
        for (b, p) in params.iter().enumerate() {
            let band = part.band(b);
            attend_frame(
                frame.slice(s![band.clone(), ..]),
                current.slice(s![band]),
                p,
                &mut f_row[offsets[b]..offsets[b] + p.d_v() * c],
                &mut w_row[b * c..(b + 1) * c],
            );
        }
    }
    Ok((features, AttentionWeights::new(weights, c)?))
}

/// One exported attention row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRecord {
    pub utt: String,
    pub frame: usize,
    pub rt60: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<usize>,
    pub weights: Vec<f64>,
}

/// Flattens weights into export records; `band` is set only for subband
/// models (more than one band).
pub fn weight_records(utt: &str, rt60: f64, a: &AttentionWeights) -> Vec<WeightRecord> {
    let n_bands = a.n_bands();
    let mut out = Vec::with_capacity(a.n_frames() * n_bands);
    for (frame, _) in a.values().axis_iter(Axis(0)).enumerate() {
        for band in 0..n_bands {
            out.push(WeightRecord {
                utt: utt.to_owned(),
                frame,
                rt60,
                band: (n_bands > 1).then_some(band),
                weights: a.row(frame, band).to_vec(),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_lps(t: usize, f: usize, seed: u64) -> LpsMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LpsMatrix::new(Array2::from_shape_simple_fn((t, f), || {
            rng.gen_range(-2.0..2.0)
        }))
        .unwrap()
    }

    #[test]
    fn context_of_one_is_the_input() {
        let y = random_lps(5, 4, 1);
        let ctx = expand_context(&y, 1).unwrap();
        assert_eq!(ctx.values().dim(), (5, 4, 1));
        assert_eq!(ctx.values().index_axis(Axis(2), 0), y.values());
    }

    #[test]
    fn single_frame_is_replicated() {
        let y = random_lps(1, 6, 2);
        let ctx = expand_context(&y, 9).unwrap();
        for j in 0..9 {
            assert_eq!(ctx.values().slice(s![0, .., j]), y.values().row(0));
        }
    }

    #[test]
    fn interior_offsets_index_neighbours() {
        let y = random_lps(20, 3, 3);
        let ctx = expand_context(&y, 9).unwrap();
        for i in 4..16 {
            for off in -4isize..=4 {
                let slot = (off + 4) as usize;
                let src = (i as isize + off) as usize;
                assert_eq!(ctx.values().slice(s![i, .., slot]), y.values().row(src));
            }
        }
        // Edges replicate.
        assert_eq!(ctx.values().slice(s![0, .., 0]), y.values().row(0));
        assert_eq!(ctx.values().slice(s![19, .., 8]), y.values().row(19));
    }

    #[test]
    fn even_context_is_rejected() {
        let err = expand_context(&random_lps(3, 2, 0), 4).unwrap_err();
        assert_eq!(err.to_string(), "context size must be odd (got 4)");
    }

    #[test]
    fn singleton_context_gives_unit_weight() {
        let y = random_lps(6, 5, 4);
        let ctx = expand_context(&y, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = AttentionParams::random(5, 3, 5, &mut rng);
        let (feat, a) = fta_forward(&ctx, &y, &p).unwrap();
        assert!(a.values().iter().all(|w| *w == 1.0));
        let v = y.values().dot(&p.w_v.t());
        assert_eq!(feat, v);
    }

    #[test]
    fn zero_queries_give_uniform_weights() {
        let y = random_lps(6, 5, 5);
        let ctx = expand_context(&y, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = AttentionParams::random(5, 3, 5, &mut rng);
        p.w_q.fill(0.0);
        let (_, a) = fta_forward(&ctx, &y, &p).unwrap();
        assert!(a.values().iter().all(|w| (*w - 0.2).abs() < 1e-15));
    }

    #[test]
    fn scalar_case_by_hand() {
        // F = 1, d_q = d_v = 1, c = 2, all weights 1, Y(i) = 1, C(i) = [1, 2].
        // Logits [1, 2]; softmax = [e, e^2] / (e + e^2).
        let e1 = 1f64.exp();
        let e2 = 2f64.exp();
        let a_expect = [e1 / (e1 + e2), e2 / (e1 + e2)];
        let p = AttentionParams {
            w_q: Array2::ones((1, 1)),
            w_k: Array2::ones((1, 1)),
            w_v: Array2::ones((1, 1)),
        };
        let ctx = ContextTensor {
            values: Array3::from_shape_vec((1, 1, 2), vec![1.0, 2.0]).unwrap(),
        };
        let y = LpsMatrix::new(Array2::ones((1, 1))).unwrap();
        let (feat, a) = fta_forward(&ctx, &y, &p).unwrap();
        assert_abs_diff_eq!(a.values()[[0, 0]], a_expect[0], epsilon = 1e-15);
        assert_abs_diff_eq!(a.values()[[0, 1]], a_expect[1], epsilon = 1e-15);
        assert_abs_diff_eq!(a.values()[[0, 0]], 0.2689, epsilon = 1e-4);
        assert_abs_diff_eq!(feat[[0, 0]], a_expect[0], epsilon = 1e-15);
        assert_abs_diff_eq!(feat[[0, 1]], 2.0 * a_expect[1], epsilon = 1e-15);
        assert_abs_diff_eq!(feat[[0, 1]], 1.4622, epsilon = 1e-4);
    }

    #[test]
    fn partition_cases() {
        assert_eq!(
            partition_bands(257, 8).unwrap().edges(),
            &[0, 33, 65, 97, 129, 161, 193, 225, 257]
        );
        assert_eq!(partition_bands(40, 1).unwrap().edges(), &[0, 40]);
        let p = partition_bands(10, 3).unwrap();
        assert_eq!(
            (0..3).map(|b| p.width(b)).collect::<Vec<_>>(),
            vec![4, 3, 3]
        );
        assert!(partition_bands(3, 4).is_err());
        assert!(partition_bands(3, 0).is_err());
    }

    #[test]
    fn sta_with_one_band_is_fta() {
        let y = random_lps(12, 8, 6);
        let ctx = expand_context(&y, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = AttentionParams::random(8, 4, 8, &mut rng);
        let one = partition_bands(8, 1).unwrap();
        let (fa, wa) = fta_forward(&ctx, &y, &p).unwrap();
        let (fb, wb) = sta_forward(&ctx, &y, std::slice::from_ref(&p), &one).unwrap();
        assert_eq!(fa, fb);
        assert_eq!(wa, wb);
    }

    #[test]
    fn sta_blocks_are_independent() {
        // Two bands of equal width: swapping their parameters and their
        // frequency content swaps the output blocks exactly.
        let y = random_lps(10, 8, 7);
        let ctx = expand_context(&y, 3).unwrap();
        let part = partition_bands(8, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = vec![
            AttentionParams::random(4, 2, 4, &mut rng),
            AttentionParams::random(4, 2, 4, &mut rng),
        ];
        let (feat, a) = sta_forward(&ctx, &y, &params, &part).unwrap();

        let swapped_vals = ndarray::concatenate(
            Axis(1),
            &[
                y.values().slice(s![.., 4..8]),
                y.values().slice(s![.., 0..4]),
            ],
        )
        .unwrap();
        let ys = LpsMatrix::new(swapped_vals).unwrap();
        let ctx_s = expand_context(&ys, 3).unwrap();
        let params_s = vec![params[1].clone(), params[0].clone()];
        let (feat_s, a_s) = sta_forward(&ctx_s, &ys, &params_s, &part).unwrap();
        assert_eq!(feat.slice(s![.., 0..12]), feat_s.slice(s![.., 12..24]));
        assert_eq!(feat.slice(s![.., 12..24]), feat_s.slice(s![.., 0..12]));
        assert_eq!(
            a.values().slice(s![.., 0..3]),
            a_s.values().slice(s![.., 3..6])
        );

        // Changing only band 1's parameters leaves block 0 untouched.
        let mut params_m = params.clone();
        params_m[1].w_q.mapv_inplace(|v| v * 3.0);
        let (feat_m, _) = sta_forward(&ctx, &y, &params_m, &part).unwrap();
        assert_eq!(feat.slice(s![.., 0..12]), feat_m.slice(s![.., 0..12]));
        assert_ne!(feat.slice(s![.., 12..24]), feat_m.slice(s![.., 12..24]));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let y = random_lps(4, 6, 8);
        let ctx = expand_context(&y, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = AttentionParams::random(5, 2, 5, &mut rng);
        assert!(matches!(
            fta_forward(&ctx, &y, &p),
            Err(Error::Dimension(_))
        ));
        let other = random_lps(5, 6, 9);
        let p6 = AttentionParams::random(6, 2, 6, &mut rng);
        assert!(fta_forward(&ctx, &other, &p6).is_err());
    }

    #[test]
    fn duplicated_projections_scale_logits_by_sqrt_two() {
        let y = random_lps(5, 6, 10);
        let ctx = expand_context(&y, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = AttentionParams::random(6, 3, 6, &mut rng);
        let dup = AttentionParams {
            w_q: ndarray::concatenate![Axis(0), p.w_q, p.w_q],
            w_k: ndarray::concatenate![Axis(0), p.w_k, p.w_k],
            w_v: p.w_v.clone(),
        };
        for i in 0..5 {
            let a = frame_scores(ctx.frame(i), y.values().row(i), &p);
            let b = frame_scores(ctx.frame(i), y.values().row(i), &dup);
            for (x, z) in a.iter().zip(b.iter()) {
                // Raw dot product doubles, the scale shrinks by 1/sqrt(2).
                assert_abs_diff_eq!(*z, x * 2f64.sqrt(), epsilon = 1e-12 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn weight_records_shape() {
        let a = AttentionWeights::new(Array2::from_elem((2, 6), 1.0 / 3.0), 3).unwrap();
        let recs = weight_records("u1", 0.4, &a);
        assert_eq!(recs.len(), 4);
        assert_eq!(recs[1].band, Some(1));
        let json = serde_json::to_string(&recs[0]).unwrap();
        assert!(json.contains("\"utt\":\"u1\"") && json.contains("\"band\":0"));
        let fta = AttentionWeights::new(Array2::from_elem((2, 3), 1.0 / 3.0), 3).unwrap();
        let json = serde_json::to_string(&weight_records("u", 0.1, &fta)[0]).unwrap();
        assert!(!json.contains("band"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn rows_are_stochastic(seed in any::<u64>(), t in 1usize..8, half in 0usize..4, bands in 1usize..4) {
            let c = 2 * half + 1;
            let f = 9;
            let y = random_lps(t, f, seed);
            let ctx = expand_context(&y, c).unwrap();
            let part = partition_bands(f, bands).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
            let params: Vec<_> = (0..bands)
                .map(|b| AttentionParams::random(part.width(b), 3, part.width(b), &mut rng))
                .collect();
            let (_, a) = sta_forward(&ctx, &y, &params, &part).unwrap();
            for i in 0..t {
                for b in 0..bands {
                    let row = a.row(i, b);
                    prop_assert!((row.sum() - 1.0).abs() < 1e-6);
                    prop_assert!(row.iter().all(|w| *w > 0.0));
                }
            }
        }

        #[test]
        fn softmax_shift_invariance(logits in proptest::collection::vec(-20.0f64..20.0, 1..10), shift in -50.0f64..50.0) {
            let a = softmax(&logits);
            let shifted: Vec<f64> = logits.iter().map(|l| l + shift).collect();
            let b = softmax(&shifted);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn changes_stay_inside_the_window(seed in any::<u64>(), j in 0usize..16, half in 0usize..3) {
            let c = 2 * half + 1;
            let y = random_lps(16, 5, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
            let p = AttentionParams::random(5, 3, 5, &mut rng);
            let (base, _) = fta_forward(&expand_context(&y, c).unwrap(), &y, &p).unwrap();
            let mut v = y.values().clone();
            v.row_mut(j).mapv_inplace(|x| x + 1.0);
            let y2 = LpsMatrix::new(v).unwrap();
            let (moved, _) = fta_forward(&expand_context(&y2, c).unwrap(), &y2, &p).unwrap();
            for i in 0..16 {
                if (i as isize - j as isize).unsigned_abs() > half {
                    prop_assert_eq!(base.row(i), moved.row(i));
                }
            }
        }
    }
}
