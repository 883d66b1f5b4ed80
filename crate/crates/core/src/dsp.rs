//! Time-frequency analysis and synthesis.
//!
//! Waveforms are analysed with a Hann-windowed STFT into complex
//! spectrograms, reduced to log-power spectra (natural log) for the networks,
//! and resynthesised by weighted overlap-add from an estimated LPS combined
//! with the phase of the reverberant observation.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, Axis};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;
pub const DEFAULT_POWER_FLOOR: f64 = 1e-12;
/// Lower bound applied to per-bin standard deviations.
pub const STD_FLOOR: f64 = 1e-8;

/// Mono audio at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Audio("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Numerical(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        Self {
            samples: vec![0.0; len],
            sample_rate,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Sum of squared samples.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Truncates or zero-extends to exactly `len` samples.
    pub fn with_len(mut self, len: usize) -> Self {
        self.samples.resize(len, 0.0);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    /// Periodic Hann, `0.5 - 0.5 cos(2 pi n / N)`.
    Hann,
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StftConfig {
    pub fft_size: usize,
    pub win_len: usize,
    pub hop: usize,
    pub window: Window,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            fft_size: 512,
            win_len: 512,
            hop: 256,
            window: Window::Hann,
        }
    }
}

impl StftConfig {
    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn window_coeffs(&self) -> Vec<f64> {
        let n = self.win_len;
        match self.window {
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
            Window::Rectangular => vec![1.0; n],
        }
    }

    /// Relative peak deviation of the overlap-added analysis window from its mean.
    pub fn cola_deviation(&self) -> f64 {
        let w = self.window_coeffs();
        let mut acc = vec![0.0; self.hop];
        for (i, wi) in w.iter().enumerate() {
            acc[i % self.hop] += wi;
        }
        let mean = acc.iter().sum::<f64>() / acc.len() as f64;
        acc.iter()
            .map(|a| (a - mean).abs() / mean)
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.win_len == 0 {
            return Err(Error::Config(
                "hop and window length must be positive".into(),
            ));
        }
        if !(self.hop <= self.win_len && self.win_len <= self.fft_size) {
            return Err(Error::Config(format!(
                "need hop <= win_len <= fft_size, got {} / {} / {}",
                self.hop, self.win_len, self.fft_size
            )));
        }
        let dev = self.cola_deviation();
        if dev > 1e-10 {
            return Err(Error::Config(format!(
                "window/hop pair is not constant-overlap-add (deviation {dev:.3e})"
            )));
        }
        Ok(())
    }

    /// Number of frames produced for a signal of `len` samples; the tail is
    /// zero-padded to complete the last frame.
    pub fn frame_count(&self, len: usize) -> usize {
        if len <= self.win_len {
            1
        } else {
            (len - self.win_len).div_ceil(self.hop) + 1
        }
    }

    pub fn synthesis_len(&self, frames: usize) -> usize {
        (frames.max(1) - 1) * self.hop + self.win_len
    }
}

/// T x F complex STFT frames.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    frames: Array2<Complex64>,
}

impl ComplexSpectrogram {
    pub fn new(frames: Array2<Complex64>) -> Result<Self> {
        if frames
            .iter()
            .any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::Numerical("non-finite spectrogram entry".into()));
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &Array2<Complex64> {
        &self.frames
    }

    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.frames.ncols()
    }
}

/// T x F log-power spectrum (natural log).
#[derive(Debug, Clone, PartialEq)]
pub struct LpsMatrix {
    values: Array2<f64>,
}

impl LpsMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite LPS entry".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn n_frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.values.ncols()
    }
}

/// Per-frequency-bin mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn n_bins(&self) -> usize {
        self.mean.len()
    }

    /// Identity statistics (zero mean, unit deviation).
    pub fn identity(n_bins: usize) -> Self {
        Self {
            mean: vec![0.0; n_bins],
            std: vec![1.0; n_bins],
        }
    }
}

pub fn stft(w: &Waveform, cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    if w.is_empty() {
        return Err(Error::EmptyInput);
    }
    cfg.validate()?;
    let n_frames = cfg.frame_count(w.len());
    let n_bins = cfg.n_bins();
    let window = cfg.window_coeffs();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.fft_size);

    let samples = w.samples();
    let mut out = Array2::<Complex64>::zeros((n_frames, n_bins));
    let mut buf = vec![Complex64::new(0.0, 0.0); cfg.fft_size];
    for t in 0..n_frames {
        let start = t * cfg.hop;
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        for (i, wi) in window.iter().enumerate() {
            let s = samples.get(start + i).copied().unwrap_or(0.0);
            buf[i] = Complex64::new(s * wi, 0.0);
        }
        fft.process(&mut buf);
        for (f, v) in out.row_mut(t).iter_mut().enumerate() {
            *v = buf[f];
        }
    }
    ComplexSpectrogram::new(out)
}

/// Inverse STFT by weighted overlap-add, normalised by the summed squared
/// synthesis window. Samples in the fully overlapped interior are exact for
/// a consistent spectrogram.
pub fn istft(spec: &ComplexSpectrogram, cfg: &StftConfig) -> Result<Waveform> {
    cfg.validate()?;
    if spec.n_bins() != cfg.n_bins() {
        return Err(Error::Dimension(format!(
            "spectrogram has {} bins, config expects {}",
            spec.n_bins(),
            cfg.n_bins()
        )));
    }
    if spec.n_frames() == 0 {
        return Err(Error::EmptyInput);
    }
    let n = cfg.fft_size;
    let window = cfg.window_coeffs();
    let out_len = cfg.synthesis_len(spec.n_frames());
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n);

    let mut out = vec![0.0; out_len];
    let mut norm = vec![0.0; out_len];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (t, row) in spec.frames().axis_iter(Axis(0)).enumerate() {
        for k in 0..n {
            buf[k] = if k < row.len() {
                row[k]
            } else {
                row[n - k].conj()
            };
        }
        // Real signal: DC and Nyquist must be real.
        buf[0].im = 0.0;
        if n.is_multiple_of(2) {
            buf[n / 2].im = 0.0;
        }
        ifft.process(&mut buf);
        let start = t * cfg.hop;
        for (i, wi) in window.iter().enumerate() {
            out[start + i] += buf[i].re / n as f64 * wi;
            norm[start + i] += wi * wi;
        }
    }
    // Edge samples covered only by window tails are attenuated rather than
    // amplified by a near-zero denominator.
    let floor = 0.1 * norm.iter().cloned().fold(0.0, f64::max);
    for (o, d) in out.iter_mut().zip(&norm) {
        *o /= d.max(floor);
    }
    Waveform::new(out, DEFAULT_SAMPLE_RATE)
}

pub fn lps(spec: &ComplexSpectrogram, power_floor: f64) -> Result<LpsMatrix> {
    if !(power_floor > 0.0) {
        return Err(Error::Config("power floor must be positive".into()));
    }
    let values = spec.frames().mapv(|c| c.norm_sqr().max(power_floor).ln());
    LpsMatrix::new(values)
}

/// Magnitude from `est_lps`, phase from `reverberant`, then overlap-add.
pub fn reconstruct(
    est_lps: &LpsMatrix,
    reverberant: &ComplexSpectrogram,
    cfg: &StftConfig,
) -> Result<Waveform> {
    if est_lps.values().dim() != reverberant.frames().dim() {
        return Err(Error::Dimension(format!(
            "estimated LPS is {:?}, reverberant spectrogram is {:?}",
            est_lps.values().dim(),
            reverberant.frames().dim()
        )));
    }
    let mut frames = reverberant.frames().clone();
    ndarray::Zip::from(&mut frames)
        .and(est_lps.values())
        .for_each(|c, &l| {
            let mag = (l / 2.0).exp();
            let phase = if c.norm_sqr() > 0.0 { c.arg() } else { 0.0 };
            *c = Complex64::from_polar(mag, phase);
        });
    istft(&ComplexSpectrogram::new(frames)?, cfg)
}

/// Global per-bin mean and population standard deviation over every frame.
pub fn compute_norm_stats<'a, I>(corpus: I) -> Result<NormStats>
where
    I: IntoIterator<Item = &'a LpsMatrix>,
{
    let mut sum: Option<Array1<f64>> = None;
    let mut sum_sq: Option<Array1<f64>> = None;
    let mut count = 0usize;
    for m in corpus {
        let v = m.values();
        if v.nrows() == 0 {
            continue;
        }
        let (s, q) = match (&mut sum, &mut sum_sq) {
            (Some(s), Some(q)) => (s, q),
            _ => {
                sum = Some(Array1::zeros(v.ncols()));
                sum_sq = Some(Array1::zeros(v.ncols()));
                (sum.as_mut().unwrap(), sum_sq.as_mut().unwrap())
            }
        };
        if v.ncols() != s.len() {
            return Err(Error::Dimension(format!(
                "corpus mixes {} and {} frequency bins",
                s.len(),
                v.ncols()
            )));
        }
        for row in v.axis_iter(Axis(0)) {
            *s += &row;
            q.zip_mut_with(&row, |a, &x| *a += x * x);
        }
        count += v.nrows();
    }
    let (Some(sum), Some(sum_sq)) = (sum, sum_sq) else {
        return Err(Error::EmptyInput);
    };
    let n = count as f64;
    let mean = sum / n;
    let std = ndarray::Zip::from(&sum_sq)
        .and(&mean)
        .map_collect(|&q, &m| (q / n - m * m).max(0.0).sqrt().max(STD_FLOOR));
    Ok(NormStats {
        mean: mean.to_vec(),
        std: std.to_vec(),
    })
}

fn check_stats(x: &LpsMatrix, s: &NormStats) -> Result<()> {
    if x.n_bins() != s.n_bins() || s.std.len() != s.mean.len() {
        return Err(Error::Dimension(format!(
            "LPS has {} bins, statistics have {}",
            x.n_bins(),
            s.n_bins()
        )));
    }
    Ok(())
}

pub fn normalize(x: &LpsMatrix, s: &NormStats) -> Result<LpsMatrix> {
    check_stats(x, s)?;
    let mut v = x.values().clone();
    for mut row in v.axis_iter_mut(Axis(0)) {
        for ((e, m), sd) in row.iter_mut().zip(&s.mean).zip(&s.std) {
            *e = (*e - m) / sd;
        }
    }
    LpsMatrix::new(v)
}

pub fn denormalize(x: &LpsMatrix, s: &NormStats) -> Result<LpsMatrix> {
    check_stats(x, s)?;
    let mut v = x.values().clone();
    for mut row in v.axis_iter_mut(Axis(0)) {
        for ((e, m), sd) in row.iter_mut().zip(&s.mean).zip(&s.std) {
            *e = *e * sd + m;
        }
    }
    LpsMatrix::new(v)
}

/// LPS of a waveform under `cfg`.
pub fn waveform_lps(w: &Waveform, cfg: &StftConfig, power_floor: f64) -> Result<LpsMatrix> {
    lps(&stft(w, cfg)?, power_floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = a.iter().map(|x| x * x).sum();
        (num / den).sqrt()
    }

    fn noise(len: usize, seed: u64) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Waveform::new((0..len).map(|_| rng.gen_range(-1.0..1.0)).collect(), 16_000).unwrap()
    }

    #[test]
    fn zero_waveform_gives_zero_spectrogram() {
        let spec = stft(&Waveform::zeros(1024, 16_000), &StftConfig::default()).unwrap();
        assert_eq!(spec.frames().dim(), (3, 257));
        assert!(spec.frames().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn empty_waveform_is_rejected() {
        let err = stft(&Waveform::zeros(0, 16_000), &StftConfig::default()).unwrap_err();
        assert_eq!(err.to_string(), "empty input");
    }

    #[test]
    fn frame_count_pads_the_tail() {
        let cfg = StftConfig::default();
        assert_eq!(cfg.frame_count(100), 1);
        assert_eq!(cfg.frame_count(512), 1);
        assert_eq!(cfg.frame_count(768), 2);
        assert_eq!(cfg.frame_count(769), 3);
        assert_eq!(cfg.frame_count(32_000), 124);
    }

    #[test]
    fn bin_centred_sinusoid_concentrates_in_its_bin() {
        let cfg = StftConfig {
            fft_size: 64,
            win_len: 64,
            hop: 64,
            window: Window::Rectangular,
        };
        let k = 5usize;
        let x: Vec<f64> = (0..256)
            .map(|n| (2.0 * PI * k as f64 * n as f64 / 64.0).cos())
            .collect();
        let spec = stft(&Waveform::new(x.clone(), 16_000).unwrap(), &cfg).unwrap();
        // Direct DFT sum on the first frame as an independent oracle.
        for f in 0..cfg.n_bins() {
            let (mut re, mut im) = (0.0, 0.0);
            for (n, xn) in x.iter().take(64).enumerate() {
                let ang = -2.0 * PI * (f * n) as f64 / 64.0;
                re += xn * ang.cos();
                im += xn * ang.sin();
            }
            assert_abs_diff_eq!(spec.frames()[[0, f]].re, re, epsilon = 1e-9);
            assert_abs_diff_eq!(spec.frames()[[0, f]].im, im, epsilon = 1e-9);
        }
        for t in 0..spec.n_frames() {
            let row = spec.frames().row(t);
            let peak = (0..row.len())
                .max_by(|&a, &b| row[a].norm().partial_cmp(&row[b].norm()).unwrap())
                .unwrap();
            assert_eq!(peak, k);
            assert_abs_diff_eq!(row[k].norm(), 32.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn single_zero_frame_inverts_to_silence() {
        let spec = ComplexSpectrogram::new(Array2::zeros((1, 257))).unwrap();
        let w = istft(&spec, &StftConfig::default()).unwrap();
        assert_eq!(w.len(), 512);
        assert!(w.samples().iter().all(|s| *s == 0.0));
    }

    #[test]
    fn impulse_is_recovered_at_its_offset() {
        let mut x = vec![0.0; 4096];
        x[1500] = 1.0;
        let cfg = StftConfig::default();
        let w = istft(
            &stft(&Waveform::new(x, 16_000).unwrap(), &cfg).unwrap(),
            &cfg,
        )
        .unwrap();
        for (i, s) in w.samples().iter().enumerate().take(4096) {
            let expect = if i == 1500 { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(*s, expect, epsilon = 1e-6);
        }
    }

    #[test]
    fn istft_rejects_wrong_bin_count() {
        let spec = ComplexSpectrogram::new(Array2::zeros((2, 100))).unwrap();
        assert!(matches!(
            istft(&spec, &StftConfig::default()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn non_cola_config_is_rejected() {
        let cfg = StftConfig {
            fft_size: 512,
            win_len: 512,
            hop: 200,
            window: Window::Hann,
        };
        assert!(cfg.validate().is_err());
        assert!(StftConfig::default().validate().is_ok());
    }

    #[test]
    fn lps_scalar_cases() {
        let frames = Array2::from_shape_vec(
            (1, 3),
            vec![
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(2.0, 0.0),
            ],
        )
        .unwrap();
        let l = lps(&ComplexSpectrogram::new(frames).unwrap(), 1e-12).unwrap();
        assert_abs_diff_eq!(l.values()[[0, 0]], -27.631021115928547, epsilon = 1e-9);
        assert_eq!(l.values()[[0, 1]], 0.0);
        assert_abs_diff_eq!(l.values()[[0, 2]], 4f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(l.values()[[0, 2]], 1.3863, epsilon = 1e-4);
    }

    #[test]
    fn reconstruct_with_own_lps_is_istft() {
        let cfg = StftConfig::default();
        let w = noise(8000, 3);
        let spec = stft(&w, &cfg).unwrap();
        let direct = istft(&spec, &cfg).unwrap();
        let via_lps = reconstruct(&lps(&spec, 1e-300).unwrap(), &spec, &cfg).unwrap();
        let r = 512..7488;
        assert!(rel_l2(&direct.samples()[r.clone()], &via_lps.samples()[r]) < 1e-6);
    }

    #[test]
    fn lps_offset_doubles_the_waveform() {
        let cfg = StftConfig::default();
        let w = noise(8000, 4);
        let spec = stft(&w, &cfg).unwrap();
        let shifted = lps(&spec, 1e-300)
            .unwrap()
            .values()
            .mapv(|v| v + 2.0 * 2f64.ln());
        let out = reconstruct(&LpsMatrix::new(shifted).unwrap(), &spec, &cfg).unwrap();
        let doubled: Vec<f64> = w.samples().iter().map(|s| 2.0 * s).collect();
        assert!(rel_l2(&doubled[512..7488], &out.samples()[512..7488]) < 1e-6);
    }

    #[test]
    fn floored_lps_reconstructs_near_silence() {
        let cfg = StftConfig::default();
        let spec = stft(&noise(4000, 5), &cfg).unwrap();
        let floor = LpsMatrix::new(Array2::from_elem(spec.frames().dim(), 1e-12f64.ln())).unwrap();
        let out = reconstruct(&floor, &spec, &cfg).unwrap();
        assert!(out.samples().iter().all(|s| s.abs() < 1e-5));
    }

    #[test]
    fn reconstruct_rejects_mismatched_dims() {
        let cfg = StftConfig::default();
        let spec = stft(&noise(4000, 6), &cfg).unwrap();
        let l = LpsMatrix::new(Array2::zeros((2, 257))).unwrap();
        assert!(matches!(
            reconstruct(&l, &spec, &cfg),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn norm_stats_cases() {
        let single =
            LpsMatrix::new(Array2::from_shape_vec((1, 2), vec![3.0, -1.0]).unwrap()).unwrap();
        let s = compute_norm_stats([&single]).unwrap();
        assert_eq!(s.mean, vec![3.0, -1.0]);
        assert_eq!(s.std, vec![STD_FLOOR, STD_FLOOR]);

        let two = LpsMatrix::new(Array2::from_shape_vec((2, 2), vec![0.0, 0.0, 2.0, 2.0]).unwrap())
            .unwrap();
        let s = compute_norm_stats([&two]).unwrap();
        assert_eq!(s.mean, vec![1.0, 1.0]);
        assert_eq!(s.std, vec![1.0, 1.0]);

        let constant = LpsMatrix::new(Array2::from_elem((5, 3), 7.5)).unwrap();
        let s = compute_norm_stats([&constant, &constant]).unwrap();
        let n = normalize(&constant, &s).unwrap();
        assert!(n.values().iter().all(|v| *v == 0.0));

        assert!(matches!(
            compute_norm_stats(std::iter::empty::<&LpsMatrix>()),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn normalize_scalar_and_mean_cases() {
        let s = NormStats {
            mean: vec![1.0],
            std: vec![2.0],
        };
        let x = LpsMatrix::new(Array2::from_elem((1, 1), 5.0)).unwrap();
        assert_eq!(normalize(&x, &s).unwrap().values()[[0, 0]], 2.0);
        let m = LpsMatrix::new(Array2::from_elem((3, 1), 1.0)).unwrap();
        assert!(normalize(&m, &s)
            .unwrap()
            .values()
            .iter()
            .all(|v| *v == 0.0));
        let bad = LpsMatrix::new(Array2::zeros((1, 2))).unwrap();
        assert!(normalize(&bad, &s).is_err());
        assert!(denormalize(&bad, &s).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn cola_round_trip(seed in any::<u64>(), hops in 4usize..40, extra in 0usize..256) {
            let cfg = StftConfig::default();
            let len = hops * cfg.hop + extra;
            let w = noise(len, seed);
            let back = istft(&stft(&w, &cfg).unwrap(), &cfg).unwrap();
            prop_assert!(back.len() >= len);
            let r = cfg.win_len..len - cfg.hop;
            prop_assert!(rel_l2(&w.samples()[r.clone()], &back.samples()[r]) < 1e-6);
        }

        #[test]
        fn lps_is_monotone_and_floored(a in 0.0f64..1e3, b in 0.0f64..1e3) {
            let frames = Array2::from_shape_vec((1, 2), vec![Complex64::new(a, 0.0), Complex64::new(0.0, b)]).unwrap();
            let l = lps(&ComplexSpectrogram::new(frames).unwrap(), 1e-12).unwrap();
            let (la, lb) = (l.values()[[0, 0]], l.values()[[0, 1]]);
            prop_assert!(la >= 1e-12f64.ln() && lb >= 1e-12f64.ln());
            if a < b { prop_assert!(la <= lb); } else { prop_assert!(la >= lb); }
        }

        #[test]
        fn normalize_round_trip(vals in proptest::collection::vec(-30.0f64..30.0, 12), mean in proptest::collection::vec(-10.0f64..10.0, 3), std in proptest::collection::vec(0.01f64..10.0, 3)) {
            let s = NormStats { mean, std };
            let x = LpsMatrix::new(Array2::from_shape_vec((4, 3), vals).unwrap()).unwrap();
            let back = denormalize(&normalize(&x, &s).unwrap(), &s).unwrap();
            for (a, b) in x.values().iter().zip(back.values()) {
                prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
            }
        }
    }
}
