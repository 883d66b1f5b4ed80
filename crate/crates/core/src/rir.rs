//! Room impulse responses: image-source synthesis in a shoebox room,
//! Schroeder RT60 measurement, and construction of aligned
//! (reverberant, direct-path) training pairs.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dsp::Waveform;
use crate::error::{Error, Result};

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;
/// Sabine constant (s/m) for air at room temperature.
pub const SABINE_CONSTANT: f64 = 0.1611;
pub const MAX_ABSORPTION: f64 = 0.9999;
/// Range of RT60 labels.
pub const RT60_LABEL_RANGE: (f64, f64) = (0.01, 1.0);

const KERNEL_HALF: usize = 40;
const KERNEL_TAPS: usize = 2 * KERNEL_HALF + 1;
const KERNEL_STEPS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(untagged)]
pub enum MaxOrder {
    #[default]
    #[serde(with = "auto_tag")]
    Auto,
    Limit(u32),
}

mod auto_tag {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("auto")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let s = String::deserialize(d)?;
        if s == "auto" {
            Ok(())
        } else {
            Err(serde::de::Error::custom("expected \"auto\" or an integer"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomConfig {
    /// Length, width, height in metres.
    pub dims: [f64; 3],
    pub source: [f64; 3],
    pub mic: [f64; 3],
    pub target_rt60: f64,
    pub speed_of_sound: f64,
    #[serde(default)]
    pub max_order: MaxOrder,
}

impl RoomConfig {
    pub fn new(dims: [f64; 3], source: [f64; 3], mic: [f64; 3], target_rt60: f64) -> Self {
        Self {
            dims,
            source,
            mic,
            target_rt60,
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
            max_order: MaxOrder::Auto,
        }
    }

    pub fn volume(&self) -> f64 {
        self.dims.iter().product()
    }

    pub fn surface(&self) -> f64 {
        let [l, w, h] = self.dims;
        2.0 * (l * w + l * h + w * h)
    }

    pub fn distance(&self) -> f64 {
        dist(&self.source, &self.mic)
    }

    /// Smallest distance from `p` to any wall.
    pub fn wall_clearance(&self, p: &[f64; 3]) -> f64 {
        (0..3)
            .map(|a| p[a].min(self.dims[a] - p[a]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::Geometry(format!(
                "room dimensions must be positive: {:?}",
                self.dims
            )));
        }
        for (what, p) in [("source", &self.source), ("microphone", &self.mic)] {
            if !(self.wall_clearance(p) > 0.0) {
                return Err(Error::Geometry(format!(
                    "{what} {p:?} is outside the room {:?}",
                    self.dims
                )));
            }
        }
        if !(self.target_rt60 > 0.0) || !(self.speed_of_sound > 0.0) {
            return Err(Error::Geometry(
                "target RT60 and speed of sound must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Uniform wall absorption coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Absorption {
    pub alpha: f64,
    /// The target reverberation time cannot be reached in this room; alpha
    /// was clamped to [`MAX_ABSORPTION`].
    pub clamped: bool,
}

pub fn sabine_absorption(dims: [f64; 3], target_rt60: f64) -> Result<Absorption> {
    if !(target_rt60 > 0.0) {
        return Err(Error::Geometry("target RT60 must be positive".into()));
    }
    let [l, w, h] = dims;
    let volume = l * w * h;
    let surface = 2.0 * (l * w + l * h + w * h);
    let alpha = SABINE_CONSTANT * volume / (surface * target_rt60);
    if alpha >= 1.0 {
        log::warn!(
            "reverberation target unreachable for this room: {target_rt60} s in {dims:?} needs alpha {alpha:.3}"
        );
        Ok(Absorption {
            alpha: MAX_ABSORPTION,
            clamped: true,
        })
    } else {
        Ok(Absorption {
            alpha,
            clamped: false,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rir {
    pub h: Waveform,
    pub direct_path_index: usize,
    /// Room the response was simulated in; `None` for recorded responses.
    pub scenario: Option<RoomConfig>,
    pub seed: u64,
}

impl Rir {
    /// Wraps a recorded response. The direct path is taken as the global
    /// peak since the geometry is unknown.
    pub fn from_recording(h: Waveform, seed: u64) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::EmptyInput);
        }
        let direct_path_index = argmax_abs(h.samples());
        Ok(Self {
            h,
            direct_path_index,
            scenario: None,
            seed,
        })
    }
}

fn argmax_abs(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in x.iter().enumerate() {
        if v.abs() > x[best].abs() {
            best = i;
        }
    }
    best
}

/// Hann-windowed sinc tables indexed by fractional offset in [-0.5, 0.5].
fn kernel_table() -> &'static [[f64; KERNEL_TAPS]] {
    static TABLE: OnceLock<Vec<[f64; KERNEL_TAPS]>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..=KERNEL_STEPS)
            .map(|q| {
                let frac = -0.5 + q as f64 / KERNEL_STEPS as f64;
                let mut taps = [0.0; KERNEL_TAPS];
                for (j, tap) in taps.iter_mut().enumerate() {
                    let t = j as f64 - KERNEL_HALF as f64 - frac;
                    if t.abs() < KERNEL_TAPS as f64 / 2.0 {
                        let window = 0.5 * (1.0 + (2.0 * PI * t / KERNEL_TAPS as f64).cos());
                        let sinc = if t == 0.0 {
                            1.0
                        } else {
                            (PI * t).sin() / (PI * t)
                        };
                        *tap = window * sinc;
                    }
                }
                taps
            })
            .collect()
    })
}

fn add_fractional_impulse(h: &mut [f64], delay: f64, amplitude: f64) {
    let centre = delay.round();
    let frac = delay - centre;
    let pos = (frac + 0.5) * KERNEL_STEPS as f64;
    let q = (pos.floor() as usize).min(KERNEL_STEPS - 1);
    let mix = pos - q as f64;
    let table = kernel_table();
    let (lo, hi) = (&table[q], &table[q + 1]);
    let first = centre as i64 - KERNEL_HALF as i64;
    for j in 0..KERNEL_TAPS {
        let n = first + j as i64;
        if n < 0 {
            continue;
        }
        let Some(slot) = h.get_mut(n as usize) else {
            break;
        };
        *slot += amplitude * (lo[j] + mix * (hi[j] - lo[j]));
    }
}

const CALIBRATION_TOLERANCE: f64 = 0.02;
const CALIBRATION_ROUNDS: usize = 8;

/// Image-source room impulse response that realises `cfg.target_rt60`.
///
/// Starts from the Sabine absorption and refines the uniform coefficient by
/// fixed-point iteration on `-ln(1 - alpha)` until the Schroeder T20 of the
/// rendered response is within 2% of the target. A shoebox with uniform
/// absorption decays more slowly than the diffuse-field prediction, so the
/// Sabine value alone overshoots long targets.
pub fn simulate_rir(cfg: &RoomConfig, sample_rate: u32, seed: u64) -> Result<Rir> {
    cfg.validate()?;
    let sabine = sabine_absorption(cfg.dims, cfg.target_rt60)?;
    let mut alpha = sabine.alpha;
    let mut rir = simulate_rir_with_absorption(cfg, alpha, sample_rate, seed)?;
    if sabine.clamped {
        return Ok(rir);
    }
    for _ in 0..CALIBRATION_ROUNDS {
        let Ok(measured) = measure_rt60(&rir) else {
            break;
        };
        let ratio = measured / cfg.target_rt60;
        if (ratio - 1.0).abs() <= CALIBRATION_TOLERANCE {
            break;
        }
        let rate = -(1.0 - alpha).ln() * ratio;
        alpha = (1.0 - (-rate).exp()).clamp(1e-6, MAX_ABSORPTION);
        rir = simulate_rir_with_absorption(cfg, alpha, sample_rate, seed)?;
    }
    Ok(rir)
}

/// Allen-Berkley image-source summation with a fixed uniform absorption
/// coefficient. Each image contributes `(1 - alpha)^(n/2) / (4 pi d)` at
/// fractional delay `d / c`, rendered with an 81-tap Hann-windowed sinc.
pub fn simulate_rir_with_absorption(
    cfg: &RoomConfig,
    alpha: f64,
    sample_rate: u32,
    seed: u64,
) -> Result<Rir> {
    cfg.validate()?;
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Geometry(format!(
            "absorption {alpha} outside [0, 1)"
        )));
    }
    let beta = (1.0 - alpha).sqrt();
    let fs = sample_rate as f64;
    let c = cfg.speed_of_sound;

    let direct_delay = cfg.distance() / c * fs;
    let len = ((1.2 * cfg.target_rt60 * fs).ceil() as usize)
        .max(direct_delay.ceil() as usize + KERNEL_HALF + 1);
    // Images further than this arrive entirely after the end of the response.
    let max_dist = (len + KERNEL_HALF) as f64 / fs * c;
    let max_dist_sq = max_dist * max_dist;
    let order_limit = match cfg.max_order {
        MaxOrder::Auto => u32::MAX,
        MaxOrder::Limit(o) => o,
    };

    // Per-axis candidate offsets: (delta, reflection count).
    let axis_terms = |axis: usize| -> Vec<(f64, u32)> {
        let l = cfg.dims[axis];
        let (s, m) = (cfg.source[axis], cfg.mic[axis]);
        let reach = (max_dist / (2.0 * l)).ceil() as i64 + 1;
        let mut terms = Vec::new();
        for k in -reach..=reach {
            for p in 0..2i64 {
                let pos = (1 - 2 * p) as f64 * s + 2.0 * k as f64 * l;
                let delta = pos - m;
                if delta * delta > max_dist_sq {
                    continue;
                }
                let n = ((k - p).abs() + k.abs()) as u32;
                if n <= order_limit {
                    terms.push((delta, n));
                }
            }
        }
        terms
    };
    let (xs, ys, zs) = (axis_terms(0), axis_terms(1), axis_terms(2));

    let mut h = vec![0.0; len];
    for &(dx, nx) in &xs {
        for &(dy, ny) in &ys {
            let dxy = dx * dx + dy * dy;
            if dxy > max_dist_sq {
                continue;
            }
            for &(dz, nz) in &zs {
                let d2 = dxy + dz * dz;
                if d2 > max_dist_sq {
                    continue;
                }
                let n = nx + ny + nz;
                if n > order_limit {
                    continue;
                }
                let d = d2.sqrt();
                let amplitude = beta.powi(n as i32) / (4.0 * PI * d);
                add_fractional_impulse(&mut h, d / c * fs, amplitude);
            }
        }
    }

    let search_end = ((direct_delay + 0.001 * fs).floor() as usize + 1).min(len);
    let direct_path_index = argmax_abs(&h[..search_end]);
    Ok(Rir {
        h: Waveform::new(h, sample_rate)?,
        direct_path_index,
        scenario: Some(*cfg),
        seed,
    })
}

/// Schroeder energy decay curve in dB, normalised to 0 dB at the start.
pub fn schroeder_curve(h: &[f64]) -> Vec<f64> {
    let mut edc = vec![0.0; h.len()];
    let mut acc = 0.0;
    for (i, v) in h.iter().enumerate().rev() {
        acc += v * v;
        edc[i] = acc;
    }
    let total = edc.first().copied().unwrap_or(0.0);
    edc.iter()
        .map(|e| {
            if total > 0.0 && *e > 0.0 {
                10.0 * (e / total).log10()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

/// T20 reverberation time: least-squares fit of the Schroeder curve between
/// -5 dB and -25 dB, extrapolated to 60 dB of decay.
pub fn measure_rt60(rir: &Rir) -> Result<f64> {
    let fs = rir.h.sample_rate() as f64;
    let curve = schroeder_curve(rir.h.samples());
    let start = curve.iter().position(|v| *v <= -5.0);
    let end = curve.iter().position(|v| *v <= -25.0);
    let (Some(start), Some(end)) = (start, end) else {
        return Err(Error::DecayTooShort);
    };
    let min_span = (fs / 1000.0).ceil() as usize;
    if end < start + min_span || !curve[end].is_finite() {
        return Err(Error::DecayTooShort);
    }

    let n = (end - start + 1) as f64;
    let (mut sx, mut sy, mut sxy, mut sxx) = (0.0, 0.0, 0.0, 0.0);
    for (i, y) in curve.iter().enumerate().take(end + 1).skip(start) {
        let x = (i - start) as f64 / fs;
        sx += x;
        sy += y;
        sxy += x * y;
        sxx += x * x;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    if !(slope < 0.0) {
        return Err(Error::DecayTooShort);
    }
    Ok(-60.0 / slope)
}

/// Aligned reverberant / direct-path pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ReverbPair {
    pub reverberant: Waveform,
    pub anechoic: Waveform,
    pub rt60_true: f64,
    pub scenario: Option<RoomConfig>,
    pub seed: u64,
}

/// RT60 label for a response: the measured value, falling back to the
/// simulation target (or the lower end of the label range for recordings)
/// when there is no measurable decay, clamped to [`RT60_LABEL_RANGE`].
pub fn rt60_label(rir: &Rir) -> f64 {
    let value = match measure_rt60(rir) {
        Ok(v) => v,
        Err(_) => rir
            .scenario
            .map(|s| s.target_rt60)
            .unwrap_or(RT60_LABEL_RANGE.0),
    };
    value.clamp(RT60_LABEL_RANGE.0, RT60_LABEL_RANGE.1)
}

pub fn make_pair(clean: &Waveform, rir: &Rir) -> Result<ReverbPair> {
    if clean.is_empty() || rir.h.is_empty() {
        return Err(Error::EmptyInput);
    }
    if clean.sample_rate() != rir.h.sample_rate() {
        return Err(Error::Audio(format!(
            "clean speech at {} Hz, RIR at {} Hz",
            clean.sample_rate(),
            rir.h.sample_rate()
        )));
    }
    let n = clean.len();
    let full = convolve(clean.samples(), rir.h.samples());
    let start = rir.direct_path_index;
    let mut y: Vec<f64> = full.iter().skip(start).take(n).copied().collect();
    y.resize(n, 0.0);
    let gain = rir.h.samples()[start];
    Ok(ReverbPair {
        reverberant: Waveform::new(y, clean.sample_rate())?,
        anechoic: clean.scaled(gain),
        rt60_true: rt60_label(rir),
        scenario: rir.scenario,
        seed: rir.seed,
    })
}

/// Full linear convolution. Short kernels are convolved directly, long ones
/// through a single zero-padded FFT.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= 128 {
        let mut out = vec![0.0; out_len];
        for (i, x) in a.iter().enumerate() {
            if *x == 0.0 {
                continue;
            }
            for (j, k) in b.iter().enumerate() {
                out[i + j] += x * k;
            }
        }
        return out;
    }
    let n = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let pad = |x: &[f64]| {
        let mut v: Vec<Complex64> = x.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        v.resize(n, Complex64::new(0.0, 0.0));
        v
    };
    let mut fa = pad(a);
    let mut fb = pad(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    fa.iter().take(out_len).map(|c| c.re / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mid_room(rt60: f64) -> RoomConfig {
        RoomConfig::new([6.0, 5.0, 3.0], [2.0, 1.5, 1.4], [4.1, 3.2, 1.6], rt60)
    }

    #[test]
    fn sabine_hand_value() {
        // 5 x 5 x 4 m: V = 100, S = 130.
        let a = sabine_absorption([5.0, 5.0, 4.0], 0.5).unwrap();
        assert!(!a.clamped);
        assert_abs_diff_eq!(a.alpha, 0.1611 * 100.0 / (130.0 * 0.5), epsilon = 1e-12);
        assert_abs_diff_eq!(a.alpha, 0.2478, epsilon = 1e-4);
    }

    #[test]
    fn sabine_limit_and_clamp() {
        let a = sabine_absorption([5.0, 5.0, 4.0], 1e9).unwrap();
        assert!(a.alpha < 1e-9);
        let c = sabine_absorption([3.0, 3.0, 2.5], 0.01).unwrap();
        assert!(c.clamped);
        assert_eq!(c.alpha, MAX_ABSORPTION);
        assert!(sabine_absorption([3.0, 3.0, 2.5], 0.0).is_err());
    }

    #[test]
    fn anechoic_limit_is_a_single_spike() {
        let cfg = RoomConfig::new([10.0, 8.0, 6.0], [4.5, 4.0, 3.0], [5.5, 4.0, 3.0], 0.01);
        let rir = simulate_rir(&cfg, 16_000, 0).unwrap();
        let h = rir.h.samples();
        let total: f64 = h.iter().map(|v| v * v).sum();
        let after: f64 = h
            .iter()
            .skip(rir.direct_path_index + KERNEL_HALF + 1)
            .map(|v| v * v)
            .sum();
        assert!(after / total < 1e-4, "tail fraction {}", after / total);
    }

    #[test]
    fn simulated_rt60_near_target() {
        let rir = simulate_rir(&mid_room(0.5), 16_000, 1).unwrap();
        let rt = measure_rt60(&rir).unwrap();
        assert!((rt - 0.5).abs() <= 0.1, "measured {rt}");
        assert!(rir.h.len() as f64 >= 1.2 * 0.5 * 16_000.0);
    }

    #[test]
    fn simulation_is_deterministic() {
        let a = simulate_rir(&mid_room(0.3), 16_000, 9).unwrap();
        let b = simulate_rir(&mid_room(0.3), 16_000, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn direct_path_index_matches_geometry() {
        let cfg = mid_room(0.4);
        let rir = simulate_rir(&cfg, 16_000, 0).unwrap();
        let expect = (cfg.distance() / cfg.speed_of_sound * 16_000.0).round() as i64;
        assert!((rir.direct_path_index as i64 - expect).abs() <= 2);
    }

    #[test]
    fn source_outside_room_is_rejected() {
        let mut cfg = mid_room(0.4);
        cfg.source = [7.0, 1.0, 1.0];
        assert!(matches!(
            simulate_rir(&cfg, 16_000, 0),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn order_limit_zero_keeps_only_direct_path() {
        let mut cfg = mid_room(0.4);
        cfg.max_order = MaxOrder::Limit(0);
        let rir = simulate_rir(&cfg, 16_000, 0).unwrap();
        let nonzero: Vec<usize> = (0..rir.h.len())
            .filter(|&i| rir.h.samples()[i] != 0.0)
            .collect();
        assert!(nonzero.last().unwrap() - nonzero.first().unwrap() <= 2 * KERNEL_HALF);
    }

    fn decaying_noise(rt60: f64, seed: u64) -> Rir {
        // Energy decays as exp(-2t/tau), so 60 dB takes tau * ln(1e6) / 2.
        let tau = rt60 / (0.5 * 1e6f64.ln());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h: Vec<f64> = (0..16_000)
            .map(|i| (-(i as f64 / 16_000.0) / tau).exp() * rng.gen_range(-1.0..1.0))
            .collect();
        Rir::from_recording(Waveform::new(h, 16_000).unwrap(), seed).unwrap()
    }

    #[test]
    fn exponential_decay_oracle() {
        let rir = decaying_noise(0.4, 11);
        let rt = measure_rt60(&rir).unwrap();
        assert!((rt - 0.4).abs() <= 0.04, "measured {rt}");
    }

    #[test]
    fn pure_impulse_has_no_decay() {
        let mut h = vec![0.0; 1000];
        h[10] = 1.0;
        let rir = Rir::from_recording(Waveform::new(h, 16_000).unwrap(), 0).unwrap();
        assert!(matches!(measure_rt60(&rir), Err(Error::DecayTooShort)));
        assert_eq!(rt60_label(&rir), RT60_LABEL_RANGE.0);
    }

    #[test]
    fn rt60_is_scale_invariant() {
        let rir = decaying_noise(0.6, 12);
        let scaled = Rir {
            h: rir.h.scaled(10.0),
            ..rir.clone()
        };
        let (a, b) = (measure_rt60(&rir).unwrap(), measure_rt60(&scaled).unwrap());
        assert!((a - b).abs() < 1e-9);
    }

    fn clean(len: usize, seed: u64) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Waveform::new((0..len).map(|_| rng.gen_range(-0.5..0.5)).collect(), 16_000).unwrap()
    }

    #[test]
    fn unit_impulse_pair_is_identity() {
        let s = clean(3000, 1);
        let rir = Rir::from_recording(Waveform::new(vec![1.0], 16_000).unwrap(), 0).unwrap();
        let p = make_pair(&s, &rir).unwrap();
        assert_eq!(p.reverberant, s);
        assert_eq!(p.anechoic, s);
    }

    #[test]
    fn delayed_half_impulse_pair() {
        let s = clean(3000, 2);
        let mut h = vec![0.0; 101];
        h[100] = 0.5;
        let rir = Rir::from_recording(Waveform::new(h, 16_000).unwrap(), 0).unwrap();
        assert_eq!(rir.direct_path_index, 100);
        let p = make_pair(&s, &rir).unwrap();
        let half = s.scaled(0.5);
        assert_eq!(p.reverberant, half);
        assert_eq!(p.anechoic, half);
    }

    #[test]
    fn reverberation_adds_energy() {
        let s = clean(16_000, 3);
        let rir = simulate_rir(&mid_room(0.4), 16_000, 0).unwrap();
        let p = make_pair(&s, &rir).unwrap();
        assert_eq!(p.reverberant.len(), p.anechoic.len());
        assert!(p.reverberant.energy() >= p.anechoic.energy());
        assert!(p.rt60_true > 0.0 && p.rt60_true <= 1.0);
    }

    #[test]
    fn pair_is_linear_in_the_clean_signal() {
        let s = clean(8000, 4);
        let rir = simulate_rir(&mid_room(0.3), 16_000, 0).unwrap();
        let a = 0.37;
        let p = make_pair(&s, &rir).unwrap();
        let q = make_pair(&s.scaled(a), &rir).unwrap();
        let rel = |x: &Waveform, y: &Waveform| {
            let num: f64 = x
                .samples()
                .iter()
                .zip(y.samples())
                .map(|(u, v)| (a * u - v).powi(2))
                .sum();
            (num / y.energy()).sqrt()
        };
        assert!(rel(&p.reverberant, &q.reverberant) < 1e-9);
        assert!(rel(&p.anechoic, &q.anechoic) < 1e-9);
    }

    #[test]
    fn fft_and_direct_convolution_agree() {
        let a = clean(500, 5).into_samples();
        let b = clean(300, 6).into_samples();
        let fast = convolve(&a, &b);
        let mut slow = vec![0.0; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                slow[i + j] += x * y;
            }
        }
        for (u, v) in fast.iter().zip(&slow) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-10);
        }
    }
}
