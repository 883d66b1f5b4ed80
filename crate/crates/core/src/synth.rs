//! Speech-like test signals for desk-scale corpora.
//!
//! Utterances are a random sequence of voiced syllables (harmonic source with
//! a gliding pitch shaped by moving formant resonances), unvoiced fricative
//! bursts and pauses, over a faint noise floor. They exercise the same
//! spectro-temporal structure that reverberation smears, without needing a
//! recorded corpus.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::Waveform;
use crate::error::Result;

const PEAK: f64 = 0.5;
const NOISE_FLOOR: f64 = 1e-4;
const RAMP_S: f64 = 0.02;
/// Envelope control rate in samples.
const CONTROL: usize = 64;

#[derive(Debug, Clone, Copy)]
struct Formants {
    freq: [f64; 4],
}

impl Formants {
    const BANDWIDTH: [f64; 4] = [90.0, 110.0, 160.0, 220.0];
    const GAIN: [f64; 4] = [1.0, 0.55, 0.3, 0.15];

    fn random(rng: &mut ChaCha8Rng) -> Self {
        Self {
            freq: [
                rng.gen_range(300.0..850.0),
                rng.gen_range(850.0..2400.0),
                rng.gen_range(2300.0..3300.0),
                rng.gen_range(3500.0..4500.0),
            ],
        }
    }

    fn lerp(&self, other: &Self, t: f64) -> Self {
        let mut freq = [0.0; 4];
        for (i, f) in freq.iter_mut().enumerate() {
            *f = self.freq[i] + t * (other.freq[i] - self.freq[i]);
        }
        Self { freq }
    }

    /// Spectral envelope magnitude at `f` Hz, including a glottal tilt.
    fn gain(&self, f: f64) -> f64 {
        let resonance: f64 = (0..4)
            .map(|i| Self::GAIN[i] / (1.0 + ((f - self.freq[i]) / Self::BANDWIDTH[i]).powi(2)))
            .sum();
        resonance / (1.0 + f / 800.0)
    }
}

fn ramp(i: usize, len: usize, ramp: usize) -> f64 {
    let edge = i.min(len - 1 - i);
    if edge >= ramp {
        1.0
    } else {
        0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos()
    }
}

fn voiced(out: &mut [f64], fs: f64, rng: &mut ChaCha8Rng) {
    let len = out.len();
    let f0_start: f64 = rng.gen_range(90.0..240.0);
    let f0_end = f0_start * rng.gen_range(0.8..1.2);
    let (fa, fb) = (Formants::random(rng), Formants::random(rng));
    let n_harm = (0.5 * fs / f0_start.min(f0_end)).floor() as usize;
    let mut phases: Vec<f64> = (0..n_harm).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    let mut gains = vec![0.0; n_harm];
    let ramp_len = ((RAMP_S * fs) as usize).min(len / 2).max(1);
    for (i, o) in out.iter_mut().enumerate() {
        let t = i as f64 / len as f64;
        let f0 = f0_start + t * (f0_end - f0_start);
        if i % CONTROL == 0 {
            let shape = fa.lerp(&fb, t);
            for (k, g) in gains.iter_mut().enumerate() {
                let f = (k + 1) as f64 * f0;
                *g = if f < 0.5 * fs { shape.gain(f) } else { 0.0 };
            }
        }
        let mut acc = 0.0;
        for (k, (ph, g)) in phases.iter_mut().zip(&gains).enumerate() {
            *ph += 2.0 * PI * (k + 1) as f64 * f0 / fs;
            acc += g * ph.sin();
        }
        *o = acc * ramp(i, len, ramp_len);
    }
    for ph in phases.iter_mut() {
        *ph %= 2.0 * PI;
    }
}

fn unvoiced(out: &mut [f64], fs: f64, rng: &mut ChaCha8Rng) {
    let len = out.len();
    let ramp_len = ((0.01 * fs) as usize).min(len / 2).max(1);
    let level = rng.gen_range(0.05..0.2);
    let mut prev = 0.0;
    for (i, o) in out.iter_mut().enumerate() {
        let n: f64 = rng.gen_range(-1.0..1.0);
        *o = level * (n - 0.9 * prev) * ramp(i, len, ramp_len);
        prev = n;
    }
}

/// Speech-like utterance of `duration` seconds, deterministic in `seed`.
pub fn synth_utterance(duration: f64, seed: u64, sample_rate: u32) -> Result<Waveform> {
    let fs = sample_rate as f64;
    let n = (duration * fs).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; n];

    let mut pos = (rng.gen_range(0.02..0.15) * fs) as usize;
    while pos < n {
        let roll: f64 = rng.gen();
        let (secs, kind) = if roll < 0.55 {
            (rng.gen_range(0.12..0.35), 0)
        } else if roll < 0.72 {
            (rng.gen_range(0.05..0.15), 1)
        } else {
            (rng.gen_range(0.05..0.25), 2)
        };
        let end = (pos + (secs * fs) as usize).min(n);
        if end > pos + 1 {
            match kind {
                0 => voiced(&mut x[pos..end], fs, &mut rng),
                1 => unvoiced(&mut x[pos..end], fs, &mut rng),
                _ => {}
            }
        }
        pos = end;
    }

    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gain = if peak > 0.0 { PEAK / peak } else { 0.0 };
    for v in x.iter_mut() {
        *v = *v * gain + NOISE_FLOOR * rng.gen_range(-1.0..1.0);
    }
    Waveform::new(x, sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_bounded() {
        let a = synth_utterance(1.0, 5, 16_000).unwrap();
        let b = synth_utterance(1.0, 5, 16_000).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 16_000);
        assert!(a.samples().iter().all(|s| s.abs() <= PEAK + NOISE_FLOOR));
        assert_ne!(a, synth_utterance(1.0, 6, 16_000).unwrap());
    }

    #[test]
    fn has_pauses_and_activity() {
        let w = synth_utterance(2.0, 1, 16_000).unwrap();
        let frames: Vec<f64> = w
            .samples()
            .chunks(400)
            .map(|c| (c.iter().map(|s| s * s).sum::<f64>() / c.len() as f64).sqrt())
            .collect();
        assert!(frames.iter().any(|r| *r < 1e-3));
        assert!(frames.iter().any(|r| *r > 0.03));
    }
}
