//! Objective dereverberation metrics and RT60-bucketed reporting.

use std::f64::consts::LN_10;
use std::fmt::Write as _;
use std::sync::Arc;

use rustfft::{num_complex::Complex64, Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dsp::{LpsMatrix, Waveform};
use crate::error::{Error, Result};

/// Settings of the frequency-weighted segmental SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FwSegSnrConfig {
    pub frame_s: f64,
    pub overlap: f64,
    pub bands: usize,
    pub gamma: f64,
    pub clamp: (f64, f64),
    /// Segments whose reference energy is below this level (dBFS) are skipped.
    pub gate_dbfs: f64,
}

impl Default for FwSegSnrConfig {
    fn default() -> Self {
        Self {
            frame_s: 0.025,
            overlap: 0.5,
            bands: 23,
            gamma: 0.2,
            clamp: (-10.0, 35.0),
            gate_dbfs: -60.0,
        }
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters equally spaced on the mel scale between 0 and
/// Nyquist, sampled at the `n_fft / 2 + 1` bin frequencies.
pub fn mel_filterbank(bands: usize, n_fft: usize, sample_rate: u32) -> Vec<Vec<f64>> {
    let nyq = sample_rate as f64 / 2.0;
    let top = hz_to_mel(nyq);
    let pts: Vec<f64> = (0..bands + 2)
        .map(|i| mel_to_hz(top * i as f64 / (bands + 1) as f64))
        .collect();
    let n_bins = n_fft / 2 + 1;
    (0..bands)
        .map(|b| {
            let (lo, mid, hi) = (pts[b], pts[b + 1], pts[b + 2]);
            (0..n_bins)
                .map(|k| {
                    let f = k as f64 * sample_rate as f64 / n_fft as f64;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect()
}

struct Analyzer {
    win: Vec<f64>,
    hop: usize,
    fft: Arc<dyn Fft<f64>>,
    n_fft: usize,
    filters: Vec<Vec<f64>>,
}

impl Analyzer {
    fn new(cfg: &FwSegSnrConfig, sample_rate: u32) -> Self {
        let len = (cfg.frame_s * sample_rate as f64).round() as usize;
        let hop = ((len as f64) * (1.0 - cfg.overlap)).round().max(1.0) as usize;
        let n_fft = len.next_power_of_two();
        let win = (0..len)
            .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos())
            .collect();
        Self {
            win,
            hop,
            fft: FftPlanner::new().plan_fft_forward(n_fft),
            n_fft,
            filters: mel_filterbank(cfg.bands, n_fft, sample_rate),
        }
    }

    fn frames(&self, n: usize) -> usize {
        let len = self.win.len();
        if n <= len {
            1
        } else {
            (n - len) / self.hop + 1
        }
    }

    /// Band energies of frame `i` from a magnitude spectrum normalized to
    /// unit area; all zeros for a silent frame.
    fn bands(&self, x: &[f64], i: usize) -> Vec<f64> {
        let start = i * self.hop;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n_fft];
        for (k, w) in self.win.iter().enumerate() {
            if let Some(s) = x.get(start + k) {
                buf[k] = Complex64::new(s * w, 0.0);
            }
        }
        self.fft.process(&mut buf);
        let mag: Vec<f64> = buf[..self.n_fft / 2 + 1].iter().map(|c| c.norm()).collect();
        let area: f64 = mag.iter().sum();
        let scale = if area > 0.0 { 1.0 / area } else { 0.0 };
        self.filters
            .iter()
            .map(|f| f.iter().zip(&mag).map(|(w, m)| w * m).sum::<f64>() * scale)
            .collect()
    }
}

/// Frequency-weighted segmental SNR in dB.
///
/// Per segment and band, `10 log10(E^2 / (E - E_hat)^2)` is clamped, then
/// averaged over bands with weights `E^gamma`. A band with zero error takes
/// the clamp ceiling.
pub fn fwsegsnr_with(
    reference: &Waveform,
    estimate: &Waveform,
    cfg: &FwSegSnrConfig,
) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(Error::Dimension(format!(
            "reference has {} samples, estimate {}",
            reference.len(),
            estimate.len()
        )));
    }
    if reference.sample_rate() != estimate.sample_rate() {
        return Err(Error::Audio("sample rates differ".into()));
    }
    if reference.is_empty() {
        return Err(Error::EmptyInput);
    }
    let an = Analyzer::new(cfg, reference.sample_rate());
    let (r, e) = (reference.samples(), estimate.samples());
    let len = an.win.len();
    let gate = 10f64.powf(cfg.gate_dbfs / 10.0);
    let mut total = 0.0;
    let mut used = 0usize;
    for i in 0..an.frames(r.len()) {
        let seg = &r[i * an.hop..(i * an.hop + len).min(r.len())];
        let power = seg.iter().map(|s| s * s).sum::<f64>() / seg.len() as f64;
        if power < gate {
            continue;
        }
        let (re, ee) = (an.bands(r, i), an.bands(e, i));
        let (mut num, mut den) = (0.0, 0.0);
        for (a, b) in re.iter().zip(&ee) {
            let err = (a - b).powi(2);
            let snr = if err == 0.0 {
                cfg.clamp.1
            } else {
                (10.0 * (a * a / err).log10()).clamp(cfg.clamp.0, cfg.clamp.1)
            };
            let w = a.powf(cfg.gamma);
            num += w * snr;
            den += w;
        }
        if den > 0.0 {
            total += num / den;
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::Audio(
            "reference has no segment above the silence gate".into(),
        ));
    }
    Ok(total / used as f64)
}

pub fn fwsegsnr(reference: &Waveform, estimate: &Waveform) -> Result<f64> {
    fwsegsnr_with(reference, estimate, &FwSegSnrConfig::default())
}

/// Log-spectral distance in dB: mean over frames of the RMS over bins of
/// `10 / ln 10 * (ref - est)`.
pub fn lsd(reference: &LpsMatrix, estimate: &LpsMatrix) -> Result<f64> {
    let (a, b) = (reference.values(), estimate.values());
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!("{:?} vs {:?}", a.dim(), b.dim())));
    }
    if a.is_empty() {
        return Err(Error::EmptyInput);
    }
    let k = 10.0 / LN_10;
    let per_frame: f64 = a
        .rows()
        .into_iter()
        .zip(b.rows())
        .map(|(ra, rb)| {
            let ms = ra
                .iter()
                .zip(rb.iter())
                .map(|(x, y)| (k * (x - y)).powi(2))
                .sum::<f64>()
                / ra.len() as f64;
            ms.sqrt()
        })
        .sum();
    Ok(per_frame / a.nrows() as f64)
}

/// Metrics of one utterance before (reverberant input) and after enhancement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UttMetrics {
    pub id: String,
    pub rt60: f64,
    pub fwsegsnr_reverb: f64,
    pub fwsegsnr_enhanced: f64,
    pub lsd_reverb: f64,
    pub lsd_enhanced: f64,
}

/// Means over a set of utterances.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricMeans {
    pub count: usize,
    pub fwsegsnr_reverb: f64,
    pub fwsegsnr_enhanced: f64,
    pub lsd_reverb: f64,
    pub lsd_enhanced: f64,
}

impl MetricMeans {
    pub fn of<'a>(items: impl IntoIterator<Item = &'a UttMetrics>) -> Self {
        let mut m = Self::default();
        for u in items {
            m.count += 1;
            m.fwsegsnr_reverb += u.fwsegsnr_reverb;
            m.fwsegsnr_enhanced += u.fwsegsnr_enhanced;
            m.lsd_reverb += u.lsd_reverb;
            m.lsd_enhanced += u.lsd_enhanced;
        }
        if m.count > 0 {
            let n = m.count as f64;
            m.fwsegsnr_reverb /= n;
            m.fwsegsnr_enhanced /= n;
            m.lsd_reverb /= n;
            m.lsd_enhanced /= n;
        }
        m
    }
}

pub const BUCKET_WIDTH: f64 = 0.1;
pub const N_BUCKETS: usize = 10;

/// Index of the 0.1 s RT60 bucket; values at or above 1 s fall in the last.
pub fn bucket_of(rt60: f64) -> usize {
    ((rt60 / BUCKET_WIDTH + 1e-9).floor().max(0.0) as usize).min(N_BUCKETS - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub bucket: usize,
    pub lo: f64,
    pub hi: f64,
    #[serde(flatten)]
    pub means: MetricMeans,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub config_hash: Option<String>,
    pub utterances: Vec<UttMetrics>,
    /// Populated buckets only, in increasing RT60 order.
    pub buckets: Vec<BucketRow>,
    pub overall: MetricMeans,
    /// Measures that need external systems; listed, never computed.
    pub external: Vec<String>,
}

pub fn bucket_report(utts: Vec<UttMetrics>, config_hash: Option<String>) -> MetricReport {
    let buckets = (0..N_BUCKETS)
        .filter_map(|b| {
            let means = MetricMeans::of(utts.iter().filter(|u| bucket_of(u.rt60) == b));
            (means.count > 0).then(|| BucketRow {
                bucket: b,
                lo: b as f64 * BUCKET_WIDTH,
                hi: (b + 1) as f64 * BUCKET_WIDTH,
                means,
            })
        })
        .collect();
    let overall = MetricMeans::of(&utts);
    MetricReport {
        config_hash,
        utterances: utts,
        buckets,
        overall,
        external: vec!["pesq".into(), "stoi".into(), "wer".into()],
    }
}

impl MetricReport {
    /// Aligned table with one column per populated bucket and an average.
    pub fn table(&self) -> String {
        let mut cols: Vec<(String, MetricMeans)> = self
            .buckets
            .iter()
            .map(|b| (format!("{:.1}-{:.1}", b.lo, b.hi), b.means))
            .collect();
        cols.push(("Avg.".into(), self.overall));
        let mut out = String::new();
        let _ = write!(out, "{:<22}", "RT60 (s)");
        for (name, _) in &cols {
            let _ = write!(out, "{name:>9}");
        }
        out.push('\n');
        let rows: [(&str, fn(&MetricMeans) -> f64); 4] = [
            ("fwSegSNR reverb (dB)", |m| m.fwsegsnr_reverb),
            ("fwSegSNR enhanced (dB)", |m| m.fwsegsnr_enhanced),
            ("LSD reverb (dB)", |m| m.lsd_reverb),
            ("LSD enhanced (dB)", |m| m.lsd_enhanced),
        ];
        for (label, get) in rows {
            let _ = write!(out, "{label:<22}");
            for (_, m) in &cols {
                let _ = write!(out, "{:>9.2}", get(m));
            }
            out.push('\n');
        }
        let _ = write!(out, "{:<22}", "utterances");
        for (_, m) in &cols {
            let _ = write!(out, "{:>9}", m.count);
        }
        out.push('\n');
        out
    }

    /// One JSON line per utterance, then one per bucket, then the average.
    pub fn json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for u in &self.utterances {
            let mut v = serde_json::to_value(u)?;
            v["bucket"] = bucket_of(u.rt60).into();
            v["config_hash"] = serde_json::to_value(&self.config_hash)?;
            out.push_str(&v.to_string());
            out.push('\n');
        }
        for b in &self.buckets {
            let mut v = serde_json::to_value(b)?;
            v["config_hash"] = serde_json::to_value(&self.config_hash)?;
            out.push_str(&v.to_string());
            out.push('\n');
        }
        let mut v = serde_json::to_value(self.overall)?;
        v["bucket"] = "avg".into();
        v["config_hash"] = serde_json::to_value(&self.config_hash)?;
        v["external"] = serde_json::to_value(&self.external)?;
        out.push_str(&v.to_string());
        out.push('\n');
        Ok(out)
    }
}
