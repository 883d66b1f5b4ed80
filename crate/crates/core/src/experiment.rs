//! End-to-end workflows over manifests: feature preparation, training,
//! evaluation, attention profiles and the context-size sweep.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::attention::{weight_records, WeightRecord};
use crate::config::RunConfig;
use crate::corpus::Manifest;
use crate::dsp::{
    compute_norm_stats, normalize, waveform_lps, LpsMatrix, NormStats, StftConfig, Waveform,
};
use crate::error::{Error, Result};
use crate::metrics::{bucket_of, fwsegsnr, lsd, MetricMeans, UttMetrics, BUCKET_WIDTH};
use crate::network::{Dereverberator, Model, ModelKind};
use crate::trainer::{fit, EpochLog, FitResult, Utterance};
use crate::wav::read_wav;

/// A reverberant/anechoic pair read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub id: String,
    pub rt60: f64,
    pub reverberant: Waveform,
    pub anechoic: Waveform,
}

pub fn load_pairs(m: &Manifest) -> Result<Vec<Pair>> {
    if m.is_empty() {
        return Err(Error::EmptyInput);
    }
    m.records
        .iter()
        .map(|r| {
            let reverberant = read_wav(m.reverberant_path(r))?;
            let anechoic = read_wav(m.anechoic_path(r))?;
            if reverberant.len() != anechoic.len() {
                return Err(Error::Dimension(format!(
                    "{}: reverberant and anechoic lengths differ",
                    r.id
                )));
            }
            Ok(Pair {
                id: r.id.clone(),
                rt60: r.rt60,
                reverberant,
                anechoic,
            })
        })
        .collect()
}

/// Normalization statistics of the reverberant training features.
pub fn corpus_stats(pairs: &[Pair], stft: &StftConfig, power_floor: f64) -> Result<NormStats> {
    let lps: Vec<LpsMatrix> = pairs
        .iter()
        .map(|p| waveform_lps(&p.reverberant, stft, power_floor))
        .collect::<Result<_>>()?;
    compute_norm_stats(&lps)
}

/// Normalized features; targets use the reverberant statistics as well.
pub fn to_utterances(
    pairs: &[Pair],
    stft: &StftConfig,
    power_floor: f64,
    stats: &NormStats,
) -> Result<Vec<Utterance>> {
    pairs
        .iter()
        .map(|p| {
            Ok(Utterance {
                id: p.id.clone(),
                y: normalize(&waveform_lps(&p.reverberant, stft, power_floor)?, stats)?,
                x: normalize(&waveform_lps(&p.anechoic, stft, power_floor)?, stats)?,
                z: p.rt60,
            })
        })
        .collect()
}

/// Trains the configured model; statistics come from `train` only.
pub fn train_model(
    cfg: &RunConfig,
    train: &[Pair],
    val: &[Pair],
    on_epoch: impl FnMut(&EpochLog),
) -> Result<(Dereverberator, FitResult)> {
    train_model_with_stats(cfg, train, val, None, on_epoch)
}

/// As [`train_model`], with optional precomputed normalization statistics.
pub fn train_model_with_stats(
    cfg: &RunConfig,
    train: &[Pair],
    val: &[Pair],
    stats: Option<NormStats>,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<(Dereverberator, FitResult)> {
    cfg.validate()?;
    let floor = cfg.features.power_floor;
    let stats = match stats {
        Some(s) if s.n_bins() != cfg.stft.n_bins() => {
            return Err(Error::Dimension(format!(
                "statistics cover {} bins, features have {}",
                s.n_bins(),
                cfg.stft.n_bins()
            )))
        }
        Some(s) => s,
        None => corpus_stats(train, &cfg.stft, floor)?,
    };
    let train_u = to_utterances(train, &cfg.stft, floor, &stats)?;
    let val_u = to_utterances(val, &cfg.stft, floor, &stats)?;
    let model = Model::new(cfg.model.clone(), cfg.stft.n_bins(), cfg.model_seed())?;
    log::info!(
        "training {} ({} parameters) on {} utterances",
        cfg.model.kind.name(),
        model.n_params(),
        train.len()
    );
    let result = fit(
        model,
        &train_u,
        &val_u,
        &cfg.train,
        cfg.shuffle_seed(),
        on_epoch,
    )?;
    let d = Dereverberator {
        model: result.model.clone(),
        stats,
        stft: cfg.stft,
        power_floor: floor,
        config_hash: cfg.hash(),
    };
    Ok((d, result))
}

/// Metrics of reverberant input and enhanced output against the anechoic
/// reference.
pub fn utt_metrics(
    pair: &Pair,
    enhanced: &Waveform,
    stft: &StftConfig,
    power_floor: f64,
) -> Result<UttMetrics> {
    let x = waveform_lps(&pair.anechoic, stft, power_floor)?;
    Ok(UttMetrics {
        id: pair.id.clone(),
        rt60: pair.rt60,
        fwsegsnr_reverb: fwsegsnr(&pair.anechoic, &pair.reverberant)?,
        fwsegsnr_enhanced: fwsegsnr(&pair.anechoic, enhanced)?,
        lsd_reverb: lsd(&x, &waveform_lps(&pair.reverberant, stft, power_floor)?)?,
        lsd_enhanced: lsd(&x, &waveform_lps(enhanced, stft, power_floor)?)?,
    })
}

/// Enhances every pair in memory and scores it.
pub fn evaluate_model(d: &Dereverberator, pairs: &[Pair]) -> Result<Vec<UttMetrics>> {
    pairs
        .iter()
        .map(|p| {
            let out = d.predict(&p.reverberant, false)?;
            utt_metrics(p, &out.waveform, &d.stft, d.power_floor)
        })
        .collect()
}

/// Mean attention weight at one context offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionRow {
    pub offset: isize,
    pub bucket: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub band: Option<usize>,
    pub frames: usize,
    pub raw_weight: f64,
    /// `raw_weight` divided by the offset-0 weight of the same group.
    pub normalized_weight: f64,
}

/// Mean attention per context offset, grouped by RT60 bucket and, for
/// subband models, by band.
pub fn attention_profile(d: &Dereverberator, pairs: &[Pair]) -> Result<Vec<AttentionRow>> {
    let model = &d.model;
    if model.spec.kind == ModelKind::Baseline {
        return Err(Error::NoAttention(model.spec.kind.name().into()));
    }
    let c = model.spec.context;
    let half = (c / 2) as isize;
    let bands = model.partition.n_bands();
    // (bucket, band) -> (sums per slot, frame count)
    let mut acc: BTreeMap<(usize, usize), (Vec<f64>, usize)> = BTreeMap::new();
    for p in pairs {
        let y = d.normalized_lps(&p.reverberant)?;
        let out = model.run(&y, false)?;
        let a = out.weights.expect("attention model");
        let bucket = bucket_of(p.rt60);
        for band in 0..bands {
            let e = acc
                .entry((bucket, band))
                .or_insert_with(|| (vec![0.0; c], 0));
            for t in 0..a.n_frames() {
                for (s, w) in e.0.iter_mut().zip(a.row(t, band)) {
                    *s += w;
                }
            }
            e.1 += a.n_frames();
        }
    }
    let mut rows = Vec::new();
    for ((bucket, band), (sums, n)) in acc {
        let means: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
        let center = means[half as usize];
        for (j, m) in means.iter().enumerate() {
            rows.push(AttentionRow {
                offset: j as isize - half,
                bucket,
                band: (bands > 1).then_some(band),
                frames: n,
                raw_weight: *m,
                normalized_weight: if j as isize == half { 1.0 } else { m / center },
            });
        }
    }
    Ok(rows)
}

/// Per-frame attention rows of every pair, ready for line-delimited export.
pub fn export_weights(d: &Dereverberator, pairs: &[Pair]) -> Result<Vec<WeightRecord>> {
    if d.model.spec.kind == ModelKind::Baseline {
        return Err(Error::NoAttention(d.model.spec.kind.name().into()));
    }
    let mut out = Vec::new();
    for p in pairs {
        let out_p = d.model.run(&d.normalized_lps(&p.reverberant)?, false)?;
        let a = out_p.weights.expect("attention model");
        out.extend(weight_records(&p.id, p.rt60, &a));
    }
    Ok(out)
}

pub fn attention_csv(rows: &[AttentionRow]) -> String {
    let banded = rows.iter().any(|r| r.band.is_some());
    let mut out = String::from(if banded {
        "offset,bucket,band,normalized_weight\n"
    } else {
        "offset,bucket,normalized_weight\n"
    });
    for r in rows {
        let bucket = format!(
            "{:.1}-{:.1}",
            r.bucket as f64 * BUCKET_WIDTH,
            (r.bucket + 1) as f64 * BUCKET_WIDTH
        );
        match r.band {
            Some(b) => writeln!(out, "{},{},{},{}", r.offset, bucket, b, r.normalized_weight),
            None => writeln!(out, "{},{},{}", r.offset, bucket, r.normalized_weight),
        }
        .expect("write to string");
    }
    out
}

/// Whether offset 0 carries the largest mean weight in every group.
pub fn center_dominates(rows: &[AttentionRow]) -> bool {
    let mut groups: BTreeMap<(usize, Option<usize>), Vec<&AttentionRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.bucket, r.band)).or_default().push(r);
    }
    groups.values().all(|g| {
        let center = g.iter().find(|r| r.offset == 0).map(|r| r.raw_weight);
        center.is_some_and(|c| g.iter().all(|r| r.offset == 0 || r.raw_weight < c))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub context: usize,
    pub best_val_loss: f64,
    #[serde(flatten)]
    pub means: MetricMeans,
    pub config_hash: String,
}

/// Trains and evaluates one model per context size.
pub fn sweep_context(
    cfg: &RunConfig,
    contexts: &[usize],
    train: &[Pair],
    val: &[Pair],
    test: &[Pair],
) -> Result<Vec<SweepRow>> {
    if contexts.is_empty() {
        return Err(Error::Config("empty context list".into()));
    }
    contexts
        .iter()
        .map(|&c| {
            let mut run = cfg.clone();
            run.model.context = c;
            let (d, fit) = train_model(&run, train, val, |_| {})?;
            let metrics = evaluate_model(&d, test)?;
            let best = fit
                .log
                .iter()
                .map(|e| e.val_loss)
                .fold(f64::INFINITY, f64::min);
            Ok(SweepRow {
                context: c,
                best_val_loss: best,
                means: MetricMeans::of(&metrics),
                config_hash: run.hash(),
            })
        })
        .collect()
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = format!(
        "{:>3} {:>10} {:>12} {:>12} {:>10} {:>10}\n",
        "c", "val_loss", "fwSegSNR_in", "fwSegSNR_out", "LSD_in", "LSD_out"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:>3} {:>10.4} {:>12.2} {:>12.2} {:>10.2} {:>10.2}",
            r.context,
            r.best_val_loss,
            r.means.fwsegsnr_reverb,
            r.means.fwsegsnr_enhanced,
            r.means.lsd_reverb,
            r.means.lsd_enhanced
        );
    }
    out
}
