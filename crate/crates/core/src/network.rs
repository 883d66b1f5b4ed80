//! Feed-forward estimators and the assembled dereverberation model.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{
    expand_context, glorot, partition_bands, sta_forward, AttentionParams, AttentionWeights,
    SubbandPartition,
};
use crate::dsp::{
    denormalize, istft, lps, normalize, reconstruct, stft, LpsMatrix, NormStats, StftConfig,
    Waveform,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
}

/// Fully connected layer computing `x W + b` for row-major batches.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// in x out
    pub weight: Array2<f64>,
    /// 1 x out
    pub bias: Array2<f64>,
}

impl Dense {
    pub fn random(input: usize, output: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            weight: glorot(input, output, rng),
            bias: Array2::zeros((1, output)),
        }
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight) + &self.bias
    }
}

/// Dense stack with ReLU on every hidden layer and a linear last layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    pub fn random(widths: &[usize], rng: &mut ChaCha8Rng) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::Config(format!("invalid layer widths {widths:?}")));
        }
        Ok(Self {
            layers: widths
                .windows(2)
                .map(|w| Dense::random(w[0], w[1], rng))
                .collect(),
        })
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.layers[0].weight.nrows()];
        w.extend(self.layers.iter().map(|l| l.weight.ncols()));
        w
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_width() {
            return Err(Error::Dimension(format!(
                "network expects {} input features, got {}",
                self.input_width(),
                x.ncols()
            )));
        }
        let last = self.layers.len() - 1;
        let mut h = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h);
            if i < last {
                h.mapv_inplace(|v| v.max(0.0));
            }
        }
        Ok(h)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Maps context features to one normalized LPS frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DereverbNet {
    pub mlp: Mlp,
}

impl DereverbNet {
    pub fn forward(&self, features: &Array2<f64>) -> Result<LpsMatrix> {
        LpsMatrix::new(self.mlp.forward(features)?)
    }
}

/// Maps attention rows to a per-frame RT60 in (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct Rt60Head {
    pub mlp: Mlp,
}

impl Rt60Head {
    pub fn forward(&self, a: &AttentionWeights) -> Result<Array1<f64>> {
        let out = self.mlp.forward(a.values())?;
        Ok(out.column(0).mapv(sigmoid))
    }
}

/// The two loss terms; the total is their unweighted sum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointLoss {
    pub derev: f64,
    pub rt60: f64,
}

impl JointLoss {
    pub fn total(&self) -> f64 {
        self.derev + self.rt60
    }
}

/// `mean((X - X_hat)^2) + mean((Z - Z_hat)^2)`; the RT60 term is zero when
/// no estimate is given.
pub fn joint_loss(
    x: &Array2<f64>,
    x_hat: &Array2<f64>,
    z: &Array1<f64>,
    z_hat: Option<&Array1<f64>>,
) -> Result<JointLoss> {
    if x.dim() != x_hat.dim() || x.is_empty() {
        return Err(Error::Dimension(format!(
            "target {:?} vs estimate {:?}",
            x.dim(),
            x_hat.dim()
        )));
    }
    let derev = (x - x_hat).mapv(|d| d * d).mean().unwrap();
    let rt60 = match z_hat {
        None => 0.0,
        Some(zh) => {
            if zh.len() != z.len() || z.len() != x.nrows() {
                return Err(Error::Dimension(format!(
                    "{} RT60 targets, {} estimates, {} frames",
                    z.len(),
                    zh.len(),
                    x.nrows()
                )));
            }
            (z - zh).mapv(|d| d * d).mean().unwrap()
        }
    };
    Ok(JointLoss { derev, rt60 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Baseline,
    Fta,
    Sta,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Baseline => "baseline",
            ModelKind::Fta => "fta",
            ModelKind::Sta => "sta",
        }
    }
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub rt60_head: bool,
    pub context: usize,
    pub subbands: usize,
    pub d_q: usize,
    /// Defaults to the (sub)band width.
    #[serde(default)]
    pub d_v: Option<usize>,
    pub derev_hidden: Vec<usize>,
    pub rt60_hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            kind: ModelKind::Sta,
            rt60_head: true,
            context: 9,
            subbands: 8,
            d_q: 64,
            d_v: None,
            derev_hidden: vec![2048, 2048, 2048],
            rt60_hidden: vec![64, 64],
            activation: Activation::Relu,
        }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.context.is_multiple_of(2) {
            return Err(Error::EvenContext(self.context));
        }
        if self.kind == ModelKind::Baseline && self.rt60_head {
            return Err(Error::Config(
                "the baseline has no attention rows to feed an RT60 head".into(),
            ));
        }
        if self.kind == ModelKind::Fta && self.subbands != 1 {
            log::debug!("full-band attention ignores subbands = {}", self.subbands);
        }
        if self.d_q == 0 || self.d_v == Some(0) {
            return Err(Error::Config(
                "attention dimensions must be at least 1".into(),
            ));
        }
        if self.derev_hidden.contains(&0) || self.rt60_hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be at least 1".into()));
        }
        Ok(())
    }

    /// Band partition used by the attention stage (one band for full-band).
    pub fn partition(&self, n_bins: usize) -> Result<SubbandPartition> {
        match self.kind {
            ModelKind::Sta => partition_bands(n_bins, self.subbands),
            _ => partition_bands(n_bins, 1),
        }
    }
}

/// Everything the plain forward path produces for one utterance.
#[derive(Debug, Clone)]
pub struct ModelOutput {
    pub x_hat: LpsMatrix,
    pub weights: Option<AttentionWeights>,
    pub z_hat: Option<Array1<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub n_bins: usize,
    pub partition: SubbandPartition,
    pub attention: Vec<AttentionParams>,
    pub derev: DereverbNet,
    pub rt60: Option<Rt60Head>,
}

impl Model {
    pub fn new(spec: ModelSpec, n_bins: usize, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let partition = spec.partition(n_bins)?;
        let c = spec.context;
        let attention: Vec<AttentionParams> = if spec.kind == ModelKind::Baseline {
            Vec::new()
        } else {
            (0..partition.n_bands())
                .map(|b| {
                    let w = partition.width(b);
                    AttentionParams::random(w, spec.d_q, spec.d_v.unwrap_or(w), &mut rng)
                })
                .collect()
        };
        let features = if spec.kind == ModelKind::Baseline {
            n_bins * c
        } else {
            attention.iter().map(|p| p.d_v() * c).sum()
        };
        let mut widths = vec![features];
        widths.extend(&spec.derev_hidden);
        widths.push(n_bins);
        let derev = DereverbNet {
            mlp: Mlp::random(&widths, &mut rng)?,
        };
        let rt60 = if spec.rt60_head {
            let mut widths = vec![partition.n_bands() * c];
            widths.extend(&spec.rt60_hidden);
            widths.push(1);
            Some(Rt60Head {
                mlp: Mlp::random(&widths, &mut rng)?,
            })
        } else {
            None
        };
        Ok(Self {
            spec,
            n_bins,
            partition,
            attention,
            derev,
            rt60,
        })
    }

    /// Parameters in declaration order: attention (W_Q, W_K, W_V per band),
    /// dereverberation layers (W, b), RT60 layers (W, b).
    pub fn params(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out = Vec::new();
        for (b, p) in self.attention.iter().enumerate() {
            out.push((format!("attention.{b}.w_q"), &p.w_q));
            out.push((format!("attention.{b}.w_k"), &p.w_k));
            out.push((format!("attention.{b}.w_v"), &p.w_v));
        }
        for (i, l) in self.derev.mlp.layers.iter().enumerate() {
            out.push((format!("derev.{i}.weight"), &l.weight));
            out.push((format!("derev.{i}.bias"), &l.bias));
        }
        if let Some(h) = &self.rt60 {
            for (i, l) in h.mlp.layers.iter().enumerate() {
                out.push((format!("rt60.{i}.weight"), &l.weight));
                out.push((format!("rt60.{i}.bias"), &l.bias));
            }
        }
        out
    }

    /// Mutable view of the parameters in the order of [`Model::params`].
    pub fn params_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out = Vec::new();
        for p in self.attention.iter_mut() {
            out.push(&mut p.w_q);
            out.push(&mut p.w_k);
            out.push(&mut p.w_v);
        }
        for l in self.derev.mlp.layers.iter_mut() {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        if let Some(h) = &mut self.rt60 {
            for l in h.mlp.layers.iter_mut() {
                out.push(&mut l.weight);
                out.push(&mut l.bias);
            }
        }
        out
    }

    pub fn n_params(&self) -> usize {
        self.params().iter().map(|(_, p)| p.len()).sum()
    }

    /// Dereverberation features for a normalized utterance, plus attention
    /// rows for attention models.
    pub fn features(&self, y_norm: &LpsMatrix) -> Result<(Array2<f64>, Option<AttentionWeights>)> {
        if y_norm.n_bins() != self.n_bins {
            return Err(Error::Dimension(format!(
                "model expects {} bins, got {}",
                self.n_bins,
                y_norm.n_bins()
            )));
        }
        let ctx = expand_context(y_norm, self.spec.context)?;
        match self.spec.kind {
            ModelKind::Baseline => Ok((ctx.flatten(), None)),
            _ => {
                let (f, a) = sta_forward(&ctx, y_norm, &self.attention, &self.partition)?;
                Ok((f, Some(a)))
            }
        }
    }

    pub fn forward(&self, y_norm: &LpsMatrix) -> Result<ModelOutput> {
        self.run(y_norm, true)
    }

    /// Forward pass; the RT60 head runs only when `with_rt60` is set.
    pub fn run(&self, y_norm: &LpsMatrix, with_rt60: bool) -> Result<ModelOutput> {
        let (features, weights) = self.features(y_norm)?;
        let x_hat = self.derev.forward(&features)?;
        let z_hat = match (&self.rt60, &weights) {
            (Some(h), Some(a)) if with_rt60 => Some(h.forward(a)?),
            _ => None,
        };
        Ok(ModelOutput {
            x_hat,
            weights,
            z_hat,
        })
    }

    /// Joint loss of the plain path on one normalized utterance with a
    /// constant RT60 label.
    pub fn loss(&self, y_norm: &LpsMatrix, x_norm: &LpsMatrix, rt60: f64) -> Result<JointLoss> {
        let out = self.forward(y_norm)?;
        let z = Array1::from_elem(y_norm.n_frames(), rt60);
        joint_loss(x_norm.values(), out.x_hat.values(), &z, out.z_hat.as_ref())
    }
}

/// A trained model with the feature pipeline it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct Dereverberator {
    pub model: Model,
    pub stats: NormStats,
    pub stft: StftConfig,
    pub power_floor: f64,
    pub config_hash: String,
}

#[derive(Debug, Clone)]
pub struct Prediction {
    pub waveform: Waveform,
    /// Mean of `rt60_frames`, in seconds.
    pub rt60: Option<f64>,
    pub rt60_frames: Option<Vec<f64>>,
    pub weights: Option<AttentionWeights>,
}

impl Dereverberator {
    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        let f = self.stft.n_bins();
        if self.model.n_bins != f || self.stats.n_bins() != f {
            return Err(Error::Dimension(format!(
                "STFT gives {f} bins, model has {}, statistics have {}",
                self.model.n_bins,
                self.stats.n_bins()
            )));
        }
        Ok(())
    }

    pub fn normalized_lps(&self, w: &Waveform) -> Result<LpsMatrix> {
        normalize(&lps(&stft(w, &self.stft)?, self.power_floor)?, &self.stats)
    }

    /// Dereverberates `y`; the output has the input's length. With
    /// `with_rt60`, models that have a head also report the mean of its
    /// per-frame outputs.
    pub fn predict(&self, y: &Waveform, with_rt60: bool) -> Result<Prediction> {
        let spec = stft(y, &self.stft)?;
        let y_norm = normalize(&lps(&spec, self.power_floor)?, &self.stats)?;
        let out = self.model.run(&y_norm, with_rt60)?;
        let x_lps = denormalize(&out.x_hat, &self.stats)?;
        let waveform = reconstruct(&x_lps, &spec, &self.stft)?.with_len(y.len());
        if waveform.samples().iter().any(|s| !s.is_finite()) {
            return Err(Error::Numerical("non-finite output samples".into()));
        }
        let rt60 = out.z_hat.as_ref().map(|z| z.mean().unwrap_or(0.0));
        Ok(Prediction {
            waveform,
            rt60,
            rt60_frames: out.z_hat.map(|z| z.to_vec()),
            weights: out.weights,
        })
    }

    /// Passes `y` through analysis and synthesis without the model.
    pub fn resynthesize(&self, y: &Waveform) -> Result<Waveform> {
        Ok(istft(&stft(y, &self.stft)?, &self.stft)?.with_len(y.len()))
    }
}
