//! Mini-batch training of the joint dereverberation + RT60 objective.
//!
//! Training batches go through the differentiable [`Graph`]; validation and
//! [`gradcheck`]'s numeric side use the plain forward path in
//! [`crate::network`], so the two implementations check each other.

use std::time::Instant;

use ndarray::{s, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, ParamId, ParameterTape, Var};
use crate::dsp::LpsMatrix;
use crate::error::{Error, Result};
use crate::network::{JointLoss, Model, ModelKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr_init: f64,
    pub lr_decrement: f64,
    pub plateau_patience: usize,
    pub lr_floor: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_init: 1e-4,
            lr_decrement: 1e-5,
            plateau_patience: 3,
            lr_floor: 1e-6,
            batch_size: 16,
            max_epochs: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr_init > 0.0
            && self.lr_decrement > 0.0
            && self.lr_floor > 0.0
            && self.lr_floor < self.lr_init
            && self.plateau_patience > 0
            && self.batch_size > 0
            && self.max_epochs > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid training settings: {self:?}"
            )))
        }
    }
}

/// One utterance in the normalized domain with its RT60 label.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    /// Normalized reverberant LPS, T x F.
    pub y: LpsMatrix,
    /// Normalized anechoic LPS, T x F.
    pub x: LpsMatrix,
    /// RT60 label divided by 1 s.
    pub z: f64,
}

/// Constant inputs of one mini-batch, packed for the graph.
#[derive(Debug, Clone)]
pub struct Batch {
    /// Per band: rows of the band, columns `b * c + j`.
    context: Vec<Array2<f64>>,
    /// Per band: current frames as columns.
    current: Vec<Array2<f64>>,
    /// Baseline features, B x (F * c).
    flat: Option<Array2<f64>>,
    target: Array2<f64>,
    z: Array2<f64>,
}

impl Batch {
    /// Gathers `(utterance, frame)` pairs with edge-replicated context.
    pub fn gather(model: &Model, utts: &[Utterance], frames: &[(usize, usize)]) -> Result<Self> {
        let c = model.spec.context;
        let half = (c / 2) as isize;
        let f = model.n_bins;
        let b = frames.len();
        if b == 0 {
            return Err(Error::EmptyInput);
        }
        let mut cmat = Array2::zeros((f, b * c));
        let mut ymat = Array2::zeros((f, b));
        let mut target = Array2::zeros((b, f));
        let mut z = Array2::zeros((b, 1));
        for (col, &(u, t)) in frames.iter().enumerate() {
            let utt = &utts[u];
            let yv = utt.y.values();
            if yv.ncols() != f {
                return Err(Error::Dimension(format!(
                    "utterance {} has {} bins, model expects {f}",
                    utt.id,
                    yv.ncols()
                )));
            }
            let n = yv.nrows() as isize;
            for j in 0..c {
                let src = (t as isize + j as isize - half).clamp(0, n - 1) as usize;
                cmat.column_mut(col * c + j).assign(&yv.row(src));
            }
            ymat.column_mut(col).assign(&yv.row(t));
            target.row_mut(col).assign(&utt.x.values().row(t));
            z[[col, 0]] = utt.z;
        }
        let flat = (model.spec.kind == ModelKind::Baseline).then(|| {
            let mut out = Array2::zeros((b, f * c));
            for col in 0..b {
                for j in 0..c {
                    out.slice_mut(s![col, j * f..(j + 1) * f])
                        .assign(&cmat.column(col * c + j));
                }
            }
            out
        });
        let (context, current) = if flat.is_some() {
            (Vec::new(), Vec::new())
        } else {
            (0..model.partition.n_bands())
                .map(|band| {
                    let r = model.partition.band(band);
                    (
                        cmat.slice(s![r.clone(), ..]).to_owned(),
                        ymat.slice(s![r, ..]).to_owned(),
                    )
                })
                .unzip()
        };
        Ok(Self {
            context,
            current,
            flat,
            target,
            z,
        })
    }

    pub fn len(&self) -> usize {
        self.target.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Registers the model's parameters in declaration order.
pub fn tape_from_model(model: &Model) -> ParameterTape {
    let mut tape = ParameterTape::new();
    for (name, p) in model.params() {
        tape.register(name, p.clone());
    }
    tape
}

/// Copies tape values back into `model`.
pub fn write_back(tape: &ParameterTape, model: &mut Model) {
    for (dst, src) in model.params_mut().into_iter().zip(tape.values()) {
        dst.assign(src);
    }
}

/// Loss nodes of a recorded batch.
#[derive(Debug, Clone, Copy)]
pub struct LossVars {
    pub total: Var,
    pub derev: Var,
    pub rt60: Option<Var>,
}

fn mlp<'t>(g: &mut Graph<'t>, ids: &[ParamId], mut h: Var) -> Result<Var> {
    let n = ids.len() / 2;
    for layer in 0..n {
        let w = g.param(ids[2 * layer]);
        let b = g.param(ids[2 * layer + 1]);
        h = g.matmul(h, w)?;
        h = g.add_row_bias(h, b)?;
        if layer + 1 < n {
            h = g.relu(h);
        }
    }
    Ok(h)
}

/// Records the joint loss of `batch` on `g`. Parameter ids follow
/// [`Model::params`] order.
pub fn record_loss(g: &mut Graph<'_>, model: &Model, batch: &Batch) -> Result<LossVars> {
    let ids: Vec<ParamId> = (0..model.params().len()).map(ParamId::from_index).collect();
    let c = model.spec.context;
    let n_att = 3 * model.attention.len();
    let n_derev = 2 * model.derev.mlp.layers.len();

    let (features, weights) = if let Some(flat) = &batch.flat {
        (g.constant(flat.clone()), None)
    } else {
        let mut feats = Vec::new();
        let mut rows = Vec::new();
        for (band, p) in model.attention.iter().enumerate() {
            let wq = g.param(ids[3 * band]);
            let wk = g.param(ids[3 * band + 1]);
            let wv = g.param(ids[3 * band + 2]);
            let cm = g.constant(batch.context[band].clone());
            let ym = g.constant(batch.current[band].clone());
            let q = g.matmul(wq, cm)?;
            let k = g.matmul(wk, ym)?;
            let scores = g.context_scores(q, k, c)?;
            let scores = g.scale(scores, 1.0 / (p.d_q() as f64).sqrt());
            let a = g.softmax_rows(scores);
            let v = g.matmul(wv, cm)?;
            let weighted = g.scale_columns(v, a)?;
            feats.push(g.context_major(weighted, c)?);
            rows.push(a);
        }
        let features = if feats.len() == 1 {
            feats[0]
        } else {
            g.concat_cols(&feats)?
        };
        let weights = if rows.len() == 1 {
            rows[0]
        } else {
            g.concat_cols(&rows)?
        };
        (features, Some(weights))
    };

    let x_hat = mlp(g, &ids[n_att..n_att + n_derev], features)?;
    let target = g.constant(batch.target.clone());
    let diff = g.sub(x_hat, target)?;
    let sq = g.square(diff);
    let derev = g.mean(sq)?;

    let rt60 = match (&model.rt60, weights) {
        (Some(_), Some(a)) => {
            let logits = mlp(g, &ids[n_att + n_derev..], a)?;
            let z_hat = g.sigmoid(logits);
            let z = g.constant(batch.z.clone());
            let d = g.sub(z_hat, z)?;
            let sq = g.square(d);
            Some(g.mean(sq)?)
        }
        _ => None,
    };
    let total = match rt60 {
        Some(r) => g.add(derev, r)?,
        None => derev,
    };
    Ok(LossVars { total, derev, rt60 })
}

/// Adam moments. Fields are public so callers can inspect or seed them.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<Array2<f64>>,
    pub v: Vec<Array2<f64>>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(tape: &ParameterTape) -> Self {
        let zeros = || {
            tape.values()
                .iter()
                .map(|p| Array2::zeros(p.raw_dim()))
                .collect()
        };
        Self {
            m: zeros(),
            v: zeros(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam update from the tape's gradient buffers. Leaves every
/// parameter untouched if any gradient is non-finite.
pub fn adam_step(tape: &mut ParameterTape, state: &mut AdamState, lr: f64) -> Result<()> {
    if tape
        .grads()
        .iter()
        .any(|g| g.iter().any(|x| !x.is_finite()))
    {
        return Err(Error::Numerical(
            "non-finite gradient in optimizer step".into(),
        ));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let grads: Vec<Array2<f64>> = tape.grads().to_vec();
    for (i, (p, g)) in tape.values_mut().iter_mut().zip(&grads).enumerate() {
        let m = &mut state.m[i];
        let v = &mut state.v[i];
        ndarray::Zip::from(p)
            .and(m)
            .and(v)
            .and(g)
            .for_each(|p, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
    }
    Ok(())
}

/// Subtractive learning-rate decay on a validation plateau.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauSchedule {
    lr: f64,
    best: f64,
    stale: usize,
    patience: usize,
    decrement: f64,
    floor: f64,
}

impl PlateauSchedule {
    pub fn new(cfg: &TrainConfig) -> Self {
        Self {
            lr: cfg.lr_init,
            best: f64::INFINITY,
            stale: 0,
            patience: cfg.plateau_patience,
            decrement: cfg.lr_decrement,
            floor: cfg.lr_floor,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Feeds one epoch's validation loss; returns whether the rate dropped.
    pub fn observe(&mut self, val_loss: f64) -> bool {
        if val_loss < self.best {
            self.best = val_loss;
            self.stale = 0;
            return false;
        }
        self.stale += 1;
        if self.stale >= self.patience {
            self.lr = (self.lr - self.decrement).max(self.floor);
            self.stale = 0;
            true
        } else {
            false
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Validation dereverberation term.
    pub derev_term: f64,
    /// Validation RT60 term (0 without a head).
    pub rt60_term: f64,
    pub seconds: f64,
}

/// Joint loss pooled over every frame of `utts`, via the plain path.
pub fn evaluate(model: &Model, utts: &[Utterance]) -> Result<JointLoss> {
    let (mut derev, mut rt60, mut frames) = (0.0, 0.0, 0usize);
    let f = model.n_bins as f64;
    for u in utts {
        let l = model.loss(&u.y, &u.x, u.z)?;
        let t = u.y.n_frames();
        derev += l.derev * t as f64 * f;
        rt60 += l.rt60 * t as f64;
        frames += t;
    }
    if frames == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(JointLoss {
        derev: derev / (frames as f64 * f),
        rt60: rt60 / frames as f64,
    })
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Parameters at the best validation epoch.
    pub model: Model,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
}

/// Trains `model` with frame-level mini-batches, shuffled each epoch by a
/// generator seeded with `seed`.
pub fn fit(
    mut model: Model,
    train: &[Utterance],
    val: &[Utterance],
    cfg: &TrainConfig,
    seed: u64,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<FitResult> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut pool: Vec<(usize, usize)> = train
        .iter()
        .enumerate()
        .flat_map(|(u, utt)| (0..utt.y.n_frames()).map(move |t| (u, t)))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tape = tape_from_model(&model);
    let mut adam = AdamState::new(&tape);
    let mut schedule = PlateauSchedule::new(cfg);
    let mut best = (f64::INFINITY, model.clone(), 0);
    let mut log = Vec::with_capacity(cfg.max_epochs);

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        let lr = schedule.lr();
        pool.shuffle(&mut rng);
        let mut train_sum = 0.0;
        for (i, chunk) in pool.chunks(cfg.batch_size).enumerate() {
            let batch = Batch::gather(&model, train, chunk)?;
            let (loss, grads) = {
                let mut g = Graph::new(&tape);
                let vars = record_loss(&mut g, &model, &batch)?;
                let loss = g.value(vars.total)[[0, 0]];
                if !loss.is_finite() {
                    return Err(Error::Numerical(format!(
                        "non-finite training loss at epoch {epoch}, batch {i}"
                    )));
                }
                (loss, g.backward(vars.total)?)
            };
            tape.zero_grad();
            tape.accumulate(&grads);
            adam_step(&mut tape, &mut adam, lr)?;
            train_sum += loss * chunk.len() as f64;
        }
        write_back(&tape, &mut model);
        let v = evaluate(&model, val)?;
        if !v.total().is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite validation loss at epoch {epoch}"
            )));
        }
        if v.total() < best.0 {
            best = (v.total(), model.clone(), epoch);
        }
        schedule.observe(v.total());
        let entry = EpochLog {
            epoch,
            lr,
            train_loss: train_sum / pool.len() as f64,
            val_loss: v.total(),
            derev_term: v.derev,
            rt60_term: v.rt60,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: lr {lr:.2e} train {:.5} val {:.5}",
            entry.train_loss,
            entry.val_loss
        );
        on_epoch(&entry);
        log.push(entry);
    }
    Ok(FitResult {
        model: best.1,
        best_epoch: best.2,
        log,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub max_rel_err: f64,
    pub worst: String,
    pub checked: usize,
}

/// Compares tape gradients of the joint loss on every frame of `utt` with
/// central differences of the plain-path loss, for every parameter entry.
pub fn gradcheck(model: &Model, utt: &Utterance, h: f64) -> Result<GradcheckReport> {
    let frames: Vec<(usize, usize)> = (0..utt.y.n_frames()).map(|t| (0, t)).collect();
    let batch = Batch::gather(model, std::slice::from_ref(utt), &frames)?;
    let tape = tape_from_model(model);
    let grads = {
        let mut g = Graph::new(&tape);
        let vars = record_loss(&mut g, model, &batch)?;
        g.backward(vars.total)?
    };
    let names: Vec<String> = model.params().into_iter().map(|(n, _)| n).collect();
    let mut probe = model.clone();
    let mut report = GradcheckReport {
        max_rel_err: 0.0,
        worst: String::new(),
        checked: 0,
    };
    for (pi, id) in tape.ids().enumerate() {
        let analytic = grads
            .get(id)
            .cloned()
            .unwrap_or_else(|| Array2::zeros(tape.value(id).raw_dim()));
        let cols = analytic.ncols();
        for idx in 0..analytic.len() {
            let at = (idx / cols, idx % cols);
            let orig = tape.value(id)[at];
            probe.params_mut()[pi][at] = orig + h;
            let up = probe.loss(&utt.y, &utt.x, utt.z)?.total();
            probe.params_mut()[pi][at] = orig - h;
            let down = probe.loss(&utt.y, &utt.x, utt.z)?.total();
            probe.params_mut()[pi][at] = orig;
            let num = (up - down) / (2.0 * h);
            let a = analytic[at];
            let rel = (a - num).abs() / a.abs().max(num.abs()).max(1e-8);
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = format!("{}[{},{}]", names[pi], at.0, at.1);
            }
            report.checked += 1;
        }
    }
    Ok(report)
}
