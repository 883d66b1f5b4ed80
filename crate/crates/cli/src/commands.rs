use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use dereverb::checkpoint;
use dereverb::config::RunConfig;
use dereverb::corpus::{
    build_corpus, list_wavs, write_records, write_synthetic_clean, Manifest, RirSource,
};
use dereverb::dsp::NormStats;
use dereverb::experiment::{
    attention_csv, attention_profile, corpus_stats, export_weights, load_pairs, sweep_context,
    sweep_table, train_model_with_stats, utt_metrics, Pair,
};
use dereverb::metrics::bucket_report;
use dereverb::network::ModelKind;
use dereverb::wav::{read_wav, write_wav, WavEncoding};
use dereverb::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::{
    AttentionArgs, Cli, Command, EvalArgs, InferArgs, ModelOverrides, SimulateArgs, StatsArgs,
    SweepArgs, Switch, TrainArgs,
};

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match cli.command {
        Command::Simulate(a) => simulate(cfg, a),
        Command::Stats(a) => stats(cfg, a),
        Command::Train(a) => train(cfg, a),
        Command::Infer(a) => infer(a),
        Command::Eval(a) => eval(cfg, a),
        Command::AttentionReport(a) => attention_report(a),
        Command::SweepContext(a) => sweep(cfg, a),
    }
}

fn required(flag: Option<PathBuf>, from_config: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or_else(|| from_config.clone()).ok_or_else(|| {
        Error::Config(format!(
            "missing --{name} (or paths.{} in the config)",
            name.replace('-', "_")
        ))
    })
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => fs::create_dir_all(d).map_err(|e| Error::Io {
            path: d.into(),
            source: e,
        }),
        _ => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    create_parent(path)?;
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

fn apply_overrides(cfg: &mut RunConfig, o: &ModelOverrides) -> Result<()> {
    if let Some(k) = o.model {
        cfg.model.kind = k.into();
        // A baseline has no shared representation to feed an RT60 head.
        if cfg.model.kind == ModelKind::Baseline && o.rt60_head.is_none() {
            cfg.model.rt60_head = false;
        }
    }
    if let Some(h) = o.rt60_head {
        cfg.model.rt60_head = h == Switch::On;
    }
    if let Some(c) = o.context {
        cfg.model.context = c;
    }
    if let Some(n) = o.subbands {
        cfg.model.subbands = n;
    }
    if let Some(h) = &o.hidden {
        cfg.model.derev_hidden = h.clone();
    }
    if let Some(e) = o.epochs {
        cfg.train.max_epochs = e;
    }
    if let Some(lr) = o.lr {
        cfg.train.lr_init = lr;
    }
    if let Some(b) = o.batch_size {
        cfg.train.batch_size = b;
    }
    cfg.validate()
}

fn simulate(mut cfg: RunConfig, a: SimulateArgs) -> Result<()> {
    if let Some(v) = a.rt60_min {
        cfg.corpus.rooms.rt60_min = v;
    }
    if let Some(v) = a.rt60_max {
        cfg.corpus.rooms.rt60_max = v;
    }
    cfg.validate()?;
    let out_dir = required(a.out_dir, &cfg.paths.out_dir, "out-dir")?;
    let clean = match (a.synthetic, a.clean_dir.or(cfg.paths.clean_dir.clone())) {
        (Some(n), _) => {
            if n == 0 {
                return Err(Error::Config(
                    "--synthetic needs at least one utterance".into(),
                ));
            }
            write_synthetic_clean(
                out_dir.join("clean"),
                n,
                cfg.corpus.synthetic_duration,
                cfg.seed,
            )?
        }
        (None, Some(dir)) => list_wavs(dir)?,
        (None, None) => return Err(Error::Config("give --clean-dir or --synthetic".into())),
    };
    if clean.is_empty() {
        return Err(Error::EmptyInput);
    }
    let source = match a.rir_dir.or(cfg.paths.rir_dir.clone()) {
        Some(dir) => RirSource::Recorded(list_wavs(dir)?),
        None => RirSource::Simulate(cfg.corpus.rooms.clone()),
    };
    let hash = cfg.hash();
    let records = build_corpus(&clean, &source, &out_dir, cfg.seed, Some(&hash))?;
    write_records(out_dir.join("manifest.jsonl"), &records)?;
    log::info!("wrote {} pairs to {}", records.len(), out_dir.display());
    if let Some(sizes) = a.split {
        if sizes.len() != 3 {
            return Err(Error::Config(
                "--split takes three sizes: train,val,test".into(),
            ));
        }
        let all = Manifest {
            base: out_dir.clone(),
            records,
        };
        for (name, part) in ["train", "val", "test"].iter().zip(all.split(&sizes)?) {
            part.write(out_dir.join(format!("{name}.jsonl")))?;
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct StatsFile {
    mean: Vec<f64>,
    std: Vec<f64>,
    config_hash: String,
}

fn stats(cfg: RunConfig, a: StatsArgs) -> Result<()> {
    cfg.validate()?;
    let pairs = load_pairs(&Manifest::read(&a.manifest)?)?;
    let s = corpus_stats(&pairs, &cfg.stft, cfg.features.power_floor)?;
    let file = StatsFile {
        mean: s.mean,
        std: s.std,
        config_hash: cfg.hash(),
    };
    write_text(&a.out, &serde_json::to_string(&file)?)
}

fn train(mut cfg: RunConfig, a: TrainArgs) -> Result<()> {
    apply_overrides(&mut cfg, &a.overrides)?;
    let train_path = required(
        a.train_manifest,
        &cfg.paths.train_manifest,
        "train-manifest",
    )?;
    let val_path = required(a.val_manifest, &cfg.paths.val_manifest, "val-manifest")?;
    let out = a
        .out
        .or(cfg.paths.checkpoint.clone())
        .unwrap_or_else(|| PathBuf::from("model.teca"));
    let log_path = a.log.unwrap_or_else(|| out.with_extension("log.jsonl"));
    let stats = match a.stats {
        Some(p) => {
            let text = fs::read_to_string(&p).map_err(|e| Error::Io {
                path: p.clone(),
                source: e,
            })?;
            let f: StatsFile = serde_json::from_str(&text)?;
            Some(NormStats {
                mean: f.mean,
                std: f.std,
            })
        }
        None => None,
    };
    log::info!(
        "resolved configuration (hash {}):\n{}",
        cfg.hash(),
        cfg.to_toml()?
    );

    let train = load_pairs(&Manifest::read(&train_path)?)?;
    let val = load_pairs(&Manifest::read(&val_path)?)?;
    create_parent(&log_path)?;
    let mut log_file = fs::File::create(&log_path).map_err(|e| Error::Io {
        path: log_path.clone(),
        source: e,
    })?;
    let mut log_err = None;
    let (d, fit) = train_model_with_stats(&cfg, &train, &val, stats, |e| {
        log::info!(
            "epoch {:>3} lr {:.2e} train {:.5} val {:.5} ({:.1} s)",
            e.epoch,
            e.lr,
            e.train_loss,
            e.val_loss,
            e.seconds
        );
        let line = serde_json::to_string(e).map(|s| s + "\n");
        let res = line.map_err(Error::from).and_then(|l| {
            log_file.write_all(l.as_bytes()).map_err(|err| Error::Io {
                path: log_path.clone(),
                source: err,
            })
        });
        if let Err(err) = res {
            log_err.get_or_insert(err);
        }
    })?;
    if let Some(e) = log_err {
        return Err(e);
    }
    create_parent(&out)?;
    checkpoint::save(&out, &d)?;
    log::info!(
        "best epoch {}; checkpoint written to {}",
        fit.best_epoch,
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct Rt60Line<'a> {
    utt: &'a str,
    rt60_est: f64,
    rt60_frames: &'a [f64],
}

fn infer(a: InferArgs) -> Result<()> {
    let d = checkpoint::load(&a.checkpoint)?;
    if a.dump_rt60 && !d.model.spec.rt60_head {
        return Err(Error::Config(
            "--dump-rt60 needs a checkpoint with an RT60 head".into(),
        ));
    }
    let mut files = Vec::new();
    for p in &a.inputs {
        if p.is_dir() {
            files.extend(list_wavs(p)?);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(Error::EmptyInput);
    }
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::Io {
        path: a.out_dir.clone(),
        source: e,
    })?;
    let stdout = std::io::stdout();
    for f in files {
        let y = read_wav(&f)?;
        let p = d.predict(&y, a.dump_rt60)?;
        let name = f
            .file_name()
            .ok_or_else(|| Error::Config(format!("{} is not a file", f.display())))?;
        write_wav(a.out_dir.join(name), &p.waveform, WavEncoding::Float32)?;
        if let (Some(est), Some(frames)) = (p.rt60, &p.rt60_frames) {
            let utt = f.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            let line = serde_json::to_string(&Rt60Line {
                utt,
                rt60_est: est,
                rt60_frames: frames,
            })?;
            let _ = writeln!(stdout.lock(), "{line}");
        }
    }
    Ok(())
}

fn eval(cfg: RunConfig, a: EvalArgs) -> Result<()> {
    cfg.validate()?;
    let manifest = Manifest::read(&a.manifest)?;
    let pairs = load_pairs(&manifest)?;
    let utts = pairs
        .iter()
        .map(|p| {
            let enhanced = read_wav(a.enhanced_dir.join(format!("{}.wav", p.id)))?;
            utt_metrics(p, &enhanced, &cfg.stft, cfg.features.power_floor)
        })
        .collect::<Result<Vec<_>>>()?;
    let hash = manifest.records.iter().find_map(|r| r.config_hash.clone());
    let report = bucket_report(utts, hash);
    print!("{}", report.table());
    if let Some(out) = a.out {
        write_text(&out, &report.json_lines()?)?;
    }
    Ok(())
}

fn load_checked(path: &Path) -> Result<dereverb::network::Dereverberator> {
    let d = checkpoint::load(path)?;
    if d.model.spec.kind == ModelKind::Baseline {
        return Err(Error::NoAttention(d.model.spec.kind.name().into()));
    }
    Ok(d)
}

fn attention_report(a: AttentionArgs) -> Result<()> {
    let d = load_checked(&a.checkpoint)?;
    let pairs: Vec<Pair> = load_pairs(&Manifest::read(&a.manifest)?)?;
    let csv = attention_csv(&attention_profile(&d, &pairs)?);
    match &a.out {
        Some(p) => write_text(p, &csv)?,
        None => print!("{csv}"),
    }
    if let Some(p) = &a.dump_weights {
        let mut text = String::new();
        for r in export_weights(&d, &pairs)? {
            text.push_str(&serde_json::to_string(&r)?);
            text.push('\n');
        }
        write_text(p, &text)?;
    }
    Ok(())
}

fn sweep(mut cfg: RunConfig, a: SweepArgs) -> Result<()> {
    apply_overrides(&mut cfg, &a.overrides)?;
    if cfg.model.kind == ModelKind::Baseline {
        return Err(Error::NoAttention(cfg.model.kind.name().into()));
    }
    let train = load_pairs(&Manifest::read(required(
        a.train_manifest,
        &cfg.paths.train_manifest,
        "train-manifest",
    )?)?)?;
    let val = load_pairs(&Manifest::read(required(
        a.val_manifest,
        &cfg.paths.val_manifest,
        "val-manifest",
    )?)?)?;
    let test = load_pairs(&Manifest::read(required(
        a.test_manifest,
        &cfg.paths.test_manifest,
        "test-manifest",
    )?)?)?;
    let rows = sweep_context(&cfg, &a.contexts, &train, &val, &test)?;
    print!("{}", sweep_table(&rows));
    if let Some(out) = a.out {
        let mut text = String::new();
        for r in &rows {
            text.push_str(&serde_json::to_string(r)?);
            text.push('\n');
        }
        write_text(&out, &text)?;
    }
    Ok(())
}
