//! Paired reverberant corpus generation and the line-delimited JSON manifest.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::{Waveform, DEFAULT_SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::rir::{make_pair, simulate_rir, Rir, RoomConfig, DEFAULT_SPEED_OF_SOUND};
use crate::wav::{read_wav, write_wav, WavEncoding};

const MAX_REJECTIONS: usize = 10_000;

/// Sampling ranges for simulated rooms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioRanges {
    pub room_min: [f64; 3],
    pub room_max: [f64; 3],
    pub rt60_min: f64,
    pub rt60_max: f64,
    pub wall_margin: f64,
    pub distance_min: f64,
    pub distance_max: f64,
    pub speed_of_sound: f64,
}

impl Default for ScenarioRanges {
    fn default() -> Self {
        Self {
            room_min: [3.0, 3.0, 2.5],
            room_max: [10.0, 8.0, 6.0],
            rt60_min: 0.01,
            rt60_max: 1.0,
            wall_margin: 0.3,
            distance_min: 0.5,
            distance_max: 10.0,
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
        }
    }
}

impl ScenarioRanges {
    pub fn validate(&self) -> Result<()> {
        let ok = (0..3).all(|a| {
            self.room_min[a] <= self.room_max[a] && self.room_min[a] > 2.0 * self.wall_margin
        }) && 0.0 < self.rt60_min
            && self.rt60_min <= self.rt60_max
            && self.wall_margin >= 0.0
            && 0.0 <= self.distance_min
            && self.distance_min <= self.distance_max
            && self.speed_of_sound > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "inconsistent scenario ranges: {self:?}"
            )))
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Samples a room uniformly within `ranges`, rejecting placements that break
/// the wall-margin or source-microphone distance constraints.
pub fn sample_scenario(ranges: &ScenarioRanges, rng: &mut ChaCha8Rng) -> Result<RoomConfig> {
    ranges.validate()?;
    for _ in 0..MAX_REJECTIONS {
        let dims: [f64; 3] =
            std::array::from_fn(|a| uniform(rng, ranges.room_min[a], ranges.room_max[a]));
        let point = |rng: &mut ChaCha8Rng| -> [f64; 3] {
            std::array::from_fn(|a| uniform(rng, ranges.wall_margin, dims[a] - ranges.wall_margin))
        };
        let source = point(rng);
        let mic = point(rng);
        let target = uniform(rng, ranges.rt60_min, ranges.rt60_max);
        let mut cfg = RoomConfig::new(dims, source, mic, target);
        cfg.speed_of_sound = ranges.speed_of_sound;
        let d = cfg.distance();
        if d >= ranges.distance_min && d <= ranges.distance_max {
            return Ok(cfg);
        }
    }
    Err(Error::Config(
        "could not place source and microphone within the distance limits".into(),
    ))
}

/// SplitMix64 finaliser; derives independent per-item seeds from a master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub reverb_path: String,
    pub anechoic_path: String,
    pub rt60: f64,
    pub room: Option<[f64; 3]>,
    pub src: Option<[f64; 3]>,
    pub mic: Option<[f64; 3]>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_rt60: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rir_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// A manifest together with the directory its relative paths resolve against.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub base: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut records = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line)?);
        }
        Ok(Self {
            base: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            records,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_records(path, &self.records)
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn reverberant_path(&self, r: &ManifestRecord) -> PathBuf {
        self.resolve(&r.reverb_path)
    }

    pub fn anechoic_path(&self, r: &ManifestRecord) -> PathBuf {
        self.resolve(&r.anechoic_path)
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    /// Consecutive slices of the given sizes, sharing this manifest's base.
    pub fn split(&self, sizes: &[usize]) -> Result<Vec<Manifest>> {
        if sizes.iter().sum::<usize>() > self.records.len() {
            return Err(Error::Config(format!(
                "split sizes {sizes:?} exceed the {} records available",
                self.records.len()
            )));
        }
        let mut start = 0;
        Ok(sizes
            .iter()
            .map(|&n| {
                let part = Manifest {
                    base: self.base.clone(),
                    records: self.records[start..start + n].to_vec(),
                };
                start += n;
                part
            })
            .collect())
    }
}

pub fn write_records(path: impl AsRef<Path>, records: &[ManifestRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Where impulse responses come from.
#[derive(Debug, Clone)]
pub enum RirSource {
    Simulate(ScenarioRanges),
    /// Recorded responses, assigned to utterances by seeded draw.
    Recorded(Vec<PathBuf>),
}

/// Sorted `.wav` files directly inside `dir`.
pub fn list_wavs(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
        })
        .collect();
    out.sort();
    Ok(out)
}

/// Convolves every clean utterance with a simulated or recorded RIR and
/// writes `reverb/<id>.wav` and `anechoic/<id>.wav` under `out_dir`.
///
/// Unreadable inputs are skipped with a warning. The returned records carry
/// paths relative to `out_dir`.
pub fn build_corpus(
    clean: &[PathBuf],
    source: &RirSource,
    out_dir: impl AsRef<Path>,
    master_seed: u64,
    config_hash: Option<&str>,
) -> Result<Vec<ManifestRecord>> {
    let out_dir = out_dir.as_ref();
    for sub in ["reverb", "anechoic"] {
        let d = out_dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    if let RirSource::Recorded(paths) = source {
        if paths.is_empty() {
            return Err(Error::Config("no recorded RIR files supplied".into()));
        }
    }

    let mut records = Vec::new();
    for (index, path) in clean.iter().enumerate() {
        let seed = derive_seed(master_seed, index as u64);
        let speech = match read_wav(path) {
            Ok(w) if !w.is_empty() => w,
            Ok(_) => {
                log::warn!("skipping {}: empty file", path.display());
                continue;
            }
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                continue;
            }
        };
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .map(str::to_owned)
            .unwrap_or_else(|| format!("utt{index:05}"));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (rir, rir_path) = match source {
            RirSource::Simulate(ranges) => {
                let room = sample_scenario(ranges, &mut rng)?;
                (simulate_rir(&room, speech.sample_rate(), seed)?, None)
            }
            RirSource::Recorded(paths) => {
                let p = &paths[rng.gen_range(0..paths.len())];
                let h = read_wav(p)?;
                (Rir::from_recording(h, seed)?, Some(p.display().to_string()))
            }
        };
        let pair = make_pair(&speech, &rir)?;
        let reverb_rel = format!("reverb/{id}.wav");
        let anechoic_rel = format!("anechoic/{id}.wav");
        write_wav(
            out_dir.join(&reverb_rel),
            &pair.reverberant,
            WavEncoding::Float32,
        )?;
        write_wav(
            out_dir.join(&anechoic_rel),
            &pair.anechoic,
            WavEncoding::Float32,
        )?;
        records.push(ManifestRecord {
            id,
            reverb_path: reverb_rel,
            anechoic_path: anechoic_rel,
            rt60: pair.rt60_true,
            room: pair.scenario.map(|s| s.dims),
            src: pair.scenario.map(|s| s.source),
            mic: pair.scenario.map(|s| s.mic),
            seed,
            target_rt60: pair.scenario.map(|s| s.target_rt60),
            rir_path,
            config_hash: config_hash.map(str::to_owned),
        });
    }
    if records.is_empty() {
        return Err(Error::Config("no utterance could be processed".into()));
    }
    Ok(records)
}

/// Writes `count` synthetic clean utterances to `dir` as `clean_NNNNN.wav`.
pub fn write_synthetic_clean(
    dir: impl AsRef<Path>,
    count: usize,
    duration: f64,
    master_seed: u64,
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    (0..count)
        .map(|i| {
            let w: Waveform = crate::synth::synth_utterance(
                duration,
                derive_seed(master_seed ^ 0x5EED_C1EA, i as u64),
                DEFAULT_SAMPLE_RATE,
            )?;
            let p = dir.join(format!("clean_{i:05}.wav"));
            write_wav(&p, &w, WavEncoding::Float32)?;
            Ok(p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampled_rooms_respect_constraints() {
        let ranges = ScenarioRanges::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let r = sample_scenario(&ranges, &mut rng).unwrap();
            for a in 0..3 {
                assert!(r.dims[a] >= ranges.room_min[a] && r.dims[a] <= ranges.room_max[a]);
            }
            assert!(r.wall_clearance(&r.source) >= 0.3);
            assert!(r.wall_clearance(&r.mic) >= 0.3);
            assert!((0.5..=10.0).contains(&r.distance()));
            assert!((0.01..=1.0).contains(&r.target_rt60));
        }
    }

    #[test]
    fn derived_seeds_differ() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(42, i)).collect();
        assert_eq!(s.len(), 1000);
    }

    #[test]
    fn manifest_round_trip_and_split() {
        let dir = tempfile::tempdir().unwrap();
        let rec = |i: usize| ManifestRecord {
            id: format!("u{i}"),
            reverb_path: format!("reverb/u{i}.wav"),
            anechoic_path: format!("anechoic/u{i}.wav"),
            rt60: 0.1 * i as f64,
            room: Some([4.0, 3.0, 2.5]),
            src: Some([1.0, 1.0, 1.0]),
            mic: None,
            seed: i as u64,
            target_rt60: None,
            rir_path: None,
            config_hash: Some("abc".into()),
        };
        let m = Manifest {
            base: dir.path().to_path_buf(),
            records: (0..5).map(rec).collect(),
        };
        let p = dir.path().join("m.jsonl");
        m.write(&p).unwrap();
        let back = Manifest::read(&p).unwrap();
        assert_eq!(back, m);
        assert_eq!(
            back.reverberant_path(&back.records[1]),
            dir.path().join("reverb/u1.wav")
        );
        let parts = back.split(&[3, 2]).unwrap();
        assert_eq!(parts[1].records[0].id, "u3");
        assert!(back.split(&[4, 2]).is_err());
    }
}
