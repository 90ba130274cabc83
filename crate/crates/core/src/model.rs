//! Training pipeline, persisted model files and anomaly traces.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gng::GngParams;
use crate::mjpf::{run_sequence, ModelBundle, DEFAULT_PARTICLES, DEFAULT_R_STD};
use crate::signal::{derive_generalized, select_feature, FeatureCase, SensorSeries};
use crate::vocabulary::{build_vocabulary, default_smoothing, encode, learn_transitions};

pub const FORMAT_VERSION: u32 = 1;
/// Light smoothing: unseen transitions stay reachable without diluting the
/// learned rows.
pub const DEFAULT_TRANSITION_ALPHA: f64 = 1e-3;

/// Experiment settings shared by training and detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub gng: GngParams,
    /// Highest derivative order in the generalized state.
    pub order: usize,
    pub particles: usize,
    /// Observation noise std in normalized units; `R = r_std² I`.
    pub r_std: f64,
    /// Moving-average window applied to traces before evaluation.
    pub smoothing_window: usize,
    /// Laplace pseudo-count; `None` (`auto`) scales it with the data size
    /// via [`default_smoothing`].
    pub transition_alpha: Option<f64>,
    pub region_anchoring: bool,
    /// Seeds GNG initialization and the particle filter.
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            gng: GngParams::default(),
            order: 1,
            particles: DEFAULT_PARTICLES,
            r_std: DEFAULT_R_STD,
            smoothing_window: 1,
            transition_alpha: Some(DEFAULT_TRANSITION_ALPHA),
            region_anchoring: true,
            seed: 0,
        }
    }
}

impl Config {
    /// Parses either a JSON object or `key = value` lines (`#` comments).
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            let cfg: Config = serde_json::from_str(text)?;
            cfg.validate()?;
            return Ok(cfg);
        }
        let mut cfg = Config::default();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidParams(format!("expected key=value, got `{line}`")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::InvalidParams(format!("bad value `{v}` for `{key}`")))
        }
        let g = &mut self.gng;
        match key {
            "max_nodes" => g.max_nodes = num(key, value)?,
            "lambda_insert" => g.lambda_insert = num(key, value)?,
            "eps_b" => g.eps_b = num(key, value)?,
            "eps_n" => g.eps_n = num(key, value)?,
            "max_age" => g.max_age = num(key, value)?,
            "alpha" => g.alpha = num(key, value)?,
            "d_decay" => g.d_decay = num(key, value)?,
            "epochs" => g.epochs = num(key, value)?,
            "order" => self.order = num(key, value)?,
            "particles" => self.particles = num(key, value)?,
            "r_std" => self.r_std = num(key, value)?,
            "smoothing_window" => self.smoothing_window = num(key, value)?,
            "transition_alpha" => {
                self.transition_alpha = match value {
                    "auto" | "" => None,
                    v => Some(num(key, v)?),
                }
            }
            "region_anchoring" => self.region_anchoring = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            _ => return Err(Error::InvalidParams(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.gng.validate()?;
        if self.particles == 0 {
            return Err(Error::InvalidParams("particles must be positive".into()));
        }
        if !(self.r_std.is_finite() && self.r_std > 0.0) {
            return Err(Error::InvalidParams("r_std must be positive".into()));
        }
        if let Some(a) = self.transition_alpha {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::InvalidParams("transition_alpha must be positive".into()));
            }
        }
        Ok(())
    }

    fn gng_params(&self) -> GngParams {
        GngParams {
            seed: self.seed,
            ..self.gng.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub gng: GngParams,
    pub order: usize,
    pub seed: u64,
    pub transition_alpha: f64,
    pub training_ticks: usize,
    /// SHA-256 of the full training CSV.
    pub data_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub feature: String,
    pub provenance: Provenance,
    pub model: ModelBundle,
}

impl ModelFile {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format_version: u32,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::UnsupportedFormat(header.format_version));
        }
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Learns one model for `case` from a training series.
pub fn train_model(series: &SensorSeries, case: &FeatureCase, cfg: &Config) -> Result<ModelFile> {
    cfg.validate()?;
    let selected = select_feature(series, case)?;
    let gen = derive_generalized(&selected, cfg.order, None)?;
    let gng = cfg.gng_params();
    let vocab = build_vocabulary(&gen, &gng)?;
    let seq = encode(&gen, &vocab)?;
    let alpha = cfg
        .transition_alpha
        .unwrap_or_else(|| default_smoothing(seq.len(), vocab.word_count()));
    let transitions = learn_transitions(&seq, &vocab, alpha)?;
    let d = gen.dim;
    let r = DMatrix::identity(d, d) * (cfg.r_std * cfg.r_std);
    let model = ModelBundle::new(
        case.id.clone(),
        case.names.clone(),
        gen.scaler.clone(),
        gen.dt,
        vocab,
        transitions,
        r,
        cfg.region_anchoring,
    )?;
    Ok(ModelFile {
        format_version: FORMAT_VERSION,
        feature: case.id.clone(),
        provenance: Provenance {
            gng,
            order: cfg.order,
            seed: cfg.seed,
            transition_alpha: alpha,
            training_ticks: series.len(),
            data_hash: series.content_hash(),
        },
        model,
    })
}

/// Per-tick abnormality scores of one model on one series. Row `i` scores
/// tick `k[i]`; tick 0 only initializes the filter.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyTrace {
    pub feature: String,
    pub k: Vec<usize>,
    pub t: Vec<f64>,
    pub theta: Vec<f64>,
    pub map_word: Vec<usize>,
}

impl AnomalyTrace {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn mean_theta(&self) -> f64 {
        self.theta.iter().sum::<f64>() / self.len().max(1) as f64
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("k,t,theta,map_word\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.k[i], self.t[i], self.theta[i], self.map_word[i]
            ));
        }
        out
    }

    pub fn read_csv<R: std::io::Read>(feature: &str, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut cols = BTreeMap::new();
        for name in ["k", "t", "theta", "map_word"] {
            let i = header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))?;
            cols.insert(name, i);
        }
        let mut trace = AnomalyTrace {
            feature: feature.to_string(),
            k: Vec::new(),
            t: Vec::new(),
            theta: Vec::new(),
            map_word: Vec::new(),
        };
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |name: &str| rec[cols[name]].trim().to_string();
            let bad = |name: &str, value: String| Error::InvalidValue {
                row,
                column: name.to_string(),
                value,
            };
            let k = field("k");
            trace.k.push(k.parse().map_err(|_| bad("k", k))?);
            let t = field("t");
            trace.t.push(t.parse().map_err(|_| bad("t", t))?);
            let th = field("theta");
            let theta: f64 = th.parse().map_err(|_| bad("theta", th.clone()))?;
            if !(0.0..=1.0).contains(&theta) {
                return Err(bad("theta", th));
            }
            trace.theta.push(theta);
            let w = field("map_word");
            trace.map_word.push(w.parse().map_err(|_| bad("map_word", w))?);
        }
        Ok(trace)
    }

    /// Ground-truth labels for the scored ticks. The ground truth must cover
    /// every tick of the run, including tick 0.
    pub fn aligned_labels(&self, gt: &crate::eval::GroundTruth) -> Result<Vec<bool>> {
        if gt.len() != self.len() + 1 {
            return Err(Error::LengthMismatch {
                left: self.len() + 1,
                right: gt.len(),
            });
        }
        let labels = gt.labels();
        self.k
            .iter()
            .zip(&self.t)
            .map(|(&k, &t)| {
                let ok = k < gt.len() && (gt.timestamps[k] - t).abs() <= 1e-9 * (1.0 + t.abs());
                if ok {
                    Ok(labels[k])
                } else {
                    Err(Error::LengthMismatch {
                        left: k,
                        right: gt.len(),
                    })
                }
            })
            .collect()
    }
}

/// Runs the filter of `model` over `series`.
pub fn detect(model: &ModelFile, series: &SensorSeries, particles: usize, seed: u64) -> Result<AnomalyTrace> {
    let steps = run_sequence(&model.model, series, particles, seed)?;
    let ts = series.timestamps();
    Ok(AnomalyTrace {
        feature: model.feature.clone(),
        k: steps.iter().map(|s| s.tick).collect(),
        t: steps.iter().map(|s| ts[s.tick]).collect(),
        theta: steps.iter().map(|s| s.theta).collect(),
        map_word: steps.iter().map(|s| s.map_word).collect(),
    })
}
