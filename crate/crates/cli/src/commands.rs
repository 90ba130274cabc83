use std::fs::File;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use egokit::eval::{class_mean, evaluate as score, select_model, smooth, EvalReport, GroundTruth};
use egokit::model::{detect as run_detect, train_model, AnomalyTrace, Config, ModelFile};
use egokit::scenario::{gen_perimeter, gen_uturn, ScenarioParams};
use egokit::signal::{enumerate_cases, ingest_csv_all, FeatureCase, SensorSeries};
use egokit::Error;

use crate::output::{ensure_dir, io_err, write_atomic, CliError, CliResult, Report, ReportEntry};
use crate::{CommonArgs, DetectArgs, EvaluateArgs, GenerateArgs, SelectArgs, TrainArgs};

pub fn generate(args: &GenerateArgs) -> CliResult<()> {
    let mut params = match &args.params {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => ScenarioParams::default(),
    };
    params.seed = args.seed;
    if let Some(v) = args.laps {
        params.laps = v;
    }
    if let Some(v) = args.dt {
        params.dt = v;
    }
    if let Some(v) = args.speed {
        params.speed = v;
    }
    if let Some(v) = args.noise_fraction {
        params.noise_fraction = v;
    }
    if let Some(v) = args.obstacle_fraction {
        params.obstacle_fraction = v;
    }
    let usage = |e: Error| CliError::Usage(e.to_string());
    let (train, _) = gen_perimeter(&params).map_err(usage)?;
    let (test, _, gt) = gen_uturn(&params).map_err(usage)?;
    ensure_dir(&args.out)?;
    write_atomic(&args.out.join("train.csv"), &train.to_csv_string())?;
    write_atomic(&args.out.join("test.csv"), &test.to_csv_string())?;
    write_atomic(&args.out.join("test_gt.csv"), &gt.to_csv_string())?;
    println!(
        "wrote {} training ticks and {} test ticks to {}",
        train.len(),
        test.len(),
        args.out.display()
    );
    Ok(())
}

fn load_config(path: Option<&Path>) -> CliResult<Config> {
    match path {
        Some(p) => Config::load(p).map_err(|e| match e {
            Error::Io(e) => io_err(p, e),
            e => CliError::Usage(format!("{}: {e}", p.display())),
        }),
        None => Ok(Config::default()),
    }
}

fn resolve_config(common: &CommonArgs) -> CliResult<Config> {
    let mut cfg = load_config(common.config.as_deref())?;
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = common.particles {
        cfg.particles = v;
    }
    if let Some(v) = common.order {
        cfg.order = v;
    }
    if let Some(v) = common.max_nodes {
        cfg.gng.max_nodes = v;
    }
    if let Some(v) = common.r_std {
        cfg.r_std = v;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

/// Reads a sensor CSV; I/O problems map to exit 2, content problems to
/// `content_err`.
fn read_series(path: &Path, content_err: fn(String) -> CliError) -> CliResult<SensorSeries> {
    ingest_csv_all(path).map_err(|e| match e {
        Error::Io(e) => io_err(path, e),
        e => content_err(format!("{}: {e}", path.display())),
    })
}

pub fn train(args: &TrainArgs) -> CliResult<()> {
    let cfg = resolve_config(&args.common)?;
    let series = read_series(&args.input, CliError::Train)?;
    let ids: Vec<String> = if args.all_features {
        enumerate_cases(series.channels())
            .map_err(|e| CliError::Train(e.to_string()))?
            .into_iter()
            .map(|c| c.id)
            .collect()
    } else if let Some(f) = &args.feature {
        vec![f.clone()]
    } else if let Some(fs) = &args.features {
        fs.clone()
    } else {
        return Err(CliError::Usage("pass --feature, --features or --all-features".into()));
    };
    let models: Vec<ModelFile> = ids
        .par_iter()
        .map(|id| {
            FeatureCase::parse(id, series.channels())
                .and_then(|case| train_model(&series, &case, &cfg))
                .map_err(|e| CliError::Train(format!("training failed for feature {id}: {e}")))
        })
        .collect::<CliResult<_>>()?;
    ensure_dir(&args.out)?;
    for m in &models {
        let path = args.out.join(format!("model_{}.json", m.feature));
        let json = m.to_json().map_err(|e| CliError::Train(e.to_string()))?;
        write_atomic(&path, &json)?;
        println!("{}", path.display());
    }
    Ok(())
}

/// `dir/<prefix>*<ext>` files in name order.
fn list_dir(dir: &Path, prefix: &str, ext: &str) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with(prefix) && name.ends_with(ext) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub fn detect(args: &DetectArgs) -> CliResult<()> {
    let cfg = resolve_config(&args.common)?;
    let mut paths = args.models.clone();
    if let Some(dir) = &args.model_dir {
        paths.extend(list_dir(dir, "model_", ".json")?);
    }
    if paths.is_empty() {
        return Err(CliError::Usage("no model files given".into()));
    }
    let models = paths
        .iter()
        .map(|p| {
            ModelFile::load(p).map_err(|e| match e {
                Error::Io(e) => io_err(p, e),
                e => CliError::Detect(format!("{}: {e}", p.display())),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let series = read_series(&args.input, CliError::Detect)?;
    for m in &models {
        if let Some(missing) = m.model.channels.iter().find(|c| series.channel_index(c).is_none()) {
            return Err(CliError::Detect(format!(
                "model {} needs channel `{missing}`, absent from {}",
                m.feature,
                args.input.display()
            )));
        }
    }
    let traces: Vec<AnomalyTrace> = models
        .par_iter()
        .map(|m| {
            run_detect(m, &series, cfg.particles, cfg.seed)
                .map_err(|e| CliError::Detect(format!("detection failed for feature {}: {e}", m.feature)))
        })
        .collect::<CliResult<_>>()?;
    ensure_dir(&args.out)?;
    for t in &traces {
        let path = args.out.join(format!("anomaly_{}.csv", t.feature));
        write_atomic(&path, &t.to_csv_string())?;
        println!("{}", path.display());
    }
    Ok(())
}

fn feature_of(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    stem.strip_prefix("anomaly_").unwrap_or(stem).to_string()
}

pub fn evaluate(args: &EvaluateArgs) -> CliResult<()> {
    let window = match args.smooth {
        Some(w) => w,
        None => load_config(args.config.as_deref())?.smoothing_window,
    };
    let mut paths = args.traces.clone();
    if let Some(dir) = &args.trace_dir {
        paths.extend(list_dir(dir, "anomaly_", ".csv")?);
    }
    if paths.is_empty() {
        return Err(CliError::Usage("no anomaly traces given".into()));
    }
    let gt_file = File::open(&args.gt).map_err(|e| io_err(&args.gt, e))?;
    let gt = GroundTruth::read_csv(gt_file).map_err(|e| CliError::Eval(format!("{}: {e}", args.gt.display())))?;

    let mut reports = Vec::new();
    let mut entries = Vec::new();
    for path in &paths {
        let feature = feature_of(path);
        let file = File::open(path).map_err(|e| io_err(path, e))?;
        let eval_err = |e: Error| CliError::Eval(format!("{}: {e}", path.display()));
        let trace = AnomalyTrace::read_csv(&feature, file).map_err(eval_err)?;
        let labels = trace.aligned_labels(&gt).map_err(eval_err)?;
        let scores = smooth(&trace.theta, window);
        let rep = score(&feature, &scores, &labels).map_err(eval_err)?;
        entries.push(ReportEntry {
            feature: feature.clone(),
            auc: rep.auc,
            best_acc: rep.best_acc,
            threshold: rep.threshold,
            mean_theta_abnormal: class_mean(&trace.theta, &labels, true),
            mean_theta_normal: class_mean(&trace.theta, &labels, false),
            ticks: trace.len(),
        });
        reports.push(rep);
    }
    let ranking: Vec<String> = select_model(&reports)
        .map_err(|e| CliError::Eval(e.to_string()))?
        .into_iter()
        .map(|r| r.feature)
        .collect();
    entries.sort_by_key(|e| ranking.iter().position(|f| *f == e.feature));

    ensure_dir(&args.out)?;
    for rep in &reports {
        let mut csv = String::from("threshold,tpr,fpr\n");
        for p in &rep.roc {
            csv.push_str(&format!("{},{},{}\n", p.threshold, p.tpr, p.fpr));
        }
        write_atomic(&args.out.join(format!("roc_{}.csv", rep.feature)), &csv)?;
    }
    let report = Report {
        smoothing_window: window,
        ranking,
        entries,
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Eval(e.to_string()))?;
    let path = args.out.join("report.json");
    write_atomic(&path, &json)?;
    println!("{}", path.display());
    Ok(())
}

pub fn select(args: &SelectArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&args.report).map_err(|e| io_err(&args.report, e))?;
    let report: Report =
        serde_json::from_str(&text).map_err(|e| CliError::Eval(format!("{}: {e}", args.report.display())))?;
    let as_eval: Vec<EvalReport> = report
        .entries
        .iter()
        .map(|e| EvalReport {
            feature: e.feature.clone(),
            auc: e.auc,
            best_acc: e.best_acc,
            threshold: e.threshold,
            roc: Vec::new(),
        })
        .collect();
    let ranked = select_model(&as_eval).map_err(|e| CliError::Eval(e.to_string()))?;
    for r in ranked {
        println!("{}\tauc={:.6}\tacc={:.6}", r.feature, r.auc, r.best_acc);
    }
    Ok(())
}
