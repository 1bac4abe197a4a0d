use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context};
use stfp::eval::{
    dem, load_dataset_csv, strata_eval, write_plot, write_records, write_strata, write_summary, CsvOptions, Dataset,
    DemConfig, Metric, StrataConfig,
};
use stfp::fingerprints::{ecfp, random_projection_fingerprint, st_fingerprints};
use stfp::numerics::{pca_project, AdamConfig};
use stfp::predictors::{MlpConfig, ModelFamily, Task};
use stfp::smiles::parse;
use stfp::transformer::{corpus_vocab, load_checkpoint, save_checkpoint, train, ModelConfig, TrainConfig, TransformerModel};

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Kind {
    St,
    Ecfp,
    Random,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::St => "st",
            Kind::Ecfp => "ecfp",
            Kind::Random => "random",
        }
    }

    fn parse(s: &str) -> anyhow::Result<Kind> {
        Ok(match s {
            "st" => Kind::St,
            "ecfp" => Kind::Ecfp,
            "random" => Kind::Random,
            _ => bail!("unknown fingerprint kind {s:?} (expected st, ecfp or random)"),
        })
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn read_lines(path: &Path) -> anyhow::Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}

pub fn pretrain(cfg: &RunConfig, corpus: &Path, out: &Path) -> anyhow::Result<()> {
    let mut lines = read_lines(corpus)?;
    if cfg.corpus_limit > 0 {
        lines.truncate(cfg.corpus_limit);
    }
    let vocab = corpus_vocab(&lines);
    let mut mc = ModelConfig::new(0, cfg.layers, cfg.heads, cfg.d_model);
    mc.max_seq_len = cfg.max_seq_len;
    mc.dropout = cfg.dropout;
    let mut model = TransformerModel::<f32>::new(mc, vocab, cfg.seed)?;
    log::info!(
        "pre-training on {} lines: {} parameters, vocabulary {}",
        lines.len(),
        model.param_count(),
        model.vocab().len()
    );
    let tc = TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        enumerate: cfg.enumerate,
        seed: cfg.seed,
        adam: AdamConfig {
            lr: cfg.lr,
            ..Default::default()
        },
        max_steps: (cfg.max_steps > 0).then_some(cfg.max_steps),
    };
    let stats_path = out.with_extension("stats.csv");
    let mut stats_out = create(&stats_path)?;
    writeln!(stats_out, "epoch,step,mean_loss,perplexity,skipped")?;
    let mut write_error = None;
    train(&mut model, &lines, &tc, |s| {
        log::info!(
            "epoch {} step {} loss {:.4} perplexity {:.4} skipped {} ({:.0} tokens/s)",
            s.epoch,
            s.step,
            s.mean_loss,
            s.perplexity,
            s.skipped,
            s.tokens_per_sec
        );
        if let Err(e) = writeln!(stats_out, "{},{},{},{},{}", s.epoch, s.step, s.mean_loss, s.perplexity, s.skipped) {
            write_error.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_error {
        return Err(e).with_context(|| format!("writing {}", stats_path.display()));
    }
    stats_out.flush()?;
    save_checkpoint(&model, out)?;
    log::info!("wrote {}", out.display());
    Ok(())
}

fn need_model(checkpoint: Option<&Path>) -> anyhow::Result<TransformerModel<f32>> {
    let path = checkpoint.context("st fingerprints need --checkpoint")?;
    load_checkpoint(path).with_context(|| format!("loading {}", path.display()))
}

fn random_dims(cfg: &RunConfig, model: Option<&TransformerModel<f32>>) -> usize {
    match (cfg.random_dims, model) {
        (0, Some(m)) => 4 * m.config().d_model,
        (0, None) => 1024,
        (d, _) => d,
    }
}

pub fn embed(cfg: &RunConfig, checkpoint: Option<&Path>, input: &Path, kind: Kind, output: &Path) -> anyhow::Result<()> {
    let smiles = read_lines(input)?;
    let model = match kind {
        Kind::St => Some(need_model(checkpoint)?),
        _ => checkpoint.map(load_checkpoint).transpose()?,
    };
    let mut out = csv::WriterBuilder::new().flexible(true).from_writer(create(output)?);
    match kind {
        Kind::St => {
            let model = model.as_ref().unwrap();
            let width = 4 * model.config().d_model;
            let mut header = vec!["smiles".to_string()];
            header.extend((0..width).map(|i| format!("f{i}")));
            out.write_record(&header)?;
            for (s, fp) in smiles.iter().zip(st_fingerprints(model, &smiles, cfg.embed_batch)) {
                match fp {
                    Ok(v) => out.write_record(std::iter::once(s.clone()).chain(v.iter().map(|x| x.to_string())))?,
                    Err(e) => out.write_record([s.clone(), format!("error: {e}")])?,
                }
            }
        }
        Kind::Ecfp => {
            out.write_record(["smiles", "ecfp"])?;
            for s in &smiles {
                match parse(s) {
                    Ok(g) => out.write_record([s.clone(), ecfp(&g, cfg.ecfp_diameter, cfg.ecfp_bits).to_hex()])?,
                    Err(e) => out.write_record([s.clone(), format!("error: {e}")])?,
                }
            }
        }
        Kind::Random => {
            let dims = random_dims(cfg, model.as_ref());
            let mut header = vec!["smiles".to_string()];
            header.extend((0..dims).map(|i| format!("f{i}")));
            out.write_record(&header)?;
            for s in &smiles {
                match random_projection_fingerprint(s, cfg.seed, dims) {
                    Ok(v) => out.write_record(std::iter::once(s.clone()).chain(v.iter().map(|x| x.to_string())))?,
                    Err(e) => out.write_record([s.clone(), format!("error: {e}")])?,
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn dataset(cfg: &RunConfig, path: &Path) -> anyhow::Result<Dataset> {
    let task = match cfg.task_type.as_str() {
        "regression" => Task::Regression,
        "classification" => Task::Classification,
        t => bail!("unknown task type {t:?} (expected regression or classification)"),
    };
    let mut opts = CsvOptions::new(task);
    opts.smiles_column = cfg.smiles_column.clone();
    let tasks = RunConfig::list(&cfg.tasks);
    opts.tasks = (!tasks.is_empty()).then_some(tasks);
    if !cfg.metric.is_empty() {
        opts.metric = Some(cfg.metric.parse::<Metric>().map_err(anyhow::Error::msg)?);
    }
    let ds = load_dataset_csv(path, &opts).with_context(|| format!("loading {}", path.display()))?;
    log::info!(
        "{}: {} molecules, {} task(s), metric {}, {} rows dropped",
        ds.name,
        ds.len(),
        ds.task_names.len(),
        ds.metric,
        ds.dropped
    );
    Ok(ds)
}

/// One feature vector per dataset row. Rows the featurizer cannot handle get
/// a zero vector.
fn featurize(
    cfg: &RunConfig,
    kind: Kind,
    ds: &Dataset,
    model: Option<&TransformerModel<f32>>,
) -> anyhow::Result<Vec<Vec<f64>>> {
    let smiles: Vec<String> = ds.smiles().map(String::from).collect();
    let rows: Vec<Result<Vec<f64>, String>> = match kind {
        Kind::St => {
            let model = model.context("st fingerprints need --checkpoint")?;
            st_fingerprints(model, &smiles, cfg.embed_batch)
                .into_iter()
                .map(|r| r.map(|v| v.iter().map(|&x| x as f64).collect()).map_err(|e| e.to_string()))
                .collect()
        }
        Kind::Ecfp => smiles
            .iter()
            .map(|s| {
                parse(s)
                    .map(|g| ecfp(&g, cfg.ecfp_diameter, cfg.ecfp_bits).to_dense())
                    .map_err(|e| e.to_string())
            })
            .collect(),
        Kind::Random => {
            let dims = random_dims(cfg, model);
            smiles
                .iter()
                .map(|s| random_projection_fingerprint(s, cfg.seed, dims).map_err(|e| e.to_string()))
                .collect()
        }
    };
    let width = rows.iter().find_map(|r| r.as_ref().ok().map(Vec::len)).context("no molecule could be featurized")?;
    Ok(rows
        .into_iter()
        .zip(&smiles)
        .map(|(r, s)| {
            r.unwrap_or_else(|e| {
                log::warn!("{} fingerprint of {s:?} failed ({e}); using zeros", kind.name());
                vec![0.0; width]
            })
        })
        .collect())
}

fn family(cfg: &RunConfig) -> anyhow::Result<ModelFamily> {
    Ok(match cfg.predictor.as_str() {
        "linear" => ModelFamily::Linear { lambda: cfg.lambda },
        "mlp" => ModelFamily::Mlp(MlpConfig::default()),
        p => bail!("unknown predictor {p:?} (expected linear or mlp)"),
    })
}

fn kinds(cfg: &RunConfig, checkpoint: Option<&Path>) -> anyhow::Result<(Vec<Kind>, Option<TransformerModel<f32>>)> {
    let kinds = RunConfig::list(&cfg.fingerprints)
        .iter()
        .map(|k| Kind::parse(k))
        .collect::<anyhow::Result<Vec<_>>>()?;
    ensure!(!kinds.is_empty(), "no fingerprint kinds requested");
    let model = if kinds.contains(&Kind::St) {
        Some(need_model(checkpoint)?)
    } else {
        checkpoint.map(load_checkpoint).transpose()?
    };
    Ok((kinds, model))
}

pub fn bench(cfg: &RunConfig, checkpoint: Option<&Path>, dataset_path: &Path, out_dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let (kinds, model) = kinds(cfg, checkpoint)?;
    let family = family(cfg)?;
    let ds = dataset(cfg, dataset_path)?;
    let mut reports = Vec::new();
    for kind in kinds {
        let features = featurize(cfg, kind, &ds, model.as_ref())?;
        let dc = DemConfig {
            ladder: cfg.ladder.clone(),
            trials: cfg.trials,
            base_seed: cfg.seed,
            standardize: cfg.standardize && kind != Kind::Ecfp,
            jobs: cfg.jobs,
        };
        let tag = format!("{}+{}", kind.name(), cfg.predictor);
        let report = dem(&ds, &features, &family, &tag, &dc).with_context(|| format!("benchmarking {tag}"))?;
        log::info!("{} {tag}: DEM {} = {:.4}", ds.name, report.metric, report.dem);
        reports.push(report);
    }
    write_records(create(&out_dir.join("records.csv"))?, &reports)?;
    write_summary(create(&out_dir.join("summary.csv"))?, &reports)?;
    write_plot(create(&out_dir.join("plot.csv"))?, &reports)?;
    Ok(())
}

pub fn strata(cfg: &RunConfig, checkpoint: Option<&Path>, dataset_path: &Path, output: &Path) -> anyhow::Result<()> {
    let out = create(output)?;
    let (kinds, model) = kinds(cfg, checkpoint)?;
    let family = family(cfg)?;
    let ds = dataset(cfg, dataset_path)?;
    let mut reports = Vec::new();
    for kind in kinds {
        let features = featurize(cfg, kind, &ds, model.as_ref())?;
        let sc = StrataConfig {
            n_groups: cfg.groups,
            fraction: cfg.strata_fraction,
            trials: cfg.trials,
            base_seed: cfg.seed,
            standardize: cfg.standardize && kind != Kind::Ecfp,
            jobs: cfg.jobs,
        };
        let tag = format!("{}+{}", kind.name(), cfg.predictor);
        reports.push(strata_eval(&ds, &features, &family, &tag, &sc).with_context(|| format!("stratifying {tag}"))?);
    }
    write_strata(out, &reports)?;
    Ok(())
}

pub fn project(
    cfg: &RunConfig,
    checkpoint: Option<&Path>,
    dataset_path: &Path,
    kind: Kind,
    output: &Path,
) -> anyhow::Result<()> {
    let out = create(output)?;
    let model = match kind {
        Kind::St => Some(need_model(checkpoint)?),
        _ => checkpoint.map(load_checkpoint).transpose()?,
    };
    let ds = dataset(cfg, dataset_path)?;
    let features = featurize(cfg, kind, &ds, model.as_ref())?;
    let coords = pca_project(&features, cfg.k)?;
    let mut out = csv::Writer::from_writer(out);
    let mut header = vec!["smiles".to_string()];
    header.extend(ds.task_names.iter().cloned());
    header.extend((1..=cfg.k).map(|i| format!("pc{i}")));
    out.write_record(&header)?;
    for (row, z) in ds.rows.iter().zip(coords) {
        let mut rec = vec![row.smiles.clone()];
        rec.extend(row.labels.iter().map(|l| l.map_or(String::new(), |v| v.to_string())));
        rec.extend(z.iter().map(|v| v.to_string()));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}
