use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use ugrasp::dropoutnet::{read_checkpoint, train, train_from, write_checkpoint, write_loss_log};
use ugrasp::planner::{robust_plan, RunArtifact, SampleMode};
use ugrasp::simlab::{run_experiment, Dataset, ExperimentReport, Split};
use ugrasp::voxelgrid::read_cloud;

use crate::config::RunConfig;
use crate::{Cli, Command, ReportFormat};

pub fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().context("starting worker pool")?;
    }
    match cli.command {
        Command::GenData { common, out } => {
            let cfg = RunConfig::load(common.config.as_deref())?;
            gen_data(&cfg, common.seed, &out)
        }
        Command::Train { common, data, out, resume, loss_log } => {
            let cfg = RunConfig::load(common.config.as_deref())?;
            let log = loss_log.unwrap_or_else(|| sibling(&out, "loss.csv"));
            train_cmd(&cfg, common.seed, &data, &out, resume.as_deref(), &log)
        }
        Command::Plan { common, checkpoint, cloud, out, samples, no_dropout, top } => {
            let mut cfg = RunConfig::load(common.config.as_deref())?;
            if let Some(s) = samples {
                cfg.plan.samples = s;
            }
            if let Some(t) = top {
                cfg.plan.top = t;
            }
            if cfg.plan.samples == 0 {
                bail!("--samples must be >= 1");
            }
            plan(&cfg, common.seed, &checkpoint, &cloud, &out, no_dropout)
        }
        Command::Experiment { common, data, checkpoint, out, splits } => {
            let mut cfg = RunConfig::load(common.config.as_deref())?;
            if let Some(s) = splits {
                cfg.experiment.splits = s;
            }
            experiment(&cfg, common.seed, &data, &checkpoint, &out)
        }
        Command::Report { input, format, out } => report(&input, format, out.as_deref()),
        Command::Config => {
            print!("{}", RunConfig::default().to_toml());
            Ok(())
        }
    }
}

/// `<path>.<ext>` next to `path`.
fn sibling(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating directory {}", dir.display()))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn gen_data(cfg: &RunConfig, seed: u64, out: &Path) -> anyhow::Result<()> {
    create_dir(out)?;
    let dataset = Dataset::generate(&cfg.dataset, seed)?;
    let manifest = dataset.write(out)?;
    for s in &manifest.splits {
        println!("{:<15} {:>4} objects {:>5} views", s.split.name(), s.objects.len(), s.views.len());
    }
    Ok(())
}

fn train_cmd(
    cfg: &RunConfig,
    seed: u64,
    data: &Path,
    out: &Path,
    resume: Option<&Path>,
    loss_log: &Path,
) -> anyhow::Result<()> {
    let dataset = Dataset::read(data)?;
    let pairs = dataset.training_pairs()?;
    let tc = cfg.train.with_seed(seed);
    let report = match resume {
        Some(path) => train_from(&pairs, read_checkpoint(path)?, &tc)?,
        None => train(&pairs, &cfg.train.network(dataset.config.grid), &tc)?,
    };
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_checkpoint(out, &report.params)?;
    write_loss_log(loss_log, &report.epoch_losses)?;
    match report.epoch_losses.last() {
        Some(l) => println!("{} pairs, {} epochs, final loss {l:.6}", pairs.len(), report.epoch_losses.len()),
        None => println!("{} pairs, 0 epochs", pairs.len()),
    }
    Ok(())
}

fn plan(cfg: &RunConfig, seed: u64, checkpoint: &Path, cloud: &Path, out: &Path, no_dropout: bool) -> anyhow::Result<()> {
    let params = read_checkpoint(checkpoint)?;
    let cloud = read_cloud(cloud)?;
    let mode = if no_dropout { SampleMode::Deterministic } else { SampleMode::Dropout };
    let result = robust_plan(&cloud, &params, cfg.plan.samples, mode, &cfg.plan.config, seed)?;
    let artifact = RunArtifact::new(&cloud, &params, seed, mode, &cfg.plan.config, &result);
    write_text(out, &artifact.to_json())?;
    if artifact.point_estimate {
        println!("point-estimate mode (1 sample, dropout off)");
    }
    println!(
        "{} of {} candidates kept, {} samples",
        result.diagnostics.candidates_kept, result.diagnostics.candidates_requested, result.diagnostics.samples
    );
    println!("rank  index  {:>12}  approach point", format!("{:?}", cfg.plan.config.metric).to_lowercase());
    for (k, r) in result.ranking.iter().take(cfg.plan.top).enumerate() {
        let p = r.grasp.approach_point;
        println!("{:>4}  {:>5}  {:>12.6e}  ({:.4}, {:.4}, {:.4})", k + 1, r.index, r.mean, p.x, p.y, p.z);
    }
    Ok(())
}

fn experiment(cfg: &RunConfig, seed: u64, data: &Path, checkpoint: &Path, out: &Path) -> anyhow::Result<()> {
    let dataset = Dataset::read(data)?;
    let params = read_checkpoint(checkpoint)?;
    if cfg.experiment.splits.contains(&Split::Training) {
        log::warn!("running the experiment on the training split");
    }
    let report = run_experiment(&dataset, &params, &cfg.experiment, seed)?;
    create_dir(out)?;
    write_text(&out.join("report.json"), &report.to_json())?;
    let table = report.to_table();
    write_text(&out.join("report.txt"), &table)?;
    write_text(&out.join("scores.csv"), &report.to_csv())?;
    print!("{table}");
    Ok(())
}

fn report(input: &Path, format: ReportFormat, out: Option<&Path>) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let report = ExperimentReport::from_json(&text).map_err(|e| anyhow::anyhow!("{}: {e}", input.display()))?;
    let rendered = match format {
        ReportFormat::Table => report.to_table(),
        ReportFormat::Csv => report.to_csv(),
        ReportFormat::Json => report.to_json(),
    };
    match out {
        Some(p) => write_text(p, &rendered),
        None => {
            print!("{rendered}");
            Ok(())
        }
    }
}
