use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;

use semprox_core::corpus::{filter_gold, parse_gold, parse_instances, parse_judgments, split, write_gold, SplitSizes};
use semprox_core::prompt::{emit_finetune_dataset, validate_finetune_file};
use semprox_core::provider::record_fixture;
use semprox_core::runner::{self, annotate_split, load_run, sweep_table, RunError, Summary};
use semprox_core::{Grid, RunOptions, SweepResult};

use crate::config::{prepare, read, Overrides, RunConfig};
use crate::failure::{invalid, Classify, CmdResult, Failure};

fn write(path: &Path, content: &str) -> CmdResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display())).runtime()?;
    }
    fs::write(path, content).with_context(|| format!("writing {}", path.display())).runtime()
}

fn run_failure(err: RunError) -> Failure {
    match err {
        RunError::NoTrials | RunError::EmptyGrid | RunError::Prompt(_) => Failure::Invalid(err.into()),
        other => Failure::Runtime(other.into()),
    }
}

pub fn ingest(instances: &Path, judgments: &Path, out: &Path) -> CmdResult {
    let pairs = parse_instances(&read(instances)?).with_context(|| instances.display().to_string()).invalid()?;
    let records = parse_judgments(&read(judgments)?).with_context(|| judgments.display().to_string()).invalid()?;
    if records.is_empty() {
        eprintln!("warning: {} holds no judgments; every instance is dropped", judgments.display());
    }
    let gold = filter_gold(&pairs, &records).invalid()?;
    write(out, &write_gold(&gold))?;
    eprintln!("kept {} / {}", gold.len(), pairs.len());
    Ok(())
}

pub fn split_gold(gold: &Path, sizes: SplitSizes, seed: u64, out_dir: &Path) -> CmdResult {
    let gold = parse_gold(&read(gold)?).with_context(|| gold.display().to_string()).invalid()?;
    let parts = split(&gold, sizes, seed).invalid()?;
    for (name, items) in [("dev", &parts.dev), ("train", &parts.train), ("test", &parts.test)] {
        write(&out_dir.join(format!("{name}.tsv")), &write_gold(items))?;
    }
    eprintln!("dev {} / train {} / test {} (seed {seed})", parts.dev.len(), parts.train.len(), parts.test.len());
    Ok(())
}

pub fn finetune_prep(train: &Path, out: &Path) -> CmdResult {
    let gold = parse_gold(&read(train)?).with_context(|| train.display().to_string()).invalid()?;
    let content = emit_finetune_dataset(&gold);
    let records = validate_finetune_file(&content).context("emitted file failed validation").runtime()?;
    write(out, &content)?;
    eprintln!("wrote {records} records to {}", out.display());
    Ok(())
}

/// A run directory built under a hidden sibling and moved into place only
/// when the run succeeds.
struct Staging {
    tmp: PathBuf,
    dest: PathBuf,
    committed: bool,
}

impl Staging {
    fn new(output_dir: &Path, run_id: &str, force: bool) -> CmdResult<Staging> {
        let dest = output_dir.join(run_id);
        let occupied = fs::read_dir(&dest).map(|mut d| d.next().is_some()).unwrap_or(false);
        if occupied && !force {
            return Err(invalid(format!("{} already exists; pass --force to replace it", dest.display())));
        }
        if dest.exists() && !dest.is_dir() {
            return Err(invalid(format!("{} exists and is not a directory", dest.display())));
        }
        let tmp = output_dir.join(format!(".{run_id}.partial"));
        if tmp.exists() {
            fs::remove_dir_all(&tmp).with_context(|| format!("clearing {}", tmp.display())).runtime()?;
        }
        fs::create_dir_all(&tmp).with_context(|| format!("creating {}", tmp.display())).runtime()?;
        Ok(Staging { tmp, dest, committed: false })
    }

    fn commit(mut self) -> CmdResult<PathBuf> {
        if self.dest.exists() {
            fs::remove_dir_all(&self.dest).with_context(|| format!("replacing {}", self.dest.display())).runtime()?;
        }
        fs::rename(&self.tmp, &self.dest).with_context(|| format!("moving run into {}", self.dest.display())).runtime()?;
        self.committed = true;
        Ok(self.dest.clone())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.tmp);
        }
    }
}

fn effective_config(config: &RunConfig) -> String {
    let mut s = serde_json::to_string_pretty(config).expect("serializable");
    s.push('\n');
    s
}

pub fn annotate(config_path: &Path, overrides: &Overrides, record: Option<&Path>, force: bool) -> CmdResult {
    let mut config = RunConfig::load(config_path)?;
    config.apply(overrides);
    let run = prepare(&config)?;
    if let Some(path) = record {
        if path.is_dir() {
            return Err(invalid(format!("{} is a directory", path.display())));
        }
    }
    let run_id = run.run_id.clone().unwrap_or_else(|| {
        format!("{}-t{}-p{}", run.builder.strategy().name(), run.model.temperature, run.model.top_p)
    });

    let staging = Staging::new(&run.output_dir, &run_id, force)?;
    write(&staging.tmp.join("config.json"), &effective_config(&config))?;
    let options = RunOptions { trials: run.trials, concurrency: run.concurrency, run_dir: Some(staging.tmp.clone()) };
    let results = annotate_split(&run.items, &run.builder, &run.model, run.provider.as_ref(), &options)
        .map_err(run_failure)?;
    let dir = staging.commit()?;

    if let Some(path) = record {
        let responses: Vec<(String, String)> = results[0]
            .responses
            .iter()
            .filter_map(|r| r.response.clone().map(|text| (r.instance_id.clone(), text)))
            .collect();
        write(path, &record_fixture(&responses).runtime()?)?;
        eprintln!("recorded {} responses to {}", responses.len(), path.display());
    }
    print!("{}", read(&dir.join("summary.txt"))?);
    eprintln!("run directory: {}", dir.display());
    Ok(())
}

pub fn sweep(config_path: &Path, overrides: &Overrides, temperatures: &[f64], top_ps: &[f64], force: bool) -> CmdResult {
    let mut config = RunConfig::load(config_path)?;
    config.apply(overrides);
    let run = prepare(&config)?;
    let full = Grid::full();
    let grid = Grid {
        temperatures: if temperatures.is_empty() { full.temperatures } else { temperatures.to_vec() },
        top_ps: if top_ps.is_empty() { full.top_ps } else { top_ps.to_vec() },
    };
    for (t, p) in grid.cells() {
        run.model.with_sampling(t, p).validate().invalid()?;
    }
    let run_id = run.run_id.clone().unwrap_or_else(|| format!("sweep-{}", run.builder.strategy().name()));

    let staging = Staging::new(&run.output_dir, &run_id, force)?;
    write(&staging.tmp.join("config.json"), &effective_config(&config))?;
    let options = RunOptions { trials: run.trials, concurrency: run.concurrency, run_dir: Some(staging.tmp.clone()) };
    let result = runner::sweep(&run.items, &run.builder, &run.model, run.provider.as_ref(), &grid, &options)
        .map_err(run_failure)?;
    let dir = staging.commit()?;
    print!("{}", sweep_table(&result));
    eprintln!("run directory: {}", dir.display());
    Ok(())
}

pub fn report(run_dir: &Path, json: bool) -> CmdResult {
    if !run_dir.is_dir() {
        return Err(invalid(format!("{} is not a directory", run_dir.display())));
    }
    let sweep_file = run_dir.join("sweep.json");
    if sweep_file.is_file() {
        let result: SweepResult = serde_json::from_str(&read(&sweep_file)?)
            .with_context(|| sweep_file.display().to_string())
            .invalid()?;
        if json {
            println!("{}", serde_json::to_string_pretty(&result).expect("serializable"));
        } else {
            print!("{}", sweep_table(&result));
        }
        return Ok(());
    }
    let trials = load_run(run_dir).map_err(|e| match e {
        RunError::EmptyInput => invalid(format!("{} holds no trial-* directories", run_dir.display())),
        other => Failure::Invalid(other.into()),
    })?;
    let summary = Summary::from_reports(trials).invalid()?;
    if json {
        println!("{}", serde_json::to_string_pretty(&summary).expect("serializable"));
    } else {
        print!("{}", summary.to_table());
    }
    Ok(())
}
