//! `fsrl`: synthetic data, pretraining, meta-training, evaluation and
//! experiments from one binary.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical abort.

mod config;
mod data;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fsrl_core::evaluation::{evaluate_split, export_embeddings, run_ablation_matrix, sweep_few_shot_size};
use fsrl_core::kg::generate_synthetic_kg;
use fsrl_core::model::{Fsrl, Variant};
use fsrl_core::training::{meta_train, pretrain_embeddings, pretraining_graph, LogRecord, TrainObserver};
use fsrl_core::{EmbeddingTable64, Error, Result};
use serde_json::json;

use config::RunConfig;
use data::Dataset;

#[derive(Parser)]
#[command(name = "fsrl", version, about = "Few-shot relation learning for knowledge-graph completion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset directory with triples.tsv and split.json.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct ModelArgs {
    /// Embedding and model width.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    few_shot: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_episodes: Option<usize>,
    #[arg(long)]
    eval_interval: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Partition {
    Valid,
    Test,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic dataset directory.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train translation embeddings, or validate an external file.
    Pretrain {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
        /// Validate this embeddings file instead of training.
        #[arg(long)]
        external: Option<PathBuf>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Meta-train a model; writes model.ckpt, log.jsonl and run.json.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Evaluate a checkpoint on meta-valid or meta-test.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        partition: Partition,
        /// Also write the report as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and test every variant over several seeds.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long, value_delimiter = ',')]
        variants: Option<Vec<Variant>>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Train and test over several few-shot sizes.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Write refined candidate-pair embeddings of one relation.
    Export {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        relation: String,
        #[arg(long)]
        out: PathBuf,
    },
}

impl ModelArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(d) = self.dim {
            cfg.model.dim = d;
            cfg.pretrain.dim = d;
        }
        if let Some(v) = self.variant {
            cfg.variant = Some(v);
        }
        let t = &mut cfg.train;
        set(&mut t.seed, self.seed);
        set(&mut t.few_shot, self.few_shot);
        set(&mut t.batch_size, self.batch_size);
        set(&mut t.max_episodes, self.max_episodes);
        set(&mut t.eval_interval, self.eval_interval);
        set(&mut t.patience, self.patience);
        set(&mut t.adam.lr, self.lr);
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn json_text(value: &serde_json::Value) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn embeddings(path: &Path, ds: &Dataset, cfg: &RunConfig) -> Result<EmbeddingTable64> {
    data::load_embeddings(path, &ds.graph, cfg.model.dim)
}

/// Saves the last finite parameters when training diverges.
struct Guard {
    path: PathBuf,
    fingerprint: String,
}

impl TrainObserver<f64> for Guard {
    fn on_divergence(&mut self, model: &Fsrl<f64>) -> Result<()> {
        model.save_with_fingerprint(&self.path, &self.fingerprint)?;
        eprintln!("diverged; last finite parameters saved to {}", self.path.display());
        Ok(())
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { common, out, seed } => {
            let mut cfg = RunConfig::load(common.config.as_deref())?;
            set(&mut cfg.seed, seed);
            let cfg = cfg.finish()?;
            let fp = cfg.fingerprint()?;
            let syn = generate_synthetic_kg(&cfg.synth, cfg.seed).map_err(|e| Error::Config(e.to_string()))?;
            fs::create_dir_all(&out)?;
            syn.graph.save_tsv(&out.join(data::TRIPLES))?;
            syn.split_file.save(&out.join(data::SPLIT))?;
            syn.types.save(&out.join(data::TYPES), &syn.graph)?;
            let manifest = json!({ "fingerprint": fp, "config": cfg });
            write(&out.join("manifest.json"), &json_text(&manifest)?)?;
            println!("fingerprint {fp}");
            println!(
                "wrote {} triples, {} entities, {}/{}/{} task relations to {}",
                syn.graph.triples().len(),
                syn.graph.num_entities(),
                syn.split.meta_train.len(),
                syn.split.meta_valid.len(),
                syn.split.meta_test.len(),
                out.display()
            );
        }
        Command::Pretrain {
            common,
            data: d,
            out,
            external,
            dim,
            epochs,
            seed,
        } => {
            let mut cfg = RunConfig::load(common.config.as_deref())?;
            if let Some(dim) = dim {
                cfg.pretrain.dim = dim;
                cfg.model.dim = dim;
            }
            set(&mut cfg.pretrain.epochs, epochs);
            set(&mut cfg.pretrain.seed, seed);
            let cfg = cfg.finish()?;
            let fp = cfg.fingerprint()?;
            let ds = data::load(&d.data, &cfg.split)?;
            let table = match &external {
                Some(path) => embeddings(path, &ds, &cfg)?,
                None => {
                    let pg = pretraining_graph(&ds.graph, &ds.background, &ds.split);
                    pretrain_embeddings::<f64>(&pg, &cfg.pretrain)?
                }
            };
            write(&out, &format!("# fingerprint {fp}\n{}", table.to_text(&ds.graph)))?;
            println!("fingerprint {fp}");
            match external {
                Some(p) => println!("validated {} against the vocabularies; wrote {}", p.display(), out.display()),
                None => println!("pretrained d={} for {} epochs; wrote {}", cfg.pretrain.dim, cfg.pretrain.epochs, out.display()),
            }
        }
        Command::Train {
            common,
            data: d,
            embeddings: emb,
            out,
            model,
        } => {
            let mut cfg = RunConfig::load(common.config.as_deref())?;
            model.apply(&mut cfg);
            let cfg = cfg.finish()?;
            let fp = cfg.fingerprint()?;
            let ds = data::load(&d.data, &cfg.split)?;
            let table = embeddings(&emb, &ds, &cfg)?;
            fs::create_dir_all(&out)?;
            let init = Fsrl::new(cfg.model, cfg.train.seed)?;
            let mut guard = Guard {
                path: out.join("last_finite.ckpt"),
                fingerprint: fp.clone(),
            };
            let outcome = meta_train(init, &ds.split, &ds.background, &table, &cfg.train, &mut guard)?;
            outcome.model.save_with_fingerprint(&out.join("model.ckpt"), &fp)?;
            write(&out.join("log.jsonl"), &outcome.log.to_jsonl()?)?;
            let summary = json!({
                "fingerprint": fp,
                "config": cfg,
                "episodes": outcome.episodes,
                "best_valid_mrr": outcome.best_mrr,
            });
            write(&out.join("run.json"), &json_text(&summary)?)?;
            let evals = outcome.log.records.iter().filter(|r| matches!(r, LogRecord::Eval { .. })).count();
            println!("fingerprint {fp}");
            println!(
                "trained {} episodes ({evals} validations); best meta-valid MRR {:.4}; wrote {}",
                outcome.episodes,
                outcome.best_mrr,
                out.display()
            );
        }
        Command::Eval {
            common,
            data: d,
            embeddings: emb,
            checkpoint,
            partition,
            out,
        } => {
            let mut cfg = RunConfig::load(common.config.as_deref())?;
            let model = Fsrl::<f64>::load(&checkpoint)?;
            cfg.model = model.config;
            cfg.pretrain.dim = model.config.dim;
            cfg.variant = None;
            let cfg = cfg.finish()?;
            let ds = data::load(&d.data, &cfg.split)?;
            let table = embeddings(&emb, &ds, &cfg)?;
            let tasks = match partition {
                Partition::Valid => &ds.split.meta_valid,
                Partition::Test => &ds.split.meta_test,
            };
            let fp = match Fsrl::<f64>::stored_fingerprint(&checkpoint)? {
                Some(f) => f,
                None => cfg.fingerprint()?,
            };
            let report = evaluate_split(&model, tasks, &ds.background, &table)?.with_fingerprint(fp);
            print!("{}", report.table());
            if let Some(path) = out {
                write(&path, &json_text(&serde_json::to_value(&report)?)?)?;
            }
        }
        Command::Ablate {
            common,
            data: d,
            embeddings: emb,
            out,
            seeds,
            variants,
            model,
        } => {
            let mut cfg = RunConfig::load(common.config.as_deref())?;
            model.apply(&mut cfg);
            set(&mut cfg.experiment.seeds, seeds);
            set(&mut cfg.experiment.variants, variants);
            let cfg = cfg.finish()?;
            let fp = cfg.fingerprint()?;
            let ds = data::load(&d.data, &cfg.split)?;
            let table = embeddings(&emb, &ds, &cfg)?;
            let e = &cfg.experiment;
            let report = run_ablation_matrix(&ds.split, &ds.background, &table, cfg.model, &cfg.train, &e.variants, &e.seeds)?;
            let text = format!("# fingerprint {fp}\n{}", report.table());
            fs::create_dir_all(&out)?;
            write(&out.join("ablation.txt"), &text)?;
            let full = json!({ "fingerprint": fp, "config": cfg, "report": report });
            write(&out.join("ablation.json"), &json_text(&full)?)?;
            print!("{text}");
        }
        Command::Sweep {
            common,
            data: d,
            embeddings: emb,
            out,
            ks,
            seeds,
            model,
        } => {
            let mut cfg = RunConfig::load(common.config.as_deref())?;
            model.apply(&mut cfg);
            set(&mut cfg.experiment.ks, ks);
            set(&mut cfg.experiment.seeds, seeds);
            let cfg = cfg.finish()?;
            let fp = cfg.fingerprint()?;
            let ds = data::load(&d.data, &cfg.split)?;
            let table = embeddings(&emb, &ds, &cfg)?;
            let e = &cfg.experiment;
            let report = sweep_few_shot_size(
                &ds.split,
                &ds.split_config,
                &ds.background,
                &table,
                cfg.model,
                &cfg.train,
                &e.ks,
                &e.seeds,
            )?;
            for p in report.points.iter().filter(|p| !p.skipped.is_empty()) {
                eprintln!("K={}: skipped relations with too few pairs: {}", p.few_shot, p.skipped.join(", "));
            }
            let text = format!("# fingerprint {fp}\n{}", report.series());
            fs::create_dir_all(&out)?;
            write(&out.join("sweep.tsv"), &text)?;
            let full = json!({ "fingerprint": fp, "config": cfg, "report": report });
            write(&out.join("sweep.json"), &json_text(&full)?)?;
            print!("{text}");
        }
        Command::Export {
            common,
            data: d,
            embeddings: emb,
            checkpoint,
            relation,
            out,
        } => {
            let mut cfg = RunConfig::load(common.config.as_deref())?;
            let model = Fsrl::<f64>::load(&checkpoint)?;
            cfg.model = model.config;
            cfg.pretrain.dim = model.config.dim;
            cfg.variant = None;
            let cfg = cfg.finish()?;
            let ds = data::load(&d.data, &cfg.split)?;
            let table = embeddings(&emb, &ds, &cfg)?;
            let r = ds.graph.relation(&relation)?;
            let task = ds
                .split
                .meta_valid
                .iter()
                .chain(&ds.split.meta_test)
                .find(|t| t.relation == r)
                .ok_or_else(|| Error::Config(format!("`{relation}` is not a meta-valid or meta-test relation")))?;
            let fp = match Fsrl::<f64>::stored_fingerprint(&checkpoint)? {
                Some(f) => f,
                None => cfg.fingerprint()?,
            };
            let exported = export_embeddings(&model, task, &ds.background, &table)?;
            write(&out, &exported.to_tsv(&ds.graph, &fp))?;
            println!("fingerprint {fp}");
            println!("wrote {} rows for `{relation}` to {}", exported.rows.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
