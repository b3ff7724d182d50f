use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::bench::{run_bench, BenchOptions};
use super::config::{Format, RunConfig};
use super::synth::{barbell, triadic, BarbellParams, TriadicParams};
use crate::error::{Error, Result};
use crate::eval::{evaluate_inductive, EvalReport, Warmup};
use crate::graph::{chronological_split, inductive_mask, load_edge_list, load_jodie_csv, Dataset, NodeId, SplitPlan};
use crate::neural::{eval_sampler, final_reports, fit, load_model, save_model, Ablations, Model};

#[derive(Debug, Parser)]
#[command(name = "tlink", version, about = "Streaming temporal link prediction")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Config file of `key=value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// Output directory.
    #[arg(long, env = "TLINK_OUT", global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Val,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Transductive,
    Inductive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    Triadic,
    Barbell,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train with early stopping and write the run directory.
    Train {
        #[arg(long)]
        data: PathBuf,
    },
    /// Score a split with a saved model.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Split record written by `train`; rebuilt from the config if absent.
        #[arg(long)]
        split_file: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long, value_enum, default_value = "transductive")]
        mode: ModeArg,
        /// Inductive only: warm caches with masked edges removed.
        #[arg(long)]
        masked_history: bool,
    },
    /// Train the base model and each variant; print test AP deltas.
    Ablate {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated variants; `+` combines switches, e.g. `no_de+no_hop2`.
        #[arg(long, default_value = "no_hop2,no_hop1_hop2,no_tenc,rnn_as_linear,mean_readout,no_de")]
        variants: String,
    },
    /// Cache throughput and memory as JSON lines.
    Bench {
        #[arg(long, default_value_t = 5000)]
        events: usize,
        #[arg(long, value_delimiter = ',', default_value = "1,32,100,1000")]
        batch_sizes: Vec<usize>,
    },
    /// Write a synthetic edge list.
    Synth {
        #[arg(long, value_enum, default_value = "triadic")]
        kind: SynthKind,
        #[arg(long, default_value_t = 2000)]
        events: usize,
        /// Destination file; stdout if absent.
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Show a node's cache after replaying a prefix of the stream.
    InspectCache {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Node id as written in the data file.
        #[arg(long)]
        node: u64,
        /// Number of events to replay; all if absent.
        #[arg(long)]
        upto: Option<usize>,
    },
    /// Print the joint features of one candidate link as JSON.
    DumpFeatures {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        u: u64,
        #[arg(long)]
        v: u64,
        #[arg(long)]
        upto: Option<usize>,
    },
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code: 0 on success, 2 on usage errors, 1 otherwise.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match execute(&cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn resolve_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for kv in &common.set {
        cfg.assign(kv)?;
    }
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    if let Some(s) = common.seed {
        cfg.train.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_threads(n: usize) {
    if n > 0 {
        // a second call fails harmlessly when the pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

pub fn load_dataset(path: &Path, format: Format) -> Result<Dataset> {
    let jodie = match format {
        Format::Jodie => true,
        Format::EdgeList => false,
        Format::Auto => path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")),
    };
    if jodie {
        load_jodie_csv(path)
    } else {
        load_edge_list(path)
    }
}

fn make_plan(ds: &Dataset, cfg: &RunConfig) -> Result<SplitPlan> {
    let plan = chronological_split(ds, cfg.train_frac, cfg.val_frac)?;
    Ok(if cfg.mask_prob > 0.0 {
        inductive_mask(ds, &plan, cfg.mask_prob, cfg.mask_seed)
    } else {
        plan
    })
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("tlink-run"));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn jsonl<T: serde::Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| serde_json::to_string(i).expect("serializable") + "\n")
        .collect()
}

fn internal_id(ds: &Dataset, original: u64) -> Result<NodeId> {
    ds.original_ids
        .iter()
        .skip(1)
        .position(|&o| o == original)
        .map(|p| (p + 1) as NodeId)
        .ok_or_else(|| Error::Config(format!("node {original} does not appear in the data")))
}

fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let mut cfg = resolve_config(&cli.common)?;
    for w in cfg.warnings() {
        let _ = writeln!(err, "warning: {w}");
    }
    init_threads(cfg.threads);
    let say = |out: &mut dyn Write, s: String| {
        let _ = writeln!(out, "{s}");
    };
    match &cli.command {
        Command::Train { data } => {
            cfg.data = Some(data.clone());
            let ds = load_dataset(data, cfg.format)?;
            let plan = make_plan(&ds, &cfg)?;
            let dir = out_dir(&cfg)?;
            write_file(&dir.join("config.txt"), &cfg.to_text())?;
            write_file(&dir.join("split.txt"), &plan.to_record())?;
            let mut history = Vec::new();
            let r = fit(&ds, &plan, cfg.model_config(ds.d_e), &cfg.train, |s| {
                say(&mut *out, serde_json::to_string(s).expect("serializable"));
                history.push(s.clone());
            })?;
            write_file(&dir.join("metrics.jsonl"), &jsonl(&history))?;
            save_model(&r.model, dir.join("model.bin"))?;
            let mut reports = vec![r.val, r.test];
            if !plan.masked_nodes.is_empty() {
                let sampler = eval_sampler(&ds, cfg.train.seed);
                match evaluate_inductive(&ds, &plan, &r.model, &sampler, cfg.train.eval_batch_size, Warmup::FullReplay) {
                    Ok(rep) => reports.push(rep),
                    Err(Error::EmptyInductiveSet) => {
                        let _ = writeln!(err, "warning: no test edge touches a masked node");
                    }
                    Err(e) => return Err(e),
                }
            }
            let text = reports.iter().map(|r| r.to_json() + "\n").collect::<String>();
            write_file(&dir.join("report.jsonl"), &text)?;
            let _ = write!(out, "{text}");
        }
        Command::Eval { data, model, split_file, split, mode, masked_history } => {
            let ds = load_dataset(data, cfg.format)?;
            let model = load_model(model)?;
            let plan = match split_file {
                Some(p) => SplitPlan::from_record(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
                None => make_plan(&ds, &cfg)?,
            };
            let rep = eval_command(&ds, &plan, &model, &cfg, *split, *mode, *masked_history)?;
            say(out, rep.to_json());
        }
        Command::Ablate { data, variants } => {
            let ds = load_dataset(data, cfg.format)?;
            let plan = make_plan(&ds, &cfg)?;
            let rows = ablate(&ds, &plan, &cfg, variants)?;
            say(out, format!("{:<32} {:>8} {:>8}", "variant", "test_ap", "delta"));
            for (name, ap, delta) in &rows {
                say(out, format!("{name:<32} {ap:>8.4} {delta:>+8.4}"));
            }
        }
        Command::Bench { events, batch_sizes } => {
            let opts = BenchOptions {
                events: *events,
                batch_sizes: batch_sizes.clone(),
                seed: cfg.train.seed,
            };
            let recs = run_bench(cfg.model_config(0), &opts)?;
            let text: String = recs.iter().map(|r| r.to_json() + "\n").collect();
            if cfg.out.is_some() {
                write_file(&out_dir(&cfg)?.join("bench.jsonl"), &text)?;
            }
            let _ = write!(out, "{text}");
        }
        Command::Synth { kind, events, file } => {
            let seed = cfg.train.seed;
            let s = match kind {
                SynthKind::Triadic => triadic(&TriadicParams { events: *events, seed, ..Default::default() })?,
                SynthKind::Barbell => barbell(&BarbellParams { events: *events, seed, ..Default::default() })?,
            };
            let text = s.dataset.edge_list_string();
            match file {
                Some(p) => write_file(p, &text)?,
                None => {
                    let _ = write!(out, "{text}");
                }
            }
        }
        Command::InspectCache { data, model, node, upto } => {
            let ds = load_dataset(data, cfg.format)?;
            let model = load_model(model)?;
            let u = internal_id(&ds, *node)?;
            let store = warm_store(&ds, &model, *upto, cfg.train.batch_size)?;
            say(out, format!("original id {node} is internal id {u}; {} events replayed", store.events_seen()));
            let _ = write!(out, "{}", store.describe_node(u));
        }
        Command::DumpFeatures { data, model, u, v, upto } => {
            let ds = load_dataset(data, cfg.format)?;
            let model = load_model(model)?;
            let (iu, iv) = (internal_id(&ds, *u)?, internal_id(&ds, *v)?);
            let store = warm_store(&ds, &model, *upto, cfg.train.batch_size)?;
            let set = model.joint(&store, iu, iv);
            let feats: Vec<serde_json::Value> = set
                .features
                .iter()
                .map(|f| {
                    serde_json::json!({
                        "node": ds.original_ids[f.node as usize],
                        "de": f.de.render(),
                        "q": f.q,
                    })
                })
                .collect();
            let doc = serde_json::json!({
                "u": u,
                "v": v,
                "score": model.forward_link(&store, iu, iv),
                "features": feats,
            });
            say(out, doc.to_string());
        }
    }
    Ok(())
}

fn warm_store(ds: &Dataset, model: &Model, upto: Option<usize>, batch_size: usize) -> Result<crate::ncache::NCacheStore> {
    let n = upto.unwrap_or(ds.edges.len()).min(ds.edges.len());
    let mut store = model.new_store(ds.num_nodes)?;
    store.replay(&ds.edges[..n], batch_size, model)?;
    Ok(store)
}

/// Evaluates a saved model on one split. Transductive test scores follow a
/// committed pass over validation, matching the order used during training.
pub fn eval_command(
    ds: &Dataset,
    plan: &SplitPlan,
    model: &Model,
    cfg: &RunConfig,
    split: SplitArg,
    mode: ModeArg,
    masked_history: bool,
) -> Result<EvalReport> {
    let sampler = eval_sampler(ds, cfg.train.seed);
    match mode {
        ModeArg::Inductive => {
            if plan.masked_nodes.is_empty() {
                return Err(Error::Config(
                    "inductive evaluation needs masked nodes (set mask_prob or pass a split file with masked nodes)".into(),
                ));
            }
            if split == SplitArg::Val {
                return Err(Error::Config("inductive evaluation is defined on the test split".into()));
            }
            let warmup = if masked_history { Warmup::MaskedHistory } else { Warmup::FullReplay };
            evaluate_inductive(ds, plan, model, &sampler, cfg.train.eval_batch_size, warmup)
        }
        ModeArg::Transductive => {
            let stream = plan.training_stream(ds);
            let (val, test) = final_reports(ds, plan, model, &stream, &cfg.train)?;
            Ok(match split {
                SplitArg::Val => val,
                SplitArg::Test => test,
            })
        }
    }
}

/// Trains the base configuration and each variant; rows are
/// `(name, test AP, test AP minus base)`.
pub fn ablate(ds: &Dataset, plan: &SplitPlan, cfg: &RunConfig, variants: &str) -> Result<Vec<(String, f64, f64)>> {
    let base = fit(ds, plan, cfg.model_config(ds.d_e), &cfg.train, |_| {})?.test.ap;
    let mut rows = vec![("base".to_string(), base, 0.0)];
    for v in variants.split(',').map(str::trim).filter(|v| !v.is_empty()) {
        let mut ab: Ablations = cfg.ablations;
        for part in v.split('+') {
            ab.set(part)?;
        }
        let mut mc = cfg.model_config(ds.d_e);
        mc.ablations = ab;
        let ap = fit(ds, plan, mc, &cfg.train, |_| {})?.test.ap;
        rows.push((v.to_string(), ap, ap - base));
    }
    Ok(rows)
}
