use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use staff_core::harness::{self, OverheadSpec, SweepResult, SweepSpec};
use staff_core::scoring::{ScoreFunction, ScoreKind};
use staff_core::selection::{self, Mode, SelectionConfig};
use staff_core::toy::{self, checkpoint, ParamScope};
use staff_core::ScoreTable;

/// Speculative coreset selection: score, plan verification, select, report.
#[derive(Parser)]
#[command(name = "staff", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score every sample of a dataset with a toy checkpoint.
    Score(ScoreArgs),
    /// List the ids the selection loop will send to the target model.
    Plan(PlanArgs),
    /// Select a coreset from score files.
    Select(SelectArgs),
    /// Join audits and metrics into a sorted report CSV.
    Report(ReportArgs),
    /// Build a toy model family and write its checkpoints and datasets.
    ToyFamily(ToyFamilyArgs),
    /// Run a pruning-rate sweep over the toy family.
    Sweep(SweepArgs),
    /// Run the speculative pipeline and its ablations over the toy family.
    Ablations(SweepArgs),
    /// Compare scoring cost of the small model, the target model and verification.
    Overhead(OverheadArgs),
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    /// Samples as JSON Lines: {"id", "features", "label"}.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "effort")]
    scorer: ScoreKind,
    #[arg(long, default_value = "last")]
    phi: ParamScope,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Stratification {
    #[arg(long, default_value_t = 50)]
    regions: usize,
    #[arg(long, default_value_t = 10)]
    verify_budget: usize,
    #[arg(long, default_value_t = 0.5)]
    prune_rate: f64,
    #[arg(long, env = "STAFF_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    spec_scores: PathBuf,
    #[command(flatten)]
    strat: Stratification,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    spec_scores: PathBuf,
    /// Needed for `staff` (verified ids only) and `staff-no-small` (every id).
    #[arg(long)]
    target_scores: Option<PathBuf>,
    #[arg(long, default_value = "staff")]
    mode: Mode,
    #[command(flatten)]
    strat: Stratification,
    #[arg(long)]
    no_topup: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    audit: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long = "audit")]
    audits: Vec<PathBuf>,
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Append per-cell mean and std rows.
    #[arg(long)]
    aggregate: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ToyFamilyArgs {
    /// Sweep config supplying task and training settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "STAFF_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Metrics CSV.
    #[arg(long)]
    out: PathBuf,
    /// Directory for one audit JSON per cell.
    #[arg(long)]
    audit_dir: Option<PathBuf>,
}

#[derive(Args)]
struct OverheadArgs {
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    #[arg(long, default_value_t = 50)]
    regions: usize,
    #[arg(long, default_value_t = 10)]
    verify_budget: usize,
    #[arg(long, env = "STAFF_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item)?;
        buf.push(b'\n');
    }
    write_file(path, &buf)
}

fn selection_config(strat: &Stratification, mode: Mode, topup: bool) -> SelectionConfig {
    SelectionConfig {
        prune_rate: strat.prune_rate,
        regions: strat.regions,
        verify_budget: strat.verify_budget,
        seed: strat.seed,
        mode,
        topup,
        ..SelectionConfig::default()
    }
}

fn load_spec(path: Option<&Path>) -> Result<SweepSpec> {
    Ok(match path {
        Some(p) => SweepSpec::load(p)?,
        None => SweepSpec::default(),
    })
}

fn score(args: ScoreArgs) -> Result<()> {
    let model = checkpoint::load(&args.model)?.with_scope(args.phi);
    let samples = toy::load_samples(&args.data)?;
    let table = ScoreFunction::with_model(args.scorer, &model)?.score_all(&samples)?;
    table.save(&args.out)?;
    Ok(())
}

fn plan(args: PlanArgs) -> Result<()> {
    let spec = ScoreTable::load(&args.spec_scores)?;
    let entries =
        selection::plan_verification(&spec, &selection_config(&args.strat, Mode::Staff, true))?;
    write_jsonl(&args.out, &entries)
}

fn select(args: SelectArgs) -> Result<()> {
    let spec = ScoreTable::load(&args.spec_scores)?;
    let target = args
        .target_scores
        .as_deref()
        .map(ScoreTable::load)
        .transpose()?;
    let cfg = selection_config(&args.strat, args.mode, !args.no_topup);
    let coreset = selection::select(spec.ids(), &spec, target.as_ref(), &cfg)?;
    write_file(&args.out, coreset.to_lines().as_bytes())?;
    write_file(&args.audit, coreset.audit.to_json().as_bytes())
}

fn report(args: ReportArgs) -> Result<()> {
    let audits = args
        .audits
        .iter()
        .map(harness::load_audit)
        .collect::<staff_core::Result<Vec<_>>>()?;
    let rows = match &args.metrics {
        Some(p) => harness::load_csv(p)?,
        None => Vec::new(),
    };
    harness::save_csv(&args.out, &harness::join(&audits, &rows, args.aggregate))?;
    Ok(())
}

fn toy_family(args: ToyFamilyArgs) -> Result<()> {
    let spec = load_spec(args.config.as_deref())?;
    spec.validate()?;
    let family = harness::Family::build(&spec, args.seed)?;
    let dir = &args.out_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    checkpoint::save(&family.small_tuned, dir.join("small.ckpt"))?;
    checkpoint::save(&family.target, dir.join("target.ckpt"))?;
    checkpoint::save(&family.foreign_tuned, dir.join("foreign.ckpt"))?;
    toy::save_samples(dir.join("train.jsonl"), &family.data.train)?;
    toy::save_samples(dir.join("test.jsonl"), &family.data.test)?;
    Ok(())
}

fn write_sweep(result: &SweepResult, args: &SweepArgs) -> Result<()> {
    harness::save_csv(&args.out, &result.rows)?;
    if let Some(dir) = &args.audit_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for a in &result.audits {
            let name = format!("{}_p{}_s{}.json", a.method, a.prune_rate, a.seed);
            write_file(&dir.join(name), a.to_json().as_bytes())?;
        }
    }
    Ok(())
}

fn sweep(args: SweepArgs, ablations: bool) -> Result<()> {
    let spec = load_spec(args.config.as_deref())?;
    let result = if ablations {
        harness::run_ablations(&spec)?
    } else {
        harness::run_sweep(&spec)?
    };
    write_sweep(&result, &args)
}

fn overhead(args: OverheadArgs) -> Result<()> {
    let spec = OverheadSpec {
        n: args.n,
        regions: args.regions,
        verify_budget: args.verify_budget,
        seed: args.seed,
        ..OverheadSpec::default()
    };
    let report = harness::overhead_probe(&spec)?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    write_file(&args.out, &buf)
}

/// The error chain joined with ": ", skipping causes already quoted by
/// the message above them.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

/// 2 for I/O failures, 4 for a missing score, 3 for anything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<staff_core::Error>() {
            return match e.root() {
                staff_core::Error::Io { .. } => 2,
                staff_core::Error::MissingScore(_) => 4,
                _ => 3,
            };
        }
        if cause.downcast_ref::<io::Error>().is_some() {
            return 2;
        }
    }
    3
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Score(a) => score(a),
        Command::Plan(a) => plan(a),
        Command::Select(a) => select(a),
        Command::Report(a) => report(a),
        Command::ToyFamily(a) => toy_family(a),
        Command::Sweep(a) => sweep(a, false),
        Command::Ablations(a) => sweep(a, true),
        Command::Overhead(a) => overhead(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(io::stderr(), "error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
