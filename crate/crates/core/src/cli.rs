//! Command-line front end. `run` parses arguments, dispatches, and maps
//! errors to exit codes: 0 success, 1 usage error, 2 data or model error.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::{self, Dataset, SplitMode};
use crate::error::{Error, Result};
use crate::estimators::{
    build_candidate_features, forward_stepwise, BasisKind, ImplicitConfig, ModelDocument, ModelSpec, StepwiseConfig,
};
use crate::eval::{self, featurize_samples, filter_zero_targets};
use crate::queue::{occupancy_to_delay, BaseFeature};
use crate::sim::{self, GridSpec, ServiceDistribution, ServiceKind, SimConfig, Topology};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Parser, Debug)]
#[command(name = "queue-kpi", version, about = "Queue occupancy and path latency estimation")]
struct Cli {
    /// Suppress summaries on stdout.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a grid of queues and networks into a dataset directory.
    GenData(GenData),
    /// Write the analytic features of every link as CSV.
    Featurize(Featurize),
    /// Forward stepwise feature selection; prints the ordered picks.
    Select(Select),
    /// Fit one model and write it as a TOML document.
    Fit(Fit),
    /// Predict occupancy (and delay, when link metadata allows) for every link.
    Predict(Predict),
    /// Benchmark models on a train/test split.
    Eval(Eval),
    /// Simulate one queue and print the estimates.
    Simulate(Simulate),
}

#[derive(Args, Debug)]
struct Common {
    /// Seed for every random choice.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Cap on worker threads.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct GenData {
    /// Grid specification (TOML). A built-in desk-scale grid is used when omitted.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Featurize {
    /// Dataset directory.
    #[arg(long)]
    data: PathBuf,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
    /// Also write transforms and pairwise products of the base features.
    #[arg(long)]
    expand: bool,
    /// Base features, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "rho,pi0,piK,lambda_e,rho_e,L,Se")]
    base: Vec<String>,
}

#[derive(Args, Debug)]
struct Select {
    #[arg(long)]
    data: PathBuf,
    /// Base features whose expanded candidate set is searched.
    #[arg(long, value_delimiter = ',', default_value = "rho,pi0,piK,lambda_e,rho_e,L,Se")]
    base: Vec<String>,
    #[arg(long, default_value_t = 4)]
    max_features: usize,
    /// Share of rows held out for scoring.
    #[arg(long, default_value_t = 0.2)]
    validation_fraction: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Linear,
    ExpPoly,
    Mm1k,
    Bernstein,
    Implicit,
}

#[derive(Args, Debug)]
struct Hyper {
    #[arg(long, value_enum)]
    kind: Kind,
    /// exp-poly degree.
    #[arg(long, default_value_t = 8)]
    degree: u32,
    /// Basis order for mm1k and bernstein.
    #[arg(long = "K", default_value_t = 32)]
    k: u32,
    /// Implicit-curve segment count.
    #[arg(long = "N", default_value_t = 12)]
    n: usize,
    /// Implicit-curve turn penalty.
    #[arg(long, default_value_t = 1e-5)]
    alpha: f64,
    /// Implicit-curve optimizer iterations.
    #[arg(long, default_value_t = ImplicitConfig::default().iterations)]
    iterations: usize,
    /// Linear-model features, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "pi0,L,rho_e,Se")]
    features: Vec<String>,
}

impl Hyper {
    fn spec(&self) -> Result<ModelSpec> {
        let spec = match self.kind {
            Kind::Linear => ModelSpec::Linear {
                features: self.features.clone(),
            },
            Kind::ExpPoly => ModelSpec::ExpPoly { degree: self.degree },
            Kind::Mm1k => ModelSpec::Basis {
                kind: BasisKind::Mm1k,
                k: self.k,
            },
            Kind::Bernstein => ModelSpec::Basis {
                kind: BasisKind::Bernstein,
                k: self.k,
            },
            Kind::Implicit => ModelSpec::Implicit(ImplicitConfig {
                segments: self.n,
                alpha: self.alpha,
                iterations: self.iterations,
                ..ImplicitConfig::default()
            }),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args, Debug)]
struct Fit {
    #[arg(long)]
    data: PathBuf,
    /// Output model file (TOML).
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    hyper: Hyper,
    /// Demote zero-occupancy links instead of failing on them.
    #[arg(long)]
    drop_zero: bool,
}

#[derive(Args, Debug)]
struct Predict {
    /// Model file written by `fit`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Output CSV file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Iid,
    BySize,
}

#[derive(Args, Debug)]
struct Eval {
    /// Dataset directory; split into train and test unless --test is given.
    #[arg(long)]
    data: PathBuf,
    /// Separate test dataset; --data is then used whole for training.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Model spec, repeatable: linear[:f1,f2,..], exp-poly:D, mm1k:K, bernstein:K, implicit:N:ALPHA.
    #[arg(long = "model")]
    models: Vec<String>,
    /// Train share of the split.
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[arg(long, value_enum, default_value = "iid")]
    split_mode: Mode,
    /// Output directory for report.csv, report.txt and plot.csv.
    #[arg(long)]
    out: PathBuf,
    /// Demote zero-occupancy links instead of failing on them.
    #[arg(long)]
    drop_zero: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Simulate {
    /// Poisson arrival rate, packets/second.
    #[arg(long)]
    lambda: f64,
    /// exp:RATE, det:TIME or tnorm:MEAN:STD.
    #[arg(long)]
    service: String,
    #[arg(long = "K")]
    k: u32,
    /// Measured arrivals.
    #[arg(long, default_value_t = 1_000_000)]
    events: u64,
    /// Warmup arrivals; defaults to 10% of --events.
    #[arg(long)]
    warmup: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

fn parse_service(s: &str) -> Result<ServiceDistribution> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |v: &str| {
        v.parse::<f64>()
            .map_err(|_| Error::invalid(format!("service {s:?}: cannot parse {v:?}")))
    };
    let dist = match parts.as_slice() {
        ["exp", rate] => ServiceDistribution::Exponential { rate: num(rate)? },
        ["det", time] => ServiceDistribution::Deterministic { time: num(time)? },
        ["tnorm", mean, std] => ServiceDistribution::TruncatedNormal {
            mean: num(mean)?,
            std: num(std)?,
        },
        _ => return Err(Error::invalid(format!("service {s:?}: expected exp:RATE, det:TIME or tnorm:MEAN:STD"))),
    };
    dist.validate()?;
    Ok(dist)
}

fn parse_base(names: &[String]) -> Result<Vec<BaseFeature>> {
    names.iter().map(|n| n.trim().parse()).collect()
}

/// Desk-scale grid: single queues and small networks at K = 32, with
/// exponential and truncated-normal service.
pub fn default_grid() -> GridSpec {
    GridSpec {
        loads: (1..=19).map(|i| i as f64 * 0.05).collect(),
        buffers: vec![32],
        services: vec![ServiceKind::Exponential, ServiceKind::TruncatedNormal { cv: 0.5 }],
        topologies: vec![
            Topology::Single,
            Topology::Chain { links: 3 },
            Topology::Star { leaves: 3 },
        ],
        capacities: vec![1e6],
        mean_packet_size: 1000.0,
        replications: 2,
        measured_events: sim::MIN_MEASURED_EVENTS,
        warmup_events: None,
    }
}

/// Files written by a command, removed again if the command fails.
#[derive(Default)]
struct Outputs {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
}

impl Outputs {
    fn file(&mut self, path: &Path) -> PathBuf {
        self.files.push(path.to_path_buf());
        path.to_path_buf()
    }

    fn dir(&mut self, path: &Path) -> Result<PathBuf> {
        if !path.exists() {
            fs::create_dir_all(path).map_err(|e| Error::io(path, e))?;
            self.dirs.push(path.to_path_buf());
        }
        Ok(path.to_path_buf())
    }

    fn discard(&self) {
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        for d in self.dirs.iter().rev() {
            let _ = fs::remove_dir_all(d);
        }
    }
}

fn write_text(outputs: &mut Outputs, path: &Path, text: &str) -> Result<()> {
    let path = outputs.file(path);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn load_checked(dir: &Path, drop_zero: bool, quiet: bool) -> Result<Dataset> {
    let data = dataset::load(dir)?;
    if !drop_zero {
        return Ok(data);
    }
    let (data, dropped) = filter_zero_targets(&data);
    if dropped > 0 && !quiet {
        eprintln!("demoted {dropped} zero-occupancy links to context");
    }
    Ok(data)
}

fn gen_data(cmd: &GenData, quiet: bool, outputs: &mut Outputs) -> Result<()> {
    let grid = match &cmd.grid {
        Some(file) => {
            let text = fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
            toml::from_str(&text).map_err(|e| Error::Malformed {
                file: file.clone(),
                line: 0,
                message: e.to_string(),
            })?
        }
        None => default_grid(),
    };
    let data = sim::generate_dataset(&grid, cmd.common.seed, cmd.common.threads)?;
    outputs.dir(&cmd.out)?;
    for name in [dataset::LINKS_FILE, dataset::PATHS_FILE, dataset::META_FILE] {
        outputs.file(&cmd.out.join(name));
    }
    dataset::save(&data, &cmd.out)?;
    if !quiet {
        println!(
            "wrote {} links and {} flows from {} runs to {}",
            data.links.len(),
            data.paths.len(),
            grid.runs(),
            cmd.out.display()
        );
    }
    Ok(())
}

fn featurize_cmd(cmd: &Featurize, outputs: &mut Outputs) -> Result<()> {
    let base = parse_base(&cmd.base)?;
    let data = dataset::load(&cmd.data)?;
    let (rows, y) = featurize_samples(&data)?;
    let ids: Vec<&str> = data.samples().map(|l| l.link_id.as_str()).collect();
    let (names, columns): (Vec<String>, Vec<Vec<f64>>) = if cmd.expand {
        let m = build_candidate_features(&base, &rows)?;
        (m.names(), m.columns)
    } else {
        (
            base.iter().map(ToString::to_string).collect(),
            base.iter().map(|b| rows.iter().map(|r| r.value(*b)).collect()).collect(),
        )
    };
    let path = outputs.file(&cmd.out);
    let wrap = |e: csv::Error| Error::invalid(format!("{}: {e}", path.display()));
    let mut wtr = csv::Writer::from_path(&path).map_err(wrap)?;
    let mut header = vec!["link_id".to_string()];
    header.extend(names);
    header.push("observed_occupancy".into());
    wtr.write_record(&header).map_err(wrap)?;
    for (i, id) in ids.iter().enumerate() {
        let mut rec = vec![id.to_string()];
        rec.extend(columns.iter().map(|c| c[i].to_string()));
        rec.push(y[i].to_string());
        wtr.write_record(&rec).map_err(wrap)?;
    }
    wtr.flush().map_err(|e| Error::io(&path, e))
}

fn select_cmd(cmd: &Select, quiet: bool) -> Result<()> {
    let base = parse_base(&cmd.base)?;
    let data = dataset::load(&cmd.data)?;
    let (rows, y) = featurize_samples(&data)?;
    let m = build_candidate_features(&base, &rows)?;
    let cfg = StepwiseConfig {
        max_features: cmd.max_features,
        validation_fraction: cmd.validation_fraction,
        seed: cmd.common.seed,
    };
    let r = forward_stepwise(&m, &y, &cfg)?;
    if !quiet {
        println!("baseline\t{:.4}", r.baseline);
    }
    for (i, (name, score)) in r.selected.iter().zip(&r.scores).enumerate() {
        println!("{}\t{name}\t{score:.4}", i + 1);
    }
    Ok(())
}

fn fit_cmd(cmd: &Fit, quiet: bool, outputs: &mut Outputs) -> Result<()> {
    let spec = cmd.hyper.spec()?;
    let data = load_checked(&cmd.data, cmd.drop_zero, quiet)?;
    let (rows, y) = featurize_samples(&data)?;
    let (model, report) = spec.fit(&rows, &y)?;
    let doc = ModelDocument::new(model, &report);
    write_text(outputs, &cmd.out, &doc.to_toml()?)?;
    if !quiet {
        println!(
            "{}: {} parameters, train MAPE {:.3}%, train MSE {:.4e}, {} samples, {:.3}s",
            report.model,
            doc.model.parameter_count(),
            report.train_mape,
            report.train_mse,
            report.samples,
            report.fit_seconds
        );
        if report.converged == Some(false) {
            println!("warning: optimizer stopped at its iteration budget");
        }
    }
    Ok(())
}

fn predict_cmd(cmd: &Predict, outputs: &mut Outputs) -> Result<()> {
    let doc = dataset::load_model(&cmd.model)?;
    let data = dataset::load(&cmd.data)?;
    let (rows, _) = featurize_samples(&data)?;
    let pred = doc.model.predict_batch(&rows)?;
    let path = outputs.file(&cmd.out);
    let wrap = |e: csv::Error| Error::invalid(format!("{}: {e}", path.display()));
    let mut wtr = csv::Writer::from_path(&path).map_err(wrap)?;
    wtr.write_record(["link_id", "rho_e", "predicted_occupancy", "predicted_delay"])
        .map_err(wrap)?;
    for ((link, f), p) in data.samples().zip(&rows).zip(&pred) {
        let delay = match (link.avg_packet_size, link.capacity) {
            (Some(size), Some(cap)) => occupancy_to_delay(p.max(0.0), size, cap)?.to_string(),
            _ => String::new(),
        };
        wtr.write_record([link.link_id.clone(), f.rho_e.to_string(), p.to_string(), delay])
            .map_err(wrap)?;
    }
    wtr.flush().map_err(|e| Error::io(&path, e))
}

fn eval_cmd(cmd: &Eval, quiet: bool, outputs: &mut Outputs) -> Result<()> {
    let specs: Vec<ModelSpec> = cmd.models.iter().map(|s| s.parse()).collect::<Result<_>>()?;
    let data = load_checked(&cmd.data, cmd.drop_zero, quiet)?;
    let (train, test) = match &cmd.test {
        Some(t) => (data, load_checked(t, cmd.drop_zero, quiet)?),
        None => {
            let mode = match cmd.split_mode {
                Mode::Iid => SplitMode::Iid,
                Mode::BySize => SplitMode::BySize,
            };
            dataset::split(&data, (cmd.train_fraction, 1.0 - cmd.train_fraction), mode, cmd.common.seed)?
        }
    };
    let bench = eval::benchmark(&specs, &train, &test, cmd.common.threads)?;
    let points = eval::plot_points(&bench.models, &test)?;
    outputs.dir(&cmd.out)?;
    write_text(outputs, &cmd.out.join("report.csv"), &bench.report.to_csv()?)?;
    let text = bench.report.to_text();
    write_text(outputs, &cmd.out.join("report.txt"), &text)?;
    let plot = outputs.file(&cmd.out.join("plot.csv"));
    eval::write_plot_csv(&points, &plot)?;
    if !quiet {
        print!("{text}");
    }
    Ok(())
}

fn simulate_cmd(cmd: &Simulate) -> Result<()> {
    let service = parse_service(&cmd.service)?;
    let mut cfg = SimConfig::new(cmd.lambda, service, cmd.k, cmd.events, cmd.seed);
    if let Some(w) = cmd.warmup {
        cfg.warmup_events = w;
    }
    let r = sim::simulate_queue(&cfg)?;
    let text = toml::to_string(&r).map_err(|e| Error::invalid(e.to_string()))?;
    print!("{text}");
    Ok(())
}

/// Usage errors are reported before any work starts.
fn usage_check(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Fit(f) => f.hyper.spec().map(|_| ()),
        Command::Eval(e) => {
            if e.models.is_empty() {
                return Err(Error::invalid("eval needs at least one --model"));
            }
            for m in &e.models {
                m.parse::<ModelSpec>()?;
            }
            if e.test.is_none() && !(e.train_fraction > 0.0 && e.train_fraction < 1.0) {
                return Err(Error::invalid("--train-fraction must lie in (0, 1)"));
            }
            Ok(())
        }
        Command::Simulate(s) => parse_service(&s.service).map(|_| ()),
        Command::Featurize(f) => parse_base(&f.base).map(|_| ()),
        Command::Select(s) => parse_base(&s.base).map(|_| ()),
        Command::GenData(_) | Command::Predict(_) => Ok(()),
    }
}

/// Run the CLI on `args` (including the program name) and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = usage_check(&cli.command) {
        eprintln!("error: {e}");
        return 1;
    }
    let mut outputs = Outputs::default();
    let quiet = cli.quiet;
    let result = match &cli.command {
        Command::GenData(c) => gen_data(c, quiet, &mut outputs),
        Command::Featurize(c) => featurize_cmd(c, &mut outputs),
        Command::Select(c) => select_cmd(c, quiet),
        Command::Fit(c) => fit_cmd(c, quiet, &mut outputs),
        Command::Predict(c) => predict_cmd(c, &mut outputs),
        Command::Eval(c) => eval_cmd(c, quiet, &mut outputs),
        Command::Simulate(c) => simulate_cmd(c),
    };
    let _ = std::io::stdout().flush();
    match result {
        Ok(()) => 0,
        Err(e) => {
            outputs.discard();
            eprintln!("error: {e}");
            2
        }
    }
}
