//! Subcommand definitions and their JSON reports.

use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use adjustkit::ci::{delta_ci, delta_ci_empirical};
use adjustkit::estimators::{alpha, alpha_empirical, exact_adjustment, plugin_adjustment};
use adjustkit::search::{amba, auto_estimate, bamba};
use adjustkit::{
    io, AdjustmentQuery, CiQuery, CiTester, Event, Evidence, GallerySpec, JointDistribution,
    SampleDataset,
};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::harness::{self, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "adjustkit", version, about = "Covariate adjustment and Markov blanket search on discrete data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a distribution file and/or a dataset.
    Validate(ValidateArgs),
    /// Adjustment estimate: plug-in from data, exact from a distribution.
    Estimate(EstimateArgs),
    /// Conditional independence deviation Δ.
    Delta(DeltaArgs),
    /// Positivity parameter of an adjustment set.
    Alpha(AlphaArgs),
    /// Approximate Markov blanket search.
    Amba(AmbaArgs),
    /// Screening set search from a blanket.
    Bamba(BambaArgs),
    /// Blanket search, decision rule, screening and estimate in one pass.
    Auto(AutoArgs),
    /// Emit a constructed distribution.
    Gallery(GalleryArgs),
    /// Plug-in error across a sample-size grid.
    BenchConvergence(BenchArgs),
    /// Direct, blanket and screening-set estimation side by side.
    BenchCompare(BenchArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Estimate(_) => "estimate",
            Command::Delta(_) => "delta",
            Command::Alpha(_) => "alpha",
            Command::Amba(_) => "amba",
            Command::Bamba(_) => "bamba",
            Command::Auto(_) => "auto",
            Command::Gallery(_) => "gallery",
            Command::BenchConvergence(_) => "bench-convergence",
            Command::BenchCompare(_) => "bench-compare",
        }
    }
}

/// Where the distribution and the dataset come from.
#[derive(Debug, Clone, Args, Serialize)]
pub struct Source {
    /// Distribution file (JSON); `--oracle` is an alias
    #[arg(long, visible_alias = "oracle")]
    pub dist: Option<PathBuf>,
    /// Gallery distribution, e.g. `xor:eps=0.1`
    #[arg(long)]
    pub gallery: Option<String>,
    /// Dataset (CSV)
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Distribution file whose variables fix the dataset's cardinalities
    #[arg(long)]
    pub schema: Option<PathBuf>,
}

struct Loaded {
    dist: Option<JointDistribution>,
    data: Option<SampleDataset>,
}

impl Source {
    fn load(&self) -> Result<Loaded, CliError> {
        let dist = match (&self.dist, &self.gallery) {
            (Some(_), Some(_)) => {
                return Err(CliError::Usage("give at most one of --dist and --gallery".into()))
            }
            (Some(p), None) => Some(io::read_dist(p)?),
            (None, Some(g)) => Some(g.parse::<GallerySpec>()?.build()?),
            (None, None) => None,
        };
        let schema = match &self.schema {
            Some(p) => Some(io::read_dist(p)?.variables().to_vec()),
            None => dist.as_ref().map(|d| d.variables().to_vec()),
        };
        let data = match &self.data {
            Some(p) => Some(io::read_data(p, schema.as_deref())?),
            None => None,
        };
        Ok(Loaded { dist, data })
    }
}

impl Loaded {
    fn need_dist(&self) -> Result<&JointDistribution, CliError> {
        self.dist
            .as_ref()
            .ok_or_else(|| CliError::Usage("a distribution is required (--dist or --gallery)".into()))
    }

    fn need_data(&self) -> Result<&SampleDataset, CliError> {
        self.data
            .as_ref()
            .ok_or_else(|| CliError::Usage("a dataset is required (--data)".into()))
    }

    fn need_any(&self) -> Result<(), CliError> {
        if self.dist.is_none() && self.data.is_none() {
            return Err(CliError::Usage("give a distribution or a dataset".into()));
        }
        Ok(())
    }

    /// Sample evidence when a dataset is given, the distribution otherwise.
    fn evidence(&self) -> Result<Evidence<'_>, CliError> {
        match (&self.data, &self.dist) {
            (Some(data), _) => Ok(Evidence::Sample(data)),
            (None, Some(dist)) => Ok(Evidence::Oracle(dist)),
            (None, None) => Err(CliError::Usage("give a distribution or a dataset".into())),
        }
    }
}

fn parse_event(s: &str) -> Result<Event, String> {
    s.parse::<Event>().map_err(|e| e.to_string())
}

fn names(list: &[String]) -> Vec<String> {
    list.iter()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub source: Source,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct QueryArgs {
    /// Treatment event, e.g. `X=0`
    #[arg(long, value_parser = parse_event)]
    #[serde(serialize_with = "as_display")]
    pub x: Event,
    /// Outcome event, e.g. `Y=1`
    #[arg(long, value_parser = parse_event)]
    #[serde(serialize_with = "as_display")]
    pub y: Event,
    /// Adjustment set, comma-separated
    #[arg(long = "set", value_delimiter = ',')]
    pub adjust: Vec<String>,
}

impl QueryArgs {
    fn query(&self) -> AdjustmentQuery {
        AdjustmentQuery::new(self.x.clone(), self.y.clone(), names(&self.adjust))
    }
}

fn as_display<T: fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub query: QueryArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DeltaArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, value_delimiter = ',', required = true)]
    pub a: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub b: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub c: Vec<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AlphaArgs {
    #[command(flatten)]
    pub source: Source,
    /// Treatment event, e.g. `X=0`
    #[arg(long, value_parser = parse_event)]
    #[serde(serialize_with = "as_display")]
    pub x: Event,
    #[arg(long = "set", value_delimiter = ',')]
    pub adjust: Vec<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TesterArgs {
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = adjustkit::estimators::DEFAULT_C0)]
    pub c0: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AmbaArgs {
    #[command(flatten)]
    pub source: Source,
    /// Treatment variables
    #[arg(long, value_delimiter = ',', required = true)]
    pub x: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub candidates: Vec<String>,
    #[command(flatten)]
    pub tester: TesterArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BambaArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, value_delimiter = ',', required = true)]
    pub x: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub y: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub candidates: Vec<String>,
    /// Blanket to screen, a subset of the candidates
    #[arg(long, value_delimiter = ',')]
    pub blanket: Vec<String>,
    #[command(flatten)]
    pub tester: TesterArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AutoArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub query: QueryArgs,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GalleryArgs {
    /// e.g. `hardness:eps=0.04,alpha=0.4`, `backdoor:k=3,seed=1`
    pub spec: String,
    /// Write the distribution here instead of standard output
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also draw this many rows into `--data-out`
    #[arg(long, requires = "data_out")]
    pub sample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub data_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub query: QueryArgs,
    #[command(flatten)]
    pub tester: TesterArgs,
    /// Sample sizes, strictly increasing
    #[arg(long, value_delimiter = ',', required = true)]
    pub grid: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV destination
    #[arg(long)]
    pub out: PathBuf,
    /// Search with the sample-based tester instead of the distribution
    #[arg(long)]
    pub empirical_search: bool,
    /// Record wall time per method (makes output run-dependent)
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(adjustkit::Error),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "USAGE",
            CliError::Domain(e) => e.code(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({ "error": { "code": self.code(), "message": self.to_string() } })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Domain(e) => write!(f, "{e}"),
        }
    }
}

impl From<adjustkit::Error> for CliError {
    fn from(e: adjustkit::Error) -> Self {
        CliError::Domain(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Domain(e.into())
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

fn with_config<T: Serialize>(command: &str, config: &T, mut body: Value) -> Value {
    let obj = body.as_object_mut().expect("reports are objects");
    obj.insert("command".into(), json!(command));
    obj.insert("config".into(), to_value(config));
    body
}

/// Runs a command, returning the text to print on standard output.
pub fn run(command: &Command) -> Result<String, CliError> {
    let name = command.name();
    let report = match command {
        Command::Validate(a) => with_config(name, a, validate(a)?),
        Command::Estimate(a) => with_config(name, a, estimate(a)?),
        Command::Delta(a) => with_config(name, a, delta(a)?),
        Command::Alpha(a) => with_config(name, a, alpha_cmd(a)?),
        Command::Amba(a) => with_config(name, a, amba_cmd(a)?),
        Command::Bamba(a) => with_config(name, a, bamba_cmd(a)?),
        Command::Auto(a) => with_config(name, a, auto(a)?),
        Command::Gallery(a) => return gallery(a),
        Command::BenchConvergence(a) => with_config(name, a, bench(a, false)?),
        Command::BenchCompare(a) => with_config(name, a, bench(a, true)?),
    };
    Ok(format!("{report}\n"))
}

fn validate(a: &ValidateArgs) -> Result<Value, CliError> {
    let loaded = a.source.load()?;
    loaded.need_any()?;
    let mut out = json!({ "valid": true });
    if let Some(d) = &loaded.dist {
        out["variables"] = to_value(&d.variables());
        out["cells"] = json!(d.len());
    }
    if let Some(data) = &loaded.data {
        out["rows"] = json!(data.len());
        if loaded.dist.is_none() {
            out["variables"] = to_value(&data.variables());
        }
    }
    Ok(out)
}

fn estimate(a: &EstimateArgs) -> Result<Value, CliError> {
    let loaded = a.source.load()?;
    let q = a.query.query();
    match (&loaded.data, &loaded.dist) {
        (Some(data), dist) => {
            let report = plugin_adjustment(data, &q)?;
            let mut out = to_value(&report);
            if let Some(d) = dist {
                let exact = exact_adjustment(d, &q)?;
                out["exact"] = json!(exact);
                out["abs_error"] = json!((report.value - exact).abs());
            }
            Ok(out)
        }
        (None, Some(d)) => Ok(json!({ "value": exact_adjustment(d, &q)?, "mode": "exact" })),
        (None, None) => Err(CliError::Usage("give a distribution or a dataset".into())),
    }
}

fn delta(a: &DeltaArgs) -> Result<Value, CliError> {
    let loaded = a.source.load()?;
    let q = CiQuery::new(names(&a.a), names(&a.b), names(&a.c));
    let value = match loaded.evidence()? {
        Evidence::Sample(data) => delta_ci_empirical(data, &q)?,
        Evidence::Oracle(d) => delta_ci(d, &q)?,
    };
    Ok(json!({ "delta": value }))
}

fn alpha_cmd(a: &AlphaArgs) -> Result<Value, CliError> {
    let loaded = a.source.load()?;
    let set = names(&a.adjust);
    let value = match loaded.evidence()? {
        Evidence::Sample(data) => alpha_empirical(data, &a.x, &set)?,
        Evidence::Oracle(d) => alpha(d, &a.x, &set)?,
    };
    Ok(json!({ "alpha": value }))
}

fn tester<'a>(loaded: &'a Loaded, t: &TesterArgs) -> Result<CiTester<'a>, CliError> {
    Ok(CiTester::with_c0(loaded.evidence()?, t.eps, t.delta, t.c0)?)
}

fn amba_cmd(a: &AmbaArgs) -> Result<Value, CliError> {
    let loaded = a.source.load()?;
    let t = tester(&loaded, &a.tester)?;
    Ok(to_value(&amba(&t, &names(&a.x), &names(&a.candidates))?))
}

fn bamba_cmd(a: &BambaArgs) -> Result<Value, CliError> {
    let loaded = a.source.load()?;
    let t = tester(&loaded, &a.tester)?;
    let r = bamba(
        &t,
        &names(&a.x),
        &names(&a.y),
        &names(&a.candidates),
        &names(&a.blanket),
    )?;
    Ok(to_value(&r))
}

fn auto(a: &AutoArgs) -> Result<Value, CliError> {
    let loaded = a.source.load()?;
    let data = loaded.need_data()?;
    let r = auto_estimate(data, &a.query.query(), a.eps, a.delta, loaded.dist.as_ref())?;
    Ok(to_value(&r))
}

fn gallery(a: &GalleryArgs) -> Result<String, CliError> {
    let spec: GallerySpec = a.spec.parse()?;
    let d = spec.build()?;
    if let (Some(n), Some(path)) = (a.sample, &a.data_out) {
        io::write_data(&d.sample(n, a.seed), path)?;
    }
    match &a.out {
        None => Ok(io::dist_to_json(&d)),
        Some(path) => {
            io::write_dist(&d, path)?;
            let report = json!({
                "cells": d.len(),
                "variables": to_value(&d.variables()),
                "written": path,
            });
            Ok(format!("{}\n", with_config("gallery", a, report)))
        }
    }
}

fn bench(a: &BenchArgs, compare: bool) -> Result<Value, CliError> {
    let loaded = a.source.load()?;
    let dist = loaded.need_dist()?;
    let cfg = ExperimentConfig {
        query: a.query.query(),
        epsilon: a.tester.eps,
        delta: a.tester.delta,
        grid: a.grid.clone(),
        trials: a.trials,
        seed: a.seed,
        empirical_search: a.empirical_search,
        timing: a.timing,
    };
    let rows = if compare {
        harness::run_pipeline_comparison(dist, &cfg)?
    } else {
        harness::run_convergence(dist, &cfg)?
    };
    harness::write_rows(&rows, BufWriter::new(File::create(&a.out)?))?;
    Ok(json!({
        "rows": rows.len(),
        "out": a.out,
        "summary": to_value(&harness::summarize(&rows)),
    }))
}
