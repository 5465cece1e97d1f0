//! Seeded Monte Carlo runners producing CSV reports.
//!
//! CSV columns, in order:
//!
//! | column      | meaning                                                   |
//! |-------------|-----------------------------------------------------------|
//! | method      | `direct`, `amba` or `amba+bamba`                          |
//! | n           | rows drawn for the trial                                  |
//! | trial       | trial index                                               |
//! | estimate    | plug-in estimate on the method's adjustment set           |
//! | abs_error   | distance to the exact value under the oracle              |
//! | chosen      | adjustment set, names joined by `;`                       |
//! | decision    | `use-subset` / `use-z` for search methods, else empty     |
//! | sigma_x     | treatment alphabet size                                   |
//! | sigma_z     | alphabet size of the full adjustment set                  |
//! | k           | size of the AMBA blanket (search methods)                 |
//! | alpha_s     | positivity of the AMBA blanket (search methods)           |
//! | elapsed_ms  | wall time of the method, only when timing is requested    |
//!
//! Rows are sorted by `(method, n, trial)`. Without timing, output depends only on
//! the configuration.

use std::io::Write;
use std::time::Instant;

use adjustkit::estimators::{exact_adjustment, plugin_adjustment};
use adjustkit::search::{amba, bamba, DecisionInputs};
use adjustkit::{rng, AdjustmentQuery, CiTester, Error, Evidence, JointDistribution, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub query: AdjustmentQuery,
    pub epsilon: f64,
    pub delta: f64,
    pub grid: Vec<usize>,
    pub trials: u64,
    pub seed: u64,
    /// Search with the sample-based tester instead of the oracle.
    pub empirical_search: bool,
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::ParamRange("trials must be at least 1".into()));
        }
        if self.grid.is_empty() || self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::ParamRange(
                "sample grid must be non-empty and strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub n: usize,
    pub trial: u64,
    pub estimate: f64,
    pub abs_error: Option<f64>,
    pub chosen: String,
    pub decision: String,
    pub sigma_x: usize,
    pub sigma_z: usize,
    pub k: Option<usize>,
    pub alpha_s: Option<f64>,
    pub elapsed_ms: Option<f64>,
}

fn timed<T>(on: bool, f: impl FnOnce() -> Result<T>) -> Result<(T, Option<f64>)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, on.then(|| start.elapsed().as_secs_f64() * 1e3)))
}

fn cells(cfg: &ExperimentConfig) -> Vec<(usize, usize, u64)> {
    let mut out = Vec::new();
    for (i, &n) in cfg.grid.iter().enumerate() {
        for t in 0..cfg.trials {
            out.push((i, n, t));
        }
    }
    out
}

/// Rows for trial `t` at grid point `i` share one dataset across methods.
fn trial_data(dist: &JointDistribution, cfg: &ExperimentConfig, i: usize, n: usize, t: u64) -> adjustkit::SampleDataset {
    dist.sample(n, rng::stream_seed(rng::trial_seed(cfg.seed, t), i as u64))
}

fn sort_rows(rows: &mut [ReportRow]) {
    rows.sort_by(|a, b| (&a.method, a.n, a.trial).cmp(&(&b.method, b.n, b.trial)));
}

/// Direct plug-in estimation on the full adjustment set across the grid.
pub fn run_convergence(dist: &JointDistribution, cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    cfg.validate()?;
    let q = &cfg.query;
    let truth = exact_adjustment(dist, q)?;
    let x_names: Vec<&str> = q.x.names().collect();
    let sigma_x = dist.alphabet_size(&x_names)?;
    let sigma_z = dist.alphabet_size(&q.adjust)?;
    let mut rows = cells(cfg)
        .into_par_iter()
        .map(|(i, n, t)| {
            let data = trial_data(dist, cfg, i, n, t);
            let (report, elapsed) = timed(cfg.timing, || plugin_adjustment(&data, q))?;
            Ok(ReportRow {
                method: "direct".into(),
                n,
                trial: t,
                estimate: report.value,
                abs_error: Some((report.value - truth).abs()),
                chosen: q.adjust.join(";"),
                decision: String::new(),
                sigma_x,
                sigma_z,
                k: None,
                alpha_s: None,
                elapsed_ms: elapsed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    sort_rows(&mut rows);
    Ok(rows)
}

/// Direct estimation on `Z`, estimation on the AMBA blanket, and estimation on the
/// BAMBA screening set, all on the same dataset per trial.
pub fn run_pipeline_comparison(dist: &JointDistribution, cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    cfg.validate()?;
    let q = &cfg.query;
    let truth = exact_adjustment(dist, q)?;
    let x_names: Vec<String> = q.x.names().map(str::to_string).collect();
    let y_names: Vec<String> = q.y.names().map(str::to_string).collect();
    let sigma_x = dist.alphabet_size(&x_names)?;
    let sigma_z = dist.alphabet_size(&q.adjust)?;

    let per_trial = cells(cfg)
        .into_par_iter()
        .map(|(i, n, t)| -> Result<Vec<ReportRow>> {
            let data = trial_data(dist, cfg, i, n, t);
            let evidence = if cfg.empirical_search {
                Evidence::Sample(&data)
            } else {
                Evidence::Oracle(dist)
            };
            let tester = CiTester::new(evidence, cfg.epsilon, cfg.delta)?;
            let row = |method: &str, set: &[String], estimate: f64, elapsed| ReportRow {
                method: method.into(),
                n,
                trial: t,
                estimate,
                abs_error: Some((estimate - truth).abs()),
                chosen: set.join(";"),
                decision: String::new(),
                sigma_x,
                sigma_z,
                k: None,
                alpha_s: None,
                elapsed_ms: elapsed,
            };

            let (direct, e0) = timed(cfg.timing, || plugin_adjustment(&data, q))?;
            let mut out = vec![row("direct", &q.adjust, direct.value, e0)];

            let ((blanket, trace, est), e1) = timed(cfg.timing, || {
                let blanket = amba(&tester, &x_names, &q.adjust)?.chosen;
                let alpha_s = if cfg.empirical_search {
                    adjustkit::estimators::alpha_empirical(&data, &q.x, &blanket)?
                } else {
                    adjustkit::estimators::alpha(dist, &q.x, &blanket)?
                };
                let trace = DecisionInputs {
                    n: n as u64,
                    sigma_x,
                    sigma_z,
                    k: blanket.len(),
                    alpha_s,
                }
                .trace();
                let est = plugin_adjustment(&data, &q.with_adjust(blanket.iter().cloned()))?;
                Ok((blanket, trace, est.value))
            })?;
            let mut r = row("amba", &blanket, est, e1);
            r.decision = trace.decision.as_str().into();
            r.k = Some(trace.inputs.k);
            r.alpha_s = Some(trace.inputs.alpha_s);
            out.push(r.clone());

            let ((screen, est), e2) = timed(cfg.timing, || {
                let screen = bamba(&tester, &x_names, &y_names, &q.adjust, &blanket)?.chosen;
                let est = plugin_adjustment(&data, &q.with_adjust(screen.iter().cloned()))?;
                Ok((screen, est.value))
            })?;
            out.push(ReportRow {
                method: "amba+bamba".into(),
                estimate: est,
                abs_error: Some((est - truth).abs()),
                chosen: screen.join(";"),
                elapsed_ms: e2.map(|e| e + e1.unwrap_or(0.0)),
                ..r
            });
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<ReportRow> = per_trial.into_iter().flatten().collect();
    sort_rows(&mut rows);
    Ok(rows)
}

pub fn write_rows<W: Write>(rows: &[ReportRow], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for r in rows {
        writer.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_rows(text: &str) -> Result<Vec<ReportRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader
        .deserialize()
        .map(|r| {
            r.map_err(|e: csv::Error| Error::Parse {
                line: e.position().map_or(0, |p| p.line() as usize),
                column: 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryLine {
    pub method: String,
    pub n: usize,
    pub trials: usize,
    pub median_abs_error: f64,
}

/// Median absolute error per `(method, n)`, in row order.
pub fn summarize(rows: &[ReportRow]) -> Vec<SummaryLine> {
    let mut out: Vec<SummaryLine> = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let key = (&rows[start].method, rows[start].n);
        let end = start
            + rows[start..]
                .iter()
                .take_while(|r| (&r.method, r.n) == key)
                .count();
        let mut errs: Vec<f64> = rows[start..end].iter().filter_map(|r| r.abs_error).collect();
        errs.sort_by(f64::total_cmp);
        let m = errs.len();
        let median = if m == 0 {
            f64::NAN
        } else if m % 2 == 1 {
            errs[m / 2]
        } else {
            (errs[m / 2 - 1] + errs[m / 2]) / 2.0
        };
        out.push(SummaryLine {
            method: key.0.clone(),
            n: key.1,
            trials: end - start,
            median_abs_error: median,
        });
        start = end;
    }
    out
}
