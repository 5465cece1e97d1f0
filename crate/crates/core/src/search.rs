//! Level-wise searches for approximate Markov blankets (AMBA) and screening sets
//! (BAMBA), the rule deciding between them and direct estimation, and exhaustive
//! reference searches.
//!
//! Subsets are enumerated by size, then lexicographically in variable declaration
//! order. A level is evaluated in parallel; the winner is the lexicographically
//! smallest passing candidate, so results never depend on scheduling.

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ci::{delta_ci, CiQuery, CiTester, Evidence, Verdict};
use crate::data::SampleDataset;
use crate::dist::{self, JointDistribution, VariableSpec};
use crate::error::{Error, Result};
use crate::estimators::{alpha, alpha_empirical, plugin_adjustment, AdjustmentQuery, EstimateReport};

/// Largest candidate set accepted by [`amba`] and [`bamba`].
pub const MAX_CANDIDATES: usize = 25;
/// Largest candidate set accepted by the brute-force searches.
pub const MAX_BRUTE_FORCE: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub chosen: Vec<String>,
    pub level_reached: usize,
    pub tests_run: u64,
    pub tests_per_level: Vec<u64>,
    /// Largest per-level budget over the levels actually run; 0 for an exact oracle.
    pub samples_required: u64,
    pub fallback_used: bool,
    pub decision_trace: Option<DecisionTrace>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionInputs {
    pub n: u64,
    pub sigma_x: usize,
    pub sigma_z: usize,
    pub k: usize,
    pub alpha_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    UseSubset,
    UseZ,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::UseSubset => "use-subset",
            Decision::UseZ => "use-z",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionTrace {
    pub inputs: DecisionInputs,
    /// `k·√(σ_X/σ_Z)`
    pub lhs: f64,
    /// `max{σ_Z/n, α_S/σ_Z, α_S²}`
    pub rhs: f64,
    pub decision: Decision,
}

impl DecisionInputs {
    pub fn trace(&self) -> DecisionTrace {
        let sz = self.sigma_z as f64;
        let lhs = self.k as f64 * (self.sigma_x as f64 / sz).sqrt();
        let rhs = (sz / self.n as f64)
            .max(self.alpha_s / sz)
            .max(self.alpha_s * self.alpha_s);
        let decision = if lhs < rhs {
            Decision::UseSubset
        } else {
            Decision::UseZ
        };
        DecisionTrace {
            inputs: *self,
            lhs,
            rhs,
            decision,
        }
    }
}

/// Use the subset found by AMBA iff `k·√(σ_X/σ_Z) < max{σ_Z/n, α_S/σ_Z, α_S²}`.
pub fn amba_decision(d: &DecisionInputs) -> Decision {
    d.trace().decision
}

/// Failure-budget weight of level `k` among `0..=m`: `1/(m·C(m,k))`, or 1 when `m = 0`.
pub fn level_weight(m: usize, k: usize) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let mut binom = 1.0;
    for i in 0..k {
        binom = binom * (m - i) as f64 / (i + 1) as f64;
    }
    1.0 / (m as f64 * binom)
}

fn names_of(variables: &[VariableSpec], idx: &[usize]) -> Vec<String> {
    idx.iter().map(|&i| variables[i].name.clone()).collect()
}

fn minus(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().filter(|i| !b.contains(i)).copied().collect()
}

fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn check_disjoint(sets: &[(&str, &[usize])]) -> Result<()> {
    for (i, (na, a)) in sets.iter().enumerate() {
        for (nb, b) in &sets[i + 1..] {
            if a.iter().any(|v| b.contains(v)) {
                return Err(Error::InvalidQuery(format!("{na} and {nb} must be disjoint")));
            }
        }
    }
    Ok(())
}

fn cardinality(variables: &[VariableSpec], idx: &[usize]) -> usize {
    idx.iter().map(|&i| variables[i].cardinality).product()
}

/// One candidate: the tests it must pass, each at the same failure budget.
struct Candidate {
    set: Vec<usize>,
    tests: Vec<CiQuery>,
}

/// Shared driver: runs levels in order, returns the first level's smallest passer.
fn level_search<F>(
    tester: &CiTester<'_>,
    m: usize,
    split: f64,
    fallback: Vec<usize>,
    mut level: F,
) -> Result<SearchReport>
where
    F: FnMut(usize) -> Vec<Candidate>,
{
    let variables = tester.evidence.variables();
    let delta_at = |k: usize| tester.delta * level_weight(m, k) / split;
    let level_budget = |k: usize, cands: &[Candidate]| -> Result<u64> {
        let mut worst = 0;
        if !tester.evidence.is_oracle() {
            for q in cands.iter().flat_map(|c| &c.tests) {
                worst = worst.max(tester.budget(q, delta_at(k))?);
            }
        }
        Ok(worst)
    };
    let available = match tester.evidence {
        Evidence::Oracle(_) => u64::MAX,
        Evidence::Sample(data) => data.len() as u64,
    };

    let mut report = SearchReport {
        chosen: Vec::new(),
        level_reached: 0,
        tests_run: 0,
        tests_per_level: Vec::new(),
        samples_required: 0,
        fallback_used: false,
        decision_trace: None,
    };
    for k in 0..=m {
        let cands = level(k);
        let budget = level_budget(k, &cands)?;
        if budget > available {
            let mut required = budget;
            for j in 0..=m {
                required = required.max(level_budget(j, &level(j))?);
            }
            return Err(Error::InsufficientSamples {
                required,
                available,
            });
        }
        report.level_reached = k;
        report.samples_required = report.samples_required.max(budget);
        let d = delta_at(k);
        let outcomes: Vec<Result<bool>> = cands
            .par_iter()
            .map(|c| {
                let mut pass = true;
                for q in &c.tests {
                    pass &= tester.test_at(q, d)? == Verdict::Yes;
                }
                Ok(pass)
            })
            .collect();
        let run: u64 = cands.iter().map(|c| c.tests.len() as u64).sum();
        report.tests_run += run;
        report.tests_per_level.push(run);
        for (c, outcome) in cands.iter().zip(outcomes) {
            if outcome? {
                report.chosen = names_of(variables, &c.set);
                return Ok(report);
            }
        }
    }
    report.chosen = names_of(variables, &fallback);
    report.fallback_used = true;
    Ok(report)
}

/// Smallest `S ⊆ A` with `X ⊥ A∖S | S` accepted by `tester`, level `k` tested at
/// failure budget `δ·w_k`. Falls back to `A`.
pub fn amba<S: AsRef<str>>(tester: &CiTester<'_>, x: &[S], a: &[S]) -> Result<SearchReport> {
    let variables = tester.evidence.variables();
    let xi = dist::resolve_set(variables, x)?;
    let ai = dist::resolve_set(variables, a)?;
    if xi.is_empty() {
        return Err(Error::InvalidQuery("treatment set must be non-empty".into()));
    }
    check_disjoint(&[("treatment", &xi), ("candidates", &ai)])?;
    if ai.len() > MAX_CANDIDATES {
        return Err(Error::CandidateSetTooLarge {
            size: ai.len(),
            limit: MAX_CANDIDATES,
        });
    }
    let x_names = names_of(variables, &xi);
    let m = ai.len();
    level_search(tester, m, 1.0, ai.clone(), |k| {
        ai.iter()
            .copied()
            .combinations(k)
            .map(|s| {
                let rest = minus(&ai, &s);
                let q = CiQuery::new(
                    x_names.iter().cloned(),
                    names_of(variables, &rest),
                    names_of(variables, &s),
                );
                Candidate {
                    set: s,
                    tests: vec![q],
                }
            })
            .collect()
    })
}

/// Smallest `S' ⊆ A` with `|Σ_{S'}| ≤ |Σ_S|`, `Y ⊥ S∖S' | X ∪ S'` and
/// `X ⊥ S'∖S | S`, both tested at `δ·w_k/2`. Falls back to `S`.
pub fn bamba<S: AsRef<str>>(
    tester: &CiTester<'_>,
    x: &[S],
    y: &[S],
    a: &[S],
    s: &[S],
) -> Result<SearchReport> {
    let variables = tester.evidence.variables();
    let xi = dist::resolve_set(variables, x)?;
    let yi = dist::resolve_set(variables, y)?;
    let ai = dist::resolve_set(variables, a)?;
    let si = dist::resolve_set(variables, s)?;
    if xi.is_empty() || yi.is_empty() {
        return Err(Error::InvalidQuery(
            "treatment and outcome sets must be non-empty".into(),
        ));
    }
    check_disjoint(&[("treatment", &xi), ("outcome", &yi), ("candidates", &ai)])?;
    if si.iter().any(|i| !ai.contains(i)) {
        return Err(Error::InvalidQuery(
            "blanket must be a subset of the candidates".into(),
        ));
    }
    if ai.len() > MAX_CANDIDATES {
        return Err(Error::CandidateSetTooLarge {
            size: ai.len(),
            limit: MAX_CANDIDATES,
        });
    }
    let sigma_s = cardinality(variables, &si);
    let (x_names, y_names) = (names_of(variables, &xi), names_of(variables, &yi));
    let s_names = names_of(variables, &si);
    level_search(tester, ai.len(), 2.0, si.clone(), |k| {
        ai.iter()
            .copied()
            .combinations(k)
            .filter(|sp| cardinality(variables, sp) <= sigma_s)
            .map(|sp| {
                let outcome_side = CiQuery::new(
                    y_names.iter().cloned(),
                    names_of(variables, &minus(&si, &sp)),
                    names_of(variables, &union(&xi, &sp)),
                );
                let treatment_side = CiQuery::new(
                    x_names.iter().cloned(),
                    names_of(variables, &minus(&sp, &si)),
                    s_names.iter().cloned(),
                );
                Candidate {
                    set: sp,
                    tests: vec![outcome_side, treatment_side],
                }
            })
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoReport {
    pub report: EstimateReport,
    /// AMBA run, carrying the decision trace.
    pub search: SearchReport,
    /// BAMBA run, present when the rule chose the subset.
    pub screening: Option<SearchReport>,
    pub s_star: Vec<String>,
}

/// AMBA on `Z = q.adjust`, then the decision rule, then BAMBA if the subset wins,
/// then the plug-in estimate on the chosen set.
///
/// With `oracle`, tests and `α_S` are exact; otherwise both come from `data`, with
/// `α_S` floored at `1/(N + |Σ_S|)`. That `Z` is a valid adjustment set is the
/// caller's responsibility.
pub fn auto_estimate(
    data: &SampleDataset,
    q: &AdjustmentQuery,
    epsilon: f64,
    delta: f64,
    oracle: Option<&JointDistribution>,
) -> Result<AutoReport> {
    q.validate(data.variables())?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let evidence = match oracle {
        Some(dist) => {
            if dist.variables() != data.variables() {
                return Err(Error::ShapeMismatch(
                    "oracle and dataset declare different variables".into(),
                ));
            }
            Evidence::Oracle(dist)
        }
        None => Evidence::Sample(data),
    };
    let tester = CiTester::new(evidence, epsilon, delta)?;
    let x: Vec<String> = q.x.names().map(str::to_string).collect();
    let y: Vec<String> = q.y.names().map(str::to_string).collect();

    let mut search = amba(&tester, &x, &q.adjust)?;
    let s = search.chosen.clone();
    let alpha_s = match oracle {
        Some(dist) => alpha(dist, &q.x, &s)?,
        None => alpha_empirical(data, &q.x, &s)?,
    };
    let inputs = DecisionInputs {
        n: data.len() as u64,
        sigma_x: data.alphabet_size(&x)?,
        sigma_z: data.alphabet_size(&q.adjust)?,
        k: s.len(),
        alpha_s,
    };
    let trace = inputs.trace();
    search.decision_trace = Some(trace);

    let (screening, s_star) = match trace.decision {
        Decision::UseSubset => {
            let b = bamba(&tester, &x, &y, &q.adjust, &s)?;
            let chosen = b.chosen.clone();
            (Some(b), chosen)
        }
        Decision::UseZ => (None, dist::resolve_set(data.variables(), &q.adjust)
            .map(|idx| names_of(data.variables(), &idx))?),
    };
    let report = plugin_adjustment(data, &q.with_adjust(s_star.iter().cloned()))?;
    Ok(AutoReport {
        report,
        search,
        screening,
        s_star,
    })
}

fn brute_force<F>(dist: &JointDistribution, a: &[usize], mut accept: F) -> Result<Vec<String>>
where
    F: FnMut(&[usize]) -> Result<bool>,
{
    if a.len() > MAX_BRUTE_FORCE {
        return Err(Error::CandidateSetTooLarge {
            size: a.len(),
            limit: MAX_BRUTE_FORCE,
        });
    }
    for k in 0..=a.len() {
        for s in a.iter().copied().combinations(k) {
            if accept(&s)? {
                return Ok(names_of(dist.variables(), &s));
            }
        }
    }
    Ok(names_of(dist.variables(), a))
}

/// First `S ⊆ A` (by size, then lexicographically) with `Δ_{X⊥A∖S|S} ≤ tol`.
pub fn brute_force_min_blanket<S: AsRef<str>>(
    dist: &JointDistribution,
    x: &[S],
    a: &[S],
    tol: f64,
) -> Result<Vec<String>> {
    let vars = dist.variables();
    let xi = dist.resolve_set(x)?;
    let ai = dist.resolve_set(a)?;
    check_disjoint(&[("treatment", &xi), ("candidates", &ai)])?;
    brute_force(dist, &ai.clone(), |s| {
        let q = CiQuery::new(
            names_of(vars, &xi),
            names_of(vars, &minus(&ai, s)),
            names_of(vars, s),
        );
        Ok(delta_ci(dist, &q)? <= tol)
    })
}

/// First `S' ⊆ A` (by size, then lexicographically) with `|Σ_{S'}| ≤ |Σ_S|` and both
/// screening deviations at most `tol`.
pub fn brute_force_min_screening<S: AsRef<str>>(
    dist: &JointDistribution,
    x: &[S],
    y: &[S],
    a: &[S],
    s: &[S],
    tol: f64,
) -> Result<Vec<String>> {
    let vars = dist.variables();
    let xi = dist.resolve_set(x)?;
    let yi = dist.resolve_set(y)?;
    let ai = dist.resolve_set(a)?;
    let si = dist.resolve_set(s)?;
    check_disjoint(&[("treatment", &xi), ("outcome", &yi), ("candidates", &ai)])?;
    if si.iter().any(|i| !ai.contains(i)) {
        return Err(Error::InvalidQuery(
            "blanket must be a subset of the candidates".into(),
        ));
    }
    let sigma_s = cardinality(vars, &si);
    brute_force(dist, &ai.clone(), |sp| {
        if cardinality(vars, sp) > sigma_s {
            return Ok(false);
        }
        let outcome_side = CiQuery::new(
            names_of(vars, &yi),
            names_of(vars, &minus(&si, sp)),
            names_of(vars, &union(&xi, sp)),
        );
        let treatment_side = CiQuery::new(
            names_of(vars, &xi),
            names_of(vars, &minus(sp, &si)),
            names_of(vars, &si),
        );
        Ok(delta_ci(dist, &outcome_side)? <= tol && delta_ci(dist, &treatment_side)? <= tol)
    })
}
