//! The adjustment functional `T_{A,x,y} = Σ_a P(y | a, x) · P(a)`, its plug-in
//! estimate, the positivity parameter, Poissonized sampling and the sample-size and
//! error-bound calculators.

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::data::{Provenance, SampleDataset};
use crate::dist::{self, Event, JointDistribution, VariableSpec};
use crate::error::{Error, Result};
use crate::rng;

/// Default constant for the TV-learning term `c₀·(|Σ| + ln(1/δ))/ε²`.
pub const DEFAULT_C0: f64 = 2.0;
/// Default multiplier for the expectation-bound sample size.
pub const DEFAULT_EXPECTATION_C: f64 = 2.0;

/// `⌈x⌉`, ignoring float noise of a few ulps above an integer.
pub(crate) fn ceil_count(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentQuery {
    pub x: Event,
    pub y: Event,
    pub adjust: Vec<String>,
}

impl AdjustmentQuery {
    pub fn new<S: Into<String>>(x: Event, y: Event, adjust: impl IntoIterator<Item = S>) -> Self {
        AdjustmentQuery {
            x,
            y,
            adjust: adjust.into_iter().map(Into::into).collect(),
        }
    }

    pub fn with_adjust<S: Into<String>>(&self, adjust: impl IntoIterator<Item = S>) -> Self {
        AdjustmentQuery::new(self.x.clone(), self.y.clone(), adjust)
    }

    pub fn validate(&self, variables: &[VariableSpec]) -> Result<()> {
        self.x.resolve(variables)?;
        self.y.resolve(variables)?;
        dist::resolve_set(variables, &self.adjust)?;
        if self.x.is_empty() {
            return Err(Error::InvalidQuery("treatment event is empty".into()));
        }
        let clash = |a: &str, b: &Event| b.value_of(a).is_some();
        if self.x.names().any(|n| clash(n, &self.y)) {
            return Err(Error::InvalidQuery("treatment and outcome overlap".into()));
        }
        for a in &self.adjust {
            if clash(a, &self.x) || clash(a, &self.y) {
                return Err(Error::InvalidQuery(format!(
                    "adjustment variable `{a}` overlaps treatment or outcome"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    FixedN,
    Poissonized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub value: f64,
    pub n_effective: u64,
    pub zero_cells: usize,
    pub mode: SamplingMode,
}

/// Per adjustment cell `a`: mass of `a`, of `x ∧ a` and of `y ∧ x ∧ a`.
struct Tallies<T> {
    a: Vec<T>,
    xa: Vec<T>,
    yxa: Vec<T>,
    adjust_vars: Vec<VariableSpec>,
}

/// Tallies from a table laid out over `vars` (row-major, declaration order).
fn tally<T>(vars: &[VariableSpec], table: &[T], q: &AdjustmentQuery) -> Result<Tallies<T>>
where
    T: Copy + Default + std::ops::AddAssign,
{
    let cards: Vec<usize> = vars.iter().map(|v| v.cardinality).collect();
    let adjust_idx = dist::resolve_set(vars, &q.adjust)?;
    let x = q.x.resolve(vars)?;
    let y = q.y.resolve(vars)?;
    let adjust_vars: Vec<VariableSpec> = adjust_idx.iter().map(|&i| vars[i].clone()).collect();
    let a_len: usize = adjust_vars.iter().map(|v| v.cardinality).product();
    let mut a_stride = vec![0usize; vars.len()];
    let mut s = 1;
    for &i in adjust_idx.iter().rev() {
        a_stride[i] = s;
        s *= cards[i];
    }
    let mut out = Tallies {
        a: vec![T::default(); a_len],
        xa: vec![T::default(); a_len],
        yxa: vec![T::default(); a_len],
        adjust_vars,
    };
    let mut assignment = vec![0usize; vars.len()];
    for &m in table {
        let a: usize = assignment.iter().zip(&a_stride).map(|(v, s)| v * s).sum();
        out.a[a] += m;
        if x.iter().all(|&(i, v)| assignment[i] == v) {
            out.xa[a] += m;
            if y.iter().all(|&(i, v)| assignment[i] == v) {
                out.yxa[a] += m;
            }
        }
        dist::advance(&mut assignment, &cards);
    }
    Ok(out)
}

fn query_vars(q: &AdjustmentQuery) -> Vec<String> {
    q.x.names()
        .chain(q.y.names())
        .map(str::to_string)
        .chain(q.adjust.iter().cloned())
        .collect()
}

fn describe_cell(vars: &[VariableSpec], mut cell: usize) -> String {
    let mut parts = Vec::new();
    for v in vars.iter().rev() {
        parts.push(format!("{}={}", v.name, cell % v.cardinality));
        cell /= v.cardinality;
    }
    parts.reverse();
    parts.join(",")
}

/// Exact `T_{A,x,y}`. Cells with `P(a) > 0` but `P(x | a) = 0` are a positivity
/// violation.
pub fn exact_adjustment(dist: &JointDistribution, q: &AdjustmentQuery) -> Result<f64> {
    q.validate(dist.variables())?;
    let marginal = dist.marginal(&query_vars(q))?;
    let t = tally(marginal.variables(), marginal.probabilities(), q)?;
    let mut value = 0.0;
    for cell in 0..t.a.len() {
        if t.a[cell] <= 0.0 {
            continue;
        }
        if t.xa[cell] <= 0.0 {
            return Err(Error::PositivityViolation {
                cell: describe_cell(&t.adjust_vars, cell),
            });
        }
        value += t.a[cell] * t.yxa[cell] / t.xa[cell];
    }
    Ok(value.clamp(0.0, 1.0))
}

/// Plug-in estimate `Σ_a (N_a/N)·(N_{y,x,a}/N_{x,a})` with `0/0 := 0`.
pub fn plugin_adjustment(data: &SampleDataset, q: &AdjustmentQuery) -> Result<EstimateReport> {
    q.validate(data.variables())?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (vars, counts) = data.counts(&query_vars(q))?;
    let t = tally(&vars, &counts, q)?;
    let n = data.len() as f64;
    let mut value = 0.0;
    let mut zero_cells = 0;
    for cell in 0..t.a.len() {
        if t.a[cell] == 0 {
            continue;
        }
        if t.xa[cell] == 0 {
            zero_cells += 1;
            continue;
        }
        value += (t.a[cell] as f64 / n) * (t.yxa[cell] as f64 / t.xa[cell] as f64);
    }
    Ok(EstimateReport {
        value: value.clamp(0.0, 1.0),
        n_effective: data.len() as u64,
        zero_cells,
        mode: match data.provenance() {
            Provenance::FixedN => SamplingMode::FixedN,
            Provenance::Poissonized(_) => SamplingMode::Poissonized,
        },
    })
}

/// Positivity parameter `α_A = min_{a : P(a) > 0} P(x | a)`; `P(x)` when `A = ∅`.
pub fn alpha<S: AsRef<str>>(dist: &JointDistribution, x: &Event, adjust: &[S]) -> Result<f64> {
    if adjust.iter().any(|a| x.value_of(a.as_ref()).is_some()) {
        return Err(Error::InvalidQuery(
            "adjustment set overlaps the treatment".into(),
        ));
    }
    let q = AdjustmentQuery::new(x.clone(), Event::empty(), adjust.iter().map(AsRef::as_ref));
    q.validate(dist.variables())?;
    let marginal = dist.marginal(&query_vars(&q))?;
    let t = tally(marginal.variables(), marginal.probabilities(), &q)?;
    Ok(t.a
        .iter()
        .zip(&t.xa)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &xa)| xa / a)
        .fold(f64::INFINITY, f64::min))
}

/// Empirical positivity `min_{s observed} N_{x,s}/N_s`, floored at `1/(N + |Σ_S|)`.
pub fn alpha_empirical<S: AsRef<str>>(
    data: &SampleDataset,
    x: &Event,
    adjust: &[S],
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let q = AdjustmentQuery::new(x.clone(), Event::empty(), adjust.iter().map(AsRef::as_ref));
    q.validate(data.variables())?;
    let (vars, counts) = data.counts(&query_vars(&q))?;
    let t = tally(&vars, &counts, &q)?;
    let raw = t
        .a
        .iter()
        .zip(&t.xa)
        .filter(|(&a, _)| a > 0)
        .map(|(&a, &xa)| xa as f64 / a as f64)
        .fold(f64::INFINITY, f64::min);
    let floor = 1.0 / (data.len() + t.a.len()) as f64;
    Ok(raw.max(floor))
}

/// Draws `N ~ Pois(mean)` and then `N` i.i.d. rows.
pub fn poissonized_sample(dist: &JointDistribution, mean: f64, seed: u64) -> Result<SampleDataset> {
    if !(mean >= 1.0) || !mean.is_finite() {
        return Err(Error::OutOfRange(format!("Poisson mean {mean} must be >= 1")));
    }
    let mut rng = rng::seeded(seed);
    let poisson = Poisson::new(mean).map_err(|e| Error::OutOfRange(e.to_string()))?;
    let n = poisson.sample(&mut rng) as usize;
    let cells = dist.draw_cells(n, &mut rng);
    Ok(SampleDataset::from_cells(
        dist,
        &cells,
        Provenance::Poissonized(mean),
        seed,
    ))
}

fn check_unit_open(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("{name} = {v} must lie in (0, 1)")))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("alpha = {alpha} must lie in (0, 1]")))
    }
}

/// Samples sufficient for `|T̂ - T| ≤ ε` with probability `1 - δ`:
///
/// `36 s/(εα)·ln(3s/δ) + 9/(2ε²α)·ln(6/δ) + c₀·(s + ln(1/δ))/(ε/3)²`, with `s = |Σ_A|`.
pub fn sample_size_estimation(
    epsilon: f64,
    delta: f64,
    sigma_a: usize,
    alpha: f64,
    c0: f64,
) -> Result<u64> {
    check_unit_open("epsilon", epsilon)?;
    check_unit_open("delta", delta)?;
    check_alpha(alpha)?;
    if sigma_a == 0 {
        return Err(Error::OutOfRange("alphabet size must be >= 1".into()));
    }
    if !(c0 > 0.0) {
        return Err(Error::OutOfRange(format!("c0 = {c0} must be positive")));
    }
    let s = sigma_a as f64;
    let small_cells = 36.0 * s / (epsilon * alpha) * (3.0 * s / delta).ln();
    let large_cells = 9.0 / (2.0 * epsilon * epsilon * alpha) * (6.0 / delta).ln();
    let weights = c0 * (s + (1.0 / delta).ln()) / (epsilon / 3.0).powi(2);
    Ok(ceil_count(small_cells + large_cells + weights))
}

/// Expectation-bound sample size `⌈(σ_Z/(λα) + 1/(λ²α))·c⌉`.
pub fn sample_size_expectation(lambda: f64, sigma_z: usize, alpha: f64, c: f64) -> Result<u64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::OutOfRange(format!("lambda = {lambda} must be positive")));
    }
    check_alpha(alpha)?;
    if sigma_z == 0 || !(c > 0.0) {
        return Err(Error::OutOfRange("alphabet size and c must be positive".into()));
    }
    let s = sigma_z as f64;
    Ok(ceil_count((s / (lambda * alpha) + 1.0 / (lambda * lambda * alpha)) * c))
}

/// Which error re-statement [`error_bound`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum BoundMode {
    /// Estimating directly on a set with alphabet size `sigma`.
    Direct,
    /// Blanket search over a set with alphabet size `sigma`; `k` is the blanket size.
    Amba { sigma_x: usize, k: usize },
    /// Screening-set search; `k` is the size of the returned set.
    Bamba {
        sigma_x: usize,
        sigma_y: usize,
        k: usize,
    },
}

/// Error term at `n` samples with unit constants (log factors dropped), scaled by
/// `multiplier`.
pub fn error_bound(n: u64, sigma: usize, alpha: f64, mode: BoundMode, multiplier: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::OutOfRange("n must be >= 1".into()));
    }
    check_alpha(alpha)?;
    if sigma == 0 {
        return Err(Error::OutOfRange("alphabet size must be >= 1".into()));
    }
    let n = n as f64;
    let s = sigma as f64;
    let raw = match mode {
        BoundMode::Direct => s / (n * alpha) + 1.0 / (n * alpha).sqrt() + (s / n).sqrt(),
        BoundMode::Amba { sigma_x, k } => {
            (1.0 / alpha) * (k as f64 / n).sqrt() * (sigma_x as f64 * s).powf(0.25)
        }
        BoundMode::Bamba {
            sigma_x,
            sigma_y,
            k,
        } => {
            (1.0 / alpha)
                * (k as f64 / n).sqrt()
                * (sigma_x as f64 * sigma_y as f64 * s).powf(0.25)
        }
    };
    Ok(raw * multiplier)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::VariableSpec;

    fn xy_dist() -> JointDistribution {
        // Z, X, Y with every cell positive
        let w = [3.0, 1.0, 2.0, 2.0, 1.0, 4.0, 2.0, 5.0];
        let total: f64 = w.iter().sum();
        JointDistribution::new(
            vec![
                VariableSpec::binary("Z"),
                VariableSpec::binary("X"),
                VariableSpec::binary("Y"),
            ],
            w.iter().map(|v| v / total).collect(),
        )
        .unwrap()
    }

    fn q(adjust: &[&str]) -> AdjustmentQuery {
        AdjustmentQuery::new(Event::single("X", 0), Event::single("Y", 1), adjust.iter().copied())
    }

    #[test]
    fn empty_adjustment_is_conditional() {
        let d = xy_dist();
        let t = exact_adjustment(&d, &q(&[])).unwrap();
        let c = d
            .conditional_prob(&Event::single("Y", 1), &Event::single("X", 0))
            .unwrap();
        assert!((t - c).abs() < 1e-15);
    }

    #[test]
    fn adjustment_by_hand() {
        // Σ_z P(y=1|x=0,z) P(z): weights z=0: (3,1 | 2,2) z=1: (1,4 | 2,5); total 20
        let d = xy_dist();
        let want = (1.0 / 4.0) * (8.0 / 20.0) + (4.0 / 5.0) * (12.0 / 20.0);
        assert!((exact_adjustment(&d, &q(&["Z"])).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn positivity_violation_is_reported() {
        let d = JointDistribution::new(
            vec![VariableSpec::binary("Z"), VariableSpec::binary("X"), VariableSpec::binary("Y")],
            vec![0.25, 0.25, 0.0, 0.0, 0.0, 0.0, 0.25, 0.25],
        )
        .unwrap();
        let err = exact_adjustment(&d, &q(&["Z"])).unwrap_err();
        assert_eq!(err.code(), "POSITIVITY_VIOLATION");
        // unreachable cells do not count: alpha skips them
        assert_eq!(alpha(&d, &Event::single("X", 0), &["Z"]).unwrap(), 0.0);
    }

    #[test]
    fn query_validation() {
        let d = xy_dist();
        let bad = AdjustmentQuery::new(Event::single("X", 0), Event::single("Y", 1), ["X"]);
        assert_eq!(exact_adjustment(&d, &bad).unwrap_err().code(), "INVALID_QUERY");
        let unknown = q(&["W"]);
        assert_eq!(exact_adjustment(&d, &unknown).unwrap_err().code(), "UNKNOWN_VARIABLE");
    }

    #[test]
    fn plugin_identical_rows() {
        let vars = vec![VariableSpec::binary("Z"), VariableSpec::binary("X"), VariableSpec::binary("Y")];
        let data = SampleDataset::new(vars.clone(), vec![vec![1, 0, 1]; 100], Provenance::FixedN, 0)
            .unwrap();
        let r = plugin_adjustment(&data, &q(&["Z"])).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.zero_cells, 0);
        assert_eq!(r.n_effective, 100);
    }

    #[test]
    fn plugin_zero_over_zero() {
        let vars = vec![VariableSpec::binary("Z"), VariableSpec::binary("X"), VariableSpec::binary("Y")];
        let rows = vec![vec![0, 1, 1], vec![1, 1, 0], vec![1, 1, 1]];
        let data = SampleDataset::new(vars.clone(), rows, Provenance::FixedN, 0).unwrap();
        let r = plugin_adjustment(&data, &q(&["Z"])).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.zero_cells, 2);
        let empty = SampleDataset::new(vars, vec![], Provenance::FixedN, 0).unwrap();
        assert_eq!(plugin_adjustment(&empty, &q(&["Z"])).unwrap_err(), Error::EmptyDataset);
    }

    #[test]
    fn alpha_of_empty_set_is_marginal() {
        let d = JointDistribution::new(vec![VariableSpec::binary("X")], vec![0.5, 0.5]).unwrap();
        assert_eq!(alpha(&d, &Event::single("X", 0), &[] as &[&str]).unwrap(), 0.5);
    }

    #[test]
    fn estimation_sample_size_pin() {
        // evaluated independently from the closed form (Python, float64)
        let n = sample_size_estimation(0.05, 0.1, 4, 0.2, 2.0).unwrap();
        assert_eq!(n, 151_168);
    }

    #[test]
    fn estimation_sample_size_monotone_in_epsilon() {
        let mut eps = 0.5;
        let mut last = 0;
        while eps > 1e-3 {
            let n = sample_size_estimation(eps, 0.1, 8, 0.3, DEFAULT_C0).unwrap();
            assert!(n >= last);
            last = n;
            eps /= 2.0;
        }
    }

    #[test]
    fn estimation_sample_size_limit_case() {
        let (eps, delta, c0) = (0.01, 0.05, 2.0);
        let n = sample_size_estimation(eps, delta, 1, 1.0, c0).unwrap() as f64;
        let dominant = 9.0 / (2.0 * eps * eps) * (6.0 / delta).ln()
            + c0 * (1.0 + (1.0 / delta).ln()) / (eps / 3.0f64).powi(2);
        let first = 36.0 / eps * (3.0 / delta).ln();
        assert!((n - (dominant + first)).abs() <= 1.0);
        assert!(dominant > 10.0 * first);
    }

    #[test]
    fn estimation_sample_size_ranges() {
        for (e, d, s, a) in [(0.0, 0.1, 2, 0.5), (0.1, 1.0, 2, 0.5), (0.1, 0.1, 0, 0.5), (0.1, 0.1, 2, 0.0), (0.1, 0.1, 2, 1.5)] {
            assert_eq!(
                sample_size_estimation(e, d, s, a, 2.0).unwrap_err().code(),
                "OUT_OF_RANGE"
            );
        }
    }

    #[test]
    fn expectation_sample_size() {
        assert_eq!(sample_size_expectation(0.1, 8, 0.5, 2.0).unwrap(), 720);
        // both terms halve when alpha doubles
        assert_eq!(sample_size_expectation(0.1, 8, 1.0, 2.0).unwrap(), 360);
        // λ = 0.4, c = 1: 8/0.2 + 1/0.08 = 52.5
        assert_eq!(sample_size_expectation(0.4, 8, 0.5, 1.0).unwrap(), 53);
        assert_eq!(sample_size_expectation(0.0, 8, 0.5, 2.0).unwrap_err().code(), "OUT_OF_RANGE");
    }

    #[test]
    fn error_bound_direct() {
        let e = error_bound(10_000, 16, 0.25, BoundMode::Direct, 1.0).unwrap();
        assert!((e - 0.0664).abs() < 1e-12);
        let e4 = error_bound(40_000, 16, 0.25, BoundMode::Direct, 1.0).unwrap();
        assert!((e4 - (0.0016 + 0.01 + 0.02)).abs() < 1e-12);
        assert_eq!(error_bound(0, 16, 0.25, BoundMode::Direct, 1.0).unwrap_err().code(), "OUT_OF_RANGE");
    }

    #[test]
    fn error_bound_search_modes() {
        assert_eq!(error_bound(100, 16, 0.5, BoundMode::Amba { sigma_x: 2, k: 0 }, 1.0).unwrap(), 0.0);
        let a = error_bound(100, 8, 0.5, BoundMode::Amba { sigma_x: 2, k: 1 }, 1.0).unwrap();
        assert!((a - 2.0 * 0.1 * 2.0).abs() < 1e-12);
        let b = error_bound(100, 8, 0.5, BoundMode::Bamba { sigma_x: 2, sigma_y: 1, k: 1 }, 3.0).unwrap();
        assert!((b - 3.0 * a).abs() < 1e-12);
    }

    #[test]
    fn poissonized_rejects_small_mean() {
        let d = xy_dist();
        assert_eq!(poissonized_sample(&d, 0.5, 1).unwrap_err().code(), "OUT_OF_RANGE");
        let s = poissonized_sample(&d, 50.0, 1).unwrap();
        assert_eq!(s.provenance(), Provenance::Poissonized(50.0));
    }
}
