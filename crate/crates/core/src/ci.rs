//! Approximate conditional independence.
//!
//! `Δ_{A⊥B|C} = Σ_{a,b,c} P(c)·|P(a,b|c) − P(a|c)·P(b|c)|` measures how far `A` and `B`
//! are from independent given `C`. [`CiTester`] turns it into a YES/NO test, either
//! exactly against a known distribution or from samples.
//!
//! The sample-based tester learns the joint of `A ∪ B ∪ C` to total variation `ε/4`
//! and answers YES iff the plug-in `Δ̂ ≤ ε/2`. With the budget from
//! [`ci_sample_budget`] it answers YES on `Δ = 0` and NO on `Δ > ε`, each with
//! probability at least `1 − δ`.

use serde::{Deserialize, Serialize};

use crate::data::SampleDataset;
use crate::dist::{self, JointDistribution, VariableSpec};
use crate::error::{Error, Result};
use crate::estimators::{ceil_count, DEFAULT_C0};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CiQuery {
    pub a: Vec<String>,
    pub b: Vec<String>,
    pub c: Vec<String>,
}

impl CiQuery {
    pub fn new<I1, I2, I3, S1, S2, S3>(a: I1, b: I2, c: I3) -> Self
    where
        I1: IntoIterator<Item = S1>,
        I2: IntoIterator<Item = S2>,
        I3: IntoIterator<Item = S3>,
        S1: Into<String>,
        S2: Into<String>,
        S3: Into<String>,
    {
        CiQuery {
            a: a.into_iter().map(Into::into).collect(),
            b: b.into_iter().map(Into::into).collect(),
            c: c.into_iter().map(Into::into).collect(),
        }
    }

    /// Variable indices of `(A, B, C)`, each in declaration order.
    fn resolve(&self, variables: &[VariableSpec]) -> Result<[Vec<usize>; 3]> {
        let a = dist::resolve_set(variables, &self.a)?;
        let b = dist::resolve_set(variables, &self.b)?;
        let c = dist::resolve_set(variables, &self.c)?;
        let disjoint = |x: &[usize], y: &[usize]| x.iter().all(|i| !y.contains(i));
        if !(disjoint(&a, &b) && disjoint(&a, &c) && disjoint(&b, &c)) {
            return Err(Error::InvalidQuery(
                "conditional independence sets must be disjoint".into(),
            ));
        }
        Ok([a, b, c])
    }

    pub fn union(&self) -> Vec<String> {
        self.a
            .iter()
            .chain(&self.b)
            .chain(&self.c)
            .cloned()
            .collect()
    }

    /// `|Σ_{A∪B∪C}|`.
    pub fn alphabet_size(&self, variables: &[VariableSpec]) -> Result<usize> {
        let [a, b, c] = self.resolve(variables)?;
        Ok(a.iter()
            .chain(&b)
            .chain(&c)
            .map(|&i| variables[i].cardinality)
            .product())
    }
}

/// Joint table laid out as `[a][b][c]`, c fastest.
struct Blocks {
    table: Vec<f64>,
    na: usize,
    nb: usize,
    nc: usize,
}

impl Blocks {
    fn new(dist: &JointDistribution, q: &CiQuery) -> Result<Self> {
        let [a, b, c] = q.resolve(dist.variables())?;
        let card = |set: &[usize]| -> usize {
            set.iter().map(|&i| dist.variables()[i].cardinality).product()
        };
        let (na, nb, nc) = (card(&a), card(&b), card(&c));
        let order: Vec<usize> = a.into_iter().chain(b).chain(c).collect();
        Ok(Blocks {
            table: dist.project(&order),
            na,
            nb,
            nc,
        })
    }

    fn at(&self, a: usize, b: usize, c: usize) -> f64 {
        self.table[(a * self.nb + b) * self.nc + c]
    }

    /// `(P(c), P(a,c), P(b,c))`.
    fn margins(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut pc = vec![0.0; self.nc];
        let mut pac = vec![0.0; self.na * self.nc];
        let mut pbc = vec![0.0; self.nb * self.nc];
        for a in 0..self.na {
            for b in 0..self.nb {
                for c in 0..self.nc {
                    let p = self.at(a, b, c);
                    pc[c] += p;
                    pac[a * self.nc + c] += p;
                    pbc[b * self.nc + c] += p;
                }
            }
        }
        (pc, pac, pbc)
    }
}

/// Exact `Δ_{A⊥B|C}`. Conditioning cells with `P(c) = 0` contribute nothing.
pub fn delta_ci(dist: &JointDistribution, q: &CiQuery) -> Result<f64> {
    let blocks = Blocks::new(dist, q)?;
    let (pc, pac, pbc) = blocks.margins();
    let nc = blocks.nc;
    let mut total = 0.0;
    for c in 0..nc {
        if pc[c] <= 0.0 {
            continue;
        }
        let mut inner = 0.0;
        for a in 0..blocks.na {
            let pa_c = pac[a * nc + c] / pc[c];
            for b in 0..blocks.nb {
                let pab_c = blocks.at(a, b, c) / pc[c];
                let pb_c = pbc[b * nc + c] / pc[c];
                inner += (pab_c - pa_c * pb_c).abs();
            }
        }
        total += pc[c] * inner;
    }
    Ok(total)
}

/// `Δ_{A⊥B|C}` in its equivalent form `Σ_{a,b,c} P(a,c)·|P(b|a,c) − P(b|c)|`.
pub fn delta_ci_alternative(dist: &JointDistribution, q: &CiQuery) -> Result<f64> {
    let blocks = Blocks::new(dist, q)?;
    let (pc, pac, pbc) = blocks.margins();
    let nc = blocks.nc;
    let mut total = 0.0;
    for a in 0..blocks.na {
        for c in 0..nc {
            let p_ac = pac[a * nc + c];
            if p_ac <= 0.0 {
                continue;
            }
            for b in 0..blocks.nb {
                let pb_ac = blocks.at(a, b, c) / p_ac;
                let pb_c = pbc[b * nc + c] / pc[c];
                total += p_ac * (pb_ac - pb_c).abs();
            }
        }
    }
    Ok(total)
}

/// `Δ` evaluated on the empirical distribution of `A ∪ B ∪ C`.
pub fn delta_ci_empirical(data: &SampleDataset, q: &CiQuery) -> Result<f64> {
    q.resolve(data.variables())?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let empirical = data.empirical(&q.union())?;
    delta_ci(&empirical, q)
}

/// Rows needed to learn a joint over `sigma` cells to TV `ε/4` with probability
/// `1 − δ`: `⌈c₀·(σ + ln(1/δ))/(ε/4)²⌉`.
pub fn ci_sample_budget(sigma: usize, epsilon: f64, delta: f64, c0: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon < 1.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::OutOfRange(format!(
            "epsilon = {epsilon}, delta = {delta} must lie in (0, 1)"
        )));
    }
    if sigma == 0 || !(c0 > 0.0) {
        return Err(Error::OutOfRange("alphabet size and c0 must be positive".into()));
    }
    let radius = epsilon / 4.0;
    Ok(ceil_count(
        c0 * (sigma as f64 + (1.0 / delta).ln()) / (radius * radius),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Yes,
    No,
}

impl Verdict {
    pub fn is_yes(self) -> bool {
        self == Verdict::Yes
    }
}

/// What a tester consults.
#[derive(Debug, Clone, Copy)]
pub enum Evidence<'a> {
    /// Ground-truth distribution; answers are exact.
    Oracle(&'a JointDistribution),
    /// Sample-based plug-in testing.
    Sample(&'a SampleDataset),
}

impl<'a> Evidence<'a> {
    pub fn variables(&self) -> &'a [VariableSpec] {
        match self {
            Evidence::Oracle(d) => d.variables(),
            Evidence::Sample(s) => s.variables(),
        }
    }

    pub fn is_oracle(&self) -> bool {
        matches!(self, Evidence::Oracle(_))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CiTester<'a> {
    pub evidence: Evidence<'a>,
    pub epsilon: f64,
    pub delta: f64,
    pub c0: f64,
}

impl<'a> CiTester<'a> {
    pub fn new(evidence: Evidence<'a>, epsilon: f64, delta: f64) -> Result<Self> {
        Self::with_c0(evidence, epsilon, delta, DEFAULT_C0)
    }

    pub fn with_c0(evidence: Evidence<'a>, epsilon: f64, delta: f64, c0: f64) -> Result<Self> {
        let in_unit = |v: f64| v > 0.0 && v < 1.0;
        if !in_unit(epsilon) || !in_unit(delta) {
            return Err(Error::OutOfRange(format!(
                "epsilon = {epsilon}, delta = {delta} must lie in (0, 1)"
            )));
        }
        if !(c0 > 0.0) {
            return Err(Error::OutOfRange(format!("c0 = {c0} must be positive")));
        }
        Ok(CiTester {
            evidence,
            epsilon,
            delta,
            c0,
        })
    }

    pub fn oracle(dist: &'a JointDistribution, epsilon: f64) -> Result<Self> {
        Self::new(Evidence::Oracle(dist), epsilon, 0.5)
    }

    pub fn empirical(data: &'a SampleDataset, epsilon: f64, delta: f64) -> Result<Self> {
        Self::new(Evidence::Sample(data), epsilon, delta)
    }

    /// Budget for `q` at failure probability `delta`.
    pub fn budget(&self, q: &CiQuery, delta: f64) -> Result<u64> {
        ci_sample_budget(
            q.alphabet_size(self.evidence.variables())?,
            self.epsilon,
            delta,
            self.c0,
        )
    }

    pub fn test(&self, q: &CiQuery) -> Result<Verdict> {
        self.test_at(q, self.delta)
    }

    /// Runs the test with an explicit failure budget `delta`.
    pub fn test_at(&self, q: &CiQuery, delta: f64) -> Result<Verdict> {
        let yes = match self.evidence {
            Evidence::Oracle(dist) => delta_ci(dist, q)? <= self.epsilon,
            Evidence::Sample(data) => {
                let required = self.budget(q, delta)?;
                if (data.len() as u64) < required {
                    return Err(Error::InsufficientSamples {
                        required,
                        available: data.len() as u64,
                    });
                }
                delta_ci_empirical(data, q)? <= self.epsilon / 2.0
            }
        };
        Ok(if yes { Verdict::Yes } else { Verdict::No })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Provenance;

    fn product3() -> JointDistribution {
        let pa = [0.2, 0.8];
        let pb = [0.1, 0.6, 0.3];
        JointDistribution::from_fn(
            vec![VariableSpec::binary("A"), VariableSpec::new("B", 3)],
            |x| pa[x[0]] * pb[x[1]],
        )
        .unwrap()
    }

    #[test]
    fn product_has_zero_delta() {
        let d = product3();
        let q = CiQuery::new(["A"], ["B"], [] as [&str; 0]);
        assert!(delta_ci(&d, &q).unwrap() < 1e-15);
        assert!(delta_ci_alternative(&d, &q).unwrap() < 1e-15);
    }

    #[test]
    fn perfect_dependence() {
        // A = B uniform: Σ |P(a,b) − 1/4| = 2·(1/4) + 2·(1/4) = 1
        let d = JointDistribution::new(
            vec![VariableSpec::binary("A"), VariableSpec::binary("B")],
            vec![0.5, 0.0, 0.0, 0.5],
        )
        .unwrap();
        let q = CiQuery::new(["A"], ["B"], [] as [&str; 0]);
        assert!((delta_ci(&d, &q).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_separand_is_zero() {
        let d = product3();
        let q = CiQuery::new(["A"], [] as [&str; 0], ["B"]);
        assert_eq!(delta_ci(&d, &q).unwrap(), 0.0);
    }

    #[test]
    fn overlapping_sets_rejected() {
        let d = product3();
        let q = CiQuery::new(["A"], ["A"], [] as [&str; 0]);
        assert_eq!(delta_ci(&d, &q).unwrap_err().code(), "INVALID_QUERY");
    }

    #[test]
    fn budget_arithmetic() {
        // 2·(8 + ln 10)/0.05² = 8242.07
        assert_eq!(ci_sample_budget(8, 0.2, 0.1, 2.0).unwrap(), 8243);
        let b1 = ci_sample_budget(8, 0.2, 0.1, 2.0).unwrap() as f64;
        let b2 = ci_sample_budget(8, 0.1, 0.1, 2.0).unwrap() as f64;
        assert!((b2 / b1 - 4.0).abs() < 1e-3);
        // linear in sigma
        let s1 = ci_sample_budget(100, 0.2, 0.5, 2.0).unwrap() - ci_sample_budget(50, 0.2, 0.5, 2.0).unwrap();
        let s2 = ci_sample_budget(150, 0.2, 0.5, 2.0).unwrap() - ci_sample_budget(100, 0.2, 0.5, 2.0).unwrap();
        assert!((s1 as i64 - s2 as i64).abs() <= 1);
        assert_eq!(ci_sample_budget(8, 1.0, 0.1, 2.0).unwrap_err().code(), "OUT_OF_RANGE");
    }

    #[test]
    fn identical_rows_are_independent() {
        let data = SampleDataset::new(
            vec![VariableSpec::binary("A"), VariableSpec::binary("B")],
            vec![vec![1, 0]; 50],
            Provenance::FixedN,
            0,
        )
        .unwrap();
        let q = CiQuery::new(["A"], ["B"], [] as [&str; 0]);
        assert_eq!(delta_ci_empirical(&data, &q).unwrap(), 0.0);
    }

    #[test]
    fn empirical_tester_checks_budget() {
        let d = product3();
        let data = d.sample(100, 1);
        let t = CiTester::empirical(&data, 0.2, 0.1).unwrap();
        let q = CiQuery::new(["A"], ["B"], [] as [&str; 0]);
        match t.test(&q).unwrap_err() {
            Error::InsufficientSamples { required, available } => {
                assert_eq!(available, 100);
                assert_eq!(required, ci_sample_budget(6, 0.2, 0.1, 2.0).unwrap());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn oracle_tester() {
        let d = product3();
        let t = CiTester::oracle(&d, 0.01).unwrap();
        let q = CiQuery::new(["A"], ["B"], [] as [&str; 0]);
        assert_eq!(t.test(&q).unwrap(), Verdict::Yes);
        assert!(CiTester::oracle(&d, 0.0).is_err());
    }
}
