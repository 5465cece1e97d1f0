//! Dense joint probability tables over finite-alphabet variables.
//!
//! A [`JointDistribution`] stores one probability per full assignment in row-major
//! order: the last declared variable varies fastest. Tables are immutable once
//! built; every constructor validates.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{Provenance, SampleDataset};
use crate::error::{Error, Result};
use crate::rng;

/// Tolerance on `|sum - 1|` accepted by [`JointDistribution::validate`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;
pub const MAX_VARIABLES: usize = 25;
pub const MAX_CELLS: usize = 1 << 26;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub cardinality: usize,
}

impl VariableSpec {
    pub fn new(name: impl Into<String>, cardinality: usize) -> Self {
        VariableSpec {
            name: name.into(),
            cardinality,
        }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Self::new(name, 2)
    }
}

/// Checks names, cardinalities and the size caps; returns the table length.
pub(crate) fn check_variables(variables: &[VariableSpec]) -> Result<usize> {
    if variables.len() > MAX_VARIABLES {
        return Err(Error::ShapeMismatch(format!(
            "{} variables exceeds the limit of {MAX_VARIABLES}",
            variables.len()
        )));
    }
    let mut seen = HashSet::new();
    let mut cells: usize = 1;
    for v in variables {
        if v.cardinality == 0 {
            return Err(Error::ShapeMismatch(format!(
                "variable `{}` has cardinality 0",
                v.name
            )));
        }
        if v.name.is_empty() {
            return Err(Error::ShapeMismatch("empty variable name".into()));
        }
        if !seen.insert(v.name.as_str()) {
            return Err(Error::ShapeMismatch(format!(
                "duplicate variable `{}`",
                v.name
            )));
        }
        cells = cells
            .checked_mul(v.cardinality)
            .filter(|&c| c <= MAX_CELLS)
            .ok_or_else(|| {
                Error::ShapeMismatch(format!("table exceeds the limit of {MAX_CELLS} cells"))
            })?;
    }
    Ok(cells)
}

/// A partial assignment: variable name to category index.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    bindings: Vec<(String, usize)>,
}

impl Event {
    pub fn empty() -> Self {
        Event::default()
    }

    pub fn single(name: impl Into<String>, value: usize) -> Self {
        Event {
            bindings: vec![(name.into(), value)],
        }
    }

    pub fn from_pairs<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let mut event = Event::empty();
        for (name, value) in pairs {
            let name = name.into();
            if event.value_of(&name).is_some() {
                return Err(Error::InvalidQuery(format!(
                    "variable `{name}` bound twice in event"
                )));
            }
            event.bindings.push((name, value));
        }
        Ok(event)
    }

    pub fn bindings(&self) -> &[(String, usize)] {
        &self.bindings
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.bindings.iter().map(|(n, _)| n.as_str())
    }

    pub fn value_of(&self, name: &str) -> Option<usize> {
        self.bindings
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, v)| v)
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    /// Union of two events over disjoint variables.
    pub fn and(&self, other: &Event) -> Result<Event> {
        Event::from_pairs(
            self.bindings
                .iter()
                .chain(other.bindings.iter())
                .map(|(n, v)| (n.clone(), *v)),
        )
    }

    /// Resolves names against `variables`, returning `(variable index, value)` pairs.
    pub(crate) fn resolve(&self, variables: &[VariableSpec]) -> Result<Vec<(usize, usize)>> {
        self.bindings
            .iter()
            .map(|(name, value)| {
                let idx = variables
                    .iter()
                    .position(|v| &v.name == name)
                    .ok_or_else(|| Error::UnknownVariable(name.clone()))?;
                if *value >= variables[idx].cardinality {
                    return Err(Error::OutOfRange(format!(
                        "value {value} for `{name}` (cardinality {})",
                        variables[idx].cardinality
                    )));
                }
                Ok((idx, *value))
            })
            .collect()
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .bindings
            .iter()
            .map(|(n, v)| format!("{n}={v}"))
            .collect();
        f.write_str(&parts.join(","))
    }
}

/// Parses `NAME=index[,NAME=index...]`; the empty string is the empty event.
impl FromStr for Event {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Event::empty());
        }
        let mut pairs = Vec::new();
        for (i, part) in s.split(',').enumerate() {
            let (name, value) = part.split_once('=').ok_or_else(|| Error::Parse {
                line: 1,
                column: i + 1,
                message: format!("expected NAME=index, got `{part}`"),
            })?;
            let value = value.trim().parse::<usize>().map_err(|e| Error::Parse {
                line: 1,
                column: i + 1,
                message: format!("bad index in `{part}`: {e}"),
            })?;
            pairs.push((name.trim().to_string(), value));
        }
        Event::from_pairs(pairs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    variables: Vec<VariableSpec>,
    probabilities: Vec<f64>,
    strides: Vec<usize>,
}

fn strides_for(cards: impl DoubleEndedIterator<Item = usize>) -> Vec<usize> {
    let mut strides: Vec<usize> = Vec::new();
    let mut acc = 1;
    for c in cards.rev() {
        strides.push(acc);
        acc *= c;
    }
    strides.reverse();
    strides
}

impl JointDistribution {
    /// Builds and validates a distribution from a row-major table.
    pub fn new(variables: Vec<VariableSpec>, probabilities: Vec<f64>) -> Result<Self> {
        let strides = strides_for(variables.iter().map(|v| v.cardinality));
        let dist = JointDistribution {
            variables,
            probabilities,
            strides,
        };
        dist.validate()?;
        Ok(dist)
    }

    /// Builds a table by evaluating `mass` on every full assignment, in row-major order.
    pub fn from_fn<F>(variables: Vec<VariableSpec>, mut mass: F) -> Result<Self>
    where
        F: FnMut(&[usize]) -> f64,
    {
        let cells = check_variables(&variables)?;
        let cards: Vec<usize> = variables.iter().map(|v| v.cardinality).collect();
        let mut probabilities = Vec::with_capacity(cells);
        let mut assignment = vec![0usize; cards.len()];
        for _ in 0..cells {
            probabilities.push(mass(&assignment));
            advance(&mut assignment, &cards);
        }
        Self::new(variables, probabilities)
    }

    /// Normalizes non-negative weights into a distribution. This is the only
    /// constructor that rescales its input.
    pub fn from_weights(variables: Vec<VariableSpec>, weights: Vec<f64>) -> Result<Self> {
        if let Some((cell, &value)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(**w >= 0.0) || !w.is_finite())
        {
            return Err(Error::NegativeMass { cell, value });
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::NotNormalized { deviation: -1.0 });
        }
        let probabilities = weights.into_iter().map(|w| w / total).collect();
        Self::new(variables, probabilities)
    }

    pub fn validate(&self) -> Result<()> {
        let cells = check_variables(&self.variables)?;
        if cells != self.probabilities.len() {
            return Err(Error::ShapeMismatch(format!(
                "table has {} entries, variables require {cells}",
                self.probabilities.len()
            )));
        }
        for (cell, &value) in self.probabilities.iter().enumerate() {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(Error::NegativeMass { cell, value });
            }
        }
        let deviation = self.probabilities.iter().sum::<f64>() - 1.0;
        if deviation.abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::NotNormalized { deviation });
        }
        Ok(())
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    /// Resolves a name set to variable indices sorted in declaration order.
    pub fn resolve_set<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        resolve_set(&self.variables, names)
    }

    /// `|Σ_S|`, the number of joint values of the named variables.
    pub fn alphabet_size<S: AsRef<str>>(&self, names: &[S]) -> Result<usize> {
        Ok(self
            .resolve_set(names)?
            .iter()
            .map(|&i| self.variables[i].cardinality)
            .product())
    }

    /// Probability table of the variables `order` (indices), laid out row-major in
    /// exactly that order.
    pub(crate) fn project(&self, order: &[usize]) -> Vec<f64> {
        let cards: Vec<usize> = self.variables.iter().map(|v| v.cardinality).collect();
        project_table(&cards, order, self.probabilities.iter().copied(), 0.0)
    }

    /// Marginal over `names`, which keep their declaration order.
    pub fn marginal<S: AsRef<str>>(&self, names: &[S]) -> Result<JointDistribution> {
        let order = self.resolve_set(names)?;
        let variables: Vec<VariableSpec> =
            order.iter().map(|&i| self.variables[i].clone()).collect();
        let table = self.project(&order);
        let strides = strides_for(variables.iter().map(|v| v.cardinality));
        Ok(JointDistribution {
            variables,
            probabilities: table,
            strides,
        })
    }

    /// `P(event)`.
    pub fn prob(&self, event: &Event) -> Result<f64> {
        let resolved = event.resolve(&self.variables)?;
        if resolved.is_empty() {
            return Ok(self.probabilities.iter().sum());
        }
        let order: Vec<usize> = resolved.iter().map(|&(i, _)| i).collect();
        let table = self.project(&order);
        let sub_strides = strides_for(order.iter().map(|&i| self.variables[i].cardinality));
        let idx: usize = resolved
            .iter()
            .zip(&sub_strides)
            .map(|(&(_, v), s)| v * s)
            .sum();
        Ok(table[idx])
    }

    /// `P(target | given)`.
    pub fn conditional_prob(&self, target: &Event, given: &Event) -> Result<f64> {
        if target.names().any(|n| given.value_of(n).is_some()) {
            return Err(Error::InvalidQuery(
                "target and conditioning events share a variable".into(),
            ));
        }
        let p_given = self.prob(given)?;
        if p_given <= 0.0 {
            return Err(Error::ZeroCondition);
        }
        Ok(self.prob(&target.and(given)?)? / p_given)
    }

    /// Decodes a flat cell index into a full assignment.
    pub fn assignment_of(&self, mut cell: usize) -> Vec<usize> {
        self.strides
            .iter()
            .map(|&s| {
                let v = cell / s;
                cell %= s;
                v
            })
            .collect()
    }

    /// Draws `n` i.i.d. rows by inverse-CDF over the flat table.
    pub fn sample(&self, n: usize, seed: u64) -> SampleDataset {
        let mut rng = rng::seeded(seed);
        let cells = self.draw_cells(n, &mut rng);
        SampleDataset::from_cells(self, &cells, Provenance::FixedN, seed)
    }

    pub(crate) fn draw_cells(&self, n: usize, rng: &mut rng::Rng) -> Vec<usize> {
        let mut cdf = Vec::with_capacity(self.probabilities.len());
        let mut acc = 0.0;
        for &p in &self.probabilities {
            acc += p;
            cdf.push(acc);
        }
        let last_positive = self
            .probabilities
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(0);
        (0..n)
            .map(|_| {
                let u: f64 = rng.random();
                cdf.partition_point(|&c| c <= u).min(last_positive)
            })
            .collect()
    }
}

pub(crate) fn resolve_set<S: AsRef<str>>(
    variables: &[VariableSpec],
    names: &[S],
) -> Result<Vec<usize>> {
    let mut idx = Vec::with_capacity(names.len());
    for name in names {
        let name = name.as_ref();
        let i = variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))?;
        if idx.contains(&i) {
            return Err(Error::InvalidQuery(format!("variable `{name}` listed twice")));
        }
        idx.push(i);
    }
    idx.sort_unstable();
    Ok(idx)
}

/// Odometer increment of `assignment` (last position fastest).
pub(crate) fn advance(assignment: &mut [usize], cards: &[usize]) {
    for pos in (0..cards.len()).rev() {
        assignment[pos] += 1;
        if assignment[pos] < cards[pos] {
            return;
        }
        assignment[pos] = 0;
    }
}

/// Sums a full row-major table (given as an iterator over cells) onto the variables
/// `order`, laid out row-major in that order.
pub(crate) fn project_table<T>(
    cards: &[usize],
    order: &[usize],
    cells: impl Iterator<Item = T>,
    zero: T,
) -> Vec<T>
where
    T: Copy + std::ops::AddAssign,
{
    let sub_strides = strides_for(order.iter().map(|&i| cards[i]));
    let mut contrib = vec![0usize; cards.len()];
    for (&var, &s) in order.iter().zip(&sub_strides) {
        contrib[var] = s;
    }
    let out_len: usize = order.iter().map(|&i| cards[i]).product();
    let mut out = vec![zero; out_len];
    let mut assignment = vec![0usize; cards.len()];
    let mut sub = 0usize;
    for value in cells {
        out[sub] += value;
        // odometer step that keeps `sub` in sync
        for pos in (0..cards.len()).rev() {
            assignment[pos] += 1;
            if assignment[pos] < cards[pos] {
                sub += contrib[pos];
                break;
            }
            sub -= (cards[pos] - 1) * contrib[pos];
            assignment[pos] = 0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_pair() -> JointDistribution {
        JointDistribution::new(
            vec![VariableSpec::binary("A"), VariableSpec::binary("B")],
            vec![0.25; 4],
        )
        .unwrap()
    }

    fn product(pa: &[f64], pb: &[f64]) -> JointDistribution {
        let vars = vec![
            VariableSpec::new("A", pa.len()),
            VariableSpec::new("B", pb.len()),
        ];
        JointDistribution::from_fn(vars, |x| pa[x[0]] * pb[x[1]]).unwrap()
    }

    #[test]
    fn uniform_validates() {
        assert!(uniform_pair().validate().is_ok());
    }

    #[test]
    fn rejects_unnormalized() {
        let err = JointDistribution::new(
            vec![VariableSpec::binary("A")],
            vec![0.5, 0.499],
        )
        .unwrap_err();
        match err {
            Error::NotNormalized { deviation } => assert!((deviation + 0.001).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_negative_and_bad_shape() {
        let neg = JointDistribution::new(vec![VariableSpec::binary("A")], vec![1.5, -0.5]);
        assert_eq!(neg.unwrap_err().code(), "NEGATIVE_MASS");
        let shape = JointDistribution::new(vec![VariableSpec::binary("A")], vec![1.0]);
        assert_eq!(shape.unwrap_err().code(), "SHAPE_MISMATCH");
        let dup = JointDistribution::new(
            vec![VariableSpec::binary("A"), VariableSpec::binary("A")],
            vec![0.25; 4],
        );
        assert_eq!(dup.unwrap_err().code(), "SHAPE_MISMATCH");
    }

    #[test]
    fn size_caps_are_enforced() {
        let vars: Vec<_> = (0..26).map(|i| VariableSpec::binary(format!("V{i}"))).collect();
        assert_eq!(check_variables(&vars).unwrap_err().code(), "SHAPE_MISMATCH");
        let vars: Vec<_> = (0..3).map(|i| VariableSpec::new(format!("V{i}"), 1 << 9)).collect();
        assert_eq!(check_variables(&vars).unwrap_err().code(), "SHAPE_MISMATCH");
    }

    #[test]
    fn marginal_identity_and_factor() {
        let d = uniform_pair();
        assert_eq!(d.marginal(&["A", "B"]).unwrap(), d);
        // set order does not matter
        assert_eq!(d.marginal(&["B", "A"]).unwrap(), d);

        let p = product(&[0.3, 0.7], &[0.1, 0.2, 0.7]);
        let a = p.marginal(&["A"]).unwrap();
        assert!((a.probabilities()[0] - 0.3).abs() < 1e-15);
        let b = p.marginal(&["B"]).unwrap();
        for (got, want) in b.probabilities().iter().zip([0.1, 0.2, 0.7]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(p.marginal(&["C"]).unwrap_err().code(), "UNKNOWN_VARIABLE");
    }

    #[test]
    fn conditional_basic() {
        let d = uniform_pair();
        let p = d
            .conditional_prob(&Event::single("A", 0), &Event::empty())
            .unwrap();
        assert_eq!(p, 0.5);
        let z = JointDistribution::new(
            vec![VariableSpec::binary("A"), VariableSpec::binary("B")],
            vec![0.5, 0.5, 0.0, 0.0],
        )
        .unwrap();
        assert_eq!(
            z.conditional_prob(&Event::single("B", 0), &Event::single("A", 1))
                .unwrap_err(),
            Error::ZeroCondition
        );
        assert_eq!(
            z.conditional_prob(&Event::single("A", 0), &Event::single("A", 0))
                .unwrap_err()
                .code(),
            "INVALID_QUERY"
        );
    }

    #[test]
    fn event_parsing() {
        let e: Event = "X=0, Y=1".parse().unwrap();
        assert_eq!(e.value_of("Y"), Some(1));
        assert!("".parse::<Event>().unwrap().is_empty());
        assert_eq!("X".parse::<Event>().unwrap_err().code(), "PARSE_ERROR");
        assert_eq!("X=0,X=1".parse::<Event>().unwrap_err().code(), "INVALID_QUERY");
        assert_eq!(e.to_string(), "X=0,Y=1");
    }

    #[test]
    fn event_out_of_range_is_rejected() {
        let d = uniform_pair();
        assert_eq!(d.prob(&Event::single("A", 2)).unwrap_err().code(), "OUT_OF_RANGE");
    }

    #[test]
    fn sampling_zero_and_determinism() {
        let d = uniform_pair();
        assert_eq!(d.sample(0, 1).len(), 0);
        let a = d.sample(1000, 42);
        let b = d.sample(1000, 42);
        assert_eq!(a, b);
        assert_ne!(a, d.sample(1000, 43));
    }

    #[test]
    fn sampling_never_hits_zero_cells() {
        let d = JointDistribution::new(
            vec![VariableSpec::new("A", 4)],
            vec![0.0, 0.5, 0.0, 0.5],
        )
        .unwrap();
        let data = d.sample(10_000, 9);
        assert_eq!(data.count(&Event::single("A", 0)).unwrap(), 0);
        assert_eq!(data.count(&Event::single("A", 2)).unwrap(), 0);
    }

    #[test]
    fn assignment_decoding_matches_layout() {
        let d = JointDistribution::from_fn(
            vec![VariableSpec::new("A", 2), VariableSpec::new("B", 3)],
            |_| 1.0 / 6.0,
        )
        .unwrap();
        assert_eq!(d.assignment_of(0), vec![0, 0]);
        assert_eq!(d.assignment_of(4), vec![1, 1]);
        assert_eq!(d.assignment_of(5), vec![1, 2]);
    }
}
