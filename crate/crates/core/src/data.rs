//! Sample datasets and count queries.

use serde::{Deserialize, Serialize};

use crate::dist::{self, check_variables, Event, JointDistribution, VariableSpec};
use crate::error::{Error, Result};

/// How the rows of a dataset were drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "mean")]
pub enum Provenance {
    FixedN,
    /// `Pois(mean)` rows.
    Poissonized(f64),
}

/// Rows of full assignments, stored flat (row-major, one `u32` per variable).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDataset {
    variables: Vec<VariableSpec>,
    cells: Vec<u32>,
    rows: usize,
    provenance: Provenance,
    seed: u64,
}

impl SampleDataset {
    pub fn new(
        variables: Vec<VariableSpec>,
        rows: Vec<Vec<usize>>,
        provenance: Provenance,
        seed: u64,
    ) -> Result<Self> {
        check_variables(&variables)?;
        let width = variables.len();
        let mut cells = Vec::with_capacity(rows.len() * width);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::ShapeMismatch(format!(
                    "row {r} has {} entries, expected {width}",
                    row.len()
                )));
            }
            for (v, &value) in variables.iter().zip(row) {
                if value >= v.cardinality {
                    return Err(Error::OutOfRange(format!(
                        "row {r}: value {value} for `{}` (cardinality {})",
                        v.name, v.cardinality
                    )));
                }
                cells.push(value as u32);
            }
        }
        Ok(SampleDataset {
            variables,
            cells,
            rows: rows.len(),
            provenance,
            seed,
        })
    }

    pub(crate) fn from_cells(
        dist: &JointDistribution,
        flat_cells: &[usize],
        provenance: Provenance,
        seed: u64,
    ) -> Self {
        let width = dist.variables().len();
        let mut cells = Vec::with_capacity(flat_cells.len() * width);
        for &c in flat_cells {
            cells.extend(dist.assignment_of(c).into_iter().map(|v| v as u32));
        }
        SampleDataset {
            variables: dist.variables().to_vec(),
            cells,
            rows: flat_cells.len(),
            provenance,
            seed,
        }
    }

    pub fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, i: usize) -> &[u32] {
        let w = self.variables.len();
        &self.cells[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn alphabet_size<S: AsRef<str>>(&self, names: &[S]) -> Result<usize> {
        Ok(dist::resolve_set(&self.variables, names)?
            .iter()
            .map(|&i| self.variables[i].cardinality)
            .product())
    }

    /// Number of rows matching every binding of `event`.
    pub fn count(&self, event: &Event) -> Result<u64> {
        let resolved = event.resolve(&self.variables)?;
        Ok(self
            .rows()
            .filter(|row| resolved.iter().all(|&(i, v)| row[i] as usize == v))
            .count() as u64)
    }

    /// Count table over `names` (declaration order), row-major.
    pub fn counts<S: AsRef<str>>(&self, names: &[S]) -> Result<(Vec<VariableSpec>, Vec<u64>)> {
        let order = dist::resolve_set(&self.variables, names)?;
        let vars: Vec<VariableSpec> = order.iter().map(|&i| self.variables[i].clone()).collect();
        let mut strides = vec![1usize; order.len()];
        for j in (0..order.len().saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * vars[j + 1].cardinality;
        }
        let len: usize = vars.iter().map(|v| v.cardinality).product();
        let mut table = vec![0u64; len];
        for row in self.rows() {
            let idx: usize = order
                .iter()
                .zip(&strides)
                .map(|(&i, s)| row[i] as usize * s)
                .sum();
            table[idx] += 1;
        }
        Ok((vars, table))
    }

    /// Empirical distribution of the named variables.
    pub fn empirical<S: AsRef<str>>(&self, names: &[S]) -> Result<JointDistribution> {
        if self.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let (vars, table) = self.counts(names)?;
        let n = self.rows as f64;
        JointDistribution::from_weights(vars, table.into_iter().map(|c| c as f64 / n).collect())
    }
}
