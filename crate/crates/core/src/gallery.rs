//! Constructed distributions with known ground truth.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::ci::{delta_ci, CiQuery};
use crate::dist::{Event, JointDistribution, VariableSpec};
use crate::error::{Error, Result};
use crate::estimators::alpha;
use crate::rng;

fn bernoulli(p_one: f64, value: usize) -> f64 {
    if value == 1 {
        p_one
    } else {
        1.0 - p_one
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Lower-bound construction over binary `A, B, X, Y` (in that order) where `{A}` is
/// an approximate blanket of `X` inside `{A, B}` yet adjusting on it is biased.
///
/// * `A = 1` w.p. `(ε/4α)·(α − ε/4)/(1 − √ε/2)`
/// * `B = 1 − A` w.p. `1 − √ε`, else a fair coin
/// * `X = A` w.p. `1 − α`, `1 − A` w.p. `α − √ε/2`, `B` w.p. `√ε/2`
/// * `Y = 1` iff `(X, A, B) = (0, 1, 0)`
///
/// Requires `0 < √ε ≤ α ≤ 1/2`. The natural query is `x = (X=0)`, `y = (Y=1)`.
pub fn hardness(epsilon: f64, alpha: f64) -> Result<JointDistribution> {
    let root = epsilon.sqrt();
    if !(epsilon > 0.0 && root <= alpha && alpha <= 0.5) {
        return Err(Error::ParamRange(format!(
            "hardness needs 0 < sqrt(eps) <= alpha <= 1/2, got eps = {epsilon}, alpha = {alpha}"
        )));
    }
    let p_a = epsilon / (4.0 * alpha) * (alpha - epsilon / 4.0) / (1.0 - root / 2.0);
    let vars = ["A", "B", "X", "Y"].map(VariableSpec::binary).to_vec();
    JointDistribution::from_fn(vars, |v| {
        let (a, b, x, y) = (v[0], v[1], v[2], v[3]);
        let pa = bernoulli(p_a, a);
        let pb = (1.0 - root) * indicator(b == 1 - a) + root / 2.0;
        let px = (1.0 - alpha) * indicator(x == a)
            + (alpha - root / 2.0) * indicator(x == 1 - a)
            + (root / 2.0) * indicator(x == b);
        let y_on = x == 0 && a == 1 && b == 0;
        pa * pb * px * indicator((y == 1) == y_on)
    })
}

/// Weak-edge example over binary `Z, X, Y`: `Z` a fair coin, `X = Z` w.p. `ε` and a
/// fair coin otherwise, `Y = X ⊕ Z`.
pub fn weak_edge(epsilon: f64) -> Result<JointDistribution> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::ParamRange(format!(
            "weak-edge needs 0 <= eps < 1, got {epsilon}"
        )));
    }
    let vars = ["Z", "X", "Y"].map(VariableSpec::binary).to_vec();
    JointDistribution::from_fn(vars, |v| {
        let (z, x, y) = (v[0], v[1], v[2]);
        let px = epsilon * indicator(x == z) + (1.0 - epsilon) * 0.5;
        0.5 * px * indicator(y == x ^ z)
    })
}

/// XOR example over binary `A, B, X`: `A`, `B` fair coins, `X = A ⊕ B` w.p. `1 − 2ε`,
/// `A` w.p. `ε`, `B` w.p. `ε`. `X` is nearly independent of each of `A` and `B` but
/// not of the pair.
pub fn xor(epsilon: f64) -> Result<JointDistribution> {
    if !(epsilon > 0.0 && epsilon <= 0.5) {
        return Err(Error::ParamRange(format!(
            "xor needs 0 < eps <= 1/2, got {epsilon}"
        )));
    }
    let vars = ["A", "B", "X"].map(VariableSpec::binary).to_vec();
    JointDistribution::from_fn(vars, |v| {
        let (a, b, x) = (v[0], v[1], v[2]);
        let px = (1.0 - 2.0 * epsilon) * indicator(x == a ^ b)
            + epsilon * indicator(x == a)
            + epsilon * indicator(x == b);
        0.25 * px
    })
}

/// Names of the parents of `X` in [`backdoor`].
pub fn backdoor_parents(k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("A{i}")).collect()
}

const BACKDOOR_MARGIN: f64 = 1e-3;
const BACKDOOR_MIN_ALPHA: f64 = 0.01;
const BACKDOOR_ATTEMPTS: usize = 1000;

/// Binary `B, A1..Ak, X, Y` with edges `B → Ai → X → Y` and `B → Y`.
///
/// Every CPT entry is drawn from `[0.2, 0.8]`. A draw is kept only if the structural
/// independences hold exactly, every parent of `X` and the screening variable `B`
/// carry dependence of at least `1e-3` in Δ, and positivity is at least `0.01`.
pub fn backdoor(k: usize, seed: u64) -> Result<JointDistribution> {
    if !(1..=8).contains(&k) {
        return Err(Error::ParamRange(format!("backdoor needs 1 <= k <= 8, got {k}")));
    }
    let mut rng = rng::seeded(seed);
    let draw = |rng: &mut rng::Rng| rng.random_range(0.2..=0.8);
    let parents = backdoor_parents(k);
    let mut vars = vec![VariableSpec::binary("B")];
    vars.extend(parents.iter().map(VariableSpec::binary));
    vars.push(VariableSpec::binary("X"));
    vars.push(VariableSpec::binary("Y"));

    for _ in 0..BACKDOOR_ATTEMPTS {
        let p_b = draw(&mut rng);
        let p_a: Vec<[f64; 2]> = (0..k).map(|_| [draw(&mut rng), draw(&mut rng)]).collect();
        let p_x: Vec<f64> = (0..1usize << k).map(|_| draw(&mut rng)).collect();
        let p_y: [[f64; 2]; 2] = [
            [draw(&mut rng), draw(&mut rng)],
            [draw(&mut rng), draw(&mut rng)],
        ];
        let dist = JointDistribution::from_fn(vars.clone(), |v| {
            let b = v[0];
            let a = &v[1..=k];
            let (x, y) = (v[k + 1], v[k + 2]);
            let parent_cell = a.iter().fold(0, |acc, &ai| acc * 2 + ai);
            let mut p = bernoulli(p_b, b);
            for (i, &ai) in a.iter().enumerate() {
                p *= bernoulli(p_a[i][b], ai);
            }
            p * bernoulli(p_x[parent_cell], x) * bernoulli(p_y[x][b], y)
        })?;
        if backdoor_checks(&dist, &parents)? {
            return Ok(dist);
        }
    }
    Err(Error::ParamRange(format!(
        "no admissible backdoor parameterization for k = {k}, seed = {seed}"
    )))
}

fn backdoor_checks(dist: &JointDistribution, parents: &[String]) -> Result<bool> {
    let none: [&str; 0] = [];
    let mut xb = vec!["X".to_string(), "B".to_string()];
    let structural = [
        CiQuery::new(["X"], ["B"], parents.iter().cloned()),
        CiQuery::new(["Y"], parents.iter().cloned(), xb.iter().cloned()),
    ];
    for q in &structural {
        if delta_ci(dist, q)? > 1e-12 {
            return Ok(false);
        }
    }
    let mut z: Vec<String> = parents.to_vec();
    z.push("B".into());
    for p in parents {
        let rest: Vec<String> = z.iter().filter(|v| *v != p).cloned().collect();
        if delta_ci(dist, &CiQuery::new(["X"], [p.clone()], rest))? < BACKDOOR_MARGIN {
            return Ok(false);
        }
    }
    xb.truncate(1);
    let dependent = [
        CiQuery::new(["Y"], parents.iter().cloned(), xb),
        CiQuery::new(["Y"], ["B"], ["X"]),
        CiQuery::new(["X"], z.iter().cloned(), none),
    ];
    for q in &dependent {
        if delta_ci(dist, q)? < BACKDOOR_MARGIN {
            return Ok(false);
        }
    }
    for x in 0..2 {
        if alpha(dist, &Event::single("X", x), &z)? < BACKDOOR_MIN_ALPHA {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Random table over `V1..Vn`, cardinalities uniform in `[min(2, max_card), max_card]`,
/// weights from a flat Dirichlet prior mixed with the uniform table so every cell
/// carries at least `floor / |table|`.
pub fn random(num_vars: usize, max_card: usize, seed: u64, floor: f64) -> Result<JointDistribution> {
    if !(1..=6).contains(&num_vars) || !(1..=4).contains(&max_card) || !(0.0..1.0).contains(&floor) {
        return Err(Error::ParamRange(format!(
            "random needs 1 <= vars <= 6, 1 <= card <= 4, 0 <= floor < 1; got {num_vars}, {max_card}, {floor}"
        )));
    }
    let mut rng = rng::seeded(seed);
    let low = max_card.min(2);
    let vars: Vec<VariableSpec> = (1..=num_vars)
        .map(|i| VariableSpec::new(format!("V{i}"), rng.random_range(low..=max_card)))
        .collect();
    let cells: usize = vars.iter().map(|v| v.cardinality).product();
    let weights: Vec<f64> = (0..cells).map(|_| Exp1.sample(&mut rng)).collect();
    let total: f64 = weights.iter().sum();
    let uniform = 1.0 / cells as f64;
    let table: Vec<f64> = weights
        .iter()
        .map(|w| (1.0 - floor) * w / total + floor * uniform)
        .collect();
    JointDistribution::from_weights(vars, table)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum GallerySpec {
    Backdoor { k: usize, seed: u64 },
    Hardness { eps: f64, alpha: f64 },
    WeakEdge { eps: f64 },
    Xor { eps: f64 },
    Random { vars: usize, card: usize, seed: u64, floor: f64 },
}

impl GallerySpec {
    pub fn build(&self) -> Result<JointDistribution> {
        match *self {
            GallerySpec::Backdoor { k, seed } => backdoor(k, seed),
            GallerySpec::Hardness { eps, alpha } => hardness(eps, alpha),
            GallerySpec::WeakEdge { eps } => weak_edge(eps),
            GallerySpec::Xor { eps } => xor(eps),
            GallerySpec::Random { vars, card, seed, floor } => random(vars, card, seed, floor),
        }
    }
}

impl fmt::Display for GallerySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GallerySpec::Backdoor { k, seed } => write!(f, "backdoor:k={k},seed={seed}"),
            GallerySpec::Hardness { eps, alpha } => write!(f, "hardness:eps={eps},alpha={alpha}"),
            GallerySpec::WeakEdge { eps } => write!(f, "weak-edge:eps={eps}"),
            GallerySpec::Xor { eps } => write!(f, "xor:eps={eps}"),
            GallerySpec::Random { vars, card, seed, floor } => {
                write!(f, "random:vars={vars},card={card},seed={seed},floor={floor}")
            }
        }
    }
}

/// Parses `family:key=value,...`, e.g. `hardness:eps=0.04,alpha=0.4` or
/// `backdoor:k=3,seed=1`.
impl FromStr for GallerySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |message: String| Error::Parse {
            line: 1,
            column: 1,
            message,
        };
        let (family, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut params: Vec<(&str, &str)> = Vec::new();
        for part in rest.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got `{part}`")))?;
            params.push((k.trim(), v.trim()));
        }
        let get = |key: &str| -> Result<&str> {
            params
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| bad(format!("gallery `{family}` needs `{key}`")))
        };
        let float = |key: &str| -> Result<f64> {
            get(key)?
                .parse()
                .map_err(|_| bad(format!("`{key}` must be a number")))
        };
        let int = |key: &str| -> Result<u64> {
            get(key)?
                .parse()
                .map_err(|_| bad(format!("`{key}` must be a non-negative integer")))
        };
        let spec = match family.trim() {
            "backdoor" => GallerySpec::Backdoor {
                k: int("k")? as usize,
                seed: int("seed")?,
            },
            "hardness" => GallerySpec::Hardness {
                eps: float("eps")?,
                alpha: float("alpha")?,
            },
            "weak-edge" => GallerySpec::WeakEdge { eps: float("eps")? },
            "xor" => GallerySpec::Xor { eps: float("eps")? },
            "random" => GallerySpec::Random {
                vars: int("vars")? as usize,
                card: int("card")? as usize,
                seed: int("seed")?,
                floor: float("floor")?,
            },
            other => return Err(bad(format!("unknown gallery family `{other}`"))),
        };
        Ok(spec)
    }
}
