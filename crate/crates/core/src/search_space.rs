//! Mixed continuous / integer / categorical search spaces.
//!
//! Configurations are stored in user units. Models work on the encoded
//! form: numeric variables min-max scaled to `[0, 1]`, categorical
//! variables as the index of their label (consumed with exact-match
//! semantics only, never as a magnitude).

use std::collections::HashSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Continuous { lower: f64, upper: f64 },
    Integer { lower: i64, upper: i64 },
    Categorical { categories: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    #[serde(flatten)]
    pub domain: Domain,
}

impl Variable {
    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Variable {
            name: name.into(),
            domain: Domain::Continuous { lower, upper },
        }
    }

    pub fn integer(name: impl Into<String>, lower: i64, upper: i64) -> Self {
        Variable {
            name: name.into(),
            domain: Domain::Integer { lower, upper },
        }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        Variable {
            name: name.into(),
            domain: Domain::Categorical {
                categories: categories.into_iter().map(Into::into).collect(),
            },
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.domain, Domain::Categorical { .. })
    }

    fn check(&self) -> Result<()> {
        match &self.domain {
            Domain::Continuous { lower, upper } => {
                if !(lower.is_finite() && upper.is_finite() && lower < upper) {
                    return Err(Error::Space(format!(
                        "`{}` needs finite lower < upper, got [{lower}, {upper}]",
                        self.name
                    )));
                }
            }
            Domain::Integer { lower, upper } => {
                if lower >= upper {
                    return Err(Error::Space(format!(
                        "`{}` needs lower < upper, got [{lower}, {upper}]",
                        self.name
                    )));
                }
            }
            Domain::Categorical { categories } => {
                if categories.is_empty() {
                    return Err(Error::Space(format!("`{}` has no categories", self.name)));
                }
                let mut seen = HashSet::new();
                for c in categories {
                    if !seen.insert(c.as_str()) {
                        return Err(Error::Space(format!(
                            "`{}` lists category `{c}` twice",
                            self.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// A single coordinate of a [`Configuration`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Integer(i64),
    Real(f64),
    Category(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Integer(v) => write!(f, "{v}"),
            Value::Real(v) => write!(f, "{v}"),
            Value::Category(v) => f.write_str(v),
        }
    }
}

/// One point of a [`SearchSpace`], values ordered as the space's variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration(pub Vec<Value>);

impl Configuration {
    pub fn reals(values: &[f64]) -> Self {
        Configuration(values.iter().map(|&v| Value::Real(v)).collect())
    }

    pub fn values(&self) -> &[Value] {
        &self.0
    }
}

#[derive(Serialize, Deserialize)]
struct SpaceDef {
    variables: Vec<Variable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceDef", into = "SpaceDef")]
pub struct SearchSpace {
    variables: Vec<Variable>,
    categorical: Vec<bool>,
}

impl TryFrom<SpaceDef> for SearchSpace {
    type Error = Error;

    fn try_from(def: SpaceDef) -> Result<Self> {
        SearchSpace::new(def.variables)
    }
}

impl From<SearchSpace> for SpaceDef {
    fn from(space: SearchSpace) -> Self {
        SpaceDef {
            variables: space.variables,
        }
    }
}

impl SearchSpace {
    pub fn new(variables: Vec<Variable>) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::Space("at least one variable is required".into()));
        }
        let mut names = HashSet::new();
        for v in &variables {
            v.check()?;
            if !names.insert(v.name.as_str()) {
                return Err(Error::Space(format!("duplicate variable name `{}`", v.name)));
            }
        }
        let categorical = variables.iter().map(Variable::is_categorical).collect();
        Ok(SearchSpace {
            variables,
            categorical,
        })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn dim(&self) -> usize {
        self.variables.len()
    }

    /// Per encoded coordinate: `true` when the variable is categorical.
    pub fn categorical_mask(&self) -> &[bool] {
        &self.categorical
    }

    pub fn n_categorical(&self) -> usize {
        self.categorical.iter().filter(|&&c| c).count()
    }

    pub fn n_numeric(&self) -> usize {
        self.dim() - self.n_categorical()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// Checks `config` and returns a copy with values coerced to their
    /// variable's kind (`3` for a continuous variable becomes `3.0`, `2.0`
    /// for an integer variable becomes `2`).
    pub fn normalize(&self, config: &Configuration) -> Result<Configuration> {
        if config.0.len() != self.dim() {
            return Err(Error::Config(format!(
                "configuration has {} values, space has {} variables",
                config.0.len(),
                self.dim()
            )));
        }
        let mut out = Vec::with_capacity(self.dim());
        for (var, value) in self.variables.iter().zip(&config.0) {
            let domain_err = |detail: String| Error::Domain {
                variable: var.name.clone(),
                detail,
            };
            let v = match (&var.domain, value) {
                (Domain::Continuous { lower, upper }, Value::Real(x)) => {
                    Self::check_range(*x, *lower, *upper).map_err(domain_err)?;
                    Value::Real(*x)
                }
                (Domain::Continuous { lower, upper }, Value::Integer(x)) => {
                    let x = *x as f64;
                    Self::check_range(x, *lower, *upper).map_err(domain_err)?;
                    Value::Real(x)
                }
                (Domain::Integer { lower, upper }, Value::Integer(x)) => {
                    if x < lower || x > upper {
                        return Err(domain_err(format!("{x} not in [{lower}, {upper}]")));
                    }
                    Value::Integer(*x)
                }
                (Domain::Integer { lower, upper }, Value::Real(x)) => {
                    if x.fract() != 0.0 {
                        return Err(domain_err(format!("{x} is not an integer")));
                    }
                    let xi = *x as i64;
                    if xi < *lower || xi > *upper {
                        return Err(domain_err(format!("{x} not in [{lower}, {upper}]")));
                    }
                    Value::Integer(xi)
                }
                (Domain::Categorical { categories }, Value::Category(c)) => {
                    if !categories.contains(c) {
                        return Err(domain_err(format!("unknown category `{c}`")));
                    }
                    Value::Category(c.clone())
                }
                (_, other) => return Err(domain_err(format!("wrong value kind `{other}`"))),
            };
            out.push(v);
        }
        Ok(Configuration(out))
    }

    fn check_range(x: f64, lower: f64, upper: f64) -> std::result::Result<(), String> {
        if x.is_finite() && x >= lower && x <= upper {
            Ok(())
        } else {
            Err(format!("{x} not in [{lower}, {upper}]"))
        }
    }

    pub fn validate(&self, config: &Configuration) -> Result<()> {
        self.normalize(config).map(|_| ())
    }

    /// Encodes a configuration: numeric variables scaled to `[0, 1]`,
    /// categorical variables as their category index.
    pub fn encode(&self, config: &Configuration) -> Result<Vec<f64>> {
        let config = self.normalize(config)?;
        Ok(self
            .variables
            .iter()
            .zip(config.0)
            .map(|(var, value)| match (&var.domain, value) {
                (Domain::Continuous { lower, upper }, Value::Real(x)) => (x - lower) / (upper - lower),
                (Domain::Integer { lower, upper }, Value::Integer(x)) => {
                    (x - lower) as f64 / (upper - lower) as f64
                }
                (Domain::Categorical { categories }, Value::Category(c)) => {
                    categories.iter().position(|k| *k == c).unwrap_or(0) as f64
                }
                _ => unreachable!("normalize guarantees matching kinds"),
            })
            .collect())
    }

    /// Inverse of [`encode`](Self::encode). Out-of-range inputs are clamped,
    /// integers rounded to the nearest admissible value.
    pub fn decode(&self, encoded: &[f64]) -> Configuration {
        Configuration(
            self.variables
                .iter()
                .zip(encoded)
                .map(|(var, &u)| match &var.domain {
                    Domain::Continuous { lower, upper } => {
                        let u = u.clamp(0.0, 1.0);
                        Value::Real((lower + u * (upper - lower)).clamp(*lower, *upper))
                    }
                    Domain::Integer { lower, upper } => {
                        let u = u.clamp(0.0, 1.0);
                        let x = *lower as f64 + u * (upper - lower) as f64;
                        Value::Integer((x.round() as i64).clamp(*lower, *upper))
                    }
                    Domain::Categorical { categories } => {
                        let idx = (u.round().max(0.0) as usize).min(categories.len() - 1);
                        Value::Category(categories[idx].clone())
                    }
                })
                .collect(),
        )
    }

    /// Gower distance `sqrt(1 - S)` where `S` is the mean per-dimension
    /// similarity (range-normalised for numeric, exact match for categorical).
    pub fn gower_distance(&self, a: &Configuration, b: &Configuration) -> Result<f64> {
        let ea = self.encode(a)?;
        let eb = self.encode(b)?;
        Ok(self.gower_encoded(&ea, &eb))
    }

    /// Gower distance between two already-encoded points.
    pub fn gower_encoded(&self, a: &[f64], b: &[f64]) -> f64 {
        let total: f64 = self
            .categorical
            .iter()
            .zip(a.iter().zip(b))
            .map(|(&cat, (&x, &y))| {
                if cat {
                    if x == y {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    1.0 - (x - y).abs().min(1.0)
                }
            })
            .sum();
        let similarity = total / self.dim() as f64;
        (1.0 - similarity).max(0.0).sqrt()
    }

    /// Latin hypercube design of `n` points. Each numeric variable's range is
    /// cut into `n` equal strata and every stratum receives exactly one point
    /// (integers are stratified over `[lower, upper + 1)` then floored);
    /// categorical values are drawn uniformly.
    pub fn sample_latin_hypercube(&self, n: usize, seed: u64) -> Result<Vec<Configuration>> {
        if n == 0 {
            return Err(Error::Config("latin hypercube needs n >= 1".into()));
        }
        let mut rng = seed::rng(seed);
        let mut columns: Vec<Vec<Value>> = Vec::with_capacity(self.dim());
        for var in &self.variables {
            let column = match &var.domain {
                Domain::Continuous { lower, upper } => {
                    let mut strata: Vec<usize> = (0..n).collect();
                    strata.shuffle(&mut rng);
                    strata
                        .into_iter()
                        .map(|k| {
                            let u = (k as f64 + rng.random::<f64>()) / n as f64;
                            Value::Real((lower + u * (upper - lower)).min(*upper))
                        })
                        .collect()
                }
                Domain::Integer { lower, upper } => {
                    let mut strata: Vec<usize> = (0..n).collect();
                    strata.shuffle(&mut rng);
                    let width = (upper - lower + 1) as f64;
                    strata
                        .into_iter()
                        .map(|k| {
                            let u = (k as f64 + rng.random::<f64>()) / n as f64;
                            let x = lower + (u * width).floor() as i64;
                            Value::Integer(x.min(*upper))
                        })
                        .collect()
                }
                Domain::Categorical { categories } => (0..n)
                    .map(|_| Value::Category(categories[rng.random_range(0..categories.len())].clone()))
                    .collect(),
            };
            columns.push(column);
        }
        Ok((0..n)
            .map(|i| Configuration(columns.iter().map(|c| c[i].clone()).collect()))
            .collect())
    }
}

/// Free-function form of [`SearchSpace::sample_latin_hypercube`].
pub fn sample_latin_hypercube(space: &SearchSpace, n: usize, seed: u64) -> Result<Vec<Configuration>> {
    space.sample_latin_hypercube(n, seed)
}
