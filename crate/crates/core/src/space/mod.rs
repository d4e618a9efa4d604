//! Typed, conditional configuration spaces.
//!
//! A [`ConfigurationSpace`] is an ordered list of [`Parameter`]s plus a set of
//! single-parent [`Condition`]s. A parameter with a condition is only active
//! when its parent is active and the parent's value satisfies the predicate;
//! chains of conditions give multi-level hierarchies. Spaces are immutable
//! once built.

mod encoding;
mod file;
mod sample;
mod value;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use encoding::Encoding;
pub use file::parse_space;
pub use value::Value;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("invalid JSON at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Document { path: String, message: String },
    #[error("duplicate parameter name '{0}'")]
    DuplicateName(String),
    #[error("invalid parameter name '{0}': names must be non-empty and contain no '=' or whitespace")]
    InvalidName(String),
    #[error("parameter '{name}': {message}")]
    InvalidDomain { name: String, message: String },
    #[error("condition on '{child}' references undeclared parameter '{missing}'")]
    UndeclaredParameter { child: String, missing: String },
    #[error("condition on '{child}': {message}")]
    InvalidCondition { child: String, message: String },
    #[error("conditions form a cycle through '{0}'")]
    Cycle(String),
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
}

/// The domain of a parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Float { lo: f64, hi: f64, log: bool },
    Integer { lo: i64, hi: i64, log: bool },
    Categorical { choices: Vec<Value> },
    Ordinal { levels: Vec<Value> },
}

impl Domain {
    pub fn is_numeric(&self) -> bool {
        matches!(self, Domain::Float { .. } | Domain::Integer { .. })
    }

    /// Converts `v` to this domain's canonical value type when possible
    /// (e.g. the JSON integer `1` for a float parameter becomes `1.0`).
    pub fn coerce(&self, v: &Value) -> Option<Value> {
        match self {
            Domain::Float { .. } => v.as_f64().map(Value::Float),
            Domain::Integer { .. } => match v {
                Value::Int(i) => Some(Value::Int(*i)),
                Value::Float(f) if f.fract() == 0.0 && f.abs() < 9.0e15 => {
                    Some(Value::Int(*f as i64))
                }
                _ => None,
            },
            Domain::Categorical { choices } | Domain::Ordinal { levels: choices } => {
                if choices.contains(v) {
                    return Some(v.clone());
                }
                // numeric choices may arrive with a different JSON number type
                let x = v.as_f64()?;
                choices.iter().find(|c| c.as_f64() == Some(x)).cloned()
            }
        }
    }

    /// Parses the textual form written by `Value`'s `Display`.
    pub fn parse_text(&self, s: &str) -> Option<Value> {
        match self {
            Domain::Float { .. } => s.parse::<f64>().ok().filter(|x| x.is_finite()).map(Value::Float),
            Domain::Integer { .. } => s.parse::<i64>().ok().map(Value::Int),
            Domain::Categorical { choices } | Domain::Ordinal { levels: choices } => {
                choices.iter().find(|c| c.to_string() == s).cloned()
            }
        }
    }

    pub fn contains(&self, v: &Value) -> bool {
        match (self, v) {
            (Domain::Float { lo, hi, .. }, Value::Float(x)) => x.is_finite() && lo <= x && x <= hi,
            (Domain::Integer { lo, hi, .. }, Value::Int(x)) => lo <= x && x <= hi,
            (Domain::Categorical { choices }, v) | (Domain::Ordinal { levels: choices }, v) => {
                choices.contains(v)
            }
            _ => false,
        }
    }

    /// Position of `v` among the choices or levels.
    pub fn index_of(&self, v: &Value) -> Option<usize> {
        match self {
            Domain::Categorical { choices } | Domain::Ordinal { levels: choices } => {
                choices.iter().position(|c| c == v)
            }
            _ => None,
        }
    }

    pub fn n_choices(&self) -> Option<usize> {
        match self {
            Domain::Categorical { choices } | Domain::Ordinal { levels: choices } => {
                Some(choices.len())
            }
            _ => None,
        }
    }
}

/// A named, typed hyperparameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub domain: Domain,
    pub default: Value,
}

impl Parameter {
    /// Float on `[lo, hi]`; the default is the (geometric, if `log`) midpoint.
    pub fn float(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            domain: Domain::Float { lo, hi, log: false },
            default: Value::Float(0.5 * (lo + hi)),
        }
    }

    pub fn log_float(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            domain: Domain::Float { lo, hi, log: true },
            default: Value::Float((lo.ln() + 0.5 * (hi.ln() - lo.ln())).exp().clamp(lo, hi)),
        }
    }

    pub fn integer(name: impl Into<String>, lo: i64, hi: i64) -> Self {
        Self {
            name: name.into(),
            domain: Domain::Integer { lo, hi, log: false },
            default: Value::Int(lo + (hi - lo) / 2),
        }
    }

    pub fn log_integer(name: impl Into<String>, lo: i64, hi: i64) -> Self {
        let mid = ((lo as f64).ln() + 0.5 * ((hi as f64).ln() - (lo as f64).ln())).exp();
        Self {
            name: name.into(),
            domain: Domain::Integer { lo, hi, log: true },
            default: Value::Int((mid + 0.5).floor().clamp(lo as f64, hi as f64) as i64),
        }
    }

    /// Categorical parameter; the default is the first choice.
    pub fn categorical<V: Into<Value>>(name: impl Into<String>, choices: Vec<V>) -> Self {
        let choices: Vec<Value> = choices.into_iter().map(Into::into).collect();
        let default = choices.first().cloned().unwrap_or(Value::Int(0));
        Self {
            name: name.into(),
            domain: Domain::Categorical { choices },
            default,
        }
    }

    pub fn ordinal<V: Into<Value>>(name: impl Into<String>, levels: Vec<V>) -> Self {
        let levels: Vec<Value> = levels.into_iter().map(Into::into).collect();
        let default = levels.first().cloned().unwrap_or(Value::Int(0));
        Self {
            name: name.into(),
            domain: Domain::Ordinal { levels },
            default,
        }
    }

    pub fn with_default(mut self, default: impl Into<Value>) -> Self {
        let v = default.into();
        self.default = self.domain.coerce(&v).unwrap_or(v);
        self
    }

    fn validate(&self) -> Result<(), SpaceError> {
        if self.name.is_empty() || self.name.contains('=') || self.name.chars().any(char::is_whitespace)
        {
            return Err(SpaceError::InvalidName(self.name.clone()));
        }
        let bad = |message: String| SpaceError::InvalidDomain {
            name: self.name.clone(),
            message,
        };
        match &self.domain {
            Domain::Float { lo, hi, log } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(bad(format!("bounds must satisfy lo < hi, got [{lo}, {hi}]")));
                }
                if *log && *lo <= 0.0 {
                    return Err(bad(format!("log scale requires lo > 0, got {lo}")));
                }
            }
            Domain::Integer { lo, hi, log } => {
                if lo >= hi {
                    return Err(bad(format!("bounds must satisfy lo < hi, got [{lo}, {hi}]")));
                }
                if *log && *lo <= 0 {
                    return Err(bad(format!("log scale requires lo > 0, got {lo}")));
                }
            }
            Domain::Categorical { choices } | Domain::Ordinal { levels: choices } => {
                if choices.is_empty() {
                    return Err(bad("choices must be non-empty".into()));
                }
                for (i, c) in choices.iter().enumerate() {
                    if choices[..i].contains(c) {
                        return Err(bad(format!("duplicate choice '{c}'")));
                    }
                }
            }
        }
        if !self.domain.contains(&self.default) {
            return Err(bad(format!("default '{}' outside the domain", self.default)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    Equals(Value),
    In(Vec<Value>),
}

impl Predicate {
    pub fn holds(&self, v: &Value) -> bool {
        match self {
            Predicate::Equals(x) => x == v,
            Predicate::In(xs) => xs.contains(v),
        }
    }

    fn values(&self) -> &[Value] {
        match self {
            Predicate::Equals(x) => std::slice::from_ref(x),
            Predicate::In(xs) => xs,
        }
    }
}

/// `child` is active iff `parent` is active and `predicate(parent value)` holds.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub child: String,
    pub parent: String,
    pub predicate: Predicate,
}

impl Condition {
    pub fn equals(child: impl Into<String>, parent: impl Into<String>, value: impl Into<Value>) -> Self {
        Self {
            child: child.into(),
            parent: parent.into(),
            predicate: Predicate::Equals(value.into()),
        }
    }

    pub fn one_of<V: Into<Value>>(
        child: impl Into<String>,
        parent: impl Into<String>,
        values: Vec<V>,
    ) -> Self {
        Self {
            child: child.into(),
            parent: parent.into(),
            predicate: Predicate::In(values.into_iter().map(Into::into).collect()),
        }
    }
}

/// A point in a configuration space: values for exactly the active parameters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Configuration {
    values: BTreeMap<String, Value>,
}

impl Configuration {
    pub fn from_values(values: BTreeMap<String, Value>) -> Self {
        Self { values }
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.values.get(name)
    }

    pub fn get_f64(&self, name: &str) -> Option<f64> {
        self.values.get(name).and_then(Value::as_f64)
    }

    pub fn values(&self) -> &BTreeMap<String, Value> {
        &self.values
    }

    pub fn into_values(self) -> BTreeMap<String, Value> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.values
                .iter()
                .map(|(k, v)| (k.clone(), v.to_json()))
                .collect(),
        )
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Clone)]
pub struct ConfigurationSpace {
    params: Vec<Parameter>,
    conditions: Vec<Condition>,
    index: HashMap<String, usize>,
    /// `(parent index, condition index)` for each conditioned parameter.
    parent: Vec<Option<(usize, usize)>>,
    /// Parents before children.
    topo: Vec<usize>,
}

impl PartialEq for ConfigurationSpace {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params && self.conditions == other.conditions
    }
}

impl ConfigurationSpace {
    pub fn new(params: Vec<Parameter>, conditions: Vec<Condition>) -> Result<Self, SpaceError> {
        let mut index = HashMap::new();
        for (i, p) in params.iter().enumerate() {
            p.validate()?;
            if index.insert(p.name.clone(), i).is_some() {
                return Err(SpaceError::DuplicateName(p.name.clone()));
            }
        }

        let mut parent = vec![None; params.len()];
        for (ci, c) in conditions.iter().enumerate() {
            let child = *index.get(&c.child).ok_or_else(|| SpaceError::UndeclaredParameter {
                child: c.child.clone(),
                missing: c.child.clone(),
            })?;
            let par = *index.get(&c.parent).ok_or_else(|| SpaceError::UndeclaredParameter {
                child: c.child.clone(),
                missing: c.parent.clone(),
            })?;
            let invalid = |message: String| SpaceError::InvalidCondition {
                child: c.child.clone(),
                message,
            };
            if child == par {
                return Err(invalid("a parameter cannot condition itself".into()));
            }
            if parent[child].is_some() {
                return Err(invalid(
                    "at most one condition per child; express conjunctions as chains".into(),
                ));
            }
            if c.predicate.values().is_empty() {
                return Err(invalid("predicate value set is empty".into()));
            }
            for v in c.predicate.values() {
                if !params[par].domain.contains(v) {
                    return Err(invalid(format!(
                        "value '{v}' is outside the domain of parent '{}'",
                        c.parent
                    )));
                }
            }
            parent[child] = Some((par, ci));
        }

        // Each node has at most one parent, so following parent links from
        // every node either terminates at a root or revisits a node.
        let mut depth: Vec<Option<usize>> = vec![None; params.len()];
        for start in 0..params.len() {
            let mut chain = Vec::new();
            let mut cur = start;
            loop {
                if depth[cur].is_some() {
                    break;
                }
                if chain.contains(&cur) {
                    return Err(SpaceError::Cycle(params[cur].name.clone()));
                }
                chain.push(cur);
                match parent[cur] {
                    Some((p, _)) => cur = p,
                    None => {
                        depth[cur] = Some(0);
                        chain.pop();
                        break;
                    }
                }
            }
            while let Some(n) = chain.pop() {
                let (p, _) = parent[n].expect("non-root in chain");
                depth[n] = Some(depth[p].expect("parent resolved") + 1);
            }
        }
        let mut topo: Vec<usize> = (0..params.len()).collect();
        topo.sort_by_key(|&i| (depth[i].unwrap_or(0), i));

        let mut conditions = conditions;
        for c in conditions.iter_mut() {
            let par = index[&c.parent];
            let coerce = |v: &Value| params[par].domain.coerce(v).unwrap_or_else(|| v.clone());
            c.predicate = match &c.predicate {
                Predicate::Equals(v) => Predicate::Equals(coerce(v)),
                Predicate::In(vs) => Predicate::In(vs.iter().map(coerce).collect()),
            };
        }

        Ok(Self {
            params,
            conditions,
            index,
            parent,
            topo,
        })
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.params
    }

    pub fn conditions(&self) -> &[Condition] {
        &self.conditions
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn parameter(&self, name: &str) -> Option<&Parameter> {
        self.index.get(name).map(|&i| &self.params[i])
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Whether parameter `i` has no condition.
    pub fn is_top_level(&self, i: usize) -> bool {
        self.parent[i].is_none()
    }

    /// Length of the longest parent chain (0 for an unconditioned space).
    pub fn condition_depth(&self) -> usize {
        (0..self.params.len())
            .map(|mut i| {
                let mut d = 0;
                while let Some((p, _)) = self.parent[i] {
                    d += 1;
                    i = p;
                }
                d
            })
            .max()
            .unwrap_or(0)
    }

    /// Indices in an order where parents precede children.
    pub(crate) fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    /// Activity flags given (possibly partial, possibly superfluous) values.
    pub(crate) fn activity(&self, values: &BTreeMap<String, Value>) -> Vec<bool> {
        let mut active = vec![false; self.params.len()];
        for &i in &self.topo {
            active[i] = match self.parent[i] {
                None => true,
                Some((p, ci)) => {
                    active[p]
                        && values
                            .get(&self.params[p].name)
                            .is_some_and(|v| self.conditions[ci].predicate.holds(v))
                }
            };
        }
        active
    }

    /// Names of the parameters active under `values`.
    pub fn active_parameters(&self, values: &BTreeMap<String, Value>) -> BTreeSet<String> {
        self.activity(values)
            .into_iter()
            .zip(&self.params)
            .filter(|(a, _)| *a)
            .map(|(_, p)| p.name.clone())
            .collect()
    }

    /// The configuration with every active parameter at its default.
    pub fn default_configuration(&self) -> Configuration {
        self.complete(BTreeMap::new())
    }

    /// Drops inactive values and fills newly active parameters with defaults.
    pub fn complete(&self, mut values: BTreeMap<String, Value>) -> Configuration {
        for &i in &self.topo {
            let active = match self.parent[i] {
                None => true,
                Some((p, ci)) => values
                    .get(&self.params[p].name)
                    .is_some_and(|v| self.conditions[ci].predicate.holds(v)),
            };
            let p = &self.params[i];
            if active {
                values.entry(p.name.clone()).or_insert_with(|| p.default.clone());
            } else {
                values.remove(&p.name);
            }
        }
        Configuration { values }
    }

    pub fn validate(&self, config: &Configuration) -> Result<(), SpaceError> {
        for (name, v) in &config.values {
            let p = self.parameter(name).ok_or_else(|| {
                SpaceError::InvalidConfiguration(format!("unknown parameter '{name}'"))
            })?;
            if !p.domain.contains(v) {
                return Err(SpaceError::InvalidConfiguration(format!(
                    "value '{v}' outside the domain of '{name}'"
                )));
            }
        }
        let active = self.activity(&config.values);
        for (p, a) in self.params.iter().zip(active) {
            match (a, config.values.contains_key(&p.name)) {
                (true, false) => {
                    return Err(SpaceError::InvalidConfiguration(format!(
                        "active parameter '{}' has no value",
                        p.name
                    )))
                }
                (false, true) => {
                    return Err(SpaceError::InvalidConfiguration(format!(
                        "inactive parameter '{}' has a value",
                        p.name
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Builds a configuration from JSON values, coercing each to its
    /// parameter's value type, and validates it.
    pub fn configuration_from_json(
        &self,
        obj: &serde_json::Map<String, serde_json::Value>,
    ) -> Result<Configuration, SpaceError> {
        let mut values = BTreeMap::new();
        for (k, v) in obj {
            let p = self.parameter(k).ok_or_else(|| {
                SpaceError::InvalidConfiguration(format!("unknown parameter '{k}'"))
            })?;
            let raw = Value::from_json(v).ok_or_else(|| {
                SpaceError::InvalidConfiguration(format!("'{k}' is not a scalar"))
            })?;
            let value = p.domain.coerce(&raw).ok_or_else(|| {
                SpaceError::InvalidConfiguration(format!("value '{raw}' does not fit '{k}'"))
            })?;
            values.insert(k.clone(), value);
        }
        let config = Configuration { values };
        self.validate(&config)?;
        Ok(config)
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(&self.to_json()).expect("space serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// Number of distinct configurations when every parameter is discrete.
    pub fn finite_size(&self) -> Option<u128> {
        self.count_from(&BTreeMap::new())
    }

    fn count_from(&self, fixed: &BTreeMap<String, Value>) -> Option<u128> {
        // Enumerate in topological order; activity depends on parents only.
        let active = self.activity(fixed);
        let next = self
            .topo
            .iter()
            .copied()
            .find(|&i| active[i] && !fixed.contains_key(&self.params[i].name));
        let Some(i) = next else {
            return Some(1);
        };
        let p = &self.params[i];
        let values: Vec<Value> = match &p.domain {
            Domain::Float { .. } => return None,
            Domain::Integer { lo, hi, .. } => {
                if hi - lo > 10_000 {
                    return None;
                }
                (*lo..=*hi).map(Value::Int).collect()
            }
            Domain::Categorical { choices } | Domain::Ordinal { levels: choices } => choices.clone(),
        };
        let mut total: u128 = 0;
        for v in values {
            let mut f = fixed.clone();
            f.insert(p.name.clone(), v);
            total = total.checked_add(self.count_from(&f)?)?;
        }
        Some(total)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// algo ∈ {svm, rf}; svm → C, kernel; kernel=rbf → gamma; rf → n_trees, max_depth.
    pub(crate) fn cash_space() -> ConfigurationSpace {
        ConfigurationSpace::new(
            vec![
                Parameter::categorical("algo", vec!["svm", "rf"]),
                Parameter::log_float("C", 0.01, 100.0).with_default(1.0),
                Parameter::categorical("kernel", vec!["rbf", "linear"]),
                Parameter::log_float("gamma", 1e-4, 1.0).with_default(0.01),
                Parameter::integer("n_trees", 10, 500).with_default(100),
                Parameter::integer("max_depth", 1, 20).with_default(5),
            ],
            vec![
                Condition::equals("C", "algo", "svm"),
                Condition::equals("kernel", "algo", "svm"),
                Condition::equals("gamma", "kernel", "rbf"),
                Condition::equals("n_trees", "algo", "rf"),
                Condition::equals("max_depth", "algo", "rf"),
            ],
        )
        .unwrap()
    }

    fn vals(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn no_conditions_all_active() {
        let space = ConfigurationSpace::new(
            vec![Parameter::float("a", 0.0, 1.0), Parameter::integer("b", 0, 3)],
            vec![],
        )
        .unwrap();
        let active = space.active_parameters(&BTreeMap::new());
        assert_eq!(active.len(), 2);
    }

    #[test]
    fn two_level_chain() {
        let space = cash_space();
        let active = space.active_parameters(&vals(&[
            ("algo", "svm".into()),
            ("kernel", "linear".into()),
        ]));
        let expected: BTreeSet<String> = ["algo", "C", "kernel"].iter().map(|s| s.to_string()).collect();
        assert_eq!(active, expected);

        let active = space.active_parameters(&vals(&[("algo", "svm".into()), ("kernel", "rbf".into())]));
        assert!(active.contains("gamma"));
    }

    #[test]
    fn predicate_false_leaves_only_root() {
        let space = ConfigurationSpace::new(
            vec![
                Parameter::categorical("algo", vec!["svm", "rf"]),
                Parameter::float("C", 0.0, 1.0),
            ],
            vec![Condition::equals("C", "algo", "svm")],
        )
        .unwrap();
        let active = space.active_parameters(&vals(&[("algo", "rf".into())]));
        assert_eq!(active.into_iter().collect::<Vec<_>>(), vec!["algo".to_string()]);
    }

    #[test]
    fn inactive_parent_deactivates_descendants() {
        let space = cash_space();
        // kernel=rbf is present but kernel itself is inactive under algo=rf
        let active = space.active_parameters(&vals(&[("algo", "rf".into()), ("kernel", "rbf".into())]));
        assert!(!active.contains("gamma"));
        assert!(!active.contains("kernel"));
    }

    #[test]
    fn default_configuration_is_valid() {
        let space = cash_space();
        let d = space.default_configuration();
        space.validate(&d).unwrap();
        assert_eq!(d.get("algo"), Some(&Value::from("svm")));
        assert_eq!(d.get("C"), Some(&Value::Float(1.0)));
        assert!(d.get("n_trees").is_none());
    }

    #[test]
    fn rejects_bad_spaces() {
        let r = ConfigurationSpace::new(vec![Parameter::float("x", 1.0, 1.0)], vec![]);
        assert!(matches!(r, Err(SpaceError::InvalidDomain { .. })));
        let r = ConfigurationSpace::new(vec![Parameter::log_float("x", 0.0, 1.0)], vec![]);
        assert!(matches!(r, Err(SpaceError::InvalidDomain { .. })));
        let r = ConfigurationSpace::new(
            vec![Parameter::float("x", 0.0, 1.0), Parameter::float("x", 0.0, 2.0)],
            vec![],
        );
        assert!(matches!(r, Err(SpaceError::DuplicateName(_))));
        let r = ConfigurationSpace::new(vec![Parameter::float("a=b", 0.0, 1.0)], vec![]);
        assert!(matches!(r, Err(SpaceError::InvalidName(_))));
        let r = ConfigurationSpace::new(vec![Parameter::float("a b", 0.0, 1.0)], vec![]);
        assert!(matches!(r, Err(SpaceError::InvalidName(_))));
        let r = ConfigurationSpace::new(vec![Parameter::categorical("c", vec!["a", "a"])], vec![]);
        assert!(matches!(r, Err(SpaceError::InvalidDomain { .. })));
        let r = ConfigurationSpace::new(vec![Parameter::float("x", 0.0, 1.0).with_default(2.0)], vec![]);
        assert!(matches!(r, Err(SpaceError::InvalidDomain { .. })));
    }

    #[test]
    fn rejects_bad_conditions() {
        let params = || {
            vec![
                Parameter::categorical("a", vec!["x", "y"]),
                Parameter::categorical("b", vec!["x", "y"]),
            ]
        };
        let r = ConfigurationSpace::new(params(), vec![Condition::equals("b", "zz", "x")]);
        assert!(matches!(r, Err(SpaceError::UndeclaredParameter { .. })));
        let r = ConfigurationSpace::new(params(), vec![Condition::equals("b", "a", "q")]);
        assert!(matches!(r, Err(SpaceError::InvalidCondition { .. })));
        let r = ConfigurationSpace::new(params(), vec![Condition::equals("a", "a", "x")]);
        assert!(matches!(r, Err(SpaceError::InvalidCondition { .. })));
        let r = ConfigurationSpace::new(
            params(),
            vec![Condition::equals("b", "a", "x"), Condition::equals("a", "b", "x")],
        );
        assert!(matches!(r, Err(SpaceError::Cycle(_))));
    }

    #[test]
    fn validate_detects_activity_mismatch() {
        let space = cash_space();
        let mut v = space.default_configuration().into_values();
        v.insert("n_trees".into(), Value::Int(50));
        assert!(space.validate(&Configuration::from_values(v)).is_err());
        let mut v = space.default_configuration().into_values();
        v.remove("C");
        assert!(space.validate(&Configuration::from_values(v)).is_err());
    }

    #[test]
    fn finite_size_counts_conditional_subspaces() {
        let space = ConfigurationSpace::new(
            vec![
                Parameter::categorical("a", vec!["x", "y"]),
                Parameter::categorical("b", vec!["p", "q", "r"]),
            ],
            vec![Condition::equals("b", "a", "x")],
        )
        .unwrap();
        // a=x → 3 choices of b, a=y → 1
        assert_eq!(space.finite_size(), Some(4));
        assert_eq!(cash_space().finite_size(), None);
    }

    #[test]
    fn condition_depth() {
        assert_eq!(cash_space().condition_depth(), 2);
    }
}
