//! Hierarchical conditional hyperparameter spaces.
//!
//! A space is a DAG of parameters. A parameter is active iff every one of its
//! conditions holds, where a condition names a categorical parent and a set of
//! parent levels that activate the child. A [`Config`] assigns values to
//! exactly the active parameters.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};
use thiserror::Error;

/// Alternative-level neighbors are always generated; this many Gaussian
/// neighbors are drawn for every active numeric parameter.
pub const NUMERIC_NEIGHBORS: usize = 4;
/// Gaussian neighbor scale as a fraction of the (prior-transformed) range.
pub const NEIGHBOR_SCALE: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("duplicate parameter name `{0}`")]
    DuplicateName(String),
    #[error("unknown parent `{0}`")]
    UnknownParent(String),
    #[error("parent of `{0}` is not categorical")]
    NonCategoricalParent(String),
    #[error("cycle detected: {}", .0.join(" -> "))]
    CycleDetected(Vec<String>),
    #[error("default of `{0}` lies outside its domain")]
    DefaultOutOfDomain(String),
    #[error("empty or inverted domain for `{0}`")]
    EmptyDomain(String),
    #[error("log-uniform prior on `{0}` needs a positive lower bound")]
    InvalidPrior(String),
    #[error("invalid condition on `{param}`: {reason}")]
    InvalidCondition { param: String, reason: String },
    #[error("invalid root `{0}`: must exist, be categorical and unconditional")]
    InvalidRoot(String),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("invalid value for `{0}`")]
    InvalidValue(String),
    #[error("config assigns inactive parameter `{0}`")]
    InactiveAssigned(String),
    #[error("config misses active parameter `{0}`")]
    ActiveMissing(String),
    #[error("malformed space document: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Categorical(Vec<String>),
    Integer { lo: i64, hi: i64 },
    Real { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Prior {
    #[default]
    Uniform,
    LogUniform,
}

/// A single parameter value. Categorical values are level indices.
#[derive(Debug, Clone, Copy)]
pub enum Value {
    Level(usize),
    Int(i64),
    Real(f64),
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Level(a), Value::Level(b)) => a == b,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Real(a), Value::Real(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Value::Level(l) => (0u8, *l as u64).hash(state),
            Value::Int(i) => (1u8, *i as u64).hash(state),
            Value::Real(r) => (2u8, r.to_bits()).hash(state),
        }
    }
}

impl Value {
    pub fn as_level(&self) -> Option<usize> {
        match self {
            Value::Level(l) => Some(*l),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            Value::Level(l) => *l as f64,
            Value::Int(i) => *i as f64,
            Value::Real(r) => *r,
        }
    }
}

/// A resolved activation condition: the parent's level must lie in `levels`.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub parent: usize,
    pub levels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub domain: Domain,
    pub prior: Prior,
    pub default: Value,
    pub conditions: Vec<Condition>,
}

impl ParamSpec {
    pub fn is_categorical(&self) -> bool {
        matches!(self.domain, Domain::Categorical(_))
    }

    pub fn is_conditional(&self) -> bool {
        !self.conditions.is_empty()
    }

    pub fn levels(&self) -> Option<&[String]> {
        match &self.domain {
            Domain::Categorical(l) => Some(l),
            _ => None,
        }
    }

    pub fn contains(&self, v: &Value) -> bool {
        match (&self.domain, v) {
            (Domain::Categorical(l), Value::Level(i)) => *i < l.len(),
            (Domain::Integer { lo, hi }, Value::Int(i)) => lo <= i && i <= hi,
            (Domain::Real { lo, hi }, Value::Real(r)) => r.is_finite() && lo <= r && r <= hi,
            _ => false,
        }
    }

    /// Numeric encoding used by surrogate models: level index for
    /// categoricals, raw value for numerics, `ln` of the value under a
    /// log-uniform prior.
    pub fn encode(&self, v: &Value) -> f64 {
        let x = v.as_f64();
        match (&self.domain, self.prior) {
            (Domain::Categorical(_), _) => x,
            (_, Prior::LogUniform) => x.ln(),
            (_, Prior::Uniform) => x,
        }
    }

    /// Bounds of the numeric domain in prior-transformed coordinates.
    pub fn transformed_bounds(&self) -> Option<(f64, f64)> {
        let (lo, hi) = match self.domain {
            Domain::Categorical(_) => return None,
            Domain::Integer { lo, hi } => (lo as f64, hi as f64),
            Domain::Real { lo, hi } => (lo, hi),
        };
        Some(match self.prior {
            Prior::Uniform => (lo, hi),
            Prior::LogUniform => (lo.ln(), hi.ln()),
        })
    }

    /// Maps a prior-transformed coordinate back into the domain, clipping and
    /// rounding integers.
    pub fn from_transformed(&self, t: f64) -> Value {
        let x = match self.prior {
            Prior::Uniform => t,
            Prior::LogUniform => t.exp(),
        };
        match self.domain {
            Domain::Integer { lo, hi } => Value::Int((x.round() as i64).clamp(lo, hi)),
            Domain::Real { lo, hi } => Value::Real(x.clamp(lo, hi)),
            Domain::Categorical(_) => unreachable!("categorical has no transform"),
        }
    }

    pub fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Value {
        match (&self.domain, self.prior) {
            (Domain::Categorical(l), _) => Value::Level(rng.random_range(0..l.len())),
            (Domain::Integer { lo, hi }, Prior::Uniform) => Value::Int(rng.random_range(*lo..=*hi)),
            (Domain::Integer { lo, hi }, Prior::LogUniform) => {
                let t = rng.random_range((*lo as f64).ln()..((*hi + 1) as f64).ln());
                Value::Int((t.exp().floor() as i64).clamp(*lo, *hi))
            }
            (Domain::Real { lo, hi }, Prior::Uniform) => Value::Real(rng.random_range(*lo..=*hi)),
            (Domain::Real { lo, hi }, Prior::LogUniform) => {
                let t = rng.random_range(lo.ln()..=hi.ln());
                Value::Real(t.exp().clamp(*lo, *hi))
            }
        }
    }
}

/// Serialized form of one parameter in a space document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDef {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: ParamKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
    #[serde(default)]
    pub prior: Prior,
    pub default: Json,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conditions: Vec<ConditionDef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Categorical,
    Integer,
    Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionDef {
    pub parent: String,
    pub values: Vec<String>,
}

impl ParamDef {
    pub fn categorical(name: &str, levels: &[&str], default: &str) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::Categorical,
            levels: Some(levels.iter().map(|s| s.to_string()).collect()),
            range: None,
            prior: Prior::Uniform,
            default: Json::String(default.into()),
            conditions: Vec::new(),
        }
    }

    pub fn integer(name: &str, lo: i64, hi: i64, default: i64) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::Integer,
            levels: None,
            range: Some([lo as f64, hi as f64]),
            prior: Prior::Uniform,
            default: Json::from(default),
            conditions: Vec::new(),
        }
    }

    pub fn real(name: &str, lo: f64, hi: f64, default: f64) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::Real,
            levels: None,
            range: Some([lo, hi]),
            prior: Prior::Uniform,
            default: Json::from(default),
            conditions: Vec::new(),
        }
    }

    pub fn log(mut self) -> Self {
        self.prior = Prior::LogUniform;
        self
    }

    pub fn when(mut self, parent: &str, values: &[&str]) -> Self {
        self.conditions.push(ConditionDef {
            parent: parent.into(),
            values: values.iter().map(|s| s.to_string()).collect(),
        });
        self
    }
}

/// A whole space document: parameter list plus the root selector name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceDef {
    pub root: String,
    pub params: Vec<ParamDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub census: Option<SpaceCensus>,
}

/// Parameter counts a space document reports about itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceCensus {
    pub parameters: usize,
    pub categorical: usize,
    pub numeric: usize,
    pub conditional: usize,
    pub max_depth: usize,
}

#[derive(Debug, Clone)]
pub struct ParamSpace {
    params: Vec<ParamSpec>,
    root: usize,
    index: HashMap<String, usize>,
    topo: Vec<usize>,
    flag_slot: Vec<Option<usize>>,
    n_conditional: usize,
}

fn parse_value(domain: &Domain, raw: &Json) -> Option<Value> {
    match domain {
        Domain::Categorical(levels) => {
            let s = match raw {
                Json::String(s) => s.clone(),
                Json::Bool(b) => b.to_string(),
                Json::Number(n) => n.to_string(),
                _ => return None,
            };
            levels.iter().position(|l| *l == s).map(Value::Level)
        }
        Domain::Integer { .. } => raw
            .as_i64()
            .or_else(|| raw.as_f64().filter(|f| f.fract() == 0.0).map(|f| f as i64))
            .map(Value::Int),
        Domain::Real { .. } => raw.as_f64().map(Value::Real),
    }
}

/// Validates a list of parameter definitions and resolves it into a space.
pub fn validate_space(defs: &[ParamDef], root: &str) -> Result<ParamSpace, SpaceError> {
    let mut index = HashMap::new();
    for (i, d) in defs.iter().enumerate() {
        if index.insert(d.name.clone(), i).is_some() {
            return Err(SpaceError::DuplicateName(d.name.clone()));
        }
    }

    let mut params = Vec::with_capacity(defs.len());
    for d in defs {
        let domain = match d.kind {
            ParamKind::Categorical => {
                let levels = d.levels.clone().unwrap_or_default();
                let unique: HashSet<&String> = levels.iter().collect();
                if levels.is_empty() || unique.len() != levels.len() {
                    return Err(SpaceError::EmptyDomain(d.name.clone()));
                }
                Domain::Categorical(levels)
            }
            ParamKind::Integer => {
                let [lo, hi] = d.range.ok_or_else(|| SpaceError::EmptyDomain(d.name.clone()))?;
                if lo.fract() != 0.0 || hi.fract() != 0.0 || lo > hi {
                    return Err(SpaceError::EmptyDomain(d.name.clone()));
                }
                Domain::Integer { lo: lo as i64, hi: hi as i64 }
            }
            ParamKind::Real => {
                let [lo, hi] = d.range.ok_or_else(|| SpaceError::EmptyDomain(d.name.clone()))?;
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(SpaceError::EmptyDomain(d.name.clone()));
                }
                Domain::Real { lo, hi }
            }
        };
        if d.prior == Prior::LogUniform {
            match domain {
                Domain::Categorical(_) => return Err(SpaceError::InvalidPrior(d.name.clone())),
                Domain::Integer { lo, .. } if lo <= 0 => {
                    return Err(SpaceError::InvalidPrior(d.name.clone()))
                }
                Domain::Real { lo, .. } if lo <= 0.0 => {
                    return Err(SpaceError::InvalidPrior(d.name.clone()))
                }
                _ => {}
            }
        }
        let default = parse_value(&domain, &d.default)
            .ok_or_else(|| SpaceError::DefaultOutOfDomain(d.name.clone()))?;
        params.push(ParamSpec {
            name: d.name.clone(),
            domain,
            prior: d.prior,
            default,
            conditions: Vec::new(),
        });
        if !params.last().unwrap().contains(&default) {
            return Err(SpaceError::DefaultOutOfDomain(d.name.clone()));
        }
    }

    for (i, d) in defs.iter().enumerate() {
        let mut conditions = Vec::with_capacity(d.conditions.len());
        for c in &d.conditions {
            let &p = index
                .get(&c.parent)
                .ok_or_else(|| SpaceError::UnknownParent(c.parent.clone()))?;
            let levels = params[p]
                .levels()
                .ok_or_else(|| SpaceError::NonCategoricalParent(d.name.clone()))?;
            let mut set = Vec::with_capacity(c.values.len());
            for v in &c.values {
                let l = levels.iter().position(|x| x == v).ok_or_else(|| {
                    SpaceError::InvalidCondition {
                        param: d.name.clone(),
                        reason: format!("`{v}` is not a level of `{}`", c.parent),
                    }
                })?;
                if !set.contains(&l) {
                    set.push(l);
                }
            }
            if set.is_empty() || set.len() >= levels.len() {
                return Err(SpaceError::InvalidCondition {
                    param: d.name.clone(),
                    reason: "activating set must be a strict nonempty subset".into(),
                });
            }
            set.sort_unstable();
            conditions.push(Condition { parent: p, levels: set });
        }
        params[i].conditions = conditions;
    }

    let topo = topological_order(&params)?;

    let &root_idx = index
        .get(root)
        .ok_or_else(|| SpaceError::InvalidRoot(root.to_string()))?;
    if !params[root_idx].is_categorical() || params[root_idx].is_conditional() {
        return Err(SpaceError::InvalidRoot(root.to_string()));
    }

    let mut flag_slot = vec![None; params.len()];
    let mut n_conditional = 0;
    for (i, p) in params.iter().enumerate() {
        if p.is_conditional() {
            flag_slot[i] = Some(params.len() + n_conditional);
            n_conditional += 1;
        }
    }

    Ok(ParamSpace {
        params,
        root: root_idx,
        index,
        topo,
        flag_slot,
        n_conditional,
    })
}

fn topological_order(params: &[ParamSpec]) -> Result<Vec<usize>, SpaceError> {
    // 0 = unvisited, 1 = on stack, 2 = done
    fn visit(
        i: usize,
        params: &[ParamSpec],
        state: &mut [u8],
        stack: &mut Vec<usize>,
        order: &mut Vec<usize>,
    ) -> Result<(), SpaceError> {
        match state[i] {
            2 => return Ok(()),
            1 => {
                let start = stack.iter().position(|&s| s == i).unwrap_or(0);
                let mut path: Vec<String> =
                    stack[start..].iter().map(|&s| params[s].name.clone()).collect();
                path.push(params[i].name.clone());
                return Err(SpaceError::CycleDetected(path));
            }
            _ => {}
        }
        state[i] = 1;
        stack.push(i);
        for c in &params[i].conditions {
            visit(c.parent, params, state, stack, order)?;
        }
        stack.pop();
        state[i] = 2;
        order.push(i);
        Ok(())
    }

    let mut state = vec![0u8; params.len()];
    let mut order = Vec::with_capacity(params.len());
    let mut stack = Vec::new();
    for i in 0..params.len() {
        visit(i, params, &mut state, &mut stack, &mut order)?;
    }
    Ok(order)
}

/// An assignment of values to parameters, indexed by parameter position.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Config {
    values: Vec<Option<Value>>,
}

impl Config {
    pub fn empty(n: usize) -> Self {
        Self { values: vec![None; n] }
    }

    pub fn values(&self) -> &[Option<Value>] {
        &self.values
    }

    pub fn get(&self, i: usize) -> Option<&Value> {
        self.values.get(i).and_then(Option::as_ref)
    }

    pub fn set(&mut self, i: usize, v: Option<Value>) {
        self.values[i] = v;
    }

    pub fn assigned(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }
}

/// Fixed-length numeric encoding of a config for surrogate models.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl ParamSpace {
    pub fn from_def(def: &SpaceDef) -> Result<Self, SpaceError> {
        validate_space(&def.params, &def.root)
    }

    pub fn from_json(text: &str) -> Result<Self, SpaceError> {
        let def: SpaceDef =
            serde_json::from_str(text).map_err(|e| SpaceError::Malformed(e.to_string()))?;
        Self::from_def(&def)
    }

    pub fn params(&self) -> &[ParamSpec] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.index_of(name).map(|i| &self.params[i])
    }

    /// Parameter indices ordered so that parents precede children.
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn n_conditional(&self) -> usize {
        self.n_conditional
    }

    pub fn feature_len(&self) -> usize {
        self.params.len() + self.n_conditional
    }

    /// Index of the activity flag slot for a conditional parameter.
    pub fn flag_slot(&self, param: usize) -> Option<usize> {
        self.flag_slot[param]
    }

    fn condition_holds(&self, c: &Condition, active: &[bool], values: &[Option<Value>]) -> bool {
        active[c.parent]
            && matches!(values[c.parent], Some(Value::Level(l)) if c.levels.binary_search(&l).is_ok())
    }

    /// Activity mask of a (possibly partial or over-specified) assignment.
    pub fn active_mask(&self, config: &Config) -> Vec<bool> {
        let mut active = vec![false; self.params.len()];
        for &i in &self.topo {
            active[i] = self.params[i]
                .conditions
                .iter()
                .all(|c| self.condition_holds(c, &active, &config.values));
        }
        active
    }

    pub fn active_params(&self, config: &Config) -> HashSet<String> {
        self.active_mask(config)
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .map(|(i, _)| self.params[i].name.clone())
            .collect()
    }

    /// Checks the config invariants: exactly the active parameters are
    /// assigned and every value lies in its domain.
    pub fn check(&self, config: &Config) -> Result<(), SpaceError> {
        if config.values.len() != self.params.len() {
            return Err(SpaceError::Malformed("config length mismatch".into()));
        }
        let active = self.active_mask(config);
        for (i, p) in self.params.iter().enumerate() {
            match (&config.values[i], active[i]) {
                (Some(v), true) if !p.contains(v) => {
                    return Err(SpaceError::InvalidValue(p.name.clone()))
                }
                (Some(_), false) => return Err(SpaceError::InactiveAssigned(p.name.clone())),
                (None, true) => return Err(SpaceError::ActiveMissing(p.name.clone())),
                _ => {}
            }
        }
        Ok(())
    }

    /// Fills newly active parameters from their priors and drops inactive ones.
    pub fn repair<R: Rng + ?Sized>(&self, config: &mut Config, rng: &mut R) {
        let mut active = vec![false; self.params.len()];
        for &i in &self.topo {
            let p = &self.params[i];
            active[i] = p
                .conditions
                .iter()
                .all(|c| self.condition_holds(c, &active, &config.values));
            if !active[i] {
                config.values[i] = None;
            } else if config.values[i].is_none() {
                config.values[i] = Some(p.sample_prior(rng));
            }
        }
    }

    /// Samples unconditional parameters from their priors, then descendants
    /// top-down as they become active.
    pub fn sample_random<R: Rng + ?Sized>(&self, rng: &mut R) -> Config {
        let mut config = Config::empty(self.params.len());
        self.repair(&mut config, rng);
        config
    }

    /// Builds a config top-down, asking `value` for each parameter once its
    /// conditions hold under the values chosen so far.
    pub fn build_config(&self, mut value: impl FnMut(usize, &ParamSpec) -> Value) -> Config {
        let mut config = Config::empty(self.params.len());
        let mut active = vec![false; self.params.len()];
        for &i in &self.topo {
            let p = &self.params[i];
            active[i] = p
                .conditions
                .iter()
                .all(|c| self.condition_holds(c, &active, &config.values));
            if active[i] {
                config.values[i] = Some(value(i, p));
            }
        }
        config
    }

    /// The all-defaults configuration (defaults of inactive parameters dropped).
    pub fn default_config(&self) -> Config {
        let mut config = Config::empty(self.params.len());
        let mut active = vec![false; self.params.len()];
        for &i in &self.topo {
            active[i] = self.params[i]
                .conditions
                .iter()
                .all(|c| self.condition_holds(c, &active, &config.values));
            if active[i] {
                config.values[i] = Some(self.params[i].default);
            }
        }
        config
    }

    /// Encodes a config with inactive parameters set to their encoded default
    /// and one activity flag per conditional parameter appended.
    pub fn impute_defaults(&self, config: &Config) -> FeatureVector {
        let mut out = vec![0.0; self.feature_len()];
        for (i, p) in self.params.iter().enumerate() {
            let v = config.values[i].as_ref();
            out[i] = p.encode(v.unwrap_or(&p.default));
            if let Some(slot) = self.flag_slot[i] {
                out[slot] = if v.is_some() { 1.0 } else { 0.0 };
            }
        }
        FeatureVector(out)
    }

    /// Local neighborhood of a config: one neighbor per alternative level of
    /// each active categorical parameter and [`NUMERIC_NEIGHBORS`] Gaussian
    /// perturbations of each active numeric parameter. Every neighbor is
    /// repaired so that it is a valid config.
    pub fn neighbors<R: Rng + ?Sized>(&self, config: &Config, rng: &mut R) -> Vec<Config> {
        let mut out = Vec::new();
        for &i in &self.topo {
            let Some(current) = config.values[i] else { continue };
            let p = &self.params[i];
            match &p.domain {
                Domain::Categorical(levels) => {
                    let cur = current.as_level().unwrap_or(0);
                    for l in (0..levels.len()).filter(|&l| l != cur) {
                        let mut n = config.clone();
                        n.values[i] = Some(Value::Level(l));
                        self.repair(&mut n, rng);
                        out.push(n);
                    }
                }
                _ => {
                    let (lo, hi) = p.transformed_bounds().unwrap();
                    let scale = NEIGHBOR_SCALE * (hi - lo);
                    if scale <= 0.0 {
                        continue;
                    }
                    let normal = Normal::new(p.encode(&current), scale).unwrap();
                    let mut made = 0;
                    let mut tries = 0;
                    while made < NUMERIC_NEIGHBORS && tries < 4 * NUMERIC_NEIGHBORS {
                        tries += 1;
                        let v = p.from_transformed(normal.sample(rng).clamp(lo, hi));
                        if v == current {
                            continue;
                        }
                        let mut n = config.clone();
                        n.values[i] = Some(v);
                        out.push(n);
                        made += 1;
                    }
                }
            }
        }
        out
    }

    /// Human-readable form: categorical levels by name, numbers as numbers.
    pub fn config_to_json(&self, config: &Config) -> Map<String, Json> {
        let mut map = Map::new();
        for (i, p) in self.params.iter().enumerate() {
            if let Some(v) = &config.values[i] {
                let j = match (v, &p.domain) {
                    (Value::Level(l), Domain::Categorical(levels)) => Json::String(levels[*l].clone()),
                    (Value::Int(x), _) => Json::from(*x),
                    (Value::Real(x), _) => Json::from(*x),
                    (Value::Level(l), _) => Json::from(*l),
                };
                map.insert(p.name.clone(), j);
            }
        }
        map
    }

    /// Parses a name → value map; unknown names and out-of-domain values are
    /// rejected, activity is not checked (see [`ParamSpace::check`]).
    pub fn config_from_json(&self, map: &Map<String, Json>) -> Result<Config, SpaceError> {
        let mut config = Config::empty(self.params.len());
        for (name, raw) in map {
            let &i = self
                .index
                .get(name)
                .ok_or_else(|| SpaceError::UnknownParam(name.clone()))?;
            let p = &self.params[i];
            let v = match &p.domain {
                Domain::Categorical(levels) => {
                    let s = match raw {
                        Json::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    levels.iter().position(|l| *l == s).map(Value::Level)
                }
                Domain::Integer { .. } => raw.as_i64().map(Value::Int),
                Domain::Real { .. } => raw.as_f64().map(Value::Real),
            }
            .filter(|v| p.contains(v))
            .ok_or_else(|| SpaceError::InvalidValue(name.clone()))?;
            config.values[i] = Some(v);
        }
        Ok(config)
    }

    /// Builds a config from `(name, value)` pairs written as strings, e.g.
    /// `[("a", "x"), ("b", "1")]`. Numeric strings are parsed per domain.
    pub fn config_from_pairs(&self, pairs: &[(&str, &str)]) -> Result<Config, SpaceError> {
        let mut map = Map::new();
        for (name, raw) in pairs {
            let i = self
                .index_of(name)
                .ok_or_else(|| SpaceError::UnknownParam(name.to_string()))?;
            let j = match self.params[i].domain {
                Domain::Categorical(_) => Json::String(raw.to_string()),
                Domain::Integer { .. } => Json::from(
                    raw.parse::<i64>()
                        .map_err(|_| SpaceError::InvalidValue(name.to_string()))?,
                ),
                Domain::Real { .. } => Json::from(
                    raw.parse::<f64>()
                        .map_err(|_| SpaceError::InvalidValue(name.to_string()))?,
                ),
            };
            map.insert(name.to_string(), j);
        }
        self.config_from_json(&map)
    }

    /// Level name of an assigned categorical parameter.
    pub fn level_name(&self, config: &Config, name: &str) -> Option<&str> {
        let i = self.index_of(name)?;
        let l = config.get(i)?.as_level()?;
        self.params[i].levels().map(|ls| ls[l].as_str())
    }

    pub fn value(&self, config: &Config, name: &str) -> Option<Value> {
        config.get(self.index_of(name)?).copied()
    }

    pub fn to_def(&self) -> SpaceDef {
        let params = self
            .params
            .iter()
            .map(|p| {
                let (kind, levels, range) = match &p.domain {
                    Domain::Categorical(l) => (ParamKind::Categorical, Some(l.clone()), None),
                    Domain::Integer { lo, hi } => (ParamKind::Integer, None, Some([*lo as f64, *hi as f64])),
                    Domain::Real { lo, hi } => (ParamKind::Real, None, Some([*lo, *hi])),
                };
                let default = match (&p.default, &p.domain) {
                    (Value::Level(l), Domain::Categorical(ls)) => Json::String(ls[*l].clone()),
                    (Value::Int(i), _) => Json::from(*i),
                    (v, _) => Json::from(v.as_f64()),
                };
                ParamDef {
                    name: p.name.clone(),
                    kind,
                    levels,
                    range,
                    prior: p.prior,
                    default,
                    conditions: p
                        .conditions
                        .iter()
                        .map(|c| ConditionDef {
                            parent: self.params[c.parent].name.clone(),
                            values: c
                                .levels
                                .iter()
                                .map(|&l| self.params[c.parent].levels().unwrap()[l].clone())
                                .collect(),
                        })
                        .collect(),
                }
            })
            .collect();
        SpaceDef {
            root: self.params[self.root].name.clone(),
            params,
            census: Some(self.census()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_def()).expect("space serializes")
    }

    pub fn census(&self) -> SpaceCensus {
        let mut depth = vec![0usize; self.params.len()];
        for &i in &self.topo {
            depth[i] = 1 + self.params[i]
                .conditions
                .iter()
                .map(|c| depth[c.parent])
                .max()
                .unwrap_or(0);
        }
        let categorical = self.params.iter().filter(|p| p.is_categorical()).count();
        SpaceCensus {
            parameters: self.params.len(),
            categorical,
            numeric: self.params.len() - categorical,
            conditional: self.n_conditional,
            max_depth: depth.into_iter().max().unwrap_or(0),
        }
    }

    /// Compact `name=value` rendering of the assigned parameters.
    pub fn describe(&self, config: &Config) -> String {
        let parts: Vec<String> = self
            .config_to_json(config)
            .into_iter()
            .map(|(k, v)| match v {
                Json::String(s) => format!("{k}={s}"),
                other => format!("{k}={other}"),
            })
            .collect();
        parts.join(" ")
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Level(l) => write!(f, "#{l}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => write!(f, "{r}"),
        }
    }
}

/// Generates a random valid space of `n` parameters whose condition DAG has
/// at most `max_depth` layers. Parameters may have up to two categorical
/// parents. Used for property tests and benchmarks of the space machinery.
pub fn random_space<R: Rng + ?Sized>(rng: &mut R, n: usize, max_depth: usize) -> ParamSpace {
    assert!(n >= 1 && max_depth >= 1);
    let mut defs: Vec<ParamDef> = Vec::with_capacity(n);
    let mut depth: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        let name = format!("p{i}");
        let kind = if i == 0 { 0 } else { rng.random_range(0..4) };
        let mut def = match kind {
            0 | 1 => {
                let k = rng.random_range(2..=4);
                let levels: Vec<String> = (0..k).map(|l| format!("l{l}")).collect();
                let refs: Vec<&str> = levels.iter().map(String::as_str).collect();
                ParamDef::categorical(&name, &refs, "l0")
            }
            2 => ParamDef::integer(&name, 1, 20, 1),
            _ => {
                let d = ParamDef::real(&name, 0.01, 10.0, 1.0);
                if rng.random_bool(0.5) {
                    d.log()
                } else {
                    d
                }
            }
        };
        let mut my_depth = 1;
        if i > 0 && rng.random_bool(0.75) {
            let candidates: Vec<usize> = (0..i)
                .filter(|&j| defs[j].kind == ParamKind::Categorical && depth[j] < max_depth)
                .collect();
            let n_parents = if rng.random_bool(0.25) { 2 } else { 1 };
            let mut used = Vec::new();
            for _ in 0..n_parents {
                if candidates.is_empty() {
                    break;
                }
                let parent = candidates[rng.random_range(0..candidates.len())];
                if used.contains(&parent) {
                    continue;
                }
                used.push(parent);
                let levels = defs[parent].levels.clone().unwrap();
                let take = rng.random_range(1..levels.len());
                let mut chosen: Vec<&str> = levels.iter().map(String::as_str).collect();
                for j in (1..chosen.len()).rev() {
                    chosen.swap(j, rng.random_range(0..=j));
                }
                def = def.when(&defs[parent].name.clone(), &chosen[..take]);
                my_depth = my_depth.max(depth[parent] + 1);
            }
        }
        depth.push(my_depth);
        defs.push(def);
    }
    validate_space(&defs, "p0").expect("generated space is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// a: x/y (root); b in {0,1} when a = x; c integer when b = 1.
    fn chain() -> ParamSpace {
        validate_space(
            &[
                ParamDef::categorical("a", &["x", "y"], "x"),
                ParamDef::categorical("b", &["0", "1"], "1").when("a", &["x"]),
                ParamDef::integer("c", 0, 5, 0).when("b", &["1"]),
            ],
            "a",
        )
        .unwrap()
    }

    #[test]
    fn validates_simple_space() {
        let s = validate_space(
            &[
                ParamDef::categorical("a", &["x", "y"], "x"),
                ParamDef::real("b", 0.0, 1.0, 0.5).when("a", &["x"]),
            ],
            "a",
        )
        .unwrap();
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn detects_cycle() {
        let err = validate_space(
            &[
                ParamDef::categorical("a", &["x", "y"], "x"),
                ParamDef::categorical("b", &["0", "1"], "0").when("c", &["0"]),
                ParamDef::categorical("c", &["0", "1"], "0").when("b", &["0"]),
            ],
            "a",
        )
        .unwrap_err();
        assert!(matches!(err, SpaceError::CycleDetected(_)), "{err}");
    }

    #[test]
    fn rejects_bad_definitions() {
        let a = ParamDef::categorical("a", &["x", "y"], "x");
        assert!(matches!(
            validate_space(&[a.clone(), ParamDef::real("r", 0.0, 1.0, 0.5).log()], "a"),
            Err(SpaceError::InvalidPrior(_))
        ));
        assert!(matches!(
            validate_space(&[a.clone(), ParamDef::real("r", 0.0, 1.0, 2.0)], "a"),
            Err(SpaceError::DefaultOutOfDomain(_))
        ));
        assert!(matches!(
            validate_space(&[a.clone(), ParamDef::real("r", 0.0, 1.0, 0.5).when("q", &["x"])], "a"),
            Err(SpaceError::UnknownParent(_))
        ));
        assert!(matches!(
            validate_space(
                &[
                    a.clone(),
                    ParamDef::real("r", 0.0, 1.0, 0.5),
                    ParamDef::real("s", 0.0, 1.0, 0.5).when("r", &["x"])
                ],
                "a"
            ),
            Err(SpaceError::NonCategoricalParent(_))
        ));
        assert!(matches!(
            validate_space(&[a.clone(), ParamDef::real("r", 0.0, 1.0, 0.5).when("a", &["x", "y"])], "a"),
            Err(SpaceError::InvalidCondition { .. })
        ));
        assert!(matches!(
            validate_space(&[a.clone(), a.clone()], "a"),
            Err(SpaceError::DuplicateName(_))
        ));
        assert!(matches!(
            validate_space(&[ParamDef::real("r", 0.0, 1.0, 0.5)], "r"),
            Err(SpaceError::InvalidRoot(_))
        ));
    }

    #[test]
    fn activity_chain() {
        let s = chain();
        let mut partial = s.config_from_pairs(&[("a", "y")]).unwrap();
        let act = s.active_params(&partial);
        assert_eq!(act, ["a"].iter().map(|s| s.to_string()).collect());
        partial = s.config_from_pairs(&[("a", "x"), ("b", "1")]).unwrap();
        assert_eq!(s.active_params(&partial).len(), 3);
        // over-specified: c assigned but b cuts it
        partial = s.config_from_pairs(&[("a", "x"), ("b", "0"), ("c", "2")]).unwrap();
        assert_eq!(s.active_params(&partial).len(), 2);
    }

    #[test]
    fn sampling_respects_activity() {
        let s = chain();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let c = s.sample_random(&mut rng);
            s.check(&c).unwrap();
            if s.level_name(&c, "a") == Some("y") {
                assert!(s.value(&c, "b").is_none());
                assert!(s.value(&c, "c").is_none());
            }
        }
    }

    #[test]
    fn log_uniform_fraction() {
        let s = validate_space(
            &[
                ParamDef::categorical("a", &["x", "y"], "x"),
                ParamDef::real("r", 1e-4, 1e2, 1.0).log(),
            ],
            "a",
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10_000;
        let hits = (0..n)
            .filter(|_| {
                let v = s.value(&s.sample_random(&mut rng), "r").unwrap().as_f64();
                (1e-4..=1e-2).contains(&v)
            })
            .count();
        let frac = hits as f64 / n as f64;
        assert!((frac - 1.0 / 3.0).abs() < 0.02, "{frac}");
    }

    #[test]
    fn categorical_uniform() {
        let s = validate_space(&[ParamDef::categorical("a", &["w", "x", "y", "z"], "w")], "a").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            counts[s.sample_random(&mut rng).get(0).unwrap().as_level().unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / 10_000.0 - 0.25).abs() < 0.02);
        }
    }

    #[test]
    fn impute_defaults_chain() {
        let s = chain();
        let c = s.config_from_pairs(&[("a", "y")]).unwrap();
        assert_eq!(s.impute_defaults(&c).0, vec![1.0, 1.0, 0.0, 0.0, 0.0]);
        let c = s.config_from_pairs(&[("a", "x"), ("b", "1"), ("c", "2")]).unwrap();
        assert_eq!(s.impute_defaults(&c).0, vec![0.0, 1.0, 2.0, 1.0, 1.0]);
    }

    #[test]
    fn impute_log_transform() {
        let s = validate_space(
            &[
                ParamDef::categorical("a", &["x", "y"], "x"),
                ParamDef::real("r", 1.0, 1000.0, 10.0).log(),
            ],
            "a",
        )
        .unwrap();
        let c = s.config_from_pairs(&[("a", "x"), ("r", "100")]).unwrap();
        assert!((s.impute_defaults(&c).0[1] - 4.605_170_185_988_091).abs() < 1e-12);
    }

    #[test]
    fn neighbors_of_root() {
        let s = validate_space(&[ParamDef::categorical("a", &["x", "y", "z"], "x")], "a").unwrap();
        let c = s.config_from_pairs(&[("a", "x")]).unwrap();
        let ns = s.neighbors(&c, &mut ChaCha8Rng::seed_from_u64(0));
        let names: Vec<_> = ns.iter().map(|n| s.level_name(n, "a").unwrap()).collect();
        assert_eq!(names, vec!["y", "z"]);
    }

    #[test]
    fn neighbors_numeric_in_domain() {
        let s = validate_space(
            &[
                ParamDef::categorical("a", &["x", "y"], "x"),
                ParamDef::real("r", 0.0, 1.0, 0.5).when("a", &["x"]),
            ],
            "a",
        )
        .unwrap();
        let c = s.config_from_pairs(&[("a", "x"), ("r", "0.95")]).unwrap();
        let ns = s.neighbors(&c, &mut ChaCha8Rng::seed_from_u64(5));
        let numeric: Vec<_> = ns.iter().filter(|n| s.level_name(n, "a") == Some("x")).collect();
        assert!(numeric.len() >= 4);
        for n in &ns {
            s.check(n).unwrap();
        }
    }

    #[test]
    fn neighbor_repairs_activity() {
        let s = chain();
        let c = s.config_from_pairs(&[("a", "x"), ("b", "1"), ("c", "3")]).unwrap();
        let ns = s.neighbors(&c, &mut ChaCha8Rng::seed_from_u64(2));
        let flipped = ns.iter().find(|n| s.level_name(n, "a") == Some("y")).unwrap();
        assert!(s.value(flipped, "b").is_none() && s.value(flipped, "c").is_none());
        for n in &ns {
            s.check(n).unwrap();
        }
    }

    #[test]
    fn json_round_trip() {
        let s = chain();
        let again = ParamSpace::from_json(&s.to_json()).unwrap();
        assert_eq!(again.params(), s.params());
        let c = s.config_from_pairs(&[("a", "x"), ("b", "1"), ("c", "4")]).unwrap();
        assert_eq!(s.config_from_json(&s.config_to_json(&c)).unwrap(), c);
    }

    #[test]
    fn random_space_depth_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let s = random_space(&mut rng, 50, 4);
            assert!(s.census().max_depth <= 4);
        }
    }
}
