//! Fixed-length numeric encodings of configurations for surrogate models.

use std::collections::BTreeMap;

use super::{Configuration, ConfigurationSpace, Domain, Parameter, SpaceError, Value};

/// Coordinate value for every coordinate owned by an inactive parameter.
pub const INACTIVE: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    /// Categoricals expand to one 0/1 coordinate per choice (GP input).
    OneHot,
    /// Categoricals map to `index / (k - 1)` in a single coordinate (RF input).
    Index,
}

impl Domain {
    fn width(&self, scheme: Encoding) -> usize {
        match (self, scheme) {
            (Domain::Categorical { choices }, Encoding::OneHot) => choices.len(),
            _ => 1,
        }
    }
}

fn transform(log: bool, x: f64) -> f64 {
    if log {
        x.ln()
    } else {
        x
    }
}

fn untransform(log: bool, x: f64) -> f64 {
    if log {
        x.exp()
    } else {
        x
    }
}

fn rank_to_unit(i: usize, k: usize) -> f64 {
    if k <= 1 {
        0.0
    } else {
        i as f64 / (k - 1) as f64
    }
}

impl Parameter {
    /// Maps a numeric value affinely (after the log transform) onto `[0, 1]`.
    pub fn to_unit(&self, v: &Value) -> Option<f64> {
        match &self.domain {
            Domain::Float { lo, hi, log } => {
                let x = v.as_f64()?;
                let (a, b) = (transform(*log, *lo), transform(*log, *hi));
                Some(((transform(*log, x) - a) / (b - a)).clamp(0.0, 1.0))
            }
            Domain::Integer { lo, hi, log } => {
                let x = v.as_i64()? as f64;
                let (a, b) = (transform(*log, *lo as f64), transform(*log, *hi as f64));
                Some(((transform(*log, x) - a) / (b - a)).clamp(0.0, 1.0))
            }
            Domain::Categorical { choices } | Domain::Ordinal { levels: choices } => {
                let i = choices.iter().position(|c| c == v)?;
                Some(rank_to_unit(i, choices.len()))
            }
        }
    }

    /// Inverse of [`Parameter::to_unit`]. Integers round to nearest with
    /// ties going up; categoricals and ordinals round to the nearest rank.
    pub fn from_unit(&self, u: f64) -> Value {
        let u = if u.is_finite() { u.clamp(0.0, 1.0) } else { 0.0 };
        match &self.domain {
            Domain::Float { lo, hi, log } => {
                let (a, b) = (transform(*log, *lo), transform(*log, *hi));
                let x = untransform(*log, a + u * (b - a));
                Value::Float(if u == 0.0 {
                    *lo
                } else if u == 1.0 {
                    *hi
                } else {
                    x.clamp(*lo, *hi)
                })
            }
            Domain::Integer { lo, hi, log } => {
                let (a, b) = (transform(*log, *lo as f64), transform(*log, *hi as f64));
                let x = untransform(*log, a + u * (b - a));
                Value::Int(((x + 0.5).floor() as i64).clamp(*lo, *hi))
            }
            Domain::Categorical { choices } | Domain::Ordinal { levels: choices } => {
                let k = choices.len();
                let i = if k <= 1 {
                    0
                } else {
                    ((u * (k - 1) as f64 + 0.5).floor() as usize).min(k - 1)
                };
                choices[i].clone()
            }
        }
    }

    /// Value at quantile `u` of a stratified design. Numeric parameters use
    /// [`Parameter::from_unit`]; discrete choices split `[0, 1)` into `k`
    /// equal cells so every choice gets the same mass.
    pub fn from_quantile(&self, u: f64) -> Value {
        match &self.domain {
            Domain::Categorical { choices } | Domain::Ordinal { levels: choices } => {
                let k = choices.len();
                let i = ((u.clamp(0.0, 1.0) * k as f64).floor() as usize).min(k - 1);
                choices[i].clone()
            }
            _ => self.from_unit(u),
        }
    }
}

impl ConfigurationSpace {
    /// Length of an encoded point; depends only on the space and scheme.
    pub fn encoded_len(&self, scheme: Encoding) -> usize {
        self.params.iter().map(|p| p.domain.width(scheme)).sum()
    }

    pub fn encode(&self, config: &Configuration, scheme: Encoding) -> Result<Vec<f64>, SpaceError> {
        self.validate(config)?;
        Ok(self.encode_unchecked(config, scheme))
    }

    /// Encodes without validating; inactive or missing parameters get the
    /// sentinel in every owned coordinate.
    pub fn encode_unchecked(&self, config: &Configuration, scheme: Encoding) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.encoded_len(scheme));
        for p in &self.params {
            let value = config.values.get(&p.name);
            match (&p.domain, scheme) {
                (Domain::Categorical { choices }, Encoding::OneHot) => match value {
                    Some(v) => out.extend(choices.iter().map(|c| if c == v { 1.0 } else { 0.0 })),
                    None => out.extend(std::iter::repeat_n(INACTIVE, choices.len())),
                },
                _ => out.push(value.and_then(|v| p.to_unit(v)).unwrap_or(INACTIVE)),
            }
        }
        out
    }

    /// Decodes an encoded point. Activity is recomputed from the decoded
    /// parent values; an active parameter whose coordinates carry the
    /// sentinel takes its default.
    pub fn decode(&self, coords: &[f64], scheme: Encoding) -> Result<Configuration, SpaceError> {
        if coords.len() != self.encoded_len(scheme) {
            return Err(SpaceError::InvalidConfiguration(format!(
                "encoded point has length {}, expected {}",
                coords.len(),
                self.encoded_len(scheme)
            )));
        }
        let mut offsets = Vec::with_capacity(self.params.len());
        let mut off = 0;
        for p in &self.params {
            offsets.push(off);
            off += p.domain.width(scheme);
        }
        let mut raw = BTreeMap::new();
        for (i, p) in self.params.iter().enumerate() {
            let block = &coords[offsets[i]..offsets[i] + p.domain.width(scheme)];
            if block.iter().all(|&c| c < 0.0) {
                continue;
            }
            let v = match (&p.domain, scheme) {
                (Domain::Categorical { choices }, Encoding::OneHot) => {
                    let best = block
                        .iter()
                        .enumerate()
                        .fold((0, f64::NEG_INFINITY), |acc, (j, &c)| if c > acc.1 { (j, c) } else { acc });
                    choices[best.0].clone()
                }
                _ => p.from_unit(block[0]),
            };
            raw.insert(p.name.clone(), v);
        }
        Ok(self.complete(raw))
    }
}
