//! Initial designs: default, random, Latin hypercube and Sobol.

mod sobol;

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{Configuration, ConfigurationSpace};

pub use sobol::{sobol_points, MAX_DIM as SOBOL_MAX_DIM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("Sobol sequence supports 1..={max} dimensions, got {dim}")]
    SobolDimension { dim: usize, max: usize },
    #[error("design needs at least one point")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignKind {
    Default,
    Random,
    Lhs,
    Sobol,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DesignSpec {
    pub kind: DesignKind,
    pub n_points: usize,
    pub seed: u64,
}

/// `max(2d, 10)` points, capped at a quarter of the trial limit (at least 1).
pub fn default_design_size(space: &ConfigurationSpace, max_trials: usize) -> usize {
    (2 * space.len()).max(10).min(max_trials / 4).max(1)
}

/// Latin hypercube sample: each of `d` axes is split into `n` equal cells
/// holding exactly one point.
pub fn lhs_points<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; d]; n];
    for j in 0..d {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        for (i, p) in perm.into_iter().enumerate() {
            let u: f64 = rng.random();
            out[i][j] = ((p as f64 + u) / n as f64).min(1.0 - f64::EPSILON);
        }
    }
    out
}

/// Maps points of the unit cube onto configurations: one coordinate per
/// top-level parameter; conditional children take their defaults.
fn from_unit_points(space: &ConfigurationSpace, points: &[Vec<f64>]) -> Vec<Configuration> {
    let top: Vec<usize> = (0..space.len()).filter(|&i| space.is_top_level(i)).collect();
    points
        .iter()
        .map(|u| {
            let values = top
                .iter()
                .zip(u)
                .map(|(&i, &ui)| {
                    let p = &space.parameters()[i];
                    (p.name.clone(), p.from_quantile(ui))
                })
                .collect();
            space.complete(values)
        })
        .collect()
}

/// Generates the initial design. Duplicate configurations (possible in
/// discrete spaces) are replaced by random draws; if the space has fewer
/// distinct configurations than requested the design is truncated.
pub fn generate_design(space: &ConfigurationSpace, spec: &DesignSpec) -> Result<Vec<Configuration>, DesignError> {
    if spec.n_points == 0 {
        return Err(DesignError::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_points;
    let n_top = (0..space.len()).filter(|&i| space.is_top_level(i)).count().max(1);
    let raw = match spec.kind {
        DesignKind::Default => return Ok(vec![space.default_configuration()]),
        DesignKind::Random => (0..n).map(|_| space.sample(&mut rng)).collect(),
        DesignKind::Lhs => from_unit_points(space, &lhs_points(n_top, n, &mut rng)),
        DesignKind::Sobol => {
            if n_top > sobol::MAX_DIM {
                log::warn!(
                    "{n_top} top-level parameters exceed the Sobol table ({}); using a Latin hypercube",
                    sobol::MAX_DIM
                );
                from_unit_points(space, &lhs_points(n_top, n, &mut rng))
            } else {
                from_unit_points(space, &sobol_points(n_top, n, 1)?)
            }
        }
    };

    let cap = space.finite_size().map_or(n, |s| (s.min(n as u128)) as usize);
    if cap < n {
        log::warn!("space has only {cap} distinct configurations; design truncated from {n}");
    }
    let mut seen = HashSet::new();
    let mut out: Vec<Configuration> = raw.into_iter().filter(|c| seen.insert(c.clone())).collect();
    out.truncate(cap);
    let mut attempts = 0;
    while out.len() < cap && attempts < 1000 * n {
        let c = space.sample(&mut rng);
        if seen.insert(c.clone()) {
            out.push(c);
        }
        attempts += 1;
    }
    Ok(out)
}
