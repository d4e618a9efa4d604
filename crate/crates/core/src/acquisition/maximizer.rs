use std::cmp::Ordering;
use std::collections::HashSet;

use rand::Rng;

use super::{Acquisition, AcquisitionError};
use crate::space::{Configuration, ConfigurationSpace, Encoding};
use crate::surrogate::Surrogate;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaximizerSettings {
    pub n_random: usize,
    pub n_local_starts: usize,
    /// Hill-climbing step cap per start.
    pub max_steps: usize,
}

impl Default for MaximizerSettings {
    fn default() -> Self {
        Self {
            n_random: 1000,
            n_local_starts: 10,
            max_steps: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredConfig {
    pub config: Configuration,
    pub score: f64,
}

impl ScoredConfig {
    fn rank(&self, other: &Self) -> Ordering {
        self.score.total_cmp(&other.score)
    }
}

struct Scorer<'a, S: ?Sized> {
    acq: &'a Acquisition,
    model: &'a S,
    space: &'a ConfigurationSpace,
    scheme: Encoding,
}

impl<S: Surrogate + ?Sized> Scorer<'_, S> {
    fn score<R: Rng + ?Sized>(&self, config: Configuration, rng: &mut R) -> Result<ScoredConfig, AcquisitionError> {
        let x = self.space.encode_unchecked(&config, self.scheme);
        let p = self.model.predict(&x)?;
        let s = self.acq.score(&p, &x, rng)?;
        Ok(ScoredConfig {
            config,
            score: if s.is_nan() { f64::NEG_INFINITY } else { s },
        })
    }
}

/// Candidate configurations ordered by decreasing acquisition value.
///
/// Scores `n_random` uniform samples, then hill-climbs over
/// [`ConfigurationSpace::neighbors`] from the `n_local_starts` best of
/// `evaluated` (or of the random samples when nothing has been evaluated).
/// Returns up to `n_challengers` distinct configurations; ties keep
/// insertion order (random samples first).
#[allow(clippy::too_many_arguments)]
pub fn maximize_acquisition<S, R>(
    acq: &Acquisition,
    model: &S,
    space: &ConfigurationSpace,
    scheme: Encoding,
    evaluated: &[Configuration],
    n_challengers: usize,
    settings: &MaximizerSettings,
    rng: &mut R,
) -> Result<Vec<ScoredConfig>, AcquisitionError>
where
    S: Surrogate + ?Sized,
    R: Rng + ?Sized,
{
    if space.is_empty() {
        return Err(AcquisitionError::EmptySpace);
    }
    let scorer = Scorer {
        acq,
        model,
        space,
        scheme,
    };
    let mut candidates: Vec<ScoredConfig> = Vec::with_capacity(settings.n_random + settings.n_local_starts);
    for _ in 0..settings.n_random {
        let config = space.sample(rng);
        candidates.push(scorer.score(config, rng)?);
    }

    let mut starts: Vec<ScoredConfig> = if evaluated.is_empty() {
        candidates.clone()
    } else {
        evaluated
            .iter()
            .map(|c| scorer.score(c.clone(), rng))
            .collect::<Result<_, AcquisitionError>>()?
    };
    starts.sort_by(|a, b| b.rank(a));
    starts.truncate(settings.n_local_starts);

    for start in starts {
        let mut current = start;
        for _ in 0..settings.max_steps {
            let mut best: Option<ScoredConfig> = None;
            for n in space.neighbors(&current.config, rng) {
                let s = scorer.score(n, rng)?;
                if best.as_ref().is_none_or(|b| s.rank(b) == Ordering::Greater) {
                    best = Some(s);
                }
            }
            match best {
                Some(b) if b.rank(&current) == Ordering::Greater => current = b,
                _ => break,
            }
        }
        candidates.push(current);
    }

    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| candidates[b].rank(&candidates[a]).then(a.cmp(&b)));
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n_challengers);
    for i in order {
        if out.len() >= n_challengers {
            break;
        }
        if seen.insert(candidates[i].config.clone()) {
            out.push(candidates[i].clone());
        }
    }
    Ok(out)
}
