use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Configuration, ConfigurationSpace, Domain, Parameter, Value};

/// Number of numeric neighbors per active numeric parameter.
pub const NUMERIC_NEIGHBORS: usize = 4;
/// Standard deviation of numeric neighbor moves in the unit encoding.
pub const NEIGHBOR_STD: f64 = 0.2;

impl Parameter {
    /// Uniform on the (log-transformed where flagged) domain.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Value {
        match &self.domain {
            Domain::Integer { lo, hi, log: false } => Value::Int(rng.random_range(*lo..=*hi)),
            Domain::Categorical { choices } | Domain::Ordinal { levels: choices } => {
                choices[rng.random_range(0..choices.len())].clone()
            }
            _ => self.from_unit(rng.random::<f64>()),
        }
    }
}

impl ConfigurationSpace {
    /// Samples every top-level parameter uniformly; conditional children are
    /// sampled only when their parent's value activates them.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Configuration {
        let mut values = BTreeMap::new();
        for &i in self.topological_order() {
            let active = match self.parent[i] {
                None => true,
                Some((p, ci)) => values
                    .get(&self.params[p].name)
                    .is_some_and(|v| self.conditions[ci].predicate.holds(v)),
            };
            if active {
                let p = &self.params[i];
                values.insert(p.name.clone(), p.sample(rng));
            }
        }
        Configuration { values }
    }

    /// One-exchange neighborhood used by local search.
    ///
    /// Numeric parameters get [`NUMERIC_NEIGHBORS`] Gaussian moves in the
    /// unit encoding (clipped to `[0, 1]`); categorical and ordinal
    /// parameters get every alternative value. Activity is recomputed after
    /// each move and newly active children take their defaults.
    pub fn neighbors<R: Rng + ?Sized>(&self, config: &Configuration, rng: &mut R) -> Vec<Configuration> {
        let normal = Normal::new(0.0, NEIGHBOR_STD).expect("valid std");
        let mut out = Vec::new();
        for p in &self.params {
            let Some(current) = config.values.get(&p.name) else {
                continue;
            };
            let mut moved = |v: Value| {
                let mut values = config.values.clone();
                values.insert(p.name.clone(), v);
                out.push(self.complete(values));
            };
            match &p.domain {
                Domain::Float { .. } => {
                    let u = p.to_unit(current).unwrap_or(0.5);
                    for _ in 0..NUMERIC_NEIGHBORS {
                        let v = p.from_unit((u + normal.sample(rng)).clamp(0.0, 1.0));
                        moved(v);
                    }
                }
                Domain::Integer { .. } => {
                    let u = p.to_unit(current).unwrap_or(0.5);
                    for _ in 0..NUMERIC_NEIGHBORS {
                        // a small move may round back to the current integer
                        let v = (0..10)
                            .map(|_| p.from_unit((u + normal.sample(rng)).clamp(0.0, 1.0)))
                            .find(|v| v != current);
                        if let Some(v) = v {
                            moved(v);
                        }
                    }
                }
                Domain::Categorical { choices } | Domain::Ordinal { levels: choices } => {
                    for c in choices.iter().filter(|c| *c != current) {
                        moved(c.clone());
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::tests::cash_space;
    use crate::space::{Condition, Encoding};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn float_sample_in_domain() {
        let space = ConfigurationSpace::new(vec![Parameter::float("x", 0.0, 1.0)], vec![]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let x = space.sample(&mut rng).get_f64("x").unwrap();
            assert!((0.0..=1.0).contains(&x));
        }
    }

    #[test]
    fn conditional_child_absent_when_inactive() {
        let space = ConfigurationSpace::new(
            vec![
                Parameter::categorical("algo", vec!["svm", "rf"]),
                Parameter::float("C", 0.0, 1.0),
            ],
            vec![Condition::equals("C", "algo", "svm")],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen_rf = false;
        for _ in 0..200 {
            let c = space.sample(&mut rng);
            if c.get("algo") == Some(&Value::from("rf")) {
                seen_rf = true;
                assert!(c.get("C").is_none());
            } else {
                assert!(c.get("C").is_some());
            }
        }
        assert!(seen_rf);
    }

    #[test]
    fn log_uniform_median() {
        // log-uniform on [1, 1000] has median sqrt(1 * 1000) = 31.62...
        let space = ConfigurationSpace::new(vec![Parameter::log_float("x", 1.0, 1000.0)], vec![]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10_000;
        let below = (0..n)
            .filter(|_| space.sample(&mut rng).get_f64("x").unwrap() <= 31.6)
            .count();
        let cdf = below as f64 / n as f64;
        assert!((cdf - 0.5).abs() < 0.02, "cdf = {cdf}");
    }

    #[test]
    fn categorical_neighbors_are_one_exchange() {
        let space = ConfigurationSpace::new(vec![Parameter::categorical("c", vec!["a", "b", "c"])], vec![])
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let n = space.neighbors(&space.default_configuration(), &mut rng);
        let got: Vec<_> = n.iter().map(|c| c.get("c").unwrap().clone()).collect();
        assert_eq!(got, vec![Value::from("b"), Value::from("c")]);
    }

    #[test]
    fn float_neighbors_in_domain() {
        let space = ConfigurationSpace::new(vec![Parameter::float("x", -2.0, 3.0)], vec![]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = space.neighbors(&space.default_configuration(), &mut rng);
        assert_eq!(n.len(), 4);
        for c in n {
            space.validate(&c).unwrap();
        }
    }

    #[test]
    fn flipping_branch_recomputes_activity() {
        let space = cash_space();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let svm = space.default_configuration();
        let flipped: Vec<_> = space
            .neighbors(&svm, &mut rng)
            .into_iter()
            .filter(|c| c.get("algo") == Some(&Value::from("rf")))
            .collect();
        assert_eq!(flipped.len(), 1);
        let rf = &flipped[0];
        assert!(rf.get("C").is_none());
        assert!(rf.get("kernel").is_none());
        assert!(rf.get("gamma").is_none());
        assert_eq!(rf.get("n_trees"), Some(&Value::Int(100)));
        assert_eq!(rf.get("max_depth"), Some(&Value::Int(5)));
        space.validate(rf).unwrap();
    }

    #[test]
    fn encoded_length_constant_over_samples() {
        let space = cash_space();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let c = space.sample(&mut rng);
            assert_eq!(space.encode(&c, Encoding::OneHot).unwrap().len(), 8);
        }
    }
}
