//! Gaussian process regression with a constant mean, an ARD Matérn-5/2
//! kernel and standardized targets. Hyperparameters maximize the log
//! marginal likelihood by multi-start quasi-Newton search in log space.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kernel::{matern52_from_distance, matern52_lengthscale_factor, scaled_distance};
use super::optimize::minimize_box;
use super::{check_training_set, ModelError, Prediction, Surrogate};

pub const LENGTHSCALE_BOUNDS: (f64, f64) = (1e-3, 1e3);
pub const SIGNAL_VAR_BOUNDS: (f64, f64) = (1e-3, 1e3);
pub const NOISE_VAR_BOUNDS: (f64, f64) = (1e-10, 1.0);

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GpConfig {
    pub restarts: usize,
    /// Iteration cap of each local search.
    pub max_iter: usize,
    pub seed: u64,
}

impl GpConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            restarts: 10,
            max_iter: 50,
            seed,
        }
    }
}

impl Default for GpConfig {
    fn default() -> Self {
        Self::with_seed(0)
    }
}

/// Kernel and noise hyperparameters, on the standardized target scale.
#[derive(Debug, Clone, PartialEq)]
pub struct GpHyperparameters {
    pub lengthscales: Vec<f64>,
    pub signal_var: f64,
    pub noise_var: f64,
}

impl GpHyperparameters {
    pub fn unit(dim: usize) -> Self {
        Self {
            lengthscales: vec![1.0; dim],
            signal_var: 1.0,
            noise_var: 1e-6,
        }
    }

    fn to_log(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.lengthscales.iter().map(|l| l.ln()).collect();
        t.push(self.signal_var.ln());
        t.push(self.noise_var.ln());
        t
    }

    fn from_log(t: &[f64]) -> Self {
        let d = t.len() - 2;
        Self {
            lengthscales: t[..d].iter().map(|v| v.exp()).collect(),
            signal_var: t[d].exp(),
            noise_var: t[d + 1].exp(),
        }
    }
}

fn log_bounds(dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![LENGTHSCALE_BOUNDS.0.ln(); dim];
    let mut hi = vec![LENGTHSCALE_BOUNDS.1.ln(); dim];
    lo.push(SIGNAL_VAR_BOUNDS.0.ln());
    hi.push(SIGNAL_VAR_BOUNDS.1.ln());
    lo.push(NOISE_VAR_BOUNDS.0.ln());
    hi.push(NOISE_VAR_BOUNDS.1.ln());
    (lo, hi)
}

/// Cholesky factor of `k + jitter·I`, escalating the jitter tenfold from
/// `1e-10` up to `1e-4` until the factorization succeeds.
fn factorize(k: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64), ModelError> {
    if let Some(c) = k.clone().cholesky() {
        return Ok((c.unpack(), 0.0));
    }
    let mut jitter = JITTER_START;
    while jitter <= JITTER_MAX * (1.0 + 1e-9) {
        let mut kj = k.clone();
        for i in 0..kj.nrows() {
            kj[(i, i)] += jitter;
        }
        if let Some(c) = kj.cholesky() {
            return Ok((c.unpack(), jitter));
        }
        jitter *= 10.0;
    }
    Err(ModelError::NotPositiveDefinite(JITTER_MAX))
}

/// Pairwise squared coordinate differences, one `n × n` matrix per dimension.
struct Differences {
    n: usize,
    per_dim: Vec<Vec<f64>>,
}

impl Differences {
    fn new(x: &[Vec<f64>]) -> Self {
        let n = x.len();
        let d = x[0].len();
        let mut per_dim = vec![vec![0.0; n * n]; d];
        for (j, m) in per_dim.iter_mut().enumerate() {
            for a in 0..n {
                for b in 0..n {
                    let v = x[a][j] - x[b][j];
                    m[a * n + b] = v * v;
                }
            }
        }
        Self { n, per_dim }
    }

    fn distances(&self, lengthscales: &[f64]) -> Vec<f64> {
        let mut r2 = vec![0.0; self.n * self.n];
        for (m, l) in self.per_dim.iter().zip(lengthscales) {
            let inv = 1.0 / (l * l);
            for (acc, v) in r2.iter_mut().zip(m) {
                *acc += v * inv;
            }
        }
        r2.iter_mut().for_each(|v| *v = v.sqrt());
        r2
    }
}

/// Log marginal likelihood of standardized targets and its gradient with
/// respect to `(log ℓ_1..d, log σ_f², log σ_n²)`.
fn lml_and_grad(diff: &Differences, y: &DVector<f64>, hyp: &GpHyperparameters) -> Option<(f64, Vec<f64>)> {
    let n = diff.n;
    let r = diff.distances(&hyp.lengthscales);
    let kf = DMatrix::from_fn(n, n, |a, b| matern52_from_distance(r[a * n + b], hyp.signal_var));
    let mut k = kf.clone();
    for i in 0..n {
        k[(i, i)] += hyp.noise_var;
    }
    let chol = k.cholesky()?;
    let alpha = chol.solve(y);
    let l = chol.l_dirty();
    let log_det_half: f64 = (0..n).map(|i| l[(i, i)].ln()).sum();
    let lml = -0.5 * y.dot(&alpha) - log_det_half - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    if !lml.is_finite() {
        return None;
    }
    let kinv = chol.inverse();
    let w = &alpha * alpha.transpose() - kinv;

    let d = hyp.lengthscales.len();
    let mut grad = vec![0.0; d + 2];
    for (j, g) in grad.iter_mut().take(d).enumerate() {
        let inv_l2 = 1.0 / (hyp.lengthscales[j] * hyp.lengthscales[j]);
        let sq = &diff.per_dim[j];
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                let idx = a * n + b;
                if sq[idx] != 0.0 {
                    s += w[(a, b)] * matern52_lengthscale_factor(r[idx], hyp.signal_var) * sq[idx] * inv_l2;
                }
            }
        }
        *g = 0.5 * s;
    }
    grad[d] = 0.5 * w.component_mul(&kf).sum();
    grad[d + 1] = 0.5 * hyp.noise_var * w.trace();
    Some((lml, grad))
}

/// A fitted Gaussian process.
#[derive(Debug, Clone)]
pub struct GpModel {
    x: Vec<Vec<f64>>,
    y_mean: f64,
    y_std: f64,
    hyp: GpHyperparameters,
    jitter: f64,
    chol_l: DMatrix<f64>,
    alpha: DVector<f64>,
}

fn standardize(y: &[f64]) -> (f64, f64, DVector<f64>) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
    (mean, std, DVector::from_iterator(y.len(), y.iter().map(|v| (v - mean) / std)))
}

impl GpModel {
    /// Fits hyperparameters by maximizing the marginal likelihood.
    pub fn fit(x: &[Vec<f64>], y: &[f64], config: &GpConfig) -> Result<GpModel, ModelError> {
        let dim = check_training_set(x, y, 1)?;
        let (_, _, ys) = standardize(y);
        let diff = Differences::new(x);
        let (lo, hi) = log_bounds(dim);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

        let objective = |t: &[f64]| match lml_and_grad(&diff, &ys, &GpHyperparameters::from_log(t)) {
            Some((v, g)) => (-v, g.into_iter().map(|v| -v).collect()),
            None => (f64::INFINITY, vec![0.0; t.len()]),
        };

        let mut best: Option<(Vec<f64>, f64)> = None;
        for restart in 0..config.restarts.max(1) {
            let start = if restart == 0 {
                GpHyperparameters {
                    lengthscales: vec![0.5; dim],
                    signal_var: 1.0,
                    noise_var: 1e-4,
                }
                .to_log()
            } else {
                let mut t: Vec<f64> = (0..dim).map(|_| rng.random_range((1e-2f64).ln()..(10f64).ln())).collect();
                t.push(rng.random_range((0.1f64).ln()..(10f64).ln()));
                t.push(rng.random_range((1e-8f64).ln()..(1e-1f64).ln()));
                t
            };
            let (t, v) = minimize_box(objective, &start, &lo, &hi, config.max_iter);
            if v.is_finite() && best.as_ref().is_none_or(|(_, bv)| v < *bv) {
                best = Some((t, v));
            }
        }
        let hyp = match best {
            Some((t, _)) => GpHyperparameters::from_log(&t),
            None => {
                log::warn!("GP likelihood non-finite at every start; using unit hyperparameters");
                GpHyperparameters::unit(dim)
            }
        };
        Self::with_hyperparameters(x, y, hyp)
    }

    /// Conditions on the data with fixed hyperparameters.
    pub fn with_hyperparameters(x: &[Vec<f64>], y: &[f64], hyp: GpHyperparameters) -> Result<GpModel, ModelError> {
        let dim = check_training_set(x, y, 1)?;
        if hyp.lengthscales.len() != dim {
            return Err(ModelError::DimensionMismatch {
                expected: dim,
                got: hyp.lengthscales.len(),
            });
        }
        let (y_mean, y_std, ys) = standardize(y);
        let n = x.len();
        let mut k = DMatrix::from_fn(n, n, |a, b| {
            matern52_from_distance(scaled_distance(&x[a], &x[b], &hyp.lengthscales), hyp.signal_var)
        });
        for i in 0..n {
            k[(i, i)] += hyp.noise_var;
        }
        let (chol_l, jitter) = factorize(&k)?;
        if jitter > 0.0 {
            log::debug!("GP covariance needed jitter {jitter:e}");
        }
        let z = chol_l.solve_lower_triangular(&ys).expect("triangular factor is non-singular");
        let alpha = chol_l
            .transpose()
            .solve_upper_triangular(&z)
            .expect("triangular factor is non-singular");
        Ok(GpModel {
            x: x.to_vec(),
            y_mean,
            y_std,
            hyp,
            jitter,
            chol_l,
            alpha,
        })
    }

    pub fn hyperparameters(&self) -> &GpHyperparameters {
        &self.hyp
    }

    /// Noise variance plus any jitter, on the standardized scale.
    pub fn effective_noise(&self) -> f64 {
        self.hyp.noise_var + self.jitter
    }

    /// `(mean, std)` used to standardize the targets.
    pub fn standardization(&self) -> (f64, f64) {
        (self.y_mean, self.y_std)
    }

    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    /// Log marginal likelihood of the standardized training targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.x.len();
        let ys: DVector<f64> = &self.chol_l * self.chol_l.transpose() * &self.alpha;
        let log_det_half: f64 = (0..n).map(|i| self.chol_l[(i, i)].ln()).sum();
        -0.5 * ys.dot(&self.alpha) - log_det_half - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
    }

    fn posterior(&self, x: &[f64]) -> Result<(f64, f64), ModelError> {
        if x.len() != self.dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let kstar = DVector::from_iterator(
            self.x.len(),
            self.x
                .iter()
                .map(|xi| matern52_from_distance(scaled_distance(x, xi, &self.hyp.lengthscales), self.hyp.signal_var)),
        );
        let mean = kstar.dot(&self.alpha);
        let v = self
            .chol_l
            .solve_lower_triangular(&kstar)
            .expect("triangular factor is non-singular");
        let latent = (self.hyp.signal_var - v.dot(&v)).max(0.0);
        Ok((mean, latent))
    }

    /// Posterior of the noise-free function value.
    pub fn predict_latent(&self, x: &[f64]) -> Result<Prediction, ModelError> {
        let (m, v) = self.posterior(x)?;
        Ok(Prediction {
            mean: self.y_mean + self.y_std * m,
            variance: v * self.y_std * self.y_std,
        })
    }
}

impl Surrogate for GpModel {
    /// Predictive distribution of a new observation (latent variance plus noise).
    fn predict(&self, x: &[f64]) -> Result<Prediction, ModelError> {
        let (m, v) = self.posterior(x)?;
        Ok(Prediction {
            mean: self.y_mean + self.y_std * m,
            variance: (v + self.effective_noise()) * self.y_std * self.y_std,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random()).collect()).collect();
        let y = x.iter().map(|r| r.iter().map(|v| (6.0 * v).sin()).sum::<f64>()).collect();
        (x, y)
    }

    #[test]
    fn single_point_interpolates() {
        let m = GpModel::fit(&[vec![0.3, 0.7]], &[2.5], &GpConfig::default()).unwrap();
        assert!((m.predict(&[0.3, 0.7]).unwrap().mean - 2.5).abs() < 1e-6);
    }

    #[test]
    fn constant_targets() {
        let x = vec![vec![0.1], vec![0.5], vec![0.9]];
        let m = GpModel::fit(&x, &[3.0, 3.0, 3.0], &GpConfig::default()).unwrap();
        for q in [0.0, 0.3, 0.7, 1.0] {
            let p = m.predict_latent(&[q]).unwrap();
            assert!((p.mean - 3.0).abs() < 1e-9);
            assert!(p.variance <= m.hyperparameters().signal_var + 1e-12);
        }
    }

    #[test]
    fn reverts_to_prior_far_away() {
        let (x, y) = data(3, 6, 2);
        let m = GpModel::fit(&x, &y, &GpConfig::default()).unwrap();
        let p = m.predict(&[1e6, -1e6]).unwrap();
        let (mean, std) = m.standardization();
        let h = m.hyperparameters();
        assert!((p.mean - mean).abs() < 1e-9);
        assert!((p.variance - (h.signal_var + m.effective_noise()) * std * std).abs() < 1e-9);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..10 {
            let (x, y) = data(seed, 5, 2);
            let (_, _, ys) = standardize(&y);
            let diff = Differences::new(&x);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let t: Vec<f64> = vec![
                rng.random_range(-2.0..1.0),
                rng.random_range(-2.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-8.0..-2.0),
            ];
            let (_, g) = lml_and_grad(&diff, &ys, &GpHyperparameters::from_log(&t)).unwrap();
            for i in 0..t.len() {
                let h = 1e-5;
                let mut tp = t.clone();
                tp[i] += h;
                let mut tm = t.clone();
                tm[i] -= h;
                let fp = lml_and_grad(&diff, &ys, &GpHyperparameters::from_log(&tp)).unwrap().0;
                let fm = lml_and_grad(&diff, &ys, &GpHyperparameters::from_log(&tm)).unwrap().0;
                let fd = (fp - fm) / (2.0 * h);
                let rel = (fd - g[i]).abs() / fd.abs().max(1e-3);
                assert!(rel < 1e-5, "seed {seed} coord {i}: analytic {} vs fd {fd}", g[i]);
            }
        }
    }

    #[test]
    fn fitted_hyperparameters_within_bounds() {
        let (x, y) = data(7, 12, 3);
        let m = GpModel::fit(&x, &y, &GpConfig::default()).unwrap();
        let h = m.hyperparameters();
        let eps = 1e-9;
        for l in &h.lengthscales {
            assert!(*l >= LENGTHSCALE_BOUNDS.0 * (1.0 - eps) && *l <= LENGTHSCALE_BOUNDS.1 * (1.0 + eps));
        }
        assert!(h.signal_var >= SIGNAL_VAR_BOUNDS.0 * (1.0 - eps) && h.signal_var <= SIGNAL_VAR_BOUNDS.1 * (1.0 + eps));
        assert!(h.noise_var >= NOISE_VAR_BOUNDS.0 * (1.0 - eps) && h.noise_var <= NOISE_VAR_BOUNDS.1 * (1.0 + eps));
    }

    #[test]
    fn optimization_beats_the_default_start() {
        let (x, y) = data(8, 10, 2);
        let m = GpModel::fit(&x, &y, &GpConfig::default()).unwrap();
        let start = GpModel::with_hyperparameters(
            &x,
            &y,
            GpHyperparameters {
                lengthscales: vec![0.5; 2],
                signal_var: 1.0,
                noise_var: 1e-4,
            },
        )
        .unwrap();
        assert!(m.log_marginal_likelihood() >= start.log_marginal_likelihood() - 1e-9);
    }

    #[test]
    fn latent_variance_at_training_points_below_noise() {
        let (x, y) = data(9, 8, 2);
        let m = GpModel::fit(&x, &y, &GpConfig::default()).unwrap();
        let (_, std) = m.standardization();
        for xi in &x {
            let v = m.predict_latent(xi).unwrap().variance / (std * std);
            assert!(v <= m.effective_noise() + 1e-8, "{v} > {}", m.effective_noise());
        }
    }

    #[test]
    fn jitter_rescues_duplicates() {
        let x = vec![vec![0.5]; 4];
        let hyp = GpHyperparameters {
            lengthscales: vec![1.0],
            signal_var: 1.0,
            noise_var: 1e-10,
        };
        let m = GpModel::with_hyperparameters(&x, &[1.0, 1.0, 1.0, 1.0], hyp).unwrap();
        assert!(m.predict(&[0.5]).unwrap().mean.is_finite());
    }
}
