//! Box-constrained limited-memory quasi-Newton minimizer.

use std::collections::VecDeque;

const MEMORY: usize = 6;

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f` (returning value and gradient) inside `[lo, hi]`.
/// Non-finite evaluations are treated as +∞ and rejected by the line search.
/// Returns the best point found and its value.
pub(crate) fn minimize_box<F>(mut f: F, x0: &[f64], lo: &[f64], hi: &[f64], max_iter: usize) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let (mut fx, mut g) = f(&x);
    if !fx.is_finite() {
        return (x, f64::INFINITY);
    }
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();

    for _ in 0..max_iter {
        // dimensions pinned at a bound with the gradient pushing outward stay fixed
        let free: Vec<bool> = (0..x.len())
            .map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)))
            .collect();
        let gf: Vec<f64> = g.iter().zip(&free).map(|(v, &fr)| if fr { *v } else { 0.0 }).collect();
        if gf.iter().map(|v| v.abs()).fold(0.0, f64::max) < 1e-8 {
            break;
        }

        // two-loop recursion
        let mut q = gf.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = hist.back() {
            let gamma = dot(s, y) / dot(y, y);
            for qi in q.iter_mut() {
                *qi *= gamma;
            }
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        let mut dir: Vec<f64> = q.iter().zip(&free).map(|(v, &fr)| if fr { -v } else { 0.0 }).collect();
        if dot(&dir, &gf) >= 0.0 {
            dir = gf.iter().map(|v| -v).collect();
            hist.clear();
        }
        if hist.is_empty() {
            // first step: keep the move within one unit in log space
            let norm = dot(&dir, &dir).sqrt();
            if norm > 1.0 {
                dir.iter_mut().for_each(|v| *v /= norm);
            }
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let mut xn: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            project(&mut xn, lo, hi);
            let decrease: f64 = dot(&g, &xn.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>());
            let (fn_, gn) = f(&xn);
            if fn_.is_finite() && fn_ <= fx + 1e-4 * decrease.min(0.0) && fn_ <= fx {
                accepted = Some((xn, fn_, gn));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else { break };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            hist.push_back((s, y, 1.0 / sy));
            if hist.len() > MEMORY {
                hist.pop_front();
            }
        }
        let improvement = fx - fn_;
        x = xn;
        fx = fn_;
        g = gn;
        if improvement.abs() < 1e-10 * fx.abs().max(1.0) {
            break;
        }
    }
    (x, fx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_interior_minimum() {
        let f = |x: &[f64]| {
            let v = (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 0.5).powi(2);
            (v, vec![2.0 * (x[0] - 1.0), 20.0 * (x[1] + 0.5)])
        };
        let (x, v) = minimize_box(f, &[3.0, 3.0], &[-5.0, -5.0], &[5.0, 5.0], 100);
        assert!((x[0] - 1.0).abs() < 1e-4 && (x[1] + 0.5).abs() < 1e-4, "{x:?}");
        assert!(v < 1e-8);
    }

    #[test]
    fn respects_bounds() {
        let f = |x: &[f64]| ((x[0] + 4.0).powi(2), vec![2.0 * (x[0] + 4.0)]);
        let (x, _) = minimize_box(f, &[0.5], &[0.0], &[1.0], 50);
        assert_eq!(x, vec![0.0]);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            (v, vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)])
        };
        let (x, _) = minimize_box(f, &[-1.2, 1.0], &[-3.0, -3.0], &[3.0, 3.0], 500);
        assert!((x[0] - 1.0).abs() < 1e-3 && (x[1] - 1.0).abs() < 1e-3, "{x:?}");
    }
}
