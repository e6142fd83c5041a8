//! Limited-memory BFGS with box constraints handled by projection.

use std::collections::VecDeque;

/// Settings of [`minimize`].
#[derive(Debug, Clone, Copy)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when the projected gradient's infinity norm falls below this.
    pub gradient_tolerance: f64,
    /// Stop when the relative objective decrease falls below this.
    pub relative_tolerance: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions { memory: 7, max_iterations: 200, gradient_tolerance: 1e-7, relative_tolerance: 1e-12 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Minimizes `f` over the box `[lo, hi]^n` starting from `x0`.
///
/// `f` returns the value and gradient, or `None` where it is undefined; the
/// line search backs off from such points.
pub fn minimize(
    mut f: impl FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
    x0: &[f64],
    lo: f64,
    hi: f64,
    opts: LbfgsOptions,
) -> Option<Minimum> {
    let n = x0.len();
    let project = |x: &mut Vec<f64>| x.iter_mut().for_each(|v| *v = v.clamp(lo, hi));
    let mut x = x0.to_vec();
    project(&mut x);
    let (mut fx, mut g) = f(&x)?;
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut it = 0;
    while it < opts.max_iterations {
        it += 1;
        // Projected gradient: zero components pushing against an active bound.
        let pg: Vec<f64> = (0..n)
            .map(|i| {
                if (x[i] <= lo && g[i] > 0.0) || (x[i] >= hi && g[i] < 0.0) {
                    0.0
                } else {
                    g[i]
                }
            })
            .collect();
        if pg.iter().fold(0.0f64, |m, v| m.max(v.abs())) < opts.gradient_tolerance {
            break;
        }
        // Two-loop recursion on the projected gradient.
        let mut q = pg.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = hist.back() {
            let scale = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= scale);
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
        for i in 0..n {
            if pg[i] == 0.0 {
                d[i] = 0.0;
            }
        }
        if dot(&d, &pg) >= 0.0 {
            d = pg.iter().map(|v| -v).collect();
            hist.clear();
        }
        // Backtracking Armijo search along the projected path.
        let mut step = if hist.is_empty() {
            (1.0 / d.iter().fold(0.0f64, |m, v| m.max(v.abs()))).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..40 {
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            project(&mut xn);
            let dx: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            if let Some((fn_, gn)) = f(&xn) {
                if fn_.is_finite() && fn_ <= fx + 1e-4 * dot(&pg, &dx) {
                    accepted = Some((xn, fn_, gn, dx));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn, s)) = accepted else { break };
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if hist.len() == opts.memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        let decrease = fx - fn_;
        x = xn;
        fx = fn_;
        g = gn;
        if decrease.abs() <= opts.relative_tolerance * fx.abs().max(1.0) {
            break;
        }
    }
    Some(Minimum { x, value: fx, iterations: it })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            Some((
                (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2),
                vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)],
            ))
        };
        let opts = LbfgsOptions { max_iterations: 500, ..Default::default() };
        let m = minimize(f, &[-1.2, 1.0], -5.0, 5.0, opts).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5, "{:?}", m);
    }

    #[test]
    fn active_bound() {
        let f = |x: &[f64]| Some(((x[0] - 3.0).powi(2), vec![2.0 * (x[0] - 3.0)]));
        let m = minimize(f, &[0.0], -1.0, 1.0, LbfgsOptions::default()).unwrap();
        assert_eq!(m.x[0], 1.0);
    }
}
