//! Box-constrained quasi-Newton ascent.
//!
//! BFGS on the free coordinates with a projected backtracking (Armijo)
//! line search. Coordinates sitting on a bound with the gradient pointing
//! outward are frozen for the step.

use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub(crate) struct AscentOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub max_step: f64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        AscentOptions {
            max_iters: 200,
            grad_tol: 1e-6,
            max_step: 2.0,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct AscentResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn projected_grad(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            if (x[i] <= lo[i] && g[i] < 0.0) || (x[i] >= hi[i] && g[i] > 0.0) {
                0.0
            } else {
                g[i]
            }
        })
        .collect()
}

fn identity(p: usize) -> Vec<Vec<f64>> {
    (0..p)
        .map(|i| (0..p).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Maximizes `f` over the box `[lo, hi]` from `x0`. `f` returns the value
/// and gradient; an `Err` at a trial point is treated as an infeasible step.
pub(crate) fn maximize<F>(
    mut f: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: AscentOptions,
) -> Result<AscentResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let p = x0.len();
    let clamp = |v: &[f64]| -> Vec<f64> { (0..p).map(|i| v[i].clamp(lo[i], hi[i])).collect() };
    let mut x = clamp(x0);
    let (mut fx, mut g) = f(&x)?;
    let mut hinv = identity(p);
    let mut fresh = true;
    let mut stalls = 0;

    for _ in 0..opts.max_iters {
        let pg = projected_grad(&x, &g, lo, hi);
        let pg_norm = pg.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if pg_norm < opts.grad_tol {
            return Ok(AscentResult { x, value: fx, converged: true });
        }
        let free: Vec<bool> = pg.iter().zip(&g).map(|(a, b)| *a != 0.0 || *b == 0.0).collect();

        let mut dir: Vec<f64> = (0..p)
            .map(|i| {
                if !free[i] {
                    return 0.0;
                }
                (0..p).filter(|&j| free[j]).map(|j| hinv[i][j] * g[j]).sum()
            })
            .collect();
        if dot(&dir, &pg) <= 0.0 {
            hinv = identity(p);
            fresh = true;
            dir = pg.clone();
        }
        let big = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if big > opts.max_step {
            dir.iter_mut().for_each(|v| *v *= opts.max_step / big);
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = clamp(&x.iter().zip(&dir).map(|(a, d)| a + t * d).collect::<Vec<_>>());
            let step: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            if step.iter().all(|s| *s == 0.0) {
                break;
            }
            if let Ok((ft, gt)) = f(&trial) {
                if ft.is_finite() && ft >= fx + 1e-4 * dot(&g, &step) {
                    accepted = Some((trial, step, ft, gt));
                    break;
                }
            }
            t *= 0.5;
        }

        let Some((xn, s, fnew, gn)) = accepted else {
            if fresh {
                return Ok(AscentResult { x, value: fx, converged: false });
            }
            hinv = identity(p);
            fresh = true;
            continue;
        };

        // Curvature pair for minimizing −f.
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| b - a).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if fresh {
                let scale = sy / dot(&y, &y);
                hinv = identity(p);
                hinv.iter_mut().enumerate().for_each(|(i, r)| r[i] = scale);
            }
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..p).map(|i| dot(&hinv[i], &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..p {
                for j in 0..p {
                    hinv[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
            fresh = false;
        }

        let improvement = fnew - fx;
        x = xn;
        fx = fnew;
        g = gn;
        if improvement.abs() <= 1e-12 * (1.0 + fx.abs()) {
            stalls += 1;
            if stalls >= 3 {
                return Ok(AscentResult { x, value: fx, converged: true });
            }
        } else {
            stalls = 0;
        }
    }
    Ok(AscentResult { x, value: fx, converged: false })
}
