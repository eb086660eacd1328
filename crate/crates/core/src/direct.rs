//! DIRECT (dividing rectangles) global maximization over the unit cube.
//!
//! Each iteration selects the potentially-optimal rectangles from the
//! lower-right convex hull of (size, value), with the ε slack guarding
//! against over-refining the incumbent, then trisects each selection along
//! all of its longest sides. Side lengths are tracked as integer powers of
//! 1/3 so the partition stays exact.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectBudget {
    pub max_evals: usize,
    pub max_iters: usize,
    /// Relative slack for the potentially-optimal test.
    pub epsilon: f64,
}

impl Default for DirectBudget {
    fn default() -> Self {
        DirectBudget {
            max_evals: 1000,
            max_iters: 100_000,
            epsilon: 1e-4,
        }
    }
}

impl DirectBudget {
    pub fn evals(max_evals: usize) -> Self {
        DirectBudget {
            max_evals,
            ..Default::default()
        }
    }

    /// 500 evaluations per dimension.
    pub fn for_dims(dims: usize) -> Self {
        Self::evals(500 * dims)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rectangle {
    pub center: Vec<f64>,
    /// Side `i` has length `3^-levels[i]`.
    pub levels: Vec<u32>,
    /// Objective at the center; `-inf` for non-finite evaluations.
    pub value: f64,
}

impl Rectangle {
    pub fn side_lengths(&self) -> Vec<f64> {
        self.levels.iter().map(|&k| 3f64.powi(-(k as i32))).collect()
    }

    pub fn volume(&self) -> f64 {
        3f64.powi(-(self.levels.iter().sum::<u32>() as i32))
    }

    fn depth(&self) -> u32 {
        self.levels.iter().sum()
    }
}

/// Half-diagonal of a rectangle with total division depth `t` in `d` dims.
fn half_diagonal(t: u32, d: usize) -> f64 {
    let k = t / d as u32;
    let extra = (t % d as u32) as usize;
    let short = 3f64.powi(-(k as i32 + 1));
    let long = 3f64.powi(-(k as i32));
    0.5 * ((d - extra) as f64 * long * long + extra as f64 * short * short).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub evals: usize,
    pub incumbent: f64,
}

#[derive(Debug, Clone)]
pub struct DirectResult {
    pub best_x: Vec<f64>,
    pub best_value: f64,
    pub evals: usize,
    pub iterations: usize,
    pub trace: Vec<TracePoint>,
    /// Number of non-finite objective values seen.
    pub non_finite: usize,
}

/// Incremental DIRECT state. [`direct_maximize`] drives it to a budget.
pub struct DirectSearch<F> {
    f: F,
    dims: usize,
    epsilon: f64,
    rects: Vec<Rectangle>,
    best: usize,
    evals: usize,
    iterations: usize,
    non_finite: usize,
}

impl<F> DirectSearch<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    /// Evaluates the cube centre.
    pub fn new(f: F, dims: usize, epsilon: f64) -> Result<Self> {
        if dims == 0 {
            return Err(Error::arg("DIRECT needs at least one dimension"));
        }
        let mut s = DirectSearch {
            f,
            dims,
            epsilon,
            rects: Vec::new(),
            best: 0,
            evals: 0,
            iterations: 0,
            non_finite: 0,
        };
        let center = vec![0.5; dims];
        let value = s.eval(&center);
        s.rects.push(Rectangle {
            center,
            levels: vec![0; dims],
            value,
        });
        Ok(s)
    }

    fn sanitize(&mut self, v: f64) -> f64 {
        if v.is_finite() {
            v
        } else {
            self.non_finite += 1;
            f64::NEG_INFINITY
        }
    }

    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        self.sanitize(v)
    }

    pub fn rectangles(&self) -> &[Rectangle] {
        &self.rects
    }

    pub fn evals(&self) -> usize {
        self.evals
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn best(&self) -> &Rectangle {
        &self.rects[self.best]
    }

    /// Indices of potentially-optimal rectangles, smallest first.
    fn potentially_optimal(&self) -> Vec<usize> {
        use std::collections::BTreeMap;
        // depth -> (best value, members achieving it)
        let mut groups: BTreeMap<u32, (f64, Vec<usize>)> = BTreeMap::new();
        for (i, r) in self.rects.iter().enumerate() {
            if !r.value.is_finite() {
                continue;
            }
            let e = groups.entry(r.depth()).or_insert((f64::NEG_INFINITY, Vec::new()));
            if r.value > e.0 {
                *e = (r.value, vec![i]);
            } else if r.value == e.0 {
                e.1.push(i);
            }
        }
        if groups.is_empty() {
            return Vec::new();
        }
        // Work in minimization form: (size, -value), sizes ascending.
        let mut pts: Vec<(f64, f64, Vec<usize>)> = groups
            .into_iter()
            .rev()
            .map(|(t, (v, m))| (half_diagonal(t, self.dims), -v, m))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let gmin = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        // The hull starts at the largest rectangle holding the minimum.
        let start = pts.iter().rposition(|p| p.1 == gmin).unwrap();
        let pts = &pts[start..];

        let mut hull: Vec<usize> = Vec::new();
        for k in 0..pts.len() {
            while hull.len() >= 2 {
                let (o, a) = (&pts[hull[hull.len() - 2]], &pts[hull[hull.len() - 1]]);
                let b = &pts[k];
                let cross = (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
                if cross < 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(k);
        }

        let threshold = gmin - self.epsilon * (gmin.abs() + 1e-8);
        let mut out = Vec::new();
        for (h, &k) in hull.iter().enumerate() {
            let (d, g, ref members) = pts[k];
            let ok = match hull.get(h + 1) {
                None => true,
                Some(&next) => {
                    let slope = (pts[next].1 - g) / (pts[next].0 - d);
                    g - slope * d <= threshold
                }
            };
            if ok {
                out.extend(members.iter().copied());
            }
        }
        out
    }

    fn divide(&mut self, idx: usize) {
        let rect = self.rects[idx].clone();
        let kmin = *rect.levels.iter().min().unwrap();
        let delta = 3f64.powi(-(kmin as i32)) / 3.0;
        let long: Vec<usize> = (0..self.dims).filter(|&i| rect.levels[i] == kmin).collect();

        let points: Vec<Vec<f64>> = long
            .iter()
            .flat_map(|&i| {
                [1.0, -1.0].map(|s| {
                    let mut c = rect.center.clone();
                    c[i] += s * delta;
                    c
                })
            })
            .collect();
        let raw: Vec<f64> = points.par_iter().map(|p| (self.f)(p)).collect();
        self.evals += raw.len();
        let values: Vec<f64> = raw.into_iter().map(|v| self.sanitize(v)).collect();

        // Best-first: dimensions whose better child is better get split first
        // and so keep the larger children.
        let mut order: Vec<usize> = (0..long.len()).collect();
        order.sort_by(|&a, &b| {
            let wa = values[2 * a].max(values[2 * a + 1]);
            let wb = values[2 * b].max(values[2 * b + 1]);
            wb.total_cmp(&wa).then(a.cmp(&b))
        });

        let mut levels = rect.levels.clone();
        for &o in &order {
            levels[long[o]] += 1;
            for s in 0..2 {
                self.rects.push(Rectangle {
                    center: points[2 * o + s].clone(),
                    levels: levels.clone(),
                    value: values[2 * o + s],
                });
            }
        }
        self.rects[idx].levels = levels;

        for i in self.rects.len() - 2 * long.len()..self.rects.len() {
            if self.rects[i].value > self.rects[self.best].value {
                self.best = i;
            }
        }
    }

    /// Evaluations needed to trisect rectangle `idx`.
    fn division_cost(&self, idx: usize) -> usize {
        let levels = &self.rects[idx].levels;
        let kmin = *levels.iter().min().unwrap();
        2 * levels.iter().filter(|&&k| k == kmin).count()
    }

    /// Runs one iteration, dividing selected rectangles while the division
    /// fits within `max_evals`. Returns false when nothing could be divided.
    pub fn step(&mut self, max_evals: usize) -> bool {
        let selected = self.potentially_optimal();
        let mut divided = false;
        for idx in selected {
            if self.evals.saturating_add(self.division_cost(idx)) > max_evals {
                break;
            }
            self.divide(idx);
            divided = true;
        }
        if divided {
            self.iterations += 1;
        }
        divided
    }
}

/// Maximizes `f` over the unit cube within `budget`.
///
/// The evaluation count never exceeds `max_evals`; the search stops at
/// the first trisection that would.
pub fn direct_maximize<F>(f: F, dims: usize, budget: &DirectBudget) -> Result<DirectResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if budget.max_evals == 0 || budget.max_iters == 0 {
        return Err(Error::arg("DIRECT budget must allow at least one evaluation and iteration"));
    }
    let mut search = DirectSearch::new(f, dims, budget.epsilon)?;
    let mut trace = vec![TracePoint {
        iteration: 0,
        evals: search.evals(),
        incumbent: search.best().value,
    }];
    while search.evals() < budget.max_evals && search.iterations() < budget.max_iters {
        if !search.step(budget.max_evals) {
            break;
        }
        trace.push(TracePoint {
            iteration: search.iterations(),
            evals: search.evals(),
            incumbent: search.best().value,
        });
    }
    let best = search.best().clone();
    Ok(DirectResult {
        best_x: best.center,
        best_value: best.value,
        evals: search.evals(),
        iterations: search.iterations(),
        trace,
        non_finite: search.non_finite,
    })
}

/// Writes a DIRECT trace as CSV `(iteration, evals, incumbent)`.
pub fn write_trace_csv<W: std::io::Write>(trace: &[TracePoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["iteration", "evals", "incumbent"])?;
    for t in trace {
        w.write_record([t.iteration.to_string(), t.evals.to_string(), t.incumbent.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_evaluation_is_the_centre() {
        let seen = std::sync::Mutex::new(Vec::new());
        let f = |x: &[f64]| {
            seen.lock().unwrap().push(x.to_vec());
            -x.iter().map(|v| v * v).sum::<f64>()
        };
        direct_maximize(f, 3, &DirectBudget::evals(20)).unwrap();
        assert_eq!(seen.lock().unwrap()[0], vec![0.5; 3]);
    }

    #[test]
    fn quadratic_1d() {
        let r = direct_maximize(|x| -(x[0] - 0.3).powi(2), 1, &DirectBudget::evals(200)).unwrap();
        assert!((r.best_x[0] - 0.3).abs() <= 1e-3, "{:?}", r.best_x);
        assert!(r.evals <= 200);
    }

    #[test]
    fn budget_is_a_hard_cap() {
        for d in 1..5 {
            for budget in [7, 50, 133] {
                let r = direct_maximize(|x| x.iter().map(|v| (7.0 * v).sin()).sum(), d, &DirectBudget::evals(budget)).unwrap();
                assert!(r.evals <= budget, "d={d} budget={budget} evals={}", r.evals);
            }
        }
    }

    #[test]
    fn partition_and_monotone_incumbent() {
        let f = |x: &[f64]| -((x[0] - 0.7).powi(2) + 3.0 * (x[1] - 0.2).powi(2)) + (9.0 * x[0]).cos() * 0.1;
        let mut s = DirectSearch::new(f, 2, 1e-4).unwrap();
        let mut last = s.best().value;
        for _ in 0..30 {
            s.step(usize::MAX);
            let vol: f64 = s.rectangles().iter().map(|r| r.volume()).sum();
            assert!((vol - 1.0).abs() < 1e-12);
            assert!(s.best().value >= last);
            last = s.best().value;
            for r in s.rectangles() {
                for (c, side) in r.center.iter().zip(r.side_lengths()) {
                    assert!(*c - side / 2.0 >= -1e-12 && *c + side / 2.0 <= 1.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn non_finite_values_are_never_selected() {
        let f = |x: &[f64]| if x[0] > 0.6 { f64::NAN } else { -(x[0] - 0.2).powi(2) };
        let r = direct_maximize(f, 1, &DirectBudget::evals(100)).unwrap();
        assert!(r.non_finite > 0);
        assert!((r.best_x[0] - 0.2).abs() < 1e-2);
    }

    #[test]
    fn deterministic_sequence() {
        let f = |x: &[f64]| (5.0 * x[0]).sin() * (3.0 * x[1]).cos();
        let a = direct_maximize(f, 2, &DirectBudget::evals(300)).unwrap();
        let b = direct_maximize(f, 2, &DirectBudget::evals(300)).unwrap();
        assert_eq!(a.best_x, b.best_x);
        assert_eq!(a.trace, b.trace);
    }
}
