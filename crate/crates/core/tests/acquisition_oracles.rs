mod common;

use common::*;
use hrmsbo_core::acquisition::{
    ei_closed_form, select_batch_qei, select_batch_thompson, select_batch_ucb_pe, select_ucb, thompson_select,
    ucb_acquisition, DISTINCT_TOL,
};
use hrmsbo_core::direct::DirectBudget;
use hrmsbo_core::space::unit_grid;
use hrmsbo_core::{Dataset, GpModel, MaternHyperparams};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Monte-Carlo estimate and standard error of E[max(y_best - Y, 0)].
fn ei_monte_carlo<R: Rng>(mean: f64, sd: f64, y_best: f64, draws: usize, rng: &mut R) -> (f64, f64) {
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..draws {
        let y = mean + sd * rng.sample::<f64, _>(StandardNormal);
        let imp = (y_best - y).max(0.0);
        s += imp;
        s2 += imp * imp;
    }
    let n = draws as f64;
    let m = s / n;
    (m, ((s2 / n - m * m).max(0.0) / n).sqrt())
}

#[test]
fn ei_closed_form_agrees_with_monte_carlo() {
    let mut r = rng(31);
    for _ in 0..20 {
        let mean = r.random_range(-3.0..3.0);
        let sd = r.random_range(0.05..3.0);
        // Gaps beyond a few sd leave the Monte-Carlo oracle without a
        // single improving draw.
        let y_best = mean + sd * r.random_range(-3.0..3.0);
        let (mc, se) = ei_monte_carlo(mean, sd, y_best, 200_000, &mut r);
        let cf = ei_closed_form(mean, sd, y_best);
        assert!((cf - mc).abs() <= 3.0 * se + 1e-12, "({mean}, {sd}, {y_best}): {cf} vs {mc} ± {se}");
    }
}

fn fit(x: &[f64], f: &[f64], h: &MaternHyperparams) -> GpModel {
    let data = Dataset::from_rows(1, x.iter().map(|v| vec![*v]).collect(), f.to_vec()).unwrap();
    GpModel::fit(&data, h).unwrap()
}

#[test]
fn thompson_returns_dominant_training_point() {
    // Noise-free point far below the prior mean: every draw is pinned
    // there and unlikely to dip as low anywhere else. The grid is a fresh
    // Latin hypercube, so a hit is a pick within a quarter length-scale.
    let h = MaternHyperparams::isotropic(0.0, 1.0, 0.1, 0.0).unwrap();
    let model = fit(&[0.5], &[-10.0], &h);
    let mut r = rng(5);
    let hits = (0..200)
        .filter(|_| (thompson_select(&model, 1000, &mut r).unwrap()[0] - 0.5).abs() <= 0.025)
        .count();
    assert!(hits >= 180, "{hits}/200");
}

/// Two wells, the left one much deeper.
fn two_well_model() -> GpModel {
    let x: Vec<f64> = (0..15).map(|i| i as f64 / 14.0).collect();
    let f: Vec<f64> = x
        .iter()
        .map(|v| -3.0 * (-(v - 0.25f64).powi(2) / 0.01).exp() - 1.0 * (-(v - 0.75f64).powi(2) / 0.01).exp())
        .collect();
    fit(&x, &f, &MaternHyperparams::isotropic(1e-4, 2.0, 0.15, 0.0).unwrap())
}

/// Interval of the posterior-mean minimizer bounded by the nearest local
/// maxima of the mean on a fine grid.
fn mean_basin(model: &GpModel) -> (f64, f64) {
    let xs: Vec<f64> = (0..=2000).map(|i| i as f64 / 2000.0).collect();
    let m: Vec<f64> = xs.iter().map(|x| model.predict_mean(&[*x])).collect();
    let imin = (0..m.len()).fold(0, |b, i| if m[i] < m[b] { i } else { b });
    let mut lo = imin;
    while lo > 0 && m[lo - 1] >= m[lo] {
        lo -= 1;
    }
    let mut hi = imin;
    while hi + 1 < m.len() && m[hi + 1] >= m[hi] {
        hi += 1;
    }
    (xs[lo], xs[hi])
}

#[test]
fn batch_thompson_concentrates_in_the_deep_basin() {
    let model = two_well_model();
    let (lo, hi) = mean_basin(&model);
    assert!(lo < 0.25 && hi > 0.25 && hi < 0.75, "basin [{lo}, {hi}]");
    let picks = select_batch_thompson(&model, 50, 1000, &mut rng(9)).unwrap();
    let inside = picks.iter().filter(|p| (lo..=hi).contains(&p[0])).count();
    assert!(inside >= 40, "{inside}/50 in [{lo}, {hi}]");
}

#[test]
fn ucb_pe_splits_a_symmetric_pair_of_basins() {
    let x = [0.0, 0.15, 0.35, 0.5, 0.65, 0.85, 1.0];
    let f: Vec<f64> = x.iter().map(|v: &f64| -(-(v - 0.25).powi(2) / 0.01).exp() - (-(v - 0.75).powi(2) / 0.01).exp()).collect();
    let model = fit(&x, &f, &MaternHyperparams::isotropic(1e-3, 1.0, 0.12, 0.0).unwrap());
    let beta = 2.0;
    let budget = DirectBudget::evals(600);
    let picks = select_batch_ucb_pe(&model, 2, beta, &budget).unwrap();

    // Brute-force argmax of the bound in each half of the domain.
    let mesh: Vec<f64> = (0..=4000).map(|i| i as f64 / 4000.0).collect();
    let argmax = |lo: f64, hi: f64| {
        mesh.iter()
            .copied()
            .filter(|v| (lo..=hi).contains(v))
            .fold((f64::NAN, f64::NEG_INFINITY), |b, v| {
                let a = ucb_acquisition(&model, &[v], beta);
                if a > b.1 { (v, a) } else { b }
            })
            .0
    };
    let left = argmax(0.0, 0.5);
    let right = argmax(0.5, 1.0);
    assert!((left + right - 1.0).abs() < 1e-3, "asymmetric mesh optimum {left} {right}");
    let mut got = [picks[0][0], picks[1][0]];
    got.sort_by(f64::total_cmp);
    assert!((got[0] - left).abs() < 0.02 && (got[1] - right).abs() < 0.02, "{got:?} vs ({left}, {right})");
}

/// Joint expected improvement of a batch, by Monte Carlo over the dense
/// joint posterior, using shared normals.
fn joint_ei(data: &Dataset, h: &MaternHyperparams, batch: &[Vec<f64>], y_best: f64, z: &[Vec<f64>]) -> f64 {
    let d = dense(data, h);
    let q = batch.len();
    let kxb = DMatrix::from_fn(data.len(), q, |i, j| matern32(&data.x()[i], &batch[j], h));
    let kbb = DMatrix::from_fn(q, q, |i, j| matern32(&batch[i], &batch[j], h) + if i == j { 1e-12 } else { 0.0 });
    let mean: DVector<f64> = DVector::from_element(q, h.mean) + kxb.transpose() * &d.kinv * &d.resid;
    let cov = kbb - kxb.transpose() * &d.kinv * &kxb;
    let l = cov.cholesky().expect("PD batch covariance").l();
    z.iter()
        .map(|zz| {
            let y = &mean + &l * DVector::from_column_slice(&zz[..q]);
            (y_best - y.min()).max(0.0)
        })
        .sum::<f64>()
        / z.len() as f64
}

#[test]
fn greedy_qei_beats_random_batches() {
    let mut r = rng(77);
    let q = 3;
    let z: Vec<Vec<f64>> = (0..100_000).map(|_| (0..q).map(|_| r.sample(StandardNormal)).collect()).collect();
    for case in 0..10 {
        let dims = 1 + case % 2;
        let data = random_dataset(&mut r, dims, 8);
        let h = random_hyper(&mut r, dims, false);
        let model = GpModel::fit(&data, &h).unwrap();
        let y_best = data.best().unwrap().1;
        let batch = select_batch_qei(&model, q, y_best, &DirectBudget::for_dims(dims)).unwrap();
        let greedy = joint_ei(&data, &h, &batch, y_best, &z);
        for _ in 0..3 {
            let random: Vec<Vec<f64>> = (0..q).map(|_| (0..dims).map(|_| r.random()).collect()).collect();
            let baseline = joint_ei(&data, &h, &random, y_best, &z);
            assert!(greedy >= baseline, "case {case}: greedy {greedy} < random {baseline}");
        }
    }
}

#[test]
fn batches_are_distinct_and_in_bounds() {
    let mut r = rng(404);
    for case in 0..20 {
        let dims = 1 + case % 3;
        let data = random_dataset(&mut r, dims, 6 + case % 5);
        let h = random_hyper(&mut r, dims, case % 2 == 1);
        let model = GpModel::fit(&data, &h).unwrap();
        let budget = DirectBudget::for_dims(dims);
        let y_best = data.best().unwrap().1;
        for batch in [
            select_batch_ucb_pe(&model, 5, 2.0, &budget).unwrap(),
            select_batch_qei(&model, 5, y_best, &budget).unwrap(),
        ] {
            assert_eq!(batch.len(), 5);
            for (i, a) in batch.iter().enumerate() {
                assert!(a.iter().all(|v| (0.0..=1.0).contains(v)));
                for b in &batch[..i] {
                    let gap = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                    assert!(gap > DISTINCT_TOL, "case {case}: duplicate {a:?}");
                }
            }
        }
    }
}

#[test]
fn ucb_prefers_unexplored_regions_when_beta_is_large() {
    let model = fit(&[0.1, 0.2, 0.3], &[0.0, 0.1, 0.0], &MaternHyperparams::isotropic(1e-3, 1.0, 0.1, 0.0).unwrap());
    let x = select_ucb(&model, 50.0, &DirectBudget::evals(300)).unwrap();
    assert!(x[0] > 0.5, "{x:?}");
    let grid = unit_grid(1, 11).unwrap();
    assert!(grid.iter().all(|g| ucb_acquisition(&model, g, 50.0) <= ucb_acquisition(&model, &x, 50.0) + 1e-9));
}
