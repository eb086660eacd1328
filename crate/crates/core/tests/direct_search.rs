use hrmsbo_core::direct::{direct_maximize, DirectBudget, DirectSearch};
use hrmsbo_core::objectives::ackley_mean;
use hrmsbo_core::SearchSpace;

fn ackley2_space() -> SearchSpace {
    SearchSpace::new(vec![-32.768, -12.21], vec![32.768, 32.768]).unwrap()
}

#[test]
fn unimodal_quadratic_within_two_hundred_evals() {
    let res = direct_maximize(|x: &[f64]| -(x[0] - 0.3).powi(2), 1, &DirectBudget::evals(200)).unwrap();
    assert!(res.evals <= 200);
    assert!((res.best_x[0] - 0.3).abs() <= 1e-3, "{:?}", res.best_x);
}

#[test]
fn shifted_quadratic_in_three_dimensions() {
    let target = [0.12, 0.77, 0.5];
    let f = |x: &[f64]| -x.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    let res = direct_maximize(f, 3, &DirectBudget::evals(3000)).unwrap();
    let err = res.best_x.iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 5e-3, "{:?}", res.best_x);
}

#[test]
fn deterministic_ackley_reaches_global_basin() {
    let space = ackley2_space();
    let f = |u: &[f64]| -ackley_mean(&space.from_unit(u).unwrap());
    let res = direct_maximize(f, 2, &DirectBudget::evals(5000)).unwrap();
    assert!(res.evals <= 5000);
    assert!(-res.best_value <= 1.0, "best {}", -res.best_value);
    let x = space.from_unit(&res.best_x).unwrap();
    // Every non-global local minimum of Ackley exceeds 2.5.
    assert!(x.iter().all(|v| v.abs() < 0.5), "{x:?}");
}

#[test]
fn partition_volume_and_monotone_incumbent_every_iteration() {
    let space = ackley2_space();
    let f = |u: &[f64]| -ackley_mean(&space.from_unit(u).unwrap());
    let mut search = DirectSearch::new(f, 2, 1e-4).unwrap();
    let mut last = search.best().value;
    while search.evals() < 2000 && search.step(2000) {
        let vol: f64 = search.rectangles().iter().map(|r| r.volume()).sum();
        assert!((vol - 1.0).abs() < 1e-12, "volume {vol} at iteration {}", search.iterations());
        let best = search.best().value;
        assert!(best >= last);
        assert_eq!(best, search.rectangles().iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max));
        last = best;
    }
}

#[test]
fn rejects_empty_budget() {
    assert!(direct_maximize(|_: &[f64]| 0.0, 2, &DirectBudget::evals(0)).is_err());
    assert!(direct_maximize(|_: &[f64]| 0.0, 0, &DirectBudget::evals(10)).is_err());
}
