mod common;

use common::*;
use nalgebra::DVector;
use rand::Rng;
use selinf::events::{
    coefficient_contrast, covariance_test_bounds, first_knot_event, lasso_event, null_scores,
    score_covariance, GlmFamily, StateLabel,
};
use selinf::lasso::solve_lasso;
use selinf::truncnorm::{
    confidence_interval, truncated_gaussian_cdf, truncation_interval, two_sided_pivot, PivotInputs,
    TruncationInterval,
};
use selinf::{DesignMatrix, Error};

fn random_instance(seed: u64, n: usize, p: usize) -> (DesignMatrix, DVector<f64>) {
    let mut r = rng(seed);
    let x = gaussian_design(&mut r, n, p).normalize_columns().unwrap();
    let mut beta = DVector::zeros(p);
    beta[0] = 2.0;
    let y = x.values() * beta + gaussian_vector(&mut r, n);
    (x, y)
}

#[test]
fn lasso_matches_exhaustive_sign_search() {
    let mut checked = 0;
    for seed in 0..300 {
        let (x, y) = random_instance(seed, 8, 4);
        let top = x.xt_times(&y).unwrap().amax();
        let lambda = rng(10_000 + seed).random_range(0.05..1.1) * top;
        let BruteLasso::State(active, signs) = brute_force_lasso(&x, &y, lambda, 1e-7) else {
            continue;
        };
        let fit = solve_lasso(&x, &y, lambda).unwrap();
        assert!(fit.same_state(&active, &signs), "seed {seed}: {:?} vs {active:?}", fit.active);
        if !active.is_empty() {
            let shift: Vec<f64> = signs.iter().map(|&s| lambda * f64::from(s)).collect();
            let yv: Vec<f64> = y.iter().copied().collect();
            let beta_e = normal_equations(&x, &active, &shift, &yv).unwrap();
            for (k, &j) in active.iter().enumerate() {
                assert!((fit.beta[j] - beta_e[k]).abs() < 1e-8, "seed {seed} coefficient {j}");
            }
        }
        checked += 1;
    }
    assert!(checked >= 250, "only {checked} unambiguous instances");
}

#[test]
fn contrast_matches_normal_equations() {
    for seed in 0..50 {
        let (x, y) = random_instance(seed, 12, 5);
        let active = vec![0, 2, 3];
        let yv: Vec<f64> = y.iter().copied().collect();
        let coef = normal_equations(&x, &active, &[0.0; 3], &yv).unwrap();
        for (k, &j) in active.iter().enumerate() {
            let eta = coefficient_contrast(&x, &active, j).unwrap();
            assert!((eta.dot(&y) - coef[k]).abs() < 1e-10);
        }
    }
}

#[test]
fn lasso_interval_matches_solver_line_search() {
    let mut checked = 0;
    for seed in 0..80 {
        let (x, y) = random_instance(500 + seed, 10, 4);
        let lambda = 0.5 * x.xt_times(&y).unwrap().amax();
        let fit = solve_lasso(&x, &y, lambda).unwrap();
        if fit.active.is_empty() {
            continue;
        }
        let event = lasso_event(&x, &fit.active, &fit.signs, lambda).unwrap();
        let eta = coefficient_contrast(&x, &fit.active, fit.active[0]).unwrap();
        let sigma = DVector::from_element(10, 1.0);
        let (iv, geom) = truncation_interval(&event, &sigma, &eta, &y).unwrap();

        let c = &eta / eta.norm_squared();
        let inside = |t: f64| {
            let yt = along(&y, &c, geom.observed, t);
            solve_lasso(&x, &yt, lambda)
                .map(|f| f.same_state(&fit.active, &fit.signs))
                .unwrap_or(false)
        };
        let lower = line_search_edge(inside, geom.observed, -1.0, 1e4, 1e-10);
        let upper = line_search_edge(inside, geom.observed, 1.0, 1e4, 1e-10);
        for (got, want) in [(iv.lower, lower), (iv.upper, upper)] {
            if want.is_infinite() {
                assert_eq!(got, want, "seed {seed}");
            } else {
                assert!((got - want).abs() < 1e-7 * (1.0 + want.abs()), "seed {seed}: {got} vs {want}");
            }
        }
        checked += 1;
    }
    assert!(checked >= 60);
}

#[test]
fn first_knot_matches_score_scan() {
    for (seed, family) in (0..60).zip([GlmFamily::Gaussian, GlmFamily::Bernoulli, GlmFamily::Poisson].iter().cycle()) {
        let mut r = rng(900 + seed);
        let x = gaussian_design(&mut r, 9, 5);
        let y = gaussian_vector(&mut r, 9);
        let shift = match family {
            GlmFamily::Gaussian => 0.0,
            GlmFamily::Bernoulli => 0.5,
            GlmFamily::Poisson => 1.0,
        };
        let mut best = (0, 0.0f64);
        for j in 0..5 {
            let s: f64 = (0..9).map(|i| x.values()[(i, j)] * (y[i] - shift)).sum();
            if s.abs() > best.1.abs() {
                best = (j, s);
            }
        }
        let knot = first_knot_event(&x, &y, *family).unwrap();
        assert_eq!(knot.index, best.0);
        assert_eq!(f64::from(knot.sign), best.1.signum());
        assert!((knot.lambda1 - best.1.abs()).abs() < 1e-12);
        assert!(knot.event.contains(&y).unwrap());
    }
}

#[test]
fn score_covariance_matches_triple_loop() {
    let mut r = rng(31);
    let x = gaussian_design(&mut r, 7, 4);
    let sigma = DVector::from_fn(7, |_, _| r.random_range(0.5..2.0));
    let theta = score_covariance(&x, &sigma).unwrap().theta;
    for j in 0..4 {
        for k in 0..4 {
            let mut want = 0.0;
            for i in 0..7 {
                want += x.values()[(i, j)] * sigma[i] * x.values()[(i, k)];
            }
            assert!((theta[(j, k)] - want).abs() < 1e-12);
        }
    }
}

/// Bounds by scanning every `(k, s)` ratio with explicitly looped sums.
fn ratio_scan(x: &DesignMatrix, y: &DVector<f64>, sigma: &DVector<f64>, j: usize, sj: f64, shift: f64) -> (f64, f64) {
    let (n, p) = (x.n(), x.p());
    let xv = x.values();
    let theta = |a: usize, b: usize| (0..n).map(|i| xv[(i, a)] * sigma[i] * xv[(i, b)]).sum::<f64>();
    let score = |a: usize| (0..n).map(|i| xv[(i, a)] * (y[i] - shift)).sum::<f64>();
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for k in (0..p).filter(|&k| k != j) {
        let ratio = theta(j, k) / theta(j, j);
        for s in [1.0, -1.0] {
            let num = s * (score(k) - ratio * score(j));
            let den = 1.0 - s * sj * ratio;
            if den.abs() <= 1e-12 {
                continue;
            }
            let v = num / den;
            if den > 0.0 {
                lo = lo.max(v);
            } else {
                hi = hi.min(v);
            }
        }
    }
    (lo, hi)
}

#[test]
fn covtest_bounds_match_ratio_scan_and_general_interval() {
    for seed in 0..60 {
        let mut r = rng(4000 + seed);
        let x = gaussian_design(&mut r, 12, 6).normalize_columns().unwrap();
        let y = gaussian_vector(&mut r, 12);
        let sigma = DVector::from_fn(12, |_, _| r.random_range(0.5..1.5));
        let family = if seed % 2 == 0 { GlmFamily::Gaussian } else { GlmFamily::Poisson };
        let shift = family.null_mean();
        let knot = match first_knot_event(&x, &y, family) {
            Ok(k) => k,
            Err(Error::DegenerateSelection { .. }) => continue,
            Err(e) => panic!("{e}"),
        };
        let label = StateLabel::Knot { index: knot.index, sign: knot.sign };
        let bounds = covariance_test_bounds(&x, &y, &sigma, &label, family).unwrap();
        let sj = f64::from(knot.sign);
        let (lo, hi) = ratio_scan(&x, &y, &sigma, knot.index, sj, shift);
        let close = |a: f64, b: f64| a == b || (a - b).abs() < 1e-9 * (1.0 + b.abs());
        assert!(close(bounds.lower, lo) && close(bounds.upper, hi), "seed {seed}");
        assert!(bounds.lower <= knot.lambda1 && knot.lambda1 <= bounds.upper);

        // same interval from the polyhedral route, in the centered scale
        let centered = y.add_scalar(-shift);
        let eta = x.values().column(knot.index) * sj;
        let event = first_knot_event(&x, &centered, GlmFamily::Gaussian).unwrap().event;
        let (iv, geom) = truncation_interval(&event, &sigma, &eta, &centered).unwrap();
        assert!((geom.observed - knot.lambda1).abs() < 1e-12);
        assert!(close(iv.lower, bounds.lower) && close(iv.upper, bounds.upper), "seed {seed}: {iv:?} vs {bounds:?}");

        // and from moving the data and re-running the selection
        let sigma_eta = sigma.component_mul(&eta);
        let c = &sigma_eta / eta.dot(&sigma_eta);
        let inside = |t: f64| {
            let yt = along(&centered, &c, knot.lambda1, t);
            let scores = null_scores(&x, &yt, GlmFamily::Gaussian).unwrap();
            let top = scores.iamax();
            top == knot.index && scores[top].signum() == sj
        };
        let lower = line_search_edge(inside, knot.lambda1, -1.0, 1e4, 1e-11);
        let upper = line_search_edge(inside, knot.lambda1, 1.0, 1e4, 1e-11);
        let near = |a: f64, b: f64| a == b || (a - b).abs() < 1e-8 * (1.0 + b.abs());
        assert!(near(bounds.lower, lower) && near(bounds.upper, upper), "seed {seed}: line search {lower}, {upper}");
    }
}

#[test]
fn truncated_cdf_matches_quadrature() {
    let f = truncated_gaussian_cdf(0.5, 1.0, 0.0, 0.0, 1.0).unwrap();
    let q = quadrature_truncated_cdf(0.5, 1.0, 0.0, 0.0, 1.0);
    assert!((f - q).abs() < 1e-12);
    assert!((f - 0.5609).abs() < 1e-4);
    let inputs = PivotInputs::new(0.5, 1.0, 0.0, TruncationInterval::new(0.0, 1.0)).unwrap();
    assert!((two_sided_pivot(&inputs).unwrap() - 0.8782).abs() < 1e-4);

    let cases = [
        (8.2, 1.0, 0.0, 8.0, 8.5),
        (-1.0, 4.0, 1.0, -3.0, f64::INFINITY),
        (2.5, 0.25, 3.0, f64::NEG_INFINITY, 2.7),
        (12.0, 1.0, 0.0, 10.0, 30.0),
        (-25.0, 1.0, 0.0, -30.0, -20.0),
    ];
    for (x, v, m, a, b) in cases {
        let f = truncated_gaussian_cdf(x, v, m, a, b).unwrap();
        let q = quadrature_truncated_cdf(x, v, m, a, b);
        assert!((f - q).abs() < 1e-10 && (f - q).abs() <= 1e-6 * q.max(1e-300), "{x} {v} {m} [{a}, {b}]: {f} vs {q}");
    }
}

#[test]
fn interval_limits_solve_their_equations_by_quadrature() {
    let cases = [
        (0.3, 1.0, TruncationInterval::new(-0.5, 2.0)),
        (4.2, 2.0, TruncationInterval::new(4.0, f64::INFINITY)),
        (-1.0, 0.5, TruncationInterval::new(f64::NEG_INFINITY, -0.8)),
    ];
    for (obs, var, iv) in cases {
        let inputs = PivotInputs::new(obs, var, 0.0, iv).unwrap();
        let (lo, hi) = confidence_interval(&inputs, 0.1).unwrap();
        let f_lo = quadrature_truncated_cdf(obs, var, lo, iv.lower, iv.upper);
        let f_hi = quadrature_truncated_cdf(obs, var, hi, iv.lower, iv.upper);
        assert!((f_lo - 0.95).abs() < 1e-7, "{obs}: F at low limit {f_lo}");
        assert!((f_hi - 0.05).abs() < 1e-7, "{obs}: F at high limit {f_hi}");
    }
}
