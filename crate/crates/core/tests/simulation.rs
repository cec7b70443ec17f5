use heston_lda::mc::stats::{variance_estimate, MeanEstimate};
use heston_lda::mc::{decay_slope, path_rng, stopping_time_with_level, ProbEstimate};
use heston_lda::path::VariancePathSimulator;
use heston_lda::{
    ergodic_check, estimate_prob, functional_value, ldp_check, log_mgf_full, martingale_check,
    stopping_time_experiment, CirTransition, Direction, FunctionalCoeffs, McSettings, MgfQuery, ModelParams, Speed,
    TailQuery,
};
use rayon::prelude::*;

fn base() -> ModelParams {
    ModelParams {
        mu: 0.05,
        r: 0.0,
        a: 2.0,
        b: 1.0,
        sigma: 0.5,
        rho: -0.5,
        v0: 1.0,
        s0: 1.0,
        lambda: 1.0,
    }
}

fn draws(tr: &CirTransition, v: f64, n: u64, seed: u64) -> Vec<f64> {
    (0..n)
        .into_par_iter()
        .map(|i| tr.sample(v, &mut path_rng(seed, i)).unwrap())
        .collect()
}

fn tail(coeffs: FunctionalCoeffs, threshold: f64, t: f64, n_paths: u64, spu: f64, seed: u64) -> TailQuery {
    TailQuery {
        coeffs,
        threshold,
        direction: Direction::AtLeast,
        t,
        speed: Speed::Linear,
        n_paths,
        n_steps: ((t * spu).ceil() as usize).max(1),
        seed,
    }
}

#[test]
fn exact_step_moments() {
    let p = base();
    let tr = CirTransition::new(&p, 1.0).unwrap();
    assert!((tr.conditional_mean(1.0) - 1.632121).abs() < 5e-7);
    let xs = draws(&tr, 1.0, 200_000, 3);
    let m = MeanEstimate::from_samples(&xs);
    assert!(m.within(1.632121, 4.0), "mean {m:?}");
    let v = variance_estimate(&xs);
    assert!(v.within(tr.conditional_variance(1.0), 4.0), "variance {v:?}");
}

#[test]
fn stationary_law_after_long_step() {
    let p = base();
    let tr = CirTransition::new(&p, 200.0).unwrap();
    let xs = draws(&tr, 1.0, 200_000, 5);
    assert!(MeanEstimate::from_samples(&xs).within(2.0, 4.0));
    assert!(variance_estimate(&xs).within(1.0, 4.0));
}

#[test]
fn refining_the_grid_moves_int_v_only_slightly() {
    let p = base();
    let coarse = VariancePathSimulator::new(&p, 5.0, 50, false).unwrap();
    let fine = VariancePathSimulator::new(&p, 5.0, 100, false).unwrap();
    let n = 20_000;
    let mean = |sim: &VariancePathSimulator| {
        let xs: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| sim.simulate(&mut path_rng(9, i)).unwrap().int_v)
            .collect();
        MeanEstimate::from_samples(&xs)
    };
    let (c, f) = (mean(&coarse), mean(&fine));
    // E[int V] is the same for both grids up to trapezoid bias of order h^2
    assert!(
        (c.mean - f.mean).abs() < 4.0 * (c.stderr + f.stderr) + 0.01,
        "{c:?} {f:?}"
    );
}

#[test]
fn ergodic_averages() {
    let s = McSettings {
        n_paths: 1000,
        steps_per_unit: 10.0,
        seed: 42,
    };
    let r = ergodic_check(200.0, &s, &base()).unwrap();
    assert!(r.avg_v.within(2.0, 4.0), "{:?}", r.avg_v);
    let inv = r.avg_inv_v.unwrap();
    assert!(inv.within(2.0 / 3.0, 4.0), "{inv:?}");
    assert!(r.terminal_mean.within(2.0, 4.0));
    assert!(r.terminal_variance.within(1.0, 4.0));
}

#[test]
fn ergodic_requires_mean_reversion() {
    let s = McSettings {
        n_paths: 100,
        steps_per_unit: 10.0,
        seed: 1,
    };
    assert!(ergodic_check(10.0, &s, &ModelParams { b: 0.0, ..base() }).is_err());
}

#[test]
fn density_is_a_martingale() {
    let s = McSettings {
        n_paths: 100_000,
        steps_per_unit: 20.0,
        seed: 42,
    };
    let p = ModelParams { lambda: 0.1, ..base() };
    let r = martingale_check(5.0, &s, &p).unwrap();
    assert!(r.z_vs_one.abs() <= 3.0, "{r:?}");
    assert!(r.z_vs_closed_form.unwrap().abs() <= 3.0, "{r:?}");
    assert!(r.supermartingale_deficit.is_none());

    let zero = martingale_check(5.0, &s, &ModelParams { lambda: 0.0, ..base() }).unwrap();
    assert_eq!(zero.mc.mean, 1.0);
    assert_eq!(zero.mc.stderr, 0.0);
}

#[test]
fn tail_probability_examples() {
    let p = base();
    let int_v = FunctionalCoeffs::new(0.0, 1.0, 0.0);
    let certain = estimate_prob(&tail(int_v, f64::NEG_INFINITY, 1.0, 100, 10.0, 1), &p).unwrap();
    assert_eq!(certain.p_hat, 1.0);

    let median = estimate_prob(&tail(int_v, 2.0, 200.0, 2000, 10.0, 2), &p).unwrap();
    assert!((median.p_hat - 0.5).abs() <= 0.1, "{median:?}");

    // (1/t) int gamma_1^2 = lambda^2 int V / t with lambda = 1, level 3 above a lambda^2/b = 2
    let rare = estimate_prob(&tail(int_v, 3.0, 50.0, 2000, 10.0, 3), &p).unwrap();
    assert!(rare.p_hat < 0.01, "{rare:?}");
}

#[test]
fn no_decay_on_a_certain_limit_event() {
    let p = base();
    let int_v = FunctionalCoeffs::new(0.0, 1.0, 0.0);
    let queries: Vec<TailQuery> = [2.0, 4.0, 6.0, 8.0]
        .iter()
        .enumerate()
        .map(|(k, &t)| tail(int_v, 1.0, t, 20_000, 10.0, 100 + k as u64))
        .collect();
    let d = decay_slope(&queries, &p).unwrap();
    // p rises toward one, so the slope is slightly negative; no positive decay
    assert!(d.slope < 2.0 * d.stderr, "{d:?}");
    assert!(d.slope.abs() < 0.02, "{d:?}");
}

#[test]
fn zero_rate_point_skips_the_decay_check() {
    let s = McSettings {
        n_paths: 100,
        steps_per_unit: 10.0,
        seed: 1,
    };
    let r = ldp_check(
        &FunctionalCoeffs::new(0.0, 1.0, 0.0),
        2.0,
        &[1.0, 2.0, 3.0, 4.0],
        &s,
        &base(),
    )
    .unwrap();
    assert_eq!(r.theory, 0.0);
    assert!(r.note.unwrap().contains("zero-rate point"));
    assert!(r.points.is_empty());
}

#[test]
fn ldp_check_reports_censoring_instead_of_a_slope() {
    let s = McSettings {
        n_paths: 200,
        steps_per_unit: 10.0,
        seed: 1,
    };
    let r = ldp_check(
        &FunctionalCoeffs::new(0.0, 1.0, 0.0),
        6.0,
        &[5.0, 10.0, 15.0, 20.0],
        &s,
        &base(),
    )
    .unwrap();
    assert!(r.decay.is_none());
    assert!(r.censored.is_some());
    assert!((r.theory - 16.0 / 12.0).abs() < 1e-9, "{}", r.theory);
}

#[test]
fn full_mgf_against_monte_carlo() {
    let p = base();
    let cases = [
        (FunctionalCoeffs::new(0.0, 1.0, -1.0), 0.25, 1.0),
        (FunctionalCoeffs::new(0.3, 0.2, 0.5), 0.4, 2.0),
        (FunctionalCoeffs::new(0.0, 0.0, 1.0), 0.3, 3.0),
    ];
    for (k, &(coeffs, u, t)) in cases.iter().enumerate() {
        let sim = VariancePathSimulator::new(&p, t, (100.0 * t) as usize, true).unwrap();
        let xs: Vec<f64> = (0..50_000u64)
            .into_par_iter()
            .map(|i| {
                let rec = sim.simulate(&mut path_rng(k as u64, i)).unwrap();
                (u * functional_value(&rec, &coeffs).unwrap()).exp()
            })
            .collect();
        let m = MeanEstimate::from_samples(&xs);
        let closed = log_mgf_full(&MgfQuery { coeffs, t, u }, &p).unwrap().exp();
        assert!(
            m.within(closed, 4.0),
            "{coeffs:?} u={u} t={t}: mc {m:?} closed {closed}"
        );
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let p = base();
    let q = tail(FunctionalCoeffs::new(0.0, 1.0, 0.0), 2.2, 5.0, 3000, 10.0, 11);
    let s = McSettings {
        n_paths: 500,
        steps_per_unit: 10.0,
        seed: 11,
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let e: ProbEstimate = estimate_prob(&q, &p).unwrap();
            let g = ergodic_check(20.0, &s, &p).unwrap();
            let m = martingale_check(2.0, &s, &p).unwrap();
            (e, g, m)
        })
    };
    let one = run(1);
    for threads in [4, 16] {
        let other = run(threads);
        assert_eq!(one.0, other.0);
        assert_eq!(one.1, other.1);
        assert_eq!(one.2, other.2);
    }
}

#[test]
fn stopped_density_stays_within_the_chebyshev_bound() {
    let p = base();
    let s = McSettings {
        n_paths: 4000,
        steps_per_unit: 10.0,
        seed: 42,
    };
    // c1/2 = a lambda^2/(2b) = 1
    let sets = [(0.1, 0.3), (0.2, 0.5), (0.05, 0.6), (0.3, 0.8), (0.01, 0.02)];
    for &(gamma, gamma_bar) in &sets {
        let r = stopping_time_experiment(gamma, gamma_bar, 10.0, 100.0, &s, &p).unwrap();
        assert!(r.within_bound, "{r:?}");
        assert!(
            r.event.p_hat <= r.bound + 3.0 * (r.event.ci_hi - r.event.p_hat),
            "{r:?}"
        );
    }
}

#[test]
fn stopped_event_probability_falls_with_the_horizon() {
    let p = base();
    let s = McSettings {
        n_paths: 20_000,
        steps_per_unit: 10.0,
        seed: 42,
    };
    let short = stopping_time_experiment(0.01, 0.02, 10.0, 100.0, &s, &p).unwrap();
    let long = stopping_time_experiment(0.01, 0.02, 20.0, 400.0, &s, &p).unwrap();
    assert!(
        long.event.ci_hi < short.event.ci_lo,
        "{:?} vs {:?}",
        short.event,
        long.event
    );
}

#[test]
fn stopped_density_without_risk_premium() {
    let p = ModelParams { lambda: 0.0, ..base() };
    let s = McSettings {
        n_paths: 200,
        steps_per_unit: 10.0,
        seed: 1,
    };
    // Z = 1, so the event {log Z >= (gamma_bar - gamma) f} never occurs for gamma < gamma_bar
    let r = stopping_time_with_level(0.1, 0.2, 0.3, 5.0, 20.0, &s, &p).unwrap();
    assert_eq!(r.event.p_hat, 0.0);
    assert_eq!(r.mean_stopping_time, 20.0);
}

/// Lower-tail decay for `beta = delta = 1`, `x = 2.5`. The rate is about
/// 0.018, so probabilities only become small at horizons of several hundred.
#[test]
fn ldp_lower_tail_with_inverse_integral() {
    let s = McSettings {
        n_paths: 20_000,
        steps_per_unit: 5.0,
        seed: 42,
    };
    let r = ldp_check(
        &FunctionalCoeffs::new(0.0, 1.0, 1.0),
        2.5,
        &[100.0, 200.0, 300.0, 400.0],
        &s,
        &base(),
    )
    .unwrap();
    let d = r.decay.expect("resolvable probabilities");
    assert!(
        r.relative_deviation.unwrap().abs() <= 0.25,
        "slope {} theory {}",
        d.slope,
        r.theory
    );
}
