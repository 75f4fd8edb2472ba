mod common;

use common::{chain, random_model, ring2, zero_weights};
use pjmp::certificates::*;
use pjmp::spectral::poincare_constant;
use pjmp::Error;

fn ring2_certificate(m_box: f64) -> (common::Chain, ConcentrationCertificate, AdmissibleLambda) {
    let net = ring2();
    let c = chain(&net, m_box);
    let c0 = poincare_constant(&c.gen, &c.mu).unwrap().poincare_constant;
    let c3 = SumFunctionC3::new(&net, &c.space, &c.mu.probabilities);
    let adm = admissible_lambda(c0, |l| c3.at(l), DEFAULT_MARGIN, 1e-12).unwrap();
    let cert = ConcentrationCertificate {
        c0,
        c3: adm.c3,
        n0: c3.n0,
        lambda: adm.lambda,
        lambda0: adm.lambda0,
    };
    (c, cert, adm)
}

#[test]
fn path_bound_dominates_optimal_constant() {
    for net in [ring2(), random_model(1), random_model(2), random_model(3)] {
        let c = chain(&net, 4.0);
        let report = path_method_c0(&net, &c.gen, &c.mu.probabilities);
        let gap = poincare_constant(&c.gen, &c.mu).unwrap();
        assert_eq!(report.disconnected_pairs, 0);
        assert!(report.c0_path.unwrap() >= gap.poincare_constant);
    }
}

#[test]
fn ring2_path_lengths() {
    let net = ring2();
    let c = chain(&net, 5.0);
    let report = path_method_c0(&net, &c.gen, &c.mu.probabilities);
    // (k,0) → (0,k) needs k spikes through the other axis, capped at the box
    assert_eq!(report.max_path_length, 5);
    assert_eq!(report.support_size, 10);
}

#[test]
fn single_state_path_report_is_degenerate() {
    let net = zero_weights(2);
    let c = chain(&net, 3.0);
    let report = path_method_c0(&net, &c.gen, &c.mu.probabilities);
    assert!(report.degenerate);
    assert_eq!(report.max_path_length, 0);
    assert_eq!(report.c0_path, None);
}

#[test]
fn c3_for_zero_weights_vanishes() {
    let net = zero_weights(2);
    let c = chain(&net, 3.0);
    let report = compute_c3_sum_function(&net, &c.space, &c.mu.probabilities, 0.5).unwrap();
    assert_eq!(report.c3, 0.0);
    assert!(report.degenerate);
}

#[test]
fn c3_is_monotone_and_tends_to_jump_constant() {
    let net = ring2();
    let c = chain(&net, 10.0);
    let c3 = SumFunctionC3::new(&net, &c.space, &c.mu.probabilities);
    assert_eq!(c3.n0, 1.0);
    assert!((c3.jump_term(1e-12) - 3.0).abs() < 1e-10);
    let mut last = 0.0;
    for k in 1..50 {
        let v = c3.at(k as f64 * 0.2);
        assert!(v >= last);
        last = v;
    }
}

#[test]
fn lambda0_is_stable_under_refinement() {
    for &q in &[0.1, 0.5, 0.9, 0.99] {
        let a = lambda0_product(q, 1.0, 1.0, 1e-12).unwrap();
        let b = lambda0_product(q, 1.0, 1.0, 1e-14).unwrap();
        assert!((a / b - 1.0).abs() <= 1e-10);
        assert!(a >= 1.0);
    }
    let mut last = 1.0;
    for k in 1..100 {
        let v = lambda0_product(k as f64 / 100.0, 1.0, 1.0, 1e-12).unwrap();
        assert!(v > last);
        last = v;
    }
}

#[test]
fn admissible_lambda_on_ring2() {
    let (_, cert, adm) = ring2_certificate(34.0);
    assert!(adm.bisection_width < 1e-12);
    assert!(adm.q >= 0.89 && adm.q <= 0.9, "q = {}", adm.q);
    assert!(cert.q() < 1.0);
    let doubled = admissible_lambda(2.0 * cert.c0, |_| adm.c3, DEFAULT_MARGIN, 1e-12).unwrap();
    assert!(doubled.lambda < adm.lambda);
}

#[test]
fn talagrand_verdict_passes_on_ring2() {
    let (c, cert, _) = ring2_certificate(34.0);
    let f = c.space.tabulate(|x| x.total());
    let grid: Vec<f64> = (0..=12).map(|r| r as f64).collect();
    let report = talagrand_verdict(&cert, &c.mu.probabilities, &f, &grid);
    assert!(report.pass);
    assert!(report.rows[0].bound >= 1.0);
    // the mean-based bound is exactly log-linear with slope −λ
    for w in report.rows.windows(2) {
        let slope = (w[1].bound_mean.ln() - w[0].bound_mean.ln()) / (w[1].r - w[0].r);
        assert!((slope + cert.lambda).abs() < 1e-9);
    }
}

#[test]
fn general_c3_for_constant_and_scaled_functions() {
    let net = ring2();
    let c = chain(&net, 10.0);
    let mu = &c.mu.probabilities;
    let constant = vec![2.0; c.space.len()];
    assert_eq!(
        compute_c3_general(&net, &c.space, &constant, mu, 0.5).unwrap(),
        6.0
    );
    let sum = c.space.tabulate(|x| x.total());
    let h = general_hypotheses(&net, &c.space, &sum, mu, 0.5);
    assert!(!h.hold());
    assert!(matches!(
        compute_c3_general(&net, &c.space, &sum, mu, 0.5),
        Err(Error::HypothesisViolated { .. })
    ));
    let eps = epsilon_star(&net, &c.space, &sum, mu, 0.5);
    assert!(eps > 0.0 && eps.is_finite());
    let scaled = |s: f64| sum.iter().map(|v| v * s).collect::<Vec<_>>();
    assert!(general_hypotheses(&net, &c.space, &scaled(eps * 0.999), mu, 0.5).hold());
    assert!(!general_hypotheses(&net, &c.space, &scaled(eps * 1.001), mu, 0.5).hold());
    assert!(epsilon_star(&net, &c.space, &constant, mu, 0.5).is_infinite());
}

#[test]
fn semigroup_report_on_ring2() {
    let net = ring2();
    let c = chain(&net, 34.0);
    let mu = &c.mu.probabilities;
    let t1 = t1(&net, &c.space, mu).unwrap();
    assert!(t1 > 0.0);
    let inner = 17.0;
    let suite = default_function_suite(&net, &c.space, inner + net.max_weight(), 0);
    assert_eq!(suite.len(), SUITE_SIZE);
    let grid = [t1, 2.0 * t1, 4.0 * t1, 8.0 * t1];
    let opts = SemigroupOptions {
        inner_bound: inner,
        eps: 1e-12,
    };
    let report =
        semigroup_poincare_report(&net, &c.space, &c.gen, mu, &suite, &grid, opts).unwrap();
    assert!((report.theta - 29.556).abs() < 1e-3);
    assert!(report.exponents_pass && report.outside_support.pass);
    assert_eq!(report.outside_support.max_local, 0.0);
    assert!(
        semigroup_poincare_report(&net, &c.space, &c.gen, mu, &suite, &[0.5 * t1], opts).is_err()
    );
}

#[test]
fn lyapunov_d1_is_finite() {
    let net = ring2();
    let c = chain(&net, 20.0);
    let suite: Vec<Vec<f64>> = default_function_suite(&net, &c.space, 11.0, 1)
        .into_iter()
        .map(|f| f.values)
        .collect();
    let d1 = measured_lyapunov_d1(&c.space, &c.gen, &c.mu.probabilities, &suite, 10.0).unwrap();
    assert!(d1.is_finite() && d1 >= 0.0);
}
