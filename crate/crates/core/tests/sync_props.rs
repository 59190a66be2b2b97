mod common;

use neseek::averaging::{lyapunov_trace, squared_distance};
use neseek::linalg::dist;
use neseek::sync::*;
use neseek::{ConstraintSet, Game32, Game64, OscillatorBank, OscillatorBank32, SyncState, SyncState32};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fb_step_contracts_at_the_stated_rate(seed in any::<u64>(), m in 1usize..=8, lambda in 0.05..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = common::random_dims(&mut rng, m);
        let g = common::random_quadratic(&mut rng, &dims);
        let x_star = g.solve_ne_oracle(1e-14).unwrap();
        let gamma = g.mu_f() / (g.lip_l() * g.lip_l());
        prop_assert!(fb_contraction_constant(gamma, g.mu_f(), g.lip_l()) < 1.0);
        let factor = fb_contraction_factor(gamma, g.mu_f(), g.lip_l(), lambda).unwrap();
        let mut x = common::random_point(&mut rng, m, 10.0);
        for _ in 0..50 {
            let next = fb_step(&g, &x, lambda, gamma).unwrap();
            let (d0, d1) = (dist(&x, &x_star), dist(&next, &x_star));
            if d0 < 1e-6 {
                break;
            }
            prop_assert!(d1 * d1 <= factor * d0 * d0 + 1e-10, "ratio {} > {}", d1 * d1 / (d0 * d0), factor);
            x = next;
        }
    }

    #[test]
    fn oracle_zo_reproduces_fb_trajectory(seed in any::<u64>(), alpha in 0.05..1.0f64, beta in 0.05..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = common::random_dims(&mut rng, 4);
        let g = common::random_quadratic(&mut rng, &dims)
            .with_constraints(
                dims.iter().map(|&d| ConstraintSet::new_box(vec![-1.0; d], vec![1.0; d]).unwrap()).collect(),
            )
            .unwrap();
        let gamma = g.mu_f() / (g.lip_l() * g.lip_l());
        let params = SyncZoParams::new(alpha, beta, gamma).unwrap();
        let x0 = g.project(&common::random_point(&mut rng, 4, 2.0));
        let bank = OscillatorBank::new(vec![1.0, 2.0, 3.0, 4.0], vec![0.1; 4]).unwrap();
        let mut state = SyncState::new(x0.clone(), bank).unwrap();
        let mut x = x0;
        for _ in 0..1000 {
            zo_sync_step_in_place(&g, &mut state, &params, GradientSource::Oracle).unwrap();
            x = fb_step(&g, &x, alpha * beta, gamma).unwrap();
            prop_assert!(dist(&state.x, &x) <= 1e-12 * (1.0 + neseek::linalg::norm(&x)));
        }
    }

    #[test]
    fn sync_frequency_validator_matches_residues(w1 in 0.01..12.0f64, w2 in 0.01..12.0f64) {
        let tol = 1e-3;
        let near = |v: f64| {
            let r = v.rem_euclid(std::f64::consts::TAU);
            r.min(std::f64::consts::TAU - r) <= tol
        };
        let expect = near(w1) || near(w2) || near(w1 + w2) || near(w1 - w2);
        prop_assert_eq!(!validate_frequencies_sync(&[w1, w2], tol).is_empty(), expect);
    }
}

#[test]
fn oscillator_pairs_stay_on_the_circle() {
    let freqs: Vec<f64> = (1..=8).map(|j| j as f64 + 0.123 * j as f64).collect();
    let mut bank = OscillatorBank::new(freqs.clone(), vec![0.1; 8]).unwrap();
    for _ in 0..1_000_000 {
        bank.rotate_all();
    }
    assert!(bank.norm_drift() < 1e-6, "drift {}", bank.norm_drift());
    // closed-form orbit: sin slot is sin(−ωk) from phase zero
    for (j, &w) in freqs.iter().enumerate() {
        let (s, _) = bank.pair(j);
        let expect = (-(w * 1e6).rem_euclid(std::f64::consts::TAU)).sin();
        assert!((s - expect).abs() < 1e-6, "pair {j}: {s} vs {expect}");
    }
}

#[test]
fn zo_sync_run_reaches_small_neighborhood() {
    let g = Game64::connectivity(vec![vec![-4.0, -8.0], vec![-12.0, -3.0]], 0.04).unwrap();
    let x_star = g.solve_ne_oracle(1e-14).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let freqs = generate_frequencies_with_margin(&[1; 4], FREQ_TOL, 0.2, &mut rng).unwrap();
    let bank = OscillatorBank::for_game(&g, freqs, &[0.1; 2]).unwrap();
    let params = SyncZoParams::new(0.1, 0.01, 0.5).unwrap();
    let mut state = SyncState::new(vec![0.0; 4], bank).unwrap();
    let mut tail: f64 = 0.0;
    for k in 0..100_000 {
        zo_sync_step_in_place(&g, &mut state, &params, GradientSource::Dither).unwrap();
        if k >= 90_000 {
            tail = tail.max(dist(&state.x, &x_star));
        }
    }
    assert!(tail < 0.05, "tail distance {tail}");
}

#[test]
fn fb_trajectory_has_no_lyapunov_increase() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10 {
        let dims = common::random_dims(&mut rng, 6);
        let g = common::random_quadratic(&mut rng, &dims);
        let x_star = g.solve_ne_oracle(1e-14).unwrap();
        let gamma = g.mu_f() / (g.lip_l() * g.lip_l());
        let mut traj = vec![common::random_point(&mut rng, 6, 5.0)];
        for _ in 0..200 {
            let next = fb_step(&g, traj.last().unwrap(), 1.0, gamma).unwrap();
            traj.push(next);
        }
        let report = lyapunov_trace(&traj, squared_distance(&x_star), |_| true, 1e-14);
        assert!(report.violations.is_empty(), "violations at {:?}", report.violations);
    }
}

#[test]
fn single_precision_smoke() {
    let g = Game32::new(
        vec![1, 1],
        Arc::new(|i, x: &[f32]| {
            let s = [1.0f32, -2.0][i];
            (x[i] - s) * (x[i] - s) + 0.1 * x[0] * x[1]
        }),
        1.9,
        2.1,
    )
    .unwrap();
    let x_star = g.solve_ne_oracle(1e-6).unwrap();
    // 2x_0 − 2 + 0.1x_1 = 0, 2x_1 + 4 + 0.1x_0 = 0
    let det = 4.0 - 0.01;
    let expect = [(2.0 * 2.0 + 0.1 * 4.0) / det, (-4.0 * 2.0 - 0.1 * 2.0) / det];
    assert!((x_star[0] - expect[0]).abs() < 1e-3 && (x_star[1] - expect[1]).abs() < 1e-3);
    let bank: OscillatorBank32 = OscillatorBank::new(vec![1.1, 2.3], vec![0.1, 0.1]).unwrap();
    let mut state: SyncState32 = SyncState::new(vec![0.0, 0.0], bank).unwrap();
    let params = SyncZoParams::new(0.2f32, 0.05, 0.5).unwrap();
    for _ in 0..20_000 {
        zo_sync_step_in_place(&g, &mut state, &params, GradientSource::Dither).unwrap();
    }
    assert!(neseek::linalg::dist(&state.x, &x_star) < 0.1, "{:?}", state.x);
}
