//! Property tests for the structural invariants: generator validity and
//! determinism, the rewritten-dynamics identity, energy/feasibility of the
//! potential solve, and positivity along trajectories.

use proptest::prelude::*;

use physarum::dynamics::{
    reformulate_nonuniform, rhs, rhs_rewritten, DynamicsSpec, ReactivityFn, ResponseFn,
    ResponseSet,
};
use physarum::instance::{gen_incidence, gen_parallel_links, gen_random, validate};
use physarum::integrate::{simulate, IntegratorConfig};
use physarum::minenergy::{energy, solve_potentials, State};
use physarum::oracle::enumerate_bfs;

fn shape() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=3).prop_flat_map(|n| (Just(n), (n + 1)..=6usize))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_instances_validate_and_are_deterministic(
        (n, m) in shape(),
        seed in any::<u64>(),
    ) {
        let inst = gen_random(n, m, 2, 5, seed).unwrap();
        prop_assert!(validate(&inst.to_raw()).is_valid());
        let again = gen_random(n, m, 2, 5, seed).unwrap();
        prop_assert_eq!(inst.to_json(), again.to_json());
    }

    #[test]
    fn parallel_instances_validate_with_k_bases(costs in prop::collection::vec(1i64..=9, 1..=7)) {
        let inst = gen_parallel_links(&costs).unwrap();
        prop_assert!(validate(&inst.to_raw()).is_valid());
        let report = enumerate_bfs(&inst).unwrap();
        prop_assert_eq!(report.solutions.len(), costs.len());
    }

    #[test]
    fn incidence_path_with_chords_validates(
        nodes in 3usize..=5,
        chord_seed in any::<u64>(),
    ) {
        // A path 0 -> 1 -> ... plus one deterministic chord keeps the graph
        // connected, so the generator must always succeed and validate.
        let mut arcs: Vec<(usize, usize)> = (0..nodes - 1).map(|i| (i, i + 1)).collect();
        let chord_from = (chord_seed % (nodes as u64 - 1)) as usize;
        arcs.push((chord_from, nodes - 1));
        let lengths = vec![1i64; arcs.len()];
        let inst = gen_incidence(nodes, &arcs, &lengths, 0, nodes - 1, 1).unwrap();
        prop_assert!(validate(&inst.to_raw()).is_valid());
    }

    #[test]
    fn feasible_by_construction(( n, m) in shape(), seed in any::<u64>()) {
        let inst = gen_random(n, m, 2, 5, seed).unwrap();
        let report = enumerate_bfs(&inst).unwrap();
        prop_assert!(!report.solutions.is_empty());
    }

    #[test]
    fn rewritten_dynamics_agree(
        (n, m) in shape(),
        seed in any::<u64>(),
        x_seed in 0.05f64..1.0,
        variant in 0usize..3,
    ) {
        let inst = gen_random(n, m, 2, 5, seed).unwrap();
        let spec = match variant {
            0 => DynamicsSpec::Uniform,
            1 => DynamicsSpec::NonUniform {
                reactivity: ReactivityFn::constant_shared(0.5 + x_seed).unwrap(),
            },
            _ => DynamicsSpec::Refined {
                responses: ResponseSet::Shared(ResponseFn::saturating(2.0, 1.0).unwrap()),
            },
        };
        let x: Vec<f64> = (0..m).map(|e| x_seed + 0.4 * e as f64).collect();
        let state = State::new(x, 0.3);
        let direct = rhs(&inst, &spec, &state).unwrap();
        let rewritten = rhs_rewritten(&inst, &spec, &state).unwrap();
        for e in 0..m {
            let scale = 1.0 + direct[e].abs();
            prop_assert!((direct[e] - rewritten[e]).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn potential_solve_is_feasible_with_energy_identity(
        (n, m) in shape(),
        seed in any::<u64>(),
        lo in 0.05f64..0.5,
    ) {
        let inst = gen_random(n, m, 2, 5, seed).unwrap();
        let x: Vec<f64> = (0..m).map(|e| lo * (1.0 + e as f64)).collect();
        let sol = solve_potentials(&inst, &x).unwrap();
        let b_inf = inst.b().iter().fold(0.0_f64, |acc, &v| acc.max((v as f64).abs()));
        prop_assert!(sol.residual <= 1e-9 * (1.0 + b_inf));
        let direct = energy(&inst, &x, &sol.q);
        prop_assert!((sol.energy - direct).abs() <= 1e-9 * (1.0 + sol.energy.abs()));
    }

    #[test]
    fn current_is_invariant_under_uniform_scaling(
        (n, m) in shape(),
        seed in any::<u64>(),
        scale in 0.1f64..10.0,
    ) {
        let inst = gen_random(n, m, 2, 5, seed).unwrap();
        let x: Vec<f64> = (0..m).map(|e| 0.2 + 0.3 * e as f64).collect();
        let scaled: Vec<f64> = x.iter().map(|xe| scale * xe).collect();
        let base = solve_potentials(&inst, &x).unwrap();
        let sol = solve_potentials(&inst, &scaled).unwrap();
        for e in 0..m {
            prop_assert!((base.q[e] - sol.q[e]).abs() <= 1e-8 * (1.0 + base.q[e].abs()));
        }
    }

    #[test]
    fn trajectories_respect_the_floor(
        (n, m) in shape(),
        seed in any::<u64>(),
    ) {
        let inst = gen_random(n, m, 2, 5, seed).unwrap();
        let config = IntegratorConfig {
            h: 0.02,
            t_end: 10.0,
            record_every: 5,
            ..IntegratorConfig::default()
        };
        let record = simulate(&inst, &DynamicsSpec::Uniform, &vec![1.0; m], &config).unwrap();
        for pair in record.samples.windows(2) {
            prop_assert!(pair[0].t < pair[1].t);
        }
        for sample in &record.samples {
            for &xe in &sample.x {
                prop_assert!(xe >= config.x_min);
            }
        }
    }

    #[test]
    fn reweighting_round_trip(
        (n, m) in shape(),
        seed in any::<u64>(),
        a_base in 1i64..=3,
    ) {
        let inst = gen_random(n, m, 2, 5, seed).unwrap();
        let a: Vec<i64> = (0..m).map(|e| 1 + (a_base + e as i64) % 3).collect();
        let (transformed, map) = reformulate_nonuniform(&inst, &a).unwrap();
        for e in 0..m {
            prop_assert_eq!(transformed.c()[e], inst.c()[e] * a[e]);
        }
        let x: Vec<f64> = (0..m).map(|e| 0.3 + 0.21 * e as f64).collect();
        let back = map.to_original(&map.to_transformed(&x));
        for e in 0..m {
            prop_assert!((back[e] - x[e]).abs() <= 1e-15);
        }
    }
}
