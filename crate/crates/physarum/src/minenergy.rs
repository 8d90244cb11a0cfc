//! Minimum-energy feasible solutions. For capacities `x > 0` and resistances
//! `r_e = c_e / x_e`, the energy minimizer of `Af = b` is induced by node
//! potentials:
//!
//! ```text
//! A R⁻¹ Aᵀ p = b,      q = R⁻¹ Aᵀ p,      E = bᵀ p.
//! ```
//!
//! `A R⁻¹ Aᵀ` is symmetric positive definite because `A` has full row rank,
//! so the system is solved by a Cholesky factorization. Instances are desk
//! scale; every call factors fresh.

use nalgebra::DMatrix;

use crate::instance::ProblemInstance;
use crate::{Error, Result};

/// Relative feasibility tolerance: `‖Aq − b‖∞ ≤ tol·(1 + ‖b‖∞)` is enforced
/// on every solve, and a violation is reported as a singular system rather
/// than returned silently.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// The evolving state of a simulation: strictly positive capacities plus the
/// current time.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub x: Vec<f64>,
    pub t: f64,
}

impl State {
    pub fn new(x: Vec<f64>, t: f64) -> Self {
        Self { x, t }
    }
}

/// Minimum-energy solution at fixed capacities.
#[derive(Debug, Clone)]
pub struct MinEnergySolution {
    /// Current vector, `q = R⁻¹Aᵀp`.
    pub q: Vec<f64>,
    /// Node potentials solving `AR⁻¹Aᵀp = b`.
    pub p: Vec<f64>,
    /// `bᵀp`, which equals the dissipated energy `Σ (c_e/x_e) q_e²`.
    pub energy: f64,
    /// Resistances `c_e/x_e` used for the solve (infinite off the support).
    pub resistances: Vec<f64>,
    /// Achieved `‖Aq − b‖∞`.
    pub residual: f64,
}

fn solve_with_weights(
    instance: &ProblemInstance,
    weights: &[f64],
    allow_semidefinite: bool,
) -> Result<MinEnergySolution> {
    let (n, m) = (instance.n(), instance.m());
    let a = instance.matrix_f64();
    let b = instance.b_f64();

    // M = A diag(w) Aᵀ, built column by column: Σ_e w_e A_e A_eᵀ.
    let mut gram = DMatrix::<f64>::zeros(n, n);
    for e in 0..m {
        let w = weights[e];
        if w == 0.0 {
            continue;
        }
        let col = a.column(e);
        for i in 0..n {
            let wi = w * col[i];
            if wi == 0.0 {
                continue;
            }
            for j in 0..n {
                gram[(i, j)] += wi * col[j];
            }
        }
    }

    let p = match gram.clone().cholesky() {
        Some(chol) => chol.solve(b),
        None if allow_semidefinite => {
            // Consistent semidefinite systems (restricted supports) still have
            // a unique current even though p is not unique.
            let svd = gram.svd(true, true);
            svd.solve(b, 1e-12)
                .map_err(|e| Error::SingularSystem(e.to_string()))?
        }
        None => {
            return Err(Error::SingularSystem(
                "A R^-1 A^T is not numerically positive definite".to_string(),
            ))
        }
    };

    let mut q = vec![0.0; m];
    for e in 0..m {
        if weights[e] == 0.0 {
            continue;
        }
        let drop: f64 = a.column(e).dot(&p);
        q[e] = weights[e] * drop;
    }

    let mut residual = 0.0_f64;
    for i in 0..n {
        let mut lhs = 0.0;
        for e in 0..m {
            lhs += a[(i, e)] * q[e];
        }
        residual = residual.max((lhs - b[i]).abs());
    }
    let b_inf = b.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if !residual.is_finite() || residual > FEASIBILITY_TOL * (1.0 + b_inf) {
        return Err(Error::SingularSystem(format!(
            "feasibility residual {residual:.3e} exceeds tolerance"
        )));
    }

    let energy = b.dot(&p);
    let resistances = weights
        .iter()
        .map(|&w| if w > 0.0 { 1.0 / w } else { f64::INFINITY })
        .collect();
    Ok(MinEnergySolution {
        q,
        p: p.iter().copied().collect(),
        energy,
        resistances,
        residual,
    })
}

/// Solve for the potentials and minimum-energy current at capacities `x`.
///
/// Conductance weights are `x_e/c_e`, so `resistances` in the result are
/// `c_e/x_e`. Requires every `x_e > 0`; entries at or below zero signal that
/// the state escaped the integrator's positivity floor.
pub fn solve_potentials(instance: &ProblemInstance, x: &[f64]) -> Result<MinEnergySolution> {
    if x.len() != instance.m() {
        return Err(Error::DimensionMismatch(format!(
            "state has {} entries, instance has {} edges",
            x.len(),
            instance.m()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    if let Some(e) = (0..x.len()).find(|&e| x[e] <= 0.0) {
        return Err(Error::SingularSystem(format!(
            "capacity x[{e}] = {} is not strictly positive",
            x[e]
        )));
    }
    let weights: Vec<f64> = x
        .iter()
        .zip(instance.c_f64())
        .map(|(&xe, &ce)| xe / ce)
        .collect();
    solve_with_weights(instance, &weights, false)
}

/// Restricted solve used for fixed-point verification: edges outside
/// `support` get zero conductance (their current is pinned to zero), and a
/// rank-deficient but consistent system is solved by least squares since the
/// current is still unique.
pub(crate) fn solve_potentials_restricted(
    instance: &ProblemInstance,
    x: &[f64],
    support: &[usize],
) -> Result<MinEnergySolution> {
    let mut weights = vec![0.0; instance.m()];
    for &e in support {
        if x[e] <= 0.0 || !x[e].is_finite() {
            return Err(Error::SingularSystem(format!(
                "support edge {e} has non-positive capacity {}",
                x[e]
            )));
        }
        weights[e] = x[e] / instance.c_f64()[e];
    }
    solve_with_weights(instance, &weights, true)
}

/// Energy `Σ_e (c_e/x_e) f_e²` of an arbitrary flow under capacities `x`.
/// Infinite when `f` uses an edge with zero capacity, per the support
/// convention.
pub fn energy(instance: &ProblemInstance, x: &[f64], f: &[f64]) -> f64 {
    let mut total = 0.0;
    for e in 0..instance.m() {
        if f[e] == 0.0 {
            continue;
        }
        if x[e] == 0.0 {
            return f64::INFINITY;
        }
        total += instance.c_f64()[e] / x[e] * f[e] * f[e];
    }
    total
}

/// Cost `cᵀ|f|` of a flow.
pub fn cost(instance: &ProblemInstance, f: &[f64]) -> f64 {
    instance
        .c_f64()
        .iter()
        .zip(f)
        .map(|(ce, fe)| ce * fe.abs())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{gen_parallel_links, gen_random};
    use approx::assert_relative_eq;

    /// Independent oracle for two parallel edges: minimize
    /// `(c1/x1) q1² + (c2/x2) q2²` over `q1 + q2 = 1` by ternary search.
    fn brute_force_two_edge_current(c: (f64, f64), x: (f64, f64)) -> (f64, f64) {
        let objective =
            |q1: f64| c.0 / x.0 * q1 * q1 + c.1 / x.1 * (1.0 - q1) * (1.0 - q1);
        let (mut lo, mut hi) = (-2.0_f64, 3.0_f64);
        for _ in 0..200 {
            let a = lo + (hi - lo) / 3.0;
            let b = hi - (hi - lo) / 3.0;
            if objective(a) < objective(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        let q1 = 0.5 * (lo + hi);
        (q1, 1.0 - q1)
    }

    #[test]
    fn parallel_links_current_divider() {
        // Frozen values computed from the brute-force oracle: q = (2/3, 1/3),
        // energy 2/3. Ternary search on a quadratic bottoms out near
        // sqrt(machine epsilon), hence the looser oracle tolerance.
        let (q1, q2) = brute_force_two_edge_current((1.0, 2.0), (1.0, 1.0));
        assert_relative_eq!(q1, 2.0 / 3.0, max_relative = 1e-6);
        assert_relative_eq!(q2, 1.0 / 3.0, max_relative = 1e-6);

        let inst = gen_parallel_links(&[1, 2]).unwrap();
        let sol = solve_potentials(&inst, &[1.0, 1.0]).unwrap();
        assert_relative_eq!(sol.q[0], 2.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(sol.q[1], 1.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(sol.p[0], 2.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(sol.energy, 2.0 / 3.0, max_relative = 1e-12);
        assert_eq!(sol.resistances, vec![1.0, 2.0]);
    }

    #[test]
    fn single_edge_flow_is_forced() {
        let inst = gen_parallel_links(&[1]).unwrap();
        for x in [0.25, 1.0, 2.0, 10.0] {
            let sol = solve_potentials(&inst, &[x]).unwrap();
            assert_relative_eq!(sol.q[0], 1.0, max_relative = 1e-12);
            assert_relative_eq!(sol.energy, 1.0 / x, max_relative = 1e-12);
        }
    }

    #[test]
    fn uniform_scaling_leaves_current_unchanged() {
        let inst = gen_random(2, 5, 2, 4, 5).unwrap();
        let x: Vec<f64> = (0..5).map(|e| 0.5 + 0.25 * e as f64).collect();
        let base = solve_potentials(&inst, &x).unwrap();
        for s in [0.5, 2.0, 7.5] {
            let scaled: Vec<f64> = x.iter().map(|xe| s * xe).collect();
            let sol = solve_potentials(&inst, &scaled).unwrap();
            for e in 0..5 {
                assert_relative_eq!(sol.q[e], base.q[e], max_relative = 1e-9, epsilon = 1e-12);
            }
            assert_relative_eq!(sol.energy, base.energy / s, max_relative = 1e-9);
        }
    }

    #[test]
    fn energy_identity_and_feasibility() {
        for seed in 0..20 {
            let inst = gen_random(1 + seed as usize % 3, 4 + seed as usize % 3, 2, 5, seed).unwrap();
            let x: Vec<f64> = (0..inst.m()).map(|e| 0.3 + 0.37 * (e as f64 + 1.0)).collect();
            let sol = solve_potentials(&inst, &x).unwrap();
            let b_inf = inst
                .b()
                .iter()
                .fold(0.0_f64, |acc, &v| acc.max((v as f64).abs()));
            assert!(sol.residual <= 1e-9 * (1.0 + b_inf));
            let direct = energy(&inst, &x, &sol.q);
            assert!(
                (sol.energy - direct).abs() <= 1e-9 * (1.0 + sol.energy.abs()),
                "energy identity violated: {} vs {direct}",
                sol.energy
            );
        }
    }

    #[test]
    fn solver_energy_beats_kernel_perturbations() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for seed in [3u64, 11, 19] {
            let inst = gen_random(2, 5, 2, 4, seed).unwrap();
            let x: Vec<f64> = (0..inst.m()).map(|_| rng.gen_range(0.2..2.0)).collect();
            let sol = solve_potentials(&inst, &x).unwrap();
            let base = energy(&inst, &x, &sol.q);

            // Kernel projector: z ↦ z − Aᵀ(AAᵀ)⁻¹Az keeps Af = b intact.
            let a = inst.matrix_f64().clone();
            let gram = &a * a.transpose();
            let chol = gram.cholesky().unwrap();
            let project = |z: &nalgebra::DVector<f64>| -> nalgebra::DVector<f64> {
                z - a.transpose() * chol.solve(&(&a * z))
            };

            for _ in 0..1000 {
                let raw = nalgebra::DVector::from_fn(inst.m(), |_, _| rng.gen_range(-1.0..1.0));
                let z = project(&raw);
                let f: Vec<f64> = sol.q.iter().zip(z.iter()).map(|(qe, ze)| qe + ze).collect();
                let perturbed = energy(&inst, &x, &f);
                assert!(perturbed >= base - 1e-9 * (1.0 + base.abs()));
            }
        }
    }

    #[test]
    fn current_bound_from_exact_oracle() {
        use crate::oracle::enumerate_bfs;
        for seed in [2u64, 7, 13, 29] {
            let inst = gen_random(2, 5, 2, 4, seed).unwrap();
            let report = enumerate_bfs(&inst).unwrap();
            let bound = report.d_bound_f64().unwrap() * inst.b_one_norm();
            for shift in 0..10 {
                let x: Vec<f64> = (0..inst.m())
                    .map(|e| 0.1 + 0.31 * ((e + shift) as f64 % 4.0 + 1.0))
                    .collect();
                let sol = solve_potentials(&inst, &x).unwrap();
                for e in 0..inst.m() {
                    assert!(
                        sol.q[e].abs() <= bound + 1e-9,
                        "|q_{e}| = {} exceeds D‖b‖₁ = {bound}",
                        sol.q[e].abs()
                    );
                }
            }
        }
    }

    #[test]
    fn energy_of_x_is_cost_of_x() {
        let inst = gen_random(2, 5, 2, 4, 8).unwrap();
        let x: Vec<f64> = (0..inst.m()).map(|e| 0.5 + e as f64 * 0.2).collect();
        assert_relative_eq!(energy(&inst, &x, &x), cost(&inst, &x), max_relative = 1e-12);
    }

    #[test]
    fn energy_edge_cases() {
        let inst = gen_parallel_links(&[1, 2]).unwrap();
        assert_eq!(energy(&inst, &[1.0, 1.0], &[0.0, 0.0]), 0.0);
        assert_eq!(energy(&inst, &[1.0, 0.0], &[0.0, 1.0]), f64::INFINITY);
        // Zero flow on a zero-capacity edge contributes nothing.
        assert_eq!(energy(&inst, &[1.0, 0.0], &[1.0, 0.0]), 1.0);
    }

    #[test]
    fn cost_examples() {
        let inst = gen_parallel_links(&[1, 2]).unwrap();
        assert_eq!(cost(&inst, &[1.0, -1.0]), 3.0);
        assert_eq!(cost(&inst, &[0.0, 0.0]), 0.0);
        let inst3 = gen_parallel_links(&[3, 1, 2]).unwrap();
        assert_eq!(cost(&inst3, &[0.0, 1.0, 0.0]), 1.0);
    }

    #[test]
    fn rejects_bad_states() {
        let inst = gen_parallel_links(&[1, 2]).unwrap();
        assert!(matches!(
            solve_potentials(&inst, &[1.0, f64::NAN]),
            Err(Error::NonFiniteInput)
        ));
        assert!(matches!(
            solve_potentials(&inst, &[1.0, 0.0]),
            Err(Error::SingularSystem(_))
        ));
        assert!(matches!(
            solve_potentials(&inst, &[1.0]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn restricted_solve_pins_off_support_currents() {
        let inst = gen_parallel_links(&[1, 2]).unwrap();
        let sol = solve_potentials_restricted(&inst, &[1.0, 0.5], &[0]).unwrap();
        assert_eq!(sol.q[1], 0.0);
        assert_relative_eq!(sol.q[0], 1.0, max_relative = 1e-12);
    }
}
