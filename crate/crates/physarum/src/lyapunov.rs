//! The Lyapunov monitor `L(x) = bᵀp + cᵀx` and its analytic time derivative
//! along each dynamics variant.
//!
//! `L` is evaluated as `bᵀp + cᵀx` rather than `Σ (c_e/x_e) q_e² + cᵀx`; the
//! two forms are equal but the first avoids 0/0 near degenerate edges. The
//! derivative algebra reduces, with `λ_e = |A_eᵀp| / c_e`, to
//!
//! * non-uniform: `dL/dt = −Σ_e a_e c_e x_e (λ_e + 1)(λ_e − 1)²`,
//! * refined:     `dL/dt = −Σ_e c_e x_e (λ_e² − 1)(g_e(λ_e) − 1)`,
//!
//! both nonpositive under the variant's hypotheses and zero exactly at
//! fixed points.

use crate::dynamics::{lambdas, DynamicsSpec};
use crate::instance::ProblemInstance;
use crate::minenergy::{MinEnergySolution, State};
use crate::{Error, Result};

/// One monitored row along a trajectory.
#[derive(Debug, Clone)]
pub struct LyapunovSample {
    pub value: f64,
    pub dldt_analytic: f64,
    pub lambda: Vec<f64>,
    /// `cᵀx − cᵀx*` when the optimum is known.
    pub gap: Option<f64>,
}

/// `L = bᵀp + cᵀx` for a solution computed at `x`.
pub fn lyapunov_value(instance: &ProblemInstance, x: &[f64], sol: &MinEnergySolution) -> f64 {
    let cost: f64 = instance.c_f64().iter().zip(x).map(|(ce, xe)| ce * xe).sum();
    sol.energy + cost
}

/// Analytic `dL/dt` for the uniform or non-uniform dynamics.
///
/// Panics if called with a refined spec; use [`dldt_refined`] there.
pub fn dldt_nonuniform(
    instance: &ProblemInstance,
    spec: &DynamicsSpec,
    state: &State,
    sol: &MinEnergySolution,
) -> f64 {
    let reactivity = match spec {
        DynamicsSpec::Uniform => None,
        DynamicsSpec::NonUniform { reactivity } => Some(reactivity),
        DynamicsSpec::Refined { .. } => {
            panic!("dldt_nonuniform requires a uniform or non-uniform spec")
        }
    };
    let lambda = lambdas(instance, sol);
    let mut total = 0.0;
    for e in 0..instance.m() {
        let a = reactivity.map_or(1.0, |r| r.eval(e, &state.x, state.t));
        let le = lambda[e];
        total -= a * instance.c_f64()[e] * state.x[e] * (le + 1.0) * (le - 1.0) * (le - 1.0);
    }
    total
}

/// Analytic `dL/dt` for the refined dynamics.
///
/// Panics if called with a uniform or non-uniform spec.
pub fn dldt_refined(
    instance: &ProblemInstance,
    spec: &DynamicsSpec,
    state: &State,
    sol: &MinEnergySolution,
) -> f64 {
    let DynamicsSpec::Refined { responses } = spec else {
        panic!("dldt_refined requires a refined spec");
    };
    let lambda = lambdas(instance, sol);
    let mut total = 0.0;
    for e in 0..instance.m() {
        let le = lambda[e];
        let g = responses.get(e).eval(le);
        total -= instance.c_f64()[e] * state.x[e] * (le * le - 1.0) * (g - 1.0);
    }
    total
}

/// Variant dispatcher used by the integrator's trajectory recording.
pub fn dldt_analytic(
    instance: &ProblemInstance,
    spec: &DynamicsSpec,
    state: &State,
    sol: &MinEnergySolution,
) -> f64 {
    match spec {
        DynamicsSpec::Refined { .. } => dldt_refined(instance, spec, state, sol),
        _ => dldt_nonuniform(instance, spec, state, sol),
    }
}

/// Variant-free form `dL/dt = Σ_e c_e (1 − λ_e²) ẋ_e`, valid for any
/// dynamics whose flow `ẋ` is given; follows from differentiating `bᵀp`
/// through the potential equation. Cross-checks the closed forms and serves
/// trajectories driven by custom right-hand sides.
pub fn dldt_general(instance: &ProblemInstance, sol: &MinEnergySolution, xdot: &[f64]) -> f64 {
    let lambda = lambdas(instance, sol);
    (0..instance.m())
        .map(|e| instance.c_f64()[e] * (1.0 - lambda[e] * lambda[e]) * xdot[e])
        .sum()
}

/// The proof potential `W(x) = Σ_e (x*_e c_e / a_e) ln(x_e / B)`.
///
/// Diagnostic only: along trajectories hovering near a non-optimal fixed
/// point its derivative stays above a positive constant, which is the
/// contradiction that powers the convergence argument. Edges with
/// `x*_e = 0` contribute nothing.
pub fn proof_potential(
    instance: &ProblemInstance,
    x: &[f64],
    x_star: &[f64],
    a: &[f64],
    bound: f64,
) -> Result<f64> {
    if !(bound > 0.0) {
        return Err(Error::NonPositiveBound(bound));
    }
    if a.iter().any(|&ae| !(ae > 0.0)) {
        return Err(Error::NonPositiveReactivity);
    }
    let mut total = 0.0;
    for e in 0..instance.m() {
        if x_star[e] == 0.0 {
            continue;
        }
        total += x_star[e] * instance.c_f64()[e] / a[e] * (x[e] / bound).ln();
    }
    Ok(total)
}

/// Assemble the monitored row for one state.
pub fn sample(
    instance: &ProblemInstance,
    spec: &DynamicsSpec,
    state: &State,
    sol: &MinEnergySolution,
    x_star: Option<&[f64]>,
) -> LyapunovSample {
    let value = lyapunov_value(instance, &state.x, sol);
    let dldt = dldt_analytic(instance, spec, state, sol);
    let lambda = lambdas(instance, sol);
    let gap = x_star.map(|xs| {
        instance
            .c_f64()
            .iter()
            .zip(state.x.iter().zip(xs))
            .map(|(ce, (xe, xse))| ce * (xe - xse))
            .sum()
    });
    LyapunovSample {
        value,
        dldt_analytic: dldt,
        lambda,
        gap,
    }
}
