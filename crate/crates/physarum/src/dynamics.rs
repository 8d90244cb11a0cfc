//! Right-hand sides of the three dynamics variants and the catalog of
//! reactivity and response functions.
//!
//! * Uniform:      `ẋ_e = |q_e| − x_e`
//! * Non-uniform:  `ẋ_e = a_e(x,t) (|q_e| − x_e)`
//! * Refined:      `ẋ_e = x_e (g_e(|q_e|/x_e) − 1)`
//!
//! Declared reactivity bounds and the `g(1) = 1` normalization are asserted
//! at every evaluation: the convergence guarantees depend on these
//! hypotheses, so a violation is a hard error, not a warning.

use serde::{Deserialize, Serialize};

use crate::instance::ProblemInstance;
use crate::minenergy::{self, MinEnergySolution, State};
use crate::{Error, Result};

/// Relative slack for runtime bound assertions and the `g(1) = 1` self-check.
const SELF_CHECK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Uniform,
    NonUniform,
    Refined,
}

/// Per-edge reactivity `a_e(x, t)` with declared bounds `ε ≤ a ≤ C`.
///
/// The catalog covers the families the analysis cares about: constants
/// (minimum-risk decay rates), the time-decaying counterexample `e^{−t}/2`,
/// the state-dependent blow-up example `1/x`, and monotone-in-time families
/// of either sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReactivityKind {
    /// Constant per edge; a single value broadcasts to every edge.
    Constant { values: Vec<f64> },
    /// `a(t) = scale · e^(−rate·t)`; decays to zero, so no positive `ε`.
    ExpDecay { scale: f64, rate: f64 },
    /// `a_e(x, t) = 1/x_e`; unbounded above as `x → 0`.
    InverseState,
    /// `a(t) = min(start + rate·t, cap)`; nondecreasing in `t`.
    RampUp { start: f64, rate: f64, cap: f64 },
    /// `a(t) = floor + (start − floor) e^(−rate·t)`; nonincreasing in `t`
    /// but bounded below by a positive floor.
    DecayFloor { start: f64, floor: f64, rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ReactivityKind", into = "ReactivityKind")]
pub struct ReactivityFn {
    kind: ReactivityKind,
    /// Declared lower bound `ε ≥ 0`; when positive it is asserted at runtime.
    pub lower: f64,
    /// Declared upper bound `C`; may be infinite for the blow-up family.
    pub upper: f64,
    /// Whether the evaluator is Lipschitz on the whole positive orthant.
    pub lipschitz: bool,
}

impl From<ReactivityFn> for ReactivityKind {
    fn from(f: ReactivityFn) -> Self {
        f.kind
    }
}

impl TryFrom<ReactivityKind> for ReactivityFn {
    type Error = Error;

    fn try_from(kind: ReactivityKind) -> Result<Self> {
        let (lower, upper, lipschitz) = match &kind {
            ReactivityKind::Constant { values } => {
                if values.is_empty() {
                    return Err(Error::Data("constant reactivity needs values".into()));
                }
                if values.iter().any(|&v| !v.is_finite() || v < 0.0) {
                    return Err(Error::NonPositiveReactivity);
                }
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = values.iter().copied().fold(0.0_f64, f64::max);
                (lo, hi, true)
            }
            ReactivityKind::ExpDecay { scale, rate } => {
                if *scale <= 0.0 || *rate <= 0.0 {
                    return Err(Error::NonPositiveReactivity);
                }
                (0.0, *scale, true)
            }
            ReactivityKind::InverseState => (0.0, f64::INFINITY, false),
            ReactivityKind::RampUp { start, rate, cap } => {
                if *start <= 0.0 || *rate < 0.0 || cap < start {
                    return Err(Error::NonPositiveReactivity);
                }
                (*start, *cap, true)
            }
            ReactivityKind::DecayFloor { start, floor, rate } => {
                if *floor <= 0.0 || start < floor || *rate <= 0.0 {
                    return Err(Error::NonPositiveReactivity);
                }
                (*floor, *start, true)
            }
        };
        Ok(Self {
            kind,
            lower,
            upper,
            lipschitz,
        })
    }
}

impl ReactivityFn {
    pub fn constant_shared(value: f64) -> Result<Self> {
        ReactivityKind::Constant {
            values: vec![value],
        }
        .try_into()
    }

    pub fn constant_per_edge(values: Vec<f64>) -> Result<Self> {
        ReactivityKind::Constant { values }.try_into()
    }

    /// The §3.5 counterexample family `a(t) = scale · e^(−rate·t)`.
    pub fn exp_decay(scale: f64, rate: f64) -> Result<Self> {
        ReactivityKind::ExpDecay { scale, rate }.try_into()
    }

    pub fn inverse_state() -> Self {
        ReactivityKind::InverseState
            .try_into()
            .expect("inverse state has no parameters")
    }

    pub fn ramp_up(start: f64, rate: f64, cap: f64) -> Result<Self> {
        ReactivityKind::RampUp { start, rate, cap }.try_into()
    }

    pub fn decay_floor(start: f64, floor: f64, rate: f64) -> Result<Self> {
        ReactivityKind::DecayFloor { start, floor, rate }.try_into()
    }

    pub fn kind(&self) -> &ReactivityKind {
        &self.kind
    }

    pub fn eval(&self, edge: usize, x: &[f64], t: f64) -> f64 {
        match &self.kind {
            ReactivityKind::Constant { values } => {
                if values.len() == 1 {
                    values[0]
                } else {
                    values[edge]
                }
            }
            ReactivityKind::ExpDecay { scale, rate } => scale * (-rate * t).exp(),
            ReactivityKind::InverseState => 1.0 / x[edge],
            ReactivityKind::RampUp { start, rate, cap } => (start + rate * t).min(*cap),
            ReactivityKind::DecayFloor { start, floor, rate } => {
                floor + (start - floor) * (-rate * t).exp()
            }
        }
    }

    /// Check that the lengths of per-edge parameters fit the instance.
    fn validate_for(&self, m: usize) -> Result<()> {
        if let ReactivityKind::Constant { values } = &self.kind {
            if values.len() != 1 && values.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "reactivity has {} values for {} edges",
                    values.len(),
                    m
                )));
            }
        }
        Ok(())
    }

    fn checked_eval(&self, edge: usize, x: &[f64], t: f64) -> Result<f64> {
        let a = self.eval(edge, x, t);
        let above = a > self.upper * (1.0 + SELF_CHECK_TOL) + SELF_CHECK_TOL;
        let below_zero = !(a >= 0.0);
        let below_eps = self.lower > 0.0 && a < self.lower * (1.0 - SELF_CHECK_TOL);
        if below_zero || above || below_eps {
            return Err(Error::ReactivityBoundViolated {
                edge,
                value: a,
                lower: self.lower,
                upper: self.upper,
            });
        }
        Ok(a)
    }
}

/// Response function `g: [0, ∞) → [0, ∞)`, increasing and differentiable
/// with `g(1) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ResponseKind {
    /// Non-saturating response `g(y) = y^μ`.
    Power { mu: f64 },
    /// Saturating response `g(y) = (1 + α) y^μ / (1 + α y^μ)`.
    Saturating { mu: f64, alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ResponseKind", into = "ResponseKind")]
pub struct ResponseFn {
    kind: ResponseKind,
    /// A constant `α` with `g(y) ≥ 1 + α(y − 1)` for all `y ≥ 0`, when one
    /// exists. Convex responses use `g′(1)`; concave or saturating families
    /// carry `None` and are checked on a bounded grid instead.
    pub linear_lower_bound: Option<f64>,
}

impl From<ResponseFn> for ResponseKind {
    fn from(f: ResponseFn) -> Self {
        f.kind
    }
}

impl TryFrom<ResponseKind> for ResponseFn {
    type Error = Error;

    fn try_from(kind: ResponseKind) -> Result<Self> {
        let linear_lower_bound = match &kind {
            ResponseKind::Power { mu } => {
                if *mu <= 0.0 {
                    return Err(Error::Data(format!("power response needs mu > 0, got {mu}")));
                }
                // y^mu is convex for mu >= 1 with g'(1) = mu.
                (*mu >= 1.0).then_some(*mu)
            }
            ResponseKind::Saturating { mu, alpha } => {
                if *mu <= 0.0 || *alpha <= 0.0 {
                    return Err(Error::Data(format!(
                        "saturating response needs mu, alpha > 0, got mu = {mu}, alpha = {alpha}"
                    )));
                }
                None
            }
        };
        Ok(Self {
            kind,
            linear_lower_bound,
        })
    }
}

impl ResponseFn {
    pub fn power(mu: f64) -> Result<Self> {
        ResponseKind::Power { mu }.try_into()
    }

    pub fn saturating(mu: f64, alpha: f64) -> Result<Self> {
        ResponseKind::Saturating { mu, alpha }.try_into()
    }

    /// The identity response `g(y) = y`, under which the refined dynamics
    /// reduce to the uniform dynamics.
    pub fn identity() -> Self {
        Self::power(1.0).expect("mu = 1 is valid")
    }

    pub fn kind(&self) -> &ResponseKind {
        &self.kind
    }

    pub fn eval(&self, y: f64) -> f64 {
        match &self.kind {
            ResponseKind::Power { mu } => y.powf(*mu),
            ResponseKind::Saturating { mu, alpha } => {
                let ym = y.powf(*mu);
                (1.0 + alpha) * ym / (1.0 + alpha * ym)
            }
        }
    }

    /// Sampled monotonicity check on `[0, y_max]`.
    pub fn is_monotone_on(&self, y_max: f64, samples: usize) -> bool {
        let mut prev = self.eval(0.0);
        for i in 1..=samples {
            let y = y_max * i as f64 / samples as f64;
            let g = self.eval(y);
            if g < prev {
                return false;
            }
            prev = g;
        }
        true
    }

    /// Grid verification of `g(y) ≥ 1 + α(y − 1)` on `[0, y_max]`.
    pub fn verify_linear_lower_bound(&self, alpha: f64, y_max: f64, samples: usize) -> bool {
        (0..=samples).all(|i| {
            let y = y_max * i as f64 / samples as f64;
            self.eval(y) >= 1.0 + alpha * (y - 1.0) - 1e-12
        })
    }
}

/// Responses for an instance: one shared function or one per edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResponseSet {
    Shared(ResponseFn),
    PerEdge(Vec<ResponseFn>),
}

impl ResponseSet {
    pub fn get(&self, edge: usize) -> &ResponseFn {
        match self {
            ResponseSet::Shared(f) => f,
            ResponseSet::PerEdge(fs) => &fs[edge],
        }
    }

    fn validate_for(&self, m: usize) -> Result<()> {
        if let ResponseSet::PerEdge(fs) = self {
            if fs.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "{} responses for {} edges",
                    fs.len(),
                    m
                )));
            }
        }
        Ok(())
    }
}

/// Which dynamics to integrate, plus the variant's parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum DynamicsSpec {
    Uniform,
    NonUniform { reactivity: ReactivityFn },
    Refined { responses: ResponseSet },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecRepr {
    variant: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reactivity: Option<ReactivityFn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    response: Option<ResponseSet>,
}

impl Serialize for DynamicsSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match self {
            DynamicsSpec::Uniform => SpecRepr {
                variant: "uniform".into(),
                reactivity: None,
                response: None,
            },
            DynamicsSpec::NonUniform { reactivity } => SpecRepr {
                variant: "nonuniform".into(),
                reactivity: Some(reactivity.clone()),
                response: None,
            },
            DynamicsSpec::Refined { responses } => SpecRepr {
                variant: "refined".into(),
                reactivity: None,
                response: Some(responses.clone()),
            },
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DynamicsSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let repr = SpecRepr::deserialize(deserializer)?;
        match repr.variant.as_str() {
            "uniform" => Ok(DynamicsSpec::Uniform),
            "nonuniform" => Ok(DynamicsSpec::NonUniform {
                reactivity: repr
                    .reactivity
                    .ok_or_else(|| DeError::custom("nonuniform spec needs a reactivity"))?,
            }),
            "refined" => Ok(DynamicsSpec::Refined {
                responses: repr
                    .response
                    .ok_or_else(|| DeError::custom("refined spec needs a response"))?,
            }),
            other => Err(DeError::custom(format!("unknown variant: {other}"))),
        }
    }
}

impl DynamicsSpec {
    pub fn variant(&self) -> Variant {
        match self {
            DynamicsSpec::Uniform => Variant::Uniform,
            DynamicsSpec::NonUniform { .. } => Variant::NonUniform,
            DynamicsSpec::Refined { .. } => Variant::Refined,
        }
    }

    pub fn validate_for(&self, m: usize) -> Result<()> {
        match self {
            DynamicsSpec::Uniform => Ok(()),
            DynamicsSpec::NonUniform { reactivity } => reactivity.validate_for(m),
            DynamicsSpec::Refined { responses } => responses.validate_for(m),
        }
    }

    /// A constant `C` with `ẋ_e ≥ −C x_e` along the dynamics, used for the
    /// exponential lower bound `x_e(t) ≥ x_e(0) e^(−Ct)`. The non-uniform
    /// bound is the declared reactivity cap; the refined catalog has
    /// `g(0) = 0`, so its decay rate is capped by 1.
    pub fn decay_rate_cap(&self, m: usize) -> f64 {
        match self {
            DynamicsSpec::Uniform => 1.0,
            DynamicsSpec::NonUniform { reactivity } => reactivity.upper,
            DynamicsSpec::Refined { responses } => (0..m)
                .map(|e| 1.0 - responses.get(e).eval(0.0))
                .fold(0.0_f64, f64::max),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("spec serialization is total");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Evaluate `ẋ` from an already-computed potential solution. Shared by the
/// production right-hand side and the integrator, which reuses the solve for
/// trajectory observables.
pub fn rhs_from_solution(
    instance: &ProblemInstance,
    spec: &DynamicsSpec,
    state: &State,
    sol: &MinEnergySolution,
) -> Result<Vec<f64>> {
    let m = instance.m();
    let mut xdot = vec![0.0; m];
    match spec {
        DynamicsSpec::Uniform => {
            for e in 0..m {
                xdot[e] = sol.q[e].abs() - state.x[e];
            }
        }
        DynamicsSpec::NonUniform { reactivity } => {
            for e in 0..m {
                let a = reactivity.checked_eval(e, &state.x, state.t)?;
                xdot[e] = a * (sol.q[e].abs() - state.x[e]);
            }
        }
        DynamicsSpec::Refined { responses } => {
            for e in 0..m {
                let g = responses.get(e);
                let at_one = g.eval(1.0);
                if (at_one - 1.0).abs() > SELF_CHECK_TOL {
                    return Err(Error::ResponseSelfCheck {
                        edge: e,
                        value: at_one,
                    });
                }
                let y = sol.q[e].abs() / state.x[e];
                xdot[e] = state.x[e] * (g.eval(y) - 1.0);
            }
        }
    }
    Ok(xdot)
}

/// Right-hand side `ẋ` for the given variant at the given state. Solves the
/// potential system once.
pub fn rhs(instance: &ProblemInstance, spec: &DynamicsSpec, state: &State) -> Result<Vec<f64>> {
    spec.validate_for(instance.m())?;
    let sol = minenergy::solve_potentials(instance, &state.x)?;
    rhs_from_solution(instance, spec, state, &sol)
}

/// Normalized potential drops `λ_e = |A_eᵀ p| / c_e`.
pub fn lambdas(instance: &ProblemInstance, sol: &MinEnergySolution) -> Vec<f64> {
    let a = instance.matrix_f64();
    let n = instance.n();
    (0..instance.m())
        .map(|e| {
            let mut drop = 0.0;
            for i in 0..n {
                drop += a[(i, e)] * sol.p[i];
            }
            drop.abs() / instance.c_f64()[e]
        })
        .collect()
}

/// The rewritten right-hand side computed from potentials only, without
/// forming `q` explicitly: `ẋ_e = a_e x_e (λ_e − 1)` for the uniform and
/// non-uniform variants and `ẋ_e = x_e (g_e(λ_e) − 1)` for the refined one.
/// Used as an internal consistency check against [`rhs`], not as the
/// production path.
pub fn rhs_rewritten(
    instance: &ProblemInstance,
    spec: &DynamicsSpec,
    state: &State,
) -> Result<Vec<f64>> {
    spec.validate_for(instance.m())?;
    let sol = minenergy::solve_potentials(instance, &state.x)?;
    let lambda = lambdas(instance, &sol);
    let m = instance.m();
    let mut xdot = vec![0.0; m];
    match spec {
        DynamicsSpec::Uniform => {
            for e in 0..m {
                xdot[e] = state.x[e] * (lambda[e] - 1.0);
            }
        }
        DynamicsSpec::NonUniform { reactivity } => {
            for e in 0..m {
                let a = reactivity.checked_eval(e, &state.x, state.t)?;
                xdot[e] = a * state.x[e] * (lambda[e] - 1.0);
            }
        }
        DynamicsSpec::Refined { responses } => {
            for e in 0..m {
                let g = responses.get(e);
                let at_one = g.eval(1.0);
                if (at_one - 1.0).abs() > SELF_CHECK_TOL {
                    return Err(Error::ResponseSelfCheck {
                        edge: e,
                        value: at_one,
                    });
                }
                xdot[e] = state.x[e] * (g.eval(lambda[e]) - 1.0);
            }
        }
    }
    Ok(xdot)
}

/// Diagonal change of variables realizing the minimum-risk reweighting:
/// `y_e = a_e x_e` maps the decay dynamics `ẋ_e = |q_e| − a_e x_e` on costs
/// `c` to the non-uniform dynamics on costs `a_e c_e`.
#[derive(Debug, Clone)]
pub struct ReweightMap {
    a: Vec<i64>,
}

impl ReweightMap {
    pub fn reactivities(&self) -> &[i64] {
        &self.a
    }

    /// `x → y = a ∘ x`.
    pub fn to_transformed(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.a) .map(|(xe, &ae)| xe * ae as f64).collect()
    }

    /// `y → x = y / a`.
    pub fn to_original(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.a).map(|(ye, &ae)| ye / ae as f64).collect()
    }
}

/// Build the reweighted instance with costs `a_e c_e` and the state maps.
/// Reactivities are positive integers so the transformed instance keeps the
/// integral-cost contract.
pub fn reformulate_nonuniform(
    instance: &ProblemInstance,
    a: &[i64],
) -> Result<(ProblemInstance, ReweightMap)> {
    if a.len() != instance.m() {
        return Err(Error::DimensionMismatch(format!(
            "{} reactivities for {} edges",
            a.len(),
            instance.m()
        )));
    }
    if a.iter().any(|&ae| ae < 1) {
        return Err(Error::NonPositiveReactivity);
    }
    let costs: Vec<i64> = instance.c().iter().zip(a).map(|(&ce, &ae)| ce * ae).collect();
    let transformed = ProblemInstance::new(instance.a().to_vec(), instance.b().to_vec(), costs)?;
    Ok((transformed, ReweightMap { a: a.to_vec() }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{gen_parallel_links, gen_random};
    use approx::assert_relative_eq;

    #[test]
    fn single_edge_uniform_rhs() {
        let inst = gen_parallel_links(&[1]).unwrap();
        let xdot = rhs(&inst, &DynamicsSpec::Uniform, &State::new(vec![2.0], 0.0)).unwrap();
        assert_relative_eq!(xdot[0], -1.0, max_relative = 1e-12);
    }

    #[test]
    fn single_edge_refined_square_response() {
        // Independent scalar computation: q = 1 forced, y = 1/2,
        // xdot = 2 * ((1/2)^2 - 1) = -3/2.
        let expected = 2.0 * (0.5_f64.powi(2) - 1.0);
        assert_eq!(expected, -1.5);

        let inst = gen_parallel_links(&[1]).unwrap();
        let spec = DynamicsSpec::Refined {
            responses: ResponseSet::Shared(ResponseFn::power(2.0).unwrap()),
        };
        let xdot = rhs(&inst, &spec, &State::new(vec![2.0], 0.0)).unwrap();
        assert_relative_eq!(xdot[0], -1.5, max_relative = 1e-12);
    }

    #[test]
    fn fixed_point_state_has_zero_rhs() {
        let inst = gen_parallel_links(&[1]).unwrap();
        let state = State::new(vec![1.0], 0.0);
        for spec in [
            DynamicsSpec::Uniform,
            DynamicsSpec::NonUniform {
                reactivity: ReactivityFn::constant_shared(0.7).unwrap(),
            },
            DynamicsSpec::Refined {
                responses: ResponseSet::Shared(ResponseFn::power(2.0).unwrap()),
            },
        ] {
            let xdot = rhs(&inst, &spec, &state).unwrap();
            assert!(xdot[0].abs() < 1e-12, "variant {:?}", spec.variant());
        }
    }

    #[test]
    fn rewritten_parallel_links_example() {
        // From the current-divider solve: p = 2/3, lambda = (2/3, 1/3), so
        // the uniform rewritten rhs is (-1/3, -2/3).
        let inst = gen_parallel_links(&[1, 2]).unwrap();
        let state = State::new(vec![1.0, 1.0], 0.0);
        let xdot = rhs_rewritten(&inst, &DynamicsSpec::Uniform, &state).unwrap();
        assert_relative_eq!(xdot[0], -1.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(xdot[1], -2.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn rhs_matches_rewritten_on_random_states() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let specs = [
            DynamicsSpec::Uniform,
            DynamicsSpec::NonUniform {
                reactivity: ReactivityFn::constant_per_edge(vec![0.5, 1.0, 1.5, 0.8, 1.2]).unwrap(),
            },
            DynamicsSpec::Refined {
                responses: ResponseSet::Shared(ResponseFn::saturating(2.0, 1.0).unwrap()),
            },
        ];
        let inst = gen_random(2, 5, 2, 4, 21).unwrap();
        for trial in 0..100 {
            let state = State::new(
                (0..inst.m()).map(|_| rng.gen_range(0.05..3.0)).collect(),
                trial as f64 * 0.1,
            );
            for spec in &specs {
                let direct = rhs(&inst, spec, &state).unwrap();
                let rewritten = rhs_rewritten(&inst, spec, &state).unwrap();
                for e in 0..inst.m() {
                    let scale = 1.0 + direct[e].abs();
                    assert!(
                        (direct[e] - rewritten[e]).abs() <= 1e-10 * scale,
                        "variant {:?} edge {e}: {} vs {}",
                        spec.variant(),
                        direct[e],
                        rewritten[e]
                    );
                }
            }
        }
    }

    #[test]
    fn rhs_sign_matches_flow_capacity_mismatch() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let inst = gen_random(2, 4, 2, 3, 33).unwrap();
        let specs = [
            DynamicsSpec::NonUniform {
                reactivity: ReactivityFn::constant_shared(1.3).unwrap(),
            },
            DynamicsSpec::Refined {
                responses: ResponseSet::Shared(ResponseFn::power(0.5).unwrap()),
            },
        ];
        for _ in 0..50 {
            let state = State::new((0..inst.m()).map(|_| rng.gen_range(0.1..2.0)).collect(), 0.0);
            let sol = minenergy::solve_potentials(&inst, &state.x).unwrap();
            for spec in &specs {
                let xdot = rhs_from_solution(&inst, spec, &state, &sol).unwrap();
                for e in 0..inst.m() {
                    let mismatch = sol.q[e].abs() - state.x[e];
                    if mismatch.abs() > 1e-9 {
                        assert_eq!(
                            xdot[e].signum(),
                            mismatch.signum(),
                            "variant {:?} edge {e}",
                            spec.variant()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn uniform_is_constant_one_nonuniform() {
        let inst = gen_random(2, 5, 2, 4, 55).unwrap();
        let spec = DynamicsSpec::NonUniform {
            reactivity: ReactivityFn::constant_shared(1.0).unwrap(),
        };
        let state = State::new((0..inst.m()).map(|e| 0.4 + 0.3 * e as f64).collect(), 0.0);
        let uniform = rhs(&inst, &DynamicsSpec::Uniform, &state).unwrap();
        let nonuniform = rhs(&inst, &spec, &state).unwrap();
        assert_eq!(uniform, nonuniform);
    }

    #[test]
    fn identity_response_matches_uniform() {
        let inst = gen_random(2, 5, 2, 4, 56).unwrap();
        let spec = DynamicsSpec::Refined {
            responses: ResponseSet::Shared(ResponseFn::identity()),
        };
        let state = State::new((0..inst.m()).map(|e| 0.4 + 0.3 * e as f64).collect(), 0.0);
        let uniform = rhs(&inst, &DynamicsSpec::Uniform, &state).unwrap();
        let refined = rhs(&inst, &spec, &state).unwrap();
        for e in 0..inst.m() {
            assert_relative_eq!(uniform[e], refined[e], max_relative = 1e-14, epsilon = 1e-15);
        }
    }

    #[test]
    fn saturating_response_is_normalized_for_all_parameters() {
        for mu in [0.5, 1.0, 2.0, 3.5] {
            for alpha in [0.1, 1.0, 4.0] {
                let g = ResponseFn::saturating(mu, alpha).unwrap();
                assert_eq!(g.eval(1.0), 1.0, "mu = {mu}, alpha = {alpha}");
                assert_eq!(g.eval(0.0), 0.0);
                assert!(g.is_monotone_on(8.0, 400));
            }
        }
        for mu in [0.5, 1.0, 2.0] {
            let g = ResponseFn::power(mu).unwrap();
            assert_eq!(g.eval(1.0), 1.0);
            assert_eq!(g.eval(0.0), 0.0);
            assert!(g.is_monotone_on(8.0, 400));
        }
    }

    #[test]
    fn convex_power_linear_lower_bound_holds_globally() {
        for mu in [1.0, 1.5, 2.0, 3.0] {
            let g = ResponseFn::power(mu).unwrap();
            let alpha = g.linear_lower_bound.unwrap();
            assert_eq!(alpha, mu);
            assert!(g.verify_linear_lower_bound(alpha, 50.0, 5000));
        }
        // Concave powers admit no global linear lower bound.
        let g = ResponseFn::power(0.5).unwrap();
        assert_eq!(g.linear_lower_bound, None);
        assert!(!g.verify_linear_lower_bound(0.5, 50.0, 5000));
    }

    #[test]
    fn reactivity_bound_violation_is_detected() {
        let inst = gen_parallel_links(&[1]).unwrap();
        // A lying declaration: claims epsilon = 1 but evaluates to e^{-t}/2.
        let mut reactivity = ReactivityFn::exp_decay(0.5, 1.0).unwrap();
        reactivity.lower = 0.4;
        let spec = DynamicsSpec::NonUniform { reactivity };
        let late = State::new(vec![1.5], 10.0);
        assert!(matches!(
            rhs(&inst, &spec, &late),
            Err(Error::ReactivityBoundViolated { .. })
        ));
    }

    #[test]
    fn reformulate_identity_and_shift() {
        let inst = gen_parallel_links(&[1, 1]).unwrap();

        let (same, map) = reformulate_nonuniform(&inst, &[1, 1]).unwrap();
        assert_eq!(same.c(), inst.c());
        assert_eq!(map.to_transformed(&[0.3, 0.7]), vec![0.3, 0.7]);

        let (transformed, map) = reformulate_nonuniform(&inst, &[1, 2]).unwrap();
        assert_eq!(transformed.c(), &[1, 2]);
        let report = crate::oracle::enumerate_bfs(&transformed).unwrap();
        assert_eq!(report.x_star(), vec![1.0, 0.0]);

        let x = vec![0.25, 0.5];
        assert_eq!(map.to_original(&map.to_transformed(&x)), x);

        assert!(matches!(
            reformulate_nonuniform(&inst, &[1, 0]),
            Err(Error::NonPositiveReactivity)
        ));
    }

    #[test]
    fn spec_json_shape() {
        let spec = DynamicsSpec::NonUniform {
            reactivity: ReactivityFn::exp_decay(0.5, 1.0).unwrap(),
        };
        let json = spec.to_json();
        assert!(json.contains("\"variant\": \"nonuniform\""));
        assert!(json.contains("\"kind\": \"exp_decay\""));
        assert_eq!(DynamicsSpec::from_json(&json).unwrap(), spec);

        let refined: DynamicsSpec = DynamicsSpec::from_json(
            r#"{"variant": "refined", "response": {"kind": "saturating", "mu": 2.0, "alpha": 1.0}}"#,
        )
        .unwrap();
        assert!(matches!(
            refined,
            DynamicsSpec::Refined {
                responses: ResponseSet::Shared(_)
            }
        ));

        let uniform = DynamicsSpec::from_json(r#"{"variant": "uniform"}"#).unwrap();
        assert_eq!(uniform, DynamicsSpec::Uniform);
        assert!(DynamicsSpec::from_json(r#"{"variant": "directed"}"#).is_err());
    }

    #[test]
    fn decay_rate_caps() {
        assert_eq!(DynamicsSpec::Uniform.decay_rate_cap(3), 1.0);
        let nonuniform = DynamicsSpec::NonUniform {
            reactivity: ReactivityFn::exp_decay(0.5, 1.0).unwrap(),
        };
        assert_eq!(nonuniform.decay_rate_cap(3), 0.5);
        let refined = DynamicsSpec::Refined {
            responses: ResponseSet::Shared(ResponseFn::power(2.0).unwrap()),
        };
        assert_eq!(refined.decay_rate_cap(3), 1.0);
    }
}
