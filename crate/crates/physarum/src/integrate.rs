//! Explicit time integration with a positivity guard.
//!
//! The continuous flow keeps `x(t) > 0` for all finite `t`, so any excursion
//! below the floor `x_min` is a discretization artifact or a genuine finite
//! time blow-up. A violating step is retried at half the step size
//! (`adapt = true`) or clamped with a logged event (`adapt = false`).
//! Step-size underflow and clamps that keep pushing downward are classified
//! as blow-up, which is how the inverse-reactivity example is detected
//! mechanically.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, DynamicsSpec};
use crate::instance::ProblemInstance;
use crate::lyapunov;
use crate::minenergy::{self, State};
use crate::{Error, Result};

/// Smallest step size the adaptation may reach before declaring blow-up.
const H_MIN: f64 = 1e-15;
/// A clamped coordinate whose velocity is still below this threshold is
/// being pushed through the floor: blow-up.
const BLOWUP_PUSH: f64 = -1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Euler,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Base step size.
    pub h: f64,
    /// Time horizon.
    pub t_end: f64,
    /// Positivity floor; must sit below the smallest initial capacity.
    pub x_min: f64,
    /// Halve the step on floor violations instead of clamping.
    pub adapt: bool,
    /// Record every k-th accepted step (the initial and terminal states are
    /// always recorded).
    pub record_every: usize,
    /// Early-convergence threshold on `‖|q| − x‖∞`; `0` disables detection.
    pub fp_tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk4,
            h: 1e-3,
            t_end: 50.0,
            x_min: 1e-12,
            adapt: true,
            record_every: 1,
            fp_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    ReachedHorizon,
    ConvergedToFixedPoint,
    BlowUp,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    FloorClamp { t: f64, edges: Vec<usize> },
    StepSizeUnderflow { t: f64, h: f64 },
    BlowUpDetected { t: f64 },
    RunError { t: f64, message: String },
}

/// Per-evaluation observables carried along with the vector field.
#[derive(Debug, Clone)]
pub struct Observables {
    pub q: Vec<f64>,
    pub lambda: Vec<f64>,
    pub lyapunov: f64,
    pub dlyapunov_dt: f64,
    pub residual: f64,
}

impl Observables {
    /// Placeholder observables for right-hand sides that have no electrical
    /// interpretation.
    pub fn zeros(m: usize) -> Self {
        Self {
            q: vec![0.0; m],
            lambda: vec![0.0; m],
            lyapunov: 0.0,
            dlyapunov_dt: 0.0,
            residual: 0.0,
        }
    }
}

/// One vector-field evaluation: the velocity plus observables at that state.
#[derive(Debug, Clone)]
pub struct RhsEval {
    pub xdot: Vec<f64>,
    pub obs: Observables,
}

/// One recorded trajectory row.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
    pub q: Vec<f64>,
    pub lambda: Vec<f64>,
    pub lyapunov: f64,
    pub dlyapunov_dt: f64,
    pub residual: f64,
}

/// A completed run: sampled rows (strictly increasing in `t`), events, and
/// the terminal status.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub m: usize,
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
    pub status: Status,
    pub clamp_count: usize,
}

impl TrajectoryRecord {
    pub fn terminal(&self) -> &Sample {
        self.samples.last().expect("records hold at least one row")
    }

    /// CSV with header `t,x_1..x_m,q_1..q_m,L,dLdt,residual` and 17
    /// significant digits per value (round-trip safe).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "t")?;
        for e in 1..=self.m {
            write!(w, ",x_{e}")?;
        }
        for e in 1..=self.m {
            write!(w, ",q_{e}")?;
        }
        writeln!(w, ",L,dLdt,residual")?;
        for row in &self.samples {
            write!(w, "{:.16e}", row.t)?;
            for v in &row.x {
                write!(w, ",{v:.16e}")?;
            }
            for v in &row.q {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(
                w,
                ",{:.16e},{:.16e},{:.16e}",
                row.lyapunov, row.dlyapunov_dt, row.residual
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))?;
        Ok(())
    }

    /// Events, status, and clamp count as a JSON sidecar document.
    pub fn sidecar_json(&self) -> String {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            status: &'a Status,
            clamp_count: usize,
            terminal_t: f64,
            events: &'a [Event],
        }
        let mut s = serde_json::to_string_pretty(&Sidecar {
            status: &self.status,
            clamp_count: self.clamp_count,
            terminal_t: self.terminal().t,
            events: &self.events,
        })
        .expect("sidecar serialization is total");
        s.push('\n');
        s
    }
}

/// Parse rows written by [`TrajectoryRecord::write_csv`].
pub fn read_csv<R: BufRead>(reader: R) -> Result<Vec<Sample>> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Data("empty trajectory file".into()))??;
    let columns: Vec<&str> = header.trim().split(',').collect();
    let m = columns.iter().filter(|c| c.starts_with("x_")).count();
    if m == 0 || columns.len() != 2 * m + 4 {
        return Err(Error::Data(format!("unrecognized header: {header}")));
    }
    let mut samples = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let values: Vec<f64> = line
            .trim()
            .split(',')
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Data(format!("bad float: {v}")))
            })
            .collect::<Result<_>>()?;
        if values.len() != 2 * m + 4 {
            return Err(Error::Data(format!(
                "row has {} fields, expected {}",
                values.len(),
                2 * m + 4
            )));
        }
        let x = values[1..1 + m].to_vec();
        let q = values[1 + m..1 + 2 * m].to_vec();
        let lambda = x
            .iter()
            .zip(&q)
            .map(|(&xe, &qe)| if xe > 0.0 { qe.abs() / xe } else { 0.0 })
            .collect();
        samples.push(Sample {
            t: values[0],
            x,
            q,
            lambda,
            lyapunov: values[1 + 2 * m],
            dlyapunov_dt: values[2 + 2 * m],
            residual: values[3 + 2 * m],
        });
    }
    if samples.is_empty() {
        return Err(Error::Data("trajectory file has no rows".into()));
    }
    Ok(samples)
}

enum StepOutcome {
    Proposed(Vec<f64>),
    FloorHit,
}

struct Stepper<'a, F> {
    f: &'a mut F,
    method: Method,
    x_min: f64,
}

impl<F> Stepper<'_, F>
where
    F: FnMut(&[f64], f64) -> Result<RhsEval>,
{
    /// Attempt a step from `(x, t)` with slope `k1` already evaluated there.
    /// `clamp_stages = true` evaluates intermediate stages at states clamped
    /// to the floor instead of reporting a violation (non-adaptive mode).
    fn propose(
        &mut self,
        x: &[f64],
        t: f64,
        h: f64,
        k1: &[f64],
        clamp_stages: bool,
    ) -> Result<StepOutcome> {
        let advance = |x: &[f64], k: &[f64], dt: f64| -> Vec<f64> {
            x.iter().zip(k).map(|(xi, ki)| xi + dt * ki).collect()
        };
        let below_floor = |x: &[f64]| x.iter().any(|&v| v < self.x_min);
        let stage_state = |state: Vec<f64>| -> Option<Vec<f64>> {
            if !below_floor(&state) {
                return Some(state);
            }
            if clamp_stages {
                Some(state.iter().map(|&v| v.max(self.x_min)).collect())
            } else {
                None
            }
        };

        let proposal = match self.method {
            Method::Euler => advance(x, k1, h),
            Method::Rk4 => {
                let Some(x2) = stage_state(advance(x, k1, h / 2.0)) else {
                    return Ok(StepOutcome::FloorHit);
                };
                let k2 = (self.f)(&x2, t + h / 2.0)?.xdot;
                let Some(x3) = stage_state(advance(x, &k2, h / 2.0)) else {
                    return Ok(StepOutcome::FloorHit);
                };
                let k3 = (self.f)(&x3, t + h / 2.0)?.xdot;
                let Some(x4) = stage_state(advance(x, &k3, h)) else {
                    return Ok(StepOutcome::FloorHit);
                };
                let k4 = (self.f)(&x4, t + h)?.xdot;
                x.iter()
                    .enumerate()
                    .map(|(e, xi)| xi + h / 6.0 * (k1[e] + 2.0 * k2[e] + 2.0 * k3[e] + k4[e]))
                    .collect()
            }
        };
        if below_floor(&proposal) && !clamp_stages {
            return Ok(StepOutcome::FloorHit);
        }
        Ok(StepOutcome::Proposed(proposal))
    }
}

/// Integrate an arbitrary right-hand side. The closure returns the velocity
/// plus the observables recorded in the trajectory; instance-based runs wrap
/// the potential solve, scalar experiment presets supply their own.
pub fn simulate_rhs<F>(
    mut f: F,
    m: usize,
    x0: &[f64],
    config: &IntegratorConfig,
) -> Result<TrajectoryRecord>
where
    F: FnMut(&[f64], f64) -> Result<RhsEval>,
{
    if x0.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "x0 has {} entries for {} edges",
            x0.len(),
            m
        )));
    }
    if x0.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::Config("x0 must be strictly positive".into()));
    }
    if !(config.h > 0.0) || !(config.t_end > 0.0) {
        return Err(Error::Config("h and t_end must be positive".into()));
    }
    let x0_min = x0.iter().copied().fold(f64::INFINITY, f64::min);
    if !(config.x_min > 0.0) || config.x_min >= x0_min {
        return Err(Error::Config(format!(
            "x_min must satisfy 0 < x_min < min(x0) = {x0_min}"
        )));
    }
    if config.record_every == 0 {
        return Err(Error::Config("record_every must be at least 1".into()));
    }

    let mut record = TrajectoryRecord {
        m,
        samples: Vec::new(),
        events: Vec::new(),
        status: Status::ReachedHorizon,
        clamp_count: 0,
    };
    let push_sample = |record: &mut TrajectoryRecord, t: f64, x: &[f64], obs: &Observables| {
        if record.samples.last().is_some_and(|s| s.t >= t) {
            return;
        }
        record.samples.push(Sample {
            t,
            x: x.to_vec(),
            q: obs.q.clone(),
            lambda: obs.lambda.clone(),
            lyapunov: obs.lyapunov,
            dlyapunov_dt: obs.dlyapunov_dt,
            residual: obs.residual,
        });
    };

    let mut t = 0.0_f64;
    let mut x = x0.to_vec();
    let mut current = f(&x, t)?;
    record.samples.push(Sample {
        t,
        x: x.clone(),
        q: current.obs.q.clone(),
        lambda: current.obs.lambda.clone(),
        lyapunov: current.obs.lyapunov,
        dlyapunov_dt: current.obs.dlyapunov_dt,
        residual: current.obs.residual,
    });

    let horizon_eps = 1e-12 * config.t_end.max(1.0);
    let mut accepted = 0usize;

    loop {
        let converged = config.fp_tol > 0.0
            && current
                .obs
                .q
                .iter()
                .zip(&x)
                .map(|(qe, xe)| (qe.abs() - xe).abs())
                .fold(0.0_f64, f64::max)
                <= config.fp_tol;
        if converged {
            record.status = Status::ConvergedToFixedPoint;
            push_sample(&mut record, t, &x, &current.obs);
            break;
        }
        if t >= config.t_end - horizon_eps {
            record.status = Status::ReachedHorizon;
            push_sample(&mut record, t, &x, &current.obs);
            break;
        }

        let mut h = config.h.min(config.t_end - t);
        let mut stepper = Stepper {
            f: &mut f,
            method: config.method,
            x_min: config.x_min,
        };

        // Resolve one step, adapting or clamping on floor violations.
        let mut proposal: Option<(Vec<f64>, Vec<usize>)> = None;
        let step_error: Option<Error> = loop {
            match stepper.propose(&x, t, h, &current.xdot, false) {
                Ok(StepOutcome::Proposed(next)) => {
                    proposal = Some((next, Vec::new()));
                    break None;
                }
                Ok(StepOutcome::FloorHit) if config.adapt => {
                    h /= 2.0;
                    if h < H_MIN {
                        break None;
                    }
                }
                Ok(StepOutcome::FloorHit) => {
                    match stepper.propose(&x, t, h, &current.xdot, true) {
                        Ok(StepOutcome::Proposed(raw)) => {
                            let clamped: Vec<usize> = (0..m)
                                .filter(|&e| raw[e] < config.x_min)
                                .collect();
                            let next = raw
                                .iter()
                                .map(|&v| v.max(config.x_min))
                                .collect();
                            proposal = Some((next, clamped));
                            break None;
                        }
                        Ok(StepOutcome::FloorHit) => unreachable!("clamped stages cannot miss"),
                        Err(e) => break Some(e),
                    }
                }
                Err(e) => break Some(e),
            }
        };

        if let Some(e) = step_error {
            record.events.push(Event::RunError {
                t,
                message: e.to_string(),
            });
            record.status = Status::Error;
            push_sample(&mut record, t, &x, &current.obs);
            break;
        }
        let Some((x_next, clamped)) = proposal else {
            // Adaptation underflowed: the flow is being forced through the
            // floor faster than any step can resolve.
            record.events.push(Event::StepSizeUnderflow { t, h });
            record.events.push(Event::BlowUpDetected { t });
            record.status = Status::BlowUp;
            push_sample(&mut record, t, &x, &current.obs);
            break;
        };

        let t_next = t + h;
        let next = match f(&x_next, t_next) {
            Ok(eval) => eval,
            Err(e) => {
                record.events.push(Event::RunError {
                    t: t_next,
                    message: e.to_string(),
                });
                record.status = Status::Error;
                push_sample(&mut record, t, &x, &current.obs);
                break;
            }
        };

        t = t_next;
        x = x_next;
        current = next;
        accepted += 1;

        if !clamped.is_empty() {
            record.clamp_count += clamped.len();
            record.events.push(Event::FloorClamp {
                t,
                edges: clamped.clone(),
            });
            if clamped.iter().any(|&e| current.xdot[e] < BLOWUP_PUSH) {
                record.events.push(Event::BlowUpDetected { t });
                record.status = Status::BlowUp;
                push_sample(&mut record, t, &x, &current.obs);
                break;
            }
        }

        if accepted % config.record_every == 0 {
            push_sample(&mut record, t, &x, &current.obs);
        }
    }

    Ok(record)
}

/// Simulate one of the spec'd dynamics variants on an instance, recording
/// currents, normalized drops, the Lyapunov value and its analytic
/// derivative, and the feasibility residual at every sampled row.
pub fn simulate(
    instance: &ProblemInstance,
    spec: &DynamicsSpec,
    x0: &[f64],
    config: &IntegratorConfig,
) -> Result<TrajectoryRecord> {
    spec.validate_for(instance.m())?;
    let f = |x: &[f64], t: f64| -> Result<RhsEval> {
        let sol = minenergy::solve_potentials(instance, x)?;
        let state = State::new(x.to_vec(), t);
        let xdot = dynamics::rhs_from_solution(instance, spec, &state, &sol)?;
        let lambda = dynamics::lambdas(instance, &sol);
        let lyap = lyapunov::lyapunov_value(instance, x, &sol);
        let dldt = lyapunov::dldt_analytic(instance, spec, &state, &sol);
        Ok(RhsEval {
            xdot,
            obs: Observables {
                q: sol.q,
                lambda,
                lyapunov: lyap,
                dlyapunov_dt: dldt,
                residual: sol.residual,
            },
        })
    };
    simulate_rhs(f, instance.m(), x0, config)
}

/// Slack tolerance for the trajectory bounds.
pub const BOUNDS_TOL: f64 = 1e-9;

/// Verification of the a priori trajectory bounds at every recorded sample:
/// `|q_e| ≤ D‖b‖₁`, `x_e(t) ≥ x_e(0) e^(−Ct)`, and
/// `x_e(t) ≤ max(x_e(0), D‖b‖₁)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub current_ok: bool,
    pub lower_ok: bool,
    pub upper_ok: bool,
    /// Worst slack of `D‖b‖₁ − |q_e|` over all samples and edges.
    pub min_current_slack: f64,
    /// Worst slack of `x_e − x_e(0)e^(−Ct)`.
    pub min_lower_slack: f64,
    /// Worst slack of `max(x_e(0), D‖b‖₁) − x_e`.
    pub min_upper_slack: f64,
    pub samples_checked: usize,
}

impl BoundsReport {
    pub fn all_ok(&self) -> bool {
        self.current_ok && self.lower_ok && self.upper_ok
    }
}

/// Check a recorded trajectory against the decay and boundedness estimates.
/// `d_bound` is the exact max-subdeterminant `D` from the oracle; the decay
/// constant `C` comes from the spec's declared reactivity cap.
pub fn bounds_check(
    record: &TrajectoryRecord,
    instance: &ProblemInstance,
    spec: &DynamicsSpec,
    d_bound: f64,
) -> BoundsReport {
    let c_cap = spec.decay_rate_cap(instance.m());
    let q_max = d_bound * instance.b_one_norm();
    let x0 = &record.samples[0].x;

    let mut min_current = f64::INFINITY;
    let mut min_lower = f64::INFINITY;
    let mut min_upper = f64::INFINITY;
    for sample in &record.samples {
        for e in 0..record.m {
            let decay = if c_cap.is_finite() {
                (-c_cap * sample.t).exp()
            } else if sample.t == 0.0 {
                1.0
            } else {
                0.0
            };
            min_current = min_current.min(q_max - sample.q[e].abs());
            min_lower = min_lower.min(sample.x[e] - x0[e] * decay);
            min_upper = min_upper.min(x0[e].max(q_max) - sample.x[e]);
        }
    }
    BoundsReport {
        current_ok: min_current >= -BOUNDS_TOL,
        lower_ok: min_lower >= -BOUNDS_TOL,
        upper_ok: min_upper >= -BOUNDS_TOL,
        min_current_slack: min_current,
        min_lower_slack: min_lower,
        min_upper_slack: min_upper,
        samples_checked: record.samples.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ReactivityFn, ResponseFn, ResponseSet};
    use crate::instance::gen_parallel_links;
    use approx::assert_relative_eq;

    fn config(h: f64, t_end: f64) -> IntegratorConfig {
        IntegratorConfig {
            h,
            t_end,
            ..IntegratorConfig::default()
        }
    }

    #[test]
    fn single_edge_matches_closed_form() {
        // ẋ = 1 − x from x(0) = 2 has solution x(t) = 1 + e^(−t).
        let inst = gen_parallel_links(&[1]).unwrap();
        let record = simulate(&inst, &DynamicsSpec::Uniform, &[2.0], &config(1e-3, 5.0)).unwrap();
        let terminal = record.terminal();
        assert!((terminal.x[0] - (1.0 + (-5.0_f64).exp())).abs() <= 1e-6);
        assert_eq!(record.status, Status::ReachedHorizon);
        assert_eq!(record.clamp_count, 0);
    }

    #[test]
    fn euler_is_first_order_accurate() {
        let inst = gen_parallel_links(&[1]).unwrap();
        let mut cfg = config(1e-3, 2.0);
        cfg.method = Method::Euler;
        let record = simulate(&inst, &DynamicsSpec::Uniform, &[2.0], &cfg).unwrap();
        let exact = 1.0 + (-2.0_f64).exp();
        assert!((record.terminal().x[0] - exact).abs() < 1e-2);
    }

    #[test]
    fn rk4_halving_shrinks_error_by_at_least_eight() {
        let inst = gen_parallel_links(&[1, 3]).unwrap();
        let x0 = [2.0, 0.4];
        let run = |h: f64| {
            let mut cfg = config(h, 1.0);
            cfg.fp_tol = 0.0;
            simulate(&inst, &DynamicsSpec::Uniform, &x0, &cfg)
                .unwrap()
                .terminal()
                .x
                .clone()
        };
        let reference = run(1.0 / 1024.0);
        let err = |x: &[f64]| {
            x.iter()
                .zip(&reference)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max)
        };
        let coarse = err(&run(0.04));
        let fine = err(&run(0.02));
        assert!(
            coarse / fine >= 8.0,
            "expected fourth-order shrinkage, got {coarse:.3e} / {fine:.3e} = {:.2}",
            coarse / fine
        );
    }

    #[test]
    fn starting_at_fixed_point_converges_immediately() {
        let inst = gen_parallel_links(&[1]).unwrap();
        let record = simulate(&inst, &DynamicsSpec::Uniform, &[1.0], &config(1e-3, 5.0)).unwrap();
        assert_eq!(record.status, Status::ConvergedToFixedPoint);
        assert_eq!(record.samples.len(), 1);
        assert_eq!(record.terminal().t, 0.0);
    }

    #[test]
    fn inverse_reactivity_blows_up_near_initial_capacity() {
        // ẋ = (1/x)(0 − x) = −1: the solution leaves the domain at t = x(0).
        for x0 in [0.5_f64, 1.0, 2.0] {
            for adapt in [true, false] {
                let f = |x: &[f64], _t: f64| -> Result<RhsEval> {
                    Ok(RhsEval {
                        xdot: vec![-1.0 * x[0] / x[0]],
                        obs: Observables::zeros(1),
                    })
                };
                let cfg = IntegratorConfig {
                    t_end: x0 + 1.0,
                    fp_tol: 0.0,
                    adapt,
                    record_every: 100,
                    ..IntegratorConfig::default()
                };
                let record = simulate_rhs(f, 1, &[x0], &cfg).unwrap();
                assert_eq!(record.status, Status::BlowUp, "x0 = {x0}, adapt = {adapt}");
                assert!(
                    (record.terminal().t - x0).abs() <= 0.01,
                    "blow-up at t = {} for x0 = {x0}",
                    record.terminal().t
                );
            }
        }
    }

    #[test]
    fn no_recorded_state_below_floor_and_times_increase() {
        let inst = gen_parallel_links(&[1, 2, 5]).unwrap();
        let spec = DynamicsSpec::Refined {
            responses: ResponseSet::Shared(ResponseFn::power(2.0).unwrap()),
        };
        let mut cfg = config(1e-2, 30.0);
        cfg.record_every = 7;
        let record = simulate(&inst, &spec, &[2.0, 0.01, 1.0], &cfg).unwrap();
        for pair in record.samples.windows(2) {
            assert!(pair[0].t < pair[1].t);
        }
        for sample in &record.samples {
            for &xe in &sample.x {
                assert!(xe >= cfg.x_min);
            }
        }
    }

    #[test]
    fn mid_run_failures_are_recorded_as_error_status() {
        let inst = gen_parallel_links(&[1]).unwrap();
        // Reactivity whose declaration is broken for t > 0.7 or so.
        let mut reactivity = ReactivityFn::exp_decay(1.0, 1.0).unwrap();
        reactivity.lower = 0.5;
        let spec = DynamicsSpec::NonUniform { reactivity };
        let record = simulate(&inst, &spec, &[2.0], &config(1e-2, 5.0)).unwrap();
        assert_eq!(record.status, Status::Error);
        assert!(record
            .events
            .iter()
            .any(|e| matches!(e, Event::RunError { .. })));
        assert!(record.terminal().t < 5.0);
    }

    #[test]
    fn csv_round_trip_preserves_values() {
        let inst = gen_parallel_links(&[1, 2]).unwrap();
        let mut cfg = config(1e-2, 1.0);
        cfg.record_every = 10;
        let record = simulate(&inst, &DynamicsSpec::Uniform, &[1.0, 1.0], &cfg).unwrap();
        let mut buf = Vec::new();
        record.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x_1,x_2,q_1,q_2,L,dLdt,residual\n"));
        let samples = read_csv(std::io::BufReader::new(text.as_bytes())).unwrap();
        assert_eq!(samples.len(), record.samples.len());
        for (a, b) in record.samples.iter().zip(&samples) {
            assert_eq!(a.t, b.t);
            assert_eq!(a.x, b.x);
            assert_eq!(a.q, b.q);
            assert_eq!(a.lyapunov, b.lyapunov);
            assert_eq!(a.dlyapunov_dt, b.dlyapunov_dt);
        }
    }

    #[test]
    fn sidecar_reports_status_and_events() {
        let inst = gen_parallel_links(&[1]).unwrap();
        let record = simulate(&inst, &DynamicsSpec::Uniform, &[2.0], &config(1e-2, 1.0)).unwrap();
        let sidecar = record.sidecar_json();
        assert!(sidecar.contains("\"status\": \"reached_horizon\""));
        assert!(sidecar.contains("\"clamp_count\": 0"));
    }

    #[test]
    fn bounds_hold_on_single_edge_run() {
        // a ≡ 1, x(0) = 2: x(t) = 1 + e^(−t) sits between 2e^(−t) and 2,
        // and |q| = 1 = D‖b‖₁.
        let inst = gen_parallel_links(&[1]).unwrap();
        let record = simulate(&inst, &DynamicsSpec::Uniform, &[2.0], &config(1e-3, 5.0)).unwrap();
        let report = bounds_check(&record, &inst, &DynamicsSpec::Uniform, 1.0);
        assert!(report.all_ok(), "{report:?}");

        // And for the exp-decay counterexample with C = 1/2.
        let spec = DynamicsSpec::NonUniform {
            reactivity: ReactivityFn::exp_decay(0.5, 1.0).unwrap(),
        };
        let record = simulate(&inst, &spec, &[0.5], &config(1e-3, 20.0)).unwrap();
        let report = bounds_check(&record, &inst, &spec, 1.0);
        assert!(report.all_ok(), "{report:?}");
        // The counterexample additionally stays below 3/4.
        for sample in &record.samples {
            assert!(sample.x[0] <= 0.75 + 1e-6);
        }
    }

    #[test]
    fn rejects_bad_configurations() {
        let inst = gen_parallel_links(&[1]).unwrap();
        assert!(matches!(
            simulate(&inst, &DynamicsSpec::Uniform, &[0.0], &config(1e-3, 1.0)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            simulate(&inst, &DynamicsSpec::Uniform, &[1.0], &config(-1.0, 1.0)),
            Err(Error::Config(_))
        ));
        let mut cfg = config(1e-3, 1.0);
        cfg.x_min = 2.0;
        assert!(matches!(
            simulate(&inst, &DynamicsSpec::Uniform, &[1.0], &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn record_every_strides_samples() {
        let inst = gen_parallel_links(&[1]).unwrap();
        let mut cfg = config(1e-2, 0.5);
        cfg.fp_tol = 0.0;
        cfg.record_every = 10;
        let record = simulate(&inst, &DynamicsSpec::Uniform, &[2.0], &cfg).unwrap();
        // 50 steps: t = 0, then every 10th step, terminal included.
        assert_eq!(record.samples.len(), 6);
        assert_relative_eq!(record.samples[1].t - record.samples[0].t, 0.1, epsilon = 1e-9);
    }
}
