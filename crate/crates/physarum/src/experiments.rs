//! Named, reproducible experiment presets. Each preset generates its
//! instances, consults the oracle, simulates, and judges the outcome using
//! only recorded trajectory and oracle quantities. Outcomes are
//! deterministic in `(id, seed)`.

use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::dynamics::{
    self, DynamicsSpec, ReactivityFn, ResponseFn, ResponseSet,
};
use crate::instance::{gen_parallel_links, gen_random, ProblemInstance};
use crate::integrate::{
    self, simulate, simulate_rhs, IntegratorConfig, Observables, RhsEval, Status,
    TrajectoryRecord,
};
use crate::lyapunov;
use crate::minenergy;
use crate::oracle::{self, OracleReport};
use crate::parallel;
use crate::{Error, Result};

/// Identifiers of every built-in preset.
pub const PRESET_IDS: &[&str] = &[
    "blowup-inverse-reactivity",
    "nonconvergence-exp-decay",
    "uniform-converges-random",
    "nonuniform-constant-a",
    "refined-power-response",
    "refined-saturating-response",
    "nonuniform-monotone-a",
    "minimum-risk-reweighting",
    "lyapunov-monotone-suite",
    "bounds-suite",
];

/// Result of one preset execution.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentOutcome {
    pub id: String,
    pub seed: u64,
    pub pass: bool,
    pub evidence: Value,
    pub artifacts: Vec<String>,
}

impl ExperimentOutcome {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("outcome serialization is total");
        s.push('\n');
        s
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn salt_hash(salt: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in salt.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn sub_seed(seed: u64, salt: &str, index: u64) -> u64 {
    splitmix64(seed ^ salt_hash(salt) ^ splitmix64(index))
}

/// A certified random instance together with its oracle report and how many
/// candidates were rejected before certification.
#[derive(Debug, Clone)]
pub struct CertifiedInstance {
    pub instance: ProblemInstance,
    pub report: OracleReport,
    pub resamples: usize,
    pub margin: f64,
}

/// Resample `gen_random` until the oracle certifies distinct costs and the
/// optimum's dual margin stays at or below `margin_max`. The margin caps the
/// slowest decay rate of non-basic edges, which keeps convergence inside a
/// fixed horizon; `margin_max = 1.0` disables that part of the filter.
pub fn certified_random_instance(
    n: usize,
    m: usize,
    entry_bound: i64,
    cost_bound: i64,
    seed: u64,
    margin_max: f64,
    max_tries: usize,
) -> Result<CertifiedInstance> {
    for attempt in 0..max_tries {
        let candidate_seed = splitmix64(seed.wrapping_add(attempt as u64));
        let Ok(mut instance) = gen_random(n, m, entry_bound, cost_bound, candidate_seed) else {
            continue;
        };
        let Ok(report) = oracle::enumerate_bfs(&instance) else {
            continue;
        };
        if !report.distinct_costs {
            continue;
        }
        let Ok(margin) = oracle::optimum_margin(&instance, &report) else {
            continue;
        };
        if margin > margin_max {
            continue;
        }
        oracle::certify(&mut instance, &report);
        return Ok(CertifiedInstance {
            instance,
            report,
            resamples: attempt,
            margin,
        });
    }
    Err(Error::GenerationFailed { tries: max_tries })
}

/// One simulation job for batch execution.
#[derive(Debug, Clone)]
pub struct SimJob {
    pub instance: ProblemInstance,
    pub spec: DynamicsSpec,
    pub x0: Vec<f64>,
    pub config: IntegratorConfig,
}

/// Run a batch of independent simulations, in parallel when the `parallel`
/// feature is on. Results keep the job order.
pub fn simulate_batch(jobs: &[SimJob]) -> Vec<Result<TrajectoryRecord>> {
    parallel::slice_map(jobs, |job| {
        simulate(&job.instance, &job.spec, &job.x0, &job.config)
    })
}

/// Run several presets, in parallel when the `parallel` feature is on.
pub fn run_suite(
    runs: &[(String, u64)],
    artifact_dir: Option<&Path>,
) -> Vec<Result<ExperimentOutcome>> {
    parallel::slice_map(runs, |(id, seed)| run_preset(id, *seed, artifact_dir))
}

/// Execute a preset by id. Artifacts (trajectory CSVs with event sidecars,
/// at most five per preset) are written only when `artifact_dir` is given.
pub fn run_preset(
    id: &str,
    seed: u64,
    artifact_dir: Option<&Path>,
) -> Result<ExperimentOutcome> {
    let (pass, evidence, trajectories) = match id {
        "blowup-inverse-reactivity" => blowup_inverse_reactivity()?,
        "nonconvergence-exp-decay" => nonconvergence_exp_decay()?,
        "uniform-converges-random" => convergence_preset(seed, "uniform", |_, _, _| DynamicsSpec::Uniform)?,
        "nonuniform-constant-a" => convergence_preset(seed, "nonuniform-const", |_, inst, rng| {
            let values = (0..inst.m()).map(|_| rng.gen_range(0.5..=2.0)).collect();
            DynamicsSpec::NonUniform {
                reactivity: ReactivityFn::constant_per_edge(values).expect("values are positive"),
            }
        })?,
        "refined-power-response" => refined_power_response(seed)?,
        "refined-saturating-response" => convergence_preset(seed, "refined-sat", |i, _, _| {
            let params = [(1.0, 1.0), (2.0, 1.0), (1.0, 0.5), (2.0, 2.0)];
            let (mu, alpha) = params[i % params.len()];
            DynamicsSpec::Refined {
                responses: ResponseSet::Shared(
                    ResponseFn::saturating(mu, alpha).expect("catalog parameters are valid"),
                ),
            }
        })?,
        "nonuniform-monotone-a" => nonuniform_monotone_a(seed)?,
        "minimum-risk-reweighting" => minimum_risk_reweighting(seed)?,
        "lyapunov-monotone-suite" => lyapunov_monotone_suite(seed)?,
        "bounds-suite" => bounds_suite(seed)?,
        other => return Err(Error::UnknownPreset(other.to_string())),
    };

    let mut artifacts = Vec::new();
    if let Some(dir) = artifact_dir {
        std::fs::create_dir_all(dir)?;
        for (run, record) in trajectories.iter().take(5).enumerate() {
            let csv = dir.join(format!("{id}-{seed}-run{run}.csv"));
            record.save_csv(&csv)?;
            let sidecar = dir.join(format!("{id}-{seed}-run{run}.events.json"));
            std::fs::write(&sidecar, record.sidecar_json())?;
            artifacts.push(csv.display().to_string());
            artifacts.push(sidecar.display().to_string());
        }
    }

    Ok(ExperimentOutcome {
        id: id.to_string(),
        seed,
        pass,
        evidence,
        artifacts,
    })
}

type PresetResult = Result<(bool, Value, Vec<TrajectoryRecord>)>;

/// Scalar analog of the `a = 1/x` example: no constraints, so `q = 0` and
/// `ẋ = (1/x)(0 − x) = −1`. The solution leaves the positive orthant at
/// `t = x(0)`; the integrator must flag blow-up there.
fn blowup_inverse_reactivity() -> PresetResult {
    let reactivity = ReactivityFn::inverse_state();
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut pass = true;
    for x0 in [0.5_f64, 1.0, 2.0] {
        let f = |x: &[f64], t: f64| -> Result<RhsEval> {
            let a = reactivity.eval(0, x, t);
            let xdot = a * (0.0 - x[0]);
            Ok(RhsEval {
                xdot: vec![xdot],
                obs: Observables {
                    q: vec![0.0],
                    lambda: vec![0.0],
                    // Minimizing |x| subject to nothing: L = c^T x with c = 1.
                    lyapunov: x[0],
                    dlyapunov_dt: xdot,
                    residual: 0.0,
                },
            })
        };
        let config = IntegratorConfig {
            t_end: x0 + 1.0,
            fp_tol: 0.0,
            record_every: 50,
            ..IntegratorConfig::default()
        };
        let record = simulate_rhs(f, 1, &[x0], &config)?;
        let t_blow = record.terminal().t;
        let ok = record.status == Status::BlowUp && (t_blow - x0).abs() <= 0.01;
        pass &= ok;
        rows.push(json!({
            "x0": x0,
            "status": format!("{:?}", record.status),
            "t_terminal": t_blow,
            "deviation_from_x0": (t_blow - x0).abs(),
            "ok": ok,
        }));
        records.push(record);
    }
    Ok((pass, json!({ "runs": rows }), records))
}

/// The vanishing-reactivity counterexample: `ẋ = e^(−t)/2 · (1 − x)` from
/// `x(0) = 1/2` stays at or below 3/4 forever and misses the optimum
/// `x* = 1`. The terminal state is checked against a sixteenth-step
/// reference integration and the closed form
/// `x(t) = 1 − (1/2)·exp(−(1 − e^(−t))/2)`.
fn nonconvergence_exp_decay() -> PresetResult {
    let instance = gen_parallel_links(&[1])?;
    let spec = DynamicsSpec::NonUniform {
        reactivity: ReactivityFn::exp_decay(0.5, 1.0)?,
    };
    let h = 0.01;
    let config = IntegratorConfig {
        h,
        t_end: 50.0,
        ..IntegratorConfig::default()
    };
    let record = simulate(&instance, &spec, &[0.5], &config)?;

    let sup_x = record
        .samples
        .iter()
        .map(|s| s.x[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let terminal = record.terminal().x[0];

    let reference_config = IntegratorConfig {
        h: h / 16.0,
        record_every: 1_000_000,
        ..config
    };
    let reference = simulate(&instance, &spec, &[0.5], &reference_config)?;
    let reference_terminal = reference.terminal().x[0];

    let t_end = record.terminal().t;
    let closed_form = 1.0 - 0.5 * (-(1.0 - (-t_end).exp()) / 2.0).exp();

    let bounded = sup_x <= 0.75 + 1e-6;
    let matches_reference = (terminal - reference_terminal).abs() <= 1e-3;
    let matches_closed_form = (terminal - closed_form).abs() <= 1e-3;
    let stays_away_from_optimum = (terminal - 1.0).abs() > 0.1;
    let pass = bounded && matches_reference && matches_closed_form && stays_away_from_optimum;

    let evidence = json!({
        "sup_x": sup_x,
        "bound": 0.75,
        "terminal_x": terminal,
        "reference_terminal_x": reference_terminal,
        "closed_form_x": closed_form,
        "status": format!("{:?}", record.status),
        "bounded": bounded,
        "matches_reference": matches_reference,
        "matches_closed_form": matches_closed_form,
        "stays_away_from_optimum": stays_away_from_optimum,
    });
    Ok((pass, evidence, vec![record]))
}

/// Convergence threshold shared by the theorem-backed presets.
const CONVERGENCE_TOL: f64 = 1e-4;
/// Dual-margin cap used when drawing instances for convergence runs.
const MARGIN_MAX: f64 = 0.8;
const CERTIFY_TRIES: usize = 500;

fn draw_shape(rng: &mut ChaCha8Rng) -> (usize, usize) {
    let n = rng.gen_range(1..=3usize);
    let m = rng.gen_range(n + 1..=6usize);
    (n, m)
}

fn convergence_config() -> IntegratorConfig {
    IntegratorConfig {
        h: 0.01,
        t_end: 200.0,
        record_every: 25,
        ..IntegratorConfig::default()
    }
}

fn terminal_errors(record: &TrajectoryRecord, x_star: &[f64]) -> (f64, f64) {
    let terminal = record.terminal();
    let err_x = terminal
        .x
        .iter()
        .zip(x_star)
        .map(|(xe, xs)| (xe - xs).abs())
        .fold(0.0_f64, f64::max);
    let err_q = terminal
        .q
        .iter()
        .zip(x_star)
        .map(|(qe, xs)| (qe.abs() - xs).abs())
        .fold(0.0_f64, f64::max);
    (err_x, err_q)
}

/// Shared machinery for the Theorem-style presets: draw certified instances,
/// simulate the given variant, and require terminal `x` and `|q|` to land on
/// the oracle optimum.
fn convergence_preset<FS>(seed: u64, salt: &str, make_spec: FS) -> PresetResult
where
    FS: Fn(usize, &ProblemInstance, &mut ChaCha8Rng) -> DynamicsSpec,
{
    convergence_preset_sized(seed, salt, 20, make_spec)
}

fn convergence_preset_sized<FS>(seed: u64, salt: &str, count: usize, make_spec: FS) -> PresetResult
where
    FS: Fn(usize, &ProblemInstance, &mut ChaCha8Rng) -> DynamicsSpec,
{
    let mut jobs = Vec::with_capacity(count);
    let mut meta = Vec::with_capacity(count);
    for i in 0..count {
        let run_seed = sub_seed(seed, salt, i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
        let (n, m) = draw_shape(&mut rng);
        let certified =
            certified_random_instance(n, m, 2, 5, rng.next_u64(), MARGIN_MAX, CERTIFY_TRIES)?;
        let spec = make_spec(i, &certified.instance, &mut rng);
        jobs.push(SimJob {
            instance: certified.instance.clone(),
            spec,
            x0: vec![1.0; certified.instance.m()],
            config: convergence_config(),
        });
        meta.push(certified);
    }

    let records = simulate_batch(&jobs);
    let mut rows = Vec::with_capacity(count);
    let mut pass = true;
    let mut kept = Vec::new();
    for ((certified, job), outcome) in meta.iter().zip(&jobs).zip(records) {
        let record = outcome?;
        let (err_x, err_q) = terminal_errors(&record, &certified.report.x_star());
        let ok = err_x <= CONVERGENCE_TOL && err_q <= CONVERGENCE_TOL;
        pass &= ok;
        rows.push(json!({
            "n": certified.instance.n(),
            "m": certified.instance.m(),
            "variant": format!("{:?}", job.spec.variant()),
            "resamples": certified.resamples,
            "margin": certified.margin,
            "status": format!("{:?}", record.status),
            "t_terminal": record.terminal().t,
            "err_x": err_x,
            "err_q": err_q,
            "ok": ok,
        }));
        kept.push(record);
    }
    let evidence = json!({
        "tolerance": CONVERGENCE_TOL,
        "runs": rows,
    });
    Ok((pass, evidence, kept))
}

/// Twenty certified instances per exponent `μ ∈ {0.5, 1, 2}`.
fn refined_power_response(seed: u64) -> PresetResult {
    let mus = [0.5, 1.0, 2.0];
    convergence_preset_sized(seed, "refined-power", 20 * mus.len(), move |i, _, _| {
        DynamicsSpec::Refined {
            responses: ResponseSet::Shared(
                ResponseFn::power(mus[i / 20]).expect("catalog exponents are valid"),
            ),
        }
    })
}

/// Monotone-in-time reactivities of both signs, each bounded away from zero.
/// The paper states the monotonicity hypothesis with opposite signs in two
/// places, so both families are run and judged separately.
fn nonuniform_monotone_a(seed: u64) -> PresetResult {
    let families: [(&str, fn() -> ReactivityFn); 2] = [
        ("increasing", || {
            ReactivityFn::ramp_up(0.5, 0.25, 2.0).expect("valid ramp")
        }),
        ("decreasing", || {
            ReactivityFn::decay_floor(2.0, 0.5, 0.5).expect("valid decay")
        }),
    ];
    let mut evidence_families = Vec::new();
    let mut all_records = Vec::new();
    let mut pass = true;
    for (label, build) in families {
        let (family_pass, family_evidence, records) =
            convergence_preset_sized(seed, &format!("monotone-{label}"), 10, |_, _, _| {
                DynamicsSpec::NonUniform { reactivity: build() }
            })?;
        pass &= family_pass;
        evidence_families.push(json!({
            "family": label,
            "converged_to_optimum": family_pass,
            "detail": family_evidence,
        }));
        all_records.extend(records);
    }
    Ok((pass, json!({ "families": evidence_families }), all_records))
}

/// The minimum-risk reweighting: simulating `ẋ_e = |q_e| − a_e x_e` on
/// `(A, b, c)` and the non-uniform dynamics with constant `a` on costs
/// `a_e c_e` must be the same flow under `y = a ∘ x`. Both runs share the
/// step sequence, so the mapped trajectories are compared at identical
/// sample times.
fn minimum_risk_reweighting(seed: u64) -> PresetResult {
    let config = IntegratorConfig {
        h: 0.01,
        t_end: 10.0,
        record_every: 10,
        fp_tol: 0.0,
        ..IntegratorConfig::default()
    };
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut pass = true;
    for i in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, "reweighting", i));
        let (n, m) = draw_shape(&mut rng);
        let instance = gen_random(n, m, 2, 4, rng.next_u64())?;
        let a_int: Vec<i64> = (0..m).map(|_| rng.gen_range(1..=3i64)).collect();
        let (transformed, map) = dynamics::reformulate_nonuniform(&instance, &a_int)?;
        let a_f64: Vec<f64> = a_int.iter().map(|&ae| ae as f64).collect();

        // x-space: the decay dynamics on the original costs.
        let decay_rhs = |x: &[f64], t: f64| -> Result<RhsEval> {
            let sol = minenergy::solve_potentials(&instance, x)?;
            let xdot: Vec<f64> = (0..instance.m())
                .map(|e| sol.q[e].abs() - a_f64[e] * x[e])
                .collect();
            let lambda = dynamics::lambdas(&instance, &sol);
            let lyap = lyapunov::lyapunov_value(&instance, x, &sol);
            let dldt = lyapunov::dldt_general(&instance, &sol, &xdot);
            let _ = t;
            Ok(RhsEval {
                xdot: xdot.clone(),
                obs: Observables {
                    q: sol.q,
                    lambda,
                    lyapunov: lyap,
                    dlyapunov_dt: dldt,
                    residual: sol.residual,
                },
            })
        };
        let x0 = vec![1.0; m];
        let x_run = simulate_rhs(decay_rhs, m, &x0, &config)?;

        // y-space: the non-uniform dynamics on the reweighted costs.
        let spec = DynamicsSpec::NonUniform {
            reactivity: ReactivityFn::constant_per_edge(a_f64.clone())?,
        };
        let y_run = simulate(&transformed, &spec, &map.to_transformed(&x0), &config)?;

        let compared = x_run.samples.len().min(y_run.samples.len());
        let mut max_dev = 0.0_f64;
        let mut times_match = x_run.samples.len() == y_run.samples.len();
        for k in 0..compared {
            let xs = &x_run.samples[k];
            let ys = &y_run.samples[k];
            times_match &= xs.t == ys.t;
            let mapped = map.to_transformed(&xs.x);
            for e in 0..m {
                max_dev = max_dev.max((mapped[e] - ys.x[e]).abs());
            }
        }
        let ok = times_match && max_dev <= 1e-6;
        pass &= ok;
        rows.push(json!({
            "n": n,
            "m": m,
            "reactivities": a_int,
            "samples": compared,
            "times_match": times_match,
            "max_mapped_deviation": max_dev,
            "ok": ok,
        }));
        if records.len() < 5 {
            records.push(x_run);
            records.push(y_run);
        }
    }
    Ok((pass, json!({ "tolerance": 1e-6, "cases": rows }), records))
}

/// Per-step slack allowed for the Lyapunov monotonicity judgment.
pub fn lyapunov_slack(l: f64) -> f64 {
    1e-9 * (1.0 + l.abs())
}

/// Count violations of `L(t_{k+1}) ≤ L(t_k) + slack` along one record.
pub fn lyapunov_violations(record: &TrajectoryRecord) -> (usize, f64) {
    let mut violations = 0;
    let mut worst = 0.0_f64;
    for pair in record.samples.windows(2) {
        let increase = pair[1].lyapunov - pair[0].lyapunov;
        let slack = lyapunov_slack(pair[0].lyapunov);
        if increase > slack {
            violations += 1;
            worst = worst.max(increase - slack);
        }
    }
    (violations, worst)
}

/// At least fifty runs spanning all three variants; every consecutive pair
/// of recorded Lyapunov values must be nonincreasing up to discretization
/// slack.
fn lyapunov_monotone_suite(seed: u64) -> PresetResult {
    let mut jobs = Vec::new();
    for i in 0..18u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, "lyapunov-suite", i));
        let (n, m) = draw_shape(&mut rng);
        let certified =
            certified_random_instance(n, m, 2, 5, rng.next_u64(), 1.0, CERTIFY_TRIES)?;
        let x0: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..2.0)).collect();
        let config = IntegratorConfig {
            h: 0.01,
            t_end: 50.0,
            record_every: 1,
            ..IntegratorConfig::default()
        };
        let mus = [0.5, 1.0, 2.0];
        let specs = [
            DynamicsSpec::Uniform,
            DynamicsSpec::NonUniform {
                reactivity: ReactivityFn::constant_per_edge(
                    (0..m).map(|_| rng.gen_range(0.5..=2.0)).collect(),
                )?,
            },
            DynamicsSpec::Refined {
                responses: ResponseSet::Shared(ResponseFn::power(mus[(i % 3) as usize])?),
            },
        ];
        for spec in specs {
            jobs.push(SimJob {
                instance: certified.instance.clone(),
                spec,
                x0: x0.clone(),
                config,
            });
        }
    }

    let outcomes = simulate_batch(&jobs);
    let mut total_violations = 0usize;
    let mut worst_increase = 0.0_f64;
    let mut run_count = 0usize;
    let mut sample_pairs = 0usize;
    let mut kept = Vec::new();
    for outcome in outcomes {
        let record = outcome?;
        let (violations, worst) = lyapunov_violations(&record);
        total_violations += violations;
        worst_increase = worst_increase.max(worst);
        sample_pairs += record.samples.len().saturating_sub(1);
        run_count += 1;
        if kept.len() < 5 {
            kept.push(record);
        }
    }
    let pass = total_violations == 0 && run_count >= 50;
    let evidence = json!({
        "runs": run_count,
        "sample_pairs_checked": sample_pairs,
        "violations": total_violations,
        "worst_excess_increase": worst_increase,
    });
    Ok((pass, evidence, kept))
}

/// Trajectory bounds on a mixed batch of runs: `|q_e| ≤ D‖b‖₁`,
/// `x_e(t) ≥ x_e(0) e^(−Ct)`, and `x_e(t) ≤ max(x_e(0), D‖b‖₁)`, with `D`
/// exact from the oracle.
fn bounds_suite(seed: u64) -> PresetResult {
    let mut rows = Vec::new();
    let mut kept = Vec::new();
    let mut pass = true;
    for i in 0..12u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, "bounds-suite", i));
        let (n, m) = draw_shape(&mut rng);
        let certified =
            certified_random_instance(n, m, 2, 5, rng.next_u64(), 1.0, CERTIFY_TRIES)?;
        let spec = match i % 3 {
            0 => DynamicsSpec::Uniform,
            1 => DynamicsSpec::NonUniform {
                reactivity: ReactivityFn::constant_per_edge(
                    (0..m).map(|_| rng.gen_range(0.5..=2.0)).collect(),
                )?,
            },
            _ => DynamicsSpec::Refined {
                responses: ResponseSet::Shared(ResponseFn::power([0.5, 2.0][(i % 2) as usize])?),
            },
        };
        let x0: Vec<f64> = if i % 2 == 0 {
            vec![1.0; m]
        } else {
            (0..m).map(|_| rng.gen_range(0.5..2.0)).collect()
        };
        let config = IntegratorConfig {
            h: 0.01,
            t_end: 50.0,
            record_every: 5,
            ..IntegratorConfig::default()
        };
        let record = simulate(&certified.instance, &spec, &x0, &config)?;
        let d = certified
            .report
            .d_bound_f64()
            .expect("desk-scale instances are within the D guard");
        let report = integrate::bounds_check(&record, &certified.instance, &spec, d);
        pass &= report.all_ok();
        rows.push(json!({
            "n": n,
            "m": m,
            "variant": format!("{:?}", spec.variant()),
            "d_bound": d,
            "current_ok": report.current_ok,
            "lower_ok": report.lower_ok,
            "upper_ok": report.upper_ok,
            "min_current_slack": report.min_current_slack,
            "min_lower_slack": report.min_lower_slack,
            "min_upper_slack": report.min_upper_slack,
            "samples": report.samples_checked,
        }));
        if kept.len() < 5 {
            kept.push(record);
        }
    }
    Ok((pass, json!({ "tolerance": integrate::BOUNDS_TOL, "runs": rows }), kept))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_preset_is_rejected() {
        assert!(matches!(
            run_preset("no-such-preset", 0, None),
            Err(Error::UnknownPreset(_))
        ));
    }

    #[test]
    fn preset_ids_all_resolve() {
        // Smoke-run the two cheap counterexample presets here; the heavier
        // suites are exercised by the acceptance tests.
        for id in ["blowup-inverse-reactivity", "nonconvergence-exp-decay"] {
            let outcome = run_preset(id, 0, None).unwrap();
            assert!(outcome.pass, "{id}: {}", outcome.evidence);
        }
    }

    #[test]
    fn outcomes_are_deterministic_in_seed() {
        let a = run_preset("minimum-risk-reweighting", 7, None).unwrap();
        let b = run_preset("minimum-risk-reweighting", 7, None).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn certified_instances_are_certified() {
        let certified = certified_random_instance(2, 4, 2, 5, 11, 0.8, 500).unwrap();
        assert!(certified.report.distinct_costs);
        assert!(certified.margin <= 0.8);
        assert_eq!(certified.instance.meta().distinct_bfs_costs(), Some(true));
    }

    #[test]
    fn artifacts_are_written_on_request() {
        let dir = std::env::temp_dir().join(format!("physarum-artifacts-{}", std::process::id()));
        let outcome = run_preset("blowup-inverse-reactivity", 0, Some(&dir)).unwrap();
        assert!(!outcome.artifacts.is_empty());
        for path in &outcome.artifacts {
            assert!(std::path::Path::new(path).exists());
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
