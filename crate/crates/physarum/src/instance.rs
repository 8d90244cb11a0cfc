//! Problem data for weighted basis pursuit: an integer matrix `A` with full
//! row rank, an integer right-hand side `b`, and strictly positive integer
//! costs `c`. Instances are immutable after construction and safe to share
//! across concurrent simulations.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Provenance of a generated instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceInfo {
    pub generator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Optional metadata attached to an instance.
///
/// `distinct_bfs_costs` is a certification that no two basic feasible
/// solutions share a cost. Only the oracle's exhaustive enumeration may set
/// it; generators leave it `None`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    distinct_bfs_costs: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceInfo>,
}

impl InstanceMeta {
    pub fn distinct_bfs_costs(&self) -> Option<bool> {
        self.distinct_bfs_costs
    }

    pub fn is_empty(&self) -> bool {
        self.distinct_bfs_costs.is_none() && self.source.is_none()
    }

    // Certification is only reachable through the oracle module.
    pub(crate) fn record_certification(&mut self, distinct: bool) {
        self.distinct_bfs_costs = Some(distinct);
    }
}

/// Raw, unvalidated instance data; the on-disk JSON form.
///
/// Field names are fixed: `{"n", "m", "A", "b", "c", "meta"}` with `meta`
/// optional. Unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInstance {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<i64>>,
    pub b: Vec<i64>,
    pub c: Vec<i64>,
    #[serde(default, skip_serializing_if = "InstanceMeta::is_empty")]
    pub meta: InstanceMeta,
}

/// Outcome of validating raw instance data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    /// Exact rank of `A` over the integers; `None` when dimensions are
    /// inconsistent and the rank computation is meaningless.
    pub rank: Option<usize>,
    pub full_row_rank: bool,
    pub cost_positive: bool,
    pub dimensions_consistent: bool,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.dimensions_consistent && self.cost_positive && self.full_row_rank
    }
}

/// Validate raw data against the instance invariants: consistent dimensions
/// with `1 ≤ n ≤ m`, strictly positive costs, and exact full row rank.
pub fn validate(raw: &RawInstance) -> ValidationReport {
    let dims = raw.n >= 1
        && raw.n <= raw.m
        && raw.a.len() == raw.n
        && raw.a.iter().all(|row| row.len() == raw.m)
        && raw.b.len() == raw.n
        && raw.c.len() == raw.m;
    let cost_positive = raw.c.iter().all(|&ce| ce >= 1);
    let rank = if dims { Some(integer_rank(&raw.a)) } else { None };
    ValidationReport {
        rank,
        full_row_rank: rank == Some(raw.n),
        cost_positive,
        dimensions_consistent: dims,
    }
}

/// A validated weighted basis pursuit instance.
///
/// Holds the integer data plus cached `f64` views used by the numerical
/// solver.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    n: usize,
    m: usize,
    a: Vec<Vec<i64>>,
    b: Vec<i64>,
    c: Vec<i64>,
    meta: InstanceMeta,
    a_f64: DMatrix<f64>,
    b_f64: DVector<f64>,
    c_f64: Vec<f64>,
}

impl PartialEq for ProblemInstance {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.m == other.m
            && self.a == other.a
            && self.b == other.b
            && self.c == other.c
            && self.meta == other.meta
    }
}

impl ProblemInstance {
    pub fn new(a: Vec<Vec<i64>>, b: Vec<i64>, c: Vec<i64>) -> Result<Self> {
        let raw = RawInstance {
            n: a.len(),
            m: a.first().map_or(0, |row| row.len()),
            a,
            b,
            c,
            meta: InstanceMeta::default(),
        };
        Self::from_raw(raw)
    }

    pub fn from_raw(raw: RawInstance) -> Result<Self> {
        let report = validate(&raw);
        if !report.dimensions_consistent {
            return Err(Error::DimensionMismatch(format!(
                "n = {}, m = {}, A is {}x{:?}, |b| = {}, |c| = {}",
                raw.n,
                raw.m,
                raw.a.len(),
                raw.a.first().map(|r| r.len()),
                raw.b.len(),
                raw.c.len()
            )));
        }
        if !report.cost_positive {
            let (index, &value) = raw
                .c
                .iter()
                .enumerate()
                .find(|(_, &ce)| ce < 1)
                .expect("cost_positive is false");
            return Err(Error::NonPositiveCost { index, value });
        }
        if !report.full_row_rank {
            return Err(Error::RankDeficient {
                rank: report.rank.unwrap_or(0),
                expected: raw.n,
            });
        }
        let a_f64 = DMatrix::from_fn(raw.n, raw.m, |i, j| raw.a[i][j] as f64);
        let b_f64 = DVector::from_fn(raw.n, |i, _| raw.b[i] as f64);
        let c_f64 = raw.c.iter().map(|&ce| ce as f64).collect();
        Ok(Self {
            n: raw.n,
            m: raw.m,
            a: raw.a,
            b: raw.b,
            c: raw.c,
            meta: raw.meta,
            a_f64,
            b_f64,
            c_f64,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn a(&self) -> &[Vec<i64>] {
        &self.a
    }

    pub fn b(&self) -> &[i64] {
        &self.b
    }

    pub fn c(&self) -> &[i64] {
        &self.c
    }

    pub fn meta(&self) -> &InstanceMeta {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut InstanceMeta {
        &mut self.meta
    }

    pub fn matrix_f64(&self) -> &DMatrix<f64> {
        &self.a_f64
    }

    pub fn b_f64(&self) -> &DVector<f64> {
        &self.b_f64
    }

    pub fn c_f64(&self) -> &[f64] {
        &self.c_f64
    }

    /// `‖b‖₁` as a float.
    pub fn b_one_norm(&self) -> f64 {
        self.b.iter().map(|&bi| (bi as f64).abs()).sum()
    }

    pub fn to_raw(&self) -> RawInstance {
        RawInstance {
            n: self.n,
            m: self.m,
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c.clone(),
            meta: self.meta.clone(),
        }
    }

    /// Canonical JSON form: pretty-printed with a trailing newline. The
    /// serialization is byte-stable, so generator determinism can be checked
    /// by comparing bytes.
    pub fn to_json(&self) -> String {
        let mut s =
            serde_json::to_string_pretty(&self.to_raw()).expect("instance serialization is total");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: RawInstance = serde_json::from_str(s)?;
        Self::from_raw(raw)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::from_json(&s)
    }
}

/// Exact rank of an integer matrix by fraction-free (Bareiss) elimination.
pub fn integer_rank(a: &[Vec<i64>]) -> usize {
    let rows = a.len();
    if rows == 0 {
        return 0;
    }
    let cols = a[0].len();
    let mut m: Vec<Vec<BigInt>> = a
        .iter()
        .map(|row| row.iter().map(|&v| BigInt::from(v)).collect())
        .collect();
    let mut prev = BigInt::one();
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let pivot = (rank..rows).find(|&i| !m[i][col].is_zero());
        let Some(pivot) = pivot else { continue };
        m.swap(rank, pivot);
        for i in rank + 1..rows {
            for j in col + 1..cols {
                let num = &m[i][j] * &m[rank][col] - &m[i][col] * &m[rank][j];
                m[i][j] = num / &prev;
            }
            m[i][col] = BigInt::zero();
        }
        prev = m[rank][col].clone();
        rank += 1;
    }
    rank
}

/// Two nodes joined by `costs.len()` parallel edges carrying one unit of
/// flow. After eliminating one conservation row this collapses to the single
/// row `A = [1 … 1]`, `b = [1]`.
pub fn gen_parallel_links(costs: &[i64]) -> Result<ProblemInstance> {
    if costs.is_empty() {
        return Err(Error::EmptyEdgeSet);
    }
    let k = costs.len();
    let mut instance = ProblemInstance::new(vec![vec![1; k]], vec![1], costs.to_vec())?;
    instance.meta.source = Some(SourceInfo {
        generator: "parallel_links".to_string(),
        seed: None,
    });
    Ok(instance)
}

/// Node-arc incidence instance for routing `demand` units from `source` to
/// `sink` on a directed graph. Arc `(u, v)` gets `+1` at `u` and `−1` at `v`.
///
/// The incidence matrix of a connected graph has rank `nodes − 1`, so the
/// sink row is deleted to restore full row rank; `b` keeps `+demand` at the
/// source. Orientations are arbitrary: currents may run against an arc with
/// negative sign.
pub fn gen_incidence(
    nodes: usize,
    arcs: &[(usize, usize)],
    lengths: &[i64],
    source: usize,
    sink: usize,
    demand: i64,
) -> Result<ProblemInstance> {
    if arcs.is_empty() {
        return Err(Error::EmptyEdgeSet);
    }
    if lengths.len() != arcs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} arcs but {} lengths",
            arcs.len(),
            lengths.len()
        )));
    }
    if nodes < 2 || source >= nodes || sink >= nodes || source == sink {
        return Err(Error::DimensionMismatch(format!(
            "invalid terminals: {nodes} nodes, source {source}, sink {sink}"
        )));
    }
    if demand < 1 {
        return Err(Error::DimensionMismatch(format!(
            "demand must be at least 1, got {demand}"
        )));
    }
    if arcs.iter().any(|&(u, v)| u >= nodes || v >= nodes) {
        return Err(Error::DimensionMismatch(
            "arc endpoint outside node range".to_string(),
        ));
    }

    // Undirected connectivity of the whole graph; one component is what makes
    // the row deletion restore full rank.
    let mut adjacency = vec![Vec::new(); nodes];
    for &(u, v) in arcs {
        adjacency[u].push(v);
        adjacency[v].push(u);
    }
    let mut seen = vec![false; nodes];
    let mut stack = vec![source];
    seen[source] = true;
    while let Some(u) = stack.pop() {
        for &v in &adjacency[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    if seen.iter().any(|&s| !s) {
        return Err(Error::DisconnectedGraph);
    }

    let kept: Vec<usize> = (0..nodes).filter(|&i| i != sink).collect();
    let a: Vec<Vec<i64>> = kept
        .iter()
        .map(|&node| {
            arcs.iter()
                .map(|&(u, v)| {
                    let mut entry = 0;
                    if u == node {
                        entry += 1;
                    }
                    if v == node {
                        entry -= 1;
                    }
                    entry
                })
                .collect()
        })
        .collect();
    let b: Vec<i64> = kept
        .iter()
        .map(|&node| if node == source { demand } else { 0 })
        .collect();

    let mut instance = ProblemInstance::new(a, b, lengths.to_vec())?;
    instance.meta.source = Some(SourceInfo {
        generator: "incidence".to_string(),
        seed: None,
    });
    Ok(instance)
}

const GEN_MAX_TRIES: usize = 1000;

/// Random integer instance, deterministic in `seed`. `A` is resampled until
/// it has full row rank; `b := A·f₀` for a random integer `f₀` (resampled
/// until nonzero) so the system is feasible by construction.
pub fn gen_random(
    n: usize,
    m: usize,
    entry_bound: i64,
    cost_bound: i64,
    seed: u64,
) -> Result<ProblemInstance> {
    if n < 1 || n > m {
        return Err(Error::DimensionMismatch(format!(
            "need 1 <= n <= m, got n = {n}, m = {m}"
        )));
    }
    if entry_bound < 1 || cost_bound < 1 {
        return Err(Error::DimensionMismatch(
            "entry_bound and cost_bound must be at least 1".to_string(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut a = None;
    for _ in 0..GEN_MAX_TRIES {
        let candidate: Vec<Vec<i64>> = (0..n)
            .map(|_| {
                (0..m)
                    .map(|_| rng.gen_range(-entry_bound..=entry_bound))
                    .collect()
            })
            .collect();
        if integer_rank(&candidate) == n {
            a = Some(candidate);
            break;
        }
    }
    let a = a.ok_or(Error::GenerationFailed {
        tries: GEN_MAX_TRIES,
    })?;

    let mut b = None;
    for _ in 0..GEN_MAX_TRIES {
        let f0: Vec<i64> = (0..m)
            .map(|_| rng.gen_range(-entry_bound..=entry_bound))
            .collect();
        let candidate: Vec<i64> = a
            .iter()
            .map(|row| row.iter().zip(&f0).map(|(&aij, &fj)| aij * fj).sum())
            .collect();
        if candidate.iter().any(|&bi| bi != 0) {
            b = Some(candidate);
            break;
        }
    }
    let b = b.ok_or(Error::GenerationFailed {
        tries: GEN_MAX_TRIES,
    })?;

    let c: Vec<i64> = (0..m).map(|_| rng.gen_range(1..=cost_bound)).collect();

    let mut instance = ProblemInstance::new(a, b, c)?;
    instance.meta.source = Some(SourceInfo {
        generator: "random".to_string(),
        seed: Some(seed),
    });
    Ok(instance)
}
