//! Ground truth by exhaustive enumeration in exact rational arithmetic:
//! basic feasible solutions of `Af = b`, the optimum `x* = |f*|`,
//! distinct-cost certification, and the maximum-absolute-subdeterminant
//! bound `D`.
//!
//! All arithmetic here is over `BigInt`/`BigRational`; no floating point
//! enters a certification decision.

pub use num_bigint::BigInt;
pub use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::instance::ProblemInstance;
use crate::minenergy;
use crate::parallel;
use crate::{Error, Result};

/// Combinatorial guard: the enumeration refuses instances with more columns.
pub const MAX_ENUM_EDGES: usize = 24;
/// `D` is only computed exhaustively for `n ≤ MAX_D_ROWS` (and `m` within the
/// enumeration guard); beyond that it is reported as unavailable.
pub const MAX_D_ROWS: usize = 5;

/// One basic feasible solution: an invertible column basis `B`, the flow
/// `f = (A_B⁻¹ b, 0)`, and its cost `cᵀ|f|`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasicSolution {
    pub basis: Vec<usize>,
    pub flow: Vec<BigRational>,
    pub cost: BigRational,
}

impl BasicSolution {
    /// `|f|` as floats — the fixed-point candidate this solution certifies.
    pub fn x_f64(&self) -> Vec<f64> {
        self.flow
            .iter()
            .map(|f| f.abs().to_f64().expect("desk-scale rational fits f64"))
            .collect()
    }

    pub fn cost_f64(&self) -> f64 {
        self.cost.to_f64().expect("desk-scale rational fits f64")
    }
}

/// Full enumeration report. Solutions are sorted by cost, ties broken by
/// lexicographic basis, so the report is deterministic regardless of how the
/// scan was parallelized.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub solutions: Vec<BasicSolution>,
    /// Index of the minimum-cost solution; the unique optimum when
    /// `distinct_costs` holds.
    pub optimal: usize,
    pub distinct_costs: bool,
    /// Maximum absolute value over all square submatrix determinants of `A`,
    /// or `None` when the guard `n ≤ MAX_D_ROWS` is exceeded.
    pub d_bound: Option<BigInt>,
}

impl OracleReport {
    pub fn optimum(&self) -> &BasicSolution {
        &self.solutions[self.optimal]
    }

    /// `x*` as floats; only meaningful on certified instances.
    pub fn x_star(&self) -> Vec<f64> {
        self.optimum().x_f64()
    }

    pub fn d_bound_f64(&self) -> Option<f64> {
        self.d_bound.as_ref().and_then(|d| d.to_f64())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&ReportRepr::from(self))
            .expect("report serialization is total");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let repr: ReportRepr = serde_json::from_str(s)?;
        repr.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct SolutionRepr {
    #[serde(rename = "B")]
    basis: Vec<usize>,
    f: Vec<String>,
    cost: String,
}

#[derive(Serialize, Deserialize)]
struct ReportRepr {
    bases: Vec<SolutionRepr>,
    optimal: usize,
    distinct_costs: bool,
    #[serde(rename = "D")]
    d: Option<String>,
}

impl From<&OracleReport> for ReportRepr {
    fn from(report: &OracleReport) -> Self {
        ReportRepr {
            bases: report
                .solutions
                .iter()
                .map(|s| SolutionRepr {
                    basis: s.basis.clone(),
                    f: s.flow.iter().map(|f| f.to_string()).collect(),
                    cost: s.cost.to_string(),
                })
                .collect(),
            optimal: report.optimal,
            distinct_costs: report.distinct_costs,
            d: report.d_bound.as_ref().map(|d| d.to_string()),
        }
    }
}

impl TryFrom<ReportRepr> for OracleReport {
    type Error = Error;

    fn try_from(repr: ReportRepr) -> Result<Self> {
        let parse = |s: &str| -> Result<BigRational> {
            s.parse()
                .map_err(|_| Error::Data(format!("bad rational: {s}")))
        };
        let solutions = repr
            .bases
            .iter()
            .map(|s| {
                Ok(BasicSolution {
                    basis: s.basis.clone(),
                    flow: s.f.iter().map(|f| parse(f)).collect::<Result<_>>()?,
                    cost: parse(&s.cost)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if solutions.is_empty() || repr.optimal >= solutions.len() {
            return Err(Error::Data("oracle report has no valid optimum".into()));
        }
        let d_bound = repr
            .d
            .as_deref()
            .map(|d| {
                d.parse::<BigInt>()
                    .map_err(|_| Error::Data(format!("bad integer: {d}")))
            })
            .transpose()?;
        Ok(OracleReport {
            solutions,
            optimal: repr.optimal,
            distinct_costs: repr.distinct_costs,
            d_bound,
        })
    }
}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

/// The `rank`-th `k`-subset of `0..n` in lexicographic order.
fn unrank_combination(n: usize, k: usize, mut rank: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut next = 0;
    for slot in 0..k {
        let mut candidate = next;
        loop {
            let with_candidate = binomial(n - candidate - 1, k - slot - 1);
            if rank < with_candidate {
                out.push(candidate);
                next = candidate + 1;
                break;
            }
            rank -= with_candidate;
            candidate += 1;
        }
    }
    out
}

/// Exact solve of a square rational system by Gauss-Jordan elimination.
/// Returns `None` when the matrix is singular.
fn solve_rational(mut a: Vec<Vec<BigRational>>, mut b: Vec<BigRational>) -> Option<Vec<BigRational>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n).find(|&i| !a[i][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = a[col][col].recip();
        for j in col..n {
            a[col][j] = &a[col][j] * &inv;
        }
        b[col] = &b[col] * &inv;
        for i in 0..n {
            if i == col || a[i][col].is_zero() {
                continue;
            }
            let factor = a[i][col].clone();
            for j in col..n {
                a[i][j] = &a[i][j] - &factor * &a[col][j];
            }
            b[i] = &b[i] - &factor * &b[col];
        }
    }
    Some(b)
}

/// Determinant of an integer matrix by fraction-free (Bareiss) elimination.
fn integer_determinant(mut m: Vec<Vec<BigInt>>) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut prev = BigInt::one();
    let mut sign = 1i8;
    for r in 0..n {
        let pivot = (r..n).find(|&i| !m[i][r].is_zero());
        let Some(pivot) = pivot else {
            return BigInt::zero();
        };
        if pivot != r {
            m.swap(r, pivot);
            sign = -sign;
        }
        for i in r + 1..n {
            for j in r + 1..n {
                let num = &m[i][j] * &m[r][r] - &m[i][r] * &m[r][j];
                m[i][j] = num / &prev;
            }
            m[i][r] = BigInt::zero();
        }
        prev = m[r][r].clone();
    }
    let det = m[n - 1][n - 1].clone();
    if sign < 0 {
        -det
    } else {
        det
    }
}

fn try_basis(instance: &ProblemInstance, basis: &[usize]) -> Option<BasicSolution> {
    let n = instance.n();
    let a_b: Vec<Vec<BigRational>> = (0..n)
        .map(|i| {
            basis
                .iter()
                .map(|&e| BigRational::from_integer(BigInt::from(instance.a()[i][e])))
                .collect()
        })
        .collect();
    let b: Vec<BigRational> = instance
        .b()
        .iter()
        .map(|&bi| BigRational::from_integer(BigInt::from(bi)))
        .collect();
    let f_b = solve_rational(a_b, b)?;
    let mut flow = vec![BigRational::zero(); instance.m()];
    for (slot, &e) in basis.iter().enumerate() {
        flow[e] = f_b[slot].clone();
    }
    let cost = flow
        .iter()
        .zip(instance.c())
        .map(|(fe, &ce)| BigRational::from_integer(BigInt::from(ce)) * fe.abs())
        .sum();
    Some(BasicSolution {
        basis: basis.to_vec(),
        flow,
        cost,
    })
}

/// Enumerate every basic feasible solution of `Af = b` and compute the
/// subdeterminant bound `D`. Exact throughout; guarded to `m ≤ 24`.
pub fn enumerate_bfs(instance: &ProblemInstance) -> Result<OracleReport> {
    let (n, m) = (instance.n(), instance.m());
    if m > MAX_ENUM_EDGES {
        return Err(Error::TooLarge {
            m,
            limit: MAX_ENUM_EDGES,
        });
    }
    let count = binomial(m, n);
    let mut solutions: Vec<BasicSolution> =
        parallel::range_map(count, |rank| {
            let basis = unrank_combination(m, n, rank);
            try_basis(instance, &basis)
        })
        .into_iter()
        .flatten()
        .collect();
    if solutions.is_empty() {
        return Err(Error::Infeasible);
    }
    solutions.sort_by(|x, y| x.cost.cmp(&y.cost).then_with(|| x.basis.cmp(&y.basis)));
    let distinct_costs = solutions
        .windows(2)
        .all(|pair| pair[0].cost != pair[1].cost);
    let d_bound = if n <= MAX_D_ROWS {
        Some(subdeterminant_bound(instance))
    } else {
        None
    };
    Ok(OracleReport {
        solutions,
        optimal: 0,
        distinct_costs,
        d_bound,
    })
}

/// Maximum absolute determinant over all square submatrices of `A`, up to
/// size `n`.
fn subdeterminant_bound(instance: &ProblemInstance) -> BigInt {
    let (n, m) = (instance.n(), instance.m());
    let mut best = BigInt::zero();
    for k in 1..=n {
        let row_count = binomial(n, k);
        let col_count = binomial(m, k);
        for row_rank in 0..row_count {
            let rows = unrank_combination(n, k, row_rank);
            let candidates = parallel::range_map(col_count, |col_rank| {
                let cols = unrank_combination(m, k, col_rank);
                let sub: Vec<Vec<BigInt>> = rows
                    .iter()
                    .map(|&i| {
                        cols.iter()
                            .map(|&j| BigInt::from(instance.a()[i][j]))
                            .collect()
                    })
                    .collect();
                integer_determinant(sub).abs()
            });
            for d in candidates {
                if d > best {
                    best = d;
                }
            }
        }
    }
    best
}

/// Record the oracle's distinct-cost certification in the instance metadata.
/// This is the only path that sets `InstanceMeta::distinct_bfs_costs`.
pub fn certify(instance: &mut ProblemInstance, report: &OracleReport) {
    instance
        .meta_mut()
        .record_certification(report.distinct_costs);
}

/// Verdict of checking a capacity vector against the enumerated fixed points.
#[derive(Debug, Clone)]
pub struct FixedPointVerdict {
    pub is_fixed_point: bool,
    /// Index into `report.solutions` of the nearest `|f|`.
    pub nearest: usize,
    /// `‖x − |f_nearest|‖∞`.
    pub distance: f64,
    /// `‖|q| − x‖∞` from the potential solve restricted to `supp(x) > tol`.
    pub equilibrium_residual: f64,
}

/// Compare `x` against every enumerated `|f|` and check the equilibrium
/// condition on its support. `IsFixedPoint` requires both the nearest
/// distance and the restricted equilibrium residual to be within `tol`;
/// edges with `x_e ≤ tol` are treated as zero per the support convention.
pub fn verify_fixed_point(
    instance: &ProblemInstance,
    report: &OracleReport,
    x: &[f64],
    tol: f64,
) -> Result<FixedPointVerdict> {
    if x.len() != instance.m() {
        return Err(Error::DimensionMismatch(format!(
            "state has {} entries, instance has {} edges",
            x.len(),
            instance.m()
        )));
    }
    let (nearest, distance) = report
        .solutions
        .iter()
        .enumerate()
        .map(|(idx, sol)| {
            let xf = sol.x_f64();
            let dist = x
                .iter()
                .zip(&xf)
                .map(|(xi, fi)| (xi - fi).abs())
                .fold(0.0_f64, f64::max);
            (idx, dist)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("report has at least one solution");

    let support: Vec<usize> = (0..instance.m()).filter(|&e| x[e] > tol).collect();
    let sol = minenergy::solve_potentials_restricted(instance, x, &support)?;
    let equilibrium_residual = (0..instance.m())
        .map(|e| (sol.q[e].abs() - x[e]).abs())
        .fold(0.0_f64, f64::max);

    Ok(FixedPointVerdict {
        is_fixed_point: distance <= tol && equilibrium_residual <= tol,
        nearest,
        distance,
        equilibrium_residual,
    })
}

/// `cᵀx − cᵀx*`. Refuses to answer unless the oracle certified distinct
/// costs, since otherwise the optimum is not unique.
pub fn optimality_gap(
    instance: &ProblemInstance,
    x: &[f64],
    report: &OracleReport,
) -> Result<f64> {
    if !report.distinct_costs {
        return Err(Error::NotCertified);
    }
    let cost_x: f64 = instance
        .c_f64()
        .iter()
        .zip(x)
        .map(|(ce, xe)| ce * xe)
        .sum();
    Ok(cost_x - report.optimum().cost_f64())
}

/// Dual margin of the certified optimum: `max_{e ∉ B*} |A_eᵀ p*| / c_e`,
/// where `p*` solves `A_B*ᵀ p = sign(f*_B) ∘ c_B*` exactly. Strictly below 1
/// on certified instances with a nondegenerate optimum; the closer to 1, the
/// slower the slowest decaying edge.
pub fn optimum_margin(instance: &ProblemInstance, report: &OracleReport) -> Result<f64> {
    if !report.distinct_costs {
        return Err(Error::NotCertified);
    }
    let opt = report.optimum();
    let n = instance.n();
    // Degenerate optimum (zero basic entry): no well-defined sign pattern.
    if opt.basis.iter().any(|&e| opt.flow[e].is_zero()) {
        return Ok(1.0);
    }
    let at: Vec<Vec<BigRational>> = opt
        .basis
        .iter()
        .map(|&e| {
            (0..n)
                .map(|i| BigRational::from_integer(BigInt::from(instance.a()[i][e])))
                .collect()
        })
        .collect();
    let rhs: Vec<BigRational> = opt
        .basis
        .iter()
        .map(|&e| {
            let ce = BigRational::from_integer(BigInt::from(instance.c()[e]));
            if opt.flow[e].is_positive() {
                ce
            } else {
                -ce
            }
        })
        .collect();
    let p = solve_rational(at, rhs).ok_or(Error::Infeasible)?;
    let margin = (0..instance.m())
        .filter(|e| !opt.basis.contains(e))
        .map(|e| {
            let dot: BigRational = (0..n)
                .map(|i| BigRational::from_integer(BigInt::from(instance.a()[i][e])) * &p[i])
                .sum();
            (dot.abs() / BigRational::from_integer(BigInt::from(instance.c()[e])))
                .to_f64()
                .unwrap_or(f64::INFINITY)
        })
        .fold(0.0_f64, f64::max);
    Ok(margin)
}
