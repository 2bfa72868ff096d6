//! Set functions over source subsets: worst-case and total misclassification
//! penalty scores, the truncated coverage potential used for the
//! minimum-cost problem, and submodularity ratios.

use serde::{Deserialize, Serialize};

use crate::bitset::{BitSet, SourceSet};
use crate::error::{Error, Result};
use crate::model::{Instance, PenaltyMatrix};

/// Largest `n` accepted by [`gamma_exact`] and [`is_submodular`].
pub const GAMMA_EXACT_LIMIT: usize = 12;

/// Values closer than this are treated as equal when forming ratios.
const ZERO_TOL: f64 = 1e-12;

/// Which penalty aggregate over the equivalence set drives a problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Worst penalty among indistinguishable hypotheses.
    #[default]
    #[serde(alias = "max")]
    MaxPenalty,
    /// Sum of penalties among indistinguishable hypotheses.
    #[serde(alias = "total")]
    TotalPenalty,
}

fn max_penalty_over(xi: &PenaltyMatrix, p: usize, members: &BitSet) -> f64 {
    members.iter().map(|q| xi.get(p, q)).fold(0.0, f64::max)
}

fn total_penalty_over(xi: &PenaltyMatrix, p: usize, members: &BitSet) -> f64 {
    members.iter().map(|q| xi.get(p, q)).fold(0.0, |a, x| a + x)
}

/// `1 - max_{q in F_p(I)} xi[p][q]`.
pub fn max_penalty_score(instance: &Instance, p: usize, subset: &SourceSet) -> f64 {
    let members = instance.equiv_table().members(subset, p);
    1.0 - max_penalty_over(instance.penalties(), p, &members)
}

/// Score clipped at the level `1 - bound` where the penalty constraint of `p`
/// is exactly satisfied.
pub fn truncated_score(instance: &Instance, p: usize, subset: &SourceSet, bound: f64) -> f64 {
    max_penalty_score(instance, p, subset).min(1.0 - bound)
}

/// Sum of penalties over `F_p(I)`.
pub fn total_penalty(instance: &Instance, p: usize, subset: &SourceSet) -> f64 {
    let members = instance.equiv_table().members(subset, p);
    total_penalty_over(instance.penalties(), p, &members)
}

/// `1 - total_penalty`; submodular in the source set.
pub fn g_score(instance: &Instance, p: usize, subset: &SourceSet) -> f64 {
    1.0 - total_penalty(instance, p, subset)
}

/// Per-hypothesis score under `metric`: `f_p` for the max-penalty metric, `g_p`
/// for the total-penalty metric.
pub fn score(instance: &Instance, metric: Metric, p: usize, subset: &SourceSet) -> f64 {
    let members = instance.equiv_table().members(subset, p);
    let xi = instance.penalties();
    match metric {
        Metric::MaxPenalty => 1.0 - max_penalty_over(xi, p, &members),
        Metric::TotalPenalty => 1.0 - total_penalty_over(xi, p, &members),
    }
}

/// Coverage potential: sum over hypotheses of `min(score_p(I), 1 - bounds[p])`.
///
/// Reaching the value attained by the full source set is equivalent to
/// meeting every per-hypothesis penalty bound.
pub fn coverage_z(instance: &Instance, subset: &SourceSet, bounds: &[f64], metric: Metric) -> f64 {
    debug_assert_eq!(bounds.len(), instance.m());
    (0..instance.m())
        .map(|p| score(instance, metric, p, subset).min(1.0 - bounds[p]))
        .sum()
}

/// Sum of `f_p` over all hypotheses.
pub fn lambda(instance: &Instance, subset: &SourceSet) -> f64 {
    utility(instance, subset, Metric::MaxPenalty)
}

/// Budgeted-problem utility: sum of per-hypothesis scores under `metric`.
pub fn utility(instance: &Instance, subset: &SourceSet, metric: Metric) -> f64 {
    (0..instance.m())
        .map(|p| score(instance, metric, p, subset))
        .sum()
}

/// Lower bound on the submodularity ratio of every `f_p`, from the
/// smallest and largest within-row penalty differences.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GammaBound {
    pub xi_min: f64,
    pub xi_max: f64,
    pub gamma: f64,
}

/// Ranges over index pairs `i != j` of each row, the zero diagonal included,
/// so a zero off-diagonal penalty forces `gamma = 0`.
pub fn gamma_bound(penalties: &PenaltyMatrix) -> GammaBound {
    let m = penalties.dim();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for p in 0..m {
        let row = penalties.row(p);
        for i in 0..m {
            for j in i + 1..m {
                let d = (row[i] - row[j]).abs();
                lo = lo.min(d);
                hi = hi.max(d);
            }
        }
    }
    if m < 2 {
        lo = 0.0;
    }
    let gamma = if hi == 0.0 {
        1.0
    } else {
        (lo / hi).clamp(0.0, 1.0)
    };
    GammaBound {
        xi_min: lo,
        xi_max: hi,
        gamma,
    }
}

/// The set functions [`gamma_exact`] knows how to evaluate.
#[derive(Clone, Debug, PartialEq)]
pub enum SetFunction {
    MaxPenaltyScore(usize),
    Coverage { bounds: Vec<f64>, metric: Metric },
    Utility(Metric),
    GScore(usize),
}

impl SetFunction {
    pub fn eval(&self, instance: &Instance, subset: &SourceSet) -> f64 {
        match self {
            SetFunction::MaxPenaltyScore(p) => max_penalty_score(instance, *p, subset),
            SetFunction::Coverage { bounds, metric } => {
                coverage_z(instance, subset, bounds, *metric)
            }
            SetFunction::Utility(metric) => utility(instance, subset, *metric),
            SetFunction::GScore(p) => g_score(instance, *p, subset),
        }
    }
}

fn value_table(n: usize, f: &dyn Fn(&SourceSet) -> f64) -> Result<Vec<f64>> {
    if n > GAMMA_EXACT_LIMIT {
        return Err(Error::TooLarge {
            n,
            limit: GAMMA_EXACT_LIMIT,
        });
    }
    Ok((0..1u64 << n)
        .map(|mask| f(&BitSet::from_mask(n, mask)))
        .collect())
}

/// Exact submodularity ratio of `function` by exhaustive enumeration.
pub fn gamma_exact(instance: &Instance, function: &SetFunction) -> Result<f64> {
    if let SetFunction::MaxPenaltyScore(p) | SetFunction::GScore(p) = function {
        instance.check_hypothesis(*p)?;
    }
    if let SetFunction::Coverage { bounds, .. } = function {
        if bounds.len() != instance.m() {
            return Err(Error::InvalidArgument(format!(
                "{} bounds for {} hypotheses",
                bounds.len(),
                instance.m()
            )));
        }
    }
    gamma_exact_with(instance.n(), |s| function.eval(instance, s))
}

/// Largest `gamma` with `sum_{a in A\B} (f(B+a) - f(B)) >= gamma (f(A u B) - f(B))`
/// for all `A, B`, clamped to 1. Ratios of the form 0/0 count as 1; a zero
/// denominator under a positive numerator imposes no constraint.
pub fn gamma_exact_with(n: usize, f: impl Fn(&SourceSet) -> f64) -> Result<f64> {
    let table = value_table(n, &f)?;
    let full: u64 = (1u64 << n) - 1;
    let mut gamma = 1.0f64;
    let mut singles = vec![0.0; n];
    for b in 0..=full {
        let fb = table[b as usize];
        let comp = full & !b;
        for (a, s) in singles.iter_mut().enumerate() {
            *s = if comp >> a & 1 == 1 {
                table[(b | 1 << a) as usize] - fb
            } else {
                0.0
            };
        }
        // A only matters through A \ B, so enumerate nonempty D = A \ B.
        let mut d = comp;
        while d != 0 {
            let den = table[(b | d) as usize] - fb;
            if den > ZERO_TOL {
                let mut num = 0.0;
                let mut bits = d;
                while bits != 0 {
                    num += singles[bits.trailing_zeros() as usize];
                    bits &= bits - 1;
                }
                // deficits below ZERO_TOL are rounding, not a ratio below one
                if num < den - ZERO_TOL {
                    gamma = gamma.min(num / den);
                }
            }
            d = (d - 1) & comp;
        }
    }
    Ok(gamma.clamp(0.0, 1.0))
}

/// Checks diminishing returns `f(X+j) - f(X) >= f(Y+j) - f(Y) - tol` for every
/// `X ⊆ Y` and `j ∉ Y`.
pub fn is_submodular(n: usize, f: impl Fn(&SourceSet) -> f64, tol: f64) -> Result<bool> {
    let table = value_table(n, &f)?;
    let full: u64 = (1u64 << n) - 1;
    for y in 0..=full {
        let mut x = y;
        loop {
            for j in 0..n {
                if y >> j & 1 == 0 {
                    let gx = table[(x | 1 << j) as usize] - table[x as usize];
                    let gy = table[(y | 1 << j) as usize] - table[y as usize];
                    if gx < gy - tol {
                        return Ok(false);
                    }
                }
            }
            if x == 0 {
                break;
            }
            x = (x - 1) & y;
        }
    }
    Ok(true)
}
