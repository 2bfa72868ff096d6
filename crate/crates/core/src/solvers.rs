//! Greedy and exhaustive solvers for the two selection problems, plus the
//! approximation certificates attached to greedy solutions.
//!
//! * Minimum-cost selection: cheapest source set meeting a per-hypothesis
//!   penalty bound. Greedy adds the source with the best coverage gain per
//!   unit cost until the coverage potential saturates.
//! * Budgeted selection: best utility subject to a total cost budget. Greedy
//!   adds the affordable source with the best utility gain per unit cost until
//!   nothing else fits.
//!
//! Ties are broken towards the lowest source index throughout.

use serde::Serialize;

use crate::bitset::{BitSet, SourceSet};
use crate::error::{Error, Result};
use crate::metrics::{
    coverage_z, gamma_bound, gamma_exact, score, utility, Metric, SetFunction, GAMMA_EXACT_LIMIT,
};
use crate::model::{set_cost, Instance};

/// Largest `n` accepted by the exhaustive solvers.
pub const BRUTE_FORCE_LIMIT: usize = 20;

/// Coverage is saturated once within this distance of its maximum.
pub const SATURATION_TOL: f64 = 1e-9;

const TIE_TOL: f64 = 1e-12;
const CONSTRAINT_TOL: f64 = 1e-12;
const BUDGET_TOL: f64 = 1e-9;

/// Minimum-cost selection under per-hypothesis penalty bounds.
#[derive(Clone, Debug)]
pub struct McisProblem<'a> {
    instance: &'a Instance,
    bounds: Vec<f64>,
    metric: Metric,
}

impl<'a> McisProblem<'a> {
    /// `bounds[p]` caps the worst (or total, for [`Metric::TotalPenalty`])
    /// penalty left among hypotheses indistinguishable from `p`.
    pub fn new(instance: &'a Instance, bounds: Vec<f64>, metric: Metric) -> Result<Self> {
        if bounds.len() != instance.m() {
            return Err(Error::InvalidArgument(format!(
                "{} bounds for {} hypotheses",
                bounds.len(),
                instance.m()
            )));
        }
        if let Some(b) = bounds.iter().find(|b| !(0.0..=1.0).contains(*b)) {
            return Err(Error::InvalidArgument(format!("bound {b} outside [0,1]")));
        }
        if let Some(i) = (0..instance.n()).find(|&i| !(instance.sources().cost(i) > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "source {i} has cost {}; minimum-cost selection needs positive costs",
                instance.sources().cost(i)
            )));
        }
        Ok(McisProblem {
            instance,
            bounds,
            metric,
        })
    }

    pub fn instance(&self) -> &Instance {
        self.instance
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn coverage(&self, subset: &SourceSet) -> f64 {
        coverage_z(self.instance, subset, &self.bounds, self.metric)
    }

    /// Hypotheses whose penalty bound `subset` fails, checked directly on the
    /// penalties rather than through the coverage potential.
    pub fn violated(&self, subset: &SourceSet) -> Vec<usize> {
        (0..self.instance.m())
            .filter(|&p| {
                score(self.instance, self.metric, p, subset) < 1.0 - self.bounds[p] - CONSTRAINT_TOL
            })
            .collect()
    }

    pub fn check_feasible(&self) -> Result<()> {
        let bad = self.violated(&self.instance.all_sources());
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Infeasible { hypotheses: bad })
        }
    }
}

/// Budgeted selection.
#[derive(Clone, Debug)]
pub struct MpisProblem<'a> {
    instance: &'a Instance,
    budget: f64,
    metric: Metric,
}

impl<'a> MpisProblem<'a> {
    pub fn new(instance: &'a Instance, budget: f64, metric: Metric) -> Result<Self> {
        if !(budget >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "budget must be nonnegative, got {budget}"
            )));
        }
        Ok(MpisProblem {
            instance,
            budget,
            metric,
        })
    }

    pub fn instance(&self) -> &Instance {
        self.instance
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    /// Sum of per-hypothesis scores; the maximization form of the problem.
    pub fn utility(&self, subset: &SourceSet) -> f64 {
        utility(self.instance, subset, self.metric)
    }

    /// Summed penalty to be minimized: `m - utility`.
    pub fn penalty(&self, subset: &SourceSet) -> f64 {
        self.instance.m() as f64 - self.utility(subset)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceStep {
    pub picked: usize,
    /// Raw gain of the set function.
    pub marginal: f64,
    /// Gain per unit cost used for selection.
    pub ratio: f64,
    /// Set function value after the pick.
    pub value: f64,
}

/// Outcome of checking an approximation guarantee.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Guarantee {
    Certified {
        gamma: f64,
        /// Value the greedy solution is guaranteed to meet, when the optimum
        /// is known; otherwise the multiplicative factor on the optimum.
        bound: Option<f64>,
        factor: Option<f64>,
        passes: Option<bool>,
        formula: &'static str,
    },
    NoCertificate {
        reason: String,
    },
}

impl Guarantee {
    pub fn passes(&self) -> Option<bool> {
        match self {
            Guarantee::Certified { passes, .. } => *passes,
            Guarantee::NoCertificate { .. } => None,
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match self {
            Guarantee::Certified { gamma, .. } => Some(*gamma),
            Guarantee::NoCertificate { .. } => None,
        }
    }

    pub fn bound(&self) -> Option<f64> {
        match self {
            Guarantee::Certified { bound, .. } => *bound,
            Guarantee::NoCertificate { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Mcis,
    Mpis,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Solution {
    pub problem: ProblemKind,
    pub metric: Metric,
    pub selected: Vec<usize>,
    pub cost: f64,
    /// Selection cost for minimum-cost problems, summed penalty for budgeted ones.
    pub objective: f64,
    /// Coverage potential (minimum-cost) or utility (budgeted) of `selected`.
    pub value: f64,
    /// Same function at the empty set.
    pub initial_value: f64,
    /// Coverage potential of the full source set; equals `value` for budgeted problems.
    pub target_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Guarantee>,
    pub trace: Vec<TraceStep>,
}

impl Solution {
    pub fn set(&self, n: usize) -> SourceSet {
        BitSet::from_indices(n, self.selected.iter().copied())
    }

    /// Coverage potential before the last greedy pick.
    pub fn penultimate_value(&self) -> f64 {
        match self.trace.len() {
            0 | 1 => self.initial_value,
            k => self.trace[k - 2].value,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }
}

/// Picks the candidate with the best gain-per-cost ratio, lowest index on ties.
/// Zero-cost candidates rank above everything else.
fn best_candidate(
    candidates: impl Iterator<Item = usize>,
    cost: impl Fn(usize) -> f64,
    gain: impl Fn(usize) -> f64,
) -> Option<(usize, f64, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for i in candidates {
        let g = gain(i);
        let c = cost(i);
        let r = if c > 0.0 { g / c } else { f64::INFINITY };
        let better = match best {
            None => true,
            Some((_, _, br)) => {
                if br.is_infinite() || r.is_infinite() {
                    r > br
                } else {
                    r > br + TIE_TOL
                }
            }
        };
        if better {
            best = Some((i, g, r));
        }
    }
    best
}

/// Cost-benefit greedy for minimum-cost selection.
pub fn greedy_mcis(problem: &McisProblem) -> Result<Solution> {
    problem.check_feasible()?;
    let inst = problem.instance;
    let n = inst.n();
    let target = problem.coverage(&inst.all_sources());
    let mut current = inst.no_sources();
    let initial = problem.coverage(&current);
    let mut value = initial;
    let mut trace = Vec::new();
    while value < target - SATURATION_TOL {
        let (picked, _, ratio) = best_candidate(
            (0..n).filter(|&i| !current.contains(i)),
            |i| inst.sources().cost(i),
            |i| problem.coverage(&current.with(i)) - value,
        )
        .expect("coverage below target implies an unselected source");
        current.insert(picked);
        let next = problem.coverage(&current);
        trace.push(TraceStep {
            picked,
            marginal: next - value,
            ratio,
            value: next,
        });
        value = next;
    }
    let cost = set_cost(inst, &current);
    Ok(Solution {
        problem: ProblemKind::Mcis,
        metric: problem.metric,
        selected: current.to_vec(),
        cost,
        objective: cost,
        value,
        initial_value: initial,
        target_value: target,
        certificate: None,
        trace,
    })
}

/// Cost-benefit greedy for budgeted selection. Only sources that still fit in
/// the remaining budget are candidates, so the result never exceeds it.
pub fn greedy_mpis(problem: &MpisProblem) -> Result<Solution> {
    let inst = problem.instance;
    let n = inst.n();
    let mut current = inst.no_sources();
    let initial = problem.utility(&current);
    let mut value = initial;
    let mut spent = 0.0;
    let mut trace = Vec::new();
    while let Some((picked, _, ratio)) = best_candidate(
        (0..n).filter(|&i| {
            !current.contains(i) && spent + inst.sources().cost(i) <= problem.budget + BUDGET_TOL
        }),
        |i| inst.sources().cost(i),
        |i| problem.utility(&current.with(i)) - value,
    ) {
        current.insert(picked);
        spent += inst.sources().cost(picked);
        let next = problem.utility(&current);
        trace.push(TraceStep {
            picked,
            marginal: next - value,
            ratio,
            value: next,
        });
        value = next;
    }
    Ok(Solution {
        problem: ProblemKind::Mpis,
        metric: problem.metric,
        selected: current.to_vec(),
        cost: set_cost(inst, &current),
        objective: inst.m() as f64 - value,
        value,
        initial_value: initial,
        target_value: value,
        certificate: None,
        trace,
    })
}

fn check_brute_force_size(n: usize) -> Result<()> {
    if n > BRUTE_FORCE_LIMIT {
        Err(Error::TooLarge {
            n,
            limit: BRUTE_FORCE_LIMIT,
        })
    } else {
        Ok(())
    }
}

/// Exact minimum-cost selection by enumerating all subsets. Ties on cost go
/// to the lexicographically smallest index list.
pub fn brute_force_mcis(problem: &McisProblem) -> Result<Solution> {
    let inst = problem.instance;
    let n = inst.n();
    check_brute_force_size(n)?;
    problem.check_feasible()?;
    let mut best: Option<(f64, Vec<usize>, SourceSet)> = None;
    for mask in 0..1u64 << n {
        let set = BitSet::from_mask(n, mask);
        let cost = set_cost(inst, &set);
        if let Some((bc, ref bi, _)) = best {
            if cost > bc + BUDGET_TOL {
                continue;
            }
            if (cost - bc).abs() <= BUDGET_TOL && set.to_vec() >= *bi {
                continue;
            }
        }
        if problem.violated(&set).is_empty() {
            best = Some((cost, set.to_vec(), set));
        }
    }
    let (cost, selected, set) = best.expect("feasibility checked, the full set qualifies");
    let value = problem.coverage(&set);
    Ok(Solution {
        problem: ProblemKind::Mcis,
        metric: problem.metric,
        selected,
        cost,
        objective: cost,
        value,
        initial_value: problem.coverage(&inst.no_sources()),
        target_value: problem.coverage(&inst.all_sources()),
        certificate: None,
        trace: Vec::new(),
    })
}

/// Exact budgeted selection by enumerating all affordable subsets. Ties on
/// utility go to lower cost, then the lexicographically smallest index list.
pub fn brute_force_mpis(problem: &MpisProblem) -> Result<Solution> {
    let inst = problem.instance;
    let n = inst.n();
    check_brute_force_size(n)?;
    let mut best: Option<(f64, f64, Vec<usize>)> = None;
    for mask in 0..1u64 << n {
        let set = BitSet::from_mask(n, mask);
        let cost = set_cost(inst, &set);
        if cost > problem.budget + BUDGET_TOL {
            continue;
        }
        let u = problem.utility(&set);
        let better = match &best {
            None => true,
            Some((bu, bc, bi)) => {
                if u > bu + TIE_TOL {
                    true
                } else if u < bu - TIE_TOL {
                    false
                } else if cost < bc - BUDGET_TOL {
                    true
                } else if cost > bc + BUDGET_TOL {
                    false
                } else {
                    set.to_vec() < *bi
                }
            }
        };
        if better {
            best = Some((u, cost, set.to_vec()));
        }
    }
    let (value, cost, selected) = best.expect("the empty set is always affordable");
    Ok(Solution {
        problem: ProblemKind::Mpis,
        metric: problem.metric,
        selected,
        cost,
        objective: inst.m() as f64 - value,
        value,
        initial_value: problem.utility(&inst.no_sources()),
        target_value: value,
        certificate: None,
        trace: Vec::new(),
    })
}

/// Multiplicative factor `1 + (1/gamma) ln[(z(D) - z(0)) / (z(D) - z(I^{T-1}))]`
/// on the optimal cost. Needs `gamma > 0` and the greedy trace.
pub fn mcis_factor(solution: &Solution, gamma: f64) -> Option<f64> {
    if !(gamma > 0.0) {
        return None;
    }
    if solution.trace.is_empty() {
        return Some(1.0);
    }
    let total = solution.target_value - solution.initial_value;
    let left = solution.target_value - solution.penultimate_value();
    Some(1.0 + (total / left).ln() / gamma)
}

/// Factor `(1/gamma) (1 + ln[(z(D) - z(0)) / (z(D) - z(I^{T-1}))])`, valid
/// whenever `gamma` lower-bounds the submodularity ratio of the coverage
/// potential. Unlike [`mcis_factor`] it also charges the last greedy step
/// `1/gamma`, so it is at least `1/gamma` even for one-step runs.
pub fn mcis_weak_factor(solution: &Solution, gamma: f64) -> Option<f64> {
    if !(gamma > 0.0) {
        return None;
    }
    if solution.trace.is_empty() {
        return Some(1.0);
    }
    let total = solution.target_value - solution.initial_value;
    let left = solution.target_value - solution.penultimate_value();
    Some((1.0 + (total / left).ln()) / gamma)
}

/// Checks `c(I_g) <= factor * c(I*)`. `gamma = 0` yields no certificate.
pub fn mcis_guarantee(solution: &Solution, opt_cost: Option<f64>, gamma: f64) -> Guarantee {
    match mcis_factor(solution, gamma) {
        None => Guarantee::NoCertificate {
            reason: format!("submodularity ratio {gamma} gives no finite bound"),
        },
        Some(factor) => {
            let bound = opt_cost.map(|c| factor * c);
            Guarantee::Certified {
                gamma,
                bound,
                factor: Some(factor),
                passes: bound.map(|b| solution.cost <= b + SATURATION_TOL),
                formula: "cost <= (1 + ln((z(D)-z(0))/(z(D)-z(I_{T-1})))/gamma) * opt_cost",
            }
        }
    }
}

/// Checks `value >= (1 - e^-gamma) * opt + initial * e^-gamma`.
pub fn mpis_guarantee(solution: &Solution, opt_value: Option<f64>, gamma: f64) -> Guarantee {
    let decay = (-gamma).exp();
    let bound = opt_value.map(|o| (1.0 - decay) * o + solution.initial_value * decay);
    Guarantee::Certified {
        gamma,
        bound,
        factor: Some(1.0 - decay),
        passes: bound.map(|b| solution.value >= b - SATURATION_TOL),
        formula: "utility >= (1 - exp(-gamma)) * opt_utility + utility(empty) * exp(-gamma)",
    }
}

/// Submodularity ratio used for certificates: 1 for the total-penalty metric;
/// otherwise the larger of the penalty-gap bound and, for small instances,
/// the exact ratio of `function`.
pub fn certificate_gamma(instance: &Instance, metric: Metric, function: &SetFunction) -> f64 {
    match metric {
        Metric::TotalPenalty => 1.0,
        Metric::MaxPenalty => {
            let lower = gamma_bound(instance.penalties()).gamma;
            if instance.n() <= GAMMA_EXACT_LIMIT {
                gamma_exact(instance, function).map_or(lower, |g| g.max(lower))
            } else {
                lower
            }
        }
    }
}

/// Attaches a certificate to a greedy minimum-cost solution. The optimum is
/// computed by brute force when the instance is small enough.
pub fn certify_mcis(problem: &McisProblem, solution: &mut Solution) -> Result<()> {
    let gamma = certificate_gamma(
        problem.instance,
        problem.metric,
        &SetFunction::Coverage {
            bounds: problem.bounds.clone(),
            metric: problem.metric,
        },
    );
    let opt = if problem.instance.n() <= BRUTE_FORCE_LIMIT {
        Some(brute_force_mcis(problem)?.cost)
    } else {
        None
    };
    solution.certificate = Some(mcis_guarantee(solution, opt, gamma));
    Ok(())
}

/// Attaches a certificate to a greedy budgeted solution.
pub fn certify_mpis(problem: &MpisProblem, solution: &mut Solution) -> Result<()> {
    let gamma = certificate_gamma(
        problem.instance,
        problem.metric,
        &SetFunction::Utility(problem.metric),
    );
    let opt = if problem.instance.n() <= BRUTE_FORCE_LIMIT {
        Some(brute_force_mpis(problem)?.value)
    } else {
        None
    };
    solution.certificate = Some(mpis_guarantee(solution, opt, gamma));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_abs_diff_eq;

    #[test]
    fn unique_fixture_greedy_picks_cheap_high_gain_first() {
        let inst = fixtures::unique_penalty(1.0, 2.0);
        let p = McisProblem::new(&inst, vec![0.0; 3], Metric::MaxPenalty).unwrap();
        let sol = greedy_mcis(&p).unwrap();
        assert_eq!(sol.selected, vec![0, 1]);
        assert_eq!(sol.cost, 3.0);
        assert_eq!(sol.trace[0].picked, 0);
        assert_abs_diff_eq!(sol.trace[0].ratio, 1.15, epsilon = 1e-12);
        let opt = brute_force_mcis(&p).unwrap();
        assert_eq!(opt.selected, vec![0, 1]);
        assert_eq!(opt.cost, 3.0);
    }

    #[test]
    fn vacuous_bounds_select_nothing() {
        let inst = fixtures::unique_penalty(1.0, 2.0);
        let p = McisProblem::new(&inst, vec![1.0; 3], Metric::MaxPenalty).unwrap();
        let sol = greedy_mcis(&p).unwrap();
        assert!(sol.selected.is_empty());
        assert_eq!(sol.cost, 0.0);
        assert_eq!(brute_force_mcis(&p).unwrap().cost, 0.0);
    }

    #[test]
    fn single_sufficient_source() {
        // source 0 alone meets the bounds; source 1 is useless and cheaper
        let inst = fixtures::unique_penalty(1.0, 0.5);
        let bounds = vec![0.4, 0.3, 0.0];
        let p = McisProblem::new(&inst, bounds, Metric::MaxPenalty).unwrap();
        let sol = greedy_mcis(&p).unwrap();
        assert_eq!(sol.selected, vec![0]);
        assert_eq!(sol.trace.len(), 1);
        assert_eq!(brute_force_mcis(&p).unwrap().selected, vec![0]);
    }

    #[test]
    fn infeasible_bounds_name_hypotheses() {
        let inst = fixtures::equal_penalty();
        // with only source 0 the worst penalty for hypothesis 0 stays 0.5
        let sub = Instance::new(
            inst.hypotheses().clone(),
            inst.penalties().clone(),
            crate::model::Sources::Partition(vec![crate::model::PartitionModel::new(
                1.0,
                vec![vec![0, 1], vec![2]],
            )]),
        );
        let p = McisProblem::new(&sub, vec![0.0, 0.0, 0.0], Metric::MaxPenalty).unwrap();
        match greedy_mcis(&p) {
            Err(Error::Infeasible { hypotheses }) => assert_eq!(hypotheses, vec![0, 1]),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn equal_penalty_budget_one() {
        let inst = fixtures::equal_penalty();
        let p = MpisProblem::new(&inst, 1.0, Metric::MaxPenalty).unwrap();
        let sol = greedy_mpis(&p).unwrap();
        assert_eq!(sol.selected, vec![0]);
        assert_eq!(sol.value, 2.0);
        assert_eq!(sol.objective, 1.0);
        let opt = brute_force_mpis(&p).unwrap();
        assert_eq!(opt.objective, 1.0);
        assert_eq!(opt.selected, vec![0]);
    }

    #[test]
    fn zero_budget_and_full_budget() {
        let inst = fixtures::unique_penalty(1.0, 2.0);
        let none = greedy_mpis(&MpisProblem::new(&inst, 0.0, Metric::MaxPenalty).unwrap()).unwrap();
        assert!(none.selected.is_empty());
        assert_abs_diff_eq!(none.value, 1.15, epsilon = 1e-12);
        let all = greedy_mpis(&MpisProblem::new(&inst, 3.0, Metric::MaxPenalty).unwrap()).unwrap();
        assert_eq!(all.selected, vec![0, 1]);
        let opt =
            brute_force_mpis(&MpisProblem::new(&inst, 3.0, Metric::MaxPenalty).unwrap()).unwrap();
        assert_eq!(opt.value, all.value);
    }

    #[test]
    fn zero_cost_source_is_taken_first() {
        let inst = fixtures::unique_penalty(1.0, 0.0);
        let sol = greedy_mpis(&MpisProblem::new(&inst, 0.5, Metric::MaxPenalty).unwrap()).unwrap();
        assert_eq!(sol.selected, vec![1]);
        assert!(McisProblem::new(&inst, vec![0.0; 3], Metric::MaxPenalty).is_err());
    }

    #[test]
    fn mcis_certificates() {
        let inst = fixtures::unique_penalty(1.0, 2.0);
        let p = McisProblem::new(&inst, vec![0.0; 3], Metric::MaxPenalty).unwrap();
        let mut sol = greedy_mcis(&p).unwrap();
        certify_mcis(&p, &mut sol).unwrap();
        let cert = sol.certificate.clone().unwrap();
        assert_eq!(cert.passes(), Some(true));
        assert!(cert.bound().unwrap() >= sol.cost);

        // a single greedy step has factor exactly 1
        let p1 = McisProblem::new(&inst, vec![0.4, 0.3, 0.0], Metric::MaxPenalty).unwrap();
        let one = greedy_mcis(&p1).unwrap();
        assert_eq!(mcis_factor(&one, 0.3), Some(1.0));

        let ex = fixtures::equal_penalty();
        let pe = McisProblem::new(&ex, vec![0.0; 3], Metric::MaxPenalty).unwrap();
        let sol = greedy_mcis(&pe).unwrap();
        let g = gamma_bound(ex.penalties()).gamma;
        assert!(matches!(
            mcis_guarantee(&sol, Some(2.0), g),
            Guarantee::NoCertificate { .. }
        ));
    }

    #[test]
    fn mpis_certificate_with_zero_gamma_is_vacuous() {
        let inst = fixtures::equal_penalty();
        let p = MpisProblem::new(&inst, 1.0, Metric::MaxPenalty).unwrap();
        let sol = greedy_mpis(&p).unwrap();
        let g = mpis_guarantee(&sol, Some(2.0), 0.0);
        assert_eq!(g.bound(), Some(1.5));
        assert_eq!(g.passes(), Some(true));
    }

    #[test]
    fn total_metric_solutions() {
        let inst = fixtures::equal_penalty();
        let p = McisProblem::new(&inst, vec![0.5; 3], Metric::TotalPenalty).unwrap();
        let mut sol = greedy_mcis(&p).unwrap();
        // one source brings every total penalty down to 0.5
        assert_eq!(sol.selected, vec![0]);
        certify_mcis(&p, &mut sol).unwrap();
        assert_eq!(sol.certificate.as_ref().unwrap().gamma(), Some(1.0));
        assert_eq!(sol.certificate.as_ref().unwrap().passes(), Some(true));
    }

    #[test]
    fn brute_force_size_limit() {
        let inst = crate::model::Instance::new(
            crate::model::HypothesisSet::numbered(2),
            crate::model::PenaltyMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(),
            crate::model::Sources::Partition(
                (0..21)
                    .map(|_| crate::model::PartitionModel::new(1.0, vec![vec![0], vec![1]]))
                    .collect(),
            ),
        );
        let p = MpisProblem::new(&inst, 1.0, Metric::MaxPenalty).unwrap();
        assert!(matches!(
            brute_force_mpis(&p),
            Err(Error::TooLarge { n: 21, .. })
        ));
    }
}
