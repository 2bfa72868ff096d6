//! Seeded random instances and batch experiments comparing greedy selection
//! with the brute-force optimum.
//!
//! Trial `k` of an experiment draws everything from
//! `ChaCha8Rng::seed_from_u64(derive_seed(master_seed, k))`, and trials are
//! collected in index order, so the result table depends only on the spec.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{derive_seed, simulate_run, SimulationRun};
use crate::error::{Error, Result};
use crate::metrics::{gamma_bound, Metric, SetFunction};
use crate::model::{
    validate, HypothesisSet, Instance, PartitionModel, PenaltyMatrix, SourceModel, Sources,
};
use crate::solvers::{
    brute_force_mcis, brute_force_mpis, certificate_gamma, greedy_mcis, greedy_mpis,
    mcis_guarantee, mpis_guarantee, Guarantee, McisProblem, MpisProblem, BRUTE_FORCE_LIMIT,
};

/// Class names of the aerial vehicle classification task.
pub const AVC_CLASSES: [&str; 10] = [
    "cargo",
    "passenger",
    "freight",
    "heavy fighter",
    "interceptor",
    "sailplane",
    "hang glider",
    "paraglider",
    "surveillance UAV",
    "quadrotor",
];

/// AVC classes whose penalty bounds are tight.
pub const AVC_CRITICAL: [usize; 4] = [3, 4, 8, 9];

pub const AVC_BENIGN_RANGE: [f64; 2] = [0.7, 1.0];
pub const AVC_CRITICAL_RANGE: [f64; 2] = [0.1, 0.4];

/// Minimum pairwise gap inside a row of a unique-penalty matrix.
pub const UNIQUE_MIN_GAP: f64 = 1e-3;

/// Threshold draws per trial before an infeasible trial is skipped.
pub const MAX_RESAMPLES: usize = 100;

/// Hypotheses sharing the true hypothesis' observation model in the
/// convergence demo; hypothesis 0 is true.
pub const DEMO_CLASS: [usize; 5] = [0, 1, 5, 7, 8];

const DEMO_MIN_KL: f64 = 0.5;

/// Penalty matrix with zero diagonal and uniformly drawn, row-normalized
/// off-diagonal entries. With `unique`, rows are redrawn until all entries of
/// a row, the zero diagonal included, are at least [`UNIQUE_MIN_GAP`] apart.
pub fn random_penalty_matrix<R: Rng + ?Sized>(
    m: usize,
    unique: bool,
    rng: &mut R,
) -> PenaltyMatrix {
    assert!(m >= 2, "penalty matrix needs at least two hypotheses");
    let rows = (0..m)
        .map(|p| loop {
            let mut row: Vec<f64> = (0..m)
                .map(|q| {
                    if q == p {
                        0.0
                    } else {
                        rng.gen_range(f64::EPSILON..1.0)
                    }
                })
                .collect();
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
            if !unique || min_gap(&row) >= UNIQUE_MIN_GAP {
                break row;
            }
        })
        .collect();
    PenaltyMatrix::from_rows(rows).expect("square by construction")
}

fn min_gap(row: &[f64]) -> f64 {
    let mut v = row.to_vec();
    v.sort_by(f64::total_cmp);
    v.windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

/// One random partition per source: each hypothesis lands in one of
/// `ceil(m/2)` slots uniformly and empty slots are dropped. Costs are left
/// at 1.
pub fn random_partitions<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Vec<PartitionModel> {
    let slots = m.div_ceil(2).max(1);
    (0..n)
        .map(|_| {
            let mut blocks = vec![Vec::new(); slots];
            for h in 0..m {
                blocks[rng.gen_range(0..slots)].push(h);
            }
            blocks.retain(|b| !b.is_empty());
            PartitionModel::new(1.0, blocks)
        })
        .collect()
}

/// Instance over `penalties` with `n` sources from [`random_partitions`] and
/// integer costs uniform on the inclusive `cost_range`.
pub fn random_partition_instance<R: Rng + ?Sized>(
    labels: HypothesisSet,
    penalties: PenaltyMatrix,
    n: usize,
    cost_range: [u32; 2],
    rng: &mut R,
) -> Instance {
    let sources = random_partitions(penalties.dim(), n, rng)
        .into_iter()
        .map(|mut s| {
            s.cost = rng.gen_range(cost_range[0]..=cost_range[1]) as f64;
            s
        })
        .collect();
    Instance::new(labels, penalties, Sources::Partition(sources))
}

/// Largest `m` admitting a penalty matrix with `gamma_bound >= gamma`.
///
/// A row holds `m` distinct values including the zero diagonal, so its
/// smallest gap is at most its range over `m - 1`.
pub fn max_hypotheses_for_gamma(gamma: f64) -> usize {
    ((1.0 / gamma) + 1e-9).floor() as usize + 1
}

/// Penalty matrix with `gamma_bound >= gamma`.
///
/// Every row holds the same value set: consecutive gaps `1 + u_k s` with
/// `u_k` uniform and `s` chosen so the smallest gap is at least `gamma` times
/// the range, scaled to sum to one and placed on the off-diagonal positions
/// in a random order.
pub fn gamma_targeted_matrix<R: Rng + ?Sized>(
    m: usize,
    gamma: f64,
    rng: &mut R,
) -> Result<PenaltyMatrix> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma target must lie in (0,1], got {gamma}"
        )));
    }
    if m < 2 {
        return Err(Error::InvalidArgument(
            "penalty matrix needs at least two hypotheses".into(),
        ));
    }
    if m > max_hypotheses_for_gamma(gamma) {
        return Err(Error::InvalidArgument(format!(
            "gamma {gamma} is unreachable with {m} hypotheses (at most {})",
            max_hypotheses_for_gamma(gamma)
        )));
    }
    let k = (m - 1) as f64;
    // slack keeps the target strict against rounding in the normalization
    let spread = ((1.0 / (gamma * k) - 1.0) * 0.999).max(0.0);
    let mut values = Vec::with_capacity(m - 1);
    let mut acc = 0.0;
    for _ in 0..m - 1 {
        acc += 1.0 + rng.gen::<f64>() * spread;
        values.push(acc);
    }
    let total: f64 = values.iter().sum();
    values.iter_mut().for_each(|v| *v /= total);
    let rows = (0..m)
        .map(|p| {
            let mut shuffled = values.clone();
            shuffled.shuffle(rng);
            let mut it = shuffled.into_iter();
            (0..m)
                .map(|q| {
                    if q == p {
                        0.0
                    } else {
                        it.next().expect("m - 1 values")
                    }
                })
                .collect()
        })
        .collect();
    PenaltyMatrix::from_rows(rows)
}

/// Likelihood-backed instance with 10 hypotheses where the members of
/// [`DEMO_CLASS`] share one observation model under every source and all
/// other hypotheses are at joint KL divergence at least 0.5 from it.
pub fn convergence_demo_instance(seed: u64) -> Instance {
    const M: usize = 10;
    const N: usize = 3;
    const OBS: usize = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let penalties = random_penalty_matrix(M, true, &mut rng);
    loop {
        let mut sources = Vec::with_capacity(N);
        for _ in 0..N {
            let mut cols: Vec<Vec<f64>> =
                (0..M).map(|_| random_distribution(OBS, &mut rng)).collect();
            for &q in &DEMO_CLASS[1..] {
                cols[q] = cols[0].clone();
            }
            let likelihood = (0..OBS)
                .map(|o| cols.iter().map(|c| c[o]).collect())
                .collect();
            sources.push(SourceModel::new(1.0, likelihood));
        }
        let inst = Instance::new(
            HypothesisSet::numbered(M),
            penalties.clone(),
            Sources::Likelihood(sources),
        );
        let all = inst.all_sources();
        let separated = (0..M)
            .filter(|q| !DEMO_CLASS.contains(q))
            .all(|q| crate::model::kl_set(&inst, &all, 0, q).expect("in range") >= DEMO_MIN_KL);
        if separated && validate(&inst).is_empty() {
            return inst;
        }
    }
}

fn random_distribution<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    // entries bounded away from zero keep every likelihood positive
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    McisRatio,
    MpisRatio,
    ModifiedMcisRatio,
    ModifiedMpisRatio,
    GammaSweep,
    ConvergenceDemo,
}

/// How per-hypothesis penalty bounds are drawn for minimum-cost trials.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Uniform in the given ranges.
    Absolute,
    /// Uniform in the given ranges, times the row's largest penalty.
    RowMaxFraction,
    /// `k / m` with `k` uniform on `1..m`.
    Grid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub n: Option<usize>,
    /// Inclusive integer range of source costs.
    #[serde(default)]
    pub cost_range: Option<[u32; 2]>,
    /// One range per hypothesis, or a single range for all.
    #[serde(default)]
    pub threshold_ranges: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub threshold_mode: Option<ThresholdMode>,
    /// Inclusive integer range of budgets.
    #[serde(default)]
    pub budget_range: Option<[u32; 2]>,
    #[serde(default)]
    pub gamma_targets: Option<Vec<f64>>,
    #[serde(default)]
    pub unique_penalties: Option<bool>,
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub master_seed: u64,
}

fn default_trials() -> usize {
    1
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, trials: usize, master_seed: u64) -> Self {
        ExperimentSpec {
            kind,
            trials,
            m: None,
            n: None,
            cost_range: None,
            threshold_ranges: None,
            threshold_mode: None,
            budget_range: None,
            gamma_targets: None,
            unique_penalties: None,
            horizon: None,
            master_seed,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(s)?;
        spec.resolve()?;
        Ok(spec)
    }

    /// Fills kind-specific defaults and checks the result.
    pub fn resolve(&self) -> Result<Resolved> {
        use ExperimentKind::*;
        let kind = self.kind;
        let m = self.m.unwrap_or(match kind {
            ModifiedMcisRatio | ModifiedMpisRatio => 20,
            GammaSweep => 11,
            _ => 10,
        });
        let n = self
            .n
            .unwrap_or(if kind == ConvergenceDemo { 3 } else { 10 });
        let cost_range = self.cost_range.unwrap_or(match kind {
            ModifiedMpisRatio => [1, 1],
            _ => [1, 10],
        });
        let budget_range = self.budget_range.unwrap_or(match kind {
            ModifiedMpisRatio => [1, 10],
            _ => [5, 30],
        });
        let threshold_mode = self.threshold_mode.unwrap_or(match kind {
            ModifiedMcisRatio => ThresholdMode::Grid,
            GammaSweep => ThresholdMode::RowMaxFraction,
            _ => ThresholdMode::Absolute,
        });
        let threshold_ranges = match &self.threshold_ranges {
            Some(r) => r.clone(),
            None if kind == McisRatio && m == AVC_CLASSES.len() => (0..m)
                .map(|p| {
                    if AVC_CRITICAL.contains(&p) {
                        AVC_CRITICAL_RANGE
                    } else {
                        AVC_BENIGN_RANGE
                    }
                })
                .collect(),
            None if threshold_mode == ThresholdMode::RowMaxFraction => vec![[0.0, 1.0]],
            None => vec![[0.1, 1.0]],
        };
        let gamma_targets = self
            .gamma_targets
            .clone()
            .unwrap_or_else(|| vec![0.1, 0.2, 0.3, 0.4, 0.5]);

        let invalid = |msg: String| Err(Error::InvalidArgument(msg));
        if self.trials == 0 {
            return invalid("trials must be at least 1".into());
        }
        if m < 2 {
            return invalid(format!("need at least two hypotheses, got {m}"));
        }
        if kind != ConvergenceDemo && !(1..=BRUTE_FORCE_LIMIT).contains(&n) {
            return invalid(format!("n must lie in 1..={BRUTE_FORCE_LIMIT}, got {n}"));
        }
        if kind == ConvergenceDemo
            && (self.m.is_some_and(|m| m != 10) || self.n.is_some_and(|n| n != 3))
        {
            return invalid("the convergence demo has fixed sizes m = 10, n = 3".into());
        }
        if cost_range[0] > cost_range[1] || budget_range[0] > budget_range[1] {
            return invalid("ranges must be ordered low, high".into());
        }
        if cost_range[0] == 0 && matches!(kind, McisRatio | ModifiedMcisRatio | GammaSweep) {
            return invalid("minimum-cost experiments need positive costs".into());
        }
        if threshold_ranges.len() != 1 && threshold_ranges.len() != m {
            return invalid(format!(
                "{} threshold ranges for {m} hypotheses",
                threshold_ranges.len()
            ));
        }
        if threshold_ranges
            .iter()
            .any(|[lo, hi]| !(0.0 <= *lo && lo <= hi && *hi <= 1.0))
        {
            return invalid("threshold ranges must be ordered and inside [0,1]".into());
        }
        if gamma_targets.is_empty() || gamma_targets.iter().any(|g| !(*g > 0.0 && *g <= 1.0)) {
            return invalid("gamma targets must be a nonempty list in (0,1]".into());
        }
        Ok(Resolved {
            kind,
            trials: self.trials,
            m,
            n,
            cost_range,
            threshold_ranges,
            threshold_mode,
            budget_range,
            gamma_targets,
            unique_penalties: self.unique_penalties.unwrap_or(false),
            horizon: self.horizon.unwrap_or(50),
            master_seed: self.master_seed,
        })
    }
}

/// An [`ExperimentSpec`] with every default filled in.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Resolved {
    pub kind: ExperimentKind,
    pub trials: usize,
    pub m: usize,
    pub n: usize,
    pub cost_range: [u32; 2],
    pub threshold_ranges: Vec<[f64; 2]>,
    pub threshold_mode: ThresholdMode,
    pub budget_range: [u32; 2],
    pub gamma_targets: Vec<f64>,
    pub unique_penalties: bool,
    pub horizon: usize,
    pub master_seed: u64,
}

impl Resolved {
    fn labels(&self) -> HypothesisSet {
        if matches!(
            self.kind,
            ExperimentKind::McisRatio | ExperimentKind::MpisRatio
        ) && self.m == AVC_CLASSES.len()
        {
            HypothesisSet::new(AVC_CLASSES.iter().map(|s| s.to_string()).collect())
        } else {
            HypothesisSet::numbered(self.m)
        }
    }

    fn thresholds<R: Rng + ?Sized>(&self, penalties: &PenaltyMatrix, rng: &mut R) -> Vec<f64> {
        let m = penalties.dim();
        (0..m)
            .map(|p| match self.threshold_mode {
                ThresholdMode::Grid => rng.gen_range(1..m) as f64 / m as f64,
                mode => {
                    let [lo, hi] = self.threshold_ranges[if self.threshold_ranges.len() == 1 {
                        0
                    } else {
                        p
                    }];
                    let u = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
                    if mode == ThresholdMode::RowMaxFraction {
                        u * penalties.row(p).iter().copied().fold(0.0, f64::max)
                    } else {
                        u
                    }
                }
            })
            .collect()
    }

    fn partition_instance<R: Rng + ?Sized>(
        &self,
        labels: HypothesisSet,
        penalties: PenaltyMatrix,
        rng: &mut R,
    ) -> Instance {
        random_partition_instance(labels, penalties, self.n, self.cost_range, rng)
    }
}

/// One row of the result table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub kind: &'static str,
    pub m: usize,
    pub n: usize,
    pub gamma_bound: f64,
    /// Cost for minimum-cost trials, utility for budgeted ones.
    pub greedy_value: Option<f64>,
    pub opt_value: Option<f64>,
    /// Greedy over optimum of the values above; `0/0` counts as 1.
    pub ratio: Option<f64>,
    /// `true`, `false`, `none` (no certificate) or `skipped`.
    pub cert_pass: &'static str,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupSummary {
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub trials: usize,
    pub skipped: usize,
    pub mean_ratio: Option<f64>,
    pub min_ratio: Option<f64>,
    pub max_ratio: Option<f64>,
    pub certified: usize,
    pub cert_failures: usize,
    pub no_certificate: usize,
    pub cert_pass_rate: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub spec: Resolved,
    pub groups: Vec<GroupSummary>,
    /// For gamma sweeps: whether mean cost ratio is non-increasing and mean
    /// utility ratio non-decreasing as the target grows.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_trend: Option<GammaTrend>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceSummary>,
    pub all_certificates_pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GammaTrend {
    pub mcis_mean_ratio_non_increasing: bool,
    pub mpis_mean_ratio_non_decreasing: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceSummary {
    pub true_theta: usize,
    pub equivalence_class: Vec<usize>,
    pub horizon: usize,
    pub final_beliefs: Vec<f64>,
    pub max_outside_belief: f64,
    pub max_inside_deviation: f64,
}

pub struct ExperimentOutput {
    pub rows: Vec<TrialRow>,
    pub summary: Summary,
    /// Demo instance and run, for [`ExperimentKind::ConvergenceDemo`].
    pub trajectory: Option<(Instance, SimulationRun)>,
}

impl ExperimentOutput {
    /// Result table, or the belief trajectory for the convergence demo.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        if let Some((inst, run)) = &self.trajectory {
            return run.write_csv(inst, out);
        }
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        if self.rows.is_empty() {
            w.write_record([
                "trial",
                "seed",
                "kind",
                "m",
                "n",
                "gamma_bound",
                "greedy_value",
                "opt_value",
                "ratio",
                "cert_pass",
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 && num == 0.0 {
        1.0
    } else {
        num / den
    }
}

fn cert_label(g: &Guarantee) -> &'static str {
    match g.passes() {
        Some(true) => "true",
        Some(false) => "false",
        None => "none",
    }
}

struct Planned {
    kind: &'static str,
    group: usize,
    metric: Metric,
    mcis: bool,
    penalties: Option<PenaltyMatrix>,
}

fn mcis_trial<R: Rng + ?Sized>(
    spec: &Resolved,
    plan: &Planned,
    trial: usize,
    seed: u64,
    rng: &mut R,
) -> Result<TrialRow> {
    let m = plan.penalties.as_ref().map_or(spec.m, |p| p.dim());
    let penalties = match &plan.penalties {
        Some(p) => p.clone(),
        None => random_penalty_matrix(m, spec.unique_penalties, rng),
    };
    let labels = if plan.penalties.is_some() {
        HypothesisSet::numbered(m)
    } else {
        spec.labels()
    };
    let inst = spec.partition_instance(labels, penalties, rng);
    let gb = gamma_bound(inst.penalties()).gamma;
    let mut row = TrialRow {
        trial,
        seed,
        kind: plan.kind,
        m,
        n: spec.n,
        gamma_bound: gb,
        greedy_value: None,
        opt_value: None,
        ratio: None,
        cert_pass: "skipped",
    };
    for _ in 0..MAX_RESAMPLES {
        let bounds = spec.thresholds(inst.penalties(), rng);
        let problem = McisProblem::new(&inst, bounds.clone(), plan.metric)?;
        if problem.check_feasible().is_err() {
            continue;
        }
        let greedy = greedy_mcis(&problem)?;
        let opt = brute_force_mcis(&problem)?;
        let gamma = certificate_gamma(
            &inst,
            plan.metric,
            &SetFunction::Coverage {
                bounds,
                metric: plan.metric,
            },
        );
        let cert = mcis_guarantee(&greedy, Some(opt.cost), gamma);
        row.greedy_value = Some(greedy.cost);
        row.opt_value = Some(opt.cost);
        row.ratio = Some(ratio(greedy.cost, opt.cost));
        row.cert_pass = cert_label(&cert);
        break;
    }
    Ok(row)
}

fn mpis_trial<R: Rng + ?Sized>(
    spec: &Resolved,
    plan: &Planned,
    trial: usize,
    seed: u64,
    rng: &mut R,
) -> Result<TrialRow> {
    let m = plan.penalties.as_ref().map_or(spec.m, |p| p.dim());
    let penalties = match &plan.penalties {
        Some(p) => p.clone(),
        None => random_penalty_matrix(m, spec.unique_penalties, rng),
    };
    let labels = if plan.penalties.is_some() {
        HypothesisSet::numbered(m)
    } else {
        spec.labels()
    };
    let inst = spec.partition_instance(labels, penalties, rng);
    let budget = rng.gen_range(spec.budget_range[0]..=spec.budget_range[1]) as f64;
    let problem = MpisProblem::new(&inst, budget, plan.metric)?;
    let greedy = greedy_mpis(&problem)?;
    let opt = brute_force_mpis(&problem)?;
    let gamma = certificate_gamma(&inst, plan.metric, &SetFunction::Utility(plan.metric));
    let cert = mpis_guarantee(&greedy, Some(opt.value), gamma);
    Ok(TrialRow {
        trial,
        seed,
        kind: plan.kind,
        m,
        n: spec.n,
        gamma_bound: gamma_bound(inst.penalties()).gamma,
        greedy_value: Some(greedy.value),
        opt_value: Some(opt.value),
        ratio: Some(ratio(greedy.value, opt.value)),
        cert_pass: cert_label(&cert),
    })
}

fn plans(spec: &Resolved) -> Result<Vec<Planned>> {
    use ExperimentKind::*;
    let single = |kind, metric, mcis| {
        vec![Planned {
            kind,
            group: 0,
            metric,
            mcis,
            penalties: None,
        }]
    };
    Ok(match spec.kind {
        McisRatio => single("mcis_ratio", Metric::MaxPenalty, true),
        MpisRatio => single("mpis_ratio", Metric::MaxPenalty, false),
        ModifiedMcisRatio => single("modified_mcis_ratio", Metric::TotalPenalty, true),
        ModifiedMpisRatio => single("modified_mpis_ratio", Metric::TotalPenalty, false),
        GammaSweep => {
            // one matrix per target, shared by all trials of that target
            let mut out = Vec::new();
            for (g, &target) in spec.gamma_targets.iter().enumerate() {
                let m = spec.m.min(max_hypotheses_for_gamma(target));
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(spec.master_seed, u64::MAX - g as u64));
                let penalties = gamma_targeted_matrix(m, target, &mut rng)?;
                for (kind, mcis) in [("gamma_sweep_mcis", true), ("gamma_sweep_mpis", false)] {
                    out.push(Planned {
                        kind,
                        group: g,
                        metric: Metric::MaxPenalty,
                        mcis,
                        penalties: Some(penalties.clone()),
                    });
                }
            }
            out
        }
        ConvergenceDemo => Vec::new(),
    })
}

/// Runs every trial of `spec` on the current rayon pool.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let spec = spec.resolve()?;
    if spec.kind == ExperimentKind::ConvergenceDemo {
        return run_convergence_demo(spec);
    }
    let plans = plans(&spec)?;
    let jobs: Vec<(usize, usize)> = (0..plans.len())
        .flat_map(|p| (0..spec.trials).map(move |j| (p, j)))
        .collect();
    let rows = jobs
        .par_iter()
        .enumerate()
        .map(|(trial, &(p, _))| {
            let seed = derive_seed(spec.master_seed, trial as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let plan = &plans[p];
            if plan.mcis {
                mcis_trial(&spec, plan, trial, seed, &mut rng)
            } else {
                mpis_trial(&spec, plan, trial, seed, &mut rng)
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut groups = Vec::new();
    for (p, plan) in plans.iter().enumerate() {
        let members: Vec<&TrialRow> = rows
            .iter()
            .zip(&jobs)
            .filter(|(_, job)| job.0 == p)
            .map(|(r, _)| r)
            .collect();
        let gamma_target =
            (spec.kind == ExperimentKind::GammaSweep).then(|| spec.gamma_targets[plan.group]);
        groups.push(summarize(
            plan.kind,
            gamma_target,
            members,
            plan.penalties.as_ref().map(|p| p.dim()),
        ));
    }
    let gamma_trend = (spec.kind == ExperimentKind::GammaSweep).then(|| {
        let means = |kind: &str| -> Vec<f64> {
            groups
                .iter()
                .filter(|g| g.kind == kind)
                .filter_map(|g| g.mean_ratio)
                .collect()
        };
        let sorted = |v: Vec<f64>, order: std::cmp::Ordering| {
            let mut pairs: Vec<(f64, f64)> = spec.gamma_targets.iter().copied().zip(v).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            pairs.windows(2).all(|w| w[1].1.total_cmp(&w[0].1) != order)
        };
        GammaTrend {
            mcis_mean_ratio_non_increasing: sorted(
                means("gamma_sweep_mcis"),
                std::cmp::Ordering::Greater,
            ),
            mpis_mean_ratio_non_decreasing: sorted(
                means("gamma_sweep_mpis"),
                std::cmp::Ordering::Less,
            ),
        }
    });
    let all_certificates_pass = rows.iter().all(|r| r.cert_pass != "false");
    Ok(ExperimentOutput {
        rows,
        summary: Summary {
            spec,
            groups,
            gamma_trend,
            convergence: None,
            all_certificates_pass,
        },
        trajectory: None,
    })
}

fn summarize(
    kind: &'static str,
    gamma_target: Option<f64>,
    rows: Vec<&TrialRow>,
    m: Option<usize>,
) -> GroupSummary {
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let count = |label: &str| rows.iter().filter(|r| r.cert_pass == label).count();
    let (passed, failed) = (count("true"), count("false"));
    GroupSummary {
        kind,
        gamma_target,
        m,
        trials: rows.len(),
        skipped: count("skipped"),
        mean_ratio: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
        min_ratio: ratios.iter().copied().reduce(f64::min),
        max_ratio: ratios.iter().copied().reduce(f64::max),
        certified: passed + failed,
        cert_failures: failed,
        no_certificate: count("none"),
        cert_pass_rate: (passed + failed > 0).then(|| passed as f64 / (passed + failed) as f64),
    }
}

fn run_convergence_demo(spec: Resolved) -> Result<ExperimentOutput> {
    let inst = convergence_demo_instance(spec.master_seed);
    let all = inst.all_sources();
    let run = simulate_run(
        &inst,
        &all,
        0,
        spec.horizon,
        derive_seed(spec.master_seed, 0),
        None,
    )?;
    let fin = run.final_beliefs();
    let share = 1.0 / run.equivalence_class.len() as f64;
    let max_outside_belief = (0..inst.m())
        .filter(|q| !run.equivalence_class.contains(q))
        .map(|q| fin[q])
        .fold(0.0, f64::max);
    let max_inside_deviation = run
        .equivalence_class
        .iter()
        .map(|&q| (fin[q] - share).abs())
        .fold(0.0, f64::max);
    let convergence = ConvergenceSummary {
        true_theta: 0,
        equivalence_class: run.equivalence_class.clone(),
        horizon: spec.horizon,
        final_beliefs: fin,
        max_outside_belief,
        max_inside_deviation,
    };
    Ok(ExperimentOutput {
        rows: Vec::new(),
        summary: Summary {
            spec,
            groups: Vec::new(),
            gamma_trend: None,
            convergence: Some(convergence),
            all_certificates_pass: true,
        },
        trajectory: Some((inst, run)),
    })
}
