//! Hypotheses, penalty matrices, information sources and their observation
//! models.
//!
//! An [`Instance`] is built once and never mutated afterwards. Construction
//! does not validate; call [`validate`] (or [`Instance::ensure_valid`]) before
//! handing an instance to the solvers.

use std::collections::HashSet;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::bitset::{BitSet, SourceSet};
use crate::equiv::EquivTable;
use crate::error::{Error, Result};

/// Tolerance on row sums of penalty matrices and column sums of likelihood tables.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// Default KL threshold below which two hypotheses are treated as
/// observationally equivalent under a single source.
pub const DEFAULT_EQ_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisSet {
    labels: Vec<String>,
}

impl HypothesisSet {
    pub fn new(labels: Vec<String>) -> Self {
        HypothesisSet { labels }
    }

    /// Labels `h0, h1, ...`.
    pub fn numbered(m: usize) -> Self {
        HypothesisSet::new((0..m).map(|i| format!("h{i}")).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }
}

/// Square penalty matrix, row-major. Entry `(p, q)` is the penalty for
/// predicting hypothesis `q` when `p` is true.
#[derive(Clone, Debug, PartialEq)]
pub struct PenaltyMatrix {
    m: usize,
    data: Vec<f64>,
}

impl PenaltyMatrix {
    /// Fails only on ragged or non-square input; value checks belong to [`validate`].
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
            return Err(Error::InvalidInstance(format!(
                "penalty row {i} has {} entries, expected {m}",
                r.len()
            )));
        }
        Ok(PenaltyMatrix {
            m,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.data[p * self.m + q]
    }

    pub fn row(&self, p: usize) -> &[f64] {
        &self.data[p * self.m..(p + 1) * self.m]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.m).map(|p| self.row(p).to_vec()).collect()
    }

    /// True iff every row has pairwise distinct entries, diagonal included.
    pub fn unique_rows(&self) -> bool {
        (0..self.m).all(|p| {
            let row = self.row(p);
            (0..self.m).all(|i| (i + 1..self.m).all(|j| row[i] != row[j]))
        })
    }

    /// Rescales each row to sum to one. Rows summing to zero are left alone.
    pub fn renormalized(&self) -> Self {
        let mut out = self.clone();
        for p in 0..self.m {
            let s: f64 = self.row(p).iter().sum();
            if s > 0.0 {
                for q in 0..self.m {
                    out.data[p * self.m + q] /= s;
                }
            }
        }
        out
    }
}

/// A source with a finite observation alphabet and known likelihoods.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceModel {
    pub cost: f64,
    /// `likelihood[o][theta]`
    pub likelihood: Vec<Vec<f64>>,
}

impl SourceModel {
    pub fn new(cost: f64, likelihood: Vec<Vec<f64>>) -> Self {
        SourceModel { cost, likelihood }
    }

    pub fn observation_count(&self) -> usize {
        self.likelihood.len()
    }

    #[inline]
    pub fn likelihood(&self, observation: usize, theta: usize) -> f64 {
        self.likelihood[observation][theta]
    }

    /// The distribution over observations when `theta` is true.
    pub fn column(&self, theta: usize) -> Vec<f64> {
        self.likelihood.iter().map(|row| row[theta]).collect()
    }
}

/// A source described only by which hypotheses it cannot tell apart.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionModel {
    pub cost: f64,
    pub blocks: Vec<Vec<usize>>,
}

impl PartitionModel {
    pub fn new(cost: f64, blocks: Vec<Vec<usize>>) -> Self {
        PartitionModel { cost, blocks }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backing {
    Likelihood,
    Partition,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Sources {
    Likelihood(Vec<SourceModel>),
    Partition(Vec<PartitionModel>),
}

impl Sources {
    pub fn len(&self) -> usize {
        match self {
            Sources::Likelihood(v) => v.len(),
            Sources::Partition(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn backing(&self) -> Backing {
        match self {
            Sources::Likelihood(_) => Backing::Likelihood,
            Sources::Partition(_) => Backing::Partition,
        }
    }

    pub fn cost(&self, i: usize) -> f64 {
        match self {
            Sources::Likelihood(v) => v[i].cost,
            Sources::Partition(v) => v[i].cost,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Instance {
    hypotheses: HypothesisSet,
    penalties: PenaltyMatrix,
    sources: Sources,
    eq_tolerance: f64,
    equiv: OnceLock<EquivTable>,
}

impl Instance {
    pub fn new(hypotheses: HypothesisSet, penalties: PenaltyMatrix, sources: Sources) -> Self {
        Instance {
            hypotheses,
            penalties,
            sources,
            eq_tolerance: DEFAULT_EQ_TOLERANCE,
            equiv: OnceLock::new(),
        }
    }

    /// Constructs and validates in one step.
    pub fn try_new(
        hypotheses: HypothesisSet,
        penalties: PenaltyMatrix,
        sources: Sources,
    ) -> Result<Self> {
        let inst = Instance::new(hypotheses, penalties, sources);
        inst.ensure_valid()?;
        Ok(inst)
    }

    /// Replaces the equivalence tolerance used for likelihood-backed sources.
    pub fn with_eq_tolerance(mut self, tolerance: f64) -> Self {
        self.eq_tolerance = tolerance;
        self.equiv = OnceLock::new();
        self
    }

    pub fn eq_tolerance(&self) -> f64 {
        self.eq_tolerance
    }

    pub fn hypotheses(&self) -> &HypothesisSet {
        &self.hypotheses
    }

    pub fn penalties(&self) -> &PenaltyMatrix {
        &self.penalties
    }

    pub fn sources(&self) -> &Sources {
        &self.sources
    }

    /// Number of hypotheses `m`.
    pub fn m(&self) -> usize {
        self.hypotheses.len()
    }

    /// Number of sources `n`.
    pub fn n(&self) -> usize {
        self.sources.len()
    }

    pub fn backing(&self) -> Backing {
        self.sources.backing()
    }

    pub fn costs(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.sources.cost(i)).collect()
    }

    pub fn likelihood_sources(&self) -> Result<&[SourceModel]> {
        match &self.sources {
            Sources::Likelihood(v) => Ok(v),
            Sources::Partition(_) => Err(Error::WrongBacking),
        }
    }

    /// Per-(source, hypothesis) equivalence classes, computed on first use.
    pub fn equiv_table(&self) -> &EquivTable {
        self.equiv.get_or_init(|| EquivTable::build(self))
    }

    /// Builds a source set, checking every index.
    pub fn source_set(&self, indices: &[usize]) -> Result<SourceSet> {
        let n = self.n();
        if let Some(&index) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::SourceOutOfRange { index, n });
        }
        Ok(BitSet::from_indices(n, indices.iter().copied()))
    }

    pub fn all_sources(&self) -> SourceSet {
        BitSet::full(self.n())
    }

    pub fn no_sources(&self) -> SourceSet {
        BitSet::empty(self.n())
    }

    pub fn check_hypothesis(&self, theta: usize) -> Result<()> {
        if theta >= self.m() {
            return Err(Error::HypothesisOutOfRange {
                index: theta,
                m: self.m(),
            });
        }
        Ok(())
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = validate(self);
        if v.is_empty() {
            Ok(())
        } else {
            let msgs: Vec<_> = v.iter().map(|v| v.message.as_str()).collect();
            Err(Error::InvalidInstance(msgs.join("; ")))
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(s)?;
        file.into_instance(false)
    }

    pub fn from_path(path: impl AsRef<Path>, renormalize: bool) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: InstanceFile = serde_json::from_str(&text)?;
        file.into_instance(renormalize)
    }

    pub fn to_file(&self) -> InstanceFile {
        let sources = match &self.sources {
            Sources::Likelihood(v) => v
                .iter()
                .map(|s| SourceFile {
                    cost: s.cost,
                    likelihood: Some(s.likelihood.clone()),
                    partition: None,
                })
                .collect(),
            Sources::Partition(v) => v
                .iter()
                .map(|s| SourceFile {
                    cost: s.cost,
                    likelihood: None,
                    partition: Some(s.blocks.clone()),
                })
                .collect(),
        };
        InstanceFile {
            hypotheses: self.hypotheses.labels.clone(),
            penalties: self.penalties.rows(),
            sources,
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("instance serializes")
    }
}

/// On-disk instance document.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub hypotheses: Vec<String>,
    pub penalties: Vec<Vec<f64>>,
    pub sources: Vec<SourceFile>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceFile {
    pub cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub likelihood: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Vec<Vec<usize>>>,
}

impl InstanceFile {
    /// Converts the document into an instance. Rows of the penalty matrix are
    /// rescaled only when `renormalize` is set.
    pub fn into_instance(self, renormalize: bool) -> Result<Instance> {
        let mut penalties = PenaltyMatrix::from_rows(self.penalties)?;
        if renormalize {
            penalties = penalties.renormalized();
        }
        let mut likelihood = Vec::new();
        let mut partition = Vec::new();
        for (i, s) in self.sources.into_iter().enumerate() {
            match (s.likelihood, s.partition) {
                (Some(l), None) => likelihood.push(SourceModel::new(s.cost, l)),
                (None, Some(p)) => partition.push(PartitionModel::new(s.cost, p)),
                _ => {
                    return Err(Error::InvalidInstance(format!(
                        "source {i} must have exactly one of `likelihood` or `partition`"
                    )))
                }
            }
        }
        let sources = match (likelihood.is_empty(), partition.is_empty()) {
            (false, true) => Sources::Likelihood(likelihood),
            (true, false) => Sources::Partition(partition),
            (true, true) => Sources::Partition(Vec::new()),
            (false, false) => {
                return Err(Error::InvalidInstance(
                    "sources mix likelihood and partition backings".into(),
                ))
            }
        };
        Ok(Instance::new(
            HypothesisSet::new(self.hypotheses),
            penalties,
            sources,
        ))
    }
}

/// One broken invariant found by [`validate`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub code: &'static str,
    pub message: String,
}

impl Violation {
    fn new(code: &'static str, message: String) -> Self {
        Violation { code, message }
    }
}

/// Lists every broken invariant of `instance`; empty means valid.
pub fn validate(instance: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();
    let m = instance.m();

    if m == 0 {
        out.push(Violation::new(
            "no_hypotheses",
            "instance has no hypotheses".into(),
        ));
    }
    let mut seen = HashSet::new();
    for l in instance.hypotheses.labels() {
        if !seen.insert(l.as_str()) {
            out.push(Violation::new(
                "duplicate_label",
                format!("duplicate hypothesis label `{l}`"),
            ));
        }
    }

    let xi = &instance.penalties;
    if xi.dim() != m {
        out.push(Violation::new(
            "dimension_mismatch",
            format!(
                "penalty matrix is {0}x{0} but there are {m} hypotheses",
                xi.dim()
            ),
        ));
    } else {
        for p in 0..m {
            let row = xi.row(p);
            if row[p] != 0.0 {
                out.push(Violation::new(
                    "nonzero_diagonal",
                    format!("nonzero diagonal in penalty row {p}: {}", row[p]),
                ));
            }
            if let Some((q, v)) = row
                .iter()
                .enumerate()
                .find(|(_, v)| !v.is_finite() || **v < 0.0 || **v > 1.0)
            {
                out.push(Violation::new(
                    "penalty_range",
                    format!("penalty ({p},{q}) = {v} is outside [0,1]"),
                ));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                out.push(Violation::new(
                    "row_not_stochastic",
                    format!("penalty row {p} sums to {s}, expected 1"),
                ));
            }
        }
    }

    if instance.n() == 0 {
        out.push(Violation::new(
            "no_sources",
            "instance has no sources".into(),
        ));
    }
    for i in 0..instance.n() {
        let c = instance.sources.cost(i);
        if !c.is_finite() || c < 0.0 {
            out.push(Violation::new(
                "bad_cost",
                format!("source {i} has cost {c}, expected a finite nonnegative value"),
            ));
        }
    }

    match &instance.sources {
        Sources::Likelihood(srcs) => validate_likelihoods(instance, srcs, &mut out),
        Sources::Partition(srcs) => validate_partitions(m, srcs, &mut out),
    }
    out
}

fn validate_likelihoods(instance: &Instance, srcs: &[SourceModel], out: &mut Vec<Violation>) {
    let m = instance.m();
    let mut shapes_ok = true;
    for (i, s) in srcs.iter().enumerate() {
        if s.likelihood.is_empty() {
            out.push(Violation::new(
                "empty_observation_space",
                format!("source {i} has no observations"),
            ));
            shapes_ok = false;
            continue;
        }
        if s.likelihood.iter().any(|row| row.len() != m) {
            out.push(Violation::new(
                "dimension_mismatch",
                format!("source {i} likelihood rows must have {m} entries"),
            ));
            shapes_ok = false;
            continue;
        }
        'zero: for (o, row) in s.likelihood.iter().enumerate() {
            for (theta, &v) in row.iter().enumerate() {
                if !(v > 0.0 && v.is_finite()) {
                    out.push(Violation::new(
                        "zero_likelihood",
                        format!(
                            "zero likelihood at source {i}, observation {o}, hypothesis {theta} ({v})"
                        ),
                    ));
                    shapes_ok = false;
                    break 'zero;
                }
            }
        }
        for theta in 0..m {
            let col: f64 = s.likelihood.iter().map(|r| r[theta]).sum();
            if (col - 1.0).abs() > STOCHASTIC_TOL {
                out.push(Violation::new(
                    "likelihood_not_normalized",
                    format!("source {i}, hypothesis {theta}: likelihoods sum to {col}"),
                ));
            }
        }
    }
    if !shapes_ok {
        return;
    }
    // A pair that is neither identical nor clearly separated would make the
    // equivalence threshold decide membership by rounding noise.
    let tau = instance.eq_tolerance;
    for (i, s) in srcs.iter().enumerate() {
        for p in 0..m {
            for q in 0..m {
                if p == q {
                    continue;
                }
                let d = kl_columns(s, p, q);
                if d > 0.0 && d < 10.0 * tau {
                    out.push(Violation::new(
                        "ambiguous_equivalence",
                        format!(
                            "source {i}: KL between hypotheses {p} and {q} is {d:e}, below 10x the equivalence tolerance {tau:e}"
                        ),
                    ));
                }
            }
        }
    }
}

fn validate_partitions(m: usize, srcs: &[PartitionModel], out: &mut Vec<Violation>) {
    for (i, s) in srcs.iter().enumerate() {
        let mut hit = vec![0usize; m];
        let mut bad_index = false;
        for block in &s.blocks {
            if block.is_empty() {
                out.push(Violation::new(
                    "empty_block",
                    format!("source {i} partition contains an empty block"),
                ));
            }
            for &h in block {
                if h >= m {
                    bad_index = true;
                } else {
                    hit[h] += 1;
                }
            }
        }
        if bad_index {
            out.push(Violation::new(
                "partition_index",
                format!("source {i} partition references a hypothesis outside 0..{m}"),
            ));
        }
        if hit.iter().any(|&c| c > 1) {
            out.push(Violation::new(
                "partition_overlap",
                format!("source {i} partition blocks are not disjoint"),
            ));
        }
        if hit.contains(&0) {
            out.push(Violation::new(
                "partition_not_cover",
                format!("source {i} partition does not cover every hypothesis"),
            ));
        }
    }
}

/// Total selection cost of `subset`.
pub fn cost_of(instance: &Instance, subset: &[usize]) -> Result<f64> {
    let n = instance.n();
    subset.iter().try_fold(0.0, |acc, &i| {
        if i >= n {
            Err(Error::SourceOutOfRange { index: i, n })
        } else {
            Ok(acc + instance.sources.cost(i))
        }
    })
}

pub(crate) fn set_cost(instance: &Instance, subset: &SourceSet) -> f64 {
    subset
        .iter()
        .map(|i| instance.sources.cost(i))
        .fold(0.0, |a, c| a + c)
}

fn kl_columns(s: &SourceModel, p: usize, q: usize) -> f64 {
    s.likelihood
        .iter()
        .map(|row| row[p] * (row[p] / row[q]).ln())
        .sum::<f64>()
        .max(0.0)
}

/// KL divergence `D(l_i(.|p) || l_i(.|q))` of one source, in nats.
pub fn kl_source(instance: &Instance, source: usize, p: usize, q: usize) -> Result<f64> {
    let srcs = instance.likelihood_sources()?;
    let s = srcs.get(source).ok_or(Error::SourceOutOfRange {
        index: source,
        n: srcs.len(),
    })?;
    instance.check_hypothesis(p)?;
    instance.check_hypothesis(q)?;
    Ok(kl_columns(s, p, q))
}

/// KL divergence of the joint observation model of `subset`. Sources are
/// independent given the hypothesis, so this is the sum of per-source terms.
pub fn kl_set(instance: &Instance, subset: &SourceSet, p: usize, q: usize) -> Result<f64> {
    subset
        .iter()
        .try_fold(0.0, |acc, i| Ok(acc + kl_source(instance, i, p, q)?))
}

/// Largest absolute log-likelihood ratio of any single source, observation and
/// ordered pair of hypotheses.
pub fn log_ratio_bound(instance: &Instance) -> Result<f64> {
    let srcs = instance.likelihood_sources()?;
    let m = instance.m();
    let mut best = 0.0f64;
    for s in srcs {
        for row in &s.likelihood {
            for p in 0..m {
                for q in 0..m {
                    best = best.max((row[p] / row[q]).ln().abs());
                }
            }
        }
    }
    Ok(best)
}

/// Largest absolute log-likelihood ratio of a joint observation of `subset`.
///
/// Equals [`log_ratio_bound`] restricted to `subset` when it has one member;
/// for larger sets the per-step increments of a belief update sum over
/// sources, so the bound sums too.
pub fn joint_log_ratio_bound(instance: &Instance, subset: &SourceSet) -> Result<f64> {
    let srcs = instance.likelihood_sources()?;
    let m = instance.m();
    let mut best = 0.0f64;
    for p in 0..m {
        for q in 0..m {
            let total: f64 = subset
                .iter()
                .map(|i| {
                    srcs[i]
                        .likelihood
                        .iter()
                        .map(|row| (row[p] / row[q]).ln())
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .sum();
            best = best.max(total);
        }
    }
    Ok(best)
}
