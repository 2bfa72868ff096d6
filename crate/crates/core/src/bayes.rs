//! Bayesian belief updates over the hypothesis set, observation sampling and
//! finite-sample convergence checks.
//!
//! Beliefs are kept as log-probabilities and renormalized after each update
//! by subtracting the log-sum-exp, so long runs do not underflow.
//!
//! Randomness comes from ChaCha8. A run seeded with `seed` uses
//! `ChaCha8Rng::seed_from_u64(seed)`; batch runners derive per-run seeds with
//! [`derive_seed`], which reads the first word of stream `index` of the
//! generator seeded by the master seed. Results therefore depend only on
//! `(master_seed, index)`, never on scheduling.

use std::io::Write;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bitset::SourceSet;
use crate::equiv::equiv_set;
use crate::error::{Error, Result};
use crate::model::{joint_log_ratio_bound, kl_set, Instance};

/// Tolerance on the total belief mass.
pub const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct BeliefState {
    log_belief: Vec<f64>,
    t: usize,
    subset: Vec<usize>,
}

impl BeliefState {
    /// Uniform prior over `m` hypotheses for observations from `subset`.
    pub fn uniform(m: usize, subset: &SourceSet) -> Self {
        BeliefState {
            log_belief: vec![-(m as f64).ln(); m],
            t: 0,
            subset: subset.to_vec(),
        }
    }

    pub fn log_beliefs(&self) -> &[f64] {
        &self.log_belief
    }

    pub fn beliefs(&self) -> Vec<f64> {
        self.log_belief.iter().map(|l| l.exp()).collect()
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// Sources whose observations feed this belief, ascending.
    pub fn subset(&self) -> &[usize] {
        &self.subset
    }
}

fn log_normalize(v: &mut [f64]) {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    for x in v.iter_mut() {
        *x -= lse;
    }
}

fn joint_log_likelihood(
    instance: &Instance,
    subset: &[usize],
    observation: &[usize],
    theta: usize,
) -> Result<f64> {
    let srcs = instance.likelihood_sources()?;
    if observation.len() != subset.len() {
        return Err(Error::InvalidArgument(format!(
            "observation has {} coordinates, subset has {} sources",
            observation.len(),
            subset.len()
        )));
    }
    subset
        .iter()
        .zip(observation)
        .try_fold(0.0, |acc, (&s, &o)| {
            let src = &srcs[s];
            if o >= src.observation_count() {
                return Err(Error::ObservationOutOfRange {
                    source_index: s,
                    observation: o,
                });
            }
            Ok(acc + src.likelihood(o, theta).ln())
        })
}

/// One step of Bayes' rule. `observation[k]` is the symbol emitted by the
/// `k`-th source of `state.subset()`.
pub fn bayes_update(
    state: &BeliefState,
    instance: &Instance,
    observation: &[usize],
) -> Result<BeliefState> {
    let mut next = state.log_belief.clone();
    for (theta, lb) in next.iter_mut().enumerate() {
        *lb += joint_log_likelihood(instance, &state.subset, observation, theta)?;
    }
    log_normalize(&mut next);
    Ok(BeliefState {
        log_belief: next,
        t: state.t + 1,
        subset: state.subset.clone(),
    })
}

/// Log posterior after a whole observation sequence, evaluated in one pass
/// from the uniform prior.
pub fn batch_log_posterior(
    instance: &Instance,
    subset: &SourceSet,
    observations: &[Vec<usize>],
) -> Result<Vec<f64>> {
    let m = instance.m();
    let idx = subset.to_vec();
    let mut out = vec![-(m as f64).ln(); m];
    for (theta, lb) in out.iter_mut().enumerate() {
        for o in observations {
            *lb += joint_log_likelihood(instance, &idx, o, theta)?;
        }
    }
    log_normalize(&mut out);
    Ok(out)
}

/// Pre-built categorical samplers for the sources of `subset` under one true
/// hypothesis.
pub struct ObservationSampler {
    dists: Vec<WeightedIndex<f64>>,
}

impl ObservationSampler {
    pub fn new(instance: &Instance, subset: &SourceSet, theta: usize) -> Result<Self> {
        let srcs = instance.likelihood_sources()?;
        instance.check_hypothesis(theta)?;
        let dists = subset
            .iter()
            .map(|s| {
                WeightedIndex::new(srcs[s].column(theta)).map_err(|e| {
                    Error::InvalidInstance(format!("source {s}, hypothesis {theta}: {e}"))
                })
            })
            .collect::<Result<_>>()?;
        Ok(ObservationSampler { dists })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        self.dists.iter().map(|d| d.sample(rng)).collect()
    }
}

/// Draws one joint observation of `subset` with `theta` true; coordinates are
/// independent draws from each source's likelihood column.
pub fn sample_observation<R: Rng + ?Sized>(
    instance: &Instance,
    subset: &SourceSet,
    theta: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    Ok(ObservationSampler::new(instance, subset, theta)?.sample(rng))
}

/// Seed for run `index` of a batch started from `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

fn hoeffding_samples(delta: f64, epsilon: f64, l: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in (0,1], got {delta}"
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if !(l > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "L must be positive, got {l}"
        )));
    }
    Ok(2.0 * l * l / (epsilon * epsilon) * (2.0 / delta).ln())
}

fn ceil_count(x: f64) -> u64 {
    // guard against representation error pushing an exact integer up by one
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

/// Samples after which the empirical per-step log-likelihood ratio is within
/// `epsilon` of its mean with probability at least `1 - delta`.
pub fn sample_complexity_n(delta: f64, epsilon: f64, l: f64) -> Result<u64> {
    Ok(ceil_count(hoeffding_samples(delta, epsilon, l)?))
}

/// Samples after which, with probability at least `1 - delta`, every
/// belief outside the true equivalence class is below `mu_th`.
/// `k_gap` is the smallest `|K(p, q) - epsilon|` over hypothesis pairs.
pub fn sample_complexity_threshold(
    delta: f64,
    epsilon: f64,
    l: f64,
    mu_th: f64,
    k_gap: f64,
) -> Result<u64> {
    let first = hoeffding_samples(delta, epsilon, l)?;
    if !(mu_th > 0.0 && mu_th < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "mu_th must lie in (0,1), got {mu_th}"
        )));
    }
    if k_gap == 0.0 {
        return Err(Error::InvalidArgument(
            "some KL divergence equals epsilon exactly; perturb epsilon".into(),
        ));
    }
    if !(k_gap > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "KL gap must be positive, got {k_gap}"
        )));
    }
    let second = (1.0 / mu_th).ln() / k_gap;
    Ok(ceil_count(first.max(second)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleComplexity {
    pub n: u64,
    pub n_tilde: u64,
    pub delta: f64,
    pub epsilon: f64,
    pub l: f64,
    pub mu_th: f64,
    pub k_gap: f64,
}

impl SampleComplexity {
    pub fn compute(delta: f64, epsilon: f64, l: f64, mu_th: f64, k_gap: f64) -> Result<Self> {
        Ok(SampleComplexity {
            n: sample_complexity_n(delta, epsilon, l)?,
            n_tilde: sample_complexity_threshold(delta, epsilon, l, mu_th, k_gap)?,
            delta,
            epsilon,
            l,
            mu_th,
            k_gap,
        })
    }

    /// Uses the instance's joint log-ratio bound and the KL gap of `subset`.
    pub fn for_subset(
        instance: &Instance,
        subset: &SourceSet,
        delta: f64,
        epsilon: f64,
        mu_th: f64,
    ) -> Result<Self> {
        let l = joint_log_ratio_bound(instance, subset)?;
        let gap = kl_gap(instance, subset, epsilon)?;
        Self::compute(delta, epsilon, l, mu_th, gap)
    }
}

/// Smallest positive KL divergence `K(p, q)` over ordered pairs, or `None`
/// when `subset` cannot distinguish any pair.
pub fn min_distinguishable_kl(instance: &Instance, subset: &SourceSet) -> Result<Option<f64>> {
    let m = instance.m();
    let mut best: Option<f64> = None;
    for p in 0..m {
        let class = equiv_set(instance, subset, p)?;
        for q in (0..m).filter(|&q| !class.contains(q)) {
            let k = kl_set(instance, subset, p, q)?;
            best = Some(best.map_or(k, |b| b.min(k)));
        }
    }
    Ok(best)
}

/// `min_{p, q} |K(p, q) - epsilon|` over all ordered pairs.
pub fn kl_gap(instance: &Instance, subset: &SourceSet, epsilon: f64) -> Result<f64> {
    let m = instance.m();
    let mut best = f64::INFINITY;
    for p in 0..m {
        for q in 0..m {
            best = best.min((kl_set(instance, subset, p, q)? - epsilon).abs());
        }
    }
    Ok(best)
}

/// Limit beliefs: uniform over `F_theta(subset)`, zero elsewhere.
pub fn asymptotic_belief(
    instance: &Instance,
    subset: &SourceSet,
    theta: usize,
) -> Result<Vec<f64>> {
    let class = equiv_set(instance, subset, theta)?;
    let share = 1.0 / class.len() as f64;
    Ok((0..instance.m())
        .map(|q| if class.contains(q) { share } else { 0.0 })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepCheck {
    pub t: usize,
    /// Largest `|mu_t(q) - mu_t(p)|` over `q` in the true class.
    pub max_gap_in_class: f64,
    /// Hypotheses outside the class with `mu_t(q) > exp(-t |K(p,q) - epsilon|)`.
    pub bound_violations: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulationRun {
    pub true_theta: usize,
    pub subset: Vec<usize>,
    pub seed: u64,
    pub epsilon: f64,
    /// `F_p(I)` of the true hypothesis.
    pub equivalence_class: Vec<usize>,
    /// `K(p, q)` for every `q`.
    pub kl: Vec<f64>,
    /// Bound on the per-step joint log-likelihood ratio.
    pub log_ratio_bound: f64,
    /// Hypotheses outside the class with `epsilon >= K(p, q)`, where the
    /// exponent `|K - epsilon|` no longer describes decay.
    pub epsilon_not_below_kl: Vec<usize>,
    pub steps: Vec<StepCheck>,
    #[serde(skip)]
    pub log_trajectory: Vec<Vec<f64>>,
}

impl SimulationRun {
    pub fn horizon(&self) -> usize {
        self.log_trajectory.len() - 1
    }

    pub fn beliefs_at(&self, t: usize) -> Vec<f64> {
        self.log_trajectory[t].iter().map(|l| l.exp()).collect()
    }

    pub fn final_beliefs(&self) -> Vec<f64> {
        self.beliefs_at(self.horizon())
    }

    /// Sample-mean estimate of `K(p, q)` after `t >= 1` steps. Under the
    /// uniform prior it equals the log belief ratio divided by `t`.
    pub fn empirical_kl(&self, q: usize, t: usize) -> f64 {
        let lb = &self.log_trajectory[t];
        (lb[self.true_theta] - lb[q]) / t as f64
    }

    /// Writes `t,hypothesis,belief` rows.
    pub fn write_csv<W: Write>(&self, instance: &Instance, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "hypothesis", "belief"])?;
        for (t, lb) in self.log_trajectory.iter().enumerate() {
            for (q, l) in lb.iter().enumerate() {
                w.write_record([
                    t.to_string(),
                    instance.hypotheses().label(q).to_string(),
                    l.exp().to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs `horizon` Bayes updates from the uniform prior with `theta` true.
///
/// `epsilon` defaults to half the smallest positive KL divergence of
/// `subset`. Each step records the spread of beliefs inside the true class
/// and which outside hypotheses exceed `exp(-t |K - epsilon|)`.
pub fn simulate_run(
    instance: &Instance,
    subset: &SourceSet,
    theta: usize,
    horizon: usize,
    seed: u64,
    epsilon: Option<f64>,
) -> Result<SimulationRun> {
    instance.likelihood_sources()?;
    instance.check_hypothesis(theta)?;
    let m = instance.m();
    let class = equiv_set(instance, subset, theta)?;
    let kl = (0..m)
        .map(|q| kl_set(instance, subset, theta, q))
        .collect::<Result<Vec<_>>>()?;
    let epsilon = match epsilon {
        Some(e) => e,
        None => min_distinguishable_kl(instance, subset)?.map_or(0.0, |k| k / 2.0),
    };
    let l = joint_log_ratio_bound(instance, subset)?;
    let outside: Vec<usize> = (0..m).filter(|&q| !class.contains(q)).collect();
    let epsilon_not_below_kl = outside
        .iter()
        .copied()
        .filter(|&q| epsilon >= kl[q])
        .collect();

    let sampler = ObservationSampler::new(instance, subset, theta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = BeliefState::uniform(m, subset);
    let mut log_trajectory = Vec::with_capacity(horizon + 1);
    let mut steps = Vec::with_capacity(horizon + 1);

    let check = |state: &BeliefState| {
        let t = state.t();
        let b = state.beliefs();
        let max_gap_in_class = class
            .members
            .iter()
            .map(|q| (b[q] - b[theta]).abs())
            .fold(0.0, f64::max);
        let bound_violations = outside
            .iter()
            .copied()
            .filter(|&q| b[q] > (-(t as f64) * (kl[q] - epsilon).abs()).exp())
            .collect();
        StepCheck {
            t,
            max_gap_in_class,
            bound_violations,
        }
    };

    steps.push(check(&state));
    log_trajectory.push(state.log_beliefs().to_vec());
    for _ in 0..horizon {
        let obs = sampler.sample(&mut rng);
        let next = bayes_update(&state, instance, &obs)?;
        if cfg!(debug_assertions) {
            // per-step log-likelihood ratios never exceed the joint bound
            let step: Vec<f64> = (0..m)
                .map(|q| next.log_belief[q] - state.log_belief[q])
                .collect();
            for a in &step {
                for b in &step {
                    debug_assert!(
                        (a - b).abs() <= l + 1e-9,
                        "log ratio {} > {l}",
                        (a - b).abs()
                    );
                }
            }
        }
        state = next;
        debug_assert!((state.beliefs().iter().sum::<f64>() - 1.0).abs() <= NORMALIZATION_TOL);
        steps.push(check(&state));
        log_trajectory.push(state.log_beliefs().to_vec());
    }

    Ok(SimulationRun {
        true_theta: theta,
        subset: subset.to_vec(),
        seed,
        epsilon,
        equivalence_class: class.to_vec(),
        kl,
        log_ratio_bound: l,
        epsilon_not_below_kl,
        steps,
        log_trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{HypothesisSet, PenaltyMatrix, SourceModel, Sources};
    use approx::assert_abs_diff_eq;

    #[test]
    fn one_step_bernoulli_posterior() {
        let inst = fixtures::bernoulli(1);
        let s = BeliefState::uniform(2, &inst.all_sources());
        let next = bayes_update(&s, &inst, &[0]).unwrap();
        assert_abs_diff_eq!(next.beliefs()[0], 8.0 / 11.0, epsilon = 1e-12);
        assert_eq!(next.t(), 1);
    }

    #[test]
    fn flat_model_keeps_prior() {
        let inst = Instance::new(
            HypothesisSet::numbered(3),
            fixtures::equal_penalty().penalties().clone(),
            Sources::Likelihood(vec![SourceModel::new(
                1.0,
                vec![vec![0.25; 3], vec![0.75; 3]],
            )]),
        );
        let mut s = BeliefState::uniform(3, &inst.all_sources());
        for o in [0, 1, 1, 0, 1] {
            s = bayes_update(&s, &inst, &[o]).unwrap();
            for b in s.beliefs() {
                assert_abs_diff_eq!(b, 1.0 / 3.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn single_hypothesis_belief_is_one() {
        let inst = Instance::new(
            HypothesisSet::numbered(1),
            PenaltyMatrix::from_rows(vec![vec![0.0]]).unwrap(),
            Sources::Likelihood(vec![SourceModel::new(1.0, vec![vec![0.4], vec![0.6]])]),
        );
        let s = bayes_update(&BeliefState::uniform(1, &inst.all_sources()), &inst, &[1]).unwrap();
        assert_eq!(s.beliefs(), vec![1.0]);
    }

    #[test]
    fn observation_out_of_range() {
        let inst = fixtures::bernoulli(1);
        let s = BeliefState::uniform(2, &inst.all_sources());
        assert!(matches!(
            bayes_update(&s, &inst, &[2]),
            Err(Error::ObservationOutOfRange { observation: 2, .. })
        ));
    }

    #[test]
    fn degenerate_source_always_emits_its_symbol() {
        let inst = Instance::new(
            HypothesisSet::numbered(2),
            PenaltyMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(),
            Sources::Likelihood(vec![SourceModel::new(1.0, vec![vec![1.0, 1.0]])]),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert_eq!(
                sample_observation(&inst, &inst.all_sources(), 1, &mut rng).unwrap(),
                vec![0]
            );
        }
    }

    #[test]
    fn bernoulli_frequency() {
        let inst = fixtures::bernoulli(1);
        let sampler = ObservationSampler::new(&inst, &inst.all_sources(), 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 100_000;
        let heads = (0..draws)
            .filter(|_| sampler.sample(&mut rng)[0] == 0)
            .count();
        assert!((heads as f64 / draws as f64 - 0.8).abs() < 0.01);
    }

    #[test]
    fn two_sources_are_independent() {
        let inst = fixtures::bernoulli(2);
        let sampler = ObservationSampler::new(&inst, &inst.all_sources(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let draws = 40_000usize;
        let mut counts = [[0usize; 2]; 2];
        for _ in 0..draws {
            let o = sampler.sample(&mut rng);
            counts[o[0]][o[1]] += 1;
        }
        // chi-square against the product of marginals 0.3/0.7
        let p = [0.3, 0.7];
        let chi2: f64 = (0..2)
            .flat_map(|a| (0..2).map(move |b| (a, b)))
            .map(|(a, b)| {
                let e = draws as f64 * p[a] * p[b];
                (counts[a][b] as f64 - e).powi(2) / e
            })
            .sum();
        // 3 degrees of freedom, 0.999 quantile
        assert!(chi2 < 16.27, "chi2 = {chi2}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let inst = fixtures::bernoulli(2);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20)
                .map(|_| sample_observation(&inst, &inst.all_sources(), 0, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
        assert!(sample_observation(
            &fixtures::equal_penalty(),
            &fixtures::equal_penalty().all_sources(),
            0,
            &mut ChaCha8Rng::seed_from_u64(0)
        )
        .is_err());
    }

    #[test]
    fn hoeffding_sample_counts() {
        assert_eq!(
            sample_complexity_n(2.0 / std::f64::consts::E, 1.0, 1.0).unwrap(),
            2
        );
        // 200 ln 40 = 737.776
        assert_eq!(sample_complexity_n(0.05, 0.1, 1.0).unwrap(), 738);
        let a = hoeffding_samples(0.05, 0.1, 1.0).unwrap();
        let b = hoeffding_samples(0.05, 0.1, 2.0).unwrap();
        assert_abs_diff_eq!(b / a, 4.0, epsilon = 1e-12);
        assert!(sample_complexity_n(0.0, 0.1, 1.0).is_err());
        assert!(sample_complexity_n(0.1, -1.0, 1.0).is_err());
        assert!(sample_complexity_n(0.1, 0.1, 0.0).is_err());
    }

    #[test]
    fn threshold_sample_counts() {
        assert_eq!(
            sample_complexity_threshold(0.05, 0.1, 1.0, 0.01, 0.4).unwrap(),
            738
        );
        let e = std::f64::consts::E;
        assert_eq!(
            sample_complexity_threshold(2.0 / e, 1.0, 1.0, (-10.0f64).exp(), 1.0).unwrap(),
            10
        );
        assert!(sample_complexity_threshold(0.05, 0.1, 1.0, 0.01, 0.0).is_err());
    }

    #[test]
    fn asymptotic_beliefs() {
        let inst = fixtures::equal_penalty();
        let one = inst.source_set(&[0]).unwrap();
        assert_eq!(
            asymptotic_belief(&inst, &one, 0).unwrap(),
            vec![0.5, 0.5, 0.0]
        );
        assert_eq!(
            asymptotic_belief(&inst, &inst.all_sources(), 0).unwrap(),
            vec![1.0, 0.0, 0.0]
        );
        let u = asymptotic_belief(&inst, &inst.no_sources(), 2).unwrap();
        for b in u {
            assert_abs_diff_eq!(b, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn derived_seeds_differ_per_index() {
        assert_eq!(derive_seed(1, 0), derive_seed(1, 0));
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }

    #[test]
    fn horizon_zero_is_prior() {
        let inst = fixtures::bernoulli(1);
        let run = simulate_run(&inst, &inst.all_sources(), 0, 0, 1, None).unwrap();
        assert_eq!(run.horizon(), 0);
        assert_eq!(run.final_beliefs(), vec![0.5, 0.5]);
    }
}
