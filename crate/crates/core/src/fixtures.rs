//! Small hand-built instances shared by tests, docs and the CLI.

use crate::model::{HypothesisSet, Instance, PartitionModel, PenaltyMatrix, SourceModel, Sources};

/// Three hypotheses with equal off-diagonal penalties and two unit-cost
/// partition sources, where neither source alone changes the worst penalty
/// of hypothesis 0 but both together isolate it.
pub fn equal_penalty() -> Instance {
    Instance::new(
        HypothesisSet::numbered(3),
        PenaltyMatrix::from_rows(vec![
            vec![0.0, 0.5, 0.5],
            vec![0.5, 0.0, 0.5],
            vec![0.5, 0.5, 0.0],
        ])
        .expect("square"),
        Sources::Partition(vec![
            PartitionModel::new(1.0, vec![vec![0, 1], vec![2]]),
            PartitionModel::new(1.0, vec![vec![0, 2], vec![1]]),
        ]),
    )
}

/// Three hypotheses with distinct penalties in every row and the same two
/// partition sources as [`equal_penalty`], with the given costs.
pub fn unique_penalty(cost0: f64, cost1: f64) -> Instance {
    Instance::new(
        HypothesisSet::numbered(3),
        PenaltyMatrix::from_rows(vec![
            vec![0.0, 0.4, 0.6],
            vec![0.3, 0.0, 0.7],
            vec![0.45, 0.55, 0.0],
        ])
        .expect("square"),
        Sources::Partition(vec![
            PartitionModel::new(cost0, vec![vec![0, 1], vec![2]]),
            PartitionModel::new(cost1, vec![vec![0, 2], vec![1]]),
        ]),
    )
}

/// Two hypotheses observed through `copies` identical coin-flip sources with
/// heads probability 0.8 under hypothesis 0 and 0.3 under hypothesis 1.
/// Observation 0 is heads.
pub fn bernoulli(copies: usize) -> Instance {
    Instance::new(
        HypothesisSet::numbered(2),
        PenaltyMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).expect("square"),
        Sources::Likelihood(
            (0..copies)
                .map(|_| SourceModel::new(1.0, vec![vec![0.8, 0.3], vec![0.2, 0.7]]))
                .collect(),
        ),
    )
}
