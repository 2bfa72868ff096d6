//! Observationally equivalent sets: the hypotheses that a set of sources
//! cannot tell apart from a given anchor hypothesis.

use serde::Serialize;

use crate::bitset::{BitSet, SourceSet};
use crate::error::{Error, Result};
use crate::model::{Instance, Sources};

/// Hypotheses indistinguishable from `anchor`. Always contains the anchor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquivalenceSet {
    pub anchor: usize,
    pub members: BitSet,
}

impl EquivalenceSet {
    pub fn len(&self) -> usize {
        self.members.count()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, theta: usize) -> bool {
        self.members.contains(theta)
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.members.to_vec()
    }
}

impl Serialize for EquivalenceSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_vec().serialize(s)
    }
}

/// Single-source classes, indexed `[source][theta]`.
#[derive(Clone, Debug)]
pub struct EquivTable {
    m: usize,
    classes: Vec<Vec<BitSet>>,
}

impl EquivTable {
    pub(crate) fn build(instance: &Instance) -> Self {
        let m = instance.m();
        let classes = match instance.sources() {
            Sources::Partition(srcs) => srcs
                .iter()
                .map(|s| {
                    let mut per_theta = vec![BitSet::from_indices(m, 0..0); m];
                    for block in &s.blocks {
                        let set = BitSet::from_indices(m, block.iter().copied().filter(|&h| h < m));
                        for &h in block {
                            if h < m {
                                per_theta[h] = set.clone();
                            }
                        }
                    }
                    // hypotheses missing from every block stay alone
                    for (h, set) in per_theta.iter_mut().enumerate() {
                        if set.is_empty() {
                            set.insert(h);
                        }
                    }
                    per_theta
                })
                .collect(),
            Sources::Likelihood(srcs) => {
                let tau = instance.eq_tolerance();
                srcs.iter()
                    .map(|s| {
                        (0..m)
                            .map(|theta| {
                                let mut set = BitSet::empty(m);
                                for q in 0..m {
                                    let d: f64 = s
                                        .likelihood
                                        .iter()
                                        .map(|row| row[q] * (row[q] / row[theta]).ln())
                                        .sum();
                                    if q == theta || d <= tau {
                                        set.insert(q);
                                    }
                                }
                                set
                            })
                            .collect()
                    })
                    .collect()
            }
        };
        EquivTable { m, classes }
    }

    #[inline]
    pub fn class(&self, source: usize, theta: usize) -> &BitSet {
        &self.classes[source][theta]
    }

    /// Intersection of the single-source classes of `theta` over `subset`.
    pub fn members(&self, subset: &SourceSet, theta: usize) -> BitSet {
        let mut acc = BitSet::full(self.m);
        for i in subset.iter() {
            acc.intersect_with(&self.classes[i][theta]);
        }
        acc
    }
}

/// `F_theta({source})`.
pub fn equiv_single(instance: &Instance, source: usize, theta: usize) -> Result<EquivalenceSet> {
    if source >= instance.n() {
        return Err(Error::SourceOutOfRange {
            index: source,
            n: instance.n(),
        });
    }
    instance.check_hypothesis(theta)?;
    Ok(EquivalenceSet {
        anchor: theta,
        members: instance.equiv_table().class(source, theta).clone(),
    })
}

/// `F_theta(subset)`: the full hypothesis set for the empty subset,
/// otherwise the intersection of the single-source classes.
pub fn equiv_set(instance: &Instance, subset: &SourceSet, theta: usize) -> Result<EquivalenceSet> {
    instance.check_hypothesis(theta)?;
    if subset.universe() != instance.n() {
        return Err(Error::InvalidArgument(format!(
            "source set over {} sources, instance has {}",
            subset.universe(),
            instance.n()
        )));
    }
    Ok(EquivalenceSet {
        anchor: theta,
        members: instance.equiv_table().members(subset, theta),
    })
}
