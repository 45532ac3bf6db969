//! Cycle certification from affects relations alone.

use std::collections::BTreeSet;
use std::fmt;

use itertools::Itertools;
use thiserror::Error;

use crate::intervention::AffectsSet;

pub const DEFAULT_ORDER_CAP: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CertifyError {
    #[error("{nodes} nodes exceed the exhaustive order search cap of {cap}")]
    TooManyNodes { nodes: usize, cap: usize },
    #[error("constraint mentions unknown node `{0}`")]
    UnknownNode(String),
}

/// At least one directed path `from -> to` among the pairs must exist.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathConstraint {
    pub pairs: BTreeSet<(String, String)>,
}

impl PathConstraint {
    pub fn new<S: AsRef<str>>(pairs: impl IntoIterator<Item = (S, S)>) -> Self {
        let pairs = pairs
            .into_iter()
            .filter(|(a, b)| a.as_ref() != b.as_ref())
            .map(|(a, b)| (a.as_ref().to_string(), b.as_ref().to_string()))
            .collect();
        PathConstraint { pairs }
    }

    /// Whether some pair points forward in `order`.
    pub fn satisfied_by(&self, order: &[String]) -> bool {
        let pos = |n: &str| order.iter().position(|o| o == n);
        self.pairs.iter().any(|(a, b)| matches!((pos(a), pos(b)), (Some(i), Some(j)) if i < j))
    }
}

impl fmt::Display for PathConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.pairs.iter().map(|(a, b)| format!("{a}->{b}")).collect();
        f.write_str(&parts.join("|"))
    }
}

/// A higher-order relation `x -> Y | do(Z)` licensed by the first-order
/// relations `{x} u Z -> Y` holding and `Z -> Y` failing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivedRelation {
    pub source: String,
    pub target: Vec<String>,
    pub conditioning: Vec<String>,
    /// Key of the holding first-order premise.
    pub premise: String,
}

impl DerivedRelation {
    pub fn key(&self) -> String {
        format!("{}->{}|do({})", self.source, self.target.join(","), self.conditioning.join(","))
    }
}

pub fn derived_relations(a: &AffectsSet) -> Vec<DerivedRelation> {
    let mut out = Vec::new();
    for r in a.holding().filter(|r| r.conditioning.is_empty() && r.source.len() >= 2) {
        for x in &r.source {
            let z: Vec<String> = r.source.iter().filter(|s| *s != x).cloned().collect();
            if a.holds(&z, &r.target, &[]) == Some(false) {
                out.push(DerivedRelation {
                    source: x.clone(),
                    target: r.target.clone(),
                    conditioning: z,
                    premise: r.key(),
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rule {
    /// A holding first-order relation `S -> T` needs a path from `S` to `T`.
    FirstOrder { relation: String },
    /// A derived higher-order relation `x -> Y | do(Z)` needs a path from
    /// `x` to `Y`.
    HigherOrder { relation: String, premise: String },
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::FirstOrder { relation } => write!(f, "rule1 from={relation}"),
            Rule::HigherOrder { relation, premise } => write!(f, "rule2 from={relation} premise={premise}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivedConstraint {
    pub constraint: PathConstraint,
    pub rule: Rule,
}

/// Constraints from both rules. Exact duplicates keep their first rule, and
/// a disjunction is dropped when a strictly smaller one is already implied.
pub fn derive_path_constraints(a: &AffectsSet) -> Vec<DerivedConstraint> {
    let mut all: Vec<DerivedConstraint> = Vec::new();
    for r in a.holding().filter(|r| r.conditioning.is_empty()) {
        let pairs = r.source.iter().cartesian_product(&r.target).map(|(s, t)| (s.as_str(), t.as_str()));
        all.push(DerivedConstraint {
            constraint: PathConstraint::new(pairs),
            rule: Rule::FirstOrder { relation: r.key() },
        });
    }
    for d in derived_relations(a) {
        let pairs = d.target.iter().map(|t| (d.source.as_str(), t.as_str()));
        all.push(DerivedConstraint {
            constraint: PathConstraint::new(pairs),
            rule: Rule::HigherOrder { relation: d.key(), premise: d.premise.clone() },
        });
    }
    let mut seen = BTreeSet::new();
    all.retain(|c| seen.insert(c.constraint.clone()));
    let kept: Vec<bool> = all
        .iter()
        .map(|c| {
            !all.iter().any(|o| {
                o.constraint.pairs.len() < c.constraint.pairs.len() && o.constraint.pairs.is_subset(&c.constraint.pairs)
            })
        })
        .collect();
    all.into_iter().zip(kept).filter(|(_, k)| *k).map(|(c, _)| c).collect()
}

fn check_nodes(constraints: &[PathConstraint], nodes: &[String], cap: usize) -> Result<(), CertifyError> {
    if nodes.len() > cap {
        return Err(CertifyError::TooManyNodes { nodes: nodes.len(), cap });
    }
    for (a, b) in constraints.iter().flat_map(|c| &c.pairs) {
        for n in [a, b] {
            if !nodes.contains(n) {
                return Err(CertifyError::UnknownNode(n.clone()));
            }
        }
    }
    Ok(())
}

/// First total order of `nodes` (permutations in lexicographic index order)
/// satisfying every constraint.
pub fn satisfiable_order(
    constraints: &[PathConstraint],
    nodes: &[String],
    cap: usize,
) -> Result<Option<Vec<String>>, CertifyError> {
    check_nodes(constraints, nodes, cap)?;
    Ok(nodes
        .iter()
        .cloned()
        .permutations(nodes.len())
        .find(|order| constraints.iter().all(|c| c.satisfied_by(order))))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    CyclicCertified,
    DagConsistent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleCertificate {
    pub verdict: Verdict,
    pub constraints: Vec<DerivedConstraint>,
    /// Witness order when the relations are consistent with a DAG.
    pub order: Option<Vec<String>>,
    /// For a cyclic verdict: every total order with the index of the first
    /// constraint it violates.
    pub refutation: Vec<(Vec<String>, usize)>,
}

impl CycleCertificate {
    /// Re-checks the evidence against the constraints.
    pub fn verify(&self) -> bool {
        let cs: Vec<&PathConstraint> = self.constraints.iter().map(|c| &c.constraint).collect();
        match self.verdict {
            Verdict::DagConsistent => self.order.as_ref().is_some_and(|o| cs.iter().all(|c| c.satisfied_by(o))),
            Verdict::CyclicCertified => {
                let n = self.refutation.first().map_or(0, |r| r.0.len());
                let distinct: BTreeSet<&Vec<String>> = self.refutation.iter().map(|r| &r.0).collect();
                let factorial: usize = (1..=n).product();
                distinct.len() == factorial
                    && self.refutation.iter().all(|(o, k)| cs.get(*k).is_some_and(|c| !c.satisfied_by(o)))
            }
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, c) in self.constraints.iter().enumerate() {
            out.push_str(&format!("constraint[{i}]={} {}\n", c.constraint, c.rule));
        }
        match self.verdict {
            Verdict::CyclicCertified => {
                for (order, k) in &self.refutation {
                    out.push_str(&format!("refuted order={} by={k}\n", order.join(",")));
                }
                out.push_str("verdict=cyclic\n");
            }
            Verdict::DagConsistent => {
                let order = self.order.as_deref().unwrap_or_default().join(",");
                out.push_str(&format!("verdict=dag order={order}\n"));
            }
        }
        out
    }
}

pub fn certify_cycle(a: &AffectsSet) -> Result<CycleCertificate, CertifyError> {
    certify_cycle_with_cap(a, DEFAULT_ORDER_CAP)
}

pub fn certify_cycle_with_cap(a: &AffectsSet, cap: usize) -> Result<CycleCertificate, CertifyError> {
    let constraints = derive_path_constraints(a);
    let plain: Vec<PathConstraint> = constraints.iter().map(|c| c.constraint.clone()).collect();
    match satisfiable_order(&plain, &a.observed, cap)? {
        Some(order) => Ok(CycleCertificate {
            verdict: Verdict::DagConsistent,
            constraints,
            order: Some(order),
            refutation: Vec::new(),
        }),
        None => {
            let refutation = a
                .observed
                .iter()
                .cloned()
                .permutations(a.observed.len())
                .map(|o| {
                    let k = plain.iter().position(|c| !c.satisfied_by(&o)).expect("no order satisfies all");
                    (o, k)
                })
                .collect();
            Ok(CycleCertificate { verdict: Verdict::CyclicCertified, constraints, order: None, refutation })
        }
    }
}
